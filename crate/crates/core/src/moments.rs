//! Continuum height moments: pairing determinants, the closed two-point form, the pairing
//! sum over Green's functions, and contour-integral evaluation on the half-plane.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::greens::{Greens, GreensError};
use crate::lattice::DomainSpec;
use crate::quadrature::Rule;

#[derive(Debug, Error, PartialEq)]
pub enum MomentError {
    #[error("repeated point {0}")]
    Singularity(Complex64),
    #[error("pairing sum needs an even number of points, got {0}")]
    Arity(usize),
    #[error("paths {0} and {1} intersect or touch")]
    Disjointness(usize, usize),
    #[error("path contract violated: {0}")]
    Contract(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Greens(#[from] GreensError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Method {
    ClosedForm,
    Quadrature,
    PairingSum,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentResult {
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
}

fn check_distinct(xs: &[Complex64]) -> Result<(), MomentError> {
    for (i, a) in xs.iter().enumerate() {
        if xs[i + 1..].iter().any(|b| (a - b).norm() == 0.0) {
            return Err(MomentError::Singularity(*a));
        }
    }
    Ok(())
}

/// Determinant of a square complex matrix by LU with partial pivoting.
pub fn determinant(mut m: Vec<Vec<Complex64>>) -> Complex64 {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].norm().partial_cmp(&m[b][col].norm()).unwrap())
            .unwrap();
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for r in col + 1..n {
            let f = m[r][col] / p;
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
        }
    }
    det
}

/// `det(1/(x_j - x_i))` with zero diagonal.
pub fn pairing_det(xs: &[Complex64]) -> Result<Complex64, MomentError> {
    check_distinct(xs)?;
    if xs.len() % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let m = (0..xs.len())
        .map(|i| {
            (0..xs.len())
                .map(|j| if i == j { Complex64::new(0.0, 0.0) } else { 1.0 / (xs[j] - xs[i]) })
                .collect()
        })
        .collect();
    Ok(determinant(m))
}

/// All perfect pairings of `0..k`, each as a list of index pairs `(a, b)` with `a < b`.
pub fn pairings(k: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(rest: &[usize], acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let Some((&first, tail)) = rest.split_first() else {
            out.push(acc.clone());
            return;
        };
        for (i, &other) in tail.iter().enumerate() {
            let remaining: Vec<usize> = tail.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
            acc.push((first, other));
            rec(&remaining, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if k % 2 == 0 {
        rec(&(0..k).collect::<Vec<_>>(), &mut Vec::new(), &mut out);
    }
    out
}

/// `Σ_pairings Π 1/(x_a - x_b)²`.
pub fn pairing_sum(xs: &[Complex64]) -> Result<Complex64, MomentError> {
    if xs.len() % 2 == 1 {
        return Err(MomentError::Arity(xs.len()));
    }
    check_distinct(xs)?;
    Ok(pairings(xs.len())
        .iter()
        .map(|p| p.iter().map(|&(a, b)| 1.0 / (xs[a] - xs[b]).powi(2)).product::<Complex64>())
        .sum())
}

/// `(8/π²) Re log((p̄ - q)/(p - q))` on the half-plane.
pub fn two_point_closed(p: Complex64, q: Complex64) -> Result<f64, MomentError> {
    if p.im <= 0.0 || q.im <= 0.0 {
        return Err(GreensError::Domain(if p.im <= 0.0 { p } else { q }).into());
    }
    if p == q {
        return Err(MomentError::Singularity(p));
    }
    Ok(8.0 / (PI * PI) * ((p.conj() - q).norm() / (p - q).norm()).ln())
}

/// Limit of `E(h0(p_1) ... h0(p_k))`: zero for odd `k`, otherwise
/// `(-16/π)^(k/2) Σ_pairings Π g_D`.
pub fn k_point_moment(domain: &DomainSpec, ps: &[Complex64]) -> Result<MomentResult, MomentError> {
    check_distinct(ps)?;
    let g = Greens::new(*domain);
    for &p in ps {
        if !g.contains(p) {
            return Err(GreensError::Domain(p).into());
        }
    }
    if ps.len() % 2 == 1 {
        return Ok(MomentResult { value: 0.0, method: Method::PairingSum, error_estimate: 0.0 });
    }
    let n = ps.len();
    let mut gd = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            gd[i][j] = g.g_dirichlet(ps[i], ps[j])?;
        }
    }
    let sum: f64 = pairings(n).iter().map(|p| p.iter().map(|&(a, b)| gd[a][b]).product::<f64>()).sum();
    let value = (-16.0 / PI).powi((n / 2) as i32) * sum;
    Ok(MomentResult { value, method: Method::PairingSum, error_estimate: 0.0 })
}

/// Piecewise-linear path from a boundary point to an interior endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationPath {
    pub vertices: Vec<Complex64>,
}

impl IntegrationPath {
    pub fn segment(from: Complex64, to: Complex64) -> Self {
        IntegrationPath { vertices: vec![from, to] }
    }

    pub fn start(&self) -> Complex64 {
        self.vertices[0]
    }

    pub fn end(&self) -> Complex64 {
        *self.vertices.last().unwrap()
    }

    fn segments(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Nodes `z` and complex weights `dz` of an `n`-point rule on every segment.
    pub fn nodes(&self, n: usize) -> Vec<(Complex64, Complex64)> {
        let rule = Rule::get(n);
        self.segments()
            .flat_map(|(a, b)| {
                rule.mapped(0.0, 1.0).map(move |(t, w)| (a + (b - a) * t, (b - a) * w)).collect::<Vec<_>>()
            })
            .collect()
    }

    /// Smallest distance to another path.
    pub fn distance_to(&self, other: &IntegrationPath) -> f64 {
        self.segments()
            .flat_map(|s| other.segments().map(move |t| segment_distance(s, t)))
            .fold(f64::INFINITY, f64::min)
    }

    fn is_simple(&self) -> bool {
        let segs: Vec<_> = self.segments().collect();
        for i in 0..segs.len() {
            if (segs[i].1 - segs[i].0).norm() == 0.0 {
                return false;
            }
            for j in i + 2..segs.len() {
                if segment_distance(segs[i], segs[j]) == 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

fn point_segment(p: Complex64, (a, b): (Complex64, Complex64)) -> f64 {
    let d = b - a;
    let t = if d.norm_sqr() == 0.0 { 0.0 } else { ((p - a) * d.conj()).re / d.norm_sqr() };
    (p - (a + d * t.clamp(0.0, 1.0))).norm()
}

fn segment_distance(s: (Complex64, Complex64), t: (Complex64, Complex64)) -> f64 {
    let cross = |o: Complex64, a: Complex64, b: Complex64| ((a - o).conj() * (b - o)).im;
    let (d1, d2) = (cross(t.0, t.1, s.0), cross(t.0, t.1, s.1));
    let (d3, d4) = (cross(s.0, s.1, t.0), cross(s.0, s.1, t.1));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment(s.0, t).min(point_segment(s.1, t)).min(point_segment(t.0, s)).min(point_segment(t.1, s))
}

/// Checks the path family against the half-plane contract and returns the minimum separation.
pub fn validate_paths(points: &[Complex64], paths: &[IntegrationPath]) -> Result<f64, MomentError> {
    if points.len() != paths.len() {
        return Err(MomentError::Contract(format!("{} points but {} paths", points.len(), paths.len())));
    }
    for (i, (p, path)) in points.iter().zip(paths).enumerate() {
        if path.vertices.len() < 2 {
            return Err(MomentError::Contract(format!("path {i} has fewer than two vertices")));
        }
        if (path.end() - p).norm() > 1e-12 {
            return Err(MomentError::Contract(format!("path {i} ends at {} instead of {p}", path.end())));
        }
        if path.start().im != 0.0 {
            return Err(MomentError::Contract(format!("path {i} does not start on the real axis")));
        }
        if path.vertices[1..].iter().any(|z| z.im <= 0.0) {
            return Err(MomentError::Contract(format!("path {i} leaves the open half-plane")));
        }
        if !path.is_simple() {
            return Err(MomentError::Contract(format!("path {i} is not simple")));
        }
    }
    let mut sep = f64::INFINITY;
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            let d = paths[i].distance_to(&paths[j]);
            if d == 0.0 {
                return Err(MomentError::Disjointness(i, j));
            }
            sep = sep.min(d);
        }
    }
    Ok(sep)
}

/// Straight paths from the real axis, one per point, with horizontal start offsets chosen
/// greedily to keep them apart; the minimum separation is at least `0.05` times the smallest
/// distance between points.
pub fn default_paths(points: &[Complex64]) -> Result<Vec<IntegrationPath>, MomentError> {
    check_distinct(points)?;
    if let Some(p) = points.iter().find(|p| p.im <= 0.0) {
        return Err(GreensError::Domain(*p).into());
    }
    let scale = points
        .iter()
        .enumerate()
        .flat_map(|(i, a)| points[i + 1..].iter().map(move |b| (a - b).norm()))
        .fold(f64::INFINITY, f64::min)
        .min(points.iter().map(|p| p.im).fold(f64::INFINITY, f64::min))
        .min(1.0);
    let scale = if scale.is_finite() { scale } else { 1.0 };
    let offsets: Vec<f64> = [0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0]
        .iter()
        .map(|o| o * scale)
        .collect();
    let mut chosen: Vec<IntegrationPath> = Vec::new();
    for p in points {
        let mut best: Option<(f64, IntegrationPath)> = None;
        for &o in &offsets {
            let cand = IntegrationPath::segment(Complex64::new(p.re + o, 0.0), *p);
            let d = chosen.iter().map(|c| c.distance_to(&cand)).fold(f64::INFINITY, f64::min);
            // the endpoint of a later path must also stay clear of earlier paths
            if best.as_ref().is_none_or(|(bd, _)| d > *bd + 1e-12) {
                best = Some((d, cand));
            }
        }
        chosen.push(best.unwrap().1);
    }
    let sep = validate_paths(points, &chosen)?;
    let min_dist = points
        .iter()
        .enumerate()
        .flat_map(|(i, a)| points[i + 1..].iter().map(move |b| (a - b).norm()))
        .fold(f64::INFINITY, f64::min);
    if points.len() > 1 && sep < 0.05 * min_dist {
        return Err(MomentError::Contract(format!("could not separate paths (separation {sep})")));
    }
    Ok(chosen)
}

fn refine_nested(start: usize, max: usize, mut eval: impl FnMut(usize) -> f64) -> (f64, f64) {
    let mut n = start;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let next = eval(n);
        let change = (next - prev).abs();
        if change < 1e-8 || n >= max {
            return (next, change);
        }
        prev = next;
    }
}

/// Two-point moment on the half-plane by integrating the four `F±` terms along the paths.
pub fn two_point_quadrature(
    p: Complex64,
    q: Complex64,
    g1: &IntegrationPath,
    g2: &IntegrationPath,
) -> Result<MomentResult, MomentError> {
    validate_paths(&[p, q], &[g1.clone(), g2.clone()])?;
    let c = 4.0 / (PI * PI);
    let (value, err) = refine_nested(32, 4096, |n| {
        let a = g1.nodes(n);
        let b = g2.nodes(n);
        let mut total = Complex64::new(0.0, 0.0);
        for &(z1, d1) in &a {
            for &(z2, d2) in &b {
                let t1 = -d1 * d2 / (z2 - z1).powi(2);
                let t2 = d1.conj() * d2 / (z2 - z1.conj()).powi(2);
                let t3 = d1 * d2.conj() / (z2.conj() - z1).powi(2);
                let t4 = -d1.conj() * d2.conj() / (z2.conj() - z1.conj()).powi(2);
                total += t1 + t2 + t3 + t4;
            }
        }
        c * total.re
    });
    Ok(MomentResult { value, method: Method::Quadrature, error_estimate: err })
}

/// Pfaffian of an even antisymmetric matrix by expansion along the first row.
/// Sign-vector contour formula on the half-plane for `k ∈ {2, 4}`: the sum over
/// `ε ∈ {±1}^k` of `Π ε_i ∫ det(2/(π(z_j^(ε_j) - z_i^(ε_i)))) Π dz_i^(ε_i)`, multiplied by
/// `(-1)^(k/2)` so that it reproduces the positive two-point covariance.
pub fn contour_moment(points: &[Complex64], paths: &[IntegrationPath]) -> Result<MomentResult, MomentError> {
    let k = points.len();
    if k != 2 && k != 4 {
        return Err(MomentError::Unsupported(format!("contour quadrature is implemented for k = 2, 4 (got {k})")));
    }
    check_distinct(points)?;
    validate_paths(points, paths)?;
    let (start, max) = if k == 2 { (32, 4096) } else { (16, 256) };
    let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let (value, err) = refine_nested(start, max, |n| sign * contour_sum(paths, n));
    Ok(MomentResult { value, method: Method::Quadrature, error_estimate: err })
}

// Each path contributes 2n weighted nodes: (z, dz) for ε = +1 and (z̄, -dz̄) for ε = -1.
fn signed_nodes(path: &IntegrationPath, n: usize) -> Vec<(Complex64, Complex64)> {
    let nodes = path.nodes(n);
    nodes.iter().copied().chain(nodes.iter().map(|&(z, dz)| (z.conj(), -dz.conj()))).collect()
}

/// `Σ Π w · Pf(A)²` over all node tuples, with `A_ij = 2/(π(x_j - x_i))`.
///
/// The squared Pfaffian expands into products of entries in which every index appears twice,
/// so each term is a product of two double sums or a trace of four kernel matrices.
fn contour_sum(paths: &[IntegrationPath], n: usize) -> f64 {
    let k = paths.len();
    let nodes: Vec<Vec<(Complex64, Complex64)>> = paths.iter().map(|p| signed_nodes(p, n)).collect();
    let c = 2.0 / PI;
    // B_ij[u][v] = w_iu A_ij(u, v)
    let b = |i: usize, j: usize| {
        DMatrix::from_fn(nodes[i].len(), nodes[j].len(), |u, v| nodes[i][u].1 * c / (nodes[j][v].0 - nodes[i][u].0))
    };
    let s = |i: usize, j: usize| {
        let (ni, nj) = (&nodes[i], &nodes[j]);
        let mut t = Complex64::new(0.0, 0.0);
        for &(x, wx) in ni {
            for &(y, wy) in nj {
                let a = c / (y - x);
                t += wx * wy * a * a;
            }
        }
        t
    };
    let total = if k == 2 {
        s(0, 1)
    } else {
        let cycle = |p: [usize; 4]| (b(p[0], p[1]) * b(p[1], p[2]) * b(p[2], p[3]) * b(p[3], p[0])).trace();
        s(0, 1) * s(2, 3) + s(0, 2) * s(1, 3) + s(0, 3) * s(1, 2)
            - 2.0 * (cycle([0, 1, 3, 2]) + cycle([0, 1, 2, 3]) + cycle([0, 2, 1, 3]))
    };
    total.re
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn small_pairings() {
        assert_eq!(pairings(2), vec![vec![(0, 1)]]);
        assert_eq!(pairings(4).len(), 3);
        assert_eq!(pairings(6).len(), 15);
        assert_eq!(pairings(8).len(), 105);
        assert!(pairings(3).is_empty());
    }

    #[test]
    fn pairing_examples() {
        let (a, b) = (c(0.3, 1.0), c(-2.0, 0.5));
        let d = pairing_det(&[a, b]).unwrap();
        assert!((d - 1.0 / (b - a).powi(2)).norm() < 1e-14);
        assert_eq!(pairing_det(&[a, b, c(1.0, 1.0)]).unwrap(), Complex64::new(0.0, 0.0));
        let xs = [0.0, 1.0, 2.0, 3.0].map(|v| c(v, 0.0));
        let s = pairing_sum(&xs).unwrap();
        assert!((s.re - (1.0 + 1.0 / 16.0 + 1.0 / 9.0)).abs() < 1e-14);
        assert!((pairing_det(&xs).unwrap() - s).norm() < 1e-12);
        assert_eq!(pairing_sum(&xs[..3]), Err(MomentError::Arity(3)));
        assert_eq!(pairing_det(&[a, a]), Err(MomentError::Singularity(a)));
    }

    #[test]
    fn two_point_closed_value() {
        let v = two_point_closed(c(0.0, 1.0), c(0.0, 2.0)).unwrap();
        assert!((v - 8.0 / (PI * PI) * 3f64.ln()).abs() < 1e-15);
        assert!((v - 0.8905016).abs() < 1e-6);
        let g = Greens::half_plane().g_dirichlet(c(0.0, 1.0), c(0.0, 2.0)).unwrap();
        assert!((v + 16.0 / PI * g).abs() < 1e-12);
    }

    #[test]
    fn odd_moments_vanish() {
        let r = k_point_moment(&DomainSpec::half_plane(), &[c(0.0, 1.0), c(1.0, 1.0), c(2.0, 3.0)]).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn two_point_quadrature_matches_closed_form() {
        let (p, q) = (c(0.0, 1.0), c(0.0, 2.0));
        let paths = default_paths(&[p, q]).unwrap();
        let r = two_point_quadrature(p, q, &paths[0], &paths[1]).unwrap();
        let exact = two_point_closed(p, q).unwrap();
        assert!((r.value - exact).abs() < 1e-6, "{} vs {exact}", r.value);
        let r2 = contour_moment(&[p, q], &paths).unwrap();
        assert!((r2.value - exact).abs() < 1e-6, "{} vs {exact}", r2.value);
    }

    #[test]
    fn crossing_paths_rejected() {
        let (p, q) = (c(0.0, 1.0), c(1.0, 1.0));
        let g1 = IntegrationPath::segment(c(1.0, 0.0), p);
        let g2 = IntegrationPath::segment(c(0.0, 0.0), q);
        assert_eq!(two_point_quadrature(p, q, &g1, &g2), Err(MomentError::Disjointness(0, 1)));
        let bad = IntegrationPath::segment(c(0.0, 0.0), c(0.0, 3.0));
        assert!(matches!(two_point_quadrature(p, q, &bad, &g2), Err(MomentError::Contract(_))));
    }
}
