//! Height functions of tilings, centring, predicted mean heights and empirical statistics.
//!
//! Convention: black cells have even coordinate sum. Crossing a lattice edge with a black cell
//! on the left (equivalently a white cell on the right) raises the height by 1 when no domino
//! crosses the edge and lowers it by 3 when one does. The reference vertex is pinned to 0.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use thiserror::Error;

use crate::enumerate::Tiling;
use crate::lattice::{is_black, trace_boundary, turns, Cell, CellRegion, TemperleyanRegion, Vertex};

#[derive(Debug, Error, PartialEq)]
pub enum HeightError {
    #[error("inconsistent tiling: height mismatch at vertex {0:?}")]
    Consistency(Vertex),
    #[error("fields belong to different regions")]
    Shape,
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
    #[error("points map to the same vertex {0:?}")]
    DegeneratePair(Vertex),
    #[error("point {0} is not within 2 epsilon of a region vertex")]
    OutsideRegion(Complex64),
    #[error("region boundary is not a simple curve: {0}")]
    Boundary(String),
    #[error("malformed height CSV: {0}")]
    Format(String),
}

/// Order in which vertices are visited when integrating height increments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Traversal {
    BreadthFirst,
    DepthFirst,
}

const NONE: u32 = u32::MAX;
// E, N, W, S
const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Dense indexing of a region's cells and vertices over its bounding box.
#[derive(Debug, PartialEq)]
pub struct RegionLayout {
    origin: Vertex,
    // vertex grid is (w + 1) x (h + 1) for a w x h cell box
    w: i32,
    h: i32,
    cell_in: Vec<bool>,
    vertex_slot: Vec<u32>,
    vertices: Vec<Vertex>,
    reference: usize,
    epsilon: f64,
    // per vertex and direction: neighbour, left cell, right cell, sign of an uncrossed step
    edges: Vec<[Edge; 4]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Edge {
    to: u32,
    left: u32,
    right: u32,
    sign: i8,
}

impl RegionLayout {
    /// Layout with an explicit reference vertex; `None` picks the smallest vertex.
    pub fn new<R: CellRegion + ?Sized>(region: &R, reference: Option<Vertex>, epsilon: f64) -> Self {
        let cells = region.cells();
        let (lo, hi) = crate::lattice::bounding_box(cells).unwrap_or(((0, 0), (-1, -1)));
        let (w, h) = (hi.0 - lo.0 + 1, hi.1 - lo.1 + 1);
        let mut cell_in = vec![false; (w.max(0) * h.max(0)) as usize];
        for &(i, j) in cells {
            cell_in[((i - lo.0) * h + (j - lo.1)) as usize] = true;
        }
        let vertices: Vec<Vertex> = cells
            .iter()
            .flat_map(|&c| crate::lattice::cell_vertices(c))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut vertex_slot = vec![NONE; ((w + 1).max(0) * (h + 1).max(0)) as usize];
        for (k, &(x, y)) in vertices.iter().enumerate() {
            vertex_slot[((x - lo.0) * (h + 1) + (y - lo.1)) as usize] = k as u32;
        }
        let mut layout =
            RegionLayout { origin: lo, w, h, cell_in, vertex_slot, vertices, reference: 0, epsilon, edges: Vec::new() };
        layout.edges = layout
            .vertices
            .iter()
            .map(|&v| {
                let mut row = [Edge { to: NONE, left: NONE, right: NONE, sign: 0 }; 4];
                for (dir, e) in row.iter_mut().enumerate() {
                    let (left, right) = edge_cells(v, dir);
                    let li = layout.cell_index(left);
                    let ri = layout.cell_index(right);
                    if li.is_none() && ri.is_none() {
                        continue;
                    }
                    let positive = li.is_some_and(|_| is_black(left)) || ri.is_some_and(|_| !is_black(right));
                    let n = (v.0 + DIRS[dir].0, v.1 + DIRS[dir].1);
                    *e = Edge {
                        to: layout.vertex_index(n).expect("edge endpoints are region vertices") as u32,
                        left: li.map_or(NONE, |k| k as u32),
                        right: ri.map_or(NONE, |k| k as u32),
                        sign: if positive { 1 } else { -1 },
                    };
                }
                row
            })
            .collect();
        if let Some(r) = reference {
            layout.reference = layout.vertex_index(r).expect("reference vertex must belong to the region");
        }
        layout
    }

    pub fn for_region(region: &TemperleyanRegion) -> Self {
        Self::new(region, region.reference_vertex(), region.epsilon())
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn reference(&self) -> Vertex {
        self.vertices.get(self.reference).copied().unwrap_or((0, 0))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn point(&self, k: usize) -> Complex64 {
        let (x, y) = self.vertices[k];
        Complex64::new(x as f64 * self.epsilon, y as f64 * self.epsilon)
    }

    pub fn vertex_index(&self, v: Vertex) -> Option<usize> {
        let (x, y) = (v.0 - self.origin.0, v.1 - self.origin.1);
        if x < 0 || y < 0 || x > self.w || y > self.h {
            return None;
        }
        let s = self.vertex_slot[(x * (self.h + 1) + y) as usize];
        (s != NONE).then_some(s as usize)
    }

    fn cell_index(&self, c: Cell) -> Option<usize> {
        let (x, y) = (c.0 - self.origin.0, c.1 - self.origin.1);
        if x < 0 || y < 0 || x >= self.w || y >= self.h {
            return None;
        }
        let k = (x * self.h + y) as usize;
        self.cell_in[k].then_some(k)
    }

    pub fn contains_cell(&self, c: Cell) -> bool {
        self.cell_index(c).is_some()
    }

    /// True when all four squares around the vertex belong to the region.
    pub fn is_interior(&self, v: Vertex) -> bool {
        [(v.0 - 1, v.1 - 1), (v.0, v.1 - 1), (v.0 - 1, v.1), (v.0, v.1)]
            .iter()
            .all(|&c| self.contains_cell(c))
    }

    /// Nearest region vertex to a continuum point (lexicographic tie-break), within `2 epsilon`.
    pub fn nearest_vertex(&self, p: Complex64) -> Result<usize, HeightError> {
        let (fx, fy) = (p.re / self.epsilon, p.im / self.epsilon);
        let mut best: Option<(f64, Vertex, usize)> = None;
        for x in (fx.floor() as i32 - 2)..=(fx.ceil() as i32 + 2) {
            for y in (fy.floor() as i32 - 2)..=(fy.ceil() as i32 + 2) {
                let Some(k) = self.vertex_index((x, y)) else { continue };
                let d = ((x as f64 - fx).powi(2) + (y as f64 - fy).powi(2)).sqrt();
                let better = match best {
                    None => true,
                    Some((bd, bv, _)) => d < bd - 1e-12 || ((d - bd).abs() <= 1e-12 && (x, y) < bv),
                };
                if better {
                    best = Some((d, (x, y), k));
                }
            }
        }
        match best {
            Some((d, _, k)) if d <= 2.0 => Ok(k),
            _ => Err(HeightError::OutsideRegion(p)),
        }
    }

    /// Cell index of each cell's partner under `tiling` (`NONE` when uncovered).
    fn partners(&self, tiling: &Tiling) -> Vec<u32> {
        let mut partner = vec![NONE; self.cell_in.len()];
        for d in tiling.dominoes() {
            let [a, b] = d.cells();
            if let (Some(ia), Some(ib)) = (self.cell_index(a), self.cell_index(b)) {
                partner[ia] = ib as u32;
                partner[ib] = ia as u32;
            }
        }
        partner
    }

    fn step(e: &Edge, partner: &[u32]) -> i32 {
        let crossed = e.left != NONE && e.right != NONE && partner[e.left as usize] == e.right;
        e.sign as i32 * if crossed { -3 } else { 1 }
    }

    /// Integrates the increments of `tiling` from the reference vertex into `out`.
    pub fn heights_into(&self, tiling: &Tiling, traversal: Traversal, out: &mut Vec<i32>) -> Result<(), HeightError> {
        out.clear();
        out.resize(self.vertices.len(), i32::MIN);
        if self.vertices.is_empty() {
            return Ok(());
        }
        let partner = self.partners(tiling);
        let mut queue = VecDeque::with_capacity(self.vertices.len());
        queue.push_back(self.reference as u32);
        out[self.reference] = 0;
        loop {
            let next = match traversal {
                Traversal::BreadthFirst => queue.pop_front(),
                Traversal::DepthFirst => queue.pop_back(),
            };
            let Some(k) = next else { break };
            let here = out[k as usize];
            for e in &self.edges[k as usize] {
                if e.to == NONE {
                    continue;
                }
                let value = here + Self::step(e, &partner);
                let slot = &mut out[e.to as usize];
                if *slot == i32::MIN {
                    *slot = value;
                    queue.push_back(e.to);
                } else if *slot != value {
                    return Err(HeightError::Consistency(self.vertices[e.to as usize]));
                }
            }
        }
        Ok(())
    }
}

fn edge_cells((x, y): Vertex, dir: usize) -> (Cell, Cell) {
    match dir {
        0 => ((x, y), (x, y - 1)),
        1 => ((x - 1, y), (x, y)),
        2 => ((x - 1, y - 1), (x - 1, y)),
        _ => ((x, y - 1), (x - 1, y - 1)),
    }
}


/// Integer heights on the vertices of a region.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightField {
    layout: Arc<RegionLayout>,
    values: Vec<i32>,
}

impl HeightField {
    pub fn layout(&self) -> &Arc<RegionLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn get(&self, v: Vertex) -> Option<i32> {
        self.layout.vertex_index(v).map(|k| self.values[k])
    }

    /// Every region square carries four consecutive heights.
    pub fn face_rule_holds(&self) -> bool {
        let l = &self.layout;
        (0..l.w).all(|x| {
            (0..l.h).all(|y| {
                let c = (l.origin.0 + x, l.origin.1 + y);
                if !l.contains_cell(c) {
                    return true;
                }
                let mut vals: Vec<i32> = crate::lattice::cell_vertices(c)
                    .iter()
                    .map(|&v| self.values[l.vertex_index(v).unwrap()])
                    .collect();
                vals.sort_unstable();
                vals.windows(2).all(|w| w[1] == w[0] + 1)
            })
        })
    }

    /// Adjacent vertices along the region boundary differ by exactly one.
    pub fn boundary_rule_holds(&self) -> bool {
        self.edges().all(|(a, b, boundary)| !boundary || (self.values[a] - self.values[b]).abs() == 1)
    }

    /// Neighbouring vertices differ by 1 or 3.
    pub fn increments_valid(&self) -> bool {
        self.edges().all(|(a, b, _)| matches!((self.values[a] - self.values[b]).abs(), 1 | 3))
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        let l = &self.layout;
        l.vertices.iter().enumerate().flat_map(move |(k, &(x, y))| {
            // east and north edges only, each edge once
            [((x + 1, y), (x, y), (x, y - 1)), ((x, y + 1), (x - 1, y), (x, y))]
                .into_iter()
                .filter_map(move |(n, c1, c2)| {
                    let (a, b) = (l.contains_cell(c1), l.contains_cell(c2));
                    if !a && !b {
                        return None;
                    }
                    Some((k, l.vertex_index(n)?, a != b))
                })
        })
    }
}

/// Height function of a tiling of a Temperleyan region.
pub fn height_function(region: &TemperleyanRegion, tiling: &Tiling) -> Result<HeightField, HeightError> {
    height_function_with(&Arc::new(RegionLayout::for_region(region)), tiling, Traversal::BreadthFirst)
}

pub fn height_function_with(
    layout: &Arc<RegionLayout>,
    tiling: &Tiling,
    traversal: Traversal,
) -> Result<HeightField, HeightError> {
    let mut values = Vec::new();
    layout.heights_into(tiling, traversal, &mut values)?;
    Ok(HeightField { layout: Arc::clone(layout), values })
}

/// `h - h̄` stored exactly as numerators over the common denominator `samples`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredField {
    layout: Arc<RegionLayout>,
    numerators: Vec<i64>,
    samples: i64,
}

impl CenteredField {
    pub fn samples(&self) -> usize {
        self.samples as usize
    }

    pub fn numerators(&self) -> &[i64] {
        &self.numerators
    }

    pub fn value(&self, k: usize) -> f64 {
        self.numerators[k] as f64 / self.samples as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.numerators.len()).map(|k| self.value(k)).collect()
    }

    pub fn layout(&self) -> &Arc<RegionLayout> {
        &self.layout
    }
}

/// Exact vertex-wise mean of a sample of height fields.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanField {
    sums: Vec<i64>,
    samples: i64,
}

impl MeanField {
    pub fn get(&self, k: usize) -> Ratio<i64> {
        Ratio::new(self.sums[k], self.samples)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.sums.iter().map(|&s| s as f64 / self.samples as f64).collect()
    }
}

pub fn center(samples: &[HeightField]) -> Result<(Vec<CenteredField>, MeanField), HeightError> {
    if samples.len() < 2 {
        return Err(HeightError::TooFewSamples(2));
    }
    let layout = &samples[0].layout;
    if samples.iter().any(|s| !Arc::ptr_eq(&s.layout, layout) && *s.layout != **layout) {
        return Err(HeightError::Shape);
    }
    let n = samples.len() as i64;
    let mut sums = vec![0i64; layout.vertices.len()];
    for s in samples {
        for (acc, &v) in sums.iter_mut().zip(&s.values) {
            *acc += v as i64;
        }
    }
    let centered = samples
        .iter()
        .map(|s| CenteredField {
            layout: Arc::clone(layout),
            numerators: s.values.iter().zip(&sums).map(|(&v, &t)| v as i64 * n - t).collect(),
            samples: n,
        })
        .collect();
    Ok((centered, MeanField { sums, samples: n }))
}

/// Discrete harmonic prediction of the mean height.
///
/// Boundary data is the counterclockwise turning of the boundary measured from the reference
/// vertex, one unit per right angle (half a unit at the corner vertex itself), shifted by the
/// constant that best matches the tiling-independent boundary heights. Interior values solve
/// the five-point Laplace equation.
pub fn predict_mean_height(region: &TemperleyanRegion) -> Result<Vec<f64>, HeightError> {
    let layout = RegionLayout::for_region(region);
    let path = trace_boundary(region.cells()).map_err(|e| HeightError::Boundary(e.to_string()))?;
    let reference = layout.reference();
    let start = path
        .iter()
        .position(|&v| v == reference)
        .ok_or_else(|| HeightError::Boundary("reference vertex is not on the boundary".into()))?;
    let path: Vec<Vertex> = path[start..].iter().chain(&path[..start]).copied().collect();
    let t = turns(&path);
    let none = vec![NONE; layout.cell_in.len()];
    let mut exact = Vec::with_capacity(path.len());
    let mut turning = Vec::with_capacity(path.len());
    let (mut h, mut acc) = (0i32, 0i32);
    for k in 0..path.len() {
        exact.push(h as f64);
        turning.push(acc as f64 + 0.5 * t[k] as f64);
        acc += t[k];
        let (a, b) = (path[k], path[(k + 1) % path.len()]);
        let dir = DIRS.iter().position(|&d| d == (b.0 - a.0, b.1 - a.1)).unwrap();
        h += RegionLayout::step(&layout.edges[layout.vertex_index(a).unwrap()][dir], &none);
    }
    let shift = exact.iter().zip(&turning).map(|(e, t)| e - t).sum::<f64>() / path.len() as f64;
    let mut values = vec![f64::NAN; layout.vertices.len()];
    for (k, &v) in path.iter().enumerate() {
        values[layout.vertex_index(v).unwrap()] = turning[k] + shift;
    }
    solve_dirichlet(&layout, &mut values);
    Ok(values)
}

/// Fills NaN entries of `values` (interior vertices) with the discrete harmonic extension of
/// the finite ones, by conjugate gradients on the five-point Laplacian.
fn solve_dirichlet(layout: &RegionLayout, values: &mut [f64]) {
    let unknown: Vec<usize> = (0..values.len()).filter(|&k| values[k].is_nan()).collect();
    if unknown.is_empty() {
        return;
    }
    let mut slot = vec![usize::MAX; values.len()];
    for (u, &k) in unknown.iter().enumerate() {
        slot[k] = u;
    }
    let nbrs: Vec<[usize; 4]> = unknown
        .iter()
        .map(|&k| {
            let (x, y) = layout.vertices[k];
            DIRS.map(|(dx, dy)| layout.vertex_index((x + dx, y + dy)).expect("interior vertex"))
        })
        .collect();
    let rhs: Vec<f64> = nbrs
        .iter()
        .map(|ns| ns.iter().filter(|&&n| slot[n] == usize::MAX).map(|&n| values[n]).sum())
        .collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        for (u, ns) in nbrs.iter().enumerate() {
            let mut s = 4.0 * x[u];
            for &n in ns {
                if slot[n] != usize::MAX {
                    s -= x[slot[n]];
                }
            }
            out[u] = s;
        }
    };
    let m = unknown.len();
    let mut x = vec![0.0; m];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let tol = 1e-24 * rhs.iter().map(|v| v * v).sum::<f64>().max(1.0);
    for _ in 0..10 * m + 100 {
        if rr <= tol {
            break;
        }
        apply(&p, &mut ap);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    for (u, &k) in unknown.iter().enumerate() {
        values[k] = x[u];
    }
}

/// Sample covariance with its delete-one jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CovarianceEstimate {
    pub covariance: f64,
    pub std_error: f64,
}

pub fn covariance_with_jackknife(xs: &[f64], ys: &[f64]) -> CovarianceEstimate {
    let n = xs.len();
    assert!(n >= 3 && ys.len() == n, "need at least three paired samples");
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let dx: Vec<f64> = xs.iter().map(|x| x - mx).collect();
    let dy: Vec<f64> = ys.iter().map(|y| y - my).collect();
    let sxy: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
    let covariance = sxy / (nf - 1.0);
    // leave-one-out: sums of centred values drop by d_i, products by d_i e_i
    let loo: Vec<f64> = dx
        .iter()
        .zip(&dy)
        .map(|(&a, &b)| {
            let s = sxy - a * b - (-a) * (-b) / (nf - 1.0);
            s / (nf - 2.0)
        })
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / nf;
    let var = (nf - 1.0) / nf * loo.iter().map(|c| (c - mean_loo).powi(2)).sum::<f64>();
    CovarianceEstimate { covariance, std_error: var.sqrt() }
}

/// Covariance of the centred heights at the vertices nearest `p` and `q`.
pub fn covariance_empirical(
    samples: &[HeightField],
    p: Complex64,
    q: Complex64,
) -> Result<CovarianceEstimate, HeightError> {
    if samples.len() < 3 {
        return Err(HeightError::TooFewSamples(3));
    }
    let layout = &samples[0].layout;
    let (a, b) = (layout.nearest_vertex(p)?, layout.nearest_vertex(q)?);
    if a == b {
        return Err(HeightError::DegeneratePair(layout.vertices[a]));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.values[a] as f64).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.values[b] as f64).collect();
    Ok(covariance_with_jackknife(&xs, &ys))
}

/// Quadrature weights `epsilon^2 * phi(x)` over the region vertices.
pub fn observable_weights(layout: &RegionLayout, phi: impl Fn(Complex64) -> f64) -> Vec<f64> {
    let e2 = layout.epsilon * layout.epsilon;
    (0..layout.vertices.len()).map(|k| e2 * phi(layout.point(k))).collect()
}

/// `epsilon^2 * sum_x phi(x) h0(x)` over the region vertices.
pub fn smoothed_observable(sample: &CenteredField, phi: impl Fn(Complex64) -> f64) -> f64 {
    let w = observable_weights(&sample.layout, phi);
    w.iter().enumerate().map(|(k, wk)| wk * sample.value(k)).sum()
}

/// Height CSV: a header line `origin,<x0>,<y0>` naming the lower-left vertex of the bounding
/// box, then one line per vertex row from `y0` upwards; `*` marks vertices outside the region.
pub fn to_csv(field: &HeightField) -> String {
    let l = &field.layout;
    let mut out = format!("origin,{},{}\n", l.origin.0, l.origin.1);
    for y in 0..=l.h.max(-1) {
        let row: Vec<String> = (0..=l.w.max(-1))
            .map(|x| match l.vertex_index((l.origin.0 + x, l.origin.1 + y)) {
                Some(k) => field.values[k].to_string(),
                None => "*".into(),
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a height CSV into `(vertex, value)` pairs.
pub fn parse_csv(text: &str) -> Result<Vec<(Vertex, i32)>, HeightError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| HeightError::Format("empty".into()))?;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 3 || parts[0] != "origin" {
        return Err(HeightError::Format(format!("bad header {header:?}")));
    }
    let bad = |s: &str| HeightError::Format(s.to_string());
    let x0: i32 = parts[1].parse().map_err(|_| bad(parts[1]))?;
    let y0: i32 = parts[2].parse().map_err(|_| bad(parts[2]))?;
    let mut out = Vec::new();
    for (dy, line) in lines.enumerate() {
        for (dx, tok) in line.split(',').enumerate() {
            if tok == "*" {
                continue;
            }
            let v: i32 = tok.parse().map_err(|_| bad(tok))?;
            out.push(((x0 + dx as i32, y0 + dy as i32), v));
        }
    }
    out.sort();
    Ok(out)
}

/// Running sums over a stream of height fields of one region: exact vertex sums, plus the
/// heights at tracked vertices and linear observables of each sample.
#[derive(Clone, Debug)]
pub struct HeightEnsemble {
    pub sums: Vec<i64>,
    pub samples: usize,
    pub tracked: Vec<usize>,
    pub tracked_values: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub observables: Vec<Vec<f64>>,
}

impl HeightEnsemble {
    pub fn new(vertices: usize, tracked: Vec<usize>, weights: Vec<Vec<f64>>) -> Self {
        HeightEnsemble {
            sums: vec![0; vertices],
            samples: 0,
            tracked_values: vec![Vec::new(); tracked.len()],
            observables: vec![Vec::new(); weights.len()],
            tracked,
            weights,
        }
    }

    pub fn push(&mut self, heights: &[i32]) {
        for (s, &h) in self.sums.iter_mut().zip(heights) {
            *s += h as i64;
        }
        for (t, &k) in self.tracked.iter().enumerate() {
            self.tracked_values[t].push(heights[k] as f64);
        }
        for (o, w) in self.weights.iter().enumerate() {
            let v: f64 = w.iter().zip(heights).map(|(a, &h)| a * h as f64).sum();
            self.observables[o].push(v);
        }
        self.samples += 1;
    }

    /// Associative merge of two ensembles accumulated in sample order `self` then `other`.
    pub fn merge(mut self, other: HeightEnsemble) -> HeightEnsemble {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        self.samples += other.samples;
        for (a, b) in self.tracked_values.iter_mut().zip(other.tracked_values) {
            a.extend(b);
        }
        for (a, b) in self.observables.iter_mut().zip(other.observables) {
            a.extend(b);
        }
        self
    }

    pub fn mean(&self) -> Vec<f64> {
        self.sums.iter().map(|&s| s as f64 / self.samples as f64).collect()
    }

    /// Observable values of the centred samples (the empirical mean subtracted).
    pub fn centered_observable(&self, o: usize) -> Vec<f64> {
        let v = &self.observables[o];
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - m).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{enumerate_tilings, Domino, Orientation};
    use crate::lattice::{build_even_rectangle, make_temperleyan};

    fn region(m: i32, n: i32) -> TemperleyanRegion {
        make_temperleyan(build_even_rectangle(m, n, 1.0).unwrap(), (0, 0)).unwrap()
    }

    #[test]
    fn every_tiling_of_small_region_satisfies_rules() {
        let r = region(5, 3);
        let layout = Arc::new(RegionLayout::for_region(&r));
        for t in enumerate_tilings(&r).unwrap() {
            let f = height_function_with(&layout, &t, Traversal::BreadthFirst).unwrap();
            assert!(f.face_rule_holds());
            assert!(f.boundary_rule_holds());
            assert!(f.increments_valid());
            assert_eq!(f.get(r.reference_vertex().unwrap()), Some(0));
            let g = height_function_with(&layout, &t, Traversal::DepthFirst).unwrap();
            assert_eq!(f, g);
        }
    }

    #[test]
    fn distinct_tilings_give_distinct_heights() {
        let r = region(5, 5);
        let layout = Arc::new(RegionLayout::for_region(&r));
        let fields: Vec<Vec<i32>> = enumerate_tilings(&r)
            .unwrap()
            .iter()
            .map(|t| height_function_with(&layout, t, Traversal::BreadthFirst).unwrap().values)
            .collect();
        let unique: BTreeSet<Vec<i32>> = fields.iter().cloned().collect();
        assert_eq!(unique.len(), fields.len());
    }

    #[test]
    fn invalid_tiling_is_a_consistency_error() {
        let r = region(3, 3);
        // two dominoes covering the same cell break the increment rule somewhere
        let t = Tiling::new(vec![
            Domino::new((1, 0), Orientation::H),
            Domino::new((1, 0), Orientation::V),
            Domino::new((0, 1), Orientation::V),
            Domino::new((2, 1), Orientation::V),
        ]);
        assert!(matches!(height_function(&r, &t), Err(HeightError::Consistency(_))));
    }

    #[test]
    fn centering_identical_fields_gives_zero() {
        let r = region(3, 3);
        let t = enumerate_tilings(&r).unwrap().remove(0);
        let f = height_function(&r, &t).unwrap();
        let (c, mean) = center(&[f.clone(), f.clone()]).unwrap();
        assert!(c.iter().all(|c| c.numerators().iter().all(|&v| v == 0)));
        for (k, &v) in f.values().iter().enumerate() {
            assert_eq!(mean.get(k), Ratio::from_integer(v as i64));
        }
        assert_eq!(center(&[f]), Err(HeightError::TooFewSamples(2)));
    }

    #[test]
    fn center_rejects_mixed_regions() {
        let a = height_function(&region(3, 3), &enumerate_tilings(&region(3, 3)).unwrap()[0]).unwrap();
        let b = height_function(&region(5, 3), &enumerate_tilings(&region(5, 3)).unwrap()[0]).unwrap();
        assert_eq!(center(&[a, b]).unwrap_err(), HeightError::Shape);
    }

    #[test]
    fn unit_square_prediction_steps_by_one_per_corner() {
        let r = region(21, 21);
        let layout = RegionLayout::for_region(&r);
        let pred = predict_mean_height(&r).unwrap();
        let at = |v: Vertex| pred[layout.vertex_index(v).unwrap()];
        // mid-side boundary values increase by one per corner going counterclockwise
        let bottom = at((10, 0));
        let right = at((21, 10));
        let top = at((10, 21));
        let left = at((0, 10));
        assert!((right - bottom - 1.0).abs() < 1e-12);
        assert!((top - right - 1.0).abs() < 1e-12);
        assert!((left - top - 1.0).abs() < 1e-12);
        // interior is harmonic
        let k = layout.vertex_index((10, 10)).unwrap();
        let nb: f64 = DIRS.iter().map(|&(dx, dy)| at((10 + dx, 10 + dy))).sum();
        assert!((4.0 * pred[k] - nb).abs() < 1e-8);
    }

    #[test]
    fn jackknife_matches_textbook_on_linear_data() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let est = covariance_with_jackknife(&xs, &ys);
        let var_x = xs.iter().map(|x| (x - 24.5f64).powi(2)).sum::<f64>() / 49.0;
        assert!((est.covariance - 2.0 * var_x).abs() < 1e-9);
        assert!(est.std_error > 0.0);
    }

    #[test]
    fn degenerate_pair_rejected() {
        let r = region(3, 3);
        let fields: Vec<HeightField> = enumerate_tilings(&r)
            .unwrap()
            .iter()
            .map(|t| height_function(&r, t).unwrap())
            .collect();
        let p = Complex64::new(1.0, 1.0);
        assert!(matches!(covariance_empirical(&fields, p, p + 0.1), Err(HeightError::DegeneratePair(_))));
    }

    #[test]
    fn zero_test_function_gives_zero() {
        let r = region(5, 5);
        let ts = enumerate_tilings(&r).unwrap();
        let fields: Vec<HeightField> = ts.iter().map(|t| height_function(&r, t).unwrap()).collect();
        let (c, _) = center(&fields).unwrap();
        assert_eq!(smoothed_observable(&c[0], |_| 0.0), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let r = region(5, 3);
        let t = enumerate_tilings(&r).unwrap().remove(1);
        let f = height_function(&r, &t).unwrap();
        let parsed = parse_csv(&to_csv(&f)).unwrap();
        let expected: Vec<(Vertex, i32)> = f.layout().vertices().iter().copied().zip(f.values().iter().copied()).collect();
        assert_eq!(parsed, expected);
        assert!(to_csv(&f).lines().nth(1).unwrap().starts_with('*'));
    }
}
