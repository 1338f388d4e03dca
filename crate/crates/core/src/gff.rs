//! Gaussian free field on a rectangle through its Dirichlet eigenbasis, Wick and conformal
//! invariance checks, and comparison of dimer observables with the field.
//!
//! The field is `F = Σ c_i f_i / sqrt(-λ_i)` with i.i.d. standard normal `c_i`, so
//! `E(F(z1) F(z2)) = Σ f_i(z1) f_i(z2) / (-λ_i) = -g_D(z1, z2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::greens::{eigenmodes, EigenMode, Greens};
use crate::lattice::{DomainKind, DomainSpec};
use crate::quadrature::Rule;
use crate::rng;
use crate::stats::{self, Summary};

#[derive(Debug, Error, PartialEq)]
pub enum GffError {
    #[error("map contract violated: {0}")]
    Contract(String),
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
    #[error("{0}")]
    Unsupported(String),
}

/// Default number of retained modes on the unit square.
pub const DEFAULT_MODES: usize = 64 * 64;

/// Smooth test function, or a density when used as a 2-form against area measure.
#[derive(Clone)]
pub enum TestFunction {
    /// Eigenfunction `f_{j,k}` of the rectangle it is paired on.
    Eigen { j: u32, k: u32 },
    /// `exp(1 - 1/(1 - |z-c|²/r²))` inside the disk, 0 outside.
    Bump { center: Complex64, radius: f64 },
    /// Any C¹ function; `support` bounds where it is nonzero, as `(lower-left, upper-right)`.
    Custom { f: Arc<dyn Fn(Complex64) -> f64 + Send + Sync>, support: Option<(Complex64, Complex64)> },
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestFunction::Eigen { j, k } => write!(fm, "eigen:{j},{k}"),
            TestFunction::Bump { center, radius } => write!(fm, "bump:{},{},{}", center.re, center.im, radius),
            TestFunction::Custom { .. } => write!(fm, "custom"),
        }
    }
}

impl TestFunction {
    pub fn eval_on(&self, a: f64, b: f64, z: Complex64) -> f64 {
        match self {
            TestFunction::Eigen { j, k } => EigenMode { j: *j, k: *k, a, b }.eval(z),
            TestFunction::Bump { center, radius } => bump(*center, *radius, z),
            TestFunction::Custom { f, .. } => f(z),
        }
    }

    fn support(&self) -> Option<(Complex64, Complex64)> {
        match self {
            TestFunction::Eigen { .. } => None,
            TestFunction::Bump { center, radius } => {
                Some((center - Complex64::new(*radius, *radius), center + Complex64::new(*radius, *radius)))
            }
            TestFunction::Custom { support, .. } => *support,
        }
    }
}

pub fn bump(center: Complex64, radius: f64, z: Complex64) -> f64 {
    let s = (z - center).norm_sqr() / (radius * radius);
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s)).exp()
    }
}

/// Retained modes of a rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct GffModel {
    pub a: f64,
    pub b: f64,
    pub modes: Vec<EigenMode>,
}

impl GffModel {
    pub fn new(a: f64, b: f64, modes: usize) -> Self {
        GffModel { a, b, modes: eigenmodes(a, b, modes) }
    }

    pub fn unit_square() -> Self {
        Self::new(1.0, 1.0, DEFAULT_MODES)
    }

    /// `⟨φ, f_i⟩` for every retained mode, by tensor Gauss–Legendre quadrature.
    pub fn inner_products(&self, phi: &TestFunction) -> Vec<f64> {
        if let TestFunction::Eigen { j, k } = phi {
            return self.modes.iter().map(|m| if (m.j, m.k) == (*j, *k) { 1.0 } else { 0.0 }).collect();
        }
        let (lo, hi) = phi.support().unwrap_or((Complex64::new(0.0, 0.0), Complex64::new(self.a, self.b)));
        let (x0, x1) = (lo.re.max(0.0), hi.re.min(self.a));
        let (y0, y1) = (lo.im.max(0.0), hi.im.min(self.b));
        if x0 >= x1 || y0 >= y1 {
            return vec![0.0; self.modes.len()];
        }
        let jmax = self.modes.iter().map(|m| m.j).max().unwrap_or(1) as f64;
        let kmax = self.modes.iter().map(|m| m.k).max().unwrap_or(1) as f64;
        let nodes = |len: f64, side: f64, top: f64| -> Vec<(f64, f64)> {
            // enough panels to resolve the highest oscillation over the interval
            let panels = ((top * len / side).ceil() as usize + 8).max(8);
            let rule = Rule::get(16);
            (0..panels)
                .flat_map(|p| {
                    let h = len / panels as f64;
                    rule.mapped(p as f64 * h, (p + 1) as f64 * h).collect::<Vec<_>>()
                })
                .collect()
        };
        let xs: Vec<(f64, f64)> = nodes(x1 - x0, self.a, jmax).into_iter().map(|(x, w)| (x0 + x, w)).collect();
        let ys: Vec<(f64, f64)> = nodes(y1 - y0, self.b, kmax).into_iter().map(|(y, w)| (y0 + y, w)).collect();
        // G[x][k] = Σ_y w_y φ(x,y) sin(πky/b)
        let kmax = kmax as usize;
        let jmax = jmax as usize;
        let sin_y: Vec<Vec<f64>> =
            ys.iter().map(|&(y, _)| (1..=kmax).map(|k| (PI * k as f64 * y / self.b).sin()).collect()).collect();
        let mut g = vec![vec![0.0; kmax]; xs.len()];
        for (xi, &(x, _)) in xs.iter().enumerate() {
            for (yi, &(y, wy)) in ys.iter().enumerate() {
                let v = wy * phi.eval_on(self.a, self.b, Complex64::new(x, y));
                if v != 0.0 {
                    for k in 0..kmax {
                        g[xi][k] += v * sin_y[yi][k];
                    }
                }
            }
        }
        let mut ip = vec![vec![0.0; kmax]; jmax];
        for (xi, &(x, wx)) in xs.iter().enumerate() {
            for j in 0..jmax {
                let s = wx * (PI * (j + 1) as f64 * x / self.a).sin();
                for k in 0..kmax {
                    ip[j][k] += s * g[xi][k];
                }
            }
        }
        let c = 2.0 / (self.a * self.b).sqrt();
        self.modes.iter().map(|m| c * ip[m.j as usize - 1][m.k as usize - 1]).collect()
    }

    /// Weights `⟨φ, f_i⟩ / sqrt(-λ_i)` so that `pair = Σ c_i w_i`.
    pub fn pairing_weights(&self, phi: &TestFunction) -> Vec<f64> {
        self.inner_products(phi)
            .iter()
            .zip(&self.modes)
            .map(|(p, m)| p / (-m.eigenvalue()).sqrt())
            .collect()
    }

    /// `Σ ⟨φ1, f_i⟩⟨φ2, f_i⟩ / (-λ_i)` over the retained modes.
    pub fn covariance(&self, w1: &[f64], w2: &[f64]) -> f64 {
        w1.iter().zip(w2).map(|(a, b)| a * b).sum()
    }

    /// `E(F(z1) F(z2))` truncated to the retained modes.
    pub fn point_covariance(&self, z1: Complex64, z2: Complex64) -> f64 {
        self.modes.iter().map(|m| m.eval(z1) * m.eval(z2) / -m.eigenvalue()).sum()
    }
}

/// Retained coefficients `c_i` of one field sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GffSample {
    pub coefficients: Vec<f64>,
}

pub fn sample_gff_with<R: Rng + ?Sized>(model: &GffModel, rng: &mut R) -> GffSample {
    GffSample { coefficients: (0..model.modes.len()).map(|_| rng.sample(StandardNormal)).collect() }
}

/// One field sample; replica `r` of a batch uses stream `r` of the seed.
pub fn sample_gff(model: &GffModel, seed: u64) -> GffSample {
    sample_gff_with(model, &mut rng::stream(seed, 0))
}

/// `∫ φ F` for a sample, given `pairing_weights(φ)`.
pub fn pair(sample: &GffSample, weights: &[f64]) -> f64 {
    sample.coefficients.iter().zip(weights).map(|(c, w)| c * w).sum()
}

/// Draws `count` samples and returns `∫ φ_a F` for every weight vector, without keeping the
/// coefficients.
pub fn sample_pairings(model: &GffModel, weights: &[Vec<f64>], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(count); weights.len()];
    let mut rng = rng::stream(seed, 0);
    let mut coeffs = vec![0.0; model.modes.len()];
    for _ in 0..count {
        for c in coeffs.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        for (o, w) in out.iter_mut().zip(weights) {
            o.push(coeffs.iter().zip(w).map(|(c, w)| c * w).sum());
        }
    }
    out
}

/// Fourth joint moment of four pairings against the Wick prediction.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct WickReport {
    pub empirical: f64,
    pub predicted: f64,
    pub relative_deviation: f64,
    pub samples: usize,
}

/// `values[a]` holds samples of `∫ φ_a F`; `cov` is the analytic covariance matrix.
pub fn wick_check(values: &[Vec<f64>; 4], cov: &[[f64; 4]; 4]) -> Result<WickReport, GffError> {
    let n = values[0].len();
    if n < 10_000 {
        return Err(GffError::TooFewSamples(10_000));
    }
    let empirical = (0..n).map(|s| values.iter().map(|v| v[s]).product::<f64>()).sum::<f64>() / n as f64;
    let predicted = cov[0][1] * cov[2][3] + cov[0][2] * cov[1][3] + cov[0][3] * cov[1][2];
    Ok(WickReport { empirical, predicted, relative_deviation: (empirical - predicted).abs() / predicted.abs(), samples: n })
}

/// A Möbius transformation `(a z + b) / (c z + d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Mobius { a: o, b: z, c: z, d: o }
    }

    /// `e^{iθ} (z - p) / (1 - p̄ z)`.
    pub fn disk_automorphism(p: Complex64, theta: f64) -> Self {
        let r = Complex64::from_polar(1.0, theta);
        Mobius { a: r, b: -r * p, c: -p.conj(), d: Complex64::new(1.0, 0.0) }
    }

    /// `i (1 - z) / (1 + z)`, unit disk onto the upper half-plane.
    pub fn cayley() -> Self {
        let i = Complex64::i();
        Mobius { a: -i, b: i, c: Complex64::new(1.0, 0.0), d: Complex64::new(1.0, 0.0) }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        (self.a * self.d - self.b * self.c) / (self.c * z + self.d).powi(2)
    }

    pub fn inverse(&self) -> Self {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }
}

/// A disk carrying a density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

fn circumcircle(p: [Complex64; 3]) -> Option<Disk> {
    let (a, b, c) = (p[0], p[1], p[2]);
    let d = 2.0 * (a.re * (b.im - c.im) + b.re * (c.im - a.im) + c.re * (a.im - b.im));
    if d.abs() < 1e-300 {
        return None;
    }
    let ux = (a.norm_sqr() * (b.im - c.im) + b.norm_sqr() * (c.im - a.im) + c.norm_sqr() * (a.im - b.im)) / d;
    let uy = (a.norm_sqr() * (c.re - b.re) + b.norm_sqr() * (a.re - c.re) + c.norm_sqr() * (b.re - a.re)) / d;
    let center = Complex64::new(ux, uy);
    Some(Disk { center, radius: (a - center).norm() })
}

/// Double integral `∬ w(z1) w(z2) K(z1, z2) dA dA` over `disk × disk` with a log-singular
/// kernel; the inner integral runs in polar coordinates about `z1`.
fn double_disk_integral(
    disk: Disk,
    order: usize,
    w: &dyn Fn(Complex64) -> f64,
    kernel: &dyn Fn(Complex64, Complex64) -> f64,
) -> f64 {
    let rule = Rule::get(order);
    let nt = 2 * order;
    let thetas: Vec<(f64, f64)> = (0..nt).map(|t| (2.0 * PI * (t as f64 + 0.5) / nt as f64, 2.0 * PI / nt as f64)).collect();
    // outer: polar about the disk centre, radial GL in r
    let outer: Vec<(Complex64, f64)> = rule
        .mapped(0.0, disk.radius)
        .flat_map(|(r, wr)| thetas.iter().map(move |&(t, wt)| (disk.center + Complex64::from_polar(r, t), wr * wt * r)))
        .collect();
    let radial_edges = [0.0, 1e-4, 1e-3, 1e-2, 0.1, 0.4, 1.0];
    outer
        .iter()
        .map(|&(z1, a1)| {
            let w1 = w(z1);
            if w1 == 0.0 {
                return 0.0;
            }
            let off = z1 - disk.center;
            let mut inner = 0.0;
            for &(t, wt) in &thetas {
                let dir = Complex64::from_polar(1.0, t);
                // distance from z1 to the circle along dir
                let bq = (off.conj() * dir).re;
                let reach = -bq + (bq * bq - off.norm_sqr() + disk.radius * disk.radius).max(0.0).sqrt();
                for e in radial_edges.windows(2) {
                    for (s, ws) in rule.mapped(e[0] * reach, e[1] * reach) {
                        let z2 = z1 + dir * s;
                        let w2 = w(z2);
                        if w2 != 0.0 {
                            inner += wt * ws * s * w2 * kernel(z1, z2);
                        }
                    }
                }
            }
            a1 * w1 * inner
        })
        .sum()
}

/// Variances on both sides of the conformal invariance statement.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ConformalReport {
    pub var_x: f64,
    pub var_y: f64,
    pub relative_difference: f64,
}

/// `Var X = ∬ ω ω (-g_D^U)` against `Var Y = ∬ f*ω f*ω (-g_D^V)` where `V` is the unit disk,
/// `f: V → U` is Möbius, `U` is the unit disk or the upper half-plane, and
/// `f*ω(y) = ω(f(y)) |f'(y)|²`. The density `ω` is supported in `support`.
pub fn conformal_invariance_check(
    omega: &dyn Fn(Complex64) -> f64,
    support: Disk,
    target: &DomainSpec,
    map: Mobius,
    order: usize,
) -> Result<ConformalReport, GffError> {
    let gu = Greens::new(*target);
    let gv = Greens::new(DomainSpec::unit_disk());
    if !matches!(target.kind, DomainKind::HalfPlane) && *target != DomainSpec::unit_disk() {
        return Err(GffError::Unsupported("target must be the unit disk or the half-plane".into()));
    }
    let det = map.a * map.d - map.b * map.c;
    if det.norm() < 1e-14 {
        return Err(GffError::Contract("degenerate Möbius map".into()));
    }
    // boundary to boundary, interior to interior
    for k in 0..16 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.3) / 16.0);
        let w = map.apply(z);
        let on_boundary = match target.kind {
            DomainKind::HalfPlane => w.im.abs() < 1e-9 * (1.0 + w.norm()),
            _ => (w.norm() - 1.0).abs() < 1e-9,
        };
        if !on_boundary {
            return Err(GffError::Contract(format!("boundary point {z} maps off the boundary to {w}")));
        }
    }
    if !gu.contains(map.apply(Complex64::new(0.0, 0.0))) {
        return Err(GffError::Contract("map sends the disk outside the target domain".into()));
    }
    if !gu.contains(support.center) || (0..32).any(|k| !gu.contains(support.center + Complex64::from_polar(support.radius, k as f64 * PI / 16.0)) && support.radius > 0.0) {
        return Err(GffError::Contract("density support must lie inside the target domain".into()));
    }
    let kernel_u = |z1: Complex64, z2: Complex64| -gu.g_dirichlet(z1, z2).unwrap_or(0.0);
    let kernel_v = |y1: Complex64, y2: Complex64| -gv.g_dirichlet(y1, y2).unwrap_or(0.0);
    let var_x = double_disk_integral(support, order, omega, &kernel_u);
    let inv = map.inverse();
    let pre = circumcircle([0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0].map(|t| inv.apply(support.center + Complex64::from_polar(support.radius, t))))
        .ok_or_else(|| GffError::Contract("support preimage is not a disk".into()))?;
    let pull = |y: Complex64| {
        let v = omega(map.apply(y));
        if v == 0.0 {
            0.0
        } else {
            v * map.derivative(y).norm_sqr()
        }
    };
    let var_y = double_disk_integral(pre, order, &pull, &kernel_v);
    Ok(ConformalReport { var_x, var_y, relative_difference: (var_x - var_y).abs() / var_x.abs() })
}

/// Dimer observable statistics against the field prediction for one lattice spacing.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FieldComparison {
    pub epsilon: f64,
    pub dimer: Summary,
    /// `(16/π) Σ ⟨φ, f_i⟩² / (-λ_i)`.
    pub predicted_variance: f64,
    pub variance_ratio: f64,
    /// KS distance between standardized dimer and field samples.
    pub ks_distance: f64,
    /// 99th percentile of the same distance for two normal samples of these sizes.
    pub ks_threshold: f64,
}

/// Compares centred dimer observables with samples of `(4/sqrt(π)) ∫ φ F`.
pub fn field_comparison(
    epsilon: f64,
    dimer: &[f64],
    model: &GffModel,
    phi: &TestFunction,
    field_samples: usize,
    seed: u64,
) -> Result<FieldComparison, GffError> {
    if dimer.len() < 10 {
        return Err(GffError::TooFewSamples(10));
    }
    let w = model.pairing_weights(phi);
    let predicted_variance = 16.0 / PI * model.covariance(&w, &w);
    let scale = 4.0 / PI.sqrt();
    let field: Vec<f64> = sample_pairings(model, std::slice::from_ref(&w), field_samples, seed)
        .remove(0)
        .into_iter()
        .map(|v| scale * v)
        .collect();
    let summary = stats::summarize(dimer);
    let ks_distance = stats::ks_two_sample(&stats::standardize(dimer), &stats::standardize(&field));
    let ks_threshold = stats::ks_threshold(dimer.len(), field.len(), 0.99, 200, &mut rng::stream(seed, 1));
    Ok(FieldComparison {
        epsilon,
        dimer: summary,
        predicted_variance,
        variance_ratio: summary.variance / predicted_variance,
        ks_distance,
        ks_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn samples_reproducible() {
        let m = GffModel::new(1.0, 1.0, 16);
        assert_eq!(sample_gff(&m, 5), sample_gff(&m, 5));
        assert_ne!(sample_gff(&m, 5), sample_gff(&m, 6));
    }

    #[test]
    fn inner_products_of_eigenfunction_by_quadrature() {
        let m = GffModel::new(1.0, 1.0, 64);
        let f = m.modes[3];
        let custom = TestFunction::Custom { f: Arc::new(move |z| f.eval(z)), support: None };
        let ip = m.inner_products(&custom);
        for (i, v) in ip.iter().enumerate() {
            let want = if i == 3 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-10, "{i} {v}");
        }
    }

    #[test]
    fn pairing_is_linear() {
        let m = GffModel::new(1.0, 1.0, 100);
        let s = sample_gff(&m, 9);
        let b1 = TestFunction::Bump { center: c(0.4, 0.5), radius: 0.2 };
        let b2 = TestFunction::Bump { center: c(0.6, 0.3), radius: 0.25 };
        let sum = TestFunction::Custom {
            f: Arc::new(|z| 2.0 * bump(c(0.4, 0.5), 0.2, z) - 0.5 * bump(c(0.6, 0.3), 0.25, z)),
            support: None,
        };
        let lhs = pair(&s, &m.pairing_weights(&sum));
        let rhs = 2.0 * pair(&s, &m.pairing_weights(&b1)) - 0.5 * pair(&s, &m.pairing_weights(&b2));
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn point_covariance_is_minus_green() {
        let m = GffModel::new(1.0, 1.0, 300 * 300);
        let (z1, z2) = (c(0.3, 0.4), c(0.7, 0.6));
        let g = Greens::new(DomainSpec::rectangle(1.0, 1.0)).g_dirichlet(z1, z2).unwrap();
        assert!((m.point_covariance(z1, z2) + g).abs() < 1e-5);
    }

    #[test]
    fn mobius_helpers() {
        let m = Mobius::disk_automorphism(c(0.3, 0.0), 0.0);
        let z = c(0.1, -0.4);
        assert!((m.inverse().apply(m.apply(z)) - z).norm() < 1e-14);
        let h = 1e-6;
        let fd = (m.apply(z + h) - m.apply(z - h)) / (2.0 * h);
        assert!((fd - m.derivative(z)).norm() < 1e-8);
        assert!((Mobius::cayley().apply(c(0.0, 0.0)) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_map_gives_equal_variances() {
        let supp = Disk { center: c(0.1, 0.0), radius: 0.3 };
        let omega = |z: Complex64| bump(supp.center, supp.radius, z);
        let r = conformal_invariance_check(&omega, supp, &DomainSpec::unit_disk(), Mobius::identity(), 12).unwrap();
        assert_eq!(r.var_x, r.var_y);
        assert!(r.var_x > 0.0);
    }

    #[test]
    fn non_conformal_self_map_rejected() {
        let supp = Disk { center: c(0.0, 0.0), radius: 0.3 };
        let omega = |z: Complex64| bump(supp.center, supp.radius, z);
        let scale = Mobius { a: c(2.0, 0.0), b: c(0.0, 0.0), c: c(0.0, 0.0), d: c(1.0, 0.0) };
        assert!(matches!(
            conformal_invariance_check(&omega, supp, &DomainSpec::unit_disk(), scale, 8),
            Err(GffError::Contract(_))
        ));
    }

    #[test]
    fn wick_needs_samples() {
        let v = [vec![1.0; 10], vec![1.0; 10], vec![1.0; 10], vec![1.0; 10]];
        assert_eq!(wick_check(&v, &[[1.0; 4]; 4]), Err(GffError::TooFewSamples(10_000)));
    }
}
