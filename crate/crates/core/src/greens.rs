//! Continuum Green's functions, Laplacian eigenmodes of rectangles, and the `F±` kernels.
//!
//! Conventions: `g_D(z1, z2) ~ (1/2π) log|z2 - z1|` near the diagonal and vanishes on the
//! boundary, so `Δ g_D = δ`. The half-plane has basepoint at infinity; the disk is carried to
//! the half-plane by a Cayley map sending its basepoint to infinity. Rectangles are
//! `[0, a] x [0, b]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::{DomainKind, DomainSpec};

#[derive(Debug, Error, PartialEq)]
pub enum GreensError {
    #[error("coincident points {0}")]
    Singularity(Complex64),
    #[error("point {0} is not in the interior of the domain")]
    Domain(Complex64),
    #[error("{0} is not available for rectangles")]
    Unsupported(&'static str),
}

const TINY: f64 = 1e-300;

/// `g_D` on the upper half-plane.
pub fn g_half_plane(z1: Complex64, z2: Complex64) -> f64 {
    ((z2 - z1).norm() / (z2 - z1.conj()).norm()).ln() / (2.0 * PI)
}

/// A conformal map from a domain onto the upper half-plane, sending the basepoint to infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cayley {
    center: Complex64,
    radius: f64,
    // unit complex number u with (b - c)/r = -u, so w = (z - c)/(r * (-u)) * (-1)
    rotation: Complex64,
}

impl Cayley {
    pub fn new(center: Complex64, radius: f64, basepoint: Complex64) -> Self {
        let u = (basepoint - center) / radius;
        Cayley { center, radius, rotation: -u / u.norm() }
    }

    /// Normalised disk coordinate in which the basepoint sits at `-1`.
    fn unit(&self, z: Complex64) -> Complex64 {
        (z - self.center) / (self.radius * self.rotation)
    }

    pub fn map(&self, z: Complex64) -> Complex64 {
        let w = self.unit(z);
        Complex64::i() * (1.0 - w) / (1.0 + w)
    }

    /// Derivative of [`Cayley::map`].
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let w = self.unit(z);
        let dw = 1.0 / (self.radius * self.rotation);
        -2.0 * Complex64::i() / ((1.0 + w) * (1.0 + w)) * dw
    }

    pub fn inverse(&self, zeta: Complex64) -> Complex64 {
        let i = Complex64::i();
        let w = (i - zeta) / (i + zeta);
        self.center + w * self.radius * self.rotation
    }
}

/// One Dirichlet eigenfunction `(2/sqrt(ab)) sin(πjx/a) sin(πky/b)` of the rectangle.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EigenMode {
    pub j: u32,
    pub k: u32,
    pub a: f64,
    pub b: f64,
}

impl EigenMode {
    pub fn eigenvalue(&self) -> f64 {
        -PI * PI * ((self.j as f64 / self.a).powi(2) + (self.k as f64 / self.b).powi(2))
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        2.0 / (self.a * self.b).sqrt()
            * (PI * self.j as f64 * z.re / self.a).sin()
            * (PI * self.k as f64 * z.im / self.b).sin()
    }
}

/// The `count` lowest modes of `[0,a] x [0,b]`, by `-λ` ascending then `(j, k)`.
pub fn eigenmodes(a: f64, b: f64, count: usize) -> Vec<EigenMode> {
    if count == 0 {
        return Vec::new();
    }
    // every mode among the lowest `count` has j, k <= count
    let side = (count as f64).sqrt().ceil() as u32;
    let mut limit = side.max(1);
    loop {
        let mut modes: Vec<EigenMode> = (1..=limit)
            .flat_map(|j| (1..=limit).map(move |k| EigenMode { j, k, a, b }))
            .collect();
        modes.sort_by(|x, y| {
            (-x.eigenvalue())
                .partial_cmp(&-y.eigenvalue())
                .unwrap()
                .then((x.j, x.k).cmp(&(y.j, y.k)))
        });
        modes.truncate(count);
        let worst = modes.last().map(|m| -m.eigenvalue()).unwrap_or(0.0);
        // modes outside the box have -λ > π² (limit+1)² min(1/a², 1/b²)
        let bound = PI * PI * ((limit + 1) as f64).powi(2) * (1.0 / (a * a)).min(1.0 / (b * b));
        if modes.len() == count && worst < bound {
            return modes;
        }
        limit *= 2;
    }
}

/// Partial sum `Σ f_i(z1) f_i(z2) / λ_i` over `1 <= j, k <= m`.
pub fn spectral_g_dirichlet(a: f64, b: f64, z1: Complex64, z2: Complex64, m: u32) -> f64 {
    let c = 4.0 / (a * b);
    let sx: Vec<f64> = (1..=m).map(|j| (PI * j as f64 * z1.re / a).sin() * (PI * j as f64 * z2.re / a).sin()).collect();
    let sy: Vec<f64> = (1..=m).map(|k| (PI * k as f64 * z1.im / b).sin() * (PI * k as f64 * z2.im / b).sin()).collect();
    let mut total = 0.0;
    for (j, x) in sx.iter().enumerate() {
        let lj = ((j + 1) as f64 / a).powi(2);
        let mut row = 0.0;
        for (k, y) in sy.iter().enumerate() {
            row += y / (lj + ((k + 1) as f64 / b).powi(2));
        }
        total += x * row;
    }
    -c * total / (PI * PI)
}

/// Dirichlet Green's function of the strip `0 < Re z < a` via `ζ = exp(iπz/a)`.
fn g_strip(a: f64, z1: Complex64, z2: Complex64) -> f64 {
    let map = |z: Complex64| (Complex64::i() * PI * z / a).exp();
    g_half_plane(map(z1), map(z2))
}

/// Rectangle Green's function by reflecting the strip function across `Im z = 0` and `Im z = b`.
fn g_rectangle(a: f64, b: f64, z1: Complex64, z2: Complex64) -> f64 {
    // reflect across the shorter pair of sides so the image sum converges fastest
    if a > b {
        let swap = |z: Complex64| Complex64::new(z.im, z.re);
        return g_rectangle(b, a, swap(z1), swap(z2));
    }
    let term = |n: i64| {
        let shift = Complex64::new(0.0, 2.0 * n as f64 * b);
        g_strip(a, z1 + shift, z2) - g_strip(a, z1.conj() + shift, z2)
    };
    let mut total = term(0);
    let mut n = 1;
    loop {
        let t = term(n) + term(-n);
        total += t;
        if t.abs() < 1e-18 && n > 1 {
            break;
        }
        n += 1;
        if n > 10_000 {
            break;
        }
    }
    total
}

fn inside(spec: &DomainSpec, z: Complex64) -> bool {
    match spec.kind {
        DomainKind::HalfPlane => z.im > 0.0,
        DomainKind::Disk { center, radius } => (z - Complex64::new(center.0, center.1)).norm() < radius,
        DomainKind::Rectangle { a, b } => z.re > 0.0 && z.re < a && z.im > 0.0 && z.im < b,
    }
}

/// Green's function evaluator for one domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Greens {
    pub spec: DomainSpec,
    cayley: Option<Cayley>,
}

impl Greens {
    pub fn new(spec: DomainSpec) -> Self {
        let cayley = match spec.kind {
            DomainKind::Disk { center, radius } => {
                let c = Complex64::new(center.0, center.1);
                let b = spec.resolved_basepoint().unwrap_or(c - radius);
                Some(Cayley::new(c, radius, b))
            }
            _ => None,
        };
        Greens { spec, cayley }
    }

    pub fn half_plane() -> Self {
        Self::new(DomainSpec::half_plane())
    }

    pub fn cayley(&self) -> Option<&Cayley> {
        self.cayley.as_ref()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        inside(&self.spec, z)
    }

    fn check(&self, z1: Complex64, z2: Complex64) -> Result<(), GreensError> {
        for z in [z1, z2] {
            if !z.re.is_finite() || !z.im.is_finite() || !self.contains(z) {
                return Err(GreensError::Domain(z));
            }
        }
        if (z1 - z2).norm() < TINY {
            return Err(GreensError::Singularity(z1));
        }
        Ok(())
    }

    pub fn g_dirichlet(&self, z1: Complex64, z2: Complex64) -> Result<f64, GreensError> {
        self.check(z1, z2)?;
        Ok(match self.spec.kind {
            DomainKind::HalfPlane => g_half_plane(z1, z2),
            DomainKind::Disk { .. } => {
                let c = self.cayley.unwrap();
                g_half_plane(c.map(z1), c.map(z2))
            }
            DomainKind::Rectangle { a, b } => g_rectangle(a, b, z1, z2),
        })
    }

    /// `g̃_N(z1, z2) - g̃_N(z1p, z2)` with the principal branch of each logarithm, on the
    /// half-plane picture of the domain.
    pub fn neumann_diff(&self, z1: Complex64, z1p: Complex64, z2: Complex64) -> Result<Complex64, GreensError> {
        let (a, ap, w) = self.to_half_plane(z1, z1p, z2)?;
        if z1 == z1p {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(neumann_half_plane(a, ap, w))
    }

    /// Continues [`Greens::neumann_diff`] in `z2` along a polyline, starting on the principal
    /// branch at `path[0]`. Returns the continued value at the last point and the net number of
    /// `2πi / 2π` sheets by which it differs from the principal value there.
    pub fn neumann_diff_along(
        &self,
        z1: Complex64,
        z1p: Complex64,
        path: &[Complex64],
    ) -> Result<(Complex64, i64), GreensError> {
        let first = *path.first().ok_or(GreensError::Domain(Complex64::new(f64::NAN, f64::NAN)))?;
        let (a, ap, w0) = self.to_half_plane(z1, z1p, first)?;
        let mut prev: Vec<f64> = neumann_terms(a, ap, w0).iter().map(|(t, _)| t.arg()).collect();
        let mut args = prev.clone();
        let mut last = neumann_terms(a, ap, w0);
        const SUBSTEPS: usize = 64;
        for seg in path.windows(2) {
            for s in 1..=SUBSTEPS {
                let z = seg[0] + (seg[1] - seg[0]) * (s as f64 / SUBSTEPS as f64);
                let (_, _, w) = self.to_half_plane(z1, z1p, z)?;
                last = neumann_terms(a, ap, w);
                for (i, (t, _)) in last.iter().enumerate() {
                    let d = (t.arg() - prev[i] + PI).rem_euclid(2.0 * PI) - PI;
                    args[i] += d;
                    prev[i] = t.arg();
                }
            }
        }
        let mut value = Complex64::new(0.0, 0.0);
        let mut winding = 0i64;
        for (i, (t, s)) in last.iter().enumerate() {
            winding += ((args[i] - t.arg()) / (2.0 * PI)).round() as i64 * *s as i64;
            value += *s * Complex64::new(t.norm().ln(), args[i]);
        }
        Ok((value / (2.0 * PI), winding))
    }

    fn to_half_plane(
        &self,
        z1: Complex64,
        z1p: Complex64,
        z2: Complex64,
    ) -> Result<(Complex64, Complex64, Complex64), GreensError> {
        for z in [z1, z1p] {
            if !self.contains(z) {
                return Err(GreensError::Domain(z));
            }
        }
        // z2 may sit on the boundary, where the real part is still finite
        let closure = match self.spec.kind {
            DomainKind::HalfPlane => z2.im >= 0.0,
            DomainKind::Disk { center, radius } => (z2 - Complex64::new(center.0, center.1)).norm() <= radius * (1.0 + 1e-12),
            DomainKind::Rectangle { .. } => return Err(GreensError::Unsupported("analytic Neumann function")),
        };
        if !closure {
            return Err(GreensError::Domain(z2));
        }
        if (z2 - z1).norm() < TINY {
            return Err(GreensError::Singularity(z1));
        }
        if (z2 - z1p).norm() < TINY {
            return Err(GreensError::Singularity(z1p));
        }
        Ok(match self.cayley {
            Some(c) => (c.map(z1), c.map(z1p), c.map(z2)),
            None => (z1, z1p, z2),
        })
    }

    /// `(F₊, F₋)` at `(z1, z2)`.
    pub fn f_kernels(&self, z1: Complex64, z2: Complex64) -> Result<(Complex64, Complex64), GreensError> {
        if let DomainKind::Rectangle { .. } = self.spec.kind {
            return Err(GreensError::Unsupported("F kernels"));
        }
        self.check(z1, z2)?;
        Ok(match self.cayley {
            None => f_half_plane(z1, z2),
            Some(c) => {
                let (fp, fm) = f_half_plane(c.map(z1), c.map(z2));
                let d = c.derivative(z1);
                (fp * d, fm * d.conj())
            }
        })
    }

    /// `(F₀, F₁)` with `F± = -2 (F₀ ± F₁)`.
    pub fn f01(&self, z1: Complex64, z2: Complex64) -> Result<(Complex64, Complex64), GreensError> {
        let (fp, fm) = self.f_kernels(z1, z2)?;
        Ok((-(fp + fm) / 4.0, -(fp - fm) / 4.0))
    }
}

/// Half-plane closed form of the Neumann difference, principal branch per factor. Defined for
/// any `w` off the four singular points, including the lower half-plane.
pub fn neumann_half_plane(a: Complex64, ap: Complex64, w: Complex64) -> Complex64 {
    neumann_terms(a, ap, w).iter().map(|(t, s)| *s * t.ln()).sum::<Complex64>() / (2.0 * PI)
}

fn neumann_terms(a: Complex64, ap: Complex64, w: Complex64) -> [(Complex64, f64); 4] {
    [(w - a, 1.0), (w - a.conj(), 1.0), (w - ap, -1.0), (w - ap.conj(), -1.0)]
}

pub fn f_half_plane(z1: Complex64, z2: Complex64) -> (Complex64, Complex64) {
    (2.0 / (PI * (z2 - z1)), 2.0 / (PI * (z2 - z1.conj())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn half_plane_value() {
        let g = Greens::half_plane();
        let v = g.g_dirichlet(c(0.0, 1.0), c(0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(v, (1.0f64 / 3.0).ln() / (2.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(v, -0.1748489, epsilon = 1e-6);
        assert!(g.g_dirichlet(c(0.3, 1.0), c(0.5, 1e-12)).unwrap().abs() < 1e-11);
        assert_eq!(g.g_dirichlet(c(0.0, 1.0), c(0.0, 1.0)), Err(GreensError::Singularity(c(0.0, 1.0))));
        assert_eq!(g.g_dirichlet(c(0.0, 1.0), c(0.0, -1.0)), Err(GreensError::Domain(c(0.0, -1.0))));
    }

    #[test]
    fn symmetric_in_every_domain() {
        let domains = [DomainSpec::half_plane(), DomainSpec::unit_disk(), DomainSpec::rectangle(1.0, 1.5)];
        let pts = [(c(0.3, 0.4), c(0.6, 0.2)), (c(0.1, 0.7), c(0.45, 0.55))];
        for d in domains {
            let g = Greens::new(d);
            for (z1, z2) in pts {
                let a = g.g_dirichlet(z1, z2).unwrap();
                let b = g.g_dirichlet(z2, z1).unwrap();
                assert!((a - b).abs() < 1e-10, "{d:?}");
                assert!(a < 0.0);
            }
        }
    }

    #[test]
    fn disk_matches_closed_form_and_other_cayley() {
        let g = Greens::new(DomainSpec::unit_disk());
        let other = Cayley::new(c(0.0, 0.0), 1.0, c(0.0, 1.0));
        for (z1, z2) in [(c(0.2, 0.1), c(-0.5, 0.3)), (c(0.0, 0.0), c(0.9, 0.0))] {
            let v = g.g_dirichlet(z1, z2).unwrap();
            let closed = ((z2 - z1).norm() / (1.0 - z1.conj() * z2).norm()).ln() / (2.0 * PI);
            assert!((v - closed).abs() < 1e-10);
            assert!((v - g_half_plane(other.map(z1), other.map(z2))).abs() < 1e-10);
        }
        let cay = g.cayley().unwrap();
        assert!((cay.map(c(0.0, 0.0)) - c(0.0, 1.0)).norm() < 1e-15);
        let z = c(0.3, -0.2);
        assert!((cay.inverse(cay.map(z)) - z).norm() < 1e-14);
    }

    #[test]
    fn rectangle_images_agree_with_spectral_sum() {
        let (z1, z2) = (c(0.3, 0.4), c(0.7, 0.6));
        let g = Greens::new(DomainSpec::rectangle(1.0, 1.0)).g_dirichlet(z1, z2).unwrap();
        let s = spectral_g_dirichlet(1.0, 1.0, z1, z2, 200);
        assert!((g - s).abs() < 1e-6, "{g} vs {s}");
        // boundary behaviour
        let r = Greens::new(DomainSpec::rectangle(2.0, 1.0));
        assert!(r.g_dirichlet(c(0.5, 0.5), c(1.999_999_999, 0.3)).unwrap().abs() < 1e-8);
        assert!(r.g_dirichlet(c(0.5, 0.5), c(1.2, 1e-10)).unwrap().abs() < 1e-8);
    }

    #[test]
    fn near_diagonal_is_log_plus_bounded() {
        let g = Greens::new(DomainSpec::rectangle(1.0, 1.0));
        let z1 = c(0.5, 0.5);
        let rest: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&d| g.g_dirichlet(z1, z1 + d).unwrap() - d.ln() / (2.0 * PI))
            .collect();
        assert!((rest[0] - rest[2]).abs() < 1e-3);
    }

    #[test]
    fn eigenmodes_are_ordered_and_orthonormal() {
        let modes = eigenmodes(1.0, 1.0, 10);
        assert_eq!((modes[0].j, modes[0].k), (1, 1));
        assert_eq!((modes[1].j, modes[1].k), (1, 2));
        assert_eq!((modes[2].j, modes[2].k), (2, 1));
        assert_abs_diff_eq!(modes[0].eigenvalue(), -2.0 * PI * PI, epsilon = 1e-12);
        let rule = crate::quadrature::Rule::get(48);
        let modes = eigenmodes(1.0, 2.0, 6);
        for x in &modes {
            for y in &modes {
                let mut s = 0.0;
                for (u, wu) in rule.mapped(0.0, 1.0) {
                    for (v, wv) in rule.mapped(0.0, 2.0) {
                        s += wu * wv * x.eval(c(u, v)) * y.eval(c(u, v));
                    }
                }
                let want = if x == y { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn projection_onto_first_mode() {
        let z1 = c(0.3, 0.6);
        let g = Greens::new(DomainSpec::rectangle(1.0, 1.0));
        let f = EigenMode { j: 1, k: 1, a: 1.0, b: 1.0 };
        let sq = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        let v = crate::quadrature::polygon_about(z1, &sq, 20, |z| {
            if (z - z1).norm() < 1e-14 {
                0.0
            } else {
                g.g_dirichlet(z1, z).unwrap_or(0.0) * f.eval(z)
            }
        });
        assert!((v - f.eval(z1) / f.eigenvalue()).abs() < 1e-6, "{v}");
    }

    #[test]
    fn neumann_difference_properties() {
        let g = Greens::half_plane();
        let (z1, z1p) = (c(0.2, 0.7), c(-0.4, 1.3));
        assert!(g.neumann_diff(z1, z1p, c(0.9, 0.0)).unwrap().im.abs() < 1e-15);
        assert_eq!(g.neumann_diff(z1, z1, c(0.3, 0.5)).unwrap(), Complex64::new(0.0, 0.0));
        let d = 1e-4;
        let re = |y: f64| neumann_half_plane(z1, z1p, c(0.9, y)).re;
        assert!(((re(d) - re(-d)) / (2.0 * d)).abs() < 1e-6);
        // continuation around z1 gains one sheet; around both cancels
        let r = Greens::new(DomainSpec::unit_disk());
        let (a, b) = (c(0.1, 0.0), c(-0.3, 0.2));
        let circle = |center: Complex64, rad: f64| -> Vec<Complex64> {
            (0..=32).map(|s| center + Complex64::from_polar(rad, 2.0 * PI * s as f64 / 32.0)).collect()
        };
        let (v, w) = r.neumann_diff_along(a, b, &circle(a, 0.3)).unwrap();
        assert_eq!(w, 1);
        let principal = r.neumann_diff(a, b, a + 0.3).unwrap();
        assert!((v - principal - Complex64::i()).norm() < 1e-12);
        assert_eq!(r.neumann_diff_along(a, b, &circle(c(-0.1, 0.1), 0.6)).unwrap().1, 0);
        assert_eq!(r.neumann_diff_along(a, b, &[c(0.5, 0.0)]).unwrap(), (r.neumann_diff(a, b, c(0.5, 0.0)).unwrap(), 0));
        assert!(Greens::new(DomainSpec::rectangle(1.0, 1.0)).neumann_diff(a, b, c(0.5, 0.5)).is_err());
    }

    #[test]
    fn kernels_closed_forms_and_decay() {
        let g = Greens::half_plane();
        let (fp, fm) = g.f_kernels(c(0.0, 1.0), c(0.0, 2.0)).unwrap();
        assert!((fp - c(0.0, -2.0 / PI)).norm() < 1e-15);
        assert!((fm - 2.0 / (3.0 * PI * Complex64::i())).norm() < 1e-15);
        let far = g.f_kernels(c(0.0, 1.0), c(0.0, 1e8)).unwrap();
        assert!(far.0.norm() < 1e-8 && far.1.norm() < 1e-8);
        let d = Greens::new(DomainSpec::unit_disk());
        let near_b = d.f_kernels(c(0.2, 0.1), c(-1.0 + 1e-9, 0.0)).unwrap();
        assert!(near_b.0.norm() < 1e-6 && near_b.1.norm() < 1e-6);
    }

    #[test]
    fn kernels_match_finite_differences() {
        let h = 1e-5;
        for g in [Greens::half_plane(), Greens::new(DomainSpec::unit_disk())] {
            let (z1, z2) = (c(0.1, 0.3), c(-0.35, 0.5));
            let (fp, fm) = g.f_kernels(z1, z2).unwrap();
            let dx = (g.neumann_diff(z1 + h, z1 - h, z2).unwrap()) / (2.0 * h);
            let dy = (g.neumann_diff(z1 + Complex64::i() * h, z1 - Complex64::i() * h, z2).unwrap()) / (2.0 * h);
            let along_x = fp + fm;
            let along_y = Complex64::i() * (fp - fm);
            assert!((-4.0 * dx - along_x).norm() / along_x.norm() < 1e-4);
            assert!((-4.0 * dy - along_y).norm() / along_y.norm() < 1e-4);
        }
    }

    #[test]
    fn f01_single_valued_around_loop() {
        let g = Greens::new(DomainSpec::unit_disk());
        let z1 = c(0.1, 0.2);
        let start = g.f01(z1, z1 + 0.3).unwrap();
        let mut last = start;
        for s in 1..=100 {
            let z2 = z1 + Complex64::from_polar(0.3, 2.0 * PI * s as f64 / 100.0);
            last = g.f01(z1, z2).unwrap();
        }
        assert!((last.0 - start.0).norm() < 1e-8 && (last.1 - start.1).norm() < 1e-8);
    }
}
