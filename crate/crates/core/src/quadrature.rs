//! Gauss–Legendre rules and a few composite schemes built on them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    fn compute(n: usize) -> Rule {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Rule { nodes, weights }
    }

    /// Shared cached rule.
    pub fn get(n: usize) -> Arc<Rule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        Arc::clone(guard.entry(n).or_insert_with(|| Arc::new(Rule::compute(n))))
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (h, m) = (0.5 * (b - a), 0.5 * (b + a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (m + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Composite rule with `panels` equal panels of `n` nodes each.
pub fn composite(a: f64, b: f64, panels: usize, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = Rule::get(n);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| rule.integrate(a + p as f64 * h, a + (p + 1) as f64 * h, &mut f))
        .sum()
}

/// Outcome of an integration refined until successive estimates agree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Converged<T> {
    pub value: T,
    /// Total number of integrand evaluations in the final estimate.
    pub nodes: usize,
    /// Change between the last two refinements.
    pub change: f64,
}

/// Doubles the node count of `estimate(nodes)` from `start` until the change drops below `tol`
/// or `max_nodes` is reached.
pub fn refine<T: Copy>(
    start: usize,
    max_nodes: usize,
    tol: f64,
    mut estimate: impl FnMut(usize) -> T,
    dist: impl Fn(&T, &T) -> f64,
) -> Converged<T> {
    let mut n = start;
    let mut prev = estimate(n);
    loop {
        let next_n = n * 2;
        let next = estimate(next_n);
        let change = dist(&prev, &next);
        if change < tol || next_n >= max_nodes {
            return Converged { value: next, nodes: next_n, change };
        }
        n = next_n;
        prev = next;
    }
}

/// Integral over a polygon that is star-shaped about `center`, using a Duffy map per edge
/// triangle so that integrable point singularities at `center` are handled.
pub fn polygon_about(center: Complex64, polygon: &[Complex64], n: usize, f: impl Fn(Complex64) -> f64) -> f64 {
    let rule = Rule::get(n);
    let mut total = 0.0;
    for k in 0..polygon.len() {
        let p = polygon[k] - center;
        let q = polygon[(k + 1) % polygon.len()] - center;
        let jac = (p.re * q.im - p.im * q.re).abs();
        if jac == 0.0 {
            continue;
        }
        // graded radial panels resolve log-type behaviour at s = 0
        let mut edges = vec![0.0];
        let mut s = 1.0;
        while s > 1e-6 {
            edges.push(s);
            s *= 0.15;
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in edges.windows(2) {
            for (s, ws) in rule.mapped(pair[0], pair[1]) {
                for (t, wt) in rule.mapped(0.0, 1.0) {
                    let z = center + (p * (1.0 - t) + q * t) * s;
                    total += ws * wt * s * jac * f(z);
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [1, 2, 5, 16, 32, 64] {
            let r = Rule::get(n);
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg + 1) as f64 } else { 0.0 };
            assert!((r.integrate(-1.0, 1.0, |x| x.powi(deg as i32)) - exact).abs() < 1e-12);
            assert!((r.integrate(0.0, 1.0, |x| x.powi(deg as i32 - 1)) - 1.0 / deg as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn polygon_handles_log_singularity() {
        // int over the unit square of log|z| about the origin corner
        let sq = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
        ];
        let v = polygon_about(Complex64::new(0.3, 0.4), &sq, 24, |_| 1.0);
        assert!((v - 1.0).abs() < 1e-12);
        let v = polygon_about(Complex64::new(0.0, 0.0), &sq, 24, |z| z.norm().ln());
        // closed form: (ln 2 - 3 + pi/2) / 2
        let exact = 0.5 * (2f64.ln() - 3.0 + std::f64::consts::FRAC_PI_2);
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
    }

    #[test]
    fn refine_stops() {
        let c = refine(4, 1 << 12, 1e-12, |n| composite(0.0, 1.0, n, 8, |x| x.sqrt()), |a, b| (a - b).abs());
        assert!((c.value - 2.0 / 3.0).abs() < 1e-8);
    }
}
