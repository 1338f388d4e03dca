//! Sample statistics and the goodness-of-fit tests used by the experiments.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Moments of a univariate sample with large-sample standard errors.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub skewness: f64,
    pub skewness_se: f64,
    pub excess_kurtosis: f64,
    pub excess_kurtosis_se: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let m = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / nf;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    let variance = m2 * nf / (nf - 1.0);
    Summary {
        n,
        mean,
        mean_se: (variance / nf).sqrt(),
        variance,
        // Var(s²) ≈ (μ4 - σ⁴)/n
        variance_se: ((m4 - m2 * m2) / nf).max(0.0).sqrt(),
        skewness: m3 / m2.powf(1.5),
        skewness_se: (6.0 * nf * (nf - 1.0) / ((nf - 2.0) * (nf + 1.0) * (nf + 3.0))).sqrt(),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        excess_kurtosis_se: (24.0 / nf).sqrt(),
    }
}

/// Outcome of a chi-square test.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn chi_tail(stat: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof).expect("positive degrees of freedom").cdf(stat)
}

/// Pearson test of `counts` against the uniform distribution on its bins.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquare {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = (counts.len() - 1) as f64;
    ChiSquare { statistic, dof, p_value: chi_tail(statistic, dof) }
}

/// Pearson homogeneity test of two count vectors over the same bins.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len(), "count vectors must share bins");
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let total = na + nb;
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        bins += 1;
        let (ea, eb) = (na * col / total, nb * col / total);
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = bins.saturating_sub(1) as f64;
    ChiSquare { statistic, dof, p_value: chi_tail(statistic, dof) }
}

/// Two-sample Kolmogorov–Smirnov statistic (sup distance of empirical CDFs).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    d
}

/// `(x - mean) / sd` for every entry.
pub fn standardize(xs: &[f64]) -> Vec<f64> {
    let s = summarize(xs);
    let sd = s.variance.sqrt();
    xs.iter().map(|x| (x - s.mean) / sd).collect()
}

/// The `quantile` of the KS distance between two standardized normal samples of the given
/// sizes, estimated from `trials` simulations.
pub fn ks_threshold<R: Rng + ?Sized>(n: usize, m: usize, quantile: f64, trials: usize, rng: &mut R) -> f64 {
    let mut ds: Vec<f64> = (0..trials)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            ks_two_sample(&standardize(&a), &standardize(&b))
        })
        .collect();
    ds.sort_by(|p, q| p.total_cmp(q));
    let idx = ((quantile * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    ds[idx]
}

/// Sample covariance of paired observations.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_symmetric_sample() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let s = summarize(&xs);
        assert_eq!(s.mean, 0.0);
        assert!((s.variance - 2.5).abs() < 1e-15);
        assert_eq!(s.skewness, 0.0);
        assert!((s.excess_kurtosis - (6.8 / 4.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn chi_square_basics() {
        let even = chi_square_uniform(&[100, 100, 100, 100]);
        assert_eq!(even.statistic, 0.0);
        assert!((even.p_value - 1.0).abs() < 1e-12);
        let skewed = chi_square_uniform(&[400, 0, 0, 0]);
        assert!(skewed.p_value < 1e-12);
        let same = chi_square_two_sample(&[10, 20, 30], &[20, 40, 60]);
        assert!(same.statistic.abs() < 1e-12);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[5.0, 6.0]), 1.0);
        let mut rng = crate::rng::stream(1, 0);
        let t = ks_threshold(1000, 1000, 0.99, 200, &mut rng);
        assert!(t > 0.03 && t < 0.12, "{t}");
    }
}
