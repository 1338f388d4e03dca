//! The acceptance criteria as runnable checks.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use dimer_core::enumerate::{count_tilings, enumerate_tilings, Tiling};
use dimer_core::experiment::{random_domino_region, random_polyomino, region_corpus, run_square, unit_square_region, SquareRun};
use dimer_core::gff::{self, GffModel, Mobius, TestFunction};
use dimer_core::greens::{g_half_plane, spectral_g_dirichlet, Greens};
use dimer_core::height::{height_function_with, predict_mean_height, RegionLayout, Traversal};
use dimer_core::lattice::{build_even_rectangle, make_temperleyan, DomainSpec, TemperleyanRegion};
use dimer_core::moments::{contour_moment, default_paths, k_point_moment, pairing_det, pairing_sum, two_point_closed, two_point_quadrature};
use dimer_core::rng;
use dimer_core::sampler::{sample_many, temperley_tiling, temperley_tree, Algorithm};
use dimer_core::stats;
use num_bigint::BigInt;
use num_complex::Complex64;
use rand::Rng;

use crate::config::{Budget, Suite};
use crate::csv::Table;
use crate::manifest::CheckRecord;

/// Sample sizes and widened tolerances for one budget.
#[derive(Clone, Debug)]
pub struct Plan {
    pub budget: Budget,
    pub uniformity_samples: usize,
    pub validity_tilings: usize,
    pub sizes: [(i32, usize); 3],
    pub gff_samples: usize,
    pub gff_modes: usize,
    pub conformal_order: usize,
    pub covariance_tol: f64,
    pub monotone_sigmas: f64,
    pub skew_tol: f64,
    pub kurtosis_tol: f64,
    pub variance_tol: f64,
    pub mean_tol: f64,
    pub gff_variance_tol: f64,
    pub wick_tol: f64,
}

impl Plan {
    pub fn new(budget: Budget) -> Self {
        match budget {
            Budget::Full => Plan {
                budget,
                uniformity_samples: 20_000,
                validity_tilings: 10_000,
                sizes: [(21, 200_000), (41, 200_000), (81, 300_000)],
                gff_samples: 100_000,
                gff_modes: gff::DEFAULT_MODES,
                conformal_order: 24,
                covariance_tol: 0.10,
                monotone_sigmas: 2.0,
                skew_tol: 0.1,
                kurtosis_tol: 0.2,
                variance_tol: 0.10,
                mean_tol: 0.1,
                gff_variance_tol: 0.02,
                wick_tol: 0.05,
            },
            Budget::Small => Plan {
                budget,
                uniformity_samples: 4_000,
                validity_tilings: 1_000,
                sizes: [(21, 20_000), (41, 10_000), (81, 5_000)],
                gff_samples: 20_000,
                gff_modes: 1024,
                conformal_order: 16,
                covariance_tol: 0.75,
                monotone_sigmas: 3.0,
                skew_tol: 0.2,
                kurtosis_tol: 0.4,
                variance_tol: 0.15,
                mean_tol: 0.25,
                gff_variance_tol: 0.05,
                wick_tol: 0.15,
            },
        }
    }
}

/// Criterion ids in each suite. `S1` is the bijection round-trip oracle.
pub fn criteria(suite: Suite) -> Vec<&'static str> {
    let exact = ["1", "4", "5", "6", "11", "S1"];
    let mc = ["2", "3", "7", "8", "9", "10"];
    let mut ids: Vec<&str> = match suite {
        Suite::Exact => exact.to_vec(),
        Suite::Montecarlo => mc.to_vec(),
        Suite::All => exact.iter().chain(&mc).copied().collect(),
    };
    ids.sort_by_key(|id| id.trim_start_matches('S').parse::<u32>().unwrap_or(0) + if id.starts_with('S') { 100 } else { 0 });
    ids
}

pub struct SuiteOutcome {
    pub records: Vec<CheckRecord>,
    pub tables: Vec<(String, Table)>,
    pub seeds: Vec<u64>,
}

/// Runs the criteria of `suite`, reporting each record through `on_record` as it completes.
pub fn run_suite(
    suite: Suite,
    plan: &Plan,
    seed: u64,
    overrides: &BTreeMap<String, f64>,
    on_record: &mut dyn FnMut(&CheckRecord),
) -> SuiteOutcome {
    let mut out = SuiteOutcome { records: Vec::new(), tables: Vec::new(), seeds: vec![seed] };
    let mut square: Option<Vec<SquareRun>> = None;
    let mut square_seconds = 0.0;
    for id in criteria(suite) {
        let t = Instant::now();
        let mut rec = match id {
            "1" => counting(seed),
            "2" => uniformity(plan, seed),
            "3" => validity(plan, seed),
            "4" => pairing_identity(seed),
            "5" => two_point(seed, &mut out.tables),
            "6" => spectral(),
            "7" | "8" | "9" => {
                if square.is_none() {
                    let t0 = Instant::now();
                    square = Some(square_runs(plan, seed));
                    square_seconds = t0.elapsed().as_secs_f64();
                    out.seeds.extend(plan.sizes.iter().map(|&(n, _)| size_seed(seed, n)));
                }
                let runs = square.as_ref().expect("runs computed above");
                match id {
                    "7" => covariance(plan, runs, &mut out.tables),
                    "8" => gaussianity(plan, runs, &mut out.tables),
                    _ => mean_height(plan, runs, &mut out.tables),
                }
            }
            "10" => gff_suite(plan, seed),
            "11" => conformal(plan),
            "S1" => bijection(seed),
            other => unreachable!("unknown criterion {other}"),
        };
        if let Some(&tol) = overrides.get(id) {
            // keep any side conditions that failed independently of the tolerance
            let side_ok = rec.passed || !compare(&rec);
            rec.tolerance = tol;
            rec.passed = compare(&rec) && side_ok;
            rec.detail.push_str(" (tolerance overridden)");
        }
        rec.seconds = t.elapsed().as_secs_f64();
        if id == "7" {
            rec.detail.push_str(&format!("; shared sampling {square_seconds:.1}s"));
        }
        if let Some(limit) = rec.runtime_limit {
            if plan.budget == Budget::Full && rec.seconds > limit {
                rec.passed = false;
                rec.detail.push_str(&format!("; runtime {:.1}s over the {limit}s limit", rec.seconds));
            }
        }
        on_record(&rec);
        out.records.push(rec);
    }
    out
}

fn size_seed(seed: u64, n: i32) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(n as u64)
}

fn compare(r: &CheckRecord) -> bool {
    match r.comparison.as_str() {
        "abs_le" => (r.measured - r.target).abs() <= r.tolerance,
        "le" => r.measured <= r.tolerance,
        "gt" => r.measured > r.tolerance,
        _ => false,
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    id: &str,
    name: &str,
    measured: f64,
    target: f64,
    tolerance: f64,
    comparison: &str,
    runtime_limit: Option<f64>,
    detail: String,
) -> CheckRecord {
    let mut r = CheckRecord {
        id: id.into(),
        name: name.into(),
        measured,
        target,
        tolerance,
        comparison: comparison.into(),
        error_estimate: None,
        runtime_limit,
        passed: false,
        detail,
        seconds: 0.0,
    };
    r.passed = compare(&r) && measured.is_finite();
    r
}

fn corner(m: i32, n: i32) -> TemperleyanRegion {
    make_temperleyan(build_even_rectangle(m, n, 1.0).expect("odd sides"), (0, 0)).expect("corner root")
}

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

/// Random points with pairwise distance at least `sep`.
fn separated<R: Rng + ?Sized>(rng: &mut R, k: usize, sep: f64, draw: impl Fn(&mut R) -> Complex64) -> Vec<Complex64> {
    loop {
        let pts: Vec<Complex64> = (0..k).map(|_| draw(rng)).collect();
        if pts.iter().enumerate().all(|(i, p)| pts[i + 1..].iter().all(|q| (p - q).norm() >= sep)) {
            return pts;
        }
    }
}

fn counting(seed: u64) -> CheckRecord {
    let mut g = rng::stream(seed, 1);
    let mut mismatches = 0usize;
    let mut tileable = 0usize;
    for k in 0..20 {
        // alternate arbitrary cell sets with domino-built (hence tileable) ones
        let cells = if k % 2 == 0 { random_polyomino(&mut g, 16) } else { random_domino_region(&mut g, 16) };
        let brute = enumerate_tilings(&cells).map(|v| v.len()).unwrap_or(usize::MAX);
        let det = count_tilings(&cells);
        if det != BigInt::from(brute) {
            mismatches += 1;
        }
        if brute > 0 {
            tileable += 1;
        }
    }
    let square: std::collections::BTreeSet<_> = (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).collect();
    let eight = count_tilings(&square);
    if eight != BigInt::from(12_988_816u64) {
        mismatches += 1;
    }
    record(
        "1",
        "exact counting",
        mismatches as f64,
        0.0,
        0.0,
        "abs_le",
        Some(10.0),
        format!("20 random regions ({tileable} tileable) + 8x8 count {eight}"),
    )
}

fn uniformity(plan: &Plan, seed: u64) -> CheckRecord {
    let region = corner(3, 3);
    let all = enumerate_tilings(&region).expect("small region");
    let index: HashMap<&Tiling, usize> = all.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let histogram = |algo: Algorithm, s: u64| -> Result<Vec<u64>, String> {
        let mut counts = vec![0u64; all.len()];
        for t in sample_many(&region, algo, s, plan.uniformity_samples).map_err(|e| e.to_string())? {
            counts[*index.get(&t).ok_or("sample is not a tiling of the region")?] += 1;
        }
        Ok(counts)
    };
    let (k, w) = match (histogram(Algorithm::Kasteleyn, seed ^ 0x2a), histogram(Algorithm::Wilson, seed ^ 0x2b)) {
        (Ok(k), Ok(w)) => (k, w),
        (Err(e), _) | (_, Err(e)) => return record("2", "sampler uniformity", f64::NAN, 0.001, 0.001, "gt", Some(30.0), e),
    };
    let pk = stats::chi_square_uniform(&k).p_value;
    let pw = stats::chi_square_uniform(&w).p_value;
    let p2 = stats::chi_square_two_sample(&k, &w).p_value;
    record(
        "2",
        "sampler uniformity",
        pk.min(pw).min(p2),
        0.001,
        0.001,
        "gt",
        Some(30.0),
        format!("{} tilings; kasteleyn {k:?} p={pk:.3}; wilson {w:?} p={pw:.3}; two-sample p={p2:.3}", all.len()),
    )
}

fn validity(plan: &Plan, seed: u64) -> CheckRecord {
    let corpus = region_corpus();
    let mut jobs: Vec<(&str, &TemperleyanRegion, Algorithm)> = Vec::new();
    for (name, r) in &corpus {
        jobs.push((name, r, Algorithm::Kasteleyn));
        if r.corner_rectangle().is_some() {
            jobs.push((name, r, Algorithm::Wilson));
        }
    }
    let per = plan.validity_tilings.div_ceil(jobs.len());
    let (mut total, mut bad) = (0usize, 0usize);
    let mut failures = Vec::new();
    for (j, (name, region, algo)) in jobs.iter().enumerate() {
        let layout = Arc::new(RegionLayout::for_region(region));
        let tilings = match sample_many(region, *algo, seed.wrapping_add(300 + j as u64), per) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                bad += per;
                total += per;
                continue;
            }
        };
        for t in &tilings {
            total += 1;
            let ok = t.validate(*region).is_ok()
                && height_function_with(&layout, t, Traversal::BreadthFirst)
                    .map(|h| h.face_rule_holds() && h.boundary_rule_holds())
                    .unwrap_or(false);
            if !ok {
                bad += 1;
            }
        }
    }
    let mut detail = format!("{total} tilings over {} regions / {} sampler jobs", corpus.len(), jobs.len());
    if !failures.is_empty() {
        detail.push_str(&format!("; errors: {}", failures.join(", ")));
    }
    record("3", "height validity", bad as f64, 0.0, 0.0, "abs_le", Some(60.0), detail)
}

fn pairing_identity(seed: u64) -> CheckRecord {
    let mut g = rng::stream(seed, 4);
    let mut worst = 0.0f64;
    for k in [2, 4, 6, 8] {
        for _ in 0..100 {
            let xs = separated(&mut g, k, 0.05, |g| c(g.random_range(0.0..1.0), g.random_range(0.0..1.0)));
            let (d, s) = match (pairing_det(&xs), pairing_sum(&xs)) {
                (Ok(d), Ok(s)) => (d, s),
                _ => return record("4", "pairing determinant identity", f64::NAN, 0.0, 1e-9, "le", Some(5.0), "evaluation failed".into()),
            };
            worst = worst.max((d - s).norm() / s.norm());
        }
    }
    record("4", "pairing determinant identity", worst, 0.0, 1e-9, "le", Some(5.0), "k in {2,4,6,8}, 100 instances each".into())
}

fn two_point(seed: u64, tables: &mut Vec<(String, Table)>) -> CheckRecord {
    let mut g = rng::stream(seed, 5);
    let draw = |g: &mut rng::Rng| c(g.random_range(-1.0..1.0), g.random_range(0.2..1.5));
    let mut table = Table::new(&["p_re", "p_im", "q_re", "q_im", "closed", "quadrature", "error_estimate", "abs_difference"]);
    let mut worst_quad = 0.0f64;
    for _ in 0..10 {
        let pq = separated(&mut g, 2, 0.2, draw);
        let (p, q) = (pq[0], pq[1]);
        let closed = two_point_closed(p, q).unwrap_or(f64::NAN);
        let quad = default_paths(&pq)
            .map_err(|e| e.to_string())
            .and_then(|paths| two_point_quadrature(p, q, &paths[0], &paths[1]).map_err(|e| e.to_string()));
        let (v, err) = quad.map(|r| (r.value, r.error_estimate)).unwrap_or((f64::NAN, f64::NAN));
        let diff = (v - closed).abs();
        worst_quad = if diff.is_nan() { f64::NAN } else { worst_quad.max(diff) };
        table.push(vec![p.re.into(), p.im.into(), q.re.into(), q.im.into(), closed.into(), v.into(), err.into(), diff.into()]);
    }
    let mut worst_green = 0.0f64;
    for _ in 0..100 {
        let pq = separated(&mut g, 2, 1e-3, draw);
        let closed = two_point_closed(pq[0], pq[1]).unwrap_or(f64::NAN);
        let via_green = -16.0 / PI * g_half_plane(pq[0], pq[1]);
        worst_green = worst_green.max((closed - via_green).abs());
    }
    tables.push(("two_point_moments.csv".into(), table));
    let measured = (worst_quad / 1e-6).max(worst_green / 1e-12);
    record(
        "5",
        "two-point contour formula",
        measured,
        0.0,
        1.0,
        "le",
        Some(30.0),
        format!("max |quad - closed| = {worst_quad:.2e} (tol 1e-6); max |closed + 16/pi g_D| = {worst_green:.2e} (tol 1e-12); measured is the worse ratio"),
    )
}

fn spectral() -> CheckRecord {
    let g = Greens::new(DomainSpec::rectangle(1.0, 1.0));
    let pairs = [
        (c(0.25, 0.5), c(0.75, 0.5)),
        (c(0.3, 0.3), c(0.6, 0.7)),
        (c(0.5, 0.5), c(0.2, 0.8)),
        (c(0.1, 0.2), c(0.9, 0.9)),
        (c(0.4, 0.6), c(0.6, 0.4)),
    ];
    let ms = [250u32, 500, 1000, 2000];
    let mut worst = 0.0f64;
    let mut trend = Vec::new();
    for (z1, z2) in pairs {
        let exact = match g.g_dirichlet(z1, z2) {
            Ok(v) => v,
            Err(e) => return record("6", "spectral Green's function", f64::NAN, 0.0, 1e-6, "le", Some(10.0), e.to_string()),
        };
        let errs: Vec<f64> = ms.iter().map(|&m| (spectral_g_dirichlet(1.0, 1.0, z1, z2, m) - exact).abs()).collect();
        worst = worst.max(*errs.last().expect("nonempty"));
        trend.push(format!("{:.1e}", errs[0]));
    }
    record(
        "6",
        "spectral Green's function",
        worst,
        0.0,
        1e-6,
        "le",
        Some(10.0),
        format!("partial sums to j,k <= {}; errors at j,k <= {}: [{}]", ms[3], ms[0], trend.join(", ")),
    )
}

/// Tracked points and observable shared by the covariance, Gaussianity and mean-height checks.
fn square_runs(plan: &Plan, seed: u64) -> Vec<SquareRun> {
    let pts = [c(0.25, 0.5), c(0.75, 0.5)];
    let f11 = dimer_core::greens::EigenMode { j: 1, k: 1, a: 1.0, b: 1.0 };
    let phi = [move |z: Complex64| f11.eval(z)];
    plan.sizes
        .iter()
        .map(|&(n, s)| run_square(n, s, size_seed(seed, n), Algorithm::Wilson, &pts, &phi).expect("square sampling"))
        .collect()
}

/// `-(16/π) g_D` on the unit square at the two tracked points.
pub fn covariance_target() -> f64 {
    let g = Greens::new(DomainSpec::rectangle(1.0, 1.0));
    -16.0 / PI * g.g_dirichlet(c(0.25, 0.5), c(0.75, 0.5)).expect("interior points")
}

fn covariance(plan: &Plan, runs: &[SquareRun], tables: &mut Vec<(String, Table)>) -> CheckRecord {
    let target = covariance_target();
    let mut table = Table::new(&["n", "epsilon", "samples", "covariance", "std_error", "target", "deviation", "relative_deviation"]);
    let mut devs = Vec::new();
    for r in runs {
        let est = r.covariance(0, 1);
        let dev = est.covariance - target;
        devs.push((r.n, dev, est.std_error));
        table.push(vec![
            r.n.into(),
            r.epsilon().into(),
            r.samples.into(),
            est.covariance.into(),
            est.std_error.into(),
            target.into(),
            dev.into(),
            (dev / target).into(),
        ]);
    }
    tables.push(("covariance.csv".into(), table));
    let monotone = devs
        .windows(2)
        .all(|w| w[1].1.abs() <= w[0].1.abs() + plan.monotone_sigmas * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let (_, last_dev, last_se) = *devs.last().expect("three sizes");
    let rel = (last_dev / target).abs();
    let mut rec = record(
        "7",
        "height covariance convergence",
        rel,
        0.0,
        plan.covariance_tol,
        "le",
        None,
        format!(
            "target {target:.6}; deviations {}; monotone within {} combined SE: {monotone}",
            devs.iter().map(|(n, d, s)| format!("N={n}: {d:+.4}±{s:.4}")).collect::<Vec<_>>().join(", "),
            plan.monotone_sigmas
        ),
    );
    rec.error_estimate = Some(last_se / target.abs());
    rec.passed &= monotone;
    rec
}

/// `16/(π · 2π²)`: the limiting variance of the smoothed height against `f_{1,1}`.
pub fn gaussian_variance_target() -> f64 {
    16.0 / (PI * 2.0 * PI * PI)
}

fn gaussianity(plan: &Plan, runs: &[SquareRun], tables: &mut Vec<(String, Table)>) -> CheckRecord {
    let target = gaussian_variance_target();
    let mut table = Table::new(&[
        "n", "samples", "mean", "variance", "variance_se", "skewness", "skewness_se", "excess_kurtosis", "excess_kurtosis_se", "target_variance",
    ]);
    let mut last = None;
    for r in runs {
        let s = stats::summarize(&r.ensemble.centered_observable(0));
        table.push(vec![
            r.n.into(),
            s.n.into(),
            s.mean.into(),
            s.variance.into(),
            s.variance_se.into(),
            s.skewness.into(),
            s.skewness_se.into(),
            s.excess_kurtosis.into(),
            s.excess_kurtosis_se.into(),
            target.into(),
        ]);
        last = Some(s);
    }
    tables.push(("gaussianity.csv".into(), table));
    let s = last.expect("three sizes");
    let var_rel = (s.variance / target - 1.0).abs();
    let skew_ok = s.skewness.abs() < plan.skew_tol;
    let kurt_ok = s.excess_kurtosis.abs() < plan.kurtosis_tol;
    let mut rec = record(
        "8",
        "Gaussianity of smoothed height",
        var_rel,
        0.0,
        plan.variance_tol,
        "le",
        None,
        format!(
            "N=81 variance {:.5} vs {target:.5}; skewness {:+.4} (tol {}); excess kurtosis {:+.4} (tol {})",
            s.variance, s.skewness, plan.skew_tol, s.excess_kurtosis, plan.kurtosis_tol
        ),
    );
    rec.error_estimate = Some(s.variance_se / target);
    rec.passed &= skew_ok && kurt_ok;
    rec
}

fn mean_height(plan: &Plan, runs: &[SquareRun], tables: &mut Vec<(String, Table)>) -> CheckRecord {
    let run = runs.last().expect("three sizes");
    let region = unit_square_region(run.n);
    let predicted = match predict_mean_height(&region) {
        Ok(p) => p,
        Err(e) => return record("9", "mean height", f64::NAN, 0.0, plan.mean_tol, "le", None, e.to_string()),
    };
    let mean = run.ensemble.mean();
    let mut table = Table::new(&["x", "y", "empirical", "predicted", "difference"]);
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for k in 0..mean.len() {
        let z = run.layout.point(k);
        table.push(vec![z.re.into(), z.im.into(), mean[k].into(), predicted[k].into(), (mean[k] - predicted[k]).into()]);
        let dist = z.re.min(1.0 - z.re).min(z.im).min(1.0 - z.im);
        if dist > 0.2 {
            count += 1;
            worst = worst.max((mean[k] - predicted[k]).abs());
        }
    }
    tables.push(("mean_height.csv".into(), table));
    record(
        "9",
        "mean height prediction",
        worst,
        0.0,
        plan.mean_tol,
        "le",
        None,
        format!("N={} with {} samples; max |empirical - predicted| over {count} vertices at distance > 0.2", run.n, run.samples),
    )
}

fn gff_suite(plan: &Plan, seed: u64) -> CheckRecord {
    let model = GffModel::new(1.0, 1.0, plan.gff_modes);
    let phis = [
        TestFunction::Eigen { j: 1, k: 1 },
        TestFunction::Bump { center: c(0.4, 0.45), radius: 0.3 },
        TestFunction::Bump { center: c(0.6, 0.55), radius: 0.3 },
        TestFunction::Bump { center: c(0.5, 0.4), radius: 0.25 },
    ];
    let w: Vec<Vec<f64>> = phis.iter().map(|p| model.pairing_weights(p)).collect();
    let vals = gff::sample_pairings(&model, &w, plan.gff_samples, seed.wrapping_add(10));
    let var = stats::summarize(&vals[0]).variance;
    let var_target = 1.0 / (2.0 * PI * PI);
    let var_rel = (var / var_target - 1.0).abs();
    let mut wick_worst = 0.0f64;
    for idx in [[0, 0, 0, 0], [1, 1, 2, 2], [1, 2, 2, 3], [1, 2, 3, 3]] {
        let cov: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| model.covariance(&w[idx[i]], &w[idx[j]])));
        let values = idx.map(|i| vals[i].clone());
        match gff::wick_check(&values, &cov) {
            Ok(r) => wick_worst = wick_worst.max(r.relative_deviation),
            Err(e) => return record("10", "GFF suite", f64::NAN, 0.0, 1.0, "le", Some(120.0), e.to_string()),
        }
    }
    let quad = [c(0.0, 1.0), c(0.0, 2.0), c(1.0, 1.0), c(-1.0, 2.0)];
    let exact = k_point_moment(&DomainSpec::half_plane(), &quad).map(|r| r.value).unwrap_or(f64::NAN);
    let contour = default_paths(&quad)
        .ok()
        .and_then(|p| contour_moment(&quad, &p).ok())
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    let moment_rel = ((contour - exact) / exact).abs();
    let measured = (var_rel / plan.gff_variance_tol).max(wick_worst / plan.wick_tol).max(moment_rel / 1e-4);
    record(
        "10",
        "GFF suite",
        measured,
        0.0,
        1.0,
        "le",
        Some(120.0),
        format!(
            "var {var:.6} vs {var_target:.6} (rel {var_rel:.2e}, tol {}); worst Wick deviation {wick_worst:.2e} (tol {}); k=4 moment {exact:.6} vs contour {contour:.6} (rel {moment_rel:.1e}, tol 1e-4); measured is the worst ratio",
            plan.gff_variance_tol, plan.wick_tol
        ),
    )
}

fn conformal(plan: &Plan) -> CheckRecord {
    let maps = [
        Mobius::disk_automorphism(c(0.3, 0.0), 0.0),
        Mobius::disk_automorphism(c(-0.2, 0.4), 1.0),
        Mobius::disk_automorphism(c(0.0, -0.5), 2.5),
    ];
    let supports = [gff::Disk { center: c(0.1, -0.2), radius: 0.3 }, gff::Disk { center: c(-0.3, 0.25), radius: 0.4 }];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for s in supports {
        let omega = move |z: Complex64| gff::bump(s.center, s.radius, z);
        for m in maps {
            match gff::conformal_invariance_check(&omega, s, &DomainSpec::unit_disk(), m, plan.conformal_order) {
                Ok(r) => {
                    worst = worst.max(r.relative_difference);
                    parts.push(format!("{:.1e}", r.relative_difference));
                }
                Err(e) => return record("11", "conformal invariance", f64::NAN, 0.0, 1e-3, "le", Some(120.0), e.to_string()),
            }
        }
    }
    record(
        "11",
        "conformal invariance",
        worst,
        0.0,
        1e-3,
        "le",
        Some(120.0),
        format!("3 disk automorphisms x 2 bumps: [{}]", parts.join(", ")),
    )
}

fn bijection(seed: u64) -> CheckRecord {
    let mut failures = 0usize;
    let mut checked = 0usize;
    for (m, n) in [(3, 3), (5, 3), (3, 5), (5, 5)] {
        let r = corner(m, n);
        for t in enumerate_tilings(&r).unwrap_or_default() {
            checked += 1;
            let back = temperley_tree(&r, &t).ok().and_then(|tree| temperley_tiling(&tree).ok());
            if back.as_ref() != Some(&t) {
                failures += 1;
            }
        }
    }
    let r = corner(21, 21);
    match sample_many(&r, Algorithm::Wilson, seed.wrapping_add(99), 200) {
        Ok(ts) => {
            for t in ts {
                checked += 1;
                let back = temperley_tree(&r, &t).ok().and_then(|tree| temperley_tiling(&tree).ok());
                if back.as_ref() != Some(&t) {
                    failures += 1;
                }
            }
        }
        Err(_) => failures += 1,
    }
    record(
        "S1",
        "tree/tiling bijection round trip",
        failures as f64,
        0.0,
        0.0,
        "abs_le",
        None,
        format!("{checked} tilings (all tilings of small rectangles, 200 samples at 21x21)"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_partition_criteria() {
        let all = criteria(Suite::All);
        assert_eq!(all, ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "S1"]);
        let mut joined = criteria(Suite::Exact);
        joined.extend(criteria(Suite::Montecarlo));
        joined.sort();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(joined, sorted);
    }

    #[test]
    fn targets() {
        assert!((gaussian_variance_target() - 0.25801).abs() < 1e-5);
        assert!((covariance_target() - 0.216746).abs() < 1e-5, "{}", covariance_target());
    }

    #[test]
    fn exact_suite_passes() {
        let mut seen = 0;
        let out = run_suite(Suite::Exact, &Plan::new(Budget::Small), 1, &BTreeMap::new(), &mut |_| seen += 1);
        assert_eq!(seen, out.records.len());
        for r in &out.records {
            assert!(r.passed, "{}", r.line());
        }
    }
}
