//! Pipelines behind `verify` and `experiment`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dimer_core::experiment::{run_square, unit_square_region};
use dimer_core::gff::{field_comparison, GffModel, TestFunction};
use dimer_core::greens::Greens;
use dimer_core::height::height_function;
use dimer_core::lattice::DomainSpec;
use dimer_core::sampler::{sample_tiling_wilson, Algorithm};
use dimer_core::stats;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{parse_test_function, Budget, ExperimentConfig, Suite};
use crate::csv::Table;
use crate::manifest::{CheckRecord, RunManifest};
use crate::suite::{run_suite, Plan};
use crate::svg::render_tiling_svg;
use crate::CliError;

pub const DEFAULT_OUT: &str = "dimerlab-out";

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("serializable");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_tables(dir: &Path, tables: &[(String, Table)], artifacts: &mut Vec<String>) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for (name, t) in tables {
        std::fs::write(dir.join(name), t.render())?;
        artifacts.push(name.clone());
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyKey<'a> {
    suite: Suite,
    budget: Budget,
    seed: u64,
    tolerances: &'a BTreeMap<String, f64>,
}

/// Runs an acceptance suite and writes its tables and `manifest.json` under `out`.
pub fn verify(
    suite: Suite,
    budget: Budget,
    seed: u64,
    tolerances: &BTreeMap<String, f64>,
    out: &Path,
    on_record: &mut dyn FnMut(&CheckRecord),
) -> Result<RunManifest, CliError> {
    let t = Instant::now();
    let outcome = run_suite(suite, &Plan::new(budget), seed, tolerances, on_record);
    let mut artifacts = Vec::new();
    write_tables(out, &outcome.tables, &mut artifacts)?;
    let manifest = RunManifest {
        tool: "dimerlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash_json(&VerifyKey { suite, budget, seed, tolerances }),
        seeds: outcome.seeds,
        checks: outcome.records,
        artifacts,
        wall_seconds: t.elapsed().as_secs_f64(),
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Samples the unit square at every configured size and writes covariance and Gaussianity
/// tables, optional renders, and the manifest. The configured suite, if any, runs as well.
pub fn experiment(
    cfg: &ExperimentConfig,
    default_out: &Path,
    on_record: &mut dyn FnMut(&CheckRecord),
) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let t = Instant::now();
    let out: PathBuf = cfg.out_dir.clone().unwrap_or_else(|| default_out.to_path_buf());
    let points = cfg.points();
    let functions: Vec<TestFunction> = cfg.test_functions.iter().map(|s| parse_test_function(s)).collect::<Result<_, _>>()?;
    let model = GffModel::new(1.0, 1.0, 1024);
    let green = Greens::new(DomainSpec::rectangle(1.0, 1.0));
    let mut cov = Table::new(&["n", "epsilon", "samples", "i", "j", "covariance", "std_error", "target", "relative_deviation"]);
    let mut gauss = Table::new(&[
        "n", "function", "samples", "variance", "predicted_variance", "variance_ratio", "skewness", "excess_kurtosis", "ks_distance", "ks_threshold",
    ]);
    let mut seeds = vec![cfg.seed];
    let mut artifacts = Vec::new();
    for (idx, &n) in cfg.sizes.iter().enumerate() {
        let samples = cfg.samples_for(idx);
        let seed = cfg.seed.wrapping_add(idx as u64);
        seeds.push(seed);
        let phis: Vec<_> = functions.iter().map(|f| move |z| f.eval_on(1.0, 1.0, z)).collect();
        let run = run_square(n, samples, seed, cfg.algorithm, &points, &phis).map_err(|e| CliError::Internal(e.to_string()))?;
        for i in 0..points.len() {
            for j in i..points.len() {
                let est = run.covariance(i, j);
                let target = if i == j {
                    f64::NAN
                } else {
                    -16.0 / std::f64::consts::PI
                        * green.g_dirichlet(points[i], points[j]).map_err(|e| CliError::Usage(e.to_string()))?
                };
                cov.push(vec![
                    n.into(),
                    run.epsilon().into(),
                    samples.into(),
                    i.into(),
                    j.into(),
                    est.covariance.into(),
                    est.std_error.into(),
                    target.into(),
                    ((est.covariance - target) / target).into(),
                ]);
            }
        }
        for (o, f) in functions.iter().enumerate() {
            let values = run.ensemble.centered_observable(o);
            let name = cfg.test_functions[o].clone();
            match field_comparison(run.epsilon(), &values, &model, f, samples.max(1000), seed ^ 0x5eed) {
                Ok(r) => gauss.push(vec![
                    n.into(),
                    name.into(),
                    samples.into(),
                    r.dimer.variance.into(),
                    r.predicted_variance.into(),
                    r.variance_ratio.into(),
                    r.dimer.skewness.into(),
                    r.dimer.excess_kurtosis.into(),
                    r.ks_distance.into(),
                    r.ks_threshold.into(),
                ]),
                Err(_) => {
                    let s = stats::summarize(&values);
                    gauss.push(vec![
                        n.into(),
                        name.into(),
                        samples.into(),
                        s.variance.into(),
                        f64::NAN.into(),
                        f64::NAN.into(),
                        s.skewness.into(),
                        s.excess_kurtosis.into(),
                        f64::NAN.into(),
                        f64::NAN.into(),
                    ])
                }
            }
        }
        if cfg.render && cfg.algorithm == Algorithm::Wilson {
            let region = unit_square_region(n);
            let tiling = sample_tiling_wilson(&region, seed).map_err(|e| CliError::Internal(e.to_string()))?;
            let heights = height_function(&region, &tiling).map_err(|e| CliError::Internal(e.to_string()))?;
            let name = format!("tiling_n{n}.svg");
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join(&name), render_tiling_svg(&region, &tiling, Some(&heights)))?;
            artifacts.push(name);
        }
    }
    let mut tables = vec![("experiment_covariance.csv".to_string(), cov), ("experiment_gaussianity.csv".to_string(), gauss)];
    let mut checks = Vec::new();
    if let Some(suite) = cfg.suite {
        let outcome = run_suite(suite, &Plan::new(cfg.budget), cfg.seed, &cfg.tolerances, on_record);
        tables.extend(outcome.tables);
        checks = outcome.records;
        seeds.extend(outcome.seeds);
    }
    write_tables(&out, &tables, &mut artifacts)?;
    seeds.sort_unstable();
    seeds.dedup();
    let manifest = RunManifest {
        tool: "dimerlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        seeds,
        checks,
        artifacts,
        wall_seconds: t.elapsed().as_secs_f64(),
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}
