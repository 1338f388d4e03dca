use std::path::Path;
use std::process::{Command, Output};

fn dimerlab(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimerlab"))
        .args(args)
        .env("DIMERLAB_OUT", out_dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn count_eight_by_eight() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimerlab(&["count", "--rect", "8x8"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(text(&o).trim(), "12988816");
}

#[test]
fn region_sample_height_render_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let o = dimerlab(&["region", "--shape", "rectangle", "--a", "3", "--b", "3", "--epsilon", "1", "--out", &p("r.json")], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = dimerlab(&["count", "--region", &p("r.json")], dir.path());
    assert_eq!(text(&o).trim(), "4");
    let o = dimerlab(&["sample", "--region", &p("r.json"), "--seed", "3", "--count", "5", "--out", &p("t.txt")], dir.path());
    assert_eq!(code(&o), 0);
    let o = dimerlab(&["height", "--region", &p("r.json"), "--tiling", &p("t.txt")], dir.path());
    assert_eq!(code(&o), 0);
    assert!(text(&o).starts_with("origin,"));
    let render = || dimerlab(&["render", "--region", &p("r.json"), "--tiling", &p("t.txt"), "--heights"], dir.path());
    let (a, b) = (render(), render());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(text(&a).matches("class=\"domino\"").count(), 4);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"cells\": 3").unwrap();
    let o = dimerlab(&["count", "--region", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    // Monte Carlo subcommands need a seed
    let o = dimerlab(&["sample", "--region", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    let o = dimerlab(&["verify", "--suite", "montecarlo"], dir.path());
    assert_eq!(code(&o), 2);
    let o = dimerlab(&["frobnicate"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_exact_passes_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimerlab(&["verify", "--suite", "exact"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let ids: Vec<&str> = m["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["1", "4", "5", "6", "11", "S1"]);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn failed_check_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimerlab(&["verify", "--suite", "exact", "--tolerance", "4=-1"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn experiment_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        std::fs::write(
            &cfg,
            format!(
                r#"{{"seed": 5, "sizes": [9, 11], "samples": [300], "render": true,
                    "test_functions": ["eigen:1,1", "bump:0.5,0.5,0.3"], "out_dir": {:?}}}"#,
                out
            ),
        )
        .unwrap();
        let o = dimerlab(&["experiment", "--config", cfg.to_str().unwrap()], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for name in ["experiment_covariance.csv", "experiment_gaussianity.csv", "tiling_n9.svg"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let cov = std::fs::read_to_string(a.join("experiment_covariance.csv")).unwrap();
    assert_eq!(cov.lines().count(), 1 + 2 * 3);
}

#[test]
fn moments_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimerlab(&["moments", "--points", "0,1;0,2", "--quadrature"], dir.path());
    assert_eq!(code(&o), 0);
    let t = text(&o);
    let values: Vec<f64> = t.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((values[0] - 8.0 / std::f64::consts::PI.powi(2) * 3f64.ln()).abs() < 1e-12);
    assert!((values[0] - values[1]).abs() < 1e-6);
}
