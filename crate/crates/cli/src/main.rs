use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dimer_cli::config::{parse_test_function, Budget, ExperimentConfig, Suite};
use dimer_cli::csv::Table;
use dimer_cli::run::{experiment, verify, DEFAULT_OUT};
use dimer_cli::svg::render_tiling_svg;
use dimer_cli::CliError;
use dimer_core::enumerate::{count_tilings, Tiling};
use dimer_core::gff::{sample_pairings, GffModel};
use dimer_core::height::{height_function, to_csv};
use dimer_core::lattice::{
    approximate_domain, validate_temperleyan, DomainSpec, TemperleyanRegion,
};
use dimer_core::moments::{contour_moment, default_paths, k_point_moment};
use dimer_core::sampler::{sample_many, Algorithm};
use dimer_core::stats;
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "dimerlab", version, about = "Domino tiling height fluctuations: exact counts, samplers, field checks")]
struct Cli {
    /// Default directory for run outputs.
    #[arg(long, global = true, env = "DIMERLAB_OUT", default_value = DEFAULT_OUT)]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a Temperleyan region file.
    Region(RegionArgs),
    /// Count tilings exactly.
    Count(CountArgs),
    /// Draw uniform tilings.
    Sample(SampleArgs),
    /// Height function of a tiling as CSV.
    Height(HeightArgs),
    /// Limiting height moments on a continuum domain.
    Moments(MomentArgs),
    /// Sample Gaussian free field pairings on the unit square.
    Gff(GffArgs),
    /// Render a tiling as SVG.
    Render(RenderArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
    /// Run an experiment described by a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Rectangle,
    Disk,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long, value_enum)]
    shape: Shape,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, allow_hyphen_values = true, default_value = "0,0", value_parser = parse_point)]
    center: Complex64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    basepoint: Option<Complex64>,
    #[arg(long)]
    epsilon: f64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long, conflicts_with = "rect", required_unless_present = "rect")]
    region: Option<PathBuf>,
    /// Plain `MxN` rectangle.
    #[arg(long, value_parser = parse_dims)]
    rect: Option<(i32, i32)>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    region: PathBuf,
    #[arg(long, default_value = "wilson", value_parser = parse_algorithm)]
    algorithm: Algorithm,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HeightArgs {
    #[arg(long)]
    region: PathBuf,
    #[arg(long)]
    tiling: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MomentArgs {
    /// `half-plane`, `disk` (unit disk) or `rectangle:a,b`.
    #[arg(long, default_value = "half-plane", value_parser = parse_domain)]
    domain: DomainSpec,
    /// Points as `x,y;x,y;...`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_points)]
    points: Points,
    /// Also evaluate the contour-integral formula (half-plane, two or four points).
    #[arg(long)]
    quadrature: bool,
}

#[derive(Args)]
struct GffArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1024)]
    modes: usize,
    /// Test functions, `eigen:j,k` or `bump:x,y,r`.
    #[arg(long = "phi", default_value = "eigen:1,1")]
    phis: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    region: PathBuf,
    #[arg(long)]
    tiling: PathBuf,
    /// Label vertices with heights.
    #[arg(long)]
    heights: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long, value_enum, default_value = "small")]
    budget: Budget,
    /// Required unless `--suite exact`.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override as `id=value`, repeatable.
    #[arg(long = "tolerance", value_parser = parse_override)]
    tolerances: Vec<(String, f64)>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Clone, Debug)]
struct Points(Vec<Complex64>);

fn parse_point(s: &str) -> Result<Complex64, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad number {x:?}"))?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad number {y:?}"))?;
    Ok(Complex64::new(x, y))
}

fn parse_points(s: &str) -> Result<Points, String> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_point).collect::<Result<_, _>>().map(Points)
}

fn parse_dims(s: &str) -> Result<(i32, i32), String> {
    let (m, n) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected MxN, got {s:?}"))?;
    match (m.parse::<i32>(), n.parse::<i32>()) {
        (Ok(m), Ok(n)) if m >= 0 && n >= 0 => Ok((m, n)),
        _ => Err(format!("expected MxN, got {s:?}")),
    }
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_domain(s: &str) -> Result<DomainSpec, String> {
    match s {
        "half-plane" => Ok(DomainSpec::half_plane()),
        "disk" => Ok(DomainSpec::unit_disk()),
        _ => {
            let sides = s.strip_prefix("rectangle:").ok_or_else(|| format!("unknown domain {s:?}"))?;
            let p = parse_point(sides)?;
            Ok(DomainSpec::rectangle(p.re, p.im))
        }
    }
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (id, v) = s.split_once('=').ok_or_else(|| format!("expected id=value, got {s:?}"))?;
    Ok((id.to_string(), v.parse().map_err(|_| format!("bad tolerance {v:?}"))?))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_region(path: &Path) -> Result<TemperleyanRegion, CliError> {
    let region = TemperleyanRegion::from_json(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let report = validate_temperleyan(&region);
    if !report.all_passed() {
        return Err(CliError::Usage(format!("{} is not Temperleyan: {}", path.display(), report.failures().join("; "))));
    }
    Ok(region)
}

fn load_tiling(path: &Path, region: &TemperleyanRegion) -> Result<Tiling, CliError> {
    let text = read(path)?;
    let t = dimer_core::enumerate::parse_tilings(&text)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Usage(format!("{} holds no tiling", path.display())))?;
    t.validate(region).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(t)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn print_record(r: &dimer_cli::manifest::CheckRecord) {
    eprintln!("{}", r.line());
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Region(a) => {
            let mut spec = match a.shape {
                Shape::Rectangle => DomainSpec::rectangle(a.a, a.b),
                Shape::Disk => DomainSpec::disk((a.center.re, a.center.im), a.radius),
            };
            if let Some(b) = a.basepoint {
                spec = spec.with_basepoint((b.re, b.im));
            }
            let region = approximate_domain(&spec, a.epsilon).map_err(|e| CliError::Usage(e.to_string()))?;
            emit(a.out.as_deref(), &(region.to_json() + "\n"))
        }
        Command::Count(a) => {
            let count = match (a.region, a.rect) {
                (Some(p), _) => count_tilings(&load_region(&p)?),
                (None, Some((m, n))) => {
                    let cells: std::collections::BTreeSet<_> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
                    count_tilings(&cells)
                }
                (None, None) => return Err(CliError::Usage("give --region or --rect".into())),
            };
            println!("{count}");
            Ok(())
        }
        Command::Sample(a) => {
            let region = load_region(&a.region)?;
            let tilings = sample_many(&region, a.algorithm, a.seed, a.count).map_err(|e| CliError::Usage(e.to_string()))?;
            let text: String = tilings.iter().map(|t| t.to_text()).collect();
            emit(a.out.as_deref(), &text)
        }
        Command::Height(a) => {
            let region = load_region(&a.region)?;
            let tiling = load_tiling(&a.tiling, &region)?;
            let h = height_function(&region, &tiling).map_err(|e| CliError::Internal(e.to_string()))?;
            emit(a.out.as_deref(), &to_csv(&h))
        }
        Command::Moments(a) => {
            let ps = a.points.0;
            let exact = k_point_moment(&a.domain, &ps).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut t = Table::new(&["method", "value", "error_estimate"]);
            t.push(vec!["pairing_sum".into(), exact.value.into(), exact.error_estimate.into()]);
            if a.quadrature {
                let paths = default_paths(&ps).map_err(|e| CliError::Usage(e.to_string()))?;
                let q = contour_moment(&ps, &paths).map_err(|e| CliError::Usage(e.to_string()))?;
                t.push(vec!["contour".into(), q.value.into(), q.error_estimate.into()]);
            }
            print!("{}", t.render());
            Ok(())
        }
        Command::Gff(a) => {
            let model = GffModel::new(1.0, 1.0, a.modes);
            let phis = a.phis.iter().map(|s| parse_test_function(s)).collect::<Result<Vec<_>, _>>()?;
            let weights: Vec<Vec<f64>> = phis.iter().map(|p| model.pairing_weights(p)).collect();
            let values = sample_pairings(&model, &weights, a.samples, a.seed);
            let mut t = Table::new(&["function", "samples", "mean", "variance", "predicted_variance", "skewness", "excess_kurtosis"]);
            for ((name, w), v) in a.phis.iter().zip(&weights).zip(&values) {
                let s = stats::summarize(v);
                t.push(vec![
                    name.as_str().into(),
                    a.samples.into(),
                    s.mean.into(),
                    s.variance.into(),
                    model.covariance(w, w).into(),
                    s.skewness.into(),
                    s.excess_kurtosis.into(),
                ]);
            }
            emit(a.out.as_deref(), &t.render())
        }
        Command::Render(a) => {
            let region = load_region(&a.region)?;
            let tiling = load_tiling(&a.tiling, &region)?;
            let heights = if a.heights {
                Some(height_function(&region, &tiling).map_err(|e| CliError::Internal(e.to_string()))?)
            } else {
                None
            };
            emit(a.out.as_deref(), &render_tiling_svg(&region, &tiling, heights.as_ref()))
        }
        Command::Verify(a) => {
            let seed = match (a.suite, a.seed) {
                (_, Some(s)) => s,
                (Suite::Exact, None) => 0,
                _ => return Err(CliError::Usage("--seed is required for Monte Carlo checks".into())),
            };
            let overrides: BTreeMap<String, f64> = a.tolerances.into_iter().collect();
            let manifest = verify(a.suite, a.budget, seed, &overrides, &cli.out_dir, &mut print_record)?;
            eprintln!("manifest written to {}", cli.out_dir.join("manifest.json").display());
            match manifest.failures() {
                0 => Ok(()),
                n => Err(CliError::CheckFailed(n)),
            }
        }
        Command::Experiment(a) => {
            let cfg = ExperimentConfig::from_json(&read(&a.config)?)?;
            let manifest = experiment(&cfg, &cli.out_dir, &mut print_record)?;
            eprintln!("config {} wrote {} artifacts", manifest.config_hash, manifest.artifacts.len());
            match manifest.failures() {
                0 => Ok(()),
                n => Err(CliError::CheckFailed(n)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dimerlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
