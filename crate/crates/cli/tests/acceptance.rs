//! Full-budget acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the per-criterion lines are never captured.

use std::collections::BTreeMap;
use std::io::Write;

use dimer_cli::config::{Budget, Suite};
use dimer_cli::run::verify;

const SEED: u64 = 20_261_019;

fn main() {
    let out = std::env::temp_dir().join(format!("dimerlab-acceptance-{}", std::process::id()));
    let mut stdout = std::io::stdout();
    let _ = writeln!(stdout, "\nacceptance suite (budget full, seed {SEED})");
    let manifest = verify(Suite::All, Budget::Full, SEED, &BTreeMap::new(), &out, &mut |r| {
        let _ = writeln!(std::io::stdout(), "{}", r.line());
        let _ = std::io::stdout().flush();
    })
    .expect("acceptance run");
    let failed = manifest.failures();
    let _ = writeln!(
        stdout,
        "acceptance: {} passed, {failed} failed in {:.1}s; manifest at {}",
        manifest.checks.len() - failed,
        manifest.wall_seconds,
        out.join("manifest.json").display()
    );
    let ids: Vec<&str> = manifest.checks.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "S1"]);
    if failed > 0 {
        std::process::exit(1);
    }
}
