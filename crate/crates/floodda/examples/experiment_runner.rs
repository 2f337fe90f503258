//! Config-driven experiment run from the library: open loop plus gauge
//! assimilation over a shortened event, with the full artifact set (CSV
//! tables, diagnostics, SVG charts, summary manifest) written to ./out.
//!
//! Run with: cargo run --release --example experiment_runner

use std::path::Path;

use floodda::config::ExperimentConfig;
use floodda::experiment::run_experiments;
use floodda::Result;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::default_osse(42)?;
    // Keep the example quick: two experiments, first 15 days of the event.
    cfg.experiments.set = vec!["OL".to_string(), "IDA".to_string()];
    cfg.experiments.t_end_s = 15.0 * 86_400.0;
    cfg.osse.snapshot_times_s = vec![14.0 * 86_400.0];
    cfg.materialize()?;
    cfg.validate()?;

    let out_dir = Path::new("out/experiment_runner");
    let out = run_experiments(&cfg, out_dir, None)?;

    print!("{}", out.score_table.to_text());
    for (name, err) in &out.failures {
        eprintln!("failed: {name}: {err}");
    }
    println!("\n{} artifacts written to {}:", out.manifest.len(), out_dir.display());
    for name in out.manifest.iter().take(12) {
        println!("  {name}");
    }
    if out.manifest.len() > 12 {
        println!("  ... and {} more", out.manifest.len() - 12);
    }
    Ok(())
}
