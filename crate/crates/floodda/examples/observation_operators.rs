//! Observation operators and overpass scheduling: maps a model trajectory
//! to gauge water levels and swath node WSEs, and compares the overpass
//! counts of the nominal, tripled, and fixed-interval pass plans.
//!
//! Run with: cargo run --release --example observation_operators

use floodda::config::ExperimentConfig;
use floodda::obs::{build_pass_plan, h_gauge, h_swot, PassPlanKind};
use floodda::river::run_with_budget;
use floodda::Result;

fn main() -> Result<()> {
    let cfg = ExperimentConfig::default_osse(42)?;
    let sc = cfg.build()?;
    let window = (cfg.experiments.t_start_s, cfg.experiments.t_end_s);

    // A short forward run to have something to observe.
    let t_end = 5.0 * 86_400.0;
    let (states, _) = run_with_budget(
        &sc.initial_state,
        &sc.geometry,
        &sc.forcing,
        &sc.truth_spec.true_control,
        t_end,
        3600.0,
        sc.run_opts,
    )?;

    // Gauge equivalents: WSE at each station at a few sampling instants.
    let times: Vec<f64> = (1..=4).map(|d| d as f64 * 86_400.0).collect();
    println!("gauge equivalents (m above datum):");
    for st in &sc.stations {
        let wl = h_gauge(&states, &sc.geometry, st, &times)?;
        let cells: Vec<String> = wl.iter().map(|v| format!("{v:7.3}")).collect();
        println!("  {:4} at {:5.1} km: {}", st.id, st.x / 1000.0, cells.join(" "));
    }

    // Swath node equivalents for a partial-coverage overpass.
    let coverage = (0.0, 0.6 * sc.geometry.length);
    let nodes = h_swot(&states, &sc.geometry, coverage, 2.5 * 86_400.0)?;
    println!(
        "\nswath overpass covering [0, {:.0}] km at day 2.5: {} nodes",
        coverage.1 / 1000.0,
        nodes.len()
    );
    for (x, wse) in nodes.iter().step_by(nodes.len() / 5) {
        println!("  node at {:5.1} km: WSE {wse:.3} m", x / 1000.0);
    }

    // Pass plans over the full event window.
    println!("\noverpass schedules over {:.0} days:", (window.1 - window.0) / 86_400.0);
    for (label, kind) in [
        ("nominal 21 d", PassPlanKind::Nominal21d),
        ("tripled     ", PassPlanKind::Tripled),
        ("every 12 h  ", PassPlanKind::FixedInterval(43_200.0)),
    ] {
        let plan = build_pass_plan(kind, window, &sc.passes, sc.geometry.length)?;
        let first: Vec<String> = plan
            .iter()
            .take(4)
            .map(|o| format!("day {:.1}", o.time / 86_400.0))
            .collect();
        println!("  {label}: {:3} overpasses ({}, ...)", plan.len(), first.join(", "));
    }
    Ok(())
}
