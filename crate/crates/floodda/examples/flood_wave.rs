//! Flood-wave routing through the shipped scenario: runs the truth control
//! through the 50 km reach, reports peak water levels along the reach, the
//! floodplain extent at the crest, and the closing mass budget.
//!
//! Run with: cargo run --release --example flood_wave

use floodda::config::ExperimentConfig;
use floodda::river::{flood_extent_mask, run_with_budget};
use floodda::Result;

fn main() -> Result<()> {
    let cfg = ExperimentConfig::default_osse(42)?;
    let sc = cfg.build()?;
    let t_end = cfg.experiments.t_end_s;

    println!("routing the truth event over {:.0} km ...", sc.geometry.length / 1000.0);
    let (states, budget) = run_with_budget(
        &sc.initial_state,
        &sc.geometry,
        &sc.truth_forcing,
        &sc.truth_spec.true_control,
        t_end,
        3600.0,
        sc.run_opts,
    )?;

    // Peak depth per quarter of the reach.
    let n = sc.geometry.cell_count;
    for (label, i) in [("  5 km", n / 10), (" 25 km", n / 2), (" 45 km", 9 * n / 10)] {
        let (t_peak, h_peak) = states
            .iter()
            .map(|s| (s.time, s.depth[i]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!(
            "{label}: peak depth {h_peak:.2} m at day {:.1}",
            t_peak / 86_400.0
        );
    }

    // Floodplain extent at the crest of the event.
    let crest = states
        .iter()
        .min_by(|a, b| {
            (a.time - sc.truth_spec.flood_peak_time)
                .abs()
                .total_cmp(&(b.time - sc.truth_spec.flood_peak_time).abs())
        })
        .unwrap();
    let mask = flood_extent_mask(crest, &sc.geometry, sc.truth_spec.extent_threshold);
    let flooded = mask.floodplain.iter().filter(|&&f| f).count();
    println!(
        "at the crest (day {:.1}) {flooded}/{n} cells are overbank",
        crest.time / 86_400.0
    );

    let residual = budget.inflow_volume - budget.outflow_volume
        - (states.last().unwrap().volume(&sc.geometry) - states[0].volume(&sc.geometry));
    println!(
        "mass budget: in {:.3e} m^3, out {:.3e} m^3, residual {:.1e} m^3 ({:.1e} relative)",
        budget.inflow_volume,
        budget.outflow_volume,
        residual,
        residual.abs() / budget.inflow_volume
    );
    Ok(())
}
