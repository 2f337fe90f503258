//! Steady uniform flow: builds a short prismatic reach by hand, seeds it
//! with the analytic Manning-Strickler normal depth, integrates for a few
//! hours and shows that the solver holds the analytic profile.
//!
//! Run with: cargo run --example steady_profile

use floodda::control::ControlVector;
use floodda::river::{
    run, steady_uniform_depth, BoundaryForcing, CrossSection, FrictionZone, HydroState,
    RatingCurve, RiverGeometry,
};
use floodda::Result;

fn main() -> Result<()> {
    // A 10 km rectangular channel on a constant slope with one friction zone.
    let length = 10_000.0;
    let cells = 50;
    let dx = length / cells as f64;
    let slope = 4e-4;
    let ks = 35.0;
    let q = 600.0;

    let section = CrossSection {
        main_width: 150.0,
        bank_height: 6.0,
        floodplain_width: 0.0,
    };
    let bed: Vec<f64> = (0..cells)
        .map(|i| slope * (length - (i as f64 + 0.5) * dx))
        .collect();
    let geom = RiverGeometry::new(
        length,
        bed,
        vec![section; cells],
        vec![FrictionZone {
            zone_id: 1,
            x_start: 0.0,
            x_end: length,
            ks,
        }],
        10.0,
    )?;

    // Normal depth solves q = ks * A * R^(2/3) * sqrt(S).
    let h_n = steady_uniform_depth(q, &section, ks, slope)?;
    println!("normal depth for q = {q} m^3/s: {h_n:.4} m");

    // Downstream rating curve consistent with the same uniform relation, so
    // the boundary does not disturb the profile.
    let qs: Vec<f64> = (1..=40).map(|k| k as f64 * 50.0).collect();
    let wses: Vec<f64> = qs
        .iter()
        .map(|&qq| steady_uniform_depth(qq, &section, ks, slope))
        .collect::<Result<_>>()?;
    let forcing = BoundaryForcing {
        inflow_hydrograph: vec![(0.0, q), (86_400.0, q)],
        rating_curve: RatingCurve {
            points: qs.into_iter().zip(wses).collect(),
        },
    };

    let initial = HydroState {
        time: 0.0,
        depth: vec![h_n; cells],
        discharge: vec![q; cells],
    };
    let control = ControlVector {
        ks: vec![ks],
        mu: 1.0,
    };

    let states = run(&initial, &geom, &forcing, &control, 6.0 * 3600.0, 3600.0)?;
    let last = states.last().unwrap();

    let max_dev = last
        .depth
        .iter()
        .map(|h| (h - h_n).abs())
        .fold(0.0_f64, f64::max);
    println!("after {:.0} h:", last.time / 3600.0);
    println!("  max |depth - normal depth| = {max_dev:.2e} m");
    for i in [0, cells / 2, cells - 1] {
        println!(
            "  cell {i:2}: depth {:.4} m, discharge {:.2} m^3/s",
            last.depth[i], last.discharge[i]
        );
    }
    Ok(())
}
