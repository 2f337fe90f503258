use crate::error::{Error, Result};
use crate::river::{wse_at, HydroState, RiverGeometry};

use super::types::{node_center, GaugeStation, NODE_SPACING};

fn check_span(trajectory: &[HydroState], t: f64) -> Result<(usize, usize, f64)> {
    if trajectory.is_empty() {
        return Err(Error::Argument("empty trajectory".into()));
    }
    let t0 = trajectory[0].time;
    let t1 = trajectory[trajectory.len() - 1].time;
    let eps = 1e-9 * t1.abs().max(1.0);
    if t < t0 - eps || t > t1 + eps {
        return Err(Error::Domain(format!(
            "time {t} outside trajectory span [{t0}, {t1}]"
        )));
    }
    let t = t.clamp(t0, t1);
    // Snapshot pair bracketing t (trajectory times are increasing).
    let hi = trajectory
        .iter()
        .position(|s| s.time >= t)
        .unwrap_or(trajectory.len() - 1);
    let lo = hi.saturating_sub(1);
    let w = if hi == 0 || trajectory[hi].time == trajectory[lo].time {
        1.0
    } else {
        (t - trajectory[lo].time) / (trajectory[hi].time - trajectory[lo].time)
    };
    Ok((lo, hi, w))
}

/// Model equivalent of gauge water levels: WSE at the station abscissa,
/// linearly interpolated in space and time.
pub fn h_gauge(
    trajectory: &[HydroState],
    geom: &RiverGeometry,
    station: &GaugeStation,
    times: &[f64],
) -> Result<Vec<f64>> {
    times
        .iter()
        .map(|&t| {
            let (lo, hi, w) = check_span(trajectory, t)?;
            let a = wse_at(&trajectory[lo], geom, station.x)?;
            let b = wse_at(&trajectory[hi], geom, station.x)?;
            Ok(a * (1.0 - w) + b * w)
        })
        .collect()
}

/// Per-cell WSE at time `t`, linearly interpolated between snapshots.
pub fn interpolate_wse_profile(
    trajectory: &[HydroState],
    geom: &RiverGeometry,
    t: f64,
) -> Result<Vec<f64>> {
    let (lo, hi, w) = check_span(trajectory, t)?;
    Ok((0..geom.cell_count)
        .map(|i| trajectory[lo].wse(geom, i) * (1.0 - w) + trajectory[hi].wse(geom, i) * w)
        .collect())
}

/// Model equivalent of the swath node product at one overpass: for every
/// node whose center lies inside the coverage interval, the mean simulated
/// WSE over the cells of that node segment. Empty coverage intersection
/// gives an empty result.
pub fn h_swot(
    trajectory: &[HydroState],
    geom: &RiverGeometry,
    coverage: (f64, f64),
    t: f64,
) -> Result<Vec<(f64, f64)>> {
    let profile = interpolate_wse_profile(trajectory, geom, t)?;
    let (x_lo, x_hi) = coverage;
    let dx = geom.dx();
    let n_nodes = (geom.length / NODE_SPACING).ceil() as usize;
    let mut out = Vec::new();
    for j in 0..n_nodes {
        let cx = node_center(j);
        if cx < x_lo || cx > x_hi || cx > geom.length {
            continue;
        }
        let (lo, hi) = super::types::node_span(j);
        // Cells whose centers fall in [lo, hi).
        let first = ((lo - 0.5 * dx) / dx).ceil().max(0.0) as usize;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut i = first;
        while i < geom.cell_count && geom.cell_x(i) < hi {
            if geom.cell_x(i) >= lo {
                sum += profile[i];
                count += 1;
            }
            i += 1;
        }
        let value = if count > 0 {
            sum / count as f64
        } else {
            // Node narrower than a cell: fall back to interpolation.
            let lo_state = &trajectory[0];
            let _ = lo_state;
            interp_at(&profile, geom, cx)
        };
        out.push((cx, value));
    }
    Ok(out)
}

fn interp_at(profile: &[f64], geom: &RiverGeometry, x: f64) -> f64 {
    let dx = geom.dx();
    let n = geom.cell_count;
    let first = 0.5 * dx;
    if x <= first {
        return profile[0];
    }
    if x >= geom.cell_x(n - 1) {
        return profile[n - 1];
    }
    let i = (((x - first) / dx).floor() as usize).min(n - 2);
    let w = (x - geom.cell_x(i)) / dx;
    profile[i] * (1.0 - w) + profile[i + 1] * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::types::StationRole;
    use crate::river::{CrossSection, FrictionZone};

    fn geom(n: usize, length: f64) -> RiverGeometry {
        RiverGeometry::new(
            length,
            vec![0.0; n],
            vec![
                CrossSection {
                    main_width: 100.0,
                    bank_height: 10.0,
                    floodplain_width: 0.0,
                };
                n
            ],
            vec![FrictionZone {
                zone_id: 1,
                x_start: 0.0,
                x_end: length,
                ks: 40.0,
            }],
            10.0,
        )
        .unwrap()
    }

    fn state(time: f64, depths: Vec<f64>) -> HydroState {
        let n = depths.len();
        HydroState {
            time,
            depth: depths,
            discharge: vec![0.0; n],
        }
    }

    fn station(x: f64) -> GaugeStation {
        GaugeStation {
            id: "S".into(),
            x,
            zone_id: 1,
            role: StationRole::Assimilation,
            sampling_interval: 900.0,
        }
    }

    #[test]
    fn gauge_at_snapshot_and_cell_center_is_exact() {
        let g = geom(5, 1000.0);
        let traj = vec![state(0.0, vec![1.0, 2.0, 3.0, 4.0, 5.0])];
        let v = h_gauge(&traj, &g, &station(g.cell_x(2)), &[0.0]).unwrap();
        assert_eq!(v, vec![3.0]);
    }

    #[test]
    fn gauge_interpolates_linearly_in_time() {
        let g = geom(3, 600.0);
        let traj = vec![state(0.0, vec![10.0; 3]), state(100.0, vec![11.0; 3])];
        let v = h_gauge(&traj, &g, &station(300.0), &[50.0]).unwrap();
        assert!((v[0] - 10.5).abs() < 1e-12);
    }

    #[test]
    fn gauge_matches_bilinear_oracle() {
        // Independent brute-force bilinear interpolation at arbitrary (x, t).
        let g = geom(4, 800.0);
        let d0 = vec![1.0, 2.0, 4.0, 8.0];
        let d1 = vec![2.0, 3.0, 5.0, 6.0];
        let traj = vec![state(0.0, d0.clone()), state(200.0, d1.clone())];
        let (x, t) = (450.0, 60.0);
        // Cell centers at 100, 300, 500, 700; x=450 sits between cells 1 and 2.
        let wx = (x - 300.0) / 200.0;
        let at = |d: &Vec<f64>| d[1] * (1.0 - wx) + d[2] * wx;
        let wt = t / 200.0;
        let expected = at(&d0) * (1.0 - wt) + at(&d1) * wt;
        let v = h_gauge(&traj, &g, &station(x), &[t]).unwrap();
        assert!((v[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn gauge_time_outside_span_errors() {
        let g = geom(3, 600.0);
        let traj = vec![state(0.0, vec![1.0; 3]), state(10.0, vec![1.0; 3])];
        assert!(h_gauge(&traj, &g, &station(300.0), &[20.0]).is_err());
        assert!(h_gauge(&traj, &g, &station(300.0), &[-5.0]).is_err());
    }

    #[test]
    fn full_coverage_yields_one_node_per_200m() {
        // 50 km reach, 250 cells of 200 m: 250 node equivalents.
        let n = 250;
        let g = geom(n, 50_000.0);
        let traj = vec![state(0.0, vec![2.0; n])];
        let nodes = h_swot(&traj, &g, (0.0, 50_000.0), 0.0).unwrap();
        assert_eq!(nodes.len(), 250);
        // Nodes of width dx centered on cells reproduce per-cell WSE exactly.
        for (j, &(cx, wse)) in nodes.iter().enumerate() {
            assert_eq!(cx, node_center(j));
            assert_eq!(wse, 2.0);
        }
    }

    #[test]
    fn partial_coverage_omits_uncovered_nodes() {
        let n = 250;
        let g = geom(n, 50_000.0);
        let traj = vec![state(0.0, vec![2.0; n])];
        let x_lo = 50_000.0 / 3.0;
        let nodes = h_swot(&traj, &g, (x_lo, 50_000.0), 0.0).unwrap();
        assert!(nodes.iter().all(|&(cx, _)| cx >= x_lo));
        assert!(nodes.len() < 250);
        // Empty intersection is an empty result, not an error.
        let none = h_swot(&traj, &g, (60_000.0, 70_000.0), 0.0).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn uniform_field_gives_uniform_node_values() {
        let n = 25;
        let g = geom(n, 5000.0);
        let traj = vec![state(0.0, vec![3.25; n])];
        for (_, wse) in h_swot(&traj, &g, (0.0, 5000.0), 0.0).unwrap() {
            assert_eq!(wse, 3.25);
        }
    }

    #[test]
    fn operators_are_pure() {
        let n = 25;
        let g = geom(n, 5000.0);
        let traj = vec![state(0.0, vec![1.5; n]), state(100.0, vec![2.5; n])];
        let a = h_swot(&traj, &g, (0.0, 5000.0), 50.0).unwrap();
        let b = h_swot(&traj, &g, (0.0, 5000.0), 50.0).unwrap();
        assert_eq!(a, b);
    }
}
