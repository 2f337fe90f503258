//! Twin-experiment harness: truth generation, synthetic gauge and swath
//! observation synthesis (pixel cloud -> node aggregation), and
//! dark-water degradation.
//!
//! The pixel pipeline is a geometric stand-in for a radar simulator: pixels
//! are scattered over wet node segments, carry the local simulated WSE plus
//! Gaussian noise, and are aggregated back to node products the same way the
//! assimilation-side observation operator reads them. With zero noise, no
//! dark water and full coverage the round trip is exact.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::ControlVector;
use crate::error::{Error, Result};
use crate::obs::{
    h_gauge, node_index, node_span, GaugeObservation, GaugeStation, NodeObservation, NodeQuality,
    NODE_SPACING,
};
use crate::river::{
    flood_extent_mask, run_with_budget, BoundaryForcing, ExtentMask, HydroState, RiverGeometry,
    RunOptions, H_DRY,
};
use crate::seed;

/// Definition of the reference ("truth") run of a twin experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    /// Control vector driving the truth simulation.
    pub true_control: ControlVector,
    /// Diagnostic flood peak time, s.
    pub flood_peak_time: f64,
    /// Times at which flood extent masks are extracted, s.
    pub extent_snapshot_times: Vec<f64>,
    /// Strict-inequality margin for the floodplain extent predicate, m.
    pub extent_threshold: f64,
}

/// The deterministic truth trajectory and its extent masks.
pub struct Truth {
    pub trajectory: Vec<HydroState>,
    /// One mask per `extent_snapshot_times` entry, taken from the nearest
    /// saved state.
    pub extent_masks: Vec<ExtentMask>,
}

/// Runs the truth simulation and extracts extent masks at the snapshot
/// times. `forcing` is the truth's own event forcing (it may differ from
/// the forcing handed to the assimilation experiments).
pub fn generate_truth(
    spec: &TruthSpec,
    geom: &RiverGeometry,
    forcing: &BoundaryForcing,
    initial: &HydroState,
    t_end: f64,
    save_every: f64,
    run_opts: RunOptions,
) -> Result<Truth> {
    for &t in &spec.extent_snapshot_times {
        if t < initial.time || t > t_end {
            return Err(Error::Config(format!(
                "extent snapshot time {t} outside event window [{}, {t_end}]",
                initial.time
            )));
        }
    }
    let (trajectory, _) = run_with_budget(
        initial,
        geom,
        forcing,
        &spec.true_control,
        t_end,
        save_every,
        run_opts,
    )?;
    let extent_masks = spec
        .extent_snapshot_times
        .iter()
        .map(|&t| {
            let s = nearest_state(&trajectory, t);
            flood_extent_mask(s, geom, spec.extent_threshold)
        })
        .collect();
    Ok(Truth {
        trajectory,
        extent_masks,
    })
}

/// Saved state closest in time to `t`.
pub fn nearest_state(trajectory: &[HydroState], t: f64) -> &HydroState {
    trajectory
        .iter()
        .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
        .expect("trajectory is never empty")
}

/// Synthesizes gauge observations on each station's sampling grid: truth
/// WSE plus N(0, sigma_synth), reported sigma = max(tau * |wse|, floor).
/// Each station draws from its own derived stream.
#[allow(clippy::too_many_arguments)]
pub fn synth_gauge_obs(
    trajectory: &[HydroState],
    geom: &RiverGeometry,
    stations: &[GaugeStation],
    window: (f64, f64),
    sigma_synth: f64,
    tau: f64,
    sigma_floor: f64,
    noise_seed: u64,
) -> Result<Vec<GaugeObservation>> {
    let (t0, t1) = window;
    let mut out = Vec::new();
    for (si, st) in stations.iter().enumerate() {
        // The relative error applies to the gauge reading, i.e. the stage
        // above the station's local datum (the bed), not the absolute WSE.
        let cell = ((st.x / geom.dx()).floor() as usize).min(geom.bed_elevation.len() - 1);
        let bed = geom.bed_elevation[cell];
        let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(noise_seed, si as u64));
        let mut k = 1u64;
        loop {
            let t = t0 + k as f64 * st.sampling_interval;
            if t > t1 + 1e-9 {
                break;
            }
            let truth_wse = h_gauge(trajectory, geom, st, &[t])?[0];
            let z: f64 = StandardNormal.sample(&mut rng);
            let wse = truth_wse + sigma_synth * z;
            out.push(GaugeObservation {
                station_id: st.id.clone(),
                time: t,
                wse,
                sigma: (tau * (wse - bed).abs()).max(sigma_floor),
            });
            k += 1;
        }
    }
    Ok(out)
}

/// Pixel class of the geometric pixel cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelClass {
    OpenWater,
    WaterNearLand,
    DarkWater,
    Land,
}

/// One synthetic pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPixel {
    /// Along-track abscissa, m.
    pub x: f64,
    /// Cross-track offset from the centerline, m.
    pub cross_offset: f64,
    /// Measured WSE, m. Land pixels carry no WSE (never generated here).
    pub wse: f64,
    pub class: PixelClass,
    /// Aggregation weight.
    pub weight: f64,
}

/// Scatters `pixels_per_node` pixels over every wet node segment whose
/// center falls inside `coverage`. Each pixel carries the WSE of its
/// containing cell plus N(0, sigma_pix). Pixels within one pixel spacing
/// of a wet/dry boundary are classed water-near-land.
pub fn synth_pixel_cloud(
    state: &HydroState,
    geom: &RiverGeometry,
    coverage: (f64, f64),
    pixels_per_node: usize,
    sigma_pix: f64,
    pixel_seed: u64,
) -> Result<Vec<SyntheticPixel>> {
    if pixels_per_node < 1 {
        return Err(Error::Argument("pixel density must be >= 1 per node".into()));
    }
    let (x_lo, x_hi) = coverage;
    if x_hi <= 0.0 || x_lo >= geom.length {
        return Err(Error::Argument(format!(
            "pass coverage [{x_lo}, {x_hi}] does not intersect the reach"
        )));
    }
    let dx = geom.dx();
    let cell_of = |x: f64| ((x / dx) as usize).min(geom.cell_count - 1);
    let wet = |i: usize| state.depth[i] > H_DRY;

    let spacing = NODE_SPACING / pixels_per_node as f64;
    let near_boundary = |x: f64| {
        let i = cell_of(x);
        let lo = cell_of((x - spacing).max(0.0));
        let hi = cell_of((x + spacing).min(geom.length - 1e-9));
        wet(i) != wet(lo) || wet(i) != wet(hi) || x < spacing || x > geom.length - spacing
    };

    let mut rng = ChaCha12Rng::seed_from_u64(pixel_seed);
    let n_nodes = (geom.length / NODE_SPACING).ceil() as usize;
    let mut cloud = Vec::new();
    for j in 0..n_nodes {
        let cx = (j as f64 + 0.5) * NODE_SPACING;
        if cx < x_lo || cx > x_hi || cx > geom.length {
            continue;
        }
        let (lo, hi) = node_span(j);
        let hi = hi.min(geom.length);
        if !wet(cell_of(cx)) {
            continue;
        }
        for _ in 0..pixels_per_node {
            let x = rng.gen_range(lo..hi);
            let i = cell_of(x);
            if !wet(i) {
                continue;
            }
            let half_width = 0.5 * geom.section[i].top_width(state.depth[i]);
            let cross_offset = rng.gen_range(-half_width..half_width);
            let z: f64 = StandardNormal.sample(&mut rng);
            let class = if near_boundary(x) {
                PixelClass::WaterNearLand
            } else {
                PixelClass::OpenWater
            };
            cloud.push(SyntheticPixel {
                x,
                cross_offset,
                wse: state.wse(geom, i) + sigma_pix * z,
                class,
                weight: 1.0,
            });
        }
    }
    Ok(cloud)
}

/// Relabels a contiguous along-track block of water pixels as dark water.
/// The block covers round(fraction * count) pixels in x order, starting at
/// a seeded random position.
pub fn apply_dark_water(
    cloud: &[SyntheticPixel],
    fraction: f64,
    seed_value: u64,
) -> Result<Vec<SyntheticPixel>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Argument(format!(
            "dark-water fraction must be in [0, 1], got {fraction}"
        )));
    }
    let mut out = cloud.to_vec();
    if fraction == 0.0 || out.is_empty() {
        return Ok(out);
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| out[a].x.total_cmp(&out[b].x));
    let k = (fraction * out.len() as f64).round() as usize;
    let k = k.min(out.len());
    let mut rng = ChaCha12Rng::seed_from_u64(seed_value);
    let start = if k == out.len() {
        0
    } else {
        rng.gen_range(0..=(out.len() - k))
    };
    for &idx in &order[start..start + k] {
        out[idx].class = PixelClass::DarkWater;
    }
    Ok(out)
}

/// Aggregates a pixel cloud to node observations: node WSE is the
/// weight-mean of open-water and water-near-land pixels (dark excluded),
/// node sigma = sigma_pix / sqrt(usable count) floored at 0.01 m. Nodes
/// with fewer than 3 usable pixels are flagged degraded; nodes with none
/// are omitted.
pub fn aggregate_nodes(
    cloud: &[SyntheticPixel],
    sigma_pix: f64,
    pass_id: u32,
    time: f64,
) -> Result<Vec<NodeObservation>> {
    if cloud.is_empty() {
        return Err(Error::Argument("cannot aggregate an empty pixel cloud".into()));
    }
    let n_nodes = cloud
        .iter()
        .map(|p| node_index(p.x))
        .max()
        .expect("nonempty cloud")
        + 1;
    // Pixels are grouped per node and summed in a canonical order so the
    // result is bitwise independent of the cloud's ordering.
    let mut groups: Vec<Vec<&SyntheticPixel>> = vec![Vec::new(); n_nodes];
    for p in cloud {
        if !matches!(p.class, PixelClass::OpenWater | PixelClass::WaterNearLand) {
            continue;
        }
        groups[node_index(p.x)].push(p);
    }
    let mut out = Vec::new();
    for (j, group) in groups.iter_mut().enumerate() {
        if group.is_empty() {
            continue;
        }
        group.sort_by(|a, b| {
            a.x.total_cmp(&b.x)
                .then(a.cross_offset.total_cmp(&b.cross_offset))
        });
        let sum: f64 = group.iter().map(|p| p.weight * p.wse).sum();
        let wsum: f64 = group.iter().map(|p| p.weight).sum();
        let count = group.len();
        let sigma = (sigma_pix / (count as f64).sqrt()).max(0.01);
        out.push(NodeObservation {
            pass_id,
            node_x: (j as f64 + 0.5) * NODE_SPACING,
            time,
            wse: sum / wsum,
            sigma,
            quality: if count < 3 {
                NodeQuality::Degraded
            } else {
                NodeQuality::Good
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::{h_swot, StationRole};
    use crate::river::{CrossSection, FrictionZone};

    fn geom(n: usize, length: f64) -> RiverGeometry {
        RiverGeometry::new(
            length,
            vec![0.0; n],
            vec![
                CrossSection {
                    main_width: 100.0,
                    bank_height: 4.0,
                    floodplain_width: 300.0,
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

    fn state(depths: Vec<f64>) -> HydroState {
        let n = depths.len();
        HydroState {
            time: 0.0,
            depth: depths,
            discharge: vec![0.0; n],
        }
    }

    #[test]
    fn dry_reach_gives_empty_cloud() {
        let g = geom(25, 5000.0);
        let s = state(vec![0.0; 25]);
        let cloud = synth_pixel_cloud(&s, &g, (0.0, 5000.0), 10, 0.5, 1).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn pixel_count_matches_density_when_fully_wet() {
        // 250 covered nodes at 100 pixels each: 25 000 water pixels.
        let n = 250;
        let g = geom(n, 50_000.0);
        let s = state(vec![2.0; n]);
        let cloud = synth_pixel_cloud(&s, &g, (0.0, 50_000.0), 100, 1.0, 7).unwrap();
        assert_eq!(cloud.len(), 25_000);
    }

    #[test]
    fn pixel_noise_std_recovered() {
        let n = 250;
        let g = geom(n, 50_000.0);
        let s = state(vec![2.0; n]);
        let sigma = 1.0;
        let cloud = synth_pixel_cloud(&s, &g, (0.0, 50_000.0), 100, sigma, 11).unwrap();
        let mean: f64 = cloud.iter().map(|p| p.wse - 2.0).sum::<f64>() / cloud.len() as f64;
        let var: f64 = cloud
            .iter()
            .map(|p| (p.wse - 2.0 - mean).powi(2))
            .sum::<f64>()
            / (cloud.len() as f64 - 1.0);
        assert!(
            (var.sqrt() - sigma).abs() < 0.05 * sigma,
            "std {} vs {}",
            var.sqrt(),
            sigma
        );
    }

    #[test]
    fn noise_free_pipeline_matches_node_operator_exactly() {
        // dx = node spacing, sigma_pix = 0, no dark water, full coverage.
        let n = 50;
        let g = geom(n, 10_000.0);
        let depths: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
        let s = state(depths);
        let cloud = synth_pixel_cloud(&s, &g, (0.0, 10_000.0), 20, 0.0, 3).unwrap();
        let nodes = aggregate_nodes(&cloud, 0.0, 391, 0.0).unwrap();
        let expected = h_swot(&[s], &g, (0.0, 10_000.0), 0.0).unwrap();
        assert_eq!(nodes.len(), expected.len());
        for (nd, &(cx, wse)) in nodes.iter().zip(&expected) {
            assert_eq!(nd.node_x, cx);
            assert!((nd.wse - wse).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregation_is_permutation_invariant_and_sigma_bounded() {
        let n = 50;
        let g = geom(n, 10_000.0);
        let s = state(vec![2.0; n]);
        let sigma = 0.8;
        let cloud = synth_pixel_cloud(&s, &g, (0.0, 10_000.0), 25, sigma, 5).unwrap();
        let nodes = aggregate_nodes(&cloud, sigma, 42, 0.0).unwrap();
        let mut shuffled = cloud.clone();
        shuffled.reverse();
        let nodes2 = aggregate_nodes(&shuffled, sigma, 42, 0.0).unwrap();
        assert_eq!(nodes, nodes2);
        for nd in &nodes {
            assert!(nd.sigma <= sigma + 1e-12);
            assert!(nd.sigma >= 0.01);
        }
    }

    #[test]
    fn hundred_pixels_meet_ten_cm_requirement() {
        // sigma_pix = 1.0 m and 100 usable pixels: node sigma = 0.1 m.
        let n = 50;
        let g = geom(n, 10_000.0);
        let s = state(vec![2.0; n]);
        let cloud = synth_pixel_cloud(&s, &g, (0.0, 10_000.0), 100, 1.0, 9).unwrap();
        let nodes = aggregate_nodes(&cloud, 1.0, 1, 0.0).unwrap();
        for nd in &nodes {
            assert!((nd.sigma - 0.1).abs() < 1e-12, "sigma {}", nd.sigma);
        }
    }

    #[test]
    fn dark_water_relabels_requested_fraction_in_one_block() {
        let n = 50;
        let g = geom(n, 10_000.0);
        let s = state(vec![2.0; n]);
        let cloud = synth_pixel_cloud(&s, &g, (0.0, 10_000.0), 20, 0.2, 13).unwrap();
        let total = cloud.len();

        let unchanged = apply_dark_water(&cloud, 0.0, 1).unwrap();
        assert_eq!(unchanged, cloud);

        let dark = apply_dark_water(&cloud, 0.3, 1).unwrap();
        let k = dark
            .iter()
            .filter(|p| p.class == PixelClass::DarkWater)
            .count();
        assert!((k as f64 - 0.3 * total as f64).abs() <= 1.0);
        // Dark pixels form one contiguous along-track run.
        let mut xs: Vec<f64> = dark
            .iter()
            .filter(|p| p.class == PixelClass::DarkWater)
            .map(|p| p.x)
            .collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let inside = dark.iter().filter(|p| p.x >= lo && p.x <= hi).count();
        assert_eq!(inside, k);

        let all_dark = apply_dark_water(&cloud, 1.0, 1).unwrap();
        assert!(all_dark.iter().all(|p| p.class == PixelClass::DarkWater));
        assert!(aggregate_nodes(&all_dark, 0.2, 1, 0.0).unwrap().is_empty());
    }

    #[test]
    fn gauge_synthesis_noise_free_is_exact_and_seeded() {
        let n = 25;
        let g = geom(n, 5000.0);
        let traj = vec![
            state(vec![2.0; n]),
            HydroState {
                time: 3600.0,
                depth: vec![2.5; n],
                discharge: vec![0.0; n],
            },
        ];
        let st = vec![GaugeStation {
            id: "TON".into(),
            x: 2500.0,
            zone_id: 1,
            role: StationRole::Assimilation,
            sampling_interval: 900.0,
        }];
        let clean =
            synth_gauge_obs(&traj, &g, &st, (0.0, 3600.0), 0.0, 0.15, 0.02, 5).unwrap();
        assert_eq!(clean.len(), 4);
        for ob in &clean {
            let truth = h_gauge(&traj, &g, &st[0], &[ob.time]).unwrap()[0];
            assert_eq!(ob.wse, truth);
            assert!((ob.sigma - 0.15 * truth).abs() < 1e-12);
        }
        let a = synth_gauge_obs(&traj, &g, &st, (0.0, 3600.0), 0.05, 0.15, 0.02, 5).unwrap();
        let b = synth_gauge_obs(&traj, &g, &st, (0.0, 3600.0), 0.05, 0.15, 0.02, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gauge_noise_std_recovered() {
        let n = 5;
        let g = geom(n, 1000.0);
        let traj = vec![
            state(vec![2.0; n]),
            HydroState {
                time: 1.0e7,
                depth: vec![2.0; n],
                discharge: vec![0.0; n],
            },
        ];
        let st = vec![GaugeStation {
            id: "S".into(),
            x: 500.0,
            zone_id: 1,
            role: StationRole::Assimilation,
            sampling_interval: 1000.0,
        }];
        let sigma = 0.02;
        let obs = synth_gauge_obs(&traj, &g, &st, (0.0, 1.0e7), sigma, 0.15, 0.001, 77).unwrap();
        assert!(obs.len() >= 9_999);
        let errs: Vec<f64> = obs.iter().map(|o| o.wse - 2.0).collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() as f64 - 1.0);
        assert!(
            (var.sqrt() - sigma).abs() < 0.05 * sigma,
            "std {} vs {}",
            var.sqrt(),
            sigma
        );
    }
}
