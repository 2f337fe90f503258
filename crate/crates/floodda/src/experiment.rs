//! Experiment orchestration: truth and observation synthesis, the OL /
//! IDA / SWDA / FDA reanalyses and revisit-frequency sweeps, scoring, and
//! output emission (CSV, JSON summary with a file manifest, SVG charts).
//!
//! Experiments are isolated: one failing run is recorded and skipped while
//! the others complete. All iteration orders and float formats are fixed,
//! so outputs are byte-identical for a given config and seed, regardless
//! of worker count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario};
use crate::enkf::{cycle_loop, station_series, CycleLoopConfig, CycleRecord, ObsKind};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{build_score_table, csi, profile_rmse, rmse, ScoreRow, ScoreTable};
use crate::obs::{
    build_pass_plan, h_swot, node_index, ObservationSet, PassPlanKind, ScheduledOverpass,
    StationRole,
};
use crate::osse::{
    aggregate_nodes, apply_dark_water, generate_truth, nearest_state, synth_gauge_obs,
    synth_pixel_cloud, Truth,
};
use crate::river::{flood_extent_mask, HydroState};
use crate::seed::{self, salt};

/// Identifies the code and inputs that produced a set of outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    /// SHA-256 of the materialized config TOML.
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
}

/// Model-vs-observation WSE profile at one overpass.
pub struct ProfileRecord {
    pub pass_id: u32,
    pub time: f64,
    /// (node_x, model_wse, observed_wse) matched at assimilable nodes.
    pub points: Vec<(f64, f64, f64)>,
}

/// Model WL series at one station.
pub struct StationSeries {
    pub id: String,
    pub times: Vec<f64>,
    pub model: Vec<f64>,
}

/// One completed experiment.
pub struct ExperimentResult {
    pub name: String,
    pub kind: ObsKind,
    pub cycles: Vec<CycleRecord>,
    pub trajectory: Vec<HydroState>,
    pub stations: Vec<StationSeries>,
    pub profiles: Vec<ProfileRecord>,
    pub score: ScoreRow,
}

/// Everything a run produced.
pub struct RunOutput {
    pub results: Vec<ExperimentResult>,
    pub score_table: ScoreTable,
    pub truth: Option<Truth>,
    pub observations: ObservationSet,
    pub provenance: Provenance,
    /// (experiment name, error message) for isolated failures.
    pub failures: Vec<(String, String)>,
    /// Every file written, relative to the output directory.
    pub manifest: Vec<String>,
}

/// Linear interpolation of a full state at time `t`.
fn interp_state(trajectory: &[HydroState], t: f64) -> Result<HydroState> {
    if trajectory.is_empty() {
        return Err(Error::Argument("empty trajectory".into()));
    }
    let t0 = trajectory[0].time;
    let t1 = trajectory[trajectory.len() - 1].time;
    let eps = 1e-6 * t1.abs().max(1.0);
    if t < t0 - eps || t > t1 + eps {
        return Err(Error::Domain(format!(
            "time {t} outside trajectory span [{t0}, {t1}]"
        )));
    }
    let t = t.clamp(t0, t1);
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
    let n = trajectory[lo].depth.len();
    let mut out = HydroState {
        time: t,
        depth: Vec::with_capacity(n),
        discharge: Vec::with_capacity(n),
    };
    for i in 0..n {
        out.depth
            .push(trajectory[lo].depth[i] * (1.0 - w) + trajectory[hi].depth[i] * w);
        out.discharge
            .push(trajectory[lo].discharge[i] * (1.0 - w) + trajectory[hi].discharge[i] * w);
    }
    Ok(out)
}

/// Synthesizes node observations for every overpass of a schedule from the
/// truth trajectory. Each overpass draws pixel and dark-water noise from
/// its own derived stream, so schedules never perturb each other.
pub fn synth_nodes_for_schedule(
    truth: &Truth,
    scenario: &Scenario,
    schedule: &[ScheduledOverpass],
    cfg: &ExperimentConfig,
    pixel_seed: u64,
    dark_seed: u64,
) -> Result<Vec<crate::obs::NodeObservation>> {
    let mut nodes = Vec::new();
    for (k, op) in schedule.iter().enumerate() {
        let state = interp_state(&truth.trajectory, op.time)?;
        let cloud = synth_pixel_cloud(
            &state,
            &scenario.geometry,
            (op.x_lo, op.x_hi),
            cfg.osse.pixels_per_node as usize,
            cfg.osse.pixel_sigma_m,
            seed::derive(pixel_seed, k as u64),
        )?;
        if cloud.is_empty() {
            continue;
        }
        let cloud = apply_dark_water(
            &cloud,
            cfg.osse.dark_water_fraction,
            seed::derive(dark_seed, k as u64),
        )?;
        nodes.extend(aggregate_nodes(
            &cloud,
            cfg.osse.pixel_sigma_m,
            op.pass_id,
            op.time,
        )?);
    }
    Ok(nodes)
}

/// Generates the truth run and the full synthetic observation set of the
/// configured OSSE scenario (shared by every experiment in the run).
pub fn synthesize(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    master_seed: u64,
) -> Result<(Truth, ObservationSet, Vec<ScheduledOverpass>)> {
    let window = (cfg.experiments.t_start_s, cfg.experiments.t_end_s);
    let truth = generate_truth(
        &scenario.truth_spec,
        &scenario.geometry,
        &scenario.truth_forcing,
        &scenario.initial_state,
        window.1,
        cfg.enkf.traj_save_s,
        scenario.run_opts,
    )?;
    let gauges = synth_gauge_obs(
        &truth.trajectory,
        &scenario.geometry,
        &scenario.stations,
        window,
        cfg.osse.gauge_sigma_synth_m,
        cfg.enkf.tau,
        cfg.enkf.gauge_sigma_floor_m,
        seed::derive(master_seed, salt::GAUGE_NOISE),
    )?;
    let schedule = build_pass_plan(
        scenario.plan,
        window,
        &scenario.passes,
        scenario.geometry.length,
    )?;
    let nodes = synth_nodes_for_schedule(
        &truth,
        scenario,
        &schedule,
        cfg,
        seed::derive(master_seed, salt::PIXEL_NOISE),
        seed::derive(master_seed, salt::DARK_WATER),
    )?;
    let obs = ObservationSet {
        gauges,
        nodes,
        window,
    };
    obs.validate()?;
    Ok((truth, obs, schedule))
}

fn experiment_kind(name: &str) -> ObsKind {
    match name {
        "IDA" => ObsKind::Gauges,
        "SWDA" => ObsKind::Nodes,
        "FDA" => ObsKind::Both,
        _ => ObsKind::None,
    }
}

fn experiment_salt(name: &str) -> u64 {
    match name {
        "IDA" => salt::EXP_IDA,
        "SWDA" => salt::EXP_SWDA,
        "FDA" => salt::EXP_FDA,
        _ => 0,
    }
}

fn hours_label(dt_s: f64) -> String {
    let h = dt_s / 3600.0;
    if (h.fract()).abs() < 1e-9 {
        format!("{}h", h as i64)
    } else {
        format!("{h:.1}h")
    }
}

/// Runs one reanalysis over the event.
fn run_one(
    name: &str,
    kind: ObsKind,
    exp_seed: u64,
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    obs: &ObservationSet,
) -> Result<crate::enkf::ReanalysisRun> {
    let loop_cfg = CycleLoopConfig {
        geometry: &scenario.geometry,
        forcing: &scenario.forcing,
        prior: &scenario.prior,
        stations: &scenario.stations,
        obs,
        kind,
        members: cfg.enkf.members as usize,
        window_s: cfg.enkf.window_s,
        t_start: cfg.experiments.t_start_s,
        t_end: cfg.experiments.t_end_s,
        seed: exp_seed,
        opts: scenario.enkf_opts,
        run_opts: scenario.run_opts,
        traj_save_s: cfg.enkf.traj_save_s,
        report_save_s: cfg.enkf.report_save_s,
        initial_state: &scenario.initial_state,
    };
    cycle_loop(&loop_cfg).map_err(|e| Error::Experiment {
        experiment: name.to_string(),
        source: Box::new(e),
    })
}

/// Sampling instants of one station over the event window.
fn station_times(t0: f64, t1: f64, interval: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1u64;
    loop {
        let t = t0 + k as f64 * interval;
        if t > t1 + 1e-9 {
            break;
        }
        out.push(t);
        k += 1;
    }
    out
}

/// Scores one reanalysis trajectory: station RMSE against the truth WLs
/// (or, without a truth, against the gauge observations), CSI against the
/// truth extent masks, and profile RMSE against the node observations at
/// the base-plan overpasses.
fn score_experiment(
    name: &str,
    trajectory: &[HydroState],
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    truth: Option<&Truth>,
    obs: &ObservationSet,
    base_schedule: &[ScheduledOverpass],
) -> Result<(ScoreRow, Vec<StationSeries>, Vec<ProfileRecord>)> {
    let (t0, t1) = (cfg.experiments.t_start_s, cfg.experiments.t_end_s);
    let geom = &scenario.geometry;

    let mut station_rmse = Vec::new();
    let mut series = Vec::new();
    for st in &scenario.stations {
        let times = station_times(t0, t1, st.sampling_interval);
        let model = station_series(trajectory, geom, st.x, &times)?;
        let reference: Vec<f64> = match truth {
            Some(tr) => station_series(&tr.trajectory, geom, st.x, &times)?,
            None => {
                // Score against the observed WLs at matching instants.
                let mut r = Vec::with_capacity(times.len());
                for &t in &times {
                    let hit = obs
                        .gauges
                        .iter()
                        .find(|g| g.station_id == st.id && (g.time - t).abs() < 1.0);
                    r.push(hit.map(|g| g.wse).unwrap_or(f64::NAN));
                }
                r
            }
        };
        let pairs: Vec<(f64, f64)> = model
            .iter()
            .zip(&reference)
            .filter(|(_, r)| r.is_finite())
            .map(|(&m, &r)| (m, r))
            .collect();
        if pairs.is_empty() {
            return Err(Error::Argument(format!(
                "experiment {name}: no reference WLs at station {}",
                st.id
            )));
        }
        let m: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let r: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        station_rmse.push(rmse(&m, &r)?);
        series.push(StationSeries {
            id: st.id.clone(),
            times,
            model,
        });
    }

    let mut snapshot_csi = Vec::new();
    if let Some(tr) = truth {
        for (k, &t) in cfg.osse.snapshot_times_s.iter().enumerate() {
            let model_mask = flood_extent_mask(
                nearest_state(trajectory, t),
                geom,
                cfg.osse.extent_threshold_m,
            );
            snapshot_csi.push(csi(&model_mask, &tr.extent_masks[k])?);
        }
    }

    let mut profiles = Vec::new();
    let mut prof_rmse = Vec::new();
    if !obs.nodes.is_empty() {
        for op in base_schedule {
            let model = h_swot(trajectory, geom, (op.x_lo, op.x_hi), op.time)?;
            let mut points = Vec::new();
            for &(cx, m) in &model {
                let hit = obs.nodes.iter().find(|nd| {
                    nd.pass_id == op.pass_id
                        && (nd.time - op.time).abs() < 1.0
                        && node_index(nd.node_x) == node_index(cx)
                        && nd.quality != crate::obs::NodeQuality::Dark
                });
                if let Some(nd) = hit {
                    points.push((cx, m, nd.wse));
                }
            }
            if points.is_empty() {
                continue;
            }
            let pairs: Vec<(f64, f64)> = points.iter().map(|&(_, m, o)| (m, o)).collect();
            prof_rmse.push(profile_rmse(&pairs)?);
            profiles.push(ProfileRecord {
                pass_id: op.pass_id,
                time: op.time,
                points,
            });
        }
    }

    Ok((
        ScoreRow {
            experiment: name.to_string(),
            station_rmse,
            snapshot_csi,
            profile_rmse: prof_rmse,
        },
        series,
        profiles,
    ))
}

/// Checks the output directory is usable before any compute happens.
fn prepare_out_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| {
        Error::Config(format!(
            "output directory {} is not writable: {e}",
            out_dir.display()
        ))
    })?;
    let probe = out_dir.join(".write_probe");
    fs::write(&probe, b"ok").map_err(|e| {
        Error::Config(format!(
            "output directory {} is not writable: {e}",
            out_dir.display()
        ))
    })?;
    fs::remove_file(&probe)?;
    Ok(())
}

/// Runs the configured experiments end to end and writes all outputs.
/// Per-experiment failures are isolated and reported in the result.
pub fn run_experiments(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunOutput> {
    prepare_out_dir(out_dir)?;

    let mut cfg = cfg.clone();
    if let Some(s) = seed_override {
        cfg.enkf.seed = Some(s);
    }
    cfg.materialize()?;
    cfg.validate()?;
    let master_seed = cfg.enkf.seed.expect("validated");
    let scenario = cfg.build()?;
    let window = (cfg.experiments.t_start_s, cfg.experiments.t_end_s);

    // Observations: synthesized from the truth (osse) or read from files.
    let (truth, observations, base_schedule) = if cfg.mode == "osse" {
        let (t, o, s) = synthesize(&cfg, &scenario, master_seed)?;
        (Some(t), o, s)
    } else {
        let gauges = match &cfg.observations.gauges_csv {
            Some(p) => io::read_gauge_obs_csv(p)?,
            None => vec![],
        };
        let nodes = match &cfg.observations.nodes_csv {
            Some(p) => io::read_node_obs_csv(p)?,
            None => vec![],
        };
        let obs = ObservationSet {
            gauges,
            nodes,
            window,
        };
        obs.validate()?;
        let schedule = build_pass_plan(
            scenario.plan,
            window,
            &scenario.passes,
            scenario.geometry.length,
        )?;
        (None, obs, schedule)
    };

    let mut results = Vec::new();
    let mut failures = Vec::new();
    // Experiments are always scored against the shared base-plan
    // observation set so every row has the same columns, even when the
    // run itself assimilated a different (sweep) schedule.
    let score_obs = observations.clone();
    let mut run = |name: String, kind: ObsKind, exp_seed: u64, obs: &ObservationSet| {
        match run_one(&name, kind, exp_seed, &cfg, &scenario, obs).and_then(|r| {
            let (score, stations, profiles) = score_experiment(
                &name,
                &r.trajectory,
                &cfg,
                &scenario,
                truth.as_ref(),
                &score_obs,
                &base_schedule,
            )?;
            Ok(ExperimentResult {
                name: name.clone(),
                kind,
                cycles: r.cycles,
                trajectory: r.trajectory,
                stations,
                profiles,
                score,
            })
        }) {
            Ok(res) => results.push(res),
            Err(e) => {
                eprintln!("experiment {name} failed: {e}");
                failures.push((name, e.to_string()));
            }
        }
    };

    for name in &cfg.experiments.set {
        let kind = experiment_kind(name);
        let exp_seed = seed::derive(master_seed, experiment_salt(name));
        run(name.clone(), kind, exp_seed, &observations);
    }

    // Revisit-frequency sweep: extra SWDA runs on fixed-interval plans.
    if cfg.mode == "osse" && !cfg.experiments.revisit_sweep_s.is_empty() {
        let truth_ref = truth.as_ref().expect("osse mode has a truth");
        for (i, &dt) in cfg.experiments.revisit_sweep_s.iter().enumerate() {
            let name = format!("SWDA_{}", hours_label(dt));
            let schedule = build_pass_plan(
                PassPlanKind::FixedInterval(dt),
                window,
                &scenario.passes,
                scenario.geometry.length,
            )?;
            let nodes = synth_nodes_for_schedule(
                truth_ref,
                &scenario,
                &schedule,
                &cfg,
                seed::derive(seed::derive(master_seed, salt::PIXEL_NOISE), 1_000 + i as u64),
                seed::derive(seed::derive(master_seed, salt::DARK_WATER), 1_000 + i as u64),
            )?;
            let sweep_obs = ObservationSet {
                gauges: vec![],
                nodes,
                window,
            };
            let exp_seed = seed::derive(master_seed, salt::EXP_SWEEP + i as u64);
            run(name, ObsKind::Nodes, exp_seed, &sweep_obs);
        }
    }

    let station_names: Vec<String> = scenario.stations.iter().map(|s| s.id.clone()).collect();
    let validation: Vec<bool> = scenario
        .stations
        .iter()
        .map(|s| s.role == StationRole::Validation)
        .collect();
    let snapshot_times = if truth.is_some() {
        cfg.osse.snapshot_times_s.clone()
    } else {
        vec![]
    };
    let pass_labels: Vec<String> = if observations.nodes.is_empty() {
        vec![]
    } else {
        base_schedule
            .iter()
            .map(|op| format!("{}at{:.1}d", op.pass_id, op.time / 86_400.0))
            .collect()
    };
    let score_table = build_score_table(
        station_names,
        validation,
        snapshot_times,
        pass_labels,
        results.iter().map(|r| r.score.clone()).collect(),
    )?;

    let provenance = Provenance {
        config_hash: cfg.content_hash()?,
        seed: master_seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    };

    let mut out = RunOutput {
        results,
        score_table,
        truth,
        observations,
        provenance,
        failures,
        manifest: Vec::new(),
    };
    out.manifest = emit_outputs(&out, &cfg, &scenario, out_dir)?;

    Ok(out)
}

/// Writes every output artifact and returns the manifest (paths relative
/// to `out_dir`, in the order written).
pub fn emit_outputs(
    out: &RunOutput,
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    out_dir: &Path,
) -> Result<Vec<String>> {
    let mut manifest: Vec<String> = Vec::new();
    let track = |manifest: &mut Vec<String>, name: &str| -> PathBuf {
        manifest.push(name.to_string());
        out_dir.join(name)
    };

    fs::write(
        track(&mut manifest, "config_echo.toml"),
        cfg.to_toml_string()?,
    )?;

    let geom = &scenario.geometry;
    let report_dt = cfg.enkf.report_save_s;
    let t0 = cfg.experiments.t_start_s;

    if let Some(truth) = &out.truth {
        // Truth trajectory thinned to the report cadence.
        let thinned: Vec<HydroState> = truth
            .trajectory
            .iter()
            .filter(|s| ((s.time - t0) / report_dt).fract().abs() < 1e-9)
            .cloned()
            .collect();
        io::write_trajectory_csv(track(&mut manifest, "truth_trajectory.csv").as_path(), &thinned)?;

        // Truth WLs at every station on its sampling grid.
        let mut s = String::from("station_id,time_s,wse_m\n");
        for st in &scenario.stations {
            let times = station_times(t0, cfg.experiments.t_end_s, st.sampling_interval);
            let wls = station_series(&truth.trajectory, geom, st.x, &times)?;
            for (t, w) in times.iter().zip(&wls) {
                s.push_str(&format!("{},{t:.3},{w:.6}\n", st.id));
            }
        }
        fs::write(track(&mut manifest, "truth_wls.csv"), s)?;

        // Truth extent masks.
        let mut s = String::from("snapshot_time_s,cell,channel_wet,floodplain_wet\n");
        for (k, &t) in cfg.osse.snapshot_times_s.iter().enumerate() {
            let m = &truth.extent_masks[k];
            for i in 0..m.channel.len() {
                s.push_str(&format!(
                    "{t:.3},{i},{},{}\n",
                    u8::from(m.channel[i]),
                    u8::from(m.floodplain[i])
                ));
            }
        }
        fs::write(track(&mut manifest, "truth_extent_masks.csv"), s)?;
    }

    io::write_gauge_obs_csv(
        track(&mut manifest, "obs_gauges.csv").as_path(),
        &out.observations.gauges,
    )?;
    io::write_node_obs_csv(
        track(&mut manifest, "obs_nodes.csv").as_path(),
        &out.observations.nodes,
    )?;

    for r in &out.results {
        let base = r.name.to_lowercase();
        io::write_controls_csv(
            track(&mut manifest, &format!("{base}_controls.csv")).as_path(),
            &r.cycles,
            geom.zones.len(),
        )?;
        io::write_diagnostics_jsonl(
            track(&mut manifest, &format!("{base}_diagnostics.jsonl")).as_path(),
            &r.cycles,
        )?;

        // Station WLs: one time column per station block (long format).
        let mut s = String::from("station_id,time_s,wse_m\n");
        for st in &r.stations {
            for (t, w) in st.times.iter().zip(&st.model) {
                s.push_str(&format!("{},{t:.3},{w:.6}\n", st.id));
            }
        }
        fs::write(track(&mut manifest, &format!("{base}_wls.csv")), s)?;

        let mut s = String::from("pass_id,time_s,node_x_m,model_wse_m,obs_wse_m\n");
        for p in &r.profiles {
            for &(x, m, o) in &p.points {
                s.push_str(&format!(
                    "{},{:.3},{x:.3},{m:.6},{o:.6}\n",
                    p.pass_id, p.time
                ));
            }
        }
        fs::write(track(&mut manifest, &format!("{base}_profiles.csv")), s)?;
    }

    fs::write(
        track(&mut manifest, "scores.csv"),
        out.score_table.to_csv_string(),
    )?;
    fs::write(track(&mut manifest, "scores.txt"), out.score_table.to_text())?;

    emit_charts(out, cfg, scenario, out_dir, &mut manifest)?;

    // Summary last, listing itself and everything else.
    manifest.push("summary.json".to_string());
    let summary = serde_json::json!({
        "mode": cfg.mode,
        "provenance": out.provenance,
        "experiments": out.results.iter().map(|r| &r.name).collect::<Vec<_>>(),
        "failures": out.failures.iter().map(|(n, e)| {
            serde_json::json!({"experiment": n, "error": e})
        }).collect::<Vec<_>>(),
        "score_table": out.score_table,
        "files": manifest,
    });
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(manifest)
}

fn emit_charts(
    out: &RunOutput,
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    out_dir: &Path,
    manifest: &mut Vec<String>,
) -> Result<()> {
    let geom = &scenario.geometry;
    let day = 86_400.0;

    // Station WL charts: truth, every experiment, observation markers.
    for (si, st) in scenario.stations.iter().enumerate() {
        let mut series = Vec::new();
        if let Some(truth) = &out.truth {
            let times = station_times(
                cfg.experiments.t_start_s,
                cfg.experiments.t_end_s,
                cfg.enkf.report_save_s,
            );
            let wls = station_series(&truth.trajectory, geom, st.x, &times)?;
            series.push(io::Series {
                label: "truth".into(),
                color: "#000000".into(),
                points: times.iter().zip(&wls).map(|(&t, &w)| (t / day, w)).collect(),
                markers: false,
            });
        }
        for (ri, r) in out.results.iter().enumerate() {
            let ss = &r.stations[si];
            series.push(io::Series {
                label: r.name.clone(),
                color: io::palette(ri),
                points: ss
                    .times
                    .iter()
                    .zip(&ss.model)
                    .map(|(&t, &w)| (t / day, w))
                    .collect(),
                markers: false,
            });
        }
        let obs_pts: Vec<(f64, f64)> = out
            .observations
            .gauges
            .iter()
            .filter(|g| g.station_id == st.id)
            .map(|g| (g.time / day, g.wse))
            .collect();
        if !obs_pts.is_empty() {
            series.push(io::Series {
                label: "observed".into(),
                color: "#888888".into(),
                points: obs_pts,
                markers: true,
            });
        }
        let name = format!("station_{}.svg", st.id.to_lowercase());
        let title = format!("Water level at {} (x = {:.1} km)", st.id, st.x / 1000.0);
        fs::write(
            out_dir.join(&name),
            io::svg_line_chart(&title, "time (days)", "WSE (m)", &series),
        )?;
        manifest.push(name);
    }

    // Control trajectory charts: one per component, truth overlaid.
    if let Some(first) = out.results.iter().find(|r| !r.cycles.is_empty()) {
        let ks_len = first.cycles[0].analyzed.ks.len();
        let labels = io::control_labels(ks_len, geom.zones.len());
        let truth_vec = out
            .truth
            .as_ref()
            .map(|_| scenario.truth_spec.true_control.to_vec());
        for (ci, label) in labels.iter().enumerate() {
            let mut series = Vec::new();
            if let Some(tv) = &truth_vec {
                if tv.len() == labels.len() {
                    let (t0, t1) = (
                        cfg.experiments.t_start_s / day,
                        cfg.experiments.t_end_s / day,
                    );
                    series.push(io::Series {
                        label: "truth".into(),
                        color: "#000000".into(),
                        points: vec![(t0, tv[ci]), (t1, tv[ci])],
                        markers: false,
                    });
                }
            }
            for (ri, r) in out.results.iter().enumerate() {
                if r.kind == ObsKind::None {
                    continue;
                }
                series.push(io::Series {
                    label: r.name.clone(),
                    color: io::palette(ri),
                    points: r
                        .cycles
                        .iter()
                        .map(|c| (c.t_end / day, c.analyzed.to_vec()[ci]))
                        .collect(),
                    markers: false,
                });
            }
            let name = format!("control_{label}.svg");
            let title = format!("Analyzed {label} over the event");
            fs::write(
                out_dir.join(&name),
                io::svg_line_chart(&title, "time (days)", label, &series),
            )?;
            manifest.push(name);
        }
    }

    // Profile charts: for each pass id, the overpass nearest the flood peak.
    let mut pass_ids: Vec<u32> = out
        .results
        .iter()
        .flat_map(|r| r.profiles.iter().map(|p| p.pass_id))
        .collect();
    pass_ids.sort_unstable();
    pass_ids.dedup();
    for pid in pass_ids {
        let peak = scenario.truth_spec.flood_peak_time;
        let Some(best_time) = out
            .results
            .iter()
            .flat_map(|r| r.profiles.iter())
            .filter(|p| p.pass_id == pid)
            .map(|p| p.time)
            .min_by(|a, b| (a - peak).abs().total_cmp(&(b - peak).abs()))
        else {
            continue;
        };
        let mut series = Vec::new();
        let mut obs_added = false;
        for (ri, r) in out.results.iter().enumerate() {
            let Some(p) = r
                .profiles
                .iter()
                .find(|p| p.pass_id == pid && (p.time - best_time).abs() < 1.0)
            else {
                continue;
            };
            if !obs_added {
                series.push(io::Series {
                    label: "observed nodes".into(),
                    color: "#888888".into(),
                    points: p.points.iter().map(|&(x, _, o)| (x / 1000.0, o)).collect(),
                    markers: true,
                });
                obs_added = true;
            }
            series.push(io::Series {
                label: r.name.clone(),
                color: io::palette(ri),
                points: p.points.iter().map(|&(x, m, _)| (x / 1000.0, m)).collect(),
                markers: false,
            });
        }
        if series.is_empty() {
            continue;
        }
        let name = format!("profile_pass{pid}.svg");
        let title = format!(
            "WSE profile, pass {pid} at day {:.1}",
            best_time / 86_400.0
        );
        fs::write(
            out_dir.join(&name),
            io::svg_line_chart(&title, "distance (km)", "WSE (m)", &series),
        )?;
        manifest.push(name);
    }
    Ok(())
}

/// Recomputes the station-RMSE score table from previously emitted outputs
/// (`truth_wls.csv` plus each `<experiment>_wls.csv`) and rewrites
/// `scores.csv` / `scores.txt`.
pub fn rescore_outputs(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ScoreTable> {
    let truth_path = out_dir.join("truth_wls.csv");
    if !truth_path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run the osse command first",
            truth_path.display()
        )));
    }
    let read_wls = |path: &Path| -> Result<Vec<(String, f64, f64)>> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push((
                rec[0].to_string(),
                rec[1].parse::<f64>().map_err(|e| Error::Argument(e.to_string()))?,
                rec[2].parse::<f64>().map_err(|e| Error::Argument(e.to_string()))?,
            ));
        }
        Ok(rows)
    };
    let truth_rows = read_wls(&truth_path)?;

    let station_names: Vec<String> = cfg.stations.iter().map(|s| s.id.clone()).collect();
    let validation: Vec<bool> = cfg
        .stations
        .iter()
        .map(|s| s.role == StationRole::Validation)
        .collect();

    let mut rows = Vec::new();
    let mut names: Vec<String> = cfg.experiments.set.clone();
    for &dt in &cfg.experiments.revisit_sweep_s {
        names.push(format!("SWDA_{}", hours_label(dt)));
    }
    for name in names {
        let path = out_dir.join(format!("{}_wls.csv", name.to_lowercase()));
        if !path.exists() {
            continue;
        }
        let model_rows = read_wls(&path)?;
        let mut station_rmse = Vec::new();
        for id in &station_names {
            let model: Vec<f64> = model_rows
                .iter()
                .filter(|(s, _, _)| s == id)
                .map(|&(_, _, w)| w)
                .collect();
            let truth: Vec<f64> = truth_rows
                .iter()
                .filter(|(s, _, _)| s == id)
                .map(|&(_, _, w)| w)
                .collect();
            station_rmse.push(rmse(&model, &truth)?);
        }
        rows.push(ScoreRow {
            experiment: name,
            station_rmse,
            snapshot_csi: vec![],
            profile_rmse: vec![],
        });
    }
    let table = build_score_table(station_names, validation, vec![], vec![], rows)?;
    fs::write(out_dir.join("scores.csv"), table.to_csv_string())?;
    fs::write(out_dir.join("scores.txt"), table.to_text())?;
    Ok(table)
}
