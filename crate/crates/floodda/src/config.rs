//! TOML experiment configuration: strict parsing (unknown keys rejected),
//! default materialization so the echoed config is complete, and
//! construction of the runtime scenario objects.
//!
//! Seeds are always explicit; nothing is derived from the wall clock.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ComponentPrior, ControlVector, PriorSpec};
use crate::enkf::EnkfOptions;
use crate::error::{Error, Result};
use crate::io;
use crate::obs::{GaugeStation, PassPlanKind, StationRole, SwathPass};
use crate::osse::TruthSpec;
use crate::river::{
    steady_uniform_depth, BoundaryForcing, CrossSection, FrictionZone, HydroState, RatingCurve,
    RiverGeometry, RunOptions,
};

const DAY: f64 = 86_400.0;

/// Reach discretization and hydraulic geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub length_m: f64,
    pub cell_count: i64,
    pub bed_slope: f64,
    /// Bed elevation at the downstream end, m above datum.
    pub bed_datum_m: f64,
    pub main_width_m: f64,
    pub bank_height_m: f64,
    pub floodplain_width_m: f64,
    /// Interior riverbed-zone boundaries as fractions of the reach length,
    /// strictly increasing in (0, 1). N boundaries define N+1 zones.
    pub zone_boundaries_frac: Vec<f64>,
    pub floodplain_ks: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            length_m: 50_000.0,
            cell_count: 250,
            bed_slope: 4.0e-4,
            bed_datum_m: 0.0,
            main_width_m: 150.0,
            bank_height_m: 4.0,
            floodplain_width_m: 400.0,
            zone_boundaries_frac: vec![0.15, 0.35, 0.44, 0.60, 0.85],
            floodplain_ks: 10.0,
        }
    }
}

impl GeometryConfig {
    pub fn zone_count(&self) -> usize {
        self.zone_boundaries_frac.len() + 1
    }
}

/// Upstream hydrograph and downstream rating curve. When neither inline
/// points nor a CSV path are given, a synthetic single-peak flood event and
/// a Manning-consistent rating table are generated and echoed back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hydrograph_csv: Option<PathBuf>,
    /// Inline (time_s, discharge_m3s) points; takes precedence over the CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hydrograph: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rating_curve_csv: Option<PathBuf>,
    /// Inline (discharge_m3s, wse_m) points; takes precedence over the CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rating_curve: Option<Vec<(f64, f64)>>,
    pub base_flow_m3s: f64,
    pub peak_flow_m3s: f64,
    pub peak_time_s: f64,
    pub rise_duration_s: f64,
    pub fall_duration_s: f64,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig {
            hydrograph_csv: None,
            hydrograph: None,
            rating_curve_csv: None,
            rating_curve: None,
            base_flow_m3s: 400.0,
            peak_flow_m3s: 2_000.0,
            peak_time_s: 20.0 * DAY,
            rise_duration_s: 6.0 * DAY,
            fall_duration_s: 8.0 * DAY,
        }
    }
}

/// One gauge station, located by reach fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    pub id: String,
    pub x_frac: f64,
    /// 1-based riverbed zone expected to contain the station (checked).
    pub zone_id: usize,
    pub role: StationRole,
    pub sampling_interval_s: f64,
}

fn default_stations() -> Vec<StationConfig> {
    let mk = |id: &str, x_frac: f64, zone_id: usize, role: StationRole, dt: f64| StationConfig {
        id: id.to_string(),
        x_frac,
        zone_id,
        role,
        sampling_interval_s: dt,
    };
    vec![
        mk("TON", 0.02, 1, StationRole::Assimilation, 900.0),
        mk("LMA", 0.25, 2, StationRole::Assimilation, 3600.0),
        mk("MD0", 0.45, 4, StationRole::Assimilation, 900.0),
        mk("MD1", 0.50, 4, StationRole::Validation, 3600.0),
        mk("COU", 0.70, 5, StationRole::Assimilation, 3600.0),
        mk("LR1", 0.93, 6, StationRole::Validation, 3600.0),
        mk("LR0", 0.97, 6, StationRole::Assimilation, 900.0),
    ]
}

/// One swath pass's along-reach coverage, as reach fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassConfig {
    pub pass_id: u32,
    pub x_lo_frac: f64,
    pub x_hi_frac: f64,
}

fn default_passes() -> Vec<PassConfig> {
    vec![
        PassConfig {
            pass_id: 42,
            x_lo_frac: 0.30,
            x_hi_frac: 1.0,
        },
        PassConfig {
            pass_id: 113,
            x_lo_frac: 0.0,
            x_hi_frac: 0.60,
        },
        PassConfig {
            pass_id: 391,
            x_lo_frac: 0.0,
            x_hi_frac: 1.0,
        },
    ]
}

/// Control-vector priors. The riverbed prior applies to every riverbed
/// zone; when `include_floodplain` is set the floodplain coefficient is
/// estimated too (as ks_0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub include_floodplain: bool,
    pub riverbed: ComponentPrior,
    pub floodplain: ComponentPrior,
    pub mu: ComponentPrior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            include_floodplain: true,
            riverbed: ComponentPrior {
                default: 40.0,
                sd: 5.0,
                lower: 10.0,
                upper: 80.0,
            },
            floodplain: ComponentPrior {
                default: 10.0,
                sd: 3.0,
                lower: 2.0,
                upper: 40.0,
            },
            mu: ComponentPrior {
                default: 1.0,
                sd: 0.1,
                lower: 0.5,
                upper: 1.5,
            },
        }
    }
}

/// Filter and integration settings. The seed has no default on purpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnkfConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub members: i64,
    pub window_s: f64,
    pub inflation: f64,
    pub perturb_obs: bool,
    pub gauge_sigma_floor_m: f64,
    pub node_sigma_floor_m: f64,
    /// Relative gauge observation error (sigma = tau * |WL|).
    pub tau: f64,
    /// Between-cycle re-perturbation spread for the friction
    /// coefficients, as a fraction of the prior sd.
    pub reperturb_frac: f64,
    /// Between-cycle re-perturbation spread for the inflow multiplier.
    pub reperturb_frac_mu: f64,
    /// Between-cycle re-perturbation spread for the floodplain coefficient
    /// (only used when the floodplain is estimated).
    pub reperturb_frac_floodplain: f64,
    pub traj_save_s: f64,
    pub report_save_s: f64,
    pub courant: f64,
    pub dt_max_s: f64,
}

impl Default for EnkfConfig {
    fn default() -> Self {
        EnkfConfig {
            seed: None,
            members: 50,
            window_s: 21_600.0,
            inflation: 1.0,
            perturb_obs: true,
            gauge_sigma_floor_m: 0.02,
            node_sigma_floor_m: 0.10,
            tau: 0.15,
            reperturb_frac: 0.2,
            reperturb_frac_mu: 1.0,
            reperturb_frac_floodplain: 1.0,
            traj_save_s: 900.0,
            report_save_s: 3600.0,
            courant: 0.5,
            dt_max_s: 600.0,
        }
    }
}

/// Twin-experiment (synthetic truth) settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OsseConfig {
    /// Riverbed truth = prior default + offset, one entry per zone.
    pub truth_ks_offsets: Vec<f64>,
    pub truth_floodplain_ks: f64,
    /// Peak value of the truth inflow scaling; ramps 1 -> peak -> 1 over
    /// the event, so the effective inflow error is largest at flood peak.
    pub truth_mu_peak: f64,
    pub gauge_sigma_synth_m: f64,
    pub pixel_sigma_m: f64,
    pub pixels_per_node: i64,
    pub dark_water_fraction: f64,
    pub snapshot_times_s: Vec<f64>,
    pub extent_threshold_m: f64,
}

impl Default for OsseConfig {
    fn default() -> Self {
        OsseConfig {
            truth_ks_offsets: vec![8.0, -6.0, 5.0, -7.0, 6.0, -5.0],
            truth_floodplain_ks: 14.0,
            truth_mu_peak: 1.15,
            gauge_sigma_synth_m: 0.02,
            pixel_sigma_m: 1.0,
            pixels_per_node: 100,
            dark_water_fraction: 0.0,
            snapshot_times_s: vec![17.0 * DAY, 19.0 * DAY, 20.0 * DAY, 23.0 * DAY],
            extent_threshold_m: 0.0,
        }
    }
}

/// External observation files (assimilate mode).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauges_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_csv: Option<PathBuf>,
}

/// Which experiments to run and over what event window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentsConfig {
    /// Subset of OL, IDA, SWDA, FDA.
    pub set: Vec<String>,
    /// Extra SWDA runs with fixed-interval pass plans at these revisit
    /// intervals, s.
    pub revisit_sweep_s: Vec<f64>,
    pub t_start_s: f64,
    pub t_end_s: f64,
}

impl Default for ExperimentsConfig {
    fn default() -> Self {
        ExperimentsConfig {
            set: vec!["OL".into(), "IDA".into(), "SWDA".into(), "FDA".into()],
            revisit_sweep_s: vec![],
            t_start_s: 0.0,
            t_end_s: 30.0 * DAY,
        }
    }
}

fn default_plan() -> PassPlanKind {
    PassPlanKind::Tripled
}

/// The full experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// "osse" (twin experiment with synthetic truth) or "assimilate"
    /// (observations read from the configured CSV files).
    pub mode: String,
    pub geometry: GeometryConfig,
    pub forcing: ForcingConfig,
    pub stations: Vec<StationConfig>,
    pub passes: Vec<PassConfig>,
    pub plan: PassPlanKind,
    pub prior: PriorConfig,
    pub enkf: EnkfConfig,
    pub osse: OsseConfig,
    pub observations: ObservationsConfig,
    pub experiments: ExperimentsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: "osse".into(),
            geometry: GeometryConfig::default(),
            forcing: ForcingConfig::default(),
            stations: default_stations(),
            passes: default_passes(),
            plan: default_plan(),
            prior: PriorConfig::default(),
            enkf: EnkfConfig::default(),
            osse: OsseConfig::default(),
            observations: ObservationsConfig::default(),
            experiments: ExperimentsConfig::default(),
        }
    }
}

/// Parses, materializes and validates a TOML configuration file.
/// Unknown keys are rejected; relative file references are resolved
/// against the config file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    let mut cfg: ExperimentConfig = toml::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    cfg.materialize()?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// The shipped twin-experiment scenario with an explicit seed.
    pub fn default_osse(seed: u64) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        cfg.enkf.seed = Some(seed);
        cfg.materialize()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes the materialized config (used for echoing and hashing).
    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// SHA-256 of the materialized TOML text, hex-encoded.
    pub fn content_hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string()?.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&path);
                }
            }
        };
        fix(&mut self.forcing.hydrograph_csv);
        fix(&mut self.forcing.rating_curve_csv);
        fix(&mut self.observations.gauges_csv);
        fix(&mut self.observations.nodes_csv);
    }

    /// Fills the derivable fields (hydrograph and rating curve) so the
    /// config echoes complete. Idempotent.
    pub fn materialize(&mut self) -> Result<()> {
        if self.forcing.hydrograph.is_none() {
            self.forcing.hydrograph = Some(match &self.forcing.hydrograph_csv {
                Some(p) => io::read_hydrograph_csv(p).map_err(|e| {
                    Error::Config(format!("hydrograph csv {}: {e}", p.display()))
                })?,
                None => self.synthetic_hydrograph(),
            });
        }
        if self.forcing.rating_curve.is_none() {
            self.forcing.rating_curve = Some(match &self.forcing.rating_curve_csv {
                Some(p) => io::read_rating_curve_csv(p)
                    .map_err(|e| {
                        Error::Config(format!("rating curve csv {}: {e}", p.display()))
                    })?
                    .points,
                None => self.manning_rating_curve()?,
            });
        }
        Ok(())
    }

    fn synthetic_hydrograph(&self) -> Vec<(f64, f64)> {
        let f = &self.forcing;
        let t0 = self.experiments.t_start_s;
        let rise_start = (f.peak_time_s - f.rise_duration_s).max(t0);
        vec![
            (t0, f.base_flow_m3s),
            (rise_start, f.base_flow_m3s),
            (f.peak_time_s, f.peak_flow_m3s),
            (f.peak_time_s + f.fall_duration_s, f.base_flow_m3s),
        ]
    }

    /// Rating table from the Manning relation at the downstream section,
    /// using the default riverbed coefficient, so the boundary is
    /// consistent with steady uniform flow.
    fn manning_rating_curve(&self) -> Result<Vec<(f64, f64)>> {
        let g = &self.geometry;
        let section = CrossSection {
            main_width: g.main_width_m,
            bank_height: g.bank_height_m,
            floodplain_width: g.floodplain_width_m,
        };
        let dx = g.length_m / g.cell_count.max(1) as f64;
        let bed_last = g.bed_datum_m + g.bed_slope * 0.5 * dx;
        let q_max = 2.5 * self.forcing.peak_flow_m3s.max(self.forcing.base_flow_m3s);
        let mut points = Vec::new();
        for k in 0..=20 {
            let q = q_max * k as f64 / 20.0;
            let h = steady_uniform_depth(q, &section, self.prior.riverbed.default, g.bed_slope)?;
            points.push((q, bed_last + h));
        }
        Ok(points)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != "osse" && self.mode != "assimilate" {
            return Err(Error::Config(format!(
                "mode must be 'osse' or 'assimilate', got '{}'",
                self.mode
            )));
        }
        let g = &self.geometry;
        if g.cell_count < 3 {
            return Err(Error::Config(format!(
                "geometry.cell_count must be >= 3, got {}",
                g.cell_count
            )));
        }
        if !(g.length_m > 0.0) || !(g.bed_slope > 0.0) {
            return Err(Error::Config(
                "geometry.length_m and geometry.bed_slope must be > 0".into(),
            ));
        }
        let mut prev = 0.0;
        for &f in &g.zone_boundaries_frac {
            if !(f > prev && f < 1.0) {
                return Err(Error::Config(format!(
                    "geometry.zone_boundaries_frac must be strictly increasing in (0, 1), got {f}"
                )));
            }
            prev = f;
        }
        if self.enkf.seed.is_none() {
            return Err(Error::Config(
                "enkf.seed is required: seeds are always explicit".into(),
            ));
        }
        if self.enkf.members < 2 {
            return Err(Error::Config(format!(
                "enkf.members must be >= 2, got {}",
                self.enkf.members
            )));
        }
        if !(self.enkf.window_s > 0.0) {
            return Err(Error::Config("enkf.window_s must be > 0".into()));
        }
        if !(self.enkf.tau >= 0.0) {
            return Err(Error::Config("enkf.tau must be >= 0".into()));
        }
        if !(self.enkf.reperturb_frac > 0.0 && self.enkf.reperturb_frac <= 1.0) {
            return Err(Error::Config(
                "enkf.reperturb_frac must be in (0, 1]".into(),
            ));
        }
        if !(self.enkf.reperturb_frac_mu > 0.0 && self.enkf.reperturb_frac_mu <= 1.0) {
            return Err(Error::Config(
                "enkf.reperturb_frac_mu must be in (0, 1]".into(),
            ));
        }
        if !(self.enkf.reperturb_frac_floodplain > 0.0 && self.enkf.reperturb_frac_floodplain <= 1.0)
        {
            return Err(Error::Config(
                "enkf.reperturb_frac_floodplain must be in (0, 1]".into(),
            ));
        }
        let e = &self.experiments;
        if !(e.t_end_s > e.t_start_s) {
            return Err(Error::Config(
                "experiments event window is empty (t_end_s <= t_start_s)".into(),
            ));
        }
        if e.set.is_empty() {
            return Err(Error::Config("experiments.set must be nonempty".into()));
        }
        let known: BTreeSet<&str> = ["OL", "IDA", "SWDA", "FDA"].into();
        let mut seen = BTreeSet::new();
        for name in &e.set {
            if !known.contains(name.as_str()) {
                return Err(Error::Config(format!(
                    "experiments.set: unknown experiment '{name}' (expected OL, IDA, SWDA, FDA)"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!(
                    "experiments.set: duplicate experiment '{name}'"
                )));
            }
        }
        for &dt in &e.revisit_sweep_s {
            if !(dt > 0.0) {
                return Err(Error::Config(
                    "experiments.revisit_sweep_s entries must be > 0".into(),
                ));
            }
        }
        if self.stations.is_empty() {
            return Err(Error::Config("at least one station required".into()));
        }
        let mut ids = BTreeSet::new();
        for s in &self.stations {
            if !(0.0..=1.0).contains(&s.x_frac) {
                return Err(Error::Config(format!(
                    "station {}: x_frac must be in [0, 1]",
                    s.id
                )));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Config(format!("duplicate station id '{}'", s.id)));
            }
            if !(s.sampling_interval_s > 0.0) {
                return Err(Error::Config(format!(
                    "station {}: sampling_interval_s must be > 0",
                    s.id
                )));
            }
        }
        if self.passes.is_empty() {
            return Err(Error::Config("at least one swath pass required".into()));
        }
        for p in &self.passes {
            if !(0.0 <= p.x_lo_frac && p.x_lo_frac < p.x_hi_frac && p.x_hi_frac <= 1.0) {
                return Err(Error::Config(format!(
                    "pass {}: coverage fractions out of order",
                    p.pass_id
                )));
            }
        }
        self.prior.riverbed.validate("prior.riverbed")?;
        self.prior.floodplain.validate("prior.floodplain")?;
        self.prior.mu.validate("prior.mu")?;

        if self.mode == "osse" {
            let o = &self.osse;
            if o.truth_ks_offsets.len() != g.zone_count() {
                return Err(Error::Config(format!(
                    "osse.truth_ks_offsets has {} entries but the geometry defines {} zones",
                    o.truth_ks_offsets.len(),
                    g.zone_count()
                )));
            }
            for &off in &o.truth_ks_offsets {
                let v = self.prior.riverbed.default + off;
                if !(v > 0.0) {
                    return Err(Error::Config(format!(
                        "osse.truth_ks_offsets yields non-positive truth ks {v}"
                    )));
                }
            }
            if o.pixels_per_node < 1 {
                return Err(Error::Config("osse.pixels_per_node must be >= 1".into()));
            }
            if !(0.0..=1.0).contains(&o.dark_water_fraction) {
                return Err(Error::Config(
                    "osse.dark_water_fraction must be in [0, 1]".into(),
                ));
            }
            for &t in &o.snapshot_times_s {
                if t < e.t_start_s || t > e.t_end_s {
                    return Err(Error::Config(format!(
                        "osse.snapshot_times_s entry {t} outside the event window"
                    )));
                }
            }
        } else {
            let needs_gauges = e.set.iter().any(|s| s == "IDA" || s == "FDA");
            let needs_nodes = e.set.iter().any(|s| s == "SWDA" || s == "FDA");
            if needs_gauges && self.observations.gauges_csv.is_none() {
                return Err(Error::Config(
                    "assimilate mode with IDA/FDA requires observations.gauges_csv".into(),
                ));
            }
            if needs_nodes && self.observations.nodes_csv.is_none() {
                return Err(Error::Config(
                    "assimilate mode with SWDA/FDA requires observations.nodes_csv".into(),
                ));
            }
        }
        for p in [
            &self.forcing.hydrograph_csv,
            &self.forcing.rating_curve_csv,
            &self.observations.gauges_csv,
            &self.observations.nodes_csv,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "referenced file does not exist: {}",
                    p.display()
                )));
            }
        }

        // Stations must sit in their declared zones.
        let zone_of = |x_frac: f64| -> usize {
            let mut z = 1;
            for (k, &b) in g.zone_boundaries_frac.iter().enumerate() {
                if x_frac >= b {
                    z = k + 2;
                }
            }
            z
        };
        for s in &self.stations {
            let z = zone_of(s.x_frac);
            if z != s.zone_id {
                return Err(Error::Config(format!(
                    "station {}: declared zone {} but x_frac {} falls in zone {z}",
                    s.id, s.zone_id, s.x_frac
                )));
            }
        }
        Ok(())
    }

    /// Builds the runtime objects the experiment runner consumes.
    pub fn build(&self) -> Result<Scenario> {
        let g = &self.geometry;
        let n = g.cell_count as usize;
        let dx = g.length_m / n as f64;
        let section = CrossSection {
            main_width: g.main_width_m,
            bank_height: g.bank_height_m,
            floodplain_width: g.floodplain_width_m,
        };
        let bed: Vec<f64> = (0..n)
            .map(|i| g.bed_datum_m + g.bed_slope * (g.length_m - (i as f64 + 0.5) * dx))
            .collect();
        let mut edges = vec![0.0];
        edges.extend(g.zone_boundaries_frac.iter().map(|f| f * g.length_m));
        edges.push(g.length_m);
        let zones: Vec<FrictionZone> = edges
            .windows(2)
            .enumerate()
            .map(|(k, w)| FrictionZone {
                zone_id: k + 1,
                x_start: w[0],
                x_end: w[1],
                ks: self.prior.riverbed.default,
            })
            .collect();
        let geometry = RiverGeometry::new(g.length_m, bed, vec![section; n], zones, g.floodplain_ks)?;

        let hydrograph = self
            .forcing
            .hydrograph
            .clone()
            .ok_or_else(|| Error::Config("config not materialized (hydrograph)".into()))?;
        let rating_points = self
            .forcing
            .rating_curve
            .clone()
            .ok_or_else(|| Error::Config("config not materialized (rating curve)".into()))?;
        let forcing = BoundaryForcing {
            inflow_hydrograph: hydrograph,
            rating_curve: RatingCurve {
                points: rating_points,
            },
        };
        forcing.validate()?;

        let stations: Vec<GaugeStation> = self
            .stations
            .iter()
            .map(|s| GaugeStation {
                id: s.id.clone(),
                x: s.x_frac * g.length_m,
                zone_id: s.zone_id,
                role: s.role,
                sampling_interval: s.sampling_interval_s,
            })
            .collect();
        for s in &stations {
            s.validate(g.length_m)?;
        }

        let passes: Vec<SwathPass> = self
            .passes
            .iter()
            .map(|p| SwathPass {
                pass_id: p.pass_id,
                x_lo: p.x_lo_frac * g.length_m,
                x_hi: p.x_hi_frac * g.length_m,
                overpass_times: vec![],
            })
            .collect();

        let zone_count = g.zone_count();
        let mut ks_priors = Vec::new();
        if self.prior.include_floodplain {
            ks_priors.push(self.prior.floodplain);
        }
        ks_priors.extend(std::iter::repeat(self.prior.riverbed).take(zone_count));
        let prior = PriorSpec {
            ks: ks_priors,
            mu: self.prior.mu,
        };
        prior.validate()?;

        // Truth control: prior defaults shifted by the configured offsets.
        let mut truth_ks = Vec::new();
        if self.prior.include_floodplain {
            truth_ks.push(self.osse.truth_floodplain_ks);
        }
        truth_ks.extend(
            self.osse
                .truth_ks_offsets
                .iter()
                .map(|off| self.prior.riverbed.default + off),
        );
        let truth_control = ControlVector {
            ks: truth_ks,
            mu: 1.0,
        };

        let truth_forcing = self.truth_forcing(&forcing);
        let truth_spec = TruthSpec {
            true_control: truth_control.clone(),
            flood_peak_time: self.forcing.peak_time_s,
            extent_snapshot_times: self.osse.snapshot_times_s.clone(),
            extent_threshold: self.osse.extent_threshold_m,
        };

        // Shared initial state: steady uniform flow at the initial inflow
        // with the prior-default coefficients.
        let q0 = forcing.inflow(self.experiments.t_start_s);
        let mut depth = Vec::with_capacity(n);
        for i in 0..n {
            depth.push(steady_uniform_depth(
                q0,
                &geometry.section[i],
                geometry.cell_ks(i),
                g.bed_slope,
            )?);
        }
        let initial_state = HydroState {
            time: self.experiments.t_start_s,
            depth,
            discharge: vec![q0; n],
        };

        Ok(Scenario {
            geometry,
            forcing,
            truth_forcing,
            truth_spec,
            stations,
            passes,
            plan: self.plan,
            prior,
            initial_state,
            run_opts: RunOptions {
                courant: self.enkf.courant,
                dt_max: self.enkf.dt_max_s,
            },
            enkf_opts: EnkfOptions {
                perturb_obs: self.enkf.perturb_obs,
                inflation: self.enkf.inflation,
                gauge_sigma_floor: self.enkf.gauge_sigma_floor_m,
                node_sigma_floor: self.enkf.node_sigma_floor_m,
                reperturb_frac: self.enkf.reperturb_frac,
                reperturb_frac_mu: self.enkf.reperturb_frac_mu,
                reperturb_frac_floodplain: self.enkf.reperturb_frac_floodplain,
            },
        })
    }

    /// The truth's inflow: the base hydrograph scaled by a time-varying
    /// factor ramping 1 -> truth_mu_peak at flood peak -> 1. With peak 1.0
    /// the truth forcing equals the base forcing exactly.
    fn truth_forcing(&self, base: &BoundaryForcing) -> BoundaryForcing {
        let (t0, t1) = (self.experiments.t_start_s, self.experiments.t_end_s);
        let tp = self.forcing.peak_time_s.clamp(t0, t1);
        let peak = self.osse.truth_mu_peak;
        let factor = |t: f64| -> f64 {
            if peak == 1.0 || t <= t0 || t >= t1 {
                return 1.0;
            }
            if t <= tp {
                1.0 + (peak - 1.0) * (t - t0) / (tp - t0).max(1e-9)
            } else {
                1.0 + (peak - 1.0) * (t1 - t) / (t1 - tp).max(1e-9)
            }
        };
        if peak == 1.0 {
            return base.clone();
        }
        // Sample at the union of hydrograph knots, the factor knots and a
        // 6-hourly grid, so the product is well resolved.
        let mut knots: Vec<f64> = base
            .inflow_hydrograph
            .iter()
            .map(|&(t, _)| t)
            .filter(|&t| t >= t0 && t <= t1)
            .collect();
        knots.push(t0);
        knots.push(tp);
        knots.push(t1);
        let mut t = t0;
        while t < t1 {
            knots.push(t);
            t += 21_600.0;
        }
        knots.sort_by(|a, b| a.total_cmp(b));
        knots.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        BoundaryForcing {
            inflow_hydrograph: knots
                .into_iter()
                .map(|t| (t, base.inflow(t) * factor(t)))
                .collect(),
            rating_curve: base.rating_curve.clone(),
        }
    }
}

/// Materialized runtime objects of one configured scenario.
pub struct Scenario {
    pub geometry: RiverGeometry,
    pub forcing: BoundaryForcing,
    /// Forcing used by the truth run (osse mode); equals `forcing` in
    /// assimilate mode or when truth_mu_peak is 1.
    pub truth_forcing: BoundaryForcing,
    pub truth_spec: TruthSpec,
    pub stations: Vec<GaugeStation>,
    pub passes: Vec<SwathPass>,
    pub plan: PassPlanKind,
    pub prior: PriorSpec,
    pub initial_state: HydroState,
    pub run_opts: RunOptions,
    pub enkf_opts: EnkfOptions,
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_cfg(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn minimal_config_parses_with_defaults_filled() {
        let (_d, p) = write_cfg("[enkf]\nseed = 7\n");
        let cfg = parse_config(&p).unwrap();
        assert_eq!(cfg.enkf.seed, Some(7));
        assert_eq!(cfg.enkf.members, 50);
        assert_eq!(cfg.geometry.cell_count, 250);
        assert_eq!(cfg.stations.len(), 7);
        assert_eq!(cfg.passes.len(), 3);
        // Defaults are materialized and echoed.
        assert!(cfg.forcing.hydrograph.is_some());
        assert!(cfg.forcing.rating_curve.is_some());
        let echoed = cfg.to_toml_string().unwrap();
        assert!(echoed.contains("members = 50"));
        assert!(echoed.contains("hydrograph"));
    }

    #[test]
    fn parse_serialize_parse_round_trip_is_identical() {
        let (_d, p) = write_cfg("[enkf]\nseed = 42\nmembers = 12\n");
        let cfg = parse_config(&p).unwrap();
        let (_d2, p2) = write_cfg(&cfg.to_toml_string().unwrap());
        let cfg2 = parse_config(&p2).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(cfg.content_hash().unwrap(), cfg2.content_hash().unwrap());
    }

    #[test]
    fn unknown_key_is_rejected_with_its_name() {
        let (_d, p) = write_cfg("[enkf]\nseed = 7\nwibble = 3\n");
        let err = parse_config(&p).unwrap_err().to_string();
        assert!(err.contains("wibble"), "{err}");
    }

    #[test]
    fn missing_seed_is_rejected() {
        let (_d, p) = write_cfg("[enkf]\nmembers = 10\n");
        let err = parse_config(&p).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn negative_ensemble_size_names_the_field() {
        let (_d, p) = write_cfg("[enkf]\nseed = 7\nmembers = -5\n");
        let err = parse_config(&p).unwrap_err().to_string();
        assert!(err.contains("members"), "{err}");
    }

    #[test]
    fn station_zone_mismatch_is_rejected() {
        let (_d, p) = write_cfg(
            r#"
[enkf]
seed = 7
[[stations]]
id = "X"
x_frac = 0.02
zone_id = 3
role = "assimilation"
sampling_interval_s = 900.0
"#,
        );
        let err = parse_config(&p).unwrap_err().to_string();
        assert!(err.contains("zone"), "{err}");
    }

    #[test]
    fn missing_referenced_file_is_rejected() {
        let (_d, p) = write_cfg(
            "[enkf]\nseed = 7\n[forcing]\nhydrograph_csv = \"does_not_exist.csv\"\n",
        );
        let err = parse_config(&p).unwrap_err().to_string();
        assert!(err.contains("does_not_exist.csv"), "{err}");
    }

    #[test]
    fn hydrograph_csv_is_loaded_relative_to_config() {
        let dir = tempdir().unwrap();
        let q = dir.path().join("q.csv");
        io::write_hydrograph_csv(&q, &[(0.0, 300.0), (86_400.0, 500.0)]).unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(&p, "[enkf]\nseed = 7\n[forcing]\nhydrograph_csv = \"q.csv\"\n").unwrap();
        let cfg = parse_config(&p).unwrap();
        assert_eq!(
            cfg.forcing.hydrograph,
            Some(vec![(0.0, 300.0), (86_400.0, 500.0)])
        );
    }

    #[test]
    fn default_scenario_builds_consistent_runtime_objects() {
        let cfg = ExperimentConfig::default_osse(7).unwrap();
        let sc = cfg.build().unwrap();
        assert_eq!(sc.geometry.cell_count, 250);
        assert!((sc.geometry.dx() - 200.0).abs() < 1e-9);
        assert_eq!(sc.geometry.zones.len(), 6);
        // Control: floodplain + 6 riverbed zones + mu.
        assert_eq!(sc.prior.dim(), 8);
        assert_eq!(sc.truth_spec.true_control.ks.len(), 7);
        assert!((sc.truth_spec.true_control.ks[1] - 48.0).abs() < 1e-12);
        assert!((sc.truth_spec.true_control.ks[2] - 34.0).abs() < 1e-12);
        // Stations land in their declared zones.
        for (s, cfg_s) in sc.stations.iter().zip(&cfg.stations) {
            assert_eq!(sc.geometry.zone_at(s.x), cfg_s.zone_id, "{}", s.id);
        }
        // Initial state is in-bank steady flow.
        assert!(sc.initial_state.depth.iter().all(|&h| h > 0.5 && h < 4.0));
        // Truth forcing is amplified at the peak, equal at the start.
        let tp = cfg.forcing.peak_time_s;
        let amp = sc.truth_forcing.inflow(tp) / sc.forcing.inflow(tp);
        assert!((amp - 1.15).abs() < 1e-6, "amp {amp}");
        assert!(
            (sc.truth_forcing.inflow(0.0) - sc.forcing.inflow(0.0)).abs() < 1e-9
        );
    }

    #[test]
    fn truth_forcing_equals_base_when_mu_peak_is_one() {
        let mut cfg = ExperimentConfig::default_osse(7).unwrap();
        cfg.osse.truth_mu_peak = 1.0;
        let sc = cfg.build().unwrap();
        assert_eq!(sc.truth_forcing, sc.forcing);
    }

    #[test]
    fn rating_curve_consistent_with_steady_flow() {
        let cfg = ExperimentConfig::default_osse(7).unwrap();
        let sc = cfg.build().unwrap();
        // At base flow the rating WSE equals downstream bed + uniform depth.
        let q = 400.0;
        let h = steady_uniform_depth(
            q,
            &sc.geometry.section[249],
            40.0,
            cfg.geometry.bed_slope,
        )
        .unwrap();
        let bed_last = sc.geometry.bed_elevation[249];
        let wse = sc.forcing.rating_curve.wse(q);
        assert!((wse - (bed_last + h)).abs() < 0.05, "wse {wse}");
    }
}
