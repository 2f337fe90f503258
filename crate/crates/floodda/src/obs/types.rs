use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node spacing of the swath altimeter river product, m along centerline.
/// The node grid is anchored at x = 0.
pub const NODE_SPACING: f64 = 200.0;

/// Index of the node segment containing abscissa `x`.
pub fn node_index(x: f64) -> usize {
    (x / NODE_SPACING).floor().max(0.0) as usize
}

/// Center abscissa of node `j`, m.
pub fn node_center(j: usize) -> f64 {
    (j as f64 + 0.5) * NODE_SPACING
}

/// Along-track span [start, end) of node `j`, m.
pub fn node_span(j: usize) -> (f64, f64) {
    (j as f64 * NODE_SPACING, (j as f64 + 1.0) * NODE_SPACING)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationRole {
    Assimilation,
    Validation,
}

/// An in-situ gauge station on the reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeStation {
    pub id: String,
    /// Abscissa along centerline, m.
    pub x: f64,
    /// Friction zone containing the station (1-based riverbed id).
    pub zone_id: usize,
    pub role: StationRole,
    /// Sampling interval, s.
    pub sampling_interval: f64,
}

impl GaugeStation {
    pub fn validate(&self, reach_length: f64) -> Result<()> {
        if !(0.0..=reach_length).contains(&self.x) {
            return Err(Error::Config(format!(
                "station {}: x = {} outside reach [0, {}]",
                self.id, self.x, reach_length
            )));
        }
        if !(self.sampling_interval > 0.0) {
            return Err(Error::Config(format!(
                "station {}: sampling_interval must be > 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// One swath pass: its along-reach coverage interval and overpass times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwathPass {
    pub pass_id: u32,
    /// Covered interval [x_lo, x_hi] along centerline, m.
    pub x_lo: f64,
    pub x_hi: f64,
    /// Scheduled overpass times, s, strictly increasing (may be empty when
    /// the schedule comes from a pass plan instead).
    #[serde(default)]
    pub overpass_times: Vec<f64>,
}

impl SwathPass {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_lo < self.x_hi) {
            return Err(Error::Config(format!(
                "pass {}: x_lo must be < x_hi",
                self.pass_id
            )));
        }
        for w in self.overpass_times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config(format!(
                    "pass {}: overpass times must be strictly increasing",
                    self.pass_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeQuality {
    Good,
    Degraded,
    /// Dark-water nodes are never assimilated.
    Dark,
}

impl NodeQuality {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeQuality::Good => "good",
            NodeQuality::Degraded => "degraded",
            NodeQuality::Dark => "dark",
        }
    }

    pub fn parse(s: &str) -> Result<NodeQuality> {
        match s {
            "good" => Ok(NodeQuality::Good),
            "degraded" => Ok(NodeQuality::Degraded),
            "dark" => Ok(NodeQuality::Dark),
            other => Err(Error::Argument(format!("unknown node quality '{other}'"))),
        }
    }
}

/// One swath node WSE observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeObservation {
    pub pass_id: u32,
    /// Node center abscissa, m.
    pub node_x: f64,
    pub time: f64,
    pub wse: f64,
    pub sigma: f64,
    pub quality: NodeQuality,
}

/// One gauge water-level observation (WL treated as WSE at the station).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeObservation {
    pub station_id: String,
    pub time: f64,
    pub wse: f64,
    pub sigma: f64,
}

/// Timestamped gauge and node observations over one event window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub gauges: Vec<GaugeObservation>,
    pub nodes: Vec<NodeObservation>,
    /// [t_start, t_end] covered by this set, s.
    pub window: (f64, f64),
}

impl ObservationSet {
    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.window;
        for g in &self.gauges {
            if !(g.sigma > 0.0) {
                return Err(Error::Config(format!(
                    "gauge obs at station {} t={}: sigma must be > 0",
                    g.station_id, g.time
                )));
            }
            if g.time < t0 || g.time > t1 {
                return Err(Error::Config(format!(
                    "gauge obs at station {} t={} outside window",
                    g.station_id, g.time
                )));
            }
        }
        for nd in &self.nodes {
            if !(nd.sigma > 0.0) {
                return Err(Error::Config(format!(
                    "node obs at x={} t={}: sigma must be > 0",
                    nd.node_x, nd.time
                )));
            }
            if nd.time < t0 || nd.time > t1 {
                return Err(Error::Config(format!(
                    "node obs at x={} t={} outside window",
                    nd.node_x, nd.time
                )));
            }
        }
        Ok(())
    }

    /// Gauge observations with t in (t0, t1].
    pub fn gauges_in(&self, t0: f64, t1: f64) -> Vec<&GaugeObservation> {
        self.gauges
            .iter()
            .filter(|g| g.time > t0 && g.time <= t1)
            .collect()
    }

    /// Assimilable (non-dark) node observations with t in (t0, t1].
    pub fn nodes_in(&self, t0: f64, t1: f64) -> Vec<&NodeObservation> {
        self.nodes
            .iter()
            .filter(|n| n.time > t0 && n.time <= t1 && n.quality != NodeQuality::Dark)
            .collect()
    }
}
