//! Observation data model, pass plans, and the operators mapping model
//! trajectories to gauge water levels and swath node WSEs.

mod operators;
mod passplan;
mod types;

pub use operators::{h_gauge, h_swot, interpolate_wse_profile};
pub use passplan::{build_pass_plan, PassPlanKind, ScheduledOverpass};
pub use types::{
    node_center, node_index, node_span, GaugeObservation, GaugeStation, NodeObservation,
    NodeQuality, ObservationSet, StationRole, SwathPass, NODE_SPACING,
};
