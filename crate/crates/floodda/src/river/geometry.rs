use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric composite cross section: a rectangular main channel that
/// spills into a rectangular floodplain once depth exceeds `bank_height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    /// Width of the main channel, m.
    pub main_width: f64,
    /// Depth at which flow spills onto the floodplain, m.
    pub bank_height: f64,
    /// Additional width of the floodplain, m (0 for a plain rectangle).
    pub floodplain_width: f64,
}

impl CrossSection {
    pub fn validate(&self) -> Result<()> {
        if !(self.main_width > 0.0) {
            return Err(Error::Config(format!(
                "cross section main_width must be > 0, got {}",
                self.main_width
            )));
        }
        if !(self.floodplain_width >= 0.0) {
            return Err(Error::Config(format!(
                "cross section floodplain_width must be >= 0, got {}",
                self.floodplain_width
            )));
        }
        if !(self.bank_height > 0.0) {
            return Err(Error::Config(format!(
                "cross section bank_height must be > 0, got {}",
                self.bank_height
            )));
        }
        Ok(())
    }

    /// Wetted area at depth `h`, m^2.
    pub fn area(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let over = (h - self.bank_height).max(0.0);
        self.main_width * h + self.floodplain_width * over
    }

    /// Free-surface width at depth `h`, m.
    pub fn top_width(&self, h: f64) -> f64 {
        if h > self.bank_height {
            self.main_width + self.floodplain_width
        } else {
            self.main_width
        }
    }

    /// Invert `area` back to a depth. Exact for this piecewise-linear shape.
    pub fn depth_from_area(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        let bank_area = self.main_width * self.bank_height;
        if a <= bank_area {
            a / self.main_width
        } else {
            self.bank_height + (a - bank_area) / (self.main_width + self.floodplain_width)
        }
    }

    /// Conveyance K(h) such that Q = K * sqrt(S), using the divided-channel
    /// method: the main channel carries `ks_main`, the floodplain sub-area
    /// `ks_floodplain`. Vertical division lines are not wetted perimeter.
    pub fn conveyance(&self, h: f64, ks_main: f64, ks_floodplain: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let h_main_wall = h.min(self.bank_height);
        let a_main = self.main_width * h;
        let p_main = self.main_width + 2.0 * h_main_wall;
        let r_main = a_main / p_main;
        let mut k = ks_main * a_main * r_main.powf(2.0 / 3.0);
        let over = h - self.bank_height;
        if over > 0.0 && self.floodplain_width > 0.0 {
            let a_fp = self.floodplain_width * over;
            let p_fp = self.floodplain_width + 2.0 * over;
            let r_fp = a_fp / p_fp;
            k += ks_floodplain * a_fp * r_fp.powf(2.0 / 3.0);
        }
        k
    }
}

/// One friction zone of the riverbed: a contiguous interval of the reach
/// with its own Strickler coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionZone {
    /// 1-based zone index; id 0 is reserved for the floodplain coefficient.
    pub zone_id: usize,
    pub x_start: f64,
    pub x_end: f64,
    /// Strickler coefficient, m^(1/3)/s.
    pub ks: f64,
}

/// Discretized reach: cell abscissae, bed profile, cross sections and the
/// friction zone map. Cells are uniform, centers at (i + 1/2) * dx.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiverGeometry {
    pub length: f64,
    pub cell_count: usize,
    /// Bed elevation above datum, one value per cell, m.
    pub bed_elevation: Vec<f64>,
    /// Cross section per cell.
    pub section: Vec<CrossSection>,
    /// Riverbed friction zones, ordered, partitioning [0, length].
    pub zones: Vec<FrictionZone>,
    /// Reach-wide floodplain Strickler coefficient (zone id 0), m^(1/3)/s.
    pub floodplain_ks: f64,
    /// Cell index -> riverbed zone index (into `zones`).
    #[serde(skip)]
    pub cell_zone: Vec<usize>,
}

impl RiverGeometry {
    pub fn new(
        length: f64,
        bed_elevation: Vec<f64>,
        section: Vec<CrossSection>,
        zones: Vec<FrictionZone>,
        floodplain_ks: f64,
    ) -> Result<Self> {
        let cell_count = bed_elevation.len();
        let mut geom = RiverGeometry {
            length,
            cell_count,
            bed_elevation,
            section,
            zones,
            floodplain_ks,
            cell_zone: Vec::new(),
        };
        geom.validate_and_index()?;
        Ok(geom)
    }

    /// Validates invariants and rebuilds the cell -> zone map.
    pub fn validate_and_index(&mut self) -> Result<()> {
        if self.cell_count < 3 {
            return Err(Error::Config(format!(
                "geometry needs at least 3 cells, got {}",
                self.cell_count
            )));
        }
        if !(self.length > 0.0) {
            return Err(Error::Config("geometry length must be > 0".into()));
        }
        if self.bed_elevation.len() != self.cell_count || self.section.len() != self.cell_count {
            return Err(Error::Config(
                "bed_elevation and section must have one entry per cell".into(),
            ));
        }
        if self.bed_elevation.iter().any(|z| !z.is_finite()) {
            return Err(Error::Config("bed elevation must be finite".into()));
        }
        for s in &self.section {
            s.validate()?;
        }
        if !(self.floodplain_ks > 0.0) {
            return Err(Error::Config("floodplain ks must be > 0".into()));
        }
        if self.zones.is_empty() {
            return Err(Error::Config("at least one friction zone required".into()));
        }
        let mut prev_end = 0.0;
        for (k, z) in self.zones.iter().enumerate() {
            if !(z.x_start < z.x_end) {
                return Err(Error::Config(format!(
                    "zone {} has x_start >= x_end",
                    z.zone_id
                )));
            }
            if (z.x_start - prev_end).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "zones must partition the reach: zone {} starts at {} but previous ends at {}",
                    z.zone_id, z.x_start, prev_end
                )));
            }
            if z.zone_id != k + 1 {
                return Err(Error::Config(format!(
                    "riverbed zone ids must be 1..N in order, got {} at position {}",
                    z.zone_id, k
                )));
            }
            if !(z.ks > 0.0) {
                return Err(Error::Config(format!("zone {} ks must be > 0", z.zone_id)));
            }
            prev_end = z.x_end;
        }
        if (prev_end - self.length).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "zones end at {} but reach length is {}",
                prev_end, self.length
            )));
        }
        let dx = self.dx();
        self.cell_zone = (0..self.cell_count)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                self.zones
                    .iter()
                    .position(|z| x >= z.x_start && x < z.x_end)
                    .unwrap_or(self.zones.len() - 1)
            })
            .collect();
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cell_count as f64
    }

    /// Cell-center abscissa, m.
    pub fn cell_x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Riverbed Strickler coefficient of the zone containing cell `i`.
    pub fn cell_ks(&self, i: usize) -> f64 {
        self.zones[self.cell_zone[i]].ks
    }

    /// Zone id (1-based) of the zone containing abscissa `x`.
    pub fn zone_at(&self, x: f64) -> usize {
        self.zones
            .iter()
            .find(|z| x >= z.x_start && x < z.x_end)
            .map(|z| z.zone_id)
            .unwrap_or_else(|| self.zones.last().unwrap().zone_id)
    }
}

/// Monotone table mapping discharge (m^3/s) to downstream WSE (m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingCurve {
    /// (discharge, wse) pairs, both strictly increasing.
    pub points: Vec<(f64, f64)>,
}

impl RatingCurve {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::Config(
                "rating curve needs at least two points".into(),
            ));
        }
        for w in self.points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::Config(
                    "rating curve must be strictly increasing in both columns".into(),
                ));
            }
        }
        Ok(())
    }

    /// WSE for a discharge, linear interpolation with linear extrapolation
    /// at the ends (clamped to the first segment's slope).
    pub fn wse(&self, q: f64) -> f64 {
        let pts = &self.points;
        if q <= pts[0].0 {
            let (q0, w0) = pts[0];
            let (q1, w1) = pts[1];
            return w0 + (q - q0) * (w1 - w0) / (q1 - q0);
        }
        for w in pts.windows(2) {
            let (q0, w0) = w[0];
            let (q1, w1) = w[1];
            if q <= q1 {
                return w0 + (q - q0) * (w1 - w0) / (q1 - q0);
            }
        }
        let (q0, w0) = pts[pts.len() - 2];
        let (q1, w1) = pts[pts.len() - 1];
        w1 + (q - q1) * (w1 - w0) / (q1 - q0)
    }
}

/// Upstream hydrograph plus downstream rating curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryForcing {
    /// Piecewise-linear inflow time series at the upstream end: (t_s, q_m3s).
    pub inflow_hydrograph: Vec<(f64, f64)>,
    pub rating_curve: RatingCurve,
}

impl BoundaryForcing {
    pub fn validate(&self) -> Result<()> {
        if self.inflow_hydrograph.len() < 2 {
            return Err(Error::Config("hydrograph needs at least two points".into()));
        }
        for w in self.inflow_hydrograph.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config(
                    "hydrograph times must be strictly increasing".into(),
                ));
            }
        }
        if self.inflow_hydrograph.iter().any(|&(_, q)| q < 0.0) {
            return Err(Error::Config("hydrograph values must be >= 0".into()));
        }
        self.rating_curve.validate()
    }

    /// Inflow at time `t`, piecewise-linear, clamped to the end values.
    pub fn inflow(&self, t: f64) -> f64 {
        let pts = &self.inflow_hydrograph;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let (t0, q0) = w[0];
            let (t1, q1) = w[1];
            if t <= t1 {
                return q0 + (t - t0) * (q1 - q0) / (t1 - t0);
            }
        }
        pts[pts.len() - 1].1
    }

    /// Returns a copy with every hydrograph ordinate scaled by `mu`.
    pub fn scaled(&self, mu: f64) -> BoundaryForcing {
        BoundaryForcing {
            inflow_hydrograph: self
                .inflow_hydrograph
                .iter()
                .map(|&(t, q)| (t, mu * q))
                .collect(),
            rating_curve: self.rating_curve.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(width: f64) -> CrossSection {
        CrossSection {
            main_width: width,
            bank_height: 100.0,
            floodplain_width: 0.0,
        }
    }

    #[test]
    fn area_depth_round_trip_composite() {
        let s = CrossSection {
            main_width: 150.0,
            bank_height: 6.0,
            floodplain_width: 400.0,
        };
        for &h in &[0.0, 0.5, 3.0, 6.0, 6.5, 9.0] {
            let a = s.area(h);
            assert!((s.depth_from_area(a) - h).abs() < 1e-12);
        }
    }

    #[test]
    fn top_width_switches_at_bank() {
        let s = CrossSection {
            main_width: 150.0,
            bank_height: 6.0,
            floodplain_width: 400.0,
        };
        assert_eq!(s.top_width(5.9), 150.0);
        assert_eq!(s.top_width(6.1), 550.0);
    }

    #[test]
    fn conveyance_rectangular_matches_manning() {
        // A = 200, P = 104, R = 200/104 for width 100, h = 2.
        let s = rect(100.0);
        let k = s.conveyance(2.0, 40.0, 10.0);
        let r: f64 = 200.0 / 104.0;
        let expected = 40.0 * 200.0 * r.powf(2.0 / 3.0);
        assert!((k - expected).abs() < 1e-9);
    }

    #[test]
    fn zone_map_covers_all_cells() {
        let n = 10;
        let geom = RiverGeometry::new(
            2000.0,
            vec![0.0; n],
            vec![rect(50.0); n],
            vec![
                FrictionZone {
                    zone_id: 1,
                    x_start: 0.0,
                    x_end: 800.0,
                    ks: 30.0,
                },
                FrictionZone {
                    zone_id: 2,
                    x_start: 800.0,
                    x_end: 2000.0,
                    ks: 40.0,
                },
            ],
            10.0,
        )
        .unwrap();
        assert_eq!(geom.cell_zone.len(), n);
        assert_eq!(geom.cell_ks(0), 30.0);
        assert_eq!(geom.cell_ks(9), 40.0);
        assert_eq!(geom.zone_at(100.0), 1);
        assert_eq!(geom.zone_at(1900.0), 2);
    }

    #[test]
    fn zones_must_partition() {
        let n = 5;
        let err = RiverGeometry::new(
            1000.0,
            vec![0.0; n],
            vec![rect(50.0); n],
            vec![FrictionZone {
                zone_id: 1,
                x_start: 0.0,
                x_end: 900.0,
                ks: 30.0,
            }],
            10.0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn rating_curve_interpolates() {
        let rc = RatingCurve {
            points: vec![(0.0, 1.0), (100.0, 2.0), (200.0, 2.5)],
        };
        assert!((rc.wse(50.0) - 1.5).abs() < 1e-12);
        assert!((rc.wse(150.0) - 2.25).abs() < 1e-12);
        // Extrapolation continues the end segments.
        assert!((rc.wse(300.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hydrograph_clamps_and_scales() {
        let f = BoundaryForcing {
            inflow_hydrograph: vec![(0.0, 100.0), (10.0, 200.0)],
            rating_curve: RatingCurve {
                points: vec![(0.0, 0.0), (100.0, 1.0)],
            },
        };
        assert_eq!(f.inflow(-5.0), 100.0);
        assert_eq!(f.inflow(5.0), 150.0);
        assert_eq!(f.inflow(50.0), 200.0);
        let g = f.scaled(0.8);
        assert_eq!(g.inflow(10.0), 160.0);
    }
}
