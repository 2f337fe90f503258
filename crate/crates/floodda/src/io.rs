//! File formats: CSV readers/writers for forcing and observation data,
//! per-cycle control and trajectory outputs, JSON-lines diagnostics, and a
//! small dependency-free SVG line-chart renderer.
//!
//! All writers format floats with fixed precision so outputs are
//! byte-identical across runs and worker counts.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::control::ControlVector;
use crate::enkf::CycleRecord;
use crate::error::{Error, Result};
use crate::obs::{GaugeObservation, NodeObservation, NodeQuality};
use crate::river::{HydroState, RatingCurve};

fn parse_f64(field: &str, record: usize, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Argument(format!(
            "record {record}: cannot parse '{field}' as a number in column {column}"
        ))
    })
}

fn expect_headers(rdr: &mut csv::Reader<fs::File>, expected: &[&str], what: &str) -> Result<()> {
    let headers = rdr.headers()?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Argument(format!(
            "{what}: expected header '{}', got '{}'",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Reads an inflow hydrograph CSV with header `time_s,discharge_m3s`.
pub fn read_hydrograph_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    expect_headers(&mut rdr, &["time_s", "discharge_m3s"], "hydrograph")?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        out.push((
            parse_f64(&rec[0], i, "time_s")?,
            parse_f64(&rec[1], i, "discharge_m3s")?,
        ));
    }
    Ok(out)
}

/// Writes an inflow hydrograph CSV.
pub fn write_hydrograph_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut s = String::from("time_s,discharge_m3s\n");
    for &(t, q) in points {
        s.push_str(&format!("{t:.3},{q:.6}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads a rating curve CSV with header `discharge_m3s,wse_m`.
pub fn read_rating_curve_csv(path: &Path) -> Result<RatingCurve> {
    let mut rdr = csv::Reader::from_path(path)?;
    expect_headers(&mut rdr, &["discharge_m3s", "wse_m"], "rating curve")?;
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        points.push((
            parse_f64(&rec[0], i, "discharge_m3s")?,
            parse_f64(&rec[1], i, "wse_m")?,
        ));
    }
    let rc = RatingCurve { points };
    rc.validate()?;
    Ok(rc)
}

/// Writes a rating curve CSV.
pub fn write_rating_curve_csv(path: &Path, rc: &RatingCurve) -> Result<()> {
    let mut s = String::from("discharge_m3s,wse_m\n");
    for &(q, w) in &rc.points {
        s.push_str(&format!("{q:.6},{w:.6}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads gauge observations: `station_id,time_s,wse_m,sigma_m`.
pub fn read_gauge_obs_csv(path: &Path) -> Result<Vec<GaugeObservation>> {
    let mut rdr = csv::Reader::from_path(path)?;
    expect_headers(
        &mut rdr,
        &["station_id", "time_s", "wse_m", "sigma_m"],
        "gauge observations",
    )?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        out.push(GaugeObservation {
            station_id: rec[0].trim().to_string(),
            time: parse_f64(&rec[1], i, "time_s")?,
            wse: parse_f64(&rec[2], i, "wse_m")?,
            sigma: parse_f64(&rec[3], i, "sigma_m")?,
        });
    }
    Ok(out)
}

/// Writes gauge observations.
pub fn write_gauge_obs_csv(path: &Path, obs: &[GaugeObservation]) -> Result<()> {
    let mut s = String::from("station_id,time_s,wse_m,sigma_m\n");
    for g in obs {
        s.push_str(&format!(
            "{},{:.3},{:.6},{:.6}\n",
            g.station_id, g.time, g.wse, g.sigma
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads swath node observations:
/// `pass_id,node_x_m,time_s,wse_m,sigma_m,quality`.
pub fn read_node_obs_csv(path: &Path) -> Result<Vec<NodeObservation>> {
    let mut rdr = csv::Reader::from_path(path)?;
    expect_headers(
        &mut rdr,
        &["pass_id", "node_x_m", "time_s", "wse_m", "sigma_m", "quality"],
        "node observations",
    )?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let pass_id = rec[0].trim().parse::<u32>().map_err(|_| {
            Error::Argument(format!("record {i}: bad pass_id '{}'", &rec[0]))
        })?;
        out.push(NodeObservation {
            pass_id,
            node_x: parse_f64(&rec[1], i, "node_x_m")?,
            time: parse_f64(&rec[2], i, "time_s")?,
            wse: parse_f64(&rec[3], i, "wse_m")?,
            sigma: parse_f64(&rec[4], i, "sigma_m")?,
            quality: NodeQuality::parse(rec[5].trim())?,
        });
    }
    Ok(out)
}

/// Writes swath node observations.
pub fn write_node_obs_csv(path: &Path, obs: &[NodeObservation]) -> Result<()> {
    let mut s = String::from("pass_id,node_x_m,time_s,wse_m,sigma_m,quality\n");
    for nd in obs {
        s.push_str(&format!(
            "{},{:.3},{:.3},{:.6},{:.6},{}\n",
            nd.pass_id,
            nd.node_x,
            nd.time,
            nd.wse,
            nd.sigma,
            nd.quality.as_str()
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Writes a trajectory as long-format CSV: `time_s,cell,depth_m,discharge_m3s`.
pub fn write_trajectory_csv(path: &Path, trajectory: &[HydroState]) -> Result<()> {
    let mut s = String::from("time_s,cell,depth_m,discharge_m3s\n");
    for state in trajectory {
        for i in 0..state.depth.len() {
            s.push_str(&format!(
                "{:.3},{},{:.6},{:.6}\n",
                state.time, i, state.depth[i], state.discharge[i]
            ));
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory_csv`].
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<HydroState>> {
    let mut rdr = csv::Reader::from_path(path)?;
    expect_headers(
        &mut rdr,
        &["time_s", "cell", "depth_m", "discharge_m3s"],
        "trajectory",
    )?;
    let mut out: Vec<HydroState> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let t = parse_f64(&rec[0], i, "time_s")?;
        let cell = rec[1].trim().parse::<usize>().map_err(|_| {
            Error::Argument(format!("record {i}: bad cell index '{}'", &rec[1]))
        })?;
        let depth = parse_f64(&rec[2], i, "depth_m")?;
        let q = parse_f64(&rec[3], i, "discharge_m3s")?;
        let need_new = out.last().map(|s| s.time != t).unwrap_or(true);
        if need_new {
            out.push(HydroState {
                time: t,
                depth: Vec::new(),
                discharge: Vec::new(),
            });
        }
        let state = out.last_mut().expect("just pushed");
        if state.depth.len() != cell {
            return Err(Error::Argument(format!(
                "record {i}: cell indices must be contiguous per snapshot"
            )));
        }
        state.depth.push(depth);
        state.discharge.push(q);
    }
    Ok(out)
}

/// Column labels for a control vector of `ks` length `k` (index 0 is the
/// floodplain when the vector carries zones + 1 entries).
pub fn control_labels(ks_len: usize, zone_count: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(ks_len + 1);
    if ks_len == zone_count + 1 {
        labels.push("ks_0".to_string());
        for z in 1..=zone_count {
            labels.push(format!("ks_{z}"));
        }
    } else {
        for z in 1..=ks_len {
            labels.push(format!("ks_{z}"));
        }
    }
    labels.push("mu".to_string());
    labels
}

/// Writes per-cycle analyzed controls:
/// `cycle,t_start_s,t_end_s,<ks columns>,mu`.
pub fn write_controls_csv(path: &Path, cycles: &[CycleRecord], zone_count: usize) -> Result<()> {
    let ks_len = cycles.first().map(|c| c.analyzed.ks.len()).unwrap_or(0);
    let labels = control_labels(ks_len, zone_count);
    let mut s = String::from("cycle,t_start_s,t_end_s");
    for l in &labels {
        s.push(',');
        s.push_str(l);
    }
    s.push('\n');
    for c in cycles {
        s.push_str(&format!("{},{:.3},{:.3}", c.cycle, c.t_start, c.t_end));
        for v in &c.analyzed.ks {
            s.push_str(&format!(",{v:.6}"));
        }
        s.push_str(&format!(",{:.6}\n", c.analyzed.mu));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads the analyzed controls written by [`write_controls_csv`].
/// Returns (cycle, t_start, t_end, control) rows.
pub fn read_controls_csv(path: &Path) -> Result<Vec<(usize, f64, f64, ControlVector)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.len() < 5
        || headers[0] != "cycle"
        || headers[1] != "t_start_s"
        || headers[2] != "t_end_s"
        || headers.last().map(String::as_str) != Some("mu")
    {
        return Err(Error::Argument(format!(
            "controls CSV: unexpected header '{}'",
            headers.join(",")
        )));
    }
    let ks_len = headers.len() - 4;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cycle = rec[0].trim().parse::<usize>().map_err(|_| {
            Error::Argument(format!("record {i}: bad cycle index '{}'", &rec[0]))
        })?;
        let t0 = parse_f64(&rec[1], i, "t_start_s")?;
        let t1 = parse_f64(&rec[2], i, "t_end_s")?;
        let mut ks = Vec::with_capacity(ks_len);
        for k in 0..ks_len {
            ks.push(parse_f64(&rec[3 + k], i, &headers[3 + k])?);
        }
        let mu = parse_f64(&rec[3 + ks_len], i, "mu")?;
        out.push((cycle, t0, t1, ControlVector { ks, mu }));
    }
    Ok(out)
}

/// Writes per-cycle analysis diagnostics as JSON lines (one object per
/// cycle that performed an analysis).
pub fn write_diagnostics_jsonl(path: &Path, cycles: &[CycleRecord]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for c in cycles {
        if let Some(d) = &c.diagnostics {
            let line = serde_json::json!({
                "cycle": c.cycle,
                "t_start_s": c.t_start,
                "t_end_s": c.t_end,
                "obs_count": d.obs_count,
                "innovation_rms_m": d.innovation_rms,
                "kalman_gain_norm": d.kalman_gain_norm,
                "spread_before": d.spread_before,
                "spread_after": d.spread_after,
            });
            writeln!(f, "{line}")?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG line charts
// ---------------------------------------------------------------------------

/// One curve of a line chart.
pub struct Series {
    pub label: String,
    /// SVG stroke color.
    pub color: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a connected line (observation overlays).
    pub markers: bool,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

/// Color `i` of the default palette.
pub fn palette(i: usize) -> String {
    PALETTE[i % PALETTE.len()].to_string()
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    } * mag;
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1e5 || a < 1e-3 {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

/// Renders a line chart with axes, ticks and a legend as a standalone SVG
/// document. The output is deterministic for identical inputs.
pub fn svg_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> String {
    let (w, h) = (840.0, 520.0);
    let (ml, mr, mt, mb) = (70.0, 160.0, 42.0, 52.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let pad = 0.04 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let sx = |x: f64| ml + (x - x_min) / (x_max - x_min) * pw;
    let sy = |y: f64| mt + ph - (y - y_min) / (y_max - y_min) * ph;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        ml + pw / 2.0,
        xml_escape(title)
    ));

    for t in nice_ticks(x_min, x_max, 6) {
        let x = sx(t);
        out.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            mt,
            mt + ph
        ));
        out.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            mt + ph + 16.0,
            fmt_tick(t)
        ));
    }
    for t in nice_ticks(y_min, y_max, 6) {
        let y = sy(t);
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
            ml,
            ml + pw
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            ml - 6.0,
            y + 4.0,
            fmt_tick(t)
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        ml + pw / 2.0,
        h - 12.0,
        xml_escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {})\">{}</text>\n",
        mt + ph / 2.0,
        mt + ph / 2.0,
        xml_escape(y_label)
    ));

    for (si, s) in series.iter().enumerate() {
        if s.markers {
            for &(x, y) in &s.points {
                out.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.7\"/>\n",
                    sx(x),
                    sy(y),
                    s.color
                ));
            }
        } else if !s.points.is_empty() {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n",
                pts.join(" "),
                s.color
            ));
        }
        let ly = mt + 16.0 + 18.0 * si as f64;
        let lx = ml + pw + 12.0;
        if s.markers {
            out.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{}\"/>\n",
                lx + 9.0,
                ly - 4.0,
                s.color
            ));
        } else {
            out.push_str(&format!(
                "<line x1=\"{lx:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                ly - 4.0,
                lx + 18.0,
                ly - 4.0,
                s.color
            ));
        }
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"11\">{}</text>\n",
            lx + 24.0,
            xml_escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn hydrograph_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("q.csv");
        let pts = vec![(0.0, 400.0), (86_400.0, 1200.5)];
        write_hydrograph_csv(&p, &pts).unwrap();
        let back = read_hydrograph_csv(&p).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn hydrograph_rejects_wrong_header() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "t,q\n0,1\n").unwrap();
        let err = read_hydrograph_csv(&p).unwrap_err();
        assert!(err.to_string().contains("expected header"), "{err}");
    }

    #[test]
    fn rating_curve_round_trip_and_validation() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("rc.csv");
        let rc = RatingCurve {
            points: vec![(0.0, 1.0), (500.0, 3.0), (2000.0, 5.5)],
        };
        write_rating_curve_csv(&p, &rc).unwrap();
        assert_eq!(read_rating_curve_csv(&p).unwrap(), rc);

        fs::write(&p, "discharge_m3s,wse_m\n0,1\n10,0.5\n").unwrap();
        assert!(read_rating_curve_csv(&p).is_err());
    }

    #[test]
    fn gauge_obs_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let obs = vec![GaugeObservation {
            station_id: "TON".into(),
            time: 900.0,
            wse: 21.532,
            sigma: 0.25,
        }];
        write_gauge_obs_csv(&p, &obs).unwrap();
        let back = read_gauge_obs_csv(&p).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].station_id, "TON");
        assert!((back[0].wse - 21.532).abs() < 1e-9);
    }

    #[test]
    fn node_obs_round_trip_preserves_quality() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("n.csv");
        let obs = vec![
            NodeObservation {
                pass_id: 391,
                node_x: 100.0,
                time: 3600.0,
                wse: 20.1,
                sigma: 0.1,
                quality: NodeQuality::Good,
            },
            NodeObservation {
                pass_id: 391,
                node_x: 300.0,
                time: 3600.0,
                wse: 20.0,
                sigma: 0.5,
                quality: NodeQuality::Dark,
            },
        ];
        write_node_obs_csv(&p, &obs).unwrap();
        let back = read_node_obs_csv(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].quality, NodeQuality::Dark);
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let traj = vec![
            HydroState {
                time: 0.0,
                depth: vec![1.0, 2.0],
                discharge: vec![10.0, 10.0],
            },
            HydroState {
                time: 900.0,
                depth: vec![1.5, 2.5],
                discharge: vec![12.0, 11.0],
            },
        ];
        write_trajectory_csv(&p, &traj).unwrap();
        let back = read_trajectory_csv(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].depth, vec![1.5, 2.5]);
    }

    #[test]
    fn controls_round_trip_with_floodplain_column() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let cycles = vec![CycleRecord {
            cycle: 0,
            t_start: 0.0,
            t_end: 21_600.0,
            analyzed: ControlVector {
                ks: vec![10.0, 40.0, 41.0],
                mu: 1.05,
            },
            diagnostics: None,
        }];
        write_controls_csv(&p, &cycles, 2).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("cycle,t_start_s,t_end_s,ks_0,ks_1,ks_2,mu"));
        let back = read_controls_csv(&p).unwrap();
        assert_eq!(back[0].3.ks.len(), 3);
        assert!((back[0].3.mu - 1.05).abs() < 1e-9);
    }

    #[test]
    fn svg_chart_is_deterministic_and_well_formed() {
        let series = vec![
            Series {
                label: "truth".into(),
                color: palette(0),
                points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)],
                markers: false,
            },
            Series {
                label: "obs".into(),
                color: palette(1),
                points: vec![(0.5, 1.4), (1.5, 1.9)],
                markers: true,
            },
        ];
        let a = svg_line_chart("WL at TON", "time (d)", "WSE (m)", &series);
        let b = svg_line_chart("WL at TON", "time (d)", "WSE (m)", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("polyline"));
        assert!(a.contains("circle"));
    }
}
