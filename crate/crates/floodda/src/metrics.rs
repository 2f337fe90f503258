//! Quantitative assessment: RMSE against gauge and profile observations,
//! CSI against reference flood extent masks, and score-table assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::river::ExtentMask;

/// Root-mean-square error between two equal-length series.
pub fn rmse(model: &[f64], obs: &[f64]) -> Result<f64> {
    if model.is_empty() {
        return Err(Error::Argument("rmse needs at least one sample".into()));
    }
    if model.len() != obs.len() {
        return Err(Error::Argument(format!(
            "rmse length mismatch: {} vs {}",
            model.len(),
            obs.len()
        )));
    }
    let ss: f64 = model
        .iter()
        .zip(obs)
        .map(|(m, o)| (m - o) * (m - o))
        .sum();
    Ok((ss / model.len() as f64).sqrt())
}

/// Critical success index in percent: TP / (TP + FP + FN) * 100, over the
/// stacked channel and floodplain flags. Both masks empty is an error (CSI
/// is only computed at snapshots where the reference extent is nonempty).
pub fn csi(model: &ExtentMask, reference: &ExtentMask) -> Result<f64> {
    if model.channel.len() != reference.channel.len()
        || model.floodplain.len() != reference.floodplain.len()
    {
        return Err(Error::Argument("csi mask shape mismatch".into()));
    }
    if !model.any_wet() && !reference.any_wet() {
        return Err(Error::Argument(
            "csi undefined: both masks are empty".into(),
        ));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    let pairs = model
        .channel
        .iter()
        .zip(&reference.channel)
        .chain(model.floodplain.iter().zip(&reference.floodplain));
    for (&m, &r) in pairs {
        match (m, r) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(tp as f64 / (tp + fp + fn_) as f64 * 100.0)
}

/// RMSE of a spatial WSE profile against matched node/profile observations.
/// `pairs` holds (model, observed) values at the same abscissae.
pub fn profile_rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Argument(
            "profile_rmse needs at least one matched point".into(),
        ));
    }
    let model: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let obs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    rmse(&model, &obs)
}

/// One experiment's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub experiment: String,
    /// RMSE per station, m (aligned with `ScoreTable::station_names`).
    pub station_rmse: Vec<f64>,
    /// CSI per snapshot, percent (aligned with `ScoreTable::snapshot_times`).
    pub snapshot_csi: Vec<f64>,
    /// Profile RMSE per overpass, m (aligned with `ScoreTable::pass_labels`).
    pub profile_rmse: Vec<f64>,
}

/// Summary table mirroring the usual per-experiment layout: station RMSE
/// columns (validation stations marked), CSI columns per extent snapshot,
/// and profile RMSE columns per overpass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub station_names: Vec<String>,
    /// True where the station is validation-only.
    pub validation: Vec<bool>,
    pub snapshot_times: Vec<f64>,
    pub pass_labels: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

/// Assembles the table, keeping `rows` order; rows whose shapes do not
/// match the header are dropped with a warning entry left out.
pub fn build_score_table(
    station_names: Vec<String>,
    validation: Vec<bool>,
    snapshot_times: Vec<f64>,
    pass_labels: Vec<String>,
    rows: Vec<ScoreRow>,
) -> Result<ScoreTable> {
    if station_names.len() != validation.len() {
        return Err(Error::Argument(
            "station names and validation flags must align".into(),
        ));
    }
    let rows = rows
        .into_iter()
        .filter(|r| {
            let ok = r.station_rmse.len() == station_names.len()
                && r.snapshot_csi.len() == snapshot_times.len()
                && r.profile_rmse.len() == pass_labels.len();
            if !ok {
                eprintln!(
                    "warning: score row '{}' has mismatched shape, omitted",
                    r.experiment
                );
            }
            ok
        })
        .collect();
    Ok(ScoreTable {
        station_names,
        validation,
        snapshot_times,
        pass_labels,
        rows,
    })
}

impl ScoreTable {
    /// CSV rendering: one header, one row per experiment.
    pub fn to_csv_string(&self) -> String {
        let mut header = vec!["experiment".to_string()];
        for (name, &val) in self.station_names.iter().zip(&self.validation) {
            let tag = if val { "_validation" } else { "" };
            header.push(format!("rmse_{name}{tag}_m"));
        }
        for t in &self.snapshot_times {
            header.push(format!("csi_t{}_pct", fmt_time(*t)));
        }
        for p in &self.pass_labels {
            header.push(format!("profile_rmse_{p}_m"));
        }
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![r.experiment.clone()];
            fields.extend(r.station_rmse.iter().map(|v| format!("{v:.6}")));
            fields.extend(r.snapshot_csi.iter().map(|v| format!("{v:.3}")));
            fields.extend(r.profile_rmse.iter().map(|v| format!("{v:.6}")));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Aligned-column plain-text rendering; validation stations are
    /// bracketed the way the usual summary tables italicize them.
    pub fn to_text(&self) -> String {
        let mut cols: Vec<String> = vec!["Exp.".into()];
        for (name, &val) in self.station_names.iter().zip(&self.validation) {
            cols.push(if val {
                format!("[{name}]")
            } else {
                name.clone()
            });
        }
        for t in &self.snapshot_times {
            cols.push(format!("CSI@{}", fmt_time(*t)));
        }
        for p in &self.pass_labels {
            cols.push(format!("prof:{p}"));
        }
        let mut grid: Vec<Vec<String>> = vec![cols];
        for r in &self.rows {
            let mut row = vec![r.experiment.clone()];
            row.extend(r.station_rmse.iter().map(|v| format!("{v:.3}")));
            row.extend(r.snapshot_csi.iter().map(|v| format!("{v:.2}")));
            row.extend(r.profile_rmse.iter().map(|v| format!("{v:.3}")));
            grid.push(row);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (ri, row) in grid.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect();
            out.push_str(&line.join("  "));
            out.push('\n');
            if ri == 0 {
                let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }
}

fn fmt_time(t: f64) -> String {
    let day = 86_400.0;
    if t >= day && (t / day).fract().abs() < 1e-9 {
        format!("{}d", (t / day) as i64)
    } else {
        format!("{}s", t as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(channel: &[bool], floodplain: &[bool]) -> ExtentMask {
        ExtentMask {
            channel: channel.to_vec(),
            floodplain: floodplain.to_vec(),
        }
    }

    #[test]
    fn rmse_identical_series_is_zero() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn rmse_hand_value() {
        // sqrt((9 + 16) / 2) = sqrt(12.5)
        let v = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 12.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rmse_constant_offset() {
        let model = [1.0, 2.0, 3.0, 4.0];
        let obs: Vec<f64> = model.iter().map(|v| v + 0.7).collect();
        assert!((rmse(&model, &obs).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rmse_rejects_empty_and_mismatched() {
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn csi_identical_nonempty_masks() {
        let m = mask(&[true, true, false], &[false, true, false]);
        assert_eq!(csi(&m, &m).unwrap(), 100.0);
    }

    #[test]
    fn csi_hand_value() {
        // TP = 75, FP = 15, FN = 10 -> 75%.
        let mut model = vec![false; 120];
        let mut reference = vec![false; 120];
        for i in 0..75 {
            model[i] = true;
            reference[i] = true;
        }
        for i in 75..90 {
            model[i] = true;
        }
        for i in 90..100 {
            reference[i] = true;
        }
        let m = mask(&model, &[]);
        let r = mask(&reference, &[]);
        assert_eq!(csi(&m, &r).unwrap(), 75.0);
    }

    #[test]
    fn csi_disjoint_masks_is_zero() {
        let m = mask(&[true, false], &[false, false]);
        let r = mask(&[false, true], &[false, false]);
        assert_eq!(csi(&m, &r).unwrap(), 0.0);
    }

    #[test]
    fn csi_both_empty_is_error() {
        let m = mask(&[false, false], &[false]);
        assert!(csi(&m, &m).is_err());
    }

    #[test]
    fn profile_rmse_hand_cases() {
        assert_eq!(
            profile_rmse(&[(10.0, 10.0), (11.0, 11.0)]).unwrap(),
            0.0
        );
        let biased: Vec<(f64, f64)> = [10.0, 11.0, 12.0].iter().map(|&w| (w + 0.2, w)).collect();
        assert!((profile_rmse(&biased).unwrap() - 0.2).abs() < 1e-12);
        // Restricted 3-node case recomputed by hand:
        // errors 0.1, -0.3, 0.2 -> sqrt((0.01+0.09+0.04)/3)
        let pairs = [(10.1, 10.0), (10.7, 11.0), (12.2, 12.0)];
        let expected = ((0.01f64 + 0.09 + 0.04) / 3.0).sqrt();
        assert!((profile_rmse(&pairs).unwrap() - expected).abs() < 1e-12);
        assert!(profile_rmse(&[]).is_err());
    }

    #[test]
    fn score_table_keeps_order_and_drops_misshaped_rows() {
        let rows = vec![
            ScoreRow {
                experiment: "OL".into(),
                station_rmse: vec![0.1, 0.2],
                snapshot_csi: vec![90.0],
                profile_rmse: vec![],
            },
            ScoreRow {
                experiment: "BAD".into(),
                station_rmse: vec![0.1],
                snapshot_csi: vec![],
                profile_rmse: vec![],
            },
            ScoreRow {
                experiment: "IDA".into(),
                station_rmse: vec![0.05, 0.04],
                snapshot_csi: vec![98.0],
                profile_rmse: vec![],
            },
        ];
        let t = build_score_table(
            vec!["TON".into(), "LR0".into()],
            vec![false, false],
            vec![20.0 * 86_400.0],
            vec![],
            rows,
        )
        .unwrap();
        let names: Vec<&str> = t.rows.iter().map(|r| r.experiment.as_str()).collect();
        assert_eq!(names, vec!["OL", "IDA"]);
        let csv = t.to_csv_string();
        assert!(csv.contains("csi_t20d_pct"));
        let text = t.to_text();
        assert!(text.contains("CSI@20d"));
    }

    proptest! {
        #[test]
        fn rmse_is_symmetric(a in proptest::collection::vec(-100.0..100.0f64, 1..40),
                             b in proptest::collection::vec(-100.0..100.0f64, 1..40)) {
            let n = a.len().min(b.len());
            let x = &a[..n];
            let y = &b[..n];
            let r1 = rmse(x, y).unwrap();
            let r2 = rmse(y, x).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-12);
        }
    }
}
