//! Skill metrics on small hand-built fixtures: water-level RMSE, flood
//! extent critical success index (CSI), along-track profile RMSE, and the
//! assembled experiment score table.
//!
//! Run with: cargo run --example scoring

use floodda::metrics::{build_score_table, csi, profile_rmse, rmse, ScoreRow};
use floodda::river::ExtentMask;
use floodda::Result;

fn main() -> Result<()> {
    // RMSE of a model series against observations.
    let model = vec![10.2, 10.8, 11.5, 12.1];
    let obs = vec![10.0, 11.0, 11.4, 12.4];
    println!("rmse          = {:.4} m", rmse(&model, &obs)?);

    // CSI compares flooded-cell masks: hits / (hits + misses + false alarms).
    let truth = ExtentMask {
        channel: vec![true; 8],
        floodplain: vec![false, false, true, true, true, true, false, false],
    };
    let mut model_mask = truth.clone();
    model_mask.floodplain[2] = false; // one miss
    model_mask.floodplain[6] = true; // one false alarm
    println!("csi           = {:.3} %", csi(&model_mask, &truth)?);
    println!("csi (perfect) = {:.3} %", csi(&truth, &truth)?);

    // Profile RMSE over (model, observed) node WSE pairs of one overpass.
    let pairs = vec![(21.02, 21.0), (20.63, 20.7), (20.31, 20.3), (19.98, 20.1)];
    println!("profile rmse  = {:.4} m", profile_rmse(&pairs)?);

    // A score table over two toy experiments and two stations.
    let table = build_score_table(
        vec!["MD0".to_string(), "LR0".to_string()],
        vec![false, true],
        vec![17.0 * 86_400.0],
        vec!["pass42".to_string()],
        vec![
            ScoreRow {
                experiment: "OL".to_string(),
                station_rmse: vec![0.42, 0.31],
                snapshot_csi: vec![84.5],
                profile_rmse: vec![0.38],
            },
            ScoreRow {
                experiment: "IDA".to_string(),
                station_rmse: vec![0.05, 0.04],
                snapshot_csi: vec![97.2],
                profile_rmse: vec![0.07],
            },
        ],
    )?;
    println!("\n{}", table.to_text());
    Ok(())
}
