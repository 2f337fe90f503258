use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::types::SwathPass;

/// Nominal repeat cycle of the wide-swath altimeter, s.
pub const NOMINAL_CYCLE_S: f64 = 21.0 * 86_400.0;

/// Overpass scheduling strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "interval_s")]
pub enum PassPlanKind {
    /// Each pass once per 21-day repeat cycle, using the pass's own coverage.
    Nominal21d,
    /// Three times as many overpasses as nominal (2-3 day sampling),
    /// all with full spatial coverage.
    Tripled,
    /// Evenly spaced overpasses at the given interval, pass ids cycled
    /// round-robin, all with full spatial coverage.
    FixedInterval(f64),
}

/// One scheduled overpass: which pass, when, and what it covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledOverpass {
    pub pass_id: u32,
    pub time: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

/// Builds the sorted overpass schedule over `window` = [t_start, t_end].
/// `reach_length` defines full coverage for the plans that use it.
pub fn build_pass_plan(
    kind: PassPlanKind,
    window: (f64, f64),
    passes: &[SwathPass],
    reach_length: f64,
) -> Result<Vec<ScheduledOverpass>> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::Config("pass plan event window is empty".into()));
    }
    if passes.is_empty() {
        return Err(Error::Config("pass plan needs at least one pass".into()));
    }
    for p in passes {
        p.validate()?;
    }
    let eps = 1e-6;
    let mut out = Vec::new();
    match kind {
        PassPlanKind::Nominal21d => {
            let np = passes.len() as f64;
            for (k, p) in passes.iter().enumerate() {
                let offset = (k as f64 + 0.5) / np * NOMINAL_CYCLE_S;
                let mut t = t0 + offset;
                while t <= t1 + eps {
                    out.push(ScheduledOverpass {
                        pass_id: p.pass_id,
                        time: t,
                        x_lo: p.x_lo,
                        x_hi: p.x_hi,
                    });
                    t += NOMINAL_CYCLE_S;
                }
            }
        }
        PassPlanKind::Tripled => {
            let interval = NOMINAL_CYCLE_S / (3.0 * passes.len() as f64);
            schedule_fixed(&mut out, t0, t1, interval, passes, reach_length, eps);
        }
        PassPlanKind::FixedInterval(dt) => {
            if !(dt > 0.0) {
                return Err(Error::Config(format!(
                    "fixed_interval pass plan needs interval > 0, got {dt}"
                )));
            }
            schedule_fixed(&mut out, t0, t1, dt, passes, reach_length, eps);
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.pass_id.cmp(&b.pass_id)));
    Ok(out)
}

fn schedule_fixed(
    out: &mut Vec<ScheduledOverpass>,
    t0: f64,
    t1: f64,
    interval: f64,
    passes: &[SwathPass],
    reach_length: f64,
    eps: f64,
) {
    let mut k = 1u64;
    loop {
        let t = t0 + k as f64 * interval;
        if t > t1 + eps {
            break;
        }
        let p = &passes[((k - 1) as usize) % passes.len()];
        out.push(ScheduledOverpass {
            pass_id: p.pass_id,
            time: t,
            x_lo: 0.0,
            x_hi: reach_length,
        });
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_passes() -> Vec<SwathPass> {
        vec![
            SwathPass {
                pass_id: 42,
                x_lo: 15_000.0,
                x_hi: 50_000.0,
                overpass_times: vec![],
            },
            SwathPass {
                pass_id: 113,
                x_lo: 0.0,
                x_hi: 30_000.0,
                overpass_times: vec![],
            },
            SwathPass {
                pass_id: 391,
                x_lo: 0.0,
                x_hi: 50_000.0,
                overpass_times: vec![],
            },
        ]
    }

    #[test]
    fn fixed_interval_daily_over_45_days() {
        let day = 86_400.0;
        let plan = build_pass_plan(
            PassPlanKind::FixedInterval(day),
            (0.0, 45.0 * day),
            &three_passes(),
            50_000.0,
        )
        .unwrap();
        assert_eq!(plan.len(), 45);
        // Full coverage convention for synthetic fixed-interval plans.
        assert!(plan.iter().all(|s| s.x_lo == 0.0 && s.x_hi == 50_000.0));
    }

    #[test]
    fn tripled_gives_nine_overpasses_per_cycle() {
        let day = 86_400.0;
        let plan = build_pass_plan(
            PassPlanKind::Tripled,
            (0.0, 21.0 * day),
            &three_passes(),
            50_000.0,
        )
        .unwrap();
        assert_eq!(plan.len(), 9);
        let mut prev = 0.0;
        for s in &plan {
            assert!(s.time - prev <= 3.0 * day + 1e-6, "gap exceeds 3 days");
            prev = s.time;
        }
    }

    #[test]
    fn six_hourly_refines_twelve_hourly() {
        let h = 3600.0;
        let window = (0.0, 10.0 * 86_400.0);
        let coarse = build_pass_plan(
            PassPlanKind::FixedInterval(12.0 * h),
            window,
            &three_passes(),
            50_000.0,
        )
        .unwrap();
        let fine = build_pass_plan(
            PassPlanKind::FixedInterval(6.0 * h),
            window,
            &three_passes(),
            50_000.0,
        )
        .unwrap();
        let fine_times: Vec<f64> = fine.iter().map(|s| s.time).collect();
        for s in &coarse {
            assert!(fine_times.iter().any(|&t| (t - s.time).abs() < 1e-6));
        }
    }

    #[test]
    fn nominal_keeps_partial_coverage() {
        let day = 86_400.0;
        let plan = build_pass_plan(
            PassPlanKind::Nominal21d,
            (0.0, 21.0 * day),
            &three_passes(),
            50_000.0,
        )
        .unwrap();
        assert_eq!(plan.len(), 3);
        let p42 = plan.iter().find(|s| s.pass_id == 42).unwrap();
        assert_eq!(p42.x_lo, 15_000.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_pass_plan(
            PassPlanKind::FixedInterval(0.0),
            (0.0, 100.0),
            &three_passes(),
            50_000.0
        )
        .is_err());
        assert!(build_pass_plan(
            PassPlanKind::Tripled,
            (100.0, 100.0),
            &three_passes(),
            50_000.0
        )
        .is_err());
    }
}
