use crate::error::{Error, Result};

use super::geometry::CrossSection;

/// Solves the Manning-Strickler relation q = K(h) * sqrt(slope) for the
/// steady uniform depth h by bisection, to |dh| < 1e-6 m.
///
/// The same `ks` is applied to the main channel and (for overbank depths)
/// the floodplain sub-area; this is an initialization helper, the zoned
/// coefficients enter through the solver's friction term.
pub fn steady_uniform_depth(q: f64, section: &CrossSection, ks: f64, slope: f64) -> Result<f64> {
    if q < 0.0 {
        return Err(Error::Argument(format!("discharge must be >= 0, got {q}")));
    }
    if !(ks > 0.0) {
        return Err(Error::Argument(format!("ks must be > 0, got {ks}")));
    }
    if !(slope > 0.0) {
        return Err(Error::Argument(format!("slope must be > 0, got {slope}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let sqrt_s = slope.sqrt();
    let flow = |h: f64| section.conveyance(h, ks, ks) * sqrt_s;

    // Bracket the root; conveyance is strictly increasing in h.
    let mut hi = 1.0;
    let mut grow = 0;
    while flow(hi) < q {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Solver {
                time: 0.0,
                message: format!("steady depth bracket failed for q={q}"),
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if flow(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-7 {
            break;
        }
    }
    if hi - lo >= 1e-6 {
        return Err(Error::Solver {
            time: 0.0,
            message: "steady depth bisection did not converge".into(),
        });
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(width: f64) -> CrossSection {
        CrossSection {
            main_width: width,
            bank_height: 1.0e6,
            floodplain_width: 0.0,
        }
    }

    #[test]
    fn zero_flow_gives_zero_depth() {
        assert_eq!(
            steady_uniform_depth(0.0, &rect(100.0), 40.0, 5e-4).unwrap(),
            0.0
        );
    }

    #[test]
    fn matches_closed_form_at_two_meters() {
        // Oracle: evaluate the closed form at h = 2 (A = 200, P = 104,
        // R = 200/104) and feed the resulting q back through bisection.
        let s = rect(100.0);
        let r: f64 = 200.0 / 104.0;
        let q = 40.0 * 200.0 * r.powf(2.0 / 3.0) * (5e-4f64).sqrt();
        assert!((q - 276.5).abs() < 0.5, "q = {q}");
        let h = steady_uniform_depth(q, &s, 40.0, 5e-4).unwrap();
        assert!((h - 2.0).abs() < 1e-6, "h = {h}");
    }

    #[test]
    fn depth_decreases_with_ks() {
        // Monotonicity over a grid of ks values at fixed q and slope.
        let s = rect(100.0);
        let mut prev = f64::INFINITY;
        for ks in [10.0, 20.0, 30.0, 40.0, 60.0, 80.0] {
            let h = steady_uniform_depth(300.0, &s, ks, 5e-4).unwrap();
            assert!(h < prev, "h not strictly decreasing at ks={ks}");
            prev = h;
        }
    }

    #[test]
    fn overbank_depth_uses_composite_conveyance() {
        let s = CrossSection {
            main_width: 100.0,
            bank_height: 2.0,
            floodplain_width: 300.0,
        };
        // At any overbank q the composite section conveys more, so depth is
        // smaller than for the pure rectangle of the same main width.
        let q = 1500.0;
        let h_comp = steady_uniform_depth(q, &s, 40.0, 5e-4).unwrap();
        let h_rect = steady_uniform_depth(q, &rect(100.0), 40.0, 5e-4).unwrap();
        assert!(h_comp > s.bank_height);
        assert!(h_comp < h_rect);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(steady_uniform_depth(-1.0, &rect(10.0), 40.0, 1e-4).is_err());
        assert!(steady_uniform_depth(10.0, &rect(10.0), 0.0, 1e-4).is_err());
        assert!(steady_uniform_depth(10.0, &rect(10.0), 40.0, 0.0).is_err());
    }
}
