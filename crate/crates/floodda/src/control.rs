//! Control vector (zoned Strickler coefficients plus inflow multiplier),
//! its priors and bounds, and the mapping into model inputs.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::river::{BoundaryForcing, RiverGeometry};

/// The quantity the EnKF estimates.
///
/// `ks` holds the Strickler coefficients in zone order. When its length is
/// one more than the geometry's riverbed zone count, index 0 is the
/// floodplain coefficient and 1..N the riverbed zones; otherwise all entries
/// are riverbed zones and the floodplain keeps its geometry default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub ks: Vec<f64>,
    /// Dimensionless inflow multiplier applied to the upstream hydrograph.
    pub mu: f64,
}

impl ControlVector {
    pub fn dim(&self) -> usize {
        self.ks.len() + 1
    }

    /// Flat component vector, ks entries followed by mu.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.ks.clone();
        v.push(self.mu);
        v
    }

    pub fn from_slice(v: &[f64]) -> ControlVector {
        let (mu, ks) = v.split_last().expect("control vector cannot be empty");
        ControlVector {
            ks: ks.to_vec(),
            mu: *mu,
        }
    }
}

/// Prior for one control component: a truncated gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentPrior {
    pub default: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ComponentPrior {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.lower > self.upper {
            return Err(Error::Config(format!(
                "prior '{name}': bounds out of order ({} > {})",
                self.lower, self.upper
            )));
        }
        if self.sd < 0.0 {
            return Err(Error::Config(format!("prior '{name}': sd must be >= 0")));
        }
        Ok(())
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    /// One draw from N(center, sd) truncated to the bounds.
    fn draw<R: Rng>(&self, center: f64, rng: &mut R) -> f64 {
        if self.sd == 0.0 || self.lower == self.upper {
            return self.clamp(center);
        }
        // Rejection sampling; the configured bounds are always several sd
        // wide so this terminates quickly. Fall back to projection if not.
        for _ in 0..1000 {
            let z: f64 = StandardNormal.sample(rng);
            let x = center + self.sd * z;
            if x >= self.lower && x <= self.upper {
                return x;
            }
        }
        self.clamp(center)
    }
}

/// Priors for the whole control vector; `ks` follows the same ordering
/// convention as [`ControlVector::ks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub ks: Vec<ComponentPrior>,
    pub mu: ComponentPrior,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.ks.iter().enumerate() {
            p.validate(&format!("ks[{i}]"))?;
        }
        self.mu.validate("mu")
    }

    /// The default (open-loop) control.
    pub fn default_control(&self) -> ControlVector {
        ControlVector {
            ks: self.ks.iter().map(|p| p.default).collect(),
            mu: self.mu.default,
        }
    }

    pub fn dim(&self) -> usize {
        self.ks.len() + 1
    }
}

/// Draws `n` independent members around the prior defaults, each component
/// truncated to its bounds. Deterministic given the seed.
pub fn sample_prior(spec: &PriorSpec, n: usize, seed: u64) -> Result<Vec<ControlVector>> {
    let center = spec.default_control();
    sample_around(spec, &center, n, seed)
}

/// Draws `n` members around an arbitrary center (used for per-cycle
/// re-perturbation of the analyzed control).
pub fn sample_around(
    spec: &PriorSpec,
    center: &ControlVector,
    n: usize,
    seed: u64,
) -> Result<Vec<ControlVector>> {
    if n < 2 {
        return Err(Error::Argument(format!(
            "ensemble size must be >= 2, got {n}"
        )));
    }
    if center.ks.len() != spec.ks.len() {
        return Err(Error::Config(format!(
            "control has {} ks components but prior defines {}",
            center.ks.len(),
            spec.ks.len()
        )));
    }
    let mut members = Vec::with_capacity(n);
    for member in 0..n {
        let mut rng = member_rng(seed, member as u64);
        members.push(draw_around(spec, center, &mut rng));
    }
    Ok(members)
}

/// One member draw around `center` with the prior spreads, truncated to
/// the bounds, consuming draws from the caller's stream.
pub fn draw_around<R: Rng>(spec: &PriorSpec, center: &ControlVector, rng: &mut R) -> ControlVector {
    draw_around_scaled(spec, center, &vec![1.0; spec.ks.len()], 1.0, rng)
}

/// Like [`draw_around`] but with each friction spread multiplied by the
/// matching entry of `scale_ks` and the inflow-multiplier spread by
/// `scale_mu` (the between-cycle re-perturbation keeps well-observed
/// quasi-static friction tight while intermittently observable components
/// stay adaptive).
pub fn draw_around_scaled<R: Rng>(
    spec: &PriorSpec,
    center: &ControlVector,
    scale_ks: &[f64],
    scale_mu: f64,
    rng: &mut R,
) -> ControlVector {
    debug_assert_eq!(scale_ks.len(), spec.ks.len());
    let scaled = |p: &ComponentPrior, s: f64| ComponentPrior { sd: p.sd * s, ..*p };
    let ks = spec
        .ks
        .iter()
        .zip(&center.ks)
        .zip(scale_ks)
        .map(|((p, &c), &s)| scaled(p, s).draw(c, rng))
        .collect();
    let mu = scaled(&spec.mu, scale_mu).draw(center.mu, rng);
    ControlVector { ks, mu }
}

/// Independent, reproducible stream for one ensemble member.
pub fn member_rng(seed: u64, member: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(member);
    rng
}

/// Replaces the zone coefficients and scales the hydrograph by `mu`.
/// Inputs are not mutated; whether the first ks entry is the floodplain is
/// inferred from the control dimension.
pub fn apply_control(
    control: &ControlVector,
    geom: &RiverGeometry,
    forcing: &BoundaryForcing,
) -> Result<(RiverGeometry, BoundaryForcing)> {
    let nz = geom.zones.len();
    let (fp_ks, bed_ks): (f64, &[f64]) = if control.ks.len() == nz {
        (geom.floodplain_ks, &control.ks)
    } else if control.ks.len() == nz + 1 {
        (control.ks[0], &control.ks[1..])
    } else {
        return Err(Error::Config(format!(
            "control has {} ks components but geometry has {} riverbed zones",
            control.ks.len(),
            nz
        )));
    };
    let mut geom_eff = geom.clone();
    geom_eff.floodplain_ks = fp_ks;
    for (z, &ks) in geom_eff.zones.iter_mut().zip(bed_ks) {
        z.ks = ks;
    }
    Ok((geom_eff, forcing.scaled(control.mu)))
}

/// Projects every component into its bounds; idempotent.
pub fn clamp(control: &ControlVector, spec: &PriorSpec) -> ControlVector {
    ControlVector {
        ks: control
            .ks
            .iter()
            .zip(&spec.ks)
            .map(|(&v, p)| p.clamp(v))
            .collect(),
        mu: spec.mu.clamp(control.mu),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::river::{CrossSection, FrictionZone, RatingCurve};
    use proptest::prelude::*;

    fn geom2() -> RiverGeometry {
        let n = 6;
        RiverGeometry::new(
            1200.0,
            vec![0.0; n],
            vec![
                CrossSection {
                    main_width: 100.0,
                    bank_height: 5.0,
                    floodplain_width: 200.0,
                };
                n
            ],
            vec![
                FrictionZone {
                    zone_id: 1,
                    x_start: 0.0,
                    x_end: 600.0,
                    ks: 40.0,
                },
                FrictionZone {
                    zone_id: 2,
                    x_start: 600.0,
                    x_end: 1200.0,
                    ks: 40.0,
                },
            ],
            10.0,
        )
        .unwrap()
    }

    fn forcing1() -> BoundaryForcing {
        BoundaryForcing {
            inflow_hydrograph: vec![(0.0, 100.0), (100.0, 300.0)],
            rating_curve: RatingCurve {
                points: vec![(0.0, 0.0), (1000.0, 5.0)],
            },
        }
    }

    fn spec2() -> PriorSpec {
        PriorSpec {
            ks: vec![
                ComponentPrior {
                    default: 10.0,
                    sd: 3.0,
                    lower: 2.0,
                    upper: 40.0,
                },
                ComponentPrior {
                    default: 40.0,
                    sd: 5.0,
                    lower: 10.0,
                    upper: 80.0,
                },
                ComponentPrior {
                    default: 40.0,
                    sd: 5.0,
                    lower: 10.0,
                    upper: 80.0,
                },
            ],
            mu: ComponentPrior {
                default: 1.0,
                sd: 0.1,
                lower: 0.5,
                upper: 1.5,
            },
        }
    }

    #[test]
    fn identity_control_leaves_inputs_unchanged() {
        let geom = geom2();
        let forcing = forcing1();
        let control = ControlVector {
            ks: vec![10.0, 40.0, 40.0],
            mu: 1.0,
        };
        let (g, f) = apply_control(&control, &geom, &forcing).unwrap();
        assert_eq!(g, geom);
        assert_eq!(f, forcing);
    }

    #[test]
    fn mu_scales_hydrograph_pointwise() {
        let (_, f) = apply_control(
            &ControlVector {
                ks: vec![40.0, 40.0],
                mu: 0.8,
            },
            &geom2(),
            &forcing1(),
        )
        .unwrap();
        assert_eq!(f.inflow_hydrograph, vec![(0.0, 80.0), (100.0, 240.0)]);
    }

    #[test]
    fn floodplain_entry_inferred_from_length() {
        let geom = geom2();
        let forcing = forcing1();
        let (g, _) = apply_control(
            &ControlVector {
                ks: vec![7.0, 30.0, 50.0],
                mu: 1.0,
            },
            &geom,
            &forcing,
        )
        .unwrap();
        assert_eq!(g.floodplain_ks, 7.0);
        assert_eq!(g.zones[0].ks, 30.0);
        assert_eq!(g.zones[1].ks, 50.0);
        // Riverbed-only control keeps the floodplain default.
        let (g, _) = apply_control(
            &ControlVector {
                ks: vec![30.0, 50.0],
                mu: 1.0,
            },
            &geom,
            &forcing,
        )
        .unwrap();
        assert_eq!(g.floodplain_ks, 10.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(apply_control(
            &ControlVector {
                ks: vec![30.0],
                mu: 1.0
            },
            &geom2(),
            &forcing1(),
        )
        .is_err());
    }

    #[test]
    fn zone_locality_of_conveyance() {
        // Changing zone 2's ks alters conveyance only in zone-2 cells.
        let geom = geom2();
        let (g, _) = apply_control(
            &ControlVector {
                ks: vec![40.0, 28.0],
                mu: 1.0,
            },
            &geom,
            &forcing1(),
        )
        .unwrap();
        for i in 0..geom.cell_count {
            let before = geom.section[i].conveyance(3.0, geom.cell_ks(i), geom.floodplain_ks);
            let after = g.section[i].conveyance(3.0, g.cell_ks(i), g.floodplain_ks);
            if geom.cell_zone[i] == 1 {
                assert!(after < before);
            } else {
                assert_eq!(after, before);
            }
        }
    }

    #[test]
    fn zero_sd_collapses_to_default() {
        let mut spec = spec2();
        for p in &mut spec.ks {
            p.sd = 0.0;
        }
        spec.mu.sd = 0.0;
        let members = sample_prior(&spec, 5, 7).unwrap();
        for m in &members {
            assert_eq!(*m, spec.default_control());
        }
    }

    #[test]
    fn same_seed_same_population() {
        let spec = spec2();
        let a = sample_prior(&spec, 20, 42).unwrap();
        let b = sample_prior(&spec, 20, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_prior(&spec, 20, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn draws_respect_bounds() {
        let mut spec = spec2();
        spec.mu.sd = 0.5; // wide, so truncation actually bites
        let members = sample_prior(&spec, 2000, 11).unwrap();
        for m in &members {
            assert!(m.mu >= 0.5 && m.mu <= 1.5);
            for (v, p) in m.ks.iter().zip(&spec.ks) {
                assert!(*v >= p.lower && *v <= p.upper);
            }
        }
    }

    #[test]
    fn sample_mean_matches_truncated_normal_moment() {
        // Oracle: E[X] = mu + sd * (phi(a) - phi(b)) / (Phi(b) - Phi(a))
        // for X ~ N(mu, sd) truncated to [lo, hi], a = (lo-mu)/sd etc.
        use statrs::distribution::{Continuous, ContinuousCDF, Normal};
        let spec = PriorSpec {
            ks: vec![],
            mu: ComponentPrior {
                default: 1.0,
                sd: 0.1,
                lower: 0.95, // asymmetric truncation
                upper: 1.5,
            },
        };
        let n = 10_000;
        let members = sample_around(
            &spec,
            &ControlVector { ks: vec![], mu: 1.0 },
            n,
            123,
        )
        .unwrap();
        let mean = members.iter().map(|m| m.mu).sum::<f64>() / n as f64;

        let std_norm = Normal::new(0.0, 1.0).unwrap();
        let a = (0.95 - 1.0) / 0.1;
        let b = (1.5 - 1.0) / 0.1;
        let z = std_norm.cdf(b) - std_norm.cdf(a);
        let expected = 1.0 + 0.1 * (std_norm.pdf(a) - std_norm.pdf(b)) / z;
        let var = 0.1f64.powi(2)
            * (1.0 + (a * std_norm.pdf(a) - b * std_norm.pdf(b)) / z
                - ((std_norm.pdf(a) - std_norm.pdf(b)) / z).powi(2));
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs expected {expected} (se {se})"
        );
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent_and_bounded(
            ks0 in -50.0..150.0f64,
            ks1 in -50.0..150.0f64,
            ks2 in -50.0..150.0f64,
            mu in -2.0..4.0f64,
        ) {
            let spec = spec2();
            let c = ControlVector { ks: vec![ks0, ks1, ks2], mu };
            let once = clamp(&c, &spec);
            let twice = clamp(&once, &spec);
            prop_assert_eq!(&once, &twice);
            for (v, p) in once.ks.iter().zip(&spec.ks) {
                prop_assert!(*v >= p.lower && *v <= p.upper);
            }
            prop_assert!(once.mu >= spec.mu.lower && once.mu <= spec.mu.upper);
        }

        #[test]
        fn clamp_never_moves_in_bounds_components(
            ks0 in 2.0..40.0f64,
            ks1 in 10.0..80.0f64,
            ks2 in 10.0..80.0f64,
            mu in 0.5..1.5f64,
        ) {
            let spec = spec2();
            let c = ControlVector { ks: vec![ks0, ks1, ks2], mu };
            prop_assert_eq!(&clamp(&c, &spec), &c);
        }
    }
}
