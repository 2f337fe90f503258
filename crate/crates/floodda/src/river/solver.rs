use serde::{Deserialize, Serialize};

use crate::control::ControlVector;
use crate::error::{Error, Result};

use super::geometry::{BoundaryForcing, CrossSection, RiverGeometry};
use super::GRAVITY;

/// Wetting/drying threshold: below this depth a cell carries zero momentum flux.
pub const H_DRY: f64 = 1e-3;

/// Per-cell hydraulic state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroState {
    /// Seconds since event start.
    pub time: f64,
    /// Water depth per cell, m.
    pub depth: Vec<f64>,
    /// Discharge per cell, m^3/s.
    pub discharge: Vec<f64>,
}

impl HydroState {
    /// Water surface elevation of cell `i`, m above datum.
    pub fn wse(&self, geom: &RiverGeometry, i: usize) -> f64 {
        geom.bed_elevation[i] + self.depth[i]
    }

    /// Total stored volume, m^3.
    pub fn volume(&self, geom: &RiverGeometry) -> f64 {
        let dx = geom.dx();
        self.depth
            .iter()
            .zip(&geom.section)
            .map(|(&h, s)| s.area(h) * dx)
            .sum()
    }
}

/// Flux accounting across a simulated interval.
#[derive(Debug, Clone, Copy, Default)]
pub struct MassBudget {
    pub inflow_volume: f64,
    pub outflow_volume: f64,
    /// Volume added by clamping negative depths back to zero, m^3.
    pub clamped_volume: f64,
}

/// Time integration options.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Courant number used when choosing dt adaptively. Must be <= 0.9.
    pub courant: f64,
    /// Hard cap on dt, s.
    pub dt_max: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            courant: 0.5,
            dt_max: 600.0,
        }
    }
}

/// Reusable work buffers for the flux sweep.
#[derive(Debug, Default)]
pub struct SolverScratch {
    d_eta: Vec<f64>,
    d_q: Vec<f64>,
    f_mass: Vec<f64>,
    f_mom: Vec<f64>,
    eta_face: Vec<f64>,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Gravity-wave celerity for a composite section. The mean-depth form
/// sqrt(g*A/T) underestimates the signal speed once shallow floodplain
/// area inflates T, so the full channel depth provides the lower bound;
/// for an in-bank rectangular channel the two coincide.
fn celerity(s: &CrossSection, h: f64) -> f64 {
    (GRAVITY * (s.area(h) / s.top_width(h)).max(h)).sqrt()
}

/// Largest signal speed |u| + c over wet cells, with the limiting cell index.
fn max_signal_speed(state: &HydroState, geom: &RiverGeometry) -> (f64, usize) {
    let mut lam = 0.0;
    let mut cell = 0;
    for i in 0..geom.cell_count {
        let h = state.depth[i];
        if h <= H_DRY {
            continue;
        }
        let s = &geom.section[i];
        let a = s.area(h);
        let u = state.discharge[i] / a;
        let c = celerity(s, h);
        let l = u.abs() + c;
        if l > lam {
            lam = l;
            cell = i;
        }
    }
    (lam, cell)
}

/// One explicit step on inputs that already carry the control (zone `ks`
/// overridden, hydrograph scaled). Returns the new state and the boundary
/// fluxes realized over the step.
pub fn step_effective(
    state: &HydroState,
    geom: &RiverGeometry,
    forcing: &BoundaryForcing,
    dt: f64,
    scratch: &mut SolverScratch,
) -> Result<(HydroState, MassBudget)> {
    let n = geom.cell_count;
    debug_assert_eq!(state.depth.len(), n);
    let dx = geom.dx();
    let t = state.time;

    let (lam, limiting) = max_signal_speed(state, geom);
    if lam > 0.0 {
        let limit = 0.9 * dx / lam;
        if dt > limit {
            return Err(Error::CflViolation {
                time: t,
                dt,
                limit,
                cell: limiting,
            });
        }
    }

    let h = &state.depth;
    let q = &state.discharge;
    let zb = &geom.bed_elevation;
    let eta = |i: usize| zb[i] + h[i];

    // MUSCL half-increments of WSE and discharge; zero next to dry cells
    // so the reconstruction never digs below the bed. Boundary cells take
    // the one-sided interior difference so a uniform-slope profile is
    // reconstructed exactly up to the ends of the reach.
    scratch.d_eta.clear();
    scratch.d_eta.resize(n, 0.0);
    scratch.d_q.clear();
    scratch.d_q.resize(n, 0.0);
    for i in 1..n - 1 {
        if h[i] > H_DRY && h[i - 1] > H_DRY && h[i + 1] > H_DRY {
            scratch.d_eta[i] = 0.5 * minmod(eta(i) - eta(i - 1), eta(i + 1) - eta(i));
            scratch.d_q[i] = 0.5 * minmod(q[i] - q[i - 1], q[i + 1] - q[i]);
        }
    }
    if n >= 2 {
        if h[0] > H_DRY && h[1] > H_DRY {
            scratch.d_eta[0] = 0.5 * (eta(1) - eta(0));
            scratch.d_q[0] = 0.5 * (q[1] - q[0]);
        }
        if h[n - 1] > H_DRY && h[n - 2] > H_DRY {
            scratch.d_eta[n - 1] = 0.5 * (eta(n - 1) - eta(n - 2));
            scratch.d_q[n - 1] = 0.5 * (q[n - 1] - q[n - 2]);
        }
    }

    scratch.f_mass.clear();
    scratch.f_mass.resize(n + 1, 0.0);
    scratch.f_mom.clear();
    scratch.f_mom.resize(n + 1, 0.0);
    scratch.eta_face.clear();
    scratch.eta_face.resize(n + 1, 0.0);

    // Interior interfaces j between cells j-1 and j.
    for j in 1..n {
        let (l, r) = (j - 1, j);
        let eta_l = eta(l) + scratch.d_eta[l];
        let eta_r = eta(r) - scratch.d_eta[r];
        let q_l = q[l] + scratch.d_q[l];
        let q_r = q[r] - scratch.d_q[r];
        let z_face = zb[l].max(zb[r]);
        let h_lf = (eta_l - z_face).max(0.0);
        let h_rf = (eta_r - z_face).max(0.0);
        let sl = &geom.section[l];
        let sr = &geom.section[r];
        let a_lf = sl.area(h_lf);
        let a_rf = sr.area(h_rf);

        let (u_l, c_l) = if h_lf > H_DRY {
            (q_l / a_lf, celerity(sl, h_lf))
        } else {
            (0.0, 0.0)
        };
        let (u_r, c_r) = if h_rf > H_DRY {
            (q_r / a_rf, celerity(sr, h_rf))
        } else {
            (0.0, 0.0)
        };
        let lam_f = (u_l.abs() + c_l).max(u_r.abs() + c_r);

        let ql_eff = u_l * a_lf;
        let qr_eff = u_r * a_rf;
        scratch.f_mass[j] = 0.5 * (ql_eff + qr_eff) - 0.5 * lam_f * (a_rf - a_lf);
        scratch.f_mom[j] = 0.5 * (u_l * ql_eff + u_r * qr_eff) - 0.5 * lam_f * (qr_eff - ql_eff);

        scratch.eta_face[j] = if h_lf > H_DRY && h_rf > H_DRY {
            0.5 * (eta_l + eta_r)
        } else if h_lf > H_DRY {
            eta_l
        } else if h_rf > H_DRY {
            eta_r
        } else {
            z_face
        };
    }

    // Upstream boundary: imposed inflow through the reconstructed face
    // state. The face bed is extrapolated from the first two cells so the
    // face depth follows the same upstream-center convention as the
    // interior interfaces.
    let q_in = forcing.inflow(t);
    scratch.f_mass[0] = q_in;
    let z_up = if n >= 2 {
        zb[0].max(2.0 * zb[0] - zb[1])
    } else {
        zb[0]
    };
    let h_up = (eta(0) - scratch.d_eta[0] - z_up).max(0.0);
    let u_up = if h_up > H_DRY {
        q_in / geom.section[0].area(h_up)
    } else {
        0.0
    };
    scratch.f_mom[0] = q_in * u_up;
    scratch.eta_face[0] = eta(0) - scratch.d_eta[0];

    // Downstream boundary: WSE from the rating curve at the last interior
    // cell's discharge, applied through a ghost cell on the same bed.
    let eta_bc = forcing.rating_curve.wse(q[n - 1]);
    {
        let l = n - 1;
        let sl = &geom.section[l];
        let eta_l = eta(l) + scratch.d_eta[l];
        let q_l = q[l] + scratch.d_q[l];
        let h_lf = (eta_l - zb[l]).max(0.0);
        let h_g = (eta_bc - zb[l]).max(0.0);
        let a_l = sl.area(h_lf);
        let a_g = sl.area(h_g);
        let (u_l, c_l) = if h_lf > H_DRY {
            (q_l / a_l, celerity(sl, h_lf))
        } else {
            (0.0, 0.0)
        };
        let (u_g, c_g) = if h_g > H_DRY {
            (q_l / a_g, celerity(sl, h_g))
        } else {
            (0.0, 0.0)
        };
        let lam_f = (u_l.abs() + c_l).max(u_g.abs() + c_g);
        let ql_eff = u_l * a_l;
        let qg_eff = u_g * a_g;
        scratch.f_mass[n] = 0.5 * (ql_eff + qg_eff) - 0.5 * lam_f * (a_g - a_l);
        scratch.f_mom[n] = 0.5 * (u_l * ql_eff + u_g * qg_eff) - 0.5 * lam_f * (qg_eff - ql_eff);
        scratch.eta_face[n] = if h_lf > H_DRY {
            0.5 * (eta_l + eta_bc)
        } else {
            eta(l)
        };
    }

    let mut new = HydroState {
        time: t + dt,
        depth: vec![0.0; n],
        discharge: vec![0.0; n],
    };
    let mut budget = MassBudget {
        inflow_volume: q_in * dt,
        outflow_volume: scratch.f_mass[n] * dt,
        clamped_volume: 0.0,
    };

    for i in 0..n {
        let s = &geom.section[i];
        let a_old = s.area(h[i]);
        let mut a_new = a_old + dt / dx * (scratch.f_mass[i] - scratch.f_mass[i + 1]);
        if a_new < 0.0 {
            budget.clamped_volume += -a_new * dx;
            a_new = 0.0;
        }
        let h_new = s.depth_from_area(a_new);
        new.depth[i] = h_new;

        if h_new <= H_DRY {
            new.discharge[i] = 0.0;
            continue;
        }
        let grad_eta = (scratch.eta_face[i + 1] - scratch.eta_face[i]) / dx;
        let q_star = q[i]
            + dt * (-(scratch.f_mom[i + 1] - scratch.f_mom[i]) / dx - GRAVITY * a_old * grad_eta);
        let ks_bed = geom.cell_ks(i);
        let conv = s.conveyance(h_new, ks_bed, geom.floodplain_ks);
        if conv <= 0.0 {
            new.discharge[i] = 0.0;
            continue;
        }
        // Implicit friction: solve q + alpha*q*|q| = q_star exactly so the
        // friction slope is evaluated at the end-of-step discharge. With the
        // linearized form (dividing by |q_star|) the gravity increment leaks
        // into the friction magnitude and biases steady uniform flow by
        // O(dt*g*S0/u); the exact solve keeps normal depth a fixed point.
        let alpha = dt * GRAVITY * a_new / (conv * conv);
        let disc = (1.0 + 4.0 * alpha * q_star.abs()).sqrt();
        new.discharge[i] = 2.0 * q_star / (1.0 + disc);
        if !new.discharge[i].is_finite() || !h_new.is_finite() {
            return Err(Error::Solver {
                time: t,
                message: format!("non-finite state at cell {i}"),
            });
        }
    }

    Ok((new, budget))
}

/// One explicit step. The control's zone coefficients and inflow multiplier
/// are applied to copies of the inputs; `dt` must satisfy the CFL condition.
pub fn step(
    state: &HydroState,
    geom: &RiverGeometry,
    forcing: &BoundaryForcing,
    control: &ControlVector,
    dt: f64,
) -> Result<HydroState> {
    let (geom_eff, forcing_eff) = crate::control::apply_control(control, geom, forcing)?;
    let mut scratch = SolverScratch::default();
    step_effective(state, &geom_eff, &forcing_eff, dt, &mut scratch).map(|(s, _)| s)
}

/// Integrates from `initial.time` to `t_end`, saving states every
/// `save_every` seconds plus the final state exactly at `t_end`.
pub fn run(
    initial: &HydroState,
    geom: &RiverGeometry,
    forcing: &BoundaryForcing,
    control: &ControlVector,
    t_end: f64,
    save_every: f64,
) -> Result<Vec<HydroState>> {
    run_with_budget(
        initial,
        geom,
        forcing,
        control,
        t_end,
        save_every,
        RunOptions::default(),
    )
    .map(|(states, _)| states)
}

/// As [`run`], also returning the accumulated mass budget.
#[allow(clippy::too_many_arguments)]
pub fn run_with_budget(
    initial: &HydroState,
    geom: &RiverGeometry,
    forcing: &BoundaryForcing,
    control: &ControlVector,
    t_end: f64,
    save_every: f64,
    opts: RunOptions,
) -> Result<(Vec<HydroState>, MassBudget)> {
    if t_end < initial.time {
        return Err(Error::Argument(format!(
            "t_end {} precedes initial time {}",
            t_end, initial.time
        )));
    }
    if save_every <= 0.0 {
        return Err(Error::Argument("save_every must be > 0".into()));
    }
    let (geom_eff, forcing_eff) = crate::control::apply_control(control, geom, forcing)?;
    run_effective(
        initial,
        &geom_eff,
        &forcing_eff,
        t_end,
        save_every,
        opts,
        &mut SolverScratch::default(),
    )
}

/// Integration loop on control-applied inputs.
pub(crate) fn run_effective(
    initial: &HydroState,
    geom: &RiverGeometry,
    forcing: &BoundaryForcing,
    t_end: f64,
    save_every: f64,
    opts: RunOptions,
    scratch: &mut SolverScratch,
) -> Result<(Vec<HydroState>, MassBudget)> {
    let dx = geom.dx();
    let courant = opts.courant.min(0.9);
    let mut saved = vec![initial.clone()];
    if t_end == initial.time {
        return Ok((saved, MassBudget::default()));
    }
    let mut state = initial.clone();
    let mut budget = MassBudget::default();
    let mut next_save = initial.time + save_every;
    let eps = 1e-9;
    loop {
        let (lam, _) = max_signal_speed(&state, geom);
        let mut dt = if lam > 0.0 {
            (courant * dx / lam).min(opts.dt_max)
        } else {
            opts.dt_max
        };
        let target = next_save.min(t_end);
        if state.time + dt > target - eps {
            dt = target - state.time;
        }
        let (next, step_budget) =
            step_effective(&state, geom, forcing, dt, scratch).map_err(|e| match e {
                Error::Solver { message, .. } => Error::Solver {
                    time: state.time,
                    message,
                },
                other => other,
            })?;
        budget.inflow_volume += step_budget.inflow_volume;
        budget.outflow_volume += step_budget.outflow_volume;
        budget.clamped_volume += step_budget.clamped_volume;
        state = next;
        if (state.time - target).abs() <= eps {
            state.time = target;
            if (target - t_end).abs() <= eps {
                saved.push(state.clone());
                break;
            }
            if (target - next_save).abs() <= eps {
                saved.push(state.clone());
                next_save += save_every;
            }
        }
    }
    Ok((saved, budget))
}

/// Linearly interpolated water surface elevation at abscissa `x`.
/// Constant beyond the first/last cell centers.
pub fn wse_at(state: &HydroState, geom: &RiverGeometry, x: f64) -> Result<f64> {
    if !(0.0..=geom.length).contains(&x) {
        return Err(Error::Domain(format!(
            "x = {} m outside reach [0, {}]",
            x, geom.length
        )));
    }
    let dx = geom.dx();
    let n = geom.cell_count;
    let first = 0.5 * dx;
    if x <= first {
        return Ok(state.wse(geom, 0));
    }
    let last = geom.cell_x(n - 1);
    if x >= last {
        return Ok(state.wse(geom, n - 1));
    }
    let i = ((x - first) / dx).floor() as usize;
    let i = i.min(n - 2);
    let xi = geom.cell_x(i);
    let w = (x - xi) / dx;
    Ok(state.wse(geom, i) * (1.0 - w) + state.wse(geom, i + 1) * w)
}

/// Flood extent as per-cell channel/floodplain wet flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtentMask {
    pub channel: Vec<bool>,
    pub floodplain: Vec<bool>,
}

impl ExtentMask {
    pub fn any_wet(&self) -> bool {
        self.channel.iter().chain(&self.floodplain).any(|&b| b)
    }
}

/// A cell's floodplain counts as flooded when depth exceeds
/// `bank_height + threshold` strictly; channel cells count as wet above the
/// dry threshold.
pub fn flood_extent_mask(state: &HydroState, geom: &RiverGeometry, threshold: f64) -> ExtentMask {
    ExtentMask {
        channel: state.depth.iter().map(|&h| h > H_DRY).collect(),
        floodplain: state
            .depth
            .iter()
            .zip(&geom.section)
            .map(|(&h, s)| h > s.bank_height + threshold)
            .collect(),
    }
}
