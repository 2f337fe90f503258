//! Stochastic EnKF sanity check on a linear-Gaussian problem where the
//! exact Kalman posterior is known in closed form: the ensemble-mean
//! update converges to it at the Monte Carlo rate as members are added.
//!
//! Run with: cargo run --example enkf_linear

use floodda::control::member_rng;
use floodda::enkf::{analysis_update, EnkfOptions};
use floodda::Result;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<()> {
    // Prior x ~ N(x0, P0) with diagonal P0; observe y = H x + noise.
    let x0 = [30.0, 1.0];
    let p0 = [25.0, 0.01];
    // Two observations: the first component, and the sum of both.
    let h = [[1.0, 0.0], [1.0, 1.0]];
    let obs = [36.0, 38.5];
    let sigma = [2.0, 1.5];

    // Exact posterior mean via the Kalman formula (2x2, done by hand).
    let exact = kalman_mean(&x0, &p0, &h, &obs, &sigma);
    println!("exact posterior mean: [{:.4}, {:.4}]", exact[0], exact[1]);
    println!();
    println!("{:>7}  {:>12}  {:>12}", "members", "mean[0]", "|error|");

    let opts = EnkfOptions::default();
    for &n in &[50usize, 500, 5000] {
        // Draw the prior ensemble and its exact linear equivalents.
        let mut controls = Vec::with_capacity(n);
        let mut equivalents = Vec::with_capacity(n);
        let mut rngs = Vec::with_capacity(n);
        for m in 0..n {
            let mut rng = member_rng(7, m as u64);
            let x: Vec<f64> = (0..2)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x0[i] + p0[i].sqrt() * z
                })
                .collect();
            let y: Vec<f64> = h.iter().map(|row| row[0] * x[0] + row[1] * x[1]).collect();
            controls.push(x);
            equivalents.push(y);
            rngs.push(rng);
        }

        let (analyzed, diag) = analysis_update(&controls, &equivalents, &obs, &sigma, &mut rngs, &opts)?;
        let mean: Vec<f64> = (0..2)
            .map(|i| analyzed.iter().map(|v| v[i]).sum::<f64>() / n as f64)
            .collect();
        let err = ((mean[0] - exact[0]).powi(2) + (mean[1] - exact[1]).powi(2)).sqrt();
        println!(
            "{n:>7}  {:>12.4}  {err:>12.5}   (innovation rms {:.3})",
            mean[0], diag.innovation_rms
        );
    }
    println!("\nthe error shrinks roughly as 1/sqrt(members).");
    Ok(())
}

/// Posterior mean of a 2-state, 2-obs linear-Gaussian update.
fn kalman_mean(x0: &[f64; 2], p0: &[f64; 2], h: &[[f64; 2]; 2], obs: &[f64; 2], sigma: &[f64; 2]) -> [f64; 2] {
    // S = H P0 H^T + R, K = P0 H^T S^-1, mean = x0 + K (obs - H x0).
    let php = |a: &[f64; 2], b: &[f64; 2]| a[0] * p0[0] * b[0] + a[1] * p0[1] * b[1];
    let s = [
        [php(&h[0], &h[0]) + sigma[0] * sigma[0], php(&h[0], &h[1])],
        [php(&h[1], &h[0]), php(&h[1], &h[1]) + sigma[1] * sigma[1]],
    ];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let s_inv = [
        [s[1][1] / det, -s[0][1] / det],
        [-s[1][0] / det, s[0][0] / det],
    ];
    let innov = [
        obs[0] - (h[0][0] * x0[0] + h[0][1] * x0[1]),
        obs[1] - (h[1][0] * x0[0] + h[1][1] * x0[1]),
    ];
    let mut out = *x0;
    for i in 0..2 {
        // Row i of P0 H^T.
        let pht = [p0[i] * h[0][i], p0[i] * h[1][i]];
        let k = [
            pht[0] * s_inv[0][0] + pht[1] * s_inv[1][0],
            pht[0] * s_inv[0][1] + pht[1] * s_inv[1][1],
        ];
        out[i] += k[0] * innov[0] + k[1] * innov[1];
    }
    out
}
