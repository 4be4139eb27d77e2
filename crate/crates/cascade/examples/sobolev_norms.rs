//! The weighted Sobolev toolbox: H^s norms with geometric weights, the
//! interpolation inequality and its exponent, time-integrated norms along a
//! trajectory, the H^{0⁻} metric, and the integral-form residual.
//!
//! Run with: cargo run --example sobolev_norms

use cascade::experiments::IcFamily;
use cascade::integrate::{integrate, suggested_initial_dt, IntegratorConfig};
use cascade::measures::sample_standard_normal;
use cascade::norms::{
    h0minus_distance, hs_norm, integral_residual, interpolation_theta, lp_time_norm,
    w1p_time_seminorm, SobolevWeights,
};
use cascade::shell::ShellParams;
use cascade::Model;

fn main() -> cascade::Result<()> {
    let dim = 16;
    let x: Vec<f64> = (0..dim).map(|j| sample_standard_normal(5, 0, j as u64)).collect();

    println!("H^s norms of one random vector (weights lambda^(2s(n-1)), lambda = 2):");
    for s in [0.0, -0.5, -1.0, -2.0] {
        let w = SobolevWeights::new(s, 2.0, dim)?;
        println!("  s = {s:4}: {:.6}", hs_norm(&w, &x)?);
    }

    let (s0, s1, s) = (-1.0, -3.0, -2.0);
    let theta = interpolation_theta(s0, s1, s)?;
    let n = hs_norm(&SobolevWeights::new(s, 2.0, dim)?, &x)?;
    let n0 = hs_norm(&SobolevWeights::new(s0, 2.0, dim)?, &x)?;
    let n1 = hs_norm(&SobolevWeights::new(s1, 2.0, dim)?, &x)?;
    println!("\ninterpolation at (s0, s1, s) = ({s0}, {s1}, {s}): theta = {theta}");
    println!("  ||x||_s = {n:.6} <= ||x||_s0^theta ||x||_s1^(1-theta) = {:.6}", n0.powf(theta) * n1.powf(1.0 - theta));

    let y: Vec<f64> = x.iter().map(|v| v + 1e-4).collect();
    println!("\nH^0- metric: d(x, x + 1e-4) = {:.6e}, d(x, x) = {}", h0minus_distance(&x, &y, 2.0)?, h0minus_distance(&x, &x, 2.0)?);

    // time-integrated norms along a real trajectory
    let params = ShellParams::standard(8, 2.0)?;
    let x0 = IcFamily::InverseLambda.truncate(8, 2.0)?;
    let t_final = 1.0;
    let cfg = IntegratorConfig::rk45(1e-10, 1e-10)
        .with_initial_dt(suggested_initial_dt(params.max_k(), &x0))
        .with_uniform_grid(t_final, 2001);
    let traj = integrate(|z, out| params.eval_rhs_into(z, out), &x0, t_final, &cfg)?;
    let w = SobolevWeights::new(-1.0, 2.0, 8)?;
    let w1 = SobolevWeights::new(-2.0, 2.0, 8)?;
    println!("\nshell N = 8 trajectory on [0, {t_final}]:");
    println!("  ||x||_(L^2(0,T;H^-1))          = {:.6}", lp_time_norm(&traj, &w, 2.0)?);
    println!("  ||dx/dt||_(L^2(0,T;H^-2))      = {:.6}", w1p_time_seminorm(&traj, &params, &w1, 2.0)?);
    let worst = (0..8).map(|i| integral_residual(&traj, &params, i).unwrap()).fold(0.0f64, f64::max);
    println!("  max_i integral-form residual   = {worst:.3e}");
    Ok(())
}
