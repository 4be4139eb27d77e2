//! Closed-form moments of the weighted χ² series Z = Σ w_n^{2s} r² W_n and
//! the fourth-moment series, cross-checked by Monte Carlo over a truncated
//! sum drawn with the splittable counter-based sampler.
//!
//! Run with: cargo run --example closed_form_moments

use cascade::measures::{sample_standard_normal, z4_mean, z_moments, MomentOrder};
use cascade::stats::pairwise_sum;

fn main() -> cascade::Result<()> {
    let (lambda, r) = (2.0, 1.0);

    let s = -1.0;
    let mean = z_moments(lambda, s, r, MomentOrder::Mean)?;
    let var = z_moments(lambda, s, r, MomentOrder::Variance)?;
    println!("Z = sum_n lambda^(2s(n-1)) r^2 W_n,  W_n ~ chi2(1),  s = {s}:");
    println!("  closed form: E[Z] = {mean:.12} (= 4/3), Var[Z] = {var:.12} (= 32/15)");

    let samples = 100_000u64;
    let terms = 40;
    let mut values = Vec::with_capacity(samples as usize);
    for i in 0..samples {
        let mut z = 0.0;
        for n in 0..terms {
            let g = sample_standard_normal(2024, i, n);
            z += lambda.powf(2.0 * s * n as f64) * g * g;
        }
        values.push(z);
    }
    let mf = samples as f64;
    let mc_mean = pairwise_sum(&values) / mf;
    let centered: Vec<f64> = values.iter().map(|v| (v - mc_mean) * (v - mc_mean)).collect();
    let mc_var = pairwise_sum(&centered) / mf;
    println!(
        "  Monte Carlo ({samples} samples, {terms} terms): E[Z] = {mc_mean:.6} (SE {:.1e}), Var[Z] = {mc_var:.6}",
        (var / mf).sqrt()
    );

    let s4 = -2.0;
    let m4 = z4_mean(lambda, s4, r)?;
    println!("\nZ4 = sum_n lambda^((2+2s)(n-1)) W_n^4,  W_n ~ N(0, r^2),  s = {s4}:");
    println!("  closed form: E[Z4] = {m4} (= 4)");
    let mut z4_values = Vec::with_capacity(samples as usize);
    for i in 0..samples {
        let mut z = 0.0;
        for n in 0..terms {
            let g = sample_standard_normal(2025, i, n);
            z += lambda.powf((2.0 + 2.0 * s4) * n as f64) * g.powi(4);
        }
        z4_values.push(z);
    }
    println!("  Monte Carlo: E[Z4] = {:.6}", pairwise_sum(&z4_values) / mf);

    println!("\nscale family: r -> 2 multiplies E[Z] by 4 and Var[Z] by 16:");
    println!(
        "  E[Z](r=2) = {:.6}, Var[Z](r=2) = {:.6}",
        z_moments(lambda, s, 2.0, MomentOrder::Mean)?,
        z_moments(lambda, s, 2.0, MomentOrder::Variance)?
    );

    println!("\ndivergence boundaries: s = 0 or s4 = -1 are rejected:");
    println!("  z_moments(.., s = 0, ..): {:?}", z_moments(lambda, 0.0, r, MomentOrder::Mean).err().map(|e| e.to_string()));
    println!("  z4_mean(.., s = -1, ..):  {:?}", z4_mean(lambda, -1.0, r).err().map(|e| e.to_string()));
    Ok(())
}
