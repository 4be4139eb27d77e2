//! The analytic characterization of Gaussian invariance: div(b·f) = 0 splits
//! into a cubic (energy) part and a linear (telescoping) part. Matched
//! coefficients make both vanish; breaking the Obukhov side at one index
//! leaves an exact, computable residual.
//!
//! Run with: cargo run --example divergence_conditions

use cascade::measures::sample_standard_normal;
use cascade::shell::{energy, ShellParams};
use cascade::tree::{TreeParams, TreeTopology};
use cascade::Model;

/// Central-difference divergence of b(x)·exp(−‖x‖²/r²), divided by the
/// density — the brute-force side of the identity.
fn fd_divergence(rhs: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], r: f64, h: f64) -> f64 {
    let f = |y: &[f64]| (-energy(y) / (r * r)).exp();
    let mut total = 0.0;
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        total += (rhs(&xp)[i] * f(&xp) - rhs(&xm)[i] * f(&xm)) / (2.0 * h);
    }
    total / f(x)
}

fn main() -> cascade::Result<()> {
    let r = 1.0;
    let n = 8;
    let standard = ShellParams::standard(n, 2.0)?;
    let perturbed = ShellParams::standard_with_h_scaled(n, 2.0, 3, 1.5)?;
    let x: Vec<f64> = (0..n).map(|j| 0.6 * sample_standard_normal(1, 0, j as u64)).collect();

    println!("shell model, random state:");
    for (label, params) in [("standard (h = k)", &standard), ("h_3 = 1.5 k_3", &perturbed)] {
        let linear = params.divergence_residual(&x)?;
        let cubic = params.energy_quadratic_residual(&x)?;
        let analytic = linear - (2.0 / (r * r)) * cubic;
        let fd = fd_divergence(&|y| params.eval_rhs(y).unwrap(), &x, r, 1e-5);
        println!(
            "  {label:18} linear {linear:+.6e}  <x,b> {cubic:+.3e}  div(bf)/f analytic {analytic:+.6e}  central-diff {fd:+.6e}"
        );
    }
    let mut e3 = vec![0.0; n];
    e3[2] = 1.0;
    println!(
        "  necessity witness: residual on e_3 for the perturbed model = {} (= 0.5*k_3)",
        perturbed.divergence_residual(&e3)?
    );

    let topo = TreeTopology::regular(2, 3)?;
    let tree = TreeParams::standard(topo, 1.0, 1.0, 2.0)?;
    let level1 = (0..tree.dim()).find(|&j| tree.topology().level(j) == 1).unwrap();
    let broken = tree.with_d_offset(level1, 1.0)?;
    let y: Vec<f64> = (0..tree.dim()).map(|j| 0.6 * sample_standard_normal(2, 0, j as u64)).collect();

    println!("\nbinary tree depth 3, random state:");
    for (label, params) in [("matched (alpha c = beta d)", &tree), ("d+1 at a level-1 node", &broken)] {
        let linear = params.divergence_residual(&y)?;
        let fd = fd_divergence(&|z| params.eval_rhs(z).unwrap(), &y, r, 1e-5);
        let analytic = -(2.0 / (r * r)) * params.energy_quadratic_residual(&y)? - linear;
        println!(
            "  {label:27} residual {linear:+.6e}  div(bf)/f analytic {analytic:+.6e}  central-diff {fd:+.6e}"
        );
    }
    let mut ej = vec![0.0; tree.dim()];
    ej[level1] = 1.0;
    println!(
        "  perturbation witness: residual on the node's indicator = {} (= -beta)",
        broken.divergence_residual(&ej)?
    );
    Ok(())
}
