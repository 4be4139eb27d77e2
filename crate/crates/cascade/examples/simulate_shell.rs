//! Integrate one trajectory of the mixed shell model and watch the kinetic
//! energy stay put.
//!
//! Run with: cargo run --example simulate_shell

use cascade::integrate::{integrate, suggested_initial_dt, IntegratorConfig};
use cascade::measures::{sample_at, GaussianSpec};
use cascade::model::Model;
use cascade::shell::{energy, ShellParams};

fn main() -> cascade::Result<()> {
    let n = 12;
    let lambda = 2.0;
    let params = ShellParams::standard(n, lambda)?;
    println!("shell model: N = {n}, lambda = {lambda}, k = {:?}", params.k());

    // one draw from the invariant Gaussian as the initial condition
    let spec = GaussianSpec::new(n, 1.0, 42)?;
    let x0 = sample_at(&spec, 0);
    println!("initial energy E(0) = {:.6}", energy(&x0));

    let t_final = 1.0;
    let cfg = IntegratorConfig::rk45(1e-10, 1e-10)
        .with_initial_dt(suggested_initial_dt(params.max_k(), &x0))
        .with_uniform_grid(t_final, 11);
    let traj = integrate(|x, out| params.eval_rhs_into(x, out), &x0, t_final, &cfg)?;

    println!("\n    t        E(t)              X_1");
    for (t, state) in traj.times().iter().zip(traj.states()) {
        println!("  {t:4.1}  {:.12}  {:+.6}", energy(state), state[0]);
    }
    println!(
        "\naccepted {} steps ({} rejected), relative energy drift {:.3e}",
        traj.meta.accepted_steps, traj.meta.rejected_steps, traj.meta.energy_drift
    );
    Ok(())
}
