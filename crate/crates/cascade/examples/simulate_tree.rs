//! Build a binary eddy tree, serialize its topology, and integrate the tree
//! cascade with conserved energy.
//!
//! Run with: cargo run --example simulate_tree

use cascade::integrate::{integrate, suggested_initial_dt, IntegratorConfig};
use cascade::measures::{sample_at, GaussianSpec};
use cascade::model::Model;
use cascade::shell::energy;
use cascade::tree::{TreeParams, TreeTopology};

fn main() -> cascade::Result<()> {
    let topo = TreeTopology::regular(2, 4)?;
    println!(
        "binary tree: depth {}, Q = {} nodes; text form of the first rows:",
        topo.depth(),
        topo.node_count()
    );
    for line in topo.to_text().lines().take(7) {
        println!("  {line}");
    }
    // the line-oriented `id level parent_id` format round-trips bit-exactly
    assert_eq!(TreeTopology::from_text(&topo.to_text())?, topo);

    let params = TreeParams::standard(topo, 1.0, 1.0, 2.0)?;
    let per_level: Vec<(usize, f64, f64)> = (0..=params.topology().depth())
        .map(|lvl| {
            let j = (0..params.dim()).find(|&j| params.topology().level(j) == lvl).unwrap();
            (lvl, params.c()[j], params.d()[j])
        })
        .collect();
    println!("\nper-level coefficients (level, c, d): {per_level:?}");

    let spec = GaussianSpec::new(params.dim(), 1.0, 7)?;
    let x0 = sample_at(&spec, 0);
    let t_final = 1.0;
    let cfg = IntegratorConfig::rk45(1e-10, 1e-10)
        .with_initial_dt(suggested_initial_dt(params.max_coefficient(), &x0))
        .with_uniform_grid(t_final, 6);
    let traj = integrate(|x, out| params.eval_rhs_into(x, out), &x0, t_final, &cfg)?;

    println!("\n    t        E(t)");
    for (t, state) in traj.times().iter().zip(traj.states()) {
        println!("  {t:4.1}  {:.12}", energy(state));
    }
    println!("\nrelative energy drift {:.3e}", traj.meta.energy_drift);
    Ok(())
}
