//! Weighted Sobolev H^s norms on the sequence space, time-integrated
//! L^p(0,T;H^s) and W^{1,p}(0,T;H^s) functionals, the interpolation exponent,
//! the H^{0⁻} metric, and the integral-form residual operator.
//!
//! Weight convention: w_n = λ^{2s(n−1)}, i.e. effective coefficients
//! k̃_n = λ^{n−1} with k̃_1 = 1. The dynamics' own k_n vanish at n = 1, which
//! would make k_1^{2s} undefined for s < 0; the geometric convention is the
//! one actually used by the closed-form expectation Σ r² λ^{(n−1)2s}. Tree
//! states use the same convention indexed by the fixed level-order node
//! enumeration.

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::model::Model;

/// Exponent s and precomputed weights λ^{2s(n−1)}, n = 1..dim.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevWeights {
    s: f64,
    lambda: f64,
    dim: usize,
    weights: Vec<f64>,
}

impl SobolevWeights {
    pub fn new(s: f64, lambda: f64, dim: usize) -> Result<Self> {
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("lambda must be > 1, got {lambda}")));
        }
        if !s.is_finite() {
            return Err(Error::domain("s must be finite"));
        }
        if dim == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        let weights: Vec<f64> = (0..dim).map(|n| lambda.powf(2.0 * s * n as f64)).collect();
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::domain("weights overflow or vanish for this (s, lambda, dim)"));
        }
        Ok(SobolevWeights { s, lambda, dim, weights })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// ‖x‖_{H^s} = √(Σ_n λ^{2s(n−1)} x_n²).
pub fn hs_norm(w: &SobolevWeights, x: &[f64]) -> Result<f64> {
    if x.len() != w.dim {
        return Err(Error::dims(w.dim, x.len()));
    }
    Ok(x.iter().zip(&w.weights).map(|(xi, wi)| wi * xi * xi).sum::<f64>().sqrt())
}

/// Interpolation exponent θ = (s − s₁)/(s₀ − s₁) for s₁ < s < s₀ < 0, the
/// exponent in ‖x‖_{H^s} ≤ ‖x‖_{H^{s₀}}^θ ‖x‖_{H^{s₁}}^{1−θ}.
pub fn interpolation_theta(s0: f64, s1: f64, s: f64) -> Result<f64> {
    if !(s1 < s && s < s0 && s0 < 0.0) {
        return Err(Error::domain(format!("need s1 < s < s0 < 0, got s1={s1}, s={s}, s0={s0}")));
    }
    Ok((s - s1) / (s0 - s1))
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..times.len() {
        acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
    }
    acc
}

/// (∫₀ᵀ ‖x(t)‖_{H^s}^p dt)^{1/p} by composite trapezoid on the stored grid.
pub fn lp_time_norm(traj: &Trajectory, w: &SobolevWeights, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("p must be >= 1, got {p}")));
    }
    if traj.is_empty() {
        return Err(Error::domain("trajectory is empty"));
    }
    let values: Vec<f64> =
        traj.states().iter().map(|s| hs_norm(w, s).map(|n| n.powf(p))).collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(traj.times(), &values).powf(1.0 / p))
}

/// L^p(0,T;H^s) norm of t ↦ b(x(t)): the W^{1,p} seminorm with the time
/// derivative substituted through the model field, not finite differences.
pub fn w1p_time_seminorm<M: Model>(
    traj: &Trajectory,
    model: &M,
    w: &SobolevWeights,
    p: f64,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("p must be >= 1, got {p}")));
    }
    if traj.is_empty() {
        return Err(Error::domain("trajectory is empty"));
    }
    if traj.dim() != model.dim() {
        return Err(Error::dims(model.dim(), traj.dim()));
    }
    let mut rhs = vec![0.0; model.dim()];
    let mut values = Vec::with_capacity(traj.len());
    for s in traj.states() {
        model.eval_rhs_into(s, &mut rhs);
        values.push(hs_norm(w, &rhs)?.powf(p));
    }
    Ok(trapezoid(traj.times(), &values).powf(1.0 / p))
}

/// Terms beyond n_max contribute at most 2^{−n_max}; 40 keeps the tail
/// below 1e−12 regardless of the states.
const H0MINUS_TERMS: usize = 40;

/// Metric of H^{0⁻} = ∩_{s<0} H^s:
/// d(x, y) = Σ_{n=1}^{40} 2^{−n} min(‖x−y‖_{H^{−1/n}}, 1).
pub fn h0minus_distance(x: &[f64], y: &[f64], lambda: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::domain("vectors must be nonempty"));
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut acc = 0.0;
    for n in 1..=H0MINUS_TERMS {
        let w = SobolevWeights::new(-1.0 / n as f64, lambda, diff.len())?;
        let norm = hs_norm(&w, &diff)?;
        acc += 2f64.powi(-(n as i32)) * norm.min(1.0);
    }
    Ok(acc)
}

/// Residual of the integral form at one component:
/// max over grid times t of |x_i(t) − x_i(0) − ∫₀ᵗ b_i(x(s)) ds|,
/// cumulative trapezoid quadrature on the stored grid. Works for either
/// model through the shared field interface.
pub fn integral_residual<M: Model>(traj: &Trajectory, model: &M, component: usize) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::domain("trajectory is empty"));
    }
    if traj.dim() != model.dim() {
        return Err(Error::dims(model.dim(), traj.dim()));
    }
    if component >= model.dim() {
        return Err(Error::dims(model.dim(), component));
    }
    let mut rhs = vec![0.0; model.dim()];
    let mut b_i = Vec::with_capacity(traj.len());
    for s in traj.states() {
        model.eval_rhs_into(s, &mut rhs);
        b_i.push(rhs[component]);
    }
    let times = traj.times();
    let x0 = traj.state(0)[component];
    let mut integral = 0.0;
    let mut worst = 0.0f64;
    for i in 0..traj.len() {
        if i > 0 {
            integral += 0.5 * (times[i] - times[i - 1]) * (b_i[i] + b_i[i - 1]);
        }
        let res = (traj.state(i)[component] - x0 - integral).abs();
        worst = worst.max(res);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::sample_standard_normal;
    use crate::shell::ShellParams;
    use proptest::prelude::*;

    #[test]
    fn hs_norm_weight_rule() {
        let w = SobolevWeights::new(-1.0, 2.0, 4).unwrap();
        // third basis vector: weight λ^{2·(−1)·2} = 1/16, norm 1/4
        let e3 = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(hs_norm(&w, &e3).unwrap(), 0.25);
        // first basis vector has unit weight for any s
        let e1 = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(hs_norm(&w, &e1).unwrap(), 1.0);
        let w17 = SobolevWeights::new(-1.7, 2.0, 4).unwrap();
        assert_eq!(hs_norm(&w17, &e1).unwrap(), 1.0);
    }

    #[test]
    fn hs_norm_s_zero_is_euclidean() {
        let w = SobolevWeights::new(0.0, 2.0, 3).unwrap();
        assert_eq!(hs_norm(&w, &[3.0, 0.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn theta_examples() {
        assert_eq!(interpolation_theta(-1.0, -3.0, -2.0).unwrap(), 0.5);
        assert_eq!(interpolation_theta(-1.0, -5.0, -2.0).unwrap(), 0.75);
        assert!((interpolation_theta(-1.0, -3.0, -1.0 - 1e-9).unwrap() - 1.0).abs() < 1e-9);
        assert!(interpolation_theta(-3.0, -1.0, -2.0).is_err());
        assert!(interpolation_theta(-1.0, -3.0, -0.5).is_err());
    }

    #[test]
    fn interpolation_inequality_sweep() {
        // random (x, s0, s1, s): zero violations beyond 1e−12 relative slack
        for trial in 0..2000u64 {
            let dim = 1 + (uniform(trial, 0) * 64.0) as usize;
            let s0 = -0.05 - 2.0 * uniform(trial, 1);
            let s1 = s0 - 0.05 - 3.0 * uniform(trial, 2);
            let s = s1 + (s0 - s1) * (0.05 + 0.9 * uniform(trial, 3));
            let theta = interpolation_theta(s0, s1, s).unwrap();
            let x: Vec<f64> = (0..dim).map(|j| sample_standard_normal(71, trial, j as u64)).collect();
            let n = hs_norm(&SobolevWeights::new(s, 2.0, dim).unwrap(), &x).unwrap();
            let n0 = hs_norm(&SobolevWeights::new(s0, 2.0, dim).unwrap(), &x).unwrap();
            let n1 = hs_norm(&SobolevWeights::new(s1, 2.0, dim).unwrap(), &x).unwrap();
            let bound = n0.powf(theta) * n1.powf(1.0 - theta);
            assert!(n <= bound * (1.0 + 1e-12), "trial {trial}: {n} > {bound}");
        }
    }

    fn uniform(a: u64, b: u64) -> f64 {
        crate::measures::uniform_01(0xabcdef, a, b)
    }

    #[test]
    fn lp_norm_constant_trajectory() {
        let x0 = vec![1.0, 2.0];
        let times: Vec<f64> = (0..11).map(|i| i as f64 * 0.2).collect();
        let states = vec![x0.clone(); 11];
        let traj = Trajectory::from_samples(times, states).unwrap();
        let w = SobolevWeights::new(-1.0, 2.0, 2).unwrap();
        let p = 3.0;
        let want = 2f64.powf(1.0 / p) * hs_norm(&w, &x0).unwrap();
        let got = lp_time_norm(&traj, &w, p).unwrap();
        assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        assert!(lp_time_norm(&traj, &w, 0.5).is_err());
    }

    #[test]
    fn lp_norm_linear_scalar_trajectory() {
        // x(t) = t on [0,1], p = 2: ∫ t² dt = 1/3, norm 1/√3 up to O(Δt²)
        let m = 2001;
        let times: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        let states: Vec<Vec<f64>> = times.iter().map(|t| vec![*t]).collect();
        let traj = Trajectory::from_samples(times, states).unwrap();
        let w = SobolevWeights::new(-1.0, 2.0, 1).unwrap();
        let got = lp_time_norm(&traj, &w, 2.0).unwrap();
        let want = (1.0f64 / 3.0).sqrt();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn lp_norm_grid_refinement_order_two() {
        // smooth integrand: quadrature error should fall ~4x per halving
        let run = |m: usize| {
            let times: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
            let states: Vec<Vec<f64>> = times.iter().map(|t| vec![(2.0 * t).sin()]).collect();
            let traj = Trajectory::from_samples(times, states).unwrap();
            let w = SobolevWeights::new(-0.5, 2.0, 1).unwrap();
            lp_time_norm(&traj, &w, 2.0).unwrap()
        };
        let exact = {
            // ∫ sin²(2t) dt on [0,1] = 1/2 − sin(4)/8
            (0.5 - (4.0f64).sin() / 8.0).sqrt()
        };
        let e1 = (run(101) - exact).abs();
        let e2 = (run(201) - exact).abs();
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "refinement ratio {ratio}");
    }

    #[test]
    fn w1p_seminorm_formal_constant_trajectory() {
        // shell N=3, constant state (1,1,1): rhs = (−4, 0, 4), so the
        // seminorm is T^{1/p}·‖(−4,0,4)‖_{H^s}
        let p_model = ShellParams::standard(3, 2.0).unwrap();
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        let traj = Trajectory::from_samples(times, vec![vec![1.0, 1.0, 1.0]; 5]).unwrap();
        let w = SobolevWeights::new(-1.0, 2.0, 3).unwrap();
        let p = 2.0;
        let want = 2f64.powf(1.0 / p) * hs_norm(&w, &[-4.0, 0.0, 4.0]).unwrap();
        let got = w1p_time_seminorm(&traj, &p_model, &w, p).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        // degree-2 field: doubling states multiplies the seminorm by 4
        let traj2 = Trajectory::from_samples(
            (0..5).map(|i| i as f64 * 0.5).collect(),
            vec![vec![2.0, 2.0, 2.0]; 5],
        )
        .unwrap();
        let got2 = w1p_time_seminorm(&traj2, &p_model, &w, p).unwrap();
        assert!((got2 - 4.0 * got).abs() < 1e-11);
    }

    #[test]
    fn w1p_zero_trajectory() {
        let p_model = ShellParams::standard(3, 2.0).unwrap();
        let traj =
            Trajectory::from_samples(vec![0.0, 1.0], vec![vec![0.0; 3], vec![0.0; 3]]).unwrap();
        let w = SobolevWeights::new(-1.0, 2.0, 3).unwrap();
        assert_eq!(w1p_time_seminorm(&traj, &p_model, &w, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn h0minus_basic_properties() {
        let x = vec![0.3, -1.2, 2.0];
        let y = vec![-0.4, 0.9, 0.1];
        assert_eq!(h0minus_distance(&x, &x, 2.0).unwrap(), 0.0);
        let d = h0minus_distance(&x, &y, 2.0).unwrap();
        assert!(d <= 1.0);
        assert_eq!(d, h0minus_distance(&y, &x, 2.0).unwrap());
        assert!(h0minus_distance(&x, &y[..2], 2.0).is_err());
    }

    #[test]
    fn h0minus_vanishes_iff_all_hs_norms_vanish() {
        // constructed sequence x_k → x: distance decreases to 0 and each
        // tested H^{−1/n} norm does too
        let x = vec![1.0, -0.5, 0.25, 2.0];
        let mut prev_d = f64::INFINITY;
        for k in 1..=6 {
            let scale = 10f64.powi(-k);
            let xk: Vec<f64> = x.iter().map(|v| v + scale).collect();
            let d = h0minus_distance(&xk, &x, 2.0).unwrap();
            assert!(d < prev_d);
            prev_d = d;
            for n in 1..=4 {
                let w = SobolevWeights::new(-1.0 / n as f64, 2.0, 4).unwrap();
                let diff: Vec<f64> = xk.iter().zip(&x).map(|(a, b)| a - b).collect();
                assert!(hs_norm(&w, &diff).unwrap() <= 2.0 * scale);
            }
        }
        // at scale 1e-6 the distance is at most Σ 2^{-n}·‖diff‖ ≤ 2e-6
        assert!(prev_d < 2.1e-6);
    }

    #[test]
    fn integral_residual_zero_trajectory() {
        let p = ShellParams::standard(4, 2.0).unwrap();
        let times: Vec<f64> = (0..9).map(|i| i as f64 * 0.125).collect();
        let traj = Trajectory::from_samples(times, vec![vec![0.0; 4]; 9]).unwrap();
        for i in 0..4 {
            assert_eq!(integral_residual(&traj, &p, i).unwrap(), 0.0);
        }
        assert!(integral_residual(&traj, &p, 7).is_err());
    }

    #[test]
    fn integral_residual_detects_corruption() {
        // perturbing one interior sample by δ raises the residual to ≥ δ/2
        let p = ShellParams::standard(4, 2.0).unwrap();
        let x0: Vec<f64> = (0..4).map(|j| 0.25 * sample_standard_normal(81, 0, j as u64)).collect();
        let cfg = crate::integrate::IntegratorConfig::rk45(1e-10, 1e-10).with_uniform_grid(0.5, 501);
        let traj = crate::integrate::integrate(
            |x: &[f64], out: &mut [f64]| crate::model::Model::eval_rhs_into(&p, x, out),
            &x0,
            0.5,
            &cfg,
        )
        .unwrap();
        let clean: f64 =
            (0..4).map(|i| integral_residual(&traj, &p, i).unwrap()).fold(0.0, f64::max);
        let delta = 1e-3;
        let mut states = traj.states().to_vec();
        states[250][1] += delta;
        let corrupted = Trajectory::from_samples(traj.times().to_vec(), states).unwrap();
        let dirty = integral_residual(&corrupted, &p, 1).unwrap();
        assert!(clean < delta / 10.0, "clean residual {clean}");
        assert!(dirty >= delta / 2.0, "corrupted residual {dirty}");
    }

    proptest! {
        #[test]
        fn monotone_in_s(seed in 0u64..300) {
            // s ≤ s' implies ‖x‖_{H^s} ≤ ‖x‖_{H^{s'}}
            let dim = 12;
            let x: Vec<f64> = (0..dim).map(|j| sample_standard_normal(91, seed, j as u64)).collect();
            let s = -3.0 + 2.0 * uniform(seed, 10);
            let s_hi = s + 1.5 * uniform(seed, 11);
            let lo = hs_norm(&SobolevWeights::new(s, 2.0, dim).unwrap(), &x).unwrap();
            let hi = hs_norm(&SobolevWeights::new(s_hi, 2.0, dim).unwrap(), &x).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-13));
        }
    }
}
