//! Time integration with controlled accuracy and monitored energy drift.
//!
//! Two methods: classic fixed-step RK4 and the adaptive Dormand–Prince 5(4)
//! embedded pair. Dense output between accepted steps uses cubic Hermite
//! interpolation onto the requested sample grid, so norm quadrature is
//! independent of where the controller happens to place steps. Energy drift
//! is monitored and recorded in the trajectory metadata, never projected
//! away — projection would mask integrator error and bias the invariance
//! tests.

use crate::error::{Error, Result};
use crate::shell::energy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4Fixed => "rk4_fixed",
            Method::Rk45Adaptive => "rk45_adaptive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Starting step; for stiff shells prefer [`suggested_initial_dt`].
    pub initial_dt: f64,
    /// Requested sample times in [0, T]; 0 and T are always included.
    pub output_grid: Vec<f64>,
}

impl IntegratorConfig {
    pub fn rk45(abs_tol: f64, rel_tol: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk45Adaptive,
            abs_tol,
            rel_tol,
            max_steps: 50_000_000,
            initial_dt: 1e-4,
            output_grid: Vec::new(),
        }
    }

    pub fn rk4(dt: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4Fixed,
            abs_tol: 0.0,
            rel_tol: 0.0,
            max_steps: 50_000_000,
            initial_dt: dt,
            output_grid: Vec::new(),
        }
    }

    /// Replace the output grid by `points` uniform samples on [0, t_end].
    pub fn with_uniform_grid(mut self, t_end: f64, points: usize) -> Self {
        let points = points.max(2);
        self.output_grid = (0..points)
            .map(|i| t_end * i as f64 / (points - 1) as f64)
            .collect();
        self
    }

    pub fn with_initial_dt(mut self, dt: f64) -> Self {
        self.initial_dt = dt;
        self
    }

    fn validate(&self, t_end: f64) -> Result<()> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::domain(format!("t_end must be positive and finite, got {t_end}")));
        }
        if self.method == Method::Rk45Adaptive && (!(self.abs_tol > 0.0) || !(self.rel_tol > 0.0)) {
            return Err(Error::domain("adaptive tolerances must be positive"));
        }
        if !(self.initial_dt > 0.0) || !self.initial_dt.is_finite() {
            return Err(Error::domain(format!("initial_dt must be positive, got {}", self.initial_dt)));
        }
        if self.max_steps == 0 {
            return Err(Error::domain("max_steps must be positive"));
        }
        let mut prev = -1.0;
        for &t in &self.output_grid {
            if !(0.0..=t_end * (1.0 + 1e-12)).contains(&t) {
                return Err(Error::domain(format!("output grid point {t} outside [0, {t_end}]")));
            }
            if t <= prev {
                return Err(Error::domain("output grid must be strictly increasing"));
            }
            prev = t;
        }
        Ok(())
    }
}

/// Stability-motivated starting step 0.1 / (k_max · (1 + ‖x0‖)): the explicit
/// stability limit scales inversely with the largest coefficient times the
/// state magnitude.
pub fn suggested_initial_dt(max_coefficient: f64, x0: &[f64]) -> f64 {
    let norm = energy(x0).sqrt();
    0.1 / (max_coefficient.max(1.0) * (1.0 + norm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub method: &'static str,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// max_t |E(t) − E(0)| / max(E(0), floor) over the output grid.
    pub energy_drift: f64,
}

/// Time grid plus states, with the integrator provenance that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Assemble a trajectory from explicit samples (used for synthetic or
    /// externally produced grids). Validates the grid invariants.
    pub fn from_samples(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::domain("times and states must be nonempty and equal length"));
        }
        if times[0] != 0.0 {
            return Err(Error::domain("trajectory must start at t = 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("trajectory times must be strictly increasing"));
        }
        let dim = states[0].len();
        if states.iter().any(|s| s.len() != dim) {
            return Err(Error::domain("state dimension must be constant"));
        }
        let meta = TrajectoryMeta {
            method: "external",
            abs_tol: 0.0,
            rel_tol: 0.0,
            accepted_steps: 0,
            rejected_steps: 0,
            rhs_evaluations: 0,
            energy_drift: drift_over(&states),
        };
        Ok(Trajectory { times, states, meta })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is nonempty")
    }
}

const DRIFT_FLOOR: f64 = 1e-300;

fn drift_over(states: &[Vec<f64>]) -> f64 {
    let e0 = energy(&states[0]);
    let denom = e0.max(DRIFT_FLOOR);
    states
        .iter()
        .map(|s| (energy(s) - e0).abs() / denom)
        .fold(0.0, f64::max)
}

/// Relative energy drift over the stored grid.
pub fn energy_drift(traj: &Trajectory) -> f64 {
    drift_over(&traj.states)
}

/// Cubic Hermite interpolation on [t0, t0+h] given endpoint states and
/// derivatives.
fn hermite(theta: f64, h: f64, x0: &[f64], f0: &[f64], x1: &[f64], f1: &[f64], out: &mut [f64]) {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    for i in 0..out.len() {
        out[i] = h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i];
    }
}

// Dormand–Prince 5(4) tableau. Stage times are omitted: both cascade fields
// are autonomous.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct GridSampler<'a> {
    grid: &'a [f64],
    next: usize,
    states: Vec<Vec<f64>>,
}

impl<'a> GridSampler<'a> {
    fn new(grid: &'a [f64], x0: &[f64]) -> Self {
        let mut s = GridSampler { grid, next: 0, states: Vec::with_capacity(grid.len()) };
        // t = 0 is always the first grid point
        s.states.push(x0.to_vec());
        s.next = 1;
        s
    }

    /// Emit every grid point inside (t0, t0+h] by Hermite interpolation.
    fn advance(&mut self, t0: f64, h: f64, x0: &[f64], f0: &[f64], x1: &[f64], f1: &[f64]) {
        while self.next < self.grid.len() {
            let tg = self.grid[self.next];
            if tg > t0 + h + 1e-14 * (1.0 + t0.abs()) {
                break;
            }
            let theta = ((tg - t0) / h).clamp(0.0, 1.0);
            let mut out = vec![0.0; x0.len()];
            if theta >= 1.0 {
                out.copy_from_slice(x1);
            } else {
                hermite(theta, h, x0, f0, x1, f1, &mut out);
            }
            self.states.push(out);
            self.next += 1;
        }
    }

    fn finish(mut self, x_final: &[f64]) -> Vec<Vec<f64>> {
        // absorb any grid points left at T by roundoff
        while self.next < self.grid.len() {
            self.states.push(x_final.to_vec());
            self.next += 1;
        }
        self.states
    }
}

fn normalized_grid(grid: &[f64], t_end: f64) -> Vec<f64> {
    let mut g: Vec<f64> = Vec::with_capacity(grid.len() + 2);
    g.push(0.0);
    for &t in grid {
        if t > 0.0 && t < t_end && *g.last().unwrap() < t {
            g.push(t);
        }
    }
    g.push(t_end);
    g
}

fn check_finite(x: &[f64], t: f64) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration { t, reason: "non-finite state (NaN/overflow)".into() });
    }
    Ok(())
}

/// Integrate dX/dt = rhs(X) from x0 over [0, t_end], sampling the configured
/// output grid. Deterministic: identical inputs give bit-identical output.
pub fn integrate<F>(rhs: F, x0: &[f64], t_end: f64, config: &IntegratorConfig) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
{
    config.validate(t_end)?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("initial state must be finite"));
    }
    let grid = normalized_grid(&config.output_grid, t_end);
    match config.method {
        Method::Rk45Adaptive => rk45(rhs, x0, t_end, config, &grid),
        Method::Rk4Fixed => rk4_fixed(rhs, x0, t_end, config, &grid),
    }
}

fn rk45<F>(rhs: F, x0: &[f64], t_end: f64, cfg: &IntegratorConfig, grid: &[f64]) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut t = 0.0f64;
    let mut dt = cfg.initial_dt.min(t_end);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    let mut x_new = vec![0.0; dim];
    let mut sampler = GridSampler::new(grid, &x);

    rhs(&x, &mut k[0]);
    let mut evals = 1usize;
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    while t < t_end {
        if accepted + rejected >= cfg.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("step budget {} exhausted before reaching {t_end}", cfg.max_steps),
            });
        }
        let min_dt = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if dt < min_dt {
            return Err(Error::Integration { t, reason: format!("step size underflow ({dt:.3e})") });
        }
        let h = dt.min(t_end - t);

        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += DP_A[s - 1][j] * kj[i];
                }
                stage[i] = x[i] + h * acc;
            }
            rhs(&stage, &mut k[s]);
        }
        evals += 6;

        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += DP_B5[j] * kj[i];
            }
            x_new[i] = x[i] + h * acc;
        }

        let mut err_norm = 0.0f64;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += (DP_B5[j] - DP_B4[j]) * kj[i];
            }
            e *= h;
            let scale = cfg.abs_tol + cfg.rel_tol * x[i].abs().max(x_new[i].abs());
            err_norm = err_norm.max((e / scale).abs());
        }

        if !err_norm.is_finite() {
            check_finite(&x_new, t)?;
            return Err(Error::Integration { t, reason: "non-finite error estimate".into() });
        }

        if err_norm <= 1.0 {
            check_finite(&x_new, t + h)?;
            // k[6] is f(x_new): FSAL
            sampler.advance(t, h, &x, &k[0], &x_new, &k[6]);
            t += h;
            std::mem::swap(&mut x, &mut x_new);
            k.swap(0, 6);
            accepted += 1;
        } else {
            rejected += 1;
        }

        let factor = if err_norm > 0.0 {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        dt = h * factor;
    }

    let states = sampler.finish(&x);
    let meta = TrajectoryMeta {
        method: Method::Rk45Adaptive.name(),
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol,
        accepted_steps: accepted,
        rejected_steps: rejected,
        rhs_evaluations: evals,
        energy_drift: drift_over(&states),
    };
    Ok(Trajectory { times: grid.to_vec(), states, meta })
}

fn rk4_fixed<F>(rhs: F, x0: &[f64], t_end: f64, cfg: &IntegratorConfig, grid: &[f64]) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut t = 0.0f64;
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut x_new = vec![0.0; dim];
    let mut f_new = vec![0.0; dim];
    let mut sampler = GridSampler::new(grid, &x);

    rhs(&x, &mut k1);
    let mut evals = 1usize;
    let mut steps = 0usize;

    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("step budget {} exhausted before reaching {t_end}", cfg.max_steps),
            });
        }
        let h = cfg.initial_dt.min(t_end - t);

        for i in 0..dim {
            stage[i] = x[i] + 0.5 * h * k1[i];
        }
        rhs(&stage, &mut k2);
        for i in 0..dim {
            stage[i] = x[i] + 0.5 * h * k2[i];
        }
        rhs(&stage, &mut k3);
        for i in 0..dim {
            stage[i] = x[i] + h * k3[i];
        }
        rhs(&stage, &mut k4);
        for i in 0..dim {
            x_new[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        rhs(&x_new, &mut f_new);
        evals += 4;
        check_finite(&x_new, t + h)?;

        sampler.advance(t, h, &x, &k1, &x_new, &f_new);
        t += h;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut k1, &mut f_new);
        steps += 1;
    }

    let states = sampler.finish(&x);
    let meta = TrajectoryMeta {
        method: Method::Rk4Fixed.name(),
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol,
        accepted_steps: steps,
        rejected_steps: 0,
        rhs_evaluations: evals,
        energy_drift: drift_over(&states),
    };
    Ok(Trajectory { times: grid.to_vec(), states, meta })
}
