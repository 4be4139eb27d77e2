//! Command-line front end: configuration parsing, the seven subcommands, and
//! all on-disk output formats.
//!
//! # Configuration file
//!
//! A single TOML document with sections selected by the command. Unknown
//! keys are rejected. Flags (`--seed`, `--threads`, `--out`) override the
//! file; the resolved configuration is echoed to `config.resolved.toml` in
//! the output directory and its SHA-256 is carried as `config_digest` by
//! every JSON summary.
//!
//! ```toml
//! [model]
//! kind = "shell"          # or "tree"
//! lambda = 2.0
//! n = 8                   # shell truncation level
//! # h_scale_index = 3     # optional Obukhov perturbation h_i = m·k_i
//! # h_scale_multiplier = 1.5
//! # branching = 2         # tree fields
//! # depth = 3
//! # alpha = 1.0
//! # beta = 1.0
//!
//! [initial]               # simulate / tree-simulate
//! kind = "gaussian"       # zero | gaussian | inverse_lambda | geometric
//! r = 1.0
//! # rho = 0.5
//!
//! [run]
//! seed = 42
//! t_final = 1.0
//!
//! [integrator]
//! method = "rk45_adaptive" # or "rk4_fixed"
//! abs_tol = 1e-10
//! rel_tol = 1e-10
//! max_steps = 50000000
//! # initial_dt = 1e-4     # omitted: stability heuristic
//! output_points = 1001
//!
//! [invariance]            # invariance / tree-invariance
//! samples = 10000
//! z_crit = 4.0
//! p_floor = 1e-4
//! snapshot_times = [0.1]
//!
//! [galerkin]
//! levels = [5, 8, 11, 14]
//! ic = "inverse_lambda"   # or "geometric"
//! # rho = 0.5
//! tracked = [1]
//!
//! [tails]
//! levels = [4, 8, 12]
//! samples = 500
//! s = -1.0
//! s1 = -2.0
//! p = 2.0
//! epsilons = [0.1, 0.01]
//! bootstrap_resamples = 1000
//!
//! [verify]
//! checks = ["divergence", "energy", "interpolation"]
//! states = 1000
//! interpolation_cases = 10000
//! ```
//!
//! # Output schemas
//!
//! - `trajectory.csv` — header `t,x_1,...,x_D`, one row per grid time.
//! - `summary.json` — `{command, model, params_digest, seed, config_digest,
//!   energy_initial, energy_final, drift, steps}`.
//! - `invariance.json` — `{model, params_digest, T, M, seed,
//!   per_component: [{mean_z, var_z, m4_z, ks_p}], verdict}`.
//! - `galerkin.csv` — `level,component,sup_diff_vs_ref,sup_diff_vs_next,max_abs,apriori_bound`.
//! - `tails.csv` — `level,statistic,epsilon,quantile,ci_lo,ci_hi`.
//! - `verify.json` — `{command, model, seed, config_digest, checks: [...], verdict}`.
//!
//! CSV is UTF-8, comma-separated, `\n` line endings, header row mandatory;
//! floats use the shortest round-trip decimal form. JSON key order follows
//! the struct definitions and is stable. All files are written to temporary
//! names and atomically renamed.
//!
//! Exit codes: 0 ok, 2 config error, 3 runtime failure, 4 verification
//! failure. A statistical FAIL verdict is not an error exit: the verdict
//! lives in the JSON.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    galerkin_convergence, tail_probability_study, GalerkinStudyConfig, IcFamily, ModelFamily,
    TailStudyConfig,
};
use crate::integrate::{integrate, suggested_initial_dt, IntegratorConfig, Method};
use crate::measures::{
    invariance_test, sample_at, GaussianSpec, InvarianceThresholds,
};
use crate::model::Model;
use crate::norms::{hs_norm, interpolation_theta, SobolevWeights};
use crate::shell::{energy, ShellParams};
use crate::stats::sha256_hex;
use crate::tree::{TreeParams, TreeTopology};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Verify,
    Invariance,
    Galerkin,
    Tails,
    TreeSimulate,
    TreeInvariance,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Verify => "verify",
            CommandKind::Invariance => "invariance",
            CommandKind::Galerkin => "galerkin",
            CommandKind::Tails => "tails",
            CommandKind::TreeSimulate => "tree-simulate",
            CommandKind::TreeInvariance => "tree-invariance",
        }
    }

    fn wants_tree(&self) -> Option<bool> {
        match self {
            CommandKind::Simulate | CommandKind::Invariance => Some(false),
            CommandKind::TreeSimulate | CommandKind::TreeInvariance => Some(true),
            _ => None,
        }
    }
}

/// One CLI invocation: command, config path, and the common flag overrides.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: CommandKind,
    pub config_path: PathBuf,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

// ---------------------------------------------------------------------------
// configuration schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKindCfg {
    Shell,
    Tree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelCfg {
    kind: ModelKindCfg,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_scale_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_scale_multiplier: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    branching: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InitialKindCfg {
    Zero,
    Gaussian,
    InverseLambda,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialCfg {
    kind: InitialKindCfg,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunCfg {
    seed: u64,
    t_final: f64,
}

fn default_abs_tol() -> f64 {
    1e-10
}

fn default_max_steps() -> usize {
    50_000_000
}

fn default_output_points() -> usize {
    1001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegratorCfg {
    #[serde(default = "default_method")]
    method: Method,
    #[serde(default = "default_abs_tol")]
    abs_tol: f64,
    #[serde(default = "default_abs_tol")]
    rel_tol: f64,
    #[serde(default = "default_max_steps")]
    max_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_dt: Option<f64>,
    #[serde(default = "default_output_points")]
    output_points: usize,
}

fn default_method() -> Method {
    Method::Rk45Adaptive
}

impl Default for IntegratorCfg {
    fn default() -> Self {
        IntegratorCfg {
            method: default_method(),
            abs_tol: default_abs_tol(),
            rel_tol: default_abs_tol(),
            max_steps: default_max_steps(),
            initial_dt: None,
            output_points: default_output_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InvarianceCfg {
    samples: usize,
    #[serde(default = "default_z_crit")]
    z_crit: f64,
    #[serde(default = "default_p_floor")]
    p_floor: f64,
    #[serde(default)]
    snapshot_times: Vec<f64>,
}

fn default_z_crit() -> f64 {
    4.0
}

fn default_p_floor() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GalerkinCfg {
    levels: Vec<usize>,
    ic: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    tracked: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailsCfg {
    levels: Vec<usize>,
    samples: usize,
    s: f64,
    s1: f64,
    p: f64,
    epsilons: Vec<f64>,
    #[serde(default = "default_resamples")]
    bootstrap_resamples: usize,
}

fn default_resamples() -> usize {
    1000
}

fn default_states() -> usize {
    1000
}

fn default_interp_cases() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyCfg {
    checks: Vec<String>,
    #[serde(default = "default_states")]
    states: usize,
    #[serde(default = "default_interp_cases")]
    interpolation_cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    model: ModelCfg,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial: Option<InitialCfg>,
    run: RunCfg,
    #[serde(default)]
    integrator: IntegratorCfg,
    #[serde(skip_serializing_if = "Option::is_none")]
    invariance: Option<InvarianceCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    galerkin: Option<GalerkinCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tails: Option<TailsCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<VerifyCfg>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }
}

enum BuiltModel {
    Shell(ShellParams),
    Tree(TreeParams),
}

impl BuiltModel {
    fn as_model(&self) -> &dyn Model {
        match self {
            BuiltModel::Shell(p) => p,
            BuiltModel::Tree(p) => p,
        }
    }

    fn max_coefficient(&self) -> f64 {
        match self {
            BuiltModel::Shell(p) => p.max_k(),
            BuiltModel::Tree(p) => p.max_coefficient(),
        }
    }
}

fn build_model(cfg: &ModelCfg) -> Result<BuiltModel> {
    match cfg.kind {
        ModelKindCfg::Shell => {
            let n = cfg.n.ok_or_else(|| Error::Config("shell model requires `n`".into()))?;
            for (name, set) in
                [("branching", cfg.branching.is_some()), ("depth", cfg.depth.is_some())]
            {
                if set {
                    return Err(Error::Config(format!("`{name}` is a tree field, model kind is shell")));
                }
            }
            let params = match (cfg.h_scale_index, cfg.h_scale_multiplier) {
                (None, None) => ShellParams::standard(n, cfg.lambda),
                (Some(i), Some(m)) => ShellParams::standard_with_h_scaled(n, cfg.lambda, i, m),
                _ => {
                    return Err(Error::Config(
                        "h_scale_index and h_scale_multiplier must be given together".into(),
                    ))
                }
            }
            .map_err(|e| Error::Config(format!("{e}")))?;
            Ok(BuiltModel::Shell(params))
        }
        ModelKindCfg::Tree => {
            let branching =
                cfg.branching.ok_or_else(|| Error::Config("tree model requires `branching`".into()))?;
            let depth = cfg.depth.ok_or_else(|| Error::Config("tree model requires `depth`".into()))?;
            let alpha = cfg.alpha.ok_or_else(|| Error::Config("tree model requires `alpha`".into()))?;
            let beta = cfg.beta.ok_or_else(|| Error::Config("tree model requires `beta`".into()))?;
            if cfg.n.is_some() || cfg.h_scale_index.is_some() || cfg.h_scale_multiplier.is_some() {
                return Err(Error::Config("`n`/`h_scale_*` are shell fields, model kind is tree".into()));
            }
            let topo = TreeTopology::regular(branching, depth).map_err(|e| Error::Config(format!("{e}")))?;
            let params = TreeParams::standard(topo, alpha, beta, cfg.lambda)
                .map_err(|e| Error::Config(format!("{e}")))?;
            Ok(BuiltModel::Tree(params))
        }
    }
}

fn build_initial(cfg: &RunConfig, dim: usize) -> Result<Vec<f64>> {
    let initial = cfg
        .initial
        .as_ref()
        .ok_or_else(|| Error::Config("simulate requires an [initial] section".into()))?;
    match initial.kind {
        InitialKindCfg::Zero => Ok(vec![0.0; dim]),
        InitialKindCfg::Gaussian => {
            let r = initial.r.unwrap_or(1.0);
            let spec = GaussianSpec::new(dim, r, cfg.run.seed).map_err(|e| Error::Config(format!("{e}")))?;
            Ok(sample_at(&spec, 0))
        }
        InitialKindCfg::InverseLambda => {
            IcFamily::InverseLambda.truncate(dim, cfg.model.lambda).map_err(|e| Error::Config(format!("{e}")))
        }
        InitialKindCfg::Geometric => {
            let rho = initial.rho.ok_or_else(|| Error::Config("geometric initial needs `rho`".into()))?;
            IcFamily::GeometricDecay { rho }.truncate(dim, cfg.model.lambda).map_err(|e| Error::Config(format!("{e}")))
        }
    }
}

fn integrator_config(cfg: &RunConfig, model: &BuiltModel, x0: &[f64]) -> IntegratorConfig {
    let ic = &cfg.integrator;
    let dt0 = ic.initial_dt.unwrap_or_else(|| suggested_initial_dt(model.max_coefficient(), x0));
    let mut out = match ic.method {
        Method::Rk45Adaptive => IntegratorConfig::rk45(ic.abs_tol, ic.rel_tol),
        Method::Rk4Fixed => IntegratorConfig::rk4(dt0),
    };
    out.max_steps = ic.max_steps;
    out.initial_dt = dt0;
    out
}

// ---------------------------------------------------------------------------
// output plumbing

/// Shortest round-trip decimal form (Rust's float Display).
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("{e}")))?;
    text.push('\n');
    atomic_write(path, &text)
}

#[derive(Debug, Serialize)]
struct StepsSummary {
    accepted: usize,
    rejected: usize,
    rhs_evaluations: usize,
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    command: String,
    model: String,
    params_digest: String,
    seed: u64,
    config_digest: String,
    energy_initial: f64,
    energy_final: f64,
    drift: f64,
    steps: StepsSummary,
}

#[derive(Debug, Serialize)]
struct CheckResult {
    check: String,
    pass: bool,
    measured: f64,
    bound: f64,
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    command: String,
    model: String,
    seed: u64,
    config_digest: String,
    checks: Vec<CheckResult>,
    verdict: String,
}

#[derive(Debug, Serialize)]
struct StudySummary<T: Serialize> {
    command: String,
    model: String,
    seed: u64,
    config_digest: String,
    #[serde(flatten)]
    table: T,
}

// ---------------------------------------------------------------------------
// command implementations

fn cmd_simulate(cfg: &RunConfig, ctx: &OutputContext) -> Result<i32> {
    let model = build_model(&cfg.model)?;
    let dim = model.as_model().dim();
    let x0 = build_initial(cfg, dim)?;
    let t_final = cfg.run.t_final;
    let run_cfg = integrator_config(cfg, &model, &x0)
        .with_uniform_grid(t_final, cfg.integrator.output_points.max(2));
    let m = model.as_model();
    let traj = integrate(|x, out| m.eval_rhs_into(x, out), &x0, t_final, &run_cfg)?;

    let mut csv = String::from("t");
    for j in 1..=dim {
        csv.push_str(&format!(",x_{j}"));
    }
    csv.push('\n');
    for (t, state) in traj.times().iter().zip(traj.states()) {
        csv.push_str(&fmt_f64(*t));
        for v in state {
            csv.push(',');
            csv.push_str(&fmt_f64(*v));
        }
        csv.push('\n');
    }
    atomic_write(&ctx.dir.join("trajectory.csv"), &csv)?;

    let summary = SimulateSummary {
        command: ctx.command.to_string(),
        model: m.kind().to_string(),
        params_digest: sha256_hex(m.digest_string().as_bytes()),
        seed: cfg.run.seed,
        config_digest: ctx.config_digest.clone(),
        energy_initial: energy(traj.state(0)),
        energy_final: energy(traj.final_state()),
        drift: traj.meta.energy_drift,
        steps: StepsSummary {
            accepted: traj.meta.accepted_steps,
            rejected: traj.meta.rejected_steps,
            rhs_evaluations: traj.meta.rhs_evaluations,
        },
    };
    write_json(&ctx.dir.join("summary.json"), &summary)?;
    Ok(EXIT_OK)
}

fn verify_shell_divergence(params: &ShellParams, states: usize, seed: u64) -> (f64, f64, bool) {
    let n = params.n();
    let mut worst = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut pass = true;
    for trial in 0..states as u64 {
        let x: Vec<f64> = (0..n)
            .map(|j| 2.0 * crate::measures::sample_standard_normal(seed, trial, j as u64))
            .collect();
        let r = params.divergence_residual(&x).expect("dims match").abs();
        let bound = 1e-12 * params.max_k() * energy(&x).sqrt() * n as f64 + 1e-300;
        if r > worst {
            worst = r;
            worst_bound = bound;
        }
        if r > bound {
            pass = false;
        }
    }
    // basis vectors catch interior h ≠ k exactly
    for i in 1..=n {
        let mut e = vec![0.0; n];
        e[i - 1] = 1.0;
        let r = params.divergence_residual(&e).expect("dims match").abs();
        let bound = 1e-12 * params.max_k() * n as f64 + 1e-300;
        if r > worst {
            worst = r;
            worst_bound = bound;
        }
        if r > bound {
            pass = false;
        }
    }
    (worst, worst_bound, pass)
}

fn verify_tree_divergence(params: &TreeParams, states: usize, seed: u64) -> (f64, f64, bool) {
    let q = params.dim();
    let mut worst = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut pass = true;
    for trial in 0..states as u64 {
        let x: Vec<f64> = (0..q)
            .map(|j| 2.0 * crate::measures::sample_standard_normal(seed, trial, j as u64))
            .collect();
        let r = params.divergence_residual(&x).expect("dims match").abs();
        let bound = 1e-12 * params.max_coefficient() * energy(&x).sqrt() * q as f64 + 1e-300;
        if r > worst {
            worst = r;
            worst_bound = bound;
        }
        if r > bound {
            pass = false;
        }
    }
    (worst, worst_bound, pass)
}

fn cmd_verify(cfg: &RunConfig, ctx: &OutputContext) -> Result<i32> {
    let verify = cfg
        .verify
        .as_ref()
        .ok_or_else(|| Error::Config("verify requires a [verify] section".into()))?;
    let model = build_model(&cfg.model)?;
    if verify.checks.is_empty() {
        eprintln!("warning: empty check list, trivial PASS");
    }
    let mut results = Vec::new();
    for check in &verify.checks {
        let result = match (check.as_str(), &model) {
            ("divergence", BuiltModel::Shell(p)) => {
                let (measured, bound, pass) = verify_shell_divergence(p, verify.states, cfg.run.seed);
                CheckResult { check: check.clone(), pass, measured, bound }
            }
            ("divergence", BuiltModel::Tree(p)) => {
                let (measured, bound, pass) = verify_tree_divergence(p, verify.states, cfg.run.seed);
                CheckResult { check: check.clone(), pass, measured, bound }
            }
            ("energy", m) => {
                let dim = m.as_model().dim();
                let max_coeff = m.max_coefficient();
                let mut worst = 0.0f64;
                let mut worst_bound = 0.0f64;
                let mut pass = true;
                for trial in 0..verify.states as u64 {
                    let x: Vec<f64> = (0..dim)
                        .map(|j| {
                            2.0 * crate::measures::sample_standard_normal(cfg.run.seed ^ 1, trial, j as u64)
                        })
                        .collect();
                    let r = match m {
                        BuiltModel::Shell(p) => p.energy_quadratic_residual(&x).expect("dims"),
                        BuiltModel::Tree(p) => p.energy_quadratic_residual(&x).expect("dims"),
                    }
                    .abs();
                    let bound = 1e-9 * max_coeff * energy(&x).sqrt().powi(3) + 1e-300;
                    if r > worst {
                        worst = r;
                        worst_bound = bound;
                    }
                    if r > bound {
                        pass = false;
                    }
                }
                CheckResult { check: check.clone(), pass, measured: worst, bound: worst_bound }
            }
            ("interpolation", _) => {
                let mut violations = 0usize;
                let mut worst = 0.0f64;
                for trial in 0..verify.interpolation_cases as u64 {
                    let u = |c: u64| crate::measures::uniform_01(cfg.run.seed ^ 2, trial, c);
                    let dim = 1 + (u(0) * 64.0) as usize;
                    let s0 = -0.05 - 2.0 * u(1);
                    let s1 = s0 - 0.05 - 3.0 * u(2);
                    let s = s1 + (s0 - s1) * (0.05 + 0.9 * u(3));
                    let theta = interpolation_theta(s0, s1, s).expect("admissible by construction");
                    let x: Vec<f64> = (0..dim)
                        .map(|j| crate::measures::sample_standard_normal(cfg.run.seed ^ 3, trial, j as u64))
                        .collect();
                    let lambda = cfg.model.lambda;
                    let n = hs_norm(&SobolevWeights::new(s, lambda, dim).expect("valid"), &x).expect("dims");
                    let n0 = hs_norm(&SobolevWeights::new(s0, lambda, dim).expect("valid"), &x).expect("dims");
                    let n1 = hs_norm(&SobolevWeights::new(s1, lambda, dim).expect("valid"), &x).expect("dims");
                    let bound = n0.powf(theta) * n1.powf(1.0 - theta);
                    let rel = if bound > 0.0 { n / bound - 1.0 } else { 0.0 };
                    worst = worst.max(rel);
                    if rel > 1e-12 {
                        violations += 1;
                    }
                }
                CheckResult {
                    check: check.clone(),
                    pass: violations == 0,
                    measured: worst,
                    bound: 1e-12,
                }
            }
            (other, _) => {
                return Err(Error::Config(format!(
                    "unknown check `{other}` (expected divergence, energy or interpolation)"
                )))
            }
        };
        results.push(result);
    }
    let all_pass = results.iter().all(|r| r.pass);
    let summary = VerifySummary {
        command: ctx.command.to_string(),
        model: model.as_model().kind().to_string(),
        seed: cfg.run.seed,
        config_digest: ctx.config_digest.clone(),
        checks: results,
        verdict: if all_pass { "PASS" } else { "FAIL" }.to_string(),
    };
    write_json(&ctx.dir.join("verify.json"), &summary)?;
    Ok(if all_pass { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_invariance(cfg: &RunConfig, ctx: &OutputContext) -> Result<i32> {
    let inv = cfg
        .invariance
        .as_ref()
        .ok_or_else(|| Error::Config("invariance requires an [invariance] section".into()))?;
    let model = build_model(&cfg.model)?;
    let m = model.as_model();
    let r = cfg.initial.as_ref().and_then(|i| i.r).unwrap_or(1.0);
    let spec = GaussianSpec::new(m.dim(), r, cfg.run.seed).map_err(|e| Error::Config(format!("{e}")))?;
    let probe = sample_at(&spec, 0);
    let run_cfg = integrator_config(cfg, &model, &probe);
    let thresholds = InvarianceThresholds { z_crit: inv.z_crit, p_floor: inv.p_floor };
    let outcome = match &model {
        BuiltModel::Shell(p) => invariance_test(
            p,
            &spec,
            cfg.run.t_final,
            inv.samples,
            &run_cfg,
            &inv.snapshot_times,
            thresholds,
        )?,
        BuiltModel::Tree(p) => invariance_test(
            p,
            &spec,
            cfg.run.t_final,
            inv.samples,
            &run_cfg,
            &inv.snapshot_times,
            thresholds,
        )?,
    };
    #[derive(Serialize)]
    struct Wrapper<'a> {
        #[serde(flatten)]
        report: &'a crate::measures::InvarianceReport,
        config_digest: &'a str,
    }
    write_json(
        &ctx.dir.join("invariance.json"),
        &Wrapper { report: &outcome.report, config_digest: &ctx.config_digest },
    )?;
    Ok(EXIT_OK)
}

fn family_from_cfg(cfg: &ModelCfg) -> Result<ModelFamily> {
    match cfg.kind {
        ModelKindCfg::Shell => Ok(ModelFamily::Shell { lambda: cfg.lambda }),
        ModelKindCfg::Tree => Ok(ModelFamily::Tree {
            branching: cfg.branching.ok_or_else(|| Error::Config("tree model requires `branching`".into()))?,
            alpha: cfg.alpha.ok_or_else(|| Error::Config("tree model requires `alpha`".into()))?,
            beta: cfg.beta.ok_or_else(|| Error::Config("tree model requires `beta`".into()))?,
            lambda: cfg.lambda,
        }),
    }
}

fn cmd_galerkin(cfg: &RunConfig, ctx: &OutputContext) -> Result<i32> {
    let gal = cfg
        .galerkin
        .as_ref()
        .ok_or_else(|| Error::Config("galerkin requires a [galerkin] section".into()))?;
    let ic = match gal.ic.as_str() {
        "inverse_lambda" => IcFamily::InverseLambda,
        "geometric" => IcFamily::GeometricDecay {
            rho: gal.rho.ok_or_else(|| Error::Config("geometric ic needs `rho`".into()))?,
        },
        other => return Err(Error::Config(format!("unknown ic family `{other}`"))),
    };
    let study = GalerkinStudyConfig {
        family: family_from_cfg(&cfg.model)?,
        ic,
        levels: gal.levels.clone(),
        t_final: cfg.run.t_final,
        integrator: match cfg.integrator.method {
            Method::Rk45Adaptive => IntegratorConfig::rk45(cfg.integrator.abs_tol, cfg.integrator.rel_tol),
            Method::Rk4Fixed => IntegratorConfig::rk4(cfg.integrator.initial_dt.unwrap_or(1e-4)),
        },
        output_points: cfg.integrator.output_points,
        tracked: gal.tracked.clone(),
    };
    let table = galerkin_convergence(&study).map_err(study_error)?;

    let mut csv =
        String::from("level,component,sup_diff_vs_ref,sup_diff_vs_next,max_abs,apriori_bound\n");
    for row in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.level,
            row.component,
            fmt_f64(row.sup_diff_vs_ref),
            row.sup_diff_vs_next.map(fmt_f64).unwrap_or_default(),
            fmt_f64(row.max_abs),
            fmt_f64(row.apriori_bound),
        ));
    }
    atomic_write(&ctx.dir.join("galerkin.csv"), &csv)?;
    let summary = StudySummary {
        command: ctx.command.to_string(),
        model: study.family.label().to_string(),
        seed: cfg.run.seed,
        config_digest: ctx.config_digest.clone(),
        table,
    };
    write_json(&ctx.dir.join("galerkin.json"), &summary)?;
    Ok(EXIT_OK)
}

fn cmd_tails(cfg: &RunConfig, ctx: &OutputContext) -> Result<i32> {
    let tails = cfg
        .tails
        .as_ref()
        .ok_or_else(|| Error::Config("tails requires a [tails] section".into()))?;
    let study = TailStudyConfig {
        family: family_from_cfg(&cfg.model)?,
        s: tails.s,
        s1: tails.s1,
        r: cfg.initial.as_ref().and_then(|i| i.r).unwrap_or(1.0),
        p: tails.p,
        t_final: cfg.run.t_final,
        samples: tails.samples,
        levels: tails.levels.clone(),
        seed: cfg.run.seed,
        integrator: IntegratorConfig::rk45(cfg.integrator.abs_tol, cfg.integrator.rel_tol),
        output_points: cfg.integrator.output_points,
        epsilons: tails.epsilons.clone(),
        bootstrap_resamples: tails.bootstrap_resamples,
    };
    let table = tail_probability_study(&study).map_err(study_error)?;

    let mut csv = String::from("level,statistic,epsilon,quantile,ci_lo,ci_hi\n");
    for row in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.level,
            row.statistic,
            fmt_f64(row.epsilon),
            fmt_f64(row.quantile),
            fmt_f64(row.ci_lo),
            fmt_f64(row.ci_hi),
        ));
    }
    atomic_write(&ctx.dir.join("tails.csv"), &csv)?;
    let summary = StudySummary {
        command: ctx.command.to_string(),
        model: study.family.label().to_string(),
        seed: cfg.run.seed,
        config_digest: ctx.config_digest.clone(),
        table,
    };
    write_json(&ctx.dir.join("tails.json"), &summary)?;
    Ok(EXIT_OK)
}

/// Domain errors inside a study are config problems (bad levels, exponents);
/// integration failures are runtime problems. Distinguish for the exit code.
fn study_error(e: Error) -> Error {
    match e {
        Error::ParamDomain(msg) => Error::Config(msg),
        other => other,
    }
}

struct OutputContext {
    command: &'static str,
    dir: PathBuf,
    config_digest: String,
}

/// Run one invocation end to end and return the process exit code.
pub fn execute(inv: &Invocation) -> i32 {
    match execute_inner(inv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::ParamDomain(_) | Error::DimensionMismatch { .. } => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn execute_inner(inv: &Invocation) -> Result<i32> {
    let text = fs::read_to_string(&inv.config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", inv.config_path.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = inv.seed {
        cfg.run.seed = seed;
    }
    if let Some(want_tree) = inv.command.wants_tree() {
        let is_tree = cfg.model.kind == ModelKindCfg::Tree;
        if want_tree != is_tree {
            return Err(Error::Config(format!(
                "command `{}` requires model kind {}",
                inv.command.name(),
                if want_tree { "tree" } else { "shell" }
            )));
        }
    }
    // validate the model (and sections) before touching the filesystem
    build_model(&cfg.model)?;
    if !(cfg.run.t_final >= 0.0) || !cfg.run.t_final.is_finite() {
        return Err(Error::Config(format!("t_final must be nonnegative, got {}", cfg.run.t_final)));
    }

    let resolved = cfg.to_toml();
    let config_digest = sha256_hex(resolved.as_bytes());

    fs::create_dir_all(&inv.out_dir)?;
    let ctx = OutputContext {
        command: inv.command.name(),
        dir: inv.out_dir.clone(),
        config_digest,
    };
    atomic_write(&ctx.dir.join("config.resolved.toml"), &resolved)?;

    let body = || -> Result<i32> {
        match inv.command {
            CommandKind::Simulate | CommandKind::TreeSimulate => cmd_simulate(&cfg, &ctx),
            CommandKind::Verify => cmd_verify(&cfg, &ctx),
            CommandKind::Invariance | CommandKind::TreeInvariance => cmd_invariance(&cfg, &ctx),
            CommandKind::Galerkin => cmd_galerkin(&cfg, &ctx),
            CommandKind::Tails => cmd_tails(&cfg, &ctx),
        }
    };

    match inv.threads {
        Some(threads) if threads > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(body)
        }
        _ => body(),
    }
}
