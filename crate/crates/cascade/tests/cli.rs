//! Process-level tests of the `cascade` binary: exit codes, output schema
//! goldens, and config handling.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cascade")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path) -> std::process::Output {
    Command::new(bin())
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", "2"])
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

const SHELL_BASE: &str = r#"
[model]
kind = "shell"
lambda = 2.0
n = 4

[initial]
kind = "zero"

[run]
seed = 3
t_final = 0.5

[integrator]
abs_tol = 1e-9
rel_tol = 1e-9
output_points = 11
"#;

#[test]
fn simulate_zero_ic_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", SHELL_BASE);
    let out = dir.path().join("out");
    let result = run("simulate", &cfg, &out);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&result.stderr));

    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x_1,x_2,x_3,x_4");
    // constant-zero trajectory: every state column is exactly 0
    for line in lines {
        let mut cols = line.split(',');
        cols.next().unwrap();
        for col in cols {
            assert_eq!(col, "0");
        }
    }
    assert_eq!(csv.lines().count(), 12);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["drift"], 0.0);
    assert_eq!(summary["energy_initial"], 0.0);
    assert!(summary["config_digest"].as_str().unwrap().len() == 64);
    assert_eq!(summary["seed"], 3);
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", "[model]\nkind = \"shell\"\nthis_is_not_a_key = 1");
    let out = dir.path().join("out");
    let result = run("simulate", &cfg, &out);
    assert_eq!(result.status.code(), Some(2));
    assert!(!out.exists(), "no output dir may be created on config errors");

    // missing file is also a config error
    let result = run("simulate", &dir.path().join("nope.toml"), &out);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn command_model_kind_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", SHELL_BASE);
    let out = dir.path().join("out");
    let result = run("tree-simulate", &cfg, &out);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn step_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = SHELL_BASE
        .replace("kind = \"zero\"", "kind = \"gaussian\"\nr = 1.0")
        .replace("output_points = 11", "output_points = 11\nmax_steps = 5");
    let cfg = write(dir.path(), "cfg.toml", &body);
    let out = dir.path().join("out");
    let result = run("simulate", &cfg, &out);
    assert_eq!(result.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&result.stderr));
}

#[test]
fn verify_standard_passes_and_perturbed_fails() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{SHELL_BASE}\n[verify]\nchecks = [\"divergence\", \"energy\", \"interpolation\"]\nstates = 200\ninterpolation_cases = 500\n"
    );
    let cfg = write(dir.path(), "ok.toml", &body);
    let out = dir.path().join("ok");
    let result = run("verify", &cfg, &out);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "PASS");
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);

    // h-perturbed coefficients: divergence check FAIL, exit 4
    let perturbed = body.replace(
        "n = 4",
        "n = 8\nh_scale_index = 3\nh_scale_multiplier = 1.5",
    );
    let cfg = write(dir.path(), "bad.toml", &perturbed);
    let out = dir.path().join("bad");
    let result = run("verify", &cfg, &out);
    assert_eq!(result.status.code(), Some(4));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "FAIL");
    let diverge = &report["checks"].as_array().unwrap()[0];
    assert_eq!(diverge["check"], "divergence");
    assert_eq!(diverge["pass"], false);

    // empty check list: trivial PASS with a warning on stderr
    let empty = body.replace("checks = [\"divergence\", \"energy\", \"interpolation\"]", "checks = []");
    let cfg = write(dir.path(), "empty.toml", &empty);
    let out = dir.path().join("empty");
    let result = run("verify", &cfg, &out);
    assert_eq!(result.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&result.stderr).contains("warning"));
}

#[test]
fn invariance_statistical_verdict_is_not_an_error_exit() {
    let dir = tempfile::tempdir().unwrap();
    // perturbed model: verdict FAIL, but exit code stays 0
    let body = r#"
[model]
kind = "shell"
lambda = 2.0
n = 8
h_scale_index = 3
h_scale_multiplier = 1.5

[initial]
kind = "gaussian"
r = 1.0

[run]
seed = 9
t_final = 0.5

[integrator]
abs_tol = 1e-8
rel_tol = 1e-8

[invariance]
samples = 2000
"#;
    let cfg = write(dir.path(), "cfg.toml", body);
    let out = dir.path().join("out");
    let result = run("invariance", &cfg, &out);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("invariance.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "FAIL");
    assert_eq!(report["model"], "shell");
    assert_eq!(report["M"], 2000);
    assert_eq!(report["T"], 0.5);
    assert_eq!(report["per_component"].as_array().unwrap().len(), 8);
    for comp in report["per_component"].as_array().unwrap() {
        for key in ["mean_z", "var_z", "m4_z", "ks_p"] {
            assert!(comp[key].is_number(), "missing {key}");
        }
    }
}

#[test]
fn galerkin_and_tails_schema_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[model]
kind = "shell"
lambda = 2.0
n = 4

[run]
seed = 5
t_final = 0.2

[integrator]
abs_tol = 1e-8
rel_tol = 1e-8
output_points = 51

[galerkin]
levels = [4, 6, 8]
ic = "inverse_lambda"
tracked = [1, 2]

[tails]
levels = [4, 6]
samples = 48
s = -1.0
s1 = -2.0
p = 2.0
epsilons = [0.1]
bootstrap_resamples = 100
"#;
    let cfg = write(dir.path(), "cfg.toml", body);

    let out = dir.path().join("galerkin");
    let result = run("galerkin", &cfg, &out);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let csv = std::fs::read_to_string(out.join("galerkin.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "level,component,sup_diff_vs_ref,sup_diff_vs_next,max_abs,apriori_bound"
    );
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("galerkin.json")).unwrap()).unwrap();
    assert_eq!(summary["reference_level"], 8);

    let out = dir.path().join("tails");
    let result = run("tails", &cfg, &out);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let csv = std::fs::read_to_string(out.join("tails.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "level,statistic,epsilon,quantile,ci_lo,ci_hi");
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn resolved_config_reparses_and_digest_matches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", SHELL_BASE);
    let out = dir.path().join("out");
    // seed override must land in the resolved config
    let result = Command::new(bin())
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "777"])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0));
    let resolved = std::fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 777"));
    let reparsed = cascade::cli::RunConfig::parse(&resolved).unwrap();
    assert_eq!(reparsed.to_toml(), resolved);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(
        summary["config_digest"].as_str().unwrap(),
        cascade::stats::sha256_hex(resolved.as_bytes())
    );
    assert_eq!(summary["seed"], 777);
}

#[test]
fn tree_simulate_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[model]
kind = "tree"
lambda = 2.0
branching = 2
depth = 4

alpha = 1.0
beta = 1.0

[initial]
kind = "gaussian"
r = 1.0

[run]
seed = 21
t_final = 0.5

[integrator]
abs_tol = 1e-10
rel_tol = 1e-10
output_points = 101

[verify]
checks = ["divergence", "energy"]
states = 200
"#;
    let cfg = write(dir.path(), "cfg.toml", body);
    let out = dir.path().join("out");
    let result = run("tree-simulate", &cfg, &out);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("t,x_1,"));
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 1 + 31);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["drift"].as_f64().unwrap() < 1e-7);
    assert_eq!(summary["model"], "tree");

    // the analytic property suites run on the tree model as well
    let vout = dir.path().join("verify");
    let result = run("verify", &cfg, &vout);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(vout.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "PASS");
    assert_eq!(report["model"], "tree");
}
