//! The mixed shell model: coefficients, vector field, kinetic energy, and
//! the analytic divergence-condition residuals that characterize Gaussian
//! invariance.
//!
//! The truncated model on ℝ^N is
//!
//! ```text
//! dX_n/dt = k_n X_{n-1}² − k_{n+1} X_n X_{n+1} − h_n X_{n+1}² + h_{n-1} X_{n-1} X_n
//! ```
//!
//! with ghost values X_0 = X_{N+1} = 0 and, for the standard model,
//! h = k, k_n = λⁿ on 1 < n < N, and k_0 = k_1 = k_N = k_{N+1} = 0.
//! The generalized Obukhov-side coefficients h allow deliberately breaking
//! the matched-coefficient condition h = k that Gaussian invariance demands,
//! while both choices conserve the kinetic energy Σ X_n².

use crate::error::{Error, Result};
use crate::model::Model;

/// Coefficients of the truncated mixed shell model.
///
/// The coefficient arrays are dense over indices 0..=N+1 (boundary zeros
/// included) so the right-hand-side loop needs no index branches.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellParams {
    n: usize,
    lambda: f64,
    k: Vec<f64>,
    /// Generalized Obukhov-side coefficients; `None` means h = k.
    h: Option<Vec<f64>>,
}

impl ShellParams {
    /// Standard builder: k_n = λⁿ for 1 < n < N, zero at 0, 1, N, N+1; h absent.
    pub fn standard(n: usize, lambda: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("shell truncation N must be >= 2, got {n}")));
        }
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("lambda must be > 1, got {lambda}")));
        }
        let mut k = vec![0.0; n + 2];
        for (i, slot) in k.iter_mut().enumerate().take(n).skip(2) {
            *slot = lambda.powi(i as i32);
        }
        Ok(ShellParams { n, lambda, k, h: None })
    }

    /// Builder with explicit coefficient arrays, both of length N + 2.
    pub fn with_coefficients(n: usize, lambda: f64, k: Vec<f64>, h: Option<Vec<f64>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("shell truncation N must be >= 2, got {n}")));
        }
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("lambda must be > 1, got {lambda}")));
        }
        let check = |name: &str, a: &[f64]| -> Result<()> {
            if a.len() != n + 2 {
                return Err(Error::dims(n + 2, a.len()));
            }
            if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::domain(format!("{name} entries must be finite and nonnegative")));
            }
            Ok(())
        };
        check("k", &k)?;
        if let Some(ref h) = h {
            check("h", h)?;
        }
        Ok(ShellParams { n, lambda, k, h })
    }

    /// Standard params with one Obukhov coefficient rescaled: h = k except
    /// h_i = multiplier · k_i. With multiplier ≠ 1 at an interior index the
    /// Gaussian measure stops being invariant while energy stays conserved.
    pub fn standard_with_h_scaled(n: usize, lambda: f64, index: usize, multiplier: f64) -> Result<Self> {
        let base = ShellParams::standard(n, lambda)?;
        if index < 2 || index > n - 1 {
            return Err(Error::domain(format!(
                "perturbation index must lie in 2..={}, got {index}",
                n - 1
            )));
        }
        if !multiplier.is_finite() || multiplier < 0.0 {
            return Err(Error::domain(format!("multiplier must be finite and nonnegative, got {multiplier}")));
        }
        let mut h = base.k.clone();
        h[index] *= multiplier;
        ShellParams::with_coefficients(n, lambda, base.k, Some(h))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Novikov-side coefficients, indices 0..=N+1.
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// Obukhov-side coefficients; equal to `k()` when no override is set.
    pub fn h(&self) -> &[f64] {
        self.h.as_deref().unwrap_or(&self.k)
    }

    pub fn has_h_override(&self) -> bool {
        self.h.is_some()
    }

    pub fn max_k(&self) -> f64 {
        self.k.iter().cloned().fold(0.0, f64::max)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::dims(self.n, x.len()));
        }
        Ok(())
    }

    /// The vector field b(x). Ghost values x_0 = x_{N+1} are hard-coded to
    /// zero; states never allocate ghost slots.
    pub fn eval_rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.eval_rhs_vec(x))
    }

    /// Sum of the divergence-condition linear part,
    /// Σ_n (−k_{n+1} x_{n+1} + h_{n−1} x_{n−1}).
    ///
    /// Telescopes to zero exactly for the standard model; for h ≠ k it
    /// collapses to Σ_{i=2}^{N−1} (h_i − k_i) x_i plus boundary terms, the
    /// analytic witness that Gaussian invariance forces h = k.
    pub fn divergence_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let n = self.n;
        let k = &self.k;
        let h = self.h();
        let get = |i: usize| -> f64 {
            if i >= 1 && i <= n {
                x[i - 1]
            } else {
                0.0
            }
        };
        let mut acc = 0.0;
        for m in 1..=n {
            acc += -k[m + 1] * get(m + 1) + h[m - 1] * get(m - 1);
        }
        Ok(acc)
    }

    /// ⟨x, b(x)⟩, the cubic (energy) part of the divergence condition.
    /// Zero up to roundoff for every admissible coefficient choice: both the
    /// Novikov and the Obukhov sums telescope on their own.
    pub fn energy_quadratic_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let b = self.eval_rhs_vec(x);
        Ok(x.iter().zip(&b).map(|(xi, bi)| xi * bi).sum())
    }

    /// Per-component equi-Lipschitz bound E·(2k_j + k_{j+1} + k_{j−1}) on
    /// |dX_j/dt| given an energy level E, from the a-priori estimate used to
    /// prove Galerkin compactness.
    pub fn lipschitz_bound(&self, energy: f64, j: usize) -> f64 {
        let k = |i: usize| self.k.get(i).copied().unwrap_or(0.0);
        let h = |i: usize| self.h().get(i).copied().unwrap_or(0.0);
        // k_j + k_{j+1} + h_j + h_{j-1}; reduces to 2k_j + k_{j+1} + k_{j-1}
        // when h = k
        energy * (k(j) + k(j + 1) + h(j) + h(j.saturating_sub(1)))
    }
}

impl Model for ShellParams {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval_rhs_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        let n = self.n;
        let k = &self.k;
        let h = self.h.as_deref().unwrap_or(&self.k);
        if n == 0 {
            return;
        }
        // boundary components handled separately so the interior loop stays
        // free of ghost-index branches
        {
            let xp = if n > 1 { x[1] } else { 0.0 };
            out[0] = -k[2] * x[0] * xp - h[1] * xp * xp;
        }
        for m in 2..n {
            let xm = x[m - 2];
            let xc = x[m - 1];
            let xp = x[m];
            out[m - 1] = k[m] * xm * xm - k[m + 1] * xc * xp - h[m] * xp * xp + h[m - 1] * xm * xc;
        }
        if n > 1 {
            let xm = x[n - 2];
            let xc = x[n - 1];
            out[n - 1] = k[n] * xm * xm + h[n - 1] * xm * xc;
        }
    }

    fn kind(&self) -> &'static str {
        "shell"
    }

    fn digest_string(&self) -> String {
        let mut s = format!("shell;n={};lambda={};k=", self.n, self.lambda);
        for v in &self.k {
            s.push_str(&format!("{v},"));
        }
        if let Some(ref h) = self.h {
            s.push_str(";h=");
            for v in h {
                s.push_str(&format!("{v},"));
            }
        }
        s
    }
}

/// Kinetic energy Σ x_n².
pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
