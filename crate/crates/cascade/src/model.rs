//! Common interface over the shell and tree vector fields.
//!
//! Both models are autonomous polynomial ODE systems on ℝ^D; the ensemble
//! machinery (integration, invariance testing, tail studies) only needs the
//! dimension and the right-hand side, so it is written against this trait.

/// A finite-dimensional cascade model.
pub trait Model: Send + Sync {
    /// Number of active components D.
    fn dim(&self) -> usize;

    /// Evaluate the vector field into `out`. Both slices must have length
    /// [`Model::dim`]; this is the allocation-free hot path and callers are
    /// expected to have validated dimensions.
    fn eval_rhs_into(&self, x: &[f64], out: &mut [f64]);

    /// Short model tag used in reports ("shell" or "tree").
    fn kind(&self) -> &'static str;

    /// Canonical textual form of the parameters, used for content digests.
    fn digest_string(&self) -> String;

    /// Convenience allocating wrapper around [`Model::eval_rhs_into`].
    fn eval_rhs_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_rhs_into(x, &mut out);
        out
    }
}
