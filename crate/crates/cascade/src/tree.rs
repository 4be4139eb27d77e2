//! The dyadic-tree cascade: bounded-branching topology, truncated dynamics,
//! energy conservation, and the tree divergence condition for Gaussian
//! invariance.
//!
//! Each eddy j carries an intensity X_j; the parent of j is written j̄ and
//! O_j is its offspring set (|O_j| = m_j ≤ M). The truncated field is
//!
//! ```text
//! dX_j/dt = α (c_j X_{j̄}² − Σ_{k∈O_j} c_k X_j X_k)
//!         + β ((d_{j̄}/m_{j̄}) X_{j̄} X_j − (d_j/m_j) Σ_{k∈O_j} X_k²)
//! ```
//!
//! with c_0 = d_0 = 0, c_j = d_j = 0 on levels ≥ N, c_j = λ on level 1 and
//! c_j = λ c_{j̄} on levels 2..N−1. The Obukhov-side coupling d_j is split
//! evenly across the m_j children; on a branching-1 chain the field reduces
//! component-wise to the generalized shell model with k_n = α c_{n−1},
//! h_n = β d_{n−1}. Energy Σ X_j² is conserved for every coefficient choice
//! (both sums telescope over parent/child pairs), and the product Gaussian
//! measure is invariant exactly when α c_j − β d_j = 0 on the interior
//! levels — the matched-coefficient condition `TreeParams::standard` builds.
//!
//! States are plain `&[f64]` slices indexed by level-order node id, with
//! stable child order within a level.

use crate::error::{Error, Result};
use crate::model::Model;

/// Hard cap on topology size; `make_regular_tree` refuses anything larger.
pub const MAX_NODES: usize = 1 << 20;

/// Rooted tree with bounded branching, stored level-ordered in
/// structure-of-arrays form (parents and CSR child lists, no recursion).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    level: Vec<u32>,
    parent: Vec<Option<u32>>,
    child_offsets: Vec<usize>,
    child_list: Vec<u32>,
    branching_bound: usize,
    depth: usize,
}

impl TreeTopology {
    /// Build from per-node (level, parent) records; node ids are the
    /// positions 0..Q. Validates the single-root / level-increment /
    /// bounded-branching invariants.
    pub fn from_records(records: &[(u32, Option<u32>)]) -> Result<Self> {
        let q = records.len();
        if q == 0 {
            return Err(Error::domain("topology needs at least a root node"));
        }
        if q > MAX_NODES {
            return Err(Error::domain(format!("node count {q} exceeds budget {MAX_NODES}")));
        }
        let mut counts = vec![0usize; q];
        let mut roots = 0usize;
        for (id, (level, parent)) in records.iter().enumerate() {
            match parent {
                None => {
                    roots += 1;
                    if *level != 0 {
                        return Err(Error::domain(format!("root node {id} must be at level 0")));
                    }
                }
                Some(p) => {
                    let p = *p as usize;
                    if p >= q {
                        return Err(Error::domain(format!("node {id} references missing parent {p}")));
                    }
                    if records[p].0 + 1 != *level {
                        return Err(Error::domain(format!(
                            "node {id} at level {level} must sit one level below parent {p}"
                        )));
                    }
                    counts[p] += 1;
                }
            }
        }
        if roots != 1 {
            return Err(Error::domain(format!("expected exactly one root, found {roots}")));
        }
        let mut child_offsets = vec![0usize; q + 1];
        for (i, c) in counts.iter().enumerate() {
            child_offsets[i + 1] = child_offsets[i] + c;
        }
        let mut cursor = child_offsets.clone();
        let mut child_list = vec![0u32; child_offsets[q]];
        for (id, (_, parent)) in records.iter().enumerate() {
            if let Some(p) = parent {
                child_list[cursor[*p as usize]] = id as u32;
                cursor[*p as usize] += 1;
            }
        }
        let level: Vec<u32> = records.iter().map(|r| r.0).collect();
        let depth = level.iter().copied().max().unwrap_or(0) as usize;
        let branching_bound = counts.iter().copied().max().unwrap_or(0).max(1);
        Ok(TreeTopology {
            level,
            parent: records.iter().map(|r| r.1).collect(),
            child_offsets,
            child_list,
            branching_bound,
            depth,
        })
    }

    /// Complete `branching`-ary tree with levels 0..=depth,
    /// Q = Σ_{l=0}^{depth} branching^l nodes.
    pub fn regular(branching: usize, depth: usize) -> Result<Self> {
        if branching == 0 {
            return Err(Error::domain("branching must be positive"));
        }
        let mut q: usize = 0;
        let mut level_size: usize = 1;
        for _ in 0..=depth {
            q = q
                .checked_add(level_size)
                .filter(|total| *total <= MAX_NODES)
                .ok_or_else(|| Error::domain(format!("regular({branching},{depth}) exceeds node budget {MAX_NODES}")))?;
            level_size = level_size
                .checked_mul(branching)
                .ok_or_else(|| Error::domain(format!("regular({branching},{depth}) exceeds node budget {MAX_NODES}")))?;
        }
        let mut records = Vec::with_capacity(q);
        records.push((0u32, None));
        let mut prev_start = 0usize;
        let mut prev_len = 1usize;
        for lvl in 1..=depth {
            let start = records.len();
            for p in prev_start..prev_start + prev_len {
                for _ in 0..branching {
                    records.push((lvl as u32, Some(p as u32)));
                }
            }
            prev_start = start;
            prev_len = records.len() - start;
        }
        let mut topo = TreeTopology::from_records(&records)?;
        topo.branching_bound = branching;
        Ok(topo)
    }

    pub fn node_count(&self) -> usize {
        self.level.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn branching_bound(&self) -> usize {
        self.branching_bound
    }

    pub fn level(&self, node: usize) -> usize {
        self.level[node] as usize
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node].map(|p| p as usize)
    }

    pub fn children(&self, node: usize) -> &[u32] {
        &self.child_list[self.child_offsets[node]..self.child_offsets[node + 1]]
    }

    pub fn child_count(&self, node: usize) -> usize {
        self.child_offsets[node + 1] - self.child_offsets[node]
    }

    /// Line-oriented text form: one `id level parent_id` row per node,
    /// parent_id = -1 for the root. Round-trips bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for id in 0..self.node_count() {
            let parent = self.parent[id].map(|p| p as i64).unwrap_or(-1);
            out.push_str(&format!("{} {} {}\n", id, self.level[id], parent));
        }
        out
    }

    /// Parse the text form produced by [`TreeTopology::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, u32, i64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut field = |name: &str| -> Result<i64> {
                parts
                    .next()
                    .ok_or_else(|| Error::domain(format!("line {}: missing {name}", lineno + 1)))?
                    .parse::<i64>()
                    .map_err(|e| Error::domain(format!("line {}: bad {name}: {e}", lineno + 1)))
            };
            let id = field("id")?;
            let level = field("level")?;
            let parent = field("parent_id")?;
            if parts.next().is_some() {
                return Err(Error::domain(format!("line {}: trailing fields", lineno + 1)));
            }
            if id < 0 || level < 0 {
                return Err(Error::domain(format!("line {}: negative id or level", lineno + 1)));
            }
            rows.push((id as usize, level as u32, parent));
        }
        let q = rows.len();
        let mut records: Vec<Option<(u32, Option<u32>)>> = vec![None; q];
        for (id, level, parent) in rows {
            if id >= q {
                return Err(Error::domain(format!("node id {id} out of range for {q} nodes")));
            }
            if records[id].is_some() {
                return Err(Error::domain(format!("duplicate node id {id}")));
            }
            let parent = if parent < 0 {
                None
            } else {
                Some(u32::try_from(parent).map_err(|_| Error::domain(format!("bad parent id {parent}")))?)
            };
            records[id] = Some((level, parent));
        }
        let records: Vec<(u32, Option<u32>)> = records
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::domain("node ids must cover 0..Q"))?;
        TreeTopology::from_records(&records)
    }
}

/// Coefficients of the truncated tree model on a fixed topology.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    topology: TreeTopology,
    alpha: f64,
    beta: f64,
    lambda: f64,
    c: Vec<f64>,
    d: Vec<f64>,
    /// Per-child Obukhov coupling d_j / m_j, zero at leaves.
    d_split: Vec<f64>,
}

impl TreeParams {
    /// Matched-coefficient builder: c_j = λ on level 1, c_j = λ c_{j̄} on
    /// levels 2..N−1, d_j = (α/β) c_j there, zeros at the root and on
    /// levels ≥ N (truncation wins over the geometric rule).
    pub fn standard(topology: TreeTopology, alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::domain(format!("beta must be nonzero and finite, got {beta}")));
        }
        if !alpha.is_finite() {
            return Err(Error::domain(format!("alpha must be finite, got {alpha}")));
        }
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("lambda must be > 1, got {lambda}")));
        }
        let q = topology.node_count();
        let n = topology.depth();
        let mut c = vec![0.0; q];
        let mut d = vec![0.0; q];
        for j in 0..q {
            let lvl = topology.level(j);
            if lvl >= 1 && lvl < n {
                c[j] = lambda.powi(lvl as i32);
                d[j] = (alpha / beta) * c[j];
            }
        }
        TreeParams::with_coefficients(topology, alpha, beta, lambda, c, d)
    }

    /// Builder with explicit per-node coefficient arrays.
    pub fn with_coefficients(
        topology: TreeTopology,
        alpha: f64,
        beta: f64,
        lambda: f64,
        c: Vec<f64>,
        d: Vec<f64>,
    ) -> Result<Self> {
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::domain(format!("beta must be nonzero and finite, got {beta}")));
        }
        let q = topology.node_count();
        if c.len() != q {
            return Err(Error::dims(q, c.len()));
        }
        if d.len() != q {
            return Err(Error::dims(q, d.len()));
        }
        if c.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("coefficients must be finite"));
        }
        let d_split = (0..q)
            .map(|j| {
                let m = topology.child_count(j);
                if m > 0 {
                    d[j] / m as f64
                } else {
                    0.0
                }
            })
            .collect();
        Ok(TreeParams { topology, alpha, beta, lambda, c, d, d_split })
    }

    /// Copy with d perturbed additively at one node (breaks invariance when
    /// the node is interior and delta ≠ 0).
    pub fn with_d_offset(&self, node: usize, delta: f64) -> Result<Self> {
        if node >= self.topology.node_count() {
            return Err(Error::dims(self.topology.node_count(), node));
        }
        let mut d = self.d.clone();
        d[node] += delta;
        TreeParams::with_coefficients(
            self.topology.clone(),
            self.alpha,
            self.beta,
            self.lambda,
            self.c.clone(),
            d,
        )
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn max_coefficient(&self) -> f64 {
        self.c
            .iter()
            .map(|v| self.alpha.abs() * v.abs())
            .chain(self.d.iter().map(|v| self.beta.abs() * v.abs()))
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.topology.node_count() {
            return Err(Error::dims(self.topology.node_count(), x.len()));
        }
        Ok(())
    }

    pub fn eval_rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.eval_rhs_vec(x))
    }

    /// Linear part of the divergence condition, signed so that it vanishes
    /// exactly when α c_j = β d_j on the interior and responds by −β·δ to a
    /// perturbation d_j → d_j + δ:
    ///
    /// Σ_j (α c_j·\[j ≠ root\] − β d_j·\[m_j > 0\]) x_j = −Σ_j ∂b_j/∂x_j.
    pub fn divergence_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let topo = &self.topology;
        let mut acc = 0.0;
        for (j, xj) in x.iter().enumerate() {
            let novikov = if topo.parent(j).is_some() { self.alpha * self.c[j] } else { 0.0 };
            let obukhov = if topo.child_count(j) > 0 { self.beta * self.d[j] } else { 0.0 };
            acc += (novikov - obukhov) * xj;
        }
        Ok(acc)
    }

    /// ⟨x, b(x)⟩; telescopes to zero for every coefficient choice.
    pub fn energy_quadratic_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let b = self.eval_rhs_vec(x);
        Ok(x.iter().zip(&b).map(|(xi, bi)| xi * bi).sum())
    }
}

impl Model for TreeParams {
    fn dim(&self) -> usize {
        self.topology.node_count()
    }

    fn eval_rhs_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        let topo = &self.topology;
        for j in 0..topo.node_count() {
            let (up_c, up_d) = match topo.parent(j) {
                Some(p) => (self.c[j] * x[p] * x[p], self.d_split[p] * x[p] * x[j]),
                None => (0.0, 0.0),
            };
            let mut novikov_down = 0.0;
            let mut child_sq = 0.0;
            for &k in topo.children(j) {
                let xk = x[k as usize];
                novikov_down += self.c[k as usize] * xk;
                child_sq += xk * xk;
            }
            out[j] = self.alpha * (up_c - x[j] * novikov_down) + self.beta * (up_d - self.d_split[j] * child_sq);
        }
    }

    fn kind(&self) -> &'static str {
        "tree"
    }

    fn digest_string(&self) -> String {
        let mut s = format!(
            "tree;q={};depth={};branching={};alpha={};beta={};lambda={};c=",
            self.topology.node_count(),
            self.topology.depth(),
            self.topology.branching_bound(),
            self.alpha,
            self.beta,
            self.lambda
        );
        for v in &self.c {
            s.push_str(&format!("{v},"));
        }
        s.push_str(";d=");
        for v in &self.d {
            s.push_str(&format!("{v},"));
        }
        s
    }
}
