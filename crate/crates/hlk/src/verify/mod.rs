//! Numerical checks of the kernel inequalities and identities, with
//! worst-case ratios, witnesses and empirical constants.
//!
//! Every check reports `max_ratio = max lhs/rhs` over its sweep. Identities
//! are reported as `1 + |error|`, so that a single convention (`pass ⟺
//! max_ratio <= threshold`) covers both.

mod closed;
mod kernel_bounds;
mod weighted;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{self, SolverConfig};
use crate::error::Result;
use crate::grid::Grid1D;
use crate::kernel::{KernelMatrix, Method};
use crate::potential::Potential;

pub use closed::{
    check_envelope_ordering, check_green_laplace, check_sandwich, check_stochasticity,
    check_weighted_ultracontractivity, laplace_transform, stochasticity_integral, GREEN_POINTS,
};
pub use kernel_bounds::{
    check_boundary_bound, check_cross_method, check_exponential_bound, check_monte_carlo, check_positivity,
    empirical_constant, empirical_constant_main, no_polynomial_ratio, EmpiricalConstant, CONSTANT_MASK, MC_POINTS,
};
pub use weighted::{
    alpha, check_davies_gaffney, check_l1_boundary_weighted, check_l1_exponential, counterexample_demo,
    counterexample_ratio, CounterexampleRow, DaviesGaffney, COUNTEREXAMPLE_H,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub params: Value,
    pub n_points: usize,
    pub max_ratio: f64,
    pub threshold: f64,
    pub pass: bool,
    pub witness: Value,
    pub runtime_ms: f64,
}

impl InequalityCheck {
    /// Replace the threshold and recompute the verdict.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.pass = self.max_ratio <= threshold;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub config_digest: String,
    pub checks: Vec<InequalityCheck>,
    pub constants: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Pretty JSON with the field order of the schema and a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// The report with every `runtime_ms` zeroed, for determinism comparisons.
    pub fn without_runtimes(&self) -> Self {
        let mut r = self.clone();
        for c in &mut r.checks {
            c.runtime_ms = 0.0;
        }
        r
    }
}

/// Running maximum of a ratio with the parameters that produced it.
/// Ties keep the first witness, so sweeps in a fixed order give fixed
/// witnesses.
pub(crate) struct Tracker {
    started: Instant,
    max: f64,
    witness: Value,
    n: usize,
}

impl Tracker {
    pub(crate) fn new() -> Self {
        Tracker { started: Instant::now(), max: f64::NEG_INFINITY, witness: Value::Null, n: 0 }
    }

    pub(crate) fn see(&mut self, ratio: f64, witness: impl FnOnce() -> Value) {
        self.n += 1;
        let r = if ratio.is_nan() { f64::MAX } else { ratio.min(f64::MAX) };
        if r > self.max {
            self.max = r;
            self.witness = witness();
        }
    }

    pub(crate) fn finish(self, name: &str, params: Value, threshold: f64) -> InequalityCheck {
        let max_ratio = if self.n == 0 { 0.0 } else { self.max };
        InequalityCheck {
            name: name.to_string(),
            params,
            n_points: self.n,
            max_ratio,
            threshold,
            pass: max_ratio <= threshold,
            witness: self.witness,
            runtime_ms: self.started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

/// Default sweeps: boundary-dominated and Gaussian-dominated regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sweep {
    pub t: Vec<f64>,
    pub xi: Vec<f64>,
    /// Points per axis.
    pub n: usize,
    /// Kernel entries are examined for `x, y <= x_max`.
    pub x_max: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep { t: vec![0.05, 0.1, 0.5, 1.0, 2.0, 5.0], xi: vec![-2.0, -1.0, 0.0, 1.0, 2.0], n: 400, x_max: 4.0 }
    }
}

/// Grid for a solver-backed check at time `t`: the window `(0, x_max]`
/// plus `reach` plus ten diffusion lengths, so that the wall at `L` is
/// invisible inside the window.
pub fn solver_grid(t: f64, x_max: f64, reach: f64, n: usize) -> Result<Grid1D> {
    Grid1D::new(x_max + reach + 10.0 * t.sqrt(), n)
}

/// `K^V_t` by `method`, or the closed form when `V = 0`.
pub fn kernel(v: &Potential, t: f64, grid: &Grid1D, method: Method, cfg: &SolverConfig) -> Result<KernelMatrix> {
    if v.is_zero() {
        KernelMatrix::closed_form(*grid, t)
    } else {
        engine::solve(method, v, t, grid, cfg)
    }
}

pub(crate) fn window(grid: &Grid1D, x_max: f64) -> usize {
    (0..grid.len()).take_while(|&i| grid.x(i) <= x_max * (1.0 + 1e-12)).count()
}

/// Kernels of one potential by one method, keyed by `t` and the extra
/// reach of the grid beyond the window.
pub struct KernelCache {
    pub v: Potential,
    pub method: Method,
    pub cfg: SolverConfig,
    pub n: usize,
    pub x_max: f64,
    store: BTreeMap<(u64, u64), KernelMatrix>,
}

impl KernelCache {
    pub fn new(v: Potential, method: Method, cfg: SolverConfig, n: usize, x_max: f64) -> Self {
        KernelCache { v, method, cfg, n, x_max, store: BTreeMap::new() }
    }

    pub fn get(&mut self, t: f64, reach: f64) -> Result<KernelMatrix> {
        let key = (t.to_bits(), reach.to_bits());
        if let Some(k) = self.store.get(&key) {
            return Ok(k.clone());
        }
        let g = solver_grid(t, self.x_max, reach, self.n)?;
        let k = kernel(&self.v, t, &g, self.method, &self.cfg)?;
        self.store.insert(key, k.clone());
        Ok(k)
    }

    pub fn sweep(&mut self, t_values: &[f64], reach: f64) -> Result<Vec<KernelMatrix>> {
        t_values.iter().map(|&t| self.get(t, reach)).collect()
    }
}
