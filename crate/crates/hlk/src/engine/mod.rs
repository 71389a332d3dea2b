//! Numerical kernels `k_t^V` for potentials, by three deterministic methods
//! and a Feynman–Kac estimator.

mod crank_nicolson;
mod duhamel;
mod lie_trotter;
mod monte_carlo;

pub use crank_nicolson::crank_nicolson_kernel;
pub use duhamel::duhamel_kernel;
pub use lie_trotter::lie_trotter_kernel;
pub use monte_carlo::feynman_kac_estimate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::kernel::{KernelMatrix, Method};
use crate::potential::{truncate, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Cap on fixed-point iterations (Dyson orders) for Duhamel.
    pub series_depth: usize,
    /// Stop when successive iterates differ by less than this, relative to `max k_t`.
    pub series_tol: f64,
    /// Time step of the evolution methods.
    pub dt: f64,
    /// Nodes of the Duhamel time integral.
    pub time_quadrature_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { series_depth: 60, series_tol: 1e-10, dt: 1e-3, time_quadrature_nodes: 64 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.series_depth < 1 {
            return Err(Error::invalid("series_depth must be at least 1"));
        }
        if !(self.series_tol > 0.0) {
            return Err(Error::invalid("series_tol must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be positive"));
        }
        if self.time_quadrature_nodes < 2 {
            return Err(Error::invalid("time_quadrature_nodes must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MCConfig {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self { paths: 20_000, dt: 1e-3, seed: 7, antithetic: true }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 1 {
            return Err(Error::invalid("paths must be at least 1"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("t must be positive, got {t}")))
    }
}

/// Dispatch on the method tag. `ClosedForm` ignores `V` unless it is nonzero.
pub fn solve(method: Method, v: &Potential, t: f64, grid: &Grid1D, cfg: &SolverConfig) -> Result<KernelMatrix> {
    match method {
        Method::ClosedForm if v.is_zero() => KernelMatrix::closed_form(*grid, t),
        Method::ClosedForm => Err(Error::invalid("no closed form for a nonzero potential")),
        Method::Duhamel => duhamel_kernel(v, t, grid, cfg),
        Method::CrankNicolson => crank_nicolson_kernel(v, t, grid, cfg),
        Method::LieTrotter => lie_trotter_kernel(v, t, grid, cfg),
    }
}

/// `(n_i, ‖K^{V_{n_i}} - K^{V_{n_{i+1}}}‖_∞)`, the last level compared with
/// `V` itself. Kernels by Duhamel.
pub fn truncation_sweep(
    v: &Potential,
    t: f64,
    grid: &Grid1D,
    levels: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<(f64, f64)>> {
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("truncation levels must be increasing"));
    }
    let mut kernels = Vec::with_capacity(levels.len() + 1);
    for &n in levels {
        kernels.push(duhamel_kernel(&truncate(v, n)?, t, grid, cfg)?);
    }
    kernels.push(duhamel_kernel(v, t, grid, cfg)?);
    Ok(levels
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let d = (&kernels[i].values - &kernels[i + 1].values).amax();
            (n, d)
        })
        .collect())
}
