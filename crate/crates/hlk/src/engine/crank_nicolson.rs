use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{check_time, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::kernel::{KernelMatrix, Method};
use crate::potential::Potential;
use crate::tridiag::Tridiag;

/// Crank–Nicolson for `u_t = u'' - V u`, zero at 0 and beyond `L`, columns
/// started from `δ_j = e_j / h`. The first step is replaced by two
/// implicit-Euler half steps, which share the Crank–Nicolson matrix.
pub fn crank_nicolson_kernel(v: &Potential, t: f64, grid: &Grid1D, cfg: &SolverConfig) -> Result<KernelMatrix> {
    check_time(t)?;
    cfg.validate()?;
    if cfg.dt > t {
        return Err(Error::invalid(format!("dt = {} exceeds t = {t}", cfg.dt)));
    }
    let n = grid.len();
    let h = grid.h();
    let h2 = h * h;
    let steps = (t / cfg.dt).round().max(1.0) as usize;
    let tau = 0.5 * t / steps as f64;
    let vbar = v.cell_averages(grid);
    let diag: Vec<f64> = vbar.iter().map(|vb| 1.0 + tau * (2.0 / h2 + vb)).collect();
    let lhs = Tridiag::new(&diag, -tau / h2).ok_or_else(|| Error::NumericFailure {
        message: "Crank–Nicolson matrix is singular".into(),
        residual: f64::NAN,
        last_iterate: vec![],
    })?;
    let rdiag: Vec<f64> = vbar.iter().map(|vb| 1.0 - tau * (2.0 / h2 + vb)).collect();
    let roff = tau / h2;

    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut u = vec![0.0; n];
            u[j] = 1.0 / h;
            lhs.solve(&mut u);
            lhs.solve(&mut u);
            let mut rhs = vec![0.0; n];
            for _ in 1..steps {
                for i in 0..n {
                    let left = if i > 0 { u[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                    rhs[i] = rdiag[i] * u[i] + roff * (left + right);
                }
                lhs.solve(&mut rhs);
                std::mem::swap(&mut u, &mut rhs);
            }
            u
        })
        .collect();
    let values = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    let mut k = KernelMatrix { t, grid: *grid, values, method: Method::CrankNicolson, error_estimate: 0.0 };
    k.error_estimate = k.asymmetry();
    Ok(k)
}
