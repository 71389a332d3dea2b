use nalgebra::DMatrix;

use super::{check_time, SolverConfig};
use crate::closed_form::raw;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::kernel::{KernelMatrix, Method};
use crate::potential::Potential;

/// `(P_dt e^{-dt V})^n` applied to `δ_j`, with `P_dt` the exact half-line
/// kernel sampled on the grid (or integrated over cells when `√(2dt) < h`).
/// The result is symmetrized; the raw asymmetry is kept as error estimate.
pub fn lie_trotter_kernel(v: &Potential, t: f64, grid: &Grid1D, cfg: &SolverConfig) -> Result<KernelMatrix> {
    check_time(t)?;
    cfg.validate()?;
    if cfg.dt > t {
        return Err(Error::invalid(format!("dt = {} exceeds t = {t}", cfg.dt)));
    }
    let n = grid.len();
    let h = grid.h();
    let steps = (t / cfg.dt).round().max(1.0) as usize;
    let dt = t / steps as f64;
    let sigma = (2.0 * dt).sqrt();
    let band = ((12.0 * sigma / h).ceil() as usize + 1).min(n - 1);
    let sampled = sigma >= h;
    let xs = grid.points();
    let damp: Vec<f64> = v.cell_averages(grid).iter().map(|vb| (-dt * vb).exp()).collect();
    // one step: P_dt diag(e^{-dt V})
    let step = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) > band {
            return 0.0;
        }
        let p = if sampled {
            h * raw::dirichlet(dt, xs[i], xs[j])
        } else {
            raw::dirichlet_mass(dt, xs[i], xs[j] - 0.5 * h, xs[j] + 0.5 * h)
        };
        p * damp[j]
    });
    let values = power(step, steps) / h;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericFailure { message: "Lie–Trotter produced non-finite values".into(), residual: f64::NAN, last_iterate: vec![] });
    }
    let mut k = KernelMatrix { t, grid: *grid, values, method: Method::LieTrotter, error_estimate: 0.0 };
    k.error_estimate = k.asymmetry();
    k.symmetrize();
    Ok(k)
}

/// `m^e` by binary powering, `e >= 1`.
fn power(mut m: DMatrix<f64>, mut e: usize) -> DMatrix<f64> {
    let mut acc: Option<DMatrix<f64>> = None;
    loop {
        if e & 1 == 1 {
            acc = Some(match acc {
                Some(a) => &a * &m,
                None => m.clone(),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        m = &m * &m;
    }
    acc.expect("exponent is at least 1")
}
