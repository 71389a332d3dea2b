//! Checks whose both sides are closed forms or one-dimensional quadratures.

use std::f64::consts::PI;

use serde_json::json;

use super::{InequalityCheck, Tracker};
use crate::closed_form::raw;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, QuadratureRule};
use crate::tolerance;

/// `(λ, x, y)` triples for the Green function check: small and large
/// spectral parameters, points on and off the diagonal, near and far from
/// the boundary.
pub const GREEN_POINTS: [(f64, f64, f64); 20] = [
    (0.25, 1.0, 2.0),
    (0.25, 0.1, 0.1),
    (0.25, 3.0, 0.5),
    (0.25, 5.0, 5.0),
    (0.25, 0.01, 4.0),
    (1.0, 1.0, 2.0),
    (1.0, 0.5, 0.5),
    (1.0, 0.05, 0.2),
    (1.0, 2.0, 6.0),
    (1.0, 3.0, 3.0),
    (4.0, 0.5, 0.5),
    (4.0, 1.0, 1.5),
    (4.0, 0.02, 0.02),
    (4.0, 2.0, 0.25),
    (4.0, 4.0, 4.5),
    (16.0, 0.1, 0.3),
    (16.0, 0.25, 0.25),
    (16.0, 1.0, 1.25),
    (16.0, 0.01, 0.05),
    (16.0, 2.0, 2.0),
];

fn sweep_grid(t: f64, n: usize) -> Result<Grid1D> {
    Grid1D::new(10.0 * t.sqrt(), n)
}

fn check_t(t_values: &[f64]) -> Result<()> {
    if let Some(t) = t_values.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::invalid(format!("t values must be positive, got {t}")));
    }
    Ok(())
}

/// `max(lower/k, k/upper)` over an `n × n` grid on `(0, 10√t]` per `t`.
pub fn check_sandwich(t_values: &[f64], n: usize) -> Result<InequalityCheck> {
    check_t(t_values)?;
    let mut tr = Tracker::new();
    for &t in t_values {
        let g = sweep_grid(t, n)?;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (g.x(i), g.x(j));
                let k = raw::dirichlet(t, x, y);
                let r = x * y / t;
                let upper = r.min(1.0) * raw::gauss(t, x - y);
                let lower = 0.5 * upper;
                if k == 0.0 || upper == 0.0 {
                    continue;
                }
                tr.see((lower / k).max(k / upper), || json!({"t": t, "x": x, "y": y}));
            }
        }
    }
    Ok(tr.finish("sandwich", json!({"t": t_values, "n": n}), 1.0 + tolerance::SANDWICH))
}

/// `∫_0^L (x/y) k_t(x, y) dx` by Simpson on `L = y + 12√t`. With `n = None`
/// the grid is refined to `h <= √t/40`.
pub fn stochasticity_integral(t: f64, y: f64, n: Option<usize>) -> Result<f64> {
    if !(t > 0.0) || !(y > 0.0) {
        return Err(Error::invalid(format!("need t, y > 0, got t={t}, y={y}")));
    }
    let length = y + 12.0 * t.sqrt();
    let n = n.unwrap_or_else(|| {
        let m = (length / (t.sqrt() / 40.0)).ceil() as usize;
        (m + m % 2).max(8)
    });
    let g = Grid1D::new(length, n)?;
    let rule = QuadratureRule::new(&g);
    Ok((0..n).map(|i| rule.weights()[i] * g.x(i) / y * raw::dirichlet(t, g.x(i), y)).sum())
}

/// `1 + |∫ (x/y) k_t(x, y) dx − 1|` over `t × y`.
pub fn check_stochasticity(t_values: &[f64], y_values: &[f64], n: Option<usize>) -> Result<InequalityCheck> {
    check_t(t_values)?;
    let mut tr = Tracker::new();
    for &t in t_values {
        for &y in y_values {
            let s = stochasticity_integral(t, y, n)?;
            tr.see(1.0 + (s - 1.0).abs(), || json!({"t": t, "y": y, "integral": s}));
        }
    }
    let params = json!({"t": t_values, "y": y_values, "n": n});
    Ok(tr.finish("stochasticity", params, 1.0 + tolerance::QUADRATURE))
}

/// `k_t(x, y) / (x y (4π)^{-1/2} t^{-3/2})` over the sweep.
pub fn check_weighted_ultracontractivity(t_values: &[f64], n: usize) -> Result<InequalityCheck> {
    check_t(t_values)?;
    let mut tr = Tracker::new();
    for &t in t_values {
        let g = sweep_grid(t, n)?;
        let bound = (4.0 * PI).sqrt().recip() * t.powf(-1.5);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (g.x(i), g.x(j));
                let r = raw::dirichlet(t, x, y) / (x * y) / bound;
                tr.see(r, || json!({"t": t, "x": x, "y": y}));
            }
        }
    }
    let params = json!({"t": t_values, "n": n});
    Ok(tr.finish("weighted_ultracontractivity", params, 1.0 + tolerance::ULTRACONTRACTIVITY))
}

/// `∫_0^∞ e^{-λt} k_t(x, y) dt` by Simpson in `u = ln t` over
/// `[10^{-18}, 50/λ]`, 4000 intervals.
pub fn laplace_transform(lambda: f64, x: f64, y: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(x > 0.0) || !(y > 0.0) {
        return Err(Error::invalid(format!("need λ, x, y > 0, got {lambda}, {x}, {y}")));
    }
    let (a, b) = ((1e-18f64).ln(), (50.0 / lambda).ln());
    let m = 4000;
    let du = (b - a) / m as f64;
    let f = |u: f64| {
        let t = u.exp();
        (-lambda * t).exp() * raw::dirichlet(t, x, y) * t
    };
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * du);
    }
    Ok(s * du / 3.0)
}

/// `1 + |L[k](λ) − G_λ| / G_λ` over `(λ, x, y)` triples.
pub fn check_green_laplace(points: &[(f64, f64, f64)]) -> Result<InequalityCheck> {
    let mut tr = Tracker::new();
    for &(lambda, x, y) in points {
        let numeric = laplace_transform(lambda, x, y)?;
        let exact = raw::green(lambda, x, y);
        let r = 1.0 + (numeric - exact).abs() / exact;
        tr.see(r, || json!({"lambda": lambda, "x": x, "y": y, "numeric": numeric, "exact": exact}));
    }
    let params = json!({"points": points.len(), "t_max": "50/lambda", "nodes": 4001});
    Ok(tr.finish("green_laplace", params, 1.0 + tolerance::QUADRATURE))
}

/// Bitwise `main == min(exponential, boundary)` at `c = 1`; a mismatch
/// shows up as `1 + relative gap`.
pub fn check_envelope_ordering(t_values: &[f64], n: usize) -> Result<InequalityCheck> {
    check_t(t_values)?;
    let mut tr = Tracker::new();
    for &t in t_values {
        let g = sweep_grid(t, n)?;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (g.x(i), g.x(j));
                let m = raw::envelope_main(1.0, t, x, y);
                let e = raw::envelope_exponential(1.0, t, x, y).min(raw::envelope_boundary(1.0, t, x, y));
                let r = if m == e { 1.0 } else { 1.0 + (m - e).abs() / e.abs().max(f64::MIN_POSITIVE) };
                tr.see(r, || json!({"t": t, "x": x, "y": y}));
            }
        }
    }
    Ok(tr.finish("envelope_ordering", json!({"t": t_values, "n": n}), 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_transform_matches_green_at_reference_point() {
        let g = laplace_transform(1.0, 1.0, 2.0).unwrap();
        assert!((g - 0.5 * (-1.0f64).exp() * (1.0 - (-2.0f64).exp())).abs() < 1e-8);
    }

    #[test]
    fn coarse_stochasticity_grid_is_reported_as_failure() {
        let c = check_stochasticity(&[0.01], &[5.0], Some(8)).unwrap();
        assert!(!c.pass);
        assert!(c.max_ratio > 1.0);
    }
}
