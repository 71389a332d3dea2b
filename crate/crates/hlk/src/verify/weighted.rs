//! Weighted L1 operator norms, off-diagonal L2 decay and the weighted
//! estimate that has no uniform constant for positive rates.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{window, InequalityCheck, KernelCache, Tracker};
use crate::error::{Error, Result};
use crate::grid::{column_norms, spectral_norm, Grid1D, QuadratureRule, WeightSpec};
use crate::kernel::KernelMatrix;
use crate::potential::{alpha_of, Potential};
use nalgebra::DMatrix;

/// `∫ x|V(x)| dx`, exact where a closed form exists.
pub fn alpha(v: &Potential) -> Result<f64> {
    if let Some(a) = v.alpha_closed_form() {
        return Ok(a);
    }
    let g = Grid1D::new(v.support_end().max(1.0), 20_000)?;
    Ok(alpha_of(v, &g))
}

fn small_alpha(v: &Potential) -> Result<f64> {
    let a = alpha(v)?;
    if a < 1.0 {
        Ok(a)
    } else {
        Err(Error::invalid(format!("need ∫ x|V| dx < 1 for `{}`, got {a}", v.id())))
    }
}

fn weighted_column_sup(k: &KernelMatrix, w: WeightSpec, x_max: f64) -> (f64, f64) {
    let rule = QuadratureRule::new(&k.grid);
    let norms = column_norms(k, w, &rule);
    let cols = window(&k.grid, x_max);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (j, v) in norms.iter().enumerate().take(cols) {
        if *v > best.0 {
            best = (*v, k.grid.x(j));
        }
    }
    best
}

/// `‖ρ_ξ T_V(t) ρ_ξ^{-1}‖_{1→1} / (e^{ξ²t}/(1−α))`, columns `y ≤ x_max`.
/// The grid reaches `2|ξ|t` further out, where the weighted mass sits.
pub fn check_l1_exponential(cache: &mut KernelCache, xi_values: &[f64], t_values: &[f64], slack: f64) -> Result<InequalityCheck> {
    let a = small_alpha(&cache.v)?;
    let reach = 2.0 * xi_values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut tr = Tracker::new();
    for &t in t_values {
        let k = cache.get(t, reach * t)?;
        for &xi in xi_values {
            let (norm, y) = weighted_column_sup(&k, WeightSpec::Exponential { xi }, cache.x_max);
            let bound = (xi * xi * t).exp() / (1.0 - a);
            tr.see(norm / bound, || json!({"t": t, "xi": xi, "y": y, "norm": norm}));
        }
    }
    let params = json!({"V": cache.v.id(), "alpha": a, "xi": xi_values, "t": t_values, "n": cache.n, "method": cache.method});
    Ok(tr.finish("l1_exponential", params, 1.0 + slack))
}

/// `‖m^{-1} T_V(t) m‖_{L1(m²)} / (1/(1−α))` with `m(x) = x`.
pub fn check_l1_boundary_weighted(cache: &mut KernelCache, t_values: &[f64], slack: f64) -> Result<InequalityCheck> {
    let a = small_alpha(&cache.v)?;
    let mut tr = Tracker::new();
    for &t in t_values {
        let k = cache.get(t, 0.0)?;
        let (norm, y) = weighted_column_sup(&k, WeightSpec::Boundary, cache.x_max);
        tr.see(norm * (1.0 - a), || json!({"t": t, "y": y, "norm": norm}));
    }
    let params = json!({"V": cache.v.id(), "alpha": a, "t": t_values, "n": cache.n, "method": cache.method});
    Ok(tr.finish("l1_boundary_weighted", params, 1.0 + slack))
}

/// Two balls `B(x, ε)`, `B(y, ε)` at distance at least `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaviesGaffney {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub eps: f64,
}

impl Default for DaviesGaffney {
    fn default() -> Self {
        DaviesGaffney { x: 2.0, y: 6.0, r: 3.0, eps: 0.5 }
    }
}

impl DaviesGaffney {
    pub fn validate(&self) -> Result<()> {
        let d = (self.x - self.y).abs();
        if !(self.r > 0.0 && self.r < d) {
            return Err(Error::invalid(format!("need 0 < r < |x - y|, got r={}, |x - y|={d}", self.r)));
        }
        if !(self.eps > 0.0 && self.eps <= (d - self.r) / 2.0) {
            return Err(Error::invalid(format!("need 0 < ε <= (|x - y| - r)/2, got ε={}", self.eps)));
        }
        if self.x.min(self.y) - self.eps <= 0.0 {
            return Err(Error::invalid("balls must lie inside (0, ∞)"));
        }
        Ok(())
    }
}

/// `‖1_{B(y,ε)} T_V(t) 1_{B(x,ε)}‖_{2→2} / e^{-r²/4t}` with the block's
/// norm as the largest singular value of `h·K` restricted to the balls.
pub fn check_davies_gaffney(cache: &mut KernelCache, geom: DaviesGaffney, t_values: &[f64], slack: f64) -> Result<InequalityCheck> {
    geom.validate()?;
    let reach = geom.x.max(geom.y) + geom.eps - cache.x_max;
    let mut tr = Tracker::new();
    for &t in t_values {
        let k = cache.get(t, reach.max(0.0))?;
        let g = k.grid;
        let ball = |c: f64| (0..g.len()).filter(|&i| (g.x(i) - c).abs() <= geom.eps).collect::<Vec<_>>();
        let (rows, cols) = (ball(geom.y), ball(geom.x));
        let h = g.h();
        let block = DMatrix::from_fn(rows.len(), cols.len(), |a, b| h * k.values[(rows[a], cols[b])]);
        let norm = spectral_norm(&block)?;
        let rhs = (-geom.r * geom.r / (4.0 * t)).exp();
        tr.see(norm / rhs, || json!({"t": t, "norm": norm, "rhs": rhs}));
    }
    let params = json!({
        "V": cache.v.id(), "x": geom.x, "y": geom.y, "r": geom.r, "eps": geom.eps,
        "t": t_values, "n": cache.n, "method": cache.method,
    });
    Ok(tr.finish("davies_gaffney", params, 1.0 + slack))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub xi: f64,
    pub t: f64,
    pub length: f64,
    /// `‖m^{-1}ρ_ξ T(t) ρ_ξ^{-1} m‖_{L1(m²)} e^{-ξ²t}` on `(0, length]`.
    pub ratio: f64,
    /// Column where the norm is attained.
    pub y: f64,
}

/// Spacing of the counterexample grids.
pub const COUNTEREXAMPLE_H: f64 = 0.05;

/// The free kernel's column norm with weight `x e^{ξx}`, over `e^{ξ²t}`.
pub fn counterexample_ratio(xi: f64, t: f64, length: f64) -> Result<CounterexampleRow> {
    let n = ((length / COUNTEREXAMPLE_H).round() as usize).max(8);
    let k = KernelMatrix::closed_form(Grid1D::new(length, n + n % 2)?, t)?;
    let (norm, y) = weighted_column_sup(&k, WeightSpec::ExponentialBoundary { xi }, length);
    Ok(CounterexampleRow { xi, t, length, ratio: norm / (xi * xi * t).exp(), y })
}

/// Rows for every `(t, L)`, in input order.
pub fn counterexample_demo(xi: f64, t_values: &[f64], l_values: &[f64]) -> Result<Vec<CounterexampleRow>> {
    let mut out = Vec::new();
    for &t in t_values {
        for &l in l_values {
            out.push(counterexample_ratio(xi, t, l)?);
        }
    }
    Ok(out)
}
