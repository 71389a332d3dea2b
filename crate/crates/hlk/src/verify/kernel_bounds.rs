//! Pointwise bounds on sampled kernels, empirical constants and
//! cross-method agreement.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{window, InequalityCheck, KernelCache, Tracker};
use crate::closed_form::{raw, EnvelopeKind};
use crate::engine::{crank_nicolson_kernel, feynman_kac_estimate, MCConfig};
use crate::error::{Error, Result};
use crate::grid::QuadratureRule;
use crate::kernel::{relative_sup_distance, KernelMatrix, Method};
use crate::tolerance;

/// Entries below this fraction of the window maximum are left out of
/// empirical constants: there the kernel is at the level of the solver
/// error and its ratio to the envelope is noise.
pub const CONSTANT_MASK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConstant {
    pub kind: EnvelopeKind,
    pub c: f64,
    pub n_points: usize,
    pub witness: Value,
}

fn unit_envelope(kind: EnvelopeKind, t: f64, x: f64, y: f64) -> f64 {
    match kind {
        EnvelopeKind::Exponential => raw::envelope_exponential(1.0, t, x, y),
        EnvelopeKind::Boundary => raw::envelope_boundary(1.0, t, x, y),
        EnvelopeKind::Main => raw::envelope_main(1.0, t, x, y),
        EnvelopeKind::SandwichUpper => (x * y / t).min(1.0) * raw::gauss(t, x - y),
        EnvelopeKind::SandwichLower => 0.5 * (x * y / t).min(1.0) * raw::gauss(t, x - y),
    }
}

/// Visit `(t, x, y, k)` for window entries above the mask.
fn masked(kernels: &[KernelMatrix], x_max: f64, mut f: impl FnMut(f64, f64, f64, f64)) {
    for k in kernels {
        let g = &k.grid;
        let w = window(g, x_max);
        let mut top = 0.0f64;
        for j in 0..w {
            for i in 0..w {
                top = top.max(k.values[(i, j)]);
            }
        }
        for j in 0..w {
            for i in 0..w {
                let v = k.values[(i, j)];
                if v >= CONSTANT_MASK * top && v > 0.0 {
                    f(k.t, g.x(i), g.x(j), v);
                }
            }
        }
    }
}

/// `sup k / envelope(kind, c = 1)` over the window of every kernel.
pub fn empirical_constant(kernels: &[KernelMatrix], kind: EnvelopeKind, x_max: f64) -> EmpiricalConstant {
    let mut tr = Tracker::new();
    masked(kernels, x_max, |t, x, y, k| {
        tr.see(k / unit_envelope(kind, t, x, y), || json!({"t": t, "x": x, "y": y}));
    });
    EmpiricalConstant { kind, c: tr.max.max(0.0), n_points: tr.n, witness: tr.witness }
}

/// [`empirical_constant`] for the main envelope over the cached kernels.
pub fn empirical_constant_main(cache: &mut KernelCache, t_values: &[f64]) -> Result<EmpiricalConstant> {
    let kernels = cache.sweep(t_values, 0.0)?;
    Ok(empirical_constant(&kernels, EnvelopeKind::Main, cache.x_max))
}

/// `k / (xy/t · t^{-1/2} e^{-(x-y)²/4t})`: the boundary envelope without
/// its polynomial factor. Reported, never asserted.
pub fn no_polynomial_ratio(kernels: &[KernelMatrix], x_max: f64) -> EmpiricalConstant {
    let mut tr = Tracker::new();
    masked(kernels, x_max, |t, x, y, k| {
        let env = x * y / t * raw::envelope_exponential(1.0, t, x, y);
        tr.see(k / env, || json!({"t": t, "x": x, "y": y}));
    });
    EmpiricalConstant { kind: EnvelopeKind::Boundary, c: tr.max.max(0.0), n_points: tr.n, witness: tr.witness }
}

/// `1 + max(0, -min k)` over the window.
pub fn check_positivity(kernels: &[KernelMatrix], label: &str, x_max: f64) -> InequalityCheck {
    let mut tr = Tracker::new();
    for k in kernels {
        let g = &k.grid;
        let w = window(g, x_max);
        for j in 0..w {
            for i in 0..w {
                let v = k.values[(i, j)];
                tr.see(1.0 + (-v).max(0.0), || json!({"t": k.t, "x": g.x(i), "y": g.x(j), "k": v}));
            }
        }
    }
    let params = json!({"V": label, "t": kernels.iter().map(|k| k.t).collect::<Vec<_>>(), "x_max": x_max});
    tr.finish("positivity", params, 1.0 + tolerance::POSITIVITY)
}

fn positive_constant(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("constant must be positive and finite, got {c}")))
    }
}

/// `k ≤ c t^{-1/2} e^{-(x-y)²/4t}` on the window, and for each `ξ` the
/// family it is built from, `e^{ξ(x-y)} k ≤ c t^{-1/2} e^{ξ²t}`.
pub fn check_exponential_bound(
    kernels: &[KernelMatrix],
    label: &str,
    c: f64,
    xi_values: &[f64],
    x_max: f64,
    slack: f64,
) -> Result<InequalityCheck> {
    positive_constant(c)?;
    let mut tr = Tracker::new();
    for k in kernels {
        let g = &k.grid;
        let t = k.t;
        let w = window(g, x_max);
        for j in 0..w {
            for i in 0..w {
                let (x, y, v) = (g.x(i), g.x(j), k.values[(i, j)]);
                tr.see(v / raw::envelope_exponential(c, t, x, y), || json!({"t": t, "x": x, "y": y, "xi": null}));
                for &xi in xi_values {
                    let r = (xi * (x - y)).exp() * v / (c * t.powf(-0.5) * (xi * xi * t).exp());
                    tr.see(r, || json!({"t": t, "x": x, "y": y, "xi": xi}));
                }
            }
        }
    }
    let params = json!({"V": label, "c": c, "xi": xi_values, "t": kernels.iter().map(|k| k.t).collect::<Vec<_>>()});
    Ok(tr.finish("exponential_bound", params, 1.0 + slack))
}

/// `k ≤ C (xy/t)(1 + (x-y)²/4t)^{3/2} t^{-1/2} e^{-(x-y)²/4t}` on the window.
pub fn check_boundary_bound(kernels: &[KernelMatrix], label: &str, c: f64, x_max: f64, slack: f64) -> Result<InequalityCheck> {
    positive_constant(c)?;
    let mut tr = Tracker::new();
    for k in kernels {
        let g = &k.grid;
        let w = window(g, x_max);
        for j in 0..w {
            for i in 0..w {
                let (x, y) = (g.x(i), g.x(j));
                let r = k.values[(i, j)] / raw::envelope_boundary(c, k.t, x, y);
                tr.see(r, || json!({"t": k.t, "x": x, "y": y}));
            }
        }
    }
    let params = json!({"V": label, "c": c, "t": kernels.iter().map(|k| k.t).collect::<Vec<_>>()});
    Ok(tr.finish("boundary_bound", params, 1.0 + slack))
}

/// `1 + ‖K_duhamel − K_cn‖ / max|K_duhamel|` over window entries with
/// `K_duhamel ≥ 10^{-4} max`.
pub fn check_cross_method(cache: &mut KernelCache, t_values: &[f64]) -> Result<InequalityCheck> {
    let mut tr = Tracker::new();
    for &t in t_values {
        let du = cache.get(t, 0.0)?;
        let other = if cache.method == Method::CrankNicolson { Method::Duhamel } else { Method::CrankNicolson };
        let cn = match other {
            Method::CrankNicolson => crank_nicolson_kernel(&cache.v, t, &du.grid, &cache.cfg)?,
            _ => crate::engine::duhamel_kernel(&cache.v, t, &du.grid, &cache.cfg)?,
        };
        let d = relative_sup_distance(&cn, &du, tolerance::CROSS_METHOD_FLOOR, cache.x_max)?;
        tr.see(1.0 + d, || json!({"t": t, "distance": d}));
    }
    let params = json!({
        "V": cache.v.id(),
        "t": t_values,
        "n": cache.n,
        "methods": [cache.method.to_string(), if cache.method == Method::CrankNicolson { "duhamel" } else { "crank_nicolson" }],
        "floor": tolerance::CROSS_METHOD_FLOOR,
    });
    Ok(tr.finish("cross_method", params, 1.0 + tolerance::CROSS_METHOD))
}

/// Starting points of the Monte Carlo functionals.
pub const MC_POINTS: [f64; 3] = [1.0, 1.5, 2.5];

fn bump(y: f64) -> f64 {
    (-4.0 * (y - 1.5) * (y - 1.5)).exp()
}

/// `|E_mc − ∫ K(x, y) f(y) dy| / (3 se)` for `f ∈ {bump, 1}` at the nodes
/// nearest to [`MC_POINTS`].
pub fn check_monte_carlo(cache: &mut KernelCache, t_values: &[f64], mc: &MCConfig) -> Result<InequalityCheck> {
    mc.validate()?;
    let mut tr = Tracker::new();
    for &t in t_values {
        let k = cache.get(t, 0.0)?;
        let g = k.grid;
        let rule = QuadratureRule::new(&g);
        for &x0 in &MC_POINTS {
            let i = g.nearest(x0).ok_or_else(|| Error::invalid(format!("x = {x0} is off the grid")))?;
            let x = g.x(i);
            for (name, f) in [("bump", bump as fn(f64) -> f64), ("one", (|_| 1.0) as fn(f64) -> f64)] {
                let quad: f64 = (0..g.len()).map(|j| rule.weights()[j] * k.values[(i, j)] * f(g.x(j))).sum();
                let (mean, se) = feynman_kac_estimate(&cache.v, t, x, f, mc)?;
                let se_eff = se.max(f64::EPSILON * quad.abs());
                let r = (mean - quad).abs() / (tolerance::MC_SIGMAS * se_eff);
                tr.see(r, || json!({"t": t, "x": x, "f": name, "mc": mean, "se": se, "quadrature": quad}));
            }
        }
    }
    let params = json!({
        "V": cache.v.id(),
        "t": t_values,
        "x": MC_POINTS,
        "paths": mc.paths,
        "dt": mc.dt,
        "seed": mc.seed,
        "antithetic": mc.antithetic,
    });
    Ok(tr.finish("monte_carlo", params, 1.0))
}
