//! Closed-form kernels, Green functions and bound envelopes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unchecked one-dimensional evaluators used in inner loops.
pub mod raw {
    use super::PI;

    /// Free heat kernel of `Δ` on the line, `(4πt)^{-1/2} e^{-z²/4t}`.
    #[inline]
    pub fn gauss(t: f64, z: f64) -> f64 {
        (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
    }

    /// `1 - e^{-r}` without cancellation near 0.
    #[inline]
    pub fn boundary_factor(r: f64) -> f64 {
        -(-r).exp_m1()
    }

    #[inline]
    pub fn dirichlet(t: f64, x: f64, y: f64) -> f64 {
        gauss(t, x - y) * boundary_factor(x * y / t)
    }

    #[inline]
    pub fn green(lambda: f64, x: f64, y: f64) -> f64 {
        let s = lambda.sqrt();
        (-s * (x - y).abs()).exp() * boundary_factor(2.0 * s * x.min(y)) / (2.0 * s)
    }

    #[inline]
    pub fn weighted(xi: f64, t: f64, x: f64, y: f64) -> f64 {
        (xi * (x - y)).exp() * dirichlet(t, x, y)
    }

    /// `(1 + z²/4t)^{3/2}`
    #[inline]
    pub fn polynomial_factor(t: f64, z: f64) -> f64 {
        (1.0 + z * z / (4.0 * t)).powf(1.5)
    }

    #[inline]
    pub fn envelope_exponential(c: f64, t: f64, x: f64, y: f64) -> f64 {
        let z = x - y;
        c * ((-z * z / (4.0 * t)).exp() / t.sqrt())
    }

    #[inline]
    pub fn envelope_boundary(c: f64, t: f64, x: f64, y: f64) -> f64 {
        let z = x - y;
        c * (x * y / t * polynomial_factor(t, z)) * ((-z * z / (4.0 * t)).exp() / t.sqrt())
    }

    #[inline]
    pub fn envelope_main(c: f64, t: f64, x: f64, y: f64) -> f64 {
        let z = x - y;
        c * (x * y / t * polynomial_factor(t, z)).min(1.0) * ((-z * z / (4.0 * t)).exp() / t.sqrt())
    }

    /// `∫_a^b g_t(x - z) dz` for `a < b`, stable in the tails.
    #[inline]
    pub fn gauss_mass(t: f64, x: f64, a: f64, b: f64) -> f64 {
        let s = 2.0 * t.sqrt();
        let u = (a - x) / s;
        let v = (b - x) / s;
        if u >= 0.0 {
            0.5 * (libm::erfc(u) - libm::erfc(v))
        } else if v <= 0.0 {
            0.5 * (libm::erfc(-v) - libm::erfc(-u))
        } else {
            0.5 * (libm::erf(v) - libm::erf(u))
        }
    }

    /// `∫_a^b k_t(x, z) dz` for `0 <= a < b`: mass of the half-line kernel on a cell.
    #[inline]
    pub fn dirichlet_mass(t: f64, x: f64, a: f64, b: f64) -> f64 {
        (gauss_mass(t, x, a, b) - gauss_mass(t, -x, a, b)).max(0.0)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn same_dim(x: &[f64], y: &[f64]) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!("dimension mismatch: {} vs {}", x.len(), y.len())));
    }
    Ok(x.len())
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `(4πt)^{-d/2} e^{-|x-y|²/4t}` with `d = x.len()`.
pub fn free_heat_kernel(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    positive("t", t)?;
    let d = same_dim(x, y)?;
    if d == 1 {
        return Ok(raw::gauss(t, x[0] - y[0]));
    }
    let d = d as f64;
    Ok((4.0 * PI * t).powf(-d / 2.0) * (-dist_sq(x, y) / (4.0 * t)).exp())
}

/// Dirichlet heat kernel on `(0, ∞)`.
pub fn dirichlet_kernel(t: f64, x: f64, y: f64) -> Result<f64> {
    positive("t", t)?;
    positive("x", x)?;
    positive("y", y)?;
    Ok(raw::dirichlet(t, x, y))
}

/// `(lower, upper)` with `lower = ½(1∧xy/t) g_t(x-y)` and `upper = 2·lower`.
pub fn sandwich_bounds(t: f64, x: f64, y: f64) -> Result<(f64, f64)> {
    positive("t", t)?;
    positive("x", x)?;
    positive("y", y)?;
    let upper = (x * y / t).min(1.0) * raw::gauss(t, x - y);
    Ok((0.5 * upper, upper))
}

/// Green function of `λ - Δ` with Dirichlet condition at 0.
pub fn green_function(lambda: f64, x: f64, y: f64) -> Result<f64> {
    positive("lambda", lambda)?;
    positive("x", x)?;
    positive("y", y)?;
    Ok(raw::green(lambda, x, y))
}

/// `e^{ξ(x-y)} k_t(x, y)`.
pub fn weighted_kernel(xi: f64, t: f64, x: f64, y: f64) -> Result<f64> {
    if !xi.is_finite() {
        return Err(Error::invalid("xi must be finite"));
    }
    Ok((xi * (x - y)).exp() * dirichlet_kernel(t, x, y)?)
}

/// Spectral parameter and exponential weight for resolvent estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventParams {
    pub lambda: f64,
    pub xi: f64,
}

impl ResolventParams {
    pub fn new(lambda: f64, xi: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        if !(lambda > xi * xi) {
            return Err(Error::invalid(format!("need lambda > xi², got lambda={lambda}, xi={xi}")));
        }
        Ok(Self { lambda, xi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Exponential,
    Boundary,
    Main,
    SandwichLower,
    SandwichUpper,
}

impl FromStr for EnvelopeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exponential" => EnvelopeKind::Exponential,
            "boundary" => EnvelopeKind::Boundary,
            "main" => EnvelopeKind::Main,
            "sandwich_lower" => EnvelopeKind::SandwichLower,
            "sandwich_upper" => EnvelopeKind::SandwichUpper,
            other => return Err(Error::invalid(format!("unknown envelope kind `{other}`"))),
        })
    }
}

impl fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EnvelopeKind::Exponential => "exponential",
            EnvelopeKind::Boundary => "boundary",
            EnvelopeKind::Main => "main",
            EnvelopeKind::SandwichLower => "sandwich_lower",
            EnvelopeKind::SandwichUpper => "sandwich_upper",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub c: f64,
    pub kind: EnvelopeKind,
    pub d: u32,
}

impl EnvelopeParams {
    pub fn new(c: f64, kind: EnvelopeKind) -> Self {
        Self { c, kind, d: 1 }
    }
}

/// Envelope of the selected kind at `(t, x, y)`; `x[0]`, `y[0]` are the
/// coordinates normal to the boundary.
///
/// Main, exponential and boundary share one evaluation order, so
/// `main == min(exponential, boundary)` holds exactly in floating point.
pub fn envelope(params: &EnvelopeParams, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    positive("c", params.c)?;
    positive("t", t)?;
    let d = same_dim(x, y)?;
    if params.d == 0 || d != params.d as usize {
        return Err(Error::invalid(format!("envelope dimension {} does not match points of dimension {d}", params.d)));
    }
    positive("x1", x[0])?;
    positive("y1", y[0])?;
    if d == 1 {
        let (x, y) = (x[0], y[0]);
        match params.kind {
            EnvelopeKind::Exponential => return Ok(raw::envelope_exponential(params.c, t, x, y)),
            EnvelopeKind::Boundary => return Ok(raw::envelope_boundary(params.c, t, x, y)),
            EnvelopeKind::Main => return Ok(raw::envelope_main(params.c, t, x, y)),
            _ => {}
        }
    }
    let df = d as f64;
    let q = dist_sq(x, y) / (4.0 * t);
    let r = x[0] * y[0] / t;
    let c = params.c;
    let v = match params.kind {
        EnvelopeKind::Exponential | EnvelopeKind::Boundary | EnvelopeKind::Main => {
            let pre = (-q).exp() * t.powf(-df / 2.0);
            let a = r * (1.0 + q).powf(df / 2.0 + 1.0);
            match params.kind {
                EnvelopeKind::Exponential => c * pre,
                EnvelopeKind::Boundary => c * a * pre,
                _ => c * a.min(1.0) * pre,
            }
        }
        EnvelopeKind::SandwichLower | EnvelopeKind::SandwichUpper => {
            let upper = r.min(1.0) * (4.0 * PI * t).powf(-df / 2.0) * (-q).exp();
            if params.kind == EnvelopeKind::SandwichLower {
                c * 0.5 * upper
            } else {
                c * upper
            }
        }
    };
    Ok(v)
}
