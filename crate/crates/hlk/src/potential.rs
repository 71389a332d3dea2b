//! Potentials on the half-line, the constant `α = ∫ x|V(x)| dx`, truncations
//! and resolvent smallness norms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::closed_form::raw;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::tridiag::Tridiag;

const GL4_NODES: [f64; 4] = [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526];
const GL4_WEIGHTS: [f64; 4] = [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538];

/// Builtin shapes before scaling and clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Zero,
    /// `-s·1_[a,b]`
    Well { s: f64, a: f64, b: f64 },
    /// `-s·e^{-x}`
    ExpDecay { s: f64 },
    /// `s·1_[0,a] - s·1_(a,b]`
    Signed { s: f64, a: f64, b: f64 },
    /// Linear interpolation through `(x, V(x))`; constant below the first
    /// abscissa, zero beyond the last.
    Table { points: Vec<(f64, f64)> },
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: f64,
    /// Clamp level `n` of the truncation `(V ∧ n) ∨ (-n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
}

impl Potential {
    pub fn new(family: Family) -> Result<Self> {
        let p = Self { family, scale: 1.0, clip: None };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        Self { family: Family::Zero, scale: 1.0, clip: None }
    }

    pub fn well(s: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(Family::Well { s, a, b })
    }

    pub fn exp_decay(s: f64) -> Result<Self> {
        Self::new(Family::ExpDecay { s })
    }

    pub fn signed(s: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(Family::Signed { s, a, b })
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|p, q| p.0.total_cmp(&q.0));
        Self::new(Family::Table { points })
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.scale *= k;
        self
    }

    pub fn negated(self) -> Self {
        self.scaled(-1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be finite")))
            }
        };
        finite(self.scale, "scale")?;
        if let Some(n) = self.clip {
            if !(n >= 0.0) {
                return Err(Error::invalid(format!("truncation level must be >= 0, got {n}")));
            }
        }
        match &self.family {
            Family::Zero => {}
            Family::Well { s, a, b } | Family::Signed { s, a, b } => {
                finite(*s, "s")?;
                if !(*s > 0.0) {
                    return Err(Error::invalid(format!("strength s must be positive, got {s}")));
                }
                if !(*a >= 0.0 && b > a && b.is_finite()) {
                    return Err(Error::invalid(format!("need 0 <= a < b, got a={a}, b={b}")));
                }
                if matches!(self.family, Family::Signed { .. }) && *a == 0.0 {
                    return Err(Error::invalid("signed potential needs a > 0"));
                }
            }
            Family::ExpDecay { s } => {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(Error::invalid(format!("strength s must be positive, got {s}")));
                }
            }
            Family::Table { points } => {
                if points.is_empty() {
                    return Err(Error::invalid("table potential needs at least one point"));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::invalid("table abscissae must be strictly increasing"));
                    }
                }
                for (x, v) in points {
                    finite(*x, "table x")?;
                    finite(*v, "table value")?;
                    if !(*x > 0.0) {
                        return Err(Error::invalid("table abscissae must be positive"));
                    }
                }
            }
        }
        Ok(())
    }

    fn base(&self, x: f64) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::Well { s, a, b } => {
                if x >= *a && x <= *b {
                    -s
                } else {
                    0.0
                }
            }
            Family::ExpDecay { s } => -s * (-x).exp(),
            Family::Signed { s, a, b } => {
                if x <= *a {
                    *s
                } else if x <= *b {
                    -s
                } else {
                    0.0
                }
            }
            Family::Table { points } => {
                let k = points.partition_point(|p| p.0 < x);
                if k == 0 {
                    points[0].1
                } else if k == points.len() {
                    if x == points[k - 1].0 {
                        points[k - 1].1
                    } else {
                        0.0
                    }
                } else {
                    let (x0, v0) = points[k - 1];
                    let (x1, v1) = points[k];
                    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let v = self.scale * self.base(x);
        match self.clip {
            Some(n) => v.clamp(-n, n),
            None => v,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, Family::Zero) || self.scale == 0.0 || self.clip == Some(0.0)
    }

    /// Points where `V` may jump or kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::Zero => vec![],
            Family::ExpDecay { s } => match self.clip {
                Some(n) if n > 0.0 && n < (self.scale * s).abs() => vec![((self.scale * s).abs() / n).ln()],
                _ => vec![],
            },
            Family::Well { a, b, .. } | Family::Signed { a, b, .. } => vec![*a, *b],
            Family::Table { points } => {
                let mut out: Vec<f64> = points.iter().map(|p| p.0).collect();
                if let Some(n) = self.clip {
                    // where the interpolant crosses the clamp levels
                    for w in points.windows(2) {
                        let (x0, v0) = (w[0].0, self.scale * w[0].1);
                        let (x1, v1) = (w[1].0, self.scale * w[1].1);
                        for level in [n, -n] {
                            if (v0 - level) * (v1 - level) < 0.0 {
                                out.push(x0 + (level - v0) * (x1 - x0) / (v1 - v0));
                            }
                        }
                    }
                    out.sort_by(f64::total_cmp);
                }
                out
            }
        }
    }

    /// Beyond this point `V` vanishes, or is below `1e-11·sup|V|` for the
    /// exponential family.
    pub fn support_end(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        match &self.family {
            Family::Zero => 0.0,
            Family::Well { b, .. } | Family::Signed { b, .. } => *b,
            Family::ExpDecay { .. } => 25.0,
            Family::Table { points } => points[points.len() - 1].0,
        }
    }

    /// `sup |V|`, infinite for nothing here since tables are finite.
    pub fn sup_abs(&self) -> f64 {
        let raw = self.scale.abs()
            * match &self.family {
                Family::Zero => 0.0,
                Family::Well { s, .. } | Family::Signed { s, .. } | Family::ExpDecay { s } => *s,
                Family::Table { points } => points.iter().fold(0.0f64, |m, p| m.max(p.1.abs())),
            };
        match self.clip {
            Some(n) => raw.min(n),
            None => raw,
        }
    }

    fn vanishes_on(&self, lo: f64, hi: f64) -> bool {
        if self.is_zero() {
            return true;
        }
        match &self.family {
            Family::Zero => true,
            Family::Well { a, b, .. } => hi <= *a || lo >= *b,
            Family::Signed { b, .. } => lo >= *b,
            Family::ExpDecay { .. } => false,
            Family::Table { points } => lo >= points[points.len() - 1].0,
        }
    }

    /// Exact `∫ x|V(x)| dx` where a closed form is known.
    pub fn alpha_closed_form(&self) -> Option<f64> {
        let clip = |m: f64| self.clip.map_or(m, |n| m.min(n));
        match &self.family {
            Family::Zero => Some(0.0),
            _ if self.is_zero() => Some(0.0),
            Family::Well { s, a, b } => Some(clip((self.scale * s).abs()) * (b * b - a * a) / 2.0),
            Family::Signed { s, b, .. } => Some(clip((self.scale * s).abs()) * b * b / 2.0),
            Family::ExpDecay { s } => {
                let amp = (self.scale * s).abs();
                match self.clip {
                    Some(n) if n < amp => {
                        let x0 = (amp / n).ln();
                        Some(n * x0 * x0 / 2.0 + n * (x0 + 1.0))
                    }
                    _ => Some(amp),
                }
            }
            Family::Table { .. } => None,
        }
    }

    /// Positive-weight Gauss–Legendre rule on `(0, L]` restricted to where
    /// `V` can be nonzero, split at breakpoints, panels no wider than `h`.
    pub fn quadrature(&self, grid: &Grid1D) -> (Vec<f64>, Vec<f64>) {
        let l = grid.length();
        let h = grid.h();
        let mut cuts = vec![0.0];
        let mut bps: Vec<f64> = self.breakpoints().into_iter().filter(|b| *b > 0.0 && *b < l).collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        cuts.extend(bps);
        cuts.push(l);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo || self.vanishes_on(lo, hi) {
                continue;
            }
            let panels = ((hi - lo) / h).ceil().max(1.0) as usize;
            let ph = (hi - lo) / panels as f64;
            for p in 0..panels {
                let mid = lo + (p as f64 + 0.5) * ph;
                for (u, wt) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                    nodes.push(mid + 0.5 * ph * u);
                    weights.push(0.5 * ph * wt);
                }
            }
        }
        (nodes, weights)
    }

    /// Averages of `V` over the cells `[x_i - h/2, x_i + h/2]`.
    pub fn cell_averages(&self, grid: &Grid1D) -> Vec<f64> {
        let h = grid.h();
        let bps = self.breakpoints();
        (0..grid.len())
            .map(|i| {
                let (lo, hi) = (grid.x(i) - 0.5 * h, grid.x(i) + 0.5 * h);
                if self.vanishes_on(lo, hi) {
                    return 0.0;
                }
                let mut cuts = vec![lo];
                cuts.extend(bps.iter().copied().filter(|b| *b > lo && *b < hi));
                cuts.push(hi);
                let mut s = 0.0;
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let mid = 0.5 * (a + b);
                    for (u, wt) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                        s += 0.5 * (b - a) * wt * self.eval(mid + 0.5 * (b - a) * u);
                    }
                }
                s / h
            })
            .collect()
    }

    /// Short identifier in the CLI syntax where one exists.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == -1.0 {
            f.write_str("-")?;
        } else if self.scale != 1.0 {
            write!(f, "{}*", self.scale)?;
        }
        match &self.family {
            Family::Zero => f.write_str("zero")?,
            Family::Well { s, a, b } => write!(f, "well:{s}:{a}:{b}")?,
            Family::ExpDecay { s } => write!(f, "exp:{s}")?,
            Family::Signed { s, a, b } => write!(f, "signed:{s}:{a}:{b}")?,
            Family::Table { points } => write!(f, "table[{}]", points.len())?,
        }
        if let Some(n) = self.clip {
            write!(f, "|{n}")?;
        }
        Ok(())
    }
}

impl FromStr for Potential {
    type Err = Error;

    /// `zero`, `well:s:a:b`, `exp:s`, `signed:s:a:b`, optionally prefixed by
    /// `-` or `k*`, optionally suffixed by `|n` for a truncation.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::invalid(format!("cannot parse potential `{s}`: {msg}"));
        let mut body = s.trim();
        let mut clip = None;
        if let Some((head, n)) = body.split_once('|') {
            clip = Some(n.trim().parse::<f64>().map_err(|_| bad("truncation level is not a number"))?);
            body = head;
        }
        let mut scale = 1.0;
        if let Some((k, rest)) = body.split_once('*') {
            scale = k.trim().parse::<f64>().map_err(|_| bad("scale is not a number"))?;
            body = rest;
        } else if let Some(rest) = body.strip_prefix('-') {
            scale = -1.0;
            body = rest;
        }
        let mut parts = body.split(':');
        let name = parts.next().unwrap_or("").trim();
        let nums: Vec<f64> = parts
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad(&format!("`{p}` is not a number"))))
            .collect::<Result<_>>()?;
        let arity = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(bad(&format!("`{name}` takes {k} parameters, got {}", nums.len())))
            }
        };
        let family = match name {
            "zero" => {
                arity(0)?;
                Family::Zero
            }
            "well" => {
                arity(3)?;
                Family::Well { s: nums[0], a: nums[1], b: nums[2] }
            }
            "exp" | "exp_decay" => {
                arity(1)?;
                Family::ExpDecay { s: nums[0] }
            }
            "signed" => {
                arity(3)?;
                Family::Signed { s: nums[0], a: nums[1], b: nums[2] }
            }
            "table" => return Err(bad("table potentials are given as JSON or a CSV file")),
            other => return Err(bad(&format!("unknown family `{other}`"))),
        };
        let p = Potential { family, scale, clip };
        p.validate()?;
        Ok(p)
    }
}

/// `(V ∧ n) ∨ (-n)`.
pub fn truncate(v: &Potential, n: f64) -> Result<Potential> {
    if !(n >= 0.0) {
        return Err(Error::invalid(format!("truncation level must be >= 0, got {n}")));
    }
    let mut out = v.clone();
    out.clip = Some(v.clip.map_or(n, |m| m.min(n)));
    Ok(out)
}

/// `∫_0^L x|V(x)| dx` by the potential's quadrature.
pub fn alpha_of(v: &Potential, grid: &Grid1D) -> f64 {
    let (nodes, weights) = v.quadrature(grid);
    nodes.iter().zip(&weights).map(|(x, w)| w * x * v.eval(*x).abs()).sum()
}

/// `sup_y ∫ |V(x)| e^{ξ(x-y)} G_λ(x, y) dx` over grid points `y`.
pub fn miyadera_norm(v: &Potential, lambda: f64, xi: f64, grid: &Grid1D) -> Result<f64> {
    if !(lambda > xi * xi) || !lambda.is_finite() {
        return Err(Error::invalid(format!("need lambda > xi², got lambda={lambda}, xi={xi}")));
    }
    let (nodes, weights) = v.quadrature(grid);
    let wv: Vec<f64> = nodes.iter().zip(&weights).map(|(x, w)| w * v.eval(*x).abs()).collect();
    Ok(column_sup(grid, &nodes, &wv, |x, y| (xi * (x - y)).exp() * raw::green(lambda, x, y)))
}

/// `sup_y ∫ (x/y) G_ω(x, y) |V(x)| dx` over grid points `y`.
pub fn miyadera_norm_m_weighted(v: &Potential, omega: f64, grid: &Grid1D) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid(format!("omega must be positive, got {omega}")));
    }
    let (nodes, weights) = v.quadrature(grid);
    let wv: Vec<f64> = nodes.iter().zip(&weights).map(|(x, w)| w * v.eval(*x).abs()).collect();
    Ok(column_sup(grid, &nodes, &wv, |x, y| x / y * raw::green(omega, x, y)))
}

fn column_sup(grid: &Grid1D, nodes: &[f64], wv: &[f64], kernel: impl Fn(f64, f64) -> f64) -> f64 {
    let mut best = 0.0f64;
    for j in 0..grid.len() {
        let y = grid.x(j);
        let s: f64 = nodes.iter().zip(wv).filter(|(_, w)| **w != 0.0).map(|(x, w)| w * kernel(*x, y)).sum();
        best = best.max(s);
    }
    best
}

/// Largest `ρ` with `M_{|V|} u = ρ L_h u`, `L_h` the Dirichlet second
/// difference on the grid (zero at 0 and beyond `L`), `M` the cell averages.
pub fn form_smallness_ratio(v: &Potential, grid: &Grid1D) -> Result<f64> {
    let m: Vec<f64> = v.cell_averages(grid).into_iter().map(f64::abs).collect();
    if m.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let n = grid.len();
    let h2 = grid.h() * grid.h();
    let lap = Tridiag::new(&vec![2.0 / h2; n], -1.0 / h2).expect("Dirichlet Laplacian is nonsingular");
    let apply_l = |u: &[f64], i: usize| {
        let left = if i > 0 { u[i - 1] } else { 0.0 };
        let right = if i + 1 < n { u[i + 1] } else { 0.0 };
        (2.0 * u[i] - left - right) / h2
    };
    let mut u: Vec<f64> = m.iter().map(|x| if *x > 0.0 { 1.0 } else { 0.0 }).collect();
    let mut rho = 0.0f64;
    let mut residual = f64::INFINITY;
    for _ in 0..100_000 {
        let mut w: Vec<f64> = u.iter().zip(&m).map(|(a, b)| a * b).collect();
        lap.solve(&mut w);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let num: f64 = w.iter().zip(&m).map(|(a, b)| b * a * a).sum();
        let den: f64 = (0..n).map(|i| w[i] * apply_l(&w, i)).sum();
        let next = num / den;
        residual = (next - rho).abs() / next;
        rho = next;
        u = w;
        if residual <= 1e-10 {
            return Ok(rho);
        }
    }
    Err(Error::NumericFailure {
        message: "form smallness eigen-iteration did not converge".into(),
        residual,
        last_iterate: u,
    })
}
