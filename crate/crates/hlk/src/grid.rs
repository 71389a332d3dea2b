//! Uniform grids on the truncated half-line, quadrature rules and
//! weighted operator norms of sampled kernels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::tolerance;

/// Points `x_i = i h`, `i = 1..=N`, `h = L/N`. The Dirichlet point 0 is not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    length: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("grid length must be positive, got {length}")));
        }
        if n < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 points, got {n}")));
        }
        Ok(Self { length, n })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Zero-based access: `x(0) = h`, `x(N-1) = L`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.length * ((i + 1) as f64 / self.n as f64)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the grid point closest to `x`, if `x` lies in `(0, L]` up to half a cell.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let k = (x / self.h()).round();
        if k < 1.0 || k > self.n as f64 {
            return None;
        }
        Some(k as usize - 1)
    }
}

/// Convenience constructor mirroring [`Grid1D::new`].
pub fn make_grid(length: f64, n: usize) -> Result<Grid1D> {
    Grid1D::new(length, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Unweighted,
    /// `e^{xi x}`
    Exponential { xi: f64 },
    /// `m(x) = x`
    Boundary,
    /// `x e^{xi x}`
    ExponentialBoundary { xi: f64 },
}

impl WeightSpec {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            WeightSpec::Unweighted => 1.0,
            WeightSpec::Exponential { xi } => (xi * x).exp(),
            WeightSpec::Boundary => x,
            WeightSpec::ExponentialBoundary { xi } => x * (xi * x).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Trapezoid,
    Simpson,
    /// Uniform weights `h`; the measure used by the 2→2 norms.
    Rectangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: RuleKind,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Simpson when `N` is even and at least 8, trapezoid otherwise.
    pub fn new(grid: &Grid1D) -> Self {
        if grid.len() >= 8 && grid.len() % 2 == 0 {
            Self::simpson(grid)
        } else {
            Self::trapezoid(grid)
        }
    }

    pub fn with_kind(grid: &Grid1D, kind: RuleKind) -> Self {
        match kind {
            RuleKind::Trapezoid => Self::trapezoid(grid),
            RuleKind::Simpson => Self::simpson(grid),
            RuleKind::Rectangle => Self::rectangle(grid),
        }
    }

    /// Trapezoid on `[x_1, L]` plus a linear extrapolation over `[0, x_1]`.
    /// Exact for linear functions. With `N = 2` the rule degrades to `(h, h)`.
    pub fn trapezoid(grid: &Grid1D) -> Self {
        let n = grid.len();
        let h = grid.h();
        let mut w = vec![h; n];
        if n == 2 {
            return Self { kind: RuleKind::Trapezoid, weights: w };
        }
        w[0] = 2.0 * h;
        w[1] = 0.5 * h;
        w[n - 1] = 0.5 * h;
        Self { kind: RuleKind::Trapezoid, weights: w }
    }

    /// Composite Simpson on `[0, L]` where the value at 0 is a cubic
    /// extrapolation through `h, 3h, 5h, 7h`. Exact for cubics, all weights
    /// positive. Falls back to trapezoid for odd `N` or `N < 8`.
    pub fn simpson(grid: &Grid1D) -> Self {
        let n = grid.len();
        if n < 8 || n % 2 == 1 {
            return Self::trapezoid(grid);
        }
        let h = grid.h();
        let mut w: Vec<f64> = (1..=n)
            .map(|i| {
                if i == n {
                    h / 3.0
                } else if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                }
            })
            .collect();
        let extrap = [35.0 / 16.0, -35.0 / 16.0, 21.0 / 16.0, -5.0 / 16.0];
        for (k, c) in extrap.iter().enumerate() {
            w[2 * k] += h / 3.0 * c;
        }
        Self { kind: RuleKind::Simpson, weights: w }
    }

    pub fn rectangle(grid: &Grid1D) -> Self {
        Self { kind: RuleKind::Rectangle, weights: vec![grid.h(); grid.len()] }
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub fn integrate(samples: &[f64], rule: &QuadratureRule) -> Result<f64> {
    if samples.len() != rule.weights.len() {
        return Err(Error::invalid(format!(
            "sample length {} does not match rule length {}",
            samples.len(),
            rule.weights.len()
        )));
    }
    Ok(samples.iter().zip(&rule.weights).map(|(f, w)| f * w).sum())
}

fn check_rule(k: &KernelMatrix, rule: &QuadratureRule) -> Result<()> {
    if rule.weights.len() != k.grid.len() {
        return Err(Error::invalid("quadrature rule and kernel live on different grids"));
    }
    Ok(())
}

/// `sup_j (1/w(y_j)) ∫ |K(x, y_j)| w(x) dx`.
pub fn op_norm_1to1(k: &KernelMatrix, w: WeightSpec, rule: &QuadratureRule) -> Result<f64> {
    check_rule(k, rule)?;
    Ok(column_norms(k, w, rule).into_iter().fold(0.0, f64::max))
}

/// Per-column weighted integrals behind [`op_norm_1to1`].
pub fn column_norms(k: &KernelMatrix, w: WeightSpec, rule: &QuadratureRule) -> Vec<f64> {
    let g = &k.grid;
    let wx: Vec<f64> = (0..g.len()).map(|i| w.eval(g.x(i)) * rule.weights[i]).collect();
    (0..g.len())
        .map(|j| {
            let col = k.values.column(j);
            let s: f64 = col.iter().zip(&wx).map(|(v, a)| v.abs() * a).sum();
            s / w.eval(g.x(j))
        })
        .collect()
}

/// `sup_i w(x_i) ∫ |K(x_i, y)| / w(y) dy`.
pub fn op_norm_inf_to_inf(k: &KernelMatrix, w: WeightSpec, rule: &QuadratureRule) -> Result<f64> {
    check_rule(k, rule)?;
    let g = &k.grid;
    let wy: Vec<f64> = (0..g.len()).map(|j| rule.weights[j] / w.eval(g.x(j))).collect();
    let mut best = 0.0f64;
    for i in 0..g.len() {
        let s: f64 = (0..g.len()).map(|j| k.values[(i, j)].abs() * wy[j]).sum();
        best = best.max(s * w.eval(g.x(i)));
    }
    Ok(best)
}

/// Largest singular value of the discretized operator on `L2(w dx)` with
/// the uniform measure `h`.
pub fn op_norm_2to2(k: &KernelMatrix, w: WeightSpec) -> Result<f64> {
    let g = &k.grid;
    let h = g.h();
    let sw: Vec<f64> = (0..g.len()).map(|i| w.eval(g.x(i)).sqrt()).collect();
    let b = DMatrix::from_fn(g.len(), g.len(), |i, j| sw[i] * h * k.values[(i, j)] / sw[j]);
    spectral_norm(&b)
}

pub fn op_norm_1toinf(k: &KernelMatrix) -> f64 {
    k.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Power iteration on `BᵀB`. Stops when the estimate moves by less than
/// the relative tolerance; gives up after the iteration cap.
pub fn spectral_norm(b: &DMatrix<f64>) -> Result<f64> {
    if b.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let n = b.ncols();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.25 * ((i as f64) * 0.7).sin());
    v /= v.norm();
    let mut sigma = 0.0f64;
    let mut residual = f64::INFINITY;
    for _ in 0..tolerance::POWER_ITERATION_CAP {
        let u = b * &v;
        let s = u.norm();
        let w = b.tr_mul(&u);
        let wn = w.norm();
        if wn == 0.0 {
            return Ok(s);
        }
        residual = (&w - &v * (s * s)).norm() / (s * s).max(f64::MIN_POSITIVE);
        let moved = (s - sigma).abs();
        sigma = s;
        v = w / wn;
        if moved <= tolerance::POWER_ITERATION * s {
            return Ok(sigma);
        }
    }
    Err(Error::NumericFailure {
        message: "power iteration did not converge".into(),
        residual,
        last_iterate: v.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form;

    #[test]
    fn grid_points() {
        let g = make_grid(1.0, 4).unwrap();
        assert_eq!(g.points(), vec![0.25, 0.5, 0.75, 1.0]);
        let g = make_grid(10.0, 1000).unwrap();
        assert!((g.h() - 0.01).abs() < 1e-15);
        assert_eq!(g.x(999), 10.0);
        assert!(make_grid(0.0, 4).is_err());
        assert!(make_grid(-1.0, 4).is_err());
        assert!(make_grid(1.0, 1).is_err());
    }

    #[test]
    fn rule_weights_positive_and_sum_to_length() {
        for n in [2usize, 3, 7, 8, 9, 10, 101, 400] {
            let g = make_grid(3.0, n).unwrap();
            for r in [QuadratureRule::trapezoid(&g), QuadratureRule::simpson(&g), QuadratureRule::new(&g)] {
                assert!(r.weights().iter().all(|w| *w > 0.0), "n={n} {:?}", r.kind());
                let s: f64 = r.weights().iter().sum();
                assert!((s - 3.0).abs() < 1e-12, "n={n} sum={s}");
            }
        }
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let g = make_grid(2.5, 40).unwrap();
        let r = QuadratureRule::new(&g);
        assert_eq!(r.kind(), RuleKind::Simpson);
        for k in 0..=3 {
            let f: Vec<f64> = g.points().iter().map(|x| x.powi(k)).collect();
            let exact = 2.5f64.powi(k + 1) / (k + 1) as f64;
            let got = integrate(&f, &r).unwrap();
            assert!(((got - exact) / exact).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn trapezoid_exact_for_linear() {
        let g = make_grid(1.0, 100).unwrap();
        let r = QuadratureRule::trapezoid(&g);
        let one = vec![1.0; 100];
        assert!((integrate(&one, &r).unwrap() - 1.0).abs() < 1e-10);
        let x = g.points();
        assert!((integrate(&x, &r).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn half_gaussian_mass() {
        let g = make_grid(40.0, 4000).unwrap();
        let r = QuadratureRule::new(&g);
        let f: Vec<f64> = g.points().iter().map(|x| (-x * x / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt()).collect();
        assert!((integrate(&f, &r).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn length_mismatch() {
        let g = make_grid(1.0, 10).unwrap();
        let r = QuadratureRule::new(&g);
        assert!(matches!(integrate(&[1.0; 9], &r), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn norms_of_trivial_kernels() {
        let g = make_grid(5.0, 50).unwrap();
        let zero = KernelMatrix::from_fn(g, 1.0, |_, _| 0.0);
        let rule = QuadratureRule::new(&g);
        assert_eq!(op_norm_1to1(&zero, WeightSpec::Unweighted, &rule).unwrap(), 0.0);
        assert_eq!(op_norm_2to2(&zero, WeightSpec::Unweighted).unwrap(), 0.0);
        assert_eq!(op_norm_1toinf(&zero), 0.0);

        let h = g.h();
        let delta = KernelMatrix::from_matrix(g, 1.0, DMatrix::from_diagonal_element(50, 50, 1.0 / h));
        assert!((op_norm_2to2(&delta, WeightSpec::Unweighted).unwrap() - 1.0).abs() < 1e-6);

        let mut one = DMatrix::zeros(50, 50);
        one[(3, 7)] = 2.0;
        let single = KernelMatrix::from_matrix(g, 1.0, one);
        let w = WeightSpec::Exponential { xi: 0.3 };
        let expect = 2.0 * h * (w.eval(g.x(3)) / w.eval(g.x(7))).sqrt();
        assert!((op_norm_2to2(&single, w).unwrap() / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_kernel_norms() {
        for t in [0.1, 1.0] {
            let l = 4.0 + 10.0 * f64::sqrt(t);
            let g = make_grid(l, 800).unwrap();
            let k = KernelMatrix::closed_form(g, t).unwrap();
            let rule = QuadratureRule::new(&g);
            let plain = op_norm_1to1(&k, WeightSpec::Unweighted, &rule).unwrap();
            assert!(plain <= 1.0 + 1e-6, "t={t} {plain}");
            let boundary = op_norm_1to1(&k, WeightSpec::Boundary, &rule).unwrap();
            assert!((boundary - 1.0).abs() < 1e-6, "t={t} {boundary}");
        }
        let g = make_grid(14.0, 400).unwrap();
        let k = KernelMatrix::closed_form(g, 1.0).unwrap();
        let fourpi = 4.0 * std::f64::consts::PI;
        assert!(op_norm_1toinf(&k) <= fourpi.powf(-0.5));
        assert!(op_norm_2to2(&k, WeightSpec::Unweighted).unwrap() <= 1.0 + 1e-6);
        let stripped = KernelMatrix::from_fn(g, 1.0, |x, y| closed_form::raw::dirichlet(1.0, x, y) / (x * y));
        assert!(op_norm_1toinf(&stripped) <= fourpi.powf(-0.5));
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let b = DMatrix::from_fn(7, 7, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).powi(2)) + 0.1 * (i * j) as f64);
        let svd = b.clone().svd(false, false);
        let top = svd.singular_values.max();
        assert!((spectral_norm(&b).unwrap() / top - 1.0).abs() < 1e-7);
    }

    #[test]
    fn schur_ordering() {
        let g = make_grid(10.0, 200).unwrap();
        let k = KernelMatrix::from_fn(g, 1.0, |x, y| (-(x - y).powi(2)).exp() * (1.0 + 0.1 * x));
        let rect = QuadratureRule::rectangle(&g);
        let one = op_norm_1to1(&k, WeightSpec::Unweighted, &rect).unwrap();
        let inf = op_norm_inf_to_inf(&k, WeightSpec::Unweighted, &rect).unwrap();
        let two = op_norm_2to2(&k, WeightSpec::Unweighted).unwrap();
        assert!(two <= (one * inf).sqrt());
    }
}
