//! Finite-state positive semigroups `e^{t(A − V)}` on `L_p(μ)`, where the
//! abstract perturbation results can be checked with exact linear algebra.

mod checks;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

pub use checks::{
    check_additivity, check_domination, check_interpolation, check_log_convexity, check_miyadera_discrete,
    check_pert_ultracon_constant, check_pert_ultracon_adversarial, OracleConfig, EXPONENTS, THETAS,
};

/// Largest state space the oracle accepts.
pub const MAX_STATES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSemigroup {
    pub mu: Vec<f64>,
    pub a: DMatrix<f64>,
    pub v: Vec<f64>,
}

impl DiscreteSemigroup {
    pub fn new(mu: Vec<f64>, a: DMatrix<f64>, v: Vec<f64>) -> Result<Self> {
        let n = mu.len();
        if n == 0 || n > MAX_STATES {
            return Err(Error::invalid(format!("state count must be 1..={MAX_STATES}, got {n}")));
        }
        if a.nrows() != n || a.ncols() != n || v.len() != n {
            return Err(Error::invalid("A, μ and V must have matching sizes"));
        }
        if mu.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::invalid("μ must be positive"));
        }
        if a.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::invalid("A and V must be finite"));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && a[(i, j)] < 0.0 {
                    return Err(Error::invalid(format!("A[{i},{j}] = {} is negative off the diagonal", a[(i, j)])));
                }
            }
        }
        Ok(DiscreteSemigroup { mu, a, v })
    }

    /// `A_ij = S_ij/μ_i` off the diagonal and the diagonal chosen so that
    /// `Σ_i μ_i A_ij = g_j`. `S` must be symmetric and nonnegative; only its
    /// lower triangle is read.
    pub fn from_parts(mu: Vec<f64>, s: &DMatrix<f64>, g: &[f64], v: Vec<f64>) -> Result<Self> {
        let n = mu.len();
        if s.nrows() != n || s.ncols() != n || g.len() != n {
            return Err(Error::invalid("S, g and μ must have matching sizes"));
        }
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut off = 0.0;
            for i in 0..n {
                if i != j {
                    let sij = if i > j { s[(i, j)] } else { s[(j, i)] };
                    a[(i, j)] = sij / mu[i];
                    off += sij;
                }
            }
            a[(j, j)] = (g[j] - off) / mu[j];
        }
        Self::new(mu, a, v)
    }

    /// Random `μ`-symmetric generator: `μ ∈ [0.5, 2]`, `S` symmetric in
    /// `[0, 1]` with a fifth of the entries zero, `g ∈ [-0.5, 0.2]`, `V`
    /// uniform in `[-1, 1]`.
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Result<Self> {
        let (mu, s, g, v) = random_parts(rng, n);
        Self::from_parts(mu, &s, &g, v)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// `μ_i A_ij = μ_j A_ji`, i.e. `A` is self-adjoint on `L_2(μ)`.
    pub fn is_self_adjoint(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| {
            (0..i).all(|j| {
                let (x, y) = (self.mu[i] * self.a[(i, j)], self.mu[j] * self.a[(j, i)]);
                (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300)
            })
        })
    }

    /// `A − s·diag(V)`.
    pub fn generator(&self, v_scale: f64) -> DMatrix<f64> {
        self.generator_with(&self.v.iter().map(|v| v_scale * v).collect::<Vec<_>>())
    }

    /// `A − diag(w)`.
    pub fn generator_with(&self, w: &[f64]) -> DMatrix<f64> {
        let mut g = self.a.clone();
        for (i, x) in w.iter().enumerate() {
            g[(i, i)] -= x;
        }
        g
    }

    /// `ω = max_j (Σ_i μ_i A_ij)/μ_j`: `‖e^{tA}‖_{1→1} ≤ e^{ωt}` on `L_1(μ)`.
    pub fn l1_growth_bound(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| (0..n).map(|i| self.mu[i] * self.a[(i, j)]).sum::<f64>() / self.mu[j])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn random_parts<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let x = if rng.random_bool(0.8) { rng.random_range(0.0..1.0) } else { 0.0 };
            s[(i, j)] = x;
            s[(j, i)] = x;
        }
    }
    let g = (0..n).map(|_| rng.random_range(-0.5..0.2)).collect();
    let v = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    (mu, s, g, v)
}

/// `e^{t(A − s·diag V)}`.
pub fn semigroup_at(s: &DiscreteSemigroup, v_scale: f64, t: f64) -> Result<DMatrix<f64>> {
    expm_metzler(&s.generator(v_scale), t)
}

/// `e^{tM}` for `M` with nonnegative off-diagonal entries. Writes
/// `M = P − σI` with `P ≥ 0`, so the Taylor series of `e^{tP/2^k}` has
/// only nonnegative terms, then squares `k` times. Every step adds and
/// multiplies nonnegative numbers, so entries keep full relative accuracy.
pub fn expm_metzler(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be finite and >= 0, got {t}")));
    }
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::invalid("matrix must be square"));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] < 0.0 {
                return Err(Error::invalid("negative off-diagonal entry"));
            }
        }
    }
    let sigma = (0..n).map(|i| -m[(i, i)]).fold(0.0f64, f64::max);
    let mut p = m * t;
    for i in 0..n {
        p[(i, i)] += sigma * t;
    }
    let norm = p.iter().fold(0.0f64, |a, x| a.max(*x)) * n as f64;
    let k = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 2f64.powi(-k);
    let p = p * scale;
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..60 {
        term = &term * &p / j as f64;
        sum += &term;
        if term.iter().zip(sum.iter()).all(|(a, b)| *a <= 1e-18 * b.max(1e-300)) {
            break;
        }
    }
    let mut e = sum * (-sigma * t * scale).exp();
    for _ in 0..k {
        e = &e * &e;
    }
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericFailure {
            message: "matrix exponential overflowed".into(),
            residual: f64::INFINITY,
            last_iterate: vec![],
        });
    }
    Ok(e)
}

/// `‖f‖_{L_p(μ)}`.
pub fn lp_norm(f: &[f64], p: f64, mu: &[f64]) -> f64 {
    if p.is_infinite() {
        f.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    } else {
        f.iter().zip(mu).map(|(x, m)| m * x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Starts of the multi-start ascent.
pub const NORM_STARTS: usize = 200;
/// Convergence tolerance of the ascent on the maximizer.
pub const NORM_TOL: f64 = 1e-9;

/// Operator norm of `B` from `L_p(μ)` to `L_q(μ)`.
///
/// Closed forms cover `p = 1` and `q = ∞` for any `B`, and `p = ∞` and
/// `q = 1` for nonnegative `B`. The rest requires `B ≥ 0` and runs the
/// nonlinear power iteration `f ← (B^*(Bf)^{q-1})^{1/(p-1)}` from
/// [`NORM_STARTS`] nonnegative starts.
pub fn weighted_norm(b: &DMatrix<f64>, p: f64, q: f64, mu: &[f64]) -> Result<f64> {
    Ok(weighted_norm_with_maximizer(b, p, q, mu)?.0)
}

/// [`weighted_norm`] together with a maximizer of unit `L_p(μ)` norm.
pub fn weighted_norm_with_maximizer(b: &DMatrix<f64>, p: f64, q: f64, mu: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = mu.len();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::invalid("B and μ must have matching sizes"));
    }
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(Error::invalid(format!("exponents must lie in [1, ∞], got p={p}, q={q}")));
    }
    let nonneg = b.iter().all(|x| *x >= 0.0);
    let unit = |j: usize| {
        let mut f = vec![0.0; n];
        f[j] = 1.0 / lp_norm(&{ let mut e = vec![0.0; n]; e[j] = 1.0; e }, p, mu);
        f
    };
    if p == 1.0 {
        let mut best = (0.0, unit(0));
        for j in 0..n {
            let col: Vec<f64> = b.column(j).iter().map(|x| x / mu[j]).collect();
            let v = lp_norm(&col, q, mu);
            if v > best.0 {
                best = (v, unit(j));
            }
        }
        return Ok(best);
    }
    if q.is_infinite() {
        let pc = conjugate(p);
        let mut best = (0.0, vec![0.0; n]);
        for i in 0..n {
            let row: Vec<f64> = (0..n).map(|j| b[(i, j)] / mu[j]).collect();
            let v = lp_norm(&row, pc, mu);
            if v > best.0 {
                best = (v, dual_maximizer(&row, p, mu, v));
            }
        }
        return Ok(best);
    }
    if !nonneg {
        return Err(Error::invalid("norms with 1 < p and q < ∞ need a nonnegative matrix"));
    }
    if p.is_infinite() {
        let one = vec![1.0; n];
        let bf = b * DVector::from_vec(one.clone());
        return Ok((lp_norm(bf.as_slice(), q, mu), one));
    }
    if q == 1.0 {
        let g: Vec<f64> = (0..n).map(|j| (0..n).map(|i| mu[i] * b[(i, j)]).sum::<f64>() / mu[j]).collect();
        let v = lp_norm(&g, conjugate(p), mu);
        return Ok((v, dual_maximizer(&g, p, mu, v)));
    }
    power_ascent(b, p, q, mu)
}

/// `f` with `‖f‖_p = 1` and `Σ μ g f = ‖g‖_{p'}` for `g ≥ 0`-signed rows.
fn dual_maximizer(g: &[f64], p: f64, mu: &[f64], gnorm: f64) -> Vec<f64> {
    let n = g.len();
    if gnorm == 0.0 {
        return vec![0.0; n];
    }
    if p.is_infinite() {
        return g.iter().map(|x| x.signum()).collect();
    }
    let pc = conjugate(p);
    let f: Vec<f64> = g.iter().map(|x| x.signum() * x.abs().powf(pc - 1.0)).collect();
    let s = lp_norm(&f, p, mu);
    f.iter().map(|x| x / s).collect()
}

fn power_ascent(b: &DMatrix<f64>, p: f64, q: f64, mu: &[f64]) -> Result<(f64, Vec<f64>)> {
    use rand::SeedableRng;
    let n = mu.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let objective = |f: &[f64]| {
        let bf = b * DVector::from_column_slice(f);
        lp_norm(bf.as_slice(), q, mu)
    };
    let normalize = |f: &mut Vec<f64>| {
        let s = lp_norm(f, p, mu);
        if s > 0.0 {
            f.iter_mut().for_each(|x| *x /= s);
        }
    };
    let mut best = (0.0f64, vec![0.0; n]);
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for start in 0..NORM_STARTS {
        let mut f: Vec<f64> = match start {
            0 => vec![1.0; n],
            s if s <= n => {
                let mut e = vec![1e-3; n];
                e[s - 1] = 1.0;
                e
            }
            _ => (0..n).map(|_| rng.random_range(1e-3..1.0)).collect(),
        };
        normalize(&mut f);
        let mut damped = false;
        let mut prev_obj = objective(&f);
        for it in 0..4000 {
            let bf = b * DVector::from_column_slice(&f);
            let w: Vec<f64> = bf.iter().map(|x| x.max(0.0).powf(q - 1.0)).collect();
            let mut g: Vec<f64> = (0..n)
                .map(|j| {
                    let s: f64 = (0..n).map(|i| mu[i] * b[(i, j)] * w[i]).sum::<f64>() / mu[j];
                    s.powf(1.0 / (p - 1.0))
                })
                .collect();
            if damped {
                g.iter_mut().zip(&f).for_each(|(a, b)| *a = (*a * b).sqrt());
            }
            normalize(&mut g);
            if g.iter().all(|x| *x == 0.0) {
                break;
            }
            let obj = objective(&g);
            let step = g.iter().zip(&f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            f = g;
            if step <= NORM_TOL {
                converged = true;
                residual = residual.min(step);
                break;
            }
            // An iteration that stops increasing the objective is oscillating:
            // switch to geometric damping, which keeps the fixed points.
            if obj < prev_obj * (1.0 - 1e-14) && !damped && it > 20 {
                damped = true;
            }
            prev_obj = obj;
            residual = residual.min(step);
        }
        let v = objective(&f);
        if v > best.0 {
            best = (v, f);
        }
    }
    if !converged {
        return Err(Error::NumericFailure {
            message: format!("norm ascent for p={p}, q={q} did not converge from any start; best lower bound {}", best.0),
            residual,
            last_iterate: best.1,
        });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / b.amax()
    }

    #[test]
    fn expm_matches_pade_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=6 {
            let s = DiscreteSemigroup::random(&mut rng, n).unwrap();
            for t in [0.0, 0.01, 0.7, 5.0] {
                let mine = semigroup_at(&s, 1.0, t).unwrap();
                let reference = (s.generator(1.0) * t).exp();
                assert!(close(&mine, &reference) < 1e-12, "n={n} t={t}");
                assert!(mine.iter().all(|x| *x >= 0.0));
            }
        }
    }

    #[test]
    fn diagonal_generator_gives_scalar_exponentials() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5, 2.0]));
        let s = DiscreteSemigroup::new(vec![1.0, 2.0, 0.5], a, vec![0.3, -0.2, 1.0]).unwrap();
        let e = semigroup_at(&s, 1.0, 1.5).unwrap();
        for (i, (a, v)) in [(-1.0, 0.3), (0.5, -0.2), (2.0f64, 1.0f64)].iter().enumerate() {
            assert!((e[(i, i)] / ((a - v) * 1.5f64).exp() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn random_generators_are_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = DiscreteSemigroup::random(&mut rng, 5).unwrap();
        assert!(s.is_self_adjoint());
        let mut t = s.clone();
        t.a[(0, 1)] += 0.1;
        assert!(!t.is_self_adjoint());
    }

    #[test]
    fn norm_closed_forms() {
        let mu = [0.5, 1.0, 2.0];
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.3, 0.4, 2.0, 0.1, 0.0, 0.5, 1.5]);
        let one_one = (0..3).map(|j| (0..3).map(|i| b[(i, j)] * mu[i]).sum::<f64>() / mu[j]).fold(0.0, f64::max);
        assert!((weighted_norm(&b, 1.0, 1.0, &mu).unwrap() - one_one).abs() < 1e-14);
        let one_inf = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| b[(i, j)] / mu[j]).fold(0.0, f64::max);
        assert!((weighted_norm(&b, 1.0, f64::INFINITY, &mu).unwrap() - one_inf).abs() < 1e-14);
        let id = DMatrix::identity(3, 3);
        for p in EXPONENTS {
            assert!((weighted_norm(&id, p, p, &mu).unwrap() - 1.0).abs() < 1e-9, "p={p}");
        }
    }

    /// For a `μ`-self-adjoint nonnegative matrix the `2 → 2` norm is the
    /// spectral radius of `D^{1/2} B D^{-1/2}`.
    #[test]
    fn two_two_norm_matches_symmetric_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            let s = DiscreteSemigroup::random(&mut rng, n).unwrap();
            let b = semigroup_at(&s, 1.0, 0.8).unwrap();
            let d = |i: usize| s.mu[i].sqrt();
            let sym = DMatrix::from_fn(n, n, |i, j| d(i) * b[(i, j)] / d(j));
            let exact = sym.singular_values().max();
            let got = weighted_norm(&b, 2.0, 2.0, &s.mu).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-8, "n={n}: {got} vs {exact}");
        }
    }

    /// Dense scan of the nonnegative unit sphere in two dimensions.
    #[test]
    fn ascent_matches_brute_force_in_two_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for case in 0..30 {
            let mu = [rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
            let b = DMatrix::from_fn(2, 2, |_, _| rng.random_range(0.0..1.0));
            let p = EXPONENTS[1 + case % 3];
            let q = EXPONENTS[1 + (case / 3) % 3];
            let mut brute = 0.0f64;
            for k in 0..=20_000 {
                let th = k as f64 / 20_000.0 * std::f64::consts::FRAC_PI_2;
                let mut f = vec![th.cos(), th.sin()];
                let s = lp_norm(&f, p, &mu);
                f.iter_mut().for_each(|x| *x /= s);
                let bf = &b * DVector::from_vec(f);
                brute = brute.max(lp_norm(bf.as_slice(), q, &mu));
            }
            let (got, f) = weighted_norm_with_maximizer(&b, p, q, &mu).unwrap();
            assert!(got >= brute * (1.0 - 1e-9), "p={p} q={q}: {got} < {brute}");
            assert!(got <= brute * (1.0 + 1e-6), "p={p} q={q}: {got} > {brute}");
            assert!(f.iter().all(|x| *x >= 0.0));
        }
    }
}
