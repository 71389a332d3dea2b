//! Dyson fixed point for the remainder `R = K^V - k`:
//!
//! `R_s = -F_s - ∫_0^s P_{s-r} V R_r dr`
//!
//! where `F_s(x,y) = ∫_0^s ∫ k_{s-r}(x,z) V(z) k_r(z,y) dz dr` is evaluated
//! exactly in time through the identity
//! `∫_0^s g_{s-r}(a) g_r(b) dr = ¼ erfc((|a|+|b|)/2√s)`.
//! Space is discretized by cell averages of `V`; `P_τ` is the half-line
//! kernel integrated over cells. Only rows on the support of `V` enter the
//! history, so the iteration works on `|supp V| × N` blocks.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{check_time, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::kernel::{KernelMatrix, Method};
use crate::potential::Potential;

/// `erfc` below this argument is treated as nonzero.
const ERFC_CUTOFF: f64 = 6.5;

/// `∫_0^s k_{s-r}(x,z) k_r(z,y) dr`.
#[inline]
#[cfg(test)]
fn born_weight(s: f64, x: f64, z: f64, y: f64) -> f64 {
    let q = 0.5 / s.sqrt();
    let a1 = ((x - z).abs() + (z - y).abs()) * q;
    let a2 = (x + z + (z - y).abs()) * q;
    let a3 = ((x - z).abs() + z + y) * q;
    let a4 = (x + 2.0 * z + y) * q;
    0.25 * (libm::erfc(a1) - libm::erfc(a2) - libm::erfc(a3) + libm::erfc(a4))
}

/// `∫ erfc(u) du` antiderivative.
#[inline]
fn ierfc(u: f64) -> f64 {
    (-u * u).exp() * std::f64::consts::FRAC_2_SQRT_PI * 0.5 - u * libm::erfc(u)
}

/// `∫_u^w erfc(c + b z) dz`.
#[inline]
fn erfc_integral(c: f64, b: f64, u: f64, w: f64) -> f64 {
    if b == 0.0 {
        (w - u) * libm::erfc(c)
    } else {
        (ierfc(c + b * u) - ierfc(c + b * w)) / b
    }
}

/// `∫_p^q born_weight(s, x, z, y) dz`, exact. Every erfc argument is
/// linear in `z` between the kinks at `x` and `y`.
fn born_run(s: f64, x: f64, y: f64, p: f64, q: f64) -> f64 {
    let k = 0.5 / s.sqrt();
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    let gap = if q < lo { lo - q } else if p > hi { p - hi } else { 0.0 };
    if k * (hi - lo + 2.0 * gap) > ERFC_CUTOFF {
        return 0.0;
    }
    let mut cuts = [p, lo.clamp(p, q), hi.clamp(p, q), q];
    cuts.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let m = 0.5 * (u + v);
        let sx = if m > x { 1.0 } else { -1.0 };
        let sy = if m > y { 1.0 } else { -1.0 };
        acc += erfc_integral(-k * (sx * x + sy * y), k * (sx + sy), u, v)
            - erfc_integral(k * (x - sy * y), k * (1.0 + sy), u, v)
            - erfc_integral(k * (y - sx * x), k * (1.0 + sx), u, v)
            + erfc_integral(k * (x + y), 2.0 * k, u, v);
    }
    0.25 * acc
}

/// Maximal runs of consecutive cells with equal `V̄`: `(left, right, value)`.
fn runs(xs: &[f64], vbar: &[f64], h: f64) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    let mut last: Option<usize> = None;
    for (i, &v) in vbar.iter().enumerate() {
        if v == 0.0 {
            last = None;
            continue;
        }
        match (last, out.last_mut()) {
            (Some(j), Some(run)) if j + 1 == i && run.2 == v => run.1 = xs[i] + 0.5 * h,
            _ => out.push((xs[i] - 0.5 * h, xs[i] + 0.5 * h, v)),
        }
        last = Some(i);
    }
    out
}

/// `F_s(x, y) = Σ_runs v ∫ born_weight dz`.
fn born(s: f64, x: f64, y: f64, runs: &[(f64, f64, f64)]) -> f64 {
    runs.iter().map(|&(p, q, v)| v * born_run(s, x, y, p, q)).sum()
}

/// Time nodes clustered quadratically at both ends.
pub(crate) fn time_nodes(t: f64, m: usize) -> Vec<f64> {
    let mut r: Vec<f64> = (0..=m)
        .map(|k| {
            let s = (std::f64::consts::FRAC_PI_2 * k as f64 / m as f64).sin();
            t * s * s
        })
        .collect();
    r[m] = t;
    r
}

/// `(∫_0^τ erfc(c/2√s) ds, ∫_0^τ s erfc(c/2√s) ds)`.
pub(crate) fn erfc_time_integrals(c: f64, tau: f64) -> (f64, f64) {
    if tau <= 0.0 {
        return (0.0, 0.0);
    }
    let a = c.abs();
    let z = a / (2.0 * tau.sqrt());
    let (e0, e1) = if z > 27.0 {
        (0.0, 0.0)
    } else {
        let ec = libm::erfc(z);
        let g = (-z * z).exp() / std::f64::consts::PI.sqrt();
        let st = tau.sqrt();
        let a2 = a * a;
        (
            (tau + 0.5 * a2) * ec - a * st * g,
            (0.5 * tau * tau - a2 * a2 / 24.0) * ec + a * st * (a2 / 12.0 - tau / 6.0) * g,
        )
    };
    if c >= 0.0 {
        (e0, e1)
    } else {
        (2.0 * tau - e0, tau * tau - e1)
    }
}

/// Cumulative cell masses `∫_0^τ s^k P_s(x_i, cell l) ds`, `k = 0, 1`.
///
/// On the uniform grid every edge offset `edge ∓ x_i` is a half-integer
/// multiple of `h`, so one table of `3N` entries serves all pairs.
struct Cumulative {
    e0: Vec<f64>,
    e1: Vec<f64>,
    n: isize,
}

impl Cumulative {
    fn new(tau: f64, h: f64, n: usize) -> Self {
        let n = n as isize;
        let (e0, e1) = (-n..=2 * n + 2).map(|k| erfc_time_integrals((k as f64 + 0.5) * h, tau)).unzip();
        Cumulative { e0, e1, n }
    }

    #[inline]
    fn cell(&self, i: usize, l: usize) -> (f64, f64) {
        let (i, l) = (i as isize, l as isize);
        let at = |k: isize| (k + self.n) as usize;
        let (a, b, c, d) = (at(l - i - 1), at(l - i), at(l + i + 1), at(l + i + 2));
        (
            0.5 * ((self.e0[a] - self.e0[b]) - (self.e0[c] - self.e0[d])),
            0.5 * ((self.e1[a] - self.e1[b]) - (self.e1[c] - self.e1[d])),
        )
    }
}

/// Product-integration weights at node `k`: `∫_0^{r_k} P_{r_k-q} φ_j(q) dq`
/// for the hat functions `φ_j`, `j = 1..=k`, rows `rows`, columns `cols`.
/// `P` is integrated exactly in time; only the history is interpolated.
fn hat_weights(r: &[f64], k: usize, h: f64, n: usize, rows: &[usize], cols: &[usize]) -> Vec<DMatrix<f64>> {
    let cells = |j: usize| {
        let table = Cumulative::new(r[k] - r[j], h, n);
        let mut c0 = DMatrix::zeros(rows.len(), cols.len());
        let mut c1 = DMatrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &l) in cols.iter().enumerate() {
                (c0[(a, b)], c1[(a, b)]) = table.cell(i, l);
            }
        }
        (c0, c1)
    };
    let mut out: Vec<DMatrix<f64>> = vec![DMatrix::zeros(rows.len(), cols.len()); k];
    let (mut hi0, mut hi1) = cells(0);
    for j in 0..k {
        // interval [r_j, r_{j+1}] in q, i.e. [r_k - r_{j+1}, r_k - r_j] in τ
        let (lo0, lo1) = cells(j + 1);
        let t_hi = r[k] - r[j];
        let t_lo = r[k] - r[j + 1];
        let dq = r[j + 1] - r[j];
        let m0 = &hi0 - &lo0;
        let m1 = &hi1 - &lo1;
        if j > 0 {
            out[j - 1] += (&m1 - &m0 * t_lo) / dq;
        }
        out[j] += (&m0 * t_hi - &m1) / dq;
        (hi0, hi1) = (lo0, lo1);
    }
    out
}

fn scale_rows(m: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (a, mut row) in out.row_iter_mut().enumerate() {
        row *= d[a];
    }
    out
}

/// The iteration runs on the `supp × supp` block of the remainder, whose
/// equation is closed. Rows off the support then follow explicitly, and
/// symmetry of `K^V_r` turns them into the columns needed at time `t`.
pub fn duhamel_kernel(v: &Potential, t: f64, grid: &Grid1D, cfg: &SolverConfig) -> Result<KernelMatrix> {
    check_time(t)?;
    cfg.validate()?;
    let n = grid.len();
    let h = grid.h();
    let xs = grid.points();
    let free = KernelMatrix::closed_form(*grid, t)?;
    let vbar = v.cell_averages(grid);
    let supp: Vec<usize> = (0..n).filter(|&i| vbar[i] != 0.0).collect();
    if supp.is_empty() {
        return Ok(KernelMatrix { method: Method::Duhamel, ..free });
    }
    let runs = runs(&xs, &vbar, h);
    let all: Vec<usize> = (0..n).collect();
    let zs: Vec<f64> = supp.iter().map(|&i| xs[i]).collect();
    let vs: Vec<f64> = supp.iter().map(|&i| vbar[i]).collect();
    let ns = supp.len();
    let scale = free.max_abs();

    let m = cfg.time_quadrature_nodes;
    let r = time_nodes(t, m);

    let born_ss: Vec<DMatrix<f64>> = (1..=m)
        .into_par_iter()
        .map(|k| DMatrix::from_fn(ns, ns, |a, b| born(r[k], zs[a], zs[b], &runs)))
        .collect();
    let weights_ss: Vec<Vec<DMatrix<f64>>> =
        (1..=m).into_par_iter().map(|k| hat_weights(&r, k, h, n, &supp, &supp)).collect();

    let mut hist: Vec<DMatrix<f64>> = vec![DMatrix::zeros(ns, ns); m];
    let mut history = Vec::new();
    let mut converged = false;
    let mut growth = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.series_depth {
        let vhist: Vec<DMatrix<f64>> = hist.iter().map(|rk| scale_rows(rk, &vs)).collect();
        let next: Vec<DMatrix<f64>> = (1..=m)
            .into_par_iter()
            .map(|k| {
                let mut acc = -&born_ss[k - 1];
                for (w, vr) in weights_ss[k - 1].iter().zip(&vhist) {
                    acc.gemm(-1.0, w, vr, 1.0);
                }
                acc
            })
            .collect();
        let diff = next.iter().zip(&hist).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max) / scale;
        growth = if diff > residual { growth + 1 } else { 0 };
        residual = diff;
        history.push(diff);
        hist = next;
        if !diff.is_finite() || growth >= 3 {
            return Err(Error::Divergence { iterations: history.len(), residual: diff, history });
        }
        if diff <= cfg.series_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericFailure {
            message: format!("Duhamel series not converged after {} iterations", cfg.series_depth),
            residual,
            last_iterate: history,
        });
    }
    drop(weights_ss);

    // V R_{r_k}(supp, all) from the rows R_{r_k}(all, supp) and symmetry.
    let vhist: Vec<DMatrix<f64>> = hist.iter().map(|rk| scale_rows(rk, &vs)).collect();
    let vrows: Vec<DMatrix<f64>> = (1..m)
        .into_par_iter()
        .map(|k| {
            let mut acc = DMatrix::from_fn(n, ns, |i, b| -born(r[k], xs[i], zs[b], &runs));
            for (w, vr) in hat_weights(&r, k, h, n, &all, &supp).iter().zip(&vhist) {
                acc.gemm(-1.0, w, vr, 1.0);
            }
            scale_rows(&acc.transpose(), &vs)
        })
        .collect();
    // The last node uses the converged block directly: row-wise it is the
    // same formula, and its weights are needed below anyway.
    let final_weights = hat_weights(&r, m, h, n, &all, &supp);
    let mut last = DMatrix::from_fn(n, ns, |i, b| -born(t, xs[i], zs[b], &runs));
    for (w, vr) in final_weights.iter().zip(&vhist) {
        last.gemm(-1.0, w, vr, 1.0);
    }
    let vlast = scale_rows(&last.transpose(), &vs);

    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| (0..=j).map(|i| -born(t, xs[i], xs[j], &runs)).collect())
        .collect();
    let mut rem = DMatrix::from_fn(n, n, |i, j| if i <= j { upper[j][i] } else { upper[i][j] });
    for (w, vr) in final_weights.iter().zip(vrows.iter().chain(std::iter::once(&vlast))) {
        rem.gemm(-1.0, w, vr, 1.0);
    }
    let mut k = KernelMatrix { t, grid: *grid, values: free.values + rem, method: Method::Duhamel, error_estimate: 0.0 };
    let asym = k.asymmetry();
    k.symmetrize();
    k.error_estimate = residual.max(asym);
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::raw;

    #[test]
    fn born_weight_matches_time_quadrature() {
        // oracle: midpoint rule in r after the substitution r = s·sin²(u)
        let (s, x, z, y) = (0.7, 0.8, 1.3, 2.1);
        let nu = 200_000;
        let du = std::f64::consts::FRAC_PI_2 / nu as f64;
        let mut acc = 0.0;
        for i in 0..nu {
            let u = (i as f64 + 0.5) * du;
            let r = s * u.sin().powi(2);
            let jac = 2.0 * s * u.sin() * u.cos();
            acc += du * jac * raw::dirichlet(s - r, x, z) * raw::dirichlet(r, z, y);
        }
        let got = born_weight(s, x, z, y);
        assert!((got - acc).abs() < 1e-7 * acc, "{got} {acc}");
    }

    #[test]
    fn born_run_matches_midpoint_sum() {
        for &(s, x, y) in &[(0.3, 0.8, 2.1), (0.05, 1.4, 1.6), (2.0, 0.1, 0.2)] {
            let (p, q) = (1.0, 2.0);
            let nz = 100_000;
            let dz = (q - p) / nz as f64;
            let mid: f64 = (0..nz).map(|i| dz * born_weight(s, x, p + (i as f64 + 0.5) * dz, y)).sum();
            let got = born_run(s, x, y, p, q);
            assert!((got - mid).abs() < 1e-9 * mid.abs().max(1e-3), "{s} {x} {y}: {got} {mid}");
        }
    }

    #[test]
    fn erfc_time_integrals_match_quadrature() {
        for &(c, tau) in &[(0.3, 0.7), (-0.2, 0.4), (1.5, 0.05), (-2.0, 3.0)] {
            let nu = 400_000;
            let (mut q0, mut q1) = (0.0, 0.0);
            // s = tau·u², smooth in u
            for i in 0..nu {
                let u = (i as f64 + 0.5) / nu as f64;
                let s = tau * u * u;
                let f = libm::erfc(c / (2.0 * s.sqrt())) * 2.0 * tau * u / nu as f64;
                q0 += f;
                q1 += s * f;
            }
            let (e0, e1) = erfc_time_integrals(c, tau);
            assert!((e0 - q0).abs() < 1e-9 * q0.abs().max(1e-3), "{c} {tau}: {e0} {q0}");
            assert!((e1 - q1).abs() < 1e-9 * q1.abs().max(1e-3), "{c} {tau}: {e1} {q1}");
        }
    }

    #[test]
    fn hat_weights_integrate_linear_histories() {
        // Σ_j W_j f(r_j) = ∫_0^{r_k} P_{r_k-q} f(q) dq exactly for f(q) = q
        let g = Grid1D::new(4.0, 40).unwrap();
        let r = time_nodes(0.6, 12);
        let k = 9;
        let (i, l) = (10, 12);
        let w = hat_weights(&r, k, g.h(), g.len(), &[i], &[l]);
        let got: f64 = (1..=k).map(|j| w[j - 1][(0, 0)] * r[j]).sum();
        let xs = g.points();
        let nq = 200_000;
        let mut want = 0.0;
        for s in 0..nq {
            let u = (s as f64 + 0.5) / nq as f64;
            let tau = r[k] * u * u;
            let q = r[k] - tau;
            want += 2.0 * r[k] * u / nq as f64 * q * raw::dirichlet_mass(tau, xs[i], xs[l] - 0.5 * g.h(), xs[l] + 0.5 * g.h());
        }
        assert!((got - want).abs() < 1e-8 * want, "{got} {want}");
    }

    #[test]
    fn zero_potential_is_exact() {
        let g = Grid1D::new(8.0, 60).unwrap();
        let k = duhamel_kernel(&Potential::zero(), 0.5, &g, &SolverConfig::default()).unwrap();
        assert_eq!(k.values, KernelMatrix::closed_form(g, 0.5).unwrap().values);
    }
}
