//! Randomized checks of the abstract results on finite state spaces. Trial
//! `k` of a check draws from ChaCha stream `(tag, k)` of the master seed,
//! so trials are independent of scheduling and of each other.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{expm_metzler, random_parts, weighted_norm, DiscreteSemigroup};
use crate::error::{Error, Result};
use crate::tolerance;
use crate::verify::{InequalityCheck, Tracker};

/// Exponents drawn by the checks.
pub const EXPONENTS: [f64; 5] = [1.0, 4.0 / 3.0, 2.0, 4.0, f64::INFINITY];
pub const THETAS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Random trials per check.
    pub trials: usize,
    /// Restarts of the adversarial search.
    pub restarts: usize,
    /// Hill-climbing steps per restart.
    pub steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { trials: 100, restarts: 1000, steps: 4 }
    }
}

fn trial_rng(seed: u64, tag: u64, trial: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream((tag << 32) | trial as u64);
    r
}

/// State counts cycle through 2..=6.
fn states(trial: usize) -> usize {
    2 + trial % 5
}

fn exponent_json(p: f64) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        json!(p)
    }
}

fn inverse(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

fn from_inverse(r: f64) -> f64 {
    if r == 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}

/// Run `trials` independent evaluations in parallel and fold them into a
/// tracker in trial order.
fn run_trials<F>(trials: usize, f: F) -> Result<Tracker>
where
    F: Fn(usize) -> Result<Vec<(f64, Value)>> + Sync + Send,
{
    let mut tr = Tracker::new();
    let results: Vec<Vec<(f64, Value)>> = (0..trials).into_par_iter().map(f).collect::<Result<_>>()?;
    for (r, w) in results.into_iter().flatten() {
        tr.see(r, || w);
    }
    Ok(tr)
}

fn semigroup(s: &DiscreteSemigroup, w: &[f64], t: f64) -> Result<DMatrix<f64>> {
    expm_metzler(&s.generator_with(w), t)
}

fn scaled(v: &[f64], k: f64) -> Vec<f64> {
    v.iter().map(|x| k * x).collect()
}

struct InterpolationDraw {
    s: DiscreteSemigroup,
    p: [f64; 4],
    t: f64,
}

fn draw_interpolation(seed: u64, tag: u64, trial: usize) -> Result<InterpolationDraw> {
    let mut rng = trial_rng(seed, tag, trial);
    let s = DiscreteSemigroup::random(&mut rng, states(trial))?;
    let mut p = [0.0; 4];
    for x in &mut p {
        *x = EXPONENTS[rng.random_range(0..EXPONENTS.len())];
    }
    let t = rng.random_range(0.1..2.0);
    Ok(InterpolationDraw { s, p, t })
}

/// `‖T_{θV}(t)‖_{p_θ→q_θ}` along the line through `(p0, q0)` and `(p1, q1)`.
fn interpolated_norm(d: &InterpolationDraw, theta: f64) -> Result<(f64, f64, f64)> {
    let [p0, q0, p1, q1] = d.p;
    let pt = from_inverse((1.0 - theta) * inverse(p0) + theta * inverse(p1));
    let qt = from_inverse((1.0 - theta) * inverse(q0) + theta * inverse(q1));
    let b = semigroup(&d.s, &scaled(&d.s.v, theta), d.t)?;
    Ok((weighted_norm(&b, pt, qt, &d.s.mu)?, pt, qt))
}

/// `‖T_{θV}‖_{p_θ→q_θ} ≤ ‖T‖_{p0→q0}^{1−θ} ‖T_V‖_{p1→q1}^θ` for random
/// self-adjoint generators, exponents and `θ ∈ {1/4, 1/2, 3/4}`.
pub fn check_interpolation(seed: u64, trials: usize) -> Result<InequalityCheck> {
    let tr = run_trials(trials, |k| {
        let d = draw_interpolation(seed, 1, k)?;
        let theta = THETAS[k % THETAS.len()];
        let [p0, q0, p1, q1] = d.p;
        let (lhs, pt, qt) = interpolated_norm(&d, theta)?;
        let n0 = weighted_norm(&semigroup(&d.s, &vec![0.0; d.s.n()], d.t)?, p0, q0, &d.s.mu)?;
        let n1 = weighted_norm(&semigroup(&d.s, &d.s.v, d.t)?, p1, q1, &d.s.mu)?;
        let rhs = n0.powf(1.0 - theta) * n1.powf(theta);
        let w = json!({
            "trial": k, "n": d.s.n(), "t": d.t, "theta": theta,
            "p0": exponent_json(p0), "q0": exponent_json(q0), "p1": exponent_json(p1), "q1": exponent_json(q1),
            "p_theta": exponent_json(pt), "q_theta": exponent_json(qt), "lhs": lhs, "rhs": rhs,
        });
        Ok(vec![(lhs / rhs, w)])
    })?;
    let params = json!({"seed": seed, "trials": trials, "states": "2..=6", "exponents": "1,4/3,2,4,inf", "theta": THETAS});
    Ok(tr.finish("oracle_interpolation", params, 1.0 + tolerance::ORACLE))
}

/// `N(1/2)² ≤ N(1/4) N(3/4)` for `N(θ) = ‖T_{θV}‖_{p_θ→q_θ}`.
pub fn check_log_convexity(seed: u64, trials: usize) -> Result<InequalityCheck> {
    let tr = run_trials(trials, |k| {
        let d = draw_interpolation(seed, 2, k)?;
        let n: Vec<f64> = THETAS.iter().map(|&th| interpolated_norm(&d, th).map(|r| r.0)).collect::<Result<_>>()?;
        let w = json!({
            "trial": k, "n": d.s.n(), "t": d.t,
            "p0": exponent_json(d.p[0]), "q0": exponent_json(d.p[1]), "p1": exponent_json(d.p[2]), "q1": exponent_json(d.p[3]),
            "norms": n,
        });
        Ok(vec![(n[1] * n[1] / (n[0] * n[2]), w)])
    })?;
    let params = json!({"seed": seed, "trials": trials, "theta": THETAS});
    Ok(tr.finish("oracle_log_convexity", params, 1.0 + tolerance::ORACLE))
}

/// `‖B‖_{2→2}` on `L_2(μ)` for `μ`-self-adjoint `B`.
fn two_two(b: &DMatrix<f64>, mu: &[f64]) -> f64 {
    let n = mu.len();
    let sym = DMatrix::from_fn(n, n, |i, j| mu[i].sqrt() * b[(i, j)] / mu[j].sqrt());
    sym.singular_values().max()
}

const ULTRACON_T_MAX: f64 = 2.0;
/// Grid points per factor 3 in `t`.
const ULTRACON_PER_THIRD: usize = 2;
/// Factors of 3 covered by the conclusion grid; hypotheses get one more.
const ULTRACON_THIRDS: usize = 6;

fn ultracon_grid(extra: usize) -> Vec<f64> {
    (0..=ULTRACON_PER_THIRD * (ULTRACON_THIRDS + extra))
        .map(|j| ULTRACON_T_MAX * 3f64.powf(-(j as f64) / ULTRACON_PER_THIRD as f64))
        .collect()
}

struct UltraconCase {
    mu: Vec<f64>,
    s: DMatrix<f64>,
    g: Vec<f64>,
    v: Vec<f64>,
    p: f64,
    nu: f64,
}

fn draw_ultracon<R: Rng>(rng: &mut R, n: usize) -> UltraconCase {
    let (mu, s, g, v) = random_parts(rng, n);
    let p = [4.0 / 3.0, 2.0, 4.0][rng.random_range(0..3)];
    let nu = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    UltraconCase { mu, s, g, v, p, nu }
}

/// Measured hypotheses, the constant `3^{νp'} c M^{2p'}` and the worst
/// conclusion ratio with its time.
fn ultracon_ratio(case: &UltraconCase) -> Result<(f64, Value)> {
    let sg = DiscreteSemigroup::from_parts(case.mu.clone(), &case.s, &case.g, case.v.clone())?;
    let (p, nu) = (case.p, case.nu);
    let zero = vec![0.0; sg.n()];
    let pv = scaled(&sg.v, p);
    let (mut c, mut m) = (0.0f64, 1.0f64);
    for &t in &ultracon_grid(1) {
        c = c.max(t.powf(nu) * weighted_norm(&semigroup(&sg, &zero, t)?, 1.0, f64::INFINITY, &sg.mu)?);
        let tv = semigroup(&sg, &sg.v, t)?;
        m = m
            .max(two_two(&semigroup(&sg, &pv, t)?, &sg.mu))
            .max(weighted_norm(&tv, 1.0, 1.0, &sg.mu)?)
            .max(weighted_norm(&tv, f64::INFINITY, f64::INFINITY, &sg.mu)?);
    }
    let pc = p / (p - 1.0);
    let c_tilde = 3f64.powf(nu * pc) * c * m.powf(2.0 * pc);
    let mut worst = (f64::NEG_INFINITY, 0.0);
    for &t in &ultracon_grid(0) {
        let lhs = t.powf(nu) * weighted_norm(&semigroup(&sg, &sg.v, t)?, 1.0, f64::INFINITY, &sg.mu)?;
        if lhs / c_tilde > worst.0 {
            worst = (lhs / c_tilde, t);
        }
    }
    Ok((worst.0, json!({"n": sg.n(), "p": p, "nu": nu, "c": c, "m": m, "c_tilde": c_tilde, "t": worst.1})))
}

/// `‖T_V(t)‖_{1→∞} ≤ 3^{νp'} c M^{2p'} t^{-ν}` with `c` and `M` measured on
/// a geometric grid in `(0, T_max]` that extends one factor of 3 below the
/// conclusion grid.
pub fn check_pert_ultracon_constant(seed: u64, trials: usize) -> Result<InequalityCheck> {
    let tr = run_trials(trials, |k| {
        let mut rng = trial_rng(seed, 3, k);
        let case = draw_ultracon(&mut rng, states(k));
        let (r, mut w) = ultracon_ratio(&case)?;
        w["trial"] = json!(k);
        Ok(vec![(r, w)])
    })?;
    let params = json!({
        "seed": seed, "trials": trials, "t_max": ULTRACON_T_MAX,
        "grid_ratio": format!("3^(1/{ULTRACON_PER_THIRD})"), "p": [4.0 / 3.0, 2.0, 4.0], "nu": [0.5, 1.0, 2.0],
    });
    Ok(tr.finish("oracle_pert_ultracon", params, 1.0 + tolerance::ORACLE_TIGHT))
}

fn perturb<R: Rng>(rng: &mut R, case: &UltraconCase) -> UltraconCase {
    let n = case.mu.len();
    let mut next = UltraconCase { mu: case.mu.clone(), s: case.s.clone(), g: case.g.clone(), v: case.v.clone(), ..*case };
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    for m in &mut next.mu {
        *m = (*m * (0.3 * normal()).exp()).clamp(0.05, 20.0);
    }
    for i in 0..n {
        for j in 0..i {
            let x = (next.s[(i, j)] * (0.3 * normal()).exp() + 0.02 * normal().abs()).min(20.0);
            next.s[(i, j)] = x;
            next.s[(j, i)] = x;
        }
        next.g[i] = (next.g[i] + 0.2 * normal()).clamp(-5.0, 1.0);
        next.v[i] = (next.v[i] + 0.3 * normal()).clamp(-5.0, 5.0);
    }
    next
}

/// Random restarts with a few steps of hill climbing on `(μ, S, g, V)`,
/// maximizing the conclusion ratio of [`check_pert_ultracon_constant`].
pub fn check_pert_ultracon_adversarial(seed: u64, restarts: usize, steps: usize) -> Result<InequalityCheck> {
    let tr = run_trials(restarts, |k| {
        let mut rng = trial_rng(seed, 4, k);
        let mut case = draw_ultracon(&mut rng, states(k));
        let (mut best, mut w) = ultracon_ratio(&case)?;
        for _ in 0..steps {
            let next = perturb(&mut rng, &case);
            let (r, nw) = ultracon_ratio(&next)?;
            if r > best {
                (best, w, case) = (r, nw, next);
            }
        }
        w["restart"] = json!(k);
        Ok(vec![(best, w)])
    })?;
    let params = json!({"seed": seed, "restarts": restarts, "steps": steps});
    Ok(tr.finish("oracle_pert_ultracon_adversarial", params, 1.0 + tolerance::ORACLE_TIGHT))
}

/// `‖T_V(t)‖_{1→1} ≤ M/(1−α) e^{λt}` with `M = 1`, `ω` the `L_1(μ)`
/// growth bound, `λ = ω + δ` and `α = ‖|V|(λ − A)^{-1}‖_{1→1}`. `V` is
/// rescaled to a target `α`; every tenth trial uses `α = 0.99`. The
/// hypothesis `‖T(t)‖_{1→1} ≤ e^{ωt}` is checked on the same grid.
pub fn check_miyadera_discrete(seed: u64, trials: usize) -> Result<InequalityCheck> {
    let grid: Vec<f64> = (0..=16).map(|j| 10.0 * 3f64.powf(-(j as f64) / 2.0)).collect();
    let tr = run_trials(trials, |k| {
        let mut rng = trial_rng(seed, 5, k);
        let mut s = DiscreteSemigroup::random(&mut rng, states(k))?;
        let n = s.n();
        let omega = s.l1_growth_bound();
        let lambda = omega + rng.random_range(0.1..2.0);
        let target = if k % 10 == 9 { 0.99 } else { rng.random_range(0.05..0.95) };
        let resolvent = (DMatrix::identity(n, n) * lambda - &s.a)
            .try_inverse()
            .ok_or_else(|| Error::NumericFailure { message: "singular resolvent".into(), residual: f64::INFINITY, last_iterate: vec![] })?;
        let alpha_of = |v: &[f64]| {
            (0..n)
                .map(|j| (0..n).map(|i| s.mu[i] * v[i].abs() * resolvent[(i, j)]).sum::<f64>() / s.mu[j])
                .fold(0.0f64, f64::max)
        };
        let raw = alpha_of(&s.v);
        if raw > 0.0 {
            s.v = scaled(&s.v, target / raw);
        }
        let alpha = alpha_of(&s.v);
        let base = json!({"trial": k, "n": n, "omega": omega, "lambda": lambda, "alpha": alpha});
        if alpha >= 1.0 {
            let mut w = base;
            w["skipped"] = json!(true);
            return Ok(vec![(0.0, w)]);
        }
        let zero = vec![0.0; n];
        let mut out = Vec::new();
        for &t in &grid {
            let free = weighted_norm(&semigroup(&s, &zero, t)?, 1.0, 1.0, &s.mu)?;
            let pert = weighted_norm(&semigroup(&s, &s.v, t)?, 1.0, 1.0, &s.mu)?;
            for (part, r) in [("hypothesis", free * (-omega * t).exp()), ("conclusion", pert * (1.0 - alpha) * (-lambda * t).exp())] {
                let mut w = base.clone();
                w["t"] = json!(t);
                w["part"] = json!(part);
                out.push((r, w));
            }
        }
        Ok(out)
    })?;
    let params = json!({"seed": seed, "trials": trials, "t": "10·3^(-j/2), j=0..16", "alpha_boundary": 0.99});
    Ok(tr.finish("oracle_miyadera", params, 1.0 + tolerance::ORACLE_TIGHT))
}

fn rel_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = b.amax();
    if m == 0.0 {
        0.0
    } else {
        (a - b).amax() / m
    }
}

/// `(T_V)_W = T_{V+W} = (T_W)_V`: the exponential of `(A − V) − W`
/// against those of `A − (V + W)` and `(A − W) − V`. Every tenth trial
/// has `W = 0`.
pub fn check_additivity(seed: u64, trials: usize) -> Result<InequalityCheck> {
    let tr = run_trials(trials, |k| {
        let mut rng = trial_rng(seed, 6, k);
        let s = DiscreteSemigroup::random(&mut rng, states(k))?;
        let n = s.n();
        let w: Vec<f64> = (0..n).map(|_| if k % 10 == 0 { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let t = rng.random_range(0.1..3.0);
        let step = |first: &[f64], second: &[f64]| {
            let mut g = s.generator_with(first);
            for i in 0..n {
                g[(i, i)] -= second[i];
            }
            expm_metzler(&g, t)
        };
        let vw = step(&s.v, &w)?;
        let wv = step(&w, &s.v)?;
        let sum: Vec<f64> = s.v.iter().zip(&w).map(|(a, b)| a + b).collect();
        let joint = semigroup(&s, &sum, t)?;
        let gap = rel_gap(&vw, &joint).max(rel_gap(&vw, &wv));
        Ok(vec![(1.0 + gap, json!({"trial": k, "n": n, "t": t, "gap": gap}))])
    })?;
    let params = json!({"seed": seed, "trials": trials});
    Ok(tr.finish("oracle_additivity", params, 1.0 + tolerance::EXPM))
}

/// `V ≥ W ⟹ e^{t(A−V)} ≤ e^{t(A−W)}` entrywise; the ratio is
/// `1 + max(0, max (T_V − T_W)) / max T_W`.
pub fn check_domination(seed: u64, trials: usize) -> Result<InequalityCheck> {
    let tr = run_trials(trials, |k| {
        let mut rng = trial_rng(seed, 7, k);
        let s = DiscreteSemigroup::random(&mut rng, states(k))?;
        let n = s.n();
        let bigger: Vec<f64> = s.v.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
        let t = rng.random_range(0.1..3.0);
        let tv = semigroup(&s, &bigger, t)?;
        let tw = semigroup(&s, &s.v, t)?;
        let excess = (&tv - &tw).max().max(0.0) / tw.amax();
        Ok(vec![(1.0 + excess, json!({"trial": k, "n": n, "t": t, "excess": excess}))])
    })?;
    let params = json!({"seed": seed, "trials": trials});
    Ok(tr.finish("oracle_domination", params, 1.0 + tolerance::EXPM))
}
