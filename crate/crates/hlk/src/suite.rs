//! Named suites of checks, assembled into a [`VerificationReport`].

use std::collections::BTreeMap;

use serde_json::json;

use crate::config::{RunConfig, Suite};
use crate::error::Result;
use crate::grid::Grid1D;
use crate::oracle;
use crate::potential::{alpha_of, miyadera_norm, Potential};
use crate::tolerance;
use crate::verify::{self, InequalityCheck, KernelCache, Tracker, VerificationReport};

/// Every check name a suite can emit; tolerance overrides must use one.
pub const CHECK_NAMES: [&str; 30] = [
    "boundary_bound",
    "counterexample_negative_rate",
    "counterexample_zero_rate",
    "cross_method",
    "davies_gaffney",
    "davies_gaffney_free",
    "envelope_ordering",
    "exponential_bound",
    "free_boundary_bound",
    "free_exponential_bound",
    "free_main_constant",
    "green_laplace",
    "l1_boundary_weighted",
    "l1_boundary_weighted_free",
    "l1_exponential",
    "l1_exponential_free",
    "main_envelope",
    "miyadera_smallness",
    "monte_carlo",
    "oracle_additivity",
    "oracle_domination",
    "oracle_interpolation",
    "oracle_log_convexity",
    "oracle_miyadera",
    "oracle_pert_ultracon",
    "oracle_pert_ultracon_adversarial",
    "positivity",
    "sandwich",
    "stochasticity",
    "weighted_ultracontractivity",
];

/// Grid of the stochasticity check.
pub const STOCHASTICITY_T: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const STOCHASTICITY_Y: [f64; 3] = [0.1, 1.0, 5.0];

/// Potentials of the resolvent smallness check besides the configured one.
pub fn builtin_potentials() -> Vec<Potential> {
    vec![
        Potential::well(0.4, 1.0, 2.0).expect("valid"),
        Potential::exp_decay(0.5).expect("valid"),
        Potential::signed(0.3, 0.5, 1.5).expect("valid"),
    ]
}

/// Points of the `y` grid in the smallness check, on `(0, supp V + 10]`.
pub const MIYADERA_N: usize = 1000;

/// `ξ² + 0.1` followed by the points of `{0.5, 1, 2, 5, 10}` above it.
pub fn miyadera_lambdas(xi: f64) -> Vec<f64> {
    let lo = xi * xi + 0.1;
    let mut out = vec![lo];
    out.extend([0.5, 1.0, 2.0, 5.0, 10.0].into_iter().filter(|l| *l > lo));
    out
}

/// `1 + max(0, miyadera_norm/α − 1)` over `λ`, `ξ ∈ {−1, 0, 1}` and the
/// potentials, with `α` from the same quadrature.
pub fn check_miyadera_smallness(potentials: &[Potential]) -> Result<InequalityCheck> {
    let mut tr = Tracker::new();
    for v in potentials {
        let g = Grid1D::new(v.support_end() + 10.0, MIYADERA_N)?;
        let a = alpha_of(v, &g);
        for xi in [-1.0, 0.0, 1.0] {
            for lambda in miyadera_lambdas(xi) {
                let m = miyadera_norm(v, lambda, xi, &g)?;
                let r = if a == 0.0 { if m == 0.0 { 0.0 } else { f64::INFINITY } } else { m / a };
                tr.see(r, || json!({"V": v.id(), "xi": xi, "lambda": lambda, "norm": m, "alpha": a}));
            }
        }
    }
    let ids: Vec<String> = potentials.iter().map(|v| v.id()).collect();
    let params = json!({"V": ids, "xi": [-1.0, 0.0, 1.0], "lambda": "xi²+0.1, then 0.5..10", "n": MIYADERA_N});
    Ok(tr.finish("miyadera_smallness", params, 1.0 + tolerance::MIYADERA))
}

fn renamed(mut c: InequalityCheck, name: &str) -> InequalityCheck {
    c.name = name.to_string();
    c
}

/// A reported constant as a check: `max_ratio` is the constant, and the
/// check passes while it is finite.
fn constant_check(name: &str, e: &verify::EmpiricalConstant, params: serde_json::Value, runtime_ms: f64) -> InequalityCheck {
    InequalityCheck {
        name: name.to_string(),
        params,
        n_points: e.n_points,
        max_ratio: e.c,
        threshold: f64::MAX,
        pass: e.c.is_finite() && e.c < f64::MAX,
        witness: e.witness.clone(),
        runtime_ms,
    }
}

struct Out {
    checks: Vec<InequalityCheck>,
    constants: BTreeMap<String, f64>,
}

fn closed_form(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let n = cfg.sweep.n;
    out.checks.push(verify::check_sandwich(&cfg.sweep.t, n)?);
    out.checks.push(verify::check_stochasticity(&STOCHASTICITY_T, &STOCHASTICITY_Y, None)?);
    let mut ts = cfg.sweep.t.clone();
    ts.push(100.0);
    out.checks.push(verify::check_weighted_ultracontractivity(&ts, n)?);
    out.checks.push(verify::check_green_laplace(&verify::GREEN_POINTS)?);
    out.checks.push(verify::check_envelope_ordering(&cfg.sweep.t, n)?);
    Ok(())
}

fn potential(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let mut vs = builtin_potentials();
    if !cfg.potential.is_zero() && !vs.contains(&cfg.potential) {
        vs.insert(0, cfg.potential.clone());
    }
    for v in &vs {
        out.constants.insert(format!("alpha[{}]", v.id()), verify::alpha(v)?);
    }
    out.checks.push(check_miyadera_smallness(&vs)?);
    Ok(())
}

fn cache(cfg: &RunConfig, v: &Potential) -> KernelCache {
    KernelCache::new(v.clone(), cfg.method, cfg.solver, cfg.sweep.n, cfg.sweep.x_max)
}

fn main_envelope(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    use crate::closed_form::EnvelopeKind;
    let x_max = cfg.sweep.x_max;
    let slack = tolerance::SOLVER;
    let ts = &cfg.sweep.t;
    let id = cfg.potential.id();

    let started = std::time::Instant::now();
    let mut c = cache(cfg, &cfg.potential);
    let ks = c.sweep(ts, 0.0)?;
    out.checks.push(verify::check_positivity(&ks, &id, x_max));
    let main = verify::empirical_constant(&ks, EnvelopeKind::Main, x_max);
    let exp = verify::empirical_constant(&ks, EnvelopeKind::Exponential, x_max);
    let bnd = verify::empirical_constant(&ks, EnvelopeKind::Boundary, x_max);
    let nopoly = verify::no_polynomial_ratio(&ks, x_max);
    let params = json!({"V": id, "t": ts, "n": cfg.sweep.n, "x_max": x_max, "method": cfg.method, "mask": verify::CONSTANT_MASK});
    out.checks.push(constant_check("main_envelope", &main, params, started.elapsed().as_secs_f64() * 1e3));
    out.checks.push(verify::check_exponential_bound(&ks, &id, exp.c, &cfg.sweep.xi, x_max, slack)?);
    out.checks.push(verify::check_boundary_bound(&ks, &id, bnd.c, x_max, slack)?);
    out.constants.insert("c_emp_main".into(), main.c);
    out.constants.insert("c_emp_exponential".into(), exp.c);
    out.constants.insert("c_emp_boundary".into(), bnd.c);
    out.constants.insert("boundary_no_poly_ratio".into(), nopoly.c);

    // V = 0: the constants are known, so the bounds are checked at them.
    let free = cache(cfg, &Potential::zero()).sweep(ts, 0.0)?;
    let c0 = (4.0 * std::f64::consts::PI).sqrt().recip();
    let main0 = verify::empirical_constant(&free, EnvelopeKind::Main, x_max);
    let mut tr = Tracker::new();
    tr.see(main0.c / c0, || main0.witness.clone());
    let params0 = json!({"t": ts, "n": cfg.sweep.n, "x_max": x_max, "c": c0});
    out.checks.push(tr.finish("free_main_constant", params0, 1.0 + tolerance::QUADRATURE));
    out.checks.push(renamed(verify::check_exponential_bound(&free, "zero", c0, &cfg.sweep.xi, x_max, tolerance::CLOSED_FORM)?, "free_exponential_bound"));
    out.checks.push(renamed(verify::check_boundary_bound(&free, "zero", c0, x_max, tolerance::CLOSED_FORM)?, "free_boundary_bound"));
    out.constants.insert("c_emp_main_free".into(), main0.c);
    Ok(())
}

fn weighted(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let s = &cfg.schedules;
    let slack = tolerance::SOLVER;
    let mut c = cache(cfg, &cfg.potential);
    out.checks.push(verify::check_l1_exponential(&mut c, &cfg.sweep.xi, &s.l1_exponential_t, slack)?);
    out.checks.push(verify::check_l1_boundary_weighted(&mut c, &s.l1_boundary_t, slack)?);
    let mut f = cache(cfg, &Potential::zero());
    let e = verify::check_l1_exponential(&mut f, &cfg.sweep.xi, &s.l1_exponential_t, slack)?;
    out.checks.push(renamed(e, "l1_exponential_free"));
    let b = verify::check_l1_boundary_weighted(&mut f, &s.l1_boundary_t, slack)?;
    out.checks.push(renamed(b, "l1_boundary_weighted_free"));
    out.constants.insert("alpha".into(), verify::alpha(&cfg.potential)?);
    Ok(())
}

fn davies_gaffney(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let ts = &cfg.schedules.davies_gaffney_t;
    let mut c = cache(cfg, &cfg.potential);
    out.checks.push(verify::check_davies_gaffney(&mut c, cfg.davies_gaffney, ts, tolerance::SOLVER)?);
    let mut f = cache(cfg, &Potential::zero());
    let free = verify::check_davies_gaffney(&mut f, cfg.davies_gaffney, ts, tolerance::SOLVER)?;
    out.checks.push(renamed(free, "davies_gaffney_free"));
    Ok(())
}

fn cross_method(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let ts = &cfg.schedules.cross_method_t;
    let mut c = cache(cfg, &cfg.potential);
    out.checks.push(verify::check_cross_method(&mut c, ts)?);
    out.checks.push(verify::check_monte_carlo(&mut c, ts, &cfg.mc)?);
    Ok(())
}

fn counterexample(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let cx = &cfg.counterexample;
    for xi in [cx.xi, -cx.xi, 0.0] {
        let rows = verify::counterexample_demo(xi, &cx.t, &cx.lengths)?;
        for r in &rows {
            out.constants.insert(format!("counterexample[xi={},t={},L={}]", r.xi, r.t, r.length), r.ratio);
        }
        if xi <= 0.0 {
            let name = if xi < 0.0 { "counterexample_negative_rate" } else { "counterexample_zero_rate" };
            let mut tr = Tracker::new();
            for r in &rows {
                tr.see(r.ratio, || json!({"t": r.t, "L": r.length, "y": r.y}));
            }
            let params = json!({"xi": xi, "t": cx.t, "L": cx.lengths, "h": verify::COUNTEREXAMPLE_H});
            out.checks.push(tr.finish(name, params, 1.0 + tolerance::SOLVER));
        }
    }
    Ok(())
}

fn oracle_suite(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let (seed, o) = (cfg.mc.seed, cfg.oracle);
    if o.trials > 0 {
        out.checks.push(oracle::check_interpolation(seed, o.trials)?);
        out.checks.push(oracle::check_log_convexity(seed, o.trials)?);
        out.checks.push(oracle::check_pert_ultracon_constant(seed, o.trials)?);
        out.checks.push(oracle::check_miyadera_discrete(seed, o.trials)?);
        out.checks.push(oracle::check_additivity(seed, o.trials)?);
        out.checks.push(oracle::check_domination(seed, o.trials)?);
    }
    if o.restarts > 0 && o.trials > 0 {
        out.checks.push(oracle::check_pert_ultracon_adversarial(seed, o.restarts, o.steps)?);
    }
    Ok(())
}

fn run_one(suite: Suite, cfg: &RunConfig, out: &mut Out) -> Result<()> {
    match suite {
        Suite::ClosedForm => closed_form(cfg, out),
        Suite::Potential => potential(cfg, out),
        Suite::Main => main_envelope(cfg, out),
        Suite::Weighted => weighted(cfg, out),
        Suite::DaviesGaffney => davies_gaffney(cfg, out),
        Suite::CrossMethod => cross_method(cfg, out),
        Suite::Counterexample => counterexample(cfg, out),
        Suite::Oracle => oracle_suite(cfg, out),
        Suite::All => Suite::EVERY.iter().try_for_each(|s| run_one(*s, cfg, out)),
    }
}

/// Validate `cfg`, run its suite and assemble the report: checks sorted
/// by name, tolerance overrides applied.
pub fn run(cfg: &RunConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let mut out = Out { checks: Vec::new(), constants: BTreeMap::new() };
    run_one(cfg.suite, cfg, &mut out)?;
    let mut checks: Vec<InequalityCheck> = out
        .checks
        .into_iter()
        .map(|c| match cfg.tolerances.get(&c.name) {
            Some(tol) => c.with_threshold(1.0 + tol),
            None => c,
        })
        .collect();
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(VerificationReport {
        suite: cfg.suite.name().to_string(),
        config_digest: cfg.digest()?,
        checks,
        constants: out.constants,
    })
}
