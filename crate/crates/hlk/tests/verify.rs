use approx::assert_relative_eq;
use hlk::closed_form::{dirichlet_kernel, green_function, raw, sandwich_bounds};
use hlk::oracle::OracleConfig;
use hlk::engine::SolverConfig;
use hlk::potential::Potential;
use hlk::suite::CHECK_NAMES;
use hlk::verify::{self, DaviesGaffney, KernelCache};
use hlk::{InequalityCheck, Method, RunConfig, Suite};
use proptest::prelude::*;
use serde_json::json;

const C0: f64 = 0.282_094_791_773_878_14; // (4π)^{-1/2}

fn cache(v: Potential) -> KernelCache {
    let method = if v.is_zero() { Method::ClosedForm } else { Method::Duhamel };
    KernelCache::new(v, method, SolverConfig::default(), 400, 4.0)
}

#[test]
fn sandwich_at_the_unit_point() {
    let k = dirichlet_kernel(1.0, 1.0, 1.0).unwrap();
    let (lower, upper) = sandwich_bounds(1.0, 1.0, 1.0).unwrap();
    assert_relative_eq!(k / upper, 1.0 - (-1.0f64).exp(), max_relative = 1e-14);
    assert_relative_eq!(lower / k, 0.5 / (1.0 - (-1.0f64).exp()), max_relative = 1e-14);
    assert_relative_eq!(lower / k, 0.791_0, epsilon = 1e-4);
}

#[test]
fn sandwich_sweep_is_tight_only_where_expected() {
    let c = verify::check_sandwich(&[0.05, 1.0, 5.0], 200).unwrap();
    assert!(c.pass && c.max_ratio <= 1.0 + 1e-12, "{}", c.max_ratio);
    assert_eq!(c.n_points, 200 * 200 * 3);
}

#[test]
fn stochasticity_examples() {
    for (t, y) in [(0.01, 0.1), (1.0, 1.0), (10.0, 5.0)] {
        let m = verify::stochasticity_integral(t, y, None).unwrap();
        assert!((m - 1.0).abs() <= 1e-6, "t={t} y={y}: {m}");
    }
}

#[test]
fn ultracontractivity_and_scaling() {
    let one = verify::check_weighted_ultracontractivity(&[1.0], 400).unwrap();
    assert!(one.max_ratio <= 1.0, "{}", one.max_ratio);
    // The ratio is invariant under x -> λx, t -> λ²t, and the grids scale with √t.
    let four = verify::check_weighted_ultracontractivity(&[4.0], 400).unwrap();
    assert_relative_eq!(one.max_ratio, four.max_ratio, max_relative = 1e-10);
    assert!(verify::check_weighted_ultracontractivity(&[100.0], 400).unwrap().pass);
}

#[test]
fn green_function_examples() {
    let g = green_function(1.0, 1.0, 2.0).unwrap();
    assert_relative_eq!(g, ((-1.0f64).exp() - (-3.0f64).exp()) / 2.0, max_relative = 1e-14);
    assert_relative_eq!(g, 0.159_046, epsilon = 1e-6);
    // G vanishes linearly at the boundary with slope e^{-y√λ}.
    let x = 1e-7;
    assert_relative_eq!(green_function(1.0, x, 2.0).unwrap() / x, (-2.0f64).exp(), max_relative = 1e-6);
    let lt = verify::laplace_transform(4.0, 0.5, 0.5).unwrap();
    assert_relative_eq!(lt, green_function(4.0, 0.5, 0.5).unwrap(), max_relative = 1e-6);
}

#[test]
fn green_laplace_fixture_passes() {
    let c = verify::check_green_laplace(&verify::GREEN_POINTS).unwrap();
    assert!(c.pass && c.max_ratio <= 1.0 + 1e-6, "{}", c.max_ratio);
}

#[test]
fn free_kernel_is_stochastic_in_the_boundary_weight() {
    let mut c = cache(Potential::zero());
    let b = verify::check_l1_boundary_weighted(&mut c, &[0.1, 1.0], 1e-3).unwrap();
    assert!(b.pass, "{}", b.max_ratio);
    assert!(b.max_ratio >= 1.0 - 1e-3, "{}", b.max_ratio);
}

#[test]
fn l1_bounds_need_small_alpha() {
    // s (b² − a²)/2 = 1.5 is outside the admissible range.
    let mut big = cache(Potential::well(1.0, 1.0, 2.0).unwrap());
    assert!(verify::check_l1_exponential(&mut big, &[0.0], &[0.1], 1e-3).is_err());

    let mut ok = cache(Potential::well(0.4, 1.0, 2.0).unwrap());
    let e = verify::check_l1_exponential(&mut ok, &[-1.0, 1.0], &[0.1], 1e-3).unwrap();
    assert!(e.pass, "{}", e.max_ratio);
}

#[test]
fn repulsive_well_is_contractive() {
    let mut c = cache(Potential::well(0.4, 1.0, 2.0).unwrap().negated());
    let b = verify::check_l1_boundary_weighted(&mut c, &[1.0], 0.0).unwrap();
    assert!(b.max_ratio <= 1.0, "{}", b.max_ratio);
}

#[test]
fn davies_gaffney_fixture() {
    let mut free = cache(Potential::zero());
    let c = verify::check_davies_gaffney(&mut free, DaviesGaffney::default(), &[0.25, 1.0, 4.0], 1e-3).unwrap();
    assert!(c.pass && c.max_ratio < 1.0, "{}", c.max_ratio);

    let mut well = cache(Potential::well(0.4, 1.0, 2.0).unwrap());
    assert!(verify::check_davies_gaffney(&mut well, DaviesGaffney::default(), &[1.0], 1e-3).unwrap().pass);
}

#[test]
fn davies_gaffney_geometry_is_validated() {
    let base = DaviesGaffney::default();
    assert!(base.validate().is_ok());
    assert!(DaviesGaffney { r: 4.5, ..base }.validate().is_err());
    assert!(DaviesGaffney { eps: 0.6, ..base }.validate().is_err());
    assert!(DaviesGaffney { x: 0.4, y: 4.4, ..base }.validate().is_err());
}

#[test]
fn free_constant_is_below_the_gaussian_normalisation() {
    let ts = [0.1, 1.0, 5.0];
    let e = verify::empirical_constant_main(&mut cache(Potential::zero()), &ts).unwrap();
    assert!(e.c <= C0 * (1.0 + 1e-9), "{}", e.c);
    assert!(e.c <= 0.29);
    // Parabolic scaling: the window scales with √t, so fix x_max·t^{-1/2}.
    let mut a = KernelCache::new(Potential::zero(), Method::ClosedForm, SolverConfig::default(), 400, 2.0);
    let mut b = KernelCache::new(Potential::zero(), Method::ClosedForm, SolverConfig::default(), 400, 4.0);
    let ca = verify::empirical_constant_main(&mut a, &[0.25]).unwrap().c;
    let cb = verify::empirical_constant_main(&mut b, &[1.0]).unwrap().c;
    assert_relative_eq!(ca, cb, max_relative = 1e-10);
}

#[test]
fn free_kernel_meets_both_envelopes_at_c0() {
    let ks = cache(Potential::zero()).sweep(&[0.1, 1.0, 5.0], 0.0).unwrap();
    let e = verify::check_exponential_bound(&ks, "free", C0, &[0.0], 4.0, 1e-12).unwrap();
    let b = verify::check_boundary_bound(&ks, "free", C0, 4.0, 1e-12).unwrap();
    assert!(e.pass, "{}", e.max_ratio);
    assert!(b.pass, "{}", b.max_ratio);
}

#[test]
fn counterexample_values() {
    // Frozen from the closed-form kernel at h = 0.05 (sup attained as y -> 0).
    let plus = verify::counterexample_ratio(1.0, 1.0, 10.0).unwrap();
    assert_relative_eq!(plus.ratio, 5.657_337, epsilon = 1e-6);
    let minus = verify::counterexample_ratio(-1.0, 1.0, 10.0).unwrap();
    assert!(minus.ratio <= 1.0 + 1e-3, "{}", minus.ratio);
    let zero = verify::counterexample_ratio(0.0, 1.0, 20.0).unwrap();
    assert_relative_eq!(zero.ratio, 1.0, epsilon = 1e-5);
    // L barely moves the supremum for t = 1: only the truncated tail changes.
    let far = verify::counterexample_ratio(1.0, 1.0, 40.0).unwrap();
    assert_relative_eq!(far.ratio, plus.ratio, max_relative = 1e-6);
}

#[test]
fn witnesses_are_reproducible() {
    let ts = [0.5, 1.0];
    let first = verify::empirical_constant_main(&mut cache(Potential::well(0.4, 1.0, 2.0).unwrap()), &ts).unwrap();
    let again = verify::empirical_constant_main(&mut cache(Potential::well(0.4, 1.0, 2.0).unwrap()), &ts).unwrap();
    assert_eq!(first, again);
    let (t, x, y) = (
        first.witness["t"].as_f64().unwrap(),
        first.witness["x"].as_f64().unwrap(),
        first.witness["y"].as_f64().unwrap(),
    );
    let k = cache(Potential::well(0.4, 1.0, 2.0).unwrap()).get(t, 0.0).unwrap();
    let (i, j) = (k.grid.nearest(x).unwrap(), k.grid.nearest(y).unwrap());
    let r = k.values[(i, j)] / raw::envelope_main(1.0, t, x, y);
    assert_relative_eq!(r, first.c, max_relative = 1e-12);
}

#[test]
fn reported_names_are_known() {
    let mut cfg = RunConfig::default();
    cfg.oracle = OracleConfig { trials: 4, restarts: 4, steps: 2 };
    for suite in [Suite::ClosedForm, Suite::Potential, Suite::Counterexample, Suite::Oracle] {
        cfg.suite = suite;
        let r = hlk::run(&cfg).unwrap();
        assert!(!r.checks.is_empty());
        for c in &r.checks {
            assert!(CHECK_NAMES.contains(&c.name.as_str()), "{}", c.name);
        }
        let names: Vec<_> = r.checks.iter().map(|c| c.name.clone()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }
}

#[test]
fn tolerance_overrides_apply() {
    let mut cfg = RunConfig { suite: Suite::ClosedForm, ..RunConfig::default() };
    // Tighter than the quadrature error of the identity.
    cfg.tolerances.insert("stochasticity".into(), 1e-12);
    let r = hlk::run(&cfg).unwrap();
    let s = r.checks.iter().find(|c| c.name == "stochasticity").unwrap();
    assert_eq!(s.threshold, 1.0 + 1e-12);
    assert!(!s.pass && !r.all_pass());

    cfg.tolerances.insert("stochasticity".into(), -0.5);
    assert!(hlk::run(&cfg).is_err());
    cfg.tolerances.clear();
    cfg.tolerances.insert("no_such_check".into(), 1.0);
    assert!(hlk::run(&cfg).is_err());
}

fn check(max_ratio: f64) -> InequalityCheck {
    InequalityCheck {
        name: "x".into(),
        params: json!({}),
        n_points: 1,
        max_ratio,
        threshold: 1.0,
        pass: true,
        witness: json!(null),
        runtime_ms: 0.0,
    }
}

proptest! {
    #[test]
    fn verdict_is_ratio_against_threshold(r in 0.0f64..3.0, th in 0.0f64..3.0) {
        let c = check(r).with_threshold(th);
        prop_assert_eq!(c.pass, r <= th);
    }

    #[test]
    fn sandwich_holds_pointwise(t in 1e-3f64..50.0, x in 0.0f64..20.0, y in 0.0f64..20.0) {
        let k = dirichlet_kernel(t, x, y).unwrap();
        let (lo, hi) = sandwich_bounds(t, x, y).unwrap();
        prop_assert!(lo <= k * (1.0 + 1e-12) + 1e-300);
        prop_assert!(k <= hi * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn green_is_symmetric_and_positive(l in 0.01f64..20.0, x in 1e-3f64..10.0, y in 1e-3f64..10.0) {
        let a = green_function(l, x, y).unwrap();
        let b = green_function(l, y, x).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
    }
}
