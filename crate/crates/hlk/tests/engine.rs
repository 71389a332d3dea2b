use hlk::closed_form::raw;
use hlk::engine::*;
use hlk::kernel::relative_sup_distance;
use hlk::potential::{alpha_of, Potential};
use hlk::{Grid1D, KernelMatrix, Method};
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::new(12.0, 400).unwrap()
}

fn well() -> Potential {
    Potential::well(1.0, 1.0, 2.0).unwrap()
}

#[test]
fn crank_nicolson_matches_closed_form() {
    let g = Grid1D::new(12.0, 800).unwrap();
    let cn = crank_nicolson_kernel(&Potential::zero(), 1.0, &g, &SolverConfig::default()).unwrap();
    let exact = KernelMatrix::closed_form(g, 1.0).unwrap();
    // away from the artificial wall at L
    let d = relative_sup_distance(&cn, &exact, 1e-4, 6.0).unwrap();
    assert!(d <= 1e-3, "{d}");
    assert!(cn.error_estimate <= 1e-8);
}

#[test]
fn crank_nicolson_semigroup() {
    let g = grid();
    let v = well();
    let cfg = SolverConfig::default();
    let k1 = crank_nicolson_kernel(&v, 0.5, &g, &cfg).unwrap();
    let k2 = crank_nicolson_kernel(&v, 1.0, &g, &cfg).unwrap();
    let comp = KernelMatrix::from_matrix(g, 1.0, &k1.values * &k1.values * g.h());
    let d = relative_sup_distance(&comp, &k2, 1e-4, 6.0).unwrap();
    assert!(d <= 1e-3, "{d}");
}

#[test]
fn duhamel_agrees_with_crank_nicolson() {
    let g = Grid1D::new(12.0, 800).unwrap();
    let cfg = SolverConfig::default();
    let du = duhamel_kernel(&well(), 0.5, &g, &cfg).unwrap();
    let cn = crank_nicolson_kernel(&well(), 0.5, &g, &cfg).unwrap();
    let d = relative_sup_distance(&du, &cn, 1e-4, 4.0).unwrap();
    assert!(d <= 1e-4, "{d}");
    assert!(du.error_estimate <= 1e-4);
}

#[test]
fn lie_trotter_agrees_with_duhamel() {
    let g = grid();
    let cfg = SolverConfig::default();
    let du = duhamel_kernel(&well(), 0.5, &g, &cfg).unwrap();
    let lt = lie_trotter_kernel(&well(), 0.5, &g, &cfg).unwrap();
    let d = relative_sup_distance(&lt, &du, 1e-4, 4.0).unwrap();
    assert!(d <= 5e-3, "{d}");
}

#[test]
fn lie_trotter_free_is_chapman_kolmogorov() {
    let g = grid();
    let cfg = SolverConfig { dt: 0.05, ..Default::default() };
    let lt = lie_trotter_kernel(&Potential::zero(), 0.5, &g, &cfg).unwrap();
    let exact = KernelMatrix::closed_form(g, 0.5).unwrap();
    let d = relative_sup_distance(&lt, &exact, 1e-4, 6.0).unwrap();
    assert!(d <= 1e-6, "{d}");
}

#[test]
fn lie_trotter_constant_potential_factors_out() {
    let g = Grid1D::new(6.0, 120).unwrap();
    let cfg = SolverConfig { dt: 0.01, ..Default::default() };
    let c = 0.7;
    let flat = Potential::well(c, 0.0, 7.0).unwrap().negated();
    let k0 = lie_trotter_kernel(&Potential::zero(), 0.3, &g, &cfg).unwrap();
    let kc = lie_trotter_kernel(&flat, 0.3, &g, &cfg).unwrap();
    let f = (-c * 0.3f64).exp();
    for (a, b) in kc.values.iter().zip(k0.values.iter()) {
        assert!((a - f * b).abs() <= 1e-12 * k0.max_abs());
    }
}

#[test]
fn repulsive_potential_lowers_the_kernel() {
    let g = grid();
    let cfg = SolverConfig::default();
    let v = well().negated();
    let free = KernelMatrix::closed_form(g, 0.5).unwrap();
    for method in [Method::Duhamel, Method::CrankNicolson, Method::LieTrotter] {
        let k = solve(method, &v, 0.5, &g, &cfg).unwrap();
        let scale = k.max_abs();
        let excess = if method == Method::Duhamel {
            (&k.values - &free.values).max()
        } else {
            // the discretizations carry their own free kernels
            let k0 = solve(method, &Potential::zero(), 0.5, &g, &cfg).unwrap();
            (&k.values - &k0.values).max()
        };
        assert!(excess <= 1e-8 * scale, "{method}: {excess}");
        assert!(k.values.min() >= -1e-8 * scale, "{method}");
    }
}

#[test]
fn domination_chain() {
    let g = grid();
    let cfg = SolverConfig::default();
    let strong = Potential::well(1.0, 1.0, 2.0).unwrap();
    let weak = Potential::well(0.4, 1.0, 2.0).unwrap();
    // -0.4·1 >= -1·1, so K^{weak} <= K^{strong}
    for method in [Method::Duhamel, Method::CrankNicolson] {
        let ks = solve(method, &strong, 1.0, &g, &cfg).unwrap();
        let kw = solve(method, &weak, 1.0, &g, &cfg).unwrap();
        assert!((&kw.values - &ks.values).max() <= 1e-8 * ks.max_abs(), "{method}");
    }
}

#[test]
fn column_mass_bound() {
    let g = grid();
    let v = Potential::well(0.4, 1.0, 2.0).unwrap();
    let alpha = alpha_of(&v, &g);
    assert!(alpha < 1.0);
    let k = crank_nicolson_kernel(&v, 1.0, &g, &SolverConfig::default()).unwrap();
    let bound = 1.0 / (1.0 - alpha);
    for j in 0..g.len() {
        let mass: f64 = k.values.column(j).sum() * g.h();
        assert!(mass <= bound * (1.0 + 1e-6), "{j}: {mass}");
    }
}

#[test]
fn strong_negative_potential_diverges() {
    let g = Grid1D::new(8.0, 160).unwrap();
    let v = Potential::well(40.0, 1.0, 2.0).unwrap();
    let err = duhamel_kernel(&v, 1.0, &g, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, hlk::Error::Divergence { ref history, .. } if history.len() >= 4), "{err:?}");
    assert!(err.is_numeric());
}

#[test]
fn dt_larger_than_t_is_rejected() {
    let cfg = SolverConfig { dt: 0.5, ..Default::default() };
    assert!(crank_nicolson_kernel(&well(), 0.1, &grid(), &cfg).is_err());
    assert!(lie_trotter_kernel(&well(), 0.1, &grid(), &cfg).is_err());
}

#[test]
fn truncation_sweep_cases() {
    let g = Grid1D::new(8.0, 160).unwrap();
    let cfg = SolverConfig::default();
    let v = Potential::well(1.0, 1.0, 2.0).unwrap();
    let beyond = truncation_sweep(&v, 0.5, &g, &[2.0, 3.0], &cfg).unwrap();
    assert!(beyond.iter().all(|&(_, d)| d == 0.0), "{beyond:?}");

    let zero = truncation_sweep(&v, 0.5, &g, &[0.0], &cfg).unwrap();
    let k = duhamel_kernel(&v, 0.5, &g, &cfg).unwrap();
    let free = KernelMatrix::closed_form(g, 0.5).unwrap();
    assert_eq!(zero[0].1, (&free.values - &k.values).amax());

    // -x^{-1/2}, tabulated on a fine mesh, truncated at growing levels
    let pts: Vec<(f64, f64)> = (1..=400).map(|i| {
        let x = i as f64 * 0.005;
        (x, -0.3 / x.sqrt())
    })
    .chain([(2.0 + 1e-9, 0.0), (8.0, 0.0)])
    .collect();
    let singular = Potential::table(pts).unwrap();
    let sweep = truncation_sweep(&singular, 0.5, &g, &[0.5, 1.0, 2.0, 4.0], &cfg).unwrap();
    for w in sweep.windows(2) {
        assert!(w[1].1 <= w[0].1, "{sweep:?}");
    }
    assert!(truncation_sweep(&v, 0.5, &g, &[2.0, 1.0], &cfg).is_err());
}

fn mc(paths: usize, dt: f64) -> MCConfig {
    MCConfig { paths, dt, seed: 7, antithetic: true }
}

/// Three standard errors, with a binomial floor for estimators whose sample
/// variance degenerates (every path survives).
fn within(mean: f64, se: f64, exact: f64, paths: usize) -> bool {
    let floor = (exact * (1.0 - exact)).abs().sqrt() / (paths as f64).sqrt();
    (mean - exact).abs() <= 3.0 * se.max(floor)
}

#[test]
fn monte_carlo_survival() {
    for x in [2.0, 0.5] {
        let (mean, se) = feynman_kac_estimate(&Potential::zero(), 0.1, x, |_| 1.0, &mc(20_000, 1e-3)).unwrap();
        let exact = libm::erf(x / (4.0f64 * 0.1).sqrt());
        assert!(within(mean, se, exact, 20_000), "x={x}: {mean} ± {se} vs {exact}");
    }
}

#[test]
fn monte_carlo_indicator() {
    let (x, t) = (1.2, 0.3);
    let f = |y: f64| if (1.0..=2.0).contains(&y) { 1.0 } else { 0.0 };
    let (mean, se) = feynman_kac_estimate(&Potential::zero(), t, x, f, &mc(20_000, 1e-2)).unwrap();
    let exact = raw::dirichlet_mass(t, x, 1.0, 2.0);
    assert!(within(mean, se, exact, 20_000), "{mean} ± {se} vs {exact}");
}

#[test]
fn monte_carlo_matches_duhamel() {
    let g = grid();
    let (t, i) = (0.5, 49);
    let x = g.points()[i];
    let bump = |y: f64| (-(y - 1.5) * (y - 1.5) / 0.2).exp();
    let k = duhamel_kernel(&well(), t, &g, &SolverConfig::default()).unwrap();
    let quad: f64 = g.points().iter().enumerate().map(|(j, &y)| g.h() * k.values[(i, j)] * bump(y)).sum();
    let (mean, se) = feynman_kac_estimate(&well(), t, x, bump, &mc(20_000, 1e-3)).unwrap();
    assert!((mean - quad).abs() <= 3.0 * se, "{mean} ± {se} vs {quad}");
}

#[test]
fn monte_carlo_is_reproducible_across_thread_counts() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| feynman_kac_estimate(&well(), 0.2, 1.0, |y| y.min(3.0), &mc(2_000, 1e-2)).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, run(1));
}

#[test]
fn monte_carlo_zero_payoff() {
    let (m, s) = feynman_kac_estimate(&well(), 0.2, 1.0, |_| 0.0, &mc(500, 1e-2)).unwrap();
    assert_eq!((m, s), (0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solvers_are_positive_and_symmetric(s in 0.05f64..0.8, a in 0.2f64..2.0, w in 0.2f64..1.5, t in 0.05f64..1.0, repulsive: bool) {
        let g = Grid1D::new(6.0, 80).unwrap();
        let mut v = Potential::well(s, a, a + w).unwrap();
        if repulsive {
            v = v.negated();
        }
        let cfg = SolverConfig { dt: (t / 50.0).min(1e-2), time_quadrature_nodes: 16, ..Default::default() };
        for method in [Method::Duhamel, Method::CrankNicolson, Method::LieTrotter] {
            let k = solve(method, &v, t, &g, &cfg).unwrap();
            let scale = k.max_abs();
            prop_assert!(k.values.iter().all(|x| x.is_finite()));
            prop_assert!(k.values.min() >= -1e-8 * scale, "{method}: {}", k.values.min());
            prop_assert!(k.asymmetry() <= 1e-8);
        }
    }
}
