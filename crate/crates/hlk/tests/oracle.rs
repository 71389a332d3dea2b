use approx::assert_relative_eq;
use hlk::oracle::{self, semigroup_at, weighted_norm, DiscreteSemigroup};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample(seed: u64, n: usize) -> DiscreteSemigroup {
    DiscreteSemigroup::random(&mut ChaCha8Rng::seed_from_u64(seed), n).unwrap()
}

#[test]
fn time_zero_is_the_identity() {
    let s = sample(1, 4);
    let t0 = semigroup_at(&s, 1.0, 0.0).unwrap();
    assert!((t0 - DMatrix::identity(4, 4)).abs().max() <= 1e-15);
}

#[test]
fn identity_has_unit_norm_for_every_pair() {
    let mu = [0.5, 1.0, 2.0];
    let id = DMatrix::identity(3, 3);
    for p in [1.0, 2.0, f64::INFINITY] {
        assert_relative_eq!(weighted_norm(&id, p, p, &mu).unwrap(), 1.0, max_relative = 1e-9);
    }
}

#[test]
fn semigroup_law() {
    let s = sample(3, 5);
    let a = semigroup_at(&s, 1.0, 0.3).unwrap();
    let b = semigroup_at(&s, 1.0, 0.9).unwrap();
    let ab = semigroup_at(&s, 1.0, 1.2).unwrap();
    assert!((&a * &b - &ab).abs().max() <= 1e-12 * ab.abs().max());
}

#[test]
fn oracle_checks_pass_at_small_scale() {
    for c in [
        oracle::check_interpolation(11, 10).unwrap(),
        oracle::check_log_convexity(11, 10).unwrap(),
        oracle::check_pert_ultracon_constant(11, 10).unwrap(),
        oracle::check_miyadera_discrete(11, 10).unwrap(),
        oracle::check_additivity(11, 10).unwrap(),
        oracle::check_domination(11, 10).unwrap(),
        oracle::check_pert_ultracon_adversarial(11, 5, 2).unwrap(),
    ] {
        assert!(c.pass, "{} {}", c.name, c.max_ratio);
        assert!(c.n_points > 0, "{}", c.name);
    }
}

#[test]
fn checks_are_deterministic_in_the_seed() {
    let a = oracle::check_miyadera_discrete(5, 8).unwrap();
    let b = oracle::check_miyadera_discrete(5, 8).unwrap();
    assert_eq!(a.max_ratio.to_bits(), b.max_ratio.to_bits());
    assert_eq!(a.witness, b.witness);
}

#[test]
fn zero_potential_needs_no_growth_allowance() {
    // With V = 0 the L1 norm is bounded by the column-sum rate alone.
    for seed in 0..20 {
        let s = sample(seed, 5);
        let free = DiscreteSemigroup::new(s.mu.clone(), s.a.clone(), vec![0.0; 5]).unwrap();
        let t = semigroup_at(&free, 1.0, 2.0).unwrap();
        let n = weighted_norm(&t, 1.0, 1.0, &free.mu).unwrap();
        let bound = (free.l1_growth_bound() * 2.0).exp();
        assert!(n <= bound * (1.0 + 1e-12), "{n} > {bound}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn more_potential_means_more_kernel(seed in 0u64..1000, n in 2usize..=6, t in 0.05f64..3.0) {
        // V <= 0 entries only: raising the scale can only grow the positive semigroup.
        let s = sample(seed, n);
        let attractive = DiscreteSemigroup::new(s.mu.clone(), s.a.clone(), s.v.iter().map(|v| -v.abs()).collect()).unwrap();
        let lo = semigroup_at(&attractive, 0.5, t).unwrap();
        let hi = semigroup_at(&attractive, 1.0, t).unwrap();
        prop_assert!((hi - lo).min() >= -1e-12);
    }

    #[test]
    fn semigroup_is_positive_and_self_adjoint(seed in 0u64..1000, n in 2usize..=6, t in 0.0f64..5.0) {
        let s = sample(seed, n);
        prop_assert!(s.is_self_adjoint());
        let m = semigroup_at(&s, 1.0, t).unwrap();
        prop_assert!(m.min() >= -1e-14);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (s.mu[i] * m[(i, j)], s.mu[j] * m[(j, i)]);
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }
}
