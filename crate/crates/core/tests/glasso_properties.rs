mod common;

use common::{max_abs_diff, random_spd};
use ndarray::Array2;
use netsurv::glasso::{self, GlassoConfig};
use netsurv::{preprocess, synthgen};
use proptest::prelude::*;

fn permuted(s: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
    let p = s.nrows();
    Array2::from_shape_fn((p, p), |(i, j)| s[[perm[i], perm[j]]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permutation_equivariance(
        seed in 0u64..10_000,
        p in 3usize..12,
        rho in 0.02f64..0.4,
        shuffle in any::<u64>(),
    ) {
        let s = random_spd(p, 3 * p, seed);
        let mut perm: Vec<usize> = (0..p).collect();
        let mut r = common::rng(shuffle);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let cfg = GlassoConfig { tolerance: 1e-10, ..GlassoConfig::with_rho(rho) };
        let a = glasso::glasso_fit(s.view(), &cfg).unwrap();
        let b = glasso::glasso_fit(permuted(&s, &perm).view(), &cfg).unwrap();
        prop_assert!(a.converged && b.converged);
        prop_assert!(max_abs_diff(&permuted(&a.theta, &perm), &b.theta) <= 1e-8);
    }

    #[test]
    fn objective_never_decreases(seed in 0u64..10_000, p in 2usize..20, rho in 0.01f64..0.5) {
        let s = random_spd(p, 2 * p + 2, seed);
        let (fit, trace) = glasso::glasso_fit_traced(s.view(), &GlassoConfig::with_rho(rho)).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0), "{} then {}", w[0], w[1]);
        }
        prop_assert_eq!(*trace.last().unwrap(), fit.objective_value);
    }

    #[test]
    fn solution_is_symmetric_positive_definite(seed in 0u64..10_000, p in 2usize..15, rho in 0.0f64..0.5) {
        let s = random_spd(p, 3 * p, seed);
        let fit = glasso::glasso_fit(s.view(), &GlassoConfig::with_rho(rho)).unwrap();
        prop_assert!(netsurv::linalg::asymmetry(fit.theta.view()) == 0.0);
        prop_assert!(netsurv::linalg::is_positive_definite(fit.theta.view()));
        prop_assert!(fit.kkt_residual <= 1e-5);
    }
}

#[test]
fn sparsity_is_monotone_in_rho() {
    let eps = GlassoConfig::default().zero_epsilon;
    for seed in 0..20 {
        let p = 8 + seed as usize % 10;
        let theta = synthgen::sample_sparse_precision(p, 0.2, seed).unwrap();
        let expr = synthgen::sample_expression(10 * p, theta.view(), seed).unwrap();
        let s = preprocess::empirical_covariance(&expr).unwrap();
        let mut previous = usize::MAX;
        for rho in [0.02, 0.05, 0.08, 0.1, 0.15, 0.2, 0.3, 0.5] {
            let fit = glasso::glasso_fit(s.view(), &GlassoConfig::with_rho(rho)).unwrap();
            let edges = fit.edge_count(eps);
            assert!(edges <= previous, "seed {seed}: {edges} edges at rho {rho}, {previous} before");
            previous = edges;
        }
    }
}

// Monotone sparsity is not a theorem: on dense precision matrices an entry
// can leave the support and come back as rho grows. Both fits are certified.
#[test]
fn sparsity_can_be_non_monotone_near_rho_zero() {
    let s = random_spd(8, 16, 0);
    let cfg = |rho| GlassoConfig { tolerance: 1e-12, ..GlassoConfig::with_rho(rho) };
    let a = glasso::glasso_fit(s.view(), &cfg(0.01)).unwrap();
    let b = glasso::glasso_fit(s.view(), &cfg(0.03)).unwrap();
    assert!(a.kkt_residual < 1e-10 && b.kkt_residual < 1e-10);
    assert_eq!(a.theta[[0, 4]], 0.0);
    assert!(b.theta[[0, 4]].abs() > 1e-4);
}

#[test]
fn solution_independent_of_covariance_scale_with_scaled_rho() {
    let s = random_spd(10, 40, 3);
    let a = glasso::glasso_fit(s.view(), &GlassoConfig { tolerance: 1e-10, ..GlassoConfig::with_rho(0.1) }).unwrap();
    let b = glasso::glasso_fit((&s * 4.0).view(), &GlassoConfig { tolerance: 1e-10, ..GlassoConfig::with_rho(0.4) })
        .unwrap();
    assert!(max_abs_diff(&a.theta, &(&b.theta * 4.0)) < 1e-7);
}
