mod common;

use ndarray::Array2;
use netsurv::coxlasso::{self, CoxConfig, PathConfig};
use netsurv::synthgen;
use proptest::prelude::*;

fn cohort(n: usize, p: usize, censor: f64, seed: u64) -> (Array2<f64>, Vec<f64>, Vec<bool>) {
    let x = common::normal_matrix(n, p, seed);
    let beta: Vec<f64> = (0..p).map(|j| if j < 3 { 0.6 - 0.4 * j as f64 } else { 0.0 }).collect();
    let (time, event) = synthgen::sample_survival(x.view(), &beta, 0.1, censor, seed).unwrap();
    (x, time, event)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn active_set_grows_along_path(seed in 0u64..10_000, censor in 0.0f64..0.5) {
        let (x, time, event) = cohort(120, 12, censor, seed);
        let path = coxlasso::fit_path_with_pmax(x.view(), &time, &event, 12, &PathConfig::default()).unwrap();
        for w in path.fits.windows(2) {
            prop_assert!(w[1].lambda < w[0].lambda);
            // single drops are legitimate lasso behavior
            prop_assert!(w[1].n_nonzero + 1 >= w[0].n_nonzero);
        }
        prop_assert_eq!(path.fits[0].n_nonzero, 0);
    }

    #[test]
    fn unpenalized_fit_maximizes_loglik(seed in 0u64..10_000, censor in 0.0f64..0.5) {
        let (x, time, event) = cohort(100, 5, censor, seed);
        let cfg = CoxConfig::default();
        let full = coxlasso::cox_fit(x.view(), &time, &event, 0.0, &cfg).unwrap();
        let path = coxlasso::fit_path_with_pmax(x.view(), &time, &event, 5, &PathConfig::default()).unwrap();
        for fit in &path.fits {
            prop_assert!(full.partial_loglik >= fit.partial_loglik - 1e-8);
        }
        let ll = coxlasso::partial_loglik(x.view(), &time, &event, &full.beta).unwrap();
        prop_assert!((ll - full.partial_loglik).abs() < 1e-9 * (1.0 + ll.abs()));
    }

    #[test]
    fn column_scaling_rescales_coefficient(seed in 0u64..10_000, j in 0usize..6, c in 0.1f64..10.0) {
        let (x, time, event) = cohort(150, 6, 0.3, seed);
        let mut scaled = x.clone();
        scaled.column_mut(j).mapv_inplace(|v| v * c);
        let cfg = CoxConfig { tolerance: 1e-10, kkt_tolerance: 1e-9, ..CoxConfig::default() };
        let lmax = coxlasso::lambda_max(x.view(), &time, &event).unwrap();
        let a = coxlasso::cox_fit(x.view(), &time, &event, 0.2 * lmax, &cfg).unwrap();
        let b = coxlasso::cox_fit(scaled.view(), &time, &event, 0.2 * lmax, &cfg).unwrap();
        for k in 0..6 {
            let expected = if k == j { a.beta[k] / c } else { a.beta[k] };
            prop_assert_eq!(a.beta[k] == 0.0, b.beta[k] == 0.0);
            prop_assert!((b.beta[k] - expected).abs() < 1e-6 * (1.0 + expected.abs()), "{} vs {}", b.beta[k], expected);
        }
        prop_assert!((a.partial_loglik - b.partial_loglik).abs() < 1e-8 * (1.0 + a.partial_loglik.abs()));
    }
}

#[test]
fn path_fits_satisfy_subgradient_conditions() {
    for seed in 0..5 {
        let (x, time, event) = cohort(200, 20, 0.3, seed);
        let path = coxlasso::fit_path_with_pmax(x.view(), &time, &event, 20, &PathConfig::default()).unwrap();
        for fit in &path.fits {
            let r = coxlasso::subgradient_residual(x.view(), &time, &event, fit).unwrap();
            assert!(r <= 1e-5, "seed {seed}, lambda {}: residual {r}", fit.lambda);
        }
    }
}

#[test]
fn pmax_caps_model_size() {
    let (x, time, event) = cohort(200, 30, 0.2, 3);
    for pmax in [1, 2, 5, 10] {
        let path = coxlasso::fit_path_with_pmax(x.view(), &time, &event, pmax, &PathConfig::default()).unwrap();
        assert!(path.fits.iter().all(|f| f.n_nonzero <= pmax));
        assert!(path.selected().n_nonzero <= pmax);
    }
}
