mod common;

use netsurv::survstrat::{self, RiskGroup};
use proptest::prelude::*;

fn groups() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>, Vec<bool>)> {
    (2usize..40, 2usize..40).prop_flat_map(|(na, nb)| {
        (
            prop::collection::vec(0.1f64..100.0, na),
            prop::collection::vec(prop::bool::weighted(0.7), na),
            prop::collection::vec(0.1f64..100.0, nb),
            prop::collection::vec(prop::bool::weighted(0.7), nb),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stratification_invariant_under_increasing_maps(pi in prop::collection::vec(-5.0f64..5.0, 4..60), q in 0.1f64..0.9) {
        let mut sorted = pi.clone();
        sorted.sort_by(f64::total_cmp);
        let threshold = sorted[((pi.len() - 1) as f64 * q) as usize];
        prop_assume!(sorted[0] <= threshold && *sorted.last().unwrap() > threshold);
        let a = survstrat::stratify(&pi, threshold).unwrap();
        for f in [|v: f64| v.exp(), |v: f64| 3.0 * v - 1.0, |v: f64| v.powi(3)] {
            let mapped: Vec<f64> = pi.iter().map(|&v| f(v)).collect();
            let b = survstrat::stratify(&mapped, f(threshold)).unwrap();
            prop_assert_eq!(&a.group, &b.group);
        }
    }

    #[test]
    fn km_without_censoring_is_empirical_survival(time in prop::collection::vec(0.0f64..50.0, 1..80)) {
        let event = vec![true; time.len()];
        let curve = survstrat::kaplan_meier(&time, &event).unwrap();
        let n = time.len() as f64;
        for (k, &t) in curve.event_times.iter().enumerate() {
            let empirical = time.iter().filter(|&&v| v > t).count() as f64 / n;
            prop_assert!((curve.survival[k] - empirical).abs() < 1e-12);
            prop_assert!((curve.survival_at(t) - empirical).abs() < 1e-12);
        }
        prop_assert!(curve.survival.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(curve.event_times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn km_is_non_increasing_with_censoring((ta, ea, _, _) in groups()) {
        let curve = survstrat::kaplan_meier(&ta, &ea).unwrap();
        prop_assert!(curve.survival.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(curve.survival.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn logrank_invariant_to_time_shift((ta, ea, tb, eb) in groups(), shift in 0.0f64..1000.0) {
        prop_assume!(ea.iter().chain(&eb).any(|&e| e));
        let a = survstrat::logrank(&ta, &ea, &tb, &eb).unwrap();
        let sa: Vec<f64> = ta.iter().map(|t| t + shift).collect();
        let sb: Vec<f64> = tb.iter().map(|t| t + shift).collect();
        // the shift must not merge distinct times
        let mut all: Vec<f64> = ta.iter().chain(&tb).copied().collect();
        let mut shifted: Vec<f64> = sa.iter().chain(&sb).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        shifted.sort_by(f64::total_cmp);
        shifted.dedup();
        prop_assume!(all.len() == shifted.len());
        let b = survstrat::logrank(&sa, &ea, &sb, &eb).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-9 * (1.0 + a.statistic));
        prop_assert!((a.p_value - b.p_value).abs() <= 1e-9);
    }

    #[test]
    fn logrank_symmetric_in_groups((ta, ea, tb, eb) in groups()) {
        prop_assume!(ea.iter().chain(&eb).any(|&e| e));
        let a = survstrat::logrank(&ta, &ea, &tb, &eb).unwrap();
        let b = survstrat::logrank(&tb, &eb, &ta, &ea).unwrap();
        prop_assert_eq!(a.statistic, b.statistic);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }
}

#[test]
fn density_split_separates_two_modes() {
    let mut r = common::rng(4);
    use rand::Rng;
    use rand_distr::StandardNormal;
    let pi: Vec<f64> = (0..300)
        .map(|i| {
            let z: f64 = r.sample(StandardNormal);
            if i % 3 == 0 { 4.0 + 0.5 * z } else { 0.5 * z }
        })
        .collect();
    let ids = common::ids("s", pi.len());
    let strat = survstrat::stratify_by_density(&ids, &pi).unwrap();
    assert!(strat.threshold > 1.0 && strat.threshold < 3.0, "{}", strat.threshold);
    assert_eq!(strat.members(RiskGroup::High).len(), 100);
}
