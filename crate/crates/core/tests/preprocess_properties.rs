mod common;

use std::collections::BTreeSet;

use common::{expression, max_abs_diff, normal_matrix};
use ndarray::Array2;
use netsurv::corpus::{self, ClinicalRecord, ClinicalTable, GliomaLabel, GliomaType, Scheme};
use netsurv::preprocess;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn npn_ignores_increasing_transforms(
        seed in 0u64..10_000,
        n in 5usize..60,
        shift in -5.0f64..5.0,
        scale in 0.1f64..10.0,
    ) {
        let x = normal_matrix(n, 4, seed).mapv(|v| (v * 4.0).round() / 4.0);
        let y = Array2::from_shape_fn((n, 4), |(i, j)| match j {
            0 => x[[i, j]].exp(),
            1 => scale * x[[i, j]] + shift,
            2 => x[[i, j]].powi(3),
            _ => (x[[i, j]] / 3.0).tanh(),
        });
        let a = preprocess::npn_transform(&expression(x)).unwrap();
        let b = preprocess::npn_transform(&expression(y)).unwrap();
        prop_assert!(max_abs_diff(a.values(), b.values()) <= 1e-12);
    }

    #[test]
    fn covariance_is_exactly_symmetric(seed in 0u64..10_000, n in 2usize..40, p in 1usize..12) {
        let s = preprocess::empirical_covariance(&expression(normal_matrix(n, p, seed))).unwrap();
        for i in 0..p {
            for j in 0..p {
                prop_assert_eq!(s[[i, j]].to_bits(), s[[j, i]].to_bits());
            }
        }
    }

    #[test]
    fn normality_filter_is_idempotent(seed in 0u64..10_000, n in 8usize..80) {
        // mix of normal, skewed and heavy-tailed columns
        let z = normal_matrix(n, 6, seed);
        let x = Array2::from_shape_fn((n, 6), |(i, j)| match j % 3 {
            0 => z[[i, j]],
            1 => z[[i, j]].exp(),
            _ => z[[i, j]].powi(3),
        });
        let (once, _) = preprocess::filter_normal(&expression(x), 0.05).unwrap();
        if once.n_genes() > 0 {
            let (twice, _) = preprocess::filter_normal(&once, 0.05).unwrap();
            prop_assert_eq!(once.gene_ids(), twice.gene_ids());
        }
    }
}

#[test]
fn jarque_bera_size_under_the_null() {
    let reps = 2000;
    let x = normal_matrix(500, reps, 77);
    let rejected = (0..reps)
        .filter(|&j| preprocess::jarque_bera(&x.column(j).to_vec()).unwrap().1 < 0.05)
        .count();
    let rate = rejected as f64 / reps as f64;
    // the chi-square(2) approximation is slightly conservative at n = 500
    assert!((0.025..=0.07).contains(&rate), "rejection rate {rate}");
}

#[test]
fn jarque_bera_detects_skew() {
    let x = normal_matrix(500, 50, 78).mapv(f64::exp);
    for j in 0..50 {
        assert!(preprocess::jarque_bera(&x.column(j).to_vec()).unwrap().1 < 1e-6);
    }
}

fn clinical(labels: &[(GliomaLabel, GliomaLabel)]) -> ClinicalTable {
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| ClinicalRecord {
            sample_id: format!("s{i:03}"),
            time: 10.0 + i as f64,
            event: i % 2 == 0,
            label_2016: a,
            label_2021: b,
        })
        .collect();
    ClinicalTable::new(records).unwrap()
}

fn label_strategy() -> impl Strategy<Value = GliomaLabel> {
    prop_oneof![
        Just(GliomaLabel::Astro),
        Just(GliomaLabel::Oligo),
        Just(GliomaLabel::Gbm),
        Just(GliomaLabel::Unknown),
    ]
}

proptest! {
    #[test]
    fn type_cohorts_partition_labeled_samples(
        labels in prop::collection::vec((label_strategy(), label_strategy()), 12..40),
    ) {
        let clin = clinical(&labels);
        let expr = expression(normal_matrix(labels.len(), 3, 5));
        for scheme in Scheme::ALL {
            let mut seen = BTreeSet::new();
            let mut total = 0;
            for t in GliomaType::TYPES {
                let Ok(cohort) = corpus::build_cohort(&expr, &clin, scheme, t) else { continue };
                let again = corpus::build_cohort(&expr, &clin, scheme, t).unwrap();
                prop_assert_eq!(cohort.expression.sample_ids(), again.expression.sample_ids());
                for s in cohort.expression.sample_ids() {
                    prop_assert!(seen.insert(s.clone()), "{} in two cohorts", s);
                }
                total += cohort.n_samples();
            }
            let labeled: Vec<&String> = clin
                .records()
                .iter()
                .filter(|r| r.label(scheme) != GliomaLabel::Unknown)
                .map(|r| &r.sample_id)
                .collect();
            prop_assert!(total <= labeled.len());
            prop_assert!(seen.iter().all(|s| labeled.contains(&s)));
        }
    }
}
