//! Property tests for structural invariants: permutation behavior, scaling
//! round trips, reallocation bookkeeping, and estimator bounds.

use proptest::prelude::*;

use reallocate_core::linalg::Matrix;
use reallocate_core::rng::Stream;
use reallocate_core::*;

fn sample_strategy(max_n: usize) -> impl Strategy<Value = Sample> {
    // n in [4, max_n] with at least one exposed and one unexposed subject.
    (4..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(0u8..2, n - 2),
            prop::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(w, a_mid, y)| {
                let mut a: Vec<f64> = vec![1.0, 0.0];
                a.extend(a_mid.into_iter().map(f64::from));
                let cov = Matrix::from_rows(w.iter().map(|&v| vec![v]).collect());
                Sample::new(cov, vec!["w".into()], a, y).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn outcome_scaling_roundtrips(y in prop::collection::vec(-1e6f64..1e6, 2..40)) {
        prop_assume!(y.iter().cloned().fold(f64::INFINITY, f64::min)
            < y.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let scale = determine_scale(&y, None).unwrap();
        for &v in &y {
            let round = scale.unscale(scale.scale(v));
            prop_assert!((round - v).abs() <= 1e-12 * v.abs().max(1.0));
            prop_assert!((0.0..=1.0).contains(&scale.scale(v)));
        }
    }

    #[test]
    fn exposure_summary_is_permutation_invariant(s in sample_strategy(24), seed in 0u64..1000) {
        let mut stream = Stream::new(seed);
        let mut perm: Vec<usize> = (0..s.n()).collect();
        // Fisher-Yates with our own stream keeps the test dependency-free.
        for i in (1..perm.len()).rev() {
            let j = (stream.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let sp = s.permute_rows(&perm);
        let a = exposure_summary(&s, &KnSpec::Identity).unwrap();
        let b = exposure_summary(&sp, &KnSpec::Identity).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ers_marginals_reallocate_exactly_s_n(s in sample_strategy(24)) {
        let summary = exposure_summary(&s, &KnSpec::Identity).unwrap();
        for spec in [
            InterventionSpec::CompleteRandomization,
            InterventionSpec::RankTopS { score: "w".into(), direction: Direction::Descending },
            InterventionSpec::RankTopS { score: "w".into(), direction: Direction::Ascending },
        ] {
            let m = marginalize(&spec, &s, &summary).unwrap();
            prop_assert!(m.is_ers);
            prop_assert!(m.is_aers, "ERS implies AERS");
            let total: f64 = m.probs_treat.iter().sum();
            prop_assert!((total - summary.s_n as f64).abs() < 1e-9);
            prop_assert!(check_aers(&m, &summary, 1e-12));
        }
    }

    #[test]
    fn rank_top_s_survives_monotone_transforms(
        s in sample_strategy(24),
        scale_f in 0.1f64..4.0,
        shift in -5.0f64..5.0,
    ) {
        let summary = exposure_summary(&s, &KnSpec::Identity).unwrap();
        let spec = InterventionSpec::RankTopS { score: "w".into(), direction: Direction::Descending };
        let base = marginalize(&spec, &s, &summary).unwrap();

        // Strictly increasing transform: exp(scale * w) + shift.
        let transformed: Vec<Vec<f64>> = (0..s.n())
            .map(|i| vec![(scale_f * s.covariates().get(i, 0)).exp() + shift])
            .collect();
        let st = Sample::new(
            Matrix::from_rows(transformed),
            vec!["w".into()],
            s.exposure().to_vec(),
            s.outcome().to_vec(),
        ).unwrap();
        let m = marginalize(&spec, &st, &summary).unwrap();
        prop_assert_eq!(base.probs_treat, m.probs_treat);
    }

    #[test]
    fn csv_roundtrip_identity(s in sample_strategy(16)) {
        let text = write_sample_csv(&s);
        let schema = CsvSchema {
            covariates: vec!["w".into()],
            exposure: "a".into(),
            outcome: "y".into(),
            group: None,
        };
        let back = &load_sample_str(&text, &schema).unwrap()[0];
        prop_assert_eq!(back.exposure(), s.exposure());
        for i in 0..s.n() {
            prop_assert_eq!(back.outcome()[i].to_bits(), s.outcome()[i].to_bits());
            prop_assert_eq!(
                back.covariates().get(i, 0).to_bits(),
                s.covariates().get(i, 0).to_bits()
            );
        }
    }

    #[test]
    fn msm_fit_is_group_order_invariant(
        psis in prop::collection::vec(-2.0f64..2.0, 5..10),
        perm_seed in 0u64..500,
    ) {
        let effects: Vec<GroupEffect> = psis.iter().enumerate().map(|(i, &p)| GroupEffect {
            group_id: format!("g{i}"),
            psi_hat: p,
            variance: 0.01 + 0.005 * i as f64,
            modifiers: vec![("k".into(), 0.1 + 0.07 * i as f64)],
        }).collect();
        let terms = parse_msm_formula("1 + k").unwrap();
        let base = fit_msm(&effects, &terms, Weighting::InverseVariance).unwrap();

        let mut stream = Stream::new(perm_seed);
        let mut shuffled = effects.clone();
        for i in (1..shuffled.len()).rev() {
            let j = (stream.next_u64() % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        let refit = fit_msm(&shuffled, &terms, Weighting::InverseVariance).unwrap();
        for (a, b) in base.beta.iter().zip(&refit.beta) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tmle_stays_in_outcome_bounds_and_solves_score(s in sample_strategy(20)) {
        let q = ModelSpec::parse("y ~ 1 + w + a", "a", "y").unwrap();
        let g = ModelSpec::parse("a ~ 1 + w", "a", "y").unwrap();
        let options = EstimatorOptions::default();
        for spec in [
            InterventionSpec::AllTreat,
            InterventionSpec::CompleteRandomization,
            InterventionSpec::RankTopS { score: "w".into(), direction: Direction::Descending },
        ] {
            let res = match tmle(&s, &KnSpec::Identity, &spec, &q, &g, &options) {
                Ok(r) => r,
                // Degenerate or separated draws are legitimately rejected.
                Err(_) => continue,
            };
            let lo = s.outcome().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.outcome().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(res.psi >= lo - 1e-9 && res.psi <= hi + 1e-9,
                "psi {} outside [{lo}, {hi}]", res.psi);
            prop_assert!(res.eic_residual <= 1e-8);
        }
    }
}
