//! Property tests for structural invariants: field arithmetic, sharing
//! roundtrips, dataset serialization, metric homogeneity, calibration
//! monotonicity, and weight normalization.

use dpfreq::data::Dataset;
use dpfreq::experiment::mse;
use dpfreq::field::FieldSpec;
use dpfreq::mech::calibrate::{calibrate_p_thm1, min_beta_thm1, min_delta_thm1};
use dpfreq::seed::substream;
use dpfreq::seed::StreamTag;
use dpfreq::sharing::{aggregate_shares, reconstruct, reconstruct_parts, share};
use dpfreq::weights::closed_form_weights;
use proptest::collection::vec;
use proptest::prelude::*;

fn rng_for(case_seed: u64) -> rand_chacha::ChaCha8Rng {
    substream(case_seed, StreamTag::Trial, 0, 0)
}

proptest! {
    #[test]
    fn field_ops_stay_reduced_and_invert(n in 1u64..10_000, a in any::<u64>(), b in any::<u64>()) {
        let field = FieldSpec::smallest_prime_above(n).unwrap();
        let q = field.q();
        let (a, b) = (a % q, b % q);
        let sum = field.add(a, b);
        prop_assert!(sum < q);
        prop_assert_eq!(field.sub(sum, b), a);
        prop_assert_eq!(field.add(a, field.neg(a)), 0);
        prop_assert_eq!(field.add(a, b), field.add(b, a));
    }

    #[test]
    fn sharing_roundtrips_and_adds_homomorphically(
        n in 2u64..500,
        m in 2usize..8,
        len in 1usize..8,
        case_seed in any::<u64>(),
    ) {
        let field = FieldSpec::smallest_prime_above(n).unwrap();
        let mut rng = rng_for(case_seed);
        let secret_a = field.uniform_vec(len, &mut rng);
        let secret_b = field.uniform_vec(len, &mut rng);
        let bundle_a = share(&secret_a, m, field, &mut rng).unwrap();
        let bundle_b = share(&secret_b, m, field, &mut rng).unwrap();
        prop_assert_eq!(reconstruct(&bundle_a), secret_a.clone());

        let summed = aggregate_shares(&[bundle_a, bundle_b]).unwrap();
        let parts: Vec<&[u64]> = summed.iter().map(|s| s.as_slice()).collect();
        let total = reconstruct_parts(field, m, &parts).unwrap();
        prop_assert_eq!(total, field.add_vec(&secret_a, &secret_b).unwrap());
    }

    #[test]
    fn dataset_text_roundtrips(
        n_items in 1usize..50,
        raw in vec(0usize..50, 0..40),
    ) {
        let items: Vec<usize> = raw.iter().map(|r| r % n_items + 1).collect();
        let ds = Dataset::new("p", n_items, items).unwrap();
        let back = Dataset::parse(&ds.write()).unwrap();
        prop_assert_eq!(back.n_items(), ds.n_items());
        prop_assert_eq!(back.items(), ds.items());
        if !ds.items().is_empty() {
            let total: f64 = ds.normalized_histogram().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_is_homogeneous_of_degree_two(
        pairs in vec((-1.0f64..1.0, -1.0f64..1.0), 1..12),
        c in -5.0f64..5.0,
    ) {
        let truth: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let est: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let base = mse(&truth, &est).unwrap();
        let scaled = mse(
            &truth.iter().map(|v| c * v).collect::<Vec<_>>(),
            &est.iter().map(|v| c * v).collect::<Vec<_>>(),
        )
        .unwrap();
        prop_assert!((scaled - c * c * base).abs() <= 1e-9 * (1.0 + base));
    }

    #[test]
    fn participation_probability_is_monotone_in_the_budget(
        eps in 0.01f64..8.0,
        bump in 0.01f64..2.0,
    ) {
        let p = calibrate_p_thm1(eps).unwrap();
        prop_assert!(p > 0.0 && p < 1.0);
        prop_assert!(calibrate_p_thm1(eps + bump).unwrap() > p);
    }

    #[test]
    fn delta_floor_inverts_back_to_a_feasible_beta(
        n in 100u64..5000,
        n_items in 2usize..40,
        eps in 0.05f64..2.0,
        beta_scale in 0.1f64..1.0,
    ) {
        let beta = beta_scale / n_items as f64;
        if let Ok(delta) = min_delta_thm1(n, n_items, eps, beta) {
            let needed = min_beta_thm1(n, n_items, eps, delta).unwrap();
            prop_assert!(needed <= beta * (1.0 + 1e-9),
                "floor {} not achievable at beta {}", needed, beta);
        }
    }

    #[test]
    fn closed_form_weights_normalize_and_ignore_scale(
        variances in vec(0.01f64..10.0, 1..8),
        scale in 0.1f64..100.0,
    ) {
        let w = closed_form_weights(&variances).unwrap();
        let total: f64 = w.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(w.weights().iter().all(|&x| x >= 0.0));
        let scaled: Vec<f64> = variances.iter().map(|v| v * scale).collect();
        let ws = closed_form_weights(&scaled).unwrap();
        for (a, b) in w.weights().iter().zip(ws.weights()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
