//! Property tests for ranks, likelihood, acquisitions and proposals.

use popbo::acquisition::{eri, propose_next};
use popbo::poisson::{correct_ranking_probability, TruncatedPoisson};
use popbo::surrogate::{compute_ranks, fit, log_likelihood};
use popbo::{AcquisitionConfig, IntensityModel, ObservationSet, SearchSpace, TrainConfig};
use proptest::prelude::*;

fn points_and_values(max_n: usize, dim: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2..=max_n).prop_flat_map(move |n| {
        (prop::collection::vec(prop::collection::vec(0.0f64..=1.0, dim), n), prop::collection::vec(-100.0f64..100.0, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_follow_permutations((values, perm) in prop::collection::vec(-10i32..10, 1..30)
        .prop_flat_map(|v| { let n = v.len(); (Just(v), Just((0..n).collect::<Vec<usize>>()).prop_shuffle()) })) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let permuted: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
        let ranks = compute_ranks(&values).unwrap();
        let permuted_ranks = compute_ranks(&permuted).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert_eq!(permuted_ranks[j], ranks[i]);
        }
    }

    #[test]
    fn ranks_count_strictly_better_points(values in prop::collection::vec(-5i32..5, 1..30)) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let ranks = compute_ranks(&values).unwrap();
        for (j, &r) in ranks.iter().enumerate() {
            prop_assert_eq!(r, values.iter().filter(|&&v| v < values[j]).count());
            prop_assert!(r < values.len());
        }
    }

    #[test]
    fn likelihood_ignores_monotone_transforms((points, values) in points_and_values(15, 2),
                                              scale in 0.01f64..10.0, shift in -50.0f64..50.0) {
        let m = IntensityModel::<f64>::with_hidden(2, &[8, 8], 3);
        let a = ObservationSet::new(points.clone(), values.clone()).unwrap();
        let t: Vec<f64> = values.iter().map(|v| (scale * v + shift).tanh() * 1e3 + v.cbrt()).collect();
        let b = ObservationSet::new(points, t).unwrap();
        prop_assert_eq!(a.ranks(), b.ranks());
        prop_assert_eq!(log_likelihood(&m, &a, 12).unwrap().to_bits(), log_likelihood(&m, &b, 12).unwrap().to_bits());
    }

    #[test]
    fn fit_never_worsens_full_likelihood((points, values) in points_and_values(20, 2), seed in 0u64..1000) {
        let obs = ObservationSet::new(points, values).unwrap();
        let mut m = IntensityModel::<f64>::with_hidden(2, &[8, 8, 8], seed);
        let cfg = TrainConfig { steps: 20, batch_size: 8, ..Default::default() };
        let report = fit(&mut m, &obs, &cfg).unwrap();
        prop_assert!(report.final_nll <= report.initial_nll);
        let nll = -log_likelihood(&m, &obs, cfg.truncation_switch_n).unwrap();
        prop_assert!((nll - report.final_nll).abs() <= 1e-9 * nll.abs().max(1.0));
    }

    #[test]
    fn eri_never_grows_with_rate(a in 0.0f64..40.0, b in 0.0f64..40.0, n_obs in 5usize..30, k_max in 0usize..6) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(eri(hi, n_obs, k_max).unwrap() <= eri(lo, n_obs, k_max).unwrap() + 1e-12);
    }

    #[test]
    fn ranking_probability_is_monotone(g1 in -3.0f64..3.0, g2 in -3.0f64..3.0, s1 in 0.01f64..3.0, s2 in 0.01f64..3.0) {
        let (glo, ghi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let p = |g, s| correct_ranking_probability(g, s).unwrap();
        prop_assert!(p(glo, 1.0) <= p(ghi, 1.0));
        let (slo, shi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let gap = ghi.abs();
        prop_assert!(p(gap, shi) <= p(gap, slo));
    }

    #[test]
    fn pmf_is_a_pure_function(rate in 0.0f64..100.0, max_rank in 0usize..40) {
        let d = TruncatedPoisson::new(rate, max_rank).unwrap();
        let again = TruncatedPoisson::new(rate, max_rank).unwrap();
        let a: Vec<u64> = d.pmf_vec().iter().map(|p| p.to_bits()).collect();
        let b: Vec<u64> = again.pmf_vec().iter().map(|p| p.to_bits()).collect();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn proposals_stay_in_the_space((points, values) in points_and_values(14, 3),
                                   seed in any::<u64>(), eri_kind in any::<bool>(), q in 0.05f64..1.0) {
        let obs = ObservationSet::new(points.clone(), values).unwrap();
        let mut m = IntensityModel::<f64>::with_hidden(3, &[16, 16], seed);
        fit(&mut m, &obs, &TrainConfig { steps: 10, ..Default::default() }).unwrap();
        let mut cfg = if eri_kind { AcquisitionConfig::eri() } else { AcquisitionConfig::r_lcb() };
        cfg.q = q;
        cfg.k_max = cfg.k_max.min(obs.len());
        cfg.rng_seed = seed;
        cfg.restarts = 3;

        let cont = SearchSpace::Continuous { dim: 3 };
        let x = propose_next(&m, &cont, &obs, &cfg).unwrap();
        prop_assert!(cont.contains(&x));
        prop_assert_eq!(&x, &propose_next(&m, &cont, &obs, &cfg).unwrap());

        let disc = SearchSpace::Discrete { candidates: points };
        let y = propose_next(&m, &disc, &obs, &cfg).unwrap();
        prop_assert!(disc.contains(&y));
    }
}
