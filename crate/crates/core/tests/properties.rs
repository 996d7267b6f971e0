mod common;

use common::{embed_context, gaussian_dataset, random_params, random_program, rel_close};
use mhla_core::certificate::{certify, second_moment};
use mhla_core::features::{
    learn_features, param_distance, param_feature, pair_count, stacked_learn_row, sym_features, sym_index,
};
use mhla_core::learner::{fit_regression, fit_regressor, mse, FitOptions, Formulation};
use mhla_core::model::{round_token, DEFAULT_RANK_TOL};
use mhla_core::numerics::{
    dot, solve_least_squares, svd, sym_eig_min, Matrix, Ridge, RngStream,
};
use mhla_core::program::{compile, interpret_raw};
use mhla_core::tasks::{
    assoc_ground_truth, dfa_execute, dfa_random, dfa_sequence, gen_assoc, gen_random_mhla, parse_history,
    DfaTokenSchema,
};
use mhla_core::{Dataset, MhlaParams, SequenceSample};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

// numerics

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn svd_round_trip(rows in 1usize..=20, cols in 1usize..=20, seed in any::<u64>()) {
        let m = RngStream::new(seed).normal_matrix(rows, cols, 1.0);
        let r = svd(&m).unwrap();
        let err = r.reconstruct().sub(&m).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-7 * m.frobenius_norm(), "err {err}");
        prop_assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn least_squares_is_optimal(rows in 1usize..=8, cols in 1usize..=6, ridge in prop_oneof![Just(0.0), 1e-6..1.0], seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let design = rng.normal_matrix(rows, cols, 1.0);
        let targets = rng.normal_vec(rows, 1.0);
        let w = solve_least_squares(&design, &targets, ridge).unwrap();
        let objective = |w: &[f64]| {
            let pred = design.matvec(w).unwrap();
            pred.iter().zip(&targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() + ridge * dot(w, w)
        };
        let base = objective(&w);
        for i in 0..cols {
            for delta in [1e-4, -1e-4] {
                let mut p = w.clone();
                p[i] += delta;
                prop_assert!(objective(&p) >= base - 1e-12, "coordinate {i}");
            }
        }
    }

    #[test]
    fn eig_min_shifts_with_identity(n in 1usize..=12, c in -10.0f64..10.0, seed in any::<u64>()) {
        let b = RngStream::new(seed).normal_matrix(n, n, 1.0);
        let a = b.add(&b.transpose()).unwrap();
        let shifted = a.add(&Matrix::identity(n).scaled(c)).unwrap();
        let diff = sym_eig_min(&shifted).unwrap() - sym_eig_min(&a).unwrap() - c;
        prop_assert!(diff.abs() <= 1e-9 * (1.0 + c.abs() + a.frobenius_norm()));
    }
}

// model

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn forward_is_cubic(d in 1usize..=4, n in 1usize..=8, heads in 1usize..=3, c in -3.0f64..3.0, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let p = random_params(d, heads, &mut rng);
        let z = rng.normal_matrix(d, n, 1.0);
        let a = p.forward_last(&z.scaled(c)).unwrap();
        let b: Vec<f64> = p.forward_last(&z).unwrap().iter().map(|x| x * c.powi(3)).collect();
        prop_assert!(rel_close(&a, &b, 1e-9));
    }

    #[test]
    fn head_order_and_rebalancing_do_not_matter(d in 1usize..=4, n in 1usize..=6, heads in 2usize..=4, c in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let p = random_params(d, heads, &mut rng);
        let z = rng.normal_matrix(d, n, 1.0);
        let base = p.forward_last(&z).unwrap();
        let mut reversed = p.heads().to_vec();
        reversed.reverse();
        let r = MhlaParams::new(d, reversed).unwrap();
        prop_assert!(rel_close(&base, &r.forward_last(&z).unwrap(), 1e-9));
        let sign = if rng.bernoulli(0.5) { -1.0 } else { 1.0 };
        let s = p.rebalanced(rng.below(heads), sign * c).unwrap();
        prop_assert!(rel_close(&base, &s.forward_last(&z).unwrap(), 1e-9));
    }

    #[test]
    fn heads_add(d in 1usize..=4, n in 1usize..=6, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let a = random_params(d, 2, &mut rng);
        let b = random_params(d, 1, &mut rng);
        let z = rng.normal_matrix(d, n, 1.0);
        let sum: Vec<f64> = a.forward_last(&z).unwrap().iter().zip(b.forward_last(&z).unwrap()).map(|(x, y)| x + y).collect();
        prop_assert!(rel_close(&a.concat(&b).unwrap().forward_last(&z).unwrap(), &sum, 1e-9));
    }

    #[test]
    fn fold_of_flatten_is_the_same_function(d in 1usize..=4, heads in 1usize..=5, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let p = random_params(d, heads, &mut rng);
        let folded = MhlaParams::fold_regressor(&p.flatten(), DEFAULT_RANK_TOL).unwrap();
        prop_assert!(folded.head_count() <= d * d);
        for _ in 0..100 {
            let n = rng.range_inclusive(1, 6);
            let z = rng.normal_matrix(d, n, 1.0);
            prop_assert!(rel_close(&p.forward_last(&z).unwrap(), &folded.forward_last(&z).unwrap(), 1e-8));
        }
    }
}

// features

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn linearization_identities(d in 1usize..=4, n in 1usize..=8, heads in 1usize..=3, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let p = random_params(d, heads, &mut rng);
        let z = rng.normal_matrix(d, n, 1.0);
        let y = p.forward_last(&z).unwrap();
        let via_h = param_feature(&p).matvec(&sym_features(&z)).unwrap();
        prop_assert!(rel_close(&y, &via_h, 1e-9));
        let t = p.flatten();
        let via_x: Vec<f64> = (0..d).map(|a| dot(t.as_slice(), &stacked_learn_row(&z, a))).collect();
        prop_assert!(rel_close(&y, &via_x, 1e-9));
    }

    #[test]
    fn symmetric_features_fold_learn_features(d in 1usize..=4, n in 1usize..=6, seed in any::<u64>()) {
        let z = RngStream::new(seed).normal_matrix(d, n, 1.0);
        let x = learn_features(&z);
        let h = sym_features(&z);
        for j in 0..d {
            for k in j..d {
                for l in 0..d {
                    let expected = if j == k { x[(j, j * d + l)] } else { x[(j, k * d + l)] + x[(k, j * d + l)] };
                    let got = h[sym_index(j, k, l, d)];
                    // pair entries of ℋ count ⟨z_j,z_k⟩ once, 𝒳 carries it in both rows
                    let got = if j == k { got } else { 2.0 * got };
                    prop_assert_eq!(got, expected);
                }
            }
        }
        prop_assert_eq!(h.len(), pair_count(d) * d + d * d);
    }

    #[test]
    fn param_distance_is_a_pseudometric(d in 1usize..=3, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let (a, b, c) = (random_params(d, 1, &mut rng), random_params(d, 2, &mut rng), random_params(d, 1, &mut rng));
        let ab = param_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, param_distance(&b, &a).unwrap());
        prop_assert!(ab <= param_distance(&a, &c).unwrap() + param_distance(&c, &b).unwrap() + 1e-12);
        prop_assert_eq!(param_distance(&a, &a).unwrap(), 0.0);
        // rebalanced parameters are the same point
        prop_assert!(param_distance(&b, &b.rebalanced(1, 3.0).unwrap()).unwrap() <= 1e-9 * (1.0 + param_feature(&b).frobenius_norm()));
    }
}

// learner

fn noisy_dataset(d: usize, samples: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed);
    Dataset::new(
        (0..samples)
            .map(|_| {
                let n = rng.range_inclusive(1, 5);
                SequenceSample::new(rng.normal_matrix(d, n, 1.0), rng.normal_vec(d, 1.0)).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn regression_dominates_explicit_params(d in 1usize..=2, heads in 1usize..=4, seed in any::<u64>()) {
        let data = noisy_dataset(d, 60, seed);
        let report = fit_regression(&data, &FitOptions::exact_ols()).unwrap();
        let mut rng = RngStream::new(seed ^ 0x5eed);
        for _ in 0..5 {
            let theta = random_params(d, heads.min(d * d), &mut rng);
            prop_assert!(report.train_mse <= mse(&theta, &data).unwrap() + 1e-9);
        }
    }

    #[test]
    fn fold_keeps_the_regression_loss(d in 1usize..=3, seed in any::<u64>()) {
        let data = noisy_dataset(d, 80, seed);
        let opts = FitOptions { rank_tol: 0.0, ..FitOptions::default() };
        let fit = fit_regressor(&data, &opts).unwrap();
        let report = fit_regression(&data, &opts).unwrap();
        prop_assert!(report.train_mse - fit.regression_mse <= 1e-9);
        prop_assert!(report.learned.head_count() <= d * d);
    }

    #[test]
    fn regression_is_deterministic(d in 1usize..=3, seed in any::<u64>()) {
        let data = noisy_dataset(d, 50, seed);
        let a = fit_regression(&data, &FitOptions::default()).unwrap();
        let b = fit_regression(&data, &FitOptions::default()).unwrap();
        prop_assert_eq!(a.learned, b.learned);
        prop_assert_eq!(a.train_mse.to_bits(), b.train_mse.to_bits());
        prop_assert_eq!(a.residual_per_sample, b.residual_per_sample);
    }

    #[test]
    fn per_coordinate_equals_stacked(d in 1usize..=2, seed in any::<u64>()) {
        let data = noisy_dataset(d, 40, seed);
        let dd = d * d;
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for s in data.samples() {
            for a in 0..d {
                rows.push(stacked_learn_row(&s.z, a));
                targets.push(s.y[a]);
            }
        }
        let design = Matrix::from_rows(&rows).unwrap();
        let stacked = solve_least_squares(&design, &targets, 0.0).unwrap();
        let opts = FitOptions { ridge: Ridge::Fixed(0.0), formulation: Formulation::Full, ..FitOptions::default() };
        let w = fit_regressor(&data, &opts).unwrap().w;
        let scale = 1.0 + stacked.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for (i, x) in stacked.iter().enumerate() {
            prop_assert!((w.as_slice()[i] - x).abs() <= 1e-9 * scale, "entry {} ({}x{})", i, dd, dd);
        }
    }
}

// certificate

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn second_moment_is_psd(d in 1usize..=3, n in 1usize..=5, samples in 1usize..=30, seed in any::<u64>()) {
        let r = certify(&gaussian_dataset(d, n, samples, seed), None).unwrap();
        prop_assert!(r.lambda_min >= -1e-9 * r.lambda_max);
        prop_assert!(r.rank_estimate <= r.psi);
        prop_assert_eq!(r.identifiable, r.lambda_min > r.threshold_used);
    }

    #[test]
    fn union_averages_second_moments(d in 1usize..=3, na in 1usize..=20, nb in 1usize..=20, seed in any::<u64>()) {
        let a = gaussian_dataset(d, 3, na, seed);
        let b = gaussian_dataset(d, 2, nb, seed.wrapping_add(1));
        let u = second_moment(&a.union(&b).unwrap(), None);
        let (ma, mb) = (second_moment(&a, None), second_moment(&b, None));
        let total = (na + nb) as f64;
        let avg = ma.scaled(na as f64 / total).add(&mb.scaled(nb as f64 / total)).unwrap();
        prop_assert!(u.sub(&avg).unwrap().frobenius_norm() <= 1e-12 * (1.0 + u.frobenius_norm()));
    }

    #[test]
    fn identifiable_data_pins_the_function(d in 1usize..=2, seed in any::<u64>()) {
        let (data, truth) = gen_random_mhla(d, 6, 200, 1, seed).unwrap();
        prop_assume!(certify(&data, None).unwrap().identifiable);
        let a = fit_regression(&data, &FitOptions::exact_ols()).unwrap();
        let b = fit_regression(&data, &FitOptions::default()).unwrap();
        let scale = param_feature(&truth).frobenius_norm();
        prop_assert!(param_distance(&a.learned, &b.learned).unwrap() <= 1e-6 * scale);
    }

    #[test]
    fn scaling_inputs_scales_the_spectrum(d in 1usize..=2, c in 0.5f64..2.0, seed in any::<u64>()) {
        let data = gaussian_dataset(d, 4, 40, seed);
        let scaled = Dataset::new(data.samples().iter().map(|s| SequenceSample::new(s.z.scaled(c), s.y.clone()).unwrap()).collect()).unwrap();
        let (a, b) = (certify(&data, None).unwrap(), certify(&scaled, None).unwrap());
        let c6 = c.powi(6);
        prop_assert!((b.lambda_max - c6 * a.lambda_max).abs() <= 1e-9 * b.lambda_max);
        prop_assert!((b.lambda_min - c6 * a.lambda_min).abs() <= 1e-9 * b.lambda_max);
    }
}

// tasks

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn generators_are_realizable(d in 1usize..=3, heads in 1usize..=3, seed in any::<u64>()) {
        let (data, truth) = gen_random_mhla(d, 5, 30, heads, seed).unwrap();
        prop_assert!(mse(&truth, &data).unwrap() <= 1e-18);
        let assoc = gen_assoc(2, 30, 0.5, seed, false).unwrap();
        prop_assert!(mse(&assoc_ground_truth(2).unwrap(), &assoc).unwrap() <= 1e-18);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>()) {
        let (a, ta) = gen_random_mhla(2, 4, 10, 1, seed).unwrap();
        let (b, tb) = gen_random_mhla(2, 4, 10, 1, seed).unwrap();
        prop_assert_eq!(ta, tb);
        prop_assert_eq!(a.samples(), b.samples());
        let (x, y) = (gen_assoc(2, 10, 0.3, seed, true).unwrap(), gen_assoc(2, 10, 0.3, seed, true).unwrap());
        prop_assert_eq!(x.samples(), y.samples());
    }

    #[test]
    fn dfa_history_matches_execution(states in 1usize..=4, alphabet in 1usize..=4, len in 1usize..=4, seed in any::<u64>()) {
        let spec = dfa_random(states, alphabet, seed).unwrap();
        let mut rng = RngStream::new(seed ^ 1);
        let word: Vec<usize> = (0..len).map(|_| rng.below(alphabet)).collect();
        let base = DfaTokenSchema { states, alphabet, positions: 0 };
        let schema = DfaTokenSchema { positions: base.sequence_len(len), ..base };
        let sample = dfa_sequence(&schema, &spec, &word).unwrap();
        let history = &sample.tokens[sample.prompt_end..sample.history_end];
        prop_assert_eq!(parse_history(&schema, history).unwrap(), dfa_execute(&spec, &word).unwrap());
    }
}

#[test]
fn unitary_assoc_is_rank_deficient() {
    let r = certify(&gen_assoc(2, 2000, 1.0, 3, false).unwrap(), None).unwrap();
    assert!(r.rank_estimate < r.psi, "{r:?}");
    assert!(!r.identifiable);
}

// program

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn compiled_programs_match_the_interpreter(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let (program, tokens) = random_program(&mut rng);
        let params = compile(&program).unwrap();
        prop_assert_eq!(params.head_count(), program.instructions.len());
        let z = embed_context(&program.schema, &tokens);
        let raw = params.forward_last(&z).unwrap();
        let expected = interpret_raw(&program, &tokens).unwrap();
        prop_assert!(raw.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-9));
        prop_assert_eq!(program.schema.decode(&raw), program.schema.decode(&expected));
    }

    #[test]
    fn rounding_survives_positive_scaling(seed in any::<u64>(), c in 0.1f64..10.0) {
        let mut rng = RngStream::new(seed);
        let (program, tokens) = random_program(&mut rng);
        let params = compile(&program).unwrap();
        let heads = params.heads().iter().map(|h| mhla_core::model::Head { v: h.v.scaled(c), q: h.q.scaled(c) }).collect();
        let scaled = MhlaParams::new(params.d(), heads).unwrap();
        let z = embed_context(&program.schema, &tokens);
        let (a, b) = (params.forward_last(&z).unwrap(), scaled.forward_last(&z).unwrap());
        for attr in 0..program.schema.len() {
            let rows = program.schema.rows(attr);
            prop_assert_eq!(round_token(&a[rows.clone()]), round_token(&b[rows]));
        }
    }
}
