use faer::Mat;
use proptest::prelude::*;
use shrimp_core::baselines::{
    additive_kernel_matrix, bpdn_solve, elementary_symmetric, threshold_top_s, AdditiveKernel, BpdnOptions, BpdnProblem,
};
use shrimp_core::diagnostics::{coherence, prop1_bounds, spectrum_through_pruning};
use shrimp_core::features::{design, FeatureBank};
use shrimp_core::sampling::{binomial, gaussian_matrix};
use shrimp_core::shrimp::{next_size, schedule, select_winner, TraceRecord};
use shrimp_core::solve::{residual, sym_extreme_eigs};
use shrimp_core::synthetic::TargetFunction;
use shrimp_core::{imp_run, make_dataset, min_norm_lsq, FitProblem, ImpOptions, RngState};

fn random_matrix(seed: u64, rows: usize, cols: usize) -> Mat<f64> {
    gaussian_matrix(&mut RngState::new(seed), rows, cols, 1.0).unwrap()
}

fn random_vec(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = RngState::derive(seed, 99);
    (0..n).map(|_| rng.standard_normal()).collect()
}

fn small_problem(seed: u64, m: usize, n_features: usize) -> (FeatureBank, FitProblem) {
    let data = make_dataset(TargetFunction::F3, m, 3, seed, 0.0).unwrap();
    let mut rng = RngState::derive(seed, 7);
    let bank = FeatureBank::sample(3, 2, n_features, 0.5, &mut rng).unwrap();
    let problem = FitProblem::new(&bank, &data).unwrap();
    (bank, problem)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn min_norm_residual_is_orthogonal_to_columns(seed in 0u64..10_000, m in 1usize..14, k in 1usize..14) {
        let a = random_matrix(seed, m, k);
        let y = random_vec(seed, m);
        let sol = min_norm_lsq(a.as_ref(), &y, None).unwrap();
        let r: Vec<f64> = (0..m).map(|i| y[i] - (0..k).map(|j| a[(i, j)] * sol.coefficients[j]).sum::<f64>()).collect();
        let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt() * (m * k) as f64;
        for j in 0..k {
            let ip: f64 = (0..m).map(|i| a[(i, j)] * r[i]).sum();
            prop_assert!(ip.abs() <= 1e-10 * scale.max(1.0), "column {} has inner product {}", j, ip);
        }
        prop_assert!((sol.residual_norm - r.iter().map(|v| v * v).sum::<f64>().sqrt()).abs() < 1e-9);
    }

    #[test]
    fn min_norm_solution_lies_in_row_space(seed in 0u64..10_000, m in 1usize..8, extra in 1usize..8) {
        let k = m + extra;
        let a = random_matrix(seed, m, k);
        let y = random_vec(seed, m);
        let c = min_norm_lsq(a.as_ref(), &y, None).unwrap().coefficients;
        // Any null-space perturbation must increase the norm.
        let z = random_vec(seed ^ 1, k);
        let proj = min_norm_lsq(a.as_ref(), &(0..m).map(|i| (0..k).map(|j| a[(i, j)] * z[j]).sum()).collect::<Vec<f64>>(), None)
            .unwrap()
            .coefficients;
        let null: Vec<f64> = z.iter().zip(&proj).map(|(a, b)| a - b).collect();
        let base: f64 = c.iter().map(|v| v * v).sum();
        let moved: f64 = c.iter().zip(&null).map(|(a, b)| (a + b) * (a + b)).sum();
        prop_assert!(moved >= base - 1e-9 * base.max(1.0));
    }

    #[test]
    fn removing_columns_never_lowers_residual(seed in 0u64..10_000, m in 2usize..16, k in 2usize..16, drop in 1usize..8) {
        let a = random_matrix(seed, m, k);
        let y = random_vec(seed, m);
        let full = min_norm_lsq(a.as_ref(), &y, None).unwrap().residual_norm;
        let keep = k.saturating_sub(drop).max(1);
        let sub = a.get(.., 0..keep).to_owned();
        let part = min_norm_lsq(sub.as_ref(), &y, None).unwrap().residual_norm;
        prop_assert!(part >= full - 1e-10 * full.max(1.0));
    }

    #[test]
    fn paired_columns_lie_on_unit_circle(seed in 0u64..10_000, d in 1usize..7, n in 1usize..30, m in 1usize..10) {
        let q = 1 + seed as usize % d;
        let mut rng = RngState::new(seed);
        let bank = FeatureBank::sample(d, q, n, 1.0 / q as f64, &mut rng).unwrap();
        let x = gaussian_matrix(&mut rng, m, d, 4.0).unwrap();
        let a = design(&bank, x.as_ref()).unwrap();
        for i in 0..m {
            for j in 0..n {
                let (c, s) = (a.matrix()[(i, j)], a.matrix()[(i, n + j)]);
                prop_assert!((c * c + s * s - 1.0).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn recurrence_equals_subset_enumeration(seed in 0u64..10_000, d in 1usize..13, q_raw in 1usize..13) {
        let q = 1 + (q_raw - 1) % d;
        prop_assume!(binomial(d, q).unwrap() <= 500);
        let mut rng = RngState::new(seed);
        let g: Vec<f64> = (0..d).map(|_| rng.standard_normal().abs()).collect();
        let mut want = 0.0;
        for mask in 0u32..(1 << d) {
            if mask.count_ones() as usize == q {
                want += (0..d).filter(|i| mask >> i & 1 == 1).map(|i| g[i]).product::<f64>();
            }
        }
        let got = elementary_symmetric(&g, q);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn kernel_matrix_is_symmetric_psd(seed in 0u64..10_000, n in 1usize..9, d in 1usize..7) {
        let q = 1 + seed as usize % d;
        let x = random_matrix(seed, n, d);
        let k = additive_kernel_matrix(&AdditiveKernel::normalized(q), x.as_ref(), x.as_ref()).unwrap();
        for i in 0..n {
            prop_assert!((k[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..n {
                prop_assert!((k[(i, j)] - k[(j, i)]).abs() < 1e-14);
            }
        }
        let (_, lo) = sym_extreme_eigs(k.as_ref()).unwrap();
        prop_assert!(lo >= -1e-10);
    }

    #[test]
    fn schedule_tracks_geometric_decay(n0 in 1usize..50_000, p in 0.01f64..0.99) {
        let sizes = schedule(n0, p, None);
        prop_assert_eq!(sizes[0], n0);
        prop_assert_eq!(*sizes.last().unwrap(), 1);
        for w in sizes.windows(2) {
            prop_assert!(w[1] < w[0]);
            prop_assert!((w[1] as f64 - (1.0 - p) * w[0] as f64).abs() <= 1.0);
            prop_assert_eq!(w[1], next_size(w[0], p));
        }
    }

    #[test]
    fn thresholding_keeps_largest_entries(seed in 0u64..10_000, n in 1usize..30, s_raw in 1usize..30) {
        let s = 1 + (s_raw - 1) % n;
        let c = random_vec(seed, n);
        let t = threshold_top_s(&c, s);
        let kept: Vec<usize> = (0..n).filter(|&i| t[i] != 0.0).collect();
        prop_assert!(kept.len() <= s);
        let smallest_kept = kept.iter().map(|&i| c[i].abs()).fold(f64::INFINITY, f64::min);
        for i in 0..n {
            if t[i] == 0.0 {
                prop_assert!(c[i].abs() <= smallest_kept);
            } else {
                prop_assert_eq!(t[i], c[i]);
            }
        }
    }

    #[test]
    fn prop1_bounds_are_monotone(sigma2 in 0.01f64..10.0, factor in 1.01f64..10.0, q in 1usize..20) {
        let a = prop1_bounds(1.0, sigma2, q, 10, 20).unwrap();
        let b = prop1_bounds(1.0, sigma2 * factor, q, 10, 20).unwrap();
        prop_assert!(b.lambda_max_lower < a.lambda_max_lower);
        prop_assert!(b.lambda_min_upper < a.lambda_min_upper);
        let c = prop1_bounds(1.0, sigma2, q + 1, 10, 20).unwrap();
        prop_assert!(c.decay < a.decay);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn imp_trace_is_nested_and_refit(seed in 0u64..1000, p in 0.1f64..0.6) {
        let (_, problem) = small_problem(seed, 30, 20);
        let trace = imp_run(&problem, &ImpOptions::new(p)).unwrap();
        prop_assert_eq!(trace.sizes(), schedule(problem.n_columns(), p, None));
        for w in trace.models.windows(2) {
            prop_assert!(w[1].active.iter().all(|c| w[0].active.contains(c)));
        }
        for model in &trace.models {
            let sub = problem.train.restrict(&model.active).unwrap();
            let fresh = min_norm_lsq(sub.matrix(), &problem.y_train, None).unwrap();
            let r = residual(sub.matrix(), &model.coefficients, &problem.y_train);
            prop_assert!((r - fresh.residual_norm).abs() <= 1e-8 * fresh.residual_norm.max(1.0));
        }
        let w = select_winner(&trace.models);
        prop_assert!(trace.models.iter().all(|m| m.val_mse.is_nan() || trace.models[w].val_mse <= m.val_mse));
    }

    #[test]
    fn runs_are_deterministic(seed in 0u64..1000) {
        let (bank_a, pa) = small_problem(seed, 25, 15);
        let (bank_b, pb) = small_problem(seed, 25, 15);
        prop_assert_eq!(&bank_a, &bank_b);
        let ta = imp_run(&pa, &ImpOptions::new(0.3)).unwrap();
        let tb = imp_run(&pb, &ImpOptions::new(0.3)).unwrap();
        let (ja, jb) = (serde_json::to_string(&ta.to_record()).unwrap(), serde_json::to_string(&tb.to_record()).unwrap());
        prop_assert_eq!(&ja, &jb);
        let back: TraceRecord = serde_json::from_str(&ja).unwrap();
        prop_assert_eq!(back, ta.to_record());
    }

    #[test]
    fn unnormalized_lambda_max_never_grows(seed in 0u64..1000, p in 0.1f64..0.5) {
        let (_, problem) = small_problem(seed, 40, 30);
        let trace = imp_run(&problem, &ImpOptions::new(p)).unwrap();
        let spec = spectrum_through_pruning(&trace, &problem.train).unwrap();
        let top = spec.points[0].raw_lambda_max;
        for w in spec.points.windows(2) {
            prop_assert!(w[1].raw_lambda_max <= w[0].raw_lambda_max + 1e-10 * top);
        }
    }

    #[test]
    fn coherence_shrinks_under_restriction(seed in 0u64..1000, keep in 2usize..20) {
        let (_, problem) = small_problem(seed, 15, 10);
        let full = coherence(&problem.train).unwrap();
        let cols: Vec<usize> = (0..keep.min(problem.n_columns())).collect();
        let part = coherence(&problem.train.restrict(&cols).unwrap()).unwrap();
        prop_assert!(part <= full + 1e-15);
    }

    #[test]
    fn bpdn_combined_residual_settles(seed in 0u64..1000, m in 3usize..8, extra in 2usize..10) {
        let n = m + extra;
        let a = random_matrix(seed, m, n);
        let y = random_vec(seed, m);
        let res = bpdn_solve(&BpdnProblem { a: a.as_ref(), y: &y, eta: 0.05, sparsity: 2 }, &BpdnOptions::default()).unwrap();
        let h = &res.combined_residual;
        for t in 10.min(h.len())..h.len().saturating_sub(1) {
            prop_assert!(h[t + 1] <= h[t] * (1.0 + 1e-9) + 1e-300, "iteration {}: {} > {}", t, h[t + 1], h[t]);
        }
        prop_assert!(res.residual_norm <= 0.05 * (m as f64).sqrt() * (1.0 + 1e-4) + 1e-6);
    }
}

#[test]
fn dataset_split_partitions_samples() {
    let x = Mat::from_fn(20, 2, |i, j| (i * 2 + j) as f64);
    let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let a = shrimp_core::Dataset::split(x.as_ref(), &y, None, 4, 0.0).unwrap();
    let b = shrimp_core::Dataset::split(x.as_ref(), &y, None, 4, 0.0).unwrap();
    assert_eq!(a.y_train, b.y_train);
    assert_eq!(a.y_val.len(), 2);
    let mut all: Vec<f64> = a.y_train.iter().chain(&a.y_val).copied().collect();
    all.sort_by(f64::total_cmp);
    assert_eq!(all, y);
}
