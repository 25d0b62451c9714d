use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn sample(user: &str, delays: &[f64]) -> SubcascadeSample {
    SubcascadeSample::new(user, delays.to_vec()).unwrap()
}

fn params(l: f64, k: f64) -> WeibullParams {
    WeibullParams::new(l, k).unwrap()
}

fn draws(p: &WeibullParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            p.survival_inverse(u).unwrap()
        })
        .collect()
}

fn model_with(users: &[(&str, f64, f64)], names: &[&str], beta: &[f64], gamma: &[f64], hyper: Hyperparams) -> NewerModel {
    let users = users
        .iter()
        .map(|(id, l, k)| FittedUser {
            id: id.to_string(),
            params: params(*l, *k),
            n_events: 0,
        })
        .collect();
    NewerModel::from_parts(
        ModelKind::Newer,
        names.iter().map(|s| s.to_string()).collect(),
        hyper,
        beta.to_vec(),
        gamma.to_vec(),
        users,
        OutOfSampleRule::Regress,
        params(1.0, 1.0),
    )
    .unwrap()
}

fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
    let names = (0..rows[0].len()).map(|i| format!("x{i}")).collect();
    FeatureMatrix::new(names, rows).unwrap()
}

#[test]
fn log_likelihood_examples() {
    assert!((user_log_likelihood(&params(1.0, 1.0), &sample("a", &[1.0])) + 1.0).abs() < 1e-15);
    let expected = -2.0 * 2f64.ln() - 3.0;
    assert!((user_log_likelihood(&params(2.0, 1.0), &sample("a", &[2.0, 4.0])) - expected).abs() < 1e-12);
}

#[test]
fn log_likelihood_is_sum_of_log_hazard_times_survival() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let p = params(rng.random_range(0.2..20.0), rng.random_range(0.3..4.0));
        let delays: Vec<f64> = (0..rng.random_range(1..8)).map(|_| rng.random_range(1.0..30.0)).collect();
        let s = sample("u", &delays);
        let oracle: f64 = delays
            .iter()
            .map(|&t| (p.hazard(t).unwrap() * p.survival(t).unwrap()).ln())
            .sum();
        let got = user_log_likelihood(&p, &s);
        assert!((got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{got} vs {oracle}");
    }
}

#[test]
fn reparameterized_likelihood_matches() {
    // With λ' = λ^{-k}: l = m ln k + (k−1) Σ ln T + m ln λ' − λ' Σ T^k.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let (l, k): (f64, f64) = (rng.random_range(0.5..10.0), rng.random_range(0.4..3.0));
        let delays: Vec<f64> = (0..5).map(|_| rng.random_range(1.0..20.0)).collect();
        let lp = l.powf(-k);
        let m = delays.len() as f64;
        let alt = m * k.ln() + (k - 1.0) * delays.iter().map(|t| t.ln()).sum::<f64>() + m * lp.ln()
            - lp * delays.iter().map(|t| t.powf(k)).sum::<f64>();
        let direct = user_log_likelihood(&params(l, k), &sample("u", &delays));
        assert!((alt - direct).abs() <= 1e-10 * direct.abs().max(1.0));
    }
}

#[test]
fn objective_without_regularization_is_negative_log_likelihood() {
    let samples = vec![sample("a", &[1.0, 2.0]), sample("b", &[3.0, 5.0])];
    let x = matrix(vec![vec![2.0, 3.0], vec![4.0, 1.5]]);
    let model = model_with(&[("a", 1.7, 0.8), ("b", 3.0, 1.4)], &["x0", "x1"], &[0.3, -0.2], &[0.1, 0.5], Hyperparams::unregularized());
    let nll: f64 = -samples
        .iter()
        .zip(model.users())
        .map(|(s, u)| user_log_likelihood(&u.params, s))
        .sum::<f64>();
    assert_eq!(newer_objective(&model, &samples, &x).unwrap(), nll);
}

#[test]
fn objective_at_unit_parameters() {
    let samples = vec![sample("a", &[1.0, 2.0]), sample("b", &[3.0])];
    let x = matrix(vec![vec![2.0], vec![5.0]]);
    let model = model_with(&[("a", 1.0, 1.0), ("b", 1.0, 1.0)], &["x0"], &[0.0], &[0.0], Hyperparams::default());
    // −Σ l_i(1, 1) = Σ T.
    assert!((newer_objective(&model, &samples, &x).unwrap() - 6.0).abs() < 1e-12);
}

#[test]
fn objective_matches_straight_line_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = 3;
        let r = 2;
        let users: Vec<(String, f64, f64)> = (0..n)
            .map(|i| (format!("u{i}"), rng.random_range(0.5..5.0), rng.random_range(0.5..2.5)))
            .collect();
        let delays: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.random_range(1.0..10.0)).collect()).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..r).map(|_| rng.random_range(1.0..50.0)).collect()).collect();
        let beta: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gamma: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hyper = Hyperparams {
            mu: rng.random_range(0.0..20.0),
            eta: rng.random_range(0.0..20.0),
            alpha_beta: rng.random_range(0.0..0.1),
            alpha_gamma: rng.random_range(0.0..0.1),
        };

        // Straight-line evaluation of the formula.
        let mut g1 = 0.0;
        for i in 0..n {
            let (l, k) = (users[i].1, users[i].2);
            for &t in &delays[i] {
                let pdf = (k / l) * (t / l).powf(k - 1.0) * (-(t / l).powf(k)).exp();
                g1 -= pdf.ln();
            }
        }
        let (mut rss_l, mut rss_k) = (0.0, 0.0);
        for i in 0..n {
            let mut zl = 0.0;
            let mut zk = 0.0;
            for j in 0..r {
                zl += rows[i][j].ln() * beta[j];
                zk += rows[i][j].ln() * gamma[j];
            }
            rss_l += (users[i].1.ln() - zl).powi(2);
            rss_k += (users[i].2.ln() - zk).powi(2);
        }
        let l1b: f64 = beta.iter().map(|b| b.abs()).sum();
        let l1g: f64 = gamma.iter().map(|b| b.abs()).sum();
        let oracle = g1
            + hyper.mu * (rss_l / (2.0 * n as f64) + hyper.alpha_beta * l1b)
            + hyper.eta * (rss_k / (2.0 * n as f64) + hyper.alpha_gamma * l1g);

        let refs: Vec<(&str, f64, f64)> = users.iter().map(|(s, l, k)| (s.as_str(), *l, *k)).collect();
        let model = model_with(&refs, &["x0", "x1"], &beta, &gamma, hyper);
        let samples: Vec<_> = users.iter().zip(&delays).map(|(u, d)| sample(&u.0, d)).collect();
        let got = newer_objective(&model, &samples, &matrix(rows)).unwrap();
        assert!((got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{got} vs {oracle}");
    }
}

#[test]
fn objective_rejects_dimension_mismatch() {
    let samples = vec![sample("a", &[1.0, 2.0])];
    let model = model_with(&[("a", 1.0, 1.0)], &["x0"], &[0.0], &[0.0], Hyperparams::default());
    let x = matrix(vec![vec![2.0, 3.0]]);
    assert!(matches!(newer_objective(&model, &samples, &x), Err(Error::Input(_))));
}

#[test]
fn single_user_mle_recovery() {
    let truth = params(2.0, 1.5);
    let s = sample("u", &draws(&truth, 10_000, 42));
    let x = matrix(vec![vec![1.0]]);
    let (model, report) = fit_newer(&[s], &x, Hyperparams::unregularized(), &SolverOptions::default()).unwrap();
    assert!(report.converged, "{:?} {:?}", report.iterations, report.max_gradient);
    let p = model.users()[0].params;
    assert!((p.scale() / 2.0 - 1.0).abs() < 0.05, "{p:?}");
    assert!((p.shape() / 1.5 - 1.0).abs() < 0.05, "{p:?}");
    assert_eq!(model.kind(), ModelKind::PlainWeibull);
}

#[test]
fn defaults_are_documented_values() {
    let h = Hyperparams::default();
    assert_eq!((h.mu, h.eta, h.alpha_beta, h.alpha_gamma), (10.0, 10.0, 6e-5, 8e-6));
    h.validate().unwrap();
    let bad = Hyperparams { mu: -1.0, ..h };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
}

#[test]
fn empty_sample_is_rejected() {
    assert!(matches!(SubcascadeSample::new("ghost", vec![]), Err(Error::Input(m)) if m.contains("ghost")));
}

fn synthetic_problem(n: usize, seed: u64) -> (Vec<SubcascadeSample>, FeatureMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut rows = Vec::new();
    for i in 0..n {
        let row = vec![std::f64::consts::E, rng.random_range(1.0..100.0), rng.random_range(1.0..10.0)];
        let l = (1.5 + 0.4 * row[1].ln() - 0.2 * row[2].ln()).exp();
        let k = (0.1 + 0.1 * row[2].ln()).exp();
        let m = rng.random_range(5..40);
        let d = draws(&params(l, k), m, seed * 1000 + i as u64);
        samples.push(sample(&format!("u{i}"), &d.iter().map(|t| t + 1.0).collect::<Vec<_>>()));
        rows.push(row);
    }
    (samples, matrix(rows))
}

#[test]
fn objective_trace_is_nonincreasing() {
    let (samples, x) = synthetic_problem(60, 5);
    let (_, report) = fit_newer(&samples, &x, Hyperparams::default(), &SolverOptions::default()).unwrap();
    assert!(report.converged, "{report:?}");
    for w in report.objective.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn converged_gradient_matches_finite_differences() {
    let (samples, x) = synthetic_problem(30, 8);
    let (model, report) = fit_newer(&samples, &x, Hyperparams::default(), &SolverOptions::default()).unwrap();
    assert!(report.max_gradient < 1e-4);
    let grads = smooth_gradient(&model, &samples, &x).unwrap();
    let h = 1e-6;
    for (i, (gl, gk)) in grads.iter().enumerate() {
        let bump = |dl: f64, dk: f64| {
            let users: Vec<(String, f64, f64)> = model
                .users()
                .iter()
                .enumerate()
                .map(|(j, u)| {
                    let (l, k) = (u.params.scale(), u.params.shape());
                    if j == i { (u.id.clone(), l + dl, k + dk) } else { (u.id.clone(), l, k) }
                })
                .collect();
            let refs: Vec<(&str, f64, f64)> = users.iter().map(|(s, l, k)| (s.as_str(), *l, *k)).collect();
            let m = model_with(&refs, &["x0", "x1", "x2"], model.beta(), model.gamma(), *model.hyperparams());
            newer_objective(&m, &samples, &x).unwrap()
        };
        let fd_l = (bump(h, 0.0) - bump(-h, 0.0)) / (2.0 * h);
        let fd_k = (bump(0.0, h) - bump(0.0, -h)) / (2.0 * h);
        assert!((gl - fd_l).abs() <= 1e-3 * fd_l.abs().max(0.1), "λ user {i}: {gl} vs {fd_l}");
        assert!((gk - fd_k).abs() <= 1e-3 * fd_k.abs().max(0.1), "k user {i}: {gk} vs {fd_k}");
    }
}

#[test]
fn gradient_matches_finite_differences_away_from_optimum() {
    let (samples, x) = synthetic_problem(5, 9);
    let users: Vec<(String, f64, f64)> = (0..5).map(|i| (format!("u{i}"), 3.0 + i as f64, 0.7 + 0.1 * i as f64)).collect();
    let build = |users: &[(String, f64, f64)]| {
        let refs: Vec<(&str, f64, f64)> = users.iter().map(|(s, l, k)| (s.as_str(), *l, *k)).collect();
        model_with(&refs, &["x0", "x1", "x2"], &[0.5, 0.1, 0.0], &[0.0, 0.05, 0.1], Hyperparams::default())
    };
    let grads = smooth_gradient(&build(&users), &samples, &x).unwrap();
    let h = 1e-6;
    for i in 0..5 {
        for (which, g) in [(0, grads[i].0), (1, grads[i].1)] {
            let at = |d: f64| {
                let mut u = users.clone();
                if which == 0 { u[i].1 += d } else { u[i].2 += d }
                newer_objective(&build(&u), &samples, &x).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-3 * fd.abs(), "user {i} param {which}: {g} vs {fd}");
        }
    }
}

#[test]
fn fit_is_independent_of_thread_count() {
    let (samples, x) = synthetic_problem(40, 12);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit_newer(&samples, &x, Hyperparams::default(), &SolverOptions::default()).unwrap())
    };
    let (m1, r1) = run(1);
    let (m4, r4) = run(4);
    assert_eq!(m1, m4);
    assert_eq!(r1, r4);
}

#[test]
fn fixed_shape_matches_closed_form_baselines() {
    let samples = vec![sample("a", &[1.0, 2.0, 3.0]), sample("b", &[1.0, 1.0]), sample("c", &[2.0, 7.0, 9.0, 4.0])];
    let x = matrix(vec![vec![1.0]; 3]);
    for (kind, k) in [(BaselineKind::Exponential, 1.0), (BaselineKind::Rayleigh, 2.0)] {
        let closed = fit_baseline(kind, &samples, &x, Hyperparams::unregularized(), &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            fixed_shape: Some(k),
            ..SolverOptions::default()
        };
        let (newton, _) = fit_newer(&samples, &x, Hyperparams::unregularized(), &opts).unwrap();
        for (a, b) in closed.users().iter().zip(newton.users()) {
            assert_eq!(a.params.shape(), k);
            assert_eq!(b.params.shape(), k);
            assert!((a.params.scale() - b.params.scale()).abs() < 1e-9 * a.params.scale());
        }
    }
}

#[test]
fn closed_form_baseline_examples() {
    let x = matrix(vec![vec![1.0]]);
    let opts = SolverOptions::default();
    let h = Hyperparams::unregularized();
    let exp = fit_baseline(BaselineKind::Exponential, &[sample("a", &[1.0, 2.0, 3.0])], &x, h, &opts).unwrap();
    assert!((exp.users()[0].params.scale() - 2.0).abs() < 1e-12);
    let ray = fit_baseline(BaselineKind::Rayleigh, &[sample("a", &[1.0, 1.0])], &x, h, &opts).unwrap();
    assert!((ray.users()[0].params.scale() - 1.0).abs() < 1e-12);
    assert!(ray.users().iter().all(|u| u.params.shape() == 2.0));
}

#[test]
fn cox_recovers_shared_shape() {
    let k_true = 1.7;
    let samples: Vec<_> = (0..20)
        .map(|i| {
            let p = params(2.0 + i as f64, k_true);
            sample(&format!("u{i}"), &draws(&p, 500, 100 + i))
        })
        .collect();
    let x = matrix(vec![vec![1.0]; 20]);
    let model = fit_baseline(BaselineKind::CoxSharedShape, &samples, &x, Hyperparams::default(), &SolverOptions::default()).unwrap();
    let k = model.users()[0].params.shape();
    assert!(model.users().iter().all(|u| u.params.shape() == k));
    assert!((k / k_true - 1.0).abs() < 0.05, "{k}");
    assert_eq!(model.out_of_sample_rule(), OutOfSampleRule::RegressScale { shape: k });
}

#[test]
fn regression_examples() {
    let m = model_with(&[("a", 1.0, 1.0)], &["x0", "x1"], &[0.0, 0.0], &[0.0, 0.0], Hyperparams::default());
    let p = regress_out_of_sample(&m, &[3.0, 7.0]).unwrap();
    assert_eq!((p.scale(), p.shape()), (1.0, 1.0));
    let m = model_with(&[("a", 1.0, 1.0)], &["x0", "x1"], &[0.4, -2.0], &[1.3, 0.2], Hyperparams::default());
    let p = regress_out_of_sample(&m, &[1.0, 1.0]).unwrap();
    assert_eq!((p.scale(), p.shape()), (1.0, 1.0));
    let p = regress_out_of_sample(&m, &[std::f64::consts::E, 1.0]).unwrap();
    assert!((p.scale() - 0.4f64.exp()).abs() < 1e-12);
    assert!(matches!(regress_out_of_sample(&m, &[0.0, 1.0]), Err(Error::Domain(_))));
}

#[test]
fn strong_regularization_pulls_users_onto_the_regression() {
    let (samples, x) = synthetic_problem(40, 21);
    let hyper = Hyperparams {
        mu: 1e6,
        eta: 1e6,
        alpha_beta: 0.0,
        alpha_gamma: 0.0,
    };
    let (model, _) = fit_newer(&samples, &x, hyper, &SolverOptions::default()).unwrap();
    for (u, row) in model.users().iter().zip(x.rows()) {
        let p = regress_out_of_sample(&model, row).unwrap();
        assert!((p.scale() / u.params.scale() - 1.0).abs() < 0.05);
        assert!((p.shape() / u.params.shape() - 1.0).abs() < 0.05);
    }
}

#[test]
fn model_json_round_trip_is_lossless() {
    let (samples, x) = synthetic_problem(10, 2);
    let (model, _) = fit_newer(&samples, &x, Hyperparams::default(), &SolverOptions::default()).unwrap();
    let back = NewerModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(model, back);
    let v: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
    for key in ["schema_version", "feature_names", "hyperparams", "beta", "gamma", "users"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert!(v["users"][0].get("n_events").is_some());
}

#[test]
fn warm_start_does_not_worsen_the_objective() {
    let (samples, x) = synthetic_problem(30, 17);
    let (cold, report) = fit_newer(&samples, &x, Hyperparams::default(), &SolverOptions::default()).unwrap();
    let init = InitialState {
        lambda: cold.users().iter().map(|u| u.params.scale()).collect(),
        k: cold.users().iter().map(|u| u.params.shape()).collect(),
        beta: cold.beta().to_vec(),
        gamma: cold.gamma().to_vec(),
    };
    let opts = SolverOptions {
        init: Some(init),
        ..SolverOptions::default()
    };
    let (_, warm) = fit_newer(&samples, &x, Hyperparams::default(), &opts).unwrap();
    assert!(warm.objective.last().unwrap() <= &(report.objective.last().unwrap() + 1e-9));
}

#[test]
fn weibull_fit_beats_fixed_shape_fits_on_ks() {
    let truth = params(5.0, 0.6);
    let s = sample("u", &draws(&truth, 3000, 77));
    let x = matrix(vec![vec![1.0]]);
    let h = Hyperparams::unregularized();
    let opts = SolverOptions::default();
    let ks = |kind| {
        let m = fit_baseline(kind, std::slice::from_ref(&s), &x, h, &opts).unwrap();
        crate::survival::ks_statistic(&m.users()[0].params, &s.empirical()).unwrap()
    };
    let wbl = ks(BaselineKind::PlainWeibull);
    assert!(wbl < ks(BaselineKind::Exponential));
    assert!(wbl < ks(BaselineKind::Rayleigh));
}

#[test]
fn assemble_training_drops_sparse_users() {
    let samples = [sample("a", &[1.0, 2.0]), sample("b", &[1.0, 2.0, 3.0, 4.0, 5.0])];
    let (kept, rows) = assemble_training(samples.iter(), |_| Some(vec![1.0]), 5).unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].user(), "b");
    assert_eq!(rows, vec![vec![1.0]]);
    assert!(assemble_training(samples.iter(), |_| None, 1).is_err());
}
