use super::*;
use crate::features::extract_subcascades;
use crate::fit::{fit_baseline, BaselineKind, FeatureMatrix, Hyperparams, SolverOptions, SubcascadeSample};

fn small(nodes: usize) -> SimConfig {
    SimConfig {
        nodes,
        history_cascades: 100,
        cascades: 100,
        ..SimConfig::default()
    }
}

#[test]
fn single_node_network() {
    let net = gen_network(&small(1)).unwrap();
    assert_eq!(net.node_count(), 1);
    assert_eq!(net.edge_count(), 0);
}

#[test]
fn network_is_deterministic_per_seed() {
    let a = gen_network(&small(300)).unwrap();
    let b = gen_network(&small(300)).unwrap();
    assert_eq!(a, b);
    let c = gen_network(&SimConfig { seed: 2, ..small(300) }).unwrap();
    assert_ne!(a.edges().collect::<Vec<_>>(), c.edges().collect::<Vec<_>>());
}

#[test]
fn infeasible_degrees_are_config_errors() {
    let bad = SimConfig {
        min_degree: 20,
        max_degree: 10,
        ..small(100)
    };
    assert!(matches!(gen_network(&bad), Err(Error::Config(_))));
    let bad = SimConfig {
        min_degree: 10,
        ..small(5)
    };
    assert!(matches!(gen_network(&bad), Err(Error::Config(_))));
    let bad = SimConfig {
        degree_exponent: 1.0,
        ..small(5)
    };
    assert!(matches!(gen_network(&bad), Err(Error::Config(_))));
}

/// Hill estimate of the density exponent from the `k` largest values.
fn hill_density_exponent(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let threshold = v[k];
    let mean_log: f64 = v[..k].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    1.0 + 1.0 / mean_log
}

#[test]
fn follower_counts_follow_the_power_law() {
    let cfg = SimConfig {
        nodes: 10_000,
        min_degree: 5,
        max_degree: 10_000,
        ..SimConfig::default()
    };
    let net = gen_network(&cfg).unwrap();
    let degrees: Vec<f64> = (0..net.node_count()).map(|v| net.followers(v).len() as f64).collect();
    let alpha = hill_density_exponent(&degrees, 500);
    assert!((alpha - 2.5).abs() < 0.3, "{alpha}");
}

fn uniform(lambda: f64, k: f64, p: f64) -> SimConfig {
    SimConfig {
        truth: GroundTruth::Uniform { lambda, k },
        retweet: RetweetModel::Constant { p },
        ..small(200)
    }
}

#[test]
fn zero_probability_gives_singletons() {
    let sim = simulate(&uniform(10.0, 1.0, 0.0)).unwrap();
    assert!(sim.cascades.cascades.iter().all(|c| c.size() == 1));
}

#[test]
fn star_delays_are_exponential() {
    let followers: Vec<(String, String)> = (0..100).map(|i| (format!("f{i:03}"), "root".to_string())).collect();
    let net = Network::from_edges(followers, vec![]).unwrap();
    let root = net.index_of("root").unwrap();
    let dynamics = vec![WeibullParams::new(1.0, 1.0).unwrap(); net.node_count()];
    let cfg = SimConfig {
        nodes: net.node_count(),
        retweet: RetweetModel::Constant { p: 1.0 },
        root_selection: RootSelection::ByFollowers,
        ..uniform(1.0, 1.0, 1.0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (events, drawn) = spread(&net, &dynamics, &cfg, root, 0.0, 1.0, &mut rng);
    assert_eq!(events.len(), 101);
    let n = drawn.len() as f64;
    let mean = drawn.iter().map(|d| d.1).sum::<f64>() / n;
    // Exponential(1) has standard deviation 1.
    assert!((mean - 1.0).abs() < 3.0 / n.sqrt(), "{mean}");
}

#[test]
fn cascades_are_valid_trees_and_deterministic() {
    let cfg = small(500);
    let a = simulate(&cfg).unwrap();
    for c in &a.cascades.cascades {
        c.validate().unwrap();
        assert!(c.events.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(c.last_time() - c.start_time() <= cfg.horizon);
    }
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| simulate(&cfg).unwrap());
    assert_eq!(a.cascades, b.cascades);
    assert_eq!(a.truth, b.truth);
}

#[test]
fn extracted_delays_match_drawn_delays() {
    let sim = simulate(&small(400)).unwrap();
    let samples = extract_subcascades(&sim.cascades.cascades).unwrap();
    assert_eq!(samples.len(), sim.cascades.delays.len());
    for (user, drawn) in &sim.cascades.delays {
        let mut expected: Vec<f64> = drawn.iter().map(|d| d + 1.0).collect();
        expected.sort_by(f64::total_cmp);
        let got = samples[user].delays();
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() <= 1e-9 * e.max(1.0), "{g} vs {e}");
        }
    }
}

#[test]
fn pooled_delays_recover_the_dynamics() {
    let truth = WeibullParams::new(40.0, 0.8).unwrap();
    let followers: Vec<(String, String)> = (0..8000).map(|i| (format!("f{i:04}"), "root".to_string())).collect();
    let net = Network::from_edges(followers, vec![]).unwrap();
    let dynamics = vec![truth; net.node_count()];
    let cfg = SimConfig {
        nodes: net.node_count(),
        retweet: RetweetModel::Constant { p: 0.5 },
        root_selection: RootSelection::ByFollowers,
        horizon: 1e12,
        ..uniform(1.0, 1.0, 1.0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, drawn) = spread(&net, &dynamics, &cfg, net.index_of("root").unwrap(), 0.0, 1.0, &mut rng);
    assert!(drawn.len() >= 3000);
    let s = SubcascadeSample::new("root", drawn.iter().map(|d| d.1).collect()).unwrap();
    let x = FeatureMatrix::new(vec!["x".into()], vec![vec![1.0]]).unwrap();
    let m = fit_baseline(BaselineKind::PlainWeibull, &[s], &x, Hyperparams::unregularized(), &SolverOptions::default()).unwrap();
    let p = m.users()[0].params;
    assert!((p.scale() / 40.0 - 1.0).abs() < 0.05, "{p:?}");
    assert!((p.shape() / 0.8 - 1.0).abs() < 0.05, "{p:?}");
}

#[test]
fn regression_truth_follows_the_coefficients() {
    let sim = simulate(&small(300)).unwrap();
    let table = sim.features.as_ref().unwrap();
    let GroundTruth::Regression { beta, .. } = GroundTruth::default_regression() else { unreachable!() };
    for id in table.ids().iter().take(20) {
        let row = table.row(id).unwrap();
        let expected = row.iter().zip(&beta).map(|(x, b)| x.ln() * b).sum::<f64>().exp().clamp(5.0, 1e6);
        assert!((sim.truth[id].scale() - expected).abs() < 1e-9 * expected);
    }
}

#[test]
fn regression_instance_is_seeded() {
    let a = gen_regression_instance(&RegressionConfig::default()).unwrap();
    let b = gen_regression_instance(&RegressionConfig::default()).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.samples.len(), 200);
    assert!(a.features.rows().iter().all(|r| r[0] == std::f64::consts::E));
}

#[test]
fn histogram_counts_sizes() {
    let cs = vec![
        Cascade::new("a", vec![Event::new("x", None, 0.0)]),
        Cascade::new("b", vec![Event::new("y", None, 0.0)]),
        Cascade::new("c", vec![Event::new("x", None, 0.0), Event::new("y", Some("x"), 1.0)]),
    ];
    let h = size_histogram(&cs);
    assert_eq!(h, BTreeMap::from([(1, 2), (2, 1)]));
}
