mod common;

use common::*;
use masga_core::adaptive::{
    check_complexity_condition, estimate_bias, fit_rates, optimal_paths, optimal_paths_raw, run_masga, Serial,
};
use masga_core::estimators::standard_mc_estimate;
use masga_core::{
    AdaptiveConfig, Error, LevelGeometry, LevelSampler, LevelShape, LevelStats, MultiIndex, ReplacementMode,
    TestFunction,
};
use proptest::prelude::*;

fn synthetic(level: MultiIndex, mean: f64, var: f64, cost: f64) -> LevelStats {
    let mut s = LevelStats::new(level, cost);
    let half = (var / 2.0).sqrt();
    s.push(mean - half);
    s.push(mean + half);
    s
}

fn three_levels(v: [f64; 3], c: [f64; 3]) -> Vec<LevelStats> {
    (0..3).map(|i| synthetic(MultiIndex::new(i as u32, 0), 0.0, v[i], c[i])).collect()
}

#[test]
fn allocation_reference_instance() {
    let st = [
        synthetic(MultiIndex::new(0, 0), 0.0, 4.0, 1.0),
        synthetic(MultiIndex::new(1, 0), 0.0, 1.0, 4.0),
    ];
    assert_eq!(optimal_paths(&st, 1.0, 1).unwrap(), vec![8, 2]);
}

#[test]
fn allocation_is_cost_optimal_on_grid() {
    let instances = [
        ([4.0, 1.0, 0.25], [1.0, 4.0, 16.0]),
        ([1.0, 0.5, 0.05], [2.0, 3.0, 11.0]),
        ([9.0, 0.3, 0.2], [1.0, 2.0, 2.0]),
    ];
    for (v, c) in instances {
        let st = three_levels(v, c);
        let eps = 0.25;
        let raw = optimal_paths_raw(&st, eps).unwrap();
        let n = optimal_paths(&st, eps, 1).unwrap();
        let proxy = |n: &[f64]| (0..3).map(|i| v[i] / n[i]).sum::<f64>();
        let cost = |n: &[f64]| (0..3).map(|i| n[i] * c[i]).sum::<f64>();
        let target = eps * eps;
        let rounded: Vec<f64> = n.iter().map(|&k| k as f64).collect();
        assert!(proxy(&rounded) <= target * (1.0 + 1e-12));
        assert!((proxy(&raw) - target).abs() <= 1e-12 * target);
        let mut best = f64::INFINITY;
        let hi: Vec<u64> = raw.iter().map(|r| (3.0 * r).ceil() as u64 + 2).collect();
        for a in 1..=hi[0] {
            for b in 1..=hi[1] {
                for k in 1..=hi[2] {
                    let cand = [a as f64, b as f64, k as f64];
                    if proxy(&cand) <= target * (1.0 + 1e-12) {
                        best = best.min(cost(&cand));
                    }
                }
            }
        }
        let slack: f64 = c.iter().sum();
        assert!(cost(&raw) <= best * (1.0 + 1e-12), "continuous optimum above grid optimum");
        assert!(cost(&rounded) <= best + slack, "{} vs {best}", cost(&rounded));
    }
}

proptest! {
    #[test]
    fn allocation_scales_with_inverse_square_epsilon(
        v in prop::array::uniform3(1e-4f64..10.0), c in prop::array::uniform3(1.0f64..100.0), eps in 0.01f64..1.0,
    ) {
        let st = three_levels(v, c);
        let a = optimal_paths_raw(&st, eps).unwrap();
        let b = optimal_paths_raw(&st, eps / 2.0).unwrap();
        for i in 0..3 {
            prop_assert!((b[i] - 4.0 * a[i]).abs() <= 1e-9 * b[i]);
        }
        let na = optimal_paths(&st, eps, 10).unwrap();
        let nb = optimal_paths(&st, eps / 2.0, 10).unwrap();
        prop_assert!(na.iter().zip(&nb).all(|(x, y)| y >= x));
        prop_assert!(na.iter().all(|&n| n >= 10));
    }

    #[test]
    fn symmetric_instances_allocate_equally(v in 1e-3f64..10.0, c in 1.0f64..50.0, eps in 0.01f64..1.0) {
        let st = three_levels([v; 3], [c; 3]);
        let n = optimal_paths(&st, eps, 1).unwrap();
        prop_assert!(n[0] == n[1] && n[1] == n[2]);
    }

    #[test]
    fn rates_recovered_from_log_linear_stats(
        a1 in 0.3f64..2.0, a2 in 0.3f64..2.0, b1 in 0.5f64..3.0, b2 in 0.5f64..3.0,
    ) {
        let st: Vec<LevelStats> = LevelShape::Full.levels(4).into_iter().map(|l| {
            let (x, y) = (l.ell1 as f64, l.ell2 as f64);
            synthetic(l, (-(a1 * x + a2 * y) * std::f64::consts::LN_2).exp(), (-(b1 * x + b2 * y) * std::f64::consts::LN_2).exp(), 1.0)
        }).collect();
        let r = fit_rates(&st, LevelShape::Full).unwrap();
        prop_assert!((r.alpha[0] - a1).abs() < 1e-9 && (r.alpha[1] - a2).abs() < 1e-9);
        prop_assert!((r.beta[0] - b1).abs() < 1e-9 && (r.beta[1] - b2).abs() < 1e-9);
        prop_assert_eq!(r.gamma, [1.0, 1.0]);
        let ok = check_complexity_condition(&r.alpha, &r.beta, &r.gamma);
        prop_assert_eq!(ok, b1 > 1.0 && b2 > 1.0);
    }

    #[test]
    fn bias_of_geometric_tail(l in 1u32..8, alpha in 0.5f64..2.0) {
        // means r^l with r = 2^-alpha; the tail beyond L sums to mean_L / (2^alpha - 1)
        let r = (-alpha * std::f64::consts::LN_2).exp();
        let st: Vec<LevelStats> = (0..=l).map(|k| synthetic(MultiIndex::new(k, 0), r.powi(k as i32), 1.0, 1.0)).collect();
        let tail: f64 = (l + 1..l + 200).map(|k| r.powi(k as i32)).sum();
        let b = estimate_bias(&st, l, [alpha, f64::NAN], 1.0);
        prop_assert!((b - tail).abs() <= 1e-12 * tail.max(1e-300) + 1e-15);
    }
}

#[test]
fn complexity_condition_reference_cases() {
    assert!(check_complexity_condition(&[1.0, 1.0], &[2.0, 2.0], &[1.0, 1.0]));
    assert!(!check_complexity_condition(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]));
    assert!(!check_complexity_condition(&[1.0, 1.0], &[0.5, 2.0], &[1.0, 1.0]));
}

#[test]
fn ou_run_concentrates_on_base_level_and_matches_mc() {
    let model = ou_model(64, 1.0, 30);
    let g = LevelGeometry::new(2, 0.1, 10).unwrap();
    let f = TestFunction::Coordinate(0);
    let sampler = LevelSampler::new(&model, g, f, 1, vec![0.0]).unwrap();
    let cfg = AdaptiveConfig { epsilon: 0.003, n_pilot: 50, ..AdaptiveConfig::default() };
    let rep = run_masga(&sampler, &cfg, &Serial).unwrap();
    assert!(rep.converged);
    // batch corrections vanish identically; time corrections are small but random
    let base = rep.allocations[0];
    assert_eq!(base.0, MultiIndex::new(0, 0));
    assert!(base.1 > 10 * cfg.n_pilot);
    for (lv, n) in &rep.allocations[1..] {
        assert!(*n < base.1);
        if lv.ell1 >= 1 {
            assert_eq!(*n, cfg.n_pilot, "{lv}");
        }
    }
    let mc = standard_mc_estimate(&f, &model, 4, 0.025, 40, ReplacementMode::Without, &[0.0], 2, 20_000).unwrap();
    let se = (rep.std_error.powi(2) + mc.std_error.powi(2)).sqrt();
    assert!((rep.estimate - mc.estimate).abs() < 3.0 * se, "{} vs {}", rep.estimate, mc.estimate);
}

#[test]
fn large_epsilon_stops_after_pilot() {
    let (model, x0) = logistic_model(500, 3, 31);
    let g = LevelGeometry::new(4, 0.005, 20).unwrap();
    let sampler = LevelSampler::new(&model, g, TestFunction::NormSq, 2, x0).unwrap();
    let cfg = AdaptiveConfig { epsilon: 1.0, n_pilot: 30, ..AdaptiveConfig::default() };
    let rep = run_masga(&sampler, &cfg, &Serial).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.levels_used, cfg.l_init);
    assert!(rep.allocations.iter().all(|a| a.1 == 30));
    assert!(rep.bias_estimate < 0.5);
}

#[test]
fn report_invariants_and_reproducibility() {
    let (model, x0) = logistic_model(500, 3, 32);
    let g = LevelGeometry::new(4, 0.005, 20).unwrap();
    let sampler = LevelSampler::new(&model, g, TestFunction::NormSq, 3, x0).unwrap();
    let mut last_l = 0;
    let mut last_n: Vec<(MultiIndex, u64)> = Vec::new();
    for eps in [0.02, 0.01, 0.005] {
        let cfg = AdaptiveConfig { epsilon: eps, n_pilot: 20, ..AdaptiveConfig::default() };
        let rep = run_masga(&sampler, &cfg, &Serial).unwrap();
        assert_eq!(rep, run_masga(&sampler, &cfg, &Serial).unwrap());
        let nominal: f64 = rep.allocations.iter().map(|(l, n)| *n as f64 * g.cost_per_path(*l)).sum();
        assert_eq!(rep.total_cost, nominal);
        // the counter sees every chain of a cluster, the nominal cost only the finest
        let counted: f64 = rep
            .allocations
            .iter()
            .map(|(l, n)| {
                let chains = 1 + u64::from(l.ell1 > 0) + u64::from(l.ell2 > 0) + u64::from(l.ell1 > 0 && l.ell2 > 0);
                (*n * chains) as f64 * g.cost_per_path(*l)
            })
            .sum();
        assert_eq!(rep.grad_evals as f64, counted);
        assert!(rep.allocations.iter().all(|a| a.1 >= 20));
        if rep.converged {
            assert!(rep.bias_estimate < eps / 2.0);
        }
        assert!(rep.levels_used >= last_l);
        for (lv, n) in &last_n {
            if let Some(now) = rep.allocations.iter().find(|a| a.0 == *lv) {
                assert!(now.1 >= *n, "{lv}: {} < {n}", now.1);
            }
        }
        last_l = rep.levels_used;
        last_n = rep.allocations.clone();
    }
}

#[test]
fn level_cap_reporting() {
    // a far start and a coarse step keep the time corrections large
    let model = ou_model(64, 1.0, 33);
    let g = LevelGeometry::new(8, 0.5, 4).unwrap();
    let sampler = LevelSampler::new(&model, g, TestFunction::Coordinate(0), 4, vec![100.0]).unwrap();
    // s = 8 * 2^L exceeds m = 64 beyond L = 3
    let cfg = AdaptiveConfig { epsilon: 0.01, n_pilot: 20, l_init: 1, l_max: 6, ..AdaptiveConfig::default() };
    let rep = run_masga(&sampler, &cfg, &Serial).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.levels_used, 3);
    let cfg = AdaptiveConfig { l_init: 4, ..cfg };
    assert!(matches!(run_masga(&sampler, &cfg, &Serial), Err(Error::LevelCap { .. })));
}

#[test]
fn invalid_configs_rejected() {
    let bad = [
        AdaptiveConfig { epsilon: 0.0, ..AdaptiveConfig::default() },
        AdaptiveConfig { n_pilot: 1, ..AdaptiveConfig::default() },
        AdaptiveConfig { l_init: 5, l_max: 4, ..AdaptiveConfig::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err());
    }
}
