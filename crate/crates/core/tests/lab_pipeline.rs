use std::collections::HashSet;

use cmlab::degrees::{powerlaw_quantile_sequence, Exponents};
use cmlab::graph::critical_p;
use cmlab::lab::{parse_jsonl, run_experiment, ExperimentSpec, ExperimentSummary, Mode};
use cmlab::num::quantile;
use cmlab::rng::mix_seed;

fn small_spec() -> ExperimentSpec {
    let mut s = ExperimentSpec::minimal(3.5, vec![100, 400], 12, 99);
    s.delta_grid = vec![0.5, 1.0, 2.0];
    s
}

#[test]
fn output_is_a_pure_function_of_the_spec() {
    let spec = small_spec();
    let a = run_experiment(&spec).unwrap().jsonl().unwrap();
    let b = run_experiment(&spec).unwrap().jsonl().unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| run_experiment(&spec).unwrap().jsonl().unwrap());
    assert_eq!(a, c);
    assert_eq!(a.lines().count(), 24);
}

#[test]
fn summary_recomputes_from_jsonl() {
    let spec = small_spec();
    let out = run_experiment(&spec).unwrap();
    let records = parse_jsonl(&out.jsonl().unwrap()).unwrap();
    let summary: ExperimentSummary = serde_json::from_str(&out.summary_json().unwrap()).unwrap();
    for per_n in &summary.per_n {
        for stat in &per_n.statistics {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.n == per_n.n)
                .filter_map(|r| r.statistics(&spec.delta_grid).into_iter().find(|(k, _)| *k == stat.name))
                .map(|(_, v)| v)
                .collect();
            assert_eq!(values.len(), stat.count, "{}", stat.name);
            assert_eq!(quantile(&values, 0.1), stat.q10, "{}", stat.name);
            assert_eq!(quantile(&values, 0.5), stat.q50, "{}", stat.name);
            assert_eq!(quantile(&values, 0.9), stat.q90, "{}", stat.name);
        }
    }
}

#[test]
fn rescaled_fields_match_raw_values() {
    let spec = small_spec();
    let exp = Exponents::from_tau(spec.tau, spec.lambda).unwrap();
    let out = run_experiment(&spec).unwrap();
    for r in &out.records {
        assert!(r.rescaling_error(&exp) <= 1e-12, "trial {} n {}", r.trial, r.n);
        for c in &r.components {
            assert!(c.mass.windows(2).all(|w| w[0] <= w[1]));
            assert!(c.diameter as usize + 1 <= c.size);
            assert!(c.radius <= c.diameter);
        }
    }
}

#[test]
fn retained_pairs_follow_the_binomial_mean() {
    let mut spec = ExperimentSpec::minimal(3.5, vec![1000], 200, 5);
    spec.mode = Mode::Percolation;
    spec.component_ranks = vec![1];
    let out = run_experiment(&spec).unwrap();
    let d = powerlaw_quantile_sequence(1000, 3.5, 1.0).unwrap();
    let p = critical_p(&d, &Exponents::from_tau(3.5, 0.0).unwrap()).unwrap();
    let pairs = d.ell() as f64 / 2.0;
    let mean = out.records.iter().map(|r| r.percolation.as_ref().unwrap().retained_pairs as f64).sum::<f64>() / 200.0;
    let sigma = (pairs * p * (1.0 - p) / 200.0).sqrt();
    assert!((mean - p * pairs).abs() <= 3.0 * sigma, "{mean} vs {}", p * pairs);
    assert!(out.records.iter().all(|r| (r.percolation.as_ref().unwrap().p - p).abs() < 1e-15));
}

#[test]
fn trial_seeds_are_distinct() {
    let mut seen = HashSet::new();
    for n in [10u64, 100, 1000, 10_000, 100_000] {
        for t in 0..20_000u64 {
            assert!(seen.insert(mix_seed(7, n, t)));
        }
    }
}

#[test]
fn failures_carry_trial_context() {
    let mut spec = ExperimentSpec::minimal(3.5, vec![10], 1, 0);
    spec.mode = Mode::Percolation;
    let err = run_experiment(&spec).unwrap_err();
    assert!(matches!(err, cmlab::Error::Trial { n: 10, .. }), "{err}");
}
