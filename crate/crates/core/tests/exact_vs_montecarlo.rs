//! Cross-checks between the sampling engines and the exact transcript laws
//! computed by the auditor.

use std::collections::BTreeMap;

use privsub_core::audit::{
    exact_em_distribution, exact_subsampled_distribution, DEFAULT_SUPPORT_CAP,
};
use privsub_core::dataset::Dataset;
use privsub_core::heavyhitters::{thresh_monitor, MonitorConfig, MonitorOracle, Stream};
use privsub_core::mechanisms::{run_repeated_em, run_subsampled_em};
use privsub_core::rng::RandomSource;
use privsub_core::submodular::{
    dp_submod_greedy_cardinality, objective_value, CardinalityGreedyOracle, ItemSet, UserFn,
};
use privsub_core::subsample::rate_for_target;
use privsub_core::PrivacyParams;

fn coverage(items: &[usize]) -> UserFn {
    UserFn::Coverage { links: ItemSet::from_items(items.iter().copied()) }
}

fn greedy_instance() -> (Dataset<UserFn>, CardinalityGreedyOracle) {
    let dataset =
        Dataset::from_values(vec![coverage(&[0]), coverage(&[0, 1]), coverage(&[2])]);
    (dataset, CardinalityGreedyOracle { m: 3, k: 2 })
}

#[test]
fn greedy_em_frequencies_match_exact_law() {
    let (dataset, oracle) = greedy_instance();
    let eps0 = std::f64::consts::LN_2;
    let law = exact_em_distribution(&oracle, &dataset, eps0, 1.0, DEFAULT_SUPPORT_CAP).unwrap();
    assert_eq!(law.support_len(), 6);
    assert!((law.total() - 1.0).abs() < 1e-12);

    let mut rng = RandomSource::new(101, 0);
    let trials = 100_000;
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for _ in 0..trials {
        let t = run_repeated_em(&oracle, &dataset, eps0, 1.0, &mut rng).unwrap();
        *counts.entry(t.chosen).or_insert(0) += 1;
    }
    for (outcome, p) in law.iter() {
        let freq = counts.get(outcome).copied().unwrap_or(0) as f64 / trials as f64;
        let stderr = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (freq - p).abs() < 4.0 * stderr,
            "{outcome:?}: freq {freq} vs exact {p}"
        );
    }
}

#[test]
fn subsampled_em_frequencies_match_subset_mixture() {
    let (dataset, oracle) = greedy_instance();
    let epsilon = 0.5;
    let p = rate_for_target(epsilon).unwrap();
    let law = exact_subsampled_distribution(
        |ds| exact_em_distribution(&oracle, ds, std::f64::consts::LN_2, 1.0, DEFAULT_SUPPORT_CAP),
        &dataset,
        p,
        DEFAULT_SUPPORT_CAP,
    )
    .unwrap();
    assert!((law.total() - 1.0).abs() < 1e-12);

    let mut rng = RandomSource::new(102, 0);
    let trials = 100_000;
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for _ in 0..trials {
        let t = run_subsampled_em(&oracle, &dataset, epsilon, 1.0, &mut rng).unwrap();
        *counts.entry(t.chosen).or_insert(0) += 1;
    }
    for (outcome, p) in law.iter() {
        let freq = counts.get(outcome).copied().unwrap_or(0) as f64 / trials as f64;
        let stderr = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (freq - p).abs() < 4.0 * stderr,
            "{outcome:?}: freq {freq} vs exact {p}"
        );
    }
}

#[test]
fn subsampling_at_huge_epsilon_approaches_unsubsampled_law() {
    let (dataset, oracle) = greedy_instance();
    let inner = |ds: &Dataset<UserFn>| {
        exact_em_distribution(&oracle, ds, std::f64::consts::LN_2, 1.0, DEFAULT_SUPPORT_CAP)
    };
    let unsubsampled = inner(&dataset).unwrap();
    let p = rate_for_target(18.0).unwrap();
    let mixed =
        exact_subsampled_distribution(inner, &dataset, p, DEFAULT_SUPPORT_CAP).unwrap();
    let tv: f64 = unsubsampled
        .iter()
        .map(|(k, p)| (p - mixed.prob(k)).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 1e-6, "total variation {tv}");
}

#[test]
fn cardinality_greedy_output_sets_match_enumerated_law() {
    // m=4, k=2, n=3 coverage users: aggregate the exact subsampled
    // transcript law into unordered output sets; the greedy-optimal pair
    // must carry the largest mass, and sampled frequencies must agree.
    let dataset = Dataset::from_values(vec![
        coverage(&[0, 1]),
        coverage(&[0, 2]),
        coverage(&[0, 3]),
    ]);
    let m = 4;
    let k = 2;
    let epsilon = 1.0;
    let oracle = CardinalityGreedyOracle { m, k };
    let p = rate_for_target(epsilon).unwrap();
    let law = exact_subsampled_distribution(
        |ds| exact_em_distribution(&oracle, ds, std::f64::consts::LN_2, 1.0, DEFAULT_SUPPORT_CAP),
        &dataset,
        p,
        DEFAULT_SUPPORT_CAP,
    )
    .unwrap();
    let mut set_mass: BTreeMap<ItemSet, f64> = BTreeMap::new();
    for (transcript, prob) in law.iter() {
        *set_mass
            .entry(ItemSet::from_items(transcript.iter().copied()))
            .or_insert(0.0) += prob;
    }

    // Brute-force optimum (lexicographically smallest maximizer): {0, x}
    // with F = 3 for any x; greedy mass should peak on a set containing 0.
    let (&best_set, &best_mass) = set_mass
        .iter()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    assert!(best_set.contains(0), "peak mass on {best_set:?}");
    let best_value = objective_value(&dataset, best_set);
    let opt = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| ItemSet::from_items([a, b])))
        .map(|s| objective_value(&dataset, s))
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best_value, opt);

    let params = PrivacyParams::new(epsilon, 0.1, 0.2).unwrap();
    let mut rng = RandomSource::new(103, 0);
    let trials = 50_000;
    let mut hits = 0usize;
    for _ in 0..trials {
        if dp_submod_greedy_cardinality(&dataset, m, k, &params, &mut rng).unwrap() == best_set
        {
            hits += 1;
        }
    }
    let freq = hits as f64 / trials as f64;
    let stderr = (best_mass * (1.0 - best_mass) / trials as f64).sqrt();
    assert!(
        (freq - best_mass).abs() < 4.0 * stderr,
        "freq {freq} vs mass {best_mass}"
    );
}

#[test]
fn monitor_report_frequencies_match_exact_at_law() {
    // Two users, two steps, two buckets, k=1: flatten the report log into
    // the (t, y)-ordered transcript and compare against the oracle's law.
    let rows = vec![vec![0u32, 1], vec![0, 0]];
    let stream = Stream::new(2, 2, rows.clone()).unwrap();
    let tau = 1.4;
    let oracle = MonitorOracle { t_len: 2, alphabet: 2, k: 1, tau };
    let dataset = Dataset::from_values(rows);
    let eps0 = std::f64::consts::LN_2;
    let law = privsub_core::audit::exact_at_distribution(
        &oracle,
        &dataset,
        eps0,
        1.0,
        DEFAULT_SUPPORT_CAP,
    )
    .unwrap();

    let mut config = MonitorConfig::new(1, tau).unwrap();
    config.epsilon0 = eps0;
    let trials = 60_000;
    let mut counts: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    for seed in 0..trials {
        let mut rng = RandomSource::new(seed, 9);
        let log = thresh_monitor(&stream, &config, &mut rng).unwrap();
        let transcript: Vec<bool> = (0..2)
            .flat_map(|t| (0..2u32).map(move |y| (t, y)))
            .map(|(t, y)| log.contains(t, y))
            .collect();
        *counts.entry(transcript).or_insert(0) += 1;
    }
    for (outcome, p) in law.iter() {
        let freq = counts.get(outcome).copied().unwrap_or(0) as f64 / trials as f64;
        let stderr = (p * (1.0 - p) / trials as f64).sqrt() + 1e-9;
        assert!(
            (freq - p).abs() < 4.0 * stderr,
            "{outcome:?}: freq {freq} vs exact {p}"
        );
    }
    // Transcripts outside the law's support must never occur.
    for outcome in counts.keys() {
        assert!(law.prob(outcome) > 0.0, "impossible transcript {outcome:?} observed");
    }
}
