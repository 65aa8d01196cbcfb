//! Exact privacy checks at the module-invariant scale.

use std::f64::consts::LN_2;

use privsub_core::audit::{
    exact_at_distribution, exact_em_distribution, exact_subsampled_distribution, verify_dp,
    DpMode, DEFAULT_SUPPORT_CAP,
};
use privsub_core::dataset::Dataset;
use privsub_core::em::exp_mech_distribution;
use privsub_core::heavyhitters::MonitorOracle;
use privsub_core::setcover::{CoverageGainOracle, RoundThresholdOracle, SetMembership};
use privsub_core::submodular::{CardinalityGreedyOracle, ItemSet, UserFn};
use privsub_core::subsample::rate_for_target;

fn coverage(items: &[usize]) -> UserFn {
    UserFn::Coverage { links: ItemSet::from_items(items.iter().copied()) }
}

#[test]
fn subsampled_wrapper_two_sided_up_to_four_records() {
    // Two record types keep the subset enumeration cheap at n = 4.
    let domain = [coverage(&[0]), coverage(&[1, 2])];
    let oracle = CardinalityGreedyOracle { m: 3, k: 2 };
    let epsilon = 0.7;
    let p = rate_for_target(epsilon).unwrap();
    let result = verify_dp(
        |d: &Dataset<UserFn>| {
            exact_subsampled_distribution(
                |ds| exact_em_distribution(&oracle, ds, LN_2, 1.0, DEFAULT_SUPPORT_CAP),
                d,
                p,
                DEFAULT_SUPPORT_CAP,
            )
        },
        &domain,
        4,
        epsilon,
        DpMode::TwoSided,
    )
    .unwrap();
    assert!(result.pass, "{:?}", result.witness);
}

#[test]
fn repeated_at_engine_add_dp_on_count_queries() {
    // Greedy-scaling round oracle: every query is a covered-count with
    // realized sensitivity 1 per added record.
    let oracle = RoundThresholdOracle {
        active: vec![0, 1, 2],
        accepted: vec![false; 3],
        threshold: 1.2,
    };
    let domain: Vec<SetMembership> = vec![vec![0], vec![1, 2], vec![0, 2]];
    let result = verify_dp(
        |d: &Dataset<SetMembership>| {
            exact_at_distribution(&oracle, d, LN_2, 1.0, DEFAULT_SUPPORT_CAP)
        },
        &domain,
        3,
        LN_2,
        DpMode::Add,
    )
    .unwrap();
    assert!(result.pass, "{:?}", result.witness);
}

#[test]
fn setcover_via_em_oracle_is_add_dp_on_tiny_instances() {
    // Full-length coverage-gain greedy, m = 3, datasets up to 3 records.
    let oracle = CoverageGainOracle { m: 3 };
    let domain: Vec<SetMembership> = vec![vec![0], vec![1], vec![0, 2], vec![2]];
    let result = verify_dp(
        |d: &Dataset<SetMembership>| {
            exact_em_distribution(&oracle, d, LN_2, 1.0, DEFAULT_SUPPORT_CAP)
        },
        &domain,
        3,
        LN_2,
        DpMode::Add,
    )
    .unwrap();
    assert!(result.pass, "{:?}", result.witness);
}

#[test]
fn monitor_add_dp_holds_for_contribution_cap_two() {
    // Delta = k = 2: the add log-ratio is bounded by ln 2 when noise is
    // Exp(ln(2)/2) and each user charges at most two accepting rounds.
    let oracle = MonitorOracle { t_len: 2, alphabet: 2, k: 2, tau: 0.9 };
    let domain = vec![vec![0u32, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
    let result = verify_dp(
        |d: &Dataset<Vec<u32>>| {
            exact_at_distribution(&oracle, d, LN_2, 2.0, DEFAULT_SUPPORT_CAP)
        },
        &domain,
        2,
        LN_2,
        DpMode::Add,
    )
    .unwrap();
    assert!(result.pass, "{:?}", result.witness);
}

#[test]
fn em_distribution_normalizes_at_ten_thousand_candidates() {
    let scores: Vec<f64> = (0..10_000).map(|i| (i % 97) as f64 / 7.0).collect();
    let d = exp_mech_distribution(&scores, 0.9).unwrap();
    assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
