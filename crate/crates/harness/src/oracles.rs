//! Brute-force and reimplementation oracles shared by the runner and tests.
//!
//! Everything here is an independent reference path: no oracle may call into
//! the solver code it is used to check.

use privsub_core::clustering::{ClusterInstance, CostPower};
use privsub_core::dataset::Dataset;
use privsub_core::heavyhitters::Stream;
use privsub_core::setcover::{CoverPermutation, SetMembership, SetSystem};
use privsub_core::submodular::{objective_value, ItemSet, Matroid, UserFn};

/// All k-subsets of `[m]` in lexicographic order of their sorted item lists.
pub fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(m: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..m {
            current.push(i);
            rec(m, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(m, k, 0, &mut current, &mut out);
    out
}

/// Exhaustive maximizer of `F_D` over k-subsets; ties resolve to the
/// lexicographically smallest set for reproducible fixtures.
pub fn best_k_subset(dataset: &Dataset<UserFn>, m: usize, k: usize) -> (ItemSet, f64) {
    let mut best_set = ItemSet::EMPTY;
    let mut best = f64::NEG_INFINITY;
    for combo in combinations(m, k) {
        let s = ItemSet::from_items(combo.iter().copied());
        let v = objective_value(dataset, s);
        if v > best {
            best = v;
            best_set = s;
        }
    }
    (best_set, best)
}

/// Exhaustive maximizer of `F_D` over independent sets (`m <= 20`).
pub fn best_independent_set(dataset: &Dataset<UserFn>, matroid: &Matroid) -> (ItemSet, f64) {
    let m = matroid.ground_size();
    assert!(m <= 20, "independent-set enumeration limited to m <= 20");
    // Ascending subset size, then lexicographic item order within a size.
    let mut best_set = ItemSet::EMPTY;
    let mut best = f64::NEG_INFINITY;
    for size in 0..=matroid.rank() {
        for combo in combinations(m, size) {
            let s = ItemSet::from_items(combo.iter().copied());
            if !matroid.is_independent(s) {
                continue;
            }
            let v = objective_value(dataset, s);
            if v > best {
                best = v;
                best_set = s;
            }
        }
    }
    (best_set, best)
}

/// Smallest number of sets covering every record, searching sizes
/// `1..=max_size`. Returns `None` if nothing up to `max_size` covers.
pub fn min_cover_size(
    system: &SetSystem,
    dataset: &Dataset<SetMembership>,
    max_size: usize,
) -> Option<usize> {
    if dataset.is_empty() {
        return Some(0);
    }
    for size in 1..=max_size.min(system.m) {
        for combo in combinations(system.m, size) {
            let chosen: Vec<bool> = {
                let mut mask = vec![false; system.m];
                for &i in &combo {
                    mask[i] = true;
                }
                mask
            };
            if dataset.values().all(|sets| sets.iter().any(|&i| chosen[i])) {
                return Some(size);
            }
        }
    }
    None
}

/// Independent reimplementation of the open-set cost: walk the permutation
/// for each record until a covering set appears.
pub fn scan_cost(
    pi: &CoverPermutation,
    _system: &SetSystem,
    dataset: &Dataset<SetMembership>,
) -> usize {
    let mut used_positions = std::collections::BTreeSet::new();
    for sets in dataset.values() {
        for (pos, &set) in pi.order().iter().enumerate() {
            if sets.contains(&set) {
                used_positions.insert(pos);
                break;
            }
        }
    }
    used_positions.len()
}

/// Exhaustive clustering optimum over all k-subsets of centers.
pub fn best_clustering(instance: &ClusterInstance) -> (Vec<usize>, f64) {
    let m = instance.metric.size();
    let mut best_set = Vec::new();
    let mut best = f64::INFINITY;
    for combo in combinations(m, instance.k) {
        let v = privsub_core::clustering::cost(instance, &combo);
        if v < best {
            best = v;
            best_set = combo;
        }
    }
    (best_set, best)
}

/// Independent recount of the contribution-cap assumption, deliberately
/// naive: one full `w_t(y)` scan per (user, step). Quadratic, for
/// cross-checking on small streams only.
pub fn recount_assumption(stream: &Stream, k: usize, tau_star: f64) -> (bool, Vec<usize>) {
    let mut violators = Vec::new();
    for i in 0..stream.users() {
        let heavy = (0..stream.steps())
            .filter(|&t| stream.count(t, stream.bucket(i, t)) as f64 > tau_star)
            .count();
        if heavy > k {
            violators.push(i);
        }
    }
    (violators.is_empty(), violators)
}

/// `cost^q` of a center set on a weighted point histogram, reimplemented for
/// cross-checking the clustering pipeline's post-processing.
pub fn weighted_cost_oracle(
    instance: &ClusterInstance,
    weights: &[(usize, f64)],
    centers: &[usize],
    q: CostPower,
) -> f64 {
    weights
        .iter()
        .map(|&(point, w)| {
            let mut best = f64::INFINITY;
            for &c in centers {
                let d = q.apply(instance.metric.distance(c, point));
                if d < best {
                    best = d;
                }
            }
            w * best.min(1.0)
        })
        .sum()
}
