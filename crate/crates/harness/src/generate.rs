//! Deterministic instance generators.
//!
//! Every generator is a pure function of its parameters and a seed; the
//! instance randomness lives on a dedicated stream so solver seeds never
//! perturb the instance.

use privsub_core::clustering::{ClusterInstance, CostPower, FiniteMetric};
use privsub_core::dataset::Dataset;
use privsub_core::heavyhitters::{tau_star, Stream};
use privsub_core::setcover::{SetMembership, SetSystem};
use privsub_core::submodular::{ItemSet, UserFn};
use privsub_core::{Error, RandomSource, Result};

use crate::oracles::min_cover_size;

/// Stream id reserved for instance construction.
const GENERATOR_STREAM: u64 = u64::MAX;

fn gen_rng(seed: u64) -> RandomSource {
    RandomSource::new(seed, GENERATOR_STREAM)
}

/// Random coverage instance: each user links to `links` distinct items.
pub fn random_coverage(m: usize, n: usize, links: usize, seed: u64) -> Dataset<UserFn> {
    let mut rng = gen_rng(seed);
    let users = (0..n)
        .map(|_| {
            let mut set = ItemSet::EMPTY;
            while set.len() < links.min(m) {
                set.insert((rng.next_u64() % m as u64) as usize);
            }
            UserFn::Coverage { links: set }
        })
        .collect::<Vec<_>>();
    Dataset::from_values(users)
}

/// Planted open-set set cover instance with verified optimum `q`: the
/// records are partitioned across `q` planted sets, and the remaining
/// `m - q` sets are sparse random decoys that provably cannot replace the
/// plant. Returns `(system, dataset, planted set indices)`.
pub fn planted_setcover(
    q: usize,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<(SetSystem, Dataset<SetMembership>, Vec<usize>)> {
    if q == 0 || q > m {
        return Err(Error::InvalidParameter(format!("need 1 <= q <= m, got q={q}, m={m}")));
    }
    let system = SetSystem::new(m)?;
    for attempt in 0..64 {
        let mut rng = gen_rng(seed.wrapping_add(attempt << 32));
        // Choose q distinct planted positions among the m sets.
        let mut planted: Vec<usize> = Vec::with_capacity(q);
        while planted.len() < q {
            let i = (rng.next_u64() % m as u64) as usize;
            if !planted.contains(&i) {
                planted.push(i);
            }
        }
        let decoys: Vec<usize> = (0..m).filter(|i| !planted.contains(i)).collect();
        // Each decoy covers a sparse random slice of the records.
        let decoy_rate = 1.0 / (2 * m) as f64;
        let records: Vec<SetMembership> = (0..n)
            .map(|r| {
                let mut sets = vec![planted[r % q]];
                for &d in &decoys {
                    if rng.uniform() < decoy_rate {
                        sets.push(d);
                    }
                }
                sets.sort_unstable();
                sets
            })
            .collect();
        let dataset = Dataset::from_values(records);
        // The plant covers everything; certify no smaller cover exists.
        if q == 1 || min_cover_size(&system, &dataset, q - 1).is_none() {
            return Ok((system, dataset, planted));
        }
    }
    Err(Error::InvalidInstance(
        "could not plant a set cover instance with the requested optimum".into(),
    ))
}

/// Planted clustering instance: `m` points split into `k` clusters, with
/// distance 0.1 inside a cluster and 0.9 across clusters (a valid metric
/// with diameter 0.9 and separation 0.8). Users land on uniformly random
/// points, so choosing any one point per cluster costs at most
/// `n * 0.1^q`.
pub fn planted_clusters(
    k: usize,
    m: usize,
    n: usize,
    q: CostPower,
    seed: u64,
) -> Result<ClusterInstance> {
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= m, got k={k}, m={m}")));
    }
    let cluster_of = |point: usize| point % k;
    let mut dist = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            dist[a * m + b] = if cluster_of(a) == cluster_of(b) { 0.1 } else { 0.9 };
        }
    }
    let metric = FiniteMetric::new(m, dist)?;
    let mut rng = gen_rng(seed);
    let users: Vec<usize> = (0..n).map(|_| (rng.next_u64() % m as u64) as usize).collect();
    ClusterInstance::new(metric, Dataset::from_values(users), q, k)
}

/// Planted shifting-heavy-hitter stream satisfying the contribution-cap
/// assumption.
///
/// Bucket 0 is the planted heavy hitter: every step, a rotating block of
/// users (each serving exactly `k` duty steps) pushes its count to
/// `ceil(n k / T)`, which the caller sizes above `2 tau*`. Off-duty users
/// spread over the remaining buckets, staying far below `tau*`.
pub fn planted_hh_stream(
    k: usize,
    t_len: usize,
    alphabet: usize,
    n: usize,
    seed: u64,
) -> Result<Stream> {
    if alphabet < 2 || k == 0 || k > t_len {
        return Err(Error::InvalidParameter(
            "need alphabet >= 2 and 1 <= k <= T for the planted stream".into(),
        ));
    }
    let mut rng = gen_rng(seed);
    // k distinct offsets spread across [0, T).
    let offsets: Vec<usize> = (0..k).map(|j| j * t_len / k).collect();
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            let duty_base = i % t_len;
            let duty: Vec<usize> =
                offsets.iter().map(|&o| (duty_base + o) % t_len).collect();
            (0..t_len)
                .map(|t| {
                    if duty.contains(&t) {
                        0
                    } else {
                        1 + (rng.next_u64() % (alphabet as u64 - 1)) as u32
                    }
                })
                .collect()
        })
        .collect();
    Stream::new(t_len, alphabet, rows)
}

/// Smallest `n` for which the planted stream's per-step duty count clears
/// `2 tau* + 1`.
pub fn planted_hh_population(
    k: usize,
    t_len: usize,
    alphabet: usize,
    beta: f64,
    epsilon: f64,
) -> usize {
    let target = tau_star(k, t_len, alphabet, beta, epsilon, 1000.0);
    let per_step_needed = (2.0 * target + 1.0).ceil() as usize;
    // Duty blocks are striped: per-step duty count is at least
    // floor(n/T) * k users when k duty steps per user are spread evenly.
    (per_step_needed * t_len).div_ceil(k) + t_len
}

#[cfg(test)]
mod tests {
    use super::*;
    use privsub_core::heavyhitters::check_assumption;

    #[test]
    fn planted_setcover_has_the_claimed_optimum() {
        let (system, dataset, planted) = planted_setcover(3, 3000, 30, 7).unwrap();
        assert_eq!(planted.len(), 3);
        system.validate(&dataset).unwrap();
        // The plant covers; nothing of size 2 covers.
        assert!(min_cover_size(&system, &dataset, 2).is_none());
        let chosen: Vec<bool> = {
            let mut mask = vec![false; system.m];
            for &i in &planted {
                mask[i] = true;
            }
            mask
        };
        assert!(dataset.values().all(|sets| sets.iter().any(|&i| chosen[i])));
    }

    #[test]
    fn planted_clusters_cost_bound_by_construction() {
        let inst = planted_clusters(3, 25, 500, CostPower::One, 3).unwrap();
        // One point per cluster: centers {0, 1, 2} hit every cluster.
        let cost = privsub_core::clustering::cost(&inst, &[0, 1, 2]);
        assert!(cost <= 500.0 * 0.1 + 1e-9, "cost {cost}");
        let inst2 = planted_clusters(3, 25, 500, CostPower::Two, 3).unwrap();
        let cost2 = privsub_core::clustering::cost(&inst2, &[0, 1, 2]);
        assert!(cost2 <= 500.0 * 0.01 + 1e-9, "cost {cost2}");
    }

    #[test]
    fn planted_stream_satisfies_assumption_and_heaviness() {
        let (k, t_len, alphabet, beta, epsilon) = (2, 5, 10, 0.1, 1.0);
        let n = planted_hh_population(k, t_len, alphabet, beta, epsilon);
        let stream = planted_hh_stream(k, t_len, alphabet, n, 11).unwrap();
        let target = tau_star(k, t_len, alphabet, beta, epsilon, 1000.0);
        let (ok, violators) = check_assumption(&stream, k, target);
        assert!(ok, "{} violators", violators.len());
        for t in 0..t_len {
            assert!(
                stream.count(t, 0) as f64 >= 2.0 * target,
                "step {t}: {} below 2 tau* = {}",
                stream.count(t, 0),
                2.0 * target
            );
            for y in 1..alphabet as u32 {
                assert!((stream.count(t, y) as f64) < target);
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = random_coverage(10, 50, 2, 42);
        let b = random_coverage(10, 50, 2, 42);
        assert_eq!(a, b);
        let (_, d1, _) = planted_setcover(3, 200, 12, 5).unwrap();
        let (_, d2, _) = planted_setcover(3, 200, 12, 5).unwrap();
        assert_eq!(d1, d2);
    }
}
