//! Metric k-median and k-means over a finite metric of diameter at most 1.
//!
//! The private pipeline: a repeated-EM bicriteria solution of size
//! `O(k log n)`, a noisy snapped histogram forming weighted synthetic data,
//! and a non-private weighted local search as pure post-processing. Running
//! the whole chain on a Poisson subsample at `p = 1 - e^-epsilon` makes it
//! two-sided `epsilon`-DP.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PrivacyParams};
use crate::error::{Error, Result};
use crate::mechanisms::{run_repeated_em, ScoringOracle};
use crate::noise::sample_exponential;
use crate::rng::RandomSource;
use crate::subsample::{poisson_subsample, rate_for_target};

/// A finite metric on `m` points: symmetric, zero diagonal, triangle
/// inequality, diameter at most 1. Validation is exhaustive and intended for
/// `m <= 200`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMetric {
    m: usize,
    dist: Vec<f64>,
}

impl FiniteMetric {
    pub fn new(m: usize, dist: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInstance("metric needs at least one point".into()));
        }
        if dist.len() != m * m {
            return Err(Error::InvalidInstance(format!(
                "distance matrix has {} entries, expected {}",
                dist.len(),
                m * m
            )));
        }
        let metric = FiniteMetric { m, dist };
        metric.validate()?;
        Ok(metric)
    }

    /// Build from the strict lower triangle listed row by row:
    /// `d(1,0), d(2,0), d(2,1), d(3,0), ...`.
    pub fn from_lower_triangle(m: usize, lower: &[f64]) -> Result<Self> {
        if lower.len() != m * (m - 1) / 2 {
            return Err(Error::InvalidInstance(format!(
                "lower triangle has {} entries, expected {}",
                lower.len(),
                m * (m - 1) / 2
            )));
        }
        let mut dist = vec![0.0; m * m];
        let mut it = lower.iter();
        for a in 1..m {
            for b in 0..a {
                let d = *it.next().expect("length checked");
                dist[a * m + b] = d;
                dist[b * m + a] = d;
            }
        }
        FiniteMetric::new(m, dist)
    }

    fn validate(&self) -> Result<()> {
        let m = self.m;
        let tol = 1e-12;
        for a in 0..m {
            if self.distance(a, a) != 0.0 {
                return Err(Error::InvalidInstance(format!("nonzero diagonal at {a}")));
            }
            for b in 0..m {
                let d = self.distance(a, b);
                if !(0.0..=1.0).contains(&d) {
                    return Err(Error::InvalidInstance(format!(
                        "d({a},{b}) = {d} outside [0, 1]"
                    )));
                }
                if (d - self.distance(b, a)).abs() > tol {
                    return Err(Error::InvalidInstance(format!("asymmetry at ({a},{b})")));
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    if self.distance(a, b) > self.distance(a, c) + self.distance(c, b) + tol {
                        return Err(Error::InvalidInstance(format!(
                            "triangle inequality fails at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.m + b]
    }
}

/// Cost exponent: 1 for k-median, 2 for k-means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostPower {
    One,
    Two,
}

impl CostPower {
    pub fn from_u8(q: u8) -> Result<Self> {
        match q {
            1 => Ok(CostPower::One),
            2 => Ok(CostPower::Two),
            other => Err(Error::InvalidParameter(format!("q must be 1 or 2, got {other}"))),
        }
    }

    pub fn apply(self, d: f64) -> f64 {
        match self {
            CostPower::One => d,
            CostPower::Two => d * d,
        }
    }
}

/// A clustering instance: metric, user points, cost power and target size.
#[derive(Clone, Debug)]
pub struct ClusterInstance {
    pub metric: FiniteMetric,
    pub dataset: Dataset<usize>,
    pub q: CostPower,
    pub k: usize,
}

impl ClusterInstance {
    pub fn new(
        metric: FiniteMetric,
        dataset: Dataset<usize>,
        q: CostPower,
        k: usize,
    ) -> Result<Self> {
        if k == 0 || k > metric.size() {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k <= m, got k={k}, m={}",
                metric.size()
            )));
        }
        if let Some(&bad) = dataset.values().find(|&&p| p >= metric.size()) {
            return Err(Error::InvalidInstance(format!("user point {bad} out of range")));
        }
        Ok(ClusterInstance { metric, dataset, q, k })
    }

    fn with_dataset(&self, dataset: Dataset<usize>) -> ClusterInstance {
        ClusterInstance { metric: self.metric.clone(), dataset, q: self.q, k: self.k }
    }
}

/// `cost^q(S; D) = sum_x min_{c in S} d(c, x)^q`, with the convention
/// `cost^q(empty; D) = n` (every per-point term capped at the diameter 1).
pub fn cost(instance: &ClusterInstance, centers: &[usize]) -> f64 {
    instance
        .dataset
        .values()
        .map(|&x| point_cost(instance, centers, x))
        .sum()
}

fn point_cost(instance: &ClusterInstance, centers: &[usize], x: usize) -> f64 {
    centers
        .iter()
        .map(|&c| instance.q.apply(instance.metric.distance(c, x)))
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}

/// Repeated-EM oracle for the bicriteria phase: score of a point is the cost
/// reduction it buys. Per-point costs live in `[0, 1]`, so the realized
/// sensitivity telescopes to 1 per added user.
pub struct BicriteriaOracle {
    pub metric: FiniteMetric,
    pub q: CostPower,
    pub rounds: usize,
}

impl ScoringOracle<usize> for BicriteriaOracle {
    fn rounds(&self) -> usize {
        self.rounds
    }

    fn candidates(&self, history: &[usize]) -> Vec<usize> {
        (0..self.metric.size()).filter(|c| !history.contains(c)).collect()
    }

    fn score(&self, history: &[usize], candidate: usize, dataset: &Dataset<usize>) -> f64 {
        dataset
            .values()
            .map(|&x| {
                let before = history
                    .iter()
                    .map(|&c| self.q.apply(self.metric.distance(c, x)))
                    .fold(f64::INFINITY, f64::min)
                    .min(1.0);
                let with = self.q.apply(self.metric.distance(candidate, x));
                before - with.min(before)
            })
            .sum()
    }
}

/// Bicriteria phase: `ceil(2k ln n)` rounds of the exponential mechanism
/// over cost reductions at one-sided budget `epsilon0`. When
/// `2k ln n >= m` (or `n <= 1`) the size bound is met trivially by
/// returning all of `[m]`.
pub fn bicriteria(
    instance: &ClusterInstance,
    epsilon0: f64,
    rng: &mut RandomSource,
) -> Result<Vec<usize>> {
    let m = instance.metric.size();
    let n = instance.dataset.len();
    if n <= 1 {
        return Ok((0..m).collect());
    }
    let budget = 2.0 * instance.k as f64 * (n as f64).ln();
    if budget >= m as f64 {
        return Ok((0..m).collect());
    }
    let rounds = budget.ceil() as usize;
    let oracle =
        BicriteriaOracle { metric: instance.metric.clone(), q: instance.q, rounds };
    let transcript = run_repeated_em(&oracle, &instance.dataset, epsilon0, 1.0, rng)?;
    Ok(transcript.chosen)
}

/// Noisy snapped histogram over the kept centers.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSyntheticData {
    pub centers: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Snap every user to its nearest kept center (ties to the lowest center
/// index) and add fresh one-sided `Exp(epsilon0_half)` noise to each count.
pub fn synthesize(
    instance: &ClusterInstance,
    kept: &[usize],
    epsilon0_half: f64,
    rng: &mut RandomSource,
) -> Result<WeightedSyntheticData> {
    if kept.is_empty() {
        return Err(Error::Precondition("kept center set must be nonempty".into()));
    }
    let mut counts = vec![0.0; kept.len()];
    for &x in instance.dataset.values() {
        let slot = snap(&instance.metric, kept, x);
        counts[slot] += 1.0;
    }
    let weights = counts
        .into_iter()
        .map(|c| Ok(c + sample_exponential(epsilon0_half, rng)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(WeightedSyntheticData { centers: kept.to_vec(), weights })
}

/// Index into `kept` of the nearest center to `x`, ties to the lowest center
/// index.
fn snap(metric: &FiniteMetric, kept: &[usize], x: usize) -> usize {
    let mut best = 0;
    let mut best_key = (f64::INFINITY, usize::MAX);
    for (slot, &t) in kept.iter().enumerate() {
        let key = (metric.distance(t, x), t);
        if key < best_key {
            best_key = key;
            best = slot;
        }
    }
    best
}

/// Weighted cost of centers `S` against the synthetic data.
pub fn weighted_cost(
    metric: &FiniteMetric,
    q: CostPower,
    data: &WeightedSyntheticData,
    centers: &[usize],
) -> f64 {
    data.centers
        .iter()
        .zip(&data.weights)
        .map(|(&t, &w)| {
            w * centers
                .iter()
                .map(|&c| q.apply(metric.distance(c, t)))
                .fold(f64::INFINITY, f64::min)
                .min(1.0)
        })
        .sum()
}

/// Non-private single-swap local search on the weighted synthetic instance.
///
/// Starts from the weighted greedy solution and accepts a swap only if it
/// shrinks the cost by a factor of at least `1 - gamma/k` with `gamma = 0.1`,
/// stopping at a local optimum or after `10 k m` iterations. Pure
/// post-processing: never touches the real dataset.
pub fn local_search(
    metric: &FiniteMetric,
    q: CostPower,
    k: usize,
    data: &WeightedSyntheticData,
) -> Result<Vec<usize>> {
    let m = metric.size();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= m, got k={k}, m={m}")));
    }
    let gamma = 0.1;
    // Greedy start: k rounds of best cost reduction, ties to lowest index.
    let mut centers: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = usize::MAX;
        let mut best_cost = f64::INFINITY;
        for c in 0..m {
            if centers.contains(&c) {
                continue;
            }
            centers.push(c);
            let cost = weighted_cost(metric, q, data, &centers);
            centers.pop();
            if cost < best_cost {
                best_cost = cost;
                best = c;
            }
        }
        centers.push(best);
    }
    let mut current = weighted_cost(metric, q, data, &centers);
    let accept_factor = 1.0 - gamma / k as f64;
    for _ in 0..10 * k * m {
        let mut best_swap: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            let old = centers[slot];
            for c in 0..m {
                if centers.contains(&c) {
                    continue;
                }
                centers[slot] = c;
                let cost = weighted_cost(metric, q, data, &centers);
                if best_swap.map_or(true, |(_, _, b)| cost < b) {
                    best_swap = Some((slot, c, cost));
                }
                centers[slot] = old;
            }
        }
        match best_swap {
            Some((slot, c, cost)) if cost <= accept_factor * current => {
                centers[slot] = c;
                current = cost;
            }
            _ => break,
        }
    }
    centers.sort_unstable();
    Ok(centers)
}

/// End-to-end private clustering: one Poisson subsample at
/// `p = 1 - e^-epsilon`, bicriteria at `ln(2)/2`, noisy histogram at
/// `ln(2)/2`, then weighted local search as post-processing.
pub fn dp_cluster(
    instance: &ClusterInstance,
    params: &PrivacyParams,
    rng: &mut RandomSource,
) -> Result<Vec<usize>> {
    params.validate()?;
    if params.epsilon > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1], got {}",
            params.epsilon
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let p = rate_for_target(params.epsilon)?;
    let sub = instance.with_dataset(poisson_subsample(&instance.dataset, p, rng));
    let kept = bicriteria(&sub, ln2 / 2.0, rng)?;
    let data = synthesize(&sub, &kept, ln2 / 2.0, rng)?;
    local_search(&instance.metric, instance.q, instance.k, &data)
}

/// On-disk instance format:
/// `{m, distances: lower-triangle list, users: [point ids], k, q}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterInstanceFile {
    pub m: usize,
    pub distances: Vec<f64>,
    pub users: Vec<usize>,
    pub k: usize,
    pub q: u8,
}

impl ClusterInstanceFile {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn instance(&self) -> Result<ClusterInstance> {
        let metric = FiniteMetric::from_lower_triangle(self.m, &self.distances)?;
        ClusterInstance::new(
            metric,
            Dataset::from_values(self.users.clone()),
            CostPower::from_u8(self.q)?,
            self.k,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Line metric on m points at coordinates `xs` (must fit in diameter 1).
    fn line_metric(xs: &[f64]) -> FiniteMetric {
        let m = xs.len();
        let mut dist = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                dist[a * m + b] = (xs[a] - xs[b]).abs();
            }
        }
        FiniteMetric::new(m, dist).unwrap()
    }

    fn instance(xs: &[f64], users: Vec<usize>, q: CostPower, k: usize) -> ClusterInstance {
        ClusterInstance::new(line_metric(xs), Dataset::from_values(users), q, k).unwrap()
    }

    #[test]
    fn metric_validation_catches_violations() {
        // Triangle violation: d(0,2) = 1 but d(0,1) + d(1,2) = 0.2.
        let dist = vec![
            0.0, 0.1, 1.0, //
            0.1, 0.0, 0.1, //
            1.0, 0.1, 0.0,
        ];
        assert!(FiniteMetric::new(3, dist).is_err());
        // Diameter violation.
        assert!(FiniteMetric::from_lower_triangle(2, &[1.5]).is_err());
        assert!(FiniteMetric::from_lower_triangle(3, &[0.2, 0.4, 0.3]).is_ok());
    }

    #[test]
    fn cost_conventions() {
        let inst = instance(&[0.0, 0.5, 1.0], vec![1, 1, 1, 1], CostPower::One, 1);
        assert_eq!(cost(&inst, &[1]), 0.0);
        assert_eq!(cost(&inst, &[]), 4.0);
        let q2 = instance(&[0.0, 0.5, 1.0], vec![0, 2], CostPower::Two, 1);
        assert!((cost(&q2, &[1]) - 2.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn cost_matches_double_loop_oracle() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let mut rng = RandomSource::new(51, 0);
        let users: Vec<usize> = (0..40).map(|_| (rng.next_u64() % 10) as usize).collect();
        for q in [CostPower::One, CostPower::Two] {
            let inst = instance(&xs, users.clone(), q, 2);
            for _ in 0..50 {
                let a = (rng.next_u64() % 10) as usize;
                let b = (rng.next_u64() % 10) as usize;
                let centers = vec![a, b];
                let mut expect = 0.0;
                for &x in &users {
                    let mut best = f64::INFINITY;
                    for &c in &centers {
                        let d = q.apply((xs[c] - xs[x]).abs());
                        if d < best {
                            best = d;
                        }
                    }
                    expect += best;
                }
                assert!((cost(&inst, &centers) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bicriteria_trivial_branch_returns_everything() {
        // 2k ln n >= m: with k=2, n=100, m=10 the bound is trivial.
        let xs: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let inst = instance(&xs, vec![3; 100], CostPower::One, 2);
        let mut rng = RandomSource::new(52, 0);
        let t = bicriteria(&inst, 1.0, &mut rng).unwrap();
        assert_eq!(t, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn bicriteria_size_bound_and_planted_center() {
        // Nontrivial branch: k=1, n=20, m=30 gives L = ceil(2 ln 20) = 6.
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let inst = instance(&xs, vec![7; 20], CostPower::One, 1);
        let bound = (2.0 * 1.0 * 20f64.ln()).ceil() as usize;
        let mut first_hits = 0;
        for seed in 0..30 {
            let mut rng = RandomSource::new(seed, 3);
            // Large one-sided budget approximates the noiseless limit.
            let t = bicriteria(&inst, 60.0, &mut rng).unwrap();
            assert_eq!(t.len(), bound);
            if t[0] == 7 {
                first_hits += 1;
            }
        }
        assert!(first_hits >= 28, "{first_hits}/30");
    }

    #[test]
    fn synthesize_counts_and_one_sided_noise() {
        let xs = [0.0, 0.4, 0.9];
        let inst = instance(&xs, vec![1; 25], CostPower::One, 1);
        let mut rng = RandomSource::new(53, 0);
        let data = synthesize(&inst, &[0, 1, 2], 0.5, &mut rng).unwrap();
        assert!(data.weights[1] >= 25.0);
        assert!(data.weights[0] >= 0.0 && data.weights[2] >= 0.0);
        let total_noise: f64 = data.weights.iter().sum::<f64>() - 25.0;
        assert!(total_noise >= 0.0);
    }

    #[test]
    fn snapping_tie_breaks_to_lowest_center_index() {
        // Point 1 is equidistant from centers 0 and 2.
        let xs = [0.0, 0.5, 1.0];
        let metric = line_metric(&xs);
        assert_eq!(snap(&metric, &[2, 0], 1), 1); // slot of center 0
        assert_eq!(snap(&metric, &[0, 2], 1), 0);
    }

    #[test]
    fn synthetic_noise_sum_concentrates() {
        // sum of |T| draws of Exp(eps0/2) stays below 3 |T| ln(n/beta) /
        // eps0 in at least 1 - beta of trials.
        let beta = 0.05;
        let eps0 = std::f64::consts::LN_2;
        let n = 200.0_f64;
        let kept = 9usize;
        let bound = 3.0 * kept as f64 * (n / beta).ln() / eps0;
        let mut rng = RandomSource::new(54, 0);
        let trials = 10_000;
        let mut bad = 0;
        for _ in 0..trials {
            let total: f64 = (0..kept)
                .map(|_| sample_exponential(eps0 / 2.0, &mut rng).unwrap())
                .sum();
            if total > bound {
                bad += 1;
            }
        }
        assert!((bad as f64) < beta * trials as f64, "{bad} exceedances");
    }

    #[test]
    fn local_search_with_k_equal_m_takes_everything() {
        let xs = [0.0, 0.3, 0.8];
        let metric = line_metric(&xs);
        let data = WeightedSyntheticData {
            centers: vec![0, 1, 2],
            weights: vec![5.0, 1.0, 2.0],
        };
        let s = local_search(&metric, CostPower::One, 3, &data).unwrap();
        assert_eq!(s, vec![0, 1, 2]);
        assert_eq!(weighted_cost(&metric, CostPower::One, &data, &s), 0.0);
    }

    #[test]
    fn local_search_recovers_separated_heavy_centers() {
        let xs = [0.0, 0.05, 0.5, 0.55, 1.0, 0.98];
        let metric = line_metric(&xs);
        let data = WeightedSyntheticData {
            centers: vec![0, 2, 4],
            weights: vec![100.0, 80.0, 120.0],
        };
        let s = local_search(&metric, CostPower::One, 3, &data).unwrap();
        assert_eq!(s, vec![0, 2, 4]);
    }

    #[test]
    fn local_search_is_five_approximate_on_small_instances() {
        // Single-swap local optima are 5-approximate for k-median; the
        // (1 - gamma/k) acceptance rule relaxes this to 5(1 + gamma).
        let mut rng = RandomSource::new(55, 0);
        for trial in 0..30 {
            let m = 6 + (rng.next_u64() % 5) as usize;
            let xs: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
            let metric = line_metric(&xs);
            let k = 1 + (rng.next_u64() % 3) as usize;
            let data = WeightedSyntheticData {
                centers: (0..m).collect(),
                weights: (0..m).map(|_| (rng.next_u64() % 50) as f64).collect(),
            };
            let s = local_search(&metric, CostPower::One, k, &data).unwrap();
            let got = weighted_cost(&metric, CostPower::One, &data, &s);
            // Brute-force optimum over all k-subsets.
            let mut opt = f64::INFINITY;
            for mask in 0u32..(1 << m) {
                if mask.count_ones() as usize != k {
                    continue;
                }
                let subset: Vec<usize> = (0..m).filter(|&u| mask & (1 << u) != 0).collect();
                opt = opt.min(weighted_cost(&metric, CostPower::One, &data, &subset));
            }
            assert!(
                got <= 5.0 * 1.1 * opt + 1e-9,
                "trial {trial}: got {got}, opt {opt}"
            );
        }
    }

    #[test]
    fn dp_cluster_with_k_equal_m_costs_nothing() {
        let xs = [0.0, 0.25, 0.5, 0.75];
        let inst = instance(&xs, vec![0, 1, 2, 3, 0, 1, 2, 3], CostPower::One, 4);
        let params = PrivacyParams::new(0.9, 0.1, 0.2).unwrap();
        let mut rng = RandomSource::new(56, 0);
        let s = dp_cluster(&inst, &params, &mut rng).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(cost(&inst, &s), 0.0);
    }

    #[test]
    fn dp_cluster_output_size_is_k() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let mut rng = RandomSource::new(57, 0);
        let users: Vec<usize> = (0..300).map(|_| (rng.next_u64() % 12) as usize).collect();
        let inst = instance(&xs, users, CostPower::Two, 3);
        let params = PrivacyParams::new(0.8, 0.1, 0.2).unwrap();
        for _ in 0..5 {
            let s = dp_cluster(&inst, &params, &mut rng).unwrap();
            assert_eq!(s.len(), 3);
            assert!(s.iter().all(|&c| c < 12));
        }
    }

    #[test]
    fn dp_cluster_rejects_epsilon_above_one() {
        let inst = instance(&[0.0, 1.0], vec![0, 1], CostPower::One, 1);
        let mut rng = RandomSource::new(58, 0);
        let too_big = PrivacyParams::new(1.5, 0.1, 0.2).unwrap();
        assert!(dp_cluster(&inst, &too_big, &mut rng).is_err());
        let boundary = PrivacyParams::new(1.0, 0.1, 0.2).unwrap();
        assert!(dp_cluster(&inst, &boundary, &mut rng).is_ok());
    }

    #[test]
    fn instance_file_round_trip() {
        let file = ClusterInstanceFile {
            m: 3,
            distances: vec![0.4, 0.9, 0.5],
            users: vec![0, 1, 2, 1],
            k: 2,
            q: 2,
        };
        let json = file.to_json().unwrap();
        let inst = ClusterInstanceFile::parse(&json).unwrap().instance().unwrap();
        assert_eq!(inst.metric.size(), 3);
        assert_eq!(inst.q, CostPower::Two);
        assert!((inst.metric.distance(2, 1) - 0.5).abs() < 1e-15);
        let bad = ClusterInstanceFile { q: 3, ..file };
        assert!(bad.instance().is_err());
    }
}
