//! The two generic adaptive engines and their subsampled wrappers.
//!
//! Repeated-EM runs `L` adaptive rounds of the exponential mechanism at rate
//! `epsilon0 / delta`; Repeated-AT runs `L` adaptive above-threshold tests
//! with one-sided `Exp(epsilon0 / delta)` noise added to the query (never to
//! the threshold). Under the oracle contracts below, each engine is
//! `epsilon0`-add-DP, and running it once on a Poisson subsample at
//! `p = 1 - e^-epsilon` with `epsilon0 = ln 2` is two-sided `epsilon`-DP.
//!
//! # Oracle contracts
//!
//! Both oracle traits carry declared (not runtime-enforced) contracts:
//!
//! * monotonicity: adding a record to the dataset never decreases any score
//!   `q_i(c; .)` or query value `h_i(.)`;
//! * bounded realized sensitivity: along any transcript, the total score
//!   movement between add-neighbors is at most `delta` (for AT, summed over
//!   the accepting rounds only).
//!
//! Enforcing these at runtime would require enumerating neighbors, so the
//! engines trust them; `audit::contract_check_*` verifies them exhaustively
//! on small instances.

use crate::dataset::Dataset;
use crate::em::exp_mech;
use crate::error::{Error, Result};
use crate::noise::sample_exponential;
use crate::rng::RandomSource;
use crate::subsample::{poisson_subsample, rate_for_target};

/// Adaptive candidate/score generator for Repeated-EM.
///
/// The candidate set for a round is a function of the history alone; only the
/// scores read the dataset. That split is what lets the auditor evaluate one
/// transcript tree against many datasets.
pub trait ScoringOracle<X> {
    /// Number of rounds `L`.
    fn rounds(&self) -> usize;

    /// Candidate set for the round following `history`. Must be nonempty.
    fn candidates(&self, history: &[usize]) -> Vec<usize>;

    /// Score of `candidate` in the round following `history`, on `dataset`.
    fn score(&self, history: &[usize], candidate: usize, dataset: &Dataset<X>) -> f64;
}

/// Adaptive query/threshold generator for Repeated-AT.
pub trait ThresholdOracle<X> {
    /// Number of rounds `L`.
    fn rounds(&self) -> usize;

    /// Threshold for the round following `history`.
    fn threshold(&self, history: &[bool]) -> f64;

    /// Query value for the round following `history`, on `dataset`.
    fn query_value(&self, history: &[bool], dataset: &Dataset<X>) -> f64;
}

/// Output of Repeated-EM: the chosen candidate per round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmTranscript {
    pub chosen: Vec<usize>,
}

/// Output of Repeated-AT: the accept/reject bit per round, plus the noise
/// trace when requested.
#[derive(Clone, Debug, PartialEq)]
pub struct AtTranscript {
    pub outcomes: Vec<bool>,
    pub noise: Option<Vec<f64>>,
}

/// Run Repeated-EM: per round, draw a candidate at rate `epsilon0 /
/// delta_sens` over the oracle's scores on `dataset`, feeding chosen
/// candidates back into the oracle.
pub fn run_repeated_em<X>(
    oracle: &impl ScoringOracle<X>,
    dataset: &Dataset<X>,
    epsilon0: f64,
    delta_sens: f64,
    rng: &mut RandomSource,
) -> Result<EmTranscript> {
    let rate = em_rate(epsilon0, delta_sens)?;
    let mut history = Vec::with_capacity(oracle.rounds());
    for round in 0..oracle.rounds() {
        let candidates = oracle.candidates(&history);
        if candidates.is_empty() {
            return Err(Error::ContractViolation(format!(
                "oracle emitted an empty candidate set in round {round}"
            )));
        }
        let scores: Vec<f64> =
            candidates.iter().map(|&c| oracle.score(&history, c, dataset)).collect();
        let chosen = exp_mech(&candidates, &scores, rate, rng)?;
        history.push(chosen);
    }
    Ok(EmTranscript { chosen: history })
}

/// Run Repeated-AT: per round, accept iff `h_i(dataset) + theta > tau_i` with
/// fresh `theta ~ Exp(epsilon0 / delta_sens)`.
pub fn run_repeated_at<X>(
    oracle: &impl ThresholdOracle<X>,
    dataset: &Dataset<X>,
    epsilon0: f64,
    delta_sens: f64,
    rng: &mut RandomSource,
) -> Result<AtTranscript> {
    run_repeated_at_inner(oracle, dataset, epsilon0, delta_sens, rng, false)
}

/// Same as [`run_repeated_at`] but records the per-round noise draws.
pub fn run_repeated_at_traced<X>(
    oracle: &impl ThresholdOracle<X>,
    dataset: &Dataset<X>,
    epsilon0: f64,
    delta_sens: f64,
    rng: &mut RandomSource,
) -> Result<AtTranscript> {
    run_repeated_at_inner(oracle, dataset, epsilon0, delta_sens, rng, true)
}

fn run_repeated_at_inner<X>(
    oracle: &impl ThresholdOracle<X>,
    dataset: &Dataset<X>,
    epsilon0: f64,
    delta_sens: f64,
    rng: &mut RandomSource,
    trace: bool,
) -> Result<AtTranscript> {
    let rate = em_rate(epsilon0, delta_sens)?;
    let mut outcomes = Vec::with_capacity(oracle.rounds());
    let mut noise = trace.then(|| Vec::with_capacity(oracle.rounds()));
    for _ in 0..oracle.rounds() {
        let tau = oracle.threshold(&outcomes);
        let h = oracle.query_value(&outcomes, dataset);
        let theta = sample_exponential(rate, rng)?;
        if let Some(trace) = noise.as_mut() {
            trace.push(theta);
        }
        outcomes.push(h + theta > tau);
    }
    Ok(AtTranscript { outcomes, noise })
}

fn em_rate(epsilon0: f64, delta_sens: f64) -> Result<f64> {
    if !(epsilon0 > 0.0) || !epsilon0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "epsilon0 must be strictly positive, got {epsilon0}"
        )));
    }
    if !(delta_sens > 0.0) || !delta_sens.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "delta_sens must be strictly positive, got {delta_sens}"
        )));
    }
    Ok(epsilon0 / delta_sens)
}

/// Subsampled Repeated-EM: draw one Poisson subsample at `p = 1 - e^-epsilon`
/// before round 1, then run the engine with `epsilon0 = ln 2` on it.
/// Two-sided `epsilon`-DP when the oracle contracts hold at `delta_sens`.
pub fn run_subsampled_em<X: Clone>(
    oracle: &impl ScoringOracle<X>,
    dataset: &Dataset<X>,
    epsilon: f64,
    delta_sens: f64,
    rng: &mut RandomSource,
) -> Result<EmTranscript> {
    let p = rate_for_target(epsilon)?;
    let sample = poisson_subsample(dataset, p, rng);
    run_repeated_em(oracle, &sample, std::f64::consts::LN_2, delta_sens, rng)
}

/// Subsampled Repeated-AT, same wrapper as [`run_subsampled_em`].
pub fn run_subsampled_at<X: Clone>(
    oracle: &impl ThresholdOracle<X>,
    dataset: &Dataset<X>,
    epsilon: f64,
    delta_sens: f64,
    rng: &mut RandomSource,
) -> Result<AtTranscript> {
    let p = rate_for_target(epsilon)?;
    let sample = poisson_subsample(dataset, p, rng);
    run_repeated_at(oracle, &sample, std::f64::consts::LN_2, delta_sens, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixed-shape oracle for tests: per-round candidate lists and a score
    /// that just counts dataset records matching the candidate parity.
    struct ToyOracle {
        rounds: usize,
    }

    impl ScoringOracle<u32> for ToyOracle {
        fn rounds(&self) -> usize {
            self.rounds
        }
        fn candidates(&self, history: &[usize]) -> Vec<usize> {
            (0..4).filter(|c| !history.contains(c)).collect()
        }
        fn score(&self, _history: &[usize], candidate: usize, dataset: &Dataset<u32>) -> f64 {
            dataset.values().filter(|&&v| v as usize % 4 == candidate).count() as f64
        }
    }

    struct SingletonOracle;

    impl ScoringOracle<u32> for SingletonOracle {
        fn rounds(&self) -> usize {
            1
        }
        fn candidates(&self, _history: &[usize]) -> Vec<usize> {
            vec![7]
        }
        fn score(&self, _history: &[usize], _candidate: usize, _dataset: &Dataset<u32>) -> f64 {
            0.0
        }
    }

    struct EmptyRoundOracle;

    impl ScoringOracle<u32> for EmptyRoundOracle {
        fn rounds(&self) -> usize {
            2
        }
        fn candidates(&self, history: &[usize]) -> Vec<usize> {
            if history.is_empty() {
                vec![0]
            } else {
                vec![]
            }
        }
        fn score(&self, _history: &[usize], _candidate: usize, _dataset: &Dataset<u32>) -> f64 {
            0.0
        }
    }

    struct FixedThresholds {
        queries: Vec<f64>,
        tau: f64,
    }

    impl ThresholdOracle<u32> for FixedThresholds {
        fn rounds(&self) -> usize {
            self.queries.len()
        }
        fn threshold(&self, _history: &[bool]) -> f64 {
            self.tau
        }
        fn query_value(&self, history: &[bool], _dataset: &Dataset<u32>) -> f64 {
            self.queries[history.len()]
        }
    }

    #[test]
    fn singleton_candidate_is_deterministic() {
        let d = Dataset::from_values(vec![1u32]);
        let mut rng = RandomSource::new(1, 0);
        for _ in 0..20 {
            let t = run_repeated_em(&SingletonOracle, &d, 1.0, 1.0, &mut rng).unwrap();
            assert_eq!(t.chosen, vec![7]);
        }
    }

    #[test]
    fn uniform_scores_make_all_transcripts_equally_likely() {
        // Empty dataset: every score is 0, so all 4*3 transcripts of a
        // 2-round run are equally likely.
        let d: Dataset<u32> = Dataset::empty();
        let oracle = ToyOracle { rounds: 2 };
        let mut rng = RandomSource::new(2, 0);
        let trials = 60_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..trials {
            let t = run_repeated_em(&oracle, &d, std::f64::consts::LN_2, 1.0, &mut rng).unwrap();
            *counts.entry(t.chosen).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 12);
        let expected = trials as f64 / 12.0;
        let stderr = (expected * (1.0 - 1.0 / 12.0)).sqrt();
        for (t, c) in counts {
            assert!(
                (c as f64 - expected).abs() < 4.0 * stderr,
                "transcript {t:?}: {c} vs {expected}"
            );
        }
    }

    #[test]
    fn empty_candidate_set_is_a_contract_violation() {
        let d: Dataset<u32> = Dataset::empty();
        let mut rng = RandomSource::new(3, 0);
        let err = run_repeated_em(&EmptyRoundOracle, &d, 1.0, 1.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
    }

    #[test]
    fn above_threshold_fires_when_query_exceeds_tau() {
        // Noise is nonnegative, so h > tau accepts with probability 1.
        let oracle = FixedThresholds { queries: vec![5.0, 5.0], tau: 4.0 };
        let d: Dataset<u32> = Dataset::empty();
        let mut rng = RandomSource::new(4, 0);
        for _ in 0..50 {
            let t = run_repeated_at(&oracle, &d, 1.0, 1.0, &mut rng).unwrap();
            assert_eq!(t.outcomes, vec![true, true]);
            assert!(t.noise.is_none());
        }
    }

    #[test]
    fn above_threshold_survival_probability() {
        // h = tau - t accepts iff theta > t: probability e^{-(eps0/delta) t}.
        let gap = 1.25;
        let eps0 = std::f64::consts::LN_2;
        let delta = 2.0;
        let oracle = FixedThresholds { queries: vec![3.0 - gap], tau: 3.0 };
        let d: Dataset<u32> = Dataset::empty();
        let mut rng = RandomSource::new(5, 0);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| {
                run_repeated_at(&oracle, &d, eps0, delta, &mut rng).unwrap().outcomes[0]
            })
            .count();
        let p = (-(eps0 / delta) * gap).exp();
        let freq = hits as f64 / trials as f64;
        let stderr = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * stderr, "freq {freq} vs {p}");
    }

    #[test]
    fn far_below_threshold_rarely_fires() {
        let oracle = FixedThresholds { queries: vec![0.0; 5], tau: 200.0 };
        let d: Dataset<u32> = Dataset::empty();
        let mut rng = RandomSource::new(6, 0);
        for _ in 0..200 {
            let t = run_repeated_at(&oracle, &d, 1.0, 1.0, &mut rng).unwrap();
            assert_eq!(t.outcomes, vec![false; 5]);
        }
    }

    #[test]
    fn traced_run_records_noise() {
        let oracle = FixedThresholds { queries: vec![1.0, 1.0, 1.0], tau: 2.0 };
        let d: Dataset<u32> = Dataset::empty();
        let mut rng = RandomSource::new(7, 0);
        let t = run_repeated_at_traced(&oracle, &d, 1.0, 1.0, &mut rng).unwrap();
        let noise = t.noise.unwrap();
        assert_eq!(noise.len(), 3);
        for (theta, &o) in noise.iter().zip(&t.outcomes) {
            assert_eq!(o, 1.0 + theta > 2.0);
        }
    }

    #[test]
    fn subsampled_run_works_on_empty_dataset() {
        let d: Dataset<u32> = Dataset::empty();
        let mut rng = RandomSource::new(8, 0);
        let t =
            run_subsampled_em(&ToyOracle { rounds: 1 }, &d, 0.5, 1.0, &mut rng).unwrap();
        assert_eq!(t.chosen.len(), 1);
    }
}
