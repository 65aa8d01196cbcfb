//! Exact verification of privacy claims and oracle contracts.
//!
//! Everything here works by enumeration: exact transcript laws for the two
//! engines (products of per-round softmax tables or exponential survival
//! factors), exact laws of subsampled mechanisms (mixtures over all
//! subsets), worst-case log-likelihood ratios over add/remove neighbor
//! pairs, and exhaustive checks of the monotonicity and realized-sensitivity
//! contracts. Probabilities are 64-bit floats with a 1e-9 audit slack; the
//! counterexample additionally carries an exact big-rational certificate
//! because its claim is a strict inequality.

use std::collections::BTreeMap;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Zero};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::em::exp_mech_distribution;
use crate::error::{Error, Result};
use crate::mechanisms::{ScoringOracle, ThresholdOracle};
use crate::submodular::{CardinalityGreedyOracle, ItemSet, UserFn};
use crate::subsample::SubsampleRate;

/// Tolerance absorbed by every exact comparison (f64 rounding).
pub const AUDIT_SLACK: f64 = 1e-9;

/// Default cap on enumerated transcript supports.
pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

/// An exact probability table over transcripts.
#[derive(Clone, Debug)]
pub struct OutcomeDistribution<K: Ord> {
    probs: BTreeMap<K, f64>,
}

impl<K: Ord + Clone> OutcomeDistribution<K> {
    /// Wrap a table, checking it sums to 1 within 1e-9.
    pub fn new(probs: BTreeMap<K, f64>) -> Result<Self> {
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > AUDIT_SLACK {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(OutcomeDistribution { probs })
    }

    pub fn prob(&self, outcome: &K) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.probs.iter().map(|(k, &p)| (k, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }
}

/// Exact transcript law of Repeated-EM: walk the adaptive tree, multiplying
/// per-round softmax probabilities.
pub fn exact_em_distribution<X>(
    oracle: &impl ScoringOracle<X>,
    dataset: &Dataset<X>,
    epsilon0: f64,
    delta_sens: f64,
    cap: usize,
) -> Result<OutcomeDistribution<Vec<usize>>> {
    let rate = epsilon0 / delta_sens;
    let mut probs = BTreeMap::new();
    let mut history = Vec::new();
    em_walk(oracle, dataset, rate, 1.0, &mut history, &mut probs, cap)?;
    OutcomeDistribution::new(probs)
}

fn em_walk<X>(
    oracle: &impl ScoringOracle<X>,
    dataset: &Dataset<X>,
    rate: f64,
    prob: f64,
    history: &mut Vec<usize>,
    out: &mut BTreeMap<Vec<usize>, f64>,
    cap: usize,
) -> Result<()> {
    if history.len() == oracle.rounds() {
        if out.len() >= cap {
            return Err(Error::CapacityExceeded(format!(
                "transcript support exceeds cap {cap}"
            )));
        }
        out.insert(history.clone(), prob);
        return Ok(());
    }
    let candidates = oracle.candidates(history);
    if candidates.is_empty() {
        return Err(Error::ContractViolation(format!(
            "oracle emitted an empty candidate set after {history:?}"
        )));
    }
    let scores: Vec<f64> =
        candidates.iter().map(|&c| oracle.score(history, c, dataset)).collect();
    let table = exp_mech_distribution(&scores, rate)?;
    for (&c, p) in candidates.iter().zip(table) {
        history.push(c);
        em_walk(oracle, dataset, rate, prob * p, history, out, cap)?;
        history.pop();
    }
    Ok(())
}

/// Exact transcript law of Repeated-AT via survival-function products.
/// Accept probability per round is `exp(-rate * max(0, tau - h))`;
/// zero-probability branches are pruned, so the support is exact.
pub fn exact_at_distribution<X>(
    oracle: &impl ThresholdOracle<X>,
    dataset: &Dataset<X>,
    epsilon0: f64,
    delta_sens: f64,
    cap: usize,
) -> Result<OutcomeDistribution<Vec<bool>>> {
    let rate = epsilon0 / delta_sens;
    let mut probs = BTreeMap::new();
    let mut history = Vec::new();
    at_walk(oracle, dataset, rate, 1.0, &mut history, &mut probs, cap)?;
    OutcomeDistribution::new(probs)
}

/// `Pr[h + Exp(rate) > tau]`.
pub fn accept_probability(rate: f64, h: f64, tau: f64) -> f64 {
    (-rate * (tau - h).max(0.0)).exp()
}

fn at_walk<X>(
    oracle: &impl ThresholdOracle<X>,
    dataset: &Dataset<X>,
    rate: f64,
    prob: f64,
    history: &mut Vec<bool>,
    out: &mut BTreeMap<Vec<bool>, f64>,
    cap: usize,
) -> Result<()> {
    if history.len() == oracle.rounds() {
        if out.len() >= cap {
            return Err(Error::CapacityExceeded(format!(
                "transcript support exceeds cap {cap}"
            )));
        }
        out.insert(history.clone(), prob);
        return Ok(());
    }
    let tau = oracle.threshold(history);
    let h = oracle.query_value(history, dataset);
    let p_top = accept_probability(rate, h, tau);
    for (outcome, p) in [(true, p_top), (false, 1.0 - p_top)] {
        if p > 0.0 {
            history.push(outcome);
            at_walk(oracle, dataset, rate, prob * p, history, out, cap)?;
            history.pop();
        }
    }
    Ok(())
}

/// Exact law of a subsampled mechanism: the mixture of the inner law over
/// all `2^n` subsets, weighted by `p^|kept| (1-p)^(n-|kept|)`.
pub fn exact_subsampled_distribution<X: Clone, K: Ord + Clone>(
    inner: impl Fn(&Dataset<X>) -> Result<OutcomeDistribution<K>>,
    dataset: &Dataset<X>,
    p: SubsampleRate,
    cap: usize,
) -> Result<OutcomeDistribution<K>> {
    let n = dataset.len();
    if n > 25 {
        return Err(Error::CapacityExceeded(format!(
            "subset enumeration over {n} records is infeasible"
        )));
    }
    let p = p.value();
    let mut probs: BTreeMap<K, f64> = BTreeMap::new();
    for mask in 0u64..(1u64 << n) {
        let keep: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let kept = mask.count_ones() as i32;
        let weight = p.powi(kept) * (1.0 - p).powi(n as i32 - kept);
        if weight == 0.0 {
            continue;
        }
        let law = inner(&dataset.subset(&keep))?;
        for (outcome, prob) in law.iter() {
            *probs.entry(outcome.clone()).or_insert(0.0) += weight * prob;
            if probs.len() > cap {
                return Err(Error::CapacityExceeded(format!(
                    "mixture support exceeds cap {cap}"
                )));
            }
        }
    }
    OutcomeDistribution::new(probs)
}

/// Which DP inequality to verify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DpMode {
    /// One-sided: only `Pr[M(D' + x) = o] <= e^eps Pr[M(D') = o]`.
    Add,
    /// Both directions of the add/remove neighbor relation.
    TwoSided,
}

/// Worst-case log-likelihood ratios over a dataset family.
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub claimed_eps: f64,
    pub max_add_ratio: f64,
    pub max_remove_ratio: f64,
    pub witness: Option<String>,
    pub pass: bool,
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// All multisets of up to `max_n` records drawn from `domain`, as sorted
/// index vectors.
pub fn enumerate_multisets(domain_len: usize, max_n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_n {
        let mut next = Vec::new();
        for base in &frontier {
            let start = base.last().copied().unwrap_or(0);
            for j in start..domain_len {
                let mut grown = base.clone();
                grown.push(j);
                next.push(grown);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn dataset_from_indices<X: Clone>(domain: &[X], indices: &[usize]) -> Dataset<X> {
    Dataset::from_values(indices.iter().map(|&j| domain[j].clone()))
}

/// Verify a DP claim exactly: maximize the signed log-ratio over every
/// neighbor pair within the family of multisets of up to `max_n` records
/// from `domain`, and over every transcript. Passes iff the checked ratios
/// stay at or below `claimed_eps + 1e-9`. A transcript carrying positive
/// probability on one side and zero on the other reports an infinite ratio.
pub fn verify_dp<X, K>(
    mechanism: impl Fn(&Dataset<X>) -> Result<OutcomeDistribution<K>>,
    domain: &[X],
    max_n: usize,
    claimed_eps: f64,
    mode: DpMode,
) -> Result<AuditReport>
where
    X: Clone + Debug,
    K: Ord + Clone + Debug,
{
    if max_n == 0 {
        return Err(Error::Precondition("need max_n >= 1 to form neighbors".into()));
    }
    fn law_of<'a, X: Clone, K: Ord + Clone>(
        laws: &'a mut BTreeMap<Vec<usize>, OutcomeDistribution<K>>,
        mechanism: &impl Fn(&Dataset<X>) -> Result<OutcomeDistribution<K>>,
        domain: &[X],
        indices: &[usize],
    ) -> Result<()> {
        if !laws.contains_key(indices) {
            let law = mechanism(&dataset_from_indices(domain, indices))?;
            laws.insert(indices.to_vec(), law);
        }
        Ok(())
    }

    let mut laws: BTreeMap<Vec<usize>, OutcomeDistribution<K>> = BTreeMap::new();
    let mut max_add = f64::NEG_INFINITY;
    let mut max_remove = f64::NEG_INFINITY;
    let mut add_witness = None;
    let mut remove_witness = None;
    for smaller in enumerate_multisets(domain.len(), max_n - 1) {
        law_of(&mut laws, &mechanism, domain, &smaller)?;
        for j in 0..domain.len() {
            let mut bigger = smaller.clone();
            bigger.push(j);
            bigger.sort_unstable();
            law_of(&mut laws, &mechanism, domain, &bigger)?;
            let small_law = &laws[&smaller];
            let big_law = &laws[&bigger];
            let mut outcomes: Vec<&K> = small_law.iter().map(|(k, _)| k).collect();
            outcomes.extend(big_law.iter().map(|(k, _)| k));
            outcomes.sort();
            outcomes.dedup();
            for outcome in outcomes {
                let p_big = big_law.prob(outcome);
                let p_small = small_law.prob(outcome);
                let add = log_ratio(p_big, p_small);
                let remove = log_ratio(p_small, p_big);
                if add > max_add {
                    max_add = add;
                    add_witness = Some(format!(
                        "add direction: D'={smaller:?}, x=domain[{j}], \
                         transcript {outcome:?}, log-ratio {add}"
                    ));
                }
                if remove > max_remove {
                    max_remove = remove;
                    remove_witness = Some(format!(
                        "remove direction: D'={smaller:?}, x=domain[{j}], \
                         transcript {outcome:?}, log-ratio {remove}"
                    ));
                }
            }
        }
    }
    let (checked, witness) = match mode {
        DpMode::Add => (max_add, add_witness),
        DpMode::TwoSided => {
            if max_add >= max_remove {
                (max_add, add_witness)
            } else {
                (max_remove, remove_witness)
            }
        }
    };
    Ok(AuditReport {
        claimed_eps,
        max_add_ratio: max_add,
        max_remove_ratio: max_remove,
        witness,
        pass: checked <= claimed_eps + AUDIT_SLACK,
    })
}

fn log_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        f64::NEG_INFINITY
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num.ln() - den.ln()
    }
}

/// Outcome of an exhaustive oracle-contract check.
#[derive(Clone, Debug, Serialize)]
pub struct ContractReport {
    pub pass: bool,
    pub witness: Option<String>,
}

/// Exhaustively verify the Repeated-EM oracle contracts over every neighbor
/// pair in the multiset family and every transcript: monotonicity of each
/// round's scores under record addition, and the realized-sensitivity
/// telescoping bound `sum_i |q_i(c_i; D) - q_i(c_i; D')| <= delta`.
pub fn contract_check_em<X: Clone + Debug>(
    oracle: &impl ScoringOracle<X>,
    domain: &[X],
    max_n: usize,
    delta: f64,
) -> ContractReport {
    for smaller_idx in enumerate_multisets(domain.len(), max_n.saturating_sub(1)) {
        let smaller = dataset_from_indices(domain, &smaller_idx);
        for (j, x) in domain.iter().enumerate() {
            let bigger = smaller.with_added(x.clone());
            let mut history = Vec::new();
            if let Some(witness) = em_contract_walk(
                oracle,
                &bigger,
                &smaller,
                delta,
                &mut history,
                0.0,
                &format!("D'={smaller_idx:?}, x=domain[{j}]"),
            ) {
                return ContractReport { pass: false, witness: Some(witness) };
            }
        }
    }
    ContractReport { pass: true, witness: None }
}

fn em_contract_walk<X>(
    oracle: &impl ScoringOracle<X>,
    bigger: &Dataset<X>,
    smaller: &Dataset<X>,
    delta: f64,
    history: &mut Vec<usize>,
    realized: f64,
    pair: &str,
) -> Option<String> {
    if history.len() == oracle.rounds() {
        if realized > delta + AUDIT_SLACK {
            return Some(format!(
                "realized sensitivity {realized} > {delta} on transcript {history:?} ({pair})"
            ));
        }
        return None;
    }
    let candidates = oracle.candidates(history);
    for &c in &candidates {
        let q_big = oracle.score(history, c, bigger);
        let q_small = oracle.score(history, c, smaller);
        if q_big < q_small - AUDIT_SLACK {
            return Some(format!(
                "monotonicity violated at history {history:?}, candidate {c}: \
                 {q_small} -> {q_big} ({pair})"
            ));
        }
        history.push(c);
        let step = (q_big - q_small).abs();
        let witness =
            em_contract_walk(oracle, bigger, smaller, delta, history, realized + step, pair);
        history.pop();
        if witness.is_some() {
            return witness;
        }
    }
    None
}

/// Exhaustive contract check for Repeated-AT oracles: monotonicity of every
/// query under record addition, and
/// `sum_{i : o_i = top} |h_i(D) - h_i(D')| <= delta` over all outcome
/// sequences.
pub fn contract_check_at<X: Clone + Debug>(
    oracle: &impl ThresholdOracle<X>,
    domain: &[X],
    max_n: usize,
    delta: f64,
) -> ContractReport {
    for smaller_idx in enumerate_multisets(domain.len(), max_n.saturating_sub(1)) {
        let smaller = dataset_from_indices(domain, &smaller_idx);
        for (j, x) in domain.iter().enumerate() {
            let bigger = smaller.with_added(x.clone());
            let mut history = Vec::new();
            if let Some(witness) = at_contract_walk(
                oracle,
                &bigger,
                &smaller,
                delta,
                &mut history,
                0.0,
                &format!("D'={smaller_idx:?}, x=domain[{j}]"),
            ) {
                return ContractReport { pass: false, witness: Some(witness) };
            }
        }
    }
    ContractReport { pass: true, witness: None }
}

fn at_contract_walk<X>(
    oracle: &impl ThresholdOracle<X>,
    bigger: &Dataset<X>,
    smaller: &Dataset<X>,
    delta: f64,
    history: &mut Vec<bool>,
    realized: f64,
    pair: &str,
) -> Option<String> {
    if history.len() == oracle.rounds() {
        if realized > delta + AUDIT_SLACK {
            return Some(format!(
                "realized sensitivity {realized} > {delta} on outcomes {history:?} ({pair})"
            ));
        }
        return None;
    }
    let h_big = oracle.query_value(history, bigger);
    let h_small = oracle.query_value(history, smaller);
    if h_big < h_small - AUDIT_SLACK {
        return Some(format!(
            "monotonicity violated at outcomes {history:?}: {h_small} -> {h_big} ({pair})"
        ));
    }
    let step = (h_big - h_small).abs();
    for outcome in [true, false] {
        history.push(outcome);
        let charged = if outcome { realized + step } else { realized };
        let witness = at_contract_walk(oracle, bigger, smaller, delta, history, charged, pair);
        history.pop();
        if witness.is_some() {
            return witness;
        }
    }
    None
}

/// The constructive counterexample: without subsampling, the repeated
/// exponential mechanism at per-round budget `eps` is not `eps'`-DP for any
/// `eps' < L eps`.
#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub rounds: usize,
    pub eps: f64,
    pub eps_prime: f64,
    pub universe: usize,
    /// `ln(Pr[M(empty) = o] / Pr[M({x}) = o])` from the closed-form product.
    pub closed_form_log_ratio: f64,
    /// The same ratio recomputed from two exact transcript laws.
    pub enumerated_log_ratio: f64,
    /// Strict `ratio > e^eps_prime`, certified in exact rational arithmetic.
    pub exceeds_strictly: bool,
}

/// Build the counterexample instance and evaluate the likelihood ratio of
/// the distinguished transcript three ways: the closed-form product, the
/// exact enumerated laws, and an exact rational lower bound that certifies
/// the strict inequality.
///
/// The instance: universe `[m]` with
/// `m = ceil(1 + (e^eps - 1) L / (e^eps - e^(eps'/L)))`, a single user whose
/// function is `min(1, |S intersect [m - L]|)`, and the transcript that
/// picks the last `L` items in order. `m_cap` guards the blow-up as
/// `eps' -> L eps`.
pub fn appendix_c_counterexample(
    rounds: usize,
    eps: f64,
    eps_prime: f64,
    m_cap: usize,
) -> Result<CounterexampleReport> {
    if rounds == 0 || !(eps > 0.0) || !(eps_prime > 0.0) {
        return Err(Error::InvalidParameter("need rounds >= 1 and positive budgets".into()));
    }
    if eps_prime >= rounds as f64 * eps {
        return Err(Error::InvalidParameter(format!(
            "eps' = {eps_prime} must be below L*eps = {}",
            rounds as f64 * eps
        )));
    }
    let l = rounds as f64;
    let m_real = 1.0 + (eps.exp() - 1.0) * l / (eps.exp() - (eps_prime / l).exp());
    let m = m_real.ceil() as usize;
    if m > m_cap {
        return Err(Error::CapacityExceeded(format!(
            "counterexample universe m = {m} exceeds cap {m_cap}"
        )));
    }

    // Closed form: product over rounds of
    // (e^eps (m - L) + L - i + 1) / (m - i + 1).
    let covered = (m - rounds) as f64;
    let mut closed_form_log_ratio = 0.0;
    for i in 1..=rounds {
        let numer = eps.exp() * covered + (rounds - i + 1) as f64;
        let denom = (m - i + 1) as f64;
        closed_form_log_ratio += numer.ln() - denom.ln();
    }

    // Exact enumeration: greedy over [m] with the single-user dataset versus
    // the empty dataset; the distinguished transcript picks items
    // m-L, ..., m-1 in order.
    let user = UserFn::BudgetAdditive {
        links: ItemSet::from_items(0..m - rounds),
        weight: 1.0,
    };
    let with_user = Dataset::from_values(vec![user]);
    let empty: Dataset<UserFn> = Dataset::empty();
    let oracle = CardinalityGreedyOracle { m, k: rounds };
    let cap = DEFAULT_SUPPORT_CAP;
    let law_with = exact_em_distribution(&oracle, &with_user, eps, 1.0, cap)?;
    let law_empty = exact_em_distribution(&oracle, &empty, eps, 1.0, cap)?;
    let outcome: Vec<usize> = (m - rounds..m).collect();
    let enumerated_log_ratio = law_empty.prob(&outcome).ln() - law_with.prob(&outcome).ln();

    // Rational certificate: with elo <= e^eps and ehi >= e^eps', showing
    // prod_i (elo (m-L) + L - i + 1)/(m - i + 1) > ehi proves the strict
    // claim (the product is increasing in the first factor's weight).
    let elo = exp_rational_bounds(eps)?.0;
    let ehi = exp_rational_bounds(eps_prime)?.1;
    let big = |v: usize| BigRational::from_integer(BigInt::from(v));
    let mut ratio_lower = BigRational::one();
    for i in 1..=rounds {
        let numer = &elo * big(m - rounds) + big(rounds - i + 1);
        let denom = big(m - i + 1);
        ratio_lower *= numer / denom;
    }
    let exceeds_strictly = ratio_lower > ehi;

    Ok(CounterexampleReport {
        rounds,
        eps,
        eps_prime,
        universe: m,
        closed_form_log_ratio,
        enumerated_log_ratio,
        exceeds_strictly,
    })
}

/// Exact rational lower and upper bounds on `e^x` for `x >= 0` via Taylor
/// partial sums; the tail is bounded by twice the first omitted term, valid
/// while `x <= (N + 2) / 2`.
fn exp_rational_bounds(x: f64) -> Result<(BigRational, BigRational)> {
    let x = BigRational::from_f64(x)
        .ok_or_else(|| Error::InvalidParameter("budget is not finite".into()))?;
    if x < BigRational::zero() {
        return Err(Error::InvalidParameter("need x >= 0".into()));
    }
    let terms = 40usize;
    if x > BigRational::from_integer(BigInt::from((terms + 2) / 2)) {
        return Err(Error::InvalidParameter("x too large for the tail bound".into()));
    }
    let mut term = BigRational::one();
    let mut lower = BigRational::one();
    for j in 1..=terms {
        term = term * &x / BigRational::from_integer(BigInt::from(j));
        lower += term.clone();
    }
    let tail = term * &x / BigRational::from_integer(BigInt::from(terms + 1))
        * BigRational::from_integer(BigInt::from(2));
    let upper = lower.clone() + tail;
    Ok((lower, upper))
}
