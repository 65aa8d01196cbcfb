//! Decomposable monotone submodular maximization.
//!
//! The objective is `F_D(S) = sum_{x in D} f_x(S)` where every per-user
//! function `f_x` maps subsets of the universe `[m]` into `[0, 1]` and is
//! monotone submodular. Lambda-decomposable inputs must be rescaled into
//! `[0, 1]` by the caller.
//!
//! Two pipelines:
//!
//! * cardinality constraint: subsampled repeated exponential mechanism over
//!   marginal gains ([`dp_submod_greedy_cardinality`]);
//! * matroid constraint: continuous greedy over a sampled proxy of the
//!   multilinear extension, swap rounding, and a private selection among the
//!   rounded sets ([`dp_submod_matroid`]).

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PrivacyParams};
use crate::em::exp_mech;
use crate::error::{Error, Result};
use crate::mechanisms::{run_subsampled_em, ScoringOracle};
use crate::rng::RandomSource;
use crate::subsample::{poisson_subsample, rate_for_target};

/// A subset of the universe `[m]`, `m <= 64`, as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemSet(pub u64);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub fn singleton(item: usize) -> Self {
        ItemSet(1u64 << item)
    }

    pub fn from_items<I: IntoIterator<Item = usize>>(items: I) -> Self {
        ItemSet(items.into_iter().fold(0u64, |acc, i| acc | (1u64 << i)))
    }

    pub fn full(m: usize) -> Self {
        if m == 64 {
            ItemSet(u64::MAX)
        } else {
            ItemSet((1u64 << m) - 1)
        }
    }

    pub fn contains(self, item: usize) -> bool {
        self.0 & (1u64 << item) != 0
    }

    pub fn insert(&mut self, item: usize) {
        self.0 |= 1u64 << item;
    }

    pub fn remove(&mut self, item: usize) {
        self.0 &= !(1u64 << item);
    }

    pub fn with(self, item: usize) -> Self {
        ItemSet(self.0 | (1u64 << item))
    }

    pub fn without(self, item: usize) -> Self {
        ItemSet(self.0 & !(1u64 << item))
    }

    pub fn union(self, other: ItemSet) -> Self {
        ItemSet(self.0 | other.0)
    }

    pub fn intersect(self, other: ItemSet) -> Self {
        ItemSet(self.0 & other.0)
    }

    pub fn minus(self, other: ItemSet) -> Self {
        ItemSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn items(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.0 & (1u64 << i) != 0)
    }
}

/// A monotone submodular per-user function into `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum UserFn {
    /// 1 if the set hits `links`, else 0.
    Coverage { links: ItemSet },
    /// `min(1, weight * |S intersect links|)`.
    BudgetAdditive { links: ItemSet, weight: f64 },
}

impl UserFn {
    pub fn value(&self, s: ItemSet) -> f64 {
        match self {
            UserFn::Coverage { links } => {
                if s.intersect(*links).is_empty() {
                    0.0
                } else {
                    1.0
                }
            }
            UserFn::BudgetAdditive { links, weight } => {
                (weight * s.intersect(*links).len() as f64).min(1.0)
            }
        }
    }
}

impl Serialize for ItemSet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.items().collect::<Vec<_>>().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ItemSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(de)?;
        if let Some(&bad) = items.iter().find(|&&i| i >= 64) {
            return Err(serde::de::Error::custom(format!("item {bad} out of range")));
        }
        Ok(ItemSet::from_items(items))
    }
}

/// Total objective `F_D(S)`.
pub fn objective_value(dataset: &Dataset<UserFn>, s: ItemSet) -> f64 {
    dataset.values().map(|f| f.value(s)).sum()
}

/// Marginal gain `F_D(S + u) - F_D(S)`.
pub fn objective_marginal(dataset: &Dataset<UserFn>, s: ItemSet, item: usize) -> f64 {
    let with = s.with(item);
    dataset.values().map(|f| f.value(with) - f.value(s)).sum()
}

/// Exhaustively verify that `f` is monotone submodular with range `[0, 1]`
/// over `2^[m]`. Feasible for `m <= 12`.
pub fn check_monotone_submodular(f: &UserFn, m: usize) -> Result<()> {
    if m > 12 {
        return Err(Error::CapacityExceeded(format!(
            "exhaustive submodularity check limited to m <= 12, got {m}"
        )));
    }
    let tol = 1e-12;
    for mask in 0..(1u64 << m) {
        let s = ItemSet(mask);
        let v = f.value(s);
        if !(0.0 - tol..=1.0 + tol).contains(&v) {
            return Err(Error::InvalidInstance(format!(
                "value {v} outside [0, 1] at {s:?}"
            )));
        }
    }
    // Submodularity (with v ranging outside T) implies both properties are
    // covered by scanning S subseteq T pairs.
    for t_mask in 0..(1u64 << m) {
        let t = ItemSet(t_mask);
        // All submasks of t.
        let mut s_mask = t_mask;
        loop {
            let s = ItemSet(s_mask);
            for v in 0..m {
                if t.contains(v) {
                    continue;
                }
                let gain_s = f.value(s.with(v)) - f.value(s);
                let gain_t = f.value(t.with(v)) - f.value(t);
                if gain_s < -tol {
                    return Err(Error::InvalidInstance(format!(
                        "not monotone: adding {v} to {s:?} loses {gain_s}"
                    )));
                }
                if gain_s < gain_t - tol {
                    return Err(Error::InvalidInstance(format!(
                        "not submodular at S={s:?}, T={t:?}, v={v}"
                    )));
                }
            }
            if s_mask == 0 {
                break;
            }
            s_mask = (s_mask - 1) & t_mask;
        }
    }
    Ok(())
}

/// A matroid over `[m]` given by its independence oracle. Built-ins: uniform
/// (cardinality) and partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Matroid {
    Uniform { m: usize, k: usize },
    Partition { m: usize, blocks: Vec<ItemSet>, budgets: Vec<usize> },
}

impl Matroid {
    pub fn uniform(m: usize, k: usize) -> Result<Self> {
        if m == 0 || m > 64 || k > m {
            return Err(Error::InvalidParameter(format!(
                "uniform matroid needs 0 < m <= 64 and k <= m, got m={m}, k={k}"
            )));
        }
        Ok(Matroid::Uniform { m, k })
    }

    pub fn partition(m: usize, blocks: Vec<ItemSet>, budgets: Vec<usize>) -> Result<Self> {
        if m == 0 || m > 64 {
            return Err(Error::InvalidParameter(format!("need 0 < m <= 64, got {m}")));
        }
        if blocks.len() != budgets.len() {
            return Err(Error::InvalidParameter(
                "blocks and budgets must have equal length".into(),
            ));
        }
        let mut seen = ItemSet::EMPTY;
        for b in &blocks {
            if !seen.intersect(*b).is_empty() {
                return Err(Error::InvalidInstance("blocks must be disjoint".into()));
            }
            seen = seen.union(*b);
        }
        if seen != ItemSet::full(m) {
            return Err(Error::InvalidInstance("blocks must cover [m]".into()));
        }
        Ok(Matroid::Partition { m, blocks, budgets })
    }

    pub fn ground_size(&self) -> usize {
        match self {
            Matroid::Uniform { m, .. } | Matroid::Partition { m, .. } => *m,
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Matroid::Uniform { k, .. } => *k,
            Matroid::Partition { blocks, budgets, .. } => blocks
                .iter()
                .zip(budgets)
                .map(|(b, &cap)| b.len().min(cap))
                .sum(),
        }
    }

    pub fn is_independent(&self, s: ItemSet) -> bool {
        match self {
            Matroid::Uniform { m, k } => s.is_subset_of(ItemSet::full(*m)) && s.len() <= *k,
            Matroid::Partition { m, blocks, budgets } => {
                s.is_subset_of(ItemSet::full(*m))
                    && blocks
                        .iter()
                        .zip(budgets)
                        .all(|(b, &cap)| s.intersect(*b).len() <= cap)
            }
        }
    }
}

/// Fixed uniform draws `z^1..z^s` over `[0, 1]^m`, shared by all evaluations
/// of the sampled multilinear proxy.
#[derive(Clone, Debug)]
pub struct MultilinearSamples {
    m: usize,
    draws: Vec<Vec<f64>>,
}

impl MultilinearSamples {
    pub fn sample(s: usize, m: usize, rng: &mut RandomSource) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidParameter("need at least one draw".into()));
        }
        let draws = (0..s).map(|_| (0..m).map(|_| rng.uniform()).collect()).collect();
        Ok(MultilinearSamples { m, draws })
    }

    pub fn count(&self) -> usize {
        self.draws.len()
    }

    fn threshold_set(&self, j: usize, y: &[f64]) -> ItemSet {
        let mut s = ItemSet::EMPTY;
        for (u, (&z, &yu)) in self.draws[j].iter().zip(y).enumerate() {
            if z < yu {
                s.insert(u);
            }
        }
        s
    }
}

/// Sampled proxy for the multilinear extension:
/// `G^z(y) = (1/s) * sum_j F_D({u : z^j_u < y_u})`.
pub fn multilinear_estimate(
    dataset: &Dataset<UserFn>,
    samples: &MultilinearSamples,
    y: &[f64],
) -> Result<f64> {
    check_point(samples.m, y)?;
    let s = samples.count();
    let total: f64 =
        (0..s).map(|j| objective_value(dataset, samples.threshold_set(j, y))).sum();
    Ok(total / s as f64)
}

/// Exact multilinear extension by full subset enumeration, `m <= 20`.
pub fn exact_multilinear(dataset: &Dataset<UserFn>, m: usize, y: &[f64]) -> Result<f64> {
    check_point(m, y)?;
    if m > 20 {
        return Err(Error::CapacityExceeded(format!(
            "exact multilinear enumeration limited to m <= 20, got {m}"
        )));
    }
    let mut total = 0.0;
    for mask in 0..(1u64 << m) {
        let mut prob = 1.0;
        for (u, &yu) in y.iter().enumerate() {
            prob *= if mask & (1 << u) != 0 { yu } else { 1.0 - yu };
        }
        if prob > 0.0 {
            total += prob * objective_value(dataset, ItemSet(mask));
        }
    }
    Ok(total)
}

fn check_point(m: usize, y: &[f64]) -> Result<()> {
    if y.len() != m {
        return Err(Error::InvalidParameter(format!(
            "point has dimension {}, expected {m}",
            y.len()
        )));
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter("point must lie in [0, 1]^m".into()));
    }
    Ok(())
}

/// Number of multilinear draws suggested by the utility analysis:
/// `6 k^2 T^4 ln(m / beta)`.
pub fn multilinear_sample_count(k: usize, t_steps: usize, m: usize, beta: f64) -> usize {
    let s = 6.0 * (k * k) as f64 * (t_steps as f64).powi(4) * (m as f64 / beta).ln();
    s.ceil().max(1.0) as usize
}

/// A point of the matroid polytope together with the explicit convex
/// combination that produced it.
#[derive(Clone, Debug)]
pub struct FractionalPoint {
    y: Vec<f64>,
    certificate: Vec<(f64, ItemSet)>,
}

impl FractionalPoint {
    /// Validates that the certificate members are independent, weights are
    /// nonnegative and sum to at most `1 + 1e-9`, and `y` equals the weighted
    /// sum of the members' indicators.
    pub fn new(y: Vec<f64>, certificate: Vec<(f64, ItemSet)>, matroid: &Matroid) -> Result<Self> {
        if certificate.is_empty() {
            return Err(Error::ContractViolation("empty certificate".into()));
        }
        let mut weight_sum = 0.0;
        for (w, b) in &certificate {
            if !(*w >= 0.0) {
                return Err(Error::ContractViolation(format!("negative weight {w}")));
            }
            if !matroid.is_independent(*b) {
                return Err(Error::ContractViolation(format!(
                    "certificate member {b:?} is not independent"
                )));
            }
            weight_sum += w;
        }
        if weight_sum > 1.0 + 1e-9 {
            return Err(Error::ContractViolation(format!(
                "certificate weights sum to {weight_sum} > 1"
            )));
        }
        let mut recon = vec![0.0; y.len()];
        for (w, b) in &certificate {
            for u in b.items() {
                recon[u] += w;
            }
        }
        for (u, (&a, &b)) in y.iter().zip(&recon).enumerate() {
            if (a - b).abs() > 1e-9 {
                return Err(Error::ContractViolation(format!(
                    "coordinate {u}: y={a} but certificate reconstructs {b}"
                )));
            }
        }
        Ok(FractionalPoint { y, certificate })
    }

    pub fn point(&self) -> &[f64] {
        &self.y
    }

    pub fn certificate(&self) -> &[(f64, ItemSet)] {
        &self.certificate
    }
}

/// Repeated-EM oracle for the cardinality greedy: candidates are the
/// remaining items, scores are marginal gains of `F_D`.
pub struct CardinalityGreedyOracle {
    pub m: usize,
    pub k: usize,
}

impl ScoringOracle<UserFn> for CardinalityGreedyOracle {
    fn rounds(&self) -> usize {
        self.k
    }

    fn candidates(&self, history: &[usize]) -> Vec<usize> {
        (0..self.m).filter(|c| !history.contains(c)).collect()
    }

    fn score(&self, history: &[usize], candidate: usize, dataset: &Dataset<UserFn>) -> f64 {
        let chosen = ItemSet::from_items(history.iter().copied());
        objective_marginal(dataset, chosen, candidate)
    }
}

/// Private submodular maximization under a cardinality constraint: one
/// Poisson subsample at `p = 1 - e^-epsilon`, then `k` rounds of the
/// exponential mechanism (at `ln 2`, realized sensitivity 1) over marginal
/// gains evaluated on the subsample.
pub fn dp_submod_greedy_cardinality(
    dataset: &Dataset<UserFn>,
    m: usize,
    k: usize,
    params: &PrivacyParams,
    rng: &mut RandomSource,
) -> Result<ItemSet> {
    params.validate()?;
    if m == 0 || m > 64 {
        return Err(Error::InvalidParameter(format!("need 0 < m <= 64, got {m}")));
    }
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= m, got k={k}, m={m}"
        )));
    }
    let oracle = CardinalityGreedyOracle { m, k };
    let transcript = run_subsampled_em(&oracle, dataset, params.epsilon, 1.0, rng)?;
    Ok(ItemSet::from_items(transcript.chosen))
}

/// Continuous greedy with private selections (one-sided DP budget
/// `epsilon0`). `T = ceil(1/eta)` outer steps of weight `eta` each; `eta`
/// must divide 1 so the certificate weights sum to 1.
pub fn priv_cont_greedy(
    dataset: &Dataset<UserFn>,
    matroid: &Matroid,
    epsilon0: f64,
    eta: f64,
    samples: usize,
    rng: &mut RandomSource,
) -> Result<FractionalPoint> {
    let m = matroid.ground_size();
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must lie in (0, 1], got {eta}"
        )));
    }
    let t_steps = (1.0 / eta - 1e-9).ceil().max(1.0) as usize;
    if t_steps as f64 * eta > 1.0 + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "step size {eta} does not divide 1; certificate weights would exceed 1"
        )));
    }
    let z = MultilinearSamples::sample(samples, m, rng)?;
    let s_count = z.count();
    let mut y = vec![0.0; m];
    // Threshold sets maintained incrementally: coordinates only grow.
    let mut sets: Vec<ItemSet> = vec![ItemSet::EMPTY; s_count];
    let mut certificate = Vec::with_capacity(t_steps);
    for _ in 0..t_steps {
        let mut base = ItemSet::EMPTY;
        for _ in 0..matroid.rank() {
            let candidates: Vec<usize> = (0..m)
                .filter(|&u| !base.contains(u) && matroid.is_independent(base.with(u)))
                .collect();
            if candidates.is_empty() {
                break;
            }
            let scores: Vec<f64> = candidates
                .iter()
                .map(|&u| {
                    // G^z(y + eta*1_u) - G^z(y): only draws whose z_u falls in
                    // [y_u, y_u + eta) change their threshold set, each by the
                    // marginal of u.
                    let lo = y[u];
                    let hi = y[u] + eta;
                    let mut total = 0.0;
                    for (j, set) in sets.iter().enumerate() {
                        let zu = z.draws[j][u];
                        if zu >= lo && zu < hi {
                            total += objective_marginal(dataset, *set, u);
                        }
                    }
                    total / s_count as f64
                })
                .collect();
            let u_star = exp_mech(&candidates, &scores, epsilon0, rng)?;
            y[u_star] += eta;
            for (j, set) in sets.iter_mut().enumerate() {
                if !set.contains(u_star) && z.draws[j][u_star] < y[u_star] {
                    set.insert(u_star);
                }
            }
            base.insert(u_star);
        }
        certificate.push((eta, base));
    }
    FractionalPoint::new(y, certificate, matroid)
}

/// Randomized rounding of a matroid-polytope point into a single independent
/// set, by pairwise merging the certificate's weighted sets.
///
/// Each merge extends both sets to bases of the matroid restricted to their
/// union, then repeatedly exchanges single elements, keeping the left set's
/// element with probability proportional to its accumulated weight. The fold
/// runs left to right over the certificate.
pub fn swap_round(
    point: &FractionalPoint,
    matroid: &Matroid,
    rng: &mut RandomSource,
) -> Result<ItemSet> {
    let cert = point.certificate();
    for (_, b) in cert {
        if !matroid.is_independent(*b) {
            return Err(Error::ContractViolation(format!(
                "certificate member {b:?} is not independent"
            )));
        }
    }
    let (mut weight, mut merged) = cert[0];
    for &(w, b) in &cert[1..] {
        merged = merge_weighted(weight, merged, w, b, matroid, rng)?;
        weight += w;
    }
    Ok(merged)
}

fn merge_weighted(
    w1: f64,
    b1: ItemSet,
    w2: f64,
    b2: ItemSet,
    matroid: &Matroid,
    rng: &mut RandomSource,
) -> Result<ItemSet> {
    let union = b1.union(b2);
    let mut left = extend_to_restricted_base(b1, union, matroid);
    let mut right = extend_to_restricted_base(b2, union, matroid);
    debug_assert_eq!(left.len(), right.len());
    while left != right {
        let i = left.minus(right).items().next().expect("sets differ");
        let j = right
            .minus(left)
            .items()
            .find(|&j| {
                matroid.is_independent(left.without(i).with(j))
                    && matroid.is_independent(right.without(j).with(i))
            })
            .ok_or_else(|| {
                Error::ContractViolation(
                    "independence oracle admits no basis exchange; matroid axioms violated"
                        .into(),
                )
            })?;
        if rng.uniform() * (w1 + w2) < w1 {
            right = right.without(j).with(i);
        } else {
            left = left.without(i).with(j);
        }
    }
    Ok(left)
}

/// Grow `s` into a base of the matroid restricted to `ground` by one
/// ascending greedy pass (supersets of dependent sets stay dependent, so a
/// single pass reaches a maximal independent subset).
fn extend_to_restricted_base(s: ItemSet, ground: ItemSet, matroid: &Matroid) -> ItemSet {
    let mut out = s;
    for u in ground.minus(s).items() {
        if matroid.is_independent(out.with(u)) {
            out.insert(u);
        }
    }
    out
}

/// Private submodular maximization under a matroid constraint.
///
/// One Poisson subsample at `p = 1 - e^-epsilon`; on the subsample, a
/// `ln(2)/2`-budget continuous greedy (step `eta/4`, confidence `beta/6`),
/// `ceil(20 ln(6/beta) / eta)` independent swap roundings, and a `ln(2)/2`
/// exponential mechanism over the rounded sets scored by the subsampled
/// objective. `samples = None` uses [`multilinear_sample_count`].
pub fn dp_submod_matroid(
    dataset: &Dataset<UserFn>,
    matroid: &Matroid,
    params: &PrivacyParams,
    samples: Option<usize>,
    rng: &mut RandomSource,
) -> Result<ItemSet> {
    params.validate()?;
    let ln2 = std::f64::consts::LN_2;
    let inner_eta = params.eta / 2.0;
    let inner_beta = params.beta / 2.0;
    let frac_eta = inner_eta / 2.0;
    let frac_beta = inner_beta / 3.0;

    let p = rate_for_target(params.epsilon)?;
    let sample = poisson_subsample(dataset, p, rng);

    let m = matroid.ground_size();
    let t_steps = (1.0 / frac_eta - 1e-9).ceil().max(1.0) as usize;
    let s_count = samples
        .unwrap_or_else(|| multilinear_sample_count(matroid.rank(), t_steps, m, frac_beta));
    let fractional = priv_cont_greedy(&sample, matroid, ln2 / 2.0, frac_eta, s_count, rng)?;

    let rounds = (10.0 * (3.0 / inner_beta).ln() / inner_eta).ceil().max(1.0) as usize;
    let rounded: Vec<ItemSet> = (0..rounds)
        .map(|_| swap_round(&fractional, matroid, rng))
        .collect::<Result<_>>()?;

    let scores: Vec<f64> = rounded.iter().map(|&s| objective_value(&sample, s)).collect();
    let indices: Vec<usize> = (0..rounded.len()).collect();
    let winner = exp_mech(&indices, &scores, ln2 / 2.0, rng)?;
    Ok(rounded[winner])
}

/// On-disk instance format shared with the experiment harness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmodularInstanceFile {
    pub m: usize,
    pub users: Vec<UserFnSpec>,
    pub constraint: ConstraintSpec,
}

/// A user function in the instance file: either a bare coverage list or a
/// tagged function with parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UserFnSpec {
    Coverage(Vec<usize>),
    Tagged { function: String, items: Vec<usize>, weight: Option<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintSpec {
    Cardinality(usize),
    Partition { blocks: Vec<Vec<usize>>, budgets: Vec<usize> },
}

impl ConstraintSpec {
    pub fn matroid(&self, m: usize) -> Result<Matroid> {
        match self {
            ConstraintSpec::Cardinality(k) => Matroid::uniform(m, *k),
            ConstraintSpec::Partition { blocks, budgets } => {
                for b in blocks {
                    check_items(m, b)?;
                }
                let blocks =
                    blocks.iter().map(|b| ItemSet::from_items(b.iter().copied())).collect();
                Matroid::partition(m, blocks, budgets.clone())
            }
        }
    }
}

impl SubmodularInstanceFile {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dataset(&self) -> Result<Dataset<UserFn>> {
        if self.m == 0 || self.m > 64 {
            return Err(Error::InvalidInstance(format!("need 0 < m <= 64, got {}", self.m)));
        }
        let mut users = Vec::with_capacity(self.users.len());
        for spec in &self.users {
            let f = match spec {
                UserFnSpec::Coverage(items) => {
                    check_items(self.m, items)?;
                    UserFn::Coverage { links: ItemSet::from_items(items.iter().copied()) }
                }
                UserFnSpec::Tagged { function, items, weight } => {
                    check_items(self.m, items)?;
                    let links = ItemSet::from_items(items.iter().copied());
                    match function.as_str() {
                        "coverage" => UserFn::Coverage { links },
                        "budget_additive" => {
                            let weight = weight.unwrap_or(1.0);
                            if !(weight > 0.0) {
                                return Err(Error::InvalidInstance(
                                    "budget_additive weight must be positive".into(),
                                ));
                            }
                            UserFn::BudgetAdditive { links, weight }
                        }
                        other => {
                            return Err(Error::InvalidInstance(format!(
                                "unknown function tag {other:?}"
                            )))
                        }
                    }
                }
            };
            users.push(f);
        }
        Ok(Dataset::from_values(users))
    }

    pub fn matroid(&self) -> Result<Matroid> {
        self.constraint.matroid(self.m)
    }
}

fn check_items(m: usize, items: &[usize]) -> Result<()> {
    if let Some(&bad) = items.iter().find(|&&i| i >= m) {
        return Err(Error::InvalidInstance(format!("item {bad} out of range [0, {m})")));
    }
    Ok(())
}
