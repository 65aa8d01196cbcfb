//! Poisson subsampling and the one-sided-to-two-sided amplification formula.
//!
//! Subsampling keeps each record independently with probability `p`. The
//! central fact of this crate: if a mechanism is `eps0`-add-DP, running it on
//! a Poisson subsample at rate `p < 1` is two-sided pure DP at
//! `ln(max(1/(1-p), 1 + p(e^eps0 - 1)))`. With `eps0 = ln 2` and
//! `p = 1 - e^-eps`, the bound is exactly `eps`.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// A subsampling probability in `[0, 1)`.
///
/// `p = 1` is rejected: the `1/(1-p)` branch of the amplification bound
/// degenerates there and the wrapper theorems all require `p < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsampleRate(f64);

impl SubsampleRate {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "subsample rate must lie in [0, 1), got {p}"
            )));
        }
        Ok(SubsampleRate(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Keep each record independently with probability `p`.
///
/// The keep/drop decision consumes one uniform per record in dataset order
/// and never inspects payloads, so the retained index pattern depends only on
/// `(rng state, dataset length)`. Retained records keep their identity and
/// relative order.
pub fn poisson_subsample<X: Clone>(
    dataset: &Dataset<X>,
    p: SubsampleRate,
    rng: &mut RandomSource,
) -> Dataset<X> {
    let keep: Vec<bool> = (0..dataset.len()).map(|_| rng.uniform() < p.value()).collect();
    dataset.subset(&keep)
}

/// Two-sided DP level of the subsampled variant of an `epsilon0`-add-DP
/// mechanism: `ln(max(1/(1-p), 1 + p(e^epsilon0 - 1)))`.
pub fn amplification_epsilon(p: SubsampleRate, epsilon0: f64) -> Result<f64> {
    if !(epsilon0 > 0.0) || !epsilon0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "epsilon0 must be strictly positive, got {epsilon0}"
        )));
    }
    let p = p.value();
    let remove_branch = 1.0 / (1.0 - p);
    let add_branch = 1.0 + p * (epsilon0.exp() - 1.0);
    Ok(remove_branch.max(add_branch).ln())
}

/// Subsampling rate that makes the `ln 2`-add-DP wrapper exactly
/// `epsilon`-DP: `p = 1 - e^-epsilon`.
pub fn rate_for_target(epsilon: f64) -> Result<SubsampleRate> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be strictly positive, got {epsilon}"
        )));
    }
    SubsampleRate::new(1.0 - (-epsilon).exp())
}
