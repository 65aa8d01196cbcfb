//! Datasets and privacy parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A user record: an opaque payload plus a stable identity.
///
/// Identities survive subsampling, which is what makes the add/remove
/// neighbor relation well-defined on subsampled data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record<X> {
    pub id: u64,
    pub value: X,
}

/// A finite multiset of user records. The unit of add/remove neighboring.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset<X> {
    records: Vec<Record<X>>,
}

impl<X> Dataset<X> {
    pub fn empty() -> Self {
        Dataset { records: Vec::new() }
    }

    /// Build a dataset assigning ids `0..n` in order.
    pub fn from_values(values: impl IntoIterator<Item = X>) -> Self {
        Dataset {
            records: values
                .into_iter()
                .enumerate()
                .map(|(i, value)| Record { id: i as u64, value })
                .collect(),
        }
    }

    pub fn from_records(records: Vec<Record<X>>) -> Self {
        Dataset { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record<X>] {
        &self.records
    }

    pub fn values(&self) -> impl Iterator<Item = &X> {
        self.records.iter().map(|r| &r.value)
    }

    /// Add-neighbor: this dataset plus one record appended.
    pub fn with_added(&self, value: X) -> Self
    where
        X: Clone,
    {
        let id = self.records.iter().map(|r| r.id + 1).max().unwrap_or(0);
        let mut records = self.records.clone();
        records.push(Record { id, value });
        Dataset { records }
    }

    /// Remove-neighbor: this dataset with the record at `index` dropped.
    pub fn without_index(&self, index: usize) -> Self
    where
        X: Clone,
    {
        let mut records = self.records.clone();
        records.remove(index);
        Dataset { records }
    }

    /// The sub-multiset of records selected by `keep` (indexed by position).
    /// Order and identities are preserved.
    pub fn subset(&self, keep: &[bool]) -> Self
    where
        X: Clone,
    {
        assert_eq!(keep.len(), self.records.len());
        Dataset {
            records: self
                .records
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(r, _)| r.clone())
                .collect(),
        }
    }
}

/// Privacy and accuracy parameters shared by the application pipelines.
///
/// `epsilon` is the target two-sided pure-DP budget, `epsilon0` the one-sided
/// add-DP budget of the inner mechanism (ln 2 unless overridden), `beta` the
/// failure probability, `eta` the approximation slack, and `delta_sens` the
/// realized-sensitivity bound of the oracle in play.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub epsilon0: f64,
    pub beta: f64,
    pub eta: f64,
    pub delta_sens: f64,
}

impl PrivacyParams {
    /// Standard construction: `epsilon0 = ln 2`, `delta_sens = 1`.
    pub fn new(epsilon: f64, beta: f64, eta: f64) -> Result<Self> {
        let p = PrivacyParams {
            epsilon,
            epsilon0: std::f64::consts::LN_2,
            beta,
            eta,
            delta_sens: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_epsilon0(mut self, epsilon0: f64) -> Result<Self> {
        self.epsilon0 = epsilon0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta_sens(mut self, delta_sens: f64) -> Result<Self> {
        self.delta_sens = delta_sens;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("epsilon0", self.epsilon0),
            ("beta", self.beta),
            ("eta", self.eta),
            ("delta_sens", self.delta_sens),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        for (name, v) in [("beta", self.beta), ("eta", self.eta)] {
            if v >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be below 1, got {v}"
                )));
            }
        }
        Ok(())
    }
}
