use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::scalar::{self, Prob};

use super::ProbnetError;

/// A normalized distribution over an ordered list of named states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
pub struct Categorical<S: Prob = f64> {
    labels: Vec<String>,
    probs: Vec<S>,
}

impl<S: Prob> Categorical<S> {
    pub fn new<L: Into<String>>(
        labels: impl IntoIterator<Item = L>,
        probs: Vec<S>,
    ) -> Result<Self, ProbnetError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        if labels.len() != probs.len() {
            return Err(ProbnetError::InvalidDistribution(format!(
                "{} labels but {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= S::zero())) {
            return Err(ProbnetError::InvalidDistribution(format!(
                "negative or non-finite probability {p}"
            )));
        }
        let total = scalar::sum(&probs);
        if (total - S::one()).abs() > S::norm_tolerance() {
            return Err(ProbnetError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { labels, probs })
    }

    /// Normalize nonnegative weights into a distribution.
    pub fn from_weights<L: Into<String>>(
        labels: impl IntoIterator<Item = L>,
        weights: Vec<S>,
    ) -> Result<Self, ProbnetError> {
        let total = scalar::sum(&weights);
        if !(total > S::zero()) || weights.iter().any(|w| !(*w >= S::zero())) {
            return Err(ProbnetError::InvalidDistribution(
                "weights must be nonnegative with positive total".into(),
            ));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Self::new(labels, probs)
    }

    pub fn uniform<L: Into<String>>(labels: impl IntoIterator<Item = L>) -> Result<Self, ProbnetError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let n = S::from_usize(labels.len()).unwrap_or_else(S::one);
        let probs = vec![S::one() / n; labels.len()];
        Self::new(labels, probs)
    }

    pub fn point_mass<L: Into<String>>(
        labels: impl IntoIterator<Item = L>,
        state: &str,
    ) -> Result<Self, ProbnetError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let idx = labels
            .iter()
            .position(|l| l == state)
            .ok_or_else(|| ProbnetError::UnknownState {
                node: "<categorical>".into(),
                state: state.into(),
            })?;
        let mut probs = vec![S::zero(); labels.len()];
        probs[idx] = S::one();
        Self::new(labels, probs)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Probability of `label`, zero when the label is unknown.
    pub fn prob(&self, label: &str) -> S {
        self.index_of(label).map_or(S::zero(), |i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, S)> {
        self.labels.iter().map(String::as_str).zip(self.probs.iter().copied())
    }

    /// Index of the most probable state; the first label wins ties.
    pub fn argmax_index(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> S {
        self.probs
            .iter()
            .filter(|p| **p > S::zero())
            .fold(S::zero(), |acc, &p| acc - p * p.ln())
    }

    /// Convert to another scalar type.
    pub fn cast<T: Prob>(&self) -> Categorical<T> {
        Categorical {
            labels: self.labels.clone(),
            probs: self.probs.iter().map(|p| T::of(p.as_f64())).collect(),
        }
    }
}

/// State with maximal probability, ties broken by label order.
pub fn most_probable_state<S: Prob>(dist: &Categorical<S>) -> &str {
    &dist.labels[dist.argmax_index()]
}

pub(crate) fn check_labels(labels: &[String]) -> Result<(), ProbnetError> {
    if labels.is_empty() {
        return Err(ProbnetError::InvalidDistribution("no states".into()));
    }
    let mut seen = HashSet::new();
    for l in labels {
        if l.is_empty() {
            return Err(ProbnetError::InvalidDistribution("empty state name".into()));
        }
        if !seen.insert(l.as_str()) {
            return Err(ProbnetError::InvalidDistribution(format!("duplicate state {l}")));
        }
    }
    Ok(())
}
