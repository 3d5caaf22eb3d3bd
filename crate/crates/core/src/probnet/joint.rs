use serde::{Deserialize, Serialize};

use crate::scalar::{self, Prob};

use super::categorical::Categorical;
use super::compiled::next_assignment;
use super::ProbnetError;

/// One dimension of a joint distribution or utility table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub node: String,
    pub states: Vec<String>,
}

impl Axis {
    pub fn new<L: Into<String>>(node: &str, states: impl IntoIterator<Item = L>) -> Self {
        Self { node: node.into(), states: states.into_iter().map(Into::into).collect() }
    }
}

/// A normalized distribution over the cartesian product of several axes,
/// stored row-major with the last axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
pub struct Joint<S: Prob = f64> {
    axes: Vec<Axis>,
    probs: Vec<S>,
}

impl<S: Prob> Joint<S> {
    pub fn new(axes: Vec<Axis>, probs: Vec<S>) -> Result<Self, ProbnetError> {
        let size: usize = axes.iter().map(|a| a.states.len()).product();
        if axes.is_empty() || size != probs.len() {
            return Err(ProbnetError::InvalidDistribution(format!(
                "joint over {} cells given {} probabilities",
                size,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= S::zero())) {
            return Err(ProbnetError::InvalidDistribution("negative joint probability".into()));
        }
        let total = scalar::sum(&probs);
        if (total - S::one()).abs() > S::norm_tolerance() {
            return Err(ProbnetError::InvalidDistribution(format!("joint sums to {total}")));
        }
        Ok(Self { axes, probs })
    }

    pub(crate) fn from_parts(axes: Vec<(String, Vec<String>)>, probs: Vec<S>) -> Self {
        Self {
            axes: axes.into_iter().map(|(node, states)| Axis { node, states }).collect(),
            probs,
        }
    }

    /// Product distribution of independent marginals.
    pub fn independent(parts: &[(&str, &Categorical<S>)]) -> Result<Self, ProbnetError> {
        let axes: Vec<Axis> = parts
            .iter()
            .map(|(n, c)| Axis { node: n.to_string(), states: c.labels().to_vec() })
            .collect();
        let radices: Vec<usize> = parts.iter().map(|(_, c)| c.len()).collect();
        let mut probs = Vec::with_capacity(radices.iter().product());
        let mut digits = vec![0; radices.len()];
        loop {
            let p = parts
                .iter()
                .zip(&digits)
                .fold(S::one(), |acc, ((_, c), &d)| acc * c.probs()[d]);
            probs.push(p);
            if !next_assignment(&mut digits, &radices) {
                break;
            }
        }
        Self::new(axes, probs)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn radices(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.states.len()).collect()
    }

    /// Marginal distribution of one axis.
    pub fn marginal(&self, node: &str) -> Result<Categorical<S>, ProbnetError> {
        let k = self
            .axes
            .iter()
            .position(|a| a.node == node)
            .ok_or_else(|| ProbnetError::UnknownNode(node.into()))?;
        let radices = self.radices();
        let mut acc = vec![S::zero(); radices[k]];
        let mut digits = vec![0; radices.len()];
        for &p in &self.probs {
            acc[digits[k]] = acc[digits[k]] + p;
            next_assignment(&mut digits, &radices);
        }
        Categorical::new(self.axes[k].states.clone(), acc)
    }
}
