use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scalar::Prob;

use super::categorical::Categorical;
use super::validate::{validate, Violation};
use super::ProbnetError;

/// One conditional distribution row, keyed by the parents' states in
/// declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
pub struct CptRow<S: Prob = f64> {
    #[serde(default)]
    pub given: Vec<String>,
    pub probs: Vec<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
pub struct NodeSpec<S: Prob = f64> {
    pub id: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub temporal_prior: bool,
    pub cpt: Vec<CptRow<S>>,
}

impl<S: Prob> NodeSpec<S> {
    /// A parentless node with the given prior.
    pub fn root<L: Into<String>>(id: &str, states: impl IntoIterator<Item = L>, prior: Vec<S>) -> Self {
        Self {
            id: id.into(),
            states: states.into_iter().map(Into::into).collect(),
            parents: Vec::new(),
            temporal_prior: false,
            cpt: vec![CptRow { given: Vec::new(), probs: prior }],
        }
    }

    /// The designated "previous slice" parent of some temporal target.
    pub fn temporal<L: Into<String>>(id: &str, states: impl IntoIterator<Item = L>, prior: Vec<S>) -> Self {
        Self { temporal_prior: true, ..Self::root(id, states, prior) }
    }

    /// A node whose rows are supplied in canonical parent order (last parent
    /// varies fastest). `parent_states` must list each parent's state names.
    pub fn with_rows<L: Into<String>>(
        id: &str,
        states: impl IntoIterator<Item = L>,
        parents: &[(&str, &[&str])],
        rows: Vec<Vec<S>>,
    ) -> Self {
        let spaces: Vec<Vec<String>> = parents
            .iter()
            .map(|(_, s)| s.iter().map(|x| x.to_string()).collect())
            .collect();
        let keys = parent_tuples(&spaces);
        let cpt = keys
            .into_iter()
            .zip(rows)
            .map(|(given, probs)| CptRow { given, probs })
            .collect();
        Self {
            id: id.into(),
            states: states.into_iter().map(Into::into).collect(),
            parents: parents.iter().map(|(p, _)| p.to_string()).collect(),
            temporal_prior: false,
            cpt,
        }
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    pub fn row(&self, given: &[&str]) -> Option<&CptRow<S>> {
        self.cpt
            .iter()
            .find(|r| r.given.len() == given.len() && r.given.iter().zip(given).all(|(a, b)| a == b))
    }
}

/// Every element of the cartesian product of the given state spaces, last
/// space varying fastest.
pub fn parent_tuples(spaces: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for space in spaces {
        let mut next = Vec::with_capacity(out.len() * space.len());
        for prefix in &out {
            for s in space {
                let mut t = prefix.clone();
                t.push(s.clone());
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// A discrete Bayesian network. Node order is declaration order and is
/// significant only for deterministic iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
pub struct Network<S: Prob = f64> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "node")]
    pub nodes: Vec<NodeSpec<S>>,
}

impl<S: Prob> Network<S> {
    pub fn new(nodes: Vec<NodeSpec<S>>) -> Self {
        Self { name: None, nodes }
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec<S>> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut NodeSpec<S>> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index_of(id).is_some()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    /// Ok when the network passes [`validate`].
    pub fn ensure_valid(&self) -> Result<(), ProbnetError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ProbnetError::InvalidNetwork(v))
        }
    }

    /// The designated temporal-prior parent of `target`, if any.
    pub fn temporal_parent_of(&self, target: &str) -> Option<&NodeSpec<S>> {
        let t = self.node(target)?;
        t.parents
            .iter()
            .filter_map(|p| self.node(p))
            .find(|p| p.temporal_prior)
    }

    /// Parse the TOML network format and reject invalid networks.
    pub fn from_toml_str(text: &str) -> Result<Self, ProbnetError> {
        let net: Self = toml::from_str(text).map_err(|e| ProbnetError::Format(e.to_string()))?;
        net.ensure_valid()?;
        Ok(net)
    }

    pub fn to_toml_string(&self) -> Result<String, ProbnetError> {
        toml::to_string(self).map_err(|e| ProbnetError::Format(e.to_string()))
    }
}

/// Observations entered into a network: hard state assignments and soft
/// likelihood vectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
pub struct Evidence<S: Prob = f64> {
    #[serde(default)]
    pub hard: BTreeMap<String, String>,
    #[serde(default, rename = "virtual")]
    pub soft: BTreeMap<String, Vec<S>>,
}

impl<S: Prob> Evidence<S> {
    pub fn new() -> Self {
        Self { hard: BTreeMap::new(), soft: BTreeMap::new() }
    }

    pub fn with_hard(mut self, node: &str, state: &str) -> Self {
        self.hard.insert(node.into(), state.into());
        self
    }

    pub fn with_virtual(mut self, node: &str, likelihood: Vec<S>) -> Self {
        self.soft.insert(node.into(), likelihood);
        self
    }

    pub fn observes(&self, node: &str) -> bool {
        self.hard.contains_key(node) || self.soft.contains_key(node)
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty() && self.soft.is_empty()
    }

    /// Check every reference and likelihood against `network`.
    pub fn check(&self, network: &Network<S>) -> Result<(), ProbnetError> {
        for (node, state) in &self.hard {
            let spec = network
                .node(node)
                .ok_or_else(|| ProbnetError::UnknownNode(node.clone()))?;
            if spec.state_index(state).is_none() {
                return Err(ProbnetError::UnknownState { node: node.clone(), state: state.clone() });
            }
            if self.soft.contains_key(node) {
                return Err(ProbnetError::InvalidEvidence(format!(
                    "{node} has both hard and virtual evidence"
                )));
            }
        }
        for (node, lik) in &self.soft {
            let spec = network
                .node(node)
                .ok_or_else(|| ProbnetError::UnknownNode(node.clone()))?;
            if lik.len() != spec.states.len() {
                return Err(ProbnetError::InvalidEvidence(format!(
                    "likelihood for {node} has {} entries, node has {} states",
                    lik.len(),
                    spec.states.len()
                )));
            }
            if lik.iter().any(|w| !(*w >= S::zero()) || !w.is_finite()) {
                return Err(ProbnetError::InvalidEvidence(format!(
                    "likelihood for {node} must be finite and nonnegative"
                )));
            }
            if !lik.iter().any(|w| *w > S::zero()) {
                return Err(ProbnetError::InvalidEvidence(format!(
                    "likelihood for {node} has no positive entry"
                )));
            }
        }
        Ok(())
    }

    /// Per-state weight this evidence places on `node` (all ones if unobserved).
    pub(crate) fn weights_for(&self, spec: &NodeSpec<S>) -> Vec<S> {
        if let Some(state) = self.hard.get(&spec.id) {
            spec.states
                .iter()
                .map(|s| if s == state { S::one() } else { S::zero() })
                .collect()
        } else if let Some(lik) = self.soft.get(&spec.id) {
            lik.clone()
        } else {
            vec![S::one(); spec.states.len()]
        }
    }
}

/// Convenience for the common "prior as categorical" read.
impl<S: Prob> NodeSpec<S> {
    pub fn prior(&self) -> Option<Categorical<S>> {
        if !self.parents.is_empty() {
            return None;
        }
        let row = self.cpt.first()?;
        Categorical::new(self.states.clone(), row.probs.clone()).ok()
    }
}
