//! Expected-utility ranking and myopic value of information.
//!
//! Beliefs are [`Joint`] distributions over the utility table's outcome axes.
//! VOI is always one step deep: each candidate observation is scored by how
//! much observing it, and only it, would raise the utility of the best
//! decision.

mod utility;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probnet::{self, Evidence, Joint, Network, ProbnetError};
use crate::scalar::Prob;

pub use utility::UtilityTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("belief axes do not match the utility table")]
    AxisMismatch,
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("no allowed actions")]
    EmptyAllowed,
    #[error("candidate {0} is already observed")]
    AlreadyObserved(String),
    #[error("entropy VOI needs a target node")]
    MissingTarget,
    #[error("observation cost for {0} must be finite and nonnegative")]
    BadCost(String),
    #[error("invalid utility table: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Probnet(#[from] ProbnetError),
}

/// Observable nodes to score, with per-node costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
pub struct VoiQuery<S: Prob = f64> {
    pub candidates: Vec<String>,
    #[serde(default)]
    pub costs: BTreeMap<String, S>,
    #[serde(default)]
    pub target: Option<String>,
    /// Recommendation template key per candidate; the node id is used when
    /// no key is configured.
    #[serde(default)]
    pub recommendations: BTreeMap<String, String>,
}

impl<S: Prob> VoiQuery<S> {
    pub fn new<L: Into<String>>(candidates: impl IntoIterator<Item = L>) -> Self {
        Self {
            candidates: candidates.into_iter().map(Into::into).collect(),
            costs: BTreeMap::new(),
            target: None,
            recommendations: BTreeMap::new(),
        }
    }

    pub fn cost(&self, node: &str) -> S {
        self.costs.get(node).copied().unwrap_or_else(S::zero)
    }

    fn check(&self, network: &Network<S>, evidence: &Evidence<S>) -> Result<(), DecisionError> {
        for c in &self.candidates {
            if !network.contains(c) {
                return Err(ProbnetError::UnknownNode(c.clone()).into());
            }
            if evidence.observes(c) {
                return Err(DecisionError::AlreadyObserved(c.clone()));
            }
        }
        for (node, cost) in &self.costs {
            if !(*cost >= S::zero()) || !cost.is_finite() {
                return Err(DecisionError::BadCost(node.clone()));
            }
        }
        Ok(())
    }
}

/// Σ over outcomes of P(outcome) · U(action, outcome).
pub fn expected_utility<S: Prob>(
    action: &str,
    belief: &Joint<S>,
    table: &UtilityTable<S>,
) -> Result<S, DecisionError> {
    table.check_belief(belief)?;
    let row = table.row(action)?;
    Ok(belief
        .probs()
        .iter()
        .zip(row)
        .fold(S::zero(), |acc, (&p, &u)| acc + p * u))
}

/// Every allowed action with its expected utility, best first. Equal
/// utilities keep the table's declaration order.
pub fn best_action<S: Prob>(
    belief: &Joint<S>,
    table: &UtilityTable<S>,
    allowed: &[&str],
) -> Result<Vec<(String, S)>, DecisionError> {
    if allowed.is_empty() {
        return Err(DecisionError::EmptyAllowed);
    }
    for a in allowed {
        table.action_index(a)?;
    }
    let mut ranked = Vec::with_capacity(allowed.len());
    for a in table.actions() {
        if allowed.contains(&a.as_str()) {
            ranked.push((a.clone(), expected_utility(a, belief, table)?));
        }
    }
    ranked.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(ranked)
}

fn best_eu<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    table: &UtilityTable<S>,
) -> Result<S, DecisionError> {
    let axes = table.axis_nodes();
    let belief = probnet::posterior_joint(network, evidence, &axes)?;
    let all: Vec<&str> = table.actions().iter().map(String::as_str).collect();
    Ok(best_action(&belief, table, &all)?[0].1)
}

fn sort_desc<S: Prob>(scores: &mut [(String, S)]) {
    scores.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap_or(std::cmp::Ordering::Equal));
}

/// Net value of observing each candidate next, best first.
///
/// VOI(e) = Σ_v P(e=v | evidence) · max_a EU(a | evidence, e=v)
///          − max_a EU(a | evidence) − cost(e)
pub fn voi_greedy<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    table: &UtilityTable<S>,
    query: &VoiQuery<S>,
) -> Result<Vec<(String, S)>, DecisionError> {
    query.check(network, evidence)?;
    for axis in table.axes() {
        let node = network
            .node(&axis.node)
            .ok_or_else(|| ProbnetError::UnknownNode(axis.node.clone()))?;
        if node.states != axis.states {
            return Err(DecisionError::AxisMismatch);
        }
    }
    let base = best_eu(network, evidence, table)?;
    let mut scores = Vec::with_capacity(query.candidates.len());
    for cand in &query.candidates {
        let dist = probnet::posterior_of(network, evidence, cand)?;
        let mut expected = S::zero();
        for (state, p) in dist.iter() {
            if p > S::zero() {
                let ev = evidence.clone().with_hard(cand, state);
                expected = expected + p * best_eu(network, &ev, table)?;
            }
        }
        scores.push((cand.clone(), expected - base - query.cost(cand)));
    }
    sort_desc(&mut scores);
    Ok(scores)
}

/// Expected reduction in the target's entropy (nats) from observing each
/// candidate, best first.
pub fn voi_entropy<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    query: &VoiQuery<S>,
) -> Result<Vec<(String, S)>, DecisionError> {
    query.check(network, evidence)?;
    let target = query.target.as_deref().ok_or(DecisionError::MissingTarget)?;
    let prior = probnet::posterior_of(network, evidence, target)?.entropy();
    let mut scores = Vec::with_capacity(query.candidates.len());
    for cand in &query.candidates {
        let dist = probnet::posterior_of(network, evidence, cand)?;
        let mut expected = S::zero();
        for (state, p) in dist.iter() {
            if p > S::zero() {
                let ev = evidence.clone().with_hard(cand, state);
                expected = expected + p * probnet::posterior_of(network, &ev, target)?.entropy();
            }
        }
        scores.push((cand.clone(), prior - expected));
    }
    sort_desc(&mut scores);
    Ok(scores)
}

/// The candidate worth observing next and its recommendation key, or `None`
/// once no candidate has positive net VOI.
pub fn recommend_observation<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    table: &UtilityTable<S>,
    query: &VoiQuery<S>,
) -> Result<Option<(String, String)>, DecisionError> {
    let ranked = voi_greedy(network, evidence, table, query)?;
    Ok(ranked.into_iter().find(|(_, v)| *v > S::zero()).map(|(node, _)| {
        let key = query.recommendations.get(&node).cloned().unwrap_or_else(|| node.clone());
        (node, key)
    }))
}
