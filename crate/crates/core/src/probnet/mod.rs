//! Discrete Bayesian networks: representation, validation, exact inference,
//! soft evidence and single-node temporal rollup.
//!
//! Two independent exact engines live here. [`posterior`] runs variable
//! elimination and is what the rest of the crate calls; [`joint_enumerate`]
//! sums the full joint and exists as the reference the first is checked
//! against.
//!
//! Networks are declared in TOML:
//!
//! ```toml
//! name = "example"
//!
//! [[node]]
//! id = "Rain"
//! states = ["yes", "no"]
//! cpt = [{ probs = [0.2, 0.8] }]
//!
//! [[node]]
//! id = "WetGrass"
//! states = ["wet", "dry"]
//! parents = ["Rain"]
//! cpt = [
//!   { given = ["yes"], probs = [0.9, 0.1] },
//!   { given = ["no"],  probs = [0.1, 0.9] },
//! ]
//! ```
//!
//! A node flagged `temporal_prior = true` must be a root; [`rollup`] replaces
//! its prior with the previous turn's posterior of the child it feeds.

mod categorical;
mod compiled;
mod eliminate;
mod enumerate;
mod joint;
mod network;
mod validate;

use thiserror::Error;

use crate::scalar::Prob;

pub use categorical::{most_probable_state, Categorical};
pub use eliminate::{posterior, posterior_joint, posterior_of};
pub use enumerate::{joint_enumerate, joint_enumerate_joint};
pub use joint::{Axis, Joint};
pub use network::{parent_tuples, CptRow, Evidence, Network, NodeSpec};
pub use validate::{validate, Rule, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbnetError {
    #[error("invalid network: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidNetwork(Vec<Violation>),
    #[error("evidence has zero probability under the network")]
    InconsistentEvidence,
    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {node} has no state {state}")]
    UnknownState { node: String, state: String },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("{0} has no temporal prior parent")]
    MissingTemporalPrior(String),
    #[error("state space of {temporal} does not match {target}")]
    StateMismatch { temporal: String, target: String },
    #[error("network format: {0}")]
    Format(String),
}

/// Copy of `network` whose temporal-prior parent of `target` carries
/// `prev_posterior` as its prior.
pub fn rollup<S: Prob>(
    network: &Network<S>,
    target: &str,
    prev_posterior: &Categorical<S>,
) -> Result<Network<S>, ProbnetError> {
    let target_spec = network
        .node(target)
        .ok_or_else(|| ProbnetError::UnknownNode(target.into()))?;
    let temporal = network
        .temporal_parent_of(target)
        .ok_or_else(|| ProbnetError::MissingTemporalPrior(target.into()))?;
    if temporal.states != target_spec.states || prev_posterior.labels() != temporal.states.as_slice() {
        return Err(ProbnetError::StateMismatch {
            temporal: temporal.id.clone(),
            target: target.into(),
        });
    }
    let id = temporal.id.clone();
    let mut next = network.clone();
    let node = next.node_mut(&id).expect("temporal parent exists");
    node.cpt = vec![CptRow { given: Vec::new(), probs: prev_posterior.probs().to_vec() }];
    Ok(next)
}
