//! Decision-theoretic conversational grounding.
//!
//! Beliefs about four levels of mutual understanding (channel, signal,
//! intention, conversation) are tracked with small Bayesian networks, and
//! each turn the engine picks the grounding action with the highest expected
//! utility. The crate also ships a simulated user and noisy recognizer for
//! running scripted dialogs, and a session API for interactive front ends.
//!
//! The probabilistic core ([`probnet`], [`decision`]) is generic over the
//! scalar type; the aliases below fix it to `f64`, which is what the dialog
//! layers use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod decision;
pub mod intention;
pub mod maintenance;
pub mod probnet;
pub mod scalar;
pub mod service;
pub mod session;
pub mod simkit;

pub use scalar::Prob;

pub type Categorical = probnet::Categorical<f64>;
pub type Network = probnet::Network<f64>;
pub type NodeSpec = probnet::NodeSpec<f64>;
pub type Evidence = probnet::Evidence<f64>;
pub type Joint = probnet::Joint<f64>;
