//! Brute-force inference by summing the full joint distribution.
//!
//! This is the reference every other inference path is tested against. It
//! shares nothing with variable elimination beyond the CPT lookup in
//! [`Compiled::local`].

use std::collections::BTreeMap;

use crate::scalar::Prob;

use super::categorical::Categorical;
use super::compiled::{next_assignment, Compiled};
use super::joint::Joint;
use super::network::{Evidence, Network};
use super::ProbnetError;

/// Exact marginal posteriors of `query` by full enumeration.
pub fn joint_enumerate<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    query: &[&str],
) -> Result<BTreeMap<String, Categorical<S>>, ProbnetError> {
    let c = Compiled::new(network, evidence)?;
    let idx: Vec<usize> = query
        .iter()
        .map(|q| network.index_of(q).ok_or_else(|| ProbnetError::UnknownNode(q.to_string())))
        .collect::<Result<_, _>>()?;
    let mut acc: Vec<Vec<S>> = idx.iter().map(|&i| vec![S::zero(); c.cards[i]]).collect();
    let mut total = S::zero();
    for_each_weighted(&c, |assignment, w| {
        for (k, &i) in idx.iter().enumerate() {
            acc[k][assignment[i]] = acc[k][assignment[i]] + w;
        }
        total = total + w;
    });
    if !(total > S::zero()) {
        return Err(ProbnetError::InconsistentEvidence);
    }
    let mut out = BTreeMap::new();
    for ((q, &i), a) in query.iter().zip(&idx).zip(acc) {
        let probs = a.into_iter().map(|v| v / total).collect();
        out.insert(q.to_string(), Categorical::new(network.nodes[i].states.clone(), probs)?);
    }
    Ok(out)
}

/// Exact joint posterior over `nodes` by full enumeration.
pub fn joint_enumerate_joint<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    nodes: &[&str],
) -> Result<Joint<S>, ProbnetError> {
    let c = Compiled::new(network, evidence)?;
    let idx: Vec<usize> = nodes
        .iter()
        .map(|q| network.index_of(q).ok_or_else(|| ProbnetError::UnknownNode(q.to_string())))
        .collect::<Result<_, _>>()?;
    let qcards: Vec<usize> = idx.iter().map(|&i| c.cards[i]).collect();
    let mut acc = vec![S::zero(); qcards.iter().product()];
    let mut total = S::zero();

    for_each_weighted(&c, |assignment, w| {
        let mut cell = 0;
        for (k, &i) in idx.iter().enumerate() {
            cell = cell * qcards[k] + assignment[i];
        }
        acc[cell] = acc[cell] + w;
        total = total + w;
    });
    if !(total > S::zero()) {
        return Err(ProbnetError::InconsistentEvidence);
    }
    let probs = acc.into_iter().map(|v| v / total).collect();
    Ok(Joint::from_parts(
        nodes
            .iter()
            .zip(&idx)
            .map(|(q, &i)| (q.to_string(), network.nodes[i].states.clone()))
            .collect(),
        probs,
    ))
}

/// Visit every full assignment with positive joint weight.
fn for_each_weighted<S: Prob>(c: &Compiled<S>, mut visit: impl FnMut(&[usize], S)) {
    let n = c.cards.len();
    let mut assignment = vec![0usize; n];
    loop {
        let mut w = S::one();
        for i in 0..n {
            w = w * c.local(i, &assignment);
            if w == S::zero() {
                break;
            }
        }
        if w > S::zero() {
            visit(&assignment, w);
        }
        if !next_assignment(&mut assignment, &c.cards) {
            break;
        }
    }
}
