//! Index-based view of a validated network plus evidence, shared by the
//! enumeration oracle and variable elimination.

use crate::scalar::Prob;

use super::network::{Evidence, Network};
use super::ProbnetError;

pub(crate) struct Compiled<S: Prob> {
    pub cards: Vec<usize>,
    pub parents: Vec<Vec<usize>>,
    /// Dense CPT per node: parent configuration (last parent fastest) major,
    /// node state minor.
    pub tables: Vec<Vec<S>>,
    /// Evidence weight per node state (all ones when unobserved).
    pub weights: Vec<Vec<S>>,
}

impl<S: Prob> Compiled<S> {
    pub fn new(network: &Network<S>, evidence: &Evidence<S>) -> Result<Self, ProbnetError> {
        network.ensure_valid()?;
        evidence.check(network)?;
        let cards: Vec<usize> = network.nodes.iter().map(|n| n.states.len()).collect();
        let parents: Vec<Vec<usize>> = network
            .nodes
            .iter()
            .map(|n| {
                n.parents
                    .iter()
                    .map(|p| network.index_of(p).expect("validated parent"))
                    .collect()
            })
            .collect();
        let mut tables = Vec::with_capacity(cards.len());
        for (i, node) in network.nodes.iter().enumerate() {
            let rows: usize = parents[i].iter().map(|&p| cards[p]).product();
            let mut table = vec![S::zero(); rows * cards[i]];
            for row in &node.cpt {
                let mut r = 0;
                for (k, &p) in parents[i].iter().enumerate() {
                    let s = network.nodes[p]
                        .state_index(&row.given[k])
                        .expect("validated row key");
                    r = r * cards[p] + s;
                }
                table[r * cards[i]..(r + 1) * cards[i]].copy_from_slice(&row.probs);
            }
            tables.push(table);
        }
        let weights = network.nodes.iter().map(|n| evidence.weights_for(n)).collect();
        Ok(Self { cards, parents, tables, weights })
    }

    /// Local factor value of node `i` (CPT entry times evidence weight) under a
    /// full assignment.
    pub fn local(&self, i: usize, assignment: &[usize]) -> S {
        let mut r = 0;
        for &p in &self.parents[i] {
            r = r * self.cards[p] + assignment[p];
        }
        let x = assignment[i];
        self.tables[i][r * self.cards[i] + x] * self.weights[i][x]
    }
}

/// Advance a mixed-radix counter (last digit fastest). Returns false after
/// wrapping past the final assignment.
pub(crate) fn next_assignment(digits: &mut [usize], radices: &[usize]) -> bool {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < radices[k] {
            return true;
        }
        digits[k] = 0;
    }
    false
}
