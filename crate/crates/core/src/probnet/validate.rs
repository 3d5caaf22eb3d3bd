use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::{self, Prob};

use super::network::{parent_tuples, Network};

/// Which structural or numeric rule a network breaks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DuplicateNode,
    NoStates,
    BadStateName,
    UnknownParent(String),
    Cycle(Vec<String>),
    MissingRow,
    DuplicateRow,
    UnknownRowKey,
    RowLength { expected: usize, found: usize },
    NegativeProbability,
    Normalization { sum: String },
    TemporalPriorWithParents,
    MultipleTemporalPriors,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::DuplicateNode => write!(f, "node id declared twice"),
            Rule::NoStates => write!(f, "node has no states"),
            Rule::BadStateName => write!(f, "state names must be non-empty and unique"),
            Rule::UnknownParent(p) => write!(f, "parent {p} does not exist"),
            Rule::Cycle(members) => write!(f, "directed cycle through {}", members.join(" -> ")),
            Rule::MissingRow => write!(f, "no cpt row for this parent configuration"),
            Rule::DuplicateRow => write!(f, "cpt row declared twice"),
            Rule::UnknownRowKey => write!(f, "cpt row key does not match the parent state spaces"),
            Rule::RowLength { expected, found } => {
                write!(f, "cpt row has {found} entries, expected {expected}")
            }
            Rule::NegativeProbability => write!(f, "cpt row has a negative or non-finite entry"),
            Rule::Normalization { sum } => write!(f, "cpt row sums to {sum}"),
            Rule::TemporalPriorWithParents => write!(f, "temporal prior node has parents"),
            Rule::MultipleTemporalPriors => write!(f, "node has more than one temporal prior parent"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: String,
    /// Parent-state key of the offending row, joined by commas.
    pub row: Option<String>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.row {
            Some(r) => write!(f, "{} [{}]: {}", self.node, r, self.rule),
            None => write!(f, "{}: {}", self.node, self.rule),
        }
    }
}

/// Collect every invariant violation in `network`. An empty list means the
/// network is usable for inference.
pub fn validate<S: Prob>(network: &Network<S>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |node: &str, row: Option<String>, rule: Rule| {
        out.push(Violation { node: node.to_string(), row, rule })
    };

    let mut ids = HashSet::new();
    for n in &network.nodes {
        if !ids.insert(n.id.as_str()) {
            push(&n.id, None, Rule::DuplicateNode);
        }
    }
    let by_id: HashMap<&str, usize> =
        network.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();

    for n in &network.nodes {
        if n.states.is_empty() {
            push(&n.id, None, Rule::NoStates);
        } else {
            let uniq: HashSet<&String> = n.states.iter().collect();
            if uniq.len() != n.states.len() || n.states.iter().any(String::is_empty) {
                push(&n.id, None, Rule::BadStateName);
            }
        }
        let mut parents_ok = true;
        for p in &n.parents {
            if !by_id.contains_key(p.as_str()) {
                push(&n.id, None, Rule::UnknownParent(p.clone()));
                parents_ok = false;
            }
        }
        if n.temporal_prior && !n.parents.is_empty() {
            push(&n.id, None, Rule::TemporalPriorWithParents);
        }
        let temporal_parents = n
            .parents
            .iter()
            .filter(|p| by_id.get(p.as_str()).is_some_and(|&i| network.nodes[i].temporal_prior))
            .count();
        if temporal_parents > 1 {
            push(&n.id, None, Rule::MultipleTemporalPriors);
        }

        for (k, row) in n.cpt.iter().enumerate() {
            let key = if row.given.is_empty() { format!("#{k}") } else { row.given.join(",") };
            if row.probs.len() != n.states.len() {
                push(&n.id, Some(key.clone()), Rule::RowLength {
                    expected: n.states.len(),
                    found: row.probs.len(),
                });
            }
            if row.probs.iter().any(|p| !(*p >= S::zero()) || !p.is_finite()) {
                push(&n.id, Some(key.clone()), Rule::NegativeProbability);
            } else {
                let total = scalar::sum(&row.probs);
                if (total - S::one()).abs() > S::norm_tolerance() {
                    push(&n.id, Some(key), Rule::Normalization { sum: total.to_string() });
                }
            }
        }

        if parents_ok {
            let spaces: Vec<Vec<String>> = n
                .parents
                .iter()
                .map(|p| network.nodes[by_id[p.as_str()]].states.clone())
                .collect();
            let expected = parent_tuples(&spaces);
            let expected_set: HashSet<&Vec<String>> = expected.iter().collect();
            let mut counts: BTreeMap<&Vec<String>, usize> = BTreeMap::new();
            for row in &n.cpt {
                if expected_set.contains(&row.given) {
                    *counts.entry(&row.given).or_default() += 1;
                } else {
                    push(&n.id, Some(row.given.join(",")), Rule::UnknownRowKey);
                }
            }
            for key in &expected {
                match counts.get(key).copied().unwrap_or(0) {
                    0 => push(&n.id, Some(key.join(",")), Rule::MissingRow),
                    1 => {}
                    _ => push(&n.id, Some(key.join(",")), Rule::DuplicateRow),
                }
            }
        }
    }

    for members in cycles(network, &by_id) {
        push(&members[0].clone(), None, Rule::Cycle(members));
    }
    out
}

/// Strongly connected groups of nodes that contain a directed cycle, one
/// entry per group, members in declaration order.
fn cycles<S: Prob>(network: &Network<S>, by_id: &HashMap<&str, usize>) -> Vec<Vec<String>> {
    let n = network.nodes.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in network.nodes.iter().enumerate() {
        for p in &node.parents {
            if let Some(&j) = by_id.get(p.as_str()) {
                children[j].push(i);
            }
        }
    }
    let reach = |start: usize| {
        let mut seen = vec![false; n];
        let mut todo = children[start].clone();
        while let Some(x) = todo.pop() {
            if !seen[x] {
                seen[x] = true;
                todo.extend(children[x].iter().copied());
            }
        }
        seen
    };
    let reachable: Vec<Vec<bool>> = (0..n).map(reach).collect();
    let mut grouped = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if grouped[i] || !reachable[i][i] {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| reachable[i][j] && reachable[j][i]).collect();
        for &j in &members {
            grouped[j] = true;
        }
        out.push(members.into_iter().map(|j| network.nodes[j].id.clone()).collect());
    }
    out
}
