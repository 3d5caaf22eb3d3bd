//! Variable elimination over table factors.

use std::collections::BTreeMap;

use crate::scalar::Prob;

use super::categorical::Categorical;
use super::compiled::{next_assignment, Compiled};
use super::joint::Joint;
use super::network::{Evidence, Network};
use super::ProbnetError;

#[derive(Clone, Debug)]
struct Factor<S: Prob> {
    /// Node indices in ascending order.
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<S>,
}

impl<S: Prob> Factor<S> {
    fn local(c: &Compiled<S>, node: usize) -> Self {
        let mut vars = c.parents[node].clone();
        vars.push(node);
        vars.sort_unstable();
        let cards: Vec<usize> = vars.iter().map(|&v| c.cards[v]).collect();
        let mut full = vec![0usize; c.cards.len()];
        let mut digits = vec![0usize; vars.len()];
        let mut values = Vec::with_capacity(cards.iter().product());
        loop {
            for (k, &v) in vars.iter().enumerate() {
                full[v] = digits[k];
            }
            values.push(c.local(node, &full));
            if !next_assignment(&mut digits, &cards) {
                break;
            }
        }
        Self { vars, cards, values }
    }

    fn strides_in(&self, scope: &[usize]) -> Vec<usize> {
        // Stride of each `scope` variable inside this factor (0 if absent).
        let mut own = vec![0usize; self.vars.len()];
        let mut s = 1;
        for k in (0..self.vars.len()).rev() {
            own[k] = s;
            s *= self.cards[k];
        }
        scope
            .iter()
            .map(|v| self.vars.iter().position(|x| x == v).map_or(0, |k| own[k]))
            .collect()
    }

    fn product(factors: &[&Factor<S>]) -> Factor<S> {
        let mut vars: Vec<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
        vars.sort_unstable();
        vars.dedup();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                factors
                    .iter()
                    .find_map(|f| f.vars.iter().position(|x| x == v).map(|k| f.cards[k]))
                    .expect("variable comes from some factor")
            })
            .collect();
        let strides: Vec<Vec<usize>> = factors.iter().map(|f| f.strides_in(&vars)).collect();
        let mut digits = vec![0usize; vars.len()];
        let mut values = Vec::with_capacity(cards.iter().product());
        loop {
            let mut v = S::one();
            for (f, st) in factors.iter().zip(&strides) {
                let idx: usize = digits.iter().zip(st).map(|(d, s)| d * s).sum();
                v = v * f.values[idx];
            }
            values.push(v);
            if !next_assignment(&mut digits, &cards) {
                break;
            }
        }
        Factor { vars, cards, values }
    }

    fn sum_out(&self, var: usize) -> Factor<S> {
        let k = self.vars.iter().position(|&x| x == var).expect("summed variable in scope");
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(k);
        cards.remove(k);
        let mut values = vec![S::zero(); cards.iter().product()];
        let mut digits = vec![0usize; self.vars.len()];
        for &v in &self.values {
            let mut idx = 0;
            for (j, &d) in digits.iter().enumerate() {
                if j != k {
                    idx = idx * self.cards[j] + d;
                }
            }
            values[idx] = values[idx] + v;
            next_assignment(&mut digits, &self.cards);
        }
        Factor { vars, cards, values }
    }
}

/// Unnormalized factor over `keep` (ascending node indices) after eliminating
/// every other variable with a greedy min-size ordering.
fn eliminate_all_but<S: Prob>(c: &Compiled<S>, keep: &[usize]) -> Factor<S> {
    let mut factors: Vec<Factor<S>> = (0..c.cards.len()).map(|i| Factor::local(c, i)).collect();
    let mut remaining: Vec<usize> = (0..c.cards.len()).filter(|v| !keep.contains(v)).collect();
    while !remaining.is_empty() {
        // Cost of eliminating v: size of the product over factors mentioning v.
        let cost = |v: usize| -> usize {
            let mut scope: Vec<usize> = factors
                .iter()
                .filter(|f| f.vars.contains(&v))
                .flat_map(|f| f.vars.iter().copied())
                .collect();
            scope.sort_unstable();
            scope.dedup();
            scope.iter().map(|&x| c.cards[x]).product()
        };
        let (pos, &var) = remaining
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| (cost(v), v))
            .expect("non-empty");
        remaining.remove(pos);
        let (touching, rest): (Vec<Factor<S>>, Vec<Factor<S>>) =
            factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        let refs: Vec<&Factor<S>> = touching.iter().collect();
        factors.push(Factor::product(&refs).sum_out(var));
    }
    let refs: Vec<&Factor<S>> = factors.iter().collect();
    Factor::product(&refs)
}

fn resolve<S: Prob>(network: &Network<S>, names: &[&str]) -> Result<Vec<usize>, ProbnetError> {
    names
        .iter()
        .map(|q| network.index_of(q).ok_or_else(|| ProbnetError::UnknownNode(q.to_string())))
        .collect()
}

/// Exact marginal posteriors of `query` given `evidence`.
pub fn posterior<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    query: &[&str],
) -> Result<BTreeMap<String, Categorical<S>>, ProbnetError> {
    let c = Compiled::new(network, evidence)?;
    let idx = resolve(network, query)?;
    let mut out = BTreeMap::new();
    for (q, &i) in query.iter().zip(&idx) {
        let f = eliminate_all_but(&c, &[i]);
        let total = f.values.iter().fold(S::zero(), |a, &v| a + v);
        if !(total > S::zero()) {
            return Err(ProbnetError::InconsistentEvidence);
        }
        let probs = f.values.iter().map(|&v| v / total).collect();
        out.insert(q.to_string(), Categorical::new(network.nodes[i].states.clone(), probs)?);
    }
    Ok(out)
}

/// Posterior of a single node.
pub fn posterior_of<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    node: &str,
) -> Result<Categorical<S>, ProbnetError> {
    posterior(network, evidence, &[node])?
        .remove(node)
        .ok_or_else(|| ProbnetError::UnknownNode(node.into()))
}

/// Exact joint posterior over `nodes` (in the given order).
pub fn posterior_joint<S: Prob>(
    network: &Network<S>,
    evidence: &Evidence<S>,
    nodes: &[&str],
) -> Result<Joint<S>, ProbnetError> {
    let c = Compiled::new(network, evidence)?;
    let idx = resolve(network, nodes)?;
    let mut keep = idx.clone();
    keep.sort_unstable();
    keep.dedup();
    if keep.len() != idx.len() {
        return Err(ProbnetError::InvalidEvidence("joint query repeats a node".into()));
    }
    let f = eliminate_all_but(&c, &keep);
    let total = f.values.iter().fold(S::zero(), |a, &v| a + v);
    if !(total > S::zero()) {
        return Err(ProbnetError::InconsistentEvidence);
    }
    // Reorder from ascending-index layout to the requested axis order.
    let strides = f.strides_in(&idx);
    let cards: Vec<usize> = idx.iter().map(|&i| c.cards[i]).collect();
    let mut digits = vec![0usize; idx.len()];
    let mut probs = Vec::with_capacity(f.values.len());
    loop {
        let at: usize = digits.iter().zip(&strides).map(|(d, s)| d * s).sum();
        probs.push(f.values[at] / total);
        if !next_assignment(&mut digits, &cards) {
            break;
        }
    }
    Ok(Joint::from_parts(
        nodes
            .iter()
            .zip(&idx)
            .map(|(q, &i)| (q.to_string(), network.nodes[i].states.clone()))
            .collect(),
        probs,
    ))
}
