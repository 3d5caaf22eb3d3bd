#![allow(dead_code)]

use std::collections::BTreeMap;

use grounding::decision::{UtilityTable, VoiQuery};
use grounding::probnet::{Axis, Evidence, Network, NodeSpec};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Gen(ChaCha8Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    fn dist(&mut self, k: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| 0.02 + self.unit()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }
}

pub fn state_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("s{i}")).collect()
}

/// Random DAG with up to `max_nodes` nodes of 2..=4 states and at most three
/// parents each, keeping the full joint under `max_joint` cells.
pub fn random_network(g: &mut Gen, max_nodes: usize, max_joint: usize) -> Network {
    let n = g.range(2, max_nodes);
    let mut cards: Vec<usize> = Vec::new();
    let mut joint = 1usize;
    let mut nodes = Vec::new();
    for i in 0..n {
        let mut k = g.range(2, 4);
        while joint * k > max_joint && k > 2 {
            k -= 1;
        }
        if joint * k > max_joint {
            break;
        }
        joint *= k;
        cards.push(k);
        let mut parents: Vec<usize> = Vec::new();
        if i > 0 {
            for _ in 0..g.range(0, 3.min(i)) {
                let p = g.below(i);
                if !parents.contains(&p) {
                    parents.push(p);
                }
            }
        }
        parents.sort();
        let rows: usize = parents.iter().map(|p| cards[*p]).product();
        let probs: Vec<Vec<f64>> = (0..rows).map(|_| g.dist(k)).collect();
        let parent_specs: Vec<(String, Vec<String>)> =
            parents.iter().map(|p| (format!("N{p}"), state_names(cards[*p]))).collect();
        let refs: Vec<(&str, Vec<&str>)> = parent_specs
            .iter()
            .map(|(id, st)| (id.as_str(), st.iter().map(String::as_str).collect()))
            .collect();
        let refs2: Vec<(&str, &[&str])> = refs.iter().map(|(id, st)| (*id, st.as_slice())).collect();
        let node = if parents.is_empty() {
            NodeSpec::root(&format!("N{i}"), state_names(k), probs[0].clone())
        } else {
            NodeSpec::with_rows(&format!("N{i}"), state_names(k), &refs2, probs)
        };
        nodes.push(node);
    }
    Network::new(nodes)
}

/// Hard evidence on roughly a quarter of the nodes, virtual on another quarter.
pub fn random_evidence(g: &mut Gen, net: &Network) -> Evidence {
    let mut ev = Evidence::new();
    for node in &net.nodes {
        let k = node.states.len();
        match g.below(4) {
            0 => ev = ev.with_hard(&node.id, &node.states[g.below(k)]),
            1 => {
                let lik = (0..k).map(|_| 0.05 + g.unit()).collect();
                ev = ev.with_virtual(&node.id, lik);
            }
            _ => {}
        }
    }
    ev
}

pub fn random_table(g: &mut Gen, net: &Network, axes: &[&str], actions: usize) -> UtilityTable {
    let axes: Vec<Axis> = axes
        .iter()
        .map(|id| Axis::new(id, net.node(id).unwrap().states.clone()))
        .collect();
    let width: usize = axes.iter().map(|a| a.states.len()).product();
    let values = (0..actions * width).map(|_| (g.unit() * 200.0 - 100.0).round()).collect();
    UtilityTable::new((0..actions).map(|a| format!("a{a}")).collect(), axes, values).unwrap()
}

/// A random decision problem: network, evidence, utility table over one or
/// two nodes, and the unobserved candidates.
pub struct Problem {
    pub net: Network,
    pub evidence: Evidence,
    pub table: UtilityTable,
    pub query: VoiQuery,
}

pub fn random_problem(g: &mut Gen) -> Problem {
    loop {
        let net = random_network(g, 8, 20_000);
        if net.nodes.len() < 3 {
            continue;
        }
        let mut evidence = Evidence::new();
        let n = net.nodes.len();
        let axis_count = if n > 3 && g.below(2) == 0 { 2 } else { 1 };
        let mut axes: Vec<String> = Vec::new();
        while axes.len() < axis_count {
            let id = net.nodes[g.below(n)].id.clone();
            if !axes.contains(&id) {
                axes.push(id);
            }
        }
        let mut candidates = Vec::new();
        for node in &net.nodes {
            if axes.contains(&node.id) {
                continue;
            }
            match g.below(3) {
                0 => evidence = evidence.with_hard(&node.id, &node.states[g.below(node.states.len())]),
                _ => candidates.push(node.id.clone()),
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let refs: Vec<&str> = axes.iter().map(String::as_str).collect();
        let actions = g.range(2, 4);
        let table = random_table(g, &net, &refs, actions);
        let query = VoiQuery::new(candidates);
        return Problem { net, evidence, table, query };
    }
}

/// Visit every full assignment with its evidence-weighted joint probability.
/// Shares no code with the library's inference.
pub fn for_each_assignment(net: &Network, ev: &Evidence, mut f: impl FnMut(&[usize], f64)) {
    let cards: Vec<usize> = net.nodes.iter().map(|n| n.states.len()).collect();
    let index: BTreeMap<&str, usize> = net.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let mut assign = vec![0usize; cards.len()];
    'outer: loop {
        let mut w = 1.0;
        for (i, node) in net.nodes.iter().enumerate() {
            let given: Vec<&str> = node
                .parents
                .iter()
                .map(|p| {
                    let j = index[p.as_str()];
                    net.nodes[j].states[assign[j]].as_str()
                })
                .collect();
            let row = node.cpt.iter().find(|r| r.given == given).unwrap();
            w *= row.probs[assign[i]];
            if let Some(s) = ev.hard.get(&node.id) {
                if node.states[assign[i]] != *s {
                    w = 0.0;
                }
            }
            if let Some(lik) = ev.soft.get(&node.id) {
                w *= lik[assign[i]];
            }
        }
        f(&assign, w);
        for k in (0..cards.len()).rev() {
            assign[k] += 1;
            if assign[k] < cards[k] {
                continue 'outer;
            }
            assign[k] = 0;
        }
        break;
    }
}

/// Brute-force marginal of one node.
pub fn oracle_marginal(net: &Network, ev: &Evidence, node: &str) -> Vec<f64> {
    let i = net.nodes.iter().position(|n| n.id == node).unwrap();
    let mut m = vec![0.0; net.nodes[i].states.len()];
    for_each_assignment(net, ev, |a, w| m[a[i]] += w);
    let z: f64 = m.iter().sum();
    m.into_iter().map(|x| x / z).collect()
}

/// Best expected utility over all actions by direct enumeration.
pub fn oracle_best_eu(net: &Network, ev: &Evidence, table: &UtilityTable) -> f64 {
    let axes: Vec<usize> = table
        .axes()
        .iter()
        .map(|a| net.nodes.iter().position(|n| n.id == a.node).unwrap())
        .collect();
    let mut mass = vec![0.0; table.outcome_count()];
    for_each_assignment(net, ev, |assign, w| {
        let mut cell = 0;
        for (a, &i) in axes.iter().enumerate() {
            cell = cell * table.axes()[a].states.len() + assign[i];
        }
        mass[cell] += w;
    });
    let total: f64 = mass.iter().sum();
    table
        .actions()
        .iter()
        .map(|a| mass.iter().zip(table.row(a).unwrap()).map(|(m, u)| m / total * u).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Oracle VOI for one candidate.
pub fn oracle_voi(p: &Problem, cand: &str) -> f64 {
    let base = oracle_best_eu(&p.net, &p.evidence, &p.table);
    let node = p.net.node(cand).unwrap();
    let dist = oracle_marginal(&p.net, &p.evidence, cand);
    let mut expected = 0.0;
    for (s, q) in node.states.iter().zip(dist) {
        if q > 0.0 {
            let ev = p.evidence.clone().with_hard(cand, s);
            expected += q * oracle_best_eu(&p.net, &ev, &p.table);
        }
    }
    expected - base - p.query.cost(cand)
}
