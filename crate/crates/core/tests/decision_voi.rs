mod common;

use common::Gen;
use grounding::decision::{self, best_action, expected_utility, voi_entropy, voi_greedy, UtilityTable, VoiQuery};
use grounding::probnet::{self, Axis, Evidence, Joint, Network, NodeSpec};
use proptest::prelude::*;

fn random_belief(g: &mut Gen, table: &UtilityTable) -> Joint {
    let w: Vec<f64> = (0..table.outcome_count()).map(|_| g.unit() + 1e-3).collect();
    let z: f64 = w.iter().sum();
    Joint::new(table.axes().to_vec(), w.into_iter().map(|x| x / z).collect()).unwrap()
}

#[test]
fn voi_matches_enumeration_oracle() {
    let mut g = Gen::new(50);
    for _ in 0..60 {
        let p = common::random_problem(&mut g);
        let scores = voi_greedy(&p.net, &p.evidence, &p.table, &p.query).unwrap();
        assert_eq!(scores.len(), p.query.candidates.len());
        for (cand, v) in &scores {
            assert!(*v >= -1e-9, "{cand}: {v}");
            assert!((v - common::oracle_voi(&p, cand)).abs() < 1e-9);
        }
        assert!(scores.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}

#[test]
fn costs_are_subtracted() {
    let mut g = Gen::new(51);
    let mut p = common::random_problem(&mut g);
    let free = voi_greedy(&p.net, &p.evidence, &p.table, &p.query).unwrap();
    for c in &p.query.candidates {
        p.query.costs.insert(c.clone(), 2.5);
    }
    let paid = voi_greedy(&p.net, &p.evidence, &p.table, &p.query).unwrap();
    for (c, v) in &paid {
        let before = free.iter().find(|(x, _)| x == c).unwrap().1;
        assert!((before - 2.5 - v).abs() < 1e-12);
    }
}

#[test]
fn eu_and_ranking_match_direct_summation() {
    let mut g = Gen::new(52);
    for _ in 0..50 {
        let net = common::random_network(&mut g, 4, 1000);
        let axes: Vec<&str> = net.nodes.iter().take(2).map(|n| n.id.as_str()).collect();
        let table = common::random_table(&mut g, &net, &axes, 4);
        let belief = random_belief(&mut g, &table);
        let mut brute: Vec<(String, f64)> = table
            .actions()
            .iter()
            .map(|a| {
                let row = table.row(a).unwrap();
                (a.clone(), belief.probs().iter().zip(row).map(|(p, u)| p * u).sum())
            })
            .collect();
        for (a, v) in &brute {
            assert!((expected_utility(a, &belief, &table).unwrap() - v).abs() < 1e-12);
        }
        brute.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
        let all: Vec<&str> = table.actions().iter().map(String::as_str).collect();
        let ranked = best_action(&belief, &table, &all).unwrap();
        let names = |r: &[(String, f64)]| r.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
        assert_eq!(names(&ranked), names(&brute));
    }
}

#[test]
fn dominating_action_ranks_first() {
    let axes = vec![Axis::new("W", ["a", "b", "c"])];
    let table =
        UtilityTable::new(vec!["low".into(), "high".into()], axes, vec![1.0, 5.0, 2.0, 1.5, 5.5, 2.5]).unwrap();
    let mut g = Gen::new(53);
    for _ in 0..20 {
        let b = random_belief(&mut g, &table);
        assert_eq!(best_action(&b, &table, &["low", "high"]).unwrap()[0].0, "high");
        assert_eq!(best_action(&b, &table, &["low"]).unwrap()[0].0, "low");
    }
}

#[test]
fn entropy_voi_cases() {
    let net = Network::<f64>::new(vec![
        NodeSpec::root("T", ["t0", "t1", "t2"], vec![0.2, 0.3, 0.5]),
        NodeSpec::with_rows("Copy", ["t0", "t1", "t2"], &[("T", &["t0", "t1", "t2"])], vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]),
        NodeSpec::root("Other", ["o0", "o1"], vec![0.5, 0.5]),
    ]);
    let mut q = VoiQuery::new(["Copy", "Other"]);
    q.target = Some("T".into());
    let scores = voi_entropy(&net, &Evidence::new(), &q).unwrap();
    let h = probnet::posterior_of(&net, &Evidence::new(), "T").unwrap().entropy();
    assert_eq!(scores[0].0, "Copy");
    assert!((scores[0].1 - h).abs() < 1e-12);
    assert!(scores[1].1.abs() < 1e-9);
    assert!(matches!(
        voi_entropy(&net, &Evidence::new(), &VoiQuery::new(["Copy"])),
        Err(decision::DecisionError::MissingTarget)
    ));
}

#[test]
fn recommendation_stopping_and_ties() {
    // Two identical noisy sensors of W: equal VOI, first declared wins.
    let rows = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
    let net = Network::<f64>::new(vec![
        NodeSpec::root("W", ["sun", "rain"], vec![0.5, 0.5]),
        NodeSpec::with_rows("S1", ["yes", "no"], &[("W", &["sun", "rain"])], rows.clone()),
        NodeSpec::with_rows("S2", ["yes", "no"], &[("W", &["sun", "rain"])], rows),
    ]);
    let table = UtilityTable::new(
        vec!["go".into(), "stay".into()],
        vec![Axis::new("W", ["sun", "rain"])],
        vec![10.0, -10.0, 0.0, 0.0],
    )
    .unwrap();
    let mut q = VoiQuery::new(["S2", "S1"]);
    let ranked = voi_greedy(&net, &Evidence::new(), &table, &q).unwrap();
    assert_eq!(ranked[0].1, ranked[1].1);
    q.recommendations.insert("S2".into(), "check_s2".into());
    let rec = decision::recommend_observation(&net, &Evidence::new(), &table, &q).unwrap();
    assert_eq!(rec, Some(("S2".into(), "check_s2".into())));
    for c in ["S1", "S2"] {
        q.costs.insert(c.into(), 100.0);
    }
    assert_eq!(decision::recommend_observation(&net, &Evidence::new(), &table, &q).unwrap(), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_transform_keeps_ranking(seed in any::<u64>(), a in 0.01f64..50.0, b in -100.0f64..100.0) {
        let mut g = Gen::new(seed);
        let net = common::random_network(&mut g, 3, 100);
        let axes: Vec<&str> = net.nodes.iter().take(1).map(|n| n.id.as_str()).collect();
        let table = common::random_table(&mut g, &net, &axes, 5);
        let belief = random_belief(&mut g, &table);
        let all: Vec<&str> = table.actions().iter().map(String::as_str).collect();
        let before = best_action(&belief, &table, &all).unwrap();
        let after = best_action(&belief, &table.affine(a, b), &all).unwrap();
        // Skip near-ties that rounding could reorder.
        let gaps_ok = before.windows(2).all(|w| w[0].1 - w[1].1 > 1e-6 || w[0].1 == w[1].1);
        if gaps_ok {
            let names = |r: &[(String, f64)]| r.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
            prop_assert_eq!(names(&before), names(&after));
        }
    }

    #[test]
    fn zero_cost_voi_nonnegative(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let p = common::random_problem(&mut g);
        for (_, v) in voi_greedy(&p.net, &p.evidence, &p.table, &p.query).unwrap() {
            prop_assert!(v >= -1e-9);
        }
    }
}
