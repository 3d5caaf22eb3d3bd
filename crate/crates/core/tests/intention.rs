use grounding::intention::{
    self, classify_goal, intention_status, load_domain, tokenize, GoalModel, IntentionThresholds, NONE_GOAL,
};
use proptest::prelude::*;

const RECEPTIONIST: &str = include_str!("../config/domains/receptionist.toml");

/// Naive Bayes by hand from the raw TOML, bypassing `GoalModel`.
fn hand_posterior(text: &str, tokens: &[&str]) -> Vec<(String, f64)> {
    let v: toml::Value = toml::from_str(text).unwrap();
    let smoothing = v["smoothing"].as_float().unwrap();
    let mut labels: Vec<String> =
        v["goals"].as_array().unwrap().iter().map(|g| g.as_str().unwrap().to_string()).collect();
    labels.push("none".into());
    let mut scores = Vec::new();
    for goal in &labels {
        let mut s = v["priors"][goal.as_str()].as_float().unwrap();
        for t in tokens {
            let w = v["features"]
                .get(goal.as_str())
                .and_then(|f| f.get(*t))
                .and_then(|x| x.as_float())
                .unwrap_or(0.0);
            s *= w + smoothing;
        }
        scores.push((goal.clone(), s));
    }
    let z: f64 = scores.iter().map(|s| s.1).sum();
    scores.into_iter().map(|(g, s)| (g, s / z)).collect()
}

#[test]
fn noisy_visitation_matches_hand_summation() {
    let model = load_domain("receptionist").unwrap();
    let said = "I am here to visit Fred Smith way you contact in";
    let tokens = tokenize(said);
    assert_eq!(tokens.len(), 11);
    let post = classify_goal(&model, &tokens);
    let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
    let hand = hand_posterior(RECEPTIONIST, &refs);
    for (g, p) in &hand {
        assert!((post.dist.prob(g) - p).abs() < 1e-12, "{g}");
    }
    assert_eq!(post.top, "Visitation");
    // Visitation: 0.3 * 1.6 * 3.1 * 1.1 * 0.1^8; the other goals fall far behind.
    assert!(post.top_prob > 0.95);
}

#[test]
fn fixtures_are_classified_confidently() {
    for name in intention::builtin_domains() {
        let model = load_domain(name).unwrap();
        assert!(!model.fixtures.is_empty());
        for f in &model.fixtures {
            let post = classify_goal(&model, &tokenize(&f.utterance));
            assert_eq!(post.top, f.goal, "{}", f.utterance);
            assert!(post.top_prob >= 0.6, "{}: {}", f.utterance, post.top_prob);
        }
    }
}

#[test]
fn empty_utterance_returns_priors() {
    let model = load_domain("presenter").unwrap();
    assert_eq!(classify_goal(&model, &[]).dist, model.priors);
    assert_eq!(model.labels().last().map(String::as_str), Some(NONE_GOAL));
}

#[test]
fn token_without_goal_weight_changes_nothing() {
    let model = load_domain("receptionist").unwrap();
    let base = tokenize("I want to visit");
    let mut more = base.clone();
    more.push("the".into());
    let a = classify_goal(&model, &base);
    let b = classify_goal(&model, &more);
    for (x, y) in a.dist.probs().iter().zip(b.dist.probs()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn status_buckets() {
    let model = load_domain("receptionist").unwrap();
    let t = IntentionThresholds::default();
    let mut post = classify_goal(&model, &[]);
    for (x, top) in [(0.9, "high"), (0.5, "medium"), (0.2, "low")] {
        post.top_prob = x;
        let s = intention_status(&post, t).unwrap();
        assert_eq!(grounding::probnet::most_probable_state(&s.dist), top);
        assert!((s.dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    post.top_prob = 0.5;
    let s = intention_status(&post, t).unwrap();
    assert!(s.dist.prob("medium") > 0.8 && s.dist.prob("high") == 0.0);
    assert!(intention_status(&post, IntentionThresholds { low: 0.8, high: 0.3 }).is_err());
}

#[test]
fn domain_round_trips_through_toml() {
    for name in intention::builtin_domains() {
        let model = load_domain(name).unwrap();
        let back = GoalModel::from_toml_str(&model.to_toml_string().unwrap()).unwrap();
        assert_eq!(model, back);
    }
    assert!(load_domain("bakery").is_err());
}

#[test]
fn known_fraction_counts_lexicon_and_features() {
    let model = load_domain("presenter").unwrap();
    assert_eq!(model.known_fraction(&tokenize("next slide please")), 1.0);
    assert_eq!(model.known_fraction(&tokenize("zither next")), 0.5);
    assert_eq!(model.known_fraction(&[]), 0.0);
}

proptest! {
    #[test]
    fn word_order_is_irrelevant(
        words in proptest::collection::vec(
            prop::sample::select(vec!["visit", "call", "shuttle", "where", "the", "host", "bye", "quark"]),
            0..10,
        ),
        rot in 0usize..10,
    ) {
        let model = load_domain("receptionist").unwrap();
        let tokens: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let mut shuffled = tokens.clone();
        if !shuffled.is_empty() {
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
        }
        let a = classify_goal(&model, &tokens);
        let b = classify_goal(&model, &shuffled);
        for (x, y) in a.dist.probs().iter().zip(b.dist.probs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tokenizer_is_lowercase_words(s in "[A-Za-z ,.!?']{0,40}") {
        for t in tokenize(&s) {
            prop_assert!(!t.is_empty());
            prop_assert_eq!(t.to_lowercase(), t.clone());
            prop_assert!(!t.starts_with('\''));
        }
    }
}
