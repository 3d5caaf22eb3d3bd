//! Goal recognition for a task domain.
//!
//! A smoothed naive-Bayes keyword model stands in for a syntactic parser:
//!
//! ```text
//! P(goal | tokens) ∝ prior(goal) · Π_t (weight(goal, t) + smoothing)
//! ```
//!
//! Swapping domains means swapping the [`GoalModel`]; nothing else in the
//! engine knows about goals.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probnet::{most_probable_state, ProbnetError};
use crate::Categorical;

pub const NONE_GOAL: &str = "none";
pub const STATUS_STATES: [&str; 3] = ["high", "medium", "low"];

const RECEPTIONIST: &str = include_str!("../config/domains/receptionist.toml");
const PRESENTER: &str = include_str!("../config/domains/presenter.toml");

#[derive(Debug, Error)]
pub enum IntentionError {
    #[error("unknown domain {0}")]
    UnknownDomain(String),
    #[error("malformed domain config: {0}")]
    Malformed(String),
    #[error("thresholds must satisfy 0 < low < high < 1 (got {low}, {high})")]
    BadThresholds { low: f64, high: f64 },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Probnet(#[from] ProbnetError),
}

/// Per-goal strings used when rendering actions that bind the goal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalTemplates {
    /// Noun phrase filling `{goal}` slots, e.g. "a shuttle".
    pub phrase: String,
    pub service: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acknowledge: Option<String>,
}

/// A clean utterance and the goal it should be recognized as.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub utterance: String,
    pub goal: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainFile", into = "DomainFile")]
pub struct GoalModel {
    pub domain: String,
    /// Domain goals, without the reserved `none` goal.
    pub goals: Vec<String>,
    /// Over `goals` followed by `none`.
    pub priors: Categorical,
    pub features: BTreeMap<String, BTreeMap<String, f64>>,
    pub smoothing: f64,
    /// Words the parser knows besides the keyword features.
    pub lexicon: BTreeSet<String>,
    pub templates: BTreeMap<String, GoalTemplates>,
    pub fixtures: Vec<Fixture>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DomainFile {
    domain: String,
    smoothing: f64,
    goals: Vec<String>,
    priors: BTreeMap<String, f64>,
    #[serde(default)]
    lexicon: BTreeSet<String>,
    features: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    templates: BTreeMap<String, GoalTemplates>,
    #[serde(default, rename = "fixture")]
    fixtures: Vec<Fixture>,
}

impl TryFrom<DomainFile> for GoalModel {
    type Error = IntentionError;

    fn try_from(f: DomainFile) -> Result<Self, Self::Error> {
        let bad = |m: String| IntentionError::Malformed(m);
        if f.goals.is_empty() || f.goals.iter().any(|g| g == NONE_GOAL) {
            return Err(bad("goals must be non-empty and must not include `none`".into()));
        }
        let mut labels = f.goals.clone();
        labels.push(NONE_GOAL.into());
        let expected: BTreeSet<&String> = labels.iter().collect();
        let given: BTreeSet<&String> = f.priors.keys().collect();
        if expected != given {
            return Err(bad("priors must cover exactly the goals plus `none`".into()));
        }
        let priors = Categorical::new(labels.clone(), labels.iter().map(|g| f.priors[g]).collect())
            .map_err(|e| bad(e.to_string()))?;
        if !(f.smoothing > 0.0) {
            return Err(bad("smoothing must be positive".into()));
        }
        for (goal, words) in &f.features {
            if !expected.contains(goal) {
                return Err(bad(format!("features for unknown goal {goal}")));
            }
            if let Some((w, v)) = words.iter().find(|(_, v)| !(**v > 0.0)) {
                return Err(bad(format!("weight of {w} for {goal} must be positive (got {v})")));
            }
        }
        for goal in f.templates.keys() {
            if !f.goals.contains(goal) {
                return Err(bad(format!("templates for unknown goal {goal}")));
            }
        }
        Ok(GoalModel {
            domain: f.domain,
            goals: f.goals,
            priors,
            features: f.features,
            smoothing: f.smoothing,
            lexicon: f.lexicon,
            templates: f.templates,
            fixtures: f.fixtures,
        })
    }
}

impl From<GoalModel> for DomainFile {
    fn from(m: GoalModel) -> Self {
        DomainFile {
            domain: m.domain,
            smoothing: m.smoothing,
            goals: m.goals,
            priors: m.priors.iter().map(|(g, p)| (g.to_string(), p)).collect(),
            lexicon: m.lexicon,
            features: m.features,
            templates: m.templates,
            fixtures: m.fixtures,
        }
    }
}

impl GoalModel {
    pub fn from_toml_str(text: &str) -> Result<Self, IntentionError> {
        toml::from_str(text).map_err(|e| IntentionError::Malformed(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String, IntentionError> {
        toml::to_string(self).map_err(|e| IntentionError::Malformed(e.to_string()))
    }

    /// Goals followed by `none`, in prior order.
    pub fn labels(&self) -> &[String] {
        self.priors.labels()
    }

    pub fn weight(&self, goal: &str, token: &str) -> f64 {
        self.features
            .get(goal)
            .and_then(|w| w.get(token))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn knows(&self, token: &str) -> bool {
        self.lexicon.contains(token) || self.features.values().any(|w| w.contains_key(token))
    }

    /// Fraction of tokens the domain recognizes; used as the parse-quality
    /// signal. Zero for an empty utterance.
    pub fn known_fraction(&self, tokens: &[String]) -> f64 {
        if tokens.is_empty() {
            return 0.0;
        }
        tokens.iter().filter(|t| self.knows(t)).count() as f64 / tokens.len() as f64
    }
}

/// A built-in domain by name, or a domain file by path.
pub fn load_domain(name: &str) -> Result<GoalModel, IntentionError> {
    match name {
        "receptionist" => GoalModel::from_toml_str(RECEPTIONIST),
        "presenter" => GoalModel::from_toml_str(PRESENTER),
        other => {
            let path = Path::new(other);
            if path.extension().is_some_and(|e| e == "toml") || path.exists() {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| IntentionError::Io { path: other.into(), source })?;
                GoalModel::from_toml_str(&text)
            } else {
                Err(IntentionError::UnknownDomain(other.into()))
            }
        }
    }
}

pub fn builtin_domains() -> [&'static str; 2] {
    ["receptionist", "presenter"]
}

/// Lowercased words; anything other than letters, digits and inner
/// apostrophes separates tokens.
pub fn tokenize(transcript: &str) -> Vec<String> {
    transcript
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalPosterior {
    pub dist: Categorical,
    pub top: String,
    pub top_prob: f64,
}

impl GoalPosterior {
    pub fn from_dist(dist: Categorical) -> Self {
        let top = most_probable_state(&dist).to_string();
        let top_prob = dist.prob(&top);
        Self { dist, top, top_prob }
    }
}

pub fn classify_goal(model: &GoalModel, tokens: &[String]) -> GoalPosterior {
    let weights: Vec<f64> = model
        .priors
        .iter()
        .map(|(goal, prior)| {
            tokens
                .iter()
                .fold(prior, |acc, t| acc * (model.weight(goal, t) + model.smoothing))
        })
        .collect();
    let dist = Categorical::from_weights(model.labels().to_vec(), weights)
        .unwrap_or_else(|_| model.priors.clone());
    GoalPosterior::from_dist(dist)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentionThresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for IntentionThresholds {
    fn default() -> Self {
        Self { low: 0.35, high: 0.7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentionStatus {
    pub dist: Categorical,
}

/// Soft bucketing of the top goal probability. Membership is piecewise
/// linear between anchors at `low` (all low), the midpoint (all medium) and
/// `high` (all high).
pub fn intention_status(
    posterior: &GoalPosterior,
    thresholds: IntentionThresholds,
) -> Result<IntentionStatus, IntentionError> {
    let IntentionThresholds { low, high } = thresholds;
    if !(0.0 < low && low < high && high < 1.0) {
        return Err(IntentionError::BadThresholds { low, high });
    }
    let x = posterior.top_prob;
    let mid = 0.5 * (low + high);
    let probs = if x <= low {
        vec![0.0, 0.0, 1.0]
    } else if x <= mid {
        let t = (x - low) / (mid - low);
        vec![0.0, t, 1.0 - t]
    } else if x < high {
        let t = (x - mid) / (high - mid);
        vec![t, 1.0 - t, 0.0]
    } else {
        vec![1.0, 0.0, 0.0]
    };
    Ok(IntentionStatus { dist: Categorical::new(STATUS_STATES, probs)? })
}
