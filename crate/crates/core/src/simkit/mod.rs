//! Simulated users and recognizer, scripted scenarios, metrics and trace
//! export.
//!
//! Scenario files:
//!
//! ```toml
//! name = "service-request"
//! domain = "receptionist"
//! modality = "spoken_visual"   # optional
//! seed = 1                     # optional
//! policy = "honest"            # honest | always_correct | <reaction tag>
//!
//! [overrides]                  # optional engine overrides
//! noise_level = 0.1
//!
//! [[turn]]
//! utterance = "Hi, I'm here to visit Fred Smith. Can you contact him?"
//! goal = "Visitation"          # the user's real goal; omit for none
//! attention = 0.95
//! noise = 0.1                  # optional per-turn noise level
//! reaction = "corrected"       # optional per-turn policy
//! ```

mod noise;
mod trace;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EngineConfig, Overrides};
use crate::control::{ActionDecision, Reaction, ACKNOWLEDGE, ASK_REPEAT};
use crate::maintenance::Modality;
use crate::session::{Session, SessionError, TurnInput};

pub use noise::{corrupt, NoiseChannel, NoiseConfig, Recognition};
pub use trace::{
    compute_metrics, export_trace, read_csv, to_csv, verify_trace, ExportFormat, Metrics, TraceLog, TraceRow,
    TraceTable, VerifyReport,
};

const SCENARIOS: [(&str, &str); 5] = [
    ("service", include_str!("../../config/scenarios/service.toml")),
    ("repair", include_str!("../../config/scenarios/repair.toml")),
    ("overheard", include_str!("../../config/scenarios/overheard.toml")),
    ("adaptation", include_str!("../../config/scenarios/adaptation.toml")),
    ("silence", include_str!("../../config/scenarios/silence.toml")),
];

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
    #[error("trace was produced under config {found}, not {expected}")]
    Fingerprint { expected: String, found: String },
    #[error("turn {turn}: {quantity} differs from the oracle by {error:e}")]
    Verification { turn: usize, quantity: String, error: f64 },
}

/// How the simulated user reacts to a system action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ReactionPolicy {
    /// Accept a correct goal, correct a wrong one, repeat when asked.
    Honest,
    /// Correct every turn.
    AlwaysCorrect,
    Scripted(Reaction),
}

impl TryFrom<String> for ReactionPolicy {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.as_str() {
            "honest" => Ok(Self::Honest),
            "always_correct" => Ok(Self::AlwaysCorrect),
            tag => match tag.parse::<Reaction>()? {
                Reaction::Pending => Err("pending is not a reaction".into()),
                r => Ok(Self::Scripted(r)),
            },
        }
    }
}

impl From<ReactionPolicy> for String {
    fn from(p: ReactionPolicy) -> Self {
        match p {
            ReactionPolicy::Honest => "honest".into(),
            ReactionPolicy::AlwaysCorrect => "always_correct".into(),
            ReactionPolicy::Scripted(r) => r.as_str().into(),
        }
    }
}

impl ReactionPolicy {
    pub fn react(self, decision: &ActionDecision, true_goal: Option<&str>) -> Reaction {
        match self {
            Self::AlwaysCorrect => Reaction::Corrected,
            Self::Scripted(r) => r,
            Self::Honest => match (&decision.goal, decision.chosen.as_str()) {
                (Some(g), _) if Some(g.as_str()) == true_goal => Reaction::Accepted,
                (Some(_), _) => Reaction::Corrected,
                (None, ASK_REPEAT) => Reaction::Repeated,
                (None, ACKNOWLEDGE) => Reaction::Accepted,
                (None, _) => Reaction::NoResponse,
            },
        }
    }
}

fn default_modality() -> Modality {
    Modality::SpokenVisual
}

fn default_policy() -> ReactionPolicy {
    ReactionPolicy::Honest
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTurn {
    pub utterance: String,
    #[serde(default)]
    pub goal: Option<String>,
    pub attention: f64,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub reaction: Option<ReactionPolicy>,
    #[serde(default)]
    pub modality: Option<Modality>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub domain: String,
    #[serde(default = "default_modality")]
    pub modality: Modality,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub policy: ReactionPolicy,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(rename = "turn")]
    pub turns: Vec<ScenarioTurn>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        if s.turns.is_empty() {
            return Err(SimError::Scenario(format!("{} has no turns", s.name)));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SimError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    /// A shipped scenario by name, or a scenario file by path.
    pub fn named(name: &str) -> Result<Self, SimError> {
        match SCENARIOS.iter().find(|(n, _)| *n == name) {
            Some((_, text)) => Self::from_toml_str(text),
            None => Self::load(Path::new(name)),
        }
    }

    pub fn input(&self, i: usize) -> TurnInput {
        let t = &self.turns[i];
        TurnInput {
            transcript: t.utterance.clone(),
            attention_prob: t.attention,
            noise_level: t.noise,
            modality: t.modality,
        }
    }

    pub fn reaction_policy(&self, i: usize) -> ReactionPolicy {
        self.turns[i].reaction.unwrap_or(self.policy)
    }
}

pub fn builtin_scenarios() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(n, _)| *n).collect()
}

/// Session for `scenario` under `config` with the scenario's overrides.
pub fn scenario_session(scenario: &Scenario, config: &EngineConfig, seed: u64) -> Result<Session, SimError> {
    let config = config
        .with_overrides(&scenario.overrides)
        .map_err(SessionError::from)?;
    Ok(Session::new(&config, &scenario.domain, scenario.modality, seed)?)
}

/// Run the scenario with its own seed.
pub fn run_scenario(scenario: &Scenario, config: &EngineConfig) -> Result<TraceLog, SimError> {
    run_scenario_seeded(scenario, config, scenario.seed)
}

pub fn run_scenario_seeded(scenario: &Scenario, config: &EngineConfig, seed: u64) -> Result<TraceLog, SimError> {
    let mut session = scenario_session(scenario, config, seed)?;
    for (i, turn) in scenario.turns.iter().enumerate() {
        let decision = session.step(&scenario.input(i))?.decision.clone();
        let reaction = scenario.reaction_policy(i).react(&decision, turn.goal.as_deref());
        session.react(reaction)?;
    }
    Ok(session.trace())
}
