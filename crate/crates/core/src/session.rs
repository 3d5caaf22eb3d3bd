//! The turn loop shared by the scenario runner and the session service.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, EngineConfig, Overrides};
use crate::control::{
    self, Adaptation, ControlError, ControlModel, DialogRecord, Reaction, Recommendation, Turn,
};
use crate::intention::{self, GoalModel, IntentionError};
use crate::maintenance::{self, MaintenanceBelief, MaintenanceError, MaintenanceModel, Modality, PerceptualFrame};
use crate::simkit::{NoiseChannel, TraceLog};
use crate::Categorical;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Intention(#[from] IntentionError),
    #[error(transparent)]
    Maintenance(#[from] MaintenanceError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("invalid input: {0}")]
    Input(String),
}

/// One user turn as the engine receives it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnInput {
    pub transcript: String,
    pub attention_prob: f64,
    /// Replaces the channel's noise level for this turn.
    #[serde(default)]
    pub noise_level: Option<f64>,
    /// Switch the maintenance model before this turn.
    #[serde(default)]
    pub modality: Option<Modality>,
}

/// Snapshot of every belief after the latest turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub turn: Option<usize>,
    pub modality: Modality,
    pub grounding: Categorical,
    pub activity: Categorical,
    pub maintenance: Categorical,
    pub goal: Categorical,
    pub intention: Categorical,
    pub ranking: Vec<(String, f64)>,
    pub expected_utilities: Vec<(String, f64)>,
    pub chosen: Option<String>,
    pub recommendation: Option<Recommendation>,
    pub adaptation: Adaptation,
}

#[derive(Clone, Debug)]
pub struct Session {
    config: EngineConfig,
    domain: GoalModel,
    control: ControlModel,
    modality: Modality,
    maintenance: MaintenanceModel,
    belief: MaintenanceBelief,
    record: DialogRecord,
    noise: NoiseChannel,
    seed: u64,
    fingerprint: String,
}

impl Session {
    /// `config` should already carry any overrides.
    pub fn new(config: &EngineConfig, domain: &str, modality: Modality, seed: u64) -> Result<Self, SessionError> {
        let domain = config.domain(domain)?;
        let control = config.control_model()?;
        config.noise.check().map_err(ConfigError::Invalid)?;
        Ok(Self {
            maintenance: config.maintenance_model(modality)?,
            fingerprint: config.fingerprint(&domain),
            noise: NoiseChannel::new(config.noise.clone(), seed),
            config: config.clone(),
            domain,
            control,
            modality,
            belief: MaintenanceBelief::initial(),
            record: DialogRecord::new(),
            seed,
        })
    }

    pub fn domain(&self) -> &GoalModel {
        &self.domain
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn record(&self) -> &DialogRecord {
        &self.record
    }

    pub fn control(&self) -> &ControlModel {
        &self.control
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn belief(&self) -> &MaintenanceBelief {
        &self.belief
    }

    pub fn last_turn(&self) -> Option<&Turn> {
        self.record.turns.last()
    }

    /// Rebuild the maintenance model; beliefs restart, the record carries over.
    pub fn swap_modality(&mut self, modality: Modality) -> Result<(), SessionError> {
        self.maintenance = self.config.maintenance_model(modality)?;
        self.modality = modality;
        self.belief = MaintenanceBelief {
            dist: MaintenanceBelief::initial().dist,
            turn: self.record.turns.len() as i64 - 1,
        };
        Ok(())
    }

    /// Run one full turn: recognizer, maintenance, intention, control.
    pub fn step(&mut self, input: &TurnInput) -> Result<&Turn, SessionError> {
        if !(0.0..=1.0).contains(&input.attention_prob) {
            return Err(SessionError::Input(format!("attention {} outside [0,1]", input.attention_prob)));
        }
        if let Some(n) = input.noise_level.filter(|n| !(0.0..=1.0).contains(n)) {
            return Err(SessionError::Input(format!("noise level {n} outside [0,1]")));
        }
        if let Some(m) = input.modality {
            self.swap_modality(m)?;
        }
        let index = self.record.turns.len();
        let level = input.noise_level.unwrap_or(self.noise.level());
        let heard = self.noise.corrupt_at(level, &input.transcript);
        let tokens = intention::tokenize(&heard.text);
        let frame = PerceptualFrame {
            attention_prob: input.attention_prob,
            transcript: heard.text,
            asr_confidence: heard.confidence,
            parse_quality: self.domain.known_fraction(&tokens),
            timestamp: index as u64,
        };
        let prior_maintenance = self.belief.dist.clone();
        let belief = maintenance::update(&self.maintenance, &self.belief, &frame)?;
        let goal = intention::classify_goal(&self.domain, &tokens);
        let status = intention::intention_status(&goal, self.control.settings.intention)?;
        let grounding = control::fuse(&self.control, &belief, &status, &self.record)?;
        let decision =
            control::select_action(&self.control, &grounding, &goal, &self.record, &self.domain, !tokens.is_empty())?;
        let turn = Turn {
            index,
            modality: self.modality,
            said: input.transcript.clone(),
            frame,
            prior_maintenance,
            maintenance: belief.clone(),
            goal,
            intention: status,
            adaptation: self.record.adaptation.clone(),
            grounding,
            decision,
            reaction: Reaction::Pending,
        };
        self.record.push(self.control.catalog(), turn)?;
        self.belief = belief;
        Ok(self.record.turns.last().expect("just pushed"))
    }

    /// The user's reaction to the latest turn.
    pub fn react(&mut self, reaction: Reaction) -> Result<(), SessionError> {
        let latest = self.record.turns.len().checked_sub(1).ok_or(ControlError::NoTurns)?;
        self.record = control::record_outcome(&self.control, &self.record, latest, reaction)?;
        Ok(())
    }

    pub fn trace(&self) -> TraceLog {
        TraceLog {
            domain: self.domain.domain.clone(),
            seed: self.seed,
            config_fingerprint: self.fingerprint.clone(),
            overrides: Overrides::of(&self.config),
            actions: self.control.catalog().ids().into_iter().map(String::from).collect(),
            turns: self.record.turns.clone(),
        }
    }

    pub fn diagnostics(&self) -> Result<Diagnostics, SessionError> {
        let adaptation = self.record.adaptation.clone();
        if let Some(t) = self.record.turns.last() {
            return Ok(Diagnostics {
                turn: Some(t.index),
                modality: t.modality,
                grounding: t.grounding.grounding.clone(),
                activity: t.grounding.activity.clone(),
                maintenance: t.maintenance.dist.clone(),
                goal: t.goal.dist.clone(),
                intention: t.intention.dist.clone(),
                ranking: t.decision.ranking.clone(),
                expected_utilities: t.decision.expected_utilities.clone(),
                chosen: Some(t.decision.chosen.clone()),
                recommendation: t.decision.recommendation.clone(),
                adaptation,
            });
        }
        let goal = intention::GoalPosterior::from_dist(self.domain.priors.clone());
        let status = intention::intention_status(&goal, self.control.settings.intention)?;
        let grounding = control::fuse(&self.control, &self.belief, &status, &self.record)?;
        Ok(Diagnostics {
            turn: None,
            modality: self.modality,
            grounding: grounding.grounding,
            activity: grounding.activity,
            maintenance: self.belief.dist.clone(),
            goal: goal.dist,
            intention: status.dist,
            ranking: Vec::new(),
            expected_utilities: Vec::new(),
            chosen: None,
            recommendation: None,
            adaptation,
        })
    }
}
