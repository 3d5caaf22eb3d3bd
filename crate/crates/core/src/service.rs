//! Turn-based session API. Transport-agnostic; the `grounding` binary serves
//! it over HTTP.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EngineConfig, Overrides};
use crate::control::Reaction;
use crate::maintenance::Modality;
use crate::session::{Diagnostics, Session, SessionError, TurnInput};
use crate::simkit::TraceLog;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is busy with another turn")]
    Busy(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

fn default_modality() -> Modality {
    Modality::SpokenVisual
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub domain: String,
    #[serde(default = "default_modality")]
    pub modality: Modality,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub domain: String,
    pub modality: Modality,
    pub seed: u64,
    pub goals: Vec<String>,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRequest {
    pub transcript: String,
    pub attention_prob: f64,
    #[serde(default)]
    pub noise_level: Option<f64>,
    /// Reaction to the previous turn, applied before this one.
    #[serde(default)]
    pub reaction: Option<Reaction>,
    #[serde(default)]
    pub modality: Option<Modality>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub session: String,
    pub turn: usize,
    pub chosen: String,
    pub goal: Option<String>,
    pub utterance: String,
    /// What the recognizer heard.
    pub heard: String,
    pub diagnostics: Diagnostics,
}

/// Shared store of live sessions. Lookups and creation take a read or write
/// lock on the map; turns lock only their own session, and a session already
/// in a turn rejects new ones instead of queueing them.
pub struct SessionStore {
    config: EngineConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl SessionStore {
    pub fn new(config: EngineConfig) -> Self {
        Self { config, sessions: RwLock::new(HashMap::new()), next_id: AtomicU64::new(1) }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.into()))
    }

    fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let cell = self.get(id)?;
        let mut session = cell.try_lock().ok_or_else(|| ServiceError::Busy(id.into()))?;
        f(&mut session)
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<SessionInfo, ServiceError> {
        let config = self.config.with_overrides(&req.overrides).map_err(SessionError::from)?;
        let session = Session::new(&config, &req.domain, req.modality, req.seed)?;
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let info = SessionInfo {
            id: id.clone(),
            domain: session.domain().domain.clone(),
            modality: session.modality(),
            seed: session.seed(),
            goals: session.domain().goals.clone(),
            diagnostics: session.diagnostics()?,
        };
        self.sessions.write().insert(id, Arc::new(Mutex::new(session)));
        Ok(info)
    }

    /// Apply any attached reaction, then run one turn. A failed turn leaves
    /// the session as it was.
    pub fn post_turn(&self, id: &str, req: &TurnRequest) -> Result<TurnResponse, ServiceError> {
        self.with_session(id, |session| {
            let mut next = session.clone();
            if let Some(r) = req.reaction {
                next.react(r)?;
            }
            let input = TurnInput {
                transcript: req.transcript.clone(),
                attention_prob: req.attention_prob,
                noise_level: req.noise_level,
                modality: req.modality,
            };
            let turn = next.step(&input)?;
            let response = TurnResponse {
                session: id.into(),
                turn: turn.index,
                chosen: turn.decision.chosen.clone(),
                goal: turn.decision.goal.clone(),
                utterance: turn.decision.utterance.clone(),
                heard: turn.frame.transcript.clone(),
                diagnostics: next.diagnostics()?,
            };
            *session = next;
            Ok(response)
        })
    }

    /// React to the latest turn without starting another.
    pub fn post_reaction(&self, id: &str, reaction: Reaction) -> Result<Diagnostics, ServiceError> {
        self.with_session(id, |session| {
            session.react(reaction)?;
            Ok(session.diagnostics()?)
        })
    }

    pub fn get_trace(&self, id: &str) -> Result<TraceLog, ServiceError> {
        self.with_session(id, |s| Ok(s.trace()))
    }

    pub fn diagnostics(&self, id: &str) -> Result<Diagnostics, ServiceError> {
        self.with_session(id, |s| Ok(s.diagnostics()?))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// The session cell itself; holding its lock blocks turns.
    pub fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.get(id)
    }
}
