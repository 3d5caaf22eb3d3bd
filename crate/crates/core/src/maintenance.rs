//! Channel- and signal-level belief tracking.
//!
//! Each turn a [`PerceptualFrame`] is turned into soft evidence on the user's
//! focus of attention and on how well the signal was identified, and the
//! Maintenance Status node is updated on top of its own previous posterior.
//!
//! The default network is generated from the parameters in
//! `config/maintenance.toml`:
//!
//! ```text
//! P(status | prev, focus, signal) = (1 - w) * f(focus, signal) + w * [status = prev]
//! f = (no_channel, channel_no_signal, signal_no_channel, channel_and_signal)
//!   = ((1-c)(1-s), c(1-s), (1-c)s, cs),  c = channel[focus], s = signal[level]
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probnet::{self, parent_tuples, CptRow, ProbnetError};
use crate::{Categorical, Evidence, Network, NodeSpec};

pub const FOCUS: &str = "UserFocusOfAttention";
pub const SIGNAL: &str = "SignalIdentified";
pub const STATUS: &str = "MaintenanceStatus";
pub const PREV_STATUS: &str = "PreviousMaintenanceStatus";

pub const FOCUS_STATES: [&str; 3] = ["system", "other_person", "elsewhere"];
pub const SIGNAL_STATES: [&str; 3] = ["high", "medium", "low"];
pub const STATUS_STATES: [&str; 4] =
    ["no_channel", "channel_no_signal", "signal_no_channel", "channel_and_signal"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaintenanceError {
    #[error("unknown modality {0}")]
    UnknownModality(String),
    #[error("frame field {field} = {value} outside [0, 1]")]
    FrameRange { field: &'static str, value: f64 },
    #[error("frame for turn {got} does not follow belief at turn {prev}")]
    OutOfOrder { prev: i64, got: u64 },
    #[error("maintenance network: {0}")]
    Structure(String),
    #[error("monotonicity constraint violated: {0}")]
    Monotonicity(String),
    #[error("bad bucketing thresholds: {0}")]
    Bucketing(String),
    #[error(transparent)]
    Probnet(#[from] ProbnetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    SpokenVisual,
    SpokenOnly,
    Typed,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::SpokenVisual, Modality::SpokenOnly, Modality::Typed];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::SpokenVisual => "spoken_visual",
            Modality::SpokenOnly => "spoken_only",
            Modality::Typed => "typed",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = MaintenanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MaintenanceError::UnknownModality(s.into()))
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which observation feeds which node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pathway {
    /// Face-pose attention probability into the focus node.
    Attention,
    /// Presence of typed input into the focus node.
    InputPresence,
    AsrConfidence,
    ParseQuality,
}

/// One turn of observable evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptualFrame {
    pub attention_prob: f64,
    pub transcript: String,
    pub asr_confidence: f64,
    pub parse_quality: f64,
    pub timestamp: u64,
}

impl PerceptualFrame {
    pub fn check(&self) -> Result<(), MaintenanceError> {
        for (field, value) in [
            ("attention_prob", self.attention_prob),
            ("asr_confidence", self.asr_confidence),
            ("parse_quality", self.parse_quality),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(MaintenanceError::FrameRange { field, value });
            }
        }
        Ok(())
    }
}

/// Soft three-way split of a [0, 1] score into (high, medium, low).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bucketing {
    pub low_threshold: f64,
    pub high_threshold: f64,
    /// Half-width of the linear handoff around each threshold.
    pub handoff: f64,
    /// Weight of ASR confidence against parse quality for spoken input.
    pub asr_weight: f64,
}

impl Bucketing {
    pub fn check(&self) -> Result<(), MaintenanceError> {
        let ok = self.handoff >= 0.0
            && self.low_threshold - self.handoff >= 0.0
            && self.low_threshold + self.handoff <= self.high_threshold - self.handoff
            && self.high_threshold + self.handoff <= 1.0
            && (0.0..=1.0).contains(&self.asr_weight);
        if ok {
            Ok(())
        } else {
            Err(MaintenanceError::Bucketing(format!("{self:?}")))
        }
    }

    /// Membership of `x` in (high, medium, low); always sums to one.
    pub fn split(&self, x: f64) -> [f64; 3] {
        let ramp = |t: f64| -> f64 {
            // 0 below t - h, 1 above t + h, linear between.
            if self.handoff == 0.0 {
                if x >= t { 1.0 } else { 0.0 }
            } else {
                ((x - (t - self.handoff)) / (2.0 * self.handoff)).clamp(0.0, 1.0)
            }
        };
        let above_low = ramp(self.low_threshold);
        let high = ramp(self.high_threshold);
        [high, above_low - high, 1.0 - above_low]
    }
}

/// Parameters the default networks are generated from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceConfig {
    pub version: String,
    /// Weight of the previous turn's status in the status CPT.
    pub persistence: f64,
    /// P(channel open | focus) for system, other_person, elsewhere.
    pub channel_given_focus: [f64; 3],
    /// P(signal identified | level) for high, medium, low.
    pub signal_given_level: [f64; 3],
    pub focus_prior: [f64; 3],
    pub signal_prior: [f64; 3],
    /// Share of (1 - attention) assigned to other_person and elsewhere.
    pub attention_split: [f64; 2],
    /// Focus likelihoods for typed input when text is present / absent.
    pub typed_present: [f64; 3],
    pub typed_absent: [f64; 3],
    pub bucketing: Bucketing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceModel {
    pub network: Network,
    pub bucketing: Bucketing,
    pub attention_split: [f64; 2],
    pub typed_present: [f64; 3],
    pub typed_absent: [f64; 3],
    pub modality: Modality,
}

/// Belief over the four maintenance states after a given turn (-1 before the
/// first turn).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceBelief {
    pub dist: Categorical,
    pub turn: i64,
}

impl MaintenanceBelief {
    pub fn initial() -> Self {
        Self { dist: Categorical::uniform(STATUS_STATES).expect("static labels"), turn: -1 }
    }

    /// P(channel_no_signal) + P(channel_and_signal).
    pub fn channel_open(&self) -> f64 {
        self.dist.prob("channel_no_signal") + self.dist.prob("channel_and_signal")
    }

    /// P(signal_no_channel) + P(channel_and_signal).
    pub fn signal_identified(&self) -> f64 {
        self.dist.prob("signal_no_channel") + self.dist.prob("channel_and_signal")
    }
}

fn status_row(c: f64, s: f64) -> [f64; 4] {
    [(1.0 - c) * (1.0 - s), c * (1.0 - s), (1.0 - c) * s, c * s]
}

/// Build the maintenance network from its parameters.
pub fn build_network(cfg: &MaintenanceConfig) -> Network {
    let w = cfg.persistence;
    let mut rows = Vec::new();
    for (prev, _) in STATUS_STATES.iter().enumerate() {
        for c in cfg.channel_given_focus {
            for s in cfg.signal_given_level {
                let fresh = status_row(c, s);
                let row = (0..4)
                    .map(|k| (1.0 - w) * fresh[k] + if k == prev { w } else { 0.0 })
                    .collect();
                rows.push(row);
            }
        }
    }
    let mut net = Network::new(vec![
        NodeSpec::temporal(PREV_STATUS, STATUS_STATES, vec![0.25; 4]),
        NodeSpec::root(FOCUS, FOCUS_STATES, cfg.focus_prior.to_vec()),
        NodeSpec::root(SIGNAL, SIGNAL_STATES, cfg.signal_prior.to_vec()),
        NodeSpec::with_rows(
            STATUS,
            STATUS_STATES,
            &[(PREV_STATUS, &STATUS_STATES), (FOCUS, &FOCUS_STATES), (SIGNAL, &SIGNAL_STATES)],
            rows,
        ),
    ]);
    net.name = Some(format!("maintenance-{}", cfg.version));
    net
}

impl MaintenanceModel {
    pub fn from_config(cfg: &MaintenanceConfig, modality: Modality) -> Result<Self, MaintenanceError> {
        Self::from_network(
            build_network(cfg),
            cfg.bucketing.clone(),
            cfg.attention_split,
            cfg.typed_present,
            cfg.typed_absent,
            modality,
        )
    }

    /// Accept any network with the expected nodes and state lists, provided
    /// its CPTs satisfy the monotonicity constraints.
    pub fn from_network(
        network: Network,
        bucketing: Bucketing,
        attention_split: [f64; 2],
        typed_present: [f64; 3],
        typed_absent: [f64; 3],
        modality: Modality,
    ) -> Result<Self, MaintenanceError> {
        network.ensure_valid()?;
        bucketing.check()?;
        for (id, states) in [
            (FOCUS, &FOCUS_STATES[..]),
            (SIGNAL, &SIGNAL_STATES[..]),
            (STATUS, &STATUS_STATES[..]),
        ] {
            let node = network
                .node(id)
                .ok_or_else(|| MaintenanceError::Structure(format!("missing node {id}")))?;
            if node.states != states {
                return Err(MaintenanceError::Structure(format!("{id} states must be {states:?}")));
            }
        }
        let temporal = network
            .temporal_parent_of(STATUS)
            .ok_or_else(|| MaintenanceError::Structure(format!("{STATUS} needs a temporal prior parent")))?;
        if temporal.states != STATUS_STATES {
            return Err(MaintenanceError::Structure("temporal prior state mismatch".into()));
        }
        let split_ok = attention_split.iter().all(|x| *x >= 0.0)
            && (attention_split.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if !split_ok {
            return Err(MaintenanceError::Structure("attention split must sum to one".into()));
        }
        check_monotone(&network)?;
        Ok(Self { network, bucketing, attention_split, typed_present, typed_absent, modality })
    }

    pub fn pathways(&self) -> Vec<Pathway> {
        match self.modality {
            Modality::SpokenVisual => vec![Pathway::Attention, Pathway::AsrConfidence, Pathway::ParseQuality],
            Modality::SpokenOnly => vec![Pathway::AsrConfidence, Pathway::ParseQuality],
            Modality::Typed => vec![Pathway::InputPresence, Pathway::ParseQuality],
        }
    }
}

/// The load-time CPT constraints: attending to the system never lowers the
/// chance of an open channel, and a better identified signal never lowers the
/// chance the signal got through.
fn check_monotone(network: &Network) -> Result<(), MaintenanceError> {
    let status = network.node(STATUS).expect("checked");
    let spaces: Vec<Vec<String>> = status
        .parents
        .iter()
        .map(|p| network.node(p).expect("validated").states.clone())
        .collect();
    let focus_k = status.parents.iter().position(|p| p == FOCUS);
    let signal_k = status.parents.iter().position(|p| p == SIGNAL);
    let lookup = |given: &[String]| -> &CptRow<f64> {
        status.cpt.iter().find(|r| r.given == given).expect("validated")
    };
    let channel = |r: &CptRow<f64>| r.probs[1] + r.probs[3];
    let signal = |r: &CptRow<f64>| r.probs[2] + r.probs[3];
    let eps = 1e-12;
    for key in parent_tuples(&spaces) {
        if let Some(k) = focus_k {
            if key[k] == "system" {
                let base = channel(lookup(&key));
                for other in ["other_person", "elsewhere"] {
                    let mut alt = key.clone();
                    alt[k] = other.into();
                    if channel(lookup(&alt)) > base + eps {
                        return Err(MaintenanceError::Monotonicity(format!(
                            "P(channel open) at [{}] exceeds focus=system",
                            alt.join(",")
                        )));
                    }
                }
            }
        }
        if let Some(k) = signal_k {
            let pos = SIGNAL_STATES.iter().position(|s| *s == key[k]).expect("validated");
            if pos + 1 < SIGNAL_STATES.len() {
                let mut lower = key.clone();
                lower[k] = SIGNAL_STATES[pos + 1].into();
                if signal(lookup(&lower)) > signal(lookup(&key)) + eps {
                    return Err(MaintenanceError::Monotonicity(format!(
                        "P(signal identified) at [{}] exceeds [{}]",
                        lower.join(","),
                        key.join(",")
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Soft evidence for one frame.
pub fn frame_to_evidence(model: &MaintenanceModel, frame: &PerceptualFrame) -> Evidence {
    let mut ev = Evidence::new();
    match model.modality {
        Modality::SpokenVisual => {
            let a = frame.attention_prob;
            let rest = 1.0 - a;
            ev = ev.with_virtual(FOCUS, vec![
                a,
                rest * model.attention_split[0],
                rest * model.attention_split[1],
            ]);
        }
        Modality::Typed => {
            let lik = if frame.transcript.trim().is_empty() {
                model.typed_absent
            } else {
                model.typed_present
            };
            ev = ev.with_virtual(FOCUS, lik.to_vec());
        }
        Modality::SpokenOnly => {}
    }
    let b = &model.bucketing;
    let lik: Vec<f64> = match model.modality {
        Modality::Typed => b.split(frame.parse_quality).to_vec(),
        Modality::SpokenVisual | Modality::SpokenOnly => {
            let asr = b.split(frame.asr_confidence);
            let parse = b.split(frame.parse_quality);
            (0..3).map(|k| b.asr_weight * asr[k] + (1.0 - b.asr_weight) * parse[k]).collect()
        }
    };
    ev.with_virtual(SIGNAL, lik)
}

/// Roll the previous belief forward and condition on the new frame.
pub fn update(
    model: &MaintenanceModel,
    prev: &MaintenanceBelief,
    frame: &PerceptualFrame,
) -> Result<MaintenanceBelief, MaintenanceError> {
    frame.check()?;
    if prev.turn + 1 != frame.timestamp as i64 {
        return Err(MaintenanceError::OutOfOrder { prev: prev.turn, got: frame.timestamp });
    }
    let net = probnet::rollup(&model.network, STATUS, &prev.dist)?;
    let ev = frame_to_evidence(model, frame);
    let dist = probnet::posterior_of(&net, &ev, STATUS)?;
    Ok(MaintenanceBelief { dist, turn: frame.timestamp as i64 })
}
