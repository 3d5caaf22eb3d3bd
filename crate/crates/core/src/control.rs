//! Conversation Control: fuses the maintenance and intention beliefs into a
//! diagnosis of grounding, picks the action with the highest expected utility,
//! renders it, and adapts to the user's reactions over the dialog.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{self, DecisionError, UtilityTable, VoiQuery};
use crate::intention::{GoalModel, GoalPosterior, GoalTemplates, IntentionStatus, IntentionThresholds, NONE_GOAL};
use crate::maintenance::{MaintenanceBelief, Modality, PerceptualFrame};
use crate::probnet::{self, most_probable_state, Evidence, ProbnetError};
use crate::{Categorical, Joint, Network};

pub const MAINTENANCE: &str = "MaintenanceStatus";
pub const INTENTION: &str = "IntentionStatus";
pub const ACTIVITY: &str = "ActivityGoal";
pub const GROUNDING: &str = "GroundingStatus";

pub const GROUNDING_STATES: [&str; 5] =
    ["okay", "channel_failure", "signal_failure", "intention_failure", "conversation_failure"];
pub const ACTIVITY_STATES: [&str; 3] = ["with_system", "with_other_person", "something_else"];

pub const DO_SERVICE: &str = "do_service";
pub const ACKNOWLEDGE: &str = "acknowledge";
pub const ASK_REPEAT: &str = "ask_repeat";
pub const CONFIRM: &str = "confirm";
pub const TROUBLESHOOT: &str = "troubleshoot";
pub const IGNORE: &str = "ignore";
pub const TERMINATE: &str = "terminate";

/// Module names used as reliability keys.
pub const MODULE_MAINTENANCE: &str = "maintenance";
pub const MODULE_INTENTION: &str = "intention";

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("control network: {0}")]
    Structure(String),
    #[error(
        "argmax GroundingStatus for {maintenance}/{intention} is {found}, expected {expected}"
    )]
    ArgmaxConsistency { maintenance: String, intention: String, expected: String, found: String },
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("missing template: {0}")]
    MissingTemplate(String),
    #[error("adaptation parameters: {0}")]
    Adaptation(String),
    #[error("no turn has been taken yet")]
    NoTurns,
    #[error("reaction must target the latest turn {latest} (got {turn})")]
    NotLatest { turn: usize, latest: usize },
    #[error("turn {0} already has a reaction")]
    AlreadyReacted(usize),
    #[error("`pending` is not a reaction")]
    PendingReaction,
    #[error("turn index {got} does not follow {expected}")]
    TurnIndex { expected: usize, got: usize },
    #[error(transparent)]
    Probnet(#[from] ProbnetError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reaction {
    Accepted,
    Corrected,
    Repeated,
    NoResponse,
    Pending,
}

impl Reaction {
    pub fn as_str(self) -> &'static str {
        match self {
            Reaction::Accepted => "accepted",
            Reaction::Corrected => "corrected",
            Reaction::Repeated => "repeated",
            Reaction::NoResponse => "no_response",
            Reaction::Pending => "pending",
        }
    }
}

impl std::str::FromStr for Reaction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accepted" => Ok(Reaction::Accepted),
            "corrected" => Ok(Reaction::Corrected),
            "repeated" => Ok(Reaction::Repeated),
            "no_response" => Ok(Reaction::NoResponse),
            "pending" => Ok(Reaction::Pending),
            other => Err(format!("unknown reaction {other}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phrasing {
    General,
    LevelIndicative,
    /// Member of a combination action.
    Combined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub id: String,
    pub members: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionCatalog {
    pub base: Vec<String>,
    pub repairs: Vec<String>,
    pub goal_bound: Vec<String>,
    /// Grounding level each base repair addresses.
    #[serde(default)]
    pub targets: BTreeMap<String, String>,
    #[serde(default, rename = "combination")]
    pub combinations: Vec<Combination>,
}

impl ActionCatalog {
    /// Base actions followed by combinations.
    pub fn ids(&self) -> Vec<&str> {
        self.base
            .iter()
            .map(String::as_str)
            .chain(self.combinations.iter().map(|c| c.id.as_str()))
            .collect()
    }

    pub fn combination(&self, id: &str) -> Option<&Combination> {
        self.combinations.iter().find(|c| c.id == id)
    }

    pub fn is_repair(&self, id: &str) -> bool {
        self.repairs.iter().any(|r| r == id)
            || self
                .combination(id)
                .is_some_and(|c| c.members.iter().any(|m| self.repairs.contains(m)))
    }

    pub fn binds_goal(&self, id: &str) -> bool {
        self.goal_bound.iter().any(|g| g == id)
            || self
                .combination(id)
                .is_some_and(|c| c.members.iter().any(|m| self.goal_bound.contains(m)))
    }

    /// Levels a repair addresses; combinations address each member's level.
    pub fn levels_of(&self, id: &str) -> Vec<&str> {
        match self.combination(id) {
            Some(c) => c.members.iter().filter_map(|m| self.targets.get(m)).map(String::as_str).collect(),
            None => self.targets.get(id).map(String::as_str).into_iter().collect(),
        }
    }

    fn check(&self, templates: &Templates) -> Result<(), ControlError> {
        let bad = |m: String| Err(ControlError::Catalog(m));
        let mut seen = std::collections::HashSet::new();
        for id in self.ids() {
            if !seen.insert(id) {
                return bad(format!("action {id} declared twice"));
            }
        }
        if !self.base.iter().any(|a| a == IGNORE) {
            return bad("ignore must be in the catalog".into());
        }
        for id in self.repairs.iter().chain(&self.goal_bound).chain(self.targets.keys()) {
            if !self.base.contains(id) {
                return bad(format!("{id} is not a base action"));
            }
        }
        for c in &self.combinations {
            if c.members.len() < 2 {
                return bad(format!("combination {} needs at least two members", c.id));
            }
            if let Some(m) = c.members.iter().find(|m| !self.base.contains(m)) {
                return bad(format!("combination {} references unknown action {m}", c.id));
            }
        }
        for id in &self.base {
            let ok = match id.as_str() {
                DO_SERVICE | IGNORE => true,
                _ if self.repairs.contains(id) => templates.repairs.contains_key(id),
                _ => templates.actions.contains_key(id),
            };
            if !ok {
                return Err(ControlError::MissingTemplate(id.clone()));
            }
        }
        for c in &self.combinations {
            if let Some(m) = c.members.iter().find(|m| self.repairs.contains(m) && !templates.repairs.contains_key(*m)) {
                return Err(ControlError::MissingTemplate(m.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairTemplates {
    pub general: String,
    pub level_indicative: String,
    /// Used inside combinations; falls back to `general`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Templates {
    pub repairs: BTreeMap<String, RepairTemplates>,
    #[serde(default)]
    pub actions: BTreeMap<String, String>,
    /// Phrases filling `{level}`, keyed by grounding state.
    #[serde(default)]
    pub levels: BTreeMap<String, String>,
    #[serde(default)]
    pub recommendations: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    /// ρ: factor applied to the intention reliability on a correction.
    pub reliability_decay: f64,
    /// δ: factor applied to assumption utilities on a correction.
    pub utility_decay: f64,
    /// Fraction of the gap to 1 restored on acceptance.
    pub recovery: f64,
    pub assumption_actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryConfig {
    pub node: String,
    pub states: Vec<String>,
}

impl HistoryConfig {
    pub fn state_for(&self, corrections: u32) -> &str {
        let i = (corrections as usize).min(self.states.len() - 1);
        &self.states[i]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSettings {
    pub catalog: ActionCatalog,
    pub intention: IntentionThresholds,
    pub adaptation: AdaptationConfig,
    pub history: HistoryConfig,
    pub voi: VoiQuery<f64>,
}

/// Everything the control layer needs, checked once at load time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlModel {
    pub network: Network,
    pub table: UtilityTable,
    pub settings: ControlSettings,
    pub templates: Templates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundingBelief {
    pub grounding: Categorical,
    pub activity: Categorical,
    /// Joint over (ActivityGoal, GroundingStatus), the utility table's axes.
    pub joint: Joint,
    /// Evidence the posterior was computed from.
    pub evidence: Evidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub node: String,
    pub key: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDecision {
    /// Allowed actions, best first.
    pub ranking: Vec<(String, f64)>,
    /// Every catalog action in catalog order, allowed or not.
    pub expected_utilities: Vec<(String, f64)>,
    pub chosen: String,
    /// Goal bound by the chosen action.
    pub goal: Option<String>,
    pub phrasing: Option<Phrasing>,
    /// Failure level named by level-indicative phrasing.
    pub level: Option<String>,
    pub recommendation: Option<Recommendation>,
    pub utterance: String,
}

/// Adaptive state carried across turns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adaptation {
    pub correction_count: u32,
    pub repair_counts: BTreeMap<String, u32>,
    pub reliability: BTreeMap<String, f64>,
    /// Absent actions have scale 1.
    pub utility_scale: BTreeMap<String, f64>,
}

impl Default for Adaptation {
    fn default() -> Self {
        Self {
            correction_count: 0,
            repair_counts: BTreeMap::new(),
            reliability: [(MODULE_MAINTENANCE.to_string(), 1.0), (MODULE_INTENTION.to_string(), 1.0)].into(),
            utility_scale: BTreeMap::new(),
        }
    }
}

impl Adaptation {
    pub fn reliability(&self, module: &str) -> f64 {
        self.reliability.get(module).copied().unwrap_or(1.0)
    }

    pub fn scale(&self, action: &str) -> f64 {
        self.utility_scale.get(action).copied().unwrap_or(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub modality: Modality,
    /// The utterance before the recognizer; `frame.transcript` is what was heard.
    pub said: String,
    pub frame: PerceptualFrame,
    /// Maintenance belief carried into this turn.
    pub prior_maintenance: Categorical,
    pub maintenance: MaintenanceBelief,
    pub goal: GoalPosterior,
    pub intention: IntentionStatus,
    /// Adaptive state the decision was made under.
    pub adaptation: Adaptation,
    pub grounding: GroundingBelief,
    pub decision: ActionDecision,
    pub reaction: Reaction,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogRecord {
    pub turns: Vec<Turn>,
    #[serde(flatten)]
    pub adaptation: Adaptation,
}

impl DialogRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a freshly decided turn.
    pub fn push(&mut self, catalog: &ActionCatalog, turn: Turn) -> Result<(), ControlError> {
        let expected = self.turns.len();
        if turn.index != expected {
            return Err(ControlError::TurnIndex { expected, got: turn.index });
        }
        if catalog.is_repair(&turn.decision.chosen) {
            for level in catalog.levels_of(&turn.decision.chosen) {
                *self.adaptation.repair_counts.entry(level.to_string()).or_default() += 1;
            }
        }
        self.turns.push(turn);
        Ok(())
    }

    pub fn troubleshot(&self) -> bool {
        self.turns.iter().any(|t| t.decision.chosen == TROUBLESHOOT)
    }

    /// Counters agree with the turn log and parameters are in bounds.
    pub fn is_consistent(&self, catalog: &ActionCatalog) -> bool {
        let corrections = self.turns.iter().filter(|t| t.reaction == Reaction::Corrected).count();
        let mut repairs: BTreeMap<String, u32> = BTreeMap::new();
        for t in self.turns.iter().filter(|t| catalog.is_repair(&t.decision.chosen)) {
            for level in catalog.levels_of(&t.decision.chosen) {
                *repairs.entry(level.to_string()).or_default() += 1;
            }
        }
        let contiguous = self.turns.iter().enumerate().all(|(i, t)| t.index == i);
        corrections == self.adaptation.correction_count as usize
            && repairs == self.adaptation.repair_counts
            && contiguous
            && self.adaptation.reliability.values().all(|r| *r > 0.0 && *r <= 1.0)
            && self.adaptation.utility_scale.values().all(|s| *s > 0.0 && *s <= 1.0)
    }
}

fn expected_level(maintenance: &str, intention: &str) -> Option<&'static str> {
    match (maintenance, intention) {
        ("no_channel" | "signal_no_channel", _) => Some("channel_failure"),
        ("channel_no_signal", _) => Some("signal_failure"),
        ("channel_and_signal", "low") => Some("intention_failure"),
        ("channel_and_signal", "high") => Some("okay"),
        _ => None,
    }
}

impl ControlModel {
    pub fn new(
        network: Network,
        table: UtilityTable,
        settings: ControlSettings,
        templates: Templates,
    ) -> Result<Self, ControlError> {
        network.ensure_valid()?;
        let structure = |m: String| ControlError::Structure(m);
        let expect_states = |id: &str, states: &[&str]| -> Result<(), ControlError> {
            let node = network.node(id).ok_or_else(|| structure(format!("missing node {id}")))?;
            if node.states != states {
                return Err(structure(format!("{id} states must be {states:?}")));
            }
            Ok(())
        };
        expect_states(MAINTENANCE, &crate::maintenance::STATUS_STATES)?;
        expect_states(INTENTION, &crate::intention::STATUS_STATES)?;
        expect_states(ACTIVITY, &ACTIVITY_STATES)?;
        expect_states(GROUNDING, &GROUNDING_STATES)?;
        for root in [MAINTENANCE, INTENTION] {
            if !network.node(root).expect("checked").parents.is_empty() {
                return Err(structure(format!("{root} must be a root")));
            }
        }
        let history = &settings.history;
        let hnode = network
            .node(&history.node)
            .ok_or_else(|| structure(format!("missing history node {}", history.node)))?;
        if hnode.states != history.states || history.states.is_empty() {
            return Err(structure(format!("{} states must match the history config", history.node)));
        }
        let axes: Vec<&str> = table.axis_nodes();
        if axes != [ACTIVITY, GROUNDING]
            || table.axes()[0].states != ACTIVITY_STATES
            || table.axes()[1].states != GROUNDING_STATES
        {
            return Err(structure("utility axes must be ActivityGoal then GroundingStatus".into()));
        }
        let catalog = &settings.catalog;
        if table.actions().iter().map(String::as_str).ne(catalog.ids()) {
            return Err(ControlError::Catalog("utility table actions must match the catalog order".into()));
        }
        catalog.check(&templates)?;
        for cand in &settings.voi.candidates {
            if !network.contains(cand) || [MAINTENANCE, INTENTION, ACTIVITY, GROUNDING].contains(&cand.as_str()) {
                return Err(structure(format!("{cand} cannot be a VOI candidate")));
            }
            if *cand == history.node {
                return Err(structure("the history node is always observed".into()));
            }
            let key = settings.voi.recommendations.get(cand).unwrap_or(cand);
            if !templates.recommendations.contains_key(key) {
                return Err(ControlError::MissingTemplate(format!("recommendation {key}")));
            }
        }
        let a = &settings.adaptation;
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !(unit(a.reliability_decay) && unit(a.utility_decay) && (0.0..=1.0).contains(&a.recovery)) {
            return Err(ControlError::Adaptation("decays must be in (0,1] and recovery in [0,1]".into()));
        }
        if let Some(x) = a.assumption_actions.iter().find(|x| !catalog.ids().contains(&x.as_str())) {
            return Err(ControlError::Adaptation(format!("unknown action {x}")));
        }
        for level in GROUNDING_STATES.iter().skip(1) {
            if !templates.levels.contains_key(*level) {
                return Err(ControlError::MissingTemplate(format!("level phrase {level}")));
            }
        }
        let model = Self { network, table, settings, templates };
        model.check_argmax()?;
        Ok(model)
    }

    /// Point-mass maintenance and intention on a fresh record must diagnose
    /// the matching grounding level.
    fn check_argmax(&self) -> Result<(), ControlError> {
        let record = DialogRecord::new();
        for (i, m) in crate::maintenance::STATUS_STATES.iter().enumerate() {
            for (j, s) in crate::intention::STATUS_STATES.iter().enumerate() {
                let Some(expected) = expected_level(m, s) else { continue };
                let mut mp = vec![0.0; 4];
                mp[i] = 1.0;
                let mut ip = vec![0.0; 3];
                ip[j] = 1.0;
                let mb = MaintenanceBelief {
                    dist: Categorical::new(crate::maintenance::STATUS_STATES, mp)?,
                    turn: 0,
                };
                let is = IntentionStatus { dist: Categorical::new(crate::intention::STATUS_STATES, ip)? };
                let found = most_probable_state(&fuse(self, &mb, &is, &record)?.grounding).to_string();
                if found != expected {
                    return Err(ControlError::ArgmaxConsistency {
                        maintenance: m.to_string(),
                        intention: s.to_string(),
                        expected: expected.into(),
                        found,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> &ActionCatalog {
        &self.settings.catalog
    }
}

/// Flatten `dist` toward uniform by the module's reliability.
pub fn adjust_for_history(record: &DialogRecord, module: &str, dist: &Categorical) -> Categorical {
    let r = record.adaptation.reliability(module).clamp(0.0, 1.0);
    let u = 1.0 / dist.len() as f64;
    let probs = dist.probs().iter().map(|p| r * p + (1.0 - r) * u).collect();
    Categorical::new(dist.labels().to_vec(), probs).expect("convex mix of distributions")
}

/// Evidence for the control network: reliability-adjusted module beliefs as
/// virtual evidence, and the correction count as a hard observation.
pub fn fuse_evidence(
    model: &ControlModel,
    maintenance: &MaintenanceBelief,
    intent: &IntentionStatus,
    record: &DialogRecord,
) -> Evidence {
    let m = adjust_for_history(record, MODULE_MAINTENANCE, &maintenance.dist);
    let i = adjust_for_history(record, MODULE_INTENTION, &intent.dist);
    let history = &model.settings.history;
    Evidence::new()
        .with_virtual(MAINTENANCE, m.probs().to_vec())
        .with_virtual(INTENTION, i.probs().to_vec())
        .with_hard(&history.node, history.state_for(record.adaptation.correction_count))
}

pub fn fuse(
    model: &ControlModel,
    maintenance: &MaintenanceBelief,
    intent: &IntentionStatus,
    record: &DialogRecord,
) -> Result<GroundingBelief, ControlError> {
    let evidence = fuse_evidence(model, maintenance, intent, record);
    let joint = probnet::posterior_joint(&model.network, &evidence, &[ACTIVITY, GROUNDING])?;
    Ok(GroundingBelief {
        grounding: joint.marginal(GROUNDING)?,
        activity: joint.marginal(ACTIVITY)?,
        joint,
        evidence,
    })
}

/// Actions open this turn. Without any recognized input the only sensible
/// move is to wait.
pub fn allowed_actions<'a>(
    model: &'a ControlModel,
    goal: &GoalPosterior,
    record: &DialogRecord,
    input_present: bool,
) -> Vec<&'a str> {
    if !input_present {
        return vec![IGNORE];
    }
    let catalog = model.catalog();
    catalog
        .ids()
        .into_iter()
        .filter(|id| !(catalog.binds_goal(id) && goal.top == NONE_GOAL))
        .filter(|id| *id != TERMINATE || record.troubleshot())
        .collect()
}

pub struct RenderContext<'a> {
    pub action: &'a str,
    pub goal: Option<&'a GoalTemplates>,
    pub phrasing: Option<Phrasing>,
    pub level: Option<&'a str>,
    pub recommendation: Option<&'a str>,
}

fn fill(template: &str, ctx: &RenderContext, templates: &Templates) -> Result<String, ControlError> {
    let mut out = template.to_string();
    if out.contains("{goal}") {
        let goal = ctx
            .goal
            .ok_or_else(|| ControlError::MissingTemplate(format!("goal phrase for {}", ctx.action)))?;
        out = out.replace("{goal}", &goal.phrase);
    }
    if out.contains("{level}") {
        let phrase = ctx
            .level
            .and_then(|l| templates.levels.get(l))
            .ok_or_else(|| ControlError::MissingTemplate(format!("level phrase for {}", ctx.action)))?;
        out = out.replace("{level}", phrase);
    }
    Ok(out)
}

fn render_repair(
    id: &str,
    phrasing: Phrasing,
    ctx: &RenderContext,
    templates: &Templates,
) -> Result<String, ControlError> {
    let t = templates.repairs.get(id).ok_or_else(|| ControlError::MissingTemplate(id.into()))?;
    let text = match phrasing {
        Phrasing::General => match (id, ctx.goal.and_then(|g| g.confirm.as_deref())) {
            (CONFIRM, Some(custom)) => custom,
            _ => &t.general,
        },
        Phrasing::LevelIndicative => &t.level_indicative,
        Phrasing::Combined => t.combined.as_deref().unwrap_or(&t.general),
    };
    fill(text, ctx, templates)
}

pub fn render_action(
    ctx: &RenderContext,
    catalog: &ActionCatalog,
    templates: &Templates,
) -> Result<String, ControlError> {
    let missing = |what: String| ControlError::MissingTemplate(what);
    let mut text = if let Some(combo) = catalog.combination(ctx.action) {
        let parts = combo
            .members
            .iter()
            .map(|m| {
                if catalog.repairs.contains(m) {
                    render_repair(m, Phrasing::Combined, ctx, templates)
                } else {
                    let sub = RenderContext { action: m, recommendation: None, ..*ctx };
                    render_action(&sub, catalog, templates)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        parts.join(" ")
    } else {
        match ctx.action {
            IGNORE => return Ok(String::new()),
            DO_SERVICE => ctx.goal.ok_or_else(|| missing("service for do_service".into()))?.service.clone(),
            ACKNOWLEDGE => match ctx.goal.and_then(|g| g.acknowledge.clone()) {
                Some(t) => t,
                None => templates.actions.get(ACKNOWLEDGE).cloned().ok_or_else(|| missing(ACKNOWLEDGE.into()))?,
            },
            id if catalog.repairs.iter().any(|r| r == id) => {
                render_repair(id, ctx.phrasing.unwrap_or(Phrasing::General), ctx, templates)?
            }
            id => fill(templates.actions.get(id).ok_or_else(|| missing(id.into()))?, ctx, templates)?,
        }
    };
    if let Some(r) = ctx.recommendation {
        text.push(' ');
        text.push_str(r);
    }
    Ok(text)
}

/// Rank the allowed actions under the record's utility scaling, bind the top
/// goal where needed, choose the phrasing and render.
pub fn select_action(
    model: &ControlModel,
    grounding: &GroundingBelief,
    goal: &GoalPosterior,
    record: &DialogRecord,
    domain: &GoalModel,
    input_present: bool,
) -> Result<ActionDecision, ControlError> {
    let table = model.table.scaled(&record.adaptation.utility_scale)?;
    let catalog = model.catalog();
    let allowed = allowed_actions(model, goal, record, input_present);
    let ranking = decision::best_action(&grounding.joint, &table, &allowed)?;
    let expected_utilities = table
        .actions()
        .iter()
        .map(|a| Ok((a.clone(), decision::expected_utility(a, &grounding.joint, &table)?)))
        .collect::<Result<Vec<_>, DecisionError>>()?;
    let chosen = ranking[0].0.clone();

    let diagnosis = most_probable_state(&grounding.grounding);
    let failure = matches!(diagnosis, "channel_failure" | "signal_failure" | "intention_failure");
    let phrasing = if catalog.combination(&chosen).is_some() {
        Some(Phrasing::Combined)
    } else if catalog.repairs.contains(&chosen) {
        Some(if failure { Phrasing::LevelIndicative } else { Phrasing::General })
    } else {
        None
    };
    let level = (phrasing == Some(Phrasing::LevelIndicative)).then(|| diagnosis.to_string());
    let bound = catalog.binds_goal(&chosen).then(|| goal.top.clone());

    let recommendation = if chosen == TROUBLESHOOT && !model.settings.voi.candidates.is_empty() {
        decision::recommend_observation(&model.network, &grounding.evidence, &table, &model.settings.voi)?
            .map(|(node, key)| {
                let text = model
                    .templates
                    .recommendations
                    .get(&key)
                    .cloned()
                    .ok_or_else(|| ControlError::MissingTemplate(format!("recommendation {key}")))?;
                Ok::<_, ControlError>(Recommendation { node, key, text })
            })
            .transpose()?
    } else {
        None
    };

    let ctx = RenderContext {
        action: &chosen,
        goal: bound.as_deref().and_then(|g| domain.templates.get(g)),
        phrasing,
        level: level.as_deref(),
        recommendation: recommendation.as_ref().map(|r| r.text.as_str()),
    };
    let utterance = render_action(&ctx, catalog, &model.templates)?;
    Ok(ActionDecision {
        ranking,
        expected_utilities,
        chosen,
        goal: bound,
        phrasing,
        level,
        recommendation,
        utterance,
    })
}

/// Attach the user's reaction to the latest turn and adapt.
pub fn record_outcome(
    model: &ControlModel,
    record: &DialogRecord,
    turn: usize,
    reaction: Reaction,
) -> Result<DialogRecord, ControlError> {
    if reaction == Reaction::Pending {
        return Err(ControlError::PendingReaction);
    }
    let latest = record.turns.len().checked_sub(1).ok_or(ControlError::NoTurns)?;
    if turn != latest {
        return Err(ControlError::NotLatest { turn, latest });
    }
    if record.turns[latest].reaction != Reaction::Pending {
        return Err(ControlError::AlreadyReacted(latest));
    }
    let a = &model.settings.adaptation;
    let mut next = record.clone();
    next.turns[latest].reaction = reaction;
    let state = &mut next.adaptation;
    match reaction {
        Reaction::Corrected => {
            state.correction_count += 1;
            let r = state.reliability(MODULE_INTENTION);
            state.reliability.insert(MODULE_INTENTION.into(), r * a.reliability_decay);
            for action in &a.assumption_actions {
                let s = state.scale(action);
                state.utility_scale.insert(action.clone(), s * a.utility_decay);
            }
        }
        Reaction::Accepted => {
            for v in state.reliability.values_mut().chain(state.utility_scale.values_mut()) {
                *v += a.recovery * (1.0 - *v);
            }
        }
        Reaction::Repeated | Reaction::NoResponse | Reaction::Pending => {}
    }
    Ok(next)
}
