use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{EngineConfig, Overrides};
use crate::control::{self, DialogRecord, Reaction, Turn, ACTIVITY, DO_SERVICE, GROUNDING, GROUNDING_STATES};
use crate::decision;
use crate::intention;
use crate::maintenance::{self, STATUS};
use crate::probnet::{self, Categorical};

use super::SimError;

/// Everything a run produced, turn by turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    pub domain: String,
    pub seed: u64,
    pub config_fingerprint: String,
    /// Overridable values the run used; replaying applies them to the base
    /// config before checking the fingerprint.
    #[serde(default)]
    pub overrides: Overrides,
    /// Catalog action ids in ranking-tie order.
    pub actions: Vec<String>,
    pub turns: Vec<Turn>,
}

impl TraceLog {
    pub fn to_json(&self) -> Result<String, SimError> {
        serde_json::to_string_pretty(self).map_err(|e| SimError::Json(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Json(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SimError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub turns: usize,
    /// Repair actions chosen, by action id.
    pub repairs: BTreeMap<String, usize>,
    pub actions: BTreeMap<String, usize>,
    pub corrections: usize,
    /// A do_service the user accepted.
    pub service_delivered: bool,
    /// do_service turns the user corrected.
    pub wrong_services: usize,
}

impl Metrics {
    pub fn repair_total(&self) -> usize {
        self.repairs.values().sum()
    }
}

pub fn compute_metrics(trace: &TraceLog) -> Metrics {
    let mut m = Metrics { turns: trace.turns.len(), ..Default::default() };
    for t in &trace.turns {
        let chosen = &t.decision.chosen;
        *m.actions.entry(chosen.clone()).or_default() += 1;
        // Only repairs carry a phrasing.
        if t.decision.phrasing.is_some() {
            *m.repairs.entry(chosen.clone()).or_default() += 1;
        }
        if t.reaction == Reaction::Corrected {
            m.corrections += 1;
        }
        if chosen == DO_SERVICE {
            match t.reaction {
                Reaction::Accepted => m.service_delivered = true,
                Reaction::Corrected => m.wrong_services += 1,
                _ => {}
            }
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown trace format {other}")),
        }
    }
}

/// Flat table: `turn`, `p_<grounding state>` x5, `eu_<action>` per catalog
/// action, `chosen`. Floats use the shortest representation that parses back
/// to the same value.
pub fn to_csv(trace: &TraceLog) -> Result<String, SimError> {
    let csv_err = |e: csv::Error| SimError::Csv(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["turn".to_string()];
    header.extend(GROUNDING_STATES.iter().map(|s| format!("p_{s}")));
    header.extend(trace.actions.iter().map(|a| format!("eu_{a}")));
    header.push("chosen".into());
    w.write_record(&header).map_err(csv_err)?;
    for t in &trace.turns {
        let mut row = vec![t.index.to_string()];
        row.extend(GROUNDING_STATES.iter().map(|s| t.grounding.grounding.prob(s).to_string()));
        for a in &trace.actions {
            let eu = t
                .decision
                .expected_utilities
                .iter()
                .find(|(id, _)| id == a)
                .map(|(_, v)| *v)
                .ok_or_else(|| SimError::Csv(format!("turn {} lacks EU for {a}", t.index)))?;
            row.push(eu.to_string());
        }
        row.push(t.decision.chosen.clone());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub turn: usize,
    pub grounding: Vec<f64>,
    pub eu: Vec<f64>,
    pub chosen: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceTable {
    pub header: Vec<String>,
    pub actions: Vec<String>,
    pub rows: Vec<TraceRow>,
}

impl TraceTable {
    pub fn eu(&self, row: usize, action: &str) -> Option<f64> {
        let i = self.actions.iter().position(|a| a == action)?;
        self.rows.get(row).map(|r| r.eu[i])
    }
}

/// Parse a table written by [`to_csv`].
pub fn read_csv(text: &str) -> Result<TraceTable, SimError> {
    let bad = |m: String| SimError::Csv(m);
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let n = header.len();
    if n < 7 || header[0] != "turn" || header[n - 1] != "chosen" {
        return Err(bad("unexpected header".into()));
    }
    let actions: Vec<String> = header[6..n - 1]
        .iter()
        .map(|h| h.strip_prefix("eu_").map(String::from).ok_or_else(|| bad(format!("bad column {h}"))))
        .collect::<Result<_, _>>()?;
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let f: Vec<&str> = rec.iter().collect();
        rows.push(TraceRow {
            turn: f[0].parse().map_err(|e| bad(format!("turn: {e}")))?,
            grounding: f[1..6].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
            eu: f[6..n - 1].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
            chosen: f[n - 1].to_string(),
        });
    }
    Ok(TraceTable { header, actions, rows })
}

pub fn export_trace(trace: &TraceLog, format: ExportFormat, path: &Path) -> Result<(), SimError> {
    let text = match format {
        ExportFormat::Csv => to_csv(trace)?,
        ExportFormat::Json => trace.to_json()?,
    };
    std::fs::write(path, text).map_err(|source| SimError::Io { path: path.display().to_string(), source })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub turns: usize,
    /// Largest deviation from the enumeration oracle over all checked values.
    pub max_error: f64,
}

const VERIFY_TOL: f64 = 1e-9;

fn max_diff(a: &Categorical<f64>, b: &Categorical<f64>) -> f64 {
    if a.labels() != b.labels() {
        return f64::INFINITY;
    }
    a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Recompute every belief and expected utility of the trace by brute-force
/// enumeration and compare.
pub fn verify_trace(trace: &TraceLog, config: &EngineConfig) -> Result<VerifyReport, SimError> {
    let domain = config.domain(&trace.domain).map_err(crate::session::SessionError::from)?;
    let expected = config.fingerprint(&domain);
    if expected != trace.config_fingerprint {
        return Err(SimError::Fingerprint { expected, found: trace.config_fingerprint.clone() });
    }
    let control = config.control_model().map_err(crate::session::SessionError::from)?;
    let mut report = VerifyReport::default();
    let mut check = |turn: usize, quantity: &str, error: f64| -> Result<(), SimError> {
        report.max_error = report.max_error.max(error);
        if error.is_nan() || error > VERIFY_TOL {
            return Err(SimError::Verification { turn, quantity: quantity.into(), error });
        }
        Ok(())
    };
    let probnet_err = |e: probnet::ProbnetError| SimError::from(crate::session::SessionError::Control(e.into()));

    for t in &trace.turns {
        let model = config
            .maintenance_model(t.modality)
            .map_err(crate::session::SessionError::from)?;
        let net = probnet::rollup(&model.network, STATUS, &t.prior_maintenance).map_err(probnet_err)?;
        let ev = maintenance::frame_to_evidence(&model, &t.frame);
        let oracle = probnet::joint_enumerate(&net, &ev, &[STATUS]).map_err(probnet_err)?;
        check(t.index, "maintenance", max_diff(&oracle[STATUS], &t.maintenance.dist))?;

        let goal = intention::classify_goal(&domain, &intention::tokenize(&t.frame.transcript));
        check(t.index, "goal", max_diff(&goal.dist, &t.goal.dist))?;

        let record = DialogRecord { turns: Vec::new(), adaptation: t.adaptation.clone() };
        let ev = control::fuse_evidence(&control, &t.maintenance, &t.intention, &record);
        if ev != t.grounding.evidence {
            return Err(SimError::Verification { turn: t.index, quantity: "evidence".into(), error: f64::INFINITY });
        }
        let joint = probnet::joint_enumerate_joint(&control.network, &ev, &[ACTIVITY, GROUNDING])
            .map_err(probnet_err)?;
        let marg = |node: &str| joint.marginal(node).map_err(probnet_err);
        check(t.index, "grounding", max_diff(&marg(GROUNDING)?, &t.grounding.grounding))?;
        check(t.index, "activity", max_diff(&marg(ACTIVITY)?, &t.grounding.activity))?;

        let table = control
            .table
            .scaled(&t.adaptation.utility_scale)
            .map_err(|e| SimError::from(crate::session::SessionError::Control(e.into())))?;
        for (action, eu) in &t.decision.expected_utilities {
            let oracle = decision::expected_utility(action, &joint, &table)
                .map_err(|e| SimError::from(crate::session::SessionError::Control(e.into())))?;
            check(t.index, &format!("EU({action})"), (oracle - eu).abs())?;
        }
        if t.decision.ranking.first().map(|(a, _)| a) != Some(&t.decision.chosen) {
            return Err(SimError::Verification { turn: t.index, quantity: "chosen".into(), error: f64::INFINITY });
        }
        report.turns += 1;
    }
    Ok(report)
}
