use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::probnet::{Axis, Joint};
use crate::scalar::Prob;

use super::DecisionError;

/// Utilities of each action under every joint outcome of `axes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Prob", try_from = "TableFile<S>", into = "TableFile<S>")]
pub struct UtilityTable<S: Prob = f64> {
    actions: Vec<String>,
    axes: Vec<Axis>,
    /// Action-major; within an action, outcomes row-major with the last axis
    /// varying fastest.
    values: Vec<S>,
}

/// On-disk layout: one flat row of utilities per action.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
struct TableFile<S: Prob> {
    #[serde(rename = "axis")]
    axes: Vec<Axis>,
    #[serde(rename = "action")]
    actions: Vec<ActionRow<S>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Prob")]
struct ActionRow<S: Prob> {
    id: String,
    utilities: Vec<S>,
}

impl<S: Prob> TryFrom<TableFile<S>> for UtilityTable<S> {
    type Error = DecisionError;

    fn try_from(f: TableFile<S>) -> Result<Self, Self::Error> {
        let actions = f.actions.iter().map(|a| a.id.clone()).collect();
        let values = f.actions.into_iter().flat_map(|a| a.utilities).collect();
        UtilityTable::new(actions, f.axes, values)
    }
}

impl<S: Prob> From<UtilityTable<S>> for TableFile<S> {
    fn from(t: UtilityTable<S>) -> Self {
        let width = t.outcome_count();
        let actions = t
            .actions
            .iter()
            .enumerate()
            .map(|(i, id)| ActionRow {
                id: id.clone(),
                utilities: t.values[i * width..(i + 1) * width].to_vec(),
            })
            .collect();
        TableFile { axes: t.axes, actions }
    }
}

impl<S: Prob> UtilityTable<S> {
    pub fn new(actions: Vec<String>, axes: Vec<Axis>, values: Vec<S>) -> Result<Self, DecisionError> {
        if actions.is_empty() || axes.is_empty() {
            return Err(DecisionError::InvalidTable("needs at least one action and one axis".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = actions.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(DecisionError::InvalidTable(format!("action {dup} listed twice")));
        }
        let width: usize = axes.iter().map(|a| a.states.len()).product();
        if width == 0 || values.len() != actions.len() * width {
            return Err(DecisionError::InvalidTable(format!(
                "{} actions x {} outcomes needs {} utilities, got {}",
                actions.len(),
                width,
                actions.len() * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DecisionError::InvalidTable("utilities must be finite".into()));
        }
        Ok(Self { actions, axes, values })
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis_nodes(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.node.as_str()).collect()
    }

    pub fn outcome_count(&self) -> usize {
        self.axes.iter().map(|a| a.states.len()).product()
    }

    pub fn action_index(&self, action: &str) -> Result<usize, DecisionError> {
        self.actions
            .iter()
            .position(|a| a == action)
            .ok_or_else(|| DecisionError::UnknownAction(action.into()))
    }

    /// Utility row of `action` over all outcomes.
    pub fn row(&self, action: &str) -> Result<&[S], DecisionError> {
        let i = self.action_index(action)?;
        let w = self.outcome_count();
        Ok(&self.values[i * w..(i + 1) * w])
    }

    /// Utility of `action` at one outcome tuple given by state names.
    pub fn utility(&self, action: &str, outcome: &[&str]) -> Result<S, DecisionError> {
        if outcome.len() != self.axes.len() {
            return Err(DecisionError::AxisMismatch);
        }
        let mut cell = 0;
        for (axis, state) in self.axes.iter().zip(outcome) {
            let s = axis
                .states
                .iter()
                .position(|x| x == state)
                .ok_or(DecisionError::AxisMismatch)?;
            cell = cell * axis.states.len() + s;
        }
        Ok(self.row(action)?[cell])
    }

    /// Multiply one action's utilities by `factor`.
    pub fn scale_action(&mut self, action: &str, factor: S) -> Result<(), DecisionError> {
        let i = self.action_index(action)?;
        let w = self.outcome_count();
        for v in &mut self.values[i * w..(i + 1) * w] {
            *v = *v * factor;
        }
        Ok(())
    }

    /// Copy with each listed action scaled; unlisted actions keep factor 1.
    pub fn scaled(&self, factors: &BTreeMap<String, S>) -> Result<Self, DecisionError> {
        let mut t = self.clone();
        for (a, f) in factors {
            t.scale_action(a, *f)?;
        }
        Ok(t)
    }

    /// Apply `u -> a*u + b` to every utility.
    pub fn affine(&self, a: S, b: S) -> Self {
        let mut t = self.clone();
        for v in &mut t.values {
            *v = a * *v + b;
        }
        t
    }

    pub(crate) fn check_belief(&self, belief: &Joint<S>) -> Result<(), DecisionError> {
        if belief.axes() != self.axes.as_slice() {
            return Err(DecisionError::AxisMismatch);
        }
        Ok(())
    }
}
