//! Scenario files: a JSON schema bundling the workspace, the automaton (inline
//! or by relative path), and either a scripted event list or generator
//! parameters, plus the run parameters (horizon, time_comp, total_time).
//!
//! Schema (all cells are `{"x": .., "y": ..}`):
//!
//! ```json
//! {
//!   "workspace": {
//!     "width": 9, "height": 9,
//!     "obstacles": [{"x": 6, "y": 0}, ...],
//!     "labels": [{"cell": {"x": 1, "y": 2}, "props": ["p1"]}, ...],
//!     "initial": {"x": 1, "y": 5},
//!     "action_cost": 1
//!   },
//!   "automaton": "automaton_fig1a.json",
//!   "events": [{"cell": {"x": 5, "y": 2}, "t_start": 10, "t_end": 25,
//!               "announced_at": 10}],
//!   "horizon": 39, "time_comp": 1, "total_time": 50
//! }
//! ```
//!
//! `automaton` is either a path relative to the scenario file or an inline
//! automaton object.  Exactly one of `events` / `generator` must be present
//! (`generator` carries the random-blockage parameters; events are then
//! sampled per seed at run time).

use crate::buchi::{AutomatonError, BuchiAutomaton};
use crate::simulator::{EventSource, GeneratorParams, Scenario};
use crate::workspace::{Cell, DynamicEvent, Time, Workspace, WorkspaceError};
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed scenario: {0}")]
    Workspace(#[from] WorkspaceError),
    #[error("malformed scenario: {0}")]
    Automaton(#[from] AutomatonError),
    #[error("malformed scenario: {0}")]
    Schema(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceFile {
    width: u16,
    height: u16,
    #[serde(default)]
    obstacles: Vec<Cell>,
    #[serde(default)]
    labels: Vec<LabelEntry>,
    initial: Cell,
    #[serde(default = "default_action_cost")]
    action_cost: u32,
}

fn default_action_cost() -> u32 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelEntry {
    cell: Cell,
    props: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AutomatonRef {
    Path(String),
    Inline(serde_json::Value),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    workspace: WorkspaceFile,
    automaton: AutomatonRef,
    events: Option<Vec<DynamicEvent>>,
    generator: Option<GeneratorParams>,
    horizon: Time,
    time_comp: Time,
    total_time: Time,
}

fn build_workspace(wf: WorkspaceFile) -> Result<Workspace, ScenarioError> {
    let mut labels: BTreeMap<Cell, BTreeSet<String>> = BTreeMap::new();
    for e in wf.labels {
        labels.entry(e.cell).or_default().extend(e.props);
    }
    let obstacles: BTreeSet<Cell> = wf.obstacles.into_iter().collect();
    Ok(Workspace::new(
        wf.width,
        wf.height,
        obstacles,
        labels,
        wf.initial,
        wf.action_cost,
    )?)
}

/// Parse a scenario from JSON text; `base_dir` resolves automaton paths.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    let automaton = match file.automaton {
        AutomatonRef::Inline(v) => BuchiAutomaton::parse_automaton(&v.to_string())?,
        AutomatonRef::Path(rel) => {
            let path = base_dir.join(&rel);
            let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                path: path.display().to_string(),
                source,
            })?;
            BuchiAutomaton::parse_automaton(&text)?
        }
    };
    let events = match (file.events, file.generator) {
        (Some(list), None) => {
            for e in &list {
                if e.t_end <= e.t_start {
                    return Err(ScenarioError::Schema(format!(
                        "event on {} has t_end {} <= t_start {}",
                        e.cell, e.t_end, e.t_start
                    )));
                }
                if e.announced_at > e.t_start {
                    return Err(ScenarioError::Schema(format!(
                        "event on {} announced at {} after its start {}",
                        e.cell, e.announced_at, e.t_start
                    )));
                }
            }
            EventSource::Scripted(list)
        }
        (None, Some(gen)) => {
            if gen.max_cells == 0 {
                return Err(ScenarioError::Schema("generator max_cells must be ≥ 1".into()));
            }
            if gen.arrival_mean < 1.0 || gen.duration_mean < 1.0 {
                return Err(ScenarioError::Schema(
                    "generator means must be ≥ 1 second".into(),
                ));
            }
            EventSource::Generated(gen)
        }
        (Some(_), Some(_)) => {
            return Err(ScenarioError::Schema(
                "scenario has both `events` and `generator`".into(),
            ))
        }
        (None, None) => {
            return Err(ScenarioError::Schema(
                "scenario needs `events` or `generator`".into(),
            ))
        }
    };
    if file.total_time == 0 {
        return Err(ScenarioError::Schema("total_time must be ≥ 1".into()));
    }
    let workspace = build_workspace(file.workspace)?;
    for prop in automaton.alphabet() {
        if !workspace
            .labeled_cells()
            .any(|(_, props)| props.contains(prop))
        {
            return Err(ScenarioError::Schema(format!(
                "proposition `{prop}` labels no workspace cell"
            )));
        }
    }
    Ok(Scenario {
        workspace,
        automaton,
        events,
        horizon: file.horizon,
        time_comp: file.time_comp,
        total_time: file.total_time,
    })
}

/// Load a scenario from a file path.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}
