//! The exported state-space model: a JSON file whose states are the
//! canonical text serializations (the same bytes the fingerprints hash), so
//! restoration is exact and two equal explorations write identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use aorta_mc_core::checker::{validate_model, ModelEdge, StateModel};
use aorta_mc_core::runtime::{canonical_serialization, parse_canonical, MasSpec};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(rename = "formatVersion")]
    format_version: u32,
    initial: usize,
    states: Vec<StateEntry>,
    edges: Vec<EdgeEntry>,
}

#[derive(Serialize, Deserialize)]
struct StateEntry {
    end: bool,
    state: String,
}

#[derive(Serialize, Deserialize)]
struct EdgeEntry {
    from: usize,
    agent: Option<String>,
    to: usize,
}

pub fn write_model(path: &Path, model: &StateModel) -> Result<(), CliError> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        initial: model.initial,
        states: model
            .states
            .iter()
            .zip(&model.ends)
            .map(|(s, &end)| StateEntry { end, state: canonical_serialization(s) })
            .collect(),
        edges: model
            .edges
            .iter()
            .map(|e| EdgeEntry { from: e.from, agent: e.agent.clone(), to: e.to })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Internal(format!("model serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|err| CliError::Io { path: path.to_path_buf(), err })
}

/// Load, restore, and fully validate a model file. Any structural damage —
/// bad JSON, version mismatch, unparsable states, edges that disagree with
/// the restored states — is reported as a malformed model.
pub fn read_model(path: &Path, spec: &MasSpec) -> Result<StateModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| CliError::Io { path: path.to_path_buf(), err })?;
    let bad = |msg: String| CliError::Model { path: path.to_path_buf(), msg };
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "format version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }

    let mut states = Vec::with_capacity(file.states.len());
    let mut ends = Vec::with_capacity(file.states.len());
    for (i, entry) in file.states.iter().enumerate() {
        let state = parse_canonical(&entry.state, spec)
            .map_err(|e| bad(format!("state {i}: {e}")))?;
        // The canonical text is normative; a restored state must reproduce
        // it byte for byte or the file was edited inconsistently.
        if canonical_serialization(&state) != entry.state {
            return Err(bad(format!("state {i} does not round-trip")));
        }
        states.push(state);
        ends.push(entry.end);
    }
    let edges = file
        .edges
        .into_iter()
        .map(|e| ModelEdge { from: e.from, agent: e.agent, to: e.to })
        .collect();

    let model = StateModel { states, ends, edges, initial: file.initial };
    validate_model(&model).map_err(|e| CliError::from_model_error(path, e))?;
    Ok(model)
}
