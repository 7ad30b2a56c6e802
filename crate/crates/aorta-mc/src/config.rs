//! System configuration: a JSON file naming the agent programs, reasoning
//! rules, org spec, and optional property/model files, all resolved
//! relative to the configuration file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use aorta_mc_core::aorta::{parse_aorta_program, parse_org_spec, ReasoningRule};
use aorta_mc_core::apl::{parse_apl, AplProgram};
use aorta_mc_core::logic::parse_term;
use aorta_mc_core::psl::MacroContext;
use aorta_mc_core::runtime::{AgentSpec, MasSpec};

use crate::props::{parse_properties, PropEntry};
use crate::CliError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    agents: Vec<RawAgent>,
    #[serde(rename = "orgSpec")]
    org_spec: String,
    properties: Option<String>,
    model: Option<String>,
    #[serde(default)]
    percepts: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    name: String,
    apl: String,
    aorta: String,
}

/// Everything a command needs: the system spec, the parsed properties, and
/// the resolved default model path.
pub struct LoadedConfig {
    pub spec: MasSpec,
    pub properties: Vec<PropEntry>,
    pub dir: PathBuf,
    pub model_path: PathBuf,
}

impl LoadedConfig {
    pub fn macro_context(&self) -> MacroContext {
        let agents: Vec<String> = self.spec.agents.iter().map(|a| a.name.clone()).collect();
        MacroContext::from_spec(&agents, &self.spec.org)
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|err| CliError::Io { path: path.to_path_buf(), err })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = read(path)?;
    let raw: RawConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config { path: path.to_path_buf(), msg: e.to_string() })?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    // Program files are typically shared between agents; parse each once.
    let mut apl_cache: BTreeMap<PathBuf, Vec<AplProgram>> = BTreeMap::new();
    let mut rule_cache: BTreeMap<PathBuf, Arc<Vec<ReasoningRule>>> = BTreeMap::new();

    let mut agents = Vec::new();
    for entry in &raw.agents {
        let apl_path = dir.join(&entry.apl);
        if !apl_cache.contains_key(&apl_path) {
            let programs = parse_apl(&read(&apl_path)?)
                .map_err(|e| CliError::Parse { path: apl_path.clone(), msg: e.to_string() })?;
            apl_cache.insert(apl_path.clone(), programs);
        }
        let program = apl_cache[&apl_path]
            .iter()
            .find(|p| p.name == entry.name)
            .ok_or_else(|| CliError::Config {
                path: path.to_path_buf(),
                msg: format!("agent {} not found in {}", entry.name, apl_path.display()),
            })?;

        let rules_path = dir.join(&entry.aorta);
        if !rule_cache.contains_key(&rules_path) {
            let rules = parse_aorta_program(&read(&rules_path)?)
                .map_err(|e| CliError::Parse { path: rules_path.clone(), msg: e.to_string() })?;
            rule_cache.insert(rules_path.clone(), Arc::new(rules));
        }

        agents.push(AgentSpec {
            name: entry.name.clone(),
            initial_beliefs: program.initial_beliefs.clone(),
            initial_goals: program.initial_goals.clone(),
            plans: Arc::new(program.plans.clone()),
            rules: rule_cache[&rules_path].clone(),
        });
    }

    let org_path = dir.join(&raw.org_spec);
    let org = parse_org_spec(&read(&org_path)?)
        .map_err(|e| CliError::Parse { path: org_path.clone(), msg: e.to_string() })?;

    let mut percepts = Vec::new();
    for p in &raw.percepts {
        percepts.push(parse_term(p).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            msg: format!("bad percept `{p}`: {e}"),
        })?);
    }

    let spec = MasSpec { agents, org, percepts };

    let properties = match &raw.properties {
        None => Vec::new(),
        Some(rel) => {
            let props_path = dir.join(rel);
            let agent_names: Vec<String> =
                spec.agents.iter().map(|a| a.name.clone()).collect();
            let ctx = MacroContext::from_spec(&agent_names, &spec.org);
            parse_properties(&read(&props_path)?, &ctx)
                .map_err(|e| CliError::Parse { path: props_path, msg: e.to_string() })?
        }
    };

    let model_path = dir.join(raw.model.as_deref().unwrap_or("model.json"));
    Ok(LoadedConfig { spec, properties, dir, model_path })
}
