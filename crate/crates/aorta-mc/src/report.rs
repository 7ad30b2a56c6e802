//! Machine-parseable command output: one JSON object per line.

use std::io::{self, Write};

use serde::Serialize;

use aorta_mc_core::checker::Counterexample;

#[derive(Serialize)]
pub struct PropertyReport {
    pub property: String,
    #[serde(rename = "expectFail")]
    pub expect_fail: bool,
    pub verdict: String,
    /// Whether the verdict matches the expectation implied by the name
    /// prefix; the process exits 0 iff this holds for every property.
    #[serde(rename = "asExpected")]
    pub as_expected: bool,
    #[serde(rename = "statesExplored")]
    pub states_explored: usize,
    #[serde(rename = "productStates")]
    pub product_states: usize,
    #[serde(rename = "wallMs")]
    pub wall_ms: u128,
    #[serde(rename = "counterexample", skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

#[derive(Serialize)]
pub struct ExploreReport {
    pub model: String,
    pub states: usize,
    pub edges: usize,
    #[serde(rename = "endStates")]
    pub end_states: usize,
    #[serde(rename = "wallMs")]
    pub wall_ms: u128,
}

#[derive(Serialize)]
struct CexFile<'a> {
    property: &'a str,
    #[serde(rename = "cycleStart")]
    cycle_start: usize,
    choices: Vec<CexChoice>,
}

#[derive(Serialize)]
struct CexChoice {
    agent: Option<String>,
    action: Option<String>,
}

/// Print one stdout line, exiting quietly if the consumer closed the pipe
/// (e.g. `aorta-mc check ... | head`).
pub fn print_line(line: &str) {
    let mut out = io::stdout().lock();
    if writeln!(out, "{line}").is_err() || out.flush().is_err() {
        std::process::exit(0);
    }
}

pub fn emit<T: Serialize>(report: &T) {
    // Struct serialization cannot fail.
    print_line(&serde_json::to_string(report).expect("report serialization"));
}

pub fn counterexample_json(property: &str, cex: &Counterexample) -> String {
    let file = CexFile {
        property,
        cycle_start: cex.cycle_start,
        choices: cex
            .steps
            .iter()
            .map(|s| CexChoice {
                agent: s.agent.clone(),
                action: s.action.as_ref().map(|t| t.to_string()),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("report serialization");
    text.push('\n');
    text
}

/// Property names come from user files; keep only filename-safe characters
/// when deriving the counterexample file name.
pub fn safe_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
