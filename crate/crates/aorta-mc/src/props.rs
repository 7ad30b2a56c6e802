//! Property files: one `name := formula` per line, `%` comments, and an
//! optional `expect-fail:` prefix marking a property whose violation is the
//! expected outcome.

use std::collections::BTreeSet;
use std::fmt;

use aorta_mc_core::psl::{parse_psl, MacroContext, PslFormula};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropEntry {
    pub name: String,
    pub expect_fail: bool,
    pub formula: PslFormula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropsError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for PropsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for PropsError {}

pub fn parse_properties(text: &str, ctx: &MacroContext) -> Result<Vec<PropEntry>, PropsError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| PropsError { line, msg };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let (head, formula_text) = trimmed
            .split_once(":=")
            .ok_or_else(|| err("expected `name := formula`".into()))?;
        let head = head.trim();
        let (expect_fail, name) = match head.strip_prefix("expect-fail:") {
            Some(rest) => (true, rest.trim()),
            None => (false, head),
        };
        if name.is_empty() {
            return Err(err("empty property name".into()));
        }
        if name.contains(char::is_whitespace) {
            return Err(err(format!("property name `{name}` contains whitespace")));
        }
        if !seen.insert(name.to_string()) {
            return Err(err(format!("duplicate property name `{name}`")));
        }
        let formula = parse_psl(formula_text, ctx)
            .map_err(|e| err(format!("property {name}: {e}")))?;
        out.push(PropEntry { name: name.to_string(), expect_fail, formula });
    }
    Ok(out)
}
