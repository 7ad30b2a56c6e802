//! Shared test fixtures: the two-agent paper-writing scenario.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::aorta::{parse_aorta_program, parse_org_spec, OrgSpec};
use crate::apl::parse_apl;
use crate::runtime::{AgentSpec, MasSpec};

pub(crate) const GWEN: &str = include_str!("../../../fixtures/writing-paper/agents.gwen");
pub(crate) const RULES: &str = include_str!("../../../fixtures/writing-paper/org.aorta");
pub(crate) const ORG: &str = include_str!("../../../fixtures/writing-paper/orgspec.org");

pub(crate) fn fixture_org() -> OrgSpec {
    parse_org_spec(ORG).unwrap()
}

pub(crate) fn fixture_spec() -> MasSpec {
    let programs = parse_apl(GWEN).unwrap();
    let rules = Arc::new(parse_aorta_program(RULES).unwrap());
    let agents: Vec<AgentSpec> = programs
        .into_iter()
        .map(|p| AgentSpec {
            name: p.name.clone(),
            initial_beliefs: p.initial_beliefs.clone(),
            initial_goals: p.initial_goals.clone(),
            plans: Arc::new(p.plans),
            rules: rules.clone(),
        })
        .collect();
    MasSpec { agents, org: fixture_org(), percepts: Vec::new() }
}
