//! System-level runtime: MAS configuration, the deterministic macro-step,
//! message transport, sleep/wake and end-state detection, and canonical
//! state serialization with SHA-256 fingerprints for state matching.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::aorta::{
    aorta_cycle, AortaAgent, CycleError, GoalBase, MentalState, OrgSpec, ReasoningRule, SpecError,
};
pub use crate::aorta::Message;
use crate::apl::{apl_step, BodyStep, Intention, Plan};
use crate::logic::{parse_term, FactBase, SolveError, Term};

/// Static description of one agent: programs plus initial bases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSpec {
    pub name: String,
    pub initial_beliefs: Vec<Term>,
    /// Achieve goals in program order.
    pub initial_goals: Vec<Term>,
    pub plans: Arc<Vec<Plan>>,
    pub rules: Arc<Vec<ReasoningRule>>,
}

/// Static description of the whole system; states are built from this and
/// never change it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasSpec {
    /// Declaration order is the scheduling order.
    pub agents: Vec<AgentSpec>,
    pub org: OrgSpec,
    pub percepts: Vec<Term>,
}

/// One agent's complete dynamic state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub aorta: AortaAgent,
    pub plans: Arc<Vec<Plan>>,
    pub intentions: Vec<Intention>,
    pub active: bool,
    /// Action fired in this agent's most recent macro-step, if any.
    pub last_action: Option<Term>,
}

/// A full system state: a value, cloned on branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasState {
    /// Declaration order.
    pub agents: Vec<AgentState>,
    /// Static percept store (the P-operator's domain).
    pub percepts: FactBase,
}

impl MasState {
    pub fn agent(&self, name: &str) -> Option<&AgentState> {
        self.agents.iter().find(|a| a.aorta.name == name)
    }

    fn agent_mut(&mut self, name: &str) -> Option<&mut AgentState> {
        self.agents.iter_mut().find(|a| a.aorta.name == name)
    }

    pub fn agent_names(&self) -> Vec<&str> {
        self.agents.iter().map(|a| a.aorta.name.as_str()).collect()
    }

    pub fn registry(&self) -> BTreeSet<String> {
        self.agents.iter().map(|a| a.aorta.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitError {
    EmptyRegistry,
    DuplicateAgentName(String),
    /// A dep/cond fact references a role no role/2 fact declares.
    UnknownRoleInSpec(Term),
    BadOrgFact(SpecError),
    NonGroundPercept(Term),
    /// The settling probe (a dry first macro-step) failed for an agent.
    Probe(String, MasError),
}

impl fmt::Display for InitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitError::EmptyRegistry => write!(f, "agent registry is empty"),
            InitError::DuplicateAgentName(n) => write!(f, "duplicate agent name {n}"),
            InitError::UnknownRoleInSpec(r) => write!(f, "org spec references unknown role {r}"),
            InitError::BadOrgFact(e) => write!(f, "{e}"),
            InitError::NonGroundPercept(t) => write!(f, "percept {t} is not ground"),
            InitError::Probe(agent, e) => write!(f, "first cycle of agent {agent} fails: {e}"),
        }
    }
}

impl core::error::Error for InitError {}

/// Build the initial state: Σa = initial beliefs ∪ {me(self)} ∪
/// {agent(a) | a ∈ registry}; Γa = initial goals in program order; Σo =
/// the shared org spec; Γo = ∅; empty ether. Activity is settled by a dry
/// first macro-step per agent: an agent whose first cycle would change
/// nothing and send nothing is born asleep (the cycle is deterministic, so
/// rerunning it stays a no-op until a message arrives).
pub fn initial_state(spec: &MasSpec) -> Result<MasState, InitError> {
    if spec.agents.is_empty() {
        return Err(InitError::EmptyRegistry);
    }
    let mut seen = BTreeSet::new();
    for a in &spec.agents {
        if !seen.insert(a.name.clone()) {
            return Err(InitError::DuplicateAgentName(a.name.clone()));
        }
    }

    // Cross-check role references even for specs assembled fact-by-fact.
    let declared: BTreeSet<&Term> = spec
        .org
        .iter()
        .filter_map(|f| match f {
            Term::Compound(n, args) if n == "role" => Some(&args[0]),
            _ => None,
        })
        .collect();
    for fact in spec.org.iter() {
        if let Term::Compound(n, args) = fact {
            let referenced: &[&Term] = match n.as_str() {
                "dep" => &[&args[0], &args[1]],
                "cond" => &[&args[0]],
                _ => &[],
            };
            for role in referenced {
                if !declared.contains(role) {
                    return Err(InitError::UnknownRoleInSpec((*role).clone()));
                }
            }
        }
    }
    for p in &spec.percepts {
        if !p.is_ground() {
            return Err(InitError::NonGroundPercept(p.clone()));
        }
    }

    let mut agents = Vec::new();
    for a in &spec.agents {
        let mut beliefs: FactBase = a.initial_beliefs.iter().cloned().collect();
        beliefs.insert(Term::app("me", alloc::vec![Term::atom(&a.name)]));
        for other in &spec.agents {
            beliefs.insert(Term::app("agent", alloc::vec![Term::atom(&other.name)]));
        }
        let state = MentalState {
            beliefs,
            goals: a.initial_goals.iter().cloned().collect(),
            org: spec.org.clone(),
            options: FactBase::new(),
        };
        agents.push(AgentState {
            aorta: AortaAgent::new(&a.name, state, a.rules.clone()),
            plans: a.plans.clone(),
            intentions: Vec::new(),
            active: true,
            last_action: None,
        });
    }
    let mut s = MasState { agents, percepts: spec.percepts.iter().cloned().collect() };
    for i in 0..s.agents.len() {
        let name = s.agents[i].aorta.name.clone();
        let probed = mas_step(&s, &name).map_err(|e| InitError::Probe(name, e))?;
        s.agents[i].active = probed.agents[i].active;
    }
    Ok(s)
}

/// Names of non-sleeping agents, in declaration order.
pub fn active_agents(s: &MasState) -> Vec<&str> {
    s.agents.iter().filter(|a| a.active).map(|a| a.aorta.name.as_str()).collect()
}

/// True iff every agent sleeps (percepts are static, so nothing can wake
/// the system from outside).
pub fn is_end_state(s: &MasState) -> bool {
    s.agents.iter().all(|a| !a.active)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MasError {
    UnknownAgent(String),
    InactiveAgentChosen(String),
    Cycle(CycleError),
}

impl fmt::Display for MasError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MasError::UnknownAgent(n) => write!(f, "unknown agent {n}"),
            MasError::InactiveAgentChosen(n) => write!(f, "agent {n} is not active"),
            MasError::Cycle(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MasError {}

impl From<CycleError> for MasError {
    fn from(e: CycleError) -> MasError {
        MasError::Cycle(e)
    }
}

impl From<SolveError> for MasError {
    fn from(e: SolveError) -> MasError {
        MasError::Cycle(e.into())
    }
}

/// What one macro-step did, for trace output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTrace {
    pub fired: Option<Term>,
    pub delivered: Vec<Message>,
}

/// One macro-step of `chosen`: drain its inbox into a full AORTA cycle,
/// run one APL step, deliver produced messages (waking recipients), record
/// the fired action, and recompute the agent's activity flag. Every other
/// agent's state is untouched (except inboxes receiving messages).
pub fn mas_step(s: &MasState, chosen: &str) -> Result<MasState, MasError> {
    mas_step_traced(s, chosen).map(|(next, _)| next)
}

pub fn mas_step_traced(s: &MasState, chosen: &str) -> Result<(MasState, StepTrace), MasError> {
    let registry = s.registry();
    let mut next = s.clone();
    let agent = next
        .agent_mut(chosen)
        .ok_or_else(|| MasError::UnknownAgent(chosen.to_string()))?;
    if !agent.active {
        return Err(MasError::InactiveAgentChosen(chosen.to_string()));
    }

    let outcome = aorta_cycle(&mut agent.aorta, Vec::new(), &registry)?;
    let report = apl_step(
        &mut agent.aorta.state.beliefs,
        &mut agent.aorta.state.goals,
        &mut agent.intentions,
        &agent.plans.clone(),
    )?;
    agent.last_action = outcome.fired.clone();
    let aorta_changed = agent.aorta.changed;

    // Deliver messages; a non-empty inbox wakes the recipient.
    for msg in &outcome.outbound {
        let recipient = next
            .agent_mut(&msg.recipient)
            .expect("recipient validated during execute_action");
        recipient.aorta.inbox.push(msg.clone());
        recipient.active = true;
    }

    let agent = next.agent_mut(chosen).expect("chosen agent exists");
    agent.active = aorta_changed || report.changed || !agent.aorta.inbox.is_empty();

    Ok((next, StepTrace { fired: outcome.fired, delivered: outcome.outbound }))
}

// ---------------------------------------------------------------------------
// Canonical serialization and fingerprinting
// ---------------------------------------------------------------------------

/// Serialize the semantic state (bases in canonical order, queues in queue
/// order) as line-based text. Equal states — regardless of construction
/// history — serialize identically; programs and transient flags are not
/// part of the state.
pub fn canonical_serialization(s: &MasState) -> String {
    let mut out = String::new();
    out.push_str("mas-state v1\n");
    push_terms(&mut out, "percepts", s.percepts.iter());
    out.push_str(&format!("agents {}\n", s.agents.len()));
    for a in &s.agents {
        debug_assert!(a.aorta.outbox.is_empty(), "outbox must be drained between steps");
        out.push_str(&format!("agent {}\n", a.aorta.name));
        out.push_str(&format!("active {}\n", a.active));
        match &a.last_action {
            Some(t) => out.push_str(&format!("last-action {t}\n")),
            None => out.push_str("last-action -\n"),
        }
        push_terms(&mut out, "beliefs", a.aorta.state.beliefs.iter());
        push_terms(&mut out, "goal-queue", a.aorta.state.goals.queue().iter());
        push_terms(&mut out, "org", a.aorta.state.org.iter());
        push_terms(&mut out, "options", a.aorta.state.options.iter());
        out.push_str(&format!("intentions {}\n", a.intentions.len()));
        for i in &a.intentions {
            let steps: Vec<String> = i.pending.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!(" {} <- {}\n", i.goal, steps.join(" ")));
        }
        out.push_str(&format!("inbox {}\n", a.aorta.inbox.len()));
        for m in &a.aorta.inbox {
            out.push_str(&format!(" {} {}\n", m.sender, m.content));
        }
    }
    out
}

fn push_terms<'a>(out: &mut String, label: &str, items: impl Iterator<Item = &'a Term>) {
    let items: Vec<&Term> = items.collect();
    out.push_str(&format!("{label} {}\n", items.len()));
    for t in items {
        out.push_str(&format!(" {t}\n"));
    }
}

/// SHA-256 over the canonical serialization.
pub fn fingerprint(s: &MasState) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(canonical_serialization(s).as_bytes());
    hasher.finalize().into()
}

pub fn fingerprint_hex(s: &MasState) -> String {
    let mut out = String::new();
    for b in fingerprint(s) {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateParseError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for StateParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state parse error at line {}: {}", self.line, self.msg)
    }
}

impl core::error::Error for StateParseError {}

struct Lines<'a> {
    rest: core::str::Lines<'a>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, StateParseError> {
        self.line += 1;
        self.rest
            .next()
            .ok_or(StateParseError { line: self.line, msg: "unexpected end of input".into() })
    }

    fn err(&self, msg: impl Into<String>) -> StateParseError {
        StateParseError { line: self.line, msg: msg.into() }
    }

    fn section(&mut self, label: &str) -> Result<usize, StateParseError> {
        let line = self.next()?;
        let (got, count) = line
            .split_once(' ')
            .ok_or_else(|| self.err(format!("expected `{label} <count>`")))?;
        if got != label {
            return Err(self.err(format!("expected section {label}, found {got}")));
        }
        count.parse().map_err(|_| self.err("bad count"))
    }

    fn terms(&mut self, label: &str) -> Result<Vec<Term>, StateParseError> {
        let count = self.section(label)?;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let raw = self.next()?.trim();
            out.push(parse_term(raw).map_err(|e| self.err(format!("{e}")))?);
        }
        Ok(out)
    }
}

/// Rebuild a state from its canonical serialization. Programs (plans and
/// rules) are not part of the serialized state and are taken from `spec`;
/// agent names and order must match the spec.
pub fn parse_canonical(text: &str, spec: &MasSpec) -> Result<MasState, StateParseError> {
    let mut lines = Lines { rest: text.lines(), line: 0 };
    if lines.next()? != "mas-state v1" {
        return Err(lines.err("expected header `mas-state v1`"));
    }
    let percept_terms = lines.terms("percepts")?;
    let agent_count = lines.section("agents")?;
    if agent_count != spec.agents.len() {
        return Err(lines.err(format!(
            "state has {agent_count} agents, spec declares {}",
            spec.agents.len()
        )));
    }

    let mut agents = Vec::new();
    for aspec in &spec.agents {
        let header = lines.next()?;
        let name = header
            .strip_prefix("agent ")
            .ok_or_else(|| lines.err("expected `agent <name>`"))?;
        if name != aspec.name {
            return Err(lines.err(format!("expected agent {}, found {name}", aspec.name)));
        }

        let active = match lines.next()? {
            "active true" => true,
            "active false" => false,
            other => return Err(lines.err(format!("expected active flag, found `{other}`"))),
        };
        let la_line = lines.next()?;
        let last_action = match la_line
            .strip_prefix("last-action ")
            .ok_or_else(|| lines.err("expected last-action"))?
        {
            "-" => None,
            t => Some(parse_term(t).map_err(|e| lines.err(format!("{e}")))?),
        };

        let beliefs: FactBase = lines.terms("beliefs")?.into_iter().collect();
        let goals: GoalBase = lines.terms("goal-queue")?.into_iter().collect();
        let org = OrgSpec::from_facts(lines.terms("org")?)
            .map_err(|e| lines.err(format!("{e}")))?;
        let options: FactBase = lines.terms("options")?.into_iter().collect();

        let n = lines.section("intentions")?;
        let mut intentions = Vec::with_capacity(n);
        for _ in 0..n {
            let raw = lines.next()?.trim();
            let (goal, steps) = raw
                .split_once(" <- ")
                .ok_or_else(|| lines.err("expected `<goal> <- <steps>`"))?;
            let goal = parse_term(goal).map_err(|e| lines.err(format!("{e}")))?;
            let mut pending = Vec::new();
            for step in steps.split_whitespace() {
                let body = step
                    .strip_prefix('+')
                    .ok_or_else(|| lines.err("body steps must start with `+`"))?;
                pending.push(BodyStep::AddBelief(
                    parse_term(body).map_err(|e| lines.err(format!("{e}")))?,
                ));
            }
            if pending.is_empty() {
                return Err(lines.err("intention with no pending steps"));
            }
            intentions.push(Intention { goal, pending });
        }

        let n = lines.section("inbox")?;
        let mut inbox = Vec::with_capacity(n);
        for _ in 0..n {
            let raw = lines.next()?.trim();
            let (sender, content) = raw
                .split_once(' ')
                .ok_or_else(|| lines.err("expected `<sender> <content>`"))?;
            inbox.push(Message {
                sender: sender.to_string(),
                recipient: aspec.name.clone(),
                content: parse_term(content).map_err(|e| lines.err(format!("{e}")))?,
            });
        }

        let mut aorta = AortaAgent::new(
            &aspec.name,
            MentalState { beliefs, goals, org, options },
            aspec.rules.clone(),
        );
        aorta.inbox = inbox;
        aorta.changed = active;
        agents.push(AgentState {
            aorta,
            plans: aspec.plans.clone(),
            intentions,
            active,
            last_action,
        });
    }
    Ok(MasState { agents, percepts: percept_terms.into_iter().collect() })
}
