//! Parser and interpreter for the Gwendolen-subset agent language:
//! beliefs, achieve goals, and guarded plans whose bodies add beliefs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::aorta::GoalBase;
use crate::logic::{
    solve_with, unify, Cursor, FactBase, ParseError, QueryGoal, SolveError, Subst, Term,
};

/// One step of a plan body. Belief addition is the only supported step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BodyStep {
    AddBelief(Term),
}

impl BodyStep {
    pub fn term(&self) -> &Term {
        match self {
            BodyStep::AddBelief(t) => t,
        }
    }

    fn apply(&self, s: &Subst) -> BodyStep {
        match self {
            BodyStep::AddBelief(t) => BodyStep::AddBelief(s.apply(t)),
        }
    }
}

impl fmt::Display for BodyStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyStep::AddBelief(t) => write!(f, "+{t}"),
        }
    }
}

/// A guarded plan: `+!trigger [achieve] : {guard} <- body;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub trigger: Term,
    /// Belief-base guard; `{True}` parses to the empty query.
    pub guard: QueryGoal,
    /// Non-empty ordered body.
    pub body: Vec<BodyStep>,
}

/// One `:name:` block of an agent program file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AplProgram {
    pub name: String,
    pub initial_beliefs: Vec<Term>,
    /// Reserved; parsing rejects non-empty sections.
    pub belief_rules: Vec<Term>,
    /// Achieve goals, in program order.
    pub initial_goals: Vec<Term>,
    pub plans: Vec<Plan>,
}

/// A running intention: the goal it serves and the remaining instantiated
/// body steps. Intentions with empty pending are removed immediately, so
/// `pending` is never empty between steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intention {
    pub goal: Term,
    pub pending: Vec<BodyStep>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AplParseError {
    Syntax(ParseError),
    /// A construct outside the supported subset (belief rules, belief
    /// deletion, subgoal body steps).
    UnsupportedFeature { what: String, line: usize },
}

impl fmt::Display for AplParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AplParseError::Syntax(e) => write!(f, "{e}"),
            AplParseError::UnsupportedFeature { what, line } => {
                write!(f, "unsupported feature at line {line}: {what}")
            }
        }
    }
}

impl core::error::Error for AplParseError {}

impl From<ParseError> for AplParseError {
    fn from(e: ParseError) -> AplParseError {
        AplParseError::Syntax(e)
    }
}

fn at_header(cur: &mut Cursor) -> bool {
    cur.skip_ws();
    cur.peek() == Some(b':')
}

/// Read a `:Header Name:` line and return the name between the colons.
fn header(cur: &mut Cursor) -> Result<String, ParseError> {
    cur.skip_ws();
    cur.expect(b':')?;
    let mut name = String::new();
    loop {
        match cur.peek() {
            Some(b':') => {
                cur.bump();
                return Ok(name);
            }
            Some(b'\n') | None => return Err(cur.error("unterminated section header")),
            Some(c) => {
                name.push(c as char);
                cur.bump();
            }
        }
    }
}

fn expect_header(cur: &mut Cursor, want: &str) -> Result<(), AplParseError> {
    let got = header(cur)?;
    if got == want {
        Ok(())
    } else {
        Err(cur.error(format!("expected section :{want}:, found :{got}:")).into())
    }
}

fn achieve_annotation(cur: &mut Cursor) -> Result<(), ParseError> {
    cur.expect(b'[')?;
    if !cur.eat_keyword("achieve") {
        return Err(cur.error("expected goal kind `achieve`"));
    }
    cur.expect(b']')
}

fn parse_plan(cur: &mut Cursor) -> Result<Plan, AplParseError> {
    let line = cur.line();
    cur.expect(b'+')?;
    cur.expect(b'!')?;
    let trigger = cur.term()?;
    achieve_annotation(cur)?;
    cur.expect(b':')?;
    cur.expect(b'{')?;
    let guard = if cur.eat_keyword("True") {
        QueryGoal::new(Vec::new())
    } else {
        cur.query()?
    };
    cur.expect(b'}')?;
    cur.expect(b'<')?;
    cur.expect(b'-')?;

    let mut body = Vec::new();
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some(b'+') => {
                cur.bump();
                if cur.peek() == Some(b'!') {
                    return Err(AplParseError::UnsupportedFeature {
                        what: "subgoal body steps".into(),
                        line: cur.line(),
                    });
                }
                body.push(BodyStep::AddBelief(cur.term()?));
            }
            Some(b'-') => {
                return Err(AplParseError::UnsupportedFeature {
                    what: "belief deletion body steps".into(),
                    line: cur.line(),
                });
            }
            _ => return Err(cur.error("expected body step `+belief`").into()),
        }
        cur.skip_ws();
        if cur.eat(b',') {
            continue;
        }
        cur.expect(b';')?;
        break;
    }
    if body.is_empty() {
        return Err(cur.error("plan body must be non-empty").into());
    }

    // Every body variable must be bound by the trigger or the guard,
    // otherwise an instantiated step could insert a non-ground belief.
    let mut bound = alloc::collections::BTreeSet::new();
    trigger.collect_vars(&mut bound);
    guard.collect_vars(&mut bound);
    let mut used = alloc::collections::BTreeSet::new();
    for step in &body {
        step.term().collect_vars(&mut used);
    }
    if let Some(unbound) = used.difference(&bound).next() {
        return Err(AplParseError::Syntax(ParseError {
            line,
            col: 1,
            msg: format!("body variable {unbound} is bound by neither trigger nor guard"),
        }));
    }
    Ok(Plan { trigger, guard, body })
}

/// Parse an agent program file: a `GWENDOLEN` header followed by one
/// `:name:` block per agent, each with the Listing-style sections.
pub fn parse_apl(text: &str) -> Result<Vec<AplProgram>, AplParseError> {
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    if !cur.eat_keyword("GWENDOLEN") {
        return Err(cur.error("expected GWENDOLEN header").into());
    }

    let mut programs = Vec::new();
    loop {
        cur.skip_ws();
        if cur.at_end() {
            break;
        }
        expect_header(&mut cur, "name")?;
        let name = cur.ident()?;

        expect_header(&mut cur, "Initial Beliefs")?;
        let mut initial_beliefs = Vec::new();
        while !at_header(&mut cur) && !cur.at_end() {
            let b = cur.term()?;
            if !b.is_ground() {
                return Err(cur.error(format!("initial belief {b} is not ground")).into());
            }
            initial_beliefs.push(b);
        }

        expect_header(&mut cur, "Belief Rules")?;
        if !at_header(&mut cur) && !cur.at_end() {
            return Err(AplParseError::UnsupportedFeature {
                what: "belief rules".into(),
                line: cur.line(),
            });
        }

        expect_header(&mut cur, "Initial Goals")?;
        let mut initial_goals = Vec::new();
        while !at_header(&mut cur) && !cur.at_end() {
            let g = cur.term()?;
            if !g.is_ground() {
                return Err(cur.error(format!("initial goal {g} is not ground")).into());
            }
            achieve_annotation(&mut cur)?;
            initial_goals.push(g);
        }

        expect_header(&mut cur, "Plans")?;
        let mut plans = Vec::new();
        while !at_header(&mut cur) && !cur.at_end() {
            plans.push(parse_plan(&mut cur)?);
        }

        programs.push(AplProgram {
            name,
            initial_beliefs,
            belief_rules: Vec::new(),
            initial_goals,
            plans,
        });
    }
    Ok(programs)
}

/// What one `apl_step` did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub changed: bool,
    /// A goal the step wanted to adopt but found no applicable plan for.
    /// Diagnostic only; the goal stays pending.
    pub stuck_goal: Option<Term>,
}

/// One reasoning step over the agent's (shared) belief and goal bases and
/// its intention list. In order: (1) drop achieved goals together with
/// their intentions; then either (2) adopt an intention for the first
/// unintended goal (goal adoption order, first applicable plan) or, when
/// there is none to adopt, (3) advance the first running intention by one
/// body step.
pub fn apl_step(
    beliefs: &mut FactBase,
    goals: &mut GoalBase,
    intentions: &mut Vec<Intention>,
    plans: &[Plan],
) -> Result<StepReport, SolveError> {
    let mut changed = false;
    let mut stuck_goal = None;

    // (1) Achieved goals die, and take their intentions with them.
    let achieved: Vec<Term> =
        goals.queue().iter().filter(|g| beliefs.contains(g)).cloned().collect();
    for g in &achieved {
        goals.remove(g);
        intentions.retain(|i| i.goal != *g);
        changed = true;
    }

    // (2) Adopt for the first unintended goal, if any plan applies.
    let unintended = goals
        .queue()
        .iter()
        .find(|g| !intentions.iter().any(|i| i.goal == **g))
        .cloned();
    if let Some(goal) = unintended {
        let mut adopted = false;
        for plan in plans {
            let Some(bindings) = unify(&plan.trigger, &goal) else { continue };
            let sols = solve_with(beliefs, &plan.guard, &bindings)?;
            if let Some(sol) = sols.first() {
                let pending: Vec<BodyStep> =
                    plan.body.iter().map(|step| step.apply(sol)).collect();
                intentions.push(Intention { goal: goal.clone(), pending });
                adopted = true;
                changed = true;
                break;
            }
        }
        if adopted {
            return Ok(StepReport { changed, stuck_goal });
        }
        // Not an error: the goal stays pending and the step falls through
        // to intention advancement.
        stuck_goal = Some(goal);
    }

    // (3) Advance the first running intention by one step.
    if !intentions.is_empty() {
        let step = intentions[0].pending.remove(0);
        match step {
            BodyStep::AddBelief(t) => {
                beliefs.insert(t);
            }
        }
        if intentions[0].pending.is_empty() {
            intentions.remove(0);
        }
        changed = true;
    }
    Ok(StepReport { changed, stuck_goal })
}
