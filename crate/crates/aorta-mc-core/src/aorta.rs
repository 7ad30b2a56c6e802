//! The organizational reasoning component: metamodel facts, mental state,
//! the three-phase cycle (obligation check, option generation, action
//! execution), and the `option : context => action` rule language.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::logic::{
    solve_with, unify, Cursor, FactBase, ParseError, QueryGoal, SolveError, Subst, Term,
};

/// Functors an org spec file may declare. These never change after load.
pub const STATIC_FUNCTORS: [(&str, usize); 4] =
    [("role", 2), ("obj", 2), ("dep", 3), ("cond", 4)];
/// Functors the cycle (and org-content messages) may add or remove.
pub const DYNAMIC_FUNCTORS: [(&str, usize); 3] = [("rea", 2), ("obl", 4), ("viol", 3)];

/// The organizational knowledge base Σo: a fact base restricted to the
/// metamodel functors, with the static part immutable after load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OrgSpec {
    facts: FactBase,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecError {
    Parse(ParseError),
    /// A fact whose functor/arity or argument shapes are not metamodel-legal.
    MalformedFact { fact: Term, reason: String },
    /// dep/cond mentions a role never declared by a role/2 fact.
    UnknownRole { role: Term, fact: Term },
    /// dep/obj/cond mentions an objective not declared by any role/obj list.
    UnknownObjective { objective: Term, fact: Term },
    DuplicateRole(Term),
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::Parse(e) => write!(f, "{e}"),
            SpecError::MalformedFact { fact, reason } => {
                write!(f, "malformed org fact {fact}: {reason}")
            }
            SpecError::UnknownRole { role, fact } => {
                write!(f, "unknown role {role} in {fact}")
            }
            SpecError::UnknownObjective { objective, fact } => {
                write!(f, "unknown objective {objective} in {fact}")
            }
            SpecError::DuplicateRole(r) => write!(f, "role {r} declared twice"),
        }
    }
}

impl core::error::Error for SpecError {}

impl From<ParseError> for SpecError {
    fn from(e: ParseError) -> SpecError {
        SpecError::Parse(e)
    }
}

fn malformed(fact: &Term, reason: impl Into<String>) -> SpecError {
    SpecError::MalformedFact { fact: fact.clone(), reason: reason.into() }
}

/// Check that `t` is a belief formula: `true` | `false` | `bel(f)` |
/// `and(g1, ..., gn)`.
fn validate_formula(fact: &Term, t: &Term) -> Result<(), SpecError> {
    match t {
        Term::Atom(a) if a == "true" || a == "false" => Ok(()),
        Term::Compound(f, args) if f == "bel" && args.len() == 1 => Ok(()),
        Term::Compound(f, args) if f == "and" && !args.is_empty() => {
            args.iter().try_for_each(|a| validate_formula(fact, a))
        }
        _ => Err(malformed(fact, format!("{t} is not a belief formula"))),
    }
}

/// Evaluate a belief formula (shape pre-validated) against Σa.
pub fn formula_holds(beliefs: &FactBase, t: &Term) -> bool {
    match t {
        Term::Atom(a) if a == "true" => true,
        Term::Atom(a) if a == "false" => false,
        Term::Compound(f, args) if f == "bel" && args.len() == 1 => beliefs.contains(&args[0]),
        Term::Compound(f, args) if f == "and" => args.iter().all(|a| formula_holds(beliefs, a)),
        _ => false,
    }
}

fn atom_list(t: &Term) -> Option<Vec<Term>> {
    if let Term::List(items) = t {
        if items.iter().all(|i| matches!(i, Term::Atom(_))) {
            return Some(items.clone());
        }
    }
    None
}

/// Shape-check one metamodel fact (static or dynamic).
fn validate_fact_shape(fact: &Term) -> Result<(), SpecError> {
    if !fact.is_ground() {
        return Err(malformed(fact, "org facts must be ground"));
    }
    let Some((functor, arity)) = fact.functor() else {
        return Err(malformed(fact, "org facts must be compound terms"));
    };
    let args = match fact {
        Term::Compound(_, args) => args,
        _ => return Err(malformed(fact, "org facts must be compound terms")),
    };
    match (functor, arity) {
        ("role", 2) | ("obj", 2) => {
            if !matches!(args[0], Term::Atom(_)) {
                return Err(malformed(fact, "name must be an atom"));
            }
            if atom_list(&args[1]).is_none() {
                return Err(malformed(fact, "objective list must be a list of atoms"));
            }
            Ok(())
        }
        ("dep", 3) => {
            if args.iter().all(|a| matches!(a, Term::Atom(_))) {
                Ok(())
            } else {
                Err(malformed(fact, "dep arguments must be atoms"))
            }
        }
        ("cond", 4) => {
            if !matches!(args[0], Term::Atom(_)) {
                return Err(malformed(fact, "cond role must be an atom"));
            }
            match args[1].functor() {
                Some(("bel", 1)) => {}
                _ => return Err(malformed(fact, "cond objective must be bel(...)")),
            }
            validate_formula(fact, &args[2])?;
            validate_formula(fact, &args[3])
        }
        ("rea", 2) => Ok(()),
        ("obl", 4) => {
            match args[2].functor() {
                Some(("bel", 1)) => {}
                _ => return Err(malformed(fact, "obl objective must be bel(...)")),
            }
            validate_formula(fact, &args[3])
        }
        ("viol", 3) => Ok(()),
        _ => Err(malformed(fact, "unknown metamodel functor")),
    }
}

impl OrgSpec {
    /// Build from already-parsed facts (used when reloading serialized
    /// states); each fact is shape-checked but cross-references are not.
    pub fn from_facts<I: IntoIterator<Item = Term>>(facts: I) -> Result<OrgSpec, SpecError> {
        let mut base = FactBase::new();
        for fact in facts {
            validate_fact_shape(&fact)?;
            base.insert(fact);
        }
        Ok(OrgSpec { facts: base })
    }

    pub fn contains(&self, fact: &Term) -> bool {
        self.facts.contains(fact)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Term> {
        self.facts.iter()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn matches(&self, pattern: &Term, s: &Subst) -> Vec<Subst> {
        self.facts.matches(pattern, s)
    }

    /// Insert a dynamic (rea/obl/viol) fact. Static functors panic: only the
    /// loader writes those, via `from_facts`.
    pub fn insert_dynamic(&mut self, fact: Term) -> bool {
        let dynamic = fact
            .functor()
            .is_some_and(|(f, n)| DYNAMIC_FUNCTORS.contains(&(f, n)));
        assert!(dynamic, "insert_dynamic on static/unknown functor: {fact}");
        self.facts.insert(fact)
    }

    pub fn remove_dynamic(&mut self, fact: &Term) -> bool {
        let dynamic = fact
            .functor()
            .is_some_and(|(f, n)| DYNAMIC_FUNCTORS.contains(&(f, n)));
        assert!(dynamic, "remove_dynamic on static/unknown functor: {fact}");
        self.facts.remove(fact)
    }

    /// Declared roles as (name, objective list) pairs, canonical order.
    pub fn roles(&self) -> Vec<(Term, Vec<Term>)> {
        let mut out = Vec::new();
        for fact in self.facts.iter() {
            if let Term::Compound(f, args) = fact {
                if f == "role" && args.len() == 2 {
                    if let Some(objs) = atom_list(&args[1]) {
                        out.push((args[0].clone(), objs));
                    }
                }
            }
        }
        out
    }
}

/// Parse an org spec file: one ground static fact per line, optionally
/// `.`-terminated, `%` comments. Cross-references are validated here.
pub fn parse_org_spec(text: &str) -> Result<OrgSpec, SpecError> {
    let mut facts = Vec::new();
    let mut cur = Cursor::new(text);
    while !cur.at_end() {
        let fact = cur.term()?;
        cur.eat(b'.');
        let is_static = fact
            .functor()
            .is_some_and(|(f, n)| STATIC_FUNCTORS.contains(&(f, n)));
        if !is_static {
            return Err(malformed(
                &fact,
                "org spec files may declare only role/obj/dep/cond facts",
            ));
        }
        validate_fact_shape(&fact)?;
        facts.push(fact);
    }

    // Cross-reference checks: declared roles, declared objectives.
    let mut roles: BTreeSet<Term> = BTreeSet::new();
    let mut objectives: BTreeSet<Term> = BTreeSet::new();
    for fact in &facts {
        if let Term::Compound(f, args) = fact {
            if f == "role" {
                if !roles.insert(args[0].clone()) {
                    return Err(SpecError::DuplicateRole(args[0].clone()));
                }
                objectives.extend(atom_list(&args[1]).unwrap());
            } else if f == "obj" {
                objectives.extend(atom_list(&args[1]).unwrap());
            }
        }
    }
    let check_role = |role: &Term, fact: &Term| {
        if roles.contains(role) {
            Ok(())
        } else {
            Err(SpecError::UnknownRole { role: role.clone(), fact: fact.clone() })
        }
    };
    let check_obj = |obj: &Term, fact: &Term| {
        if objectives.contains(obj) {
            Ok(())
        } else {
            Err(SpecError::UnknownObjective { objective: obj.clone(), fact: fact.clone() })
        }
    };
    for fact in &facts {
        if let Term::Compound(f, args) = fact {
            match f.as_str() {
                "obj" => check_obj(&args[0], fact)?,
                "dep" => {
                    check_role(&args[0], fact)?;
                    check_role(&args[1], fact)?;
                    check_obj(&args[2], fact)?;
                }
                "cond" => {
                    check_role(&args[0], fact)?;
                    if let Term::Compound(_, objargs) = &args[1] {
                        check_obj(&objargs[0], fact)?;
                    }
                }
                _ => {}
            }
        }
    }
    OrgSpec::from_facts(facts)
}

/// Γa: a goal base with set semantics plus the adoption (FIFO) order, which
/// drives APL goal selection and is therefore part of the semantic state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoalBase {
    set: FactBase,
    queue: Vec<Term>,
}

impl GoalBase {
    pub fn new() -> GoalBase {
        GoalBase::default()
    }

    /// Adopt a goal; re-adoption of a present goal is a no-op.
    pub fn insert(&mut self, goal: Term) -> bool {
        if self.set.insert(goal.clone()) {
            self.queue.push(goal);
            true
        } else {
            false
        }
    }

    pub fn remove(&mut self, goal: &Term) -> bool {
        if self.set.remove(goal) {
            self.queue.retain(|g| g != goal);
            true
        } else {
            false
        }
    }

    pub fn contains(&self, goal: &Term) -> bool {
        self.set.contains(goal)
    }

    /// Canonical-order iteration (for matching and serialization of the set).
    pub fn iter(&self) -> impl Iterator<Item = &Term> {
        self.set.iter()
    }

    /// Adoption-order view.
    pub fn queue(&self) -> &[Term] {
        &self.queue
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn matches(&self, pattern: &Term, s: &Subst) -> Vec<Subst> {
        self.set.matches(pattern, s)
    }
}

impl FromIterator<Term> for GoalBase {
    fn from_iter<I: IntoIterator<Item = Term>>(iter: I) -> GoalBase {
        let mut base = GoalBase::new();
        for t in iter {
            base.insert(t);
        }
        base
    }
}

/// The mental state ⟨Σa, Γa, Σo, Γo⟩.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MentalState {
    /// Σa — beliefs.
    pub beliefs: FactBase,
    /// Γa — goals, with adoption order.
    pub goals: GoalBase,
    /// Σo — organizational beliefs.
    pub org: OrgSpec,
    /// Γo — generated options, recomputed each cycle.
    pub options: FactBase,
}

/// Illocutionary force of a send option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ilf {
    Tell,
    Achieve,
}

impl Ilf {
    pub fn as_str(self) -> &'static str {
        match self {
            Ilf::Tell => "tell",
            Ilf::Achieve => "achieve",
        }
    }
}

/// An option: something the agent may act upon this cycle. Stored in Γo in
/// term form (`role(R)`, `obj(bel(O))`, `send(To, ilf, Content)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptionTerm {
    Role(Term),
    Obj(Term),
    Send { role: Term, ilf: Ilf, content: Term },
}

impl OptionTerm {
    pub fn to_term(&self) -> Term {
        match self {
            OptionTerm::Role(r) => Term::Compound("role".to_owned(), alloc::vec![r.clone()]),
            OptionTerm::Obj(o) => Term::Compound("obj".to_owned(), alloc::vec![o.clone()]),
            OptionTerm::Send { role, ilf, content } => Term::Compound(
                "send".to_owned(),
                alloc::vec![role.clone(), Term::atom(ilf.as_str()), content.clone()],
            ),
        }
    }

    /// Classify a term as an option; used for rule heads, so variables are
    /// allowed everywhere except the ilf slot.
    pub fn from_term(t: &Term) -> Option<OptionTerm> {
        match t {
            Term::Compound(f, args) if f == "role" && args.len() == 1 => {
                Some(OptionTerm::Role(args[0].clone()))
            }
            Term::Compound(f, args) if f == "obj" && args.len() == 1 => {
                Some(OptionTerm::Obj(args[0].clone()))
            }
            Term::Compound(f, args) if f == "send" && args.len() == 3 => {
                let ilf = match &args[1] {
                    Term::Atom(a) if a == "tell" => Ilf::Tell,
                    Term::Atom(a) if a == "achieve" => Ilf::Achieve,
                    _ => return None,
                };
                Some(OptionTerm::Send { role: args[0].clone(), ilf, content: args[2].clone() })
            }
            _ => None,
        }
    }
}

/// Context formulas ρ of reasoning rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReasoningFormula {
    Top,
    OrgQ(Term),
    OptQ(Term),
    GoalQ(Term),
    BelQ(QueryGoal),
    Neg(Box<ReasoningFormula>),
    And(Box<ReasoningFormula>, Box<ReasoningFormula>),
}

impl ReasoningFormula {
    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            ReasoningFormula::Top => {}
            ReasoningFormula::OrgQ(t)
            | ReasoningFormula::OptQ(t)
            | ReasoningFormula::GoalQ(t) => t.collect_vars(out),
            ReasoningFormula::BelQ(q) => q.collect_vars(out),
            ReasoningFormula::Neg(inner) => inner.collect_vars(out),
            ReasoningFormula::And(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }
}

/// Actions a rule may perform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AortaAction {
    Enact(Term),
    Deact(Term),
    Commit(Term),
    Drop(Term),
    /// Recipient and wrapped content (`goal(..)`, `bel(..)` or `org(..)`).
    Send(Term, Term),
}

impl AortaAction {
    pub fn to_term(&self) -> Term {
        let (name, args) = match self {
            AortaAction::Enact(r) => ("enact", alloc::vec![r.clone()]),
            AortaAction::Deact(r) => ("deact", alloc::vec![r.clone()]),
            AortaAction::Commit(o) => ("commit", alloc::vec![o.clone()]),
            AortaAction::Drop(o) => ("drop", alloc::vec![o.clone()]),
            AortaAction::Send(ag, c) => ("send", alloc::vec![ag.clone(), c.clone()]),
        };
        Term::Compound(name.to_owned(), args)
    }

    fn apply(&self, s: &Subst) -> AortaAction {
        match self {
            AortaAction::Enact(r) => AortaAction::Enact(s.apply(r)),
            AortaAction::Deact(r) => AortaAction::Deact(s.apply(r)),
            AortaAction::Commit(o) => AortaAction::Commit(s.apply(o)),
            AortaAction::Drop(o) => AortaAction::Drop(s.apply(o)),
            AortaAction::Send(ag, c) => AortaAction::Send(s.apply(ag), s.apply(c)),
        }
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            AortaAction::Enact(t)
            | AortaAction::Deact(t)
            | AortaAction::Commit(t)
            | AortaAction::Drop(t) => t.collect_vars(out),
            AortaAction::Send(a, c) => {
                a.collect_vars(out);
                c.collect_vars(out);
            }
        }
    }
}

/// One `option : context => action .` rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReasoningRule {
    pub option: OptionTerm,
    pub context: ReasoningFormula,
    pub action: AortaAction,
}

/// The cycle's phase pipeline, fixed for every agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    ObligationCheck,
    OptionGeneration,
    ActionExecution,
}

pub const PHASE_PIPELINE: [Phase; 3] =
    [Phase::ObligationCheck, Phase::OptionGeneration, Phase::ActionExecution];

/// An inter-agent message. Content is always wrapped: `org(φ)`, `bel(φ)`, or
/// `goal(φ)`, which determines routing on receipt.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Message {
    pub sender: String,
    pub recipient: String,
    pub content: Term,
}

/// An agent's organizational half: mental state, rules, mailbox, and the
/// changed flag the runtime uses for sleep detection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AortaAgent {
    pub name: String,
    pub state: MentalState,
    pub rules: Arc<Vec<ReasoningRule>>,
    pub inbox: Vec<Message>,
    pub outbox: Vec<Message>,
    pub changed: bool,
}

impl AortaAgent {
    pub fn new(name: &str, state: MentalState, rules: Arc<Vec<ReasoningRule>>) -> AortaAgent {
        AortaAgent {
            name: name.to_owned(),
            state,
            rules,
            inbox: Vec::new(),
            outbox: Vec::new(),
            changed: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Rule parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AortaParseError {
    Syntax(ParseError),
    /// A variable used in the action is bound by neither the option pattern
    /// nor the context.
    UnboundActionVariable { variable: String, line: usize },
}

impl fmt::Display for AortaParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AortaParseError::Syntax(e) => write!(f, "{e}"),
            AortaParseError::UnboundActionVariable { variable, line } => {
                write!(f, "rule at line {line}: action variable {variable} is unbound")
            }
        }
    }
}

impl core::error::Error for AortaParseError {}

impl From<ParseError> for AortaParseError {
    fn from(e: ParseError) -> AortaParseError {
        AortaParseError::Syntax(e)
    }
}

fn parse_formula(cur: &mut Cursor) -> Result<ReasoningFormula, ParseError> {
    cur.skip_ws();
    if cur.eat(b'~') {
        cur.expect(b'(')?;
        let inner = parse_formula(cur)?;
        cur.expect(b')')?;
        return Ok(ReasoningFormula::Neg(Box::new(inner)));
    }
    if cur.eat_keyword("org") {
        cur.expect(b'(')?;
        let t = cur.term()?;
        cur.expect(b')')?;
        return Ok(ReasoningFormula::OrgQ(t));
    }
    if cur.eat_keyword("opt") {
        cur.expect(b'(')?;
        let t = cur.term()?;
        cur.expect(b')')?;
        return Ok(ReasoningFormula::OptQ(t));
    }
    if cur.eat_keyword("goal") {
        cur.expect(b'(')?;
        let t = cur.term()?;
        cur.expect(b')')?;
        return Ok(ReasoningFormula::GoalQ(t));
    }
    if cur.eat_keyword("bel") {
        cur.expect(b'(')?;
        let q = cur.query()?;
        cur.expect(b')')?;
        return Ok(ReasoningFormula::BelQ(q));
    }
    Err(cur.error("expected org(...), opt(...), goal(...), bel(...), or ~(...)"))
}

fn parse_context(cur: &mut Cursor) -> Result<ReasoningFormula, ParseError> {
    if cur.eat_keyword("true") {
        return Ok(ReasoningFormula::Top);
    }
    let mut f = parse_formula(cur)?;
    while cur.eat(b',') {
        let rhs = parse_formula(cur)?;
        f = ReasoningFormula::And(Box::new(f), Box::new(rhs));
    }
    Ok(f)
}

fn classify_action(cur: &Cursor, t: &Term) -> Result<AortaAction, ParseError> {
    match t {
        Term::Compound(f, args) if f == "enact" && args.len() == 1 => {
            Ok(AortaAction::Enact(args[0].clone()))
        }
        Term::Compound(f, args) if f == "deact" && args.len() == 1 => {
            Ok(AortaAction::Deact(args[0].clone()))
        }
        Term::Compound(f, args) if f == "commit" && args.len() == 1 => {
            Ok(AortaAction::Commit(args[0].clone()))
        }
        Term::Compound(f, args) if f == "drop" && args.len() == 1 => {
            Ok(AortaAction::Drop(args[0].clone()))
        }
        Term::Compound(f, args) if f == "send" && args.len() == 2 => {
            match args[1].functor() {
                Some(("goal", 1)) | Some(("bel", 1)) | Some(("org", 1)) => {}
                _ => {
                    return Err(cur.error(format!(
                        "send content must be goal(...), bel(...) or org(...), got {}",
                        args[1]
                    )))
                }
            }
            Ok(AortaAction::Send(args[0].clone(), args[1].clone()))
        }
        _ => Err(cur.error(format!("unknown action {t}"))),
    }
}

/// Parse a rule program: `option : context => action .` per rule, `%`
/// comments, rules in textual order.
pub fn parse_aorta_program(text: &str) -> Result<Vec<ReasoningRule>, AortaParseError> {
    let mut cur = Cursor::new(text);
    let mut rules = Vec::new();
    while !cur.at_end() {
        let rule_line = cur.line();
        let head = cur.term()?;
        let option = OptionTerm::from_term(&head)
            .ok_or_else(|| cur.error(format!("invalid option pattern {head}")))?;
        cur.expect(b':')?;
        let context = parse_context(&mut cur)?;
        cur.expect(b'=')?;
        cur.expect(b'>')?;
        let action_term = cur.term()?;
        let action = classify_action(&cur, &action_term)?;
        cur.expect(b'.')?;

        let mut bound = BTreeSet::new();
        head.collect_vars(&mut bound);
        context.collect_vars(&mut bound);
        let mut used = BTreeSet::new();
        action.collect_vars(&mut used);
        if let Some(unbound) = used.difference(&bound).next() {
            return Err(AortaParseError::UnboundActionVariable {
                variable: unbound.clone(),
                line: rule_line,
            });
        }
        rules.push(ReasoningRule { option, context, action });
    }
    Ok(rules)
}

// ---------------------------------------------------------------------------
// Semantics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CycleError {
    NonGroundNegation(Term),
    UnknownRecipient { recipient: Term },
    /// An org-content message carried something other than a well-formed
    /// dynamic (rea/obl/viol) fact.
    BadOrgMessage { content: Term, reason: String },
    /// A message part was not ground on receipt.
    NonGroundMessage(Term),
    /// A fired action still contained variables (unreachable for programs
    /// accepted by the parser; kept as a checked error, not a panic).
    NonGroundAction(Term),
}

impl fmt::Display for CycleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycleError::NonGroundNegation(t) => {
                write!(f, "negation or inequality on non-ground term: {t}")
            }
            CycleError::UnknownRecipient { recipient } => {
                write!(f, "send to unknown agent {recipient}")
            }
            CycleError::BadOrgMessage { content, reason } => {
                write!(f, "bad org message {content}: {reason}")
            }
            CycleError::NonGroundMessage(t) => write!(f, "non-ground message content: {t}"),
            CycleError::NonGroundAction(t) => write!(f, "fired action is not ground: {t}"),
        }
    }
}

impl core::error::Error for CycleError {}

impl From<SolveError> for CycleError {
    fn from(e: SolveError) -> CycleError {
        match e {
            SolveError::NonGroundNegation(t) => CycleError::NonGroundNegation(t),
        }
    }
}

/// Evaluate a reasoning formula against a mental state, enumerating all
/// satisfying substitutions in deterministic order.
pub fn eval_reasoning_formula(
    ms: &MentalState,
    formula: &ReasoningFormula,
) -> Result<Vec<Subst>, SolveError> {
    eval_reasoning_formula_with(ms, formula, &Subst::new())
}

/// `eval_reasoning_formula` from an initial substitution (the rule's option
/// bindings). Negation is negation-as-failure over the inner formula's
/// solutions; groundness is enforced only by `logic::solve` for `~`/`\=`
/// conjuncts inside bel(...) queries.
pub fn eval_reasoning_formula_with(
    ms: &MentalState,
    formula: &ReasoningFormula,
    init: &Subst,
) -> Result<Vec<Subst>, SolveError> {
    let mut out = Vec::new();
    eval_rf(ms, formula, init, &mut out)?;
    Ok(out)
}

fn eval_rf(
    ms: &MentalState,
    formula: &ReasoningFormula,
    s: &Subst,
    out: &mut Vec<Subst>,
) -> Result<(), SolveError> {
    let push = |cand: Subst, out: &mut Vec<Subst>| {
        if !out.contains(&cand) {
            out.push(cand);
        }
    };
    match formula {
        ReasoningFormula::Top => {
            push(s.clone(), out);
            Ok(())
        }
        ReasoningFormula::OrgQ(pat) => {
            for ext in ms.org.matches(pat, s) {
                push(ext, out);
            }
            Ok(())
        }
        ReasoningFormula::OptQ(pat) => {
            for ext in ms.options.matches(pat, s) {
                push(ext, out);
            }
            Ok(())
        }
        ReasoningFormula::GoalQ(pat) => {
            for ext in ms.goals.matches(pat, s) {
                push(ext, out);
            }
            Ok(())
        }
        ReasoningFormula::BelQ(q) => {
            for ext in solve_with(&ms.beliefs, q, s)? {
                push(ext, out);
            }
            Ok(())
        }
        ReasoningFormula::And(l, r) => {
            let mut left = Vec::new();
            eval_rf(ms, l, s, &mut left)?;
            for ls in left {
                eval_rf(ms, r, &ls, out)?;
            }
            Ok(())
        }
        ReasoningFormula::Neg(inner) => {
            let mut sols = Vec::new();
            eval_rf(ms, inner, s, &mut sols)?;
            if sols.is_empty() {
                push(s.clone(), out);
            }
            Ok(())
        }
    }
}

fn rea(agent: &str, role: &Term) -> Term {
    Term::Compound("rea".to_owned(), alloc::vec![Term::atom(agent), role.clone()])
}

/// OC phase: activate conditional obligations, then resolve satisfied and
/// violated ones. Both passes read a snapshot of the pre-phase state.
pub fn check_obligations(agent: &mut AortaAgent) {
    let me = agent.name.clone();
    let snap_org = agent.state.org.clone();
    let snap_bel = agent.state.beliefs.clone();

    // Activation: cond(Role, Obj, Deadline, Cond) with rea(me, Role), Cond
    // holding, Obj not yet achieved, and no obl/viol for the triple.
    let mut added: BTreeSet<(Term, Term)> = BTreeSet::new(); // (role, obj)
    for fact in snap_org.iter() {
        let Term::Compound(f, args) = fact else { continue };
        if f != "cond" || args.len() != 4 {
            continue;
        }
        let (role, obj, deadline, cond) = (&args[0], &args[1], &args[2], &args[3]);
        if !snap_org.contains(&rea(&me, role)) {
            continue;
        }
        if !formula_holds(&snap_bel, cond) || formula_holds(&snap_bel, obj) {
            continue;
        }
        let triple_taken = snap_org.iter().any(|t| match t {
            Term::Compound(g, a) if g == "obl" && a.len() == 4 => {
                a[0] == Term::atom(&me) && &a[1] == role && &a[2] == obj
            }
            Term::Compound(g, a) if g == "viol" && a.len() == 3 => {
                a[0] == Term::atom(&me) && &a[1] == role && &a[2] == obj
            }
            _ => false,
        });
        if triple_taken || !added.insert((role.clone(), obj.clone())) {
            continue;
        }
        agent.state.org.insert_dynamic(Term::Compound(
            "obl".to_owned(),
            alloc::vec![Term::atom(&me), role.clone(), obj.clone(), deadline.clone()],
        ));
    }

    // Resolution: satisfied obligations disappear; expired ones become
    // permanent violations.
    for fact in snap_org.iter() {
        let Term::Compound(f, args) = fact else { continue };
        if f != "obl" || args.len() != 4 || args[0] != Term::atom(&me) {
            continue;
        }
        let (obj, deadline) = (&args[2], &args[3]);
        if formula_holds(&snap_bel, obj) {
            agent.state.org.remove_dynamic(fact);
        } else if formula_holds(&snap_bel, deadline) {
            agent.state.org.remove_dynamic(fact);
            agent.state.org.insert_dynamic(Term::Compound(
                "viol".to_owned(),
                alloc::vec![args[0].clone(), args[1].clone(), obj.clone()],
            ));
        }
    }
}

/// OG phase: recompute Γo from scratch as a pure function of (Σa, Γa, Σo).
pub fn generate_options(agent: &mut AortaAgent) {
    agent.state.options = compute_options(&agent.name, &agent.state);
}

/// The option set itself; exposed separately so purity is testable.
pub fn compute_options(name: &str, ms: &MentalState) -> FactBase {
    let mut out = Vec::new();
    let believes = |o: &Term| ms.beliefs.contains(o);

    // (a) enactment and (b) deactment, from role declarations.
    for (role, objectives) in ms.org.roles() {
        let enacting = ms.org.contains(&rea(name, &role));
        if !enacting {
            let triggered = ms.goals.iter().any(|g| *g == role || objectives.contains(g));
            if triggered {
                out.push(OptionTerm::Role(role.clone()));
            }
        } else if objectives.iter().all(believes) {
            out.push(OptionTerm::Role(role.clone()));
        }
    }

    for fact in ms.org.iter() {
        let Term::Compound(f, args) = fact else { continue };
        match (f.as_str(), args.len()) {
            // (c) obligation options for own unachieved obligations.
            ("obl", 4) if args[0] == Term::atom(name) => {
                if let Term::Compound(g, objargs) = &args[2] {
                    if g == "bel" && objargs.len() == 1 && !believes(&objargs[0]) {
                        out.push(OptionTerm::Obj(args[2].clone()));
                    }
                }
            }
            // (d) delegation and (e) information, from dependencies.
            ("dep", 3) => {
                let (r1, r2, o) = (&args[0], &args[1], &args[2]);
                if ms.org.contains(&rea(name, r1)) && !believes(o) {
                    out.push(OptionTerm::Send {
                        role: r2.clone(),
                        ilf: Ilf::Achieve,
                        content: o.clone(),
                    });
                }
                if ms.org.contains(&rea(name, r2)) && believes(o) {
                    out.push(OptionTerm::Send {
                        role: r1.clone(),
                        ilf: Ilf::Tell,
                        content: o.clone(),
                    });
                }
            }
            // Enactment broadcast: offer telling anyone about own roles. The
            // wildcard recipient role is the reserved atom `any`.
            ("rea", 2) if args[0] == Term::atom(name) => {
                out.push(OptionTerm::Send {
                    role: Term::atom("any"),
                    ilf: Ilf::Tell,
                    content: Term::Compound("org".to_owned(), alloc::vec![fact.clone()]),
                });
            }
            _ => {}
        }
    }

    out.iter().map(OptionTerm::to_term).collect()
}

/// Is `action` applicable in `ms`? Rules whose action would be a no-op (or
/// undo nothing) do not fire; scanning continues instead.
fn action_applicable(name: &str, ms: &MentalState, action: &AortaAction) -> bool {
    match action {
        AortaAction::Enact(r) => !ms.org.contains(&rea(name, r)),
        AortaAction::Deact(r) => ms.org.contains(&rea(name, r)),
        AortaAction::Commit(o) => !ms.goals.contains(o) && !ms.beliefs.contains(o),
        AortaAction::Drop(o) => ms.goals.contains(o),
        AortaAction::Send(_, _) => true,
    }
}

/// AE phase: scan rules in textual order and options in canonical order;
/// the first (rule, option, substitution) with a satisfied context and an
/// applicable action fires. Returns the fired action as a ground term.
pub fn execute_action(
    agent: &mut AortaAgent,
    registry: &BTreeSet<String>,
) -> Result<Option<Term>, CycleError> {
    let rules = agent.rules.clone();
    for rule in rules.iter() {
        let head = rule.option.to_term();
        let options: Vec<Term> = agent.state.options.iter().cloned().collect();
        for option in options {
            let Some(bindings) = unify(&head, &option) else { continue };
            let sols = eval_reasoning_formula_with(&agent.state, &rule.context, &bindings)?;
            for s in sols {
                let action = rule.action.apply(&s);
                let action_term = action.to_term();
                if !action_term.is_ground() {
                    return Err(CycleError::NonGroundAction(action_term));
                }
                if !action_applicable(&agent.name, &agent.state, &action) {
                    continue;
                }
                apply_action(agent, &action, registry)?;
                return Ok(Some(action_term));
            }
        }
    }
    Ok(None)
}

fn apply_action(
    agent: &mut AortaAgent,
    action: &AortaAction,
    registry: &BTreeSet<String>,
) -> Result<(), CycleError> {
    let me = agent.name.clone();
    match action {
        AortaAction::Enact(r) => {
            agent.state.org.insert_dynamic(rea(&me, r));
        }
        AortaAction::Deact(r) => {
            agent.state.org.remove_dynamic(&rea(&me, r));
        }
        AortaAction::Commit(o) => {
            agent.state.goals.insert(o.clone());
        }
        AortaAction::Drop(o) => {
            agent.state.goals.remove(o);
        }
        AortaAction::Send(to, content) => {
            let recipient = match to {
                Term::Atom(name) if registry.contains(name) => name.clone(),
                _ => return Err(CycleError::UnknownRecipient { recipient: to.clone() }),
            };
            agent.outbox.push(Message {
                sender: me.clone(),
                recipient: recipient.clone(),
                content: content.clone(),
            });
            agent.state.beliefs.insert(Term::Compound(
                "sent".to_owned(),
                alloc::vec![to.clone(), content.clone()],
            ));
        }
    }
    Ok(())
}

/// Route one received message into the right base. org(φ) may only carry
/// dynamic metamodel facts; bel(φ) extends Σa; goal(φ) extends Γa.
pub fn route_message(agent: &mut AortaAgent, msg: &Message) -> Result<(), CycleError> {
    let Term::Compound(wrapper, args) = &msg.content else {
        return Err(CycleError::BadOrgMessage {
            content: msg.content.clone(),
            reason: "message content must be org/bel/goal-wrapped".to_owned(),
        });
    };
    if args.len() != 1 {
        return Err(CycleError::BadOrgMessage {
            content: msg.content.clone(),
            reason: "message wrapper must have exactly one argument".to_owned(),
        });
    }
    let inner = &args[0];
    if !inner.is_ground() {
        return Err(CycleError::NonGroundMessage(inner.clone()));
    }
    match wrapper.as_str() {
        "org" => {
            let dynamic = inner
                .functor()
                .is_some_and(|(f, n)| DYNAMIC_FUNCTORS.contains(&(f, n)));
            if !dynamic {
                return Err(CycleError::BadOrgMessage {
                    content: msg.content.clone(),
                    reason: "org messages may carry only rea/obl/viol facts".to_owned(),
                });
            }
            if let Err(e) = validate_fact_shape(inner) {
                return Err(CycleError::BadOrgMessage {
                    content: msg.content.clone(),
                    reason: format!("{e}"),
                });
            }
            agent.state.org.insert_dynamic(inner.clone());
        }
        "bel" => {
            agent.state.beliefs.insert(inner.clone());
        }
        "goal" => {
            agent.state.goals.insert(inner.clone());
        }
        _ => {
            return Err(CycleError::BadOrgMessage {
                content: msg.content.clone(),
                reason: "message content must be org/bel/goal-wrapped".to_owned(),
            });
        }
    }
    Ok(())
}

/// Outcome of one cycle: the fired action (if any) and outbound messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleOutcome {
    pub fired: Option<Term>,
    pub outbound: Vec<Message>,
}

/// One full cycle: route the oldest pending message (at most one per
/// cycle — the inbox is a paced queue, which is why a non-empty inbox by
/// itself keeps an agent awake), then run the phase pipeline. Sets the
/// agent's changed flag iff a base differs from cycle start or a message
/// was emitted (so a sender is never considered quiescent).
pub fn aorta_cycle(
    agent: &mut AortaAgent,
    incoming: Vec<Message>,
    registry: &BTreeSet<String>,
) -> Result<CycleOutcome, CycleError> {
    agent.inbox.extend(incoming);
    let snapshot = agent.state.clone();

    if !agent.inbox.is_empty() {
        let msg = agent.inbox.remove(0);
        route_message(agent, &msg)?;
    }

    let mut fired = None;
    for phase in PHASE_PIPELINE {
        match phase {
            Phase::ObligationCheck => check_obligations(agent),
            Phase::OptionGeneration => generate_options(agent),
            Phase::ActionExecution => fired = execute_action(agent, registry)?,
        }
    }

    let outbound: Vec<Message> = agent.outbox.drain(..).collect();
    agent.changed = agent.state != snapshot || !outbound.is_empty();
    Ok(CycleOutcome { fired, outbound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_term;

    const LISTING: &str = include_str!("../../../fixtures/writing-paper/org.aorta");
    const ORG_SPEC: &str = include_str!("../../../fixtures/writing-paper/orgspec.org");

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn registry() -> BTreeSet<String> {
        ["alice".to_owned(), "bob".to_owned()].into_iter().collect()
    }

    fn agent_with(name: &str, beliefs: &[&str], goals: &[&str], org: &[&str]) -> AortaAgent {
        let state = MentalState {
            beliefs: beliefs.iter().map(|s| t(s)).collect(),
            goals: goals.iter().map(|s| t(s)).collect(),
            org: OrgSpec::from_facts(org.iter().map(|s| t(s))).unwrap(),
            options: FactBase::new(),
        };
        let rules = Arc::new(parse_aorta_program(LISTING).unwrap());
        AortaAgent::new(name, state, rules)
    }

    fn fixture_alice() -> AortaAgent {
        let spec = parse_org_spec(ORG_SPEC).unwrap();
        let state = MentalState {
            beliefs: ["me(alice)", "agent(alice)", "agent(bob)"].iter().map(|s| t(s)).collect(),
            goals: ["editor"].iter().map(|s| t(s)).collect(),
            org: spec,
            options: FactBase::new(),
        };
        AortaAgent::new("alice", state, Arc::new(parse_aorta_program(LISTING).unwrap()))
    }

    #[test]
    fn parse_single_enact_rule() {
        let rules = parse_aorta_program("role(R) : true => enact(R).").unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].option, OptionTerm::Role(t("R")));
        assert_eq!(rules[0].context, ReasoningFormula::Top);
        assert_eq!(rules[0].action, AortaAction::Enact(t("R")));
    }

    #[test]
    fn parse_full_listing_in_order() {
        let rules = parse_aorta_program(LISTING).unwrap();
        assert_eq!(rules.len(), 5);
        assert_eq!(rules[0].option, OptionTerm::Role(t("R")));
        assert_eq!(rules[1].option, OptionTerm::Obj(t("bel(O)")));
        assert!(matches!(&rules[2].option, OptionTerm::Send { ilf: Ilf::Tell, .. }));
        assert!(
            matches!(&rules[3].option, OptionTerm::Send { role, ilf: Ilf::Achieve, .. } if *role == t("R"))
        );
        assert!(
            matches!(&rules[4].option, OptionTerm::Send { role, ilf: Ilf::Tell, .. } if *role == t("R"))
        );
        assert_eq!(rules[1].action, AortaAction::Commit(t("O")));
        assert_eq!(rules[3].action, AortaAction::Send(t("Ag"), t("goal(O)")));
        // Rule 2's context is bel(me(Me)) ∧ org(obl(Me,_,bel(O),_)).
        match &rules[1].context {
            ReasoningFormula::And(l, r) => {
                assert!(matches!(**l, ReasoningFormula::BelQ(_)));
                assert!(matches!(**r, ReasoningFormula::OrgQ(_)));
            }
            other => panic!("unexpected context {other:?}"),
        }
    }

    #[test]
    fn unbound_action_variable_rejected() {
        let err = parse_aorta_program("role(R) : true => enact(Q).").unwrap_err();
        assert!(matches!(
            err,
            AortaParseError::UnboundActionVariable { ref variable, .. } if variable == "Q"
        ));
    }

    #[test]
    fn obligation_activates() {
        let mut alice = agent_with(
            "alice",
            &["me(alice)"],
            &[],
            &["cond(editor,bel(wabs),bel(fdv),true)", "rea(alice,editor)"],
        );
        check_obligations(&mut alice);
        assert!(alice.state.org.contains(&t("obl(alice,editor,bel(wabs),bel(fdv))")));
    }

    #[test]
    fn obligation_satisfied_is_removed() {
        let mut alice = agent_with(
            "alice",
            &["wabs"],
            &[],
            &["obl(alice,editor,bel(wabs),bel(fdv))"],
        );
        check_obligations(&mut alice);
        assert!(!alice.state.org.iter().any(|f| f.functor() == Some(("obl", 4))));
        assert!(!alice.state.org.iter().any(|f| f.functor() == Some(("viol", 3))));
    }

    #[test]
    fn obligation_deadline_becomes_violation() {
        let mut alice = agent_with(
            "alice",
            &["fdv"],
            &[],
            &["obl(alice,editor,bel(wabs),bel(fdv))"],
        );
        check_obligations(&mut alice);
        assert!(!alice.state.org.iter().any(|f| f.functor() == Some(("obl", 4))));
        assert!(alice.state.org.contains(&t("viol(alice,editor,bel(wabs))")));
    }

    #[test]
    fn violation_blocks_reactivation() {
        let mut alice = agent_with(
            "alice",
            &["fdv"],
            &[],
            &[
                "cond(editor,bel(wabs),bel(fdv),true)",
                "rea(alice,editor)",
                "viol(alice,editor,bel(wabs))",
            ],
        );
        check_obligations(&mut alice);
        assert!(!alice.state.org.iter().any(|f| f.functor() == Some(("obl", 4))));
    }

    #[test]
    fn enactment_option_from_goal() {
        let mut alice =
            agent_with("alice", &[], &["editor"], &["role(editor,[editor,fdv,sv])"]);
        generate_options(&mut alice);
        assert!(alice.state.options.contains(&t("role(editor)")));
    }

    #[test]
    fn obligation_option_for_own_unachieved() {
        let mut bob = agent_with("bob", &[], &[], &["obl(bob,writer,bel(wsec),bel(sv))"]);
        generate_options(&mut bob);
        assert!(bob.state.options.contains(&t("obj(bel(wsec))")));
        // Achieved: option disappears.
        bob.state.beliefs.insert(t("wsec"));
        generate_options(&mut bob);
        assert!(!bob.state.options.contains(&t("obj(bel(wsec))")));
    }

    #[test]
    fn information_option_when_dependency_completed() {
        let mut alice = agent_with(
            "alice",
            &["fdv"],
            &[],
            &["dep(writer,editor,fdv)", "rea(alice,editor)"],
        );
        generate_options(&mut alice);
        assert!(alice.state.options.contains(&t("send(writer,tell,fdv)")));
        // The enactment broadcast option also appears for the enacted role.
        assert!(alice
            .state
            .options
            .contains(&t("send(any,tell,org(rea(alice,editor)))")));
    }

    #[test]
    fn delegation_option_when_dependency_open() {
        let mut bob = agent_with(
            "bob",
            &[],
            &[],
            &["dep(writer,editor,fdv)", "rea(bob,writer)"],
        );
        generate_options(&mut bob);
        assert!(bob.state.options.contains(&t("send(editor,achieve,fdv)")));
    }

    #[test]
    fn deactment_option_when_objectives_done() {
        let mut alice = agent_with(
            "alice",
            &["editor", "fdv", "sv"],
            &[],
            &["role(editor,[editor,fdv,sv])", "rea(alice,editor)"],
        );
        generate_options(&mut alice);
        assert!(alice.state.options.contains(&t("role(editor)")));
    }

    #[test]
    fn options_are_pure_function_of_state() {
        let mut alice = fixture_alice();
        alice.state.org.insert_dynamic(t("rea(alice,editor)"));
        alice.state.org.insert_dynamic(t("obl(alice,editor,bel(wabs),bel(fdv))"));
        let a = compute_options("alice", &alice.state);
        let b = compute_options("alice", &alice.state.clone());
        assert_eq!(a, b);
    }

    #[test]
    fn enact_fires_and_records_rea() {
        let mut alice =
            agent_with("alice", &["me(alice)"], &["editor"], &["role(editor,[editor,fdv,sv])"]);
        generate_options(&mut alice);
        let fired = execute_action(&mut alice, &registry()).unwrap();
        assert_eq!(fired, Some(t("enact(editor)")));
        assert!(alice.state.org.contains(&t("rea(alice,editor)")));
    }

    #[test]
    fn delegation_send_fires_with_wrapped_goal() {
        let mut alice = agent_with(
            "alice",
            &["me(alice)", "agent(alice)", "agent(bob)"],
            &[],
            &["rea(bob,writer)"],
        );
        alice.state.options = [t("send(writer,achieve,wsec)")].into_iter().collect();
        let fired = execute_action(&mut alice, &registry()).unwrap();
        assert_eq!(fired, Some(t("send(bob,goal(wsec))")));
        assert_eq!(alice.outbox.len(), 1);
        assert_eq!(alice.outbox[0].recipient, "bob");
        assert_eq!(alice.outbox[0].content, t("goal(wsec)"));
        assert!(alice.state.beliefs.contains(&t("sent(bob,goal(wsec))")));
    }

    #[test]
    fn no_options_means_no_action() {
        let mut alice = agent_with("alice", &["me(alice)"], &[], &[]);
        let before = alice.state.clone();
        let fired = execute_action(&mut alice, &registry()).unwrap();
        assert_eq!(fired, None);
        assert_eq!(alice.state, before);
    }

    #[test]
    fn inapplicable_action_falls_through() {
        // Deactment-shaped option with rea present: rule 1 matches the option
        // but enact is a no-op, so it must not fire (and nothing else does).
        let mut alice = agent_with(
            "alice",
            &["me(alice)", "agent(alice)", "agent(bob)", "editor", "fdv", "sv"],
            &[],
            &["role(editor,[editor,fdv,sv])", "rea(alice,editor)"],
        );
        generate_options(&mut alice);
        assert!(alice.state.options.contains(&t("role(editor)")));
        let fired = execute_action(&mut alice, &registry()).unwrap();
        // The broadcast option still fires (rule 3), proving scanning went on.
        assert_eq!(fired, Some(t("send(bob,org(rea(alice,editor)))")));
    }

    #[test]
    fn send_to_unknown_agent_errors() {
        let mut alice = agent_with(
            "alice",
            &["me(alice)", "agent(alice)", "agent(carol)"],
            &[],
            &["rea(carol,writer)"],
        );
        alice.state.options = [t("send(writer,achieve,wsec)")].into_iter().collect();
        let err = execute_action(&mut alice, &registry()).unwrap_err();
        assert!(matches!(err, CycleError::UnknownRecipient { .. }));
    }

    #[test]
    fn eval_org_query() {
        let alice = agent_with("alice", &[], &[], &["rea(bob,writer)"]);
        let sols =
            eval_reasoning_formula(&alice.state, &ReasoningFormula::OrgQ(t("rea(Ag,writer)")))
                .unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].get("Ag"), Some(&t("bob")));
    }

    #[test]
    fn eval_top() {
        let alice = agent_with("alice", &[], &[], &[]);
        let sols = eval_reasoning_formula(&alice.state, &ReasoningFormula::Top).unwrap();
        assert_eq!(sols, alloc::vec![Subst::new()]);
    }

    #[test]
    fn eval_broadcast_rule_context() {
        // Rule 3's context against Σa = {me(alice), agent(alice), agent(bob)}:
        // the trailing negation has an unbound R, and succeeds because no
        // sent-fact matches any instance.
        let alice =
            agent_with("alice", &["me(alice)", "agent(alice)", "agent(bob)"], &[], &[]);
        let rules = parse_aorta_program(LISTING).unwrap();
        let sols = eval_reasoning_formula(&alice.state, &rules[2].context).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].get("Me"), Some(&t("alice")));
        assert_eq!(sols[0].get("Ag"), Some(&t("bob")));
    }

    #[test]
    fn cycle_routes_org_message() {
        let mut bob = agent_with("bob", &["me(bob)"], &[], &[]);
        let incoming = alloc::vec![Message {
            sender: "alice".to_owned(),
            recipient: "bob".to_owned(),
            content: t("org(rea(alice,editor))"),
        }];
        let out = aorta_cycle(&mut bob, incoming, &registry()).unwrap();
        assert!(bob.state.org.contains(&t("rea(alice,editor)")));
        assert!(bob.changed);
        assert!(out.outbound.is_empty());
    }

    #[test]
    fn cycle_routes_one_message_per_cycle() {
        let mut bob = agent_with("bob", &["me(bob)"], &[], &[]);
        let msg = |c: &str| Message {
            sender: "alice".to_owned(),
            recipient: "bob".to_owned(),
            content: t(c),
        };
        let incoming = alloc::vec![msg("bel(first)"), msg("bel(second)")];
        aorta_cycle(&mut bob, incoming, &registry()).unwrap();
        assert!(bob.state.beliefs.contains(&t("first")));
        assert!(!bob.state.beliefs.contains(&t("second")));
        assert_eq!(bob.inbox.len(), 1);
        aorta_cycle(&mut bob, Vec::new(), &registry()).unwrap();
        assert!(bob.state.beliefs.contains(&t("second")));
        assert!(bob.inbox.is_empty());
    }

    #[test]
    fn cycle_quiescent_when_nothing_to_do() {
        let mut bob = agent_with("bob", &["me(bob)"], &[], &[]);
        let out = aorta_cycle(&mut bob, Vec::new(), &registry()).unwrap();
        assert_eq!(out.fired, None);
        assert!(!bob.changed);
        // Fixpoint: a second cycle changes nothing either.
        let snap = bob.state.clone();
        aorta_cycle(&mut bob, Vec::new(), &registry()).unwrap();
        assert_eq!(bob.state, snap);
        assert!(!bob.changed);
    }

    #[test]
    fn cycle_initial_alice_enacts_editor() {
        let mut alice = fixture_alice();
        let out = aorta_cycle(&mut alice, Vec::new(), &registry()).unwrap();
        assert!(alice.state.options.contains(&t("role(editor)")));
        assert_eq!(out.fired, Some(t("enact(editor)")));
        assert!(alice.state.org.contains(&t("rea(alice,editor)")));
        assert!(alice.changed);
    }

    #[test]
    fn cycle_is_deterministic() {
        let mut a = fixture_alice();
        let mut b = fixture_alice();
        let oa = aorta_cycle(&mut a, Vec::new(), &registry()).unwrap();
        let ob = aorta_cycle(&mut b, Vec::new(), &registry()).unwrap();
        assert_eq!(oa, ob);
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn second_cycle_activates_obligations_and_commits() {
        let mut alice = fixture_alice();
        aorta_cycle(&mut alice, Vec::new(), &registry()).unwrap();
        let out = aorta_cycle(&mut alice, Vec::new(), &registry()).unwrap();
        // Three title obligations activate; wabs is first in canonical order.
        assert!(alice.state.org.contains(&t("obl(alice,editor,bel(wabs),bel(fdv))")));
        assert!(alice.state.org.contains(&t("obl(alice,editor,bel(wtitle),bel(fdv))")));
        assert!(alice.state.org.contains(&t("obl(alice,editor,bel(wsectitle),bel(fdv))")));
        assert_eq!(out.fired, Some(t("commit(wabs)")));
        assert!(alice.state.goals.contains(&t("wabs")));
        assert_eq!(alice.state.goals.queue(), &[t("editor"), t("wabs")]);
    }

    #[test]
    fn org_message_with_static_functor_rejected() {
        let mut bob = agent_with("bob", &[], &[], &[]);
        let msg = Message {
            sender: "alice".to_owned(),
            recipient: "bob".to_owned(),
            content: t("org(role(chair,[chair]))"),
        };
        assert!(matches!(
            route_message(&mut bob, &msg),
            Err(CycleError::BadOrgMessage { .. })
        ));
    }

    #[test]
    fn goal_and_belief_messages_route() {
        let mut bob = agent_with("bob", &[], &[], &[]);
        let goal = Message {
            sender: "alice".to_owned(),
            recipient: "bob".to_owned(),
            content: t("goal(wsec)"),
        };
        let bel = Message {
            sender: "alice".to_owned(),
            recipient: "bob".to_owned(),
            content: t("bel(fdv)"),
        };
        route_message(&mut bob, &goal).unwrap();
        route_message(&mut bob, &bel).unwrap();
        assert!(bob.state.goals.contains(&t("wsec")));
        assert_eq!(bob.state.goals.queue(), &[t("wsec")]);
        assert!(bob.state.beliefs.contains(&t("fdv")));
    }

    #[test]
    fn org_spec_parses_and_validates() {
        let spec = parse_org_spec(ORG_SPEC).unwrap();
        assert_eq!(spec.len(), 15);
        assert_eq!(spec.roles().len(), 2);
        // Unknown role in dep is rejected.
        let bad = "role(editor,[fdv]).\ndep(editor,reviewer,fdv).";
        assert!(matches!(parse_org_spec(bad), Err(SpecError::UnknownRole { .. })));
        // Unknown objective is rejected.
        let bad = "role(editor,[fdv]).\nrole(writer,[wsec]).\ndep(writer,editor,wabs).";
        assert!(matches!(parse_org_spec(bad), Err(SpecError::UnknownObjective { .. })));
        // Dynamic facts may not appear in spec files.
        assert!(parse_org_spec("rea(alice,editor).").is_err());
        // Malformed cond objective is rejected.
        assert!(matches!(
            parse_org_spec("role(editor,[fdv]).\ncond(editor,fdv,true,true)."),
            Err(SpecError::MalformedFact { .. })
        ));
    }

    #[test]
    fn at_most_one_action_per_cycle() {
        // After one full cycle from the initial fixture state, the only base
        // changes are rea(alice,editor) in Σo and the recomputed options.
        let mut alice = fixture_alice();
        let before = alice.state.clone();
        aorta_cycle(&mut alice, Vec::new(), &registry()).unwrap();
        assert_eq!(alice.state.beliefs, before.beliefs);
        assert_eq!(alice.state.goals, before.goals);
        let new_org: Vec<Term> = alice
            .state
            .org
            .iter()
            .filter(|f| !before.org.contains(f))
            .cloned()
            .collect();
        assert_eq!(new_org, alloc::vec![t("rea(alice,editor)")]);
    }
}
