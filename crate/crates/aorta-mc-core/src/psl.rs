//! Property specification language: modal atoms over agent states (belief,
//! goal, action, intention, percept, organization, option), LTL connectives,
//! negation normal form, and a finite `forall` macro that expands over the
//! declared agents and the ground triples read from the org specification.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::aorta::OrgSpec;
use crate::logic::{Cursor, ParseError, Term};
use crate::runtime::MasState;

/// A ground modal atom: the propositions state-formulas are built from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModalAtom {
    /// `B(ag, f)`: agent `ag` believes `f`.
    Bel(String, Term),
    /// `G(ag, f)`: `f` is in the agent's goal base.
    Goal(String, Term),
    /// `A(ag, f)`: the last action recorded for `ag` is `f`.
    Act(String, Term),
    /// `I(ag, f)`: `f` is a goal the agent holds a running intention for.
    Intend(String, Term),
    /// `P(f)`: `f` is in the shared percept store.
    Percept(Term),
    /// `Org(ag, f)`: `f` is in the agent's organizational belief base.
    OrgB(String, Term),
    /// `Opt(ag, f)`: `f` is in the agent's organizational option base.
    OptB(String, Term),
}

impl ModalAtom {
    /// The term argument of the atom.
    pub fn term(&self) -> &Term {
        match self {
            ModalAtom::Bel(_, t)
            | ModalAtom::Goal(_, t)
            | ModalAtom::Act(_, t)
            | ModalAtom::Intend(_, t)
            | ModalAtom::Percept(t)
            | ModalAtom::OrgB(_, t)
            | ModalAtom::OptB(_, t) => t,
        }
    }
}

impl fmt::Display for ModalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModalAtom::Bel(ag, t) => write!(f, "B({ag}, {t})"),
            ModalAtom::Goal(ag, t) => write!(f, "G({ag}, {t})"),
            ModalAtom::Act(ag, t) => write!(f, "A({ag}, {t})"),
            ModalAtom::Intend(ag, t) => write!(f, "I({ag}, {t})"),
            ModalAtom::Percept(t) => write!(f, "P({t})"),
            ModalAtom::OrgB(ag, t) => write!(f, "Org({ag}, {t})"),
            ModalAtom::OptB(ag, t) => write!(f, "Opt({ag}, {t})"),
        }
    }
}

/// A linear-time property over modal atoms.
///
/// `Eventually` and `Always` are kept in the surface AST; `to_nnf` expands
/// them exactly as `true U φ` and `false R φ`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PslFormula {
    True,
    False,
    Atom(ModalAtom),
    Not(Box<PslFormula>),
    And(Box<PslFormula>, Box<PslFormula>),
    Or(Box<PslFormula>, Box<PslFormula>),
    Next(Box<PslFormula>),
    Until(Box<PslFormula>, Box<PslFormula>),
    Release(Box<PslFormula>, Box<PslFormula>),
    Eventually(Box<PslFormula>),
    Always(Box<PslFormula>),
}

impl PslFormula {
    pub fn not(f: PslFormula) -> PslFormula {
        PslFormula::Not(Box::new(f))
    }

    pub fn and(a: PslFormula, b: PslFormula) -> PslFormula {
        PslFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: PslFormula, b: PslFormula) -> PslFormula {
        PslFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: PslFormula) -> PslFormula {
        PslFormula::Next(Box::new(f))
    }

    pub fn until(a: PslFormula, b: PslFormula) -> PslFormula {
        PslFormula::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: PslFormula, b: PslFormula) -> PslFormula {
        PslFormula::Release(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: PslFormula) -> PslFormula {
        PslFormula::Eventually(Box::new(f))
    }

    pub fn always(f: PslFormula) -> PslFormula {
        PslFormula::Always(Box::new(f))
    }

    /// All distinct modal atoms of the formula, in canonical order.
    pub fn atoms(&self) -> Vec<ModalAtom> {
        let mut set = BTreeSet::new();
        collect_atoms(self, &mut set);
        set.into_iter().collect()
    }
}

fn collect_atoms(f: &PslFormula, out: &mut BTreeSet<ModalAtom>) {
    match f {
        PslFormula::True | PslFormula::False => {}
        PslFormula::Atom(a) => {
            out.insert(a.clone());
        }
        PslFormula::Not(g)
        | PslFormula::Next(g)
        | PslFormula::Eventually(g)
        | PslFormula::Always(g) => collect_atoms(g, out),
        PslFormula::And(a, b)
        | PslFormula::Or(a, b)
        | PslFormula::Until(a, b)
        | PslFormula::Release(a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
    }
}

// Precedence levels for printing: || = 1, && = 2, U/R = 3, unary = 4.
fn fmt_prec(f: &PslFormula, prec: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let paren = |level: u8, out: &mut fmt::Formatter<'_>, body: &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result| {
        if level < prec {
            out.write_str("(")?;
            body(out)?;
            out.write_str(")")
        } else {
            body(out)
        }
    };
    match f {
        PslFormula::True => out.write_str("True"),
        PslFormula::False => out.write_str("False"),
        PslFormula::Atom(a) => write!(out, "{a}"),
        PslFormula::Not(g) => {
            out.write_str("~")?;
            fmt_prec(g, 4, out)
        }
        PslFormula::Next(g) => {
            out.write_str("X ")?;
            fmt_prec(g, 4, out)
        }
        PslFormula::Eventually(g) => {
            out.write_str("<> ")?;
            fmt_prec(g, 4, out)
        }
        PslFormula::Always(g) => {
            out.write_str("[] ")?;
            fmt_prec(g, 4, out)
        }
        PslFormula::And(a, b) => paren(2, out, &|out| {
            fmt_prec(a, 2, out)?;
            out.write_str(" && ")?;
            fmt_prec(b, 3, out)
        }),
        PslFormula::Or(a, b) => paren(1, out, &|out| {
            fmt_prec(a, 1, out)?;
            out.write_str(" || ")?;
            fmt_prec(b, 2, out)
        }),
        PslFormula::Until(a, b) => paren(3, out, &|out| {
            fmt_prec(a, 4, out)?;
            out.write_str(" U ")?;
            fmt_prec(b, 3, out)
        }),
        PslFormula::Release(a, b) => paren(3, out, &|out| {
            fmt_prec(a, 4, out)?;
            out.write_str(" R ")?;
            fmt_prec(b, 3, out)
        }),
    }
}

impl fmt::Display for PslFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}

/// Ground domains the `forall` macro expands over.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MacroContext {
    /// Declared agent names, in declaration order.
    pub agents: Vec<String>,
    /// (role, objective, deadline) triples from the org spec's cond facts,
    /// with `bel(..)` wrappers stripped; canonical order, deduplicated.
    pub obligations: Vec<(Term, Term, Term)>,
    /// (dependent role, depended-on role, objective) triples from dep facts.
    pub dependencies: Vec<(Term, Term, Term)>,
}

impl MacroContext {
    pub fn new() -> MacroContext {
        MacroContext::default()
    }

    /// Build the domains from the agent roster and the org specification.
    pub fn from_spec(agents: &[String], org: &OrgSpec) -> MacroContext {
        let mut obligations = BTreeSet::new();
        let mut dependencies = BTreeSet::new();
        for fact in org.iter() {
            let Term::Compound(name, args) = fact else { continue };
            match (name.as_str(), args.len()) {
                ("cond", 4) => {
                    obligations.insert((
                        args[0].clone(),
                        unwrap_bel(&args[1]).clone(),
                        unwrap_bel(&args[2]).clone(),
                    ));
                }
                ("dep", 3) => {
                    dependencies.insert((args[0].clone(), args[1].clone(), args[2].clone()));
                }
                _ => {}
            }
        }
        MacroContext {
            agents: agents.to_vec(),
            obligations: obligations.into_iter().collect(),
            dependencies: dependencies.into_iter().collect(),
        }
    }
}

/// `bel(f)` → `f`; anything else unchanged.
fn unwrap_bel(t: &Term) -> &Term {
    if let Term::Compound(name, args) = t {
        if name == "bel" && args.len() == 1 {
            return &args[0];
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PslParseError {
    Syntax(ParseError),
    /// An atom still contains a variable after all macros were expanded.
    NonGroundAtom { term: Term },
}

impl fmt::Display for PslParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PslParseError::Syntax(e) => write!(f, "{e}"),
            PslParseError::NonGroundAtom { term } => {
                write!(f, "non-ground atom after macro expansion: {term}")
            }
        }
    }
}

impl core::error::Error for PslParseError {}

impl From<ParseError> for PslParseError {
    fn from(e: ParseError) -> PslParseError {
        PslParseError::Syntax(e)
    }
}

/// Parse one property formula.
///
/// Precedence, loosest first: `->` (right-assoc, sugar for `~a || b`), `||`,
/// `&&`, `U`/`R` (right-assoc), prefix `~` `<>` `[]` `X`, then atoms,
/// `True`/`False`, parentheses, and `forall` (whose body extends as far right
/// as possible). Macros expand here, against `ctx`.
pub fn parse_psl(text: &str, ctx: &MacroContext) -> Result<PslFormula, PslParseError> {
    let mut cur = Cursor::new(text);
    let f = parse_implication(&mut cur, ctx)?;
    cur.skip_ws();
    if !cur.at_end() {
        return Err(cur.error("unexpected input after formula").into());
    }
    check_ground(&f)?;
    Ok(f)
}

fn check_ground(f: &PslFormula) -> Result<(), PslParseError> {
    for atom in f.atoms() {
        if !atom.term().is_ground() {
            return Err(PslParseError::NonGroundAtom { term: atom.term().clone() });
        }
    }
    Ok(())
}

fn eat2(cur: &mut Cursor, a: u8, b: u8) -> bool {
    cur.skip_ws();
    if cur.peek() == Some(a) && cur.peek2() == Some(b) {
        cur.bump();
        cur.bump();
        true
    } else {
        false
    }
}

fn parse_implication(cur: &mut Cursor, ctx: &MacroContext) -> Result<PslFormula, PslParseError> {
    let lhs = parse_or(cur, ctx)?;
    if eat2(cur, b'-', b'>') {
        let rhs = parse_implication(cur, ctx)?;
        return Ok(PslFormula::or(PslFormula::not(lhs), rhs));
    }
    Ok(lhs)
}

fn parse_or(cur: &mut Cursor, ctx: &MacroContext) -> Result<PslFormula, PslParseError> {
    let mut lhs = parse_and(cur, ctx)?;
    while eat2(cur, b'|', b'|') {
        let rhs = parse_and(cur, ctx)?;
        lhs = PslFormula::or(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor, ctx: &MacroContext) -> Result<PslFormula, PslParseError> {
    let mut lhs = parse_until(cur, ctx)?;
    while eat2(cur, b'&', b'&') {
        let rhs = parse_until(cur, ctx)?;
        lhs = PslFormula::and(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_until(cur: &mut Cursor, ctx: &MacroContext) -> Result<PslFormula, PslParseError> {
    let lhs = parse_unary(cur, ctx)?;
    cur.skip_ws();
    if cur.eat_keyword("U") {
        let rhs = parse_until(cur, ctx)?;
        return Ok(PslFormula::until(lhs, rhs));
    }
    if cur.eat_keyword("R") {
        let rhs = parse_until(cur, ctx)?;
        return Ok(PslFormula::release(lhs, rhs));
    }
    Ok(lhs)
}

fn parse_unary(cur: &mut Cursor, ctx: &MacroContext) -> Result<PslFormula, PslParseError> {
    cur.skip_ws();
    if cur.eat(b'~') {
        return Ok(PslFormula::not(parse_unary(cur, ctx)?));
    }
    if eat2(cur, b'<', b'>') {
        return Ok(PslFormula::eventually(parse_unary(cur, ctx)?));
    }
    if eat2(cur, b'[', b']') {
        return Ok(PslFormula::always(parse_unary(cur, ctx)?));
    }
    if cur.eat_keyword("X") {
        return Ok(PslFormula::next(parse_unary(cur, ctx)?));
    }
    parse_primary(cur, ctx)
}

fn parse_primary(cur: &mut Cursor, ctx: &MacroContext) -> Result<PslFormula, PslParseError> {
    cur.skip_ws();
    if cur.eat(b'(') {
        let f = parse_implication(cur, ctx)?;
        cur.expect(b')')?;
        return Ok(f);
    }
    if cur.eat_keyword("True") {
        return Ok(PslFormula::True);
    }
    if cur.eat_keyword("False") {
        return Ok(PslFormula::False);
    }
    if cur.eat_keyword("forall") {
        return parse_forall(cur, ctx);
    }
    if cur.eat_keyword("P") {
        cur.expect(b'(')?;
        let t = cur.term()?;
        cur.expect(b')')?;
        return Ok(PslFormula::Atom(ModalAtom::Percept(t)));
    }
    for (kw, make) in [
        ("Org", ModalAtom::OrgB as fn(String, Term) -> ModalAtom),
        ("Opt", ModalAtom::OptB),
        ("B", ModalAtom::Bel),
        ("G", ModalAtom::Goal),
        ("A", ModalAtom::Act),
        ("I", ModalAtom::Intend),
    ] {
        if cur.eat_keyword(kw) {
            cur.expect(b'(')?;
            let agent = cur.ident()?;
            cur.expect(b',')?;
            let t = cur.term()?;
            cur.expect(b')')?;
            return Ok(PslFormula::Atom(make(agent, t)));
        }
    }
    Err(cur.error("expected a formula").into())
}

fn parse_forall(cur: &mut Cursor, ctx: &MacroContext) -> Result<PslFormula, PslParseError> {
    cur.skip_ws();
    let mut binders = Vec::new();
    if cur.eat(b'(') {
        loop {
            binders.push(cur.ident()?);
            if cur.eat(b',') {
                continue;
            }
            cur.expect(b')')?;
            break;
        }
    } else {
        binders.push(cur.ident()?);
    }
    if !cur.eat_keyword("in") {
        return Err(cur.error("expected 'in' after forall binder").into());
    }
    let domain = cur.ident()?;
    cur.expect(b':')?;
    // Maximal scope: the body is a whole formula, so the quantifier extends
    // as far right as possible unless parenthesized.
    let body = parse_implication(cur, ctx)?;
    let rows: Vec<Vec<Term>> = match domain.as_str() {
        "agents" => {
            if binders.len() != 1 {
                return Err(cur.error("forall over agents binds one name").into());
            }
            ctx.agents.iter().map(|a| alloc::vec![Term::atom(a)]).collect()
        }
        "obligations" => {
            if binders.len() != 3 {
                return Err(cur
                    .error("forall over obligations binds a (role, objective, deadline) triple")
                    .into());
            }
            ctx.obligations
                .iter()
                .map(|(r, o, d)| alloc::vec![r.clone(), o.clone(), d.clone()])
                .collect()
        }
        "dependencies" => {
            if binders.len() != 3 {
                return Err(cur
                    .error("forall over dependencies binds a (role, role, objective) triple")
                    .into());
            }
            ctx.dependencies
                .iter()
                .map(|(r1, r2, o)| alloc::vec![r1.clone(), r2.clone(), o.clone()])
                .collect()
        }
        _ => return Err(cur.error("unknown forall domain").into()),
    };
    let mut conjuncts = rows.into_iter().map(|row| {
        let mut inst = body.clone();
        for (binder, value) in binders.iter().zip(&row) {
            inst = substitute(&inst, binder, value);
        }
        inst
    });
    let Some(first) = conjuncts.next() else {
        return Ok(PslFormula::True);
    };
    Ok(conjuncts.fold(first, PslFormula::and))
}

/// Replace every occurrence of the binder `name` — as an atom or variable in
/// term positions, or as an agent slot when the value is an atom — by `value`.
fn substitute(f: &PslFormula, name: &str, value: &Term) -> PslFormula {
    let slot = |ag: &String| -> String {
        match value {
            Term::Atom(a) if ag == name => a.clone(),
            _ => ag.clone(),
        }
    };
    match f {
        PslFormula::True => PslFormula::True,
        PslFormula::False => PslFormula::False,
        PslFormula::Atom(a) => PslFormula::Atom(match a {
            ModalAtom::Bel(ag, t) => ModalAtom::Bel(slot(ag), subst_term(t, name, value)),
            ModalAtom::Goal(ag, t) => ModalAtom::Goal(slot(ag), subst_term(t, name, value)),
            ModalAtom::Act(ag, t) => ModalAtom::Act(slot(ag), subst_term(t, name, value)),
            ModalAtom::Intend(ag, t) => ModalAtom::Intend(slot(ag), subst_term(t, name, value)),
            ModalAtom::Percept(t) => ModalAtom::Percept(subst_term(t, name, value)),
            ModalAtom::OrgB(ag, t) => ModalAtom::OrgB(slot(ag), subst_term(t, name, value)),
            ModalAtom::OptB(ag, t) => ModalAtom::OptB(slot(ag), subst_term(t, name, value)),
        }),
        PslFormula::Not(g) => PslFormula::not(substitute(g, name, value)),
        PslFormula::Next(g) => PslFormula::next(substitute(g, name, value)),
        PslFormula::Eventually(g) => PslFormula::eventually(substitute(g, name, value)),
        PslFormula::Always(g) => PslFormula::always(substitute(g, name, value)),
        PslFormula::And(a, b) => {
            PslFormula::and(substitute(a, name, value), substitute(b, name, value))
        }
        PslFormula::Or(a, b) => {
            PslFormula::or(substitute(a, name, value), substitute(b, name, value))
        }
        PslFormula::Until(a, b) => {
            PslFormula::until(substitute(a, name, value), substitute(b, name, value))
        }
        PslFormula::Release(a, b) => {
            PslFormula::release(substitute(a, name, value), substitute(b, name, value))
        }
    }
}

fn subst_term(t: &Term, name: &str, value: &Term) -> Term {
    match t {
        Term::Atom(a) if a == name => value.clone(),
        Term::Var(v) if v == name => value.clone(),
        Term::Compound(f, args) => {
            Term::Compound(f.clone(), args.iter().map(|a| subst_term(a, name, value)).collect())
        }
        Term::List(items) => {
            Term::List(items.iter().map(|a| subst_term(a, name, value)).collect())
        }
        _ => t.clone(),
    }
}

/// Negation normal form: negations pushed onto atoms via the LTL dualities,
/// `<>`/`[]` expanded into `U`/`R`.
pub fn to_nnf(f: &PslFormula) -> PslFormula {
    match f {
        PslFormula::True | PslFormula::False | PslFormula::Atom(_) => f.clone(),
        PslFormula::Not(g) => nnf_neg(g),
        PslFormula::And(a, b) => PslFormula::and(to_nnf(a), to_nnf(b)),
        PslFormula::Or(a, b) => PslFormula::or(to_nnf(a), to_nnf(b)),
        PslFormula::Next(g) => PslFormula::next(to_nnf(g)),
        PslFormula::Until(a, b) => PslFormula::until(to_nnf(a), to_nnf(b)),
        PslFormula::Release(a, b) => PslFormula::release(to_nnf(a), to_nnf(b)),
        PslFormula::Eventually(g) => PslFormula::until(PslFormula::True, to_nnf(g)),
        PslFormula::Always(g) => PslFormula::release(PslFormula::False, to_nnf(g)),
    }
}

fn nnf_neg(f: &PslFormula) -> PslFormula {
    match f {
        PslFormula::True => PslFormula::False,
        PslFormula::False => PslFormula::True,
        PslFormula::Atom(_) => PslFormula::not(f.clone()),
        PslFormula::Not(g) => to_nnf(g),
        PslFormula::And(a, b) => PslFormula::or(nnf_neg(a), nnf_neg(b)),
        PslFormula::Or(a, b) => PslFormula::and(nnf_neg(a), nnf_neg(b)),
        PslFormula::Next(g) => PslFormula::next(nnf_neg(g)),
        PslFormula::Until(a, b) => PslFormula::release(nnf_neg(a), nnf_neg(b)),
        PslFormula::Release(a, b) => PslFormula::until(nnf_neg(a), nnf_neg(b)),
        PslFormula::Eventually(g) => PslFormula::release(PslFormula::False, nnf_neg(g)),
        PslFormula::Always(g) => PslFormula::until(PslFormula::True, nnf_neg(g)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PslEvalError {
    UnknownAgent { agent: String },
}

impl fmt::Display for PslEvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PslEvalError::UnknownAgent { agent } => write!(f, "unknown agent {agent}"),
        }
    }
}

impl core::error::Error for PslEvalError {}

/// Strip `bel(..)` from the objective and deadline slots of obl/viol facts so
/// properties can name objectives directly.
fn normalize_org(t: &Term) -> Term {
    if let Term::Compound(name, args) = t {
        if name == "obl" && args.len() == 4 {
            return Term::app(
                "obl",
                alloc::vec![
                    args[0].clone(),
                    args[1].clone(),
                    unwrap_bel(&args[2]).clone(),
                    unwrap_bel(&args[3]).clone(),
                ],
            );
        }
        if name == "viol" && args.len() == 3 {
            return Term::app(
                "viol",
                alloc::vec![args[0].clone(), args[1].clone(), unwrap_bel(&args[2]).clone()],
            );
        }
    }
    t.clone()
}

/// Evaluate one modal atom in a state.
pub fn eval_atom(s: &MasState, atom: &ModalAtom) -> Result<bool, PslEvalError> {
    let agent = |name: &String| {
        s.agent(name).ok_or(PslEvalError::UnknownAgent { agent: name.to_string() })
    };
    Ok(match atom {
        ModalAtom::Bel(ag, f) => agent(ag)?.aorta.state.beliefs.contains(f),
        ModalAtom::Goal(ag, f) => agent(ag)?.aorta.state.goals.contains(f),
        ModalAtom::Act(ag, f) => agent(ag)?.last_action.as_ref() == Some(f),
        ModalAtom::Intend(ag, f) => agent(ag)?.intentions.iter().any(|i| i.goal == *f),
        ModalAtom::Percept(f) => s.percepts.contains(f),
        ModalAtom::OrgB(ag, f) => {
            let wanted = normalize_org(f);
            agent(ag)?.aorta.state.org.iter().any(|g| normalize_org(&g) == wanted)
        }
        ModalAtom::OptB(ag, f) => agent(ag)?.aorta.state.options.contains(f),
    })
}
