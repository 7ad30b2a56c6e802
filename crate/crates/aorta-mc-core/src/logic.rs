//! First-order terms, substitutions, unification, and conjunctive query
//! evaluation with negation-as-failure over ground fact bases.
//!
//! This is the substrate every other module builds on: option matching,
//! rule contexts, organizational queries and property atoms are all terms,
//! and all the bases are `FactBase` values.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// A first-order term. `Atom` is the arity-0 case of `Compound`; compounds
/// always have at least one argument (the parser enforces this), which keeps
/// the canonical ordering consistent with structural equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Atom(String),
    Var(String),
    Int(i64),
    Compound(String, Vec<Term>),
    List(Vec<Term>),
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(name.to_owned())
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_owned())
    }

    pub fn app(functor: &str, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Atom(functor.to_owned())
        } else {
            Term::Compound(functor.to_owned(), args)
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Atom(_) | Term::Int(_) => true,
            Term::Var(_) => false,
            Term::Compound(_, args) | Term::List(args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Compound(_, args) | Term::List(args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            _ => {}
        }
    }

    /// Functor name for atoms and compounds, `None` otherwise.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(n) => Some((n, 0)),
            Term::Compound(n, args) => Some((n, args.len())),
            _ => None,
        }
    }

    fn contains_var(&self, name: &str) -> bool {
        match self {
            Term::Var(v) => v == name,
            Term::Compound(_, args) | Term::List(args) => {
                args.iter().any(|a| a.contains_var(name))
            }
            _ => false,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Term::Int(_) => 0,
            Term::Atom(_) | Term::Compound(_, _) => 1,
            Term::List(_) => 2,
            Term::Var(_) => 3,
        }
    }
}

// Canonical term order: integers, then atoms/compounds by functor name,
// arity, and arguments, then lists, then variables. Atoms sit in the
// compound family as arity 0, so `a` < `a(x)` < `b`.
impl Ord for Term {
    fn cmp(&self, other: &Term) -> Ordering {
        match self.rank().cmp(&other.rank()) {
            Ordering::Equal => {}
            o => return o,
        }
        match (self, other) {
            (Term::Int(a), Term::Int(b)) => a.cmp(b),
            (Term::Var(a), Term::Var(b)) => a.cmp(b),
            (Term::List(a), Term::List(b)) => a.cmp(b),
            (a, b) => {
                let (fa, na) = a.functor().expect("rank 1 is atom/compound");
                let (fb, nb) = b.functor().expect("rank 1 is atom/compound");
                fa.cmp(fb).then(na.cmp(&nb)).then_with(|| {
                    let empty: &[Term] = &[];
                    let xs = if let Term::Compound(_, xs) = a { &xs[..] } else { empty };
                    let ys = if let Term::Compound(_, ys) = b { &ys[..] } else { empty };
                    xs.cmp(ys)
                })
            }
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Term) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(n) => f.write_str(n),
            Term::Var(n) => f.write_str(n),
            Term::Int(i) => write!(f, "{i}"),
            Term::Compound(n, args) => {
                f.write_str(n)?;
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Term::List(items) => {
                f.write_str("[")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// An idempotent substitution with the occurs check maintained on every bind:
/// no binding's value mentions any bound variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subst {
    bindings: BTreeMap<String, Term>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => match self.bindings.get(v) {
                Some(bound) => bound.clone(),
                None => t.clone(),
            },
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
            Term::List(items) => Term::List(items.iter().map(|a| self.apply(a)).collect()),
            _ => t.clone(),
        }
    }

    /// Bind `var` to `value` (resolved against self first). Fails on the
    /// occurs check. Existing bindings are rewritten so the substitution
    /// stays idempotent.
    fn bind(&mut self, var: &str, value: &Term) -> bool {
        let resolved = self.apply(value);
        if let Term::Var(v) = &resolved {
            if v == var {
                return true; // X ↦ X is a no-op
            }
        }
        if resolved.contains_var(var) {
            return false;
        }
        let mut single = Subst::new();
        single.bindings.insert(var.to_owned(), resolved.clone());
        for v in self.bindings.values_mut() {
            *v = single.apply(v);
        }
        self.bindings.insert(var.to_owned(), resolved);
        true
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}->{t}")?;
        }
        f.write_str("}")
    }
}

/// Most general unifier of `t1` and `t2`, or `None` when no unifier exists
/// (including occurs-check failures).
pub fn unify(t1: &Term, t2: &Term) -> Option<Subst> {
    let mut s = Subst::new();
    if unify_into(&mut s, t1, t2) {
        Some(s)
    } else {
        None
    }
}

/// Extend `s` so that it unifies `t1` with `t2`; on failure `s` is garbage
/// and must be discarded by the caller.
pub fn unify_into(s: &mut Subst, t1: &Term, t2: &Term) -> bool {
    let a = s.apply(t1);
    let b = s.apply(t2);
    match (&a, &b) {
        (Term::Var(x), _) => s.bind(x, &b),
        (_, Term::Var(y)) => s.bind(y, &a),
        (Term::Atom(x), Term::Atom(y)) => x == y,
        (Term::Int(x), Term::Int(y)) => x == y,
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_into(s, x, y))
        }
        (Term::List(xs), Term::List(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_into(s, x, y))
        }
        _ => false,
    }
}

/// A set of ground facts. Iteration is always in canonical term order, which
/// is what makes query enumeration and serialization deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactBase {
    facts: BTreeSet<Term>,
}

impl FactBase {
    pub fn new() -> FactBase {
        FactBase::default()
    }

    /// Insert a ground fact; duplicates are a no-op. Panics on non-ground
    /// input — every caller grounds its terms first (post-substitution), so
    /// a variable here is a bug, not a user error.
    pub fn insert(&mut self, fact: Term) -> bool {
        assert!(fact.is_ground(), "fact base insert of non-ground term {fact}");
        self.facts.insert(fact)
    }

    pub fn remove(&mut self, fact: &Term) -> bool {
        self.facts.remove(fact)
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

    /// All extensions of `s` that unify `pattern` with some fact, in
    /// canonical fact order.
    pub fn matches(&self, pattern: &Term, s: &Subst) -> Vec<Subst> {
        let mut out = Vec::new();
        for fact in &self.facts {
            let mut cand = s.clone();
            if unify_into(&mut cand, pattern, fact) && !out.contains(&cand) {
                out.push(cand);
            }
        }
        out
    }
}

impl FromIterator<Term> for FactBase {
    fn from_iter<I: IntoIterator<Item = Term>>(iter: I) -> FactBase {
        let mut base = FactBase::new();
        for t in iter {
            base.insert(t);
        }
        base
    }
}

/// One conjunct of a query: a positive pattern, a negated pattern
/// (negation as failure), or a structural inequality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conjunct {
    Pos(Term),
    Neg(Term),
    Neq(Term, Term),
}

/// A conjunctive query, e.g. Listing-style `me(Me), agent(Ag), Ag\=Me`.
/// Negations and inequalities must be ground by the time they are reached.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryGoal {
    pub conjuncts: Vec<Conjunct>,
}

impl QueryGoal {
    pub fn new(conjuncts: Vec<Conjunct>) -> QueryGoal {
        QueryGoal { conjuncts }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        for c in &self.conjuncts {
            match c {
                Conjunct::Pos(t) | Conjunct::Neg(t) => t.collect_vars(out),
                Conjunct::Neq(a, b) => {
                    a.collect_vars(out);
                    b.collect_vars(out);
                }
            }
        }
    }
}

impl fmt::Display for QueryGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match c {
                Conjunct::Pos(t) => write!(f, "{t}")?,
                Conjunct::Neg(t) => write!(f, "~({t})")?,
                Conjunct::Neq(a, b) => write!(f, "{a}\\={b}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveError {
    /// A negated or inequality conjunct was reached while still containing
    /// variables; earlier conjuncts must ground them.
    NonGroundNegation(Term),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::NonGroundNegation(t) => {
                write!(f, "negation or inequality on non-ground term: {t}")
            }
        }
    }
}

impl core::error::Error for SolveError {}

/// Enumerate every substitution satisfying `goal` against `base`.
/// Deterministic: facts in canonical order, conjuncts left to right.
pub fn solve(base: &FactBase, goal: &QueryGoal) -> Result<Vec<Subst>, SolveError> {
    solve_with(base, goal, &Subst::new())
}

/// `solve` starting from an incoming substitution (used by rule contexts,
/// where the option pattern has already bound variables).
pub fn solve_with(base: &FactBase, goal: &QueryGoal, init: &Subst) -> Result<Vec<Subst>, SolveError> {
    let mut out = Vec::new();
    backtrack(base, &goal.conjuncts, init.clone(), &mut out)?;
    Ok(out)
}

fn backtrack(
    base: &FactBase,
    conjuncts: &[Conjunct],
    s: Subst,
    out: &mut Vec<Subst>,
) -> Result<(), SolveError> {
    let Some((first, rest)) = conjuncts.split_first() else {
        if !out.contains(&s) {
            out.push(s);
        }
        return Ok(());
    };
    match first {
        Conjunct::Pos(pat) => {
            for ext in base.matches(pat, &s) {
                backtrack(base, rest, ext, out)?;
            }
            Ok(())
        }
        Conjunct::Neg(pat) => {
            let t = s.apply(pat);
            if !t.is_ground() {
                return Err(SolveError::NonGroundNegation(t));
            }
            if base.contains(&t) {
                Ok(()) // fails: fact present
            } else {
                backtrack(base, rest, s, out)
            }
        }
        Conjunct::Neq(a, b) => {
            let ta = s.apply(a);
            let tb = s.apply(b);
            if !ta.is_ground() {
                return Err(SolveError::NonGroundNegation(ta));
            }
            if !tb.is_ground() {
                return Err(SolveError::NonGroundNegation(tb));
            }
            if ta != tb {
                backtrack(base, rest, s, out)
            } else {
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Text syntax
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}:{}: {}", self.line, self.col, self.msg)
    }
}

impl core::error::Error for ParseError {}

/// Character cursor shared by the term, rule, plan and property parsers.
/// Tracks line/column for errors and hands out deterministic fresh names
/// for anonymous `_` variables.
pub(crate) struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
    fresh: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str) -> Cursor<'a> {
        Cursor { src: src.as_bytes(), pos: 0, line: 1, col: 1, fresh: 0 }
    }

    pub fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col, msg: msg.into() }
    }

    pub fn line(&mut self) -> usize {
        self.skip_ws();
        self.line
    }

    pub fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    pub fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    pub fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    /// Skip whitespace and `%` line comments.
    pub fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.peek().is_none()
    }

    /// Consume `c` or fail.
    pub fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(alloc::format!("expected '{}'", c as char)))
        }
    }

    /// Consume `c` if present.
    pub fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    /// Consume the exact keyword `kw` (must not be followed by an ident char).
    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let bytes = kw.as_bytes();
        if self.src[self.pos..].starts_with(bytes) {
            let after = self.src.get(self.pos + bytes.len()).copied();
            if !matches!(after, Some(c) if is_ident_char(c)) {
                for _ in 0..bytes.len() {
                    self.bump();
                }
                return true;
            }
        }
        false
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                self.bump();
            }
            _ => return Err(self.error("expected identifier")),
        }
        while let Some(c) = self.peek() {
            if is_ident_char(c) {
                self.bump();
            } else {
                break;
            }
        }
        Ok(core::str::from_utf8(&self.src[start..self.pos])
            .expect("idents are ascii")
            .to_owned())
    }

    /// Parse one term.
    pub fn term(&mut self) -> Result<Term, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'[') => {
                self.bump();
                let mut items = Vec::new();
                self.skip_ws();
                if self.peek() == Some(b']') {
                    self.bump();
                    return Ok(Term::List(items));
                }
                loop {
                    items.push(self.term()?);
                    self.skip_ws();
                    match self.bump() {
                        Some(b',') => continue,
                        Some(b']') => return Ok(Term::List(items)),
                        _ => return Err(self.error("expected ',' or ']' in list")),
                    }
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'-' => {
                let neg = c == b'-';
                if neg {
                    self.bump();
                }
                let start = self.pos;
                while matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                    self.bump();
                }
                if self.pos == start {
                    return Err(self.error("expected digits after '-'"));
                }
                let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let value: i64 = digits
                    .parse()
                    .map_err(|_| self.error("integer out of range"))?;
                Ok(Term::Int(if neg { -value } else { value }))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.ident()?;
                let first = name.as_bytes()[0];
                if first.is_ascii_uppercase() || first == b'_' {
                    // "_" alone is anonymous: every occurrence is a fresh var.
                    if name == "_" {
                        self.fresh += 1;
                        return Ok(Term::Var(alloc::format!("_A{}", self.fresh)));
                    }
                    return Ok(Term::Var(name));
                }
                if self.peek() == Some(b'(') {
                    self.bump();
                    let mut args = Vec::new();
                    loop {
                        args.push(self.term()?);
                        self.skip_ws();
                        match self.bump() {
                            Some(b',') => continue,
                            Some(b')') => break,
                            _ => return Err(self.error("expected ',' or ')' in arguments")),
                        }
                    }
                    Ok(Term::Compound(name, args))
                } else {
                    Ok(Term::Atom(name))
                }
            }
            Some(c) => Err(self.error(alloc::format!("unexpected character '{}'", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    /// One query conjunct: `~(t)`, `t \= t`, or `t`.
    pub fn conjunct(&mut self) -> Result<Conjunct, ParseError> {
        self.skip_ws();
        if self.peek() == Some(b'~') {
            self.bump();
            self.expect(b'(')?;
            let t = self.term()?;
            self.expect(b')')?;
            return Ok(Conjunct::Neg(t));
        }
        let t = self.term()?;
        self.skip_ws();
        if self.peek() == Some(b'\\') && self.peek2() == Some(b'=') {
            self.bump();
            self.bump();
            let rhs = self.term()?;
            return Ok(Conjunct::Neq(t, rhs));
        }
        Ok(Conjunct::Pos(t))
    }

    /// Comma-separated conjuncts up to (not consuming) a closing delimiter.
    pub fn query(&mut self) -> Result<QueryGoal, ParseError> {
        let mut conjuncts = alloc::vec![self.conjunct()?];
        while self.eat(b',') {
            conjuncts.push(self.conjunct()?);
        }
        Ok(QueryGoal::new(conjuncts))
    }
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// Parse a single term from `text`; trailing input is an error.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut cur = Cursor::new(text);
    let t = cur.term()?;
    if !cur.at_end() {
        return Err(cur.error("trailing input after term"));
    }
    Ok(t)
}

/// Parse a comma-separated conjunctive query from `text`.
pub fn parse_query(text: &str) -> Result<QueryGoal, ParseError> {
    let mut cur = Cursor::new(text);
    let q = cur.query()?;
    if !cur.at_end() {
        return Err(cur.error("trailing input after query"));
    }
    Ok(q)
}
