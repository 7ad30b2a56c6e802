//! Independent reference semantics used as oracles: brute-force LTL
//! evaluation on ultimately periodic words, a naive conjunctive-query
//! solver, and bounded lasso enumeration over explicit graphs.

use alloc::vec::Vec;

use crate::logic::{unify_into, Conjunct, FactBase, QueryGoal, SolveError, Subst};
use crate::psl::{ModalAtom, PslFormula};

/// An ultimately periodic word of valuation bitmasks: `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub prefix: Vec<u64>,
    pub cycle: Vec<u64>,
}

impl Word {
    fn letter(&self, p: usize) -> u64 {
        if p < self.prefix.len() {
            self.prefix[p]
        } else {
            self.cycle[p - self.prefix.len()]
        }
    }
}

/// Brute-force LTL semantics of `phi` on `word`, with atom i read from bit i.
///
/// Works directly on the surface AST (including `<>`/`[]` and negations in
/// any position) by computing per-position truth tables; until/release are
/// solved as fixpoints over the lasso's finitely many positions.
pub fn eval_word(phi: &PslFormula, atoms: &[ModalAtom], word: &Word) -> bool {
    debug_assert!(!word.cycle.is_empty());
    let total = word.prefix.len() + word.cycle.len();
    table(phi, atoms, word, total)[0]
}

fn table(phi: &PslFormula, atoms: &[ModalAtom], word: &Word, total: usize) -> Vec<bool> {
    let succ = |p: usize| if p + 1 < total { p + 1 } else { word.prefix.len() };
    match phi {
        PslFormula::True => alloc::vec![true; total],
        PslFormula::False => alloc::vec![false; total],
        PslFormula::Atom(a) => {
            let bit = atoms.iter().position(|x| x == a).expect("atom indexed") as u64;
            (0..total).map(|p| word.letter(p) >> bit & 1 == 1).collect()
        }
        PslFormula::Not(g) => table(g, atoms, word, total).iter().map(|b| !b).collect(),
        PslFormula::And(a, b) => {
            let ta = table(a, atoms, word, total);
            let tb = table(b, atoms, word, total);
            ta.iter().zip(&tb).map(|(x, y)| *x && *y).collect()
        }
        PslFormula::Or(a, b) => {
            let ta = table(a, atoms, word, total);
            let tb = table(b, atoms, word, total);
            ta.iter().zip(&tb).map(|(x, y)| *x || *y).collect()
        }
        PslFormula::Next(g) => {
            let tg = table(g, atoms, word, total);
            (0..total).map(|p| tg[succ(p)]).collect()
        }
        PslFormula::Until(a, b) => {
            let ta = table(a, atoms, word, total);
            let tb = table(b, atoms, word, total);
            // Least fixpoint of u[p] = b[p] ∨ (a[p] ∧ u[succ(p)]).
            let mut u = alloc::vec![false; total];
            for _ in 0..=total {
                for p in (0..total).rev() {
                    u[p] = tb[p] || (ta[p] && u[succ(p)]);
                }
            }
            u
        }
        PslFormula::Release(a, b) => {
            let ta = table(a, atoms, word, total);
            let tb = table(b, atoms, word, total);
            // Greatest fixpoint of r[p] = b[p] ∧ (a[p] ∨ r[succ(p)]).
            let mut r = alloc::vec![true; total];
            for _ in 0..=total {
                for p in (0..total).rev() {
                    r[p] = tb[p] && (ta[p] || r[succ(p)]);
                }
            }
            r
        }
        PslFormula::Eventually(g) => {
            let tg = table(g, atoms, word, total);
            let mut e = alloc::vec![false; total];
            for _ in 0..=total {
                for p in (0..total).rev() {
                    e[p] = tg[p] || e[succ(p)];
                }
            }
            e
        }
        PslFormula::Always(g) => {
            let tg = table(g, atoms, word, total);
            let mut a = alloc::vec![true; total];
            for _ in 0..=total {
                for p in (0..total).rev() {
                    a[p] = tg[p] && a[succ(p)];
                }
            }
            a
        }
    }
}

/// Naive query solving: for each positive conjunct try every fact by direct
/// unification, then filter by negations and inequalities. Mirrors the
/// production solver's semantics (left-to-right, canonical fact order,
/// errors on non-ground negation) without sharing its matching machinery.
pub fn solve_naive(base: &FactBase, goal: &QueryGoal) -> Result<Vec<Subst>, SolveError> {
    let mut out = Vec::new();
    naive_backtrack(base, &goal.conjuncts, Subst::new(), &mut out)?;
    Ok(out)
}

fn naive_backtrack(
    base: &FactBase,
    rest: &[Conjunct],
    s: Subst,
    out: &mut Vec<Subst>,
) -> Result<(), SolveError> {
    let Some((first, rest)) = rest.split_first() else {
        out.push(s);
        return Ok(());
    };
    match first {
        Conjunct::Pos(pat) => {
            for fact in base.iter() {
                let mut cand = s.clone();
                if unify_into(&mut cand, pat, fact) {
                    naive_backtrack(base, rest, cand, out)?;
                }
            }
            Ok(())
        }
        Conjunct::Neg(pat) => {
            let t = s.apply(pat);
            if !t.is_ground() {
                return Err(SolveError::NonGroundNegation(t));
            }
            if base.iter().any(|f| *f == t) {
                Ok(())
            } else {
                naive_backtrack(base, rest, s, out)
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
            if ta == tb {
                Ok(())
            } else {
                naive_backtrack(base, rest, s, out)
            }
        }
    }
}

/// Search all lassos `path[0..cycle_start] · (path[cycle_start..])^ω` with
/// `path.len() <= max_len` in an explicit graph for one whose valuation word
/// violates `phi`. Walks may revisit nodes. Returns the first violating
/// `(path, cycle_start)` in enumeration order, or None if every enumerated
/// lasso satisfies the property.
pub fn find_violating_lasso(
    succ: &[Vec<usize>],
    valuations: &[u64],
    initial: usize,
    phi: &PslFormula,
    atoms: &[ModalAtom],
    max_len: usize,
) -> Option<(Vec<usize>, usize)> {
    let mut path = alloc::vec![initial];
    walk(succ, valuations, phi, atoms, max_len, &mut path)
}

fn walk(
    succ: &[Vec<usize>],
    valuations: &[u64],
    phi: &PslFormula,
    atoms: &[ModalAtom],
    max_len: usize,
    path: &mut Vec<usize>,
) -> Option<(Vec<usize>, usize)> {
    let last = *path.last().expect("non-empty walk");
    for &next in &succ[last] {
        // Closing the walk at any earlier occurrence of `next` forms a lasso.
        for start in 0..path.len() {
            if path[start] != next {
                continue;
            }
            let word = Word {
                prefix: path[..start].iter().map(|&v| valuations[v]).collect(),
                cycle: path[start..].iter().map(|&v| valuations[v]).collect(),
            };
            if !eval_word(phi, atoms, &word) {
                return Some((path.clone(), start));
            }
        }
        if path.len() < max_len {
            path.push(next);
            if let Some(hit) = walk(succ, valuations, phi, atoms, max_len, path) {
                return Some(hit);
            }
            path.pop();
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_query, parse_term, solve, Term};
    use crate::psl::{parse_psl, MacroContext};

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn formula(text: &str) -> (PslFormula, Vec<ModalAtom>) {
        let f = parse_psl(text, &MacroContext::new()).unwrap();
        let atoms = f.atoms();
        (f, atoms)
    }

    #[test]
    fn word_semantics_basics() {
        let (f, atoms) = formula("<> B(alice, p)");
        assert!(eval_word(&f, &atoms, &Word { prefix: alloc::vec![0, 1], cycle: alloc::vec![0] }));
        assert!(!eval_word(&f, &atoms, &Word { prefix: alloc::vec![0], cycle: alloc::vec![0] }));
        let (g, atoms) = formula("[] B(alice, p)");
        assert!(eval_word(&g, &atoms, &Word { prefix: alloc::vec![], cycle: alloc::vec![1] }));
        assert!(!eval_word(&g, &atoms, &Word { prefix: alloc::vec![1], cycle: alloc::vec![1, 0] }));
    }

    #[test]
    fn until_requires_continuity() {
        let (f, atoms) = formula("B(alice, p) U B(alice, q)");
        let p = 1 << atoms.iter().position(|a| *a.term() == t("p")).unwrap();
        let q = 1 << atoms.iter().position(|a| *a.term() == t("q")).unwrap();
        assert!(eval_word(&f, &atoms, &Word { prefix: alloc::vec![p, p, q], cycle: alloc::vec![0] }));
        assert!(!eval_word(&f, &atoms, &Word { prefix: alloc::vec![p, 0, q], cycle: alloc::vec![0] }));
        assert!(!eval_word(&f, &atoms, &Word { prefix: alloc::vec![], cycle: alloc::vec![p] }));
    }

    #[test]
    fn release_greatest_fixpoint_on_pure_cycle() {
        // q R q over an all-q cycle never discharges but still holds.
        let (f, atoms) = formula("B(alice, p) R B(alice, q)");
        let q = 1 << atoms.iter().position(|a| *a.term() == t("q")).unwrap();
        assert!(eval_word(&f, &atoms, &Word { prefix: alloc::vec![], cycle: alloc::vec![q] }));
        assert!(!eval_word(&f, &atoms, &Word { prefix: alloc::vec![q], cycle: alloc::vec![0] }));
    }

    #[test]
    fn next_wraps_into_the_cycle() {
        let (f, atoms) = formula("X B(alice, p)");
        assert!(eval_word(&f, &atoms, &Word { prefix: alloc::vec![0], cycle: alloc::vec![1] }));
        // Last cycle position's successor is the cycle start.
        let (g, atoms2) = formula("[] <> B(alice, p)");
        assert!(eval_word(&g, &atoms2, &Word { prefix: alloc::vec![], cycle: alloc::vec![0, 1] }));
    }

    #[test]
    fn naive_solver_agrees_on_examples() {
        let base: FactBase = [
            t("role(editor,[editor,fdv,sv])"),
            t("rea(alice,editor)"),
            t("rea(bob,writer)"),
            t("agent(alice)"),
            t("agent(bob)"),
        ]
        .into_iter()
        .collect();
        for q in [
            "rea(A,R)",
            "agent(A), ~(rea(A,writer))",
            "agent(A), agent(B), A\\=B",
            "rea(alice,editor)",
            "rea(carol,R)",
        ] {
            let query = parse_query(q).unwrap();
            assert_eq!(solve(&base, &query), solve_naive(&base, &query), "query {q}");
        }
        let bad = parse_query("~(rea(A,editor))").unwrap();
        assert_eq!(solve(&base, &bad), solve_naive(&base, &bad));
    }

    #[test]
    fn lasso_enumeration_finds_violation() {
        // Two states: 0 (no p) -> 1 (p), 1 -> 1. <>p holds on every run,
        // []p is violated via the lasso staying at 0... which loops? No:
        // give 0 a self-loop so a p-free run exists.
        let succ = alloc::vec![alloc::vec![0usize, 1], alloc::vec![1usize]];
        let vals = alloc::vec![0u64, 1u64];
        let (ev, atoms) = formula("<> B(alice, p)");
        let hit = find_violating_lasso(&succ, &vals, 0, &ev, &atoms, 2).unwrap();
        assert_eq!(hit, (alloc::vec![0], 0)); // 0^ω never reaches p
        let (al, atoms) = formula("[] B(alice, p)");
        assert!(find_violating_lasso(&succ, &vals, 0, &al, &atoms, 2).is_some());
        // On the p-sink alone, []p holds on all lassos from state 1.
        let sink = alloc::vec![alloc::vec![1usize], alloc::vec![1usize]];
        assert!(find_violating_lasso(&sink, &vals, 1, &al, &atoms, 4).is_none());
    }

    #[test]
    fn nnf_agrees_with_surface_semantics_on_samples() {
        use crate::psl::to_nnf;
        let words = [
            Word { prefix: alloc::vec![], cycle: alloc::vec![0] },
            Word { prefix: alloc::vec![1], cycle: alloc::vec![2, 3] },
            Word { prefix: alloc::vec![3, 0], cycle: alloc::vec![1] },
            Word { prefix: alloc::vec![2, 2, 1], cycle: alloc::vec![0, 3] },
        ];
        for text in [
            "~(<> B(alice, p))",
            "~(B(alice, p) U B(alice, q))",
            "~[](B(alice, p) -> <> B(alice, q))",
            "~(X ~(B(alice, q) R B(alice, p)))",
        ] {
            let (f, atoms) = formula(text);
            let nnf = to_nnf(&f);
            for w in &words {
                assert_eq!(
                    eval_word(&f, &atoms, w),
                    eval_word(&nnf, &atoms, w),
                    "{text} on {w:?}"
                );
            }
        }
    }
}
