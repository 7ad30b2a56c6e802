//! LTL-to-Büchi translation via the on-the-fly tableau construction, with
//! counting degeneralization. Atoms are indexed into 64-bit valuation masks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::psl::{to_nnf, ModalAtom, PslFormula};

/// A conjunction of literals over indexed atoms: bit i of `pos` requires
/// atom i true, bit i of `neg` requires it false.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct LiteralSet {
    pub pos: u64,
    pub neg: u64,
}

impl LiteralSet {
    /// No atom is required both true and false.
    pub fn is_consistent(&self) -> bool {
        self.pos & self.neg == 0
    }

    /// Does a valuation bitmask satisfy every literal?
    pub fn matches(&self, valuation: u64) -> bool {
        valuation & self.pos == self.pos && valuation & self.neg == 0
    }
}

/// A (degeneralized) Büchi automaton over modal-atom valuations.
///
/// Transitions are labeled: state `s` moves to `to` on any valuation matching
/// the literal set. A run is accepting iff it visits an accepting state
/// infinitely often. Every state is reachable from `initial`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuchiAutomaton {
    /// Atom for each bit index of the valuation masks, in canonical order.
    pub atoms: Vec<ModalAtom>,
    pub initial: usize,
    /// Adjacency: `edges[s]` lists `(label, target)`.
    pub edges: Vec<Vec<(LiteralSet, usize)>>,
    pub accepting: Vec<bool>,
}

impl BuchiAutomaton {
    pub fn num_states(&self) -> usize {
        self.edges.len()
    }

    /// Membership of the ultimately periodic word `prefix · cycle^ω`, each
    /// letter a valuation bitmask. `cycle` must be non-empty.
    pub fn accepts_word(&self, prefix: &[u64], cycle: &[u64]) -> bool {
        debug_assert!(!cycle.is_empty());
        let total = prefix.len() + cycle.len();
        let letter = |p: usize| {
            if p < prefix.len() {
                prefix[p]
            } else {
                cycle[p - prefix.len()]
            }
        };
        let succ_pos = |p: usize| if p + 1 < total { p + 1 } else { prefix.len() };
        // Product of the automaton with the lasso's position structure.
        let node = |q: usize, p: usize| q * total + p;
        let mut reached = alloc::vec![false; self.num_states() * total];
        let mut queue = alloc::vec![node(self.initial, 0)];
        reached[node(self.initial, 0)] = true;
        let mut order = Vec::new();
        while let Some(v) = queue.pop() {
            order.push(v);
            let (q, p) = (v / total, v % total);
            for (label, to) in &self.edges[q] {
                if label.matches(letter(p)) {
                    let w = node(*to, succ_pos(p));
                    if !reached[w] {
                        reached[w] = true;
                        queue.push(w);
                    }
                }
            }
        }
        // Accepted iff some reachable accepting product node lies on a cycle.
        for &v in &order {
            let (q, p) = (v / total, v % total);
            if !self.accepting[q] || p < prefix.len() {
                continue;
            }
            let mut seen = alloc::vec![false; self.num_states() * total];
            let mut stack = Vec::new();
            for (label, to) in &self.edges[q] {
                if label.matches(letter(p)) {
                    let w = node(*to, succ_pos(p));
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            while let Some(u) = stack.pop() {
                if u == v {
                    return true;
                }
                let (uq, up) = (u / total, u % total);
                for (label, to) in &self.edges[uq] {
                    if label.matches(letter(up)) {
                        let w = node(*to, succ_pos(up));
                        if !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
            }
        }
        false
    }
}

// Interned NNF formulas, so tableau sets are sets of small ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum LForm {
    True,
    False,
    Pos(u8),
    Neg(u8),
    And(u32, u32),
    Or(u32, u32),
    Next(u32),
    Until(u32, u32),
    Release(u32, u32),
}

#[derive(Default)]
struct Arena {
    nodes: Vec<LForm>,
    memo: BTreeMap<LForm, u32>,
}

impl Arena {
    fn intern(&mut self, f: LForm) -> u32 {
        if let Some(&id) = self.memo.get(&f) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(f);
        self.memo.insert(f, id);
        id
    }

    fn from_nnf(&mut self, f: &PslFormula, atoms: &BTreeMap<ModalAtom, u8>) -> u32 {
        let form = match f {
            PslFormula::True => LForm::True,
            PslFormula::False => LForm::False,
            PslFormula::Atom(a) => LForm::Pos(atoms[a]),
            PslFormula::Not(g) => match &**g {
                PslFormula::Atom(a) => LForm::Neg(atoms[a]),
                _ => unreachable!("input not in NNF"),
            },
            PslFormula::And(a, b) => {
                LForm::And(self.from_nnf(a, atoms), self.from_nnf(b, atoms))
            }
            PslFormula::Or(a, b) => LForm::Or(self.from_nnf(a, atoms), self.from_nnf(b, atoms)),
            PslFormula::Next(g) => LForm::Next(self.from_nnf(g, atoms)),
            PslFormula::Until(a, b) => {
                LForm::Until(self.from_nnf(a, atoms), self.from_nnf(b, atoms))
            }
            PslFormula::Release(a, b) => {
                LForm::Release(self.from_nnf(a, atoms), self.from_nnf(b, atoms))
            }
            PslFormula::Eventually(_) | PslFormula::Always(_) => {
                unreachable!("input not in NNF")
            }
        };
        self.intern(form)
    }
}

// One unexpanded tableau node.
#[derive(Debug, Clone)]
struct TNode {
    incoming: BTreeSet<u32>,
    new: BTreeSet<u32>,
    old: BTreeSet<u32>,
    next: BTreeSet<u32>,
}

const INIT: u32 = 0;

/// Translate a property (normalized internally) into a Büchi automaton that
/// accepts exactly the valuation words satisfying it.
///
/// At most 64 distinct modal atoms are supported.
pub fn ltl_to_buchi(phi: &PslFormula) -> BuchiAutomaton {
    let nnf = to_nnf(phi);
    let atoms = nnf.atoms();
    assert!(atoms.len() <= 64, "property uses more than 64 distinct atoms");
    let index: BTreeMap<ModalAtom, u8> =
        atoms.iter().enumerate().map(|(i, a)| (a.clone(), i as u8)).collect();
    let mut arena = Arena::default();
    let root = arena.from_nnf(&nnf, &index);

    // Tableau expansion: process nodes until their `new` set is empty, then
    // intern by (old, next) and queue the time successor.
    let mut done: Vec<(BTreeSet<u32>, BTreeSet<u32>, BTreeSet<u32>)> = Vec::new(); // old, next, incoming
    let mut by_key: BTreeMap<(BTreeSet<u32>, BTreeSet<u32>), usize> = BTreeMap::new();
    let mut pending = alloc::vec![TNode {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([root]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    }];
    while let Some(mut node) = pending.pop() {
        let Some(&eta) = node.new.iter().next() else {
            let key = (node.old.clone(), node.next.clone());
            if let Some(&idx) = by_key.get(&key) {
                done[idx].2.extend(node.incoming);
            } else {
                let idx = done.len();
                // Graph node ids start at 1; INIT = 0 is the synthetic start.
                let id = (idx + 1) as u32;
                by_key.insert(key, idx);
                done.push((node.old, node.next.clone(), node.incoming));
                pending.push(TNode {
                    incoming: BTreeSet::from([id]),
                    new: node.next,
                    old: BTreeSet::new(),
                    next: BTreeSet::new(),
                });
            }
            continue;
        };
        node.new.remove(&eta);
        let add_new = |node: &mut TNode, f: u32| {
            if !node.old.contains(&f) {
                node.new.insert(f);
            }
        };
        match arena.nodes[eta as usize] {
            LForm::False => {} // contradiction: drop the node
            LForm::True => {
                // Recorded in `old` so an until discharged by a trivial
                // right-hand side still satisfies the acceptance check.
                node.old.insert(eta);
                pending.push(node);
            }
            LForm::Pos(a) => {
                let negated = arena.intern(LForm::Neg(a));
                if !node.old.contains(&negated) {
                    node.old.insert(eta);
                    pending.push(node);
                }
            }
            LForm::Neg(a) => {
                let positive = arena.intern(LForm::Pos(a));
                if !node.old.contains(&positive) {
                    node.old.insert(eta);
                    pending.push(node);
                }
            }
            LForm::And(a, b) => {
                node.old.insert(eta);
                add_new(&mut node, a);
                add_new(&mut node, b);
                pending.push(node);
            }
            LForm::Or(a, b) => {
                let mut left = node.clone();
                left.old.insert(eta);
                add_new(&mut left, a);
                let mut right = node;
                right.old.insert(eta);
                add_new(&mut right, b);
                pending.push(right);
                pending.push(left);
            }
            LForm::Next(a) => {
                node.old.insert(eta);
                node.next.insert(a);
                pending.push(node);
            }
            LForm::Until(a, b) => {
                let mut left = node.clone();
                left.old.insert(eta);
                add_new(&mut left, a);
                left.next.insert(eta);
                let mut right = node;
                right.old.insert(eta);
                add_new(&mut right, b);
                pending.push(right);
                pending.push(left);
            }
            LForm::Release(a, b) => {
                let mut left = node.clone();
                left.old.insert(eta);
                add_new(&mut left, b);
                left.next.insert(eta);
                let mut right = node;
                right.old.insert(eta);
                add_new(&mut right, a);
                add_new(&mut right, b);
                pending.push(right);
                pending.push(left);
            }
        }
    }

    // Generalized acceptance: one set per until subformula reachable from
    // the root. F_u = { q | u ∉ old(q) or rhs(u) ∈ old(q) }.
    let untils: Vec<(u32, u32)> = arena
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, f)| match f {
            LForm::Until(_, b) if reachable_from(&arena, root, i as u32) => Some((i as u32, *b)),
            _ => None,
        })
        .collect();
    let k = untils.len();
    let label_of = |old: &BTreeSet<u32>| {
        let mut set = LiteralSet::default();
        for &f in old {
            match arena.nodes[f as usize] {
                LForm::Pos(a) => set.pos |= 1 << a,
                LForm::Neg(a) => set.neg |= 1 << a,
                _ => {}
            }
        }
        set
    };
    let in_fset = |idx: usize, l: usize| {
        let (u, rhs) = untils[l];
        !done[idx].0.contains(&u) || done[idx].0.contains(&rhs)
    };

    // Counting degeneralization over (tableau node, counter), built by BFS so
    // only reachable states are emitted. The synthetic initial is (INIT, 0).
    struct Degen {
        ids: BTreeMap<(u32, usize), usize>,
        edges: Vec<Vec<(LiteralSet, usize)>>,
        accepting: Vec<bool>,
        queue: Vec<(u32, usize)>,
    }
    impl Degen {
        fn intern(&mut self, g: u32, c: usize, k: usize) -> usize {
            if let Some(&id) = self.ids.get(&(g, c)) {
                return id;
            }
            let id = self.edges.len();
            self.ids.insert((g, c), id);
            self.edges.push(Vec::new());
            self.accepting.push(c == k);
            self.queue.push((g, c));
            id
        }
    }
    let mut dg = Degen {
        ids: BTreeMap::new(),
        edges: Vec::new(),
        accepting: Vec::new(),
        queue: Vec::new(),
    };
    let initial = dg.intern(INIT, 0, k);
    let mut head = 0;
    while head < dg.queue.len() {
        let (g, c) = dg.queue[head];
        head += 1;
        let from = dg.ids[&(g, c)];
        for (idx, (old, _, incoming)) in done.iter().enumerate() {
            if !incoming.contains(&g) {
                continue;
            }
            let base = if c == k { 0 } else { c };
            let mut advanced = base;
            while advanced < k && in_fset(idx, advanced) {
                advanced += 1;
            }
            let to = dg.intern((idx + 1) as u32, advanced, k);
            let label = label_of(old);
            dg.edges[from].push((label, to));
        }
    }
    let Degen { edges, accepting, .. } = dg;

    BuchiAutomaton { atoms, initial, edges, accepting }
}

// Is formula `target` a subformula of `root` in the arena?
fn reachable_from(arena: &Arena, root: u32, target: u32) -> bool {
    let mut stack = alloc::vec![root];
    let mut seen = BTreeSet::new();
    while let Some(f) = stack.pop() {
        if f == target {
            return true;
        }
        if !seen.insert(f) {
            continue;
        }
        match arena.nodes[f as usize] {
            LForm::And(a, b) | LForm::Or(a, b) | LForm::Until(a, b) | LForm::Release(a, b) => {
                stack.push(a);
                stack.push(b);
            }
            LForm::Next(a) => stack.push(a),
            _ => {}
        }
    }
    false
}
