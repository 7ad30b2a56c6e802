//! The model checker: nested depth-first search for accepting cycles in the
//! product of the interleaving graph with the negated property's Büchi
//! automaton, plus full state-space exploration and checking against an
//! exported state space. Every violation is machine-validated before it is
//! returned.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::buchi::{ltl_to_buchi, BuchiAutomaton};
use crate::logic::Term;
use crate::psl::{eval_atom, ModalAtom, PslEvalError, PslFormula};
use crate::runtime::{
    active_agents, canonical_serialization, fingerprint, is_end_state, mas_step, MasError,
    MasState,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckError {
    /// The state cap was hit before exploration finished.
    ResourceLimit { cap: usize },
    /// Stepping the system failed (a runtime cycle error).
    Step(MasError),
    /// A property atom could not be evaluated.
    Eval(PslEvalError),
    /// Internal consistency failure: a reported violation did not replay.
    /// Never expected; returned instead of panicking.
    InvalidWitness,
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckError::ResourceLimit { cap } => write!(f, "state cap of {cap} exceeded"),
            CheckError::Step(e) => write!(f, "{e}"),
            CheckError::Eval(e) => write!(f, "{e}"),
            CheckError::InvalidWitness => write!(f, "internal error: counterexample replay failed"),
        }
    }
}

impl core::error::Error for CheckError {}

impl From<MasError> for CheckError {
    fn from(e: MasError) -> CheckError {
        CheckError::Step(e)
    }
}

impl From<PslEvalError> for CheckError {
    fn from(e: PslEvalError) -> CheckError {
        CheckError::Eval(e)
    }
}

/// One step of a counterexample: the scheduled agent (None = stutter in an
/// end state) and the organizational action it fired, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CexStep {
    pub agent: Option<String>,
    pub action: Option<Term>,
}

/// A lasso-shaped violating run: applying `steps` from the initial state
/// visits states x0..xn with xn = x(cycle_start); the suffix repeats forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub steps: Vec<CexStep>,
    pub cycle_start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated(Counterexample),
}

impl Verdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, Verdict::Satisfied)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckStats {
    /// Program states discovered in the underlying system.
    pub states_explored: usize,
    /// Product states visited by the nested search.
    pub product_states: usize,
}

/// A system the checker can drive: states are dense ids.
pub trait TransitionSystem {
    fn initial(&mut self) -> Result<usize, CheckError>;

    /// Successors with the agent choice producing each; at most one per
    /// agent. End states stutter: exactly `[(None, self)]`.
    fn successors(&mut self, state: usize) -> Result<Vec<(Option<String>, usize)>, CheckError>;

    /// Valuation bitmask of `atoms` (bit i = atoms[i]) in `state`.
    fn valuation(&mut self, state: usize, atoms: &[ModalAtom]) -> Result<u64, CheckError>;

    /// The action recorded for `agent` in `state` (the step that produced
    /// the state, when `agent` was the one scheduled into it).
    fn state_action(&self, state: usize, agent: &str) -> Option<Term>;

    /// States discovered so far.
    fn num_states(&self) -> usize;
}

fn valuation_of(s: &MasState, atoms: &[ModalAtom]) -> Result<u64, PslEvalError> {
    let mut bits = 0u64;
    for (i, atom) in atoms.iter().enumerate() {
        if eval_atom(s, atom)? {
            bits |= 1 << i;
        }
    }
    Ok(bits)
}

/// The live interleaving graph, built lazily by stepping agents and
/// deduplicating on state fingerprints, capped at `cap` stored states.
pub struct LiveSystem {
    states: Vec<MasState>,
    index: BTreeMap<[u8; 32], usize>,
    succ: Vec<Option<Vec<(Option<String>, usize)>>>,
    cap: usize,
}

impl LiveSystem {
    pub fn new(initial: MasState, cap: usize) -> LiveSystem {
        let mut index = BTreeMap::new();
        index.insert(fingerprint(&initial), 0);
        LiveSystem { states: alloc::vec![initial], index, succ: alloc::vec![None], cap }
    }

    pub fn states(&self) -> &[MasState] {
        &self.states
    }

    fn intern(&mut self, s: MasState) -> Result<usize, CheckError> {
        let fp = fingerprint(&s);
        if let Some(&id) = self.index.get(&fp) {
            return Ok(id);
        }
        if self.states.len() >= self.cap {
            return Err(CheckError::ResourceLimit { cap: self.cap });
        }
        let id = self.states.len();
        self.index.insert(fp, id);
        self.states.push(s);
        self.succ.push(None);
        Ok(id)
    }
}

impl TransitionSystem for LiveSystem {
    fn initial(&mut self) -> Result<usize, CheckError> {
        Ok(0)
    }

    fn successors(&mut self, state: usize) -> Result<Vec<(Option<String>, usize)>, CheckError> {
        if let Some(cached) = &self.succ[state] {
            return Ok(cached.clone());
        }
        let out = if is_end_state(&self.states[state]) {
            alloc::vec![(None, state)]
        } else {
            let agents: Vec<String> =
                active_agents(&self.states[state]).iter().map(|a| a.to_string()).collect();
            let mut out = Vec::new();
            for ag in agents {
                let next = mas_step(&self.states[state], &ag)?;
                let id = self.intern(next)?;
                out.push((Some(ag), id));
            }
            out
        };
        self.succ[state] = Some(out.clone());
        Ok(out)
    }

    fn valuation(&mut self, state: usize, atoms: &[ModalAtom]) -> Result<u64, CheckError> {
        Ok(valuation_of(&self.states[state], atoms)?)
    }

    fn state_action(&self, state: usize, agent: &str) -> Option<Term> {
        self.states[state].agent(agent).and_then(|a| a.last_action.clone())
    }

    fn num_states(&self) -> usize {
        self.states.len()
    }
}

/// One transition of an exported state space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModelEdge {
    pub from: usize,
    /// None marks the end-state self-loop.
    pub agent: Option<String>,
    pub to: usize,
}

/// An explored state space: full states (so atoms stay evaluable), an
/// edge-complete transition list, and explicit end markers. Canonical:
/// states are sorted by their serialization, edges lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateModel {
    pub states: Vec<MasState>,
    pub ends: Vec<bool>,
    pub edges: Vec<ModelEdge>,
    pub initial: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    BadInitial,
    EdgeOutOfRange { index: usize },
    /// The end marker disagrees with the state's own activity flags.
    EndMarkMismatch { state: usize },
    /// An end state must have exactly its stutter self-loop.
    BadEndEdges { state: usize },
    MissingAgentEdge { state: usize, agent: String },
    /// An edge names an agent that is not active in its source state.
    UnknownAgentEdge { state: usize, agent: String },
    DuplicateEdge { state: usize, agent: String },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::BadInitial => write!(f, "initial state id out of range"),
            ModelError::EdgeOutOfRange { index } => write!(f, "edge {index} out of range"),
            ModelError::EndMarkMismatch { state } => {
                write!(f, "state {state}: end marker disagrees with activity flags")
            }
            ModelError::BadEndEdges { state } => {
                write!(f, "end state {state} must carry exactly its self-loop")
            }
            ModelError::MissingAgentEdge { state, agent } => {
                write!(f, "state {state}: no edge for active agent {agent}")
            }
            ModelError::UnknownAgentEdge { state, agent } => {
                write!(f, "state {state}: edge for non-active agent {agent}")
            }
            ModelError::DuplicateEdge { state, agent } => {
                write!(f, "state {state}: duplicate edge for agent {agent}")
            }
        }
    }
}

impl core::error::Error for ModelError {}

/// Structural and semantic validation: ids in range, end markers truthful,
/// and edge-completeness (every active agent of every state has exactly one
/// outgoing edge; end states exactly their self-loop).
pub fn validate_model(m: &StateModel) -> Result<(), ModelError> {
    let n = m.states.len();
    if m.initial >= n {
        return Err(ModelError::BadInitial);
    }
    for (i, e) in m.edges.iter().enumerate() {
        if e.from >= n || e.to >= n {
            return Err(ModelError::EdgeOutOfRange { index: i });
        }
    }
    let mut by_from: Vec<Vec<&ModelEdge>> = alloc::vec![Vec::new(); n];
    for e in &m.edges {
        by_from[e.from].push(e);
    }
    for s in 0..n {
        if m.ends[s] != is_end_state(&m.states[s]) {
            return Err(ModelError::EndMarkMismatch { state: s });
        }
        if m.ends[s] {
            if by_from[s].len() != 1 || by_from[s][0].agent.is_some() || by_from[s][0].to != s {
                return Err(ModelError::BadEndEdges { state: s });
            }
            continue;
        }
        let active: BTreeSet<&str> = active_agents(&m.states[s]).into_iter().collect();
        let mut seen = BTreeSet::new();
        for e in &by_from[s] {
            let Some(ag) = &e.agent else {
                return Err(ModelError::UnknownAgentEdge { state: s, agent: "-".into() });
            };
            if !active.contains(ag.as_str()) {
                return Err(ModelError::UnknownAgentEdge { state: s, agent: ag.clone() });
            }
            if !seen.insert(ag.clone()) {
                return Err(ModelError::DuplicateEdge { state: s, agent: ag.clone() });
            }
        }
        for ag in active {
            if !seen.contains(ag) {
                return Err(ModelError::MissingAgentEdge { state: s, agent: ag.to_string() });
            }
        }
    }
    Ok(())
}

/// Deterministic full exploration: BFS over (state, active agent) branches
/// with fingerprint deduplication, then canonicalization.
pub fn explore_full(initial: &MasState, cap: usize) -> Result<StateModel, CheckError> {
    let mut states = alloc::vec![initial.clone()];
    let mut index = BTreeMap::new();
    index.insert(fingerprint(initial), 0usize);
    let mut edges = Vec::new();
    let mut head = 0;
    while head < states.len() {
        let sid = head;
        head += 1;
        if is_end_state(&states[sid]) {
            edges.push(ModelEdge { from: sid, agent: None, to: sid });
            continue;
        }
        let agents: Vec<String> =
            active_agents(&states[sid]).iter().map(|a| a.to_string()).collect();
        for ag in agents {
            let next = mas_step(&states[sid], &ag)?;
            let fp = fingerprint(&next);
            let tid = match index.get(&fp) {
                Some(&id) => id,
                None => {
                    if states.len() >= cap {
                        return Err(CheckError::ResourceLimit { cap });
                    }
                    let id = states.len();
                    index.insert(fp, id);
                    states.push(next);
                    id
                }
            };
            edges.push(ModelEdge { from: sid, agent: Some(ag), to: tid });
        }
    }
    Ok(canonicalize_model(states, edges, 0))
}

/// Renumber states by their canonical serialization and sort edges, so any
/// exploration order (including sharded ones) yields the identical model.
pub fn canonicalize_model(
    states: Vec<MasState>,
    edges: Vec<ModelEdge>,
    initial: usize,
) -> StateModel {
    let keys: Vec<String> = states.iter().map(canonical_serialization).collect();
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut new_id = alloc::vec![0usize; states.len()];
    for (rank, &old) in order.iter().enumerate() {
        new_id[old] = rank;
    }
    let mut sorted_states: Vec<Option<MasState>> = states.into_iter().map(Some).collect();
    let states: Vec<MasState> =
        order.iter().map(|&old| sorted_states[old].take().expect("moved once")).collect();
    let ends: Vec<bool> = states.iter().map(is_end_state).collect();
    let mut edges: Vec<ModelEdge> = edges
        .into_iter()
        .map(|e| ModelEdge { from: new_id[e.from], agent: e.agent, to: new_id[e.to] })
        .collect();
    edges.sort();
    StateModel { states, ends, edges, initial: new_id[initial] }
}

/// A previously exported state space as a transition system.
pub struct ModelSystem<'a> {
    model: &'a StateModel,
    adj: Vec<Vec<(Option<String>, usize)>>,
}

impl<'a> ModelSystem<'a> {
    /// The model must already be validated.
    pub fn new(model: &'a StateModel) -> ModelSystem<'a> {
        let mut adj: Vec<Vec<(Option<String>, usize)>> =
            alloc::vec![Vec::new(); model.states.len()];
        for e in &model.edges {
            adj[e.from].push((e.agent.clone(), e.to));
        }
        ModelSystem { model, adj }
    }
}

impl TransitionSystem for ModelSystem<'_> {
    fn initial(&mut self) -> Result<usize, CheckError> {
        Ok(self.model.initial)
    }

    fn successors(&mut self, state: usize) -> Result<Vec<(Option<String>, usize)>, CheckError> {
        Ok(self.adj[state].clone())
    }

    fn valuation(&mut self, state: usize, atoms: &[ModalAtom]) -> Result<u64, CheckError> {
        Ok(valuation_of(&self.model.states[state], atoms)?)
    }

    fn state_action(&self, state: usize, agent: &str) -> Option<Term> {
        self.model.states[state].agent(agent).and_then(|a| a.last_action.clone())
    }

    fn num_states(&self) -> usize {
        self.model.states.len()
    }
}

type PNode = (usize, usize); // (system state, automaton state)

struct Frame {
    node: PNode,
    /// The system choice that entered this node; None on the root frame.
    incoming: Option<Option<String>>,
    succs: Vec<(Option<String>, PNode)>,
    idx: usize,
}

struct Search<'a, S: TransitionSystem + ?Sized> {
    system: &'a mut S,
    ba: &'a BuchiAutomaton,
    vals: Vec<Option<u64>>,
}

impl<S: TransitionSystem + ?Sized> Search<'_, S> {
    fn valuation(&mut self, state: usize) -> Result<u64, CheckError> {
        if state >= self.vals.len() {
            self.vals.resize(state + 1, None);
        }
        if let Some(v) = self.vals[state] {
            return Ok(v);
        }
        let v = self.system.valuation(state, &self.ba.atoms)?;
        self.vals[state] = Some(v);
        Ok(v)
    }

    /// Product successors: system branches x automaton edges matching the
    /// current state's valuation.
    fn expand(&mut self, node: PNode) -> Result<Vec<(Option<String>, PNode)>, CheckError> {
        let val = self.valuation(node.0)?;
        let sys_succ = self.system.successors(node.0)?;
        let mut out = Vec::new();
        for (choice, target) in sys_succ {
            for (label, q) in &self.ba.edges[node.1] {
                if label.matches(val) {
                    out.push((choice.clone(), (target, *q)));
                }
            }
        }
        Ok(out)
    }
}

/// Check `phi` on a transition system: translate ¬phi to a Büchi automaton
/// and run a nested DFS for a reachable accepting product cycle.
pub fn check<S: TransitionSystem + ?Sized>(
    system: &mut S,
    phi: &PslFormula,
) -> Result<(Verdict, CheckStats), CheckError> {
    let negated = PslFormula::not(phi.clone());
    let ba = ltl_to_buchi(&negated);
    let mut search = Search { system, ba: &ba, vals: Vec::new() };

    let root: PNode = (search.system.initial()?, ba.initial);
    let mut blue: BTreeSet<PNode> = BTreeSet::new();
    let mut red: BTreeSet<PNode> = BTreeSet::new();
    let mut on_path: BTreeSet<PNode> = BTreeSet::new();
    let mut path: Vec<Frame> = Vec::new();

    blue.insert(root);
    on_path.insert(root);
    let succs = search.expand(root)?;
    path.push(Frame { node: root, incoming: None, succs, idx: 0 });

    while let Some(frame) = path.last_mut() {
        if frame.idx < frame.succs.len() {
            let (choice, w) = frame.succs[frame.idx].clone();
            frame.idx += 1;
            if blue.insert(w) {
                on_path.insert(w);
                let succs = search.expand(w)?;
                path.push(Frame { node: w, incoming: Some(choice), succs, idx: 0 });
            }
            continue;
        }
        // Post-order: from an accepting node, hunt a cycle through it.
        let seed = frame.node;
        if ba.accepting[seed.1] {
            if let Some((hit, red_choices)) =
                red_search(&mut search, seed, &on_path, &mut red)?
            {
                let hit_index =
                    path.iter().position(|f| f.node == hit).ok_or(CheckError::InvalidWitness)?;
                let mut choices: Vec<Option<String>> =
                    path[1..].iter().map(|f| f.incoming.clone().expect("non-root")).collect();
                choices.extend(red_choices);
                let stats = CheckStats {
                    states_explored: search.system.num_states(),
                    product_states: blue.len(),
                };
                let cex = materialize(search.system, &ba, &choices, hit_index)?;
                return Ok((Verdict::Violated(cex), stats));
            }
        }
        on_path.remove(&seed);
        path.pop();
    }

    let stats =
        CheckStats { states_explored: search.system.num_states(), product_states: blue.len() };
    Ok((Verdict::Satisfied, stats))
}

/// Red DFS from an accepting seed: succeeds on reaching the seed itself or
/// any node on the blue DFS path. Returns the hit node and the choices from
/// the seed to the hit (inclusive of the closing step).
fn red_search<S: TransitionSystem + ?Sized>(
    search: &mut Search<'_, S>,
    seed: PNode,
    on_path: &BTreeSet<PNode>,
    red: &mut BTreeSet<PNode>,
) -> Result<Option<(PNode, Vec<Option<String>>)>, CheckError> {
    let succs = search.expand(seed)?;
    let mut stack = alloc::vec![Frame { node: seed, incoming: None, succs, idx: 0 }];
    red.insert(seed);
    while let Some(frame) = stack.last_mut() {
        if frame.idx >= frame.succs.len() {
            stack.pop();
            continue;
        }
        let (choice, w) = frame.succs[frame.idx].clone();
        frame.idx += 1;
        if w == seed || on_path.contains(&w) {
            let mut choices: Vec<Option<String>> =
                stack[1..].iter().map(|f| f.incoming.clone().expect("non-root")).collect();
            choices.push(choice);
            return Ok(Some((w, choices)));
        }
        if red.insert(w) {
            let succs = search.expand(w)?;
            stack.push(Frame { node: w, incoming: Some(choice), succs, idx: 0 });
        }
    }
    Ok(None)
}

/// Replay agent choices through the system, filling in fired actions, and
/// machine-check the witness: the run must close its lasso on the same
/// state and its valuation word must be accepted by the ¬phi automaton.
fn materialize<S: TransitionSystem + ?Sized>(
    system: &mut S,
    ba: &BuchiAutomaton,
    choices: &[Option<String>],
    cycle_start: usize,
) -> Result<Counterexample, CheckError> {
    let mut ids = alloc::vec![system.initial()?];
    let mut steps = Vec::new();
    for choice in choices {
        let cur = *ids.last().expect("non-empty");
        let succs = system.successors(cur)?;
        let Some((_, target)) = succs.iter().find(|(c, _)| c == choice) else {
            return Err(CheckError::InvalidWitness);
        };
        ids.push(*target);
        let action = match choice {
            Some(ag) => system.state_action(*target, ag),
            None => None,
        };
        steps.push(CexStep { agent: choice.clone(), action });
    }
    if cycle_start >= choices.len() || ids[ids.len() - 1] != ids[cycle_start] {
        return Err(CheckError::InvalidWitness);
    }
    let mut word = Vec::new();
    for &id in &ids[..ids.len() - 1] {
        word.push(system.valuation(id, &ba.atoms)?);
    }
    let (prefix, cycle) = word.split_at(cycle_start);
    if !ba.accepts_word(prefix, cycle) {
        return Err(CheckError::InvalidWitness);
    }
    Ok(Counterexample { steps, cycle_start })
}

/// Check a property against the live interleaving graph (mode 1).
pub fn check_on_the_fly(
    initial: &MasState,
    phi: &PslFormula,
    cap: usize,
) -> Result<(Verdict, CheckStats), CheckError> {
    let mut system = LiveSystem::new(initial.clone(), cap);
    check(&mut system, phi)
}

/// Check a property against an exported state space (mode 2). The model
/// must be validated first.
pub fn check_on_model(
    model: &StateModel,
    phi: &PslFormula,
) -> Result<(Verdict, CheckStats), CheckError> {
    let mut system = ModelSystem::new(model);
    check(&mut system, phi)
}
