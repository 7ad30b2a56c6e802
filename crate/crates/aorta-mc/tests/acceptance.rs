//! Acceptance gate: one test per criterion, each ending in an explicit PASS
//! line. Every oracle here is independent of the implementation it checks.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aorta_mc::commands::run_to_end;
use aorta_mc::config::{load_config, LoadedConfig};
use aorta_mc::model_file::write_model;
use aorta_mc::parallel::explore_parallel;
use aorta_mc::Splitmix64;

use aorta_mc_core::aorta::{check_obligations, parse_aorta_program, MentalState, OrgSpec};
use aorta_mc_core::apl::parse_apl;
use aorta_mc_core::buchi::{ltl_to_buchi, BuchiAutomaton};
use aorta_mc_core::checker::{
    check, check_on_model, check_on_the_fly, explore_full, CheckError, Counterexample,
    StateModel, TransitionSystem, Verdict,
};
use aorta_mc_core::logic::{parse_term, FactBase, Term};
use aorta_mc_core::psl::{eval_atom, ModalAtom, PslFormula};
use aorta_mc_core::reference::{eval_word, find_violating_lasso, Word};
use aorta_mc_core::runtime::{fingerprint, initial_state, is_end_state, mas_step, MasState};

const GWEN: &str = include_str!("../../../fixtures/writing-paper/agents.gwen");
const RULES: &str = include_str!("../../../fixtures/writing-paper/org.aorta");

const CAP: usize = 100_000;

fn fixture_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/writing-paper/mas.json")
}

fn fixture() -> (LoadedConfig, MasState) {
    let cfg = load_config(&fixture_config_path()).expect("fixture config loads");
    let initial = initial_state(&cfg.spec).expect("fixture initializes");
    (cfg, initial)
}

fn t(s: &str) -> Term {
    parse_term(s).unwrap()
}

/// Independent counterexample validation: replay the agent choices with
/// `mas_step`, require the lasso to close on a fingerprint-equal state, and
/// require the brute-force word evaluator to reject the property on the
/// replayed valuation word. No checker or Büchi code involved.
fn validate_cex_on_live_system(initial: &MasState, phi: &PslFormula, cex: &Counterexample) {
    let mut states = vec![initial.clone()];
    for step in &cex.steps {
        let current = states.last().unwrap();
        match &step.agent {
            Some(agent) => states.push(mas_step(current, agent).expect("replay step")),
            None => {
                assert!(is_end_state(current), "stutter step outside an end state");
                states.push(current.clone());
            }
        }
    }
    assert!(cex.cycle_start < cex.steps.len(), "cycle start out of range");
    assert_eq!(
        fingerprint(states.last().unwrap()),
        fingerprint(&states[cex.cycle_start]),
        "lasso does not close"
    );

    let atoms = phi.atoms();
    let letters: Vec<u64> = states[..states.len() - 1]
        .iter()
        .map(|s| {
            let mut bits = 0;
            for (i, a) in atoms.iter().enumerate() {
                if eval_atom(s, a).expect("atom evaluates") {
                    bits |= 1 << i;
                }
            }
            bits
        })
        .collect();
    let word = Word {
        prefix: letters[..cex.cycle_start].to_vec(),
        cycle: letters[cex.cycle_start..].to_vec(),
    };
    assert!(!eval_word(phi, &atoms, &word), "replayed run does not violate the property");
}

#[test]
fn criterion_1_table_verdicts() {
    let start = Instant::now();
    let (cfg, initial) = fixture();
    assert_eq!(cfg.properties.len(), 12, "fixture declares twelve properties");

    for prop in &cfg.properties {
        let (verdict, _) =
            check_on_the_fly(&initial, &prop.formula, CAP).expect("check completes");
        if prop.name.starts_with("p03") {
            assert!(prop.expect_fail, "p03 is the expected-failure property");
            let Verdict::Violated(cex) = &verdict else {
                panic!("{} must be Violated", prop.name);
            };
            validate_cex_on_live_system(&initial, &prop.formula, cex);
        } else {
            assert!(!prop.expect_fail);
            assert_eq!(verdict, Verdict::Satisfied, "{} must be Satisfied", prop.name);
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "verdict reproduction took {elapsed:?}");
    println!(
        "criterion 1 (Table 1 verdict reproduction, {} properties in {elapsed:?}): PASS",
        cfg.properties.len()
    );
}

#[test]
fn criterion_2_mode_equivalence() {
    let (cfg, initial) = fixture();
    let model = explore_full(&initial, CAP).expect("exploration completes");

    let end_count = model.ends.iter().filter(|&&e| e).count();
    assert_eq!(end_count, 1, "fixture has exactly one end state");

    for prop in &cfg.properties {
        let (live, _) = check_on_the_fly(&initial, &prop.formula, CAP).unwrap();
        let (on_model, _) = check_on_model(&model, &prop.formula).unwrap();
        assert_eq!(
            live.is_satisfied(),
            on_model.is_satisfied(),
            "modes disagree on {}",
            prop.name
        );
    }
    println!("criterion 2 (mode equivalence on all 12 properties, one end state): PASS");
}

fn bel(term: &str) -> PslFormula {
    PslFormula::Atom(ModalAtom::Bel("a".into(), t(term)))
}

fn two_atoms() -> Vec<ModalAtom> {
    vec![ModalAtom::Bel("a".into(), t("p")), ModalAtom::Bel("a".into(), t("q"))]
}

/// Letters are masks over `atoms`; the automaton may use fewer atoms in a
/// different canonical order, so remap each letter before membership tests.
fn remap_letters(ba: &BuchiAutomaton, atoms: &[ModalAtom], letters: &[u64]) -> Vec<u64> {
    letters
        .iter()
        .map(|mask| {
            let mut out = 0;
            for (i, a) in ba.atoms.iter().enumerate() {
                let src = atoms.iter().position(|x| x == a).expect("known atom");
                if mask & (1 << src) != 0 {
                    out |= 1 << i;
                }
            }
            out
        })
        .collect()
}

/// Random formula in negation normal form: negation only on atoms.
fn random_nnf(rng: &mut Splitmix64, depth: u32) -> PslFormula {
    let leaf = |rng: &mut Splitmix64| match rng.next() % 6 {
        0 => PslFormula::True,
        1 => PslFormula::False,
        2 => bel("p"),
        3 => bel("q"),
        4 => PslFormula::not(bel("p")),
        _ => PslFormula::not(bel("q")),
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.next() % 9 {
        0 | 1 => leaf(rng),
        2 => PslFormula::and(random_nnf(rng, depth - 1), random_nnf(rng, depth - 1)),
        3 => PslFormula::or(random_nnf(rng, depth - 1), random_nnf(rng, depth - 1)),
        4 => PslFormula::next(random_nnf(rng, depth - 1)),
        5 => PslFormula::until(random_nnf(rng, depth - 1), random_nnf(rng, depth - 1)),
        6 => PslFormula::release(random_nnf(rng, depth - 1), random_nnf(rng, depth - 1)),
        7 => PslFormula::eventually(random_nnf(rng, depth - 1)),
        _ => PslFormula::always(random_nnf(rng, depth - 1)),
    }
}

#[test]
fn criterion_3_buchi_oracle() {
    let atoms = two_atoms();
    let mut formulas = vec![
        PslFormula::eventually(bel("p")),
        PslFormula::always(bel("p")),
        PslFormula::until(bel("p"), bel("q")),
        PslFormula::release(bel("p"), bel("q")),
    ];
    let mut rng = Splitmix64::new(0xB00C_51);
    for _ in 0..100 {
        formulas.push(random_nnf(&mut rng, 3));
    }

    let mut words_checked = 0usize;
    for phi in &formulas {
        let ba = ltl_to_buchi(phi);
        // Every ultimately periodic word with prefix+period <= 6 over 2 atoms.
        for total in 1..=6usize {
            for combo in 0..4u64.pow(total as u32) {
                let letters: Vec<u64> = (0..total).map(|i| (combo >> (2 * i)) & 3).collect();
                let remapped = remap_letters(&ba, &atoms, &letters);
                for cycle_start in 0..total {
                    let expected = eval_word(
                        phi,
                        &atoms,
                        &Word {
                            prefix: letters[..cycle_start].to_vec(),
                            cycle: letters[cycle_start..].to_vec(),
                        },
                    );
                    let got =
                        ba.accepts_word(&remapped[..cycle_start], &remapped[cycle_start..]);
                    assert_eq!(got, expected, "disagreement on {phi} over {letters:?}@{cycle_start}");
                    words_checked += 1;
                }
            }
        }
    }
    println!(
        "criterion 3 (Büchi oracle, {} formulas x {} word checks, 0 disagreements): PASS",
        formulas.len(),
        words_checked
    );
}

/// A bare Kripke structure as a transition system: edge i out of a state is
/// the synthetic choice "c<i>", so counterexample replay stays well-defined.
struct Kripke {
    succ: Vec<Vec<usize>>,
    vals: Vec<u64>,
    atoms: Vec<ModalAtom>,
}

impl TransitionSystem for Kripke {
    fn initial(&mut self) -> Result<usize, CheckError> {
        Ok(0)
    }

    fn successors(&mut self, state: usize) -> Result<Vec<(Option<String>, usize)>, CheckError> {
        Ok(self.succ[state]
            .iter()
            .enumerate()
            .map(|(i, &to)| (Some(format!("c{i}")), to))
            .collect())
    }

    fn valuation(&mut self, state: usize, atoms: &[ModalAtom]) -> Result<u64, CheckError> {
        let mut out = 0;
        for (i, a) in atoms.iter().enumerate() {
            let src = self.atoms.iter().position(|x| x == a).expect("known atom");
            if self.vals[state] & (1 << src) != 0 {
                out |= 1 << i;
            }
        }
        Ok(out)
    }

    fn state_action(&self, _state: usize, _agent: &str) -> Option<Term> {
        None
    }

    fn num_states(&self) -> usize {
        self.succ.len()
    }
}

/// Replay a Kripke counterexample by its choice labels and reject the
/// property on the resulting word — independent of the search that found it.
fn validate_cex_on_kripke(k: &Kripke, phi: &PslFormula, cex: &Counterexample) {
    let mut ids = vec![0usize];
    for step in &cex.steps {
        let agent = step.agent.as_deref().expect("kripke choices are labeled");
        let index: usize = agent.strip_prefix('c').unwrap().parse().unwrap();
        ids.push(k.succ[*ids.last().unwrap()][index]);
    }
    assert_eq!(ids[ids.len() - 1], ids[cex.cycle_start], "lasso does not close");
    let letters: Vec<u64> = ids[..ids.len() - 1].iter().map(|&s| k.vals[s]).collect();
    let word = Word {
        prefix: letters[..cex.cycle_start].to_vec(),
        cycle: letters[cex.cycle_start..].to_vec(),
    };
    assert!(!eval_word(phi, &k.atoms, &word), "replayed run does not violate the property");
}

#[test]
fn criterion_4_checker_oracle() {
    let atoms = two_atoms();
    let mut rng = Splitmix64::new(0xC4EC_CE2);
    for case in 0..200 {
        let n = 1 + (rng.next() % 6) as usize;
        let vals: Vec<u64> = (0..n).map(|_| rng.next() % 4).collect();
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let degree = 1 + (rng.next() % 3) as usize;
                (0..degree).map(|_| (rng.next() % n as u64) as usize).collect()
            })
            .collect();
        let phi = random_nnf(&mut rng, 3);

        let mut kripke = Kripke { succ: succ.clone(), vals: vals.clone(), atoms: atoms.clone() };
        let (verdict, _) = check(&mut kripke, &phi).expect("ndfs completes");
        let oracle = find_violating_lasso(&succ, &vals, 0, &phi, &atoms, n);

        assert_eq!(
            verdict.is_satisfied(),
            oracle.is_none(),
            "case {case}: ndfs and lasso enumeration disagree on {phi} over {n} states"
        );
        if let Verdict::Violated(cex) = &verdict {
            validate_cex_on_kripke(&kripke, &phi, cex);
        }
    }
    println!("criterion 4 (checker oracle, 200 random models, 0 disagreements): PASS");
}

#[test]
fn criterion_5_obligation_lifecycle() {
    let (_, initial) = fixture();
    let model = explore_full(&initial, CAP).expect("exploration completes");

    let mut obligations_seen = 0usize;
    for (sid, state) in model.states.iter().enumerate() {
        for agent in &state.agents {
            let org = &agent.aorta.state.org;
            let mut obls: BTreeSet<(Term, Term, Term)> = BTreeSet::new();
            let mut viols: BTreeSet<(Term, Term, Term)> = BTreeSet::new();
            for fact in org.iter() {
                match fact.functor() {
                    Some(("obl", 4)) => {
                        let Term::Compound(_, args) = fact else { unreachable!() };
                        obls.insert((args[0].clone(), args[1].clone(), args[2].clone()));
                    }
                    Some(("viol", 3)) => {
                        let Term::Compound(_, args) = fact else { unreachable!() };
                        viols.insert((args[0].clone(), args[1].clone(), args[2].clone()));
                    }
                    _ => {}
                }
            }
            assert!(
                viols.is_empty(),
                "state {sid}: agent {} records a violation {viols:?}",
                agent.aorta.name
            );
            assert!(
                obls.intersection(&viols).next().is_none(),
                "state {sid}: obl and viol coexist for one obligation"
            );
            for (who, role, _) in &obls {
                obligations_seen += 1;
                let rea = Term::Compound("rea".into(), vec![who.clone(), role.clone()]);
                assert!(
                    org.contains(&rea),
                    "state {sid}: obligation without enactment {rea}"
                );
            }
        }
    }
    assert!(obligations_seen > 0, "the fixture must exercise obligations");
    println!(
        "criterion 5 (obligation lifecycle over {} states, {obligations_seen} obligation records): PASS",
        model.states.len()
    );
}

#[test]
fn criterion_6_determinism() {
    let (cfg, initial) = fixture();

    let first = explore_full(&initial, CAP).unwrap();
    let second = explore_full(&initial, CAP).unwrap();
    assert_eq!(first, second, "two explorations differ");

    let dir = std::env::temp_dir().join(format!("aorta-mc-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let write = |name: &str, model: &StateModel| -> Vec<u8> {
        let path = dir.join(name);
        write_model(&path, model).unwrap();
        std::fs::read(&path).unwrap()
    };
    let bytes_a = write("a.json", &first);
    let bytes_b = write("b.json", &second);
    assert_eq!(bytes_a, bytes_b, "model files not byte-identical");

    let one = explore_parallel(&initial, CAP, 1).unwrap();
    let four = explore_parallel(&initial, CAP, 4).unwrap();
    assert_eq!(write("w1.json", &one), write("w4.json", &four), "worker count changed the file");

    for prop in &cfg.properties {
        let (v1, _) = check_on_model(&one, &prop.formula).unwrap();
        let (v4, _) = check_on_model(&four, &prop.formula).unwrap();
        assert_eq!(v1, v4, "worker count changed the verdict of {}", prop.name);
    }
    std::fs::remove_dir_all(&dir).ok();
    println!("criterion 6 (byte-identical models, worker-independent verdicts): PASS");
}

#[test]
fn criterion_7_aorta_unit_semantics() {
    // Verbatim parses of the two agent programs and the five reasoning rules.
    let programs = parse_apl(GWEN).expect("agent programs parse");
    assert_eq!(programs.len(), 2);
    assert_eq!(programs[0].name, "alice");
    assert_eq!(programs[0].initial_goals, vec![t("editor")]);
    assert_eq!(programs[0].plans.len(), 7);
    assert_eq!(programs[1].name, "bob");
    assert_eq!(programs[1].initial_goals, vec![t("writer")]);
    assert_eq!(programs[1].plans.len(), 3);
    let rules = parse_aorta_program(RULES).expect("reasoning rules parse");
    assert_eq!(rules.len(), 5);

    // The three obligation lifecycle transitions, each from a hand-built
    // mental state.
    let agent = |beliefs: &[&str], org: &[&str]| {
        let state = MentalState {
            beliefs: beliefs.iter().map(|s| t(s)).collect(),
            goals: std::iter::empty::<Term>().collect(),
            org: OrgSpec::from_facts(org.iter().map(|s| t(s))).unwrap(),
            options: FactBase::new(),
        };
        aorta_mc_core::aorta::AortaAgent::new(
            "alice",
            state,
            std::sync::Arc::new(Vec::new()),
        )
    };

    let mut activating = agent(
        &["me(alice)"],
        &["cond(editor,bel(wabs),bel(fdv),true)", "rea(alice,editor)"],
    );
    check_obligations(&mut activating);
    assert!(activating.state.org.contains(&t("obl(alice,editor,bel(wabs),bel(fdv))")));

    let mut satisfying = agent(&["wabs"], &["obl(alice,editor,bel(wabs),bel(fdv))"]);
    check_obligations(&mut satisfying);
    assert!(!satisfying.state.org.iter().any(|f| f.functor() == Some(("obl", 4))));
    assert!(!satisfying.state.org.iter().any(|f| f.functor() == Some(("viol", 3))));

    let mut violating = agent(&["fdv"], &["obl(alice,editor,bel(wabs),bel(fdv))"]);
    check_obligations(&mut violating);
    assert!(!violating.state.org.iter().any(|f| f.functor() == Some(("obl", 4))));
    assert!(violating.state.org.contains(&t("viol(alice,editor,bel(wabs))")));

    // Each of the five rules fires during the seed-0 fixture run: enactment,
    // obligation commitment, enactment broadcast, delegation, information.
    let (_, initial) = fixture();
    let mut fired: Vec<Term> = Vec::new();
    let mut state = initial;
    let mut rng = Splitmix64::new(0);
    while !is_end_state(&state) {
        let actives = aorta_mc_core::runtime::active_agents(&state);
        let chosen = actives[(rng.next() % actives.len() as u64) as usize].to_string();
        let (next, trace) =
            aorta_mc_core::runtime::mas_step_traced(&state, &chosen).unwrap();
        fired.extend(trace.fired);
        state = next;
    }
    let says = |pred: &dyn Fn(&Term) -> bool| fired.iter().any(|f| pred(f));
    assert!(fired.contains(&t("enact(editor)")), "rule 1 enactment");
    assert!(fired.contains(&t("enact(writer)")), "rule 1 enactment (writer)");
    assert!(says(&|f| f.functor() == Some(("commit", 1))), "rule 2 obligation commitment");
    assert!(
        says(&|f| matches!(f, Term::Compound(n, args) if n == "send"
            && args[1].functor() == Some(("org", 1)))),
        "rule 3 enactment broadcast"
    );
    assert!(
        says(&|f| matches!(f, Term::Compound(n, args) if n == "send"
            && args[1].functor() == Some(("goal", 1)))),
        "rule 4 delegation"
    );
    assert!(
        says(&|f| matches!(f, Term::Compound(n, args) if n == "send"
            && args[1].functor() == Some(("bel", 1)))),
        "rule 5 information"
    );

    // The run lands in the end state the whole suite revolves around.
    let (end, _) = run_to_end(&fixture().1, 0, CAP).unwrap();
    assert!(end.agent("alice").unwrap().aorta.state.beliefs.contains(&t("sv")));

    println!("criterion 7 (obligation lifecycle examples + five reasoning rules + verbatim listings): PASS");
}
