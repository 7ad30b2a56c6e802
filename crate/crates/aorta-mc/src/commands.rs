//! The four commands behind the CLI: run one seeded interleaving, check
//! properties on the fly, export the full state space, and check properties
//! against an exported model.

use std::path::{Path, PathBuf};
use std::time::Instant;

use aorta_mc_core::checker::{
    check_on_model, check_on_the_fly, CheckStats, Counterexample, Verdict,
};
use aorta_mc_core::runtime::{
    active_agents, initial_state, is_end_state, mas_step_traced, MasState,
};

use crate::config::{load_config, LoadedConfig};
use crate::model_file::{read_model, write_model};
use crate::parallel::explore_parallel;
use crate::props::PropEntry;
use crate::report::{
    counterexample_json, emit, print_line, safe_file_stem, ExploreReport, PropertyReport,
};
use crate::{CliError, Splitmix64};

/// Options shared by every command; each command reads the subset it uses.
pub struct CommonOpts {
    pub config: PathBuf,
    pub seed: u64,
    pub state_cap: usize,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

/// Execute one seeded interleaving to an end state, printing each
/// macro-step and a final belief dump per agent.
pub fn cmd_run(opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = load_config(&opts.config)?;
    let mut state = initial_state(&cfg.spec).map_err(CliError::Init)?;
    let mut rng = Splitmix64::new(opts.seed);
    let mut steps = 0usize;
    while !is_end_state(&state) {
        // States visited so far = steps + 1; one more step must fit the cap.
        if steps + 1 >= opts.state_cap {
            return Err(CliError::ResourceLimit { cap: opts.state_cap });
        }
        let actives = active_agents(&state);
        let chosen = actives[(rng.next() % actives.len() as u64) as usize].to_string();
        let (next, trace) = mas_step_traced(&state, &chosen).map_err(CliError::Step)?;
        steps += 1;
        let action = match &trace.fired {
            Some(t) => t.to_string(),
            None => "none".into(),
        };
        let delivered: Vec<String> = trace
            .delivered
            .iter()
            .map(|m| format!("{}<-{}", m.recipient, m.content))
            .collect();
        print_line(&format!(
            "step {steps}: {chosen} | action={action} | delivered=[{}]",
            delivered.join(", ")
        ));
        state = next;
    }
    print_line(&format!("end state after {steps} steps"));
    for agent in &state.agents {
        let beliefs: Vec<String> =
            agent.aorta.state.beliefs.iter().map(|t| t.to_string()).collect();
        print_line(&format!("  {} believes: {}", agent.aorta.name, beliefs.join(", ")));
    }
    Ok(0)
}

/// Shared property loop: run `check` per property, emit one report line
/// each, write counterexamples, and fold the exit code.
fn check_properties<F>(
    properties: &[PropEntry],
    cex_dir: &Path,
    mut check: F,
) -> Result<i32, CliError>
where
    F: FnMut(&PropEntry) -> Result<(Verdict, CheckStats), CliError>,
{
    let mut all_as_expected = true;
    for prop in properties {
        let start = Instant::now();
        let (verdict, stats) = check(prop)?;
        let wall_ms = start.elapsed().as_millis();
        let mut cex_path = None;
        if let Verdict::Violated(cex) = &verdict {
            let path = write_counterexample(cex_dir, &prop.name, cex)?;
            cex_path = Some(path.display().to_string());
        }
        let as_expected = prop.expect_fail != verdict.is_satisfied();
        all_as_expected &= as_expected;
        emit(&PropertyReport {
            property: prop.name.clone(),
            expect_fail: prop.expect_fail,
            verdict: match &verdict {
                Verdict::Satisfied => "Satisfied".into(),
                Verdict::Violated(_) => "Violated".into(),
            },
            as_expected,
            states_explored: stats.states_explored,
            product_states: stats.product_states,
            wall_ms,
            counterexample: cex_path,
        });
    }
    Ok(if all_as_expected { 0 } else { 1 })
}

fn write_counterexample(
    dir: &Path,
    property: &str,
    cex: &Counterexample,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|err| CliError::Io { path: dir.to_path_buf(), err })?;
    let path = dir.join(format!("{}.cex.json", safe_file_stem(property)));
    std::fs::write(&path, counterexample_json(property, cex))
        .map_err(|err| CliError::Io { path: path.clone(), err })?;
    Ok(path)
}

/// Check every configured property on the fly against the live system.
pub fn cmd_check(opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = load_config(&opts.config)?;
    let initial = initial_state(&cfg.spec).map_err(CliError::Init)?;
    let cex_dir = opts.out.clone().unwrap_or_else(|| cfg.dir.clone());
    check_properties(&cfg.properties, &cex_dir, |prop| {
        check_on_the_fly(&initial, &prop.formula, opts.state_cap).map_err(CliError::from_check)
    })
}

/// Explore the full state space and write the model file.
pub fn cmd_explore(opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = load_config(&opts.config)?;
    let initial = initial_state(&cfg.spec).map_err(CliError::Init)?;
    let start = Instant::now();
    let model =
        explore_parallel(&initial, opts.state_cap, opts.workers).map_err(CliError::from_check)?;
    let path = model_path(opts, &cfg);
    write_model(&path, &model)?;
    emit(&ExploreReport {
        model: path.display().to_string(),
        states: model.states.len(),
        edges: model.edges.len(),
        end_states: model.ends.iter().filter(|&&e| e).count(),
        wall_ms: start.elapsed().as_millis(),
    });
    Ok(0)
}

/// Check every configured property against an exported model file.
pub fn cmd_check_model(opts: &CommonOpts) -> Result<i32, CliError> {
    let cfg = load_config(&opts.config)?;
    let path = model_path(opts, &cfg);
    let model = read_model(&path, &cfg.spec)?;
    check_properties(&cfg.properties, &cfg.dir, |prop| {
        check_on_model(&model, &prop.formula).map_err(CliError::from_check)
    })
}

/// `--out` overrides the configured model path (written by explore, read by
/// check-model).
fn model_path(opts: &CommonOpts, cfg: &LoadedConfig) -> PathBuf {
    opts.out.clone().unwrap_or_else(|| cfg.model_path.clone())
}

/// End states reached by `run` satisfy the same activity predicate the
/// checker uses; exposed for tests.
pub fn run_to_end(
    initial: &MasState,
    seed: u64,
    cap: usize,
) -> Result<(MasState, usize), CliError> {
    let mut state = initial.clone();
    let mut rng = Splitmix64::new(seed);
    let mut steps = 0usize;
    while !is_end_state(&state) {
        if steps + 1 >= cap {
            return Err(CliError::ResourceLimit { cap });
        }
        let actives = active_agents(&state);
        let chosen = actives[(rng.next() % actives.len() as u64) as usize].to_string();
        state = mas_step_traced(&state, &chosen).map_err(CliError::Step)?.0;
        steps += 1;
    }
    Ok((state, steps))
}
