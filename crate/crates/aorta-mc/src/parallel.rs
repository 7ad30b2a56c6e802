//! Multi-worker exploration: layer-synchronous BFS with the frontier
//! sharded across scoped threads. Successor computation (stepping and
//! fingerprinting) runs in parallel; deduplication and edge recording merge
//! sequentially in frontier order, and the final canonicalization makes the
//! result independent of worker count by construction.

use std::collections::BTreeMap;

use aorta_mc_core::checker::{canonicalize_model, explore_full, CheckError, ModelEdge, StateModel};
use aorta_mc_core::runtime::{active_agents, fingerprint, is_end_state, mas_step, MasState};

/// One expansion result: source id, acting agent (None = end-state
/// self-loop), and the successor with its fingerprint (None for self-loops).
type Expansion = (usize, Option<String>, Option<([u8; 32], MasState)>);

pub fn explore_parallel(
    initial: &MasState,
    cap: usize,
    workers: usize,
) -> Result<StateModel, CheckError> {
    if workers <= 1 {
        return explore_full(initial, cap);
    }
    if cap == 0 {
        return Err(CheckError::ResourceLimit { cap });
    }

    let mut states = vec![initial.clone()];
    let mut index: BTreeMap<[u8; 32], usize> = BTreeMap::new();
    index.insert(fingerprint(initial), 0);
    let mut edges: Vec<ModelEdge> = Vec::new();
    let mut frontier: Vec<usize> = vec![0];

    while !frontier.is_empty() {
        let chunk = frontier.len().div_ceil(workers);
        let states_ref = &states;
        let results: Vec<Result<Vec<Expansion>, CheckError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = frontier
                .chunks(chunk)
                .map(|shard| {
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        for &sid in shard {
                            let state = &states_ref[sid];
                            if is_end_state(state) {
                                out.push((sid, None, None));
                                continue;
                            }
                            for agent in active_agents(state) {
                                let next = mas_step(state, agent)?;
                                out.push((
                                    sid,
                                    Some(agent.to_string()),
                                    Some((fingerprint(&next), next)),
                                ));
                            }
                        }
                        Ok(out)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });

        let mut next_frontier = Vec::new();
        for shard in results {
            for (from, agent, successor) in shard? {
                let Some((fp, state)) = successor else {
                    edges.push(ModelEdge { from, agent: None, to: from });
                    continue;
                };
                let to = match index.get(&fp) {
                    Some(&id) => id,
                    None => {
                        if states.len() >= cap {
                            return Err(CheckError::ResourceLimit { cap });
                        }
                        let id = states.len();
                        index.insert(fp, id);
                        states.push(state);
                        next_frontier.push(id);
                        id
                    }
                };
                edges.push(ModelEdge { from, agent, to });
            }
        }
        frontier = next_frontier;
    }

    Ok(canonicalize_model(states, edges, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_config;
    use aorta_mc_core::runtime::initial_state;
    use std::path::Path;

    fn fixture_initial() -> MasState {
        let config = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures/writing-paper/mas.json");
        let cfg = load_config(&config).unwrap();
        initial_state(&cfg.spec).unwrap()
    }

    #[test]
    fn worker_count_does_not_change_the_model() {
        let initial = fixture_initial();
        let one = explore_parallel(&initial, 100_000, 1).unwrap();
        let four = explore_parallel(&initial, 100_000, 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, explore_full(&initial, 100_000).unwrap());
    }

    #[test]
    fn parallel_exploration_respects_the_cap() {
        assert_eq!(
            explore_parallel(&fixture_initial(), 2, 4),
            Err(CheckError::ResourceLimit { cap: 2 })
        );
    }
}
