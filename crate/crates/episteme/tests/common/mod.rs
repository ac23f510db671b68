//! Shared generators and independent oracles for the integration suites.
//!
//! Everything here deliberately avoids the library's own fixed-point
//! machinery: subset spaces are enumerated directly, and the common-belief
//! oracle works by brute-force subset enumeration, so agreement with the
//! library is evidence rather than tautology.

use std::collections::BTreeSet;

use rand::Rng;
use serde_json::json;

use episteme::epistemics::believe;
use episteme::hierarchy::validate_nonredundant;
use episteme::model::{
    load_model, AgentId, AmbientStructure, Event, LoadedModel, State, StateSpace,
};

/// All nonempty per-agent type subsets of the ambient, as spaces, in mask
/// order. Two types per agent gives 9 spaces; four gives 225.
pub fn subset_spaces(ambient: &AmbientStructure) -> Vec<StateSpace> {
    let per_agent: Vec<Vec<BTreeSet<_>>> = ambient
        .agent_ids()
        .map(|a| {
            let ts = ambient.types_of(a);
            (1u32..(1 << ts.len()))
                .map(|mask| {
                    ts.iter()
                        .enumerate()
                        .filter(|(k, _)| mask >> k & 1 == 1)
                        .map(|(_, t)| *t)
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut products: Vec<Vec<BTreeSet<_>>> = vec![Vec::new()];
    for sets in &per_agent {
        products = products
            .into_iter()
            .flat_map(|prefix| {
                sets.iter().map(move |s| {
                    let mut next = prefix.clone();
                    next.push(s.clone());
                    next
                })
            })
            .collect();
    }
    products
        .into_iter()
        .map(|sets| StateSpace::new(ambient, sets).expect("components are nonempty"))
        .collect()
}

/// A random small model: 2–3 agents, 1–3 nature states, 1–3 types per
/// agent, supports of size 1–2 with simple fractional masses. Redundant
/// draws (two types with identical hierarchies) are rejected and redrawn,
/// so hierarchy comparison and belief closure are equivalent on the result.
pub fn random_model(rng: &mut impl Rng) -> LoadedModel {
    loop {
        let num_agents = rng.gen_range(2..=3usize);
        let num_thetas = rng.gen_range(1..=3usize);
        let agents: Vec<String> = (0..num_agents).map(|i| format!("a{i}")).collect();
        let thetas: Vec<String> = (0..num_thetas).map(|k| format!("th{k}")).collect();
        let type_counts: Vec<usize> = (0..num_agents).map(|_| rng.gen_range(1..=3)).collect();
        let type_names: Vec<Vec<String>> = (0..num_agents)
            .map(|i| (0..type_counts[i]).map(|t| format!("a{i}_t{t}")).collect())
            .collect();

        let mut beliefs = serde_json::Map::new();
        for i in 0..num_agents {
            let co_agents: Vec<usize> = (0..num_agents).filter(|j| *j != i).collect();
            let combos: usize = num_thetas * co_agents.iter().map(|j| type_counts[*j]).product::<usize>();
            for t in 0..type_counts[i] {
                let support = rng.gen_range(1..=2usize.min(combos));
                let mut picked = BTreeSet::new();
                while picked.len() < support {
                    picked.insert(rng.gen_range(0..combos));
                }
                let masses: Vec<&str> = if support == 1 {
                    vec!["1"]
                } else {
                    match rng.gen_range(0..3) {
                        0 => vec!["1/2", "1/2"],
                        1 => vec!["1/3", "2/3"],
                        _ => vec!["1/4", "3/4"],
                    }
                };
                let entries: Vec<serde_json::Value> = picked
                    .iter()
                    .zip(&masses)
                    .map(|(combo, p)| {
                        // Mixed-radix decode: theta digit first, then one
                        // digit per co-agent.
                        let mut rest = *combo;
                        let theta = rest % num_thetas;
                        rest /= num_thetas;
                        let mut cotypes = serde_json::Map::new();
                        for j in &co_agents {
                            let pick = rest % type_counts[*j];
                            rest /= type_counts[*j];
                            cotypes.insert(agents[*j].clone(), json!(type_names[*j][pick]));
                        }
                        json!({"theta": thetas[theta], "cotypes": cotypes, "p": p})
                    })
                    .collect();
                beliefs.insert(format!("{}.{}", agents[i], type_names[i][t]), json!(entries));
            }
        }

        let types: serde_json::Map<String, serde_json::Value> = (0..num_agents)
            .map(|i| (agents[i].clone(), json!(type_names[i])))
            .collect();
        let full: serde_json::Map<String, serde_json::Value> = (0..num_agents)
            .map(|i| (agents[i].clone(), json!(type_names[i])))
            .collect();
        let text = json!({
            "agents": agents,
            "thetas": thetas,
            "types": types,
            "beliefs": beliefs,
            "spaces": {"full": full},
        })
        .to_string();
        let model = load_model(&text).expect("generated model is well-formed");
        if validate_nonredundant(&model.ambient).is_ok() {
            return model;
        }
    }
}

/// A uniformly random nonempty per-agent subset space of the ambient.
pub fn random_subset_space(rng: &mut impl Rng, ambient: &AmbientStructure) -> StateSpace {
    let sets: Vec<BTreeSet<_>> = ambient
        .agent_ids()
        .map(|a| {
            let ts = ambient.types_of(a);
            let mask = rng.gen_range(1..(1u32 << ts.len()));
            ts.iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, t)| *t)
                .collect()
        })
        .collect();
    StateSpace::new(ambient, sets).expect("components are nonempty")
}

/// A random belief-closed space: a random seed closed for a random owner.
pub fn random_closed_space(rng: &mut impl Rng, ambient: &AmbientStructure) -> StateSpace {
    use episteme::closure::{agent_closure, ClosureMode};
    let seed = random_subset_space(rng, ambient);
    let owner = AgentId(rng.gen_range(0..ambient.num_agents()));
    let mode = if rng.gen_bool(0.5) {
        ClosureMode::Minimal
    } else {
        ClosureMode::Definition
    };
    agent_closure(ambient, owner, &seed, mode).result
}

/// A uniformly random sub-event of the space.
pub fn random_event(rng: &mut impl Rng, ambient: &AmbientStructure, w: &StateSpace) -> Event {
    let states: BTreeSet<State> = w
        .states(ambient)
        .into_iter()
        .filter(|_| rng.gen_bool(0.5))
        .collect();
    Event::new(ambient, states).expect("states come from the space")
}

/// Brute-force iterated-correct-belief oracle: the union of all subsets
/// `X ⊆ e` that are self-evident within `w` (every agent believes `X` at
/// every state of `X`). Exponential in `|e|`, so callers keep events small.
pub fn cb_oracle(ambient: &AmbientStructure, w: &StateSpace, e: &Event) -> Event {
    let states: Vec<State> = e.states().iter().cloned().collect();
    assert!(states.len() <= 16, "oracle enumerates 2^|event| subsets");
    let mut union: BTreeSet<State> = BTreeSet::new();
    for mask in 0u32..(1 << states.len()) {
        let subset: BTreeSet<State> = states
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, s)| s.clone())
            .collect();
        let x = Event::new(ambient, subset).expect("subset of a valid event");
        let self_evident = ambient
            .agent_ids()
            .all(|i| x.is_subset(&believe(ambient, w, i, &x)));
        if self_evident {
            union.extend(x.states().iter().cloned());
        }
    }
    Event::new(ambient, union).expect("union of valid events")
}
