//! Belief operators over finite state spaces.
//!
//! A type believes an event when its whole introspective support lies inside
//! it; no probability arithmetic is involved beyond that support check. On
//! top of single-agent belief sit mutual belief (everyone believes), iterated
//! correct belief (the event holds and is believed, over and over), and its
//! fixed point, common correct belief. Each operator also has a "real"
//! variant that projects down to the owner's actually-held types inside an
//! agent-dependent structure.

use std::collections::{BTreeMap, BTreeSet};

use crate::closure::AgentDependentStructure;
use crate::model::{AgentId, AmbientStructure, Event, ModelError, StateSpace, TypeId};

/// Iteration depth for correct-belief operators: a finite stage or the fixed
/// point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbDepth {
    Finite(usize),
    Infinite,
}

/// Types of agent `i` in `within` whose introspective support is contained
/// in `e` — the type-level projection of the belief operator.
pub fn believing_types(
    ambient: &AmbientStructure,
    within: &StateSpace,
    i: AgentId,
    e: &Event,
) -> BTreeSet<TypeId> {
    within
        .type_set(i)
        .iter()
        .copied()
        .filter(|&t| {
            ambient
                .introspective_support(t)
                .iter()
                .all(|s| e.contains(s))
        })
        .collect()
}

/// Event of `within`'s states at which agent `i` assigns probability one to
/// `e`: the cylinder over the believing types of `i`.
pub fn believe(ambient: &AmbientStructure, within: &StateSpace, i: AgentId, e: &Event) -> Event {
    let believers = believing_types(ambient, within, i, e);
    let states = within
        .states(ambient)
        .into_iter()
        .filter(|s| believers.contains(&s.profile[i.0]))
        .collect();
    Event::new(ambient, states).expect("states come from the ambient product")
}

/// States of `within` at which every agent believes `e`: the intersection of
/// the per-agent belief cylinders.
pub fn mutual_believe(ambient: &AmbientStructure, within: &StateSpace, e: &Event) -> Event {
    let mut out = within.full_event(ambient);
    for i in ambient.agent_ids() {
        out = out.intersection(&believe(ambient, within, i, e));
    }
    out
}

/// The complement of `e` inside `within`'s states.
pub fn complement_within(ambient: &AmbientStructure, within: &StateSpace, e: &Event) -> Event {
    within.full_event(ambient).difference(e)
}

/// The stages of a correct-belief iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorTrace {
    pub input: Event,
    /// Weakly decreasing: stage 0 is the event itself, stage `m` adds the
    /// requirement that stage `m − 1` was mutually believed.
    pub stages: Vec<Event>,
    /// First depth whose stage equals its successor; `None` when a finite
    /// cutoff stopped the iteration before it stabilized.
    pub fixpoint_depth: Option<usize>,
}

impl OperatorTrace {
    /// The last computed stage.
    pub fn result(&self) -> &Event {
        self.stages.last().expect("at least the input stage")
    }
}

/// Iterated correct belief of `e` in `within`: the event holds and, stage by
/// stage, everyone believes the previous stage. `Infinite` iterates to the
/// first repeated stage, which the finite lattice guarantees; the stages are
/// weakly decreasing, so the fixed point arrives within the state count.
pub fn common_correct_belief(
    ambient: &AmbientStructure,
    within: &StateSpace,
    e: &Event,
    depth: CbDepth,
) -> OperatorTrace {
    let mut stages = vec![e.clone()];
    let mut fixpoint_depth = None;
    loop {
        if let CbDepth::Finite(m) = depth {
            if stages.len() > m {
                break;
            }
        }
        let cur = stages.last().expect("seeded above");
        let next = cur.intersection(&mutual_believe(ambient, within, cur));
        if next == *cur {
            fixpoint_depth = Some(stages.len() - 1);
            break;
        }
        stages.push(next);
    }
    OperatorTrace {
        input: e.clone(),
        stages,
        fixpoint_depth,
    }
}

/// Real types of the structure's owner that believe `e` inside the
/// structure's space. Possibly empty.
pub fn real_believe(
    ambient: &AmbientStructure,
    c: &AgentDependentStructure,
    e: &Event,
) -> BTreeSet<TypeId> {
    believing_types(ambient, c.space(), c.owner(), e)
        .intersection(c.real_types())
        .copied()
        .collect()
}

/// Real types of the owner consistent with the `depth`-stage correct-belief
/// event: the owner-coordinate projection of the stage, intersected with the
/// real types. Returns the type set together with the underlying trace.
pub fn real_cb(
    ambient: &AmbientStructure,
    c: &AgentDependentStructure,
    e: &Event,
    depth: CbDepth,
) -> (BTreeSet<TypeId>, OperatorTrace) {
    let trace = common_correct_belief(ambient, c.space(), e, depth);
    let owner = c.owner();
    let projected: BTreeSet<TypeId> = trace
        .result()
        .states()
        .iter()
        .map(|s| s.profile[owner.0])
        .collect();
    let types = projected.intersection(c.real_types()).copied().collect();
    (types, trace)
}

/// Componentwise [`real_cb`] over a full profile: one structure and one
/// event per agent, owners covering every agent exactly once.
pub fn real_cb_profile(
    ambient: &AmbientStructure,
    profile: &[(AgentDependentStructure, Event)],
    depth: CbDepth,
) -> Result<BTreeMap<AgentId, BTreeSet<TypeId>>, ModelError> {
    let mut seen: Vec<Option<()>> = vec![None; ambient.num_agents()];
    let names = |items: &[(AgentDependentStructure, Event)]| {
        items
            .iter()
            .map(|(c, _)| ambient.agent_name(c.owner()).to_string())
            .collect()
    };
    for (c, _) in profile {
        if seen[c.owner().0].replace(()).is_some() {
            return Err(ModelError::ProfileOwnerCoverage {
                got: names(profile),
            });
        }
    }
    if seen.iter().any(Option::is_none) {
        return Err(ModelError::ProfileOwnerCoverage {
            got: names(profile),
        });
    }
    let mut out = BTreeMap::new();
    for (c, e) in profile {
        let (types, _) = real_cb(ambient, c, e, depth);
        out.insert(c.owner(), types);
    }
    Ok(out)
}
