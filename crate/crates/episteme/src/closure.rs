//! Agent closures and the taxonomy of structure profiles.
//!
//! One agent can "close" a state space around herself: keep her own types
//! and pull in exactly the co-types her beliefs support, repeating until
//! nothing new appears. The least fixed point of that iteration is the
//! smallest belief-closed space containing her types, and wrapping it with
//! the types she actually holds gives her agent-dependent structure. A
//! profile of such structures (one per agent) is then classified by whether
//! it steps outside the original space (degenerate or not) and whether all
//! agents end up with the same space (common or not).

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{AgentId, AmbientStructure, ModelError, StateSpace, TypeId};

/// How the closure iteration is seeded.
///
/// `Definition` seeds with `w ∪ C_i(w)`, so the result always contains the
/// starting space. `Minimal` seeds with `C_i(w)` alone, which keeps only the
/// owner's types from `w`; the result is the least belief-closed space whose
/// owner component contains them, and may therefore drop co-types of `w`
/// that the owner never reasons about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosureMode {
    Definition,
    Minimal,
}

impl ClosureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ClosureMode::Definition => "definition",
            ClosureMode::Minimal => "minimal",
        }
    }
}

/// One closing step for `owner`: her component is kept as is, and every
/// co-agent's component is replaced by the types her beliefs support, so a
/// co-component can shrink as well as grow.
pub fn closure_step(ambient: &AmbientStructure, owner: AgentId, w: &StateSpace) -> StateSpace {
    let mut sets: Vec<BTreeSet<TypeId>> = vec![BTreeSet::new(); ambient.num_agents()];
    sets[owner.0] = w.type_set(owner).clone();
    for j in ambient.co_agents(owner) {
        let mut supported = BTreeSet::new();
        for &t in w.type_set(owner) {
            supported.extend(ambient.supported_cotypes(t, j));
        }
        sets[j.0] = supported;
    }
    // Every belief has nonempty support naming one co-type per agent, so
    // no component can come out empty.
    StateSpace::new(ambient, sets).expect("closing step keeps components nonempty")
}

/// One run of the closure iteration: the seed, every stage, and the least
/// fixed point reached.
#[derive(Debug, Clone)]
pub struct ClosureRun {
    pub owner: AgentId,
    pub mode: ClosureMode,
    /// Ascending chain from the seed (first entry) to the fixed point (last
    /// entry); consecutive stages are strictly increasing.
    pub trace: Vec<StateSpace>,
    pub result: StateSpace,
}

/// Iterates `X ↦ X ∪ ⋃_j C_j(X)` from the mode's seed until nothing grows.
/// Each strict step adds at least one type, so the chain stabilizes after
/// at most the ambient's total type count steps, and the result is
/// belief-closed by construction.
pub fn agent_closure(
    ambient: &AmbientStructure,
    owner: AgentId,
    w: &StateSpace,
    mode: ClosureMode,
) -> ClosureRun {
    let step = closure_step(ambient, owner, w);
    let seed = match mode {
        ClosureMode::Definition => w.union(&step),
        ClosureMode::Minimal => step,
    };
    let mut trace = vec![seed];
    loop {
        let cur = trace.last().expect("trace starts nonempty").clone();
        let mut next = cur.clone();
        for j in ambient.agent_ids() {
            next = next.union(&closure_step(ambient, j, &cur));
        }
        if next == cur {
            break;
        }
        trace.push(next);
    }
    let result = trace.last().expect("trace starts nonempty").clone();
    ClosureRun {
        owner,
        mode,
        trace,
        result,
    }
}

/// A belief-closed space owned by one agent, together with the subset of
/// her member types she actually holds (the rest are imaginary: artifacts
/// needed to close the space).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentDependentStructure {
    owner: AgentId,
    real_types: BTreeSet<TypeId>,
    space: StateSpace,
}

impl AgentDependentStructure {
    /// Wraps a space as an owned structure, checking that the real types
    /// are nonempty, belong to the owner, sit inside the owner's component
    /// of the space, and that the space itself is belief-closed.
    pub fn new(
        ambient: &AmbientStructure,
        owner: AgentId,
        real_types: BTreeSet<TypeId>,
        space: StateSpace,
    ) -> Result<Self, ModelError> {
        if space.fingerprint() != ambient.fingerprint() {
            return Err(ModelError::AmbientMismatch);
        }
        if real_types.is_empty() {
            return Err(ModelError::EmptyRealTypes(
                ambient.agent_name(owner).to_string(),
            ));
        }
        for &t in &real_types {
            if ambient.type_agent(t) != owner {
                return Err(ModelError::TypeAgentMismatch {
                    agent: ambient.agent_name(owner).to_string(),
                    type_name: ambient.type_name(t).to_string(),
                });
            }
            if !space.type_set(owner).contains(&t) {
                return Err(ModelError::RealTypesOutsideStructure {
                    owner: ambient.agent_name(owner).to_string(),
                    type_name: ambient.type_name(t).to_string(),
                });
            }
        }
        if let Some(v) = space.belief_closure_violation(ambient) {
            return Err(ModelError::StructureNotClosed {
                owner: ambient.agent_name(owner).to_string(),
                type_name: ambient.type_name(v.owner).to_string(),
                offending: ambient.type_name(v.offending).to_string(),
            });
        }
        Ok(AgentDependentStructure {
            owner,
            real_types,
            space,
        })
    }

    pub fn owner(&self) -> AgentId {
        self.owner
    }

    pub fn real_types(&self) -> &BTreeSet<TypeId> {
        &self.real_types
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Member types of the owner that are not real.
    pub fn imaginary_types(&self) -> BTreeSet<TypeId> {
        self.space
            .type_set(self.owner)
            .difference(&self.real_types)
            .copied()
            .collect()
    }
}

/// The least belief-closed structure around `w`'s types for `owner`: the
/// minimal-mode closure of `w`, with `w`'s owner component as the real
/// types.
pub fn minimal_structure(
    ambient: &AmbientStructure,
    owner: AgentId,
    w: &StateSpace,
) -> AgentDependentStructure {
    let run = agent_closure(ambient, owner, w, ClosureMode::Minimal);
    AgentDependentStructure::new(ambient, owner, w.type_set(owner).clone(), run.result)
        .expect("a closure fixed point is belief-closed and keeps the owner's types")
}

/// Outcome of the exhaustive minimality check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MinimalityVerdict {
    Minimal,
    /// A proper componentwise-subset space that still holds all real types
    /// and is belief-closed — the structure was not minimal. The witness is
    /// the first hit in ascending total size, ties broken by declaration
    /// order.
    SmallerWitness(StateSpace),
}

/// Exhaustively enumerates every proper componentwise subset of the
/// structure's space that keeps all real types and nonempty components and
/// reports the first belief-closed one. This is a brute-force oracle with
/// no shared machinery with [`agent_closure`]; it errors when more than
/// `cap` candidates would need checking.
pub fn verify_minimality(
    ambient: &AmbientStructure,
    c: &AgentDependentStructure,
    cap: u64,
) -> Result<MinimalityVerdict, ModelError> {
    // 2^n capped so oversized components report too-large instead of
    // overflowing.
    fn pow2(bits: usize) -> u128 {
        1u128.checked_shl(bits as u32).unwrap_or(u128::MAX)
    }
    let owner = c.owner();
    let mut count: u128 = 1;
    for a in ambient.agent_ids() {
        let comp = c.space().type_set(a).len();
        let choices = if a == owner {
            pow2(comp - c.real_types().len())
        } else {
            pow2(comp).saturating_sub(1)
        };
        count = count.saturating_mul(choices);
    }
    count = count.saturating_sub(1); // the full combination is not proper
    if count > u128::from(cap) {
        return Err(ModelError::MinimalitySearchTooLarge {
            candidates: count,
            cap: u128::from(cap),
        });
    }

    // Per-agent choice lists: the owner keeps the real types and toggles
    // the imaginary ones; co-agents toggle everything short of empty.
    let mut per_agent: Vec<Vec<BTreeSet<TypeId>>> = Vec::new();
    for a in ambient.agent_ids() {
        let comp: Vec<TypeId> = c.space().type_set(a).iter().copied().collect();
        let (fixed, free): (Vec<TypeId>, Vec<TypeId>) = if a == owner {
            comp.iter().partition(|t| c.real_types().contains(t))
        } else {
            (Vec::new(), comp)
        };
        let mut choices = Vec::new();
        for mask in 0u64..(1 << free.len()) {
            let mut set: BTreeSet<TypeId> = fixed.iter().copied().collect();
            for (k, &t) in free.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    set.insert(t);
                }
            }
            if !set.is_empty() {
                choices.push(set);
            }
        }
        per_agent.push(choices);
    }

    let mut candidates: Vec<Vec<BTreeSet<TypeId>>> = vec![Vec::new()];
    for choices in &per_agent {
        let mut grown = Vec::new();
        for partial in &candidates {
            for choice in choices {
                let mut next = partial.clone();
                next.push(choice.clone());
                grown.push(next);
            }
        }
        candidates = grown;
    }
    candidates.sort_by_key(|sets| {
        let size: usize = sets.iter().map(BTreeSet::len).sum();
        let flat: Vec<TypeId> = sets.iter().flatten().copied().collect();
        (size, flat)
    });

    for sets in candidates {
        if sets == c.space().type_sets() {
            continue;
        }
        let candidate = StateSpace::new(ambient, sets).expect("enumerated components are nonempty");
        if candidate.is_belief_closed(ambient) {
            return Ok(MinimalityVerdict::SmallerWitness(candidate));
        }
    }
    Ok(MinimalityVerdict::Minimal)
}

/// Per-owner slice of the profile taxonomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentTaxonomy {
    /// Whether the owner's structure holds states outside the original
    /// space.
    pub new_states_introduced: bool,
    pub state_space: StateSpace,
}

/// Classification of a full profile of structures against the original
/// space: degenerate when no owner stepped outside it, common when all
/// owners induced the same space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileTaxonomy {
    pub degenerate: bool,
    pub common: bool,
    pub per_agent: BTreeMap<AgentId, AgentTaxonomy>,
}

impl ProfileTaxonomy {
    /// Cell name in the two-by-two degenerate/common table.
    pub fn cell(&self) -> &'static str {
        match (self.degenerate, self.common) {
            (true, true) => "standard",
            (true, false) => "degenerate-non-common",
            (false, true) => "non-degenerate-common",
            (false, false) => "non-degenerate-non-common",
        }
    }
}

/// Classifies one structure per agent against the original space `w`.
/// Owners must cover every agent exactly once.
pub fn classify_profile(
    ambient: &AmbientStructure,
    profile: &[AgentDependentStructure],
    w: &StateSpace,
) -> Result<ProfileTaxonomy, ModelError> {
    if w.fingerprint() != ambient.fingerprint() {
        return Err(ModelError::AmbientMismatch);
    }
    let mut by_owner: Vec<Option<&AgentDependentStructure>> = vec![None; ambient.num_agents()];
    let mut seen = Vec::new();
    for c in profile {
        if c.space().fingerprint() != ambient.fingerprint() {
            return Err(ModelError::AmbientMismatch);
        }
        seen.push(ambient.agent_name(c.owner()).to_string());
        if by_owner[c.owner().0].replace(c).is_some() {
            return Err(ModelError::ProfileOwnerCoverage { got: seen });
        }
    }
    if by_owner.iter().any(Option::is_none) {
        return Err(ModelError::ProfileOwnerCoverage { got: seen });
    }

    let mut per_agent = BTreeMap::new();
    let mut degenerate = true;
    let mut common = true;
    let first_space = by_owner[0].expect("covered above").space().clone();
    for a in ambient.agent_ids() {
        let c = by_owner[a.0].expect("covered above");
        let new_states = !c.space().subset_of(w);
        degenerate &= !new_states;
        common &= *c.space() == first_space;
        per_agent.insert(
            a,
            AgentTaxonomy {
                new_states_introduced: new_states,
                state_space: c.space().clone(),
            },
        );
    }
    Ok(ProfileTaxonomy {
        degenerate,
        common,
        per_agent,
    })
}
