//! Finite-order belief hierarchies via partition refinement.
//!
//! Two types share a depth-`m` hierarchy exactly when iterated refinement
//! leaves them in the same block after `m` rounds: depth 0 pools each agent's
//! types into one block, and each round separates types whose beliefs —
//! pushed forward onto (nature state, co-agent blocks) — differ as
//! distributions. The sequence stabilizes after finitely many rounds; an
//! ambient is *non-redundant* when the stable partition is all singletons,
//! i.e. distinct types have distinct hierarchies.

use std::collections::BTreeMap;

use crate::model::{
    AgentId, AmbientStructure, Rational, SpaceClosureViolation, StateSpace, ThetaId, TypeId,
};

/// A partition of every agent's types into hierarchy-equivalence blocks at
/// one depth. Blocks are numbered contiguously by their smallest member, so
/// equal partitions have equal `block_of` vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Block index of each type, indexed by the type's global id.
    pub block_of: Vec<usize>,
    /// Refinement round that produced this partition.
    pub depth: usize,
}

impl Partition {
    pub fn same_block(&self, s: TypeId, t: TypeId) -> bool {
        self.block_of[s.0] == self.block_of[t.0]
    }

    /// Blocks in canonical order (ascending smallest member), each sorted.
    pub fn blocks(&self) -> Vec<Vec<TypeId>> {
        let count = self.block_of.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); count];
        for (i, &b) in self.block_of.iter().enumerate() {
            blocks[b].push(TypeId(i));
        }
        blocks
    }

    pub fn is_discrete(&self) -> bool {
        self.blocks().iter().all(|b| b.len() == 1)
    }
}

/// A type's belief pushed forward onto (nature state, co-agent blocks):
/// the depth-(d+1) hierarchy level induced by a depth-d partition.
pub type Signature = BTreeMap<(ThetaId, Vec<usize>), Rational>;

/// Pushes `t`'s belief through `prev`'s blocks. Keys are (nature state,
/// blocks of the co-types in co-agent order); masses of merged support
/// points accumulate.
pub fn pushed_signature(ambient: &AmbientStructure, t: TypeId, prev: &Partition) -> Signature {
    let mut sig = Signature::new();
    for entry in &ambient.belief(t).entries {
        let key = (
            entry.theta,
            entry.cotypes.iter().map(|c| prev.block_of[c.0]).collect(),
        );
        *sig.entry(key)
            .or_insert_with(|| Rational::from_integer(0.into())) += &entry.p;
    }
    sig
}

fn depth_zero(ambient: &AmbientStructure) -> Partition {
    // One block per agent; canonical numbering coincides with agent order
    // because each agent's types are contiguous in declaration order.
    let block_of = (0..ambient.num_types())
        .map(|i| ambient.type_agent(TypeId(i)).0)
        .collect();
    Partition { block_of, depth: 0 }
}

/// A signature flattened to a sorted list, usable as an ordered map key.
type SignatureKey = Vec<((ThetaId, Vec<usize>), Rational)>;

fn refine_once(ambient: &AmbientStructure, prev: &Partition) -> Partition {
    // Equal signatures at depth d+1 imply equal signatures at depth d, so
    // grouping by (agent, signature) alone refines `prev`.
    let mut groups: BTreeMap<(AgentId, SignatureKey), Vec<TypeId>> = BTreeMap::new();
    for i in 0..ambient.num_types() {
        let t = TypeId(i);
        let sig = pushed_signature(ambient, t, prev).into_iter().collect();
        groups
            .entry((ambient.type_agent(t), sig))
            .or_default()
            .push(t);
    }
    let mut blocks: Vec<Vec<TypeId>> = groups.into_values().collect();
    blocks.sort_by_key(|b| b[0]);
    let mut block_of = vec![0; ambient.num_types()];
    for (idx, block) in blocks.iter().enumerate() {
        for t in block {
            block_of[t.0] = idx;
        }
    }
    Partition {
        block_of,
        depth: prev.depth + 1,
    }
}

/// The full refinement sequence `[p_0, p_1, ...]` up to and including the
/// first repeat (`p_last == p_{last-1}`). Its length is therefore the
/// stabilization depth plus one.
pub fn refine_partition(ambient: &AmbientStructure) -> Vec<Partition> {
    let mut seq = vec![depth_zero(ambient)];
    loop {
        let next = refine_once(ambient, seq.last().expect("nonempty"));
        let stable = next.block_of == seq.last().expect("nonempty").block_of;
        seq.push(next);
        if stable {
            return seq;
        }
    }
}

/// First depth `m` with `p_m == p_{m-1}`.
pub fn stabilization_depth(ambient: &AmbientStructure) -> usize {
    refine_partition(ambient).len() - 1
}

/// The stable hierarchy partition.
pub fn stable_partition(ambient: &AmbientStructure) -> Partition {
    refine_partition(ambient).pop().expect("nonempty")
}

/// Two distinct types of one agent with identical hierarchies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedundancyWitness {
    pub agent: AgentId,
    pub first: TypeId,
    pub second: TypeId,
}

impl RedundancyWitness {
    pub fn describe(&self, ambient: &AmbientStructure) -> String {
        format!(
            "types {} and {} of agent {} have identical hierarchies",
            ambient.type_name(self.first),
            ambient.type_name(self.second),
            ambient.agent_name(self.agent),
        )
    }
}

/// Checks that distinct types always have distinct hierarchies. On failure,
/// returns the two smallest members of the first pooled block.
pub fn validate_nonredundant(ambient: &AmbientStructure) -> Result<(), RedundancyWitness> {
    for block in stable_partition(ambient).blocks() {
        if block.len() > 1 {
            return Err(RedundancyWitness {
                agent: ambient.type_agent(block[0]),
                first: block[0],
                second: block[1],
            });
        }
    }
    Ok(())
}

/// A type of the space believing in a co-type whose finite-order hierarchy
/// no type of the space matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisalignWitness {
    /// Agent whose belief leaves the space.
    pub agent: AgentId,
    /// The believing type; a member of the space.
    pub type_id: TypeId,
    /// Least order at which the mismatch is visible (blocks at depth
    /// `order - 1` distinguish the offending co-type from the whole space).
    pub order: usize,
    pub co_agent: AgentId,
    /// The supported co-type with the unmatched hierarchy.
    pub offending: TypeId,
}

impl MisalignWitness {
    pub fn describe(&self, ambient: &AmbientStructure) -> String {
        format!(
            "order {}: type {} of agent {} assigns positive probability to co-type {} of agent {}, whose depth-{} hierarchy matches no type of the space",
            self.order,
            ambient.type_name(self.type_id),
            ambient.agent_name(self.agent),
            ambient.type_name(self.offending),
            ambient.agent_name(self.co_agent),
            self.order - 1,
        )
    }
}

/// Hierarchy-comparison test: the space is misaligned iff some member type's
/// belief supports a co-type whose depth-(m-1) hierarchy differs from every
/// type the space allows for that co-agent. Returns the least-order witness,
/// scanning orders outermost, then agents, member types, support entries,
/// and co-agents in declaration order.
///
/// The result characterizes belief-closure only on non-redundant ambients;
/// on redundant ones the two tests genuinely differ (see the module tests).
pub fn misaligned_by_definition(
    ambient: &AmbientStructure,
    space: &StateSpace,
) -> Option<MisalignWitness> {
    let parts = refine_partition(ambient);
    // Orders beyond the stabilization depth inspect the same stable blocks
    // again, so scanning up to it decides every order.
    for order in 1..parts.len() {
        let part = &parts[order - 1];
        for i in ambient.agent_ids() {
            let co_agents = ambient.co_agents(i);
            for &t in space.type_set(i) {
                for entry in &ambient.belief(t).entries {
                    for (slot, &j) in co_agents.iter().enumerate() {
                        let co = entry.cotypes[slot];
                        let matched = space.type_set(j).iter().any(|s| part.same_block(*s, co));
                        if !matched {
                            return Some(MisalignWitness {
                                agent: i,
                                type_id: t,
                                order,
                                co_agent: j,
                                offending: co,
                            });
                        }
                    }
                }
            }
        }
    }
    None
}

/// Belief-closure test: the space is misaligned iff some member type's
/// belief supports a co-type outside the space. Scan order matches
/// [`misaligned_by_definition`].
pub fn misaligned_by_closure(
    ambient: &AmbientStructure,
    space: &StateSpace,
) -> Option<SpaceClosureViolation> {
    space.belief_closure_violation(ambient)
}

/// All nonempty per-agent type subsets of the ambient, as spaces.
#[cfg(test)]
pub(crate) fn all_subset_spaces(ambient: &AmbientStructure) -> Vec<StateSpace> {
    let per_agent: Vec<Vec<Vec<TypeId>>> = ambient
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
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_agent.len()];
    loop {
        let sets = idx
            .iter()
            .zip(&per_agent)
            .map(|(i, subsets)| subsets[*i].iter().copied().collect())
            .collect();
        out.push(StateSpace::new(ambient, sets).expect("nonempty by construction"));
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < per_agent[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == per_agent.len() {
                return out;
            }
        }
    }
}
