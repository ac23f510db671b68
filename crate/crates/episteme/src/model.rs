//! Core data model: agents, nature states, types, beliefs, state spaces, events.
//!
//! Every probability is an exact rational; no floating point enters any
//! computation. All collections iterate in declaration order so that every
//! operation in the crate is deterministic.

use std::collections::BTreeSet;
use std::fmt;
use std::marker::PhantomData;

use num_traits::{One, Signed, Zero};
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Exact rational scalar used for all probability mass and payoffs.
pub type Rational = num_rational::BigRational;

/// Shorthand for building small rationals in code and tests.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

/// Index of an agent, in declaration order.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AgentId(pub usize);

/// Index of a nature state, in declaration order.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ThetaId(pub usize);

/// Global index of a type, in declaration order (agents first, then each
/// agent's list). Types of the same agent are therefore contiguous.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TypeId(pub usize);

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("model must declare at least two agents")]
    TooFewAgents,
    #[error("model must declare at least one nature state")]
    NoThetas,
    #[error("invalid name {0:?}: names must match [A-Za-z0-9_-]+")]
    BadName(String),
    #[error("duplicate {kind} name {name:?}")]
    DuplicateName { kind: &'static str, name: String },
    #[error("undeclared agent {0:?}")]
    UndeclaredAgent(String),
    #[error("undeclared nature state {0:?}")]
    UndeclaredTheta(String),
    #[error("undeclared type {name:?} for agent {agent:?}")]
    UndeclaredType { agent: String, name: String },
    #[error("agent {0:?} has an empty type list")]
    EmptyTypeList(String),
    #[error("missing belief for type {0:?}")]
    MissingBelief(String),
    #[error("belief key {0:?} is not of the form \"agent.type\"")]
    BadBeliefKey(String),
    #[error("belief for {owner:?} lists co-types for {got:?}, expected exactly the other agents")]
    CotypeCoverage { owner: String, got: Vec<String> },
    #[error("belief for {owner:?} repeats the support point ({theta}, {cotypes:?})")]
    DuplicateSupportPoint {
        owner: String,
        theta: String,
        cotypes: Vec<String>,
    },
    #[error("bad rational literal {0:?}")]
    BadRational(String),
    #[error("negative mass {mass:?} in belief for {owner:?}")]
    NegativeMass { owner: String, mass: String },
    #[error("belief for {owner:?} sums to {sum:?}, expected 1")]
    ProbabilitySum { owner: String, sum: String },
    #[error("belief for {owner:?} has an empty support")]
    EmptySupport { owner: String },
    #[error("space {space:?}: agent {agent:?} has an empty type set")]
    EmptySpaceComponent { space: String, agent: String },
    #[error("space {space:?} lists agents {got:?}, expected exactly the declared agents")]
    SpaceAgentCoverage { space: String, got: Vec<String> },
    #[error("type {type_name:?} does not belong to agent {agent:?}")]
    TypeAgentMismatch { agent: String, type_name: String },
    #[error("operands belong to different ambient structures")]
    AmbientMismatch,
    #[error("structure for {owner:?} is not belief-closed: {type_name:?} supports {offending:?} outside it")]
    StructureNotClosed {
        owner: String,
        type_name: String,
        offending: String,
    },
    #[error("real type {type_name:?} is outside the structure's component for {owner:?}")]
    RealTypesOutsideStructure { owner: String, type_name: String },
    #[error("agent {0:?} has an empty real type set")]
    EmptyRealTypes(String),
    #[error("profile owners {got:?} must be exactly the declared agents, each once")]
    ProfileOwnerCoverage { got: Vec<String> },
    #[error("minimality check needs {candidates} candidate structures, above the cap of {cap}")]
    MinimalitySearchTooLarge { candidates: u128, cap: u128 },
    #[error("prior mass for state {state:?} is negative")]
    NegativePriorMass { state: String },
    #[error("prior masses sum to {sum:?}, expected 1")]
    PriorMassSum { sum: String },
    #[error("prior puts mass on state {state:?} outside its space")]
    PriorStateOutsideSpace { state: String },
    #[error("prior for {owner:?} is defined on a different space than the structure")]
    PriorDomainMismatch { owner: String },
    #[error("prior for {owner:?} is not a common prior of its structure: {reason}")]
    ProfilePriorInvalid { owner: String, reason: String },
    #[error("trade is not budget-balanced at state {state:?}: payoffs sum to {sum:?}")]
    TradeImbalance { state: String, sum: String },
    #[error("type {type_name:?} is not a member of the evaluation space")]
    TypeOutsideSpace { type_name: String },
    #[error("acceptance-pattern search needs {patterns} patterns, above the cap of {cap}")]
    TradePatternCap { patterns: u128, cap: u128 },
    #[error("trade key {0:?} is not of the form \"agent@state\"")]
    BadTradeKey(String),
    #[error("malformed state key {0:?}")]
    BadStateKey(String),
    #[error("state ({theta:?}, {types:?}) is outside the ambient product")]
    BadState { theta: String, types: Vec<String> },
}

// ---------------------------------------------------------------------------
// Rational literals
// ---------------------------------------------------------------------------

/// Parses `"p/q"` (or a bare integer `"p"`); the result is normalized to
/// lowest terms with a positive denominator.
pub fn parse_rational(text: &str) -> Result<Rational, ModelError> {
    let bad = || ModelError::BadRational(text.to_string());
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text.trim(), "1"),
    };
    let n: num_bigint::BigInt = num.parse().map_err(|_| bad())?;
    let d: num_bigint::BigInt = den.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// Canonical form: `"p/q"` in lowest terms, sign on the numerator.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn name_ok(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

// ---------------------------------------------------------------------------
// JSON maps that reject duplicate keys
// ---------------------------------------------------------------------------

/// Insertion-ordered string map; deserialization fails on a repeated key.
#[derive(Debug, Clone, Default)]
struct OrderedMap<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for OrderedMap<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct MapVisitor<V>(PhantomData<V>);
        impl<'de, V: Deserialize<'de>> Visitor<'de> for MapVisitor<V> {
            type Value = OrderedMap<V>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "an object with unique keys")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
                let mut entries: Vec<(String, V)> = Vec::new();
                let mut seen = BTreeSet::new();
                while let Some((key, value)) = m.next_entry::<String, V>()? {
                    if !seen.insert(key.clone()) {
                        return Err(de::Error::custom(format!("duplicate key {key:?}")));
                    }
                    entries.push((key, value));
                }
                Ok(OrderedMap(entries))
            }
        }
        d.deserialize_map(MapVisitor(PhantomData))
    }
}

// ---------------------------------------------------------------------------
// Ambient structure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub agent: AgentId,
    pub name: String,
}

/// One point of a belief's support: a nature state, the co-types of every
/// other agent (in agent order, owner omitted), and its positive mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefEntry {
    pub theta: ThetaId,
    pub cotypes: Vec<TypeId>,
    pub p: Rational,
}

/// A type's belief over nature states and co-type profiles. Entries are
/// sorted by (theta, cotypes), all masses are positive, and they sum to 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Belief {
    pub owner: TypeId,
    pub entries: Vec<BeliefEntry>,
}

/// The ambient finite type structure every other object lives in: agents,
/// nature states, each agent's types, and one belief per type.
///
/// Beliefs only reference declared types, so the ambient is belief-closed by
/// construction when produced by [`load_model`]. Non-redundancy is a separate
/// property checked by [`crate::hierarchy::validate_nonredundant`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmbientStructure {
    pub(crate) agents: Vec<String>,
    pub(crate) thetas: Vec<String>,
    pub(crate) types: Vec<TypeDecl>,
    pub(crate) agent_types: Vec<Vec<TypeId>>,
    pub(crate) beliefs: Vec<Belief>,
    pub(crate) fingerprint: u64,
}

impl AmbientStructure {
    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.agents[a.0]
    }

    pub fn agent_by_name(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|n| n == name).map(AgentId)
    }

    pub fn num_thetas(&self) -> usize {
        self.thetas.len()
    }

    pub fn theta_ids(&self) -> impl Iterator<Item = ThetaId> {
        (0..self.thetas.len()).map(ThetaId)
    }

    pub fn theta_name(&self, t: ThetaId) -> &str {
        &self.thetas[t.0]
    }

    pub fn theta_by_name(&self, name: &str) -> Option<ThetaId> {
        self.thetas.iter().position(|n| n == name).map(ThetaId)
    }

    /// Total number of types across all agents.
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn type_decl(&self, t: TypeId) -> &TypeDecl {
        &self.types[t.0]
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.types[t.0].name
    }

    pub fn type_agent(&self, t: TypeId) -> AgentId {
        self.types[t.0].agent
    }

    /// An agent's types in declaration order.
    pub fn types_of(&self, a: AgentId) -> &[TypeId] {
        &self.agent_types[a.0]
    }

    pub fn type_by_name(&self, a: AgentId, name: &str) -> Option<TypeId> {
        self.agent_types[a.0]
            .iter()
            .copied()
            .find(|t| self.types[t.0].name == name)
    }

    pub fn belief(&self, t: TypeId) -> &Belief {
        &self.beliefs[t.0]
    }

    /// The other agents, ascending; co-type vectors follow this order.
    pub fn co_agents(&self, owner: AgentId) -> Vec<AgentId> {
        self.agent_ids().filter(|a| *a != owner).collect()
    }

    /// Embeds a support entry of `t`'s belief as a full state by inserting
    /// `t` itself at the owner's coordinate.
    pub fn entry_state(&self, t: TypeId, entry: &BeliefEntry) -> State {
        let owner = self.type_agent(t);
        let mut profile = Vec::with_capacity(self.num_agents());
        let mut co = entry.cotypes.iter();
        for a in self.agent_ids() {
            if a == owner {
                profile.push(t);
            } else {
                profile.push(*co.next().expect("co-type arity"));
            }
        }
        State {
            theta: entry.theta,
            profile,
        }
    }

    /// Support of the introspective extension of `t`'s belief: the belief's
    /// support embedded as full states, each carrying `t` at its own
    /// coordinate. Sorted ascending.
    pub fn introspective_support(&self, t: TypeId) -> Vec<State> {
        self.beliefs[t.0]
            .entries
            .iter()
            .map(|e| self.entry_state(t, e))
            .collect()
    }

    /// The introspective extension of `t`'s belief as a full distribution
    /// over states: each support point carries `t` at its own coordinate and
    /// keeps its original mass. Sorted by state; masses sum to one.
    pub fn introspective_belief(&self, t: TypeId) -> Vec<(State, Rational)> {
        self.beliefs[t.0]
            .entries
            .iter()
            .map(|e| (self.entry_state(t, e), e.p.clone()))
            .collect()
    }

    /// Co-types of agent `j` that appear in the support of `t`'s belief.
    pub fn supported_cotypes(&self, t: TypeId, j: AgentId) -> BTreeSet<TypeId> {
        let owner = self.type_agent(t);
        let slot = self
            .co_agents(owner)
            .iter()
            .position(|a| *a == j)
            .expect("j must differ from the owner");
        self.beliefs[t.0]
            .entries
            .iter()
            .map(|e| e.cotypes[slot])
            .collect()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Checks that every belief's support stays inside the per-agent type
    /// lists. Structures built by [`load_model`] always pass; programmatic
    /// mutants (a type removed from an agent's list while still referenced)
    /// yield the first offending type and support profile in scan order.
    pub fn validate_belief_closure(&self) -> Result<(), BeliefClosureWitness> {
        for &owner in self.agent_types.iter().flatten() {
            let co_agents = self.co_agents(self.type_agent(owner));
            for entry in &self.beliefs[owner.0].entries {
                for (slot, &j) in co_agents.iter().enumerate() {
                    let co = entry.cotypes[slot];
                    if !self.agent_types[j.0].contains(&co) {
                        return Err(BeliefClosureWitness {
                            owner,
                            support: entry.cotypes.clone(),
                            offending: co,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Human-readable state label, also used as the state key in trade and
    /// prior files: `theta,type_1,...,type_n` in agent order.
    pub fn state_key(&self, s: &State) -> String {
        let mut parts = vec![self.theta_name(s.theta).to_string()];
        parts.extend(s.profile.iter().map(|t| self.type_name(*t).to_string()));
        parts.join(",")
    }

    /// Parses a state key produced by [`Self::state_key`].
    pub fn parse_state_key(&self, key: &str) -> Result<State, ModelError> {
        let parts: Vec<&str> = key.split(',').collect();
        if parts.len() != 1 + self.num_agents() {
            return Err(ModelError::BadStateKey(key.to_string()));
        }
        let theta = self
            .theta_by_name(parts[0])
            .ok_or_else(|| ModelError::UndeclaredTheta(parts[0].to_string()))?;
        let mut profile = Vec::with_capacity(self.num_agents());
        for (i, part) in parts[1..].iter().enumerate() {
            let a = AgentId(i);
            let t = self
                .type_by_name(a, part)
                .ok_or_else(|| ModelError::UndeclaredType {
                    agent: self.agent_name(a).to_string(),
                    name: part.to_string(),
                })?;
            profile.push(t);
        }
        Ok(State { theta, profile })
    }
}

/// A belief support point that escapes the ambient type lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefClosureWitness {
    pub owner: TypeId,
    /// The full co-type profile of the offending support point.
    pub support: Vec<TypeId>,
    /// The first co-type in that profile missing from its agent's list.
    pub offending: TypeId,
}

// ---------------------------------------------------------------------------
// States, state spaces, events
// ---------------------------------------------------------------------------

/// A full state: one nature state plus one type per agent (agent order).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub theta: ThetaId,
    pub profile: Vec<TypeId>,
}

/// A product state space: all nature states crossed with a nonempty type set
/// per agent. The nature component is always the full set of nature states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    type_sets: Vec<BTreeSet<TypeId>>,
    fingerprint: u64,
}

impl StateSpace {
    pub fn new(
        ambient: &AmbientStructure,
        type_sets: Vec<BTreeSet<TypeId>>,
    ) -> Result<Self, ModelError> {
        assert_eq!(
            type_sets.len(),
            ambient.num_agents(),
            "one type set per agent"
        );
        for (i, set) in type_sets.iter().enumerate() {
            let agent = AgentId(i);
            if set.is_empty() {
                return Err(ModelError::EmptySpaceComponent {
                    space: String::new(),
                    agent: ambient.agent_name(agent).to_string(),
                });
            }
            for &t in set {
                if ambient.type_agent(t) != agent {
                    return Err(ModelError::TypeAgentMismatch {
                        agent: ambient.agent_name(agent).to_string(),
                        type_name: ambient.type_name(t).to_string(),
                    });
                }
            }
        }
        Ok(StateSpace {
            type_sets,
            fingerprint: ambient.fingerprint,
        })
    }

    pub fn from_names(
        ambient: &AmbientStructure,
        sets: &[(&str, &[&str])],
    ) -> Result<Self, ModelError> {
        let mut type_sets = vec![BTreeSet::new(); ambient.num_agents()];
        for (agent_name, names) in sets {
            let a = ambient
                .agent_by_name(agent_name)
                .ok_or_else(|| ModelError::UndeclaredAgent(agent_name.to_string()))?;
            for name in *names {
                let t =
                    ambient
                        .type_by_name(a, name)
                        .ok_or_else(|| ModelError::UndeclaredType {
                            agent: agent_name.to_string(),
                            name: name.to_string(),
                        })?;
                type_sets[a.0].insert(t);
            }
        }
        StateSpace::new(ambient, type_sets)
    }

    /// The whole ambient product.
    pub fn full(ambient: &AmbientStructure) -> Self {
        let type_sets = ambient
            .agent_ids()
            .map(|a| ambient.types_of(a).iter().copied().collect())
            .collect();
        StateSpace {
            type_sets,
            fingerprint: ambient.fingerprint,
        }
    }

    pub fn type_sets(&self) -> &[BTreeSet<TypeId>] {
        &self.type_sets
    }

    pub fn type_set(&self, a: AgentId) -> &BTreeSet<TypeId> {
        &self.type_sets[a.0]
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// All states of the product, sorted ascending (theta-major, then the
    /// type profile in agent order).
    pub fn states(&self, ambient: &AmbientStructure) -> Vec<State> {
        let mut out = Vec::new();
        for theta in ambient.theta_ids() {
            let mut profile = Vec::with_capacity(self.type_sets.len());
            self.push_profiles(theta, 0, &mut profile, &mut out);
        }
        out
    }

    fn push_profiles(
        &self,
        theta: ThetaId,
        agent: usize,
        profile: &mut Vec<TypeId>,
        out: &mut Vec<State>,
    ) {
        if agent == self.type_sets.len() {
            out.push(State {
                theta,
                profile: profile.clone(),
            });
            return;
        }
        for &t in &self.type_sets[agent] {
            profile.push(t);
            self.push_profiles(theta, agent + 1, profile, out);
            profile.pop();
        }
    }

    pub fn num_states(&self, ambient: &AmbientStructure) -> usize {
        ambient.num_thetas() * self.type_sets.iter().map(|s| s.len()).product::<usize>()
    }

    pub fn contains_state(&self, s: &State) -> bool {
        s.profile.len() == self.type_sets.len()
            && s.profile
                .iter()
                .zip(&self.type_sets)
                .all(|(t, set)| set.contains(t))
    }

    /// Componentwise union.
    pub fn union(&self, other: &StateSpace) -> StateSpace {
        assert_eq!(self.fingerprint, other.fingerprint, "ambient mismatch");
        let type_sets = self
            .type_sets
            .iter()
            .zip(&other.type_sets)
            .map(|(a, b)| a.union(b).copied().collect())
            .collect();
        StateSpace {
            type_sets,
            fingerprint: self.fingerprint,
        }
    }

    pub fn subset_of(&self, other: &StateSpace) -> bool {
        self.type_sets
            .iter()
            .zip(&other.type_sets)
            .all(|(a, b)| a.is_subset(b))
    }

    /// First belief-closure violation in scan order (agents, then types in
    /// declaration order, then support entries), if any: a type of the space
    /// whose belief supports a co-type outside the space.
    pub fn belief_closure_violation(
        &self,
        ambient: &AmbientStructure,
    ) -> Option<SpaceClosureViolation> {
        for a in ambient.agent_ids() {
            for &t in &self.type_sets[a.0] {
                let co_agents = ambient.co_agents(a);
                for entry in &ambient.belief(t).entries {
                    for (slot, &j) in co_agents.iter().enumerate() {
                        let co = entry.cotypes[slot];
                        if !self.type_sets[j.0].contains(&co) {
                            return Some(SpaceClosureViolation {
                                owner: t,
                                offending: co,
                            });
                        }
                    }
                }
            }
        }
        None
    }

    pub fn is_belief_closed(&self, ambient: &AmbientStructure) -> bool {
        self.belief_closure_violation(ambient).is_none()
    }

    /// Full event over this space's states.
    pub fn full_event(&self, ambient: &AmbientStructure) -> Event {
        Event {
            states: self.states(ambient).into_iter().collect(),
            fingerprint: self.fingerprint,
        }
    }
}

/// Componentwise subset order between two spaces over the same ambient.
pub fn structure_subset(a: &StateSpace, b: &StateSpace) -> Result<bool, ModelError> {
    if a.fingerprint != b.fingerprint {
        return Err(ModelError::AmbientMismatch);
    }
    Ok(a.subset_of(b))
}

/// A type of the space whose belief leaves the space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceClosureViolation {
    pub owner: TypeId,
    pub offending: TypeId,
}

/// An arbitrary finite set of full states over the ambient product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    states: BTreeSet<State>,
    fingerprint: u64,
}

impl Event {
    pub fn new(ambient: &AmbientStructure, states: BTreeSet<State>) -> Result<Self, ModelError> {
        for s in &states {
            let ok = s.theta.0 < ambient.num_thetas()
                && s.profile.len() == ambient.num_agents()
                && s.profile.iter().enumerate().all(|(i, t)| {
                    t.0 < ambient.num_types() && ambient.type_agent(*t) == AgentId(i)
                });
            if !ok {
                return Err(ModelError::BadState {
                    theta: if s.theta.0 < ambient.num_thetas() {
                        ambient.theta_name(s.theta).to_string()
                    } else {
                        format!("#{}", s.theta.0)
                    },
                    types: s.profile.iter().map(|t| format!("#{}", t.0)).collect(),
                });
            }
        }
        Ok(Event {
            states,
            fingerprint: ambient.fingerprint,
        })
    }

    pub fn empty(ambient: &AmbientStructure) -> Self {
        Event {
            states: BTreeSet::new(),
            fingerprint: ambient.fingerprint,
        }
    }

    pub fn states(&self) -> &BTreeSet<State> {
        &self.states
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, s: &State) -> bool {
        self.states.contains(s)
    }

    pub fn intersection(&self, other: &Event) -> Event {
        assert_eq!(self.fingerprint, other.fingerprint, "ambient mismatch");
        Event {
            states: self.states.intersection(&other.states).cloned().collect(),
            fingerprint: self.fingerprint,
        }
    }

    pub fn union(&self, other: &Event) -> Event {
        assert_eq!(self.fingerprint, other.fingerprint, "ambient mismatch");
        Event {
            states: self.states.union(&other.states).cloned().collect(),
            fingerprint: self.fingerprint,
        }
    }

    /// Set difference `self \ other`.
    pub fn difference(&self, other: &Event) -> Event {
        assert_eq!(self.fingerprint, other.fingerprint, "ambient mismatch");
        Event {
            states: self.states.difference(&other.states).cloned().collect(),
            fingerprint: self.fingerprint,
        }
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.states.is_subset(&other.states)
    }

    /// Restriction to the states of `space`.
    pub fn restrict_to(&self, ambient: &AmbientStructure, space: &StateSpace) -> Event {
        let _ = ambient;
        Event {
            states: self
                .states
                .iter()
                .filter(|s| space.contains_state(s))
                .cloned()
                .collect(),
            fingerprint: self.fingerprint,
        }
    }
}

/// Parses an event file: a JSON list of `{"theta": ..., "types": {agent: type}}`.
pub fn parse_event_file(ambient: &AmbientStructure, text: &str) -> Result<Event, ModelError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct StateFile {
        theta: String,
        types: OrderedMap<String>,
    }
    let raw: Vec<StateFile> = serde_json::from_str(text)?;
    let mut states = BTreeSet::new();
    for s in raw {
        let theta = ambient
            .theta_by_name(&s.theta)
            .ok_or_else(|| ModelError::UndeclaredTheta(s.theta.clone()))?;
        let mut got: Vec<String> = s.types.0.iter().map(|(k, _)| k.clone()).collect();
        got.sort();
        let mut want: Vec<String> = ambient.agents.clone();
        want.sort();
        if got != want {
            return Err(ModelError::SpaceAgentCoverage {
                space: "<event state>".to_string(),
                got,
            });
        }
        let mut profile = vec![TypeId(0); ambient.num_agents()];
        for (agent_name, type_name) in &s.types.0 {
            let a = ambient.agent_by_name(agent_name).expect("checked above");
            let t =
                ambient
                    .type_by_name(a, type_name)
                    .ok_or_else(|| ModelError::UndeclaredType {
                        agent: agent_name.clone(),
                        name: type_name.clone(),
                    })?;
            profile[a.0] = t;
        }
        states.insert(State { theta, profile });
    }
    Event::new(ambient, states)
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// A parsed model file: the ambient structure plus its named state spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedModel {
    pub ambient: AmbientStructure,
    /// Named spaces, sorted by name.
    pub spaces: Vec<(String, StateSpace)>,
}

impl LoadedModel {
    pub fn space(&self, name: &str) -> Option<&StateSpace> {
        self.spaces.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    agents: Vec<String>,
    thetas: Vec<String>,
    types: OrderedMap<Vec<String>>,
    beliefs: OrderedMap<Vec<EntryFile>>,
    #[serde(default)]
    spaces: Option<OrderedMap<OrderedMap<Vec<String>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    theta: String,
    cotypes: OrderedMap<String>,
    p: String,
}

/// Parses and validates a model file.
///
/// Checks performed: at least two agents, unique valid names, nonempty type
/// lists, exactly one belief per declared type, co-type maps covering exactly
/// the other agents, declared references only, positive-normalized masses
/// (zero-mass support points are dropped), and nonempty named spaces. The
/// resulting ambient is belief-closed by construction.
pub fn load_model(text: &str) -> Result<LoadedModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text)?;

    if file.agents.len() < 2 {
        return Err(ModelError::TooFewAgents);
    }
    if file.thetas.is_empty() {
        return Err(ModelError::NoThetas);
    }
    for kind_list in [("agent", &file.agents), ("nature state", &file.thetas)] {
        let (kind, list) = kind_list;
        let mut seen = BTreeSet::new();
        for name in list {
            if !name_ok(name) {
                return Err(ModelError::BadName(name.clone()));
            }
            if !seen.insert(name.clone()) {
                return Err(ModelError::DuplicateName {
                    kind,
                    name: name.clone(),
                });
            }
        }
    }

    // Type declarations: the map's keys must be exactly the agents.
    let mut got: Vec<String> = file.types.0.iter().map(|(k, _)| k.clone()).collect();
    got.sort();
    let mut want = file.agents.clone();
    want.sort();
    if got != want {
        return Err(ModelError::SpaceAgentCoverage {
            space: "<types>".to_string(),
            got,
        });
    }

    let mut types: Vec<TypeDecl> = Vec::new();
    let mut agent_types: Vec<Vec<TypeId>> = vec![Vec::new(); file.agents.len()];
    for (i, agent_name) in file.agents.iter().enumerate() {
        let names = &file
            .types
            .0
            .iter()
            .find(|(k, _)| k == agent_name)
            .expect("coverage checked")
            .1;
        if names.is_empty() {
            return Err(ModelError::EmptyTypeList(agent_name.clone()));
        }
        let mut seen = BTreeSet::new();
        for name in names.iter() {
            if !name_ok(name) {
                return Err(ModelError::BadName(name.clone()));
            }
            if !seen.insert(name.clone()) {
                return Err(ModelError::DuplicateName {
                    kind: "type",
                    name: name.clone(),
                });
            }
            let id = TypeId(types.len());
            types.push(TypeDecl {
                agent: AgentId(i),
                name: name.clone(),
            });
            agent_types[i].push(id);
        }
    }

    // Assemble a skeleton so name lookups work while reading beliefs.
    let mut ambient = AmbientStructure {
        agents: file.agents.clone(),
        thetas: file.thetas.clone(),
        types,
        agent_types,
        beliefs: Vec::new(),
        fingerprint: 0,
    };

    let mut beliefs: Vec<Option<Belief>> = vec![None; ambient.types.len()];
    for (key, raw_entries) in &file.beliefs.0 {
        let (agent_name, type_name) = key
            .split_once('.')
            .ok_or_else(|| ModelError::BadBeliefKey(key.clone()))?;
        let a = ambient
            .agent_by_name(agent_name)
            .ok_or_else(|| ModelError::UndeclaredAgent(agent_name.to_string()))?;
        let owner =
            ambient
                .type_by_name(a, type_name)
                .ok_or_else(|| ModelError::UndeclaredType {
                    agent: agent_name.to_string(),
                    name: type_name.to_string(),
                })?;
        if beliefs[owner.0].is_some() {
            return Err(ModelError::DuplicateName {
                kind: "belief",
                name: key.clone(),
            });
        }

        let co_agents = ambient.co_agents(a);
        let mut entries: Vec<BeliefEntry> = Vec::new();
        let mut sum = Rational::zero();
        for raw in raw_entries {
            let theta = ambient
                .theta_by_name(&raw.theta)
                .ok_or_else(|| ModelError::UndeclaredTheta(raw.theta.clone()))?;
            let mut got: Vec<String> = raw.cotypes.0.iter().map(|(k, _)| k.clone()).collect();
            got.sort();
            let mut want: Vec<String> = co_agents
                .iter()
                .map(|j| ambient.agent_name(*j).to_string())
                .collect();
            want.sort();
            if got != want {
                return Err(ModelError::CotypeCoverage {
                    owner: key.clone(),
                    got,
                });
            }
            let mut cotypes = Vec::with_capacity(co_agents.len());
            for j in &co_agents {
                let j_name = ambient.agent_name(*j);
                let type_name = &raw
                    .cotypes
                    .0
                    .iter()
                    .find(|(k, _)| k == j_name)
                    .expect("coverage checked")
                    .1;
                let t = ambient.type_by_name(*j, type_name).ok_or_else(|| {
                    ModelError::UndeclaredType {
                        agent: j_name.to_string(),
                        name: type_name.clone(),
                    }
                })?;
                cotypes.push(t);
            }
            let p = parse_rational(&raw.p)?;
            if p.is_negative() {
                return Err(ModelError::NegativeMass {
                    owner: key.clone(),
                    mass: raw.p.clone(),
                });
            }
            sum += &p;
            if p.is_zero() {
                continue; // zero mass carries no information; canonical form drops it
            }
            entries.push(BeliefEntry { theta, cotypes, p });
        }
        if !sum.is_one() {
            return Err(ModelError::ProbabilitySum {
                owner: key.clone(),
                sum: format_rational(&sum),
            });
        }
        if entries.is_empty() {
            return Err(ModelError::EmptySupport { owner: key.clone() });
        }
        entries.sort_by(|x, y| (x.theta, &x.cotypes).cmp(&(y.theta, &y.cotypes)));
        for pair in entries.windows(2) {
            if pair[0].theta == pair[1].theta && pair[0].cotypes == pair[1].cotypes {
                return Err(ModelError::DuplicateSupportPoint {
                    owner: key.clone(),
                    theta: ambient.theta_name(pair[0].theta).to_string(),
                    cotypes: pair[0]
                        .cotypes
                        .iter()
                        .map(|t| ambient.type_name(*t).to_string())
                        .collect(),
                });
            }
        }
        beliefs[owner.0] = Some(Belief { owner, entries });
    }

    for (i, b) in beliefs.iter().enumerate() {
        if b.is_none() {
            let decl = &ambient.types[i];
            return Err(ModelError::MissingBelief(format!(
                "{}.{}",
                ambient.agent_name(decl.agent),
                decl.name
            )));
        }
    }
    ambient.beliefs = beliefs.into_iter().map(|b| b.unwrap()).collect();
    ambient.fingerprint = fingerprint_of(&ambient);

    let mut spaces = Vec::new();
    if let Some(raw_spaces) = &file.spaces {
        for (space_name, sets) in &raw_spaces.0 {
            if !name_ok(space_name) {
                return Err(ModelError::BadName(space_name.clone()));
            }
            let mut got: Vec<String> = sets.0.iter().map(|(k, _)| k.clone()).collect();
            got.sort();
            let mut want = file.agents.clone();
            want.sort();
            if got != want {
                return Err(ModelError::SpaceAgentCoverage {
                    space: space_name.clone(),
                    got,
                });
            }
            let mut type_sets = vec![BTreeSet::new(); ambient.num_agents()];
            for (agent_name, names) in &sets.0 {
                let a = ambient.agent_by_name(agent_name).expect("coverage checked");
                if names.is_empty() {
                    return Err(ModelError::EmptySpaceComponent {
                        space: space_name.clone(),
                        agent: agent_name.clone(),
                    });
                }
                for name in names {
                    let t = ambient.type_by_name(a, name).ok_or_else(|| {
                        ModelError::UndeclaredType {
                            agent: agent_name.clone(),
                            name: name.clone(),
                        }
                    })?;
                    type_sets[a.0].insert(t);
                }
            }
            spaces.push((
                space_name.clone(),
                StateSpace {
                    type_sets,
                    fingerprint: ambient.fingerprint,
                },
            ));
        }
    }
    spaces.sort_by(|x, y| x.0.cmp(&y.0));

    Ok(LoadedModel { ambient, spaces })
}

/// Canonical serialization: sorted object keys, belief entries in canonical
/// order, rationals in lowest terms. `load_model(serialize_model(m)) == m`.
pub fn serialize_model(model: &LoadedModel) -> String {
    use serde_json::{json, Map, Value};
    let ambient = &model.ambient;

    let mut types = Map::new();
    for a in ambient.agent_ids() {
        types.insert(
            ambient.agent_name(a).to_string(),
            json!(ambient
                .types_of(a)
                .iter()
                .map(|t| ambient.type_name(*t))
                .collect::<Vec<_>>()),
        );
    }

    let mut beliefs = Map::new();
    for a in ambient.agent_ids() {
        let co_agents = ambient.co_agents(a);
        for &t in ambient.types_of(a) {
            let entries: Vec<Value> = ambient
                .belief(t)
                .entries
                .iter()
                .map(|e| {
                    let mut cotypes = Map::new();
                    for (slot, j) in co_agents.iter().enumerate() {
                        cotypes.insert(
                            ambient.agent_name(*j).to_string(),
                            json!(ambient.type_name(e.cotypes[slot])),
                        );
                    }
                    json!({
                        "theta": ambient.theta_name(e.theta),
                        "cotypes": Value::Object(cotypes),
                        "p": format_rational(&e.p),
                    })
                })
                .collect();
            beliefs.insert(
                format!("{}.{}", ambient.agent_name(a), ambient.type_name(t)),
                json!(entries),
            );
        }
    }

    let mut spaces = Map::new();
    for (name, space) in &model.spaces {
        let mut sets = Map::new();
        for a in ambient.agent_ids() {
            sets.insert(
                ambient.agent_name(a).to_string(),
                json!(space
                    .type_set(a)
                    .iter()
                    .map(|t| ambient.type_name(*t))
                    .collect::<Vec<_>>()),
            );
        }
        spaces.insert(name.clone(), Value::Object(sets));
    }

    let value = json!({
        "agents": ambient.agents,
        "thetas": ambient.thetas,
        "types": Value::Object(types),
        "beliefs": Value::Object(beliefs),
        "spaces": Value::Object(spaces),
    });
    let mut out = serde_json::to_string_pretty(&value).expect("serialization cannot fail");
    out.push('\n');
    out
}

fn fingerprint_of(ambient: &AmbientStructure) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(ambient.agents.join("\0"));
    hasher.update([0xff]);
    hasher.update(ambient.thetas.join("\0"));
    hasher.update([0xff]);
    for decl in &ambient.types {
        hasher.update(decl.agent.0.to_le_bytes());
        hasher.update(decl.name.as_bytes());
        hasher.update([0]);
    }
    for b in &ambient.beliefs {
        hasher.update(b.owner.0.to_le_bytes());
        for e in &b.entries {
            hasher.update(e.theta.0.to_le_bytes());
            for t in &e.cotypes {
                hasher.update(t.0.to_le_bytes());
            }
            hasher.update(format_rational(&e.p).as_bytes());
            hasher.update([0]);
        }
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn rational_parsing_normalizes() {
        assert_eq!(parse_rational("2/4").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rational("-6/4").unwrap(), rat(-3, 2));
        assert_eq!(format_rational(&rat(1, 2)), "1/2");
        assert_eq!(format_rational(&rat(2, 1)), "2/1");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn u4_loads_with_expected_shape() {
        let model = fixtures::u4();
        let ambient = &model.ambient;
        assert_eq!(ambient.num_agents(), 2);
        assert_eq!(ambient.num_thetas(), 2);
        assert_eq!(ambient.num_types(), 4);

        let a = ambient.agent_by_name("a").unwrap();
        let b = ambient.agent_by_name("b").unwrap();
        let t_r_a = ambient.type_by_name(a, "t_r_a").unwrap();
        let t_r_b = ambient.type_by_name(b, "t_r_b").unwrap();
        let theta_r = ambient.theta_by_name("theta_r").unwrap();

        // Point belief: certainty of rain and of the rain co-type.
        let belief = ambient.belief(t_r_a);
        assert_eq!(belief.entries.len(), 1);
        assert_eq!(belief.entries[0].theta, theta_r);
        assert_eq!(belief.entries[0].cotypes, vec![t_r_b]);
        assert!(belief.entries[0].p.is_one());

        let omega_real = model.space("omega_real").unwrap();
        assert_eq!(omega_real.type_set(a).len(), 1);
        assert_eq!(omega_real.type_set(b).len(), 1);
        // The real space is a 2-state product: one type per agent, both thetas.
        assert_eq!(omega_real.num_states(ambient), 2);

        let full = model.space("full").unwrap();
        assert_eq!(full.num_states(ambient), 8);
    }

    #[test]
    fn u8_loads_with_mixture_beliefs() {
        let model = fixtures::u8_redundant();
        let ambient = &model.ambient;
        assert_eq!(ambient.num_types(), 8);
        let a = ambient.agent_by_name("a").unwrap();
        let t_half_a = ambient.type_by_name(a, "t_half_a").unwrap();
        let belief = ambient.belief(t_half_a);
        assert_eq!(belief.entries.len(), 2);
        assert!(belief.entries.iter().all(|e| e.p == rat(1, 2)));
    }

    #[test]
    fn duplicate_json_keys_are_rejected() {
        let text = fixtures::U4_JSON.replace(
            "\"omega_real\"",
            "\"full\"", // produces two "full" space keys
        );
        let err = load_model(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate key"), "{err}");
    }

    #[test]
    fn belief_mass_must_sum_to_one() {
        let text = fixtures::U4_JSON.replace(
            "{ \"theta\": \"theta_r\", \"cotypes\": { \"b\": \"t_r_b\" }, \"p\": \"1/1\" }",
            "{ \"theta\": \"theta_r\", \"cotypes\": { \"b\": \"t_r_b\" }, \"p\": \"2/3\" }",
        );
        match load_model(&text) {
            Err(ModelError::ProbabilitySum { owner, sum }) => {
                assert_eq!(owner, "a.t_r_a");
                assert_eq!(sum, "2/3");
            }
            other => panic!("expected probability-sum error, got {other:?}"),
        }
    }

    #[test]
    fn undeclared_references_are_rejected() {
        let text = fixtures::U4_JSON.replace(
            "\"b\": \"t_r_b\" }, \"p\": \"1/1\"",
            "\"b\": \"t_x_b\" }, \"p\": \"1/1\"",
        );
        match load_model(&text) {
            Err(ModelError::UndeclaredType { name, .. }) => assert_eq!(name, "t_x_b"),
            other => panic!("expected undeclared-type error, got {other:?}"),
        }
    }

    #[test]
    fn empty_space_component_is_rejected() {
        let text = fixtures::U4_JSON.replace("\"a\": [\"t_r_a\"]", "\"a\": []");
        match load_model(&text) {
            Err(ModelError::EmptySpaceComponent { space, agent }) => {
                assert_eq!(space, "omega_real");
                assert_eq!(agent, "a");
            }
            other => panic!("expected empty-component error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_identity_on_canonical_form() {
        for text in [fixtures::U4_JSON, fixtures::U8_JSON, fixtures::MIXTURE_JSON] {
            let model = load_model(text).unwrap();
            let canonical = serialize_model(&model);
            let reloaded = load_model(&canonical).unwrap();
            assert_eq!(model, reloaded);
            assert_eq!(serialize_model(&reloaded), canonical);
        }
    }

    #[test]
    fn zero_mass_entries_are_dropped() {
        let text = fixtures::U4_JSON.replace(
            "[ { \"theta\": \"theta_r\", \"cotypes\": { \"b\": \"t_r_b\" }, \"p\": \"1/1\" } ]",
            "[ { \"theta\": \"theta_r\", \"cotypes\": { \"b\": \"t_r_b\" }, \"p\": \"1/1\" }, { \"theta\": \"theta_n\", \"cotypes\": { \"b\": \"t_n_b\" }, \"p\": \"0/1\" } ]",
        );
        let model = load_model(&text).unwrap();
        let ambient = &model.ambient;
        let a = ambient.agent_by_name("a").unwrap();
        let t_r_a = ambient.type_by_name(a, "t_r_a").unwrap();
        assert_eq!(ambient.belief(t_r_a).entries.len(), 1);
    }

    #[test]
    fn ambient_belief_closure_detects_dangling_support() {
        // Remove t_n_a from agent a's list while t_n_b still believes it.
        let model = fixtures::u4();
        let mut ambient = model.ambient.clone();
        let a = ambient.agent_by_name("a").unwrap();
        let b = ambient.agent_by_name("b").unwrap();
        let t_n_a = ambient.type_by_name(a, "t_n_a").unwrap();
        let t_n_b = ambient.type_by_name(b, "t_n_b").unwrap();
        ambient.agent_types[a.0].retain(|t| *t != t_n_a);

        let witness = ambient.validate_belief_closure().unwrap_err();
        assert_eq!(witness.owner, t_n_b);
        assert_eq!(witness.offending, t_n_a);
        assert_eq!(witness.support, vec![t_n_a]);

        assert!(model.ambient.validate_belief_closure().is_ok());
    }

    #[test]
    fn space_closure_violation_reports_first_escape() {
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let omega_real = model.space("omega_real").unwrap();
        let violation = omega_real.belief_closure_violation(ambient).unwrap();
        let a = ambient.agent_by_name("a").unwrap();
        let b = ambient.agent_by_name("b").unwrap();
        assert_eq!(violation.owner, ambient.type_by_name(a, "t_r_a").unwrap());
        assert_eq!(
            violation.offending,
            ambient.type_by_name(b, "t_r_b").unwrap()
        );

        assert!(model.space("full").unwrap().is_belief_closed(ambient));
    }

    #[test]
    fn state_enumeration_is_sorted_and_complete() {
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let full = model.space("full").unwrap();
        let states = full.states(ambient);
        assert_eq!(states.len(), 8);
        let mut sorted = states.clone();
        sorted.sort();
        assert_eq!(states, sorted);
        assert!(states.iter().all(|s| full.contains_state(s)));
    }

    #[test]
    fn state_keys_round_trip() {
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let full = model.space("full").unwrap();
        for state in full.states(ambient) {
            let key = ambient.state_key(&state);
            assert_eq!(ambient.parse_state_key(&key).unwrap(), state);
        }
        assert!(ambient.parse_state_key("theta_r,t_r_a").is_err());
    }

    #[test]
    fn structure_subset_is_componentwise() {
        let model = fixtures::u4();
        let omega_real = model.space("omega_real").unwrap();
        let full = model.space("full").unwrap();
        assert!(structure_subset(omega_real, full).unwrap());
        assert!(!structure_subset(full, omega_real).unwrap());
        assert!(structure_subset(omega_real, omega_real).unwrap());

        let other = fixtures::u8_redundant();
        let err = structure_subset(omega_real, other.space("full").unwrap()).unwrap_err();
        assert!(matches!(err, ModelError::AmbientMismatch));
    }

    #[test]
    fn event_files_parse_into_sorted_states() {
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let text = r#"[
            {"theta": "theta_r", "types": {"a": "t_r_a", "b": "t_r_b"}},
            {"theta": "theta_n", "types": {"a": "t_n_a", "b": "t_n_b"}}
        ]"#;
        let event = parse_event_file(ambient, text).unwrap();
        assert_eq!(event.len(), 2);
        let keys: Vec<String> = event
            .states()
            .iter()
            .map(|s| ambient.state_key(s))
            .collect();
        assert_eq!(keys, vec!["theta_r,t_r_a,t_r_b", "theta_n,t_n_a,t_n_b"]);
    }
}
