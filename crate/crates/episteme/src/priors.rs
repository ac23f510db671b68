//! Common priors and consistent priors, decided by exact linear programs.
//!
//! A *common prior* for a belief-closed space is a single distribution over
//! its states whose conditionals on each type's column reproduce that type's
//! belief, with every column carrying positive mass. A *consistent prior*
//! ties a distribution on one designated space to a profile of owned
//! structures: it must be strictly positive everywhere and proportional to
//! each owner's common prior on the overlap.
//!
//! Strict positivity is decided by slack maximization: the solver maximizes
//! the least required mass δ, and strict feasibility holds exactly when the
//! optimum is positive. Everything runs in exact rational arithmetic, so a
//! reported optimum of zero really is zero.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::closure::AgentDependentStructure;
use crate::linprog::{LinearProgram, LpOutcome, Relation};
use crate::model::{
    format_rational, parse_rational, rat, AgentId, AmbientStructure, Event, ModelError, Rational,
    State, StateSpace, TypeId,
};

/// A probability distribution over the states of one product space. Every
/// state of the space has an explicit (possibly zero) mass; masses are
/// nonnegative and sum to one exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prior {
    space: StateSpace,
    mass: BTreeMap<State, Rational>,
}

impl Prior {
    /// Validates and normalizes a mass assignment: keys must be states of
    /// `space`, masses nonnegative with total exactly one. States of the
    /// space missing from the map are filled in with zero mass.
    pub fn new(
        ambient: &AmbientStructure,
        space: StateSpace,
        mass: BTreeMap<State, Rational>,
    ) -> Result<Self, ModelError> {
        if space.fingerprint() != ambient.fingerprint() {
            return Err(ModelError::AmbientMismatch);
        }
        // Malformed states (wrong arity, foreign ids) are caught here before
        // any of them is formatted into an error message.
        Event::new(ambient, mass.keys().cloned().collect())?;
        let mut total = Rational::zero();
        for (s, m) in &mass {
            if !space.contains_state(s) {
                return Err(ModelError::PriorStateOutsideSpace {
                    state: ambient.state_key(s),
                });
            }
            if m.is_negative() {
                return Err(ModelError::NegativePriorMass {
                    state: ambient.state_key(s),
                });
            }
            total += m;
        }
        if total != rat(1, 1) {
            return Err(ModelError::PriorMassSum {
                sum: format_rational(&total),
            });
        }
        let mass = space
            .states(ambient)
            .into_iter()
            .map(|s| {
                let m = mass.get(&s).cloned().unwrap_or_else(Rational::zero);
                (s, m)
            })
            .collect();
        Ok(Prior { space, mass })
    }

    /// The uniform distribution over the space's states.
    pub fn uniform(ambient: &AmbientStructure, space: StateSpace) -> Prior {
        let states = space.states(ambient);
        let each = Rational::new(1.into(), (states.len() as i64).into());
        let mass = states.into_iter().map(|s| (s, each.clone())).collect();
        Prior { space, mass }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Mass of one state; zero for states outside the space.
    pub fn mass(&self, s: &State) -> Rational {
        self.mass.get(s).cloned().unwrap_or_else(Rational::zero)
    }

    /// All masses, keyed by state in sorted order.
    pub fn masses(&self) -> &BTreeMap<State, Rational> {
        &self.mass
    }

    /// Total mass of the column of states whose owner coordinate is `t`.
    pub fn column_mass(&self, ambient: &AmbientStructure, t: TypeId) -> Rational {
        let i = ambient.type_agent(t);
        self.mass
            .iter()
            .filter(|(s, _)| s.profile[i.0] == t)
            .fold(Rational::zero(), |acc, (_, m)| acc + m)
    }
}

/// Result of a prior-existence decision. `feasible` is the verdict; the
/// other fields carry whatever evidence the solve produced. When the weak
/// system is solvable but only with zero slack, the boundary maximizer is
/// still returned (with `feasible == false`) as a witness of how close the
/// space comes to admitting a prior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityResult {
    pub feasible: bool,
    /// The slack-maximizing distribution, present whenever the equality
    /// system is solvable at all.
    pub prior: Option<Prior>,
    /// The optimal slack δ*; the verdict is exactly `δ* > 0`.
    pub slack: Option<Rational>,
    /// Present when even the weak system has no solution.
    pub certificate: Option<ConflictCertificate>,
}

/// A checkable witness that a prior system is unsolvable: nonzero
/// multipliers over the named constraint rows whose weighted combination
/// has nonnegative coefficients on every mass variable yet a negative
/// right-hand side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictCertificate {
    pub rows: Vec<(String, Rational)>,
}

/// Verdict of re-checking a distribution against the common-prior
/// conditions, in scan order (agents, then their types, then states).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommonPriorVerdict {
    Valid,
    /// Some type's column carries no mass, so its conditional is undefined.
    ZeroColumn { type_id: TypeId },
    /// A state's mass differs from the owning type's belief times the
    /// column mass.
    ConditionalMismatch { type_id: TypeId, state: State },
}

impl CommonPriorVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, CommonPriorVerdict::Valid)
    }

    pub fn describe(&self, ambient: &AmbientStructure) -> String {
        match self {
            CommonPriorVerdict::Valid => "valid common prior".to_string(),
            CommonPriorVerdict::ZeroColumn { type_id } => format!(
                "type {:?} carries zero total mass",
                ambient.type_name(*type_id)
            ),
            CommonPriorVerdict::ConditionalMismatch { type_id, state } => format!(
                "mass at {:?} does not match the conditional of {:?}",
                ambient.state_key(state),
                ambient.type_name(*type_id)
            ),
        }
    }
}

/// Checks the two common-prior conditions exactly: every type column of the
/// prior's space has positive mass, and each state's mass equals the owning
/// type's belief at that state times the column mass. Returns the first
/// failure in scan order.
pub fn check_common_prior(ambient: &AmbientStructure, prior: &Prior) -> CommonPriorVerdict {
    assert_eq!(
        prior.space().fingerprint(),
        ambient.fingerprint(),
        "ambient mismatch"
    );
    let states = prior.space().states(ambient);
    for i in ambient.agent_ids() {
        for &t in prior.space().type_set(i) {
            let column = prior.column_mass(ambient, t);
            if column.is_zero() {
                return CommonPriorVerdict::ZeroColumn { type_id: t };
            }
            let belief: BTreeMap<State, Rational> =
                ambient.introspective_belief(t).into_iter().collect();
            for s in states.iter().filter(|s| s.profile[i.0] == t) {
                let expected = belief
                    .get(s)
                    .map(|p| p * &column)
                    .unwrap_or_else(Rational::zero);
                if prior.mass(s) != expected {
                    return CommonPriorVerdict::ConditionalMismatch {
                        type_id: t,
                        state: s.clone(),
                    };
                }
            }
        }
    }
    CommonPriorVerdict::Valid
}

/// A linear program whose rows carry human-readable labels, so that an
/// infeasibility certificate can name the rows it combines.
struct LabeledProgram {
    lp: LinearProgram,
    labels: Vec<String>,
}

impl LabeledProgram {
    fn new(num_vars: usize) -> Self {
        LabeledProgram {
            lp: LinearProgram::new(num_vars),
            labels: Vec::new(),
        }
    }

    fn constrain(&mut self, label: String, coeffs: Vec<Rational>, rel: Relation, rhs: Rational) {
        self.lp.constrain(coeffs, rel, rhs);
        self.labels.push(label);
    }

    /// Maximizes and folds the outcome into a [`FeasibilityResult`], building
    /// the prior from the leading `num_states` variables and reading the
    /// slack from the objective value.
    fn solve(
        self,
        ambient: &AmbientStructure,
        space: &StateSpace,
        states: &[State],
    ) -> FeasibilityResult {
        match self.lp.maximize() {
            LpOutcome::Optimal { x, value } => {
                let mass: BTreeMap<State, Rational> = states
                    .iter()
                    .cloned()
                    .zip(x.iter().cloned())
                    .collect();
                let prior = Prior::new(ambient, space.clone(), mass)
                    .expect("the solver's rows force a distribution");
                FeasibilityResult {
                    feasible: value.is_positive(),
                    prior: Some(prior),
                    slack: Some(value),
                    certificate: None,
                }
            }
            LpOutcome::Infeasible { multipliers } => {
                let rows = self
                    .labels
                    .into_iter()
                    .zip(multipliers)
                    .filter(|(_, y)| !y.is_zero())
                    .collect();
                FeasibilityResult {
                    feasible: false,
                    prior: None,
                    slack: None,
                    certificate: Some(ConflictCertificate { rows }),
                }
            }
            LpOutcome::Unbounded => unreachable!("slack is capped by the total-mass row"),
        }
    }
}

/// Decides whether `w` admits a common prior, by maximizing the least
/// column mass subject to the conditional equalities and total mass one.
///
/// `w` must be belief-closed: a type whose belief leaves the space has
/// conditionals that cannot even be written down within it.
pub fn find_common_prior(
    ambient: &AmbientStructure,
    w: &StateSpace,
) -> Result<FeasibilityResult, ModelError> {
    if w.fingerprint() != ambient.fingerprint() {
        return Err(ModelError::AmbientMismatch);
    }
    if let Some(v) = w.belief_closure_violation(ambient) {
        return Err(ModelError::StructureNotClosed {
            owner: ambient
                .agent_name(ambient.type_agent(v.owner))
                .to_string(),
            type_name: ambient.type_name(v.owner).to_string(),
            offending: ambient.type_name(v.offending).to_string(),
        });
    }
    let states = w.states(ambient);
    let index: BTreeMap<&State, usize> = states.iter().zip(0..).collect();
    let n = states.len();
    let slack = n; // δ is the last variable
    let mut program = LabeledProgram::new(n + 1);
    let mut objective = vec![Rational::zero(); n + 1];
    objective[slack] = rat(1, 1);
    program.lp.set_objective(objective);

    // Conditional equalities: each state's mass is the owning type's belief
    // there times the type's column mass.
    for i in ambient.agent_ids() {
        for &t in w.type_set(i) {
            let belief: BTreeMap<State, Rational> =
                ambient.introspective_belief(t).into_iter().collect();
            let column: Vec<usize> = states
                .iter()
                .enumerate()
                .filter(|(_, s)| s.profile[i.0] == t)
                .map(|(k, _)| k)
                .collect();
            for s in states.iter().filter(|s| s.profile[i.0] == t) {
                let beta = belief.get(s).cloned().unwrap_or_else(Rational::zero);
                let mut coeffs = vec![Rational::zero(); n + 1];
                for &k in &column {
                    coeffs[k] -= &beta;
                }
                coeffs[index[s]] += rat(1, 1);
                program.constrain(
                    format!(
                        "conditional {} at {}",
                        ambient.type_name(t),
                        ambient.state_key(s)
                    ),
                    coeffs,
                    Relation::Eq,
                    Rational::zero(),
                );
            }
            // Column floor: this type's total mass stays above the slack.
            let mut coeffs = vec![Rational::zero(); n + 1];
            for &k in &column {
                coeffs[k] = rat(1, 1);
            }
            coeffs[slack] = rat(-1, 1);
            program.constrain(
                format!("floor {}", ambient.type_name(t)),
                coeffs,
                Relation::Ge,
                Rational::zero(),
            );
        }
    }
    let mut coeffs = vec![rat(1, 1); n + 1];
    coeffs[slack] = Rational::zero();
    program.constrain("total mass".to_string(), coeffs, Relation::Eq, rat(1, 1));

    let result = program.solve(ambient, w, &states);
    if result.feasible {
        let prior = result.prior.as_ref().expect("feasible result has a prior");
        assert!(
            check_common_prior(ambient, prior).is_valid(),
            "returned prior must reproduce every conditional"
        );
    }
    Ok(result)
}

/// Verdict of checking a designated-space distribution against a profile of
/// owned structures and their common priors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsistencyVerdict {
    Consistent,
    /// The distribution must be strictly positive on its whole space.
    ZeroMass { state: State },
    /// On the overlap with an owner's structure, the distribution is not
    /// proportional to that owner's prior.
    RatioMismatch {
        agent: AgentId,
        state_a: State,
        state_b: State,
    },
}

impl ConsistencyVerdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, ConsistencyVerdict::Consistent)
    }

    pub fn describe(&self, ambient: &AmbientStructure) -> String {
        match self {
            ConsistencyVerdict::Consistent => "consistent prior".to_string(),
            ConsistencyVerdict::ZeroMass { state } => {
                format!("zero mass at {:?}", ambient.state_key(state))
            }
            ConsistencyVerdict::RatioMismatch {
                agent,
                state_a,
                state_b,
            } => format!(
                "mass ratio of {:?} to {:?} differs from {:?}'s prior",
                ambient.state_key(state_a),
                ambient.state_key(state_b),
                ambient.agent_name(*agent)
            ),
        }
    }
}

/// Validates a profile of (structure, prior) pairs: every agent owns exactly
/// one structure, each prior lives on its structure's space, and each prior
/// really is a common prior there. Returns the entries sorted by owner.
fn validate_profile<'a>(
    ambient: &AmbientStructure,
    profile: &'a [(AgentDependentStructure, Prior)],
) -> Result<Vec<&'a (AgentDependentStructure, Prior)>, ModelError> {
    let mut owners: Vec<AgentId> = Vec::new();
    for (structure, prior) in profile {
        if structure.space().fingerprint() != ambient.fingerprint()
            || prior.space().fingerprint() != ambient.fingerprint()
        {
            return Err(ModelError::AmbientMismatch);
        }
        owners.push(structure.owner());
    }
    let mut sorted_owners = owners.clone();
    sorted_owners.sort();
    sorted_owners.dedup();
    if sorted_owners.len() != ambient.num_agents() || owners.len() != ambient.num_agents() {
        return Err(ModelError::ProfileOwnerCoverage {
            got: owners
                .iter()
                .map(|a| ambient.agent_name(*a).to_string())
                .collect(),
        });
    }
    for (structure, prior) in profile {
        let owner = ambient.agent_name(structure.owner()).to_string();
        if prior.space() != structure.space() {
            return Err(ModelError::PriorDomainMismatch { owner });
        }
        let verdict = check_common_prior(ambient, prior);
        if !verdict.is_valid() {
            return Err(ModelError::ProfilePriorInvalid {
                owner,
                reason: verdict.describe(ambient),
            });
        }
    }
    let mut sorted: Vec<&(AgentDependentStructure, Prior)> = profile.iter().collect();
    sorted.sort_by_key(|(structure, _)| structure.owner());
    Ok(sorted)
}

/// States of `space` that also lie in `other` (both are products over the
/// same nature states, so this is the product of the componentwise
/// intersections).
fn overlap_states(ambient: &AmbientStructure, space: &StateSpace, other: &StateSpace) -> Vec<State> {
    space
        .states(ambient)
        .into_iter()
        .filter(|s| other.contains_state(s))
        .collect()
}

/// Checks whether `pi` is a consistent prior for the profile: strictly
/// positive on its space, and on each overlap with an owner's structure
/// proportional to that owner's common prior (as cross products, so zero
/// masses need no special cases). Returns the first violation in scan
/// order.
pub fn check_consistent_prior(
    ambient: &AmbientStructure,
    pi: &Prior,
    profile: &[(AgentDependentStructure, Prior)],
) -> Result<ConsistencyVerdict, ModelError> {
    if pi.space().fingerprint() != ambient.fingerprint() {
        return Err(ModelError::AmbientMismatch);
    }
    let sorted = validate_profile(ambient, profile)?;
    for s in pi.space().states(ambient) {
        if pi.mass(&s).is_zero() {
            return Ok(ConsistencyVerdict::ZeroMass { state: s });
        }
    }
    for (structure, prior) in sorted {
        let overlap = overlap_states(ambient, pi.space(), structure.space());
        for (k, a) in overlap.iter().enumerate() {
            for b in &overlap[k + 1..] {
                if pi.mass(a) * prior.mass(b) != pi.mass(b) * prior.mass(a) {
                    return Ok(ConsistencyVerdict::RatioMismatch {
                        agent: structure.owner(),
                        state_a: a.clone(),
                        state_b: b.clone(),
                    });
                }
            }
        }
    }
    Ok(ConsistencyVerdict::Consistent)
}

/// Searches for a consistent prior on `w` for the given profile, maximizing
/// the least state mass. Strict positivity holds exactly when the optimal
/// slack is positive; the proportionality requirements are equality rows.
pub fn find_consistent_prior(
    ambient: &AmbientStructure,
    w: &StateSpace,
    profile: &[(AgentDependentStructure, Prior)],
) -> Result<FeasibilityResult, ModelError> {
    if w.fingerprint() != ambient.fingerprint() {
        return Err(ModelError::AmbientMismatch);
    }
    let sorted = validate_profile(ambient, profile)?;
    let states = w.states(ambient);
    let index: BTreeMap<&State, usize> = states.iter().zip(0..).collect();
    let n = states.len();
    let slack = n;
    let mut program = LabeledProgram::new(n + 1);
    let mut objective = vec![Rational::zero(); n + 1];
    objective[slack] = rat(1, 1);
    program.lp.set_objective(objective);

    let mut coeffs = vec![rat(1, 1); n + 1];
    coeffs[slack] = Rational::zero();
    program.constrain("total mass".to_string(), coeffs, Relation::Eq, rat(1, 1));
    for (k, s) in states.iter().enumerate() {
        let mut coeffs = vec![Rational::zero(); n + 1];
        coeffs[k] = rat(1, 1);
        coeffs[slack] = rat(-1, 1);
        program.constrain(
            format!("floor {}", ambient.state_key(s)),
            coeffs,
            Relation::Ge,
            Rational::zero(),
        );
    }
    for (structure, prior) in &sorted {
        let overlap = overlap_states(ambient, w, structure.space());
        for (k, a) in overlap.iter().enumerate() {
            for b in &overlap[k + 1..] {
                let mut coeffs = vec![Rational::zero(); n + 1];
                coeffs[index[a]] += prior.mass(b);
                coeffs[index[b]] -= prior.mass(a);
                program.constrain(
                    format!(
                        "ratio {}: {} vs {}",
                        ambient.agent_name(structure.owner()),
                        ambient.state_key(a),
                        ambient.state_key(b)
                    ),
                    coeffs,
                    Relation::Eq,
                    Rational::zero(),
                );
            }
        }
    }

    let result = program.solve(ambient, w, &states);
    if result.feasible {
        let prior = result.prior.as_ref().expect("feasible result has a prior");
        let verdict = check_consistent_prior(ambient, prior, profile)?;
        assert!(
            verdict.is_consistent(),
            "returned prior must pass the consistency check"
        );
    }
    Ok(result)
}

/// Parses a prior file — a JSON map from state key to mass, e.g.
/// `{"theta_r,t_r_a,t_n_b": "1/2", ...}` — as a distribution on `space`.
/// Omitted states get zero mass; the usual prior validation applies.
pub fn parse_prior_file(
    ambient: &AmbientStructure,
    space: StateSpace,
    text: &str,
) -> Result<Prior, ModelError> {
    let raw: BTreeMap<String, String> = serde_json::from_str(text)?;
    let mut mass = BTreeMap::new();
    for (key, value) in raw {
        let state = ambient.parse_state_key(&key)?;
        mass.insert(state, parse_rational(&value)?);
    }
    Prior::new(ambient, space, mass)
}
