//! Trades, acceptance semantics, speculation search, and the no-trade check.
//!
//! A trade is a budget-balanced vector of state-contingent transfers on the
//! ambient product, so it restricts coherently to every owned structure.
//! Risk-neutral types value a trade by their introspective belief over the
//! evaluation space, and two acceptance readings are implemented side by
//! side:
//!
//! * **S1** (willingness): every owner's every real type clears the gain
//!   threshold in her own structure.
//! * **S2** (common-belief coverage): within each owner's structure, the
//!   event "every coordinate type accepts" must be commonly believed by all
//!   of the owner's real types.
//!
//! The search routines are exact linear programs over payoff variables
//! capped to `[-1, 1]` (budget balance keeps zero-sum rows exact; the cap
//! makes "maximize the least gain" bounded). S2 search enumerates
//! per-structure acceptance patterns in deterministic order and solves one
//! sign-constrained program per pattern.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};

use crate::closure::{classify_profile, AgentDependentStructure};
use crate::epistemics::{real_cb, CbDepth};
use crate::linprog::{LinearProgram, LpOutcome, Relation};
use crate::model::{
    format_rational, parse_rational, rat, AgentId, AmbientStructure, Event, ModelError, Rational,
    State, StateSpace, TypeId,
};
use crate::priors::{check_consistent_prior, ConsistencyVerdict, Prior};

/// Budget-balanced state-contingent transfers: at every ambient state the
/// agents' payoffs sum to exactly zero. States absent from the map pay
/// nothing to anyone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trade {
    payoffs: BTreeMap<(AgentId, State), Rational>,
}

impl Trade {
    /// Validates states and budget balance. Zero entries are dropped so that
    /// equal trades compare equal regardless of how they were written.
    pub fn new(
        ambient: &AmbientStructure,
        payoffs: BTreeMap<(AgentId, State), Rational>,
    ) -> Result<Self, ModelError> {
        Event::new(
            ambient,
            payoffs.keys().map(|(_, s)| s.clone()).collect(),
        )?;
        let mut by_state: BTreeMap<&State, Rational> = BTreeMap::new();
        for ((_, s), p) in &payoffs {
            *by_state.entry(s).or_insert_with(Rational::zero) += p;
        }
        for (s, sum) in by_state {
            if !sum.is_zero() {
                return Err(ModelError::TradeImbalance {
                    state: ambient.state_key(s),
                    sum: format_rational(&sum),
                });
            }
        }
        Ok(Trade {
            payoffs: payoffs.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        })
    }

    /// The trade that transfers nothing anywhere.
    pub fn zero() -> Trade {
        Trade {
            payoffs: BTreeMap::new(),
        }
    }

    /// Payoff to `a` at state `s`; zero when unspecified.
    pub fn payoff(&self, a: AgentId, s: &State) -> Rational {
        self.payoffs
            .get(&(a, s.clone()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn payoffs(&self) -> &BTreeMap<(AgentId, State), Rational> {
        &self.payoffs
    }

    /// Pointwise scaling. Positive factors preserve budget balance and every
    /// acceptance verdict; that invariance is what makes the `[-1, 1]`
    /// normalization of the search harmless.
    pub fn scale(&self, factor: &Rational) -> Trade {
        Trade {
            payoffs: self
                .payoffs
                .iter()
                .filter(|(_, p)| !(*p * factor).is_zero())
                .map(|(k, p)| (k.clone(), p * factor))
                .collect(),
        }
    }
}

/// Parses a trade file: a JSON map from `"agent@state"` keys to rational
/// payoffs, e.g. `{"a@theta_r,t_r_a,t_r_b": "1", "b@theta_r,t_r_a,t_r_b": "-1"}`.
pub fn parse_trade_file(ambient: &AmbientStructure, text: &str) -> Result<Trade, ModelError> {
    let raw: BTreeMap<String, String> = serde_json::from_str(text)?;
    let mut payoffs = BTreeMap::new();
    for (key, value) in raw {
        let (agent, state) = key
            .split_once('@')
            .ok_or_else(|| ModelError::BadTradeKey(key.clone()))?;
        let a = ambient
            .agent_by_name(agent)
            .ok_or_else(|| ModelError::UndeclaredAgent(agent.to_string()))?;
        let s = ambient.parse_state_key(state)?;
        payoffs.insert((a, s), parse_rational(&value)?);
    }
    Trade::new(ambient, payoffs)
}

/// Which reading of "the trade is accepted" applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceMode {
    /// Willingness: every owner's every real type clears the threshold.
    S1,
    /// Coverage: in each owner's structure, acceptance by the full type
    /// profile must be commonly believed by all real types.
    S2,
}

/// Gain threshold for an individual type to accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    /// Accept only strictly profitable trades.
    Strict,
    /// Accept break-even trades too.
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TradeSemantics {
    pub mode: AcceptanceMode,
    pub threshold: Threshold,
}

impl TradeSemantics {
    fn accepts(&self, gain: &Rational) -> bool {
        match self.threshold {
            Threshold::Strict => gain.is_positive(),
            Threshold::Weak => !gain.is_negative(),
        }
    }
}

/// Expected payoff of the trade to `t`'s agent under `t`'s introspective
/// belief, summed over the states of `within`. Belief mass on states outside
/// `within` contributes nothing.
pub fn expected_gain(
    ambient: &AmbientStructure,
    t: TypeId,
    x: &Trade,
    within: &StateSpace,
) -> Result<Rational, ModelError> {
    let owner = ambient.type_agent(t);
    if !within.type_set(owner).contains(&t) {
        return Err(ModelError::TypeOutsideSpace {
            type_name: ambient.type_name(t).to_string(),
        });
    }
    Ok(ambient
        .introspective_belief(t)
        .into_iter()
        .filter(|(s, _)| within.contains_state(s))
        .fold(Rational::zero(), |acc, (s, p)| {
            acc + p * x.payoff(owner, &s)
        }))
}

/// One type's view of a trade inside one structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeAssessment {
    pub gain: Rational,
    pub accepts: bool,
}

/// A trade evaluated inside one owned structure: gains and accept flags for
/// every member type, plus the owner's real types that commonly believe the
/// all-accept event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureReport {
    pub owner: AgentId,
    pub assessments: BTreeMap<TypeId, TypeAssessment>,
    /// Real types of the owner in the fixed point of correct belief of the
    /// acceptance event — the S2 coverage set, reported under S1 too.
    pub real_commonly_accepting: BTreeSet<TypeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeVerdict {
    /// Some owner fails the semantics' qualification.
    None,
    /// Every owner qualifies, but only with break-even real types.
    Weak,
    /// Every owner qualifies and every real type strictly gains.
    Speculative,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptanceReport {
    pub semantics: TradeSemantics,
    /// One report per structure, sorted by owner.
    pub structures: Vec<StructureReport>,
    pub verdict: TradeVerdict,
}

/// Maps a profile's taxonomy to the matching trade-consequence cell:
/// degenerate common profiles fall under the classical no-trade theorem,
/// non-degenerate common ones under the agent-dependent generalization,
/// profiles differing across owners admit speculative trade, and a
/// degenerate profile can never disagree (closures of the same space that
/// add nothing are that space).
pub fn table2_cell(taxonomy: &crate::closure::ProfileTaxonomy) -> &'static str {
    match (taxonomy.degenerate, taxonomy.common) {
        (true, true) => "no-trade-milgrom-stokey",
        (true, false) => "excluded",
        (false, true) => "no-trade-generalized",
        (false, false) => "speculative-trade-possible",
    }
}

fn sorted_structures<'a>(
    ambient: &AmbientStructure,
    profile: &'a [AgentDependentStructure],
) -> Result<Vec<&'a AgentDependentStructure>, ModelError> {
    let mut seen: Vec<bool> = vec![false; ambient.num_agents()];
    for c in profile {
        if c.space().fingerprint() != ambient.fingerprint() {
            return Err(ModelError::AmbientMismatch);
        }
        seen[c.owner().0] = true;
    }
    if profile.len() != ambient.num_agents() || seen.iter().any(|s| !s) {
        return Err(ModelError::ProfileOwnerCoverage {
            got: profile
                .iter()
                .map(|c| ambient.agent_name(c.owner()).to_string())
                .collect(),
        });
    }
    let mut sorted: Vec<&AgentDependentStructure> = profile.iter().collect();
    sorted.sort_by_key(|c| c.owner());
    Ok(sorted)
}

/// Member types of a structure's space: every agent's types, in declaration
/// order (which is ascending [`TypeId`] order).
fn member_types(ambient: &AmbientStructure, space: &StateSpace) -> Vec<TypeId> {
    ambient
        .agent_ids()
        .flat_map(|j| space.type_set(j).iter().copied())
        .collect()
}

/// The event, inside `space`, that every coordinate type belongs to
/// `accepting`.
fn acceptance_event(
    ambient: &AmbientStructure,
    space: &StateSpace,
    accepting: &BTreeSet<TypeId>,
) -> Event {
    let states: BTreeSet<State> = space
        .states(ambient)
        .into_iter()
        .filter(|s| s.profile.iter().all(|t| accepting.contains(t)))
        .collect();
    Event::new(ambient, states).expect("states come from the space")
}

/// Evaluates a trade against a profile of owned structures under the given
/// semantics. Gains are computed per structure with each member type's own
/// introspective belief; the verdict grades unanimous qualification by
/// whether every real type strictly gains.
pub fn evaluate_trade(
    ambient: &AmbientStructure,
    x: &Trade,
    profile: &[AgentDependentStructure],
    semantics: TradeSemantics,
) -> Result<AcceptanceReport, ModelError> {
    let sorted = sorted_structures(ambient, profile)?;
    let mut structures = Vec::with_capacity(sorted.len());
    let mut all_qualified = true;
    let mut all_real_strict = true;
    for c in sorted {
        let mut assessments = BTreeMap::new();
        for t in member_types(ambient, c.space()) {
            let gain = expected_gain(ambient, t, x, c.space())?;
            let accepts = semantics.accepts(&gain);
            assessments.insert(t, TypeAssessment { gain, accepts });
        }
        let accepting: BTreeSet<TypeId> = assessments
            .iter()
            .filter(|(_, a)| a.accepts)
            .map(|(t, _)| *t)
            .collect();
        let event = acceptance_event(ambient, c.space(), &accepting);
        let (real_commonly_accepting, _) = real_cb(ambient, c, &event, CbDepth::Infinite);
        let qualified = match semantics.mode {
            AcceptanceMode::S1 => c.real_types().iter().all(|t| accepting.contains(t)),
            AcceptanceMode::S2 => c.real_types().is_subset(&real_commonly_accepting),
        };
        all_qualified &= qualified;
        all_real_strict &= c
            .real_types()
            .iter()
            .all(|t| assessments[t].gain.is_positive());
        structures.push(StructureReport {
            owner: c.owner(),
            assessments,
            real_commonly_accepting,
        });
    }
    let verdict = if !all_qualified {
        TradeVerdict::None
    } else if all_real_strict {
        TradeVerdict::Speculative
    } else {
        TradeVerdict::Weak
    };
    Ok(AcceptanceReport {
        semantics,
        structures,
        verdict,
    })
}

/// Shared scaffolding for the trade searches: payoff variables for every
/// agent at every state touched by the profile, free but capped to
/// `[-1, 1]`, with one budget-balance equality per state. The last variable
/// is the objective slack `g`.
struct TradeProgram {
    states: Vec<State>,
    num_agents: usize,
    base: LinearProgram,
}

impl TradeProgram {
    fn new(ambient: &AmbientStructure, spaces: &[&StateSpace]) -> TradeProgram {
        let mut all: BTreeSet<State> = BTreeSet::new();
        for space in spaces {
            all.extend(space.states(ambient));
        }
        let states: Vec<State> = all.into_iter().collect();
        let num_agents = ambient.num_agents();
        let nvars = num_agents * states.len() + 1;
        let mut base = LinearProgram::new(nvars);
        for v in 0..nvars {
            base.mark_free(v);
        }
        let mut objective = vec![Rational::zero(); nvars];
        objective[nvars - 1] = rat(1, 1);
        base.set_objective(objective);
        let program = TradeProgram {
            states,
            num_agents,
            base,
        };
        let mut with_rows = program;
        for k in 0..with_rows.states.len() {
            let mut balance = vec![Rational::zero(); nvars];
            for j in 0..num_agents {
                balance[with_rows.var(j, k)] = rat(1, 1);
            }
            with_rows
                .base
                .constrain(balance, Relation::Eq, Rational::zero());
            for j in 0..num_agents {
                let mut cap = vec![Rational::zero(); nvars];
                cap[with_rows.var(j, k)] = rat(1, 1);
                with_rows
                    .base
                    .constrain(cap.clone(), Relation::Le, rat(1, 1));
                with_rows.base.constrain(cap, Relation::Ge, rat(-1, 1));
            }
        }
        with_rows
    }

    fn var(&self, agent: usize, state: usize) -> usize {
        agent * self.states.len() + state
    }

    fn slack_var(&self) -> usize {
        self.num_agents * self.states.len()
    }

    /// Coefficients of `t`'s expected gain inside `space` over the payoff
    /// variables (zero elsewhere, including the slack).
    fn gain_coeffs(
        &self,
        ambient: &AmbientStructure,
        t: TypeId,
        space: &StateSpace,
    ) -> Vec<Rational> {
        let owner = ambient.type_agent(t).0;
        let mut coeffs = vec![Rational::zero(); self.num_agents * self.states.len() + 1];
        for (s, p) in ambient.introspective_belief(t) {
            if !space.contains_state(&s) {
                continue;
            }
            let k = self
                .states
                .binary_search(&s)
                .expect("profile spaces are included in the variable states");
            coeffs[self.var(owner, k)] += p;
        }
        coeffs
    }

    /// Reads a trade out of an optimal solution.
    fn trade(&self, ambient: &AmbientStructure, x: &[Rational]) -> Trade {
        let mut payoffs = BTreeMap::new();
        for j in 0..self.num_agents {
            for (k, s) in self.states.iter().enumerate() {
                let v = x[self.var(j, k)].clone();
                if !v.is_zero() {
                    payoffs.insert((AgentId(j), s.clone()), v);
                }
            }
        }
        Trade::new(ambient, payoffs).expect("balance rows hold exactly")
    }
}

/// Searches for a trade every owner's side accepts under the semantics,
/// with every real type strictly gaining.
///
/// * S1 solves a single program maximizing the least real-type gain; a
///   trade is returned exactly when that optimum is positive.
/// * S2 enumerates acceptance patterns — one subset of member types per
///   structure, counting upward through the subset masks with the first
///   structure's mask outermost — keeps those whose all-accept event is
///   commonly believed by the owner's real types, and solves one
///   sign-constrained program per surviving combination. The first pattern
///   whose program strictly separates accepters from rejecters wins.
///   `pattern_cap` bounds the raw pattern count (the error reports both).
pub fn find_speculative_trade(
    ambient: &AmbientStructure,
    profile: &[AgentDependentStructure],
    semantics: TradeSemantics,
    pattern_cap: u64,
) -> Result<Option<Trade>, ModelError> {
    let sorted = sorted_structures(ambient, profile)?;
    let spaces: Vec<&StateSpace> = sorted.iter().map(|c| c.space()).collect();
    let program = TradeProgram::new(ambient, &spaces);
    match semantics.mode {
        AcceptanceMode::S1 => {
            let mut lp = program.base.clone();
            for c in &sorted {
                for &t in c.real_types() {
                    let mut coeffs = program.gain_coeffs(ambient, t, c.space());
                    coeffs[program.slack_var()] = rat(-1, 1);
                    lp.constrain(coeffs, Relation::Ge, Rational::zero());
                }
            }
            match lp.maximize() {
                LpOutcome::Optimal { x, value } if value.is_positive() => {
                    Ok(Some(program.trade(ambient, &x)))
                }
                LpOutcome::Optimal { .. } => Ok(None),
                other => unreachable!("capped payoff box is feasible and bounded: {other:?}"),
            }
        }
        AcceptanceMode::S2 => {
            let members: Vec<Vec<TypeId>> = sorted
                .iter()
                .map(|c| member_types(ambient, c.space()))
                .collect();
            let mut total: u128 = 1;
            for m in &members {
                total = total.saturating_mul(1u128 << m.len().min(127));
            }
            if total > u128::from(pattern_cap) {
                return Err(ModelError::TradePatternCap {
                    patterns: total,
                    cap: u128::from(pattern_cap),
                });
            }
            // Per structure, the subsets whose all-accept event the owner's
            // real types commonly believe; the trade program only decides
            // which survivor is realizable.
            let mut viable: Vec<Vec<(BTreeSet<TypeId>, BTreeSet<TypeId>)>> = Vec::new();
            for (c, m) in sorted.iter().zip(&members) {
                let mut per_structure = Vec::new();
                for mask in 0u64..(1u64 << m.len()) {
                    let accepting: BTreeSet<TypeId> = m
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| mask & (1 << b) != 0)
                        .map(|(_, t)| *t)
                        .collect();
                    if !c.real_types().is_subset(&accepting) {
                        continue;
                    }
                    let event = acceptance_event(ambient, c.space(), &accepting);
                    let (covered, _) = real_cb(ambient, c, &event, CbDepth::Infinite);
                    if c.real_types().is_subset(&covered) {
                        let rejecting: BTreeSet<TypeId> =
                            m.iter().filter(|t| !accepting.contains(t)).copied().collect();
                        per_structure.push((accepting, rejecting));
                    }
                }
                if per_structure.is_empty() {
                    return Ok(None);
                }
                viable.push(per_structure);
            }
            let mut choice = vec![0usize; viable.len()];
            loop {
                let mut lp = program.base.clone();
                for (i, c) in sorted.iter().enumerate() {
                    let (accepting, rejecting) = &viable[i][choice[i]];
                    for &t in accepting {
                        let mut coeffs = program.gain_coeffs(ambient, t, c.space());
                        let strict = matches!(semantics.threshold, Threshold::Strict)
                            || c.real_types().contains(&t);
                        if strict {
                            coeffs[program.slack_var()] = rat(-1, 1);
                        }
                        lp.constrain(coeffs, Relation::Ge, Rational::zero());
                    }
                    for &t in rejecting {
                        let mut coeffs = program.gain_coeffs(ambient, t, c.space());
                        coeffs[program.slack_var()] = rat(1, 1);
                        lp.constrain(coeffs, Relation::Le, Rational::zero());
                    }
                }
                if let LpOutcome::Optimal { x, value } = lp.maximize() {
                    if value.is_positive() {
                        let trade = program.trade(ambient, &x);
                        let report = evaluate_trade(ambient, &trade, profile, semantics)?;
                        assert_eq!(report.verdict, TradeVerdict::Speculative);
                        return Ok(Some(trade));
                    }
                }
                // Advance the odometer, last structure fastest.
                let mut i = viable.len();
                loop {
                    if i == 0 {
                        return Ok(None);
                    }
                    i -= 1;
                    choice[i] += 1;
                    if choice[i] < viable[i].len() {
                        break;
                    }
                    choice[i] = 0;
                }
            }
        }
    }
}

/// Decides whether no-trade is ex-ante Pareto efficient: `true` when no
/// budget-balanced trade gives every agent a nonnegative expectation under
/// her own prior with at least one strict. All priors must live on `w`.
pub fn check_pareto(
    ambient: &AmbientStructure,
    w: &StateSpace,
    priors: &[(AgentId, Prior)],
) -> Result<bool, ModelError> {
    if w.fingerprint() != ambient.fingerprint() {
        return Err(ModelError::AmbientMismatch);
    }
    let mut seen = vec![false; ambient.num_agents()];
    for (a, prior) in priors {
        seen[a.0] = true;
        if prior.space() != w {
            return Err(ModelError::PriorDomainMismatch {
                owner: ambient.agent_name(*a).to_string(),
            });
        }
    }
    if priors.len() != ambient.num_agents() || seen.iter().any(|s| !s) {
        return Err(ModelError::ProfileOwnerCoverage {
            got: priors
                .iter()
                .map(|(a, _)| ambient.agent_name(*a).to_string())
                .collect(),
        });
    }
    let program = TradeProgram::new(ambient, &[w]);
    let mut lp = program.base.clone();
    // Maximize the sum of expectations subject to each being nonnegative;
    // an improving trade exists exactly when the optimum is positive.
    let mut objective = vec![Rational::zero(); program.num_agents * program.states.len() + 1];
    let mut rows = Vec::new();
    for (a, prior) in priors {
        let mut coeffs = vec![Rational::zero(); objective.len()];
        for (k, s) in program.states.iter().enumerate() {
            coeffs[program.var(a.0, k)] = prior.mass(s);
        }
        for (o, c) in objective.iter_mut().zip(&coeffs) {
            *o += c;
        }
        rows.push(coeffs);
    }
    lp.set_objective(objective);
    for coeffs in rows {
        lp.constrain(coeffs, Relation::Ge, Rational::zero());
    }
    let efficient = match lp.maximize() {
        LpOutcome::Optimal { value, .. } => value.is_zero(),
        other => unreachable!("capped payoff box is feasible and bounded: {other:?}"),
    };
    // A single shared prior makes every budget-balanced trade sum to zero
    // in expectation, so no-trade must come out efficient.
    if priors.windows(2).all(|p| p[0].1 == p[1].1) {
        assert!(efficient, "zero-sum trades cannot beat a shared prior");
    }
    Ok(efficient)
}

/// Outcome of checking that commonly-accepted trades leave every real type
/// indifferent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoTradeOutcome {
    /// No trade is commonly weakly accepted while some real type strictly
    /// gains.
    TheoremHolds,
    /// A trade contradicting indifference, with its evaluation.
    Counterexample { trade: Trade, report: AcceptanceReport },
    /// A hypothesis failed; when willingness-based search still finds a
    /// strictly profitable trade, it is attached as evidence.
    HypothesisNotMet {
        reason: String,
        s1_trade: Option<Trade>,
    },
}

/// Verifies the no-trade property for a designated space, a common profile
/// of owned structures with their priors, and a consistent prior `pi` on
/// the designated space: under those hypotheses, any trade whose weak
/// acceptance is commonly believed in every structure must leave every real
/// type's expected gain at zero.
///
/// Hypotheses are checked first — the profile must classify as common, `pi`
/// must be consistent for it (or the profile must collapse to the classical
/// single-space, single-prior setting, where a common prior alone is the
/// hypothesis), and no-trade must be ex-ante Pareto efficient on the shared
/// structure space under the owners' priors — and a failure short-circuits
/// into [`NoTradeOutcome::HypothesisNotMet`]. The search then enumerates
/// weak acceptance patterns exactly as [`find_speculative_trade`] does, but
/// asks only for some covered real type's gain to be strictly positive
/// (under weak acceptance a covered real type can never strictly lose).
pub fn verify_no_trade_theorem(
    ambient: &AmbientStructure,
    w: &StateSpace,
    profile: &[(AgentDependentStructure, Prior)],
    pi: &Prior,
    pattern_cap: u64,
) -> Result<NoTradeOutcome, ModelError> {
    if pi.space() != w {
        return Err(ModelError::PriorDomainMismatch {
            owner: "designated".to_string(),
        });
    }
    let structures: Vec<AgentDependentStructure> =
        profile.iter().map(|(c, _)| c.clone()).collect();
    let s1 = TradeSemantics {
        mode: AcceptanceMode::S1,
        threshold: Threshold::Strict,
    };
    let taxonomy = classify_profile(ambient, &structures, w)?;
    if !taxonomy.common {
        return Ok(NoTradeOutcome::HypothesisNotMet {
            reason: "the owners' structures are not a common space".to_string(),
            s1_trade: find_speculative_trade(ambient, &structures, s1, pattern_cap)?,
        });
    }
    let verdict = check_consistent_prior(ambient, pi, profile)?;
    // When every owner's space is the designated space and every owner
    // holds the designated prior itself, the setting is the classical one
    // and a common prior alone suffices; the full-support refinement binds
    // only genuinely agent-dependent profiles. Ratios cannot mismatch in
    // the collapsed case, so only the support condition is forgiven.
    let classical = profile.iter().all(|(c, p)| c.space() == w && p == pi);
    let consistency_met = match &verdict {
        ConsistencyVerdict::Consistent => true,
        ConsistencyVerdict::ZeroMass { .. } => classical,
        _ => false,
    };
    if !consistency_met {
        return Ok(NoTradeOutcome::HypothesisNotMet {
            reason: verdict.describe(ambient),
            s1_trade: find_speculative_trade(ambient, &structures, s1, pattern_cap)?,
        });
    }
    // Commonness makes every structure's space the same, so ex-ante
    // efficiency is judged there, each owner weighing trades by her own
    // structure prior. A shared prior passes automatically (budget balance
    // makes trades zero-sum in expectation); disjoint or tilted supports
    // can genuinely fail here.
    let shared_space = profile[0].0.space().clone();
    let per_owner: Vec<(AgentId, Prior)> = profile
        .iter()
        .map(|(c, p)| (c.owner(), p.clone()))
        .collect();
    if !check_pareto(ambient, &shared_space, &per_owner)? {
        return Ok(NoTradeOutcome::HypothesisNotMet {
            reason: "no-trade is not ex-ante efficient under the owners' priors".to_string(),
            s1_trade: find_speculative_trade(ambient, &structures, s1, pattern_cap)?,
        });
    }

    let sorted = sorted_structures(ambient, &structures)?;
    let spaces: Vec<&StateSpace> = sorted.iter().map(|c| c.space()).collect();
    let program = TradeProgram::new(ambient, &spaces);
    let members: Vec<Vec<TypeId>> = sorted
        .iter()
        .map(|c| member_types(ambient, c.space()))
        .collect();
    let mut total: u128 = 1;
    for m in &members {
        total = total.saturating_mul(1u128 << m.len().min(127));
    }
    if total > u128::from(pattern_cap) {
        return Err(ModelError::TradePatternCap {
            patterns: total,
            cap: u128::from(pattern_cap),
        });
    }
    let mut viable: Vec<Vec<(BTreeSet<TypeId>, BTreeSet<TypeId>)>> = Vec::new();
    for (c, m) in sorted.iter().zip(&members) {
        let mut per_structure = Vec::new();
        for mask in 0u64..(1u64 << m.len()) {
            let accepting: BTreeSet<TypeId> = m
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, t)| *t)
                .collect();
            if !c.real_types().is_subset(&accepting) {
                continue;
            }
            let event = acceptance_event(ambient, c.space(), &accepting);
            let (covered, _) = real_cb(ambient, c, &event, CbDepth::Infinite);
            if c.real_types().is_subset(&covered) {
                let rejecting: BTreeSet<TypeId> =
                    m.iter().filter(|t| !accepting.contains(t)).copied().collect();
                per_structure.push((accepting, rejecting));
            }
        }
        if per_structure.is_empty() {
            // No pattern can even be commonly believed, so indifference
            // holds vacuously for this structure.
            return Ok(NoTradeOutcome::TheoremHolds);
        }
        viable.push(per_structure);
    }
    // Targets: each (owner, real type) pair whose strict gain would
    // contradict indifference.
    let targets: Vec<(usize, TypeId)> = sorted
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.real_types().iter().map(move |&t| (i, t)))
        .collect();
    let mut choice = vec![0usize; viable.len()];
    loop {
        for &(target_structure, target_type) in &targets {
            let mut lp = program.base.clone();
            for (i, c) in sorted.iter().enumerate() {
                let (accepting, rejecting) = &viable[i][choice[i]];
                for &t in accepting {
                    let mut coeffs = program.gain_coeffs(ambient, t, c.space());
                    if i == target_structure && t == target_type {
                        coeffs[program.slack_var()] = rat(-1, 1);
                    }
                    lp.constrain(coeffs, Relation::Ge, Rational::zero());
                }
                for &t in rejecting {
                    let mut coeffs = program.gain_coeffs(ambient, t, c.space());
                    coeffs[program.slack_var()] = rat(1, 1);
                    lp.constrain(coeffs, Relation::Le, Rational::zero());
                }
            }
            if let LpOutcome::Optimal { x, value } = lp.maximize() {
                if value.is_positive() {
                    let trade = program.trade(ambient, &x);
                    let report = evaluate_trade(
                        ambient,
                        &trade,
                        &structures,
                        TradeSemantics {
                            mode: AcceptanceMode::S2,
                            threshold: Threshold::Weak,
                        },
                    )?;
                    assert!(
                        report.structures.iter().any(|r| r
                            .assessments
                            .iter()
                            .any(|(t, a)| r.real_commonly_accepting.contains(t)
                                && !a.gain.is_zero())),
                        "a counterexample must contradict indifference"
                    );
                    return Ok(NoTradeOutcome::Counterexample { trade, report });
                }
            }
        }
        let mut i = viable.len();
        loop {
            if i == 0 {
                return Ok(NoTradeOutcome::TheoremHolds);
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < viable[i].len() {
                break;
            }
            choice[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{agent_closure, minimal_structure, ClosureMode};
    use crate::fixtures;
    use crate::model::{rat, LoadedModel};
    use crate::priors::check_common_prior;
    use proptest::prelude::*;

    fn state(model: &LoadedModel, key: &str) -> State {
        model.ambient.parse_state_key(key).expect("valid state key")
    }

    fn agent(model: &LoadedModel, name: &str) -> AgentId {
        model.ambient.agent_by_name(name).expect("agent exists")
    }

    fn ty(model: &LoadedModel, name: &str) -> TypeId {
        model
            .ambient
            .agent_ids()
            .find_map(|a| model.ambient.type_by_name(a, name))
            .expect("type exists")
    }

    /// The whole belief-closed space as one agent's structure, all of her
    /// member types real.
    fn identity_structure(
        model: &LoadedModel,
        name: &str,
        space: &StateSpace,
    ) -> AgentDependentStructure {
        let a = agent(model, name);
        AgentDependentStructure::new(&model.ambient, a, space.type_set(a).clone(), space.clone())
            .expect("space is belief-closed")
    }

    /// Each agent's least structure around the four-type ambient's real
    /// space: `a` closes onto the rain loop, `b` onto the no-rain loop.
    fn weather_minimal_profile(model: &LoadedModel) -> Vec<AgentDependentStructure> {
        let w = model.space("omega_real").expect("named space");
        model
            .ambient
            .agent_ids()
            .map(|i| minimal_structure(&model.ambient, i, w))
            .collect()
    }

    /// `a` wins one unit from `b` when it rains, loses one otherwise.
    fn rain_bet(model: &LoadedModel) -> Trade {
        let ambient = &model.ambient;
        let rain = ambient.theta_by_name("theta_r").expect("theta exists");
        let (a, b) = (agent(model, "a"), agent(model, "b"));
        let mut payoffs = BTreeMap::new();
        for s in model.space("full").expect("named space").states(ambient) {
            let stake = if s.theta == rain { rat(1, 1) } else { rat(-1, 1) };
            payoffs.insert((b, s.clone()), -stake.clone());
            payoffs.insert((a, s), stake);
        }
        Trade::new(ambient, payoffs).expect("stakes balance at every state")
    }

    /// The diagonal common prior of the four-type full product: probability
    /// `lambda` on the rain loop state, the rest on the no-rain loop state.
    fn diagonal_prior(model: &LoadedModel, lambda: Rational) -> Prior {
        let mass = [
            ("theta_r,t_r_a,t_r_b", lambda.clone()),
            ("theta_n,t_n_a,t_n_b", rat(1, 1) - lambda),
        ]
        .into_iter()
        .map(|(k, m)| (state(model, k), m))
        .collect();
        Prior::new(
            &model.ambient,
            model.space("full").expect("named space").clone(),
            mass,
        )
        .expect("diagonal masses form a prior")
    }

    #[test]
    fn trade_construction_checks_budget_balance() {
        let model = fixtures::u4();
        let (a, b) = (agent(&model, "a"), agent(&model, "b"));
        let s = state(&model, "theta_r,t_r_a,t_r_b");
        let lopsided = BTreeMap::from([((a, s.clone()), rat(1, 1)), ((b, s.clone()), rat(-2, 3))]);
        assert!(matches!(
            Trade::new(&model.ambient, lopsided),
            Err(ModelError::TradeImbalance { sum, .. }) if sum == "1/3"
        ));
        // Zero entries are dropped, so padded and bare versions are equal.
        let bare = Trade::new(
            &model.ambient,
            BTreeMap::from([((a, s.clone()), rat(2, 1)), ((b, s.clone()), rat(-2, 1))]),
        )
        .unwrap();
        let t = state(&model, "theta_n,t_n_a,t_n_b");
        let padded = Trade::new(
            &model.ambient,
            BTreeMap::from([
                ((a, s.clone()), rat(2, 1)),
                ((b, s.clone()), rat(-2, 1)),
                ((a, t.clone()), rat(0, 1)),
            ]),
        )
        .unwrap();
        assert_eq!(bare, padded);
        assert_eq!(bare.payoff(a, &s), rat(2, 1));
        assert_eq!(bare.payoff(b, &s), rat(-2, 1));
        assert_eq!(bare.payoff(a, &t), rat(0, 1));
        assert_eq!(Trade::zero().payoff(b, &t), rat(0, 1));
    }

    #[test]
    fn trade_files_round_trip() {
        let model = fixtures::u4();
        let text = r#"{
            "a@theta_r,t_r_a,t_r_b": "2/3",
            "b@theta_r,t_r_a,t_r_b": "-2/3"
        }"#;
        let parsed = parse_trade_file(&model.ambient, text).unwrap();
        assert_eq!(
            parsed.payoff(agent(&model, "a"), &state(&model, "theta_r,t_r_a,t_r_b")),
            rat(2, 3)
        );
        assert!(matches!(
            parse_trade_file(&model.ambient, r#"{"a/theta_r,t_r_a,t_r_b": "1"}"#),
            Err(ModelError::BadTradeKey(k)) if k == "a/theta_r,t_r_a,t_r_b"
        ));
        assert!(matches!(
            parse_trade_file(&model.ambient, r#"{"c@theta_r,t_r_a,t_r_b": "1"}"#),
            Err(ModelError::UndeclaredAgent(name)) if name == "c"
        ));
        assert!(matches!(
            parse_trade_file(&model.ambient, r#"{"a@theta_r,t_r_a,t_r_b": "1"}"#),
            Err(ModelError::TradeImbalance { .. })
        ));
    }

    #[test]
    fn rain_bet_gains_match_point_beliefs() {
        let model = fixtures::u4();
        let bet = rain_bet(&model);
        let upsilon_a = model.space("upsilon_a").unwrap();
        let upsilon_b = model.space("upsilon_b").unwrap();
        // Each side is certain of the nature state that pays her.
        assert_eq!(
            expected_gain(&model.ambient, ty(&model, "t_r_a"), &bet, upsilon_a).unwrap(),
            rat(1, 1)
        );
        assert_eq!(
            expected_gain(&model.ambient, ty(&model, "t_n_b"), &bet, upsilon_b).unwrap(),
            rat(1, 1)
        );
        assert_eq!(
            expected_gain(&model.ambient, ty(&model, "t_r_b"), &bet, upsilon_a).unwrap(),
            rat(-1, 1)
        );
        assert_eq!(
            expected_gain(&model.ambient, ty(&model, "t_r_a"), &Trade::zero(), upsilon_a)
                .unwrap(),
            rat(0, 1)
        );
        assert!(matches!(
            expected_gain(&model.ambient, ty(&model, "t_r_a"), &bet, upsilon_b),
            Err(ModelError::TypeOutsideSpace { type_name }) if type_name == "t_r_a"
        ));
    }

    #[test]
    fn willingness_semantics_accepts_the_rain_bet() {
        let model = fixtures::u4();
        let profile = weather_minimal_profile(&model);
        let report = evaluate_trade(
            &model.ambient,
            &rain_bet(&model),
            &profile,
            TradeSemantics {
                mode: AcceptanceMode::S1,
                threshold: Threshold::Strict,
            },
        )
        .unwrap();
        assert_eq!(report.verdict, TradeVerdict::Speculative);
        let in_a = &report.structures[0];
        assert_eq!(in_a.assessments[&ty(&model, "t_r_a")].gain, rat(1, 1));
        assert!(in_a.assessments[&ty(&model, "t_r_a")].accepts);
        // The imaginary counterparty in `a`'s head is on the losing side.
        assert_eq!(in_a.assessments[&ty(&model, "t_r_b")].gain, rat(-1, 1));
        assert!(!in_a.assessments[&ty(&model, "t_r_b")].accepts);
    }

    #[test]
    fn common_belief_semantics_rejects_the_rain_bet() {
        let model = fixtures::u4();
        let profile = weather_minimal_profile(&model);
        let report = evaluate_trade(
            &model.ambient,
            &rain_bet(&model),
            &profile,
            TradeSemantics {
                mode: AcceptanceMode::S2,
                threshold: Threshold::Strict,
            },
        )
        .unwrap();
        // Inside each owner's structure the imagined counterparty refuses,
        // so acceptance is never commonly believed.
        assert_eq!(report.verdict, TradeVerdict::None);
        for structure in &report.structures {
            assert!(structure.real_commonly_accepting.is_empty());
        }
    }

    #[test]
    fn break_even_trades_grade_as_weak() {
        let model = fixtures::u4();
        let full = model.space("full").unwrap();
        let profile = vec![
            identity_structure(&model, "a", full),
            identity_structure(&model, "b", full),
        ];
        let report = evaluate_trade(
            &model.ambient,
            &Trade::zero(),
            &profile,
            TradeSemantics {
                mode: AcceptanceMode::S2,
                threshold: Threshold::Weak,
            },
        )
        .unwrap();
        // Everyone is exactly indifferent: universally accepted, no gains.
        assert_eq!(report.verdict, TradeVerdict::Weak);
        for structure in &report.structures {
            let space_types: BTreeSet<TypeId> = structure
                .real_commonly_accepting
                .iter()
                .copied()
                .collect();
            assert_eq!(space_types, *full.type_set(structure.owner));
            assert!(structure.assessments.values().all(|a| a.gain.is_zero()));
        }
    }

    #[test]
    fn trade_evaluation_validates_the_profile() {
        let model = fixtures::u4();
        let full = model.space("full").unwrap();
        let only_a = vec![identity_structure(&model, "a", full)];
        let semantics = TradeSemantics {
            mode: AcceptanceMode::S1,
            threshold: Threshold::Weak,
        };
        assert!(matches!(
            evaluate_trade(&model.ambient, &Trade::zero(), &only_a, semantics),
            Err(ModelError::ProfileOwnerCoverage { .. })
        ));
        let doubled = vec![
            identity_structure(&model, "a", full),
            identity_structure(&model, "a", full),
        ];
        assert!(matches!(
            evaluate_trade(&model.ambient, &Trade::zero(), &doubled, semantics),
            Err(ModelError::ProfileOwnerCoverage { .. })
        ));
    }

    #[test]
    fn speculative_search_finds_the_normalized_bet() {
        let model = fixtures::u4();
        let profile = weather_minimal_profile(&model);
        let semantics = TradeSemantics {
            mode: AcceptanceMode::S1,
            threshold: Threshold::Strict,
        };
        let trade = find_speculative_trade(&model.ambient, &profile, semantics, 1 << 16)
            .unwrap()
            .expect("the weather loops disagree enough to bet");
        // Unit payoff caps pin both certain types at gain exactly one.
        assert_eq!(
            expected_gain(
                &model.ambient,
                ty(&model, "t_r_a"),
                &trade,
                model.space("upsilon_a").unwrap()
            )
            .unwrap(),
            rat(1, 1)
        );
        assert_eq!(
            expected_gain(
                &model.ambient,
                ty(&model, "t_n_b"),
                &trade,
                model.space("upsilon_b").unwrap()
            )
            .unwrap(),
            rat(1, 1)
        );
        let report = evaluate_trade(&model.ambient, &trade, &profile, semantics).unwrap();
        assert_eq!(report.verdict, TradeVerdict::Speculative);
    }

    #[test]
    fn no_search_result_under_a_degenerate_common_profile() {
        let model = fixtures::u4();
        let full = model.space("full").unwrap();
        let profile = vec![
            identity_structure(&model, "a", full),
            identity_structure(&model, "b", full),
        ];
        for semantics in [
            TradeSemantics {
                mode: AcceptanceMode::S1,
                threshold: Threshold::Strict,
            },
            TradeSemantics {
                mode: AcceptanceMode::S2,
                threshold: Threshold::Strict,
            },
            TradeSemantics {
                mode: AcceptanceMode::S2,
                threshold: Threshold::Weak,
            },
        ] {
            // With both weather types real on each side, every bet has a
            // strict loser, so no semantics can find one.
            assert_eq!(
                find_speculative_trade(&model.ambient, &profile, semantics, 1 << 16).unwrap(),
                None
            );
        }
    }

    #[test]
    fn single_belief_structures_trade_nothing_strictly() {
        let model = fixtures::twostate();
        let full = model.space("full").unwrap();
        let profile = vec![
            identity_structure(&model, "a", full),
            identity_structure(&model, "b", full),
        ];
        let found = find_speculative_trade(
            &model.ambient,
            &profile,
            TradeSemantics {
                mode: AcceptanceMode::S1,
                threshold: Threshold::Strict,
            },
            1 << 16,
        )
        .unwrap();
        assert_eq!(found, None);
    }

    #[test]
    fn acceptance_patterns_enumerate_within_the_cap() {
        let model = fixtures::u4();
        let full = model.space("full").unwrap();
        let profile = vec![
            identity_structure(&model, "a", full),
            identity_structure(&model, "b", full),
        ];
        let semantics = TradeSemantics {
            mode: AcceptanceMode::S2,
            threshold: Threshold::Strict,
        };
        assert!(matches!(
            find_speculative_trade(&model.ambient, &profile, semantics, 8),
            Err(ModelError::TradePatternCap { patterns: 256, cap: 8 })
        ));
        // The willingness mode never enumerates patterns, so it ignores the
        // cap entirely.
        assert_eq!(
            find_speculative_trade(
                &model.ambient,
                &profile,
                TradeSemantics {
                    mode: AcceptanceMode::S1,
                    threshold: Threshold::Strict,
                },
                1,
            )
            .unwrap(),
            None
        );
    }

    #[test]
    fn scaling_preserves_willingness_verdicts() {
        let model = fixtures::u4();
        let profile = weather_minimal_profile(&model);
        let semantics = TradeSemantics {
            mode: AcceptanceMode::S1,
            threshold: Threshold::Strict,
        };
        let bet = rain_bet(&model);
        let scaled = bet.scale(&rat(2, 3));
        assert_eq!(
            expected_gain(
                &model.ambient,
                ty(&model, "t_r_a"),
                &scaled,
                model.space("upsilon_a").unwrap()
            )
            .unwrap(),
            rat(2, 3)
        );
        let original = evaluate_trade(&model.ambient, &bet, &profile, semantics).unwrap();
        let shrunk = evaluate_trade(&model.ambient, &scaled, &profile, semantics).unwrap();
        assert_eq!(original.verdict, shrunk.verdict);
        assert_eq!(bet.scale(&rat(1, 1)), bet);
        assert_eq!(bet.scale(&rat(0, 1)), Trade::zero());
    }

    #[test]
    fn s2_finds_the_disagreement_bet() {
        // One type per agent, each certain of a different nature state: the
        // whole two-state space is commonly believed, so even the coverage
        // semantics lets them bet on nature.
        let text = r#"{
            "agents": ["a", "b"],
            "thetas": ["theta_1", "theta_2"],
            "types": { "a": ["r_a"], "b": ["r_b"] },
            "beliefs": {
                "a.r_a": [ { "theta": "theta_1", "cotypes": { "b": "r_b" }, "p": "1" } ],
                "b.r_b": [ { "theta": "theta_2", "cotypes": { "a": "r_a" }, "p": "1" } ]
            },
            "spaces": { "full": { "a": ["r_a"], "b": ["r_b"] } }
        }"#;
        let model = crate::model::load_model(text).unwrap();
        let full = model.space("full").unwrap();
        let profile = vec![
            identity_structure(&model, "a", full),
            identity_structure(&model, "b", full),
        ];
        let semantics = TradeSemantics {
            mode: AcceptanceMode::S2,
            threshold: Threshold::Strict,
        };
        let trade = find_speculative_trade(&model.ambient, &profile, semantics, 1 << 16)
            .unwrap()
            .expect("certainty about different nature states supports a bet");
        let report = evaluate_trade(&model.ambient, &trade, &profile, semantics).unwrap();
        assert_eq!(report.verdict, TradeVerdict::Speculative);
        for structure in &report.structures {
            assert_eq!(
                structure.real_commonly_accepting,
                full.type_set(structure.owner).clone()
            );
        }
        assert_eq!(
            trade.payoff(agent(&model, "a"), &state(&model, "theta_1,r_a,r_b")),
            rat(1, 1)
        );
        assert_eq!(
            trade.payoff(agent(&model, "b"), &state(&model, "theta_2,r_a,r_b")),
            rat(1, 1)
        );
    }

    #[test]
    fn pareto_check_detects_improving_trades() {
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let (a, b) = (agent(&model, "a"), agent(&model, "b"));
        let real = model.space("omega_real").unwrap();
        let uniform = Prior::uniform(ambient, real.clone());
        assert!(check_pareto(
            ambient,
            real,
            &[(a, uniform.clone()), (b, uniform.clone())]
        )
        .unwrap());
        // Concentrate the owners on different states: paying each where the
        // other sees no mass improves both.
        let on_rain = Prior::new(
            ambient,
            real.clone(),
            BTreeMap::from([(state(&model, "theta_r,t_r_a,t_n_b"), rat(1, 1))]),
        )
        .unwrap();
        let on_dry = Prior::new(
            ambient,
            real.clone(),
            BTreeMap::from([(state(&model, "theta_n,t_r_a,t_n_b"), rat(1, 1))]),
        )
        .unwrap();
        assert!(!check_pareto(ambient, real, &[(a, on_rain), (b, on_dry)]).unwrap());
        assert!(matches!(
            check_pareto(ambient, real, &[(a, uniform.clone())]),
            Err(ModelError::ProfileOwnerCoverage { .. })
        ));
        let elsewhere = Prior::uniform(ambient, model.space("upsilon_a").unwrap().clone());
        assert!(matches!(
            check_pareto(ambient, real, &[(a, elsewhere), (b, uniform)]),
            Err(ModelError::PriorDomainMismatch { owner }) if owner == "a"
        ));
    }

    #[test]
    fn no_trade_theorem_on_the_uniform_profile() {
        let model = fixtures::twostate();
        let full = model.space("full").unwrap();
        let uniform = Prior::uniform(&model.ambient, full.clone());
        let profile = vec![
            (identity_structure(&model, "a", full), uniform.clone()),
            (identity_structure(&model, "b", full), uniform.clone()),
        ];
        let outcome =
            verify_no_trade_theorem(&model.ambient, full, &profile, &uniform, 1 << 16).unwrap();
        assert_eq!(outcome, NoTradeOutcome::TheoremHolds);
    }

    #[test]
    fn no_trade_theorem_on_the_degenerate_diagonal() {
        // The classical cell: both owners take the full product as their
        // structure and hold its slack-maximal common prior, which
        // concentrates on the two self-confirming states. Support gaps are
        // forgiven here — a common prior is the whole prior hypothesis —
        // and no bet survives common weak acceptance.
        let model = fixtures::u4();
        let full = model.space("full").unwrap();
        let even = diagonal_prior(&model, rat(1, 2));
        let profile = vec![
            (identity_structure(&model, "a", full), even.clone()),
            (identity_structure(&model, "b", full), even.clone()),
        ];
        let outcome =
            verify_no_trade_theorem(&model.ambient, full, &profile, &even, 1 << 16).unwrap();
        assert_eq!(outcome, NoTradeOutcome::TheoremHolds);
        // Tilting one owner's prior off the designated one leaves the
        // generalized reading in charge, and the support gaps now count.
        let tilted = vec![
            (
                identity_structure(&model, "a", full),
                diagonal_prior(&model, rat(1, 3)),
            ),
            (identity_structure(&model, "b", full), even.clone()),
        ];
        let outcome =
            verify_no_trade_theorem(&model.ambient, full, &tilted, &even, 1 << 16).unwrap();
        match outcome {
            NoTradeOutcome::HypothesisNotMet { reason, .. } => {
                assert!(reason.contains("zero mass"));
            }
            other => panic!("expected a failed hypothesis, got {other:?}"),
        }
    }

    #[test]
    fn no_trade_theorem_on_the_shared_closure() {
        // Both owners close the real space by definition onto the whole
        // four-type product: a common, non-degenerate profile. The even
        // diagonal prior is common for both structures and consistent with
        // the uniform designated prior (their overlaps carry no mass), so
        // every hypothesis holds and the theorem must come out true.
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let w = model.space("omega_real").unwrap();
        let even = diagonal_prior(&model, rat(1, 2));
        assert!(check_common_prior(ambient, &even).is_valid());
        let profile: Vec<(AgentDependentStructure, Prior)> = ambient
            .agent_ids()
            .map(|i| {
                let run = agent_closure(ambient, i, w, ClosureMode::Definition);
                let c =
                    AgentDependentStructure::new(ambient, i, w.type_set(i).clone(), run.result)
                        .unwrap();
                assert_eq!(c.space(), model.space("full").unwrap());
                (c, even.clone())
            })
            .collect();
        let pi = Prior::uniform(ambient, w.clone());
        let outcome = verify_no_trade_theorem(ambient, w, &profile, &pi, 1 << 16).unwrap();
        assert_eq!(outcome, NoTradeOutcome::TheoremHolds);
    }

    #[test]
    fn no_trade_theorem_reports_unmet_hypotheses() {
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let w = model.space("omega_real").unwrap();
        // The least structures disagree — `a` lives on the rain loop, `b`
        // on the no-rain loop — so commonness fails and the willingness
        // search demonstrates the speculation the theorem cannot rule out.
        let profile: Vec<(AgentDependentStructure, Prior)> = weather_minimal_profile(&model)
            .into_iter()
            .map(|c| {
                let prior = Prior::new(
                    ambient,
                    c.space().clone(),
                    BTreeMap::from([(
                        c.space()
                            .states(ambient)
                            .into_iter()
                            .find(|s| {
                                ambient.theta_name(s.theta)
                                    == if c.owner() == agent(&model, "a") {
                                        "theta_r"
                                    } else {
                                        "theta_n"
                                    }
                            })
                            .unwrap(),
                        rat(1, 1),
                    )]),
                )
                .unwrap();
                (c, prior)
            })
            .collect();
        let pi = Prior::uniform(ambient, w.clone());
        let outcome = verify_no_trade_theorem(ambient, w, &profile, &pi, 1 << 16).unwrap();
        match outcome {
            NoTradeOutcome::HypothesisNotMet { reason, s1_trade } => {
                assert!(reason.contains("common"));
                let trade = s1_trade.expect("the loops support a willingness bet");
                let report = evaluate_trade(
                    ambient,
                    &trade,
                    &weather_minimal_profile(&model),
                    TradeSemantics {
                        mode: AcceptanceMode::S1,
                        threshold: Threshold::Strict,
                    },
                )
                .unwrap();
                assert_eq!(report.verdict, TradeVerdict::Speculative);
            }
            other => panic!("expected a failed hypothesis, got {other:?}"),
        }
    }

    #[test]
    fn no_trade_theorem_flags_inconsistent_odds() {
        let model = fixtures::twostate();
        let full = model.space("full").unwrap();
        let uniform = Prior::uniform(&model.ambient, full.clone());
        let profile = vec![
            (identity_structure(&model, "a", full), uniform.clone()),
            (identity_structure(&model, "b", full), uniform.clone()),
        ];
        let skewed = Prior::new(
            &model.ambient,
            full.clone(),
            BTreeMap::from([
                (state(&model, "theta_1,u_a,u_b"), rat(2, 3)),
                (state(&model, "theta_2,u_a,u_b"), rat(1, 3)),
            ]),
        )
        .unwrap();
        let outcome =
            verify_no_trade_theorem(&model.ambient, full, &profile, &skewed, 1 << 16).unwrap();
        match outcome {
            NoTradeOutcome::HypothesisNotMet { reason, s1_trade } => {
                assert!(reason.contains("ratio"));
                // Uniform single-type structures leave nothing to win.
                assert_eq!(s1_trade, None);
            }
            other => panic!("expected a failed hypothesis, got {other:?}"),
        }
    }

    #[test]
    fn no_trade_theorem_flags_ex_ante_improvable_profiles() {
        // Tilt the two owners' diagonal priors against each other: each is
        // still a common prior of the full product and vacuously consistent
        // with the designated prior, but betting on the diagonal now
        // improves both owners ex ante.
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let w = model.space("omega_real").unwrap();
        let profile: Vec<(AgentDependentStructure, Prior)> = ambient
            .agent_ids()
            .map(|i| {
                let run = agent_closure(ambient, i, w, ClosureMode::Definition);
                let c =
                    AgentDependentStructure::new(ambient, i, w.type_set(i).clone(), run.result)
                        .unwrap();
                let lambda = if i == agent(&model, "a") {
                    rat(1, 3)
                } else {
                    rat(3, 4)
                };
                (c, diagonal_prior(&model, lambda))
            })
            .collect();
        let pi = Prior::uniform(ambient, w.clone());
        let outcome = verify_no_trade_theorem(ambient, w, &profile, &pi, 1 << 16).unwrap();
        match outcome {
            NoTradeOutcome::HypothesisNotMet { reason, s1_trade } => {
                assert!(reason.contains("efficient"));
                assert!(s1_trade.is_some());
            }
            other => panic!("expected a failed hypothesis, got {other:?}"),
        }
    }

    #[test]
    fn taxonomy_cells_map_to_trade_consequences() {
        let model = fixtures::u4();
        let ambient = &model.ambient;
        let full = model.space("full").unwrap();
        let real = model.space("omega_real").unwrap();

        let identity: Vec<AgentDependentStructure> = ambient
            .agent_ids()
            .map(|i| identity_structure(&model, ambient.agent_name(i), full))
            .collect();
        let degenerate = classify_profile(ambient, &identity, full).unwrap();
        assert_eq!(table2_cell(&degenerate), "no-trade-milgrom-stokey");

        let shared: Vec<AgentDependentStructure> = ambient
            .agent_ids()
            .map(|i| {
                let run = agent_closure(ambient, i, real, ClosureMode::Definition);
                AgentDependentStructure::new(ambient, i, real.type_set(i).clone(), run.result)
                    .unwrap()
            })
            .collect();
        let common = classify_profile(ambient, &shared, real).unwrap();
        assert_eq!(table2_cell(&common), "no-trade-generalized");

        let split = weather_minimal_profile(&model);
        let disagreeing = classify_profile(ambient, &split, real).unwrap();
        assert_eq!(table2_cell(&disagreeing), "speculative-trade-possible");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Zero-sum bets on the four-type product: willingness verdicts are
        /// scale-invariant, gains are linear, and whenever the coverage
        /// semantics weakly passes a bet on the degenerate common profile,
        /// every real type is exactly indifferent.
        #[test]
        fn random_zero_sum_bets_behave_lawfully(
            numerators in proptest::collection::vec(-2i64..=2, 8),
        ) {
            let model = fixtures::u4();
            let ambient = &model.ambient;
            let (a, b) = (agent(&model, "a"), agent(&model, "b"));
            let full = model.space("full").unwrap();
            let mut payoffs = BTreeMap::new();
            for (s, n) in full.states(ambient).into_iter().zip(&numerators) {
                payoffs.insert((a, s.clone()), rat(*n, 3));
                payoffs.insert((b, s), rat(-n, 3));
            }
            let bet = Trade::new(ambient, payoffs).unwrap();
            let profile = weather_minimal_profile(&model);
            let s1 = TradeSemantics { mode: AcceptanceMode::S1, threshold: Threshold::Strict };

            let report = evaluate_trade(ambient, &bet, &profile, s1).unwrap();
            let scaled = evaluate_trade(ambient, &bet.scale(&rat(7, 2)), &profile, s1).unwrap();
            prop_assert_eq!(report.verdict, scaled.verdict);

            let upsilon_a = model.space("upsilon_a").unwrap();
            let g = expected_gain(ambient, ty(&model, "t_r_a"), &bet, upsilon_a).unwrap();
            let g_scaled =
                expected_gain(ambient, ty(&model, "t_r_a"), &bet.scale(&rat(7, 2)), upsilon_a)
                    .unwrap();
            prop_assert_eq!(g * rat(7, 2), g_scaled);

            // Strict speculation is also weak speculation.
            if report.verdict == TradeVerdict::Speculative {
                let weak = evaluate_trade(
                    ambient,
                    &bet,
                    &profile,
                    TradeSemantics { mode: AcceptanceMode::S1, threshold: Threshold::Weak },
                )
                .unwrap();
                prop_assert_eq!(weak.verdict, TradeVerdict::Speculative);
            }

            // On the degenerate common profile, commonly believed weak
            // acceptance forces indifference of every real type.
            let common = vec![
                identity_structure(&model, "a", full),
                identity_structure(&model, "b", full),
            ];
            let covered = evaluate_trade(
                ambient,
                &bet,
                &common,
                TradeSemantics { mode: AcceptanceMode::S2, threshold: Threshold::Weak },
            )
            .unwrap();
            prop_assert_ne!(covered.verdict, TradeVerdict::Speculative);
            if covered.verdict == TradeVerdict::Weak {
                for structure in &covered.structures {
                    for assessment in structure.assessments.values() {
                        prop_assert!(assessment.gain.is_zero());
                    }
                }
            }
        }
    }
}
