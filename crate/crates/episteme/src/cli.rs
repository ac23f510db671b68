//! Command-line front end.
//!
//! Every subcommand loads a model file, runs one decision procedure from
//! the library, and prints a single JSON document (the `dot` subcommand can
//! print raw Graphviz instead). Exit codes are part of the interface:
//!
//! * `0` — computed successfully; aligned, no trade found, theorem holds.
//! * `1` — invalid input data: unreadable referents, malformed files,
//!   violated preconditions.
//! * `2` — usage errors: unparsable arguments or flag combinations.
//! * `3` — a positive finding: the space is misaligned, a speculative
//!   trade exists, or a theorem hypothesis fails with trade evidence.
//!
//! The `reproduce` subcommand re-runs the bundled walkthroughs against
//! frozen outputs and reports byte-level agreement, so a build can vouch
//! for its own arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::closure::{
    agent_closure, classify_profile, minimal_structure, AgentDependentStructure, ClosureMode,
    ProfileTaxonomy,
};
use crate::dot::export_dot;
use crate::epistemics::{common_correct_belief, real_cb, CbDepth};
use crate::fixtures;
use crate::hierarchy::{misaligned_by_closure, misaligned_by_definition, validate_nonredundant};
use crate::model::{
    format_rational, load_model, parse_event_file, AgentId, AmbientStructure, LoadedModel,
    ModelError, State, StateSpace, TypeId,
};
use crate::priors::{
    check_consistent_prior, find_common_prior, find_consistent_prior, parse_prior_file,
    FeasibilityResult, Prior,
};
use crate::trade::{
    evaluate_trade, find_speculative_trade, parse_trade_file, table2_cell,
    verify_no_trade_theorem, AcceptanceMode, AcceptanceReport, NoTradeOutcome, Threshold, Trade,
    TradeSemantics, TradeVerdict,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FOUND: i32 = 3;

/// Default ceiling on acceptance-pattern enumeration in trade searches.
pub const DEFAULT_PATTERN_CAP: u64 = 1 << 16;

#[derive(Debug, Parser)]
#[command(
    name = "episteme",
    version,
    about = "Finite-model engine for interactive beliefs: misalignment checks, \
             agent closures, belief operators, priors, and speculative trade"
)]
pub struct Cli {
    /// Model file (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,

    /// Output format; `dot` is only meaningful for the `dot` subcommand,
    /// which defaults to it.
    #[arg(long, global = true, value_enum, value_name = "FORMAT")]
    pub out: Option<OutFormat>,

    /// Reserved for future randomized subcommands; accepted and ignored.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MisalignMode {
    /// Hierarchy comparison only.
    Def,
    /// Belief-closure test only.
    Closure,
    /// Both routes (they agree on non-redundant ambients).
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliClosureMode {
    /// Seed with the owner's one-step closure alone.
    Minimal,
    /// Seed with the space united with the owner's one-step closure.
    Definition,
}

impl CliClosureMode {
    fn to_mode(self) -> ClosureMode {
        match self {
            CliClosureMode::Minimal => ClosureMode::Minimal,
            CliClosureMode::Definition => ClosureMode::Definition,
        }
    }
}

/// How to build the per-agent profile of owned structures from a space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileMode {
    /// Least structures: each owner closes only her own component.
    Minimal,
    /// Definition-style structures: each owner keeps the whole space.
    Definition,
}

impl ProfileMode {
    fn as_str(self) -> &'static str {
        match self {
            ProfileMode::Minimal => "minimal",
            ProfileMode::Definition => "definition",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sem {
    S1,
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliThreshold {
    Strict,
    Weak,
}

fn semantics_of(sem: Sem, threshold: CliThreshold) -> TradeSemantics {
    TradeSemantics {
        mode: match sem {
            Sem::S1 => AcceptanceMode::S1,
            Sem::S2 => AcceptanceMode::S2,
        },
        threshold: match threshold {
            CliThreshold::Strict => Threshold::Strict,
            CliThreshold::Weak => Threshold::Weak,
        },
    }
}

fn parse_depth(s: &str) -> Result<CbDepth, String> {
    if s == "inf" {
        return Ok(CbDepth::Infinite);
    }
    s.parse::<usize>()
        .map(CbDepth::Finite)
        .map_err(|_| format!("expected a stage count or \"inf\", got {s:?}"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether a named space is misaligned.
    Misalign {
        #[arg(long)]
        space: String,
        #[arg(long, value_enum, default_value_t = MisalignMode::Both)]
        mode: MisalignMode,
    },
    /// Close a named space into one agent's owned structure.
    Closure {
        #[arg(long)]
        space: String,
        #[arg(long)]
        agent: String,
        #[arg(long, value_enum, default_value_t = CliClosureMode::Minimal)]
        mode: CliClosureMode,
    },
    /// Classify the profile of owned structures induced by a space.
    Classify {
        #[arg(long)]
        space: String,
        #[arg(long, value_enum, default_value_t = ProfileMode::Minimal)]
        profile: ProfileMode,
    },
    /// Iterated correct belief of an event within a space.
    Cb {
        #[arg(long)]
        space: String,
        /// Event file: a JSON list of states.
        #[arg(long, value_name = "FILE")]
        event: PathBuf,
        /// Iteration depth: a stage count or "inf" for the fixed point.
        #[arg(long, value_parser = parse_depth, default_value = "inf")]
        m: CbDepth,
        /// Include every iteration stage in the output.
        #[arg(long)]
        trace: bool,
    },
    /// Real types of one agent consistent with iterated correct belief
    /// inside her own structure.
    RealCb {
        #[arg(long)]
        space: String,
        #[arg(long)]
        agent: String,
        #[arg(long, value_enum, default_value_t = ProfileMode::Minimal)]
        profile: ProfileMode,
        #[arg(long, value_name = "FILE")]
        event: PathBuf,
        #[arg(long, value_parser = parse_depth, default_value = "inf")]
        m: CbDepth,
    },
    /// Prior existence decisions.
    Prior {
        #[command(subcommand)]
        which: PriorCmd,
    },
    /// Trade evaluation, search, and the no-trade theorem.
    Trade {
        #[command(subcommand)]
        which: TradeCmd,
    },
    /// Render belief arrows as Graphviz DOT.
    Dot {
        /// Render the states of this named space.
        #[arg(long, conflicts_with = "event")]
        space: Option<String>,
        /// Render the states listed in this event file.
        #[arg(long, value_name = "FILE")]
        event: Option<PathBuf>,
        /// Mark types outside this named space's components as imaginary.
        #[arg(long, value_name = "NAME")]
        real_space: Option<String>,
    },
    /// Re-run the bundled walkthroughs and compare them byte-for-byte
    /// against their frozen outputs.
    Reproduce,
}

#[derive(Debug, Subcommand)]
pub enum PriorCmd {
    /// Decide common-prior existence on a named space.
    Common {
        #[arg(long)]
        space: String,
    },
    /// Find or check a consistent prior for a profile on a named space.
    Consistent {
        #[arg(long)]
        space: String,
        #[arg(long, value_enum, default_value_t = ProfileMode::Minimal)]
        profile: ProfileMode,
        /// Distribution to check; omit to search for one instead.
        #[arg(long, value_name = "FILE")]
        pi: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TradeCmd {
    /// Evaluate a trade file against a profile.
    Check {
        #[arg(long)]
        space: String,
        #[arg(long, value_name = "FILE")]
        trade: PathBuf,
        #[arg(long, value_enum, default_value_t = ProfileMode::Minimal)]
        profile: ProfileMode,
        #[arg(long, value_enum)]
        sem: Sem,
        #[arg(long, value_enum, default_value_t = CliThreshold::Strict)]
        threshold: CliThreshold,
    },
    /// Search for a trade every owner accepts under the semantics.
    Find {
        #[arg(long)]
        space: String,
        #[arg(long, value_enum, default_value_t = ProfileMode::Minimal)]
        profile: ProfileMode,
        #[arg(long, value_enum)]
        sem: Sem,
        #[arg(long, value_enum, default_value_t = CliThreshold::Strict)]
        threshold: CliThreshold,
        #[arg(long, default_value_t = DEFAULT_PATTERN_CAP)]
        cap: u64,
    },
    /// Check the hypotheses and conclusion of the no-trade theorem for a
    /// designated-space distribution.
    NoTradeTheorem {
        #[arg(long)]
        space: String,
        #[arg(long, value_name = "FILE")]
        pi: PathBuf,
        #[arg(long, value_enum, default_value_t = ProfileMode::Minimal)]
        profile: ProfileMode,
        #[arg(long, default_value_t = DEFAULT_PATTERN_CAP)]
        cap: u64,
    },
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    /// Argument-shape problems; exits 2.
    Usage(String),
    /// Data problems found before the library is reached; exits 1.
    Message(String),
    /// Library-level failures; exits 1.
    Model(ModelError),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e)
    }
}

fn render_json(v: &Value) -> String {
    let mut text = serde_json::to_string_pretty(v).expect("in-memory JSON serializes");
    text.push('\n');
    text
}

/// Runs one parsed invocation and returns the full stdout text plus the
/// process exit code. Never panics on bad input; errors become JSON too.
pub fn execute(cli: &Cli) -> (String, i32) {
    match run(cli) {
        Ok((text, code)) => (text, code),
        Err(CliError::Usage(message)) => (
            render_json(&json!({"error": message, "kind": "usage"})),
            EXIT_USAGE,
        ),
        Err(CliError::Message(message)) => {
            (render_json(&json!({"error": message})), EXIT_ERROR)
        }
        Err(CliError::Model(e)) => (render_json(&json!({"error": e.to_string()})), EXIT_ERROR),
    }
}

fn run(cli: &Cli) -> Result<(String, i32), CliError> {
    let out = cli.out.unwrap_or(match cli.command {
        Command::Dot { .. } => OutFormat::Dot,
        _ => OutFormat::Json,
    });
    if out == OutFormat::Dot && !matches!(cli.command, Command::Dot { .. }) {
        return Err(CliError::Usage(
            "--out dot only applies to the dot subcommand".to_string(),
        ));
    }
    if let Command::Reproduce = cli.command {
        let (doc, code) = cmd_reproduce();
        return Ok((render_json(&doc), code));
    }
    let model = load(cli)?;
    let (doc, code) = match &cli.command {
        Command::Misalign { space, mode } => cmd_misalign(&model, space, *mode)?,
        Command::Closure { space, agent, mode } => {
            cmd_closure(&model, space, agent, (*mode).to_mode())?
        }
        Command::Classify { space, profile } => cmd_classify(&model, space, *profile)?,
        Command::Cb {
            space,
            event,
            m,
            trace,
        } => cmd_cb(&model, space, &read_file(event)?, *m, *trace)?,
        Command::RealCb {
            space,
            agent,
            profile,
            event,
            m,
        } => cmd_real_cb(&model, space, agent, *profile, &read_file(event)?, *m)?,
        Command::Prior { which } => match which {
            PriorCmd::Common { space } => cmd_prior_common(&model, space)?,
            PriorCmd::Consistent { space, profile, pi } => {
                let pi_text = pi.as_ref().map(read_file).transpose()?;
                cmd_prior_consistent(&model, space, *profile, pi_text.as_deref())?
            }
        },
        Command::Trade { which } => match which {
            TradeCmd::Check {
                space,
                trade,
                profile,
                sem,
                threshold,
            } => cmd_trade_check(
                &model,
                space,
                &read_file(trade)?,
                *profile,
                semantics_of(*sem, *threshold),
            )?,
            TradeCmd::Find {
                space,
                profile,
                sem,
                threshold,
                cap,
            } => cmd_trade_find(&model, space, *profile, semantics_of(*sem, *threshold), *cap)?,
            TradeCmd::NoTradeTheorem {
                space,
                pi,
                profile,
                cap,
            } => cmd_theorem(&model, space, &read_file(pi)?, *profile, *cap)?,
        },
        Command::Dot {
            space,
            event,
            real_space,
        } => {
            let event_text = event.as_ref().map(read_file).transpose()?;
            let dot = cmd_dot(
                &model,
                space.as_deref(),
                event_text.as_deref(),
                real_space.as_deref(),
            )?;
            return Ok(match out {
                OutFormat::Dot => (dot, EXIT_OK),
                OutFormat::Json => (render_json(&json!({"command": "dot", "dot": dot})), EXIT_OK),
            });
        }
        Command::Reproduce => unreachable!("handled before loading a model"),
    };
    Ok((render_json(&doc), code))
}

fn load(cli: &Cli) -> Result<LoadedModel, CliError> {
    let path = cli
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("--model is required".to_string()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Message(format!("cannot read {}: {e}", path.display())))?;
    load_model(&text).map_err(CliError::Model)
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Message(format!("cannot read {}: {e}", path.display())))
}

fn space_named<'m>(model: &'m LoadedModel, name: &str) -> Result<&'m StateSpace, CliError> {
    model
        .space(name)
        .ok_or_else(|| CliError::Message(format!("the model declares no space named {name:?}")))
}

fn agent_named(model: &LoadedModel, name: &str) -> Result<AgentId, CliError> {
    model
        .ambient
        .agent_by_name(name)
        .ok_or_else(|| CliError::Message(format!("the model declares no agent named {name:?}")))
}

// ---------------------------------------------------------------------------
// JSON rendering helpers
// ---------------------------------------------------------------------------

fn type_names(ambient: &AmbientStructure, types: &BTreeSet<TypeId>) -> Vec<String> {
    types
        .iter()
        .map(|t| ambient.type_name(*t).to_string())
        .collect()
}

/// `agent.type`, unambiguous across agents with clashing type names.
fn qualified_type(ambient: &AmbientStructure, t: TypeId) -> String {
    format!(
        "{}.{}",
        ambient.agent_name(ambient.type_agent(t)),
        ambient.type_name(t)
    )
}

fn space_json(ambient: &AmbientStructure, w: &StateSpace) -> Value {
    let mut obj = Map::new();
    for i in ambient.agent_ids() {
        obj.insert(
            ambient.agent_name(i).to_string(),
            json!(type_names(ambient, w.type_set(i))),
        );
    }
    Value::Object(obj)
}

fn state_keys<'s>(
    ambient: &AmbientStructure,
    states: impl IntoIterator<Item = &'s State>,
) -> Vec<String> {
    states.into_iter().map(|s| ambient.state_key(s)).collect()
}

fn prior_json(ambient: &AmbientStructure, prior: &Prior) -> Value {
    let mut obj = Map::new();
    for (s, m) in prior.masses() {
        obj.insert(ambient.state_key(s), json!(format_rational(m)));
    }
    Value::Object(obj)
}

fn trade_json(ambient: &AmbientStructure, x: &Trade) -> Value {
    let mut obj = Map::new();
    for ((a, s), p) in x.payoffs() {
        obj.insert(
            format!("{}@{}", ambient.agent_name(*a), ambient.state_key(s)),
            json!(format_rational(p)),
        );
    }
    Value::Object(obj)
}

fn feasibility_json(ambient: &AmbientStructure, r: &FeasibilityResult) -> Value {
    json!({
        "feasible": r.feasible,
        "prior": r.prior.as_ref().map(|p| prior_json(ambient, p)),
        "slack": r.slack.as_ref().map(format_rational),
        "certificate": r.certificate.as_ref().map(|c| {
            Value::Array(
                c.rows
                    .iter()
                    .map(|(row, multiplier)| {
                        json!({"row": row, "multiplier": format_rational(multiplier)})
                    })
                    .collect(),
            )
        }),
    })
}

fn depth_json(depth: CbDepth) -> Value {
    match depth {
        CbDepth::Infinite => json!("inf"),
        CbDepth::Finite(k) => json!(k),
    }
}

fn verdict_str(v: TradeVerdict) -> &'static str {
    match v {
        TradeVerdict::None => "none",
        TradeVerdict::Weak => "weak",
        TradeVerdict::Speculative => "speculative",
    }
}

fn semantics_json(semantics: TradeSemantics) -> Value {
    json!({
        "mode": match semantics.mode { AcceptanceMode::S1 => "s1", AcceptanceMode::S2 => "s2" },
        "threshold": match semantics.threshold {
            Threshold::Strict => "strict",
            Threshold::Weak => "weak",
        },
    })
}

fn report_json(ambient: &AmbientStructure, report: &AcceptanceReport) -> Value {
    let structures: Vec<Value> = report
        .structures
        .iter()
        .map(|r| {
            let mut assessments = Map::new();
            for (t, a) in &r.assessments {
                assessments.insert(
                    qualified_type(ambient, *t),
                    json!({"gain": format_rational(&a.gain), "accepts": a.accepts}),
                );
            }
            json!({
                "owner": ambient.agent_name(r.owner),
                "assessments": assessments,
                "real_commonly_accepting": type_names(ambient, &r.real_commonly_accepting),
            })
        })
        .collect();
    json!({
        "semantics": semantics_json(report.semantics),
        "structures": structures,
        "verdict": verdict_str(report.verdict),
    })
}

fn taxonomy_json(ambient: &AmbientStructure, taxonomy: &ProfileTaxonomy) -> Value {
    let mut per_agent = Map::new();
    for (i, t) in &taxonomy.per_agent {
        per_agent.insert(
            ambient.agent_name(*i).to_string(),
            json!({
                "new_states_introduced": t.new_states_introduced,
                "space": space_json(ambient, &t.state_space),
            }),
        );
    }
    json!({
        "degenerate": taxonomy.degenerate,
        "common": taxonomy.common,
        "cell": taxonomy.cell(),
        "table2_cell": table2_cell(taxonomy),
        "per_agent": per_agent,
    })
}

// ---------------------------------------------------------------------------
// Profile construction
// ---------------------------------------------------------------------------

fn build_structure(
    ambient: &AmbientStructure,
    owner: AgentId,
    w: &StateSpace,
    mode: ProfileMode,
) -> AgentDependentStructure {
    match mode {
        ProfileMode::Minimal => minimal_structure(ambient, owner, w),
        ProfileMode::Definition => {
            let run = agent_closure(ambient, owner, w, ClosureMode::Definition);
            AgentDependentStructure::new(ambient, owner, w.type_set(owner).clone(), run.result)
                .expect("definition closures contain the seed and are belief-closed")
        }
    }
}

fn build_profile(
    ambient: &AmbientStructure,
    w: &StateSpace,
    mode: ProfileMode,
) -> Vec<AgentDependentStructure> {
    ambient
        .agent_ids()
        .map(|i| build_structure(ambient, i, w, mode))
        .collect()
}

/// Pairs each structure with its slack-maximizing common prior; a structure
/// without one is a hard error, since every downstream check needs the
/// priors.
fn profile_priors(
    ambient: &AmbientStructure,
    profile: &[AgentDependentStructure],
) -> Result<Vec<(AgentDependentStructure, Prior)>, CliError> {
    profile
        .iter()
        .map(|c| {
            let result = find_common_prior(ambient, c.space())?;
            match (result.feasible, result.prior) {
                (true, Some(prior)) => Ok((c.clone(), prior)),
                _ => Err(CliError::Message(format!(
                    "the structure owned by {} admits no common prior",
                    ambient.agent_name(c.owner())
                ))),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

fn cmd_misalign(
    model: &LoadedModel,
    space: &str,
    mode: MisalignMode,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    if let Err(witness) = validate_nonredundant(ambient) {
        return Err(CliError::Message(format!(
            "redundant ambient: {}; hierarchy comparison and belief closure can disagree here, \
             so the check refuses to answer",
            witness.describe(ambient)
        )));
    }
    let mut doc = Map::new();
    doc.insert("command".to_string(), json!("misalign"));
    doc.insert("space".to_string(), json!(space));
    let mut misaligned = false;
    if matches!(mode, MisalignMode::Def | MisalignMode::Both) {
        let verdict = misaligned_by_definition(ambient, w).map(|v| {
            json!({
                "agent": ambient.agent_name(v.agent),
                "type": ambient.type_name(v.type_id),
                "order": v.order,
                "co_agent": ambient.agent_name(v.co_agent),
                "offending": ambient.type_name(v.offending),
                "detail": v.describe(ambient),
            })
        });
        misaligned |= verdict.is_some();
        doc.insert("definition".to_string(), verdict.unwrap_or(Value::Null));
    }
    if matches!(mode, MisalignMode::Closure | MisalignMode::Both) {
        let verdict = misaligned_by_closure(ambient, w).map(|v| {
            let owner_agent = ambient.type_agent(v.owner);
            let co_agent = ambient.type_agent(v.offending);
            json!({
                "agent": ambient.agent_name(owner_agent),
                "type": ambient.type_name(v.owner),
                "co_agent": ambient.agent_name(co_agent),
                "offending": ambient.type_name(v.offending),
                "detail": format!(
                    "type {} of agent {} assigns positive probability to co-type {} of agent {}, \
                     which the space does not allow",
                    ambient.type_name(v.owner),
                    ambient.agent_name(owner_agent),
                    ambient.type_name(v.offending),
                    ambient.agent_name(co_agent),
                ),
            })
        });
        misaligned |= verdict.is_some();
        doc.insert("closure".to_string(), verdict.unwrap_or(Value::Null));
    }
    doc.insert("misaligned".to_string(), json!(misaligned));
    let code = if misaligned { EXIT_FOUND } else { EXIT_OK };
    Ok((Value::Object(doc), code))
}

fn cmd_closure(
    model: &LoadedModel,
    space: &str,
    agent: &str,
    mode: ClosureMode,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let owner = agent_named(model, agent)?;
    let run = agent_closure(ambient, owner, w, mode);
    let structure =
        AgentDependentStructure::new(ambient, owner, w.type_set(owner).clone(), run.result.clone())
            .expect("closure fixed points are belief-closed and keep the owner's types");
    let stages: Vec<Value> = run.trace.iter().map(|s| space_json(ambient, s)).collect();
    Ok((
        json!({
            "command": "closure",
            "space": space,
            "agent": agent,
            "mode": mode.as_str(),
            "stages": stages,
            "result": space_json(ambient, &run.result),
            "real": type_names(ambient, structure.real_types()),
            "imaginary": type_names(ambient, &structure.imaginary_types()),
        }),
        EXIT_OK,
    ))
}

fn cmd_classify(
    model: &LoadedModel,
    space: &str,
    profile: ProfileMode,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let structures = build_profile(ambient, w, profile);
    let taxonomy = classify_profile(ambient, &structures, w)?;
    let mut doc = taxonomy_json(ambient, &taxonomy);
    let obj = doc.as_object_mut().expect("taxonomy renders as an object");
    obj.insert("command".to_string(), json!("classify"));
    obj.insert("space".to_string(), json!(space));
    obj.insert("profile".to_string(), json!(profile.as_str()));
    Ok((doc, EXIT_OK))
}

fn cmd_cb(
    model: &LoadedModel,
    space: &str,
    event_text: &str,
    depth: CbDepth,
    trace: bool,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let event = parse_event_file(ambient, event_text)?.restrict_to(ambient, w);
    let run = common_correct_belief(ambient, w, &event, depth);
    let mut doc = Map::new();
    doc.insert("command".to_string(), json!("cb"));
    doc.insert("space".to_string(), json!(space));
    doc.insert("m".to_string(), depth_json(depth));
    doc.insert(
        "event".to_string(),
        json!(state_keys(ambient, run.input.states())),
    );
    doc.insert(
        "result".to_string(),
        json!(state_keys(ambient, run.result().states())),
    );
    doc.insert("fixpoint_depth".to_string(), json!(run.fixpoint_depth));
    if trace {
        let stages: Vec<Value> = run
            .stages
            .iter()
            .map(|e| json!(state_keys(ambient, e.states())))
            .collect();
        doc.insert("stages".to_string(), Value::Array(stages));
    }
    Ok((Value::Object(doc), EXIT_OK))
}

fn cmd_real_cb(
    model: &LoadedModel,
    space: &str,
    agent: &str,
    profile: ProfileMode,
    event_text: &str,
    depth: CbDepth,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let owner = agent_named(model, agent)?;
    let structure = build_structure(ambient, owner, w, profile);
    let event = parse_event_file(ambient, event_text)?.restrict_to(ambient, structure.space());
    let (types, run) = real_cb(ambient, &structure, &event, depth);
    Ok((
        json!({
            "command": "real-cb",
            "space": space,
            "agent": agent,
            "profile": profile.as_str(),
            "m": depth_json(depth),
            "structure_space": space_json(ambient, structure.space()),
            "real_types": type_names(ambient, structure.real_types()),
            "event": state_keys(ambient, run.input.states()),
            "cb_result": state_keys(ambient, run.result().states()),
            "fixpoint_depth": run.fixpoint_depth,
            "types": type_names(ambient, &types),
        }),
        EXIT_OK,
    ))
}

fn cmd_prior_common(model: &LoadedModel, space: &str) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let result = find_common_prior(ambient, w)?;
    let mut doc = feasibility_json(ambient, &result);
    let obj = doc.as_object_mut().expect("feasibility renders as an object");
    obj.insert("command".to_string(), json!("prior-common"));
    obj.insert("space".to_string(), json!(space));
    Ok((doc, EXIT_OK))
}

fn cmd_prior_consistent(
    model: &LoadedModel,
    space: &str,
    profile: ProfileMode,
    pi_text: Option<&str>,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let structures = build_profile(ambient, w, profile);
    let with_priors = profile_priors(ambient, &structures)?;
    let structures_json: Vec<Value> = with_priors
        .iter()
        .map(|(c, p)| {
            json!({
                "owner": ambient.agent_name(c.owner()),
                "space": space_json(ambient, c.space()),
                "prior": prior_json(ambient, p),
            })
        })
        .collect();
    let mut doc = Map::new();
    doc.insert("command".to_string(), json!("prior-consistent"));
    doc.insert("space".to_string(), json!(space));
    doc.insert("profile".to_string(), json!(profile.as_str()));
    doc.insert("structures".to_string(), Value::Array(structures_json));
    match pi_text {
        Some(text) => {
            let pi = parse_prior_file(ambient, w.clone(), text)?;
            let verdict = check_consistent_prior(ambient, &pi, &with_priors)?;
            doc.insert("action".to_string(), json!("check"));
            doc.insert("pi".to_string(), prior_json(ambient, &pi));
            doc.insert("consistent".to_string(), json!(verdict.is_consistent()));
            doc.insert("detail".to_string(), json!(verdict.describe(ambient)));
        }
        None => {
            let result = find_consistent_prior(ambient, w, &with_priors)?;
            let feasibility = feasibility_json(ambient, &result);
            doc.insert("action".to_string(), json!("find"));
            for (k, v) in feasibility.as_object().expect("object").iter() {
                doc.insert(k.clone(), v.clone());
            }
        }
    }
    Ok((Value::Object(doc), EXIT_OK))
}

fn cmd_trade_check(
    model: &LoadedModel,
    space: &str,
    trade_text: &str,
    profile: ProfileMode,
    semantics: TradeSemantics,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let x = parse_trade_file(ambient, trade_text)?;
    let structures = build_profile(ambient, w, profile);
    let report = evaluate_trade(ambient, &x, &structures, semantics)?;
    let taxonomy = classify_profile(ambient, &structures, w)?;
    let code = if report.verdict == TradeVerdict::Speculative {
        EXIT_FOUND
    } else {
        EXIT_OK
    };
    let mut doc = report_json(ambient, &report);
    let obj = doc.as_object_mut().expect("report renders as an object");
    obj.insert("command".to_string(), json!("trade-check"));
    obj.insert("space".to_string(), json!(space));
    obj.insert("profile".to_string(), json!(profile.as_str()));
    obj.insert("trade".to_string(), trade_json(ambient, &x));
    obj.insert("cell".to_string(), json!(taxonomy.cell()));
    obj.insert("table2_cell".to_string(), json!(table2_cell(&taxonomy)));
    Ok((doc, code))
}

fn cmd_trade_find(
    model: &LoadedModel,
    space: &str,
    profile: ProfileMode,
    semantics: TradeSemantics,
    cap: u64,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let structures = build_profile(ambient, w, profile);
    let taxonomy = classify_profile(ambient, &structures, w)?;
    let found = find_speculative_trade(ambient, &structures, semantics, cap)?;
    let mut doc = Map::new();
    doc.insert("command".to_string(), json!("trade-find"));
    doc.insert("space".to_string(), json!(space));
    doc.insert("profile".to_string(), json!(profile.as_str()));
    doc.insert("semantics".to_string(), semantics_json(semantics));
    doc.insert("cap".to_string(), json!(cap));
    doc.insert("cell".to_string(), json!(taxonomy.cell()));
    doc.insert("table2_cell".to_string(), json!(table2_cell(&taxonomy)));
    doc.insert("found".to_string(), json!(found.is_some()));
    let code = match found {
        Some(x) => {
            let report = evaluate_trade(ambient, &x, &structures, semantics)?;
            doc.insert("trade".to_string(), trade_json(ambient, &x));
            doc.insert("report".to_string(), report_json(ambient, &report));
            EXIT_FOUND
        }
        None => {
            doc.insert("trade".to_string(), Value::Null);
            doc.insert("report".to_string(), Value::Null);
            EXIT_OK
        }
    };
    Ok((Value::Object(doc), code))
}

fn cmd_theorem(
    model: &LoadedModel,
    space: &str,
    pi_text: &str,
    profile: ProfileMode,
    cap: u64,
) -> Result<(Value, i32), CliError> {
    let ambient = &model.ambient;
    let w = space_named(model, space)?;
    let structures = build_profile(ambient, w, profile);
    let taxonomy = classify_profile(ambient, &structures, w)?;
    let with_priors = profile_priors(ambient, &structures)?;
    let pi = parse_prior_file(ambient, w.clone(), pi_text)?;
    let outcome = verify_no_trade_theorem(ambient, w, &with_priors, &pi, cap)?;
    let mut doc = Map::new();
    doc.insert("command".to_string(), json!("no-trade-theorem"));
    doc.insert("space".to_string(), json!(space));
    doc.insert("profile".to_string(), json!(profile.as_str()));
    doc.insert("cap".to_string(), json!(cap));
    doc.insert("pi".to_string(), prior_json(ambient, &pi));
    doc.insert("cell".to_string(), json!(taxonomy.cell()));
    doc.insert("table2_cell".to_string(), json!(table2_cell(&taxonomy)));
    let code = match &outcome {
        NoTradeOutcome::TheoremHolds => {
            doc.insert("outcome".to_string(), json!("theorem-holds"));
            EXIT_OK
        }
        NoTradeOutcome::Counterexample { trade, report } => {
            doc.insert("outcome".to_string(), json!("counterexample"));
            doc.insert("trade".to_string(), trade_json(ambient, trade));
            doc.insert("report".to_string(), report_json(ambient, report));
            EXIT_FOUND
        }
        NoTradeOutcome::HypothesisNotMet { reason, s1_trade } => {
            doc.insert("outcome".to_string(), json!("hypothesis-not-met"));
            doc.insert("reason".to_string(), json!(reason));
            match s1_trade {
                Some(x) => {
                    doc.insert("s1_trade".to_string(), trade_json(ambient, x));
                    EXIT_FOUND
                }
                None => {
                    doc.insert("s1_trade".to_string(), Value::Null);
                    EXIT_OK
                }
            }
        }
    };
    Ok((Value::Object(doc), code))
}

fn cmd_dot(
    model: &LoadedModel,
    space: Option<&str>,
    event_text: Option<&str>,
    real_space: Option<&str>,
) -> Result<String, CliError> {
    let ambient = &model.ambient;
    let states: Vec<State> = match (space, event_text) {
        (Some(name), None) => space_named(model, name)?.states(ambient),
        (None, Some(text)) => parse_event_file(ambient, text)?
            .states()
            .iter()
            .cloned()
            .collect(),
        _ => {
            return Err(CliError::Usage(
                "dot needs exactly one of --space or --event".to_string(),
            ))
        }
    };
    let real: BTreeMap<AgentId, BTreeSet<TypeId>> = match real_space {
        Some(name) => {
            let w = space_named(model, name)?;
            ambient
                .agent_ids()
                .map(|i| (i, w.type_set(i).clone()))
                .collect()
        }
        None => BTreeMap::new(),
    };
    Ok(export_dot(ambient, &states, &real)?)
}

// ---------------------------------------------------------------------------
// Reproduce
// ---------------------------------------------------------------------------

const EVENT_LOOPS: &str = include_str!("../fixtures/events/loops.json");
const EVENT_OMEGA_TILDE: &str = include_str!("../fixtures/events/omega_tilde.json");
const PRIOR_EVEN_DIAGONAL: &str = include_str!("../fixtures/priors/even_diagonal.json");
const PRIOR_PI_REAL: &str = include_str!("../fixtures/priors/pi_real.json");
const TRADE_RAIN_BET: &str = include_str!("../fixtures/trades/rain_bet.json");

struct Row {
    name: &'static str,
    display: &'static str,
    golden: &'static str,
    expect_exit: i32,
    run: fn(&LoadedModel) -> Result<(String, i32), CliError>,
}

fn jr(result: Result<(Value, i32), CliError>) -> Result<(String, i32), CliError> {
    result.map(|(doc, code)| (render_json(&doc), code))
}

const S1_STRICT: TradeSemantics = TradeSemantics {
    mode: AcceptanceMode::S1,
    threshold: Threshold::Strict,
};
const S2_STRICT: TradeSemantics = TradeSemantics {
    mode: AcceptanceMode::S2,
    threshold: Threshold::Strict,
};

/// Every walkthrough from the write-up, as a frozen command + output pair.
/// All rows run on the bundled four-type weather model.
const ROWS: &[Row] = &[
    Row {
        name: "misalign-omega-real",
        display: "misalign --space omega_real",
        golden: include_str!("../fixtures/golden/misalign_omega_real.json"),
        expect_exit: EXIT_FOUND,
        run: |m| jr(cmd_misalign(m, "omega_real", MisalignMode::Both)),
    },
    Row {
        name: "misalign-full",
        display: "misalign --space full",
        golden: include_str!("../fixtures/golden/misalign_full.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_misalign(m, "full", MisalignMode::Both)),
    },
    Row {
        name: "closure-minimal-a",
        display: "closure --space omega_real --agent a --mode minimal",
        golden: include_str!("../fixtures/golden/closure_minimal_a.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_closure(m, "omega_real", "a", ClosureMode::Minimal)),
    },
    Row {
        name: "closure-minimal-b",
        display: "closure --space omega_real --agent b --mode minimal",
        golden: include_str!("../fixtures/golden/closure_minimal_b.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_closure(m, "omega_real", "b", ClosureMode::Minimal)),
    },
    Row {
        name: "closure-definition-a",
        display: "closure --space omega_real --agent a --mode definition",
        golden: include_str!("../fixtures/golden/closure_definition_a.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_closure(m, "omega_real", "a", ClosureMode::Definition)),
    },
    Row {
        name: "classify-omega-real",
        display: "classify --space omega_real --profile minimal",
        golden: include_str!("../fixtures/golden/classify_omega_real.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_classify(m, "omega_real", ProfileMode::Minimal)),
    },
    Row {
        name: "classify-full",
        display: "classify --space full --profile minimal",
        golden: include_str!("../fixtures/golden/classify_full.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_classify(m, "full", ProfileMode::Minimal)),
    },
    Row {
        name: "cb-loops",
        display: "cb --space full --event fixtures/events/loops.json --m inf --trace",
        golden: include_str!("../fixtures/golden/cb_loops.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_cb(m, "full", EVENT_LOOPS, CbDepth::Infinite, true)),
    },
    Row {
        name: "real-cb-a",
        display: "real-cb --space omega_real --agent a --profile minimal \
                  --event fixtures/events/loops.json",
        golden: include_str!("../fixtures/golden/real_cb_a.json"),
        expect_exit: EXIT_OK,
        run: |m| {
            jr(cmd_real_cb(
                m,
                "omega_real",
                "a",
                ProfileMode::Minimal,
                EVENT_LOOPS,
                CbDepth::Infinite,
            ))
        },
    },
    Row {
        name: "real-cb-b",
        display: "real-cb --space omega_real --agent b --profile minimal \
                  --event fixtures/events/loops.json",
        golden: include_str!("../fixtures/golden/real_cb_b.json"),
        expect_exit: EXIT_OK,
        run: |m| {
            jr(cmd_real_cb(
                m,
                "omega_real",
                "b",
                ProfileMode::Minimal,
                EVENT_LOOPS,
                CbDepth::Infinite,
            ))
        },
    },
    Row {
        name: "prior-common-full",
        display: "prior common --space full",
        golden: include_str!("../fixtures/golden/prior_common_full.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_prior_common(m, "full")),
    },
    Row {
        name: "prior-common-upsilon-a",
        display: "prior common --space upsilon_a",
        golden: include_str!("../fixtures/golden/prior_common_upsilon_a.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_prior_common(m, "upsilon_a")),
    },
    Row {
        name: "prior-common-upsilon-b",
        display: "prior common --space upsilon_b",
        golden: include_str!("../fixtures/golden/prior_common_upsilon_b.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_prior_common(m, "upsilon_b")),
    },
    Row {
        name: "prior-consistent-check",
        display: "prior consistent --space omega_real --profile minimal \
                  --pi fixtures/priors/pi_real.json",
        golden: include_str!("../fixtures/golden/prior_consistent_check.json"),
        expect_exit: EXIT_OK,
        run: |m| {
            jr(cmd_prior_consistent(
                m,
                "omega_real",
                ProfileMode::Minimal,
                Some(PRIOR_PI_REAL),
            ))
        },
    },
    Row {
        name: "prior-consistent-find",
        display: "prior consistent --space omega_real --profile minimal",
        golden: include_str!("../fixtures/golden/prior_consistent_find.json"),
        expect_exit: EXIT_OK,
        run: |m| jr(cmd_prior_consistent(m, "omega_real", ProfileMode::Minimal, None)),
    },
    Row {
        name: "trade-check-rain-s1",
        display: "trade check --space omega_real --trade fixtures/trades/rain_bet.json \
                  --profile minimal --sem s1 --threshold strict",
        golden: include_str!("../fixtures/golden/trade_check_rain_s1.json"),
        expect_exit: EXIT_FOUND,
        run: |m| {
            jr(cmd_trade_check(
                m,
                "omega_real",
                TRADE_RAIN_BET,
                ProfileMode::Minimal,
                S1_STRICT,
            ))
        },
    },
    Row {
        name: "trade-check-rain-s2",
        display: "trade check --space omega_real --trade fixtures/trades/rain_bet.json \
                  --profile minimal --sem s2 --threshold strict",
        golden: include_str!("../fixtures/golden/trade_check_rain_s2.json"),
        expect_exit: EXIT_OK,
        run: |m| {
            jr(cmd_trade_check(
                m,
                "omega_real",
                TRADE_RAIN_BET,
                ProfileMode::Minimal,
                S2_STRICT,
            ))
        },
    },
    Row {
        name: "trade-find-s1",
        display: "trade find --space omega_real --profile minimal --sem s1",
        golden: include_str!("../fixtures/golden/trade_find_s1.json"),
        expect_exit: EXIT_FOUND,
        run: |m| {
            jr(cmd_trade_find(
                m,
                "omega_real",
                ProfileMode::Minimal,
                S1_STRICT,
                DEFAULT_PATTERN_CAP,
            ))
        },
    },
    Row {
        name: "theorem-full",
        display: "trade no-trade-theorem --space full \
                  --pi fixtures/priors/even_diagonal.json --profile minimal",
        golden: include_str!("../fixtures/golden/theorem_full.json"),
        expect_exit: EXIT_OK,
        run: |m| {
            jr(cmd_theorem(
                m,
                "full",
                PRIOR_EVEN_DIAGONAL,
                ProfileMode::Minimal,
                DEFAULT_PATTERN_CAP,
            ))
        },
    },
    Row {
        name: "theorem-definition",
        display: "trade no-trade-theorem --space omega_real \
                  --pi fixtures/priors/pi_real.json --profile definition",
        golden: include_str!("../fixtures/golden/theorem_definition.json"),
        expect_exit: EXIT_OK,
        run: |m| {
            jr(cmd_theorem(
                m,
                "omega_real",
                PRIOR_PI_REAL,
                ProfileMode::Definition,
                DEFAULT_PATTERN_CAP,
            ))
        },
    },
    Row {
        name: "theorem-minimal",
        display: "trade no-trade-theorem --space omega_real \
                  --pi fixtures/priors/pi_real.json --profile minimal",
        golden: include_str!("../fixtures/golden/theorem_minimal.json"),
        expect_exit: EXIT_FOUND,
        run: |m| {
            jr(cmd_theorem(
                m,
                "omega_real",
                PRIOR_PI_REAL,
                ProfileMode::Minimal,
                DEFAULT_PATTERN_CAP,
            ))
        },
    },
    Row {
        name: "dot-real",
        display: "dot --event fixtures/events/omega_tilde.json --real-space omega_real --out dot",
        golden: include_str!("../fixtures/golden/dot_real.dot"),
        expect_exit: EXIT_OK,
        run: |m| {
            cmd_dot(m, None, Some(EVENT_OMEGA_TILDE), Some("omega_real"))
                .map(|dot| (dot, EXIT_OK))
        },
    },
    Row {
        name: "dot-plain",
        display: "dot --event fixtures/events/omega_tilde.json --out dot",
        golden: include_str!("../fixtures/golden/dot_plain.dot"),
        expect_exit: EXIT_OK,
        run: |m| cmd_dot(m, None, Some(EVENT_OMEGA_TILDE), None).map(|dot| (dot, EXIT_OK)),
    },
];

fn sha256_hex(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

fn cmd_reproduce() -> (Value, i32) {
    let model = fixtures::u4();
    let mut rows = Vec::new();
    let mut all_match = true;
    for row in ROWS {
        let (output, exit) = match (row.run)(&model) {
            Ok(pair) => pair,
            Err(CliError::Usage(m)) | Err(CliError::Message(m)) => (m, EXIT_ERROR),
            Err(CliError::Model(e)) => (e.to_string(), EXIT_ERROR),
        };
        let matches = output == row.golden && exit == row.expect_exit;
        all_match &= matches;
        rows.push(json!({
            "name": row.name,
            "command": row.display,
            "exit": exit,
            "match": matches,
        }));
    }
    let doc = json!({
        "command": "reproduce",
        "model": "u4",
        "inputs": {
            "u4.json": sha256_hex(fixtures::U4_JSON),
            "events/loops.json": sha256_hex(EVENT_LOOPS),
            "events/omega_tilde.json": sha256_hex(EVENT_OMEGA_TILDE),
            "priors/even_diagonal.json": sha256_hex(PRIOR_EVEN_DIAGONAL),
            "priors/pi_real.json": sha256_hex(PRIOR_PI_REAL),
            "trades/rain_bet.json": sha256_hex(TRADE_RAIN_BET),
        },
        "rows": rows,
        "all_match": all_match,
    });
    let code = if all_match { EXIT_OK } else { EXIT_ERROR };
    (doc, code)
}
