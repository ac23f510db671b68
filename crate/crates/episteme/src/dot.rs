//! Graphviz export of belief diagrams.
//!
//! Each rendered state is a small circle — filled black when every
//! coordinate type is real, empty otherwise — with the state key as an
//! outside label. Each agent contributes one colored arrow per support
//! point of her type's belief at each state; the arrow is dashed when the
//! type holding the belief is imaginary. Arrows whose target lies outside
//! the rendered set are omitted, so belief-closed sets show every arrow.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::One;

use crate::model::{
    format_rational, AgentId, AmbientStructure, Event, ModelError, State, TypeId,
};

/// Agent colors in declaration order, cycling if there are more agents than
/// palette entries. The first two match the blue/green convention of the
/// bundled examples.
pub const AGENT_COLORS: [&str; 6] = ["blue", "green", "red", "orange", "purple", "brown"];

pub fn agent_color(i: AgentId) -> &'static str {
    AGENT_COLORS[i.0 % AGENT_COLORS.len()]
}

/// Renders the given states as a DOT digraph. `real` marks each agent's
/// real types; an agent absent from the map is unrestricted, so an empty
/// map renders everything as real (all nodes filled, all arrows solid).
/// Node order follows the input order (duplicates are dropped), which makes
/// the output deterministic for a fixed call.
pub fn export_dot(
    ambient: &AmbientStructure,
    states: &[State],
    real: &BTreeMap<AgentId, BTreeSet<TypeId>>,
) -> Result<String, ModelError> {
    Event::new(ambient, states.iter().cloned().collect())?;
    let mut index: BTreeMap<&State, usize> = BTreeMap::new();
    let mut ordered: Vec<&State> = Vec::new();
    for s in states {
        if !index.contains_key(s) {
            index.insert(s, ordered.len());
            ordered.push(s);
        }
    }
    let is_real = |t: TypeId| {
        real.get(&ambient.type_agent(t))
            .is_none_or(|set| set.contains(&t))
    };
    let mut out = String::new();
    out.push_str("digraph beliefs {\n");
    out.push_str("  node [shape=circle, width=0.25, fixedsize=true, label=\"\"];\n");
    for (k, s) in ordered.iter().enumerate() {
        let filled = s.profile.iter().all(|&t| is_real(t));
        let style = if filled {
            "style=filled, fillcolor=black"
        } else {
            "style=solid"
        };
        writeln!(
            out,
            "  s{k} [{style}, xlabel=\"{}\"];",
            ambient.state_key(s)
        )
        .expect("string writes cannot fail");
    }
    for (k, s) in ordered.iter().enumerate() {
        for i in ambient.agent_ids() {
            let t = s.profile[i.0];
            for (target, mass) in ambient.introspective_belief(t) {
                let Some(&to) = index.get(&target) else {
                    continue;
                };
                let mut attrs = format!("color={}", agent_color(i));
                if !is_real(t) {
                    attrs.push_str(", style=dashed");
                }
                if !mass.is_one() {
                    write!(attrs, ", label=\"{}\"", format_rational(&mass))
                        .expect("string writes cannot fail");
                }
                writeln!(out, "  s{k} -> s{to} [{attrs}];").expect("string writes cannot fail");
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}
