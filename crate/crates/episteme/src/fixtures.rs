//! Bundled example models, shared by the unit tests, the integration tests,
//! and the command-line walkthroughs in the README.
//!
//! * `u4`: the four-type weather ambient. Each agent is either certain of
//!   rain (and of the co-agent's rain type) or certain of no rain. Named
//!   spaces: the real space `omega_real` (rain-certain `a` against
//!   no-rain-certain `b`), the `full` product, and the two self-consistent
//!   loops `upsilon_a`, `upsilon_b`.
//! * `u8_redundant`: `u4` extended with a half-confident pair and a
//!   third/two-thirds pair whose mixtures stay inside a single nature state.
//!   The extension types are hierarchy-equivalent to the certain types, so
//!   this ambient is redundant — kept as the canonical redundant example.
//! * `u8n`: the same shape with mixtures straddling both nature states; all
//!   eight types have pairwise distinct hierarchies, so it is non-redundant.
//! * `mixture`: two disconnected belief loops (`u_loop`, `v_loop`) with
//!   different odds on nature. Its full space has a one-parameter family of
//!   common priors; the loops have unique ones.
//! * `noprior`: a four-type ambient whose prior equations only admit the
//!   zero solution, so no common prior exists at all.
//! * `twostate`: one type per agent, both uniform over nature; the unique
//!   common prior is the uniform one.

use crate::model::{load_model, LoadedModel};

pub const U4_JSON: &str = include_str!("../fixtures/u4.json");
pub const U8_JSON: &str = include_str!("../fixtures/u8.json");
pub const U8N_JSON: &str = include_str!("../fixtures/u8n.json");
pub const MIXTURE_JSON: &str = include_str!("../fixtures/mixture.json");
pub const NOPRIOR_JSON: &str = include_str!("../fixtures/noprior.json");
pub const TWOSTATE_JSON: &str = include_str!("../fixtures/twostate.json");

pub fn u4() -> LoadedModel {
    load_model(U4_JSON).expect("bundled model is valid")
}

pub fn u8_redundant() -> LoadedModel {
    load_model(U8_JSON).expect("bundled model is valid")
}

pub fn u8n() -> LoadedModel {
    load_model(U8N_JSON).expect("bundled model is valid")
}

pub fn mixture() -> LoadedModel {
    load_model(MIXTURE_JSON).expect("bundled model is valid")
}

pub fn noprior() -> LoadedModel {
    load_model(NOPRIOR_JSON).expect("bundled model is valid")
}

pub fn twostate() -> LoadedModel {
    load_model(TWOSTATE_JSON).expect("bundled model is valid")
}
