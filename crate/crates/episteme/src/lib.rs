//! Finite-model engine for interactive beliefs on misaligned state spaces.
//!
//! The crate models finite two-or-more-agent type structures with exact
//! rational beliefs and answers, deterministically:
//!
//! * whether a product state space is *misaligned* — some type's belief
//!   supports a co-type whose finite-order hierarchy no type of the space
//!   matches — both via hierarchy comparison and via the equivalent
//!   belief-closure test ([`hierarchy`]);
//! * the agent-dependent structures obtained by closing a space under an
//!   agent's introspection, their minimality, and the classification of a
//!   profile of such structures ([`closure`]);
//! * belief, mutual belief, and common belief of events, together with the
//!   variants restricted to real types ([`epistemics`]);
//! * existence of common priors and of consistent priors, by exact linear
//!   programming ([`priors`], [`linprog`]);
//! * whether a profile admits speculative trade, including search for a
//!   witness trade and verification of the no-trade property ([`trade`]).
//!
//! All computation is exact (`num_rational::BigRational`); every map is
//! ordered and every scan follows declaration order, so results are
//! reproducible byte for byte.

pub mod cli;
pub mod closure;
pub mod dot;
pub mod epistemics;
pub mod fixtures;
pub mod hierarchy;
pub mod linprog;
pub mod model;
pub mod priors;
pub mod trade;
