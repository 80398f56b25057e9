//! Multi-robot collaboration engine with a retrospective planning loop.
//!
//! The crate is organized around one cycle: agents discuss a joint action
//! plan ([`dialogue`]), the plan is parsed from a structured block
//! ([`actions`]), checked for reachability, collisions, and subgoal
//! feasibility ([`validation`]), executed in a deterministic grid world
//! ([`world`]), and then critiqued by a second model whose critique and
//! proposal enter a bounded long-term memory ([`memory`]) that feeds the
//! next round's prompts. Chat backends are pluggable ([`llm`]) and every
//! episode writes a replayable transcript ([`transcript`]).

pub mod actions;
pub mod dialogue;
pub mod llm;
pub mod memory;
pub mod metrics;
pub mod transcript;
pub mod validation;
pub mod world;
