//! Hierarchical mission planning for heterogeneous robot fleets.
//!
//! A mission is decomposed into an AND/XOR task tree (built by hand, or by an
//! LLM driving the [`builder`] API through tool calls), the tree is expanded
//! into ranked multi-robot task allocation alternatives ([`mrta`]), and a
//! chosen alternative is turned into per-robot action schedules
//! ([`schedule`]).

pub mod builder;
pub mod cli;
pub mod llm;
pub mod model;
pub mod mrta;
pub mod render;
pub mod schedule;
pub mod subtree;
