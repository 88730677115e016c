//! Language-driven object navigation in a deterministic 2D gridworld.
//!
//! The pipeline mirrors a frontier-exploration navigation stack: a simulated
//! detector ([`perception`]) feeds a semantic occupancy map ([`mapping`]),
//! frontiers are extracted and summarized in natural language ([`frontier`]),
//! a tree-of-thoughts search over a completion model picks the frontier to
//! explore ([`reasoning`], [`llm`]), and an agent loop ties it all together
//! ([`agent`]). The [`bench`] module generates instruction suites, runs
//! them, and scores SR/SPL.

pub mod agent;
pub mod bench;
pub mod frontier;
pub mod grid;
pub mod llm;
pub mod mapping;
pub mod perception;
pub mod reasoning;
pub mod transcript;
pub mod world;

pub use grid::Cell;
