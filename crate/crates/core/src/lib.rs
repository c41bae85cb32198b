//! Simulator and property checks for the mixed Hegselmann-Krause opinion
//! model on finite and infinite bounded-degree social graphs.
//!
//! The mixed model covers the synchronous and asynchronous HK models and the
//! Deffuant model as special cases. Infinite graphs are simulated exactly over
//! a finite horizon by truncating to the light cone of a finite target set.

pub mod cli;
pub mod dynamics;
pub mod engine;
pub mod graph;
pub mod monitors;
pub mod oracle;
pub mod sampling;
pub mod scenario;
pub mod suite;

pub use dynamics::{AlphaDraw, Mode, ModelParams, OpinionState};
pub use engine::{InitialRule, ModelSpec, Trace, World, WorldConfig, run, run_checked};
pub use graph::{Edge, EdgeSet, GraphSpec, Matching, SocialGraph, VertexId, make_graph};
pub use monitors::{Contract, ContractOutcome, MonitorKind};
pub use sampling::{AlphaSchedule, MatchingSampler, Preset, Seed};
