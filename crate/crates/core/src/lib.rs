//! Femto-access sharing game: one sharing customer splits its bandwidth into
//! green and yellow parts, requesting customers pick bandwidth-request
//! strategies, and a decentralized reward-inaction automaton learns a stable
//! joint strategy that is then checked against an exhaustive pure Nash
//! equilibrium oracle.

pub mod allocator;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod harness;
pub mod learning;
pub mod model;
pub mod par;
pub mod scenario;

pub use error::{Error, Result};
pub use game::Game;
pub use par::Execution;
pub use scenario::{load_scenario, Scenario};
