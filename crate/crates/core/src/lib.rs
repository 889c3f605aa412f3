//! Vehicle-assisted multi-hop edge offloading: simulator, MADDPG trainer and
//! baseline policies.

pub mod agents;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod mobility;
pub mod neural;
pub mod offload;
pub mod radio;
pub mod seeds;

pub use config::{Policy, ScenarioConfig};
pub use error::{Error, Result};
