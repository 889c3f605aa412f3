//! MADDPG trainer and the two heuristic baselines.

mod baseline;
mod maddpg;
mod noise;
mod replay;

pub use baseline::{policy_multihop_greedy, policy_single_hop, ServerView};
pub use maddpg::{masked_argmax, select_action, AgentAction, AgentNets, LossReport, Maddpg};
pub use noise::ExplorationNoise;
pub use replay::{ReplayBuffer, Transition};
