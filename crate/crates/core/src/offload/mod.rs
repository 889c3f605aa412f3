//! Task lifecycle: generation, routing, transfer and queue accounting, and
//! the per-slot engine that ties them to the mobility model.

mod engine;
mod ledger;
mod route;
mod server;
mod task;

pub use engine::{Engine, SlotOutcome};
pub use ledger::{MetricsLedger, SlotMetrics};
pub use route::{build_route, routes_from, transmission_latency, RoutePath};
pub use server::{advance_servers, computing_latency, Completion, EdgeServerState, QueuedTask};
pub use task::{generate_tasks, LatencyLedger, Task, TaskStatus};
