use rand::Rng;
use serde::{Deserialize, Serialize};

use super::route::RoutePath;
use crate::seeds::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskStatus {
    Pending,
    InTransit,
    Queued,
    Done,
    Expired,
}

/// Latency components of one task (s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyLedger {
    pub trans: f64,
    pub comp: f64,
    pub queue: f64,
    pub e2e: f64,
}

impl LatencyLedger {
    pub fn new(trans: f64, comp: f64, queue: f64) -> Self {
        Self { trans, comp, queue, e2e: trans + comp + queue }
    }

    pub fn meets(&self, deadline: f64) -> bool {
        self.e2e <= deadline
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: u64,
    pub owner: usize,
    pub birth_slot: usize,
    pub birth_time: f64,
    pub size_bits: f64,
    pub deadline_s: f64,
    /// Chosen destination; `None` until decided or when rejected.
    pub server: Option<usize>,
    /// The single route this task is committed to, if any.
    pub route: Option<RoutePath>,
    pub ledger: LatencyLedger,
    pub status: TaskStatus,
}

impl Task {
    pub fn new(id: u64, owner: usize, slot: usize, time: f64, size_bits: f64, deadline_s: f64) -> Self {
        Self {
            id,
            owner,
            birth_slot: slot,
            birth_time: time,
            size_bits,
            deadline_s,
            server: None,
            route: None,
            ledger: LatencyLedger::default(),
            status: TaskStatus::Pending,
        }
    }
}

/// Bernoulli(beta) arrival per device with uniform size in `size_range`,
/// rounded to whole bits.
pub fn generate_tasks(
    slot: usize,
    time: f64,
    devices: usize,
    beta: f64,
    size_range: (f64, f64),
    deadline_of: impl Fn(usize) -> f64,
    next_id: &mut u64,
    rng: &mut SimRng,
) -> Vec<Task> {
    let (lo, hi) = size_range;
    let mut out = Vec::new();
    for i in 0..devices {
        let arrives = rng.gen::<f64>() < beta;
        let u = rng.gen::<f64>();
        if arrives {
            let size = (lo + (hi - lo) * u).round();
            out.push(Task::new(*next_id, i, slot, time, size, deadline_of(i)));
            *next_id += 1;
        }
    }
    out
}
