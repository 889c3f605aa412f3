use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Remaining work below this many cycles counts as finished.
const CYCLE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueuedTask {
    pub task_id: u64,
    pub remaining_cycles: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub task_id: u64,
    pub server: usize,
    pub time: f64,
}

/// Non-preemptive FIFO edge server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeServerState {
    pub id: usize,
    pub compute_rate: f64,
    pub fifo: VecDeque<QueuedTask>,
    /// Time up to which the queue has been drained.
    pub clock: f64,
}

impl EdgeServerState {
    pub fn new(id: usize, compute_rate: f64) -> Self {
        assert!(compute_rate > 0.0, "compute rate must be positive");
        Self { id, compute_rate, fifo: VecDeque::new(), clock: 0.0 }
    }

    /// Cycles of admitted, unfinished work.
    pub fn backlog(&self) -> f64 {
        self.fifo.iter().map(|q| q.remaining_cycles).sum()
    }

    /// Wait a task joining now would see before its own service starts.
    pub fn queueing_latency(&self) -> f64 {
        self.backlog() / self.compute_rate
    }

    /// Appends a task at time `at`; the queue must already be drained to `at`.
    pub fn admit(&mut self, task_id: u64, cycles: f64, at: f64) {
        debug_assert!(at + 1e-9 >= self.clock, "admission in the past");
        self.clock = self.clock.max(at);
        self.fifo.push_back(QueuedTask { task_id, remaining_cycles: cycles });
    }

    pub fn remove(&mut self, task_id: u64) -> Option<QueuedTask> {
        let pos = self.fifo.iter().position(|q| q.task_id == task_id)?;
        self.fifo.remove(pos)
    }

    /// Drains work up to time `until`, returning finished tasks in order.
    pub fn advance_to(&mut self, until: f64) -> Vec<Completion> {
        let mut done = Vec::new();
        if until <= self.clock {
            return done;
        }
        while let Some(head) = self.fifo.front_mut() {
            let finish = self.clock + head.remaining_cycles / self.compute_rate;
            let capacity = (until - self.clock) * self.compute_rate;
            if head.remaining_cycles <= capacity + CYCLE_EPS {
                done.push(Completion { task_id: head.task_id, server: self.id, time: finish.min(until) });
                self.clock = finish.min(until);
                self.fifo.pop_front();
            } else {
                head.remaining_cycles -= capacity;
                break;
            }
        }
        self.clock = until;
        done
    }
}

/// Computing latency of `size_bits` on a server of rate `compute_rate`.
pub fn computing_latency(size_bits: f64, cycles_per_bit: f64, compute_rate: f64) -> f64 {
    cycles_per_bit * size_bits / compute_rate
}

/// Advances every server by `dt`; completions sorted by (time, task id).
pub fn advance_servers(servers: &mut [EdgeServerState], dt: f64) -> Vec<Completion> {
    let mut all: Vec<Completion> = servers
        .iter_mut()
        .flat_map(|s| {
            let until = s.clock + dt;
            s.advance_to(until)
        })
        .collect();
    all.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.task_id.cmp(&b.task_id)));
    all
}
