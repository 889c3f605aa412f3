use std::collections::BTreeMap;

use super::ledger::MetricsLedger;
use super::route::routes_from;
use super::server::{computing_latency, Completion, EdgeServerState};
use super::task::{generate_tasks, LatencyLedger, Task, TaskStatus};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::mobility::{init_scenario, Scenario, TopologySnapshot};
use crate::radio::{allocate_bandwidth, hop_rate};
use crate::seeds::{self, SimRng, Stream};

#[derive(Debug, Clone)]
struct Transfer {
    task: Task,
    hop: usize,
    hop_bits_left: f64,
    elapsed: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SlotOutcome {
    pub slot: usize,
    pub completed: Vec<Task>,
    pub expired: Vec<Task>,
    /// Bits completed within deadline this slot, per owning device.
    pub rewards: Vec<f64>,
}

/// Slot-by-slot simulator of transfers, edge queues and vehicle motion.
///
/// Each call to [`Engine::step`] consumes one decision per pending task,
/// advances everything by one slot, and then draws the next slot's tasks.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: ScenarioConfig,
    scenario: Scenario,
    snapshot: TopologySnapshot,
    servers: Vec<EdgeServerState>,
    transit: Vec<Transfer>,
    queued: BTreeMap<u64, Task>,
    pending: Vec<Task>,
    ledger: MetricsLedger,
    slot: usize,
    next_id: u64,
    arrivals: SimRng,
}

impl Engine {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let scenario = init_scenario(cfg, seed)?;
        Ok(Self::from_scenario(cfg, scenario, seed))
    }

    /// Starts from a prepared layout (e.g. hand-placed devices).
    pub fn from_scenario(cfg: &ScenarioConfig, scenario: Scenario, seed: u64) -> Self {
        let snapshot = scenario.snapshot(&cfg.ranges);
        let servers = (0..cfg.num_servers)
            .map(|j| EdgeServerState::new(j, cfg.compute_rates[j]))
            .collect();
        let mut e = Self {
            cfg: cfg.clone(),
            scenario,
            snapshot,
            servers,
            transit: Vec::new(),
            queued: BTreeMap::new(),
            pending: Vec::new(),
            ledger: MetricsLedger::default(),
            slot: 0,
            next_id: 0,
            arrivals: seeds::rng(seed, Stream::Arrivals, 0),
        };
        e.draw_pending();
        e
    }

    fn draw_pending(&mut self) {
        let cfg = &self.cfg;
        self.pending = generate_tasks(
            self.slot,
            self.slot as f64 * cfg.slot_s,
            cfg.num_devices,
            cfg.beta,
            cfg.size_range_bits(),
            |i| cfg.deadline_of(i),
            &mut self.next_id,
            &mut self.arrivals,
        );
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn snapshot(&self) -> &TopologySnapshot {
        &self.snapshot
    }

    pub fn servers(&self) -> &[EdgeServerState] {
        &self.servers
    }

    /// Tasks that arrived at the start of the current slot, awaiting decisions.
    pub fn pending(&self) -> &[Task] {
        &self.pending
    }

    /// Replaces the tasks awaiting decisions (for scripted traces).
    pub fn set_pending(&mut self, tasks: Vec<Task>) {
        self.next_id = self.next_id.max(tasks.iter().map(|t| t.id + 1).max().unwrap_or(0));
        self.pending = tasks;
    }

    pub fn ledger(&self) -> &MetricsLedger {
        &self.ledger
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.cfg.slots
    }

    /// Bits of tasks currently in transit or queued at a server.
    pub fn in_flight_bits(&self) -> f64 {
        self.transit.iter().map(|t| t.task.size_bits).sum::<f64>()
            + self.queued.values().map(|t| t.size_bits).sum::<f64>()
    }

    /// Buffered work at server `j`, expressed in bits.
    pub fn buffered_bits(&self, j: usize) -> f64 {
        self.servers[j].backlog() / self.cfg.cycles_per_bit
    }

    /// Applies `decisions` (aligned with [`Engine::pending`]) and runs one slot.
    pub fn step(&mut self, decisions: &[Option<usize>]) -> SlotOutcome {
        assert_eq!(decisions.len(), self.pending.len(), "one decision per pending task");
        let eps = self.cfg.slot_s;
        let t0 = self.slot as f64 * eps;
        let t1 = t0 + eps;
        let mut out = SlotOutcome {
            slot: self.slot,
            rewards: vec![0.0; self.cfg.num_devices],
            ..SlotOutcome::default()
        };

        let pending = std::mem::take(&mut self.pending);
        let generated: Vec<f64> = pending.iter().map(|t| t.size_bits).collect();
        for (mut task, &choice) in pending.into_iter().zip(decisions) {
            let route = choice.and_then(|j| {
                task.server = Some(j);
                routes_from(&self.snapshot, task.owner).swap_remove(j)
            });
            match route {
                Some(r) => {
                    task.route = Some(r);
                    task.status = TaskStatus::InTransit;
                    let bits = task.size_bits;
                    self.transit.push(Transfer { task, hop: 0, hop_bits_left: bits, elapsed: 0.0 });
                }
                None => {
                    task.status = TaskStatus::Expired;
                    out.expired.push(task);
                }
            }
        }

        // spectrum is re-split among every transfer still running
        let active: Vec<(u64, f64)> = self.transit.iter().map(|t| (t.task.id, t.task.size_bits)).collect();
        let alloc = allocate_bandwidth(&active, self.cfg.channel.bandwidth_hz);

        let mut arrivals: Vec<(f64, Task)> = Vec::new();
        let mut still: Vec<Transfer> = Vec::new();
        for (mut tr, (_, share)) in std::mem::take(&mut self.transit).into_iter().zip(alloc.iter()) {
            let route = tr.task.route.as_ref().expect("in-transit task has a route");
            let mut t = t0.max(tr.task.birth_time);
            while tr.hop < route.hops() && t < t1 {
                let rate = hop_rate(route.hop_m[tr.hop], share, &self.cfg.channel);
                if !(rate > 0.0) {
                    break;
                }
                let need = tr.hop_bits_left / rate;
                if t + need <= t1 {
                    t += need;
                    tr.elapsed += need;
                    tr.hop += 1;
                    tr.hop_bits_left = tr.task.size_bits;
                } else {
                    tr.hop_bits_left -= rate * (t1 - t);
                    tr.elapsed += t1 - t;
                    t = t1;
                }
            }
            if tr.hop == route.hops() {
                tr.task.ledger.trans = tr.elapsed;
                arrivals.push((tr.task.birth_time + tr.elapsed, tr.task));
            } else if t1 - tr.task.birth_time >= tr.task.deadline_s {
                tr.task.status = TaskStatus::Expired;
                out.expired.push(tr.task);
            } else {
                still.push(tr);
            }
        }
        self.transit = still;

        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
        let mut completions: Vec<Completion> = Vec::new();
        for (at, mut task) in arrivals {
            let j = task.server.expect("routed task has a server");
            let server = &mut self.servers[j];
            completions.extend(server.advance_to(at));
            let comp = computing_latency(task.size_bits, self.cfg.cycles_per_bit, server.compute_rate);
            let queue = server.queueing_latency();
            task.ledger = LatencyLedger::new(task.ledger.trans, comp, queue);
            if task.ledger.meets(task.deadline_s) {
                server.admit(task.id, self.cfg.cycles_per_bit * task.size_bits, at);
                task.status = TaskStatus::Queued;
                self.queued.insert(task.id, task);
            } else {
                // FIFO finish time is already known to be too late
                task.status = TaskStatus::Expired;
                out.expired.push(task);
            }
        }
        for s in &mut self.servers {
            completions.extend(s.advance_to(t1));
        }
        completions.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.task_id.cmp(&b.task_id)));
        for c in completions {
            let mut task = self.queued.remove(&c.task_id).expect("completed task was queued");
            if task.ledger.meets(task.deadline_s) {
                task.status = TaskStatus::Done;
                out.rewards[task.owner] += task.size_bits;
                out.completed.push(task);
            } else {
                task.status = TaskStatus::Expired;
                out.expired.push(task);
            }
        }

        let done: Vec<f64> = out.completed.iter().map(|t| t.size_bits).collect();
        let lost: Vec<f64> = out.expired.iter().map(|t| t.size_bits).collect();
        self.ledger.settle(self.slot, &generated, &done, &lost);

        self.scenario.step(eps);
        self.snapshot = self.scenario.snapshot(&self.cfg.ranges);
        self.slot += 1;
        if !self.is_done() {
            self.draw_pending();
        }
        out
    }
}
