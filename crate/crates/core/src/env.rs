//! Multi-agent view of the simulator: one agent per device, one server
//! choice per arriving task.

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::mobility::{Scenario, TopologySnapshot};
use crate::offload::{routes_from, Engine, SlotOutcome, Task};

/// What device `i` sees when its task arrives.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentObservation {
    /// Size of the arriving task (0 when idle).
    pub task_bits: f64,
    /// Server picked by every device in the previous slot.
    pub selections: Vec<Option<usize>>,
    /// Number of devices that picked each server in the previous slot.
    pub counts: Vec<usize>,
    /// Work still buffered at each server, in bits.
    pub buffered_bits: Vec<f64>,
}

/// Static scales that map observations into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsScale {
    pub devices: usize,
    pub servers: usize,
    pub max_task_bits: f64,
    pub buffer_cap_bits: f64,
}

impl ObsScale {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            devices: cfg.num_devices,
            servers: cfg.num_servers,
            max_task_bits: cfg.size_range_bits().1,
            buffer_cap_bits: cfg.obs_buffer_cap_bits,
        }
    }

    /// Length of one agent's feature vector.
    pub fn obs_len(&self) -> usize {
        1 + self.devices + 2 * self.servers
    }

    /// Length of the joint state: every task size plus the shared part once.
    pub fn state_len(&self) -> usize {
        2 * self.devices + 2 * self.servers
    }

    fn shared(&self, o: &AgentObservation, out: &mut Vec<f64>) {
        let j = self.servers.max(1) as f64;
        let i = self.devices.max(1) as f64;
        out.extend(o.selections.iter().map(|s| s.map_or(0.0, |k| (k + 1) as f64 / j)));
        out.extend(o.counts.iter().map(|&c| c as f64 / i));
        out.extend(o.buffered_bits.iter().map(|&b| (b / self.buffer_cap_bits).min(1.0)));
    }

    pub fn features(&self, o: &AgentObservation) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.obs_len());
        v.push(o.task_bits / self.max_task_bits);
        self.shared(o, &mut v);
        v
    }

    /// Joint state `[task sizes (I), shared features]`.
    pub fn joint_state(&self, obs: &[AgentObservation]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.state_len());
        v.extend(obs.iter().map(|o| o.task_bits / self.max_task_bits));
        if let Some(first) = obs.first() {
            self.shared(first, &mut v);
        }
        v
    }

    /// Agent `i`'s features recovered from a joint state vector.
    pub fn agent_features(&self, state: &[f64], i: usize, out: &mut Vec<f64>) {
        out.push(state[i]);
        out.extend_from_slice(&state[self.devices..]);
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    /// Bits completed within deadline this slot, per device.
    pub rewards: Vec<f64>,
    pub observations: Vec<AgentObservation>,
    pub done: bool,
    pub outcome: SlotOutcome,
}

/// Servers device `i` can currently reach.
pub fn feasible_actions(snapshot: &TopologySnapshot, device: usize) -> Vec<usize> {
    routes_from(snapshot, device)
        .iter()
        .enumerate()
        .filter_map(|(j, r)| r.as_ref().map(|_| j))
        .collect()
}

#[derive(Debug, Clone)]
pub struct OffloadEnv {
    cfg: ScenarioConfig,
    engine: Engine,
    selections: Vec<Option<usize>>,
    counts: Vec<usize>,
}

impl OffloadEnv {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let engine = Engine::new(cfg, seed)?;
        Ok(Self::wrap(cfg, engine))
    }

    /// Starts from a prepared layout.
    pub fn from_scenario(cfg: &ScenarioConfig, scenario: Scenario, seed: u64) -> Self {
        Self::wrap(cfg, Engine::from_scenario(cfg, scenario, seed))
    }

    fn wrap(cfg: &ScenarioConfig, engine: Engine) -> Self {
        Self {
            cfg: cfg.clone(),
            engine,
            selections: vec![None; cfg.num_devices],
            counts: vec![0; cfg.num_servers],
        }
    }

    /// Fresh episode: new mobility, empty queues, no selection history.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<AgentObservation>> {
        *self = Self::new(&self.cfg, seed)?;
        Ok(self.observations())
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn snapshot(&self) -> &TopologySnapshot {
        self.engine.snapshot()
    }

    pub fn is_done(&self) -> bool {
        self.engine.is_done()
    }

    /// The task device `i` must place this slot, if any.
    pub fn task_of(&self, i: usize) -> Option<&Task> {
        self.engine.pending().iter().find(|t| t.owner == i)
    }

    pub fn buffered_bits(&self) -> Vec<f64> {
        (0..self.cfg.num_servers).map(|j| self.engine.buffered_bits(j)).collect()
    }

    pub fn observations(&self) -> Vec<AgentObservation> {
        let buffered = self.buffered_bits();
        let mut sizes = vec![0.0; self.cfg.num_devices];
        for t in self.engine.pending() {
            sizes[t.owner] = t.size_bits;
        }
        sizes
            .into_iter()
            .map(|task_bits| AgentObservation {
                task_bits,
                selections: self.selections.clone(),
                counts: self.counts.clone(),
                buffered_bits: buffered.clone(),
            })
            .collect()
    }

    /// Feasible servers for every device (empty for idle devices).
    pub fn feasible(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cfg.num_devices];
        for t in self.engine.pending() {
            out[t.owner] = feasible_actions(self.snapshot(), t.owner);
        }
        out
    }

    /// `actions[i]` is device `i`'s server, or `None` to drop / stay idle.
    ///
    /// # Panics
    /// If an idle device names a server or a chosen server is unreachable.
    pub fn step(&mut self, actions: &[Option<usize>]) -> StepResult {
        assert_eq!(actions.len(), self.cfg.num_devices, "one action per device");
        let mut decisions = Vec::with_capacity(self.engine.pending().len());
        let mut has_task = vec![false; self.cfg.num_devices];
        for t in self.engine.pending() {
            has_task[t.owner] = true;
            if let Some(j) = actions[t.owner] {
                assert!(
                    feasible_actions(self.snapshot(), t.owner).contains(&j),
                    "device {} chose unreachable server {j}",
                    t.owner
                );
            }
            decisions.push(actions[t.owner]);
        }
        for (i, a) in actions.iter().enumerate() {
            assert!(has_task[i] || a.is_none(), "idle device {i} chose a server");
        }
        let outcome = self.engine.step(&decisions);
        self.selections = actions.to_vec();
        self.counts = vec![0; self.cfg.num_servers];
        for j in actions.iter().flatten() {
            self.counts[*j] += 1;
        }
        StepResult {
            rewards: outcome.rewards.clone(),
            observations: self.observations(),
            done: self.engine.is_done(),
            outcome,
        }
    }
}
