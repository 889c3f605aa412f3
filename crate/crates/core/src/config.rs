//! Scenario and training configuration, with the two shipped presets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::radio::ChannelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Maddpg,
    SingleHop,
    MultihopGreedy,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Maddpg, Policy::SingleHop, Policy::MultihopGreedy];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Maddpg => "maddpg",
            Policy::SingleHop => "single_hop",
            Policy::MultihopGreedy => "multihop_greedy",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "maddpg" => Ok(Policy::Maddpg),
            "single_hop" | "single-hop" => Ok(Policy::SingleHop),
            "multihop_greedy" | "multihop-greedy" | "greedy" => Ok(Policy::MultihopGreedy),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeUnit {
    Bit,
    Kbit,
}

impl SizeUnit {
    pub fn bits(self) -> f64 {
        match self {
            SizeUnit::Bit => 1.0,
            SizeUnit::Kbit => 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub width_m: f64,
    pub height_m: f64,
    /// x coordinates of the north-south roads.
    pub road_xs: Vec<f64>,
    /// y coordinates of the east-west roads.
    pub road_ys: Vec<f64>,
    /// Fixed (green, red) cycle at every intersection, if any.
    pub traffic_lights: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub length_m: f64,
    pub safe_gap_m: f64,
    pub max_speed_mps: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            length_m: 4.0,
            safe_gap_m: 4.0,
            max_speed_mps: 60.0 / 3.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranges {
    pub dev_range_m: f64,
    pub v2v_range_m: f64,
    pub es_cov_m: f64,
}

impl Default for Ranges {
    fn default() -> Self {
        Self {
            dev_range_m: 200.0,
            v2v_range_m: 200.0,
            es_cov_m: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// N(mean, var) added independently per score component.
    Gaussian,
    /// N(0, var); the configured mean is ignored.
    ZeroMeanGaussian,
    /// Ornstein-Uhlenbeck with theta = mean and sigma = sqrt(var).
    OrnsteinUhlenbeck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaddpgConfig {
    pub actor_hidden: usize,
    pub critic_state_hidden: usize,
    pub critic_action_hidden: usize,
    pub critic_hidden: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub noise_kind: NoiseKind,
    pub noise_mean: f64,
    pub noise_var: f64,
    /// Multiplicative per-episode decay applied to the noise std.
    pub noise_decay: f64,
    /// Std never decays below this fraction of its initial value.
    pub noise_floor_frac: f64,
    pub train_episodes: usize,
    /// Run one training step every this many slots.
    pub train_every: usize,
    pub eval_episodes: usize,
}

impl Default for MaddpgConfig {
    fn default() -> Self {
        Self {
            actor_hidden: 256,
            critic_state_hidden: 256,
            critic_action_hidden: 256,
            critic_hidden: 256,
            actor_lr: 0.001,
            critic_lr: 0.002,
            tau: 0.005,
            gamma: 0.99,
            batch_size: 64,
            buffer_capacity: 100_000,
            noise_kind: NoiseKind::Gaussian,
            noise_mean: 0.15,
            noise_var: (-2f64).exp(),
            noise_decay: 0.9995,
            noise_floor_frac: 0.01,
            train_episodes: 2000,
            train_every: 1,
            eval_episodes: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_devices: usize,
    pub num_vehicles: usize,
    pub num_servers: usize,
    pub slots: usize,
    pub slot_s: f64,
    pub beta: f64,
    pub task_size: (f64, f64),
    pub size_unit: SizeUnit,
    pub deadline_s: f64,
    /// Per-device deadline overrides; device `i` uses entry `i` when present.
    #[serde(default)]
    pub deadlines_s: Vec<f64>,
    pub cycles_per_bit: f64,
    /// Compute rate of server j (cycles/s); the first `num_servers` are used.
    pub compute_rates: Vec<f64>,
    /// Site of server j; the first `num_servers` are used.
    pub server_sites: Vec<(f64, f64)>,
    pub channel: ChannelParams,
    pub ranges: Ranges,
    pub map: MapConfig,
    pub vehicle: VehicleParams,
    /// Max lateral distance of a device from its road centreline.
    pub device_side_offset_m: f64,
    /// Buffer size that maps to 1.0 in the normalized `s_l` observation (bit).
    pub obs_buffer_cap_bits: f64,
    pub maddpg: MaddpgConfig,
    pub policy: Policy,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Reference parameters taken literally (task sizes in Kbit).
    pub fn paper() -> Self {
        Self {
            num_devices: 20,
            num_vehicles: 4,
            num_servers: 4,
            slots: 100,
            slot_s: 1.0,
            beta: 0.5,
            task_size: (2e5, 5e5),
            size_unit: SizeUnit::Kbit,
            deadline_s: 10.0,
            deadlines_s: Vec::new(),
            cycles_per_bit: 1200.0,
            compute_rates: vec![1e7, 2e7, 3e7, 4e7],
            server_sites: default_sites(),
            channel: ChannelParams::default(),
            ranges: Ranges::default(),
            map: default_map(),
            vehicle: VehicleParams::default(),
            device_side_offset_m: 5.0,
            obs_buffer_cap_bits: 1e10,
            maddpg: MaddpgConfig::default(),
            policy: Policy::Maddpg,
            seed: 1,
        }
    }

    /// Desk-scale variant: sizes in bit, reference compute rates scaled by 40,
    /// a 760 m map whose four road crossings each host a server so that every
    /// roadside point lies within coverage of one of them, and 300 m device
    /// and vehicle radios.
    pub fn desk() -> Self {
        Self {
            size_unit: SizeUnit::Bit,
            compute_rates: vec![4e8, 8e8, 1.2e9, 1.6e9],
            map: MapConfig {
                width_m: 760.0,
                height_m: 760.0,
                road_xs: vec![190.0, 570.0],
                road_ys: vec![190.0, 570.0],
                traffic_lights: None,
            },
            server_sites: vec![(190.0, 190.0), (570.0, 570.0), (570.0, 190.0), (190.0, 570.0)],
            ranges: Ranges { dev_range_m: 300.0, v2v_range_m: 300.0, ..Ranges::default() },
            obs_buffer_cap_bits: 5e6,
            maddpg: MaddpgConfig {
                actor_hidden: 64,
                critic_state_hidden: 64,
                critic_action_hidden: 64,
                critic_hidden: 64,
                train_episodes: 60,
                train_every: 2,
                ..MaddpgConfig::default()
            },
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn size_range_bits(&self) -> (f64, f64) {
        let u = self.size_unit.bits();
        (self.task_size.0 * u, self.task_size.1 * u)
    }

    pub fn deadline_of(&self, device: usize) -> f64 {
        self.deadlines_s.get(device).copied().unwrap_or(self.deadline_s)
    }

    pub fn obs_len(&self) -> usize {
        1 + self.num_devices + 2 * self.num_servers
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_servers > self.compute_rates.len() {
            return Err(invalid(
                "compute_rates",
                format!("{} rates for {} servers", self.compute_rates.len(), self.num_servers),
            ));
        }
        if self.num_servers > self.server_sites.len() {
            return Err(invalid(
                "server_sites",
                format!("{} sites for {} servers", self.server_sites.len(), self.num_servers),
            ));
        }
        if let Some(c) = self.compute_rates[..self.num_servers].iter().find(|c| !(**c > 0.0)) {
            return Err(invalid("compute_rates", format!("rate {c} must be > 0")));
        }
        if self.slots == 0 {
            return Err(invalid("slots", "must be >= 1"));
        }
        if !(self.slot_s > 0.0) {
            return Err(invalid("slot_s", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta", format!("{} not in [0, 1]", self.beta)));
        }
        let (lo, hi) = self.task_size;
        if !(lo > 0.0 && hi >= lo) {
            return Err(invalid("task_size", format!("bad range ({lo}, {hi})")));
        }
        if !(self.deadline_s > 0.0) || self.deadlines_s.iter().any(|d| !(*d > 0.0)) {
            return Err(invalid("deadline_s", "deadlines must be > 0"));
        }
        if !(self.cycles_per_bit > 0.0) {
            return Err(invalid("cycles_per_bit", "must be > 0"));
        }
        self.channel.validate()?;
        let r = &self.ranges;
        if !(r.dev_range_m >= 0.0 && r.v2v_range_m >= 0.0 && r.es_cov_m >= 0.0) {
            return Err(invalid("ranges", "ranges must be >= 0"));
        }
        if !(self.map.width_m > 0.0 && self.map.height_m > 0.0) {
            return Err(invalid("map", "dimensions must be > 0"));
        }
        if self.map.road_xs.is_empty() && self.map.road_ys.is_empty() {
            return Err(invalid("map", "needs at least one road"));
        }
        let v = &self.vehicle;
        if !(v.length_m > 0.0 && v.safe_gap_m >= 0.0 && v.max_speed_mps >= 0.0) {
            return Err(invalid("vehicle", "bad vehicle parameters"));
        }
        if !(self.obs_buffer_cap_bits > 0.0) {
            return Err(invalid("obs_buffer_cap_bits", "must be > 0"));
        }
        let m = &self.maddpg;
        if !(0.0..1.0).contains(&m.gamma) {
            return Err(invalid("maddpg.gamma", format!("{} not in [0, 1)", m.gamma)));
        }
        if !(m.tau > 0.0 && m.tau <= 1.0) {
            return Err(invalid("maddpg.tau", "must be in (0, 1]"));
        }
        if m.batch_size == 0 || m.buffer_capacity < m.batch_size {
            return Err(invalid("maddpg.batch_size", "need 0 < batch_size <= buffer_capacity"));
        }
        if m.actor_hidden == 0
            || m.critic_hidden == 0
            || m.critic_state_hidden == 0
            || m.critic_action_hidden == 0
        {
            return Err(invalid("maddpg.hidden", "layer widths must be >= 1"));
        }
        if !(m.noise_var > 0.0) {
            return Err(invalid("maddpg.noise_var", "must be > 0"));
        }
        if m.train_every == 0 {
            return Err(invalid("maddpg.train_every", "must be >= 1"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn default_map() -> MapConfig {
    MapConfig {
        width_m: 1000.0,
        height_m: 1000.0,
        road_xs: vec![300.0, 700.0],
        road_ys: vec![300.0, 700.0],
        traffic_lights: None,
    }
}

fn default_sites() -> Vec<(f64, f64)> {
    vec![(300.0, 300.0), (700.0, 700.0), (700.0, 300.0), (300.0, 700.0)]
}
