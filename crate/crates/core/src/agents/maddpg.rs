use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};

use super::noise::ExplorationNoise;
use super::replay::{ReplayBuffer, Transition};
use crate::config::{MaddpgConfig, ScenarioConfig};
use crate::env::{AgentObservation, ObsScale};
use crate::error::Result;
use crate::neural::{Activation, Adam, Critic, CriticAdam, CriticShape, DenseNet};
use crate::seeds::{self, SimRng, Stream};

/// Scores the critic sees and the server they resolve to.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentAction {
    pub scores: Vec<f64>,
    pub choice: Option<usize>,
}

/// Index of the largest feasible score; ties go to the smallest index.
pub fn masked_argmax(scores: &[f64], feasible: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &j in feasible {
        if best.is_none_or(|b| scores[j] > scores[b] || (scores[j] == scores[b] && j < b)) {
            best = Some(j);
        }
    }
    best
}

/// Actor scores (plus optional noise) resolved over the feasible set.
/// An empty feasible set yields a no-op.
pub fn select_action(
    actor: &DenseNet,
    features: &[f64],
    feasible: &[usize],
    noise: Option<(&mut ExplorationNoise, &mut SimRng)>,
) -> AgentAction {
    let mut scores = actor.forward_one(features);
    if let Some((n, rng)) = noise {
        n.perturb(&mut scores, rng);
    }
    let choice = masked_argmax(&scores, feasible);
    AgentAction { scores, choice }
}

#[derive(Debug, Clone)]
pub struct AgentNets {
    pub actor: DenseNet,
    pub critic: Critic,
    pub target_actor: DenseNet,
    pub target_critic: Critic,
    pub actor_opt: Adam,
    pub critic_opt: CriticAdam,
}

impl AgentNets {
    pub fn new(scale: &ObsScale, hp: &MaddpgConfig, rng: &mut SimRng) -> Self {
        let h = hp.actor_hidden;
        let actor = DenseNet::new(&[scale.obs_len(), h, h, scale.servers], &[Activation::Sigmoid; 3], rng);
        let critic = Critic::new(
            CriticShape {
                state_in: scale.state_len(),
                action_in: scale.devices * scale.servers,
                state_hidden: hp.critic_state_hidden,
                action_hidden: hp.critic_action_hidden,
                hidden: hp.critic_hidden,
            },
            rng,
        );
        Self {
            actor_opt: Adam::new(&actor, hp.actor_lr),
            critic_opt: CriticAdam::new(&critic, hp.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub agent: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

/// Centralized-critic, decentralized-actor trainer for all devices.
#[derive(Debug, Clone)]
pub struct Maddpg {
    pub agents: Vec<AgentNets>,
    pub buffer: ReplayBuffer,
    pub noise: Vec<ExplorationNoise>,
    pub hp: MaddpgConfig,
    pub scale: ObsScale,
    noise_rng: SimRng,
    replay_rng: SimRng,
}

struct Batch {
    state: Array2<f64>,
    actions: Array2<f64>,
    active: Array2<f64>,
    rewards: Array2<f64>,
    next_state: Array2<f64>,
    next_active: Array2<f64>,
}

impl Batch {
    fn gather(rows: &[&Transition]) -> Self {
        let m = rows.len();
        let build = |f: &dyn Fn(&Transition) -> Vec<f64>| {
            let w = f(rows[0]).len();
            let mut a = Array2::zeros((m, w));
            for (r, t) in a.rows_mut().into_iter().zip(rows) {
                for (x, v) in r.into_iter().zip(f(t)) {
                    *x = v;
                }
            }
            a
        };
        let flag = |v: &[bool]| v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Self {
            state: build(&|t| t.state.clone()),
            actions: build(&|t| t.actions.clone()),
            active: build(&|t| flag(&t.active)),
            rewards: build(&|t| t.rewards.clone()),
            next_state: build(&|t| t.next_state.clone()),
            next_active: build(&|t| flag(&t.next_active)),
        }
    }
}

impl Maddpg {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Self {
        let scale = ObsScale::new(cfg);
        let hp = cfg.maddpg.clone();
        let mut init = seeds::rng(seed, Stream::NetworkInit, 0);
        let agents = (0..scale.devices).map(|_| AgentNets::new(&scale, &hp, &mut init)).collect();
        Self {
            agents,
            buffer: ReplayBuffer::new(hp.buffer_capacity),
            noise: (0..scale.devices).map(|_| ExplorationNoise::new(&hp, scale.servers)).collect(),
            noise_rng: seeds::rng(seed, Stream::Noise, 0),
            replay_rng: seeds::rng(seed, Stream::Replay, 0),
            hp,
            scale,
        }
    }

    /// One action per device; devices without a task get zero scores and no
    /// choice.
    pub fn act(&mut self, obs: &[AgentObservation], feasible: &[Vec<usize>], explore: bool) -> Vec<AgentAction> {
        let j = self.scale.servers;
        obs.iter()
            .enumerate()
            .map(|(i, o)| {
                if o.task_bits == 0.0 {
                    return AgentAction { scores: vec![0.0; j], choice: None };
                }
                let f = self.scale.features(o);
                let noise = explore.then_some((&mut self.noise[i], &mut self.noise_rng));
                select_action(&self.agents[i].actor, &f, &feasible[i], noise)
            })
            .collect()
    }

    /// Stores a joint step; rewards are scaled by the largest task size.
    pub fn remember(
        &mut self,
        obs: &[AgentObservation],
        actions: &[AgentAction],
        rewards: &[f64],
        next_obs: &[AgentObservation],
    ) {
        let scale = self.scale.max_task_bits;
        self.buffer.push(Transition {
            state: self.scale.joint_state(obs),
            actions: actions.iter().flat_map(|a| a.scores.iter().copied()).collect(),
            active: obs.iter().map(|o| o.task_bits > 0.0).collect(),
            rewards: rewards.iter().map(|r| r / scale).collect(),
            next_state: self.scale.joint_state(next_obs),
            next_active: next_obs.iter().map(|o| o.task_bits > 0.0).collect(),
        });
    }

    pub fn end_episode(&mut self) {
        for n in &mut self.noise {
            n.decay(self.hp.noise_decay, self.hp.noise_floor_frac);
        }
    }

    fn agent_obs(&self, state: ArrayView2<f64>, i: usize) -> Array2<f64> {
        let d = self.scale.devices;
        let mut out = Array2::zeros((state.nrows(), self.scale.obs_len()));
        out.column_mut(0).assign(&state.column(i));
        out.slice_mut(s![.., 1..]).assign(&state.slice(s![.., d..]));
        out
    }

    /// One minibatch update of every agent, in index order. `None` when the
    /// buffer holds fewer than a batch.
    pub fn train_step(&mut self) -> Option<Vec<LossReport>> {
        let m = self.hp.batch_size;
        let batch = Batch::gather(&self.buffer.sample(m, &mut self.replay_rng)?);
        let (nd, j) = (self.scale.devices, self.scale.servers);
        let mf = m as f64;

        let mut next_actions = Array2::zeros((m, nd * j));
        for k in 0..nd {
            let o = self.agent_obs(batch.next_state.view(), k);
            let a = self.agents[k].target_actor.forward(o.view()) * batch.next_active.slice(s![.., k..k + 1]);
            next_actions.slice_mut(s![.., k * j..(k + 1) * j]).assign(&a);
        }

        let mut report = Vec::with_capacity(nd);
        for i in 0..nd {
            let obs_i = self.agent_obs(batch.state.view(), i);
            let active_i = batch.active.slice(s![.., i..i + 1]).to_owned();
            let gamma = self.hp.gamma;
            let ag = &mut self.agents[i];

            let q_next = ag.target_critic.forward(batch.next_state.view(), next_actions.view());
            let y = &batch.rewards.slice(s![.., i..i + 1]) + &(gamma * q_next);
            let cache = ag.critic.forward_cached(batch.state.view(), batch.actions.view());
            let diff = cache.q() - &y;
            let critic_loss = diff.mapv(|d| d * d).sum() / mf;
            let (cg, _) = ag.critic.backward(&cache, (diff * (2.0 / mf)).view());
            ag.critic_opt.step(&mut ag.critic, &cg);

            let actor_cache = ag.actor.forward_cached(obs_i.view());
            let mut joint = batch.actions.clone();
            // idle rows keep their stored zeros
            joint.slice_mut(s![.., i * j..(i + 1) * j]).assign(&(actor_cache.output() * &active_i));
            let qc = ag.critic.forward_cached(batch.state.view(), joint.view());
            let actor_loss = -qc.q().sum() / mf;
            let (_, ga) = ag.critic.backward(&qc, Array2::from_elem((m, 1), -1.0 / mf).view());
            let g_own = &ga.slice(s![.., i * j..(i + 1) * j]) * &active_i;
            let (agr, _) = ag.actor.backward(&actor_cache, g_own.view());
            ag.actor_opt.step(&mut ag.actor, &agr);

            let tau = self.hp.tau;
            ag.target_actor.soft_update(&ag.actor, tau);
            ag.target_critic.soft_update(&ag.critic, tau);
            report.push(LossReport { agent: i, critic_loss, actor_loss });
        }
        Some(report)
    }

    /// Writes `agent{i}_{actor,critic_state,critic_action,critic_head}.ckpt`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (i, a) in self.agents.iter().enumerate() {
            let nets = [
                ("actor", &a.actor),
                ("critic_state", &a.critic.state),
                ("critic_action", &a.critic.action),
                ("critic_head", &a.critic.head),
            ];
            for (name, net) in nets {
                let mut w = BufWriter::new(File::create(dir.join(format!("agent{i}_{name}.ckpt")))?);
                net.write_to(&mut w)?;
            }
        }
        Ok(())
    }

    /// Loads mains from [`Maddpg::save`] output and resets targets to them.
    pub fn load(&mut self, dir: &Path) -> Result<()> {
        for (i, a) in self.agents.iter_mut().enumerate() {
            let read = |name: &str| -> Result<DenseNet> {
                let mut r = BufReader::new(File::open(dir.join(format!("agent{i}_{name}.ckpt")))?);
                DenseNet::read_from(&mut r)
            };
            a.actor = read("actor")?;
            a.critic = Critic { state: read("critic_state")?, action: read("critic_action")?, head: read("critic_head")? };
            a.target_actor = a.actor.clone();
            a.target_critic = a.critic.clone();
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.agents.iter().all(|a| a.actor.is_finite() && a.critic.is_finite())
    }

    /// Q of agent `i` at one joint (state, scores) pair.
    pub fn critic_q(&self, i: usize, state: &[f64], actions: &[f64]) -> f64 {
        let s = ArrayView2::from_shape((1, state.len()), state).unwrap();
        let a = ArrayView2::from_shape((1, actions.len()), actions).unwrap();
        self.agents[i].critic.forward(s, a)[[0, 0]]
    }
}
