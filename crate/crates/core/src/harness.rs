//! Training, evaluation, sweeps and their on-disk outputs.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{policy_multihop_greedy, policy_single_hop, Maddpg, ServerView};
use crate::config::{Policy, ScenarioConfig};
use crate::env::OffloadEnv;
use crate::error::{invalid, Error, Result};
use crate::seeds::{self, Stream};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "VECMEC_THREADS";

const EVAL_SALT: u64 = 1 << 32;

/// Seed of training (`eval = false`) or evaluation episode `k`.
pub fn episode_seed(master: u64, k: usize, eval: bool) -> u64 {
    let salt = k as u64 + if eval { EVAL_SALT } else { 0 };
    seeds::derive(master, Stream::Mobility, salt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    pub slot: usize,
    pub generated_bits: f64,
    pub completed_bits: f64,
    pub expired_bits: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Mean completed-within-deadline bits per slot.
    pub avg_throughput: f64,
    /// Completed over generated tasks, pooled over evaluation episodes.
    pub success_rate: f64,
    pub generated_tasks: usize,
    pub completed_tasks: usize,
    pub eval_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: Policy,
    pub seed: u64,
    pub config_hash: String,
    pub train_episodes: usize,
    /// Per-slot metrics averaged over evaluation episodes.
    pub rows: Vec<SlotRow>,
    pub episode_throughput: Vec<f64>,
    pub episode_success: Vec<f64>,
    pub summary: Summary,
    pub wall_clock_s: f64,
}

impl RunReport {
    /// SHA-256 over everything except wall-clock time.
    pub fn digest(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_s = 0.0;
        hex::encode(Sha256::digest(serde_json::to_vec(&r).expect("report serializes")))
    }

    /// `slot,generated_bits,completed_bits,expired_bits,success_rate`
    pub fn write_metrics_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "slot,generated_bits,completed_bits,expired_bits,success_rate")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.slot, r.generated_bits, r.completed_bits, r.expired_bits, r.success_rate
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub episode: usize,
    pub agent: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub episode_reward: f64,
}

/// `episode,agent,critic_loss,actor_loss,episode_reward`
pub fn write_train_log<W: Write>(rows: &[TrainLogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Trains a fresh MADDPG for `episodes` episodes.
pub fn train(cfg: &ScenarioConfig, episodes: usize) -> Result<(Maddpg, Vec<TrainLogRow>)> {
    cfg.validate()?;
    let mut agent = Maddpg::new(cfg, cfg.seed);
    let mut env = OffloadEnv::new(cfg, episode_seed(cfg.seed, 0, false))?;
    let every = cfg.maddpg.train_every.max(1);
    let n = cfg.num_devices;
    let mut log = Vec::with_capacity(episodes * n);
    for ep in 0..episodes {
        let mut obs = env.reset(episode_seed(cfg.seed, ep, false))?;
        let mut reward = vec![0.0; n];
        let mut losses = vec![(0.0, 0.0); n];
        let mut steps = 0usize;
        while !env.is_done() {
            let slot = env.engine().slot();
            let feasible = env.feasible();
            let acts = agent.act(&obs, &feasible, true);
            let choices: Vec<_> = acts.iter().map(|a| a.choice).collect();
            let res = env.step(&choices);
            agent.remember(&obs, &acts, &res.rewards, &res.observations);
            for (acc, r) in reward.iter_mut().zip(&res.rewards) {
                *acc += r;
            }
            if slot % every == every - 1 {
                if let Some(rep) = agent.train_step() {
                    steps += 1;
                    for l in rep {
                        losses[l.agent].0 += l.critic_loss;
                        losses[l.agent].1 += l.actor_loss;
                    }
                }
            }
            obs = res.observations;
        }
        agent.end_episode();
        if !agent.all_finite() {
            return Err(invalid("maddpg", format!("parameters diverged in episode {ep}")));
        }
        let k = steps.max(1) as f64;
        for i in 0..n {
            log.push(TrainLogRow {
                episode: ep,
                agent: i,
                critic_loss: if steps == 0 { f64::NAN } else { losses[i].0 / k },
                actor_loss: if steps == 0 { f64::NAN } else { losses[i].1 / k },
                episode_reward: reward[i],
            });
        }
    }
    Ok((agent, log))
}

/// Server choice for every device with a task in the current slot.
pub fn decide(env: &OffloadEnv, policy: Policy, agent: Option<&mut Maddpg>) -> Vec<Option<usize>> {
    let cfg = env.config();
    let n = cfg.num_devices;
    match policy {
        Policy::Maddpg => {
            let agent = agent.expect("maddpg policy needs a trained agent");
            let obs = env.observations();
            let feasible = env.feasible();
            agent.act(&obs, &feasible, false).into_iter().map(|a| a.choice).collect()
        }
        Policy::SingleHop | Policy::MultihopGreedy => {
            let buffered = env.buffered_bits();
            let view = ServerView {
                buffered_bits: &buffered,
                compute_rates: &cfg.compute_rates,
                cycles_per_bit: cfg.cycles_per_bit,
                channel: &cfg.channel,
            };
            let rule = if policy == Policy::SingleHop { policy_single_hop } else { policy_multihop_greedy };
            let mut out = vec![None; n];
            for t in env.engine().pending() {
                out[t.owner] = rule(env.snapshot(), t.owner, t.size_bits, t.deadline_s, &view);
            }
            out
        }
    }
}

/// Runs one episode from `env`'s current state to the end.
pub fn run_episode<W: Write>(
    env: &mut OffloadEnv,
    policy: Policy,
    mut agent: Option<&mut Maddpg>,
    mut trace: Option<&mut W>,
) -> Result<()> {
    while !env.is_done() {
        if let Some(w) = trace.as_deref_mut() {
            env.engine().scenario().write_trace(env.engine().slot(), w)?;
        }
        let choices = decide(env, policy, agent.as_deref_mut());
        env.step(&choices);
    }
    Ok(())
}

/// Evaluation episodes with exploration off. `trace` receives the first
/// episode's positions as `slot,kind,id,x,y`.
pub fn evaluate<W: Write>(
    cfg: &ScenarioConfig,
    policy: Policy,
    mut agent: Option<&mut Maddpg>,
    episodes: usize,
    mut trace: Option<&mut W>,
) -> Result<(Vec<SlotRow>, Vec<f64>, Vec<f64>, Summary)> {
    let mut rows: Vec<SlotRow> = (0..cfg.slots)
        .map(|slot| SlotRow { slot, generated_bits: 0.0, completed_bits: 0.0, expired_bits: 0.0, success_rate: 0.0 })
        .collect();
    let (mut thr, mut succ) = (Vec::new(), Vec::new());
    let (mut gen, mut done) = (0usize, 0usize);
    for ep in 0..episodes {
        let mut env = OffloadEnv::new(cfg, episode_seed(cfg.seed, ep, true))?;
        let tr = if ep == 0 { trace.as_deref_mut() } else { None };
        run_episode(&mut env, policy, agent.as_deref_mut(), tr)?;
        let ledger = env.engine().ledger();
        for (acc, r) in rows.iter_mut().zip(&ledger.rows) {
            acc.generated_bits += r.generated_bits;
            acc.completed_bits += r.completed_bits;
            acc.expired_bits += r.expired_bits;
            acc.success_rate += r.success_rate;
        }
        thr.push(ledger.mean_throughput());
        succ.push(ledger.success_rate());
        gen += ledger.generated_tasks;
        done += ledger.completed_tasks;
    }
    let k = episodes.max(1) as f64;
    for r in &mut rows {
        r.generated_bits /= k;
        r.completed_bits /= k;
        r.expired_bits /= k;
        r.success_rate /= k;
    }
    let avg = if rows.is_empty() { 0.0 } else { rows.iter().map(|r| r.completed_bits).sum::<f64>() / rows.len() as f64 };
    let summary = Summary {
        avg_throughput: avg,
        success_rate: if gen == 0 { 1.0 } else { done as f64 / gen as f64 },
        generated_tasks: gen,
        completed_tasks: done,
        eval_episodes: episodes,
    };
    Ok((rows, thr, succ, summary))
}

/// Optional on-disk artifacts of a run.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub train_log: Vec<TrainLogRow>,
    pub trace: Vec<u8>,
    pub agent: Option<Maddpg>,
}

/// Trains (for MADDPG) and evaluates `cfg.policy` under `cfg.seed`.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<RunReport> {
    run_experiment_with(cfg, false).map(|(r, _)| r)
}

/// Like [`run_experiment`], also returning the training log, the first
/// evaluation episode's position trace and the trained agent.
pub fn run_experiment_with(cfg: &ScenarioConfig, keep_trace: bool) -> Result<(RunReport, RunArtifacts)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut art = RunArtifacts::default();
    let episodes = if cfg.policy == Policy::Maddpg { cfg.maddpg.train_episodes } else { 0 };
    if cfg.policy == Policy::Maddpg {
        let (agent, log) = train(cfg, episodes)?;
        art.agent = Some(agent);
        art.train_log = log;
    }
    let mut trace = Vec::new();
    let (rows, thr, succ, summary) = evaluate(
        cfg,
        cfg.policy,
        art.agent.as_mut(),
        cfg.maddpg.eval_episodes,
        keep_trace.then_some(&mut trace),
    )?;
    art.trace = trace;
    let report = RunReport {
        policy: cfg.policy,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        train_episodes: episodes,
        rows,
        episode_throughput: thr,
        episode_success: succ,
        summary,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok((report, art))
}

/// Writes `report.json`, `metrics.csv`, and when present `trace.csv`,
/// `train_log.csv` and agent checkpoints under `ckpt/`.
pub fn write_run(dir: &Path, report: &RunReport, art: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;
    let mut m = Vec::new();
    report.write_metrics_csv(&mut m)?;
    std::fs::write(dir.join("metrics.csv"), m)?;
    if !art.trace.is_empty() {
        let mut t = b"slot,kind,id,x,y\n".to_vec();
        t.extend_from_slice(&art.trace);
        std::fs::write(dir.join("trace.csv"), t)?;
    }
    if !art.train_log.is_empty() {
        write_train_log(&art.train_log, std::fs::File::create(dir.join("train_log.csv"))?)?;
    }
    if let Some(a) = &art.agent {
        a.save(&dir.join("ckpt"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Beta,
    Mds,
    Vehicles,
    Servers,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Beta => "beta",
            SweepAxis::Mds => "mds",
            SweepAxis::Vehicles => "vehicles",
            SweepAxis::Servers => "servers",
        }
    }

    /// Copy of `base` with this axis set to `x`.
    pub fn apply(self, base: &ScenarioConfig, x: f64) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        let count = || -> Result<usize> {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(invalid("sweep.values", format!("{x} is not a count")))
            }
        };
        match self {
            SweepAxis::Beta => c.beta = x,
            SweepAxis::Mds => c.num_devices = count()?,
            SweepAxis::Vehicles => c.num_vehicles = count()?,
            SweepAxis::Servers => c.num_servers = count()?,
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepAxis::Beta),
            "mds" | "devices" | "I" => Ok(SweepAxis::Mds),
            "vehicles" | "N" => Ok(SweepAxis::Vehicles),
            "servers" | "J" => Ok(SweepAxis::Servers),
            _ => Err(invalid("axis", format!("unknown sweep axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub policy: Policy,
    pub repeats: usize,
    pub throughput_mean: f64,
    pub throughput_stderr: f64,
    pub success_mean: f64,
    pub success_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub reports: Vec<RunReport>,
}

/// Sample mean and standard error (0 for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| invalid("VECMEC_THREADS", format!("{v:?} is not a count")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| invalid("VECMEC_THREADS", e.to_string()))
}

/// Every `value × policy × repeat` cell, repeat `r` using seed `base.seed + r`.
pub fn run_sweep(
    axis: SweepAxis,
    values: &[f64],
    base: &ScenarioConfig,
    policies: &[Policy],
    repeats: usize,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(invalid("sweep.values", "must not be empty"));
    }
    let mut cells = Vec::new();
    for &x in values {
        for &p in policies {
            for r in 0..repeats {
                let mut c = axis.apply(base, x)?;
                c.policy = p;
                c.seed = base.seed + r as u64;
                cells.push(c);
            }
        }
    }
    let reports: Vec<RunReport> =
        thread_pool()?.install(|| cells.par_iter().map(run_experiment).collect::<Result<Vec<_>>>())?;
    let mut rows = Vec::new();
    for (k, chunk) in reports.chunks(repeats.max(1)).enumerate() {
        let x = values[k / policies.len()];
        let policy = policies[k % policies.len()];
        let thr: Vec<f64> = chunk.iter().map(|r| r.summary.avg_throughput).collect();
        let suc: Vec<f64> = chunk.iter().map(|r| r.summary.success_rate).collect();
        let (tm, ts) = mean_stderr(&thr);
        let (sm, ss) = mean_stderr(&suc);
        rows.push(SweepRow {
            x,
            policy,
            repeats: chunk.len(),
            throughput_mean: tm,
            throughput_stderr: ts,
            success_mean: sm,
            success_stderr: ss,
        });
    }
    Ok(SweepTable { axis, rows, reports })
}

/// One row of a plot file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub policy: Policy,
    pub mean: f64,
    pub stderr: f64,
}

impl SweepTable {
    pub fn throughput(&self) -> Vec<PlotRow> {
        self.rows
            .iter()
            .map(|r| PlotRow { x: r.x, policy: r.policy, mean: r.throughput_mean, stderr: r.throughput_stderr })
            .collect()
    }

    pub fn success(&self) -> Vec<PlotRow> {
        self.rows
            .iter()
            .map(|r| PlotRow { x: r.x, policy: r.policy, mean: r.success_mean, stderr: r.success_stderr })
            .collect()
    }
}

/// Writes `<axis>_throughput.csv` and `<axis>_success.csv` as
/// `x,policy,mean,stderr`; panels without rows are skipped. Returns the
/// paths written.
pub fn emit_plot_data(table: &SweepTable, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (name, rows) in [("throughput", table.throughput()), ("success", table.success())] {
        if rows.is_empty() {
            continue;
        }
        let path = dir.join(format!("{}_{name}.csv", table.axis.name()));
        let mut w = csv::Writer::from_path(&path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        out.push(path);
    }
    Ok(out)
}

pub fn read_plot_data(path: &Path) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
