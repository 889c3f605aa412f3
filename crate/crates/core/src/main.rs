use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use vecmec::harness::{self, SweepAxis};
use vecmec::{Policy, ScenarioConfig};

#[derive(Parser)]
#[command(name = "vecmec", version, about = "Vehicle-assisted multi-hop edge offloading simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Source {
    /// JSON scenario file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario (`paper` or `desk`).
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> anyhow::Result<ScenarioConfig> {
        let cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            (None, Some(name)) => ScenarioConfig::preset(name).with_context(|| format!("unknown preset {name:?}"))?,
            (None, None) => bail!("pass --config <file> or --preset <name>"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train (for maddpg) and evaluate one policy.
    Run {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        policy: Option<Policy>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep one axis for every policy and write plot data.
    Sweep {
        #[command(flatten)]
        src: Source,
        /// beta, mds, vehicles or servers.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<Policy>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train MADDPG and save checkpoints and the training log.
    Train {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a preset as JSON.
    Preset { name: String },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { src, policy, seed, out } => {
            let mut cfg = src.load()?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (report, art) = harness::run_experiment_with(&cfg, true)?;
            harness::write_run(&out, &report, &art)?;
            println!(
                "{} seed {}: throughput {:.1} bit/slot, success {:.4} ({:.1}s)",
                cfg.policy.name(),
                cfg.seed,
                report.summary.avg_throughput,
                report.summary.success_rate,
                report.wall_clock_s
            );
        }
        Cmd::Sweep { src, axis, values, repeats, policies, out } => {
            let cfg = src.load()?;
            let policies = policies.unwrap_or_else(|| Policy::ALL.to_vec());
            let table = harness::run_sweep(axis, &values, &cfg, &policies, repeats)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join(format!("{}_sweep.json", axis.name())), serde_json::to_vec_pretty(&table)?)?;
            for path in harness::emit_plot_data(&table, &out)? {
                println!("wrote {}", path.display());
            }
            for r in &table.rows {
                println!(
                    "{}={} {:<16} throughput {:.1} ± {:.1}  success {:.4} ± {:.4}",
                    axis.name(),
                    r.x,
                    r.policy.name(),
                    r.throughput_mean,
                    r.throughput_stderr,
                    r.success_mean,
                    r.success_stderr
                );
            }
        }
        Cmd::Train { src, episodes, ckpt, seed } => {
            let mut cfg = src.load()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let episodes = episodes.unwrap_or(cfg.maddpg.train_episodes);
            let (agent, log) = harness::train(&cfg, episodes)?;
            agent.save(&ckpt)?;
            harness::write_train_log(&log, std::fs::File::create(ckpt.join("train_log.csv"))?)?;
            println!("trained {episodes} episodes, checkpoints in {}", ckpt.display());
        }
        Cmd::Preset { name } => {
            let cfg = ScenarioConfig::preset(&name).with_context(|| format!("unknown preset {name:?}"))?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
    }
    Ok(())
}
