//! Acceptance suite. Prints one PASS/FAIL line per criterion, then fails if
//! any criterion failed.
//!
//! The learning criteria (5-7) train 25 MADDPG runs on the desk preset and
//! take tens of minutes on one core.

use std::time::Instant;

use astro_float::{BigFloat, Consts, RoundingMode};
use ndarray::Array2;
use rand::{Rng, SeedableRng};

use vecmec::agents::{Maddpg, Transition};
use vecmec::env::ObsScale;
use vecmec::harness::{self, mean_stderr, SweepAxis};
use vecmec::mobility::{snapshot, NodeKind, RelayGraph};
use vecmec::neural::{Activation, Critic, CriticShape, DenseNet};
use vecmec::offload::{build_route, Engine};
use vecmec::radio::{link_rate, path_loss, snr, ChannelParams};
use vecmec::seeds::SimRng;
use vecmec::{Policy, ScenarioConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

// ---------------------------------------------------------------- channel

const PREC: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn to_f64(x: &BigFloat) -> f64 {
    x.to_string().parse().expect("decimal rendering")
}

/// Path loss, SNR and rate evaluated at 256-bit precision.
fn channel_oracle(d_km: f64, bw: f64, p: &ChannelParams, cc: &mut Consts) -> (f64, f64, f64) {
    let h = big(p.antenna_height_m);
    let slope = big(40.0).mul(&big(1.0).sub(&big(4e-3).mul(&h, PREC, RM), PREC, RM), PREC, RM);
    let loss = slope
        .mul(&big(d_km).log10(PREC, RM, cc), PREC, RM)
        .sub(&big(18.0).mul(&h.log10(PREC, RM, cc), PREC, RM), PREC, RM)
        .add(&big(21.0).mul(&big(p.carrier_mhz).log10(PREC, RM, cc), PREC, RM), PREC, RM)
        .add(&big(80.0), PREC, RM);
    // 10^(-L/10) = exp(-L ln10 / 10)
    let ln10 = big(10.0).ln(PREC, RM, cc);
    let gain = loss.neg().mul(&ln10, PREC, RM).div(&big(10.0), PREC, RM).exp(PREC, RM, cc);
    let snr = big(p.tx_power_w).mul(&gain, PREC, RM).div(&big(p.noise_w), PREC, RM);
    let rate = big(bw).mul(&big(1.0).add(&snr, PREC, RM).log2(PREC, RM, cc), PREC, RM);
    (to_f64(&loss), to_f64(&snr), to_f64(&rate))
}

fn criterion_channel() -> Verdict {
    let start = Instant::now();
    let mut cc = Consts::new().expect("constants cache");
    let mut r = SimRng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = ChannelParams {
            antenna_height_m: r.gen_range(1.0..30.0),
            carrier_mhz: r.gen_range(700.0..6000.0),
            tx_power_w: r.gen_range(0.1..2.0),
            noise_w: 10f64.powf(r.gen_range(-14.0..-11.0)),
            bandwidth_hz: 5e6,
        };
        let d = 10f64.powf(r.gen_range(-3.0..0.7));
        let bw = r.gen_range(1e3..1e7);
        let (l, s, c) = channel_oracle(d, bw, &p, &mut cc);
        worst = worst
            .max(rel(path_loss(d, &p).unwrap(), l))
            .max(rel(snr(d, &p).unwrap(), s))
            .max(rel(link_rate(d, bw, &p).unwrap(), c));
    }
    let p = ChannelParams::default();
    let sig4 = |x: f64, want: f64| rel(x, want) < 5e-5;
    let worked = sig4(path_loss(1.0, &p).unwrap(), 149.2207)
        && sig4(path_loss(0.1, &p).unwrap(), 109.4607)
        && rel(link_rate(0.1, 5e6, &p).unwrap(), 2.282e7) < 5e-4;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && worked && secs < 1.0,
        format!("worst rel err {worst:.2e} on 1000 inputs, worked values {worked}, {secs:.3}s"),
    )
}

// --------------------------------------------------------------- gradients

fn random_matrix(r: &mut SimRng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| r.gen_range(-1.0..1.0))
}

fn grad_err(fd: f64, analytic: f64) -> f64 {
    (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-3)
}

/// Central differences on `coords` of `p`.
fn fd_worst(loss: impl Fn(&[f64]) -> f64, p: &[f64], analytic: &[f64], coords: &[usize]) -> f64 {
    let h = 1e-6;
    let mut q = p.to_vec();
    let mut worst: f64 = 0.0;
    for &k in coords {
        q[k] = p[k] + h;
        let up = loss(&q);
        q[k] = p[k] - h;
        let dn = loss(&q);
        q[k] = p[k];
        worst = worst.max(grad_err((up - dn) / (2.0 * h), analytic[k]));
    }
    worst
}

fn sample_coords(r: &mut SimRng, n: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(r, n, k.min(n)).into_vec()
}

fn criterion_gradients() -> Verdict {
    let start = Instant::now();
    let cfg = ScenarioConfig::desk();
    let scale = ObsScale::new(&cfg);
    let hp = &cfg.maddpg;
    let mut r = SimRng::seed_from_u64(202);
    let (mut actor_worst, mut critic_worst): (f64, f64) = (0.0, 0.0);
    let batch = 8;
    for _ in 0..100 {
        let h = hp.actor_hidden;
        let net = DenseNet::new(&[scale.obs_len(), h, h, scale.servers], &[Activation::Sigmoid; 3], &mut r);
        let x = random_matrix(&mut r, batch, scale.obs_len());
        let up = random_matrix(&mut r, batch, scale.servers);
        let cache = net.forward_cached(x.view());
        let (g, gx) = net.backward(&cache, up.view());
        let p = net.params();
        let coords = sample_coords(&mut r, p.len(), 64);
        let loss = |q: &[f64]| {
            let mut n = net.clone();
            n.set_params(q);
            (n.forward(x.view()) * &up).sum()
        };
        actor_worst = actor_worst.max(fd_worst(loss, &p, &g.flat(), &coords));
        let xs: Vec<f64> = x.iter().copied().collect();
        let in_loss = |q: &[f64]| (net.forward(Array2::from_shape_vec(x.raw_dim(), q.to_vec()).unwrap().view()) * &up).sum();
        let gxs: Vec<f64> = gx.iter().copied().collect();
        let all: Vec<usize> = (0..xs.len()).collect();
        actor_worst = actor_worst.max(fd_worst(in_loss, &xs, &gxs, &all));
    }
    for _ in 0..100 {
        let critic = Critic::new(
            CriticShape {
                state_in: scale.state_len(),
                action_in: scale.devices * scale.servers,
                state_hidden: hp.critic_state_hidden,
                action_hidden: hp.critic_action_hidden,
                hidden: hp.critic_hidden,
            },
            &mut r,
        );
        let s = random_matrix(&mut r, batch, scale.state_len());
        let a = random_matrix(&mut r, batch, scale.devices * scale.servers).mapv(f64::abs);
        let up = random_matrix(&mut r, batch, 1);
        let cache = critic.forward_cached(s.view(), a.view());
        let (g, ga) = critic.backward(&cache, up.view());
        let p = critic.params();
        let coords = sample_coords(&mut r, p.len(), 64);
        let loss = |q: &[f64]| {
            let mut c = critic.clone();
            c.set_params(q);
            (c.forward(s.view(), a.view()) * &up).sum()
        };
        critic_worst = critic_worst.max(fd_worst(loss, &p, &g.flat(), &coords));
        let av: Vec<f64> = a.iter().copied().collect();
        let a_loss = |q: &[f64]| {
            let aa = Array2::from_shape_vec(a.raw_dim(), q.to_vec()).unwrap();
            (critic.forward(s.view(), aa.view()) * &up).sum()
        };
        let gav: Vec<f64> = ga.iter().copied().collect();
        let coords = sample_coords(&mut r, av.len(), 64);
        critic_worst = critic_worst.max(fd_worst(a_loss, &av, &gav, &coords));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        actor_worst <= 1e-4 && critic_worst <= 1e-4 && secs < 30.0,
        format!("100 draws each, worst actor {actor_worst:.2e}, critic {critic_worst:.2e}, {secs:.1}s"),
    )
}

// --------------------------------------------------------- latency ledger

fn criterion_latency_identity() -> Verdict {
    let mut cfg = ScenarioConfig::desk();
    cfg.beta = 0.6;
    let (mut completed, mut identity_bad, mut conservation_bad, mut slots) = (0usize, 0usize, 0usize, 0usize);
    let mut seed = 0;
    while completed < 10_000 {
        seed += 1;
        let mut e = Engine::new(&cfg, seed).unwrap();
        let mut pick = SimRng::seed_from_u64(seed);
        while !e.is_done() {
            let d: Vec<Option<usize>> = e.pending().iter().map(|_| Some(pick.gen_range(0..cfg.num_servers))).collect();
            let out = e.step(&d);
            slots += 1;
            for t in &out.completed {
                let l = t.ledger;
                completed += 1;
                if l.e2e.to_bits() != (l.trans + l.comp + l.queue).to_bits() {
                    identity_bad += 1;
                }
            }
            let led = e.ledger();
            let rhs = led.completed_bits + led.expired_bits + e.in_flight_bits();
            if (led.generated_bits - rhs).abs() > 1e-9 * led.generated_bits.max(1.0) {
                conservation_bad += 1;
            }
        }
    }
    verdict(
        identity_bad == 0 && conservation_bad == 0,
        format!(
            "{completed} completed tasks, {identity_bad} identity mismatches, \
             {conservation_bad} of {slots} slots violate conservation"
        ),
    )
}

// ------------------------------------------------------------------ routes

/// Minimum (distance, node sequence) over every simple relay path.
fn enumerate_best(g: &RelayGraph, src: usize, dst: usize) -> Option<(f64, Vec<usize>)> {
    fn walk(g: &RelayGraph, u: usize, dst: usize, dist: f64, path: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
        if u == dst {
            if best.as_ref().is_none_or(|(d, p)| dist < *d || (dist == *d && &**path < p)) {
                *best = Some((dist, path.clone()));
            }
            return;
        }
        for &(v, w) in &g.adj[u] {
            if path.contains(&v) || (v != dst && g.kinds[v] != NodeKind::Vehicle) {
                continue;
            }
            path.push(v);
            walk(g, v, dst, dist + w, path, best);
            path.pop();
        }
    }
    let mut best = None;
    walk(g, src, dst, 0.0, &mut vec![src], &mut best);
    best
}

fn criterion_routes() -> Verdict {
    let mut r = SimRng::seed_from_u64(404);
    let ranges = ScenarioConfig::desk().ranges;
    let (mut checked, mut bad) = (0usize, 0usize);
    for _ in 0..500 {
        let n = r.gen_range(2..=12);
        let n_dev = r.gen_range(1..n);
        let n_srv = r.gen_range(1..=n - n_dev);
        let n_veh = n - n_dev - n_srv;
        let mut pt = || (r.gen_range(0.0..700.0), r.gen_range(0.0..700.0));
        let devices: Vec<_> = (0..n_dev).map(|_| pt()).collect();
        let servers: Vec<_> = (0..n_srv).map(|_| pt()).collect();
        let vehicles: Vec<_> = (0..n_veh).map(|_| pt()).collect();
        let s = snapshot(&vehicles, &devices, &servers, &ranges);
        for i in 0..n_dev {
            for j in 0..n_srv {
                checked += 1;
                let got = build_route(&s, i, j).map(|p| (p.distance_m(), p.nodes.clone()));
                if got != enumerate_best(&s.graph, s.device_node(i), s.server_node(j)) {
                    bad += 1;
                }
            }
        }
    }
    verdict(bad == 0, format!("500 graphs, {checked} device-server pairs, {bad} mismatches"))
}

// ---------------------------------------------------------------- learning

struct LearningRuns {
    /// (J, policy) -> per-seed (throughput, success)
    cells: Vec<(usize, Policy, Vec<(f64, f64)>)>,
    low_beta: Vec<f64>,
    j4_maddpg_secs: f64,
    j4_episodes: usize,
}

impl LearningRuns {
    fn throughput(&self, j: usize, p: Policy) -> (f64, f64) {
        let c = self.cells.iter().find(|c| c.0 == j && c.1 == p).expect("cell");
        mean_stderr(&c.2.iter().map(|x| x.0).collect::<Vec<_>>())
    }
}

fn learning_runs() -> LearningRuns {
    let base = ScenarioConfig::desk();
    let policies = [Policy::Maddpg, Policy::SingleHop, Policy::MultihopGreedy];
    let table = harness::run_sweep(SweepAxis::Servers, &[1.0, 2.0, 3.0, 4.0], &base, &policies, 5).unwrap();
    let mut cells = Vec::new();
    let mut j4_maddpg_secs = 0.0;
    for (k, chunk) in table.reports.chunks(5).enumerate() {
        let j = k / policies.len() + 1;
        let p = policies[k % policies.len()];
        if j == 4 && p == Policy::Maddpg {
            j4_maddpg_secs = chunk.iter().map(|r| r.wall_clock_s).sum();
        }
        cells.push((j, p, chunk.iter().map(|r| (r.summary.avg_throughput, r.summary.success_rate)).collect()));
    }
    let mut low = base.clone();
    low.beta = 0.1;
    low.policy = Policy::Maddpg;
    let low_beta = (0..5)
        .map(|r| {
            let mut c = low.clone();
            c.seed = base.seed + r;
            harness::run_experiment(&c).unwrap().summary.success_rate
        })
        .collect();
    LearningRuns { cells, low_beta, j4_maddpg_secs, j4_episodes: base.maddpg.train_episodes }
}

fn criterion_ordering(runs: &LearningRuns) -> Verdict {
    let (m, _) = runs.throughput(4, Policy::Maddpg);
    let (s, _) = runs.throughput(4, Policy::SingleHop);
    let (g, _) = runs.throughput(4, Policy::MultihopGreedy);
    let margin = 0.1 * g;
    let in_budget = runs.j4_episodes <= 2000 && runs.j4_maddpg_secs <= 1800.0;
    verdict(
        m >= s + margin && m >= g + margin && in_budget,
        format!(
            "maddpg {m:.0}, single_hop {s:.0}, greedy {g:.0}, needs >= {:.0}; \
             {} episodes, {:.0}s training+eval over 5 seeds",
            s.max(g) + margin,
            runs.j4_episodes,
            runs.j4_maddpg_secs
        ),
    )
}

fn criterion_monotone_servers(runs: &LearningRuns) -> Verdict {
    let stats: Vec<(f64, f64)> = (1..=4).map(|j| runs.throughput(j, Policy::Maddpg)).collect();
    let mut inversions = 0;
    let mut within = true;
    for w in stats.windows(2) {
        let ((a, sa), (b, sb)) = (w[0], w[1]);
        if b < a {
            inversions += 1;
            within &= a - b <= sa.max(sb);
        }
    }
    let means: Vec<String> = stats.iter().map(|(m, s)| format!("{m:.0}±{s:.0}")).collect();
    verdict(inversions <= 1 && within, format!("J=1..4 maddpg throughput [{}], {inversions} inversions", means.join(", ")))
}

fn criterion_low_load(runs: &LearningRuns) -> Verdict {
    let (m, _) = mean_stderr(&runs.low_beta);
    verdict(m >= 0.9, format!("beta=0.1 maddpg success {m:.4} over 5 seeds"))
}

// ------------------------------------------------------------- determinism

fn criterion_determinism() -> Verdict {
    let mut cfg = ScenarioConfig::desk();
    cfg.slots = 30;
    cfg.maddpg.train_episodes = 3;
    cfg.maddpg.eval_episodes = 3;
    let csv = |c: &ScenarioConfig| {
        let rep = harness::run_experiment(c).unwrap();
        let mut out = Vec::new();
        rep.write_metrics_csv(&mut out).unwrap();
        out
    };
    let mut same = 0;
    for p in Policy::ALL {
        cfg.policy = p;
        if csv(&cfg) == csv(&cfg) {
            same += 1;
        }
    }
    verdict(same == Policy::ALL.len(), format!("{same}/{} policies byte-identical", Policy::ALL.len()))
}

// ------------------------------------------------------------- soft update

fn criterion_soft_update() -> Verdict {
    let mut cfg = ScenarioConfig::desk();
    cfg.num_devices = 3;
    cfg.num_servers = 2;
    cfg.maddpg.actor_lr = 0.0;
    cfg.maddpg.critic_lr = 0.0;
    cfg.maddpg.batch_size = 4;
    let tau = cfg.maddpg.tau;
    assert_eq!(tau, 0.005);
    let mut m = Maddpg::new(&cfg, 9);
    let scale = m.scale;
    let mut r = SimRng::seed_from_u64(9);
    for _ in 0..8 {
        let mut v = |n: usize| (0..n).map(|_| r.gen_range(0.0..1.0)).collect::<Vec<f64>>();
        m.buffer.push(Transition {
            state: v(scale.state_len()),
            actions: v(scale.devices * scale.servers),
            active: vec![true, false, true],
            rewards: v(scale.devices),
            next_state: v(scale.state_len()),
            next_active: vec![true, true, true],
        });
    }
    for a in &mut m.agents {
        let n = a.target_actor.param_count();
        a.target_actor.set_params(&(0..n).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let n = a.target_critic.params().len();
        a.target_critic.set_params(&(0..n).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>());
    }
    let gap = |m: &Maddpg| -> Vec<f64> {
        m.agents
            .iter()
            .flat_map(|a| {
                let c = a.target_critic.params().iter().zip(a.critic.params()).map(|(t, p)| (t - p).abs()).fold(0.0, f64::max);
                [a.target_actor.max_abs_diff(&a.actor), c]
            })
            .collect()
    };
    let d0 = gap(&m);
    let mut worst: f64 = 0.0;
    let steps = 1000;
    for k in 1..=steps {
        m.train_step().expect("buffer is full enough");
        let factor = (1.0 - tau).powi(k);
        for (d, d0) in gap(&m).iter().zip(&d0) {
            worst = worst.max(rel(*d, d0 * factor));
        }
    }
    verdict(worst <= 1e-9, format!("{steps} steps, worst relative deviation from (1-tau)^k: {worst:.2e}"))
}

fn report(results: &mut Vec<(usize, bool)>, k: usize, v: Verdict) {
    println!("criterion {k}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    results.push((k, v.pass));
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    report(&mut results, 1, criterion_channel());
    report(&mut results, 2, criterion_gradients());
    report(&mut results, 3, criterion_latency_identity());
    report(&mut results, 4, criterion_routes());
    report(&mut results, 8, criterion_determinism());
    report(&mut results, 9, criterion_soft_update());
    let runs = learning_runs();
    report(&mut results, 5, criterion_ordering(&runs));
    report(&mut results, 6, criterion_monotone_servers(&runs));
    report(&mut results, 7, criterion_low_load(&runs));
    let failed: Vec<usize> = results.iter().filter(|(_, pass)| !pass).map(|(k, _)| *k).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
