//! Heuristic server choice: one-hop latency-greedy admission, and
//! one-hop-then-nearest multi-hop fallback.

use crate::mobility::TopologySnapshot;
use crate::offload::routes_from;
use crate::radio::{hop_rate, ChannelParams};

/// Queue state a baseline can observe.
#[derive(Debug, Clone, Copy)]
pub struct ServerView<'a> {
    pub buffered_bits: &'a [f64],
    pub compute_rates: &'a [f64],
    pub cycles_per_bit: f64,
    pub channel: &'a ChannelParams,
}

impl ServerView<'_> {
    /// Direct upload over the full band, then compute behind the backlog.
    pub fn one_hop_estimate(&self, server: usize, size_bits: f64, distance_m: f64) -> f64 {
        let c = self.compute_rates[server];
        let trans = size_bits / hop_rate(distance_m, self.channel.bandwidth_hz, self.channel);
        trans + self.cycles_per_bit * (size_bits + self.buffered_bits[server]) / c
    }
}

/// Lowest-estimate server among those in direct range, if it can meet the
/// deadline.
pub fn policy_single_hop(
    snapshot: &TopologySnapshot,
    device: usize,
    size_bits: f64,
    deadline_s: f64,
    view: &ServerView,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, d) in snapshot.one_hop_servers(device) {
        let est = view.one_hop_estimate(j, size_bits, d);
        if best.is_none_or(|(_, b)| est < b) {
            best = Some((j, est));
        }
    }
    best.filter(|&(_, est)| est <= deadline_s).map(|(j, _)| j)
}

/// Nearest in-range server whose estimate meets the deadline; otherwise the
/// reachable server with the shortest route, load ignored.
pub fn policy_multihop_greedy(
    snapshot: &TopologySnapshot,
    device: usize,
    size_bits: f64,
    deadline_s: f64,
    view: &ServerView,
) -> Option<usize> {
    let local = snapshot.one_hop_servers(device);
    let mut near: Option<(usize, f64)> = None;
    for &(j, d) in &local {
        if view.one_hop_estimate(j, size_bits, d) <= deadline_s && near.is_none_or(|(_, b)| d < b) {
            near = Some((j, d));
        }
    }
    if let Some((j, _)) = near {
        return Some(j);
    }
    let mut far: Option<(usize, f64)> = None;
    for (j, r) in routes_from(snapshot, device).into_iter().enumerate() {
        let Some(r) = r else { continue };
        if local.iter().any(|&(k, _)| k == j) {
            continue;
        }
        let d = r.distance_m();
        if far.is_none_or(|(_, b)| d < b) {
            far = Some((j, d));
        }
    }
    far.map(|(j, _)| j)
}
