use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::mobility::{NodeKind, RelayGraph, TopologySnapshot};
use crate::radio::{hop_rate, ChannelParams};

/// `[device, vehicle*, server]` as relay-graph node ids, with hop lengths in m.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePath {
    pub nodes: Vec<usize>,
    pub hop_m: Vec<f64>,
    pub server: usize,
}

impl RoutePath {
    pub fn distance_m(&self) -> f64 {
        self.hop_m.iter().sum()
    }

    pub fn hops(&self) -> usize {
        self.hop_m.len()
    }

    /// Relay vehicles, in order (empty for a one-hop route).
    pub fn relays(&self) -> &[usize] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    /// Adjacent relay pairs along the route.
    pub fn vehicle_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.relays().windows(2).map(|w| (w[0], w[1]))
    }
}

#[derive(Debug, Clone)]
struct Label {
    dist: f64,
    path: Vec<usize>,
}

fn better(a: &Label, b: &Label) -> bool {
    match a.dist.total_cmp(&b.dist) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.path < b.path,
    }
}

/// Shortest paths from `source` to every node, where only vehicles may
/// relay. Ties go to the lexicographically smallest node sequence.
fn shortest_paths(graph: &RelayGraph, source: usize) -> Vec<Option<Label>> {
    let n = graph.len();
    let mut best: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    best[source] = Some(Label { dist: 0.0, path: vec![source] });
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] {
                continue;
            }
            if let Some(l) = &best[v] {
                if pick.is_none_or(|p| better(l, best[p].as_ref().unwrap())) {
                    pick = Some(v);
                }
            }
        }
        let Some(u) = pick else { break };
        done[u] = true;
        if u != source && graph.kinds[u] != NodeKind::Vehicle {
            continue;
        }
        let base = best[u].clone().unwrap();
        for &(v, w) in &graph.adj[u] {
            if done[v] || graph.kinds[v] == NodeKind::Device {
                continue;
            }
            let mut path = base.path.clone();
            path.push(v);
            let cand = Label { dist: base.dist + w, path };
            if best[v].as_ref().is_none_or(|cur| better(&cand, cur)) {
                best[v] = Some(cand);
            }
        }
    }
    best
}

fn to_route(graph: &RelayGraph, snapshot: &TopologySnapshot, label: &Label) -> RoutePath {
    let hop_m = label
        .path
        .windows(2)
        .map(|w| graph.weight(w[0], w[1]).expect("path follows edges"))
        .collect();
    let server = snapshot.server_of(*label.path.last().unwrap()).expect("ends at server");
    RoutePath { nodes: label.path.clone(), hop_m, server }
}

/// Shortest route from device `i` to each server (index = server id).
pub fn routes_from(snapshot: &TopologySnapshot, device: usize) -> Vec<Option<RoutePath>> {
    let graph = &snapshot.graph;
    let labels = shortest_paths(graph, snapshot.device_node(device));
    (0..snapshot.servers.len())
        .map(|j| {
            labels[snapshot.server_node(j)]
                .as_ref()
                .map(|l| to_route(graph, snapshot, l))
        })
        .collect()
}

pub fn build_route(snapshot: &TopologySnapshot, device: usize, server: usize) -> Option<RoutePath> {
    routes_from(snapshot, device).swap_remove(server)
}

/// Store-and-forward transfer time of `size_bits` along `route` using a
/// fixed share `bandwidth_hz` on every hop.
pub fn transmission_latency(
    task_id: u64,
    size_bits: f64,
    route: &RoutePath,
    bandwidth_hz: f64,
    params: &ChannelParams,
) -> Result<f64> {
    if size_bits == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (hop, &d) in route.hop_m.iter().enumerate() {
        let rate = hop_rate(d, bandwidth_hz, params);
        if !(rate > 0.0) {
            return Err(Error::Unreachable { task: task_id, hop });
        }
        total += size_bits / rate;
    }
    Ok(total)
}
