//! Road grid, gap-limited car following, and relay-graph snapshots.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{MapConfig, Ranges, ScenarioConfig, VehicleParams};
use crate::error::{Error, Result};
use crate::seeds::{self, SimRng, Stream};

pub type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JunctionKind {
    Intersection,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub xy: Point,
    pub kind: JunctionKind,
    /// Outgoing lane ids.
    pub out: Vec<usize>,
}

/// One directed, straight lane between two junctions.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub length: f64,
    /// Lane running the opposite way on the same segment.
    pub reverse: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub junctions: Vec<Junction>,
    pub lanes: Vec<Lane>,
    pub lights: Option<(f64, f64)>,
}

impl RoadNetwork {
    /// Two-way grid: every road spans the map and is cut at each crossing.
    pub fn grid(map: &MapConfig) -> Result<Self> {
        let mut junctions: Vec<Junction> = Vec::new();
        let mut find_or_add = |xy: Point, kind: JunctionKind| -> usize {
            if let Some(i) = junctions.iter().position(|j| dist(j.xy, xy) < 1e-9) {
                if kind == JunctionKind::Intersection {
                    junctions[i].kind = kind;
                }
                i
            } else {
                junctions.push(Junction { xy, kind, out: Vec::new() });
                junctions.len() - 1
            }
        };

        let mut segments: Vec<(usize, usize)> = Vec::new();
        let mut add_road = |points: Vec<(Point, JunctionKind)>,
                            find: &mut dyn FnMut(Point, JunctionKind) -> usize| {
            let ids: Vec<usize> = points.into_iter().map(|(p, k)| find(p, k)).collect();
            for w in ids.windows(2) {
                segments.push((w[0], w[1]));
            }
        };

        for &x in &map.road_xs {
            if !(0.0..=map.width_m).contains(&x) {
                return Err(crate::error::invalid("map.road_xs", format!("{x} outside map")));
            }
            let mut pts = vec![((x, 0.0), JunctionKind::Boundary)];
            let mut ys: Vec<f64> = map.road_ys.clone();
            ys.sort_by(f64::total_cmp);
            pts.extend(
                ys.iter()
                    .filter(|&&y| y > 0.0 && y < map.height_m)
                    .map(|&y| ((x, y), JunctionKind::Intersection)),
            );
            pts.push(((x, map.height_m), JunctionKind::Boundary));
            add_road(pts, &mut find_or_add);
        }
        for &y in &map.road_ys {
            if !(0.0..=map.height_m).contains(&y) {
                return Err(crate::error::invalid("map.road_ys", format!("{y} outside map")));
            }
            let mut pts = vec![((0.0, y), JunctionKind::Boundary)];
            let mut xs: Vec<f64> = map.road_xs.clone();
            xs.sort_by(f64::total_cmp);
            pts.extend(
                xs.iter()
                    .filter(|&&x| x > 0.0 && x < map.width_m)
                    .map(|&x| ((x, y), JunctionKind::Intersection)),
            );
            pts.push(((map.width_m, y), JunctionKind::Boundary));
            add_road(pts, &mut find_or_add);
        }

        let mut lanes = Vec::with_capacity(segments.len() * 2);
        for (a, b) in segments {
            let length = dist(junctions[a].xy, junctions[b].xy);
            if length <= 0.0 {
                continue;
            }
            let id = lanes.len();
            lanes.push(Lane { id, from: a, to: b, length, reverse: id + 1 });
            lanes.push(Lane { id: id + 1, from: b, to: a, length, reverse: id });
        }
        for lane in &lanes {
            junctions[lane.from].out.push(lane.id);
        }
        Ok(Self { junctions, lanes, lights: map.traffic_lights })
    }

    pub fn total_length(&self) -> f64 {
        self.lanes.iter().map(|l| l.length).sum()
    }

    pub fn position(&self, lane: usize, offset: f64) -> Point {
        let l = &self.lanes[lane];
        let (a, b) = (self.junctions[l.from].xy, self.junctions[l.to].xy);
        let f = (offset / l.length).clamp(0.0, 1.0);
        (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f)
    }

    /// Unit direction of a lane.
    fn direction(&self, lane: usize) -> Point {
        let l = &self.lanes[lane];
        let (a, b) = (self.junctions[l.from].xy, self.junctions[l.to].xy);
        ((b.0 - a.0) / l.length, (b.1 - a.1) / l.length)
    }

    /// Whether traffic entering junction `j` from `lane` is held at time `t`.
    /// North-south lanes see green in the first half of the cycle, east-west
    /// lanes in the second.
    pub fn is_red(&self, lane: usize, t: f64) -> bool {
        let Some((green, red)) = self.lights else { return false };
        let j = &self.junctions[self.lanes[lane].to];
        if j.kind != JunctionKind::Intersection {
            return false;
        }
        let cycle = green + red;
        if cycle <= 0.0 {
            return false;
        }
        let phase = t.rem_euclid(cycle);
        let ns = self.direction(lane).0.abs() < 0.5;
        let ns_green = phase < green;
        ns != ns_green
    }

    /// Candidate continuations at the end of `lane`: every outgoing lane
    /// except the U-turn, unless the U-turn is the only way on.
    pub fn continuations(&self, lane: usize) -> Vec<usize> {
        let l = &self.lanes[lane];
        let out: Vec<usize> = self.junctions[l.to]
            .out
            .iter()
            .copied()
            .filter(|&o| o != l.reverse)
            .collect();
        if out.is_empty() {
            vec![l.reverse]
        } else {
            out
        }
    }

    /// Uniformly random point along the network, weighted by lane length.
    fn random_point(&self, rng: &mut SimRng) -> (usize, f64) {
        let total = self.total_length();
        let mut u = rng.gen::<f64>() * total;
        for l in &self.lanes {
            if u < l.length {
                return (l.id, u);
            }
            u -= l.length;
        }
        let last = self.lanes.len() - 1;
        (last, self.lanes[last].length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: usize,
    pub lane: usize,
    /// Front bumper position along the lane (m).
    pub offset: f64,
    pub speed: f64,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Device,
    Vehicle,
    Server,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Device => "device",
            NodeKind::Vehicle => "vehicle",
            NodeKind::Server => "server",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub kind: NodeKind,
    pub id: usize,
    pub xy: Point,
}

/// Everything `init_scenario` lays out for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub vehicles: Vec<VehicleState>,
    pub devices: Vec<NodePosition>,
    pub servers: Vec<NodePosition>,
    pub params: VehicleParams,
    pub rng: SimRng,
    pub clock: f64,
}

impl Scenario {
    pub fn nodes(&self) -> impl Iterator<Item = NodePosition> + '_ {
        self.devices
            .iter()
            .copied()
            .chain(self.vehicles.iter().map(|v| NodePosition {
                kind: NodeKind::Vehicle,
                id: v.id,
                xy: self.network.position(v.lane, v.offset),
            }))
            .chain(self.servers.iter().copied())
    }

    pub fn step(&mut self, dt: f64) {
        self.vehicles = step_vehicles(
            &self.vehicles,
            &self.network,
            &self.params,
            self.clock,
            dt,
            &mut self.rng,
        );
        self.clock += dt;
    }

    pub fn snapshot(&self, ranges: &Ranges) -> TopologySnapshot {
        let vehicles: Vec<Point> = self
            .vehicles
            .iter()
            .map(|v| self.network.position(v.lane, v.offset))
            .collect();
        let devices: Vec<Point> = self.devices.iter().map(|d| d.xy).collect();
        let servers: Vec<Point> = self.servers.iter().map(|s| s.xy).collect();
        snapshot(&vehicles, &devices, &servers, ranges)
    }

    /// Appends `slot,kind,id,x,y` rows for every node.
    pub fn write_trace<W: Write>(&self, slot: usize, out: &mut W) -> std::io::Result<()> {
        for n in self.nodes() {
            writeln!(out, "{slot},{},{},{},{}", n.kind.name(), n.id, n.xy.0, n.xy.1)?;
        }
        Ok(())
    }
}

/// Lays out roads, vehicles, devices and servers for `config`.
pub fn init_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    let network = RoadNetwork::grid(&config.map)?;
    let params = config.vehicle;
    let mut rng = seeds::rng(seed, Stream::Mobility, 0);

    let n = config.num_vehicles;
    let pitch = params.length_m + params.safe_gap_m;
    let slots_available: usize = network
        .lanes
        .iter()
        .map(|l| (l.length / pitch).floor() as usize)
        .sum();
    if n > slots_available {
        return Err(Error::ScenarioInfeasible(format!(
            "{n} vehicles need {:.0} m of lane, network has {:.0} m",
            n as f64 * pitch,
            network.total_length()
        )));
    }

    let mut vehicles: Vec<VehicleState> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while vehicles.len() < n {
        attempts += 1;
        if attempts > 10_000 + 100 * n {
            return Err(Error::ScenarioInfeasible(format!(
                "could not place {n} vehicles with legal gaps"
            )));
        }
        let (lane, u) = network.random_point(&mut rng);
        let offset = u.max(params.length_m);
        if offset > network.lanes[lane].length {
            continue;
        }
        let clash = vehicles
            .iter()
            .any(|v| v.lane == lane && (v.offset - offset).abs() < pitch);
        if !clash {
            vehicles.push(VehicleState {
                id: vehicles.len(),
                lane,
                offset,
                speed: 0.0,
                length: params.length_m,
            });
        }
    }

    let devices = (0..config.num_devices)
        .map(|id| {
            let (lane, u) = network.random_point(&mut rng);
            let (x, y) = network.position(lane, u);
            let (dx, dy) = network.direction(lane);
            let side = (rng.gen::<f64>() * 2.0 - 1.0) * config.device_side_offset_m;
            NodePosition { kind: NodeKind::Device, id, xy: (x - dy * side, y + dx * side) }
        })
        .collect();

    let servers = config.server_sites[..config.num_servers]
        .iter()
        .enumerate()
        .map(|(id, &xy)| NodePosition { kind: NodeKind::Server, id, xy })
        .collect();

    Ok(Scenario { network, vehicles, devices, servers, params, rng, clock: 0.0 })
}

/// Advances every vehicle by one step of `dt` seconds starting at time `now`.
///
/// Vehicles on a lane are moved front to back so each follower sees its
/// leader's new position; a vehicle may cross onto at most one new lane per
/// step and only if the entry point leaves the safe gap to that lane's tail.
pub fn step_vehicles(
    vehicles: &[VehicleState],
    net: &RoadNetwork,
    params: &VehicleParams,
    now: f64,
    dt: f64,
    rng: &mut SimRng,
) -> Vec<VehicleState> {
    let mut out = vehicles.to_vec();
    if dt <= 0.0 {
        return out;
    }
    let reach = params.max_speed_mps * dt;
    let pitch_for = |v: &VehicleState| v.length + params.safe_gap_m;

    // front-to-back order inside each lane
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| {
        out[a]
            .lane
            .cmp(&out[b].lane)
            .then(out[b].offset.total_cmp(&out[a].offset))
            .then(out[a].id.cmp(&out[b].id))
    });

    for &k in &order {
        let me = out[k];
        let lane_len = net.lanes[me.lane].length;
        // nearest leader on the same lane (already moved if it was ahead)
        let leader = out
            .iter()
            .filter(|v| v.id != me.id && v.lane == me.lane && v.offset > me.offset)
            .min_by(|a, b| a.offset.total_cmp(&b.offset));
        let mut target = me.offset + reach;
        if let Some(l) = leader {
            target = target.min(l.offset - pitch_for(l));
        }
        target = target.max(me.offset);

        let mut next = VehicleState { speed: 0.0, ..me };
        if target <= lane_len || net.is_red(me.lane, now) {
            next.offset = target.min(lane_len);
        } else {
            let options = net.continuations(me.lane);
            let lane2 = *options.choose(rng).expect("at least one continuation");
            let tail = out
                .iter()
                .filter(|v| v.id != me.id && v.lane == lane2)
                .min_by(|a, b| a.offset.total_cmp(&b.offset));
            let room = tail.map_or(f64::INFINITY, |t| t.offset - pitch_for(t));
            let overshoot = (target - lane_len).min(room).min(net.lanes[lane2].length);
            if overshoot > 0.0 {
                next.lane = lane2;
                next.offset = overshoot;
            } else {
                next.offset = lane_len;
            }
        }
        let moved = if next.lane == me.lane {
            next.offset - me.offset
        } else {
            lane_len - me.offset + next.offset
        };
        next.speed = moved / dt;
        out[k] = next;
    }
    out
}

/// Undirected geometric graph over devices, vehicles and servers.
///
/// Node indices: devices `0..I`, vehicles `I..I+N`, servers `I+N..I+N+J`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayGraph {
    pub kinds: Vec<NodeKind>,
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl RelayGraph {
    pub fn new(kinds: Vec<NodeKind>) -> Self {
        let adj = vec![Vec::new(); kinds.len()];
        Self { kinds, adj }
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        self.adj[a].push((b, w));
        self.adj[b].push((a, w));
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a].iter().find(|(n, _)| *n == b).map(|&(_, w)| w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySnapshot {
    pub devices: Vec<Point>,
    pub vehicles: Vec<Point>,
    pub servers: Vec<Point>,
    pub graph: RelayGraph,
}

impl TopologySnapshot {
    pub fn device_node(&self, i: usize) -> usize {
        i
    }

    pub fn vehicle_node(&self, n: usize) -> usize {
        self.devices.len() + n
    }

    pub fn server_node(&self, j: usize) -> usize {
        self.devices.len() + self.vehicles.len() + j
    }

    /// Server index of a graph node, if it is a server.
    pub fn server_of(&self, node: usize) -> Option<usize> {
        let base = self.devices.len() + self.vehicles.len();
        (node >= base).then(|| node - base)
    }

    pub fn position(&self, node: usize) -> Point {
        let (i, n) = (self.devices.len(), self.vehicles.len());
        if node < i {
            self.devices[node]
        } else if node < i + n {
            self.vehicles[node - i]
        } else {
            self.servers[node - i - n]
        }
    }

    /// Servers with a direct edge to device `i`, with their distances.
    pub fn one_hop_servers(&self, i: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self.graph.adj[self.device_node(i)]
            .iter()
            .filter_map(|&(n, w)| self.server_of(n).map(|j| (j, w)))
            .collect();
        v.sort_by_key(|&(j, _)| j);
        v
    }
}

/// Builds the relay graph for one slot.
pub fn snapshot(
    vehicles: &[Point],
    devices: &[Point],
    servers: &[Point],
    ranges: &Ranges,
) -> TopologySnapshot {
    let (ni, nn) = (devices.len(), vehicles.len());
    let kinds = std::iter::repeat_n(NodeKind::Device, ni)
        .chain(std::iter::repeat_n(NodeKind::Vehicle, nn))
        .chain(std::iter::repeat_n(NodeKind::Server, servers.len()))
        .collect();
    let mut graph = RelayGraph::new(kinds);
    let v0 = ni;
    let s0 = ni + nn;
    for (i, &d) in devices.iter().enumerate() {
        for (n, &v) in vehicles.iter().enumerate() {
            let w = dist(d, v);
            if w <= ranges.dev_range_m {
                graph.add_edge(i, v0 + n, w);
            }
        }
        for (j, &s) in servers.iter().enumerate() {
            let w = dist(d, s);
            if w <= ranges.es_cov_m {
                graph.add_edge(i, s0 + j, w);
            }
        }
    }
    for (n, &a) in vehicles.iter().enumerate() {
        for (m, &b) in vehicles.iter().enumerate().skip(n + 1) {
            let w = dist(a, b);
            if w <= ranges.v2v_range_m {
                graph.add_edge(v0 + n, v0 + m, w);
            }
        }
        for (j, &s) in servers.iter().enumerate() {
            let w = dist(a, s);
            if w <= ranges.es_cov_m {
                graph.add_edge(v0 + n, s0 + j, w);
            }
        }
    }
    TopologySnapshot {
        devices: devices.to_vec(),
        vehicles: vehicles.to_vec(),
        servers: servers.to_vec(),
        graph,
    }
}
