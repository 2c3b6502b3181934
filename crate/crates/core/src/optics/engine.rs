//! Runs one trial of a circuit: branches travel along edges, split and
//! recombine at optical elements, and meet clusters inside media.
//!
//! Every random draw comes from a substream keyed by what it decides (the
//! branch, the medium and how many times that branch has already met a
//! cluster there), so outcomes do not depend on edge lengths or on the order
//! in which unrelated events are processed.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;

use super::scheduler::{EventKind, EventQueue};
use super::{split, superpose, CircuitGraph, ComponentKind, EdgeId, NodeId, Split};
use crate::error::{Error, Result};
use crate::reduction::{apply_reduction, restrict_to_component, sample_first_match, ReductionOutcome};
use crate::stats::{splitmix64, SeededStream};
use crate::wavepacket::{
    phase_space_separated, BranchId, Correlation, EntangledPair, Packet, PhaseConstant, Polarization,
    DEFAULT_ANGLE_THRESHOLD,
};

pub const DEFAULT_EVENT_BUDGET: usize = 1_000_000;

/// Branches whose weight falls below this after a superposition are dropped.
pub const NULL_WEIGHT: f64 = 1e-20;

const TAG_ENCOUNTER: u64 = 0x656e_636f_756e_7465;
const TAG_CHOPPER: u64 = 0x6368_6f70_7065_7221;

/// What enters the circuit: one packet, or an entangled pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Single(Packet),
    Pair(EntangledPair),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOptions {
    pub event_budget: usize,
    pub angle_threshold: f64,
    /// Choices queued for this trial, on top of those stored in the graph.
    pub choices: Vec<super::Choice>,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions { event_budget: DEFAULT_EVENT_BUDGET, angle_threshold: DEFAULT_ANGLE_THRESHOLD, choices: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketOutcome {
    Click { node: NodeId, polarization: Polarization, time: f64 },
    /// Contracted in an object or foil, or blocked by a chopper.
    Absorbed { node: NodeId, time: f64 },
    /// Every surviving branch came to rest without a contraction.
    Undetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncounterKind {
    Contracted,
    Vanished,
    NoEvent,
}

/// A branch meeting a phase-matching cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Encounter {
    pub packet: usize,
    pub node: NodeId,
    pub branch: BranchId,
    pub time: f64,
    pub kind: EncounterKind,
    /// Output port the branch was headed for, inside a transmitting medium.
    pub exit: Option<usize>,
}

/// A live branch entering an absorbing terminal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub packet: usize,
    pub node: NodeId,
    pub branch: BranchId,
    pub weight: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub outcomes: Vec<PacketOutcome>,
    pub encounters: Vec<Encounter>,
    pub arrivals: Vec<Arrival>,
    pub events: usize,
    /// Largest deviation of a live packet's total weight from 1 after any event.
    pub max_norm_error: f64,
}

impl TrialResult {
    pub fn click(&self, packet: usize) -> Option<(NodeId, Polarization)> {
        match self.outcomes.get(packet) {
            Some(PacketOutcome::Click { node, polarization, .. }) => Some((*node, *polarization)),
            _ => None,
        }
    }

    pub fn contractions(&self, packet: usize) -> usize {
        self.encounters
            .iter()
            .filter(|e| e.packet == packet && e.kind == EncounterKind::Contracted)
            .count()
    }

    pub fn encountered(&self, packet: usize, node: NodeId) -> bool {
        self.encounters.iter().any(|e| e.packet == packet && e.node == node)
    }
}

pub fn run_trial(graph: &CircuitGraph, emission: Emission, rng: &SeededStream) -> Result<TrialResult> {
    run_trial_with(graph, emission, rng, &TrialOptions::default())
}

pub fn run_trial_with(
    graph: &CircuitGraph,
    emission: Emission,
    rng: &SeededStream,
    options: &TrialOptions,
) -> Result<TrialResult> {
    let (packets, correlation) = match emission {
        Emission::Single(p) => (vec![p], None),
        Emission::Pair(pair) => (vec![pair.packet_a, pair.packet_b], Some(pair.correlation)),
    };
    for p in &packets {
        if !p.is_normalized() {
            return Err(Error::InvalidConfig(format!("emitted packet has weight {}", p.total_weight())));
        }
    }
    let mut sim = Sim::new(graph, packets, correlation, rng, options);
    sim.emit()?;
    sim.run()?;
    Ok(sim.finish())
}

struct Sim<'a> {
    graph: &'a CircuitGraph,
    packets: Vec<Packet>,
    correlation: Option<Correlation>,
    rng: &'a SeededStream,
    options: &'a TrialOptions,
    queue: EventQueue,
    inserted: Vec<Option<bool>>,
    visited: Vec<Option<f64>>,
    chopper: Vec<(usize, NodeId, bool)>,
    outcomes: Vec<Option<PacketOutcome>>,
    encounters: Vec<Encounter>,
    arrivals: Vec<Arrival>,
    events: usize,
    max_norm_error: f64,
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x9e37_79b9_7f4a_7c15, |acc, &p| splitmix64(acc.rotate_left(23) ^ p))
}

/// Signed circular difference `a - b` in (-π, π].
fn signed_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

impl<'a> Sim<'a> {
    fn new(
        graph: &'a CircuitGraph,
        packets: Vec<Packet>,
        correlation: Option<Correlation>,
        rng: &'a SeededStream,
        options: &'a TrialOptions,
    ) -> Self {
        let inserted = graph
            .nodes()
            .map(|(_, c)| match c.kind {
                ComponentKind::Switchable { inserted, .. } => Some(inserted),
                _ => None,
            })
            .collect();
        let n = packets.len();
        Sim {
            graph,
            packets,
            correlation,
            rng,
            options,
            queue: EventQueue::new(),
            inserted,
            visited: vec![None; graph.node_count()],
            chopper: Vec::new(),
            outcomes: vec![None; n],
            encounters: Vec::new(),
            arrivals: Vec::new(),
            events: 0,
            max_norm_error: 0.0,
        }
    }

    fn emit(&mut self) -> Result<()> {
        for choice in self.graph.choices().iter().chain(&self.options.choices) {
            self.graph.check_switchable(choice.node)?;
            self.queue.push(
                choice.at_time,
                choice.node,
                usize::MAX,
                BranchId(u32::MAX),
                EventKind::Reconfigure { insert: choice.insert },
            );
        }
        for p in 0..self.packets.len() {
            let live: Vec<(BranchId, EdgeId)> = self.packets[p].live().map(|b| (b.id, b.edge)).collect();
            for (id, edge) in live {
                if self.graph.edge(edge).from.0 >= self.graph.node_count()
                    || !matches!(self.graph.node(self.graph.edge(edge).from).kind, ComponentKind::Source { .. })
                {
                    return Err(Error::InvalidCircuit("emitted branch does not start on a source edge".into()));
                }
                self.place(p, id, edge, 0.0)?;
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        while let Some(ev) = self.queue.pop() {
            self.events += 1;
            if self.events > self.options.event_budget {
                return Err(Error::NonTermination(self.options.event_budget));
            }
            if let EventKind::Reconfigure { insert } = ev.kind {
                if let Some(arrived) = self.visited[ev.node.0] {
                    return Err(Error::ChoiceTooLate { node: ev.node.0, at_time: ev.time, arrived });
                }
                self.inserted[ev.node.0] = Some(insert);
                continue;
            }
            let p = ev.packet;
            let live = self.packets[p].branch(ev.branch).is_some_and(|b| b.alive);
            if !live || self.packets[p].reduced {
                continue;
            }
            match ev.kind {
                EventKind::Arrive { edge } => self.arrive(p, ev.branch, ev.node, edge, ev.time)?,
                EventKind::Match { entered, cluster, jitter, penetration, encounter, exit } => {
                    let mut cluster = cluster;
                    cluster.alpha2 = PhaseConstant::new(self.packets[p].alpha1.value() + jitter);
                    self.contact(p, ev.branch, ev.node, ev.time, entered, cluster, penetration, encounter, exit)?;
                }
                EventKind::Exit { port } => {
                    let edge = self.out_edge(ev.node, port)?;
                    self.place(p, ev.branch, edge, ev.time)?;
                }
                EventKind::Reconfigure { .. } => unreachable!(),
            }
            self.track_norm();
        }
        Ok(())
    }

    fn finish(self) -> TrialResult {
        TrialResult {
            outcomes: self.outcomes.into_iter().map(|o| o.unwrap_or(PacketOutcome::Undetected)).collect(),
            encounters: self.encounters,
            arrivals: self.arrivals,
            events: self.events,
            max_norm_error: self.max_norm_error,
        }
    }

    fn track_norm(&mut self) {
        for (p, packet) in self.packets.iter().enumerate() {
            if self.outcomes[p].is_none() {
                let err = (packet.total_weight() - 1.0).abs();
                self.max_norm_error = self.max_norm_error.max(err);
            }
        }
    }

    fn out_edge(&self, node: NodeId, port: usize) -> Result<EdgeId> {
        self.graph
            .out_edge(node, port)
            .ok_or_else(|| Error::InvalidCircuit(format!("{}: output port {port} is unconnected", self.graph.node(node).label)))
    }

    /// Puts a branch at the start of `edge` at time `t`, merging it into a
    /// coherent branch already there.
    fn place(&mut self, p: usize, id: BranchId, edge: EdgeId, t: f64) -> Result<()> {
        let e = *self.graph.edge(edge);
        let threshold = self.options.angle_threshold;
        let packet = &mut self.packets[p];
        let b = packet.branch_mut(id).expect("placed branch exists");
        b.edge = edge;
        b.direction = e.direction;
        // envelope centre extrapolated back to t = 0
        b.longitudinal_offset = -e.speed * t;
        let b = b.clone();

        let partner = packet
            .live()
            .find(|o| o.id != id && o.edge == edge && o.polarization == b.polarization && !phase_space_separated(o, &b, threshold))
            .map(|o| o.id);
        match partner {
            Some(pid) => {
                let merged = superpose(packet.branch(pid).expect("partner exists"), &b, threshold)?;
                let target = packet.branch_mut(pid).expect("partner exists");
                target.amplitude = merged.amplitude;
                if target.amplitude.norm_sqr() < NULL_WEIGHT {
                    target.alive = false;
                }
                packet.kill(id);
            }
            None => {
                if b.amplitude.norm_sqr() < NULL_WEIGHT {
                    packet.kill(id);
                } else {
                    self.queue.push(t + e.transit_time(), e.to, p, id, EventKind::Arrive { edge });
                }
            }
        }
        Ok(())
    }

    fn arrive(&mut self, p: usize, id: BranchId, node: NodeId, edge: EdgeId, t: f64) -> Result<()> {
        if self.visited[node.0].is_none() {
            self.visited[node.0] = Some(t);
        }
        let port = self.graph.edge(edge).to_port;
        match &self.graph.node(node).kind {
            ComponentKind::Source { .. } => {
                return Err(Error::InvalidCircuit(format!("{} has an input edge", self.graph.node(node).label)));
            }
            ComponentKind::BeamSplitter(bs) => self.split_at(p, id, node, port, *bs, t)?,
            ComponentKind::Switchable { splitter, .. } => {
                if self.inserted[node.0] == Some(true) {
                    self.split_at(p, id, node, port, *splitter, t)?;
                } else {
                    let out = self.out_edge(node, port)?;
                    self.place(p, id, out, t)?;
                }
            }
            ComponentKind::Mirror => {
                let out = self.out_edge(node, 0)?;
                self.place(p, id, out, t)?;
            }
            ComponentKind::PhaseShifter { phi } => {
                let b = self.packets[p].branch_mut(id).expect("branch exists");
                b.amplitude *= Complex64::from_polar(1.0, *phi);
                let out = self.out_edge(node, 0)?;
                self.place(p, id, out, t)?;
            }
            ComponentKind::Chopper { a } => {
                if self.chopper_open(p, node, *a) {
                    let out = self.out_edge(node, 0)?;
                    self.place(p, id, out, t)?;
                } else {
                    let packet = &mut self.packets[p];
                    for b in packet.branches.iter_mut() {
                        b.alive = false;
                    }
                    packet.absorbed = true;
                    self.outcomes[p] = Some(PacketOutcome::Absorbed { node, time: t });
                }
            }
            ComponentKind::PartialFoil { a, .. } => {
                let a = *a;
                let packet = &mut self.packets[p];
                let b = packet.branch(id).expect("branch exists").clone();
                let (kept, deflected) = super::partial_foil_split(&b, a);
                packet.branch_mut(id).expect("branch exists").amplitude = kept.amplitude;
                let lost =
                    packet.add_branch(deflected.amplitude, b.polarization, b.edge, b.direction, b.packet_length);
                packet.branch_mut(lost).expect("new branch").longitudinal_offset = b.longitudinal_offset;
                for (bid, exit) in [(id, 0), (lost, 1)] {
                    if self.packets[p].branch(bid).expect("branch exists").weight() < NULL_WEIGHT {
                        self.packets[p].kill(bid);
                    } else {
                        self.traverse(p, bid, node, t, 0.0, 0, Some(exit));
                    }
                }
            }
            ComponentKind::ObjectAbsorber(_) => {
                self.record_arrival(p, id, node, t);
                self.traverse(p, id, node, t, 0.0, 0, None);
            }
            ComponentKind::Detector { polarizing, .. } => {
                if *polarizing {
                    let b = self.packets[p].branch_mut(id).expect("branch exists");
                    if b.polarization == Polarization::V {
                        b.direction = (b.direction + FRAC_PI_2).rem_euclid(TAU);
                    }
                }
                self.record_arrival(p, id, node, t);
                self.traverse(p, id, node, t, 0.0, 0, None);
            }
            ComponentKind::Sink => {}
        }
        Ok(())
    }

    fn record_arrival(&mut self, p: usize, id: BranchId, node: NodeId, t: f64) {
        let weight = self.packets[p].branch(id).map_or(0.0, |b| b.weight());
        self.arrivals.push(Arrival { packet: p, node, branch: id, weight, time: t });
    }

    fn split_at(
        &mut self,
        p: usize,
        id: BranchId,
        node: NodeId,
        port: usize,
        bs: super::BeamSplitter,
        t: f64,
    ) -> Result<()> {
        let b = self.packets[p].branch(id).expect("branch exists").clone();
        let straight = self.out_edge(node, port)?;
        let crossed = self.out_edge(node, 1 - port)?;
        match split(&b, &bs) {
            Split::Forwarded(_) => self.place(p, id, straight, t),
            Split::Divided { transmitted, reflected } => {
                let packet = &mut self.packets[p];
                packet.branch_mut(id).expect("branch exists").amplitude = transmitted.amplitude;
                let rid = packet.add_branch(reflected.amplitude, b.polarization, b.edge, b.direction, b.packet_length);
                self.place(p, id, straight, t)?;
                self.place(p, rid, crossed, t)
            }
        }
    }

    fn chopper_open(&mut self, p: usize, node: NodeId, a: f64) -> bool {
        if let Some(&(_, _, open)) = self.chopper.iter().find(|(q, n, _)| *q == p && *n == node) {
            return open;
        }
        let mut s = self.rng.substream(mix(&[TAG_CHOPPER, p as u64, node.0 as u64]));
        let open = s.bernoulli(a);
        self.chopper.push((p, node, open));
        open
    }

    /// Samples the branch's next matching cluster below `depth`, or lets it
    /// leave the medium (or come to rest in a terminal).
    #[allow(clippy::too_many_arguments)]
    fn traverse(&mut self, p: usize, id: BranchId, node: NodeId, entered: f64, depth: f64, encounter: u32, exit: Option<usize>) {
        let medium = *self.graph.node(node).kind.medium().expect("traversed node has a medium");
        let packet = &self.packets[p];
        let b = packet.branch(id).expect("branch exists");
        let speed = self.graph.edge(b.edge).speed;
        let key = mix(&[TAG_ENCOUNTER, p as u64, u64::from(id.0), node.0 as u64, u64::from(encounter)]);
        let mut s = self.rng.substream(key);
        let alpha1 = packet.alpha1;
        match sample_first_match(&mut s, medium.thickness - depth, alpha1, &medium.criterion, node) {
            Some((d, mut cluster)) => {
                cluster.position = depth + d;
                let jitter = signed_difference(cluster.alpha2.value(), alpha1.value());
                let penetration = medium.thickness - cluster.position;
                self.queue.push(
                    entered + cluster.position / speed,
                    node,
                    p,
                    id,
                    EventKind::Match { entered, cluster, jitter, penetration, encounter, exit },
                );
            }
            None => {
                if let Some(port) = exit {
                    self.queue.push(entered + medium.thickness / speed, node, p, id, EventKind::Exit { port });
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn contact(
        &mut self,
        p: usize,
        id: BranchId,
        node: NodeId,
        t: f64,
        entered: f64,
        cluster: crate::reduction::Cluster,
        penetration: f64,
        encounter: u32,
        exit: Option<usize>,
    ) -> Result<()> {
        let medium = *self.graph.node(node).kind.medium().expect("contact node has a medium");
        let threshold = self.options.angle_threshold;
        let polarization = self.packets[p].branch(id).expect("branch exists").polarization;
        let outcome = apply_reduction(&mut self.packets[p], id, cluster, penetration, &medium.criterion, threshold)?;
        let kind = match outcome {
            ReductionOutcome::Contracted(_) => EncounterKind::Contracted,
            ReductionOutcome::BranchVanished(_) => EncounterKind::Vanished,
            ReductionOutcome::NoEvent => EncounterKind::NoEvent,
        };
        self.encounters.push(Encounter { packet: p, node, branch: id, time: t, kind, exit });
        match outcome {
            ReductionOutcome::Contracted(_) => {
                self.outcomes[p] = Some(match self.graph.node(node).kind {
                    ComponentKind::Detector { .. } => PacketOutcome::Click { node, polarization, time: t },
                    _ => PacketOutcome::Absorbed { node, time: t },
                });
                if let Some(corr) = self.correlation {
                    let q = 1 - p;
                    if !self.packets[q].reduced && self.outcomes[q].is_none() {
                        restrict_to_component(&mut self.packets[q], corr.partner_of(polarization))?;
                    }
                }
            }
            ReductionOutcome::BranchVanished(_) => {}
            ReductionOutcome::NoEvent => self.traverse(p, id, node, entered, cluster.position, encounter + 1, exit),
        }
        Ok(())
    }
}
