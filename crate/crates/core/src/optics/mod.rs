//! Circuit components, topology and the amplitude algebra at optical elements.
//!
//! Ports: a two-port element maps input `i` to output `i` when it transmits
//! and to output `1 - i` when it reflects. A partial foil sends the
//! transmitted part to output 0 and the deflected part to output 1.

mod engine;
mod scheduler;

pub use engine::{
    run_trial, run_trial_with, Arrival, Emission, Encounter, EncounterKind, PacketOutcome, TrialOptions,
    TrialResult, DEFAULT_EVENT_BUDGET, NULL_WEIGHT,
};
pub use scheduler::{Event, EventKind, EventQueue};

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::{CriterionParams, DEFAULT_SATURATION_DEPTH};
use crate::wavepacket::{phase_space_separated, Branch, Polarization};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const THERMAL_NEUTRON_SPEED: f64 = 2200.0;

const UNITARITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

/// A slab of cluster-bearing material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub thickness: f64,
    pub criterion: CriterionParams,
}

impl Medium {
    /// 1 cm of detector material at the default cluster density.
    pub fn complete_absorber() -> Self {
        Medium { thickness: 1e-2, criterion: CriterionParams::default() }
    }

    /// A complete absorber with a much larger cluster density.
    pub fn enhanced_absorber() -> Self {
        let base = CriterionParams::default();
        Medium { thickness: 1e-2, criterion: base.with_density(base.cluster_line_density * 1e3) }
    }

    /// A thin, sparse absorber: most packets cross it without meeting a matching cluster.
    pub fn thin_foil() -> Self {
        Medium {
            thickness: DEFAULT_SATURATION_DEPTH,
            criterion: CriterionParams::default().with_density(1e4),
        }
    }

    fn validate(&self) -> Result<()> {
        self.criterion.validate()?;
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(Error::InvalidCircuit(format!("medium thickness {} must be positive", self.thickness)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitter {
    pub t: f64,
    pub r: f64,
    /// Polarization forwarded unsplit, if any.
    pub polarization_selective: Option<Polarization>,
}

impl BeamSplitter {
    pub fn new(t: f64) -> Self {
        BeamSplitter { t, r: 1.0 - t, polarization_selective: None }
    }

    pub fn balanced() -> Self {
        BeamSplitter::new(0.5)
    }

    pub fn passing(mut self, polarization: Polarization) -> Self {
        self.polarization_selective = Some(polarization);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t >= 0.0 && self.r >= 0.0 && (self.t + self.r - 1.0).abs() <= UNITARITY_TOLERANCE;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCircuit(format!("splitter T={} R={} is not unitary", self.t, self.r)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ComponentKind {
    Source { outputs: usize },
    BeamSplitter(BeamSplitter),
    /// A splitter that a queued choice can insert or remove; removed, it passes
    /// input `i` straight to output `i`.
    Switchable { splitter: BeamSplitter, inserted: bool },
    Mirror,
    PhaseShifter { phi: f64 },
    ObjectAbsorber(Medium),
    PartialFoil { a: f64, medium: Medium },
    Chopper { a: f64 },
    /// `polarizing` places a polarizing splitter in front of the counters,
    /// deflecting the vertical component.
    Detector { medium: Medium, polarizing: bool },
    Sink,
}

impl ComponentKind {
    pub fn inputs(&self) -> usize {
        match self {
            ComponentKind::Source { .. } => 0,
            ComponentKind::BeamSplitter(_) | ComponentKind::Switchable { .. } => 2,
            ComponentKind::Mirror
            | ComponentKind::PhaseShifter { .. }
            | ComponentKind::PartialFoil { .. }
            | ComponentKind::Chopper { .. } => 1,
            ComponentKind::ObjectAbsorber(_) | ComponentKind::Detector { .. } | ComponentKind::Sink => usize::MAX,
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            ComponentKind::Source { outputs } => *outputs,
            ComponentKind::BeamSplitter(_) | ComponentKind::Switchable { .. } | ComponentKind::PartialFoil { .. } => 2,
            ComponentKind::Mirror | ComponentKind::PhaseShifter { .. } | ComponentKind::Chopper { .. } => 1,
            ComponentKind::ObjectAbsorber(_) | ComponentKind::Detector { .. } | ComponentKind::Sink => 0,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.outputs() == 0
    }

    pub fn medium(&self) -> Option<&Medium> {
        match self {
            ComponentKind::ObjectAbsorber(m) => Some(m),
            ComponentKind::PartialFoil { medium, .. } | ComponentKind::Detector { medium, .. } => Some(medium),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub label: String,
    pub kind: ComponentKind,
}

/// A directed beam line between two ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub from_port: usize,
    pub to: NodeId,
    pub to_port: usize,
    pub length: f64,
    pub speed: f64,
    /// Lab-frame direction of travel, radians.
    pub direction: f64,
}

impl Edge {
    pub fn transit_time(&self) -> f64 {
        self.length / self.speed
    }
}

/// A queued configuration change of a switchable splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub node: NodeId,
    pub insert: bool,
    pub at_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitGraph {
    nodes: Vec<Component>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<Option<EdgeId>>>,
    incoming: Vec<Vec<EdgeId>>,
    choices: Vec<Choice>,
}

impl CircuitGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, label: &str, kind: ComponentKind) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.outgoing.push(vec![None; kind.outputs()]);
        self.incoming.push(Vec::new());
        self.nodes.push(Component { label: label.to_string(), kind });
        id
    }

    /// Joins output `from_port` of `from` to input `to_port` of `to`.
    pub fn connect(
        &mut self,
        (from, from_port): (NodeId, usize),
        (to, to_port): (NodeId, usize),
        length: f64,
        speed: f64,
    ) -> Result<EdgeId> {
        let n = self.nodes.len();
        if from.0 >= n || to.0 >= n {
            return Err(Error::InvalidCircuit("edge refers to an unknown node".into()));
        }
        if !(length > 0.0 && length.is_finite() && speed > 0.0 && speed.is_finite()) {
            return Err(Error::InvalidCircuit(format!(
                "edge {}→{} needs positive length and speed",
                self.nodes[from.0].label, self.nodes[to.0].label
            )));
        }
        let slot = self.outgoing[from.0].get_mut(from_port).ok_or_else(|| {
            Error::InvalidCircuit(format!("{} has no output port {from_port}", self.nodes[from.0].label))
        })?;
        if slot.is_some() {
            return Err(Error::InvalidCircuit(format!(
                "output port {from_port} of {} is already connected",
                self.nodes[from.0].label
            )));
        }
        let limit = self.nodes[to.0].kind.inputs();
        if to_port >= limit || self.incoming[to.0].iter().any(|e| self.edges[e.0].to_port == to_port && limit != usize::MAX)
        {
            return Err(Error::InvalidCircuit(format!(
                "input port {to_port} of {} is missing or taken",
                self.nodes[to.0].label
            )));
        }
        let id = EdgeId(self.edges.len());
        *slot = Some(id);
        self.incoming[to.0].push(id);
        self.edges.push(Edge { from, from_port, to, to_port, length, speed, direction: 0.0 });
        Ok(id)
    }

    pub fn node(&self, id: NodeId) -> &Component {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Component {
        &mut self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Component)> {
        self.nodes.iter().enumerate().map(|(i, c)| (NodeId(i), c))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn edge_mut(&mut self, id: EdgeId) -> &mut Edge {
        &mut self.edges[id.0]
    }

    pub fn out_edge(&self, node: NodeId, port: usize) -> Option<EdgeId> {
        self.outgoing[node.0].get(port).copied().flatten()
    }

    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().position(|c| c.label == label).map(NodeId)
    }

    pub fn choices(&self) -> &[Choice] {
        &self.choices
    }

    /// Queues an insertion or removal of a switchable splitter at `at_time`.
    /// Whether it comes too late is only known once a trial runs.
    pub fn set_choice(&mut self, node: NodeId, insert_bs2: bool, at_time: f64) -> Result<()> {
        self.check_switchable(node)?;
        if !at_time.is_finite() {
            return Err(Error::InvalidConfig(format!("choice time {at_time} is not finite")));
        }
        self.choices.push(Choice { node, insert: insert_bs2, at_time });
        Ok(())
    }

    pub(crate) fn check_switchable(&self, node: NodeId) -> Result<()> {
        match self.nodes.get(node.0).map(|c| &c.kind) {
            Some(ComponentKind::Switchable { .. }) => Ok(()),
            _ => Err(Error::InvalidCircuit(format!("node {} is not a switchable splitter", node.0))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (id, c) in self.nodes() {
            match &c.kind {
                ComponentKind::BeamSplitter(bs) => bs.validate()?,
                ComponentKind::Switchable { splitter, .. } => splitter.validate()?,
                ComponentKind::PartialFoil { a, .. } | ComponentKind::Chopper { a } if !(0.0..=1.0).contains(a) => {
                    return Err(Error::InvalidCircuit(format!("{}: transmission {a} outside [0, 1]", c.label)));
                }
                ComponentKind::PhaseShifter { phi } if !phi.is_finite() => {
                    return Err(Error::InvalidCircuit(format!("{}: phase {phi} is not finite", c.label)));
                }
                _ => {}
            }
            if let Some(m) = c.kind.medium() {
                m.validate()?;
            }
            if let Some(port) = self.outgoing[id.0].iter().position(Option::is_none) {
                return Err(Error::InvalidCircuit(format!("{}: output port {port} is unconnected", c.label)));
            }
        }
        let sources: Vec<NodeId> = self
            .nodes()
            .filter(|(_, c)| matches!(c.kind, ComponentKind::Source { .. }))
            .map(|(id, _)| id)
            .collect();
        if sources.is_empty() {
            return Err(Error::InvalidCircuit("circuit has no source".into()));
        }

        let mut reached = vec![false; self.nodes.len()];
        let mut queue: VecDeque<NodeId> = sources.iter().copied().collect();
        for s in &sources {
            reached[s.0] = true;
        }
        while let Some(n) = queue.pop_front() {
            for e in self.outgoing[n.0].iter().flatten() {
                let to = self.edges[e.0].to;
                if !reached[to.0] {
                    reached[to.0] = true;
                    queue.push_back(to);
                }
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(Error::InvalidCircuit(format!("{} is not reachable from a source", self.nodes[i].label)));
        }
        self.check_acyclic()
    }

    /// Every output port is connected, so an acyclic graph terminates every path.
    fn check_acyclic(&self) -> Result<()> {
        let mut indegree: Vec<usize> = self.incoming.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..self.nodes.len()).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(n) = ready.pop() {
            seen += 1;
            for e in self.outgoing[n].iter().flatten() {
                let to = self.edges[e.0].to.0;
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    ready.push(to);
                }
            }
        }
        if seen == self.nodes.len() {
            Ok(())
        } else {
            Err(Error::InvalidCircuit("circuit contains a loop".into()))
        }
    }
}

/// Result of a splitter acting on one branch. Both parts keep the input's id;
/// the engine assigns the reflected part a fresh one.
#[derive(Debug, Clone, PartialEq)]
pub enum Split {
    Forwarded(Branch),
    Divided { transmitted: Branch, reflected: Branch },
}

pub fn split(branch: &Branch, bs: &BeamSplitter) -> Split {
    if bs.polarization_selective == Some(branch.polarization) {
        return Split::Forwarded(branch.clone());
    }
    let mut transmitted = branch.clone();
    transmitted.amplitude = branch.amplitude * bs.t.sqrt();
    let mut reflected = branch.clone();
    reflected.amplitude = branch.amplitude * Complex64::new(0.0, bs.r.sqrt());
    Split::Divided { transmitted, reflected }
}

/// Adds the amplitudes of two coherent branches into a copy of `b1`.
pub fn superpose(b1: &Branch, b2: &Branch, angle_threshold: f64) -> Result<Branch> {
    if !b1.alive || !b2.alive || b1.polarization != b2.polarization || phase_space_separated(b1, b2, angle_threshold) {
        return Err(Error::IncoherentMerge(b1.id.0, b2.id.0));
    }
    let mut out = b1.clone();
    out.amplitude = b1.amplitude + b2.amplitude;
    Ok(out)
}

pub fn apply_phase(branch: &Branch, phi: f64) -> Branch {
    let mut out = branch.clone();
    out.amplitude = branch.amplitude * Complex64::from_polar(1.0, phi);
    out
}

/// Splits a branch entering a partial absorber into the part that continues
/// (`√a`) and the part deflected out of the beam (`√(1-a)`).
pub fn partial_foil_split(branch: &Branch, a: f64) -> (Branch, Branch) {
    let mut transmitted = branch.clone();
    transmitted.amplitude = branch.amplitude * a.sqrt();
    let mut deflected = branch.clone();
    deflected.amplitude = branch.amplitude * (1.0 - a).sqrt();
    (transmitted, deflected)
}
