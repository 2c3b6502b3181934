//! Closed-form amplitude propagation with no reduction: the expected
//! distribution over terminals that ensemble statistics are checked against.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optics::{CircuitGraph, ComponentKind, EdgeId, NodeId};
use crate::wavepacket::Polarization;

/// Relative tolerance on arrival times for two amplitudes to superpose.
const COINCIDENCE: f64 = 1e-9;

/// An amplitude injected on a source edge at time 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub edge: EdgeId,
    pub amplitude: Complex64,
    pub polarization: Polarization,
}

/// Expected probability per terminal and polarization. Choppers are
/// mixtures: a closed chopper blocks the whole packet, and that share is
/// reported against the chopper node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TerminalWeights {
    pub weights: BTreeMap<(NodeId, Polarization), f64>,
}

impl TerminalWeights {
    pub fn at(&self, node: NodeId) -> f64 {
        self.weights.iter().filter(|((n, _), _)| *n == node).map(|(_, w)| w).sum()
    }

    pub fn at_polarized(&self, node: NodeId, polarization: Polarization) -> f64 {
        self.weights.get(&(node, polarization)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    fn add(&mut self, node: NodeId, polarization: Polarization, w: f64, scale: f64) {
        *self.weights.entry((node, polarization)).or_insert(0.0) += w * scale;
    }
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    edge: EdgeId,
    start: f64,
    polarization: Polarization,
    amplitude: Complex64,
}

pub fn classical_oracle(graph: &CircuitGraph, injections: &[Injection]) -> Result<TerminalWeights> {
    if !graph.choices().is_empty() {
        return Err(Error::UnsupportedTopology("the circuit is reconfigured mid-flight".into()));
    }
    graph.validate()?;
    let choppers: Vec<(NodeId, f64)> = graph
        .nodes()
        .filter_map(|(id, c)| match c.kind {
            ComponentKind::Chopper { a } => Some((id, a)),
            _ => None,
        })
        .collect();
    if choppers.len() > 16 {
        return Err(Error::UnsupportedTopology("too many choppers to enumerate".into()));
    }

    let mut out = TerminalWeights::default();
    for mask in 0u32..(1 << choppers.len()) {
        let mut share = 1.0;
        let mut closed = None;
        for (i, (id, a)) in choppers.iter().enumerate() {
            let is_open = mask & (1 << i) != 0;
            share *= if is_open { *a } else { 1.0 - *a };
            if !is_open && closed.is_none() {
                closed = Some(*id);
            }
        }
        if share == 0.0 {
            continue;
        }
        match closed {
            Some(node) => {
                let w: f64 = injections.iter().map(|i| i.amplitude.norm_sqr()).sum();
                out.add(node, Polarization::None, w, share);
            }
            None => propagate(graph, injections, share, &mut out)?,
        }
    }
    Ok(out)
}

fn push(pending: &mut Vec<Wave>, graph: &CircuitGraph, wave: Wave) {
    let tol = COINCIDENCE * wave.start.abs().max(graph.edge(wave.edge).transit_time());
    if let Some(w) = pending
        .iter_mut()
        .find(|w| w.edge == wave.edge && w.polarization == wave.polarization && (w.start - wave.start).abs() <= tol)
    {
        w.amplitude += wave.amplitude;
    } else {
        pending.push(wave);
    }
}

fn propagate(
    graph: &CircuitGraph,
    injections: &[Injection],
    share: f64,
    out: &mut TerminalWeights,
) -> Result<()> {
    let mut pending: Vec<Wave> = Vec::new();
    for inj in injections {
        push(
            &mut pending,
            graph,
            Wave { edge: inj.edge, start: 0.0, polarization: inj.polarization, amplitude: inj.amplitude },
        );
    }
    let out_edge = |node: NodeId, port: usize| {
        graph
            .out_edge(node, port)
            .ok_or_else(|| Error::InvalidCircuit(format!("{}: output {port} unconnected", graph.node(node).label)))
    };

    while !pending.is_empty() {
        // earliest arrival first; contributions to an edge always precede its arrival
        let (i, _) = pending
            .iter()
            .enumerate()
            .map(|(i, w)| (i, w.start + graph.edge(w.edge).transit_time()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        let wave = pending.swap_remove(i);
        let edge = graph.edge(wave.edge);
        let t = wave.start + edge.transit_time();
        let node = edge.to;
        let port = edge.to_port;
        let emit = |pending: &mut Vec<Wave>, e: EdgeId, start: f64, amplitude: Complex64| {
            push(pending, graph, Wave { edge: e, start, polarization: wave.polarization, amplitude });
        };
        match &graph.node(node).kind {
            ComponentKind::Source { .. } => {
                return Err(Error::InvalidCircuit("a source has an input edge".into()));
            }
            ComponentKind::BeamSplitter(bs) => {
                splitter(&mut pending, graph, &wave, node, port, bs.t, bs.r, bs.polarization_selective, t)?
            }
            ComponentKind::Switchable { splitter: bs, inserted } => {
                if *inserted {
                    splitter(&mut pending, graph, &wave, node, port, bs.t, bs.r, bs.polarization_selective, t)?
                } else {
                    emit(&mut pending, out_edge(node, port)?, t, wave.amplitude);
                }
            }
            ComponentKind::Mirror => emit(&mut pending, out_edge(node, 0)?, t, wave.amplitude),
            ComponentKind::PhaseShifter { phi } => {
                emit(&mut pending, out_edge(node, 0)?, t, wave.amplitude * Complex64::from_polar(1.0, *phi))
            }
            ComponentKind::Chopper { .. } => emit(&mut pending, out_edge(node, 0)?, t, wave.amplitude),
            ComponentKind::PartialFoil { a, medium } => {
                let exit = t + medium.thickness / edge.speed;
                emit(&mut pending, out_edge(node, 0)?, exit, wave.amplitude * a.sqrt());
                emit(&mut pending, out_edge(node, 1)?, exit, wave.amplitude * (1.0 - a).sqrt());
            }
            ComponentKind::ObjectAbsorber(_) | ComponentKind::Detector { .. } | ComponentKind::Sink => {
                out.add(node, wave.polarization, wave.amplitude.norm_sqr(), share);
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn splitter(
    pending: &mut Vec<Wave>,
    graph: &CircuitGraph,
    wave: &Wave,
    node: NodeId,
    port: usize,
    t: f64,
    r: f64,
    pass: Option<Polarization>,
    time: f64,
) -> Result<()> {
    let straight = graph.out_edge(node, port).ok_or_else(|| Error::InvalidCircuit("unconnected splitter".into()))?;
    let crossed = graph.out_edge(node, 1 - port).ok_or_else(|| Error::InvalidCircuit("unconnected splitter".into()))?;
    let mut emit = |e: EdgeId, amplitude: Complex64| {
        push(pending, graph, Wave { edge: e, start: time, polarization: wave.polarization, amplitude });
    };
    if pass == Some(wave.polarization) {
        emit(straight, wave.amplitude);
    } else {
        emit(straight, wave.amplitude * t.sqrt());
        emit(crossed, wave.amplitude * Complex64::new(0.0, r.sqrt()));
    }
    Ok(())
}
