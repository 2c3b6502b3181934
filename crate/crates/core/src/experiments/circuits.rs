//! Builders for the interferometers the scenarios run.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::Result;
use crate::optics::{BeamSplitter, CircuitGraph, ComponentKind, EdgeId, Medium, NodeId};
use crate::wavepacket::{Packet, PhaseConstant, Polarization, Species};

/// Geometry shared by the builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub arm_length: f64,
    pub detector_distance: f64,
    pub speed: f64,
    pub packet_length: f64,
}

/// A circuit plus the input edges its packets start on.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub graph: CircuitGraph,
    pub inputs: Vec<EdgeId>,
}

impl Circuit {
    pub fn node(&self, label: &str) -> NodeId {
        self.graph.find(label).unwrap_or_else(|| panic!("circuit has no node {label}"))
    }

    /// A unit-weight packet on input `input` with a single branch.
    pub fn packet(&self, input: usize, alpha1: f64, species: Species, packet_length: f64) -> Packet {
        let mut p = Packet::new(PhaseConstant::new(alpha1), species);
        let edge = self.inputs[input];
        p.add_branch(Complex64::ONE, Polarization::None, edge, self.graph.edge(edge).direction, packet_length);
        p
    }

    /// Equal H and V components on input `input`.
    pub fn polarized_packet(&self, input: usize, alpha1: f64, packet_length: f64) -> Packet {
        let mut p = Packet::new(PhaseConstant::new(alpha1), Species::Photon);
        let edge = self.inputs[input];
        for pol in [Polarization::H, Polarization::V] {
            p.add_branch(Complex64::new(FRAC_1_SQRT_2, 0.0), pol, edge, 0.0, packet_length);
        }
        p
    }
}

fn detector() -> ComponentKind {
    ComponentKind::Detector { medium: Medium::complete_absorber(), polarizing: false }
}

fn polarizing_detector() -> ComponentKind {
    ComponentKind::Detector { medium: Medium::complete_absorber(), polarizing: true }
}

/// Source, one 50:50 splitter, detectors D1 and D2 at equal distances.
pub fn fig1a(g: Geometry) -> Result<Circuit> {
    let mut c = CircuitGraph::new();
    let s = c.add("S", ComponentKind::Source { outputs: 1 });
    let bs = c.add("BS", ComponentKind::BeamSplitter(BeamSplitter::balanced()));
    let d1 = c.add("D1", detector());
    let d2 = c.add("D2", detector());
    let input = c.connect((s, 0), (bs, 0), g.detector_distance, g.speed)?;
    c.connect((bs, 0), (d1, 0), g.detector_distance, g.speed)?;
    c.connect((bs, 1), (d2, 0), g.detector_distance, g.speed)?;
    c.validate()?;
    Ok(Circuit { graph: c, inputs: vec![input] })
}

/// AD1 is an absorbing detector with an enhanced cluster density close to
/// the splitter; D2 sits `far` metres away.
pub fn fig1b(g: Geometry, near: f64, far: f64) -> Result<Circuit> {
    let mut c = CircuitGraph::new();
    let s = c.add("S", ComponentKind::Source { outputs: 1 });
    let bs = c.add("BS", ComponentKind::BeamSplitter(BeamSplitter::balanced()));
    let ad1 = c.add("AD1", ComponentKind::Detector { medium: Medium::enhanced_absorber(), polarizing: false });
    let d2 = c.add("D2", detector());
    let input = c.connect((s, 0), (bs, 0), g.detector_distance, g.speed)?;
    c.connect((bs, 0), (ad1, 0), near, g.speed)?;
    c.connect((bs, 1), (d2, 0), far, g.speed)?;
    c.validate()?;
    Ok(Circuit { graph: c, inputs: vec![input] })
}

/// BS1 (transmission `t`) sends the transmitted part along arm b and the
/// reflected part along arm a, where the object O may sit. BS2 (transmission
/// `t2`) recombines them: D1 at output 0, D2 at output 1.
pub fn elitzur_vaidman(g: Geometry, t: f64, t2: f64, object_present: bool) -> Result<Circuit> {
    let mut c = CircuitGraph::new();
    let s = c.add("S", ComponentKind::Source { outputs: 1 });
    let bs1 = c.add("BS1", ComponentKind::BeamSplitter(BeamSplitter::new(t)));
    let bs2 = c.add("BS2", ComponentKind::BeamSplitter(BeamSplitter::new(t2)));
    let d1 = c.add("D1", detector());
    let d2 = c.add("D2", detector());
    let half = 0.5 * g.arm_length;
    let input = c.connect((s, 0), (bs1, 0), g.detector_distance, g.speed)?;
    let mb = c.add("Mb", ComponentKind::Mirror);
    if object_present {
        // O blocks arm a; BS2's port 0 stays dark
        let o = c.add("O", ComponentKind::ObjectAbsorber(Medium::complete_absorber()));
        c.connect((bs1, 1), (o, 0), half, g.speed)?;
    } else {
        let ma = c.add("Ma", ComponentKind::Mirror);
        c.connect((bs1, 1), (ma, 0), half, g.speed)?;
        c.connect((ma, 0), (bs2, 0), half, g.speed)?;
    }
    c.connect((bs1, 0), (mb, 0), half, g.speed)?;
    c.connect((mb, 0), (bs2, 1), half, g.speed)?;
    c.connect((bs2, 0), (d1, 0), g.detector_distance, g.speed)?;
    c.connect((bs2, 1), (d2, 0), g.detector_distance, g.speed)?;
    c.validate()?;
    Ok(Circuit { graph: c, inputs: vec![input] })
}

/// The asymmetric splitter BS2 (transmission `t`) comes first: its reflected
/// output runs into the complete absorber A. The transmitted part is split
/// 50:50, one arm phase shifted by `phi`, and recombined at BS3 in front of D.
pub fn visibility(g: Geometry, t: f64, phi: f64) -> Result<Circuit> {
    let mut c = CircuitGraph::new();
    let s = c.add("S", ComponentKind::Source { outputs: 1 });
    let bs2 = c.add("BS2", ComponentKind::BeamSplitter(BeamSplitter::new(t)));
    let a = c.add("A", ComponentKind::ObjectAbsorber(Medium::complete_absorber()));
    let bsa = c.add("BSa", ComponentKind::BeamSplitter(BeamSplitter::balanced()));
    let ps = c.add("P", ComponentKind::PhaseShifter { phi });
    let m = c.add("M", ComponentKind::Mirror);
    let bs3 = c.add("BS3", ComponentKind::BeamSplitter(BeamSplitter::balanced()));
    let d = c.add("D", detector());
    let dump = c.add("K", ComponentKind::Sink);
    let half = 0.5 * g.arm_length;
    let input = c.connect((s, 0), (bs2, 0), g.detector_distance, g.speed)?;
    c.connect((bs2, 1), (a, 0), g.detector_distance, g.speed)?;
    c.connect((bs2, 0), (bsa, 0), g.detector_distance, g.speed)?;
    c.connect((bsa, 0), (ps, 0), half, g.speed)?;
    c.connect((ps, 0), (bs3, 0), half, g.speed)?;
    c.connect((bsa, 1), (m, 0), half, g.speed)?;
    c.connect((m, 0), (bs3, 1), half, g.speed)?;
    c.connect((bs3, 1), (d, 0), g.detector_distance, g.speed)?;
    c.connect((bs3, 0), (dump, 0), g.detector_distance, g.speed)?;
    c.validate()?;
    Ok(Circuit { graph: c, inputs: vec![input] })
}

/// Balanced interferometer whose BS2 is switchable. Arm a (reflected at
/// BS1) enters BS2 at port 0, arm b at port 1; D1 at output 0.
pub fn delayed_choice(g: Geometry, inserted: bool) -> Result<Circuit> {
    let mut c = CircuitGraph::new();
    let s = c.add("S", ComponentKind::Source { outputs: 1 });
    let bs1 = c.add("BS1", ComponentKind::BeamSplitter(BeamSplitter::balanced()));
    let bs2 = c.add("BS2", ComponentKind::Switchable { splitter: BeamSplitter::balanced(), inserted });
    let ma = c.add("Ma", ComponentKind::Mirror);
    let mb = c.add("Mb", ComponentKind::Mirror);
    let d1 = c.add("D1", detector());
    let d2 = c.add("D2", detector());
    let half = 0.5 * g.arm_length;
    let input = c.connect((s, 0), (bs1, 0), g.detector_distance, g.speed)?;
    c.connect((bs1, 1), (ma, 0), half, g.speed)?;
    c.connect((ma, 0), (bs2, 0), half, g.speed)?;
    c.connect((bs1, 0), (mb, 0), half, g.speed)?;
    c.connect((mb, 0), (bs2, 1), half, g.speed)?;
    c.connect((bs2, 0), (d1, 0), g.detector_distance, g.speed)?;
    c.connect((bs2, 1), (d2, 0), g.detector_distance, g.speed)?;
    c.validate()?;
    Ok(Circuit { graph: c, inputs: vec![input] })
}

/// Time at which the packet front passes BS1 and reaches BS2 in [`delayed_choice`].
pub fn delayed_choice_times(g: Geometry) -> (f64, f64) {
    let bs1 = g.detector_distance / g.speed;
    (bs1, bs1 + g.arm_length / g.speed)
}

/// Adds one wing of the entangled experiment: BS1, a phase shifter on arm a,
/// and a BS2 that splits V but passes H, with polarizing detectors
/// `{prefix}D1` and `{prefix}D2` at `distance`.
fn wing(c: &mut CircuitGraph, prefix: &str, g: Geometry, phi: f64, distance: f64) -> Result<EdgeId> {
    let s = c.add(&format!("{prefix}S"), ComponentKind::Source { outputs: 1 });
    let bs1 = c.add(&format!("{prefix}BS1"), ComponentKind::BeamSplitter(BeamSplitter::balanced()));
    let bs2 = c.add(
        &format!("{prefix}BS2"),
        ComponentKind::BeamSplitter(BeamSplitter::balanced().passing(Polarization::H)),
    );
    let ps = c.add(&format!("{prefix}P"), ComponentKind::PhaseShifter { phi });
    let mb = c.add(&format!("{prefix}Mb"), ComponentKind::Mirror);
    let d1 = c.add(&format!("{prefix}D1"), polarizing_detector());
    let d2 = c.add(&format!("{prefix}D2"), polarizing_detector());
    let half = 0.5 * g.arm_length;
    let input = c.connect((s, 0), (bs1, 0), g.detector_distance, g.speed)?;
    c.connect((bs1, 1), (ps, 0), half, g.speed)?;
    c.connect((ps, 0), (bs2, 0), half, g.speed)?;
    c.connect((bs1, 0), (mb, 0), half, g.speed)?;
    c.connect((mb, 0), (bs2, 1), half, g.speed)?;
    c.connect((bs2, 0), (d1, 0), distance, g.speed)?;
    c.connect((bs2, 1), (d2, 0), distance, g.speed)?;
    Ok(input)
}

/// Alice's wing (prefix `A`, phase 0) and Bob's (prefix `B`, phase `phi`).
pub fn entangled(g: Geometry, phi: f64, alice_distance: f64, bob_distance: f64) -> Result<Circuit> {
    let mut c = CircuitGraph::new();
    let a = wing(&mut c, "A", g, 0.0, alice_distance)?;
    let b = wing(&mut c, "B", g, phi, bob_distance)?;
    c.validate()?;
    Ok(Circuit { graph: c, inputs: vec![a, b] })
}

/// Absorbing element in arm L of the two-arm interferometer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmAbsorber {
    Foil { a: f64, medium: Medium },
    Chopper { a: f64 },
}

/// Two-arm interferometer: arm L (transmitted at BS1) holds the absorber,
/// arm R (reflected) the phase shifter. The foil's deflected part runs into
/// the sink `K`. Arm R is lengthened by the foil thickness so both arms
/// arrive at BS2 together. D at BS2 output 1, D' at output 0.
pub fn partial_absorption(g: Geometry, absorber: ArmAbsorber, phi: f64) -> Result<Circuit> {
    let mut c = CircuitGraph::new();
    let s = c.add("S", ComponentKind::Source { outputs: 1 });
    let bs1 = c.add("BS1", ComponentKind::BeamSplitter(BeamSplitter::balanced()));
    let bs2 = c.add("BS2", ComponentKind::BeamSplitter(BeamSplitter::balanced()));
    let ps = c.add("P", ComponentKind::PhaseShifter { phi });
    let d = c.add("D", detector());
    let dp = c.add("D'", detector());
    let half = 0.5 * g.arm_length;
    let input = c.connect((s, 0), (bs1, 0), g.detector_distance, g.speed)?;
    let delay = match absorber {
        ArmAbsorber::Foil { a, medium } => {
            let foil = c.add("F", ComponentKind::PartialFoil { a, medium });
            let dump = c.add("K", ComponentKind::Sink);
            c.connect((bs1, 0), (foil, 0), half, g.speed)?;
            c.connect((foil, 0), (bs2, 0), half, g.speed)?;
            c.connect((foil, 1), (dump, 0), half, g.speed)?;
            medium.thickness
        }
        ArmAbsorber::Chopper { a } => {
            let ch = c.add("C", ComponentKind::Chopper { a });
            c.connect((bs1, 0), (ch, 0), half, g.speed)?;
            c.connect((ch, 0), (bs2, 0), half, g.speed)?;
            0.0
        }
    };
    c.connect((bs1, 1), (ps, 0), half, g.speed)?;
    c.connect((ps, 0), (bs2, 1), half + delay, g.speed)?;
    c.connect((bs2, 1), (d, 0), g.detector_distance, g.speed)?;
    c.connect((bs2, 0), (dp, 0), g.detector_distance, g.speed)?;
    c.validate()?;
    Ok(Circuit { graph: c, inputs: vec![input] })
}

/// `pixels` complete-absorber pixels `X0..`, each fed directly by the source.
pub fn screen(g: Geometry, pixels: usize) -> Result<Circuit> {
    let mut c = CircuitGraph::new();
    let s = c.add("S", ComponentKind::Source { outputs: pixels });
    let mut inputs = Vec::with_capacity(pixels);
    for k in 0..pixels {
        let x = c.add(&format!("X{k}"), detector());
        let e = c.connect((s, k), (x, 0), g.detector_distance, g.speed)?;
        // the branches fan out from the source
        c.edge_mut(e).direction = 0.01 * k as f64;
        inputs.push(e);
    }
    c.validate()?;
    Ok(Circuit { graph: c, inputs })
}

/// A packet spread over the screen's inputs with amplitudes `√profile[k]`.
pub fn screen_packet(circuit: &Circuit, profile: &[f64], alpha1: f64, packet_length: f64) -> Packet {
    let mut p = Packet::new(PhaseConstant::new(alpha1), Species::Photon);
    for (k, w) in profile.iter().enumerate() {
        let edge = circuit.inputs[k];
        p.add_branch(Complex64::new(w.sqrt(), 0.0), Polarization::None, edge, circuit.graph.edge(edge).direction, packet_length);
    }
    p
}
