//! One-quantum wavepackets: branches, the global phase constant, entangled
//! pairs and the longitudinal spreading estimate.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::EdgeId;
use crate::reduction::Cluster;

/// Default momentum-space separation threshold between branch directions.
pub const DEFAULT_ANGLE_THRESHOLD: f64 = 1e-3;

/// Normalization tolerance for every engine-visible state.
pub const NORM_TOLERANCE: f64 = 1e-12;

const RENORM_SKIP: f64 = 1e-14;

/// An angle kept in `[0, 2π)`; all arithmetic is modulo 2π.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseConstant(f64);

impl PhaseConstant {
    pub fn new(value: f64) -> Self {
        let v = value.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        PhaseConstant(if v >= TAU { 0.0 } else { v })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The value as a fraction of a full turn, in `[0, 1)`.
    pub fn fraction(self) -> f64 {
        self.0 / TAU
    }

    /// Shortest distance around the circle, in `[0, π]`.
    pub fn circular_distance(self, other: PhaseConstant) -> f64 {
        circular_distance(self.0, other.0)
    }
}

pub(crate) fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    None,
    H,
    V,
}

impl Polarization {
    pub fn label(self) -> &'static str {
        match self {
            Polarization::None => "none",
            Polarization::H => "H",
            Polarization::V => "V",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Massive,
    Photon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchId(pub u32);

/// A spatially or directionally distinct part of a packet.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub amplitude: Complex64,
    pub polarization: Polarization,
    pub edge: EdgeId,
    /// Position of the envelope centre along `edge`, in metres.
    pub longitudinal_offset: f64,
    /// Propagation direction in the lab plane, radians.
    pub direction: f64,
    /// Longitudinal support length σ_y, metres.
    pub packet_length: f64,
    pub alive: bool,
}

impl Branch {
    pub fn weight(&self) -> f64 {
        if self.alive {
            self.amplitude.norm_sqr()
        } else {
            0.0
        }
    }
}

/// True when two branches occupy disjoint regions of phase space: they move
/// in different directions, or their supports cannot overlap in space.
///
/// Distinct edges are distinct beam lines, so two branches on different
/// edges never share spatial support. On a common edge the longitudinal gap
/// is compared with the half-length sum.
pub fn phase_space_separated(b1: &Branch, b2: &Branch, angle_threshold: f64) -> bool {
    if circular_distance(b1.direction, b2.direction) > angle_threshold {
        return true;
    }
    if b1.edge != b2.edge {
        return true;
    }
    let gap = (b1.longitudinal_offset - b2.longitudinal_offset).abs();
    gap > 0.5 * (b1.packet_length + b2.packet_length)
}

/// A one-quantum wavepacket: coherent branches sharing one phase constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub alpha1: PhaseConstant,
    pub species: Species,
    pub branches: Vec<Branch>,
    pub reduced: bool,
    pub contraction_site: Option<Cluster>,
    /// Photons vanish on contraction; massive packets stay contracted at the site.
    pub absorbed: bool,
    next_id: u32,
}

impl Packet {
    pub fn new(alpha1: PhaseConstant, species: Species) -> Self {
        Packet {
            alpha1,
            species,
            branches: Vec::new(),
            reduced: false,
            contraction_site: None,
            absorbed: false,
            next_id: 0,
        }
    }

    /// Appends a live branch and returns its id. Ids are allocated in creation order.
    pub fn add_branch(
        &mut self,
        amplitude: Complex64,
        polarization: Polarization,
        edge: EdgeId,
        direction: f64,
        packet_length: f64,
    ) -> BranchId {
        let id = BranchId(self.next_id);
        self.next_id += 1;
        self.branches.push(Branch {
            id,
            amplitude,
            polarization,
            edge,
            longitudinal_offset: 0.0,
            direction,
            packet_length,
            alive: true,
        });
        id
    }

    pub fn branch(&self, id: BranchId) -> Option<&Branch> {
        // ids are dense and never reused, so they double as indices
        self.branches.get(id.0 as usize).filter(|b| b.id == id)
    }

    pub fn branch_mut(&mut self, id: BranchId) -> Option<&mut Branch> {
        self.branches.get_mut(id.0 as usize).filter(|b| b.id == id)
    }

    pub fn live(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.alive)
    }

    pub fn kill(&mut self, id: BranchId) {
        if let Some(b) = self.branch_mut(id) {
            b.alive = false;
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.live().map(|b| b.amplitude.norm_sqr()).sum()
    }

    /// Scales every live amplitude by the common real factor `1/√w`, returning it.
    pub fn renormalize(&mut self) -> Result<f64> {
        let w = self.total_weight();
        if !(w > 0.0) {
            return Err(Error::ZeroWeight);
        }
        // already normalized up to rounding: leave amplitudes bit-identical
        if (w - 1.0).abs() <= RENORM_SKIP {
            return Ok(1.0);
        }
        let f = w.sqrt().recip();
        for b in self.branches.iter_mut().filter(|b| b.alive) {
            b.amplitude *= f;
        }
        Ok(f)
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_weight() - 1.0).abs() <= NORM_TOLERANCE
    }
}

/// Which component of packet B accompanies each component of packet A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correlation {
    /// H↔H, V↔V.
    #[default]
    Parallel,
    /// H↔V, V↔H.
    Crossed,
}

impl Correlation {
    pub fn partner_of(self, p: Polarization) -> Polarization {
        match (self, p) {
            (_, Polarization::None) => Polarization::None,
            (Correlation::Parallel, p) => p,
            (Correlation::Crossed, Polarization::H) => Polarization::V,
            (Correlation::Crossed, Polarization::V) => Polarization::H,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntangledPair {
    pub packet_a: Packet,
    pub packet_b: Packet,
    pub correlation: Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadingParams {
    /// σ_cy, metres.
    pub coherence_length: f64,
    /// l, metres.
    pub flight_distance: f64,
    /// Δλ/λ.
    pub relative_bandwidth: f64,
    pub species: Species,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spreading {
    /// Δ_sy, metres.
    pub increase: f64,
    /// σ_y, metres.
    pub length: f64,
}

impl SpreadingParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.coherence_length >= 0.0
            && self.flight_distance >= 0.0
            && (0.0..1.0).contains(&self.relative_bandwidth);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("spreading parameters out of range: {self:?}")))
        }
    }
}

/// Total packet length after free flight. Massive packets grow by `l·Δλ/λ`;
/// photons do not spread longitudinally.
pub fn spread_length(params: &SpreadingParams) -> Spreading {
    let increase = match params.species {
        Species::Massive => params.flight_distance * params.relative_bandwidth,
        Species::Photon => 0.0,
    };
    Spreading {
        increase,
        length: params.coherence_length + increase,
    }
}
