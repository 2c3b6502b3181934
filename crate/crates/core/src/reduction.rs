//! The contraction criterion and the complement rule.
//!
//! A branch that meets a cluster whose phase constant matches the packet's
//! (within half the fine-structure constant) either contracts the whole
//! packet onto that cluster, when its overlap reaches the cluster's
//! threshold `α2/2π`, or vanishes in favour of its phase-space separated
//! siblings, which are raised back to unit norm.
//!
//! Encounters with matching clusters are a thinned Poisson process along
//! the branch's path, so only the first matching cluster is sampled.
//!
//! When a branch vanishes, the packet's phase constant is carried onto the
//! surviving weight: with threshold `θ = α2/2π` and declined overlap `w`,
//! the new constant is `2π·(θ − w)/(1 − w)`. It stays a deterministic
//! function of the original α1, and a sequence of declines then contracts
//! in branch `j` exactly when the cumulative weight first passes α1/2π.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::NodeId;
use crate::stats::SeededStream;
use crate::wavepacket::{
    phase_space_separated, BranchId, EntangledPair, Packet, PhaseConstant, Polarization, Species,
};

/// Sommerfeld's fine-structure constant.
pub const FINE_STRUCTURE: f64 = 1.0 / 137.035_999;

pub const DEFAULT_SATURATION_DEPTH: f64 = 1e-4;

/// Clusters per metre in detectors and complete absorbers.
pub const DEFAULT_ABSORBER_DENSITY: f64 = 1e7;

/// Nominal cluster volume. Reported, never used by the overlap model.
pub const DEFAULT_CLUSTER_VOLUME: f64 = 1e-27;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub alpha2: PhaseConstant,
    pub volume: f64,
    pub medium: NodeId,
    /// Depth into the medium, metres.
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionParams {
    pub alpha_s: f64,
    pub match_probability: f64,
    pub cluster_line_density: f64,
    pub overlap_saturation_depth: f64,
}

impl Default for CriterionParams {
    fn default() -> Self {
        CriterionParams::new(DEFAULT_ABSORBER_DENSITY, DEFAULT_SATURATION_DEPTH)
    }
}

impl CriterionParams {
    pub fn new(cluster_line_density: f64, overlap_saturation_depth: f64) -> Self {
        CriterionParams {
            alpha_s: FINE_STRUCTURE,
            match_probability: FINE_STRUCTURE / TAU,
            cluster_line_density,
            overlap_saturation_depth,
        }
    }

    pub fn with_density(self, cluster_line_density: f64) -> Self {
        CriterionParams { cluster_line_density, ..self }
    }

    /// Rate per metre of phase-matching clusters along a path.
    pub fn match_rate(&self) -> f64 {
        self.cluster_line_density * self.match_probability
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cluster_line_density >= 0.0) || !(self.overlap_saturation_depth > 0.0) {
            return Err(Error::InvalidConfig(format!("criterion parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReductionOutcome {
    Contracted(Cluster),
    BranchVanished(BranchId),
    NoEvent,
}

/// Phase-matching condition: circular distance of the constants within `α_s/2`.
pub fn phase_match(alpha1: PhaseConstant, alpha2: PhaseConstant, alpha_s: f64) -> bool {
    alpha1.circular_distance(alpha2) <= 0.5 * alpha_s
}

/// Accumulated intensity over the cluster: a linear ramp that saturates at
/// the branch weight once the envelope has advanced `overlap_saturation_depth`.
pub fn overlap(branch: &crate::wavepacket::Branch, penetration: f64, params: &CriterionParams) -> f64 {
    let ramp = (penetration.max(0.0) / params.overlap_saturation_depth).min(1.0);
    branch.weight() * ramp
}

pub fn overlap_condition(overlap_value: f64, alpha2: PhaseConstant) -> bool {
    overlap_value >= alpha2.fraction()
}

/// Depth of the first phase-matching cluster within `path_length`, if any,
/// with its `α2` drawn uniformly from the matching window around `alpha1`.
pub fn sample_first_match(
    rng: &mut SeededStream,
    path_length: f64,
    alpha1: PhaseConstant,
    params: &CriterionParams,
    medium: NodeId,
) -> Option<(f64, Cluster)> {
    if !(path_length > 0.0) {
        return None;
    }
    let rate = params.match_rate();
    if !(rate > 0.0) {
        return None;
    }
    let depth = rng.exponential(rate);
    if depth > path_length {
        return None;
    }
    let jitter = (rng.uniform() - 0.5) * params.alpha_s;
    let cluster = Cluster {
        alpha2: PhaseConstant::new(alpha1.value() + jitter),
        volume: DEFAULT_CLUSTER_VOLUME,
        medium,
        position: depth,
    };
    Some((depth, cluster))
}

/// Decides what a phase-matching encounter does to the packet.
pub fn apply_reduction(
    packet: &mut Packet,
    branch: BranchId,
    cluster: Cluster,
    penetration: f64,
    params: &CriterionParams,
    angle_threshold: f64,
) -> Result<ReductionOutcome> {
    if packet.reduced {
        return Err(Error::AlreadyReduced);
    }
    let Some(b) = packet.branch(branch).filter(|b| b.alive) else {
        return Ok(ReductionOutcome::NoEvent);
    };
    if !phase_match(packet.alpha1, cluster.alpha2, params.alpha_s) {
        return Ok(ReductionOutcome::NoEvent);
    }

    let ov = overlap(b, penetration, params);
    if overlap_condition(ov, cluster.alpha2) {
        for other in packet.branches.iter_mut() {
            if other.id != branch {
                other.alive = false;
            }
        }
        packet.renormalize()?;
        packet.reduced = true;
        packet.contraction_site = Some(cluster);
        packet.absorbed = packet.species == Species::Photon;
        return Ok(ReductionOutcome::Contracted(cluster));
    }

    let separated = packet
        .live()
        .any(|o| o.id != branch && phase_space_separated(b, o, angle_threshold));
    if !separated {
        return Ok(ReductionOutcome::NoEvent);
    }

    // ov < θ < 1 here, so the carried threshold lies in (0, 1)
    let theta = cluster.alpha2.fraction();
    let carried = (theta - ov) / (1.0 - ov);
    packet.alpha1 = PhaseConstant::new(TAU * carried);
    packet.kill(branch);
    packet.renormalize()?;
    Ok(ReductionOutcome::BranchVanished(branch))
}

/// Kills every live branch not carrying `component` and renormalizes the rest.
/// The packet is not marked reduced; its surviving component propagates on.
pub fn restrict_to_component(packet: &mut Packet, component: Polarization) -> Result<f64> {
    for b in packet.branches.iter_mut() {
        if b.polarization != component {
            b.alive = false;
        }
    }
    packet.renormalize()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSide {
    A,
    B,
}

/// Side `reduced` was just reduced to `component`; reduce its partner to the
/// correlated component.
pub fn reduce_partner(pair: &mut EntangledPair, reduced: PairSide, component: Polarization) -> Result<f64> {
    match reduced {
        PairSide::A => {
            let target = pair.correlation.partner_of(component);
            restrict_to_component(&mut pair.packet_b, target)
        }
        PairSide::B => {
            // the map is an involution for both supported correlations
            let target = pair.correlation.partner_of(component);
            restrict_to_component(&mut pair.packet_a, target)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::EdgeId;
    use crate::stats::derive_stream;
    use crate::wavepacket::{Correlation, DEFAULT_ANGLE_THRESHOLD};
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    const THR: f64 = DEFAULT_ANGLE_THRESHOLD;

    fn cluster(alpha2: f64) -> Cluster {
        Cluster {
            alpha2: PhaseConstant::new(alpha2),
            volume: DEFAULT_CLUSTER_VOLUME,
            medium: NodeId(0),
            position: 0.0,
        }
    }

    /// Packet with phase constant `alpha1` and branches of the given weights on distinct edges.
    fn packet(alpha1: f64, weights: &[f64], species: Species) -> Packet {
        let mut p = Packet::new(PhaseConstant::new(alpha1), species);
        for (i, w) in weights.iter().enumerate() {
            p.add_branch(Complex64::new(w.sqrt(), 0.0), Polarization::None, EdgeId(i), i as f64, 1e-5);
        }
        p
    }

    #[test]
    fn fine_structure_value() {
        let p = CriterionParams::default();
        assert!((p.alpha_s - 1.0 / 137.035_999).abs() < 1e-6);
        assert_eq!(p.match_probability, p.alpha_s / TAU);
    }

    #[test]
    fn phase_match_examples() {
        let a = PhaseConstant::new(1.0);
        assert!(phase_match(a, a, FINE_STRUCTURE));
        // α_s/2 ≈ 0.003649 < 0.004
        assert!(!phase_match(a, PhaseConstant::new(1.004), FINE_STRUCTURE));
        // wraps: circular distance 0.002
        assert!(phase_match(PhaseConstant::new(0.001), PhaseConstant::new(TAU - 0.001), FINE_STRUCTURE));
    }

    #[test]
    fn phase_match_brute_force_agreement() {
        let mut s = derive_stream(11, "phase-pairs", 0);
        for _ in 0..10_000 {
            // concentrate pairs near the window edge, and near the branch cut
            let a = s.angle();
            let b = if s.bernoulli(0.5) { a + (s.uniform() - 0.5) * 0.02 } else { s.uniform() * 40.0 - 20.0 };
            let brute = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]
                .iter()
                .map(|k| (a - b + k * TAU).abs())
                .fold(f64::INFINITY, f64::min)
                .min(
                    (-4..=4)
                        .map(|k| (a - b.rem_euclid(TAU) + f64::from(k) * TAU).abs())
                        .fold(f64::INFINITY, f64::min),
                );
            let expected = brute <= 0.5 * FINE_STRUCTURE;
            assert_eq!(phase_match(PhaseConstant::new(a), PhaseConstant::new(b), FINE_STRUCTURE), expected, "{a} {b}");
        }
    }

    #[test]
    fn overlap_ramp() {
        let params = CriterionParams::default();
        let sat = params.overlap_saturation_depth;
        let p = packet(0.0, &[0.5, 1.0, 0.25], Species::Photon);
        assert!((overlap(&p.branches[0], 2.0 * sat, &params) - 0.5).abs() < 1e-15);
        assert_eq!(overlap(&p.branches[1], 0.0, &params), 0.0);
        // closed-form ramp: w · d / d_sat
        let half = overlap(&p.branches[2], 0.5 * sat, &params);
        assert!((half - 0.25 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn overlap_condition_examples() {
        assert!(overlap_condition(0.6, PhaseConstant::new(PI)));
        assert!(!overlap_condition(0.4, PhaseConstant::new(PI)));
        assert!(overlap_condition(1.0, PhaseConstant::new(TAU - 1e-9)));
    }

    #[test]
    fn first_match_empty_medium() {
        let mut s = derive_stream(1, "m", 0);
        let params = CriterionParams::default();
        assert!(sample_first_match(&mut s, 0.0, PhaseConstant::new(1.0), &params, NodeId(0)).is_none());
    }

    #[test]
    fn first_match_dense_limit() {
        let mut s = derive_stream(1, "m", 0);
        let params = CriterionParams::default().with_density(1e15);
        let hits = (0..1000)
            .filter(|_| sample_first_match(&mut s, 1e-3, PhaseConstant::new(1.0), &params, NodeId(0)).is_some())
            .count();
        assert_eq!(hits, 1000);
        let infinite = CriterionParams::default().with_density(f64::INFINITY);
        assert!(sample_first_match(&mut s, 1e-9, PhaseConstant::new(1.0), &infinite, NodeId(0)).is_some());
    }

    #[test]
    fn first_match_exponential_cdf() {
        let length = 0.01;
        let mut params = CriterionParams::default();
        params.cluster_line_density = 1.0 / (length * params.match_probability);
        let mut s = derive_stream(3, "cdf", 0);
        let n = 1_000_000;
        let alpha1 = PhaseConstant::new(2.0);
        let mut hits = 0;
        for _ in 0..n {
            if let Some((d, c)) = sample_first_match(&mut s, length, alpha1, &params, NodeId(4)) {
                hits += 1;
                assert!(d <= length);
                assert!(phase_match(alpha1, c.alpha2, params.alpha_s));
                assert_eq!(c.medium, NodeId(4));
            }
        }
        let freq = hits as f64 / n as f64;
        let expected = 1.0 - (-1.0f64).exp();
        assert!((freq - expected).abs() < 0.002, "{freq} vs {expected}");
    }

    #[test]
    fn object_contracts_when_threshold_low() {
        let params = CriterionParams::default();
        let alpha = 0.3 * TAU;
        let mut p = packet(alpha, &[0.5, 0.5], Species::Photon);
        let out = apply_reduction(&mut p, BranchId(0), cluster(alpha), 1.0, &params, THR).unwrap();
        assert!(matches!(out, ReductionOutcome::Contracted(_)));
        assert!(p.reduced && p.absorbed);
        assert!(!p.branches[1].alive);
        assert!(p.is_normalized());
        assert_eq!(p.contraction_site.unwrap().alpha2, PhaseConstant::new(alpha));
    }

    #[test]
    fn object_declines_and_sibling_takes_over() {
        let params = CriterionParams::default();
        let alpha = 0.7 * TAU;
        let mut p = packet(alpha, &[0.5, 0.5], Species::Photon);
        let out = apply_reduction(&mut p, BranchId(0), cluster(alpha), 1.0, &params, THR).unwrap();
        assert_eq!(out, ReductionOutcome::BranchVanished(BranchId(0)));
        assert!(!p.reduced);
        assert!((p.branches[1].weight() - 1.0).abs() < 1e-12);
        assert!(p.is_normalized());
        // (0.7 - 0.5) / 0.5
        assert!((p.alpha1.fraction() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn lone_branch_without_contact_is_no_event() {
        let params = CriterionParams::default();
        let alpha = 0.5 * TAU;
        let mut p = packet(alpha, &[1.0], Species::Massive);
        let shallow = 0.1 * params.overlap_saturation_depth;
        let out = apply_reduction(&mut p, BranchId(0), cluster(alpha), shallow, &params, THR).unwrap();
        assert_eq!(out, ReductionOutcome::NoEvent);
        assert!(p.branches[0].alive && !p.reduced);
        // repeated contact deeper in the medium can still contract
        let deep = params.overlap_saturation_depth;
        let out = apply_reduction(&mut p, BranchId(0), cluster(alpha), deep, &params, THR).unwrap();
        assert!(matches!(out, ReductionOutcome::Contracted(_)));
        assert!(!p.absorbed, "massive packets stay contracted at the site");
    }

    #[test]
    fn unmatched_cluster_is_no_event() {
        let params = CriterionParams::default();
        let mut p = packet(1.0, &[0.5, 0.5], Species::Photon);
        let out = apply_reduction(&mut p, BranchId(0), cluster(1.5), 1.0, &params, THR).unwrap();
        assert_eq!(out, ReductionOutcome::NoEvent);
    }

    #[test]
    fn second_contraction_is_rejected() {
        let params = CriterionParams::default();
        let mut p = packet(0.1, &[0.5, 0.5], Species::Photon);
        apply_reduction(&mut p, BranchId(0), cluster(0.1), 1.0, &params, THR).unwrap();
        assert_eq!(
            apply_reduction(&mut p, BranchId(0), cluster(0.1), 1.0, &params, THR),
            Err(Error::AlreadyReduced)
        );
    }

    fn polarized(weights: &[(Polarization, f64)]) -> Packet {
        let mut p = Packet::new(PhaseConstant::new(0.0), Species::Photon);
        for (i, (pol, w)) in weights.iter().enumerate() {
            p.add_branch(Complex64::new(w.sqrt(), 0.0), *pol, EdgeId(i), 0.0, 1e-5);
        }
        p
    }

    #[test]
    fn partner_reduced_to_vertical() {
        use Polarization::{H, V};
        let mut pair = EntangledPair {
            packet_a: polarized(&[(H, 0.5), (V, 0.5)]),
            packet_b: polarized(&[(H, 0.25), (H, 0.25), (V, 0.25), (V, 0.25)]),
            correlation: Correlation::Parallel,
        };
        reduce_partner(&mut pair, PairSide::A, V).unwrap();
        let b = &pair.packet_b;
        assert!(b.live().all(|x| x.polarization == V));
        assert_eq!(b.live().count(), 2);
        assert!(b.is_normalized());
        assert!(!b.reduced);

        let f = reduce_partner(&mut pair, PairSide::A, V).unwrap();
        assert_eq!(f, 1.0);

        let mut pair = EntangledPair {
            packet_a: polarized(&[(H, 0.5), (V, 0.5)]),
            packet_b: polarized(&[(H, 0.5), (V, 0.5)]),
            correlation: Correlation::Parallel,
        };
        reduce_partner(&mut pair, PairSide::B, H).unwrap();
        assert!(pair.packet_a.live().all(|x| x.polarization == H));
    }

    /// Two branches of weights (p, 1-p) entering identical complete absorbers at the same time.
    fn born_pair_trial(p: f64, trial: u64) -> usize {
        let params = CriterionParams::default();
        let mut alpha = derive_stream(2024, "alpha1", trial);
        let mut packet = packet(alpha.angle(), &[p, 1.0 - p], Species::Photon);
        let enc = derive_stream(2024, "encounter", trial);
        let mut firsts: Vec<(f64, usize, SeededStream)> = (0..2)
            .map(|i| {
                let mut s = enc.substream(i as u64);
                (s.exponential(params.match_rate()), i, s)
            })
            .collect();
        firsts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, i, mut s) in firsts {
            if !packet.branches[i].alive {
                continue;
            }
            let jitter = (s.uniform() - 0.5) * params.alpha_s;
            let c = cluster(packet.alpha1.value() + jitter);
            match apply_reduction(&mut packet, BranchId(i as u32), c, 1.0, &params, THR).unwrap() {
                ReductionOutcome::Contracted(_) => return i,
                ReductionOutcome::BranchVanished(_) => assert!(packet.is_normalized()),
                ReductionOutcome::NoEvent => unreachable!("sibling is always separated"),
            }
        }
        unreachable!("the last surviving branch has weight 1 and always contracts")
    }

    #[test]
    fn born_rule_emerges_for_two_absorbers() {
        let n = 100_000u64;
        for &p in &[0.1, 0.3, 0.5] {
            let first = (0..n).filter(|&t| born_pair_trial(p, t) == 0).count() as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = first / n as f64;
            assert!((freq - p).abs() < 3.0 * sigma, "p={p} freq={freq} sigma={sigma}");
        }
    }

    proptest::proptest! {
        #[test]
        fn overlap_threshold_monotone(w in 0.0f64..1.0, a2 in 0.0f64..TAU, d in 0.0f64..2e-4, extra in 0.0f64..1e-3) {
            let params = CriterionParams::default();
            let p = packet(0.0, &[w], Species::Photon);
            let alpha2 = PhaseConstant::new(a2);
            if overlap_condition(overlap(&p.branches[0], d, &params), alpha2) {
                proptest::prop_assert!(overlap_condition(overlap(&p.branches[0], d + extra, &params), alpha2));
            }
        }

        #[test]
        fn vanishing_conserves_norm(ws in proptest::collection::vec(0.05f64..1.0, 2..6), theta in 0.0f64..1.0) {
            let total: f64 = ws.iter().sum();
            let norm: Vec<f64> = ws.iter().map(|w| w / total).collect();
            let alpha = theta * TAU;
            let mut p = packet(alpha, &norm, Species::Photon);
            p.renormalize().unwrap();
            let params = CriterionParams::default();
            match apply_reduction(&mut p, BranchId(0), cluster(alpha), 1.0, &params, THR).unwrap() {
                ReductionOutcome::Contracted(_) => {
                    proptest::prop_assert!(p.reduced);
                    proptest::prop_assert_eq!(p.live().count(), 1);
                }
                ReductionOutcome::BranchVanished(_) => {
                    proptest::prop_assert!(!p.branches[0].alive);
                    proptest::prop_assert!((0.0..TAU).contains(&p.alpha1.value()));
                }
                ReductionOutcome::NoEvent => proptest::prop_assert!(false),
            }
            proptest::prop_assert!((p.total_weight() - 1.0).abs() <= 1e-12);
            let _ = FRAC_1_SQRT_2;
        }
    }
}
