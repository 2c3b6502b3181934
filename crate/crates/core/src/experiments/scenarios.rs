//! Scenario runners. Each trial draws its packet's phase constant from a
//! stream labelled `{scenario}/{point}/alpha1` and drives the engine with
//! `{scenario}/{point}/engine`, both indexed by the trial number.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::circuits::{self, ArmAbsorber, Circuit};
use super::oracle::{classical_oracle, Injection};
use super::{tally, ChoicePolicy, EnsembleStats, Order, ScenarioConfig, VisibilityMode};
use crate::error::{Error, Result};
use crate::optics::{
    run_trial, run_trial_with, Choice, CircuitGraph, EncounterKind, Emission, Medium, PacketOutcome, TrialOptions,
};
use crate::stats::{binomial_stderr, chi_square, derive_stream, fit_fringe, ChiSquare, FringeFit, SeededStream};
use crate::wavepacket::{spread_length, EntangledPair, Polarization, Species, Spreading, SpreadingParams};

struct TrialStreams {
    alpha: SeededStream,
    engine: SeededStream,
}

fn streams(seed: u64, label: &str, trial: u64) -> TrialStreams {
    TrialStreams {
        alpha: derive_stream(seed, &format!("{label}/alpha1"), trial),
        engine: derive_stream(seed, &format!("{label}/engine"), trial),
    }
}

/// Counter slots: three per node (unpolarized, H, V) and a final "none".
fn slot_count(graph: &CircuitGraph) -> usize {
    3 * graph.node_count() + 1
}

fn slot_of(graph: &CircuitGraph, outcome: &PacketOutcome) -> usize {
    match *outcome {
        PacketOutcome::Click { node, polarization, .. } => {
            3 * node.0
                + match polarization {
                    Polarization::None => 0,
                    Polarization::H => 1,
                    Polarization::V => 2,
                }
        }
        PacketOutcome::Absorbed { node, .. } => 3 * node.0,
        PacketOutcome::Undetected => 3 * graph.node_count(),
    }
}

fn slot_labels(graph: &CircuitGraph) -> Vec<String> {
    let mut out = Vec::with_capacity(slot_count(graph));
    for (_, c) in graph.nodes() {
        out.push(c.label.clone());
        out.push(format!("{}:H", c.label));
        out.push(format!("{}:V", c.label));
    }
    out.push("none".into());
    out
}

fn stats_from(graph: &CircuitGraph, counts: &[u64]) -> EnsembleStats {
    let labels = slot_labels(graph);
    let trials = counts.iter().sum();
    let counts = labels
        .into_iter()
        .zip(counts.iter().copied())
        .filter(|(_, c)| *c > 0)
        .collect();
    EnsembleStats { trials, counts }
}

/// Runs a single-packet circuit and counts outcome labels.
fn count_outcomes(cfg: &ScenarioConfig, circuit: &Circuit, species: Species, label: &str) -> Result<EnsembleStats> {
    let g = &circuit.graph;
    let counts = tally(cfg.trials, slot_count(g), |i, acc| {
        let mut s = streams(cfg.seed, label, i);
        let packet = circuit.packet(0, s.alpha.angle(), species, cfg.packet_length);
        let r = run_trial(g, Emission::Single(packet), &s.engine)?;
        acc[slot_of(g, &r.outcomes[0])] += 1;
        Ok(())
    })?;
    Ok(stats_from(g, &counts))
}

fn unit_injection(circuit: &Circuit) -> Vec<Injection> {
    vec![Injection { edge: circuit.inputs[0], amplitude: Complex64::ONE, polarization: Polarization::None }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Report {
    pub first: String,
    pub distance_scale: f64,
    pub d2_distance: f64,
    pub stats: EnsembleStats,
    pub p_first: f64,
    pub p_d2: f64,
    pub p_none: f64,
    pub stderr_first: f64,
    pub stderr_d2: f64,
    /// Clicks in the first detector per click in D2.
    pub ratio: f64,
}

fn fig1_report(first: &str, distance_scale: f64, d2_distance: f64, stats: EnsembleStats) -> Fig1Report {
    let n1 = stats.count(first) as f64;
    let n2 = stats.count("D2") as f64;
    Fig1Report {
        first: first.into(),
        distance_scale,
        d2_distance,
        p_first: stats.frequency(first),
        p_d2: stats.frequency("D2"),
        p_none: stats.frequency("none"),
        stderr_first: stats.stderr(first),
        stderr_d2: stats.stderr("D2"),
        ratio: if n2 > 0.0 { n1 / n2 } else { f64::INFINITY },
        stats,
    }
}

/// One splitter, two detectors at equal distance.
pub fn run_fig1a(cfg: &ScenarioConfig) -> Result<Fig1Report> {
    let g = cfg.geometry(Species::Photon);
    let c = circuits::fig1a(g)?;
    let stats = count_outcomes(cfg, &c, Species::Photon, "fig1a")?;
    Ok(fig1_report("D1", 1.0, g.detector_distance, stats))
}

/// AD1 close to the splitter; D2 at `far_distance × distance_scale`.
pub fn run_fig1b(cfg: &ScenarioConfig) -> Result<Fig1Report> {
    let g = cfg.geometry(Species::Photon);
    let far = cfg.far_distance * cfg.distance_scale;
    let c = circuits::fig1b(g, cfg.near_distance, far)?;
    let stats = count_outcomes(cfg, &c, Species::Photon, "fig1b")?;
    Ok(fig1_report("AD1", cfg.distance_scale, far, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvFields {
    pub p_d1: f64,
    pub p_d2: f64,
    pub p_none: f64,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElitzurVaidmanReport {
    pub t: f64,
    pub t2: f64,
    pub object_present: bool,
    pub counts: EnsembleStats,
    pub p_d1: f64,
    pub p_d2: f64,
    /// Probability that no detector clicks.
    pub p_none: f64,
    /// P(D2) / P(none), with the object in place.
    pub eta: Option<f64>,
    pub stderr: EvFields,
    /// Amplitude-algebra expectation.
    pub expected: EvFields,
}

fn eta_of(p_d2: f64, p_none: f64, object_present: bool) -> Option<f64> {
    (object_present && p_none > 0.0).then(|| p_d2 / p_none)
}

pub fn run_elitzur_vaidman(cfg: &ScenarioConfig) -> Result<ElitzurVaidmanReport> {
    let t2 = cfg.bs2_transmission();
    let c = circuits::elitzur_vaidman(cfg.geometry(Species::Photon), cfg.t, t2, cfg.object_present)?;
    let stats = count_outcomes(cfg, &c, Species::Photon, "elitzur-vaidman")?;
    let n = stats.trials as f64;
    let (n1, n2) = (stats.count("D1"), stats.count("D2"));
    let nn = stats.trials - n1 - n2;
    let p_d1 = n1 as f64 / n;
    let p_d2 = n2 as f64 / n;
    let p_none = nn as f64 / n;
    let eta = eta_of(p_d2, p_none, cfg.object_present);
    // multinomial delta method, cov(p2, pn) = -p2·pn/N
    let eta_err = eta.map(|e| {
        if n2 == 0 {
            0.0
        } else {
            e * ((1.0 - p_d2) / (n * p_d2) + (1.0 - p_none) / (n * p_none) + 2.0 / n).sqrt()
        }
    });

    let w = classical_oracle(&c.graph, &unit_injection(&c))?;
    let (e1, e2) = (w.at(c.node("D1")), w.at(c.node("D2")));
    let en = 1.0 - e1 - e2;
    Ok(ElitzurVaidmanReport {
        t: cfg.t,
        t2,
        object_present: cfg.object_present,
        p_d1,
        p_d2,
        p_none,
        eta,
        stderr: EvFields {
            p_d1: binomial_stderr(p_d1, stats.trials),
            p_d2: binomial_stderr(p_d2, stats.trials),
            p_none: binomial_stderr(p_none, stats.trials),
            eta: eta_err,
        },
        expected: EvFields { p_d1: e1, p_d2: e2, p_none: en, eta: eta_of(e2, en, cfg.object_present) },
        counts: stats,
    })
}

/// Intensities or frequencies over a phase grid, with the fitted fringe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceScan {
    pub phi: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: Option<FringeFit>,
    pub visibility: Option<f64>,
    /// Fitted amplitude relative to the reference scan.
    pub a_n: Option<f64>,
    /// Reference maximum and minimum, I⁰_max and I⁰_min.
    pub reference: Option<[f64; 2]>,
}

impl InterferenceScan {
    fn new(phi: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        let fit = if phi.len() >= 3 { Some(fit_fringe(&phi, &values)?) } else { None };
        Ok(InterferenceScan { visibility: fit.map(|f| f.visibility()), phi, values, stderr, fit, a_n: None, reference: None })
    }

    pub fn amplitude(&self) -> Option<f64> {
        self.fit.map(|f| f.amplitude)
    }

    fn normalize_to(&mut self, reference: &InterferenceScan) {
        if let (Some(f), Some(r)) = (self.fit, reference.fit) {
            self.a_n = (r.amplitude > 0.0).then(|| f.amplitude / r.amplitude);
            self.reference = Some([r.max(), r.min()]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumVisibility {
    /// Detection frequency at D among packets not absorbed by A.
    pub scan: InterferenceScan,
    pub absorbed_fraction: f64,
    pub absorbed_stderr: f64,
    pub recorded: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub t: f64,
    pub classical: Option<InterferenceScan>,
    pub quantum: Option<QuantumVisibility>,
}

pub fn run_visibility(mode: VisibilityMode, cfg: &ScenarioConfig) -> Result<VisibilityReport> {
    let g = cfg.geometry(Species::Photon);
    let grid = cfg.phase_grid();
    let classical = if mode != VisibilityMode::QuantumPackets {
        let mut values = Vec::with_capacity(grid.len());
        for &phi in &grid {
            let c = circuits::visibility(g, cfg.visibility_t, phi)?;
            values.push(classical_oracle(&c.graph, &unit_injection(&c))?.at(c.node("D")));
        }
        Some(InterferenceScan::new(grid.clone(), values, vec![0.0; grid.len()])?)
    } else {
        None
    };

    let quantum = if mode != VisibilityMode::ClassicalIntensity {
        let (mut values, mut errs, mut recorded) = (Vec::new(), Vec::new(), Vec::new());
        let (mut absorbed, mut total) = (0u64, 0u64);
        for (j, &phi) in grid.iter().enumerate() {
            let c = circuits::visibility(g, cfg.visibility_t, phi)?;
            let stats = count_outcomes(cfg, &c, Species::Photon, &format!("visibility/{j}"))?;
            let n_abs = stats.count("A");
            let rec = stats.trials - n_abs;
            let p = if rec > 0 { stats.count("D") as f64 / rec as f64 } else { 0.0 };
            values.push(p);
            errs.push(binomial_stderr(p, rec));
            recorded.push(rec);
            absorbed += n_abs;
            total += stats.trials;
        }
        let f = absorbed as f64 / total as f64;
        Some(QuantumVisibility {
            scan: InterferenceScan::new(grid.clone(), values, errs)?,
            absorbed_fraction: f,
            absorbed_stderr: binomial_stderr(f, total),
            recorded,
        })
    } else {
        None
    };
    Ok(VisibilityReport { t: cfg.visibility_t, classical, quantum })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceStats {
    pub inserted: bool,
    pub stats: EnsembleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayedChoiceReport {
    pub policy: ChoicePolicy,
    /// When the coin-flip choice is applied, seconds after emission.
    pub choice_time: Option<f64>,
    pub bs1_time: f64,
    pub bs2_time: f64,
    pub per_choice: Vec<ChoiceStats>,
    /// Static circuits run with the same per-trial streams, split by the coin.
    pub matched_static: Vec<ChoiceStats>,
    /// Trials whose outcome differs from the matched static run.
    pub mismatches: Option<u64>,
}

pub fn run_delayed_choice(policy: ChoicePolicy, cfg: &ScenarioConfig) -> Result<DelayedChoiceReport> {
    let g = cfg.geometry(Species::Photon);
    let (bs1_time, bs2_time) = circuits::delayed_choice_times(g);
    let fixed_in = circuits::delayed_choice(g, true)?;
    let fixed_out = circuits::delayed_choice(g, false)?;
    let graph = &fixed_in.graph;
    let slots = slot_count(graph);
    let bs2 = fixed_in.node("BS2");
    let label = "delayed-choice";

    let static_run = |inserted: bool| -> Result<ChoiceStats> {
        let c = if inserted { &fixed_in } else { &fixed_out };
        Ok(ChoiceStats { inserted, stats: count_outcomes(cfg, c, Species::Photon, label)? })
    };
    match policy {
        ChoicePolicy::AlwaysIn | ChoicePolicy::AlwaysOut => {
            let s = static_run(policy == ChoicePolicy::AlwaysIn)?;
            return Ok(DelayedChoiceReport {
                policy,
                choice_time: None,
                bs1_time,
                bs2_time,
                per_choice: vec![s],
                matched_static: Vec::new(),
                mismatches: None,
            });
        }
        ChoicePolicy::CoinFlipAfterBs1 => {}
    }

    // after the packet front leaves BS1, halfway to BS2
    let at_time = bs1_time + 0.5 * (bs2_time - bs1_time);
    // layout: [coin out | coin in | static out | static in | mismatches]
    let counts = tally(cfg.trials, 4 * slots + 1, |i, acc| {
        let coin = derive_stream(cfg.seed, &format!("{label}/choice"), i).bernoulli(0.5);
        // start in the opposite configuration so every trial is really switched
        let start = if coin { &fixed_out } else { &fixed_in };
        let options = TrialOptions { choices: vec![Choice { node: bs2, insert: coin, at_time }], ..TrialOptions::default() };
        let mut s = streams(cfg.seed, label, i);
        let alpha = s.alpha.angle();
        let delayed = run_trial_with(
            &start.graph,
            Emission::Single(start.packet(0, alpha, Species::Photon, cfg.packet_length)),
            &s.engine,
            &options,
        )?;
        let matched = if coin { &fixed_in } else { &fixed_out };
        let fixed = run_trial(
            &matched.graph,
            Emission::Single(matched.packet(0, alpha, Species::Photon, cfg.packet_length)),
            &s.engine,
        )?;
        let a = slot_of(graph, &delayed.outcomes[0]);
        let b = slot_of(graph, &fixed.outcomes[0]);
        let k = usize::from(coin);
        acc[k * slots + a] += 1;
        acc[(2 + k) * slots + b] += 1;
        if a != b {
            acc[4 * slots] += 1;
        }
        Ok(())
    })?;
    let part = |k: usize| &counts[k * slots..(k + 1) * slots];
    Ok(DelayedChoiceReport {
        policy,
        choice_time: Some(at_time),
        bs1_time,
        bs2_time,
        per_choice: vec![
            ChoiceStats { inserted: false, stats: stats_from(graph, part(0)) },
            ChoiceStats { inserted: true, stats: stats_from(graph, part(1)) },
        ],
        matched_static: vec![
            ChoiceStats { inserted: false, stats: stats_from(graph, part(2)) },
            ChoiceStats { inserted: true, stats: stats_from(graph, part(3)) },
        ],
        mismatches: Some(counts[4 * slots]),
    })
}

const WING_OUTCOMES: [&str; 5] = ["D1:H", "D1:V", "D2:H", "D2:V", "none"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntangledPoint {
    pub phi: f64,
    /// Joint counts, row = Alice outcome, column = Bob outcome, in `WING_OUTCOMES` order.
    pub joint: Vec<Vec<u64>>,
    pub trials: u64,
    pub alice_v: f64,
    pub alice_v_stderr: f64,
    pub bob_d1_given_v: f64,
    pub bob_d1_given_v_stderr: f64,
    pub bob_d1_given_h: f64,
    pub bob_d1_given_h_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntangledScan {
    pub order: Order,
    pub alice_distance: f64,
    pub bob_distance: f64,
    pub points: Vec<EntangledPoint>,
    /// Bob's D1 frequency given Alice's C_V clicked.
    pub given_v: InterferenceScan,
    /// Bob's D1 frequency given Alice's C_H clicked.
    pub given_h: InterferenceScan,
    pub alice_v_mean: f64,
    /// Largest deviation of Alice's C_V frequency from its mean, in standard errors.
    pub alice_v_max_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderComparison {
    /// Largest cell difference between the two joint tables, in standard errors.
    pub max_z: f64,
    pub cells_compared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntangledReport {
    pub outcomes: Vec<String>,
    pub scans: Vec<EntangledScan>,
    pub order_comparison: Option<OrderComparison>,
}

fn wing_slot(c: &Circuit, prefix: &str, outcome: &PacketOutcome) -> usize {
    match *outcome {
        PacketOutcome::Click { node, polarization, .. } => {
            let d2 = node == c.node(&format!("{prefix}D2"));
            2 * usize::from(d2) + usize::from(polarization == Polarization::V)
        }
        _ => 4,
    }
}

pub fn run_entangled_scan(order: Order, cfg: &ScenarioConfig) -> Result<EntangledScan> {
    let g = cfg.geometry(Species::Photon);
    let (near, far) = (cfg.detector_distance, 10.0 * cfg.detector_distance);
    let (alice_distance, bob_distance) = match order {
        Order::AliceFirst => (near, far),
        Order::BobFirst => (far, near),
    };
    let grid = cfg.phase_grid();
    let mut points = Vec::with_capacity(grid.len());
    for (j, &phi) in grid.iter().enumerate() {
        let c = circuits::entangled(g, phi, alice_distance, bob_distance)?;
        let label = format!("entangled-delayed-choice/{}/{j}", order.as_str());
        let counts = tally(cfg.trials, 25, |i, acc| {
            let mut s = streams(cfg.seed, &label, i);
            let pair = EntangledPair {
                packet_a: c.polarized_packet(0, s.alpha.angle(), cfg.packet_length),
                packet_b: c.polarized_packet(1, s.alpha.angle(), cfg.packet_length),
                correlation: cfg.correlation,
            };
            let r = run_trial(&c.graph, Emission::Pair(pair), &s.engine)?;
            let a = wing_slot(&c, "A", &r.outcomes[0]);
            let b = wing_slot(&c, "B", &r.outcomes[1]);
            acc[5 * a + b] += 1;
            Ok(())
        })?;
        let joint: Vec<Vec<u64>> = counts.chunks(5).map(<[u64]>::to_vec).collect();
        let row = |rows: &[usize]| -> (u64, u64) {
            // (Alice clicks in these rows, of which Bob clicked D1)
            let n: u64 = rows.iter().map(|&r| joint[r].iter().sum::<u64>()).sum();
            let d1: u64 = rows.iter().map(|&r| joint[r][0] + joint[r][1]).sum();
            (n, d1)
        };
        let (nv, v_d1) = row(&[1, 3]);
        let (nh, h_d1) = row(&[0, 2]);
        let ratio = |k: u64, n: u64| if n > 0 { k as f64 / n as f64 } else { 0.0 };
        let alice_v = ratio(nv, cfg.trials);
        let (pv, ph) = (ratio(v_d1, nv), ratio(h_d1, nh));
        points.push(EntangledPoint {
            phi,
            trials: cfg.trials,
            alice_v,
            alice_v_stderr: binomial_stderr(alice_v, cfg.trials),
            bob_d1_given_v: pv,
            bob_d1_given_v_stderr: binomial_stderr(pv, nv),
            bob_d1_given_h: ph,
            bob_d1_given_h_stderr: binomial_stderr(ph, nh),
            joint,
        });
    }
    let scan_of = |f: &dyn Fn(&EntangledPoint) -> (f64, f64)| {
        let (v, e): (Vec<f64>, Vec<f64>) = points.iter().map(f).unzip();
        InterferenceScan::new(grid.clone(), v, e)
    };
    let given_v = scan_of(&|p| (p.bob_d1_given_v, p.bob_d1_given_v_stderr))?;
    let given_h = scan_of(&|p| (p.bob_d1_given_h, p.bob_d1_given_h_stderr))?;
    let total_v: f64 = points.iter().map(|p| p.alice_v).sum::<f64>();
    let alice_v_mean = total_v / points.len() as f64;
    let pooled = binomial_stderr(alice_v_mean, cfg.trials);
    let alice_v_max_z = points
        .iter()
        .map(|p| if pooled > 0.0 { (p.alice_v - alice_v_mean).abs() / pooled } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(EntangledScan { order, alice_distance, bob_distance, points, given_v, given_h, alice_v_mean, alice_v_max_z })
}

/// Compares two joint tables cell by cell.
pub fn compare_orders(a: &EntangledScan, b: &EntangledScan) -> OrderComparison {
    let mut max_z: f64 = 0.0;
    let mut cells = 0;
    for (pa, pb) in a.points.iter().zip(&b.points) {
        let (na, nb) = (pa.trials as f64, pb.trials as f64);
        for (ra, rb) in pa.joint.iter().zip(&pb.joint) {
            for (&x, &y) in ra.iter().zip(rb) {
                if x + y == 0 {
                    continue;
                }
                cells += 1;
                let p = (x + y) as f64 / (na + nb);
                let sigma = (p * (1.0 - p) * (1.0 / na + 1.0 / nb)).sqrt();
                let diff = (x as f64 / na - y as f64 / nb).abs();
                let z = if sigma > 0.0 { diff / sigma } else if diff > 0.0 { f64::INFINITY } else { 0.0 };
                max_z = max_z.max(z);
            }
        }
    }
    OrderComparison { max_z, cells_compared: cells }
}

pub fn run_entangled_delayed_choice(cfg: &ScenarioConfig) -> Result<EntangledReport> {
    let orders = match cfg.order {
        Some(o) => vec![o],
        None => vec![Order::AliceFirst, Order::BobFirst],
    };
    let scans = orders.into_iter().map(|o| run_entangled_scan(o, cfg)).collect::<Result<Vec<_>>>()?;
    let order_comparison = (scans.len() == 2).then(|| compare_orders(&scans[0], &scans[1]));
    Ok(EntangledReport { outcomes: WING_OUTCOMES.iter().map(|s| s.to_string()).collect(), scans, order_comparison })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionCurve {
    pub a: f64,
    pub sqrt_a: f64,
    /// Detection frequency at D per phase.
    pub scan: InterferenceScan,
    /// Fraction of packets with a phase-matching encounter in the foil.
    pub q1: Option<f64>,
    /// Among those, the fraction where the deflected part vanished.
    pub q2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialAbsorptionReport {
    pub reference: AbsorptionCurve,
    pub foil: Vec<AbsorptionCurve>,
    pub chopper: Vec<AbsorptionCurve>,
}

fn absorption_curve(cfg: &ScenarioConfig, absorber: ArmAbsorber) -> Result<AbsorptionCurve> {
    let g = cfg.geometry(Species::Massive);
    let grid = cfg.phase_grid();
    let (a, tag) = match absorber {
        ArmAbsorber::Foil { a, .. } => (a, "foil"),
        ArmAbsorber::Chopper { a } => (a, "chopper"),
    };
    let (mut values, mut errs) = (Vec::new(), Vec::new());
    let (mut met, mut deflected_vanished, mut total) = (0u64, 0u64, 0u64);
    for (j, &phi) in grid.iter().enumerate() {
        let c = circuits::partial_absorption(g, absorber, phi)?;
        let d = c.node("D");
        let foil = c.graph.find("F");
        let label = format!("partial-absorption/{tag}/{a}/{j}");
        // [D clicks, foil encounters, deflected part vanished]
        let counts = tally(cfg.trials, 3, |i, acc| {
            let mut s = streams(cfg.seed, &label, i);
            let packet = c.packet(0, s.alpha.angle(), Species::Massive, cfg.packet_length);
            let r = run_trial(&c.graph, Emission::Single(packet), &s.engine)?;
            if r.click(0).is_some_and(|(n, _)| n == d) {
                acc[0] += 1;
            }
            if let Some(f) = foil {
                if r.encountered(0, f) {
                    acc[1] += 1;
                    let l2 = r
                        .encounters
                        .iter()
                        .any(|e| e.node == f && e.kind == EncounterKind::Vanished && e.exit == Some(1));
                    acc[2] += u64::from(l2);
                }
            }
            Ok(())
        })?;
        let p = counts[0] as f64 / cfg.trials as f64;
        values.push(p);
        errs.push(binomial_stderr(p, cfg.trials));
        met += counts[1];
        deflected_vanished += counts[2];
        total += cfg.trials;
    }
    let is_foil = matches!(absorber, ArmAbsorber::Foil { .. });
    Ok(AbsorptionCurve {
        a,
        sqrt_a: a.sqrt(),
        scan: InterferenceScan::new(grid, values, errs)?,
        q1: is_foil.then(|| met as f64 / total as f64),
        q2: (is_foil && met > 0).then(|| deflected_vanished as f64 / met as f64),
    })
}

pub fn run_partial_absorption(cfg: &ScenarioConfig) -> Result<PartialAbsorptionReport> {
    let medium = Medium::thin_foil();
    let reference = absorption_curve(cfg, ArmAbsorber::Foil { a: 1.0, medium })?;
    let mut foil = Vec::new();
    let mut chopper = Vec::new();
    for &a in &cfg.a {
        let mut curve = absorption_curve(cfg, ArmAbsorber::Foil { a, medium })?;
        curve.scan.normalize_to(&reference.scan);
        foil.push(curve);
        if cfg.chopper {
            let mut curve = absorption_curve(cfg, ArmAbsorber::Chopper { a })?;
            curve.scan.normalize_to(&reference.scan);
            chopper.push(curve);
        }
    }
    let mut reference = reference;
    let r = reference.scan.clone();
    reference.scan.normalize_to(&r);
    Ok(PartialAbsorptionReport { reference, foil, chopper })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornScreenReport {
    pub profile: Vec<f64>,
    pub trials: u64,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub stderr: Vec<f64>,
    pub undetected: u64,
    pub chi_square: ChiSquare,
}

pub fn run_born_screen(profile: &[f64], cfg: &ScenarioConfig) -> Result<BornScreenReport> {
    let k = profile.len();
    if k < 2 {
        return Err(Error::InvalidConfig("a screen needs at least two pixels".into()));
    }
    let c = circuits::screen(cfg.geometry(Species::Photon), k)?;
    let pixels: Vec<_> = (0..k).map(|i| c.node(&format!("X{i}"))).collect();
    let counts = tally(cfg.trials, k + 1, |i, acc| {
        let mut s = streams(cfg.seed, "born-screen", i);
        let packet = circuits::screen_packet(&c, profile, s.alpha.angle(), cfg.packet_length);
        let r = run_trial(&c.graph, Emission::Single(packet), &s.engine)?;
        let slot = r.click(0).and_then(|(n, _)| pixels.iter().position(|p| *p == n)).unwrap_or(k);
        acc[slot] += 1;
        Ok(())
    })?;
    let n = cfg.trials;
    let frequencies: Vec<f64> = counts[..k].iter().map(|&x| x as f64 / n as f64).collect();
    Ok(BornScreenReport {
        profile: profile.to_vec(),
        trials: n,
        stderr: frequencies.iter().map(|&p| binomial_stderr(p, n)).collect(),
        frequencies,
        undetected: counts[k],
        chi_square: chi_square(&counts[..k], profile)?,
        counts: counts[..k].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadingReport {
    pub coherence_length: f64,
    pub flight_distance: f64,
    pub relative_bandwidth: f64,
    pub massive: Spreading,
    pub photon: Spreading,
    /// σ_y of the massive packet at two significant figures.
    pub sigma_y: String,
}

pub fn run_spreading(cfg: &ScenarioConfig) -> Result<SpreadingReport> {
    let params = |species| SpreadingParams {
        coherence_length: cfg.sigma_cy,
        flight_distance: cfg.l,
        relative_bandwidth: cfg.dl,
        species,
    };
    let massive = params(Species::Massive);
    massive.validate()?;
    let m = spread_length(&massive);
    Ok(SpreadingReport {
        coherence_length: cfg.sigma_cy,
        flight_distance: cfg.l,
        relative_bandwidth: cfg.dl,
        massive: m,
        photon: spread_length(&params(Species::Photon)),
        sigma_y: format!("{:.1e}", m.length),
    })
}
