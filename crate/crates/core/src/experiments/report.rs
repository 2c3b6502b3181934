use serde::Serialize;

use super::scenarios::*;
use super::tolerances as tol;
use super::{ScenarioConfig, ScenarioId};
use crate::error::Result;

/// One pass/fail judgement against a pinned tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: String) -> Self {
        Check { name: name.into(), pass, detail }
    }

    fn within(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (value - expected).abs() <= tolerance;
        Check::new(name, pass, format!("{value:.6} vs {expected:.6} ± {tolerance}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    Fig1(Fig1Report),
    ElitzurVaidman(ElitzurVaidmanReport),
    Visibility(VisibilityReport),
    DelayedChoice(DelayedChoiceReport),
    Entangled(EntangledReport),
    PartialAbsorption(PartialAbsorptionReport),
    BornScreen(BornScreenReport),
    Spreading(SpreadingReport),
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    Ok(match cfg.scenario {
        ScenarioId::Fig1a => Report::Fig1(run_fig1a(cfg)?),
        ScenarioId::Fig1b => Report::Fig1(run_fig1b(cfg)?),
        ScenarioId::ElitzurVaidman => Report::ElitzurVaidman(run_elitzur_vaidman(cfg)?),
        ScenarioId::Visibility => Report::Visibility(run_visibility(cfg.mode, cfg)?),
        ScenarioId::DelayedChoice => Report::DelayedChoice(run_delayed_choice(cfg.policy, cfg)?),
        ScenarioId::EntangledDelayedChoice => Report::Entangled(run_entangled_delayed_choice(cfg)?),
        ScenarioId::PartialAbsorption => Report::PartialAbsorption(run_partial_absorption(cfg)?),
        ScenarioId::BornScreen => Report::BornScreen(run_born_screen(&cfg.profile, cfg)?),
        ScenarioId::Spreading => Report::Spreading(run_spreading(cfg)?),
    })
}

fn push_scan(out: &mut Vec<(String, f64)>, prefix: &str, scan: &InterferenceScan) {
    if scan.values.len() == 1 {
        out.push((prefix.to_string(), scan.values[0]));
        out.push((format!("{prefix}_stderr"), scan.stderr[0]));
    }
    if let Some(f) = scan.fit {
        out.push((format!("{prefix}_offset"), f.offset));
        out.push((format!("{prefix}_amplitude"), f.amplitude));
    }
    if let Some(v) = scan.visibility {
        out.push((format!("{prefix}_visibility"), v));
    }
    if let Some(a) = scan.a_n {
        out.push((format!("{prefix}_a_n"), a));
    }
}

impl Report {
    /// Flat named numbers, in a fixed order, for CSV rows and the summary.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut m = Vec::new();
        let mut put = |k: &str, v: f64| m.push((k.to_string(), v));
        match self {
            Report::Fig1(r) => {
                put("p_first", r.p_first);
                put("p_d2", r.p_d2);
                put("p_none", r.p_none);
                put("stderr_first", r.stderr_first);
                put("stderr_d2", r.stderr_d2);
                put("d2_distance", r.d2_distance);
            }
            Report::ElitzurVaidman(r) => {
                put("p_d1", r.p_d1);
                put("p_d2", r.p_d2);
                put("p_none", r.p_none);
                put("eta", r.eta.unwrap_or(f64::NAN));
                put("stderr_p_d1", r.stderr.p_d1);
                put("stderr_p_d2", r.stderr.p_d2);
                put("stderr_p_none", r.stderr.p_none);
                put("stderr_eta", r.stderr.eta.unwrap_or(f64::NAN));
            }
            Report::Visibility(r) => {
                if let Some(c) = &r.classical {
                    push_scan(&mut m, "classical", c);
                }
                if let Some(q) = &r.quantum {
                    push_scan(&mut m, "quantum", &q.scan);
                    m.push(("absorbed_fraction".into(), q.absorbed_fraction));
                    m.push(("absorbed_stderr".into(), q.absorbed_stderr));
                }
            }
            Report::DelayedChoice(r) => {
                for c in &r.per_choice {
                    let tag = if c.inserted { "in" } else { "out" };
                    put(&format!("{tag}_p_d1"), c.stats.frequency("D1"));
                    put(&format!("{tag}_p_d2"), c.stats.frequency("D2"));
                    put(&format!("{tag}_trials"), c.stats.trials as f64);
                }
                if let Some(x) = r.mismatches {
                    put("mismatches", x as f64);
                }
            }
            Report::Entangled(r) => {
                for s in &r.scans {
                    let o = s.order.as_str().replace('-', "_");
                    push_scan(&mut m, &format!("{o}_given_v"), &s.given_v);
                    push_scan(&mut m, &format!("{o}_given_h"), &s.given_h);
                    m.push((format!("{o}_alice_v_mean"), s.alice_v_mean));
                    m.push((format!("{o}_alice_v_max_z"), s.alice_v_max_z));
                }
                if let Some(c) = &r.order_comparison {
                    m.push(("order_max_z".into(), c.max_z));
                }
            }
            Report::PartialAbsorption(r) => {
                push_scan(&mut m, "reference", &r.reference.scan);
                for (i, c) in r.foil.iter().enumerate() {
                    m.push((format!("foil{i}_a"), c.a));
                    push_scan(&mut m, &format!("foil{i}"), &c.scan);
                    m.push((format!("foil{i}_q1"), c.q1.unwrap_or(f64::NAN)));
                    m.push((format!("foil{i}_q2"), c.q2.unwrap_or(f64::NAN)));
                }
                for (i, c) in r.chopper.iter().enumerate() {
                    m.push((format!("chopper{i}_a"), c.a));
                    push_scan(&mut m, &format!("chopper{i}"), &c.scan);
                }
            }
            Report::BornScreen(r) => {
                for (i, (p, e)) in r.frequencies.iter().zip(&r.stderr).enumerate() {
                    put(&format!("p_x{i}"), *p);
                    put(&format!("stderr_x{i}"), *e);
                }
                put("chi_square", r.chi_square.statistic);
                put("p_value", r.chi_square.p_value);
            }
            Report::Spreading(r) => {
                put("delta_sy", r.massive.increase);
                put("sigma_y", r.massive.length);
                put("photon_sigma_y", r.photon.length);
            }
        }
        m
    }

    /// Tolerance checks enforced by `--assert`.
    pub fn checks(&self) -> Vec<Check> {
        let mut c = Vec::new();
        match self {
            Report::Fig1(r) => {
                c.push(Check::within(format!("P({})", r.first), r.p_first, 0.5, tol::FIG1_RATIO));
                c.push(Check::within("P(D2)", r.p_d2, 0.5, tol::FIG1_RATIO));
                c.push(Check::new("every packet clicks", r.p_none == 0.0, format!("P(none) = {}", r.p_none)));
            }
            Report::ElitzurVaidman(r) => {
                let e = &r.expected;
                c.push(Check::within("P(D1)", r.p_d1, e.p_d1, tol::EV_FREQUENCY));
                c.push(Check::within("P(D2)", r.p_d2, e.p_d2, tol::EV_FREQUENCY));
                c.push(Check::within("P(none)", r.p_none, e.p_none, tol::EV_FREQUENCY));
                if let (Some(eta), Some(exp)) = (r.eta, e.eta) {
                    c.push(Check::within("eta", eta, exp, tol::EV_ETA));
                }
            }
            Report::Visibility(r) => {
                if let Some(s) = &r.classical {
                    let v = s.visibility.unwrap_or(f64::NAN);
                    c.push(Check::within(
                        "classical visibility",
                        v,
                        tol::VISIBILITY_CLASSICAL,
                        tol::VISIBILITY_CLASSICAL_TOL,
                    ));
                }
                if let Some(q) = &r.quantum {
                    let v = q.scan.visibility.unwrap_or(f64::NAN);
                    c.push(Check::within("quantum visibility", v, tol::VISIBILITY_QUANTUM, tol::VISIBILITY_QUANTUM_TOL));
                    c.push(Check::within(
                        "absorbed fraction",
                        q.absorbed_fraction,
                        tol::ABSORBED_FRACTION,
                        tol::ABSORBED_FRACTION_TOL,
                    ));
                }
            }
            Report::DelayedChoice(r) => {
                for s in &r.per_choice {
                    if s.inserted {
                        let d2 = s.stats.count("D2");
                        c.push(Check::new("BS2 in: no D2", d2 == 0, format!("{d2} D2 clicks")));
                        c.push(Check::new(
                            "BS2 in: all D1",
                            s.stats.count("D1") == s.stats.trials,
                            format!("{} of {}", s.stats.count("D1"), s.stats.trials),
                        ));
                    } else {
                        c.push(Check::within("BS2 out: P(D1)", s.stats.frequency("D1"), 0.5, tol::DELAYED_FREQUENCY));
                        c.push(Check::within("BS2 out: P(D2)", s.stats.frequency("D2"), 0.5, tol::DELAYED_FREQUENCY));
                    }
                }
                for (d, s) in r.per_choice.iter().zip(&r.matched_static) {
                    c.push(Check::new(
                        format!("choice {} matches static", if d.inserted { "in" } else { "out" }),
                        d.stats == s.stats,
                        format!("{:?} vs {:?}", d.stats.counts, s.stats.counts),
                    ));
                }
            }
            Report::Entangled(r) => {
                for s in &r.scans {
                    let o = s.order.as_str();
                    let v = s.given_v.visibility.unwrap_or(f64::NAN);
                    c.push(Check::new(
                        format!("{o}: fringe given C_V"),
                        v >= tol::ENTANGLED_VISIBILITY_MIN,
                        format!("V = {v:.4}"),
                    ));
                    let worst = s.given_h.values.iter().map(|p| (p - 0.5).abs()).fold(0.0, f64::max);
                    c.push(Check::new(
                        format!("{o}: flat given C_H"),
                        worst <= tol::ENTANGLED_FLAT,
                        format!("max |p - 0.5| = {worst:.4}"),
                    ));
                    c.push(Check::new(
                        format!("{o}: Alice marginal flat"),
                        s.alice_v_max_z <= tol::SIGMA,
                        format!("max z = {:.2}", s.alice_v_max_z),
                    ));
                }
                if let Some(cmp) = &r.order_comparison {
                    c.push(Check::new(
                        "order invariance",
                        cmp.max_z <= tol::SIGMA,
                        format!("max z = {:.2} over {} cells", cmp.max_z, cmp.cells_compared),
                    ));
                }
            }
            Report::PartialAbsorption(r) => {
                for f in &r.foil {
                    c.push(Check::within(format!("foil a={}: A_n", f.a), f.scan.a_n.unwrap_or(f64::NAN), f.sqrt_a, tol::AMPLITUDE));
                }
                for f in &r.chopper {
                    c.push(Check::within(format!("chopper a={}: A_n", f.a), f.scan.a_n.unwrap_or(f64::NAN), f.a, tol::AMPLITUDE));
                }
            }
            Report::BornScreen(r) => {
                c.push(Check::new(
                    "chi-square",
                    r.chi_square.p_value > tol::CHI_SQUARE_P_MIN,
                    format!("chi2 = {:.3}, p = {:.4}", r.chi_square.statistic, r.chi_square.p_value),
                ));
                for (i, (p, w)) in r.frequencies.iter().zip(&r.profile).enumerate() {
                    c.push(Check::within(format!("pixel {i}"), *p, *w, tol::BORN_FREQUENCY));
                }
            }
            Report::Spreading(r) => {
                c.push(Check::new(
                    "sigma_y",
                    r.sigma_y == tol::SPREADING_EXPECTED,
                    format!("{} vs {}", r.sigma_y, tol::SPREADING_EXPECTED),
                ));
                c.push(Check::new(
                    "photon does not spread",
                    r.photon.length == r.coherence_length,
                    format!("{:e}", r.photon.length),
                ));
            }
        }
        c
    }
}
