//! Prebuilt scenarios, their configuration and ensemble statistics.

pub mod circuits;
pub mod oracle;
mod report;
mod scenarios;
pub mod tolerances;

pub use oracle::{classical_oracle, Injection, TerminalWeights};
pub use report::{run_scenario, Check, Report};
pub use scenarios::*;

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{SPEED_OF_LIGHT, THERMAL_NEUTRON_SPEED};
use crate::stats::binomial_stderr;
use crate::wavepacket::{Correlation, Species};
use circuits::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Fig1a,
    Fig1b,
    ElitzurVaidman,
    Visibility,
    DelayedChoice,
    EntangledDelayedChoice,
    PartialAbsorption,
    BornScreen,
    Spreading,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 9] = [
        ScenarioId::Fig1a,
        ScenarioId::Fig1b,
        ScenarioId::ElitzurVaidman,
        ScenarioId::Visibility,
        ScenarioId::DelayedChoice,
        ScenarioId::EntangledDelayedChoice,
        ScenarioId::PartialAbsorption,
        ScenarioId::BornScreen,
        ScenarioId::Spreading,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Fig1a => "fig1a",
            ScenarioId::Fig1b => "fig1b",
            ScenarioId::ElitzurVaidman => "elitzur-vaidman",
            ScenarioId::Visibility => "visibility",
            ScenarioId::DelayedChoice => "delayed-choice",
            ScenarioId::EntangledDelayedChoice => "entangled-delayed-choice",
            ScenarioId::PartialAbsorption => "partial-absorption",
            ScenarioId::BornScreen => "born-screen",
            ScenarioId::Spreading => "spreading",
        }
    }

    /// Parameters `sweep` accepts for this scenario.
    pub fn sweepable(self) -> &'static [&'static str] {
        match self {
            ScenarioId::ElitzurVaidman => &["t"],
            ScenarioId::PartialAbsorption => &["a", "phi"],
            ScenarioId::Visibility | ScenarioId::EntangledDelayedChoice => &["phi"],
            ScenarioId::Fig1b => &["distance-scale"],
            _ => &[],
        }
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL.iter().copied().find(|id| id.as_str() == s).ok_or_else(|| {
            let ids: Vec<&str> = ScenarioId::ALL.iter().map(|i| i.as_str()).collect();
            Error::InvalidConfig(format!("unknown scenario '{s}'; valid ids: {}", ids.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VisibilityMode {
    ClassicalIntensity,
    QuantumPackets,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoicePolicy {
    AlwaysIn,
    AlwaysOut,
    CoinFlipAfterBs1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    AliceFirst,
    BobFirst,
}

impl Order {
    pub fn as_str(self) -> &'static str {
        match self {
            Order::AliceFirst => "alice-first",
            Order::BobFirst => "bob-first",
        }
    }
}

/// Everything a scenario run depends on. Scan scenarios (visibility,
/// entangled-delayed-choice, partial-absorption) run `trials` per phase point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub trials: u64,
    pub seed: u64,
    /// Length of each interferometer arm, metres.
    pub arm_length: f64,
    /// Source-to-splitter and splitter-to-detector distance, metres.
    pub detector_distance: f64,
    /// Longitudinal packet length, metres.
    pub packet_length: f64,
    /// Splitter-to-AD1 distance in fig1b, metres.
    pub near_distance: f64,
    /// Splitter-to-D2 distance in fig1b before scaling, metres.
    pub far_distance: f64,
    pub distance_scale: f64,
    /// BS1 transmission in the interaction-free measurement.
    pub t: f64,
    /// BS2 transmission; defaults to `1 - t`, which keeps D2 dark without the object.
    pub t2: Option<f64>,
    pub object_present: bool,
    /// Transmission of the asymmetric splitter in the visibility circuit.
    pub visibility_t: f64,
    pub mode: VisibilityMode,
    pub policy: ChoicePolicy,
    /// Detector ordering for the entangled run; unset runs both and compares them.
    pub order: Option<Order>,
    pub correlation: Correlation,
    /// Foil transmissions; the a=1 reference is always run.
    pub a: Vec<f64>,
    pub chopper: bool,
    /// A single phase instead of the grid.
    pub phi: Option<f64>,
    pub phi_points: usize,
    pub profile: Vec<f64>,
    /// Coherence length σ_cy, metres.
    pub sigma_cy: f64,
    /// Flight distance l, metres.
    pub l: f64,
    /// Relative bandwidth Δλ/λ.
    pub dl: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: ScenarioId::ElitzurVaidman,
            trials: 200_000,
            seed: 42,
            arm_length: 1.0,
            detector_distance: 0.5,
            packet_length: 1e-5,
            near_distance: 0.1,
            far_distance: 1000.0,
            distance_scale: 1.0,
            t: 0.5,
            t2: None,
            object_present: true,
            visibility_t: 0.01,
            mode: VisibilityMode::Both,
            policy: ChoicePolicy::CoinFlipAfterBs1,
            order: None,
            correlation: Correlation::Parallel,
            a: vec![0.1, 0.25, 0.5, 0.75],
            chopper: true,
            phi: None,
            phi_points: 24,
            profile: vec![0.3, 0.7],
            sigma_cy: 1e-8,
            l: 0.05,
            dl: 0.01,
        }
    }
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioId) -> Self {
        ScenarioConfig { scenario, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.scenario != ScenarioId::Spreading && self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let positive = [
            ("arm_length", self.arm_length),
            ("detector_distance", self.detector_distance),
            ("packet_length", self.packet_length),
            ("near_distance", self.near_distance),
            ("far_distance", self.far_distance),
            ("distance_scale", self.distance_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return bad(format!("t must lie in (0, 1), got {}", self.t));
        }
        if let Some(t2) = self.t2 {
            if !(0.0..=1.0).contains(&t2) {
                return bad(format!("t2 must lie in [0, 1], got {t2}"));
            }
        }
        if !(0.0..=1.0).contains(&self.visibility_t) {
            return bad(format!("visibility_t must lie in [0, 1], got {}", self.visibility_t));
        }
        if self.a.is_empty() {
            return bad("the a grid is empty".into());
        }
        if let Some(a) = self.a.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return bad(format!("foil transmission {a} outside (0, 1]"));
        }
        match self.phi {
            Some(phi) if !phi.is_finite() => return bad(format!("phi {phi} is not finite")),
            None if self.phi_points < 3 => return bad("phi_points must be at least 3 to fit a fringe".into()),
            _ => {}
        }
        if self.profile.len() < 2 || self.profile.iter().any(|w| !(*w > 0.0)) {
            return bad("profile needs at least two positive weights".into());
        }
        let sum: f64 = self.profile.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("profile weights sum to {sum}, not 1"));
        }
        let spread = crate::wavepacket::SpreadingParams {
            coherence_length: self.sigma_cy,
            flight_distance: self.l,
            relative_bandwidth: self.dl,
            species: Species::Massive,
        };
        spread.validate()
    }

    pub fn geometry(&self, species: Species) -> Geometry {
        Geometry {
            arm_length: self.arm_length,
            detector_distance: self.detector_distance,
            speed: match species {
                Species::Photon => SPEED_OF_LIGHT,
                Species::Massive => THERMAL_NEUTRON_SPEED,
            },
            packet_length: self.packet_length,
        }
    }

    pub fn phase_grid(&self) -> Vec<f64> {
        match self.phi {
            Some(phi) => vec![phi],
            None => crate::stats::phase_grid(self.phi_points),
        }
    }

    /// BS2 transmission actually used by the interaction-free measurement.
    pub fn bs2_transmission(&self) -> f64 {
        self.t2.unwrap_or(1.0 - self.t)
    }
}

/// Counts per outcome label over an ensemble.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub trials: u64,
    pub counts: BTreeMap<String, u64>,
}

impl EnsembleStats {
    pub fn from_counts(labels: &[String], counts: &[u64]) -> Self {
        let trials = counts.iter().sum();
        let counts = labels.iter().cloned().zip(counts.iter().copied()).collect();
        EnsembleStats { trials, counts }
    }

    pub fn count(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn frequency(&self, label: &str) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.count(label) as f64 / self.trials as f64
    }

    pub fn stderr(&self, label: &str) -> f64 {
        binomial_stderr(self.frequency(label), self.trials)
    }
}

/// Reads `REDUXIM_THREADS` and sizes the global worker pool (0 or unset: one per core).
pub fn configure_threads() -> Result<usize> {
    let requested = match std::env::var("REDUXIM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidConfig(format!("REDUXIM_THREADS must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    if requested > 0 {
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(requested).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// Runs `trials` independent trials, each adding into a tally of `slots`
/// counters. Sums of integers do not depend on how work is split.
pub fn tally<F>(trials: u64, slots: usize, trial: F) -> Result<Vec<u64>>
where
    F: Fn(u64, &mut [u64]) -> Result<()> + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .try_fold(
            || vec![0u64; slots],
            |mut acc, i| {
                trial(i, &mut acc)?;
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; slots],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}
