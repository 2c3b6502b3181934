//! Acceptance tolerances, shared by `--assert` and the acceptance tests.

/// Interaction-free measurement: frequencies of D1, D2 and no click.
pub const EV_FREQUENCY: f64 = 0.01;
pub const EV_ETA: f64 = 0.03;
/// η at T = 0.95 must exceed this.
pub const EV_ETA_AT_095: f64 = 0.8;
pub const EV_SWEEP: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95];

pub const FIG1_RATIO: f64 = 0.01;
pub const FIG1B_SCALE: f64 = 1000.0;

pub const VISIBILITY_CLASSICAL: f64 = 0.01;
pub const VISIBILITY_CLASSICAL_TOL: f64 = 1e-6;
pub const VISIBILITY_QUANTUM: f64 = 1.0;
pub const VISIBILITY_QUANTUM_TOL: f64 = 0.02;
pub const ABSORBED_FRACTION: f64 = 0.99;
pub const ABSORBED_FRACTION_TOL: f64 = 0.005;

pub const PARTIAL_A: [f64; 4] = [0.1, 0.25, 0.5, 0.75];
pub const AMPLITUDE: f64 = 0.02;

pub const DELAYED_FREQUENCY: f64 = 0.01;

pub const ENTANGLED_VISIBILITY_MIN: f64 = 0.97;
pub const ENTANGLED_FLAT: f64 = 0.01;

/// Agreement between two estimates, in standard errors.
pub const SIGMA: f64 = 4.0;

pub const CHI_SQUARE_P_MIN: f64 = 0.01;
pub const BORN_FREQUENCY: f64 = 0.01;

/// σ_y must print as this at two significant figures.
pub const SPREADING_EXPECTED: &str = "5.0e-4";

pub const NORMALIZATION: f64 = 1e-12;
