use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("packet has zero live weight; it should already have been marked absorbed")]
    ZeroWeight,

    #[error("packet was already reduced; a scheduler delivered an event after contraction")]
    AlreadyReduced,

    #[error("branches {0} and {1} are phase-space separated and cannot be superposed")]
    IncoherentMerge(u32, u32),

    #[error("choice at t={at_time:e} s for node {node} is too late: a branch arrived at t={arrived:e} s")]
    ChoiceTooLate { node: usize, at_time: f64, arrived: f64 },

    #[error("trial exceeded the event budget of {0} events")]
    NonTermination(usize),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("expected count {expected:.3} in bin {bin} is below 5")]
    DegenerateBin { bin: usize, expected: f64 },

    #[error("fringe fit is rank deficient: {0}")]
    RankDeficient(String),

    #[error("the classical oracle cannot evaluate this circuit: {0}")]
    UnsupportedTopology(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
