use thiserror::Error;

/// Errors raised by the detector, the family closed forms and the
/// experiment tooling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{family}: parameter {theta} outside the admissible domain {domain}")]
    ParamDomain {
        family: &'static str,
        theta: f64,
        domain: &'static str,
    },

    #[error("{family}: observation {x} outside the data support")]
    DataSupport { family: &'static str, x: f64 },

    #[error("{family}: mean statistic {gbar} outside the range of the mean map")]
    MeanRange { family: &'static str, gbar: f64 },

    #[error("{family}: degenerate segment with mean statistic {gbar}")]
    DegenerateSegment { family: &'static str, gbar: f64 },

    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("statistic needs at least {needed} observations, have {have}")]
    InsufficientData { needed: u64, have: u64 },

    #[error("observation {t}: {source}")]
    AtObservation { t: u64, source: Box<Error> },

    #[error("detector already stopped after a detection")]
    Halted,

    #[error("output: {0}")]
    Io(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(
        "threshold calibration did not converge: bracket [{lo}, {hi}], ARL estimates [{arl_lo}, {arl_hi}]"
    )]
    Calibration {
        lo: f64,
        hi: f64,
        arl_lo: f64,
        arl_hi: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
