use thiserror::Error;

/// Errors raised while validating inputs or running experiments.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed degree pair `{0}`, expected `r:prob`")]
    MalformedPair(String),
    #[error("replica count {0} listed more than once")]
    DuplicateDegree(usize),
    #[error("replica count {0} is below the minimum of 2")]
    DegreeTooSmall(usize),
    #[error("probability {prob} for r = {degree} is outside (0, 1]")]
    InvalidProbability { degree: usize, prob: f64 },
    #[error("degree probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("degree distribution is empty")]
    EmptyDistribution,
    #[error("power ladder needs at least one level")]
    NoLevels,
    #[error("at most 255 power levels are supported, got {0}")]
    TooManyLevels(usize),
    #[error("SINR threshold must be finite, got {0} dB")]
    NonFiniteThreshold(f64),
    #[error("frame has {slots} slots but the distribution can ask for {degree} replicas")]
    DegreeExceedsSlots { degree: usize, slots: usize },
    #[error("a frame needs at least one slot")]
    NoSlots,
    #[error("at least one frame must be simulated")]
    NoFrames,
    #[error("occupancy instance with {balls} balls and {bins} bins is too large for exact computation")]
    InstanceTooLarge { balls: usize, bins: usize },
    #[error("frame length {n} is too small (need at least {min})")]
    FrameTooShort { n: usize, min: usize },
    #[error("bin-count fit needs at least 3 distinct frame lengths, got {0}")]
    DegenerateFit(usize),
    #[error("packet loss rate sample must be positive, got {0}")]
    NonPositivePlr(f64),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
