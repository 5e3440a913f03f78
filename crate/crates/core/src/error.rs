use std::fmt;

/// Which singular curve a point was found on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularSet {
    /// Initial conditions whose next collision is a corner.
    Plus,
    /// Conditions reached by leaving a corner; the inverse is undefined there.
    Minus,
}

impl fmt::Display for SingularSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularSet::Plus => f.write_str("S+"),
            SingularSet::Minus => f.write_str("S-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid contraction factor {0}")]
    InvalidLambda(f64),

    #[error("{what} = {value} is outside the phase space")]
    Domain { what: &'static str, value: f64 },

    #[error("point lies on the singular set {0}")]
    Singular(SingularSet),

    #[error("angle {0} leaves (-pi/2, pi/2)")]
    AngleRange(f64),

    #[error("point is not in the image of the reduced map")]
    NoPreimage,

    #[error("orbit hit a singular set at step {step}")]
    OrbitDied { step: usize },

    #[error("itinerary violated at step {step}")]
    ItineraryViolation { step: usize },

    #[error("series diverged at theta = {theta}")]
    SeriesDiverged { theta: f64 },

    #[error("root not bracketed on [{lo}, {hi}] (f = {f_lo}, {f_hi})")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finder did not converge in {0} iterations")]
    NoConvergence(usize),

    #[error("theta = {0} is outside the sampled curve")]
    InterpolationRange(f64),

    #[error("orbit is not verified periodic (residual {0:e})")]
    Unverified(f64),

    #[error("periodic point {0} does not exist at this lambda")]
    MissingOrbit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
