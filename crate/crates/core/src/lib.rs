//! Simulation and error-floor analysis of NOMA-based irregular repetition
//! slotted ALOHA.
//!
//! Users send a random number of replicas of their packet in a frame of `n`
//! slots, each replica at one of `L` received power levels. The receiver runs
//! successive interference cancellation across and within slots. This crate
//! provides:
//!
//! - [`model`]: degree distributions, the power ladder and SINR arithmetic;
//! - [`sim`]: frame generation and the SIC decoder;
//! - [`montecarlo`]: seeded, parallel packet-loss-rate estimation;
//! - [`analytics`]: balls-into-bins occupancy and the closed-form error floor;
//! - [`census`]: detection of the catalogued stopping sets in frames;
//! - [`harness`]: sweeps, census runs, the bin-count fit and CSV output.

pub mod analytics;
pub mod census;
pub mod error;
pub mod harness;
pub mod model;
pub mod montecarlo;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    build_power_ladder, parse_degree_distribution, sample_degree, sinr, DegreeDistribution,
    PowerLadder, SystemConfig,
};
pub use montecarlo::{estimate_plr, PlrEstimate, StoppingRule};
pub use sim::{generate_frame, sic_decode, DecodeOutcome, FrameInstance, SicDecoder};
