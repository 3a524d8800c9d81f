//! Effective-capacity analysis of a joint near-field/far-field link under
//! distance-estimation uncertainty.
//!
//! A base station with a large continuous-aperture array serves a user whose
//! distance is only known through noisy ranging. The scheduler classifies the
//! user as near field or far field by comparing the estimated distance against
//! the Fraunhofer boundary, then picks a transmission rate from the matching
//! capacity law. Misclassification and rate overshoot produce outages; the
//! resulting service process is an eight-state memoryless Markov chain whose
//! effective capacity quantifies the sustainable arrival rate under a
//! statistical delay constraint.
//!
//! The crate provides:
//!
//! - [`params`]: system configuration, validation, and the Fraunhofer boundary;
//! - [`numerics`]: normal CDF/Q-function and adaptive Gauss–Kronrod quadrature;
//! - [`capacity`]: near/far capacity laws, scheduled rate, and realized service;
//! - [`ranging`]: truncated-Gaussian estimation, the regime hypothesis test,
//!   and misclassification probabilities;
//! - [`markov`]: the eight service states, their probabilities, and the
//!   (identical-row) transition matrix;
//! - [`ec`]: per-state moment generating functions and the effective capacity
//!   in both sum and spectral-radius form;
//! - [`mc`]: a seeded, thread-count-independent Monte Carlo oracle and a queue
//!   tail validator;
//! - [`toa`]: time-of-arrival ranging, Cramér–Rao bounds, and a matched-filter
//!   delay-estimation simulator.

pub mod capacity;
pub mod ec;
pub mod markov;
pub mod mc;
pub mod numerics;
pub mod params;
pub mod ranging;
pub mod toa;

pub use capacity::{MonotonicityReport, Regime, SlotRates};
pub use ec::{EcResult, StateMgfs};
pub use markov::{ServiceState, StateDistribution, TransitionMatrix};
pub use mc::{McConfig, McEstimate, QueueTailReport, SlotOutcome};
pub use params::{FfMgfUpper, MgfMode, ProbMode, SystemParams, SPEED_OF_LIGHT};
pub use toa::{PulseShape, RangingLink, WaveformSpec};
