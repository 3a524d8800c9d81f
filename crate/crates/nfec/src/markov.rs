//! The eight service states of the joint classification/outage chain, their
//! conditional and unconditional probabilities, and the identical-row
//! transition matrix.
//!
//! Ranging errors are independent across slots, so the chain is memoryless:
//! every row of the transition matrix equals the stationary state
//! distribution. States 4 and 5 are empty whenever the composite rate curve
//! is monotone with a downward step at the boundary (see
//! [`crate::capacity::check_rate_monotonicity`]); they are kept for the full
//! eight-state presentation and always carry probability zero.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{
    integrate_1d_with_breakpoints, q_function, std_normal_cdf, QuadratureError,
    QuadratureSettings,
};
use crate::params::{ProbMode, SystemParams};
use crate::ranging::{ff_panels, nf_panels};

/// One of the eight joint (true regime, decided regime, reliability) states.
///
/// The numbering matches the conventional S1…S8 order: near-field truths
/// first, reliable before outage, correct classification before
/// misclassification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ServiceState {
    /// True NF, classified NF, rate delivered.
    NfReliable,
    /// True NF, classified NF, rate above capacity.
    NfOutage,
    /// True NF, classified FF, rate still delivered.
    NfMissedReliable,
    /// True NF, classified FF, rate above capacity (empty under the monotone
    /// rate curve).
    NfMissedOutage,
    /// True FF, classified NF, rate delivered (empty under the monotone rate
    /// curve).
    FfMissedReliable,
    /// True FF, classified NF, rate above capacity.
    FfMissedOutage,
    /// True FF, classified FF, rate delivered.
    FfReliable,
    /// True FF, classified FF, rate above capacity.
    FfOutage,
}

impl ServiceState {
    pub const ALL: [ServiceState; 8] = [
        ServiceState::NfReliable,
        ServiceState::NfOutage,
        ServiceState::NfMissedReliable,
        ServiceState::NfMissedOutage,
        ServiceState::FfMissedReliable,
        ServiceState::FfMissedOutage,
        ServiceState::FfReliable,
        ServiceState::FfOutage,
    ];

    /// Zero-based position in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based state number (1–8).
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<ServiceState> {
        Self::ALL.get((n as usize).wrapping_sub(1)).copied()
    }

    /// True when the true distance for this state lies in the near field.
    pub fn is_near_truth(self) -> bool {
        self.index() < 4
    }

    /// True for the zero-service states (outage) and the empty states.
    pub fn yields_no_service(self) -> bool {
        matches!(
            self,
            ServiceState::NfOutage
                | ServiceState::NfMissedOutage
                | ServiceState::FfMissedReliable
                | ServiceState::FfMissedOutage
                | ServiceState::FfOutage
        )
    }

    /// States that deliver a positive rate: 1, 3, and 7.
    pub fn is_reliable_state(self) -> bool {
        matches!(
            self,
            ServiceState::NfReliable | ServiceState::NfMissedReliable | ServiceState::FfReliable
        )
    }

    /// Classifies a slot from first principles: regime of the truth, regime
    /// decision on the estimate, and the actual rate comparison.
    pub fn from_flags(truly_near: bool, decided_near: bool, reliable: bool) -> ServiceState {
        match (truly_near, decided_near, reliable) {
            (true, true, true) => ServiceState::NfReliable,
            (true, true, false) => ServiceState::NfOutage,
            (true, false, true) => ServiceState::NfMissedReliable,
            (true, false, false) => ServiceState::NfMissedOutage,
            (false, true, true) => ServiceState::FfMissedReliable,
            (false, true, false) => ServiceState::FfMissedOutage,
            (false, false, true) => ServiceState::FfReliable,
            (false, false, false) => ServiceState::FfOutage,
        }
    }
}

/// Stationary probabilities of the eight states.
#[derive(Debug, Clone, Serialize)]
pub struct StateDistribution {
    /// Probabilities in S1…S8 order; sums to one, entries 4 and 5 are zero.
    pub probs: [f64; 8],
    /// Convention the probabilities were computed under.
    pub mode: ProbMode,
    /// Raw sum of the weighted state integrals before the final
    /// normalization. Equals one (to quadrature accuracy) in
    /// `GeometricPrior` mode; in `PaperLiteral` mode its deviation from one
    /// measures the printed prefactors and the S7 overlap.
    pub pre_normalization_sum: f64,
}

/// Row-stochastic 8×8 transition matrix with identical rows.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionMatrix {
    pub rows: [[f64; 8]; 8],
}

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("state {state:?} requires a {expected} true distance, got d = {d} m (d_F = {d_f} m)")]
    RegimeMismatch {
        state: ServiceState,
        expected: &'static str,
        d: f64,
        d_f: f64,
    },
    #[error("state probabilities require sigma_d_m > 0")]
    DegenerateSigma,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Conditional probability Pr(state | d) under the truncated estimate law.
///
/// Near-field states need d in [d_min, d_F), far-field states need d in
/// [d_F, d_max]. For `FfReliable` the value depends on the probability mode:
/// `PaperLiteral` returns Q((d_F−d)/σ)/Φ(d/σ) exactly as printed, which
/// overlaps the `FfOutage` region; `GeometricPrior` returns the consistent
/// Pr(d̂ ≥ d)/Pr(d̂ ≥ 0) = (1/2)/Φ(d/σ), since d ≥ d_F makes d̂ ≥ d the
/// binding constraint.
pub fn state_prob_cond(
    state: ServiceState,
    d: f64,
    params: &SystemParams,
) -> Result<f64, MarkovError> {
    let d_f = params.fraunhofer_distance();
    let sigma = params.sigma_d_m;
    if !(sigma > 0.0) {
        return Err(MarkovError::DegenerateSigma);
    }
    if state.is_near_truth() {
        if !(d >= params.d_min_m && d < d_f) {
            return Err(MarkovError::RegimeMismatch {
                state,
                expected: "near-field",
                d,
                d_f,
            });
        }
    } else if !(d >= d_f && d <= params.d_max_m) {
        return Err(MarkovError::RegimeMismatch {
            state,
            expected: "far-field",
            d,
            d_f,
        });
    }

    let mass = std_normal_cdf(d / sigma);
    let at_boundary = std_normal_cdf((d_f - d) / sigma);
    let value = match state {
        // d ≤ d̂ < d_F
        ServiceState::NfReliable => (at_boundary - 0.5) / mass,
        // 0 ≤ d̂ < d
        ServiceState::NfOutage => (mass - 0.5) / mass,
        // d̂ ≥ d_F
        ServiceState::NfMissedReliable => q_function((d_f - d) / sigma) / mass,
        // Empty regions.
        ServiceState::NfMissedOutage | ServiceState::FfMissedReliable => 0.0,
        // 0 ≤ d̂ < d_F
        ServiceState::FfMissedOutage => (at_boundary - std_normal_cdf(-d / sigma)) / mass,
        ServiceState::FfReliable => match params.prob_mode {
            ProbMode::PaperLiteral => q_function((d_f - d) / sigma) / mass,
            ProbMode::GeometricPrior => 0.5 / mass,
        },
        // d_F ≤ d̂ < d
        ServiceState::FfOutage => (0.5 - at_boundary) / mass,
    };
    Ok(value.max(0.0))
}

/// Difference between the printed and the consistent `FfReliable`
/// conditional at one far-field distance:
/// (Q((d_F−d)/σ) − 1/2)/Φ(d/σ). This is exactly the mass shared with
/// `FfOutage` under the printed formula.
pub fn s7_conditional_gap(d: f64, params: &SystemParams) -> Result<f64, MarkovError> {
    let d_f = params.fraunhofer_distance();
    if !(params.sigma_d_m > 0.0) {
        return Err(MarkovError::DegenerateSigma);
    }
    if !(d >= d_f && d <= params.d_max_m) {
        return Err(MarkovError::RegimeMismatch {
            state: ServiceState::FfReliable,
            expected: "far-field",
            d,
            d_f,
        });
    }
    let sigma = params.sigma_d_m;
    Ok((q_function((d_f - d) / sigma) - 0.5) / std_normal_cdf(d / sigma))
}

/// The S7 printed-vs-consistent gap averaged over the far-field annulus
/// density. A first-class diagnostic of the printed formula's overlap.
pub fn s7_mean_gap(params: &SystemParams) -> Result<f64, MarkovError> {
    let d_f = params.fraunhofer_distance();
    let sigma = sigma_checked(params)?;
    let ff_density = 2.0 / (params.d_max_m * params.d_max_m - d_f * d_f);
    let r = integrate_1d_with_breakpoints(
        |d| {
            (q_function((d_f - d) / sigma) - 0.5) / std_normal_cdf(d / sigma) * ff_density * d
        },
        &ff_panels(d_f, params.d_max_m, sigma),
        QuadratureSettings::default(),
    )?;
    Ok(r.value)
}

/// Unconditional stationary distribution of the eight states.
///
/// `PaperLiteral`: every state integral carries the printed 1/4 prefactor
/// with the regime-conditional densities 2d/(d_F²−d_min²) and
/// 2d/(d_max²−d_F²), and the eight-vector is renormalized to sum to one
/// afterwards. `GeometricPrior`: the prefactors are the area priors
/// Pr(near) = (d_F²−d_min²)/(d_max²−d_min²) and its complement, S7 uses the
/// consistent conditional, and the raw vector already sums to one (recorded
/// in `pre_normalization_sum`; the stored probabilities are rescaled by that
/// sum in both modes, which in `GeometricPrior` mode only removes quadrature
/// drift below the integration tolerance).
pub fn state_distribution(params: &SystemParams) -> Result<StateDistribution, MarkovError> {
    let sigma = sigma_checked(params)?;
    let d_f = params.fraunhofer_distance();
    let (d_min, d_max) = (params.d_min_m, params.d_max_m);
    let settings = QuadratureSettings::default();

    let nf_area = d_f * d_f - d_min * d_min;
    let ff_area = d_max * d_max - d_f * d_f;
    let (w_nf, w_ff) = match params.prob_mode {
        ProbMode::PaperLiteral => (0.25, 0.25),
        ProbMode::GeometricPrior => {
            let prior_nf = nf_area / (d_max * d_max - d_min * d_min);
            (prior_nf, 1.0 - prior_nf)
        }
    };

    let nf_pts = nf_panels(d_min, d_f, sigma);
    let ff_pts = ff_panels(d_f, d_max, sigma);
    let mut raw = [0.0f64; 8];
    for state in ServiceState::ALL {
        if matches!(
            state,
            ServiceState::NfMissedOutage | ServiceState::FfMissedReliable
        ) {
            continue;
        }
        let near = state.is_near_truth();
        let (pts, weight, area) = if near {
            (&nf_pts, w_nf, nf_area)
        } else {
            (&ff_pts, w_ff, ff_area)
        };
        let integral = integrate_1d_with_breakpoints(
            |d| {
                let cond = state_prob_cond(state, d, params)
                    .expect("distance inside the state's regime by construction");
                cond * 2.0 * d / area
            },
            pts,
            settings,
        )?;
        raw[state.index()] = weight * integral.value;
    }

    let pre_normalization_sum: f64 = raw.iter().sum();
    let mut probs = raw;
    for p in &mut probs {
        *p /= pre_normalization_sum;
    }
    Ok(StateDistribution {
        probs,
        mode: params.prob_mode,
        pre_normalization_sum,
    })
}

/// The memoryless chain's transition matrix: eight identical rows, each equal
/// to the stationary distribution.
pub fn transition_matrix(dist: &StateDistribution) -> TransitionMatrix {
    TransitionMatrix {
        rows: [dist.probs; 8],
    }
}

fn sigma_checked(params: &SystemParams) -> Result<f64, MarkovError> {
    if params.sigma_d_m > 0.0 {
        Ok(params.sigma_d_m)
    } else {
        Err(MarkovError::DegenerateSigma)
    }
}
