//! Truncated-Gaussian distance estimation, the near/far hypothesis test, the
//! misclassification probabilities, and the radial user-placement law.
//!
//! The estimate is d̂ = d + ε with ε ~ N(0, σ_d²), conditioned on d̂ ≥ 0.
//! The regime decision compares d̂ with the Fraunhofer boundary: estimates
//! strictly below it are declared near field. The user's true distance has
//! the radial density 2d/(d_max² − d_min²) of a uniform area placement on an
//! annulus.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::capacity::Regime;
use crate::numerics::{
    integrate_1d_with_breakpoints, q_function, std_normal_cdf, QuadratureError,
    QuadratureSettings,
};
use crate::params::SystemParams;

/// Outcome of one ranging-and-classification step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RangingOutcome {
    pub d_true: f64,
    pub d_hat: f64,
    pub decided: Regime,
    /// True iff the decided regime matches the regime of the true distance.
    pub correct: bool,
}

#[derive(Debug, Error)]
pub enum RangingError {
    #[error("estimate must be nonnegative, got {0} m")]
    NegativeEstimate(f64),
    #[error("analytical ranging formulas require sigma_d_m > 0 (Monte Carlo handles the degenerate case)")]
    DegenerateSigma,
    #[error("conditional false-far probability needs d_min <= d < d_F, got d = {d} m with d_F = {d_f} m")]
    NotNearField { d: f64, d_f: f64 },
    #[error("conditional false-near probability needs d_F <= d <= d_max, got d = {d} m with d_F = {d_f} m")]
    NotFarField { d: f64, d_f: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// CDF of the estimate truncated below at zero:
/// Pr(d̂ ≤ x | d̂ ≥ 0) = [Φ((x−d)/σ) − Φ(−d/σ)] / Φ(d/σ).
pub fn trunc_gauss_cdf(d_hat: f64, d: f64, sigma: f64) -> Result<f64, RangingError> {
    if d_hat < 0.0 {
        return Err(RangingError::NegativeEstimate(d_hat));
    }
    if !(sigma > 0.0) {
        return Err(RangingError::DegenerateSigma);
    }
    debug_assert!(d > 0.0);
    let mass = std_normal_cdf(d / sigma);
    Ok(((std_normal_cdf((d_hat - d) / sigma) - std_normal_cdf(-d / sigma)) / mass)
        .clamp(0.0, 1.0))
}

/// Draws one estimate from N(d, σ²) conditioned on being nonnegative.
/// σ = 0 returns d exactly.
pub fn sample_estimate<R: Rng + ?Sized>(d: f64, sigma: f64, rng: &mut R) -> f64 {
    debug_assert!(d > 0.0 && sigma >= 0.0);
    if sigma == 0.0 {
        return d;
    }
    loop {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let d_hat = d + sigma * z;
        if d_hat >= 0.0 {
            return d_hat;
        }
    }
}

/// Regime decision: near field iff the estimate is strictly below the
/// boundary; the boundary itself is declared far field.
pub fn classify(d_hat: f64, d_f: f64) -> Regime {
    debug_assert!(d_hat >= 0.0);
    if d_hat < d_f {
        Regime::NearField
    } else {
        Regime::FarField
    }
}

/// Runs the estimate-and-decide step for one true distance.
pub fn measure<R: Rng + ?Sized>(
    d_true: f64,
    params: &SystemParams,
    rng: &mut R,
) -> RangingOutcome {
    let d_f = params.fraunhofer_distance();
    let d_hat = sample_estimate(d_true, params.sigma_d_m, rng);
    let decided = classify(d_hat, d_f);
    let truly_near = d_true < d_f;
    RangingOutcome {
        d_true,
        d_hat,
        decided,
        correct: truly_near == (decided == Regime::NearField),
    }
}

/// Conditional false-far probability for a near-field user at distance d:
/// Q((d_F−d)/σ_d) / Φ(d/σ_d).
pub fn p_false_far_cond(d: f64, params: &SystemParams) -> Result<f64, RangingError> {
    let d_f = params.fraunhofer_distance();
    if !(d >= params.d_min_m && d < d_f) {
        return Err(RangingError::NotNearField { d, d_f });
    }
    let sigma = sigma_checked(params)?;
    Ok(q_function((d_f - d) / sigma) / std_normal_cdf(d / sigma))
}

/// Conditional false-near probability for a far-field user at distance d:
/// [Φ((d_F−d)/σ_d) − Φ(−d/σ_d)] / Φ(d/σ_d).
pub fn p_false_near_cond(d: f64, params: &SystemParams) -> Result<f64, RangingError> {
    let d_f = params.fraunhofer_distance();
    if !(d >= d_f && d <= params.d_max_m) {
        return Err(RangingError::NotFarField { d, d_f });
    }
    let sigma = sigma_checked(params)?;
    Ok(
        (std_normal_cdf((d_f - d) / sigma) - std_normal_cdf(-d / sigma))
            / std_normal_cdf(d / sigma),
    )
}

/// Unconditional false-far probability: the conditional error averaged over
/// near-field distances against the full-annulus density, i.e. the joint
/// probability Pr(decided far ∧ truly near).
pub fn p_false_far(params: &SystemParams) -> Result<f64, RangingError> {
    let sigma = sigma_checked(params)?;
    let d_f = params.fraunhofer_distance();
    let pts = nf_panels(params.d_min_m, d_f, sigma);
    let r = integrate_1d_with_breakpoints(
        |d| {
            q_function((d_f - d) / sigma) / std_normal_cdf(d / sigma)
                * annulus_pdf(d, params.d_min_m, params.d_max_m)
        },
        &pts,
        QuadratureSettings::default(),
    )?;
    Ok(r.value)
}

/// Unconditional false-near probability: the joint probability
/// Pr(decided near ∧ truly far) under the full-annulus density.
pub fn p_false_near(params: &SystemParams) -> Result<f64, RangingError> {
    let sigma = sigma_checked(params)?;
    let d_f = params.fraunhofer_distance();
    let pts = ff_panels(d_f, params.d_max_m, sigma);
    let r = integrate_1d_with_breakpoints(
        |d| {
            (std_normal_cdf((d_f - d) / sigma) - std_normal_cdf(-d / sigma))
                / std_normal_cdf(d / sigma)
                * annulus_pdf(d, params.d_min_m, params.d_max_m)
        },
        &pts,
        QuadratureSettings::default(),
    )?;
    Ok(r.value)
}

/// Both misclassification conventions side by side: the joint probabilities
/// as printed, and the error rates conditioned on the true regime (joint
/// divided by the geometric regime mass).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorProbReport {
    pub false_far_joint: f64,
    pub false_near_joint: f64,
    pub false_far_given_nf: f64,
    pub false_near_given_ff: f64,
}

pub fn error_prob_report(params: &SystemParams) -> Result<ErrorProbReport, RangingError> {
    let joint_ff = p_false_far(params)?;
    let joint_fn = p_false_near(params)?;
    let d_f = params.fraunhofer_distance();
    let nf_mass = (d_f * d_f - params.d_min_m * params.d_min_m)
        / (params.d_max_m * params.d_max_m - params.d_min_m * params.d_min_m);
    Ok(ErrorProbReport {
        false_far_joint: joint_ff,
        false_near_joint: joint_fn,
        false_far_given_nf: joint_ff / nf_mass,
        false_near_given_ff: joint_fn / (1.0 - nf_mass),
    })
}

/// Draws a true distance with density 2d/(d_max² − d_min²) via the inverse
/// CDF d = sqrt(d_min² + U·(d_max² − d_min²)).
pub fn sample_distance<R: Rng + ?Sized>(d_min: f64, d_max: f64, rng: &mut R) -> f64 {
    debug_assert!(0.0 < d_min && d_min < d_max);
    let u: f64 = rng.gen();
    (d_min * d_min + u * (d_max * d_max - d_min * d_min)).sqrt()
}

/// Radial density 2d/(d_max² − d_min²) of the uniform-in-area placement.
pub(crate) fn annulus_pdf(d: f64, d_min: f64, d_max: f64) -> f64 {
    2.0 * d / (d_max * d_max - d_min * d_min)
}

fn sigma_checked(params: &SystemParams) -> Result<f64, RangingError> {
    if params.sigma_d_m > 0.0 {
        Ok(params.sigma_d_m)
    } else {
        Err(RangingError::DegenerateSigma)
    }
}

/// Panel boundaries for integrals over the near-field annulus [d_min, d_F):
/// the integrands vary on the σ scale next to the boundary, so give that
/// layer its own panel.
pub(crate) fn nf_panels(d_min: f64, d_f: f64, sigma: f64) -> Vec<f64> {
    let mut pts = vec![d_min, d_f];
    let layer = d_f - 8.0 * sigma;
    if layer > d_min && layer < d_f {
        pts.insert(1, layer);
    }
    pts
}

/// Panel boundaries for integrals over the far-field annulus [d_F, d_max].
pub(crate) fn ff_panels(d_f: f64, d_max: f64, sigma: f64) -> Vec<f64> {
    let mut pts = vec![d_f, d_max];
    let layer = d_f + 8.0 * sigma;
    if layer > d_f && layer < d_max {
        pts.insert(1, layer);
    }
    pts
}
