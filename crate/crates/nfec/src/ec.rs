//! Per-state moment generating functions of the service process and the
//! effective capacity in both its sum form and its spectral-radius form.
//!
//! For i.i.d. slots the effective capacity reduces to a single-slot
//! expectation, EC(θ) = −(1/θ)·ln E[e^{−θs}], and the state decomposition
//! gives E[e^{−θs}] = Σᵢ Pᵢ·Mᵢ(θ). In `Normalized` MGF mode every Mᵢ is a
//! genuine conditional expectation (the raw truncated-Gaussian integral
//! divided by the truncation mass and the state probability), so the identity
//! holds exactly and is checked against [`mgf_definitional`], an independent
//! nested quadrature of the joint law that calls the scheduler pointwise.
//! `PaperLiteral` mode reproduces the printed unnormalized integrals instead.
//!
//! Outage states deliver zero service, so e^{−θ·0} = 1 and their MGFs are
//! exactly one; the two empty states carry MGF one by the same convention.

use serde::Serialize;
use thiserror::Error;

use crate::capacity::{scheduled_rate, service_rate, CapacityError};
use crate::markov::{state_distribution, MarkovError, ServiceState, StateDistribution};
use crate::numerics::{
    integrate_1d, integrate_1d_with_breakpoints, q_function, std_normal_cdf, std_normal_pdf,
    QuadratureError, QuadratureSettings,
};
use crate::params::{FfMgfUpper, MgfMode, ProbMode, SystemParams};
use crate::ranging::{annulus_pdf, ff_panels, nf_panels};

/// Standardized-variable cutoff: Gaussian mass beyond 12σ is below 2e-33 and
/// is dropped from every integral.
const T_CAP: f64 = 12.0;
/// Extended far-field region upper limit, in σ units above the true distance.
const T_EXTENDED: f64 = 10.0;

/// The eight per-state MGF values M_{R|Sᵢ}(θ).
#[derive(Debug, Clone, Serialize)]
pub struct StateMgfs {
    /// Values in S1…S8 order; outage states {2, 6, 8} and empty states
    /// {4, 5} are exactly one, every entry lies in (0, 1].
    pub values: [f64; 8],
    pub mode: MgfMode,
    pub theta: f64,
}

/// Effective capacity with its assembly diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EcResult {
    pub theta: f64,
    /// EC = −(1/θ)·ln(Σᵢ Pᵢ·Mᵢ(θ)), bits per channel use.
    pub ec_bits_per_use: f64,
    pub state_probs: StateDistribution,
    pub mgfs: StateMgfs,
    /// The MGF sum Σᵢ Pᵢ·Mᵢ(θ) the logarithm was taken of.
    pub log_mgf_sum: f64,
}

#[derive(Debug, Error)]
pub enum EcError {
    #[error("theta must be positive, got {0}")]
    NonPositiveTheta(f64),
    #[error("per-state MGFs require sigma_d_m > 0")]
    DegenerateSigma,
    #[error(
        "inconsistent mode pairing: prob_mode {prob:?} with mgf_mode {mgf:?} \
         (pair geometric_prior with normalized, or paper_literal with paper_literal)"
    )]
    ModeMismatch { prob: ProbMode, mgf: MgfMode },
    #[error("power iteration did not converge within {max_iters} iterations")]
    PowerIterationDiverged { max_iters: usize },
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Reliable region of a state in the standardized variable t = (d̂−d)/σ,
/// or `None` for the outage/empty states.
fn reliable_region(
    state: ServiceState,
    d: f64,
    params: &SystemParams,
) -> Option<(f64, f64)> {
    let sigma = params.sigma_d_m;
    let d_f = params.fraunhofer_distance();
    let ff_hi = match params.ff_mgf_upper {
        FfMgfUpper::DMax => ((params.d_max_m - d) / sigma).min(T_CAP),
        FfMgfUpper::Extended => T_EXTENDED,
    };
    match state {
        ServiceState::NfReliable => Some((0.0, ((d_f - d) / sigma).min(T_CAP))),
        ServiceState::NfMissedReliable => Some(((d_f - d) / sigma, ff_hi)),
        ServiceState::FfReliable => Some((0.0, ff_hi)),
        _ => None,
    }
}

/// Truncation-scaled probability mass of a reliable state's full region,
/// Pr(Sᵢ | d)·Φ(d/σ). Used as the `Normalized` denominator so the Φ factors
/// cancel exactly.
fn region_mass(state: ServiceState, d: f64, params: &SystemParams) -> f64 {
    let sigma = params.sigma_d_m;
    let d_f = params.fraunhofer_distance();
    match state {
        ServiceState::NfReliable => std_normal_cdf((d_f - d) / sigma) - 0.5,
        ServiceState::NfMissedReliable => q_function((d_f - d) / sigma),
        ServiceState::FfReliable => match params.prob_mode {
            ProbMode::GeometricPrior => 0.5,
            ProbMode::PaperLiteral => q_function((d_f - d) / sigma),
        },
        _ => 0.0,
    }
}

/// Raw Gaussian-weighted integral Iᵢ(d) = ∫ e^{−θR(d+σt)} φ(t) dt over the
/// state's region. This equals the printed conditional MGF integrand after
/// the substitution t = (d̂−d)/σ.
fn region_exp_integral(
    state: ServiceState,
    d: f64,
    theta: f64,
    params: &SystemParams,
    settings: QuadratureSettings,
) -> Result<f64, QuadratureError> {
    let (lo, hi) = match reliable_region(state, d, params) {
        Some(region) => region,
        None => return Ok(0.0),
    };
    if !(hi > lo) || lo >= T_CAP {
        return Ok(0.0);
    }
    let sigma = params.sigma_d_m;
    let r = integrate_1d(
        |t| {
            let d_hat = (d + sigma * t).max(0.0);
            match scheduled_rate(d_hat, params) {
                Ok(rate) => (-theta * rate).exp() * std_normal_pdf(t),
                Err(_) => f64::NAN,
            }
        },
        lo,
        hi.min(T_CAP),
        settings,
    )?;
    Ok(r.value)
}

/// Conditional MGF of the service process given a state and a true distance.
///
/// `Normalized` mode returns E[e^{−θR(d̂)} | Sᵢ, d] — the raw region integral
/// divided by the state's probability mass so that the eight values assemble
/// into E[e^{−θs} | d]. `PaperLiteral` mode returns the raw unnormalized
/// integral exactly as printed (plain Gaussian weight, no truncation mass,
/// no state normalization). Outage and empty states return one in either
/// mode.
pub fn mgf_state_cond(
    state: ServiceState,
    d: f64,
    theta: f64,
    params: &SystemParams,
) -> Result<f64, EcError> {
    if !(theta > 0.0) {
        return Err(EcError::NonPositiveTheta(theta));
    }
    if !(params.sigma_d_m > 0.0) {
        return Err(EcError::DegenerateSigma);
    }
    check_regime(state, d, params)?;
    if !state.is_reliable_state() {
        return Ok(1.0);
    }
    let settings = QuadratureSettings::default();
    let raw = region_exp_integral(state, d, theta, params, settings)?;
    match params.mgf_mode {
        MgfMode::PaperLiteral => Ok(raw),
        MgfMode::Normalized => {
            let mass = region_mass(state, d, params);
            if mass <= f64::MIN_POSITIVE {
                // The state's region carries no mass at this distance; the
                // conditional expectation degenerates to the empty-state
                // convention.
                Ok(1.0)
            } else {
                Ok((raw / mass).min(1.0))
            }
        }
    }
}

fn check_regime(state: ServiceState, d: f64, params: &SystemParams) -> Result<(), EcError> {
    let d_f = params.fraunhofer_distance();
    if state.is_near_truth() {
        if !(d >= params.d_min_m && d < d_f) {
            return Err(EcError::Markov(MarkovError::RegimeMismatch {
                state,
                expected: "near-field",
                d,
                d_f,
            }));
        }
    } else if !(d >= d_f && d <= params.d_max_m) {
        return Err(EcError::Markov(MarkovError::RegimeMismatch {
            state,
            expected: "far-field",
            d,
            d_f,
        }));
    }
    Ok(())
}

/// Outer integral over the state's regime annulus with panel boundaries on
/// the σ-wide layers next to the Fraunhofer distance. The integrand may fail
/// (propagated quadrature errors from the inner integral); the first failure
/// wins.
fn integrate_regime<F>(
    panels: &[f64],
    settings: QuadratureSettings,
    integrand: F,
) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> Result<f64, QuadratureError>,
{
    let failure = std::cell::RefCell::new(None::<QuadratureError>);
    let result = integrate_1d_with_breakpoints(
        |d| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match integrand(d) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        panels,
        settings,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    result.map(|r| r.value)
}

/// Unconditional MGF of the service process for one state.
///
/// `Normalized` mode computes E[e^{−θR} | Sᵢ] as
/// ∫ Pr(Sᵢ|d)·M_cond(d)·f(d) dd / ∫ Pr(Sᵢ|d)·f(d) dd with the
/// regime-conditional density f, so that Pᵢ·Mᵢ = prior·∫ Iᵢ(d)/Φ(d/σ)·f dd
/// and the denominators cancel against the state probabilities.
/// `PaperLiteral` mode evaluates the printed double integrals: prefactor
/// 2/(√(2π)·σ·(d_F²−d_min²)) for the near-field states — the algebraically
/// reconstructed constant; the printed √2/(πσ(…)) is dimensionally
/// inconsistent with its own derivation chain — and the printed far-field
/// analogue for state 7, each over the state's own region with the composite
/// rate. Outage and empty states return one.
pub fn mgf_state(
    state: ServiceState,
    theta: f64,
    params: &SystemParams,
) -> Result<f64, EcError> {
    if !(theta > 0.0) {
        return Err(EcError::NonPositiveTheta(theta));
    }
    if !(params.sigma_d_m > 0.0) {
        return Err(EcError::DegenerateSigma);
    }
    if !state.is_reliable_state() {
        return Ok(1.0);
    }
    let sigma = params.sigma_d_m;
    let d_f = params.fraunhofer_distance();
    let settings = QuadratureSettings::default();
    let inner_settings = settings.inner();
    let (panels, area) = if state.is_near_truth() {
        (
            nf_panels(params.d_min_m, d_f, sigma),
            d_f * d_f - params.d_min_m * params.d_min_m,
        )
    } else {
        (
            ff_panels(d_f, params.d_max_m, sigma),
            params.d_max_m * params.d_max_m - d_f * d_f,
        )
    };
    let density = move |d: f64| 2.0 * d / area;

    match params.mgf_mode {
        MgfMode::PaperLiteral => integrate_regime(&panels, settings, |d| {
            Ok(density(d) * region_exp_integral(state, d, theta, params, inner_settings)?)
        })
        .map_err(EcError::from),
        MgfMode::Normalized => {
            let numerator = integrate_regime(&panels, settings, |d| {
                let raw = region_exp_integral(state, d, theta, params, inner_settings)?;
                Ok(density(d) * raw / std_normal_cdf(d / sigma))
            })?;
            let denominator = integrate_regime(&panels, settings, |d| {
                Ok(density(d) * region_mass(state, d, params) / std_normal_cdf(d / sigma))
            })?;
            if denominator <= f64::MIN_POSITIVE {
                Ok(1.0)
            } else {
                Ok((numerator / denominator).min(1.0))
            }
        }
    }
}

/// All eight per-state MGFs in order.
pub fn state_mgfs(theta: f64, params: &SystemParams) -> Result<StateMgfs, EcError> {
    let mut values = [1.0f64; 8];
    for state in ServiceState::ALL {
        values[state.index()] = mgf_state(state, theta, params)?;
    }
    Ok(StateMgfs {
        values,
        mode: params.mgf_mode,
        theta,
    })
}

fn check_mode_pairing(params: &SystemParams) -> Result<(), EcError> {
    let consistent = matches!(
        (params.prob_mode, params.mgf_mode),
        (ProbMode::GeometricPrior, MgfMode::Normalized)
            | (ProbMode::PaperLiteral, MgfMode::PaperLiteral)
    );
    if consistent {
        Ok(())
    } else {
        Err(EcError::ModeMismatch {
            prob: params.prob_mode,
            mgf: params.mgf_mode,
        })
    }
}

/// Closed-form effective capacity EC = −(1/θ)·ln(Σᵢ Pᵢ·Mᵢ(θ)).
///
/// The probability and MGF conventions must pair consistently:
/// `GeometricPrior` with `Normalized` (the validated configuration) or
/// `PaperLiteral` with `PaperLiteral` (the printed reproduction).
pub fn effective_capacity(theta: f64, params: &SystemParams) -> Result<EcResult, EcError> {
    if !(theta > 0.0) {
        return Err(EcError::NonPositiveTheta(theta));
    }
    check_mode_pairing(params)?;
    let state_probs = state_distribution(params)?;
    let mgfs = state_mgfs(theta, params)?;
    let log_mgf_sum: f64 = state_probs
        .probs
        .iter()
        .zip(mgfs.values.iter())
        .map(|(p, m)| p * m)
        .sum();
    Ok(EcResult {
        theta,
        ec_bits_per_use: -log_mgf_sum.ln() / theta,
        state_probs,
        mgfs,
        log_mgf_sum,
    })
}

/// Spectral radius of an 8×8 nonnegative matrix by power iteration
/// (tolerance 1e−12, at most 10⁴ iterations).
pub fn spectral_radius(matrix: &[[f64; 8]; 8]) -> Result<f64, EcError> {
    const TOL: f64 = 1e-12;
    const MAX_ITERS: usize = 10_000;
    let mut x = [1.0f64; 8];
    let mut prev = f64::NAN;
    for _ in 0..MAX_ITERS {
        let mut y = [0.0f64; 8];
        for (i, row) in matrix.iter().enumerate() {
            y[i] = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
        let norm = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if norm == 0.0 {
            return Ok(0.0);
        }
        for v in &mut y {
            *v /= norm;
        }
        x = y;
        if (norm - prev).abs() <= TOL * norm.max(1.0) {
            return Ok(norm);
        }
        prev = norm;
    }
    Err(EcError::PowerIterationDiverged {
        max_iters: MAX_ITERS,
    })
}

/// EC from explicit chain parts: −(1/θ)·ln sp(P·Θ(θ)) with P the
/// identical-row transition matrix of `dist` and Θ = diag(Mᵢ).
pub fn spectral_ec_from_parts(
    dist: &StateDistribution,
    mgfs: &StateMgfs,
    theta: f64,
) -> Result<f64, EcError> {
    if !(theta > 0.0) {
        return Err(EcError::NonPositiveTheta(theta));
    }
    let mut product = [[0.0f64; 8]; 8];
    for row in &mut product {
        for j in 0..8 {
            row[j] = dist.probs[j] * mgfs.values[j];
        }
    }
    Ok(-spectral_radius(&product)?.ln() / theta)
}

/// Effective capacity through the spectral-radius formulation. The chain's
/// identical rows make P·Θ rank one, so this equals the sum form up to
/// iteration tolerance; it is kept as an independent route for that check.
pub fn effective_capacity_spectral(theta: f64, params: &SystemParams) -> Result<f64, EcError> {
    check_mode_pairing(params)?;
    let dist = state_distribution(params)?;
    let mgfs = state_mgfs(theta, params)?;
    spectral_ec_from_parts(&dist, &mgfs, theta)
}

/// Inner integral of the joint law at fixed true distance d:
/// ∫ g(service(d, d+σt))·φ(t) dt over the whole truncated support, with
/// panel boundaries at the images of d_min, d, and the Fraunhofer distance
/// (the kinks of the service curve). `theta = None` integrates the service
/// itself, `Some(θ)` integrates e^{−θ·service}.
fn joint_inner(
    d: f64,
    theta: Option<f64>,
    params: &SystemParams,
    settings: QuadratureSettings,
) -> Result<f64, QuadratureError> {
    let sigma = params.sigma_d_m;
    let d_f = params.fraunhofer_distance();
    let lo = (-d / sigma).max(-T_CAP);
    let hi = T_CAP;
    let mut pts = vec![lo, hi];
    for boundary in [params.d_min_m, d, d_f] {
        let t = (boundary - d) / sigma;
        if t > lo && t < hi {
            pts.push(t);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let r = integrate_1d_with_breakpoints(
        |t| {
            let d_hat = (d + sigma * t).max(0.0);
            match service_rate(d, d_hat, params) {
                Ok(rates) => {
                    let g = match theta {
                        None => rates.service,
                        Some(th) => (-th * rates.service).exp(),
                    };
                    g * std_normal_pdf(t)
                }
                Err(_) => f64::NAN,
            }
        },
        &pts,
        settings,
    )?;
    Ok(r.value)
}

fn joint_outer(
    theta: Option<f64>,
    params: &SystemParams,
) -> Result<f64, EcError> {
    if !(params.sigma_d_m > 0.0) {
        return Err(EcError::DegenerateSigma);
    }
    let sigma = params.sigma_d_m;
    let d_f = params.fraunhofer_distance();
    let settings = QuadratureSettings::default();
    let inner_settings = settings.inner();
    let mut panels = nf_panels(params.d_min_m, d_f, sigma);
    panels.extend_from_slice(&ff_panels(d_f, params.d_max_m, sigma)[1..]);
    integrate_regime(&panels, settings, |d| {
        let inner = joint_inner(d, theta, params, inner_settings)?;
        Ok(annulus_pdf(d, params.d_min_m, params.d_max_m) * inner
            / std_normal_cdf(d / sigma))
    })
    .map_err(EcError::from)
}

/// Mean service rate E[s] by nested quadrature of the realized service
/// against the joint (d, d̂) truncated law over both regimes. This is the
/// θ → 0 limit of the effective capacity.
pub fn mean_service_rate(params: &SystemParams) -> Result<f64, EcError> {
    joint_outer(None, params)
}

/// Definitional MGF E[e^{−θs}] by a single nested quadrature of the joint
/// law, calling the scheduler and the outage comparison pointwise. This is
/// the independent oracle the state assembly Σᵢ Pᵢ·Mᵢ(θ) is checked against;
/// it shares no state-region reasoning with [`mgf_state`].
pub fn mgf_definitional(theta: f64, params: &SystemParams) -> Result<f64, EcError> {
    if !(theta > 0.0) {
        return Err(EcError::NonPositiveTheta(theta));
    }
    joint_outer(Some(theta), params)
}

/// EC computed directly from [`mgf_definitional`].
pub fn ec_definitional(theta: f64, params: &SystemParams) -> Result<f64, EcError> {
    Ok(-mgf_definitional(theta, params)?.ln() / theta)
}
