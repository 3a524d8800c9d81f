//! Near-field and far-field Shannon capacity laws, the scheduler's rate rule,
//! and the realized per-slot service.
//!
//! Below the Fraunhofer boundary the wavefront is spherical and the capacity
//! carries aperture-coupling corrections; at and beyond it the conventional
//! Friis inverse-square law applies. The scheduler picks its rate from the
//! *estimated* distance, so the realized service compares that rate against
//! the capacity at the *true* distance: rate ≤ capacity delivers the rate
//! (equality included), rate > capacity delivers nothing.

use serde::Serialize;
use thiserror::Error;

use crate::params::SystemParams;

/// Propagation regime of a distance relative to the Fraunhofer boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NearField,
    FarField,
}

/// Rates realized in one slot.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlotRates {
    /// Rate the scheduler picked from the estimated distance (bits/use).
    pub scheduled_rate: f64,
    /// Capacity at the true distance under the true regime's law (bits/use).
    pub true_capacity: f64,
    /// Delivered service: the scheduled rate if reliable, else zero.
    pub service: f64,
    /// True iff a positive rate was scheduled but not delivered.
    pub in_outage: bool,
}

#[derive(Debug, Error)]
pub enum CapacityError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("near-field formula domain is 0 < d < {limit} m (twice the Fraunhofer distance), got {d} m")]
    OutsideNearFieldDomain { d: f64, limit: f64 },
    #[error("near-field log argument is non-positive at d = {d} m (argument {arg})")]
    NonPositiveLogArgument { d: f64, arg: f64 },
}

/// Aperture coupling/phase term v(d) = ln[((L_t+L_r)² + 4d²) / ((L_t−L_r)² + 4d²)].
///
/// Nonnegative for every d > 0 and vanishing as d → ∞.
pub fn v_coupling(d: f64, params: &SystemParams) -> f64 {
    debug_assert!(d > 0.0);
    let lt = params.aperture_tx_m;
    let lr = params.aperture_rx_m;
    let sum = lt + lr;
    let diff = lt - lr;
    ((sum * sum + 4.0 * d * d) / (diff * diff + 4.0 * d * d)).ln()
}

/// Aperture coupling multiplier u(d) = (2L_tL_r − d²v(d))² / (L_tL_rλd − λ²d²/4).
///
/// The denominator has a root at d = 4L_tL_r/λ (twice the Fraunhofer
/// distance), which bounds the validity window of the near-field law.
pub fn u_coupling(d: f64, params: &SystemParams) -> Result<f64, CapacityError> {
    if d <= 0.0 {
        return Err(CapacityError::NonPositiveDistance(d));
    }
    let lt = params.aperture_tx_m;
    let lr = params.aperture_rx_m;
    let lambda = params.wavelength_m;
    let limit = 4.0 * lt * lr / lambda;
    if d >= limit {
        return Err(CapacityError::OutsideNearFieldDomain { d, limit });
    }
    let num = 2.0 * lt * lr - d * d * v_coupling(d, params);
    let den = lt * lr * lambda * d - lambda * lambda * d * d / 4.0;
    Ok(num * num / den)
}

/// Near-field capacity C_n(d) (bits per channel use).
pub fn capacity_near(d: f64, params: &SystemParams) -> Result<f64, CapacityError> {
    let u = u_coupling(d, params)?;
    let lt = params.aperture_tx_m;
    let lr = params.aperture_rx_m;
    let lambda = params.wavelength_m;
    let num = lt * lr * lambda / d.powi(3) - lambda * lambda / (4.0 * d * d);
    let den = 2.0 * lt * lr / (d * d) - v_coupling(d, params);
    let arg = 1.0 + params.c0 * num * num / den.powi(3) * params.snr;
    if !(arg > 0.0) {
        return Err(CapacityError::NonPositiveLogArgument { d, arg });
    }
    Ok(u * arg.log2())
}

/// Far-field (Friis) capacity C_f(d) = log2(1 + c₀·L_tL_r·ρ/d²) (bits/use).
pub fn capacity_far(d: f64, params: &SystemParams) -> f64 {
    debug_assert!(d > 0.0);
    let snr_arg =
        params.c0 * params.aperture_tx_m * params.aperture_rx_m * params.snr / (d * d);
    (1.0 + snr_arg).log2()
}

/// Rate the scheduler assigns to an estimated distance.
///
/// Estimates below the Fraunhofer boundary get the near-field law, the
/// boundary itself and everything beyond get the far-field law. Estimates
/// below `d_min_m` are clamped to `d_min_m` before the near-field evaluation,
/// which keeps the rate bounded when ranging noise drives the estimate
/// toward zero.
pub fn scheduled_rate(d_hat: f64, params: &SystemParams) -> Result<f64, CapacityError> {
    if d_hat < 0.0 {
        return Err(CapacityError::NonPositiveDistance(d_hat));
    }
    let d_f = params.fraunhofer_distance();
    if d_hat < d_f {
        capacity_near(d_hat.max(params.d_min_m), params)
    } else {
        Ok(capacity_far(d_hat, params))
    }
}

/// Realized service for a slot with true distance `d` and estimate `d_hat`.
///
/// The comparison is `scheduled ≤ true_capacity` — a rate exactly equal to
/// capacity is delivered. Both regimes are compared by their actual numbers;
/// no cross-regime shortcut is assumed.
pub fn service_rate(d: f64, d_hat: f64, params: &SystemParams) -> Result<SlotRates, CapacityError> {
    let d_f = params.fraunhofer_distance();
    let true_capacity = if d < d_f {
        capacity_near(d, params)?
    } else {
        capacity_far(d, params)
    };
    let scheduled = scheduled_rate(d_hat, params)?;
    let reliable = scheduled <= true_capacity;
    Ok(SlotRates {
        scheduled_rate: scheduled,
        true_capacity,
        service: if reliable { scheduled } else { 0.0 },
        in_outage: !reliable && scheduled > 0.0,
    })
}

/// Grid report on the composite scheduled-rate curve.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    /// True iff the composite rate was nonincreasing over the whole grid,
    /// including the pair straddling the regime boundary.
    pub monotone_nonincreasing: bool,
    /// Largest observed increase between consecutive grid points (0 if none).
    pub max_increase: f64,
    /// Discontinuity C_n(d_F⁻) − C_f(d_F) at the regime boundary; positive
    /// means the rate steps down when crossing into the far field.
    pub boundary_jump: f64,
    /// Number of grid points evaluated.
    pub n_grid: usize,
    /// Grid pair (d_left, d_right) with the worst increase, if any.
    pub worst_pair: Option<(f64, f64)>,
}

/// Evaluates the scheduler's composite rate on an `n_grid`-point log-spaced
/// grid over [d_min, d_max] and reports whether it is monotone nonincreasing,
/// together with the size and sign of the jump at the Fraunhofer boundary.
///
/// The state-emptiness arguments (no outage when a near user is classified
/// far, guaranteed outage in the reverse case) hold exactly when this report
/// comes back monotone with a nonnegative jump, so run it once per
/// configuration instead of assuming.
pub fn check_rate_monotonicity(
    params: &SystemParams,
    n_grid: usize,
) -> Result<MonotonicityReport, CapacityError> {
    assert!(n_grid >= 2, "monotonicity grid needs at least two points");
    let d_f = params.fraunhofer_distance();
    let mut grid: Vec<f64> = Vec::with_capacity(n_grid + 2);
    let (lo, hi) = (params.d_min_m.ln(), params.d_max_m.ln());
    for i in 0..n_grid {
        let t = i as f64 / (n_grid - 1) as f64;
        grid.push((lo + t * (hi - lo)).exp());
    }
    // Straddle the boundary explicitly so the jump participates in the check.
    grid.push(d_f * (1.0 - 1e-12));
    grid.push(d_f);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut max_increase = 0.0f64;
    let mut worst_pair = None;
    let mut prev: Option<(f64, f64)> = None;
    for &d in &grid {
        let r = scheduled_rate(d, params)?;
        if let Some((pd, pr)) = prev {
            let increase = r - pr;
            if increase > max_increase {
                max_increase = increase;
                worst_pair = Some((pd, d));
            }
        }
        prev = Some((d, r));
    }
    let boundary_jump = capacity_near(d_f, params)? - capacity_far(d_f, params);
    Ok(MonotonicityReport {
        monotone_nonincreasing: max_increase <= 0.0,
        max_increase,
        boundary_jump,
        n_grid: grid.len(),
        worst_pair,
    })
}
