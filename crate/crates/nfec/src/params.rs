//! System configuration, unit conventions, parameter validation, and the
//! near-field/far-field boundary geometry.
//!
//! All quantities are SI: lengths in metres, power in watts, rates in bits per
//! channel use. The QoS exponent θ is per bit of service.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Propagation speed used for wavelength and ranging conversions (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// How the eight state probabilities are weighted and normalized.
///
/// `PaperLiteral` keeps the printed 1/4 prefactor on every unconditional
/// state integral together with the regime-conditional densities, then
/// renormalizes the eight-vector to sum to one. `GeometricPrior` replaces the
/// prefactors with the area-based regime priors induced by the uniform cell
/// placement; the vector then sums to one without renormalization and is the
/// mode the Monte Carlo sampling model actually reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbMode {
    PaperLiteral,
    GeometricPrior,
}

/// How per-state moment generating functions are normalized.
///
/// `PaperLiteral` evaluates the printed integrals with a plain Gaussian weight
/// and no state normalization. `Normalized` divides by the truncation mass and
/// the state probability so that Σᵢ Pᵢ·Mᵢ(θ) equals E[e^{-θs}] exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgfMode {
    PaperLiteral,
    Normalized,
}

/// Upper integration limit for the far-field reliable-state MGF regions.
///
/// `DMax` stops at the cell edge as printed; `Extended` integrates to
/// d + 10σ_d, covering the estimates that fall beyond the cell. The
/// `Normalized` MGF mode needs `Extended` for the distribution identity
/// Σᵢ Pᵢ·Mᵢ = E[e^{-θs}] to hold; the difference between the two limits is a
/// reported diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FfMgfUpper {
    DMax,
    Extended,
}

/// Full physical and statistical configuration of the link.
///
/// Defaults reproduce the evaluation setup: 28 GHz carrier, continuous
/// apertures L_t = 100λ and L_r = 25λ, a [1, 500] m annulus, σ_d = 5 m, and
/// an SNR anchored so that the far-field capacity at the cell edge is exactly
/// one bit per channel use (ρ = d_max²/(c₀·L_t·L_r), N₀ = P/ρ). Neither c₀
/// nor N₀ has a canonical value in the underlying model; both are plain
/// configuration fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Carrier wavelength λ (m).
    pub wavelength_m: f64,
    /// Transmit aperture length L_t (m); must satisfy L_t ≥ L_r.
    pub aperture_tx_m: f64,
    /// Receive aperture length L_r (m).
    pub aperture_rx_m: f64,
    /// Transmit power P (W).
    pub tx_power_w: f64,
    /// Noise power spectral density N₀; must satisfy ρ = P/N₀.
    pub noise_psd: f64,
    /// Signal-to-noise ratio ρ = P/N₀ (linear).
    pub snr: f64,
    /// Aperture/pattern constant c₀ multiplying every SNR argument.
    pub c0: f64,
    /// Inner radius of the cell annulus (m); strictly positive.
    pub d_min_m: f64,
    /// Outer radius of the cell annulus (m).
    pub d_max_m: f64,
    /// Ranging noise standard deviation σ_d (m).
    pub sigma_d_m: f64,
    /// QoS exponent θ (per bit of service).
    pub theta: f64,
    /// State-probability convention.
    pub prob_mode: ProbMode,
    /// MGF normalization convention.
    pub mgf_mode: MgfMode,
    /// Far-field MGF integration-limit choice.
    pub ff_mgf_upper: FfMgfUpper,
}

impl Default for SystemParams {
    fn default() -> Self {
        let wavelength_m = SPEED_OF_LIGHT / 28e9;
        let aperture_tx_m = 100.0 * wavelength_m;
        let aperture_rx_m = 25.0 * wavelength_m;
        let c0 = 1.0;
        let d_max_m = 500.0;
        // SNR anchor: C_f(d_max) = log2(1 + c0·L_t·L_r·ρ/d_max²) = 1 bit.
        let snr = d_max_m * d_max_m / (c0 * aperture_tx_m * aperture_rx_m);
        let tx_power_w = 1.0;
        Self {
            wavelength_m,
            aperture_tx_m,
            aperture_rx_m,
            tx_power_w,
            noise_psd: tx_power_w / snr,
            snr,
            c0,
            d_min_m: 1.0,
            d_max_m,
            sigma_d_m: 5.0,
            theta: 0.01,
            prob_mode: ProbMode::GeometricPrior,
            mgf_mode: MgfMode::Normalized,
            ff_mgf_upper: FfMgfUpper::Extended,
        }
    }
}

/// One distinct variant per violated invariant, naming the offending field.
#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("field {field} must be finite, got {value}")]
    NotFinite { field: &'static str, value: f64 },
    #[error("wavelength_m must be positive, got {0}")]
    Wavelength(f64),
    #[error("aperture ordering: requires aperture_tx_m >= aperture_rx_m > 0, got tx = {tx}, rx = {rx}")]
    ApertureOrdering { tx: f64, rx: f64 },
    #[error("empty support: requires 0 < d_min_m < d_max_m, got d_min_m = {d_min}, d_max_m = {d_max}")]
    EmptySupport { d_min: f64, d_max: f64 },
    #[error("sigma_d_m must be nonnegative, got {0}")]
    SigmaD(f64),
    #[error("tx_power_w must be positive, got {0}")]
    TxPower(f64),
    #[error("noise_psd must be positive, got {0}")]
    NoisePsd(f64),
    #[error("snr must be positive, got {0}")]
    Snr(f64),
    #[error("snr must equal tx_power_w/noise_psd: snr = {snr}, tx_power_w/noise_psd = {ratio}")]
    SnrInconsistent { snr: f64, ratio: f64 },
    #[error("c0 must be positive, got {0}")]
    C0(f64),
    #[error("theta must be positive, got {0}")]
    Theta(f64),
    #[error("fraunhofer distance {d_f} m must lie strictly inside the annulus ({d_min}, {d_max}) m so both regimes are non-empty")]
    BoundaryOutsideAnnulus { d_f: f64, d_min: f64, d_max: f64 },
}

impl SystemParams {
    /// Fraunhofer (Rayleigh) boundary 2·L_t·L_r/λ between the near and far
    /// field (m).
    pub fn fraunhofer_distance(&self) -> f64 {
        2.0 * self.aperture_tx_m * self.aperture_rx_m / self.wavelength_m
    }

    /// Checks every type invariant and returns the parameters unchanged on
    /// success. Validation is idempotent; validated parameters are immutable
    /// by convention and safe to share across threads.
    pub fn validate(self) -> Result<Self, ParamError> {
        let finite_fields = [
            ("wavelength_m", self.wavelength_m),
            ("aperture_tx_m", self.aperture_tx_m),
            ("aperture_rx_m", self.aperture_rx_m),
            ("tx_power_w", self.tx_power_w),
            ("noise_psd", self.noise_psd),
            ("snr", self.snr),
            ("c0", self.c0),
            ("d_min_m", self.d_min_m),
            ("d_max_m", self.d_max_m),
            ("sigma_d_m", self.sigma_d_m),
            ("theta", self.theta),
        ];
        for (field, value) in finite_fields {
            if !value.is_finite() {
                return Err(ParamError::NotFinite { field, value });
            }
        }
        if self.wavelength_m <= 0.0 {
            return Err(ParamError::Wavelength(self.wavelength_m));
        }
        if !(self.aperture_rx_m > 0.0 && self.aperture_tx_m >= self.aperture_rx_m) {
            return Err(ParamError::ApertureOrdering {
                tx: self.aperture_tx_m,
                rx: self.aperture_rx_m,
            });
        }
        // d_min_m = 0 is rejected here: the near-field coupling factor
        // diverges at the origin, and the radial density gives it zero mass
        // anyway, so a strictly positive inner radius keeps every integrand
        // finite without changing any result.
        if !(self.d_min_m > 0.0 && self.d_min_m < self.d_max_m) {
            return Err(ParamError::EmptySupport {
                d_min: self.d_min_m,
                d_max: self.d_max_m,
            });
        }
        if self.sigma_d_m < 0.0 {
            return Err(ParamError::SigmaD(self.sigma_d_m));
        }
        if self.tx_power_w <= 0.0 {
            return Err(ParamError::TxPower(self.tx_power_w));
        }
        if self.noise_psd <= 0.0 {
            return Err(ParamError::NoisePsd(self.noise_psd));
        }
        if self.snr <= 0.0 {
            return Err(ParamError::Snr(self.snr));
        }
        let ratio = self.tx_power_w / self.noise_psd;
        if (self.snr - ratio).abs() > 1e-6 * self.snr.abs().max(ratio.abs()) {
            return Err(ParamError::SnrInconsistent {
                snr: self.snr,
                ratio,
            });
        }
        if self.c0 <= 0.0 {
            return Err(ParamError::C0(self.c0));
        }
        if self.theta <= 0.0 {
            return Err(ParamError::Theta(self.theta));
        }
        let d_f = self.fraunhofer_distance();
        if !(d_f > self.d_min_m && d_f < self.d_max_m) {
            return Err(ParamError::BoundaryOutsideAnnulus {
                d_f,
                d_min: self.d_min_m,
                d_max: self.d_max_m,
            });
        }
        Ok(self)
    }
}
