//! Time-of-arrival ranging: matched-filter delay estimation, Fisher
//! information, Cramér–Rao bounds for delay and distance, the
//! continuous-aperture extension, and the bridge from waveform/SNR to the
//! ranging standard deviation σ_d.
//!
//! The round-trip echo is y(t) = β·x(t − τ) + n(t) with τ = 2d/c; the
//! receiver correlates against the known unit-energy pulse and maps the
//! correlation peak to distance via d = c·τ/2. The delay CRLB is
//! 1/(8π²·γ·β₂) with γ = |β|²/σ_n² and β₂ = ∫f²|X(f)|²df the mean-square
//! bandwidth.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::SPEED_OF_LIGHT;

/// Correlation-grid refinement factor: the correlation is evaluated on a
/// spectrally zero-padded grid this many times finer than the sample grid
/// before the three-point parabolic interpolation. Without it, grid
/// quantization would dominate the variance at high SNR and the CRLB
/// comparison would be meaningless.
const CORR_OVERSAMPLE: usize = 16;

/// Ranging pulse shapes, each parameterized by one bandwidth number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// Flat spectrum over [−B/2, B/2].
    RectSpectrum,
    /// Root-raised-cosine pulse; `bandwidth_hz` is the occupied two-sided
    /// width (1+α)/T, so the spectrum again lives on [−B/2, B/2].
    RootRaisedCosine { rolloff: f64 },
    /// Gaussian spectrum; `bandwidth_hz` is the two-sided half-power width.
    GaussianPulse,
}

/// Unit-energy ranging pulse description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub shape: PulseShape,
    pub bandwidth_hz: f64,
}

/// Post-correlation SNR and spectral second moment of a ranging link.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RangingLink {
    /// γ = |β|²/σ_n².
    pub gamma: f64,
    /// β₂ = ∫ f²|X(f)|² df (Hz²).
    pub beta2_hz2: f64,
}

#[derive(Debug, Error)]
pub enum ToaError {
    #[error("waveform bandwidth must be positive, got {0} Hz")]
    BadBandwidth(f64),
    #[error("root-raised-cosine rolloff must lie in [0, 1], got {0}")]
    BadRolloff(f64),
    #[error("gamma must be positive (or infinite for the noiseless path), got {0}")]
    BadGamma(f64),
    #[error("undersampled: sample_rate_hz must be at least 4x the bandwidth, got fs = {fs} Hz for B = {bandwidth} Hz")]
    Undersampled { fs: f64, bandwidth: f64 },
    #[error("need at least 100 trials, got {0}")]
    TooFewTrials(usize),
    #[error("round-trip delay {tau_s} s does not fit the simulation window of {window_s} s")]
    DelayOutsideWindow { tau_s: f64, window_s: f64 },
    #[error("distance must be positive, got {0} m")]
    BadDistance(f64),
}

impl WaveformSpec {
    pub fn validate(self) -> Result<Self, ToaError> {
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(ToaError::BadBandwidth(self.bandwidth_hz));
        }
        if let PulseShape::RootRaisedCosine { rolloff } = self.shape {
            if !(0.0..=1.0).contains(&rolloff) {
                return Err(ToaError::BadRolloff(rolloff));
            }
        }
        Ok(self)
    }

    /// Energy spectral density |X(f)|² of the unit-energy pulse (1/Hz).
    pub fn spectral_density(&self, f: f64) -> f64 {
        let b = self.bandwidth_hz;
        match self.shape {
            PulseShape::RectSpectrum => {
                if f.abs() <= 0.5 * b {
                    1.0 / b
                } else {
                    0.0
                }
            }
            PulseShape::RootRaisedCosine { rolloff } => {
                // Raised-cosine energy density with symbol time T = (1+α)/B:
                // flat at T inside |f| ≤ (1−α)/(2T), cosine taper out to
                // (1+α)/(2T) = B/2.
                let t_sym = (1.0 + rolloff) / b;
                let f1 = (1.0 - rolloff) / (2.0 * t_sym);
                let f2 = (1.0 + rolloff) / (2.0 * t_sym);
                let af = f.abs();
                if af <= f1 {
                    t_sym
                } else if af < f2 && rolloff > 0.0 {
                    0.5 * t_sym
                        * (1.0 + (std::f64::consts::PI * t_sym / rolloff * (af - f1)).cos())
                } else {
                    0.0
                }
            }
            PulseShape::GaussianPulse => {
                // Half-power at ±B/2: σ_f = B/sqrt(8 ln 2).
                let sigma_f = b / (8.0 * std::f64::consts::LN_2).sqrt();
                (-0.5 * (f / sigma_f).powi(2)).exp()
                    / ((2.0 * std::f64::consts::PI).sqrt() * sigma_f)
            }
        }
    }
}

/// Mean-square bandwidth β₂ = ∫ f²|X(f)|² df, in closed form per shape.
pub fn mean_square_bandwidth(w: &WaveformSpec) -> f64 {
    let b = w.bandwidth_hz;
    match w.shape {
        PulseShape::RectSpectrum => b * b / 12.0,
        PulseShape::RootRaisedCosine { rolloff } => {
            // (1/12 + α²(1/4 − 2/π²))/T² with T = (1+α)/B.
            let t_sym = (1.0 + rolloff) / b;
            (1.0 / 12.0
                + rolloff * rolloff * (0.25 - 2.0 / (std::f64::consts::PI.powi(2))))
                / (t_sym * t_sym)
        }
        PulseShape::GaussianPulse => b * b / (8.0 * std::f64::consts::LN_2),
    }
}

impl RangingLink {
    pub fn from_waveform(gamma: f64, w: &WaveformSpec) -> Self {
        Self {
            gamma,
            beta2_hz2: mean_square_bandwidth(w),
        }
    }
}

/// CRLB on the round-trip delay estimate: Var(τ̂) ≥ 1/(8π²·γ·β₂) (s²).
pub fn crlb_toa_variance(link: &RangingLink) -> f64 {
    1.0 / (8.0 * std::f64::consts::PI.powi(2) * link.gamma * link.beta2_hz2)
}

/// CRLB on the distance estimate: (c/2)² · Var(τ̂) (m²).
pub fn crlb_distance_variance(link: &RangingLink) -> f64 {
    (SPEED_OF_LIGHT / 2.0).powi(2) * crlb_toa_variance(link)
}

/// Continuous-aperture distance CRLB: the narrowband aperture integration
/// divides the point bound by L_t·L_r with the lengths used as printed
/// (dimensionally irregular — the variance is divided by m²; see
/// [`crlb_distance_variance_aperture_normalized`] for the λ-normalized
/// diagnostic alternative).
pub fn crlb_distance_variance_aperture(link: &RangingLink, l_t: f64, l_r: f64) -> f64 {
    debug_assert!(l_t > 0.0 && l_r > 0.0);
    crlb_distance_variance(link) / (l_t * l_r)
}

/// Aperture CRLB with the lengths expressed in carrier wavelengths, so the
/// divisor (L_t/λ)(L_r/λ) is dimensionless.
pub fn crlb_distance_variance_aperture_normalized(
    link: &RangingLink,
    l_t: f64,
    l_r: f64,
    wavelength_m: f64,
) -> f64 {
    debug_assert!(l_t > 0.0 && l_r > 0.0 && wavelength_m > 0.0);
    crlb_distance_variance(link) / ((l_t / wavelength_m) * (l_r / wavelength_m))
}

/// σ_d implied by a ranging link: the square root of the (optionally
/// aperture-divided) distance CRLB. A bound-attaining, hence optimistic,
/// noise model; the result plugs directly into `SystemParams::sigma_d_m`.
pub fn sigma_d_from_link(link: &RangingLink, apertures: Option<(f64, f64)>) -> f64 {
    match apertures {
        None => crlb_distance_variance(link).sqrt(),
        Some((l_t, l_r)) => crlb_distance_variance_aperture(link, l_t, l_r).sqrt(),
    }
}

/// Relative standard error of a sample-variance estimate over `n_trials`
/// roughly Gaussian estimates, sqrt(2/(n−1)). Bound comparisons against the
/// CRLB must leave this much room: the matched-filter estimator is
/// asymptotically efficient, so its true variance sits essentially on the
/// bound and the sampled value fluctuates symmetrically around it.
pub fn variance_rel_std_err(n_trials: usize) -> f64 {
    (2.0 / (n_trials as f64 - 1.0)).sqrt()
}

/// Empirical matched-filter ToA estimation result.
#[derive(Debug, Clone, Serialize)]
pub struct ToaSimulation {
    pub bias_m: f64,
    pub variance_m2: f64,
    pub estimates_m: Vec<f64>,
    /// FFT length and sample rate actually used.
    pub n_fft: usize,
    pub sample_rate_hz: f64,
    /// Discrete pulse energy Σ|x|²Δt after grid normalization (should be 1).
    pub pulse_energy: f64,
}

/// Simulates ToA estimation by cross-correlation.
///
/// Synthesizes the sampled unit-energy pulse on an FFT grid, applies the
/// round-trip delay τ = 2d/c as a spectral phase ramp (fractional delays
/// included), adds complex white noise at the requested γ, cross-correlates
/// with the template on a 16× refined lag grid, and locates the peak with
/// three-point parabolic interpolation. `gamma = f64::INFINITY` runs the
/// noiseless path. Trials use independent ChaCha substreams of `seed` and
/// are reduced in trial order, so results are reproducible on any thread
/// count.
pub fn simulate_toa_estimation(
    w: &WaveformSpec,
    d: f64,
    gamma: f64,
    sample_rate_hz: f64,
    n_trials: usize,
    seed: u64,
) -> Result<ToaSimulation, ToaError> {
    let w = w.validate()?;
    if !(d > 0.0) {
        return Err(ToaError::BadDistance(d));
    }
    if !(gamma > 0.0) {
        return Err(ToaError::BadGamma(gamma));
    }
    if sample_rate_hz < 4.0 * w.bandwidth_hz {
        return Err(ToaError::Undersampled {
            fs: sample_rate_hz,
            bandwidth: w.bandwidth_hz,
        });
    }
    if n_trials < 100 {
        return Err(ToaError::TooFewTrials(n_trials));
    }

    let fs = sample_rate_hz;
    let tau = 2.0 * d / SPEED_OF_LIGHT;
    // Window: power-of-two FFT with the delay in the first quarter.
    let mut n_fft = 4096usize;
    while (n_fft as f64 / 4.0) < tau * fs {
        n_fft *= 2;
        if n_fft > (1 << 22) {
            return Err(ToaError::DelayOutsideWindow {
                tau_s: tau,
                window_s: (1 << 22) as f64 / fs,
            });
        }
    }
    let df = fs / n_fft as f64;

    // Unit-energy pulse spectrum on the DFT grid, normalized exactly so the
    // discretized energy Σ|X|²·df = 1.
    let mut spectrum: Vec<Complex64> = (0..n_fft)
        .map(|k| {
            let f = if k <= n_fft / 2 {
                k as f64 * df
            } else {
                (k as f64 - n_fft as f64) * df
            };
            Complex64::new(w.spectral_density(f).sqrt(), 0.0)
        })
        .collect();
    let energy_raw: f64 = spectrum.iter().map(|x| x.norm_sqr()).sum::<f64>() * df;
    let scale = 1.0 / energy_raw.sqrt();
    for x in &mut spectrum {
        *x *= scale;
    }
    let pulse_energy: f64 = spectrum.iter().map(|x| x.norm_sqr()).sum::<f64>() * df;

    // Delayed signal spectrum (DFT convention: multiply by fs to move from
    // continuous spectra to DFT coefficients; the factor cancels in the
    // peak-to-noise ratio and is kept for unit coherence).
    let delayed: Vec<Complex64> = (0..n_fft)
        .map(|k| {
            let f = if k <= n_fft / 2 {
                k as f64 * df
            } else {
                (k as f64 - n_fft as f64) * df
            };
            spectrum[k] * fs * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * tau)
        })
        .collect();
    let template: Vec<Complex64> = spectrum.iter().map(|x| x * fs).collect();

    // Complex AWGN: per-sample variance N0·fs with N0 = 1/γ (|β| = 1); its
    // DFT bins are i.i.d. with variance n·N0·fs.
    let noise_bin_sigma = if gamma.is_finite() {
        (n_fft as f64 * fs / gamma / 2.0).sqrt()
    } else {
        0.0
    };

    let m = n_fft * CORR_OVERSAMPLE;
    let planner_fft = {
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_inverse(m)
    };

    let estimates_m: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            // Correlation spectrum Y·conj(X), zero-padded to the fine grid.
            let mut corr = vec![Complex64::new(0.0, 0.0); m];
            let half = n_fft / 2;
            for k in 0..n_fft {
                if spectrum[k].re == 0.0 {
                    // Outside the occupied band the template is zero, so the
                    // product is zero with or without noise; skipping keeps
                    // the noise draw count tied to occupied bins only.
                    continue;
                }
                let noise = if noise_bin_sigma > 0.0 {
                    let re: f64 = rng.sample(rand_distr::StandardNormal);
                    let im: f64 = rng.sample(rand_distr::StandardNormal);
                    Complex64::new(re, im) * noise_bin_sigma
                } else {
                    Complex64::new(0.0, 0.0)
                };
                let y = delayed[k] + noise;
                let c = y * template[k].conj();
                let dest = if k < half { k } else { m - (n_fft - k) };
                corr[dest] = c;
            }
            planner_fft.process(&mut corr);

            // Peak search plus three-point parabolic refinement on |r|.
            let mut best = 0usize;
            let mut best_val = 0.0f64;
            for (idx, v) in corr.iter().enumerate() {
                let mag = v.norm();
                if mag > best_val {
                    best_val = mag;
                    best = idx;
                }
            }
            let y0 = corr[(best + m - 1) % m].norm();
            let y1 = best_val;
            let y2 = corr[(best + 1) % m].norm();
            let denom = y0 - 2.0 * y1 + y2;
            let delta = if denom != 0.0 {
                (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let mut lag = best as f64 + delta;
            if lag > m as f64 / 2.0 {
                lag -= m as f64;
            }
            let tau_hat = lag / (fs * CORR_OVERSAMPLE as f64);
            SPEED_OF_LIGHT * tau_hat / 2.0
        })
        .collect();

    let n = estimates_m.len() as f64;
    let mean = estimates_m.iter().sum::<f64>() / n;
    let variance_m2 = estimates_m
        .iter()
        .map(|e| (e - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    Ok(ToaSimulation {
        bias_m: mean - d,
        variance_m2,
        estimates_m,
        n_fft,
        sample_rate_hz: fs,
        pulse_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_1d, QuadratureSettings};

    fn rect(b: f64) -> WaveformSpec {
        WaveformSpec {
            shape: PulseShape::RectSpectrum,
            bandwidth_hz: b,
        }
    }

    #[test]
    fn rect_beta2_is_b_squared_over_twelve() {
        let b = 100e6;
        let beta2 = mean_square_bandwidth(&rect(b));
        assert!((beta2 - b * b / 12.0).abs() / beta2 < 1e-12);
        // Dilation: doubling B quadruples β₂.
        let beta2_2 = mean_square_bandwidth(&rect(2.0 * b));
        assert!((beta2_2 / beta2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn beta2_closed_forms_match_spectral_quadrature() {
        let set = QuadratureSettings::default();
        for w in [
            rect(3.0e6),
            WaveformSpec {
                shape: PulseShape::RootRaisedCosine { rolloff: 0.25 },
                bandwidth_hz: 5.0e6,
            },
            WaveformSpec {
                shape: PulseShape::RootRaisedCosine { rolloff: 0.8 },
                bandwidth_hz: 2.0e6,
            },
            WaveformSpec {
                shape: PulseShape::GaussianPulse,
                bandwidth_hz: 4.0e6,
            },
        ] {
            // Scale to unit frequency so the quadrature domain is O(1).
            let b = w.bandwidth_hz;
            let hi = match w.shape {
                PulseShape::GaussianPulse => 8.0,
                _ => 0.5,
            };
            let numeric = integrate_1d(
                |u| {
                    let f = u * b;
                    f * f * w.spectral_density(f) * b
                },
                -hi,
                hi,
                set,
            )
            .unwrap()
            .value;
            let closed = mean_square_bandwidth(&w);
            assert!(
                (numeric - closed).abs() / closed < 1e-9,
                "{:?}: numeric {numeric} vs closed {closed}",
                w.shape
            );
            // Unit energy of the spectral density itself.
            let mass = integrate_1d(|u| w.spectral_density(u * b) * b, -hi, hi, set)
                .unwrap()
                .value;
            assert!((mass - 1.0).abs() < 1e-9, "{:?} energy {mass}", w.shape);
        }
    }

    #[test]
    fn crlb_formulas() {
        // Normalization point: γ = 1, β₂ = 1/(8π²) → Var(τ̂) = 1.
        let link = RangingLink {
            gamma: 1.0,
            beta2_hz2: 1.0 / (8.0 * std::f64::consts::PI.powi(2)),
        };
        assert!((crlb_toa_variance(&link) - 1.0).abs() < 1e-12);
        // Doubling γ halves the bound.
        let link2 = RangingLink {
            gamma: 2.0,
            ..link
        };
        assert!((crlb_toa_variance(&link2) - 0.5).abs() < 1e-12);
        // Pinned value: B = 100 MHz rect, γ = 100.
        let pinned = RangingLink::from_waveform(100.0, &rect(100e6));
        let vt = crlb_toa_variance(&pinned);
        assert!((vt - 1.519_817_754_635_066_6e-19).abs() / vt < 1e-12);
        let vd = crlb_distance_variance(&pinned);
        assert!((vd - 3.414_860_194_286_070_3e-3).abs() / vd < 1e-12);
        assert!((vd - (SPEED_OF_LIGHT / 2.0).powi(2) * vt).abs() < 1e-18);
    }

    #[test]
    fn aperture_variants() {
        let link = RangingLink::from_waveform(50.0, &rect(10e6));
        let point = crlb_distance_variance(&link);
        assert_eq!(crlb_distance_variance_aperture(&link, 1.0, 1.0), point);
        let gained = crlb_distance_variance_aperture(&link, 10.0, 10.0);
        assert!((point / gained - 100.0).abs() < 1e-9);
        let lam = 0.01;
        let norm = crlb_distance_variance_aperture_normalized(&link, 1.0, 1.0, lam);
        assert!((norm - point * lam * lam).abs() / norm < 1e-12);
    }

    #[test]
    fn sigma_d_bridge() {
        let link = RangingLink {
            gamma: 1.0,
            beta2_hz2: (SPEED_OF_LIGHT / 2.0).powi(2)
                / (8.0 * std::f64::consts::PI.powi(2) * 25.0),
        };
        // Distance variance 25 m² → σ_d = 5 m.
        assert!((sigma_d_from_link(&link, None) - 5.0).abs() < 1e-9);
        // Monotone decreasing in bandwidth.
        let mut prev = f64::INFINITY;
        for b in [1e6, 5e6, 2e7, 1e8] {
            let s = sigma_d_from_link(&RangingLink::from_waveform(100.0, &rect(b)), None);
            assert!(s < prev);
            prev = s;
        }
        // Feeding σ_d = 5 m back through the bound gives the implied γ·β₂.
        let implied = (SPEED_OF_LIGHT / 2.0).powi(2) / (8.0 * std::f64::consts::PI.powi(2) * 25.0);
        let roundtrip = sigma_d_from_link(
            &RangingLink {
                gamma: 1.0,
                beta2_hz2: implied,
            },
            None,
        );
        assert!((roundtrip - 5.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_estimate_hits_interpolation_resolution() {
        let w = rect(100e6);
        let fs = 4.0 * w.bandwidth_hz;
        let sim = simulate_toa_estimation(&w, 30.0, f64::INFINITY, fs, 100, 1).unwrap();
        let tol = SPEED_OF_LIGHT / (2.0 * fs) * 1e-2;
        assert!(
            sim.bias_m.abs() < tol,
            "noiseless bias {} m exceeds {tol} m",
            sim.bias_m
        );
        assert!(sim.variance_m2 < 1e-20);
        assert!((sim.pulse_energy - 1.0).abs() < 1e-9);
    }

    #[test]
    fn estimator_variance_respects_crlb() {
        // One-sided test at three standard errors of the variance estimate:
        // the estimator attains the bound at high SNR, so the sampled
        // variance sits on it up to sqrt(2/(n−1)) relative noise.
        let w = rect(100e6);
        let fs = 4.0 * w.bandwidth_hz;
        let trials = 400;
        let floor = 1.0 - 3.0 * variance_rel_std_err(trials);
        for gamma in [10.0, 100.0, 1000.0] {
            let sim = simulate_toa_estimation(&w, 30.0, gamma, fs, trials, 2024).unwrap();
            let crlb = crlb_distance_variance(&RangingLink::from_waveform(gamma, &w));
            assert!(
                sim.variance_m2 >= crlb * floor,
                "γ = {gamma}: variance {} significantly below CRLB {crlb}",
                sim.variance_m2
            );
        }
    }

    #[test]
    fn near_efficiency_at_high_snr() {
        let w = rect(100e6);
        let fs = 4.0 * w.bandwidth_hz;
        let gamma = 1000.0;
        let trials = 2000;
        let sim = simulate_toa_estimation(&w, 30.0, gamma, fs, trials, 7).unwrap();
        let crlb = crlb_distance_variance(&RangingLink::from_waveform(gamma, &w));
        let ratio = sim.variance_m2 / crlb;
        let floor = 1.0 - 3.0 * variance_rel_std_err(trials);
        assert!(
            ratio >= floor && ratio <= 3.0,
            "variance/CRLB ratio {ratio} outside [{floor}, 3]"
        );
    }

    #[test]
    fn variance_nonincreasing_in_gamma() {
        // Common random numbers: the same seed across γ values.
        let w = rect(50e6);
        let fs = 4.0 * w.bandwidth_hz;
        let mut prev = f64::INFINITY;
        for gamma in [20.0, 200.0, 2000.0] {
            let sim = simulate_toa_estimation(&w, 20.0, gamma, fs, 300, 99).unwrap();
            assert!(
                sim.variance_m2 <= prev,
                "variance grew from {prev} at γ = {gamma}"
            );
            prev = sim.variance_m2;
        }
    }

    #[test]
    fn simulation_rejects_bad_configs() {
        let w = rect(100e6);
        assert!(matches!(
            simulate_toa_estimation(&w, 30.0, 10.0, 2.0 * w.bandwidth_hz, 200, 1),
            Err(ToaError::Undersampled { .. })
        ));
        assert!(matches!(
            simulate_toa_estimation(&w, 30.0, 10.0, 4.0 * w.bandwidth_hz, 10, 1),
            Err(ToaError::TooFewTrials(_))
        ));
        assert!(matches!(
            WaveformSpec {
                shape: PulseShape::RootRaisedCosine { rolloff: 1.5 },
                bandwidth_hz: 1e6
            }
            .validate(),
            Err(ToaError::BadRolloff(_))
        ));
    }

    #[test]
    fn simulation_is_deterministic() {
        let w = rect(100e6);
        let fs = 4.0 * w.bandwidth_hz;
        let a = simulate_toa_estimation(&w, 30.0, 100.0, fs, 150, 5).unwrap();
        let b = simulate_toa_estimation(&w, 30.0, 100.0, fs, 150, 5).unwrap();
        assert_eq!(a.bias_m.to_bits(), b.bias_m.to_bits());
        assert_eq!(a.variance_m2.to_bits(), b.variance_m2.to_bits());
    }
}
