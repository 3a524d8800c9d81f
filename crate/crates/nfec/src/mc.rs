//! Seeded Monte Carlo oracle for every analytical quantity, plus a queue
//! simulator that validates the delay-tail semantics of the effective
//! capacity.
//!
//! Slots are embarrassingly parallel. Reproducibility across thread counts
//! comes from fixed substreams: the sample budget is split into `batch`
//! equal chunks, chunk k runs on ChaCha stream k of the seed, and chunk
//! results are reduced in chunk order regardless of which thread finished
//! first. The chunks double as the batches of the batch-means standard
//! error.
//!
//! States are assigned from first principles — true regime, decided regime,
//! and the actual rate-versus-capacity comparison — never from the
//! empty-state or always-outage shortcuts, so the simulator can falsify
//! those claims for geometries where they do not hold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::capacity::{service_rate, CapacityError, Regime, SlotRates};
use crate::ec::{effective_capacity, EcError};
use crate::markov::ServiceState;
use crate::params::SystemParams;
use crate::ranging::{classify, sample_distance, sample_estimate};

/// Sample budget and reproducibility configuration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    /// Number of batches for the batch-means standard error; must divide
    /// `n_samples`. Each batch is one deterministic RNG substream.
    pub batch: u64,
}

impl McConfig {
    /// `batch` defaults to 100 (or to `n_samples` when fewer samples than
    /// that are requested).
    pub fn new(n_samples: u64, seed: u64) -> Self {
        let batch = if n_samples < 100 { n_samples } else { 100 };
        Self {
            n_samples,
            seed,
            batch,
        }
    }

    pub fn with_batch(self, batch: u64) -> Self {
        Self { batch, ..self }
    }

    fn validate(self) -> Result<Self, McError> {
        if self.n_samples < 1 {
            return Err(McError::EmptySampleBudget);
        }
        if self.batch < 1 || self.n_samples % self.batch != 0 {
            return Err(McError::BatchMismatch {
                n_samples: self.n_samples,
                batch: self.batch,
            });
        }
        Ok(self)
    }
}

/// Point estimate with its standard error and 95% confidence interval
/// (value ± 1.96·std_err).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
}

impl McEstimate {
    fn new(value: f64, std_err: f64) -> Self {
        Self {
            value,
            std_err,
            ci95: (value - 1.96 * std_err, value + 1.96 * std_err),
        }
    }
}

/// One simulated slot.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlotOutcome {
    pub d: f64,
    pub d_hat: f64,
    pub state: ServiceState,
    pub rates: SlotRates,
}

#[derive(Debug, Error)]
pub enum McError {
    #[error("n_samples must be at least 1")]
    EmptySampleBudget,
    #[error("batch must divide n_samples, got n_samples = {n_samples}, batch = {batch}")]
    BatchMismatch { n_samples: u64, batch: u64 },
    #[error("arrival_fraction must be finite and nonnegative, got {0}")]
    BadArrivalFraction(f64),
    #[error("queue validation horizon must be at least 100000 slots, got {0}")]
    HorizonTooShort(u64),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Ec(#[from] Box<EcError>),
}

/// Simulates one slot: radial placement, truncated-Gaussian estimate, regime
/// decision, and the realized rates.
pub fn simulate_slot<R: rand::Rng + ?Sized>(
    params: &SystemParams,
    rng: &mut R,
) -> Result<SlotOutcome, McError> {
    let d = sample_distance(params.d_min_m, params.d_max_m, rng);
    let d_hat = sample_estimate(d, params.sigma_d_m, rng);
    let d_f = params.fraunhofer_distance();
    let rates = service_rate(d, d_hat, params)?;
    let state = ServiceState::from_flags(
        d < d_f,
        classify(d_hat, d_f) == Regime::NearField,
        !rates.in_outage,
    );
    Ok(SlotOutcome {
        d,
        d_hat,
        state,
        rates,
    })
}

/// Everything one Monte Carlo pass measures, for any number of θ values at
/// once. Identical (seed, params, thetas) give bit-identical summaries on
/// any thread count.
#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub n_samples: u64,
    pub thetas: Vec<f64>,
    /// Empirical state frequencies with binomial standard errors.
    pub state_probs: [McEstimate; 8],
    /// Joint misclassification frequencies Pr(error ∧ regime).
    pub false_far: McEstimate,
    pub false_near: McEstimate,
    /// Mean realized service (batch-means standard error).
    pub mean_service: McEstimate,
    /// Per-θ empirical EC = −(1/θ)·ln(mean e^{−θ·service}) with the standard
    /// error of the mean propagated through the log (delta method).
    pub ec: Vec<McEstimate>,
    /// Per-θ, per-state conditional averages of e^{−θ·service}; `None` when
    /// the state was never visited.
    pub state_mgfs: Vec<[Option<McEstimate>; 8]>,
}

#[derive(Clone)]
struct ChunkAccum {
    n: u64,
    counts: [u64; 8],
    service_sum: f64,
    exp_sums: Vec<f64>,
    exp_state_sums: Vec<[f64; 8]>,
    exp_state_sq_sums: Vec<[f64; 8]>,
}

impl ChunkAccum {
    fn new(n_thetas: usize) -> Self {
        Self {
            n: 0,
            counts: [0; 8],
            service_sum: 0.0,
            exp_sums: vec![0.0; n_thetas],
            exp_state_sums: vec![[0.0; 8]; n_thetas],
            exp_state_sq_sums: vec![[0.0; 8]; n_thetas],
        }
    }
}

fn run_chunk(
    params: &SystemParams,
    thetas: &[f64],
    seed: u64,
    chunk_index: u64,
    chunk_size: u64,
) -> Result<ChunkAccum, McError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk_index);
    let mut acc = ChunkAccum::new(thetas.len());
    for _ in 0..chunk_size {
        let slot = simulate_slot(params, &mut rng)?;
        acc.n += 1;
        let s = slot.state.index();
        acc.counts[s] += 1;
        acc.service_sum += slot.rates.service;
        for (k, &theta) in thetas.iter().enumerate() {
            let e = (-theta * slot.rates.service).exp();
            acc.exp_sums[k] += e;
            acc.exp_state_sums[k][s] += e;
            acc.exp_state_sq_sums[k][s] += e * e;
        }
    }
    Ok(acc)
}

/// Runs the full Monte Carlo pass. `thetas` may be empty when only state and
/// error frequencies are needed.
pub fn run_mc(
    params: &SystemParams,
    thetas: &[f64],
    mc: McConfig,
) -> Result<McSummary, McError> {
    let mc = mc.validate()?;
    let chunk_size = mc.n_samples / mc.batch;
    let chunks: Vec<ChunkAccum> = (0..mc.batch)
        .into_par_iter()
        .map(|k| run_chunk(params, thetas, mc.seed, k, chunk_size))
        .collect::<Result<Vec<_>, _>>()?;

    // Deterministic reduction in chunk order.
    let n = mc.n_samples as f64;
    let n_batches = mc.batch as f64;
    let mut counts = [0u64; 8];
    let mut service_sum = 0.0;
    let mut exp_sums = vec![0.0f64; thetas.len()];
    let mut exp_state_sums = vec![[0.0f64; 8]; thetas.len()];
    let mut exp_state_sq_sums = vec![[0.0f64; 8]; thetas.len()];
    for c in &chunks {
        for i in 0..8 {
            counts[i] += c.counts[i];
        }
        service_sum += c.service_sum;
        for k in 0..thetas.len() {
            exp_sums[k] += c.exp_sums[k];
            for i in 0..8 {
                exp_state_sums[k][i] += c.exp_state_sums[k][i];
                exp_state_sq_sums[k][i] += c.exp_state_sq_sums[k][i];
            }
        }
    }

    let state_probs = std::array::from_fn(|i| {
        let p = counts[i] as f64 / n;
        McEstimate::new(p, (p * (1.0 - p) / n).sqrt())
    });
    // Misclassification events are joint with the true regime: false-far is
    // states 3 and 4, false-near is states 5 and 6.
    let ff_count = counts[2] + counts[3];
    let fn_count = counts[4] + counts[5];
    let p_ff = ff_count as f64 / n;
    let p_fn = fn_count as f64 / n;
    let false_far = McEstimate::new(p_ff, (p_ff * (1.0 - p_ff) / n).sqrt());
    let false_near = McEstimate::new(p_fn, (p_fn * (1.0 - p_fn) / n).sqrt());

    let batch_se = |batch_means: &[f64], overall: f64| -> f64 {
        if batch_means.len() < 2 {
            return f64::INFINITY;
        }
        let var = batch_means
            .iter()
            .map(|m| (m - overall).powi(2))
            .sum::<f64>()
            / (n_batches - 1.0);
        (var / n_batches).sqrt()
    };

    let mean_service_val = service_sum / n;
    let service_means: Vec<f64> = chunks
        .iter()
        .map(|c| c.service_sum / chunk_size as f64)
        .collect();
    let mean_service = McEstimate::new(mean_service_val, batch_se(&service_means, mean_service_val));

    let mut ec = Vec::with_capacity(thetas.len());
    let mut state_mgfs = Vec::with_capacity(thetas.len());
    for (k, &theta) in thetas.iter().enumerate() {
        let mgf_mean = exp_sums[k] / n;
        let mgf_means: Vec<f64> = chunks
            .iter()
            .map(|c| c.exp_sums[k] / chunk_size as f64)
            .collect();
        let mgf_se = batch_se(&mgf_means, mgf_mean);
        // Delta method through EC = −ln(m)/θ: |dEC/dm| = 1/(θ·m).
        ec.push(McEstimate::new(
            -mgf_mean.ln() / theta,
            mgf_se / (theta * mgf_mean),
        ));

        let per_state = std::array::from_fn(|i| {
            if counts[i] == 0 {
                return None;
            }
            let cn = counts[i] as f64;
            let mean = exp_state_sums[k][i] / cn;
            let var = (exp_state_sq_sums[k][i] / cn - mean * mean).max(0.0);
            let se = if counts[i] > 1 {
                (var / (cn - 1.0)).sqrt()
            } else {
                f64::INFINITY
            };
            Some(McEstimate::new(mean, se))
        });
        state_mgfs.push(per_state);
    }

    Ok(McSummary {
        n_samples: mc.n_samples,
        thetas: thetas.to_vec(),
        state_probs,
        false_far,
        false_near,
        mean_service,
        ec,
        state_mgfs,
    })
}

/// Empirical effective capacity at one θ.
pub fn estimate_ec(params: &SystemParams, theta: f64, mc: McConfig) -> Result<McEstimate, McError> {
    Ok(run_mc(params, &[theta], mc)?.ec[0])
}

/// Empirical state frequencies with binomial standard errors.
pub fn estimate_state_probs(
    params: &SystemParams,
    mc: McConfig,
) -> Result<[McEstimate; 8], McError> {
    Ok(run_mc(params, &[], mc)?.state_probs)
}

/// Empirical joint misclassification probabilities (false-far, false-near).
pub fn estimate_error_probs(
    params: &SystemParams,
    mc: McConfig,
) -> Result<(McEstimate, McEstimate), McError> {
    let s = run_mc(params, &[], mc)?;
    Ok((s.false_far, s.false_near))
}

/// Empirical mean service rate.
pub fn estimate_mean_service(params: &SystemParams, mc: McConfig) -> Result<McEstimate, McError> {
    Ok(run_mc(params, &[], mc)?.mean_service)
}

/// Queue-tail report from simulating Q_{k+1} = max(Q_k + a − s_k, 0).
#[derive(Debug, Clone, Serialize)]
pub struct QueueTailReport {
    /// Constant arrival rate a = arrival_fraction · EC(θ) (bits/use).
    pub arrival_rate: f64,
    /// The analytical EC(θ) the arrival was derived from.
    pub ec_bits_per_use: f64,
    pub theta: f64,
    pub arrival_fraction: f64,
    pub horizon: u64,
    /// Empirical mean service over the run.
    pub mean_service: f64,
    /// False when the arrival rate exceeds the mean service (positive drift:
    /// the queue grows linearly and has no stationary tail).
    pub stable: bool,
    /// Largest queue length seen.
    pub max_queue: f64,
    /// Sampled complementary CDF points (q, Pr(Q > q)) after burn-in.
    pub tail: Vec<(f64, f64)>,
    /// Least-squares slope of ln Pr(Q > q) against q over the fitted range;
    /// `None` when the tail is degenerate (empty queue or unstable drift).
    pub fitted_slope: Option<f64>,
    /// For arrival_fraction ≤ 0.95: whether the fitted slope is at most
    /// −0.9·θ, i.e. the tail decays at least about as fast as e^{−θq}.
    pub contract_satisfied: Option<bool>,
}

/// Simulates the constant-arrival queue at a = arrival_fraction · EC(θ) and
/// fits the exponential decay rate of the stationary queue tail. Queue
/// lengths are in bits per channel use — the service unit; no slot duration
/// exists in the model, so tails are reported in queue-length units rather
/// than seconds.
pub fn queue_delay_validation(
    params: &SystemParams,
    theta: f64,
    arrival_fraction: f64,
    horizon: u64,
    seed: u64,
) -> Result<QueueTailReport, McError> {
    if !arrival_fraction.is_finite() || arrival_fraction < 0.0 {
        return Err(McError::BadArrivalFraction(arrival_fraction));
    }
    if horizon < 100_000 {
        return Err(McError::HorizonTooShort(horizon));
    }
    let ec = effective_capacity(theta, params)
        .map_err(Box::new)?
        .ec_bits_per_use;
    let arrival = arrival_fraction * ec;

    // Dedicated stream far away from the estimator chunks.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);

    let burn_in = (horizon / 10) as usize;
    let mut q = 0.0f64;
    let mut max_queue = 0.0f64;
    let mut service_sum = 0.0f64;
    let mut samples: Vec<f64> = Vec::with_capacity(horizon as usize - burn_in);
    for k in 0..horizon {
        let slot = simulate_slot(params, &mut rng)?;
        service_sum += slot.rates.service;
        q = (q + arrival - slot.rates.service).max(0.0);
        if q > max_queue {
            max_queue = q;
        }
        if k as usize >= burn_in {
            samples.push(q);
        }
    }
    let mean_service = service_sum / horizon as f64;
    let stable = arrival <= mean_service;

    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let q999 = samples[((n - 1) as f64 * 0.999) as usize];
    let mut tail = Vec::new();
    if q999 > 0.0 {
        for j in 0..200 {
            let qv = q999 * (j + 1) as f64 / 200.0;
            // Fraction strictly above qv via binary search on the sorted run.
            let above = n - samples.partition_point(|&x| x <= qv);
            tail.push((qv, above as f64 / n as f64));
        }
    }

    // Fit ln Pr(Q > q) on the well-populated part of the tail.
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(_, p)| *p >= 1e-4 && *p <= 0.2)
        .map(|&(qv, p)| (qv, p.ln()))
        .collect();
    let fitted_slope = if stable && pts.len() >= 5 {
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = m * sxx - sx * sx;
        if denom > 0.0 {
            Some((m * sxy - sx * sy) / denom)
        } else {
            None
        }
    } else {
        None
    };
    let contract_satisfied = if arrival_fraction <= 0.95 {
        fitted_slope.map(|s| s <= -0.9 * theta)
    } else {
        None
    };

    Ok(QueueTailReport {
        arrival_rate: arrival,
        ec_bits_per_use: ec,
        theta,
        arrival_fraction,
        horizon,
        mean_service,
        stable,
        max_queue,
        tail,
        fitted_slope,
        contract_satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::state_distribution;
    use rand::SeedableRng;

    fn defaults() -> SystemParams {
        SystemParams::default().validate().unwrap()
    }

    #[test]
    fn zero_sigma_slots_are_always_reliable() {
        let p = SystemParams {
            sigma_d_m: 0.0,
            ..SystemParams::default()
        }
        .validate()
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5_000 {
            let slot = simulate_slot(&p, &mut rng).unwrap();
            assert!(matches!(
                slot.state,
                ServiceState::NfReliable | ServiceState::FfReliable
            ));
            assert_eq!(slot.rates.service, slot.rates.true_capacity);
        }
    }

    #[test]
    fn empty_states_never_observed_for_defaults() {
        // The monotone rate curve with its downward boundary step makes
        // states 4 and 5 impossible; a positive count would falsify that.
        let s = run_mc(&defaults(), &[], McConfig::new(1_000_000, 42)).unwrap();
        assert_eq!(s.state_probs[3].value, 0.0);
        assert_eq!(s.state_probs[4].value, 0.0);
    }

    #[test]
    fn state_frequencies_match_geometric_prior_analytics() {
        let p = defaults();
        let s = run_mc(&p, &[], McConfig::new(1_000_000, 42)).unwrap();
        let dist = state_distribution(&p).unwrap();
        for i in 0..8 {
            let analytic = dist.probs[i];
            let se = (analytic * (1.0 - analytic) / 1e6).sqrt();
            let diff = (s.state_probs[i].value - analytic).abs();
            assert!(
                diff <= 3.0 * se + 1e-12,
                "state {}: MC {} vs analytic {analytic} (3se = {})",
                i + 1,
                s.state_probs[i].value,
                3.0 * se
            );
        }
    }

    #[test]
    fn frequencies_sum_to_one_exactly() {
        let s = run_mc(&defaults(), &[], McConfig::new(100_000, 7)).unwrap();
        let total: f64 = s.state_probs.iter().map(|e| e.value * 1e5).sum();
        assert_eq!(total as u64, 100_000);
    }

    #[test]
    fn error_frequencies_vanish_for_tiny_sigma() {
        let p = SystemParams {
            sigma_d_m: 1e-6,
            ..SystemParams::default()
        }
        .validate()
        .unwrap();
        let (ff, fnear) = estimate_error_probs(&p, McConfig::new(1_000_000, 3)).unwrap();
        assert_eq!(ff.value, 0.0);
        assert_eq!(fnear.value, 0.0);
    }

    #[test]
    fn conditional_error_rates_match_analytics_at_fixed_distance() {
        // Frequency of {d̂ ≥ d_F} at d = 40 m and of {d̂ < d_F} at d = 70 m.
        let p = defaults();
        let d_f = p.fraunhofer_distance();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let n = 1_000_000;
        let mut far_at_40 = 0u64;
        let mut near_at_70 = 0u64;
        for _ in 0..n {
            if sample_estimate(40.0, p.sigma_d_m, &mut rng) >= d_f {
                far_at_40 += 1;
            }
            if sample_estimate(70.0, p.sigma_d_m, &mut rng) < d_f {
                near_at_70 += 1;
            }
        }
        let check = |count: u64, analytic: f64| {
            let freq = count as f64 / n as f64;
            let se = (analytic * (1.0 - analytic) / n as f64).sqrt();
            assert!(
                (freq - analytic).abs() <= 3.0 * se,
                "freq {freq} vs {analytic}"
            );
        };
        check(far_at_40, crate::ranging::p_false_far_cond(40.0, &p).unwrap());
        check(near_at_70, crate::ranging::p_false_near_cond(70.0, &p).unwrap());
    }

    #[test]
    fn ec_estimate_is_deterministic_and_seed_sensitive() {
        let p = defaults();
        let a = estimate_ec(&p, 0.01, McConfig::new(100_000, 9)).unwrap();
        let b = estimate_ec(&p, 0.01, McConfig::new(100_000, 9)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
        let c = estimate_ec(&p, 0.01, McConfig::new(100_000, 10)).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn reduction_is_independent_of_thread_count() {
        let p = defaults();
        let mc = McConfig::new(200_000, 31);
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let s1 = pool1.install(|| run_mc(&p, &[0.01], mc)).unwrap();
        let s4 = pool4.install(|| run_mc(&p, &[0.01], mc)).unwrap();
        assert_eq!(s1.ec[0].value.to_bits(), s4.ec[0].value.to_bits());
        assert_eq!(
            s1.mean_service.value.to_bits(),
            s4.mean_service.value.to_bits()
        );
        for i in 0..8 {
            assert_eq!(
                s1.state_probs[i].value.to_bits(),
                s4.state_probs[i].value.to_bits()
            );
        }
    }

    #[test]
    fn small_theta_ec_matches_mean_service_same_samples() {
        let p = defaults();
        let s = run_mc(&p, &[1e-6], McConfig::new(200_000, 5)).unwrap();
        let diff = (s.ec[0].value - s.mean_service.value).abs();
        assert!(diff <= 3.0 * s.ec[0].std_err.max(s.mean_service.std_err) + 1e-6);
    }

    #[test]
    fn batch_must_divide_samples() {
        let p = defaults();
        let bad = McConfig {
            n_samples: 1000,
            seed: 1,
            batch: 7,
        };
        assert!(matches!(
            run_mc(&p, &[], bad),
            Err(McError::BatchMismatch { .. })
        ));
    }

    #[test]
    fn queue_zero_arrival_stays_empty() {
        let p = defaults();
        let rep = queue_delay_validation(&p, 0.01, 0.0, 100_000, 11).unwrap();
        assert_eq!(rep.max_queue, 0.0);
        assert!(rep.stable);
        assert!(rep.fitted_slope.is_none());
    }

    #[test]
    fn queue_overload_is_flagged_unstable() {
        // Arrival far above the mean service rate: linear growth, no tail.
        let p = defaults();
        let rep = queue_delay_validation(&p, 0.01, 50.0, 100_000, 13).unwrap();
        assert!(!rep.stable);
        assert!(rep.max_queue > 0.5 * (rep.arrival_rate - rep.mean_service) * 1e5);
        assert!(rep.fitted_slope.is_none());
        assert!(rep.contract_satisfied.is_none());
    }

    #[test]
    fn queue_tail_slope_monotone_in_arrival_fraction() {
        let p = defaults();
        let mut prev = f64::NEG_INFINITY;
        for fraction in [0.5, 0.8, 0.95] {
            let rep = queue_delay_validation(&p, 0.01, fraction, 400_000, 17).unwrap();
            let slope = rep
                .fitted_slope
                .unwrap_or_else(|| panic!("no tail fitted at fraction {fraction}"));
            assert!(
                slope >= prev,
                "tail should flatten as the arrival grows: {slope} < {prev} at {fraction}"
            );
            assert_eq!(rep.contract_satisfied, Some(slope <= -0.9 * 0.01));
            prev = slope;
        }
    }

    #[test]
    fn rejects_short_horizon_and_bad_fraction() {
        let p = defaults();
        assert!(matches!(
            queue_delay_validation(&p, 0.01, 0.5, 1_000, 1),
            Err(McError::HorizonTooShort(_))
        ));
        assert!(matches!(
            queue_delay_validation(&p, 0.01, f64::NAN, 100_000, 1),
            Err(McError::BadArrivalFraction(_))
        ));
    }
}
