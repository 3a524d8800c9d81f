//! Special functions and adaptive quadrature used by the analytical modules.
//!
//! Quadrature is globally adaptive Gauss–Kronrod (G7, K15): each interval
//! carries an embedded error estimate and the worst interval is bisected until
//! the requested tolerance is met. Integrands containing a Gaussian kernel
//! e^{-(x-μ)²/(2σ²)} should be evaluated in the standardized variable
//! t = (x-μ)/σ so the adaptive grid stays well conditioned when σ is small
//! relative to the domain width; the callers in this crate do exactly that.

use std::collections::BinaryHeap;
use thiserror::Error;

/// 1/sqrt(2π).
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// 1/sqrt(2).
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF Φ(x), evaluated through erfc for full relative
/// accuracy in both tails.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard Q-function Q(x) = 1 - Φ(x) = Pr(Z > x).
///
/// Computed directly from erfc so there is no cancellation for large x.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density φ(x).
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Tolerances and subdivision budget for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    /// Relative tolerance on the full integral.
    pub rel_tol: f64,
    /// Absolute tolerance; the effective target is max(abs_tol, rel_tol·|I|).
    pub abs_tol: f64,
    /// Maximum number of interval bisections before giving up.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 10_000,
        }
    }
}

impl QuadratureSettings {
    /// Checks the type invariants (positive tolerances, at least one
    /// subdivision allowed).
    pub fn validate(self) -> Result<Self, QuadratureError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || self.max_subdivisions < 1 {
            return Err(QuadratureError::InvalidSettings {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
                max_subdivisions: self.max_subdivisions,
            });
        }
        Ok(self)
    }

    /// Settings for an inner integral of a nested (2-D) evaluation: one decade
    /// tighter so inner noise does not confuse the outer error estimator.
    pub(crate) fn inner(self) -> Self {
        Self {
            rel_tol: (self.rel_tol * 0.1).max(1e-14),
            abs_tol: (self.abs_tol * 0.1).max(1e-300),
            max_subdivisions: self.max_subdivisions,
        }
    }
}

/// Quadrature failure modes.
#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("invalid quadrature settings: rel_tol={rel_tol}, abs_tol={abs_tol}, max_subdivisions={max_subdivisions}")]
    InvalidSettings {
        rel_tol: f64,
        abs_tol: f64,
        max_subdivisions: usize,
    },
    #[error("invalid integration bounds [{a}, {b}]")]
    InvalidBounds { a: f64, b: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFiniteIntegrand { x: f64 },
    #[error("quadrature did not converge after {subdivisions} subdivisions: estimate {estimate}, error estimate {error}")]
    NoConvergence {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },
}

/// Converged integral value with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
}

// 15-point Kronrod abscissae on [0, 1] (positive half; the rule is symmetric).
// Odd indices are the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One (G7, K15) evaluation on [a, b] with the QUADPACK error estimate.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment, QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut eval = |x: f64| -> Result<f64, QuadratureError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFiniteIntegrand { x })
        }
    };

    let fc = eval(center)?;
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut resabs = WGK[7] * fc.abs();
    let mut fv = [0.0f64; 14];

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        let fsum = f1 + f2;
        resk += WGK[j] * fsum;
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[(j - 1) / 2] * fsum;
        }
    }

    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[2 * j] - reskh).abs() + (fv[2 * j + 1] - reskh).abs());
    }

    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (1.0f64).min((200.0 * error / resasc).powf(1.5));
    }
    let round_off = 50.0 * f64::EPSILON * resabs;
    if round_off > f64::MIN_POSITIVE && error < round_off {
        error = round_off;
    }

    Ok(Segment {
        a,
        b,
        value,
        error,
    })
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: QuadratureSettings,
) -> Result<QuadResult, QuadratureError> {
    if !a.is_finite() || !b.is_finite() || a > b {
        return Err(QuadratureError::InvalidBounds { a, b });
    }
    integrate_over_panels(&mut f, &[a, b], settings)
}

/// Adaptive integral over a partition given by `points` (ascending); each
/// consecutive pair seeds one initial panel. Use this to align panels with
/// known kinks or boundary layers of the integrand.
pub fn integrate_1d_with_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    settings: QuadratureSettings,
) -> Result<QuadResult, QuadratureError> {
    if points.len() < 2 {
        return Err(QuadratureError::InvalidBounds {
            a: f64::NAN,
            b: f64::NAN,
        });
    }
    for w in points.windows(2) {
        if !w[0].is_finite() || !w[1].is_finite() || w[0] > w[1] {
            return Err(QuadratureError::InvalidBounds { a: w[0], b: w[1] });
        }
    }
    integrate_over_panels(&mut f, points, settings)
}

fn integrate_over_panels<F: FnMut(f64) -> f64>(
    f: &mut F,
    points: &[f64],
    settings: QuadratureSettings,
) -> Result<QuadResult, QuadratureError> {
    let settings = settings.validate()?;
    let mut heap: BinaryHeap<Segment> = BinaryHeap::new();
    // Panels too narrow to bisect are parked here with their error frozen.
    let mut frozen: Vec<Segment> = Vec::new();
    let mut subdivisions = 0usize;

    for w in points.windows(2) {
        if w[0] < w[1] {
            heap.push(gk15(f, w[0], w[1])?);
        }
    }
    if heap.is_empty() {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            subdivisions: 0,
        });
    }

    let mut sum_val: f64 = heap.iter().map(|s| s.value).sum();
    let mut sum_err: f64 = heap.iter().map(|s| s.error).sum::<f64>()
        + frozen.iter().map(|s| s.error).sum::<f64>();

    loop {
        let tol = settings.abs_tol.max(settings.rel_tol * sum_val.abs());
        if sum_err <= tol || heap.is_empty() {
            break;
        }
        if subdivisions >= settings.max_subdivisions {
            let estimate = final_sum(&heap, &frozen);
            return Err(QuadratureError::NoConvergence {
                estimate,
                error: sum_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap checked non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Cannot bisect further in f64; keep the panel as-is.
            frozen.push(worst);
            continue;
        }
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        sum_val += left.value + right.value - worst.value;
        sum_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }

    let value = final_sum(&heap, &frozen);
    let abs_error = heap.iter().map(|s| s.error).sum::<f64>()
        + frozen.iter().map(|s| s.error).sum::<f64>();
    let tol = settings.abs_tol.max(settings.rel_tol * value.abs());
    if abs_error > tol {
        return Err(QuadratureError::NoConvergence {
            estimate: value,
            error: abs_error,
            subdivisions,
        });
    }
    Ok(QuadResult {
        value,
        abs_error,
        subdivisions,
    })
}

/// Sums panel values in left-endpoint order so the result does not depend on
/// the subdivision history.
fn final_sum(heap: &BinaryHeap<Segment>, frozen: &[Segment]) -> f64 {
    let mut segs: Vec<&Segment> = heap.iter().chain(frozen.iter()).collect();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    segs.iter().map(|s| s.value).sum()
}

/// Nested adaptive integral ∫ over x in `outer` of ∫ f(x, y) dy, where the
/// inner bounds depend on the outer point through `inner`.
///
/// The inner integral runs one decade tighter than `settings` so its residual
/// noise stays below the outer error estimate.
pub fn integrate_2d<F, B>(
    f: F,
    outer: (f64, f64),
    inner: B,
    settings: QuadratureSettings,
) -> Result<QuadResult, QuadratureError>
where
    F: Fn(f64, f64) -> f64,
    B: Fn(f64) -> (f64, f64),
{
    let settings = settings.validate()?;
    let inner_settings = settings.inner();
    let inner_failure = std::cell::RefCell::new(None::<QuadratureError>);

    let outer_integrand = |x: f64| -> f64 {
        if inner_failure.borrow().is_some() {
            return 0.0;
        }
        let (lo, hi) = inner(x);
        match integrate_1d(|y| f(x, y), lo, hi, inner_settings) {
            Ok(r) => r.value,
            Err(e) => {
                *inner_failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };

    let result = integrate_1d(outer_integrand, outer.0, outer.1, settings);
    if let Some(e) = inner_failure.into_inner() {
        return Err(e);
    }
    result
}
