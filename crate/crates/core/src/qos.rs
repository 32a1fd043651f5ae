//! Service-time upper bounds, confidence speeds, regime classification and
//! the uncertainty residual ratio (URR) test.

use nalgebra::{Matrix2, Vector2};
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::filter::{state, FilterState};
use crate::fire::{spread_factor, ScenarioCase};
use crate::scalar::{lit, to_f64, Real, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum QosError {
    #[error("half angle {0} rad must lie in [0, π/2)")]
    HalfAngle(f64),
    #[error("residual covariance has zero trace")]
    ZeroTrace,
    #[error("confidence level {0} outside (0, 1)")]
    Alpha(f64),
    #[error("service time {0} is not a finite non-negative number")]
    ServiceTime(f64),
}

/// Service-time bound; `Infeasible` when the bound's denominator or
/// discriminant is non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Bound<T> {
    Finite(T),
    Infeasible,
}

impl<T: Scalar> Bound<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Bound::Finite(t) => Some(t),
            Bound::Infeasible => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    /// Value as `f64`, `+∞` when infeasible.
    pub fn or_infinity(self) -> f64 {
        self.value().map(to_f64).unwrap_or(f64::INFINITY)
    }

    fn plus(self, base: T) -> Self {
        match self {
            Bound::Finite(t) => Bound::Finite(base + t),
            Bound::Infeasible => Bound::Infeasible,
        }
    }
}

/// Confidence level and Monte Carlo budget for [`zeta_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceConfig {
    pub alpha: f64,
    pub mc_samples: usize,
}

impl ConfidenceConfig {
    pub fn new(alpha: f64, mc_samples: usize) -> Result<Self, QosError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(QosError::Alpha(alpha));
        }
        Ok(Self { alpha, mc_samples: mc_samples.max(1) })
    }
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        Self { alpha: 0.05, mc_samples: 256 }
    }
}

/// Speed exceeded with probability `alpha` under each estimate's Gaussian
/// marginal over (R, U), maximized over the estimates.
pub fn zeta_alpha<T: Real, R: Rng + ?Sized>(estimates: &[&FilterState<T>], cfg: &ConfidenceConfig, rng: &mut R) -> T {
    let mut best = T::zero();
    let mut speeds = Vec::with_capacity(cfg.mc_samples);
    for fs in estimates {
        let mean = Vector2::new(to_f64(fs.mean[state::RATE]), to_f64(fs.mean[state::WIND]));
        let cov = Matrix2::new(
            to_f64(fs.cov[(state::RATE, state::RATE)]),
            to_f64(fs.cov[(state::RATE, state::WIND)]),
            to_f64(fs.cov[(state::WIND, state::RATE)]),
            to_f64(fs.cov[(state::WIND, state::WIND)]),
        );
        let q = if cov.iter().all(|&v| v == 0.0) {
            Float::abs(mean[0] * spread_factor(mean[1]))
        } else {
            let root = covariance_root(&cov);
            speeds.clear();
            for _ in 0..cfg.mc_samples {
                let z = Vector2::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
                let x = mean + root * z;
                speeds.push(Float::abs(x[0] * spread_factor(x[1])));
            }
            upper_quantile(&mut speeds, cfg.alpha)
        };
        best = Float::max(best, lit(q));
    }
    best
}

fn covariance_root(cov: &Matrix2<f64>) -> Matrix2<f64> {
    let sym = (cov + cov.transpose()) * 0.5;
    if let Some(ch) = sym.cholesky() {
        return ch.l();
    }
    let eig = sym.symmetric_eigen();
    let d = Matrix2::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    eig.eigenvectors * d
}

/// Empirical `1 − alpha` quantile (order statistic at `⌈(1−α)n⌉`).
pub fn upper_quantile(values: &mut [f64], alpha: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let rank = ((1.0 - alpha) * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

/// Ground footprint width of a camera at `altitude` with half view angle.
pub fn fov_width<T: Scalar>(altitude: T, half_angle: T) -> Result<T, QosError> {
    if half_angle < T::zero() || half_angle >= T::FRAC_PI_2() {
        return Err(QosError::HalfAngle(to_f64(half_angle)));
    }
    Ok(lit::<T>(2.0) * altitude * half_angle.tan())
}

/// Static tour bound `2L/v`, where `L` is the spanning-tree weight.
pub fn tub_case1<T: Scalar>(path_len: T, v_max: T) -> T {
    lit::<T>(2.0) * path_len / v_max
}

/// Moving-target bound `8ζ(n−1)L / (v(1 − 4ζ(n−1)))`.
pub fn tub_case2<T: Scalar>(path_len: T, v_max: T, zeta: T, n_q: usize) -> Bound<T> {
    if n_q <= 1 || zeta == T::zero() {
        return Bound::Finite(T::zero());
    }
    let m: T = lit((n_q - 1) as f64);
    let denom = T::one() - lit::<T>(4.0) * zeta * m;
    if denom <= T::zero() {
        return Bound::Infeasible;
    }
    Bound::Finite(lit::<T>(8.0) * zeta * m * path_len / (v_max * denom))
}

/// Spreading-target bound: smaller root of `Γ T² − Β T + Δ = 0` with
/// `Γ = 4nζ²/(w v)`, `Β = 1 − 2nζ/v` and `Δ` the moving-target bound.
pub fn tub_case3<T: Scalar>(path_len: T, v_max: T, zeta: T, n_q: usize, fov: T) -> Bound<T> {
    case3_root(tub_case2(path_len, v_max, zeta, n_q), v_max, zeta, n_q, fov)
}

/// Absolute tolerance on the quadratic residual, scaled by `max(1, Δ)`.
pub const CASE3_RESIDUAL_TOL: f64 = 1e-9;

/// Coefficients `(Γ, Β)` of the spreading-target quadratic.
pub fn case3_coefficients<T: Scalar>(v_max: T, zeta: T, n_q: usize, fov: T) -> (T, T) {
    let n: T = lit(n_q as f64);
    let growth = lit::<T>(4.0) * n * zeta * zeta / (fov * v_max);
    let linear = T::one() - lit::<T>(2.0) * n * zeta / v_max;
    (growth, linear)
}

/// Smaller root of the spreading-target quadratic for a given `Δ`.
pub fn case3_root<T: Scalar>(delta: Bound<T>, v_max: T, zeta: T, n_q: usize, fov: T) -> Bound<T> {
    let Bound::Finite(delta) = delta else {
        return Bound::Infeasible;
    };
    let (growth, linear) = case3_coefficients(v_max, zeta, n_q, fov);
    if linear <= T::zero() {
        return Bound::Infeasible;
    }
    let disc = linear * linear - lit::<T>(4.0) * growth * delta;
    if disc < T::zero() {
        return Bound::Infeasible;
    }
    // 2Δ/(Β + √disc) equals (Β − √disc)/(2Γ) without the cancellation.
    let root = if growth == T::zero() { delta / linear } else { lit::<T>(2.0) * delta / (linear + disc.sqrt()) };
    let residual = growth * root * root - linear * root + delta;
    let scale = T::one().max(delta);
    assert!(
        residual.abs() <= lit::<T>(CASE3_RESIDUAL_TOL) * scale,
        "spreading-target root misses its quadratic by {residual:?}"
    );
    Bound::Finite(root)
}

/// How the per-case formulas combine into a service-time horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum BoundConvention {
    /// Static tour time plus the moving/spreading surcharge, with the speed
    /// entering the moving surcharge as the ratio ζ/v.
    #[default]
    Combined,
    /// The per-case formulas as printed.
    Literal,
}

/// Inputs shared by the three bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs<T> {
    /// Spanning-tree weight of the subgraph.
    pub path_len: T,
    pub v_max: T,
    pub zeta: T,
    pub n_q: usize,
    pub fov: T,
}

/// Service-time upper bound for a regime under the chosen convention.
pub fn service_time<T: Scalar>(case: ScenarioCase, b: &BoundInputs<T>, convention: BoundConvention) -> Bound<T> {
    let static_time = tub_case1(b.path_len, b.v_max);
    match convention {
        BoundConvention::Literal => match case {
            ScenarioCase::Stationary => Bound::Finite(static_time),
            ScenarioCase::Moving => tub_case2(b.path_len, b.v_max, b.zeta, b.n_q),
            ScenarioCase::MovingSpreading => tub_case3(b.path_len, b.v_max, b.zeta, b.n_q, b.fov),
        },
        BoundConvention::Combined => {
            let ratio = b.zeta / b.v_max;
            match case {
                ScenarioCase::Stationary => Bound::Finite(static_time),
                ScenarioCase::Moving => tub_case2(b.path_len, b.v_max, ratio, b.n_q).plus(static_time),
                ScenarioCase::MovingSpreading => {
                    let delta = tub_case2(b.path_len, b.v_max, ratio, b.n_q);
                    case3_root(delta, b.v_max, b.zeta, b.n_q, b.fov).plus(static_time)
                }
            }
        }
    }
}

/// Thresholds for [`classify_case`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyConfig {
    /// Speeds below this are treated as stationary.
    pub eps_v: f64,
    /// Number of most recent count transitions inspected for growth.
    pub window: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { eps_v: 1e-3, window: 10 }
    }
}

/// Infers the fire regime from estimated speeds and the alive-count history.
pub fn classify_case<T: Real>(estimates: &[&FilterState<T>], count_history: &[usize], cfg: &ClassifyConfig) -> ScenarioCase {
    let fastest = estimates.iter().map(|fs| to_f64(Float::abs(fs.speed()))).fold(0.0, f64::max);
    if fastest < cfg.eps_v {
        return ScenarioCase::Stationary;
    }
    let start = count_history.len().saturating_sub(cfg.window + 1);
    let grew = count_history[start..].windows(2).any(|w| w[1] > w[0]);
    if grew {
        ScenarioCase::MovingSpreading
    } else {
        ScenarioCase::Moving
    }
}

/// Number of unit predictions covering a service time.
pub fn projection_steps(t_ub: f64) -> Result<usize, QosError> {
    if !(t_ub.is_finite() && t_ub >= 0.0) {
        return Err(QosError::ServiceTime(t_ub));
    }
    Ok(t_ub.ceil() as usize)
}

/// Uncertainty residual ratio: trace of the residual covariance projected
/// over `⌈t_ub⌉` steps, relative to the one-step predicted residual (the
/// prior the filter carries into its next measurement).
pub fn urr<T: Real>(fs: &FilterState<T>, t_ub: f64) -> Result<T, QosError> {
    let k = projection_steps(t_ub)?;
    let reference = fs.project_residual(1).trace();
    if reference == T::zero() {
        return Err(QosError::ZeroTrace);
    }
    Ok(fs.project_residual(k).trace() / reference)
}

/// Probability bound `1 − (1−α)^n` tied to `n` independently bounded targets.
pub fn bound_confidence(alpha: f64, n_q: usize) -> f64 {
    1.0 - (1.0 - alpha).powi(n_q as i32)
}

/// Per-subgraph QoS verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QosAssessment<T> {
    pub case: ScenarioCase,
    pub zeta_alpha: T,
    pub t_ub: Bound<T>,
    /// Largest node URR, absent when the bound is infeasible.
    pub urr: Option<T>,
    pub feasible: bool,
}

impl<T: Scalar> QosAssessment<T> {
    pub fn new(case: ScenarioCase, zeta_alpha: T, t_ub: Bound<T>, urr: Option<T>) -> Self {
        let feasible = t_ub.is_finite() && urr.is_some_and(|u| u <= T::one());
        Self { case, zeta_alpha, t_ub, urr, feasible }
    }
}
