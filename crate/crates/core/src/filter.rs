//! Adaptive extended Kalman filter for a single firespot observed from a UAV.
//!
//! State layout: `[qx, qy, px, py, pz, R, U, θ]` (spot position, observer
//! pose, spread rate, wind speed, wind azimuth). Measurements:
//! `[φx, φy, R̂, Û, θ̂]` where `φx = atan(pz/d)`, `φy = atan(d/pz)` and `d` is
//! the planar spot-to-observer distance.

use nalgebra::{SMatrix, SVector};
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::fire::{spread_factor, spread_factor_slope};
use crate::scalar::{lit, wrap_angle, wrap_difference, Real};

pub type StateVector<T> = SVector<T, 8>;
pub type MappingVector<T> = SVector<T, 5>;
pub type StateMatrix<T> = SMatrix<T, 8, 8>;
pub type ObservationMatrix<T> = SMatrix<T, 5, 8>;
pub type ResidualMatrix<T> = SMatrix<T, 5, 5>;

/// State vector indices.
pub mod state {
    pub const QX: usize = 0;
    pub const QY: usize = 1;
    pub const PX: usize = 2;
    pub const PY: usize = 3;
    pub const PZ: usize = 4;
    pub const RATE: usize = 5;
    pub const WIND: usize = 6;
    pub const AZIMUTH: usize = 7;
}

/// Measurement vector indices.
pub mod channel {
    pub const ANGLE_X: usize = 0;
    pub const ANGLE_Y: usize = 1;
    pub const RATE: usize = 2;
    pub const WIND: usize = 3;
    pub const AZIMUTH: usize = 4;
}

/// Planar offsets at or below this length are replaced by a fixed offset.
pub const GEOMETRY_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("residual covariance is singular; filter diverged")]
    Divergence,
    #[error("adaptation step {0} outside [0, 1]")]
    GammaStep(f64),
}

pub fn state_vector<T: Real>(spot: [T; 2], observer: [T; 3], rate: T, wind: T, azimuth: T) -> StateVector<T> {
    StateVector::from_column_slice(&[spot[0], spot[1], observer[0], observer[1], observer[2], rate, wind, azimuth])
}

/// One-step process map. The observer pose is an exogenous input, so the
/// pose entries of the result do not depend on `x`.
pub fn process_map<T: Real>(x: &StateVector<T>, dt: T, observer: [T; 3]) -> StateVector<T> {
    let mut out = *x;
    let speed = x[state::RATE] * spread_factor(x[state::WIND]);
    let (s, c) = Float::sin_cos(x[state::AZIMUTH]);
    out[state::QX] = x[state::QX] + speed * s * dt;
    out[state::QY] = x[state::QY] + speed * c * dt;
    out[state::PX] = observer[0];
    out[state::PY] = observer[1];
    out[state::PZ] = observer[2];
    out
}

/// Jacobian of [`process_map`] with respect to the state.
pub fn process_jacobian<T: Real>(x: &StateVector<T>, dt: T) -> StateMatrix<T> {
    let mut f = StateMatrix::<T>::zeros();
    for i in [state::QX, state::QY, state::RATE, state::WIND, state::AZIMUTH] {
        f[(i, i)] = T::one();
    }
    let rate = x[state::RATE];
    let factor = spread_factor(x[state::WIND]);
    let slope = spread_factor_slope(x[state::WIND]);
    let speed = rate * factor;
    let (s, c) = Float::sin_cos(x[state::AZIMUTH]);
    f[(state::QX, state::RATE)] = factor * s * dt;
    f[(state::QY, state::RATE)] = factor * c * dt;
    f[(state::QX, state::WIND)] = rate * slope * s * dt;
    f[(state::QY, state::WIND)] = rate * slope * c * dt;
    f[(state::QX, state::AZIMUTH)] = speed * c * dt;
    f[(state::QY, state::AZIMUTH)] = -speed * s * dt;
    f
}

struct Geometry<T> {
    offset: [T; 2],
    dist: T,
    altitude: T,
    degenerate: bool,
}

fn geometry<T: Real>(x: &StateVector<T>) -> Geometry<T> {
    let dx = x[state::QX] - x[state::PX];
    let dy = x[state::QY] - x[state::PY];
    let dist = Float::hypot(dx, dy);
    let eps = lit::<T>(GEOMETRY_EPS);
    if dist <= eps {
        Geometry { offset: [eps, T::zero()], dist: eps, altitude: x[state::PZ], degenerate: true }
    } else {
        Geometry { offset: [dx, dy], dist, altitude: x[state::PZ], degenerate: false }
    }
}

/// Predicted measurement; the flag reports a regularized overhead geometry.
pub fn observation_model<T: Real>(x: &StateVector<T>) -> (MappingVector<T>, bool) {
    let g = geometry(x);
    let z = MappingVector::from_column_slice(&[
        Float::atan(g.altitude / g.dist),
        Float::atan(g.dist / g.altitude),
        x[state::RATE],
        x[state::WIND],
        x[state::AZIMUTH],
    ]);
    (z, g.degenerate)
}

/// Jacobian of [`observation_model`]; the flag reports a regularized geometry.
pub fn observation_jacobian<T: Real>(x: &StateVector<T>) -> (ObservationMatrix<T>, bool) {
    let g = geometry(x);
    let mut h = ObservationMatrix::<T>::zeros();
    let pz = g.altitude;
    let d = g.dist;
    let s = d * d + pz * pz;
    for (axis, q_idx, p_idx) in [(0, state::QX, state::PX), (1, state::QY, state::PY)] {
        let grad = pz * g.offset[axis] / (d * s);
        h[(channel::ANGLE_X, q_idx)] = -grad;
        h[(channel::ANGLE_X, p_idx)] = grad;
        h[(channel::ANGLE_Y, q_idx)] = grad;
        h[(channel::ANGLE_Y, p_idx)] = -grad;
    }
    h[(channel::ANGLE_X, state::PZ)] = d / s;
    h[(channel::ANGLE_Y, state::PZ)] = -d / s;
    h[(channel::RATE, state::RATE)] = T::one();
    h[(channel::WIND, state::WIND)] = T::one();
    h[(channel::AZIMUTH, state::AZIMUTH)] = T::one();
    (h, g.degenerate)
}

/// Noisy reading of the true mapping vector. `noise_std` holds one standard
/// deviation per channel.
pub fn measure<T: Real, R: Rng + ?Sized>(
    observer: [T; 3],
    spot: [T; 2],
    env: [T; 3],
    noise_std: &MappingVector<T>,
    rng: &mut R,
) -> MappingVector<T> {
    let truth = state_vector(spot, observer, env[0], env[1], env[2]);
    let (mut z, _) = observation_model(&truth);
    for i in 0..5 {
        if noise_std[i] > T::zero() {
            let n: f64 = StandardNormal.sample(rng);
            z[i] += noise_std[i] * lit::<T>(n);
        }
    }
    z[channel::AZIMUTH] = wrap_angle(z[channel::AZIMUTH]);
    z
}

/// Initial covariances and adaptation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig<T> {
    pub gamma_step: T,
    pub initial_cov: T,
    pub process_noise: T,
    pub observation_noise: T,
}

impl<T: Real> Default for FilterConfig<T> {
    fn default() -> Self {
        Self { gamma_step: lit(0.95), initial_cov: T::one(), process_noise: lit(1e-3), observation_noise: lit(1e-2) }
    }
}

/// Per-update diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport<T> {
    /// Measurement minus prediction before the correction.
    pub innovation: MappingVector<T>,
    /// Measurement minus prediction after the correction.
    pub residual: MappingVector<T>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState<T: Real> {
    pub mean: StateVector<T>,
    pub cov: StateMatrix<T>,
    pub process_noise: StateMatrix<T>,
    pub observation_noise: ResidualMatrix<T>,
    /// Residual covariance of the most recent update.
    pub residual: ResidualMatrix<T>,
    pub gamma_step: T,
}

impl<T: Real> FilterState<T> {
    pub fn new(mean: StateVector<T>, config: &FilterConfig<T>) -> Result<Self, FilterError> {
        let g = crate::scalar::to_f64(config.gamma_step);
        if !(0.0..=1.0).contains(&g) {
            return Err(FilterError::GammaStep(g));
        }
        let mut fs = Self {
            mean,
            cov: StateMatrix::identity() * config.initial_cov,
            process_noise: StateMatrix::identity() * config.process_noise,
            observation_noise: ResidualMatrix::identity() * config.observation_noise,
            residual: ResidualMatrix::zeros(),
            gamma_step: config.gamma_step,
        };
        fs.residual = fs.residual_covariance();
        Ok(fs)
    }

    pub fn spot(&self) -> [T; 2] {
        [self.mean[state::QX], self.mean[state::QY]]
    }

    pub fn observer(&self) -> [T; 3] {
        [self.mean[state::PX], self.mean[state::PY], self.mean[state::PZ]]
    }

    /// Records the observer pose for the next prediction or update.
    pub fn set_observer(&mut self, pose: [T; 3]) {
        self.mean[state::PX] = pose[0];
        self.mean[state::PY] = pose[1];
        self.mean[state::PZ] = pose[2];
    }

    /// Estimated firefront speed `C(R̂, Û)`.
    pub fn speed(&self) -> T {
        self.mean[state::RATE] * spread_factor(self.mean[state::WIND])
    }

    pub fn predict(&mut self, dt: T) {
        let f = process_jacobian(&self.mean, dt);
        self.mean = process_map(&self.mean, dt, self.observer());
        self.mean[state::AZIMUTH] = wrap_angle(self.mean[state::AZIMUTH]);
        self.cov = symmetrize(f * self.cov * f.transpose() + self.process_noise);
    }

    pub fn update(&mut self, z: &MappingVector<T>) -> Result<UpdateReport<T>, FilterError> {
        let (h, degenerate) = observation_jacobian(&self.mean);
        let innovation = difference(z, &observation_model(&self.mean).0);
        let prior = self.cov;
        let projected = h * prior * h.transpose();
        let s = symmetrize(projected + self.observation_noise);
        let s_inv = s.try_inverse().ok_or(FilterError::Divergence)?;
        if s_inv.iter().any(|v| !Float::is_finite(*v)) {
            return Err(FilterError::Divergence);
        }
        let k = prior * h.transpose() * s_inv;
        self.mean += k * innovation;
        self.mean[state::AZIMUTH] = wrap_angle(self.mean[state::AZIMUTH]);
        let i_kh = StateMatrix::<T>::identity() - k * h;
        self.cov = symmetrize(i_kh * prior * i_kh.transpose() + k * self.observation_noise * k.transpose());
        let residual = difference(z, &observation_model(&self.mean).0);

        let g = self.gamma_step;
        let kd = k * innovation;
        self.process_noise = symmetrize(self.process_noise * g + kd * kd.transpose() * (T::one() - g));
        self.observation_noise =
            symmetrize(self.observation_noise * g + (residual * residual.transpose() + projected) * (T::one() - g));
        self.residual = s;
        Ok(UpdateReport { innovation, residual, degenerate })
    }

    /// Residual covariance `H P Hᵀ + Γ` at the current mean and covariance.
    pub fn residual_covariance(&self) -> ResidualMatrix<T> {
        let (h, _) = observation_jacobian(&self.mean);
        symmetrize(h * self.cov * h.transpose() + self.observation_noise)
    }

    /// Residual covariance after `k` unit predictions with the adaptive
    /// noise terms held fixed. Leaves `self` untouched.
    pub fn project_residual(&self, k: usize) -> ResidualMatrix<T> {
        let observer = self.observer();
        let mut mean = self.mean;
        let mut cov = self.cov;
        for _ in 0..k {
            let f = process_jacobian(&mean, T::one());
            mean = process_map(&mean, T::one(), observer);
            cov = f * cov * f.transpose() + self.process_noise;
        }
        let (h, _) = observation_jacobian(&mean);
        symmetrize(h * cov * h.transpose() + self.observation_noise)
    }
}

fn difference<T: Real>(z: &MappingVector<T>, h: &MappingVector<T>) -> MappingVector<T> {
    let mut d = z - h;
    d[channel::AZIMUTH] = wrap_difference(d[channel::AZIMUTH]);
    d
}

fn symmetrize<T: Real, const N: usize>(m: SMatrix<T, N, N>) -> SMatrix<T, N, N> {
    (m + m.transpose()) * lit::<T>(0.5)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Real, const N: usize>(m: &SMatrix<T, N, N>) -> T {
    let dynamic = nalgebra::DMatrix::from_column_slice(N, N, m.as_slice());
    dynamic.symmetric_eigenvalues().iter().fold(T::infinity(), |acc, &v| Float::min(acc, v))
}
