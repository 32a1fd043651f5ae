//! Scalar abstractions shared by the numeric kernels.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point type usable by the geometry, fire and bound kernels.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Scalar that can also live inside nalgebra matrices (filter code).
pub trait Real: Scalar + nalgebra::RealField {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
}

/// Converts `T` back to `f64` for reporting and random sampling.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    <T as num_traits::ToPrimitive>::to_f64(&x).unwrap_or(f64::NAN)
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Scalar>(theta: T) -> T {
    let tau = T::TAU();
    let mut a = theta % tau;
    if a < T::zero() {
        a = a + tau;
    }
    if a >= tau {
        a = a - tau;
    }
    a
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_difference<T: Scalar>(delta: T) -> T {
    let pi = T::PI();
    let a = wrap_angle(delta + pi) - pi;
    if a <= -pi {
        a + T::TAU()
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        for &x in &[-7.0f64, -0.1, 0.0, 3.0, 6.3, 100.0] {
            let w = wrap_angle(x);
            assert!((0.0..std::f64::consts::TAU).contains(&w), "{x} -> {w}");
            let turns = (x - w) / std::f64::consts::TAU;
            assert!((turns - turns.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_difference_range() {
        let d = wrap_difference(0.1f64 - 6.2);
        assert!((d - (0.1 - 6.2 + std::f64::consts::TAU)).abs() < 1e-12);
        assert!((wrap_difference(std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
    }
}
