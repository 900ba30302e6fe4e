//! Floating-point abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar used throughout the crate.
///
/// Implemented for `f32` and `f64`. All geometry, quadrature and operator code is
/// written against this trait; the f64 instantiation is the one exercised by the
/// acceptance runs.
pub trait Scalar:
    'static + Send + Sync + Float + FloatConst + FromPrimitive + NumAssign + Default + Debug + Display + LowerExp
{
    /// Absolute geometric tolerance for a domain of diameter O(1).
    fn geo_tol() -> Self;
}

impl Scalar for f32 {
    fn geo_tol() -> Self {
        // 1e-12 is below f32 resolution at O(1) magnitudes.
        1e-6
    }
}

impl Scalar for f64 {
    fn geo_tol() -> Self {
        1e-12
    }
}

/// Converts an f64 literal into the working scalar.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in scalar type")
}

/// Gamma function, evaluated in f64 and cast back.
pub fn gamma<T: Scalar>(x: T) -> T {
    lit(statrs::function::gamma::gamma(x.to_f64().unwrap()))
}

/// Surface measure of the unit sphere S^{d-1}: 2 for d = 1, 2π for d = 2.
pub fn sphere_area<T: Scalar>(dim: usize) -> T {
    match dim {
        1 => lit(2.0),
        2 => T::TAU(),
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Volume of the unit ball B_1 in R^d: 2 for d = 1, π for d = 2.
pub fn ball_volume<T: Scalar>(dim: usize) -> T {
    match dim {
        1 => lit(2.0),
        2 => T::PI(),
        _ => panic!("unsupported dimension {dim}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        assert!((gamma(1.0f64) - 1.0).abs() < 1e-14);
        assert!((gamma(0.5f64) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((gamma(2.5f64) - 1.329_340_388_179_137).abs() < 1e-13);
        assert!((gamma(0.5f32) - 1.772_453_9).abs() < 1e-5);
    }

    #[test]
    fn sphere_and_ball() {
        assert_eq!(sphere_area::<f64>(1), 2.0);
        assert!((sphere_area::<f64>(2) - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!((ball_volume::<f64>(2) - std::f64::consts::PI).abs() < 1e-15);
    }
}
