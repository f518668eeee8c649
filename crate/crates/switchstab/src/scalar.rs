//! Scalar abstraction: every numeric type in this crate is generic over a
//! real field so the same code runs at `f32` and `f64` precision.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable for states, times and tolerances (`f32` or `f64`).
pub trait Scalar: RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T> Scalar for T where T: RealField + FromPrimitive + ToPrimitive + Copy {}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics only for exotic scalar types that cannot represent finite `f64`
/// values; `f32`/`f64` always succeed (overflow saturates to infinity).
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("scalar conversion from f64")
}

/// Safety margin scaled to the working precision: `max(floor, factor * eps)`.
pub(crate) fn eps_margin<T: Scalar>(floor: f64, factor: f64) -> T {
    let eps: T = T::default_epsilon() * cast(factor);
    let floor: T = cast(floor);
    if eps > floor {
        eps
    } else {
        floor
    }
}
