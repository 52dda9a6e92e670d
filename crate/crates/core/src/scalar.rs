//! Scalar abstraction: the numeric core is generic over `f32`/`f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the simulation runs on.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` literal/intermediate into the working scalar.
#[inline]
pub fn flt<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 -> scalar conversion")
}

/// Back to `f64` for reporting and statistics.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar -> f64 conversion")
}
