//! Scalar abstraction: the whole crate is generic over the real float type.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the simulator computes with (`f32` or `f64`).
///
/// Everything numeric in this crate is `Complex<R>` for some `R: Real`;
/// the default aliases at the crate root fix `R = f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; panics only for values outside the
    /// target type's range, which never occurs for the constants used here.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    /// Exact conversion from small integers (all constants here fit easily).
    fn of_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer constant representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the crate's real scalar.
pub type C<T> = Complex<T>;

/// i (the imaginary unit) as `Complex<T>`.
pub fn im<T: Real>() -> C<T> {
    C::new(T::zero(), T::one())
}

/// Real number promoted to `Complex<T>`.
pub fn re<T: Real>(v: T) -> C<T> {
    C::new(v, T::zero())
}

/// exp(-i * angle) as a unit complex scalar.
pub fn phase_factor<T: Real>(angle: T) -> C<T> {
    C::new(angle.cos(), -angle.sin())
}
