//! Scalar abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the toolkit is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits in scalar type")
    }

    #[inline]
    fn from_usize_(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `r^s` for `r ≥ 0` and `s ≥ 0`, with `0^s = 0` for positive `s` and `r^0 = 1`.
    #[inline]
    fn pow_s(self, s: Self) -> Self {
        if s == Self::zero() {
            Self::one()
        } else if self <= Self::zero() {
            Self::zero()
        } else if s == Self::lit(2.0) {
            self * self
        } else {
            (s * self.ln()).exp()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
