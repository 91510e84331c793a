use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type used for probabilities, scores and path weights: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the type cannot represent it at all.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `n · ln(n / total)` with the `0 · ln 0 = 0` convention.
pub(crate) fn xlogx_ratio<T: Scalar>(n: u64, total: u64) -> T {
    if n == 0 {
        T::zero()
    } else {
        let n = T::from_count(n);
        n * (n / T::from_count(total)).ln()
    }
}
