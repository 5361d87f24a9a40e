//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] scalar.
pub type Complex<T> = num_complex::Complex<T>;

/// Pairwise summation; result independent of thread scheduling and accurate to O(log n) ulps.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        let mut acc = T::zero();
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
