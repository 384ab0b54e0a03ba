//! Scalar abstraction for the numeric core.
//!
//! Everything downstream of dataset ingestion (grids, filter banks,
//! dictionaries, regression) is generic over [`Real`], so the same code runs
//! in `f32` or `f64`. Geometry and file parsing stay in `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftNum;

/// Floating point scalar usable throughout the numeric core.
pub trait Real:
    Float
    + FloatConst
    + FftNum
    + FromPrimitive
    + NumAssign
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Display
    + LowerExp
    + Debug
    + Default
    + 'static
{
    /// Lossy conversion from `f64`; panics only for exotic scalar types.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand used when writing literals in generic code.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64_lossy(x)
}

/// Kahan-compensated sum. Keeps reductions insensitive to input order at
/// the 1e-10 level required by the selection-path reproducibility contract.
pub fn ksum<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let mut s = T::zero();
    let mut c = T::zero();
    for x in xs {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Compensated dot product of two equal-length slices.
pub fn kdot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    ksum(a.iter().zip(b).map(|(&x, &y)| x * y))
}
