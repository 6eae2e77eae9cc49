//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rayon::prelude::*;

/// Chunk length for [`par_sum_by`].
const SUM_CHUNK: usize = 1 << 16;

/// Floating-point scalar the simulator is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Compensated (Neumaier) summation; used wherever a few ulps matter, such as
/// the mass ledger.
pub fn neumaier_sum<T: Real, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Parallel compensated sum of `f(i, values[i])`. Chunk boundaries are
/// fixed, so the result does not depend on the thread count.
pub fn par_sum_by<T: Real>(values: &[T], f: impl Fn(usize, T) -> T + Sync) -> T {
    let partial: Vec<T> = values
        .par_chunks(SUM_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * SUM_CHUNK;
            neumaier_sum(chunk.iter().enumerate().map(|(i, &v)| f(base + i, v)))
        })
        .collect();
    neumaier_sum(partial)
}

/// `n` evenly spaced points covering `[lo, hi]`, endpoints included.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / count::<T>(n - 1);
            (0..n)
                .map(|i| if i + 1 == n { hi } else { lo + step * count(i) })
                .collect()
        }
    }
}
