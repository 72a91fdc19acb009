//! Scalar abstraction for the empirical estimators.
//!
//! Every empirical statistic in this crate is a ratio of integer counts, so
//! the estimators are written once against [`Scalar`] and run either in
//! floating point or in exact rational arithmetic. Exact arithmetic is what
//! lets finite-sample identities be checked with a residual of exactly zero.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::Num;

pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// Relative rounding error of one operation; zero when exact.
    const EPSILON: f64;

    fn from_count(n: usize) -> Self;

    /// Smallest integer `k` with `k >= self`, for nonnegative `self`.
    ///
    /// Floating-point implementations snap values within a few ulps of an
    /// integer onto that integer, so `n * (1 - u0)` computed as `4 * 0.5`
    /// or `10 * 0.8` yields the count the user meant.
    fn ceil_count(&self) -> usize;

    /// Largest integer `k` with `k <= self`, for nonnegative `self`, with the
    /// same snapping as [`Scalar::ceil_count`].
    fn floor_count(&self) -> usize;

    fn to_f64(&self) -> f64;

    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EPSILON: f64 = <$t>::EPSILON as f64;

            fn from_count(n: usize) -> Self {
                n as $t
            }

            fn ceil_count(&self) -> usize {
                let x = *self;
                debug_assert!(x >= 0.0, "ceil_count of negative value {x}");
                let nearest = x.round();
                let slack = 4.0 * <$t>::EPSILON * x.abs().max(1.0);
                let k = if (x - nearest).abs() <= slack {
                    nearest
                } else {
                    x.ceil()
                };
                k.max(0.0) as usize
            }

            fn floor_count(&self) -> usize {
                let x = *self;
                debug_assert!(x >= 0.0, "floor_count of negative value {x}");
                let nearest = x.round();
                let slack = 4.0 * <$t>::EPSILON * x.abs().max(1.0);
                let k = if (x - nearest).abs() <= slack {
                    nearest
                } else {
                    x.floor()
                };
                k.max(0.0) as usize
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

macro_rules! ratio_scalar {
    ($t:ty) => {
        impl Scalar for Ratio<$t> {
            const EPSILON: f64 = 0.0;

            fn from_count(n: usize) -> Self {
                Ratio::from_integer(n as $t)
            }

            fn ceil_count(&self) -> usize {
                debug_assert!(*self.numer() >= 0, "ceil_count of negative value");
                self.ceil().to_integer() as usize
            }

            fn floor_count(&self) -> usize {
                debug_assert!(*self.numer() >= 0, "floor_count of negative value");
                self.floor().to_integer() as usize
            }

            fn to_f64(&self) -> f64 {
                *self.numer() as f64 / *self.denom() as f64
            }
        }
    };
}

ratio_scalar!(i64);
ratio_scalar!(i128);
