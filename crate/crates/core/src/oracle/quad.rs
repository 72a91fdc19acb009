//! Adaptive Gauss-Kronrod (7, 15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::Float;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

/// Tolerances and subdivision budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Float> QuadOptions<T> {
    pub fn absolute(abs_tol: T) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol: T::zero(),
            max_intervals: 4096,
        }
    }
}

fn c<T: Float>(x: f64) -> T {
    T::from(x).expect("constant fits the float type")
}

/// One 15-point Kronrod rule on `[a, b]` with its embedded 7-point Gauss
/// estimate; returns `(kronrod, |kronrod - gauss|)`.
pub fn gk15<T: Float, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = (b - a) / c(2.0);
    let mid = (a + b) / c(2.0);
    let fc = f(mid);
    let mut kronrod = fc * c(WGK[7]);
    let mut gauss = fc * c(WG[3]);
    for j in 0..7 {
        let dx = half * c(XGK[j]);
        let pair = f(mid - dx) + f(mid + dx);
        kronrod = kronrod + pair * c(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * c(WG[j / 2]);
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).abs())
}

struct Piece<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Float> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl<T: Float> Eq for Piece<T> {}

impl<T: Float> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Float> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`: the interval with the
/// largest error estimate is bisected until the summed estimate meets
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<T: Float, F: FnMut(T) -> T>(mut f: F, a: T, b: T, opts: QuadOptions<T>) -> Result<Quadrature<T>> {
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            error: T::zero(),
            evaluations: 0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("integration bounds must be finite"));
    }
    let (lo, hi, sign) = if a < b { (a, b, T::one()) } else { (b, a, -T::one()) };
    let (value, error) = gk15(&mut f, lo, hi);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a: lo,
        b: hi,
        value,
        error,
    });
    let (mut total, mut err) = (value, error);
    let target = |total: T| opts.abs_tol.max(opts.rel_tol * total.abs());
    while err > target(total) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Numerical {
                context: "adaptive quadrature".into(),
                achieved: err.to_f64().unwrap_or(f64::NAN),
                required: target(total).to_f64().unwrap_or(f64::NAN),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = (worst.a + worst.b) / c(2.0);
        if m <= worst.a || m >= worst.b {
            // interval cannot be split further in this precision
            heap.push(Piece {
                error: T::zero(),
                ..worst
            });
            err = heap.iter().fold(T::zero(), |s, p| s + p.error);
            if err <= target(total) {
                break;
            }
            continue;
        }
        let (v1, e1) = gk15(&mut f, worst.a, m);
        let (v2, e2) = gk15(&mut f, m, worst.b);
        evaluations += 30;
        total = total - worst.value + v1 + v2;
        err = err - worst.error + e1 + e2;
        heap.push(Piece {
            a: worst.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: m,
            b: worst.b,
            value: v2,
            error: e2,
        });
        if heap.len() % 64 == 0 {
            // re-sum to shed accumulated rounding in the running totals
            total = heap.iter().fold(T::zero(), |s, p| s + p.value);
            err = heap.iter().fold(T::zero(), |s, p| s + p.error);
        }
    }
    let total = heap.iter().fold(T::zero(), |s, p| s + p.value);
    let err = heap.iter().fold(T::zero(), |s, p| s + p.error);
    Ok(Quadrature {
        value: sign * total,
        error: err,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let q = integrate(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, QuadOptions::absolute(1e-13)).unwrap();
        assert!((q.value - 0.0).abs() < 1e-14);
        assert_eq!(q.evaluations, 15);
        let q = integrate(|x: f64| x.powi(20), -1.0, 1.0, QuadOptions::absolute(1e-14)).unwrap();
        assert!((q.value - 2.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn kinks_and_peaks() {
        let q = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, QuadOptions::absolute(1e-12)).unwrap();
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-12);
        let q = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, QuadOptions::absolute(1e-10)).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((q.value - exact).abs() < 1e-8);
    }

    #[test]
    fn reversed_and_empty() {
        let f = |x: f64| x.exp();
        let fwd = integrate(f, 0.0, 1.0, QuadOptions::absolute(1e-13)).unwrap().value;
        let back = integrate(f, 1.0, 0.0, QuadOptions::absolute(1e-13)).unwrap().value;
        assert_eq!(fwd, -back);
        assert!((fwd - (1f64.exp() - 1.0)).abs() < 1e-14);
        assert_eq!(integrate(f, 0.5, 0.5, QuadOptions::absolute(1e-13)).unwrap().value, 0.0);
    }

    #[test]
    fn single_precision() {
        let q = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, QuadOptions::absolute(1e-5)).unwrap();
        assert!((q.value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let opts = QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 0.0,
            max_intervals: 4,
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, opts);
        assert!(matches!(r, Err(Error::Numerical { .. })));
    }
}
