//! Empirical cdf and its generalized inverse.
//!
//! `quantile(v)` is `inf { t : F_n(t) >= v }`, which on a sample of size `n`
//! is the `ceil(n v)`-th order statistic. Level 0 (where the inverse is
//! `-inf`) is rejected.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution<T> {
    sorted: Vec<T>,
}

pub(crate) fn total_cmp<T: PartialOrd>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("scores are validated to be comparable")
}

pub(crate) fn check_comparable<T: PartialOrd>(scores: &[T]) -> Result<()> {
    #[allow(clippy::eq_op)]
    if scores.iter().any(|s| s.partial_cmp(s).is_none()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    Ok(())
}

impl<T: Scalar> EmpiricalDistribution<T> {
    pub fn new(scores: &[T]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::invalid("empirical distribution of an empty sample"));
        }
        check_comparable(scores)?;
        let mut sorted = scores.to_vec();
        sorted.sort_by(total_cmp);
        Ok(EmpiricalDistribution { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[T] {
        &self.sorted
    }

    /// Number of sample points `<= t`.
    pub fn count_le(&self, t: &T) -> usize {
        self.sorted.partition_point(|s| s <= t)
    }

    /// `F_n(t) = #{i : s_i <= t} / n`.
    pub fn cdf(&self, t: &T) -> T {
        T::ratio(self.count_le(t), self.len())
    }

    /// Rank (1-based) of the order statistic returned by `quantile(v)`.
    pub fn quantile_rank(&self, v: &T) -> Result<usize> {
        if !(*v > T::zero() && *v <= T::one()) {
            return Err(Error::invalid(format!("quantile level must lie in (0,1], got {v:?}")));
        }
        let n = self.len();
        let k = (T::from_count(n) * v.clone()).ceil_count();
        Ok(k.clamp(1, n))
    }

    pub fn quantile(&self, v: &T) -> Result<T> {
        let k = self.quantile_rank(v)?;
        Ok(self.sorted[k - 1].clone())
    }
}

/// Convenience wrapper: `quantile` of an unsorted sample.
pub fn quantile<T: Scalar>(scores: &[T], v: &T) -> Result<T> {
    EmpiricalDistribution::new(scores)?.quantile(v)
}

#[cfg(test)]
mod tests {
    use num_rational::Ratio;
    use proptest::prelude::*;

    use super::*;

    fn sample() -> EmpiricalDistribution<f64> {
        EmpiricalDistribution::new(&[0.7, 0.1, 0.9, 0.3]).unwrap()
    }

    /// Generalized inverse evaluated literally: the smallest sample point
    /// whose cdf reaches `v` (the infimum is attained at a jump).
    fn inf_definition(scores: &[f64], v: f64) -> f64 {
        let n = scores.len() as f64;
        let mut cands: Vec<f64> = scores
            .iter()
            .cloned()
            .filter(|t| scores.iter().filter(|s| *s <= t).count() as f64 / n >= v)
            .collect();
        cands.sort_by(f64::total_cmp);
        cands[0]
    }

    #[test]
    fn cdf_examples() {
        let d = sample();
        assert_eq!(d.cdf(&0.3), 0.5);
        assert_eq!(d.cdf(&0.05), 0.0);
        assert_eq!(d.cdf(&0.9), 1.0);
        assert_eq!(d.cdf(&5.0), 1.0);
    }

    #[test]
    fn quantile_examples() {
        let d = sample();
        assert_eq!(d.quantile(&0.5).unwrap(), 0.3);
        assert_eq!(inf_definition(&[0.1, 0.3, 0.7, 0.9], 0.5), 0.3);
        assert_eq!(d.quantile(&1.0).unwrap(), 0.9);
        assert_eq!(d.quantile(&0.25).unwrap(), 0.1);
    }

    #[test]
    fn quantile_rejects_bad_levels() {
        let d = sample();
        assert!(d.quantile(&0.0).is_err());
        assert!(d.quantile(&1.5).is_err());
        assert!(d.quantile(&-0.1).is_err());
        assert!(EmpiricalDistribution::<f64>::new(&[]).is_err());
        assert!(EmpiricalDistribution::new(&[0.1, f64::NAN]).is_err());
    }

    #[test]
    fn ties_handled_by_order_statistic() {
        let d = EmpiricalDistribution::new(&[0.5, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(d.quantile(&0.5).unwrap(), 0.5);
        assert_eq!(d.quantile(&0.76).unwrap(), 1.0);
        assert_eq!(d.cdf(&0.5), 0.75);
    }

    #[test]
    fn rational_quantile_exact() {
        let s: Vec<Ratio<i64>> = [7, 1, 9, 3].iter().map(|&k| Ratio::new(k, 10)).collect();
        let d = EmpiricalDistribution::new(&s).unwrap();
        assert_eq!(d.quantile(&Ratio::new(1, 2)).unwrap(), Ratio::new(3, 10));
        assert_eq!(d.quantile(&Ratio::new(3, 4)).unwrap(), Ratio::new(7, 10));
        assert_eq!(d.quantile(&Ratio::new(751, 1000)).unwrap(), Ratio::new(9, 10));
    }

    proptest! {
        #[test]
        fn matches_inf_definition(xs in prop::collection::vec(-5.0f64..5.0, 1..40), v in 0.001f64..1.0) {
            let d = EmpiricalDistribution::new(&xs).unwrap();
            prop_assert_eq!(d.quantile(&v).unwrap(), inf_definition(&xs, v));
        }

        #[test]
        fn galois_property(xs in prop::collection::vec(-5.0f64..5.0, 1..40), v in 0.001f64..1.0) {
            let d = EmpiricalDistribution::new(&xs).unwrap();
            let q = d.quantile(&v).unwrap();
            prop_assert!(d.cdf(&q) >= v - 1e-12);
        }

        #[test]
        fn galois_equality_on_grid(mut ks in prop::collection::btree_set(0i64..10_000, 1..40), j in 1usize..40) {
            let xs: Vec<Ratio<i64>> = std::mem::take(&mut ks).into_iter().map(|k| Ratio::new(k, 100)).collect();
            let n = xs.len();
            let j = (j - 1) % n + 1;
            let v = Ratio::new(j as i64, n as i64);
            let d = EmpiricalDistribution::new(&xs).unwrap();
            prop_assert_eq!(d.cdf(&d.quantile(&v).unwrap()), v);
        }

        #[test]
        fn monotone_equivariance(xs in prop::collection::vec(-3.0f64..3.0, 1..40), v in 0.001f64..1.0) {
            let phi = |x: f64| 2.0 * x + 1.0;
            let d = EmpiricalDistribution::new(&xs).unwrap();
            let mapped: Vec<f64> = xs.iter().map(|&x| phi(x)).collect();
            let dm = EmpiricalDistribution::new(&mapped).unwrap();
            prop_assert_eq!(dm.quantile(&v).unwrap(), phi(d.quantile(&v).unwrap()));
        }

        #[test]
        fn mass_constraint_sandwich(ks in prop::collection::btree_set(0i64..100_000, 2..60), u0 in 0.01f64..0.99) {
            let xs: Vec<f64> = ks.into_iter().map(|k| k as f64 / 1000.0).collect();
            let n = xs.len() as f64;
            let q = quantile(&xs, &(1.0 - u0)).unwrap();
            let above = xs.iter().filter(|&&s| s > q).count() as f64;
            let at_or_above = xs.iter().filter(|&&s| s >= q).count() as f64;
            prop_assert!(above <= n * u0 + 1e-9);
            prop_assert!(n * u0 <= at_or_above + 1e-9);
        }
    }
}
