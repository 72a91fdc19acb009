//! Classification with a mass constraint: the plug-in risk `L_n`, its
//! oracle-threshold variant, the signed statistic `K_n(s, v)` and the terms
//! of its decomposition `K_n = K + Z_n + Lambda_n`.

use crate::data::{ClassCounts, Label};
use crate::edf::{check_comparable, total_cmp, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::rate::Rate;
use crate::scalar::Scalar;

/// Plug-in risk of the classifier predicting +1 on `{s >= q_hat}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MassConstrainedRisk<T> {
    pub l_hat: T,
    /// Empirical `(1 - u0)`-quantile of the scores.
    pub q_hat: T,
    /// `#{i : s_i >= q_hat}`.
    pub positive_count: usize,
}

/// Population values the decomposition is centred on.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleValues<T> {
    /// `K(s, v)`.
    pub k: T,
    /// `d/dv K(s, v)`.
    pub k_prime: T,
    /// True quantile `Q(s, v)`.
    pub q: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionSample<T> {
    pub k_hat: T,
    pub k_true: T,
    pub k_prime_true: T,
    pub z_n: T,
    pub lambda_n: T,
    pub sigma_sq: T,
}

fn check_lengths<T>(scores: &[T], labels: &[Label]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

fn signed_sum<T: Scalar>(pos: usize, neg: usize, n: usize) -> T {
    T::ratio(pos, n) - T::ratio(neg, n)
}

/// `L_n(s) = (1/n) #{i : Y_i (s_i - q) < 0}` for a supplied threshold.
pub fn l_fixed_threshold<T: Scalar>(scores: &[T], labels: &[Label], q: &T) -> Result<T> {
    check_lengths(scores, labels)?;
    check_comparable(scores)?;
    let errors = scores
        .iter()
        .zip(labels)
        .filter(|(s, y)| match y {
            Label::Pos => *s < q,
            Label::Neg => *s > q,
        })
        .count();
    Ok(T::ratio(errors, scores.len()))
}

/// Plug-in risk with the empirical quantile `Q_hat(s, 1 - u0)` as threshold.
/// A point sitting exactly on the threshold is never an error.
pub fn hat_l<T: Scalar>(scores: &[T], labels: &[Label], u0: &Rate<T>) -> Result<MassConstrainedRisk<T>> {
    check_lengths(scores, labels)?;
    let edf = EmpiricalDistribution::new(scores)?;
    let q_hat = edf.quantile(&u0.v0())?;
    let l_hat = l_fixed_threshold(scores, labels, &q_hat)?;
    let positive_count = scores.iter().filter(|s| **s >= q_hat).count();
    Ok(MassConstrainedRisk {
        l_hat,
        q_hat,
        positive_count,
    })
}

/// `K_n(s, v) = (1/n) sum_i Y_i 1{s_i <= Q_hat(s, v)}`.
pub fn hat_k<T: Scalar>(scores: &[T], labels: &[Label], v: &T) -> Result<T> {
    check_lengths(scores, labels)?;
    let q_hat = EmpiricalDistribution::new(scores)?.quantile(v)?;
    let (mut pos, mut neg) = (0, 0);
    for (s, y) in scores.iter().zip(labels) {
        if *s <= q_hat {
            match y {
                Label::Pos => pos += 1,
                Label::Neg => neg += 1,
            }
        }
    }
    Ok(signed_sum(pos, neg, scores.len()))
}

/// `K_n(s, v)` through its linear signed-rank form: with `Z_i = Y_i s_i`,
/// sum `sgn(Z_i)` over the points whose rank of `|Z_i|` is at most
/// `ceil(n v)`, divided by `n`. Needs distinct, strictly positive scores so
/// that `|Z_i| = s_i` and the ranks are well defined.
pub fn hat_k_via_signed_ranks<T: Scalar>(scores: &[T], labels: &[Label], v: &T) -> Result<T> {
    check_lengths(scores, labels)?;
    check_comparable(scores)?;
    if scores.iter().any(|s| *s <= T::zero()) {
        return Err(Error::invalid("signed-rank form needs strictly positive scores"));
    }
    let z: Vec<T> = scores
        .iter()
        .zip(labels)
        .map(|(s, y)| match y {
            Label::Pos => s.clone(),
            Label::Neg => T::zero() - s.clone(),
        })
        .collect();
    let abs = |t: &T| {
        if *t < T::zero() {
            T::zero() - t.clone()
        } else {
            t.clone()
        }
    };
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| total_cmp(&abs(&z[a]), &abs(&z[b])));
    if order.windows(2).any(|w| abs(&z[w[0]]) == abs(&z[w[1]])) {
        return Err(Error::TiedScores {
            statistic: "hat_k_via_signed_ranks",
        });
    }
    let n = z.len();
    let cutoff = EmpiricalDistribution::new(scores)?.quantile_rank(v)?;
    let (mut pos, mut neg) = (0, 0);
    for &i in order.iter().take(cutoff) {
        if z[i] > T::zero() {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    Ok(signed_sum(pos, neg, n))
}

/// Leading term `Z_n(s, v) = (1/n) sum (Y_i - K') 1{s_i <= Q} - K + v K'`.
pub fn z_term<T: Scalar>(scores: &[T], labels: &[Label], v: &T, oracle: &OracleValues<T>) -> Result<T> {
    check_lengths(scores, labels)?;
    check_comparable(scores)?;
    let n = scores.len();
    let (mut pos, mut neg) = (0, 0);
    for (s, y) in scores.iter().zip(labels) {
        if *s <= oracle.q {
            match y {
                Label::Pos => pos += 1,
                Label::Neg => neg += 1,
            }
        }
    }
    let signed: T = signed_sum(pos, neg, n);
    let below = T::ratio(pos + neg, n);
    Ok(signed - oracle.k_prime.clone() * below - oracle.k.clone() + v.clone() * oracle.k_prime.clone())
}

/// `sigma^2(s, v) = v - K^2 + v(1-v) K'^2 - 2(1-v) K' K`, the variance of
/// `sqrt(n) Z_n`.
pub fn sigma_sq<T: Scalar>(v: &T, k: &T, k_prime: &T) -> Result<T> {
    if !(*v > T::zero() && *v <= T::one()) {
        return Err(Error::invalid(format!("sigma_sq level must lie in (0,1], got {v:?}")));
    }
    let one_minus_v = T::one() - v.clone();
    let two = T::from_count(2);
    let s = v.clone() - k.clone() * k.clone() + v.clone() * one_minus_v.clone() * k_prime.clone() * k_prime.clone()
        - two * one_minus_v * k_prime.clone() * k.clone();
    if s < T::zero() {
        return Err(Error::Consistency {
            context: format!("sigma_sq({v:?}, K={k:?}, K'={k_prime:?}) is negative"),
            difference: s.to_f64(),
            tolerance: 0.0,
        });
    }
    Ok(s)
}

/// Remainder `Lambda_n = K_n - K - Z_n`.
pub fn lambda_remainder<T: Scalar>(scores: &[T], labels: &[Label], v: &T, oracle: &OracleValues<T>) -> Result<T> {
    Ok(decompose(scores, labels, v, oracle)?.lambda_n)
}

/// All terms of the decomposition for one sample.
pub fn decompose<T: Scalar>(
    scores: &[T],
    labels: &[Label],
    v: &T,
    oracle: &OracleValues<T>,
) -> Result<DecompositionSample<T>> {
    let k_hat = hat_k(scores, labels, v)?;
    let z_n = z_term(scores, labels, v, oracle)?;
    let lambda_n = k_hat.clone() - oracle.k.clone() - z_n.clone();
    Ok(DecompositionSample {
        k_hat,
        k_true: oracle.k.clone(),
        k_prime_true: oracle.k_prime.clone(),
        z_n,
        lambda_n,
        sigma_sq: sigma_sq(v, &oracle.k, &oracle.k_prime)?,
    })
}

/// `n_- / n`, the share of negatives.
pub fn negative_share<T: Scalar>(labels: &[Label]) -> T {
    let c = ClassCounts::of(labels);
    T::ratio(c.neg, c.total())
}
