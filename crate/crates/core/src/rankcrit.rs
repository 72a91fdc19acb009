//! Empirical ranking criteria focused on the top of the list: AUC, ROC points
//! indexed by the top rate, local AUC, truncated AUC, the local ranking error,
//! rank-sum statistics and the combined criterion `M_n`.
//!
//! Pair statistics are counted in `O(n log n)` after one sort; every count is
//! an integer until the final division, so exact scalars give exact values.

use std::io::Write;

use serde::Serialize;

use crate::classify::hat_l;
use crate::data::{ClassCounts, Label};
use crate::edf::{check_comparable, total_cmp, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::rate::{Rate, TopRate};
use crate::scalar::Scalar;

/// One point of the ROC curve indexed by the top rate `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct RocPoint<T> {
    pub u: T,
    pub q_hat: T,
    pub alpha_hat: T,
    pub beta_hat: T,
    /// `#{i : s_i >= q_hat}`.
    pub top_count: usize,
}

/// How the rank statistics (`t_wilcoxon`, `t_local`, `w_hat`) are handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RankStats {
    /// Compute them; tied scores are an error.
    #[default]
    Required,
    /// Compute them when scores are distinct, omit them otherwise.
    IfDistinct,
    /// Never compute them.
    Skip,
}

/// Every empirical criterion for one (scores, labels, u0) triple.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Serialize, TopRate<T>: Serialize"))]
pub struct CriterionReport<T> {
    pub u0: TopRate<T>,
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Empirical `(1 - u0)`-quantile; `None` at the global endpoint.
    pub q_hat: Option<T>,
    pub l_hat: T,
    pub auc_hat: T,
    pub locauc_hat: T,
    pub trunc_auc_hat: T,
    pub r_local_hat: T,
    pub t_wilcoxon: Option<T>,
    pub t_local: Option<T>,
    pub w_hat: Option<T>,
    pub m_hat: T,
    pub alpha_hat: T,
    pub beta_hat: T,
    pub p_hat: T,
}

/// `M_n` and its two components.
#[derive(Clone, Debug, PartialEq)]
pub struct MDecomposition<T> {
    pub m_hat: T,
    pub r_local_hat: T,
    pub l_hat: T,
    pub neg_share: T,
}

/// Integer pair counts shared by all pair statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct PairCounts {
    /// (neg i, pos j) with `s_j > s_i`.
    concordant: u64,
    /// Same, with `s_j` in the top set.
    concordant_top: u64,
    /// (neg i, pos j) with `s_i > s_j` and `s_j` in the top set.
    discordant_top: u64,
    pos_top: usize,
    neg_top: usize,
    counts: ClassCounts,
}

fn check_lengths<T: PartialOrd>(scores: &[T], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    check_comparable(scores)
}

fn ascending_order<T: PartialOrd>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| total_cmp(&scores[a], &scores[b]));
    order
}

/// Empirical top threshold, or `None` when every point is in the top set.
fn threshold<T: Scalar>(scores: &[T], u0: &TopRate<T>) -> Result<Option<T>> {
    match u0 {
        TopRate::Local(r) => Ok(Some(EmpiricalDistribution::new(scores)?.quantile(&r.v0())?)),
        TopRate::Global => Ok(None),
    }
}

fn pair_counts<T: Scalar>(scores: &[T], labels: &[Label], q: Option<&T>) -> PairCounts {
    let order = ascending_order(scores);
    let counts = ClassCounts::of(labels);
    let mut out = PairCounts {
        counts,
        ..PairCounts::default()
    };
    let in_top = |s: &T| q.is_none_or(|q| s >= q);
    let mut neg_below = 0u64;
    let mut start = 0;
    while start < order.len() {
        let s = &scores[order[start]];
        let mut end = start;
        while end < order.len() && scores[order[end]] == *s {
            end += 1;
        }
        let group = &order[start..end];
        let pos_here = group.iter().filter(|&&i| labels[i].is_pos()).count();
        let neg_here = group.len() - pos_here;
        let neg_above = counts.neg as u64 - neg_below - neg_here as u64;
        let top = in_top(s);
        out.concordant += pos_here as u64 * neg_below;
        if top {
            out.concordant_top += pos_here as u64 * neg_below;
            out.discordant_top += pos_here as u64 * neg_above;
            out.pos_top += pos_here;
            out.neg_top += neg_here;
        }
        neg_below += neg_here as u64;
        start = end;
    }
    out
}

fn count<T: Scalar>(c: u64) -> T {
    T::from_count(c as usize)
}

/// Global AUC: share of (negative, positive) pairs ranked correctly. Ties
/// count as incorrect.
pub fn hat_auc<T: Scalar>(scores: &[T], labels: &[Label]) -> Result<T> {
    check_lengths(scores, labels)?;
    let c = ClassCounts::of(labels).require_both("hat_auc")?;
    let pc = pair_counts(scores, labels, None);
    Ok(count::<T>(pc.concordant) / T::from_count(c.pos * c.neg))
}

/// `(alpha_hat, beta_hat)` at each top rate of the grid.
pub fn roc_points<T: Scalar>(scores: &[T], labels: &[Label], u_grid: &[Rate<T>]) -> Result<Vec<RocPoint<T>>> {
    check_lengths(scores, labels)?;
    let c = ClassCounts::of(labels).require_both("roc_points")?;
    if u_grid.is_empty() {
        return Ok(Vec::new());
    }
    let edf = EmpiricalDistribution::new(scores)?;
    u_grid
        .iter()
        .map(|u| {
            let q_hat = edf.quantile(&u.v0())?;
            let (mut pos, mut neg) = (0, 0);
            for (s, y) in scores.iter().zip(labels) {
                if *s >= q_hat {
                    match y {
                        Label::Pos => pos += 1,
                        Label::Neg => neg += 1,
                    }
                }
            }
            Ok(RocPoint {
                u: u.u0().clone(),
                q_hat,
                alpha_hat: T::ratio(neg, c.neg),
                beta_hat: T::ratio(pos, c.pos),
                top_count: pos + neg,
            })
        })
        .collect()
}

/// `k` evenly spaced top rates `i / (k + 1)`, `i = 1..=k`.
pub fn even_grid<T: Scalar>(k: usize) -> Result<Vec<Rate<T>>> {
    (1..=k).map(|i| Rate::new(T::ratio(i, k + 1))).collect()
}

/// Writes ROC points as CSV with columns `u,alpha,beta,d_beta`, where
/// `d_beta = (u - (1 - p) alpha) / p` is the mass-constraint line solved for
/// `beta`.
pub fn write_roc_csv<W: Write>(points: &[RocPoint<f64>], p_hat: f64, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["u", "alpha", "beta", "d_beta"])?;
    for pt in points {
        let d_beta = (pt.u - (1.0 - p_hat) * pt.alpha_hat) / p_hat;
        w.write_record([
            format!("{:?}", pt.u),
            format!("{:?}", pt.alpha_hat),
            format!("{:?}", pt.beta_hat),
            format!("{:?}", d_beta),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<roc output>", e))?;
    Ok(())
}

/// Local AUC: share of (negative, positive) pairs in which the positive
/// outscores the negative and lies in the top set `{s >= q_hat}`.
pub fn hat_locauc<T: Scalar>(scores: &[T], labels: &[Label], u0: &TopRate<T>) -> Result<T> {
    check_lengths(scores, labels)?;
    let c = ClassCounts::of(labels).require_both("hat_locauc")?;
    let q = threshold(scores, u0)?;
    let pc = pair_counts(scores, labels, q.as_ref());
    Ok(count::<T>(pc.concordant_top) / T::from_count(c.pos * c.neg))
}

/// Area under the empirical ROC curve up to `alpha_hat(u0)`, through
/// `locauc - beta + alpha * beta`.
pub fn trunc_auc<T: Scalar>(scores: &[T], labels: &[Label], u0: &TopRate<T>) -> Result<T> {
    check_lengths(scores, labels)?;
    let c = ClassCounts::of(labels).require_both("trunc_auc")?;
    let q = threshold(scores, u0)?;
    let pc = pair_counts(scores, labels, q.as_ref());
    let locauc = count::<T>(pc.concordant_top) / T::from_count(c.pos * c.neg);
    let alpha = T::ratio(pc.neg_top, c.neg);
    let beta = T::ratio(pc.pos_top, c.pos);
    Ok(locauc - beta.clone() + alpha * beta)
}

/// Area under the empirical ROC step curve up to `alpha_hat(u0)`, summed
/// strip by strip: each negative in the top set adds width `1/n_-` at the
/// height `beta` reached by the positives scored strictly above it.
pub fn trunc_auc_step<T: Scalar>(scores: &[T], labels: &[Label], u0: &TopRate<T>) -> Result<T> {
    check_lengths(scores, labels)?;
    let c = ClassCounts::of(labels).require_both("trunc_auc_step")?;
    let q = threshold(scores, u0)?;
    let mut order = ascending_order(scores);
    order.reverse();
    let (mut area, mut pos_above) = (0u64, 0u64);
    let mut start = 0;
    while start < order.len() {
        let s = &scores[order[start]];
        if q.as_ref().is_some_and(|q| s < q) {
            break;
        }
        let mut end = start;
        while end < order.len() && scores[order[end]] == *s {
            end += 1;
        }
        let group = &order[start..end];
        let pos_here = group.iter().filter(|&&i| labels[i].is_pos()).count() as u64;
        area += (group.len() as u64 - pos_here) * pos_above;
        pos_above += pos_here;
        start = end;
    }
    Ok(count::<T>(area) / T::from_count(c.pos * c.neg))
}

/// Local ranking error: ordered discordant pairs with both members in the
/// top set, over `n (n - 1)`.
pub fn hat_r_local<T: Scalar>(scores: &[T], labels: &[Label], u0: &TopRate<T>) -> Result<T> {
    check_lengths(scores, labels)?;
    let n = scores.len();
    if n < 2 {
        return Err(Error::invalid("hat_r_local needs at least two points"));
    }
    let q = threshold(scores, u0)?;
    let pc = pair_counts(scores, labels, q.as_ref());
    Ok(T::from_count(2 * pc.discordant_top as usize) / T::from_count(n * (n - 1)))
}

/// 1-based ranks of distinct scores.
pub fn ranks<T: Scalar>(scores: &[T], statistic: &'static str) -> Result<Vec<usize>> {
    check_comparable(scores)?;
    let order = ascending_order(scores);
    if order.windows(2).any(|w| scores[w[0]] == scores[w[1]]) {
        return Err(Error::TiedScores { statistic });
    }
    let mut r = vec![0; scores.len()];
    for (k, &i) in order.iter().enumerate() {
        r[i] = k + 1;
    }
    Ok(r)
}

/// Sum over positives of `rank / (n + 1)`.
pub fn t_wilcoxon<T: Scalar>(scores: &[T], labels: &[Label]) -> Result<T> {
    check_lengths(scores, labels)?;
    let r = ranks(scores, "t_wilcoxon")?;
    let n = scores.len();
    let total: usize = r.iter().zip(labels).filter(|(_, y)| y.is_pos()).map(|(r, _)| r).sum();
    Ok(T::ratio(total, n + 1))
}

/// Truncated rank sum with `phi(v) = v 1{v > 1 - u0}` applied to the
/// normalized ranks of the positives.
pub fn t_local<T: Scalar>(scores: &[T], labels: &[Label], u0: &TopRate<T>) -> Result<T> {
    check_lengths(scores, labels)?;
    let r = ranks(scores, "t_local")?;
    let n = scores.len();
    // rk / (n + 1) > v0 compared on counts, so exact boundaries agree
    // across scalars
    let cut = (T::from_count(n + 1) * (T::one() - u0.u0())).floor_count();
    let total: usize = r
        .iter()
        .zip(labels)
        .filter(|(&rk, y)| y.is_pos() && rk > cut)
        .map(|(rk, _)| rk)
        .sum();
    Ok(T::ratio(total, n + 1))
}

/// `t_local / n_+`, the plug-in estimate of `W(s, u0)`.
pub fn w_hat<T: Scalar>(scores: &[T], labels: &[Label], u0: &TopRate<T>) -> Result<T> {
    let t = t_local(scores, labels, u0)?;
    let c = ClassCounts::of(labels);
    if c.pos == 0 {
        return Err(Error::SingleClass {
            statistic: "w_hat",
            positives: 0,
            negatives: c.neg,
        });
    }
    Ok(t / T::from_count(c.pos))
}

fn l_hat_top<T: Scalar>(scores: &[T], labels: &[Label], u0: &TopRate<T>) -> Result<T> {
    match u0 {
        TopRate::Local(r) => Ok(hat_l(scores, labels, r)?.l_hat),
        // every point is predicted positive: the negatives are the errors
        TopRate::Global => Ok(crate::classify::negative_share(labels)),
    }
}

/// `M_n = R_n + (n_- / n) L_n`.
pub fn hat_m<T: Scalar>(scores: &[T], labels: &[Label], u0: &TopRate<T>) -> Result<MDecomposition<T>> {
    check_lengths(scores, labels)?;
    let c = ClassCounts::of(labels).require_both("hat_m")?;
    let r_local_hat = hat_r_local(scores, labels, u0)?;
    let l_hat = l_hat_top(scores, labels, u0)?;
    let neg_share = T::ratio(c.neg, c.total());
    Ok(MDecomposition {
        m_hat: r_local_hat.clone() + neg_share.clone() * l_hat.clone(),
        r_local_hat,
        l_hat,
        neg_share,
    })
}

/// All criteria at once, sharing one sort.
pub fn full_report<T: Scalar>(
    scores: &[T],
    labels: &[Label],
    u0: &TopRate<T>,
    rank_stats: RankStats,
) -> Result<CriterionReport<T>> {
    check_lengths(scores, labels)?;
    let c = ClassCounts::of(labels).require_both("full_report")?;
    let n = c.total();
    if n < 2 {
        return Err(Error::invalid("full_report needs at least two points"));
    }
    let q_hat = threshold(scores, u0)?;
    let pc = pair_counts(scores, labels, q_hat.as_ref());
    let pairs = T::from_count(c.pos * c.neg);
    let auc_hat = count::<T>(pc.concordant) / pairs.clone();
    let locauc_hat = count::<T>(pc.concordant_top) / pairs;
    let alpha_hat = T::ratio(pc.neg_top, c.neg);
    let beta_hat = T::ratio(pc.pos_top, c.pos);
    let trunc_auc_hat = locauc_hat.clone() - beta_hat.clone() + alpha_hat.clone() * beta_hat.clone();
    let r_local_hat = T::from_count(2 * pc.discordant_top as usize) / T::from_count(n * (n - 1));
    let l_hat = l_hat_top(scores, labels, u0)?;
    let neg_share = T::ratio(c.neg, n);
    let m_hat = r_local_hat.clone() + neg_share * l_hat.clone();
    let p_hat = T::ratio(c.pos, n);

    let distinct = ranks(scores, "full_report").is_ok();
    let (t_wil, t_loc, w) = match rank_stats {
        RankStats::Skip => (None, None, None),
        RankStats::IfDistinct if !distinct => (None, None, None),
        _ => {
            let t_wil = t_wilcoxon(scores, labels)?;
            let t_loc = t_local(scores, labels, u0)?;
            let w = t_loc.clone() / T::from_count(c.pos);
            (Some(t_wil), Some(t_loc), Some(w))
        }
    };

    // both sides count the top set
    let d_line = p_hat.clone() * beta_hat.clone() + T::ratio(c.neg, n) * alpha_hat.clone();
    let top_share = T::ratio(pc.pos_top + pc.neg_top, n);
    let gap = (d_line - top_share).to_f64().abs();
    let tolerance = 1e3 * T::EPSILON;
    if gap > tolerance {
        return Err(Error::Consistency {
            context: "empirical mass-constraint line".into(),
            difference: gap,
            tolerance,
        });
    }

    Ok(CriterionReport {
        u0: u0.clone(),
        n,
        n_pos: c.pos,
        n_neg: c.neg,
        q_hat,
        l_hat,
        auc_hat,
        locauc_hat,
        trunc_auc_hat,
        r_local_hat,
        t_wilcoxon: t_wil,
        t_local: t_loc,
        w_hat: w,
        m_hat,
        alpha_hat,
        beta_hat,
        p_hat,
    })
}

impl CriterionReport<f64> {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report fields are plain numbers")
    }
}

impl<T: Scalar> CriterionReport<T> {
    /// Lossy conversion for display and serialization.
    pub fn to_f64(&self) -> CriterionReport<f64> {
        let f = |t: &T| t.to_f64();
        let o = |t: &Option<T>| t.as_ref().map(Scalar::to_f64);
        CriterionReport {
            u0: match &self.u0 {
                TopRate::Local(r) => TopRate::Local(Rate::new(r.u0().to_f64()).expect("valid rate")),
                TopRate::Global => TopRate::Global,
            },
            n: self.n,
            n_pos: self.n_pos,
            n_neg: self.n_neg,
            q_hat: o(&self.q_hat),
            l_hat: f(&self.l_hat),
            auc_hat: f(&self.auc_hat),
            locauc_hat: f(&self.locauc_hat),
            trunc_auc_hat: f(&self.trunc_auc_hat),
            r_local_hat: f(&self.r_local_hat),
            t_wilcoxon: o(&self.t_wilcoxon),
            t_local: o(&self.t_local),
            w_hat: o(&self.w_hat),
            m_hat: f(&self.m_hat),
            alpha_hat: f(&self.alpha_hat),
            beta_hat: f(&self.beta_hat),
            p_hat: f(&self.p_hat),
        }
    }
}
