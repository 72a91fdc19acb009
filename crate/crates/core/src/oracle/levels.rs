//! Level sets `{x : s(x) >= t}` of one-dimensional scorers on a bounded
//! support, found by splitting the support into pieces on which the scorer
//! is monotone and bisecting inside each piece.

use crate::error::{Error, Result};
use crate::model::{Plateau, ScoringModel};

/// Finite union of disjoint closed intervals, sorted. Endpoints carry no
/// mass under the continuous marginals used here.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntervalSet {
    parts: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn interval(a: f64, b: f64) -> Self {
        IntervalSet::from_parts(vec![(a, b)])
    }

    /// Normalizes arbitrary intervals: drops empty ones, sorts, merges
    /// overlapping or touching ones.
    pub fn from_parts(mut parts: Vec<(f64, f64)>) -> Self {
        parts.retain(|(a, b)| a < b);
        parts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (a, b) in parts {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        IntervalSet { parts: merged }
    }

    pub fn parts(&self) -> &[(f64, f64)] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.parts.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.parts.iter().any(|&(a, b)| a <= x && x <= b)
    }

    pub fn complement_within(&self, lo: f64, hi: f64) -> Self {
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        let mut cursor = lo;
        for &(a, b) in &self.parts {
            if a > cursor {
                out.push((cursor, a.min(hi)));
            }
            cursor = cursor.max(b);
        }
        if cursor < hi {
            out.push((cursor, hi));
        }
        IntervalSet::from_parts(out)
    }

    pub fn intersect(&self, other: &IntervalSet) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let (a1, b1) = self.parts[i];
            let (a2, b2) = other.parts[j];
            let (a, b) = (a1.max(a2), b1.min(b2));
            if a < b {
                out.push((a, b));
            }
            if b1 < b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::from_parts(out)
    }

    pub fn union(&self, other: &IntervalSet) -> Self {
        IntervalSet::from_parts(self.parts.iter().chain(&other.parts).copied().collect())
    }

    /// `self \ other` within the hull of `self`.
    pub fn minus(&self, other: &IntervalSet) -> Self {
        let Some(&(lo, _)) = self.parts.first() else {
            return IntervalSet::empty();
        };
        let hi = self.parts.last().map(|p| p.1).unwrap_or(lo);
        self.intersect(&other.complement_within(lo, hi))
    }

    pub fn symmetric_difference(&self, other: &IntervalSet) -> Self {
        self.minus(other).union(&other.minus(self))
    }

    /// Splits every part at the given sorted points.
    pub fn split_at(&self, points: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &(a, b) in &self.parts {
            let mut cursor = a;
            let start = points.partition_point(|&p| p <= a);
            for &p in points[start..].iter().take_while(|&&p| p < b) {
                out.push((cursor, p));
                cursor = p;
            }
            out.push((cursor, b));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Trend {
    Increasing,
    Decreasing,
    Flat(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    trend: Trend,
}

/// A one-dimensional scorer cut into monotone pieces over `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct LevelMap<'a> {
    model: &'a ScoringModel,
    pieces: Vec<Piece>,
    lo: f64,
    hi: f64,
    min: f64,
    max: f64,
}

/// Largest `x` in `(a, b)` with `pred(x)` false, for a predicate that is
/// false then true on `(a, b)`; only interior points are evaluated.
fn switch_point(a: f64, b: f64, pred: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn interior_offset(a: f64, b: f64) -> f64 {
    (b - a) * 1e-9
}

/// Points at which `model` may change monotonicity inside `(lo, hi)`.
fn monotone_breaks(model: &ScoringModel, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let mut out = match model {
        ScoringModel::Linear { weights } => {
            if weights.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: weights.len(),
                });
            }
            Vec::new()
        }
        ScoringModel::PiecewiseLinear(pl) => pl.breakpoints().to_vec(),
        ScoringModel::Posterior(eta) => {
            let mut k = eta.kinks();
            let (a, b) = eta.support();
            k.extend([a, b]);
            k
        }
        ScoringModel::Transformed { inner, .. } => monotone_breaks(inner, lo, hi)?,
        ScoringModel::Truncated { inner, threshold, .. } => {
            let inner_breaks = monotone_breaks(inner, lo, hi)?;
            let mut all = inner_breaks.clone();
            let mut edges = vec![lo];
            edges.extend(inner_breaks.iter().copied().filter(|&b| b > lo && b < hi));
            edges.push(hi);
            for w in edges.windows(2) {
                let (a, b) = (w[0], w[1]);
                let d = interior_offset(a, b);
                let (fa, fb) = (inner.eval1(a + d), inner.eval1(b - d));
                let t = *threshold;
                if (fa < t) != (fb < t) {
                    let rising = fa < fb;
                    all.push(switch_point(a, b, |x| (inner.eval1(x) >= t) == rising));
                }
            }
            all
        }
        ScoringModel::TieBroken { inner, plateaus } => {
            let mut all = monotone_breaks(inner, lo, hi)?;
            all.extend(plateaus.iter().flat_map(|p| [p.lo, p.hi]));
            all
        }
        ScoringModel::Member { index, family } => monotone_breaks(&family[*index], lo, hi)?,
    };
    out.retain(|&b| b > lo && b < hi);
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

impl<'a> LevelMap<'a> {
    pub fn new(model: &'a ScoringModel, lo: f64, hi: f64) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: model.dim(),
            });
        }
        let breaks = monotone_breaks(model, lo, hi)?;
        let mut edges = vec![lo];
        edges.extend(breaks);
        edges.push(hi);
        let mut pieces = Vec::with_capacity(edges.len() - 1);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let d = interior_offset(a, b);
            let (fa, fm, fb) = (model.eval1(a + d), model.eval1(0.5 * (a + b)), model.eval1(b - d));
            if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
                return Err(Error::invalid("scorer is not finite on the support"));
            }
            let trend = if fa < fb {
                Trend::Increasing
            } else if fa > fb {
                Trend::Decreasing
            } else if fa == fm {
                Trend::Flat(fa)
            } else {
                return Err(Error::invalid(format!("scorer is not monotone on [{a}, {b}]")));
            };
            min = min.min(fa).min(fb);
            max = max.max(fa).max(fb);
            pieces.push(Piece { lo: a, hi: b, trend });
        }
        Ok(LevelMap {
            model,
            pieces,
            lo,
            hi,
            min,
            max,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Approximate range of the scorer over the support.
    pub fn range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.model.eval1(x)
    }

    /// Piece boundaries, including both ends of the support.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.pieces.iter().map(|p| p.lo).collect();
        e.push(self.hi);
        e
    }

    /// Values taken on sets of positive length.
    pub fn flat_levels(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .filter_map(|p| match p.trend {
                Trend::Flat(v) => Some(v),
                _ => None,
            })
            .collect()
    }

    /// Maximal intervals on which the scorer is constant.
    pub fn plateaus(&self) -> Vec<Plateau> {
        let mut out: Vec<Plateau> = Vec::new();
        for p in &self.pieces {
            if let Trend::Flat(level) = p.trend {
                match out.last_mut() {
                    Some(last) if last.hi == p.lo && last.level == level => last.hi = p.hi,
                    _ => out.push(Plateau {
                        lo: p.lo,
                        hi: p.hi,
                        level,
                    }),
                }
            }
        }
        out
    }

    /// `{s >= t}`, or `{s > t}` when `strict`.
    pub fn upper(&self, t: f64, strict: bool) -> IntervalSet {
        let hit = |x: f64| {
            let s = self.model.eval1(x);
            if strict {
                s > t
            } else {
                s >= t
            }
        };
        let parts = self
            .pieces
            .iter()
            .filter_map(|p| match p.trend {
                Trend::Flat(v) => {
                    let inside = if strict { v > t } else { v >= t };
                    inside.then_some((p.lo, p.hi))
                }
                Trend::Increasing => Some((switch_point(p.lo, p.hi, hit), p.hi)),
                Trend::Decreasing => Some((p.lo, p.hi - (switch_point(p.lo, p.hi, |x| hit(p.lo + p.hi - x)) - p.lo))),
            })
            .collect();
        IntervalSet::from_parts(parts)
    }

    /// `{s <= t}`, or `{s < t}` when `strict`.
    pub fn lower(&self, t: f64, strict: bool) -> IntervalSet {
        self.upper(t, !strict).complement_within(self.lo, self.hi)
    }
}
