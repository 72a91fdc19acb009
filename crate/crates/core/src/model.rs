//! Scoring functions `s : X -> R`.
//!
//! A [`ScoringModel`] is a closed enum so models serialize to JSON, compare
//! by value, and can be decomposed into monotone pieces by the oracle.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::Posterior;

/// Continuous piecewise-linear function of one variable with bounded,
/// nonvanishing slopes. Outside the outer breakpoints the adjacent segment
/// is extended, so the slope bounds hold on the whole line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseLinearRepr", into = "PiecewiseLinearRepr")]
pub struct PiecewiseLinear {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    slope_min: f64,
    slope_max: f64,
    /// Declared score range `(0, lambda)`; metadata only.
    range_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PiecewiseLinearRepr {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    slope_min: Option<f64>,
    #[serde(default)]
    slope_max: Option<f64>,
    #[serde(default)]
    range_bound: Option<f64>,
}

impl TryFrom<PiecewiseLinearRepr> for PiecewiseLinear {
    type Error = Error;

    fn try_from(r: PiecewiseLinearRepr) -> Result<Self> {
        let mut pl = PiecewiseLinear::from_points(r.breakpoints, r.values)?;
        if r.slope_min.is_some() || r.slope_max.is_some() {
            let lo = r.slope_min.unwrap_or(pl.slope_min);
            let hi = r.slope_max.unwrap_or(pl.slope_max);
            pl = pl.with_slope_bounds(lo, hi)?;
        }
        if let Some(lambda) = r.range_bound {
            pl = pl.with_range_bound(lambda)?;
        }
        Ok(pl)
    }
}

impl From<PiecewiseLinear> for PiecewiseLinearRepr {
    fn from(p: PiecewiseLinear) -> Self {
        PiecewiseLinearRepr {
            breakpoints: p.breakpoints,
            values: p.values,
            slope_min: Some(p.slope_min),
            slope_max: Some(p.slope_max),
            range_bound: p.range_bound,
        }
    }
}

impl PiecewiseLinear {
    /// Builds the interpolant and declares the tightest slope bounds it meets.
    pub fn from_points(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(Error::invalid(
                "piecewise-linear model needs >= 2 breakpoints and one value per breakpoint",
            ));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("piecewise-linear model has non-finite entries"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        let slopes: Vec<f64> = breakpoints
            .windows(2)
            .zip(values.windows(2))
            .map(|(b, v)| ((v[1] - v[0]) / (b[1] - b[0])).abs())
            .collect();
        let slope_min = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        let slope_max = slopes.iter().cloned().fold(0.0, f64::max);
        if slope_min <= 0.0 {
            return Err(Error::invalid("piecewise-linear model has a flat segment"));
        }
        Ok(PiecewiseLinear {
            breakpoints,
            values,
            slope_min,
            slope_max,
            range_bound: None,
        })
    }

    /// Declares bounds `m <= |slope| <= M`; fails if a segment violates them.
    pub fn with_slope_bounds(mut self, m: f64, big_m: f64) -> Result<Self> {
        if !(m > 0.0 && m <= big_m && big_m.is_finite()) {
            return Err(Error::invalid(format!(
                "slope bounds need 0 < m <= M < inf, got m={m}, M={big_m}"
            )));
        }
        let tol = 1e-12 * big_m.max(1.0);
        if self.slope_min < m - tol || self.slope_max > big_m + tol {
            return Err(Error::invalid(format!(
                "segment slopes in [{}, {}] violate bounds [{m}, {big_m}]",
                self.slope_min, self.slope_max
            )));
        }
        self.slope_min = m;
        self.slope_max = big_m;
        Ok(self)
    }

    pub fn with_range_bound(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("range bound must be positive, got {lambda}")));
        }
        self.range_bound = Some(lambda);
        Ok(self)
    }

    /// Identity on `[lo, hi]` (extended linearly).
    pub fn identity(lo: f64, hi: f64) -> Result<Self> {
        Self::from_points(vec![lo, hi], vec![lo, hi])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slope_bounds(&self) -> (f64, f64) {
        (self.slope_min, self.slope_max)
    }

    pub fn range_bound(&self) -> Option<f64> {
        self.range_bound
    }

    pub fn slope(&self, segment: usize) -> f64 {
        let b = &self.breakpoints;
        let v = &self.values;
        (v[segment + 1] - v[segment]) / (b[segment + 1] - b[segment])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        let last = b.len() - 2;
        let seg = b[1..=last].partition_point(|&bp| bp <= x).min(last);
        self.values[seg] + self.slope(seg) * (x - b[seg])
    }

    /// Same breakpoints, values negated (the `lambda - s` mirror, up to shift).
    pub fn mirrored(&self) -> Self {
        PiecewiseLinear {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}

/// Strictly monotone map applied on top of another score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MonotoneMap {
    Affine {
        scale: f64,
        shift: f64,
    },
    /// `sign(x) * |x|^exponent`, increasing for positive exponents.
    SignedPower {
        exponent: f64,
    },
    Exp,
}

impl MonotoneMap {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            MonotoneMap::Affine { scale, shift } => scale * x + shift,
            MonotoneMap::SignedPower { exponent } => x.signum() * x.abs().powf(exponent),
            MonotoneMap::Exp => x.exp(),
        }
    }

    pub fn is_increasing(&self) -> bool {
        match *self {
            MonotoneMap::Affine { scale, .. } => scale > 0.0,
            MonotoneMap::SignedPower { exponent } => exponent > 0.0,
            MonotoneMap::Exp => true,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MonotoneMap::Affine { scale, shift } => scale != 0.0 && scale.is_finite() && shift.is_finite(),
            MonotoneMap::SignedPower { exponent } => exponent > 0.0 && exponent.is_finite(),
            MonotoneMap::Exp => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("map {self:?} is not strictly monotone")))
        }
    }
}

/// How a truncated score is filled below its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BelowFill {
    /// A single value (creates an atom in the score distribution).
    Constant { value: f64 },
    /// `threshold - 1 - inner(x)`: order-reversing and atom-free.
    Reflected,
}

/// An interval `[lo, hi]` on which a one-dimensional scorer equals `level`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl Plateau {
    fn key(&self) -> (f64, f64) {
        (self.level, self.lo)
    }

    fn before(&self, other: &Plateau) -> bool {
        self.key().partial_cmp(&other.key()) == Some(std::cmp::Ordering::Less)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScoringModel {
    Linear {
        weights: Vec<f64>,
    },
    PiecewiseLinear(PiecewiseLinear),
    /// The regression function of a synthetic model, used as a score.
    Posterior(Posterior),
    Transformed {
        inner: Box<ScoringModel>,
        map: MonotoneMap,
    },
    /// `inner(x)` where `inner(x) >= threshold`, the fill elsewhere.
    Truncated {
        inner: Box<ScoringModel>,
        threshold: f64,
        below: BelowFill,
    },
    /// `inner` with each plateau spread out by `x` and the scores above it
    /// shifted up by its width: the order of `inner` is kept wherever it is
    /// strict, ties on plateaus are broken, and no atom remains.
    TieBroken {
        inner: Box<ScoringModel>,
        plateaus: Vec<Plateau>,
    },
    /// Element `index` of a declared finite family.
    Member {
        index: usize,
        family: Arc<[ScoringModel]>,
    },
}

impl ScoringModel {
    pub fn linear(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("linear model needs finite weights, d >= 1"));
        }
        Ok(ScoringModel::Linear { weights })
    }

    /// `s(x) = x` on one-dimensional inputs.
    pub fn identity() -> Self {
        ScoringModel::Linear { weights: vec![1.0] }
    }

    pub fn transformed(inner: ScoringModel, map: MonotoneMap) -> Result<Self> {
        map.validate()?;
        Ok(ScoringModel::Transformed {
            inner: Box::new(inner),
            map,
        })
    }

    pub fn truncated(inner: ScoringModel, threshold: f64, below: BelowFill) -> Self {
        ScoringModel::Truncated {
            inner: Box::new(inner),
            threshold,
            below,
        }
    }

    /// One-dimensional only; plateaus must be disjoint with `lo < hi`.
    pub fn tie_broken(inner: ScoringModel, plateaus: Vec<Plateau>) -> Result<Self> {
        if inner.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: inner.dim(),
            });
        }
        let mut sorted = plateaus.clone();
        sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let valid =
            sorted.iter().all(|p| p.lo < p.hi && p.level.is_finite()) && sorted.windows(2).all(|w| w[0].hi <= w[1].lo);
        if !valid {
            return Err(Error::invalid("plateaus must be disjoint nonempty intervals"));
        }
        Ok(ScoringModel::TieBroken {
            inner: Box::new(inner),
            plateaus,
        })
    }

    pub fn member(family: Arc<[ScoringModel]>, index: usize) -> Result<Self> {
        if index >= family.len() {
            return Err(Error::invalid(format!(
                "member index {index} out of range for a family of {}",
                family.len()
            )));
        }
        Ok(ScoringModel::Member { index, family })
    }

    /// Input dimension the model accepts.
    pub fn dim(&self) -> usize {
        match self {
            ScoringModel::Linear { weights } => weights.len(),
            ScoringModel::PiecewiseLinear(_) | ScoringModel::Posterior(_) => 1,
            ScoringModel::Transformed { inner, .. }
            | ScoringModel::Truncated { inner, .. }
            | ScoringModel::TieBroken { inner, .. } => inner.dim(),
            ScoringModel::Member { index, family } => family[*index].dim(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let expected = self.dim();
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Scalar-input shortcut for one-dimensional models.
    pub fn eval1(&self, x: f64) -> f64 {
        self.eval_unchecked(std::slice::from_ref(&x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ScoringModel::Linear { weights } => weights.iter().zip(x).map(|(w, v)| w * v).sum(),
            ScoringModel::PiecewiseLinear(pl) => pl.eval(x[0]),
            ScoringModel::Posterior(eta) => eta.eval(x[0]),
            ScoringModel::Transformed { inner, map } => map.apply(inner.eval_unchecked(x)),
            ScoringModel::Truncated {
                inner,
                threshold,
                below,
            } => {
                let s = inner.eval_unchecked(x);
                if s >= *threshold {
                    s
                } else {
                    match below {
                        BelowFill::Constant { value } => *value,
                        BelowFill::Reflected => threshold - 1.0 - s,
                    }
                }
            }
            ScoringModel::TieBroken { inner, plateaus } => {
                let width_before = |keep: &dyn Fn(&Plateau) -> bool| -> f64 {
                    plateaus.iter().filter(|p| keep(p)).map(|p| p.hi - p.lo).sum()
                };
                match plateaus.iter().find(|p| p.lo <= x[0] && x[0] <= p.hi) {
                    Some(own) => own.level + width_before(&|p| p.before(own)) + (x[0] - own.lo),
                    None => {
                        // a rounded tie with a plateau level goes to the side
                        // of the spread that `x` lies on
                        let s = inner.eval_unchecked(x);
                        s + width_before(&|p| p.level < s || (p.level == s && p.hi < x[0]))
                    }
                }
            }
            ScoringModel::Member { index, family } => family[*index].eval_unchecked(x),
        }
    }

    /// Scores of a row-major feature buffer; empty input gives an empty vector.
    pub fn score_rows(&self, features: &[f64], dim: usize) -> Result<Vec<f64>> {
        let expected = self.dim();
        if dim != expected {
            return Err(Error::DimensionMismatch { expected, got: dim });
        }
        Ok(features.chunks_exact(dim).map(|r| self.eval_unchecked(r)).collect())
    }

    pub fn score_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.score_rows(data.features(), data.dim())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::data::Label;

    #[test]
    fn tie_broken_keeps_strict_order() {
        // -0.6 on [0, 0.5), -0.3 - x on [0.5, 0.7), x above: an interior plateau
        let inner = ScoringModel::truncated(
            ScoringModel::truncated(ScoringModel::identity(), 0.5, BelowFill::Constant { value: 0.3 }),
            0.7,
            BelowFill::Reflected,
        );
        let plateaus = vec![Plateau {
            lo: 0.0,
            hi: 0.5,
            level: -0.6,
        }];
        let s = ScoringModel::tie_broken(inner.clone(), plateaus.clone()).unwrap();
        // 0.5 is both the jump of `inner` and the closed end of the plateau
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).filter(|&x| x != 0.5).collect();
        for &a in &xs {
            for &b in &xs {
                if inner.eval1(a) < inner.eval1(b) {
                    assert!(s.eval1(a) < s.eval1(b), "{a} {b}");
                }
                if a < b && a <= 0.5 && b <= 0.5 {
                    assert!(s.eval1(a) < s.eval1(b));
                }
            }
        }
        // scores above the plateau move up by its width
        assert!((s.eval1(1.0) - 1.5).abs() < 1e-12);
        assert!((s.eval1(0.6) - inner.eval1(0.6)).abs() < 1e-12);
        let overlapping = vec![
            plateaus[0],
            Plateau {
                lo: 0.1,
                hi: 0.3,
                level: 0.0,
            },
        ];
        assert!(ScoringModel::tie_broken(inner, overlapping).is_err());
        assert!(ScoringModel::tie_broken(ScoringModel::linear(vec![1.0, 1.0]).unwrap(), vec![]).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let lin = ScoringModel::linear(vec![1.0, 0.0]).unwrap();
        assert_eq!(lin.evaluate(&[0.3, 7.0]).unwrap(), 0.3);
        let id = ScoringModel::PiecewiseLinear(PiecewiseLinear::from_points(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap());
        assert_eq!(id.evaluate(&[0.4]).unwrap(), 0.4);
        let hat = ScoringModel::PiecewiseLinear(
            PiecewiseLinear::from_points(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap(),
        );
        assert!((hat.evaluate(&[0.75]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let lin = ScoringModel::linear(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            lin.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        let pl = ScoringModel::PiecewiseLinear(PiecewiseLinear::identity(0.0, 1.0).unwrap());
        assert!(pl.evaluate(&[1.0, 2.0]).is_err());
        let d = Dataset::new(vec![0.1, 0.2], 2, vec![Label::Pos]).unwrap();
        assert!(pl.score_dataset(&d).is_err());
    }

    #[test]
    fn extrapolates_outer_segments() {
        let pl = PiecewiseLinear::from_points(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((pl.eval(-0.5) - -1.0).abs() < 1e-15);
        assert!((pl.eval(1.5) - -1.0).abs() < 1e-15);
        assert_eq!(pl.eval(0.5), 1.0);
    }

    #[test]
    fn score_dataset_examples() {
        let id = ScoringModel::identity();
        let d = Dataset::from_1d(vec![0.1, 0.9], vec![Label::Pos, Label::Neg]).unwrap();
        assert_eq!(id.score_dataset(&d).unwrap(), vec![0.1, 0.9]);
        let twice = ScoringModel::linear(vec![2.0]).unwrap();
        assert_eq!(twice.score_dataset(&d).unwrap(), vec![0.2, 1.8]);
        assert!(id.score_rows(&[], 1).unwrap().is_empty());
    }

    #[test]
    fn validates_piecewise_models() {
        assert!(PiecewiseLinear::from_points(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(PiecewiseLinear::from_points(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0]).is_err());
        let pl = PiecewiseLinear::from_points(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(pl.slope_bounds(), (1.0, 2.0));
        assert!(pl.clone().with_slope_bounds(1.5, 3.0).is_err());
        assert!(pl.clone().with_slope_bounds(0.5, 1.5).is_err());
        assert!(pl.clone().with_slope_bounds(0.5, 3.0).is_ok());
        assert!(pl.with_range_bound(0.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let pl = PiecewiseLinear::from_points(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.5])
            .unwrap()
            .with_range_bound(2.0)
            .unwrap();
        let fam: Arc<[ScoringModel]> = vec![ScoringModel::identity(), ScoringModel::PiecewiseLinear(pl)].into();
        let m = ScoringModel::member(fam, 1).unwrap();
        let t = ScoringModel::transformed(m, MonotoneMap::Exp).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: ScoringModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"kind":"piecewise-linear","breakpoints":[0,1],"values":[1,1]}"#;
        assert!(serde_json::from_str::<ScoringModel>(bad).is_err());
    }

    #[test]
    fn member_index_checked() {
        let fam: Arc<[ScoringModel]> = vec![ScoringModel::identity()].into();
        assert!(ScoringModel::member(fam.clone(), 1).is_err());
        assert_eq!(ScoringModel::member(fam, 0).unwrap().eval1(0.25), 0.25);
    }

    proptest! {
        #[test]
        fn positive_slopes_strictly_increasing(
            slopes in prop::collection::vec(0.1f64..5.0, 1..8),
            x in -2.0f64..3.0,
            dx in 1e-6f64..1.0,
        ) {
            let k = slopes.len();
            let bps: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
            let mut vals = vec![0.0];
            for (i, s) in slopes.iter().enumerate() {
                vals.push(vals[i] + s / k as f64);
            }
            let pl = PiecewiseLinear::from_points(bps, vals).unwrap();
            prop_assert!(pl.eval(x) < pl.eval(x + dx));
        }

        #[test]
        fn score_dataset_is_pure(xs in prop::collection::vec(-1.0f64..1.0, 1..50)) {
            let m = ScoringModel::transformed(ScoringModel::identity(), MonotoneMap::SignedPower { exponent: 3.0 }).unwrap();
            let labels = vec![Label::Pos; xs.len()];
            let d = Dataset::from_1d(xs, labels).unwrap();
            let a = m.score_dataset(&d).unwrap();
            let b = m.score_dataset(&d).unwrap();
            prop_assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
