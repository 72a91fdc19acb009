//! Scoring families and random scorers used by the studies.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::erm::FamilySpec;
use crate::error::{Error, Result};
use crate::model::{PiecewiseLinear, ScoringModel};
use crate::oracle::{EtaPreset, Marginal, SyntheticModel, TruncatedMixture};

/// Family section of a rate-study config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// The identity plus `count` zigzag perturbations around `center`, with
    /// geometric amplitudes in `[delta_min, delta_max]`.
    Zigzag {
        center: f64,
        delta_min: f64,
        delta_max: f64,
        count: usize,
        #[serde(default)]
        mirrored: bool,
    },
    /// Top sets `B u C_k`: a common block `B = [block_start, hi]` plus one
    /// of `count` disjoint cells `C_k = [cells_end - (k+1) width, cells_end - k width]`.
    /// Members disagree on sets of fixed mass, however close their risks.
    Cells {
        block_start: f64,
        cells_end: f64,
        width: f64,
        count: usize,
    },
    Explicit {
        members: Vec<ScoringModel>,
    },
    Piecewise {
        segments: usize,
        levels: usize,
        slope_min: f64,
        slope_max: f64,
    },
    Linear {
        dim: usize,
    },
}

impl FamilyConfig {
    pub fn build(&self, support: (f64, f64)) -> Result<FamilySpec> {
        let finite = |members: Vec<ScoringModel>| FamilySpec::Finite {
            members: Arc::from(members),
        };
        Ok(match self {
            FamilyConfig::Zigzag {
                center,
                delta_min,
                delta_max,
                count,
                mirrored,
            } => {
                let mut deltas = vec![0.0];
                deltas.extend(geometric(*delta_min, *delta_max, *count)?);
                let members = deltas
                    .into_iter()
                    .map(|d| zigzag(*center, d, support))
                    .collect::<Result<Vec<_>>>()?;
                finite(with_mirrors(members, *mirrored))
            }
            FamilyConfig::Cells {
                block_start,
                cells_end,
                width,
                count,
            } => {
                let members = (0..*count)
                    .map(|k| {
                        let a = cells_end - (k + 1) as f64 * width;
                        cell_and_block(a, *width, *block_start, support)
                    })
                    .collect::<Result<Vec<_>>>()?;
                finite(members)
            }
            FamilyConfig::Explicit { members } => {
                if members.is_empty() {
                    return Err(Error::Config("explicit family is empty".into()));
                }
                finite(members.clone())
            }
            FamilyConfig::Piecewise {
                segments,
                levels,
                slope_min,
                slope_max,
            } => FamilySpec::Piecewise {
                segments: *segments,
                levels: *levels,
                slope_min: *slope_min,
                slope_max: *slope_max,
            },
            FamilyConfig::Linear { dim } => FamilySpec::Linear { dim: *dim },
        })
    }
}

fn with_mirrors(members: Vec<ScoringModel>, mirrored: bool) -> Vec<ScoringModel> {
    if !mirrored {
        return members;
    }
    let mirrors: Vec<ScoringModel> = members
        .iter()
        .map(|m| match m {
            ScoringModel::PiecewiseLinear(pl) => ScoringModel::PiecewiseLinear(pl.mirrored()),
            other => other.clone(),
        })
        .collect();
    members.into_iter().chain(mirrors).collect()
}

/// `count` geometrically spaced values from `lo` to `hi`.
pub fn geometric(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::Config(format!(
            "geometric range [{lo}, {hi}] must be positive and ordered"
        )));
    }
    Ok(match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect(),
    })
}

/// Identity outside `[c - delta, c + delta]`; inside, a zigzag that keeps
/// `[c - delta, c]` above level `c` and pushes `(c, c + delta)` below it.
/// Its top set at level `c` is `[c - delta, c] u [c + delta, hi]`, which has
/// the same mass as `[c, hi]` under a uniform marginal.
pub fn zigzag(c: f64, delta: f64, (lo, hi): (f64, f64)) -> Result<ScoringModel> {
    if delta == 0.0 {
        return Ok(ScoringModel::PiecewiseLinear(PiecewiseLinear::identity(lo, hi)?));
    }
    if !(delta > 0.0 && c - delta > lo && c + delta < hi) {
        return Err(Error::Config(format!(
            "zigzag amplitude {delta} does not fit around {c}"
        )));
    }
    let h = 0.5 * delta;
    let pl = PiecewiseLinear::from_points(
        vec![lo, c - delta, c - h, c, c + h, c + delta, hi],
        vec![lo, c, c + h, c, c - h, c, hi - delta],
    )?;
    Ok(ScoringModel::PiecewiseLinear(pl))
}

/// Scorer with unit slopes whose upper set at level 0 is
/// `[a, a + width] u [block, hi]`.
pub fn cell_and_block(a: f64, width: f64, block: f64, (lo, hi): (f64, f64)) -> Result<ScoringModel> {
    let b = a + width;
    if !(width > 0.0 && a >= lo && b <= block && block < hi) {
        return Err(Error::Config(format!(
            "cell [{a}, {b}] and block [{block}, {hi}] do not fit"
        )));
    }
    let mut knots = vec![a, a + 0.5 * width, b];
    let mut values = vec![0.0, 0.5 * width, 0.0];
    if block > b {
        let dip = 0.5 * (b + block);
        knots.extend([dip, block]);
        values.extend([b - dip, 0.0]);
    }
    knots.push(hi);
    values.push(hi - block);
    if a > lo {
        knots.insert(0, lo);
        values.insert(0, lo - a);
    }
    Ok(ScoringModel::PiecewiseLinear(PiecewiseLinear::from_points(
        knots, values,
    )?))
}

/// Random continuous piecewise-linear scorer on `[lo, hi]` with `segments`
/// pieces, jittered knots and slopes of random sign with magnitude in
/// `[0.2, 3]`.
pub fn random_piecewise<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64), segments: usize) -> Result<ScoringModel> {
    let segments = segments.max(1);
    let width = (hi - lo) / segments as f64;
    let mut knots = vec![lo];
    for i in 1..segments {
        knots.push(lo + width * (i as f64 + rng.random_range(-0.3..0.3)));
    }
    knots.push(hi);
    let mut values = vec![rng.random_range(-1.0..1.0)];
    for w in knots.windows(2) {
        let slope: f64 = rng.random_range(0.2..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        values.push(values.last().unwrap() + slope * (w[1] - w[0]));
    }
    Ok(ScoringModel::PiecewiseLinear(PiecewiseLinear::from_points(
        knots, values,
    )?))
}

/// A random oracle model: uniform or truncated-mixture marginal with a
/// linear, logistic, smooth-step or tent regression function.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R) -> Result<SyntheticModel> {
    let marginal = if rng.random_bool(0.5) {
        Marginal::uniform()
    } else {
        let w = rng.random_range(0.3..0.7);
        let m1 = rng.random_range(0.15..0.4);
        let m2 = rng.random_range(0.6..0.85);
        Marginal::GaussianMixture(TruncatedMixture::new(
            w,
            (m1, rng.random_range(0.08..0.2)),
            (m2, rng.random_range(0.08..0.2)),
            0.0,
            1.0,
        )?)
    };
    let eta = match rng.random_range(0..4) {
        0 => EtaPreset::Linear,
        1 => EtaPreset::Logistic {
            a: rng.random_range(2.0..10.0),
            b: rng.random_range(0.3..0.7),
        },
        2 => EtaPreset::StepSmooth {
            q: rng.random_range(0.35..0.65),
            w: rng.random_range(0.05..0.2),
        },
        _ => EtaPreset::Tent,
    };
    SyntheticModel::new(marginal, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{excess_risk, true_report};
    use crate::rate::Rate;
    use crate::rng::SeedSpec;
    use approx::assert_abs_diff_eq;

    fn members(spec: FamilySpec) -> Arc<[ScoringModel]> {
        match spec {
            FamilySpec::Finite { members } => members,
            _ => unreachable!(),
        }
    }

    #[test]
    fn geometric_grid() {
        let g = geometric(0.01, 1.0, 3).unwrap();
        assert_abs_diff_eq!(g[1], 0.1, epsilon = 1e-15);
        assert_eq!(g.len(), 3);
        assert_eq!(geometric(0.5, 0.5, 1).unwrap(), vec![0.5]);
        assert!(geometric(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn zigzag_excess_is_twice_delta_squared() {
        let model = SyntheticModel::uniform_linear();
        let u0 = Rate::new(0.2).unwrap();
        for delta in [0.02, 0.1, 0.15] {
            let s = zigzag(0.8, delta, (0.0, 1.0)).unwrap();
            let e = excess_risk(&model, &s, &u0).unwrap();
            assert_abs_diff_eq!(e.value, 2.0 * delta * delta, epsilon = 1e-8);
        }
        let id = zigzag(0.8, 0.0, (0.0, 1.0)).unwrap();
        assert!(excess_risk(&model, &id, &u0).unwrap().value.abs() < 1e-9);
        assert!(zigzag(0.8, 0.25, (0.0, 1.0)).is_err());
    }

    #[test]
    fn cell_members_have_the_declared_top_set() {
        let model = SyntheticModel::uniform_linear();
        let u0 = Rate::new(0.2).unwrap();
        for (a, w, block) in [
            (0.0, 0.04, 0.84),
            (0.5, 0.04, 0.84),
            (0.76, 0.04, 0.84),
            (0.6, 0.1, 0.9),
        ] {
            let s = cell_and_block(a, w, block, (0.0, 1.0)).unwrap();
            let t = true_report(&model, &s, &u0).unwrap();
            assert!(t.q.abs() < 1e-9, "{a} {block}: {}", t.q);
            // eta = x: the cell adds its mean eta to the block's positive mass
            let beta = ((1.0 - block * block) + ((a + w) * (a + w) - a * a)) / 2.0 / 0.5;
            assert_abs_diff_eq!(t.beta, beta, epsilon = 1e-9);
        }
        assert!(cell_and_block(0.82, 0.04, 0.84, (0.0, 1.0)).is_err());
    }

    #[test]
    fn family_sizes() {
        let zz = FamilyConfig::Zigzag {
            center: 0.8,
            delta_min: 0.01,
            delta_max: 0.15,
            count: 9,
            mirrored: true,
        };
        let m = members(zz.build((0.0, 1.0)).unwrap());
        assert_eq!(m.len(), 20);
        assert_eq!(m[10].eval1(0.3), -m[0].eval1(0.3));
        let cells = FamilyConfig::Cells {
            block_start: 0.84,
            cells_end: 0.8,
            width: 0.04,
            count: 20,
        };
        assert_eq!(members(cells.build((0.0, 1.0)).unwrap()).len(), 20);
        let too_many = FamilyConfig::Cells {
            block_start: 0.84,
            cells_end: 0.8,
            width: 0.04,
            count: 21,
        };
        assert!(too_many.build((0.0, 1.0)).is_err());
        assert!(FamilyConfig::Explicit { members: vec![] }.build((0.0, 1.0)).is_err());
    }

    #[test]
    fn random_scorers_are_valid_and_seeded() {
        let mut a = SeedSpec::new(3).child_stream(0);
        let mut b = SeedSpec::new(3).child_stream(0);
        for _ in 0..20 {
            let s = random_piecewise(&mut a, (0.0, 1.0), 4).unwrap();
            assert_eq!(s, random_piecewise(&mut b, (0.0, 1.0), 4).unwrap());
            let m = random_model(&mut a).unwrap();
            let p = m.p();
            assert!(p > 0.0 && p < 1.0);
            random_model(&mut b).unwrap();
        }
    }
}
