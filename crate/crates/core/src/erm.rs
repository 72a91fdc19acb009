//! Empirical risk minimization over scoring families.
//!
//! The empirical criteria are piecewise constant in the parameters, so the
//! searches are derivative-free: an exhaustive scan for finite families and
//! randomized multi-start local search with strict-improvement acceptance for
//! the parametric ones. Maximized criteria are negated internally.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::hat_l;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::model::{PiecewiseLinear, ScoringModel};
use crate::rankcrit::{hat_locauc, hat_m, w_hat};
use crate::rate::{Rate, TopRate};
use crate::rng::SeedSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "L_HAT")]
    LHat,
    #[serde(rename = "M_HAT")]
    MHat,
    #[serde(rename = "LOCAUC")]
    LocAuc,
    #[serde(rename = "W_HAT")]
    WHat,
}

impl Criterion {
    pub fn maximize(self) -> bool {
        matches!(self, Criterion::LocAuc | Criterion::WHat)
    }

    /// Criterion value as reported (not negated).
    pub fn evaluate(self, scores: &[f64], labels: &[Label], u0: &Rate<f64>) -> Result<f64> {
        let top = TopRate::Local(u0.clone());
        match self {
            Criterion::LHat => Ok(hat_l(scores, labels, u0)?.l_hat),
            Criterion::MHat => Ok(hat_m(scores, labels, &top)?.m_hat),
            Criterion::LocAuc => hat_locauc(scores, labels, &top),
            Criterion::WHat => w_hat(scores, labels, &top),
        }
    }

    /// Value to minimize; `None` when the candidate is not admissible
    /// (a rank criterion on tied scores).
    fn objective(self, model: &ScoringModel, data: &Dataset, u0: &Rate<f64>) -> Result<Option<f64>> {
        let scores = model.score_dataset(data)?;
        match self.evaluate(&scores, data.labels(), u0) {
            Ok(v) => Ok(Some(if self.maximize() { -v } else { v })),
            Err(Error::TiedScores { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn report(self, objective: f64) -> f64 {
        if self.maximize() {
            -objective
        } else {
            objective
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "L_HAT" => Ok(Criterion::LHat),
            "M_HAT" => Ok(Criterion::MHat),
            "LOCAUC" => Ok(Criterion::LocAuc),
            "W_HAT" => Ok(Criterion::WHat),
            _ => Err(Error::Config(format!("unknown criterion {s:?}"))),
        }
    }
}

/// Searchable scoring family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilySpec {
    Finite {
        members: Arc<[ScoringModel]>,
    },
    /// Piecewise-linear scorers with `segments` pieces over the data range
    /// and slopes of magnitude in `[slope_min, slope_max]`, on a grid of
    /// `levels` magnitudes per sign.
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

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErmProblem {
    pub family: FamilySpec,
    pub criterion: Criterion,
    pub u0: Rate<f64>,
    /// Criterion evaluations allowed, summed over restarts.
    pub budget: usize,
    #[serde(default = "one")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluation: usize,
    /// Best reported value so far.
    pub incumbent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErmResult {
    pub model: ScoringModel,
    pub value: f64,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
}

impl ErmProblem {
    pub fn solve(&self, data: &Dataset) -> Result<ErmResult> {
        match &self.family {
            FamilySpec::Finite { .. } => erm_finite(self, data),
            FamilySpec::Piecewise { .. } => erm_piecewise(self, data),
            FamilySpec::Linear { .. } => erm_linear(self, data),
        }
    }
}

/// Running record of one search path; values are objectives (minimized).
struct Path {
    best: Option<(f64, ScoringModel)>,
    trace: Vec<f64>,
}

impl Path {
    fn new() -> Self {
        Path {
            best: None,
            trace: Vec::new(),
        }
    }

    /// Records an evaluation; returns whether it strictly improved.
    fn offer(&mut self, value: Option<f64>, model: impl FnOnce() -> ScoringModel) -> bool {
        let improved = match (value, &self.best) {
            (Some(v), None) => v.is_finite(),
            (Some(v), Some((b, _))) => v < *b,
            (None, _) => false,
        };
        if improved {
            self.best = Some((value.expect("checked above"), model()));
        }
        self.trace.push(self.best.as_ref().map_or(f64::INFINITY, |b| b.0));
        improved
    }
}

fn finish(criterion: Criterion, paths: Vec<Path>) -> Result<ErmResult> {
    let mut trace = Vec::new();
    let mut running = f64::INFINITY;
    let mut evaluations = 0;
    for p in &paths {
        for &v in &p.trace {
            evaluations += 1;
            running = running.min(v);
            trace.push(TracePoint {
                evaluation: evaluations,
                incumbent: criterion.report(running),
            });
        }
    }
    // lexicographic (value, restart index): first strict minimum wins
    let mut winner: Option<(f64, ScoringModel)> = None;
    for p in paths {
        if let Some((v, m)) = p.best {
            if winner.as_ref().is_none_or(|(w, _)| v < *w) {
                winner = Some((v, m));
            }
        }
    }
    let (v, model) =
        winner.ok_or_else(|| Error::invalid("no admissible candidate (every candidate had tied scores)"))?;
    Ok(ErmResult {
        model,
        value: criterion.report(v),
        evaluations,
        trace,
    })
}

/// Exhaustive scan; ties go to the lowest index.
pub fn erm_finite(problem: &ErmProblem, data: &Dataset) -> Result<ErmResult> {
    let FamilySpec::Finite { members } = &problem.family else {
        return Err(Error::invalid("erm_finite needs a finite family"));
    };
    if members.is_empty() {
        return Err(Error::invalid("empty scoring family"));
    }
    if problem.budget < members.len() {
        return Err(Error::invalid(format!(
            "budget {} is below the family size {}; the scan must be exhaustive",
            problem.budget,
            members.len()
        )));
    }
    let values: Vec<Option<f64>> = members
        .par_iter()
        .map(|m| problem.criterion.objective(m, data, &problem.u0))
        .collect::<Result<_>>()?;
    let mut path = Path::new();
    for (i, v) in values.into_iter().enumerate() {
        path.offer(v, || ScoringModel::Member {
            index: i,
            family: members.clone(),
        });
    }
    finish(problem.criterion, vec![path])
}

fn split_budget(budget: usize, restarts: usize) -> Result<Vec<usize>> {
    if budget == 0 {
        return Err(Error::invalid("budget must be at least 1"));
    }
    let r = restarts.clamp(1, budget);
    Ok((0..r).map(|i| budget / r + usize::from(i < budget % r)).collect())
}

/// Slope magnitude for grid level `|j|` in `1..=levels`.
fn slope_of(j: i32, levels: usize, m: f64, big_m: f64) -> f64 {
    let k = j.unsigned_abs() as usize;
    let mag = if levels <= 1 {
        m
    } else {
        m + (big_m - m) * (k - 1) as f64 / (levels - 1) as f64
    };
    mag * f64::from(j.signum())
}

fn piecewise_model(knots: &[f64], slopes: &[i32], levels: usize, m: f64, big_m: f64) -> Result<ScoringModel> {
    let mut values = Vec::with_capacity(knots.len());
    values.push(0.0);
    for (i, &j) in slopes.iter().enumerate() {
        let prev = values[i];
        values.push(prev + slope_of(j, levels, m, big_m) * (knots[i + 1] - knots[i]));
    }
    Ok(ScoringModel::PiecewiseLinear(
        PiecewiseLinear::from_points(knots.to_vec(), values)?.with_slope_bounds(m, big_m)?,
    ))
}

/// Randomized local search over piecewise-linear scorers with equally spaced
/// breakpoints. Each segment's slope is a signed level on the magnitude grid,
/// so candidates respect the slope bounds by construction. A move changes the
/// slope of one segment.
pub fn erm_piecewise(problem: &ErmProblem, data: &Dataset) -> Result<ErmResult> {
    let FamilySpec::Piecewise {
        segments,
        levels,
        slope_min,
        slope_max,
    } = problem.family
    else {
        return Err(Error::invalid("erm_piecewise needs a piecewise family"));
    };
    if data.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: data.dim(),
        });
    }
    if segments == 0 || levels == 0 || !(slope_min > 0.0 && slope_min <= slope_max && slope_max.is_finite()) {
        return Err(Error::invalid(
            "piecewise family needs segments, levels >= 1 and 0 < m <= M < inf",
        ));
    }
    let xs = data.features();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let knots: Vec<f64> = (0..=segments)
        .map(|i| lo + (hi - lo) * i as f64 / segments as f64)
        .collect();
    let choices: Vec<i32> = (1..=levels as i32).flat_map(|j| [j, -j]).collect();
    let seeds = SeedSpec::new(problem.seed);
    let budgets = split_budget(problem.budget, problem.restarts)?;

    let paths = budgets
        .par_iter()
        .enumerate()
        .map(|(r, &budget)| -> Result<Path> {
            let mut rng = seeds.child_stream(r as u64);
            let mut slopes: Vec<i32> = (0..segments)
                .map(|_| *choices.choose(&mut rng).expect("nonempty"))
                .collect();
            let mut path = Path::new();
            let model = piecewise_model(&knots, &slopes, levels, slope_min, slope_max)?;
            let v = problem.criterion.objective(&model, data, &problem.u0)?;
            path.offer(v, || model);
            for _ in 1..budget {
                let seg = rng.random_range(0..segments);
                let old = slopes[seg];
                let alternatives: Vec<i32> = choices.iter().copied().filter(|&c| c != old).collect();
                let Some(&new) = alternatives.choose(&mut rng) else {
                    path.offer(None, || unreachable!());
                    continue;
                };
                slopes[seg] = new;
                let model = piecewise_model(&knots, &slopes, levels, slope_min, slope_max)?;
                let v = problem.criterion.objective(&model, data, &problem.u0)?;
                if !path.offer(v, || model) {
                    slopes[seg] = old;
                }
            }
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    finish(problem.criterion, paths)
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        w.iter_mut().for_each(|x| *x /= norm);
    }
    w
}

fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if w.iter().any(|x| *x != 0.0) {
            return normalized(w);
        }
    }
}

/// Linear scorers `w . x` searched on the unit sphere: half of each
/// restart's budget on random directions, the rest on coordinate moves with
/// a halving step.
pub fn erm_linear(problem: &ErmProblem, data: &Dataset) -> Result<ErmResult> {
    let FamilySpec::Linear { dim } = problem.family else {
        return Err(Error::invalid("erm_linear needs a linear family"));
    };
    if dim != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: data.dim(),
        });
    }
    let seeds = SeedSpec::new(problem.seed);
    let budgets = split_budget(problem.budget, problem.restarts)?;
    let paths = budgets
        .par_iter()
        .enumerate()
        .map(|(r, &budget)| -> Result<Path> {
            let mut rng = seeds.child_stream(r as u64);
            let mut path = Path::new();
            let mut best_w: Option<Vec<f64>> = None;
            let random_phase = budget.div_ceil(2);
            let eval = |w: &[f64]| -> Result<(Option<f64>, ScoringModel)> {
                let model = ScoringModel::linear(w.to_vec())?;
                Ok((problem.criterion.objective(&model, data, &problem.u0)?, model))
            };
            for _ in 0..random_phase {
                let w = random_direction(dim, &mut rng);
                let (v, model) = eval(&w)?;
                if path.offer(v, || model) {
                    best_w = Some(w);
                }
            }
            let mut used = random_phase;
            let mut step = 0.5;
            while used < budget {
                let Some(center) = best_w.clone() else {
                    // nothing admissible yet: keep sampling
                    let w = random_direction(dim, &mut rng);
                    let (v, model) = eval(&w)?;
                    if path.offer(v, || model) {
                        best_w = Some(w);
                    }
                    used += 1;
                    continue;
                };
                let mut improved = false;
                'sweep: for j in 0..dim {
                    for sign in [1.0, -1.0] {
                        if used >= budget {
                            break 'sweep;
                        }
                        let mut w = center.clone();
                        w[j] += sign * step;
                        let w = normalized(w);
                        let (v, model) = eval(&w)?;
                        used += 1;
                        if path.offer(v, || model) {
                            best_w = Some(w);
                            improved = true;
                            break 'sweep;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                    if step < 1e-9 {
                        step = 0.5;
                    }
                }
            }
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    finish(problem.criterion, paths)
}
