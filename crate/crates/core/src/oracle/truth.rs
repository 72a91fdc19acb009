//! Population values of the criteria for a scorer under a synthetic model.

use serde::Serialize;

use super::levels::{IntervalSet, LevelMap};
use super::quad::{integrate, QuadOptions};
use super::SyntheticModel;
use crate::error::{Error, Result};
use crate::model::{BelowFill, ScoringModel};
use crate::rate::Rate;

/// Absolute tolerance of one-dimensional integrals.
const TOL_1D: f64 = 1e-11;
/// Absolute tolerance of the outer integral of pair quantities.
const TOL_2D: f64 = 1e-9;
/// Step of the central difference for `K'`.
const K_PRIME_STEP: f64 = 1e-4;
/// Two routes to the same population value must agree to this.
const ROUTE_TOL: f64 = 1e-6;

/// Law of `s(X)` and of the pair `(s(X), Y)` under a model.
#[derive(Clone, Debug)]
pub struct ScoreLaw<'a> {
    model: &'a SyntheticModel,
    levels: LevelMap<'a>,
    breaks: Vec<f64>,
}

impl<'a> ScoreLaw<'a> {
    pub fn new(model: &'a SyntheticModel, s: &'a ScoringModel) -> Result<Self> {
        let (lo, hi) = model.support();
        let levels = LevelMap::new(s, lo, hi)?;
        let mut breaks = levels.edges();
        // x -> mu{s > s(x)} has a kink wherever s(x) crosses the value of s
        // at another edge
        let crossings: Vec<f64> = breaks
            .iter()
            .flat_map(|&e| levels.upper(levels.eval(e), false).parts().to_vec())
            .flat_map(|(a, b)| [a, b])
            .collect();
        breaks.extend(crossings);
        breaks.extend(model.kinks());
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Ok(ScoreLaw { model, levels, breaks })
    }

    pub fn levels(&self) -> &LevelMap<'a> {
        &self.levels
    }

    pub fn score(&self, x: f64) -> f64 {
        self.levels.eval(x)
    }

    /// `F_s(t) = P(s(X) <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.model.mass(&self.levels.lower(t, false))
    }

    /// `inf {t : F_s(t) >= v}` by bisection on `t`, snapped onto an atom of
    /// `s(X)` when it converges to one.
    pub fn quantile(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::invalid(format!("quantile level must lie in (0,1], got {v}")));
        }
        let (min, max) = self.levels.range();
        let mut lo = min - 1.0 - min.abs();
        let mut hi = max + 1.0 + max.abs();
        if self.cdf(lo) >= v || self.cdf(hi) < v - 1e-12 {
            return Err(Error::Numerical {
                context: "score quantile bracket".into(),
                achieved: self.cdf(hi),
                required: v,
            });
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        for level in self.levels.flat_levels() {
            if (level - hi).abs() <= 1e-9 * (1.0 + level.abs()) && self.cdf(level) >= v - 1e-12 {
                return Ok(level);
            }
        }
        Ok(hi)
    }

    /// Integral of `f` over `set`, split at every kink of the scorer and of
    /// the model's weights.
    fn integrate_over(&self, set: &IntervalSet, f: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
        let pieces = set.split_at(&self.breaks);
        let per = tol / pieces.len().max(1) as f64;
        let mut total = 0.0;
        for (a, b) in pieces {
            let opts = QuadOptions {
                abs_tol: per,
                rel_tol: 1e-13,
                max_intervals: 20_000,
            };
            total += integrate(&f, a, b, opts)?.value;
        }
        Ok(total)
    }

    fn density(&self, x: f64) -> f64 {
        self.model.marginal().pdf(x)
    }

    fn pos_density(&self, x: f64) -> f64 {
        self.model.eta(x) * self.density(x)
    }

    fn neg_density(&self, x: f64) -> f64 {
        (1.0 - self.model.eta(x)) * self.density(x)
    }

    /// `(K(s, v), Q(s, v))` with `K = P(s <= Q, Y = 1) - P(s <= Q, Y = -1)`.
    pub fn k(&self, v: f64) -> Result<(f64, f64)> {
        let q = self.quantile(v)?;
        let below = self.levels.lower(q, false);
        Ok((self.model.positive_mass(&below) - self.model.negative_mass(&below), q))
    }

    /// `d/dv K(s, v)` by a central difference, one-sided within a step of
    /// either end of (0, 1].
    pub fn k_prime(&self, v: f64) -> Result<f64> {
        let h = K_PRIME_STEP;
        if v + h > 1.0 {
            Ok((self.k(v)?.0 - self.k(v - h)?.0) / h)
        } else if v - h <= 0.0 {
            Ok((self.k(v + h)?.0 - self.k(v)?.0) / h)
        } else {
            Ok((self.k(v + h)?.0 - self.k(v - h)?.0) / (2.0 * h))
        }
    }
}

/// Population values of every criterion for one (model, scorer, u0).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrueQuantities {
    pub u0: f64,
    pub p: f64,
    /// `Q(s, 1 - u0)`.
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub l: f64,
    pub locauc: f64,
    pub w: f64,
    pub r_local: f64,
    pub m: f64,
    pub k: f64,
    pub k_prime: f64,
    /// `int_0^alpha beta d alpha`, through the local AUC.
    pub trunc_auc: f64,
    /// Same area integrated directly over (negative in top, positive above).
    pub trunc_auc_direct: f64,
}

/// Residuals of the population identities tying the criteria together.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `p beta + (1 - p) alpha - u0`.
    pub mass_line: f64,
    /// `locauc - (beta - r / (2 p (1 - p)))`.
    pub locauc_vs_ranking_error: f64,
    /// `w - (p/2 beta (2 - beta) + (1 - p) locauc)`.
    pub w_vs_locauc: f64,
    /// `2 p (1 - p) locauc - ((1 - p)(p + u0) - (1 - p) l - r)`.
    pub locauc_vs_risk: f64,
    /// `2 p w - (C(p, u0) + ((p + u0)/2 - 1) l - l^2/4 - r)`.
    pub w_vs_risk: f64,
    /// `l - (2 (1 - p) alpha + p - u0)`.
    pub risk_vs_alpha: f64,
    /// `l - (2 p (1 - beta) - p + u0)`.
    pub risk_vs_beta: f64,
    /// `trunc_auc - trunc_auc_direct`.
    pub trunc_auc_routes: f64,
}

impl IdentityResiduals {
    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("mass_line", self.mass_line),
            ("locauc_vs_ranking_error", self.locauc_vs_ranking_error),
            ("w_vs_locauc", self.w_vs_locauc),
            ("locauc_vs_risk", self.locauc_vs_risk),
            ("w_vs_risk", self.w_vs_risk),
            ("risk_vs_alpha", self.risk_vs_alpha),
            ("risk_vs_beta", self.risk_vs_beta),
            ("trunc_auc_routes", self.trunc_auc_routes),
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.named().iter().map(|(_, r)| r.abs()).fold(0.0, f64::max)
    }
}

impl TrueQuantities {
    /// `locauc` recovered from `beta` and the ranking error.
    pub fn locauc_from_ranking_error(&self) -> f64 {
        self.beta - self.r_local / (2.0 * self.p * (1.0 - self.p))
    }

    /// `w` recovered from `beta` and `locauc`.
    pub fn w_from_locauc(&self) -> f64 {
        0.5 * self.p * self.beta * (2.0 - self.beta) + (1.0 - self.p) * self.locauc
    }

    pub fn residuals(&self) -> IdentityResiduals {
        let (p, u0, l, r) = (self.p, self.u0, self.l, self.r_local);
        IdentityResiduals {
            mass_line: p * self.beta + (1.0 - p) * self.alpha - u0,
            locauc_vs_ranking_error: self.locauc - self.locauc_from_ranking_error(),
            w_vs_locauc: self.w - self.w_from_locauc(),
            locauc_vs_risk: 2.0 * p * (1.0 - p) * self.locauc - ((1.0 - p) * (p + u0) - (1.0 - p) * l - r),
            w_vs_risk: 2.0 * p * self.w - (w_constant(p, u0) + (0.5 * (p + u0) - 1.0) * l - 0.25 * l * l - r),
            risk_vs_alpha: l - (2.0 * (1.0 - p) * self.alpha + p - u0),
            risk_vs_beta: l - (2.0 * p * (1.0 - self.beta) - p + u0),
            trunc_auc_routes: self.trunc_auc - self.trunc_auc_direct,
        }
    }
}

/// `Q(s, v)`.
pub fn true_quantile(model: &SyntheticModel, s: &ScoringModel, v: f64) -> Result<f64> {
    ScoreLaw::new(model, s)?.quantile(v)
}

/// `(K(s, v), Q(s, v))`.
pub fn true_k(model: &SyntheticModel, s: &ScoringModel, v: f64) -> Result<(f64, f64)> {
    ScoreLaw::new(model, s)?.k(v)
}

pub fn true_report(model: &SyntheticModel, s: &ScoringModel, u0: &Rate<f64>) -> Result<TrueQuantities> {
    model.require_both_classes()?;
    let law = ScoreLaw::new(model, s)?;
    let (u0, v0, p) = (*u0.u0(), u0.v0(), model.p());
    let pn = p * (1.0 - p);

    let (k, q) = law.k(v0)?;
    let k_prime = law.k_prime(v0)?;
    let top = law.levels.upper(q, false);
    let beta = model.positive_mass(&top) / p;
    let alpha = model.negative_mass(&top) / (1.0 - p);
    let l = model.positive_mass(&law.levels.lower(q, true)) + model.negative_mass(&law.levels.upper(q, true));

    let locauc = law.integrate_over(
        &top,
        |x| law.pos_density(x) * model.negative_mass(&law.levels.lower(law.score(x), true)),
        TOL_1D,
    )? / pn;

    let w = law.integrate_over(
        &top,
        |x| {
            let f = law.cdf(law.score(x));
            if f > v0 {
                f * law.pos_density(x)
            } else {
                0.0
            }
        },
        TOL_1D,
    )? / p;

    // ordered discordant pairs in the top set: positive at x, negative above
    let r_local = 2.0
        * law.integrate_over(
            &top,
            |x| {
                let above = law.levels.upper(law.score(x), true).intersect(&top);
                let inner = law
                    .integrate_over(&above, |y| law.neg_density(y), TOL_1D)
                    .unwrap_or(f64::NAN);
                law.pos_density(x) * inner
            },
            TOL_2D,
        )?;
    if !r_local.is_finite() {
        return Err(Error::Numerical {
            context: "inner integral of the ranking error".into(),
            achieved: f64::NAN,
            required: TOL_1D,
        });
    }

    let trunc_auc_direct = law.integrate_over(
        &top,
        |x| law.neg_density(x) * model.positive_mass(&law.levels.upper(law.score(x), true)),
        TOL_1D,
    )? / pn;

    Ok(TrueQuantities {
        u0,
        p,
        q,
        alpha,
        beta,
        l,
        locauc,
        w,
        r_local,
        m: r_local + (1.0 - p) * l,
        k,
        k_prime,
        trunc_auc: locauc - beta + alpha * beta,
        trunc_auc_direct,
    })
}

/// The optimal mass-constrained classifier and its risk.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BayesReport {
    pub u0: f64,
    /// `Q(eta, 1 - u0)`.
    pub q_eta: f64,
    pub l_star: f64,
    /// `1 - q + (1 - u0)(2q - 1) - E|eta(X) - q|`.
    pub l_star_formula: f64,
    /// Error of the optimal rule integrated directly, with randomization on
    /// `{eta = q}` when that set has mass.
    pub l_star_direct: f64,
    pub atom_mass: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl BayesReport {
    /// Membership of `x` in the optimal top set `{eta >= q_eta}`.
    pub fn in_top_set(&self, model: &SyntheticModel, x: f64) -> bool {
        model.eta(x) >= self.q_eta
    }
}

pub fn bayes_report(model: &SyntheticModel, u0: &Rate<f64>) -> Result<BayesReport> {
    model.require_both_classes()?;
    let eta = model.eta_scorer();
    let law = ScoreLaw::new(model, &eta)?;
    let (u0, p) = (*u0.u0(), model.p());
    let q = law.quantile(1.0 - u0)?;
    let (lo, hi) = model.support();
    let whole = IntervalSet::interval(lo, hi);

    let below = law.levels.lower(q, true);
    let above = law.levels.upper(q, true);
    let mut splits = below
        .parts()
        .iter()
        .chain(above.parts())
        .flat_map(|&(a, b)| [a, b])
        .collect::<Vec<_>>();
    splits.sort_by(f64::total_cmp);
    let abs_dev = integrate_split(&law, &whole, &splits, |x| (model.eta(x) - q).abs() * law.density(x))?;
    let l_star_formula = 1.0 - q + (1.0 - u0) * (2.0 * q - 1.0) - abs_dev;

    let atom = whole.minus(&below.union(&above));
    let atom_mass = law.integrate_over(&atom, |x| law.density(x), TOL_1D)?;
    let above_mass = law.integrate_over(&above, |x| law.density(x), TOL_1D)?;
    let theta = if atom_mass > 1e-12 {
        ((u0 - above_mass) / atom_mass).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let miss = law.integrate_over(&below, |x| law.pos_density(x), TOL_1D)?;
    let false_alarm = law.integrate_over(&above, |x| law.neg_density(x), TOL_1D)?;
    let atom_pos = law.integrate_over(&atom, |x| law.pos_density(x), TOL_1D)?;
    let atom_neg = atom_mass - atom_pos;
    let l_star_direct = miss + false_alarm + theta * atom_neg + (1.0 - theta) * atom_pos;

    let difference = (l_star_formula - l_star_direct).abs();
    if difference > ROUTE_TOL {
        return Err(Error::Consistency {
            context: "optimal risk: closed formula vs direct integration".into(),
            difference,
            tolerance: ROUTE_TOL,
        });
    }
    let beta = (p - miss - (1.0 - theta) * atom_pos) / p;
    let alpha = (false_alarm + theta * atom_neg) / (1.0 - p);
    Ok(BayesReport {
        u0,
        q_eta: q,
        l_star: l_star_direct,
        l_star_formula,
        l_star_direct,
        atom_mass,
        alpha,
        beta,
    })
}

fn integrate_split(law: &ScoreLaw<'_>, set: &IntervalSet, extra: &[f64], f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut points = law.breaks.clone();
    points.extend_from_slice(extra);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let pieces = set.split_at(&points);
    let per = TOL_1D / pieces.len().max(1) as f64;
    let mut total = 0.0;
    for (a, b) in pieces {
        total += integrate(&f, a, b, QuadOptions::absolute(per))?.value;
    }
    Ok(total)
}

/// `L(s) - L*` by two routes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcessRisk {
    /// `2 E(|eta(X) - q_eta| 1{X in C* sym-diff C_s})`.
    pub value: f64,
    /// `L(s) - L*`.
    pub via_risks: f64,
    pub l: f64,
    pub l_star: f64,
}

pub fn excess_risk(model: &SyntheticModel, s: &ScoringModel, u0: &Rate<f64>) -> Result<ExcessRisk> {
    let bayes = bayes_report(model, u0)?;
    let truth = true_report(model, s, u0)?;
    let law = ScoreLaw::new(model, s)?;
    let eta = model.eta_scorer();
    let eta_law = ScoreLaw::new(model, &eta)?;
    let (lo, hi) = model.support();
    let optimal = eta_law.levels.upper(bayes.q_eta, false);
    let top = law.levels.upper(truth.q, false);
    let diff = optimal.symmetric_difference(&top);
    let mut splits: Vec<f64> = eta_law.levels.edges();
    splits.extend(optimal.parts().iter().flat_map(|&(a, b)| [a, b]));
    let q = bayes.q_eta;
    let value = 2.0
        * integrate_split(&law, &diff.intersect(&IntervalSet::interval(lo, hi)), &splits, |x| {
            (model.eta(x) - q).abs() * law.density(x)
        })?;
    let via_risks = truth.l - bayes.l_star;
    let difference = (value - via_risks).abs();
    if difference > ROUTE_TOL {
        return Err(Error::Consistency {
            context: "excess risk: symmetric difference vs risk gap".into(),
            difference,
            tolerance: ROUTE_TOL,
        });
    }
    Ok(ExcessRisk {
        value,
        via_risks,
        l: truth.l,
        l_star: bayes.l_star,
    })
}

/// A member of the optimal family with an atom-free score: `eta` with its
/// plateaus broken by `x` on `C*`, and below it the reflection `q - 1 - s`,
/// which stays under `inf_{C*} s`. Breaking ties on a plateau of level `c`
/// wins half of its positive-negative pairs, so when `eta` is locally flat
/// this member attains the supremum of LocAUC and `eta` itself does not.
pub fn optimal_scoring(model: &SyntheticModel, u0: &Rate<f64>) -> Result<ScoringModel> {
    let eta = model.eta_scorer();
    let (lo, hi) = model.support();
    let plateaus = LevelMap::new(&eta, lo, hi)?.plateaus();
    let ranked = if plateaus.is_empty() {
        eta
    } else {
        ScoringModel::tie_broken(eta, plateaus)?
    };
    let q = ScoreLaw::new(model, &ranked)?.quantile(u0.v0())?;
    Ok(ScoringModel::truncated(ranked, q, BelowFill::Reflected))
}

/// `(p + u0) - (p + u0)^2 / 4`, the constant of the quadratic relation
/// between `W`, `L` and `R`.
pub fn w_constant(p: f64, u0: f64) -> f64 {
    let a = p + u0;
    a - 0.25 * a * a
}

/// `Var((Y - K') 1{s(X) <= Q(s, v)})` integrated directly.
pub fn zn_variance(model: &SyntheticModel, s: &ScoringModel, v: f64) -> Result<f64> {
    let law = ScoreLaw::new(model, s)?;
    let (_, q) = law.k(v)?;
    let kp = law.k_prime(v)?;
    let below = law.levels.lower(q, false);
    let mean = law.integrate_over(
        &below,
        |x| (1.0 - kp) * law.pos_density(x) - (1.0 + kp) * law.neg_density(x),
        TOL_1D,
    )?;
    let second = law.integrate_over(
        &below,
        |x| (1.0 - kp).powi(2) * law.pos_density(x) + (1.0 + kp).powi(2) * law.neg_density(x),
        TOL_1D,
    )?;
    Ok(second - mean * mean)
}
