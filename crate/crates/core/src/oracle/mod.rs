//! Synthetic generative models with known `(mu, eta)`, their samples, and
//! population values of every criterion obtained by numerical integration.

mod levels;
mod marginal;
mod posterior;
pub mod quad;
mod truth;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use levels::{IntervalSet, LevelMap};
pub use marginal::{Marginal, TruncatedMixture};
pub use posterior::{EtaPreset, Posterior};
pub use truth::{
    bayes_report, excess_risk, optimal_scoring, true_k, true_quantile, true_report, w_constant, zn_variance,
    BayesReport, ExcessRisk, ScoreLaw, TrueQuantities,
};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::model::ScoringModel;
use quad::{gk15, integrate, QuadOptions};

/// Serializable description of a synthetic model; `p` is always computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub marginal: Marginal,
    pub eta: String,
    /// Exponent of the low-noise condition, recorded but not used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_exponent_alpha: Option<f64>,
}

/// Cells per unit of the cumulative `eta f` table.
const TABLE_CELLS: usize = 2048;

#[derive(Debug)]
struct PositiveMassTable {
    grid: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SyntheticModel {
    spec: ModelSpec,
    marginal: Marginal,
    eta: Posterior,
    p: f64,
    table: Arc<PositiveMassTable>,
}

impl SyntheticModel {
    pub fn new(marginal: Marginal, eta: EtaPreset) -> Result<Self> {
        SyntheticModel::from_spec(ModelSpec {
            marginal,
            eta: eta.to_string(),
            noise_exponent_alpha: None,
        })
    }

    /// `X ~ U(0, 1)` with `eta(x) = x`.
    pub fn uniform_linear() -> Self {
        SyntheticModel::new(Marginal::uniform(), EtaPreset::Linear).expect("built-in model is valid")
    }

    pub fn from_spec(spec: ModelSpec) -> Result<Self> {
        let (lo, hi) = spec.marginal.support();
        let eta = Posterior::new(spec.eta.parse()?, lo, hi)?;
        if let Some(a) = spec.noise_exponent_alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("noise exponent {a} outside (0,1)")));
            }
        }
        let marginal = spec.marginal.clone();

        let mut grid: Vec<f64> = (0..=TABLE_CELLS)
            .map(|k| lo + (hi - lo) * k as f64 / TABLE_CELLS as f64)
            .collect();
        grid.extend(eta.kinks());
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let weight = |x: f64| eta.eval(x) * marginal.pdf(x);
        let mut cumulative = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in grid.windows(2) {
            let opts = QuadOptions {
                abs_tol: 1e-16,
                rel_tol: 1e-13,
                max_intervals: 256,
            };
            acc += integrate(weight, w[0], w[1], opts)?.value;
            cumulative.push(acc);
        }
        let p = acc.clamp(0.0, 1.0);
        Ok(SyntheticModel {
            spec,
            marginal,
            eta,
            p,
            table: Arc::new(PositiveMassTable { grid, cumulative }),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn marginal(&self) -> &Marginal {
        &self.marginal
    }

    pub fn posterior(&self) -> &Posterior {
        &self.eta
    }

    pub fn eta(&self, x: f64) -> f64 {
        self.eta.eval(x)
    }

    /// `P(Y = 1)`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Population criteria need both classes to carry mass.
    pub(crate) fn require_both_classes(&self) -> Result<()> {
        if self.p > 1e-12 && self.p < 1.0 - 1e-12 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "eta {} gives P(Y = 1) = {}; both classes must be possible",
                self.spec.eta, self.p
            )))
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.marginal.support()
    }

    /// The regression function as a scorer.
    pub fn eta_scorer(&self) -> ScoringModel {
        ScoringModel::Posterior(self.eta.clone())
    }

    /// Points where the weights `f` and `eta f` are not smooth.
    pub(crate) fn kinks(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let mut k = vec![lo, hi];
        k.extend(self.eta.kinks());
        k.sort_by(f64::total_cmp);
        k
    }

    /// `mu((-inf, x])`.
    pub fn mass_below(&self, x: f64) -> f64 {
        self.marginal.cdf(x)
    }

    /// `P(X <= x, Y = 1)`.
    pub fn positive_mass_below(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return self.p;
        }
        let t = &self.table;
        let k = t.grid.partition_point(|&g| g <= x) - 1;
        let mut weight = |y: f64| self.eta.eval(y) * self.marginal.pdf(y);
        t.cumulative[k] + gk15(&mut weight, t.grid[k], x).0
    }

    /// `mu(A)`.
    pub fn mass(&self, set: &IntervalSet) -> f64 {
        set.parts()
            .iter()
            .map(|&(a, b)| self.mass_below(b) - self.mass_below(a))
            .sum()
    }

    /// `P(X in A, Y = 1)`.
    pub fn positive_mass(&self, set: &IntervalSet) -> f64 {
        set.parts()
            .iter()
            .map(|&(a, b)| self.positive_mass_below(b) - self.positive_mass_below(a))
            .sum()
    }

    /// `P(X in A, Y = -1)`.
    pub fn negative_mass(&self, set: &IntervalSet) -> f64 {
        self.mass(set) - self.positive_mass(set)
    }

    /// Draws `n` labelled points.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.marginal.sample(rng);
            let u: f64 = rng.random();
            xs.push(x);
            ys.push(if u < self.eta.eval(x) { Label::Pos } else { Label::Neg });
        }
        Dataset::from_1d(xs, ys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;

    #[test]
    fn uniform_linear_masses() {
        let m = SyntheticModel::uniform_linear();
        assert!((m.p() - 0.5).abs() < 1e-15);
        assert!((m.positive_mass_below(0.8) - 0.32).abs() < 1e-15);
        let top = IntervalSet::interval(0.8, 1.0);
        assert!((m.positive_mass(&top) - 0.18).abs() < 1e-15);
        assert!((m.negative_mass(&top) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn mixture_model_p_matches_direct_integral() {
        let spec = ModelSpec {
            marginal: "gaussian-mixture(0.4,0.3,0.1,0.7,0.2,0,1)".parse().unwrap(),
            eta: "logistic(6,0.5)".into(),
            noise_exponent_alpha: Some(0.5),
        };
        let m = SyntheticModel::from_spec(spec).unwrap();
        let direct = integrate(
            |x| m.eta(x) * m.marginal().pdf(x),
            0.0,
            1.0,
            QuadOptions::absolute(1e-14),
        )
        .unwrap()
        .value;
        assert!((m.p() - direct).abs() < 1e-12);
        for x in [0.05, 0.33, 0.5001, 0.9] {
            let part = integrate(|y| m.eta(y) * m.marginal().pdf(y), 0.0, x, QuadOptions::absolute(1e-14))
                .unwrap()
                .value;
            assert!((m.positive_mass_below(x) - part).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_eta_samples_one_class() {
        let mut rng = SeedSpec::new(1).child_stream(0);
        let ones = SyntheticModel::new(Marginal::uniform(), EtaPreset::Constant { c: 1.0 }).unwrap();
        assert!(ones.sample(500, &mut rng).unwrap().labels().iter().all(|y| y.is_pos()));
        assert!(ones.require_both_classes().is_err());
        let zeros = SyntheticModel::new(Marginal::uniform(), EtaPreset::Constant { c: 0.0 }).unwrap();
        assert!(zeros
            .sample(500, &mut rng)
            .unwrap()
            .labels()
            .iter()
            .all(|y| !y.is_pos()));
        assert!(SyntheticModel::new(Marginal::uniform(), EtaPreset::Constant { c: 0.3 })
            .unwrap()
            .require_both_classes()
            .is_ok());
    }

    #[test]
    fn sampling() {
        let m = SyntheticModel::uniform_linear();
        let n = 100_000;
        let d = m.sample(n, &mut SeedSpec::new(3).child_stream(0)).unwrap();
        let share = d.counts().pos as f64 / n as f64;
        assert!((share - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        let again = m.sample(n, &mut SeedSpec::new(3).child_stream(0)).unwrap();
        assert_eq!(d, again);
        assert!(m.sample(0, &mut SeedSpec::new(3).child_stream(0)).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let text = "marginal = \"uniform\"\neta = \"step-smooth(0.7,0.1)\"\n";
        let spec: ModelSpec = toml::from_str(text).unwrap();
        let m = SyntheticModel::from_spec(spec.clone()).unwrap();
        assert_eq!(m.spec(), &spec);
        assert!(toml::from_str::<ModelSpec>("marginal = \"uniform\"\neta = \"cubic\"\n")
            .map_err(|e| e.to_string())
            .and_then(|s| SyntheticModel::from_spec(s).map_err(|e| e.to_string()))
            .is_err());
    }
}
