//! Marginal distributions of `X` on a bounded interval.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Written in configs as `uniform`, `uniform(lo,hi)` or
/// `gaussian-mixture(w,m1,s1,m2,s2,lo,hi)` (two normals with weights `w` and
/// `1 - w`, truncated to `[lo, hi]` and renormalized).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    GaussianMixture(TruncatedMixture),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedMixture {
    weight: f64,
    params: [(f64, f64); 2],
    components: [Normal; 2],
    lo: f64,
    hi: f64,
    /// Untruncated mass of each weighted component inside `[lo, hi]`.
    masses: [f64; 2],
    total: f64,
}

impl TruncatedMixture {
    pub fn new(weight: f64, (m1, s1): (f64, f64), (m2, s2): (f64, f64), lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Config(format!("mixture weight {weight} outside [0,1]")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "truncation interval [{lo}, {hi}] is empty or unbounded"
            )));
        }
        let normal = |m, s| Normal::new(m, s).map_err(|e| Error::Config(format!("normal({m}, {s}): {e}")));
        let components = [normal(m1, s1)?, normal(m2, s2)?];
        let w = [weight, 1.0 - weight];
        let masses = [0, 1].map(|k| w[k] * (components[k].cdf(hi) - components[k].cdf(lo)));
        let total = masses[0] + masses[1];
        if total < 1e-12 {
            return Err(Error::Config(
                "mixture has no mass inside the truncation interval".into(),
            ));
        }
        Ok(TruncatedMixture {
            weight,
            params: [(m1, s1), (m2, s2)],
            components,
            lo,
            hi,
            masses,
            total,
        })
    }

    fn weights(&self) -> [f64; 2] {
        [self.weight, 1.0 - self.weight]
    }
}

impl Marginal {
    pub fn uniform() -> Self {
        Marginal::Uniform { lo: 0.0, hi: 1.0 }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Marginal::Uniform { lo, hi } => (*lo, *hi),
            Marginal::GaussianMixture(m) => (m.lo, m.hi),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match self {
            Marginal::Uniform { lo, hi } => 1.0 / (hi - lo),
            Marginal::GaussianMixture(m) => {
                let w = m.weights();
                (w[0] * m.components[0].pdf(x) + w[1] * m.components[1].pdf(x)) / m.total
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match self {
            Marginal::Uniform { lo, hi } => (x - lo) / (hi - lo),
            Marginal::GaussianMixture(m) => {
                let w = m.weights();
                let part = |k: usize| w[k] * (m.components[k].cdf(x) - m.components[k].cdf(lo));
                (part(0) + part(1)) / m.total
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self {
            Marginal::Uniform { lo, hi } => lo + u * (hi - lo),
            Marginal::GaussianMixture(m) => {
                let k = if u * m.total < m.masses[0] { 0 } else { 1 };
                let c = &m.components[k];
                let (a, b) = (c.cdf(m.lo), c.cdf(m.hi));
                let v: f64 = rng.random();
                c.inverse_cdf(a + v * (b - a)).clamp(m.lo, m.hi)
            }
        }
    }
}

impl FromStr for Marginal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => {
                let args = s[i + 1..s.len() - 1]
                    .split(',')
                    .map(|a| a.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Config(format!("marginal {s:?}: {e}")))?;
                (s[..i].trim(), args)
            }
            Some(_) => return Err(Error::Config(format!("unbalanced parentheses in marginal {s:?}"))),
            None => (s, Vec::new()),
        };
        match (name, args.as_slice()) {
            ("uniform", []) => Ok(Marginal::uniform()),
            ("uniform", &[lo, hi]) if lo.is_finite() && hi.is_finite() && lo < hi => Ok(Marginal::Uniform { lo, hi }),
            ("gaussian-mixture", &[w, m1, s1, m2, s2, lo, hi]) => {
                TruncatedMixture::new(w, (m1, s1), (m2, s2), lo, hi).map(Marginal::GaussianMixture)
            }
            _ => Err(Error::Config(format!("unknown or malformed marginal {s:?}"))),
        }
    }
}

impl TryFrom<String> for Marginal {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Marginal> for String {
    fn from(m: Marginal) -> String {
        m.to_string()
    }
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Marginal::Uniform { lo, hi } if *lo == 0.0 && *hi == 1.0 => write!(f, "uniform"),
            Marginal::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            Marginal::GaussianMixture(m) => {
                let [(m1, s1), (m2, s2)] = m.params;
                write!(
                    f,
                    "gaussian-mixture({},{m1},{s1},{m2},{s2},{},{})",
                    m.weight, m.lo, m.hi
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quad::{integrate, QuadOptions};
    use crate::rng::SeedSpec;

    fn mixture() -> Marginal {
        "gaussian-mixture(0.3, 0.2, 0.1, 0.7, 0.15, 0, 1)".parse().unwrap()
    }

    #[test]
    fn parse_round_trip() {
        assert_eq!("uniform".parse::<Marginal>().unwrap(), Marginal::uniform());
        let u: Marginal = "uniform(-1, 2)".parse().unwrap();
        assert_eq!(u.to_string(), "uniform(-1,2)");
        let m = mixture();
        assert_eq!(m.to_string().parse::<Marginal>().unwrap(), m);
        for bad in [
            "normal",
            "uniform(1,0)",
            "gaussian-mixture(0.5,0,1)",
            "gaussian-mixture(2,0,1,0,1,0,1)",
        ] {
            assert!(bad.parse::<Marginal>().is_err(), "{bad}");
        }
    }

    #[test]
    fn density_normalized_and_cdf_consistent() {
        for m in [Marginal::uniform(), mixture()] {
            let (lo, hi) = m.support();
            let total = integrate(|x| m.pdf(x), lo, hi, QuadOptions::absolute(1e-13))
                .unwrap()
                .value;
            assert!((total - 1.0).abs() < 1e-11, "{m}: {total}");
            for x in [0.1, 0.45, 0.8] {
                let partial = integrate(|t| m.pdf(t), lo, x, QuadOptions::absolute(1e-13))
                    .unwrap()
                    .value;
                assert!((partial - m.cdf(x)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn samples_follow_cdf() {
        let m = mixture();
        let mut rng = SeedSpec::new(11).child_stream(0);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| (0.0..=1.0).contains(&x)));
        for t in [0.2, 0.5, 0.75] {
            let emp = xs.iter().filter(|&&x| x <= t).count() as f64 / n as f64;
            let sd = (m.cdf(t) * (1.0 - m.cdf(t)) / n as f64).sqrt();
            assert!((emp - m.cdf(t)).abs() < 5.0 * sd, "t={t}: {emp} vs {}", m.cdf(t));
        }
    }
}
