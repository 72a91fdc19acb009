//! Named regression functions `eta(x) = P(Y = 1 | X = x)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Presets, written in configs as `linear`, `logistic(a,b)`,
/// `step-smooth(q,w)`, `tent` or `constant(c)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EtaPreset {
    /// Rises linearly from 0 to 1 across the support.
    Linear,
    /// `1 / (1 + exp(-a (x - b)))`.
    Logistic {
        a: f64,
        b: f64,
    },
    /// `0.05 + 0.9 * smoothstep` on `[q - w, q + w]`, flat outside.
    StepSmooth {
        q: f64,
        w: f64,
    },
    /// Peaks at 1 in the middle of the support, 0 at both ends.
    Tent,
    Constant {
        c: f64,
    },
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn parse_args(name: &str, inner: &str, want: usize) -> Result<Vec<f64>> {
    let args: Vec<f64> = inner
        .split(',')
        .map(|a| a.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("{name}: {e}")))?;
    if args.len() != want || args.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config(format!("{name} takes {want} finite argument(s)")));
    }
    Ok(args)
}

impl FromStr for EtaPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, inner) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], Some(&s[i + 1..s.len() - 1])),
            Some(_) => return Err(Error::Config(format!("unbalanced parentheses in eta preset {s:?}"))),
            None => (s, None),
        };
        let preset = match (name.trim(), inner) {
            ("linear", None) => EtaPreset::Linear,
            ("tent", None) => EtaPreset::Tent,
            ("logistic", Some(i)) => {
                let a = parse_args("logistic", i, 2)?;
                EtaPreset::Logistic { a: a[0], b: a[1] }
            }
            ("step-smooth", Some(i)) => {
                let a = parse_args("step-smooth", i, 2)?;
                EtaPreset::StepSmooth { q: a[0], w: a[1] }
            }
            ("constant", Some(i)) => EtaPreset::Constant {
                c: parse_args("constant", i, 1)?[0],
            },
            _ => return Err(Error::Config(format!("unknown eta preset {s:?}"))),
        };
        preset.validate()?;
        Ok(preset)
    }
}

impl fmt::Display for EtaPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaPreset::Linear => write!(f, "linear"),
            EtaPreset::Logistic { a, b } => write!(f, "logistic({a},{b})"),
            EtaPreset::StepSmooth { q, w } => write!(f, "step-smooth({q},{w})"),
            EtaPreset::Tent => write!(f, "tent"),
            EtaPreset::Constant { c } => write!(f, "constant({c})"),
        }
    }
}

impl EtaPreset {
    fn validate(&self) -> Result<()> {
        match *self {
            EtaPreset::StepSmooth { w, .. } if w <= 0.0 => {
                Err(Error::Config("step-smooth width must be positive".into()))
            }
            EtaPreset::Constant { c } if !(0.0..=1.0).contains(&c) => {
                Err(Error::Config(format!("constant eta {c} outside [0,1]")))
            }
            _ => Ok(()),
        }
    }
}

/// A preset bound to the support `[lo, hi]` of the marginal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PosteriorRepr", into = "PosteriorRepr")]
pub struct Posterior {
    preset: EtaPreset,
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct PosteriorRepr {
    eta: String,
    lo: f64,
    hi: f64,
}

impl TryFrom<PosteriorRepr> for Posterior {
    type Error = Error;

    fn try_from(r: PosteriorRepr) -> Result<Self> {
        Posterior::new(r.eta.parse()?, r.lo, r.hi)
    }
}

impl From<Posterior> for PosteriorRepr {
    fn from(p: Posterior) -> Self {
        PosteriorRepr {
            eta: p.preset.to_string(),
            lo: p.lo,
            hi: p.hi,
        }
    }
}

impl Posterior {
    pub fn new(preset: EtaPreset, lo: f64, hi: f64) -> Result<Self> {
        preset.validate()?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!(
                "support [{lo}, {hi}] is not a bounded interval"
            )));
        }
        Ok(Posterior { preset, lo, hi })
    }

    pub fn preset(&self) -> EtaPreset {
        self.preset
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn unit(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.preset {
            EtaPreset::Linear => self.unit(x),
            EtaPreset::Logistic { a, b } => 1.0 / (1.0 + (-a * (x - b)).exp()),
            EtaPreset::StepSmooth { q, w } => 0.05 + 0.9 * smoothstep((x - (q - w)) / (2.0 * w)),
            EtaPreset::Tent => 1.0 - (2.0 * self.unit(x) - 1.0).abs(),
            EtaPreset::Constant { c } => c,
        }
    }

    /// Points of the open support where `eta` changes monotonicity or is not
    /// smooth. Between consecutive kinks `eta` is monotone.
    pub fn kinks(&self) -> Vec<f64> {
        let raw = match self.preset {
            EtaPreset::StepSmooth { q, w } => vec![q - w, q + w],
            EtaPreset::Tent => vec![0.5 * (self.lo + self.hi)],
            _ => Vec::new(),
        };
        raw.into_iter().filter(|&k| k > self.lo && k < self.hi).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in [
            "linear",
            "tent",
            "logistic(4,0.5)",
            "step-smooth(0.7,0.1)",
            "constant(0.3)",
        ] {
            let p: EtaPreset = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert_eq!(
            " logistic( 2.5 , -1 ) ".parse::<EtaPreset>().unwrap(),
            EtaPreset::Logistic { a: 2.5, b: -1.0 }
        );
        for bad in [
            "",
            "linear(1)",
            "logistic(1)",
            "constant(2)",
            "step-smooth(0.5,0)",
            "tent(",
            "cubic",
        ] {
            assert!(bad.parse::<EtaPreset>().is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn values() {
        let lin = Posterior::new(EtaPreset::Linear, 0.0, 1.0).unwrap();
        assert_eq!(lin.eval(0.3), 0.3);
        assert_eq!(lin.eval(-1.0), 0.0);
        let tent = Posterior::new(EtaPreset::Tent, 0.0, 1.0).unwrap();
        assert_eq!(tent.eval(0.5), 1.0);
        assert!((tent.eval(0.25) - 0.5).abs() < 1e-15);
        let step = Posterior::new(EtaPreset::StepSmooth { q: 0.7, w: 0.1 }, 0.0, 1.0).unwrap();
        assert_eq!(step.eval(0.1), 0.05);
        assert!((step.eval(0.95) - 0.95).abs() < 1e-15);
        assert!((step.eval(0.7) - 0.5).abs() < 1e-15);
        assert_eq!(step.kinks(), vec![0.6, 0.7999999999999999]);
        let logit = Posterior::new(EtaPreset::Logistic { a: 3.0, b: 0.5 }, 0.0, 1.0).unwrap();
        assert_eq!(logit.eval(0.5), 0.5);
    }

    #[test]
    fn serde_as_string() {
        let p = Posterior::new(EtaPreset::StepSmooth { q: 0.7, w: 0.1 }, 0.0, 1.0).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"eta":"step-smooth(0.7,0.1)","lo":0.0,"hi":1.0}"#);
        assert_eq!(serde_json::from_str::<Posterior>(&json).unwrap(), p);
    }
}
