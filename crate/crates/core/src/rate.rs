use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rate of best instances `u0`, strictly inside (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Rate<T>(T);

impl<T: Scalar> Rate<T> {
    pub fn new(u0: T) -> Result<Self> {
        if u0 > T::zero() && u0 < T::one() {
            Ok(Rate(u0))
        } else {
            Err(Error::invalid(format!("rate u0 must lie in (0,1), got {u0:?}")))
        }
    }

    pub fn u0(&self) -> &T {
        &self.0
    }

    /// Quantile level `v0 = 1 - u0`.
    pub fn v0(&self) -> T {
        T::one() - self.0.clone()
    }
}

impl<T: fmt::Display> fmt::Display for Rate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Either a local rate or the global (whole ROC curve) endpoint.
///
/// The global case is a separate variant rather than `u0 = 1` because the
/// generalized-inverse quantile at level 0 is `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub enum TopRate<T> {
    Local(Rate<T>),
    Global,
}

impl<T: Scalar> TopRate<T> {
    pub fn local(u0: T) -> Result<Self> {
        Rate::new(u0).map(TopRate::Local)
    }

    pub fn is_global(&self) -> bool {
        matches!(self, TopRate::Global)
    }

    /// `u0`, with the global endpoint reported as 1.
    pub fn u0(&self) -> T {
        match self {
            TopRate::Local(r) => r.u0().clone(),
            TopRate::Global => T::one(),
        }
    }
}

impl<T: Scalar> From<Rate<T>> for TopRate<T> {
    fn from(r: Rate<T>) -> Self {
        TopRate::Local(r)
    }
}

impl std::str::FromStr for TopRate<f64> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("global") {
            return Ok(TopRate::Global);
        }
        let u0: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse rate '{s}'")))?;
        TopRate::local(u0)
    }
}

impl Serialize for Rate<f64> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Rate<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let u0 = f64::deserialize(d)?;
        Rate::new(u0).map_err(serde::de::Error::custom)
    }
}

impl Serialize for TopRate<f64> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TopRate::Local(r) => s.serialize_f64(*r.u0()),
            TopRate::Global => s.serialize_str("global"),
        }
    }
}
