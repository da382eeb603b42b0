//! Real numbers in configuration files.
//!
//! Accepts a JSON number, a string such as `"1/6"` or `"1e-5"`, or an object
//! `{"num": 1, "den": 6}`. Serializes back as a plain number.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Real(pub f64);

impl Real {
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real(x)
    }
}

impl From<Real> for f64 {
    fn from(x: Real) -> Self {
        x.0
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Real {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("invalid number {t:?}: {e}"))
        };
        let x = match s.split_once('/') {
            Some((n, d)) => {
                let d = parse(d)?;
                if d == 0.0 {
                    return Err(format!("zero denominator in {s:?}"));
                }
                parse(n)? / d
            }
            None => parse(s)?,
        };
        if x.is_finite() {
            Ok(Real(x))
        } else {
            Err(format!("non-finite value {s:?}"))
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_f64(self.0)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RealRepr {
    Number(f64),
    Text(String),
    Ratio { num: f64, den: f64 },
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match RealRepr::deserialize(de)? {
            RealRepr::Number(x) => Ok(Real(x)),
            RealRepr::Text(s) => s.parse().map_err(D::Error::custom),
            RealRepr::Ratio { num, den } => {
                if den == 0.0 {
                    Err(D::Error::custom("zero denominator"))
                } else {
                    Ok(Real(num / den))
                }
            }
        }
    }
}
