//! Inequality verification: scaled elliptic lemma, ball estimates, the
//! global pipeline, Euclidean-target corollaries and the extremal search.

pub mod ball;
pub mod corollary;
pub mod cover;
pub mod global;
pub mod scaling;
pub mod search;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A positive quantity that may be `+∞` (radii, Lipschitz bounds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Extended::Infinite
        } else {
            Extended::Finite(v)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// `1/x` with `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        match self {
            Extended::Finite(v) => 1.0 / v,
            Extended::Infinite => 0.0,
        }
    }

    pub fn min(self, other: Extended) -> Extended {
        match (self, other) {
            (Extended::Infinite, o) | (o, Extended::Infinite) => o,
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a.min(b)),
        }
    }
}

impl std::fmt::Display for Extended {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Extended::from_f64(v)),
            Raw::Int(v) => Ok(Extended::Finite(v as f64)),
            Raw::Text(t) if matches!(t.trim().to_ascii_lowercase().as_str(), "inf" | "infinity" | "+inf") => {
                Ok(Extended::Infinite)
            }
            Raw::Text(t) => t
                .trim()
                .parse::<f64>()
                .map(Extended::from_f64)
                .map_err(|_| serde::de::Error::custom(format!("expected a number or \"inf\", got \"{t}\""))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_round_trip() {
        let v: Vec<Extended> = serde_json::from_str(r#"[1.5, 2, "inf"]"#).unwrap();
        assert_eq!(v, vec![Extended::Finite(1.5), Extended::Finite(2.0), Extended::Infinite]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[1.5,2.0,"inf"]"#);
        assert!(serde_json::from_str::<Extended>(r#""big""#).is_err());
    }

    #[test]
    fn arithmetic() {
        assert_eq!(Extended::Infinite.recip(), 0.0);
        assert_eq!(Extended::Finite(4.0).recip(), 0.25);
        assert_eq!(Extended::Infinite.min(Extended::Finite(2.0)), Extended::Finite(2.0));
        assert_eq!(Extended::Infinite.min(Extended::Infinite), Extended::Infinite);
    }
}
