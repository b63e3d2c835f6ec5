//! Information quantities measured in nats, with an explicit `+∞` sentinel.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// A relative-entropy value in nats.
///
/// Divergences become infinite when a support condition fails. That case is
/// carried by [`Nats::Infinite`] and never by an overflowed float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nats {
    Finite(f64),
    Infinite,
}

impl Nats {
    pub const ZERO: Nats = Nats::Finite(0.0);

    /// Wraps a finite value. Panics on NaN or infinite input, which would
    /// always be a logic error upstream.
    pub fn finite(value: f64) -> Self {
        assert!(value.is_finite(), "non-finite value {value} passed to Nats::finite");
        Nats::Finite(value)
    }

    /// `-ln(x)` for `x ≥ 0`, with `x = 0` mapped to the sentinel.
    pub fn neg_ln(x: f64) -> Self {
        if x > 0.0 {
            Nats::Finite(-x.ln())
        } else {
            Nats::Infinite
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Nats::Finite(_))
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Nats::Finite(v) => Some(v),
            Nats::Infinite => None,
        }
    }

    /// Float view for comparisons and plotting; the sentinel maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            Nats::Finite(v) => v,
            Nats::Infinite => f64::INFINITY,
        }
    }

    pub fn add(self, other: f64) -> Self {
        match self {
            Nats::Finite(v) => Nats::Finite(v + other),
            Nats::Infinite => Nats::Infinite,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        match self {
            Nats::Finite(v) => Nats::Finite(v * factor),
            Nats::Infinite => Nats::Infinite,
        }
    }

    pub fn max(self, other: Nats) -> Nats {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Nats) -> Nats {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for Nats {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Nats::Finite(a), Nats::Finite(b)) => a.partial_cmp(b),
            (Nats::Finite(_), Nats::Infinite) => Some(Ordering::Less),
            (Nats::Infinite, Nats::Finite(_)) => Some(Ordering::Greater),
            (Nats::Infinite, Nats::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for Nats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nats::Finite(v) => f.write_str(&crate::numfmt::format_f64(*v)),
            Nats::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Nats {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Nats::Finite(v) => serializer.serialize_f64(*v),
            Nats::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Nats {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct NatsVisitor;

        impl Visitor<'_> for NatsVisitor {
            type Value = Nats;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a finite number or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Nats, E> {
                if v.is_finite() {
                    Ok(Nats::Finite(v))
                } else {
                    Err(E::custom("non-finite number"))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Nats, E> {
                Ok(Nats::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Nats, E> {
                Ok(Nats::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Nats, E> {
                if v == "inf" {
                    Ok(Nats::Infinite)
                } else {
                    Err(E::custom(format!("unexpected string {v:?}")))
                }
            }
        }

        deserializer.deserialize_any(NatsVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_puts_sentinel_on_top() {
        assert!(Nats::Finite(1e300) < Nats::Infinite);
        assert_eq!(Nats::neg_ln(0.0), Nats::Infinite);
        assert_eq!(Nats::neg_ln(1.0), Nats::Finite(0.0));
    }

    #[test]
    fn sentinel_serializes_as_string() {
        assert_eq!(serde_json::to_string(&Nats::Infinite).unwrap(), "\"inf\"");
        let back: Nats = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, Nats::Infinite);
        let v: Nats = serde_json::from_str("0.5").unwrap();
        assert_eq!(v, Nats::Finite(0.5));
    }
}
