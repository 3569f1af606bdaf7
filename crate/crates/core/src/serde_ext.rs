//! Extended-real bound vectors serialize infinite entries as `null`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn serialize<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
    values
        .iter()
        .map(|v| v.is_finite().then_some(*v))
        .collect::<Vec<_>>()
        .serialize(serializer)
}

fn deserialize<'de, D: Deserializer<'de>>(deserializer: D, fill: f64) -> Result<Vec<f64>, D::Error> {
    let raw = Vec::<Option<f64>>::deserialize(deserializer)?;
    Ok(raw.into_iter().map(|v| v.unwrap_or(fill)).collect())
}

/// `null` reads as −∞.
pub mod lower {
    use super::*;

    pub fn serialize<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
        super::serialize(values, serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<f64>, D::Error> {
        super::deserialize(deserializer, f64::NEG_INFINITY)
    }
}

/// `null` reads as +∞.
pub mod upper {
    use super::*;

    pub fn serialize<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
        super::serialize(values, serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<f64>, D::Error> {
        super::deserialize(deserializer, f64::INFINITY)
    }
}
