//! Text serialization of models and counters (TOML documents).
//!
//! Floats are written in shortest round-trip form, so a save/load cycle
//! reproduces every probability exactly.

use serde::{Deserialize, Serialize};

use crate::error::{FmdpError, Result};
use crate::model::{Fmdp, RewardFactor, TransitionFactor};
use crate::space::FactorSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub state_sizes: Vec<usize>,
    pub action_sizes: Vec<usize>,
    #[serde(rename = "transition")]
    pub transitions: Vec<TransitionFactor>,
    #[serde(rename = "reward")]
    pub rewards: Vec<RewardFactor>,
}

impl From<&Fmdp> for ModelDocument {
    fn from(m: &Fmdp) -> Self {
        Self {
            state_sizes: m.state_space().sizes().to_vec(),
            action_sizes: m.action_space().sizes().to_vec(),
            transitions: m.transitions().to_vec(),
            rewards: m.rewards().to_vec(),
        }
    }
}

impl TryFrom<ModelDocument> for Fmdp {
    type Error = FmdpError;
    fn try_from(doc: ModelDocument) -> Result<Self> {
        Fmdp::new(
            FactorSpace::new(doc.state_sizes)?,
            FactorSpace::new(doc.action_sizes)?,
            doc.transitions,
            doc.rewards,
        )
    }
}

pub fn model_to_string(model: &Fmdp) -> Result<String> {
    to_toml(&ModelDocument::from(model))
}

pub fn model_from_str(text: &str) -> Result<Fmdp> {
    let doc: ModelDocument = from_toml(text)?;
    Fmdp::try_from(doc)
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| FmdpError::Format(e.to_string()))
}

pub fn from_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| FmdpError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RewardTable;
    use crate::space::Scope;

    #[test]
    fn roundtrip_is_value_exact() {
        let s = FactorSpace::new(vec![2, 3]).unwrap();
        let a = FactorSpace::new(vec![2]).unwrap();
        let third = 1.0 / 3.0;
        let t0 = TransitionFactor {
            scope: Scope::new(vec![0, 2]),
            probs: vec![0.1, 0.9, third, 1.0 - third, 0.123456789012345, 0.876543210987655, 1.0, 0.0],
        };
        let t1 = TransitionFactor {
            scope: Scope::new(vec![1]),
            probs: vec![third, third, 1.0 - 2.0 * third, 0.2, 0.3, 0.5, 0.0, 0.0, 1.0],
        };
        let r = RewardFactor {
            scope: Scope::new(vec![1]),
            table: RewardTable::Discrete {
                support: vec![0.0, 0.5, 1.0],
                probs: vec![0.2, 0.3, 0.5, 1.0, 0.0, 0.0, third, third, 1.0 - 2.0 * third],
            },
        };
        let r2 = RewardFactor {
            scope: Scope::empty(),
            table: RewardTable::Bernoulli { means: vec![0.7] },
        };
        let m = Fmdp::new(s, a, vec![t0, t1], vec![r, r2]).unwrap();
        let text = model_to_string(&m).unwrap();
        let back = model_from_str(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn malformed_document_is_a_format_error() {
        assert!(matches!(model_from_str("state_sizes = 3"), Err(FmdpError::Format(_))));
    }
}
