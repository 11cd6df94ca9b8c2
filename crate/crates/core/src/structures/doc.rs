//! JSON documents describing staged structures.
//!
//! ```json
//! { "universe": {"builtin": "naturals"} | {"stages": [["a"], ["a", "b"]]},
//!   "headroom": 50,
//!   "relations": {"Lt": {"builtin": "lt"} | {"tuples": [["a", "b"]]} | {"family": {"2,3": [["a", "b"]]}}},
//!   "functions": {"s": {"graph": [["0", "1"], ["1", "2"]]}},
//!   "constants": {"z": "0"},
//!   "equality": true }
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::indexing::IndexPoint;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDoc {
    pub universe: UniverseDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headroom: Option<IndexPoint>,
    #[serde(default)]
    pub relations: BTreeMap<String, RelationDoc>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionDoc>,
    #[serde(default)]
    pub constants: BTreeMap<String, String>,
    #[serde(default = "yes")]
    pub equality: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UniverseDoc {
    Builtin { builtin: String },
    Stages { stages: Vec<Vec<String>> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RelationDoc {
    Builtin {
        builtin: String,
    },
    Tuples {
        tuples: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
    },
    Family {
        family: BTreeMap<String, Vec<Vec<String>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
    },
}

impl RelationDoc {
    /// Arity stated or implied by the document, if any.
    pub fn declared_arity(&self) -> Option<usize> {
        match self {
            RelationDoc::Builtin { builtin } => match builtin.as_str() {
                "lt" | "eps" => Some(2),
                "even" => Some(1),
                _ => None,
            },
            RelationDoc::Tuples { tuples, arity } => arity.or_else(|| tuples.first().map(Vec::len)),
            RelationDoc::Family { family, arity } => arity.or_else(|| {
                family
                    .iter()
                    .find_map(|(k, ts)| ts.first().map(Vec::len).or_else(|| family_key_len(k)))
            }),
        }
    }
}

fn family_key_len(key: &str) -> Option<usize> {
    key.parse::<crate::indexing::Context>()
        .ok()
        .map(|c| c.len())
        .filter(|&n| n > 0)
}

/// Each row is the argument labels followed by the value label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDoc {
    pub graph: Vec<Vec<String>>,
}

impl StructureDoc {
    pub fn from_json(text: &str) -> Result<Self, super::StructureError> {
        serde_json::from_str(text).map_err(|e| super::StructureError::Schema(e.to_string()))
    }
}
