use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::StructureError;
use crate::indexing::IndexPoint;

/// A successor relation between stage elements, as `(i, a, i', a')` pairs
/// meaning `a` at stage `i` is carried to `a'` at stage `i'`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemMap {
    pub pairs: Vec<(IndexPoint, String, IndexPoint, String)>,
}

impl SystemMap {
    /// The identity pairs of an inclusion system over the given stages.
    pub fn inclusions(stages: &[Vec<String>]) -> Self {
        let mut pairs = Vec::new();
        for (k, stage) in stages.iter().enumerate() {
            for later in k..stages.len() {
                for a in stage {
                    pairs.push((
                        k as IndexPoint + 1,
                        a.clone(),
                        later as IndexPoint + 1,
                        a.clone(),
                    ));
                }
            }
        }
        SystemMap { pairs }
    }

    pub fn from_json(text: &str) -> Result<Self, StructureError> {
        serde_json::from_str(text).map_err(|e| StructureError::Schema(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "camelCase")]
pub enum SystemClass {
    Standard,
    /// Two distinct elements of `stage` are identified at `target_stage`.
    #[serde(rename_all = "camelCase")]
    NonStandard {
        stage: IndexPoint,
        first: String,
        second: String,
        target_stage: IndexPoint,
        target: String,
    },
}

/// A system is non-standard when some later stage identifies two distinct
/// elements of an earlier one.
pub fn classify_system(map: &SystemMap) -> Result<SystemClass, StructureError> {
    let mut seen: HashMap<(IndexPoint, IndexPoint, &str), &str> = HashMap::new();
    for (i, a, i2, a2) in &map.pairs {
        if i > i2 {
            return Err(StructureError::MalformedMap(format!(
                "pair ({i}, {a}) -> ({i2}, {a2}) goes backwards"
            )));
        }
        if *i == 0 {
            return Err(StructureError::MalformedMap(
                "stage indices start at 1".into(),
            ));
        }
        match seen.get(&(*i, *i2, a2.as_str())) {
            Some(&other) if other != a => {
                return Ok(SystemClass::NonStandard {
                    stage: *i,
                    first: other.to_string(),
                    second: a.clone(),
                    target_stage: *i2,
                    target: a2.clone(),
                })
            }
            Some(_) => {}
            None => {
                seen.insert((*i, *i2, a2.as_str()), a.as_str());
            }
        }
    }
    Ok(SystemClass::Standard)
}
