use serde::Serialize;

use super::{BuiltinUniverse, Element, StagedUniverse, StructureError};
use crate::indexing::IndexPoint;

/// Whether the `j`-th stage of the evens can sit inside the `i`-th stage of
/// the naturals, and whether the two stages correspond one to one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ParadoxReport {
    pub i: IndexPoint,
    pub j: IndexPoint,
    pub subset_holds: bool,
    pub bijection_holds: bool,
    /// The closed forms agree with the stage sets themselves.
    pub extensional_agrees: bool,
}

/// Closed-form constraints between naturals stage `i` and evens stage `j`,
/// cross-checked against the materialized stages.
pub fn naturals_evens_constraints(
    i: IndexPoint,
    j: IndexPoint,
) -> Result<ParadoxReport, StructureError> {
    if i == 0 || j == 0 {
        return Err(StructureError::Range("stage indices start at 1".into()));
    }
    let subset_holds = i + 1 >= 2 * j;
    let bijection_holds = i == j;
    let (sub, bij) = extensional(i, j)?;
    Ok(ParadoxReport {
        i,
        j,
        subset_holds,
        bijection_holds,
        extensional_agrees: sub == subset_holds && bij == bijection_holds,
    })
}

/// Subset and bijection decided from the stage sets: the doubling map from
/// naturals stage `i` must land onto evens stage `j`.
pub fn extensional(i: IndexPoint, j: IndexPoint) -> Result<(bool, bool), StructureError> {
    let nat = StagedUniverse::builtin(BuiltinUniverse::Naturals, i)?;
    let ev = StagedUniverse::builtin(BuiltinUniverse::Evens, j)?;
    let n = nat.stage(i)?;
    let e = ev.stage(j)?;
    let subset = e.iter().all(|x| n.contains(x));
    let image: Vec<Element> = n.iter().map(|x| Element(2 * x.0)).collect();
    let bijection = n.len() == e.len()
        && image.iter().all(|x| e.contains(x))
        && e.iter().all(|x| image.contains(x));
    Ok((subset, bijection))
}
