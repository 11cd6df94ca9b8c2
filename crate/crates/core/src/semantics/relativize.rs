use std::collections::BTreeSet;

use crate::indexing::IndexPoint;
use crate::structures::{RelationFamily, StagedStructure};
use crate::syntax::{Formula, Term};

use super::{ReflectionResult, SemanticsError};

/// Guards every quantifier by a unary predicate chosen by its nesting depth:
/// `forall y. f` becomes `forall y. (O_k(y) -> f)` and `exists y. f` becomes
/// `exists y. (O_k(y) & f)`, where `k` counts the enclosing quantifiers.
pub fn relativize(phi: &Formula, predicates: &[String]) -> Result<Formula, SemanticsError> {
    let depth = phi.quantifier_depth();
    if depth > predicates.len() {
        return Err(SemanticsError::DepthExceeded {
            depth,
            predicates: predicates.len(),
        });
    }
    Ok(guard(phi, predicates, 0))
}

fn guard(f: &Formula, preds: &[String], k: usize) -> Formula {
    match f {
        Formula::Atom(..) | Formula::Equal(..) | Formula::True | Formula::False => f.clone(),
        Formula::Not(g) => Formula::not(guard(g, preds, k)),
        Formula::And(a, b) => Formula::and(guard(a, preds, k), guard(b, preds, k)),
        Formula::Or(a, b) => Formula::or(guard(a, preds, k), guard(b, preds, k)),
        Formula::Implies(a, b) => Formula::implies(guard(a, preds, k), guard(b, preds, k)),
        Formula::ForAll(v, body) => {
            let omega = Formula::atom(&preds[k], vec![Term::Var(*v)]);
            Formula::forall(*v, Formula::implies(omega, guard(body, preds, k + 1)))
        }
        Formula::Exists(v, body) => {
            let omega = Formula::atom(&preds[k], vec![Term::Var(*v)]);
            Formula::exists(*v, Formula::and(omega, guard(body, preds, k + 1)))
        }
    }
}

/// The stage chosen at each quantifier depth of a traced reflection run.
/// Fails if two visits at the same depth chose different stages.
pub fn relativization_indices(
    result: &ReflectionResult,
    free: usize,
) -> Result<Vec<IndexPoint>, SemanticsError> {
    let mut out: Vec<Option<IndexPoint>> = Vec::new();
    for t in &result.trace {
        let k = t.context.len() - free;
        if out.len() <= k {
            out.resize(k + 1, None);
        }
        match out[k] {
            None => out[k] = Some(t.chosen),
            Some(i) if i == t.chosen => {}
            Some(i) => {
                return Err(SemanticsError::InvalidValuation(format!(
                    "depth {k} ranges over stages {i} and {} in one run",
                    t.chosen
                )))
            }
        }
    }
    Ok(out.into_iter().map(|i| i.unwrap_or(1)).collect())
}

/// Adds `Omega0, Omega1, ...` to `s`, each the set of elements of the stage
/// traced at that depth, and relativizes `phi` to them.
pub fn omega_relativization(
    s: &StagedStructure,
    phi: &Formula,
    indices: &[IndexPoint],
) -> Result<(StagedStructure, Formula), SemanticsError> {
    let mut names = Vec::with_capacity(indices.len());
    let mut out = s.clone();
    for (k, &i) in indices.iter().enumerate() {
        let name = format!("Omega{k}");
        let tuples: BTreeSet<_> = s.stage_elements(i)?.iter().map(|&e| vec![e]).collect();
        out = out.with_relation(&name, 1, RelationFamily::LimitRestricted(tuples))?;
        names.push(name);
    }
    let psi = relativize(phi, &names)?;
    Ok((out, psi))
}
