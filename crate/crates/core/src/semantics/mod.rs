//! Evaluation: the classical Tarskian oracle over one finite stage, the
//! reflection evaluator whose quantifiers range over a stage large relative
//! to the current context, witness-closed horizons, and the checks built on
//! them.

mod closure;
mod eval;
mod relativize;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::indexing::{Context, IndexPoint, LargenessRelation};
use crate::structures::{Element, StagedStructure, StructureError};
use crate::syntax::{Formula, SyntaxError};

#[allow(unused_imports)]
pub(crate) use closure::{close, Site, WindowProblem};
pub use closure::{
    horizon_monotonicity_violations, witness_close, witness_close_at, ExhaustedCase, StableEntry,
    WitnessClosureReport,
};
pub use relativize::{omega_relativization, relativization_indices, relativize};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Structure(StructureError),
    #[error("stage escape: {0}")]
    StageEscape(String),
    #[error("stage {requested} exceeds headroom {headroom}")]
    HeadroomExceeded {
        requested: IndexPoint,
        headroom: IndexPoint,
    },
    #[error("chooser returned {chosen} at context {context}, below the horizon {horizon}")]
    ChooserViolation {
        context: Context,
        chosen: IndexPoint,
        horizon: IndexPoint,
    },
    #[error("no stability window below the headroom: {}", describe_cases(.0))]
    Exhausted(Vec<ExhaustedCase>),
    #[error(
        "formula has quantifier depth {depth} but only {predicates} bound predicates were given"
    )]
    DepthExceeded { depth: usize, predicates: usize },
    #[error("invalid valuation: {0}")]
    InvalidValuation(String),
}

fn describe_cases(cases: &[ExhaustedCase]) -> String {
    cases
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<StructureError> for SemanticsError {
    fn from(e: StructureError) -> Self {
        match e {
            StructureError::HeadroomExceeded {
                requested,
                headroom,
            } => SemanticsError::HeadroomExceeded {
                requested,
                headroom,
            },
            other => SemanticsError::Structure(other),
        }
    }
}

/// Elements assigned to the free variables, each with the stage it was
/// drawn from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Valuation {
    elements: Vec<Element>,
    context: Context,
}

impl Valuation {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Checks that every element lies in its stage.
    pub fn new(
        s: &StagedStructure,
        elements: Vec<Element>,
        context: Context,
    ) -> Result<Self, SemanticsError> {
        if elements.len() != context.len() {
            return Err(SemanticsError::InvalidValuation(format!(
                "{} elements but a context of length {}",
                elements.len(),
                context.len()
            )));
        }
        for (k, (&e, &i)) in elements.iter().zip(context.indices()).enumerate() {
            if !s.stage_elements(i)?.contains(&e) {
                return Err(SemanticsError::InvalidValuation(format!(
                    "y{k} = {} is not in stage {i}",
                    s.label(e)
                )));
            }
        }
        Ok(Valuation { elements, context })
    }

    /// Places each element at the least stage containing it.
    pub fn at_least_stages(
        s: &StagedStructure,
        elements: Vec<Element>,
    ) -> Result<Self, SemanticsError> {
        let context = elements
            .iter()
            .map(|&e| {
                s.universe().first_stage(e).ok_or_else(|| {
                    SemanticsError::InvalidValuation(format!(
                        "{} is beyond the headroom",
                        s.label(e)
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Valuation {
            elements,
            context: Context::new(context),
        })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Picks the stage a universal quantifier ranges over, given the current
/// context and its horizon. Returning less than the horizon is an error.
pub trait IndexChooser {
    fn choose(&mut self, context: &[IndexPoint], horizon: IndexPoint) -> IndexPoint;
}

/// Always the horizon itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct HorizonChooser;

impl IndexChooser for HorizonChooser {
    fn choose(&mut self, _context: &[IndexPoint], horizon: IndexPoint) -> IndexPoint {
        horizon
    }
}

/// A uniformly random index between the horizon and an upper bound: the
/// window top recorded for the context, or the headroom.
#[derive(Clone, Debug)]
pub struct RandomChooser {
    rng: ChaCha8Rng,
    headroom: IndexPoint,
    tops: Option<Arc<BTreeMap<Context, IndexPoint>>>,
}

impl RandomChooser {
    pub fn new(seed: u64, headroom: IndexPoint) -> Self {
        RandomChooser {
            rng: ChaCha8Rng::seed_from_u64(seed),
            headroom,
            tops: None,
        }
    }

    /// Stays inside the windows a witness closure established.
    pub fn within(seed: u64, report: &WitnessClosureReport) -> Self {
        RandomChooser {
            rng: ChaCha8Rng::seed_from_u64(seed),
            headroom: report.headroom,
            tops: Some(Arc::new(report.window_top.clone())),
        }
    }
}

impl IndexChooser for RandomChooser {
    fn choose(&mut self, context: &[IndexPoint], horizon: IndexPoint) -> IndexPoint {
        let upper = self
            .tops
            .as_ref()
            .and_then(|t| t.get(context).copied())
            .unwrap_or(self.headroom);
        if horizon >= upper {
            horizon
        } else {
            self.rng.gen_range(horizon..=upper)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub context: Context,
    pub chosen: IndexPoint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReflectionResult {
    pub verdict: bool,
    /// One entry per visit of a universal quantifier, in evaluation order.
    pub trace: Vec<TraceEntry>,
    pub max_index_used: IndexPoint,
}

/// Truth in the single finite structure cut at stage `bound`.
pub fn eval_classical(
    s: &StagedStructure,
    phi: &Formula,
    v: &[Element],
    bound: IndexPoint,
) -> Result<bool, SemanticsError> {
    s.signature().check(phi)?;
    let phi = phi.canonicalize(v.len())?;
    eval::classical(s, &phi, v, bound)
}

/// Truth under reflection: each universal quantifier ranges over the stage
/// the chooser picks at or above the horizon of the current context.
/// Existentials are read as `~forall ~`.
pub fn eval_reflection(
    s: &StagedStructure,
    phi: &Formula,
    v: &Valuation,
    rel: &LargenessRelation,
    chooser: &mut dyn IndexChooser,
) -> Result<ReflectionResult, SemanticsError> {
    s.signature().check(phi)?;
    let phi = phi.canonicalize(v.len())?.eliminate_exists();
    let mut trace = Vec::new();
    let verdict = eval::reflect(s, &phi, v, rel, chooser, Some(&mut trace))?;
    let max_index_used = trace
        .iter()
        .map(|t| t.chosen)
        .chain(v.context().indices().iter().copied())
        .max()
        .unwrap_or(0);
    Ok(ReflectionResult {
        verdict,
        trace,
        max_index_used,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IndependenceReport {
    pub default_verdict: bool,
    /// Verdict under each seeded random chooser, in seed order.
    pub verdicts: Vec<bool>,
    pub all_agree: bool,
    pub first_disagreement: Option<usize>,
}

/// Re-evaluates a sentence under `trials` random choosers seeded
/// `seed, seed + 1, ...`, each staying inside the report's windows.
pub fn check_independence(
    s: &StagedStructure,
    phi: &Formula,
    report: &WitnessClosureReport,
    trials: usize,
    seed: u64,
) -> Result<IndependenceReport, SemanticsError> {
    check_independence_at(s, phi, &Valuation::empty(), report, trials, seed)
}

pub fn check_independence_at(
    s: &StagedStructure,
    phi: &Formula,
    v: &Valuation,
    report: &WitnessClosureReport,
    trials: usize,
    seed: u64,
) -> Result<IndependenceReport, SemanticsError> {
    s.signature().check(phi)?;
    let phi = phi.canonicalize(v.len())?.eliminate_exists();
    let rel = report.relation();
    let default_verdict = eval::reflect(s, &phi, v, &rel, &mut HorizonChooser, None)?;
    let mut verdicts = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut chooser = RandomChooser::within(seed.wrapping_add(t as u64), report);
        verdicts.push(eval::reflect(s, &phi, v, &rel, &mut chooser, None)?);
    }
    let first_disagreement = verdicts.iter().position(|&x| x != default_verdict);
    Ok(IndependenceReport {
        default_verdict,
        verdicts,
        all_agree: first_disagreement.is_none(),
        first_disagreement,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalityReport {
    pub max_index_used: IndexPoint,
    pub contexts_visited: usize,
    pub contexts: Vec<Context>,
    pub verdicts: Vec<bool>,
}

/// Evaluates every sentence with the horizon chooser and collects the stages
/// and contexts touched.
pub fn locality_report(
    s: &StagedStructure,
    formulas: &[Formula],
    rel: &LargenessRelation,
) -> Result<LocalityReport, SemanticsError> {
    locality_report_at(s, formulas, rel, &Valuation::empty())
}

pub fn locality_report_at(
    s: &StagedStructure,
    formulas: &[Formula],
    rel: &LargenessRelation,
    v: &Valuation,
) -> Result<LocalityReport, SemanticsError> {
    let mut contexts = BTreeSet::new();
    let mut max_index_used = 0;
    let mut verdicts = Vec::with_capacity(formulas.len());
    for phi in formulas {
        let r = eval_reflection(s, phi, v, rel, &mut HorizonChooser)?;
        contexts.insert(v.context().clone());
        for t in &r.trace {
            contexts.insert(t.context.extend(t.chosen));
        }
        max_index_used = max_index_used.max(r.max_index_used);
        verdicts.push(r.verdict);
    }
    Ok(LocalityReport {
        max_index_used,
        contexts_visited: contexts.len(),
        contexts: contexts.into_iter().collect(),
        verdicts,
    })
}

#[cfg(test)]
mod tests;
