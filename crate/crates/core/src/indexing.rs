//! Stage indices, contexts of indices, horizon functions and the
//! "sufficiently large" relation they induce.
//!
//! A context `C = (i_0, ..., i_{n-1})` records the stage from which each
//! currently instantiated free variable was drawn. An index `i` is large
//! relative to `C` when `i >= h(C)` for the active horizon function `h`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A stage number. Stages are numbered from 1.
pub type IndexPoint = u32;

/// A finite sequence of stage indices, one per instantiated free variable.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(Vec<IndexPoint>);

impl Context {
    pub fn empty() -> Self {
        Context(Vec::new())
    }

    pub fn new(indices: Vec<IndexPoint>) -> Self {
        Context(indices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[IndexPoint] {
        &self.0
    }

    pub fn get(&self, k: usize) -> Option<IndexPoint> {
        self.0.get(k).copied()
    }

    /// The context with `i` appended.
    pub fn extend(&self, i: IndexPoint) -> Context {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(i);
        Context(v)
    }

    /// The first `k` entries.
    pub fn prefix(&self, k: usize) -> Context {
        Context(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn max_index(&self) -> Option<IndexPoint> {
        self.0.iter().copied().max()
    }

    /// `self <= other` in the pointwise order (same length required).
    pub fn pointwise_le(&self, other: &Context) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl std::borrow::Borrow<[IndexPoint]> for Context {
    fn borrow(&self) -> &[IndexPoint] {
        &self.0
    }
}

impl From<Vec<IndexPoint>> for Context {
    fn from(v: Vec<IndexPoint>) -> Self {
        Context(v)
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// Parses `"2,3"`, `"(2,3)"` or the empty string.
impl FromStr for Context {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .trim();
        if s.is_empty() {
            return Ok(Context::empty());
        }
        s.split(',')
            .map(|p| {
                let p = p.trim();
                match p.parse::<IndexPoint>() {
                    Ok(0) => Err(format!("stage index must be at least 1, got `{p}`")),
                    Ok(i) => Ok(i),
                    Err(_) => Err(format!("not a stage index: `{p}`")),
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Context)
    }
}

pub fn extend_context(c: &Context, i: IndexPoint) -> Context {
    c.extend(i)
}

/// Rule used for contexts without a table entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DefaultRule {
    /// `max(C) + 1`, or 1 on the empty context.
    #[default]
    MaxPlusOne,
    /// The same index for every context.
    Constant(IndexPoint),
}

/// The least element of the indefinitely large region, per context.
///
/// Lookup is exact match on the table, then the default rule.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HorizonFunction {
    table: BTreeMap<Context, IndexPoint>,
    rule: DefaultRule,
}

impl HorizonFunction {
    /// Empty table with the `max + 1` fallback.
    pub fn fallback() -> Self {
        Self::default()
    }

    /// `h(C) = i` for every context. `i` must be at least 1.
    pub fn constant(i: IndexPoint) -> Self {
        assert!(i >= 1, "horizon must be at least 1");
        HorizonFunction {
            table: BTreeMap::new(),
            rule: DefaultRule::Constant(i),
        }
    }

    pub fn with_table(table: BTreeMap<Context, IndexPoint>) -> Self {
        assert!(
            table.values().all(|&i| i >= 1),
            "horizon must be at least 1"
        );
        HorizonFunction {
            table,
            rule: DefaultRule::MaxPlusOne,
        }
    }

    pub fn insert(&mut self, c: Context, i: IndexPoint) -> Option<IndexPoint> {
        assert!(i >= 1, "horizon must be at least 1");
        self.table.insert(c, i)
    }

    pub fn rule(&self) -> DefaultRule {
        self.rule
    }

    pub fn table(&self) -> &BTreeMap<Context, IndexPoint> {
        &self.table
    }

    pub fn default_value(&self, c: &Context) -> IndexPoint {
        match self.rule {
            DefaultRule::MaxPlusOne => c.max_index().map_or(1, |m| m + 1),
            DefaultRule::Constant(i) => i,
        }
    }

    pub fn get(&self, c: &Context) -> IndexPoint {
        self.table
            .get(c)
            .copied()
            .unwrap_or_else(|| self.default_value(c))
    }

    pub(crate) fn get_slice(&self, c: &[IndexPoint]) -> IndexPoint {
        // Avoids allocating a Context on the evaluator's hot path when the
        // table is empty.
        if self.table.is_empty() {
            return match self.rule {
                DefaultRule::MaxPlusOne => c.iter().copied().max().map_or(1, |m| m + 1),
                DefaultRule::Constant(i) => i,
            };
        }
        self.get(&Context(c.to_vec()))
    }
}

/// `C << i` iff `i >= h(C)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LargenessRelation {
    horizon: HorizonFunction,
}

impl LargenessRelation {
    pub fn new(horizon: HorizonFunction) -> Self {
        LargenessRelation { horizon }
    }

    pub fn fallback() -> Self {
        Self::new(HorizonFunction::fallback())
    }

    pub fn horizon(&self) -> &HorizonFunction {
        &self.horizon
    }

    pub fn is_large(&self, c: &Context, i: IndexPoint) -> bool {
        i >= self.horizon.get(c)
    }
}

pub fn is_large(rel: &LargenessRelation, c: &Context, i: IndexPoint) -> bool {
    rel.is_large(c, i)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UpwardClosureViolation {
    pub context: Context,
    pub lower: IndexPoint,
    pub upper: IndexPoint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoherenceViolation {
    pub context: Context,
    /// Position `k` with `(i_0, ..., i_{k-1}) << i_k` failing.
    pub position: usize,
    pub required: IndexPoint,
    pub found: IndexPoint,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub upward_closure: Vec<UpwardClosureViolation>,
    pub coherence: Vec<CoherenceViolation>,
    /// Always true for relations induced by a horizon function.
    pub upward_closure_vacuous: bool,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.upward_closure.is_empty() && self.coherence.is_empty()
    }
}

/// Scans upward closure for every listed context and every `i <= i' <= max_index`,
/// and checks coherence of every listed context.
pub fn check_largeness_axioms(
    rel: &LargenessRelation,
    contexts: &[Context],
    max_index: IndexPoint,
) -> AxiomReport {
    let mut report = AxiomReport {
        upward_closure_vacuous: true,
        ..Default::default()
    };
    for c in contexts {
        // Any large index followed by a non-large one is a violation.
        let mut first_large = None;
        for i in 1..=max_index {
            let large = rel.is_large(c, i);
            match (first_large, large) {
                (None, true) => first_large = Some(i),
                (Some(lo), false) => report.upward_closure.push(UpwardClosureViolation {
                    context: c.clone(),
                    lower: lo,
                    upper: i,
                }),
                _ => {}
            }
        }
        for k in 0..c.len() {
            let prefix = c.prefix(k);
            let found = c.indices()[k];
            if !rel.is_large(&prefix, found) {
                report.coherence.push(CoherenceViolation {
                    context: c.clone(),
                    position: k,
                    required: rel.horizon().get(&prefix),
                    found,
                });
            }
        }
    }
    report
}
