//! Staged finite structures: cumulative universes, context-indexed relation
//! families, function graphs and constants, loaded from JSON documents.
//!
//! Successor maps between stages are set inclusions. The headroom is the
//! largest stage a run may touch; no limit structure is ever built.

mod doc;
mod paradox;
mod system;
mod universe;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::indexing::{Context, IndexPoint};
use crate::syntax::Signature;

pub use doc::{FunctionDoc, RelationDoc, StructureDoc, UniverseDoc};
pub use paradox::{naturals_evens_constraints, ParadoxReport};
pub use system::{classify_system, SystemClass, SystemMap};
pub use universe::{BuiltinUniverse, Element, StagedUniverse, Symbols, UniverseKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error(
        "relation `{relation}` is not monotone: R{lower} contains {tuple:?} but R{upper} does not"
    )]
    Monotonicity {
        relation: String,
        lower: Context,
        upper: Context,
        tuple: Vec<String>,
    },
    #[error("range error: {0}")]
    Range(String),
    #[error("stage {requested} exceeds headroom {headroom}")]
    HeadroomExceeded {
        requested: IndexPoint,
        headroom: IndexPoint,
    },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` has arity {expected}, got a context of length {found}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
    },
    #[error("malformed system map: {0}")]
    MalformedMap(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltinRelation {
    /// Strict order on numbers.
    Lt,
    /// Unary: the number is even.
    Even,
    /// Von Neumann membership, which on ordinals is the strict order.
    Eps,
}

impl BuiltinRelation {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "lt" => Some(Self::Lt),
            "even" => Some(Self::Even),
            "eps" => Some(Self::Eps),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Self::Even => 1,
            Self::Lt | Self::Eps => 2,
        }
    }

    fn holds(self, t: &[Element]) -> bool {
        match self {
            Self::Lt | Self::Eps => t[0].0 < t[1].0,
            Self::Even => t[0].0.is_multiple_of(2),
        }
    }
}

/// Interpretation of a relation symbol as a family `(R_C)` over contexts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RelationFamily {
    /// `R_C` is the builtin predicate restricted to `M_C`.
    Builtin(BuiltinRelation),
    /// Tuples at the headroom stage; `R_C` is their intersection with `M_C`.
    LimitRestricted(BTreeSet<Vec<Element>>),
    /// Listed contexts take their listed sets; any other context takes the
    /// union of the listed sets below it in the pointwise order.
    ExplicitFamily(BTreeMap<Context, BTreeSet<Vec<Element>>>),
}

impl RelationFamily {
    /// Membership of `tuple` (assumed to lie in `M_C`) in `R_C`.
    pub fn holds(&self, tuple: &[Element], ctx: &[IndexPoint]) -> bool {
        match self {
            RelationFamily::Builtin(b) => b.holds(tuple),
            RelationFamily::LimitRestricted(set) => set.contains(tuple),
            RelationFamily::ExplicitFamily(map) => match map.get(ctx) {
                Some(set) => set.contains(tuple),
                None => map.iter().any(|(c, set)| {
                    c.len() == ctx.len()
                        && c.indices().iter().zip(ctx).all(|(a, b)| a <= b)
                        && set.contains(tuple)
                }),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub arity: usize,
    pub family: RelationFamily,
}

/// A function interpretation given by its graph on the headroom stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionGraph {
    pub arity: usize,
    pub graph: HashMap<Vec<Element>, Element>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagedStructure {
    universe: StagedUniverse,
    relations: BTreeMap<String, Relation>,
    functions: BTreeMap<String, FunctionGraph>,
    constants: BTreeMap<String, Element>,
    equality: bool,
}

impl StagedStructure {
    /// Builtin naturals with `Lt` and `Even`.
    pub fn naturals(headroom: IndexPoint) -> Result<Self, StructureError> {
        let mut s = Self::bare(StagedUniverse::builtin(
            BuiltinUniverse::Naturals,
            headroom,
        )?);
        s.relations.insert(
            "Lt".into(),
            Relation {
                arity: 2,
                family: RelationFamily::Builtin(BuiltinRelation::Lt),
            },
        );
        s.relations.insert(
            "Even".into(),
            Relation {
                arity: 1,
                family: RelationFamily::Builtin(BuiltinRelation::Even),
            },
        );
        Ok(s)
    }

    /// A structure with no symbols over `universe`.
    pub fn bare(universe: StagedUniverse) -> Self {
        StagedStructure {
            universe,
            relations: BTreeMap::new(),
            functions: BTreeMap::new(),
            constants: BTreeMap::new(),
            equality: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, StructureError> {
        load_structure(&StructureDoc::from_json(text)?)
    }

    pub fn universe(&self) -> &StagedUniverse {
        &self.universe
    }

    pub fn headroom(&self) -> IndexPoint {
        self.universe.headroom()
    }

    pub fn has_equality(&self) -> bool {
        self.equality
    }

    pub fn relations(&self) -> &BTreeMap<String, Relation> {
        &self.relations
    }

    pub fn relation(&self, name: &str) -> Result<&Relation, StructureError> {
        self.relations
            .get(name)
            .ok_or_else(|| StructureError::UnknownRelation(name.to_string()))
    }

    pub fn functions(&self) -> &BTreeMap<String, FunctionGraph> {
        &self.functions
    }

    pub fn constant(&self, name: &str) -> Option<Element> {
        self.constants.get(name).copied()
    }

    pub fn constants(&self) -> &BTreeMap<String, Element> {
        &self.constants
    }

    pub fn stage_elements(&self, i: IndexPoint) -> Result<&[Element], StructureError> {
        self.universe.stage(i)
    }

    pub fn label(&self, e: Element) -> String {
        self.universe.label(e)
    }

    pub fn signature(&self) -> Signature {
        let mut sig = Signature::new(self.equality);
        // Names were checked disjoint at load time.
        for (name, r) in &self.relations {
            let _ = sig.add_relation(name, r.arity);
        }
        for (name, f) in &self.functions {
            let _ = sig.add_function(name, f.arity);
        }
        for name in self.constants.keys() {
            let _ = sig.add_constant(name);
        }
        sig
    }

    /// Adds or replaces a relation, checking it like a loaded one.
    pub fn with_relation(
        mut self,
        name: &str,
        arity: usize,
        family: RelationFamily,
    ) -> Result<Self, StructureError> {
        if self.functions.contains_key(name) || self.constants.contains_key(name) {
            return Err(StructureError::Schema(format!(
                "symbol `{name}` declared twice"
            )));
        }
        let rel = Relation { arity, family };
        check_relation(&self.universe, name, &rel)?;
        self.relations.insert(name.to_string(), rel);
        Ok(self)
    }

    /// `R_C` as an explicit tuple set inside `M_C`.
    pub fn relation_at(
        &self,
        name: &str,
        c: &Context,
    ) -> Result<BTreeSet<Vec<Element>>, StructureError> {
        let rel = self.relation(name)?;
        if c.len() != rel.arity {
            return Err(StructureError::ArityMismatch {
                relation: name.to_string(),
                expected: rel.arity,
                found: c.len(),
            });
        }
        let stages = c
            .indices()
            .iter()
            .map(|&i| self.universe.stage(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(product(&stages)
            .into_iter()
            .filter(|t| rel.family.holds(t, c.indices()))
            .collect())
    }

    /// Membership test used by the evaluators; `tuple` must lie in `M_C`.
    pub fn holds(
        &self,
        name: &str,
        tuple: &[Element],
        ctx: &[IndexPoint],
    ) -> Result<bool, StructureError> {
        Ok(self.relation(name)?.family.holds(tuple, ctx))
    }

    /// Adds or replaces a relation without any checks.
    pub(crate) fn set_relation_unchecked(&mut self, name: &str, rel: Relation) {
        self.relations.insert(name.to_string(), rel);
    }

    pub fn apply(&self, name: &str, args: &[Element]) -> Option<Element> {
        self.functions.get(name)?.graph.get(args).copied()
    }
}

/// All tuples of the cartesian product, in lexicographic stage order.
pub fn product(stages: &[&[Element]]) -> Vec<Vec<Element>> {
    let mut out = vec![Vec::with_capacity(stages.len())];
    for stage in stages {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                stage.iter().map(move |&e| {
                    let mut t = prefix.clone();
                    t.push(e);
                    t
                })
            })
            .collect();
    }
    out
}

fn check_relation(u: &StagedUniverse, name: &str, rel: &Relation) -> Result<(), StructureError> {
    check_relation_ranges(u, name, rel)?;
    check_family_monotone(u, name, rel)
}

/// Arity, builtin and range checks; families may still be non-monotone.
pub(crate) fn check_relation_ranges(
    u: &StagedUniverse,
    name: &str,
    rel: &Relation,
) -> Result<(), StructureError> {
    if rel.arity == 0 {
        return Err(StructureError::Schema(format!(
            "relation `{name}` needs arity >= 1"
        )));
    }
    let in_top =
        |t: &Vec<Element>| t.len() == rel.arity && t.iter().all(|&e| u.first_stage(e).is_some());
    match &rel.family {
        RelationFamily::Builtin(b) => {
            if !u.is_numeric() {
                return Err(StructureError::Schema(format!(
                    "builtin relation `{name}` needs a numeric universe"
                )));
            }
            if b.arity() != rel.arity {
                return Err(StructureError::Schema(format!(
                    "builtin relation `{name}` has arity {}",
                    b.arity()
                )));
            }
        }
        RelationFamily::LimitRestricted(set) => {
            if let Some(t) = set.iter().find(|t| !in_top(t)) {
                return Err(StructureError::Range(format!(
                    "tuple {t:?} of `{name}` outside the headroom stage"
                )));
            }
        }
        RelationFamily::ExplicitFamily(map) => {
            for (c, set) in map {
                if c.len() != rel.arity {
                    return Err(StructureError::ArityMismatch {
                        relation: name.to_string(),
                        expected: rel.arity,
                        found: c.len(),
                    });
                }
                if let Some(&i) = c.indices().iter().find(|&&i| i == 0 || i > u.headroom()) {
                    return Err(StructureError::Range(format!(
                        "context {c} of `{name}` has stage {i} outside 1..={}",
                        u.headroom()
                    )));
                }
                for t in set {
                    let inside = t.len() == rel.arity
                        && t.iter().zip(c.indices()).all(|(&e, &i)| u.contains(i, e));
                    if !inside {
                        let labels: Vec<_> = t.iter().map(|&e| u.label(e)).collect();
                        return Err(StructureError::Range(format!(
                            "tuple {labels:?} of `{name}` lies outside M{c}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// `R_C` contained in `R_C'` for listed contexts `C <= C'`.
pub(crate) fn check_family_monotone(
    u: &StagedUniverse,
    name: &str,
    rel: &Relation,
) -> Result<(), StructureError> {
    let RelationFamily::ExplicitFamily(map) = &rel.family else {
        return Ok(());
    };
    for (lo, lo_set) in map {
        for (hi, hi_set) in map {
            if lo != hi && lo.pointwise_le(hi) {
                if let Some(t) = lo_set.iter().find(|t| !hi_set.contains(*t)) {
                    return Err(StructureError::Monotonicity {
                        relation: name.to_string(),
                        lower: lo.clone(),
                        upper: hi.clone(),
                        tuple: t.iter().map(|&e| u.label(e)).collect(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Builds and validates a structure. Fails on schema problems, values
/// outside the headroom stage, and non-monotone explicit families.
pub fn load_structure(doc: &StructureDoc) -> Result<StagedStructure, StructureError> {
    load_structure_with(doc, None)
}

/// Collects every element name an explicit universe document mentions.
pub(crate) fn intern_stage_labels(doc: &StructureDoc, symbols: &mut Symbols) {
    if let UniverseDoc::Stages { stages } = &doc.universe {
        for name in stages.iter().flatten() {
            symbols.intern(name);
        }
    }
}

/// Like [`load_structure`], with a shared symbol table for explicit universes.
pub fn load_structure_with(
    doc: &StructureDoc,
    symbols: Option<Arc<Symbols>>,
) -> Result<StagedStructure, StructureError> {
    load_structure_parts(doc, symbols, true)
}

/// Loads a structure, optionally skipping the family monotonicity check.
pub(crate) fn load_structure_parts(
    doc: &StructureDoc,
    symbols: Option<Arc<Symbols>>,
    monotone: bool,
) -> Result<StagedStructure, StructureError> {
    let universe = match &doc.universe {
        UniverseDoc::Builtin { builtin } => {
            let kind = BuiltinUniverse::from_name(builtin).ok_or_else(|| {
                StructureError::Schema(format!("unknown builtin universe `{builtin}`"))
            })?;
            let headroom = doc.headroom.ok_or_else(|| {
                StructureError::Schema("builtin universes need a headroom".into())
            })?;
            StagedUniverse::builtin(kind, headroom)?
        }
        UniverseDoc::Stages { stages } => {
            let symbols = symbols.unwrap_or_else(|| {
                let mut s = Symbols::default();
                intern_stage_labels(doc, &mut s);
                Arc::new(s)
            });
            let headroom = doc.headroom.unwrap_or(stages.len().max(1) as IndexPoint);
            StagedUniverse::explicit(stages, headroom, symbols)?
        }
    };
    let mut s = StagedStructure::bare(universe);
    s.equality = doc.equality;
    let mut names = BTreeSet::new();
    let mut fresh = |name: &str| -> Result<(), StructureError> {
        if !names.insert(name.to_string())
            || crate::syntax::Signature::new(true)
                .add_constant(name)
                .is_err()
        {
            return Err(StructureError::Schema(format!(
                "symbol `{name}` declared twice or reserved"
            )));
        }
        Ok(())
    };
    for (name, rdoc) in &doc.relations {
        fresh(name)?;
        let rel = relation_from_doc(&s.universe, name, rdoc)?;
        check_relation_ranges(&s.universe, name, &rel)?;
        if monotone {
            check_family_monotone(&s.universe, name, &rel)?;
        }
        s.relations.insert(name.clone(), rel);
    }
    for (name, fdoc) in &doc.functions {
        fresh(name)?;
        let arity = fdoc
            .graph
            .first()
            .map_or(0, |row| row.len().saturating_sub(1));
        if arity == 0 {
            return Err(StructureError::Schema(format!(
                "function `{name}` needs at least one row of arity >= 1"
            )));
        }
        let mut graph = HashMap::new();
        for row in &fdoc.graph {
            if row.len() != arity + 1 {
                return Err(StructureError::Schema(format!(
                    "function `{name}` has rows of different lengths"
                )));
            }
            let elems = row
                .iter()
                .map(|l| s.universe.lookup_or_range(l))
                .collect::<Result<Vec<_>, _>>()?;
            let (args, value) = elems.split_at(arity);
            if let Some(prev) = graph.insert(args.to_vec(), value[0]) {
                if prev != value[0] {
                    return Err(StructureError::Schema(format!(
                        "function `{name}` has two values at {:?}",
                        &row[..arity]
                    )));
                }
            }
        }
        s.functions
            .insert(name.clone(), FunctionGraph { arity, graph });
    }
    for (name, label) in &doc.constants {
        fresh(name)?;
        let e = s.universe.lookup_or_range(label)?;
        s.constants.insert(name.clone(), e);
    }
    Ok(s)
}

pub(crate) fn relation_from_doc(
    u: &StagedUniverse,
    name: &str,
    rdoc: &RelationDoc,
) -> Result<Relation, StructureError> {
    let tuple = |t: &Vec<String>| -> Result<Vec<Element>, StructureError> {
        t.iter().map(|l| u.lookup_or_range(l)).collect()
    };
    let arity = rdoc.declared_arity().ok_or_else(|| {
        StructureError::Schema(format!("cannot infer the arity of `{name}`; add \"arity\""))
    })?;
    let family = match rdoc {
        RelationDoc::Builtin { builtin } => {
            RelationFamily::Builtin(BuiltinRelation::from_name(builtin).ok_or_else(|| {
                StructureError::Schema(format!("unknown builtin relation `{builtin}`"))
            })?)
        }
        RelationDoc::Tuples { tuples, .. } => {
            if tuples.iter().any(|t| t.len() != arity) {
                return Err(StructureError::Schema(format!(
                    "tuples of `{name}` must all have length {arity}"
                )));
            }
            RelationFamily::LimitRestricted(tuples.iter().map(tuple).collect::<Result<_, _>>()?)
        }
        RelationDoc::Family { family, .. } => {
            let mut map = BTreeMap::new();
            for (key, tuples) in family {
                let c: Context = key.parse().map_err(StructureError::Schema)?;
                if tuples.iter().any(|t| t.len() != arity) {
                    return Err(StructureError::Schema(format!(
                        "tuples of `{name}` must all have length {arity}"
                    )));
                }
                map.insert(c, tuples.iter().map(tuple).collect::<Result<_, _>>()?);
            }
            RelationFamily::ExplicitFamily(map)
        }
    };
    Ok(Relation { arity, family })
}
