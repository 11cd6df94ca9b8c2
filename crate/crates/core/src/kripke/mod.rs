//! Staged Kripke models: a preorder of nodes, each carrying a staged
//! structure, with relations that may grow along the order.

mod forcing;
mod laws;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indexing::IndexPoint;
use crate::semantics::SemanticsError;
use crate::structures::{
    check_relation_ranges, intern_stage_labels, load_structure_parts, relation_from_doc, Relation,
    RelationDoc, RelationFamily, StagedStructure, StructureDoc, StructureError, Symbols,
    UniverseDoc,
};
use crate::syntax::Signature;

pub use forcing::{force, force_textbook, witness_close_kripke, witness_close_kripke_at};
pub use laws::{
    check_context_coherence, check_persistence, CoherenceViolation, PersistenceViolation,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KripkeError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("persistence violated: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Persistence(Vec<PersistenceViolation>),
    #[error("context coherence violated: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    ContextCoherence(Vec<CoherenceViolation>),
}

/// ```json
/// { "nodes": ["k0", "k1"], "order": [["k0", "k1"]],
///   "structures": {"k0": <structure>, "k1": <structure>},
///   "relationStates": {"P": {"k0": {"tuples": []}, "k1": {"tuples": [["a"]]}}} }
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct KripkeDoc {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub order: Vec<(String, String)>,
    pub structures: BTreeMap<String, StructureDoc>,
    #[serde(default)]
    pub relation_states: BTreeMap<String, BTreeMap<String, RelationDoc>>,
}

impl KripkeDoc {
    pub fn from_json(text: &str) -> Result<Self, KripkeError> {
        serde_json::from_str(text).map_err(|e| KripkeError::Schema(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KripkeStagedModel {
    names: Vec<String>,
    /// `leq[k][k2]` iff `k <= k2`, reflexive and transitive.
    leq: Vec<Vec<bool>>,
    above: Vec<Vec<usize>>,
    structures: Vec<StagedStructure>,
    headroom: IndexPoint,
}

/// Builds the model and verifies persistence and context coherence.
pub fn load_kripke(doc: &KripkeDoc) -> Result<KripkeStagedModel, KripkeError> {
    let k = KripkeStagedModel::from_doc_unchecked(doc)?;
    let p = check_persistence(&k);
    if !p.is_empty() {
        return Err(KripkeError::Persistence(p));
    }
    let c = check_context_coherence(&k);
    if !c.is_empty() {
        return Err(KripkeError::ContextCoherence(c));
    }
    Ok(k)
}

impl KripkeStagedModel {
    pub fn from_json(text: &str) -> Result<Self, KripkeError> {
        load_kripke(&KripkeDoc::from_json(text)?)
    }

    /// Builds the model with schema, range and universe checks only; the two
    /// laws are left to [`check_persistence`] and [`check_context_coherence`].
    pub fn from_doc_unchecked(doc: &KripkeDoc) -> Result<Self, KripkeError> {
        let n = doc.nodes.len();
        if n == 0 {
            return Err(KripkeError::Schema(
                "a model needs at least one node".into(),
            ));
        }
        let names = doc.nodes.clone();
        if names.iter().collect::<BTreeSet<_>>().len() != n {
            return Err(KripkeError::Schema("node names must be distinct".into()));
        }
        let index = |name: &str| {
            names
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| KripkeError::UnknownNode(name.into()))
        };
        let mut leq = vec![vec![false; n]; n];
        for (k, row) in leq.iter_mut().enumerate() {
            row[k] = true;
        }
        for (a, b) in &doc.order {
            leq[index(a)?][index(b)?] = true;
        }
        for m in 0..n {
            for a in 0..n {
                for b in 0..n {
                    if leq[a][m] && leq[m][b] {
                        leq[a][b] = true;
                    }
                }
            }
        }
        let above = (0..n)
            .map(|k| (0..n).filter(|&k2| leq[k][k2]).collect())
            .collect();

        if let Some(extra) = doc.structures.keys().find(|k| !names.contains(k)) {
            return Err(KripkeError::UnknownNode(extra.clone()));
        }
        let docs = names
            .iter()
            .map(|k| {
                doc.structures
                    .get(k)
                    .ok_or_else(|| KripkeError::Schema(format!("node `{k}` has no structure")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let explicit = docs
            .iter()
            .filter(|d| matches!(d.universe, UniverseDoc::Stages { .. }))
            .count();
        if explicit != 0 && explicit != n {
            return Err(KripkeError::Schema(
                "nodes must all use builtin or all use explicit universes".into(),
            ));
        }
        let symbols = (explicit == n).then(|| {
            let mut sym = Symbols::default();
            for d in &docs {
                intern_stage_labels(d, &mut sym);
            }
            Arc::new(sym)
        });
        let mut structures = docs
            .iter()
            .map(|d| load_structure_parts(d, symbols.clone(), false))
            .collect::<Result<Vec<_>, _>>()?;
        let headroom = structures[0].headroom();
        if structures.iter().any(|s| s.headroom() != headroom) {
            return Err(KripkeError::Schema(
                "all nodes must share one headroom".into(),
            ));
        }

        for (name, states) in &doc.relation_states {
            for (node, rdoc) in states {
                let k = index(node)?;
                let rel = relation_from_doc(structures[k].universe(), name, rdoc)?;
                check_relation_ranges(structures[k].universe(), name, &rel)?;
                structures[k].set_relation_unchecked(name, rel);
            }
        }
        // Every relation is present at every node, empty where unstated.
        let mut arities: BTreeMap<String, usize> = BTreeMap::new();
        for s in &structures {
            for (name, r) in s.relations() {
                if *arities.entry(name.clone()).or_insert(r.arity) != r.arity {
                    return Err(KripkeError::Schema(format!(
                        "relation `{name}` has different arities at different nodes"
                    )));
                }
            }
        }
        for s in &mut structures {
            for (name, &arity) in &arities {
                if !s.relations().contains_key(name) {
                    s.set_relation_unchecked(
                        name,
                        Relation {
                            arity,
                            family: RelationFamily::LimitRestricted(BTreeSet::new()),
                        },
                    );
                }
            }
        }

        let model = KripkeStagedModel {
            names,
            leq,
            above,
            structures,
            headroom,
        };
        model.check_growth()?;
        Ok(model)
    }

    /// Universes, functions and constants must persist along the order.
    fn check_growth(&self) -> Result<(), KripkeError> {
        for (a, row) in self.leq.iter().enumerate() {
            for (b, &le) in row.iter().enumerate() {
                if !le || a == b {
                    continue;
                }
                let (sa, sb) = (&self.structures[a], &self.structures[b]);
                for i in 1..=self.headroom {
                    let later = sb.stage_elements(i)?;
                    if let Some(&e) = sa.stage_elements(i)?.iter().find(|e| !later.contains(e)) {
                        return Err(KripkeError::Schema(format!(
                            "element {} of stage {i} at `{}` is missing at `{}`",
                            sa.label(e),
                            self.names[a],
                            self.names[b]
                        )));
                    }
                }
                for (c, &e) in sa.constants() {
                    if sb.constant(c) != Some(e) {
                        return Err(KripkeError::Schema(format!(
                            "constant `{c}` changes from `{}` to `{}`",
                            self.names[a], self.names[b]
                        )));
                    }
                }
                for (f, g) in sa.functions() {
                    let ok = sb
                        .functions()
                        .get(f)
                        .is_some_and(|h| g.graph.iter().all(|(k, v)| h.graph.get(k) == Some(v)));
                    if !ok {
                        return Err(KripkeError::Schema(format!(
                            "function `{f}` changes from `{}` to `{}`",
                            self.names[a], self.names[b]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn node_index(&self, name: &str) -> Result<usize, KripkeError> {
        self.names
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| KripkeError::UnknownNode(name.into()))
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    /// Nodes at or above `k`.
    pub fn above(&self, k: usize) -> &[usize] {
        &self.above[k]
    }

    pub fn structure(&self, k: usize) -> &StagedStructure {
        &self.structures[k]
    }

    pub fn headroom(&self) -> IndexPoint {
        self.headroom
    }

    /// Union of the node signatures.
    pub fn signature(&self) -> Signature {
        let mut sig = Signature::new(self.structures.iter().all(|s| s.has_equality()));
        for s in &self.structures {
            for (name, r) in s.relations() {
                if sig.relation_arity(name).is_none() {
                    let _ = sig.add_relation(name, r.arity);
                }
            }
            for (name, f) in s.functions() {
                if !sig.functions().contains_key(name) {
                    let _ = sig.add_function(name, f.arity);
                }
            }
            for name in s.constants().keys() {
                if !sig.constants().contains(name) {
                    let _ = sig.add_constant(name);
                }
            }
        }
        sig
    }

    /// Replaces the family of `name` at `node` without checking either law.
    pub fn with_relation_state_unchecked(
        mut self,
        node: &str,
        name: &str,
        family: RelationFamily,
    ) -> Result<Self, KripkeError> {
        let k = self.node_index(node)?;
        let arity = self.structures[k].relation(name)?.arity;
        let rel = Relation { arity, family };
        check_relation_ranges(self.structures[k].universe(), name, &rel)?;
        self.structures[k].set_relation_unchecked(name, rel);
        Ok(self)
    }
}
