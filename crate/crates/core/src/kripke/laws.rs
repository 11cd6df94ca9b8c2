use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::indexing::{Context, IndexPoint};
use crate::structures::{product, Element, Relation, RelationFamily, StagedStructure};

use super::KripkeStagedModel;

/// `R^lower_C` holds of `tuple` but `R^upper_C` does not.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PersistenceViolation {
    pub relation: String,
    pub lower: String,
    pub upper: String,
    pub context: Context,
    pub tuple: Vec<String>,
}

impl fmt::Display for PersistenceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}) at {} holds at `{}` but not at `{}`",
            self.relation,
            self.tuple.join(", "),
            self.context,
            self.lower,
            self.upper
        )
    }
}

/// At one node, `tuple` lies in both `M_C` and `M_C'` but the relation
/// holds at `C` and fails at `C'`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CoherenceViolation {
    pub relation: String,
    pub node: String,
    pub tuple: Vec<String>,
    pub holds_at: Context,
    pub fails_at: Context,
}

impl fmt::Display for CoherenceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}) at `{}` holds at {} but fails at {}",
            self.relation,
            self.tuple.join(", "),
            self.node,
            self.holds_at,
            self.fails_at
        )
    }
}

/// Every context of length `n` with entries in `1..=headroom`, in
/// lexicographic order.
fn contexts(n: usize, headroom: IndexPoint) -> Vec<Vec<IndexPoint>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|c| {
                (1..=headroom).map(move |i| {
                    let mut c = c.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    out
}

/// Contexts `C >= least` pointwise, in lexicographic order.
fn up_set(least: &[IndexPoint], headroom: IndexPoint) -> Vec<Vec<IndexPoint>> {
    let mut out = vec![Vec::new()];
    for &lo in least {
        out = out
            .into_iter()
            .flat_map(|c| {
                (lo..=headroom).map(move |i| {
                    let mut c = c.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    out
}

/// Tuples of `M_C` on which the relation may hold.
fn candidates(s: &StagedStructure, rel: &Relation, ctx: &[IndexPoint]) -> Vec<Vec<Element>> {
    let inside = |t: &Vec<Element>| {
        t.iter()
            .zip(ctx)
            .all(|(&e, &i)| s.universe().contains(i, e))
    };
    match &rel.family {
        RelationFamily::LimitRestricted(set) => set.iter().filter(|t| inside(t)).cloned().collect(),
        RelationFamily::ExplicitFamily(map) => {
            let all: BTreeSet<&Vec<Element>> = map.values().flatten().collect();
            all.into_iter().filter(|t| inside(t)).cloned().collect()
        }
        RelationFamily::Builtin(_) => {
            let stages: Vec<&[Element]> = ctx
                .iter()
                .map(|&i| s.stage_elements(i).unwrap_or(&[]))
                .collect();
            product(&stages)
        }
    }
}

/// Exhaustive check of `R^k_C ⊆ R^k'_C` for all `k <= k'` and contexts up
/// to the headroom. Each offending tuple is reported once, at its first
/// context in lexicographic order.
pub fn check_persistence(k: &KripkeStagedModel) -> Vec<PersistenceViolation> {
    let mut out = Vec::new();
    let n = k.nodes().len();
    for a in 0..n {
        for &b in k.above(a) {
            if a == b {
                continue;
            }
            let (sa, sb) = (k.structure(a), k.structure(b));
            for (name, ra) in sa.relations() {
                let Ok(rb) = sb.relation(name) else { continue };
                if let (RelationFamily::Builtin(x), RelationFamily::Builtin(y)) =
                    (&ra.family, &rb.family)
                {
                    if x == y {
                        continue;
                    }
                }
                let mut reported = BTreeSet::new();
                for ctx in contexts(ra.arity, k.headroom()) {
                    for t in candidates(sa, ra, &ctx) {
                        if ra.family.holds(&t, &ctx)
                            && !rb.family.holds(&t, &ctx)
                            && reported.insert(t.clone())
                        {
                            out.push(PersistenceViolation {
                                relation: name.clone(),
                                lower: k.nodes()[a].clone(),
                                upper: k.nodes()[b].clone(),
                                context: Context::new(ctx.clone()),
                                tuple: t.iter().map(|&e| sa.label(e)).collect(),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Exhaustive check that at each node a tuple's membership does not depend
/// on the context, over all contexts whose stages contain it. Each
/// offending tuple is reported once.
pub fn check_context_coherence(k: &KripkeStagedModel) -> Vec<CoherenceViolation> {
    let mut out = Vec::new();
    for (node, s) in k.nodes().iter().zip((0..).map(|i| k.structure(i))) {
        for (name, rel) in s.relations() {
            // Builtin and headroom-restricted families ignore the context.
            let RelationFamily::ExplicitFamily(map) = &rel.family else {
                continue;
            };
            let tuples: BTreeSet<&Vec<Element>> = map.values().flatten().collect();
            for t in tuples {
                let Some(least) = t
                    .iter()
                    .map(|&e| s.universe().first_stage(e))
                    .collect::<Option<Vec<_>>>()
                else {
                    continue;
                };
                let mut seen: [Option<Vec<IndexPoint>>; 2] = [None, None];
                for ctx in up_set(&least, k.headroom()) {
                    let slot = &mut seen[usize::from(rel.family.holds(t, &ctx))];
                    if slot.is_none() {
                        *slot = Some(ctx);
                    }
                    if seen[0].is_some() && seen[1].is_some() {
                        break;
                    }
                }
                if let [Some(fails), Some(holds)] = seen {
                    out.push(CoherenceViolation {
                        relation: name.clone(),
                        node: node.clone(),
                        tuple: t.iter().map(|&e| s.label(e)).collect(),
                        holds_at: Context::new(holds),
                        fails_at: Context::new(fails),
                    });
                }
            }
        }
    }
    out
}
