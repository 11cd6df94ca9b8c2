//! Shared helpers for the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dynmod::indexing::{Context, IndexPoint};
use dynmod::structures::{Element, StagedStructure};
use dynmod::syntax::{Formula, Term};
use rand::seq::SliceRandom;
use rand::Rng;

/// Brute-force Tarskian truth over stage `bound`, written directly from the
/// definition: quantifiers enumerate the stage, atoms are looked up in the
/// relation's tuple set at `(bound, ..., bound)`.
pub fn brute_force(s: &StagedStructure, phi: &Formula, v: &[Element], bound: IndexPoint) -> bool {
    let stage = s.stage_elements(bound).unwrap().to_vec();
    let mut tables = BTreeMap::new();
    for (name, r) in s.relations() {
        tables.insert(
            name.clone(),
            s.relation_at(name, &Context::new(vec![bound; r.arity]))
                .unwrap(),
        );
    }
    fn term(s: &StagedStructure, v: &[Element], t: &Term) -> Element {
        match t {
            Term::Var(m) => v[*m as usize],
            Term::Const(c) => s.constant(c).unwrap(),
            Term::App(f, args) => {
                let vals: Vec<_> = args.iter().map(|a| term(s, v, a)).collect();
                s.apply(f, &vals).unwrap()
            }
        }
    }
    fn go(
        s: &StagedStructure,
        t: &BTreeMap<String, std::collections::BTreeSet<Vec<Element>>>,
        stage: &[Element],
        f: &Formula,
        v: &mut Vec<Element>,
    ) -> bool {
        match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(r, args) => {
                t[r].contains(&args.iter().map(|a| term(s, v, a)).collect::<Vec<_>>())
            }
            Formula::Equal(a, b) => term(s, v, a) == term(s, v, b),
            Formula::Not(g) => !go(s, t, stage, g, v),
            Formula::And(a, b) => go(s, t, stage, a, v) & go(s, t, stage, b, v),
            Formula::Or(a, b) => go(s, t, stage, a, v) | go(s, t, stage, b, v),
            Formula::Implies(a, b) => !go(s, t, stage, a, v) | go(s, t, stage, b, v),
            Formula::ForAll(x, body) | Formula::Exists(x, body) => {
                let results: Vec<bool> = stage
                    .iter()
                    .map(|&b| {
                        // Bind by position: canonical formulas bind the next slot.
                        assert_eq!(*x as usize, v.len());
                        v.push(b);
                        let r = go(s, t, stage, body, v);
                        v.pop();
                        r
                    })
                    .collect();
                if matches!(f, Formula::ForAll(..)) {
                    results.iter().all(|&r| r)
                } else {
                    results.iter().any(|&r| r)
                }
            }
        }
    }
    let phi = phi.canonicalize(v.len()).unwrap();
    go(s, &tables, &stage, &phi, &mut v.to_vec())
}

/// Relation layout of a generated structure.
#[derive(Clone, Debug)]
pub struct Layout {
    pub sizes: Vec<usize>,
    pub headroom: IndexPoint,
    /// Name, arity, and whether the relation is a context-dependent family.
    pub relations: Vec<(&'static str, usize, bool)>,
    pub constant: bool,
    pub equality: bool,
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("e{k}")).collect()
}

fn tuples(labels: &[String], arity: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|p: Vec<String>| {
                labels.iter().map(move |l| {
                    let mut p = p.clone();
                    p.push(l.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// A random eventually constant structure document. Stage `k` holds the
/// first `sizes[k]` elements; the last listed stage repeats. Families list
/// every context up to the saturation stage, with a tuple present at `C`
/// once `min(C)` reaches the tuple's threshold, so they are monotone but
/// not context-independent.
pub fn random_structure<R: Rng>(rng: &mut R, layout: &Layout) -> String {
    let top = *layout.sizes.last().unwrap();
    let labels = names(top);
    let stages: Vec<Vec<String>> = layout.sizes.iter().map(|&n| labels[..n].to_vec()).collect();
    let sat = layout.sizes.iter().position(|&n| n == top).unwrap() + 1;
    let first = |l: &String| {
        layout
            .sizes
            .iter()
            .position(|&n| n > labels.iter().position(|x| x == l).unwrap())
            .unwrap()
            + 1
    };
    let mut rels = serde_json::Map::new();
    for &(name, arity, family) in &layout.relations {
        let chosen: Vec<Vec<String>> = tuples(&labels, arity)
            .into_iter()
            .filter(|_| rng.gen_bool(0.4))
            .collect();
        if family {
            let thresholds: Vec<usize> = chosen
                .iter()
                .map(|t| {
                    let least = t.iter().map(first).max().unwrap();
                    rng.gen_range(least..=sat)
                })
                .collect();
            let mut fam = serde_json::Map::new();
            for ctx in tuples(&(1..=sat).map(|i| i.to_string()).collect::<Vec<_>>(), arity) {
                let c: Vec<usize> = ctx.iter().map(|x| x.parse().unwrap()).collect();
                let members: Vec<&Vec<String>> = chosen
                    .iter()
                    .zip(&thresholds)
                    .filter(|(t, &th)| {
                        th <= *c.iter().min().unwrap()
                            && t.iter().zip(&c).all(|(l, &i)| first(l) <= i)
                    })
                    .map(|(t, _)| t)
                    .collect();
                fam.insert(ctx.join(","), serde_json::json!(members));
            }
            rels.insert(
                name.into(),
                serde_json::json!({"family": fam, "arity": arity}),
            );
        } else {
            rels.insert(
                name.into(),
                serde_json::json!({"tuples": chosen, "arity": arity}),
            );
        }
    }
    let mut doc = serde_json::json!({
        "universe": {"stages": stages},
        "headroom": layout.headroom,
        "relations": rels,
        "equality": layout.equality,
    });
    if layout.constant {
        doc["constants"] = serde_json::json!({"c": labels.choose(rng).unwrap()});
    }
    doc.to_string()
}

/// All preorders on `n` nodes up to isomorphism, as `leq` matrices.
pub fn preorders_up_to_iso(n: usize) -> Vec<Vec<Vec<bool>>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let perms = permutations(n);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let mut leq = vec![vec![false; n]; n];
        for (k, row) in leq.iter_mut().enumerate() {
            row[k] = true;
        }
        for (bit, &(a, b)) in pairs.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                leq[a][b] = true;
            }
        }
        let transitive =
            (0..n).all(|a| (0..n).all(|b| (0..n).all(|c| !(leq[a][b] && leq[b][c]) || leq[a][c])));
        if !transitive {
            continue;
        }
        let canon = perms
            .iter()
            .map(|p| {
                (0..n)
                    .flat_map(|a| (0..n).map(move |b| (a, b)))
                    .map(|(a, b)| leq[p[a]][p[b]])
                    .collect::<Vec<bool>>()
            })
            .min()
            .unwrap();
        if seen.insert(canon) {
            out.push(leq);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Random subset of nodes closed upward under `leq`.
pub fn up_closed<R: Rng>(rng: &mut R, leq: &[Vec<bool>]) -> Vec<bool> {
    let n = leq.len();
    let mut set = vec![false; n];
    for row in leq {
        if rng.gen_bool(0.35) {
            for (k2, &above) in row.iter().enumerate() {
                if above {
                    set[k2] = true;
                }
            }
        }
    }
    set
}

/// A Kripke document over the frame `leq`: every node has stage 1 = `{a}`;
/// nodes in `has_b` add `b` from stage 2 on. `p[k]` lists the elements in
/// `P` at node `k`.
pub fn kripke_doc(
    leq: &[Vec<bool>],
    has_b: &[bool],
    p: &[Vec<&str>],
    headroom: IndexPoint,
) -> String {
    let n = leq.len();
    let nodes: Vec<String> = (0..n).map(|k| format!("k{k}")).collect();
    let order: Vec<(String, String)> = (0..n)
        .flat_map(|a| {
            (0..n)
                .filter(move |&b| a != b && leq[a][b])
                .map(move |b| (a, b))
        })
        .map(|(a, b)| (nodes[a].clone(), nodes[b].clone()))
        .collect();
    let mut structures = serde_json::Map::new();
    let mut states = serde_json::Map::new();
    for k in 0..n {
        let stages = if has_b[k] {
            serde_json::json!([["a"], ["a", "b"]])
        } else {
            serde_json::json!([["a"]])
        };
        structures.insert(
            nodes[k].clone(),
            serde_json::json!({"universe": {"stages": stages}, "headroom": headroom}),
        );
        let tuples: Vec<Vec<&str>> = p[k].iter().map(|&e| vec![e]).collect();
        states.insert(
            nodes[k].clone(),
            serde_json::json!({"tuples": tuples, "arity": 1}),
        );
    }
    serde_json::json!({
        "nodes": nodes,
        "order": order,
        "structures": structures,
        "relationStates": {"P": states},
    })
    .to_string()
}
