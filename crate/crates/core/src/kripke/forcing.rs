use std::collections::BTreeSet;

use crate::indexing::{Context, IndexPoint, LargenessRelation};
use crate::semantics::{
    close, SemanticsError, Site, Valuation, WindowProblem, WitnessClosureReport,
};
use crate::structures::{product, Element, RelationFamily};
use crate::syntax::{Formula, Term};

use super::{KripkeError, KripkeStagedModel};

fn prepare(k: &KripkeStagedModel, phi: &Formula, free: usize) -> Result<Formula, KripkeError> {
    k.signature().check(phi).map_err(SemanticsError::from)?;
    Ok(phi.canonicalize(free).map_err(SemanticsError::from)?)
}

fn check_valuation(
    k: &KripkeStagedModel,
    node: usize,
    elements: &[Element],
    ctx: &[IndexPoint],
) -> Result<(), KripkeError> {
    let s = k.structure(node);
    for (m, (&e, &i)) in elements.iter().zip(ctx).enumerate() {
        if !s.stage_elements(i)?.contains(&e) {
            return Err(SemanticsError::InvalidValuation(format!(
                "y{m} = {} is not in stage {i} at `{}`",
                s.label(e),
                k.nodes()[node]
            ))
            .into());
        }
    }
    Ok(())
}

/// Reflection forcing at `node`: universals range over every later node's
/// stage `h(C)`, existentials over the node's own stage `h(C)`;
/// implication and negation look at all later nodes.
pub fn force(
    k: &KripkeStagedModel,
    node: &str,
    phi: &Formula,
    v: &Valuation,
    rel: &LargenessRelation,
) -> Result<bool, KripkeError> {
    let node = k.node_index(node)?;
    check_valuation(k, node, v.elements(), v.context().indices())?;
    let phi = prepare(k, phi, v.len())?;
    let headroom = k.headroom();
    let mut f = Forcer {
        k,
        choose: |c: &[IndexPoint]| {
            let i = rel.horizon().get_slice(c);
            if i > headroom {
                return Err(SemanticsError::HeadroomExceeded {
                    requested: i,
                    headroom,
                });
            }
            Ok(i)
        },
        elems: v.elements().to_vec(),
        ctx: v.context().indices().to_vec(),
    };
    Ok(f.force(node, &phi)?)
}

/// Textbook Kripke forcing with every quantifier over stage `bound` of the
/// node it is evaluated at; atoms read families at `(bound, ..., bound)`.
pub fn force_textbook(
    k: &KripkeStagedModel,
    node: &str,
    phi: &Formula,
    v: &[Element],
    bound: IndexPoint,
) -> Result<bool, KripkeError> {
    let node = k.node_index(node)?;
    if bound > k.headroom() {
        return Err(SemanticsError::HeadroomExceeded {
            requested: bound,
            headroom: k.headroom(),
        }
        .into());
    }
    check_valuation(k, node, v, &vec![bound; v.len()])?;
    let phi = prepare(k, phi, v.len())?;
    let mut elems = v.to_vec();
    Ok(textbook(k, node, &phi, &mut elems, bound)?)
}

fn term(
    k: &KripkeStagedModel,
    node: usize,
    elems: &[Element],
    t: &Term,
) -> Result<Element, SemanticsError> {
    let s = k.structure(node);
    match t {
        Term::Var(m) => Ok(elems[*m as usize]),
        Term::Const(c) => s.constant(c).ok_or_else(|| {
            SemanticsError::StageEscape(format!(
                "constant `{c}` is undefined at `{}`",
                k.nodes()[node]
            ))
        }),
        Term::App(f, args) => {
            let vals = args
                .iter()
                .map(|a| term(k, node, elems, a))
                .collect::<Result<Vec<_>, _>>()?;
            s.apply(f, &vals).ok_or_else(|| {
                SemanticsError::StageEscape(format!("`{f}` is undefined at `{}`", k.nodes()[node]))
            })
        }
    }
}

fn textbook(
    k: &KripkeStagedModel,
    node: usize,
    f: &Formula,
    elems: &mut Vec<Element>,
    bound: IndexPoint,
) -> Result<bool, SemanticsError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(r, args) => {
            let vals = args
                .iter()
                .map(|a| term(k, node, elems, a))
                .collect::<Result<Vec<_>, _>>()?;
            k.structure(node)
                .holds(r, &vals, &vec![bound; vals.len()])?
        }
        Formula::Equal(a, b) => term(k, node, elems, a)? == term(k, node, elems, b)?,
        Formula::And(a, b) => {
            textbook(k, node, a, elems, bound)? && textbook(k, node, b, elems, bound)?
        }
        Formula::Or(a, b) => {
            textbook(k, node, a, elems, bound)? || textbook(k, node, b, elems, bound)?
        }
        Formula::Not(g) => {
            for &k2 in k.above(node) {
                if textbook(k, k2, g, elems, bound)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Implies(a, b) => {
            for &k2 in k.above(node) {
                if textbook(k, k2, a, elems, bound)? && !textbook(k, k2, b, elems, bound)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::ForAll(_, body) => {
            for &k2 in k.above(node) {
                for &b in k.structure(k2).stage_elements(bound)? {
                    elems.push(b);
                    let r = textbook(k, k2, body, elems, bound);
                    elems.pop();
                    if !r? {
                        return Ok(false);
                    }
                }
            }
            true
        }
        Formula::Exists(_, body) => {
            for &b in k.structure(node).stage_elements(bound)? {
                elems.push(b);
                let r = textbook(k, node, body, elems, bound);
                elems.pop();
                if r? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

struct Forcer<'a, F> {
    k: &'a KripkeStagedModel,
    choose: F,
    elems: Vec<Element>,
    ctx: Vec<IndexPoint>,
}

impl<F> Forcer<'_, F>
where
    F: FnMut(&[IndexPoint]) -> Result<IndexPoint, SemanticsError>,
{
    fn force(&mut self, node: usize, f: &Formula) -> Result<bool, SemanticsError> {
        let k = self.k;
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(r, args) => self.atom(node, r, args)?,
            Formula::Equal(a, b) => {
                term(k, node, &self.elems, a)? == term(k, node, &self.elems, b)?
            }
            Formula::And(a, b) => self.force(node, a)? && self.force(node, b)?,
            Formula::Or(a, b) => self.force(node, a)? || self.force(node, b)?,
            Formula::Not(g) => {
                for &k2 in k.above(node) {
                    if self.force(k2, g)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Implies(a, b) => {
                for &k2 in k.above(node) {
                    if self.force(k2, a)? && !self.force(k2, b)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::ForAll(_, body) => {
                let i = (self.choose)(&self.ctx)?;
                self.universal(node, body, i)?
            }
            Formula::Exists(_, body) => {
                let i = (self.choose)(&self.ctx)?;
                self.existential(node, body, i)?
            }
        })
    }

    fn universal(
        &mut self,
        node: usize,
        body: &Formula,
        i: IndexPoint,
    ) -> Result<bool, SemanticsError> {
        let k = self.k;
        self.ctx.push(i);
        let mut result = Ok(true);
        'outer: for &k2 in k.above(node) {
            for &b in k.structure(k2).stage_elements(i)? {
                self.elems.push(b);
                let r = self.force(k2, body);
                self.elems.pop();
                match r {
                    Ok(true) => {}
                    other => {
                        result = other;
                        break 'outer;
                    }
                }
            }
        }
        self.ctx.pop();
        result
    }

    fn existential(
        &mut self,
        node: usize,
        body: &Formula,
        i: IndexPoint,
    ) -> Result<bool, SemanticsError> {
        let k = self.k;
        self.ctx.push(i);
        let mut result = Ok(false);
        for &b in k.structure(node).stage_elements(i)? {
            self.elems.push(b);
            let r = self.force(node, body);
            self.elems.pop();
            match r {
                Ok(false) => {}
                other => {
                    result = other;
                    break;
                }
            }
        }
        self.ctx.pop();
        result
    }

    fn atom(&self, node: usize, r: &str, args: &[Term]) -> Result<bool, SemanticsError> {
        let s = self.k.structure(node);
        let rel = s.relation(r)?;
        let vals = args
            .iter()
            .map(|a| term(self.k, node, &self.elems, a))
            .collect::<Result<Vec<_>, _>>()?;
        if let RelationFamily::ExplicitFamily(_) = rel.family {
            let ctx = args
                .iter()
                .zip(&vals)
                .map(|(t, &e)| match t {
                    Term::Var(m) => self.ctx[*m as usize],
                    _ => s.universe().first_stage(e).unwrap_or(s.headroom()),
                })
                .collect::<Vec<_>>();
            Ok(rel.family.holds(&vals, &ctx))
        } else {
            Ok(rel.family.holds(&vals, &[]))
        }
    }
}

struct Forcing<'a> {
    k: &'a KripkeStagedModel,
    sites: Vec<Site>,
    bodies: Vec<(bool, Formula)>,
    bases: &'a [Valuation],
    headroom: IndexPoint,
}

impl WindowProblem for Forcing<'_> {
    type Env = (usize, Vec<Element>);

    fn sites(&self) -> &[Site] {
        &self.sites
    }

    fn envs(&self, ctx: &[IndexPoint]) -> Result<Vec<(usize, Vec<Element>)>, SemanticsError> {
        let mut out = Vec::new();
        for node in 0..self.k.nodes().len() {
            let s = self.k.structure(node);
            for base in self.bases {
                let n0 = base.len();
                if base.context().indices() != &ctx[..n0] {
                    continue;
                }
                let base_ok = base
                    .elements()
                    .iter()
                    .zip(base.context().indices())
                    .all(|(&e, &i)| s.universe().contains(i, e));
                if !base_ok {
                    continue;
                }
                let stages = ctx[n0..]
                    .iter()
                    .map(|&i| s.stage_elements(i))
                    .collect::<Result<Vec<_>, _>>()?;
                for tail in product(&stages) {
                    let mut env = base.elements().to_vec();
                    env.extend(tail);
                    out.push((node, env));
                }
            }
        }
        Ok(out)
    }

    fn verdict(
        &self,
        site: usize,
        env: &(usize, Vec<Element>),
        ctx: &[IndexPoint],
        s: IndexPoint,
        h: &dyn Fn(&[IndexPoint]) -> IndexPoint,
    ) -> Result<bool, SemanticsError> {
        let headroom = self.headroom;
        let mut f = Forcer {
            k: self.k,
            choose: |c: &[IndexPoint]| {
                let i = h(c);
                if i > headroom {
                    return Err(SemanticsError::HeadroomExceeded {
                        requested: i,
                        headroom,
                    });
                }
                Ok(i)
            },
            elems: env.1.clone(),
            ctx: ctx.to_vec(),
        };
        let (existential, body) = &self.bodies[site];
        if *existential {
            f.existential(env.0, body, s)
        } else {
            f.universal(env.0, body, s)
        }
    }
}

/// Witness-closed horizon for forcing: every universal and existential
/// subformula must have a stable verdict at every node and context.
pub fn witness_close_kripke(
    k: &KripkeStagedModel,
    formulas: &[Formula],
    headroom: IndexPoint,
) -> Result<WitnessClosureReport, KripkeError> {
    witness_close_kripke_at(k, formulas, headroom, &[Valuation::empty()])
}

pub fn witness_close_kripke_at(
    k: &KripkeStagedModel,
    formulas: &[Formula],
    headroom: IndexPoint,
    bases: &[Valuation],
) -> Result<WitnessClosureReport, KripkeError> {
    if headroom > k.headroom() || headroom == 0 {
        return Err(SemanticsError::HeadroomExceeded {
            requested: headroom,
            headroom: k.headroom(),
        }
        .into());
    }
    let n0 = bases.first().map_or(0, Valuation::len);
    let mut seen = BTreeSet::new();
    let mut sites = Vec::new();
    let mut bodies = Vec::new();
    for phi in formulas {
        let phi = prepare(k, phi, n0)?;
        for (sub, _) in phi.subformulas() {
            if let Formula::ForAll(v, body) | Formula::Exists(v, body) = sub {
                if seen.insert(sub.clone()) {
                    sites.push(Site {
                        depth: *v as usize,
                        label: sub.to_string(),
                    });
                    bodies.push((matches!(sub, Formula::Exists(..)), (**body).clone()));
                }
            }
        }
    }
    let labels: Vec<String> = sites.iter().map(|s| s.label.clone()).collect();
    let problem = Forcing {
        k,
        sites,
        bodies,
        bases,
        headroom,
    };
    let base_ctx: Vec<Context> = bases.iter().map(|b| b.context().clone()).collect();
    let closure = close(&problem, &base_ctx, headroom)?;
    Ok(WitnessClosureReport::from_closure(
        closure, &labels, headroom,
    ))
}
