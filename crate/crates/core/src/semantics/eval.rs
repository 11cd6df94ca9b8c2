use crate::indexing::{Context, IndexPoint, LargenessRelation};
use crate::structures::{Element, RelationFamily, StagedStructure};
use crate::syntax::{Formula, Term};

use super::{IndexChooser, SemanticsError, TraceEntry, Valuation};

pub(crate) fn term(
    s: &StagedStructure,
    elems: &[Element],
    t: &Term,
) -> Result<Element, SemanticsError> {
    match t {
        Term::Var(m) => elems
            .get(*m as usize)
            .copied()
            .ok_or_else(|| SemanticsError::InvalidValuation(format!("y{m} has no value"))),
        Term::Const(c) => s.constant(c).ok_or_else(|| {
            SemanticsError::StageEscape(format!("constant `{c}` is not interpreted"))
        }),
        Term::App(f, args) => {
            let vals = args
                .iter()
                .map(|a| term(s, elems, a))
                .collect::<Result<Vec<_>, _>>()?;
            s.apply(f, &vals).ok_or_else(|| {
                let labels: Vec<_> = vals.iter().map(|&e| s.label(e)).collect();
                SemanticsError::StageEscape(format!(
                    "`{f}` is undefined at ({})",
                    labels.join(", ")
                ))
            })
        }
    }
}

/// Tarskian truth over the stage `bound`; atoms read relation families at
/// the context `(bound, ..., bound)`.
pub(crate) fn classical(
    s: &StagedStructure,
    phi: &Formula,
    v: &[Element],
    bound: IndexPoint,
) -> Result<bool, SemanticsError> {
    let stage = s.stage_elements(bound)?;
    if let Some(&e) = v.iter().find(|e| !stage.contains(e)) {
        return Err(SemanticsError::InvalidValuation(format!(
            "{} is not in stage {bound}",
            s.label(e)
        )));
    }
    let mut elems = v.to_vec();
    Classical { s, stage, bound }.eval(phi, &mut elems)
}

struct Classical<'a> {
    s: &'a StagedStructure,
    stage: &'a [Element],
    bound: IndexPoint,
}

impl Classical<'_> {
    fn term(&self, elems: &[Element], t: &Term) -> Result<Element, SemanticsError> {
        let e = term(self.s, elems, t)?;
        if !self.stage.contains(&e) {
            return Err(SemanticsError::StageEscape(format!(
                "{t} = {} lies outside stage {}",
                self.s.label(e),
                self.bound
            )));
        }
        Ok(e)
    }

    fn eval(&self, f: &Formula, elems: &mut Vec<Element>) -> Result<bool, SemanticsError> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(r, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.term(elems, a))
                    .collect::<Result<Vec<_>, _>>()?;
                let ctx = vec![self.bound; vals.len()];
                self.s.holds(r, &vals, &ctx)?
            }
            Formula::Equal(a, b) => self.term(elems, a)? == self.term(elems, b)?,
            Formula::Not(g) => !self.eval(g, elems)?,
            Formula::And(a, b) => self.eval(a, elems)? && self.eval(b, elems)?,
            Formula::Or(a, b) => self.eval(a, elems)? || self.eval(b, elems)?,
            Formula::Implies(a, b) => !self.eval(a, elems)? || self.eval(b, elems)?,
            Formula::ForAll(_, body) | Formula::Exists(_, body) => {
                let universal = matches!(f, Formula::ForAll(..));
                for &b in self.stage {
                    elems.push(b);
                    let r = self.eval(body, elems);
                    elems.pop();
                    if r? != universal {
                        return Ok(!universal);
                    }
                }
                universal
            }
        })
    }
}

/// Reflection evaluation of a canonical formula. With a trace the
/// evaluation is exhaustive so that every quantifier visit is recorded;
/// without one it short-circuits.
pub(crate) fn reflect(
    s: &StagedStructure,
    phi: &Formula,
    v: &Valuation,
    rel: &LargenessRelation,
    chooser: &mut dyn IndexChooser,
    trace: Option<&mut Vec<TraceEntry>>,
) -> Result<bool, SemanticsError> {
    let headroom = s.headroom();
    let choose = |ctx: &[IndexPoint]| -> Result<IndexPoint, SemanticsError> {
        let horizon = rel.horizon().get_slice(ctx);
        let chosen = chooser.choose(ctx, horizon);
        if chosen < horizon {
            return Err(SemanticsError::ChooserViolation {
                context: Context::new(ctx.to_vec()),
                chosen,
                horizon,
            });
        }
        if chosen > headroom {
            return Err(SemanticsError::HeadroomExceeded {
                requested: chosen,
                headroom,
            });
        }
        Ok(chosen)
    };
    let mut r = Reflector {
        s,
        choose,
        trace,
        elems: v.elements().to_vec(),
        ctx: v.context().indices().to_vec(),
    };
    r.eval(phi)
}

/// The reflection recursion over a mutable valuation and context.
pub(crate) struct Reflector<'a, 't, F> {
    pub s: &'a StagedStructure,
    pub choose: F,
    pub trace: Option<&'t mut Vec<TraceEntry>>,
    pub elems: Vec<Element>,
    pub ctx: Vec<IndexPoint>,
}

impl<F> Reflector<'_, '_, F>
where
    F: FnMut(&[IndexPoint]) -> Result<IndexPoint, SemanticsError>,
{
    fn full(&self) -> bool {
        self.trace.is_some()
    }

    pub fn eval(&mut self, f: &Formula) -> Result<bool, SemanticsError> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(r, args) => self.atom(r, args)?,
            Formula::Equal(a, b) => term(self.s, &self.elems, a)? == term(self.s, &self.elems, b)?,
            Formula::Not(g) => !self.eval(g)?,
            Formula::And(a, b) => {
                let x = self.eval(a)?;
                if !x && !self.full() {
                    return Ok(false);
                }
                self.eval(b)? && x
            }
            Formula::Or(a, b) => {
                let x = self.eval(a)?;
                if x && !self.full() {
                    return Ok(true);
                }
                self.eval(b)? || x
            }
            Formula::Implies(a, b) => {
                let x = self.eval(a)?;
                if !x && !self.full() {
                    return Ok(true);
                }
                self.eval(b)? || !x
            }
            Formula::ForAll(_, body) => self.universal(body, false)?,
            Formula::Exists(_, body) => !self.universal(body, true)?,
        })
    }

    /// `forall b in M_i. body` (or of `~body` when `negate`), with `i` chosen
    /// at the current context.
    fn universal(&mut self, body: &Formula, negate: bool) -> Result<bool, SemanticsError> {
        let i = (self.choose)(&self.ctx)?;
        let s = self.s;
        let stage = s.stage_elements(i)?;
        if let Some(t) = self.trace.as_deref_mut() {
            t.push(TraceEntry {
                context: Context::new(self.ctx.clone()),
                chosen: i,
            });
        }
        self.ctx.push(i);
        let mut all = true;
        let mut result = Ok(());
        for &b in stage {
            self.elems.push(b);
            let r = self.eval(body);
            self.elems.pop();
            match r {
                Ok(x) => {
                    all &= x != negate;
                    if !all && !self.full() {
                        break;
                    }
                }
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        self.ctx.pop();
        result.map(|()| all)
    }

    fn atom(&self, r: &str, args: &[Term]) -> Result<bool, SemanticsError> {
        let rel = self.s.relation(r)?;
        let vals = args
            .iter()
            .map(|a| term(self.s, &self.elems, a))
            .collect::<Result<Vec<_>, _>>()?;
        if let RelationFamily::ExplicitFamily(_) = rel.family {
            let ctx = args
                .iter()
                .zip(&vals)
                .map(|(t, &e)| match t {
                    Term::Var(m) => self.ctx[*m as usize],
                    _ => self
                        .s
                        .universe()
                        .first_stage(e)
                        .unwrap_or(self.s.headroom()),
                })
                .collect::<Vec<_>>();
            Ok(rel.family.holds(&vals, &ctx))
        } else {
            Ok(rel.family.holds(&vals, &[]))
        }
    }
}
