//! Witness-closed horizons by stability windows.
//!
//! A site is a quantifier occurrence evaluated at contexts of a fixed length.
//! For a context `C`, an environment `a` and a candidate stage `s`, the site
//! has a verdict `V(s)`. The horizon `h(C)` is the least stage from which
//! every `V` is constant up to the top of the window. Contexts are processed
//! longest first, so inner horizons are known when outer verdicts are
//! computed. The window top of `C` is the last stage `s` before the first
//! child `C.s` that has no window of its own; a context whose verdict still
//! changes at its top has no window.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::indexing::{Context, HorizonFunction, IndexPoint, LargenessRelation};
use crate::structures::{product, Element, StagedStructure};
use crate::syntax::Formula;

use super::eval::Reflector;
use super::{SemanticsError, Valuation};

pub(crate) struct Site {
    /// Length of the contexts the site is evaluated at.
    pub depth: usize,
    pub label: String,
}

pub(crate) trait WindowProblem {
    type Env;

    fn sites(&self) -> &[Site];

    /// Environments reachable at `ctx`.
    fn envs(&self, ctx: &[IndexPoint]) -> Result<Vec<Self::Env>, SemanticsError>;

    /// Verdict of `site` when its quantifier ranges over stage `s`; inner
    /// quantifiers use the horizons `h`.
    fn verdict(
        &self,
        site: usize,
        env: &Self::Env,
        ctx: &[IndexPoint],
        s: IndexPoint,
        h: &dyn Fn(&[IndexPoint]) -> IndexPoint,
    ) -> Result<bool, SemanticsError>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExhaustedCase {
    pub subformula: Option<String>,
    pub context: Context,
    pub reason: String,
}

impl fmt::Display for ExhaustedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subformula {
            Some(s) => write!(f, "`{s}` at {}: {}", self.context, self.reason),
            None => write!(f, "{}: {}", self.context, self.reason),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Status {
    Closed { h: IndexPoint, top: IndexPoint },
    NoChild,
    Flip { site: usize, top: IndexPoint },
    TooHigh { h: IndexPoint, top: IndexPoint },
}

#[derive(Debug, Default)]
pub(crate) struct Closure {
    pub horizon: BTreeMap<Context, IndexPoint>,
    pub tops: BTreeMap<Context, IndexPoint>,
    pub stable: Vec<(usize, Context, IndexPoint)>,
    pub truncated: Vec<Context>,
    pub passes: usize,
}

fn contexts_of_len(bases: &[Context], len: usize, headroom: IndexPoint) -> Vec<Vec<IndexPoint>> {
    let mut out: Vec<Vec<IndexPoint>> = bases.iter().map(|b| b.indices().to_vec()).collect();
    for _ in bases.first().map_or(0, Context::len)..len {
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

pub(crate) fn close<P: WindowProblem>(
    p: &P,
    bases: &[Context],
    headroom: IndexPoint,
) -> Result<Closure, SemanticsError> {
    let mut bases = bases.to_vec();
    bases.sort();
    bases.dedup();
    let n0 = bases.first().map_or(0, Context::len);
    if bases.iter().any(|b| b.len() != n0) {
        return Err(SemanticsError::InvalidValuation(
            "base valuations differ in length".into(),
        ));
    }
    let sites = p.sites();
    let Some(max_len) = sites.iter().map(|s| s.depth).max() else {
        return Ok(Closure {
            passes: 1,
            ..Closure::default()
        });
    };
    let mut floors: HashMap<Vec<IndexPoint>, IndexPoint> = HashMap::new();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut status: HashMap<Vec<IndexPoint>, Status> = HashMap::new();
        let mut stable: HashMap<(usize, Vec<IndexPoint>), IndexPoint> = HashMap::new();
        for len in (n0..=max_len).rev() {
            let at_len: Vec<usize> = (0..sites.len())
                .filter(|&k| sites[k].depth == len)
                .collect();
            let mut computed = Vec::new();
            for ctx in contexts_of_len(&bases, len, headroom) {
                let floor = floors.get(&ctx).copied().unwrap_or(1);
                let st = window(
                    p,
                    &status,
                    &at_len,
                    &ctx,
                    floor,
                    len == max_len,
                    headroom,
                    &mut stable,
                )?;
                computed.push((ctx, st));
            }
            status.extend(computed);
        }

        let failed: Vec<ExhaustedCase> = bases
            .iter()
            .flat_map(|b| explain(&status, sites, b.indices()))
            .collect();
        if !failed.is_empty() {
            return Err(SemanticsError::Exhausted(failed));
        }

        // Children reachable above the horizon must not have a lower one.
        let mut changed = false;
        let mut visited: BTreeSet<Vec<IndexPoint>> = BTreeSet::new();
        let mut queue: VecDeque<Vec<IndexPoint>> =
            bases.iter().map(|b| b.indices().to_vec()).collect();
        while let Some(c) = queue.pop_front() {
            if !visited.insert(c.clone()) {
                continue;
            }
            let Some(&Status::Closed { h, top }) = status.get(&c) else {
                continue;
            };
            if c.len() == max_len {
                continue;
            }
            for i in h..=top {
                let mut child = c.clone();
                child.push(i);
                if let Some(&Status::Closed { h: ch, .. }) = status.get(&child) {
                    if ch < h {
                        let f = floors.entry(child.clone()).or_insert(1);
                        *f = (*f).max(h);
                        changed = true;
                    }
                }
                queue.push_back(child);
            }
        }
        if changed {
            continue;
        }

        let mut out = Closure {
            passes,
            ..Closure::default()
        };
        for c in &visited {
            if let Some(&Status::Closed { h, top }) = status.get(c) {
                let ctx = Context::new(c.clone());
                if top < headroom && c.len() < max_len {
                    out.truncated.push(ctx.extend(top + 1));
                }
                out.horizon.insert(ctx.clone(), h);
                out.tops.insert(ctx, top);
            }
        }
        let mut stable: Vec<_> = stable
            .into_iter()
            .filter(|((_, c), _)| visited.contains(c))
            .map(|((site, c), t)| (site, Context::new(c), t))
            .collect();
        stable.sort_by(|a, b| (&a.1, a.0).cmp(&(&b.1, b.0)));
        out.stable = stable;
        return Ok(out);
    }
}

#[allow(clippy::too_many_arguments)]
fn window<P: WindowProblem>(
    p: &P,
    status: &HashMap<Vec<IndexPoint>, Status>,
    at_len: &[usize],
    ctx: &[IndexPoint],
    floor: IndexPoint,
    innermost: bool,
    headroom: IndexPoint,
    stable: &mut HashMap<(usize, Vec<IndexPoint>), IndexPoint>,
) -> Result<Status, SemanticsError> {
    let top = if innermost {
        headroom
    } else {
        let mut child = ctx.to_vec();
        child.push(0);
        (1..=headroom)
            .find(|&s| {
                *child.last_mut().unwrap() = s;
                !matches!(status.get(&child), Some(Status::Closed { .. }))
            })
            .map_or(headroom, |s| s - 1)
    };
    if top == 0 {
        return Ok(Status::NoChild);
    }
    let lookup = |c: &[IndexPoint]| match status.get(c) {
        Some(Status::Closed { h, .. }) => *h,
        _ => headroom + 1,
    };
    let envs = p.envs(ctx)?;
    let mut h = floor;
    for &site in at_len {
        let mut m = 1;
        for env in &envs {
            let v = |s| p.verdict(site, env, ctx, s, &lookup);
            let vt = v(top)?;
            let mut t = 1;
            let mut s = top;
            while s > 1 {
                // Below the stable start found so far nothing can raise it.
                if s - 1 < m && s < top {
                    t = s;
                    break;
                }
                if v(s - 1)? != vt {
                    t = s;
                    break;
                }
                s -= 1;
            }
            if top > 1 && t == top {
                return Ok(Status::Flip { site, top });
            }
            m = m.max(t);
        }
        stable.insert((site, ctx.to_vec()), m);
        h = h.max(m);
    }
    if h > top {
        return Ok(Status::TooHigh { h, top });
    }
    Ok(Status::Closed { h, top })
}

fn explain(
    status: &HashMap<Vec<IndexPoint>, Status>,
    sites: &[Site],
    base: &[IndexPoint],
) -> Vec<ExhaustedCase> {
    let mut out = Vec::new();
    let mut c = base.to_vec();
    loop {
        let case = |subformula: Option<String>, reason: String| ExhaustedCase {
            subformula,
            context: Context::new(c.clone()),
            reason,
        };
        match status.get(&c) {
            Some(Status::NoChild) => {
                out.push(case(None, "no child context has a stability window".into()));
                c.push(1);
            }
            Some(Status::Flip { site, top }) => {
                out.push(case(
                    Some(sites[*site].label.clone()),
                    format!("verdict still changes at stage {top}"),
                ));
                break;
            }
            Some(Status::TooHigh { h, top }) => {
                out.push(case(
                    None,
                    format!("horizon {h} exceeds the window top {top}"),
                ));
                break;
            }
            Some(Status::Closed { .. }) | None => break,
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StableEntry {
    pub subformula: String,
    pub context: Context,
    pub from: IndexPoint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessClosureReport {
    /// Horizons of the reachable contexts; other contexts use `max + 1`.
    pub horizon: HorizonFunction,
    /// For each universal subformula and reachable context, the stage from
    /// which its verdict no longer changes up to the window top.
    pub stable_from: Vec<StableEntry>,
    pub window_top: BTreeMap<Context, IndexPoint>,
    /// Children cut from their parent's window because they have none.
    pub truncated: Vec<Context>,
    pub headroom: IndexPoint,
    pub passes: usize,
}

impl WitnessClosureReport {
    pub fn relation(&self) -> LargenessRelation {
        LargenessRelation::new(self.horizon.clone())
    }

    pub(crate) fn from_closure(c: Closure, labels: &[String], headroom: IndexPoint) -> Self {
        WitnessClosureReport {
            horizon: HorizonFunction::with_table(c.horizon),
            stable_from: c
                .stable
                .into_iter()
                .map(|(site, context, from)| StableEntry {
                    subformula: labels[site].clone(),
                    context,
                    from,
                })
                .collect(),
            window_top: c.tops,
            truncated: c.truncated,
            headroom,
            passes: c.passes,
        }
    }
}

/// Pairs `(C, C')` of table entries where `C'` extends `C` by indices at or
/// above `h(C)` but has a smaller horizon.
pub fn horizon_monotonicity_violations(h: &HorizonFunction) -> Vec<(Context, Context)> {
    let table = h.table();
    let mut out = Vec::new();
    for (c2, &h2) in table {
        for k in 0..c2.len() {
            let c = c2.prefix(k);
            if let Some(&h1) = table.get(&c) {
                if c2.indices()[k..].iter().all(|&i| i >= h1) && h2 < h1 {
                    out.push((c, c2.clone()));
                }
            }
        }
    }
    out
}

struct Reflection<'a> {
    s: &'a StagedStructure,
    sites: Vec<Site>,
    bodies: Vec<Formula>,
    bases: &'a [Valuation],
    headroom: IndexPoint,
}

impl WindowProblem for Reflection<'_> {
    type Env = Vec<Element>;

    fn sites(&self) -> &[Site] {
        &self.sites
    }

    fn envs(&self, ctx: &[IndexPoint]) -> Result<Vec<Vec<Element>>, SemanticsError> {
        let mut out = Vec::new();
        for base in self.bases {
            let n0 = base.len();
            if base.context().indices() != &ctx[..n0] {
                continue;
            }
            let stages = ctx[n0..]
                .iter()
                .map(|&i| self.s.stage_elements(i))
                .collect::<Result<Vec<_>, _>>()?;
            for tail in product(&stages) {
                let mut env = base.elements().to_vec();
                env.extend(tail);
                out.push(env);
            }
        }
        Ok(out)
    }

    fn verdict(
        &self,
        site: usize,
        env: &Vec<Element>,
        ctx: &[IndexPoint],
        s: IndexPoint,
        h: &dyn Fn(&[IndexPoint]) -> IndexPoint,
    ) -> Result<bool, SemanticsError> {
        let headroom = self.headroom;
        let mut r = Reflector {
            s: self.s,
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
            trace: None,
            elems: env.clone(),
            ctx: ctx.to_vec(),
        };
        r.ctx.push(s);
        for &b in self.s.stage_elements(s)? {
            r.elems.push(b);
            let x = r.eval(&self.bodies[site])?;
            r.elems.pop();
            if !x {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Witness-closed horizon for a set of sentences up to `headroom`.
pub fn witness_close(
    s: &StagedStructure,
    formulas: &[Formula],
    headroom: IndexPoint,
) -> Result<WitnessClosureReport, SemanticsError> {
    witness_close_at(s, formulas, headroom, &[Valuation::empty()])
}

/// Witness-closed horizon for formulas whose free variables are given by
/// any of the base valuations (all of the same length).
pub fn witness_close_at(
    s: &StagedStructure,
    formulas: &[Formula],
    headroom: IndexPoint,
    bases: &[Valuation],
) -> Result<WitnessClosureReport, SemanticsError> {
    if headroom > s.headroom() {
        return Err(SemanticsError::HeadroomExceeded {
            requested: headroom,
            headroom: s.headroom(),
        });
    }
    if headroom == 0 {
        return Err(SemanticsError::InvalidValuation(
            "headroom must be at least 1".into(),
        ));
    }
    if let Some(i) = bases
        .iter()
        .flat_map(|b| b.context().indices())
        .find(|&&i| i > headroom)
    {
        return Err(SemanticsError::HeadroomExceeded {
            requested: *i,
            headroom,
        });
    }
    let n0 = bases.first().map_or(0, Valuation::len);
    let sig = s.signature();
    let mut seen = BTreeSet::new();
    let mut sites = Vec::new();
    let mut bodies = Vec::new();
    for phi in formulas {
        sig.check(phi)?;
        let phi = phi.canonicalize(n0)?.eliminate_exists();
        for (sub, _) in phi.subformulas() {
            if let Formula::ForAll(v, body) = sub {
                if seen.insert(sub.clone()) {
                    sites.push(Site {
                        depth: *v as usize,
                        label: sub.to_string(),
                    });
                    bodies.push((**body).clone());
                }
            }
        }
    }
    let labels: Vec<String> = sites.iter().map(|s| s.label.clone()).collect();
    let problem = Reflection {
        s,
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
