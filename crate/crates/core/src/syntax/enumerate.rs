//! Exhaustive enumeration of the finite fragments `L_k`, and random sampling.

use std::collections::BTreeSet;

use rand::Rng;

use super::{Formula, Signature, SyntaxError, Term, VarIndex};

/// Largest `k` accepted by [`enumerate_stratum`].
pub const STRATUM_GUARD: usize = 4;

/// All formulas of `L_k` over `sig`, in canonical form, sorted.
///
/// `L_k` holds the formulas with free variables among `y0 .. y{k-1}` and fewer
/// than `k` connectives and quantifiers. Terms are variables and constants;
/// function symbols are skipped, since nested applications do not count
/// towards `k` and would make the fragment infinite. `L_0` is `{true, false}`.
pub fn enumerate_stratum(sig: &Signature, k: usize) -> Result<Vec<Formula>, SyntaxError> {
    if k > STRATUM_GUARD {
        return Err(SyntaxError::BudgetExceeded {
            requested: k,
            guard: STRATUM_GUARD,
        });
    }
    if k == 0 {
        return Ok(vec![Formula::True, Formula::False]);
    }
    let mut gen = Generator {
        sig,
        free: k as VarIndex,
        memo: Default::default(),
    };
    let mut out = BTreeSet::new();
    for ops in 0..k {
        for f in gen.exactly(ops, 0) {
            out.insert(f.canonical());
        }
    }
    Ok(out.into_iter().collect())
}

struct Generator<'a> {
    sig: &'a Signature,
    free: VarIndex,
    memo: std::collections::HashMap<(usize, VarIndex), Vec<Formula>>,
}

impl Generator<'_> {
    /// Terms visible under `depth` quantifiers: free variables, the bound
    /// variables `y{free} .. y{free+depth-1}`, and constants.
    fn terms(&self, depth: VarIndex) -> Vec<Term> {
        (0..self.free + depth)
            .map(Term::Var)
            .chain(self.sig.constants().iter().map(|c| Term::Const(c.clone())))
            .collect()
    }

    fn atoms(&self, depth: VarIndex) -> Vec<Formula> {
        let terms = self.terms(depth);
        let mut out = vec![Formula::True, Formula::False];
        for (name, &arity) in self.sig.relations() {
            for args in tuples(&terms, arity) {
                out.push(Formula::Atom(name.clone(), args));
            }
        }
        if self.sig.has_equality() {
            for a in &terms {
                for b in &terms {
                    out.push(Formula::Equal(a.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// Formulas with exactly `ops` connectives and quantifiers.
    fn exactly(&mut self, ops: usize, depth: VarIndex) -> Vec<Formula> {
        if let Some(v) = self.memo.get(&(ops, depth)) {
            return v.clone();
        }
        let out = if ops == 0 {
            self.atoms(depth)
        } else {
            let mut out = Vec::new();
            for f in self.exactly(ops - 1, depth) {
                out.push(Formula::not(f));
            }
            for left in 0..ops {
                let right = ops - 1 - left;
                let ls = self.exactly(left, depth);
                let rs = self.exactly(right, depth);
                for a in &ls {
                    for b in &rs {
                        out.push(Formula::and(a.clone(), b.clone()));
                        out.push(Formula::or(a.clone(), b.clone()));
                        out.push(Formula::implies(a.clone(), b.clone()));
                    }
                }
            }
            let bound = self.free + depth;
            for f in self.exactly(ops - 1, depth + 1) {
                out.push(Formula::forall(bound, f.clone()));
                out.push(Formula::exists(bound, f));
            }
            out
        };
        self.memo.insert((ops, depth), out.clone());
        out
    }
}

fn tuples(terms: &[Term], arity: usize) -> Vec<Vec<Term>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                terms.iter().map(move |t| {
                    let mut p = prefix.clone();
                    p.push(t.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// A random formula with exactly `ops` connectives and quantifiers, free
/// variables among `y0 .. y{free-1}`, in canonical form relative to `free`.
///
/// Quantified variables are used by the atoms below them with high
/// probability, so vacuous quantifiers are rare.
pub fn sample_formula<R: Rng + ?Sized>(
    rng: &mut R,
    sig: &Signature,
    free: usize,
    ops: usize,
) -> Formula {
    sample(rng, sig, free as VarIndex, 0, ops)
        .canonicalize(free)
        .expect("sampled formulas only use variables in scope")
}

fn sample<R: Rng + ?Sized>(
    rng: &mut R,
    sig: &Signature,
    free: VarIndex,
    depth: VarIndex,
    ops: usize,
) -> Formula {
    if ops == 0 {
        return sample_atom(rng, sig, free, depth);
    }
    match rng.gen_range(0..6) {
        0 => Formula::not(sample(rng, sig, free, depth, ops - 1)),
        1..=3 => {
            let left = rng.gen_range(0..ops);
            let a = sample(rng, sig, free, depth, left);
            let b = sample(rng, sig, free, depth, ops - 1 - left);
            match rng.gen_range(0..3) {
                0 => Formula::and(a, b),
                1 => Formula::or(a, b),
                _ => Formula::implies(a, b),
            }
        }
        _ => {
            let body = sample(rng, sig, free, depth + 1, ops - 1);
            if rng.gen_bool(0.5) {
                Formula::forall(free + depth, body)
            } else {
                Formula::exists(free + depth, body)
            }
        }
    }
}

fn sample_term<R: Rng + ?Sized>(
    rng: &mut R,
    sig: &Signature,
    free: VarIndex,
    depth: VarIndex,
) -> Term {
    let vars = free + depth;
    let consts: Vec<_> = sig.constants().iter().collect();
    // Prefer the innermost bound variable so quantifiers are rarely vacuous.
    if depth > 0 && rng.gen_bool(0.5) {
        return Term::Var(vars - 1);
    }
    let total = vars as usize + consts.len();
    if total == 0 {
        return Term::Var(0);
    }
    let pick = rng.gen_range(0..total);
    if pick < vars as usize {
        Term::Var(pick as VarIndex)
    } else {
        Term::Const(consts[pick - vars as usize].clone())
    }
}

fn sample_atom<R: Rng + ?Sized>(
    rng: &mut R,
    sig: &Signature,
    free: VarIndex,
    depth: VarIndex,
) -> Formula {
    let rels: Vec<_> = sig.relations().iter().collect();
    let no_terms = free + depth == 0 && sig.constants().is_empty();
    if no_terms || (rels.is_empty() && !sig.has_equality()) || rng.gen_ratio(1, 12) {
        return if rng.gen_bool(0.5) {
            Formula::True
        } else {
            Formula::False
        };
    }
    let choices = rels.len() + usize::from(sig.has_equality());
    let pick = rng.gen_range(0..choices);
    if pick < rels.len() {
        let (name, &arity) = rels[pick];
        let args = (0..arity)
            .map(|_| sample_term(rng, sig, free, depth))
            .collect();
        Formula::Atom(name.clone(), args)
    } else {
        Formula::Equal(
            sample_term(rng, sig, free, depth),
            sample_term(rng, sig, free, depth),
        )
    }
}
