//! Abstract syntax for first-order formulas over free variables `y0, y1, ...`,
//! the stratification of the language into finite fragments `L_k`, a parser
//! and a canonical printer.

mod enumerate;
mod parser;
mod printer;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use enumerate::{enumerate_stratum, sample_formula, STRATUM_GUARD};
pub use parser::{parse, parse_inferring};

pub type VarIndex = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("parse error at {position}: expected {expected}")]
    Parse { position: usize, expected: String },
    #[error("signature error: {0}")]
    Signature(String),
    #[error("stratum {requested} exceeds the enumeration guard {guard}")]
    BudgetExceeded { requested: usize, guard: usize },
    #[error("free variable y{var} not covered by a valuation of length {available}")]
    UnboundVariable { var: VarIndex, available: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    relations: BTreeMap<String, usize>,
    functions: BTreeMap<String, usize>,
    constants: BTreeSet<String>,
    equality: bool,
}

impl Signature {
    pub fn new(equality: bool) -> Self {
        Signature {
            equality,
            ..Default::default()
        }
    }

    fn ensure_fresh(&self, name: &str) -> Result<(), SyntaxError> {
        if self.relations.contains_key(name)
            || self.functions.contains_key(name)
            || self.constants.contains(name)
        {
            return Err(SyntaxError::Signature(format!(
                "symbol `{name}` declared twice"
            )));
        }
        if is_variable_name(name) || KEYWORDS.contains(&name) {
            return Err(SyntaxError::Signature(format!("`{name}` is reserved")));
        }
        Ok(())
    }

    pub fn add_relation(&mut self, name: &str, arity: usize) -> Result<(), SyntaxError> {
        self.ensure_fresh(name)?;
        if arity == 0 {
            return Err(SyntaxError::Signature(format!(
                "relation `{name}` needs arity >= 1"
            )));
        }
        self.relations.insert(name.to_string(), arity);
        Ok(())
    }

    pub fn add_function(&mut self, name: &str, arity: usize) -> Result<(), SyntaxError> {
        self.ensure_fresh(name)?;
        if arity == 0 {
            return Err(SyntaxError::Signature(format!(
                "function `{name}` needs arity >= 1"
            )));
        }
        self.functions.insert(name.to_string(), arity);
        Ok(())
    }

    pub fn add_constant(&mut self, name: &str) -> Result<(), SyntaxError> {
        self.ensure_fresh(name)?;
        self.constants.insert(name.to_string());
        Ok(())
    }

    pub fn with_relation(mut self, name: &str, arity: usize) -> Result<Self, SyntaxError> {
        self.add_relation(name, arity)?;
        Ok(self)
    }

    pub fn with_function(mut self, name: &str, arity: usize) -> Result<Self, SyntaxError> {
        self.add_function(name, arity)?;
        Ok(self)
    }

    pub fn with_constant(mut self, name: &str) -> Result<Self, SyntaxError> {
        self.add_constant(name)?;
        Ok(self)
    }

    pub fn relations(&self) -> &BTreeMap<String, usize> {
        &self.relations
    }

    pub fn functions(&self) -> &BTreeMap<String, usize> {
        &self.functions
    }

    pub fn constants(&self) -> &BTreeSet<String> {
        &self.constants
    }

    pub fn has_equality(&self) -> bool {
        self.equality
    }

    pub fn relation_arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).copied()
    }

    fn check_term(&self, t: &Term) -> Result<(), SyntaxError> {
        match t {
            Term::Var(_) => Ok(()),
            Term::Const(c) => {
                if self.constants.contains(c) {
                    Ok(())
                } else {
                    Err(SyntaxError::Signature(format!("unknown constant `{c}`")))
                }
            }
            Term::App(f, args) => match self.functions.get(f) {
                None => Err(SyntaxError::Signature(format!("unknown function `{f}`"))),
                Some(&n) if n != args.len() => Err(SyntaxError::Signature(format!(
                    "function `{f}` has arity {n}, applied to {} arguments",
                    args.len()
                ))),
                Some(_) => args.iter().try_for_each(|a| self.check_term(a)),
            },
        }
    }

    /// Checks symbol membership and arities.
    pub fn check(&self, phi: &Formula) -> Result<(), SyntaxError> {
        match phi {
            Formula::Atom(r, args) => {
                match self.relations.get(r) {
                    None => return Err(SyntaxError::Signature(format!("unknown relation `{r}`"))),
                    Some(&n) if n != args.len() => {
                        return Err(SyntaxError::Signature(format!(
                            "relation `{r}` has arity {n}, applied to {} arguments",
                            args.len()
                        )))
                    }
                    Some(_) => {}
                }
                args.iter().try_for_each(|a| self.check_term(a))
            }
            Formula::Equal(a, b) => {
                if !self.equality {
                    return Err(SyntaxError::Signature("signature has no equality".into()));
                }
                self.check_term(a)?;
                self.check_term(b)
            }
            Formula::True | Formula::False => Ok(()),
            Formula::Not(f) | Formula::ForAll(_, f) | Formula::Exists(_, f) => self.check(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                self.check(a)?;
                self.check(b)
            }
        }
    }
}

pub(crate) const KEYWORDS: [&str; 4] = ["forall", "exists", "true", "false"];

pub(crate) fn is_variable_name(s: &str) -> bool {
    s.len() > 1 && s.starts_with('y') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(VarIndex),
    Const(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(i: VarIndex) -> Term {
        Term::Var(i)
    }

    fn rename(&self, map: &dyn Fn(VarIndex) -> VarIndex) -> Term {
        match self {
            Term::Var(v) => Term::Var(map(*v)),
            Term::Const(c) => Term::Const(c.clone()),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| a.rename(map)).collect())
            }
        }
    }

    fn collect_vars(&self, out: &mut Vec<VarIndex>) {
        match self {
            Term::Var(v) => out.push(*v),
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Atom(String, Vec<Term>),
    Equal(Term, Term),
    True,
    False,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    ForAll(VarIndex, Box<Formula>),
    Exists(VarIndex, Box<Formula>),
}

impl Formula {
    pub fn atom(rel: &str, args: Vec<Term>) -> Formula {
        Formula::Atom(rel.to_string(), args)
    }

    pub fn atom_vars(rel: &str, vars: &[VarIndex]) -> Formula {
        Formula::Atom(
            rel.to_string(),
            vars.iter().map(|&v| Term::Var(v)).collect(),
        )
    }

    pub fn equal(a: Term, b: Term) -> Formula {
        Formula::Equal(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(v: VarIndex, f: Formula) -> Formula {
        Formula::ForAll(v, Box::new(f))
    }

    pub fn exists(v: VarIndex, f: Formula) -> Formula {
        Formula::Exists(v, Box::new(f))
    }

    pub fn is_quantifier_free(&self) -> bool {
        self.quantifier_depth() == 0
    }

    /// Number of connectives and quantifiers.
    pub fn operator_count(&self) -> usize {
        match self {
            Formula::Atom(..) | Formula::Equal(..) | Formula::True | Formula::False => 0,
            Formula::Not(f) | Formula::ForAll(_, f) | Formula::Exists(_, f) => {
                1 + f.operator_count()
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                1 + a.operator_count() + b.operator_count()
            }
        }
    }

    /// Maximal nesting of quantifiers.
    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::Atom(..) | Formula::Equal(..) | Formula::True | Formula::False => 0,
            Formula::Not(f) => f.quantifier_depth(),
            Formula::ForAll(_, f) | Formula::Exists(_, f) => 1 + f.quantifier_depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.quantifier_depth().max(b.quantifier_depth())
            }
        }
    }

    /// Free variables in ascending order, without duplicates.
    pub fn free_variables(&self) -> Vec<VarIndex> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out.into_iter().collect()
    }

    fn collect_free(&self, bound: &mut Vec<VarIndex>, out: &mut BTreeSet<VarIndex>) {
        match self {
            Formula::Atom(_, args) => {
                let mut vs = Vec::new();
                args.iter().for_each(|t| t.collect_vars(&mut vs));
                out.extend(vs.into_iter().filter(|v| !bound.contains(v)));
            }
            Formula::Equal(a, b) => {
                let mut vs = Vec::new();
                a.collect_vars(&mut vs);
                b.collect_vars(&mut vs);
                out.extend(vs.into_iter().filter(|v| !bound.contains(v)));
            }
            Formula::True | Formula::False => {}
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::ForAll(v, f) | Formula::Exists(v, f) => {
                bound.push(*v);
                f.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Least `n` such that all free variables are among `y0 .. y{n-1}`.
    pub fn free_bound(&self) -> usize {
        self.free_variables().last().map_or(0, |&v| v as usize + 1)
    }

    /// Least `k` with the formula in `L_k`: `max(n, c + 1)` with `n` the free
    /// variable bound and `c` the number of connectives and quantifiers.
    pub fn stratum(&self) -> usize {
        self.free_bound().max(self.operator_count() + 1)
    }

    /// All subformulas in pre-order, each with its free-variable bound.
    pub fn subformulas(&self) -> Vec<(&Formula, usize)> {
        let mut out = Vec::new();
        self.push_subformulas(&mut out);
        out
    }

    fn push_subformulas<'a>(&'a self, out: &mut Vec<(&'a Formula, usize)>) {
        out.push((self, self.free_bound()));
        match self {
            Formula::Not(f) | Formula::ForAll(_, f) | Formula::Exists(_, f) => {
                f.push_subformulas(out)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.push_subformulas(out);
                b.push_subformulas(out);
            }
            _ => {}
        }
    }

    /// Renames bound variables so that a quantifier under `d` enclosing
    /// quantifiers binds `y{free + d}`.
    ///
    /// Fails if a free variable is not below `free`.
    pub fn canonicalize(&self, free: usize) -> Result<Formula, SyntaxError> {
        if let Some(&v) = self.free_variables().iter().find(|&&v| v as usize >= free) {
            return Err(SyntaxError::UnboundVariable {
                var: v,
                available: free,
            });
        }
        let mut env: Vec<(VarIndex, VarIndex)> = Vec::new();
        Ok(self.rename_bound(free as VarIndex, &mut env))
    }

    /// Canonical form relative to the formula's own free-variable bound.
    pub fn canonical(&self) -> Formula {
        self.canonicalize(self.free_bound())
            .expect("free bound covers all free variables")
    }

    fn rename_bound(&self, next: VarIndex, env: &mut Vec<(VarIndex, VarIndex)>) -> Formula {
        let lookup = |v: VarIndex| -> VarIndex {
            env.iter()
                .rev()
                .find(|(from, _)| *from == v)
                .map_or(v, |&(_, to)| to)
        };
        match self {
            Formula::Atom(r, args) => {
                Formula::Atom(r.clone(), args.iter().map(|t| t.rename(&lookup)).collect())
            }
            Formula::Equal(a, b) => Formula::Equal(a.rename(&lookup), b.rename(&lookup)),
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Not(f) => Formula::not(f.rename_bound(next, env)),
            Formula::And(a, b) => {
                Formula::and(a.rename_bound(next, env), b.rename_bound(next, env))
            }
            Formula::Or(a, b) => Formula::or(a.rename_bound(next, env), b.rename_bound(next, env)),
            Formula::Implies(a, b) => {
                Formula::implies(a.rename_bound(next, env), b.rename_bound(next, env))
            }
            Formula::ForAll(v, f) | Formula::Exists(v, f) => {
                env.push((*v, next));
                let body = f.rename_bound(next + 1, env);
                env.pop();
                if matches!(self, Formula::ForAll(..)) {
                    Formula::forall(next, body)
                } else {
                    Formula::exists(next, body)
                }
            }
        }
    }

    /// Rewrites every `exists y. f` to `~forall y. ~f`.
    pub fn eliminate_exists(&self) -> Formula {
        match self {
            Formula::Atom(..) | Formula::Equal(..) | Formula::True | Formula::False => self.clone(),
            Formula::Not(f) => Formula::not(f.eliminate_exists()),
            Formula::And(a, b) => Formula::and(a.eliminate_exists(), b.eliminate_exists()),
            Formula::Or(a, b) => Formula::or(a.eliminate_exists(), b.eliminate_exists()),
            Formula::Implies(a, b) => Formula::implies(a.eliminate_exists(), b.eliminate_exists()),
            Formula::ForAll(v, f) => Formula::forall(*v, f.eliminate_exists()),
            Formula::Exists(v, f) => {
                Formula::not(Formula::forall(*v, Formula::not(f.eliminate_exists())))
            }
        }
    }

    /// Relation symbols used, with the arity of their first occurrence.
    pub fn relation_symbols(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for (f, _) in self.subformulas() {
            if let Formula::Atom(r, args) = f {
                out.entry(r.clone()).or_insert(args.len());
            }
        }
        out
    }
}

/// The canonical textual form; `parse(to_canonical(phi))` gives back `phi`.
pub fn to_canonical(phi: &Formula) -> String {
    phi.to_string()
}

pub fn stratum(phi: &Formula) -> usize {
    phi.stratum()
}

pub fn subformulas(phi: &Formula) -> Vec<(&Formula, usize)> {
    phi.subformulas()
}
