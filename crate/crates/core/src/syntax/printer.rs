use std::fmt;

use super::{Formula, Term};

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "y{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                write_args(f, args)?;
                write!(f, ")")
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    for (k, a) in args.iter().enumerate() {
        if k > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

// Binding strength; higher binds tighter.
const IMPLIES: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const NOT: u8 = 4;
const ATOM: u8 = 5;

fn level(phi: &Formula) -> u8 {
    match phi {
        Formula::Implies(..) => IMPLIES,
        Formula::Or(..) => OR,
        Formula::And(..) => AND,
        Formula::Not(..) => NOT,
        _ => ATOM,
    }
}

/// `min` is the weakest operator allowed without parentheses (binary
/// connectives under a quantifier are always parenthesized); `rightmost`
/// says whether nothing follows, so a quantifier may extend to the end.
fn write_formula(
    f: &mut fmt::Formatter<'_>,
    phi: &Formula,
    min: u8,
    rightmost: bool,
) -> fmt::Result {
    let quantifier = matches!(phi, Formula::ForAll(..) | Formula::Exists(..));
    let paren = if quantifier {
        !rightmost
    } else {
        level(phi) < min
    };
    if paren {
        write!(f, "(")?;
    }
    let rightmost = rightmost || paren;
    match phi {
        Formula::Atom(r, args) => {
            write!(f, "{r}(")?;
            write_args(f, args)?;
            write!(f, ")")?;
        }
        Formula::Equal(a, b) => write!(f, "{a} = {b}")?,
        Formula::True => write!(f, "true")?,
        Formula::False => write!(f, "false")?,
        Formula::Not(inner) => {
            write!(f, "~")?;
            if matches!(**inner, Formula::Equal(..)) {
                write!(f, "({inner})")?;
            } else {
                write_formula(f, inner, NOT, rightmost)?;
            }
        }
        // `&` and `|` associate to the left, `->` to the right.
        Formula::And(a, b) => {
            write_formula(f, a, AND, false)?;
            write!(f, " & ")?;
            write_formula(f, b, AND + 1, rightmost)?;
        }
        Formula::Or(a, b) => {
            write_formula(f, a, OR, false)?;
            write!(f, " | ")?;
            write_formula(f, b, OR + 1, rightmost)?;
        }
        Formula::Implies(a, b) => {
            write_formula(f, a, IMPLIES + 1, false)?;
            write!(f, " -> ")?;
            write_formula(f, b, IMPLIES, rightmost)?;
        }
        Formula::ForAll(v, body) => {
            write!(f, "forall y{v}. ")?;
            write_formula(f, body, NOT, true)?;
        }
        Formula::Exists(v, body) => {
            write!(f, "exists y{v}. ")?;
            write_formula(f, body, NOT, true)?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0, true)
    }
}
