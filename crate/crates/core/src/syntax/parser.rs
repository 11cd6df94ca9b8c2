//! Recursive descent parser.
//!
//! ```text
//! formula  := "forall" var "." formula | "exists" var "." formula | impl
//! impl     := disj [ "->" impl ]
//! disj     := conj { "|" conj }
//! conj     := neg  { "&" neg }
//! neg      := "~" neg | quant | atom
//! atom     := IDENT "(" term { "," term } ")" | term "=" term
//!           | "true" | "false" | "(" formula ")"
//! term     := var | IDENT | IDENT "(" term { "," term } ")"
//! var      := "y" DIGITS
//! ```
//!
//! Quantifiers are also accepted in operand position (`P(c) & forall y0. Q(y0)`);
//! their scope still extends as far right as possible.

use std::collections::btree_map::Entry;

use super::{is_variable_name, Formula, Signature, SyntaxError, Term, VarIndex};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Tilde,
    Amp,
    Bar,
    Arrow,
    Eq,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eq => "`=`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let c = bytes[pos];
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'.' => Tok::Dot,
            b'~' => Tok::Tilde,
            b'&' => Tok::Amp,
            b'|' => Tok::Bar,
            b'=' => Tok::Eq,
            b'-' if bytes.get(pos + 1) == Some(&b'>') => {
                pos += 1;
                Tok::Arrow
            }
            c if c.is_ascii_alphanumeric() || c == b'_' => {
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
                {
                    pos += 1;
                }
                out.push((start, Tok::Ident(text[start..pos].to_string())));
                continue;
            }
            _ => {
                return Err(SyntaxError::Parse {
                    position: pos,
                    expected: format!(
                        "a token, found `{}`",
                        text[pos..].chars().next().unwrap_or(' ')
                    ),
                })
            }
        };
        pos += 1;
        out.push((start, tok));
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, SyntaxError> {
        Err(SyntaxError::Parse {
            position: self.pos(),
            expected: format!("{expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(&tok.describe())
        }
    }

    fn formula(&mut self) -> Result<Formula, SyntaxError> {
        if let Some(q) = self.quantifier()? {
            return Ok(q);
        }
        self.implication()
    }

    fn quantifier(&mut self) -> Result<Option<Formula>, SyntaxError> {
        let universal = match self.peek() {
            Tok::Ident(s) if s == "forall" => true,
            Tok::Ident(s) if s == "exists" => false,
            _ => return Ok(None),
        };
        self.bump();
        let v = self.variable()?;
        self.expect(Tok::Dot)?;
        let body = self.formula()?;
        Ok(Some(if universal {
            Formula::forall(v, body)
        } else {
            Formula::exists(v, body)
        }))
    }

    fn variable(&mut self) -> Result<VarIndex, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if is_variable_name(&s) => match s[1..].parse() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => self.error("a variable index that fits in 32 bits"),
            },
            _ => self.error("a variable `y<digits>`"),
        }
    }

    fn implication(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.negation()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.negation()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> Result<Formula, SyntaxError> {
        if *self.peek() == Tok::Tilde {
            self.bump();
            return Ok(Formula::not(self.negation()?));
        }
        if let Some(q) = self.quantifier()? {
            return Ok(q);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, SyntaxError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(s) if s == "forall" || s == "exists" => self.error("an atom"),
            Tok::Ident(_) => {
                let start = self.pos();
                let head = self.term()?;
                if *self.peek() == Tok::Eq {
                    self.bump();
                    let rhs = self.term()?;
                    return Ok(Formula::Equal(head, rhs));
                }
                match head {
                    Term::App(r, args) => Ok(Formula::Atom(r, args)),
                    _ => Err(SyntaxError::Parse {
                        position: start,
                        expected: format!("`=` after term, found {}", self.peek().describe()),
                    }),
                }
            }
            _ => self.error("an atom, `~`, a quantifier or `(`"),
        }
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        let name = match self.peek().clone() {
            Tok::Ident(s) if super::KEYWORDS.contains(&s.as_str()) => return self.error("a term"),
            Tok::Ident(s) => s,
            _ => return self.error("a term"),
        };
        if is_variable_name(&name) {
            return self.variable().map(Term::Var);
        }
        self.bump();
        if *self.peek() != Tok::LParen {
            return Ok(Term::Const(name));
        }
        self.bump();
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(Term::App(name, args))
    }
}

fn parse_syntax(text: &str) -> Result<Formula, SyntaxError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let f = p.formula()?;
    if *p.peek() != Tok::End {
        return p.error("end of input");
    }
    Ok(f)
}

/// Parses `text` and checks it against `sig`.
pub fn parse(text: &str, sig: &Signature) -> Result<Formula, SyntaxError> {
    let f = parse_syntax(text)?;
    sig.check(&f)?;
    Ok(f)
}

/// Parses `text` and builds the smallest signature (with equality) it uses.
pub fn parse_inferring(text: &str) -> Result<(Formula, Signature), SyntaxError> {
    let f = parse_syntax(text)?;
    let mut sig = Signature::new(true);
    infer(&f, &mut sig)?;
    Ok((f, sig))
}

fn infer(f: &Formula, sig: &mut Signature) -> Result<(), SyntaxError> {
    match f {
        Formula::Atom(r, args) => {
            declare(sig, r, Kind::Relation(args.len()))?;
            args.iter().try_for_each(|t| infer_term(t, sig))
        }
        Formula::Equal(a, b) => {
            infer_term(a, sig)?;
            infer_term(b, sig)
        }
        Formula::True | Formula::False => Ok(()),
        Formula::Not(g) | Formula::ForAll(_, g) | Formula::Exists(_, g) => infer(g, sig),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            infer(a, sig)?;
            infer(b, sig)
        }
    }
}

fn infer_term(t: &Term, sig: &mut Signature) -> Result<(), SyntaxError> {
    match t {
        Term::Var(_) => Ok(()),
        Term::Const(c) => declare(sig, c, Kind::Constant),
        Term::App(g, args) => {
            declare(sig, g, Kind::Function(args.len()))?;
            args.iter().try_for_each(|a| infer_term(a, sig))
        }
    }
}

enum Kind {
    Relation(usize),
    Function(usize),
    Constant,
}

fn declare(sig: &mut Signature, name: &str, kind: Kind) -> Result<(), SyntaxError> {
    let clash = || SyntaxError::Signature(format!("symbol `{name}` used inconsistently"));
    match kind {
        Kind::Relation(n) => match sig.relations.entry(name.to_string()) {
            Entry::Occupied(e) if *e.get() != n => Err(clash()),
            Entry::Occupied(_) => Ok(()),
            Entry::Vacant(_) => sig.add_relation(name, n).map_err(|_| clash()),
        },
        Kind::Function(n) => match sig.functions.entry(name.to_string()) {
            Entry::Occupied(e) if *e.get() != n => Err(clash()),
            Entry::Occupied(_) => Ok(()),
            Entry::Vacant(_) => sig.add_function(name, n).map_err(|_| clash()),
        },
        Kind::Constant => {
            if sig.constants.contains(name) {
                Ok(())
            } else {
                sig.add_constant(name).map_err(|_| clash())
            }
        }
    }
}
