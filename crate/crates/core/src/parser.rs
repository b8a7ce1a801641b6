//! Parser for the formula grammar and the sectioned problem file format.
//!
//! Grammar sketch (UTF-8 text, `#` comments to end of line):
//!
//! ```text
//! formula  := iff
//! iff      := implies ("<->" implies)*
//! implies  := or ("->" implies)?
//! or       := and ("|" and)*
//! and      := until ("&" until)*
//! until    := unary (("until" | "unless") until)?
//! unary    := "~" unary | "next" unary | "always" unary | "sometime" unary
//!           | ("forall" | "exists") var "." formula        # scope extends right
//!           | "true" | "false" | ident ("(" term,* ")")? | "(" formula ")"
//! ```
//!
//! An identifier in term position is a variable if bound by an enclosing
//! quantifier (or the clause variable of a step entry), otherwise a constant.
//!
//! Problem files consist of sections `initial { f; ... }`, `universal { f; ... }`,
//! `step { lit => next lit; ... }` and `eventuality { sometime lit; ... }`.

use std::collections::BTreeSet;

use crate::error::CoreError;
use crate::problem::{EventualityClause, Lit, Semantics, StepClause, TemporalProblem};
use crate::syntax::{Formula, Name, Term};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Tilde,
    Amp,
    Pipe,
    Arrow,    // ->
    DArrow,   // <->
    FatArrow, // =>
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, CoreError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    macro_rules! push {
        ($t:expr, $l:expr, $c:expr) => {
            out.push(Spanned {
                tok: $t,
                line: $l,
                col: $c,
            })
        };
    }
    while let Some(&c) = chars.peek() {
        let (l0, c0) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        col = 1;
                        break;
                    }
                }
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, l0, c0);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, l0, c0);
            }
            '{' => {
                chars.next();
                col += 1;
                push!(Tok::LBrace, l0, c0);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(Tok::RBrace, l0, c0);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, l0, c0);
            }
            ';' => {
                chars.next();
                col += 1;
                push!(Tok::Semi, l0, c0);
            }
            '.' => {
                chars.next();
                col += 1;
                push!(Tok::Dot, l0, c0);
            }
            '~' => {
                chars.next();
                col += 1;
                push!(Tok::Tilde, l0, c0);
            }
            '&' => {
                chars.next();
                col += 1;
                push!(Tok::Amp, l0, c0);
            }
            '|' => {
                chars.next();
                col += 1;
                push!(Tok::Pipe, l0, c0);
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow, l0, c0);
                } else {
                    return Err(CoreError::Parse {
                        line: l0,
                        col: c0,
                        msg: "expected '->'".into(),
                    });
                }
            }
            '<' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'-') {
                    chars.next();
                    col += 1;
                    if chars.peek() == Some(&'>') {
                        chars.next();
                        col += 1;
                        push!(Tok::DArrow, l0, c0);
                    } else {
                        return Err(CoreError::Parse {
                            line: l0,
                            col: c0,
                            msg: "expected '<->'".into(),
                        });
                    }
                } else {
                    return Err(CoreError::Parse {
                        line: l0,
                        col: c0,
                        msg: "expected '<->'".into(),
                    });
                }
            }
            '=' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::FatArrow, l0, c0);
                } else {
                    return Err(CoreError::Parse {
                        line: l0,
                        col: c0,
                        msg: "equality is not part of the language".into(),
                    });
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' || c == '\'' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(s), l0, c0);
            }
            other => {
                return Err(CoreError::Parse {
                    line: l0,
                    col: c0,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    bound: Vec<Name>,
}

impl Parser {
    fn new(text: &str) -> Result<Self, CoreError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            bound: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> CoreError {
        let (line, col) = self.here();
        CoreError::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), CoreError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, CoreError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn is_keyword(s: &str) -> bool {
        matches!(
            s,
            "forall"
                | "exists"
                | "next"
                | "always"
                | "sometime"
                | "until"
                | "unless"
                | "true"
                | "false"
                | "initial"
                | "universal"
                | "step"
                | "eventuality"
        )
    }

    fn formula(&mut self) -> Result<Formula, CoreError> {
        let mut lhs = self.implies()?;
        while *self.peek() == Tok::DArrow {
            self.bump();
            let rhs = self.implies()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, CoreError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula, CoreError> {
        let mut parts = vec![self.and()?];
        while *self.peek() == Tok::Pipe {
            self.bump();
            parts.push(self.and()?);
        }
        if parts.len() == 1 {
            Ok(parts.pop().unwrap())
        } else {
            Ok(Formula::or(parts))
        }
    }

    fn and(&mut self) -> Result<Formula, CoreError> {
        let mut parts = vec![self.until()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            parts.push(self.until()?);
        }
        if parts.len() == 1 {
            Ok(parts.pop().unwrap())
        } else {
            Ok(Formula::and(parts))
        }
    }

    fn until(&mut self) -> Result<Formula, CoreError> {
        let lhs = self.unary()?;
        match self.peek() {
            Tok::Ident(s) if s == "until" => {
                self.bump();
                let rhs = self.until()?;
                Ok(Formula::until(lhs, rhs))
            }
            Tok::Ident(s) if s == "unless" => {
                self.bump();
                let rhs = self.until()?;
                Ok(Formula::weak_until(lhs, rhs))
            }
            _ => Ok(lhs),
        }
    }

    fn unary(&mut self) -> Result<Formula, CoreError> {
        match self.peek().clone() {
            Tok::Tilde => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(f)
            }
            Tok::Ident(s) => match s.as_str() {
                "next" => {
                    self.bump();
                    Ok(Formula::next(self.unary()?))
                }
                "always" => {
                    self.bump();
                    Ok(Formula::always(self.unary()?))
                }
                "sometime" => {
                    self.bump();
                    Ok(Formula::sometime(self.unary()?))
                }
                "forall" | "exists" => {
                    self.bump();
                    let v = self.ident("variable name")?;
                    if Self::is_keyword(&v) {
                        return Err(self.err(format!("{v} cannot be used as a variable")));
                    }
                    self.expect(Tok::Dot, "'.' after quantified variable")?;
                    let name = Name::new(&v);
                    self.bound.push(name.clone());
                    let body = self.formula();
                    self.bound.pop();
                    let body = body?;
                    Ok(if s == "forall" {
                        Formula::Forall(name, Box::new(body))
                    } else {
                        Formula::Exists(name, Box::new(body))
                    })
                }
                "true" => {
                    self.bump();
                    Ok(Formula::True)
                }
                "false" => {
                    self.bump();
                    Ok(Formula::False)
                }
                "until" | "unless" => Err(self.err(format!("unexpected operator {s}"))),
                _ => self.atom(),
            },
            _ => Err(self.err("expected a formula")),
        }
    }

    fn atom(&mut self) -> Result<Formula, CoreError> {
        let name = self.ident("atom")?;
        if Self::is_keyword(&name) {
            return Err(self.err(format!("unexpected keyword {name}")));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let mut terms = Vec::new();
            loop {
                let t = self.ident("term")?;
                if Self::is_keyword(&t) {
                    return Err(self.err(format!("unexpected keyword {t} in term position")));
                }
                let tn = Name::new(&t);
                terms.push(if self.bound.contains(&tn) {
                    Term::Var(tn)
                } else {
                    Term::Const(tn)
                });
                match self.bump() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
            Ok(Formula::Atom(Name::new(&name), terms))
        } else {
            Ok(Formula::prop(&name))
        }
    }

    // literal of a step or eventuality entry: `~`? name | `~`? name `(` var `)`
    fn clause_lit(&mut self) -> Result<(Lit, Option<Name>), CoreError> {
        let positive = if *self.peek() == Tok::Tilde {
            self.bump();
            false
        } else {
            true
        };
        let name = self.ident("predicate or proposition")?;
        if Self::is_keyword(&name) {
            return Err(self.err(format!("unexpected keyword {name}")));
        }
        let mut var = None;
        if *self.peek() == Tok::LParen {
            self.bump();
            let v = self.ident("variable")?;
            var = Some(Name::new(&v));
            self.expect(Tok::RParen, "')'")?;
        }
        Ok((
            Lit {
                positive,
                name: Name::new(&name),
            },
            var,
        ))
    }
}

/// Parses a single formula.
pub fn parse_formula(text: &str) -> Result<Formula, CoreError> {
    let mut p = Parser::new(text)?;
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err("trailing input after formula"));
    }
    f.signature()?; // arity-consistency check
    Ok(f)
}

/// Parses a problem file into a temporal problem with the given semantics.
pub fn parse_problem(text: &str, semantics: Semantics) -> Result<TemporalProblem, CoreError> {
    let mut p = Parser::new(text)?;
    let mut problem = TemporalProblem::new(semantics);
    let mut seen = BTreeSet::new();
    loop {
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(s) => {
                let section = s.clone();
                p.bump();
                p.expect(Tok::LBrace, "'{'")?;
                match section.as_str() {
                    "initial" | "universal" => {
                        while *p.peek() != Tok::RBrace {
                            let f = p.formula()?;
                            p.expect(Tok::Semi, "';'")?;
                            if section == "initial" {
                                problem.initial.insert(f);
                            } else {
                                problem.universal.insert(f);
                            }
                        }
                    }
                    "step" => {
                        while *p.peek() != Tok::RBrace {
                            let (lhs, lv) = p.clause_lit()?;
                            p.expect(Tok::FatArrow, "'=>'")?;
                            match p.peek() {
                                Tok::Ident(s) if s == "next" => {
                                    p.bump();
                                }
                                _ => return Err(p.err("expected 'next'")),
                            }
                            let (rhs, rv) = p.clause_lit()?;
                            p.expect(Tok::Semi, "';'")?;
                            let clause = match (&lv, &rv) {
                                (None, None) => StepClause::Ground { lhs, rhs },
                                (Some(a), Some(b)) if a == b => {
                                    StepClause::NonGround { lhs, rhs }
                                }
                                _ => {
                                    return Err(p.err(
                                        "step clause sides must share one variable or both be propositional",
                                    ))
                                }
                            };
                            problem.step.insert(clause);
                        }
                    }
                    "eventuality" => {
                        while *p.peek() != Tok::RBrace {
                            match p.peek() {
                                Tok::Ident(s) if s == "sometime" => {
                                    p.bump();
                                }
                                _ => return Err(p.err("expected 'sometime'")),
                            }
                            let (lit, v) = p.clause_lit()?;
                            p.expect(Tok::Semi, "';'")?;
                            problem.eventuality.insert(if v.is_some() {
                                EventualityClause::NonGround(lit)
                            } else {
                                EventualityClause::Ground(lit)
                            });
                        }
                    }
                    other => {
                        return Err(p.err(format!(
                            "unknown section {other}; expected initial, universal, step or eventuality"
                        )))
                    }
                }
                p.expect(Tok::RBrace, "'}'")?;
                seen.insert(section);
            }
            _ => return Err(p.err("expected a section name")),
        }
    }
    // assemble the signature from all parts
    for f in problem.universal.iter().chain(problem.initial.iter()) {
        let sig = f.signature()?;
        problem.signature.absorb(&sig)?;
    }
    let clauses: Vec<(Lit, usize)> = problem
        .step
        .iter()
        .flat_map(|sc| {
            let a = if sc.is_ground() { 0 } else { 1 };
            vec![(sc.lhs().clone(), a), (sc.rhs().clone(), a)]
        })
        .chain(problem.eventuality.iter().map(|ev| {
            let a = if ev.is_ground() { 0 } else { 1 };
            (ev.lit().clone(), a)
        }))
        .collect();
    for (lit, arity) in clauses {
        problem.signature.declare_predicate(lit.name, arity)?;
    }
    problem.validate()?;
    Ok(problem)
}

/// A parsed input file: either a raw formula or a problem in normal form.
#[derive(Clone, Debug)]
pub enum Input {
    Formula(Formula),
    Problem(TemporalProblem),
}

/// Parses either format, deciding by the leading token.
pub fn parse_input(text: &str, semantics: Semantics) -> Result<Input, CoreError> {
    let p = Parser::new(text)?;
    let looks_like_problem = matches!(
        p.toks.first().map(|s| &s.tok),
        Some(Tok::Ident(s)) if matches!(s.as_str(), "initial" | "universal" | "step" | "eventuality")
    ) && p.toks.get(1).map(|s| &s.tok) == Some(&Tok::LBrace);
    if looks_like_problem {
        Ok(Input::Problem(parse_problem(text, semantics)?))
    } else {
        Ok(Input::Formula(parse_formula(text)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_step_clause_formula() {
        let f = parse_formula("always forall x. (P(x) -> next P(x))").unwrap();
        let expected = Formula::always(Formula::forall(
            "x",
            Formula::implies(
                Formula::atom("P", vec![Term::var("x")]),
                Formula::next(Formula::atom("P", vec![Term::var("x")])),
            ),
        ));
        assert_eq!(f, expected);
    }

    #[test]
    fn parses_true_literal() {
        assert_eq!(parse_formula("true").unwrap(), Formula::True);
    }

    #[test]
    fn parses_nested_quantifier_prefix() {
        // temporal nesting depth 2: always under exists, sometime under always
        let f =
            parse_formula("exists x. always sometime forall y. forall z. exists u. Phi(x,y,z,u)")
                .unwrap();
        fn depth(f: &Formula) -> usize {
            let d = f.children().iter().map(|c| depth(c)).max().unwrap_or(0);
            if f.is_temporal_node() {
                d + 1
            } else {
                d
            }
        }
        assert_eq!(depth(&f), 2);
        match &f {
            Formula::Exists(_, body) => assert!(matches!(**body, Formula::Always(_))),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn quantifier_scope_extends_right() {
        let f = parse_formula("forall x. P(x) -> Q(x)").unwrap();
        match f {
            Formula::Forall(_, body) => assert!(matches!(*body, Formula::Implies(..))),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unbound_identifiers_are_constants() {
        let f = parse_formula("P(x, c)").unwrap();
        assert_eq!(
            f,
            Formula::Atom(
                Name::new("P"),
                vec![Term::constant("x"), Term::constant("c")]
            )
        );
    }

    #[test]
    fn reports_position_on_error() {
        let err = parse_formula("P(x) &\n& Q(x)").unwrap_err();
        match err {
            CoreError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn arity_mismatch_rejected() {
        assert!(parse_formula("P(a) & P(a, b)").is_err());
    }

    #[test]
    fn parses_problem_file() {
        let text = "
            # a small problem
            initial { Q(c); }
            universal { exists x. (P1(x) & P2(x)); }
            step {
                P1(x) => next ~P1(x);
                q => next q;
            }
            eventuality { sometime ~L(x); sometime q; }
        ";
        let p = parse_problem(text, Semantics::Constant).unwrap();
        assert_eq!(p.initial.len(), 1);
        assert_eq!(p.universal.len(), 1);
        assert_eq!(p.step.len(), 2);
        assert_eq!(p.eventuality.len(), 2);
        assert!(p.signature.constants.contains(&Name::new("c")));
        assert_eq!(p.signature.arity(&Name::new("q")), Some(0));
        assert_eq!(p.signature.arity(&Name::new("L")), Some(1));
    }

    #[test]
    fn problem_roundtrips_through_display() {
        let text = "
            initial { Q(c); }
            universal { forall x. (Q(x) -> L(x)); }
            step { Q(x) => next Q(x); }
            eventuality { sometime ~L(x); }
        ";
        let p = parse_problem(text, Semantics::Constant).unwrap();
        let printed = p.to_string();
        let q = parse_problem(&printed, Semantics::Constant).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn until_binds_tighter_than_and() {
        let f = parse_formula("p until q & r").unwrap();
        assert_eq!(
            f,
            Formula::and(vec![
                Formula::until(Formula::prop("p"), Formula::prop("q")),
                Formula::prop("r"),
            ])
        );
    }
}
