//! Abstract syntax for first-order temporal formulae over signatures
//! without equality or function symbols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::CoreError;

/// An interned symbol name (predicate, proposition, constant or variable).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: impl AsRef<str>) -> Self {
        Name(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

/// Predicate arities and constant names of a problem.
///
/// Null-ary predicates are propositions. There are no function symbols and
/// no equality, so terms are variables or constants only.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub predicates: BTreeMap<Name, usize>,
    pub constants: BTreeSet<Name>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a predicate, checking arity consistency with earlier uses.
    pub fn declare_predicate(&mut self, name: Name, arity: usize) -> Result<(), CoreError> {
        if self.constants.contains(&name) {
            return Err(CoreError::SymbolClash(name.to_string()));
        }
        match self.predicates.get(&name) {
            Some(&a) if a != arity => Err(CoreError::ArityMismatch {
                name: name.to_string(),
                expected: a,
                found: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.predicates.insert(name, arity);
                Ok(())
            }
        }
    }

    pub fn declare_constant(&mut self, name: Name) -> Result<(), CoreError> {
        if self.predicates.contains_key(&name) {
            return Err(CoreError::SymbolClash(name.to_string()));
        }
        self.constants.insert(name);
        Ok(())
    }

    pub fn arity(&self, name: &Name) -> Option<usize> {
        self.predicates.get(name).copied()
    }

    /// A name not colliding with any declared symbol, derived from `stem`.
    pub fn fresh(&self, stem: &str) -> Name {
        let base = Name::new(stem);
        if !self.predicates.contains_key(&base) && !self.constants.contains(&base) {
            return base;
        }
        for i in 1.. {
            let cand = Name::new(format!("{stem}_{i}"));
            if !self.predicates.contains_key(&cand) && !self.constants.contains(&cand) {
                return cand;
            }
        }
        unreachable!()
    }

    /// Merges another signature in, checking for arity clashes.
    pub fn absorb(&mut self, other: &Signature) -> Result<(), CoreError> {
        for (p, &a) in &other.predicates {
            self.declare_predicate(p.clone(), a)?;
        }
        for c in &other.constants {
            self.declare_constant(c.clone())?;
        }
        Ok(())
    }
}

/// A term: an individual variable or constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Name),
    Const(Name),
}

impl Term {
    pub fn var(s: impl AsRef<str>) -> Self {
        Term::Var(Name::new(s))
    }

    pub fn constant(s: impl AsRef<str>) -> Self {
        Term::Const(Name::new(s))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(n) | Term::Const(n) => write!(f, "{n}"),
        }
    }
}

/// A temporal formula.
///
/// `And`/`Or` are kept flattened, sorted and duplicate-free so that
/// structurally equal formulae compare equal; build them through [`Formula::and`]
/// and [`Formula::or`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Name, Vec<Term>),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(Name, Box<Formula>),
    Exists(Name, Box<Formula>),
    Next(Box<Formula>),
    Always(Box<Formula>),
    Sometime(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    WeakUntil(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: impl AsRef<str>, terms: Vec<Term>) -> Self {
        Formula::Atom(Name::new(pred), terms)
    }

    /// A proposition (null-ary atom).
    pub fn prop(name: impl AsRef<str>) -> Self {
        Formula::Atom(Name::new(name), vec![])
    }

    /// Conjunction; flattens, sorts, deduplicates and folds constants.
    pub fn and(children: Vec<Formula>) -> Self {
        let mut out = Vec::new();
        for c in children {
            match c {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(cs) => out.extend(cs),
                other => out.push(other),
            }
        }
        out.sort();
        out.dedup();
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction; flattens, sorts, deduplicates and folds constants.
    pub fn or(children: Vec<Formula>) -> Self {
        let mut out = Vec::new();
        for c in children {
            match c {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(cs) => out.extend(cs),
                other => out.push(other),
            }
        }
        out.sort();
        out.dedup();
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn not(f: Formula) -> Self {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(g) => *g,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Universal quantification; trivial when the body is a constant.
    pub fn forall(v: impl AsRef<str>, f: Formula) -> Self {
        match f {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            other => Formula::Forall(Name::new(v), Box::new(other)),
        }
    }

    /// Existential quantification; trivial when the body is a constant
    /// (domains are non-empty).
    pub fn exists(v: impl AsRef<str>, f: Formula) -> Self {
        match f {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            other => Formula::Exists(Name::new(v), Box::new(other)),
        }
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    pub fn sometime(f: Formula) -> Self {
        Formula::Sometime(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn weak_until(a: Formula, b: Formula) -> Self {
        Formula::WeakUntil(Box::new(a), Box::new(b))
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) => vec![],
            Formula::Not(f)
            | Formula::Forall(_, f)
            | Formula::Exists(_, f)
            | Formula::Next(f)
            | Formula::Always(f)
            | Formula::Sometime(f) => vec![f],
            Formula::And(fs) | Formula::Or(fs) => fs.iter().collect(),
            Formula::Implies(a, b)
            | Formula::Iff(a, b)
            | Formula::Until(a, b)
            | Formula::WeakUntil(a, b) => vec![a, b],
        }
    }

    pub fn is_temporal_node(&self) -> bool {
        matches!(
            self,
            Formula::Next(_)
                | Formula::Always(_)
                | Formula::Sometime(_)
                | Formula::Until(..)
                | Formula::WeakUntil(..)
        )
    }

    pub fn has_temporal(&self) -> bool {
        self.is_temporal_node() || self.children().iter().any(|c| c.has_temporal())
    }

    /// Free variables of the formula.
    pub fn free_vars(&self) -> BTreeSet<Name> {
        fn go(f: &Formula, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
            match f {
                Formula::Atom(_, ts) => {
                    for t in ts {
                        if let Term::Var(v) = t {
                            if !bound.contains(v) {
                                out.insert(v.clone());
                            }
                        }
                    }
                }
                Formula::Forall(v, g) | Formula::Exists(v, g) => {
                    bound.push(v.clone());
                    go(g, bound, out);
                    bound.pop();
                }
                _ => {
                    for c in f.children() {
                        go(c, bound, out);
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// All variable names occurring anywhere (free or bound).
    pub fn all_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        fn go(f: &Formula, out: &mut BTreeSet<Name>) {
            match f {
                Formula::Atom(_, ts) => {
                    for t in ts {
                        if let Term::Var(v) = t {
                            out.insert(v.clone());
                        }
                    }
                }
                Formula::Forall(v, g) | Formula::Exists(v, g) => {
                    out.insert(v.clone());
                    go(g, out);
                }
                _ => {
                    for c in f.children() {
                        go(c, out);
                    }
                }
            }
        }
        go(self, &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Predicate and constant symbols occurring in the formula.
    pub fn signature(&self) -> Result<Signature, CoreError> {
        let mut sig = Signature::new();
        fn go(f: &Formula, sig: &mut Signature) -> Result<(), CoreError> {
            if let Formula::Atom(p, ts) = f {
                sig.declare_predicate(p.clone(), ts.len())?;
                for t in ts {
                    if let Term::Const(c) = t {
                        sig.declare_constant(c.clone())?;
                    }
                }
            }
            for c in f.children() {
                go(c, sig)?;
            }
            Ok(())
        }
        go(self, &mut sig)?;
        Ok(sig)
    }

    /// Substitutes `term` for free occurrences of `var`, renaming bound
    /// variables when they would capture.
    pub fn substitute(&self, var: &Name, term: &Term) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(p, ts) => Formula::Atom(
                p.clone(),
                ts.iter()
                    .map(|t| match t {
                        Term::Var(v) if v == var => term.clone(),
                        other => other.clone(),
                    })
                    .collect(),
            ),
            Formula::Not(f) => Formula::not(f.substitute(var, term)),
            Formula::And(fs) => {
                Formula::and(fs.iter().map(|f| f.substitute(var, term)).collect())
            }
            Formula::Or(fs) => Formula::or(fs.iter().map(|f| f.substitute(var, term)).collect()),
            Formula::Implies(a, b) => {
                Formula::implies(a.substitute(var, term), b.substitute(var, term))
            }
            Formula::Iff(a, b) => Formula::iff(a.substitute(var, term), b.substitute(var, term)),
            Formula::Forall(v, f) | Formula::Exists(v, f) => {
                let build = |v: Name, f: Formula| match self {
                    Formula::Forall(..) => Formula::Forall(v, Box::new(f)),
                    _ => Formula::Exists(v, Box::new(f)),
                };
                if v == var {
                    return self.clone();
                }
                let captures = matches!(term, Term::Var(t) if t == v);
                if captures && f.free_vars().contains(var) {
                    // alpha-rename the binder out of the way
                    let taken: BTreeSet<Name> = f.all_vars();
                    let fresh = fresh_var(v, &taken);
                    let renamed = f.substitute(v, &Term::Var(fresh.clone()));
                    build(fresh, renamed.substitute(var, term))
                } else {
                    build(v.clone(), f.substitute(var, term))
                }
            }
            Formula::Next(f) => Formula::next(f.substitute(var, term)),
            Formula::Always(f) => Formula::always(f.substitute(var, term)),
            Formula::Sometime(f) => Formula::sometime(f.substitute(var, term)),
            Formula::Until(a, b) => {
                Formula::until(a.substitute(var, term), b.substitute(var, term))
            }
            Formula::WeakUntil(a, b) => {
                Formula::weak_until(a.substitute(var, term), b.substitute(var, term))
            }
        }
    }

    /// Number of syntax-tree nodes; the size measure for growth reports.
    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }
}

fn fresh_var(base: &Name, taken: &BTreeSet<Name>) -> Name {
    for i in 1.. {
        let cand = Name::new(format!("{base}_{i}"));
        if !taken.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// Negation normal form.
///
/// `->` and `<->` are eliminated, negations pushed onto atoms using the
/// dualities of the quantifiers and temporal operators, with
/// `~(a until b)` becoming `~b unless (~a & ~b)` and
/// `~(a unless b)` becoming `~b until (~a & ~b)`.
pub fn nnf(f: &Formula) -> Formula {
    nnf_signed(f, false)
}

fn nnf_signed(f: &Formula, negated: bool) -> Formula {
    match (f, negated) {
        (Formula::True, false) | (Formula::False, true) => Formula::True,
        (Formula::True, true) | (Formula::False, false) => Formula::False,
        (Formula::Atom(..), false) => f.clone(),
        (Formula::Atom(..), true) => Formula::Not(Box::new(f.clone())),
        (Formula::Not(g), neg) => nnf_signed(g, !neg),
        (Formula::And(fs), false) => Formula::and(fs.iter().map(|g| nnf_signed(g, false)).collect()),
        (Formula::And(fs), true) => Formula::or(fs.iter().map(|g| nnf_signed(g, true)).collect()),
        (Formula::Or(fs), false) => Formula::or(fs.iter().map(|g| nnf_signed(g, false)).collect()),
        (Formula::Or(fs), true) => Formula::and(fs.iter().map(|g| nnf_signed(g, true)).collect()),
        (Formula::Implies(a, b), false) => {
            Formula::or(vec![nnf_signed(a, true), nnf_signed(b, false)])
        }
        (Formula::Implies(a, b), true) => {
            Formula::and(vec![nnf_signed(a, false), nnf_signed(b, true)])
        }
        (Formula::Iff(a, b), neg) => {
            // expand into the conjunction of two implications, then push
            let both = Formula::and(vec![
                Formula::implies((**a).clone(), (**b).clone()),
                Formula::implies((**b).clone(), (**a).clone()),
            ]);
            nnf_signed(&both, neg)
        }
        (Formula::Forall(v, g), false) => Formula::forall(v.as_str(), nnf_signed(g, false)),
        (Formula::Forall(v, g), true) => Formula::exists(v.as_str(), nnf_signed(g, true)),
        (Formula::Exists(v, g), false) => Formula::exists(v.as_str(), nnf_signed(g, false)),
        (Formula::Exists(v, g), true) => Formula::forall(v.as_str(), nnf_signed(g, true)),
        (Formula::Next(g), neg) => Formula::next(nnf_signed(g, neg)),
        (Formula::Always(g), false) => Formula::always(nnf_signed(g, false)),
        (Formula::Always(g), true) => Formula::sometime(nnf_signed(g, true)),
        (Formula::Sometime(g), false) => Formula::sometime(nnf_signed(g, false)),
        (Formula::Sometime(g), true) => Formula::always(nnf_signed(g, true)),
        (Formula::Until(a, b), false) => {
            Formula::until(nnf_signed(a, false), nnf_signed(b, false))
        }
        (Formula::Until(a, b), true) => {
            let na = nnf_signed(a, true);
            let nb = nnf_signed(b, true);
            Formula::weak_until(nb.clone(), Formula::and(vec![na, nb]))
        }
        (Formula::WeakUntil(a, b), false) => {
            Formula::weak_until(nnf_signed(a, false), nnf_signed(b, false))
        }
        (Formula::WeakUntil(a, b), true) => {
            let na = nnf_signed(a, true);
            let nb = nnf_signed(b, true);
            Formula::until(nb.clone(), Formula::and(vec![na, nb]))
        }
    }
}

/// Syntactic classification flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FormulaClass {
    /// Every temporal-operator subformula has at most one free variable.
    pub is_monodic: bool,
    pub is_closed: bool,
    /// All predicates unary or null-ary.
    pub is_monadic: bool,
    /// Closed, and no temporal operator occurs inside a quantifier scope.
    pub is_ground: bool,
}

pub fn classify(f: &Formula) -> FormulaClass {
    let is_monodic = monodic_check(f);
    let is_closed = f.is_closed();
    let is_monadic = f
        .signature()
        .map(|sig| sig.predicates.values().all(|&a| a <= 1))
        .unwrap_or(false);
    let is_ground = is_closed && !temporal_under_quantifier(f, false);
    FormulaClass {
        is_monodic,
        is_closed,
        is_monadic,
        is_ground,
    }
}

fn monodic_check(f: &Formula) -> bool {
    if f.is_temporal_node() && f.free_vars().len() > 1 {
        return false;
    }
    f.children().iter().all(|c| monodic_check(c))
}

fn temporal_under_quantifier(f: &Formula, under: bool) -> bool {
    if under && f.is_temporal_node() {
        return true;
    }
    match f {
        Formula::Forall(_, g) | Formula::Exists(_, g) => temporal_under_quantifier(g, true),
        _ => f
            .children()
            .iter()
            .any(|c| temporal_under_quantifier(c, under)),
    }
}

// Precedence levels used by the printer; higher binds tighter.
const PREC_IFF: u8 = 0;
const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_UNTIL: u8 = 4;
const PREC_PREFIX: u8 = 5;
const PREC_ATOM: u8 = 6;

impl Formula {
    fn prec(&self) -> u8 {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) => PREC_ATOM,
            Formula::Not(_)
            | Formula::Next(_)
            | Formula::Always(_)
            | Formula::Sometime(_) => PREC_PREFIX,
            // quantifier scope extends right, so a quantified formula binds
            // loosest and gets parenthesised as an operand of anything else
            Formula::Forall(..) | Formula::Exists(..) => PREC_IFF,
            Formula::Until(..) | Formula::WeakUntil(..) => PREC_UNTIL,
            Formula::And(_) => PREC_AND,
            Formula::Or(_) => PREC_OR,
            Formula::Implies(..) => PREC_IMPLIES,
            Formula::Iff(..) => PREC_IFF,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let me = self.prec();
        let paren = me < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Formula::True => f.write_str("true")?,
            Formula::False => f.write_str("false")?,
            Formula::Atom(p, ts) => {
                write!(f, "{p}")?;
                if !ts.is_empty() {
                    f.write_str("(")?;
                    for (i, t) in ts.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{t}")?;
                    }
                    f.write_str(")")?;
                }
            }
            Formula::Not(g) => {
                f.write_str("~")?;
                g.fmt_prec(f, PREC_PREFIX + 1)?;
            }
            Formula::And(fs) => {
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    g.fmt_prec(f, PREC_AND + 1)?;
                }
            }
            Formula::Or(fs) => {
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    g.fmt_prec(f, PREC_OR + 1)?;
                }
            }
            Formula::Implies(a, b) => {
                a.fmt_prec(f, PREC_IMPLIES + 1)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, PREC_IMPLIES)?;
            }
            Formula::Iff(a, b) => {
                a.fmt_prec(f, PREC_IFF + 1)?;
                f.write_str(" <-> ")?;
                b.fmt_prec(f, PREC_IFF + 1)?;
            }
            Formula::Forall(v, g) => {
                write!(f, "forall {v}. ")?;
                g.fmt_prec(f, PREC_IFF)?;
            }
            Formula::Exists(v, g) => {
                write!(f, "exists {v}. ")?;
                g.fmt_prec(f, PREC_IFF)?;
            }
            Formula::Next(g) => {
                f.write_str("next ")?;
                g.fmt_prec(f, PREC_PREFIX)?;
            }
            Formula::Always(g) => {
                f.write_str("always ")?;
                g.fmt_prec(f, PREC_PREFIX)?;
            }
            Formula::Sometime(g) => {
                f.write_str("sometime ")?;
                g.fmt_prec(f, PREC_PREFIX)?;
            }
            Formula::Until(a, b) => {
                a.fmt_prec(f, PREC_UNTIL + 1)?;
                f.write_str(" until ")?;
                b.fmt_prec(f, PREC_UNTIL)?;
            }
            Formula::WeakUntil(a, b) => {
                a.fmt_prec(f, PREC_UNTIL + 1)?;
                f.write_str(" unless ")?;
                b.fmt_prec(f, PREC_UNTIL)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: &str) -> Formula {
        Formula::atom("P", vec![Term::var(x)])
    }

    #[test]
    fn and_flattens_and_sorts() {
        let f = Formula::and(vec![
            Formula::prop("q"),
            Formula::and(vec![p("x"), Formula::prop("q")]),
        ]);
        match &f {
            Formula::And(cs) => assert_eq!(cs.len(), 2),
            other => panic!("expected And, got {other}"),
        }
        assert_eq!(f, Formula::and(vec![p("x"), Formula::prop("q")]));
    }

    #[test]
    fn nnf_pushes_through_temporal_operators() {
        // ~ next P(x)  =>  next ~P(x)
        let f = Formula::not(Formula::next(p("x")));
        assert_eq!(nnf(&f), Formula::next(Formula::not(p("x"))));
        // ~~P(x) => P(x)
        let g = Formula::not(Formula::not(p("x")));
        assert_eq!(nnf(&g), p("x"));
        // ~ always P => sometime ~P
        let h = Formula::not(Formula::always(p("x")));
        assert_eq!(nnf(&h), Formula::sometime(Formula::not(p("x"))));
    }

    #[test]
    fn nnf_until_negation_is_standard_identity() {
        // ~(P(x) until q) => ~q unless (~P(x) & ~q)
        let f = Formula::not(Formula::until(p("x"), Formula::prop("q")));
        let nq = Formula::not(Formula::prop("q"));
        let expected = Formula::weak_until(
            nq.clone(),
            Formula::and(vec![Formula::not(p("x")), nq]),
        );
        assert_eq!(nnf(&f), expected);
    }

    #[test]
    fn nnf_idempotent_and_preserves_free_vars() {
        let f = Formula::not(Formula::until(
            Formula::forall("y", Formula::atom("R", vec![Term::var("x"), Term::var("y")])),
            Formula::exists("z", Formula::atom("Q", vec![Term::var("z")])),
        ));
        let n = nnf(&f);
        assert_eq!(nnf(&n), n);
        assert_eq!(n.free_vars(), f.free_vars());
    }

    #[test]
    fn substitution_avoids_capture() {
        // (forall y. R(x,y))[x := y]  must rename the binder
        let f = Formula::forall("y", Formula::atom("R", vec![Term::var("x"), Term::var("y")]));
        let g = f.substitute(&Name::new("x"), &Term::var("y"));
        match &g {
            Formula::Forall(v, body) => {
                assert_ne!(v.as_str(), "y");
                assert!(body.free_vars().contains(&Name::new("y")));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn classify_monodic_flags() {
        // always forall x,y: P(x,y) -> next next P(x,y) has two free vars under next
        let pxy = Formula::atom("P", vec![Term::var("x"), Term::var("y")]);
        let f = Formula::always(Formula::forall(
            "x",
            Formula::forall(
                "y",
                Formula::implies(pxy.clone(), Formula::next(Formula::next(pxy))),
            ),
        ));
        let c = classify(&f);
        assert!(!c.is_monodic);
        assert!(!c.is_monadic);

        let fo = Formula::forall("x", Formula::or(vec![p("x"), Formula::not(p("x"))]));
        let c2 = classify(&fo);
        assert!(c2.is_monodic);
        assert!(c2.is_closed);
        assert!(c2.is_monadic);
    }

    #[test]
    fn classify_tracks_nnf() {
        let f = Formula::not(Formula::always(Formula::forall(
            "x",
            Formula::implies(p("x"), Formula::next(p("x"))),
        )));
        assert_eq!(classify(&nnf(&f)).is_monodic, classify(&f).is_monodic);
    }

    #[test]
    fn display_respects_precedence() {
        let f = Formula::implies(
            Formula::and(vec![Formula::prop("a"), Formula::prop("b")]),
            Formula::or(vec![Formula::prop("c"), Formula::prop("d")]),
        );
        assert_eq!(f.to_string(), "a & b -> c | d");
        // quantifier scope extends right, so it is parenthesised as an operand
        let g = Formula::always(Formula::forall(
            "x",
            Formula::implies(p("x"), Formula::next(p("x"))),
        ));
        assert_eq!(g.to_string(), "always (forall x. P(x) -> next P(x))");
    }
}
