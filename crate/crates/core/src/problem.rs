//! Temporal problems in divided separated normal form: a universal part,
//! an initial part, step clauses and eventuality clauses.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::CoreError;
use crate::syntax::{Formula, Name, Signature, Term};

/// Domain discipline the problem is interpreted under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Semantics {
    /// One fixed domain for all moments of time.
    Constant,
    /// Non-decreasing domains over time.
    Expanding,
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Semantics::Constant => f.write_str("constant"),
            Semantics::Expanding => f.write_str("expanding"),
        }
    }
}

/// A propositional or unary literal, by predicate name and sign.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub positive: bool,
    pub name: Name,
}

impl Lit {
    pub fn pos(name: impl Into<Name>) -> Self {
        Lit {
            positive: true,
            name: name.into(),
        }
    }

    pub fn neg(name: impl Into<Name>) -> Self {
        Lit {
            positive: false,
            name: name.into(),
        }
    }

    pub fn negated(&self) -> Self {
        Lit {
            positive: !self.positive,
            name: self.name.clone(),
        }
    }

    /// The unary literal applied to a term.
    pub fn applied(&self, t: &Term) -> Formula {
        let atom = Formula::Atom(self.name.clone(), vec![t.clone()]);
        if self.positive {
            atom
        } else {
            Formula::not(atom)
        }
    }

    /// The literal as a propositional formula.
    pub fn as_prop(&self) -> Formula {
        let atom = Formula::Atom(self.name.clone(), vec![]);
        if self.positive {
            atom
        } else {
            Formula::not(atom)
        }
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("~")?;
        }
        write!(f, "{}", self.name)
    }
}

/// `l => next m` over propositions, or `L(x) => next M(x)` over unary
/// predicates with the single shared variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepClause {
    Ground { lhs: Lit, rhs: Lit },
    NonGround { lhs: Lit, rhs: Lit },
}

impl StepClause {
    pub fn is_ground(&self) -> bool {
        matches!(self, StepClause::Ground { .. })
    }

    pub fn lhs(&self) -> &Lit {
        match self {
            StepClause::Ground { lhs, .. } | StepClause::NonGround { lhs, .. } => lhs,
        }
    }

    pub fn rhs(&self) -> &Lit {
        match self {
            StepClause::Ground { rhs, .. } | StepClause::NonGround { rhs, .. } => rhs,
        }
    }
}

impl fmt::Display for StepClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepClause::Ground { lhs, rhs } => write!(f, "{lhs} => next {rhs}"),
            StepClause::NonGround { lhs, rhs } => write!(f, "{lhs}(x) => next {rhs}(x)"),
        }
    }
}

/// `sometime l` or `sometime L(x)`, implicitly under `always forall`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventualityClause {
    Ground(Lit),
    NonGround(Lit),
}

impl EventualityClause {
    pub fn is_ground(&self) -> bool {
        matches!(self, EventualityClause::Ground(_))
    }

    pub fn lit(&self) -> &Lit {
        match self {
            EventualityClause::Ground(l) | EventualityClause::NonGround(l) => l,
        }
    }
}

impl fmt::Display for EventualityClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventualityClause::Ground(l) => write!(f, "sometime {l}"),
            EventualityClause::NonGround(l) => write!(f, "sometime {l}(x)"),
        }
    }
}

/// A monodic temporal problem `<U, I, S, E>` plus its signature and the
/// domain semantics it is to be read under. The associated formula is
/// `I & always U & always forall x S & always forall x E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalProblem {
    pub universal: BTreeSet<Formula>,
    pub initial: BTreeSet<Formula>,
    pub step: BTreeSet<StepClause>,
    pub eventuality: BTreeSet<EventualityClause>,
    pub signature: Signature,
    pub semantics: Semantics,
}

impl TemporalProblem {
    pub fn new(semantics: Semantics) -> Self {
        TemporalProblem {
            universal: BTreeSet::new(),
            initial: BTreeSet::new(),
            step: BTreeSet::new(),
            eventuality: BTreeSet::new(),
            signature: Signature::new(),
            semantics,
        }
    }

    /// Checks the structural invariants: universal and initial parts closed
    /// and temporal-free, step/eventuality literals unary or propositional,
    /// and no two step clauses sharing a left-hand side.
    pub fn validate(&self) -> Result<(), CoreError> {
        for f in self.universal.iter().chain(self.initial.iter()) {
            if f.has_temporal() {
                return Err(CoreError::Invalid(format!(
                    "temporal operator in first-order part: {f}"
                )));
            }
            if !f.is_closed() {
                return Err(CoreError::Invalid(format!(
                    "free variables in first-order part: {f}"
                )));
            }
        }
        let mut lhs_seen = BTreeSet::new();
        for sc in &self.step {
            let expected = if sc.is_ground() { 0 } else { 1 };
            for lit in [sc.lhs(), sc.rhs()] {
                match self.signature.arity(&lit.name) {
                    Some(a) if a == expected => {}
                    Some(a) => {
                        return Err(CoreError::ArityMismatch {
                            name: lit.name.to_string(),
                            expected,
                            found: a,
                        })
                    }
                    None => return Err(CoreError::UnknownSymbol(lit.name.to_string())),
                }
            }
            if !lhs_seen.insert((sc.is_ground(), sc.lhs().clone())) {
                return Err(CoreError::Invalid(format!(
                    "two step clauses share the left-hand side {}",
                    sc.lhs()
                )));
            }
        }
        for ev in &self.eventuality {
            let expected = if ev.is_ground() { 0 } else { 1 };
            match self.signature.arity(&ev.lit().name) {
                Some(a) if a == expected => {}
                Some(a) => {
                    return Err(CoreError::ArityMismatch {
                        name: ev.lit().name.to_string(),
                        expected,
                        found: a,
                    })
                }
                None => return Err(CoreError::UnknownSymbol(ev.lit().name.to_string())),
            }
        }
        Ok(())
    }

    /// Constants occurring anywhere in the problem.
    pub fn constants(&self) -> BTreeSet<Name> {
        self.signature.constants.clone()
    }

    /// Unary predicates occurring in the step or eventuality part.
    pub fn temporal_predicates(&self) -> Vec<Name> {
        let mut set = BTreeSet::new();
        for sc in &self.step {
            if !sc.is_ground() {
                set.insert(sc.lhs().name.clone());
                set.insert(sc.rhs().name.clone());
            }
        }
        for ev in &self.eventuality {
            if !ev.is_ground() {
                set.insert(ev.lit().name.clone());
            }
        }
        set.into_iter().collect()
    }

    /// Propositions occurring in the step or eventuality part.
    pub fn temporal_propositions(&self) -> Vec<Name> {
        let mut set = BTreeSet::new();
        for sc in &self.step {
            if sc.is_ground() {
                set.insert(sc.lhs().name.clone());
                set.insert(sc.rhs().name.clone());
            }
        }
        for ev in &self.eventuality {
            if ev.is_ground() {
                set.insert(ev.lit().name.clone());
            }
        }
        set.into_iter().collect()
    }

    /// The universal part as a vector of formulae, in canonical order.
    pub fn universal_vec(&self) -> Vec<Formula> {
        self.universal.iter().cloned().collect()
    }

    /// The associated formula of the problem.
    pub fn associated_formula(&self) -> Formula {
        let x = || Term::var("x");
        let mut parts: Vec<Formula> = self.initial.iter().cloned().collect();
        for u in &self.universal {
            parts.push(Formula::always(u.clone()));
        }
        for sc in &self.step {
            let body = match sc {
                StepClause::Ground { lhs, rhs } => {
                    Formula::implies(lhs.as_prop(), Formula::next(rhs.as_prop()))
                }
                StepClause::NonGround { lhs, rhs } => Formula::forall(
                    "x",
                    Formula::implies(lhs.applied(&x()), Formula::next(rhs.applied(&x()))),
                ),
            };
            parts.push(Formula::always(body));
        }
        for ev in &self.eventuality {
            let body = match ev {
                EventualityClause::Ground(l) => Formula::sometime(l.as_prop()),
                EventualityClause::NonGround(l) => {
                    Formula::forall("x", Formula::sometime(l.applied(&x())))
                }
            };
            parts.push(Formula::always(body));
        }
        Formula::and(parts)
    }
}

impl fmt::Display for TemporalProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "initial {{")?;
        for g in &self.initial {
            writeln!(f, "  {g};")?;
        }
        writeln!(f, "}}")?;
        writeln!(f, "universal {{")?;
        for g in &self.universal {
            writeln!(f, "  {g};")?;
        }
        writeln!(f, "}}")?;
        writeln!(f, "step {{")?;
        for sc in &self.step {
            writeln!(f, "  {sc};")?;
        }
        writeln!(f, "}}")?;
        writeln!(f, "eventuality {{")?;
        for ev in &self.eventuality {
            writeln!(f, "  {ev};")?;
        }
        writeln!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lhs_uniqueness_is_enforced() {
        let mut p = TemporalProblem::new(Semantics::Constant);
        p.signature.declare_predicate(Name::new("P"), 1).unwrap();
        p.signature.declare_predicate(Name::new("Q"), 1).unwrap();
        p.step.insert(StepClause::NonGround {
            lhs: Lit::pos("P"),
            rhs: Lit::pos("P"),
        });
        p.step.insert(StepClause::NonGround {
            lhs: Lit::pos("P"),
            rhs: Lit::pos("Q"),
        });
        assert!(p.validate().is_err());
    }

    #[test]
    fn associated_formula_shape() {
        let mut p = TemporalProblem::new(Semantics::Constant);
        p.signature.declare_predicate(Name::new("P"), 1).unwrap();
        p.step.insert(StepClause::NonGround {
            lhs: Lit::pos("P"),
            rhs: Lit::pos("P"),
        });
        let f = p.associated_formula();
        assert_eq!(f.to_string(), "always (forall x. P(x) -> next P(x))");
    }
}
