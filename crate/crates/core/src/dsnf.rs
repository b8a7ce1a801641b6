//! Reduction of monodic temporal formulae to normal-form problems, plus
//! constant flooding, the next-only extension reduction and the grounding
//! reductions.
//!
//! The pipeline: negation normal form, then recursive renaming of innermost
//! temporal subformulae by fresh surrogate predicates, unwinding of `always`
//! and `until`/`unless` through their fixed points, and replacement of
//! conditional eventualities by waitfor predicates. Complex sides of step
//! clauses are renamed to literals and left-hand sides are kept unique.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;

use crate::error::CoreError;
use crate::problem::{EventualityClause, Lit, Semantics, StepClause, TemporalProblem};
use crate::syntax::{classify, nnf, Formula, Name, Signature, Term};

/// Why a fresh predicate was introduced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RenamingOrigin {
    /// Surrogate for a temporal subformula.
    TemporalSurrogate,
    /// First-order renaming of a complex step-clause side or condition.
    FoRenaming,
    /// Waitfor predicate unconditioning an eventuality.
    Waitfor,
    /// Recurrence predicate of an `always` or `until` fixed point.
    Fixpoint,
    /// Proposition standing for a ground eventuality instance.
    GroundEventuality,
    /// Timed copy of a predicate in the next-only extension reduction.
    TimedCopy(usize),
}

impl fmt::Display for RenamingOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenamingOrigin::TemporalSurrogate => f.write_str("temporal surrogate"),
            RenamingOrigin::FoRenaming => f.write_str("first-order renaming"),
            RenamingOrigin::Waitfor => f.write_str("waitfor"),
            RenamingOrigin::Fixpoint => f.write_str("fixpoint"),
            RenamingOrigin::GroundEventuality => f.write_str("ground eventuality"),
            RenamingOrigin::TimedCopy(i) => write!(f, "timed copy at offset {i}"),
        }
    }
}

/// One introduced name with its defining formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenamingEntry {
    pub name: Name,
    pub arity: usize,
    pub origin: RenamingOrigin,
    /// What the name stands for (the renamed subformula or definition body).
    pub definition: Formula,
}

/// Record of all names introduced by a transformation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RenamingLedger {
    pub entries: Vec<RenamingEntry>,
}

impl RenamingLedger {
    pub fn push(&mut self, name: Name, arity: usize, origin: RenamingOrigin, definition: Formula) {
        self.entries.push(RenamingEntry {
            name,
            arity,
            origin,
            definition,
        });
    }

    pub fn lookup(&self, name: &Name) -> Option<&RenamingEntry> {
        self.entries.iter().find(|e| &e.name == name)
    }

    /// Rewrites a formula by expanding introduced names to their definitions,
    /// repeatedly, until none remain. Intended for tests and display.
    pub fn expand(&self, f: &Formula) -> Formula {
        let defs: BTreeMap<&Name, &RenamingEntry> =
            self.entries.iter().map(|e| (&e.name, e)).collect();
        fn go(f: &Formula, defs: &BTreeMap<&Name, &RenamingEntry>) -> Formula {
            match f {
                Formula::Atom(p, ts) => match defs.get(p) {
                    Some(entry) if !entry.definition.has_temporal() => {
                        let body = go(&entry.definition, defs);
                        if ts.is_empty() {
                            body
                        } else {
                            body.substitute(&Name::new("x"), &ts[0])
                        }
                    }
                    _ => f.clone(),
                },
                _ => rebuild(f, |g| go(g, defs)),
            }
        }
        go(f, &defs)
    }
}

impl fmt::Display for RenamingLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let head = if e.arity == 0 {
                format!("{}", e.name)
            } else {
                format!("{}(x)", e.name)
            };
            writeln!(f, "# {} := {}  ({})", head, e.definition, e.origin)?;
        }
        Ok(())
    }
}

/// Rebuilds a formula node applying `f` to each child.
fn rebuild(formula: &Formula, mut f: impl FnMut(&Formula) -> Formula) -> Formula {
    match formula {
        Formula::True | Formula::False | Formula::Atom(..) => formula.clone(),
        Formula::Not(g) => Formula::not(f(g)),
        Formula::And(fs) => Formula::and(fs.iter().map(f).collect()),
        Formula::Or(fs) => Formula::or(fs.iter().map(f).collect()),
        Formula::Implies(a, b) => Formula::implies(f(a), f(b)),
        Formula::Iff(a, b) => Formula::iff(f(a), f(b)),
        Formula::Forall(v, g) => Formula::Forall(v.clone(), Box::new(f(g))),
        Formula::Exists(v, g) => Formula::Exists(v.clone(), Box::new(f(g))),
        Formula::Next(g) => Formula::next(f(g)),
        Formula::Always(g) => Formula::always(f(g)),
        Formula::Sometime(g) => Formula::sometime(f(g)),
        Formula::Until(a, b) => Formula::until(f(a), f(b)),
        Formula::WeakUntil(a, b) => Formula::weak_until(f(a), f(b)),
    }
}

struct Transformer {
    sig: Signature,
    universal: Vec<Formula>,
    initial: Vec<Formula>,
    steps: Vec<(bool, Lit, Lit)>,
    eventualities: Vec<EventualityClause>,
    ledger: RenamingLedger,
    surrogates: usize,
    renames: usize,
}

impl Transformer {
    fn fresh(
        &mut self,
        stem: String,
        arity: usize,
        origin: RenamingOrigin,
        definition: Formula,
    ) -> Name {
        let name = self.sig.fresh(&stem);
        self.sig.declare_predicate(name.clone(), arity).unwrap();
        self.ledger.push(name.clone(), arity, origin, definition);
        name
    }

    fn fresh_surrogate(&mut self, arity: usize, definition: Formula) -> Name {
        self.surrogates += 1;
        self.fresh(
            format!("_S{}", self.surrogates),
            arity,
            RenamingOrigin::TemporalSurrogate,
            definition,
        )
    }

    fn fresh_renaming(&mut self, arity: usize, origin: RenamingOrigin, definition: Formula) -> Name {
        self.renames += 1;
        self.fresh(format!("_R{}", self.renames), arity, origin, definition)
    }

    fn fresh_waitfor(&mut self, lit: &Lit, arity: usize, definition: Formula) -> Name {
        let stem = if lit.positive {
            format!("_waitfor{}", lit.name)
        } else {
            format!("_waitfor_n{}", lit.name)
        };
        self.fresh(stem, arity, RenamingOrigin::Waitfor, definition)
    }

    fn add_universal(&mut self, f: Formula) {
        if f != Formula::True {
            self.universal.push(f);
        }
    }

    /// The scoped variable of a one-variable clause context, if any.
    fn body(var: Option<&Name>, f: &Formula) -> Formula {
        // normalise the clause variable to `x` for literal extraction
        match var {
            Some(v) if v.as_str() != "x" => f.substitute(v, &Term::var("x")),
            _ => f.clone(),
        }
    }

    /// Extracts a literal over the clause variable (`var = Some`) or a
    /// propositional literal (`var = None`); `None` if complex.
    fn as_clause_lit(var: Option<&Name>, f: &Formula) -> Option<Lit> {
        let (positive, atom) = match f {
            Formula::Not(g) => (false, &**g),
            other => (true, other),
        };
        match atom {
            Formula::Atom(p, ts) => match (var, ts.as_slice()) {
                (None, []) => Some(Lit {
                    positive,
                    name: p.clone(),
                }),
                (Some(v), [Term::Var(t)]) if t == v => Some(Lit {
                    positive,
                    name: p.clone(),
                }),
                _ => None,
            },
            _ => None,
        }
    }

    /// Universal closure of a formula over its clause variable.
    fn close(var: Option<&Name>, f: Formula) -> Formula {
        match var {
            Some(v) if f.free_vars().contains(v) => Formula::Forall(v.clone(), Box::new(f)),
            _ => f,
        }
    }

    /// Renames `cond` to a literal if it is not one already. The definition
    /// direction `cond -> lit` matches the condition's negative polarity.
    fn lit_for_condition(&mut self, var: Option<&Name>, cond: &Formula) -> Lit {
        if let Some(l) = Self::as_clause_lit(var, cond) {
            return l;
        }
        let arity = var.map_or(0, |_| 1);
        let name = self.fresh_renaming(
            arity,
            RenamingOrigin::FoRenaming,
            Self::body(var, cond),
        );
        let lit = Lit::pos(name);
        let head = match var {
            Some(v) => lit.applied(&Term::Var(v.clone())),
            None => lit.as_prop(),
        };
        self.add_universal(Self::close(var, Formula::implies(cond.clone(), head)));
        lit
    }

    /// Renames a positively occurring body to a literal if complex; the
    /// definition direction is `lit -> body`.
    fn lit_for_body(&mut self, var: Option<&Name>, body: &Formula) -> Lit {
        if let Some(l) = Self::as_clause_lit(var, body) {
            return l;
        }
        let arity = var.map_or(0, |_| 1);
        let name = self.fresh_renaming(
            arity,
            RenamingOrigin::FoRenaming,
            Self::body(var, body),
        );
        let lit = Lit::pos(name);
        let head = match var {
            Some(v) => lit.applied(&Term::Var(v.clone())),
            None => lit.as_prop(),
        };
        self.add_universal(Self::close(var, Formula::implies(head, body.clone())));
        lit
    }

    /// `cond => next body`, with both sides brought to literal form.
    fn handle_step(&mut self, var: Option<&Name>, cond: &Formula, body: &Formula) {
        let body = self.reduce_fo(body);
        let lhs = self.lit_for_condition(var, cond);
        let rhs = self.lit_for_body(var, &body);
        self.steps.push((var.is_none(), lhs, rhs));
    }

    /// `cond => sometime body`: unconditional bodies go straight to the
    /// eventuality part, conditional ones through a waitfor predicate.
    fn handle_eventuality(&mut self, var: Option<&Name>, cond: &Formula, body: &Formula) {
        let body = self.reduce_fo(body);
        if body == Formula::True || cond == &Formula::False {
            return; // trivially satisfied
        }
        if body == Formula::False {
            // cond can never hold
            self.add_universal(Self::close(var, Formula::not(cond.clone())));
            return;
        }
        let lit = self.lit_for_body(var, &body);
        if cond == &Formula::True {
            self.eventualities.push(match var {
                Some(_) => EventualityClause::NonGround(lit),
                None => EventualityClause::Ground(lit),
            });
            return;
        }
        // waitfor unconditioning:
        //   always forall x ((cond & ~L(x)) -> w(x))
        //   always forall x (w(x) -> next (L(x) | w(x)))    [rhs renamed]
        //   always forall x sometime ~w(x)
        let arity = var.map_or(0, |_| 1);
        let w_name = self.fresh_waitfor(&lit, arity, Self::body(var, cond));
        let w = Lit::pos(w_name);
        let at = |l: &Lit| match var {
            Some(v) => l.applied(&Term::Var(v.clone())),
            None => l.as_prop(),
        };
        self.add_universal(Self::close(
            var,
            Formula::implies(
                Formula::and(vec![cond.clone(), Formula::not(at(&lit))]),
                at(&w),
            ),
        ));
        let next_body = Formula::or(vec![at(&lit), at(&w)]);
        let r = self.lit_for_body(var, &next_body);
        self.steps.push((var.is_none(), w.clone(), r));
        self.eventualities.push(match var {
            Some(_) => EventualityClause::NonGround(w.negated()),
            None => EventualityClause::Ground(w.negated()),
        });
    }

    /// `cond => always body` through the maximal fixed point.
    fn handle_always(&mut self, var: Option<&Name>, cond: &Formula, body: &Formula) {
        let body = self.reduce_fo(body);
        if cond == &Formula::True {
            // always forall x always body == always forall x body
            self.add_universal(Self::close(var, body));
            return;
        }
        let arity = var.map_or(0, |_| 1);
        let r_name = self.fresh_renaming(arity, RenamingOrigin::Fixpoint, Self::body(var, &body));
        let r = Lit::pos(r_name);
        let at = |l: &Lit| match var {
            Some(v) => l.applied(&Term::Var(v.clone())),
            None => l.as_prop(),
        };
        self.add_universal(Self::close(var, Formula::implies(cond.clone(), at(&r))));
        self.steps.push((var.is_none(), r.clone(), r.clone()));
        self.add_universal(Self::close(var, Formula::implies(at(&r), body)));
    }

    /// `cond => (left until right)` (or `unless` without the eventuality)
    /// through the fixed-point unwinding.
    fn handle_until(
        &mut self,
        var: Option<&Name>,
        cond: &Formula,
        left: &Formula,
        right: &Formula,
        with_eventuality: bool,
    ) {
        let left = self.reduce_fo(left);
        let right = self.reduce_fo(right);
        if with_eventuality {
            self.handle_eventuality(var, cond, &right);
        }
        let at = |l: &Lit, var: Option<&Name>| match var {
            Some(v) => l.applied(&Term::Var(v.clone())),
            None => l.as_prop(),
        };
        let either = Formula::or(vec![left.clone(), right.clone()]);
        self.add_universal(Self::close(var, Formula::implies(cond.clone(), either.clone())));
        let arity = var.map_or(0, |_| 1);
        let s_name = self.fresh_renaming(
            arity,
            RenamingOrigin::Fixpoint,
            Self::body(var, &Formula::or(vec![left.clone(), right.clone()])),
        );
        let s = Lit::pos(s_name);
        self.add_universal(Self::close(
            var,
            Formula::implies(cond.clone(), Formula::or(vec![at(&s, var), right.clone()])),
        ));
        // single step clause with a conjunctive next-state definition keeps
        // left-hand sides unique
        let unfold = Formula::and(vec![
            either,
            Formula::or(vec![at(&s, var), right.clone()]),
        ]);
        let r = self.lit_for_body(var, &unfold);
        self.steps.push((var.is_none(), s, r));
    }

    /// Dispatches a clause `always (cond => T)` on the temporal operator `T`.
    fn handle_obligation(&mut self, var: Option<&Name>, cond: &Formula, temporal: &Formula) {
        match temporal {
            Formula::Next(body) => self.handle_step(var, cond, body),
            Formula::Sometime(body) => self.handle_eventuality(var, cond, body),
            Formula::Always(body) => self.handle_always(var, cond, body),
            Formula::Until(a, b) => self.handle_until(var, cond, a, b, true),
            Formula::WeakUntil(a, b) => self.handle_until(var, cond, a, b, false),
            other => unreachable!("not a temporal node: {other}"),
        }
    }

    /// Renames innermost temporal subformulae by fresh surrogates, returning
    /// the first-order residue. Obligations are processed on the fly.
    fn reduce_fo(&mut self, f: &Formula) -> Formula {
        let reduced = rebuild(f, |g| self.reduce_fo(g));
        if !reduced.is_temporal_node() {
            return reduced;
        }
        let fv: Vec<Name> = reduced.free_vars().into_iter().collect();
        match fv.as_slice() {
            [] => {
                let name = self.fresh_surrogate(0, reduced.clone());
                let surr = Formula::Atom(name, vec![]);
                self.handle_obligation(None, &surr, &reduced);
                surr
            }
            [v] => {
                let def = Self::body(Some(v), &reduced);
                let name = self.fresh_surrogate(1, def);
                let surr = Formula::Atom(name, vec![Term::Var(v.clone())]);
                self.handle_obligation(Some(&v.clone()), &surr, &reduced);
                surr
            }
            _ => unreachable!("monodicity was checked upfront"),
        }
    }

    /// Processes a conjunct under `always`.
    fn process_always(&mut self, f: &Formula) {
        match f {
            Formula::And(fs) => {
                for g in fs {
                    self.process_always(g);
                }
            }
            Formula::Always(g) => self.process_always(g),
            _ if !f.has_temporal() => self.add_universal(f.clone()),
            _ => {
                // strip the universal prefix
                let mut vars = Vec::new();
                let mut body = f;
                while let Formula::Forall(v, g) = body {
                    vars.push(v.clone());
                    body = g;
                }
                let disjuncts: Vec<Formula> = match body {
                    Formula::Or(fs) => fs.clone(),
                    other => vec![other.clone()],
                };
                let (temporal, plain): (Vec<_>, Vec<_>) =
                    disjuncts.into_iter().partition(|d| d.is_temporal_node());
                if temporal.len() == 1 {
                    let t = &temporal[0];
                    let tvars = t.free_vars();
                    if tvars.len() <= 1 && tvars.iter().all(|v| vars.contains(v)) {
                        let tvar = tvars.into_iter().next();
                        // the non-temporal disjuncts become the (negated)
                        // condition; prefix variables not shared with the
                        // temporal disjunct are pushed in existentially
                        let mut cond = nnf(&Formula::not(Formula::or(plain)));
                        for v in vars.iter().rev() {
                            if Some(v) != tvar.as_ref() && cond.free_vars().contains(v) {
                                cond = Formula::Exists(v.clone(), Box::new(cond));
                            }
                        }
                        self.handle_obligation(tvar.as_ref(), &cond, t);
                        return;
                    }
                }
                // general shape: rename temporal subformulae away
                let residue = self.reduce_fo(f);
                self.add_universal(residue);
            }
        }
    }

    fn process_top(&mut self, f: &Formula) {
        match f {
            Formula::And(fs) => {
                for g in fs {
                    self.process_top(g);
                }
            }
            Formula::Always(g) => self.process_always(g),
            _ => {
                let residue = self.reduce_fo(f);
                if residue != Formula::True {
                    self.initial.push(residue);
                }
            }
        }
    }

    /// Merges step clauses sharing a left-hand side by renaming the combined
    /// right-hand sides to one literal.
    fn unique_steps(&mut self) -> Vec<StepClause> {
        let mut sorted = std::mem::take(&mut self.steps);
        sorted.sort();
        sorted.dedup();
        let mut out = Vec::new();
        let groups: Vec<((bool, Lit), Vec<Lit>)> = sorted
            .into_iter()
            .map(|(g, l, r)| ((g, l), r))
            .into_group_map()
            .into_iter()
            .sorted()
            .collect();
        for ((ground, lhs), rhss) in groups {
            let rhs = if rhss.len() == 1 {
                rhss.into_iter().next().unwrap()
            } else {
                let var = if ground { None } else { Some(Name::new("x")) };
                let at = |l: &Lit| match &var {
                    Some(v) => l.applied(&Term::Var(v.clone())),
                    None => l.as_prop(),
                };
                let conj = Formula::and(rhss.iter().map(at).collect());
                self.lit_for_body(var.as_ref(), &conj)
            };
            out.push(if ground {
                StepClause::Ground { lhs, rhs }
            } else {
                StepClause::NonGround { lhs, rhs }
            });
        }
        out
    }
}

/// Reduces a monodic formula to a satisfiability-equivalent normal-form
/// problem, returning the record of introduced names.
pub fn to_dsnf(
    formula: &Formula,
    semantics: Semantics,
) -> Result<(TemporalProblem, RenamingLedger), CoreError> {
    let class = classify(formula);
    if !class.is_monodic {
        return Err(CoreError::NotMonodic(formula.to_string()));
    }
    // satisfiability reads free variables existentially
    let mut closed = nnf(formula);
    for v in formula.free_vars() {
        closed = Formula::Exists(v, Box::new(closed));
    }
    let mut tr = Transformer {
        sig: formula.signature()?,
        universal: Vec::new(),
        initial: Vec::new(),
        steps: Vec::new(),
        eventualities: Vec::new(),
        ledger: RenamingLedger::default(),
        surrogates: 0,
        renames: 0,
    };
    tr.process_top(&closed);
    let steps = tr.unique_steps();
    let mut problem = TemporalProblem::new(semantics);
    problem.signature = tr.sig;
    problem.universal = tr.universal.into_iter().collect();
    problem.initial = tr.initial.into_iter().collect();
    problem.step = steps.into_iter().collect();
    problem.eventuality = tr.eventualities.into_iter().collect();
    problem.validate()?;
    Ok((problem, tr.ledger))
}

/// Adds `sometime L(c)` for every non-ground eventuality and constant, with
/// each instance renamed to a fresh proposition defined in the universal
/// part. Already-flooded instances are detected and skipped, so the
/// operation is idempotent.
pub fn flood_constants(
    problem: &TemporalProblem,
) -> Result<(TemporalProblem, RenamingLedger), CoreError> {
    let mut out = problem.clone();
    let mut ledger = RenamingLedger::default();
    let consts: Vec<Name> = problem.constants().into_iter().collect();
    if consts.is_empty() {
        return Ok((out, ledger));
    }
    let ground_evs: Vec<Lit> = problem
        .eventuality
        .iter()
        .filter(|e| e.is_ground())
        .map(|e| e.lit().clone())
        .collect();
    for ev in problem.eventuality.iter().filter(|e| !e.is_ground()) {
        for c in &consts {
            let instance = ev.lit().applied(&Term::Const(c.clone()));
            // skip when some existing ground eventuality is defined as this
            // instance
            let already = ground_evs.iter().any(|g| {
                out.universal
                    .contains(&Formula::iff(g.as_prop(), instance.clone()))
            });
            if already {
                continue;
            }
            let polarity = if ev.lit().positive { "" } else { "n" };
            let stem = format!("_ev_{}{}_{}", polarity, ev.lit().name, c);
            let name = out.signature.fresh(&stem);
            out.signature.declare_predicate(name.clone(), 0)?;
            ledger.push(
                name.clone(),
                0,
                RenamingOrigin::GroundEventuality,
                instance.clone(),
            );
            let prop = Lit::pos(name);
            out.universal
                .insert(Formula::iff(prop.as_prop(), instance));
            out.eventuality.insert(EventualityClause::Ground(prop));
        }
    }
    out.validate()?;
    Ok((out, ledger))
}

/// An extended problem: a base problem plus first-order formulae over
/// `next`-prefixed atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedProblem {
    pub base: TemporalProblem,
    pub extended: Vec<Formula>,
}

impl ExtendedProblem {
    /// Maximal `next` nesting depth over the extended part.
    pub fn depth(&self) -> Result<usize, CoreError> {
        fn atom_depth(f: &Formula, inside_next: usize) -> Result<usize, CoreError> {
            match f {
                Formula::Next(g) => atom_depth(g, inside_next + 1),
                Formula::Atom(..) => Ok(inside_next),
                Formula::Always(_)
                | Formula::Sometime(_)
                | Formula::Until(..)
                | Formula::WeakUntil(..) => Err(CoreError::Invalid(format!(
                    "extended part admits only the next operator: {f}"
                ))),
                _ if inside_next > 0 => Err(CoreError::Invalid(format!(
                    "next must be applied to an atom in the extended part: {f}"
                ))),
                _ => {
                    let mut best = 0;
                    for c in f.children() {
                        best = best.max(atom_depth(c, 0)?);
                    }
                    Ok(best)
                }
            }
        }
        let mut k = 0;
        for f in &self.extended {
            k = k.max(atom_depth(f, 0)?);
        }
        Ok(k)
    }
}

/// Translates an extended problem into a plain problem: the universal, step
/// and eventuality parts are kept, and the initial part encodes the first
/// `k+1` states with timed predicate copies.
pub fn reduce_extended(
    xp: &ExtendedProblem,
) -> Result<(TemporalProblem, RenamingLedger), CoreError> {
    let k = xp.depth()?;
    let base = &xp.base;
    let mut ledger = RenamingLedger::default();
    let mut sig = base.signature.clone();
    for f in &xp.extended {
        sig.absorb(&f.signature()?)?;
    }

    // timed copies P^0..P^k for every predicate of the problem
    let original_preds: Vec<(Name, usize)> =
        sig.predicates.iter().map(|(n, &a)| (n.clone(), a)).collect();
    let mut copies: BTreeMap<(Name, usize), Name> = BTreeMap::new();
    for (p, arity) in &original_preds {
        for i in 0..=k {
            let name = sig.fresh(&format!("{p}_t{i}"));
            sig.declare_predicate(name.clone(), *arity)?;
            let head = Formula::Atom(
                p.clone(),
                (0..*arity).map(|j| Term::var(format!("x{j}"))).collect(),
            );
            ledger.push(name.clone(), *arity, RenamingOrigin::TimedCopy(i), head);
            copies.insert((p.clone(), i), name);
        }
    }
    let timed = |f: &Formula, i: usize| -> Formula {
        fn go(f: &Formula, i: usize, copies: &BTreeMap<(Name, usize), Name>) -> Formula {
            match f {
                Formula::Atom(p, ts) => {
                    Formula::Atom(copies[&(p.clone(), i)].clone(), ts.clone())
                }
                _ => rebuild(f, |g| go(g, i, copies)),
            }
        }
        go(f, i, &copies)
    };

    let mut initial = Vec::new();
    // 1. initial formulae at offset 0
    for f in &base.initial {
        initial.push(timed(f, 0));
    }
    // 2. universal formulae at every offset
    for f in &base.universal {
        for i in 0..=k {
            initial.push(timed(f, i));
        }
    }
    // 3. step-clause consistency between consecutive offsets
    for sc in &base.step {
        for i in 0..k {
            let f = match sc {
                StepClause::NonGround { lhs, rhs } => {
                    let x = Term::var("x");
                    let lhs_i = Formula::Atom(
                        copies[&(lhs.name.clone(), i)].clone(),
                        vec![x.clone()],
                    );
                    let lhs_i = if lhs.positive {
                        lhs_i
                    } else {
                        Formula::not(lhs_i)
                    };
                    let rhs_i = Formula::Atom(
                        copies[&(rhs.name.clone(), i + 1)].clone(),
                        vec![x.clone()],
                    );
                    let rhs_i = if rhs.positive {
                        rhs_i
                    } else {
                        Formula::not(rhs_i)
                    };
                    Formula::forall("x", Formula::implies(lhs_i, rhs_i))
                }
                StepClause::Ground { lhs, rhs } => {
                    let l = Formula::Atom(copies[&(lhs.name.clone(), i)].clone(), vec![]);
                    let l = if lhs.positive { l } else { Formula::not(l) };
                    let r = Formula::Atom(copies[&(rhs.name.clone(), i + 1)].clone(), vec![]);
                    let r = if rhs.positive { r } else { Formula::not(r) };
                    Formula::implies(l, r)
                }
            };
            initial.push(f);
        }
    }
    // 4. the extended part with next-atoms replaced by timed copies
    fn strip_next(
        f: &Formula,
        copies: &BTreeMap<(Name, usize), Name>,
    ) -> Result<Formula, CoreError> {
        fn next_depth(f: &Formula) -> (usize, Formula) {
            match f {
                Formula::Next(g) => {
                    let (d, a) = next_depth(g);
                    (d + 1, a)
                }
                other => (0, other.clone()),
            }
        }
        match f {
            Formula::Next(_) => {
                let (d, atom) = next_depth(f);
                match atom {
                    Formula::Atom(p, ts) => Ok(Formula::Atom(copies[&(p, d)].clone(), ts)),
                    other => Err(CoreError::Invalid(format!(
                        "next must be applied to an atom in the extended part: {other}"
                    ))),
                }
            }
            Formula::Atom(p, ts) => Ok(Formula::Atom(copies[&(p.clone(), 0)].clone(), ts.clone())),
            _ => {
                // rebuild with error propagation
                let mut err = None;
                let out = rebuild(f, |g| match strip_next(g, copies) {
                    Ok(h) => h,
                    Err(e) => {
                        err = Some(e);
                        Formula::True
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(out),
                }
            }
        }
    }
    for f in &xp.extended {
        initial.push(strip_next(f, &copies)?);
    }
    // 5. link every predicate to its offset-k copy
    for (p, arity) in &original_preds {
        let vars: Vec<Term> = (0..*arity).map(|j| Term::var(format!("x{j}"))).collect();
        let mut link = Formula::iff(
            Formula::Atom(p.clone(), vars.clone()),
            Formula::Atom(copies[&(p.clone(), k)].clone(), vars),
        );
        for j in (0..*arity).rev() {
            link = Formula::Forall(Name::new(format!("x{j}")), Box::new(link));
        }
        initial.push(link);
    }

    let mut out = TemporalProblem::new(base.semantics);
    out.signature = sig;
    out.universal = base.universal.clone();
    out.step = base.step.clone();
    out.eventuality = base.eventuality.clone();
    out.initial = initial.into_iter().collect();
    out.validate()?;
    Ok((out, ledger))
}

/// Default cap on the subset enumeration of the ground-eventuality reduction.
pub const DEFAULT_SUBSET_LIMIT: usize = 1 << 12;

/// Replaces the non-ground step clauses of a ground-eventuality problem by
/// their derived forms over all non-empty subsets, with closed sides renamed
/// to propositions. The output problem is grounded.
pub fn reduce_ground_eventuality(
    problem: &TemporalProblem,
    subset_limit: usize,
) -> Result<(TemporalProblem, RenamingLedger), CoreError> {
    if let Some(ev) = problem.eventuality.iter().find(|e| !e.is_ground()) {
        return Err(CoreError::Invalid(format!(
            "non-ground eventuality {ev} in a ground-eventuality reduction"
        )));
    }
    let nonground: Vec<&StepClause> = problem.step.iter().filter(|s| !s.is_ground()).collect();
    let mut ledger = RenamingLedger::default();
    if nonground.is_empty() {
        return Ok((problem.clone(), ledger));
    }
    if nonground.len() >= usize::BITS as usize || (1usize << nonground.len()) > subset_limit {
        return Err(CoreError::ResourceLimit(format!(
            "2^{} step-clause subsets exceed the limit {subset_limit}",
            nonground.len()
        )));
    }
    let mut out = problem.clone();
    out.step = problem
        .step
        .iter()
        .filter(|s| s.is_ground())
        .cloned()
        .collect();

    let mut counter = 0usize;
    let mut prop_for = |out: &mut TemporalProblem,
                        ledger: &mut RenamingLedger,
                        formula: Formula,
                        lhs_side: bool|
     -> Lit {
        counter += 1;
        let side = if lhs_side { "l" } else { "r" };
        let name = out.signature.fresh(&format!("_g{counter}{side}"));
        out.signature.declare_predicate(name.clone(), 0).unwrap();
        ledger.push(
            name.clone(),
            0,
            RenamingOrigin::FoRenaming,
            formula.clone(),
        );
        let lit = Lit::pos(name);
        // definition direction follows the side's polarity
        let def = if lhs_side {
            Formula::implies(formula, lit.as_prop())
        } else {
            Formula::implies(lit.as_prop(), formula)
        };
        out.universal.insert(def);
        lit
    };

    let mut add_derived = |out: &mut TemporalProblem,
                           ledger: &mut RenamingLedger,
                           lhs: Formula,
                           rhs: Formula| {
        let l = prop_for(out, ledger, lhs, true);
        let r = prop_for(out, ledger, rhs, false);
        out.step.insert(StepClause::Ground { lhs: l, rhs: r });
    };

    for mask in 1usize..(1 << nonground.len()) {
        let subset: Vec<&StepClause> = nonground
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, s)| *s)
            .collect();
        let derived = crate::clauses::derive_step_clauses(problem, &subset)?;
        for d in derived {
            match d.origin {
                crate::clauses::DerivedOrigin::ForallForm
                | crate::clauses::DerivedOrigin::ExistsForm => {
                    add_derived(&mut out, &mut ledger, d.lhs, d.rhs);
                }
                // constant instances only once, from the singleton subsets
                crate::clauses::DerivedOrigin::ConstInstance(_) if subset.len() == 1 => {
                    add_derived(&mut out, &mut ledger, d.lhs, d.rhs);
                }
                _ => {}
            }
        }
    }
    out.validate()?;
    Ok((out, ledger))
}

/// Replaces each non-ground eventuality of a ground next-time problem by its
/// ground consequence `sometime exists x L(x)` plus constant instances, all
/// renamed to propositions.
pub fn reduce_ground_next_time(
    problem: &TemporalProblem,
) -> Result<(TemporalProblem, RenamingLedger), CoreError> {
    if let Some(sc) = problem.step.iter().find(|s| !s.is_ground()) {
        return Err(CoreError::Invalid(format!(
            "non-ground step clause {sc} in a ground next-time reduction"
        )));
    }
    let mut out = problem.clone();
    let mut ledger = RenamingLedger::default();
    let consts: Vec<Name> = problem.constants().into_iter().collect();
    for ev in problem.eventuality.iter().filter(|e| !e.is_ground()) {
        out.eventuality.remove(ev);
        let lit = ev.lit();
        // the existential consequence
        let body = Formula::exists("x", lit.applied(&Term::var("x")));
        let polarity = if lit.positive { "" } else { "n" };
        let stem = format!("_ev_{}{}_some", polarity, lit.name);
        let name = out.signature.fresh(&stem);
        out.signature.declare_predicate(name.clone(), 0)?;
        ledger.push(name.clone(), 0, RenamingOrigin::GroundEventuality, body.clone());
        let prop = Lit::pos(name);
        out.universal.insert(Formula::iff(prop.as_prop(), body));
        out.eventuality.insert(EventualityClause::Ground(prop));
        // plus one instance per constant
        for c in &consts {
            let instance = lit.applied(&Term::Const(c.clone()));
            let stem = format!("_ev_{}{}_{}", polarity, lit.name, c);
            let name = out.signature.fresh(&stem);
            out.signature.declare_predicate(name.clone(), 0)?;
            ledger.push(
                name.clone(),
                0,
                RenamingOrigin::GroundEventuality,
                instance.clone(),
            );
            let prop = Lit::pos(name);
            out.universal.insert(Formula::iff(prop.as_prop(), instance));
            out.eventuality.insert(EventualityClause::Ground(prop));
        }
    }
    out.validate()?;
    Ok((out, ledger))
}

/// Total syntax-tree size of a problem, for growth measurements.
pub fn problem_node_count(p: &TemporalProblem) -> usize {
    let formulas: usize = p
        .universal
        .iter()
        .chain(p.initial.iter())
        .map(|f| f.node_count())
        .sum();
    // lhs => next rhs counts as five nodes, sometime L as two
    formulas + 5 * p.step.len() + 2 * p.eventuality.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_formula, parse_problem};

    #[test]
    fn purely_first_order_input_goes_to_initial() {
        let f = parse_formula("forall x. (P(x) -> Q(x))").unwrap();
        let (p, ledger) = to_dsnf(&f, Semantics::Constant).unwrap();
        assert_eq!(p.initial.len(), 1);
        assert!(p.universal.is_empty());
        assert!(p.step.is_empty());
        assert!(p.eventuality.is_empty());
        assert!(ledger.entries.is_empty());
    }

    #[test]
    fn step_clause_input_passes_through() {
        let f = parse_formula("always (forall x. (P(x) -> next P(x)))").unwrap();
        let (p, _) = to_dsnf(&f, Semantics::Constant).unwrap();
        assert_eq!(p.step.len(), 1);
        let sc = p.step.iter().next().unwrap();
        assert_eq!(sc.lhs(), &Lit::pos("P"));
        assert_eq!(sc.rhs(), &Lit::pos("P"));
        assert!(p.universal.is_empty());
        assert!(p.initial.is_empty());
    }

    #[test]
    fn conditional_eventuality_gets_waitfor() {
        // always forall x (P(x) -> sometime L(x))
        let f = parse_formula("always (forall x. (P(x) -> sometime L(x)))").unwrap();
        let (p, ledger) = to_dsnf(&f, Semantics::Constant).unwrap();
        let w = ledger
            .entries
            .iter()
            .find(|e| e.origin == RenamingOrigin::Waitfor)
            .expect("waitfor introduced");
        // (1): forall x ((P(x) & ~L(x)) -> w(x))
        let x = Term::var("x");
        let expected1 = Formula::forall(
            "x",
            Formula::implies(
                Formula::and(vec![
                    Formula::atom("P", vec![x.clone()]),
                    Formula::not(Formula::atom("L", vec![x.clone()])),
                ]),
                Formula::Atom(w.name.clone(), vec![x.clone()]),
            ),
        );
        assert!(
            p.universal.contains(&expected1),
            "universal part misses the waitfor trigger: {p}"
        );
        // (2) renamed: w(x) => next R(x) with R(x) -> L(x) | w(x)
        assert_eq!(p.step.len(), 1);
        let sc = p.step.iter().next().unwrap();
        assert_eq!(sc.lhs().name, w.name);
        // (3): sometime ~w(x)
        assert_eq!(p.eventuality.len(), 1);
        let ev = p.eventuality.iter().next().unwrap();
        assert_eq!(ev.lit(), &Lit::neg(w.name.clone()));
    }

    #[test]
    fn nested_example_matches_paper_profile() {
        // exists x always sometime forall y forall z exists u Phi(x,y,z,u):
        // 1 initial, 5 universal formulae, 2 step clauses, 1 eventuality
        let f = parse_formula(
            "exists x. always sometime forall y. forall z. exists u. Phi(x,y,z,u)",
        )
        .unwrap();
        let (p, ledger) = to_dsnf(&f, Semantics::Constant).unwrap();
        assert_eq!(p.initial.len(), 1, "{p}");
        assert_eq!(p.universal.len(), 5, "{p}");
        assert_eq!(p.step.len(), 2, "{p}");
        assert_eq!(p.eventuality.len(), 1, "{p}");
        // one recurrence step clause R => next R
        assert!(
            p.step.iter().any(|sc| sc.lhs() == sc.rhs()),
            "missing the always-fixpoint clause: {p}"
        );
        // the eventuality is a negated waitfor
        let ev = p.eventuality.iter().next().unwrap();
        assert!(!ev.lit().positive);
        assert!(ledger
            .entries
            .iter()
            .any(|e| e.origin == RenamingOrigin::Waitfor));
        // initial: exists x. S(x) for a surrogate S
        let init = p.initial.iter().next().unwrap();
        assert!(matches!(init, Formula::Exists(..)));
    }

    #[test]
    fn monodicity_is_required() {
        let f = parse_formula("always (forall x. forall y. (R(x,y) -> next R(x,y)))").unwrap();
        assert!(matches!(
            to_dsnf(&f, Semantics::Constant),
            Err(CoreError::NotMonodic(_))
        ));
    }

    #[test]
    fn linear_growth_on_nested_input() {
        let mut f = parse_formula("P(c)").unwrap();
        for _ in 0..12 {
            f = Formula::always(Formula::sometime(Formula::and(vec![
                f.clone(),
                Formula::prop("q"),
            ])));
        }
        let input = f.node_count();
        let (p, _) = to_dsnf(&f, Semantics::Constant).unwrap();
        let output = problem_node_count(&p);
        assert!(
            output <= 10 * input,
            "growth {output}/{input} exceeds the linear bound"
        );
    }

    #[test]
    fn flooding_adds_renamed_instances() {
        let p = parse_problem(
            "
            initial { Q(c); }
            step { Q(x) => next Q(x); }
            eventuality { sometime ~L(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (flooded, ledger) = flood_constants(&p).unwrap();
        assert_eq!(flooded.eventuality.len(), 2);
        let new = ledger.entries.first().expect("one instance added");
        assert_eq!(new.origin, RenamingOrigin::GroundEventuality);
        // defining formula: prop <-> ~L(c)
        let def = Formula::iff(
            Formula::Atom(new.name.clone(), vec![]),
            Formula::not(Formula::atom("L", vec![Term::constant("c")])),
        );
        assert!(flooded.universal.contains(&def));
        // idempotent
        let (again, ledger2) = flood_constants(&flooded).unwrap();
        assert_eq!(again, flooded);
        assert!(ledger2.entries.is_empty());
    }

    #[test]
    fn flooding_without_constants_is_identity() {
        let p = parse_problem(
            "step { P(x) => next P(x); } eventuality { sometime ~P(x); }",
            Semantics::Constant,
        )
        .unwrap();
        let (flooded, ledger) = flood_constants(&p).unwrap();
        assert_eq!(flooded, p);
        assert!(ledger.entries.is_empty());
    }

    #[test]
    fn ground_eventuality_reduction_produces_six_clauses() {
        // S = {P => next P, Q => next ~P}, E = {sometime g} over no constants
        let p = parse_problem(
            "
            step { P(x) => next P(x); Q(x) => next ~P(x); }
            eventuality { sometime g; }
            universal { g <-> exists x. (P(x) & Q(x)); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (reduced, ledger) = reduce_ground_eventuality(&p, DEFAULT_SUBSET_LIMIT).unwrap();
        assert_eq!(reduced.step.len(), 6, "{reduced}");
        assert!(reduced.step.iter().all(|s| s.is_ground()));
        // expanding the renamed propositions recovers the derived forms
        let expanded: Vec<(Formula, Formula)> = reduced
            .step
            .iter()
            .map(|sc| {
                (
                    ledger.expand(&sc.lhs().as_prop()),
                    ledger.expand(&sc.rhs().as_prop()),
                )
            })
            .collect();
        let y = Term::var("y");
        let p_y = Formula::atom("P", vec![y.clone()]);
        let q_y = Formula::atom("Q", vec![y.clone()]);
        let want_lhs = Formula::exists("y", Formula::and(vec![p_y.clone(), q_y.clone()]));
        let want_rhs = Formula::exists(
            "y",
            Formula::and(vec![p_y.clone(), Formula::not(p_y.clone())]),
        );
        assert!(
            expanded.contains(&(want_lhs, want_rhs)),
            "missing the exists-form of the pair subset: {expanded:?}"
        );
        let want_forall = Formula::forall("y", Formula::or(vec![p_y.clone(), q_y]));
        assert!(expanded.iter().any(|(l, _)| l == &want_forall));
    }

    #[test]
    fn ground_eventuality_reduction_requires_ground_eventualities() {
        let p = parse_problem(
            "step { P(x) => next P(x); } eventuality { sometime ~P(x); }",
            Semantics::Constant,
        )
        .unwrap();
        assert!(reduce_ground_eventuality(&p, DEFAULT_SUBSET_LIMIT).is_err());
    }

    #[test]
    fn ground_next_time_reduction_rewrites_eventualities() {
        let p = parse_problem(
            "
            initial { l; }
            universal { forall x. (l -> Q(x)); }
            step { l => next l; }
            eventuality { sometime ~Q(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (reduced, ledger) = reduce_ground_next_time(&p).unwrap();
        assert!(reduced.eventuality.iter().all(|e| e.is_ground()));
        assert_eq!(reduced.eventuality.len(), 1);
        let ev = reduced.eventuality.iter().next().unwrap();
        let def = ledger.lookup(&ev.lit().name).unwrap();
        assert_eq!(
            def.definition,
            Formula::exists("x", Formula::not(Formula::atom("Q", vec![Term::var("x")])))
        );

        // with a constant, the instance is added as well
        let p2 = parse_problem(
            "
            initial { l & P(c); }
            universal { forall x. (l -> Q(x)); }
            step { l => next l; }
            eventuality { sometime ~Q(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (reduced2, _) = reduce_ground_next_time(&p2).unwrap();
        assert_eq!(reduced2.eventuality.len(), 2);
    }

    #[test]
    fn extended_reduction_reproduces_the_nine_formulae() {
        // X = {forall x forall y (P(x,y) -> next next P(x,y))}
        // I = {exists x exists y P(x,y)}, U = {forall x forall y (P(x,y) -> R(x))}
        // S = {R(x) => next R(x)}, E = {sometime ~R(x)}
        let base = parse_problem(
            "
            initial { exists x. exists y. P(x,y); }
            universal { forall x. forall y. (P(x,y) -> R(x)); }
            step { R(x) => next R(x); }
            eventuality { sometime ~R(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let x_part = parse_formula("forall x. forall y. (P(x,y) -> next next P(x,y))").unwrap();
        let xp = ExtendedProblem {
            base,
            extended: vec![x_part],
        };
        let (reduced, _) = reduce_extended(&xp).unwrap();
        assert_eq!(reduced.initial.len(), 9, "{reduced}");
        let texts: Vec<String> = reduced.initial.iter().map(|f| f.to_string()).collect();
        let expect = [
            "exists x. exists y. P_t0(x, y)",
            "forall x. forall y. P_t0(x, y) -> R_t0(x)",
            "forall x. forall y. P_t1(x, y) -> R_t1(x)",
            "forall x. forall y. P_t2(x, y) -> R_t2(x)",
            "forall x. R_t0(x) -> R_t1(x)",
            "forall x. R_t1(x) -> R_t2(x)",
            "forall x. forall y. P_t0(x, y) -> P_t2(x, y)",
            "forall x0. forall x1. P(x0, x1) <-> P_t2(x0, x1)",
            "forall x0. R(x0) <-> R_t2(x0)",
        ];
        for e in expect {
            assert!(texts.contains(&e.to_string()), "missing {e} in {texts:#?}");
        }
        // parts other than the initial one are untouched
        assert_eq!(reduced.step, xp.base.step);
        assert_eq!(reduced.eventuality, xp.base.eventuality);
        assert_eq!(reduced.universal, xp.base.universal);
    }

    #[test]
    fn extended_part_rejects_other_operators() {
        let base = parse_problem("initial { p; }", Semantics::Constant).unwrap();
        let bad = parse_formula("always p").unwrap();
        let xp = ExtendedProblem {
            base,
            extended: vec![bad],
        };
        assert!(reduce_extended(&xp).is_err());
    }
}
