//! Decision procedure for closed monadic first-order sentences over unary
//! predicates, propositions and constants, without equality or functions.
//!
//! A sentence set is satisfiable iff it holds in a quotient structure whose
//! domain is a non-empty set of *colours* (total literal assignments over the
//! predicate list), with constants mapped to realized colours. Queries are
//! compiled to propositional constraints over "colour is realized" /
//! proposition / constant-selector variables and handed to a small DPLL
//! solver; the first model in the fixed variable order is returned as the
//! witness structure. Results are memoised per oracle instance, since a
//! derivation re-checks many identical side conditions.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use crate::error::CoreError;
use crate::syntax::{Formula, Name, Signature, Term};

/// The symbol universe an oracle instance works over.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Universe {
    /// Unary predicates, sorted.
    pub preds: Vec<Name>,
    /// Propositions, sorted.
    pub props: Vec<Name>,
    /// Constants, sorted.
    pub consts: Vec<Name>,
}

impl Universe {
    pub fn from_signature(sig: &Signature) -> Result<Self, CoreError> {
        let mut preds = Vec::new();
        let mut props = Vec::new();
        for (p, &a) in &sig.predicates {
            match a {
                0 => props.push(p.clone()),
                1 => preds.push(p.clone()),
                arity => {
                    return Err(CoreError::UnsupportedFragment {
                        pred: p.to_string(),
                        arity,
                    })
                }
            }
        }
        preds.sort();
        props.sort();
        Ok(Universe {
            preds,
            props,
            consts: sig.constants.iter().cloned().collect(),
        })
    }

    pub fn from_sentences<'a>(
        sentences: impl IntoIterator<Item = &'a Formula>,
    ) -> Result<Self, CoreError> {
        let mut sig = Signature::new();
        for s in sentences {
            sig.absorb(&s.signature()?)?;
        }
        Universe::from_signature(&sig)
    }

    pub fn n_colours(&self) -> usize {
        1usize << self.preds.len()
    }

    fn pred_index(&self, name: &Name) -> Option<usize> {
        self.preds.binary_search(name).ok()
    }

    fn prop_index(&self, name: &Name) -> Option<usize> {
        self.props.binary_search(name).ok()
    }

    fn const_index(&self, name: &Name) -> Option<usize> {
        self.consts.binary_search(name).ok()
    }
}

/// A colour: bit `i` set means predicate `preds[i]` holds of the element.
pub type Colour = u32;

/// A quotient structure over a predicate list: which colours are realized,
/// the propositional valuation, and the colour of each constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractStructure {
    pub preds: Vec<Name>,
    pub realized: BTreeSet<Colour>,
    pub props: BTreeMap<Name, bool>,
    pub constants: BTreeMap<Name, Colour>,
}

impl AbstractStructure {
    /// Renders a colour as a literal set, e.g. `{P, ~Q}`.
    pub fn colour_literals(&self, c: Colour) -> String {
        let mut parts = Vec::new();
        for (i, p) in self.preds.iter().enumerate() {
            if c & (1 << i) != 0 {
                parts.push(format!("{p}"));
            } else {
                parts.push(format!("~{p}"));
            }
        }
        format!("{{{}}}", parts.join(", "))
    }

    /// Evaluates a closed monadic sentence in this structure.
    ///
    /// Quantifiers range over the realized colours; an atom `P(x)` is true
    /// under colour `γ` iff `P ∈ γ`, and constants evaluate through their
    /// assigned colour.
    pub fn evaluate(&self, sentence: &Formula) -> Result<bool, CoreError> {
        let mut env: Vec<(Name, Colour)> = Vec::new();
        self.eval_rec(sentence, &mut env)
    }

    fn colour_of_term(&self, t: &Term, env: &[(Name, Colour)]) -> Result<Colour, CoreError> {
        match t {
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, c)| *c)
                .ok_or_else(|| CoreError::UnknownSymbol(v.to_string())),
            Term::Const(c) => self
                .constants
                .get(c)
                .copied()
                .ok_or_else(|| CoreError::UnknownSymbol(c.to_string())),
        }
    }

    fn eval_rec(&self, f: &Formula, env: &mut Vec<(Name, Colour)>) -> Result<bool, CoreError> {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Atom(p, ts) => match ts.len() {
                0 => self
                    .props
                    .get(p)
                    .copied()
                    .ok_or_else(|| CoreError::UnknownSymbol(p.to_string())),
                1 => {
                    let colour = self.colour_of_term(&ts[0], env)?;
                    let i = self
                        .preds
                        .iter()
                        .position(|q| q == p)
                        .ok_or_else(|| CoreError::UnknownSymbol(p.to_string()))?;
                    Ok(colour & (1 << i) != 0)
                }
                arity => Err(CoreError::UnsupportedFragment {
                    pred: p.to_string(),
                    arity,
                }),
            },
            Formula::Not(g) => Ok(!self.eval_rec(g, env)?),
            Formula::And(fs) => {
                for g in fs {
                    if !self.eval_rec(g, env)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(fs) => {
                for g in fs {
                    if self.eval_rec(g, env)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Implies(a, b) => Ok(!self.eval_rec(a, env)? || self.eval_rec(b, env)?),
            Formula::Iff(a, b) => Ok(self.eval_rec(a, env)? == self.eval_rec(b, env)?),
            Formula::Forall(v, g) => {
                for &c in &self.realized {
                    env.push((v.clone(), c));
                    let ok = self.eval_rec(g, env)?;
                    env.pop();
                    if !ok {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Exists(v, g) => {
                for &c in &self.realized {
                    env.push((v.clone(), c));
                    let ok = self.eval_rec(g, env)?;
                    env.pop();
                    if ok {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            other => Err(CoreError::Invalid(format!(
                "temporal operator in oracle sentence: {other}"
            ))),
        }
    }
}

/// Hook for plugging in a decision procedure for non-monadic universal parts.
/// None ships with the toolkit; monadic queries never reach it.
pub trait ExternalOracle {
    fn is_satisfiable(
        &self,
        sentences: &[Formula],
    ) -> Result<Option<AbstractStructure>, CoreError>;

    fn entails(&self, hypotheses: &[Formula], goal: &Formula) -> Result<bool, CoreError> {
        let mut all: Vec<Formula> = hypotheses.to_vec();
        all.push(Formula::not(goal.clone()));
        Ok(self.is_satisfiable(&all)?.is_none())
    }
}

// ---------------------------------------------------------------------------
// Boolean expressions and the DPLL backend
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum BExpr {
    Const(bool),
    Var(u32),
    Not(Rc<BExpr>),
    And(Vec<Rc<BExpr>>),
    Or(Vec<Rc<BExpr>>),
}

fn be_const(b: bool) -> Rc<BExpr> {
    Rc::new(BExpr::Const(b))
}

fn be_var(v: u32) -> Rc<BExpr> {
    Rc::new(BExpr::Var(v))
}

fn be_not(e: Rc<BExpr>) -> Rc<BExpr> {
    match &*e {
        BExpr::Const(b) => be_const(!b),
        BExpr::Not(inner) => inner.clone(),
        _ => Rc::new(BExpr::Not(e)),
    }
}

fn be_and(es: Vec<Rc<BExpr>>) -> Rc<BExpr> {
    let mut out = Vec::new();
    for e in es {
        match &*e {
            BExpr::Const(true) => {}
            BExpr::Const(false) => return be_const(false),
            BExpr::And(inner) => out.extend(inner.iter().cloned()),
            _ => out.push(e),
        }
    }
    match out.len() {
        0 => be_const(true),
        1 => out.pop().unwrap(),
        _ => Rc::new(BExpr::And(out)),
    }
}

fn be_or(es: Vec<Rc<BExpr>>) -> Rc<BExpr> {
    let mut out = Vec::new();
    for e in es {
        match &*e {
            BExpr::Const(false) => {}
            BExpr::Const(true) => return be_const(true),
            BExpr::Or(inner) => out.extend(inner.iter().cloned()),
            _ => out.push(e),
        }
    }
    match out.len() {
        0 => be_const(false),
        1 => out.pop().unwrap(),
        _ => Rc::new(BExpr::Or(out)),
    }
}

/// CNF builder with Tseitin encoding; DIMACS-style literals (`±(var+1)`).
struct Cnf {
    n_vars: u32,
    clauses: Vec<Vec<i32>>,
}

impl Cnf {
    fn new(n_vars: u32) -> Self {
        Cnf {
            n_vars,
            clauses: Vec::new(),
        }
    }

    fn fresh(&mut self) -> u32 {
        let v = self.n_vars;
        self.n_vars += 1;
        v
    }

    fn lit(v: u32, positive: bool) -> i32 {
        let x = v as i32 + 1;
        if positive {
            x
        } else {
            -x
        }
    }

    /// Returns a literal equivalent to `e`, adding defining clauses as needed.
    fn tseitin(&mut self, e: &Rc<BExpr>, cache: &mut HashMap<*const BExpr, i32>) -> i32 {
        match &**e {
            BExpr::Const(b) => {
                let v = self.fresh();
                self.clauses.push(vec![Cnf::lit(v, *b)]);
                Cnf::lit(v, true)
            }
            BExpr::Var(v) => Cnf::lit(*v, true),
            BExpr::Not(inner) => -self.tseitin(inner, cache),
            BExpr::And(parts) | BExpr::Or(parts) => {
                let key = Rc::as_ptr(e);
                if let Some(&l) = cache.get(&key) {
                    return l;
                }
                let lits: Vec<i32> = parts.iter().map(|p| self.tseitin(p, cache)).collect();
                let v = self.fresh();
                let out = Cnf::lit(v, true);
                if matches!(&**e, BExpr::And(_)) {
                    for &l in &lits {
                        self.clauses.push(vec![-out, l]);
                    }
                    let mut big: Vec<i32> = lits.iter().map(|&l| -l).collect();
                    big.push(out);
                    self.clauses.push(big);
                } else {
                    for &l in &lits {
                        self.clauses.push(vec![out, -l]);
                    }
                    let mut big = lits;
                    big.push(-out);
                    self.clauses.push(big);
                }
                cache.insert(key, out);
                out
            }
        }
    }

    /// Asserts `e`, keeping top-level conjunctions and literal disjunctions
    /// as plain clauses.
    fn assert(&mut self, e: &Rc<BExpr>, cache: &mut HashMap<*const BExpr, i32>) {
        match &**e {
            BExpr::Const(true) => {}
            BExpr::Const(false) => self.clauses.push(vec![]),
            BExpr::And(parts) => {
                for p in parts {
                    self.assert(p, cache);
                }
            }
            BExpr::Or(parts) => {
                let mut clause = Vec::with_capacity(parts.len());
                let mut flat = true;
                for p in parts {
                    match &**p {
                        BExpr::Var(v) => clause.push(Cnf::lit(*v, true)),
                        BExpr::Not(i) => {
                            if let BExpr::Var(v) = &**i {
                                clause.push(Cnf::lit(*v, false));
                            } else {
                                flat = false;
                                break;
                            }
                        }
                        _ => {
                            flat = false;
                            break;
                        }
                    }
                }
                if flat {
                    self.clauses.push(clause);
                } else {
                    let l = self.tseitin(e, cache);
                    self.clauses.push(vec![l]);
                }
            }
            _ => {
                let l = self.tseitin(e, cache);
                self.clauses.push(vec![l]);
            }
        }
    }
}

/// DPLL with occurrence-list unit propagation. Decisions branch only on
/// variables of not-yet-satisfied clauses (when every clause is satisfied
/// the residual variables default to false), taking the first such clause's
/// first open literal with its satisfying polarity first. Fixed orders keep
/// the first model, and with it the witness structure, deterministic.
fn dpll(
    n_vars: u32,
    n_input_vars: u32,
    fixed: &[i32],
    clause_groups: &[&[Vec<i32>]],
) -> Option<Vec<bool>> {
    const UNSET: i8 = 0;
    const TRUE: i8 = 1;
    const FALSE: i8 = -1;

    let clauses: Vec<&[i32]> = clause_groups
        .iter()
        .flat_map(|g| g.iter())
        .map(|c| c.as_slice())
        .collect();
    let n = n_vars as usize;
    // occurrence lists: clauses containing each variable (either sign)
    let mut occ: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (ci, clause) in clauses.iter().enumerate() {
        for &l in *clause {
            let v = (l.unsigned_abs() - 1) as usize;
            if occ[v].last() != Some(&(ci as u32)) {
                occ[v].push(ci as u32);
            }
        }
    }

    struct S<'a> {
        clauses: Vec<&'a [i32]>,
        occ: Vec<Vec<u32>>,
        assign: Vec<i8>,
        trail: Vec<u32>,
        n_input_vars: u32,
    }

    impl S<'_> {
        fn lit_val(&self, l: i32) -> i8 {
            let v = (l.unsigned_abs() - 1) as usize;
            let a = self.assign[v];
            if a == UNSET {
                UNSET
            } else if (l > 0) == (a == TRUE) {
                TRUE
            } else {
                FALSE
            }
        }

        fn set(&mut self, l: i32) {
            let v = (l.unsigned_abs() - 1) as usize;
            self.assign[v] = if l > 0 { TRUE } else { FALSE };
            self.trail.push(v as u32);
        }

        /// Propagates units starting from the assignments made since
        /// `from`; returns false on conflict.
        fn propagate(&mut self, mut from: usize) -> bool {
            while from < self.trail.len() {
                let v = self.trail[from] as usize;
                from += 1;
                for idx in 0..self.occ[v].len() {
                    let ci = self.occ[v][idx] as usize;
                    let clause = self.clauses[ci];
                    let mut unit = 0i32;
                    let mut open = 0u32;
                    let mut satisfied = false;
                    for &l in clause {
                        match self.lit_val(l) {
                            TRUE => {
                                satisfied = true;
                                break;
                            }
                            UNSET => {
                                open += 1;
                                unit = l;
                                if open > 1 {
                                    break;
                                }
                            }
                            _ => {}
                        }
                    }
                    if satisfied || open > 1 {
                        continue;
                    }
                    if open == 0 {
                        return false;
                    }
                    self.set(unit);
                }
            }
            true
        }

        /// An open literal of a not-yet-satisfied clause, preferring input
        /// variables (definition variables follow by propagation once the
        /// inputs they depend on are fixed).
        fn pick(&self) -> Option<i32> {
            let mut fallback: Option<i32> = None;
            for clause in &self.clauses {
                let mut open: Option<i32> = None;
                let mut open_input: Option<i32> = None;
                let mut satisfied = false;
                for &l in *clause {
                    match self.lit_val(l) {
                        TRUE => {
                            satisfied = true;
                            break;
                        }
                        UNSET => {
                            if open.is_none() {
                                open = Some(l);
                            }
                            if open_input.is_none() && l.unsigned_abs() - 1 < self.n_input_vars {
                                open_input = Some(l);
                            }
                        }
                        _ => {}
                    }
                }
                if !satisfied {
                    if let Some(l) = open_input {
                        return Some(l);
                    }
                    if fallback.is_none() {
                        fallback = open;
                    }
                }
            }
            fallback
        }

        fn all_satisfied(&self) -> bool {
            self.clauses
                .iter()
                .all(|c| c.iter().any(|&l| self.lit_val(l) == TRUE))
        }

        fn undo_to(&mut self, mark: usize) {
            while self.trail.len() > mark {
                let v = self.trail.pop().unwrap() as usize;
                self.assign[v] = UNSET;
            }
        }

        fn solve(&mut self, prop_from: usize) -> bool {
            if !self.propagate(prop_from) {
                return false;
            }
            let Some(l) = self.pick() else {
                return true; // every clause satisfied
            };
            let mark = self.trail.len();
            for lit in [l, -l] {
                self.set(lit);
                if self.solve(mark) {
                    return true;
                }
                self.undo_to(mark);
            }
            false
        }
    }

    // preload the context's fixed literals, then top-level units
    let mut s = S {
        clauses,
        occ,
        assign: vec![UNSET; n],
        trail: Vec::new(),
        n_input_vars,
    };
    for &l in fixed {
        match s.lit_val(l) {
            FALSE => return None,
            UNSET => s.set(l),
            _ => {}
        }
    }
    for ci in 0..s.clauses.len() {
        let clause = s.clauses[ci];
        if clause.is_empty() {
            return None;
        }
        if clause.len() == 1 {
            match s.lit_val(clause[0]) {
                FALSE => return None,
                UNSET => s.set(clause[0]),
                _ => {}
            }
        }
    }
    if s.solve(0) {
        Some(s.assign.iter().map(|&v| v == TRUE).collect())
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// The oracle proper
// ---------------------------------------------------------------------------

/// Counters for one oracle instance.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleStats {
    pub queries: u64,
    pub memo_hits: u64,
    pub solver_calls: u64,
}

/// One recorded satisfiability query, for trace replay: the query is the
/// first `context_len` context formulas plus the extras. Entailment checks
/// are recorded as the satisfiability of hypotheses plus negated goal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub context_len: usize,
    pub extras: Vec<Formula>,
    pub satisfiable: bool,
}

/// Memoising satisfiability oracle over a fixed symbol universe.
pub struct Oracle {
    universe: Universe,
    memo: RefCell<HashMap<(usize, Vec<Formula>), Option<AbstractStructure>>>,
    /// Last verified result per extras set: an unsatisfiable answer stays
    /// unsatisfiable as the context grows, and a cached witness is revived
    /// by evaluating just the formulas added since it was found.
    reuse: RefCell<HashMap<Vec<Formula>, (usize, Option<AbstractStructure>)>>,
    /// Recently found witnesses with the context length they are verified
    /// for; evaluating them against a query's extras is far cheaper than a
    /// solver run and answers most satisfiable queries.
    pool: RefCell<Vec<(usize, AbstractStructure)>>,
    translations: RefCell<HashMap<Formula, Rc<BExpr>>>,
    context: RefCell<ContextState>,
    budget: Cell<Option<u64>>,
    stats: RefCell<OracleStats>,
    log: RefCell<Option<Vec<Transcript>>>,
    external: Option<Box<dyn ExternalOracle>>,
}

/// Incrementally translated background formulas (the growing universal
/// part): each pushed formula is compiled to clauses once and shared by all
/// subsequent queries.
#[derive(Default)]
struct ContextState {
    formulas: Vec<Formula>,
    /// Context clauses, reduced under `fixed`: satisfied clauses removed,
    /// false literals dropped.
    clauses: Vec<Vec<i32>>,
    /// Literals forced by the context alone (unit propagation closure),
    /// preloaded into every query.
    fixed: Vec<i32>,
    /// The context itself became contradictory.
    conflict: bool,
    n_vars: u32,
    /// The structural base clauses (colour existence and constant
    /// selectors), shared by context-free queries.
    base_clauses: Vec<Vec<i32>>,
    base_vars: u32,
}

/// Unit-propagates `new_clauses` against the current reduction state,
/// extending `fixed` and producing the surviving shortened clauses.
fn reduce_context(ctx: &mut ContextState, new_clauses: Vec<Vec<i32>>) {
    if ctx.conflict {
        return;
    }
    let mut work: Vec<Vec<i32>> = std::mem::take(&mut ctx.clauses);
    work.extend(new_clauses);
    let mut assigned: std::collections::HashMap<u32, bool> = ctx
        .fixed
        .iter()
        .map(|&l| (l.unsigned_abs() - 1, l > 0))
        .collect();
    loop {
        let mut changed = false;
        let mut kept: Vec<Vec<i32>> = Vec::with_capacity(work.len());
        for clause in work.drain(..) {
            let mut reduced: Vec<i32> = Vec::with_capacity(clause.len());
            let mut satisfied = false;
            for &l in &clause {
                match assigned.get(&(l.unsigned_abs() - 1)) {
                    Some(&v) if v == (l > 0) => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => reduced.push(l),
                }
            }
            if satisfied {
                continue;
            }
            match reduced.len() {
                0 => {
                    ctx.conflict = true;
                    ctx.clauses = vec![vec![]];
                    return;
                }
                1 => {
                    let l = reduced[0];
                    let v = l.unsigned_abs() - 1;
                    match assigned.get(&v) {
                        Some(&old) if old != (l > 0) => {
                            ctx.conflict = true;
                            ctx.clauses = vec![vec![]];
                            return;
                        }
                        Some(_) => {}
                        None => {
                            assigned.insert(v, l > 0);
                            ctx.fixed.push(l);
                            changed = true;
                        }
                    }
                }
                _ => kept.push(reduced),
            }
        }
        work = kept;
        if !changed {
            break;
        }
    }
    ctx.clauses = work;
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("universe", &self.universe)
            .field("stats", &self.stats.borrow())
            .finish()
    }
}

const MAX_ORACLE_PREDICATES: usize = 10;


impl Oracle {
    pub fn new(universe: Universe) -> Self {
        Oracle {
            universe,
            memo: RefCell::new(HashMap::new()),
            translations: RefCell::new(HashMap::new()),
            reuse: RefCell::new(HashMap::new()),
            pool: RefCell::new(Vec::new()),
            context: RefCell::new(ContextState::default()),
            budget: Cell::new(None),
            stats: RefCell::new(OracleStats::default()),
            log: RefCell::new(None),
            external: None,
        }
    }

    /// Appends a closed sentence to the background context, translating it
    /// into persistent clauses. The context only grows; queries run against
    /// the full current context.
    pub fn push_context(&self, f: &Formula) -> Result<(), CoreError> {
        self.check_monadic(std::slice::from_ref(f))?;
        self.ensure_base_vars()?;
        let expr = self.translate(f)?;
        let mut ctx = self.context.borrow_mut();
        let mut cnf = Cnf::new(ctx.n_vars);
        let mut cache = HashMap::new();
        cnf.assert(&expr, &mut cache);
        ctx.n_vars = cnf.n_vars;
        reduce_context(&mut ctx, cnf.clauses);
        ctx.formulas.push(f.clone());
        Ok(())
    }

    /// Number of context formulas pushed so far.
    pub fn context_len(&self) -> usize {
        self.context.borrow().formulas.len()
    }

    pub fn context_formulas(&self) -> Vec<Formula> {
        self.context.borrow().formulas.clone()
    }

    /// Lays down the base variables and structural clauses (one realized
    /// colour, exactly-one constant selectors) on first use.
    fn ensure_base_vars(&self) -> Result<(), CoreError> {
        let n_preds = self.universe.preds.len();
        if n_preds > MAX_ORACLE_PREDICATES {
            return Err(CoreError::ResourceLimit(format!(
                "{n_preds} unary predicates exceed the oracle cap of {MAX_ORACLE_PREDICATES}"
            )));
        }
        let mut ctx = self.context.borrow_mut();
        if ctx.n_vars > 0 {
            return Ok(());
        }
        let n_colours = self.universe.n_colours() as u32;
        let n_props = self.universe.props.len() as u32;
        let n_consts = self.universe.consts.len() as u32;
        let mut cnf = Cnf::new(n_colours + n_props + n_consts * n_colours);
        cnf.clauses
            .push((0..n_colours).map(|c| Cnf::lit(c, true)).collect());
        for ci in 0..n_consts {
            let sel = |c: u32| n_colours + n_props + ci * n_colours + c;
            cnf.clauses
                .push((0..n_colours).map(|c| Cnf::lit(sel(c), true)).collect());
            for c1 in 0..n_colours {
                for c2 in (c1 + 1)..n_colours {
                    cnf.clauses
                        .push(vec![Cnf::lit(sel(c1), false), Cnf::lit(sel(c2), false)]);
                }
            }
            for c in 0..n_colours {
                cnf.clauses
                    .push(vec![Cnf::lit(sel(c), false), Cnf::lit(c, true)]);
            }
        }
        ctx.n_vars = cnf.n_vars;
        ctx.base_vars = cnf.n_vars;
        ctx.base_clauses = cnf.clauses.clone();
        ctx.clauses = cnf.clauses;
        Ok(())
    }

    /// Starts recording every query (including memoised repeats).
    pub fn enable_log(&self) {
        let mut log = self.log.borrow_mut();
        if log.is_none() {
            *log = Some(Vec::new());
        }
    }

    pub fn log_len(&self) -> usize {
        self.log.borrow().as_ref().map_or(0, |l| l.len())
    }

    /// The transcripts recorded since an earlier [`Oracle::log_len`] mark.
    pub fn log_since(&self, mark: usize) -> Vec<Transcript> {
        self.log
            .borrow()
            .as_ref()
            .map_or_else(Vec::new, |l| l[mark..].to_vec())
    }

    pub fn from_signature(sig: &Signature) -> Result<Self, CoreError> {
        Ok(Oracle::new(Universe::from_signature(sig)?))
    }

    /// An oracle whose universe is exactly the symbols of the given sentences.
    pub fn for_sentences<'a>(
        sentences: impl IntoIterator<Item = &'a Formula>,
    ) -> Result<Self, CoreError> {
        Ok(Oracle::new(Universe::from_sentences(sentences)?))
    }

    pub fn with_external(mut self, external: Box<dyn ExternalOracle>) -> Self {
        self.external = Some(external);
        self
    }

    pub fn set_budget(&self, budget: Option<u64>) {
        self.budget.set(budget);
    }

    pub fn stats(&self) -> OracleStats {
        *self.stats.borrow()
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// Decides satisfiability of the context plus the given closed
    /// sentences; returns a witness structure when satisfiable.
    pub fn is_satisfiable(
        &self,
        sentences: &[Formula],
    ) -> Result<Option<AbstractStructure>, CoreError> {
        self.stats.borrow_mut().queries += 1;
        let ctx_len = self.context_len();
        let mut extras: Vec<Formula> = sentences.to_vec();
        extras.sort();
        extras.dedup();
        let key = (ctx_len, extras);
        if let Some(hit) = self.memo.borrow().get(&key).cloned() {
            self.stats.borrow_mut().memo_hits += 1;
            if let Some(log) = self.log.borrow_mut().as_mut() {
                log.push(Transcript {
                    context_len: ctx_len,
                    extras: key.1.clone(),
                    satisfiable: hit.is_some(),
                });
            }
            return Ok(hit);
        }
        if let Some(revived) = self.try_reuse(ctx_len, &key.1)? {
            self.stats.borrow_mut().memo_hits += 1;
            self.memo.borrow_mut().insert(key.clone(), revived.clone());
            if let Some(log) = self.log.borrow_mut().as_mut() {
                log.push(Transcript {
                    context_len: ctx_len,
                    extras: key.1.clone(),
                    satisfiable: revived.is_some(),
                });
            }
            return Ok(revived);
        }
        if let Some(witness) = self.try_pool(ctx_len, &key.1)? {
            self.stats.borrow_mut().memo_hits += 1;
            let result = Some(witness);
            self.memo.borrow_mut().insert(key.clone(), result.clone());
            if let Some(log) = self.log.borrow_mut().as_mut() {
                log.push(Transcript {
                    context_len: ctx_len,
                    extras: key.1.clone(),
                    satisfiable: true,
                });
            }
            return Ok(result);
        }
        if let Some(b) = self.budget.get() {
            if b == 0 {
                return Err(CoreError::OracleBudget);
            }
            self.budget.set(Some(b - 1));
        }
        let result = self.solve_inner(&key.1, true)?;
        self.memo.borrow_mut().insert(key.clone(), result.clone());
        self.reuse
            .borrow_mut()
            .insert(key.1.clone(), (ctx_len, result.clone()));
        if let Some(w) = &result {
            let mut pool = self.pool.borrow_mut();
            pool.push((ctx_len, w.clone()));
            if pool.len() > 64 {
                pool.remove(0);
            }
        }
        if let Some(log) = self.log.borrow_mut().as_mut() {
            log.push(Transcript {
                context_len: ctx_len,
                extras: key.1,
                satisfiable: result.is_some(),
            });
        }
        Ok(result)
    }

    /// Entailment: `context ∪ hyps ⊨ goal` iff the context plus
    /// `hyps ∪ {¬goal}` is unsatisfiable.
    pub fn entails(&self, hyps: &[Formula], goal: &Formula) -> Result<bool, CoreError> {
        let mut all: Vec<Formula> = hyps.to_vec();
        all.push(Formula::not(goal.clone()));
        Ok(self.is_satisfiable(&all)?.is_none())
    }

    /// Satisfiability ignoring the background context, for plain validity
    /// checks.
    pub fn is_satisfiable_plain(
        &self,
        sentences: &[Formula],
    ) -> Result<Option<AbstractStructure>, CoreError> {
        self.stats.borrow_mut().queries += 1;
        let mut extras: Vec<Formula> = sentences.to_vec();
        extras.sort();
        extras.dedup();
        let key = (usize::MAX, extras);
        if let Some(hit) = self.memo.borrow().get(&key).cloned() {
            self.stats.borrow_mut().memo_hits += 1;
            if let Some(log) = self.log.borrow_mut().as_mut() {
                log.push(Transcript {
                    context_len: usize::MAX,
                    extras: key.1.clone(),
                    satisfiable: hit.is_some(),
                });
            }
            return Ok(hit);
        }
        if let Some(b) = self.budget.get() {
            if b == 0 {
                return Err(CoreError::OracleBudget);
            }
            self.budget.set(Some(b - 1));
        }
        let result = self.solve_inner(&key.1, false)?;
        self.memo.borrow_mut().insert(key.clone(), result.clone());
        if let Some(log) = self.log.borrow_mut().as_mut() {
            log.push(Transcript {
                context_len: usize::MAX,
                extras: key.1,
                satisfiable: result.is_some(),
            });
        }
        Ok(result)
    }

    /// Entailment ignoring the background context.
    pub fn entails_plain(&self, hyps: &[Formula], goal: &Formula) -> Result<bool, CoreError> {
        let mut all: Vec<Formula> = hyps.to_vec();
        all.push(Formula::not(goal.clone()));
        Ok(self.is_satisfiable_plain(&all)?.is_none())
    }

    /// Validity of a single sentence.
    pub fn is_valid(&self, f: &Formula) -> Result<bool, CoreError> {
        self.entails(&[], f)
    }

    /// Revives an earlier answer for the same extras at a smaller context:
    /// unsatisfiability persists, and a witness is checked against the
    /// formulas pushed since.
    fn try_reuse(
        &self,
        ctx_len: usize,
        extras: &[Formula],
    ) -> Result<Option<Option<AbstractStructure>>, CoreError> {
        let cached = self.reuse.borrow().get(extras).cloned();
        let Some((seen_len, result)) = cached else {
            return Ok(None);
        };
        if seen_len > ctx_len {
            return Ok(None);
        }
        match result {
            None => Ok(Some(None)),
            Some(w) => {
                let ctx = self.context.borrow();
                for f in &ctx.formulas[seen_len..ctx_len] {
                    if !w.evaluate(f)? {
                        return Ok(None);
                    }
                }
                drop(ctx);
                self.reuse
                    .borrow_mut()
                    .insert(extras.to_vec(), (ctx_len, Some(w.clone())));
                Ok(Some(Some(w)))
            }
        }
    }

    /// Looks for a pooled witness satisfying the current context and the
    /// extras; pool entries are re-verified incrementally as the context
    /// grows and evicted when they stop satisfying it.
    fn try_pool(
        &self,
        ctx_len: usize,
        extras: &[Formula],
    ) -> Result<Option<AbstractStructure>, CoreError> {
        if self.check_monadic(extras).is_err() {
            return Ok(None);
        }
        let entries = self.pool.borrow().clone();
        let mut keep: Vec<(usize, AbstractStructure)> = Vec::with_capacity(entries.len());
        let mut found = None;
        let ctx = self.context.borrow();
        for (seen_len, w) in entries.into_iter().rev() {
            if found.is_some() {
                keep.push((seen_len, w));
                continue;
            }
            if seen_len > ctx_len {
                keep.push((seen_len, w));
                continue;
            }
            let mut ok = true;
            for f in &ctx.formulas[seen_len..ctx_len] {
                if !w.evaluate(f)? {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue; // evict
            }
            let mut sat = true;
            for e in extras {
                if !w.evaluate(e)? {
                    sat = false;
                    break;
                }
            }
            if sat {
                found = Some(w.clone());
            }
            keep.push((ctx_len, w));
        }
        drop(ctx);
        keep.reverse();
        *self.pool.borrow_mut() = keep;
        Ok(found)
    }

    fn check_monadic(&self, sentences: &[Formula]) -> Result<(), CoreError> {
        for s in sentences {
            let sig = s.signature()?;
            for (p, &a) in &sig.predicates {
                if a > 1 {
                    return Err(CoreError::UnsupportedFragment {
                        pred: p.to_string(),
                        arity: a,
                    });
                }
            }
            if s.has_temporal() {
                return Err(CoreError::Invalid(format!(
                    "temporal operator in oracle sentence: {s}"
                )));
            }
            if !s.is_closed() {
                return Err(CoreError::Invalid(format!(
                    "oracle sentence has free variables: {s}"
                )));
            }
        }
        Ok(())
    }

    fn solve_inner(
        &self,
        sentences: &[Formula],
        with_context: bool,
    ) -> Result<Option<AbstractStructure>, CoreError> {
        if let Err(e) = self.check_monadic(sentences) {
            if let (CoreError::UnsupportedFragment { .. }, Some(ext)) = (&e, &self.external) {
                let mut all = if with_context {
                    self.context_formulas()
                } else {
                    Vec::new()
                };
                all.extend_from_slice(sentences);
                return ext.is_satisfiable(&all);
            }
            return Err(e);
        }
        self.ensure_base_vars()?;
        self.stats.borrow_mut().solver_calls += 1;

        let n_colours = self.universe.n_colours() as u32;
        let n_props = self.universe.props.len() as u32;

        let ctx = self.context.borrow();
        if with_context && ctx.conflict {
            return Ok(None);
        }
        let mut cnf = Cnf::new(if with_context { ctx.n_vars } else { ctx.base_vars });
        let mut cache = HashMap::new();
        for s in sentences {
            let expr = self.translate(s)?;
            cnf.assert(&expr, &mut cache);
        }

        let (background, fixed): (&[Vec<i32>], &[i32]) = if with_context {
            (&ctx.clauses, &ctx.fixed)
        } else {
            (&ctx.base_clauses, &[])
        };
        let Some(model) = dpll(cnf.n_vars, ctx.base_vars, fixed, &[&cnf.clauses, background])
        else {
            return Ok(None);
        };
        drop(ctx);

        let realized: BTreeSet<Colour> = (0..n_colours).filter(|&c| model[c as usize]).collect();
        let props: BTreeMap<Name, bool> = self
            .universe
            .props
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), model[(n_colours + i as u32) as usize]))
            .collect();
        let mut constants = BTreeMap::new();
        for (ci, cname) in self.universe.consts.iter().enumerate() {
            let base = (n_colours + n_props + ci as u32 * n_colours) as usize;
            let colour = (0..n_colours as usize)
                .find(|&c| model[base + c])
                .expect("exactly-one constraint") as Colour;
            constants.insert(cname.clone(), colour);
        }
        Ok(Some(AbstractStructure {
            preds: self.universe.preds.clone(),
            realized,
            props,
            constants,
        }))
    }

    fn translate(&self, sentence: &Formula) -> Result<Rc<BExpr>, CoreError> {
        if let Some(hit) = self.translations.borrow().get(sentence) {
            return Ok(hit.clone());
        }
        let mut env = Vec::new();
        let expr = self.tr(sentence, &mut env)?;
        self.translations
            .borrow_mut()
            .insert(sentence.clone(), expr.clone());
        Ok(expr)
    }

    fn prop_var(&self, i: usize) -> u32 {
        self.universe.n_colours() as u32 + i as u32
    }

    fn const_sel_var(&self, ci: usize, c: Colour) -> u32 {
        (self.universe.n_colours() + self.universe.props.len()) as u32
            + (ci as u32) * self.universe.n_colours() as u32
            + c
    }

    fn tr(&self, f: &Formula, env: &mut Vec<(Name, Colour)>) -> Result<Rc<BExpr>, CoreError> {
        match f {
            Formula::True => Ok(be_const(true)),
            Formula::False => Ok(be_const(false)),
            Formula::Atom(p, ts) => match ts.len() {
                0 => {
                    let i = self
                        .universe
                        .prop_index(p)
                        .ok_or_else(|| CoreError::UnknownSymbol(p.to_string()))?;
                    Ok(be_var(self.prop_var(i)))
                }
                1 => {
                    let pi = self
                        .universe
                        .pred_index(p)
                        .ok_or_else(|| CoreError::UnknownSymbol(p.to_string()))?;
                    match &ts[0] {
                        Term::Var(v) => {
                            let colour = env
                                .iter()
                                .rev()
                                .find(|(n, _)| n == v)
                                .map(|(_, c)| *c)
                                .ok_or_else(|| CoreError::UnknownSymbol(v.to_string()))?;
                            Ok(be_const(colour & (1 << pi) != 0))
                        }
                        Term::Const(cn) => {
                            let ci = self
                                .universe
                                .const_index(cn)
                                .ok_or_else(|| CoreError::UnknownSymbol(cn.to_string()))?;
                            let picks = (0..self.universe.n_colours() as u32)
                                .filter(|c| c & (1 << pi) != 0)
                                .map(|c| be_var(self.const_sel_var(ci, c)))
                                .collect();
                            Ok(be_or(picks))
                        }
                    }
                }
                arity => Err(CoreError::UnsupportedFragment {
                    pred: p.to_string(),
                    arity,
                }),
            },
            Formula::Not(g) => Ok(be_not(self.tr(g, env)?)),
            Formula::And(fs) => Ok(be_and(
                fs.iter()
                    .map(|g| self.tr(g, env))
                    .collect::<Result<_, _>>()?,
            )),
            Formula::Or(fs) => Ok(be_or(
                fs.iter()
                    .map(|g| self.tr(g, env))
                    .collect::<Result<_, _>>()?,
            )),
            Formula::Implies(a, b) => {
                let ta = self.tr(a, env)?;
                let tb = self.tr(b, env)?;
                Ok(be_or(vec![be_not(ta), tb]))
            }
            Formula::Iff(a, b) => {
                let ta = self.tr(a, env)?;
                let tb = self.tr(b, env)?;
                Ok(be_and(vec![
                    be_or(vec![be_not(ta.clone()), tb.clone()]),
                    be_or(vec![be_not(tb), ta]),
                ]))
            }
            Formula::Forall(v, g) => {
                let mut parts = Vec::new();
                for c in 0..self.universe.n_colours() as u32 {
                    env.push((v.clone(), c));
                    let body = self.tr(g, env)?;
                    env.pop();
                    parts.push(be_or(vec![be_not(be_var(c)), body]));
                }
                Ok(be_and(parts))
            }
            Formula::Exists(v, g) => {
                let mut parts = Vec::new();
                for c in 0..self.universe.n_colours() as u32 {
                    env.push((v.clone(), c));
                    let body = self.tr(g, env)?;
                    env.pop();
                    parts.push(be_and(vec![be_var(c), body]));
                }
                Ok(be_or(parts))
            }
            other => Err(CoreError::Invalid(format!(
                "temporal operator in oracle sentence: {other}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_formula;

    fn sat(sentences: &[&str]) -> Option<AbstractStructure> {
        let fs: Vec<Formula> = sentences
            .iter()
            .map(|s| parse_formula(s).unwrap())
            .collect();
        let oracle = Oracle::for_sentences(&fs).unwrap();
        oracle.is_satisfiable(&fs).unwrap()
    }

    #[test]
    fn direct_contradiction_unsat() {
        assert!(sat(&["exists x. P(x)", "forall x. ~P(x)"]).is_none());
    }

    #[test]
    fn mixed_colour_structure_found() {
        let w = sat(&[
            "l -> exists x. P(x)",
            "(exists x. ~P(x)) & (forall y. ~P(y)) & ~l",
        ]);
        assert!(w.is_some());
        // suitability failure: U & exists x (F_g2 & B_g1) with F_g2 = ~P, B_g1 = P
        assert!(sat(&["l -> exists x. P(x)", "exists x. (~P(x) & P(x))"]).is_none());
    }

    #[test]
    fn constant_colour_lookup() {
        let w = sat(&["Q(c)"]).unwrap();
        assert_eq!(w.preds, vec![Name::new("Q")]);
        let colour = w.constants[&Name::new("c")];
        assert!(colour & 1 != 0);
        assert!(w.realized.contains(&colour));
        assert!(w.evaluate(&parse_formula("Q(c)").unwrap()).unwrap());
    }

    #[test]
    fn entailment_via_unsat() {
        let fs: Vec<Formula> = ["forall x. (B(x) -> A(x) & ~L(x))"]
            .iter()
            .map(|s| parse_formula(s).unwrap())
            .collect();
        let goal = parse_formula(
            "forall x. (B(x) & (exists y. B(y)) -> ~L(x) & A(x) & exists y. A(y))",
        )
        .unwrap();
        let mut all = fs.clone();
        all.push(goal.clone());
        let oracle = Oracle::for_sentences(&all).unwrap();
        assert!(oracle.entails(&fs, &goal).unwrap());
        // and a non-entailment
        let bad = parse_formula("forall x. B(x)").unwrap();
        assert!(!oracle.entails(&fs, &bad).unwrap());
    }

    #[test]
    fn evaluate_quantifies_over_realized_colours() {
        let s = AbstractStructure {
            preds: vec![Name::new("P")],
            realized: [1u32].into_iter().collect(),
            props: BTreeMap::new(),
            constants: BTreeMap::new(),
        };
        assert!(s
            .evaluate(&parse_formula("forall x. P(x)").unwrap())
            .unwrap());
        let s2 = AbstractStructure {
            preds: vec![Name::new("P")],
            realized: [0u32, 1u32].into_iter().collect(),
            props: BTreeMap::new(),
            constants: BTreeMap::new(),
        };
        assert!(!s2
            .evaluate(&parse_formula("forall x. P(x)").unwrap())
            .unwrap());
        assert!(s2
            .evaluate(&parse_formula("exists x. P(x)").unwrap())
            .unwrap());
    }

    #[test]
    fn nonmonadic_query_is_rejected() {
        let f = parse_formula("forall x. forall y. R(x, y)").unwrap();
        let oracle = Oracle::new(Universe::default());
        match oracle.is_satisfiable(std::slice::from_ref(&f)) {
            Err(CoreError::UnsupportedFragment { pred, arity }) => {
                assert_eq!(pred, "R");
                assert_eq!(arity, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn budget_is_enforced() {
        let f = parse_formula("exists x. P(x)").unwrap();
        let oracle = Oracle::for_sentences(&[f.clone()]).unwrap();
        oracle.set_budget(Some(1));
        assert!(oracle.is_satisfiable(std::slice::from_ref(&f)).is_ok());
        // memoised repeat does not consume budget
        assert!(oracle.is_satisfiable(std::slice::from_ref(&f)).is_ok());
        let g = parse_formula("forall x. P(x)").unwrap();
        match oracle.is_satisfiable(&[g]) {
            Err(CoreError::OracleBudget) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn witness_satisfies_query() {
        let qs = [
            "l -> exists x. P(x)",
            "(exists x. P(x)) & (exists x. ~P(x)) & l",
        ];
        let w = sat(&qs).unwrap();
        for q in qs {
            assert!(w.evaluate(&parse_formula(q).unwrap()).unwrap());
        }
    }
}
