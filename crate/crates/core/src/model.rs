//! Finite ultimately-periodic temporal structures and their evaluation,
//! used as the semantics-level oracle for the rest of the toolkit.
//!
//! A lasso model has `prefix_len + loop_len` explicit states; state `n`
//! beyond the end folds back into the loop, which is exact because the
//! future of a lasso position is periodic. Expanding-domain lassos carry a
//! non-decreasing per-state domain size, frozen on the loop (a strictly
//! growing domain has no finite presentation; adequate for testing).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::CoreError;
use crate::problem::{EventualityClause, Semantics, StepClause, TemporalProblem};
use crate::syntax::{Formula, Name, Term};

/// Variable assignment into domain-element indices.
pub type Assignment = BTreeMap<Name, usize>;

/// Interpretation of one state: the set of true ground tuples per predicate.
/// Propositions are represented by the empty tuple.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateInterp {
    pub atoms: BTreeMap<Name, BTreeSet<Vec<usize>>>,
}

impl StateInterp {
    pub fn holds(&self, pred: &Name, tuple: &[usize]) -> bool {
        self.atoms
            .get(pred)
            .map(|rows| rows.contains(tuple))
            .unwrap_or(false)
    }
}

/// An ultimately-periodic first-order temporal structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LassoModel {
    /// Names of the domain elements; indices are the element identities.
    pub elements: Vec<Name>,
    pub prefix_len: usize,
    /// Number of looping states, at least one.
    pub loop_len: usize,
    /// `|D_n|` per explicit state: the first `domain_sizes[n]` elements.
    /// All equal to the element count in constant semantics.
    pub domain_sizes: Vec<usize>,
    pub states: Vec<StateInterp>,
    /// Rigid constant interpretation, into `D_0`.
    pub constants: BTreeMap<Name, usize>,
    pub semantics: Semantics,
}

impl LassoModel {
    pub fn n_states(&self) -> usize {
        self.prefix_len + self.loop_len
    }

    /// Folds an arbitrary moment of time into an explicit state index.
    pub fn fold(&self, n: usize) -> usize {
        if n < self.n_states() {
            n
        } else {
            self.prefix_len + (n - self.prefix_len) % self.loop_len
        }
    }

    pub fn domain_at(&self, n: usize) -> usize {
        self.domain_sizes[self.fold(n)]
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.loop_len == 0 {
            return Err(CoreError::Invalid("a lasso needs at least one loop state".into()));
        }
        if self.states.len() != self.n_states() || self.domain_sizes.len() != self.n_states() {
            return Err(CoreError::Invalid(
                "state and domain-size lists must cover prefix plus loop".into(),
            ));
        }
        if self.elements.is_empty() {
            return Err(CoreError::Invalid("empty domain".into()));
        }
        match self.semantics {
            Semantics::Constant => {
                if self.domain_sizes.iter().any(|&d| d != self.elements.len()) {
                    return Err(CoreError::Invalid(
                        "constant-domain model must use the full domain at every state".into(),
                    ));
                }
            }
            Semantics::Expanding => {
                if self.domain_sizes.windows(2).any(|w| w[0] > w[1]) {
                    return Err(CoreError::Invalid("domains must be non-decreasing".into()));
                }
                let on_loop = &self.domain_sizes[self.prefix_len..];
                if on_loop.iter().any(|&d| d != self.elements.len()) {
                    return Err(CoreError::Invalid(
                        "the domain is frozen at full size on the loop".into(),
                    ));
                }
            }
        }
        if self.domain_sizes[0] == 0 {
            return Err(CoreError::Invalid("empty initial domain".into()));
        }
        for (c, &e) in &self.constants {
            if e >= self.domain_sizes[0] {
                return Err(CoreError::Invalid(format!(
                    "constant {c} must denote an element of the initial domain"
                )));
            }
        }
        for (n, st) in self.states.iter().enumerate() {
            for (p, rows) in &st.atoms {
                for row in rows {
                    if row.iter().any(|&e| e >= self.domain_sizes[n]) {
                        return Err(CoreError::Invalid(format!(
                            "state {n} interprets {p} outside its domain"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn term_elem(&self, t: &Term, env: &[(Name, usize)]) -> Result<usize, CoreError> {
        match t {
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, e)| *e)
                .ok_or_else(|| CoreError::UnknownSymbol(v.to_string())),
            Term::Const(c) => self
                .constants
                .get(c)
                .copied()
                .ok_or_else(|| CoreError::UnknownSymbol(c.to_string())),
        }
    }

    /// Truth of a formula at moment `n` under an assignment.
    ///
    /// In expanding semantics the assignment must map into `D_n`.
    pub fn eval(&self, n: usize, assignment: &Assignment, f: &Formula) -> Result<bool, CoreError> {
        let dn = self.domain_at(n);
        if let Some((v, _)) = assignment.iter().find(|(_, &e)| e >= dn) {
            return Err(CoreError::Invalid(format!(
                "assignment maps {v} outside the domain of state {n}"
            )));
        }
        let mut env: Vec<(Name, usize)> = assignment
            .iter()
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        self.eval_rec(self.fold(n), &mut env, f)
    }

    /// States whose futures cover all moments `>= n` (for box/diamond).
    fn reachable_states(&self, n: usize) -> Vec<usize> {
        let n = self.fold(n);
        if n < self.prefix_len {
            (n..self.n_states()).collect()
        } else {
            (self.prefix_len..self.n_states()).collect()
        }
    }

    fn eval_rec(
        &self,
        n: usize,
        env: &mut Vec<(Name, usize)>,
        f: &Formula,
    ) -> Result<bool, CoreError> {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Atom(p, ts) => {
                let tuple: Vec<usize> = ts
                    .iter()
                    .map(|t| self.term_elem(t, env))
                    .collect::<Result<_, _>>()?;
                Ok(self.states[n].holds(p, &tuple))
            }
            Formula::Not(g) => Ok(!self.eval_rec(n, env, g)?),
            Formula::And(fs) => {
                for g in fs {
                    if !self.eval_rec(n, env, g)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(fs) => {
                for g in fs {
                    if self.eval_rec(n, env, g)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Implies(a, b) => {
                Ok(!self.eval_rec(n, env, a)? || self.eval_rec(n, env, b)?)
            }
            Formula::Iff(a, b) => Ok(self.eval_rec(n, env, a)? == self.eval_rec(n, env, b)?),
            Formula::Forall(v, g) => {
                for e in 0..self.domain_sizes[n] {
                    env.push((v.clone(), e));
                    let ok = self.eval_rec(n, env, g)?;
                    env.pop();
                    if !ok {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Exists(v, g) => {
                for e in 0..self.domain_sizes[n] {
                    env.push((v.clone(), e));
                    let ok = self.eval_rec(n, env, g)?;
                    env.pop();
                    if ok {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Next(g) => self.eval_rec(self.fold(n + 1), env, g),
            Formula::Sometime(g) => {
                for m in self.reachable_states(n) {
                    if self.eval_rec(m, env, g)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Always(g) => {
                for m in self.reachable_states(n) {
                    if !self.eval_rec(m, env, g)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Until(a, b) => {
                // unfold to prefix plus two loop rounds; the first witness
                // for b, if any, occurs within one extra loop round
                let horizon = self.n_states() + self.loop_len;
                for m in n..horizon {
                    if self.eval_rec(self.fold(m), env, b)? {
                        return Ok(true);
                    }
                    if !self.eval_rec(self.fold(m), env, a)? {
                        return Ok(false);
                    }
                }
                Ok(false)
            }
            Formula::WeakUntil(a, b) => {
                let until = self.eval_rec(n, env, &Formula::until((**a).clone(), (**b).clone()))?;
                if until {
                    return Ok(true);
                }
                self.eval_rec(n, env, &Formula::always((**a).clone()))
            }
        }
    }
}

/// Which clause of a problem a model violates first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FailedClause {
    Initial(Formula),
    Universal(Formula, usize),
    Step(StepClause, usize),
    Eventuality(EventualityClause, usize, Name),
}

impl fmt::Display for FailedClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailedClause::Initial(g) => write!(f, "initial formula {g} fails at state 0"),
            FailedClause::Universal(g, n) => write!(f, "universal formula {g} fails at state {n}"),
            FailedClause::Step(sc, n) => write!(f, "step clause {sc} fails at state {n}"),
            FailedClause::Eventuality(ev, n, d) => {
                write!(f, "eventuality {ev} fails for {d} from state {n}")
            }
        }
    }
}

/// Checks the associated formula of a problem at state 0; `None` means the
/// model satisfies the problem, otherwise the first failing clause is named.
pub fn check_problem(
    model: &LassoModel,
    problem: &TemporalProblem,
) -> Result<Option<FailedClause>, CoreError> {
    model.validate()?;
    for c in &problem.signature.constants {
        if !model.constants.contains_key(c) {
            return Err(CoreError::UnknownSymbol(c.to_string()));
        }
    }
    let empty = Assignment::new();
    for g in &problem.initial {
        if !model.eval(0, &empty, g)? {
            return Ok(Some(FailedClause::Initial(g.clone())));
        }
    }
    for g in &problem.universal {
        for n in 0..model.n_states() {
            if !model.eval(n, &empty, g)? {
                return Ok(Some(FailedClause::Universal(g.clone(), n)));
            }
        }
    }
    let x = Name::new("x");
    for sc in &problem.step {
        let body = match sc {
            StepClause::Ground { lhs, rhs } => {
                Formula::implies(lhs.as_prop(), Formula::next(rhs.as_prop()))
            }
            StepClause::NonGround { lhs, rhs } => Formula::implies(
                lhs.applied(&Term::Var(x.clone())),
                Formula::next(rhs.applied(&Term::Var(x.clone()))),
            ),
        };
        for n in 0..model.n_states() {
            if sc.is_ground() {
                if !model.eval(n, &empty, &body)? {
                    return Ok(Some(FailedClause::Step(sc.clone(), n)));
                }
            } else {
                for e in 0..model.domain_sizes[n] {
                    let mut a = Assignment::new();
                    a.insert(x.clone(), e);
                    if !model.eval(n, &a, &body)? {
                        return Ok(Some(FailedClause::Step(sc.clone(), n)));
                    }
                }
            }
        }
    }
    for ev in &problem.eventuality {
        for n in 0..model.n_states() {
            match ev {
                EventualityClause::Ground(l) => {
                    let body = Formula::sometime(l.as_prop());
                    if !model.eval(n, &empty, &body)? {
                        return Ok(Some(FailedClause::Eventuality(
                            ev.clone(),
                            n,
                            Name::new("-"),
                        )));
                    }
                }
                EventualityClause::NonGround(l) => {
                    let body = Formula::sometime(l.applied(&Term::Var(x.clone())));
                    for e in 0..model.domain_sizes[n] {
                        let mut a = Assignment::new();
                        a.insert(x.clone(), e);
                        if !model.eval(n, &a, &body)? {
                            return Ok(Some(FailedClause::Eventuality(
                                ev.clone(),
                                n,
                                model.elements[e].clone(),
                            )));
                        }
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Search bounds for [`bounded_search`].
#[derive(Clone, Copy, Debug)]
pub struct SearchBounds {
    /// Maximal domain size.
    pub max_domain: usize,
    /// Maximal number of explicit states (prefix plus loop).
    pub max_states: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds {
            max_domain: 2,
            max_states: 3,
        }
    }
}

/// Exhaustive lasso-model search with element-symmetry reduction; a one-sided
/// satisfiability oracle. `None` means the bounded space is exhausted, with
/// no conclusion about unsatisfiability.
pub fn bounded_search(
    problem: &TemporalProblem,
    bounds: SearchBounds,
) -> Result<Option<LassoModel>, CoreError> {
    if bounds.max_domain == 0 || bounds.max_states == 0 {
        return Err(CoreError::Invalid("positive search bounds required".into()));
    }
    let consts: Vec<Name> = problem.constants().into_iter().collect();
    let preds: Vec<(Name, usize)> = problem
        .signature
        .predicates
        .iter()
        .map(|(n, &a)| (n.clone(), a))
        .collect();
    let all_unary = preds.iter().all(|(_, a)| *a <= 1);

    // constant assignments as restricted-growth strings: the first constant
    // takes element 0, each next constant an already-used element or the
    // next fresh one
    fn const_patterns(k: usize, max_elem: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        fn go(cur: &mut Vec<usize>, k: usize, max_elem: usize, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            let used = cur.iter().copied().max().map_or(0, |m| m + 1);
            for e in 0..=used.min(max_elem - 1) {
                cur.push(e);
                go(cur, k, max_elem, out);
                cur.pop();
            }
        }
        go(&mut Vec::new(), k, max_elem, &mut out);
        out
    }

    for domain in 1..=bounds.max_domain {
        let patterns = if consts.is_empty() {
            vec![vec![]]
        } else {
            const_patterns(consts.len(), domain)
        };
        for pattern in &patterns {
            let pinned = pattern.iter().copied().max().map_or(0, |m| m + 1);
            for total in 1..=bounds.max_states {
                for loop_len in 1..=total {
                    let prefix_len = total - loop_len;
                    // domain schedules
                    let schedules: Vec<Vec<usize>> = match problem.semantics {
                        Semantics::Constant => vec![vec![domain; total]],
                        Semantics::Expanding => {
                            let mut acc = vec![vec![]];
                            for n in 0..total {
                                let mut next = Vec::new();
                                for sched in &acc {
                                    let lo = sched.last().copied().unwrap_or(pinned.max(1));
                                    let hi = if n >= prefix_len { domain } else { domain };
                                    for d in lo..=hi {
                                        if n >= prefix_len && d != domain {
                                            continue; // frozen on the loop
                                        }
                                        let mut s = sched.clone();
                                        s.push(d);
                                        next.push(s);
                                    }
                                }
                                acc = next;
                            }
                            acc.into_iter()
                                .filter(|s| s[0] >= pinned.max(1) && s[total - 1] == domain)
                                .collect()
                        }
                    };
                    for schedule in schedules {
                        if let Some(m) = search_states(
                            problem, &preds, &consts, pattern, domain, prefix_len, loop_len,
                            &schedule, all_unary,
                        )? {
                            return Ok(Some(m));
                        }
                    }
                }
            }
        }
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn search_states(
    problem: &TemporalProblem,
    preds: &[(Name, usize)],
    consts: &[Name],
    pattern: &[usize],
    domain: usize,
    prefix_len: usize,
    loop_len: usize,
    schedule: &[usize],
    all_unary: bool,
) -> Result<Option<LassoModel>, CoreError> {
    let total = prefix_len + loop_len;
    // bits of one state's interpretation over domain size d
    let state_bits = |d: usize| -> Option<u32> {
        let mut bits = 0usize;
        for (_, a) in preds {
            bits += d.checked_pow(*a as u32)?;
        }
        (bits <= 24).then_some(bits as u32)
    };
    let Some(_) = state_bits(domain) else {
        return Err(CoreError::ResourceLimit(
            "interpretation space too large for bounded search".into(),
        ));
    };

    let interp_of = |mask: u64, d: usize| -> StateInterp {
        let mut atoms = BTreeMap::new();
        let mut bit = 0u32;
        for (p, a) in preds {
            let mut rows = BTreeSet::new();
            let n_tuples = d.pow(*a as u32);
            for t in 0..n_tuples {
                if mask & (1 << (bit + t as u32)) != 0 {
                    // decode tuple
                    let mut tuple = Vec::with_capacity(*a);
                    let mut rest = t;
                    for _ in 0..*a {
                        tuple.push(rest % d);
                        rest /= d;
                    }
                    rows.insert(tuple);
                }
            }
            bit += n_tuples as u32;
            if !rows.is_empty() {
                atoms.insert(p.clone(), rows);
            }
        }
        StateInterp { atoms }
    };

    let elements: Vec<Name> = (0..domain).map(|i| Name::new(format!("d{i}"))).collect();
    let constants: BTreeMap<Name, usize> = consts
        .iter()
        .zip(pattern)
        .map(|(c, &e)| (c.clone(), e))
        .collect();

    let mk_model = |states: &[StateInterp]| LassoModel {
        elements: elements.clone(),
        prefix_len,
        loop_len,
        domain_sizes: schedule.to_vec(),
        states: states.to_vec(),
        constants: constants.clone(),
        semantics: problem.semantics,
    };

    // incremental checks: initial+universal at 0, universal at n, steps n-1->n
    let empty = Assignment::new();
    let x = Name::new("x");
    let step_ok = |m: &LassoModel, from: usize, to: usize| -> Result<bool, CoreError> {
        for sc in &problem.step {
            match sc {
                StepClause::Ground { lhs, rhs } => {
                    if m.eval(from, &empty, &lhs.as_prop())?
                        && !m.eval(to, &empty, &rhs.as_prop())?
                    {
                        return Ok(false);
                    }
                }
                StepClause::NonGround { lhs, rhs } => {
                    for e in 0..m.domain_sizes[from] {
                        let mut a = Assignment::new();
                        a.insert(x.clone(), e);
                        if m.eval(from, &a, &lhs.applied(&Term::Var(x.clone())))?
                            && !m.eval(to, &a, &rhs.applied(&Term::Var(x.clone())))?
                        {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    };

    // depth-first over per-state masks in ascending order
    let mut masks = vec![0u64; total];
    let mut states: Vec<StateInterp> = Vec::with_capacity(total);
    let mut level = 0usize;
    'outer: loop {
        if level == total {
            // close the lasso and check eventualities via the full validator
            let model = mk_model(&states);
            if step_ok(&model, total - 1, prefix_len)?
                && check_problem(&model, problem)?.is_none()
            {
                return Ok(Some(model));
            }
            // backtrack
            level -= 1;
            states.pop();
            masks[level] += 1;
        }
        loop {
            let d = schedule[level];
            let bits = state_bits(d).unwrap();
            if masks[level] >= (1u64 << bits) {
                // exhausted this level
                if level == 0 {
                    return Ok(None);
                }
                masks[level] = 0;
                level -= 1;
                states.pop();
                masks[level] += 1;
                continue;
            }
            let st = interp_of(masks[level], d);
            states.push(st);
            let model_so_far = mk_model(&pad(&states, total));
            // symmetry: in constant mode over unary signatures require
            // non-pinned elements sorted by their state-0 colour
            let sym_ok = if level == 0
                && all_unary
                && problem.semantics == Semantics::Constant
            {
                let pinned = pattern.iter().copied().max().map_or(0, |m| m + 1);
                let colour = |e: usize| -> u64 {
                    let mut c = 0u64;
                    for (i, (p, a)) in preds.iter().enumerate() {
                        if *a == 1 && states[0].holds(p, &[e]) {
                            c |= 1 << i;
                        }
                    }
                    c
                };
                (pinned.max(1)..domain).all(|e| e == 0 || colour(e - 1) <= colour(e))
                    || domain <= pinned.max(1)
            } else {
                true
            };
            let mut ok = sym_ok;
            if ok && level == 0 {
                for g in &problem.initial {
                    if !model_so_far.eval(0, &empty, g)? {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                for g in &problem.universal {
                    if !model_so_far.eval(level, &empty, g)? {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && level > 0 {
                ok = step_ok(&model_so_far, level - 1, level)?;
            }
            if ok {
                level += 1;
                continue 'outer;
            }
            states.pop();
            masks[level] += 1;
        }
    }
}

/// Pads a partial state vector with empty states for incremental evaluation.
fn pad(states: &[StateInterp], total: usize) -> Vec<StateInterp> {
    let mut out = states.to_vec();
    while out.len() < total {
        out.push(StateInterp::default());
    }
    out
}

// ---------------------------------------------------------------------------
// Model file format
// ---------------------------------------------------------------------------

impl fmt::Display for LassoModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "semantics {};", self.semantics)?;
        write!(f, "domain")?;
        for e in &self.elements {
            write!(f, " {e}")?;
        }
        writeln!(f, ";")?;
        if self.semantics == Semantics::Expanding {
            write!(f, "sizes")?;
            for d in &self.domain_sizes {
                write!(f, " {d}")?;
            }
            writeln!(f, ";")?;
        }
        writeln!(f, "prefix {};", self.prefix_len)?;
        for (c, &e) in &self.constants {
            writeln!(f, "constant {c} = {};", self.elements[e])?;
        }
        for (n, st) in self.states.iter().enumerate() {
            writeln!(f, "state {n} {{")?;
            for (p, rows) in &st.atoms {
                if rows.is_empty() {
                    continue;
                }
                if rows.iter().next().unwrap().is_empty() {
                    writeln!(f, "  {p};")?;
                    continue;
                }
                write!(f, "  {p}:")?;
                for row in rows {
                    if row.len() == 1 {
                        write!(f, " {}", self.elements[row[0]])?;
                    } else {
                        let parts: Vec<String> = row
                            .iter()
                            .map(|&e| self.elements[e].to_string())
                            .collect();
                        write!(f, " ({})", parts.join(", "))?;
                    }
                }
                writeln!(f, ";")?;
            }
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}

/// Parses the model file format produced by [`LassoModel`]'s display.
pub fn parse_model(text: &str) -> Result<LassoModel, CoreError> {
    // strip comments
    let cleaned: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n");
    let mut semantics = Semantics::Constant;
    let mut elements: Vec<Name> = Vec::new();
    let mut sizes: Option<Vec<usize>> = None;
    let mut prefix: Option<usize> = None;
    let mut constants: BTreeMap<Name, usize> = BTreeMap::new();
    let mut states: BTreeMap<usize, StateInterp> = BTreeMap::new();

    let err = |msg: &str| CoreError::Parse {
        line: 0,
        col: 0,
        msg: msg.to_string(),
    };
    let elem_index = |elements: &[Name], name: &str| -> Result<usize, CoreError> {
        elements
            .iter()
            .position(|e| e.as_str() == name)
            .ok_or_else(|| CoreError::UnknownSymbol(name.to_string()))
    };

    let mut rest = cleaned.trim();
    while !rest.is_empty() {
        let (stmt, tail) = match rest.find(|c| c == ';' || c == '{') {
            Some(i) if rest.as_bytes()[i] == b';' => {
                let (s, t) = rest.split_at(i);
                (s.trim(), t[1..].trim_start())
            }
            Some(i) => {
                // a state block: up to the matching '}'
                let close = rest[i..]
                    .find('}')
                    .ok_or_else(|| err("unterminated state block"))?;
                let (s, t) = rest.split_at(i + close + 1);
                (s.trim(), t.trim_start())
            }
            None => (rest.trim(), ""),
        };
        rest = tail;
        if stmt.is_empty() {
            continue;
        }
        let words: Vec<&str> = stmt.split_whitespace().collect();
        match words[0] {
            "semantics" => {
                semantics = match words.get(1).copied() {
                    Some("constant") => Semantics::Constant,
                    Some("expanding") => Semantics::Expanding,
                    _ => return Err(err("semantics must be constant or expanding")),
                };
            }
            "domain" => {
                elements = words[1..].iter().map(|w| Name::new(*w)).collect();
            }
            "sizes" => {
                sizes = Some(
                    words[1..]
                        .iter()
                        .map(|w| w.parse::<usize>().map_err(|_| err("bad size")))
                        .collect::<Result<_, _>>()?,
                );
            }
            "prefix" => {
                prefix = Some(
                    words
                        .get(1)
                        .ok_or_else(|| err("prefix needs a number"))?
                        .parse()
                        .map_err(|_| err("bad prefix"))?,
                );
            }
            "constant" => {
                // constant c = elem
                if words.len() != 4 || words[2] != "=" {
                    return Err(err("constant syntax: constant c = element"));
                }
                let e = elem_index(&elements, words[3])?;
                constants.insert(Name::new(words[1]), e);
            }
            "state" => {
                let idx: usize = words
                    .get(1)
                    .ok_or_else(|| err("state needs an index"))?
                    .parse()
                    .map_err(|_| err("bad state index"))?;
                let body_start = stmt.find('{').ok_or_else(|| err("state needs a block"))?;
                let body = &stmt[body_start + 1..stmt.len() - 1];
                let mut interp = StateInterp::default();
                for entry in body.split(';') {
                    let entry = entry.trim();
                    if entry.is_empty() {
                        continue;
                    }
                    match entry.split_once(':') {
                        None => {
                            // bare proposition
                            interp
                                .atoms
                                .entry(Name::new(entry))
                                .or_default()
                                .insert(vec![]);
                        }
                        Some((pred, args)) => {
                            let pred = Name::new(pred.trim());
                            let rows = interp.atoms.entry(pred).or_default();
                            let args = args.trim();
                            if args.contains('(') {
                                for tup in args.split(')') {
                                    let tup = tup.trim().trim_start_matches('(').trim();
                                    if tup.is_empty() {
                                        continue;
                                    }
                                    let row: Vec<usize> = tup
                                        .split(',')
                                        .map(|e| elem_index(&elements, e.trim()))
                                        .collect::<Result<_, _>>()?;
                                    rows.insert(row);
                                }
                            } else {
                                for e in args.split_whitespace() {
                                    rows.insert(vec![elem_index(&elements, e)?]);
                                }
                            }
                        }
                    }
                }
                states.insert(idx, interp);
            }
            other => return Err(err(&format!("unknown directive {other}"))),
        }
    }

    let n_states = states.len();
    if n_states == 0 {
        return Err(err("a model needs at least one state"));
    }
    for i in 0..n_states {
        if !states.contains_key(&i) {
            return Err(err(&format!("missing state {i}")));
        }
    }
    let prefix_len = prefix.unwrap_or(0);
    if prefix_len >= n_states {
        return Err(err("prefix must leave at least one loop state"));
    }
    let domain_sizes = match sizes {
        Some(s) => s,
        None => vec![elements.len(); n_states],
    };
    let model = LassoModel {
        elements,
        prefix_len,
        loop_len: n_states - prefix_len,
        domain_sizes,
        states: states.into_values().collect(),
        constants,
        semantics,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_formula, parse_problem};

    fn single_state_all_p() -> LassoModel {
        let mut st = StateInterp::default();
        st.atoms
            .insert(Name::new("P"), [vec![0], vec![1]].into_iter().collect());
        LassoModel {
            elements: vec![Name::new("d0"), Name::new("d1")],
            prefix_len: 0,
            loop_len: 1,
            domain_sizes: vec![2],
            states: vec![st],
            constants: BTreeMap::new(),
            semantics: Semantics::Constant,
        }
    }

    #[test]
    fn always_forall_in_trivial_loop() {
        let m = single_state_all_p();
        let f = parse_formula("always (forall x. P(x))").unwrap();
        assert!(m.eval(0, &Assignment::new(), &f).unwrap());
    }

    #[test]
    fn alternating_loop_discriminates_box_and_diamond() {
        // two-state loop: P(d0) at state 0, ~P(d0) at state 1
        let mut s0 = StateInterp::default();
        s0.atoms.insert(Name::new("P"), [vec![0]].into_iter().collect());
        let s1 = StateInterp::default();
        let m = LassoModel {
            elements: vec![Name::new("d0")],
            prefix_len: 0,
            loop_len: 2,
            domain_sizes: vec![1, 1],
            states: vec![s0, s1],
            constants: BTreeMap::new(),
            semantics: Semantics::Constant,
        };
        let sometime_not = parse_formula("exists x. sometime ~P(x)").unwrap();
        let always_p = parse_formula("forall x. always P(x)").unwrap();
        assert!(m.eval(0, &Assignment::new(), &sometime_not).unwrap());
        assert!(!m.eval(0, &Assignment::new(), &always_p).unwrap());
    }

    #[test]
    fn until_requires_left_up_to_witness() {
        // states: 0 -> 1 -> loop(2); phi = P, psi = Q true at state 2 only
        let mk = |p_at: &[usize], q_at: &[usize]| {
            let mut states = Vec::new();
            for n in 0..3 {
                let mut st = StateInterp::default();
                if p_at.contains(&n) {
                    st.atoms.insert(Name::new("p"), [vec![]].into_iter().collect());
                }
                if q_at.contains(&n) {
                    st.atoms.insert(Name::new("q"), [vec![]].into_iter().collect());
                }
                states.push(st);
            }
            LassoModel {
                elements: vec![Name::new("d0")],
                prefix_len: 2,
                loop_len: 1,
                domain_sizes: vec![1, 1, 1],
                states,
                constants: BTreeMap::new(),
                semantics: Semantics::Constant,
            }
        };
        let until = parse_formula("p until q").unwrap();
        // p on [0,2), q at 2: holds
        assert!(mk(&[0, 1], &[2]).eval(0, &Assignment::new(), &until).unwrap());
        // gap in p before the witness: fails; this discriminates the correct
        // side condition ("p at every i in [n, m)") from misreading it as a
        // condition on the witness state m
        assert!(!mk(&[0], &[2]).eval(0, &Assignment::new(), &until).unwrap());
        // witness immediately: left side irrelevant
        assert!(mk(&[], &[0]).eval(0, &Assignment::new(), &until).unwrap());
    }

    #[test]
    fn weak_until_is_until_or_always() {
        let models = [
            // p forever, no q
            (vec![0usize, 1, 2], vec![]),
            // p up to q
            (vec![0], vec![1]),
            // neither
            (vec![0], vec![]),
        ];
        for (p_at, q_at) in models {
            let mut states = Vec::new();
            for n in 0..3usize {
                let mut st = StateInterp::default();
                if p_at.contains(&n) {
                    st.atoms.insert(Name::new("p"), [vec![]].into_iter().collect());
                }
                if q_at.contains(&n) {
                    st.atoms.insert(Name::new("q"), [vec![]].into_iter().collect());
                }
                states.push(st);
            }
            let m = LassoModel {
                elements: vec![Name::new("d0")],
                prefix_len: 2,
                loop_len: 1,
                domain_sizes: vec![1, 1, 1],
                states,
                constants: BTreeMap::new(),
                semantics: Semantics::Constant,
            };
            let w = parse_formula("p unless q").unwrap();
            let u = parse_formula("p until q").unwrap();
            let box_p = parse_formula("always p").unwrap();
            let a = Assignment::new();
            for n in 0..3 {
                let expect = m.eval(n, &a, &u).unwrap() || m.eval(n, &a, &box_p).unwrap();
                assert_eq!(m.eval(n, &a, &w).unwrap(), expect);
            }
        }
    }

    #[test]
    fn expanding_assignment_must_stay_in_domain() {
        let mut s0 = StateInterp::default();
        s0.atoms.insert(Name::new("P"), [vec![0]].into_iter().collect());
        let mut s1 = StateInterp::default();
        s1.atoms.insert(Name::new("P"), [vec![0]].into_iter().collect());
        let m = LassoModel {
            elements: vec![Name::new("d0"), Name::new("d1")],
            prefix_len: 1,
            loop_len: 1,
            domain_sizes: vec![1, 2],
            states: vec![s0, s1],
            constants: BTreeMap::new(),
            semantics: Semantics::Expanding,
        };
        m.validate().unwrap();
        let f = parse_formula("P(c)").unwrap();
        let mut a = Assignment::new();
        a.insert(Name::new("v"), 1);
        // d1 is not in D_0
        assert!(m.eval(0, &a, &f).is_err());
        assert!(m.eval(1, &a, &parse_formula("true").unwrap()).is_ok());
        // quantification at state 0 ranges over one element only
        let all = parse_formula("forall x. P(x)").unwrap();
        assert!(m.eval(0, &Assignment::new(), &all).unwrap());
        let some_not = parse_formula("exists x. ~P(x)").unwrap();
        assert!(m.eval(1, &Assignment::new(), &some_not).unwrap());
    }

    #[test]
    fn expanding_witness_for_growing_domain_problem() {
        // forall x P(x) & always forall x (P(x) -> next P(x))
        //   & sometime exists y ~P(y): satisfiable with an expanding domain
        let p = parse_problem(
            "
            initial { forall x. P(x); g; }
            universal { e -> exists y. ~P(y); g & ~e -> w; r -> e | w; }
            step { P(x) => next P(x); w => next r; }
            eventuality { sometime ~w; }
            ",
            Semantics::Expanding,
        )
        .unwrap();
        let found = bounded_search(&p, SearchBounds::default()).unwrap();
        let m = found.expect("expanding witness exists");
        assert!(check_problem(&m, &p).unwrap().is_none());
        assert_eq!(m.semantics, Semantics::Expanding);
        // genuinely expanding: some state has fewer elements than the last
        assert!(m.domain_sizes[0] < *m.domain_sizes.last().unwrap());

        // the same problem over constant domains has no such small model
        let mut pc = p.clone();
        pc.semantics = Semantics::Constant;
        assert!(bounded_search(&pc, SearchBounds::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn trivially_satisfiable_problem_has_tiny_model() {
        let p = parse_problem("initial { p; }", Semantics::Constant).unwrap();
        let m = bounded_search(
            &p,
            SearchBounds {
                max_domain: 1,
                max_states: 1,
            },
        )
        .unwrap()
        .expect("model found");
        assert!(check_problem(&m, &p).unwrap().is_none());
    }

    #[test]
    fn failing_clause_is_reported() {
        let p = parse_problem("universal { false; }", Semantics::Constant).unwrap();
        let m = single_state_all_p();
        match check_problem(&m, &p).unwrap() {
            Some(FailedClause::Universal(f, 0)) => assert_eq!(f, Formula::False),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let p = parse_problem(
            "
            initial { forall x. P(x); g; }
            universal { e -> exists y. ~P(y); g & ~e -> w; r -> e | w; }
            step { P(x) => next P(x); w => next r; }
            eventuality { sometime ~w; }
            ",
            Semantics::Expanding,
        )
        .unwrap();
        let m = bounded_search(&p, SearchBounds::default()).unwrap().unwrap();
        let printed = m.to_string();
        let parsed = parse_model(&printed).unwrap();
        assert_eq!(parsed, m);
    }

    #[test]
    fn loop_unrolling_preserves_evaluation() {
        let p = parse_problem(
            "
            initial { q; }
            step { q => next q; P(x) => next ~P(x); ~P(x) => next P(x); }
            eventuality { sometime ~P(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let m = bounded_search(&p, SearchBounds::default()).unwrap().unwrap();
        // unroll the loop once
        let mut unrolled = m.clone();
        for i in 0..m.loop_len {
            unrolled.states.push(m.states[m.prefix_len + i].clone());
            unrolled
                .domain_sizes
                .push(m.domain_sizes[m.prefix_len + i]);
        }
        unrolled.prefix_len += m.loop_len;
        unrolled.validate().unwrap();
        let formulas = [
            "always (exists x. sometime ~P(x))",
            "q until q",
            "(forall x. P(x)) unless q",
            "next next q",
            "sometime always q",
        ];
        for text in formulas {
            let f = parse_formula(text).unwrap();
            for n in 0..m.n_states() {
                assert_eq!(
                    m.eval(n, &Assignment::new(), &f).unwrap(),
                    unrolled.eval(n, &Assignment::new(), &f).unwrap(),
                    "disagreement on {text} at state {n}"
                );
            }
        }
    }
}
