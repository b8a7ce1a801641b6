//! The clausal temporal resolution engine: step resolution, eventuality
//! resolution on loops found by the breadth-first search, and the
//! termination rules, applied round-robin until a contradiction or
//! saturation.
//!
//! A derivation only ever grows the universal part; the initial, step and
//! eventuality parts stay fixed. Every rule application carries the oracle
//! transcripts of its side conditions, so a trace can be replayed against a
//! fresh oracle.

use std::fmt;

use crate::clauses::{ClauseEngine, FullMergedClause, MergedClause};
use crate::dsnf::flood_constants;
use crate::error::CoreError;
use crate::loopsearch::{LoopResult, LoopSearcher};
use crate::oracle::{Oracle, OracleStats, Transcript};
use crate::problem::{EventualityClause, TemporalProblem};
use crate::syntax::{Formula, Term};

/// Which inference rule a derivation step applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleTag {
    StepRes,
    InitTerm,
    EvRes,
    EvTerm,
    GroundEvRes,
    GroundEvTerm,
}

impl fmt::Display for RuleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleTag::StepRes => "step_resolution",
            RuleTag::InitTerm => "initial_termination",
            RuleTag::EvRes => "eventuality_resolution",
            RuleTag::EvTerm => "eventuality_termination",
            RuleTag::GroundEvRes => "ground_eventuality_resolution",
            RuleTag::GroundEvTerm => "ground_eventuality_termination",
        };
        f.write_str(s)
    }
}

/// One applied rule with its premises, conclusion and side-condition
/// transcripts.
#[derive(Clone, Debug)]
pub struct RuleApplication {
    pub rule: RuleTag,
    /// Premise of step resolution.
    pub merged_premise: Option<MergedClause>,
    /// Premise clauses of (ground) eventuality resolution.
    pub loop_clauses: Vec<FullMergedClause>,
    /// The eventuality the rule was applied to.
    pub eventuality: Option<EventualityClause>,
    /// The loop formula of an eventuality resolution.
    pub loop_formula: Option<Formula>,
    /// The equivalent induction-rule reading of an eventuality resolution:
    /// `forall x (H(x) -> next always ~L(x))`.
    pub induction_form: Option<Formula>,
    /// What was added to the universal part; `None` for terminations.
    pub conclusion: Option<Formula>,
    /// Oracle-verified simplification of the conclusion, for display only.
    pub simplified: Option<Formula>,
    pub transcripts: Vec<Transcript>,
}

/// Final state of a derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Unsatisfiable,
    Saturated,
    ResourceLimit(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Unsatisfiable => f.write_str("unsatisfiable"),
            Verdict::Saturated => f.write_str("saturated"),
            Verdict::ResourceLimit(what) => write!(f, "resource limit: {what}"),
        }
    }
}

/// A completed derivation: the (flooded) problem, the growing universal
/// part, the applied rules, and the verdict.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub problem: TemporalProblem,
    pub initial_universal: Vec<Formula>,
    pub universal: Vec<Formula>,
    pub steps: Vec<RuleApplication>,
    pub verdict: Verdict,
    pub oracle_stats: OracleStats,
}

/// Knobs for the strategy loop.
#[derive(Clone, Debug)]
pub struct ProverConfig {
    /// Apply constant flooding before proving (the completeness discipline).
    pub flood: bool,
    /// Cap on strategy rounds.
    pub max_rounds: usize,
    /// Oracle call budget, if any.
    pub oracle_budget: Option<u64>,
    /// Also saturate over merges of derived clauses from single step
    /// clauses and ground originals, beyond the canonical candidates.
    pub arbitrary_merges: bool,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            flood: true,
            max_rounds: 500,
            oracle_budget: None,
            arbitrary_merges: false,
        }
    }
}

/// Runs the resolution strategy on a normal-form problem.
pub fn prove(problem: &TemporalProblem, config: &ProverConfig) -> Result<Derivation, CoreError> {
    problem.validate()?;
    let (flooded, _ledger) = if config.flood {
        flood_constants(problem)?
    } else {
        (problem.clone(), Default::default())
    };
    let oracle = Oracle::from_signature(&flooded.signature)?;
    oracle.enable_log();
    oracle.set_budget(config.oracle_budget);
    let engine = ClauseEngine::new(&flooded);

    let mut merged_candidates = engine.canonical_merged_candidates();
    let full_candidates = engine.canonical_full_candidates();
    if config.arbitrary_merges {
        merged_candidates = with_arbitrary_merges(&flooded, merged_candidates)?;
    }

    // the universal part lives in the oracle's background context
    for f in flooded.universal.iter() {
        oracle.push_context(f)?;
    }
    let mut state = ProverState {
        problem: &flooded,
        oracle: &oracle,
        merged_candidates: &merged_candidates,
        full_candidates: &full_candidates,
        universal: flooded.universal_vec(),
        steps: Vec::new(),
        step_fired: vec![false; merged_candidates.len()],
        step_checked_at: vec![usize::MAX; merged_candidates.len()],
    };

    let verdict = match state.run(config) {
        Ok(v) => v,
        Err(CoreError::OracleBudget) => Verdict::ResourceLimit("oracle budget".into()),
        Err(CoreError::ResourceLimit(what)) => Verdict::ResourceLimit(what),
        Err(e) => return Err(e),
    };
    Ok(Derivation {
        initial_universal: flooded.universal_vec(),
        universal: state.universal,
        steps: state.steps,
        verdict,
        oracle_stats: oracle.stats(),
        problem: flooded,
    })
}

/// Extends the candidate set with merges of the derived clauses of single
/// step clauses and the original ground clauses, for experimentation.
fn with_arbitrary_merges(
    problem: &TemporalProblem,
    mut candidates: Vec<MergedClause>,
) -> Result<Vec<MergedClause>, CoreError> {
    use crate::clauses::{derive_step_clauses, merge, DerivedStepClause, DerivedOrigin};
    let mut units: Vec<DerivedStepClause> = Vec::new();
    for sc in &problem.step {
        match sc {
            crate::problem::StepClause::NonGround { .. } => {
                units.extend(derive_step_clauses(problem, &[sc])?);
            }
            crate::problem::StepClause::Ground { lhs, rhs } => {
                units.push(DerivedStepClause {
                    lhs: lhs.as_prop(),
                    rhs: rhs.as_prop(),
                    origin: DerivedOrigin::OriginalGround,
                });
            }
        }
    }
    if units.len() >= 10 {
        return Err(CoreError::ResourceLimit(format!(
            "2^{} merge combinations exceed the experimentation cap",
            units.len()
        )));
    }
    for mask in 1usize..(1 << units.len()) {
        let subset: Vec<&DerivedStepClause> = units
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, d)| d)
            .collect();
        candidates.push(merge(subset));
    }
    candidates.sort();
    candidates.dedup();
    Ok(candidates)
}

struct ProverState<'a> {
    problem: &'a TemporalProblem,
    oracle: &'a Oracle,
    merged_candidates: &'a [MergedClause],
    full_candidates: &'a [FullMergedClause],
    universal: Vec<Formula>,
    steps: Vec<RuleApplication>,
    /// Step-resolution candidates whose conclusion is already in force.
    step_fired: Vec<bool>,
    /// Universal-part size at the last consistency check per candidate; the
    /// universal part only grows, so inconsistency is permanent and a
    /// consistent candidate needs re-checking only after the part grew.
    step_checked_at: Vec<usize>,
}

impl ProverState<'_> {
    fn record(&mut self, mark: usize, mut app: RuleApplication) {
        app.transcripts = self.oracle.log_since(mark);
        self.steps.push(app);
    }

    fn add_conclusion(&mut self, conclusion: Formula) -> Result<(), CoreError> {
        self.oracle.push_context(&conclusion)?;
        self.universal.push(conclusion);
        Ok(())
    }

    fn blank(rule: RuleTag) -> RuleApplication {
        RuleApplication {
            rule,
            merged_premise: None,
            loop_clauses: Vec::new(),
            eventuality: None,
            loop_formula: None,
            induction_form: None,
            conclusion: None,
            simplified: None,
            transcripts: Vec::new(),
        }
    }

    fn run(&mut self, config: &ProverConfig) -> Result<Verdict, CoreError> {
        for _round in 0..config.max_rounds {
            let t0 = std::time::Instant::now();
            if let Some(v) = self.terminations()? {
                return Ok(v);
            }
            let t1 = std::time::Instant::now();
            let mut progress = self.saturate_step_resolution()?;
            let t2 = std::time::Instant::now();
            eprintln!("round {_round}: term {:?} sweep {:?} (u={})", t1-t0, t2-t1, self.universal.len());
            let t3 = std::time::Instant::now();
            let evo = self.eventuality_round()?;
            eprintln!("round {_round}: evs {:?} (u={})", t3.elapsed(), self.universal.len());
            match evo {
                EvOutcome::Terminated(v) => return Ok(v),
                EvOutcome::Progress => progress = true,
                EvOutcome::Nothing => {}
            }
            if !progress {
                return Ok(Verdict::Saturated);
            }
        }
        Err(CoreError::ResourceLimit(format!(
            "no verdict within {} strategy rounds",
            config.max_rounds
        )))
    }

    /// The three termination rules.
    fn terminations(&mut self) -> Result<Option<Verdict>, CoreError> {
        // initial termination: U ∪ I |= ⊥
        let mark = self.oracle.log_len();
        let q: Vec<Formula> = self.problem.initial.iter().cloned().collect();
        if self.oracle.is_satisfiable(&q)?.is_none() {
            self.record(mark, Self::blank(RuleTag::InitTerm));
            return Ok(Some(Verdict::Unsatisfiable));
        }
        for ev in &self.problem.eventuality {
            let mark = self.oracle.log_len();
            let (goal, tag) = match ev {
                EventualityClause::NonGround(l) => (
                    Formula::forall("x", l.negated().applied(&Term::var("x"))),
                    RuleTag::EvTerm,
                ),
                EventualityClause::Ground(l) => (l.negated().as_prop(), RuleTag::GroundEvTerm),
            };
            if self.oracle.entails(&[], &goal)? {
                let mut app = Self::blank(tag);
                app.eventuality = Some(ev.clone());
                self.record(mark, app);
                return Ok(Some(Verdict::Unsatisfiable));
            }
        }
        Ok(None)
    }

    /// Sweeps step resolution over the candidate clauses to a fixpoint;
    /// returns whether anything was added. Candidates that already fired
    /// are skipped, and a candidate consistent at the current universal
    /// part is not re-queried until the part grows.
    fn saturate_step_resolution(&mut self) -> Result<bool, CoreError> {
        let conjuncts = |f: &Formula| -> Vec<Formula> {
            match f {
                Formula::True => vec![],
                Formula::And(fs) => fs.clone(),
                other => vec![other.clone()],
            }
        };
        // right-hand sides of fired candidates: a conjunct superset of an
        // inconsistent side is inconsistent too and fires without a query
        let mut fired_rhs: Vec<Vec<Formula>> = self
            .merged_candidates
            .iter()
            .zip(&self.step_fired)
            .filter(|(_, &f)| f)
            .map(|(m, _)| conjuncts(&m.rhs))
            .collect();
        let mut any = false;
        loop {
            let mut added = false;
            // consistency verdicts, valid within this pass only
            let mut consistent_rhs: Vec<Vec<Formula>> = Vec::new();
            for i in 0..self.merged_candidates.len() {
                let m = &self.merged_candidates[i];
                if self.step_fired[i] || m.is_degenerate() || m.rhs == Formula::True {
                    continue;
                }
                if self.step_checked_at[i] == self.universal.len() {
                    continue; // still consistent at this universal part
                }
                let mark = self.oracle.log_len();
                let rhs_set = conjuncts(&m.rhs);
                let structurally_fired = fired_rhs
                    .iter()
                    .any(|p| p.iter().all(|f| rhs_set.binary_search(f).is_ok()));
                if !structurally_fired {
                    // a side weaker than a known-consistent one is consistent
                    let structurally_open = consistent_rhs
                        .iter()
                        .any(|p: &Vec<Formula>| rhs_set.iter().all(|f| p.binary_search(f).is_ok()));
                    if structurally_open
                        || self
                            .oracle
                            .is_satisfiable(std::slice::from_ref(&m.rhs))?
                            .is_some()
                    {
                        consistent_rhs.push(rhs_set);
                        self.step_checked_at[i] = self.universal.len();
                        continue;
                    }
                }
                self.step_fired[i] = true;
                fired_rhs.push(rhs_set);
                let conclusion = Formula::not(m.lhs.clone());
                if self.oracle.entails(&[], &conclusion)? {
                    continue; // already known
                }
                self.add_conclusion(conclusion.clone())?;
                let mut app = Self::blank(RuleTag::StepRes);
                app.merged_premise = Some(m.clone());
                app.conclusion = Some(conclusion.clone());
                app.simplified = self.display_simplify(&conclusion)?;
                self.record(mark, app);
                added = true;
                any = true;
            }
            if !added {
                return Ok(any);
            }
        }
    }

    fn eventuality_round(&mut self) -> Result<EvOutcome, CoreError> {
        let searcher = LoopSearcher {
            oracle: self.oracle,
            full_candidates: self.full_candidates,
            merged_candidates: self.merged_candidates,
            max_iterations: self.full_candidates.len() + self.merged_candidates.len() + 2,
        };
        let mut progress = false;
        for ev in &self.problem.eventuality {
            let mark = self.oracle.log_len();
            let outcome = searcher.bfs_loop(ev)?;
            match outcome.result {
                LoopResult::NoLoop => {}
                LoopResult::Degenerate => {
                    // the degenerate clause true => next true is a loop;
                    // resolving against the eventuality closes the branch
                    let tag = if ev.is_ground() {
                        RuleTag::GroundEvTerm
                    } else {
                        RuleTag::EvTerm
                    };
                    let mut app = Self::blank(tag);
                    app.eventuality = Some(ev.clone());
                    app.loop_clauses = vec![FullMergedClause::from_merged(MergedClause::degenerate())];
                    self.record(mark, app);
                    return Ok(EvOutcome::Terminated(Verdict::Unsatisfiable));
                }
                LoopResult::Loop(data) => {
                    let x = Term::var("x");
                    let conclusion = match ev {
                        EventualityClause::NonGround(_) => Formula::forall(
                            "x",
                            Formula::and(
                                data.clauses
                                    .iter()
                                    .map(|c| {
                                        Formula::or(vec![
                                            Formula::not(c.merged.lhs.clone()),
                                            Formula::not(c.a.clone()),
                                        ])
                                    })
                                    .collect(),
                            ),
                        ),
                        EventualityClause::Ground(_) => Formula::and(
                            data.clauses
                                .iter()
                                .map(|c| Formula::not(c.merged.lhs.clone()))
                                .collect(),
                        ),
                    };
                    if self.oracle.entails(&[], &conclusion)? {
                        continue;
                    }
                    self.revalidate_loop(ev, &data.clauses, &data.formula)?;
                    let not_l = match ev {
                        EventualityClause::NonGround(l) => l.negated().applied(&x),
                        EventualityClause::Ground(l) => l.negated().as_prop(),
                    };
                    let induction = match ev {
                        EventualityClause::NonGround(_) => Formula::forall(
                            "x",
                            Formula::implies(
                                data.formula.clone(),
                                Formula::next(Formula::always(not_l)),
                            ),
                        ),
                        EventualityClause::Ground(_) => Formula::implies(
                            data.formula.clone(),
                            Formula::next(Formula::always(not_l)),
                        ),
                    };
                    self.add_conclusion(conclusion.clone())?;
                    let mut app = Self::blank(if ev.is_ground() {
                        RuleTag::GroundEvRes
                    } else {
                        RuleTag::EvRes
                    });
                    app.eventuality = Some(ev.clone());
                    app.loop_clauses = data.clauses;
                    app.loop_formula = Some(data.formula);
                    app.induction_form = Some(induction);
                    app.conclusion = Some(conclusion.clone());
                    app.simplified = self.display_simplify(&conclusion)?;
                    self.record(mark, app);
                    progress = true;
                }
            }
        }
        Ok(if progress {
            EvOutcome::Progress
        } else {
            EvOutcome::Nothing
        })
    }

    /// Re-checks both loop side conditions for a found loop; failure would
    /// mean the search itself is defective.
    fn revalidate_loop(
        &self,
        ev: &EventualityClause,
        clauses: &[FullMergedClause],
        h: &Formula,
    ) -> Result<(), CoreError> {
        let x = Term::var("x");
        let not_l = match ev {
            EventualityClause::NonGround(l) => l.negated().applied(&x),
            EventualityClause::Ground(l) => l.negated().as_prop(),
        };
        let close = |f: Formula| match ev {
            EventualityClause::NonGround(_) => Formula::forall("x", f),
            EventualityClause::Ground(_) => f,
        };
        for c in clauses {
            let side1 = close(Formula::implies(c.rhs(), not_l.clone()));
            let side2 = close(Formula::implies(c.rhs(), h.clone()));
            if !self.oracle.entails(&[], &side1)? || !self.oracle.entails(&[], &side2)? {
                return Err(CoreError::Invalid(format!(
                    "loop side conditions failed re-validation for {c}"
                )));
            }
        }
        Ok(())
    }

    /// Oracle-verified cosmetic simplification: drops disjuncts implied by
    /// other disjuncts and conjuncts implied by other conjuncts. Returns
    /// `None` when nothing simplifies.
    fn display_simplify(&self, conclusion: &Formula) -> Result<Option<Formula>, CoreError> {
        let implies = |a: &Formula, b: &Formula| -> Result<bool, CoreError> {
            let goal = Formula::forall("x", Formula::implies(a.clone(), b.clone()));
            self.oracle.entails_plain(&[], &goal)
        };
        let prune_or = |fs: &[Formula]| -> Result<Option<Vec<Formula>>, CoreError> {
            let n = fs.len();
            let mut deleted = vec![false; n];
            for i in 0..n {
                for j in 0..n {
                    if i == j || deleted[j] {
                        continue;
                    }
                    if implies(&fs[i], &fs[j])? && (!implies(&fs[j], &fs[i])? || j < i) {
                        deleted[i] = true;
                        break;
                    }
                }
            }
            if deleted.iter().any(|&d| d) {
                Ok(Some(
                    fs.iter()
                        .zip(&deleted)
                        .filter(|(_, &d)| !d)
                        .map(|(f, _)| f.clone())
                        .collect(),
                ))
            } else {
                Ok(None)
            }
        };
        let simplify_body = |body: &Formula| -> Result<Option<Formula>, CoreError> {
            match body {
                Formula::Or(fs) => Ok(prune_or(fs)?.map(Formula::or)),
                Formula::And(fs) => {
                    let mut changed = false;
                    let mut parts = Vec::new();
                    for f in fs {
                        if let Formula::Or(ds) = f {
                            if let Some(pruned) = prune_or(ds)? {
                                parts.push(Formula::or(pruned));
                                changed = true;
                                continue;
                            }
                        }
                        parts.push(f.clone());
                    }
                    if changed {
                        Ok(Some(Formula::and(parts)))
                    } else {
                        Ok(None)
                    }
                }
                _ => Ok(None),
            }
        };
        match conclusion {
            Formula::Forall(v, body) => Ok(simplify_body(body)?
                .map(|b| Formula::Forall(v.clone(), Box::new(b)))),
            other => simplify_body(other),
        }
    }
}

enum EvOutcome {
    Terminated(Verdict),
    Progress,
    Nothing,
}

/// Re-runs every recorded side condition against a fresh oracle; a faithful
/// trace reproduces every boolean. Transcripts name a prefix of the final
/// universal part as their background context.
pub fn replay(derivation: &Derivation) -> Result<bool, CoreError> {
    let oracle = Oracle::from_signature(&derivation.problem.signature)?;
    let mut pushed = 0usize;
    for step in &derivation.steps {
        for t in &step.transcripts {
            if t.context_len == usize::MAX {
                // a context-free validity check
                let got = oracle.is_satisfiable_plain(&t.extras)?.is_some();
                if got != t.satisfiable {
                    return Ok(false);
                }
                continue;
            }
            if t.context_len > derivation.universal.len() {
                return Ok(false);
            }
            while pushed < t.context_len {
                oracle.push_context(&derivation.universal[pushed])?;
                pushed += 1;
            }
            if t.context_len != pushed {
                return Ok(false); // contexts must grow monotonically
            }
            let got = oracle.is_satisfiable(&t.extras)?.is_some();
            if got != t.satisfiable {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Renders a derivation as readable text.
pub fn render_text(d: &Derivation) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "universal part ({} formulae):", d.initial_universal.len());
    for f in &d.initial_universal {
        let _ = writeln!(out, "  {f}");
    }
    for (i, s) in d.steps.iter().enumerate() {
        let _ = write!(out, "[{}] {}", i + 1, s.rule);
        if let Some(ev) = &s.eventuality {
            let _ = write!(out, " on {ev}");
        }
        let _ = writeln!(out);
        if let Some(m) = &s.merged_premise {
            let _ = writeln!(out, "    premise: {m}");
        }
        for c in &s.loop_clauses {
            let _ = writeln!(out, "    loop clause: {c}");
        }
        if let Some(h) = &s.loop_formula {
            let _ = writeln!(out, "    loop formula: {h}");
        }
        if let Some(ind) = &s.induction_form {
            let _ = writeln!(out, "    induction reading: {ind}");
        }
        if let Some(c) = &s.conclusion {
            let _ = writeln!(out, "    conclusion: {c}");
        }
        if let Some(sd) = &s.simplified {
            let _ = writeln!(out, "    simplified: {sd}");
        }
        let _ = writeln!(out, "    side conditions: {}", s.transcripts.len());
    }
    let _ = writeln!(out, "verdict: {}", d.verdict);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_problem;
    use crate::problem::Semantics;

    fn res2_1() -> TemporalProblem {
        parse_problem(
            "
            initial { Q(c); }
            universal {
                exists x. (P1(x) & P2(x));
                forall x. (Q(x) & (exists y. (~P1(y) & ~P2(y))) -> L(x));
            }
            step {
                P1(x) => next ~P1(x);
                P2(x) => next ~P2(x);
                Q(x) => next Q(x);
            }
            eventuality { sometime ~L(x); }
            ",
            Semantics::Constant,
        )
        .unwrap()
    }

    #[test]
    fn worked_derivation_is_reproduced() {
        let p = res2_1();
        let d = prove(&p, &ProverConfig::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Unsatisfiable);
        // an eventuality resolution on sometime ~L(x) ...
        let ev_res_idx = d
            .steps
            .iter()
            .position(|s| s.rule == RuleTag::EvRes)
            .expect("eventuality resolution applied");
        // ... followed by the initial termination
        let init_idx = d
            .steps
            .iter()
            .position(|s| s.rule == RuleTag::InitTerm)
            .expect("initial termination fires");
        assert!(ev_res_idx < init_idx);
        assert_eq!(d.steps.last().unwrap().rule, RuleTag::InitTerm);

        // the loop clause is equivalent to fm2 and the conclusion to nu1
        let oracle = Oracle::from_signature(&d.problem.signature).unwrap();
        let equiv = |a: &Formula, b: &Formula| {
            let goal = Formula::forall("x", Formula::iff(a.clone(), b.clone()));
            oracle.entails(&[], &goal).unwrap()
        };
        let step = &d.steps[ev_res_idx];
        assert_eq!(step.loop_clauses.len(), 1);
        let clause = &step.loop_clauses[0];
        let x = Term::var("x");
        let y = Term::var("y");
        let fm2_lhs = Formula::and(vec![
            Formula::atom("Q", vec![x.clone()]),
            Formula::exists(
                "y",
                Formula::and(vec![
                    Formula::atom("P1", vec![y.clone()]),
                    Formula::atom("P2", vec![y.clone()]),
                ]),
            ),
        ]);
        let fm2_rhs = Formula::and(vec![
            Formula::atom("Q", vec![x.clone()]),
            Formula::exists(
                "y",
                Formula::and(vec![
                    Formula::not(Formula::atom("P1", vec![y.clone()])),
                    Formula::not(Formula::atom("P2", vec![y.clone()])),
                ]),
            ),
        ]);
        assert!(equiv(&clause.lhs(), &fm2_lhs), "lhs {} vs fm2", clause.lhs());
        assert!(equiv(&clause.rhs(), &fm2_rhs), "rhs {} vs fm2", clause.rhs());
        let nu1 = Formula::forall(
            "x",
            Formula::or(vec![
                Formula::not(Formula::exists(
                    "y",
                    Formula::and(vec![
                        Formula::atom("P1", vec![y.clone()]),
                        Formula::atom("P2", vec![y.clone()]),
                    ]),
                )),
                Formula::not(Formula::atom("Q", vec![x.clone()])),
            ]),
        );
        let conclusion = step.conclusion.as_ref().unwrap();
        // closed formulas: equivalence via entailment both ways
        assert!(oracle.entails(&[conclusion.clone()], &nu1).unwrap());
        assert!(oracle.entails(&[nu1.clone()], conclusion).unwrap());
    }

    #[test]
    fn trivially_satisfiable_problem_saturates() {
        let p = parse_problem("initial { p; }", Semantics::Constant).unwrap();
        let d = prove(&p, &ProverConfig::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Saturated);
        assert!(d.steps.is_empty());
    }

    #[test]
    fn problem_parts_are_fixed_across_the_derivation() {
        let p = res2_1();
        let d = prove(&p, &ProverConfig::default()).unwrap();
        let (flooded, _) = flood_constants(&p).unwrap();
        assert_eq!(d.problem.initial, flooded.initial);
        assert_eq!(d.problem.step, flooded.step);
        assert_eq!(d.problem.eventuality, flooded.eventuality);
        // universal part grows monotonically from U_0
        assert!(d.universal.len() >= d.initial_universal.len());
        assert_eq!(
            &d.universal[..d.initial_universal.len()],
            &d.initial_universal[..]
        );
    }

    #[test]
    fn trace_replays() {
        let p = res2_1();
        let d = prove(&p, &ProverConfig::default()).unwrap();
        assert!(replay(&d).unwrap());
        assert!(d.steps.iter().any(|s| !s.transcripts.is_empty()));
    }

    #[test]
    fn budget_produces_resource_verdict() {
        let p = res2_1();
        let d = prove(
            &p,
            &ProverConfig {
                oracle_budget: Some(3),
                ..ProverConfig::default()
            },
        )
        .unwrap();
        assert!(matches!(d.verdict, Verdict::ResourceLimit(_)));
    }

    #[test]
    fn degenerate_loop_terminates_immediately() {
        let p = parse_problem(
            "
            universal { forall x. ~L(x); }
            step { A(x) => next A(x); }
            eventuality { sometime L(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let d = prove(&p, &ProverConfig::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Unsatisfiable);
        assert!(d
            .steps
            .iter()
            .any(|s| s.rule == RuleTag::EvTerm));
    }

    #[test]
    fn step_resolution_example_from_grounding() {
        // exists x (P & Q) => next exists x (P & ~P): the right-hand side is
        // contradictory, so ~lhs enters the universal part
        let p = parse_problem(
            "
            step { P(x) => next P(x); Q(x) => next ~P(x); }
            eventuality { sometime g; }
            universal { g <-> exists x. (P(x) & Q(x)); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (reduced, _) = crate::dsnf::reduce_ground_eventuality(
            &p,
            crate::dsnf::DEFAULT_SUBSET_LIMIT,
        )
        .unwrap();
        let d = prove(&reduced, &ProverConfig::default()).unwrap();
        // step resolution fired somewhere, and afterwards U entails
        // forall x (~P(x) | ~Q(x))
        assert!(d.steps.iter().any(|s| s.rule == RuleTag::StepRes));
        let oracle = Oracle::from_signature(&d.problem.signature).unwrap();
        let goal = Formula::forall(
            "x",
            Formula::or(vec![
                Formula::not(Formula::atom("P", vec![Term::var("x")])),
                Formula::not(Formula::atom("Q", vec![Term::var("x")])),
            ]),
        );
        assert!(oracle.entails(&d.universal, &goal).unwrap());
    }
}
