//! Breadth-first search for loops: sets of full merged step clauses whose
//! right-hand sides keep an eventuality literal false forever, yielding the
//! premises of the eventuality resolution rule.
//!
//! Starting from `H_0 = true`, each round keeps the candidate clauses whose
//! right-hand sides entail `~L(x) & H_i(x)` under the universal part, prunes
//! clauses whose left-hand sides imply another's (the disjunction stays
//! equivalent), and stops as soon as `H_i => H_{i+1}` is valid. Ground
//! eventualities run the same search over merged derived clauses with the
//! variable and quantifiers dropped.

use crate::clauses::{FullMergedClause, MergedClause};
use crate::error::CoreError;
use crate::oracle::Oracle;
use crate::problem::EventualityClause;
use crate::syntax::{Formula, Term};

/// Outcome of a loop search for one eventuality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoopResult {
    /// No candidate set survives; no loop exists for the current universal
    /// part.
    NoLoop,
    /// The degenerate clause entered the candidate set because
    /// `U |= forall x (~L(x) & H_i(x))`; the caller should apply the
    /// eventuality termination rule.
    Degenerate,
    /// A loop with its clauses and loop formula.
    Loop(LoopData),
}

/// The clauses of a found loop and the loop formula `H`, with the free
/// variable `x` for non-ground eventualities (closed for ground ones).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopData {
    pub clauses: Vec<FullMergedClause>,
    pub formula: Formula,
    pub iterations: usize,
}

/// One BFS round as reported to the caller: the pruned candidate set and its
/// disjunction.
#[derive(Clone, Debug)]
pub struct LoopIteration {
    pub clauses: Vec<FullMergedClause>,
    pub h: Formula,
}

#[derive(Clone, Debug)]
pub struct LoopOutcome {
    pub result: LoopResult,
    pub iterations: Vec<LoopIteration>,
}

/// Loop search over a fixed candidate family (the canonical merged clauses
/// of the problem).
pub struct LoopSearcher<'a> {
    pub oracle: &'a Oracle,
    pub full_candidates: &'a [FullMergedClause],
    pub merged_candidates: &'a [MergedClause],
    /// Hard cap on BFS rounds; exceeding it indicates an oracle defect.
    pub max_iterations: usize,
}

impl LoopSearcher<'_> {
    /// Whether a clause's right-hand side is consistent with the universal
    /// part held in the oracle's context. A clause whose B-side contradicts
    /// the universal part passes every side condition vacuously and would
    /// only pollute the loop formula; inconsistency is permanent because
    /// the universal part only grows.
    pub fn rhs_consistent(
        &self,
        clause: &FullMergedClause,
        ground: bool,
    ) -> Result<bool, CoreError> {
        let rhs_holds = if ground {
            clause.merged.rhs.clone()
        } else {
            Formula::exists("x", clause.rhs())
        };
        Ok(self.oracle.is_satisfiable(&[rhs_holds])?.is_some())
    }

    /// Runs the search for one eventuality. The current universal part must
    /// have been pushed into the oracle's context by the caller.
    pub fn bfs_loop(&self, ev: &EventualityClause) -> Result<LoopOutcome, CoreError> {
        let ground = ev.is_ground();
        let candidates: Vec<FullMergedClause> = if ground {
            self.merged_candidates
                .iter()
                .filter(|m| !m.is_degenerate())
                .cloned()
                .map(FullMergedClause::from_merged)
                .collect()
        } else {
            self.full_candidates
                .iter()
                .filter(|c| !c.is_degenerate())
                .cloned()
                .collect()
        };
        self.bfs_loop_over(ev, candidates)
    }

    /// The search proper over a candidate list; vacuously passing clauses
    /// (right-hand side inconsistent with the universal part) are screened
    /// out of the first round's survivors, and later rounds narrow the
    /// previous round's set, which is sound because the filter criterion
    /// only tightens as `H` descends.
    pub fn bfs_loop_over(
        &self,
        ev: &EventualityClause,
        candidates: Vec<FullMergedClause>,
    ) -> Result<LoopOutcome, CoreError> {
        let x = Term::var("x");
        let ground = ev.is_ground();
        let not_l = match ev {
            EventualityClause::Ground(l) => l.negated().as_prop(),
            EventualityClause::NonGround(l) => l.negated().applied(&x),
        };
        let mut live = candidates;
        let mut screened = false;

        let close = |f: Formula| -> Formula {
            if ground {
                f
            } else {
                Formula::forall("x", f)
            }
        };

        let mut h = Formula::True;
        let mut iterations: Vec<LoopIteration> = Vec::new();
        for round in 1..=self.max_iterations {
            // degenerate entry: U |= forall x (~L(x) & H_i(x))
            let degenerate_goal = close(Formula::and(vec![not_l.clone(), h.clone()]));
            if self.oracle.entails(&[], &degenerate_goal)? {
                return Ok(LoopOutcome {
                    result: LoopResult::Degenerate,
                    iterations,
                });
            }
            // N_{i+1}: clauses with forall x (U & B(x) -> ~L(x) & H_i(x));
            // monotone descent of H makes this a subset of the previous set.
            // The closed merged part is passed as its own conjunct so its
            // translation is shared across clauses and rounds.
            let mut next: Vec<FullMergedClause> = Vec::new();
            let wanted = Formula::and(vec![not_l.clone(), h.clone()]);
            // verdicts transfer through conjunct inclusion of right-hand
            // sides: a pass carries to every stronger side, a failure to
            // every weaker one (closed and one-variable conjuncts cannot be
            // confused, so whole-side comparison splits componentwise)
            let mut passed_rhs: Vec<Vec<Formula>> = Vec::new();
            let mut failed_rhs: Vec<Vec<Formula>> = Vec::new();
            let conjuncts = |f: &Formula| -> Vec<Formula> {
                match f {
                    Formula::True => vec![],
                    Formula::And(fs) => fs.clone(),
                    other => vec![other.clone()],
                }
            };
            for c in live.drain(..) {
                let rhs_set = conjuncts(&c.rhs());
                if passed_rhs
                    .iter()
                    .any(|p| p.iter().all(|f| rhs_set.binary_search(f).is_ok()))
                {
                    passed_rhs.push(rhs_set);
                    next.push(c);
                    continue;
                }
                if failed_rhs
                    .iter()
                    .any(|p| rhs_set.iter().all(|f| p.binary_search(f).is_ok()))
                {
                    continue;
                }
                let counterexample = Formula::and(vec![
                    c.b.clone(),
                    Formula::not(wanted.clone()),
                ]);
                let query = [
                    c.merged.rhs.clone(),
                    if ground {
                        counterexample
                    } else {
                        Formula::exists("x", counterexample)
                    },
                ];
                if self.oracle.is_satisfiable(&query)?.is_none() {
                    passed_rhs.push(rhs_set);
                    next.push(c);
                } else {
                    failed_rhs.push(rhs_set);
                }
            }
            if !screened {
                // drop vacuous passers once, from the much smaller survivor set
                let mut kept = Vec::with_capacity(next.len());
                for c in next {
                    if self.rhs_consistent(&c, ground)? {
                        kept.push(c);
                    }
                }
                next = kept;
                screened = true;
            }
            if next.is_empty() {
                return Ok(LoopOutcome {
                    result: LoopResult::NoLoop,
                    iterations,
                });
            }
            live = next.clone();
            let pruned = self.prune_candidates(next)?;
            let h_next = Formula::or(pruned.iter().map(|c| c.lhs()).collect());
            iterations.push(LoopIteration {
                clauses: pruned.clone(),
                h: h_next.clone(),
            });
            // exit as soon as forall x (H_i -> H_{i+1}) is valid
            let stop = close(Formula::implies(h.clone(), h_next.clone()));
            if self.oracle.entails_plain(&[], &stop)? {
                return Ok(LoopOutcome {
                    result: LoopResult::Loop(LoopData {
                        clauses: pruned,
                        formula: h_next,
                        iterations: round,
                    }),
                    iterations,
                });
            }
            h = h_next;
        }
        Err(CoreError::ResourceLimit(format!(
            "loop search did not stabilise within {} rounds",
            self.max_iterations
        )))
    }

    /// Removes clauses whose left-hand side implies the left-hand side of
    /// another kept clause; the disjunction of the kept sides stays
    /// equivalent. Mutually equivalent sides keep the canonically first.
    ///
    /// A free structural pass goes first: a side whose conjunct set contains
    /// another side's conjuncts implies it outright. The oracle pass then
    /// polishes the survivors, and is skipped for oversized sets, which only
    /// leaves the disjunction verbose, never wrong.
    pub fn prune_candidates(
        &self,
        clauses: Vec<FullMergedClause>,
    ) -> Result<Vec<FullMergedClause>, CoreError> {
        fn conjuncts(f: &Formula) -> Vec<&Formula> {
            match f {
                Formula::True => vec![],
                Formula::And(fs) => fs.iter().collect(),
                other => vec![other],
            }
        }
        let n = clauses.len();
        let lhss: Vec<Formula> = clauses.iter().map(|c| c.lhs()).collect();
        let sets: Vec<Vec<&Formula>> = lhss.iter().map(conjuncts).collect();
        let mut deleted = vec![false; n];
        for i in 0..n {
            for j in 0..n {
                if i == j || deleted[j] {
                    continue;
                }
                // conjuncts are sorted and deduplicated, so superset means
                // implication
                let superset = sets[j].iter().all(|c| sets[i].binary_search(c).is_ok());
                if superset && (sets[i].len() > sets[j].len() || j < i) {
                    deleted[i] = true;
                    break;
                }
            }
        }
        let survivors: Vec<usize> = (0..n).filter(|&i| !deleted[i]).collect();
        if survivors.len() <= 48 {
            let implies = |a: &Formula, b: &Formula| -> Result<bool, CoreError> {
                let goal = Formula::forall("x", Formula::implies(a.clone(), b.clone()));
                self.oracle.entails_plain(&[], &goal)
            };
            for (pi, &i) in survivors.iter().enumerate() {
                for (pj, &j) in survivors.iter().enumerate() {
                    if pi == pj || deleted[j] || deleted[i] {
                        continue;
                    }
                    if implies(&lhss[i], &lhss[j])? && (!implies(&lhss[j], &lhss[i])? || j < i)
                    {
                        deleted[i] = true;
                        break;
                    }
                }
            }
        }
        Ok(clauses
            .into_iter()
            .zip(deleted)
            .filter(|(_, d)| !d)
            .map(|(c, _)| c)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clauses::ClauseEngine;
    use crate::parser::parse_problem;
    use crate::problem::{Lit, Semantics, TemporalProblem};

    fn searcher_parts(p: &TemporalProblem) -> (Vec<FullMergedClause>, Vec<MergedClause>, Oracle) {
        let engine = ClauseEngine::new(p);
        let full = engine.canonical_full_candidates();
        let merged = engine.canonical_merged_candidates();
        let oracle = Oracle::from_signature(&p.signature).unwrap();
        (full, merged, oracle)
    }

    fn equivalent(oracle: &Oracle, a: &Formula, b: &Formula) -> bool {
        let goal = Formula::forall("x", Formula::iff(a.clone(), b.clone()));
        oracle.entails(&[], &goal).unwrap()
    }

    #[test]
    fn bfs_finds_the_invariant_loop() {
        // I = {exists x A}, U = {forall x (B -> A & ~L)},
        // S = {A(x) => next B(x)}, E = {sometime L(x)}
        let p = parse_problem(
            "
            initial { exists x. A(x); }
            universal { forall x. (B(x) -> A(x) & ~L(x)); }
            step { A(x) => next B(x); }
            eventuality { sometime L(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (full, merged, oracle) = searcher_parts(&p);
        let searcher = LoopSearcher {
            oracle: &oracle,
            full_candidates: &full,
            merged_candidates: &merged,
            max_iterations: full.len() + 2,
        };
        let universal = p.universal_vec();
        let ev = p.eventuality.iter().next().unwrap().clone();
        let out = searcher.bfs_loop(&universal, &ev).unwrap();
        let LoopResult::Loop(data) = &out.result else {
            panic!("expected a loop, got {:?}", out.result);
        };
        // converges in two rounds with a singleton pruned set
        assert!(data.iterations <= 2);
        assert_eq!(out.iterations[0].clauses.len(), 1, "N1' is a singleton");
        // H is equivalent to A(x) & exists y A(y)
        let x = Term::var("x");
        let expected = Formula::and(vec![
            Formula::atom("A", vec![x]),
            Formula::exists("y", Formula::atom("A", vec![Term::var("y")])),
        ]);
        assert!(
            equivalent(&oracle, &data.formula, &expected),
            "H = {} is not equivalent to A(x) & exists y A(y)",
            data.formula
        );
    }

    #[test]
    fn degenerate_when_the_literal_is_impossible() {
        let p = parse_problem(
            "
            universal { forall x. ~L(x); }
            step { A(x) => next A(x); }
            eventuality { sometime L(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (full, merged, oracle) = searcher_parts(&p);
        let searcher = LoopSearcher {
            oracle: &oracle,
            full_candidates: &full,
            merged_candidates: &merged,
            max_iterations: 8,
        };
        let ev = p.eventuality.iter().next().unwrap().clone();
        let out = searcher.bfs_loop(&p.universal_vec(), &ev).unwrap();
        assert_eq!(out.result, LoopResult::Degenerate);
    }

    #[test]
    fn no_loop_without_step_clauses() {
        let p = parse_problem(
            "
            universal { exists x. L(x); }
            eventuality { sometime L(x); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (full, merged, oracle) = searcher_parts(&p);
        let searcher = LoopSearcher {
            oracle: &oracle,
            full_candidates: &full,
            merged_candidates: &merged,
            max_iterations: 8,
        };
        let ev = p.eventuality.iter().next().unwrap().clone();
        let out = searcher.bfs_loop(&p.universal_vec(), &ev).unwrap();
        assert_eq!(out.result, LoopResult::NoLoop);
    }

    #[test]
    fn ground_loop_in_the_flooding_example() {
        // after flooding: U = {q <-> P(c), l -> ~P(c)}, S = {q => next q},
        // E = {sometime l}: the step clause is a loop in sometime l with
        // loop formula q
        let p = parse_problem(
            "
            initial { P(c); }
            universal { q <-> P(c); l -> ~P(c); }
            step { q => next q; }
            eventuality { sometime l; }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (full, merged, oracle) = searcher_parts(&p);
        let searcher = LoopSearcher {
            oracle: &oracle,
            full_candidates: &full,
            merged_candidates: &merged,
            max_iterations: 8,
        };
        let ev = EventualityClause::Ground(Lit::pos("l"));
        let out = searcher.bfs_loop(&p.universal_vec(), &ev).unwrap();
        let LoopResult::Loop(data) = &out.result else {
            panic!("expected a ground loop, got {:?}", out.result);
        };
        assert!(
            equivalent(&oracle, &data.formula, &Formula::prop("q")),
            "ground loop formula {} should be q",
            data.formula
        );
    }

    #[test]
    fn ground_termination_signal() {
        let p = parse_problem(
            "
            universal { ~l; }
            step { q => next q; }
            eventuality { sometime l; }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (full, merged, oracle) = searcher_parts(&p);
        let searcher = LoopSearcher {
            oracle: &oracle,
            full_candidates: &full,
            merged_candidates: &merged,
            max_iterations: 8,
        };
        let ev = EventualityClause::Ground(Lit::pos("l"));
        let out = searcher.bfs_loop(&p.universal_vec(), &ev).unwrap();
        assert_eq!(out.result, LoopResult::Degenerate);
    }

    #[test]
    fn pruning_keeps_one_of_equivalent_sides() {
        let p = parse_problem(
            "
            step { A(x) => next B(x); }
            eventuality { sometime L(x); }
            universal { forall x. (B(x) -> ~L(x)); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let (full, merged, oracle) = searcher_parts(&p);
        let searcher = LoopSearcher {
            oracle: &oracle,
            full_candidates: &full,
            merged_candidates: &merged,
            max_iterations: 8,
        };
        let x = Term::var("x");
        let a_x = Formula::atom("A", vec![x.clone()]);
        let mk = |lhs: Formula| FullMergedClause {
            merged: MergedClause {
                lhs: Formula::True,
                rhs: Formula::True,
            },
            a: lhs,
            b: Formula::atom("B", vec![x.clone()]),
        };
        // two clauses with equivalent sides plus one strictly stronger
        let b_x = Formula::atom("B", vec![x.clone()]);
        let c1 = mk(a_x.clone());
        let c2 = mk(Formula::and(vec![
            a_x.clone(),
            Formula::or(vec![a_x.clone(), b_x.clone()]),
        ]));
        let c3 = mk(Formula::and(vec![a_x.clone(), b_x]));
        let pruned = searcher
            .prune_candidates(vec![c1.clone(), c2, c3])
            .unwrap();
        assert_eq!(pruned.len(), 1);
        assert_eq!(pruned[0], c1);
        // a singleton set is returned unchanged
        let single = searcher.prune_candidates(vec![c1.clone()]).unwrap();
        assert_eq!(single, vec![c1]);
    }
}
