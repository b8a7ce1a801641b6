//! The behaviour graph of a temporal problem and the decision procedure
//! built on it.
//!
//! Vertices are colour schemes consistent with the universal part, edges are
//! next-state transitions justified by the categorical formulae, and the
//! initial vertices are additionally consistent with the initial part.
//! Satisfiability is decided by pruning to a stable subgraph: vertices
//! without successors fall to the step-resolution analogue, vertices whose
//! eventualities cannot recur fall to the eventuality-resolution analogue,
//! and the problem is satisfiable iff an initial vertex survives.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::clauses::{CategoricalTriple, ClauseEngine, Colour, ColourScheme, TemporalSymbols};
use crate::error::CoreError;
use crate::oracle::Oracle;
use crate::problem::{Lit, Semantics, TemporalProblem};
use crate::syntax::{Formula, Name, Term};

/// A built behaviour graph: vertices, adjacency, and the initial set,
/// restricted to the part reachable from the initial vertices.
#[derive(Clone, Debug)]
pub struct BehaviourGraph {
    pub schemes: Vec<ColourScheme>,
    pub triples: Vec<CategoricalTriple>,
    pub edges: Vec<Vec<usize>>,
    pub initial: BTreeSet<usize>,
    pub semantics: Semantics,
}

impl BehaviourGraph {
    pub fn is_empty(&self) -> bool {
        self.schemes.is_empty()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.edges[v]
    }
}

/// Which Theorem-style model-existence condition failed, and where.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConditionViolation {
    /// No run from this vertex and colour ever reaches the eventuality
    /// literal.
    NonGroundEventuality {
        vertex: usize,
        colour: Colour,
        eventuality: Lit,
    },
    /// No reachable vertex maps the constant to a colour containing the
    /// literal.
    ConstantEventuality {
        vertex: usize,
        constant: Name,
        eventuality: Lit,
    },
    /// No reachable vertex carries the ground literal.
    GroundEventuality { vertex: usize, eventuality: Lit },
}

/// Outcome of checking the model-existence conditions on a graph.
#[derive(Clone, Debug)]
pub enum ModelConditions {
    /// All conditions hold; a model exists (with a lasso witness over the
    /// graph when one was constructed).
    Satisfiable(Option<RunWitness>),
    /// The graph has no initial vertex.
    NoInitialVertex,
    Violated(ConditionViolation),
}

/// Why a vertex was removed during the decision procedure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeletionReason {
    NoSuccessor,
    Unreachable,
    GroundEventuality(Lit),
    NonGroundEventuality { eventuality: Lit, colour: Colour },
}

#[derive(Clone, Debug)]
pub struct DeletionEvent {
    pub scheme: ColourScheme,
    pub reason: DeletionReason,
}

/// A lasso path through the stable graph: `prefix` then `cycle` repeated
/// forever, with every ground eventuality recurring on the cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunWitness {
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

/// Verdict of the graph decision procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphVerdict {
    Satisfiable,
    Unsatisfiable,
}

#[derive(Clone, Debug)]
pub struct DecideResult {
    pub verdict: GraphVerdict,
    /// The graph as built, before pruning.
    pub graph: BehaviourGraph,
    /// Which vertices of `graph` survive pruning.
    pub alive: Vec<bool>,
    /// Deletion sequence, the unsatisfiability certificate.
    pub deletions: Vec<DeletionEvent>,
    /// Satisfiability certificate on the stable graph.
    pub witness: Option<RunWitness>,
}

/// Problem-scoped machinery shared by graph construction and analysis.
pub struct GraphContext<'p> {
    problem: &'p TemporalProblem,
    engine: ClauseEngine<'p>,
    oracle: Oracle,
    universal: Vec<Formula>,
}

impl<'p> GraphContext<'p> {
    pub fn new(problem: &'p TemporalProblem) -> Result<Self, CoreError> {
        let oracle = Oracle::from_signature(&problem.signature)?;
        // the universal part backs every query as the oracle's context
        for f in &problem.universal {
            oracle.push_context(f)?;
        }
        Ok(GraphContext {
            problem,
            engine: ClauseEngine::new(problem),
            oracle,
            universal: problem.universal_vec(),
        })
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    pub fn engine(&self) -> &ClauseEngine<'p> {
        &self.engine
    }

    pub fn symbols(&self) -> &TemporalSymbols {
        self.engine.symbols()
    }

    fn sat_with_universal(&self, extra: &[Formula]) -> Result<bool, CoreError> {
        Ok(self.oracle.is_satisfiable(extra)?.is_some())
    }

    /// Predicate-colour suitability of the ordered pair `(γ, γ′)`:
    /// satisfiability of `U ∧ ∃x(F_γ(x) ∧ B_γ′(x))`, i.e. an element
    /// discharging the step obligations of `γ′` can carry `γ` at the next
    /// moment. Run construction steps from `γ′` to `γ`.
    pub fn suitable(&self, gamma: Colour, gamma_prime: Colour) -> Result<bool, CoreError> {
        let x = Term::var("x");
        let body = Formula::and(vec![
            self.engine.f_gamma(gamma, &x),
            self.engine.b_gamma(gamma_prime, &x),
        ]);
        self.sat_with_universal(&[Formula::exists("x", body)])
    }

    /// Propositional-colour suitability: `U ∧ F_θ ∧ B_θ'` satisfiable, with
    /// the same pair orientation as [`GraphContext::suitable`].
    pub fn suitable_theta(&self, theta: u32, theta_prime: u32) -> Result<bool, CoreError> {
        self.sat_with_universal(&[
            self.symbols().prop_colour_formula(theta),
            self.engine.b_theta(theta_prime),
        ])
    }

    /// Constant-distribution suitability: pointwise colour suitability.
    pub fn suitable_rho(&self, rho: &ColourScheme, rho_prime: &ColourScheme) -> Result<bool, CoreError> {
        for (g, gp) in rho.rho.iter().zip(&rho_prime.rho) {
            if !self.suitable(*g, *gp)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Builds the behaviour graph: vertices satisfiable with the universal
    /// part, edges by `U ∧ F_C' ∧ B_C`, restricted to the vertices reachable
    /// from the initial ones.
    pub fn build(&self, max_schemes: u128) -> Result<BehaviourGraph, CoreError> {
        let count = self.engine.scheme_count();
        if count > max_schemes {
            return Err(CoreError::ResourceLimit(format!(
                "{count} colour schemes exceed the cap of {max_schemes}"
            )));
        }
        let mut schemes = Vec::new();
        let mut triples = Vec::new();
        for scheme in self.engine.schemes() {
            let t = self.engine.categorical(&scheme);
            if self.sat_with_universal(std::slice::from_ref(&t.f))? {
                schemes.push(scheme);
                triples.push(t);
            }
        }
        let initial_formulas: Vec<Formula> = self.problem.initial.iter().cloned().collect();
        let mut initial = BTreeSet::new();
        for (i, t) in triples.iter().enumerate() {
            let mut q = initial_formulas.clone();
            q.push(t.f.clone());
            if self.sat_with_universal(&q)? {
                initial.insert(i);
            }
        }
        let mut edges: Vec<Vec<usize>> = vec![Vec::new(); schemes.len()];
        for (i, ti) in triples.iter().enumerate() {
            for (j, tj) in triples.iter().enumerate() {
                if self.sat_with_universal(&[tj.f.clone(), ti.b.clone()])? {
                    edges[i].push(j);
                }
            }
        }
        // restrict to the subgraph reachable from the initial vertices
        let mut reach = vec![false; schemes.len()];
        let mut queue: VecDeque<usize> = initial.iter().copied().collect();
        for &i in &initial {
            reach[i] = true;
        }
        while let Some(v) = queue.pop_front() {
            for &w in &edges[v] {
                if !reach[w] {
                    reach[w] = true;
                    queue.push_back(w);
                }
            }
        }
        let keep: Vec<usize> = (0..schemes.len()).filter(|&i| reach[i]).collect();
        let renumber: BTreeMap<usize, usize> =
            keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let graph = BehaviourGraph {
            schemes: keep.iter().map(|&i| schemes[i].clone()).collect(),
            triples: keep.iter().map(|&i| triples[i].clone()).collect(),
            edges: keep
                .iter()
                .map(|&i| {
                    edges[i]
                        .iter()
                        .filter_map(|j| renumber.get(j).copied())
                        .collect()
                })
                .collect(),
            initial: initial
                .iter()
                .filter_map(|i| renumber.get(i).copied())
                .collect(),
            semantics: self.problem.semantics,
        };
        Ok(graph)
    }

    /// Transition matrix over predicate colours: `m[from][to]` holds when a
    /// run may step from `from` to `to`, i.e. `suitable(to, from)`.
    fn suitability_matrix(&self) -> Result<Vec<Vec<bool>>, CoreError> {
        let n = self.symbols().n_colours();
        let mut m = vec![vec![false; n]; n];
        for (from, row) in m.iter_mut().enumerate() {
            for (to, cell) in row.iter_mut().enumerate() {
                *cell = self.suitable(to as Colour, from as Colour)?;
            }
        }
        Ok(m)
    }

    /// Checks the model-existence conditions on the (sub)graph selected by
    /// `alive`. `flooded` problems skip the constant condition, which the
    /// ground condition subsumes for them.
    pub fn check_model_conditions(
        &self,
        graph: &BehaviourGraph,
        alive: &[bool],
        flooded: bool,
    ) -> Result<ModelConditions, CoreError> {
        if !graph.initial.iter().any(|&i| alive[i]) {
            return Ok(ModelConditions::NoInitialVertex);
        }
        let suit = self.suitability_matrix()?;
        let nonground: Vec<&Lit> = self
            .problem
            .eventuality
            .iter()
            .filter(|e| !e.is_ground())
            .map(|e| e.lit())
            .collect();
        let ground: Vec<&Lit> = self
            .problem
            .eventuality
            .iter()
            .filter(|e| e.is_ground())
            .map(|e| e.lit())
            .collect();

        // condition on vertices and colours: a run from (C, γ) must reach
        // the literal
        for ev in &nonground {
            let reach = product_can_reach(graph, alive, &suit, |v, g| {
                self.symbols().colour_has(g, ev)
                    .then_some((v, g))
                    .is_some()
                    && self.symbols().colour_has(g, ev)
            });
            for (v, scheme) in graph.schemes.iter().enumerate() {
                if !alive[v] {
                    continue;
                }
                for &g in &scheme.gamma {
                    if !reach.contains(&(v, g)) {
                        return Ok(ModelConditions::Violated(
                            ConditionViolation::NonGroundEventuality {
                                vertex: v,
                                colour: g,
                                eventuality: (*ev).clone(),
                            },
                        ));
                    }
                }
            }
        }
        // condition on constants, subsumed by the ground condition after
        // constant flooding
        if !flooded {
            for ev in &nonground {
                for (ci, cname) in self.symbols().consts.iter().enumerate() {
                    let targets: BTreeSet<usize> = graph
                        .schemes
                        .iter()
                        .enumerate()
                        .filter(|(v, s)| {
                            alive[*v] && self.symbols().colour_has(s.rho[ci], ev)
                        })
                        .map(|(v, _)| v)
                        .collect();
                    let reach = vertex_can_reach(graph, alive, &targets);
                    for v in 0..graph.schemes.len() {
                        if alive[v] && !reach.contains(&v) {
                            return Ok(ModelConditions::Violated(
                                ConditionViolation::ConstantEventuality {
                                    vertex: v,
                                    constant: cname.clone(),
                                    eventuality: (*ev).clone(),
                                },
                            ));
                        }
                    }
                }
            }
        }
        // condition on ground eventualities
        for ev in &ground {
            let targets: BTreeSet<usize> = graph
                .schemes
                .iter()
                .enumerate()
                .filter(|(v, s)| alive[*v] && self.symbols().theta_has(s.theta, ev))
                .map(|(v, _)| v)
                .collect();
            let reach = vertex_can_reach(graph, alive, &targets);
            for v in 0..graph.schemes.len() {
                if alive[v] && !reach.contains(&v) {
                    return Ok(ModelConditions::Violated(
                        ConditionViolation::GroundEventuality {
                            vertex: v,
                            eventuality: (*ev).clone(),
                        },
                    ));
                }
            }
        }
        let witness = build_witness(self, graph, alive, &ground);
        Ok(ModelConditions::Satisfiable(witness))
    }

    /// The decision procedure. The problem is expected to be constant
    /// flooded; run the flooding transformation first.
    pub fn decide(&self, max_schemes: u128) -> Result<DecideResult, CoreError> {
        let graph = self.build(max_schemes)?;
        let n = graph.schemes.len();
        let mut alive = vec![true; n];
        let mut deletions = Vec::new();
        let suit = self.suitability_matrix()?;
        let nonground: Vec<Lit> = self
            .problem
            .eventuality
            .iter()
            .filter(|e| !e.is_ground())
            .map(|e| e.lit().clone())
            .collect();
        let ground: Vec<Lit> = self
            .problem
            .eventuality
            .iter()
            .filter(|e| e.is_ground())
            .map(|e| e.lit().clone())
            .collect();

        loop {
            let mut changed = false;
            // step-resolution analogue: drop vertices without successors
            loop {
                let mut round = false;
                for v in 0..n {
                    if alive[v] && !graph.edges[v].iter().any(|&w| alive[w]) {
                        alive[v] = false;
                        deletions.push(DeletionEvent {
                            scheme: graph.schemes[v].clone(),
                            reason: DeletionReason::NoSuccessor,
                        });
                        round = true;
                        changed = true;
                    }
                }
                if !round {
                    break;
                }
            }
            // keep only vertices reachable from surviving initial vertices
            let reachable = {
                let mut reach = vec![false; n];
                let mut queue: VecDeque<usize> = graph
                    .initial
                    .iter()
                    .copied()
                    .filter(|&i| alive[i])
                    .collect();
                for &i in queue.iter() {
                    reach[i] = true;
                }
                while let Some(v) = queue.pop_front() {
                    for &w in &graph.edges[v] {
                        if alive[w] && !reach[w] {
                            reach[w] = true;
                            queue.push_back(w);
                        }
                    }
                }
                reach
            };
            for v in 0..n {
                if alive[v] && !reachable[v] {
                    alive[v] = false;
                    deletions.push(DeletionEvent {
                        scheme: graph.schemes[v].clone(),
                        reason: DeletionReason::Unreachable,
                    });
                    changed = true;
                }
            }
            // eventuality-resolution analogue
            for ev in &nonground {
                let reach = product_can_reach(&graph, &alive, &suit, |_, g| {
                    self.symbols().colour_has(g, ev)
                });
                for v in 0..n {
                    if !alive[v] {
                        continue;
                    }
                    if let Some(&g) = graph.schemes[v]
                        .gamma
                        .iter()
                        .find(|&&g| !reach.contains(&(v, g)))
                    {
                        alive[v] = false;
                        deletions.push(DeletionEvent {
                            scheme: graph.schemes[v].clone(),
                            reason: DeletionReason::NonGroundEventuality {
                                eventuality: ev.clone(),
                                colour: g,
                            },
                        });
                        changed = true;
                    }
                }
            }
            for ev in &ground {
                let targets: BTreeSet<usize> = graph
                    .schemes
                    .iter()
                    .enumerate()
                    .filter(|(v, s)| alive[*v] && self.symbols().theta_has(s.theta, ev))
                    .map(|(v, _)| v)
                    .collect();
                let reach = vertex_can_reach(&graph, &alive, &targets);
                for v in 0..n {
                    if alive[v] && !reach.contains(&v) {
                        alive[v] = false;
                        deletions.push(DeletionEvent {
                            scheme: graph.schemes[v].clone(),
                            reason: DeletionReason::GroundEventuality(ev.clone()),
                        });
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let sat = graph.initial.iter().any(|&i| alive[i]);
        let witness = if sat {
            build_witness(self, &graph, &alive, &ground.iter().collect::<Vec<_>>())
        } else {
            None
        };
        Ok(DecideResult {
            verdict: if sat {
                GraphVerdict::Satisfiable
            } else {
                GraphVerdict::Unsatisfiable
            },
            graph,
            alive,
            deletions,
            witness,
        })
    }
}

/// Vertices with a path of length at least one to a target, within the
/// alive subgraph.
fn vertex_can_reach(
    graph: &BehaviourGraph,
    alive: &[bool],
    targets: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    // reverse adjacency restricted to alive vertices
    let n = graph.schemes.len();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        if !alive[v] {
            continue;
        }
        for &w in &graph.edges[v] {
            if alive[w] {
                rev[w].push(v);
            }
        }
    }
    let mut can = BTreeSet::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &t in targets {
        for &p in &rev[t] {
            if can.insert(p) {
                queue.push_back(p);
            }
        }
    }
    while let Some(v) = queue.pop_front() {
        for &p in &rev[v] {
            if can.insert(p) {
                queue.push_back(p);
            }
        }
    }
    can
}

/// Product-graph nodes `(vertex, colour)` with a run segment of length at
/// least one to a node whose colour satisfies `target`.
fn product_can_reach(
    graph: &BehaviourGraph,
    alive: &[bool],
    suit: &[Vec<bool>],
    target: impl Fn(usize, Colour) -> bool,
) -> BTreeSet<(usize, Colour)> {
    let mut rev: BTreeMap<(usize, Colour), Vec<(usize, Colour)>> = BTreeMap::new();
    let mut targets = Vec::new();
    for (v, scheme) in graph.schemes.iter().enumerate() {
        if !alive[v] {
            continue;
        }
        for &w in &graph.edges[v] {
            if !alive[w] {
                continue;
            }
            for &g in &scheme.gamma {
                for &g2 in &graph.schemes[w].gamma {
                    if suit[g as usize][g2 as usize] {
                        rev.entry((w, g2)).or_default().push((v, g));
                    }
                }
            }
        }
        for &g in &scheme.gamma {
            if target(v, g) {
                targets.push((v, g));
            }
        }
    }
    let mut can: BTreeSet<(usize, Colour)> = BTreeSet::new();
    let mut queue: VecDeque<(usize, Colour)> = VecDeque::new();
    for t in &targets {
        if let Some(preds) = rev.get(t) {
            for &p in preds {
                if can.insert(p) {
                    queue.push_back(p);
                }
            }
        }
    }
    while let Some(node) = queue.pop_front() {
        if let Some(preds) = rev.get(&node) {
            for &p in preds {
                if can.insert(p) {
                    queue.push_back(p);
                }
            }
        }
    }
    can
}

/// Constructs a lasso path through the stable graph whose cycle visits a
/// carrier of every ground eventuality: chained covering segments until a
/// segment start repeats.
fn build_witness(
    _ctx: &GraphContext<'_>,
    graph: &BehaviourGraph,
    alive: &[bool],
    ground: &[&Lit],
) -> Option<RunWitness> {
    let start = graph.initial.iter().copied().find(|&i| alive[i])?;
    // BFS within alive vertices, paths of length >= 1; deterministic by index
    let bfs_to = |from: usize, pred: &dyn Fn(usize) -> bool| -> Option<Vec<usize>> {
        let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for &w in &graph.edges[from] {
            if alive[w] && !prev.contains_key(&w) {
                prev.insert(w, from);
                queue.push_back(w);
            }
        }
        let mut found = None;
        'search: while let Some(v) = queue.pop_front() {
            if pred(v) {
                found = Some(v);
                break 'search;
            }
            for &w in &graph.edges[v] {
                if alive[w] && !prev.contains_key(&w) && w != from {
                    prev.insert(w, v);
                    queue.push_back(w);
                }
            }
        }
        let mut v = found?;
        let mut path = vec![v];
        while v != from {
            v = prev[&v];
            path.push(v);
        }
        path.reverse();
        Some(path) // starts at `from`, ends at the found vertex
    };

    let mut seq = vec![start];
    let mut seg_starts: BTreeMap<usize, usize> = BTreeMap::new(); // vertex -> position in seq
    loop {
        let here = *seq.last().unwrap();
        if let Some(&pos) = seg_starts.get(&here) {
            let prefix = seq[..pos].to_vec();
            let cycle = seq[pos..seq.len() - 1].to_vec();
            if cycle.is_empty() {
                return None;
            }
            return Some(RunWitness { prefix, cycle });
        }
        seg_starts.insert(here, seq.len() - 1);
        // cover every ground eventuality with a strict-step visit
        for ev in ground {
            let from = *seq.last().unwrap();
            let symbols = _ctx.symbols();
            let path = bfs_to(from, &|v| symbols.theta_has(graph.schemes[v].theta, ev))?;
            seq.extend_from_slice(&path[1..]);
        }
        // one guaranteed step so segments are non-empty
        let from = *seq.last().unwrap();
        let next = *graph.edges[from].iter().find(|&&w| alive[w])?;
        seq.push(next);
    }
}

/// Checks that a witness is structurally valid for the graph: edges along
/// the path, a closing edge on the cycle, an initial start, and ground
/// eventualities covered on the cycle.
pub fn validate_witness(
    graph: &BehaviourGraph,
    symbols: &TemporalSymbols,
    problem: &TemporalProblem,
    w: &RunWitness,
) -> bool {
    if w.cycle.is_empty() {
        return false;
    }
    let full: Vec<usize> = w.prefix.iter().chain(w.cycle.iter()).copied().collect();
    if !graph.initial.contains(&full[0]) {
        return false;
    }
    for pair in full.windows(2) {
        if !graph.edges[pair[0]].contains(&pair[1]) {
            return false;
        }
    }
    let last = *w.cycle.last().unwrap();
    if !graph.edges[last].contains(&w.cycle[0]) {
        return false;
    }
    for ev in problem.eventuality.iter().filter(|e| e.is_ground()) {
        if !w
            .cycle
            .iter()
            .any(|&v| symbols.theta_has(graph.schemes[v].theta, ev.lit()))
        {
            return false;
        }
    }
    true
}

/// DOT rendering: vertices labelled with their colour-scheme literals,
/// initial vertices double-circled, deleted vertices dashed.
pub fn to_dot(
    graph: &BehaviourGraph,
    symbols: &TemporalSymbols,
    alive: Option<&[bool]>,
) -> String {
    let mut out = String::new();
    out.push_str("digraph behaviour {\n  rankdir=LR;\n");
    for (i, scheme) in graph.schemes.iter().enumerate() {
        let mut attrs = vec![format!("label=\"{}\"", scheme.label(symbols))];
        if graph.initial.contains(&i) {
            attrs.push("shape=doublecircle".into());
        } else {
            attrs.push("shape=circle".into());
        }
        if let Some(alive) = alive {
            if !alive[i] {
                attrs.push("style=dashed".into());
            }
        }
        let _ = writeln!(out, "  v{} [{}];", i, attrs.join(", "));
    }
    for (i, succs) in graph.edges.iter().enumerate() {
        for &j in succs {
            let _ = writeln!(out, "  v{i} -> v{j};");
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_problem;

    fn graph1() -> TemporalProblem {
        parse_problem(
            "
            universal { l -> exists x. P(x); }
            step { P(x) => next P(x); }
            eventuality { sometime ~P(x); sometime l; }
            ",
            Semantics::Constant,
        )
        .unwrap()
    }

    #[test]
    fn suitability_facts() {
        let p = graph1();
        let ctx = GraphContext::new(&p).unwrap();
        // γ1 = [P] is colour 1, γ2 = [~P] is colour 0
        assert!(ctx.suitable(1, 1).unwrap(), "(γ1, γ1) is suitable");
        assert!(ctx.suitable(1, 0).unwrap(), "(γ1, γ2) is suitable");
        assert!(!ctx.suitable(0, 1).unwrap(), "(γ2, γ1) is not suitable");
        assert!(ctx.suitable(0, 0).unwrap(), "(γ2, γ2) is suitable");
        // all four propositional pairs are suitable
        for a in 0..2 {
            for b in 0..2 {
                assert!(ctx.suitable_theta(a, b).unwrap());
            }
        }
    }

    #[test]
    fn graph1_vertices_are_the_consistent_schemes() {
        let p = graph1();
        let ctx = GraphContext::new(&p).unwrap();
        let g = ctx.build(1_000_000).unwrap();
        // six schemes exist, but ({γ2}, [l]) contradicts l -> exists x P(x),
        // so five are vertices; with an empty initial part all of them are
        // initial
        assert_eq!(g.schemes.len(), 5);
        assert_eq!(g.initial.len(), 5);
        assert!(!g
            .schemes
            .iter()
            .any(|s| s.gamma == vec![0] && s.theta == 1));
    }

    #[test]
    fn graph1_successors_of_all_p_vertices() {
        let p = graph1();
        let ctx = GraphContext::new(&p).unwrap();
        let g = ctx.build(1_000_000).unwrap();
        // C1 = ({γ1}, θ1): B forces P everywhere next, so the successors are
        // exactly the all-P schemes {C1, C4}
        let c1 = g
            .schemes
            .iter()
            .position(|s| s.gamma == vec![1] && s.theta == 1)
            .unwrap();
        let succ_schemes: BTreeSet<(Vec<Colour>, u32)> = g.edges[c1]
            .iter()
            .map(|&j| (g.schemes[j].gamma.clone(), g.schemes[j].theta))
            .collect();
        let expected: BTreeSet<(Vec<Colour>, u32)> =
            [(vec![1], 0u32), (vec![1], 1u32)].into_iter().collect();
        assert_eq!(succ_schemes, expected);
    }

    #[test]
    fn graph1_condition_one_is_violated() {
        let p = graph1();
        let ctx = GraphContext::new(&p).unwrap();
        let g = ctx.build(1_000_000).unwrap();
        let alive = vec![true; g.schemes.len()];
        match ctx.check_model_conditions(&g, &alive, true).unwrap() {
            ModelConditions::Violated(ConditionViolation::NonGroundEventuality {
                colour,
                eventuality,
                ..
            }) => {
                // from an all-P vertex with γ1 no run reaches ~P
                assert_eq!(colour, 1);
                assert_eq!(eventuality, Lit::neg("P"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn graph1_is_unsatisfiable_in_both_semantics() {
        for semantics in [Semantics::Constant, Semantics::Expanding] {
            let mut p = graph1();
            p.semantics = semantics;
            let ctx = GraphContext::new(&p).unwrap();
            let r = ctx.decide(1_000_000).unwrap();
            assert_eq!(r.verdict, GraphVerdict::Unsatisfiable, "{semantics}");
            assert!(!r.deletions.is_empty());
        }
    }

    #[test]
    fn empty_graph_means_initial_contradiction() {
        let p = parse_problem(
            "initial { p; } universal { ~p; }",
            Semantics::Constant,
        )
        .unwrap();
        let ctx = GraphContext::new(&p).unwrap();
        let g = ctx.build(1_000_000).unwrap();
        assert!(g.is_empty());
        let r = ctx.decide(1_000_000).unwrap();
        assert_eq!(r.verdict, GraphVerdict::Unsatisfiable);
    }

    #[test]
    fn trivially_satisfiable_problem() {
        let p = parse_problem("initial { p; }", Semantics::Constant).unwrap();
        let ctx = GraphContext::new(&p).unwrap();
        let r = ctx.decide(1_000_000).unwrap();
        assert_eq!(r.verdict, GraphVerdict::Satisfiable);
    }

    #[test]
    fn empty_eventualities_with_nonempty_graph_is_satisfiable() {
        let p = parse_problem(
            "initial { P(c); } step { P(x) => next P(x); }",
            Semantics::Constant,
        )
        .unwrap();
        let ctx = GraphContext::new(&p).unwrap();
        let g = ctx.build(1_000_000).unwrap();
        assert!(!g.is_empty());
        let alive = vec![true; g.schemes.len()];
        match ctx.check_model_conditions(&g, &alive, true).unwrap() {
            ModelConditions::Satisfiable(w) => {
                let w = w.expect("witness lasso");
                assert!(validate_witness(&g, ctx.symbols(), &p, &w));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn witness_cycle_carries_ground_eventualities() {
        // q alternates; sometime ~q must recur on the cycle
        let p = parse_problem(
            "
            initial { q; }
            eventuality { sometime ~q; sometime q; }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let ctx = GraphContext::new(&p).unwrap();
        let r = ctx.decide(1_000_000).unwrap();
        assert_eq!(r.verdict, GraphVerdict::Satisfiable);
        let w = r.witness.expect("witness");
        assert!(validate_witness(&r.graph, ctx.symbols(), &p, &w));
        let has_q = w
            .cycle
            .iter()
            .any(|&v| ctx.symbols().theta_has(r.graph.schemes[v].theta, &Lit::pos("q")));
        let has_not_q = w
            .cycle
            .iter()
            .any(|&v| ctx.symbols().theta_has(r.graph.schemes[v].theta, &Lit::neg("q")));
        assert!(has_q && has_not_q);
    }

    #[test]
    fn dot_export_marks_initial_and_deleted() {
        let p = graph1();
        let ctx = GraphContext::new(&p).unwrap();
        let r = ctx.decide(1_000_000).unwrap();
        let dot = to_dot(&r.graph, ctx.symbols(), Some(&r.alive));
        assert!(dot.contains("doublecircle"));
        assert!(dot.contains("style=dashed"));
        assert!(dot.contains("digraph behaviour"));
    }
}
