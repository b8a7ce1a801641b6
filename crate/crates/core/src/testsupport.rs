//! Reference implementations and generators used by the test suites.
//!
//! Everything here is deliberately independent of the main code paths it is
//! used to check: [`fo_eval`] evaluates sentences over explicit finite
//! models by direct recursion, and [`brute_force_sat`] enumerates concrete
//! models instead of colour structures. Not intended for production use.

use std::collections::BTreeMap;

use crate::problem::{EventualityClause, Lit, Semantics, StepClause, TemporalProblem};
use crate::syntax::{Formula, Name, Term};

/// Tiny deterministic PRNG (splitmix64) so the sweeps need no external crates.
#[derive(Clone, Debug)]
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform value in `0..n` (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// True with probability `num/den`.
    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.next_u64() % den < num
    }
}

/// An explicit finite first-order model over unary predicates, propositions
/// and constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteModel {
    pub size: usize,
    /// For each unary predicate, which elements satisfy it.
    pub rows: BTreeMap<Name, Vec<bool>>,
    pub props: BTreeMap<Name, bool>,
    pub consts: BTreeMap<Name, usize>,
}

/// Direct recursive truth evaluation of a sentence in a finite model.
pub fn fo_eval(m: &FiniteModel, f: &Formula) -> bool {
    fn term_elem(m: &FiniteModel, t: &Term, env: &[(Name, usize)]) -> usize {
        match t {
            Term::Var(v) => {
                env.iter()
                    .rev()
                    .find(|(n, _)| n == v)
                    .unwrap_or_else(|| panic!("unbound variable {v}"))
                    .1
            }
            Term::Const(c) => m.consts[c],
        }
    }
    fn go(m: &FiniteModel, f: &Formula, env: &mut Vec<(Name, usize)>) -> bool {
        match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(p, ts) => match ts.len() {
                0 => m.props[p],
                1 => m.rows[p][term_elem(m, &ts[0], env)],
                _ => panic!("non-monadic atom in brute-force model"),
            },
            Formula::Not(g) => !go(m, g, env),
            Formula::And(fs) => fs.iter().all(|g| go(m, g, env)),
            Formula::Or(fs) => fs.iter().any(|g| go(m, g, env)),
            Formula::Implies(a, b) => !go(m, a, env) || go(m, b, env),
            Formula::Iff(a, b) => go(m, a, env) == go(m, b, env),
            Formula::Forall(v, g) => (0..m.size).all(|e| {
                env.push((v.clone(), e));
                let r = go(m, g, env);
                env.pop();
                r
            }),
            Formula::Exists(v, g) => (0..m.size).any(|e| {
                env.push((v.clone(), e));
                let r = go(m, g, env);
                env.pop();
                r
            }),
            other => panic!("temporal operator in first-order sentence: {other}"),
        }
    }
    go(m, f, &mut Vec::new())
}

/// Exhaustive satisfiability search over concrete models with domain sizes
/// `1..=max_size`; returns the first model found.
pub fn brute_force_sat(sentences: &[Formula], max_size: usize) -> Option<FiniteModel> {
    let mut preds = Vec::new();
    let mut props = Vec::new();
    let mut consts = Vec::new();
    for s in sentences {
        let sig = s.signature().expect("consistent arities");
        for (p, &a) in &sig.predicates {
            match a {
                0 => {
                    if !props.contains(p) {
                        props.push(p.clone());
                    }
                }
                1 => {
                    if !preds.contains(p) {
                        preds.push(p.clone());
                    }
                }
                _ => panic!("non-monadic sentence"),
            }
        }
        for c in &sig.constants {
            if !consts.contains(c) {
                consts.push(c.clone());
            }
        }
    }
    preds.sort();
    props.sort();
    consts.sort();

    for size in 1..=max_size {
        // each predicate row is a subset of `size` elements; iterate all
        let row_space = 1u64 << size;
        let mut row_idx = vec![0u64; preds.len()];
        loop {
            let rows: BTreeMap<Name, Vec<bool>> = preds
                .iter()
                .zip(&row_idx)
                .map(|(p, &bits)| {
                    (
                        p.clone(),
                        (0..size).map(|e| bits & (1 << e) != 0).collect(),
                    )
                })
                .collect();
            for prop_bits in 0..(1u64 << props.len()) {
                let props_map: BTreeMap<Name, bool> = props
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.clone(), prop_bits & (1 << i) != 0))
                    .collect();
                let mut const_idx = vec![0usize; consts.len()];
                loop {
                    let model = FiniteModel {
                        size,
                        rows: rows.clone(),
                        props: props_map.clone(),
                        consts: consts
                            .iter()
                            .zip(&const_idx)
                            .map(|(c, &e)| (c.clone(), e))
                            .collect(),
                    };
                    if sentences.iter().all(|s| fo_eval(&model, s)) {
                        return Some(model);
                    }
                    // advance constant assignment
                    let mut k = 0;
                    loop {
                        if k == const_idx.len() {
                            break;
                        }
                        const_idx[k] += 1;
                        if const_idx[k] < size {
                            break;
                        }
                        const_idx[k] = 0;
                        k += 1;
                    }
                    if const_idx.iter().all(|&e| e == 0) {
                        break;
                    }
                }
            }
            // advance predicate rows
            let mut k = 0;
            loop {
                if k == row_idx.len() {
                    break;
                }
                row_idx[k] += 1;
                if row_idx[k] < row_space {
                    break;
                }
                row_idx[k] = 0;
                k += 1;
            }
            if row_idx.iter().all(|&b| b == 0) {
                break;
            }
        }
        if preds.is_empty() {
            // only one (empty) row assignment exists; sizes beyond 1 add nothing
            break;
        }
    }
    None
}

/// Parameters for [`random_sentence`].
#[derive(Clone, Debug)]
pub struct SentenceParams {
    pub preds: Vec<Name>,
    pub props: Vec<Name>,
    pub consts: Vec<Name>,
    pub max_depth: usize,
}

impl Default for SentenceParams {
    fn default() -> Self {
        SentenceParams {
            preds: vec![Name::new("P"), Name::new("Q"), Name::new("R")],
            props: vec![Name::new("p"), Name::new("q")],
            consts: vec![Name::new("c")],
            max_depth: 4,
        }
    }
}

/// A random closed monadic sentence.
pub fn random_sentence(rng: &mut SplitMix64, params: &SentenceParams) -> Formula {
    gen_sentence(rng, params, params.max_depth, &mut Vec::new())
}

fn gen_sentence(
    rng: &mut SplitMix64,
    params: &SentenceParams,
    depth: usize,
    bound: &mut Vec<Name>,
) -> Formula {
    let leaf_only = depth == 0;
    let choice = if leaf_only { rng.below(2) } else { rng.below(9) };
    match choice {
        // leaves
        0 | 1 if leaf_only || rng.chance(1, 3) => {
            let mut options: Vec<Formula> = Vec::new();
            for p in &params.props {
                options.push(Formula::Atom(p.clone(), vec![]));
            }
            for p in &params.preds {
                for v in bound.iter() {
                    options.push(Formula::Atom(p.clone(), vec![Term::Var(v.clone())]));
                }
                for c in &params.consts {
                    options.push(Formula::Atom(p.clone(), vec![Term::Const(c.clone())]));
                }
            }
            if options.is_empty() {
                return Formula::True;
            }
            let f = options[rng.below(options.len())].clone();
            if rng.chance(1, 2) {
                Formula::not(f)
            } else {
                f
            }
        }
        0 | 2 => {
            let n = 2 + rng.below(2);
            Formula::and(
                (0..n)
                    .map(|_| gen_sentence(rng, params, depth - 1, bound))
                    .collect(),
            )
        }
        1 | 3 => {
            let n = 2 + rng.below(2);
            Formula::or(
                (0..n)
                    .map(|_| gen_sentence(rng, params, depth - 1, bound))
                    .collect(),
            )
        }
        4 => Formula::not(gen_sentence(rng, params, depth - 1, bound)),
        5 => Formula::implies(
            gen_sentence(rng, params, depth - 1, bound),
            gen_sentence(rng, params, depth - 1, bound),
        ),
        6 => Formula::iff(
            gen_sentence(rng, params, depth - 1, bound),
            gen_sentence(rng, params, depth - 1, bound),
        ),
        _ => {
            let v = Name::new(format!("v{}", bound.len()));
            bound.push(v.clone());
            let body = gen_sentence(rng, params, depth - 1, bound);
            bound.pop();
            if rng.chance(1, 2) {
                Formula::Forall(v, Box::new(body))
            } else {
                Formula::Exists(v, Box::new(body))
            }
        }
    }
}

/// Parameters for [`random_problem`].
#[derive(Clone, Debug)]
pub struct ProblemParams {
    pub preds: Vec<Name>,
    pub props: Vec<Name>,
    pub consts: Vec<Name>,
    pub max_universal: usize,
    pub max_initial: usize,
    pub max_step: usize,
    pub max_eventualities: usize,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            preds: vec![Name::new("P"), Name::new("Q")],
            props: vec![Name::new("p"), Name::new("q")],
            consts: vec![Name::new("c")],
            max_universal: 2,
            max_initial: 2,
            max_step: 3,
            max_eventualities: 2,
        }
    }
}

/// A random monodic temporal problem in normal form, valid by construction.
pub fn random_problem(
    rng: &mut SplitMix64,
    params: &ProblemParams,
    semantics: Semantics,
) -> TemporalProblem {
    let mut p = TemporalProblem::new(semantics);
    for pred in &params.preds {
        p.signature.declare_predicate(pred.clone(), 1).unwrap();
    }
    for prop in &params.props {
        p.signature.declare_predicate(prop.clone(), 0).unwrap();
    }
    let use_const = rng.chance(1, 2) && !params.consts.is_empty();
    if use_const {
        p.signature
            .declare_constant(params.consts[0].clone())
            .unwrap();
    }
    let consts: Vec<Name> = if use_const {
        vec![params.consts[0].clone()]
    } else {
        vec![]
    };
    let sp = SentenceParams {
        preds: params.preds.clone(),
        props: params.props.clone(),
        consts,
        max_depth: 3,
    };
    for _ in 0..rng.below(params.max_universal + 1) {
        p.universal.insert(random_sentence(rng, &sp));
    }
    for _ in 0..rng.below(params.max_initial + 1) {
        p.initial.insert(random_sentence(rng, &sp));
    }

    let rand_lit = |rng: &mut SplitMix64, names: &[Name]| -> Lit {
        let name = names[rng.below(names.len())].clone();
        if rng.chance(1, 2) {
            Lit::pos(name)
        } else {
            Lit::neg(name)
        }
    };
    let mut lhs_seen = std::collections::BTreeSet::new();
    for _ in 0..rng.below(params.max_step + 1) {
        let ground = rng.chance(1, 3);
        let names = if ground { &params.props } else { &params.preds };
        if names.is_empty() {
            continue;
        }
        let lhs = rand_lit(rng, names);
        let rhs = rand_lit(rng, names);
        if !lhs_seen.insert((ground, lhs.clone())) {
            continue;
        }
        p.step.insert(if ground {
            StepClause::Ground { lhs, rhs }
        } else {
            StepClause::NonGround { lhs, rhs }
        });
    }
    for _ in 0..rng.below(params.max_eventualities + 1) {
        let ground = rng.chance(1, 3);
        let names = if ground { &params.props } else { &params.preds };
        if names.is_empty() {
            continue;
        }
        let lit = rand_lit(rng, names);
        p.eventuality.insert(if ground {
            EventualityClause::Ground(lit)
        } else {
            EventualityClause::NonGround(lit)
        });
    }
    p.validate().expect("generated problem is valid");
    p
}
