//! Derived, merged and full merged step clauses, colour schemes and their
//! categorical formulae.
//!
//! A colour is a total sign assignment over the unary predicates occurring in
//! the step and eventuality parts; a colour scheme `(Γ, θ, ρ)` fixes a
//! non-empty set of realized colours, a propositional valuation and a colour
//! for every constant. Schemes double as the vertices of the behaviour graph
//! and as the source of the canonical merged clauses the prover saturates on.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::CoreError;
use crate::problem::{Lit, Semantics, StepClause, TemporalProblem};
use crate::syntax::{Formula, Name, Term};

/// A predicate colour over the temporal predicate list: bit `i` set means
/// predicate `i` is positive in the colour.
pub type Colour = u32;

/// A propositional colour over the temporal proposition list.
pub type PropColour = u32;

/// The unary predicates and propositions of the step/eventuality parts plus
/// the problem's constants; colours are read against these sorted lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalSymbols {
    pub preds: Vec<Name>,
    pub props: Vec<Name>,
    pub consts: Vec<Name>,
}

impl TemporalSymbols {
    pub fn of(problem: &TemporalProblem) -> Self {
        TemporalSymbols {
            preds: problem.temporal_predicates(),
            props: problem.temporal_propositions(),
            consts: problem.constants().into_iter().collect(),
        }
    }

    pub fn n_colours(&self) -> usize {
        1usize << self.preds.len()
    }

    pub fn n_prop_colours(&self) -> usize {
        1usize << self.props.len()
    }

    /// Literal set of a predicate colour, applied to a term.
    pub fn colour_formula(&self, colour: Colour, t: &Term) -> Formula {
        Formula::and(
            self.preds
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let atom = Formula::Atom(p.clone(), vec![t.clone()]);
                    if colour & (1 << i) != 0 {
                        atom
                    } else {
                        Formula::not(atom)
                    }
                })
                .collect(),
        )
    }

    /// Literal set of a propositional colour.
    pub fn prop_colour_formula(&self, theta: PropColour) -> Formula {
        Formula::and(
            self.props
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let atom = Formula::Atom(p.clone(), vec![]);
                    if theta & (1 << i) != 0 {
                        atom
                    } else {
                        Formula::not(atom)
                    }
                })
                .collect(),
        )
    }

    /// Whether a literal is true under a predicate colour.
    pub fn colour_has(&self, colour: Colour, lit: &Lit) -> bool {
        match self.preds.iter().position(|p| p == &lit.name) {
            Some(i) => (colour & (1 << i) != 0) == lit.positive,
            None => false,
        }
    }

    /// Whether a literal is true under a propositional colour.
    pub fn theta_has(&self, theta: PropColour, lit: &Lit) -> bool {
        match self.props.iter().position(|p| p == &lit.name) {
            Some(i) => (theta & (1 << i) != 0) == lit.positive,
            None => false,
        }
    }

    pub fn colour_label(&self, colour: Colour) -> String {
        let parts: Vec<String> = self
            .preds
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if colour & (1 << i) != 0 {
                    format!("{p}")
                } else {
                    format!("~{p}")
                }
            })
            .collect();
        format!("[{}]", parts.join(" "))
    }

    pub fn theta_label(&self, theta: PropColour) -> String {
        let parts: Vec<String> = self
            .props
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if theta & (1 << i) != 0 {
                    format!("{p}")
                } else {
                    format!("~{p}")
                }
            })
            .collect();
        format!("[{}]", parts.join(" "))
    }
}

/// A colour scheme `(Γ, θ, ρ)`: realized predicate colours, a propositional
/// colour, and the colour of each constant (parallel to the sorted constant
/// list, values drawn from `gamma`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColourScheme {
    pub gamma: Vec<Colour>,
    pub theta: PropColour,
    pub rho: Vec<Colour>,
}

impl ColourScheme {
    pub fn label(&self, symbols: &TemporalSymbols) -> String {
        let gammas: Vec<String> = self
            .gamma
            .iter()
            .map(|&c| symbols.colour_label(c))
            .collect();
        let mut s = format!("Γ={{{}}}", gammas.join(" "));
        if !symbols.props.is_empty() {
            s.push_str(&format!(" θ={}", symbols.theta_label(self.theta)));
        }
        for (c, colour) in symbols.consts.iter().zip(&self.rho) {
            s.push_str(&format!(" {c}↦{}", symbols.colour_label(*colour)));
        }
        s
    }
}

impl fmt::Display for ColourScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {}, {:?})", self.gamma, self.theta, self.rho)
    }
}

/// How a derived step clause was built from the original clauses.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DerivedOrigin {
    /// Universally quantified disjunction of a clause subset (constant
    /// domains only).
    ForallForm,
    /// Existentially quantified conjunction of a clause subset.
    ExistsForm,
    /// Instantiation of one clause at a constant.
    ConstInstance(Name),
    /// An original ground step clause taken as-is.
    OriginalGround,
}

/// A derived step clause: closed left- and right-hand sides.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DerivedStepClause {
    pub lhs: Formula,
    pub rhs: Formula,
    pub origin: DerivedOrigin,
}

impl fmt::Display for DerivedStepClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => next {}", self.lhs, self.rhs)
    }
}

/// A merged derived step clause: the conjunction of derived or original
/// ground clauses. Both sides are closed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MergedClause {
    pub lhs: Formula,
    pub rhs: Formula,
}

impl MergedClause {
    pub fn degenerate() -> Self {
        MergedClause {
            lhs: Formula::True,
            rhs: Formula::True,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.lhs == Formula::True && self.rhs == Formula::True
    }
}

impl fmt::Display for MergedClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => next {}", self.lhs, self.rhs)
    }
}

/// Conjoins derived or ground clauses into a merged derived step clause.
pub fn merge<'a>(parts: impl IntoIterator<Item = &'a DerivedStepClause>) -> MergedClause {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for p in parts {
        lhs.push(p.lhs.clone());
        rhs.push(p.rhs.clone());
    }
    MergedClause {
        lhs: Formula::and(lhs),
        rhs: Formula::and(rhs),
    }
}

/// A full merged step clause `∀x(𝒜 ∧ A(x) => next (ℬ ∧ B(x)))`: a merged
/// derived clause extended with conjunctions of original non-ground clause
/// sides over the shared variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FullMergedClause {
    pub merged: MergedClause,
    /// Conjunction of left-hand literals, over the free variable.
    pub a: Formula,
    /// Conjunction of matching right-hand literals, over the free variable.
    pub b: Formula,
}

impl FullMergedClause {
    /// The free variable used in `a`/`b`.
    pub fn var() -> Term {
        Term::var("x")
    }

    pub fn from_merged(merged: MergedClause) -> Self {
        FullMergedClause {
            merged,
            a: Formula::True,
            b: Formula::True,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.merged.is_degenerate() && self.a == Formula::True && self.b == Formula::True
    }

    /// `𝒜 ∧ A(x)` with `x` free.
    pub fn lhs(&self) -> Formula {
        Formula::and(vec![self.merged.lhs.clone(), self.a.clone()])
    }

    /// `ℬ ∧ B(x)` with `x` free.
    pub fn rhs(&self) -> Formula {
        Formula::and(vec![self.merged.rhs.clone(), self.b.clone()])
    }
}

impl fmt::Display for FullMergedClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "forall x. ({} => next ({}))", self.lhs(), self.rhs())
    }
}

/// Extends a merged derived clause with original non-ground step clauses.
pub fn full_merge(merged: MergedClause, originals: &[&StepClause]) -> FullMergedClause {
    let x = FullMergedClause::var();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for sc in originals {
        if let StepClause::NonGround { lhs, rhs } = sc {
            a.push(lhs.applied(&x));
            b.push(rhs.applied(&x));
        }
    }
    FullMergedClause {
        merged,
        a: Formula::and(a),
        b: Formula::and(b),
    }
}

/// `F_C`, `A_C`, `B_C` for a colour scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoricalTriple {
    pub f: Formula,
    pub a: Formula,
    pub b: Formula,
}

/// Derived step clauses for a non-empty subset of the non-ground step
/// clauses: the universally quantified disjunction (constant domains only),
/// the existentially quantified conjunction, and one instance per clause and
/// constant.
pub fn derive_step_clauses(
    problem: &TemporalProblem,
    subset: &[&StepClause],
) -> Result<Vec<DerivedStepClause>, CoreError> {
    if subset.is_empty() {
        return Err(CoreError::Invalid(
            "derived step clauses need a non-empty clause subset".into(),
        ));
    }
    let y = Term::var("y");
    let mut lhs_disj = Vec::new();
    let mut rhs_disj = Vec::new();
    let mut lhs_conj = Vec::new();
    let mut rhs_conj = Vec::new();
    for sc in subset {
        let StepClause::NonGround { lhs, rhs } = sc else {
            return Err(CoreError::Invalid(
                "derived step clauses are built from non-ground clauses".into(),
            ));
        };
        lhs_disj.push(lhs.applied(&y));
        rhs_disj.push(rhs.applied(&y));
        lhs_conj.push(lhs.applied(&y));
        rhs_conj.push(rhs.applied(&y));
    }
    let mut out = Vec::new();
    if problem.semantics == Semantics::Constant {
        out.push(DerivedStepClause {
            lhs: Formula::forall("y", Formula::or(lhs_disj)),
            rhs: Formula::forall("y", Formula::or(rhs_disj)),
            origin: DerivedOrigin::ForallForm,
        });
    }
    out.push(DerivedStepClause {
        lhs: Formula::exists("y", Formula::and(lhs_conj)),
        rhs: Formula::exists("y", Formula::and(rhs_conj)),
        origin: DerivedOrigin::ExistsForm,
    });
    for sc in subset {
        if let StepClause::NonGround { lhs, rhs } = sc {
            for c in &problem.signature.constants {
                let t = Term::Const(c.clone());
                out.push(DerivedStepClause {
                    lhs: lhs.applied(&t),
                    rhs: rhs.applied(&t),
                    origin: DerivedOrigin::ConstInstance(c.clone()),
                });
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

// ---------------------------------------------------------------------------
// The clause engine
// ---------------------------------------------------------------------------

/// Precomputed clause machinery for one problem.
pub struct ClauseEngine<'a> {
    problem: &'a TemporalProblem,
    symbols: TemporalSymbols,
    nonground: Vec<&'a StepClause>,
    ground: Vec<&'a StepClause>,
}

impl<'a> ClauseEngine<'a> {
    pub fn new(problem: &'a TemporalProblem) -> Self {
        let symbols = TemporalSymbols::of(problem);
        let nonground: Vec<&StepClause> =
            problem.step.iter().filter(|sc| !sc.is_ground()).collect();
        let ground: Vec<&StepClause> = problem.step.iter().filter(|sc| sc.is_ground()).collect();
        ClauseEngine {
            problem,
            symbols,
            nonground,
            ground,
        }
    }

    pub fn symbols(&self) -> &TemporalSymbols {
        &self.symbols
    }

    pub fn problem(&self) -> &TemporalProblem {
        self.problem
    }

    fn expanding(&self) -> bool {
        self.problem.semantics == Semantics::Expanding
    }

    /// `A_γ(x)` at a term: left-hand literals of step clauses matched by the
    /// colour.
    pub fn a_gamma(&self, colour: Colour, t: &Term) -> Formula {
        Formula::and(
            self.nonground
                .iter()
                .filter(|sc| self.symbols.colour_has(colour, sc.lhs()))
                .map(|sc| sc.lhs().applied(t))
                .collect(),
        )
    }

    /// `B_γ(x)` at a term: right-hand sides of the matched step clauses.
    pub fn b_gamma(&self, colour: Colour, t: &Term) -> Formula {
        Formula::and(
            self.nonground
                .iter()
                .filter(|sc| self.symbols.colour_has(colour, sc.lhs()))
                .map(|sc| sc.rhs().applied(t))
                .collect(),
        )
    }

    pub fn a_theta(&self, theta: PropColour) -> Formula {
        Formula::and(
            self.ground
                .iter()
                .filter(|sc| self.symbols.theta_has(theta, sc.lhs()))
                .map(|sc| sc.lhs().as_prop())
                .collect(),
        )
    }

    pub fn b_theta(&self, theta: PropColour) -> Formula {
        Formula::and(
            self.ground
                .iter()
                .filter(|sc| self.symbols.theta_has(theta, sc.lhs()))
                .map(|sc| sc.rhs().as_prop())
                .collect(),
        )
    }

    /// `F_γ` at a term.
    pub fn f_gamma(&self, colour: Colour, t: &Term) -> Formula {
        self.symbols.colour_formula(colour, t)
    }

    /// Total number of colour schemes of the problem.
    pub fn scheme_count(&self) -> u128 {
        let m = self.symbols.n_colours() as u32;
        let n_theta = self.symbols.n_prop_colours() as u128;
        let k = self.symbols.consts.len() as u32;
        // sum over Γ sizes: C(m, s) * n_theta * s^k
        let mut total: u128 = 0;
        let mut binom: u128 = m as u128; // C(m, 1)
        for s in 1..=m {
            let rho = (s as u128).pow(k);
            total = total.saturating_add(binom.saturating_mul(n_theta).saturating_mul(rho));
            // C(m, s+1) = C(m, s) * (m - s) / (s + 1)
            binom = binom.saturating_mul((m - s) as u128) / (s as u128 + 1);
        }
        total
    }

    /// Enumerates all colour schemes in a fixed canonical order: Γ by subset
    /// bitmask, then θ, then the constant distribution.
    pub fn schemes(&self) -> SchemeIter<'_> {
        SchemeIter::new(&self.symbols)
    }

    /// The categorical triple `(F_C, A_C, B_C)` of a scheme. In expanding
    /// semantics the universally quantified conjunct of `A_C`/`B_C` is
    /// omitted.
    pub fn categorical(&self, scheme: &ColourScheme) -> CategoricalTriple {
        let y = Term::var("y");
        let mut f = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &g in &scheme.gamma {
            f.push(Formula::exists("y", self.f_gamma(g, &y)));
            a.push(Formula::exists("y", self.a_gamma(g, &y)));
            b.push(Formula::exists("y", self.b_gamma(g, &y)));
        }
        f.push(self.symbols.prop_colour_formula(scheme.theta));
        a.push(self.a_theta(scheme.theta));
        b.push(self.b_theta(scheme.theta));
        for (cname, &colour) in self.symbols.consts.iter().zip(&scheme.rho) {
            let t = Term::Const(cname.clone());
            f.push(self.f_gamma(colour, &t));
            a.push(self.a_gamma(colour, &t));
            b.push(self.b_gamma(colour, &t));
        }
        f.push(Formula::forall(
            "y",
            Formula::or(
                scheme
                    .gamma
                    .iter()
                    .map(|&g| self.f_gamma(g, &y))
                    .collect(),
            ),
        ));
        if !self.expanding() {
            a.push(Formula::forall(
                "y",
                Formula::or(
                    scheme
                        .gamma
                        .iter()
                        .map(|&g| self.a_gamma(g, &y))
                        .collect(),
                ),
            ));
            b.push(Formula::forall(
                "y",
                Formula::or(
                    scheme
                        .gamma
                        .iter()
                        .map(|&g| self.b_gamma(g, &y))
                        .collect(),
                ),
            ));
        }
        CategoricalTriple {
            f: Formula::and(f),
            a: Formula::and(a),
            b: Formula::and(b),
        }
    }

    /// The canonical merged derived step clause `A_C => next B_C`.
    pub fn canonical_merged(&self, scheme: &ColourScheme) -> MergedClause {
        let t = self.categorical(scheme);
        MergedClause { lhs: t.a, rhs: t.b }
    }

    /// The canonical merged step clause for a scheme and one of its colours:
    /// `∀x(A_C ∧ A_γ(x) => next (B_C ∧ B_γ(x)))`.
    pub fn canonical_full(
        &self,
        scheme: &ColourScheme,
        colour: Colour,
    ) -> Result<FullMergedClause, CoreError> {
        if !scheme.gamma.contains(&colour) {
            return Err(CoreError::Invalid(format!(
                "colour {colour} not in the scheme's Γ"
            )));
        }
        let x = FullMergedClause::var();
        Ok(FullMergedClause {
            merged: self.canonical_merged(scheme),
            a: self.a_gamma(colour, &x),
            b: self.b_gamma(colour, &x),
        })
    }

    // --- projection-level candidate enumeration -------------------------

    /// Distinct projections of colours onto the non-ground step clauses,
    /// i.e. the realizable subsets of clauses a colour can trigger.
    fn projections(&self) -> Vec<u64> {
        let mut set = BTreeSet::new();
        for colour in 0..self.symbols.n_colours() as Colour {
            let mut mask = 0u64;
            for (i, sc) in self.nonground.iter().enumerate() {
                if self.symbols.colour_has(colour, sc.lhs()) {
                    mask |= 1 << i;
                }
            }
            set.insert(mask);
        }
        set.into_iter().collect()
    }

    /// Distinct projections of propositional colours onto the ground step
    /// clauses.
    fn theta_projections(&self) -> Vec<u64> {
        let mut set = BTreeSet::new();
        for theta in 0..self.symbols.n_prop_colours() as PropColour {
            let mut mask = 0u64;
            for (i, sc) in self.ground.iter().enumerate() {
                if self.symbols.theta_has(theta, sc.lhs()) {
                    mask |= 1 << i;
                }
            }
            set.insert(mask);
        }
        set.into_iter().collect()
    }

    fn proj_a(&self, mask: u64, t: &Term) -> Formula {
        Formula::and(
            self.nonground
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, sc)| sc.lhs().applied(t))
                .collect(),
        )
    }

    fn proj_b(&self, mask: u64, t: &Term) -> Formula {
        Formula::and(
            self.nonground
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, sc)| sc.rhs().applied(t))
                .collect(),
        )
    }

    fn theta_proj_a(&self, mask: u64) -> Formula {
        Formula::and(
            self.ground
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, sc)| sc.lhs().as_prop())
                .collect(),
        )
    }

    fn theta_proj_b(&self, mask: u64) -> Formula {
        Formula::and(
            self.ground
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, sc)| sc.rhs().as_prop())
                .collect(),
        )
    }

    /// All distinct canonical merged derived clauses `A_C => next B_C`, in
    /// canonical order.
    ///
    /// Two schemes produce the same clause whenever their colours project to
    /// the same step-clause subsets, so the enumeration runs over projection
    /// sets instead of full colour sets; every projection set is realized by
    /// some scheme and vice versa.
    pub fn canonical_merged_candidates(&self) -> Vec<MergedClause> {
        let mut out = BTreeSet::new();
        self.for_each_candidate_base(|_, merged| {
            out.insert(merged);
        });
        out.into_iter().collect()
    }

    /// All distinct canonical full merged clauses (including the merged-only
    /// ones with `A = B = true`), in canonical order.
    pub fn canonical_full_candidates(&self) -> Vec<FullMergedClause> {
        let mut out = BTreeSet::new();
        self.for_each_candidate_base(|engine, merged| {
            for &pr in engine.current_projs {
                let x = FullMergedClause::var();
                out.insert(FullMergedClause {
                    merged: merged.clone(),
                    a: engine.engine.proj_a(pr, &x),
                    b: engine.engine.proj_b(pr, &x),
                });
            }
            out.insert(FullMergedClause::from_merged(merged));
        });
        out.into_iter().collect()
    }

    fn for_each_candidate_base(&self, mut f: impl FnMut(&CandidateCtx<'_, 'a>, MergedClause)) {
        let projs = self.projections();
        let theta_projs = self.theta_projections();
        let n_consts = self.symbols.consts.len();
        let y = Term::var("y");
        // non-empty subsets of the realizable projections
        for set_mask in 1u64..(1u64 << projs.len()) {
            let chosen: Vec<u64> = projs
                .iter()
                .enumerate()
                .filter(|(i, _)| set_mask & (1 << i) != 0)
                .map(|(_, &m)| m)
                .collect();
            for &tp in &theta_projs {
                // constant distributions over the chosen projections
                let mut rho_idx = vec![0usize; n_consts];
                loop {
                    let mut a = Vec::new();
                    let mut b = Vec::new();
                    for &pr in &chosen {
                        a.push(Formula::exists("y", self.proj_a(pr, &y)));
                        b.push(Formula::exists("y", self.proj_b(pr, &y)));
                    }
                    a.push(self.theta_proj_a(tp));
                    b.push(self.theta_proj_b(tp));
                    for (ci, cname) in self.symbols.consts.iter().enumerate() {
                        let t = Term::Const(cname.clone());
                        a.push(self.proj_a(chosen[rho_idx[ci]], &t));
                        b.push(self.proj_b(chosen[rho_idx[ci]], &t));
                    }
                    if !self.expanding() {
                        a.push(Formula::forall(
                            "y",
                            Formula::or(chosen.iter().map(|&pr| self.proj_a(pr, &y)).collect()),
                        ));
                        b.push(Formula::forall(
                            "y",
                            Formula::or(chosen.iter().map(|&pr| self.proj_b(pr, &y)).collect()),
                        ));
                    }
                    let merged = MergedClause {
                        lhs: Formula::and(a),
                        rhs: Formula::and(b),
                    };
                    let ctx = CandidateCtx {
                        engine: self,
                        current_projs: &chosen,
                    };
                    f(&ctx, merged);
                    // advance the constant distribution
                    let mut k = 0;
                    loop {
                        if k == n_consts {
                            break;
                        }
                        rho_idx[k] += 1;
                        if rho_idx[k] < chosen.len() {
                            break;
                        }
                        rho_idx[k] = 0;
                        k += 1;
                    }
                    if rho_idx.iter().all(|&i| i == 0) {
                        break;
                    }
                }
            }
        }
    }
}

struct CandidateCtx<'b, 'a> {
    engine: &'b ClauseEngine<'a>,
    current_projs: &'b [u64],
}

/// Iterator over all colour schemes in canonical order.
pub struct SchemeIter<'s> {
    symbols: &'s TemporalSymbols,
    gamma_mask: u64,
    theta: PropColour,
    rho_idx: Vec<usize>,
    done: bool,
}

impl<'s> SchemeIter<'s> {
    fn new(symbols: &'s TemporalSymbols) -> Self {
        SchemeIter {
            symbols,
            gamma_mask: 1,
            theta: 0,
            rho_idx: vec![0; symbols.consts.len()],
            done: symbols.n_colours() > 63,
        }
    }

    fn gamma_vec(&self) -> Vec<Colour> {
        (0..self.symbols.n_colours() as u32)
            .filter(|&c| self.gamma_mask & (1 << c) != 0)
            .collect()
    }
}

impl Iterator for SchemeIter<'_> {
    type Item = ColourScheme;

    fn next(&mut self) -> Option<ColourScheme> {
        if self.done {
            return None;
        }
        let gamma = self.gamma_vec();
        let scheme = ColourScheme {
            gamma: gamma.clone(),
            theta: self.theta,
            rho: self.rho_idx.iter().map(|&i| gamma[i]).collect(),
        };
        // advance rho, then theta, then gamma
        let mut k = 0;
        loop {
            if k == self.rho_idx.len() {
                break;
            }
            self.rho_idx[k] += 1;
            if self.rho_idx[k] < gamma.len() {
                return Some(scheme);
            }
            self.rho_idx[k] = 0;
            k += 1;
        }
        self.theta += 1;
        if (self.theta as usize) < self.symbols.n_prop_colours() {
            return Some(scheme);
        }
        self.theta = 0;
        self.gamma_mask += 1;
        if self.gamma_mask >= (1u64 << self.symbols.n_colours()) {
            self.done = true;
        }
        Some(scheme)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_problem;

    /// The running two-colour example: S = {P(x) => next P(x)},
    /// U = {l -> exists x P(x)}, E = {sometime ~P(x), sometime l}.
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
    fn graph1_has_six_schemes() {
        let p = graph1();
        let eng = ClauseEngine::new(&p);
        assert_eq!(eng.symbols().preds.len(), 1);
        assert_eq!(eng.symbols().props.len(), 1);
        assert_eq!(eng.scheme_count(), 6);
        let schemes: Vec<_> = eng.schemes().collect();
        assert_eq!(schemes.len(), 6);
    }

    #[test]
    fn graph1_categorical_triples() {
        let p = graph1();
        let eng = ClauseEngine::new(&p);
        // γ1 = [P] is colour 1, γ2 = [~P] is colour 0; θ1 = [l] is 1
        let c1 = ColourScheme {
            gamma: vec![1],
            theta: 1,
            rho: vec![],
        };
        let t1 = eng.categorical(&c1);
        let y = Term::var("y");
        let py = Formula::Atom(Name::new("P"), vec![y.clone()]);
        let l = Formula::prop("l");
        assert_eq!(
            t1.f,
            Formula::and(vec![
                Formula::exists("y", py.clone()),
                l.clone(),
                Formula::forall("y", py.clone()),
            ])
        );
        assert_eq!(
            t1.a,
            Formula::and(vec![
                Formula::exists("y", py.clone()),
                Formula::forall("y", py.clone()),
            ])
        );
        assert_eq!(t1.b, t1.a);

        // C2 = ({γ2}, θ1): A and B are true
        let c2 = ColourScheme {
            gamma: vec![0],
            theta: 1,
            rho: vec![],
        };
        let t2 = eng.categorical(&c2);
        assert_eq!(t2.a, Formula::True);
        assert_eq!(t2.b, Formula::True);

        // C3 = ({γ1, γ2}, θ1): A = B = exists y P(y)
        let c3 = ColourScheme {
            gamma: vec![0, 1],
            theta: 1,
            rho: vec![],
        };
        let t3 = eng.categorical(&c3);
        assert_eq!(t3.a, Formula::exists("y", py.clone()));
        assert_eq!(t3.b, t3.a);
        assert_eq!(
            t3.f,
            Formula::and(vec![
                Formula::exists("y", py.clone()),
                Formula::exists("y", Formula::not(py.clone())),
                l,
                Formula::forall("y", Formula::or(vec![py.clone(), Formula::not(py)])),
            ])
        );
    }

    #[test]
    fn canonical_full_for_c3_gamma1() {
        let p = graph1();
        let eng = ClauseEngine::new(&p);
        let c3 = ColourScheme {
            gamma: vec![0, 1],
            theta: 1,
            rho: vec![],
        };
        let fm = eng.canonical_full(&c3, 1).unwrap();
        let x = Term::var("x");
        let px = Formula::Atom(Name::new("P"), vec![x]);
        assert_eq!(fm.a, px);
        assert_eq!(fm.b, px);
        assert_eq!(
            fm.lhs(),
            Formula::and(vec![
                Formula::exists("y", Formula::Atom(Name::new("P"), vec![Term::var("y")])),
                px,
            ])
        );
        // degenerate for γ2: no step clause matches ~P
        let fm2 = eng.canonical_full(&c3, 0).unwrap();
        assert_eq!(fm2.a, Formula::True);
        assert_eq!(fm2.b, Formula::True);
        // colour not in Γ is an error
        let c1 = ColourScheme {
            gamma: vec![1],
            theta: 1,
            rho: vec![],
        };
        assert!(eng.canonical_full(&c1, 0).is_err());
    }

    #[test]
    fn scheme_count_edge_cases() {
        // N=0, n=1: two schemes with the single empty colour
        let p = parse_problem(
            "step { q => next q; } eventuality { sometime q; }",
            Semantics::Constant,
        )
        .unwrap();
        let eng = ClauseEngine::new(&p);
        assert_eq!(eng.scheme_count(), 2);
        assert_eq!(eng.schemes().count(), 2);

        // N=1, n=0, one constant: 1 + 1 + 2 = 4 schemes
        let p2 = parse_problem(
            "initial { P(c); } step { P(x) => next P(x); } eventuality { sometime ~P(x); }",
            Semantics::Constant,
        )
        .unwrap();
        let eng2 = ClauseEngine::new(&p2);
        assert_eq!(eng2.scheme_count(), 4);
        assert_eq!(eng2.schemes().count(), 4);
    }

    #[test]
    fn derived_clauses_for_res2_subset() {
        // {P1(x) => next ~P1(x)} with constant c gives d1..d3
        let p = parse_problem(
            "
            initial { Q(c); }
            step { P1(x) => next ~P1(x); P2(x) => next ~P2(x); Q(x) => next Q(x); }
            eventuality { sometime ~L(x); }
            universal { forall x. (L(x) | ~L(x)); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let s1 = p
            .step
            .iter()
            .find(|sc| sc.lhs().name.as_str() == "P1")
            .unwrap();
        let ds = derive_step_clauses(&p, &[s1]).unwrap();
        assert_eq!(ds.len(), 3);
        let kinds: Vec<_> = ds.iter().map(|d| d.origin.clone()).collect();
        assert!(kinds.contains(&DerivedOrigin::ForallForm));
        assert!(kinds.contains(&DerivedOrigin::ExistsForm));
        assert!(kinds.contains(&DerivedOrigin::ConstInstance(Name::new("c"))));
        let exists = ds
            .iter()
            .find(|d| d.origin == DerivedOrigin::ExistsForm)
            .unwrap();
        assert_eq!(exists.lhs.to_string(), "exists y. P1(y)");
        assert_eq!(exists.rhs.to_string(), "exists y. ~P1(y)");

        // the pair {P1, P2} gives d4/d5 shapes
        let s2 = p
            .step
            .iter()
            .find(|sc| sc.lhs().name.as_str() == "P2")
            .unwrap();
        let ds2 = derive_step_clauses(&p, &[s1, s2]).unwrap();
        let d4 = ds2
            .iter()
            .find(|d| d.origin == DerivedOrigin::ExistsForm)
            .unwrap();
        assert_eq!(d4.lhs.to_string(), "exists y. P1(y) & P2(y)");
        assert_eq!(d4.rhs.to_string(), "exists y. ~P1(y) & ~P2(y)");
        let d5 = ds2
            .iter()
            .find(|d| d.origin == DerivedOrigin::ForallForm)
            .unwrap();
        assert_eq!(d5.lhs.to_string(), "forall y. P1(y) | P2(y)");

        // expanding semantics omits the forall form
        let mut pe = p.clone();
        pe.semantics = Semantics::Expanding;
        let ds3 = derive_step_clauses(&pe, &[s1, s2]).unwrap();
        assert!(ds3
            .iter()
            .all(|d| d.origin != DerivedOrigin::ForallForm));
    }

    #[test]
    fn full_merge_matches_fm2_shape() {
        // fm2: forall x (Q(x) & exists y (P1 & P2) => next (Q(x) & exists y (~P1 & ~P2)))
        let p = parse_problem(
            "
            initial { Q(c); }
            step { P1(x) => next ~P1(x); P2(x) => next ~P2(x); Q(x) => next Q(x); }
            eventuality { sometime ~L(x); }
            universal { forall x. (L(x) | ~L(x)); }
            ",
            Semantics::Constant,
        )
        .unwrap();
        let s1 = p
            .step
            .iter()
            .find(|sc| sc.lhs().name.as_str() == "P1")
            .unwrap();
        let s2 = p
            .step
            .iter()
            .find(|sc| sc.lhs().name.as_str() == "P2")
            .unwrap();
        let sq = p
            .step
            .iter()
            .find(|sc| sc.lhs().name.as_str() == "Q")
            .unwrap();
        let ds = derive_step_clauses(&p, &[s1, s2]).unwrap();
        let d4 = ds
            .iter()
            .find(|d| d.origin == DerivedOrigin::ExistsForm)
            .unwrap();
        let merged = merge([d4]);
        let fm2 = full_merge(merged.clone(), &[sq]);
        assert_eq!(
            fm2.lhs().to_string(),
            "Q(x) & (exists y. P1(y) & P2(y))"
        );
        assert_eq!(
            fm2.rhs().to_string(),
            "Q(x) & (exists y. ~P1(y) & ~P2(y))"
        );
        // empty originals leave the merged clause unchanged
        let fm0 = full_merge(merged.clone(), &[]);
        assert_eq!(fm0.lhs(), merged.lhs);
        assert_eq!(fm0.rhs(), merged.rhs);
    }

    #[test]
    fn candidate_enumeration_covers_scheme_level_clauses() {
        let p = graph1();
        let eng = ClauseEngine::new(&p);
        let from_schemes: BTreeSet<MergedClause> = eng
            .schemes()
            .map(|s| eng.canonical_merged(&s))
            .collect();
        let candidates: BTreeSet<MergedClause> =
            eng.canonical_merged_candidates().into_iter().collect();
        assert_eq!(from_schemes, candidates);

        let from_schemes_full: BTreeSet<FullMergedClause> = eng
            .schemes()
            .flat_map(|s| {
                let gammas = s.gamma.clone();
                gammas
                    .into_iter()
                    .map(move |g| (s.clone(), g))
                    .collect::<Vec<_>>()
            })
            .map(|(s, g)| eng.canonical_full(&s, g).unwrap())
            .collect();
        let full_candidates: BTreeSet<FullMergedClause> = eng
            .canonical_full_candidates()
            .into_iter()
            .filter(|c| !(c.a == Formula::True && c.b == Formula::True))
            .collect();
        let scheme_level_nontrivial: BTreeSet<FullMergedClause> = from_schemes_full
            .into_iter()
            .filter(|c| !(c.a == Formula::True && c.b == Formula::True))
            .collect();
        assert_eq!(scheme_level_nontrivial, full_candidates);
    }
}
