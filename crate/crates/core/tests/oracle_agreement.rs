//! Colour-structure satisfiability against brute-force finite-model search.
//!
//! A monadic sentence without equality over k predicates has a model iff it
//! has one over at most 2^k elements (one per realized colour). The brute
//! force below enumerates concrete models up to size 3, which covers most
//! sentences at these parameters; if the oracle answers SAT where the small
//! search finds nothing, the oracle's witness structure is checked directly
//! as a concrete model, so every verdict is confirmed by an independent
//! evaluation path. Sentences that genuinely need more than three colours
//! are exercised separately with a size-8 search.

use std::collections::BTreeMap;

use motel_core::oracle::Oracle;
use motel_core::parser::parse_formula;
use motel_core::syntax::Name;
use motel_core::testsupport::{brute_force_sat, fo_eval, random_sentence, FiniteModel, SentenceParams, SplitMix64};

/// Turns an oracle witness into a concrete model (one element per colour).
fn concrete_from_witness(w: &motel_core::oracle::AbstractStructure) -> FiniteModel {
    let colours: Vec<u32> = w.realized.iter().copied().collect();
    let rows: BTreeMap<Name, Vec<bool>> = w
        .preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                p.clone(),
                colours.iter().map(|c| c & (1 << i) != 0).collect(),
            )
        })
        .collect();
    let consts = w
        .constants
        .iter()
        .map(|(name, colour)| {
            let idx = colours.iter().position(|c| c == colour).unwrap();
            (name.clone(), idx)
        })
        .collect();
    FiniteModel {
        size: colours.len(),
        rows,
        props: w.props.clone(),
        consts,
    }
}

#[test]
fn oracle_matches_brute_force_on_random_sentences() {
    let params = SentenceParams::default();
    let mut rng = SplitMix64(0x5eed_0001);
    let mut needed_large_model = 0usize;
    for i in 0..400 {
        let sentence = random_sentence(&mut rng, &params);
        let oracle = Oracle::for_sentences([&sentence]).unwrap();
        let verdict = oracle.is_satisfiable(std::slice::from_ref(&sentence)).unwrap();
        let brute = brute_force_sat(std::slice::from_ref(&sentence), 3);
        match (&verdict, &brute) {
            (Some(_), Some(_)) | (None, None) => {}
            (None, Some(m)) => panic!(
                "case {i}: oracle says UNSAT but a {}-element model exists for {sentence}",
                m.size
            ),
            (Some(w), None) => {
                // larger model required; confirm the witness concretely
                let concrete = concrete_from_witness(w);
                assert!(
                    fo_eval(&concrete, &sentence),
                    "case {i}: witness structure fails direct evaluation for {sentence}"
                );
                needed_large_model += 1;
            }
        }
    }
    // the generator should mostly stay within the small-model regime
    assert!(needed_large_model < 40, "too many out-of-regime cases");
}

#[test]
fn sentences_forcing_many_colours_agree_at_size_eight() {
    // forces four distinct colours over two predicates, and seven over three
    let four = parse_formula(
        "(exists x. P(x) & Q(x)) & (exists x. P(x) & ~Q(x)) & \
         (exists x. ~P(x) & Q(x)) & (exists x. ~P(x) & ~Q(x))",
    )
    .unwrap();
    let oracle = Oracle::for_sentences([&four]).unwrap();
    assert!(oracle.is_satisfiable(std::slice::from_ref(&four)).unwrap().is_some());
    assert!(brute_force_sat(std::slice::from_ref(&four), 3).is_none());
    assert!(brute_force_sat(std::slice::from_ref(&four), 8).is_some());

    let seven = parse_formula(
        "(exists x. P(x) & Q(x) & R(x)) & (exists x. P(x) & Q(x) & ~R(x)) & \
         (exists x. P(x) & ~Q(x) & R(x)) & (exists x. P(x) & ~Q(x) & ~R(x)) & \
         (exists x. ~P(x) & Q(x) & R(x)) & (exists x. ~P(x) & Q(x) & ~R(x)) & \
         (exists x. ~P(x) & ~Q(x) & R(x)) & (forall x. P(x) | Q(x) | R(x) | false)",
    )
    .unwrap();
    let oracle7 = Oracle::for_sentences([&seven]).unwrap();
    let w = oracle7.is_satisfiable(std::slice::from_ref(&seven)).unwrap();
    assert!(w.is_some());
    assert!(w.unwrap().realized.len() >= 7);
    assert!(brute_force_sat(std::slice::from_ref(&seven), 8).is_some());
}

#[test]
fn entailment_from_satisfiable_hypotheses_keeps_goal_satisfiable() {
    // if H is satisfiable and H |= g, then H ∪ {g} is satisfiable: an
    // entailed goal can never contradict its own hypotheses
    let params = SentenceParams::default();
    let mut rng = SplitMix64(0x5eed_0002);
    let mut entailed = 0usize;
    for _ in 0..200 {
        let h = random_sentence(&mut rng, &params);
        let g = random_sentence(&mut rng, &params);
        let oracle = Oracle::for_sentences([&h, &g]).unwrap();
        if oracle
            .is_satisfiable(std::slice::from_ref(&h))
            .unwrap()
            .is_none()
        {
            continue;
        }
        if !oracle.entails(std::slice::from_ref(&h), &g).unwrap() {
            continue;
        }
        entailed += 1;
        let with_goal = oracle
            .is_satisfiable(&[h.clone(), g.clone()])
            .unwrap()
            .is_some();
        assert!(
            with_goal,
            "H satisfiable, H |= g, but sat(H ∪ {{g}}) failed: H = {h}, g = {g}"
        );
    }
    assert!(entailed > 5, "generator produced too few entailments");
}
