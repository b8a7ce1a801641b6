use motel_core::parser::parse_problem;
use motel_core::problem::Semantics;
use motel_core::prover::{prove, ProverConfig};
use std::time::Instant;

fn main() {
    let p = parse_problem(
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
    .unwrap();
    let t0 = Instant::now();
    let d = prove(&p, &ProverConfig { max_rounds: 50, oracle_budget: Some(2_000_000), ..Default::default() }).unwrap();
    println!("verdict {:?} in {:?}", d.verdict, t0.elapsed());
    println!("steps: {}", d.steps.len());
    println!("stats: {:?}", d.oracle_stats);
}
