use inflation_core::family::*;
use inflation_core::fixtures::*;
use inflation_core::lp::*;
use inflation_core::ratio::qfrac;
use std::time::Instant;

fn main() {
    let web = triangle_web();
    let fam = inflation_family(&web, &noisy_ghz(&qfrac(61, 100)), &maximal_ai_contexts(&web)).unwrap();
    let p = build_problem(&web, &fam, false).unwrap();
    let t = Instant::now();
    match solve(&p, ArithmeticMode::Exact).unwrap() {
        FeasibilityVerdict::Feasible(FeasibleWitness::Exact(_)) => println!("alpha=0.61: feasible EXACT ({:?})", t.elapsed()),
        FeasibilityVerdict::Feasible(_) => println!("alpha=0.61: feasible approx?! ({:?})", t.elapsed()),
        FeasibilityVerdict::Infeasible(_) => println!("alpha=0.61: INFEASIBLE verified ({:?})", t.elapsed()),
    }
}
