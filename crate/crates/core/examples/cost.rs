//! Wall time per path under k/4, h/2 refinement.

use zakai_adi::harness::{cost_study, HestonProblem};
use zakai_adi::schemes::SchemeKind;

fn main() -> zakai_adi::Result<()> {
    let kinds = [SchemeKind::AdiEulerHeston, SchemeKind::AdiMilsteinHeston];
    let rows = cost_study(&kinds, &HestonProblem::benchmark(), (0.625, 0.025, 0.25), 3, 1)?;
    for r in &rows {
        println!("{:<16} level {} k={:<10} {:.3e} s ({} runs)", r.scheme, r.level, r.k, r.seconds, r.repetitions);
    }
    Ok(())
}
