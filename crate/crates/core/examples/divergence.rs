//! Refining h_x alone at a large timestep: the error grows for Dirac data and
//! stays flat for smooth data.

use zakai_adi::harness::{divergence_study, ConstantProblem, InitialKind};
use zakai_adi::schemes::SchemeKind;

fn main() -> zakai_adi::Result<()> {
    let mut problem = ConstantProblem::benchmark();
    problem.params = problem.params.with_rho(0.6, 0.6, 0.1)?;
    let hs = [0.125, 0.0625, 0.03125, 0.015625];
    for initial in [InitialKind::Dirac, InitialKind::Gaussian] {
        problem.initial = initial;
        let r = divergence_study(SchemeKind::AdiMilstein, &problem, 0.25, &hs, 0.5, 9)?;
        let errs: Vec<String> = r.levels.iter().map(|l| format!("{:.3e}", l.error)).collect();
        println!("{initial:?}: slope {:.3}, errors {}", r.fitted_slope, errs.join(" "));
    }
    Ok(())
}
