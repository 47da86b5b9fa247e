//! Spatial and temporal convergence of ADI-Milstein against the exact solution.

use zakai_adi::harness::{convergence_in_h, convergence_in_k, ConstantProblem, ExperimentResult};
use zakai_adi::schemes::SchemeKind;

fn show(label: &str, r: &ExperimentResult) {
    println!("{label}: slope {:.3} +- {:.3}", r.fitted_slope, r.slope_stderr);
    for l in &r.levels {
        println!("  h={:<8} k={:<10} error {:.4e}", l.h_x, l.k, l.error);
    }
}

fn main() -> zakai_adi::Result<()> {
    let problem = ConstantProblem::benchmark();
    let hs = [0.5, 0.25, 0.125];
    show("in h", &convergence_in_h(SchemeKind::AdiMilstein, &problem, 1.0 / 1024.0, &hs, 4, 1)?);
    let ks = [0.25, 1.0 / 16.0, 1.0 / 64.0];
    show("in k", &convergence_in_k(SchemeKind::AdiMilstein, &problem, 0.125, &ks, 4, 1)?);
    Ok(())
}
