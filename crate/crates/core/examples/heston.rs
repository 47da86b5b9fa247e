//! Coupled proxy errors for the stochastic-volatility SPDE.

use zakai_adi::harness::{proxy_convergence_h, proxy_convergence_k, HestonProblem};
use zakai_adi::schemes::SchemeKind;

fn main() -> zakai_adi::Result<()> {
    let problem = HestonProblem::benchmark();
    let meshes = [(0.625, 0.025), (0.3125, 0.0125), (0.15625, 0.00625)];
    let r = proxy_convergence_h(SchemeKind::AdiMilsteinHeston, &problem, 1.0 / 16.0, &meshes, 4, 3)?;
    println!("h-proxy slope {:.3} +- {:.3}", r.fitted_slope, r.slope_stderr);
    let ks = [0.25, 1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0];
    for kind in [
        SchemeKind::AdiEulerHeston,
        SchemeKind::AdiMilsteinHeston,
        SchemeKind::AdiMilsteinHestonModified,
    ] {
        let r = proxy_convergence_k(kind, &problem, (0.625, 0.025), &ks, 4, 3)?;
        let errs: Vec<String> = r.levels.iter().map(|l| format!("{:.3e}", l.error)).collect();
        println!("{kind:<26} k-proxy slope {:.3}, errors {}", r.fitted_slope, errs.join(" "));
    }
    Ok(())
}
