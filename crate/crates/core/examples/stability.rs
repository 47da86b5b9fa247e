//! Parameter inequalities, explicit CFL bounds and the lattice sup of the
//! second moment of the amplification factor.

use zakai_adi::model::ModelParams;
use zakai_adi::schemes::SchemeKind;
use zakai_adi::stability::{check_assumption, explicit_cfl_bounds, margins, sup_moment2};

fn main() -> zakai_adi::Result<()> {
    let p = ModelParams::new(0.0, 0.0, 0.2, 0.2, 0.45)?;
    let a = check_assumption(&p);
    println!("inequality sides {:?}, pass {}", a.sides, a.pass);
    let (bx, by) = explicit_cfl_bounds(&p);
    println!("explicit bounds k/h_x^2 <= {bx:.4}, k/h_y^2 <= {by:.4}");
    let m = margins(&p)?;
    println!("beta {:.4}, theta {:.4}", m.beta, m.theta);
    let h = 0.25;
    for (kind, k) in [
        (SchemeKind::ExplicitMilstein, 0.5 * bx * h * h),
        (SchemeKind::ExplicitMilstein, 4.0 * bx * h * h),
        (SchemeKind::ImplicitMilstein, 0.25),
        (SchemeKind::AdiMilstein, 0.25),
    ] {
        let r = sup_moment2(&p, k, h, h, kind, 101)?;
        println!("{kind:<18} k={k:.4}: sup moment2 {:.6} at ({:.3}, {:.3})", r.moment2, r.xi, r.eta);
    }
    Ok(())
}
