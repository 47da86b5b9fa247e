//! Sub-sampled Levy areas: summation identity and moments.

use zakai_adi::harness::levy_audit;

fn main() -> zakai_adi::Result<()> {
    let a = levy_audit(10_000, 1.0 / 16.0, 64, 0.5, 11)?;
    println!("identity max relative residual {:.2e}", a.abel_max_rel);
    println!("mean {:.3e} (standard error {:.3e})", a.mean_a_xy, a.mean_stderr);
    println!("variance {:.4e}, oracle {:.4e}", a.var_a_xy, a.var_oracle);
    println!("pass {}", a.pass());
    Ok(())
}
