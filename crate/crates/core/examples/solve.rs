//! One ADI-Milstein path from a Dirac datum, compared with the exact solution.

use zakai_adi::harness::{evolve_on_path, l2_error, ConstantProblem};
use zakai_adi::model::TimeGrid;
use zakai_adi::schemes::SchemeKind;
use zakai_adi::stochastic::draw_path_indexed;

fn main() -> zakai_adi::Result<()> {
    let problem = ConstantProblem::benchmark();
    let grid = problem.grid(0.125, 0.125)?;
    let tg = TimeGrid::with_step(problem.horizon, 1.0 / 256.0)?;
    let path = draw_path_indexed(tg.steps(), tg.k(), problem.params.rho_xy, 42, 0)?;
    let v = evolve_on_path(SchemeKind::AdiMilstein, &problem, &grid, &path, &tg)?;
    let (mx, my) = path.terminal(tg.steps());
    let exact = problem.exact(&grid, mx, my)?;
    let s = v.summary();
    println!("grid {}x{}, {} steps", grid.n_x, grid.n_y, tg.steps());
    println!("mass {:.6}, peak {:.4} at {:?}", s.mass, s.max, s.argmax);
    println!("L2 error against the exact solution {:.3e}", l2_error(&v, &exact)?);
    Ok(())
}
