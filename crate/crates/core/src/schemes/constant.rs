//! The four constant-coefficient schemes.

use ndarray::Array2;

use super::SchemeKind;
use crate::error::{Error, Result};
use crate::model::{check_same_grid, Field, Grid2D, ModelParams};
use crate::solvers::{default_max_iter, solve_unfactored, Direction, LineSolver, SeparableSolver};
use crate::stencils::{add_shifted, DX, DX2, DXX, DXY, DY, DY2, DYY};
use crate::stochastic::PathStep;

type Taps = Vec<(isize, isize, f64)>;

fn push(taps: &mut Taps, stencil: &[(isize, isize, f64)], w: f64) {
    if w == 0.0 {
        return;
    }
    for &(di, dj, c) in stencil {
        match taps.iter_mut().find(|t| t.0 == di && t.1 == dj) {
            Some(t) => t.2 += w * c,
            None => taps.push((di, dj, w * c)),
        }
    }
}

fn apply_taps(v: &Field, taps: &Taps) -> Field {
    let mut out = Array2::zeros(v.values.dim());
    for &(di, dj, w) in taps {
        add_shifted(&mut out, v.values.view(), di, dj, w);
    }
    Field { values: out, grid: v.grid }
}

/// How the unfactored implicit operator is inverted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImplicitSolve {
    /// Direct sine-transform solve; needs `|mu_y| h_y < 1`.
    Separable,
    /// Restarted GMRES.
    Krylov { tol: f64, max_iter: usize },
}

#[derive(Debug)]
enum Lhs {
    Identity,
    Adi(LineSolver, LineSolver),
    Separable(SeparableSolver),
    Krylov { tol: f64, max_iter: usize },
}

/// Prepared constant-coefficient scheme on a fixed grid and timestep.
#[derive(Debug)]
pub struct ConstantStepper {
    kind: SchemeKind,
    p: ModelParams,
    grid: Grid2D,
    k: f64,
    lhs: Lhs,
}

/// `(lower, diag, upper)` of `mu k/(2h) D - k/(2h^2) D_2`.
fn band(mu: f64, k: f64, h: f64) -> (f64, f64, f64) {
    let adv = mu * k / (2.0 * h);
    let dif = k / (2.0 * h * h);
    (-adv - dif, 2.0 * dif, adv - dif)
}

impl ConstantStepper {
    /// Unfactored systems use the direct separable solve when it applies and
    /// GMRES otherwise.
    pub fn new(kind: SchemeKind, p: ModelParams, grid: &Grid2D, k: f64) -> Result<Self> {
        let solve = if matches!(kind, SchemeKind::ImplicitMilstein | SchemeKind::SemiImplicitEuler)
            && (p.mu_y * grid.h_y).abs() < 1.0
        {
            ImplicitSolve::Separable
        } else {
            ImplicitSolve::Krylov {
                tol: 1e-10,
                max_iter: default_max_iter(grid),
            }
        };
        Self::with_solver(kind, p, grid, k, solve)
    }

    pub fn with_solver(kind: SchemeKind, p: ModelParams, grid: &Grid2D, k: f64, solve: ImplicitSolve) -> Result<Self> {
        p.validate()?;
        super::check_timestep(k)?;
        let bx = band(p.mu_x, k, grid.h_x);
        let by = band(p.mu_y, k, grid.h_y);
        let lhs = match kind {
            SchemeKind::ExplicitMilstein => Lhs::Identity,
            SchemeKind::AdiMilstein => Lhs::Adi(
                LineSolver::constant(grid, Direction::X, "x", bx.0, 1.0 + bx.1, bx.2)?,
                LineSolver::constant(grid, Direction::Y, "y", by.0, 1.0 + by.1, by.2)?,
            ),
            SchemeKind::ImplicitMilstein | SchemeKind::SemiImplicitEuler => match solve {
                ImplicitSolve::Separable => Lhs::Separable(SeparableSolver::new(grid, bx, by)?),
                ImplicitSolve::Krylov { tol, max_iter } => Lhs::Krylov { tol, max_iter },
            },
            other => return Err(Error::SchemeMismatch(format!("{other} is not a constant-coefficient scheme"))),
        };
        Ok(Self {
            kind,
            p,
            grid: *grid,
            k,
            lhs,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    fn rhs_taps(&self, s: PathStep) -> Taps {
        let ModelParams {
            mu_x,
            mu_y,
            rho_x,
            rho_y,
            rho_xy,
        } = self.p;
        let (k, hx, hy) = (self.k, self.grid.h_x, self.grid.h_y);
        let (zx, zy) = (s.z_x, s.z_y_tilde);
        let mut taps: Taps = vec![(0, 0, 1.0)];
        push(&mut taps, &DX, -(rho_x * k).sqrt() * zx / (2.0 * hx));
        push(&mut taps, &DY, -(rho_y * k).sqrt() * zy / (2.0 * hy));
        let sq = (rho_x * rho_y).sqrt();
        if self.kind == SchemeKind::SemiImplicitEuler {
            push(&mut taps, &DXY, sq * rho_xy * k / (4.0 * hx * hy));
            return taps;
        }
        push(&mut taps, &DX2, rho_x * k * (zx * zx - 1.0) / (8.0 * hx * hx));
        push(&mut taps, &DY2, rho_y * k * (zy * zy - 1.0) / (8.0 * hy * hy));
        push(&mut taps, &DXY, sq * k * zx * zy / (4.0 * hx * hy));
        if self.kind == SchemeKind::ExplicitMilstein {
            push(&mut taps, &DX, -mu_x * k / (2.0 * hx));
            push(&mut taps, &DY, -mu_y * k / (2.0 * hy));
            push(&mut taps, &DXX, k / (2.0 * hx * hx));
            push(&mut taps, &DYY, k / (2.0 * hy * hy));
        }
        taps
    }

    /// Right-hand side of the step (the full update for the explicit scheme).
    pub fn rhs(&self, v: &Field, s: PathStep) -> Field {
        apply_taps(v, &self.rhs_taps(s))
    }

    /// The unfactored implicit operator
    /// `I + mu_x k/(2h_x) D_x + mu_y k/(2h_y) D_y - k/(2h_x^2) D_xx - k/(2h_y^2) D_yy`.
    pub fn apply_implicit_operator(&self, v: &Field) -> Field {
        let (k, hx, hy) = (self.k, self.grid.h_x, self.grid.h_y);
        let mut taps: Taps = vec![(0, 0, 1.0)];
        push(&mut taps, &DX, self.p.mu_x * k / (2.0 * hx));
        push(&mut taps, &DY, self.p.mu_y * k / (2.0 * hy));
        push(&mut taps, &DXX, -k / (2.0 * hx * hx));
        push(&mut taps, &DYY, -k / (2.0 * hy * hy));
        apply_taps(v, &taps)
    }

    pub fn step(&self, v: &Field, s: PathStep) -> Result<Field> {
        check_same_grid(&self.grid, &v.grid)?;
        let rhs = self.rhs(v, s);
        match &self.lhs {
            Lhs::Identity => Ok(rhs),
            Lhs::Adi(x, y) => {
                let mut w = rhs.values;
                x.solve_in_place(&mut w);
                y.solve_in_place(&mut w);
                Ok(Field {
                    values: w,
                    grid: self.grid,
                })
            }
            Lhs::Separable(sep) => sep.solve(&rhs),
            Lhs::Krylov { tol, max_iter } => {
                solve_unfactored(|f| self.apply_implicit_operator(f), &rhs, *tol, *max_iter)
            }
        }
    }
}

pub fn step_explicit_milstein(v: &Field, p: &ModelParams, k: f64, s: PathStep) -> Field {
    let st = ConstantStepper {
        kind: SchemeKind::ExplicitMilstein,
        p: *p,
        grid: v.grid,
        k,
        lhs: Lhs::Identity,
    };
    st.rhs(v, s)
}

/// One implicit Milstein step, inverting the full operator by GMRES to
/// relative residual `tol`.
pub fn step_implicit_milstein(v: &Field, p: &ModelParams, k: f64, s: PathStep, tol: f64) -> Result<Field> {
    let solve = ImplicitSolve::Krylov {
        tol,
        max_iter: default_max_iter(&v.grid),
    };
    ConstantStepper::with_solver(SchemeKind::ImplicitMilstein, *p, &v.grid, k, solve)?.step(v, s)
}

pub fn step_adi_milstein(v: &Field, p: &ModelParams, k: f64, s: PathStep) -> Result<Field> {
    ConstantStepper::new(SchemeKind::AdiMilstein, *p, &v.grid, k)?.step(v, s)
}

pub fn step_semi_implicit_euler(v: &Field, p: &ModelParams, k: f64, s: PathStep, tol: f64) -> Result<Field> {
    let solve = ImplicitSolve::Krylov {
        tol,
        max_iter: default_max_iter(&v.grid),
    };
    ConstantStepper::with_solver(SchemeKind::SemiImplicitEuler, *p, &v.grid, k, solve)?.step(v, s)
}
