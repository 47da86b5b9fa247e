//! ADI Milstein for a two-dimensional Zakai equation with node-wise
//! coefficients and two correlated drivers:
//!
//! `dv = [1/2 sum_ij d_ij(a_ij v) - sum_i d_i(b_i v)] dt - sum_l sum_i d_i(gamma_il v) dM_l`.
//!
//! All coefficients enter in conservative form: multiplied onto the field
//! before differencing.

use ndarray::Array2;

use super::check_timestep;
use crate::error::{param, Result};
use crate::model::{check_same_grid, Field, Grid2D, ModelParams};
use crate::solvers::{Direction, LineSolver};
use crate::stencils::{apply_stencil, DX, DXY, DY};
use crate::stochastic::{ito_diagonal, LevyArea, PathStep};

/// Coefficients at one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeCoefficients {
    pub a_xx: f64,
    pub a_yy: f64,
    pub a_xy: f64,
    pub b_x: f64,
    pub b_y: f64,
    /// `gamma[i][l]`: space direction `i`, driver `l`.
    pub gamma: [[f64; 2]; 2],
}

/// Node-wise coefficient arrays, each shaped like the field.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFields {
    pub a_xx: Array2<f64>,
    pub a_yy: Array2<f64>,
    pub a_xy: Array2<f64>,
    pub b_x: Array2<f64>,
    pub b_y: Array2<f64>,
    pub gamma: [[Array2<f64>; 2]; 2],
}

impl CoefficientFields {
    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> NodeCoefficients) -> Self {
        let nodes = Array2::from_shape_fn((grid.n_x, grid.n_y), |(a, b)| f(grid.x(a), grid.y(b)));
        let pick = |g: &dyn Fn(&NodeCoefficients) -> f64| nodes.map(g);
        Self {
            a_xx: pick(&|c| c.a_xx),
            a_yy: pick(&|c| c.a_yy),
            a_xy: pick(&|c| c.a_xy),
            b_x: pick(&|c| c.b_x),
            b_y: pick(&|c| c.b_y),
            gamma: [
                [pick(&|c| c.gamma[0][0]), pick(&|c| c.gamma[0][1])],
                [pick(&|c| c.gamma[1][0]), pick(&|c| c.gamma[1][1])],
            ],
        }
    }

    /// The constant-coefficient model written in general form; the drivers
    /// must then be correlated with `p.rho_xy`.
    pub fn constant(grid: &Grid2D, p: &ModelParams) -> Self {
        let c = NodeCoefficients {
            a_xx: 1.0,
            a_yy: 1.0,
            a_xy: p.rho_xy * (p.rho_x * p.rho_y).sqrt(),
            b_x: p.mu_x,
            b_y: p.mu_y,
            gamma: [[p.rho_x.sqrt(), 0.0], [0.0, p.rho_y.sqrt()]],
        };
        Self::from_fn(grid, |_, _| c)
    }

    fn dim(&self) -> (usize, usize) {
        self.a_xx.dim()
    }
}

#[derive(Debug)]
pub struct GeneralStepper {
    coeffs: CoefficientFields,
    rho: f64,
    grid: Grid2D,
    k: f64,
    x: LineSolver,
    y: LineSolver,
}

impl GeneralStepper {
    pub fn new(coeffs: CoefficientFields, rho: f64, grid: &Grid2D, k: f64) -> Result<Self> {
        if coeffs.dim() != (grid.n_x, grid.n_y) {
            return Err(param("coeffs", format!("shape {:?} does not match grid", coeffs.dim())));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(param("rho", format!("{rho} not in [-1, 1]")));
        }
        check_timestep(k)?;
        let (hx, hy) = (grid.h_x, grid.h_y);
        let (nx, ny) = (grid.n_x, grid.n_y);
        let c = &coeffs;
        let x = LineSolver::new(grid, Direction::X, "x", |a, b| {
            let lo = if a > 0 {
                -k / (2.0 * hx) * c.b_x[[a - 1, b]] - k / (2.0 * hx * hx) * c.a_xx[[a - 1, b]]
            } else {
                0.0
            };
            let up = if a + 1 < nx {
                k / (2.0 * hx) * c.b_x[[a + 1, b]] - k / (2.0 * hx * hx) * c.a_xx[[a + 1, b]]
            } else {
                0.0
            };
            (lo, 1.0 + k / (hx * hx) * c.a_xx[[a, b]], up)
        })?;
        let y = LineSolver::new(grid, Direction::Y, "y", |a, b| {
            let lo = if b > 0 {
                -k / (2.0 * hy) * c.b_y[[a, b - 1]] - k / (2.0 * hy * hy) * c.a_yy[[a, b - 1]]
            } else {
                0.0
            };
            let up = if b + 1 < ny {
                k / (2.0 * hy) * c.b_y[[a, b + 1]] - k / (2.0 * hy * hy) * c.a_yy[[a, b + 1]]
            } else {
                0.0
            };
            (lo, 1.0 + k / (hy * hy) * c.a_yy[[a, b]], up)
        })?;
        Ok(Self {
            coeffs,
            rho,
            grid: *grid,
            k,
            x,
            y,
        })
    }

    /// Driver correlation the iterated integrals are assumed to carry.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `G_l V = sum_i 1/(2 h_i) D_i (gamma_il V)`.
    fn g(&self, l: usize, v: &Array2<f64>) -> Array2<f64> {
        let gx = &self.coeffs.gamma[0][l] * v;
        let gy = &self.coeffs.gamma[1][l] * v;
        let mut out = apply_stencil(gx.view(), &DX);
        out *= 1.0 / (2.0 * self.grid.h_x);
        out.scaled_add(1.0 / (2.0 * self.grid.h_y), &apply_stencil(gy.view(), &DY));
        out
    }

    pub fn rhs(&self, v: &Field, s: PathStep, levy: LevyArea) -> Field {
        let (k, hx, hy) = (self.k, self.grid.h_x, self.grid.h_y);
        let (dmx, dmy) = s.increments(k);
        let dm = [dmx, dmy];
        // iter[p][l] = int (M_p - M_p(t)) dM_l
        let iter = [
            [ito_diagonal(dmx, k), levy.a_xy],
            [levy.a_yx, ito_diagonal(dmy, k)],
        ];
        let u = &v.values;
        let mut out = u.clone();
        let axy = &self.coeffs.a_xy * u;
        out.scaled_add(k / (4.0 * hx * hy), &apply_stencil(axy.view(), &DXY));
        let gv = [self.g(0, u), self.g(1, u)];
        for l in 0..2 {
            out.scaled_add(-dm[l], &gv[l]);
        }
        for p in 0..2 {
            for l in 0..2 {
                if iter[p][l] != 0.0 {
                    out.scaled_add(iter[p][l], &self.g(l, &gv[p]));
                }
            }
        }
        Field {
            values: out,
            grid: self.grid,
        }
    }

    pub fn step(&self, v: &Field, s: PathStep, levy: LevyArea) -> Result<Field> {
        check_same_grid(&self.grid, &v.grid)?;
        let mut w = self.rhs(v, s, levy).values;
        self.x.solve_in_place(&mut w);
        self.y.solve_in_place(&mut w);
        Ok(Field {
            values: w,
            grid: self.grid,
        })
    }
}

/// One general ADI Milstein step; `rho` is the driver correlation.
pub fn step_adi_general(
    v: &Field,
    coeffs: &CoefficientFields,
    rho: f64,
    k: f64,
    s: PathStep,
    levy: LevyArea,
) -> Result<Field> {
    GeneralStepper::new(coeffs.clone(), rho, &v.grid, k)?.step(v, s, levy)
}
