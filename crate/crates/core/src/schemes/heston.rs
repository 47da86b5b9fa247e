//! ADI schemes for the stochastic-volatility SPDE
//!
//! `du = [kappa u - (r - y/2 - xi rho_3 rho_11 rho_21) u_x - (kappa (theta - y) - xi^2) u_y
//!        + y/2 u_xx + xi rho_3 rho_11 rho_21 y u_xy + xi^2/2 y u_yy] dt
//!       - rho_11 sqrt(y) u_x dW - xi rho_21 (sqrt(y) u)_y dB`
//!
//! with `W`, `B` correlated by `rho_3`. Paths for these schemes must be drawn
//! with correlation `rho_3`: `z_x` drives `W` and `z_y_tilde` drives `B`.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{check_timestep, SchemeKind};
use crate::error::{param, Error, Result};
use crate::model::{check_same_grid, Field, Grid2D};
use crate::solvers::{Direction, LineSolver};
use crate::stochastic::{LevyArea, PathStep};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonSpdeParams {
    pub kappa1: f64,
    pub theta1: f64,
    pub xi1: f64,
    pub r1: f64,
    pub rho_11: f64,
    pub rho_21: f64,
    pub rho_3: f64,
}

impl HestonSpdeParams {
    /// `kappa = 2, theta = 0.4, xi = 0.5, r = 0.05, rho_11 = 0.3, rho_21 = 0.2, rho_3 = 0.5`.
    pub fn benchmark() -> Self {
        Self {
            kappa1: 2.0,
            theta1: 0.4,
            xi1: 0.5,
            r1: 0.05,
            rho_11: 0.3,
            rho_21: 0.2,
            rho_3: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi1 >= 0.0) {
            return Err(param("xi1", format!("{} must be non-negative", self.xi1)));
        }
        for (name, v) in [("rho_11", self.rho_11), ("rho_21", self.rho_21), ("rho_3", self.rho_3)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(param(name, format!("{v} not in [-1, 1]")));
            }
        }
        for (name, v) in [("kappa1", self.kappa1), ("theta1", self.theta1), ("r1", self.r1)] {
            if !v.is_finite() {
                return Err(param(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// x-advection coefficient at variance level `y`.
    pub fn drift_x(&self, y: f64) -> f64 {
        self.r1 - 0.5 * y - self.xi1 * self.rho_3 * self.rho_11 * self.rho_21
    }

    /// y-advection coefficient at variance level `y`.
    pub fn drift_y(&self, y: f64) -> f64 {
        self.kappa1 * (self.theta1 - y) - self.xi1 * self.xi1
    }
}

#[derive(Debug)]
pub struct HestonStepper {
    hp: HestonSpdeParams,
    kind: SchemeKind,
    grid: Grid2D,
    k: f64,
    y: Array1<f64>,
    sqrt_y: Array1<f64>,
    x_factor: LineSolver,
    y_factor: LineSolver,
}

/// Weights of the stencil terms in the right-hand side for one step.
#[derive(Debug, Default, Clone, Copy)]
struct RhsCoefficients {
    diag: f64,
    /// Multiplies `sqrt(Y) D_x u`.
    x_noise: f64,
    /// Multiplies `D_y(sqrt(Y) u)`.
    y_noise: f64,
    dx: f64,
    /// Multiplies `Y D_x^2 u`.
    dx2: f64,
    /// Multiplies `Y D_xy u`.
    dxy: f64,
    /// Multiplies `D_y(sqrt(Y) D_y(sqrt(Y) u))`.
    dyy: f64,
}

impl HestonStepper {
    pub fn new(hp: HestonSpdeParams, kind: SchemeKind, grid: &Grid2D, k: f64) -> Result<Self> {
        hp.validate()?;
        check_timestep(k)?;
        if !kind.is_heston() {
            return Err(Error::SchemeMismatch(format!("{kind} is not a stochastic-volatility scheme")));
        }
        if grid.y_min < 0.0 {
            return Err(param("y_min", "variance grid must lie in y >= 0"));
        }
        let (hx, hy) = (grid.h_x, grid.h_y);
        let y: Array1<f64> = (0..grid.n_y).map(|b| grid.y(b)).collect();
        let sqrt_y = y.mapv(|v| v.max(0.0).sqrt());
        let x_factor = LineSolver::new(grid, Direction::X, "x", |_, b| {
            let adv = k / (2.0 * hx) * hp.drift_x(y[b]);
            let dif = k / (2.0 * hx * hx) * y[b];
            (-adv - dif, 1.0 + 2.0 * dif, adv - dif)
        })?;
        let y_factor = LineSolver::new(grid, Direction::Y, "y", |_, b| {
            let adv = k / (2.0 * hy) * hp.drift_y(y[b]);
            let dif = k / (2.0 * hy * hy) * hp.xi1 * hp.xi1 * y[b];
            (-adv - dif, 1.0 + 2.0 * dif, adv - dif)
        })?;
        Ok(Self {
            hp,
            kind,
            grid: *grid,
            k,
            y,
            sqrt_y,
            x_factor,
            y_factor,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    /// Right-hand side; `levy.a_xy` is the iterated integral `int (W - W_t) dB`.
    ///
    /// Evaluated in one pass over a copy of `u` padded with two layers of
    /// zeros, which keeps the working set small on fine meshes.
    pub fn rhs(&self, u: &Field, s: PathStep, levy: LevyArea) -> Field {
        let c = self.coefficients(s, levy);
        let (nx, ny) = u.values.dim();
        let mut p = Array2::<f64>::zeros((nx + 4, ny + 4));
        p.slice_mut(s![2..nx + 2, 2..ny + 2]).assign(&u.values);
        let mut sy = vec![0.0; ny + 4];
        let mut yy = vec![0.0; ny + 4];
        for b in 0..ny {
            sy[b + 2] = self.sqrt_y[b];
            yy[b + 2] = self.y[b];
        }
        let mut out = Array2::<f64>::zeros((nx, ny));
        let row = |a: usize| p.row(a);
        for a in 0..nx {
            let (rm2, rm1, r0, rp1, rp2) = (row(a), row(a + 1), row(a + 2), row(a + 3), row(a + 4));
            let mut o = out.row_mut(a);
            for b in 0..ny {
                let q = b + 2;
                let dx = rp1[q] - rm1[q];
                let dx2 = rp2[q] - 2.0 * r0[q] + rm2[q];
                let dxy = rp1[q + 1] - rp1[q - 1] - rm1[q + 1] + rm1[q - 1];
                let su = |j: usize| sy[j] * r0[j];
                let dsu = su(q + 1) - su(q - 1);
                // sqrt(Y) D_y(sqrt(Y) u) at the two y-neighbours, zero in the ghost layer
                let inner = |j: usize| sy[j] * (su(j + 1) - su(j - 1));
                let dyy = inner(q + 1) - inner(q - 1);
                o[b] = c.diag * r0[q]
                    + (c.x_noise * sy[q] + c.dx) * dx
                    + c.y_noise * dsu
                    + c.dx2 * yy[q] * dx2
                    + c.dxy * yy[q] * dxy
                    + c.dyy * dyy;
            }
        }
        Field {
            values: out,
            grid: self.grid,
        }
    }

    fn coefficients(&self, s: PathStep, levy: LevyArea) -> RhsCoefficients {
        let HestonSpdeParams {
            kappa1,
            xi1,
            rho_11,
            rho_21,
            rho_3,
            ..
        } = self.hp;
        let (k, hx, hy) = (self.k, self.grid.h_x, self.grid.h_y);
        let (zx, zy) = (s.z_x, s.z_y_tilde);
        let cross = xi1 * rho_11 * rho_21;
        let mut c = RhsCoefficients {
            diag: 1.0 + kappa1 * k,
            x_noise: -k.sqrt() * zx * rho_11 / (2.0 * hx),
            y_noise: -k.sqrt() * zy * xi1 * rho_21 / (2.0 * hy),
            ..Default::default()
        };
        if self.kind == SchemeKind::AdiEulerHeston {
            // the mixed derivative the Milstein cross terms would otherwise supply
            c.dxy = k * cross * rho_3 / (4.0 * hx * hy);
            return c;
        }
        c.dx2 = rho_11 * rho_11 * k * (zx * zx - 1.0) / (8.0 * hx * hx);
        c.dx = (k * cross * (zx * zy - rho_3)) / (4.0 * hx);
        if self.kind == SchemeKind::AdiMilsteinHeston {
            c.dx += cross * levy.a_xy / (4.0 * hx);
        }
        c.dxy = k * cross * zx * zy / (4.0 * hx * hy);
        c.dyy = k * (zy * zy - 1.0) * xi1 * xi1 * rho_21 * rho_21 / (8.0 * hy * hy);
        c
    }

    pub fn step(&self, u: &Field, s: PathStep, levy: LevyArea) -> Result<Field> {
        check_same_grid(&self.grid, &u.grid)?;
        let mut w = self.rhs(u, s, levy).values;
        self.x_factor.solve_in_place(&mut w);
        self.y_factor.solve_in_place(&mut w);
        Ok(Field {
            values: w,
            grid: self.grid,
        })
    }
}

pub fn step_heston_spde(
    u: &Field,
    hp: &HestonSpdeParams,
    k: f64,
    s: PathStep,
    levy: LevyArea,
    variant: SchemeKind,
) -> Result<Field> {
    HestonStepper::new(*hp, variant, &u.grid, k)?.step(u, s, levy)
}
