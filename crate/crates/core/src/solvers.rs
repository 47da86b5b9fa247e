//! Linear solvers behind the implicit schemes.
//!
//! * [`thomas_solve`] / [`LineSolver`]: tridiagonal sweeps for the ADI factors.
//! * [`solve_unfactored`]: restarted GMRES for the full two-dimensional
//!   implicit operator, used to cross-validate the factored path.
//! * [`SeparableSolver`]: direct solve of `I + A_x + A_y` for constant
//!   tridiagonal `A_x`, `A_y` by a sine transform in y and tridiagonal sweeps
//!   in x.

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use rustdct::{DctPlanner, Dst1};

use crate::error::{Error, Result};
use crate::model::{check_same_grid, Field, Grid2D};

/// Pivots smaller than this multiple of the row scale are treated as zero.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Tridiagonal matrix; `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    dominant: bool,
}

impl Tridiag {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n {
            return Err(crate::error::param("tridiag", "band lengths differ"));
        }
        let dominant = (0..n).all(|i| {
            let l = if i > 0 { lower[i].abs() } else { 0.0 };
            let u = if i + 1 < n { upper[i].abs() } else { 0.0 };
            diag[i].abs() > l + u
        });
        Ok(Self {
            lower,
            diag,
            upper,
            dominant,
        })
    }

    /// Constant-band (Toeplitz) matrix of size `n`.
    pub fn toeplitz(n: usize, lower: f64, diag: f64, upper: f64) -> Self {
        Self::new(vec![lower; n], vec![diag; n], vec![upper; n]).expect("equal lengths")
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Strict row diagonal dominance, recorded at construction.
    pub fn is_diagonally_dominant(&self) -> bool {
        self.dominant
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }
}

/// Solves `m x = rhs` by the Thomas algorithm.
pub fn thomas_solve(m: &Tridiag, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.len();
    if rhs.len() != n {
        return Err(crate::error::param("rhs", format!("length {} vs {}", rhs.len(), n)));
    }
    let mut c = vec![0.0; n];
    let mut x = rhs.to_vec();
    for i in 0..n {
        let l = if i > 0 { m.lower[i] } else { 0.0 };
        let u = if i + 1 < n { m.upper[i] } else { 0.0 };
        let denom = m.diag[i] - if i > 0 { l * c[i - 1] } else { 0.0 };
        check_pivot(denom, l, m.diag[i], u, i, "")?;
        c[i] = u / denom;
        x[i] = (x[i] - if i > 0 { l * x[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn check_pivot(denom: f64, l: f64, d: f64, u: f64, row: usize, context: &str) -> Result<()> {
    let scale = l.abs() + d.abs() + u.abs();
    if !(denom.abs() >= PIVOT_RTOL * scale) || denom == 0.0 {
        return Err(Error::Singular {
            row,
            pivot: denom,
            context: context.to_string(),
        });
    }
    Ok(())
}

/// Direction along which a [`LineSolver`] sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    X,
    Y,
}

/// Pre-factored batch of tridiagonal systems, one per grid line.
///
/// Line coefficients may vary from node to node; the factorisation is stored
/// node-wise so repeated solves cost two sweeps.
#[derive(Debug, Clone)]
pub struct LineSolver {
    direction: Direction,
    lower: Array2<f64>,
    inv: Array2<f64>,
    c: Array2<f64>,
    dominant: bool,
}

impl LineSolver {
    /// `coeff(a, b)` returns `(lower, diag, upper)` of the row for node `(a, b)`
    /// in the chosen direction.
    pub fn new(
        grid: &Grid2D,
        direction: Direction,
        name: &str,
        mut coeff: impl FnMut(usize, usize) -> (f64, f64, f64),
    ) -> Result<Self> {
        let (nx, ny) = (grid.n_x, grid.n_y);
        let mut lower = Array2::zeros((nx, ny));
        let mut inv = Array2::zeros((nx, ny));
        let mut c = Array2::zeros((nx, ny));
        let mut dominant = true;
        let (lines, len) = match direction {
            Direction::X => (ny, nx),
            Direction::Y => (nx, ny),
        };
        for line in 0..lines {
            let mut prev_c = 0.0;
            for pos in 0..len {
                let idx = match direction {
                    Direction::X => [pos, line],
                    Direction::Y => [line, pos],
                };
                let (mut l, d, mut u) = coeff(idx[0], idx[1]);
                if pos == 0 {
                    l = 0.0;
                }
                if pos + 1 == len {
                    u = 0.0;
                }
                dominant &= d.abs() > l.abs() + u.abs();
                let denom = d - l * prev_c;
                let context = format!(" in {name} factor (line {line})");
                check_pivot(denom, l, d, u, pos, &context)?;
                prev_c = u / denom;
                lower[idx] = l;
                inv[idx] = 1.0 / denom;
                c[idx] = prev_c;
            }
        }
        Ok(Self {
            direction,
            lower,
            inv,
            c,
            dominant,
        })
    }

    /// Same constant-band system on every line.
    pub fn constant(grid: &Grid2D, direction: Direction, name: &str, l: f64, d: f64, u: f64) -> Result<Self> {
        Self::new(grid, direction, name, |_, _| (l, d, u))
    }

    pub fn is_diagonally_dominant(&self) -> bool {
        self.dominant
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Overwrites `v` with the solution of the line systems.
    pub fn solve_in_place(&self, v: &mut Array2<f64>) {
        let (nx, ny) = v.dim();
        match self.direction {
            Direction::X => {
                // sweep over i, vectorised across the contiguous j index
                for i in 0..nx {
                    if i == 0 {
                        let mut row = v.row_mut(0);
                        row *= &self.inv.row(0);
                        continue;
                    }
                    let (prev, mut cur) = v.multi_slice_mut((ndarray::s![i - 1, ..], ndarray::s![i, ..]));
                    Zip::from(&mut cur)
                        .and(&prev)
                        .and(self.lower.row(i))
                        .and(self.inv.row(i))
                        .for_each(|x, &p, &l, &inv| *x = (*x - l * p) * inv);
                }
                for i in (0..nx.saturating_sub(1)).rev() {
                    let (mut cur, next) = v.multi_slice_mut((ndarray::s![i, ..], ndarray::s![i + 1, ..]));
                    Zip::from(&mut cur)
                        .and(&next)
                        .and(self.c.row(i))
                        .for_each(|x, &n, &c| *x -= c * n);
                }
            }
            Direction::Y => {
                for ((mut row, l), (inv, c)) in v
                    .axis_iter_mut(Axis(0))
                    .zip(self.lower.axis_iter(Axis(0)))
                    .zip(self.inv.axis_iter(Axis(0)).zip(self.c.axis_iter(Axis(0))))
                {
                    let row = row.as_slice_mut().expect("standard layout");
                    let (l, inv, c) = (
                        l.to_slice().expect("standard layout"),
                        inv.to_slice().expect("standard layout"),
                        c.to_slice().expect("standard layout"),
                    );
                    row[0] *= inv[0];
                    for j in 1..ny {
                        row[j] = (row[j] - l[j] * row[j - 1]) * inv[j];
                    }
                    for j in (0..ny.saturating_sub(1)).rev() {
                        row[j] -= c[j] * row[j + 1];
                    }
                }
            }
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct KrylovReport {
    pub solution: Field,
    pub iterations: usize,
    /// Relative residual `||r|| / ||rhs||` after every inner iteration,
    /// starting with the initial guess.
    pub residuals: Vec<f64>,
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |s, x, y| s + x * y)
}

/// Restarted GMRES(`restart`) for `apply_op(V) = rhs`, starting from `rhs`.
///
/// Stops once `||apply_op(V) - rhs|| <= tol ||rhs||`. The residual norm is
/// non-increasing from one inner iteration to the next.
pub fn gmres<F>(apply_op: F, rhs: &Field, tol: f64, max_iter: usize, restart: usize) -> Result<KrylovReport>
where
    F: Fn(&Field) -> Field,
{
    let grid = rhs.grid;
    let b_norm = dot(&rhs.values, &rhs.values).sqrt();
    if b_norm == 0.0 {
        return Ok(KrylovReport {
            solution: Field::zeros(grid),
            iterations: 0,
            residuals: vec![0.0],
        });
    }
    let restart = restart.max(1);
    let mut x = rhs.values.clone();
    let residual_of = |x: &Array2<f64>| -> Array2<f64> {
        let ax = apply_op(&Field { values: x.clone(), grid });
        &rhs.values - &ax.values
    };
    let mut r = residual_of(&x);
    let mut beta = dot(&r, &r).sqrt();
    let mut history = vec![beta / b_norm];
    let mut iterations = 0;
    while beta > tol * b_norm {
        if iterations >= max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: beta / b_norm,
            });
        }
        let mut basis: Vec<Array2<f64>> = vec![r.mapv(|v| v / beta)];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..restart {
            if iterations >= max_iter {
                break;
            }
            iterations += 1;
            let mut w = apply_op(&Field {
                values: basis[j].clone(),
                grid,
            })
            .values;
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(&w, q);
                h[i][j] = hij;
                w.scaled_add(-hij, q);
            }
            let wn = dot(&w, &w).sqrt();
            h[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            history.push(g[j + 1].abs() / b_norm);
            if g[j + 1].abs() <= tol * b_norm || wn == 0.0 {
                break;
            }
            basis.push(w.mapv(|v| v / wn));
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|l| h[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (q, yi) in basis.iter().zip(&y) {
            x.scaled_add(*yi, q);
        }
        r = residual_of(&x);
        beta = dot(&r, &r).sqrt();
    }
    Ok(KrylovReport {
        solution: Field { values: x, grid },
        iterations,
        residuals: history,
    })
}

/// Default GMRES restart length.
pub const GMRES_RESTART: usize = 40;

/// Solves `apply_op(V) = rhs` with restarted GMRES; the error carries the last
/// relative residual when `max_iter` is exhausted.
pub fn solve_unfactored<F>(apply_op: F, rhs: &Field, tol: f64, max_iter: usize) -> Result<Field>
where
    F: Fn(&Field) -> Field,
{
    gmres(apply_op, rhs, tol, max_iter, GMRES_RESTART).map(|r| r.solution)
}

/// Default iteration cap `10 (n_x + n_y)`.
pub fn default_max_iter(grid: &Grid2D) -> usize {
    10 * (grid.n_x + grid.n_y)
}

/// Direct solver for `(I + A_x + A_y) V = R`, where `A_x`, `A_y` are constant
/// tridiagonal (Toeplitz) operators along x and y with zero Dirichlet ends.
///
/// `A_y` is symmetrised by a diagonal similarity and diagonalised by the
/// orthonormal DST-I; each y-mode then leaves a tridiagonal system in x.
pub struct SeparableSolver {
    grid: Grid2D,
    scale: Vec<f64>,
    dst: Arc<dyn Dst1<f64>>,
    norm: f64,
    x_modes: LineSolver,
}

impl std::fmt::Debug for SeparableSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeparableSolver").field("grid", &self.grid).finish()
    }
}

impl SeparableSolver {
    /// `x_band` and `y_band` are `(lower, diag, upper)` of `A_x` and `A_y`
    /// (identity excluded).
    pub fn new(grid: &Grid2D, x_band: (f64, f64, f64), y_band: (f64, f64, f64)) -> Result<Self> {
        let (ly, dy, uy) = y_band;
        let ny = grid.n_y;
        let (ratio, off) = if ly == 0.0 && uy == 0.0 {
            (1.0, 0.0)
        } else if ly * uy > 0.0 {
            let r = (ly / uy).sqrt();
            (r, ly / r)
        } else {
            return Err(crate::error::param(
                "y_band",
                "off-diagonals of opposite sign cannot be symmetrised",
            ));
        };
        let scale: Vec<f64> = (1..=ny).map(|j| ratio.powi(j as i32)).collect();
        if scale.iter().any(|s| !s.is_finite() || *s == 0.0 || s.abs() > 1e150 || s.abs() < 1e-150) {
            return Err(crate::error::param("y_band", "similarity scaling out of range"));
        }
        let lambdas: Vec<f64> = (1..=ny)
            .map(|m| dy + 2.0 * off * (m as f64 * std::f64::consts::PI / (ny + 1) as f64).cos())
            .collect();
        let (lx, dx, ux) = x_band;
        let x_modes = LineSolver::new(grid, Direction::X, "separable x", |_, b| (lx, 1.0 + dx + lambdas[b], ux))?;
        let dst = DctPlanner::new().plan_dst1(ny);
        Ok(Self {
            grid: *grid,
            scale,
            dst,
            norm: (2.0 / (ny + 1) as f64).sqrt(),
            x_modes,
        })
    }

    fn transform_rows(&self, v: &mut Array2<f64>) {
        let mut scratch = vec![0.0; self.dst.get_scratch_len()];
        for mut row in v.axis_iter_mut(Axis(0)) {
            let row = row.as_slice_mut().expect("standard layout");
            // the transform reads stale scratch contents
            scratch.fill(0.0);
            self.dst.process_dst1_with_scratch(row, &mut scratch);
            for x in row.iter_mut() {
                *x *= self.norm;
            }
        }
    }

    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        check_same_grid(&self.grid, &rhs.grid)?;
        let mut v = rhs.values.as_standard_layout().into_owned();
        for mut row in v.axis_iter_mut(Axis(0)) {
            for (x, s) in row.iter_mut().zip(&self.scale) {
                *x /= s;
            }
        }
        self.transform_rows(&mut v);
        self.x_modes.solve_in_place(&mut v);
        self.transform_rows(&mut v);
        for mut row in v.axis_iter_mut(Axis(0)) {
            for (x, s) in row.iter_mut().zip(&self.scale) {
                *x *= s;
            }
        }
        Ok(Field {
            values: v,
            grid: self.grid,
        })
    }
}
