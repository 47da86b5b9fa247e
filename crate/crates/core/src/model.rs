//! Parameter sets, discretisation grids and grid-valued solution fields.
//!
//! Fields store interior nodes only. The truncation boundary carries the
//! Dirichlet value 0 for every time level, so stencils treat any neighbour
//! outside the interior array as zero.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Relative tolerance for the bounds/mesh-width commensurability check.
const COMMENSURATE_RTOL: f64 = 1e-12;

/// Constant coefficients of the model SPDE
/// `dv = -mu.grad v dt + 1/2 (v_xx + 2 sqrt(rho_x rho_y) rho_xy v_xy + v_yy) dt
///       - sqrt(rho_x) v_x dM^x - sqrt(rho_y) v_y dM^y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu_x: f64,
    pub mu_y: f64,
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_xy: f64,
}

impl ModelParams {
    pub fn new(mu_x: f64, mu_y: f64, rho_x: f64, rho_y: f64, rho_xy: f64) -> Result<Self> {
        let p = Self {
            mu_x,
            mu_y,
            rho_x,
            rho_y,
            rho_xy,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu_x.is_finite() || !self.mu_y.is_finite() {
            return Err(param("mu", "drift must be finite"));
        }
        if !(0.0..1.0).contains(&self.rho_x) {
            return Err(param("rho_x", format!("{} not in [0, 1)", self.rho_x)));
        }
        if !(0.0..1.0).contains(&self.rho_y) {
            return Err(param("rho_y", format!("{} not in [0, 1)", self.rho_y)));
        }
        if !(-1.0..=1.0).contains(&self.rho_xy) {
            return Err(param("rho_xy", format!("{} not in [-1, 1]", self.rho_xy)));
        }
        Ok(())
    }

    /// Zero-drift, zero-noise parameters: the SPDE degenerates to the heat equation.
    pub fn heat() -> Self {
        Self {
            mu_x: 0.0,
            mu_y: 0.0,
            rho_x: 0.0,
            rho_y: 0.0,
            rho_xy: 0.0,
        }
    }

    pub fn with_rho(mut self, rho_x: f64, rho_y: f64, rho_xy: f64) -> Result<Self> {
        self.rho_x = rho_x;
        self.rho_y = rho_y;
        self.rho_xy = rho_xy;
        self.validate()?;
        Ok(self)
    }
}

/// Uniform rectangular mesh on a truncated domain.
///
/// Node `i` in x sits at `x_min + i * h_x` for `i = 0 ..= n_x + 1`; nodes 0 and
/// `n_x + 1` are boundary nodes. Interior array index `a` corresponds to node
/// `a + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub n_x: usize,
    pub n_y: usize,
}

fn interior_count(min: f64, max: f64, h: f64, name: &'static str) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(param(name, format!("mesh width {h} must be positive")));
    }
    if !(max > min) {
        return Err(param(name, format!("empty interval [{min}, {max}]")));
    }
    let cells = ((max - min) / h).round();
    let n = cells as i64 - 1;
    if n < 1 {
        return Err(param(name, "fewer than one interior node"));
    }
    let reach = min + cells * h;
    if (reach - max).abs() > COMMENSURATE_RTOL * max.abs().max(min.abs()).max(1.0) {
        return Err(param(
            name,
            format!("bounds [{min}, {max}] are not commensurate with mesh width {h}"),
        ));
    }
    Ok(n as usize)
}

impl Grid2D {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, h_x: f64, h_y: f64) -> Result<Self> {
        let n_x = interior_count(x_min, x_max, h_x, "h_x")?;
        let n_y = interior_count(y_min, y_max, h_y, "h_y")?;
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
            h_x,
            h_y,
            n_x,
            n_y,
        })
    }

    /// Same interval `[lo, hi]` in both directions with equal mesh widths.
    pub fn square(lo: f64, hi: f64, h: f64) -> Result<Self> {
        Self::new(lo, hi, lo, hi, h, h)
    }

    /// x-coordinate of node `i` (boundary nodes included).
    pub fn node_x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h_x
    }

    pub fn node_y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.h_y
    }

    /// x-coordinate of interior array index `a`.
    pub fn x(&self, a: usize) -> f64 {
        self.node_x(a + 1)
    }

    pub fn y(&self, b: usize) -> f64 {
        self.node_y(b + 1)
    }

    /// Nearest node index to `x` (may be a boundary node or out of range).
    pub fn nearest_node_x(&self, x: f64) -> i64 {
        ((x - self.x_min) / self.h_x).round() as i64
    }

    pub fn nearest_node_y(&self, y: f64) -> i64 {
        ((y - self.y_min) / self.h_y).round() as i64
    }

    pub fn cell_area(&self) -> f64 {
        self.h_x * self.h_y
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid with both mesh widths halved on the same domain.
    pub fn refined(&self) -> Result<Self> {
        Self::new(
            self.x_min,
            self.x_max,
            self.y_min,
            self.y_max,
            self.h_x / 2.0,
            self.h_y / 2.0,
        )
    }

    pub(crate) fn same_as(&self, other: &Grid2D) -> bool {
        self.n_x == other.n_x
            && self.n_y == other.n_y
            && (self.h_x - other.h_x).abs() <= 1e-14 * self.h_x
            && (self.h_y - other.h_y).abs() <= 1e-14 * self.h_y
            && (self.x_min - other.x_min).abs() <= 1e-12
            && (self.y_min - other.y_min).abs() <= 1e-12
    }
}

/// Uniform time discretisation; the step is always derived as `T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(param("T", format!("horizon {horizon} must be positive")));
        }
        if steps == 0 {
            return Err(param("N", "need at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    /// Time grid with step `k`; `horizon / k` must be an integer.
    pub fn with_step(horizon: f64, k: f64) -> Result<Self> {
        let steps = (horizon / k).round();
        if steps < 1.0 || ((steps * k) - horizon).abs() > 1e-12 * horizon {
            return Err(param("k", format!("{k} does not divide T = {horizon}")));
        }
        Self::new(horizon, steps as usize)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn k(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

/// Interior-node values of a grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Array2<f64>,
    pub grid: Grid2D,
}

/// Record emitted when a Dirac location had to be snapped to the nearest node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffGridWarning {
    pub requested: (f64, f64),
    pub snapped: (f64, f64),
    pub node: (usize, usize),
}

/// Compact statistics written next to field dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub mass: f64,
    pub min: f64,
    pub max: f64,
    pub argmax: [f64; 2],
}

impl Field {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            values: Array2::zeros((grid.n_x, grid.n_y)),
            grid,
        }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n_x, grid.n_y), |(a, b)| f(grid.x(a), grid.y(b)));
        Self { values, grid }
    }

    pub fn from_values(grid: Grid2D, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n_x, grid.n_y) {
            return Err(Error::GridMismatch(format!(
                "array shape {:?} vs grid ({}, {})",
                values.dim(),
                grid.n_x,
                grid.n_y
            )));
        }
        Ok(Self { values, grid })
    }

    pub fn mass(&self) -> f64 {
        mass(self)
    }

    /// Discrete L2 norm `sqrt(sum h_x h_y v^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Linear combination `alpha * self + beta * other` on a shared grid.
    pub fn combine(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        check_same_grid(&self.grid, &other.grid)?;
        let mut out = self.values.clone();
        out.zip_mut_with(&other.values, |a, b| *a = alpha * *a + beta * b);
        Ok(Field {
            values: out,
            grid: self.grid,
        })
    }

    pub fn summary(&self) -> FieldSummary {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut arg = (0, 0);
        for ((a, b), &v) in self.values.indexed_iter() {
            min = min.min(v);
            if v > max {
                max = v;
                arg = (a, b);
            }
        }
        FieldSummary {
            mass: self.mass(),
            min,
            max,
            argmax: [self.grid.x(arg.0), self.grid.y(arg.1)],
        }
    }

    /// Writes `x,y,value` with one row per interior node.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "value"])?;
        for ((a, b), v) in self.values.indexed_iter() {
            w.write_record(&[
                self.grid.x(a).to_string(),
                self.grid.y(b).to_string(),
                v.to_string(),
            ])?;
        }
        w.flush()
    }
}

pub(crate) fn check_same_grid(a: &Grid2D, b: &Grid2D) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{}x{} (h = {}, {}) vs {}x{} (h = {}, {})",
            a.n_x, a.n_y, a.h_x, a.h_y, b.n_x, b.n_y, b.h_x, b.h_y
        )))
    }
}

/// Discrete integral `sum values * h_x * h_y`.
pub fn mass(field: &Field) -> f64 {
    field.values.sum() * field.grid.cell_area()
}

/// Interior node nearest to `(x0, y0)`, with an off-grid record when the point
/// is not within `1e-9 h` of a node.
pub fn locate_node(grid: &Grid2D, x0: f64, y0: f64) -> Result<((usize, usize), Option<OffGridWarning>)> {
    let inside = x0 > grid.x_min && x0 < grid.x_max && y0 > grid.y_min && y0 < grid.y_max;
    if !inside {
        return Err(Error::Domain { x: x0, y: y0 });
    }
    let i0 = grid.nearest_node_x(x0);
    let j0 = grid.nearest_node_y(y0);
    if i0 < 1 || i0 > grid.n_x as i64 || j0 < 1 || j0 > grid.n_y as i64 {
        return Err(Error::Domain { x: x0, y: y0 });
    }
    let (i0, j0) = (i0 as usize, j0 as usize);
    let snapped = (grid.node_x(i0), grid.node_y(j0));
    let off = (snapped.0 - x0).abs() > 1e-9 * grid.h_x || (snapped.1 - y0).abs() > 1e-9 * grid.h_y;
    let warning = off.then_some(OffGridWarning {
        requested: (x0, y0),
        snapped,
        node: (i0, j0),
    });
    Ok(((i0 - 1, j0 - 1), warning))
}

/// Discrete Dirac datum `h_x^-1 h_y^-1` at the node nearest `(x0, y0)`.
///
/// Off-grid locations are snapped with a logged warning; the record is also
/// returned so callers can surface it.
pub fn dirac_initial(grid: &Grid2D, x0: f64, y0: f64) -> Result<(Field, Option<OffGridWarning>)> {
    let ((a, b), warning) = locate_node(grid, x0, y0)?;
    if let Some(w) = &warning {
        log::warn!(
            "Dirac location ({}, {}) is off-grid; snapped to node ({}, {})",
            w.requested.0,
            w.requested.1,
            w.snapped.0,
            w.snapped.1
        );
    }
    let mut field = Field::zeros(*grid);
    field.values[[a, b]] = 1.0 / grid.cell_area();
    Ok((field, warning))
}

/// Smooth Gaussian datum: the exact solution at unit time for a zero noise path.
pub fn gaussian_initial(grid: &Grid2D, params: &ModelParams, x0: f64, y0: f64) -> Result<Field> {
    params.validate()?;
    let vx = 1.0 - params.rho_x;
    let vy = 1.0 - params.rho_y;
    let norm = 1.0 / (2.0 * PI * (vx * vy).sqrt());
    Ok(Field::from_fn(*grid, |x, y| {
        let dx = x - x0 - params.mu_x;
        let dy = y - y0 - params.mu_y;
        norm * (-dx * dx / (2.0 * vx) - dy * dy / (2.0 * vy)).exp()
    }))
}
