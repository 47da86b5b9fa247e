//! Experiment drivers: Monte Carlo L2 errors against the exact solution,
//! coupled proxy errors where no exact solution exists, rate fits and timing.
//!
//! Every path is generated from `(master_seed, path_index)` alone and results
//! are reduced in path order, so runs are reproducible independent of the
//! thread count.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exact::{exact_density, exact_field};
use crate::model::{check_same_grid, dirac_initial, gaussian_initial, Field, Grid2D, ModelParams, TimeGrid};
use crate::schemes::{HestonSpdeParams, SchemeKind, SpdeModel, Stepper};
use crate::stochastic::{draw_path_indexed, sub_step_count, BrownianPath, SubPath};

/// Levels whose error falls below this multiple of `eps * ||reference||`
/// are left out of slope fits.
pub const FLOOR_FACTOR: f64 = 1e3;

/// `sqrt(sum h_x h_y (num - ref)^2)`.
pub fn l2_error(num: &Field, reference: &Field) -> Result<f64> {
    check_same_grid(&num.grid, &reference.grid)?;
    Ok(num.combine(1.0, reference, -1.0)?.l2_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Dirac,
    Gaussian,
}

impl std::str::FromStr for InitialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirac" => Ok(InitialKind::Dirac),
            "gaussian" => Ok(InitialKind::Gaussian),
            other => Err(param("initial", format!("unknown initial datum `{other}`"))),
        }
    }
}

/// Constant-coefficient problem with a known solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantProblem {
    pub params: ModelParams,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub x0: f64,
    pub y0: f64,
    pub horizon: f64,
    pub initial: InitialKind,
}

impl ConstantProblem {
    /// `T = 1`, `x0 = y0 = 2`, `mu = 0.0809`, `rho = (0.2, 0.2, 0.45)` on `[-8, 12]^2`.
    pub fn benchmark() -> Self {
        Self {
            params: ModelParams {
                mu_x: 0.0809,
                mu_y: 0.0809,
                rho_x: 0.2,
                rho_y: 0.2,
                rho_xy: 0.45,
            },
            x_min: -8.0,
            x_max: 12.0,
            y_min: -8.0,
            y_max: 12.0,
            x0: 2.0,
            y0: 2.0,
            horizon: 1.0,
            initial: InitialKind::Dirac,
        }
    }

    pub fn grid(&self, h_x: f64, h_y: f64) -> Result<Grid2D> {
        Grid2D::new(self.x_min, self.x_max, self.y_min, self.y_max, h_x, h_y)
    }

    pub fn initial_field(&self, grid: &Grid2D) -> Result<Field> {
        match self.initial {
            InitialKind::Dirac => {
                let (f, warn) = dirac_initial(grid, self.x0, self.y0)?;
                if let Some(w) = warn {
                    log::warn!("initial point {:?} snapped to node {:?}", w.requested, w.snapped);
                }
                Ok(f)
            }
            InitialKind::Gaussian => gaussian_initial(grid, &self.params, self.x0, self.y0),
        }
    }

    /// Exact solution at the horizon for terminal driver values `(m_x, m_y)`.
    ///
    /// The Gaussian datum equals the noise-free Dirac solution at time 1, so
    /// its solution is the Dirac solution at `1 + T` with the same driver
    /// increments.
    pub fn exact(&self, grid: &Grid2D, m_x: f64, m_y: f64) -> Result<Field> {
        let t = match self.initial {
            InitialKind::Dirac => self.horizon,
            InitialKind::Gaussian => self.horizon + 1.0,
        };
        exact_field(grid, t, &self.params, m_x, m_y, self.x0, self.y0)
    }

    pub fn exact_at(&self, x: f64, y: f64, m_x: f64, m_y: f64) -> Result<f64> {
        let t = match self.initial {
            InitialKind::Dirac => self.horizon,
            InitialKind::Gaussian => self.horizon + 1.0,
        };
        exact_density(t, x, y, &self.params, m_x, m_y, self.x0, self.y0)
    }
}

/// Stochastic-volatility problem (no exact solution).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonProblem {
    pub params: HestonSpdeParams,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub x0: f64,
    pub y0: f64,
    pub horizon: f64,
}

impl HestonProblem {
    /// `T = 1`, `x0 = 2`, `y0 = 1.4` on `[-3, 7] x [0, 1.5]`.
    pub fn benchmark() -> Self {
        Self {
            params: HestonSpdeParams::benchmark(),
            x_min: -3.0,
            x_max: 7.0,
            y_min: 0.0,
            y_max: 1.5,
            x0: 2.0,
            y0: 1.4,
            horizon: 1.0,
        }
    }

    pub fn grid(&self, h_x: f64, h_y: f64) -> Result<Grid2D> {
        Grid2D::new(self.x_min, self.x_max, self.y_min, self.y_max, h_x, h_y)
    }

    /// Solution at the horizon along the sub-sampled path `sub`.
    pub fn solve(&self, kind: SchemeKind, grid: &Grid2D, sub: &SubPath) -> Result<Field> {
        let (f, _) = dirac_initial(grid, self.x0, self.y0)?;
        let tg = TimeGrid::with_step(self.horizon, sub.k)?;
        let path = sub.to_path();
        Stepper::new(kind, &SpdeModel::Heston(self.params), grid, tg.k())?.evolve(&f, &path, tg.steps())
    }
}

/// Root-mean-square error over paths with its delta-method standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McError {
    pub error: f64,
    pub stderr: f64,
    /// Per-path squared L2 errors in path order.
    pub per_path: Vec<f64>,
    /// Largest reference-field L2 norm seen, for floor detection.
    pub reference_norm: f64,
}

impl McError {
    fn from_samples(samples: Vec<(f64, f64)>) -> Self {
        let n = samples.len() as f64;
        let per_path: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let reference_norm = samples.iter().map(|s| s.1).fold(0.0, f64::max);
        let mean = per_path.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            per_path.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let error = mean.sqrt();
        let stderr = if error > 0.0 { (var / n).sqrt() / (2.0 * error) } else { 0.0 };
        Self {
            error,
            stderr,
            per_path,
            reference_norm,
        }
    }
}

fn check_paths(paths: usize) -> Result<()> {
    if paths == 0 {
        return Err(param("paths", "need at least one path"));
    }
    Ok(())
}

/// `(sum h_x h_y E_L |V^N - v(T)|^2)^(1/2)` over `paths` independent paths.
pub fn mc_l2_error(
    kind: SchemeKind,
    problem: &ConstantProblem,
    grid: &Grid2D,
    tg: &TimeGrid,
    paths: usize,
    master_seed: u64,
) -> Result<McError> {
    check_paths(paths)?;
    let stepper = Stepper::new(kind, &SpdeModel::Constant(problem.params), grid, tg.k())?;
    let init = problem.initial_field(grid)?;
    let samples = (0..paths as u64)
        .into_par_iter()
        .map(|idx| {
            let path = draw_path_indexed(tg.steps(), tg.k(), problem.params.rho_xy, master_seed, idx)?;
            let v = stepper.evolve(&init, &path, tg.steps())?;
            let (mx, my) = path.terminal(tg.steps());
            let exact = problem.exact(grid, mx, my)?;
            Ok((l2_error(&v, &exact)?.powi(2), exact.l2_norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McError::from_samples(samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub level: usize,
    pub h_x: f64,
    pub h_y: f64,
    pub k: f64,
    pub error: f64,
    pub stderr: f64,
    pub seconds: f64,
    /// Left out of the slope fit by the floor guard.
    pub floored: bool,
}

/// Levels plus the least-squares slope of `log2(error)` against
/// `log2(parameter)`: positive when errors shrink with the parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub levels: Vec<Level>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
}

/// Least-squares slope of `ys` on `xs` with its standard error.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if n == 2 {
        return (slope, 0.0);
    }
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (slope, (ssr / (nf - 2.0) / sxx).sqrt())
}

fn finish(levels: Vec<Level>, param_of: impl Fn(&Level) -> f64) -> ExperimentResult {
    let used: Vec<&Level> = levels.iter().filter(|l| !l.floored && l.error > 0.0).collect();
    let xs: Vec<f64> = used.iter().map(|l| param_of(l).log2()).collect();
    let ys: Vec<f64> = used.iter().map(|l| l.error.log2()).collect();
    let (fitted_slope, slope_stderr) = fit_slope(&xs, &ys);
    ExperimentResult {
        levels,
        fitted_slope,
        slope_stderr,
    }
}

fn floored(err: f64, norm: f64) -> bool {
    err < FLOOR_FACTOR * f64::EPSILON * norm
}

/// Error against `h = h_x = h_y` at fixed `k`; slope near 2 expected.
pub fn convergence_in_h(
    kind: SchemeKind,
    problem: &ConstantProblem,
    k: f64,
    h_levels: &[f64],
    paths: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    let tg = TimeGrid::with_step(problem.horizon, k)?;
    let mut levels = Vec::with_capacity(h_levels.len());
    for (i, &h) in h_levels.iter().enumerate() {
        let grid = problem.grid(h, h)?;
        let t0 = Instant::now();
        let e = mc_l2_error(kind, problem, &grid, &tg, paths, seed)?;
        log::info!("{kind} h={h} k={k}: error {:.4e}", e.error);
        levels.push(Level {
            level: i,
            h_x: h,
            h_y: h,
            k,
            error: e.error,
            stderr: e.stderr,
            seconds: t0.elapsed().as_secs_f64(),
            floored: floored(e.error, e.reference_norm),
        });
    }
    Ok(finish(levels, |l| l.h_x))
}

/// Error against `k` at fixed `h`; slope near 1 for Milstein.
///
/// All levels of one path index share the finest path, coarsened by summing
/// normals, so the exact solution is common to every level.
pub fn convergence_in_k(
    kind: SchemeKind,
    problem: &ConstantProblem,
    h: f64,
    k_levels: &[f64],
    paths: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    check_paths(paths)?;
    let grid = problem.grid(h, h)?;
    let k_min = k_levels.iter().copied().fold(f64::INFINITY, f64::min);
    let fine = TimeGrid::with_step(problem.horizon, k_min)?;
    let mut tgs = Vec::new();
    for &k in k_levels {
        let tg = TimeGrid::with_step(problem.horizon, k)?;
        if fine.steps() % tg.steps() != 0 {
            return Err(param("k_levels", format!("{k} is not a multiple of the finest step {k_min}")));
        }
        tgs.push(tg);
    }
    let model = SpdeModel::Constant(problem.params);
    let steppers = tgs
        .iter()
        .map(|tg| Stepper::new(kind, &model, &grid, tg.k()))
        .collect::<Result<Vec<_>>>()?;
    let init = problem.initial_field(&grid)?;
    // per path: squared errors per level, reference norm, seconds per level
    let per_path = (0..paths as u64)
        .into_par_iter()
        .map(|idx| {
            let finest = draw_path_indexed(fine.steps(), k_min, problem.params.rho_xy, seed, idx)?;
            let (mx, my) = finest.terminal(fine.steps());
            let exact = problem.exact(&grid, mx, my)?;
            let mut out = Vec::with_capacity(tgs.len());
            for (tg, st) in tgs.iter().zip(&steppers) {
                let t0 = Instant::now();
                let path = finest.coarsen(fine.steps() / tg.steps())?;
                let v = st.evolve(&init, &path, tg.steps())?;
                out.push((l2_error(&v, &exact)?.powi(2), t0.elapsed().as_secs_f64()));
            }
            Ok((out, exact.l2_norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let levels = tgs
        .iter()
        .enumerate()
        .map(|(i, tg)| {
            let e = McError::from_samples(per_path.iter().map(|(o, n)| (o[i].0, *n)).collect());
            log::info!("{kind} h={h} k={}: error {:.4e}", tg.k(), e.error);
            Level {
                level: i,
                h_x: h,
                h_y: h,
                k: tg.k(),
                error: e.error,
                stderr: e.stderr,
                seconds: per_path.iter().map(|(o, _)| o[i].1).sum(),
                floored: floored(e.error, e.reference_norm),
            }
        })
        .collect();
    Ok(finish(levels, |l| l.k))
}

/// Spatial L2 error along one fixed path as `h_x` is refined with `h_y`
/// fixed; the slope is fitted against `log2(h_x)`.
pub fn divergence_study(
    kind: SchemeKind,
    problem: &ConstantProblem,
    k: f64,
    h_x_levels: &[f64],
    h_y: f64,
    seed: u64,
) -> Result<ExperimentResult> {
    let tg = TimeGrid::with_step(problem.horizon, k)?;
    let path = draw_path_indexed(tg.steps(), k, problem.params.rho_xy, seed, 0)?;
    let (mx, my) = path.terminal(tg.steps());
    let levels = h_x_levels
        .par_iter()
        .enumerate()
        .map(|(i, &hx)| {
            let grid = problem.grid(hx, h_y)?;
            let t0 = Instant::now();
            let init = problem.initial_field(&grid)?;
            let v = Stepper::new(kind, &SpdeModel::Constant(problem.params), &grid, k)?.evolve(&init, &path, tg.steps())?;
            let exact = problem.exact(&grid, mx, my)?;
            let error = l2_error(&v, &exact)?;
            Ok(Level {
                level: i,
                h_x: hx,
                h_y,
                k,
                error,
                stderr: 0.0,
                seconds: t0.elapsed().as_secs_f64(),
                floored: floored(error, exact.l2_norm()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(levels, |l| l.h_x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_xy: f64,
    pub error: f64,
}

/// Single-path L2 error for each correlation triple. The independent normals
/// are the same for every cell; only their correlation changes.
pub fn correlation_sweep(
    kind: SchemeKind,
    problem: &ConstantProblem,
    rho_grid: &[(f64, f64, f64)],
    h: f64,
    k: f64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let grid = problem.grid(h, h)?;
    let tg = TimeGrid::with_step(problem.horizon, k)?;
    rho_grid
        .par_iter()
        .map(|&(rx, ry, rxy)| {
            let p = problem.params.with_rho(rx, ry, rxy)?;
            let prob = ConstantProblem { params: p, ..*problem };
            let e = mc_l2_error(kind, &prob, &grid, &tg, 1, seed)?;
            Ok(SweepRow {
                rho_x: rx,
                rho_y: ry,
                rho_xy: rxy,
                error: e.error,
            })
        })
        .collect()
}

/// `sqrt(sum h_x h_y |fine[r i, r j] - coarse[i, j]|^2)` over coarse nodes,
/// where the fine mesh is `r` times finer and covers the same box.
pub fn nested_l2_difference(coarse: &Field, fine: &Field) -> Result<f64> {
    let (c, f) = (&coarse.grid, &fine.grid);
    let rx = c.h_x / f.h_x;
    let ry = c.h_y / f.h_y;
    let r = rx.round();
    let same_box = [
        (c.x_min, f.x_min),
        (c.x_max, f.x_max),
        (c.y_min, f.y_min),
        (c.y_max, f.y_max),
    ]
    .iter()
    .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    if !same_box || r < 1.0 || (rx - r).abs() > 1e-9 || (ry - r).abs() > 1e-9 {
        return Err(Error::Alignment(format!(
            "coarse h = ({}, {}) and fine h = ({}, {}) on boxes that do not nest",
            c.h_x, c.h_y, f.h_x, f.h_y
        )));
    }
    let r = r as usize;
    let mut sum = 0.0;
    for ((a, b), v) in coarse.values.indexed_iter() {
        let d = fine.values[[r * (a + 1) - 1, r * (b + 1) - 1]] - v;
        sum += d * d;
    }
    Ok((sum * c.cell_area()).sqrt())
}

/// Number of sub-steps used per step of size `k` for the Levy areas.
fn subs(k: f64) -> usize {
    sub_step_count(k)
}

/// Coupled h-proxy errors: solutions at each mesh in `h_levels` (halving)
/// along one shared path per index; entry `i` compares level `i` with `i + 1`.
pub fn proxy_convergence_h(
    kind: SchemeKind,
    problem: &HestonProblem,
    k: f64,
    h_levels: &[(f64, f64)],
    paths: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    check_paths(paths)?;
    if h_levels.len() < 2 {
        return Err(param("h_levels", "need at least two meshes"));
    }
    let tg = TimeGrid::with_step(problem.horizon, k)?;
    let grids = h_levels
        .iter()
        .map(|&(hx, hy)| problem.grid(hx, hy))
        .collect::<Result<Vec<_>>>()?;
    let per_path = (0..paths as u64)
        .into_par_iter()
        .map(|idx| {
            let sub = SubPath::draw(tg.steps(), k, subs(k), problem.params.rho_3, seed, idx)?;
            let mut sols = Vec::with_capacity(grids.len());
            let mut secs = Vec::with_capacity(grids.len());
            for g in &grids {
                let t0 = Instant::now();
                sols.push(problem.solve(kind, g, &sub)?);
                secs.push(t0.elapsed().as_secs_f64());
            }
            let diffs = sols
                .windows(2)
                .map(|w| nested_l2_difference(&w[0], &w[1]).map(|d| d * d))
                .collect::<Result<Vec<_>>>()?;
            Ok((diffs, sols[0].l2_norm(), secs))
        })
        .collect::<Result<Vec<_>>>()?;
    let levels = (0..grids.len() - 1)
        .map(|i| {
            let e = McError::from_samples(per_path.iter().map(|(d, n, _)| (d[i], *n)).collect());
            Level {
                level: i,
                h_x: h_levels[i].0,
                h_y: h_levels[i].1,
                k,
                error: e.error,
                stderr: e.stderr,
                seconds: per_path.iter().map(|(_, _, s)| s[i] + s[i + 1]).sum(),
                floored: floored(e.error, e.reference_norm),
            }
        })
        .collect();
    Ok(finish(levels, |l| l.h_x))
}

/// Coupled k-proxy errors on a fixed mesh. All timesteps derive from one
/// finest sub-sampled path per index; entry `i` compares `k_levels[i]` with
/// `k_levels[i + 1]`.
pub fn proxy_convergence_k(
    kind: SchemeKind,
    problem: &HestonProblem,
    h: (f64, f64),
    k_levels: &[f64],
    paths: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    check_paths(paths)?;
    if k_levels.len() < 2 {
        return Err(param("k_levels", "need at least two timesteps"));
    }
    let grid = problem.grid(h.0, h.1)?;
    let k_min = k_levels.iter().copied().fold(f64::INFINITY, f64::min);
    let fine = TimeGrid::with_step(problem.horizon, k_min)?;
    // without Levy areas one sub-step per step suffices
    let subs_for = |k: f64| if kind.needs_levy_area() { subs(k) } else { 1 };
    let m_fine = subs_for(k_min);
    let factors = k_levels
        .iter()
        .map(|&k| {
            let tg = TimeGrid::with_step(problem.horizon, k)?;
            if fine.steps() % tg.steps() != 0 {
                return Err(param("k_levels", format!("{k} is not a multiple of the finest step {k_min}")));
            }
            Ok(fine.steps() / tg.steps())
        })
        .collect::<Result<Vec<_>>>()?;
    let per_path = (0..paths as u64)
        .into_par_iter()
        .map(|idx| {
            let finest = SubPath::draw(fine.steps(), k_min, m_fine, problem.params.rho_3, seed, idx)?;
            let mut sols = Vec::with_capacity(k_levels.len());
            let mut secs = Vec::with_capacity(k_levels.len());
            for (&k, &f) in k_levels.iter().zip(&factors) {
                let t0 = Instant::now();
                let sub = if f == 1 { finest.clone() } else { finest.coarsen(f, subs_for(k))? };
                sols.push(problem.solve(kind, &grid, &sub)?);
                secs.push(t0.elapsed().as_secs_f64());
            }
            let diffs = sols
                .windows(2)
                .map(|w| Ok(l2_error(&w[0], &w[1])?.powi(2)))
                .collect::<Result<Vec<_>>>()?;
            Ok((diffs, sols[0].l2_norm(), secs))
        })
        .collect::<Result<Vec<_>>>()?;
    let levels = (0..k_levels.len() - 1)
        .map(|i| {
            let e = McError::from_samples(per_path.iter().map(|(d, n, _)| (d[i], *n)).collect());
            log::info!("{kind} k={}: proxy {:.4e}", k_levels[i], e.error);
            Level {
                level: i,
                h_x: h.0,
                h_y: h.1,
                k: k_levels[i],
                error: e.error,
                stderr: e.stderr,
                seconds: per_path.iter().map(|(_, _, s)| s[i] + s[i + 1]).sum(),
                floored: floored(e.error, e.reference_norm),
            }
        })
        .collect();
    Ok(finish(levels, |l| l.k))
}

/// Single coupled h-proxy: mesh `h` against `h / 2` at fixed `k`.
pub fn proxy_error_h(
    kind: SchemeKind,
    problem: &HestonProblem,
    k: f64,
    h: (f64, f64),
    paths: usize,
    seed: u64,
) -> Result<f64> {
    let r = proxy_convergence_h(kind, problem, k, &[h, (h.0 / 2.0, h.1 / 2.0)], paths, seed)?;
    Ok(r.levels[0].error)
}

/// Single coupled k-proxy: step `k` against `k / ratio` on mesh `h`.
pub fn proxy_error_k(
    kind: SchemeKind,
    problem: &HestonProblem,
    h: (f64, f64),
    k: f64,
    ratio: usize,
    paths: usize,
    seed: u64,
) -> Result<f64> {
    if ratio == 0 {
        return Err(param("ratio", "must be positive"));
    }
    let r = proxy_convergence_k(kind, problem, h, &[k, k / ratio as f64], paths, seed)?;
    Ok(r.levels[0].error)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostRow {
    pub scheme: SchemeKind,
    pub level: usize,
    pub h_x: f64,
    pub h_y: f64,
    pub k: f64,
    pub seconds: f64,
    pub repetitions: usize,
}

/// Each level repeats for at least this long and this many times; the
/// fastest repetition is reported.
pub const COST_MIN_SECONDS: f64 = 0.2;
pub const COST_MIN_REPS: usize = 3;

/// Fastest wall time of one path (path sampling plus time stepping) per level, with
/// `k` divided by 4 and both mesh widths halved from level to level.
/// Stepper construction is excluded. Runs single-threaded.
pub fn cost_study(
    kinds: &[SchemeKind],
    problem: &HestonProblem,
    coarsest: (f64, f64, f64),
    level_count: usize,
    seed: u64,
) -> Result<Vec<CostRow>> {
    let mut rows = Vec::new();
    for &kind in kinds {
        for level in 0..level_count {
            let scale = 2f64.powi(level as i32);
            let (hx, hy, k) = (coarsest.0 / scale, coarsest.1 / scale, coarsest.2 / (scale * scale));
            let grid = problem.grid(hx, hy)?;
            let tg = TimeGrid::with_step(problem.horizon, k)?;
            let stepper = Stepper::new(kind, &SpdeModel::Heston(problem.params), &grid, k)?;
            let (init, _) = dirac_initial(&grid, problem.x0, problem.y0)?;
            let mut reps = 0;
            let mut best = f64::INFINITY;
            let t0 = Instant::now();
            while reps < COST_MIN_REPS || t0.elapsed().as_secs_f64() < COST_MIN_SECONDS {
                let t = Instant::now();
                let path = if kind.needs_levy_area() {
                    SubPath::draw(tg.steps(), k, subs(k), problem.params.rho_3, seed, reps as u64)?.to_path()
                } else {
                    draw_path_indexed(tg.steps(), k, problem.params.rho_3, seed, reps as u64)?
                };
                std::hint::black_box(stepper.evolve(&init, &path, tg.steps())?);
                best = best.min(t.elapsed().as_secs_f64());
                reps += 1;
            }
            rows.push(CostRow {
                scheme: kind,
                level,
                h_x: hx,
                h_y: hy,
                k,
                seconds: best,
                repetitions: reps,
            });
        }
    }
    Ok(rows)
}

/// Writes `level,h_x,h_y,k,error,seconds`.
pub fn write_levels_csv<W: Write>(levels: &[Level], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "h_x", "h_y", "k", "error", "seconds"])?;
    for l in levels {
        w.write_record([
            l.level.to_string(),
            l.h_x.to_string(),
            l.h_y.to_string(),
            l.k.to_string(),
            l.error.to_string(),
            l.seconds.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_rows_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

/// Record sufficient to re-run an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize> {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub config: C,
    pub outputs: Vec<String>,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &str, seed: u64, threads: usize, config: C) -> Self {
        Self {
            command: command.to_string(),
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            seed,
            threads,
            config,
            outputs: Vec::new(),
        }
    }

    pub fn write_json<W: Write>(&self, out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(std::io::Error::from)
    }
}

/// Summary of a Levy-area sampling audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevyAudit {
    pub samples: usize,
    pub k: f64,
    pub m_sub: usize,
    pub rho: f64,
    /// Largest `|a_xy + a_yx + sum dW_i dB_i - dW dB|` relative to the sum
    /// of the magnitudes of its four terms.
    pub abel_max_rel: f64,
    pub mean_a_xy: f64,
    pub mean_stderr: f64,
    pub var_a_xy: f64,
    /// `k^2 (m - 1) / (2 m)`, the variance of the sub-sum.
    pub var_oracle: f64,
}

impl LevyAudit {
    pub fn abel_ok(&self) -> bool {
        self.abel_max_rel <= 1e-12
    }

    pub fn mean_ok(&self) -> bool {
        self.mean_a_xy.abs() <= 4.0 * self.mean_stderr
    }

    pub fn variance_ok(&self) -> bool {
        (self.var_a_xy / self.var_oracle - 1.0).abs() <= 0.05
    }

    pub fn pass(&self) -> bool {
        self.abel_ok() && self.mean_ok() && self.variance_ok()
    }
}

/// Draws `samples` steps of size `k`, sub-samples each into `m_sub` pieces
/// and checks the summation identity and the first two moments of `a_xy`.
pub fn levy_audit(samples: usize, k: f64, m_sub: usize, rho: f64, seed: u64) -> Result<LevyAudit> {
    if samples < 2 {
        return Err(param("samples", "need at least two samples"));
    }
    if m_sub < 2 {
        return Err(param("m_sub", "need at least two sub-steps"));
    }
    if !(k > 0.0) {
        return Err(param("k", "must be positive"));
    }
    let draws = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::stochastic::path_rng(seed, i);
            let step = crate::stochastic::PathStep::draw(&mut rng, rho);
            let s = crate::stochastic::levy_area_with(&mut rng, step, k, m_sub, rho)?;
            let (dw, db) = step.increments(k);
            let cross = s.cross_sum();
            let scale = s.a_xy.abs() + s.a_yx.abs() + cross.abs() + (dw * db).abs();
            let rel = if scale > 0.0 {
                (s.a_xy + s.a_yx + cross - dw * db).abs() / scale
            } else {
                0.0
            };
            Ok((s.a_xy, rel))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = samples as f64;
    let mean = draws.iter().map(|d| d.0).sum::<f64>() / n;
    let var = draws.iter().map(|d| (d.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(LevyAudit {
        samples,
        k,
        m_sub,
        rho,
        abel_max_rel: draws.iter().map(|d| d.1).fold(0.0, f64::max),
        mean_a_xy: mean,
        mean_stderr: (var / n).sqrt(),
        var_a_xy: var,
        var_oracle: k * k * (m_sub - 1) as f64 / (2.0 * m_sub as f64),
    })
}

/// Evolves the initial datum along a caller-supplied path.
pub fn evolve_on_path(
    kind: SchemeKind,
    problem: &ConstantProblem,
    grid: &Grid2D,
    path: &BrownianPath,
    tg: &TimeGrid,
) -> Result<Field> {
    let init = problem.initial_field(grid)?;
    crate::schemes::evolve(&init, kind, &SpdeModel::Constant(problem.params), tg, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn l2_error_examples() {
        let g = Grid2D::square(0.0, 2.5, 0.5).unwrap();
        let a = Field::from_fn(g, |x, y| x + y);
        assert_eq!(l2_error(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.values[[1, 2]] += 1.0;
        assert!((l2_error(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let r = |rng: &mut rand_chacha::ChaCha8Rng| Field::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
            let (f, h, q) = (r(&mut rng), r(&mut rng), r(&mut rng));
            assert!(l2_error(&f, &q).unwrap() <= l2_error(&f, &h).unwrap() + l2_error(&h, &q).unwrap() + 1e-15);
        }
        let other = Grid2D::square(0.0, 2.0, 0.5).unwrap();
        assert!(l2_error(&a, &Field::zeros(other)).is_err());
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let xs: Vec<f64> = (1..6).map(|i| -(i as f64)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 0.3).collect();
        let (s, e) = fit_slope(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12 && e < 1e-12);
    }

    fn small() -> ConstantProblem {
        ConstantProblem {
            x_min: -6.0,
            x_max: 10.0,
            y_min: -6.0,
            y_max: 10.0,
            horizon: 0.5,
            ..ConstantProblem::benchmark()
        }
    }

    #[test]
    fn noise_free_error_is_path_independent() {
        let prob = ConstantProblem {
            params: ModelParams::new(0.1, 0.0, 0.0, 0.0, 0.3).unwrap(),
            ..small()
        };
        let g = prob.grid(0.5, 0.5).unwrap();
        let tg = TimeGrid::new(0.5, 8).unwrap();
        let one = mc_l2_error(SchemeKind::AdiMilstein, &prob, &g, &tg, 1, 3).unwrap();
        let many = mc_l2_error(SchemeKind::AdiMilstein, &prob, &g, &tg, 5, 99).unwrap();
        assert!((one.error - many.error).abs() <= 1e-15 * one.error);
    }

    #[test]
    fn mc_error_is_deterministic_and_stable_in_l() {
        let prob = small();
        let g = prob.grid(0.5, 0.5).unwrap();
        let tg = TimeGrid::new(0.5, 8).unwrap();
        let a = mc_l2_error(SchemeKind::AdiMilstein, &prob, &g, &tg, 16, 5).unwrap();
        let b = mc_l2_error(SchemeKind::AdiMilstein, &prob, &g, &tg, 16, 5).unwrap();
        assert_eq!(a, b);
        let c = mc_l2_error(SchemeKind::AdiMilstein, &prob, &g, &tg, 32, 5).unwrap();
        assert!((a.error - c.error).abs() <= 3.0 * (a.stderr + c.stderr));
    }

    #[test]
    fn noise_free_k_refinement_hits_spatial_floor() {
        let prob = ConstantProblem {
            params: ModelParams::heat(),
            ..small()
        };
        let r = convergence_in_k(SchemeKind::AdiMilstein, &prob, 0.5, &[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0], 1, 1)
            .unwrap();
        assert!(r.fitted_slope.abs() < 0.2, "slope {}", r.fitted_slope);
    }

    #[test]
    fn nested_difference_alignment() {
        let p = HestonProblem::benchmark();
        let c = p.grid(0.625, 0.025).unwrap();
        let f = p.grid(0.3125, 0.0125).unwrap();
        let fc = Field::from_fn(c, |x, y| x * y);
        let ff = Field::from_fn(f, |x, y| x * y);
        assert!(nested_l2_difference(&fc, &ff).unwrap() < 1e-12);
        assert_eq!(nested_l2_difference(&fc, &fc).unwrap(), 0.0);
        let odd = p.grid(0.625 / 3.0 * 2.0, 0.025).unwrap();
        assert!(matches!(
            nested_l2_difference(&fc, &Field::zeros(odd)),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn identical_timesteps_give_zero_proxy() {
        let p = HestonProblem::benchmark();
        let e = proxy_error_k(SchemeKind::AdiMilsteinHeston, &p, (0.625, 0.025), 0.25, 1, 2, 7).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn csv_and_manifest_shapes() {
        let levels = vec![Level {
            level: 0,
            h_x: 0.5,
            h_y: 0.5,
            k: 0.25,
            error: 1e-3,
            stderr: 0.0,
            seconds: 0.1,
            floored: false,
        }];
        let mut buf = Vec::new();
        write_levels_csv(&levels, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("level,h_x,h_y,k,error,seconds\n0,0.5,0.5,0.25,0.001,0.1"));
        let m = Manifest::new("converge", 3, 1, ConstantProblem::benchmark());
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["seed"], 3);
        assert_eq!(v["config"]["params"]["rho_xy"], 0.45);
    }
}
