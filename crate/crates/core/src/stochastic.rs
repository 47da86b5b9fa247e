//! Correlated Brownian increments and Euler sub-stepping for iterated integrals.
//!
//! Random streams come from ChaCha8: a path is seeded with the master seed and
//! selects stream `path_index`, so path `p` of a batch depends only on
//! `(master_seed, p)`. Normals are drawn with the ziggurat sampler of
//! `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{param, Result};

/// Deterministic generator for path `index` of the batch seeded by `master_seed`.
pub fn path_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Stream for sub-step refinements, independent of the step normals.
fn sub_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    path_rng(master_seed ^ 0x5eed_5ab5_7e95_0000, index)
}

fn check_rho(rho: f64, name: &'static str) -> Result<()> {
    if (-1.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(param(name, format!("{rho} not in [-1, 1]")))
    }
}

/// Standard normal pair for one time step; `z_y_tilde` carries correlation
/// `rho_xy` with `z_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub z_x: f64,
    pub z_y_tilde: f64,
}

impl PathStep {
    pub fn from_independent(z_x: f64, z_y: f64, rho_xy: f64) -> Self {
        Self {
            z_x,
            z_y_tilde: rho_xy * z_x + (1.0 - rho_xy * rho_xy).sqrt() * z_y,
        }
    }

    pub fn draw<R: Rng + ?Sized>(rng: &mut R, rho_xy: f64) -> Self {
        let z_x: f64 = rng.sample(StandardNormal);
        let z_y: f64 = rng.sample(StandardNormal);
        Self::from_independent(z_x, z_y, rho_xy)
    }

    /// Brownian increments `(sqrt(k) z_x, sqrt(k) z_y_tilde)`.
    pub fn increments(&self, k: f64) -> (f64, f64) {
        let s = k.sqrt();
        (s * self.z_x, s * self.z_y_tilde)
    }
}

/// The two off-diagonal iterated integrals over one step:
/// `a_xy ~ int (W_s - W_t) dB_s` and `a_yx ~ int (B_s - B_t) dW_s`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LevyArea {
    pub a_xy: f64,
    pub a_yx: f64,
}

/// Sequence of per-step normals with optional per-step Levy areas.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub steps: Vec<PathStep>,
    pub levy: Option<Vec<LevyArea>>,
    pub seed: u64,
    pub k: f64,
    pub rho_xy: f64,
}

impl BrownianPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Terminal Brownian values `(M^x, M^y)` after the first `n` steps.
    pub fn terminal(&self, n: usize) -> (f64, f64) {
        let s = self.k.sqrt();
        let (zx, zy) = self.steps[..n]
            .iter()
            .fold((0.0, 0.0), |(a, b), st| (a + st.z_x, b + st.z_y_tilde));
        (s * zx, s * zy)
    }

    /// Path with `factor` consecutive steps merged: `Z = (Z_1 + ... + Z_f) / sqrt(f)`.
    ///
    /// Levy areas are dropped; coarsen a [`SubPath`] when they are needed.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || self.steps.len() % factor != 0 {
            return Err(param(
                "factor",
                format!("{factor} does not divide path length {}", self.steps.len()),
            ));
        }
        let scale = 1.0 / (factor as f64).sqrt();
        let steps = self
            .steps
            .chunks(factor)
            .map(|c| {
                let (a, b) = c.iter().fold((0.0, 0.0), |(a, b), s| (a + s.z_x, b + s.z_y_tilde));
                PathStep {
                    z_x: a * scale,
                    z_y_tilde: b * scale,
                }
            })
            .collect();
        Ok(BrownianPath {
            steps,
            levy: None,
            seed: self.seed,
            k: self.k * factor as f64,
            rho_xy: self.rho_xy,
        })
    }

    /// Writes `n,z_x,z_y_tilde[,a_xy,a_yx]`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match &self.levy {
            Some(levy) => {
                w.write_record(["n", "z_x", "z_y_tilde", "a_xy", "a_yx"])?;
                for (n, (s, l)) in self.steps.iter().zip(levy).enumerate() {
                    w.write_record(&[
                        n.to_string(),
                        s.z_x.to_string(),
                        s.z_y_tilde.to_string(),
                        l.a_xy.to_string(),
                        l.a_yx.to_string(),
                    ])?;
                }
            }
            None => {
                w.write_record(["n", "z_x", "z_y_tilde"])?;
                for (n, s) in self.steps.iter().enumerate() {
                    w.write_record(&[n.to_string(), s.z_x.to_string(), s.z_y_tilde.to_string()])?;
                }
            }
        }
        w.flush()
    }
}

/// Draws `n_steps` correlated normal pairs from stream 0 of `seed`.
pub fn draw_path(n_steps: usize, k: f64, rho_xy: f64, seed: u64) -> Result<BrownianPath> {
    draw_path_indexed(n_steps, k, rho_xy, seed, 0)
}

/// As [`draw_path`], for path `index` of a batch.
pub fn draw_path_indexed(
    n_steps: usize,
    k: f64,
    rho_xy: f64,
    seed: u64,
    index: u64,
) -> Result<BrownianPath> {
    if n_steps == 0 {
        return Err(param("n_steps", "need at least one step"));
    }
    check_rho(rho_xy, "rho_xy")?;
    if !(k > 0.0) {
        return Err(param("k", "timestep must be positive"));
    }
    let mut rng = path_rng(seed, index);
    let steps = (0..n_steps).map(|_| PathStep::draw(&mut rng, rho_xy)).collect();
    Ok(BrownianPath {
        steps,
        levy: None,
        seed,
        k,
        rho_xy,
    })
}

/// Diagonal iterated integral `int (M_s - M_t) dM_s = (dM^2 - k) / 2`.
pub fn ito_diagonal(delta_m: f64, k: f64) -> f64 {
    0.5 * (delta_m * delta_m - k)
}

/// Number of Euler sub-steps used per time step: `ceil(1/k)`, at least 1.
pub fn sub_step_count(k: f64) -> usize {
    // shave off representation error so that k = 1/1000 gives 1000
    let m = (1.0 / k - 1e-9).ceil();
    if m < 1.0 || !m.is_finite() {
        1
    } else {
        m as usize
    }
}

/// Euler sub-sum approximation of the off-diagonal iterated integrals over
/// one step, with the sub-increments retained.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyAreaSample {
    pub a_xy: f64,
    pub a_yx: f64,
    pub sub_increments: Vec<[f64; 2]>,
}

impl LevyAreaSample {
    /// Builds the sums `a_xy = sum_i (W_{t_i} - W_t) dB_i` and
    /// `a_yx = sum_i (B_{t_i} - B_t) dW_i`.
    pub fn from_increments(dw: &[f64], db: &[f64]) -> Self {
        let area = euler_levy(dw, db);
        Self {
            a_xy: area.a_xy,
            a_yx: area.a_yx,
            sub_increments: dw.iter().zip(db).map(|(&a, &b)| [a, b]).collect(),
        }
    }

    pub fn m_sub(&self) -> usize {
        self.sub_increments.len()
    }

    pub fn area(&self) -> LevyArea {
        LevyArea {
            a_xy: self.a_xy,
            a_yx: self.a_yx,
        }
    }

    /// Step increments `(dW, dB)` implied by the sub-increments.
    pub fn totals(&self) -> (f64, f64) {
        self.sub_increments
            .iter()
            .fold((0.0, 0.0), |(a, b), s| (a + s[0], b + s[1]))
    }

    /// `sum_i dW_i dB_i`.
    pub fn cross_sum(&self) -> f64 {
        self.sub_increments.iter().map(|s| s[0] * s[1]).sum()
    }
}

fn euler_levy(dw: &[f64], db: &[f64]) -> LevyArea {
    let mut w = 0.0;
    let mut b = 0.0;
    let mut a_xy = 0.0;
    let mut a_yx = 0.0;
    for (&x, &y) in dw.iter().zip(db) {
        a_xy += w * y;
        a_yx += b * x;
        w += x;
        b += y;
    }
    LevyArea { a_xy, a_yx }
}

/// Bridges `m` iid normal draws (scale `sqrt(dt)`) so their sum equals `total`.
fn bridged<R: Rng + ?Sized>(rng: &mut R, m: usize, dt: f64, total: f64) -> Vec<f64> {
    let s = dt.sqrt();
    let mut v: Vec<f64> = (0..m).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
    let shift = (total - v.iter().sum::<f64>()) / m as f64;
    for x in &mut v {
        *x += shift;
    }
    v
}

/// Levy-area sample over one step of size `k`, conditioned on the step's own
/// increments `sqrt(k) (z_x, z_y_tilde)`.
///
/// The sub-path is a discrete Brownian bridge in each independent component,
/// so the sub-increments sum exactly to the step increments. `rho` is the
/// correlation between the two drivers.
pub fn levy_area(step: PathStep, k: f64, m_sub: usize, rho: f64, seed: u64) -> Result<LevyAreaSample> {
    let mut rng = path_rng(seed, 0);
    levy_area_with(&mut rng, step, k, m_sub, rho)
}

pub fn levy_area_with<R: Rng + ?Sized>(
    rng: &mut R,
    step: PathStep,
    k: f64,
    m_sub: usize,
    rho: f64,
) -> Result<LevyAreaSample> {
    if m_sub == 0 {
        return Err(param("m_sub", "need at least one sub-step"));
    }
    check_rho(rho, "rho")?;
    let (dw_total, db_total) = step.increments(k);
    let dt = k / m_sub as f64;
    let dw = bridged(rng, m_sub, dt, dw_total);
    let perp = (1.0 - rho * rho).sqrt();
    let db = if perp == 0.0 {
        dw.iter().map(|x| rho * x).collect()
    } else {
        let perp_total = (db_total - rho * dw_total) / perp;
        let dp = bridged(rng, m_sub, dt, perp_total);
        dw.iter().zip(&dp).map(|(w, p)| rho * w + perp * p).collect::<Vec<_>>()
    };
    Ok(LevyAreaSample::from_increments(&dw, &db))
}

/// Brownian increments on a fine sub-grid: `sub_per_step` sub-intervals of
/// every time step of size `k`.
///
/// Step increments are defined as sums of sub-increments, so the scheme and
/// its Levy areas live on a single filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPath {
    pub k: f64,
    pub sub_per_step: usize,
    pub rho: f64,
    pub seed: u64,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
}

impl SubPath {
    /// The step normals are exactly those of [`draw_path_indexed`] with the
    /// same `(seed, index)`; the sub-increments are bridged onto them from a
    /// separate stream. Paths with different `sub_per_step` therefore share
    /// their step increments.
    pub fn draw(
        n_steps: usize,
        k: f64,
        sub_per_step: usize,
        rho: f64,
        seed: u64,
        index: u64,
    ) -> Result<SubPath> {
        if sub_per_step == 0 {
            return Err(param("sub_per_step", "need at least one sub-step"));
        }
        let path = draw_path_indexed(n_steps, k, rho, seed, index)?;
        let mut rng = sub_rng(seed, index);
        let total = n_steps * sub_per_step;
        let mut dw = Vec::with_capacity(total);
        let mut db = Vec::with_capacity(total);
        for &step in &path.steps {
            let s = levy_area_with(&mut rng, step, k, sub_per_step, rho)?;
            for [a, b] in s.sub_increments {
                dw.push(a);
                db.push(b);
            }
        }
        Ok(SubPath {
            k,
            sub_per_step,
            rho,
            seed,
            dw,
            db,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.dw.len() / self.sub_per_step
    }

    /// Per-step normals and Euler Levy areas.
    pub fn to_path(&self) -> BrownianPath {
        let m = self.sub_per_step;
        let s = 1.0 / self.k.sqrt();
        let mut steps = Vec::with_capacity(self.n_steps());
        let mut levy = Vec::with_capacity(self.n_steps());
        for (w, b) in self.dw.chunks(m).zip(self.db.chunks(m)) {
            steps.push(PathStep {
                z_x: w.iter().sum::<f64>() * s,
                z_y_tilde: b.iter().sum::<f64>() * s,
            });
            levy.push(euler_levy(w, b));
        }
        BrownianPath {
            steps,
            levy: Some(levy),
            seed: self.seed,
            k: self.k,
            rho_xy: self.rho,
        }
    }

    /// Merges `factor` steps into one and regroups the sub-increments into
    /// `sub_per_step` sub-intervals per coarse step.
    pub fn coarsen(&self, factor: usize, sub_per_step: usize) -> Result<SubPath> {
        let fine_subs = factor * self.sub_per_step;
        if factor == 0 || self.n_steps() % factor != 0 {
            return Err(param("factor", format!("{factor} does not divide {}", self.n_steps())));
        }
        if sub_per_step == 0 || fine_subs % sub_per_step != 0 {
            return Err(param(
                "sub_per_step",
                format!("{sub_per_step} does not divide {fine_subs} fine sub-steps"),
            ));
        }
        let group = fine_subs / sub_per_step;
        let sum = |v: &[f64]| v.chunks(group).map(|c| c.iter().sum()).collect::<Vec<f64>>();
        Ok(SubPath {
            k: self.k * factor as f64,
            sub_per_step,
            rho: self.rho,
            seed: self.seed,
            dw: sum(&self.dw),
            db: sum(&self.db),
        })
    }
}
