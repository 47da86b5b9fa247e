//! Mean-square stability of the constant-coefficient schemes.
//!
//! A Fourier mode `exp(i(xi x + eta y))` is multiplied each step by a random
//! factor `C_n`; a scheme is mean-square stable at that mode when
//! `E|C_n|^2 < 1`. The second moment is assembled from the Gaussian moment
//! identities
//!
//! * `E[(Z_x^2 - 1)^2] = 2`, `E[Z_x^2 Z~^2] = 1 + 2 rho_xy^2`
//! * `E[(Z_x^2 - 1)(Z~^2 - 1)] = 2 rho_xy^2`, `E[(Z_x^2 - 1) Z_x Z~] = 2 rho_xy`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::schemes::SchemeKind;

/// Left-hand sides of the three parameter inequalities, each required `< 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub sides: [f64; 3],
    pub pass: bool,
}

pub fn check_assumption(p: &ModelParams) -> AssumptionCheck {
    let r = p.rho_xy.abs();
    let sides = [
        2.0 * p.rho_x * p.rho_x * (1.0 + 2.0 * r),
        2.0 * p.rho_y * p.rho_y * (1.0 + 2.0 * r),
        2.0 * p.rho_x * p.rho_y * (3.0 * r * r + 2.0 * r + 1.0),
    ];
    AssumptionCheck {
        sides,
        pass: sides.iter().all(|s| *s < 1.0),
    }
}

/// Sufficient bounds on `k / h_x^2` and `k / h_y^2` for the explicit scheme.
pub fn explicit_cfl_bounds(p: &ModelParams) -> (f64, f64) {
    let (rx, ry, r) = (p.rho_x, p.rho_y, p.rho_xy.abs());
    let common = 2.0 + 2.0 * rx * ry + 6.0 * rx * ry * r * r;
    let bx = common + 2.0 * rx * rx + (3.0 * rx + ry + 4.0 * rx * rx + 4.0 * rx * ry) * r;
    let by = common + 2.0 * ry * ry + (rx + 3.0 * ry + 4.0 * ry * ry + 4.0 * rx * ry) * r;
    (1.0 / bx, 1.0 / by)
}

/// Fourier symbols of the scaled stencils.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveCoefficients {
    /// Symbol of `D_xx / h_x^2`: `-2 sin^2(xi h_x / 2) / h_x^2`.
    pub a_x: f64,
    pub a_y: f64,
    /// Symbol of `D_x^2 / (8 h_x^2)`: `-sin^2(xi h_x) / (2 h_x^2)`.
    pub b_x: f64,
    pub b_y: f64,
    /// `D_x / (2 h_x)` has symbol `i c_x` with `c_x = sin(xi h_x) / h_x`.
    pub c_x: f64,
    pub c_y: f64,
    /// Symbol of `D_xy / (4 h_x h_y)`: `-sin(xi h_x) sin(eta h_y) / (h_x h_y)`.
    pub d: f64,
}

pub fn wave_coefficients(xi: f64, eta: f64, h_x: f64, h_y: f64) -> Result<WaveCoefficients> {
    let slack = 1.0 + 1e-12;
    if !(xi.abs() * h_x <= PI * slack) || !(eta.abs() * h_y <= PI * slack) {
        return Err(Error::DomainValue(format!(
            "wavenumber ({xi}, {eta}) outside [-pi/h_x, pi/h_x] x [-pi/h_y, pi/h_y]"
        )));
    }
    let (sx, sy) = ((xi * h_x).sin(), (eta * h_y).sin());
    let (hx2, hy2) = (h_x * h_x, h_y * h_y);
    Ok(WaveCoefficients {
        a_x: -2.0 * (xi * h_x / 2.0).sin().powi(2) / hx2,
        a_y: -2.0 * (eta * h_y / 2.0).sin().powi(2) / hy2,
        b_x: -sx * sx / (2.0 * hx2),
        b_y: -sy * sy / (2.0 * hy2),
        c_x: sx / h_x,
        c_y: sy / h_y,
        d: -sx * sy / (h_x * h_y),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplificationReport {
    pub xi: f64,
    pub eta: f64,
    pub moment2: f64,
    pub stable: bool,
}

/// Closed-form `E|C_n|^2` for one Fourier mode.
///
/// Drift terms are included; with `mu = 0` the implicit denominator reduces
/// to `(1 - (a_x + a_y) k)^2` and the ADI one to `((1 - a_x k)(1 - a_y k))^2`.
pub fn amplification_moment2(
    p: &ModelParams,
    k: f64,
    h_x: f64,
    h_y: f64,
    xi: f64,
    eta: f64,
    kind: SchemeKind,
) -> Result<AmplificationReport> {
    let w = wave_coefficients(xi, eta, h_x, h_y)?;
    let (rx, ry, r) = (p.rho_x, p.rho_y, p.rho_xy);
    let s = (rx * ry).sqrt();
    let adv = k * (p.mu_x * w.c_x + p.mu_y * w.c_y);
    // imaginary part: noise (and explicit drift)
    let mut e_b2 = k * (w.c_x * w.c_x * rx + w.c_y * w.c_y * ry + 2.0 * w.c_x * w.c_y * s * r);
    let (alpha, denom) = match kind {
        SchemeKind::ExplicitMilstein => {
            e_b2 += adv * adv;
            (1.0 + (w.a_x + w.a_y) * k, 1.0)
        }
        SchemeKind::ImplicitMilstein | SchemeKind::SemiImplicitEuler => {
            let re = 1.0 - (w.a_x + w.a_y) * k;
            (1.0, re * re + adv * adv)
        }
        SchemeKind::AdiMilstein => {
            let fx = (1.0 - w.a_x * k).powi(2) + (k * p.mu_x * w.c_x).powi(2);
            let fy = (1.0 - w.a_y * k).powi(2) + (k * p.mu_y * w.c_y).powi(2);
            (1.0, fx * fy)
        }
        other => {
            return Err(Error::SchemeMismatch(format!(
                "no closed-form amplification factor for {other}"
            )))
        }
    };
    let e_a2 = if kind == SchemeKind::SemiImplicitEuler {
        (alpha + w.d * s * r * k).powi(2)
    } else {
        let k2 = k * k;
        let e_x = w.d * s * k * r;
        let e_x2 = 2.0 * w.b_x * w.b_x * rx * rx * k2
            + 2.0 * w.b_y * w.b_y * ry * ry * k2
            + w.d * w.d * s * s * k2 * (1.0 + 2.0 * r * r)
            + 4.0 * w.b_x * w.b_y * rx * ry * r * r * k2
            + 4.0 * w.b_x * w.d * rx * s * r * k2
            + 4.0 * w.b_y * w.d * ry * s * r * k2;
        alpha * alpha + 2.0 * alpha * e_x + e_x2
    };
    let moment2 = (e_a2 + e_b2) / denom;
    Ok(AmplificationReport {
        xi,
        eta,
        moment2,
        stable: moment2 < 1.0,
    })
}

/// Wavenumbers `-pi/h + 2 pi m / ((n - 1) h)`, `m = 0..n`, endpoints included.
pub fn wavenumber_lattice(h: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|m| {
            if 2 * m + 1 == n {
                0.0
            } else {
                -PI / h + 2.0 * PI * m as f64 / ((n - 1) as f64 * h)
            }
        })
        .collect()
}

/// Largest `E|C_n|^2` over the `n x n` lattice, origin excluded.
pub fn sup_moment2(
    p: &ModelParams,
    k: f64,
    h_x: f64,
    h_y: f64,
    kind: SchemeKind,
    n: usize,
) -> Result<AmplificationReport> {
    let xs = wavenumber_lattice(h_x, n);
    let ys = wavenumber_lattice(h_y, n);
    let mut best: Option<AmplificationReport> = None;
    for &xi in &xs {
        for &eta in &ys {
            if xi == 0.0 && eta == 0.0 {
                continue;
            }
            let rep = amplification_moment2(p, k, h_x, h_y, xi, eta, kind)?;
            if best.map_or(true, |b| rep.moment2 > b.moment2) {
                best = Some(rep);
            }
        }
    }
    best.ok_or_else(|| Error::DomainValue("empty wavenumber lattice".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionCell {
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_xy: f64,
    pub assumption_pass: bool,
    pub sup_moment2: f64,
    pub stable: bool,
}

/// Evaluates the parameter inequalities and the lattice sup of `E|C_n|^2`
/// for each `(rho_x, rho_y, rho_xy)` cell. Cells outside the valid parameter
/// range are skipped.
pub fn stability_region_sweep(
    cells: &[(f64, f64, f64)],
    mu: (f64, f64),
    k: f64,
    h: f64,
    kind: SchemeKind,
    lattice: usize,
) -> Result<Vec<RegionCell>> {
    cells
        .par_iter()
        .filter_map(|&(rx, ry, rxy)| ModelParams::new(mu.0, mu.1, rx, ry, rxy).ok())
        .map(|p| {
            let sup = sup_moment2(&p, k, h, h, kind, lattice)?;
            Ok(RegionCell {
                rho_x: p.rho_x,
                rho_y: p.rho_y,
                rho_xy: p.rho_xy,
                assumption_pass: check_assumption(&p).pass,
                sup_moment2: sup.moment2,
                stable: sup.moment2 < 1.0,
            })
        })
        .collect()
}

/// Writes `rho_x,rho_y,rho_xy,assumption_pass,sup_moment2,stable`.
pub fn write_region_csv<W: Write>(cells: &[RegionCell], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityMargins {
    pub beta: f64,
    pub theta0: f64,
    pub theta: f64,
}

pub fn margins(p: &ModelParams) -> Result<StabilityMargins> {
    let r = p.rho_xy.abs();
    let (rx, ry) = (p.rho_x, p.rho_y);
    let beta = [
        1.0 - rx,
        1.0 - ry,
        1.0 - 2.0 * rx * rx * (1.0 + 2.0 * r),
        1.0 - 2.0 * ry * ry * (1.0 + 2.0 * r),
        1.0 - 2.0 * rx * ry * (1.0 + 2.0 * r + 3.0 * r * r),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    if !(beta > 0.0) {
        return Err(Error::AssumptionViolated { beta });
    }
    let theta0 = 1.0 - 0.5 * beta;
    Ok(StabilityMargins {
        beta,
        theta0,
        theta: theta0.sqrt(),
    })
}

/// `k <= T log2(1/theta) / (c0 + (4 + beta_exp) log2(1/h_min))`.
pub fn advisory_timestep(p: &ModelParams, horizon: f64, h_min: f64, c0: f64, beta_exp: f64) -> Result<f64> {
    let m = margins(p)?;
    let denom = c0 + (4.0 + beta_exp) * (1.0 / h_min).log2();
    if !(denom > 0.0) {
        return Err(Error::DomainValue(format!("non-positive denominator {denom}")));
    }
    Ok(horizon * (1.0 / m.theta).log2() / denom)
}
