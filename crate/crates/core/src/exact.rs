//! Closed-form solution of the constant-coefficient SPDE with Dirac data.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{Field, Grid2D, ModelParams};

/// Density at `(x, y)` and time `t` given terminal driver values `m_x`, `m_y`.
///
/// A Gaussian centred at `(x0 + mu_x t + sqrt(rho_x) m_x, y0 + mu_y t + sqrt(rho_y) m_y)`
/// with variances `(1 - rho_x) t` and `(1 - rho_y) t`.
#[allow(clippy::too_many_arguments)]
pub fn exact_density(t: f64, x: f64, y: f64, p: &ModelParams, m_x: f64, m_y: f64, x0: f64, y0: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::DomainValue(format!("exact density needs t > 0, got {t}")));
    }
    p.validate()?;
    let cx = x0 + p.mu_x * t + p.rho_x.sqrt() * m_x;
    let cy = y0 + p.mu_y * t + p.rho_y.sqrt() * m_y;
    let (vx, vy) = ((1.0 - p.rho_x) * t, (1.0 - p.rho_y) * t);
    let e = -(x - cx).powi(2) / (2.0 * vx) - (y - cy).powi(2) / (2.0 * vy);
    Ok(e.exp() / (2.0 * PI * ((1.0 - p.rho_x) * (1.0 - p.rho_y)).sqrt() * t))
}

/// [`exact_density`] sampled at every interior node.
#[allow(clippy::too_many_arguments)]
pub fn exact_field(grid: &Grid2D, t: f64, p: &ModelParams, m_x: f64, m_y: f64, x0: f64, y0: f64) -> Result<Field> {
    exact_density(t, x0, y0, p, m_x, m_y, x0, y0)?;
    Ok(Field::from_fn(*grid, |x, y| {
        exact_density(t, x, y, p, m_x, m_y, x0, y0).expect("arguments checked")
    }))
}
