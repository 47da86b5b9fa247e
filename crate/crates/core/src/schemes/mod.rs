//! Time stepping for the constant-coefficient SPDE and its variable-coefficient
//! generalisations.
//!
//! Each scheme has a stepper that precomputes its implicit factors once per
//! `(grid, k)` and a free function doing a single self-contained step.

mod constant;
mod general;
mod heston;

use serde::{Deserialize, Serialize};

pub use constant::{
    step_adi_milstein, step_explicit_milstein, step_implicit_milstein, step_semi_implicit_euler, ConstantStepper,
    ImplicitSolve,
};
pub use general::{step_adi_general, CoefficientFields, GeneralStepper};
pub use heston::{step_heston_spde, HestonSpdeParams, HestonStepper};

use crate::error::{param, Error, Result};
use crate::model::{Field, ModelParams, TimeGrid};
use crate::stochastic::{BrownianPath, LevyArea};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "explicit-milstein")]
    ExplicitMilstein,
    #[serde(rename = "implicit-milstein")]
    ImplicitMilstein,
    #[serde(rename = "adi-milstein")]
    AdiMilstein,
    #[serde(rename = "semi-implicit-euler")]
    SemiImplicitEuler,
    #[serde(rename = "adi-milstein-general")]
    AdiMilsteinGeneral,
    #[serde(rename = "heston-milstein")]
    AdiMilsteinHeston,
    #[serde(rename = "heston-modified-milstein")]
    AdiMilsteinHestonModified,
    #[serde(rename = "heston-euler")]
    AdiEulerHeston,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 8] = [
        SchemeKind::ExplicitMilstein,
        SchemeKind::ImplicitMilstein,
        SchemeKind::AdiMilstein,
        SchemeKind::SemiImplicitEuler,
        SchemeKind::AdiMilsteinGeneral,
        SchemeKind::AdiMilsteinHeston,
        SchemeKind::AdiMilsteinHestonModified,
        SchemeKind::AdiEulerHeston,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::ExplicitMilstein => "explicit-milstein",
            SchemeKind::ImplicitMilstein => "implicit-milstein",
            SchemeKind::AdiMilstein => "adi-milstein",
            SchemeKind::SemiImplicitEuler => "semi-implicit-euler",
            SchemeKind::AdiMilsteinGeneral => "adi-milstein-general",
            SchemeKind::AdiMilsteinHeston => "heston-milstein",
            SchemeKind::AdiMilsteinHestonModified => "heston-modified-milstein",
            SchemeKind::AdiEulerHeston => "heston-euler",
        }
    }

    pub fn is_constant(self) -> bool {
        matches!(
            self,
            SchemeKind::ExplicitMilstein
                | SchemeKind::ImplicitMilstein
                | SchemeKind::AdiMilstein
                | SchemeKind::SemiImplicitEuler
        )
    }

    pub fn is_heston(self) -> bool {
        matches!(
            self,
            SchemeKind::AdiMilsteinHeston | SchemeKind::AdiMilsteinHestonModified | SchemeKind::AdiEulerHeston
        )
    }

    /// Whether a step consumes the off-diagonal iterated integral.
    pub fn needs_levy_area(self) -> bool {
        matches!(self, SchemeKind::AdiMilsteinGeneral | SchemeKind::AdiMilsteinHeston)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| param("scheme", format!("unknown scheme `{s}`")))
    }
}

pub(crate) fn check_timestep(k: f64) -> Result<()> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(param("k", format!("timestep {k} must be finite and non-negative")));
    }
    Ok(())
}

/// Coefficients a run is driven with.
#[derive(Debug, Clone)]
pub enum SpdeModel {
    Constant(ModelParams),
    /// Node-wise coefficients; `rho` correlates the two drivers.
    General { coeffs: CoefficientFields, rho: f64 },
    Heston(HestonSpdeParams),
}

/// A prepared stepper for any scheme kind.
#[derive(Debug)]
pub enum Stepper {
    Constant(ConstantStepper),
    General(GeneralStepper),
    Heston(HestonStepper),
}

impl Stepper {
    pub fn new(kind: SchemeKind, model: &SpdeModel, grid: &crate::model::Grid2D, k: f64) -> Result<Self> {
        match (model, kind) {
            (SpdeModel::Constant(p), kind) if kind.is_constant() => {
                Ok(Stepper::Constant(ConstantStepper::new(kind, *p, grid, k)?))
            }
            (SpdeModel::General { coeffs, rho }, SchemeKind::AdiMilsteinGeneral) => {
                Ok(Stepper::General(GeneralStepper::new(coeffs.clone(), *rho, grid, k)?))
            }
            (SpdeModel::Heston(hp), kind) if kind.is_heston() => {
                Ok(Stepper::Heston(HestonStepper::new(*hp, kind, grid, k)?))
            }
            _ => Err(Error::SchemeMismatch(format!("{kind} cannot drive the supplied model"))),
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Stepper::Constant(s) => s.kind(),
            Stepper::General(_) => SchemeKind::AdiMilsteinGeneral,
            Stepper::Heston(s) => s.kind(),
        }
    }

    /// One step with normals `path.steps[n]` and, when needed, `path.levy[n]`.
    pub fn step(&self, v: &Field, path: &BrownianPath, n: usize) -> Result<Field> {
        let s = path.steps[n];
        let levy = || -> Result<LevyArea> {
            path.levy
                .as_ref()
                .and_then(|l| l.get(n).copied())
                .ok_or(Error::MissingLevyArea(self.kind().name()))
        };
        match self {
            Stepper::Constant(c) => c.step(v, s),
            Stepper::General(g) => g.step(v, s, levy()?),
            Stepper::Heston(h) => {
                let a = if self.kind().needs_levy_area() {
                    levy()?
                } else {
                    LevyArea::default()
                };
                h.step(v, s, a)
            }
        }
    }

    pub fn evolve(&self, initial: &Field, path: &BrownianPath, steps: usize) -> Result<Field> {
        if path.len() < steps {
            return Err(Error::PathTooShort {
                needed: steps,
                available: path.len(),
            });
        }
        let mut v = initial.clone();
        for n in 0..steps {
            v = self.step(&v, path, n)?;
        }
        Ok(v)
    }
}

/// Runs `tg.steps()` steps of `kind` from `initial` along `path`.
pub fn evolve(
    initial: &Field,
    kind: SchemeKind,
    model: &SpdeModel,
    tg: &TimeGrid,
    path: &BrownianPath,
) -> Result<Field> {
    if tg.steps() == 0 {
        return Ok(initial.clone());
    }
    if path.len() < tg.steps() {
        return Err(Error::PathTooShort {
            needed: tg.steps(),
            available: path.len(),
        });
    }
    if ((path.k - tg.k()) / tg.k()).abs() > 1e-9 {
        return Err(param(
            "path",
            format!("path timestep {} differs from time grid step {}", path.k, tg.k()),
        ));
    }
    Stepper::new(kind, model, &initial.grid, tg.k())?.evolve(initial, path, tg.steps())
}
