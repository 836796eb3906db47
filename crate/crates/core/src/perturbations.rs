//! Perturbations of a copula toward `Π` or `M`, the quadratic perturbation
//! `C + θ(x - C)(y - C)` and the construction `C(u + v - C)`.

use std::fmt;
use std::str::FromStr;

use crate::copula::{validate, CopulaFn, CopulaModel};
use crate::error::{Error, Result};

/// Grid and tolerance used to validate transformed perturbations.
const CHECK_GRID: usize = 64;
const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    /// `(1-θ) C + θ Π`
    TildePi,
    /// `(1-θ) C + θ M`
    HatM,
    /// `C + θ (x - C)(y - C)`
    Mesiar,
    /// `C (u + v - C)`; no parameter.
    Dolati,
}

impl PerturbationKind {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbationKind::TildePi => "tilde",
            PerturbationKind::HatM => "hat",
            PerturbationKind::Mesiar => "mesiar",
            PerturbationKind::Dolati => "dolati",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationParams {
    pub kind: PerturbationKind,
    pub theta: f64,
}

impl PerturbationParams {
    pub fn new(kind: PerturbationKind, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(PerturbationParams { kind, theta })
    }

    pub fn apply(&self, c: &CopulaModel) -> Result<CopulaModel> {
        match self.kind {
            PerturbationKind::TildePi => tilde(c, self.theta),
            PerturbationKind::HatM => hat(c, self.theta),
            PerturbationKind::Mesiar => mesiar(c, self.theta),
            PerturbationKind::Dolati => dolati(c),
        }
    }
}

impl fmt::Display for PerturbationParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PerturbationKind::Dolati => f.write_str("dolati"),
            k => write!(f, "{}:{}", k.name(), self.theta),
        }
    }
}

/// `tilde:0.3`, `hat:0.5`, `mesiar:0.7`, `dolati`.
impl FromStr for PerturbationParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "tilde" => PerturbationKind::TildePi,
            "hat" => PerturbationKind::HatM,
            "mesiar" => PerturbationKind::Mesiar,
            "dolati" => PerturbationKind::Dolati,
            other => {
                return Err(Error::spec(
                    "perturb",
                    format!("unknown perturbation `{other}` (tilde, hat, mesiar, dolati)"),
                ))
            }
        };
        let theta = match (kind, arg) {
            (PerturbationKind::Dolati, None) => 0.0,
            (PerturbationKind::Dolati, Some(_)) => {
                return Err(Error::spec("perturb", "dolati takes no parameter"))
            }
            (_, None) => return Err(Error::spec("perturb", format!("`{name}` needs `:theta`"))),
            (_, Some(a)) => a
                .parse::<f64>()
                .map_err(|_| Error::spec("perturb", format!("bad theta `{a}`")))?,
        };
        PerturbationParams::new(kind, theta).map_err(|e| match e {
            Error::InvalidParameter(m) => Error::spec("perturb", m),
            other => other,
        })
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta {theta} outside [0, 1]")));
    }
    Ok(())
}

pub fn tilde(c: &CopulaModel, theta: f64) -> Result<CopulaModel> {
    check_theta(theta)?;
    CopulaModel::mixture(vec![(1.0 - theta, c.clone()), (theta, CopulaModel::Pi)])
}

pub fn hat(c: &CopulaModel, theta: f64) -> Result<CopulaModel> {
    check_theta(theta)?;
    CopulaModel::mixture(vec![(1.0 - theta, c.clone()), (theta, CopulaModel::FrechetM)])
}

#[derive(Debug)]
struct Mesiar {
    base: CopulaModel,
    theta: f64,
}

impl CopulaFn for Mesiar {
    fn label(&self) -> String {
        format!("mesiar({}, {})", self.base.label(), self.theta)
    }

    fn cdf(&self, x: f64, y: f64) -> f64 {
        let c = self.base.cdf(x, y);
        c + self.theta * (x - c) * (y - c)
    }

    fn density(&self, x: f64, y: f64) -> Option<f64> {
        let d = self.base.density(x, y).ok()?;
        let c = self.base.cdf(x, y);
        let cx = self.base.cond_cdf(x, y);
        let cy = self.base.partial_v(x, y);
        Some(d + self.theta * ((1.0 - cx) * (1.0 - cy) + cx * cy - d * (x + y - 2.0 * c)))
    }

    fn partial_u(&self, x: f64, y: f64) -> Option<f64> {
        let c = self.base.cdf(x, y);
        let cx = self.base.cond_cdf(x, y);
        Some(cx + self.theta * ((1.0 - cx) * (y - c) - cx * (x - c)))
    }

    fn partial_v(&self, x: f64, y: f64) -> Option<f64> {
        let c = self.base.cdf(x, y);
        let cy = self.base.partial_v(x, y);
        Some(cy + self.theta * ((1.0 - cy) * (x - c) - cy * (y - c)))
    }

    fn has_singular_part(&self) -> bool {
        self.base.has_singular_part()
    }
}

#[derive(Debug)]
struct Dolati {
    base: CopulaModel,
}

impl CopulaFn for Dolati {
    fn label(&self) -> String {
        format!("dolati({})", self.base.label())
    }

    fn cdf(&self, u: f64, v: f64) -> f64 {
        let c = self.base.cdf(u, v);
        c * (u + v - c)
    }

    fn density(&self, u: f64, v: f64) -> Option<f64> {
        let d = self.base.density(u, v).ok()?;
        let c = self.base.cdf(u, v);
        let cu = self.base.cond_cdf(u, v);
        let cv = self.base.partial_v(u, v);
        Some(d * (u + v - 2.0 * c) + cu + cv - 2.0 * cu * cv)
    }

    fn partial_u(&self, u: f64, v: f64) -> Option<f64> {
        let c = self.base.cdf(u, v);
        let cu = self.base.cond_cdf(u, v);
        Some(cu * (u + v - 2.0 * c) + c)
    }

    fn partial_v(&self, u: f64, v: f64) -> Option<f64> {
        let c = self.base.cdf(u, v);
        let cv = self.base.partial_v(u, v);
        Some(cv * (u + v - 2.0 * c) + c)
    }

    fn has_singular_part(&self) -> bool {
        self.base.has_singular_part()
    }
}

fn checked(model: CopulaModel) -> Result<CopulaModel> {
    let report = validate(&model, CHECK_GRID, CHECK_TOL);
    if !report.passed {
        return Err(Error::NotACopula(format!(
            "{}: boundary deviation {:.3e} at {:?}, rectangle mass {:.3e} at {:?}",
            model.label(),
            report.max_boundary_violation,
            report.boundary_at,
            report.min_rectangle_mass,
            report.rectangle_at
        )));
    }
    Ok(model)
}

/// `C + θ (x - C)(y - C)`. The perturbation term vanishes identically for
/// `M`, which is returned unchanged.
pub fn mesiar(c: &CopulaModel, theta: f64) -> Result<CopulaModel> {
    check_theta(theta)?;
    if theta == 0.0 || matches!(c, CopulaModel::FrechetM) {
        return Ok(c.clone());
    }
    checked(CopulaModel::transformed(Mesiar {
        base: c.clone(),
        theta,
    }))
}

/// `C (u + v - C)`. For `M` this is exactly `Π`, returned as such.
pub fn dolati(c: &CopulaModel) -> Result<CopulaModel> {
    if matches!(c, CopulaModel::FrechetM) {
        return Ok(CopulaModel::Pi);
    }
    checked(CopulaModel::transformed(Dolati { base: c.clone() }))
}
