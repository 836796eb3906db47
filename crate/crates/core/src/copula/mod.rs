//! Bivariate copulas: the model type, builtin families, density-backed and
//! grid-backed copulas, and conditional-distribution machinery.

mod builtin;
mod grid;
mod mdensity;
mod spec;
mod validate;

use std::fmt;
use std::sync::Arc;

pub use builtin::{Fgm, Frank};
pub use grid::GridCopula;
pub(crate) use grid::pi_nodes;
pub use mdensity::{
    density_unit_margins, make_m_copula, DensityBacked, MConstants, MDensitySpec, MVariant,
    MarginAxis, MarginReport, UnitFn,
};
pub use spec::{parse_copula_json, parse_copula_spec, parse_unit_fn};
pub use validate::{validate, ValidationReport};

use crate::error::{Error, Result};

/// Step used for finite-difference partials of closure-backed copulas.
pub(crate) const PARTIAL_STEP: f64 = 1e-6;
/// Step used for finite-difference densities of closure-backed copulas.
pub(crate) const DENSITY_STEP: f64 = 1e-4;
/// Absolute tolerance of [`CopulaModel::cond_quantile`].
pub const QUANTILE_TOL: f64 = 1e-10;

/// A point of the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPoint {
    u: f64,
    v: f64,
}

impl UnitPoint {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "point ({u}, {v}) is outside the unit square"
            )));
        }
        Ok(UnitPoint { u, v })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }
}

/// Signal returned by [`CopulaModel::density`] when the model carries
/// probability mass without a density (the diagonal of `M`, the
/// anti-diagonal of `W`). `ac_density` is the density of the absolutely
/// continuous part, already weighted by its share of the total mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPart {
    pub ac_density: f64,
    pub singular_mass: f64,
}

/// A copula given by closures. Methods returning `None` fall back to finite
/// differences of the CDF.
pub trait CopulaFn: Send + Sync + fmt::Debug {
    fn label(&self) -> String;

    fn cdf(&self, u: f64, v: f64) -> f64;

    fn density(&self, _u: f64, _v: f64) -> Option<f64> {
        None
    }

    fn partial_u(&self, _u: f64, _v: f64) -> Option<f64> {
        None
    }

    fn partial_v(&self, _u: f64, _v: f64) -> Option<f64> {
        None
    }

    /// Whether the copula has mass off any density (a singular component).
    fn has_singular_part(&self) -> bool {
        false
    }
}

/// Copula given only by a CDF closure.
pub struct CdfClosure {
    label: String,
    cdf: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CdfClosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdfClosure").field("label", &self.label).finish()
    }
}

impl CopulaFn for CdfClosure {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn cdf(&self, u: f64, v: f64) -> f64 {
        (self.cdf)(u, v)
    }
}

/// Convex combination of copulas.
#[derive(Debug, Clone)]
pub struct Mixture {
    parts: Vec<(f64, CopulaModel)>,
}

impl Mixture {
    /// Weights must be nonnegative and sum to one within `1e-12`.
    /// Zero-weight parts are dropped.
    pub fn new(parts: Vec<(f64, CopulaModel)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        let mut total = 0.0;
        for (w, _) in &parts {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidParameter(format!("mixture weight {w} is negative")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let parts: Vec<_> = parts.into_iter().filter(|(w, _)| *w > 0.0).collect();
        Ok(Mixture { parts })
    }

    pub fn parts(&self) -> &[(f64, CopulaModel)] {
        &self.parts
    }
}

/// A bivariate copula.
#[derive(Clone)]
pub enum CopulaModel {
    /// Independence, `uv`.
    Pi,
    /// Upper Fréchet–Hoeffding bound, `min(u, v)`.
    FrechetM,
    /// Lower Fréchet–Hoeffding bound, `max(u + v - 1, 0)`.
    FrechetW,
    Frank(Frank),
    Fgm(Fgm),
    DensityBacked(Arc<DensityBacked>),
    Grid(Arc<GridCopula>),
    Mixture(Mixture),
    Transformed(Arc<dyn CopulaFn>),
}

impl fmt::Debug for CopulaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn clamp01(t: f64) -> f64 {
    t.clamp(0.0, 1.0)
}

impl CopulaModel {
    pub fn frank(lambda: f64) -> Result<Self> {
        Frank::new(lambda).map(CopulaModel::Frank)
    }

    pub fn fgm(theta: f64) -> Result<Self> {
        Fgm::new(theta).map(CopulaModel::Fgm)
    }

    pub fn mixture(parts: Vec<(f64, CopulaModel)>) -> Result<Self> {
        let m = Mixture::new(parts)?;
        if m.parts.len() == 1 {
            return Ok(m.parts.into_iter().next().unwrap().1);
        }
        Ok(CopulaModel::Mixture(m))
    }

    pub fn grid(grid: GridCopula) -> Self {
        CopulaModel::Grid(Arc::new(grid))
    }

    pub fn transformed(f: impl CopulaFn + 'static) -> Self {
        CopulaModel::Transformed(Arc::new(f))
    }

    /// Wrap an arbitrary CDF closure. Nothing is checked; run
    /// [`validate`] on the result.
    pub fn from_cdf_fn<F>(label: impl Into<String>, cdf: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        CopulaModel::Transformed(Arc::new(CdfClosure {
            label: label.into(),
            cdf: Arc::new(cdf),
        }))
    }

    pub fn label(&self) -> String {
        match self {
            CopulaModel::Pi => "Pi".into(),
            CopulaModel::FrechetM => "M".into(),
            CopulaModel::FrechetW => "W".into(),
            CopulaModel::Frank(f) => format!("Frank({})", f.lambda()),
            CopulaModel::Fgm(f) => format!("FGM({})", f.theta()),
            CopulaModel::DensityBacked(d) => d.label().to_string(),
            CopulaModel::Grid(g) => format!("Grid(n={}, m_mass={})", g.n(), g.singular_m_mass()),
            CopulaModel::Mixture(m) => {
                let terms: Vec<String> = m
                    .parts
                    .iter()
                    .map(|(w, c)| format!("{w}*{}", c.label()))
                    .collect();
                format!("Mix[{}]", terms.join(" + "))
            }
            CopulaModel::Transformed(t) => t.label(),
        }
    }

    pub fn cdf_at(&self, p: UnitPoint) -> f64 {
        self.cdf(p.u, p.v)
    }

    /// `C(u, v)`; arguments are clamped into `[0, 1]`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp01(u), clamp01(v));
        match self {
            CopulaModel::Pi => u * v,
            CopulaModel::FrechetM => u.min(v),
            CopulaModel::FrechetW => (u + v - 1.0).max(0.0),
            CopulaModel::Frank(f) => f.cdf(u, v),
            CopulaModel::Fgm(f) => f.cdf(u, v),
            CopulaModel::DensityBacked(d) => d.cdf(u, v),
            CopulaModel::Grid(g) => g.cdf(u, v),
            CopulaModel::Mixture(m) => m.parts.iter().map(|(w, c)| w * c.cdf(u, v)).sum(),
            CopulaModel::Transformed(t) => t.cdf(u, v),
        }
    }

    pub fn density_at(&self, p: UnitPoint) -> std::result::Result<f64, SingularPart> {
        self.density(p.u, p.v)
    }

    /// Density of the absolutely continuous part. Models with singular mass
    /// return `Err(SingularPart)` carrying that density and the singular mass.
    pub fn density(&self, u: f64, v: f64) -> std::result::Result<f64, SingularPart> {
        let (u, v) = (clamp01(u), clamp01(v));
        match self {
            CopulaModel::Pi => Ok(1.0),
            CopulaModel::FrechetM | CopulaModel::FrechetW => Err(SingularPart {
                ac_density: 0.0,
                singular_mass: 1.0,
            }),
            CopulaModel::Frank(f) => Ok(f.density(u, v)),
            CopulaModel::Fgm(f) => Ok(f.density(u, v)),
            CopulaModel::DensityBacked(d) => Ok(d.density(u, v)),
            CopulaModel::Grid(g) => {
                let s = g.singular_m_mass();
                let ac = (1.0 - s) * g.ac_density(u, v);
                if s > 0.0 {
                    Err(SingularPart {
                        ac_density: ac,
                        singular_mass: s,
                    })
                } else {
                    Ok(ac)
                }
            }
            CopulaModel::Mixture(m) => {
                let mut ac = 0.0;
                let mut sing = 0.0;
                for (w, c) in &m.parts {
                    match c.density(u, v) {
                        Ok(d) => ac += w * d,
                        Err(sp) => {
                            ac += w * sp.ac_density;
                            sing += w * sp.singular_mass;
                        }
                    }
                }
                if sing > 0.0 {
                    Err(SingularPart {
                        ac_density: ac,
                        singular_mass: sing,
                    })
                } else {
                    Ok(ac)
                }
            }
            CopulaModel::Transformed(t) => {
                let d = t
                    .density(u, v)
                    .unwrap_or_else(|| fd_density(|a, b| t.cdf(a, b), u, v));
                if t.has_singular_part() {
                    Err(SingularPart {
                        ac_density: d,
                        singular_mass: f64::NAN,
                    })
                } else {
                    Ok(d)
                }
            }
        }
    }

    /// Transition kernel `P(X_{n+1} <= v | X_n = x) = ∂C/∂u (x, v)`.
    pub fn cond_cdf(&self, x: f64, v: f64) -> f64 {
        let (x, v) = (clamp01(x), clamp01(v));
        let raw = match self {
            CopulaModel::Pi => v,
            CopulaModel::FrechetM => {
                if x <= v {
                    1.0
                } else {
                    0.0
                }
            }
            CopulaModel::FrechetW => {
                if v >= 1.0 - x {
                    1.0
                } else {
                    0.0
                }
            }
            CopulaModel::Frank(f) => f.partial_u(x, v),
            CopulaModel::Fgm(f) => f.partial_u(x, v),
            CopulaModel::DensityBacked(d) => d.partial_u(x, v),
            CopulaModel::Grid(g) => g.partial_u(x, v),
            CopulaModel::Mixture(m) => m.parts.iter().map(|(w, c)| w * c.cond_cdf(x, v)).sum(),
            CopulaModel::Transformed(t) => t
                .partial_u(x, v)
                .unwrap_or_else(|| fd_partial(|a| t.cdf(a, v), x)),
        };
        if v >= 1.0 {
            1.0
        } else {
            clamp01(raw)
        }
    }

    /// `∂C/∂v (u, y) = P(U <= u | V = y)`.
    pub fn partial_v(&self, u: f64, y: f64) -> f64 {
        let (u, y) = (clamp01(u), clamp01(y));
        let raw = match self {
            CopulaModel::Pi => u,
            CopulaModel::FrechetM => {
                if y <= u {
                    1.0
                } else {
                    0.0
                }
            }
            CopulaModel::FrechetW => {
                if u >= 1.0 - y {
                    1.0
                } else {
                    0.0
                }
            }
            CopulaModel::Frank(f) => f.partial_v(u, y),
            CopulaModel::Fgm(f) => f.partial_v(u, y),
            CopulaModel::DensityBacked(d) => d.partial_v(u, y),
            CopulaModel::Grid(g) => g.partial_v(u, y),
            CopulaModel::Mixture(m) => m.parts.iter().map(|(w, c)| w * c.partial_v(u, y)).sum(),
            CopulaModel::Transformed(t) => t
                .partial_v(u, y)
                .unwrap_or_else(|| fd_partial(|b| t.cdf(u, b), y)),
        };
        if u >= 1.0 {
            1.0
        } else {
            clamp01(raw)
        }
    }

    /// Smallest `v` with `cond_cdf(x, v) >= q`, by bisection to
    /// [`QUANTILE_TOL`]. Atoms of the kernel are honored: for `M` this is `x`.
    pub fn cond_quantile(&self, x: f64, q: f64) -> f64 {
        let (x, q) = (clamp01(x), clamp01(q));
        match self {
            CopulaModel::Pi => return q,
            CopulaModel::FrechetM => return x,
            CopulaModel::FrechetW => return 1.0 - x,
            _ => {}
        }
        if self.cond_cdf(x, 0.0) >= q {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > QUANTILE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.cond_cdf(x, mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Mass carried by `M` components on the main diagonal.
    pub fn singular_m_mass(&self) -> f64 {
        match self {
            CopulaModel::FrechetM => 1.0,
            CopulaModel::Grid(g) => g.singular_m_mass(),
            CopulaModel::Mixture(m) => m.parts.iter().map(|(w, c)| w * c.singular_m_mass()).sum(),
            _ => 0.0,
        }
    }

    /// Whether any part of the model lacks a density (diagonal or
    /// anti-diagonal atoms, or transforms of such models).
    pub fn has_singular_part(&self) -> bool {
        match self {
            CopulaModel::FrechetM | CopulaModel::FrechetW => true,
            CopulaModel::Grid(g) => g.singular_m_mass() > 0.0,
            CopulaModel::Mixture(m) => m.parts.iter().any(|(_, c)| c.has_singular_part()),
            CopulaModel::Transformed(t) => t.has_singular_part(),
            _ => false,
        }
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        !self.has_singular_part()
    }

    /// Flatten nested mixtures into `(weight, leaf)` pairs. Grids with a
    /// diagonal atom are split into their continuous part and `M`.
    pub fn decompose(&self) -> Vec<(f64, CopulaModel)> {
        let mut out = Vec::new();
        self.decompose_into(1.0, &mut out);
        out
    }

    fn decompose_into(&self, weight: f64, out: &mut Vec<(f64, CopulaModel)>) {
        match self {
            CopulaModel::Mixture(m) => {
                for (w, c) in &m.parts {
                    c.decompose_into(weight * w, out);
                }
            }
            CopulaModel::Grid(g) if g.singular_m_mass() > 0.0 => {
                let s = g.singular_m_mass();
                if s < 1.0 {
                    out.push((weight * (1.0 - s), CopulaModel::grid(g.continuous_part())));
                }
                out.push((weight * s, CopulaModel::FrechetM));
            }
            other => out.push((weight, other.clone())),
        }
    }
}

/// Central (or one-sided at the boundary) difference of a function of one
/// unit-interval variable.
pub(crate) fn fd_partial<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = PARTIAL_STEP;
    if x < h {
        (f(x + h) - f(x)) / h
    } else if x > 1.0 - h {
        (f(x) - f(x - h)) / h
    } else {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }
}

/// Rectangle-difference density estimate with step [`DENSITY_STEP`],
/// shifted inward near the boundary.
pub(crate) fn fd_density<F: Fn(f64, f64) -> f64>(f: F, u: f64, v: f64) -> f64 {
    let h = DENSITY_STEP;
    let u = u.clamp(h, 1.0 - h);
    let v = v.clamp(h, 1.0 - h);
    (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4.0 * h * h)
}
