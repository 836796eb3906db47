//! Density-backed copulas and the four `m`-density families built from a
//! pair of bounded profile functions `h` and `g`.
//!
//! Every member of the family is bilinear in `(1, g(x))` and `(1, h(y))`:
//!
//! ```text
//! m(x, y) = [c00 + c10 g(x) + c01 h(y) + c11 g(x) h(y)] / D
//! ```
//!
//! so the CDF and both partials follow from the antiderivatives of `g` and
//! `h` without any two-dimensional quadrature.

use std::fmt;
use std::sync::{Arc, OnceLock};

use super::{CopulaFn, CopulaModel, GridCopula};
use crate::error::{Error, Result};
use crate::quad;

/// A real function on `[0, 1]` with a label.
#[derive(Clone)]
pub struct UnitFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for UnitFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl UnitFn {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        UnitFn {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// Polynomial with coefficients in increasing degree.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        let c = coeffs.to_vec();
        let label = format!(
            "poly:[{}]",
            c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        );
        UnitFn::new(label, move |x| c.iter().rev().fold(0.0, |acc, a| acc * x + a))
    }

    pub fn constant(value: f64) -> Self {
        UnitFn::polynomial(&[value])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// `∫_0^x f`, composite Gauss–Legendre.
    pub fn integral_to(&self, x: f64) -> f64 {
        quad::gauss_composite(|t| self.eval(t), 0.0, x, 4, 16)
    }

    /// `∫_0^1 |f|`.
    pub fn l1_norm(&self) -> f64 {
        quad::adaptive_simpson(&|t: f64| self.eval(t).abs(), 0.0, 1.0, 64, 1e-13)
    }

    /// `(inf, sup)` over `[0, 1]`: 4097-point scan, then golden-section
    /// refinement around the best scan point.
    pub fn extrema(&self) -> (f64, f64) {
        const SCAN: usize = 4097;
        let step = 1.0 / (SCAN - 1) as f64;
        let mut best_max = (0usize, f64::NEG_INFINITY);
        let mut best_min = (0usize, f64::INFINITY);
        for k in 0..SCAN {
            let y = self.eval(k as f64 * step);
            if y > best_max.1 {
                best_max = (k, y);
            }
            if y < best_min.1 {
                best_min = (k, y);
            }
        }
        let bracket = |k: usize| {
            (
                (k.saturating_sub(1)) as f64 * step,
                ((k + 1).min(SCAN - 1)) as f64 * step,
            )
        };
        let (a, b) = bracket(best_max.0);
        let (_, refined_max) = quad::golden_max(|x| self.eval(x), a, b, 60);
        let (a, b) = bracket(best_min.0);
        let (_, neg_min) = quad::golden_max(|x| -self.eval(x), a, b, 60);
        (best_min.1.min(-neg_min), best_max.1.max(refined_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MVariant {
    M1,
    M2,
    M3,
    M4,
}

impl MVariant {
    pub fn from_index(i: u32) -> Result<Self> {
        match i {
            1 => Ok(MVariant::M1),
            2 => Ok(MVariant::M2),
            3 => Ok(MVariant::M3),
            4 => Ok(MVariant::M4),
            _ => Err(Error::spec("variant", format!("expected 1..4, got {i}"))),
        }
    }

    pub fn index(&self) -> u32 {
        match self {
            MVariant::M1 => 1,
            MVariant::M2 => 2,
            MVariant::M3 => 3,
            MVariant::M4 => 4,
        }
    }
}

/// Profile functions and variant selecting one of `m1..m4`.
#[derive(Debug, Clone)]
pub struct MDensitySpec {
    pub h: UnitFn,
    pub g: UnitFn,
    pub variant: MVariant,
}

/// Derived constants: `a1 = sup h`, `a2 = sup g`, `b1 = inf h`,
/// `b2 = inf g`, and the L1 norms of `h` and `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MConstants {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub norm_h: f64,
    pub norm_g: f64,
}

impl MDensitySpec {
    pub fn new(h: UnitFn, g: UnitFn, variant: MVariant) -> Self {
        MDensitySpec { h, g, variant }
    }

    pub fn constants(&self) -> MConstants {
        let (b1, a1) = self.h.extrema();
        let (b2, a2) = self.g.extrema();
        MConstants {
            a1,
            a2,
            b1,
            b2,
            norm_h: self.h.l1_norm(),
            norm_g: self.g.l1_norm(),
        }
    }
}

/// Coefficients of the bilinear form; see the module docs.
#[derive(Debug, Clone, Copy)]
struct Bilinear {
    c00: f64,
    c10: f64,
    c01: f64,
    c11: f64,
    denom: f64,
}

impl Bilinear {
    fn for_variant(variant: MVariant, k: &MConstants) -> Self {
        let (a1, a2, b1, b2, nh, ng) = (k.a1, k.a2, k.b1, k.b2, k.norm_h, k.norm_g);
        match variant {
            MVariant::M1 => Bilinear {
                c00: a2,
                c10: nh,
                c01: ng,
                c11: -1.0,
                denom: a2 + ng * nh,
            },
            MVariant::M2 => Bilinear {
                c00: a1 * a2,
                c10: nh,
                c01: ng,
                c11: -1.0,
                denom: a1 * a2 + ng * nh,
            },
            // a2(a1-b1) - g(a1-h) + (a1-h)|g| + g(a1-|h|), expanded
            MVariant::M3 => Bilinear {
                c00: a2 * (a1 - b1) + a1 * ng,
                c10: -nh,
                c01: -ng,
                c11: 1.0,
                denom: a2 * (a1 - b1) + ng * (a1 - nh),
            },
            // (a2-b2)(a1-b1) - (a2-g)(a1-h) + (a1-h)(a2-|g|) + (a2-g)(a1-|h|), expanded
            MVariant::M4 => Bilinear {
                c00: (a2 - b2) * (a1 - b1) + a1 * a2 - a1 * ng - a2 * nh,
                c10: nh,
                c01: ng,
                c11: -1.0,
                denom: (a2 - b2) * (a1 - b1) + (a2 - ng) * (a1 - nh),
            },
        }
    }
}

/// Closed-form CDF and partials of an `m`-density copula.
#[derive(Debug, Clone)]
pub struct MCopula {
    spec: MDensitySpec,
    form: Bilinear,
}

impl MCopula {
    pub fn density_value(&self, x: f64, y: f64) -> f64 {
        let f = &self.form;
        let gx = self.spec.g.eval(x);
        let hy = self.spec.h.eval(y);
        (f.c00 + f.c10 * gx + f.c01 * hy + f.c11 * gx * hy) / f.denom
    }
}

impl CopulaFn for MCopula {
    fn label(&self) -> String {
        format!(
            "m{}(h={}, g={})",
            self.spec.variant.index(),
            self.spec.h.label(),
            self.spec.g.label()
        )
    }

    fn cdf(&self, x: f64, y: f64) -> f64 {
        let f = &self.form;
        let gi = self.spec.g.integral_to(x);
        let hi = self.spec.h.integral_to(y);
        ((f.c00 * x * y + f.c10 * gi * y + f.c01 * x * hi + f.c11 * gi * hi) / f.denom)
            .clamp(0.0, x.min(y))
    }

    fn density(&self, x: f64, y: f64) -> Option<f64> {
        Some(self.density_value(x, y))
    }

    fn partial_u(&self, x: f64, y: f64) -> Option<f64> {
        let f = &self.form;
        let gx = self.spec.g.eval(x);
        let hi = self.spec.h.integral_to(y);
        Some((f.c00 * y + f.c10 * gx * y + f.c01 * hi + f.c11 * gx * hi) / f.denom)
    }

    fn partial_v(&self, x: f64, y: f64) -> Option<f64> {
        let f = &self.form;
        let gi = self.spec.g.integral_to(x);
        let hy = self.spec.h.eval(y);
        Some((f.c00 * x + f.c10 * gi + f.c01 * x * hy + f.c11 * gi * hy) / f.denom)
    }
}

type DensityFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Grid resolution of the cached CDF of a density-backed copula without
/// closed-form integrals.
const CACHED_GRID: usize = 256;

/// Copula defined by a density. The CDF and partials come from closed-form
/// integrals when available, otherwise from a lazily built grid of cell
/// averages.
pub struct DensityBacked {
    label: String,
    density: DensityFn,
    integrals: Option<Arc<dyn CopulaFn>>,
    grid: OnceLock<GridCopula>,
}

impl fmt::Debug for DensityBacked {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityBacked").field("label", &self.label).finish()
    }
}

impl DensityBacked {
    /// Check a user density (nonnegativity on a 256×256 grid and unit
    /// margins within `tol`) and wrap it.
    pub fn new<F>(label: impl Into<String>, density: F, tol: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let density: DensityFn = Arc::new(density);
        check_density(&*density, tol)?;
        Ok(DensityBacked {
            label: label.into(),
            density,
            integrals: None,
            grid: OnceLock::new(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn density(&self, u: f64, v: f64) -> f64 {
        (self.density)(u, v)
    }

    fn cached_grid(&self) -> &GridCopula {
        self.grid.get_or_init(|| {
            let n = CACHED_GRID;
            let (nodes, weights) = quad::gauss_legendre(3);
            let h = 1.0 / n as f64;
            let rows = crate::par::map_range(n, |i| {
                (0..n)
                    .map(|j| {
                        let mut acc = 0.0;
                        for (a, wa) in nodes.iter().zip(&weights) {
                            for (b, wb) in nodes.iter().zip(&weights) {
                                let x = (i as f64 + a) * h;
                                let y = (j as f64 + b) * h;
                                acc += wa * wb * (self.density)(x, y).max(0.0);
                            }
                        }
                        acc * h * h
                    })
                    .collect::<Vec<f64>>()
            });
            GridCopula::from_cell_masses(n, &rows.concat(), 0.0)
                .expect("density was checked at construction")
        })
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        match &self.integrals {
            Some(c) => c.cdf(u, v),
            None => self.cached_grid().cdf(u, v),
        }
    }

    pub fn partial_u(&self, u: f64, v: f64) -> f64 {
        match self.integrals.as_ref().and_then(|c| c.partial_u(u, v)) {
            Some(p) => p,
            None => self.cached_grid().partial_u(u, v),
        }
    }

    pub fn partial_v(&self, u: f64, v: f64) -> f64 {
        match self.integrals.as_ref().and_then(|c| c.partial_v(u, v)) {
            Some(p) => p,
            None => self.cached_grid().partial_v(u, v),
        }
    }
}

/// Which integral of the density a margin deviation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginAxis {
    /// `∫ c(t, s) dt` as a function of `s`.
    OverFirst,
    /// `∫ c(s, t) dt` as a function of `s`.
    OverSecond,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginReport {
    pub max_deviation: f64,
    pub axis: MarginAxis,
    /// Value of the free coordinate where the worst deviation occurs.
    pub at: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Largest deviation of the row and column integrals of `density` from one,
/// using a 256-interval Simpson rule evaluated at 257 positions.
pub fn density_unit_margins<F>(density: F, tol: f64) -> MarginReport
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    const N: usize = 256;
    let w = quad::simpson_weights(N);
    let h = 1.0 / N as f64;
    let devs = crate::par::map_range(N + 1, |k| {
        let s = k as f64 * h;
        let mut over_first = 0.0;
        let mut over_second = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let t = i as f64 * h;
            over_first += wi * density(t, s);
            over_second += wi * density(s, t);
        }
        ((over_first - 1.0).abs(), (over_second - 1.0).abs())
    });
    let mut report = MarginReport {
        max_deviation: 0.0,
        axis: MarginAxis::OverFirst,
        at: 0.0,
        tol,
        passed: true,
    };
    for (k, (a, b)) in devs.into_iter().enumerate() {
        let s = k as f64 * h;
        if a > report.max_deviation {
            report.max_deviation = a;
            report.axis = MarginAxis::OverFirst;
            report.at = s;
        }
        if b > report.max_deviation {
            report.max_deviation = b;
            report.axis = MarginAxis::OverSecond;
            report.at = s;
        }
    }
    report.passed = report.max_deviation <= tol;
    report
}

fn check_density(density: &(dyn Fn(f64, f64) -> f64 + Send + Sync), tol: f64) -> Result<()> {
    const N: usize = 256;
    let step = 1.0 / (N - 1) as f64;
    let mut worst = (0.0, 0.0, f64::INFINITY);
    for i in 0..N {
        for j in 0..N {
            let (x, y) = (i as f64 * step, j as f64 * step);
            let d = density(x, y);
            if !(d >= worst.2) {
                worst = (x, y, d);
            }
        }
    }
    if !(worst.2 >= 0.0) {
        return Err(Error::NotADensity {
            reason: "negative or non-finite value".into(),
            x: worst.0,
            y: worst.1,
            value: worst.2,
        });
    }
    let margins = density_unit_margins(density, tol);
    if !margins.passed {
        let (x, y) = match margins.axis {
            MarginAxis::OverFirst => (f64::NAN, margins.at),
            MarginAxis::OverSecond => (margins.at, f64::NAN),
        };
        return Err(Error::NotADensity {
            reason: format!("margin integral deviates from 1 by {:.3e}", margins.max_deviation),
            x,
            y,
            value: margins.max_deviation,
        });
    }
    Ok(())
}

/// Build the copula with density `m1..m4` for the given profiles.
pub fn make_m_copula(spec: &MDensitySpec) -> Result<CopulaModel> {
    let constants = spec.constants();
    let form = Bilinear::for_variant(spec.variant, &constants);
    if !(form.denom.is_finite() && form.denom > 0.0) {
        return Err(Error::NotADensity {
            reason: format!("normalizing constant {} is not positive", form.denom),
            x: f64::NAN,
            y: f64::NAN,
            value: form.denom,
        });
    }
    let mc = Arc::new(MCopula {
        spec: spec.clone(),
        form,
    });
    let dens = Arc::clone(&mc);
    let density: DensityFn = Arc::new(move |x, y| dens.density_value(x, y));
    check_density(&*density, 1e-6)?;
    Ok(CopulaModel::DensityBacked(Arc::new(DensityBacked {
        label: mc.label(),
        density,
        integrals: Some(mc),
        grid: OnceLock::new(),
    })))
}
