//! Copulas of noise-perturbed pairs: `(X + Z, Y)`, `(X + Z, Y + Z)` and
//! `(X + Z₁, Y + Z₂)` with noise independent of `(X, Y)`.
//!
//! The general forms integrate over the noise quantile `t ∈ [0, 1]`:
//!
//! ```text
//! C5(u, v) = ∫ C(F1(F4⁻¹(u) - F3⁻¹(t)), v) dt
//! C6(u, v) = ∫ C(F1(F4⁻¹(u) - F3⁻¹(t)), F2(F5⁻¹(v) - F3⁻¹(t))) dt
//! C7(u, v) = ∫∫ C(F1(F7⁻¹(u) - G1⁻¹(t1)), F2(F8⁻¹(v) - G2⁻¹(t2))) dt2 dt1
//! ```
//!
//! where `F4, F5, F7, F8` are the convolved marginals. Quantiles at `0`/`1`
//! map to the support endpoints, so the integrands take the copula's
//! boundary values there.

mod marginal;

pub use marginal::{irwin_hall2_cdf, irwin_hall2_inv, ConvolvedMarginal, MarginalModel};

use crate::copula::{CopulaFn, CopulaModel};
use crate::dependence::{tail_lower, tail_upper, TailEstimate};
use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

const PANELS: usize = 16;
const TOL_1D: f64 = 1e-11;
const PANELS_2D: usize = 8;
const TOL_INNER: f64 = 1e-10;
const TOL_OUTER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// `(X + Z, Y)`
    C5,
    /// `(X + Z, Y + Z)`
    C6,
    /// `(X + Z₁, Y + Z₂)`
    C7,
}

/// A noise-perturbed copula evaluated by quadrature.
#[derive(Debug, Clone)]
pub struct NoiseCopula {
    kind: NoiseKind,
    base: CopulaModel,
    f1: MarginalModel,
    f2: MarginalModel,
    /// `X + noise` and `Y + noise`
    first: ConvolvedMarginal,
    second: ConvolvedMarginal,
}

impl NoiseCopula {
    fn build(
        kind: NoiseKind,
        base: &CopulaModel,
        f1: MarginalModel,
        f2: MarginalModel,
        g1: MarginalModel,
        g2: MarginalModel,
    ) -> Result<Self> {
        let nc = NoiseCopula {
            kind,
            base: base.clone(),
            first: ConvolvedMarginal::new(f1.clone(), g1),
            second: ConvolvedMarginal::new(f2.clone(), g2),
            f1,
            f2,
        };
        // surface inversion problems at construction
        for q in [1e-9, 0.5, 1.0 - 1e-9] {
            nc.first.inv_cdf(q)?;
            if kind != NoiseKind::C5 {
                nc.second.inv_cdf(q)?;
            }
        }
        Ok(nc)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// The copula value, or `MarginalMismatch` if a quantile of a convolved
    /// marginal cannot be found.
    pub fn try_cdf(&self, u: f64, v: f64) -> Result<f64> {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        let x = self.first.inv_cdf(u)?;
        let z1 = &self.first.noise;
        let value = match self.kind {
            NoiseKind::C5 => {
                let f = |t: f64| self.base.cdf(self.f1.cdf(x - z1.inv_cdf(t)), v);
                adaptive_simpson(&f, 0.0, 1.0, PANELS, TOL_1D)
            }
            NoiseKind::C6 => {
                let y = self.second.inv_cdf(v)?;
                let f = |t: f64| {
                    let z = z1.inv_cdf(t);
                    self.base.cdf(self.f1.cdf(x - z), self.f2.cdf(y - z))
                };
                adaptive_simpson(&f, 0.0, 1.0, PANELS, TOL_1D)
            }
            NoiseKind::C7 => {
                let y = self.second.inv_cdf(v)?;
                let z2 = &self.second.noise;
                let outer = |t1: f64| {
                    let a = self.f1.cdf(x - z1.inv_cdf(t1));
                    if a == 0.0 {
                        return 0.0;
                    }
                    let inner = |t2: f64| self.base.cdf(a, self.f2.cdf(y - z2.inv_cdf(t2)));
                    adaptive_simpson(&inner, 0.0, 1.0, PANELS_2D, TOL_INNER)
                };
                adaptive_simpson(&outer, 0.0, 1.0, PANELS_2D, TOL_OUTER)
            }
        };
        Ok(value.clamp(0.0, u.min(v)))
    }

    pub fn into_model(self) -> CopulaModel {
        CopulaModel::transformed(self)
    }
}

impl CopulaFn for NoiseCopula {
    fn label(&self) -> String {
        let name = match self.kind {
            NoiseKind::C5 => "C5",
            NoiseKind::C6 => "C6",
            NoiseKind::C7 => "C7",
        };
        format!(
            "{name}({}; {}, {}; {}, {})",
            self.base.label(),
            self.f1,
            self.f2,
            self.first.noise,
            self.second.noise
        )
    }

    fn cdf(&self, u: f64, v: f64) -> f64 {
        self.try_cdf(u, v).unwrap_or(f64::NAN)
    }

    fn has_singular_part(&self) -> bool {
        self.kind == NoiseKind::C6 && self.base.has_singular_part()
    }
}

/// Copula of `(X + Z, Y)`.
pub fn c5_general(
    c: &CopulaModel,
    f1: &MarginalModel,
    f2: &MarginalModel,
    f3: &MarginalModel,
) -> Result<NoiseCopula> {
    NoiseCopula::build(NoiseKind::C5, c, f1.clone(), f2.clone(), f3.clone(), f3.clone())
}

/// Copula of `(X + Z, Y + Z)`.
pub fn c6_general(
    c: &CopulaModel,
    f1: &MarginalModel,
    f2: &MarginalModel,
    f3: &MarginalModel,
) -> Result<NoiseCopula> {
    NoiseCopula::build(NoiseKind::C6, c, f1.clone(), f2.clone(), f3.clone(), f3.clone())
}

/// Copula of `(X + Z₁, Y + Z₂)` with independent `Z₁ ~ G1`, `Z₂ ~ G2`.
pub fn c7_general(
    c: &CopulaModel,
    f1: &MarginalModel,
    f2: &MarginalModel,
    g1: &MarginalModel,
    g2: &MarginalModel,
) -> Result<NoiseCopula> {
    NoiseCopula::build(NoiseKind::C7, c, f1.clone(), f2.clone(), g1.clone(), g2.clone())
}

/// `(X + Z, X)` for `X, Z ~ U(0, 1)` independent (i.e. `C = M`), in closed form.
pub fn c5_closed_m_uniform(u: f64, v: f64) -> f64 {
    let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
    let b = (2.0 * u).sqrt();
    let a = 1.0 - (2.0 * (1.0 - u)).sqrt();
    if b <= 1.0 {
        if b <= v {
            u
        } else {
            v * b - 0.5 * v * v
        }
    } else if a <= v {
        v - 0.5 * (1.0 - v - (2.0 * (1.0 - u)).sqrt()).powi(2)
    } else {
        v
    }
}

/// `P(X + Z <= x, Y + Z <= y)` for independent `U(0, 1)` variables.
fn c6_joint_x(x: f64, y: f64) -> f64 {
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    if x <= 0.0 {
        return 0.0;
    }
    if y >= 2.0 {
        return irwin_hall2_cdf(x);
    }
    if y < 1.0 {
        0.5 * x * x * y - x.powi(3) / 6.0
    } else if x < 1.0 && y <= 1.0 + x {
        0.5 * x * x - (x - y + 1.0).powi(3) / 6.0
    } else if x < 1.0 {
        0.5 * x * x
    } else {
        1.0 - 0.5 * (2.0 - x).powi(2) - (2.0 - y).powi(2) * (2.0 - y + 3.0 * x - 3.0) / 6.0
    }
}

/// `(X + Z, Y + Z)` for independent `U(0, 1)` variables, from the
/// closed joint CDF in `(x, y)` with `x = F4⁻¹(u)`, `y = F4⁻¹(v)`.
pub fn c6_closed_indep_uniform(u: f64, v: f64) -> f64 {
    let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    c6_joint_x(irwin_hall2_inv(u), irwin_hall2_inv(v)).clamp(0.0, u.min(v))
}

/// Regions of the published `(u, v)`-space table for the independent
/// uniform case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableRegion {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

/// The `(u, v)`-space table for the independent uniform case, transcribed
/// as published. It disagrees with [`c6_closed_indep_uniform`] (and with
/// quadrature); see [`compare_c6_table`].
pub fn c6_published_table(u: f64, v: f64) -> (f64, TableRegion) {
    let s2 = |t: f64| (2.0 * t).sqrt();
    let cut_u = 1.0 - 0.5 * (s2(u) - 1.0).powi(2);
    let cut_v = 1.0 - 0.5 * (s2(v) - 1.0).powi(2);
    if u <= v && v <= 0.5 {
        (0.5 * u * s2(v), TableRegion::A)
    } else if v <= u && u <= 0.5 {
        (0.5 * v * s2(u), TableRegion::H)
    } else if u <= 0.5 && v > 0.5 && v <= cut_u {
        (u - (s2(u) + s2(1.0 - v) - 1.0).powi(3) / 6.0, TableRegion::B)
    } else if u <= 0.5 && v > cut_u {
        (u, TableRegion::C)
    } else if v <= 0.5 && u > 0.5 && u <= cut_v {
        (v - (s2(v) + s2(1.0 - u) - 1.0).powi(3) / 6.0, TableRegion::F)
    } else if v <= 0.5 && u > cut_v {
        (v, TableRegion::G)
    } else if u <= v {
        (
            u - (1.0 - v) * (s2(1.0 - v) + 3.0 - 3.0 * s2(1.0 - u)) / 3.0,
            TableRegion::D,
        )
    } else {
        (
            v - (1.0 - u) * (s2(1.0 - u) + 3.0 - 3.0 * s2(1.0 - u)) / 3.0,
            TableRegion::E,
        )
    }
}

/// Disagreement between the published table and the closed form derived
/// in `(x, y)` space.
#[derive(Debug, Clone, PartialEq)]
pub struct TableComparison {
    pub grid: usize,
    pub max_abs_diff: f64,
    pub at: (f64, f64),
    /// Largest disagreement per table region, in region order.
    pub per_region: Vec<(TableRegion, f64)>,
}

/// Compare the two forms on the interior nodes of an `n x n` grid.
pub fn compare_c6_table(n: usize) -> TableComparison {
    let mut per = std::collections::BTreeMap::new();
    let mut worst = (0.0, (0.0, 0.0));
    for i in 1..n {
        for j in 1..n {
            let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
            let (t, region) = c6_published_table(u, v);
            let d = (t - c6_closed_indep_uniform(u, v)).abs();
            let e = per.entry(region).or_insert(0.0f64);
            *e = e.max(d);
            if d > worst.0 {
                worst = (d, (u, v));
            }
        }
    }
    TableComparison {
        grid: n,
        max_abs_diff: worst.0,
        at: worst.1,
        per_region: per.into_iter().collect(),
    }
}

fn a_lo(t: f64) -> f64 {
    1.0 - (2.0 * (1.0 - t)).sqrt()
}

fn b_hi(t: f64) -> f64 {
    (2.0 * t).sqrt()
}

/// `(X + Z₁, Y + Z₂)` with all four marginals `U(0, 1)`, evaluated region
/// by region: the integrals over the stated rectangles plus the closed
/// terms `u a(v)`, `v a(u)`, `-a(u) a(v)`.
pub fn c7_uniform_regions(c: &CopulaModel, u: f64, v: f64) -> f64 {
    let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    // For each axis: integration range of t and the shift s with argument s - t.
    let axis = |w: f64| -> (f64, f64, f64, f64) {
        if w <= 0.5 {
            // (lo, hi, shift, a(w) contribution factor)
            (0.0, b_hi(w), b_hi(w), 0.0)
        } else {
            let a = a_lo(w);
            (a, 1.0, 1.0 + a, a)
        }
    };
    let (lo1, hi1, s1, au) = axis(u);
    let (lo2, hi2, s2, av) = axis(v);
    let outer = |t1: f64| {
        let inner = |t2: f64| c.cdf(s1 - t1, s2 - t2);
        adaptive_simpson(&inner, lo2, hi2, PANELS_2D, TOL_INNER)
    };
    let integral = adaptive_simpson(&outer, lo1, hi1, PANELS_2D, TOL_OUTER);
    integral + u * av + v * au - au * av
}

/// Tail coefficients of a closed-form noise copula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedNoise {
    C5MUniform,
    C6IndepUniform,
}

#[derive(Debug)]
struct ClosedNoiseFn(ClosedNoise);

impl CopulaFn for ClosedNoiseFn {
    fn label(&self) -> String {
        match self.0 {
            ClosedNoise::C5MUniform => "C5(M; uniform)".into(),
            ClosedNoise::C6IndepUniform => "C6(Pi; uniform)".into(),
        }
    }

    fn cdf(&self, u: f64, v: f64) -> f64 {
        match self.0 {
            ClosedNoise::C5MUniform => c5_closed_m_uniform(u, v),
            ClosedNoise::C6IndepUniform => c6_closed_indep_uniform(u, v),
        }
    }
}

impl ClosedNoise {
    pub fn model(self) -> CopulaModel {
        CopulaModel::transformed(ClosedNoiseFn(self))
    }
}

/// `(λ_L, λ_U)` of a closed-form noise copula.
pub fn tail_coeffs_of_noise(which: ClosedNoise) -> (TailEstimate, TailEstimate) {
    let m = which.model();
    (tail_lower(&m), tail_upper(&m))
}

/// Parse `--noise` values: `c5`, `c6`, `c7`.
pub fn parse_noise_kind(s: &str) -> Result<NoiseKind> {
    match s.trim().to_ascii_lowercase().as_str() {
        "c5" => Ok(NoiseKind::C5),
        "c6" => Ok(NoiseKind::C6),
        "c7" => Ok(NoiseKind::C7),
        other => Err(Error::spec("noise", format!("unknown noise model `{other}` (c5, c6, c7)"))),
    }
}
