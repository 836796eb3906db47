//! Concordance and tail-dependence coefficients of copulas.
//!
//! Spearman's ρ, Blomqvist's β and Gini's γ are linear in the copula, so
//! mixtures are evaluated leaf by leaf with closed values for `Π`, `M` and
//! `W`. Kendall's τ is quadratic: `τ(Σ wᵢCᵢ) = Σᵢⱼ wᵢwⱼ Q(Cᵢ, Cⱼ)` with the
//! concordance function `Q`. Gini's γ follows the unnormalized convention
//! `4∫ C(u,u) + C(u,1-u) du` (so `γ(Π) = 2`, `γ(M) = 3`).

use std::fmt;

use crate::copula::{CopulaModel, GridCopula};
use crate::perturbations::{hat, tilde};
use crate::quad::{simpson, simpson_2d};

pub const SPEARMAN_GRID: usize = 256;
pub const KENDALL_GRID: usize = 256;
pub const GINI_GRID: usize = 512;
/// Dyadic exponents of the tail ratio scan.
pub const TAIL_LEVELS: std::ops::RangeInclusive<i32> = 6..=14;
/// Successive tail ratios further apart than this are reported as
/// non-convergent.
pub const TAIL_JUMP: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    SpearmanRho,
    KendallTau,
    BlomqvistBeta,
    GiniGamma,
    LambdaL,
    LambdaU,
}

impl Coefficient {
    pub const ALL: [Coefficient; 6] = [
        Coefficient::SpearmanRho,
        Coefficient::KendallTau,
        Coefficient::BlomqvistBeta,
        Coefficient::GiniGamma,
        Coefficient::LambdaL,
        Coefficient::LambdaU,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Coefficient::SpearmanRho => "spearman_rho",
            Coefficient::KendallTau => "kendall_tau",
            Coefficient::BlomqvistBeta => "blomqvist_beta",
            Coefficient::GiniGamma => "gini_gamma",
            Coefficient::LambdaL => "lambda_l",
            Coefficient::LambdaU => "lambda_u",
        }
    }

    /// Admissible values.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Coefficient::GiniGamma => (0.0, 4.0),
            Coefficient::LambdaL | Coefficient::LambdaU => (0.0, 1.0),
            _ => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Quadrature,
    Extrapolation,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::Extrapolation => "extrapolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientReport {
    pub name: Coefficient,
    pub value: f64,
    pub method: Method,
    pub grid: usize,
    pub tol: f64,
    /// False when a tail scan did not settle.
    pub converged: bool,
}

impl CoefficientReport {
    pub fn in_range(&self) -> bool {
        let (lo, hi) = self.name.range();
        self.value >= lo - 1e-6 && self.value <= hi + 1e-6
    }
}

enum Leaf {
    Pi,
    M,
    W,
    Other,
}

fn leaf(c: &CopulaModel) -> Leaf {
    match c {
        CopulaModel::Pi => Leaf::Pi,
        CopulaModel::FrechetM => Leaf::M,
        CopulaModel::FrechetW => Leaf::W,
        _ => Leaf::Other,
    }
}

fn all_closed(c: &CopulaModel) -> bool {
    c.decompose().iter().all(|(_, l)| !matches!(leaf(l), Leaf::Other))
}

/// `∫∫ C` exactly for checkerboards (trapezoid on the nodes is exact for the
/// bilinear interpolant).
fn grid_cdf_integral(g: &GridCopula) -> f64 {
    let n = g.n();
    let h = 1.0 / n as f64;
    let wt = |k: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
    let mut acc = 0.0;
    for i in 0..=n {
        let mut row = 0.0;
        for j in 0..=n {
            row += wt(j) * g.node_cdf(i, j);
        }
        acc += wt(i) * row;
    }
    acc * h * h
}

fn spearman_leaf(c: &CopulaModel) -> f64 {
    match leaf(c) {
        Leaf::Pi => 0.0,
        Leaf::M => 1.0,
        Leaf::W => -1.0,
        Leaf::Other => match c {
            CopulaModel::Grid(g) => 12.0 * grid_cdf_integral(g) - 3.0,
            _ => 12.0 * simpson_2d(|u, v| c.cdf(u, v), SPEARMAN_GRID) - 3.0,
        },
    }
}

/// `12 ∫∫ C - 3`.
pub fn spearman_rho(c: &CopulaModel) -> f64 {
    c.decompose().iter().map(|(w, l)| w * spearman_leaf(l)).sum()
}

/// Concordance function `Q(A, B) = 4 ∫∫ B dA - 1`.
pub fn concordance(a: &CopulaModel, b: &CopulaModel) -> f64 {
    match (leaf(a), leaf(b)) {
        (Leaf::M, _) => 4.0 * simpson(|t| b.cdf(t, t), 0.0, 1.0, GINI_GRID) - 1.0,
        (_, Leaf::M) => 4.0 * simpson(|t| a.cdf(t, t), 0.0, 1.0, GINI_GRID) - 1.0,
        (Leaf::W, _) => 4.0 * simpson(|t| b.cdf(t, 1.0 - t), 0.0, 1.0, GINI_GRID) - 1.0,
        (_, Leaf::W) => 4.0 * simpson(|t| a.cdf(t, 1.0 - t), 0.0, 1.0, GINI_GRID) - 1.0,
        _ => {
            let s = simpson_2d(|u, v| a.cond_cdf(u, v) * b.partial_v(u, v), KENDALL_GRID);
            // symmetrize: Q is symmetric, the quadrature is not exactly
            let t = simpson_2d(|u, v| b.cond_cdf(u, v) * a.partial_v(u, v), KENDALL_GRID);
            1.0 - 2.0 * (s + t)
        }
    }
}

/// `1 - 4 ∫∫ ∂₁C ∂₂C`, summed over mixture pairs.
pub fn kendall_tau(c: &CopulaModel) -> f64 {
    let parts = c.decompose();
    let mut tau = 0.0;
    for i in 0..parts.len() {
        for j in i..parts.len() {
            let q = concordance(&parts[i].1, &parts[j].1);
            let mult = if i == j { 1.0 } else { 2.0 };
            tau += mult * parts[i].0 * parts[j].0 * q;
        }
    }
    tau
}

/// `4 C(½, ½) - 1`.
pub fn blomqvist_beta(c: &CopulaModel) -> f64 {
    4.0 * c.cdf(0.5, 0.5) - 1.0
}

fn gini_leaf(c: &CopulaModel) -> f64 {
    match leaf(c) {
        Leaf::Pi => 2.0,
        Leaf::M => 3.0,
        Leaf::W => 1.0,
        Leaf::Other => 4.0 * simpson(|u| c.cdf(u, u) + c.cdf(u, 1.0 - u), 0.0, 1.0, GINI_GRID),
    }
}

/// `4 ∫ C(u,u) + C(u,1-u) du`.
pub fn gini_gamma(c: &CopulaModel) -> f64 {
    c.decompose().iter().map(|(w, l)| w * gini_leaf(l)).sum()
}

/// Extrapolated tail limit with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub value: f64,
    /// Ratio at the smallest scanned distance to the corner.
    pub last_ratio: f64,
    /// Largest gap between the last successive ratios.
    pub max_jump: f64,
    pub converged: bool,
    pub method: Method,
}

impl TailEstimate {
    fn closed(value: f64) -> Self {
        TailEstimate {
            value,
            last_ratio: value,
            max_jump: 0.0,
            converged: true,
            method: Method::ClosedForm,
        }
    }
}

/// Richardson extrapolation of ratios taken at halving distances, assuming
/// an expansion in integer powers of the distance.
fn richardson(ratios: &[f64]) -> f64 {
    let mut t = ratios.to_vec();
    let mut pow = 2.0;
    while t.len() > 1 {
        t = t.windows(2).map(|w| (pow * w[1] - w[0]) / (pow - 1.0)).collect();
        pow *= 2.0;
    }
    t[0]
}

fn tail_scan(ratio: impl Fn(f64) -> f64) -> TailEstimate {
    let ratios: Vec<f64> = TAIL_LEVELS.map(|k| ratio(2f64.powi(-k))).collect();
    let last = &ratios[ratios.len() - 4..];
    let max_jump = last.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let value = richardson(last).clamp(0.0, 1.0);
    TailEstimate {
        value,
        last_ratio: *ratios.last().unwrap(),
        max_jump,
        converged: max_jump <= TAIL_JUMP,
        method: Method::Extrapolation,
    }
}

fn combine(parts: Vec<(f64, TailEstimate)>) -> TailEstimate {
    let mut out = TailEstimate::closed(0.0);
    for (w, t) in parts {
        out.value += w * t.value;
        out.last_ratio += w * t.last_ratio;
        out.max_jump = out.max_jump.max(t.max_jump);
        out.converged &= t.converged;
        if t.method == Method::Extrapolation {
            out.method = Method::Extrapolation;
        }
    }
    out.value = out.value.clamp(0.0, 1.0);
    out
}

/// `lim_{u→0} C(u,u)/u`.
pub fn tail_lower(c: &CopulaModel) -> TailEstimate {
    let parts = c
        .decompose()
        .into_iter()
        .map(|(w, l)| {
            let t = match leaf(&l) {
                Leaf::Pi | Leaf::W => TailEstimate::closed(0.0),
                Leaf::M => TailEstimate::closed(1.0),
                Leaf::Other => tail_scan(|u| l.cdf(u, u) / u),
            };
            (w, t)
        })
        .collect();
    combine(parts)
}

/// `lim_{u→1} (1 - 2u + C(u,u)) / (1 - u)`.
pub fn tail_upper(c: &CopulaModel) -> TailEstimate {
    let parts = c
        .decompose()
        .into_iter()
        .map(|(w, l)| {
            let t = match leaf(&l) {
                Leaf::Pi | Leaf::W => TailEstimate::closed(0.0),
                Leaf::M => TailEstimate::closed(1.0),
                Leaf::Other => tail_scan(|e| {
                    let u = 1.0 - e;
                    (1.0 - 2.0 * u + l.cdf(u, u)) / e
                }),
            };
            (w, t)
        })
        .collect();
    combine(parts)
}

/// All six coefficients of a model.
pub fn coefficients(c: &CopulaModel) -> Vec<CoefficientReport> {
    let closed = all_closed(c);
    let quad = if closed { Method::ClosedForm } else { Method::Quadrature };
    let report = |name, value, method, grid, tol, converged| CoefficientReport {
        name,
        value,
        method,
        grid,
        tol,
        converged,
    };
    let lower = tail_lower(c);
    let upper = tail_upper(c);
    vec![
        report(Coefficient::SpearmanRho, spearman_rho(c), quad, SPEARMAN_GRID, 1e-5, true),
        report(Coefficient::KendallTau, kendall_tau(c), quad, KENDALL_GRID, 1e-4, true),
        report(Coefficient::BlomqvistBeta, blomqvist_beta(c), Method::ClosedForm, 1, 1e-12, true),
        report(Coefficient::GiniGamma, gini_gamma(c), quad, GINI_GRID, 1e-6, true),
        report(Coefficient::LambdaL, lower.value, lower.method, 1 << TAIL_LEVELS.end(), TAIL_JUMP, lower.converged),
        report(Coefficient::LambdaU, upper.value, upper.method, 1 << TAIL_LEVELS.end(), TAIL_JUMP, upper.converged),
    ]
}

/// One perturbation identity: computed vs predicted coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub coefficient: Coefficient,
    /// `"tilde"` or `"hat"`.
    pub perturbation: &'static str,
    pub computed: f64,
    pub predicted: f64,
}

impl IdentityCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.computed - self.predicted).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationIdentities {
    pub theta: f64,
    pub checks: Vec<IdentityCheck>,
}

impl PerturbationIdentities {
    pub fn max_discrepancy(&self) -> f64 {
        self.checks.iter().map(IdentityCheck::discrepancy).fold(0.0, f64::max)
    }
}

/// Compare ρ_S, γ, β, λ_U, λ_L of `(1-θ)C + θΠ` and `(1-θ)C + θM` with
/// their affine predictions from the coefficients of `C`.
pub fn perturbation_identities(c: &CopulaModel, theta: f64) -> crate::Result<PerturbationIdentities> {
    let t = tilde(c, theta)?;
    let h = hat(c, theta)?;
    type Eval = fn(&CopulaModel) -> f64;
    let table: [(Coefficient, Eval, f64, f64); 5] = [
        (Coefficient::SpearmanRho, spearman_rho, 0.0, 1.0),
        (Coefficient::GiniGamma, gini_gamma, 2.0, 3.0),
        (Coefficient::BlomqvistBeta, blomqvist_beta, 0.0, 1.0),
        (Coefficient::LambdaU, |m| tail_upper(m).value, 0.0, 1.0),
        (Coefficient::LambdaL, |m| tail_lower(m).value, 0.0, 1.0),
    ];
    let mut checks = Vec::new();
    for (name, eval, at_pi, at_m) in table {
        let base = eval(c);
        checks.push(IdentityCheck {
            coefficient: name,
            perturbation: "tilde",
            computed: eval(&t),
            predicted: (1.0 - theta) * base + theta * at_pi,
        });
        checks.push(IdentityCheck {
            coefficient: name,
            perturbation: "hat",
            computed: eval(&h),
            predicted: (1.0 - theta) * base + theta * at_m,
        });
    }
    Ok(PerturbationIdentities { theta, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_values() {
        for (c, rho, gamma, beta) in [
            (CopulaModel::Pi, 0.0, 2.0, 0.0),
            (CopulaModel::FrechetM, 1.0, 3.0, 1.0),
            (CopulaModel::FrechetW, -1.0, 1.0, -1.0),
        ] {
            assert_eq!(spearman_rho(&c), rho);
            assert_eq!(gini_gamma(&c), gamma);
            assert_eq!(blomqvist_beta(&c), beta);
        }
        assert!((kendall_tau(&CopulaModel::FrechetM) - 1.0).abs() < 1e-12);
        assert!((kendall_tau(&CopulaModel::FrechetW) + 1.0).abs() < 1e-12);
        assert!(kendall_tau(&CopulaModel::Pi).abs() < 1e-12);
    }

    #[test]
    fn gini_quadrature_agrees_with_closed_leaves() {
        // the quadrature path, forced through closures
        let m = CopulaModel::from_cdf_fn("min", |u, v| u.min(v));
        let w = CopulaModel::from_cdf_fn("w", |u, v| (u + v - 1.0).max(0.0));
        let p = CopulaModel::from_cdf_fn("uv", |u, v| u * v);
        assert!((gini_gamma(&m) - 3.0).abs() < 1e-12);
        assert!((gini_gamma(&w) - 1.0).abs() < 1e-12);
        assert!((gini_gamma(&p) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fgm_values() {
        let f = CopulaModel::fgm(0.9).unwrap();
        assert!((spearman_rho(&f) - 0.3).abs() < 1e-10);
        assert!((kendall_tau(&f) - 0.2).abs() < 1e-10);
        assert!((blomqvist_beta(&CopulaModel::fgm(0.8).unwrap()) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn kendall_of_mixture_with_m() {
        // τ((1-a)Π + aM) = Q-expansion: a²·1 + 2a(1-a)·Q(M,Π) with Q(M,Π) = 1/3
        let a: f64 = 0.4;
        let c = CopulaModel::mixture(vec![(1.0 - a, CopulaModel::Pi), (a, CopulaModel::FrechetM)]).unwrap();
        let expected = a * a + 2.0 * a * (1.0 - a) / 3.0;
        assert!((kendall_tau(&c) - expected).abs() < 1e-10);
    }

    #[test]
    fn tails() {
        let m = tail_lower(&CopulaModel::FrechetM);
        assert_eq!(m.value, 1.0);
        let f = CopulaModel::frank(3.0).unwrap();
        let (l, u) = (tail_lower(&f), tail_upper(&f));
        assert!(l.value < 1e-3 && u.value < 1e-3 && l.converged && u.converged);
        let h = hat(&f, 0.3).unwrap();
        assert!((tail_lower(&h).value - 0.3).abs() < 1e-3);
    }

    #[test]
    fn richardson_removes_polynomial_terms() {
        let r: Vec<f64> = (0..4).map(|k| 0.25 + 0.3 * 2f64.powi(-k) - 0.7 * 4f64.powi(-k)).collect();
        assert!((richardson(&r) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn identities_at_zero_are_exact() {
        let f = CopulaModel::frank(3.0).unwrap();
        let r = perturbation_identities(&f, 0.0).unwrap();
        assert_eq!(r.max_discrepancy(), 0.0);
    }
}
