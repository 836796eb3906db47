//! Fold (Markov) products of copulas and their powers.
//!
//! `A*B(x, y) = ∫ ∂₂A(x, t) ∂₁B(t, y) dt`. The integral is evaluated on a
//! sub-grid of `REFINE * n` intervals in `t` as
//! `Σ_k ΔA(x, t_k) ΔB(t_k, y) / Δt`, i.e. every kernel is replaced by its
//! cell average. For checkerboard operands whose grid divides the sub-grid
//! this is exact; for smooth operands it is second order in `Δt`.
//!
//! `M` (the identity), `Π` (the annihilator) and `W` are folded
//! algebraically; atoms never meet the quadrature.

use statrs::function::gamma::ln_gamma;

use crate::copula::{pi_nodes, CopulaModel, GridCopula};
use crate::error::{Error, Result};
use crate::par;

/// Quadrature sub-intervals per output cell.
const REFINE: usize = 4;
/// Smallest accepted output resolution.
pub const MIN_GRID: usize = 16;
/// Default resolution for single folds.
pub const DEFAULT_GRID: usize = 256;
/// Sup-norm tolerance of the commutation check.
pub const COMMUTE_TOL: f64 = 1e-5;

/// Resolution used for `n`-fold chains: coarser for long chains.
pub fn default_grid(n: usize) -> usize {
    if n > 4 {
        128
    } else {
        DEFAULT_GRID
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub grid: GridCopula,
    pub operands: (String, String),
    pub n: usize,
}

impl FoldResult {
    pub fn model(&self) -> CopulaModel {
        CopulaModel::grid(self.grid.clone())
    }
}

enum Leaf {
    /// Continuous copula to be sampled/folded numerically.
    Ac(CopulaModel),
    M,
}

/// Algebraic fold of two leaves; `None` when quadrature is needed.
fn fold_leaves(a: &CopulaModel, b: &CopulaModel) -> Result<Option<Leaf>> {
    use CopulaModel::*;
    Ok(Some(match (a, b) {
        (FrechetM, FrechetM) => Leaf::M,
        (FrechetM, other) | (other, FrechetM) => match other {
            FrechetW => return Err(w_atom()),
            _ => Leaf::Ac(other.clone()),
        },
        (Pi, _) | (_, Pi) => Leaf::Ac(Pi),
        (FrechetW, FrechetW) => Leaf::M,
        (FrechetW, c) => {
            let c = c.clone();
            Leaf::Ac(CopulaModel::from_cdf_fn(format!("W*{}", c.label()), move |u, v| {
                v - c.cdf(1.0 - u, v)
            }))
        }
        (c, FrechetW) => {
            let c = c.clone();
            Leaf::Ac(CopulaModel::from_cdf_fn(format!("{}*W", c.label()), move |u, v| {
                u - c.cdf(u, 1.0 - v)
            }))
        }
        _ => return Ok(None),
    }))
}

fn w_atom() -> Error {
    Error::InvalidParameter("fold would carry anti-diagonal mass, which a grid cannot hold".into())
}

/// Node CDF values of a continuous model on the `n` grid (row-major).
fn sample_nodes(model: &CopulaModel, n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    if let CopulaModel::Grid(g) = model {
        if g.n() == n && g.singular_m_mass() == 0.0 {
            return g.cdf_nodes().to_vec();
        }
    }
    par::map_range(n + 1, |i| {
        let x = i as f64 * h;
        (0..=n).map(|j| model.cdf(x, j as f64 * h)).collect::<Vec<f64>>()
    })
    .concat()
}

/// Numeric fold of two continuous copulas, node values on the `n` grid.
fn fold_numeric(a: &CopulaModel, b: &CopulaModel, n: usize) -> Vec<f64> {
    let m = REFINE * n;
    let h = 1.0 / n as f64;
    let ht = 1.0 / m as f64;
    // dB[k][j] = B(t_{k+1}, y_j) - B(t_k, y_j)
    let b_rows = par::map_range(m + 1, |k| {
        let t = k as f64 * ht;
        (0..=n).map(|j| b.cdf(t, j as f64 * h)).collect::<Vec<f64>>()
    });
    let db: Vec<Vec<f64>> = (0..m)
        .map(|k| b_rows[k + 1].iter().zip(&b_rows[k]).map(|(p, q)| p - q).collect())
        .collect();
    let rows = par::map_range(n + 1, |i| {
        let x = i as f64 * h;
        let a_row: Vec<f64> = (0..=m).map(|k| a.cdf(x, k as f64 * ht)).collect();
        let mut out = vec![0.0; n + 1];
        for k in 0..m {
            let da = a_row[k + 1] - a_row[k];
            if da == 0.0 {
                continue;
            }
            for (o, d) in out.iter_mut().zip(&db[k]) {
                *o += da * d;
            }
        }
        for o in out.iter_mut() {
            *o *= m as f64;
        }
        out
    });
    rows.concat()
}

fn pin_boundary(nodes: &mut [f64], n: usize) {
    let w = n + 1;
    let h = 1.0 / n as f64;
    for k in 0..w {
        let t = k as f64 * h;
        nodes[k] = 0.0;
        nodes[k * w] = 0.0;
        nodes[n * w + k] = t;
        nodes[k * w + n] = t;
    }
}

/// `A * B` on an `n_grid x n_grid` node grid.
pub fn fold(a: &CopulaModel, b: &CopulaModel, n_grid: usize) -> Result<FoldResult> {
    if n_grid < MIN_GRID {
        return Err(Error::ResolutionTooLow {
            n: n_grid,
            min: MIN_GRID,
        });
    }
    let grid = fold_grid(a, b, n_grid)?;
    Ok(FoldResult {
        grid,
        operands: (a.label(), b.label()),
        n: 2,
    })
}

fn fold_grid(a: &CopulaModel, b: &CopulaModel, n: usize) -> Result<GridCopula> {
    let w = n + 1;
    let mut nodes = vec![0.0; w * w];
    let mut s = 0.0;
    for (wa, la) in a.decompose() {
        for (wb, lb) in b.decompose() {
            let weight = wa * wb;
            if weight == 0.0 {
                continue;
            }
            let part = match fold_leaves(&la, &lb)? {
                Some(Leaf::M) => {
                    s += weight;
                    continue;
                }
                Some(Leaf::Ac(c)) => sample_nodes(&c, n),
                None => fold_numeric(&la, &lb, n),
            };
            for (acc, x) in nodes.iter_mut().zip(&part) {
                *acc += weight * x;
            }
        }
    }
    if s >= 1.0 - 1e-15 {
        return GridCopula::from_cdf_nodes(n, pi_nodes(n), 1.0);
    }
    for x in nodes.iter_mut() {
        *x /= 1.0 - s;
    }
    pin_boundary(&mut nodes, n);
    GridCopula::from_cdf_nodes(n, nodes, s)
}

/// `Cⁿ = Cⁿ⁻¹ * C`; `C¹` is `C` sampled on the grid, `C²` folds the
/// model with itself.
pub fn n_fold(c: &CopulaModel, n: usize, n_grid: usize) -> Result<FoldResult> {
    if n_grid < MIN_GRID {
        return Err(Error::ResolutionTooLow {
            n: n_grid,
            min: MIN_GRID,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("fold power must be at least 1".into()));
    }
    let mut grid = if n == 1 {
        GridCopula::sample(c, n_grid)?
    } else {
        fold_grid(c, c, n_grid)?
    };
    for _ in 2..n {
        grid = fold_grid(&CopulaModel::grid(grid), c, n_grid)?;
    }
    Ok(FoldResult {
        grid,
        operands: (c.label(), c.label()),
        n,
    })
}

fn ln_binom(n: usize, k: usize) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `binom(n, k) θ^k (1-θ)^(n-k)` for `k = 0..=n`, in log space.
pub fn binomial_weights(n: usize, theta: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let pos = |e: usize, p: f64| if e == 0 { 0.0 } else { e as f64 * p.ln() };
            if (theta == 0.0 && k > 0) || (theta == 1.0 && k < n) {
                0.0
            } else {
                (ln_binom(n, k) + pos(k, theta) + pos(n - k, 1.0 - theta)).exp()
            }
        })
        .collect()
}

/// `Σ_{i=1}^n binom(n, i) θ^i (1-θ)^(n-i) a_i` with `a[i-1] = a_i`.
pub fn binomial_average(a: &[f64], theta: f64, n: usize) -> Result<f64> {
    if a.len() < n {
        return Err(Error::InvalidParameter(format!(
            "need {n} sequence terms, got {}",
            a.len()
        )));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta {theta} outside [0, 1]")));
    }
    let w = binomial_weights(n, theta);
    Ok((1..=n).map(|i| w[i] * a[i - 1]).sum())
}

/// `Σ_k binom(n, k) θ^k (1-θ)^(n-k) A^k * B^(n-k)` for commuting `A`, `B`.
pub fn binomial_mixture_power(
    a: &CopulaModel,
    b: &CopulaModel,
    theta: f64,
    n: usize,
    n_grid: usize,
) -> Result<GridCopula> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta {theta} outside [0, 1]")));
    }
    if n_grid < MIN_GRID {
        return Err(Error::ResolutionTooLow {
            n: n_grid,
            min: MIN_GRID,
        });
    }
    if a.is_absolutely_continuous() && b.is_absolutely_continuous() {
        let ab = fold_grid(a, b, n_grid)?;
        let ba = fold_grid(b, a, n_grid)?;
        let deviation = ab
            .cdf_nodes()
            .iter()
            .zip(ba.cdf_nodes())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if deviation > COMMUTE_TOL {
            return Err(Error::NonCommuting { deviation });
        }
    }
    // powers[k] = X^k as a model, X^0 = M
    let powers = |c: &CopulaModel| -> Result<Vec<CopulaModel>> {
        let mut out = vec![CopulaModel::FrechetM];
        for k in 1..=n {
            let next = if k == 1 {
                c.clone()
            } else {
                CopulaModel::grid(fold_grid(&out[k - 1], c, n_grid)?)
            };
            out.push(next);
        }
        Ok(out)
    };
    let pa = powers(a)?;
    let pb = powers(b)?;
    let weights = binomial_weights(n, theta);
    let mut terms = Vec::new();
    for k in 0..=n {
        if weights[k] == 0.0 {
            continue;
        }
        terms.push((weights[k], fold_grid(&pa[k], &pb[n - k], n_grid)?));
    }
    let total: f64 = terms.iter().map(|(w, _)| w).sum();
    let refs: Vec<(f64, &GridCopula)> = terms.iter().map(|(w, g)| (w / total, g)).collect();
    GridCopula::mix(&refs)
}

/// `C, C², …, Cⁿ`: the first power keeps the model itself, higher powers
/// are grids (`C² = C * C`, then `Cᵏ = Cᵏ⁻¹ * C`).
pub fn fold_powers(c: &CopulaModel, n: usize, n_grid: usize) -> Result<Vec<CopulaModel>> {
    if n_grid < MIN_GRID {
        return Err(Error::ResolutionTooLow {
            n: n_grid,
            min: MIN_GRID,
        });
    }
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let next = if k == 1 {
            c.clone()
        } else {
            CopulaModel::grid(fold_grid(&out[k - 2], c, n_grid)?)
        };
        out.push(next);
    }
    Ok(out)
}

/// Copula of `(X_0, X_n)` for the chain generated by `(1-θ) C + θ Π`:
/// `(1-θ)ⁿ Cⁿ + (1 - (1-θ)ⁿ) Π`.
pub fn joint_tilde(c: &CopulaModel, theta: f64, n: usize, n_grid: usize) -> Result<CopulaModel> {
    check_theta_n(theta, n)?;
    if theta == 1.0 {
        return Ok(CopulaModel::Pi);
    }
    let powers = fold_powers(c, n, n_grid)?;
    joint_tilde_from_powers(&powers, theta, n)
}

/// [`joint_tilde`] given `powers[k-1] = Cᵏ` for `k = 1..=n`.
pub fn joint_tilde_from_powers(powers: &[CopulaModel], theta: f64, n: usize) -> Result<CopulaModel> {
    check_theta_n(theta, n)?;
    let keep = (1.0 - theta).powi(n as i32);
    if keep == 0.0 {
        return Ok(CopulaModel::Pi);
    }
    CopulaModel::mixture(vec![(keep, powers[n - 1].clone()), (1.0 - keep, CopulaModel::Pi)])
}

/// Copula of `(X_0, X_n)` for the chain generated by `(1-θ) C + θ M`:
/// `θⁿ M + Σ_{i=1}^n binom(n, i) θ^(n-i) (1-θ)^i Cⁱ`.
pub fn joint_hat(c: &CopulaModel, theta: f64, n: usize, n_grid: usize) -> Result<CopulaModel> {
    check_theta_n(theta, n)?;
    if theta == 1.0 {
        return Ok(CopulaModel::FrechetM);
    }
    let powers = fold_powers(c, n, n_grid)?;
    joint_hat_from_powers(&powers, theta, n)
}

/// [`joint_hat`] given `powers[k-1] = Cᵏ` for `k = 1..=n`.
pub fn joint_hat_from_powers(powers: &[CopulaModel], theta: f64, n: usize) -> Result<CopulaModel> {
    check_theta_n(theta, n)?;
    // weights[i] = binom(n, i) (1-θ)^i θ^(n-i)
    let weights = binomial_weights(n, 1.0 - theta);
    let mut parts = vec![(weights[0], CopulaModel::FrechetM)];
    for i in 1..=n {
        parts.push((weights[i], powers[i - 1].clone()));
    }
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    let parts = parts.into_iter().map(|(w, m)| (w / total, m)).collect();
    CopulaModel::mixture(parts)
}

fn check_theta_n(theta: f64, n: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta {theta} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}
