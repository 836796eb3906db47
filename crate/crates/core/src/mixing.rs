//! β, φ and ψ mixing coefficients of the chain generated by a copula, and
//! their decay along perturbed chains.
//!
//! A copula is split as `(1 - s) c + s S` where `S` collects the `M`/`W`
//! atoms. For fixed `x`, the sup over sets `B` of `∫_B (c_n(x, y) - 1) dy`
//! is attained at `{c_n > 1}` plus the atom, so
//!
//! * `β = ∫ [s + ∫ ((1-s)c - 1)⁺ dy] dx`, summed over grid cells;
//! * `φ = sup_x [s + ∫ ((1-s)c(x, ·) - 1)⁺ dy]`, scanned over grid rows;
//! * `ψ = sup |c - 1|`, infinite as soon as there is an atom.

use std::fmt;

use crate::copula::CopulaModel;
use crate::error::{Error, Result};
use crate::par;
use crate::perturbations::{PerturbationKind, PerturbationParams};
use crate::products::{fold_powers, joint_hat_from_powers, joint_tilde_from_powers, MIN_GRID};

pub const DEFAULT_GRID: usize = 256;
/// Nodes per side of the ψ scan, minus one.
pub const PSI_SCAN: usize = 512;
/// Values below this are reported as zero.
pub const FLOOR: f64 = 1e-10;
/// Entries below this end the sequence handed to [`geometric_rate_fit`].
pub const FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingReport {
    pub beta: f64,
    pub phi: f64,
    /// `f64::INFINITY` for copulas with a singular part.
    pub psi: f64,
    pub grid: usize,
}

impl MixingReport {
    pub fn is_ordered(&self, tol: f64) -> bool {
        self.beta <= self.phi + tol && self.phi <= self.psi + tol
    }
}

fn floor(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x < FLOOR {
        0.0
    } else {
        x
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n < MIN_GRID {
        return Err(Error::ResolutionTooLow { n, min: MIN_GRID });
    }
    Ok(())
}

/// Weight on atoms and the weighted continuous leaves (`Π` kept apart,
/// its contribution is known).
struct Split {
    atoms: f64,
    pi: f64,
    ac: Vec<(f64, CopulaModel)>,
}

fn split(model: &CopulaModel) -> Split {
    let mut out = Split {
        atoms: 0.0,
        pi: 0.0,
        ac: Vec::new(),
    };
    for (w, leaf) in model.decompose() {
        match leaf {
            CopulaModel::FrechetM | CopulaModel::FrechetW => out.atoms += w,
            CopulaModel::Pi => out.pi += w,
            other => out.ac.push((w, other)),
        }
    }
    out
}

/// `β` on an `n × n` grid.
pub fn beta_coeff_on(model: &CopulaModel, n: usize) -> Result<f64> {
    check_grid(n)?;
    let sp = split(model);
    let h = 1.0 / n as f64;
    let h2 = h * h;
    // Node CDF of the continuous part, one row per x node.
    let rows = par::map_range(n + 1, |i| {
        let x = i as f64 * h;
        (0..=n)
            .map(|j| {
                let y = j as f64 * h;
                sp.pi * x * y + sp.ac.iter().map(|(w, c)| w * c.cdf(x, y)).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    let per_row = par::map_range(n, |i| {
        let (lo, hi) = (&rows[i], &rows[i + 1]);
        (0..n)
            .map(|j| (hi[j + 1] - hi[j] - lo[j + 1] + lo[j] - h2).max(0.0))
            .sum::<f64>()
    });
    let total = sp.atoms + per_row.iter().sum::<f64>();
    if !total.is_finite() {
        return Err(Error::NoDensity(model.label()));
    }
    Ok(floor(total))
}

pub fn beta_coeff(model: &CopulaModel) -> Result<f64> {
    beta_coeff_on(model, DEFAULT_GRID)
}

/// `φ` scanning `n + 1` rows `x = i / n`.
pub fn phi_coeff_on(model: &CopulaModel, n: usize) -> Result<f64> {
    check_grid(n)?;
    let sp = split(model);
    let h = 1.0 / n as f64;
    let per_row = par::map_range(n + 1, |i| {
        let x = i as f64 * h;
        let kernel = |y: f64| sp.pi * y + sp.ac.iter().map(|(w, c)| w * c.cond_cdf(x, y)).sum::<f64>();
        let mut prev = kernel(0.0);
        let mut acc = 0.0;
        for j in 1..=n {
            let next = kernel(j as f64 * h);
            acc += (next - prev - h).max(0.0);
            prev = next;
        }
        acc
    });
    let mut best = 0.0f64;
    for v in per_row {
        if v.is_nan() {
            return Err(Error::NoDensity(model.label()));
        }
        best = best.max(v);
    }
    Ok(floor(sp.atoms + best))
}

pub fn phi_coeff(model: &CopulaModel) -> Result<f64> {
    phi_coeff_on(model, DEFAULT_GRID)
}

/// `sup |c - 1|` by a node scan followed by local refinement around the
/// largest value. Points where the density is not finite (kinks of
/// piecewise forms) are skipped.
pub fn psi_coeff(model: &CopulaModel) -> Result<f64> {
    if model.has_singular_part() {
        return Ok(f64::INFINITY);
    }
    let dev = |u: f64, v: f64| match model.density(u, v) {
        Ok(d) if d.is_finite() => Some((d - 1.0).abs()),
        _ => None,
    };
    let n = PSI_SCAN;
    let h = 1.0 / n as f64;
    let rows = par::map_range(n + 1, |i| {
        let u = i as f64 * h;
        let mut best: Option<(f64, usize)> = None;
        for j in 0..=n {
            if let Some(d) = dev(u, j as f64 * h) {
                if best.is_none_or(|(b, _)| d > b) {
                    best = Some((d, j));
                }
            }
        }
        best
    });
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, row) in rows.into_iter().enumerate() {
        if let Some((d, j)) = row {
            if best.is_none_or(|(b, _, _)| d > b) {
                best = Some((d, i as f64 * h, j as f64 * h));
            }
        }
    }
    let Some((mut val, mut cu, mut cv)) = best else {
        return Err(Error::NoDensity(model.label()));
    };
    let mut half = h;
    for _ in 0..4 {
        let step = half / 4.0;
        for a in -4..=4 {
            for b in -4..=4 {
                let u = (cu + a as f64 * step).clamp(0.0, 1.0);
                let v = (cv + b as f64 * step).clamp(0.0, 1.0);
                if let Some(d) = dev(u, v) {
                    if d > val {
                        (val, cu, cv) = (d, u, v);
                    }
                }
            }
        }
        half = step;
    }
    Ok(if val < FLOOR { 0.0 } else { val })
}

pub fn mixing_report_on(model: &CopulaModel, n: usize) -> Result<MixingReport> {
    Ok(MixingReport {
        beta: beta_coeff_on(model, n)?,
        phi: phi_coeff_on(model, n)?,
        psi: psi_coeff(model)?,
        grid: n,
    })
}

pub fn mixing_report(model: &CopulaModel) -> Result<MixingReport> {
    mixing_report_on(model, DEFAULT_GRID)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log seq_n = log C + n log r`, `n = 1, 2, …`.
pub fn geometric_rate_fit(seq: &[f64]) -> Result<RateFit> {
    if seq.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 3 terms, got {}",
            seq.len()
        )));
    }
    if let Some((index, &value)) = seq.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive { index, value });
    }
    let m = seq.len() as f64;
    let xs: Vec<f64> = (1..=seq.len()).map(|k| k as f64).collect();
    let ys: Vec<f64> = seq.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot <= 1e-300 {
        if ss_res <= 1e-24 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RateFit {
        rate: slope.exp(),
        intercept: intercept.exp(),
        r_squared,
    })
}

/// Fit on the leading entries above [`FIT_FLOOR`]; `None` if fewer than 3.
pub fn fit_leading(seq: &[f64]) -> Option<RateFit> {
    let len = seq.iter().take_while(|v| **v >= FIT_FLOOR).count();
    geometric_rate_fit(&seq[..len]).ok()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub n: usize,
    pub beta: f64,
    pub phi: f64,
    pub psi: f64,
    /// `NaN` where no identity predicts the value.
    pub predicted_beta: f64,
}

#[derive(Debug, Clone)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    pub perturbation: Option<PerturbationParams>,
    pub grid: usize,
    /// Fit of the β column.
    pub fitted_rate: Option<RateFit>,
}

impl DecayTable {
    pub fn column(&self, f: impl Fn(&DecayRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,beta,phi,psi,predicted_beta")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.n,
                fmt_value(r.beta),
                fmt_value(r.phi),
                fmt_value(r.psi),
                fmt_value(r.predicted_beta)
            )?;
        }
        Ok(())
    }
}

/// `inf`/`-inf`, `nan`, and otherwise the shortest round-trip form,
/// switching to exponent notation for very small or large magnitudes.
pub fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl fmt::Display for DecayTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(
                f,
                "{:>3} {:.6} {:.6} {:>10} {:.6}",
                r.n,
                r.beta,
                r.phi,
                fmt_value(r.psi),
                r.predicted_beta
            )?;
        }
        Ok(())
    }
}

/// Coefficients of `(X_0, X_n)`, `n = 1..=n_max`, for the chain generated by
/// `C` perturbed by `pert` (plain powers of `C` without one).
///
/// For `tilde` the joint copula is `(1-θ)ⁿ Cⁿ + (1-(1-θ)ⁿ) Π` and the
/// prediction is `(1-θ)ⁿ β(Cⁿ)`; for `hat` it is the binomial mixture of
/// `M, C, …, Cⁿ` and the prediction is the bound
/// `θⁿ + Σ_{i≥1} binom(n,i) (1-θ)^i θ^(n-i) β(Cⁱ)`. Powers are folded once
/// and shared between the two columns.
pub fn decay_table(
    c: &CopulaModel,
    pert: Option<PerturbationParams>,
    n_max: usize,
    n_grid: usize,
) -> Result<DecayTable> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    check_grid(n_grid)?;
    let kind = pert.map(|p| p.kind);
    let base = match (kind, pert) {
        (Some(PerturbationKind::Mesiar | PerturbationKind::Dolati), Some(p)) => p.apply(c)?,
        _ => c.clone(),
    };
    let powers = fold_powers(&base, n_max, n_grid)?;
    let needs_base_beta = matches!(kind, Some(PerturbationKind::TildePi | PerturbationKind::HatM));
    let base_beta: Vec<f64> = if needs_base_beta {
        powers.iter().map(|p| beta_coeff_on(p, n_grid)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (joint, predicted) = match pert {
            Some(p) if p.kind == PerturbationKind::TildePi => {
                let keep = (1.0 - p.theta).powi(n as i32);
                (joint_tilde_from_powers(&powers, p.theta, n)?, keep * base_beta[n - 1])
            }
            Some(p) if p.kind == PerturbationKind::HatM => {
                let avg = crate::products::binomial_average(&base_beta, 1.0 - p.theta, n)?;
                (
                    joint_hat_from_powers(&powers, p.theta, n)?,
                    (p.theta.powi(n as i32) + avg).min(1.0),
                )
            }
            _ => (powers[n - 1].clone(), f64::NAN),
        };
        let report = mixing_report_on(&joint, n_grid)?;
        rows.push(DecayRow {
            n,
            beta: report.beta,
            phi: report.phi,
            psi: report.psi,
            predicted_beta: predicted,
        });
    }
    let betas: Vec<f64> = rows.iter().map(|r| r.beta).collect();
    Ok(DecayTable {
        fitted_rate: fit_leading(&betas),
        rows,
        perturbation: pert,
        grid: n_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbations::{hat, tilde};

    fn fgm(t: f64) -> CopulaModel {
        CopulaModel::fgm(t).unwrap()
    }

    #[test]
    fn trivial_copulas() {
        let pi = mixing_report(&CopulaModel::Pi).unwrap();
        assert_eq!((pi.beta, pi.phi, pi.psi), (0.0, 0.0, 0.0));
        let m = mixing_report(&CopulaModel::FrechetM).unwrap();
        assert_eq!((m.beta, m.phi), (1.0, 1.0));
        assert!(m.psi.is_infinite());
        assert_eq!(beta_coeff(&CopulaModel::FrechetW).unwrap(), 1.0);
    }

    #[test]
    fn fgm_coefficients() {
        // θ/8, θ/4, θ
        let r = mixing_report(&fgm(0.8)).unwrap();
        assert!((r.beta - 0.1).abs() < 1e-4, "{r:?}");
        assert!((r.phi - 0.2).abs() < 1e-3, "{r:?}");
        assert!((r.psi - 0.8).abs() < 1e-3, "{r:?}");
        assert!(r.is_ordered(1e-12));
    }

    #[test]
    fn atoms() {
        assert!((phi_coeff(&hat(&CopulaModel::Pi, 0.4).unwrap()).unwrap() - 0.4).abs() < 1e-12);
        assert!((beta_coeff(&hat(&CopulaModel::Pi, 0.4).unwrap()).unwrap() - 0.4).abs() < 1e-12);
        let hf = hat(&CopulaModel::frank(3.0).unwrap(), 0.1).unwrap();
        assert!(psi_coeff(&hf).unwrap().is_infinite());
    }

    #[test]
    fn mixing_with_pi_scales_beta() {
        for c in [CopulaModel::frank(3.0).unwrap(), fgm(0.7)] {
            let b = beta_coeff(&c).unwrap();
            for a in [0.25, 0.5, 0.75] {
                let mixed = tilde(&c, 1.0 - a).unwrap();
                assert!((beta_coeff(&mixed).unwrap() - a * b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn rate_fit_examples() {
        let f = geometric_rate_fit(&[0.5, 0.25, 0.125]).unwrap();
        assert!((f.rate - 0.5).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = geometric_rate_fit(&[1.0, 1.0, 1.0]).unwrap();
        assert!((f.rate - 1.0).abs() < 1e-12 && f.r_squared == 1.0);
        assert!(matches!(
            geometric_rate_fit(&[0.5, 0.0, 0.1]),
            Err(Error::NonPositive { index: 1, .. })
        ));
        assert!(matches!(geometric_rate_fit(&[0.5, 0.2]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn decay_of_pi_without_perturbation_is_zero() {
        let t = decay_table(&CopulaModel::Pi, None, 3, 32).unwrap();
        for r in &t.rows {
            assert_eq!((r.beta, r.phi, r.psi), (0.0, 0.0, 0.0));
            assert!(r.predicted_beta.is_nan());
        }
        assert!(t.fitted_rate.is_none());
    }

    #[test]
    fn tilde_rows_match_prediction() {
        let p = PerturbationParams::new(PerturbationKind::TildePi, 0.5).unwrap();
        let t = decay_table(&fgm(0.8), Some(p), 3, 64).unwrap();
        assert!((t.rows[0].beta - 0.05).abs() < 1e-4);
        for r in &t.rows {
            assert!((r.beta - r.predicted_beta).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn hat_rows_keep_the_atom() {
        let p = PerturbationParams::new(PerturbationKind::HatM, 0.5).unwrap();
        let t = decay_table(&CopulaModel::frank(3.0).unwrap(), Some(p), 3, 32).unwrap();
        for r in &t.rows {
            assert!(r.beta >= 0.5f64.powi(r.n as i32) - 1e-12);
            assert!(r.beta <= r.predicted_beta + 1e-9);
            assert!(r.psi.is_infinite());
        }
    }

    #[test]
    fn csv_writes_inf() {
        let p = PerturbationParams::new(PerturbationKind::HatM, 0.5).unwrap();
        let t = decay_table(&CopulaModel::Pi, Some(p), 2, 16).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("n,beta,phi,psi,predicted_beta\n1,0.5,0.5,inf,0.5\n"), "{s}");
    }
}
