//! Checkerboard copulas on an `n x n` grid, optionally mixed with `M`.
//!
//! The continuous part is stored both as cell densities and as node values
//! of its CDF; the CDF between nodes is the bilinear interpolant, which is
//! exactly the CDF of the piecewise-constant density. The full copula is
//! `(1 - s) * C_ac + s * M` with `s = singular_m_mass`.

use std::io::Write;

use super::CopulaModel;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct GridCopula {
    n: usize,
    cell_density: Vec<f64>,
    cdf_nodes: Vec<f64>,
    singular_m_mass: f64,
}

impl GridCopula {
    /// Build from node values of the continuous part's CDF, row-major with
    /// `nodes[i * (n + 1) + j] = C_ac(i / n, j / n)`.
    pub fn from_cdf_nodes(n: usize, cdf_nodes: Vec<f64>, singular_m_mass: f64) -> Result<Self> {
        if n < 1 || cdf_nodes.len() != (n + 1) * (n + 1) {
            return Err(Error::InvalidParameter(format!(
                "expected {} node values for n = {n}, got {}",
                (n + 1) * (n + 1),
                cdf_nodes.len()
            )));
        }
        if !(0.0..=1.0).contains(&singular_m_mass) {
            return Err(Error::InvalidParameter(format!(
                "singular mass {singular_m_mass} outside [0, 1]"
            )));
        }
        let w = n + 1;
        let area_inv = (n * n) as f64;
        let mut cell_density = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let m = cdf_nodes[(i + 1) * w + j + 1] - cdf_nodes[(i + 1) * w + j]
                    - cdf_nodes[i * w + j + 1]
                    + cdf_nodes[i * w + j];
                cell_density[i * n + j] = (m * area_inv).max(0.0);
            }
        }
        Ok(GridCopula {
            n,
            cell_density,
            cdf_nodes,
            singular_m_mass,
        })
    }

    /// Build from cell probabilities of the continuous part (row-major,
    /// normalized to total one here).
    pub fn from_cell_masses(n: usize, masses: &[f64], singular_m_mass: f64) -> Result<Self> {
        if masses.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} cell masses, got {}",
                n * n,
                masses.len()
            )));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|m| *m < 0.0) {
            return Err(Error::InvalidParameter("cell masses must be nonnegative with positive total".into()));
        }
        let w = n + 1;
        let mut nodes = vec![0.0; w * w];
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += masses[i * n + j] / total;
                nodes[(i + 1) * w + j + 1] = nodes[i * w + j + 1] + row;
            }
        }
        GridCopula::from_cdf_nodes(n, nodes, singular_m_mass)
    }

    /// Sample a model's CDF at the nodes of an `n x n` grid, separating its
    /// diagonal atom.
    pub fn sample(model: &CopulaModel, n: usize) -> Result<Self> {
        if let CopulaModel::Grid(g) = model {
            if g.n == n {
                return Ok((**g).clone());
            }
        }
        let s = model.singular_m_mass();
        let w = n + 1;
        let h = 1.0 / n as f64;
        let rows = par::map_range(w, |i| {
            let x = i as f64 * h;
            (0..w)
                .map(|j| {
                    let y = j as f64 * h;
                    if s >= 1.0 {
                        x * y
                    } else {
                        (model.cdf(x, y) - s * x.min(y)) / (1.0 - s)
                    }
                })
                .collect::<Vec<f64>>()
        });
        let mut nodes = rows.concat();
        // Pin the boundary to the copula constraints.
        for k in 0..w {
            let t = k as f64 * h;
            nodes[k] = 0.0;
            nodes[k * w] = 0.0;
            nodes[n * w + k] = t;
            nodes[k * w + n] = t;
        }
        GridCopula::from_cdf_nodes(n, nodes, s.min(1.0))
    }

    /// Convex combination of grids of equal resolution.
    pub fn mix(parts: &[(f64, &GridCopula)]) -> Result<Self> {
        let n = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty grid mixture".into()))?
            .1
            .n;
        if parts.iter().any(|(_, g)| g.n != n) {
            return Err(Error::InvalidParameter("grid mixture needs equal resolutions".into()));
        }
        let s: f64 = parts.iter().map(|(w, g)| w * g.singular_m_mass).sum();
        let mut nodes = vec![0.0; (n + 1) * (n + 1)];
        for (w, g) in parts {
            let ac = w * (1.0 - g.singular_m_mass);
            for (acc, x) in nodes.iter_mut().zip(&g.cdf_nodes) {
                *acc += ac * x;
            }
        }
        if s < 1.0 {
            for x in nodes.iter_mut() {
                *x /= 1.0 - s;
            }
        } else {
            nodes = pi_nodes(n);
        }
        GridCopula::from_cdf_nodes(n, nodes, s.clamp(0.0, 1.0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn singular_m_mass(&self) -> f64 {
        self.singular_m_mass
    }

    pub fn cdf_nodes(&self) -> &[f64] {
        &self.cdf_nodes
    }

    pub fn cell_density(&self) -> &[f64] {
        &self.cell_density
    }

    /// Full CDF value at node `(i, j)`.
    pub fn node_cdf(&self, i: usize, j: usize) -> f64 {
        let h = 1.0 / self.n as f64;
        let s = self.singular_m_mass;
        (1.0 - s) * self.cdf_nodes[i * (self.n + 1) + j] + s * (i.min(j) as f64 * h)
    }

    /// Probability of cell `(i, j)` under the continuous part, scaled by
    /// `1 - s` (so it is a mass of the full copula).
    pub fn ac_cell_mass(&self, i: usize, j: usize) -> f64 {
        (1.0 - self.singular_m_mass) * self.cell_density[i * self.n + j] / (self.n * self.n) as f64
    }

    /// The continuous part alone, as a copula.
    pub fn continuous_part(&self) -> GridCopula {
        GridCopula {
            n: self.n,
            cell_density: self.cell_density.clone(),
            cdf_nodes: self.cdf_nodes.clone(),
            singular_m_mass: 0.0,
        }
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let scaled = t.clamp(0.0, 1.0) * self.n as f64;
        let i = (scaled.floor() as usize).min(self.n - 1);
        (i, scaled - i as f64)
    }

    /// CDF of the continuous part (bilinear in the nodes).
    pub fn ac_cdf(&self, u: f64, v: f64) -> f64 {
        let w = self.n + 1;
        let (i, a) = self.locate(u);
        let (j, b) = self.locate(v);
        let c00 = self.cdf_nodes[i * w + j];
        let c01 = self.cdf_nodes[i * w + j + 1];
        let c10 = self.cdf_nodes[(i + 1) * w + j];
        let c11 = self.cdf_nodes[(i + 1) * w + j + 1];
        (1.0 - a) * ((1.0 - b) * c00 + b * c01) + a * ((1.0 - b) * c10 + b * c11)
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let s = self.singular_m_mass;
        (1.0 - s) * self.ac_cdf(u, v) + s * u.min(v)
    }

    pub fn ac_density(&self, u: f64, v: f64) -> f64 {
        let (i, _) = self.locate(u);
        let (j, _) = self.locate(v);
        self.cell_density[i * self.n + j]
    }

    pub fn partial_u(&self, x: f64, v: f64) -> f64 {
        let w = self.n + 1;
        let (i, _) = self.locate(x);
        let (j, b) = self.locate(v);
        let lo = (1.0 - b) * self.cdf_nodes[i * w + j] + b * self.cdf_nodes[i * w + j + 1];
        let hi = (1.0 - b) * self.cdf_nodes[(i + 1) * w + j] + b * self.cdf_nodes[(i + 1) * w + j + 1];
        let ac = (hi - lo) * self.n as f64;
        let s = self.singular_m_mass;
        (1.0 - s) * ac + if x <= v { s } else { 0.0 }
    }

    pub fn partial_v(&self, u: f64, y: f64) -> f64 {
        let w = self.n + 1;
        let (i, a) = self.locate(u);
        let (j, _) = self.locate(y);
        let lo = (1.0 - a) * self.cdf_nodes[i * w + j] + a * self.cdf_nodes[(i + 1) * w + j];
        let hi = (1.0 - a) * self.cdf_nodes[i * w + j + 1] + a * self.cdf_nodes[(i + 1) * w + j + 1];
        let ac = (hi - lo) * self.n as f64;
        let s = self.singular_m_mass;
        (1.0 - s) * ac + if y <= u { s } else { 0.0 }
    }

    /// Largest absolute difference of full CDFs over this grid's nodes.
    pub fn max_abs_diff(&self, other: &CopulaModel) -> f64 {
        let h = 1.0 / self.n as f64;
        let w = self.n + 1;
        let rows = par::map_range(w, |i| {
            (0..w)
                .map(|j| (self.node_cdf(i, j) - other.cdf(i as f64 * h, j as f64 * h)).abs())
                .fold(0.0, f64::max)
        });
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Check the structural invariants: grounded nodes, uniform margins,
    /// nonnegative cells and total mass one.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n;
        let w = n + 1;
        let h = 1.0 / n as f64;
        for k in 0..w {
            let t = k as f64 * h;
            let bad = self.cdf_nodes[k].abs() > 1e-9
                || self.cdf_nodes[k * w].abs() > 1e-9
                || (self.cdf_nodes[n * w + k] - t).abs() > 1e-9
                || (self.cdf_nodes[k * w + n] - t).abs() > 1e-9;
            if bad {
                return Err(Error::NotACopula(format!("grid boundary violated at node {k}")));
            }
        }
        if self.cell_density.iter().any(|d| *d < 0.0) {
            return Err(Error::NotACopula("negative cell density".into()));
        }
        let s = self.singular_m_mass;
        let total = (1.0 - s) * self.cell_density.iter().sum::<f64>() * h * h + s;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotACopula(format!("grid mass {total} != 1")));
        }
        Ok(())
    }

    /// Node dump with header `x,y,cdf,density,singular_m_mass`. The density
    /// column is the continuous-part density of the cell whose lower-left
    /// corner is the node (the last row/column repeat the neighbouring cell).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,cdf,density,singular_m_mass")?;
        let n = self.n;
        let h = 1.0 / n as f64;
        let s = self.singular_m_mass;
        for i in 0..=n {
            for j in 0..=n {
                let d = (1.0 - s) * self.cell_density[i.min(n - 1) * n + j.min(n - 1)];
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    i as f64 * h,
                    j as f64 * h,
                    self.node_cdf(i, j),
                    d,
                    s
                )?;
            }
        }
        Ok(())
    }
}

pub(crate) fn pi_nodes(n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let w = n + 1;
    let mut nodes = vec![0.0; w * w];
    for i in 0..w {
        for j in 0..w {
            nodes[i * w + j] = (i as f64 * h) * (j as f64 * h);
        }
    }
    nodes
}
