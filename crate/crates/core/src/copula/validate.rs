use super::CopulaModel;
use crate::par;

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub grid: usize,
    pub tol: f64,
    /// Largest violation of groundedness or uniform margins on the grid edges.
    pub max_boundary_violation: f64,
    pub boundary_at: (f64, f64),
    /// Most negative grid-rectangle mass (2-increasing check).
    pub min_rectangle_mass: f64,
    pub rectangle_at: (f64, f64),
    pub passed: bool,
}

/// Check groundedness, uniform margins and the rectangle inequality on the
/// nodes of an `n x n` grid.
pub fn validate(model: &CopulaModel, n: usize, tol: f64) -> ValidationReport {
    let n = n.max(2);
    let w = n + 1;
    let h = 1.0 / n as f64;
    let nodes = par::map_range(w, |i| {
        let x = i as f64 * h;
        (0..w).map(|j| model.cdf(x, j as f64 * h)).collect::<Vec<f64>>()
    });

    let mut boundary = (0.0, (0.0, 0.0));
    for k in 0..w {
        let t = k as f64 * h;
        let checks = [
            (nodes[0][k].abs(), (0.0, t)),
            (nodes[k][0].abs(), (t, 0.0)),
            ((nodes[n][k] - t).abs(), (1.0, t)),
            ((nodes[k][n] - t).abs(), (t, 1.0)),
        ];
        for (dev, at) in checks {
            if !(dev <= boundary.0) {
                boundary = (dev, at);
            }
        }
    }

    let row_mins = par::map_range(n, |i| {
        let mut best = (f64::INFINITY, 0usize);
        for j in 0..n {
            let m = nodes[i + 1][j + 1] - nodes[i + 1][j] - nodes[i][j + 1] + nodes[i][j];
            if !(m >= best.0) {
                best = (m, j);
            }
        }
        best
    });
    let mut rect = (f64::INFINITY, (0.0, 0.0));
    for (i, (m, j)) in row_mins.into_iter().enumerate() {
        if !(m >= rect.0) {
            rect = (m, (i as f64 * h, j as f64 * h));
        }
    }

    let passed = boundary.0 <= tol && rect.0 >= -tol;
    ValidationReport {
        grid: n,
        tol,
        max_boundary_violation: boundary.0,
        boundary_at: boundary.1,
        min_rectangle_mass: rect.0,
        rectangle_at: rect.1,
        passed,
    }
}
