//! One- and two-dimensional quadrature on intervals of the unit square.

/// Composite Simpson weights for `intervals` equal subintervals of `[0, 1]`
/// (`intervals + 1` nodes). `intervals` must be even.
pub fn simpson_weights(intervals: usize) -> Vec<f64> {
    assert!(intervals >= 2 && intervals % 2 == 0, "Simpson needs an even interval count");
    let h = 1.0 / intervals as f64;
    (0..=intervals)
        .map(|i| {
            let c = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Composite Simpson rule for `f` over `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let w = simpson_weights(intervals);
    let h = (b - a) / intervals as f64;
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        acc += wi * f(a + h * i as f64);
    }
    acc * (b - a)
}

/// Adaptive Simpson seeded with `panels` equal panels.
///
/// Each panel is refined until the local Richardson estimate is below its
/// share of `tol`. Kinks of piecewise-smooth integrands get isolated by the
/// refinement, which a fixed composite rule would not do.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut fa = f(a);
    for i in 0..panels {
        let lo = a + h * i as f64;
        let hi = if i + 1 == panels { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        let fb = f(hi);
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += refine(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 48);
        fa = fb;
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Tensor-product Simpson rule over `[0,1]^2` with `intervals` per axis.
/// Rows are evaluated through [`crate::par::map_range`] and summed in order.
pub fn simpson_2d<F>(f: F, intervals: usize) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    let w = simpson_weights(intervals);
    let h = 1.0 / intervals as f64;
    let rows = crate::par::map_range(intervals + 1, |i| {
        let x = i as f64 * h;
        let mut acc = 0.0;
        for (j, wj) in w.iter().enumerate() {
            acc += wj * f(x, j as f64 * h);
        }
        acc
    });
    rows.iter().zip(&w).map(|(r, wi)| r * wi).sum()
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn gauss_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (x, w) in nodes.iter().zip(&weights) {
            acc += w * f(lo + h * x);
        }
    }
    acc * h
}

/// Maximize a unimodal-on-bracket function by golden-section search.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
