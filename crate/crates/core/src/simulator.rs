//! Monte Carlo chains with uniform marginals, empirical coefficients and
//! reachability maps.
//!
//! `X_0 ~ U(0, 1)` (or a fixed start) and `X_{k+1}` is drawn from the
//! kernel `∂₁C(X_k, ·)`. Mixtures are sampled by first drawing a component,
//! so atoms of `M`/`W` are reproduced exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::copula::{CopulaModel, GridCopula};
use crate::error::{Error, Result};
use crate::mixing::beta_coeff_on;
use crate::par;
use crate::products::fold;

pub const GENERATOR: &str = "ChaCha8";
/// Density below which a cell counts as unreachable.
pub const REACH_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub model_id: String,
}

impl ChainSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(X_k, X_{k+lag})` for all admissible `k`.
    pub fn lagged_pairs(&self, lag: usize) -> Vec<(f64, f64)> {
        self.values
            .iter()
            .zip(self.values.iter().skip(lag))
            .map(|(a, b)| (*a, *b))
            .collect()
    }

    /// Single-column dump with `# seed`, `# model` and `# generator` lines.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# seed: {}", self.seed)?;
        writeln!(out, "# model: {}", self.model_id)?;
        writeln!(out, "# generator: {GENERATOR} stream {}", self.stream)?;
        writeln!(out, "x")?;
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

/// Cumulative component weights and leaves of a model.
struct Sampler {
    cumulative: Vec<f64>,
    leaves: Vec<CopulaModel>,
}

impl Sampler {
    fn new(c: &CopulaModel) -> Self {
        let mut cumulative = Vec::new();
        let mut leaves = Vec::new();
        let mut acc = 0.0;
        for (w, leaf) in c.decompose() {
            acc += w;
            cumulative.push(acc);
            leaves.push(leaf);
        }
        Sampler { cumulative, leaves }
    }

    fn step(&self, x: f64, rng: &mut ChaCha8Rng) -> f64 {
        let leaf = if self.leaves.len() == 1 {
            &self.leaves[0]
        } else {
            let pick = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
            let k = self.cumulative.partition_point(|c| *c <= pick);
            &self.leaves[k.min(self.leaves.len() - 1)]
        };
        leaf.cond_quantile(x, rng.random::<f64>())
    }
}

fn check_len(len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::InvalidParameter(format!("chain length {len} is below 2")));
    }
    Ok(())
}

/// Chain from `start` (uniform when `None`), using stream `stream` of the
/// generator seeded with `seed`.
pub fn sample_chain_from(
    c: &CopulaModel,
    len: usize,
    seed: u64,
    stream: u64,
    start: Option<f64>,
) -> Result<ChainSample> {
    check_len(len)?;
    if let Some(x) = start {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("start {x} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let sampler = Sampler::new(c);
    let mut values = Vec::with_capacity(len);
    let mut x = match start {
        Some(x) => x,
        None => rng.random::<f64>(),
    };
    values.push(x);
    for _ in 1..len {
        x = sampler.step(x, &mut rng);
        values.push(x);
    }
    Ok(ChainSample {
        values,
        seed,
        stream,
        model_id: c.label(),
    })
}

pub fn sample_chain(c: &CopulaModel, len: usize, seed: u64) -> Result<ChainSample> {
    sample_chain_from(c, len, seed, 0, None)
}

/// `count` independent stationary chains on streams `0..count`.
pub fn sample_chains(c: &CopulaModel, len: usize, seed: u64, count: usize) -> Result<Vec<ChainSample>> {
    check_len(len)?;
    par::map_range(count, |k| sample_chain_from(c, len, seed, k as u64, None))
        .into_iter()
        .collect()
}

/// `len` i.i.d. uniform pairs: the control for histogram bias.
pub fn iid_pairs(len: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect()
}

fn bin(t: f64, bins: usize) -> usize {
    ((t * bins as f64) as usize).min(bins - 1)
}

fn histogram(pairs: &[(f64, f64)], bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins * bins];
    for &(x, y) in pairs {
        counts[bin(x, bins) * bins + bin(y, bins)] += 1.0;
    }
    counts
}

/// Histogram density of the pairs, normalized to total mass one.
pub fn empirical_grid(pairs: &[(f64, f64)], bins: usize) -> Result<GridCopula> {
    if bins == 0 || pairs.is_empty() {
        return Err(Error::InvalidParameter("empirical grid needs pairs and at least one bin".into()));
    }
    GridCopula::from_cell_masses(bins, &histogram(pairs, bins), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalBeta {
    /// β of the histogram of lagged pairs.
    pub raw: f64,
    /// β of the histogram of as many i.i.d. pairs.
    pub noise_floor: f64,
    /// `max(raw - noise_floor, 0)`.
    pub calibrated: f64,
    pub pairs: usize,
    pub bins: usize,
}

/// β of the lag-`lag` pairs of a chain, with the upward histogram bias
/// estimated from an i.i.d. control of equal size (seeded from the chain).
pub fn empirical_beta(chain: &ChainSample, lag: usize, bins: usize) -> Result<EmpiricalBeta> {
    if lag == 0 || chain.len() <= lag {
        return Err(Error::InvalidParameter(format!(
            "lag {lag} needs a chain longer than {lag}, got {}",
            chain.len()
        )));
    }
    let pairs = chain.lagged_pairs(lag);
    let raw = histogram_beta(&pairs, bins)?;
    let control = iid_pairs(pairs.len(), chain.seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise_floor = histogram_beta(&control, bins)?;
    Ok(EmpiricalBeta {
        raw,
        noise_floor,
        calibrated: (raw - noise_floor).max(0.0),
        pairs: pairs.len(),
        bins,
    })
}

fn histogram_beta(pairs: &[(f64, f64)], bins: usize) -> Result<f64> {
    let g = empirical_grid(pairs, bins)?;
    // β of a checkerboard is exact on its own grid; small bin counts are
    // evaluated on a multiple of it to satisfy the minimum resolution.
    let n = bins * crate::products::MIN_GRID.div_ceil(bins);
    beta_coeff_on(&CopulaModel::grid(g), n)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k;
        while e + 1 < idx.len() && xs[idx[e + 1]] == xs[idx[k]] {
            e += 1;
        }
        let r = (k + e) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=e] {
            out[i] = r;
        }
        k = e + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Rank correlation of paired samples (average ranks for ties).
pub fn rank_spearman(pairs: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    pearson(&ranks(&xs), &ranks(&ys))
}

/// Plain sample correlation of paired samples.
pub fn sample_correlation(pairs: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    pearson(&xs, &ys)
}

/// Kolmogorov distance of the empirical CDF from the uniform one.
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

/// 95% band of [`ks_uniform`] for `len` samples.
pub fn ks_band(len: usize) -> f64 {
    1.63 / (len as f64).sqrt()
}

/// Largest difference in density between the histograms of `(X_k, X_{k+1})`
/// and `(X_{k+1}, X_k)`, with its standard error at that cell.
pub fn reversibility_gap(chain: &ChainSample, bins: usize) -> (f64, f64) {
    let pairs = chain.lagged_pairs(1);
    let counts = histogram(&pairs, bins);
    let total = pairs.len() as f64;
    let area = 1.0 / (bins * bins) as f64;
    let mut worst = (0.0, 0.0);
    for i in 0..bins {
        for j in (i + 1)..bins {
            let (a, b) = (counts[i * bins + j], counts[j * bins + i]);
            let gap = (a - b).abs() / total / area;
            if gap > worst.0 {
                worst = (gap, (a + b).sqrt() / total / area);
            }
        }
    }
    worst
}

/// Cells (row = current state, column = next state) carrying transition
/// mass in one and in two steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityMap {
    pub resolution: usize,
    pub one_step: Vec<bool>,
    pub two_step: Vec<bool>,
}

impl ReachabilityMap {
    pub fn one(&self, i: usize, j: usize) -> bool {
        self.one_step[i * self.resolution + j]
    }

    pub fn two(&self, i: usize, j: usize) -> bool {
        self.two_step[i * self.resolution + j]
    }

    pub fn one_step_fraction(&self) -> f64 {
        fraction(&self.one_step)
    }

    pub fn two_step_fraction(&self) -> f64 {
        fraction(&self.two_step)
    }

    /// 0/1 rows; `two` selects the two-step map.
    pub fn write_csv<W: std::io::Write>(&self, two: bool, mut out: W) -> Result<()> {
        let cells = if two { &self.two_step } else { &self.one_step };
        for row in cells.chunks(self.resolution) {
            let line: Vec<&str> = row.iter().map(|b| if *b { "1" } else { "0" }).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn fraction(cells: &[bool]) -> f64 {
    cells.iter().filter(|b| **b).count() as f64 / cells.len() as f64
}

fn reachable_cells(cdf: impl Fn(f64, f64) -> f64 + Sync, n: usize) -> Vec<bool> {
    let h = 1.0 / n as f64;
    let nodes = par::map_range(n + 1, |i| {
        (0..=n).map(|j| cdf(i as f64 * h, j as f64 * h)).collect::<Vec<f64>>()
    });
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mass = nodes[i + 1][j + 1] - nodes[i + 1][j] - nodes[i][j + 1] + nodes[i][j];
            out.push(mass / (h * h) > REACH_THRESHOLD);
        }
    }
    out
}

pub fn reachability_map(c: &CopulaModel, resolution: usize) -> Result<ReachabilityMap> {
    let one_step = reachable_cells(|u, v| c.cdf(u, v), resolution);
    let two = fold(c, c, resolution)?.grid;
    let two_step = reachable_cells(|u, v| two.cdf(u, v), resolution);
    Ok(ReachabilityMap {
        resolution,
        one_step,
        two_step,
    })
}

/// Next-state cells reachable in one step from `x`.
pub fn reachable_from(c: &CopulaModel, x: f64, resolution: usize) -> Vec<bool> {
    let h = 1.0 / resolution as f64;
    (0..resolution)
        .map(|j| {
            let lo = c.cond_cdf(x, j as f64 * h);
            let hi = c.cond_cdf(x, (j + 1) as f64 * h);
            (hi - lo) / h > REACH_THRESHOLD
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_chain_is_constant_and_reproducible() {
        let a = sample_chain(&CopulaModel::FrechetM, 100, 7).unwrap();
        assert!(a.values.iter().all(|v| *v == a.values[0]));
        let b = sample_chain(&CopulaModel::Pi, 1000, 7).unwrap();
        assert_eq!(b, sample_chain(&CopulaModel::Pi, 1000, 7).unwrap());
        assert_ne!(b.values, sample_chain(&CopulaModel::Pi, 1000, 8).unwrap().values);
    }

    #[test]
    fn w_chain_alternates() {
        let c = sample_chain_from(&CopulaModel::FrechetW, 5, 1, 0, Some(0.2)).unwrap();
        assert_eq!(c.values, vec![0.2, 0.8, 0.19999999999999996, 0.8, 0.19999999999999996]);
    }

    #[test]
    fn pi_chain_is_uncorrelated_and_uniform() {
        let c = sample_chain(&CopulaModel::Pi, 100_000, 3).unwrap();
        assert!(sample_correlation(&c.lagged_pairs(1)).abs() < 0.01);
        assert!(ks_uniform(&c.values) < ks_band(c.len()));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let pairs: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, (k * k) as f64)).collect();
        assert!((rank_spearman(&pairs) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_pairs_fill_diagonal_cells() {
        let pairs: Vec<(f64, f64)> = (0..1000).map(|k| (k as f64 / 1000.0, k as f64 / 1000.0)).collect();
        let g = empirical_grid(&pairs, 10).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let expected = if i == j { 10.0 } else { 0.0 };
                assert!((g.ac_density((i as f64 + 0.5) / 10.0, (j as f64 + 0.5) / 10.0) - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn iid_histogram_is_flat() {
        // 10⁶ pairs over 256 cells: about 3906 per cell, 3σ ≈ 0.05 in density
        let g = empirical_grid(&iid_pairs(1_000_000, 11), 16).unwrap();
        let worst = g.cell_density().iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 0.1, "{worst}");
    }

    #[test]
    fn pi_is_reachable_everywhere() {
        let m = reachability_map(&CopulaModel::Pi, 32).unwrap();
        assert_eq!(m.one_step_fraction(), 1.0);
        assert_eq!(m.two_step_fraction(), 1.0);
        let mut buf = Vec::new();
        m.write_csv(false, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 32);
    }

    #[test]
    fn streams_are_independent_and_ordered() {
        let chains = sample_chains(&CopulaModel::Pi, 50, 5, 3).unwrap();
        assert_eq!(chains[2], sample_chain_from(&CopulaModel::Pi, 50, 5, 2, None).unwrap());
        assert_ne!(chains[0].values, chains[1].values);
    }
}
