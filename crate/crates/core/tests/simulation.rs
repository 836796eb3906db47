use copulab::dependence::spearman_rho;
use copulab::mixing::beta_coeff_on;
use copulab::noise::ClosedNoise;
use copulab::simulator::{
    empirical_beta, empirical_grid, ks_band, ks_uniform, rank_spearman, reversibility_gap, sample_chain,
    sample_chains,
};
use copulab::CopulaModel;

#[test]
fn chains_keep_uniform_marginals() {
    for c in [
        CopulaModel::frank(6.0).unwrap(),
        CopulaModel::fgm(1.0).unwrap(),
        CopulaModel::mixture(vec![(0.3, CopulaModel::FrechetM), (0.7, CopulaModel::frank(-3.0).unwrap())]).unwrap(),
        ClosedNoise::C6IndepUniform.model(),
    ] {
        let chain = sample_chain(&c, 100_000, 31).unwrap();
        let d = ks_uniform(&chain.values);
        assert!(d < ks_band(chain.len()), "{c:?}: KS {d}");
    }
}

#[test]
fn spearman_matches_quadrature_for_frank() {
    let c = CopulaModel::frank(3.0).unwrap();
    let chain = sample_chain(&c, 100_000, 8).unwrap();
    let mc = rank_spearman(&chain.lagged_pairs(1));
    assert!((mc - spearman_rho(&c)).abs() < 0.01, "{mc} vs {}", spearman_rho(&c));
}

#[test]
fn independent_chain_beta_is_noise() {
    let chain = sample_chain(&CopulaModel::Pi, 1_000_000, 4).unwrap();
    let b = empirical_beta(&chain, 1, 16).unwrap();
    assert!(b.raw <= 0.05, "{b:?}");
    assert!(b.calibrated < 0.005, "{b:?}");
}

#[test]
fn histogram_beta_of_fgm_pairs() {
    let chain = sample_chain(&CopulaModel::fgm(0.8).unwrap(), 1_000_000, 12).unwrap();
    let g = empirical_grid(&chain.lagged_pairs(1), 16).unwrap();
    let b = beta_coeff_on(&CopulaModel::grid(g), 16).unwrap();
    assert!((b - 0.1).abs() < 0.02, "{b}");
}

#[test]
fn symmetric_copulas_give_reversible_chains() {
    for c in [
        CopulaModel::fgm(0.9).unwrap(),
        CopulaModel::frank(4.0).unwrap(),
        ClosedNoise::C6IndepUniform.model(),
    ] {
        let chain = sample_chain(&c, 200_000, 77).unwrap();
        let (gap, se) = reversibility_gap(&chain, 8);
        assert!(gap < 5.0 * se, "{c:?}: gap {gap}, se {se}");
    }
}

#[test]
fn c5_chain_is_not_reversible() {
    let chain = sample_chain(&ClosedNoise::C5MUniform.model(), 1_000_000, 3).unwrap();
    let (gap, se) = reversibility_gap(&chain, 8);
    assert!(gap > 10.0 * se, "gap {gap}, se {se}");
}

#[test]
fn parallel_chains_match_sequential_ones() {
    let c = CopulaModel::frank(2.0).unwrap();
    let par = sample_chains(&c, 1_000, 6, 4).unwrap();
    let seq = copulab::par::with_execution(copulab::Execution::Sequential, || sample_chains(&c, 1_000, 6, 4).unwrap());
    assert_eq!(par, seq);
}
