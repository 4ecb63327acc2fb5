//! Propagation of chaos in the closed network: queue lengths of distinct
//! nodes decorrelate as the network grows at fixed density `N/M = 1`.
//!
//! Oracle: the nodes are exchangeable and `Σnᵢ = N` is fixed, so
//! `M·Var + M(M − 1)·Cov = 0`, i.e. the pair correlation is exactly
//! `−1/(M − 1)` in stationarity.

use phlab_core::dists::ServiceDistribution;
use phlab_core::queue_sim::{simulate_network, NetworkConfig, NetworkInit};

fn pair_correlation(m: usize, horizon: f64, seed: u64) -> f64 {
    let cfg = NetworkConfig { m, n: m, horizon, burn_in: 10.0, tagged: vec![], corr_dt: 1.0, init: NetworkInit::UniformComposition };
    simulate_network(&cfg, &ServiceDistribution::exponential(), seed).unwrap().pooled.corr.unwrap()
}

#[test]
fn correlation_decreases_with_network_size() {
    let sizes = [(8usize, 16_000.0), (64, 4_000.0), (1024, 800.0)];
    let rho: Vec<f64> = sizes.iter().enumerate().map(|(i, &(m, h))| pair_correlation(m, h, 40 + i as u64)).collect();
    for (&(m, _), &r) in sizes.iter().zip(&rho) {
        let exact = -1.0 / (m as f64 - 1.0);
        assert!((r - exact).abs() < 0.03, "M = {m}: ρ = {r}, exact {exact}");
    }
    assert!(rho[0].abs() > rho[2].abs(), "{rho:?}");
    assert!(rho[2].abs() < 0.05);
}
