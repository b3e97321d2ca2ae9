//! Fixtures shared by the benchmarks.

use dspp_core::{DsppModel, OffTimeDistribution};

/// The four example models (`λ = 2`, `k = 1`) with a short label each.
pub fn example_models() -> Vec<(&'static str, DsppModel)> {
    let m = |g| DsppModel::new(2.0, 1.0, g).expect("valid example model");
    vec![
        ("poisson", m(OffTimeDistribution::degenerate())),
        ("exp_g", m(OffTimeDistribution::exponential(1.0).unwrap())),
        ("deterministic_g", m(OffTimeDistribution::deterministic(1.0).unwrap())),
        (
            "hyperexp_g",
            m(OffTimeDistribution::hyperexponential(vec![0.4, 0.6], vec![1.0, 3.0]).unwrap()),
        ),
    ]
}

pub fn gamma_model() -> DsppModel {
    DsppModel::new(2.0, 1.0, OffTimeDistribution::gamma(2.0, 3.0).unwrap()).unwrap()
}
