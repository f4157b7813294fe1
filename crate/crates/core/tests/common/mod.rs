#![allow(dead_code)]

use netbliss::{build_network, InverseDemand, Network, RawNetwork};
use rand::Rng;

/// Random network satisfying the standing assumptions on demand and margins.
///
/// The interbank assets of bank `i` are `sum_j L_ji`, so choosing the external
/// liability large enough makes `pbar_i >= 1 + e_i + sum_j L_ji` by
/// construction. The demand decay keeps `decay * ebar < 1`.
pub fn random_network<R: Rng>(rng: &mut R, n: usize, illiquid: bool) -> Network {
    let mut liabilities = vec![vec![0.0; n]; n];
    for (i, row) in liabilities.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j && rng.random_bool(0.7) {
                *v = rng.random_range(0.0..2.0);
            }
        }
    }
    let units: Vec<f64> = (0..n)
        .map(|_| if illiquid { rng.random_range(0.0..2.0) } else { 0.0 })
        .collect();
    let external: Vec<f64> = (0..n)
        .map(|i| {
            let owed: f64 = liabilities[i].iter().sum();
            let claims: f64 = (0..n).map(|j| liabilities[j][i]).sum();
            let floor = 1.0 + units[i] + claims - owed;
            floor.max(0.1) + rng.random_range(0.0..2.0)
        })
        .collect();
    let total_units: f64 = units.iter().sum();
    let decay = if total_units > 0.0 {
        rng.random_range(0.05..0.9) / total_units
    } else {
        0.1
    };
    build_network(RawNetwork {
        liabilities,
        external_liabilities: external,
        initial_liquid_assets: (0..n).map(|_| rng.random_range(1.0..8.0)).collect(),
        illiquid_units: units,
        inverse_demand: InverseDemand::exponential(1.0, decay).unwrap(),
    })
    .unwrap()
}

/// External asset values drawn uniformly on `[0, 1.5 pbar_i]`.
pub fn random_assets<R: Rng>(rng: &mut R, net: &Network) -> Vec<f64> {
    net.total_liabilities()
        .iter()
        .map(|&p| rng.random_range(0.0..1.5 * p))
        .collect()
}
