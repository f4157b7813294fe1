//! Fixtures shared by the benchmarks.

use netbliss::calibration::{calibrate, eba_records, CalibrationConfig, CorrelationSource};
use netbliss::toy::{ToySpec, ToyTopology};
use netbliss::{Network, Regime, Scenario};

/// Complete toy network at `(5, 0.1)` targeting its last bank.
pub fn toy_scenario(n: usize) -> Scenario {
    ToySpec::new(n, ToyTopology::Complete, 5.0, 0.1)
        .scenario(Regime::identity())
        .expect("toy scenario builds")
}

/// Toy network with fire sales, so clearing exercises the price search.
pub fn fire_sale_network(n: usize) -> Network {
    ToySpec::new(n, ToyTopology::Complete, 5.0, 0.1)
        .with_fire_sales(2.0, 0.02)
        .network()
        .expect("toy network builds")
}

/// Calibrated EBA network with the bundled correlation, targeting bank 35.
pub fn eba_scenario() -> Scenario {
    let config = CalibrationConfig {
        correlation: CorrelationSource::eba(),
        ..CalibrationConfig::default()
    };
    let cal = calibrate(&eba_records(), &config).expect("bundled data calibrates");
    Scenario::new(cal.network, &cal.shock_model, Regime::identity(), 35)
        .expect("eba scenario builds")
}
