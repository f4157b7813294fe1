//! Small homogeneous networks for experiments and tests.
//!
//! Every bank owes 4 to outside creditors and 1 in total to other banks,
//! either spread evenly over all other banks (complete) or owed entirely to
//! the next bank around a cycle (ring). The last bank is the target.

use nalgebra::DMatrix;

use crate::error::{EstimatorError, NetworkError, ShockError};
use crate::estimators::Scenario;
use crate::network::{build_network, InverseDemand, Network, RawNetwork};
use crate::shocks::{Regime, ShockModel};

pub const EXTERNAL_LIABILITY: f64 = 4.0;
pub const INTERBANK_LIABILITY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToyTopology {
    Complete,
    Ring,
}

impl ToyTopology {
    pub fn as_str(self) -> &'static str {
        match self {
            ToyTopology::Complete => "complete",
            ToyTopology::Ring => "ring",
        }
    }
}

impl std::fmt::Display for ToyTopology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ToyTopology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complete" => Ok(ToyTopology::Complete),
            "ring" => Ok(ToyTopology::Ring),
            other => Err(format!("unknown toy topology '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub n: usize,
    pub topology: ToyTopology,
    pub initial_assets: f64,
    pub volatility: f64,
    /// Illiquid units per bank (0 for the plain toy).
    pub illiquid_units: f64,
    /// Decay rate of the exponential inverse demand.
    pub demand_decay: f64,
    /// Pairwise correlation of the asset shocks.
    pub correlation: f64,
}

impl ToySpec {
    pub fn new(n: usize, topology: ToyTopology, initial_assets: f64, volatility: f64) -> Self {
        ToySpec {
            n,
            topology,
            initial_assets,
            volatility,
            illiquid_units: 0.0,
            demand_decay: 2.5e-8,
            correlation: 0.0,
        }
    }

    pub fn with_fire_sales(mut self, illiquid_units: f64, demand_decay: f64) -> Self {
        self.illiquid_units = illiquid_units;
        self.demand_decay = demand_decay;
        self
    }

    pub fn with_correlation(mut self, rho: f64) -> Self {
        self.correlation = rho;
        self
    }

    pub fn network(&self) -> Result<Network, NetworkError> {
        let n = self.n;
        let mut liabilities = vec![vec![0.0; n]; n];
        if n > 1 {
            for (i, row) in liabilities.iter_mut().enumerate() {
                match self.topology {
                    ToyTopology::Complete => {
                        let share = INTERBANK_LIABILITY / (n - 1) as f64;
                        for (j, v) in row.iter_mut().enumerate() {
                            if i != j {
                                *v = share;
                            }
                        }
                    }
                    ToyTopology::Ring => row[(i + 1) % n] = INTERBANK_LIABILITY,
                }
            }
        }
        // Holding e units at price 1 must not break the one-unit margin, so
        // the external liability grows with the illiquid holding.
        build_network(RawNetwork {
            liabilities,
            external_liabilities: vec![EXTERNAL_LIABILITY + self.illiquid_units; n],
            initial_liquid_assets: vec![self.initial_assets; n],
            illiquid_units: vec![self.illiquid_units; n],
            inverse_demand: InverseDemand::exponential(1.0, self.demand_decay)?,
        })
    }

    pub fn shock_model(&self) -> Result<ShockModel, ShockError> {
        let vols = vec![self.volatility; self.n];
        if self.correlation == 0.0 {
            return ShockModel::uncorrelated(&vols);
        }
        let rho = self.correlation;
        let corr = DMatrix::from_fn(self.n, self.n, |i, j| if i == j { 1.0 } else { rho });
        ShockModel::from_correlation_matrix(&vols, &corr)
    }

    /// Scenario targeting the last bank.
    pub fn scenario(&self, regime: Regime) -> Result<Scenario, EstimatorError> {
        let net = self
            .network()
            .map_err(|e| EstimatorError::Config(e.to_string()))?;
        Scenario::new(net, &self.shock_model()?, regime, self.n - 1)
    }
}
