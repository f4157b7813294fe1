//! Valuation of bank bonds in an interbank network with fire-sale externalities.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`] holds the balance-sheet data model, the inverse demand
//!   function and the standing-assumption checks.
//! * [`clearing`] solves the joint price/payment equilibrium, the decoupled
//!   fictitious system and the target bank's solvency threshold.
//! * [`shocks`] maps standard normals to external asset values under the
//!   correlated lognormal model and its asymptotic rescalings.
//! * [`tilt`] computes the outer-layer mean shifts for each regime.
//! * [`estimators`] implements naive Monte Carlo, inner-layer importance
//!   sampling, the bi-level estimator and the solvency estimator for the
//!   large-volatility regime.
//! * [`calibration`] turns EBA-style balance-sheet records into a network and
//!   a shock model.
//! * [`experiment`] drives parameter sweeps and produces result tables.

pub mod calibration;
pub mod clearing;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod io;
pub mod network;
mod optim;
pub mod shocks;
pub mod tilt;
pub mod toy;

pub use clearing::{
    clear, default_indicator_via_threshold, fictitious_clear, solve_price_given_payments,
    ClearingOutcome, FictitiousOutcome,
};
pub use error::{
    CalibrationError, ClearingError, Error, EstimatorError, NetworkError, ParseError, ShockError,
};
pub use estimators::{
    aggregate, bond_price, bond_price_from_terms, log_normal_cdf, run_bliss, run_gamma_c, run_ilis,
    run_mc, sample_truncated_normal, BondPrice, EstimatorResult, Method, Payoff, Scenario,
    TrialBatch,
};
pub use network::{
    build_network, eval_inverse_demand, validate_assumptions, InverseDemand, Network,
    RawNetwork, ValidationReport,
};
pub use shocks::{Regime, RegimeKind, ShockModel};
pub use tilt::TiltVector;
