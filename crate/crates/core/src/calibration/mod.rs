//! Calibration of a network and shock model from bank balance-sheet records.
//!
//! Records carry total assets, net worth, interbank assets and equity
//! volatility. From those:
//!
//! * total liabilities are `assets - net worth`, and a common fraction of each
//!   bank's liabilities is external, chosen so that aggregate interbank
//!   liabilities equal aggregate interbank assets;
//! * non-interbank assets are split into a liquid share `beta` and an illiquid
//!   remainder held as units of an asset with nominal price 1;
//! * asset volatilities come from the Merton equity/asset relation;
//! * the bilateral matrix is rebuilt on a chosen topology by RAS.

mod merton;
mod ras;

use std::io::Read;

use nalgebra::DMatrix;
use serde::Deserialize;

pub use merton::{merton_asset_vol, merton_delta, merton_residual};
pub use ras::{marginal_error, reconstruct_interbank, MARGINAL_TOL, MAX_SWEEPS};

use crate::error::{CalibrationError, ParseError};
use crate::io::parse_matrix;
use crate::network::{build_network, InverseDemand, Network, RawNetwork};
use crate::shocks::{RowNorm, ShockModel};

/// Balance-sheet data for the 36 banks of the 2018 EBA stress-test sample
/// (millions of euros, equity volatility in percent).
pub const EBA_RECORDS_CSV: &str = include_str!("../../data/eba2018.csv");
/// Lower-triangular correlation factor for the same sample, two decimals.
pub const EBA_CORRELATION: &str = include_str!("../../data/eba_correlation.txt");

pub const DEFAULT_BETA: f64 = 0.4;
pub const DEFAULT_DECAY: f64 = 2.5e-8;
pub const DEFAULT_CORE_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RawBankRecord {
    pub name: String,
    pub total_assets: f64,
    pub net_worth: f64,
    pub interbank_assets: f64,
    /// Annualized, as a fraction.
    pub equity_vol: f64,
    /// Unlisted banks carry an index volatility instead of their own.
    pub listed: bool,
}

impl RawBankRecord {
    pub fn total_liabilities(&self) -> f64 {
        self.total_assets - self.net_worth
    }

    pub fn non_interbank_assets(&self) -> f64 {
        self.total_assets - self.interbank_assets
    }

    fn check(&self, index: usize) -> Result<(), CalibrationError> {
        let fail = |reason: &str| {
            Err(CalibrationError::InvalidRecord {
                index,
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        let values = [self.total_assets, self.net_worth, self.interbank_assets, self.equity_vol];
        if values.iter().any(|v| !v.is_finite()) {
            return fail("non-finite value");
        }
        if !(self.net_worth > 0.0) {
            return fail("net worth must be positive");
        }
        if !(self.total_assets > self.net_worth) {
            return fail("total assets must exceed net worth");
        }
        if !(self.interbank_assets >= 0.0 && self.interbank_assets < self.total_assets) {
            return fail("interbank assets must lie in [0, total assets)");
        }
        if !(self.equity_vol > 0.0) {
            return fail("equity volatility must be positive");
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct CsvRecord {
    name: String,
    total_assets: f64,
    net_worth: f64,
    interbank_assets: f64,
    equity_vol_pct: f64,
    listed: bool,
}

/// Reads records from comma-separated text with a header row.
pub fn read_records<R: Read>(reader: R, source_name: &str) -> Result<Vec<RawBankRecord>, ParseError> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for row in csv.deserialize::<CsvRecord>() {
        let row = row.map_err(|e| csv_error(source_name, &e))?;
        out.push(RawBankRecord {
            name: row.name,
            total_assets: row.total_assets,
            net_worth: row.net_worth,
            interbank_assets: row.interbank_assets,
            equity_vol: row.equity_vol_pct / 100.0,
            listed: row.listed,
        });
    }
    Ok(out)
}

fn csv_error(source_name: &str, e: &csv::Error) -> ParseError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    let column = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.field().map_or(0, |f| f as usize + 1),
        _ => 0,
    };
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.kind().to_string(),
        _ => e.to_string(),
    };
    ParseError::new(source_name, line, column, message)
}

/// The bundled EBA sample.
pub fn eba_records() -> Vec<RawBankRecord> {
    read_records(EBA_RECORDS_CSV.as_bytes(), "eba2018.csv").expect("bundled records parse")
}

/// The bundled correlation factor, as printed (rows not exactly unit norm).
pub fn eba_correlation_factor() -> DMatrix<f64> {
    parse_matrix(EBA_CORRELATION, "eba_correlation.txt").expect("bundled correlation parses")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiabilitySplit {
    pub total: Vec<f64>,
    pub external: Vec<f64>,
    /// Common external share of total liabilities.
    pub alpha: f64,
}

impl LiabilitySplit {
    pub fn interbank(&self) -> Vec<f64> {
        self.total
            .iter()
            .zip(&self.external)
            .map(|(t, e)| t - e)
            .collect()
    }
}

pub fn split_liabilities(records: &[RawBankRecord]) -> Result<LiabilitySplit, CalibrationError> {
    check_records(records)?;
    let total: Vec<f64> = records.iter().map(RawBankRecord::total_liabilities).collect();
    let interbank: f64 = records.iter().map(|r| r.interbank_assets).sum();
    let alpha = 1.0 - interbank / total.iter().sum::<f64>();
    // alpha = 1 is the degenerate but consistent case of no interbank claims.
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CalibrationError::Alpha(alpha));
    }
    let external = total.iter().map(|t| alpha * t).collect();
    Ok(LiabilitySplit {
        total,
        external,
        alpha,
    })
}

/// Liquid and illiquid holdings `(s0, e)`.
pub fn split_assets(
    records: &[RawBankRecord],
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>), CalibrationError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(CalibrationError::Beta(beta));
    }
    check_records(records)?;
    let base: Vec<f64> = records.iter().map(RawBankRecord::non_interbank_assets).collect();
    let s0 = base.iter().map(|b| beta * b).collect();
    let e = base.iter().map(|b| (1.0 - beta) * b).collect();
    Ok((s0, e))
}

fn check_records(records: &[RawBankRecord]) -> Result<(), CalibrationError> {
    if records.is_empty() {
        return Err(CalibrationError::InvalidRecord {
            index: 0,
            name: String::new(),
            reason: "no records".into(),
        });
    }
    records.iter().enumerate().try_for_each(|(i, r)| r.check(i))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Complete,
    /// Bank `i` owes only bank `i + 1` (mod n).
    Ring,
    /// The `core` largest banks by total assets link both ways to every bank;
    /// the rest link only to the core.
    CorePeriphery { core: usize },
    Custom(Vec<Vec<bool>>),
}

impl TopologySpec {
    pub fn name(&self) -> &'static str {
        match self {
            TopologySpec::Complete => "complete",
            TopologySpec::Ring => "ring",
            TopologySpec::CorePeriphery { .. } => "core-periphery",
            TopologySpec::Custom(_) => "custom",
        }
    }

    /// Directed support: `adj[i][j]` allows bank `i` to owe bank `j`.
    pub fn adjacency(&self, total_assets: &[f64]) -> Result<Vec<Vec<bool>>, CalibrationError> {
        let n = total_assets.len();
        let adj = match self {
            TopologySpec::Complete => (0..n).map(|i| (0..n).map(|j| i != j).collect()).collect(),
            TopologySpec::Ring => (0..n)
                .map(|i| (0..n).map(|j| n > 1 && j == (i + 1) % n).collect())
                .collect(),
            TopologySpec::CorePeriphery { core } => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| total_assets[b].total_cmp(&total_assets[a]).then(a.cmp(&b)));
                let mut in_core = vec![false; n];
                for &i in order.iter().take(*core) {
                    in_core[i] = true;
                }
                (0..n)
                    .map(|i| (0..n).map(|j| i != j && (in_core[i] || in_core[j])).collect())
                    .collect()
            }
            TopologySpec::Custom(adj) => {
                if adj.len() != n || adj.iter().any(|r| r.len() != n) {
                    return Err(CalibrationError::Infeasible(format!(
                        "custom adjacency must be {n} x {n}"
                    )));
                }
                if let Some(i) = (0..n).find(|&i| adj[i][i]) {
                    return Err(CalibrationError::Infeasible(format!(
                        "custom adjacency has a self-loop at bank {i}"
                    )));
                }
                adj.clone()
            }
        };
        Ok(adj)
    }
}

#[derive(Debug, Clone)]
pub enum CorrelationSource {
    Identity,
    /// Lower-triangular factor or full correlation matrix.
    Matrix { matrix: DMatrix<f64>, row_norm: RowNorm },
}

impl CorrelationSource {
    /// The bundled EBA factor, with rows rescaled to unit norm.
    pub fn eba() -> Self {
        CorrelationSource::Matrix {
            matrix: eba_correlation_factor(),
            row_norm: RowNorm::Renormalize,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, CorrelationSource::Identity)
    }

    pub fn shock_model(&self, vols: &[f64]) -> Result<ShockModel, CalibrationError> {
        let model = match self {
            CorrelationSource::Identity => ShockModel::uncorrelated(vols)?,
            CorrelationSource::Matrix { matrix, row_norm } => {
                let n = matrix.nrows();
                let lower = (0..n).all(|i| (i + 1..matrix.ncols()).all(|j| matrix[(i, j)] == 0.0));
                if lower {
                    ShockModel::from_correlation_factor(vols, matrix, *row_norm)?
                } else {
                    ShockModel::from_correlation_matrix(vols, matrix)?
                }
            }
        };
        Ok(model)
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub beta: f64,
    /// Decay of the exponential inverse demand.
    pub decay: f64,
    pub topology: TopologySpec,
    pub correlation: CorrelationSource,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            beta: DEFAULT_BETA,
            decay: DEFAULT_DECAY,
            topology: TopologySpec::CorePeriphery {
                core: DEFAULT_CORE_SIZE,
            },
            correlation: CorrelationSource::Identity,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub names: Vec<String>,
    pub network: Network,
    pub shock_model: ShockModel,
    pub liabilities: LiabilitySplit,
    pub asset_vols: Vec<f64>,
}

pub fn calibrate(
    records: &[RawBankRecord],
    config: &CalibrationConfig,
) -> Result<Calibration, CalibrationError> {
    let liabilities = split_liabilities(records)?;
    let (s0, e) = split_assets(records, config.beta)?;
    let asset_vols = records
        .iter()
        .map(|r| merton_asset_vol(r.net_worth, r.total_assets, r.equity_vol))
        .collect::<Result<Vec<_>, _>>()?;

    let total_assets: Vec<f64> = records.iter().map(|r| r.total_assets).collect();
    let adjacency = config.topology.adjacency(&total_assets)?;
    let col_sums: Vec<f64> = records.iter().map(|r| r.interbank_assets).collect();
    let matrix = reconstruct_interbank(&liabilities.interbank(), &col_sums, &adjacency)?;

    let n = records.len();
    let network = build_network(RawNetwork {
        liabilities: (0..n).map(|i| matrix.row(i).iter().copied().collect()).collect(),
        external_liabilities: liabilities.external.clone(),
        initial_liquid_assets: s0,
        illiquid_units: e,
        inverse_demand: InverseDemand::exponential(1.0, config.decay)?,
    })?;
    let shock_model = config.correlation.shock_model(&asset_vols)?;
    Ok(Calibration {
        names: records.iter().map(|r| r.name.clone()).collect(),
        network,
        shock_model,
        liabilities,
        asset_vols,
    })
}

/// Largest relative gap between the calibrated and recorded net worth.
pub fn net_worth_error(calibration: &Calibration, records: &[RawBankRecord]) -> f64 {
    calibration
        .network
        .net_worth()
        .iter()
        .zip(records)
        .map(|(w, r)| (w - r.net_worth).abs() / r.net_worth)
        .fold(0.0, f64::max)
}
