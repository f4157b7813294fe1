//! Text formats: network documents (TOML), shock vectors and matrices.
//!
//! A network document is either dense:
//!
//! ```toml
//! format = "dense"
//! n = 2
//! liabilities = [[0.0, 1.0], [1.0, 0.0]]
//! external_liabilities = [4.0, 4.0]
//! initial_liquid_assets = [5.0, 5.0]
//! illiquid_units = [0.0, 0.0]        # optional, zeros by default
//! volatilities = [0.1, 0.1]          # optional
//!
//! [inverse_demand]                   # optional, exp(-2.5e-8 x) by default
//! family = "exponential"
//! nominal_price = 1.0
//! decay = 2.5e-8
//! ```
//!
//! or a calibration recipe:
//!
//! ```toml
//! format = "eba"
//! records = "banks.csv"              # optional, bundled sample by default
//! beta = 0.4
//! decay = 2.5e-8
//! topology = "core-periphery"        # complete | ring | core-periphery | custom
//! core = 10
//! ```
//!
//! Vectors and matrices are plain numbers separated by whitespace or commas;
//! `#` starts a comment.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate, eba_records, read_records, Calibration, CalibrationConfig, CorrelationSource,
    TopologySpec, DEFAULT_BETA, DEFAULT_CORE_SIZE, DEFAULT_DECAY,
};
use crate::error::{Error, ParseError};
use crate::network::{build_network, InverseDemand, Network, RawNetwork};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
enum Document {
    Dense(DenseDocument),
    Eba(EbaDocument),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseDocument {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
    liabilities: Vec<Vec<f64>>,
    external_liabilities: Vec<f64>,
    initial_liquid_assets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    illiquid_units: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    volatilities: Option<Vec<f64>>,
    #[serde(default)]
    inverse_demand: DemandDocument,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
enum DemandDocument {
    Exponential {
        #[serde(default = "one")]
        nominal_price: f64,
        decay: f64,
    },
    Tabulated {
        units: Vec<f64>,
        prices: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for DemandDocument {
    fn default() -> Self {
        DemandDocument::Exponential {
            nominal_price: 1.0,
            decay: DEFAULT_DECAY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EbaDocument {
    #[serde(default)]
    records: Option<String>,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default = "default_decay")]
    decay: f64,
    #[serde(default = "default_topology")]
    topology: String,
    #[serde(default = "default_core")]
    core: usize,
    #[serde(default)]
    adjacency: Option<Vec<Vec<u8>>>,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_decay() -> f64 {
    DEFAULT_DECAY
}
fn default_topology() -> String {
    "core-periphery".into()
}
fn default_core() -> usize {
    DEFAULT_CORE_SIZE
}

/// A parsed network document.
#[derive(Debug, Clone)]
pub struct NetworkDocument {
    pub network: Network,
    pub names: Vec<String>,
    /// Per-bank asset volatilities, if the document provides them.
    pub volatilities: Option<Vec<f64>>,
    /// Present for calibration recipes.
    pub calibration: Option<Calibration>,
}

pub fn read_network(path: &Path) -> Result<NetworkDocument, Error> {
    let text = read_text(path)?;
    parse_network(&text, &path.display().to_string(), path.parent())
}

/// Parses a network document. Relative record paths resolve against `base_dir`.
pub fn parse_network(
    text: &str,
    source_name: &str,
    base_dir: Option<&Path>,
) -> Result<NetworkDocument, Error> {
    let doc: Document = toml::from_str(text).map_err(|e| toml_error(text, source_name, &e))?;
    match doc {
        Document::Dense(d) => dense_network(d, text, source_name),
        Document::Eba(d) => eba_network(d, source_name, base_dir),
    }
}

fn dense_network(d: DenseDocument, text: &str, source_name: &str) -> Result<NetworkDocument, Error> {
    let n = d.n;
    let mut lengths = vec![
        ("liabilities", d.liabilities.len()),
        ("external_liabilities", d.external_liabilities.len()),
        ("initial_liquid_assets", d.initial_liquid_assets.len()),
    ];
    lengths.extend(d.liabilities.iter().map(|r| ("liabilities", r.len())));
    if let Some(v) = &d.illiquid_units {
        lengths.push(("illiquid_units", v.len()));
    }
    if let Some(v) = &d.volatilities {
        lengths.push(("volatilities", v.len()));
    }
    if let Some(v) = &d.names {
        lengths.push(("names", v.len()));
    }
    if let Some((key, len)) = lengths.into_iter().find(|&(_, len)| len != n) {
        let (line, column) = key_location(text, key);
        return Err(ParseError::new(
            source_name,
            line,
            column,
            format!("{key} has length {len}, expected n = {n}"),
        )
        .into());
    }
    let inverse_demand = match d.inverse_demand {
        DemandDocument::Exponential {
            nominal_price,
            decay,
        } => InverseDemand::exponential(nominal_price, decay)?,
        DemandDocument::Tabulated { units, prices } => InverseDemand::tabulated(units, prices)?,
    };
    let network = build_network(RawNetwork {
        liabilities: d.liabilities,
        external_liabilities: d.external_liabilities,
        initial_liquid_assets: d.initial_liquid_assets,
        illiquid_units: d.illiquid_units.unwrap_or_else(|| vec![0.0; n]),
        inverse_demand,
    })?;
    Ok(NetworkDocument {
        names: d.names.unwrap_or_else(|| default_names(n)),
        network,
        volatilities: d.volatilities,
        calibration: None,
    })
}

fn eba_network(
    d: EbaDocument,
    source_name: &str,
    base_dir: Option<&Path>,
) -> Result<NetworkDocument, Error> {
    let records = match &d.records {
        None => eba_records(),
        Some(p) => {
            let path = resolve(base_dir, p);
            let text = read_text(&path)?;
            read_records(text.as_bytes(), &path.display().to_string())?
        }
    };
    let topology = match d.topology.as_str() {
        "complete" => TopologySpec::Complete,
        "ring" => TopologySpec::Ring,
        "core-periphery" => TopologySpec::CorePeriphery { core: d.core },
        "custom" => {
            let adj = d.adjacency.ok_or_else(|| {
                ParseError::new(source_name, 0, 0, "custom topology needs an adjacency matrix")
            })?;
            TopologySpec::Custom(adj.into_iter().map(|r| r.into_iter().map(|x| x != 0).collect()).collect())
        }
        other => {
            return Err(ParseError::new(source_name, 0, 0, format!("unknown topology '{other}'")).into())
        }
    };
    let cal = calibrate(
        &records,
        &CalibrationConfig {
            beta: d.beta,
            decay: d.decay,
            topology,
            correlation: CorrelationSource::Identity,
        },
    )?;
    Ok(NetworkDocument {
        network: cal.network.clone(),
        names: cal.names.clone(),
        volatilities: Some(cal.asset_vols.clone()),
        calibration: Some(cal),
    })
}

/// Dense document for `net`, readable by [`parse_network`].
pub fn to_dense_toml(net: &Network, names: Option<&[String]>, volatilities: Option<&[f64]>) -> String {
    let n = net.len();
    let raw = net.to_raw();
    let inverse_demand = match raw.inverse_demand {
        InverseDemand::Exponential {
            nominal_price,
            decay,
        } => DemandDocument::Exponential {
            nominal_price,
            decay,
        },
        InverseDemand::Tabulated { units, prices } => DemandDocument::Tabulated { units, prices },
    };
    let doc = Document::Dense(DenseDocument {
        n,
        names: names.map(<[String]>::to_vec),
        liabilities: raw.liabilities,
        external_liabilities: raw.external_liabilities,
        initial_liquid_assets: raw.initial_liquid_assets,
        illiquid_units: Some(raw.illiquid_units),
        volatilities: volatilities.map(<[f64]>::to_vec),
        inverse_demand,
    });
    toml::to_string(&doc).expect("dense document serializes")
}

/// Numbers separated by whitespace, commas or newlines.
pub fn parse_vector(text: &str, source_name: &str) -> Result<Vec<f64>, ParseError> {
    Ok(parse_rows(text, source_name)?
        .into_iter()
        .flat_map(|(_, row)| row)
        .collect())
}

/// A square matrix, or a lower triangle given as rows of length 1, 2, ..., n.
pub fn parse_matrix(text: &str, source_name: &str) -> Result<DMatrix<f64>, ParseError> {
    let rows = parse_rows(text, source_name)?;
    let n = rows.len();
    if n == 0 {
        return Err(ParseError::new(source_name, 1, 1, "empty matrix"));
    }
    let square = rows.iter().all(|(_, r)| r.len() == n);
    let triangular = rows.iter().enumerate().all(|(i, (_, r))| r.len() == i + 1);
    if !square && !triangular {
        let (i, (line, row)) = rows
            .iter()
            .enumerate()
            .find(|(i, (_, r))| r.len() != n && r.len() != i + 1)
            .unwrap_or((0, &rows[0]));
        return Err(ParseError::new(
            source_name,
            *line,
            1,
            format!("row {} has {} entries; expected {} (square) or {} (lower triangle)", i + 1, row.len(), n, i + 1),
        ));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, (_, row)) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

// Non-empty lines as (line number, values).
fn parse_rows(text: &str, source_name: &str) -> Result<Vec<(usize, Vec<f64>)>, ParseError> {
    let mut rows = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut values = Vec::new();
        let mut offset = 0;
        for token in line.split(|c: char| c.is_whitespace() || c == ',') {
            let column = offset + 1;
            offset += token.len() + 1;
            if token.is_empty() {
                continue;
            }
            let v: f64 = token.parse().map_err(|_| {
                ParseError::new(source_name, k + 1, column, format!("invalid number '{token}'"))
            })?;
            if !v.is_finite() {
                return Err(ParseError::new(source_name, k + 1, column, format!("non-finite value '{token}'")));
            }
            values.push(v);
        }
        if !values.is_empty() {
            rows.push((k + 1, values));
        }
    }
    Ok(rows)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, Error> {
    Ok(parse_vector(&read_text(path)?, &path.display().to_string())?)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, Error> {
    Ok(parse_matrix(&read_text(path)?, &path.display().to_string())?)
}

pub(crate) fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn resolve(base_dir: Option<&Path>, p: &str) -> PathBuf {
    let path = Path::new(p);
    match base_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("bank{i}")).collect()
}

fn toml_error(text: &str, source_name: &str, e: &toml::de::Error) -> ParseError {
    let (line, column) = e
        .span()
        .map_or((0, 0), |span| line_column(text, span.start));
    ParseError::new(source_name, line, column, e.message().trim())
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

fn key_location(text: &str, key: &str) -> (usize, usize) {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or((0, 0), |i| (i + 1, 1))
}
