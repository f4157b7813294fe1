//! Correlated lognormal external assets.
//!
//! `S_i = S0_i * exp(-sigma_i^2 / 2 + sum_{k <= i} L_ik Z_k)` with `L` lower
//! triangular and `Z` standard normal. The three asymptotic regimes rescale
//! either `S0` or `L` by a multiplier `m`.
//!
//! A model may be stored with its rows in a different order from the banks of
//! the network (see [`ShockModel::with_target_last`]); `bank_of_row` records
//! the mapping and every asset vector produced here is in bank order.

use nalgebra::DMatrix;

use crate::error::ShockError;

/// Tolerance on row norms of a pre-factored correlation matrix.
pub const ROW_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeKind {
    /// `S0 -> m S0`.
    LargeAsset,
    /// `L -> L / m`.
    SmallVolatility,
    /// `L -> m L`.
    LargeVolatility,
}

impl RegimeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::LargeAsset => "large-asset",
            RegimeKind::SmallVolatility => "small-vol",
            RegimeKind::LargeVolatility => "large-vol",
        }
    }
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RegimeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "large-asset" => Ok(RegimeKind::LargeAsset),
            "small-vol" | "small-volatility" => Ok(RegimeKind::SmallVolatility),
            "large-vol" | "large-volatility" => Ok(RegimeKind::LargeVolatility),
            other => Err(format!(
                "unknown regime '{other}' (expected large-asset, small-vol or large-vol)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub kind: RegimeKind,
    pub multiplier: f64,
}

impl Regime {
    pub fn new(kind: RegimeKind, multiplier: f64) -> Result<Self, ShockError> {
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(ShockError::Multiplier(multiplier));
        }
        Ok(Regime { kind, multiplier })
    }

    /// The unscaled model.
    pub fn identity() -> Self {
        Regime {
            kind: RegimeKind::LargeAsset,
            multiplier: 1.0,
        }
    }

    pub fn asset_scale(&self) -> f64 {
        match self.kind {
            RegimeKind::LargeAsset => self.multiplier,
            _ => 1.0,
        }
    }

    pub fn vol_scale(&self) -> f64 {
        match self.kind {
            RegimeKind::LargeAsset => 1.0,
            RegimeKind::SmallVolatility => 1.0 / self.multiplier,
            RegimeKind::LargeVolatility => self.multiplier,
        }
    }
}

/// How to treat a pre-factored correlation matrix whose rows are not unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowNorm {
    /// Reject rows whose norm differs from one by more than [`ROW_NORM_TOL`].
    Strict,
    /// Divide each row by its norm (for matrices printed with rounded entries).
    Renormalize,
}

#[derive(Debug, Clone)]
pub struct ShockModel {
    factor: DMatrix<f64>,
    variances: Vec<f64>,
    // Nonzero entries of each factor row, (column, value).
    rows: Vec<Vec<(usize, f64)>>,
    bank_of_row: Vec<usize>,
}

impl ShockModel {
    /// Builds a model from a lower-triangular factor with positive diagonal.
    pub fn from_factor(factor: DMatrix<f64>) -> Result<Self, ShockError> {
        let n = factor.nrows();
        if factor.ncols() != n || n == 0 {
            return Err(ShockError::Dimension {
                what: "factor columns",
                expected: n,
                found: factor.ncols(),
            });
        }
        for i in 0..n {
            if !(factor[(i, i)] > 0.0) || (i + 1..n).any(|j| factor[(i, j)] != 0.0) {
                return Err(ShockError::NotLowerTriangular { row: i });
            }
            if (0..=i).any(|j| !factor[(i, j)].is_finite()) {
                return Err(ShockError::NotLowerTriangular { row: i });
            }
        }
        let variances = (0..n)
            .map(|i| (0..=i).map(|k| factor[(i, k)].powi(2)).sum())
            .collect();
        let rows = (0..n)
            .map(|i| {
                (0..=i)
                    .filter(|&k| factor[(i, k)] != 0.0)
                    .map(|k| (k, factor[(i, k)]))
                    .collect()
            })
            .collect();
        Ok(ShockModel {
            factor,
            variances,
            rows,
            bank_of_row: (0..n).collect(),
        })
    }

    /// Independent assets: `L = diag(vols)`.
    pub fn uncorrelated(vols: &[f64]) -> Result<Self, ShockError> {
        check_vols(vols)?;
        Self::from_factor(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(vols)))
    }

    /// `L = diag(vols) * r` for a lower-triangular `r` with unit-norm rows.
    pub fn from_correlation_factor(
        vols: &[f64],
        r: &DMatrix<f64>,
        policy: RowNorm,
    ) -> Result<Self, ShockError> {
        let n = vols.len();
        check_vols(vols)?;
        check_square(r, n)?;
        let mut factor = DMatrix::zeros(n, n);
        for i in 0..n {
            if (i + 1..n).any(|j| r[(i, j)] != 0.0) || !(r[(i, i)] > 0.0) {
                return Err(ShockError::NotLowerTriangular { row: i });
            }
            let norm = (0..=i).map(|k| r[(i, k)].powi(2)).sum::<f64>().sqrt();
            let scale = match policy {
                RowNorm::Strict if (norm - 1.0).abs() > ROW_NORM_TOL => {
                    return Err(ShockError::RowNorm { row: i, norm })
                }
                RowNorm::Strict => 1.0,
                RowNorm::Renormalize => 1.0 / norm,
            };
            for k in 0..=i {
                factor[(i, k)] = vols[i] * r[(i, k)] * scale;
            }
        }
        Self::from_factor(factor)
    }

    /// Factorizes a full symmetric correlation matrix.
    pub fn from_correlation_matrix(vols: &[f64], corr: &DMatrix<f64>) -> Result<Self, ShockError> {
        let n = vols.len();
        check_vols(vols)?;
        check_square(corr, n)?;
        let chol = corr
            .clone()
            .cholesky()
            .ok_or(ShockError::NotPositiveDefinite)?;
        let lower = chol.l();
        let mut factor = lower;
        for i in 0..n {
            for k in 0..=i {
                factor[(i, k)] *= vols[i];
            }
        }
        Self::from_factor(factor)
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Diagonal of `L L^T`, in row order.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `bank_of_row()[k]` is the network index of factor row `k`.
    pub fn bank_of_row(&self) -> &[usize] {
        &self.bank_of_row
    }

    /// Bank whose shock is the last factor row.
    pub fn last_bank(&self) -> usize {
        self.bank_of_row[self.len() - 1]
    }

    /// Off-diagonal part of the last factor row.
    pub fn last_row_loadings(&self) -> Vec<f64> {
        let n = self.len();
        (0..n - 1).map(|k| self.factor[(n - 1, k)]).collect()
    }

    /// Diagonal entry of the last factor row.
    pub fn last_diagonal(&self) -> f64 {
        let n = self.len();
        self.factor[(n - 1, n - 1)]
    }

    /// Reorders the model so that `bank`'s shock comes last. The covariance
    /// is preserved; the factor is recomputed by Cholesky decomposition.
    pub fn with_target_last(&self, bank: usize) -> Result<Self, ShockError> {
        let n = self.len();
        let row = self
            .bank_of_row
            .iter()
            .position(|&b| b == bank)
            .ok_or(ShockError::Dimension {
                what: "target bank",
                expected: n,
                found: bank,
            })?;
        if row == n - 1 {
            return Ok(self.clone());
        }
        let order: Vec<usize> = (0..n).filter(|&k| k != row).chain([row]).collect();
        let cov = &self.factor * self.factor.transpose();
        let permuted = DMatrix::from_fn(n, n, |a, b| cov[(order[a], order[b])]);
        let chol = permuted.cholesky().ok_or(ShockError::NotPositiveDefinite)?;
        let mut model = Self::from_factor(chol.l())?;
        model.bank_of_row = order.iter().map(|&k| self.bank_of_row[k]).collect();
        Ok(model)
    }

    /// Writes the assets of the banks on factor `rows` into `out` (bank order).
    /// Other entries of `out` are left untouched.
    pub(crate) fn fill_assets(
        &self,
        regime: &Regime,
        s0: &[f64],
        z: &[f64],
        rows: std::ops::Range<usize>,
        out: &mut [f64],
    ) {
        let a = regime.asset_scale();
        let v = regime.vol_scale();
        for i in rows {
            let mut exponent = 0.0;
            for &(k, l) in &self.rows[i] {
                exponent += v * l * z[k];
            }
            let sig2 = v * v * self.variances[i];
            let bank = self.bank_of_row[i];
            out[bank] = a * s0[bank] * (exponent - 0.5 * sig2).exp();
        }
    }

    /// External asset values for normals `z` (row order), returned in bank order.
    pub fn assets_from_normals(
        &self,
        regime: &Regime,
        s0: &[f64],
        z: &[f64],
    ) -> Result<Vec<f64>, ShockError> {
        let n = self.len();
        self.check_lengths(s0, z, n)?;
        let mut out = vec![0.0; n];
        self.fill_assets(regime, s0, z, 0..n, &mut out);
        Ok(out)
    }

    /// Assets of every bank except the last row's, from `n - 1` normals.
    /// The last row's bank gets 0.
    pub fn partial_assets_from_normals(
        &self,
        regime: &Regime,
        s0: &[f64],
        z_others: &[f64],
    ) -> Result<Vec<f64>, ShockError> {
        let n = self.len();
        self.check_lengths(s0, z_others, n - 1)?;
        let mut out = vec![0.0; n];
        self.fill_assets(regime, s0, z_others, 0..n - 1, &mut out);
        Ok(out)
    }

    /// Value `l` such that the last bank's assets fall below `threshold`
    /// exactly when its own normal is below `-l`.
    pub fn ell_n(
        &self,
        regime: &Regime,
        s0: &[f64],
        threshold: f64,
        z_others: &[f64],
    ) -> Result<f64, ShockError> {
        if !(threshold > 0.0) {
            return Err(ShockError::NonPositiveThreshold(threshold));
        }
        self.check_lengths(s0, z_others, self.len() - 1)?;
        Ok(self.ell_unchecked(regime, s0, threshold, z_others))
    }

    pub(crate) fn ell_unchecked(
        &self,
        regime: &Regime,
        s0: &[f64],
        threshold: f64,
        z_others: &[f64],
    ) -> f64 {
        let n = self.len();
        let a = regime.asset_scale();
        let v = regime.vol_scale();
        let mut drift = 0.0;
        let mut diag = 0.0;
        for &(k, l) in &self.rows[n - 1] {
            if k == n - 1 {
                diag = l;
            } else {
                drift += v * l * z_others[k];
            }
        }
        let bank = self.bank_of_row[n - 1];
        let sig2 = v * v * self.variances[n - 1];
        ((a * s0[bank]).ln() - threshold.ln() - 0.5 * sig2 + drift) / (v * diag)
    }

    fn check_lengths(&self, s0: &[f64], z: &[f64], nz: usize) -> Result<(), ShockError> {
        if s0.len() != self.len() {
            return Err(ShockError::Dimension {
                what: "initial assets",
                expected: self.len(),
                found: s0.len(),
            });
        }
        if z.len() != nz {
            return Err(ShockError::Dimension {
                what: "normal vector",
                expected: nz,
                found: z.len(),
            });
        }
        Ok(())
    }
}

/// Builds a model from vols and a correlation input, which is either a
/// lower-triangular factor with unit rows or a full correlation matrix.
pub fn cholesky_from_correlation(vols: &[f64], r: &DMatrix<f64>) -> Result<ShockModel, ShockError> {
    check_square(r, vols.len())?;
    let n = vols.len();
    let lower = (0..n).all(|i| (i + 1..n).all(|j| r[(i, j)] == 0.0));
    if lower {
        ShockModel::from_correlation_factor(vols, r, RowNorm::Strict)
    } else {
        ShockModel::from_correlation_matrix(vols, r)
    }
}

fn check_vols(vols: &[f64]) -> Result<(), ShockError> {
    if vols.is_empty() {
        return Err(ShockError::Dimension {
            what: "volatilities",
            expected: 1,
            found: 0,
        });
    }
    for (i, &v) in vols.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ShockError::NonPositiveVolatility { bank: i, value: v });
        }
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>, n: usize) -> Result<(), ShockError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(ShockError::Dimension {
            what: "correlation matrix",
            expected: n,
            found: m.nrows().max(m.ncols()),
        });
    }
    Ok(())
}
