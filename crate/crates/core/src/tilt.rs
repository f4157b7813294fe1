//! Mean shifts for the outer sampling layer.
//!
//! Every function here expects a [`ShockModel`] whose last row is the target
//! bank (see [`ShockModel::with_target_last`]). Writing `l` for the target's
//! off-diagonal loadings, `d` for its diagonal entry and `sigma^2 = |l|^2 + d^2`,
//! the identity `(l l^T + d^2 I)^{-1} l = l / sigma^2` turns each regime's
//! linear system into a closed form.

use crate::clearing;
use crate::error::ClearingError;
use crate::network::Network;
use crate::optim::{self, Settings};
use crate::shocks::{Regime, RegimeKind, ShockModel};

#[derive(Debug, Clone, PartialEq)]
pub struct TiltVector {
    /// Shift of the non-target normals, in model row order.
    pub mu: Vec<f64>,
    /// `None` for the untilted vector used by the inner-layer-only estimator.
    pub regime: Option<RegimeKind>,
    /// `sigma_n^2 / 2 + ln v_n(0)`, set for the large-asset regime.
    pub kappa: Option<f64>,
    /// Achieved surrogate objective, set for the small-volatility regime.
    pub objective: Option<f64>,
    /// False if the small-volatility search hit its evaluation cap.
    pub converged: bool,
    /// Objective evaluations spent by the search (zero for closed forms).
    pub evaluations: usize,
}

impl TiltVector {
    pub fn zero(len: usize) -> Self {
        TiltVector {
            mu: vec![0.0; len],
            regime: None,
            kappa: None,
            objective: None,
            converged: true,
            evaluations: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mu.iter().all(|&m| m == 0.0)
    }
}

/// Tilt for `regime`, dispatching to the matching closed form or search.
pub fn tilt_for_regime(
    model: &ShockModel,
    net: &Network,
    s0: &[f64],
    regime: &Regime,
) -> Result<TiltVector, ClearingError> {
    match regime.kind {
        RegimeKind::LargeAsset => mu_large_asset(model, net, s0, regime.multiplier),
        RegimeKind::SmallVolatility => mu_small_volatility(model, net, s0, regime.multiplier),
        RegimeKind::LargeVolatility => Ok(mu_large_volatility(model, regime.multiplier)),
    }
}

/// Threshold of the model's last bank when every other bank has no external assets.
pub fn threshold_at_zero(model: &ShockModel, net: &Network) -> Result<f64, ClearingError> {
    let target = model.last_bank();
    let v = clearing::threshold(net, &vec![0.0; net.len()], target)?;
    if v <= 0.0 {
        return Err(ClearingError::NonPositiveThreshold(v));
    }
    Ok(v)
}

/// Large-asset regime: `mu = -(ln(m S0_n) - kappa) l / sigma^2`.
pub fn mu_large_asset(
    model: &ShockModel,
    net: &Network,
    s0: &[f64],
    multiplier: f64,
) -> Result<TiltVector, ClearingError> {
    let n = model.len();
    let sigma2 = model.variances()[n - 1];
    let kappa = 0.5 * sigma2 + threshold_at_zero(model, net)?.ln();
    let gap = (multiplier * s0[model.last_bank()]).ln() - kappa;
    let mu = model
        .last_row_loadings()
        .iter()
        .map(|l| -gap * l / sigma2)
        .collect();
    Ok(TiltVector {
        mu,
        regime: Some(RegimeKind::LargeAsset),
        kappa: Some(kappa),
        objective: None,
        converged: true,
        evaluations: 0,
    })
}

/// Large-volatility regime: `mu = -(m / 2) l`.
pub fn mu_large_volatility(model: &ShockModel, multiplier: f64) -> TiltVector {
    TiltVector {
        mu: model
            .last_row_loadings()
            .iter()
            .map(|l| -0.5 * multiplier * l)
            .collect(),
        regime: Some(RegimeKind::LargeVolatility),
        kappa: None,
        objective: None,
        converged: true,
        evaluations: 0,
    }
}

/// Limit of the scaled default boundary in the small-volatility regime:
/// `(ln S0_n - ln v_n(s_hat(x)) + l.x) / d` with `s_hat_i(x) = S0_i exp((L x)_i)`.
pub fn ell_b_limit(
    model: &ShockModel,
    net: &Network,
    s0: &[f64],
    x: &[f64],
) -> Result<f64, ClearingError> {
    let n = model.len();
    let f = model.factor();
    let rows = model.bank_of_row();
    let mut s_hat = vec![0.0; n];
    for i in 0..n - 1 {
        let drift: f64 = (0..=i).map(|k| f[(i, k)] * x[k]).sum();
        s_hat[rows[i]] = s0[rows[i]] * drift.exp();
    }
    let target = rows[n - 1];
    let v = clearing::threshold(net, &s_hat, target)?;
    if v <= 0.0 {
        return Err(ClearingError::NonPositiveThreshold(v));
    }
    let linear: f64 = (0..n - 1).map(|k| f[(n - 1, k)] * x[k]).sum();
    Ok((s0[target].ln() - v.ln() + linear) / model.last_diagonal())
}

/// Small-volatility regime: `mu = m * argmin { ell_b(x)^2 + |x|^2 }`.
///
/// The objective has kinks wherever a bank of `s_hat(x)` crosses into
/// default, so the minimizer is a derivative-free simplex search restarted
/// from several points along `-l`.
pub fn mu_small_volatility(
    model: &ShockModel,
    net: &Network,
    s0: &[f64],
    multiplier: f64,
) -> Result<TiltVector, ClearingError> {
    let n = model.len();
    let loadings = model.last_row_loadings();
    let mut failure: Option<ClearingError> = None;
    let mut objective = |x: &[f64]| match ell_b_limit(model, net, s0, x) {
        Ok(l) => l * l + x.iter().map(|v| v * v).sum::<f64>(),
        Err(e) => {
            failure.get_or_insert(e);
            f64::INFINITY
        }
    };

    let mut starts = vec![vec![0.0; n - 1]];
    let norm = loadings.iter().map(|l| l * l).sum::<f64>().sqrt();
    if norm > 0.0 {
        for c in [0.5, 1.0, 2.0] {
            starts.push(loadings.iter().map(|l| -c * l / norm).collect());
        }
        // Minimizer when the threshold is locally constant.
        let a = model.last_diagonal() * ell_b_limit(model, net, s0, &vec![0.0; n - 1])?;
        let sigma2 = model.variances()[n - 1];
        starts.push(loadings.iter().map(|l| -a * l / sigma2).collect());
    }

    let settings = Settings::default();
    let mut best: Option<optim::Minimum> = None;
    let mut evaluations = 0;
    for start in &starts {
        let found = optim::nelder_mead(&mut objective, start, 0.25, settings);
        evaluations += found.evaluations;
        if best.as_ref().is_none_or(|b| found.value < b.value) {
            best = Some(found);
        }
    }
    let mut best = best.expect("at least one start");
    // One restart from the winner refreshes a possibly degenerate simplex.
    if n > 2 {
        let again = optim::nelder_mead(&mut objective, &best.x.clone(), 0.05, settings);
        evaluations += again.evaluations;
        if again.value < best.value {
            best = again;
        } else {
            best.converged |= again.converged;
        }
    }
    if let Some(e) = failure {
        if !best.value.is_finite() {
            return Err(e);
        }
    }
    Ok(TiltVector {
        mu: best.x.iter().map(|v| multiplier * v).collect(),
        regime: Some(RegimeKind::SmallVolatility),
        kappa: None,
        objective: Some(best.value),
        converged: best.converged,
        evaluations,
    })
}
