//! Asset volatility implied by equity volatility under a one-year Merton model.

use crate::error::CalibrationError;
use crate::estimators::normal_cdf;

const TOL: f64 = 1e-12;
const MAX_FIXED_POINT: usize = 200;
const MAX_BISECTION: usize = 200;

/// Call delta on assets `a` with strike `a - w`, zero rate, unit maturity.
pub fn merton_delta(net_worth: f64, total_assets: f64, sigma: f64) -> f64 {
    let moneyness = (total_assets / (total_assets - net_worth)).ln();
    normal_cdf((moneyness + 0.5 * sigma * sigma) / sigma)
}

/// `sigma * delta(sigma) - (w / a) * equity_vol`.
pub fn merton_residual(net_worth: f64, total_assets: f64, equity_vol: f64, sigma: f64) -> f64 {
    sigma * merton_delta(net_worth, total_assets, sigma) - net_worth / total_assets * equity_vol
}

/// Solves `sigma = (w / a) * equity_vol / delta(sigma)`.
///
/// The delta lies in (1/2, 1), so the root is bracketed by
/// `[(w / a) equity_vol, 2 (w / a) equity_vol]`. A damped fixed-point
/// iteration is tried first and bisection takes over if it stalls.
pub fn merton_asset_vol(
    net_worth: f64,
    total_assets: f64,
    equity_vol: f64,
) -> Result<f64, CalibrationError> {
    let target = net_worth / total_assets * equity_vol;
    let (lo, hi) = (target, 2.0 * target);
    let bad = CalibrationError::Merton { lo, hi };
    if !(net_worth > 0.0 && net_worth < total_assets && equity_vol > 0.0 && target.is_finite()) {
        return Err(bad);
    }
    let g = |s: f64| merton_residual(net_worth, total_assets, equity_vol, s);
    let scale = target.max(f64::MIN_POSITIVE);

    let mut sigma = lo;
    for _ in 0..MAX_FIXED_POINT {
        let next = 0.5 * sigma + 0.5 * target / merton_delta(net_worth, total_assets, sigma);
        if (next - sigma).abs() <= TOL * scale {
            sigma = next;
            break;
        }
        sigma = next;
    }
    if sigma >= lo && sigma <= hi && g(sigma).abs() <= TOL * scale {
        return Ok(sigma);
    }

    let (mut a, mut b) = (lo, hi);
    if g(a) > 0.0 || g(b) < 0.0 {
        return Err(bad);
    }
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
        if b - a <= TOL * scale {
            break;
        }
    }
    let sigma = 0.5 * (a + b);
    if g(sigma).abs() < 1e-10 {
        Ok(sigma)
    } else {
        Err(bad)
    }
}
