//! Default-probability and bond-price estimators for a target bank.
//!
//! * [`run_mc`]: plain Monte Carlo with a full clearing per trial.
//! * [`run_bliss`]: bi-level importance sampling. The non-target normals are
//!   drawn from a mean-shifted distribution; given them, the solvency
//!   threshold fixes the target's default event `Z_n < -l`, from which `Z_n`
//!   is drawn exactly. Each trial carries the weight `Phi(-l) * L_out`.
//! * [`run_ilis`]: the same with no outer shift.
//! * [`run_gamma_c`]: outer sampling only, estimating the solvency
//!   probability through `Phi(l) * L_out`.
//!
//! Trial `i` uses its own ChaCha stream `i` under a key derived from the
//! seed, so a batch is bit-identical however the trials are scheduled.

mod normal;
mod stats;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::clearing::{self, is_shortfall};
use crate::error::{ClearingError, EstimatorError};
use crate::network::Network;
use crate::shocks::{Regime, RegimeKind, ShockModel};
use crate::tilt::TiltVector;

pub use normal::{log_normal_cdf, normal_cdf, sample_truncated_normal, TAIL_CUTOFF};
pub use stats::{mean, pairwise_sum, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mc,
    Ilis,
    Bliss,
    GammaC,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Ilis => "ilis",
            Method::Bliss => "bliss",
            Method::GammaC => "gamma-c",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mc" => Ok(Method::Mc),
            "ilis" => Ok(Method::Ilis),
            "bliss" => Ok(Method::Bliss),
            "gamma-c" | "gammac" => Ok(Method::GammaC),
            other => Err(format!(
                "unknown method '{other}' (expected mc, ilis, bliss or gamma-c)"
            )),
        }
    }
}

/// What each trial reports on the target's default event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Payoff {
    /// 1 on default: estimates the default probability.
    Indicator,
    /// Recovery rate `p_n / pbar_n` on default.
    Ratio,
    /// Per-trial bond price `1 - (1 - p_n / pbar_n) * weight`.
    Price,
}

impl Payoff {
    pub fn as_str(self) -> &'static str {
        match self {
            Payoff::Indicator => "indicator",
            Payoff::Ratio => "ratio",
            Payoff::Price => "price",
        }
    }
}

impl std::fmt::Display for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Payoff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "indicator" => Ok(Payoff::Indicator),
            "ratio" => Ok(Payoff::Ratio),
            "price" => Ok(Payoff::Price),
            other => Err(format!(
                "unknown payoff '{other}' (expected indicator, ratio or price)"
            )),
        }
    }
}

/// A network, its shock model under one regime, and the target bank.
#[derive(Debug, Clone)]
pub struct Scenario {
    net: Network,
    model: ShockModel,
    regime: Regime,
    target: usize,
}

impl Scenario {
    /// The model is reordered internally so that `target` is its last row.
    pub fn new(
        net: Network,
        model: &ShockModel,
        regime: Regime,
        target: usize,
    ) -> Result<Self, EstimatorError> {
        if model.len() != net.len() {
            return Err(EstimatorError::Config(format!(
                "shock model has {} banks, network has {}",
                model.len(),
                net.len()
            )));
        }
        if target >= net.len() {
            return Err(EstimatorError::Solver(ClearingError::BankIndex {
                index: target,
                n: net.len(),
            }));
        }
        let model = model.with_target_last(target)?;
        Ok(Scenario {
            net,
            model,
            regime,
            target,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// The shock model with the target as last row.
    pub fn model(&self) -> &ShockModel {
        &self.model
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn initial_assets(&self) -> &[f64] {
        self.net.initial_liquid_assets()
    }

    pub fn with_regime(&self, regime: Regime) -> Self {
        Scenario {
            regime,
            ..self.clone()
        }
    }

    /// Outer mean shift appropriate for this scenario's regime.
    pub fn tilt(&self) -> Result<TiltVector, EstimatorError> {
        Ok(crate::tilt::tilt_for_regime(
            &self.model,
            &self.net,
            self.initial_assets(),
            &self.regime,
        )?)
    }
}

/// Per-trial outputs of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBatch {
    pub method: Method,
    pub payoff: Payoff,
    pub seed: u64,
    /// Weighted payoff of each trial, in trial order.
    pub values: Vec<f64>,
    /// Trials in which the target's default event was observed or forced.
    pub events: usize,
    pub runtime_sec: f64,
}

impl TrialBatch {
    pub fn trials(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub method: Method,
    pub payoff: Payoff,
    pub trials: usize,
    pub estimate: f64,
    pub variance: f64,
    pub std_error: f64,
    /// `std_error / estimate`, only for positive estimates.
    pub rel_error: Option<f64>,
    pub runtime_sec: f64,
    pub events: usize,
}

impl EstimatorResult {
    /// `(var_ref * t_ref) / (var * t)`; `None` when either product is zero.
    pub fn efficiency_vs(&self, reference: &EstimatorResult) -> Option<f64> {
        let ours = self.variance * self.runtime_sec;
        let theirs = reference.variance * reference.runtime_sec;
        (ours > 0.0 && theirs > 0.0).then(|| theirs / ours)
    }
}

pub fn aggregate(batch: &TrialBatch) -> Result<EstimatorResult, EstimatorError> {
    let n = batch.values.len();
    if n == 0 {
        return Err(EstimatorError::EmptyBatch);
    }
    let estimate = stats::mean(&batch.values);
    let variance = stats::sample_variance(&batch.values);
    let std_error = (variance / n as f64).sqrt();
    Ok(EstimatorResult {
        method: batch.method,
        payoff: batch.payoff,
        trials: n,
        estimate,
        variance,
        std_error,
        rel_error: (estimate > 0.0).then(|| std_error / estimate),
        runtime_sec: batch.runtime_sec,
        events: batch.events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondPrice {
    pub price: f64,
    pub std_error: f64,
    /// `-ln(price)` in basis points.
    pub yield_bps: f64,
}

impl BondPrice {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let price = stats::mean(values);
        let std_error = (stats::sample_variance(values) / n as f64).sqrt();
        BondPrice {
            price,
            std_error,
            yield_bps: yield_bps(price),
        }
    }
}

/// Continuously compounded one-period yield in basis points.
pub fn yield_bps(price: f64) -> f64 {
    let y = -price.ln() * 1e4;
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

/// Price from a batch run with [`Payoff::Price`].
pub fn bond_price(batch: &TrialBatch) -> Result<BondPrice, EstimatorError> {
    if batch.values.is_empty() {
        return Err(EstimatorError::EmptyBatch);
    }
    if batch.payoff != Payoff::Price {
        return Err(EstimatorError::Config(format!(
            "bond_price needs a price-payoff batch, got {}",
            batch.payoff
        )));
    }
    Ok(BondPrice::from_values(&batch.values))
}

/// Price `1 - E[1{default}] + E[recovery 1{default}]` from two batches drawn
/// with common random numbers (same method and seed).
pub fn bond_price_from_terms(
    indicator: &TrialBatch,
    ratio: &TrialBatch,
) -> Result<BondPrice, EstimatorError> {
    if indicator.values.is_empty() {
        return Err(EstimatorError::EmptyBatch);
    }
    if indicator.payoff != Payoff::Indicator || ratio.payoff != Payoff::Ratio {
        return Err(EstimatorError::Unpaired(
            "expected an indicator batch and a ratio batch".into(),
        ));
    }
    if indicator.method != ratio.method
        || indicator.seed != ratio.seed
        || indicator.values.len() != ratio.values.len()
    {
        return Err(EstimatorError::Unpaired(
            "batches differ in method, seed or trial count".into(),
        ));
    }
    let per_trial: Vec<f64> = indicator
        .values
        .iter()
        .zip(&ratio.values)
        .map(|(d, r)| 1.0 - d + r)
        .collect();
    Ok(BondPrice::from_values(&per_trial))
}

/// Naive Monte Carlo.
pub fn run_mc(
    scenario: &Scenario,
    payoff: Payoff,
    trials: usize,
    seed: u64,
) -> Result<TrialBatch, EstimatorError> {
    run_trials(Method::Mc, payoff, trials, seed, |rng, trial| {
        mc_trial(scenario, payoff, rng, trial)
    })
}

/// Inner-layer importance sampling: [`run_bliss`] without an outer shift.
pub fn run_ilis(
    scenario: &Scenario,
    payoff: Payoff,
    trials: usize,
    seed: u64,
) -> Result<TrialBatch, EstimatorError> {
    let zero = TiltVector::zero(scenario.net.len() - 1);
    let mut batch = run_bliss(scenario, payoff, trials, seed, &zero)?;
    batch.method = Method::Ilis;
    Ok(batch)
}

/// Bi-level importance sampling with outer shift `tilt`.
pub fn run_bliss(
    scenario: &Scenario,
    payoff: Payoff,
    trials: usize,
    seed: u64,
    tilt: &TiltVector,
) -> Result<TrialBatch, EstimatorError> {
    check_tilt(scenario, tilt)?;
    let shift = OuterShift::new(&tilt.mu);
    run_trials(Method::Bliss, payoff, trials, seed, |rng, trial| {
        bliss_trial(scenario, payoff, &shift, rng, trial).map(|t| (t.value, true))
    })
}

/// Solvency probability in the large-volatility regime.
pub fn run_gamma_c(
    scenario: &Scenario,
    trials: usize,
    seed: u64,
    tilt: &TiltVector,
) -> Result<TrialBatch, EstimatorError> {
    if scenario.regime.kind != RegimeKind::LargeVolatility {
        return Err(EstimatorError::Config(format!(
            "the solvency estimator needs the large-vol regime, got {}",
            scenario.regime.kind
        )));
    }
    check_tilt(scenario, tilt)?;
    let shift = OuterShift::new(&tilt.mu);
    run_trials(Method::GammaC, Payoff::Indicator, trials, seed, |rng, trial| {
        let outer = outer_layer(scenario, &shift, rng, trial)?;
        let value = (normal::log_normal_cdf(outer.ell) + shift.log_ratio(&outer.z)).exp();
        finite(value, trial, &outer.z).map(|v| (v, false))
    })
}

fn check_tilt(scenario: &Scenario, tilt: &TiltVector) -> Result<(), EstimatorError> {
    let expected = scenario.net.len() - 1;
    if tilt.mu.len() != expected {
        return Err(EstimatorError::TiltLength {
            expected,
            found: tilt.mu.len(),
        });
    }
    Ok(())
}

fn run_trials<F>(
    method: Method,
    payoff: Payoff,
    trials: usize,
    seed: u64,
    trial: F,
) -> Result<TrialBatch, EstimatorError>
where
    F: Fn(&mut ChaCha8Rng, usize) -> Result<(f64, bool), EstimatorError> + Sync,
{
    if trials == 0 {
        return Err(EstimatorError::EmptyBatch);
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let results: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = base.clone();
            rng.set_stream(i as u64);
            trial(&mut rng, i)
        })
        .collect::<Result<_, _>>()?;
    let runtime_sec = start.elapsed().as_secs_f64();
    let events = results.iter().filter(|r| r.1).count();
    Ok(TrialBatch {
        method,
        payoff,
        seed,
        values: results.into_iter().map(|r| r.0).collect(),
        events,
        runtime_sec,
    })
}

fn finite(value: f64, trial: usize, z: &[f64]) -> Result<f64, EstimatorError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EstimatorError::NonFinite {
            trial,
            value,
            z: z.to_vec(),
        })
    }
}

fn mc_trial(
    scenario: &Scenario,
    payoff: Payoff,
    rng: &mut ChaCha8Rng,
    trial: usize,
) -> Result<(f64, bool), EstimatorError> {
    let n = scenario.net.len();
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let mut s = vec![0.0; n];
    scenario
        .model
        .fill_assets(&scenario.regime, scenario.initial_assets(), &z, 0..n, &mut s);
    let sol = clearing::solve(&scenario.net, &s, None)
        .map_err(|source| EstimatorError::Clearing { trial, source })?;
    let owed = scenario.net.total_liabilities()[scenario.target];
    let paid = sol.payments[scenario.target];
    let default = is_shortfall(paid, owed);
    let recovery = paid / owed;
    let value = match (payoff, default) {
        (Payoff::Indicator, true) => 1.0,
        (Payoff::Ratio, true) => recovery,
        (Payoff::Price, true) => recovery,
        (Payoff::Price, false) => 1.0,
        (_, false) => 0.0,
    };
    Ok((value, default))
}

/// Precomputed pieces of the outer likelihood ratio
/// `exp(|mu|^2 / 2 - mu . z)`.
struct OuterShift<'a> {
    mu: &'a [f64],
    half_norm2: f64,
}

impl<'a> OuterShift<'a> {
    fn new(mu: &'a [f64]) -> Self {
        OuterShift {
            mu,
            half_norm2: 0.5 * mu.iter().map(|m| m * m).sum::<f64>(),
        }
    }

    fn log_ratio(&self, z: &[f64]) -> f64 {
        if self.half_norm2 == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.mu.iter().zip(z).map(|(m, x)| m * x).sum();
        self.half_norm2 - dot
    }
}

struct Outer {
    z: Vec<f64>,
    s: Vec<f64>,
    threshold: f64,
    ell: f64,
}

/// Draws the shifted non-target normals, builds the partial asset vector and
/// finds the target's default boundary `l`.
fn outer_layer(
    scenario: &Scenario,
    shift: &OuterShift,
    rng: &mut ChaCha8Rng,
    trial: usize,
) -> Result<Outer, EstimatorError> {
    let n = scenario.net.len();
    let z: Vec<f64> = shift
        .mu
        .iter()
        .map(|m| {
            let e: f64 = StandardNormal.sample(rng);
            m + e
        })
        .collect();
    let mut s = vec![0.0; n];
    let s0 = scenario.initial_assets();
    scenario
        .model
        .fill_assets(&scenario.regime, s0, &z, 0..n - 1, &mut s);
    let threshold = clearing::threshold(&scenario.net, &s, scenario.target)
        .map_err(|source| EstimatorError::Clearing { trial, source })?;
    if !(threshold > 0.0) {
        return Err(EstimatorError::Clearing {
            trial,
            source: ClearingError::NonPositiveThreshold(threshold),
        });
    }
    let ell = scenario.model.ell_unchecked(&scenario.regime, s0, threshold, &z);
    Ok(Outer {
        z,
        s,
        threshold,
        ell,
    })
}

/// Everything one bi-level trial produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDetail {
    /// Non-target normals (model row order) followed, when drawn, by the
    /// target's own normal.
    pub normals: Vec<f64>,
    /// External assets in bank order; the target entry is 0 when its normal
    /// was not drawn (indicator payoff).
    pub assets: Vec<f64>,
    pub threshold: f64,
    pub ell: f64,
    /// `ln(Phi(-l) * L_out)`.
    pub log_weight: f64,
    pub value: f64,
}

/// Replays trial `trial` of [`run_bliss`] with the same seed.
pub fn bliss_trial_detail(
    scenario: &Scenario,
    payoff: Payoff,
    seed: u64,
    tilt: &TiltVector,
    trial: usize,
) -> Result<TrialDetail, EstimatorError> {
    check_tilt(scenario, tilt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    bliss_trial(scenario, payoff, &OuterShift::new(&tilt.mu), &mut rng, trial)
}

fn bliss_trial(
    scenario: &Scenario,
    payoff: Payoff,
    shift: &OuterShift,
    rng: &mut ChaCha8Rng,
    trial: usize,
) -> Result<TrialDetail, EstimatorError> {
    let Outer {
        mut z,
        mut s,
        threshold,
        ell,
    } = outer_layer(scenario, shift, rng, trial)?;
    let log_weight = normal::log_normal_cdf(-ell) + shift.log_ratio(&z);
    let weight = log_weight.exp();
    let value = match payoff {
        // The payoff is constant on the default event, so the inner draw is moot.
        Payoff::Indicator => weight,
        Payoff::Ratio | Payoff::Price => {
            let n = scenario.net.len();
            z.push(normal::sample_truncated_normal(-ell, rng));
            scenario.model.fill_assets(
                &scenario.regime,
                scenario.initial_assets(),
                &z,
                n - 1..n,
                &mut s,
            );
            let sol = clearing::solve(&scenario.net, &s, None)
                .map_err(|source| EstimatorError::Clearing { trial, source })?;
            let recovery = sol.payments[scenario.target]
                / scenario.net.total_liabilities()[scenario.target];
            if payoff == Payoff::Ratio {
                recovery * weight
            } else {
                1.0 - (1.0 - recovery) * weight
            }
        }
    };
    let value = finite(value, trial, &z)?;
    Ok(TrialDetail {
        normals: z,
        assets: s,
        threshold,
        ell,
        log_weight,
        value,
    })
}
