//! Joint clearing of interbank payments and the fire-sale price.
//!
//! The equilibrium `(q, p)` solves
//!
//! ```text
//! q   = Q( sum_i min{ (pbar_i - s_i - sum_j pi_ji p_j)^+ / q, e_i } )
//! p_i = min{ pbar_i, s_i + q e_i + sum_j pi_ji p_j }
//! ```
//!
//! The solver alternates two exact sub-steps, starting from `p = pbar`:
//!
//! 1. for fixed payments, the price is the unique root of the scalar market
//!    equation, found by bisection on the liquidated quantity;
//! 2. for a fixed price, payments are the Eisenberg-Noe clearing vector with
//!    cash `s + q e`, computed by the fictitious default algorithm.
//!
//! Both sub-steps are monotone, so the iterates decrease to the greatest
//! (and under the standing assumptions unique) equilibrium.
//!
//! The fictitious system for a target bank is the same computation with that
//! bank *pinned*: it always pays in full and always liquidates its whole
//! illiquid holding.

use nalgebra::DMatrix;

use crate::error::ClearingError;
use crate::network::Network;

const OUTER_TOL: f64 = 1e-12;
const PRICE_BISECTION_STEPS: usize = 200;

/// Relative tolerance for calling a bank defaulted.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingOutcome {
    pub price: f64,
    pub payments: Vec<f64>,
    /// Banks paying less than their total liabilities, ascending.
    pub defaults: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
}

impl ClearingOutcome {
    pub fn is_default(&self, bank: usize) -> bool {
        self.defaults.binary_search(&bank).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FictitiousOutcome {
    pub target: usize,
    pub price: f64,
    /// Payments of the non-target banks in their original order.
    pub payments: Vec<f64>,
    /// Smallest external asset value of the target that keeps it solvent.
    pub threshold: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// True when `paid` falls short of `owed` by more than the default tolerance.
pub fn is_shortfall(paid: f64, owed: f64) -> bool {
    paid < owed - DEFAULT_TOL * owed.max(1.0)
}

/// Clears the system at external asset values `s`.
pub fn clear(net: &Network, s: &[f64]) -> Result<ClearingOutcome, ClearingError> {
    check_assets(net, s, None)?;
    let sol = solve(net, s, None)?;
    let pbar = net.total_liabilities();
    let defaults = (0..net.len())
        .filter(|&i| is_shortfall(sol.payments[i], pbar[i]))
        .collect();
    Ok(ClearingOutcome {
        price: sol.price,
        payments: sol.payments,
        defaults,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// Market-clearing price for fixed payments `p`.
///
/// Inputs are not validated; `p` should satisfy `p <= pbar` and `s >= 0`.
pub fn solve_price_given_payments(net: &Network, s: &[f64], p: &[f64]) -> f64 {
    let n = net.len();
    let mut inflow = vec![0.0; n];
    for j in 0..n {
        for &(i, pi) in net.creditors(j) {
            inflow[i] += pi * p[j];
        }
    }
    let deficits: Vec<f64> = (0..n)
        .map(|i| net.total_liabilities()[i] - s[i] - inflow[i])
        .collect();
    market_price(net, &deficits, None)
}

/// Solves the fictitious system in which `target` pays in full and sells all
/// of its illiquid assets.
///
/// `s_others` holds the external asset values of every bank except `target`,
/// in their original order.
pub fn fictitious_clear(
    net: &Network,
    s_others: &[f64],
    target: usize,
) -> Result<FictitiousOutcome, ClearingError> {
    let n = net.len();
    if target >= n {
        return Err(ClearingError::BankIndex { index: target, n });
    }
    if s_others.len() + 1 != n {
        return Err(ClearingError::InvalidAssets(format!(
            "expected {} values for the non-target banks, got {}",
            n - 1,
            s_others.len()
        )));
    }
    let mut s = Vec::with_capacity(n);
    s.extend_from_slice(&s_others[..target]);
    s.push(0.0);
    s.extend_from_slice(&s_others[target..]);
    fictitious_clear_embedded(net, &s, target)
}

/// As [`fictitious_clear`], but `s` has full length and `s[target]` is ignored.
pub fn fictitious_clear_embedded(
    net: &Network,
    s: &[f64],
    target: usize,
) -> Result<FictitiousOutcome, ClearingError> {
    let n = net.len();
    if target >= n {
        return Err(ClearingError::BankIndex { index: target, n });
    }
    check_assets(net, s, Some(target))?;
    let sol = solve(net, s, Some(target))?;
    let threshold = threshold_from(net, target, sol.price, &sol.payments);
    let mut payments = sol.payments;
    payments.remove(target);
    Ok(FictitiousOutcome {
        target,
        price: sol.price,
        payments,
        threshold,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// Threshold only, skipping the output copies. Used in the sampling loops.
pub(crate) fn threshold(net: &Network, s: &[f64], target: usize) -> Result<f64, ClearingError> {
    let sol = solve(net, s, Some(target))?;
    Ok(threshold_from(net, target, sol.price, &sol.payments))
}

fn threshold_from(net: &Network, target: usize, price: f64, payments: &[f64]) -> f64 {
    let rel = net.relative_liabilities();
    let interbank: f64 = (0..net.len())
        .filter(|&j| j != target)
        .map(|j| rel[(j, target)] * payments[j])
        .sum();
    net.total_liabilities()[target] - price * net.illiquid_units()[target] - interbank
}

/// Whether `target` defaults at `s`, decided through its solvency threshold.
///
/// The boundary `s[target] == threshold` counts as solvent.
pub fn default_indicator_via_threshold(
    net: &Network,
    s: &[f64],
    target: usize,
) -> Result<bool, ClearingError> {
    if target >= net.len() {
        return Err(ClearingError::BankIndex {
            index: target,
            n: net.len(),
        });
    }
    check_assets(net, s, None)?;
    let v = threshold(net, s, target)?;
    Ok(s[target] < v)
}

fn check_assets(net: &Network, s: &[f64], skip: Option<usize>) -> Result<(), ClearingError> {
    if s.len() != net.len() {
        return Err(ClearingError::InvalidAssets(format!(
            "expected {} values, got {}",
            net.len(),
            s.len()
        )));
    }
    for (i, &v) in s.iter().enumerate() {
        if Some(i) != skip && !(v >= 0.0 && v.is_finite()) {
            return Err(ClearingError::InvalidAssets(format!(
                "bank {i} has external assets {v}"
            )));
        }
    }
    Ok(())
}

pub(crate) struct Solution {
    pub price: f64,
    pub payments: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Core solver. `pinned` marks the bank that pays in full and sells everything.
pub(crate) fn solve(
    net: &Network,
    s: &[f64],
    pinned: Option<usize>,
) -> Result<Solution, ClearingError> {
    let n = net.len();
    let pbar = net.total_liabilities();
    let qbar = net.inverse_demand().nominal_price();
    let cap = (50 * n).max(100);

    let mut state = PaymentState::new(net);
    let mut deficits = vec![0.0; n];
    let mut price = f64::NAN;
    let mut residual = f64::INFINITY;

    for iteration in 1..=cap {
        for i in 0..n {
            deficits[i] = pbar[i] - s[i] - state.inflow[i];
        }
        let new_price = market_price(net, &deficits, pinned);
        let dq = if price.is_nan() {
            f64::INFINITY
        } else {
            (new_price - price).abs() / qbar
        };
        // An unchanged price means the payments already solve the system.
        if dq == 0.0 {
            return Ok(Solution {
                price,
                payments: state.payments,
                iterations: iteration,
                residual: 0.0,
            });
        }
        price = new_price;
        let dp = state.clear_at(net, s, price, pinned);
        residual = if dq.is_finite() { dq.max(dp) } else { dp };
        if residual <= OUTER_TOL {
            return Ok(Solution {
                price,
                payments: state.payments,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(ClearingError::NoConvergence {
        iterations: cap,
        residual,
    })
}

/// Payments together with the interbank inflows they generate.
struct PaymentState {
    payments: Vec<f64>,
    inflow: Vec<f64>,
    defaulted: Vec<usize>,
    in_default: Vec<bool>,
}

impl PaymentState {
    fn new(net: &Network) -> Self {
        PaymentState {
            payments: net.total_liabilities().to_vec(),
            inflow: net.nominal_interbank_assets().to_vec(),
            defaulted: Vec::new(),
            in_default: vec![false; net.len()],
        }
    }

    fn refresh_inflow(&mut self, net: &Network) {
        let pbar = net.total_liabilities();
        self.inflow.copy_from_slice(net.nominal_interbank_assets());
        for &j in &self.defaulted {
            let shortfall = pbar[j] - self.payments[j];
            for &(i, pi) in net.creditors(j) {
                self.inflow[i] -= pi * shortfall;
            }
        }
    }

    /// Eisenberg-Noe clearing with cash `s + q e`. The default set from the
    /// previous (higher) price is a valid warm start. Returns the largest
    /// relative payment change.
    fn clear_at(&mut self, net: &Network, s: &[f64], price: f64, pinned: Option<usize>) -> f64 {
        let n = net.len();
        let pbar = net.total_liabilities();
        let e = net.illiquid_units();
        let previous = self.payments.clone();

        let mut dirty = !self.defaulted.is_empty();
        for _ in 0..(4 * n + 8) {
            for i in 0..n {
                if !self.in_default[i]
                    && Some(i) != pinned
                    && s[i] + price * e[i] + self.inflow[i] < pbar[i]
                {
                    self.in_default[i] = true;
                    self.defaulted.push(i);
                    dirty = true;
                }
            }
            if !dirty {
                break;
            }
            self.defaulted.sort_unstable();
            self.solve_defaulted(net, s, price);
            self.refresh_inflow(net);
            dirty = false;

            // Round-off can push a borderline bank back to full payment.
            let before = self.defaulted.len();
            for k in 0..before {
                let i = self.defaulted[k];
                if self.payments[i] >= pbar[i] {
                    self.in_default[i] = false;
                    self.payments[i] = pbar[i];
                }
            }
            let in_default = &self.in_default;
            self.defaulted.retain(|&i| in_default[i]);
            if self.defaulted.len() != before {
                self.refresh_inflow(net);
                dirty = !self.defaulted.is_empty();
            }
        }

        (0..n)
            .map(|i| (self.payments[i] - previous[i]).abs() / pbar[i].max(1.0))
            .fold(0.0, f64::max)
    }

    /// Solves `(I - Pi_DD^T) p_D = s_D + q e_D + inflow from solvent banks`.
    fn solve_defaulted(&mut self, net: &Network, s: &[f64], price: f64) {
        let pbar = net.total_liabilities();
        let e = net.illiquid_units();
        let k = self.defaulted.len();
        let mut pos = vec![usize::MAX; net.len()];
        for (a, &i) in self.defaulted.iter().enumerate() {
            pos[i] = a;
        }
        let mut lhs = DMatrix::<f64>::identity(k, k);
        let mut rhs = nalgebra::DVector::<f64>::zeros(k);
        for (a, &i) in self.defaulted.iter().enumerate() {
            rhs[a] = s[i] + price * e[i] + net.nominal_interbank_assets()[i];
        }
        for (b, &j) in self.defaulted.iter().enumerate() {
            for &(i, pi) in net.creditors(j) {
                let a = pos[i];
                if a != usize::MAX {
                    lhs[(a, b)] -= pi;
                    rhs[a] -= pi * pbar[j];
                }
            }
        }
        let solved = if k == 1 {
            Some(nalgebra::DVector::from_element(1, rhs[0] / lhs[(0, 0)]))
        } else {
            lhs.lu().solve(&rhs)
        };
        // Pi has row sums below one, so I - Pi_DD^T is invertible.
        let solved = solved.expect("payment system is nonsingular");
        for (a, &i) in self.defaulted.iter().enumerate() {
            self.payments[i] = solved[a].max(0.0);
        }
    }
}

/// Root of `q = Q(x)` where `x` is the total quantity sold at price `q` given
/// each bank's cash deficit. Works in `x`: revenue `x Q(x)` rises in `x` while
/// the revenue banks need, `sum_i min(d_i, e_i Q(x))`, falls.
fn market_price(net: &Network, deficits: &[f64], pinned: Option<usize>) -> f64 {
    let ebar = net.total_illiquid();
    if ebar == 0.0 {
        return net.inverse_demand().nominal_price();
    }
    let e = net.illiquid_units();
    let fixed = pinned.map_or(0.0, |t| e[t]);
    let floor = net.floor_price();

    let mut any_seller = false;
    let mut all_exhausted = true;
    for i in 0..e.len() {
        if Some(i) == pinned || e[i] == 0.0 {
            continue;
        }
        if deficits[i] > 0.0 {
            any_seller = true;
        }
        if deficits[i] < e[i] * floor {
            all_exhausted = false;
        }
    }
    if !any_seller {
        return net.price(fixed);
    }
    if all_exhausted {
        return floor;
    }

    let excess = |x: f64| {
        let q = net.price(x);
        let needed: f64 = (0..e.len())
            .filter(|&i| Some(i) != pinned && e[i] > 0.0 && deficits[i] > 0.0)
            .map(|i| deficits[i].min(e[i] * q))
            .sum();
        (x - fixed) * q - needed
    };
    let (mut lo, mut hi) = (fixed, ebar);
    for _ in 0..PRICE_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    net.price(0.5 * (lo + hi))
}
