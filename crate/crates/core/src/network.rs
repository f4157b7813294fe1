//! Balance-sheet data model of the banking system.
//!
//! A [`Network`] is immutable once built. Every derived quantity (total
//! liabilities, the relative liability matrix, the aggregate illiquid
//! holding) is computed from the nominal liabilities at construction, so the
//! nominal matrix stays the single source of truth.

use nalgebra::DMatrix;

use crate::clearing;
use crate::error::NetworkError;

/// Inverse demand function for the single illiquid asset.
#[derive(Debug, Clone, PartialEq)]
pub enum InverseDemand {
    /// `Q(x) = nominal_price * exp(-decay * x)`.
    Exponential { nominal_price: f64, decay: f64 },
    /// Piecewise-linear curve through `(units[k], prices[k])`, `units[0] = 0`.
    Tabulated { units: Vec<f64>, prices: Vec<f64> },
}

impl InverseDemand {
    pub fn exponential(nominal_price: f64, decay: f64) -> Result<Self, NetworkError> {
        if !(nominal_price > 0.0 && nominal_price.is_finite()) {
            return Err(NetworkError::InverseDemand(format!(
                "nominal price must be positive, got {nominal_price}"
            )));
        }
        if !(decay >= 0.0 && decay.is_finite()) {
            return Err(NetworkError::InverseDemand(format!(
                "decay rate must be non-negative, got {decay}"
            )));
        }
        Ok(InverseDemand::Exponential {
            nominal_price,
            decay,
        })
    }

    /// Tabulated curve. Knots must start at zero, increase strictly in `x`
    /// and decrease strictly in price, with all prices positive.
    pub fn tabulated(units: Vec<f64>, prices: Vec<f64>) -> Result<Self, NetworkError> {
        if units.len() != prices.len() || units.len() < 2 {
            return Err(NetworkError::InverseDemand(
                "a table needs at least two (units, price) knots of equal length".into(),
            ));
        }
        if units[0] != 0.0 {
            return Err(NetworkError::InverseDemand("first knot must be at x = 0".into()));
        }
        for k in 1..units.len() {
            if !(units[k] > units[k - 1]) {
                return Err(NetworkError::InverseDemand(format!(
                    "knots must increase strictly (knot {k})"
                )));
            }
            if !(prices[k] < prices[k - 1]) {
                return Err(NetworkError::InverseDemand(format!(
                    "prices must decrease strictly (knot {k})"
                )));
            }
        }
        if !prices.iter().all(|p| *p > 0.0 && p.is_finite()) {
            return Err(NetworkError::InverseDemand("prices must be positive".into()));
        }
        Ok(InverseDemand::Tabulated { units, prices })
    }

    /// `Q(0)`.
    pub fn nominal_price(&self) -> f64 {
        match self {
            InverseDemand::Exponential { nominal_price, .. } => *nominal_price,
            InverseDemand::Tabulated { prices, .. } => prices[0],
        }
    }

    /// Largest liquidation amount the curve is defined for.
    pub fn max_units(&self) -> f64 {
        match self {
            InverseDemand::Exponential { .. } => f64::INFINITY,
            InverseDemand::Tabulated { units, .. } => *units.last().unwrap(),
        }
    }

    /// Unchecked evaluation; `x` is clamped into the curve's own support.
    pub(crate) fn value(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            InverseDemand::Exponential {
                nominal_price,
                decay,
            } => nominal_price * (-decay * x).exp(),
            InverseDemand::Tabulated { units, prices } => {
                let last = units.len() - 1;
                if x >= units[last] {
                    return prices[last];
                }
                let k = units.partition_point(|u| *u <= x).max(1);
                let (x0, x1) = (units[k - 1], units[k]);
                let t = (x - x0) / (x1 - x0);
                prices[k - 1] + t * (prices[k] - prices[k - 1])
            }
        }
    }

    /// Checks Assumption 1 on `[0, bound]`. Returns the failures found.
    fn assumption_failures(&self, bound: f64) -> Vec<(&'static str, f64, String)> {
        let mut failures = Vec::new();
        let q0 = self.value(0.0);
        let qe = self.value(bound);
        if !(q0 > qe && qe > 0.0) {
            failures.push((
                "1a",
                bound,
                format!("need Q(0) > Q(ebar) > 0, got Q(0) = {q0}, Q({bound}) = {qe}"),
            ));
        }
        match self {
            InverseDemand::Exponential { decay, .. } => {
                if *decay <= 0.0 {
                    failures.push(("1b", 0.0, "decay rate must be positive".into()));
                }
                if decay * bound >= 1.0 {
                    failures.push((
                        "1c",
                        1.0 / decay,
                        format!("x Q(x) peaks at x = 1/nu = {} inside [0, {bound}]", 1.0 / decay),
                    ));
                }
            }
            InverseDemand::Tabulated { units, prices } => {
                // Q is linear on each segment, so x Q(x) has slope a + 2 b x there,
                // which is smallest at the right end of the segment.
                for k in 1..units.len() {
                    let (x0, x1) = (units[k - 1], units[k]);
                    if x0 >= bound {
                        break;
                    }
                    let slope = (prices[k] - prices[k - 1]) / (x1 - x0);
                    let intercept = prices[k - 1] - slope * x0;
                    let right = x1.min(bound);
                    if intercept + 2.0 * slope * right <= 0.0 {
                        failures.push((
                            "1c",
                            right,
                            format!("x Q(x) is not increasing near x = {right}"),
                        ));
                        break;
                    }
                }
            }
        }
        failures
    }
}

/// Unvalidated balance-sheet inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RawNetwork {
    /// Row-major `n x n` matrix of nominal interbank liabilities (`[i][j]`: i owes j).
    pub liabilities: Vec<Vec<f64>>,
    pub external_liabilities: Vec<f64>,
    pub initial_liquid_assets: Vec<f64>,
    pub illiquid_units: Vec<f64>,
    pub inverse_demand: InverseDemand,
}

#[derive(Debug, Clone)]
pub struct Network {
    nominal: DMatrix<f64>,
    external: Vec<f64>,
    total: Vec<f64>,
    relative: DMatrix<f64>,
    liquid: Vec<f64>,
    illiquid: Vec<f64>,
    total_illiquid: f64,
    demand: InverseDemand,
    // creditors[j] = [(i, pi_ji)] : banks that receive payments from j.
    creditors: Vec<Vec<(usize, f64)>>,
    // sum_j pi_ji * pbar_j, the interbank assets when everyone pays in full.
    nominal_inflow: Vec<f64>,
}

/// Builds a [`Network`] from raw inputs, checking dimensions and signs.
pub fn build_network(raw: RawNetwork) -> Result<Network, NetworkError> {
    let n = raw.external_liabilities.len();
    if n == 0 {
        return Err(NetworkError::Empty);
    }
    let check_len = |what: &'static str, len: usize| {
        if len != n {
            Err(NetworkError::Dimension {
                what,
                expected: n,
                found: len,
            })
        } else {
            Ok(())
        }
    };
    check_len("liabilities", raw.liabilities.len())?;
    for row in &raw.liabilities {
        check_len("liabilities row", row.len())?;
    }
    check_len("initial_liquid_assets", raw.initial_liquid_assets.len())?;
    check_len("illiquid_units", raw.illiquid_units.len())?;

    let mut nominal = DMatrix::zeros(n, n);
    for (i, row) in raw.liabilities.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(NetworkError::NegativeEntry {
                    what: "liabilities",
                    index: (i, j),
                    value: v,
                });
            }
            if i == j && v != 0.0 {
                return Err(NetworkError::NonzeroDiagonal { bank: i, value: v });
            }
            nominal[(i, j)] = v;
        }
    }
    for (i, &v) in raw.external_liabilities.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(NetworkError::NonPositiveExternal { bank: i, value: v });
        }
    }
    for (i, &v) in raw.initial_liquid_assets.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(NetworkError::NonPositiveLiquid { bank: i, value: v });
        }
    }
    for (i, &v) in raw.illiquid_units.iter().enumerate() {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(NetworkError::NegativeEntry {
                what: "illiquid_units",
                index: (i, 0),
                value: v,
            });
        }
    }
    let total_illiquid: f64 = raw.illiquid_units.iter().sum();
    if raw.inverse_demand.max_units() < total_illiquid {
        return Err(NetworkError::InverseDemand(format!(
            "table covers [0, {}] but total illiquid holdings are {total_illiquid}",
            raw.inverse_demand.max_units()
        )));
    }

    let total: Vec<f64> = (0..n)
        .map(|i| raw.external_liabilities[i] + nominal.row(i).sum())
        .collect();
    let relative = DMatrix::from_fn(n, n, |i, j| {
        if total[i] > 0.0 {
            nominal[(i, j)] / total[i]
        } else {
            0.0
        }
    });
    let mut creditors = vec![Vec::new(); n];
    let mut nominal_inflow = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            let pi = relative[(j, i)];
            if pi > 0.0 {
                creditors[j].push((i, pi));
                nominal_inflow[i] += pi * total[j];
            }
        }
    }

    Ok(Network {
        nominal,
        external: raw.external_liabilities,
        total,
        relative,
        liquid: raw.initial_liquid_assets,
        illiquid: raw.illiquid_units,
        total_illiquid,
        demand: raw.inverse_demand,
        creditors,
        nominal_inflow,
    })
}

impl Network {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    /// `pbar_ij`.
    pub fn nominal_liabilities(&self) -> &DMatrix<f64> {
        &self.nominal
    }

    /// `pbar_i0`.
    pub fn external_liabilities(&self) -> &[f64] {
        &self.external
    }

    /// `pbar_i = pbar_i0 + sum_j pbar_ij`.
    pub fn total_liabilities(&self) -> &[f64] {
        &self.total
    }

    /// `Pi` with `pi_ij = pbar_ij / pbar_i`.
    pub fn relative_liabilities(&self) -> &DMatrix<f64> {
        &self.relative
    }

    /// `S^0`.
    pub fn initial_liquid_assets(&self) -> &[f64] {
        &self.liquid
    }

    /// `e_i`.
    pub fn illiquid_units(&self) -> &[f64] {
        &self.illiquid
    }

    /// `ebar = sum_i e_i`.
    pub fn total_illiquid(&self) -> f64 {
        self.total_illiquid
    }

    pub fn inverse_demand(&self) -> &InverseDemand {
        &self.demand
    }

    /// Interbank assets of each bank when every debtor pays in full.
    pub fn nominal_interbank_assets(&self) -> &[f64] {
        &self.nominal_inflow
    }

    pub(crate) fn creditors(&self, debtor: usize) -> &[(usize, f64)] {
        &self.creditors[debtor]
    }

    /// Price of the illiquid asset after liquidating `x` units, clamped to `[0, ebar]`.
    pub(crate) fn price(&self, x: f64) -> f64 {
        self.demand.value(x.min(self.total_illiquid))
    }

    /// `Q(ebar)`, the lowest attainable price.
    pub(crate) fn floor_price(&self) -> f64 {
        self.demand.value(self.total_illiquid)
    }

    /// Net worth `w_i = S_i^0 + sum_j pbar_ji + e_i qbar - pbar_i`.
    pub fn net_worth(&self) -> Vec<f64> {
        let qbar = self.demand.nominal_price();
        (0..self.len())
            .map(|i| self.liquid[i] + self.nominal_inflow[i] + self.illiquid[i] * qbar - self.total[i])
            .collect()
    }

    /// Copy of this network with the initial liquid assets replaced.
    pub fn with_initial_liquid_assets(&self, liquid: Vec<f64>) -> Result<Network, NetworkError> {
        if liquid.len() != self.len() {
            return Err(NetworkError::Dimension {
                what: "initial_liquid_assets",
                expected: self.len(),
                found: liquid.len(),
            });
        }
        build_network(RawNetwork {
            initial_liquid_assets: liquid,
            ..self.to_raw()
        })
    }

    pub fn to_raw(&self) -> RawNetwork {
        let n = self.len();
        RawNetwork {
            liabilities: (0..n)
                .map(|i| (0..n).map(|j| self.nominal[(i, j)]).collect())
                .collect(),
            external_liabilities: self.external.clone(),
            initial_liquid_assets: self.liquid.clone(),
            illiquid_units: self.illiquid.clone(),
            inverse_demand: self.demand.clone(),
        }
    }
}

/// Evaluates `Q(x)` for `x` in `[0, ebar]`.
pub fn eval_inverse_demand(net: &Network, x: f64) -> Result<f64, NetworkError> {
    let bound = net.total_illiquid();
    if !(x >= 0.0 && x <= bound) {
        return Err(NetworkError::OutOfDomain { x, bound });
    }
    Ok(net.inverse_demand().value(x))
}

/// Where a failed check points.
#[derive(Debug, Clone, PartialEq)]
pub enum Offender {
    Bank(usize),
    Units(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckOutcome {
    Pass,
    /// Holds trivially, e.g. Assumption 1 when no bank holds illiquid assets.
    Vacuous(String),
    Fail { offender: Offender, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub id: &'static str,
    pub description: &'static str,
    pub outcome: CheckOutcome,
}

impl AssumptionCheck {
    pub fn passed(&self) -> bool {
        !matches!(self.outcome, CheckOutcome::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(AssumptionCheck::passed)
    }

    pub fn check(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            match &c.outcome {
                CheckOutcome::Pass => writeln!(f, "[pass] {:<4} {}", c.id, c.description)?,
                CheckOutcome::Vacuous(why) => {
                    writeln!(f, "[pass] {:<4} {} ({why})", c.id, c.description)?
                }
                CheckOutcome::Fail { offender, detail } => {
                    let at = match offender {
                        Offender::Bank(i) => format!("bank {i}"),
                        Offender::Units(x) => format!("x = {x}"),
                    };
                    writeln!(f, "[FAIL] {:<4} {} at {at}: {detail}", c.id, c.description)?
                }
            }
        }
        Ok(())
    }
}

const DESC_1A: &str = "Q(0) > Q(ebar) > 0";
const DESC_1B: &str = "Q strictly decreasing on [0, ebar]";
const DESC_1C: &str = "x Q(x) strictly increasing on [0, ebar]";
const DESC_2: &str = "pbar_i >= 1 + qbar e_i + sum_j pi_ji pbar_j";
const DESC_S0: &str = "every bank solvent at s = S^0";

/// Runs the standing-assumption checks. Failures are report entries.
pub fn validate_assumptions(net: &Network) -> ValidationReport {
    let mut checks = Vec::with_capacity(5);
    let bound = net.total_illiquid();

    if bound == 0.0 {
        for (id, desc) in [("1a", DESC_1A), ("1b", DESC_1B), ("1c", DESC_1C)] {
            checks.push(AssumptionCheck {
                id,
                description: desc,
                outcome: CheckOutcome::Vacuous("no illiquid holdings, ebar = 0".into()),
            });
        }
    } else {
        let failures = net.demand.assumption_failures(bound);
        for (id, desc) in [("1a", DESC_1A), ("1b", DESC_1B), ("1c", DESC_1C)] {
            let outcome = match failures.iter().find(|f| f.0 == id) {
                Some((_, x, detail)) => CheckOutcome::Fail {
                    offender: Offender::Units(*x),
                    detail: detail.clone(),
                },
                None => CheckOutcome::Pass,
            };
            checks.push(AssumptionCheck {
                id,
                description: desc,
                outcome,
            });
        }
    }

    let qbar = net.demand.nominal_price();
    let balance = (0..net.len()).find_map(|i| {
        let required = 1.0 + qbar * net.illiquid[i] + net.nominal_inflow[i];
        (net.total[i] < required).then(|| CheckOutcome::Fail {
            offender: Offender::Bank(i),
            detail: format!(
                "pbar = {} but illiquid plus interbank assets plus one is {required}",
                net.total[i]
            ),
        })
    });
    checks.push(AssumptionCheck {
        id: "2",
        description: DESC_2,
        outcome: balance.unwrap_or(CheckOutcome::Pass),
    });

    let solvency = match clearing::clear(net, &net.liquid) {
        Ok(out) => match out.defaults.first() {
            Some(&i) => CheckOutcome::Fail {
                offender: Offender::Bank(i),
                detail: format!(
                    "{} bank(s) default at S^0; bank {} pays {} of {}",
                    out.defaults.len(),
                    i,
                    out.payments[i],
                    net.total[i]
                ),
            },
            None => CheckOutcome::Pass,
        },
        Err(e) => CheckOutcome::Fail {
            offender: Offender::Bank(0),
            detail: format!("clearing at S^0 failed: {e}"),
        },
    };
    checks.push(AssumptionCheck {
        id: "S0",
        description: DESC_S0,
        outcome: solvency,
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bank() -> RawNetwork {
        RawNetwork {
            liabilities: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            external_liabilities: vec![4.0, 4.0],
            initial_liquid_assets: vec![5.0, 5.0],
            illiquid_units: vec![0.0, 0.0],
            inverse_demand: InverseDemand::exponential(1.0, 0.0).unwrap(),
        }
    }

    #[test]
    fn two_bank_derived_quantities() {
        let net = build_network(two_bank()).unwrap();
        assert_eq!(net.total_liabilities(), &[5.0, 5.0]);
        assert!((net.relative_liabilities()[(0, 1)] - 0.2).abs() < 1e-15);
        assert!((net.relative_liabilities()[(1, 0)] - 0.2).abs() < 1e-15);
        assert_eq!(net.nominal_interbank_assets(), &[1.0, 1.0]);
    }

    #[test]
    fn single_bank_has_zero_relative_matrix() {
        let net = build_network(RawNetwork {
            liabilities: vec![vec![0.0]],
            external_liabilities: vec![1.0],
            initial_liquid_assets: vec![2.0],
            illiquid_units: vec![0.0],
            inverse_demand: InverseDemand::exponential(1.0, 0.0).unwrap(),
        })
        .unwrap();
        assert_eq!(net.relative_liabilities()[(0, 0)], 0.0);
        assert_eq!(net.total_liabilities(), &[1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut raw = two_bank();
        raw.external_liabilities[1] = 0.0;
        assert!(matches!(
            build_network(raw),
            Err(NetworkError::NonPositiveExternal { bank: 1, .. })
        ));

        let mut raw = two_bank();
        raw.liabilities[0][0] = 0.5;
        assert!(matches!(
            build_network(raw),
            Err(NetworkError::NonzeroDiagonal { bank: 0, .. })
        ));

        let mut raw = two_bank();
        raw.liabilities[1][0] = -1.0;
        assert!(matches!(
            build_network(raw),
            Err(NetworkError::NegativeEntry { .. })
        ));

        let mut raw = two_bank();
        raw.illiquid_units.pop();
        assert!(matches!(
            build_network(raw),
            Err(NetworkError::Dimension { .. })
        ));

        let mut raw = two_bank();
        raw.liabilities[1].push(0.0);
        assert!(matches!(
            build_network(raw),
            Err(NetworkError::Dimension { .. })
        ));
    }

    #[test]
    fn exponential_demand_values() {
        let mut raw = two_bank();
        raw.illiquid_units = vec![4e7, 4e7];
        raw.inverse_demand = InverseDemand::exponential(1.0, 2.5e-8).unwrap();
        let net = build_network(raw).unwrap();
        assert_eq!(eval_inverse_demand(&net, 0.0).unwrap(), 1.0);
        let v = eval_inverse_demand(&net, 4e7).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        assert!(eval_inverse_demand(&net, -1.0).is_err());
        assert!(eval_inverse_demand(&net, 8e7 + 1.0).is_err());
    }

    #[test]
    fn tabulated_demand_rejects_non_monotone_tables() {
        assert!(InverseDemand::tabulated(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(InverseDemand::tabulated(vec![0.0, 0.0], vec![1.0, 0.5]).is_err());
        assert!(InverseDemand::tabulated(vec![0.5, 1.0], vec![1.0, 0.5]).is_err());
        assert!(InverseDemand::tabulated(vec![0.0, 1.0], vec![1.0, -0.5]).is_err());
        let d = InverseDemand::tabulated(vec![0.0, 1.0, 3.0], vec![1.0, 0.9, 0.7]).unwrap();
        assert!((d.value(0.5) - 0.95).abs() < 1e-15);
        assert!((d.value(2.0) - 0.8).abs() < 1e-15);
        assert_eq!(d.value(5.0), 0.7);
    }

    #[test]
    fn demand_monotonicity_on_grid() {
        let curves = [
            (InverseDemand::exponential(1.0, 2.5e-8).unwrap(), 7.7e6),
            (
                InverseDemand::tabulated(vec![0.0, 10.0, 20.0], vec![1.0, 0.8, 0.7]).unwrap(),
                20.0,
            ),
        ];
        for (d, bound) in curves {
            let grid: Vec<f64> = (0..=1000).map(|k| bound * k as f64 / 1000.0).collect();
            for w in grid.windows(2) {
                assert!(d.value(w[1]) < d.value(w[0]));
                assert!(w[1] * d.value(w[1]) > w[0] * d.value(w[0]));
            }
            assert!(d.assumption_failures(bound).is_empty());
        }
    }

    #[test]
    fn toy_network_validates() {
        let net = build_network(two_bank()).unwrap();
        let report = validate_assumptions(&net);
        assert!(report.all_passed(), "{report}");
        assert!(matches!(
            report.check("1a").unwrap().outcome,
            CheckOutcome::Vacuous(_)
        ));
    }

    #[test]
    fn steep_exponential_fails_1c() {
        let mut raw = two_bank();
        raw.illiquid_units = vec![1.0, 1.0];
        raw.inverse_demand = InverseDemand::exponential(1.0, 0.5).unwrap();
        raw.external_liabilities = vec![6.0, 6.0];
        let net = build_network(raw).unwrap();
        let report = validate_assumptions(&net);
        assert!(!report.check("1c").unwrap().passed());
        assert!(report.check("1a").unwrap().passed());
        assert!(report.check("1b").unwrap().passed());
    }

    #[test]
    fn tabulated_curve_with_collapsing_revenue_fails_1c() {
        let mut raw = two_bank();
        raw.illiquid_units = vec![1.0, 1.0];
        raw.external_liabilities = vec![6.0, 6.0];
        raw.inverse_demand =
            InverseDemand::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.9, 0.2]).unwrap();
        let report = validate_assumptions(&build_network(raw).unwrap());
        assert!(!report.check("1c").unwrap().passed());
    }

    #[test]
    fn assumption_two_fails_at_the_thin_bank() {
        // Bank 2: pbar = 5 but interbank assets are 4.5, a margin below one unit.
        let raw = RawNetwork {
            liabilities: vec![vec![0.0, 4.5], vec![1.0, 0.0]],
            external_liabilities: vec![4.0, 4.0],
            initial_liquid_assets: vec![10.0, 10.0],
            illiquid_units: vec![0.0, 0.0],
            inverse_demand: InverseDemand::exponential(1.0, 0.0).unwrap(),
        };
        let report = validate_assumptions(&build_network(raw).unwrap());
        match &report.check("2").unwrap().outcome {
            CheckOutcome::Fail { offender, .. } => assert_eq!(*offender, Offender::Bank(1)),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn initial_insolvency_is_reported() {
        let mut raw = two_bank();
        raw.initial_liquid_assets = vec![0.5, 5.0];
        let report = validate_assumptions(&build_network(raw).unwrap());
        assert!(!report.check("S0").unwrap().passed());
    }

    #[test]
    fn relative_rows_plus_external_share_sum_to_one() {
        let raw = RawNetwork {
            liabilities: vec![
                vec![0.0, 2.0, 0.5],
                vec![1.5, 0.0, 0.0],
                vec![0.25, 3.0, 0.0],
            ],
            external_liabilities: vec![7.0, 0.3, 11.0],
            initial_liquid_assets: vec![1.0, 1.0, 1.0],
            illiquid_units: vec![0.0, 1.0, 2.0],
            inverse_demand: InverseDemand::exponential(1.0, 0.1).unwrap(),
        };
        let net = build_network(raw).unwrap();
        for i in 0..3 {
            let s: f64 = net.relative_liabilities().row(i).sum();
            let ext = net.external_liabilities()[i] / net.total_liabilities()[i];
            assert!((s + ext - 1.0).abs() < 1e-12);
        }
    }
}
