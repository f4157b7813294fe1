//! Parameter sweeps and result tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, eba_records, CalibrationConfig};
use crate::error::{Error, EstimatorError, ParseError};
use crate::estimators::{
    aggregate, run_bliss, run_gamma_c, run_ilis, run_mc, yield_bps, EstimatorResult, Method,
    Payoff, Scenario, TrialBatch,
};
use crate::shocks::{Regime, RegimeKind};
use crate::toy::{ToySpec, ToyTopology};

/// Column order of result files.
pub const RESULT_COLUMNS: [&str; 20] = [
    "experiment",
    "topology",
    "correlation",
    "regime",
    "multiplier",
    "n",
    "s0",
    "sigma",
    "target",
    "method",
    "payoff",
    "trials",
    "seed",
    "estimate",
    "std_error",
    "rel_error",
    "runtime_sec",
    "efficiency_ratio",
    "price",
    "yield_bps",
];

/// Source of the runtime attributed to a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    /// Wall time of the sampling loop.
    Wall,
    /// A fixed cost per trial, for reproducible output.
    PerTrial(f64),
}

impl Clock {
    pub fn runtime(&self, batch: &TrialBatch) -> f64 {
        match *self {
            Clock::Wall => batch.runtime_sec,
            Clock::PerTrial(sec) => sec * batch.trials() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub topology: String,
    pub correlation: String,
    pub regime: String,
    pub multiplier: f64,
    pub n: usize,
    pub s0: Option<f64>,
    pub sigma: Option<f64>,
    pub target: usize,
    pub method: String,
    pub payoff: String,
    pub trials: usize,
    pub seed: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub rel_error: Option<f64>,
    pub runtime_sec: f64,
    pub efficiency_ratio: Option<f64>,
    pub price: Option<f64>,
    pub yield_bps: Option<f64>,
}

/// Descriptive columns shared by every row of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLabel {
    pub experiment: String,
    pub topology: String,
    pub correlation: String,
    pub n: usize,
    pub s0: Option<f64>,
    pub sigma: Option<f64>,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub regime: RegimeKind,
    pub multipliers: Vec<f64>,
    pub methods: Vec<Method>,
    pub payoff: Payoff,
    pub trials: usize,
    pub seed: u64,
}

impl Sweep {
    fn check(&self) -> Result<(), EstimatorError> {
        if self.multipliers.is_empty() {
            return Err(EstimatorError::Config("no multipliers given".into()));
        }
        if let Some(m) = self.multipliers.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(EstimatorError::Config(format!("multiplier {m} is not positive")));
        }
        if self.methods.is_empty() {
            return Err(EstimatorError::Config("no methods given".into()));
        }
        if self.trials == 0 {
            return Err(EstimatorError::EmptyBatch);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
}

impl SweepOutput {
    fn extend(&mut self, other: SweepOutput) {
        self.rows.extend(other.rows);
        self.warnings.extend(other.warnings);
    }
}

/// Runs every method at every multiplier of `sweep` on `base`.
///
/// Tilts are computed outside the timed region. Efficiency ratios are taken
/// against the Monte Carlo row of the same multiplier.
pub fn run_sweep(
    base: &Scenario,
    label: &ScenarioLabel,
    sweep: &Sweep,
    clock: Clock,
) -> Result<SweepOutput, EstimatorError> {
    sweep.check()?;
    let mut out = SweepOutput::default();
    let has_mc = sweep.methods.contains(&Method::Mc);
    if !has_mc {
        out.warnings.push(format!(
            "{}: no mc baseline, efficiency_ratio left empty",
            label.experiment
        ));
    }
    for &multiplier in &sweep.multipliers {
        let scenario = base.with_regime(Regime::new(sweep.regime, multiplier)?);
        let mut results: Vec<EstimatorResult> = Vec::new();
        for &method in &sweep.methods {
            let batch = match method {
                Method::Mc => run_mc(&scenario, sweep.payoff, sweep.trials, sweep.seed)?,
                Method::Ilis => run_ilis(&scenario, sweep.payoff, sweep.trials, sweep.seed)?,
                Method::Bliss => {
                    let tilt = scenario.tilt()?;
                    run_bliss(&scenario, sweep.payoff, sweep.trials, sweep.seed, &tilt)?
                }
                Method::GammaC => {
                    if sweep.payoff != Payoff::Indicator {
                        out.warnings.push(format!(
                            "gamma-c estimates a solvency probability; skipped for payoff {}",
                            sweep.payoff
                        ));
                        continue;
                    }
                    let tilt = scenario.tilt()?;
                    run_gamma_c(&scenario, sweep.trials, sweep.seed, &tilt)?
                }
            };
            let mut result = aggregate(&batch)?;
            result.runtime_sec = clock.runtime(&batch);
            results.push(result);
        }
        let mc = results.iter().find(|r| r.method == Method::Mc).cloned();
        for r in results {
            let efficiency_ratio = match (&mc, r.method) {
                (Some(_), Method::Mc) => Some(1.0),
                (Some(mc), _) => r.efficiency_vs(mc),
                (None, _) => None,
            };
            let priced = r.payoff == Payoff::Price;
            out.rows.push(ResultRow {
                experiment: label.experiment.clone(),
                topology: label.topology.clone(),
                correlation: label.correlation.clone(),
                regime: sweep.regime.to_string(),
                multiplier,
                n: label.n,
                s0: label.s0,
                sigma: label.sigma,
                target: label.target,
                method: r.method.to_string(),
                payoff: r.payoff.to_string(),
                trials: r.trials,
                seed: sweep.seed,
                estimate: r.estimate,
                std_error: r.std_error,
                rel_error: r.rel_error,
                runtime_sec: r.runtime_sec,
                efficiency_ratio,
                price: priced.then_some(r.estimate),
                yield_bps: priced.then(|| yield_bps(r.estimate)),
            });
        }
    }
    Ok(out)
}

/// Toy networks over sizes, topologies and `(s0, sigma)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyGrid {
    pub sizes: Vec<usize>,
    pub topologies: Vec<ToyTopology>,
    pub cases: Vec<(f64, f64)>,
    pub methods: Vec<Method>,
    pub payoff: Payoff,
    pub regime: RegimeKind,
    pub multipliers: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ToyGrid {
    fn default() -> Self {
        ToyGrid {
            sizes: (4..=12).collect(),
            topologies: vec![ToyTopology::Complete, ToyTopology::Ring],
            cases: vec![(5.0, 0.1), (5.0, 0.08), (5.5, 0.1)],
            methods: vec![Method::Mc, Method::Ilis, Method::Bliss],
            payoff: Payoff::Indicator,
            regime: RegimeKind::LargeAsset,
            multipliers: vec![1.0],
            trials: 10_000,
            seed: 20240501,
        }
    }
}

pub fn run_toy(grid: &ToyGrid, clock: Clock) -> Result<SweepOutput, EstimatorError> {
    let mut out = SweepOutput::default();
    for &topology in &grid.topologies {
        for &(s0, sigma) in &grid.cases {
            for &n in &grid.sizes {
                if n < 2 {
                    return Err(EstimatorError::Config(format!("toy network needs n >= 2, got {n}")));
                }
                let spec = ToySpec::new(n, topology, s0, sigma);
                let base = spec.scenario(Regime::identity())?;
                let label = ScenarioLabel {
                    experiment: "toy".into(),
                    topology: topology.to_string(),
                    correlation: "uncorrelated".into(),
                    n,
                    s0: Some(s0),
                    sigma: Some(sigma),
                    target: n - 1,
                };
                let sweep = Sweep {
                    regime: grid.regime,
                    multipliers: grid.multipliers.clone(),
                    methods: grid.methods.clone(),
                    payoff: grid.payoff,
                    trials: grid.trials,
                    seed: grid.seed,
                };
                out.extend(run_sweep(&base, &label, &sweep, clock)?);
            }
        }
    }
    out.warnings.dedup();
    Ok(out)
}

/// Calibrated EBA network with a multiplier sweep on one target.
#[derive(Debug, Clone)]
pub struct EbaExperiment {
    pub calibration: CalibrationConfig,
    pub target: usize,
    pub sweep: Sweep,
}

pub fn run_eba(config: &EbaExperiment, clock: Clock) -> Result<SweepOutput, Error> {
    let cal = calibrate(&eba_records(), &config.calibration)?;
    let n = cal.network.len();
    let base = Scenario::new(cal.network, &cal.shock_model, Regime::identity(), config.target)?;
    let label = ScenarioLabel {
        experiment: "eba".into(),
        topology: config.calibration.topology.name().into(),
        correlation: correlation_label(config.calibration.correlation.is_identity()).into(),
        n,
        s0: None,
        sigma: None,
        target: config.target,
    };
    Ok(run_sweep(&base, &label, &config.sweep, clock)?)
}

pub fn correlation_label(identity: bool) -> &'static str {
    if identity {
        "uncorrelated"
    } else {
        "correlated"
    }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(reader: R, source_name: &str) -> Result<Vec<ResultRow>, ParseError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| ParseError::new(source_name, 1, 0, e.to_string()))?
        .clone();
    if headers.iter().ne(RESULT_COLUMNS) {
        return Err(ParseError::new(
            source_name,
            1,
            1,
            format!("unexpected header; expected {}", RESULT_COLUMNS.join(",")),
        ));
    }
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                ParseError::new(source_name, line, 0, e.to_string())
            })
        })
        .collect()
}

/// One figure-shaped table: an x column followed by per-method groups of
/// estimate, std_error, rel_error, runtime_sec and efficiency_ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

const GROUP_FIELDS: [&str; 5] = ["estimate", "std_error", "rel_error", "runtime_sec", "efficiency_ratio"];

/// Reshapes result rows into one table per scenario family. Toy results use
/// the network size as x axis, everything else the multiplier. `methods`
/// fixes the column groups; when empty, the methods present are used.
pub fn plot_tables(rows: &[ResultRow], methods: &[Method]) -> (Vec<PlotTable>, Vec<String>) {
    let mut families: BTreeMap<Vec<String>, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        families.entry(family_key(row)).or_default().push(row);
    }
    let mut warnings = Vec::new();
    let mut tables = Vec::new();
    for (key, members) in families {
        let by_size = members[0].experiment == "toy";
        let x_of = |r: &ResultRow| if by_size { r.n as f64 } else { r.multiplier };
        let group_methods: Vec<String> = if methods.is_empty() {
            let mut seen: Vec<String> = Vec::new();
            for r in &members {
                if !seen.contains(&r.method) {
                    seen.push(r.method.clone());
                }
            }
            seen
        } else {
            methods.iter().map(|m| m.to_string()).collect()
        };
        let name = key.iter().filter(|s| !s.is_empty()).cloned().collect::<Vec<_>>().join("_");
        for m in &group_methods {
            if !members.iter().any(|r| &r.method == m) {
                warnings.push(format!("{name}: no rows for method {m}"));
            }
        }
        let mut xs: Vec<f64> = members.iter().map(|r| x_of(r)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();

        let mut header = vec![if by_size { "n" } else { "multiplier" }.to_string()];
        for m in &group_methods {
            header.extend(GROUP_FIELDS.iter().map(|f| format!("{m}_{f}")));
        }
        let table_rows = xs
            .iter()
            .map(|&x| {
                let mut cells = vec![format_number(x)];
                for m in &group_methods {
                    match members.iter().find(|r| x_of(r) == x && &r.method == m) {
                        Some(r) => cells.extend([
                            format_number(r.estimate),
                            format_number(r.std_error),
                            format_opt(r.rel_error),
                            format_number(r.runtime_sec),
                            format_opt(r.efficiency_ratio),
                        ]),
                        None => cells.extend(std::iter::repeat_n(String::new(), GROUP_FIELDS.len())),
                    }
                }
                cells
            })
            .collect();
        tables.push(PlotTable {
            name,
            header,
            rows: table_rows,
        });
    }
    (tables, warnings)
}

fn family_key(r: &ResultRow) -> Vec<String> {
    let case = match (r.s0, r.sigma) {
        (Some(s0), Some(sigma)) => format!("s{}-v{}", format_number(s0), format_number(sigma)),
        _ => String::new(),
    };
    // Toy tables run over n, and the toy target is always the last bank.
    let (size, target) = if r.experiment == "toy" {
        (format!("m{}", format_number(r.multiplier)), String::new())
    } else {
        (format!("n{}", r.n), format!("t{}", r.target))
    };
    vec![
        r.experiment.clone(),
        r.topology.clone(),
        r.correlation.clone(),
        r.regime.clone(),
        case,
        size,
        target,
        r.payoff.clone(),
    ]
}

fn format_number(x: f64) -> String {
    format!("{x}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub fn write_plot_table<W: Write>(table: &PlotTable, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> ToyGrid {
        ToyGrid {
            sizes: vec![4],
            topologies: vec![ToyTopology::Complete],
            cases: vec![(5.0, 0.1)],
            trials: 2_000,
            ..ToyGrid::default()
        }
    }

    #[test]
    fn mc_rows_have_unit_efficiency() {
        let out = run_toy(&small_grid(), Clock::Wall).unwrap();
        assert_eq!(out.rows.len(), 3);
        for row in &out.rows {
            if row.method == "mc" {
                assert_eq!(row.efficiency_ratio, Some(1.0));
            }
            if let Some(rel) = row.rel_error {
                assert!((rel - row.std_error / row.estimate).abs() <= 1e-12 * rel);
            }
        }
    }

    #[test]
    fn efficiency_is_invariant_to_clock_scale() {
        let a = run_toy(&small_grid(), Clock::PerTrial(1e-6)).unwrap();
        let b = run_toy(&small_grid(), Clock::PerTrial(3.7e-3)).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            let (ex, ey) = (x.efficiency_ratio.unwrap(), y.efficiency_ratio.unwrap());
            assert!((ex - ey).abs() <= 1e-12 * ex);
        }
    }

    #[test]
    fn output_is_byte_identical() {
        let write = || {
            let out = run_toy(&small_grid(), Clock::PerTrial(1e-6)).unwrap();
            let mut buf = Vec::new();
            write_rows(&out.rows, &mut buf).unwrap();
            buf
        };
        assert_eq!(write(), write());
    }

    #[test]
    fn missing_baseline_warns() {
        let grid = ToyGrid {
            methods: vec![Method::Bliss],
            ..small_grid()
        };
        let out = run_toy(&grid, Clock::Wall).unwrap();
        assert!(out.rows[0].efficiency_ratio.is_none());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn rows_roundtrip_through_csv() {
        let out = run_toy(&small_grid(), Clock::PerTrial(1e-6)).unwrap();
        let mut buf = Vec::new();
        write_rows(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&RESULT_COLUMNS.join(",")));
        assert_eq!(read_rows(&buf[..], "r.csv").unwrap(), out.rows);
        assert!(read_rows("a,b\n1,2\n".as_bytes(), "bad.csv").is_err());
    }

    #[test]
    fn plot_tables_group_by_method() {
        let out = run_toy(&small_grid(), Clock::PerTrial(1e-6)).unwrap();
        let (tables, warnings) = plot_tables(&out.rows, &[]);
        assert!(warnings.is_empty());
        assert_eq!(tables.len(), 1);
        assert_eq!(tables[0].header.len(), 1 + 3 * GROUP_FIELDS.len());
        assert_eq!(tables[0].rows, vec![tables[0].rows[0].clone()]);

        let (tables, warnings) = plot_tables(&out.rows, &[Method::Mc, Method::GammaC]);
        assert_eq!(warnings.len(), 1);
        assert!(tables[0].rows[0][6..].iter().all(String::is_empty));
    }
}
