use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netbliss::calibration::{eba_records, CalibrationConfig, CorrelationSource, TopologySpec};
use netbliss::experiment::{
    correlation_label, plot_tables, read_rows, run_eba, run_sweep, run_toy, write_plot_table,
    write_rows, Clock, EbaExperiment, ResultRow, ScenarioLabel, Sweep, SweepOutput, ToyGrid,
};
use netbliss::io::{read_matrix, read_network, read_vector};
use netbliss::shocks::RowNorm;
use netbliss::toy::ToyTopology;
use netbliss::{
    clear, validate_assumptions, CalibrationError, EstimatorError, Error, Method, Payoff, Regime,
    RegimeKind, Scenario,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "netbliss", version, about = "Bank bond valuation in interbank networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing assumptions of a network.
    Validate {
        #[arg(long)]
        network: PathBuf,
    },
    /// Clear a network for one vector of external asset values.
    Clear {
        #[arg(long)]
        network: PathBuf,
        /// One value per bank.
        #[arg(long)]
        shocks: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate default probabilities or bond prices on a network file.
    Price {
        #[arg(long)]
        network: PathBuf,
        /// `identity` or a correlation file (lower factor or full matrix).
        #[arg(long, default_value = "identity")]
        correlation: String,
        /// Common asset volatility, for documents without volatilities.
        #[arg(long)]
        volatility: Option<f64>,
        /// Zero-based target bank; defaults to the last bank.
        #[arg(long)]
        target: Option<usize>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Toy networks over sizes, topologies and (S0, sigma) cases.
    Toy {
        #[arg(long, value_delimiter = ',', default_values_t = (4..=12).collect::<Vec<usize>>())]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [ToyTopology::Complete, ToyTopology::Ring])]
        topology: Vec<ToyTopology>,
        /// Comma list of `s0:sigma` pairs.
        #[arg(long, value_delimiter = ',', default_values_t = ["5:0.1".to_string(), "5:0.08".into(), "5.5:0.1".into()])]
        cases: Vec<String>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Calibrated EBA network.
    Eba {
        /// `bundled`, `identity` or a correlation file.
        #[arg(long, default_value = "bundled")]
        correlation: String,
        /// complete | ring | core-periphery | file
        #[arg(long, default_value = "core-periphery")]
        topology: String,
        /// 0/1 adjacency matrix for `--topology file`.
        #[arg(long)]
        adjacency: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        core: usize,
        #[arg(long, default_value_t = 0.4)]
        beta: f64,
        #[arg(long, default_value_t = 2.5e-8)]
        nu: f64,
        /// Zero-based target bank (35 is Allied Irish Banks).
        #[arg(long, default_value_t = 35)]
        target: usize,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Reshape a result file into one table per scenario family.
    Plotdata {
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Column groups to emit; defaults to the methods present.
        #[arg(long)]
        method: Vec<Method>,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Repeatable.
    #[arg(long, default_values_t = [Method::Mc, Method::Ilis, Method::Bliss])]
    method: Vec<Method>,
    #[arg(long, default_value_t = RegimeKind::LargeAsset)]
    regime: RegimeKind,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    multipliers: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 20240501)]
    seed: u64,
    #[arg(long)]
    payoff: Option<Payoff>,
    /// Report `trials * SECONDS` as runtime instead of wall time.
    #[arg(long, value_name = "SECONDS")]
    mock_clock: Option<f64>,
    /// Result file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SweepArgs {
    fn sweep(&self, default_trials: usize, default_payoff: Payoff) -> Sweep {
        Sweep {
            regime: self.regime,
            multipliers: self.multipliers.clone(),
            methods: self.method.clone(),
            payoff: self.payoff.unwrap_or(default_payoff),
            trials: self.trials.unwrap_or(default_trials),
            seed: self.seed,
        }
    }

    fn clock(&self) -> Clock {
        self.mock_clock.map_or(Clock::Wall, Clock::PerTrial)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_PARSE);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("NETBLISS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("NETBLISS_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Io { .. } | Error::Config(_) => EXIT_PARSE,
        Error::Network(_) | Error::Shock(_) => EXIT_VALIDATION,
        Error::Calibration(c) => match c {
            CalibrationError::Merton { .. } | CalibrationError::NoConvergence { .. } => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        },
        Error::Estimator(EstimatorError::Config(_)) => EXIT_PARSE,
        Error::Estimator(EstimatorError::Shock(_)) => EXIT_VALIDATION,
        Error::Clearing(_) | Error::Estimator(_) => EXIT_NUMERICAL,
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Validate { network } => {
            let doc = read_network(&network)?;
            let report = validate_assumptions(&doc.network);
            print!("{report}");
            Ok(if report.all_passed() { 0 } else { EXIT_VALIDATION })
        }
        Command::Clear {
            network,
            shocks,
            out,
        } => {
            let doc = read_network(&network)?;
            let s = read_vector(&shocks)?;
            let outcome = clear(&doc.network, &s)?;
            let mut text = String::new();
            text.push_str(&format!("price {}\n", outcome.price));
            text.push_str(&format!("iterations {}\n", outcome.iterations));
            text.push_str(&format!("residual {:e}\n", outcome.residual));
            let defaults: Vec<String> = outcome.defaults.iter().map(usize::to_string).collect();
            text.push_str(&format!("defaults {}\n", defaults.join(" ")));
            text.push_str("bank,name,payment,owed,default\n");
            let owed = doc.network.total_liabilities();
            for (i, p) in outcome.payments.iter().enumerate() {
                text.push_str(&format!(
                    "{i},{},{p},{},{}\n",
                    doc.names[i],
                    owed[i],
                    u8::from(outcome.is_default(i))
                ));
            }
            emit(out.as_deref(), text.as_bytes())?;
            Ok(0)
        }
        Command::Price {
            network,
            correlation,
            volatility,
            target,
            sweep,
        } => {
            let doc = read_network(&network)?;
            let n = doc.network.len();
            let vols = match (volatility, doc.volatilities) {
                (Some(v), _) => vec![v; n],
                (None, Some(v)) => v,
                (None, None) => {
                    return Err(Error::Config(
                        "the network document has no volatilities; pass --volatility".into(),
                    ))
                }
            };
            let source = correlation_source(&correlation, None)?;
            let model = source.shock_model(&vols)?;
            let target = target.unwrap_or(n - 1);
            let base = Scenario::new(doc.network, &model, Regime::identity(), target)?;
            let label = ScenarioLabel {
                experiment: "price".into(),
                topology: network
                    .file_stem()
                    .map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
                correlation: correlation_label(source.is_identity()).into(),
                n,
                s0: None,
                sigma: None,
                target,
            };
            let out = run_sweep(&base, &label, &sweep.sweep(10_000, Payoff::Price), sweep.clock())?;
            finish(out, sweep.out.as_deref())
        }
        Command::Toy {
            sizes,
            topology,
            cases,
            sweep,
        } => {
            let cases = cases.iter().map(|c| parse_case(c)).collect::<Result<Vec<_>, _>>()?;
            let s = sweep.sweep(10_000, Payoff::Indicator);
            let grid = ToyGrid {
                sizes,
                topologies: topology,
                cases,
                methods: s.methods,
                payoff: s.payoff,
                regime: s.regime,
                multipliers: s.multipliers,
                trials: s.trials,
                seed: s.seed,
            };
            let out = run_toy(&grid, sweep.clock())?;
            finish(out, sweep.out.as_deref())
        }
        Command::Eba {
            correlation,
            topology,
            adjacency,
            core,
            beta,
            nu,
            target,
            sweep,
        } => {
            let topology = match topology.as_str() {
                "complete" => TopologySpec::Complete,
                "ring" => TopologySpec::Ring,
                "core-periphery" => TopologySpec::CorePeriphery { core },
                "file" => {
                    let path = adjacency.ok_or_else(|| {
                        Error::Config("--topology file needs --adjacency".into())
                    })?;
                    let m = read_matrix(&path)?;
                    TopologySpec::Custom(
                        (0..m.nrows())
                            .map(|i| (0..m.ncols()).map(|j| m[(i, j)] != 0.0).collect())
                            .collect(),
                    )
                }
                other => return Err(Error::Config(format!("unknown topology '{other}'"))),
            };
            let n = eba_records().len();
            let config = EbaExperiment {
                calibration: CalibrationConfig {
                    beta,
                    decay: nu,
                    topology,
                    correlation: correlation_source(&correlation, Some(n))?,
                },
                target,
                sweep: sweep.sweep(1_000_000, Payoff::Price),
            };
            let out = run_eba(&config, sweep.clock())?;
            finish(out, sweep.out.as_deref())
        }
        Command::Plotdata { input, out, method } => {
            let file = File::open(&input).map_err(|source| io_error(&input, source))?;
            let rows: Vec<ResultRow> = read_rows(file, &input.display().to_string())?;
            let (tables, warnings) = plot_tables(&rows, &method);
            for w in warnings {
                eprintln!("warning: {w}");
            }
            std::fs::create_dir_all(&out).map_err(|source| io_error(&out, source))?;
            for table in &tables {
                let path = out.join(format!("{}.csv", table.name));
                let file = File::create(&path).map_err(|source| io_error(&path, source))?;
                write_plot_table(table, BufWriter::new(file)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn correlation_source(value: &str, bundled_len: Option<usize>) -> Result<CorrelationSource, Error> {
    match value {
        "identity" => Ok(CorrelationSource::Identity),
        "bundled" if bundled_len.is_some() => Ok(CorrelationSource::eba()),
        path => Ok(CorrelationSource::Matrix {
            matrix: read_matrix(Path::new(path))?,
            row_norm: RowNorm::Strict,
        }),
    }
}

fn parse_case(case: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::Config(format!("case '{case}' is not of the form s0:sigma"));
    let (s0, sigma) = case.split_once(':').ok_or_else(bad)?;
    Ok((
        s0.trim().parse().map_err(|_| bad())?,
        sigma.trim().parse().map_err(|_| bad())?,
    ))
}

fn finish(out: SweepOutput, path: Option<&Path>) -> Result<u8, Error> {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let mut buf = Vec::new();
    write_rows(&out.rows, &mut buf).map_err(|e| Error::Config(e.to_string()))?;
    emit(path, &buf)?;
    Ok(0)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| io_error(p, source)),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|source| io_error(Path::new("<stdout>"), source)),
    }
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}
