//! End-to-end acceptance checks. Each test prints one `criterion N [PASS|FAIL]`
//! line to the real stdout, so the summary survives output capture.
//!
//! The tests hold a shared lock so that the timing checks are not disturbed by
//! concurrently running Monte Carlo work.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netbliss::calibration::{
    calibrate, eba_records, marginal_error, merton_asset_vol, merton_residual, net_worth_error,
    reconstruct_interbank, split_liabilities, CalibrationConfig, CorrelationSource, TopologySpec,
};
use netbliss::estimators::{mean, sample_variance};
use netbliss::toy::{ToySpec, ToyTopology};
use netbliss::{
    aggregate, clear, fictitious_clear, log_normal_cdf, run_bliss, run_gamma_c, run_ilis, run_mc,
    sample_truncated_normal, EstimatorResult, Payoff, Regime, RegimeKind, Scenario,
};

const SEED: u64 = 20240501;
const EBA_TARGET: usize = 35;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, name: &str, pass: bool, details: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {id} [{tag}] {name}: {details}").unwrap();
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn within_se(a: &EstimatorResult, b: &EstimatorResult, k: f64) -> (bool, f64) {
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let gap = (a.estimate - b.estimate).abs();
    (gap <= k * se, if se > 0.0 { gap / se } else { f64::INFINITY })
}

fn bliss(scenario: &Scenario, payoff: Payoff, trials: usize, seed: u64) -> EstimatorResult {
    let tilt = scenario.tilt().unwrap();
    aggregate(&run_bliss(scenario, payoff, trials, seed, &tilt).unwrap()).unwrap()
}

fn ilis(scenario: &Scenario, payoff: Payoff, trials: usize, seed: u64) -> EstimatorResult {
    aggregate(&run_ilis(scenario, payoff, trials, seed).unwrap()).unwrap()
}

fn mc(scenario: &Scenario, payoff: Payoff, trials: usize, seed: u64) -> EstimatorResult {
    aggregate(&run_mc(scenario, payoff, trials, seed).unwrap()).unwrap()
}

fn toy(n: usize, topology: ToyTopology, s0: f64, sigma: f64) -> Scenario {
    ToySpec::new(n, topology, s0, sigma)
        .scenario(Regime::identity())
        .unwrap()
}

#[test]
fn threshold_and_clearing_defaults_agree() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut compared, mut skipped, mut defaults) = (0usize, 0usize, 0usize);
    let mut mismatches = Vec::new();
    for k in 0..1000 {
        let n = rng.random_range(2..=6);
        let net = common::random_network(&mut rng, n, k % 2 == 1);
        for _ in 0..10 {
            let s = common::random_assets(&mut rng, &net);
            let target = rng.random_range(0..n);
            let others: Vec<f64> = (0..n).filter(|&i| i != target).map(|i| s[i]).collect();
            let v = fictitious_clear(&net, &others, target).unwrap().threshold;
            if (s[target] - v).abs() <= 1e-6 {
                skipped += 1;
                continue;
            }
            let by_threshold = s[target] < v;
            let by_clearing = clear(&net, &s).unwrap().is_default(target);
            compared += 1;
            defaults += by_clearing as usize;
            if by_threshold != by_clearing {
                mismatches.push((k, target));
            }
        }
    }
    let elapsed = secs(start.elapsed());
    let pass = mismatches.is_empty() && elapsed < 60.0;
    report(
        1,
        "threshold equivalence",
        pass,
        &format!(
            "{compared} compared ({defaults} defaults), {skipped} near the boundary, {} mismatches, {elapsed:.2}s",
            mismatches.len()
        ),
    );
    assert!(pass, "mismatches {mismatches:?}");
}

#[test]
fn clearing_is_monotone_in_assets() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let n = rng.random_range(2..=6);
        let net = common::random_network(&mut rng, n, k % 2 == 0);
        let low = common::random_assets(&mut rng, &net);
        let high: Vec<f64> = low
            .iter()
            .map(|&x| if rng.random_bool(0.5) { x + rng.random_range(0.0..3.0) } else { x })
            .collect();
        let a = clear(&net, &low).unwrap();
        let b = clear(&net, &high).unwrap();
        worst = worst.max(a.price - b.price);
        for i in 0..n {
            worst = worst.max(a.payments[i] - b.payments[i]);
        }
    }
    let elapsed = secs(start.elapsed());
    let pass = worst <= 1e-10 && elapsed < 30.0;
    report(
        2,
        "monotonicity",
        pass,
        &format!("200 pairs, largest decrease {worst:.3e}, {elapsed:.2}s"),
    );
    assert!(pass);
}

#[test]
fn toy_estimates_have_expected_magnitude() {
    let _guard = serial();
    let start = Instant::now();
    let cases = [(5.0, 0.1, 1e-2), (5.0, 0.08, 1e-3), (5.5, 0.1, 1e-4)];
    let mut lines = Vec::new();
    let mut pass = true;
    for (s0, sigma, order) in cases {
        for n in [4, 12] {
            for topology in [ToyTopology::Complete, ToyTopology::Ring] {
                let r = bliss(&toy(n, topology, s0, sigma), Payoff::Indicator, 100_000, SEED);
                let ok = r.estimate >= 0.3 * order && r.estimate <= 3.0 * order;
                pass &= ok;
                if !ok {
                    lines.push(format!("({s0},{sigma}) n={n} {topology} {:.3e} vs {order:.0e}", r.estimate));
                }
            }
        }
    }
    let elapsed = secs(start.elapsed());
    pass &= elapsed < 300.0;
    let details = if lines.is_empty() {
        format!("12 runs within [0.3x, 3x], {elapsed:.1}s")
    } else {
        format!("outside band: {}; {elapsed:.1}s", lines.join("; "))
    };
    report(3, "toy magnitudes", pass, &details);
    assert!(pass, "{details}");
}

#[test]
fn bliss_reduces_relative_error() {
    let _guard = serial();
    let scenario = toy(4, ToyTopology::Complete, 5.5, 0.1);
    let naive = mc(&scenario, Payoff::Indicator, 100_000, SEED);
    let tilted = bliss(&scenario, Payoff::Indicator, 100_000, SEED + 1);
    let b_rel = tilted.rel_error.unwrap();
    let (pass, details) = match naive.rel_error {
        Some(m_rel) if naive.events >= 10 => (
            b_rel <= 0.2 * m_rel,
            format!("bliss rel {b_rel:.3e}, mc rel {m_rel:.3e} ({} events), ratio {:.3}", naive.events, b_rel / m_rel),
        ),
        _ => (
            b_rel < 0.05,
            format!("mc degenerate ({} events), bliss rel {b_rel:.3e}", naive.events),
        ),
    };
    report(4, "variance reduction", pass, &details);
    assert!(pass, "{details}");
}

#[test]
fn bliss_cost_scales_mildly_with_size() {
    let _guard = serial();
    let start = Instant::now();
    let trials = 50_000;
    let per_trial = |n: usize| {
        let scenario = toy(n, ToyTopology::Complete, 5.0, 0.1);
        let tilt = scenario.tilt().unwrap();
        (0..3)
            .map(|rep| {
                let t = Instant::now();
                run_bliss(&scenario, Payoff::Indicator, trials, SEED + rep, &tilt).unwrap();
                secs(t.elapsed()) / trials as f64
            })
            .fold(f64::INFINITY, f64::min)
    };
    let small = per_trial(8);
    let large = per_trial(64);
    let ratio = large / small;
    let elapsed = secs(start.elapsed());
    let pass = ratio < 8.0 && elapsed < 300.0;
    report(
        5,
        "scalability",
        pass,
        &format!("per trial {:.2}us at n=8, {:.2}us at n=64, ratio {ratio:.2}, {elapsed:.1}s", small * 1e6, large * 1e6),
    );
    assert!(pass);
}

struct Triangle {
    label: String,
    mc: EstimatorResult,
    ilis: EstimatorResult,
    bliss: EstimatorResult,
}

fn triangle_scenarios() -> Vec<(String, ToySpec)> {
    vec![
        ("complete n=4 (5,0.15)".into(), ToySpec::new(4, ToyTopology::Complete, 5.0, 0.15)),
        (
            "ring n=6 fire sales (5,0.1)".into(),
            ToySpec::new(6, ToyTopology::Ring, 5.0, 0.1).with_fire_sales(2.0, 0.05),
        ),
        (
            "complete n=4 rho=0.5 (5,0.1)".into(),
            ToySpec::new(4, ToyTopology::Complete, 5.0, 0.1).with_correlation(0.5),
        ),
        ("complete n=8 (5,0.08)".into(), ToySpec::new(8, ToyTopology::Complete, 5.0, 0.08)),
        (
            "ring n=4 rho=0.3 (5.1,0.08)".into(),
            ToySpec::new(4, ToyTopology::Ring, 5.1, 0.08).with_correlation(0.3),
        ),
    ]
}

fn triangles() -> &'static [Triangle] {
    static CACHE: OnceLock<Vec<Triangle>> = OnceLock::new();
    CACHE.get_or_init(|| {
        triangle_scenarios()
            .into_iter()
            .enumerate()
            .map(|(k, (label, spec))| {
                let scenario = spec.scenario(Regime::identity()).unwrap();
                let base = SEED + 10 * k as u64;
                Triangle {
                    label,
                    mc: mc(&scenario, Payoff::Indicator, 100_000, base),
                    ilis: ilis(&scenario, Payoff::Indicator, 100_000, base + 1),
                    bliss: bliss(&scenario, Payoff::Indicator, 100_000, base + 2),
                }
            })
            .collect()
    })
}

#[test]
fn estimators_agree_pairwise() {
    let _guard = serial();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in triangles() {
        let pairs = [(&t.mc, &t.ilis), (&t.mc, &t.bliss), (&t.ilis, &t.bliss)];
        let worst = pairs
            .iter()
            .map(|(a, b)| {
                let (ok, z) = within_se(a, b, 3.0);
                pass &= ok;
                z
            })
            .fold(0.0f64, f64::max);
        parts.push(format!("{} p={:.2e} max|z|={worst:.2}", t.label, t.bliss.estimate));
    }
    report(6, "unbiasedness", pass, &parts.join("; "));
    assert!(pass);
}

#[test]
fn ilis_variance_below_mc() {
    let _guard = serial();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in triangles() {
        pass &= t.ilis.variance < t.mc.variance;
        parts.push(format!("{} ratio {:.3}", t.label, t.ilis.variance / t.mc.variance));
    }
    report(7, "ilis variance dominance", pass, &parts.join("; "));
    assert!(pass);
}

fn eba_scenario(correlation: CorrelationSource, multiplier: f64) -> Scenario {
    let cal = calibrate(
        &eba_records(),
        &CalibrationConfig {
            correlation,
            ..CalibrationConfig::default()
        },
    )
    .unwrap();
    let regime = Regime::new(RegimeKind::SmallVolatility, multiplier).unwrap();
    Scenario::new(cal.network, &cal.shock_model, regime, EBA_TARGET).unwrap()
}

// Bisection on the log default probability; smaller multipliers mean
// larger volatility and therefore more defaults.
fn pilot_multiplier(correlation: &CorrelationSource) -> f64 {
    let (mut lo, mut hi) = (0.5, 1.0);
    for _ in 0..10 {
        let mid = 0.5 * (lo + hi);
        let p = bliss(&eba_scenario(correlation.clone(), mid), Payoff::Indicator, 10_000, SEED + 1000).estimate;
        if p > 1e-4 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn tilting_matters_only_with_correlation() {
    let _guard = serial();
    let mut results = Vec::new();
    for correlation in [CorrelationSource::eba(), CorrelationSource::Identity] {
        let m = pilot_multiplier(&correlation);
        let scenario = eba_scenario(correlation, m);
        let i = ilis(&scenario, Payoff::Indicator, 100_000, SEED);
        let b = bliss(&scenario, Payoff::Indicator, 100_000, SEED + 1);
        results.push((m, i, b));
    }
    let (cm, ci, cb) = &results[0];
    let (um, ui, ub) = &results[1];
    let rel = |r: &EstimatorResult| r.rel_error.unwrap_or(f64::INFINITY);
    let correlated_ok = rel(cb) < 0.5 * rel(ci);
    let uncorrelated_ok = (rel(ub) - rel(ui)).abs() <= 0.2 * rel(ui);
    let pass = correlated_ok && uncorrelated_ok;
    let details = format!(
        "correlated m={cm:.4} p={:.2e} bliss/ilis rel {:.3} ({}); uncorrelated m={um:.4} p={:.2e} bliss/ilis rel {:.3} ({})",
        cb.estimate,
        rel(cb) / rel(ci),
        if correlated_ok { "ok" } else { "not below 0.5" },
        ub.estimate,
        rel(ub) / rel(ui),
        if uncorrelated_ok { "ok" } else { "not within 20%" },
    );
    report(8, "tilting effectiveness", pass, &details);
    assert!(pass, "{details}");
}

#[test]
fn normal_kernels_match_references() {
    let _guard = serial();
    let table = [
        (-40.0, -804.6084420137537881666068),
        (-20.0, -203.9171553710972639368045),
        (-10.0, -53.23128515051247057834703),
        (-5.0, -15.0649983939887257360837),
        (0.0, -std::f64::consts::LN_2),
        (5.0, -2.866516129637635933845963e-7),
    ];
    let worst_cdf = table
        .iter()
        .map(|&(x, want)| ((log_normal_cdf(x) - want) / want).abs())
        .fold(0.0f64, f64::max);

    let moments = [
        (0.0, -0.7978845608028653558798921, 0.3633802276324186569244649),
        (-5.0, -5.186503967125842115616509, 0.03269643461711222534531581),
        (-12.0, -12.08221417525428432981885, 0.006670726335845864326160033),
    ];
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut moments_ok = true;
    let mut parts = Vec::new();
    for (upper, want_mean, want_var) in moments {
        let xs: Vec<f64> = (0..n).map(|_| sample_truncated_normal(upper, &mut rng)).collect();
        let m = mean(&xs);
        let v = sample_variance(&xs);
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
        let z_mean = (m - want_mean) / (v / n as f64).sqrt();
        let z_var = (v - want_var) / ((m4 - v * v) / n as f64).sqrt();
        moments_ok &= z_mean.abs() < 3.0 && z_var.abs() < 3.0 && xs.iter().all(|&x| x <= upper);
        parts.push(format!("upper {upper}: z_mean {z_mean:.2}, z_var {z_var:.2}"));
    }
    let pass = worst_cdf < 1e-10 && moments_ok;
    report(
        9,
        "numerical kernels",
        pass,
        &format!("log cdf max rel err {worst_cdf:.2e}; {}", parts.join("; ")),
    );
    assert!(pass);
}

#[test]
fn calibration_closes() {
    let _guard = serial();
    let records = eba_records();
    let mut parts = Vec::new();
    let mut pass = true;

    let mut worst_worth = 0.0f64;
    for topology in [TopologySpec::Complete, TopologySpec::CorePeriphery { core: 10 }] {
        let cal = calibrate(
            &records,
            &CalibrationConfig {
                topology,
                ..CalibrationConfig::default()
            },
        )
        .unwrap();
        worst_worth = worst_worth.max(net_worth_error(&cal, &records));
    }
    pass &= worst_worth < 1e-6;
    parts.push(format!("net worth err {worst_worth:.2e}"));

    let worst_merton = records
        .iter()
        .map(|r| {
            let sigma = merton_asset_vol(r.net_worth, r.total_assets, r.equity_vol).unwrap();
            merton_residual(r.net_worth, r.total_assets, r.equity_vol, sigma).abs()
        })
        .fold(0.0f64, f64::max);
    pass &= worst_merton < 1e-10;
    parts.push(format!("merton residual {worst_merton:.2e} over {} rows", records.len()));

    let rows = split_liabilities(&records).unwrap().interbank();
    let cols: Vec<f64> = records.iter().map(|r| r.interbank_assets).collect();
    let assets: Vec<f64> = records.iter().map(|r| r.total_assets).collect();
    for topology in [TopologySpec::Complete, TopologySpec::CorePeriphery { core: 10 }] {
        let support = topology.adjacency(&assets).unwrap();
        let x = reconstruct_interbank(&rows, &cols, &support).unwrap();
        let err = marginal_error(&x, &rows, &cols);
        pass &= err < 1e-9;
        parts.push(format!("{} marginal err {err:.2e}", topology.name()));
    }
    report(10, "calibration closure", pass, &parts.join("; "));
    assert!(pass);
}

#[test]
fn solvency_estimator_complements_and_decreases() {
    let _guard = serial();
    let spec = ToySpec::new(4, ToyTopology::Complete, 5.0, 0.1).with_correlation(0.5);
    let at = |m: f64| spec.scenario(Regime::new(RegimeKind::LargeVolatility, m).unwrap()).unwrap();
    let solvency = |m: f64, seed: u64| {
        let scenario = at(m);
        let tilt = scenario.tilt().unwrap();
        aggregate(&run_gamma_c(&scenario, 100_000, seed, &tilt).unwrap()).unwrap()
    };

    let g1 = solvency(1.0, SEED);
    let d1 = ilis(&at(1.0), Payoff::Indicator, 100_000, SEED + 1);
    let se = (g1.std_error.powi(2) + d1.std_error.powi(2)).sqrt();
    let gap = (g1.estimate + d1.estimate - 1.0).abs();
    let complement_ok = gap <= 3.0 * se;

    let g2 = solvency(2.0, SEED + 2);
    let g3 = solvency(3.0, SEED + 3);
    let decreasing = g1.estimate > g2.estimate && g2.estimate > g3.estimate;

    let pass = complement_ok && decreasing;
    report(
        11,
        "solvency estimator",
        pass,
        &format!(
            "solvency+default-1 = {:.2e} ({:.2} SE); solvency at m=1,2,3: {:.4}, {:.4}, {:.4}",
            g1.estimate + d1.estimate - 1.0,
            gap / se,
            g1.estimate,
            g2.estimate,
            g3.estimate
        ),
    );
    assert!(pass);
}
