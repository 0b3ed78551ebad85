use std::collections::HashMap;

use serde::Serialize;

use super::config::{require, ExperimentConfig, OutputFormat, PopularitySpec};
use super::output::{to_csv, to_json, to_json_lines, write_file, Outcome};
use super::CliError;
use crate::analytics::{
    concentration_scale, expected_rate_exact, expected_rate_sampled, lower_bound_rate, prob_b,
    profile_count, rate_exact, rate_exact_bruteforce, upper_bound_detail, ProbBMode,
    MAX_BRUTEFORCE_USERS, MAX_EXACT_PROB_B_CONTENTS, MAX_PROFILES,
};
use crate::asymptotics::{regime_sweep, RegimeSpec, SweepRow};
use crate::model::{derive_seed, profile_of, ProblemInstance, RequestVector};
use crate::simulator::{replay_trial, run_trials, summarize, DemandSource, TraceRecord};

/// Relative tolerance between the fast and brute-force rate.
const ORACLE_TOLERANCE: f64 = 1e-10;
/// Slack for comparisons between exactly computed quantities.
const EXACT_SLACK: f64 = 1e-9;
/// Standard-error multiple allowed when a side of the sandwich is sampled.
const SAMPLED_SIGMAS: f64 = 4.0;
/// Largest accepted |z| for the simulation cross-check.
const MAX_Z: f64 = 5.0;

const DEFAULT_BOUNDS_SAMPLES: usize = 10_000;
const DEFAULT_SWEEP_SAMPLES: usize = 100_000;
const DEFAULT_TRIALS: usize = 100;
const DEFAULT_SIM_BITS: u64 = 10_000;

fn outcome<R: Serialize, S: Serialize>(
    cfg: &ExperimentConfig,
    report: &R,
    summary: &S,
    table: String,
    failure: Option<String>,
) -> Outcome {
    Outcome {
        format: cfg.format.unwrap_or(OutputFormat::Json),
        output: cfg.output.clone(),
        report: to_json(report),
        table,
        summary: to_json(summary),
        failure,
    }
}

#[derive(Serialize)]
struct RateReport<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    q: &'a [f64],
    rate_exact: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_bruteforce: Option<f64>,
}

#[derive(Serialize)]
struct RateRow {
    rate_exact: f64,
    rate_bruteforce: Option<f64>,
}

pub fn rate(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let r = cfg.resolve(1)?;
    let d = demand_for(cfg, &r.instance)?
        .ok_or_else(|| CliError::config("demand", "missing required field"))?;
    let oracle = *cfg.oracle.get_or_insert(false);
    cfg.format.get_or_insert(OutputFormat::Json);

    let exact = rate_exact(&r.instance, &r.caching, &d)?;
    let brute = if oracle {
        Some(rate_exact_bruteforce(&r.instance, &r.caching, &d)?)
    } else {
        None
    };
    let failure = brute.and_then(|b| {
        ((b - exact).abs() > ORACLE_TOLERANCE * exact.abs().max(1.0))
            .then(|| format!("rate_exact = {exact} but brute force gives {b}"))
    });
    let report = RateReport {
        command: "rate",
        config: cfg,
        q: r.caching.fractions(),
        rate_exact: exact,
        rate_bruteforce: brute,
    };
    let table = to_csv(&[RateRow {
        rate_exact: exact,
        rate_bruteforce: brute,
    }])?;
    Ok(outcome(cfg, &report, &report, table, failure))
}

fn demand_for(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
) -> Result<Option<RequestVector>, CliError> {
    let d = cfg.demand_vector(inst.n)?;
    if let Some(d) = &d {
        if d.users() != inst.k {
            return Err(CliError::config(
                "demand",
                format!("has {} entries but K = {}", d.users(), inst.k),
            ));
        }
    }
    Ok(d)
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct BoundsReport<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    p: &'a [f64],
    q: &'a [f64],
    R_exact: f64,
    R_exact_method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    R_exact_std_error: Option<f64>,
    R_ub: f64,
    R_lb: f64,
    /// One-based content ids, least popular first; `PA` follows this order.
    PA_order: &'a [usize],
    PA: &'a [f64],
    /// `PB[i-1]`: probability of exactly `i` distinct requests.
    PB: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    PB_std_error: Option<&'a [f64]>,
    sandwich: &'static str,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct BoundsRow {
    R_lb: f64,
    R_exact: f64,
    R_ub: f64,
    sandwich: &'static str,
}

pub fn bounds(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let r = cfg.resolve(1)?;
    let samples = *cfg.mc_trials.get_or_insert(DEFAULT_BOUNDS_SAMPLES);
    let seed = *cfg.seed.get_or_insert(0);
    cfg.format.get_or_insert(OutputFormat::Json);
    let (inst, p, q) = (&r.instance, &r.popularity, &r.caching);

    let ub = upper_bound_detail(inst, p, q)?;
    let mode = if inst.n <= MAX_EXACT_PROB_B_CONTENTS {
        ProbBMode::Exact
    } else {
        ProbBMode::MonteCarlo {
            trials: samples,
            seed: derive_seed(seed, 1),
        }
    };
    let pb = prob_b(p, inst.k, mode)?;
    let r_lb = lower_bound_rate(inst, &pb.values)?;
    // spread of the sampled lower bound, summed per entry without cancellation
    let lb_spread: f64 = pb.std_errors.as_ref().map_or(0.0, |se| {
        se.iter()
            .enumerate()
            .map(|(i, s)| s * crate::analytics::cut_set_term(i + 1, inst.k, inst.m))
            .sum()
    });

    let (r_exact, method, r_se) = if profile_count(inst.n, inst.k) <= MAX_PROFILES {
        (expected_rate_exact(inst, p, q)?, "exact", None)
    } else {
        let est = expected_rate_sampled(inst, p, q, samples, derive_seed(seed, 2))?;
        (est.mean_rate, "monte_carlo", Some(est.std_error))
    };
    let slack = EXACT_SLACK * ub.value.abs().max(1.0);
    let low = SAMPLED_SIGMAS * (lb_spread + r_se.unwrap_or(0.0)) + slack;
    let high = SAMPLED_SIGMAS * r_se.unwrap_or(0.0) + slack;
    let pass = r_lb <= r_exact + low && r_exact <= ub.value + high;
    let verdict = if pass { "pass" } else { "fail" };
    let failure = (!pass).then(|| format!("expected {r_lb} <= {r_exact} <= {}", ub.value));

    let report = BoundsReport {
        command: "bounds",
        config: cfg,
        p: p.probs(),
        q: q.fractions(),
        R_exact: r_exact,
        R_exact_method: method,
        R_exact_std_error: r_se,
        R_ub: ub.value,
        R_lb: r_lb,
        PA_order: &ub.ascending_order,
        PA: &ub.prob_a,
        PB: &pb.values,
        PB_std_error: pb.std_errors.as_deref(),
        sandwich: verdict,
    };
    let table = to_csv(&[BoundsRow {
        R_lb: r_lb,
        R_exact: r_exact,
        R_ub: ub.value,
        sandwich: verdict,
    }])?;
    Ok(outcome(cfg, &report, &report, table, failure))
}

#[derive(Serialize)]
struct TrialRow {
    trial: usize,
    traffic_bits: u64,
    rate: f64,
}

#[derive(Serialize)]
struct SimSummary {
    mean_rate: f64,
    std_error: f64,
    /// Predicted rate: exact for a fixed demand, otherwise its expectation.
    prediction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction_std_error: Option<f64>,
    /// Mean per-trial binomial fluctuation scale, in units of `F`.
    #[serde(skip_serializing_if = "Option::is_none")]
    concentration_scale: Option<f64>,
    z: f64,
    decode_failures: Option<usize>,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    p: &'a [f64],
    q: &'a [f64],
    summary: &'a SimSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<&'a [crate::simulator::TrialRecord]>,
}

pub fn simulate(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let r = cfg.resolve(DEFAULT_SIM_BITS)?;
    let trials = *cfg.trials.get_or_insert(DEFAULT_TRIALS);
    let seed = *cfg.seed.get_or_insert(0);
    let verify = *cfg.verify.get_or_insert(true);
    cfg.format.get_or_insert(OutputFormat::Json);
    let (inst, p, q) = (&r.instance, &r.popularity, &r.caching);
    let fixed = demand_for(cfg, inst)?;
    let source = match &fixed {
        Some(d) => DemandSource::Fixed(d),
        None => DemandSource::Sampled(p),
    };

    let records = run_trials(inst, source, q, trials, seed, verify)?;
    let est = summarize(&records);
    let (prediction, prediction_se) = match &fixed {
        Some(d) => (rate_exact(inst, q, d)?, None),
        None if profile_count(inst.n, inst.k) <= MAX_PROFILES => {
            (expected_rate_exact(inst, p, q)?, None)
        }
        None => {
            let samples = *cfg.mc_trials.get_or_insert(DEFAULT_BOUNDS_SAMPLES);
            let e = expected_rate_sampled(inst, p, q, samples, derive_seed(seed, u64::MAX))?;
            (e.mean_rate, Some(e.std_error))
        }
    };
    let scale = if inst.k <= MAX_BRUTEFORCE_USERS {
        let mut memo = HashMap::new();
        let mut total = 0.0;
        for rec in &records {
            let key = profile_of(&rec.demand, inst.n);
            let s = match memo.get(&key) {
                Some(&s) => s,
                None => {
                    let s = concentration_scale(inst, q, &key.representative())?;
                    memo.insert(key, s);
                    s
                }
            };
            total += s;
        }
        Some(total / records.len() as f64)
    } else {
        None
    };
    let diff = est.mean_rate - prediction;
    let spread = (est.std_error.powi(2)
        + prediction_se.unwrap_or(0.0).powi(2)
        + scale.unwrap_or(0.0).powi(2))
    .sqrt();
    let z = if diff.abs() <= EXACT_SLACK * prediction.abs().max(1.0) {
        0.0
    } else {
        diff / spread
    };
    let decode_failures =
        verify.then(|| records.iter().filter(|r| r.decoded == Some(false)).count());

    let mut problems = Vec::new();
    if let Some(n) = decode_failures.filter(|&n| n > 0) {
        problems.push(format!("{n} trial(s) failed to decode"));
    }
    if !(z.abs() <= MAX_Z) {
        problems.push(format!("|z| = {} exceeds {MAX_Z}", z.abs()));
    }
    let failure = (!problems.is_empty()).then(|| problems.join("; "));

    if let Some(path) = cfg.trace.clone() {
        let (_, _, delivery) = replay_trial(inst, source, q, 0, seed)?;
        let lines: Vec<TraceRecord> = delivery.transmissions.iter().map(|t| t.trace()).collect();
        write_file(&path, &to_json_lines(&lines))?;
    }

    let summary = SimSummary {
        mean_rate: est.mean_rate,
        std_error: est.std_error,
        prediction,
        prediction_std_error: prediction_se,
        concentration_scale: scale,
        z,
        decode_failures,
    };
    let short = SimulateReport {
        command: "simulate",
        config: cfg,
        p: p.probs(),
        q: q.fractions(),
        summary: &summary,
        trials: None,
    };
    let rows: Vec<TrialRow> = records
        .iter()
        .map(|r| TrialRow {
            trial: r.trial,
            traffic_bits: r.traffic_bits,
            rate: r.rate,
        })
        .collect();
    let table = to_csv(&rows)?;
    let report = SimulateReport {
        trials: Some(&records),
        ..short
    };
    Ok(outcome(cfg, &report, &short, table, failure))
}

#[derive(Serialize)]
struct SweepReport<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<&'a [SweepRow]>,
}

pub fn sweep(cfg: &mut ExperimentConfig) -> Result<Outcome, CliError> {
    let v = match &cfg.popularity {
        Some(PopularitySpec::Zipf { zipf }) => *zipf,
        _ => {
            return Err(CliError::config(
                "popularity",
                "sweep needs a Zipf exponent (--zipf-v)",
            ))
        }
    };
    let m = require(&cfg.m, "M")?;
    let spec = RegimeSpec {
        v,
        a: *cfg.a.get_or_insert(1.0),
        n_list: require(&cfg.n_list, "n_list")?,
        c: cfg.c,
        lambda_prime: cfg.lambda_prime,
        mc_trials: *cfg.mc_trials.get_or_insert(DEFAULT_SWEEP_SAMPLES),
        seed: *cfg.seed.get_or_insert(0),
    };
    if spec.n_list.is_empty() {
        return Err(CliError::config("n_list", "must name at least one N"));
    }
    cfg.format.get_or_insert(OutputFormat::Json);

    let rows = regime_sweep(&spec, m)?;
    let below: Vec<usize> = rows
        .iter()
        .filter(|r| (r.n as f64) > m && r.ratio < 1.0 - EXACT_SLACK)
        .map(|r| r.n)
        .collect();
    let failure = (!below.is_empty()).then(|| format!("R_ub/R_lb < 1 at N = {below:?}"));

    let report = SweepReport {
        command: "sweep",
        config: cfg,
        rows: Some(&rows),
    };
    let summary = SweepReport {
        command: "sweep",
        config: cfg,
        rows: None,
    };
    Ok(outcome(cfg, &report, &summary, to_csv(&rows)?, failure))
}
