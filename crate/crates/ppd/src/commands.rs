//! Subcommand implementations. Console output goes to the supplied writer so
//! the commands can be driven from tests.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use ppd_core::packet::OpCode;
use ppd_core::sim::{default_pattern, run_error_correction, run_logic_experiment, InputSpec, Pattern, Scenario};
use rayon::prelude::*;
use serde::Serialize;

use crate::format::sig9;
use crate::io::{self, circuit_ledger_rows, tracking_ledger_rows, write_file_with};
use crate::validate::run_checks;
use crate::CliError;

fn parse_op(s: &str) -> Result<OpCode, String> {
    OpCode::from_name(&s.to_ascii_lowercase())
        .ok_or_else(|| format!("unknown operation `{s}` (expected through, not, and, or, nand, nor, xor, xnor)"))
}

fn parse_pattern(s: &str) -> Result<Pattern, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_p(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("probability {p} is outside [0, 1]"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct LogicOpArgs {
    /// Operation: through, not, and, or, nand, nor, xor, xnor.
    #[arg(long, value_parser = parse_op)]
    pub op: Option<OpCode>,
    /// Input logic per slot, e.g. 00011110. Binary operations need an even length.
    #[arg(long, value_parser = parse_pattern)]
    pub pattern: Option<Pattern>,
    /// Scenario JSON; --op and --pattern override its fields.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, env = "PPD_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CorrectArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub slots: Option<usize>,
    /// Probability of a One input slot.
    #[arg(long, value_parser = parse_p)]
    pub p: Option<f64>,
    /// Only run the baseline that outputs the demand.
    #[arg(long)]
    pub no_algorithm: bool,
    #[arg(long, env = "PPD_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Number of seeds per probability, starting at 0.
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    /// Comma-separated input probabilities.
    #[arg(long, value_delimiter = ',', value_parser = parse_p, default_value = "0.5")]
    pub p: Vec<f64>,
    #[arg(long)]
    pub slots: Option<usize>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, env = "PPD_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
}

fn write_csv_file<F>(dir: &Path, name: &str, f: F) -> Result<(), CliError>
where
    F: FnOnce(BufWriter<std::fs::File>) -> Result<(), io::IoError>,
{
    write_file_with(&dir.join(name), |file| f(BufWriter::new(file)))?;
    Ok(())
}

fn console(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), CliError> {
    out.write_fmt(text).map_err(|e| CliError::Run(e.into()))
}

pub fn logic_op(args: &LogicOpArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut sc = match &args.scenario {
        Some(path) => io::load_scenario(path)?,
        None => {
            let op = args.op.ok_or_else(|| CliError::Usage("--op is required without --scenario".into()))?;
            Scenario::logic(op, default_pattern(op))
        }
    };
    if let Some(op) = args.op {
        sc.operation = op;
    }
    if let Some(p) = &args.pattern {
        sc.slots = p.0.len();
        sc.inputs = InputSpec::Explicit { pattern: p.clone() };
    }
    let run = run_logic_experiment(&sc)?;

    io::ensure_dir(&args.out)?;
    write_csv_file(&args.out, "events.csv", |w| io::write_events(w, &run.events))?;
    write_csv_file(&args.out, "ledger.csv", |w| io::write_ledger(w, circuit_ledger_rows(&run.circuit)))?;
    match &run.heatmap {
        Some(map) => write_csv_file(&args.out, "heatmap.csv", |w| io::write_heatmap(w, map, &run.columns))?,
        None => console(out, format_args!("heat map skipped: no input energy to normalize by\n"))?,
    }

    console(out, format_args!("operation {} over {} slots\n", run.operation, run.inputs.len()))?;
    let mut mismatches = 0;
    for (e, want) in run.events.iter().zip(&run.expected) {
        let got = e.out_logic.map_or('-', |v| v.as_char());
        let exp = want.map_or('-', |v| v.as_char());
        let flag = if e.out_logic == *want { "" } else { "  MISMATCH" };
        if !flag.is_empty() {
            mismatches += 1;
        }
        console(
            out,
            format_args!(
                "k={:<3} in={} out={} expected={} buffer={:<9} charge={}{flag}\n",
                e.k,
                e.in_logic,
                got,
                exp,
                e.buffer_action.as_str(),
                sig9(e.buffer_charge)
            ),
        )?;
    }
    if mismatches > 0 {
        return Err(CliError::OracleMismatch(format!("{mismatches} slot(s) disagree with the truth table")));
    }
    console(out, format_args!("all outputs match the truth table\n"))
}

fn correction_scenario(
    scenario: &Option<PathBuf>,
    seed: Option<u64>,
    slots: Option<usize>,
    p: Option<f64>,
) -> Result<Scenario, CliError> {
    let mut sc = match scenario {
        Some(path) => io::load_scenario(path)?,
        None => Scenario::error_correction(0),
    };
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    if let Some(n) = slots {
        sc.slots = n;
    }
    if let Some(p) = p {
        sc.inputs = InputSpec::Bernoulli { p };
    }
    Ok(sc)
}

pub fn correct(args: &CorrectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut sc = correction_scenario(&args.scenario, args.seed, args.slots, args.p)?;
    if args.no_algorithm {
        sc.algorithm_on = false;
    }
    let run = run_error_correction(&sc)?;
    let dir = &args.out;
    io::ensure_dir(dir)?;

    write_csv_file(dir, "trace_without.csv", |w| io::write_trace(w, &run.without))?;
    write_csv_file(dir, "ledger_without.csv", |w| {
        io::write_ledger(w, tracking_ledger_rows(&run.without, &run.ledgers_without))
    })?;
    let mut summary = serde_json::to_value(run.summary(&sc)).map_err(|e| CliError::Run(e.into()))?;
    if sc.algorithm_on {
        write_csv_file(dir, "trace_with.csv", |w| io::write_trace(w, &run.with))?;
        write_csv_file(dir, "ledger_with.csv", |w| {
            io::write_ledger(w, tracking_ledger_rows(&run.with, &run.ledgers_with))
        })?;
        io::write_json(&dir.join("metrics.json"), &run.metrics)?;
    } else {
        summary["avg_err_with"] = serde_json::Value::Null;
    }
    io::write_json(&dir.join("summary.json"), &summary)?;
    let models = io::mode_models(&sc.params, sc.period)?;
    io::write_json(&dir.join("models.json"), &models)?;

    let m = &run.metrics;
    if sc.algorithm_on {
        console(
            out,
            format_args!("avg_abs_err with={} without={}\n", sig9(m.avg_abs_err_with), sig9(m.avg_abs_err_without)),
        )
    } else {
        console(out, format_args!("avg_abs_err without={}\n", sig9(m.avg_abs_err_without)))
    }
}

/// Aggregate over seeds for one input probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub seeds: u64,
    pub frac_with_better: f64,
    pub mean_improvement: f64,
    pub mean_avg_err_with: f64,
    pub mean_avg_err_without: f64,
}

/// Runs `seeds` error-correction runs per probability in parallel. Results
/// do not depend on the thread count.
pub fn sweep_rows(base: &Scenario, seeds: u64, ps: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    ps.iter()
        .map(|&p| {
            let metrics: Vec<_> = (0..seeds)
                .into_par_iter()
                .map(|seed| {
                    let sc = Scenario { seed, inputs: InputSpec::Bernoulli { p }, ..base.clone() };
                    run_error_correction(&sc).map(|r| r.metrics)
                })
                .collect::<Result<_, _>>()?;
            let n = metrics.len() as f64;
            let mean = |f: &dyn Fn(&ppd_core::sim::Metrics) -> f64| metrics.iter().map(f).sum::<f64>() / n;
            Ok(SweepRow {
                p,
                seeds,
                frac_with_better: metrics.iter().filter(|m| m.avg_abs_err_with < m.avg_abs_err_without).count() as f64
                    / n,
                mean_improvement: mean(&|m| m.improvement()),
                mean_avg_err_with: mean(&|m| m.avg_abs_err_with),
                mean_avg_err_without: mean(&|m| m.avg_abs_err_without),
            })
        })
        .collect()
}

pub fn sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let base = correction_scenario(&args.scenario, None, args.slots, None)?;
    let rows = sweep_rows(&base, args.seeds, &args.p)?;
    io::ensure_dir(&args.out)?;
    write_csv_file(&args.out, "sweep.csv", |w| {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record([
            "p",
            "seeds",
            "frac_with_better",
            "mean_improvement",
            "mean_avg_err_with",
            "mean_avg_err_without",
        ])?;
        for r in &rows {
            wr.write_record([
                sig9(r.p),
                r.seeds.to_string(),
                sig9(r.frac_with_better),
                sig9(r.mean_improvement),
                sig9(r.mean_avg_err_with),
                sig9(r.mean_avg_err_without),
            ])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    for r in &rows {
        console(
            out,
            format_args!(
                "p={} seeds={} with_better={} mean_improvement={}\n",
                sig9(r.p),
                r.seeds,
                sig9(r.frac_with_better),
                sig9(r.mean_improvement)
            ),
        )?;
    }
    Ok(())
}

pub fn validate(out: &mut dyn Write) -> Result<(), CliError> {
    let checks = run_checks();
    for c in &checks {
        console(out, format_args!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))?;
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::OracleMismatch(format!("failed checks: {}", failed.join(", "))))
    }
}
