use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use recconv::dsl::{self, RecurrenceFile};
use recconv::gf_verifier::{check_example_identity, check_linear_identity, CancellationReport};
use recconv::model::{Recurrence, Rule, ThreeLagFamily};
use recconv::oracle::{analyze, simulate, Analysis, OracleConfig, OracleOutcome};
use recconv::xval::{
    sweep_condition_v, sweep_linear, Execution, GridSpec, InstanceColumns, SweepReport,
};
use recconv::Rational;

/// Longest trajectory prefix printed for a simulation that did not converge.
const PREFIX_LIMIT: usize = 64;

#[derive(Parser, Debug)]
#[command(name = "recconv", version, about = "Exact convergence analysis for rational recurrences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide convergence to the target (closed form, then oracle).
    Analyze(RecArgs),
    /// Iterate the recurrence exactly and report the oracle outcome.
    Simulate(RecArgs),
    /// Check the generating-function identity up to x^N.
    VerifySeries(SeriesArgs),
    /// Cross-validate a parameter grid against the oracle.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value_t = OracleConfig::default().max_steps)]
    max_steps: u64,
    #[arg(long, default_value_t = OracleConfig::default().max_bits)]
    max_bits: u64,
}

impl OracleArgs {
    fn config(&self) -> OracleConfig {
        OracleConfig {
            max_steps: self.max_steps,
            max_bits: self.max_bits,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Args, Debug)]
struct RecArgs {
    input: PathBuf,
    /// Overrides the file's `target`.
    #[arg(long)]
    target: Option<Rational>,
    #[command(flatten)]
    oracle: OracleArgs,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    input: PathBuf,
    /// Truncation index N; the trajectory runs r_0..r_N.
    #[arg(long)]
    degree: usize,
    #[arg(long)]
    target: Option<Rational>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Grid description (JSON).
    grid: PathBuf,
    #[arg(long)]
    json_out: Option<PathBuf>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    oracle: OracleArgs,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Debug)]
enum CliError {
    /// Malformed or invalid input; exit code 2.
    Input(String),
    /// Unreadable or unwritable file; exit code 3.
    Io(String),
}

impl CliError {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    fn input(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

/// Common output document. Every key is always present.
#[derive(Serialize)]
struct Document {
    verdict: String,
    method: String,
    #[serde(rename = "M")]
    m: Option<u64>,
    target: Option<Rational>,
    details: Value,
}

struct Output {
    doc: Document,
    /// Extra lines for the text format.
    text: Vec<String>,
}

impl Output {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.doc).expect("document serializes");
                s.push('\n');
                s
            }
            Format::Text => {
                let mut s = String::new();
                let doc = &self.doc;
                let _ = writeln!(s, "verdict: {}", doc.verdict);
                let _ = writeln!(s, "method: {}", doc.method);
                let _ = writeln!(s, "M: {}", doc.m.map_or("-".to_string(), |m| m.to_string()));
                let _ = writeln!(
                    s,
                    "target: {}",
                    doc.target.as_ref().map_or("-".to_string(), ToString::to_string)
                );
                for line in &self.text {
                    let _ = writeln!(s, "{line}");
                }
                s
            }
        }
    }
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn load_rec(path: &Path) -> Result<(RecurrenceFile, Recurrence), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let file = dsl::parse_bytes(&bytes).map_err(|e| CliError::input(path, e))?;
    let rec = file.to_recurrence().map_err(|e| CliError::input(path, e))?;
    Ok((file, rec))
}

fn resolve_target(
    flag: Option<Rational>,
    file: &RecurrenceFile,
    path: &Path,
) -> Result<Rational, CliError> {
    flag.or_else(|| file.target.clone()).ok_or_else(|| {
        CliError::input(path, "no target: give --target or a `target` line")
    })
}

fn join(terms: &[Rational]) -> String {
    terms.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn run_analyze(args: &RecArgs) -> Result<Output, CliError> {
    let (file, rec) = load_rec(&args.input)?;
    let target = resolve_target(args.target.clone(), &file, &args.input)?;
    let analysis: Analysis = analyze(&rec, &target, &args.oracle.config());

    let mut text = Vec::new();
    if let recconv::model::Outcome::DoesNotConverge { reason } = &analysis.verdict.outcome {
        text.push(format!("reason: {reason}"));
    }
    if let recconv::model::Outcome::Unknown {
        steps_used,
        bits_cap_hit,
    } = &analysis.verdict.outcome
    {
        text.push(format!("steps used: {steps_used}, bit cap hit: {bits_cap_hit}"));
    }
    if let Some(b) = &analysis.breakdown {
        for clause in &b.clauses {
            let mark = if clause.satisfied { "yes" } else { "no" };
            text.push(format!("  [{mark}] {} (residual {})", clause.name, clause.value));
        }
    }
    if let Some(r) = &analysis.fixed_point_residual {
        text.push(format!("fixed-point residual: {r}"));
    }

    Ok(Output {
        doc: Document {
            verdict: analysis.verdict.label().to_string(),
            method: analysis.verdict.method.to_string(),
            m: analysis.verdict.m(),
            target: Some(target),
            details: to_value(&analysis),
        },
        text,
    })
}

fn run_simulate(args: &RecArgs) -> Result<Output, CliError> {
    let (file, rec) = load_rec(&args.input)?;
    let target = resolve_target(args.target.clone(), &file, &args.input)?;
    let outcome = simulate(&rec, &target, &args.oracle.config());

    let prefix = match &outcome {
        OracleOutcome::Converged { prefix, .. } => prefix.clone(),
        OracleOutcome::NotWithinBound { steps } => {
            rec.trajectory((rec.order() + *steps as usize).min(PREFIX_LIMIT))
        }
        OracleOutcome::Blowup { step, .. } => rec.trajectory((*step as usize).min(PREFIX_LIMIT)),
    };
    let mut details = to_value(&outcome);
    details["prefix"] = to_value(&prefix);

    let mut text = match &outcome {
        OracleOutcome::Converged { .. } => vec!["oracle: converged".to_string()],
        OracleOutcome::NotWithinBound { steps } => {
            vec![format!("oracle: no certified convergence within {steps} steps")]
        }
        OracleOutcome::Blowup { step, bits } => {
            vec![format!("oracle: term {step} has {bits} bits, over the cap")]
        }
    };
    text.push(format!("prefix: {}", join(&prefix)));

    Ok(Output {
        doc: Document {
            verdict: outcome.label().to_string(),
            method: "oracle".to_string(),
            m: outcome.m(),
            target: Some(target),
            details,
        },
        text,
    })
}

fn run_verify_series(args: &SeriesArgs) -> Result<Output, CliError> {
    let (file, rec) = load_rec(&args.input)?;
    let target = args.target.clone().or_else(|| file.target.clone());
    let n = args.degree;
    let report: CancellationReport = match &rec {
        Recurrence::Linear(lin) => check_linear_identity(lin, target.as_ref(), n),
        Recurrence::Polynomial(poly) => {
            let family = ThreeLagFamily::from_polynomial(poly).ok_or_else(|| {
                CliError::input(
                    &args.input,
                    "verify-series handles linear rules and the three-lag family \
                     r[i] = a1 (r[i-1] - r[i-3]) + a2 r[i-2]^2 + a3 r[i-3] r[i-1] + d",
                )
            })?;
            check_example_identity(&family, target.as_ref(), n)
        }
    }
    .map_err(|e| CliError::input(&args.input, e))?;

    let m = target.as_ref().and_then(|k| {
        let cfg = OracleConfig {
            max_steps: n as u64,
            ..OracleConfig::default()
        };
        simulate(&rec, k, &cfg).m()
    });

    let middle = &report.middle;
    let mut text = vec![match middle.first_violation {
        None => format!("middle x^{}..x^{}: all zero", middle.start, middle.end),
        Some(t) => format!(
            "middle x^{}..x^{}: first nonzero at x^{t}",
            middle.start, middle.end
        ),
    }];
    text.push(format!("coefficients: {}", join(&report.coefficients)));
    let mut describe = |label: &str, checks: &[recconv::gf_verifier::CoeffCheck]| {
        for c in checks {
            let mark = if c.matches { "ok" } else { "MISMATCH" };
            text.push(format!(
                "{label} x^{}: {} (expected {}) {mark}",
                c.index, c.actual, c.expected
            ));
        }
    };
    describe("head", &report.head);
    describe("tail", &report.tail);
    if let Some(cf) = &report.tail_closed_form {
        describe("tail at K", cf);
    }

    Ok(Output {
        doc: Document {
            verdict: if report.ok() { "identity-holds" } else { "identity-fails" }.to_string(),
            method: "generating-function".to_string(),
            m,
            target,
            details: to_value(&report),
        },
        text,
    })
}

fn write_csv<I: InstanceColumns>(report: &SweepReport<I>, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut header = vec!["index"];
    header.extend(I::headers());
    header.extend(["condition", "method", "oracle", "oracle_m", "mismatch"]);
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for row in &report.rows {
        let mut record = vec![row.index.to_string()];
        record.extend(row.instance.fields());
        record.push(row.condition.to_string());
        record.push(row.method.to_string());
        record.push(row.oracle.to_string());
        record.push(row.oracle_m.map_or(String::new(), |m| m.to_string()));
        record.push(row.mismatch.to_string());
        w.write_record(&record).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn persist<I: InstanceColumns + Serialize>(
    report: &SweepReport<I>,
    args: &SweepArgs,
) -> Result<(), CliError> {
    if let Some(path) = &args.json_out {
        let mut body = serde_json::to_string_pretty(report).expect("report serializes");
        body.push('\n');
        fs::write(path, body).map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &args.csv_out {
        write_csv(report, path)?;
    }
    Ok(())
}

fn sweep_output<I>(report: &SweepReport<I>, method: &str) -> Output {
    let summary = report.summary();
    let text = vec![
        format!("instances: {}", summary.total),
        format!("condition yes, oracle converged: {}", summary.condition_yes_oracle_converged),
        format!("condition yes, oracle other: {}", summary.condition_yes_oracle_other),
        format!("condition no, oracle converged: {}", summary.condition_no_oracle_converged),
        format!("condition no, oracle other: {}", summary.condition_no_oracle_other),
        format!("oracle inconclusive: {}", summary.oracle_inconclusive),
        format!("mismatches: {}", summary.mismatches),
    ];
    Output {
        doc: Document {
            verdict: if summary.mismatches == 0 { "agreement" } else { "mismatch" }.to_string(),
            method: method.to_string(),
            m: None,
            target: None,
            details: to_value(&summary),
        },
        text,
    }
}

fn run_sweep(args: &SweepArgs) -> Result<Output, CliError> {
    let bytes = fs::read(&args.grid).map_err(|e| CliError::io(&args.grid, e))?;
    let spec: GridSpec = serde_json::from_slice(&bytes).map_err(|e| CliError::input(&args.grid, e))?;
    let cfg = args.oracle.config();
    let mode = if args.parallel {
        Execution::Parallel
    } else {
        Execution::Serial
    };
    match spec {
        GridSpec::Linear(grid) => {
            let report = sweep_linear(&grid, &cfg, mode).map_err(|e| CliError::input(&args.grid, e))?;
            persist(&report, args)?;
            Ok(sweep_output(&report, "xval-linear"))
        }
        GridSpec::ConditionV(grid) => {
            let report =
                sweep_condition_v(&grid, &cfg, mode).map_err(|e| CliError::input(&args.grid, e))?;
            persist(&report, args)?;
            Ok(sweep_output(&report, "xval-condition-v"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, format) = match &cli.command {
        Command::Analyze(a) => (run_analyze(a), a.format),
        Command::Simulate(a) => (run_simulate(a), a.format),
        Command::VerifySeries(a) => (run_verify_series(a), a.format),
        Command::Sweep(a) => (run_sweep(a), a.format),
    };
    match result {
        Ok(out) => {
            print!("{}", out.render(format));
            ExitCode::SUCCESS
        }
        Err(err) => {
            let (CliError::Input(msg) | CliError::Io(msg)) = &err;
            eprintln!("error: {msg}");
            ExitCode::from(err.exit_code())
        }
    }
}
