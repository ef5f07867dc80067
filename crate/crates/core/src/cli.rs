//! Command-line front end. Every subcommand reads files, calls the library
//! and writes the library's encodings unchanged.
//!
//! Exit codes: 0 success or accepted, 1 rejected or not found, 2 usage,
//! parse or schema error, 3 internal invariant violation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::eval::{verify_witness, EvalError, Witness};
use crate::formula::{parse_etr_inv, Assignment, EtrInvFormula, FormulaError};
use crate::lowering::{compile_staged, CompilationMap, LoweringError, Stage};
use crate::network::{decode_instance, emit_dot, encode_instance, CostKind, Role, SchemaError, TrainingInstance};
use crate::scalar::{parse_rational, Scalar};
use crate::solver::{grid_search, local_search, SolverConfig, SolverError};
use crate::witness::{extract_assignment, synthesize_witness, WitnessError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Rejected = 1,
    Usage = 2,
    Internal = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StageArg {
    Restricted,
    Fixedfree,
    Plain,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Restricted => Stage::Restricted,
            StageArg::Fixedfree => Stage::FixedFree,
            StageArg::Plain => Stage::Plain,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CostArg {
    Mse,
    L1,
}

impl From<CostArg> for CostKind {
    fn from(c: CostArg) -> CostKind {
        match c {
            CostArg::Mse => CostKind::Mse,
            CostArg::L1 => CostKind::L1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "etrnn", version, about = "Compile ETR-INV formulas into training instances and check witnesses")]
struct Cli {
    /// Output format for reports and errors.
    #[arg(long, global = true, value_enum, default_value = "text")]
    report: ReportFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a formula into a training instance.
    Compile {
        formula: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Write the compilation map here.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "plain")]
        stop_after: StageArg,
        #[arg(long, value_enum, default_value = "mse")]
        cost: CostArg,
    },
    /// Verify a witness against an instance.
    Verify {
        instance: PathBuf,
        witness: PathBuf,
        /// Slack for float witnesses.
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Build the witness for a formula solution.
    Synth {
        formula: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "plain")]
        stop_after: StageArg,
        #[arg(long, value_enum, default_value = "mse")]
        cost: CostArg,
        /// Residual slack for float solutions.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Read the formula solution out of a zero-cost witness.
    Extract {
        instance: PathBuf,
        witness: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Search for a witness.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 5000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        /// Exact grid search over these comma-separated rationals instead.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Node budget for grid search.
        #[arg(long, default_value_t = 10_000_000)]
        budget: u128,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render an instance as Graphviz.
    Dot {
        instance: PathBuf,
        #[arg(short, long)]
        witness: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print instance dimensions.
    Stats { instance: PathBuf },
}

#[derive(Debug)]
struct CliError {
    status: ExitStatus,
    kind: &'static str,
    message: String,
    path: Option<String>,
}

impl CliError {
    fn new(status: ExitStatus, kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            status,
            kind,
            message: message.into(),
            path: None,
        }
    }

    fn usage(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(ExitStatus::Usage, kind, message)
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError {
            path: Some(e.path.clone()),
            ..CliError::usage("schema", e.to_string())
        }
    }
}

impl From<FormulaError> for CliError {
    fn from(e: FormulaError) -> Self {
        CliError::usage("formula", e.to_string())
    }
}

impl From<LoweringError> for CliError {
    fn from(e: LoweringError) -> Self {
        CliError::usage("lowering", e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::usage("evaluation", e.to_string())
    }
}

impl From<WitnessError> for CliError {
    fn from(e: WitnessError) -> Self {
        let status = match &e {
            WitnessError::UnsatisfyingAssignment
            | WitnessError::ZeroInverse(_)
            | WitnessError::NotZeroCost(_)
            | WitnessError::ZeroScalingWeight(_) => ExitStatus::Rejected,
            WitnessError::Invariant(_) => ExitStatus::Internal,
            _ => ExitStatus::Usage,
        };
        CliError::new(status, "witness", e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        let status = match &e {
            SolverError::BudgetExceeded { .. } | SolverError::NonFiniteCost => ExitStatus::Rejected,
            _ => ExitStatus::Usage,
        };
        CliError::new(status, "solver", e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::usage("io", format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::usage("io", format!("cannot write {}: {e}", path.display())))
}

fn read_formula(path: &Path) -> Result<EtrInvFormula, CliError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::usage("formula", "formula file is not UTF-8"))?;
    Ok(parse_etr_inv(&text)?)
}

fn read_instance(path: &Path) -> Result<TrainingInstance, CliError> {
    Ok(decode_instance(&read(path)?)?)
}

fn read_witness(path: &Path) -> Result<Witness, CliError> {
    Ok(Witness::decode(&read(path)?)?)
}

/// Assignment files are JSON objects from variable name to scalar.
pub fn decode_assignment(bytes: &[u8], names: &[String]) -> Result<Assignment, SchemaError> {
    let by_name: BTreeMap<String, Scalar> = serde_json::from_slice(bytes).map_err(|e| SchemaError {
        path: "/".into(),
        message: e.to_string(),
    })?;
    Assignment::from_names(names, &by_name).map_err(|e| SchemaError {
        path: "/".into(),
        message: e.to_string(),
    })
}

pub fn encode_assignment(a: &Assignment, names: &[String]) -> Vec<u8> {
    let mut bytes = serde_json::to_vec(&a.to_names(names)).expect("assignment serializes");
    bytes.push(b'\n');
    bytes
}

struct Outcome {
    status: ExitStatus,
    text: String,
    json: Value,
}

impl Outcome {
    fn ok(text: String, json: Value) -> Self {
        Outcome {
            status: ExitStatus::Success,
            text,
            json,
        }
    }
}

fn execute(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Compile {
            formula,
            output,
            map,
            stop_after,
            cost,
        } => {
            let f = read_formula(&formula)?;
            let (inst, cmap) = compile_staged(&f, stop_after.into(), cost.into())?;
            write(&output, &encode_instance(&inst))?;
            if let Some(map) = map {
                write(&map, &cmap.encode())?;
            }
            let stats = stats_json(&inst);
            Ok(Outcome::ok(
                format!(
                    "compiled {} variables, {} constraints into {} neurons, {} edges, {} data points\n",
                    f.num_vars(),
                    f.constraints().len(),
                    inst.neurons.len(),
                    inst.edges.len(),
                    inst.data.len()
                ),
                json!({ "status": "ok", "stage": cmap.stage, "stats": stats }),
            ))
        }
        Command::Verify {
            instance,
            witness,
            tolerance,
        } => {
            let inst = read_instance(&instance)?;
            let w = read_witness(&witness)?;
            let report = verify_witness(&inst, &w, tolerance)?;
            let text = format!(
                "{}\ncost: {}\n",
                if report.accepted { "accepted" } else { "rejected" },
                report.total_cost
            );
            let json = serde_json::to_value(&report).expect("report serializes");
            Ok(Outcome {
                status: if report.accepted { ExitStatus::Success } else { ExitStatus::Rejected },
                text,
                json,
            })
        }
        Command::Synth {
            formula,
            solution,
            output,
            stop_after,
            cost,
            tolerance,
        } => {
            let f = read_formula(&formula)?;
            let a = decode_assignment(&read(&solution)?, f.names())?;
            let (inst, map) = compile_staged(&f, stop_after.into(), cost.into())?;
            let w = synthesize_witness(&inst, &map, &a, tolerance)?;
            write(&output, &w.encode())?;
            Ok(Outcome::ok(
                format!("wrote witness with {} weights, {} biases\n", w.weights.len(), w.biases.len()),
                json!({ "status": "ok", "weights": w.weights.len(), "biases": w.biases.len() }),
            ))
        }
        Command::Extract {
            instance,
            witness,
            map,
            output,
        } => {
            let inst = read_instance(&instance)?;
            let w = read_witness(&witness)?;
            let map = CompilationMap::decode(&read(&map)?)?;
            let a = extract_assignment(&inst, &w, &map)?;
            let names = map.source.names();
            write(&output, &encode_assignment(&a, names))?;
            let mut text = String::new();
            for (name, v) in a.to_names(names) {
                let _ = writeln!(text, "{name} = {v}");
            }
            Ok(Outcome::ok(text, json!({ "status": "ok", "assignment": a.to_names(names) })))
        }
        Command::Solve {
            instance,
            restarts,
            iters,
            seed,
            step,
            lo,
            hi,
            tolerance,
            grid,
            budget,
            output,
        } => {
            let inst = read_instance(&instance)?;
            if let Some(grid) = grid {
                let values = grid
                    .split(',')
                    .map(|s| parse_rational(s.trim()).map(Scalar::Exact))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::usage("usage", format!("bad grid value: {e}")))?;
                return match grid_search(&inst, &values, budget)? {
                    Some(w) => {
                        if let Some(out) = output {
                            write(&out, &w.encode())?;
                        }
                        Ok(Outcome::ok(
                            "found zero-cost witness\ncost: 0\n".into(),
                            json!({ "status": "found", "cost": "0", "witness": w }),
                        ))
                    }
                    None => Ok(Outcome {
                        status: ExitStatus::Rejected,
                        text: "not found\n".into(),
                        json: json!({ "status": "not_found" }),
                    }),
                };
            }
            let cfg = SolverConfig {
                restarts,
                max_iters: iters,
                step,
                init_lo: lo,
                init_hi: hi,
                seed,
                tolerance,
            };
            let r = local_search(&inst, &cfg)?;
            if let Some(out) = output {
                write(&out, &r.witness.encode())?;
            }
            let found = r.cost < tolerance;
            Ok(Outcome {
                status: if found { ExitStatus::Success } else { ExitStatus::Rejected },
                text: format!(
                    "{}\ncost: {:e}\nrestart: {} of {}\n",
                    if found { "converged" } else { "not converged" },
                    r.cost,
                    r.restart,
                    r.restarts_run
                ),
                json: serde_json::to_value(&r).expect("result serializes"),
            })
        }
        Command::Dot {
            instance,
            witness,
            output,
        } => {
            let inst = read_instance(&instance)?;
            let w = witness.as_deref().map(read_witness).transpose()?;
            let dot = emit_dot(&inst, w.as_ref())?;
            write(&output, dot.as_bytes())?;
            Ok(Outcome::ok(String::new(), json!({ "status": "ok" })))
        }
        Command::Stats { instance } => {
            let inst = read_instance(&instance)?;
            let s = stats_json(&inst);
            let mut text = String::new();
            for key in ["inputs", "hidden", "outputs", "edges", "data_points", "matrix_size"] {
                let _ = writeln!(text, "{key}: {}", s[key]);
            }
            Ok(Outcome::ok(text, s))
        }
    }
}

fn stats_json(inst: &TrainingInstance) -> Value {
    let count = |r: Role| inst.neurons.iter().filter(|n| n.role == r).count();
    json!({
        "inputs": count(Role::Input),
        "hidden": count(Role::Hidden),
        "outputs": count(Role::Output),
        "edges": inst.edges.len(),
        "data_points": inst.data.len(),
        "matrix_size": inst.data_matrix_size(),
    })
}

/// Runs one command line (including the program name) and writes its
/// streams to `out` and `err`.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let json_errors = argv.iter().any(|a| a == "--report=json")
        || argv.windows(2).any(|w| w[0] == "--report" && w[1] == "json");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return ExitStatus::Success;
            }
            let e = CliError::usage("usage", e.render().to_string());
            report_error(&e, json_errors, err);
            return e.status;
        }
    };
    let json = cli.report == ReportFormat::Json;
    match execute(cli.command) {
        Ok(o) => {
            if json {
                let _ = writeln!(out, "{}", o.json);
            } else {
                let _ = write!(out, "{}", o.text);
            }
            o.status
        }
        Err(e) => {
            report_error(&e, json, err);
            e.status
        }
    }
}

fn report_error(e: &CliError, json: bool, err: &mut dyn Write) {
    if json {
        let mut v = json!({ "error": e.kind, "message": e.message, "exit_code": e.status.code() });
        if let Some(p) = &e.path {
            v["path"] = Value::from(p.clone());
        }
        let _ = writeln!(err, "{v}");
    } else {
        let _ = writeln!(err, "error: {}", e.message.trim_end());
    }
}
