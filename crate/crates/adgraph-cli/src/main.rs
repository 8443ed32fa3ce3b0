//! Command-line front end for the adgraph library.
//!
//! Programs arrive as DSL source (`eval`, `grad`, `trace`, `dot`,
//! `compile`, `gradcheck`) or as serialized graph files (`run`); `-`
//! reads either from stdin. Points are given as repeated
//! `--bind NAME=VALUE` flags.
//!
//! Exit codes: 0 success, 1 usage or I/O trouble, 2 unparseable
//! source or graph file, 3 evaluation failure (missing binding,
//! domain violation, wrong output count), 4 a gradient check that ran
//! to completion and failed.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::exit;

use adgraph::{
    build_adjoint, compile, constant_fold, deserialize, evaluate, grad, gradcheck,
    gradient_forward, render_trace, serialize, to_dot, two_phase_grad, Bindings, Graph, NameMap,
    DEFAULT_STEP, DEFAULT_TOL,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adgraph", version, about = "Evaluate and differentiate dataflow programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a program and print each target
    Eval {
        /// Program source, or - for stdin
        file: String,
        /// Input value, repeatable: --bind x=2
        #[arg(long = "bind", value_name = "NAME=VALUE")]
        bind: Vec<String>,
    },
    /// Print the gradient of a single-target program
    Grad {
        file: String,
        #[arg(long = "bind", value_name = "NAME=VALUE")]
        bind: Vec<String>,
        /// How to differentiate
        #[arg(long, value_enum, default_value_t = Mode::Tape)]
        mode: Mode,
    },
    /// Print the forward and reverse execution trace at a point
    Trace {
        file: String,
        #[arg(long = "bind", value_name = "NAME=VALUE")]
        bind: Vec<String>,
        /// Decimal places in the value column
        #[arg(long, default_value_t = 3)]
        decimals: usize,
    },
    /// Print the program's graph in DOT form
    Dot { file: String },
    /// Serialize a program (optionally its adjoint, optionally folded)
    Compile {
        file: String,
        /// Emit the adjoint program instead of the primal
        #[arg(long)]
        adjoint: bool,
        /// Constant-fold before writing
        #[arg(long)]
        fold: bool,
        /// Destination (stdout when absent)
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Evaluate a serialized graph file
    Run {
        /// Graph file, or - for stdin
        file: String,
        #[arg(long = "bind", value_name = "NAME=VALUE")]
        bind: Vec<String>,
    },
    /// Compare the reverse-mode gradient against central differences
    Gradcheck {
        file: String,
        #[arg(long = "bind", value_name = "NAME=VALUE")]
        bind: Vec<String>,
        /// Finite-difference step
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        /// Largest acceptable relative error
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Record an evaluation, sweep it backwards
    Tape,
    /// One tangent sweep per input
    Forward,
    /// Build the adjoint program, then evaluate it
    Adjoint,
}

enum CliError {
    Io(String),
    Bind(String),
    Source(adgraph::SourceError),
    File(adgraph::GraphFileError),
    Compute(String),
    CheckFailed,
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Bind(_) => 1,
            CliError::Source(_) | CliError::File(_) => 2,
            CliError::Compute(_) => 3,
            CliError::CheckFailed => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Bind(msg) => write!(f, "{msg}"),
            CliError::Source(e) => write!(f, "{e}"),
            CliError::File(e) => write!(f, "{e}"),
            CliError::Compute(msg) => write!(f, "{msg}"),
            CliError::CheckFailed => write!(f, "gradient check failed"),
        }
    }
}

fn compute(e: impl fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn read_input(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::Io(format!("stdin: {e}")))?;
        Ok(text)
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))
    }
}

fn compile_input(path: &str) -> Result<(Graph, NameMap), CliError> {
    compile(&read_input(path)?).map_err(CliError::Source)
}

fn parse_binds(binds: &[String]) -> Result<Bindings, CliError> {
    let mut bindings = Bindings::new();
    for bind in binds {
        let (name, value) = bind
            .split_once('=')
            .ok_or_else(|| CliError::Bind(format!("invalid --bind '{bind}': expected NAME=VALUE")))?;
        let value: f64 = value.parse().map_err(|_| {
            CliError::Bind(format!("invalid --bind '{bind}': '{value}' is not a number"))
        })?;
        bindings.set(name, value);
    }
    Ok(bindings)
}

fn single_output(graph: &Graph) -> Result<(), CliError> {
    match graph.outputs().len() {
        1 => Ok(()),
        n => Err(CliError::Compute(format!(
            "the program has {n} targets; gradients need exactly one"
        ))),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        exit(e.code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Eval { file, bind } => {
            let (graph, names) = compile_input(&file)?;
            let valuation = evaluate(&graph, &parse_binds(&bind)?).map_err(compute)?;
            for ((name, _), value) in names.targets().iter().zip(valuation.outputs()) {
                println!("{name} = {value}");
            }
            Ok(())
        }
        Command::Grad { file, bind, mode } => {
            let (graph, _) = compile_input(&file)?;
            single_output(&graph)?;
            let bindings = parse_binds(&bind)?;
            let gradient = match mode {
                Mode::Tape => grad(&graph, &bindings).map_err(compute)?,
                Mode::Forward => gradient_forward(&graph, &bindings).map_err(compute)?.gradient,
                Mode::Adjoint => two_phase_grad(&graph, &bindings).map_err(compute)?,
            };
            for (name, value) in gradient {
                println!("d/d{name} = {value}");
            }
            Ok(())
        }
        Command::Trace { file, bind, decimals } => {
            let (graph, names) = compile_input(&file)?;
            let table =
                render_trace(&graph, &names, &parse_binds(&bind)?, decimals).map_err(compute)?;
            print!("{table}");
            Ok(())
        }
        Command::Dot { file } => {
            let (graph, names) = compile_input(&file)?;
            print!("{}", to_dot(&graph, Some(&names)));
            Ok(())
        }
        Command::Compile { file, adjoint, fold, output } => {
            let (graph, _) = compile_input(&file)?;
            let mut graph = if adjoint { build_adjoint(&graph).graph().clone() } else { graph };
            if fold {
                graph = constant_fold(&graph).map_err(compute)?;
            }
            let text = serialize(&graph);
            match output {
                Some(path) => fs::write(&path, text)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => {
                    io::stdout()
                        .write_all(text.as_bytes())
                        .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
                }
            }
            Ok(())
        }
        Command::Run { file, bind } => {
            let graph = deserialize(&read_input(&file)?).map_err(CliError::File)?;
            let valuation = evaluate(&graph, &parse_binds(&bind)?).map_err(compute)?;
            for (id, value) in graph.outputs().iter().zip(valuation.outputs()) {
                println!("{id} = {value}");
            }
            Ok(())
        }
        Command::Gradcheck { file, bind, step, tol } => {
            let (graph, _) = compile_input(&file)?;
            single_output(&graph)?;
            let report =
                gradcheck(&graph, &parse_binds(&bind)?, step, tol).map_err(compute)?;
            print!("{report}");
            if report.pass {
                Ok(())
            } else {
                Err(CliError::CheckFailed)
            }
        }
    }
}
