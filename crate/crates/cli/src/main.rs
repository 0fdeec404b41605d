mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use polyharmonic::Complex64;

use commands::{parse_complex, InputError, Run, SimulateArgs, TreeOp};

/// Boundary-value problems, spectra and kernels of absorbing Markov chains.
#[derive(Debug, Parser)]
#[command(name = "polyharm", version)]
struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,

    /// Override the tolerance of the command's main check.
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a chain file and its spectral invariants.
    Validate {
        file: PathBuf,
        /// Read a conductance network instead of a chain.
        #[arg(long)]
        network: bool,
        /// Write the normalized input to this path.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Eigenvalues of the interior transition matrix.
    Spectrum { file: PathBuf },
    /// Solve the Dirichlet problem with boundary data from a vertex map.
    Dirichlet {
        file: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        g: PathBuf,
    },
    /// Solve the Riquier problem with one boundary map per order.
    Riquier {
        file: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long, value_delimiter = ',', required = true)]
        g: Vec<PathBuf>,
    },
    /// Global polyharmonic functions at an interior eigenvalue.
    GlobalBasis {
        file: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        n: usize,
    },
    /// Martin kernel and higher kernels with respect to an origin.
    Martin {
        file: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        origin: String,
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Boundary maps for a Riquier solve in kernel form.
        #[arg(long, value_delimiter = ',')]
        g: Vec<PathBuf>,
    },
    /// Closed forms on a forward-only tree.
    Tree {
        file: PathBuf,
        /// Write the normalized tree to this path.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[command(subcommand)]
        op: TreeCommand,
    },
    /// Monte Carlo estimate of the hitting distribution.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        start: String,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// Compare with the analytic hitting distribution.
        #[arg(long)]
        compare: bool,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Also check the generating-function series at this real lambda.
        #[arg(long, requires = "compare")]
        series_lambda: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Finite-difference check of the resolvent-power identity.
    CheckDerivative {
        file: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        h: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum TreeCommand {
    Green {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    Kr {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        x: String,
        #[arg(long)]
        w: String,
    },
    Ktr {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        x: String,
        /// Vertex whose arc contains the boundary point.
        #[arg(long)]
        arc: String,
    },
    /// Evaluate the polyharmonic function of leaf distributions nu_1..nu_n.
    Eval {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long, value_delimiter = ',', required = true)]
        nu: Vec<PathBuf>,
    },
    IdentityCheck {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        n: usize,
        /// Section vertex; defaults to the first one.
        #[arg(long)]
        w: Option<String>,
    },
    /// Restrict to the section as a finite chain.
    Restrict {
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

fn tree_op(cmd: TreeCommand) -> TreeOp {
    match cmd {
        TreeCommand::Green { lambda, x, y } => TreeOp::Green { lambda, x, y },
        TreeCommand::Kr { lambda, r, x, w } => TreeOp::Kr { lambda, r, x, w },
        TreeCommand::Ktr { lambda, r, x, arc } => TreeOp::Ktr { lambda, r, x, arc },
        TreeCommand::Eval { lambda, nu } => TreeOp::Eval { lambda, nu },
        TreeCommand::IdentityCheck { lambda, n, w } => TreeOp::IdentityCheck { lambda, n, w },
        TreeCommand::Restrict { emit } => TreeOp::Restrict { emit },
    }
}

fn dispatch(run: &mut Run, command: Command) -> Result<(), InputError> {
    match command {
        Command::Validate { file, network, emit } => commands::validate(run, &file, network, emit.as_deref()),
        Command::Spectrum { file } => commands::spectrum(run, &file),
        Command::Dirichlet { file, lambda, g } => commands::dirichlet(run, &file, lambda, &g),
        Command::Riquier { file, lambda, g } => commands::riquier(run, &file, lambda, &g),
        Command::GlobalBasis { file, lambda, n } => commands::global_basis(run, &file, lambda, n),
        Command::Martin { file, lambda, origin, order, g } => commands::martin(run, &file, lambda, &origin, order, &g),
        Command::Tree { file, emit, op } => commands::tree(run, &file, emit.as_deref(), &tree_op(op)),
        Command::Simulate { file, start, trials, seed, compare, max_steps, series_lambda, workers } => {
            let args = SimulateArgs {
                start: &start,
                trials,
                seed,
                max_steps,
                compare,
                series_lambda,
                workers,
            };
            commands::simulate(run, &file, &args)
        }
        Command::CheckDerivative { file, lambda, r, h } => commands::check_derivative(run, &file, lambda, r, h),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let started = Instant::now();
    let mut run = Run::new(argv, cli.tol);
    if let Err(e) = dispatch(&mut run, cli.command) {
        eprintln!("polyharm: {}", e.0.replace('\n', " "));
        return ExitCode::from(2);
    }
    let mut report = run.report;
    report.seal(&run.inputs, started.elapsed().as_secs_f64());
    let text = if cli.json {
        report.to_json() + "\n"
    } else {
        report.to_text()
    };
    // A closed pipe downstream is not a failure of the run.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
