use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use subinf::acceptance::{criterion_files, run_files};
use subinf::commands::{self, Check, ConvolveArgs, DistanceArgs, Outcome, TableKind, VerifyArgs};
use subinf::config::{Overrides, ProblemConfig};
use subinf::Failure;

/// Infinity-Laplace solvers and checks on Euclidean, Heisenberg and
/// Grushin grids.
///
/// Exit codes: 0 success, 2 configuration error, 3 non-convergence,
/// 4 failed verification.
#[derive(Parser)]
#[command(name = "subinf", version)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Default)]
struct ProblemArgs {
    /// TOML configuration; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `euclidean:<n>`, `heisenberg1` or `grushin`.
    #[arg(long)]
    geometry: Option<String>,
    /// Box as `lo,..:hi,..`.
    #[arg(long = "box", value_parser = parse_box)]
    bounds: Option<(Vec<f64>, Vec<f64>)>,
    #[arg(long)]
    h: Option<f64>,
    /// `linear:c0,c1,..`, `constant:c`, `aronsson43` or `file:<path>`.
    #[arg(long)]
    boundary: Option<String>,
    /// `squared_norm` or `power:<a>`.
    #[arg(long)]
    integrand: Option<String>,
    /// Positive values solve the auxiliary problem.
    #[arg(long)]
    eps: Option<f64>,
    /// `lower` or `upper`.
    #[arg(long)]
    side: Option<String>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    cross_k_tol: Option<f64>,
}

impl ProblemArgs {
    fn overrides(&self, seed: Option<u64>) -> Overrides {
        Overrides {
            geometry: self.geometry.clone(),
            lower: self.bounds.as_ref().map(|b| b.0.clone()),
            upper: self.bounds.as_ref().map(|b| b.1.clone()),
            h: self.h,
            boundary: self.boundary.clone(),
            integrand: self.integrand.clone(),
            eps: self.eps,
            side: self.side.clone(),
            k_max: self.k_max,
            cross_k_tolerance: self.cross_k_tol,
            seed,
        }
    }

    fn load(&self, seed: Option<u64>) -> Result<ProblemConfig, Failure> {
        let o = self.overrides(seed);
        match &self.config {
            Some(path) => ProblemConfig::load(path, &o),
            None => ProblemConfig::from_overrides(&o),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Viscosity,
    Comparison,
    Amle,
    Subelliptic,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    Gap,
    Error,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the infinity or auxiliary problem and write the solution and
    /// a manifest.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Graph CC distance from one point, to one point or to every node.
    Distance {
        #[arg(long)]
        geometry: String,
        #[arg(long = "box", value_parser = parse_box)]
        bounds: (Vec<f64>, Vec<f64>),
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        to: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sup or inf convolution of a stored field.
    Convolve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        /// `sup` or `inf`.
        #[arg(long, default_value = "sup")]
        side: String,
        /// `left` or `right`.
        #[arg(long, default_value = "right")]
        kernel: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Empirical checks on stored fields or operators.
    Verify {
        #[arg(value_enum)]
        check: CheckArg,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Second field for `comparison`.
        #[arg(long)]
        other: Option<PathBuf>,
        /// `infinity_laplacian`, `aronsson`, `aux_lower:<eps>` or `aux_upper:<eps>`.
        #[arg(long, default_value = "infinity_laplacian")]
        operator: String,
        #[arg(long, default_value = "squared_norm")]
        integrand: String,
        /// Geometry for `subelliptic`.
        #[arg(long)]
        geometry: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        /// Sub-boxes for `amle`.
        #[arg(long, default_value_t = 32)]
        trials: usize,
        /// Largest `k` for local re-solves in `amle`.
        #[arg(long, default_value_t = 256)]
        k_max: u32,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Tables of gap against eps, or error against h.
    Table {
        #[arg(value_enum)]
        kind: TableArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run criterion files and print one line per criterion.
    Acceptance {
        /// A criterion file or a directory of them.
        path: Option<PathBuf>,
    },
}

fn parse_box(s: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected `lo,..:hi,..`")?;
    let list = |t: &str| -> Result<Vec<f64>, String> {
        t.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad coordinate `{v}`")))
            .collect()
    };
    let (lo, hi) = (list(lo)?, list(hi)?);
    if lo.len() != hi.len() {
        return Err(format!("{} lower and {} upper coordinates", lo.len(), hi.len()));
    }
    Ok((lo, hi))
}

fn acceptance(path: Option<PathBuf>) -> Result<Outcome, Failure> {
    let path = path.unwrap_or_else(subinf::acceptance::bundled_dir);
    let files = if path.is_dir() { criterion_files(&path)? } else { vec![path] };
    let mut stdout = String::new();
    let mut failed = Vec::new();
    for (file, result) in files.iter().zip(run_files(&files, subinf::threads()?)) {
        match result {
            Ok(r) => {
                stdout.push_str(&r.line());
                stdout.push('\n');
                if !r.passed() {
                    failed.push(r.id);
                }
            }
            // A broken criterion file is a configuration error, not a miss.
            Err(Failure::Config(m)) => return Err(Failure::Config(m)),
            Err(e) => {
                stdout.push_str(&format!("{}: {e}\n", file.display()));
                failed.push(file.display().to_string());
            }
        }
    }
    let failure = (!failed.is_empty()).then(|| Failure::Verification(failed.join(", ")));
    Ok(Outcome { stdout, failure })
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Solve { problem, out } => commands::solve(&problem.load(seed)?, &out),
        Command::Distance {
            geometry,
            bounds,
            h,
            depth,
            from,
            to,
            out,
        } => commands::distance(&DistanceArgs {
            geometry,
            lower: bounds.0,
            upper: bounds.1,
            h,
            depth,
            from,
            to,
            out,
        }),
        Command::Convolve {
            input,
            eps,
            side,
            kernel,
            out,
        } => commands::convolve(&ConvolveArgs {
            input,
            eps,
            side,
            kernel,
            out,
        }),
        Command::Verify {
            check,
            input,
            other,
            operator,
            integrand,
            geometry,
            samples,
            trials,
            k_max,
            tol,
        } => commands::verify(&VerifyArgs {
            check: match check {
                CheckArg::Viscosity => Check::Viscosity,
                CheckArg::Comparison => Check::Comparison,
                CheckArg::Amle => Check::Amle,
                CheckArg::Subelliptic => Check::Subelliptic,
            },
            input,
            other,
            operator,
            integrand,
            geometry,
            samples,
            trials,
            k_max,
            tol,
            seed: seed.unwrap_or(0),
        }),
        Command::Table { kind, config, values } => {
            let kind = match kind {
                TableArg::Gap => TableKind::Gap,
                TableArg::Error => TableKind::Error,
            };
            let o = Overrides {
                seed,
                ..Overrides::default()
            };
            commands::table(&config, kind, &values, &o)
        }
        Command::Acceptance { path } => acceptance(path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are configuration errors; help and version are not.
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (stdout, failure) = match run(cli) {
        Ok(o) => (o.stdout, o.failure),
        Err(f) => (String::new(), Some(f)),
    };
    print!("{stdout}");
    match failure {
        None => ExitCode::SUCCESS,
        Some(f) => {
            eprintln!("subinf: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
