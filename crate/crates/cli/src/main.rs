use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use born_psa::datagen::init_weights;
use born_psa::harness::{
    compare_with_oracle, figures, gradcheck, output, run_experiment, run_sweep,
    ExperimentConfig, SweepParam,
};
use born_psa::oracle::{eig_sym, sample_covariance, DEFAULT_EIG_TOL};
use born_psa::{Error, Generator};

const EXIT_USAGE: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_GRADCHECK: u8 = 3;

/// Seeded Hebbian subspace-learning experiments.
#[derive(Debug, Parser)]
#[command(name = "born-psa", version)]
struct Cli {
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true, env = "BORN_PSA_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads for repeats and sweep cells (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment (or the sweep embedded in the config).
    Run { config: PathBuf },
    /// Run an experiment once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// pf, lf, b, mu or energy_scale.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
    /// Print the ground-truth eigenstructure and how the initial weights compare to it.
    Oracle { config: PathBuf },
    /// Run the bundled config(s) for one figure.
    Figures {
        /// fig4 ... fig20
        id: String,
        /// Reduced repeats for a quick run.
        #[arg(long)]
        desk: bool,
    },
    /// Finite-difference consistency checks of the analytic increments and gradients.
    Gradcheck,
}

enum Failure {
    Usage(String),
    Diverged(String),
    Gradcheck,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load(path: &Path, seed: Option<u64>) -> std::result::Result<ExperimentConfig, Failure> {
    let mut c = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        c.seed = s;
    }
    Ok(c)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn sweep(config: &ExperimentConfig, param: SweepParam, values: &[f64], out: &Path) -> Outcome {
    let result = run_sweep(config, param, values)?;
    print!("{}", output::sweep_table(&result));
    print_paths(&output::write_sweep(out, &result)?);
    Ok(())
}

/// Runs a config as a sweep if it carries one, else as a single experiment.
fn execute(config: &ExperimentConfig, out: &Path) -> Outcome {
    if let Some(s) = &config.sweep {
        return sweep(config, s.param, &s.values, out);
    }
    let result = run_experiment(config)?;
    print!("{}", output::experiment_table(&result));
    print_paths(&output::write_experiment(out, &result)?);
    let diverged: Vec<String> = result
        .summaries()
        .filter_map(|s| s.diverged_at.map(|i| format!("seed {} at iteration {i}", s.seed)))
        .collect();
    if diverged.is_empty() {
        Ok(())
    } else {
        Err(Failure::Diverged(format!(
            "{}: learner diverged ({})",
            config.name,
            diverged.join(", ")
        )))
    }
}

fn oracle(config: &ExperimentConfig) -> Outcome {
    let mut c = config.clone();
    if c.oracle_samples == 0 {
        c.oracle_samples = 20_000;
    }
    let mut gen_cfg = c.generator.clone();
    gen_cfg.seed = c.oracle_seed();
    let batch = Generator::new(gen_cfg)?.batch(c.oracle_samples);
    let (k, n) = (c.learner.k, c.learner.n);
    let w0 = init_weights(k, n, c.repeat_seed(0).wrapping_add(1))?;
    let report = compare_with_oracle(&w0, &batch)?;
    let eig = eig_sym(&sample_covariance(&batch)?, DEFAULT_EIG_TOL)?;
    println!("{}: K = {k}, N = {n}, oracle batch {} samples", c.name, c.oracle_samples);
    println!("covariance eigenvalues (descending, * = top-{n}):");
    for (i, v) in eig.eigenvalues.iter().enumerate() {
        let mark = if i < n { " *" } else { "" };
        println!("  {:>4}  {v:.6e}{mark}", i + 1);
    }
    println!("initial weights (repeat 0):");
    println!("  principal angle to top-{n} subspace  {:.6}", report.principal_angle);
    println!("  ln max|I - WᵀW|                      {:.6}", report.orthonormality);
    println!("  |wₙᵀuₘ| (rows: columns of W, cols: top-{n} eigenvectors)");
    for row in report.alignments.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        println!("    {}", cells.join("  "));
    }
    Ok(())
}

fn run_figures(id: &str, desk: bool, seed: Option<u64>, out: &Path) -> Outcome {
    let mut first_failure = None;
    for mut c in figures::figure_configs(id, desk)? {
        if let Some(s) = seed {
            c.seed = s;
        }
        println!("== {}", c.name);
        match execute(&c, out) {
            Err(Failure::Diverged(m)) => {
                eprintln!("{m}");
                first_failure.get_or_insert(Failure::Diverged(m));
            }
            other => other?,
        }
    }
    first_failure.map_or(Ok(()), Err)
}

fn run_gradcheck(seed: Option<u64>) -> Outcome {
    let checks = gradcheck::run_gradcheck(seed.unwrap_or(1))?;
    let mut ok = true;
    for c in &checks {
        println!(
            "{:<32} {:>4} cases  worst rel err {:.3e}  tol {:.0e}  {}",
            c.name,
            c.cases,
            c.worst_relative_error,
            c.tolerance,
            if c.passed() { "ok" } else { "FAILED" }
        );
        ok &= c.passed();
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Gradcheck)
    }
}

fn dispatch(cli: Cli) -> Outcome {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Run { config } => execute(&load(config, cli.seed)?, &cli.out),
        Command::Sweep { config, param, values } => {
            let p: SweepParam = param.parse()?;
            let mut c = load(config, cli.seed)?;
            c.sweep = None;
            // Validate every cell before spending time on any of them.
            for &v in values {
                c.with_param(p, v)?;
            }
            sweep(&c, p, values, &cli.out)
        }
        Command::Oracle { config } => oracle(&load(config, cli.seed)?),
        Command::Figures { id, desk } => run_figures(id, *desk, cli.seed, &cli.out),
        Command::Gradcheck => run_gradcheck(cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Diverged(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(Failure::Gradcheck) => {
            eprintln!("error: gradient check failed");
            ExitCode::from(EXIT_GRADCHECK)
        }
    }
}
