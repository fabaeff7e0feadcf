//! `anderson-spectra`: runs one Monte Carlo experiment per invocation and
//! writes `summary.json`, `data.csv` and `manifest.json` to the output directory.

mod output;
mod progress;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anderson_spectra::config::{parse_entries, Entry, Experiment, ExperimentConfig};
use anderson_spectra::ensemble;
use anderson_spectra::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "anderson-spectra", version, about = "Monte Carlo eigenvalue statistics for 1D Anderson models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probability that the window [E0-δ, E0+δ) holds an eigenvalue
    Wegner(RunArgs),
    /// E[T(T-1)] for the window eigenvalue count T
    Minami(RunArgs),
    /// Expected window count against N·k(E0)·|I|
    Count(RunArgs),
    /// Probability of two or more window eigenvalues
    #[command(name = "two-ev")]
    TwoEv(RunArgs),
    /// Local counting and gap statistics near E0
    Poisson(RunArgs),
    /// Local statistics of the independent-box approximation
    Blocks(RunArgs),
    /// Integrated density of states and its smoothed derivative
    Dos(RunArgs),
    /// Lyapunov exponent and transfer-matrix norm statistics
    Lyapunov(RunArgs),
    /// Minimum eigenvalue spacing for Bernoulli potentials
    Separation(RunArgs),
    /// Centre distance of near-degenerate eigenpairs
    Repulsion(RunArgs),
    /// Rank-one interlacing property run
    Interlace(RunArgs),
    /// IDS Hölder exponent, spectral averaging and boundary events
    Holder(RunArgs),
    /// Validate a config file and print the effective configuration
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit with status 3 if any acceptance threshold fails
    #[arg(long)]
    check: bool,
    /// No progress output; print only the output directory
    #[arg(long)]
    quiet: bool,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct ValidateArgs {
    /// Config file to validate
    path: PathBuf,
    /// Experiment whose defaults and preconditions apply
    #[arg(long)]
    experiment: Experiment,
    #[command(flatten)]
    flags: ConfigFlags,
}

/// Every config key as a flag; values use the config-file syntax.
#[derive(Args, Default)]
struct ConfigFlags {
    /// Site law: uniform:a,b | cantor:depth | bernoulli:p, optionally suffixed `@lambda=x`
    #[arg(long, allow_hyphen_values = true)]
    dist: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// System sizes, comma separated
    #[arg(long)]
    n: Option<String>,
    /// Window half-widths, comma separated
    #[arg(long)]
    delta: Option<String>,
    /// `absolute` or `per_n` (half-width δ/N)
    #[arg(long)]
    delta_mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    e0: Option<String>,
    /// Rescaled window length
    #[arg(long)]
    l: Option<String>,
    /// Realizations
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Box length multiplier
    #[arg(long)]
    k: Option<String>,
    /// Buffer length multiplier
    #[arg(long)]
    k1: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    /// Energy grid `lo:hi:count`
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// DOS bandwidth
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    dos_r: Option<String>,
    #[arg(long)]
    dos_n: Option<String>,
    /// Bisection tolerance relative to the operator scale
    #[arg(long)]
    tol: Option<String>,
    /// Close-pair threshold (0 selects N^-3)
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    min_pairs: Option<String>,
    #[arg(long)]
    max_r: Option<String>,
    #[arg(long)]
    quantiles: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    inner: Option<String>,
    /// Energy window `lo,hi`
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long)]
    window_points: Option<String>,
    #[arg(long)]
    c1: Option<String>,
    #[arg(long)]
    onset: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
}

impl ConfigFlags {
    fn entries(&self) -> Vec<Entry> {
        let pairs: [(&str, &Option<String>); 29] = [
            ("dist", &self.dist),
            ("lambda", &self.lambda),
            ("n", &self.n),
            ("delta", &self.delta),
            ("delta_mode", &self.delta_mode),
            ("e0", &self.e0),
            ("l", &self.l),
            ("r", &self.r),
            ("seed", &self.seed),
            ("k", &self.k),
            ("k1", &self.k1),
            ("workers", &self.workers),
            ("grid", &self.grid),
            ("h", &self.h),
            ("dos_r", &self.dos_r),
            ("dos_n", &self.dos_n),
            ("tol", &self.tol),
            ("threshold", &self.threshold),
            ("min_pairs", &self.min_pairs),
            ("max_r", &self.max_r),
            ("quantiles", &self.quantiles),
            ("steps", &self.steps),
            ("theta", &self.theta),
            ("inner", &self.inner),
            ("window", &self.window),
            ("window_points", &self.window_points),
            ("c1", &self.c1),
            ("onset", &self.onset),
            ("out", &self.out),
        ];
        pairs.iter().filter_map(|(k, v)| v.as_deref().map(|v| Entry::flag(k, v))).collect()
    }
}

fn load(experiment: Experiment, file: Option<&Path>, flags: &ConfigFlags) -> Result<ExperimentConfig, (u8, String)> {
    let text = match file {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| (EXIT_CONFIG, format!("cannot read {}: {e}", p.display())))?),
        None => None,
    };
    ExperimentConfig::from_sources(experiment, text.as_deref(), &flags.entries()).map_err(|e| (exit_code(&e), e.to_string()))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// `--out`, else `$ANDERSON_SPECTRA_OUT/<experiment>-<hash>`, else `runs/<experiment>-<hash>`.
fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &cfg.out {
        return out.clone();
    }
    let root = std::env::var_os("ANDERSON_SPECTRA_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{}-{}", cfg.experiment, &cfg.content_hash()[..12]))
}

fn run(experiment: Experiment, args: &RunArgs) -> Result<(), (u8, String)> {
    let cfg = load(experiment, args.config.as_deref(), &args.flags)?;
    let dir = output_dir(&cfg);
    let started = Instant::now();
    let reporter = progress::StderrProgress::new(args.quiet);
    let out = ensemble::run(&cfg, &reporter).map_err(|e| (exit_code(&e), e.to_string()))?;
    reporter.finish();
    let elapsed = started.elapsed();
    output::write_run(&dir, &cfg, &out, elapsed).map_err(|e| (EXIT_FAILURE, format!("cannot write {}: {e}", dir.display())))?;

    if args.quiet {
        println!("{}", dir.display());
    } else {
        print_report(&dir, &out.summary);
    }
    if args.check && !out.summary.passed() {
        return Err((EXIT_CHECK, "acceptance thresholds failed".into()));
    }
    Ok(())
}

fn print_report(dir: &Path, summary: &ensemble::EnsembleSummary) {
    println!("{} (seed {}, config {})", summary.metadata.experiment, summary.metadata.master_seed, &summary.metadata.config_hash[..12]);
    for fit in &summary.fits {
        match fit.ci {
            Some(ci) => println!("  fit {}: {:.4} [{:.4}, {:.4}]", fit.label, fit.slope, ci.lo, ci.hi),
            None => println!("  fit {}: {:.4} (no interval)", fit.label, fit.slope),
        }
    }
    for c in &summary.checks {
        let value = c.value.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        let bounds = match (c.lower, c.upper) {
            (Some(l), Some(u)) => format!("in [{l}, {u}]"),
            (Some(l), None) => format!(">= {l}"),
            (None, Some(u)) => format!("<= {u}"),
            (None, None) => String::new(),
        };
        println!("  {} {}: {value} {bounds}", if c.passed { "pass" } else { "FAIL" }, c.name);
    }
    for note in &summary.notes {
        println!("  note: {note}");
    }
    println!("wrote {}", dir.display());
}

fn validate(args: &ValidateArgs) -> Result<(), (u8, String)> {
    let cfg = load(args.experiment, Some(&args.path), &args.flags)?;
    let text = std::fs::read_to_string(&args.path).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let mut given: Vec<String> = parse_entries(&text).unwrap_or_default().into_iter().map(|e| e.key).collect();
    given.extend(args.flags.entries().into_iter().map(|e| e.key));
    let normalized = cfg.normalized();
    let defaulted: Vec<&str> = normalized
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split(" = ").next())
        .filter(|k| !given.iter().any(|g| g == k))
        .collect();
    print!("{normalized}");
    println!("# defaults filled: {}", defaulted.join(", "));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Wegner(a) => run(Experiment::Wegner, a),
        Command::Minami(a) => run(Experiment::Minami, a),
        Command::Count(a) => run(Experiment::Count, a),
        Command::TwoEv(a) => run(Experiment::TwoEv, a),
        Command::Poisson(a) => run(Experiment::Poisson, a),
        Command::Blocks(a) => run(Experiment::Blocks, a),
        Command::Dos(a) => run(Experiment::Dos, a),
        Command::Lyapunov(a) => run(Experiment::Lyapunov, a),
        Command::Separation(a) => run(Experiment::Separation, a),
        Command::Repulsion(a) => run(Experiment::Repulsion, a),
        Command::Interlace(a) => run(Experiment::Interlace, a),
        Command::Holder(a) => run(Experiment::Holder, a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
