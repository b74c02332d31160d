use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use bomp::certificates::{
    check_noiseless, check_noisy_block, check_omp_condition, check_orthonormal_block,
    comparison_chain_report, decompose_noise, step_bounds_with_profile, PrefixSplit,
    ORTHONORMAL_NU_TOLERANCE,
};
use bomp::experiments::{
    emit_results, run_sweep, to_csv, to_json, to_svg, ExperimentConfig, OutputFormat, Solver,
    DEFAULT_NOISE_GRID,
};
use bomp::linalg::text::{read_matrix, read_vector};
use bomp::recovery::{bomp, omp};
use bomp::{BlockDictionary, BlockSparseSignal, BlockSupport, CoherenceProfile, StoppingRule};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// Block orthogonal matching pursuit: coherence analysis, recovery,
/// recovery certificates and Monte Carlo sweeps.
#[derive(Parser)]
#[command(name = "bomp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherence metrics of a dictionary.
    Coherence(DictArgs),
    /// Run BOMP or OMP on a measurement vector.
    Recover(RecoverArgs),
    /// Evaluate every recovery certificate for a known signal and noise.
    Certify(CertifyArgs),
    /// Monte Carlo success-rate sweep.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct DictArgs {
    /// Dictionary as CSV, one matrix row per line.
    #[arg(long)]
    matrix: PathBuf,
    /// Block length d.
    #[arg(long)]
    block_size: usize,
}

#[derive(Args)]
struct RecoverArgs {
    #[command(flatten)]
    dict: DictArgs,
    /// Measurement vector y as CSV (one row or one column).
    #[arg(long)]
    measurements: PathBuf,
    /// Number of blocks to select.
    #[arg(long, conflicts_with = "epsilon", required_unless_present = "epsilon")]
    k: Option<usize>,
    /// Stop once the residual norm drops below this value.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Iteration cap; defaults to K, or floor(m/d) with --epsilon.
    #[arg(long)]
    max_iters: Option<usize>,
    /// True block support, e.g. `0,3,7`; enables the selection ratio trace.
    #[arg(long, value_delimiter = ',')]
    true_support: Option<Vec<usize>>,
    #[arg(long, default_value = "bomp")]
    solver: Solver,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    dict: DictArgs,
    /// Signal x as CSV; its nonzero blocks define the support.
    #[arg(long)]
    signal: PathBuf,
    /// Noise w as CSV.
    #[arg(long)]
    noise: PathBuf,
    /// Seed for the sampled operator-norm lower bound.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// ExperimentConfig as JSON; replaces the grid flags.
    #[arg(long, conflicts_with_all = ["m", "n", "d", "k_list", "sigma_list", "trials", "seed", "solvers"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    m: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    d: Option<usize>,
    #[arg(long, value_delimiter = ',', required_unless_present = "config")]
    k_list: Option<Vec<usize>>,
    /// Defaults to 0.01,0.05,0.1,0.2.
    #[arg(long, value_delimiter = ',')]
    sigma_list: Option<Vec<f64>>,
    #[arg(long, required_unless_present = "config")]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to bomp,omp.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<Solver>>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
}

fn load_dictionary(args: &DictArgs) -> anyhow::Result<BlockDictionary> {
    let a =
        read_matrix(&args.matrix).with_context(|| format!("reading {}", args.matrix.display()))?;
    Ok(BlockDictionary::new(a, args.block_size)?)
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn coherence(args: DictArgs) -> anyhow::Result<()> {
    let dict = load_dictionary(&args)?;
    print_json(&CoherenceProfile::compute(&dict)?)
}

fn recover(args: RecoverArgs) -> anyhow::Result<()> {
    let dict = load_dictionary(&args.dict)?;
    let y = read_vector(&args.measurements)
        .with_context(|| format!("reading {}", args.measurements.display()))?;
    let stop = match (args.k, args.epsilon) {
        (Some(k), _) => StoppingRule {
            max_iters: args.max_iters.unwrap_or(k),
            ..StoppingRule::known_k(k)
        },
        (None, Some(eps)) => StoppingRule::residual_tol(
            eps,
            args.max_iters.unwrap_or(dict.rows() / dict.block_len()),
        ),
        (None, None) => bail!("one of --k or --epsilon is required"),
    };
    let truth = args
        .true_support
        .map(|s| BlockSupport::new(s, dict.block_count()))
        .transpose()?;
    let trace = match args.solver {
        Solver::Bomp => bomp(&y, &dict, stop, truth.as_ref())?,
        Solver::Omp => omp(&y, &dict, stop)?,
    };
    let width = match args.solver {
        Solver::Bomp => dict.block_count(),
        Solver::Omp => dict.cols(),
    };
    let support = trace.support(width)?;
    let exact = truth.as_ref().map(|t| match args.solver {
        Solver::Bomp => support.indices() == t.indices(),
        Solver::Omp => {
            let d = dict.block_len();
            t.indices()
                .iter()
                .flat_map(|&l| l * d..(l + 1) * d)
                .all(|a| support.contains(a))
        }
    });
    print_json(&json!({
        "solver": args.solver,
        "stopping_rule": stop,
        "support": support.indices(),
        "true_support": truth.as_ref().map(BlockSupport::indices),
        "exact_recovery": exact,
        "trace": trace,
    }))
}

fn certify(args: CertifyArgs) -> anyhow::Result<()> {
    let dict = load_dictionary(&args.dict)?;
    let d = dict.block_len();
    let x =
        read_vector(&args.signal).with_context(|| format!("reading {}", args.signal.display()))?;
    let w =
        read_vector(&args.noise).with_context(|| format!("reading {}", args.noise.display()))?;
    let signal = BlockSparseSignal::new(x, d)?;
    let k = signal.sparsity();
    let profile = CoherenceProfile::compute(&dict)?;
    let dec = decompose_noise(&dict, &signal, &w)?;
    let atoms = decompose_noise(&dict.repartition(1)?, &signal.repartition(1)?, &w)?;
    let orthonormal = profile.nu <= ORTHONORMAL_NU_TOLERANCE;

    let mut certificates = vec![
        check_noiseless(profile.mu_block, profile.nu, k, d),
        check_noisy_block(
            profile.mu_block,
            profile.nu,
            k,
            d,
            dec.omega,
            dec.x_block_min,
        )?,
        check_omp_condition(profile.mu, k, d, atoms.omega, atoms.x_block_min)?,
    ];
    let chain = if orthonormal {
        certificates.push(check_orthonormal_block(
            profile.mu_block,
            k,
            d,
            dec.omega,
            dec.x_block_min,
        )?);
        Some(comparison_chain_report(&dict, &signal, &w)?)
    } else {
        None
    };
    let step_bounds = (0..k)
        .map(|prefix| {
            step_bounds_with_profile(
                &dict,
                &profile,
                &signal,
                &w,
                prefix,
                &PrefixSplit::IndexOrder,
                args.seed,
            )
        })
        .collect::<bomp::Result<Vec<_>>>()?;

    print_json(&json!({
        "k": k,
        "d": d,
        "support": signal.support().indices(),
        "coherence": profile,
        "orthonormal_blocks": orthonormal,
        "noise": {
            "omega": dec.omega,
            "omega_off_support": dec.omega_off_support,
            "x_block_min": dec.x_block_min,
            "x_min": atoms.x_block_min,
            "inf_noise_corr": atoms.omega,
            "dense": dec.dense,
        },
        "certificates": certificates,
        "comparison_chain": chain,
        "step_bounds": step_bounds,
    }))
}

fn sweep_config(args: &SweepArgs) -> anyhow::Result<ExperimentConfig> {
    if let Some(path) = &args.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    let (Some(m), Some(n), Some(d), Some(k_values), Some(trials)) =
        (args.m, args.n, args.d, args.k_list.clone(), args.trials)
    else {
        bail!("--m, --n, --d, --k-list and --trials are required without --config");
    };
    Ok(ExperimentConfig {
        m,
        n,
        d,
        k_values,
        sigma_w: args
            .sigma_list
            .clone()
            .unwrap_or_else(|| DEFAULT_NOISE_GRID.to_vec()),
        trials,
        base_seed: args.seed.unwrap_or(0),
        solvers: args
            .solvers
            .clone()
            .unwrap_or_else(|| vec![Solver::Bomp, Solver::Omp]),
    })
}

/// Exit code for errors raised by a trial rather than by the inputs.
const SOLVER_ERROR: u8 = 2;

fn sweep(args: SweepArgs) -> anyhow::Result<ExitCode> {
    let config = sweep_config(&args)?;
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()?;
    let start = Instant::now();
    let result = match pool.install(|| run_sweep(&config)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(seed) = e.seed() {
                eprintln!("replay seed: {seed}");
            }
            return Ok(ExitCode::from(SOLVER_ERROR));
        }
    };
    log::info!(
        "{} cells in {:.1}s",
        result.cells.len(),
        start.elapsed().as_secs_f64()
    );
    match &args.out {
        Some(path) => emit_results(&result, args.format, path)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!(
            "{}",
            match args.format {
                OutputFormat::Csv => to_csv(&result)?,
                OutputFormat::Json => to_json(&result)? + "\n",
                OutputFormat::Svg => to_svg(&result),
            }
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Coherence(a) => coherence(a).map(|_| ExitCode::SUCCESS),
        Command::Recover(a) => recover(a).map(|_| ExitCode::SUCCESS),
        Command::Certify(a) => certify(a).map(|_| ExitCode::SUCCESS),
        Command::Sweep(a) => sweep(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
