//! Random instance generation, Monte Carlo success-rate sweeps and result
//! emission.
//!
//! Every trial draws a fresh dictionary, signal and noise vector from a
//! seed derived from `(base_seed, solver, K, σ_w, trial)`. The three draws
//! use separate ChaCha streams of that seed, so each generator is
//! reproducible on its own and adding grid points never perturbs existing
//! cells.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    check_noisy_block, check_omp_condition, decompose_noise, RecoveryCertificate,
};
use crate::coherence::{coherence, BlockDictionary, CoherenceProfile};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::recovery::{bomp, omp, BlockSparseSignal, BlockSupport, RecoveryTrace, StoppingRule};

mod emit;

pub use emit::{emit_results, parse_csv, to_csv, to_json, to_svg, CsvRecord, OutputFormat};

pub const DICTIONARY_STREAM: u64 = 1;
pub const SIGNAL_STREAM: u64 = 2;
pub const NOISE_STREAM: u64 = 3;

/// Noise levels used when none are configured.
pub const DEFAULT_NOISE_GRID: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

/// Two-sided 95% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a sequence of words into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(GOLDEN_GAMMA), |h, &p| {
        splitmix(h ^ p.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Bomp,
    Omp,
}

impl Solver {
    fn tag(self) -> u64 {
        match self {
            Solver::Bomp => 1,
            Solver::Omp => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Solver::Bomp => "bomp",
            Solver::Omp => "omp",
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bomp" => Ok(Solver::Bomp),
            "omp" => Ok(Solver::Omp),
            other => Err(Error::Parse(format!("unknown solver {other:?}"))),
        }
    }
}

/// Seed of one trial of one grid cell.
pub fn trial_seed(base_seed: u64, solver: Solver, k: usize, sigma_w: f64, trial: usize) -> u64 {
    derive_seed(&[
        base_seed,
        solver.tag(),
        k as u64,
        sigma_w.to_bits(),
        trial as u64,
    ])
}

/// ChaCha8 generator for `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Scales every column to unit Euclidean norm; zero columns are an error.
pub fn normalize_columns(mut matrix: Matrix) -> Result<Matrix> {
    for (j, mut col) in matrix.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "column {j} cannot be normalized"
            )));
        }
        col.unscale_mut(norm);
    }
    Ok(matrix)
}

/// Gaussian dictionary with unit-norm columns. Entries are drawn column by
/// column from the dictionary stream of `seed`.
pub fn gen_dictionary(m: usize, n: usize, d: usize, seed: u64) -> Result<BlockDictionary> {
    if m == 0 || n == 0 || d == 0 || !n.is_multiple_of(d) {
        return Err(Error::InvalidArgument(format!(
            "cannot build a {m}x{n} dictionary with block length {d}"
        )));
    }
    let mut rng = stream_rng(seed, DICTIONARY_STREAM);
    let mut a = Matrix::zeros(m, n);
    for j in 0..n {
        loop {
            let mut col = a.column_mut(j);
            for v in col.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = col.norm();
            if norm > 0.0 {
                col.unscale_mut(norm);
                break;
            }
            log::warn!("seed {seed}: column {j} drew all zeros, regenerating");
        }
    }
    BlockDictionary::new(a, d)
}

/// Block `K`-sparse signal with a uniformly random support (partial
/// Fisher–Yates) and i.i.d. standard normal entries on it.
pub fn gen_signal(block_count: usize, d: usize, k: usize, seed: u64) -> Result<BlockSparseSignal> {
    if d == 0 || k > block_count {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {k} of {block_count} blocks with block length {d}"
        )));
    }
    let mut rng = stream_rng(seed, SIGNAL_STREAM);
    let mut order: Vec<usize> = (0..block_count).collect();
    for i in 0..k {
        let j = rng.random_range(i..block_count);
        order.swap(i, j);
    }
    let mut support = order[..k].to_vec();
    support.sort_unstable();

    let mut x = Vector::zeros(block_count * d);
    for &l in &support {
        loop {
            let mut block = x.rows_mut(l * d, d);
            for v in block.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            if block.iter().any(|&v| v != 0.0) {
                break;
            }
            log::warn!("seed {seed}: block {l} drew all zeros, regenerating");
        }
    }
    BlockSparseSignal::with_support(x, d, BlockSupport::new(support, block_count)?)
}

/// i.i.d. `N(0, σ_w²)` noise; exactly zero when `σ_w = 0`.
pub fn gen_noise(m: usize, sigma_w: f64, seed: u64) -> Result<Vector> {
    if !(sigma_w >= 0.0) || !sigma_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma_w {sigma_w} must be nonnegative"
        )));
    }
    if sigma_w == 0.0 {
        return Ok(Vector::zeros(m));
    }
    let mut rng = stream_rng(seed, NOISE_STREAM);
    Ok(Vector::from_fn(m, |_, _| {
        sigma_w * rng.sample::<f64, _>(StandardNormal)
    }))
}

/// Geometry and noise level of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub sigma_w: f64,
}

/// A generated problem `y = A x + w`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub dict: BlockDictionary,
    pub signal: BlockSparseSignal,
    pub noise: Vector,
    pub y: Vector,
}

impl Instance {
    pub fn generate(spec: &TrialSpec, seed: u64) -> Result<Self> {
        let dict = gen_dictionary(spec.m, spec.n, spec.d, seed)?;
        let signal = gen_signal(dict.block_count(), spec.d, spec.k, seed)?;
        let noise = gen_noise(spec.m, spec.sigma_w, seed)?;
        let y = dict.matrix() * signal.x() + &noise;
        Ok(Self {
            dict,
            signal,
            noise,
            y,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub success: bool,
    pub trace: RecoveryTrace,
    /// Block condition for BOMP trials, conventional OMP condition for OMP.
    pub certificate: RecoveryCertificate,
    pub true_support: Vec<usize>,
}

/// Known-`K` success: BOMP must choose exactly the true blocks in `K`
/// steps; OMP must choose every true nonzero atom within `Kd` steps.
fn trial_success(solver: Solver, trace: &RecoveryTrace, signal: &BlockSparseSignal) -> bool {
    match solver {
        Solver::Bomp => {
            let mut chosen = trace.chosen.clone();
            chosen.sort_unstable();
            chosen == signal.support().indices()
        }
        Solver::Omp => signal
            .x()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .all(|(i, _)| trace.chosen.contains(&i)),
    }
}

fn trial_certificate(solver: Solver, inst: &Instance) -> Result<RecoveryCertificate> {
    let k = inst.signal.sparsity();
    let d = inst.dict.block_len();
    match solver {
        Solver::Bomp => {
            let profile = CoherenceProfile::compute(&inst.dict)?;
            let dec = decompose_noise(&inst.dict, &inst.signal, &inst.noise)?;
            check_noisy_block(
                profile.mu_block,
                profile.nu,
                k,
                d,
                dec.omega,
                dec.x_block_min,
            )
        }
        Solver::Omp => {
            let mu = coherence(&inst.dict)?;
            let atoms = inst.dict.repartition(1)?;
            let dec = decompose_noise(&atoms, &inst.signal.repartition(1)?, &inst.noise)?;
            check_omp_condition(mu, k, d, dec.omega, dec.x_block_min)
        }
    }
}

fn run_trial_inner(spec: &TrialSpec, solver: Solver, seed: u64) -> Result<TrialOutcome> {
    let inst = Instance::generate(spec, seed)?;
    let stop = StoppingRule::known_k(spec.k);
    let trace = match solver {
        Solver::Bomp => bomp(&inst.y, &inst.dict, stop, None)?,
        Solver::Omp => omp(&inst.y, &inst.dict, stop)?,
    };
    Ok(TrialOutcome {
        seed,
        success: trial_success(solver, &trace, &inst.signal),
        certificate: trial_certificate(solver, &inst)?,
        true_support: inst.signal.support().indices().to_vec(),
        trace,
    })
}

/// One Monte Carlo trial; errors carry the seed for replay.
pub fn run_trial(spec: &TrialSpec, solver: Solver, seed: u64) -> Result<TrialOutcome> {
    run_trial_inner(spec, solver, seed).map_err(|e| Error::Trial {
        seed,
        source: Box::new(e),
    })
}

fn default_noise_grid() -> Vec<f64> {
    DEFAULT_NOISE_GRID.to_vec()
}

fn default_solvers() -> Vec<Solver> {
    vec![Solver::Bomp, Solver::Omp]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub k_values: Vec<usize>,
    #[serde(default = "default_noise_grid")]
    pub sigma_w: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<Solver>,
}

impl ExperimentConfig {
    /// BOMP against OMP at `m = 40, n = 400, d = 4` over `K = 1..=10`.
    pub fn block_vs_atom(sigma_w: f64, trials: usize, base_seed: u64) -> Self {
        Self {
            m: 40,
            n: 400,
            d: 4,
            k_values: (1..=10).collect(),
            sigma_w: vec![sigma_w],
            trials,
            base_seed,
            solvers: vec![Solver::Bomp, Solver::Omp],
        }
    }

    /// BOMP over the default noise grid at the same geometry.
    pub fn noise_levels(trials: usize, base_seed: u64) -> Self {
        Self {
            sigma_w: default_noise_grid(),
            solvers: vec![Solver::Bomp],
            ..Self::block_vs_atom(0.0, trials, base_seed)
        }
    }

    pub fn block_count(&self) -> usize {
        self.n / self.d
    }

    pub fn uses_default_noise_grid(&self) -> bool {
        self.sigma_w == DEFAULT_NOISE_GRID
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.m == 0 || self.d == 0 || self.n == 0 {
            return bad("m, n and d must be positive".into());
        }
        if !self.n.is_multiple_of(self.d) {
            return bad(format!("n = {} is not divisible by d = {}", self.n, self.d));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let cap = (self.m / self.d).min(self.block_count());
        if let Some(k) = self.k_values.iter().find(|&&k| k == 0 || k > cap) {
            return bad(format!("K = {k} outside 1..={cap}"));
        }
        if let Some(s) = self
            .sigma_w
            .iter()
            .find(|s| !(**s >= 0.0) || !s.is_finite())
        {
            return bad(format!("sigma_w = {s} must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Aggregate of one `(solver, K, σ_w)` grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub solver: Solver,
    pub k: usize,
    pub sigma_w: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub ci_halfwidth: f64,
    /// Trials whose certificate verdict was true.
    pub certified: usize,
    /// Certified trials that nevertheless failed; must be zero.
    pub certified_failures: usize,
    /// Uncertified trials that still succeeded.
    pub uncertified_successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub config: ExperimentConfig,
    /// The noise grid is the built-in default rather than a measured choice.
    pub default_noise_grid: bool,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn cell(&self, solver: Solver, k: usize, sigma_w: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.solver == solver && c.k == k && c.sigma_w == sigma_w)
    }
}

/// Half-width of the Wilson score interval at 95% confidence.
pub fn wilson_half_width(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    Z_95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

#[derive(Clone, Copy)]
struct Tally {
    success: bool,
    certified: bool,
}

/// Runs every `(solver, K, σ_w)` cell. Trials execute in parallel on the
/// current rayon pool and are reduced in grid order, so the cells depend
/// only on the configuration. Aborts on the first solver error.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let started = Instant::now();
    let mut grid = Vec::new();
    for &solver in &config.solvers {
        for &k in &config.k_values {
            for &sigma_w in &config.sigma_w {
                grid.push((solver, k, sigma_w));
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|cell| (0..config.trials).map(move |t| (cell, t)))
        .collect();
    let tallies: Vec<Tally> = tasks
        .par_iter()
        .map(|&(cell, trial)| {
            let (solver, k, sigma_w) = grid[cell];
            let spec = TrialSpec {
                m: config.m,
                n: config.n,
                d: config.d,
                k,
                sigma_w,
            };
            let seed = trial_seed(config.base_seed, solver, k, sigma_w, trial);
            let out = run_trial(&spec, solver, seed)?;
            Ok(Tally {
                success: out.success,
                certified: out.certificate.verdict,
            })
        })
        .collect::<Result<_>>()?;

    let cells = grid
        .iter()
        .zip(tallies.chunks(config.trials))
        .map(|(&(solver, k, sigma_w), chunk)| {
            let successes = chunk.iter().filter(|t| t.success).count();
            let certified = chunk.iter().filter(|t| t.certified).count();
            CellResult {
                solver,
                k,
                sigma_w,
                trials: chunk.len(),
                successes,
                success_rate: successes as f64 / chunk.len() as f64,
                ci_halfwidth: wilson_half_width(successes, chunk.len()),
                certified,
                certified_failures: chunk.iter().filter(|t| t.certified && !t.success).count(),
                uncertified_successes: chunk.iter().filter(|t| !t.certified && t.success).count(),
            }
        })
        .collect();

    Ok(SweepResult {
        cells,
        metadata: SweepMetadata {
            default_noise_grid: config.uses_default_noise_grid(),
            config: config.clone(),
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    })
}
