//! Greedy block-sparse recovery: BOMP, the OMP baseline and the greedy
//! selection ratio.

use serde::{Deserialize, Serialize};

use crate::coherence::BlockDictionary;
use crate::error::{Error, Result};
use crate::linalg::{argmax, block_norms, least_squares, BlockPartition, Vector};

/// Denominators of the greedy selection ratio below this are degenerate.
pub const RATIO_DENOMINATOR_FLOOR: f64 = 1e-14;

/// Relative residual decrease below which an iteration counts as stagnant.
pub const STAGNATION_TOLERANCE: f64 = 1e-14;

/// Consecutive stagnant iterations that stop a residual-tolerance run.
pub const STAGNATION_PATIENCE: usize = 2;

/// Sorted set of distinct block indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSupport(Vec<usize>);

impl BlockSupport {
    pub fn new(mut indices: Vec<usize>, block_count: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSupport(format!("duplicate block {}", w[0])));
        }
        if let Some(&bad) = indices.iter().find(|&&l| l >= block_count) {
            return Err(Error::InvalidSupport(format!(
                "block {bad} out of range for {block_count} blocks"
            )));
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, block: usize) -> bool {
        self.0.binary_search(&block).is_ok()
    }

    /// Blocks of `0..block_count` not in the support.
    pub fn complement(&self, block_count: usize) -> Vec<usize> {
        (0..block_count).filter(|&l| !self.contains(l)).collect()
    }
}

/// A signal together with its block partition and block support.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseSignal {
    x: Vector,
    part: BlockPartition,
    support: BlockSupport,
}

impl BlockSparseSignal {
    /// Derives the support from the nonzero blocks of `x`.
    pub fn new(x: Vector, block_len: usize) -> Result<Self> {
        let part = BlockPartition::for_dim(x.len(), block_len)?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        let norms = block_norms(x.as_slice(), part)?;
        let support = norms
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(l, _)| l)
            .collect();
        Ok(Self {
            x,
            part,
            support: BlockSupport(support),
        })
    }

    /// Validates that `support` is exactly the set of nonzero blocks of `x`.
    pub fn with_support(x: Vector, block_len: usize, support: BlockSupport) -> Result<Self> {
        let derived = Self::new(x, block_len)?;
        if derived.support != support {
            return Err(Error::InvalidSignal(format!(
                "declared support {:?} differs from nonzero blocks {:?}",
                support.indices(),
                derived.support.indices()
            )));
        }
        Ok(derived)
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn partition(&self) -> BlockPartition {
        self.part
    }

    pub fn support(&self) -> &BlockSupport {
        &self.support
    }

    /// Block sparsity level `K`.
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn block(&self, l: usize) -> &[f64] {
        &self.x.as_slice()[self.part.range(l)]
    }

    /// Nonzero blocks stacked in support order.
    pub fn nonzero_part(&self) -> Vector {
        let d = self.part.block_len();
        let mut out = Vector::zeros(self.support.len() * d);
        for (slot, &l) in self.support.indices().iter().enumerate() {
            out.rows_mut(slot * d, d).copy_from_slice(self.block(l));
        }
        out
    }

    /// Same signal viewed with a different block length.
    pub fn repartition(&self, block_len: usize) -> Result<Self> {
        Self::new(self.x.clone(), block_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// Run exactly `K` block selections.
    KnownK(usize),
    /// Stop once `‖r_t‖₂ < ε`.
    ResidualTol(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub mode: StopMode,
    pub max_iters: usize,
}

impl StoppingRule {
    pub fn known_k(k: usize) -> Self {
        Self {
            mode: StopMode::KnownK(k),
            max_iters: k,
        }
    }

    pub fn residual_tol(epsilon: f64, max_iters: usize) -> Self {
        Self {
            mode: StopMode::ResidualTol(epsilon),
            max_iters,
        }
    }

    fn validate(&self, dict: &BlockDictionary) -> Result<()> {
        let cap = dict.rows() / dict.block_len();
        if self.max_iters > cap {
            return Err(Error::InvalidStoppingRule(format!(
                "max_iters {} exceeds floor(m/d) = {cap}",
                self.max_iters
            )));
        }
        match self.mode {
            StopMode::KnownK(k) if k == 0 || k > dict.block_count() => Err(
                Error::InvalidStoppingRule(format!("K = {k} outside 1..={}", dict.block_count())),
            ),
            StopMode::KnownK(k) if k > self.max_iters => Err(Error::InvalidStoppingRule(format!(
                "K = {k} exceeds max_iters {}",
                self.max_iters
            ))),
            StopMode::ResidualTol(eps) if !(eps >= 0.0) => Err(Error::InvalidStoppingRule(
                format!("epsilon {eps} must be nonnegative"),
            )),
            _ => Ok(()),
        }
    }

    /// The same rule counted in atoms of a dictionary with block length `d`.
    fn in_atoms(&self, d: usize) -> Self {
        Self {
            mode: match self.mode {
                StopMode::KnownK(k) => StopMode::KnownK(k * d),
                tol => tol,
            },
            max_iters: self.max_iters * d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    KReached,
    TolReached,
    MaxIters,
    Stagnation,
}

/// Per-iteration record of a greedy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrace {
    /// Selected block indices in selection order.
    pub chosen: Vec<usize>,
    /// `‖r_0‖₂, ‖r_1‖₂, …`; one more entry than `iterations`.
    pub residual_norms: Vec<f64>,
    /// Greedy selection ratio before each selection, only when an oracle
    /// support was supplied. `None` marks a degenerate denominator.
    pub gammas: Vec<Option<f64>>,
    /// Final least-squares estimate scattered into the full signal length.
    pub estimate: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl RecoveryTrace {
    /// Chosen blocks as a sorted support.
    pub fn support(&self, block_count: usize) -> Result<BlockSupport> {
        BlockSupport::new(self.chosen.clone(), block_count)
    }
}

fn ratio_from_norms(norms: &[f64], support: &BlockSupport) -> Option<f64> {
    let mut on = 0.0_f64;
    let mut off = 0.0_f64;
    for (l, &v) in norms.iter().enumerate() {
        if support.contains(l) {
            on = on.max(v);
        } else {
            off = off.max(v);
        }
    }
    (on >= RATIO_DENOMINATOR_FLOOR).then(|| off / on)
}

fn check_oracle(support: &BlockSupport, block_count: usize) -> Result<()> {
    if support.is_empty() || support.len() >= block_count {
        return Err(Error::InvalidSupport(
            "oracle support must be a nonempty proper subset of the blocks".into(),
        ));
    }
    if let Some(&bad) = support.indices().iter().find(|&&l| l >= block_count) {
        return Err(Error::InvalidSupport(format!("block {bad} out of range")));
    }
    Ok(())
}

/// Greedy selection ratio `max_{l∉I1} ‖A_lᵀ r‖₂ / max_{l∈I1} ‖A_lᵀ r‖₂`.
pub fn greedy_selection_ratio(
    dict: &BlockDictionary,
    support: &BlockSupport,
    r: &Vector,
) -> Result<f64> {
    check_oracle(support, dict.block_count())?;
    if r.len() != dict.rows() {
        return Err(Error::DimensionMismatch {
            context: "greedy selection ratio",
            expected: dict.rows(),
            found: r.len(),
        });
    }
    let corr = dict.matrix().tr_mul(r);
    let norms = block_norms(corr.as_slice(), dict.partition())?;
    ratio_from_norms(&norms, support).ok_or(Error::DegenerateResidual)
}

/// Block orthogonal matching pursuit.
///
/// Each iteration picks the unchosen block maximizing `‖A_iᵀ r_{t−1}‖₂`
/// (lowest index on ties), refits least squares over all chosen blocks and
/// updates the residual. With `oracle_support` the greedy selection ratio is
/// recorded before every selection.
pub fn bomp(
    y: &Vector,
    dict: &BlockDictionary,
    stop: StoppingRule,
    oracle_support: Option<&BlockSupport>,
) -> Result<RecoveryTrace> {
    if y.len() != dict.rows() {
        return Err(Error::DimensionMismatch {
            context: "bomp measurements",
            expected: dict.rows(),
            found: y.len(),
        });
    }
    stop.validate(dict)?;
    if let Some(s) = oracle_support {
        check_oracle(s, dict.block_count())?;
    }

    let a = dict.matrix();
    let part = dict.partition();
    let d = part.block_len();
    let block_count = part.count();

    let mut residual = y.clone();
    let mut residual_norms = vec![y.norm()];
    let mut chosen: Vec<usize> = Vec::new();
    let mut taken = vec![false; block_count];
    let mut gammas = Vec::new();
    let mut coef = Vector::zeros(0);
    let mut stagnant = 0;

    let stop_reason = loop {
        let current = *residual_norms.last().unwrap();
        match stop.mode {
            StopMode::KnownK(k) if chosen.len() == k => break StopReason::KReached,
            StopMode::ResidualTol(eps) if current < eps => break StopReason::TolReached,
            _ => {}
        }
        if stagnant >= STAGNATION_PATIENCE {
            break StopReason::Stagnation;
        }
        if chosen.len() == stop.max_iters || chosen.len() == block_count {
            break StopReason::MaxIters;
        }

        let corr = a.tr_mul(&residual);
        let mut norms = block_norms(corr.as_slice(), part)?;
        if let Some(s) = oracle_support {
            gammas.push(ratio_from_norms(&norms, s));
        }
        for (l, v) in norms.iter_mut().enumerate() {
            if taken[l] {
                *v = f64::NEG_INFINITY;
            }
        }
        let (pick, _) = argmax(&norms);
        taken[pick] = true;
        chosen.push(pick);

        let psi = dict.gather(&chosen);
        coef = least_squares(&psi, y).map_err(|e| Error::Recovery {
            iteration: chosen.len(),
            source: Box::new(e),
        })?;
        residual = y - &psi * &coef;
        let next = residual.norm();
        residual_norms.push(next);

        if matches!(stop.mode, StopMode::ResidualTol(_)) {
            if current - next < STAGNATION_TOLERANCE * current {
                stagnant += 1;
            } else {
                stagnant = 0;
            }
        }
    };

    let mut estimate = vec![0.0; dict.cols()];
    for (slot, &l) in chosen.iter().enumerate() {
        estimate[part.range(l)].copy_from_slice(&coef.as_slice()[slot * d..(slot + 1) * d]);
    }
    Ok(RecoveryTrace {
        iterations: chosen.len(),
        chosen,
        residual_norms,
        gammas,
        estimate,
        stop_reason,
    })
}

/// Conventional OMP: BOMP on the same matrix with single-column blocks.
///
/// The stopping rule is given in blocks of `dict`; a known `K` becomes `K d`
/// atom selections. Chosen indices in the trace are column indices.
pub fn omp(y: &Vector, dict: &BlockDictionary, stop: StoppingRule) -> Result<RecoveryTrace> {
    let atoms = dict.repartition(1)?;
    stop.validate(dict)?;
    bomp(y, &atoms, stop.in_atoms(dict.block_len()), None)
}
