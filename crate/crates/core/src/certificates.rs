//! Sufficient conditions for exact block-support recovery, and the
//! intermediate inequalities of their proofs, as numerically checkable
//! predicates.
//!
//! Notation: `a = 1 − (d−1)ν` is the Gram floor of a block and
//! `b = d μ_B` bounds the spectral norm of every cross-Gram block.

use serde::{Deserialize, Serialize};

use crate::coherence::{BlockDictionary, CoherenceProfile};
use crate::error::{Error, Result};
use crate::linalg::{
    block_norms, mixed_operator_norm_lower, mixed_operator_norm_upper, BlockPartition, Matrix,
    QrSolver, Vector,
};
use crate::recovery::BlockSparseSignal;

/// Slack applied to every inequality; it absorbs floating-point evaluation
/// error only.
pub const SLACK: f64 = 1e-10;

/// Random starts used for the sampled operator-norm lower bound.
pub const LOWER_BOUND_TRIALS: usize = 200;

/// Measurement noise split into a part absorbed by the signal subspace and
/// a part orthogonal to it: `y = A_nz x̃_nz + w̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDecomposition {
    /// Support blocks, in the order `x_tilde_nz` stacks them.
    pub support: Vec<usize>,
    pub block_len: usize,
    /// `x_nz + A_nz† w`.
    pub x_tilde_nz: Vec<f64>,
    /// `P⊥_{A_nz} w`.
    pub w_tilde: Vec<f64>,
    /// `max_l ‖A_lᵀ w̃‖₂` over all blocks.
    pub omega: f64,
    /// Same maximum restricted to off-support blocks; reported only.
    pub omega_off_support: f64,
    /// `min_{l ∈ I1} ‖x̃_l‖₂`.
    pub x_block_min: f64,
    /// Smallest nonzero `|x̃_i|`.
    pub x_min: f64,
    /// `‖Aᵀ w̃‖_∞`.
    pub inf_noise_corr: f64,
    /// Every entry of `x̃_nz` is nonzero.
    pub dense: bool,
}

impl NoiseDecomposition {
    pub fn block(&self, slot: usize) -> &[f64] {
        &self.x_tilde_nz[slot * self.block_len..(slot + 1) * self.block_len]
    }

    pub fn block_norm(&self, slot: usize) -> f64 {
        self.block(slot).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Splits `w` against the true signal subspace.
pub fn decompose_noise(
    dict: &BlockDictionary,
    signal: &BlockSparseSignal,
    w: &Vector,
) -> Result<NoiseDecomposition> {
    let part = dict.partition();
    if signal.partition() != part {
        return Err(Error::DimensionMismatch {
            context: "signal length",
            expected: dict.cols(),
            found: signal.x().len(),
        });
    }
    if w.len() != dict.rows() {
        return Err(Error::DimensionMismatch {
            context: "noise length",
            expected: dict.rows(),
            found: w.len(),
        });
    }
    let support = signal.support().indices().to_vec();
    if support.is_empty() {
        return Err(Error::InvalidSignal("empty support".into()));
    }
    let d = part.block_len();
    let a_nz = dict.gather(&support);
    let qr = QrSolver::new(&a_nz)?;
    let absorbed = qr.solve(w)?;
    let x_tilde = signal.nonzero_part() + &absorbed;
    let w_tilde = w - &a_nz * &absorbed;

    let corr = dict.matrix().tr_mul(&w_tilde);
    let norms = block_norms(corr.as_slice(), part)?;
    let omega = norms.iter().copied().fold(0.0, f64::max);
    let omega_off_support = norms
        .iter()
        .enumerate()
        .filter(|(l, _)| signal.support().indices().binary_search(l).is_err())
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let x_block_min = x_tilde
        .as_slice()
        .chunks_exact(d)
        .map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    if !(x_block_min > 0.0) {
        return Err(Error::InvalidSignal(
            "an effective support block has zero norm".into(),
        ));
    }
    let x_min = x_tilde
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    Ok(NoiseDecomposition {
        support,
        block_len: d,
        dense: x_tilde.iter().all(|&v| v != 0.0),
        x_tilde_nz: x_tilde.as_slice().to_vec(),
        w_tilde: w_tilde.as_slice().to_vec(),
        omega,
        omega_off_support,
        x_block_min,
        x_min,
        inf_noise_corr: corr.amax(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Noise-free block condition.
    NoiselessBlock,
    /// Noisy block condition with `ω` and `x_b,min`.
    NoisyBlock,
    /// Conventional OMP condition treating the signal as `Kd`-sparse.
    OmpCondition,
    /// Block condition specialised to orthonormal blocks (`ν = 0`).
    OrthonormalBlock,
}

/// Inputs echoed with a certificate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_block: Option<f64>,
    pub nu: f64,
    pub k: usize,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_block_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inf_noise_corr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
}

/// An evaluated sufficient recovery condition.
///
/// `verdict` holds iff condition (i) has a margin above [`SLACK`] and
/// condition (ii) holds strictly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCertificate {
    pub kind: CertificateKind,
    pub condition_i_margin: f64,
    pub condition_ii_lhs: f64,
    pub condition_ii_rhs: f64,
    pub verdict: bool,
    pub inputs: CertificateInputs,
}

fn require_counts(k: usize, d: usize) -> Result<()> {
    if k == 0 || d == 0 {
        return Err(Error::InvalidArgument("K and d must be at least 1".into()));
    }
    Ok(())
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {v}"
        )));
    }
    Ok(())
}

fn require_nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be nonnegative, got {v}"
        )));
    }
    Ok(())
}

/// `(margin, denominator)` of the block conditions:
/// `1 − (d−1)ν − (2K−1)dμ_B` and `1 − (d−1)ν − (K−1)dμ_B`.
fn block_terms(mu_block: f64, nu: f64, k: usize, d: usize) -> (f64, f64) {
    let floor = 1.0 - (d as f64 - 1.0) * nu;
    let b = d as f64 * mu_block;
    let k = k as f64;
    (floor - (2.0 * k - 1.0) * b, floor - (k - 1.0) * b)
}

/// `margin² / denominator`, or `−∞` when the denominator is not positive.
fn squared_ratio(margin: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        margin * margin / denominator
    } else {
        f64::NEG_INFINITY
    }
}

/// `Kdμ_B / (1 − (d−1)ν − (K−1)dμ_B)` when the denominator is positive.
pub fn noiseless_fraction(mu_block: f64, nu: f64, k: usize, d: usize) -> Option<f64> {
    let (_, denominator) = block_terms(mu_block, nu, k, d);
    (denominator > 0.0).then(|| k as f64 * d as f64 * mu_block / denominator)
}

/// Noise-free block condition, in margin form
/// `1 − (d−1)ν − (2K−1)dμ_B > 0` (condition (ii) is vacuous).
pub fn check_noiseless(mu_block: f64, nu: f64, k: usize, d: usize) -> RecoveryCertificate {
    let (margin, denominator) = block_terms(mu_block, nu, k, d);
    RecoveryCertificate {
        kind: CertificateKind::NoiselessBlock,
        condition_i_margin: margin,
        condition_ii_lhs: 1.0,
        condition_ii_rhs: 0.0,
        verdict: margin > SLACK && denominator > 0.0,
        inputs: CertificateInputs {
            mu_block: Some(mu_block),
            nu,
            k,
            d,
            ..Default::default()
        },
    }
}

fn block_certificate(
    kind: CertificateKind,
    mu_block: f64,
    nu: f64,
    k: usize,
    d: usize,
    omega: f64,
    x_block_min: f64,
) -> Result<RecoveryCertificate> {
    require_counts(k, d)?;
    require_nonnegative("omega", omega)?;
    require_positive("x_block_min", x_block_min)?;
    let (margin, denominator) = block_terms(mu_block, nu, k, d);
    let lhs = squared_ratio(margin, denominator);
    let rhs = omega / x_block_min;
    Ok(RecoveryCertificate {
        kind,
        condition_i_margin: margin,
        condition_ii_lhs: lhs,
        condition_ii_rhs: rhs,
        verdict: margin > SLACK && lhs > rhs,
        inputs: CertificateInputs {
            mu_block: Some(mu_block),
            nu,
            k,
            d,
            omega: Some(omega),
            x_block_min: Some(x_block_min),
            ..Default::default()
        },
    })
}

/// Noisy block condition:
/// (i) `1 − (d−1)ν − (2K−1)dμ_B > 0` and
/// (ii) `[1 − (d−1)ν − (2K−1)dμ_B]² / (1 − (d−1)ν − (K−1)dμ_B) > ω / x_b,min`.
///
/// The left side of (ii) is below one whenever (i) holds, so a ratio
/// `ω / x_b,min ≥ 1` can never be certified.
pub fn check_noisy_block(
    mu_block: f64,
    nu: f64,
    k: usize,
    d: usize,
    omega: f64,
    x_block_min: f64,
) -> Result<RecoveryCertificate> {
    block_certificate(
        CertificateKind::NoisyBlock,
        mu_block,
        nu,
        k,
        d,
        omega,
        x_block_min,
    )
}

/// The block condition for orthonormal blocks, i.e. with `ν = 0`.
pub fn check_orthonormal_block(
    mu_block: f64,
    k: usize,
    d: usize,
    omega: f64,
    x_block_min: f64,
) -> Result<RecoveryCertificate> {
    block_certificate(
        CertificateKind::OrthonormalBlock,
        mu_block,
        0.0,
        k,
        d,
        omega,
        x_block_min,
    )
}

/// Conventional OMP condition for a `Kd`-sparse signal:
/// (i) `1 − 2Kdμ > 0` and (ii) `(1 − 2Kdμ)² / (1 − Kdμ) > ‖Aᵀw̃‖_∞ / x_min`.
pub fn check_omp_condition(
    mu: f64,
    k: usize,
    d: usize,
    inf_noise_corr: f64,
    x_min: f64,
) -> Result<RecoveryCertificate> {
    require_counts(k, d)?;
    require_nonnegative("inf_noise_corr", inf_noise_corr)?;
    require_positive("x_min", x_min)?;
    let kd = (k * d) as f64;
    let margin = 1.0 - 2.0 * kd * mu;
    let lhs = squared_ratio(margin, 1.0 - kd * mu);
    let rhs = inf_noise_corr / x_min;
    Ok(RecoveryCertificate {
        kind: CertificateKind::OmpCondition,
        condition_i_margin: margin,
        condition_ii_lhs: lhs,
        condition_ii_rhs: rhs,
        verdict: margin > SLACK && lhs > rhs,
        inputs: CertificateInputs {
            mu: Some(mu),
            nu: 0.0,
            k,
            d,
            inf_noise_corr: Some(inf_noise_corr),
            x_min: Some(x_min),
            ..Default::default()
        },
    })
}

/// One evaluated inequality `lhs (op) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Whether a failure is a violation (otherwise the link is reported only).
    pub asserted: bool,
}

impl InequalityCheck {
    fn le(label: &str, lhs: f64, rhs: f64, asserted: bool) -> Self {
        Self {
            label: label.into(),
            lhs,
            rhs,
            holds: lhs <= rhs + SLACK,
            asserted,
        }
    }

    fn ge(label: &str, lhs: f64, rhs: f64, asserted: bool) -> Self {
        Self {
            label: label.into(),
            lhs,
            rhs,
            holds: lhs >= rhs - SLACK,
            asserted,
        }
    }

    fn gt(label: &str, lhs: f64, rhs: f64, asserted: bool) -> Self {
        Self {
            label: label.into(),
            lhs,
            rhs,
            holds: lhs > rhs - SLACK,
            asserted,
        }
    }

    pub fn is_violation(&self) -> bool {
        self.asserted && !self.holds
    }
}

fn first_violation(checks: &[InequalityCheck], seed: Option<u64>) -> Result<()> {
    match checks.iter().find(|c| c.is_violation()) {
        Some(c) => Err(Error::BoundViolated {
            label: c.label.clone(),
            lhs: c.lhs,
            rhs: c.rhs,
            seed,
        }),
        None => Ok(()),
    }
}

/// Every quantity of the block-versus-conventional comparison for a
/// dictionary with orthonormal blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonChainReport {
    pub mu: f64,
    pub mu_block: f64,
    pub k: usize,
    pub d: usize,
    pub omega: f64,
    pub inf_noise_corr: f64,
    pub x_block_min: f64,
    pub x_min: f64,
    pub dense: bool,
    pub orthonormal_block: RecoveryCertificate,
    pub omp_condition: RecoveryCertificate,
    pub links: Vec<InequalityCheck>,
}

impl ComparisonChainReport {
    pub fn violation(&self) -> Option<&InequalityCheck> {
        self.links.iter().find(|c| c.is_violation())
    }
}

/// Maximum sub-coherence accepted as "orthonormal blocks".
pub const ORTHONORMAL_NU_TOLERANCE: f64 = 1e-10;

/// Evaluates the comparison chain without failing on violations.
///
/// The `√d` form of `x_b,min ≥ √d x_min` only follows when every entry of
/// `x̃_nz` is nonzero; on sparse blocks it is reported but not asserted.
pub fn comparison_chain_report(
    dict: &BlockDictionary,
    signal: &BlockSparseSignal,
    w: &Vector,
) -> Result<ComparisonChainReport> {
    let profile = CoherenceProfile::compute(dict)?;
    if profile.nu > ORTHONORMAL_NU_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "comparison chain needs orthonormal blocks, sub-coherence is {}",
            profile.nu
        )));
    }
    let dec = decompose_noise(dict, signal, w)?;
    let k = signal.sparsity();
    let d = dict.block_len();
    let sqrt_d = (d as f64).sqrt();
    let kd = (k * d) as f64;
    let b = d as f64 * profile.mu_block;
    let (mu, mu_b) = (profile.mu, profile.mu_block);

    let mut links = vec![
        InequalityCheck::le(
            "omega_le_sqrt_d_inf_corr",
            dec.omega,
            sqrt_d * dec.inf_noise_corr,
            true,
        ),
        InequalityCheck::ge("x_block_min_ge_x_min", dec.x_block_min, dec.x_min, true),
        InequalityCheck::ge(
            "x_block_min_ge_sqrt_d_x_min",
            dec.x_block_min,
            sqrt_d * dec.x_min,
            dec.dense,
        ),
    ];
    if 1.0 - 2.0 * kd * mu_b > 0.0 {
        let (margin, denominator) = block_terms(mu_b, 0.0, k, d);
        links.push(InequalityCheck::ge(
            "block_form_ge_shifted_form",
            squared_ratio(margin, denominator),
            squared_ratio(1.0 - 2.0 * k as f64 * b, 1.0 - k as f64 * b),
            true,
        ));
    }
    if 1.0 - 2.0 * kd * mu > 0.0 {
        links.push(InequalityCheck::ge(
            "shifted_form_mu_block_ge_mu",
            squared_ratio(1.0 - 2.0 * kd * mu_b, 1.0 - kd * mu_b),
            squared_ratio(1.0 - 2.0 * kd * mu, 1.0 - kd * mu),
            true,
        ));
    }
    links.push(InequalityCheck::le("mu_block_le_mu", mu_b, mu, true));
    let block_ratio = dec.omega / dec.x_block_min;
    let atom_ratio = dec.inf_noise_corr / dec.x_min;
    links.push(InequalityCheck::le(
        "block_ratio_le_atom_ratio",
        block_ratio,
        atom_ratio,
        dec.dense,
    ));

    let orthonormal_block = check_orthonormal_block(mu_b, k, d, dec.omega, dec.x_block_min)?;
    let omp_condition = check_omp_condition(mu, k, d, dec.inf_noise_corr, dec.x_min)?;
    // The conventional certificate implies the block one whenever every link holds.
    links.push(InequalityCheck {
        label: "omp_verdict_implies_bomp_verdict".into(),
        lhs: omp_condition.verdict as u8 as f64,
        rhs: orthonormal_block.verdict as u8 as f64,
        holds: !omp_condition.verdict || orthonormal_block.verdict,
        asserted: dec.dense,
    });
    if !dec.dense {
        log::debug!("comparison chain: sparse effective blocks, sqrt(d) links reported only");
    }

    Ok(ComparisonChainReport {
        mu,
        mu_block: mu_b,
        k,
        d,
        omega: dec.omega,
        inf_noise_corr: dec.inf_noise_corr,
        x_block_min: dec.x_block_min,
        x_min: dec.x_min,
        dense: dec.dense,
        orthonormal_block,
        omp_condition,
        links,
    })
}

/// [`comparison_chain_report`], failing on the first asserted violation.
pub fn check_comparison_chain(
    dict: &BlockDictionary,
    signal: &BlockSparseSignal,
    w: &Vector,
) -> Result<ComparisonChainReport> {
    let report = comparison_chain_report(dict, signal, w)?;
    first_violation(&report.links, None)?;
    Ok(report)
}

/// Which true-support blocks count as already chosen in the greedy step checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixSplit {
    /// The first `k` support blocks in index order.
    IndexOrder,
    /// The first `k` entries of a replayed selection order.
    Replay(Vec<usize>),
}

/// Evaluated proof-chain inequalities for one prefix length `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBoundsReport {
    pub k: usize,
    pub sparsity: usize,
    pub chosen: Vec<usize>,
    pub remaining: Vec<usize>,
    /// Condition (i) margin; the bounds are asserted only when positive.
    pub condition_i_margin: f64,
    pub conditioned: bool,
    /// Upper estimate `max_i Σ_j ρ(M_ij)` of the operator norm in bound (d).
    pub operator_norm_upper: f64,
    pub bounds: Vec<InequalityCheck>,
}

impl StepBoundsReport {
    pub fn violation(&self) -> Option<&InequalityCheck> {
        self.bounds.iter().find(|c| c.is_violation())
    }
}

fn max_block_corr(dict: &BlockDictionary, blocks: &[usize], v: &Vector) -> f64 {
    blocks
        .iter()
        .map(|&l| dict.block(l).tr_mul(v).norm())
        .fold(0.0, f64::max)
}

/// Evaluates bounds (a)–(e) of the greedy-step proof for a correct prefix of
/// length `k` without failing on violations:
///
/// * (a) `‖A_nzᵀ r̃_k‖_{2,∞} ≥ (1 − (d−1)ν − (2K−2k−1)dμ_B) x_b,min`
/// * (b) `‖A_nzᵀ P_Φ1 Φ2φ2‖_{2,∞} ≤ dμ_B (K−k) max_{Φ2} ‖x̃_i‖₂`
/// * (c) `max_{Φ1} ‖A_iᵀ P_Φ1 Φ2φ2‖₂ ≥ max_{Φ2} ‖A_iᵀ P_Φ1 Φ2φ2‖₂`
/// * (d) `‖A_zᵀ (A_nz†)ᵀ‖_{2,∞} ≤ Kdμ_B / (1 − (d−1)ν − (K−1)dμ_B)`, with
///   the sampled lower bound on the left
/// * (e) `1 − (d−1)ν − (k−1)dμ_B > k dμ_B`
pub fn step_bounds_report(
    dict: &BlockDictionary,
    signal: &BlockSparseSignal,
    w: &Vector,
    k: usize,
    split: &PrefixSplit,
    seed: u64,
) -> Result<StepBoundsReport> {
    let profile = CoherenceProfile::compute(dict)?;
    step_bounds_with_profile(dict, &profile, signal, w, k, split, seed)
}

/// As [`step_bounds_report`] with a precomputed coherence profile.
pub fn step_bounds_with_profile(
    dict: &BlockDictionary,
    profile: &CoherenceProfile,
    signal: &BlockSparseSignal,
    w: &Vector,
    k: usize,
    split: &PrefixSplit,
    seed: u64,
) -> Result<StepBoundsReport> {
    let sparsity = signal.sparsity();
    if k >= sparsity {
        return Err(Error::InvalidArgument(format!(
            "prefix length {k} must be below K = {sparsity}"
        )));
    }
    let support = signal.support();
    let chosen: Vec<usize> = match split {
        PrefixSplit::IndexOrder => support.indices()[..k].to_vec(),
        PrefixSplit::Replay(order) => {
            if order.len() < k || order[..k].iter().any(|&l| !support.contains(l)) {
                return Err(Error::InvalidArgument(
                    "replayed prefix is not a correct selection".into(),
                ));
            }
            order[..k].to_vec()
        }
    };
    let remaining: Vec<usize> = support
        .indices()
        .iter()
        .copied()
        .filter(|l| !chosen.contains(l))
        .collect();

    let dec = decompose_noise(dict, signal, w)?;
    let slot_of = |l: usize| dec.support.iter().position(|&s| s == l).unwrap();
    let d = dict.block_len();
    let kk = sparsity as f64;
    let kf = k as f64;
    let b = d as f64 * profile.mu_block;
    let floor = 1.0 - (d as f64 - 1.0) * profile.nu;
    let (margin, denominator) = block_terms(profile.mu_block, profile.nu, sparsity, d);
    let conditioned = margin > 0.0;

    // Φ2 φ2 and its projection onto span(Φ1).
    let mut phi2_vec = Vector::zeros(dict.rows());
    let mut max_remaining = 0.0_f64;
    for &l in &remaining {
        let slot = slot_of(l);
        let xl = Vector::from_column_slice(dec.block(slot));
        phi2_vec += dict.block(l) * xl;
        max_remaining = max_remaining.max(dec.block_norm(slot));
    }
    let projected = if chosen.is_empty() {
        Vector::zeros(dict.rows())
    } else {
        let phi1 = dict.gather(&chosen);
        &phi1 * QrSolver::new(&phi1)?.solve(&phi2_vec)?
    };
    let r_tilde = &phi2_vec - &projected;

    let all = support.indices();
    let bound_a = InequalityCheck::ge(
        "a_residual_correlation_floor",
        max_block_corr(dict, all, &r_tilde),
        (floor - (2.0 * kk - 2.0 * kf - 1.0) * b) * dec.x_block_min,
        conditioned,
    );
    let bound_b = InequalityCheck::le(
        "b_projected_correlation_ceiling",
        max_block_corr(dict, all, &projected),
        b * (kk - kf) * max_remaining,
        conditioned,
    );
    let bound_c = InequalityCheck::ge(
        "c_chosen_dominate_remaining",
        max_block_corr(dict, &chosen, &projected),
        max_block_corr(dict, &remaining, &projected),
        conditioned,
    );

    // M = A_zᵀ (A_nz†)ᵀ = (A_nz† A_z)ᵀ.
    let zero_blocks = support.complement(dict.block_count());
    let (lower, upper) = if zero_blocks.is_empty() {
        (0.0, 0.0)
    } else {
        let a_nz = dict.gather(&dec.support);
        let a_z = dict.gather(&zero_blocks);
        let m: Matrix = QrSolver::new(&a_nz)?.solve_many(&a_z)?.transpose();
        let rows = BlockPartition::new(d, zero_blocks.len())?;
        let cols = BlockPartition::new(d, sparsity)?;
        (
            mixed_operator_norm_lower(&m, rows, cols, LOWER_BOUND_TRIALS, seed)?,
            mixed_operator_norm_upper(&m, rows, cols)?,
        )
    };
    let norm_bound_rhs = if denominator > 0.0 {
        kk * b / denominator
    } else {
        f64::INFINITY
    };
    let bound_d = InequalityCheck::le(
        "d_operator_norm_bound",
        lower,
        norm_bound_rhs,
        conditioned && denominator > 0.0,
    );
    let bound_e = InequalityCheck::gt(
        "e_prefix_gram_margin",
        floor - (kf - 1.0) * b,
        kf * b,
        conditioned,
    );

    Ok(StepBoundsReport {
        k,
        sparsity,
        chosen,
        remaining,
        condition_i_margin: margin,
        conditioned,
        operator_norm_upper: upper,
        bounds: vec![bound_a, bound_b, bound_c, bound_d, bound_e],
    })
}

/// [`step_bounds_report`], failing with the label, both sides and the
/// seed of the first violated bound.
pub fn check_step_bounds(
    dict: &BlockDictionary,
    signal: &BlockSparseSignal,
    w: &Vector,
    k: usize,
    split: &PrefixSplit,
    seed: u64,
) -> Result<StepBoundsReport> {
    let report = step_bounds_report(dict, signal, w, k, split, seed)?;
    first_violation(&report.bounds, Some(seed))?;
    Ok(report)
}
