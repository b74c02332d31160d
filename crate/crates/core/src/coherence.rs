//! Block dictionaries and their coherence metrics.
//!
//! For a dictionary `A = [A_1 … A_L]` with unit-norm columns and blocks of
//! `d` columns:
//!
//! * coherence `μ = max_{i≠j} |a_iᵀ a_j|`,
//! * block-coherence `μ_B = max_{i≠j} ρ(A_iᵀ A_j) / d`,
//! * sub-coherence `ν = max_l max_{i≠j ∈ A_l} |a_iᵀ a_j|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, spectral_norm, BlockPartition, Matrix, RANK_TOLERANCE};

/// Allowed deviation of a column norm from one.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-10;

/// Measurement matrix with a partition of its columns into `L` blocks of `d`
/// consecutive columns. Columns are validated to have unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDictionary {
    matrix: Matrix,
    part: BlockPartition,
}

impl BlockDictionary {
    pub fn new(matrix: Matrix, block_len: usize) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::DegenerateDictionary("empty matrix".into()));
        }
        ensure_finite(&matrix)?;
        let part = BlockPartition::for_dim(matrix.ncols(), block_len)?;
        for (column, col) in matrix.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::NotUnitNorm { column, norm });
            }
        }
        Ok(Self { matrix, part })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn partition(&self) -> BlockPartition {
        self.part
    }

    pub fn block_len(&self) -> usize {
        self.part.block_len()
    }

    pub fn block_count(&self) -> usize {
        self.part.count()
    }

    /// Number of measurements `m`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Signal dimension `n = L d`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn block(&self, l: usize) -> Matrix {
        self.matrix
            .columns(l * self.block_len(), self.block_len())
            .into_owned()
    }

    /// Concatenation `[A_{l_1} … A_{l_k}]` in the given order.
    pub fn gather(&self, blocks: &[usize]) -> Matrix {
        let d = self.block_len();
        let mut out = Matrix::zeros(self.rows(), blocks.len() * d);
        for (slot, &l) in blocks.iter().enumerate() {
            out.columns_mut(slot * d, d)
                .copy_from(&self.matrix.columns(l * d, d));
        }
        out
    }

    /// Same matrix viewed with a different block length.
    pub fn repartition(&self, block_len: usize) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.clone(),
            part: BlockPartition::for_dim(self.cols(), block_len)?,
        })
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

fn gram(dict: &BlockDictionary) -> Matrix {
    let a = dict.matrix();
    a.transpose() * a
}

fn max_offdiag(g: &Matrix) -> (f64, (usize, usize)) {
    let n = g.ncols();
    let mut best = (0.0, (0, 1));
    for j in 1..n {
        for i in 0..j {
            let v = g[(i, j)].abs();
            if v > best.0 {
                best = (v, (i, j));
            }
        }
    }
    best
}

fn max_within_blocks(g: &Matrix, part: BlockPartition) -> Option<(f64, (usize, usize))> {
    let d = part.block_len();
    if d < 2 {
        return None;
    }
    let mut best = (0.0, (0, 1));
    for l in 0..part.count() {
        let base = l * d;
        for j in 1..d {
            for i in 0..j {
                let v = g[(base + i, base + j)].abs();
                if v > best.0 {
                    best = (v, (base + i, base + j));
                }
            }
        }
    }
    Some(best)
}

/// Exact `max_{i<j} ρ(G_ij)`. Pairs are visited in decreasing Frobenius norm
/// and the scan stops once `‖G_ij‖_F` cannot beat the running maximum, since
/// `ρ(X) ≤ ‖X‖_F`.
fn max_cross_block(g: &Matrix, part: BlockPartition) -> Result<(f64, (usize, usize))> {
    let d = part.block_len();
    let l = part.count();
    let mut pairs = Vec::with_capacity(l * (l - 1) / 2);
    for j in 1..l {
        for i in 0..j {
            let fro = g.view((i * d, j * d), (d, d)).norm();
            pairs.push((fro, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut best = (0.0, (pairs[0].1, pairs[0].2));
    for &(fro, i, j) in &pairs {
        if fro <= best.0 {
            break;
        }
        let rho = spectral_norm(&g.view((i * d, j * d), (d, d)).into_owned())?;
        if rho > best.0 {
            best = (rho, (i, j));
        }
    }
    Ok(best)
}

/// Mutual coherence `μ`.
pub fn coherence(dict: &BlockDictionary) -> Result<f64> {
    if dict.cols() < 2 {
        return Err(Error::DegenerateDictionary(
            "coherence needs at least two columns".into(),
        ));
    }
    Ok(max_offdiag(&gram(dict)).0)
}

/// Block-coherence `μ_B`.
pub fn block_coherence(dict: &BlockDictionary) -> Result<f64> {
    if dict.block_count() < 2 {
        return Err(Error::DegenerateDictionary(
            "block-coherence needs at least two blocks".into(),
        ));
    }
    let (rho, _) = max_cross_block(&gram(dict), dict.partition())?;
    Ok(rho / dict.block_len() as f64)
}

/// Sub-coherence `ν`; zero when `d = 1`.
pub fn sub_coherence(dict: &BlockDictionary) -> f64 {
    max_within_blocks(&gram(dict), dict.partition()).map_or(0.0, |(v, _)| v)
}

/// `1 − (d−1)ν`, a lower bound on `λ_min(A_lᵀ A_l)` for every block.
pub fn gershgorin_gram_floor(dict: &BlockDictionary) -> f64 {
    1.0 - (dict.block_len() as f64 - 1.0) * sub_coherence(dict)
}

/// Per-block QR with positive diagonal: `A_l = Ã_l V_l`. Returns `Ã` and the
/// block-diagonal `V`.
pub fn orthogonalize_blocks(dict: &BlockDictionary) -> Result<(BlockDictionary, Matrix)> {
    let d = dict.block_len();
    let (m, n) = (dict.rows(), dict.cols());
    if m < d {
        return Err(Error::RankDeficientBlock { block: 0 });
    }
    let mut q_all = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    for l in 0..dict.block_count() {
        let qr = dict.block(l).qr();
        let mut q = qr.q();
        let mut r = qr.r();
        let scale = (0..d).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..d {
            if r[(i, i)].abs() <= RANK_TOLERANCE * scale || scale == 0.0 {
                return Err(Error::RankDeficientBlock { block: l });
            }
            if r[(i, i)] < 0.0 {
                q.column_mut(i).neg_mut();
                r.row_mut(i).neg_mut();
            }
        }
        q_all.columns_mut(l * d, d).copy_from(&q);
        v.view_mut((l * d, l * d), (d, d)).copy_from(&r);
    }
    for mut col in q_all.column_iter_mut() {
        let norm = col.norm();
        col.unscale_mut(norm);
    }
    Ok((BlockDictionary::new(q_all, d)?, v))
}

/// All coherence metrics of a dictionary, computed from one Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceProfile {
    pub mu: f64,
    pub mu_block: f64,
    pub nu: f64,
    pub gershgorin_floor: f64,
    pub block_len: usize,
    /// Column pair attaining `μ`.
    pub mu_pair: (usize, usize),
    /// Block pair attaining `μ_B`.
    pub mu_block_pair: (usize, usize),
    /// Column pair attaining `ν`; absent when `d = 1`.
    pub nu_pair: Option<(usize, usize)>,
}

impl CoherenceProfile {
    pub fn compute(dict: &BlockDictionary) -> Result<Self> {
        if dict.block_count() < 2 {
            return Err(Error::DegenerateDictionary(
                "coherence profile needs at least two blocks".into(),
            ));
        }
        let g = gram(dict);
        let d = dict.block_len();
        let (mu, mu_pair) = max_offdiag(&g);
        let (rho, mu_block_pair) = max_cross_block(&g, dict.partition())?;
        let within = max_within_blocks(&g, dict.partition());
        let nu = within.map_or(0.0, |(v, _)| v);
        Ok(Self {
            mu,
            mu_block: rho / d as f64,
            nu,
            gershgorin_floor: 1.0 - (d as f64 - 1.0) * nu,
            block_len: d,
            mu_pair,
            mu_block_pair,
            nu_pair: within.map(|(_, p)| p),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_dict(m: usize, n: usize, d: usize, seed: u64) -> BlockDictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Matrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
        for mut c in a.column_iter_mut() {
            let norm = c.norm();
            c.unscale_mut(norm);
        }
        BlockDictionary::new(a, d).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(
            BlockDictionary::new(Matrix::from_element(3, 2, 1.0), 1),
            Err(Error::NotUnitNorm { column: 0, .. })
        ));
        assert!(BlockDictionary::new(Matrix::identity(4, 4), 3).is_err());
        let dict = BlockDictionary::new(Matrix::identity(4, 4), 2).unwrap();
        assert_eq!(dict.block_count(), 2);
        assert_eq!(dict.gather(&[1]), dict.block(1));
    }

    #[test]
    fn orthonormal_dictionary_has_zero_coherences() {
        let dict = BlockDictionary::new(Matrix::identity(6, 6), 2).unwrap();
        assert_eq!(coherence(&dict).unwrap(), 0.0);
        assert_eq!(block_coherence(&dict).unwrap(), 0.0);
        assert_eq!(sub_coherence(&dict), 0.0);
        assert_eq!(gershgorin_gram_floor(&dict), 1.0);
    }

    #[test]
    fn identical_columns_have_unit_coherence() {
        let mut a = Matrix::zeros(3, 2);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 1.0;
        let dict = BlockDictionary::new(a, 1).unwrap();
        assert_eq!(coherence(&dict).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_inputs_error() {
        let one_col = BlockDictionary::new(Matrix::identity(3, 1), 1).unwrap();
        assert!(coherence(&one_col).is_err());
        let one_block = BlockDictionary::new(Matrix::identity(3, 2), 2).unwrap();
        assert!(block_coherence(&one_block).is_err());
        assert!(CoherenceProfile::compute(&one_block).is_err());
    }

    #[test]
    fn d1_reduction() {
        let dict = random_dict(8, 16, 1, 3);
        assert_eq!(sub_coherence(&dict), 0.0);
        assert_eq!(gershgorin_gram_floor(&dict), 1.0);
        let mu = coherence(&dict).unwrap();
        assert!((block_coherence(&dict).unwrap() - mu).abs() <= 1e-12);
    }

    #[test]
    fn profile_matches_individual_ops() {
        let dict = random_dict(10, 24, 3, 9);
        let p = CoherenceProfile::compute(&dict).unwrap();
        assert_eq!(p.mu, coherence(&dict).unwrap());
        assert_eq!(p.mu_block, block_coherence(&dict).unwrap());
        assert_eq!(p.nu, sub_coherence(&dict));
        let (i, j) = p.mu_pair;
        let a = dict.matrix();
        assert!((a.column(i).dot(&a.column(j)).abs() - p.mu).abs() < 1e-14);
        let (bi, bj) = p.mu_block_pair;
        let cross = dict.block(bi).tr_mul(&dict.block(bj));
        assert!((spectral_norm(&cross).unwrap() / 3.0 - p.mu_block).abs() < 1e-12);
        let (ci, cj) = p.nu_pair.unwrap();
        assert_eq!(ci / 3, cj / 3);
    }

    #[test]
    fn orthogonalize_identity_blocks() {
        let dict = BlockDictionary::new(Matrix::identity(4, 4), 2).unwrap();
        let (q, v) = orthogonalize_blocks(&dict).unwrap();
        assert!((q.matrix() - dict.matrix()).amax() < 1e-14);
        assert!((v - Matrix::identity(4, 4)).amax() < 1e-14);

        let dict = random_dict(5, 10, 1, 2);
        let (q, v) = orthogonalize_blocks(&dict).unwrap();
        assert!((q.matrix() - dict.matrix()).amax() < 1e-14);
        assert!((v - Matrix::identity(10, 10)).amax() < 1e-14);
    }

    #[test]
    fn orthogonalize_flags_deficient_block() {
        let mut a = random_dict(6, 6, 3, 1).into_matrix();
        let c = a.column(3).into_owned();
        a.set_column(4, &c);
        let dict = BlockDictionary::new(a, 3).unwrap();
        assert!(matches!(
            orthogonalize_blocks(&dict),
            Err(Error::RankDeficientBlock { block: 1 })
        ));
    }

    #[test]
    fn sign_flips_leave_metrics_unchanged() {
        let dict = random_dict(8, 16, 4, 12);
        let mut flipped = dict.matrix().clone();
        for j in [0, 5, 6, 13] {
            flipped.column_mut(j).neg_mut();
        }
        let flipped = BlockDictionary::new(flipped, 4).unwrap();
        let a = CoherenceProfile::compute(&dict).unwrap();
        let b = CoherenceProfile::compute(&flipped).unwrap();
        assert!((a.mu - b.mu).abs() < 1e-14);
        assert!((a.mu_block - b.mu_block).abs() < 1e-12);
        assert!((a.nu - b.nu).abs() < 1e-14);
    }
}
