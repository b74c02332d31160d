//! Dense linear algebra primitives and block-structured mixed norms.
//!
//! Matrices and vectors are plain `nalgebra` dense types. Everything block
//! aware goes through [`BlockPartition`], which describes how a dimension
//! splits into equal-length consecutive blocks.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod text;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative threshold on `|R_jj| / max |R_ii|` below which a least-squares
/// system is declared rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Number of alternating ascent steps applied to each random start in
/// [`mixed_operator_norm_lower`].
pub const LOWER_BOUND_ASCENT_STEPS: usize = 8;

/// Splits a dimension into `count` consecutive blocks of length `block_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockPartition {
    block_len: usize,
    count: usize,
}

impl BlockPartition {
    pub fn new(block_len: usize, count: usize) -> Result<Self> {
        if block_len == 0 {
            return Err(Error::Partition("block length must be at least 1".into()));
        }
        Ok(Self { block_len, count })
    }

    /// Partition of a dimension `dim` into blocks of length `block_len`.
    pub fn for_dim(dim: usize, block_len: usize) -> Result<Self> {
        if block_len == 0 {
            return Err(Error::Partition("block length must be at least 1".into()));
        }
        if !dim.is_multiple_of(block_len) {
            return Err(Error::Partition(format!(
                "dimension {dim} is not a multiple of block length {block_len}"
            )));
        }
        Ok(Self {
            block_len,
            count: dim / block_len,
        })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.block_len * self.count
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        block * self.block_len..(block + 1) * self.block_len
    }

    pub fn check_len(&self, len: usize, context: &'static str) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// `m / d` when `m` is an integral multiple of the block length.
    pub fn integral_ratio(&self, m: usize) -> Option<usize> {
        m.is_multiple_of(self.block_len).then(|| m / self.block_len)
    }
}

/// Order `p` of the outer norm in a mixed ℓ2/ℓp norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    One,
    Two,
    Inf,
}

/// Euclidean norm of every block of `z`.
pub fn block_norms(z: &[f64], part: BlockPartition) -> Result<Vec<f64>> {
    part.check_len(z.len(), "block_norms")?;
    Ok(z.chunks_exact(part.block_len())
        .map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect())
}

/// `‖v‖_p` where `v_q` is the Euclidean norm of block `q` of `z`.
pub fn mixed_vector_norm(z: &[f64], part: BlockPartition, p: NormOrder) -> Result<f64> {
    let norms = block_norms(z, part)?;
    Ok(match p {
        NormOrder::One => norms.iter().sum(),
        NormOrder::Two => norms.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormOrder::Inf => norms.iter().copied().fold(0.0, f64::max),
    })
}

fn check_conformable(m: &Matrix, rows: BlockPartition, cols: BlockPartition) -> Result<()> {
    rows.check_len(m.nrows(), "operator norm rows")?;
    cols.check_len(m.ncols(), "operator norm columns")
}

/// Upper bound `max_i Σ_j ρ(M_ij)` on the mixed ℓ2/ℓ∞ operator norm.
pub fn mixed_operator_norm_upper(
    m: &Matrix,
    row_part: BlockPartition,
    col_part: BlockPartition,
) -> Result<f64> {
    check_conformable(m, row_part, col_part)?;
    let (dr, dc) = (row_part.block_len(), col_part.block_len());
    let mut best = 0.0_f64;
    for i in 0..row_part.count() {
        let mut row_sum = 0.0;
        for j in 0..col_part.count() {
            let block = m.view((i * dr, j * dc), (dr, dc));
            row_sum += spectral_norm(&block.into_owned())?;
        }
        best = best.max(row_sum);
    }
    Ok(best)
}

/// Randomized lower bound on the mixed ℓ2/ℓ∞ operator norm.
///
/// Each trial starts from a point with every block uniform on its unit
/// sphere and runs [`LOWER_BOUND_ASCENT_STEPS`] steps of block-wise
/// alternating ascent; every visited point is feasible, so the running
/// maximum never exceeds the true norm.
pub fn mixed_operator_norm_lower(
    m: &Matrix,
    row_part: BlockPartition,
    col_part: BlockPartition,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_conformable(m, row_part, col_part)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let (dr, dc) = (row_part.block_len(), col_part.block_len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Vector::zeros(m.ncols());
    let mut best = 0.0_f64;

    for _ in 0..trials {
        for j in 0..col_part.count() {
            loop {
                let mut norm = 0.0;
                for k in col_part.range(j) {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    z[k] = v;
                    norm += v * v;
                }
                let norm = norm.sqrt();
                if norm > 0.0 {
                    z.rows_mut(j * dc, dc).unscale_mut(norm);
                    break;
                }
            }
        }
        for _ in 0..=LOWER_BOUND_ASCENT_STEPS {
            let u = m * &z;
            let norms = block_norms(u.as_slice(), row_part)?;
            let (row, value) = argmax(&norms);
            best = best.max(value);
            if value == 0.0 {
                break;
            }
            let dir = u.rows(row * dr, dr) / value;
            for j in 0..col_part.count() {
                let blk = m.view((row * dr, j * dc), (dr, dc));
                let g = blk.tr_mul(&dir);
                let gn = g.norm();
                if gn > 0.0 {
                    z.rows_mut(j * dc, dc).copy_from(&(g / gn));
                }
            }
        }
    }
    Ok(best)
}

/// First index of the maximum (ties resolve to the lowest index).
pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Spectral norm `sqrt(λ_max(XᵀX))`.
pub fn spectral_norm(x: &Matrix) -> Result<f64> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "spectral norm of an empty matrix".into(),
        ));
    }
    if x.nrows() == 1 || x.ncols() == 1 {
        return Ok(x.norm());
    }
    let gram = if x.ncols() <= x.nrows() {
        x.tr_mul(x)
    } else {
        x * x.transpose()
    };
    let lambda_max = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0_f64, f64::max);
    Ok(lambda_max.sqrt())
}

/// Householder QR factorization of a tall matrix with a rank check, reusable
/// across right-hand sides.
#[derive(Debug, Clone)]
pub struct QrSolver {
    q: Matrix,
    r: Matrix,
}

impl QrSolver {
    pub fn new(b: &Matrix) -> Result<Self> {
        let (rows, cols) = b.shape();
        if cols > rows {
            return Err(Error::RankDeficient { column: rows });
        }
        let qr = b.clone().qr();
        let r = qr.r();
        let scale = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if let Some(column) = (0..cols).find(|&i| r[(i, i)].abs() <= RANK_TOLERANCE * scale) {
            return Err(Error::RankDeficient { column });
        }
        if cols > 0 && scale == 0.0 {
            return Err(Error::RankDeficient { column: 0 });
        }
        Ok(Self { q: qr.q(), r })
    }

    pub fn cols(&self) -> usize {
        self.r.ncols()
    }

    pub fn solve(&self, y: &Vector) -> Result<Vector> {
        if y.len() != self.q.nrows() {
            return Err(Error::DimensionMismatch {
                context: "least squares right-hand side",
                expected: self.q.nrows(),
                found: y.len(),
            });
        }
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .ok_or(Error::RankDeficient { column: 0 })
    }

    pub fn solve_many(&self, rhs: &Matrix) -> Result<Matrix> {
        if rhs.nrows() != self.q.nrows() {
            return Err(Error::DimensionMismatch {
                context: "least squares right-hand side",
                expected: self.q.nrows(),
                found: rhs.nrows(),
            });
        }
        let qty = self.q.tr_mul(rhs);
        self.r
            .solve_upper_triangular(&qty)
            .ok_or(Error::RankDeficient { column: 0 })
    }
}

/// `argmin_x ‖y − Bx‖₂` via QR. An empty `B` yields an empty solution.
pub fn least_squares(b: &Matrix, y: &Vector) -> Result<Vector> {
    if b.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "least squares",
            expected: b.nrows(),
            found: y.len(),
        });
    }
    if b.ncols() == 0 {
        return Ok(Vector::zeros(0));
    }
    QrSolver::new(b)?.solve(y)
}

/// Orthogonal projection of `y` onto the column space of `B`.
pub fn project_onto_range(b: &Matrix, y: &Vector) -> Result<Vector> {
    if b.ncols() == 0 {
        if b.nrows() != y.len() && b.nrows() != 0 {
            return Err(Error::DimensionMismatch {
                context: "projection",
                expected: b.nrows(),
                found: y.len(),
            });
        }
        return Ok(Vector::zeros(y.len()));
    }
    let coef = least_squares(b, y)?;
    Ok(b * coef)
}

/// Orthogonal projection of `y` onto the null space of `Bᵀ`.
pub fn project_onto_nullspace(b: &Matrix, y: &Vector) -> Result<Vector> {
    Ok(y - project_onto_range(b, y)?)
}

/// Fails on the first non-finite entry.
pub fn ensure_finite(m: &Matrix) -> Result<()> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            if !m[(row, col)].is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
    }
    Ok(())
}
