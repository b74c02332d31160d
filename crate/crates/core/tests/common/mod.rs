//! Independent reference implementations for the integration tests. These
//! use plain loops over `Vec`s, normal equations and cyclic Jacobi
//! eigenvalues, so they share no numerical code with the library.

#![allow(dead_code, clippy::needless_range_loop)]

use bomp::{BlockDictionary, Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Matrix {
    Matrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> Vector {
    Vector::from_fn(m, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn unit_columns(mut a: Matrix) -> Matrix {
    for mut c in a.column_iter_mut() {
        let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= n);
    }
    a
}

pub fn random_dictionary(rng: &mut ChaCha8Rng, m: usize, n: usize, d: usize) -> BlockDictionary {
    BlockDictionary::new(unit_columns(gaussian_matrix(rng, m, n)), d).unwrap()
}

pub fn to_dense(a: &Matrix) -> Dense {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

pub fn column(a: &Matrix, j: usize) -> Vec<f64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm2(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut s: Dense) -> Vec<f64> {
    let n = s.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[i][j] * s[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| s[i][i] * s[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if s[p][q] == 0.0 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = c * skp - sn * skq;
                    s[k][q] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = c * spk - sn * sqk;
                    s[q][k] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..n).map(|i| s[i][i]).collect()
}

/// Cross Gram block `A_iᵀ A_j` by explicit loops.
pub fn cross_gram(a: &Matrix, d: usize, i: usize, j: usize) -> Dense {
    (0..d)
        .map(|p| {
            (0..d)
                .map(|q| dot(&column(a, i * d + p), &column(a, j * d + q)))
                .collect()
        })
        .collect()
}

pub fn spectral_norm_dense(c: &Dense) -> f64 {
    let rows = c.len();
    let cols = c[0].len();
    let ctc: Dense = (0..cols)
        .map(|p| {
            (0..cols)
                .map(|q| (0..rows).map(|k| c[k][p] * c[k][q]).sum())
                .collect()
        })
        .collect();
    jacobi_eigenvalues(ctc)
        .into_iter()
        .fold(0.0_f64, f64::max)
        .sqrt()
}

pub fn oracle_coherence(a: &Matrix) -> f64 {
    let n = a.ncols();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                best = best.max(dot(&column(a, i), &column(a, j)).abs());
            }
        }
    }
    best
}

pub fn oracle_block_coherence(a: &Matrix, d: usize) -> f64 {
    let l = a.ncols() / d;
    let mut best = 0.0_f64;
    for i in 0..l {
        for j in 0..l {
            if i != j {
                best = best.max(spectral_norm_dense(&cross_gram(a, d, i, j)) / d as f64);
            }
        }
    }
    best
}

pub fn oracle_sub_coherence(a: &Matrix, d: usize) -> f64 {
    let mut best = 0.0_f64;
    for l in 0..a.ncols() / d {
        for p in 0..d {
            for q in 0..d {
                if p != q {
                    let v = dot(&column(a, l * d + p), &column(a, l * d + q)).abs();
                    best = best.max(v);
                }
            }
        }
    }
    best
}

/// Smallest eigenvalue of every block Gram matrix.
pub fn oracle_block_gram_minima(a: &Matrix, d: usize) -> Vec<f64> {
    (0..a.ncols() / d)
        .map(|l| {
            jacobi_eigenvalues(cross_gram(a, d, l, l))
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut g: Dense, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| g[x][col].abs().partial_cmp(&g[y][col].abs()).unwrap())
            .unwrap();
        g.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = g[r][col] / g[col][col];
            for c in col..n {
                g[r][c] -= f * g[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| g[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / g[r][r];
    }
    x
}

/// Least squares through the normal equations `BᵀB x = Bᵀy`.
pub fn oracle_least_squares(b: &Matrix, y: &Vector) -> Vec<f64> {
    let cols: Vec<Vec<f64>> = (0..b.ncols()).map(|j| column(b, j)).collect();
    let g: Dense = cols
        .iter()
        .map(|u| cols.iter().map(|v| dot(u, v)).collect())
        .collect();
    let rhs: Vec<f64> = cols.iter().map(|u| dot(u, y.as_slice())).collect();
    gauss_solve(g, rhs)
}

/// The pair of blocks whose span leaves the smallest least-squares residual,
/// searched over every pair.
pub fn exhaustive_best_pair(a: &Matrix, d: usize, y: &Vector) -> (usize, usize) {
    let l = a.ncols() / d;
    let cols: Vec<Vec<f64>> = (0..a.ncols()).map(|j| column(a, j)).collect();
    let corr: Vec<f64> = cols.iter().map(|c| dot(c, y.as_slice())).collect();
    let yy = dot(y.as_slice(), y.as_slice());
    let gram: Dense = cols
        .iter()
        .map(|u| cols.iter().map(|v| dot(u, v)).collect())
        .collect();
    let mut best = (f64::INFINITY, (0, 0));
    for i in 0..l {
        for j in i + 1..l {
            let idx: Vec<usize> = (i * d..i * d + d).chain(j * d..j * d + d).collect();
            let g: Dense = idx
                .iter()
                .map(|&p| idx.iter().map(|&q| gram[p][q]).collect())
                .collect();
            let rhs: Vec<f64> = idx.iter().map(|&p| corr[p]).collect();
            let coef = gauss_solve(g, rhs.clone());
            let residual = yy - dot(&coef, &rhs);
            if residual < best.0 {
                best = (residual, (i, j));
            }
        }
    }
    best.1
}

fn block_corr_norm(a: &Matrix, d: usize, l: usize, r: &[f64]) -> f64 {
    let v: Vec<f64> = (0..d).map(|p| dot(&column(a, l * d + p), r)).collect();
    norm2(&v)
}

/// `max_{l∉I1} ‖A_lᵀ r‖ / max_{l∈I1} ‖A_lᵀ r‖` by two separate loops.
pub fn oracle_selection_ratio(a: &Matrix, d: usize, support: &[usize], r: &[f64]) -> f64 {
    let mut on = 0.0_f64;
    for &l in support {
        on = on.max(block_corr_norm(a, d, l, r));
    }
    let mut off = 0.0_f64;
    for l in 0..a.ncols() / d {
        if !support.contains(&l) {
            off = off.max(block_corr_norm(a, d, l, r));
        }
    }
    off / on
}

/// `max_l ‖A_lᵀ v‖₂` over every block.
pub fn oracle_max_block_corr(a: &Matrix, d: usize, v: &[f64]) -> f64 {
    (0..a.ncols() / d)
        .map(|l| block_corr_norm(a, d, l, v))
        .fold(0.0, f64::max)
}

/// A random block-sparse problem `y = A x + w` drawn from `rng`.
pub struct Problem {
    pub dict: BlockDictionary,
    pub signal: bomp::BlockSparseSignal,
    pub noise: Vector,
    pub y: Vector,
}

/// Unit-norm Gaussian dictionary (optionally with orthonormalized blocks),
/// uniformly random support of `k` blocks with standard normal entries and
/// `N(0, σ²)` noise.
pub fn random_problem(
    rng: &mut ChaCha8Rng,
    m: usize,
    l: usize,
    d: usize,
    k: usize,
    sigma: f64,
    orthonormal: bool,
) -> Problem {
    let mut dict = random_dictionary(rng, m, l * d, d);
    if orthonormal {
        dict = bomp::coherence::orthogonalize_blocks(&dict).unwrap().0;
    }
    let mut blocks: Vec<usize> = (0..l).collect();
    for i in 0..k {
        let j = rng.random_range(i..l);
        blocks.swap(i, j);
    }
    let mut x = Vector::zeros(l * d);
    for &b in &blocks[..k] {
        for p in 0..d {
            x[b * d + p] = rng.sample(StandardNormal);
        }
    }
    let signal = bomp::BlockSparseSignal::new(x, d).unwrap();
    let noise = gaussian_vector(rng, m, sigma);
    let y = dict.matrix() * signal.x() + &noise;
    Problem {
        dict,
        signal,
        noise,
        y,
    }
}
