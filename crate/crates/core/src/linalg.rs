//! Dense linear algebra: LU with partial pivoting, Cholesky, Householder QR
//! and the exact infinity norm of an inverse.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {index} has magnitude {magnitude:e})")]
    Singular { index: usize, magnitude: f64 },
    #[error("matrix is not positive definite (pivot {index} = {value:e})")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("matrix is rank deficient at column {column} (|R_kk| = {magnitude:e})")]
    RankDeficient { column: usize, magnitude: f64 },
    #[error("dimension mismatch: {0}")]
    Shape(&'static str),
    #[error("matrix of order {0} exceeds the inverse-norm size limit")]
    TooLarge(usize),
}

/// Relative thresholds used to declare a factorization degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// LU: `|pivot| < lu_pivot · ‖A‖_∞` is singular.
    pub lu_pivot: f64,
    /// Cholesky: `pivot < cholesky_pivot · max_i A_ii` is not positive definite.
    pub cholesky_pivot: f64,
    /// QR: `|R_kk| < qr_rank · max_k |R_kk|` is rank deficient.
    pub qr_rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lu_pivot: 1e-14,
            cholesky_pivot: 1e-13,
            qr_rank: 1e-12,
        }
    }
}

/// Largest order accepted by [`inf_norm_inverse`].
pub const INVERSE_NORM_MAX_ORDER: usize = 4000;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows * cols != data.len() {
            return Err(LinalgError::Shape("entry count differs from rows * cols"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Shape("ragged rows"));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other[(k, c)];
                }
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

pub fn vec_norm_inf(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `PA = LU` with partial pivoting, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        Self::factor_with(a, &Tolerances::default())
    }

    pub fn factor_with(a: &DenseMatrix, tol: &Tolerances) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Shape("LU needs a square matrix"));
        }
        let n = a.rows;
        let threshold = tol.lu_pivot * a.norm_inf();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, magnitude) = (k..n)
                .map(|r| (r, lu[(r, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(magnitude >= threshold) || magnitude == 0.0 {
                return Err(LinalgError::Singular { index: k, magnitude });
            }
            if p != k {
                perm.swap(p, k);
                for c in 0..n {
                    lu.data.swap(p * n + c, k * n + c);
                }
            }
            let pivot = lu[(k, k)];
            let (upper, lower) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            for row in lower.chunks_exact_mut(n) {
                let factor = row[k] / pivot;
                row[k] = factor;
                if factor != 0.0 {
                    for c in k + 1..n {
                        row[c] -= factor * pivot_row[c];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn order(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.order();
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let row = self.lu.row(r);
            let s: f64 = row[..r].iter().zip(&x[..r]).map(|(l, v)| l * v).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let row = self.lu.row(r);
            let s: f64 = row[r + 1..].iter().zip(&x[r + 1..]).map(|(u, v)| u * v).sum();
            x[r] = (x[r] - s) / row[r];
        }
        x
    }

    /// Smallest pivot magnitude; a cheap lower bound proxy for conditioning.
    pub fn min_pivot(&self) -> f64 {
        (0..self.order())
            .map(|i| self.lu[(i, i)].abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact `‖A⁻¹‖_∞` from the factorization: solves `A X = I` column by
    /// column and accumulates absolute row sums.
    pub fn inverse_norm_inf(&self) -> f64 {
        let n = self.order();
        let mut row_sums = vec![0.0; n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            let col = self.solve(&e);
            e[c] = 0.0;
            for (s, v) in row_sums.iter_mut().zip(&col) {
                *s += v.abs();
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }
}

pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::Shape("right-hand side length differs from matrix order"));
    }
    Ok(Lu::factor(a)?.solve(b))
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`. Only the lower triangle of
/// `a` is read.
pub fn cholesky_factor(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    cholesky_factor_with(a, &Tolerances::default())
}

pub fn cholesky_factor_with(a: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Shape("Cholesky needs a square matrix"));
    }
    let n = a.rows;
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let threshold = tol.cholesky_pivot * max_diag;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) || d <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { index: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky_factor`].
pub fn cholesky_substitute(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = b.to_vec();
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (y[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * y[k]).sum();
        y[i] = (y[i] - s) / l[(i, i)];
    }
    y
}

pub fn cholesky_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::Shape("right-hand side length differs from matrix order"));
    }
    let l = cholesky_factor(a)?;
    Ok(cholesky_substitute(&l, b))
}

/// Exact `‖A⁻¹‖_∞` via `n` LU solves against unit vectors.
pub fn inf_norm_inverse(a: &DenseMatrix) -> Result<f64, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Shape("inverse norm needs a square matrix"));
    }
    if a.rows > INVERSE_NORM_MAX_ORDER {
        return Err(LinalgError::TooLarge(a.rows));
    }
    Ok(Lu::factor(a)?.inverse_norm_inf())
}

/// Least squares `min ‖Ax − b‖₂` for `M ≥ n` by Householder QR.
pub fn qr_lstsq(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    qr_lstsq_with(a, b, &Tolerances::default())
}

pub fn qr_lstsq_with(a: &DenseMatrix, b: &[f64], tol: &Tolerances) -> Result<Vec<f64>, LinalgError> {
    let (m, n) = (a.rows, a.cols);
    if m < n {
        return Err(LinalgError::Shape("least squares needs at least as many rows as columns"));
    }
    if b.len() != m {
        return Err(LinalgError::Shape("right-hand side length differs from row count"));
    }
    // work column-major so each reflector touches contiguous memory
    let mut cols: Vec<Vec<f64>> = (0..n).map(|c| (0..m).map(|r| a[(r, c)]).collect()).collect();
    let mut rhs = b.to_vec();
    let mut diag = vec![0.0; n];
    for k in 0..n {
        let norm = cols[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let apply = |x: &mut [f64]| {
            let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (xi, vi) in x.iter_mut().zip(&v) {
                *xi -= f * vi;
            }
        };
        for col in cols.iter_mut().skip(k + 1) {
            apply(&mut col[k..]);
        }
        apply(&mut rhs[k..]);
    }
    let rmax = diag.iter().map(|d| d.abs()).fold(0.0, f64::max);
    for (k, d) in diag.iter().enumerate() {
        if !(d.abs() >= tol.qr_rank * rmax) || rmax == 0.0 {
            return Err(LinalgError::RankDeficient {
                column: k,
                magnitude: d.abs(),
            });
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| cols[c][k] * x[c]).sum();
        x[k] = (rhs[k] - s) / diag[k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn lu_examples() {
        assert_eq!(lu_solve(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(lu_solve(&m(&[&[2.0, 0.0], &[0.0, 4.0]]), &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
        match lu_solve(&m(&[&[1.0, 1.0], &[1.0, 1.0]]), &[1.0, 2.0]) {
            Err(LinalgError::Singular { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky_solve(&m(&[&[4.0]]), &[2.0]).unwrap(), vec![0.5]);
        let x = cholesky_solve(&m(&[&[2.0, 1.0], &[1.0, 2.0]]), &[3.0, 3.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
        assert!(matches!(
            cholesky_solve(&m(&[&[1.0, 1.0], &[1.0, 1.0]]), &[1.0, 1.0]),
            Err(LinalgError::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn inverse_norm_examples() {
        assert_eq!(inf_norm_inverse(&DenseMatrix::identity(3)).unwrap(), 1.0);
        assert_eq!(inf_norm_inverse(&m(&[&[2.0, 0.0], &[0.0, 2.0]])).unwrap(), 0.5);
        assert_eq!(inf_norm_inverse(&m(&[&[2.0, 1.0], &[0.0, 2.0]])).unwrap(), 0.75);
        assert!(inf_norm_inverse(&m(&[&[1.0, 1.0], &[1.0, 1.0]])).is_err());
    }

    #[test]
    fn qr_examples() {
        let x = qr_lstsq(&m(&[&[1.0], &[1.0]]), &[1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-15);
        let x = qr_lstsq(&DenseMatrix::identity(3), &[4.0, 5.0, 6.0]).unwrap();
        for (a, b) in x.iter().zip([4.0, 5.0, 6.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let x = qr_lstsq(&m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]), &[1.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
        assert!(matches!(
            qr_lstsq(&m(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]), &[1.0, 1.0, 1.0]),
            Err(LinalgError::RankDeficient { column: 1, .. })
        ));
    }

    #[test]
    fn qr_minimizes_residual() {
        // normal-equation residual Aᵀ(Ax − b) vanishes at the minimizer
        let a = m(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0], &[1.0, 3.0]]);
        let b = [1.0, 2.0, 2.0, 5.0];
        let x = qr_lstsq(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        let g = a.transpose().matvec(&r);
        assert!(vec_norm_inf(&g) < 1e-13);
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let b = DenseMatrix::from_row_major(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let mut a = b.transpose().matmul(&b);
        for i in 0..n {
            a[(i, i)] += n as f64 * 0.1;
        }
        a
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lu_and_cholesky_agree_on_spd(n in 1usize..=50, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x1 = lu_solve(&a, &b).unwrap();
            let x2 = cholesky_solve(&a, &b).unwrap();
            let scale = vec_norm_inf(&x1).max(1e-300);
            let diff = x1.iter().zip(&x2).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(diff <= 1e-10 * scale);
            // backward error bound
            let r: Vec<f64> = a.matvec(&x1).iter().zip(&b).map(|(p, q)| p - q).collect();
            prop_assert!(vec_norm_inf(&r) <= 1e-10 * (a.norm_inf() * vec_norm_inf(&x1) + vec_norm_inf(&b)));
        }

        #[test]
        fn condition_number_at_least_one(n in 1usize..=20, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DenseMatrix::from_row_major(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            if let Ok(inv) = inf_norm_inverse(&a) {
                prop_assert!(inv * a.norm_inf() >= 1.0 - 1e-12);
            }
        }

        #[test]
        fn square_qr_matches_lu(n in 1usize..=30, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x1 = lu_solve(&a, &b).unwrap();
            let x2 = qr_lstsq(&a, &b).unwrap();
            let diff = x1.iter().zip(&x2).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(diff <= 1e-10 * vec_norm_inf(&x1).max(1e-300));
        }
    }
}
