//! Dense linear algebra kernels used by the fitting code.
//!
//! Matrices are small (at most a few thousand rows by about a thousand
//! columns), so everything here is plain `Vec<f64>` arithmetic.

use crate::error::{PceError, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(PceError::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(PceError::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(PceError::Shape(format!(
                    "column {j} has {} entries, expected {rows}",
                    c.len()
                )));
            }
            for (i, &v) in c.iter().enumerate() {
                m.data[i * cols + j] = v;
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn map_column(&mut self, j: usize, f: impl Fn(f64) -> f64) {
        for i in 0..self.rows {
            let v = self.get(i, j);
            self.set(i, j, f(v));
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent accumulators let the compiler vectorize the loop.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Relative pivot size below which a least-squares column is declared dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares solution of `columns * x ≈ rhs` via Householder QR.
///
/// Fails with [`PceError::Conditioning`] naming the first column whose
/// remaining norm after elimination drops below `RANK_TOLERANCE` times its
/// original norm.
pub fn least_squares(columns: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let q = columns.len();
    let m = rhs.len();
    if columns.iter().any(|c| c.len() != m) {
        return Err(PceError::Shape(
            "design columns and response differ in length".into(),
        ));
    }
    if q > m {
        return Err(PceError::Conditioning { column: m });
    }
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut b = rhs.to_vec();
    let original: Vec<f64> = a.iter().map(|c| norm2(c)).collect();
    let mut diag = vec![0.0; q];

    for k in 0..q {
        let alpha = {
            let col = &a[k][k..];
            let s = norm2(col);
            if col[0] > 0.0 {
                -s
            } else {
                s
            }
        };
        if alpha.abs() <= RANK_TOLERANCE * original[k] || alpha == 0.0 {
            return Err(PceError::Conditioning { column: k });
        }
        // Householder vector v = x - alpha e1, stored in place of column k.
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        diag[k] = alpha;
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k + 1) {
                let tail = &mut col[k..];
                let f = 2.0 * dot(&v, tail) / vnorm2;
                axpy(-f, &v, tail);
            }
            let tail = &mut b[k..];
            let f = 2.0 * dot(&v, tail) / vnorm2;
            axpy(-f, &v, tail);
        }
    }

    let mut x = vec![0.0; q];
    for k in (0..q).rev() {
        let mut s = b[k];
        for j in k + 1..q {
            s -= a[j][k] * x[j];
        }
        x[k] = s / diag[k];
    }
    Ok(x)
}

/// Lower-triangular factor of a symmetric positive semi-definite matrix.
///
/// Zero pivots (within a relative tolerance) are allowed and produce a
/// zero column; negative pivots mean the matrix is not PSD.
pub fn cholesky_psd(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(PceError::Shape("covariance must be square".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (a.get(i, j), a.get(j, i));
            if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                return Err(PceError::Shape(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d < -tol {
            return Err(PceError::Covariance { pivot: j });
        }
        if d <= tol {
            // Semi-definite direction: the remaining column must vanish too.
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                if s.abs() > 1e-8 * scale.max(1.0) {
                    return Err(PceError::Covariance { pivot: j });
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Thin QR factorization grown one column at a time.
///
/// Uses classical Gram-Schmidt with one reorthogonalization pass, which keeps
/// `Q` orthonormal to working precision. Used to refit every prefix of a
/// regression path without refactoring from scratch.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    qt_rhs: Vec<f64>,
    rhs: Vec<f64>,
}

impl IncrementalQr {
    pub fn new(rhs: &[f64]) -> Self {
        Self {
            q: Vec::new(),
            r: Vec::new(),
            qt_rhs: Vec::new(),
            rhs: rhs.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Appends a column. Returns `false` (and leaves the factorization
    /// unchanged) when the column is dependent on the existing ones.
    pub fn push(&mut self, column: &[f64]) -> bool {
        let original = norm2(column);
        let mut v = column.to_vec();
        let mut coeffs = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let c = dot(qk, &v);
                coeffs[k] += c;
                axpy(-c, qk, &mut v);
            }
        }
        let rkk = norm2(&v);
        if original == 0.0 || rkk <= RANK_TOLERANCE * original {
            return false;
        }
        for x in v.iter_mut() {
            *x /= rkk;
        }
        coeffs.push(rkk);
        self.qt_rhs.push(dot(&v, &self.rhs));
        self.q.push(v);
        self.r.push(coeffs);
        true
    }

    /// Least-squares coefficients for the first `k` columns.
    pub fn solve_prefix(&self, k: usize) -> Vec<f64> {
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = self.qt_rhs[i];
            for j in i + 1..k {
                s -= self.r[j][i] * x[j];
            }
            x[i] = s / self.r[i][i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn least_squares_recovers_exact_solution() {
        let cols = vec![vec![1.0, 1.0, 1.0, 1.0], vec![0.0, 1.0, 2.0, 3.0]];
        let y: Vec<f64> = (0..4).map(|i| 2.0 + 0.5 * i as f64).collect();
        let x = least_squares(&cols, &y).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_reports_dependent_column() {
        let cols = vec![
            vec![1.0, 2.0, 3.0],
            vec![1.0, 1.0, 1.0],
            vec![2.0, 4.0, 6.0],
        ];
        match least_squares(&cols, &[1.0, 2.0, 3.0]) {
            Err(PceError::Conditioning { column }) => assert_eq!(column, 2),
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn least_squares_matches_normal_equations_on_overdetermined_system() {
        let cols = vec![vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 4.0]];
        let y = [1.0, 2.0, 2.0];
        let x = least_squares(&cols, &y).unwrap();
        // Normal equations by hand: [[3,7],[7,21]] x = [5,13].
        let det = 3.0 * 21.0 - 49.0;
        assert_abs_diff_eq!(x[0], (21.0 * 5.0 - 7.0 * 13.0) / det, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], (3.0 * 13.0 - 7.0 * 5.0) / det, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(matches!(
            cholesky_psd(&a),
            Err(PceError::Covariance { pivot: 1 })
        ));
    }

    #[test]
    fn cholesky_accepts_singular_psd() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let l = cholesky_psd(&a).unwrap();
        assert_abs_diff_eq!(l.get(1, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.get(1, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn incremental_qr_prefixes_match_batch() {
        let cols = vec![
            vec![1.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![0.0, 1.0, 4.0, 9.0, 16.0],
        ];
        let y = [1.0, 0.0, 2.0, 5.0, 3.0];
        let mut qr = IncrementalQr::new(&y);
        for c in &cols {
            assert!(qr.push(c));
        }
        for k in 1..=3 {
            let batch = least_squares(&cols[..k], &y).unwrap();
            let inc = qr.solve_prefix(k);
            for (a, b) in batch.iter().zip(&inc) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
        assert!(!qr.push(&[2.0, 2.0, 2.0, 2.0, 2.0]));
        assert_eq!(qr.len(), 3);
    }
}
