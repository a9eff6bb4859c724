//! Dense complex matrices, vector helpers, and the operator interface shared
//! by the sampling and solver modules.

use num_complex::Complex64;

/// Anything that can act as a measurement operator: a forward apply and an
/// adjoint apply. The solver only touches operators through this trait, so a
/// matrix-free implementation can be swapped in without changing it.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `out = A x`; `x.len() == cols()`, `out.len() == rows()`.
    fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]);
    /// `out = A^* y`; `y.len() == rows()`, `out.len() == cols()`.
    fn adjoint_apply_into(&self, y: &[Complex64], out: &mut [Complex64]);

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; self.rows()];
        self.apply_into(x, &mut out);
        out
    }

    fn adjoint_apply(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; self.cols()];
        self.adjoint_apply_into(y, &mut out);
        out
    }
}

/// Dense row-major complex matrix. Sized for desk-scale experiments
/// (N up to a few thousand), not for BLAS-grade workloads.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::ONE);
        }
        m
    }

    /// Builds from row slices; every row must have the same length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    /// `A^* A`, a cols x cols Hermitian matrix.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = DenseMatrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ci = row[i].conj();
                for j in 0..n {
                    let v = g.get(i, j) + ci * row[j];
                    g.set(i, j, v);
                }
            }
        }
        g
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max-abs distance to the identity; the matrix must be square.
    pub fn residual_from_identity(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
                worst = worst.max((self.get(i, j) - target).norm());
            }
        }
        worst
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = Complex64::ZERO;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    fn adjoint_apply_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(y.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        out.fill(Complex64::ZERO);
        for (i, yi) in y.iter().enumerate() {
            let row = self.row(i);
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * yi;
            }
        }
    }
}

// ---- vector helpers ----

/// Conjugate-linear inner product `<x, y> = sum conj(x_j) y_j`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm1(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).sum()
}

pub fn norm_inf(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Solves `A v = b` for square complex `A` by Gaussian elimination with
/// partial pivoting. Returns `None` when the pivot collapses (singular to
/// working precision). Intended for the tiny systems the l0 oracle builds.
pub fn solve_dense(a: &DenseMatrix, b: &[Complex64]) -> Option<Vec<Complex64>> {
    assert_eq!(a.rows(), a.cols());
    assert_eq!(b.len(), a.rows());
    let n = a.rows();
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (pivot, mag) = (col..n)
            .map(|r| (r, m.get(r, col).norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if mag < 1e-14 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m.get(col, j);
                m.set(col, j, m.get(pivot, j));
                m.set(pivot, j, tmp);
            }
            rhs.swap(col, pivot);
        }
        let d = m.get(col, col);
        for r in col + 1..n {
            let f = m.get(r, col) / d;
            if f == Complex64::ZERO {
                continue;
            }
            for j in col..n {
                let v = m.get(r, j) - f * m.get(col, j);
                m.set(r, j, v);
            }
            let scaled = f * rhs[col];
            rhs[r] -= scaled;
        }
    }
    let mut v = vec![Complex64::ZERO; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for j in col + 1..n {
            acc -= m.get(col, j) * v[j];
        }
        v[col] = acc / m.get(col, col);
    }
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn apply_and_adjoint_are_consistent() {
        // <A x, y> == <x, A^* y> for a fixed small matrix.
        let a = DenseMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.0)],
            vec![c(0.5, 0.0), c(2.0, 2.0), c(-1.0, 1.0)],
        ]);
        let x = vec![c(1.0, -1.0), c(2.0, 0.5), c(0.0, 3.0)];
        let y = vec![c(-1.0, 0.25), c(0.5, 2.0)];
        let lhs = inner(&a.apply(&x), &y);
        let rhs = inner(&x, &a.adjoint_apply(&y));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn gram_of_identity_is_identity() {
        let a = DenseMatrix::identity(4);
        assert!(a.gram().residual_from_identity() < 1e-15);
    }

    #[test]
    fn solve_dense_recovers_known_solution() {
        let a = DenseMatrix::from_rows(&[
            vec![c(2.0, 1.0), c(1.0, 0.0)],
            vec![c(0.0, 1.0), c(3.0, -1.0)],
        ]);
        let truth = vec![c(1.0, -2.0), c(0.5, 0.5)];
        let b = a.apply(&truth);
        let got = solve_dense(&a, &b).unwrap();
        for (g, t) in got.iter().zip(&truth) {
            assert!((g - t).norm() < 1e-12);
        }
    }

    #[test]
    fn solve_dense_rejects_singular() {
        let a = DenseMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ]);
        assert!(solve_dense(&a, &[c(1.0, 0.0), c(2.0, 0.0)]).is_none());
    }
}
