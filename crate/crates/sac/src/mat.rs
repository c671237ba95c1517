//! Dense row-major `f64` matrices, just enough for small MLPs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "{rows}x{cols} matrix needs {} values", rows * cols);
        Self { rows, cols, data }
    }

    pub fn row_vector(data: &[f64]) -> Self {
        Self::from_vec(1, data.len(), data.to_vec())
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_vec(1, 1, vec![value])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a {}x{} matrix", self.rows, self.cols);
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!(self.shape(), other.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `[self | other]` column-wise.
    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Mat { rows: self.rows, cols, data }
    }

    pub fn cols_range(&self, start: usize, end: usize) -> Mat {
        assert!(start <= end && end <= self.cols);
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Mat { rows: self.rows, cols, data }
    }

    /// Adds a `1 x cols` row to every row.
    pub fn add_row(&self, bias: &Mat) -> Mat {
        assert_eq!((bias.rows, bias.cols), (1, self.cols));
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.cols) {
            for (x, b) in row.iter_mut().zip(&bias.data) {
                *x += b;
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }
}

/// `C = op(A) op(B)` where `op` optionally transposes. Both operands are
/// row-major; transposition is expressed through strides.
pub fn gemm(a: &Mat, trans_a: bool, b: &Mat, trans_b: bool) -> Mat {
    let m = if trans_a { a.cols } else { a.rows };
    let n = if trans_b { b.rows } else { b.cols };
    let mut c = Mat::zeros(m, n);
    gemm_into(a, trans_a, b, trans_b, 0.0, &mut c);
    c
}

/// `C = op(A) op(B) + beta C`.
pub fn gemm_into(a: &Mat, trans_a: bool, b: &Mat, trans_b: bool, beta: f64, c: &mut Mat) {
    let (m, k) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "inner dimensions differ: {:?}{} x {:?}{}", a.shape(), trans_a, b.shape(), trans_b);
    assert_eq!(c.shape(), (m, n));
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if trans_b { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: dimensions and strides describe exactly the buffers above
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `x w + b` with the bias row broadcast over rows.
pub fn affine(x: &Mat, w: &Mat, b: &Mat) -> Mat {
    assert_eq!((b.rows, b.cols), (1, w.cols));
    let mut c = Mat { rows: x.rows, cols: w.cols, data: Vec::with_capacity(x.rows * w.cols) };
    for _ in 0..x.rows {
        c.data.extend_from_slice(&b.data);
    }
    gemm_into(x, false, w, false, 1.0, &mut c);
    c
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    gemm(a, false, b, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Mat, b: &Mat) -> Mat {
        let mut c = Mat::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                let mut s = 0.0;
                for k in 0..a.cols {
                    s += a.get(i, k) * b.get(k, j);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    fn seq(rows: usize, cols: usize, offset: f64) -> Mat {
        Mat::from_vec(rows, cols, (0..rows * cols).map(|i| (i as f64 * 0.37 + offset).sin()).collect())
    }

    #[test]
    fn gemm_matches_naive_for_all_transposes() {
        let a = seq(5, 3, 0.1);
        let b = seq(3, 4, 0.7);
        let expected = naive(&a, &b);
        let cases = [
            gemm(&a, false, &b, false),
            gemm(&a.transpose(), true, &b, false),
            gemm(&a, false, &b.transpose(), true),
            gemm(&a.transpose(), true, &b.transpose(), true),
        ];
        for c in cases {
            for (x, y) in c.data.iter().zip(&expected.data) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hcat_and_slice_are_inverse() {
        let a = seq(4, 2, 0.0);
        let b = seq(4, 3, 1.0);
        let ab = a.hcat(&b);
        assert_eq!(ab.cols_range(0, 2), a);
        assert_eq!(ab.cols_range(2, 5), b);
    }
}
