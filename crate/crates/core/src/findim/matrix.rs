//! Dense matrices over the Gaussian rationals with exact elimination:
//! multiplication, adjoints, linear solves, nullspaces, and an exact
//! positive-semidefiniteness decision via pivoted Schur complements.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::exactnum::GaussianRational;

/// Row-major dense matrix over `Q(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<GaussianRational>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![GaussianRational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, GaussianRational::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> GaussianRational) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &GaussianRational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: GaussianRational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[GaussianRational] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|e| e.is_zero())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn neg(&self) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.neg()).collect() }
    }

    pub fn scale(&self, c: &GaussianRational) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.mul(c)).collect(),
        }
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.get(i, j).add(&a.mul(b));
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn is_hermitian(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if self.get(i, j).conj() != *self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }

    /// Matrix trace (sum of diagonal entries).
    pub fn trace(&self) -> GaussianRational {
        let mut t = GaussianRational::zero();
        for i in 0..self.rows.min(self.cols) {
            t = t.add(self.get(i, i));
        }
        t
    }

    /// `sum_ij |a_ij|^2`, i.e. `Tr(a* a)` as an exact rational.
    pub fn entry_norm_sq(&self) -> BigRational {
        let mut s = BigRational::zero();
        for e in &self.data {
            s += e.modulus_sq();
        }
        s
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Solve `self * x = rhs` for square invertible `self`; `None` when
    /// singular. Exact Gaussian elimination with partial (first nonzero)
    /// pivoting.
    pub fn solve(&self, rhs: &Mat) -> Option<Mat> {
        assert!(self.is_square());
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a.get(r, col).is_zero())?;
            a.swap_rows(col, pivot);
            b.swap_rows(col, pivot);
            let inv = GaussianRational::one().div(a.get(col, col)).unwrap();
            for j in col..n {
                let v = a.get(col, j).mul(&inv);
                a.set(col, j, v);
            }
            for j in 0..m {
                let v = b.get(col, j).mul(&inv);
                b.set(col, j, v);
            }
            for r in 0..n {
                if r == col || a.get(r, col).is_zero() {
                    continue;
                }
                let factor = a.get(r, col).clone();
                for j in col..n {
                    let v = a.get(r, j).sub(&factor.mul(a.get(col, j)));
                    a.set(r, j, v);
                }
                for j in 0..m {
                    let v = b.get(r, j).sub(&factor.mul(b.get(col, j)));
                    b.set(r, j, v);
                }
            }
        }
        Some(b)
    }

    /// Basis of the right nullspace `{x : self * x = 0}` as column vectors.
    pub fn nullspace(&self) -> Vec<Vec<GaussianRational>> {
        let mut a = self.clone();
        let n = self.cols;
        let mut pivot_col_of_row = Vec::new();
        let mut row = 0usize;
        for col in 0..n {
            let pivot = (row..self.rows).find(|&r| !a.get(r, col).is_zero());
            let Some(p) = pivot else { continue };
            a.swap_rows(row, p);
            let inv = GaussianRational::one().div(a.get(row, col)).unwrap();
            for j in col..n {
                let v = a.get(row, j).mul(&inv);
                a.set(row, j, v);
            }
            for r in 0..self.rows {
                if r == row || a.get(r, col).is_zero() {
                    continue;
                }
                let factor = a.get(r, col).clone();
                for j in col..n {
                    let v = a.get(r, j).sub(&factor.mul(a.get(row, j)));
                    a.set(r, j, v);
                }
            }
            pivot_col_of_row.push(col);
            row += 1;
            if row == self.rows {
                break;
            }
        }
        let pivot_cols: std::collections::BTreeSet<usize> =
            pivot_col_of_row.iter().copied().collect();
        let mut basis = Vec::new();
        for free in 0..n {
            if pivot_cols.contains(&free) {
                continue;
            }
            let mut v = vec![GaussianRational::zero(); n];
            v[free] = GaussianRational::one();
            for (r, &pc) in pivot_col_of_row.iter().enumerate() {
                v[pc] = a.get(r, free).neg();
            }
            basis.push(v);
        }
        basis
    }

    /// Exact positive-semidefiniteness of a Hermitian matrix, by repeatedly
    /// pivoting on a positive diagonal entry and passing to the Schur
    /// complement. A Hermitian matrix with zero diagonal is psd iff it is
    /// zero.
    pub fn is_psd(&self) -> bool {
        debug_assert!(self.is_hermitian());
        let mut a = self.clone();
        loop {
            let n = a.rows;
            if n == 0 {
                return true;
            }
            let mut pivot = None;
            for i in 0..n {
                let d = a.get(i, i);
                debug_assert!(d.is_real());
                if d.re.is_negative() {
                    return false;
                }
                if pivot.is_none() && d.re.is_positive() {
                    pivot = Some(i);
                }
            }
            let Some(p) = pivot else {
                return a.is_zero();
            };
            let d = a.get(p, p).clone();
            let rest: Vec<usize> = (0..n).filter(|&i| i != p).collect();
            let mut next = Mat::zeros(n - 1, n - 1);
            for (bi, &i) in rest.iter().enumerate() {
                for (bj, &j) in rest.iter().enumerate() {
                    // a_ij - a_ip a_pj / d
                    let corr = a.get(i, p).mul(a.get(p, j)).div(&d).unwrap();
                    next.set(bi, bj, a.get(i, j).sub(&corr));
                }
            }
            a = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn g(n: i64, d: i64) -> GaussianRational {
        GaussianRational::from_ratio(n, d)
    }

    fn gi(re_n: i64, re_d: i64, im_n: i64, im_d: i64) -> GaussianRational {
        GaussianRational::new(
            BigRational::new(BigInt::from(re_n), BigInt::from(re_d)),
            BigRational::new(BigInt::from(im_n), BigInt::from(im_d)),
        )
    }

    #[test]
    fn mul_and_adjoint() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { g(1, 1) } else { gi(0, 1, 1, 1) });
        let b = a.mul(&a.adjoint());
        assert!(b.is_hermitian());
        // a = [[1, i], [i, 1]], a a* = [[2, 0], [0, 2]]
        assert_eq!(b, Mat::identity(2).scale(&g(2, 1)));
    }

    #[test]
    fn psd_examples() {
        assert!(Mat::identity(3).is_psd());
        assert!(!Mat::identity(3).neg().is_psd());
        let mut boundary = Mat::zeros(2, 2);
        boundary.set(0, 0, g(1, 1));
        assert!(boundary.is_psd()); // diag(1, 0)
        // zero diagonal with off-diagonal mass is not psd
        let mut off = Mat::zeros(2, 2);
        off.set(0, 1, g(1, 2));
        off.set(1, 0, g(1, 2));
        assert!(!off.is_psd());
        // rank-one |v><v| is psd
        let v = [g(1, 2), gi(1, 3, -2, 5)];
        let m = Mat::from_fn(2, 2, |i, j| v[i].mul(&v[j].conj()));
        assert!(m.is_psd());
        assert!(!m.neg().is_psd());
    }

    #[test]
    fn solve_roundtrip() {
        let a = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                g(2, 1)
            } else if i < j {
                gi(1, 3, 1, 7)
            } else {
                gi(1, 3, -1, 7)
            }
        });
        let x = Mat::from_fn(3, 1, |i, _| g(i as i64 + 1, 3));
        let b = a.mul(&x);
        let solved = a.solve(&b).unwrap();
        assert_eq!(solved, x);
        let singular = Mat::zeros(2, 2);
        assert!(singular.solve(&Mat::zeros(2, 1)).is_none());
    }

    #[test]
    fn nullspace_dimensions() {
        // x + y = 0 in 2 unknowns: one-dimensional nullspace
        let mut a = Mat::zeros(1, 2);
        a.set(0, 0, g(1, 1));
        a.set(0, 1, g(1, 1));
        let ns = a.nullspace();
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        assert_eq!(v[0].add(&v[1]), GaussianRational::zero());
        // full-rank square matrix has trivial nullspace
        assert!(Mat::identity(4).nullspace().is_empty());
        // zero map has full nullspace
        assert_eq!(Mat::zeros(3, 5).nullspace().len(), 5);
    }
}
