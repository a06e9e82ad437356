//! Dense matrices and vectors over a [`Field`].
//!
//! Everything in scope is small: formula determinants are at most
//! `(a+b+1) x (a+b+1)` and oracle operators are `3^L x 3^L` with `L <= 6`,
//! so a row-major `Vec` with Gaussian elimination is fast enough and keeps
//! exact arithmetic exact. Pivot selection uses the magnitude estimate from
//! [`Field::mag`], which doubles as partial pivoting in float mode and as a
//! non-zero test in exact mode.

use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<F> {
    nrows: usize,
    ncols: usize,
    data: Vec<F>,
}

impl<F: Field> Mat<F> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat {
            nrows,
            ncols,
            data: vec![F::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = F::one();
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                data.push(f(i, j));
            }
        }
        Mat { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn at(&self, i: usize, j: usize) -> &F {
        &self.data[i * self.ncols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut F {
        &mut self.data[i * self.ncols + j]
    }

    pub fn mul(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!(self.ncols, other.nrows, "matrix product shape");
        let mut out: Mat<F> = Mat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.ncols {
                    let b = other.at(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.at(i, j).clone();
                    *out.at_mut(i, j) = cur + a.clone() * b.clone();
                }
            }
        }
        out
    }

    /// `self * v` for a column vector.
    pub fn matvec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(self.ncols, v.len(), "matvec shape");
        let mut out = vec![F::zero(); self.nrows];
        for i in 0..self.nrows {
            let mut acc = F::zero();
            for j in 0..self.ncols {
                let a = self.at(i, j);
                if a.is_zero() || v[j].is_zero() {
                    continue;
                }
                acc = acc + a.clone() * v[j].clone();
            }
            out[i] = acc;
        }
        out
    }

    /// `r * self` for a row vector.
    pub fn vecmat(&self, r: &[F]) -> Vec<F> {
        assert_eq!(self.nrows, r.len(), "vecmat shape");
        let mut out = vec![F::zero(); self.ncols];
        for i in 0..self.nrows {
            if r[i].is_zero() {
                continue;
            }
            for j in 0..self.ncols {
                let a = self.at(i, j);
                if a.is_zero() {
                    continue;
                }
                out[j] = out[j].clone() + r[i].clone() * a.clone();
            }
        }
        out
    }

    pub fn kron(&self, other: &Mat<F>) -> Mat<F> {
        let mut out = Mat::zeros(self.nrows * other.nrows, self.ncols * other.ncols);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                let a = self.at(i, j);
                if a.is_zero() {
                    continue;
                }
                for k in 0..other.nrows {
                    for l in 0..other.ncols {
                        let b = other.at(k, l);
                        if b.is_zero() {
                            continue;
                        }
                        *out.at_mut(i * other.nrows + k, j * other.ncols + l) =
                            a.clone() * b.clone();
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a = a.clone() + b.clone();
        }
        out
    }

    pub fn sub(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a = a.clone() - b.clone();
        }
        out
    }

    pub fn scale(&self, s: &F) -> Mat<F> {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = a.clone() * s.clone();
        }
        out
    }

    /// Determinant by Gaussian elimination with magnitude pivoting.
    pub fn determinant(&self) -> F {
        assert_eq!(self.nrows, self.ncols, "determinant of a square matrix");
        let n = self.nrows;
        let mut m = self.clone();
        let mut det = F::one();
        for col in 0..n {
            let pivot = (col..n).max_by(|&a, &b| {
                m.at(a, col)
                    .mag()
                    .partial_cmp(&m.at(b, col).mag())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let pivot = match pivot {
                Some(p) if !m.at(p, col).is_zero() => p,
                _ => return F::zero(),
            };
            if pivot != col {
                for j in 0..n {
                    let t = m.at(pivot, j).clone();
                    *m.at_mut(pivot, j) = m.at(col, j).clone();
                    *m.at_mut(col, j) = t;
                }
                det = -det;
            }
            let p = m.at(col, col).clone();
            det = det * p.clone();
            for row in (col + 1)..n {
                if m.at(row, col).is_zero() {
                    continue;
                }
                let factor = m.at(row, col).clone() / p.clone();
                for j in col..n {
                    let v = m.at(row, j).clone() - factor.clone() * m.at(col, j).clone();
                    *m.at_mut(row, j) = v;
                }
            }
        }
        det
    }

    /// Inverse by Gauss-Jordan elimination; `None` when singular.
    pub fn inverse(&self) -> Option<Mat<F>> {
        assert_eq!(self.nrows, self.ncols, "inverse of a square matrix");
        let n = self.nrows;
        let mut m = self.clone();
        let mut inv: Mat<F> = Mat::identity(n);
        for col in 0..n {
            let pivot = (col..n).max_by(|&a, &b| {
                m.at(a, col)
                    .mag()
                    .partial_cmp(&m.at(b, col).mag())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if m.at(pivot, col).is_zero() {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    let t = m.at(pivot, j).clone();
                    *m.at_mut(pivot, j) = m.at(col, j).clone();
                    *m.at_mut(col, j) = t;
                    let t = inv.at(pivot, j).clone();
                    *inv.at_mut(pivot, j) = inv.at(col, j).clone();
                    *inv.at_mut(col, j) = t;
                }
            }
            let p = m.at(col, col).clone();
            for j in 0..n {
                *m.at_mut(col, j) = m.at(col, j).clone() / p.clone();
                *inv.at_mut(col, j) = inv.at(col, j).clone() / p.clone();
            }
            for row in 0..n {
                if row == col || m.at(row, col).is_zero() {
                    continue;
                }
                let factor = m.at(row, col).clone();
                for j in 0..n {
                    let v = m.at(row, j).clone() - factor.clone() * m.at(col, j).clone();
                    *m.at_mut(row, j) = v;
                    let v = inv.at(row, j).clone() - factor.clone() * inv.at(col, j).clone();
                    *inv.at_mut(row, j) = v;
                }
            }
        }
        Some(inv)
    }

    /// Solve `self * x = rhs`; `None` when singular.
    pub fn solve(&self, rhs: &[F]) -> Option<Vec<F>> {
        Some(self.inverse()?.matvec(rhs))
    }

    /// Largest entry magnitude of `self - other`.
    pub fn diff_mag(&self, other: &Mat<F>) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a.clone() - b.clone()).mag())
            .fold(0.0, f64::max)
    }

    pub fn max_mag(&self) -> f64 {
        self.data.iter().map(Field::mag).fold(0.0, f64::max)
    }

    /// Entrywise comparison through [`Field::eq_tol`].
    pub fn eq_tol(&self, other: &Mat<F>, tol: f64) -> bool {
        (self.nrows, self.ncols) == (other.nrows, other.ncols)
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| a.eq_tol(b, tol))
    }
}

/// Plain bilinear pairing `sum_i a_i b_i` (no conjugation).
pub fn vec_dot<F: Field>(a: &[F], b: &[F]) -> F {
    assert_eq!(a.len(), b.len(), "dot shape");
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        if x.is_zero() || y.is_zero() {
            continue;
        }
        acc = acc + x.clone() * y.clone();
    }
    acc
}

/// `dst += coeff * src`.
pub fn vec_axpy<F: Field>(dst: &mut [F], coeff: &F, src: &[F]) {
    assert_eq!(dst.len(), src.len(), "axpy shape");
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        if s.is_zero() {
            continue;
        }
        *d = d.clone() + coeff.clone() * s.clone();
    }
}

/// Largest entry magnitude of `a - b`.
pub fn vec_diff_mag<F: Field>(a: &[F], b: &[F]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x.clone() - y.clone()).mag())
        .fold(0.0, f64::max)
}

/// Euclidean-style magnitude `sqrt(sum |a_i|^2)`.
pub fn vec_mag<F: Field>(a: &[F]) -> f64 {
    a.iter().map(|x| x.mag().powi(2)).sum::<f64>().sqrt()
}

/// Error helper: wraps a singular inversion into a crate error.
pub fn invert_or<F: Field>(m: &Mat<F>, what: &str) -> Result<Mat<F>> {
    m.inverse()
        .ok_or_else(|| Error::SingularTransfer(format!("{what} is not invertible")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Field, Rat};
    use num::Zero;

    fn q(n: i64, d: i64) -> Rat {
        <Rat as Field>::from_ratio(n, d)
    }

    #[test]
    fn determinant_and_inverse_are_exact() {
        let m = Mat::from_fn(3, 3, |i, j| q((i * 3 + j) as i64 + 1, 1 + (i == j) as i64));
        let det = m.determinant();
        assert!(!det.is_zero());
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), Mat::identity(3));
        // det(M) * det(M^-1) = 1
        assert_eq!(det * inv.determinant(), q(1, 1));
    }

    #[test]
    fn singular_matrix_detected() {
        let m = Mat::from_fn(2, 2, |i, _| q(i as i64 + 1, 1));
        assert!(m.determinant().is_zero());
        assert!(m.inverse().is_none());
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = Mat::from_fn(2, 2, |i, j| q((2 * i + j) as i64, 1));
        let id = Mat::<Rat>::identity(3);
        let k = a.kron(&id);
        assert_eq!(k.nrows(), 6);
        assert_eq!(*k.at(4, 4), *a.at(1, 1));
        assert_eq!(*k.at(0, 3), *a.at(0, 1));
    }

    #[test]
    fn row_and_column_action_agree_with_mul() {
        let a = Mat::from_fn(2, 3, |i, j| q((i + 2 * j) as i64, 1));
        let v = [q(1, 1), q(2, 1), q(3, 1)];
        let r = [q(5, 1), q(7, 1)];
        assert_eq!(a.matvec(&v)[0], q(0 + 2 * 2 + 4 * 3, 1));
        assert_eq!(a.vecmat(&r)[2], q(4 * 5 + 5 * 7, 1));
    }
}
