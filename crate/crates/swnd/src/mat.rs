//! Small dense complex matrices, generic over the scalar.
//!
//! Spinor ranks never exceed 32 (n <= 10 overall, 16 in practice), so a
//! row-major `Vec` with naive products is both fast enough and exact when
//! instantiated at [`GaussianRational`](crate::scalar::GaussianRational).
//! `nalgebra` is deliberately kept out of this layer; conversions for SVD
//! live in [`crate::symbol`].

use crate::scalar::Scalar;
use num_complex::Complex64;

#[derive(Clone, PartialEq, Debug)]
pub struct CMat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> CMat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for k in 0..n {
            m.set(k, k, S::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &S {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.mul(s)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(S::neg).collect(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch");
        let mut out: CMat<S> = CMat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let v = out.get(r, c).add(&a.mul(rhs.get(k, c)));
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn trace(&self) -> S {
        assert_eq!(self.rows, self.cols);
        let mut t = S::zero();
        for k in 0..self.rows {
            t = t.add(self.get(k, k));
        }
        t
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![S::zero(); self.rows];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let a = self.get(r, c);
                if !a.is_zero() {
                    out[r] = out[r].add(&a.mul(&v[c]));
                }
            }
        }
        out
    }

    /// Sub-block with the given row and column index lists.
    pub fn restrict(&self, row_idx: &[usize], col_idx: &[usize]) -> Self {
        CMat::from_fn(row_idx.len(), col_idx.len(), |r, c| {
            self.get(row_idx[r], col_idx[c]).clone()
        })
    }

    /// Kronecker product `self (x) rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let mut out = CMat::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                let a = self.get(r1, c1);
                if a.is_zero() {
                    continue;
                }
                for r2 in 0..rhs.rows {
                    for c2 in 0..rhs.cols {
                        out.set(
                            r1 * rhs.rows + r2,
                            c1 * rhs.cols + c2,
                            a.mul(rhs.get(r2, c2)),
                        );
                    }
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(S::is_zero)
    }

    /// Largest entry modulus after embedding into f64 complexes.
    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|a| a.to_c64().norm())
            .fold(0.0, f64::max)
    }

    /// Entrywise distance in the f64 embedding; usable across scalar types.
    pub fn distance(&self, rhs: &Self) -> f64 {
        self.sub(rhs).max_abs()
    }

    pub fn to_c64(&self) -> CMat<Complex64> {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(S::to_c64).collect(),
        }
    }

    /// Whether the matrix equals its own adjoint (exact test).
    pub fn is_hermitian(&self) -> bool {
        self.rows == self.cols && self.sub(&self.adjoint()).is_zero()
    }

    /// Whether the matrix equals minus its own adjoint (exact test).
    pub fn is_skew_hermitian(&self) -> bool {
        self.rows == self.cols && self.add(&self.adjoint()).is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::GaussianRational;

    type G = GaussianRational;

    fn sample() -> CMat<G> {
        CMat::from_fn(2, 2, |r, c| {
            G::from_parts((r + 2 * c) as i64, 1, (r as i64) - (c as i64), 3)
        })
    }

    #[test]
    fn product_and_adjoint_interact() {
        let a = sample();
        let b = a.adjoint();
        // (ab)^dagger = b^dagger a^dagger
        assert_eq!(a.mul(&b).adjoint(), b.adjoint().mul(&a.adjoint()));
        assert!(a.mul(&b).is_hermitian());
    }

    #[test]
    fn kron_mixed_product() {
        let a = sample();
        let b = CMat::<G>::identity(2);
        // (a (x) b)(b (x) a) = (ab) (x) (ba)
        assert_eq!(
            a.kron(&b).mul(&b.kron(&a)),
            a.mul(&b).kron(&b.mul(&a))
        );
    }

    #[test]
    fn restrict_picks_block() {
        let a = sample();
        let block = a.restrict(&[1], &[0, 1]);
        assert_eq!(block.rows(), 1);
        assert_eq!(block.get(0, 1), a.get(1, 1));
    }
}
