//! Scalar abstraction shared by the exact and floating-point paths.
//!
//! The algebraic layer (Clifford products, form actions, operator tables) is
//! generic over [`Scalar`] so that every identity that holds exactly can be
//! tested in [`GaussianRational`] arithmetic, while the analytic layer runs
//! on `Complex64`.

use num_complex::Complex64;
use num_rational::Ratio;
use std::fmt;

/// Complex scalars with ring operations, conjugation and an embedding into
/// `Complex64` for mixed comparisons.
pub trait Scalar: Clone + PartialEq + fmt::Debug + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    /// The imaginary unit.
    fn i() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Exact fraction `num/den`; `den` must be nonzero.
    fn from_ratio(num: i64, den: i64) -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Complex conjugate.
    fn conj(&self) -> Self;
    /// Multiplicative inverse; panics on zero.
    fn recip(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_c64(&self) -> Complex64;
    /// `i^k` for `k >= 0`.
    fn i_pow(k: usize) -> Self {
        match k % 4 {
            0 => Self::one(),
            1 => Self::i(),
            2 => Self::one().neg(),
            _ => Self::i().neg(),
        }
    }
    fn scale_i64(&self, v: i64) -> Self {
        self.mul(&Self::from_i64(v))
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn i() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Complex64::new(num as f64 / den as f64, 0.0)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn recip(&self) -> Self {
        assert!(self.norm_sqr() != 0.0, "inverse of zero");
        1.0 / self
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
}

/// Exact element of `Q(i)`: real and imaginary parts are rationals over i64.
///
/// Clifford generators have entries in {0, +-1, +-i}, so every identity in
/// the representation layer can be decided exactly here. Arithmetic panics on
/// i64 overflow, which the small exponents in this crate never reach.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GaussianRational {
    pub re: Ratio<i64>,
    pub im: Ratio<i64>,
}

impl GaussianRational {
    pub fn new(re: Ratio<i64>, im: Ratio<i64>) -> Self {
        GaussianRational { re, im }
    }
    pub fn from_parts(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        GaussianRational {
            re: Ratio::new(re_num, re_den),
            im: Ratio::new(im_num, im_den),
        }
    }
    /// Squared modulus as an exact rational.
    pub fn norm_sqr(&self) -> Ratio<i64> {
        self.re * self.re + self.im * self.im
    }
}

impl fmt::Debug for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}i", self.re, self.im)
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl Scalar for GaussianRational {
    fn zero() -> Self {
        GaussianRational::from_parts(0, 1, 0, 1)
    }
    fn one() -> Self {
        GaussianRational::from_parts(1, 1, 0, 1)
    }
    fn i() -> Self {
        GaussianRational::from_parts(0, 1, 1, 1)
    }
    fn from_i64(v: i64) -> Self {
        GaussianRational::from_parts(v, 1, 0, 1)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        GaussianRational::from_parts(num, den, 0, 1)
    }
    fn add(&self, rhs: &Self) -> Self {
        GaussianRational::new(self.re + rhs.re, self.im + rhs.im)
    }
    fn sub(&self, rhs: &Self) -> Self {
        GaussianRational::new(self.re - rhs.re, self.im - rhs.im)
    }
    fn mul(&self, rhs: &Self) -> Self {
        GaussianRational::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
    fn neg(&self) -> Self {
        GaussianRational::new(-self.re, -self.im)
    }
    fn conj(&self) -> Self {
        GaussianRational::new(self.re, -self.im)
    }
    fn recip(&self) -> Self {
        let n = self.norm_sqr();
        assert!(n != Ratio::new(0, 1), "inverse of zero");
        GaussianRational::new(self.re / n, -self.im / n)
    }
    fn is_zero(&self) -> bool {
        self.re == Ratio::new(0, 1) && self.im == Ratio::new(0, 1)
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(
            *self.re.numer() as f64 / *self.re.denom() as f64,
            *self.im.numer() as f64 / *self.im.denom() as f64,
        )
    }
}

/// `s_k`: 1 for k = 0, 3 (mod 4), i for k = 1, 2 (mod 4).
///
/// This is the unique unit phase (up to sign convention) making
/// `s_k c(gamma)` self-adjoint for real degree-k forms gamma, given that
/// `c(gamma)` is self-adjoint for k = 0, 3 (mod 4) and skew-adjoint
/// otherwise.
pub fn s_k<S: Scalar>(k: usize) -> S {
    match k % 4 {
        0 | 3 => S::one(),
        _ => S::i(),
    }
}

/// Sign of `c(gamma)^dagger = eps_d c(gamma)` for real degree-d forms:
/// `eps_d = (-1)^{d(d+1)/2}`.
pub fn adjoint_sign(d: usize) -> i64 {
    if (d * (d + 1) / 2) % 2 == 0 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_rational_field_ops() {
        let a = GaussianRational::from_parts(3, 4, -2, 5);
        let b = GaussianRational::from_parts(1, 2, 7, 3);
        let float = a.to_c64() * b.to_c64();
        assert!((a.mul(&b).to_c64() - float).norm() < 1e-15);
        assert_eq!(a.mul(&a.recip()), GaussianRational::one());
        assert_eq!(a.conj().conj(), a);
        assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn s_k_period_and_values() {
        let i = GaussianRational::i();
        let one = GaussianRational::one();
        for (k, want) in [(0, one), (1, i), (2, i), (3, one), (4, one), (5, i)] {
            assert_eq!(s_k::<GaussianRational>(k), want, "s_{k}");
        }
    }

    #[test]
    fn adjoint_sign_period_four() {
        assert_eq!(
            (0..8).map(adjoint_sign).collect::<Vec<_>>(),
            vec![1, -1, -1, 1, 1, -1, -1, 1]
        );
    }
}
