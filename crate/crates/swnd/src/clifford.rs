//! Exterior algebra over an orthonormal coframe and Clifford representations.
//!
//! Basis k-forms are encoded as bit masks over the frame indices `0..n`
//! (bit j set means `e_j` is a factor, factors ordered by increasing index).
//! The conventions are:
//!
//! * real 1-forms act skew-adjointly, `c(e_i)c(e_j) + c(e_j)c(e_i) = -2 delta_ij`;
//! * `c(e_I)` is the ordered product of the generators in `I`;
//! * in even dimension `2M` the chirality operator `i^M c(dvol)` is `+1` on
//!   the plus spinors, in odd dimension `2M+1` the volume form is normalized
//!   so that `i^{M+1} c(dvol) = 1`.
//!
//! The representation is built by the standard doubling recursion, which
//! keeps every generator entry in `{0, +-1, +-i}` and the chirality operator
//! diagonal, so all algebraic identities can be checked exactly over
//! [`GaussianRational`](crate::scalar::GaussianRational).

use crate::mat::CMat;
use crate::scalar::Scalar;
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Bit mask encoding a subset of frame indices `0..n`.
pub type Mask = u16;

/// Number of frame indices in the mask.
#[inline]
pub fn degree(mask: Mask) -> usize {
    mask.count_ones() as usize
}

/// Mask of the full index set `0..n`.
#[inline]
pub fn full_mask(n: usize) -> Mask {
    ((1u32 << n) - 1) as Mask
}

/// Sign picked up when sorting the concatenation `(I, J)` of two disjoint
/// ascending index tuples into ascending order: `(-1)^inversions`.
pub fn merge_sign(i_mask: Mask, j_mask: Mask) -> i64 {
    debug_assert_eq!(i_mask & j_mask, 0, "masks must be disjoint");
    let mut inv = 0u32;
    let mut jm = j_mask;
    while jm != 0 {
        let b = jm.trailing_zeros();
        inv += (i_mask >> (b + 1)).count_ones();
        jm &= jm - 1;
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// All degree-k masks over `0..n`, ascending as integers.
pub fn masks_of_degree(n: usize, k: usize) -> Vec<Mask> {
    (0..1u32 << n)
        .map(|m| m as Mask)
        .filter(|m| degree(*m) == k)
        .collect()
}

/// `(-1)^{k(k+1)/2}`: the square of `c(gamma)` for a unit basis k-form, and
/// the sign in `c(gamma)^dagger = eps_k c(gamma)`.
pub fn square_sign(k: usize) -> i64 {
    crate::scalar::adjoint_sign(k)
}

/// A complex-coefficient, possibly inhomogeneous form on R^n with the
/// standard orthonormal coframe.
#[derive(Clone, PartialEq, Debug)]
pub struct FormValue<S> {
    n: usize,
    terms: BTreeMap<Mask, S>,
}

impl<S: Scalar> FormValue<S> {
    pub fn zero(n: usize) -> Self {
        FormValue {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Single term `coeff * e_I` with `I` given as a list of indices.
    pub fn term(n: usize, indices: &[usize], coeff: S) -> Self {
        let mut mask: Mask = 0;
        for &i in indices {
            assert!(i < n, "index out of range");
            assert_eq!(mask & (1 << i), 0, "repeated index");
            mask |= 1 << i;
        }
        Self::from_mask(n, mask, coeff)
    }

    pub fn from_mask(n: usize, mask: Mask, coeff: S) -> Self {
        let mut f = Self::zero(n);
        f.insert(mask, coeff);
        f
    }

    /// The scalar 1 as a 0-form.
    pub fn one(n: usize) -> Self {
        Self::from_mask(n, 0, S::one())
    }

    /// The volume form `e_0 ^ ... ^ e_{n-1}`.
    pub fn volume(n: usize) -> Self {
        Self::from_mask(n, full_mask(n), S::one())
    }

    pub fn insert(&mut self, mask: Mask, coeff: S) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(mask).or_insert_with(S::zero);
        *entry = entry.add(&coeff);
        if entry.is_zero() {
            self.terms.remove(&mask);
        }
    }

    pub fn coeff(&self, mask: Mask) -> S {
        self.terms.get(&mask).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Mask, &S)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (m, c) in rhs.iter() {
            out.insert(m, c.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map(|c| c.mul(s))
    }

    /// Coefficient-wise complex conjugate (the coframe is real).
    pub fn conj(&self) -> Self {
        self.map(|c| c.conj())
    }

    fn map(&self, f: impl Fn(&S) -> S) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in self.iter() {
            out.insert(m, f(c));
        }
        out
    }

    /// Degrees present with nonzero coefficient, ascending.
    pub fn degrees(&self) -> Vec<usize> {
        let mut ds: Vec<usize> = self.terms.keys().map(|m| degree(*m)).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// Projection onto the degree-k part.
    pub fn degree_part(&self, k: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in self.iter() {
            if degree(m) == k {
                out.insert(m, c.clone());
            }
        }
        out
    }

    pub fn wedge(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let mut out = Self::zero(self.n);
        for (mi, ci) in self.iter() {
            for (mj, cj) in rhs.iter() {
                if mi & mj != 0 {
                    continue;
                }
                let s = merge_sign(mi, mj);
                out.insert(mi | mj, ci.mul(cj).scale_i64(s));
            }
        }
        out
    }

    /// Interior product with the frame vector `e_j`.
    pub fn contract_dir(&self, j: usize) -> Self {
        assert!(j < self.n);
        let bit = 1u16 << j;
        let mut out = Self::zero(self.n);
        for (m, c) in self.iter() {
            if m & bit == 0 {
                continue;
            }
            let below = (m & (bit - 1)).count_ones();
            let s = if below % 2 == 0 { 1 } else { -1 };
            out.insert(m & !bit, c.scale_i64(s));
        }
        out
    }

    /// Wedge with the covector `sum_j xi_j e_j` from the left.
    pub fn wedge_covector(&self, xi: &[S]) -> Self {
        assert_eq!(xi.len(), self.n);
        let mut out = Self::zero(self.n);
        for (j, x) in xi.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let e = Self::from_mask(self.n, 1 << j, x.clone());
            out = out.add(&e.wedge(self));
        }
        out
    }

    /// Interior product with the covector `sum_j xi_j e_j` (metric-dual vector).
    pub fn contract_covector(&self, xi: &[S]) -> Self {
        assert_eq!(xi.len(), self.n);
        let mut out = Self::zero(self.n);
        for (j, x) in xi.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            out = out.add(&self.contract_dir(j).scale(x));
        }
        out
    }

    /// Hodge star for the Euclidean metric and orientation `e_0 ^ .. ^ e_{n-1}`,
    /// extended complex-linearly.
    pub fn hodge(&self) -> Self {
        let full = full_mask(self.n);
        let mut out = Self::zero(self.n);
        for (m, c) in self.iter() {
            let comp = full & !m;
            out.insert(comp, c.scale_i64(merge_sign(m, comp)));
        }
        out
    }

    /// Hermitian inner product, linear in `self`, conjugating `rhs`; the
    /// basis monomials are orthonormal.
    pub fn inner(&self, rhs: &Self) -> S {
        assert_eq!(self.n, rhs.n);
        let mut acc = S::zero();
        for (m, c) in self.iter() {
            let r = rhs.coeff(m);
            if !r.is_zero() {
                acc = acc.add(&c.mul(&r.conj()));
            }
        }
        acc
    }

    pub fn norm_sqr_c64(&self) -> f64 {
        self.inner(self).to_c64().re
    }

    pub fn to_c64(&self) -> FormValue<Complex64> {
        let mut out = FormValue::zero(self.n);
        for (m, c) in self.iter() {
            out.insert(m, c.to_c64());
        }
        out
    }
}

/// Irreducible complex Clifford representation of R^n with diagonal
/// chirality (even n). Rank is `2^floor(n/2)`.
#[derive(Clone, Debug)]
pub struct CliffordRep<S> {
    n: usize,
    rank: usize,
    gens: Vec<CMat<S>>,
    /// Diagonal of the chirality operator (even n only).
    chir: Option<Vec<i64>>,
    plus_idx: Vec<usize>,
    minus_idx: Vec<usize>,
}

impl<S: Scalar> CliffordRep<S> {
    /// Builds the representation by doubling:
    /// `Gamma_j -> Gamma_j (x) sigma_3`, then append `1 (x) i sigma_1`,
    /// `1 (x) i sigma_2`; in odd dimension the last generator is the scaled
    /// even-dimensional volume element.
    pub fn build(n: usize) -> Self {
        assert!(n >= 2, "representation needs n >= 2");
        assert!(n <= 12, "mask type and ranks sized for n <= 12");
        let m = n / 2;
        // Pauli-derived blocks with entries in {0, +-1, +-i}.
        let i_s1 = {
            let mut a = CMat::zeros(2, 2);
            a.set(0, 1, S::i());
            a.set(1, 0, S::i());
            a
        };
        let i_s2 = {
            let mut a = CMat::zeros(2, 2);
            a.set(0, 1, S::one());
            a.set(1, 0, S::one().neg());
            a
        };
        let s3 = {
            let mut a = CMat::zeros(2, 2);
            a.set(0, 0, S::one());
            a.set(1, 1, S::one().neg());
            a
        };
        let mut gens: Vec<CMat<S>> = vec![i_s1.clone(), i_s2.clone()];
        for _ in 1..m {
            let mut next: Vec<CMat<S>> = gens.iter().map(|g| g.kron(&s3)).collect();
            let rank = gens[0].rows();
            let id = CMat::<S>::identity(rank);
            next.push(id.kron(&i_s1));
            next.push(id.kron(&i_s2));
            gens = next;
        }
        let rank = gens[0].rows();
        if n % 2 == 1 {
            // z * Gamma_0 .. Gamma_{2m-1} with z = (-1)^m (-i)^{m+1}, which
            // normalizes the volume action to i^{m+1} c(dvol) = 1.
            let mut prod = CMat::<S>::identity(rank);
            for g in &gens {
                prod = prod.mul(g);
            }
            let z = S::i_pow(3 * (m + 1)).scale_i64(if m % 2 == 0 { 1 } else { -1 });
            gens.push(prod.scale(&z));
        }
        Self::assemble(n, gens)
    }

    /// Wraps externally supplied generators (for instance a geometrically
    /// adapted basis) after validating the Clifford relations. In even
    /// dimension the chirality operator must be diagonal in the given basis.
    pub fn from_generators(n: usize, gens: Vec<CMat<S>>) -> Self {
        assert_eq!(gens.len(), n, "one generator per dimension");
        let rank = gens[0].rows();
        for (i, gi) in gens.iter().enumerate() {
            assert_eq!((gi.rows(), gi.cols()), (rank, rank), "square generators");
            for (j, gj) in gens.iter().enumerate().skip(i) {
                let anti = gi.mul(gj).add(&gj.mul(gi));
                let expect = if i == j {
                    CMat::<S>::identity(rank).scale(&S::from_i64(-2))
                } else {
                    CMat::zeros(rank, rank)
                };
                assert!(
                    anti.sub(&expect).is_zero(),
                    "Clifford relation fails for generators {i}, {j}"
                );
            }
        }
        Self::assemble(n, gens)
    }

    fn assemble(n: usize, gens: Vec<CMat<S>>) -> Self {
        let m = n / 2;
        let rank = gens[0].rows();
        let (chir, plus_idx, minus_idx) = if n % 2 == 0 {
            let mut prod = CMat::<S>::identity(rank);
            for g in &gens {
                prod = prod.mul(g);
            }
            let x = prod.scale(&S::i_pow(m));
            let mut diag = Vec::with_capacity(rank);
            for r in 0..rank {
                for c in 0..rank {
                    if r != c {
                        assert!(x.get(r, c).is_zero(), "chirality must be diagonal");
                    }
                }
                let v = x.get(r, r);
                if *v == S::one() {
                    diag.push(1);
                } else if *v == S::one().neg() {
                    diag.push(-1);
                } else {
                    panic!("chirality diagonal must be +-1");
                }
            }
            let plus: Vec<usize> = (0..rank).filter(|&r| diag[r] == 1).collect();
            let minus: Vec<usize> = (0..rank).filter(|&r| diag[r] == -1).collect();
            (Some(diag), plus, minus)
        } else {
            (None, (0..rank).collect(), Vec::new())
        };
        CliffordRep {
            n,
            rank,
            gens,
            chir,
            plus_idx,
            minus_idx,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Rank of one chiral half (even n), or the full rank (odd n).
    pub fn chiral_rank(&self) -> usize {
        if self.n % 2 == 0 {
            self.rank / 2
        } else {
            self.rank
        }
    }

    pub fn gen(&self, j: usize) -> &CMat<S> {
        &self.gens[j]
    }

    pub fn chirality_diag(&self) -> Option<&[i64]> {
        self.chir.as_deref()
    }

    pub fn plus_indices(&self) -> &[usize] {
        &self.plus_idx
    }

    pub fn minus_indices(&self) -> &[usize] {
        &self.minus_idx
    }

    /// `c(e_I)`: ordered product of generators for the index set `I`.
    pub fn gamma(&self, mask: Mask) -> CMat<S> {
        let mut out = CMat::<S>::identity(self.rank);
        for j in 0..self.n {
            if mask & (1 << j) != 0 {
                out = out.mul(&self.gens[j]);
            }
        }
        out
    }

    /// Clifford action of an arbitrary form value.
    pub fn act(&self, form: &FormValue<S>) -> CMat<S> {
        assert_eq!(form.n(), self.n);
        let mut out = CMat::zeros(self.rank, self.rank);
        for (mask, coeff) in form.iter() {
            out = out.add(&self.gamma(mask).scale(coeff));
        }
        out
    }

    /// Chiral block of `act(form)`: rows in the `to` half, columns in the
    /// `from` half. Odd n has a single half equal to the whole space.
    pub fn act_block(&self, form: &FormValue<S>, from: Chirality, to: Chirality) -> CMat<S> {
        let a = self.act(form);
        a.restrict(self.half(to), self.half(from))
    }

    pub fn half(&self, chi: Chirality) -> &[usize] {
        match chi {
            Chirality::Plus => &self.plus_idx,
            Chirality::Minus => {
                assert!(self.n % 2 == 0, "odd dimension has no minus half");
                &self.minus_idx
            }
        }
    }
}

/// Chiral half of the spinor space. In odd dimensions only `Plus` is used
/// and denotes the full space.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Chirality {
    Plus,
    Minus,
}

impl Chirality {
    pub fn sign(self) -> i64 {
        match self {
            Chirality::Plus => 1,
            Chirality::Minus => -1,
        }
    }
    pub fn other(self) -> Self {
        match self {
            Chirality::Plus => Chirality::Minus,
            Chirality::Minus => Chirality::Plus,
        }
    }
}

/// Phase lambda in `c(*gamma) = lambda c(gamma)` on the given chiral half,
/// for real degree-k basis forms gamma:
///
/// * even n = 2M: `lambda = chi (-1)^{M + k(k+1)/2} i^M`,
/// * odd n = 2M+1: `lambda = (-1)^{M+1 + k(k+1)/2} i^{M+1}` (chi ignored).
///
/// For odd k in even n the identity holds for the off-diagonal blocks with
/// source chirality `chi`.
pub fn hodge_phase<S: Scalar>(n: usize, k: usize, chi: Chirality) -> S {
    let (mm, sign) = if n % 2 == 0 {
        (n / 2, chi.sign())
    } else {
        (n / 2 + 1, 1)
    };
    let mut s = S::i_pow(mm).scale_i64(sign);
    if (mm + k * (k + 1) / 2) % 2 == 1 {
        s = s.neg();
    }
    // i^M times (-1)^M folded together above keeps the scalar exact.
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{s_k, GaussianRational};

    type G = GaussianRational;

    fn delta(i: usize, j: usize) -> i64 {
        if i == j {
            1
        } else {
            0
        }
    }

    #[test]
    fn car_relations_exact() {
        for n in 2..=7 {
            let rep = CliffordRep::<G>::build(n);
            for i in 0..n {
                for j in 0..n {
                    let gi = rep.gen(i);
                    let gj = rep.gen(j);
                    let anti = gi.mul(gj).add(&gj.mul(gi));
                    let want = CMat::<G>::identity(rep.rank())
                        .scale(&G::from_i64(-2 * delta(i, j)));
                    assert_eq!(anti, want, "n={n} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn volume_normalization() {
        // odd n = 2M+1: i^{M+1} c(dvol) = 1
        for n in [3usize, 5, 7, 9] {
            let mm = n / 2 + 1;
            let rep = CliffordRep::<G>::build(n);
            let dvol = rep.gamma(full_mask(n));
            let got = dvol.scale(&G::i_pow(mm));
            assert_eq!(got, CMat::<G>::identity(rep.rank()), "n={n}");
        }
        // even n = 2M: i^M c(dvol) = chirality
        for n in [2usize, 4, 6, 8] {
            let rep = CliffordRep::<G>::build(n);
            let x = rep.gamma(full_mask(n)).scale(&G::i_pow(n / 2));
            let diag = rep.chirality_diag().unwrap();
            for r in 0..rep.rank() {
                assert_eq!(*x.get(r, r), G::from_i64(diag[r]));
            }
            assert_eq!(rep.plus_indices().len(), rep.rank() / 2);
        }
    }

    #[test]
    fn basis_form_squares() {
        for n in 2..=6 {
            let rep = CliffordRep::<G>::build(n);
            for k in 0..=n {
                for mask in masks_of_degree(n, k) {
                    let g = rep.gamma(mask);
                    let want =
                        CMat::<G>::identity(rep.rank()).scale(&G::from_i64(square_sign(k)));
                    assert_eq!(g.mul(&g), want, "n={n} mask={mask:b}");
                }
            }
        }
    }

    #[test]
    fn s_k_action_self_adjoint() {
        // s_k c(gamma) is self-adjoint for real k-forms.
        for n in 2..=6 {
            let rep = CliffordRep::<G>::build(n);
            for k in 0..=n {
                let mut form = FormValue::<G>::zero(n);
                for (t, mask) in masks_of_degree(n, k).into_iter().enumerate() {
                    form.insert(mask, G::from_i64(t as i64 + 1 - 3 * ((t % 3) as i64)));
                }
                let a = rep.act(&form.scale(&s_k::<G>(k)));
                assert!(a.is_hermitian(), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn wedge_contract_clifford_identities() {
        // c(eta ^ gamma) = (c(eta)c(gamma) + (-1)^k c(gamma)c(eta)) / 2
        // c(eta . gamma) = -(c(eta)c(gamma) - (-1)^k c(gamma)c(eta)) / 2
        // for 1-forms eta and k-forms gamma; together they give
        // c(eta)c(gamma) = c(eta ^ gamma) - c(eta . gamma).
        let half = G::from_ratio(1, 2);
        for n in 2..=6 {
            let rep = CliffordRep::<G>::build(n);
            for k in 0..=n {
                let mut gamma = FormValue::<G>::zero(n);
                for (t, mask) in masks_of_degree(n, k).into_iter().enumerate() {
                    gamma.insert(mask, G::from_i64((2 * t + 1) as i64));
                }
                let mut eta_c: Vec<G> = vec![G::zero(); n];
                for (j, e) in eta_c.iter_mut().enumerate() {
                    *e = G::from_i64(j as i64 - 1);
                }
                let eta = {
                    let mut f = FormValue::<G>::zero(n);
                    for (j, c) in eta_c.iter().enumerate() {
                        f.insert(1 << j, c.clone());
                    }
                    f
                };
                let ce = rep.act(&eta);
                let cg = rep.act(&gamma);
                let sign = if k % 2 == 0 { 1 } else { -1 };
                let sym = ce.mul(&cg).add(&cg.mul(&ce).scale(&G::from_i64(sign)));
                let asym = ce.mul(&cg).sub(&cg.mul(&ce).scale(&G::from_i64(sign)));
                let wedge = rep.act(&gamma.wedge_covector(&eta_c));
                let hook = rep.act(&gamma.contract_covector(&eta_c));
                assert_eq!(wedge, sym.scale(&half), "wedge n={n} k={k}");
                assert_eq!(hook, asym.scale(&half).neg(), "hook n={n} k={k}");
                assert_eq!(ce.mul(&cg), wedge.sub(&hook), "product n={n} k={k}");
            }
        }
    }

    #[test]
    fn hodge_involution_and_pairing() {
        for n in 2..=7 {
            for k in 0..=n {
                for mask in masks_of_degree(n, k) {
                    let f = FormValue::<G>::from_mask(n, mask, G::from_i64(1));
                    let ss = f.hodge().hodge();
                    let sign = if (k * (n - k)) % 2 == 0 { 1 } else { -1 };
                    assert_eq!(ss, f.scale(&G::from_i64(sign)), "n={n} mask={mask:b}");
                    // <a, b> dvol = a ^ *conj(b) for basis monomials
                    let pair = f.wedge(&f.hodge());
                    assert_eq!(pair, FormValue::<G>::volume(n));
                }
            }
        }
    }

    #[test]
    fn contract_is_wedge_adjoint() {
        let n = 5;
        let mut alpha = FormValue::<G>::zero(n);
        alpha.insert(0b00111, G::from_parts(2, 3, 1, 1));
        alpha.insert(0b01101, G::from_i64(-2));
        let mut beta = FormValue::<G>::zero(n);
        beta.insert(0b01111, G::from_parts(1, 2, -1, 3));
        beta.insert(0b10111, G::from_i64(3));
        for j in 0..n {
            let ej = vec![
                G::zero(),
                G::zero(),
                G::zero(),
                G::zero(),
                G::zero(),
            ]
            .into_iter()
            .enumerate()
            .map(|(t, z)| if t == j { G::one() } else { z })
            .collect::<Vec<_>>();
            let lhs = alpha.wedge_covector(&ej).inner(&beta);
            let rhs = alpha.inner(&beta.contract_dir(j));
            assert_eq!(lhs, rhs, "j={j}");
        }
    }

    #[test]
    fn hodge_phase_on_spinors() {
        for n in 2..=7 {
            let rep = CliffordRep::<G>::build(n);
            for k in 0..=n {
                for mask in masks_of_degree(n, k) {
                    let f = FormValue::<G>::from_mask(n, mask, G::one());
                    let cs = rep.act(&f.hodge());
                    let c = rep.act(&f);
                    if n % 2 == 1 {
                        let lam = hodge_phase::<G>(n, k, Chirality::Plus);
                        assert_eq!(cs, c.scale(&lam), "n={n} mask={mask:b}");
                    } else {
                        for chi in [Chirality::Plus, Chirality::Minus] {
                            let lam = hodge_phase::<G>(n, k, chi);
                            let cols = rep.half(chi);
                            let all: Vec<usize> = (0..rep.rank()).collect();
                            let lhs = cs.restrict(&all, cols);
                            let rhs = c.restrict(&all, cols).scale(&lam);
                            assert_eq!(lhs, rhs, "n={n} mask={mask:b} chi={chi:?}");
                        }
                    }
                }
            }
        }
    }
}
