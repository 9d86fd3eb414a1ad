//! Pointwise spinor algebra: the quadratic endomorphism of a spinor, the
//! form-to-endomorphism isomorphisms, and the inverse map `q`.
//!
//! For a chiral spinor `phi` in a rank-r half `S`, the traceless Hermitian
//! endomorphism
//!
//! ```text
//! E_phi(psi) = <psi, phi> phi - (1/r) |phi|^2 psi
//! ```
//!
//! is identified with a sum of even-degree forms through the Clifford
//! action. Which degrees occur depends on the dimension family; the chosen
//! degree sets make `sum_d s_d c(.)` a real-linear isomorphism onto
//! `isu(S)`, which [`iso_rank_check`] certifies exactly. Inverting that
//! isomorphism on `E_phi` gives the curvature term `q(phi)`.

use crate::clifford::{masks_of_degree, Chirality, CliffordRep, FormValue};
use crate::mat::CMat;
use crate::scalar::{s_k, Scalar};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// One summand of the target space of `q`: the even degree and whether the
/// middle-degree chiral projection is in force (dimension 4m only).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IsoDegree {
    pub k: usize,
    pub dual_project: bool,
}

/// Even degrees parametrizing `isu(S_chi)`, by dimension family:
///
/// * odd n = 2m+1: degrees 2, 4, .., 2m;
/// * n = 4m: degrees 2, .., 2m-2 and the chirally projected middle 2m;
/// * n = 4m-2: plus side 2, .., 2m-2; minus side 2m, .., 4m-4.
pub fn iso_degrees(n: usize, chi: Chirality) -> Vec<IsoDegree> {
    assert!(n >= 3, "dimension at least 3");
    if n % 2 == 1 {
        assert_eq!(chi, Chirality::Plus, "odd dimension is unchiral");
        let m = n / 2;
        return (1..=m)
            .map(|k| IsoDegree {
                k: 2 * k,
                dual_project: false,
            })
            .collect();
    }
    if n % 4 == 0 {
        let m = n / 4;
        let mut ds: Vec<IsoDegree> = (1..m)
            .map(|k| IsoDegree {
                k: 2 * k,
                dual_project: false,
            })
            .collect();
        ds.push(IsoDegree {
            k: 2 * m,
            dual_project: true,
        });
        ds
    } else {
        let m = (n + 2) / 4;
        match chi {
            Chirality::Plus => (1..m)
                .map(|k| IsoDegree {
                    k: 2 * k,
                    dual_project: false,
                })
                .collect(),
            Chirality::Minus => (m..=(2 * m - 2))
                .map(|k| IsoDegree {
                    k: 2 * k,
                    dual_project: false,
                })
                .collect(),
        }
    }
}

/// One basis element of the target space together with its chiral action.
#[derive(Clone, Debug)]
pub struct IsoElem<S> {
    pub degree: usize,
    /// Real basis form: a basis monomial, or `e_I + chi * (*e_I)` for the
    /// projected middle degree (unnormalized).
    pub form: FormValue<S>,
    /// The phase `s_d` multiplying the form in the total target.
    pub phase: S,
    /// `act(s_d form)` restricted to the chiral half; Hermitian.
    pub block: CMat<S>,
    /// Hilbert-Schmidt norm `tr(block^2)`, real and positive.
    pub h: S,
}

/// Hilbert-Schmidt-orthogonal basis of `isu(S_chi)` realized by forms.
#[derive(Clone, Debug)]
pub struct IsoBasis<S> {
    pub n: usize,
    pub chi: Chirality,
    pub elems: Vec<IsoElem<S>>,
}

impl<S: Scalar> IsoBasis<S> {
    pub fn build(rep: &CliffordRep<S>, chi: Chirality) -> Self {
        let n = rep.n();
        let mut elems = Vec::new();
        for d in iso_degrees(n, chi) {
            let phase: S = s_k(d.k);
            if !d.dual_project {
                for mask in masks_of_degree(n, d.k) {
                    let form = FormValue::from_mask(n, mask, S::one());
                    elems.push(Self::elem(rep, chi, d.k, phase.clone(), form));
                }
            } else {
                // one representative per dual pair: masks containing index 0
                for mask in masks_of_degree(n, d.k) {
                    if mask & 1 == 0 {
                        continue;
                    }
                    let e = FormValue::from_mask(n, mask, S::one());
                    let form = if chi == Chirality::Plus {
                        e.add(&e.hodge())
                    } else {
                        e.sub(&e.hodge())
                    };
                    elems.push(Self::elem(rep, chi, d.k, phase.clone(), form));
                }
            }
        }
        IsoBasis { n, chi, elems }
    }

    fn elem(
        rep: &CliffordRep<S>,
        chi: Chirality,
        degree: usize,
        phase: S,
        form: FormValue<S>,
    ) -> IsoElem<S> {
        let block = rep.act_block(&form.scale(&phase), chi, chi);
        let h = block.mul(&block).trace();
        IsoElem {
            degree,
            form,
            phase,
            block,
            h,
        }
    }

    /// Total dimension of the parametrized space (number of basis elements).
    pub fn dim(&self) -> usize {
        self.elems.len()
    }
}

/// `E_phi` as a matrix on the chiral half: `phi phi^dagger - (|phi|^2 / r) I`.
pub fn e_phi_matrix(phi: &[Complex64]) -> CMat<Complex64> {
    let r = phi.len();
    let norm: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    let mut m = CMat::from_fn(r, r, |i, j| phi[i] * phi[j].conj());
    let shift = Complex64::new(norm / r as f64, 0.0);
    for k in 0..r {
        let v = *m.get(k, k) - shift;
        m.set(k, k, v);
    }
    m
}

/// `E_phi` applied to a spinor.
pub fn e_phi_apply(phi: &[Complex64], psi: &[Complex64]) -> Vec<Complex64> {
    let r = phi.len() as f64;
    let pairing: Complex64 = psi.iter().zip(phi).map(|(a, b)| a * b.conj()).sum();
    let norm: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    phi.iter()
        .zip(psi)
        .map(|(p, s)| pairing * p - (norm / r) * s)
        .collect()
}

/// The value of `q(phi)`: the total complex form and its per-degree real
/// constituents (`total = sum_d s_d parts[d]`).
#[derive(Clone, Debug)]
pub struct QValue {
    pub total: FormValue<Complex64>,
    pub parts: BTreeMap<usize, FormValue<Complex64>>,
}

/// Inverts the form-to-endomorphism isomorphism on `E_phi` by diagonal
/// Hilbert-Schmidt projection: the basis blocks are pairwise orthogonal, so
/// `x_alpha = tr(E block_alpha) / tr(block_alpha^2)` and each `x_alpha` is
/// real.
pub fn q_of_phi(basis: &IsoBasis<Complex64>, phi: &[Complex64]) -> QValue {
    let e = e_phi_matrix(phi);
    q_of_endo(basis, &e)
}

/// Same projection applied to an arbitrary Hermitian traceless endomorphism.
pub fn q_of_endo(basis: &IsoBasis<Complex64>, e: &CMat<Complex64>) -> QValue {
    let n = basis.n;
    let mut total = FormValue::zero(n);
    let mut parts: BTreeMap<usize, FormValue<Complex64>> = BTreeMap::new();
    for el in &basis.elems {
        let x = e.mul(&el.block).trace().re / el.h.re;
        if x == 0.0 {
            continue;
        }
        let coeff = Complex64::new(x, 0.0);
        let part = parts
            .entry(el.degree)
            .or_insert_with(|| FormValue::zero(n));
        *part = part.add(&el.form.scale(&coeff));
        total = total.add(&el.form.scale(&(coeff * el.phase)));
    }
    for d in iso_degrees(n, basis.chi) {
        parts.entry(d.k).or_insert_with(|| FormValue::zero(n));
    }
    QValue { total, parts }
}

/// Report of the exact certification of the parametrization of `isu(S_chi)`.
#[derive(Clone, Debug)]
pub struct IsoReport {
    pub n: usize,
    pub dim_basis: usize,
    pub dim_isu: usize,
    /// Every block Hermitian and traceless.
    pub blocks_admissible: bool,
    /// Pairwise Hilbert-Schmidt orthogonality, exact.
    pub orthogonal: bool,
    /// Every block has positive Hilbert-Schmidt norm.
    pub nondegenerate: bool,
}

impl IsoReport {
    pub fn surjective(&self) -> bool {
        self.blocks_admissible
            && self.orthogonal
            && self.nondegenerate
            && self.dim_basis == self.dim_isu
    }
}

/// Certifies in exact arithmetic that the degree set of [`iso_degrees`]
/// parametrizes `isu(S_chi)`: orthogonal, nondegenerate, correctly counted.
pub fn iso_rank_check<S: Scalar>(rep: &CliffordRep<S>, chi: Chirality) -> IsoReport {
    let basis = IsoBasis::build(rep, chi);
    let r = rep.chiral_rank();
    let mut admissible = true;
    let mut orthogonal = true;
    let mut nondegenerate = true;
    for (a, ea) in basis.elems.iter().enumerate() {
        if !ea.block.is_hermitian() || !ea.block.trace().is_zero() {
            admissible = false;
        }
        if ea.h.is_zero() || ea.h.to_c64().re <= 0.0 {
            nondegenerate = false;
        }
        for eb in basis.elems.iter().skip(a + 1) {
            if !ea.block.mul(&eb.block).trace().is_zero() {
                orthogonal = false;
            }
        }
    }
    IsoReport {
        n: rep.n(),
        dim_basis: basis.dim(),
        dim_isu: r * r - 1,
        blocks_admissible: admissible,
        orthogonal,
        nondegenerate,
    }
}

/// Hilbert-Schmidt constants per degree: `tr((s_d c(w))^2)` for unit basis
/// forms `w` of that degree (middle-degree elements normalized). All
/// elements of a degree share the constant; this is asserted.
pub fn hs_constants(basis: &IsoBasis<Complex64>) -> BTreeMap<usize, f64> {
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for el in &basis.elems {
        let w_norm = el.form.inner(&el.form).re;
        let a = el.h.re / w_norm;
        let entry = out.entry(el.degree).or_insert(a);
        assert!(
            (*entry - a).abs() < 1e-12,
            "degree {} has mixed HS constants",
            el.degree
        );
    }
    out
}

/// Self-dual (chi = +) or anti-self-dual projection of a middle-degree form
/// in even dimension: `(gamma + chi * (*gamma)) / 2`.
pub fn dual_project<S: Scalar>(form: &FormValue<S>, chi: Chirality) -> FormValue<S> {
    let n = form.n();
    assert_eq!(n % 2, 0);
    let star = form.hodge();
    let signed = if chi == Chirality::Plus {
        form.add(&star)
    } else {
        form.sub(&star)
    };
    signed.scale(&S::from_ratio(1, 2))
}

/// Consistency helper used in tests and diagnostics: the middle-degree
/// identity `tr(E_phi) = 0` plus the quartic pairing
/// `<E_phi(phi), phi> = (1 - 1/r) |phi|^4`.
pub fn e_phi_pairing(phi: &[Complex64]) -> (f64, f64) {
    let r = phi.len() as f64;
    let norm: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    let e = e_phi_apply(phi, phi);
    let got: Complex64 = e.iter().zip(phi).map(|(a, b)| a * b.conj()).sum();
    let want = (1.0 - 1.0 / r) * norm * norm;
    (got.re, want)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::GaussianRational;

    type G = GaussianRational;

    fn sample_phi(r: usize) -> Vec<Complex64> {
        (0..r)
            .map(|k| Complex64::new((k as f64 * 0.7 - 1.3).sin() + 0.5, (k as f64 + 0.2).cos()))
            .collect()
    }

    #[test]
    fn iso_counts_all_families() {
        // (n, chi, expected dimension of isu)
        let cases = [
            (3, Chirality::Plus, 3usize),
            (5, Chirality::Plus, 15),
            (7, Chirality::Plus, 63),
            (9, Chirality::Plus, 255),
            (4, Chirality::Plus, 3),
            (8, Chirality::Plus, 63),
            (6, Chirality::Plus, 15),
            (6, Chirality::Minus, 15),
            (10, Chirality::Minus, 255),
        ];
        for (n, chi, want) in cases {
            let rep = CliffordRep::<G>::build(n);
            let report = iso_rank_check(&rep, chi);
            assert_eq!(report.dim_isu, want, "n={n}");
            assert!(report.surjective(), "n={n} chi={chi:?}: {report:?}");
        }
    }

    #[test]
    fn e_phi_quartic_pairing() {
        for r in [2usize, 4, 8] {
            let phi = sample_phi(r);
            let (got, want) = e_phi_pairing(&phi);
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "r={r}");
        }
        // matrix and operator forms agree
        let phi = sample_phi(4);
        let psi = sample_phi(4).iter().map(|z| z * Complex64::i()).collect::<Vec<_>>();
        let via_mat = e_phi_matrix(&phi).apply(&psi);
        let direct = e_phi_apply(&phi, &psi);
        for (a, b) in via_mat.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn q_inverts_e_phi() {
        for (n, chi) in [
            (3usize, Chirality::Plus),
            (5, Chirality::Plus),
            (8, Chirality::Plus),
            (6, Chirality::Plus),
            (6, Chirality::Minus),
        ] {
            let rep = CliffordRep::<Complex64>::build(n);
            let basis = IsoBasis::build(&rep, chi);
            let phi = sample_phi(rep.chiral_rank());
            let q = q_of_phi(&basis, &phi);
            let acted = rep.act_block(&q.total, chi, chi);
            let e = e_phi_matrix(&phi);
            assert!(acted.distance(&e) < 1e-12, "n={n} chi={chi:?}");
            // parts are real forms and reassemble the total
            let mut total = FormValue::<Complex64>::zero(n);
            for (d, part) in &q.parts {
                for (_, c) in part.iter() {
                    assert!(c.im.abs() < 1e-13, "part {d} must be real");
                }
                total = total.add(&part.scale(&s_k::<Complex64>(*d)));
            }
            assert!(total
                .sub(&q.total)
                .to_c64()
                .norm_sqr_c64()
                .sqrt()
                < 1e-12);
        }
    }

    #[test]
    fn hs_constants_dim8() {
        let rep = CliffordRep::<Complex64>::build(8);
        let basis = IsoBasis::build(&rep, Chirality::Plus);
        let hs = hs_constants(&basis);
        assert_eq!(hs.len(), 2);
        assert!((hs[&2] - 8.0).abs() < 1e-12);
        assert!((hs[&4] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn dual_projection_squares() {
        let n = 8;
        let f = FormValue::<G>::term(n, &[0, 2, 5, 6], G::from_i64(3));
        let p = dual_project(&f, Chirality::Plus);
        assert_eq!(p, dual_project(&p, Chirality::Plus));
        assert_eq!(p.hodge(), p);
        let q = dual_project(&f, Chirality::Minus);
        assert_eq!(q.hodge(), q.neg());
        assert_eq!(p.add(&q), f);
    }
}
