//! Dimension-dependent operator tables for the generalized Seiberg-Witten
//! systems.
//!
//! Each dimension n >= 3 falls into one of three families (odd, divisible by
//! four, or even with n+2 divisible by four). The Dirac operator is the spin
//! Dirac operator twisted by a circle connection plus a fixed pattern of
//! Clifford actions of odd-degree forms `beta_k`; the curvature equation
//! pairs the connection curvature with first-order combinations of the
//! `beta_k` against the quadratic spinor term.
//!
//! Only the Dirac coupling tables are primary data here. The curvature
//! tables are derived mechanically: a coupling `mu c(gamma)` with `gamma` of
//! degree d contributes
//!
//! ```text
//! (mu - conj(mu) eta_d) c(d gamma) + (mu + conj(mu) eta_d) c(d* gamma),
//! eta_d = (-1)^{d(d+3)/2}
//! ```
//!
//! to twice the Weitzenboeck remainder, and contributions landing outside
//! the target degrees are rewritten through the Hodge star using the chiral
//! phase of [`hodge_phase`]. The derived tables are pinned against hand
//! expansions in low dimensions and certified at runtime by the Weitzenboeck
//! defect and ellipticity batteries.

use crate::clifford::{Chirality, FormValue};
use crate::scalar::{s_k, Scalar};
use crate::spinor::{iso_degrees, IsoDegree};
use num_complex::Complex64;
use std::collections::BTreeMap;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Family {
    /// n = 2m+1.
    Odd,
    /// n = 4m.
    Four,
    /// n = 4m-2; two spinor equations coupled through the middle form.
    FourTwo,
}

/// One Clifford coupling `coeff * c((*)beta_k)` in a Dirac operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiracTerm {
    pub side: Chirality,
    pub k: usize,
    pub star: bool,
    /// Exact unit phase times a sign; representable exactly in f64.
    pub coeff: Complex64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, PartialOrd, Ord)]
pub enum DiffOp {
    /// Exterior derivative.
    D,
    /// Codifferential (formal adjoint of D).
    Cod,
}

/// One first-order term of a curvature equation:
/// `coeff * [post_star ?] diff ( [pre_star ?] beta_k )`, optionally followed
/// by the chiral middle-degree projection (family `Four`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvTerm {
    pub side: Chirality,
    pub k: usize,
    pub pre_star: bool,
    pub diff: DiffOp,
    pub post_star: bool,
    pub dual_project: bool,
    pub coeff: Complex64,
    pub target_degree: usize,
}

/// The connection-curvature entry of a curvature equation:
/// `coeff * (star ? *F : F)`, with the middle projection where applicable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnTerm {
    pub coeff: Complex64,
    pub star: bool,
    pub dual_project: bool,
}

/// Complete operator tables for one dimension.
#[derive(Clone, Debug)]
pub struct DimCase {
    pub n: usize,
    /// Family parameter: n = 2m+1, 4m, or 4m-2.
    pub m: usize,
    pub family: Family,
    /// Degrees of the independent odd forms in the state.
    pub beta_degrees: Vec<usize>,
    pub dirac_terms: Vec<DiracTerm>,
    pub curv_terms: Vec<CurvTerm>,
    pub conn_plus: ConnTerm,
    pub conn_minus: Option<ConnTerm>,
    pub targets_plus: Vec<IsoDegree>,
    pub targets_minus: Option<Vec<IsoDegree>>,
}

impl DimCase {
    /// Whether the dimension carries the two-spinor system.
    pub fn two_sided(&self) -> bool {
        self.family == Family::FourTwo
    }

    pub fn dirac_terms_on(&self, side: Chirality) -> impl Iterator<Item = &DiracTerm> {
        self.dirac_terms.iter().filter(move |t| t.side == side)
    }

    pub fn curv_terms_on(&self, side: Chirality) -> impl Iterator<Item = &CurvTerm> {
        self.curv_terms.iter().filter(move |t| t.side == side)
    }

    /// Degrees of the curvature-equation targets on a side.
    pub fn targets(&self, side: Chirality) -> &[IsoDegree] {
        match side {
            Chirality::Plus => &self.targets_plus,
            Chirality::Minus => self
                .targets_minus
                .as_deref()
                .expect("minus side only exists for family FourTwo"),
        }
    }

    /// The total inhomogeneous complex form coupled into the Dirac operator
    /// on a side, for given pointwise values of the `beta_k`.
    pub fn beta_total<S: Scalar>(
        &self,
        side: Chirality,
        beta: &BTreeMap<usize, FormValue<S>>,
    ) -> FormValue<S> {
        let mut total = FormValue::zero(self.n);
        for t in self.dirac_terms_on(side) {
            let b = match beta.get(&t.k) {
                Some(b) => b.clone(),
                None => continue,
            };
            let form = if t.star { b.hodge() } else { b };
            total = total.add(&form.scale(&scalar_from_c64(t.coeff)));
        }
        total
    }
}

/// Converts an exact table phase (integer real and imaginary parts) to any
/// scalar type without precision loss.
pub fn scalar_from_c64<S: Scalar>(z: Complex64) -> S {
    let re = z.re;
    let im = z.im;
    assert!(
        re.fract() == 0.0 && im.fract() == 0.0,
        "table coefficients are Gaussian integers"
    );
    S::from_i64(re as i64).add(&S::i().mul(&S::from_i64(im as i64)))
}

/// `eta_d = (-1)^{d(d+3)/2}`: the sign pairing a degree-d coupling with its
/// adjoint in the Weitzenboeck remainder.
pub fn eta(d: usize) -> i64 {
    if (d * (d + 3) / 2) % 2 == 0 {
        1
    } else {
        -1
    }
}

fn c64(re: i64, im: i64) -> Complex64 {
    Complex64::new(re as f64, im as f64)
}

fn s_c64(k: usize) -> Complex64 {
    s_k::<Complex64>(k)
}

/// Builds the operator tables for dimension n >= 3.
pub fn build_case(n: usize) -> DimCase {
    assert!(n >= 3, "systems start at dimension 3");
    assert!(n <= 12, "representation sized for n <= 12");
    let (family, m) = if n % 2 == 1 {
        (Family::Odd, (n - 1) / 2)
    } else if n % 4 == 0 {
        (Family::Four, n / 4)
    } else {
        (Family::FourTwo, (n + 2) / 4)
    };
    let beta_degrees: Vec<usize> = match family {
        Family::Odd => (1..=m).map(|k| 2 * k + 1).collect(),
        Family::Four => (1..m).map(|k| 2 * k + 1).collect(),
        Family::FourTwo => (1..=(2 * m - 3)).map(|k| 2 * k + 1).collect(),
    };
    let mut dirac_terms: Vec<DiracTerm> = Vec::new();
    match family {
        Family::Odd => {
            for k in 1..m {
                dirac_terms.push(DiracTerm {
                    side: Chirality::Plus,
                    k: 2 * k + 1,
                    star: false,
                    coeff: s_c64(2 * k + 1),
                });
            }
            for k in 1..=m {
                dirac_terms.push(DiracTerm {
                    side: Chirality::Plus,
                    k: 2 * k + 1,
                    star: true,
                    coeff: Complex64::i() * s_c64(2 * m - 2 * k),
                });
            }
        }
        Family::Four => {
            for k in 1..m {
                dirac_terms.push(DiracTerm {
                    side: Chirality::Plus,
                    k: 2 * k + 1,
                    star: false,
                    coeff: s_c64(2 * k + 1),
                });
                dirac_terms.push(DiracTerm {
                    side: Chirality::Plus,
                    k: 2 * k + 1,
                    star: true,
                    coeff: s_c64(4 * m - 2 * k - 1),
                });
            }
        }
        Family::FourTwo => {
            for k in 1..=(m - 2) {
                dirac_terms.push(DiracTerm {
                    side: Chirality::Plus,
                    k: 2 * k + 1,
                    star: false,
                    coeff: s_c64(2 * k + 1),
                });
                dirac_terms.push(DiracTerm {
                    side: Chirality::Plus,
                    k: 2 * k + 1,
                    star: true,
                    coeff: s_c64(4 * m - 2 * k - 3),
                });
            }
            dirac_terms.push(DiracTerm {
                side: Chirality::Plus,
                k: 2 * m - 1,
                star: false,
                coeff: s_c64(2 * m - 1),
            });
            dirac_terms.push(DiracTerm {
                side: Chirality::Minus,
                k: 2 * m - 1,
                star: true,
                coeff: s_c64(2 * m - 1),
            });
            for k in m..=(2 * m - 3) {
                dirac_terms.push(DiracTerm {
                    side: Chirality::Minus,
                    k: 2 * k + 1,
                    star: false,
                    coeff: s_c64(2 * k + 1),
                });
                dirac_terms.push(DiracTerm {
                    side: Chirality::Minus,
                    k: 2 * k + 1,
                    star: true,
                    coeff: s_c64(4 * m - 2 * k - 3),
                });
            }
        }
    }
    let targets_plus = iso_degrees(n, Chirality::Plus);
    let targets_minus = if family == Family::FourTwo {
        Some(iso_degrees(n, Chirality::Minus))
    } else {
        None
    };
    let curv_terms = derive_curv_terms(
        n,
        &dirac_terms,
        &targets_plus,
        targets_minus.as_deref(),
    );
    let conn_plus = ConnTerm {
        coeff: c64(1, 0),
        star: false,
        dual_project: family == Family::Four && m == 1,
    };
    let conn_minus = if family == Family::FourTwo {
        // (1/2) c(F_B) on the minus spinors transfers to the degree-(n-2)
        // target through the Hodge phase, giving (-1)^{m+1} i * (*F_B).
        let sign = if (m + 1) % 2 == 0 { 1 } else { -1 };
        Some(ConnTerm {
            coeff: c64(0, sign),
            star: true,
            dual_project: false,
        })
    } else {
        None
    };
    DimCase {
        n,
        m,
        family,
        beta_degrees,
        dirac_terms,
        curv_terms,
        conn_plus,
        conn_minus,
        targets_plus,
        targets_minus,
    }
}

/// Derives the curvature tables from the Dirac couplings (see module docs).
fn derive_curv_terms(
    n: usize,
    dirac: &[DiracTerm],
    targets_plus: &[IsoDegree],
    targets_minus: Option<&[IsoDegree]>,
) -> Vec<CurvTerm> {
    let mut raw: Vec<CurvTerm> = Vec::new();
    for t in dirac {
        let targets: &[IsoDegree] = match t.side {
            Chirality::Plus => targets_plus,
            Chirality::Minus => targets_minus.expect("minus coupling without minus targets"),
        };
        let d = if t.star { n - t.k } else { t.k };
        let mu = t.coeff;
        let eta_d = eta(d) as f64;
        let wedge = mu - mu.conj() * eta_d;
        let co = mu + mu.conj() * eta_d;
        for (diff, coeff, raw_degree) in [
            (DiffOp::D, wedge, d + 1),
            (DiffOp::Cod, co, d.wrapping_sub(1)),
        ] {
            if coeff == Complex64::new(0.0, 0.0) || raw_degree > n {
                continue;
            }
            let hit = targets.iter().find(|t| t.k == raw_degree);
            if let Some(iso) = hit {
                raw.push(CurvTerm {
                    side: t.side,
                    k: t.k,
                    pre_star: t.star,
                    diff,
                    post_star: false,
                    dual_project: iso.dual_project,
                    coeff,
                    target_degree: raw_degree,
                });
            } else {
                // transfer through the Hodge star:
                // c(X) = (-1)^{p(n-p)} hodge_phase(n, n-p, chi) c(*X)
                let p = raw_degree;
                let q = n - p;
                let iso = targets
                    .iter()
                    .find(|t| t.k == q)
                    .unwrap_or_else(|| panic!("transfer degree {q} not a target (n={n})"));
                let chi = t.side;
                let lam: Complex64 = crate::clifford::hodge_phase(n, q, chi);
                let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
                raw.push(CurvTerm {
                    side: t.side,
                    k: t.k,
                    pre_star: t.star,
                    diff,
                    post_star: true,
                    dual_project: iso.dual_project,
                    coeff: coeff * lam * sign,
                    target_degree: q,
                });
            }
        }
    }
    let canon: Vec<CurvTerm> = raw.iter().map(|t| canonicalize_term(n, t)).collect();
    merge_terms(canon)
}

/// Rewrites a term so that the differential acts on `beta_k` itself (no
/// pre-star), using `delta = (-1)^{n(p+1)+1} * d *` on p-forms. The result
/// is the unique canonical encoding compared against hand tables.
pub fn canonicalize_term(n: usize, t: &CurvTerm) -> CurvTerm {
    if !t.pre_star {
        return *t;
    }
    let p = t.k;
    let pow = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
    let (diff, post_star, sign) = match (t.diff, t.post_star) {
        // *(d(*g)) = (-1)^{n(p+1)+1} delta g
        (DiffOp::D, true) => (DiffOp::Cod, false, pow(n * (p + 1) + 1)),
        // d(*g) = (-1)^{(n-p+1)(p-1) + n(p+1)+1} *(delta g)
        (DiffOp::D, false) => (
            DiffOp::Cod,
            true,
            pow((n - p + 1) * (p - 1) + n * (p + 1) + 1),
        ),
        // delta(*g) = (-1)^{n(n-p+1)+1 + p(n-p)} *(d g)
        (DiffOp::Cod, false) => (DiffOp::D, true, pow(n * (n - p + 1) + 1 + p * (n - p))),
        // *(delta(*g)) = previous times ** on (p+1)-forms
        (DiffOp::Cod, true) => (
            DiffOp::D,
            false,
            pow(n * (n - p + 1) + 1 + p * (n - p) + (p + 1) * (n - p - 1)),
        ),
    };
    CurvTerm {
        side: t.side,
        k: t.k,
        pre_star: false,
        diff,
        post_star,
        dual_project: t.dual_project,
        coeff: t.coeff * sign,
        target_degree: t.target_degree,
    }
}

fn term_key(t: &CurvTerm) -> (i64, usize, bool, DiffOp, bool, bool) {
    (
        t.side.sign(),
        t.k,
        t.pre_star,
        t.diff,
        t.post_star,
        t.dual_project,
    )
}

fn merge_terms(terms: Vec<CurvTerm>) -> Vec<CurvTerm> {
    let mut map: BTreeMap<(i64, usize, bool, DiffOp, bool, bool), CurvTerm> = BTreeMap::new();
    for t in terms {
        match map.get_mut(&term_key(&t)) {
            Some(acc) => {
                assert_eq!(acc.target_degree, t.target_degree);
                acc.coeff += t.coeff;
            }
            None => {
                map.insert(term_key(&t), t);
            }
        }
    }
    map.into_values()
        .filter(|t| t.coeff != Complex64::new(0.0, 0.0))
        .collect()
}

/// Sorted copy for order-insensitive comparison.
pub fn sorted_terms(terms: &[CurvTerm]) -> Vec<CurvTerm> {
    let mut v = terms.to_vec();
    v.sort_by_key(term_key);
    v
}

/// Hand-expanded reference tables in low dimensions, used to pin the
/// machine-derived ones. Written in the canonical encoding of
/// [`canonicalize_term`].
pub mod pinned {
    use super::*;

    pub fn dirac_table(n: usize) -> Vec<DiracTerm> {
        let p = Chirality::Plus;
        let mi = Chirality::Minus;
        let t = |side, k, star, re, im| DiracTerm {
            side,
            k,
            star,
            coeff: c64(re, im),
        };
        match n {
            // D = D_A + i c(*b3)
            3 => vec![t(p, 3, true, 0, 1)],
            // D = D_A + c(b3) - c(*b3) + i c(*b5)
            5 => vec![
                t(p, 3, false, 1, 0),
                t(p, 3, true, -1, 0),
                t(p, 5, true, 0, 1),
            ],
            // D_+ = D_A + c(b3) on the plus side, D_- = D_B + c(*b3)
            6 => vec![t(p, 3, false, 1, 0), t(mi, 3, true, 1, 0)],
            // D = D_A + c(b3) + i c(*b3), i.e. (1+i) c(b3) on plus spinors
            8 => vec![t(p, 3, false, 1, 0), t(p, 3, true, 0, 1)],
            _ => panic!("no pinned Dirac table for n={n}"),
        }
    }

    pub fn curv_table(n: usize) -> Vec<CurvTerm> {
        let p = Chirality::Plus;
        let mi = Chirality::Minus;
        let t = |side, k, diff, post, dual, re, im, target| CurvTerm {
            side,
            k,
            pre_star: false,
            diff,
            post_star: post,
            dual_project: dual,
            coeff: c64(re, im),
            target_degree: target,
        };
        match n {
            // F_A - 2i d*b3 = q(phi)
            3 => vec![t(p, 3, DiffOp::Cod, false, false, 0, -2, 2)],
            // F_A - 2i d*b3 + 2 d b3 + 2 d*b5 = q(phi)
            5 => vec![
                t(p, 3, DiffOp::Cod, false, false, 0, -2, 2),
                t(p, 3, DiffOp::D, false, false, 2, 0, 4),
                t(p, 5, DiffOp::Cod, false, false, 2, 0, 4),
            ],
            // plus: F_A - 2i *(d b3) = q(phi)
            // minus: -i *F_B - 2 *(d* b3) = q(psi)
            6 => vec![
                t(p, 3, DiffOp::D, true, false, 0, -2, 2),
                t(mi, 3, DiffOp::Cod, true, false, -2, 0, 4),
            ],
            // F_A + 2i d*b3 + 2 d+ b3 = q(phi)
            8 => vec![
                t(p, 3, DiffOp::Cod, false, false, 0, 2, 2),
                t(p, 3, DiffOp::D, false, true, 2, 0, 4),
            ],
            _ => panic!("no pinned curvature table for n={n}"),
        }
    }

    /// Coefficient of `*F_B` in the minus equation for n = 6.
    pub fn conn_minus_6() -> Complex64 {
        c64(0, -1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{masks_of_degree, CliffordRep};
    use crate::scalar::GaussianRational;

    type G = GaussianRational;

    #[test]
    fn families_and_state_shapes() {
        let c3 = build_case(3);
        assert_eq!((c3.family, c3.m, c3.beta_degrees.clone()), (Family::Odd, 1, vec![3]));
        let c8 = build_case(8);
        assert_eq!((c8.family, c8.m, c8.beta_degrees.clone()), (Family::Four, 2, vec![3]));
        let c6 = build_case(6);
        assert_eq!(
            (c6.family, c6.m, c6.beta_degrees.clone()),
            (Family::FourTwo, 2, vec![3])
        );
        assert!(c6.two_sided());
        let c10 = build_case(10);
        assert_eq!(c10.beta_degrees, vec![3, 5, 7]);
        let c12 = build_case(12);
        assert_eq!(c12.beta_degrees, vec![3, 5]);
        let c9 = build_case(9);
        assert_eq!(c9.beta_degrees, vec![3, 5, 7, 9]);
    }

    #[test]
    fn derived_tables_match_pinned() {
        for n in [3usize, 5, 6, 8] {
            let case = build_case(n);
            assert_eq!(
                sorted_terms_dirac(&case.dirac_terms),
                sorted_terms_dirac(&pinned::dirac_table(n)),
                "dirac n={n}"
            );
            assert_eq!(
                sorted_terms(&case.curv_terms),
                sorted_terms(&pinned::curv_table(n)),
                "curvature n={n}"
            );
        }
        let c6 = build_case(6);
        let cm = c6.conn_minus.unwrap();
        assert_eq!(cm.coeff, pinned::conn_minus_6());
        assert!(cm.star);
    }

    fn sorted_terms_dirac(terms: &[DiracTerm]) -> Vec<DiracTerm> {
        let mut v = terms.to_vec();
        v.sort_by_key(|t| (t.side.sign(), t.k, t.star));
        v
    }

    #[test]
    fn canonicalize_agrees_symbolically() {
        // Evaluate both encodings with d -> xi ^ . and delta -> -i_xi . on a
        // random exact form; they must agree for every n, k, flag pattern.
        let xi: Vec<G> = (0..12)
            .map(|j| G::from_parts(2 * j as i64 - 5, 3, 0, 1))
            .collect();
        for n in 3..=10 {
            let xi = &xi[..n];
            for k in (1..n).step_by(2) {
                for mask in masks_of_degree(n, k).into_iter().take(4) {
                    let beta = FormValue::<G>::from_mask(n, mask, G::from_parts(5, 7, 0, 1));
                    for pre in [false, true] {
                        for diff in [DiffOp::D, DiffOp::Cod] {
                            for post in [false, true] {
                                let t = CurvTerm {
                                    side: Chirality::Plus,
                                    k,
                                    pre_star: pre,
                                    diff,
                                    post_star: post,
                                    dual_project: false,
                                    coeff: c64(1, 0),
                                    target_degree: 0,
                                };
                                let c = canonicalize_term(n, &t);
                                let a = eval_symbol(&t, xi, &beta);
                                let b = eval_symbol(&c, xi, &beta);
                                assert_eq!(a, b, "n={n} k={k} pre={pre} {diff:?} post={post}");
                            }
                        }
                    }
                }
            }
        }
    }

    fn eval_symbol(t: &CurvTerm, xi: &[G], beta: &FormValue<G>) -> FormValue<G> {
        let mut f = if t.pre_star { beta.hodge() } else { beta.clone() };
        f = match t.diff {
            DiffOp::D => f.wedge_covector(xi),
            DiffOp::Cod => f.contract_covector(xi).neg(),
        };
        if t.post_star {
            f = f.hodge();
        }
        let c = t.coeff;
        assert!(c.re.fract() == 0.0 && c.im.fract() == 0.0);
        f.scale(&G::from_parts(c.re as i64, 1, c.im as i64, 1))
    }

    #[test]
    fn beta_total_dim8_is_one_plus_i() {
        // On plus spinors of dim 8, c(*b3) = c(b3), so the coupling acts as
        // (1+i) c(b3).
        let rep = CliffordRep::<G>::build(8);
        let case = build_case(8);
        let b3 = FormValue::<G>::term(8, &[0, 3, 6], G::from_i64(2))
            .add(&FormValue::term(8, &[1, 2, 7], G::from_i64(-1)));
        let mut beta = BTreeMap::new();
        beta.insert(3usize, b3.clone());
        let total = case.beta_total(Chirality::Plus, &beta);
        let lhs = rep.act_block(&total, Chirality::Plus, Chirality::Minus);
        let one_plus_i = G::one().add(&G::i());
        let rhs = rep
            .act_block(&b3, Chirality::Plus, Chirality::Minus)
            .scale(&one_plus_i);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn minus_connection_coefficient() {
        assert_eq!(build_case(6).conn_minus.unwrap().coeff, c64(0, -1));
        assert_eq!(build_case(10).conn_minus.unwrap().coeff, c64(0, 1));
    }

    #[test]
    fn table_degrees_close() {
        for n in 3..=10 {
            let case = build_case(n);
            for t in &case.curv_terms {
                let tset = case.targets(t.side);
                assert!(
                    tset.iter().any(|d| d.k == t.target_degree),
                    "n={n} term {t:?}"
                );
                assert_eq!(t.target_degree % 2, 0);
            }
            // every beta degree is coupled on some side
            for &k in &case.beta_degrees {
                assert!(case.dirac_terms.iter().any(|t| t.k == k), "n={n} k={k}");
            }
        }
    }
}
