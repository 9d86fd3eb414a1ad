//! Second-order identities for the coupled Dirac operators: the first-order
//! perturbation of the spin connection, the zeroth-order remainder and its
//! closed forms in low dimensions, Clifford conjugation identities, and
//! sup-norm defect checks of the curvature groupings on band-limited torus
//! fields.

use crate::clifford::{masks_of_degree, Chirality, CliffordRep, FormValue, Mask};
use crate::mat::CMat;
use crate::state::{spinor_source, spinor_target, SideKernels, SwState, SwSystem};
use crate::tol;
use crate::torus::{sample, FormField, GridField, SpinorField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The 1-form part `B = sum_j e_j (x) B_j` of the perturbed spin connection
/// induced by a coupling form.
pub struct ConnectionPerturbation {
    pub n: usize,
    /// Coefficient of `e_j`; each entry is skew-Hermitian.
    pub bj: Vec<CMat<Complex64>>,
}

impl ConnectionPerturbation {
    /// Largest deviation of any component from skew-Hermitian.
    pub fn skew_defect(&self) -> f64 {
        self.bj
            .iter()
            .map(|b| b.add(&b.adjoint()).max_abs())
            .fold(0.0, f64::max)
    }
}

/// `B_j = -1/2 (c(e_j) c(beta) + c(beta)^* c(e_j))` for a (possibly
/// inhomogeneous, complex) coupling form.
pub fn b_term(
    rep: &CliffordRep<Complex64>,
    beta_total: &FormValue<Complex64>,
) -> ConnectionPerturbation {
    assert_eq!(rep.n(), beta_total.n(), "form dimension mismatch");
    let c = rep.act(beta_total);
    let ca = c.adjoint();
    let half = c64(-0.5, 0.0);
    let bj = (0..rep.n())
        .map(|j| {
            let g = rep.gen(j);
            g.mul(&c).add(&ca.mul(g)).scale(&half)
        })
        .collect();
    ConnectionPerturbation { n: rep.n(), bj }
}

/// A random rotation matrix built as a product of Givens rotations,
/// row-major: `rot[i][j]` is the entry in row i, column j.
pub fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut rot = vec![vec![0.0f64; n]; n];
    for (i, row) in rot.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for p in 0..n {
        for q in (p + 1)..n {
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let (s, c) = th.sin_cos();
            for col in 0..n {
                let a = rot[p][col];
                let b = rot[q][col];
                rot[p][col] = c * a - s * b;
                rot[q][col] = s * a + c * b;
            }
        }
    }
    rot
}

/// Frame independence of the connection perturbation: build the components
/// in the rotated coframe `f_i = sum_j rot[j][i] e_j`, transform back, and
/// compare with the components in the standard frame.
pub fn frame_rotation_defect(
    rep: &CliffordRep<Complex64>,
    beta_total: &FormValue<Complex64>,
    rot: &[Vec<f64>],
) -> f64 {
    let n = rep.n();
    let rank = rep.rank();
    let base = b_term(rep, beta_total);
    let c = rep.act(beta_total);
    let ca = c.adjoint();
    let half = c64(-0.5, 0.0);
    let tilde: Vec<CMat<Complex64>> = (0..n)
        .map(|i| {
            let mut g = CMat::zeros(rank, rank);
            for (j, row) in rot.iter().enumerate() {
                g = g.add(&rep.gen(j).scale(&c64(row[i], 0.0)));
            }
            g.mul(&c).add(&ca.mul(&g)).scale(&half)
        })
        .collect();
    let mut worst = 0.0f64;
    for (j, row) in rot.iter().enumerate() {
        let mut acc = CMat::zeros(rank, rank);
        for (i, t) in tilde.iter().enumerate() {
            acc = acc.add(&t.scale(&c64(row[i], 0.0)));
        }
        worst = worst.max(acc.distance(&base.bj[j]));
    }
    worst
}

/// The zeroth-order remainder as a matrix:
/// `Q = c(beta)^* c(beta) + 1/4 sum_j (c(e_j) c(beta) + c(beta)^* c(e_j))^2`.
/// Hermitian for every coupling form.
pub fn q_beta(rep: &CliffordRep<Complex64>, beta_total: &FormValue<Complex64>) -> CMat<Complex64> {
    assert_eq!(rep.n(), beta_total.n(), "form dimension mismatch");
    let c = rep.act(beta_total);
    let ca = c.adjoint();
    let mut q = ca.mul(&c);
    let quarter = c64(0.25, 0.0);
    for j in 0..rep.n() {
        let g = rep.gen(j);
        let t = g.mul(&c).add(&ca.mul(g));
        q = q.add(&t.mul(&t).scale(&quarter));
    }
    q
}

/// The total coupling form for which the closed-form remainder below is
/// stated, assembled from the degree components:
/// `i *beta3` in dimension 3; `beta3 - *beta3 + i *beta5` in dimension 5;
/// plain `beta3` in dimension 6; `(1+i) beta3` in dimension 8.
pub fn matching_total(
    n: usize,
    betas: &BTreeMap<usize, FormValue<Complex64>>,
) -> FormValue<Complex64> {
    let b3 = betas
        .get(&3)
        .cloned()
        .unwrap_or_else(|| FormValue::zero(n));
    match n {
        3 => b3.hodge().scale(&I),
        5 => {
            let b5 = betas
                .get(&5)
                .cloned()
                .unwrap_or_else(|| FormValue::zero(n));
            b3.sub(&b3.hodge()).add(&b5.hodge().scale(&I))
        }
        6 => b3,
        8 => b3.scale(&(ONE + I)),
        _ => panic!("no closed-form remainder is available in dimension {n}"),
    }
}

/// Closed form of the remainder in the dimensions where one exists:
/// `|beta3|^2` (dim 3), `c(beta3 - *beta5)^2 - 4|beta3|^2` (dim 5),
/// `-2|beta3|^2` (dim 6), `-2 c(beta3)^2 - 4|beta3|^2` (dim 8). Equals
/// `q_beta` evaluated on `matching_total` of the same components.
pub fn q_beta_closed(
    rep: &CliffordRep<Complex64>,
    betas: &BTreeMap<usize, FormValue<Complex64>>,
) -> CMat<Complex64> {
    let n = rep.n();
    let rank = rep.rank();
    let id = CMat::<Complex64>::identity(rank);
    let b3 = betas
        .get(&3)
        .cloned()
        .unwrap_or_else(|| FormValue::zero(n));
    let n3 = b3.norm_sqr_c64();
    match n {
        3 => id.scale(&c64(n3, 0.0)),
        5 => {
            let b5 = betas
                .get(&5)
                .cloned()
                .unwrap_or_else(|| FormValue::zero(n));
            let a = rep.act(&b3.sub(&b5.hodge()));
            a.mul(&a).sub(&id.scale(&c64(4.0 * n3, 0.0)))
        }
        6 => id.scale(&c64(-2.0 * n3, 0.0)),
        8 => {
            let a = rep.act(&b3);
            a.mul(&a)
                .scale(&c64(-2.0, 0.0))
                .sub(&id.scale(&c64(4.0 * n3, 0.0)))
        }
        _ => panic!("no closed-form remainder is available in dimension {n}"),
    }
}

/// `sum_j c(e_j) c(f)^power c(e_j)` for a homogeneous degree-3 form.
/// At power 1 this is `-c(f)` in dimension 5 and `0` in dimension 6; at
/// power 2 it is `3c(f)^2 - 8|f|^2` (dim 5) and `2c(f)^2 - 8|f|^2` (dim 6).
pub fn conj_sum(
    rep: &CliffordRep<Complex64>,
    f: &FormValue<Complex64>,
    power: u32,
) -> CMat<Complex64> {
    assert_eq!(f.degrees(), vec![3], "homogeneous degree-3 form expected");
    assert!(power == 1 || power == 2, "power must be 1 or 2");
    let a = rep.act(f);
    let ap = if power == 1 { a.clone() } else { a.mul(&a) };
    let rank = rep.rank();
    let mut out = CMat::zeros(rank, rank);
    for j in 0..rep.n() {
        let g = rep.gen(j);
        out = out.add(&g.mul(&ap).mul(g));
    }
    out
}

/// Family-form and master-form second-order defects of one equation side,
/// computed from one shared set of exact pointwise values.
#[derive(Debug, Clone, Copy)]
pub struct WeitzDefects {
    /// Defect of the grouping with the case's curvature coefficient form.
    pub family: f64,
    /// Defect of the frame-level grouping with the plain connection
    /// curvature and the symmetrized derivative couplings.
    pub master: f64,
}

/// Evaluates both groupings of `D*D phi - nabla*nabla phi - Q phi` against
/// their middle terms and returns the sup-norm defects over the value grid.
/// All ingredients are exact values of band-limited fields, so the defects
/// measure the operator identities themselves (up to roundoff).
pub fn weitz_defects(
    sys: &SwSystem,
    state: &SwState,
    side: Chirality,
    test: &SpinorField,
) -> WeitzDefects {
    let n = sys.n();
    let cb = sys.coefficient_band(state, side);
    // pointwise values are exact on any grid; use more sample points where
    // grids are cheap, fewer where they grow geometrically
    let npts = if n >= 7 { 3 } else { 5 };
    let ker = SideKernels::new(sys, state, side, npts);
    let phi = ker.spinor_grids(test);

    // D*D phi: alias-free extraction of D phi, adjoint evaluated pointwise
    let dphi = sys.dirac_apply(state, side, test, test.band() + cb);
    let ddphi = sys.dirac_adjoint_values(state, side, &dphi, npts);

    let lap = ker.covariant_laplacian_expanded(test, true);
    let qphi = ker.q_apply(&phi);

    // family middle term: the case's curvature coefficient form
    let fam_mid = ker.act_form_field(&sys.curvature_form_field(state, side), &phi);

    // master middle term: plain connection curvature plus the symmetrized
    // derivative couplings c(e_j) c(d_j beta) - c(d_j beta)^* c(e_j)
    let mut mast_mid = ker.act_form_field(&sys.connection_curvature(state, side), &phi);
    let src = spinor_source(n, side);
    let tgt = spinor_target(n, src);
    for j in 0..n {
        let t1 = ker.cj(j, tgt, &ker.coupling_deriv(j, &phi, false));
        let t2 = ker.coupling_deriv(j, &ker.cj(j, src, &phi), true);
        for ((o, a), b) in mast_mid.iter_mut().zip(&t1).zip(&t2) {
            o.axpy(ONE, a);
            o.axpy(-ONE, b);
        }
    }

    let half = c64(0.5, 0.0);
    let defect_of = |mid: &[GridField]| -> f64 {
        let mut worst = 0.0f64;
        for r in 0..phi.len() {
            let mut d = ddphi[r].clone();
            d.axpy(-ONE, &lap[r]);
            d.axpy(-half, &mid[r]);
            d.axpy(-ONE, &qphi[r]);
            worst = worst.max(d.sup_abs());
        }
        worst
    };
    WeitzDefects {
        family: defect_of(&fam_mid),
        master: defect_of(&mast_mid),
    }
}

/// The family-form defect alone (the normative per-dimension statement).
pub fn weitz_defect(sys: &SwSystem, state: &SwState, side: Chirality, test: &SpinorField) -> f64 {
    weitz_defects(sys, state, side, test).family
}

fn form_value_at(comps: &[(Mask, GridField)], n: usize, p: usize) -> FormValue<Complex64> {
    let mut v = FormValue::zero(n);
    for (m, g) in comps {
        v.insert(*m, g.data()[p]);
    }
    v
}

/// Pointwise matrix defect of the exterior-derivative identity on a
/// band-limited homogeneous form field: compares `c(d gamma)` and
/// `c(d* gamma)` against the symmetrized sums
/// `1/2 sum_j (c(e_j) c(d_j gamma) +- (-1)^k c(d_j gamma) c(e_j))`.
/// Returns the (derivative, coderivative) sup defects.
pub fn clifford_derivative_defect(
    rep: &CliffordRep<Complex64>,
    gamma: &FormField,
    npts: usize,
) -> (f64, f64) {
    let n = rep.n();
    assert_eq!(gamma.n(), n, "form dimension mismatch");
    let degs = gamma.degrees();
    assert_eq!(degs.len(), 1, "homogeneous form field expected");
    let k = degs[0];
    let sign = if k % 2 == 0 { ONE } else { -ONE };
    let grids = |f: &FormField| -> Vec<(Mask, GridField)> {
        f.comps().map(|(m, c)| (m, c.to_grid(npts))).collect()
    };
    let dg = grids(&gamma.ext_d());
    let cg = grids(&gamma.codiff());
    let dj: Vec<Vec<(Mask, GridField)>> = (0..n)
        .map(|j| {
            gamma
                .comps()
                .map(|(m, c)| (m, c.deriv(j).to_grid(npts)))
                .collect()
        })
        .collect();
    let total = npts.pow(n as u32);
    let half = c64(0.5, 0.0);
    let rank = rep.rank();
    let (mut wd, mut wc) = (0.0f64, 0.0f64);
    for p in 0..total {
        let lhs_d = rep.act(&form_value_at(&dg, n, p));
        let lhs_c = rep.act(&form_value_at(&cg, n, p));
        let mut rhs_d = CMat::zeros(rank, rank);
        let mut rhs_c = CMat::zeros(rank, rank);
        for j in 0..n {
            let a = rep.act(&form_value_at(&dj[j], n, p));
            let ga = rep.gen(j).mul(&a);
            let ag = a.mul(rep.gen(j)).scale(&sign);
            rhs_d = rhs_d.add(&ga.add(&ag));
            rhs_c = rhs_c.add(&ga.sub(&ag));
        }
        wd = wd.max(lhs_d.distance(&rhs_d.scale(&half)));
        wc = wc.max(lhs_c.distance(&rhs_c.scale(&half)));
    }
    (wd, wc)
}

/// Defect of the connection-change identity for the rough Laplacian:
/// the perturbed Laplacian minus the plain one (both computed by literal
/// composition through alias-free mode extraction) against
/// `-2 sum_j B_j nabla_j - sum_j ((d_j B_j) + B_j^2)` applied to a test
/// spinor and assembled from coupling passes.
pub fn change_laplacian_defect(
    sys: &SwSystem,
    state: &SwState,
    side: Chirality,
    test: &SpinorField,
) -> f64 {
    let n = sys.n();
    let cb = sys.coefficient_band(state, side);
    let npts = 2 * (test.band() + cb) + 1;
    let ker = SideKernels::new(sys, state, side, npts);
    let phi = ker.spinor_grids(test);
    let lhs_full = ker.covariant_laplacian(test, true);
    let lhs_plain = ker.covariant_laplacian(test, false);
    let w = ker.covariant(test, false);
    let u = ker.coupling(&phi, false);
    let src = spinor_source(n, side);
    let tgt = spinor_target(n, src);
    let mut rhs = ker.zeros();
    for (j, wj) in w.iter().enumerate() {
        // -2 B_j (nabla_A phi)_j
        let bw = ker.b_apply(j, wj, &ker.coupling(wj, false));
        // -(d_j B_j) phi = +1/2 (c_j C' phi + C'^* c_j phi)
        let t1 = ker.cj(j, tgt, &ker.coupling_deriv(j, &phi, false));
        let t2 = ker.coupling_deriv(j, &ker.cj(j, src, &phi), true);
        // -B_j^2 phi
        let bphi = ker.b_apply(j, &phi, &u);
        let bb = ker.b_apply(j, &bphi, &ker.coupling(&bphi, false));
        for (r, o) in rhs.iter_mut().enumerate() {
            o.axpy(c64(-2.0, 0.0), &bw[r]);
            o.axpy(c64(0.5, 0.0), &t1[r]);
            o.axpy(c64(0.5, 0.0), &t2[r]);
            o.axpy(-ONE, &bb[r]);
        }
    }
    let mut worst = 0.0f64;
    for r in 0..rhs.len() {
        let mut d = lhs_full[r].clone();
        d.axpy(-ONE, &lhs_plain[r]);
        d.axpy(-ONE, &rhs[r]);
        worst = worst.max(d.sup_abs());
    }
    worst
}

/// Pointwise defect of `1/2 Laplacian |phi|^2 = Re<nabla*nabla phi, phi>
/// - |nabla phi|^2` for the perturbed connection.
pub fn laplacian_nabla_defect(
    sys: &SwSystem,
    state: &SwState,
    side: Chirality,
    test: &SpinorField,
) -> f64 {
    let cb = sys.coefficient_band(state, side);
    let npts = 2 * (test.band() + cb) + 1;
    let ker = SideKernels::new(sys, state, side, npts);
    let rank = test.rank();
    let phi = ker.spinor_grids(test);
    let lap = ker.covariant_laplacian(test, true);
    let w = ker.covariant(test, true);
    // Laplacian of |phi|^2, expanded pointwise:
    // sum_r (2 Re(conj(phi_r) lap(phi_r)) - 2 sum_j |d_j phi_r|^2)
    let total = phi[0].data().len();
    let mut defect = 0.0f64;
    let flat_lap: Vec<GridField> = (0..rank)
        .map(|r| test.comp(r).laplacian().to_grid(npts))
        .collect();
    let dphi: Vec<Vec<GridField>> = (0..sys.n())
        .map(|j| {
            (0..rank)
                .map(|r| test.comp(r).deriv(j).to_grid(npts))
                .collect()
        })
        .collect();
    for p in 0..total {
        let mut lhs = 0.0f64;
        let mut rhs = 0.0f64;
        for r in 0..rank {
            let v = phi[r].data()[p];
            lhs += (v.conj() * flat_lap[r].data()[p]).re;
            for dj in &dphi {
                lhs -= dj[r].data()[p].norm_sqr();
            }
            rhs += (lap[r].data()[p] * v.conj()).re;
            for wj in &w {
                rhs -= wj[r].data()[p].norm_sqr();
            }
        }
        defect = defect.max((0.5 * 2.0 * lhs - rhs).abs());
    }
    defect
}

/// Pointwise defect of unitarity of the perturbed connection:
/// `d_j <phi, phi> = 2 Re <(nabla phi)_j, phi>` for every axis.
pub fn unitarity_defect(
    sys: &SwSystem,
    state: &SwState,
    side: Chirality,
    test: &SpinorField,
) -> f64 {
    let npts = 2 * test.band() + 1;
    let ker = SideKernels::new(sys, state, side, npts);
    let rank = test.rank();
    let phi = ker.spinor_grids(test);
    let w = ker.covariant(test, true);
    let total = phi[0].data().len();
    let mut defect = 0.0f64;
    for (j, wj) in w.iter().enumerate() {
        let dphi: Vec<GridField> = (0..rank)
            .map(|r| test.comp(r).deriv(j).to_grid(npts))
            .collect();
        for p in 0..total {
            let mut lhs = 0.0f64;
            let mut rhs = 0.0f64;
            for r in 0..rank {
                let v = phi[r].data()[p].conj();
                lhs += 2.0 * (v * dphi[r].data()[p]).re;
                rhs += 2.0 * (v * wj[r].data()[p]).re;
            }
            defect = defect.max((lhs - rhs).abs());
        }
    }
    defect
}

/// One verification record, serializable to JSON.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityRecord {
    pub identity: String,
    pub n: usize,
    pub defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityRecord {
    pub fn new(identity: impl Into<String>, n: usize, defect: f64, tolerance: f64) -> Self {
        IdentityRecord {
            identity: identity.into(),
            n,
            defect,
            tolerance,
            pass: defect <= tolerance,
        }
    }
}

/// Random real-coefficient homogeneous form value.
pub fn random_form_value<R: Rng>(
    n: usize,
    k: usize,
    amp: f64,
    rng: &mut R,
) -> FormValue<Complex64> {
    let mut f = FormValue::zero(n);
    for m in masks_of_degree(n, k) {
        f.insert(m, c64(amp * rng.gen_range(-1.0..1.0), 0.0));
    }
    f
}

/// Random complex form value mixing all odd degrees.
fn random_odd_form<R: Rng>(n: usize, rng: &mut R) -> FormValue<Complex64> {
    let mut f = FormValue::zero(n);
    for k in (1..=n).step_by(2) {
        for m in masks_of_degree(n, k) {
            f.insert(m, c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    f
}

/// Amplitude giving band-limited random fields pointwise values of order
/// one: mode coefficients add incoherently, so the pointwise size grows
/// like the square root of the mode count.
fn unit_amp(n: usize, band: usize) -> f64 {
    ((2 * band + 1) as f64).powf(-(n as f64) / 2.0)
}

fn side_name(base: &str, side: Chirality, two_sided: bool) -> String {
    if !two_sided {
        return base.to_string();
    }
    match side {
        Chirality::Plus => format!("{base}-plus"),
        Chirality::Minus => format!("{base}-minus"),
    }
}

fn sides_of(sys: &SwSystem) -> Vec<Chirality> {
    if sys.case.two_sided() {
        vec![Chirality::Plus, Chirality::Minus]
    } else {
        vec![Chirality::Plus]
    }
}

/// Runs the identity battery: algebraic lemmas at their stated dimensions,
/// the first-order and pointwise connection identities, and both
/// second-order defect forms for n in 3..=8 on `seeds` random band-1
/// states per dimension (both equation sides where the system is
/// two-sided). Deterministic for a fixed seed count.
pub fn weitz_battery(seeds: u64) -> Vec<IdentityRecord> {
    let mut out = Vec::new();

    // algebraic properties of the connection perturbation and remainder
    for n in 3..=8 {
        let rep = CliffordRep::<Complex64>::build(n);
        let mut rng = ChaCha8Rng::seed_from_u64(900 + n as u64);
        let beta = random_odd_form(n, &mut rng);
        let b = b_term(&rep, &beta);
        out.push(IdentityRecord::new(
            "b-term-skew",
            n,
            b.skew_defect(),
            tol::CLIFFORD,
        ));
        let rot = random_rotation(n, &mut rng);
        out.push(IdentityRecord::new(
            "b-term-frame-independence",
            n,
            frame_rotation_defect(&rep, &beta, &rot),
            tol::CLIFFORD,
        ));
        let q = q_beta(&rep, &beta);
        out.push(IdentityRecord::new(
            "q-beta-hermitian",
            n,
            q.sub(&q.adjoint()).max_abs(),
            tol::CLIFFORD,
        ));
    }

    // closed forms of the remainder
    for &n in &[3usize, 5, 6, 8] {
        let rep = CliffordRep::<Complex64>::build(n);
        let mut rng = ChaCha8Rng::seed_from_u64(950 + n as u64);
        let mut betas = BTreeMap::new();
        betas.insert(3, random_form_value(n, 3, 1.0, &mut rng));
        if n == 5 {
            betas.insert(5, random_form_value(n, 5, 1.0, &mut rng));
        }
        let total = matching_total(n, &betas);
        let defect = q_beta(&rep, &total).distance(&q_beta_closed(&rep, &betas));
        out.push(IdentityRecord::new(
            "q-beta-closed-form",
            n,
            defect,
            tol::QBETA,
        ));
    }

    // conjugation identities for degree-3 forms
    for &n in &[5usize, 6] {
        let rep = CliffordRep::<Complex64>::build(n);
        let mut rng = ChaCha8Rng::seed_from_u64(970 + n as u64);
        let f = random_form_value(n, 3, 1.0, &mut rng);
        let a = rep.act(&f);
        let id = CMat::<Complex64>::identity(rep.rank());
        let p1_target = if n == 5 {
            a.neg()
        } else {
            CMat::zeros(rep.rank(), rep.rank())
        };
        out.push(IdentityRecord::new(
            "conjugation-first-power",
            n,
            conj_sum(&rep, &f, 1).distance(&p1_target),
            tol::CLIFFORD,
        ));
        let coef = if n == 5 { 3.0 } else { 2.0 };
        let p2_target = a
            .mul(&a)
            .scale(&c64(coef, 0.0))
            .sub(&id.scale(&c64(8.0 * f.norm_sqr_c64(), 0.0)));
        out.push(IdentityRecord::new(
            "conjugation-second-power",
            n,
            conj_sum(&rep, &f, 2).distance(&p2_target),
            tol::CLIFFORD,
        ));
    }

    // exterior-derivative identity on band-limited form fields
    for &(n, ref ks) in &[(5usize, vec![1usize, 2, 3]), (6, vec![2, 3])] {
        let rep = CliffordRep::<Complex64>::build(n);
        let mut rng = ChaCha8Rng::seed_from_u64(980 + n as u64);
        let (mut wd, mut wc) = (0.0f64, 0.0f64);
        for &k in ks {
            let gamma = sample::real_form_field(n, 1, k, unit_amp(n, 1), &mut rng);
            let (d, c) = clifford_derivative_defect(&rep, &gamma, 3);
            wd = wd.max(d);
            wc = wc.max(c);
        }
        out.push(IdentityRecord::new(
            "clifford-derivative",
            n,
            wd,
            tol::EXT_DERIV,
        ));
        out.push(IdentityRecord::new(
            "clifford-coderivative",
            n,
            wc,
            tol::EXT_DERIV,
        ));
    }

    // first-order connection identities on random states
    for &n in &[3usize, 6] {
        let sys = SwSystem::new(n);
        let two = sys.case.two_sided();
        let amp = unit_amp(n, 1);
        for side in sides_of(&sys) {
            let mut rng = ChaCha8Rng::seed_from_u64(990 + n as u64);
            let state = sys.random_state(1, 0.5 * amp, &mut rng);
            let chi = spinor_source(n, side);
            let test = sample::spinor_field(n, 1, chi, sys.rep.chiral_rank(), amp, &mut rng);
            out.push(IdentityRecord::new(
                side_name("change-laplacian", side, two),
                n,
                change_laplacian_defect(&sys, &state, side, &test),
                tol::WEITZ,
            ));
            out.push(IdentityRecord::new(
                side_name("laplacian-nabla", side, two),
                n,
                laplacian_nabla_defect(&sys, &state, side, &test),
                tol::WEITZ,
            ));
            out.push(IdentityRecord::new(
                side_name("covariant-unitarity", side, two),
                n,
                unitarity_defect(&sys, &state, side, &test),
                tol::UNITARITY,
            ));
        }
    }

    // second-order defects across all dimension families
    for n in 3..=8 {
        let sys = SwSystem::new(n);
        let two = sys.case.two_sided();
        let amp = unit_amp(n, 1);
        for side in sides_of(&sys) {
            let side_ix = match side {
                Chirality::Plus => 0u64,
                Chirality::Minus => 1,
            };
            let chi = spinor_source(n, side);
            // flat check: zero state, random test spinor
            let mut rng = ChaCha8Rng::seed_from_u64(777 + n as u64);
            let zero = sys.zero_state(1);
            let test = sample::spinor_field(n, 1, chi, sys.rep.chiral_rank(), amp, &mut rng);
            let flat = weitz_defects(&sys, &zero, side, &test);
            out.push(IdentityRecord::new(
                side_name("weitzenboeck-flat", side, two),
                n,
                flat.family.max(flat.master),
                tol::DELTA_BETA,
            ));
            let mut fam = 0.0f64;
            let mut mast = 0.0f64;
            for s in 0..seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(n as u64 * 1000 + s * 10 + side_ix);
                let state = sys.random_state(1, 0.5 * amp, &mut rng);
                let test = sample::spinor_field(n, 1, chi, sys.rep.chiral_rank(), amp, &mut rng);
                let d = weitz_defects(&sys, &state, side, &test);
                fam = fam.max(d.family);
                mast = mast.max(d.master);
            }
            out.push(IdentityRecord::new(
                side_name("weitzenboeck-family", side, two),
                n,
                fam,
                tol::WEITZ,
            ));
            out.push(IdentityRecord::new(
                side_name("weitzenboeck-master", side, two),
                n,
                mast,
                tol::WEITZ,
            ));
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(n: usize) -> CliffordRep<Complex64> {
        CliffordRep::<Complex64>::build(n)
    }

    #[test]
    fn b_term_zero_and_skew() {
        let r = rep(5);
        let zero = b_term(&r, &FormValue::zero(5));
        for b in &zero.bj {
            assert_eq!(b.max_abs(), 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 3..=6 {
            let r = rep(n);
            let beta = random_odd_form(n, &mut rng);
            assert!(b_term(&r, &beta).skew_defect() < tol::CLIFFORD);
        }
    }

    #[test]
    fn b_term_vanishes_for_volume_phase_coupling() {
        // dimension 3 with the coupling i *beta3: c(beta) is i times a real
        // function, so the symmetrized products cancel axis by axis
        let r = rep(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut betas = BTreeMap::new();
        betas.insert(3, random_form_value(3, 3, 1.0, &mut rng));
        let total = matching_total(3, &betas);
        let b = b_term(&r, &total);
        for bj in &b.bj {
            assert!(bj.max_abs() < 1e-15);
        }
    }

    #[test]
    fn frame_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3usize, 5, 6] {
            let r = rep(n);
            let beta = random_odd_form(n, &mut rng);
            let rot = random_rotation(n, &mut rng);
            assert!(frame_rotation_defect(&r, &beta, &rot) < tol::CLIFFORD);
        }
    }

    #[test]
    fn q_beta_examples() {
        // beta = 0 gives 0
        assert_eq!(q_beta(&rep(4), &FormValue::zero(4)).max_abs(), 0.0);
        // dimension 3, coupling i *beta3: Q = |beta3|^2 Id
        let r3 = rep(3);
        let mut betas = BTreeMap::new();
        betas.insert(3, FormValue::term(3, &[0, 1, 2], c64(0.7, 0.0)));
        let q = q_beta(&r3, &matching_total(3, &betas));
        let want = CMat::<Complex64>::identity(2).scale(&c64(0.49, 0.0));
        assert!(q.distance(&want) < tol::QBETA);
        // dimension 6, plain unit 3-form: Q = -2 Id
        let r6 = rep(6);
        let e123 = FormValue::term(6, &[0, 1, 2], ONE);
        let q6 = q_beta(&r6, &e123);
        let want6 = CMat::<Complex64>::identity(8).scale(&c64(-2.0, 0.0));
        assert!(q6.distance(&want6) < tol::QBETA);
    }

    #[test]
    fn q_beta_closed_matches_q_beta() {
        for &n in &[3usize, 5, 6, 8] {
            let r = rep(n);
            let mut rng = ChaCha8Rng::seed_from_u64(40 + n as u64);
            let mut betas = BTreeMap::new();
            betas.insert(3, random_form_value(n, 3, 1.0, &mut rng));
            if n == 5 {
                betas.insert(5, random_form_value(n, 5, 1.0, &mut rng));
            }
            let total = matching_total(n, &betas);
            let defect = q_beta(&r, &total).distance(&q_beta_closed(&r, &betas));
            assert!(defect < tol::QBETA, "n={n}: defect {defect}");
        }
    }

    #[test]
    fn q_beta_closed_examples() {
        // dimension 5, unit basis 3-form, no 5-form: -3 Id
        let r5 = rep(5);
        let mut b5 = BTreeMap::new();
        b5.insert(3, FormValue::term(5, &[0, 1, 2], ONE));
        let want = CMat::<Complex64>::identity(4).scale(&c64(-3.0, 0.0));
        assert!(q_beta_closed(&r5, &b5).distance(&want) < tol::CLIFFORD);
        // dimension 5, 5-form only: |beta5|^2 Id, non-negative
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut b5o = BTreeMap::new();
        b5o.insert(5, random_form_value(5, 5, 1.0, &mut rng));
        let n5 = b5o[&5].norm_sqr_c64();
        let want5 = CMat::<Complex64>::identity(4).scale(&c64(n5, 0.0));
        assert!(q_beta_closed(&r5, &b5o).distance(&want5) < tol::CLIFFORD);
        assert!(n5 >= 0.0);
        // dimension 8, unit basis 3-form: -2 Id - 4 Id = -6 Id
        let r8 = rep(8);
        let mut b8 = BTreeMap::new();
        b8.insert(3, FormValue::term(8, &[0, 1, 2], ONE));
        let want8 = CMat::<Complex64>::identity(16).scale(&c64(-6.0, 0.0));
        assert!(q_beta_closed(&r8, &b8).distance(&want8) < tol::CLIFFORD);
    }

    #[test]
    fn conjugation_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r5 = rep(5);
        let f = random_form_value(5, 3, 1.0, &mut rng);
        let a = r5.act(&f);
        assert!(conj_sum(&r5, &f, 1).distance(&a.neg()) < tol::CLIFFORD);
        let want = a
            .mul(&a)
            .scale(&c64(3.0, 0.0))
            .sub(&CMat::identity(4).scale(&c64(8.0 * f.norm_sqr_c64(), 0.0)));
        assert!(conj_sum(&r5, &f, 2).distance(&want) < tol::CLIFFORD);
        let r6 = rep(6);
        let f6 = random_form_value(6, 3, 1.0, &mut rng);
        assert!(conj_sum(&r6, &f6, 1).max_abs() < tol::CLIFFORD);
    }

    #[test]
    fn dirac_coupling_total_matches_closed_form_total() {
        // the Dirac tables assemble the same total coupling form the closed
        // forms are stated for (single-sided dimensions)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[3usize, 5] {
            let sys = SwSystem::new(n);
            let mut betas = BTreeMap::new();
            betas.insert(3, random_form_value(n, 3, 1.0, &mut rng));
            if n == 5 {
                betas.insert(5, random_form_value(n, 5, 1.0, &mut rng));
            }
            let from_case = sys.case.beta_total(Chirality::Plus, &betas);
            let from_match = matching_total(n, &betas);
            let mut worst = 0.0f64;
            for m in 0..(1u32 << n) as Mask {
                worst = worst.max((from_case.coeff(m) - from_match.coeff(m)).norm());
            }
            assert!(worst < 1e-15, "n={n}: total mismatch {worst}");
        }
    }

    #[test]
    fn weitz_defect_flat_and_random_small() {
        // flat: zero state leaves only the Lichnerowicz cancellation
        let sys3 = SwSystem::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let test3 = sample::spinor_field(3, 1, Chirality::Plus, 2, 1.0, &mut rng);
        let d = weitz_defects(&sys3, &sys3.zero_state(1), Chirality::Plus, &test3);
        assert!(d.family < 1e-12 && d.master < 1e-12);
        // random band-1 state
        let state = sys3.random_state(1, 0.5, &mut rng);
        let d3 = weitz_defects(&sys3, &state, Chirality::Plus, &test3);
        assert!(d3.family < tol::WEITZ, "family defect {}", d3.family);
        assert!(d3.master < tol::WEITZ, "master defect {}", d3.master);
    }

    #[test]
    fn weitz_defect_no_coupling_dimension() {
        // dimension 4 carries no odd-form couplings; the family grouping
        // uses the projected curvature form, the master grouping the plain
        // one, and both act identically on positive spinors
        let sys = SwSystem::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let state = sys.random_state(1, 0.5, &mut rng);
        let test = sample::spinor_field(4, 1, Chirality::Plus, 2, 1.0, &mut rng);
        let d = weitz_defects(&sys, &state, Chirality::Plus, &test);
        assert!(d.family < tol::WEITZ, "family defect {}", d.family);
        assert!(d.master < tol::WEITZ, "master defect {}", d.master);
    }

    #[test]
    fn weitz_defect_two_sided() {
        let sys = SwSystem::new(6);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let state = sys.random_state(1, 0.5, &mut rng);
        for side in [Chirality::Plus, Chirality::Minus] {
            let chi = spinor_source(6, side);
            let test = sample::spinor_field(6, 1, chi, 4, 1.0, &mut rng);
            let d = weitz_defects(&sys, &state, side, &test);
            assert!(d.family < tol::WEITZ, "{side:?} family {}", d.family);
            assert!(d.master < tol::WEITZ, "{side:?} master {}", d.master);
        }
    }

    #[test]
    fn derivative_identity_on_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r5 = rep(5);
        for k in 1..=3 {
            let gamma = sample::real_form_field(5, 1, k, 1.0, &mut rng);
            let (d, c) = clifford_derivative_defect(&r5, &gamma, 3);
            assert!(d < tol::EXT_DERIV, "k={k} derivative defect {d}");
            assert!(c < tol::EXT_DERIV, "k={k} coderivative defect {c}");
        }
    }

    #[test]
    fn change_laplacian_small_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for &n in &[3usize, 6] {
            let sys = SwSystem::new(n);
            let state = sys.random_state(1, 0.5, &mut rng);
            for side in sides_of(&sys) {
                let chi = spinor_source(n, side);
                let test = sample::spinor_field(n, 1, chi, sys.rep.chiral_rank(), 1.0, &mut rng);
                let d = change_laplacian_defect(&sys, &state, side, &test);
                assert!(d < tol::WEITZ, "n={n} {side:?}: defect {d}");
            }
        }
    }

    #[test]
    fn battery_all_records_pass() {
        let records = weitz_battery(1);
        assert!(!records.is_empty());
        for r in &records {
            assert!(
                r.pass,
                "{} (n={}): defect {:.3e} > {:.1e}",
                r.identity, r.n, r.defect, r.tolerance
            );
        }
        // the battery covers every dimension in 3..=8
        for n in 3..=8 {
            assert!(records.iter().any(|r| r.n == n));
        }
    }

    #[test]
    fn pointwise_connection_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sys = SwSystem::new(3);
        let state = sys.random_state(1, 0.5, &mut rng);
        let test = sample::spinor_field(3, 1, Chirality::Plus, 2, 1.0, &mut rng);
        assert!(laplacian_nabla_defect(&sys, &state, Chirality::Plus, &test) < tol::WEITZ);
        assert!(unitarity_defect(&sys, &state, Chirality::Plus, &test) < tol::UNITARITY);
    }
}
