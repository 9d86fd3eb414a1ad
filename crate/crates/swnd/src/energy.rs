//! Total energy of the eight-dimensional system on the flat torus, its
//! first variation, and a preconditioned descent solver.
//!
//! For a state `(alpha, beta, phi)` with vanishing scalar curvature the
//! energy is
//!
//! ```text
//! E = int |nabla_{A,beta} phi|^2 + 2 int |F_A|^2
//!   + 8 int |codiff beta|^2 + 8 int |d beta|^2
//!   + (7/32) int |phi|^4 - 2 int |c(beta) phi|^2 - 4 int |beta|^2 |phi|^2
//! ```
//!
//! Completing squares through the integrated Weitzenboeck identity turns E
//! into the residual form `int |D phi|^2 + 2 int |r2|^2 + 4 int |r4|^2`
//! where `r2`, `r4` are the degree-2 and degree-4 curvature residuals, so E
//! is nonnegative and vanishes exactly on solutions.  `energy` evaluates
//! both expressions with alias-free quadrature, `energy_identity_defect`
//! compares them, `grad_energy` returns the exact first variation, and
//! `minimize` runs a first-order descent in a diagonal spectral metric with
//! an Armijo line search on the true energy.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{Chirality, Mask};
use crate::state::{
    axpy_weighted, spinor_from_grids, spinor_source, spinor_target, GenPerm, SwState, SwSystem,
};
use crate::tol;
use crate::torus::{FormField, GridField, ModeField, SpinorField};
use crate::weitz::IdentityRecord;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Weighted residual integrals: `dirac = int |D phi|^2`,
/// `curvature_two = 2 int |r2|^2`, `curvature_four = 4 int |r4|^2`.
/// Their sum equals the energy up to the scalar-curvature floor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualEnergy {
    pub dirac: f64,
    pub curvature_two: f64,
    pub curvature_four: f64,
}

impl ResidualEnergy {
    pub fn total(&self) -> f64 {
        self.dirac + self.curvature_two + self.curvature_four
    }
}

/// The energy split into its named terms together with the residual-side
/// evaluation.  `total` is the sum of the seven terms; `scalar_floor` is
/// `(1/14) int s^2`, identically zero on the flat torus but carried so the
/// identity `total - scalar_floor = residual_norms.total()` reads the same
/// as in the general statement.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub covariant_gradient: f64,
    pub connection_curvature: f64,
    pub beta_codifferential: f64,
    pub beta_derivative: f64,
    pub quartic: f64,
    pub clifford_coupling: f64,
    pub beta_phi: f64,
    pub scalar_floor: f64,
    pub residual_norms: ResidualEnergy,
}

impl EnergyBreakdown {
    pub fn term_sum(&self) -> f64 {
        self.covariant_gradient
            + self.connection_curvature
            + self.beta_codifferential
            + self.beta_derivative
            + self.quartic
            + self.clifford_coupling
            + self.beta_phi
    }
}

fn grid_mean_norm_sqr(g: &GridField) -> f64 {
    let len = g.data().len() as f64;
    g.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / len
}

/// Pointwise `|phi(x)|^2` over the component grids, as a real-valued grid.
fn spinor_norm_sqr_grid(grids: &[GridField]) -> GridField {
    let mut out = GridField::zeros(grids[0].n(), grids[0].npts());
    for g in grids {
        for (o, z) in out.data_mut().iter_mut().zip(g.data()) {
            *o += Complex64::new(z.norm_sqr(), 0.0);
        }
    }
    out
}

/// All coupling contributions on one side merged into a single rank x rank
/// kernel of coefficient grids, so that applying the full coupling or its
/// adjoint costs one pass per matrix entry instead of one per coupling.
struct MergedKernel {
    n: usize,
    rank: usize,
    npts: usize,
    entries: Vec<Option<GridField>>,
}

impl MergedKernel {
    fn build(sys: &SwSystem, state: &SwState, side: Chirality, npts: usize) -> Self {
        let n = sys.n();
        let rank = sys.rep.chiral_rank();
        // accumulate each entry in mode space first, then synthesize once
        let mut modes: Vec<Option<ModeField>> = (0..rank * rank).map(|_| None).collect();
        for cp in sys.couplings(side) {
            let src = match state.beta.get(&cp.src_degree).and_then(|f| f.comp(cp.src_mask)) {
                Some(c) => c,
                None => continue,
            };
            for r in 0..rank {
                let sv = cp.coeff * cp.perm.vals[r];
                if sv.norm_sqr() == 0.0 {
                    continue;
                }
                let slot = &mut modes[r * rank + cp.perm.cols[r]];
                match slot {
                    Some(e) => e.axpy(sv, src),
                    None => {
                        let mut e = ModeField::zeros(n, src.band());
                        e.axpy(sv, src);
                        *slot = Some(e);
                    }
                }
            }
        }
        let entries = modes
            .into_iter()
            .map(|m| m.map(|f| f.to_grid(npts)))
            .collect();
        MergedKernel {
            n,
            rank,
            npts,
            entries,
        }
    }

    fn apply(&self, src: &[GridField]) -> Vec<GridField> {
        let mut out: Vec<GridField> = (0..self.rank)
            .map(|_| GridField::zeros(self.n, self.npts))
            .collect();
        for r in 0..self.rank {
            for c in 0..self.rank {
                if let Some(e) = &self.entries[r * self.rank + c] {
                    for ((o, &w), &v) in out[r]
                        .data_mut()
                        .iter_mut()
                        .zip(e.data())
                        .zip(src[c].data())
                    {
                        *o += w * v;
                    }
                }
            }
        }
        out
    }

    fn apply_adjoint(&self, src: &[GridField]) -> Vec<GridField> {
        let mut out: Vec<GridField> = (0..self.rank)
            .map(|_| GridField::zeros(self.n, self.npts))
            .collect();
        for r in 0..self.rank {
            for c in 0..self.rank {
                if let Some(e) = &self.entries[r * self.rank + c] {
                    for ((o, &w), &v) in out[c]
                        .data_mut()
                        .iter_mut()
                        .zip(e.data())
                        .zip(src[r].data())
                    {
                        *o += w.conj() * v;
                    }
                }
            }
        }
        out
    }
}

/// Pointwise Clifford action of an even-degree complex form field on
/// chirality-`chi` spinor values, streaming one form component at a time.
fn act_even_form(
    sys: &SwSystem,
    form: &FormField,
    phi_grids: &[GridField],
    chi: Chirality,
    npts: usize,
) -> Vec<GridField> {
    let n = sys.n();
    let half = sys.rep.half(chi);
    let mut out: Vec<GridField> = (0..phi_grids.len())
        .map(|_| GridField::zeros(n, npts))
        .collect();
    for (mask, comp) in form.comps() {
        assert!(
            mask.count_ones() % 2 == 0,
            "odd-degree components do not preserve chirality"
        );
        if comp.norm_sqr() == 0.0 {
            continue;
        }
        let block = sys.rep.gamma(mask).restrict(half, half);
        let perm = GenPerm::from_cmat(&block);
        let w = comp.to_grid(npts);
        perm.accumulate_weighted(&mut out, ONE, &w, phi_grids);
    }
    out
}

/// Energy in residual form: `int |D phi|^2 + 2 int |r2|^2 + 4 int |r4|^2`.
/// This is the solver objective; by the energy identity it equals the term
/// sum of [`energy`] up to roundoff.
pub fn residual_energy(sys: &SwSystem, state: &SwState) -> ResidualEnergy {
    assert_eq!(sys.n(), 8, "the residual energy is the eight-dimensional functional");
    let side = Chirality::Plus;
    let bb = state.phi.band();
    let cb = sys.coefficient_band(state, side);
    let dphi = sys.dirac_apply(state, side, &state.phi, bb + cb);
    let r = sys.curvature_residual(state, side);
    ResidualEnergy {
        dirac: dphi.norm_sqr(),
        curvature_two: 2.0 * r.degree_part(2).norm_sqr(),
        curvature_four: 4.0 * r.degree_part(4).norm_sqr(),
    }
}

/// Evaluate the seven energy terms with alias-free quadrature and attach the
/// residual-side integrals.
pub fn energy(sys: &SwSystem, state: &SwState) -> EnergyBreakdown {
    assert_eq!(sys.n(), 8, "the energy is the eight-dimensional functional");
    let side = Chirality::Plus;
    let n = sys.n();
    let rank = sys.rep.chiral_rank();
    let bb = state.phi.band();
    let cb = sys.coefficient_band(state, side);
    // covariant products have content band bb + cb; the quartic needs 4 bb
    let npts = (2 * (bb + cb) + 1).max(4 * bb + 1);

    let phig: Vec<GridField> = (0..rank).map(|r| state.phi.comp(r).to_grid(npts)).collect();
    let ker = MergedKernel::build(sys, state, side, npts);
    let u = ker.apply(&phig); // coupling C phi on the target chirality

    // term 1: int |nabla_{A,beta} phi|^2 with
    // nabla_j = d_j + (i/2) alpha_j + B_j, B_j = -(1/2)(c_j C + C* c_j)
    let src_chi = spinor_source(n, side);
    let tgt_chi = spinor_target(n, src_chi);
    let half_i = Complex64::new(0.0, 0.5);
    let minus_half = Complex64::new(-0.5, 0.0);
    let mut covariant_gradient = 0.0;
    for j in 0..n {
        let mut w: Vec<GridField> = (0..rank)
            .map(|r| state.phi.comp(r).deriv(j).to_grid(npts))
            .collect();
        if let Some(aj) = state.alpha.comp(1 << j) {
            let ag = aj.to_grid(npts);
            axpy_weighted(&mut w, half_i, &ag, &phig);
        }
        sys.clifford_gen(j, tgt_chi).accumulate(&mut w, minus_half, &u);
        let mut cj: Vec<GridField> = (0..rank).map(|_| GridField::zeros(n, npts)).collect();
        sys.clifford_gen(j, src_chi).accumulate(&mut cj, ONE, &phig);
        let kc = ker.apply_adjoint(&cj);
        for (o, s) in w.iter_mut().zip(&kc) {
            o.axpy(minus_half, s);
        }
        covariant_gradient += w.iter().map(grid_mean_norm_sqr).sum::<f64>();
    }

    // terms 2-4 are exact in mode space
    let connection_curvature = 2.0 * sys.connection_curvature(state, side).norm_sqr();
    let mut beta_codifferential = 0.0;
    let mut beta_derivative = 0.0;
    for b in state.beta.values() {
        beta_codifferential += 8.0 * b.codiff().norm_sqr();
        beta_derivative += 8.0 * b.ext_d().norm_sqr();
    }

    // term 5: (7/32) int |phi|^4 (the scalar curvature term vanishes)
    let s = spinor_norm_sqr_grid(&phig);
    let quartic = (7.0 / 32.0) * s.mul(&s).integral().re;

    // term 6: -2 int |c(beta) phi|^2 with the plain odd-degree action
    let mut cb_phi: Vec<GridField> = (0..rank).map(|_| GridField::zeros(n, npts)).collect();
    let half_src = sys.rep.half(src_chi);
    let half_tgt = sys.rep.half(tgt_chi);
    for b in state.beta.values() {
        for (mask, comp) in b.comps() {
            if comp.norm_sqr() == 0.0 {
                continue;
            }
            let block = sys.rep.gamma(mask).restrict(half_tgt, half_src);
            let perm = GenPerm::from_cmat(&block);
            perm.accumulate_weighted(&mut cb_phi, ONE, &comp.to_grid(npts), &phig);
        }
    }
    let clifford_coupling = -2.0 * cb_phi.iter().map(grid_mean_norm_sqr).sum::<f64>();

    // term 7: -4 int |beta|^2 |phi|^2
    let mut b2 = GridField::zeros(n, npts);
    for b in state.beta.values() {
        for (_, comp) in b.comps() {
            let g = comp.to_grid(npts);
            for (o, z) in b2.data_mut().iter_mut().zip(g.data()) {
                *o += Complex64::new(z.norm_sqr(), 0.0);
            }
        }
    }
    let beta_phi = -4.0 * b2.mul(&s).integral().re;

    let residual_norms = residual_energy(sys, state);
    let mut out = EnergyBreakdown {
        total: 0.0,
        covariant_gradient,
        connection_curvature,
        beta_codifferential,
        beta_derivative,
        quartic,
        clifford_coupling,
        beta_phi,
        scalar_floor: 0.0,
        residual_norms,
    };
    out.total = out.term_sum();
    out
}

/// Relative defect of the energy identity
/// `E - (1/14) int s^2 = int |D phi|^2 + 2 int |r2|^2 + 4 int |r4|^2`.
pub fn energy_identity_defect(sys: &SwSystem, state: &SwState) -> f64 {
    let b = energy(sys, state);
    let lhs = b.total - b.scalar_floor;
    let rhs = b.residual_norms.total();
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0)
}

/// Pointwise imaginary part of a scalar field, computed in mode space:
/// `out(k) = (f(k) - conj(f(-k))) / (2i)`.  The result is exactly
/// conjugate-symmetric, so real-form gradients stay real to the last bit.
fn mode_im(f: &ModeField) -> ModeField {
    let half_mi = Complex64::new(0.0, -0.5);
    f.map_modes(|freq, z| {
        let neg: Vec<i64> = freq.iter().map(|&x| -x).collect();
        half_mi * (z - f.get(&neg).conj())
    })
}

/// Pointwise real part of a scalar field, in mode space.
fn mode_re(f: &ModeField) -> ModeField {
    f.map_modes(|freq, z| {
        let neg: Vec<i64> = freq.iter().map(|&x| -x).collect();
        0.5 * (z + f.get(&neg).conj())
    })
}

fn form_im(f: &FormField) -> FormField {
    let mut out = FormField::zero(f.n(), f.band());
    for (mask, comp) in f.comps() {
        out.set_comp(mask, mode_im(comp));
    }
    out
}

fn form_re(f: &FormField) -> FormField {
    let mut out = FormField::zero(f.n(), f.band());
    for (mask, comp) in f.comps() {
        out.set_comp(mask, mode_re(comp));
    }
    out
}

fn form_truncate(f: &FormField, band: usize) -> FormField {
    let mut out = FormField::zero(f.n(), band);
    for (mask, comp) in f.comps() {
        out.set_comp(mask, comp.truncate(band));
    }
    out
}

/// `state + h * dir`, componentwise.
pub fn state_step(state: &SwState, h: f64, dir: &SwState) -> SwState {
    let hs = Complex64::new(h, 0.0);
    let mut beta = BTreeMap::new();
    for (deg, f) in &state.beta {
        let next = match dir.beta.get(deg) {
            Some(d) => f.add(&d.scale(hs)),
            None => f.clone(),
        };
        beta.insert(*deg, next);
    }
    SwState {
        n: state.n,
        alpha: state.alpha.add(&dir.alpha.scale(hs)),
        alpha_minus: state.alpha_minus.clone(),
        beta,
        phi: state.phi.add(&dir.phi.scale(hs)),
        psi: state.psi.clone(),
    }
}

/// Inner product on tangent states matching the first-variation convention
/// `dE = <g_alpha, a> + sum <g_beta, b> + 2 Re <g_phi, dphi>`.
pub fn tangent_inner(a: &SwState, b: &SwState) -> f64 {
    let mut acc = a.alpha.inner(&b.alpha).re;
    for (deg, f) in &a.beta {
        if let Some(g) = b.beta.get(deg) {
            acc += f.inner(g).re;
        }
    }
    acc += 2.0 * a.phi.inner(&b.phi).re;
    acc
}

/// Exact first variation of the energy, band-projected onto the modes of
/// the state, packaged as a tangent state.  With the convention of
/// [`tangent_inner`], `d/dh E(state + h t) = tangent_inner(grad, t)` at
/// `h = 0` for every tangent `t` supported on the state's bands.
pub fn grad_energy(sys: &SwSystem, state: &SwState) -> SwState {
    assert_eq!(sys.n(), 8, "the energy gradient is the eight-dimensional functional");
    let side = Chirality::Plus;
    let n = sys.n();
    let rank = sys.rep.chiral_rank();
    let src_chi = spinor_source(n, side);
    let bb = state.phi.band();
    let cb = sys.coefficient_band(state, side);
    let ba = state.alpha.band();
    let bbeta = state.beta.values().map(|f| f.band()).max().unwrap_or(bb);
    let rb = (2 * bb).max(cb); // curvature-residual band
    let npts = (2 * (bb + cb) + 1)
        .max(rb + 2 * bb + 1)
        .max(2 * bb + cb + ba + 1)
        .max(2 * bb + cb + bbeta + 1);

    let phig: Vec<GridField> = (0..rank).map(|r| state.phi.comp(r).to_grid(npts)).collect();
    // Dirac values on the quadrature grid and their band-exact modes
    let dvals = sys.dirac_values(state, side, &state.phi, npts);
    let dphi = spinor_from_grids(&dvals, bb + cb, spinor_target(n, src_chi));

    let r = sys.curvature_residual(state, side);
    let r2 = r.degree_part(2);
    let r4 = r.degree_part(4);

    // spinor gradient: D* D phi - (1/2) c(i Im r2 + Re r4) phi
    let mut gphi = sys.dirac_adjoint_apply(state, side, &dphi, bb);
    let back = form_im(&r2).scale(I).add(&form_re(&r4));
    let bgrids = act_even_form(sys, &back, &phig, src_chi, npts);
    let bspin = spinor_from_grids(&bgrids, bb, src_chi);
    gphi.axpy(Complex64::new(-0.5, 0.0), &bspin);

    // connection gradient: Im <D phi, c_j phi> pointwise, plus the exact
    // curvature back-reaction 4 Im codiff(r2)
    let mut galpha = FormField::zero(n, ba);
    for j in 0..n {
        let cj = sys.clifford_gen(j, src_chi);
        let mut p = GridField::zeros(n, npts);
        for row in 0..rank {
            let s = cj.vals[row].conj();
            if s.norm_sqr() == 0.0 {
                continue;
            }
            let col = cj.cols[row];
            for ((o, &dv), &pv) in p
                .data_mut()
                .iter_mut()
                .zip(dvals[row].data())
                .zip(phig[col].data())
            {
                *o += s * dv * pv.conj();
            }
        }
        galpha.set_comp(1 << j, mode_im(&ModeField::from_grid(&p, ba)));
    }
    galpha = galpha.add(&form_truncate(&form_im(&r2.codiff()), ba).scale(Complex64::new(4.0, 0.0)));

    // beta gradient: 2 Re <A_I phi, D phi> pointwise per coupling mask, plus
    // 8 Im d(r2) and 16 Re codiff(r4)
    let mut pair: BTreeMap<Mask, GridField> = BTreeMap::new();
    for cp in sys.couplings(side) {
        let ent = pair
            .entry(cp.src_mask)
            .or_insert_with(|| GridField::zeros(n, npts));
        for row in 0..rank {
            let s = cp.coeff * cp.perm.vals[row];
            if s.norm_sqr() == 0.0 {
                continue;
            }
            let col = cp.perm.cols[row];
            for ((o, &pv), &dv) in ent
                .data_mut()
                .iter_mut()
                .zip(phig[col].data())
                .zip(dvals[row].data())
            {
                *o += s * pv * dv.conj();
            }
        }
    }
    let two = Complex64::new(2.0, 0.0);
    let mut beta_grad = BTreeMap::new();
    for (deg, f) in &state.beta {
        let mut g = FormField::zero(n, f.band());
        for (mask, ent) in &pair {
            if mask.count_ones() as usize != *deg {
                continue;
            }
            g.accum_comp(*mask, two, &mode_re(&ModeField::from_grid(ent, f.band())));
        }
        let g = g
            .add(&form_truncate(&form_im(&r2.ext_d()), f.band()).scale(Complex64::new(8.0, 0.0)))
            .add(&form_truncate(&form_re(&r4.codiff()), f.band()).scale(Complex64::new(16.0, 0.0)));
        beta_grad.insert(*deg, g);
    }

    SwState {
        n,
        alpha: galpha,
        alpha_minus: None,
        beta: beta_grad,
        phi: gphi,
        psi: None,
    }
}

/// Worst relative defect between `tangent_inner(grad, t)` and a central
/// finite difference of the energy along `dirs` random unit tangents.
pub fn grad_fd_defect(sys: &SwSystem, state: &SwState, dirs: usize, seed: u64) -> f64 {
    let eps = 1e-4;
    let g = grad_energy(sys, state);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = state.phi.band();
    let mut worst: f64 = 0.0;
    for _ in 0..dirs {
        let t = sys.random_state(band, 1.0, &mut rng);
        let norm = tangent_inner(&t, &t).sqrt();
        let t = state_step(&sys.zero_state(band), 1.0 / norm, &t);
        let analytic = tangent_inner(&g, &t);
        let ep = residual_energy(sys, &state_step(state, eps, &t)).total();
        let em = residual_energy(sys, &state_step(state, -eps, &t)).total();
        let fd = (ep - em) / (2.0 * eps);
        let defect = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-12);
        worst = worst.max(defect);
    }
    worst
}

/// Solver configuration.  Every field has a default, so a partial JSON
/// object is a valid configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Ambient dimension; the variational system is the n = 8 one.
    pub n: usize,
    /// Frequency band of the trigonometric ansatz (|k|_inf <= modes).
    pub modes: usize,
    /// Diagnostic sampling grid per axis for reports; the internal
    /// quadrature is always chosen alias-free and does not use this.
    pub grid: usize,
    /// Seed for the random initial perturbation.
    pub seed: u64,
    /// Amplitude of the componentwise uniform initial noise.
    pub noise_amp: f64,
    /// Initial trial step for the line search.
    pub step_init: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor on a rejected trial.
    pub shrink: f64,
    /// Step growth factor after an accepted step.
    pub grow: f64,
    /// Upper bound for the trial step.
    pub step_max: f64,
    /// Convergence threshold on the energy.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Descend in the diagonal spectral metric (true) or the plain L2
    /// metric (false).  The spectral metric rescales mode k of each field
    /// by the inverse of its quadratic-energy curvature, which keeps the
    /// step size of order one across the whole band.
    pub spectral_metric: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            n: 8,
            modes: 1,
            grid: 4,
            seed: 1,
            noise_amp: 1e-2,
            step_init: 1.0,
            armijo: 1e-4,
            shrink: 0.5,
            grow: 1.3,
            step_max: 4.0,
            tol: tol::SOLVE_ENERGY,
            max_iter: 5000,
            spectral_metric: true,
        }
    }
}

/// One line of the descent trace.  The residual columns are unweighted L2
/// norms, so convergence thresholds compare against them directly.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub dirac_residual: f64,
    pub curvature_two_residual: f64,
    pub curvature_four_residual: f64,
    pub step: f64,
}

/// Render trace rows as CSV with a header line.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(
        "iteration,energy,dirac_residual,curvature_two_residual,curvature_four_residual,step\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.iteration,
            r.energy,
            r.dirac_residual,
            r.curvature_two_residual,
            r.curvature_four_residual,
            r.step
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveOutcome {
    /// Final energy at or below the threshold.
    Converged,
    /// Iteration cap reached, or the line search stalled; the best state
    /// found is returned.
    IterationCap,
    /// The energy became non-finite.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: SwState,
    pub outcome: SolveOutcome,
    pub iterations: usize,
    pub energy: f64,
    pub residual: ResidualEnergy,
    pub trace: Vec<TraceRow>,
}

fn trace_row(iteration: usize, energy: f64, res: &ResidualEnergy, step: f64) -> TraceRow {
    TraceRow {
        iteration,
        energy,
        dirac_residual: res.dirac.max(0.0).sqrt(),
        curvature_two_residual: (res.curvature_two / 2.0).max(0.0).sqrt(),
        curvature_four_residual: (res.curvature_four / 4.0).max(0.0).sqrt(),
        step,
    }
}

fn mode_scale(f: &ModeField, c0: f64, c2: f64) -> ModeField {
    f.map_modes(|freq, z| {
        let k2: f64 = freq.iter().map(|&x| (x * x) as f64).sum();
        z / (c0 + c2 * k2)
    })
}

fn form_mode_scale(f: &FormField, c0: f64, c2: f64) -> FormField {
    let mut out = FormField::zero(f.n(), f.band());
    for (mask, comp) in f.comps() {
        out.set_comp(mask, mode_scale(comp, c0, c2));
    }
    out
}

/// Diagonal spectral metric: rescale mode k of each field by the inverse
/// of its quadratic-energy curvature (1, 4 and 16 times 1 + |k|^2 for phi,
/// alpha and beta), plus a zeroth-order guard from the current field norms
/// that keeps the unit step stable while the coupling terms are large.
fn precondition(state: &SwState, g: &SwState) -> SwState {
    let phi_ns = state.phi.norm_sqr();
    let alpha_ns = state.alpha.norm_sqr();
    let beta_ns: f64 = state.beta.values().map(|f| f.norm_sqr()).sum();
    let c_phi = 1.0 + 2.0 * beta_ns + 0.25 * alpha_ns;
    let c_alpha = 4.0 + 0.5 * phi_ns;
    let c_beta = 16.0 + 4.0 * phi_ns;

    let mut beta = BTreeMap::new();
    for (deg, f) in &g.beta {
        beta.insert(*deg, form_mode_scale(f, c_beta, 16.0));
    }
    let mut phi = g.phi.clone();
    for r in 0..phi.rank() {
        *phi.comp_mut(r) = mode_scale(g.phi.comp(r), c_phi, 1.0);
    }
    SwState {
        n: g.n,
        alpha: form_mode_scale(&g.alpha, c_alpha, 4.0),
        alpha_minus: None,
        beta,
        phi,
        psi: None,
    }
}

/// Gradient descent on the residual-form energy from a given initial state.
/// Each iteration takes one gradient and an Armijo backtracking line search
/// on the true objective; accepted steps grow the next trial step.  The
/// trace is monotone in energy by construction.
pub fn minimize_from(sys: &SwSystem, config: &SolveConfig, init: SwState) -> SolveResult {
    let mut state = init;
    let mut res = residual_energy(sys, &state);
    let mut e = res.total();
    let mut trace = vec![trace_row(0, e, &res, 0.0)];
    let mut h = config.step_init;
    let mut iterations = 0;
    while e.is_finite() && e > config.tol && iterations < config.max_iter {
        let g = grad_energy(sys, &state);
        let d = if config.spectral_metric {
            precondition(&state, &g)
        } else {
            g.clone()
        };
        let m = tangent_inner(&g, &d);
        if !m.is_finite() || m <= 0.0 {
            break; // numerically stationary above the threshold
        }
        h = (h * config.grow).min(config.step_max);
        let mut accepted = false;
        for _ in 0..60 {
            let cand = state_step(&state, -h, &d);
            let cres = residual_energy(sys, &cand);
            let ce = cres.total();
            if ce.is_finite() && ce <= e - config.armijo * h * m {
                state = cand;
                res = cres;
                e = ce;
                accepted = true;
                break;
            }
            h *= config.shrink;
        }
        if !accepted {
            break; // line search stalled
        }
        iterations += 1;
        trace.push(trace_row(iterations, e, &res, h));
    }
    let outcome = if !e.is_finite() {
        SolveOutcome::Diverged
    } else if e <= config.tol {
        SolveOutcome::Converged
    } else {
        SolveOutcome::IterationCap
    };
    SolveResult {
        state,
        outcome,
        iterations,
        energy: e,
        residual: res,
        trace,
    }
}

/// Solve from the configured random perturbation of the zero state.
pub fn minimize(sys: &SwSystem, config: &SolveConfig) -> SolveResult {
    assert_eq!(sys.n(), config.n, "configuration dimension mismatch");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = sys.random_state(config.modes, config.noise_amp, &mut rng);
    minimize_from(sys, config, init)
}

/// Reconstruct the coclosed-plus-harmonic 3-form sourced by a spinor:
/// `beta = beta_h - (i/2) d G(q2) - *d G(q4)` where G is the Green operator
/// and q2, q4 are the quadratic parts of phi.  The result satisfies
/// `Laplacian(beta) = -(i/2) d q2 - *(d q4)` and has harmonic part exactly
/// `beta_h`.
pub fn beta_from_phi(sys: &SwSystem, phi: &SpinorField, beta_h: &FormField) -> FormField {
    assert_eq!(sys.n(), 8, "the reconstruction solves the eight-dimensional system");
    let q = sys.q_fields(Chirality::Plus, phi, 2 * phi.band());
    let mut out = beta_h.clone();
    if let Some(q2) = q.get(&2) {
        out = out.add(&q2.green().ext_d().scale(Complex64::new(0.0, -0.5)));
    }
    if let Some(q4) = q.get(&4) {
        out = out.sub(&q4.green().ext_d().hodge());
    }
    out
}

/// Sup-norm defect of the flat Bochner identity
/// `(1/2) Lap |beta|^2 = <Lap beta, beta> - sum_j |d_j beta|^2`
/// (geometer's sign, vanishing curvature operator).
pub fn flat_bochner_defect(beta: &FormField) -> f64 {
    let n = beta.n();
    let c = beta.band();
    let npts = 4 * c + 1;
    let mut b2 = GridField::zeros(n, npts);
    let mut rhs = GridField::zeros(n, npts);
    let lap = beta.laplacian();
    for (mask, comp) in beta.comps() {
        let g = comp.to_grid(npts);
        for (o, z) in b2.data_mut().iter_mut().zip(g.data()) {
            *o += Complex64::new(z.norm_sqr(), 0.0);
        }
        if let Some(lc) = lap.comp(mask) {
            let lg = lc.to_grid(npts);
            for ((o, &a), &b) in rhs.data_mut().iter_mut().zip(lg.data()).zip(g.data()) {
                *o += Complex64::new((a * b.conj()).re, 0.0);
            }
        }
        for j in 0..n {
            let dg = comp.deriv(j).to_grid(npts);
            for (o, z) in rhs.data_mut().iter_mut().zip(dg.data()) {
                *o -= Complex64::new(z.norm_sqr(), 0.0);
            }
        }
    }
    let lhs = ModeField::from_grid(&b2, 2 * c).laplacian().to_grid(npts);
    let mut worst: f64 = 0.0;
    for (&l, &r) in lhs.data().iter().zip(rhs.data()) {
        worst = worst.max((0.5 * l - r).norm());
    }
    worst
}

/// Pointwise identity checks on a state, plus the smallest constant in the
/// scalar differential inequality used for a priori sup bounds.
#[derive(Debug, Clone, Serialize)]
pub struct PointwiseReport {
    pub records: Vec<IdentityRecord>,
    /// Smallest C with
    /// `Lap(|beta|^2 + |phi|^2) + c_r |phi|^4 <= C (|beta|^2 + |phi|^2 + |phi|^2 |beta|^2)`
    /// over the sample grid, where c_r = (rank - 1) / rank.
    pub regularity_constant: f64,
}

/// Evaluate the pointwise identity records on a state: the connection
/// Laplacian versus the covariant derivative, and the flat Bochner identity
/// for every odd-degree coefficient form.  Also reports the smallest
/// constant closing the scalar differential inequality on the sample grid.
pub fn pointwise_identities(sys: &SwSystem, state: &SwState) -> PointwiseReport {
    let n = sys.n();
    let side = Chirality::Plus;
    let mut records = Vec::new();
    let d1 = crate::weitz::laplacian_nabla_defect(sys, state, side, &state.phi);
    records.push(IdentityRecord::new(
        "pointwise-laplacian-nabla",
        n,
        d1,
        tol::WEITZ,
    ));
    for (deg, b) in &state.beta {
        records.push(IdentityRecord::new(
            format!("pointwise-flat-bochner-deg{deg}"),
            n,
            flat_bochner_defect(b),
            tol::WEITZ,
        ));
    }

    // scalar differential inequality constant
    let rank = state.phi.rank() as f64;
    let cr = (rank - 1.0) / rank;
    let bb = state.phi.band();
    let cbeta = state.beta.values().map(|f| f.band()).max().unwrap_or(0);
    let npts = 4 * bb.max(cbeta) + 1;
    let phig: Vec<GridField> = (0..state.phi.rank())
        .map(|r| state.phi.comp(r).to_grid(npts))
        .collect();
    let s = spinor_norm_sqr_grid(&phig);
    let mut b2 = GridField::zeros(n, npts);
    for b in state.beta.values() {
        for (_, comp) in b.comps() {
            let g = comp.to_grid(npts);
            for (o, z) in b2.data_mut().iter_mut().zip(g.data()) {
                *o += Complex64::new(z.norm_sqr(), 0.0);
            }
        }
    }
    let lap_s = ModeField::from_grid(&s, 2 * bb).laplacian().to_grid(npts);
    let lap_b2 = ModeField::from_grid(&b2, 2 * cbeta).laplacian().to_grid(npts);
    let mut constant: f64 = 0.0;
    let mut seen = false;
    for i in 0..s.data().len() {
        let sp = s.data()[i].re;
        let bp = b2.data()[i].re;
        let den = bp + sp + sp * bp;
        if den < 1e-12 {
            continue;
        }
        let num = lap_s.data()[i].re + lap_b2.data()[i].re + cr * sp * sp;
        let c = num / den;
        if !seen || c > constant {
            constant = c;
            seen = true;
        }
    }
    PointwiseReport {
        records,
        regularity_constant: constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::CirclePhase;
    use crate::torus::sample;

    fn sys8() -> SwSystem {
        SwSystem::new(8)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn breakdown_sums_and_identity_holds() {
        let sysm = sys8();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let st = sysm.random_state(1, 0.1, &mut rng);
        let b = energy(&sysm, &st);
        assert!(rel(b.total, b.term_sum()) <= 1e-12);
        assert!(b.residual_norms.total() >= 0.0);
        let defect = energy_identity_defect(&sysm, &st);
        assert!(
            defect <= tol::ENERGY_REL,
            "energy identity defect {defect:.3e}"
        );
    }

    #[test]
    fn term_scaling_in_phi() {
        let sysm = sys8();
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let st = sysm.random_state(1, 0.1, &mut rng);
        let mut st2 = st.clone();
        st2.phi = st.phi.scale(Complex64::new(2.0, 0.0));
        let e1 = energy(&sysm, &st);
        let e2 = energy(&sysm, &st2);
        // quadratic terms in phi scale by 4, the quartic by 16, and the
        // pure coefficient terms are unchanged
        assert!(rel(e2.covariant_gradient, 4.0 * e1.covariant_gradient) <= 1e-10);
        assert!(rel(e2.quartic, 16.0 * e1.quartic) <= 1e-10);
        assert!(rel(e2.clifford_coupling, 4.0 * e1.clifford_coupling) <= 1e-10);
        assert!(rel(e2.beta_phi, 4.0 * e1.beta_phi) <= 1e-10);
        assert!(rel(e2.connection_curvature, e1.connection_curvature) <= 1e-12);
        assert!(rel(e2.beta_codifferential, e1.beta_codifferential) <= 1e-12);
        assert!(rel(e2.beta_derivative, e1.beta_derivative) <= 1e-12);
    }

    #[test]
    fn pairing_lemmas_match_quadratic_parts() {
        let sysm = sys8();
        let rank = sysm.rep.chiral_rank();
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let phi = sample::spinor_field(8, 1, Chirality::Plus, rank, 0.5, &mut rng);
        let q = sysm.q_fields(Chirality::Plus, &phi, 2);
        let npts = 5;
        let phig: Vec<GridField> = (0..rank).map(|r| phi.comp(r).to_grid(npts)).collect();

        // <c(i w) phi, phi> = 8 <i w, q2> for a real 2-form w
        let w = sample::real_form_field(8, 1, 2, 1.0, &mut rng);
        let iw = w.scale(I);
        let u = act_even_form(&sysm, &iw, &phig, Chirality::Plus, npts);
        let mut lhs = Complex64::new(0.0, 0.0);
        for r in 0..rank {
            lhs += u[r].mul(&phig[r].conj()).integral();
        }
        let rhs = 8.0 * iw.inner(q.get(&2).unwrap()).re;
        assert!(
            rel(lhs.re, rhs) <= 1e-9 && lhs.im.abs() <= 1e-9 * lhs.re.abs().max(1.0),
            "degree-2 pairing {lhs} vs {rhs}"
        );

        // <c(theta) phi, phi> = 16 <theta, q4> for a self-dual real 4-form
        let theta = sample::real_form_field(8, 1, 4, 1.0, &mut rng);
        let tp = theta.dual_project_middle(Chirality::Plus);
        let u4 = act_even_form(&sysm, &tp, &phig, Chirality::Plus, npts);
        let mut lhs4 = Complex64::new(0.0, 0.0);
        for r in 0..rank {
            lhs4 += u4[r].mul(&phig[r].conj()).integral();
        }
        let rhs4 = 16.0 * tp.inner(q.get(&4).unwrap()).re;
        assert!(
            rel(lhs4.re, rhs4) <= 1e-9,
            "degree-4 pairing {lhs4} vs {rhs4}"
        );

        // the anti-self-dual part acts by zero on the plus spinors
        let tm = theta.dual_project_middle(Chirality::Minus);
        let um = act_even_form(&sysm, &tm, &phig, Chirality::Plus, npts);
        let sup: f64 = um.iter().map(|g| g.sup_abs()).fold(0.0, f64::max);
        assert!(sup <= 1e-10, "anti-self-dual action {sup:.3e}");
    }

    #[test]
    fn pointwise_quartic_identity() {
        // 2 |q2|^2 + 4 |q4|^2 = (7/32) |phi|^4 at every point
        let sysm = sys8();
        let rank = sysm.rep.chiral_rank();
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let phi = sample::spinor_field(8, 1, Chirality::Plus, rank, 0.5, &mut rng);
        let q = sysm.q_fields(Chirality::Plus, &phi, 2);
        let npts = 3;
        let phig: Vec<GridField> = (0..rank).map(|r| phi.comp(r).to_grid(npts)).collect();
        let s = spinor_norm_sqr_grid(&phig);
        let len = s.data().len();
        let mut lhs = vec![0.0f64; len];
        for (deg, weight) in [(2usize, 2.0f64), (4, 4.0)] {
            for (_, comp) in q.get(&deg).unwrap().comps() {
                let g = comp.to_grid(npts);
                for (o, z) in lhs.iter_mut().zip(g.data()) {
                    *o += weight * z.norm_sqr();
                }
            }
        }
        let mut worst: f64 = 0.0;
        for (l, z) in lhs.iter().zip(s.data()) {
            let r = (7.0 / 32.0) * z.re * z.re;
            worst = worst.max((l - r).abs() / r.abs().max(1.0));
        }
        assert!(worst <= 1e-10, "pointwise quartic defect {worst:.3e}");
    }

    #[test]
    fn gauge_invariance_of_breakdown() {
        let sysm = sys8();
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        let st = sysm.random_state(1, 0.1, &mut rng);
        let e0 = energy(&sysm, &st);
        let g1 = sysm.gauge_apply(&st, &CirclePhase::constant(0.8), None);
        let e1 = energy(&sysm, &g1);
        assert!(rel(e0.total, e1.total) <= tol::GAUGE);
        assert!(rel(e0.residual_norms.dirac, e1.residual_norms.dirac) <= tol::GAUGE);
        assert!(rel(e0.covariant_gradient, e1.covariant_gradient) <= tol::GAUGE);

        // a unit winding twists phi and shifts the connection by a constant
        let rank = sysm.rep.chiral_rank();
        let mut st2 = sysm.zero_state(1);
        st2.alpha = sample::real_form_field(8, 1, 1, 0.1, &mut rng);
        st2.beta.insert(3, sample::real_form_field(8, 1, 3, 0.1, &mut rng));
        st2.phi = sample::spinor_field(8, 0, Chirality::Plus, rank, 0.1, &mut rng);
        let e2 = energy(&sysm, &st2);
        let mut ell = vec![0i64; 8];
        ell[0] = 1;
        let g2 = sysm.gauge_apply(&st2, &CirclePhase::winding(&ell), None);
        let e3 = energy(&sysm, &g2);
        assert!(
            rel(e2.total, e3.total) <= tol::GAUGE,
            "winding gauge defect {:.3e}",
            rel(e2.total, e3.total)
        );
        assert!(rel(e2.residual_norms.total(), e3.residual_norms.total()) <= tol::GAUGE);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let sysm = sys8();
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let st = sysm.random_state(1, 0.05, &mut rng);
        let defect = grad_fd_defect(&sysm, &st, 3, 42);
        assert!(defect <= tol::GRAD_FD, "gradient defect {defect:.3e}");
    }

    #[test]
    fn beta_reconstruction_from_spinor() {
        let sysm = sys8();
        let rank = sysm.rep.chiral_rank();
        let mut rng = ChaCha8Rng::seed_from_u64(108);
        let phi = sample::spinor_field(8, 1, Chirality::Plus, rank, 0.5, &mut rng);
        let bh = sample::real_form_field(8, 0, 3, 1.0, &mut rng);
        let b = beta_from_phi(&sysm, &phi, &bh);
        let q = sysm.q_fields(Chirality::Plus, &phi, 2);
        let target = q[&2]
            .ext_d()
            .scale(Complex64::new(0.0, -0.5))
            .sub(&q[&4].ext_d().hodge());
        let defect = b.laplacian().sub(&target).norm_sqr().sqrt();
        let scale = target.norm_sqr().sqrt().max(1.0);
        assert!(
            defect <= tol::DELTA_BETA * scale,
            "Laplace defect {defect:.3e}"
        );
        // harmonic part returns exactly
        assert!(b.harmonic_part().sub(&bh).norm_sqr() <= 1e-30);
        assert!(b.reality_defect() <= 1e-12);
        // zero spinor reproduces the harmonic input
        let z = SpinorField::zeros(8, 1, Chirality::Plus, rank);
        assert!(beta_from_phi(&sysm, &z, &bh).sub(&bh).norm_sqr() <= 1e-30);
    }

    #[test]
    fn flat_bochner_small_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let f = sample::real_form_field(5, 1, 2, 1.0, &mut rng);
        let defect = flat_bochner_defect(&f);
        assert!(defect <= 1e-10, "Bochner defect {defect:.3e}");
    }

    #[test]
    fn zero_state_is_converged() {
        let sysm = sys8();
        let cfg = SolveConfig {
            max_iter: 5,
            ..SolveConfig::default()
        };
        let out = minimize_from(&sysm, &cfg, sysm.zero_state(1));
        assert_eq!(out.outcome, SolveOutcome::Converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.energy, 0.0);
    }

    #[test]
    fn short_descent_is_monotone() {
        let sysm = sys8();
        let cfg = SolveConfig {
            max_iter: 2,
            seed: 5,
            ..SolveConfig::default()
        };
        let out = minimize(&sysm, &cfg);
        assert!(out.outcome != SolveOutcome::Diverged);
        assert!(out.trace.len() >= 2, "no step was accepted");
        for w in out.trace.windows(2) {
            assert!(w[1].energy.is_finite());
            assert!(w[1].energy <= w[0].energy, "descent not monotone");
        }
    }

    #[test]
    fn pointwise_records_on_cheap_state() {
        let sysm = sys8();
        let rank = sysm.rep.chiral_rank();
        let mut rng = ChaCha8Rng::seed_from_u64(111);
        let mut st = sysm.zero_state(0);
        st.alpha = sample::real_form_field(8, 0, 1, 0.4, &mut rng);
        st.beta.insert(3, sample::real_form_field(8, 0, 3, 0.4, &mut rng));
        st.phi = sample::spinor_field(8, 1, Chirality::Plus, rank, 0.4, &mut rng);
        let rep = pointwise_identities(&sysm, &st);
        for rec in &rep.records {
            assert!(rec.pass, "{} defect {:.3e}", rec.identity, rec.defect);
        }
        assert!(rep.regularity_constant.is_finite());
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let rows = vec![
            TraceRow {
                iteration: 0,
                energy: 1.5,
                dirac_residual: 0.3,
                curvature_two_residual: 0.2,
                curvature_four_residual: 0.1,
                step: 0.0,
            },
            TraceRow {
                iteration: 1,
                energy: 0.7,
                dirac_residual: 0.2,
                curvature_two_residual: 0.1,
                curvature_four_residual: 0.05,
                step: 1.0,
            },
        ];
        let csv = trace_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("iteration,energy,"));
        assert!(lines[1].starts_with("0,"));
        assert!(lines[2].starts_with("1,"));
    }
}
