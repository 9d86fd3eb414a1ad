//! Spectral calculus on the flat torus `T^n = (R / 2 pi Z)^n`.
//!
//! Fields are band-limited trigonometric polynomials stored by Fourier
//! modes: a scalar field is a dense box of coefficients for frequencies
//! `|k_j| <= band`. The integral convention throughout the crate is the
//! normalized (mean) measure, so Parseval reads
//! `mean(f conj(g)) = sum_k f_k conj(g_k)`.
//!
//! Differential operators act mode by mode (`d -> i k ^`, `delta -> -i k .`),
//! hence exactly. Pointwise products go through collocation grids whose size
//! the library chooses from the operand bands, so products and the integrals
//! of products are exact too (a trig polynomial of band B is recovered
//! exactly from `N >= 2B+1` samples per axis). User-facing grid settings are
//! used for diagnostics only, never for internal quadrature.

use crate::clifford::{degree, full_mask, merge_sign, Chirality, FormValue, Mask};
use num_complex::Complex64;
use rand::Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense box of Fourier coefficients for frequencies `-band..=band` on each
/// axis; axis 0 is the most significant digit of the linear index.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeField {
    n: usize,
    band: usize,
    data: Vec<Complex64>,
}

fn box_len(n: usize, band: usize) -> usize {
    (2 * band + 1).pow(n as u32)
}

impl ModeField {
    pub fn zeros(n: usize, band: usize) -> Self {
        ModeField {
            n,
            band,
            data: vec![ZERO; box_len(n, band)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Linear index of a frequency vector.
    fn idx(&self, freq: &[i64]) -> usize {
        let r = 2 * self.band + 1;
        let mut ix = 0usize;
        for &f in freq {
            debug_assert!(f.unsigned_abs() as usize <= self.band);
            ix = ix * r + (f + self.band as i64) as usize;
        }
        ix
    }

    pub fn get(&self, freq: &[i64]) -> Complex64 {
        self.data[self.idx(freq)]
    }

    pub fn set(&mut self, freq: &[i64], v: Complex64) {
        let ix = self.idx(freq);
        self.data[ix] = v;
    }

    /// Visits every mode as `(frequency, coefficient)` in index order.
    pub fn for_each_mode(&self, mut f: impl FnMut(&[i64], Complex64)) {
        let mut freq = vec![-(self.band as i64); self.n];
        for (ix, &z) in self.data.iter().enumerate() {
            f(&freq, z);
            let _ = ix;
            // increment mixed-radix from the last axis
            for j in (0..self.n).rev() {
                if freq[j] < self.band as i64 {
                    freq[j] += 1;
                    break;
                }
                freq[j] = -(self.band as i64);
            }
        }
    }

    /// Rewrites every mode through `f(frequency, value)`.
    pub fn map_modes(&self, mut f: impl FnMut(&[i64], Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        let mut freq = vec![-(self.band as i64); self.n];
        for ix in 0..out.data.len() {
            out.data[ix] = f(&freq, self.data[ix]);
            for j in (0..self.n).rev() {
                if freq[j] < self.band as i64 {
                    freq[j] += 1;
                    break;
                }
                freq[j] = -(self.band as i64);
            }
        }
        out
    }

    /// Modes of the pointwise complex conjugate: out(k) = conj(self(-k)).
    ///
    /// In the centered mode box every axis offset o = k + band flips to
    /// 2*band - o under negation, so the full mixed-radix index reverses.
    pub fn conj_field(&self) -> Self {
        let mut out = self.clone();
        let last = self.data.len() - 1;
        for (i, v) in out.data.iter_mut().enumerate() {
            *v = self.data[last - i].conj();
        }
        out
    }

    /// Copy into a larger (or equal) band box.
    pub fn embed(&self, band: usize) -> Self {
        assert!(band >= self.band);
        if band == self.band {
            return self.clone();
        }
        let mut out = ModeField::zeros(self.n, band);
        self.for_each_mode(|freq, z| {
            if z != ZERO {
                out.set(freq, z);
            }
        });
        out
    }

    /// Drop modes outside the smaller band.
    pub fn truncate(&self, band: usize) -> Self {
        assert!(band <= self.band);
        if band == self.band {
            return self.clone();
        }
        let mut out = ModeField::zeros(self.n, band);
        let b = band as i64;
        self.for_each_mode(|freq, z| {
            if z != ZERO && freq.iter().all(|f| f.abs() <= b) {
                out.set(freq, z);
            }
        });
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }

    fn zip(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.n, rhs.n);
        let band = self.band.max(rhs.band);
        let (a, b) = (self.embed(band), rhs.embed(band));
        let mut out = ModeField::zeros(self.n, band);
        for (o, (x, y)) in out.data.iter_mut().zip(a.data.iter().zip(&b.data)) {
            *o = f(*x, *y);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    /// In-place `self += s * rhs`; bands must match.
    pub fn axpy(&mut self, s: Complex64, rhs: &Self) {
        assert_eq!(self.band, rhs.band);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += s * b;
        }
    }

    /// `d/dx_j`: multiplies mode k by `i k_j`.
    pub fn deriv(&self, j: usize) -> Self {
        self.map_modes(|freq, z| Complex64::new(0.0, freq[j] as f64) * z)
    }

    /// L2 inner product (normalized measure), linear in `self`.
    pub fn inner(&self, rhs: &Self) -> Complex64 {
        assert_eq!(self.n, rhs.n);
        if self.band == rhs.band {
            return self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a * b.conj())
                .sum();
        }
        let band = self.band.max(rhs.band);
        self.embed(band).inner(&rhs.embed(band))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Zero-frequency coefficient.
    pub fn mean(&self) -> Complex64 {
        let freq = vec![0i64; self.n];
        self.get(&freq)
    }

    /// Keeps only the zero mode.
    pub fn harmonic_part(&self) -> Self {
        let mut out = ModeField::zeros(self.n, self.band);
        let freq = vec![0i64; self.n];
        out.set(&freq, self.get(&freq));
        out
    }

    /// Componentwise Green operator of the flat Laplacian: divides mode k by
    /// `|k|^2`, sending the zero mode to zero.
    pub fn green(&self) -> Self {
        self.map_modes(|freq, z| {
            let k2: f64 = freq.iter().map(|&f| (f * f) as f64).sum();
            if k2 == 0.0 {
                ZERO
            } else {
                z / k2
            }
        })
    }

    pub fn laplacian(&self) -> Self {
        self.map_modes(|freq, z| {
            let k2: f64 = freq.iter().map(|&f| (f * f) as f64).sum();
            z * k2
        })
    }

    /// Largest violation of the reality constraint `f(-k) = conj(f(k))`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        self.for_each_mode(|freq, z| {
            let neg: Vec<i64> = freq.iter().map(|f| -f).collect();
            let w = self.get(&neg);
            worst = worst.max((w - z.conj()).norm());
        });
        worst
    }

    /// Synthesis on the uniform grid with `npts` points per axis
    /// (`x_p = 2 pi p / npts`). Exact for any `npts >= 1`; alias-free
    /// analysis back requires `npts >= 2 band + 1`.
    pub fn to_grid(&self, npts: usize) -> GridField {
        let w = dft_matrix(npts, self.band, false);
        let mut data = self.data.clone();
        let mut shape = vec![2 * self.band + 1; self.n];
        for axis in 0..self.n {
            data = axis_apply(&data, &shape, axis, &w, npts);
            shape[axis] = npts;
        }
        GridField {
            n: self.n,
            npts,
            data,
        }
    }

    pub fn from_grid(g: &GridField, band: usize) -> Self {
        assert!(
            g.npts >= 2 * band + 1,
            "analysis needs npts >= 2 band + 1 (got {} for band {})",
            g.npts,
            band
        );
        let w = dft_matrix(g.npts, band, true);
        let mut data = g.data.clone();
        let mut shape = vec![g.npts; g.n];
        for axis in 0..g.n {
            data = axis_apply(&data, &shape, axis, &w, 2 * band + 1);
            shape[axis] = 2 * band + 1;
        }
        ModeField {
            n: g.n,
            band,
            data,
        }
    }
}

/// Values on the uniform collocation grid, same index layout as the mode box.
#[derive(Clone, Debug)]
pub struct GridField {
    n: usize,
    npts: usize,
    data: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(n: usize, npts: usize) -> Self {
        GridField {
            n,
            npts,
            data: vec![ZERO; npts.pow(n as u32)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn npts(&self) -> usize {
        self.npts
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!((self.n, self.npts), (rhs.n, rhs.npts));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a *= b;
        }
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for a in &mut out.data {
            *a = a.conj();
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for a in &mut out.data {
            *a *= s;
        }
        out
    }

    pub fn axpy(&mut self, s: Complex64, rhs: &Self) {
        assert_eq!((self.n, self.npts), (rhs.n, rhs.npts));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += s * b;
        }
    }

    /// Mean over the grid = normalized integral (exact for alias-free data).
    pub fn integral(&self) -> Complex64 {
        let s: Complex64 = self.data.iter().sum();
        s / self.data.len() as f64
    }

    pub fn sup_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// DFT matrix block: synthesis (`inverse = false`) maps mode digit d (freq
/// f = d - band) to grid point p via `exp(i f x_p)`; analysis adds `1/npts`
/// and the conjugate kernel.
fn dft_matrix(npts: usize, band: usize, inverse: bool) -> Vec<Complex64> {
    let rows = if inverse { 2 * band + 1 } else { npts };
    let cols = if inverse { npts } else { 2 * band + 1 };
    let mut w = vec![ZERO; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let (p, f) = if inverse {
                (c, r as i64 - band as i64)
            } else {
                (r, c as i64 - band as i64)
            };
            let theta = 2.0 * PI * (p as f64) * (f as f64) / npts as f64;
            let kernel = Complex64::new(theta.cos(), if inverse { -theta.sin() } else { theta.sin() });
            w[r * cols + c] = if inverse {
                kernel / npts as f64
            } else {
                kernel
            };
        }
    }
    w
}

/// Applies a `new_len x old_len` matrix along one axis of a dense
/// mixed-radix array.
fn axis_apply(
    data: &[Complex64],
    shape: &[usize],
    axis: usize,
    mat: &[Complex64],
    new_len: usize,
) -> Vec<Complex64> {
    let old_len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![ZERO; outer * new_len * inner];
    if inner == 1 {
        // pencils are contiguous: small dense matvec per pencil
        for (src, dst) in data
            .chunks_exact(old_len)
            .zip(out.chunks_exact_mut(new_len))
        {
            for (d, row) in dst.iter_mut().zip(mat.chunks_exact(old_len)) {
                let mut acc = ZERO;
                for (&m, &v) in row.iter().zip(src) {
                    acc += m * v;
                }
                *d = acc;
            }
        }
    } else {
        for o in 0..outer {
            let src_block = &data[o * old_len * inner..(o + 1) * old_len * inner];
            let dst_block = &mut out[o * new_len * inner..(o + 1) * new_len * inner];
            for (r, dst) in dst_block.chunks_exact_mut(inner).enumerate() {
                let row = &mat[r * old_len..(r + 1) * old_len];
                for (&m, src) in row.iter().zip(src_block.chunks_exact(inner)) {
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d += m * v;
                    }
                }
            }
        }
    }
    out
}

/// Grid size sufficient to multiply fields of the given bands and read the
/// product off exactly.
pub fn product_grid(bands: &[usize]) -> usize {
    let total: usize = bands.iter().sum();
    2 * total + 1
}

/// A form-valued field: one scalar mode box per coframe monomial.
#[derive(Clone, Debug)]
pub struct FormField {
    n: usize,
    band: usize,
    comps: BTreeMap<Mask, ModeField>,
}

impl FormField {
    pub fn zero(n: usize, band: usize) -> Self {
        FormField {
            n,
            band,
            comps: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn comps(&self) -> impl Iterator<Item = (Mask, &ModeField)> {
        self.comps.iter().map(|(m, f)| (*m, f))
    }

    pub fn comp(&self, mask: Mask) -> Option<&ModeField> {
        self.comps.get(&mask)
    }

    pub fn set_comp(&mut self, mask: Mask, f: ModeField) {
        assert_eq!(f.n, self.n);
        assert_eq!(f.band, self.band);
        self.comps.insert(mask, f);
    }

    pub fn accum_comp(&mut self, mask: Mask, s: Complex64, f: &ModeField) {
        assert_eq!(f.band, self.band, "band mismatch in accumulation");
        self.comps
            .entry(mask)
            .or_insert_with(|| ModeField::zeros(self.n, self.band))
            .axpy(s, f);
    }

    pub fn embed(&self, band: usize) -> Self {
        let mut out = FormField::zero(self.n, band);
        for (m, f) in self.comps() {
            out.set_comp(m, f.embed(band));
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let band = self.band.max(rhs.band);
        let mut out = self.embed(band);
        for (m, f) in rhs.comps() {
            out.accum_comp(m, Complex64::new(1.0, 0.0), &f.embed(band));
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = FormField::zero(self.n, self.band);
        for (m, f) in self.comps() {
            out.set_comp(m, f.scale(s));
        }
        out
    }

    /// Exterior derivative, exact per mode.
    pub fn ext_d(&self) -> Self {
        let mut out = FormField::zero(self.n, self.band);
        for (mask, f) in self.comps() {
            for j in 0..self.n {
                let bit = 1u16 << j;
                if mask & bit != 0 {
                    continue;
                }
                let sign = merge_sign(bit, mask) as f64;
                out.accum_comp(mask | bit, Complex64::new(sign, 0.0), &f.deriv(j));
            }
        }
        out
    }

    /// Codifferential (formal adjoint of `ext_d`), exact per mode.
    pub fn codiff(&self) -> Self {
        let mut out = FormField::zero(self.n, self.band);
        for (mask, f) in self.comps() {
            for j in 0..self.n {
                let bit = 1u16 << j;
                if mask & bit == 0 {
                    continue;
                }
                let below = (mask & (bit - 1)).count_ones();
                let sign = if below % 2 == 0 { -1.0 } else { 1.0 };
                out.accum_comp(mask & !bit, Complex64::new(sign, 0.0), &f.deriv(j));
            }
        }
        out
    }

    pub fn hodge(&self) -> Self {
        let full = full_mask(self.n);
        let mut out = FormField::zero(self.n, self.band);
        for (mask, f) in self.comps() {
            let comp = full & !mask;
            let sign = merge_sign(mask, comp) as f64;
            out.accum_comp(comp, Complex64::new(sign, 0.0), f);
        }
        out
    }

    /// Chiral projection of middle-degree components (even n); other degrees
    /// pass through unchanged.
    pub fn dual_project_middle(&self, chi: Chirality) -> Self {
        assert_eq!(self.n % 2, 0);
        let mid = self.n / 2;
        let sign = chi.sign() as f64;
        let mut rest = FormField::zero(self.n, self.band);
        let mut middle = FormField::zero(self.n, self.band);
        for (mask, f) in self.comps() {
            if degree(mask) == mid {
                middle.set_comp(mask, f.clone());
            } else {
                rest.set_comp(mask, f.clone());
            }
        }
        let proj = middle
            .add(&middle.hodge().scale(Complex64::new(sign, 0.0)))
            .scale(Complex64::new(0.5, 0.0));
        rest.add(&proj)
    }

    pub fn laplacian(&self) -> Self {
        self.map_comps(|f| f.laplacian())
    }

    pub fn green(&self) -> Self {
        self.map_comps(|f| f.green())
    }

    pub fn harmonic_part(&self) -> Self {
        self.map_comps(|f| f.harmonic_part())
    }

    fn map_comps(&self, f: impl Fn(&ModeField) -> ModeField) -> Self {
        let mut out = FormField::zero(self.n, self.band);
        for (m, c) in self.comps() {
            out.set_comp(m, f(c));
        }
        out
    }

    pub fn inner(&self, rhs: &Self) -> Complex64 {
        let mut acc = ZERO;
        for (m, f) in self.comps() {
            if let Some(g) = rhs.comps.get(&m) {
                acc += f.inner(g);
            }
        }
        acc
    }

    pub fn norm_sqr(&self) -> f64 {
        self.comps.values().map(|f| f.norm_sqr()).sum()
    }

    /// Largest pointwise coefficient modulus over a diagnostic grid.
    pub fn sup_abs(&self, npts: usize) -> f64 {
        self.comps
            .values()
            .map(|f| f.to_grid(npts).sup_abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise value at the grid point indexed by `pt` (diagnostics).
    pub fn degrees(&self) -> Vec<usize> {
        let mut ds: Vec<usize> = self.comps.keys().map(|m| degree(*m)).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// Largest reality defect over components.
    pub fn reality_defect(&self) -> f64 {
        self.comps
            .values()
            .map(|f| f.reality_defect())
            .fold(0.0, f64::max)
    }

    /// Restriction to one degree.
    pub fn degree_part(&self, k: usize) -> Self {
        let mut out = FormField::zero(self.n, self.band);
        for (m, f) in self.comps() {
            if degree(m) == k {
                out.set_comp(m, f.clone());
            }
        }
        out
    }
}

/// Spinor-valued field on one chiral half; components indexed like the
/// chiral index list of the representation.
#[derive(Clone, Debug)]
pub struct SpinorField {
    n: usize,
    band: usize,
    chi: Chirality,
    comps: Vec<ModeField>,
}

impl SpinorField {
    pub fn zeros(n: usize, band: usize, chi: Chirality, rank: usize) -> Self {
        SpinorField {
            n,
            band,
            chi,
            comps: (0..rank).map(|_| ModeField::zeros(n, band)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn chi(&self) -> Chirality {
        self.chi
    }

    pub fn rank(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, r: usize) -> &ModeField {
        &self.comps[r]
    }

    pub fn comp_mut(&mut self, r: usize) -> &mut ModeField {
        &mut self.comps[r]
    }

    pub fn embed(&self, band: usize) -> Self {
        SpinorField {
            n: self.n,
            band,
            chi: self.chi,
            comps: self.comps.iter().map(|f| f.embed(band)).collect(),
        }
    }

    pub fn truncate(&self, band: usize) -> Self {
        SpinorField {
            n: self.n,
            band,
            chi: self.chi,
            comps: self.comps.iter().map(|f| f.truncate(band)).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.chi, rhs.chi);
        let band = self.band.max(rhs.band);
        let mut out = self.embed(band);
        let r = rhs.embed(band);
        for (a, b) in out.comps.iter_mut().zip(&r.comps) {
            a.axpy(Complex64::new(1.0, 0.0), b);
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        SpinorField {
            n: self.n,
            band: self.band,
            chi: self.chi,
            comps: self.comps.iter().map(|f| f.scale(s)).collect(),
        }
    }

    pub fn axpy(&mut self, s: Complex64, rhs: &Self) {
        assert_eq!(self.band, rhs.band);
        for (a, b) in self.comps.iter_mut().zip(&rhs.comps) {
            a.axpy(s, b);
        }
    }

    pub fn inner(&self, rhs: &Self) -> Complex64 {
        self.comps
            .iter()
            .zip(&rhs.comps)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.comps.iter().map(|f| f.norm_sqr()).sum()
    }

    pub fn sup_abs(&self, npts: usize) -> f64 {
        self.comps
            .iter()
            .map(|f| f.to_grid(npts).sup_abs())
            .fold(0.0, f64::max)
    }
}

/// Deterministic random fields. Modes are visited in index order, so a seeded
/// generator yields identical fields across runs and platforms.
pub mod sample {
    use super::*;

    /// Complex field with independent uniform coefficients in the disk of
    /// radius `amp`.
    pub fn complex_mode_field<R: Rng>(n: usize, band: usize, amp: f64, rng: &mut R) -> ModeField {
        let mut f = ModeField::zeros(n, band);
        for v in f.data.iter_mut() {
            *v = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
        }
        f
    }

    /// Real field: coefficients obey `f(-k) = conj(f(k))`.
    pub fn real_mode_field<R: Rng>(n: usize, band: usize, amp: f64, rng: &mut R) -> ModeField {
        let mut f = complex_mode_field(n, band, amp, rng);
        symmetrize_real(&mut f);
        f
    }

    /// Projects onto the reality constraint by averaging with the reflected
    /// conjugate (idempotent; exact for already-real fields).
    pub fn symmetrize_real(f: &mut ModeField) {
        let copy = f.clone();
        let mut out = f.clone();
        copy.for_each_mode(|freq, z| {
            let neg: Vec<i64> = freq.iter().map(|x| -x).collect();
            let w = copy.get(&neg);
            out.set(freq, (z + w.conj()) * 0.5);
        });
        *f = out;
    }

    /// Real form field with all degree-k components sampled.
    pub fn real_form_field<R: Rng>(
        n: usize,
        band: usize,
        k: usize,
        amp: f64,
        rng: &mut R,
    ) -> FormField {
        let mut out = FormField::zero(n, band);
        for mask in crate::clifford::masks_of_degree(n, k) {
            out.set_comp(mask, real_mode_field(n, band, amp, rng));
        }
        out
    }

    pub fn spinor_field<R: Rng>(
        n: usize,
        band: usize,
        chi: Chirality,
        rank: usize,
        amp: f64,
        rng: &mut R,
    ) -> SpinorField {
        let mut out = SpinorField::zeros(n, band, chi, rank);
        for r in 0..rank {
            *out.comp_mut(r) = complex_mode_field(n, band, amp, rng);
        }
        out
    }
}

/// Converts a constant form value into a field (band 0 unless embedded).
pub fn constant_form(n: usize, band: usize, v: &FormValue<Complex64>) -> FormField {
    let mut out = FormField::zero(n, band);
    for (mask, c) in v.iter() {
        let mut f = ModeField::zeros(n, band);
        let freq = vec![0i64; n];
        f.set(&freq, *c);
        out.set_comp(mask, f);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_roundtrip_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3] {
            for band in [0usize, 1, 2] {
                let f = sample::complex_mode_field(n, band, 1.0, &mut rng);
                let g = f.to_grid(2 * band + 1);
                let back = ModeField::from_grid(&g, band);
                let diff: f64 = f
                    .data
                    .iter()
                    .zip(&back.data)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(diff < 1e-13, "n={n} band={band}: {diff}");
            }
        }
    }

    #[test]
    fn products_alias_free() {
        // modes of band 1 multiply to band 2; npts = 5 recovers the product
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 2;
        let f = sample::complex_mode_field(n, 1, 1.0, &mut rng);
        let g = sample::complex_mode_field(n, 1, 1.0, &mut rng);
        let npts = product_grid(&[1, 1]);
        let prod = ModeField::from_grid(&f.to_grid(npts).mul(&g.to_grid(npts)), 2);
        // compare against direct convolution
        let mut conv = ModeField::zeros(n, 2);
        f.for_each_mode(|kf, zf| {
            g.for_each_mode(|kg, zg| {
                let sum: Vec<i64> = kf.iter().zip(kg).map(|(a, b)| a + b).collect();
                let prev = conv.get(&sum);
                conv.set(&sum, prev + zf * zg);
            });
        });
        let diff: f64 = prod
            .data
            .iter()
            .zip(&conv.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn parseval_matches_grid_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 3;
        let f = sample::complex_mode_field(n, 1, 0.8, &mut rng);
        let g = sample::complex_mode_field(n, 1, 0.8, &mut rng);
        let npts = product_grid(&[1, 1]);
        let grid = f.to_grid(npts).mul(&g.to_grid(npts).conj()).integral();
        let spectral = f.inner(&g);
        assert!((grid - spectral).norm() < 1e-13);
    }

    #[test]
    fn de_rham_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 5;
        for k in [1usize, 2, 3] {
            let f = sample::real_form_field(n, 1, k, 1.0, &mut rng);
            assert!(f.ext_d().ext_d().norm_sqr() < 1e-26, "d^2 k={k}");
            assert!(f.codiff().codiff().norm_sqr() < 1e-26, "delta^2 k={k}");
            // delta = (-1)^{n(k+1)+1} * d * on k-forms
            let sign = if (n * (k + 1) + 1) % 2 == 0 { 1.0 } else { -1.0 };
            let via_star = f.hodge().ext_d().hodge().scale(Complex64::new(sign, 0.0));
            let diff = f.codiff().sub(&via_star).norm_sqr();
            assert!(diff < 1e-26, "delta vs *d* k={k}: {diff}");
            // adjointness <d a, b> = <a, delta b>
            let b = sample::real_form_field(n, 1, k + 1, 1.0, &mut rng);
            let lhs = f.ext_d().inner(&b);
            let rhs = f.inner(&b.codiff());
            assert!((lhs - rhs).norm() < 1e-13);
            // Hodge is an isometry
            assert!((f.hodge().inner(&f.hodge()) - f.inner(&f)).norm() < 1e-13);
        }
    }

    #[test]
    fn laplacian_green_harmonic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let f = sample::real_form_field(n, 2, 2, 1.0, &mut rng);
        let hodge_lap = f.ext_d().codiff().add(&f.codiff().ext_d());
        assert!(hodge_lap.sub(&f.laplacian()).norm_sqr() < 1e-24);
        let recon = f.laplacian().green().add(&f.harmonic_part());
        assert!(recon.sub(&f).norm_sqr() < 1e-24);
        assert!(f.reality_defect() < 1e-15);
    }

    #[test]
    fn deriv_of_plane_wave() {
        let n = 2;
        let mut f = ModeField::zeros(n, 1);
        f.set(&[1, -1], Complex64::new(2.0, 1.0));
        let d0 = f.deriv(0);
        assert_eq!(d0.get(&[1, -1]), Complex64::new(0.0, 1.0) * Complex64::new(2.0, 1.0));
        let d1 = f.deriv(1);
        assert_eq!(d1.get(&[1, -1]), Complex64::new(0.0, -1.0) * Complex64::new(2.0, 1.0));
    }

    #[test]
    fn self_dual_projection_halves_derivative_energy() {
        // For a real 3-form on the 8-torus the self-dual part of d(beta)
        // carries exactly half the L2 mass: the cross pairing <d beta, *d beta>
        // integrates to zero because delta(*d beta) = -*dd(beta) = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let beta = sample::real_form_field(8, 1, 3, 1.0, &mut rng);
        let d = beta.ext_d();
        let plus = d.dual_project_middle(Chirality::Plus);
        let defect = (plus.norm_sqr() - 0.5 * d.norm_sqr()).abs();
        assert!(defect <= 1e-9, "self-dual energy split defect {defect:.3e}");
    }

    #[test]
    fn exact_and_coexact_two_forms_are_orthogonal() {
        // <i d(alpha), i codiff(beta)> = <alpha, codiff codiff beta> = 0, the
        // pairing that decouples the connection curvature from the coclosed
        // beta contribution in the curvature equation.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let alpha = sample::real_form_field(8, 1, 1, 1.0, &mut rng);
        let beta = sample::real_form_field(8, 1, 3, 1.0, &mut rng);
        let i = Complex64::new(0.0, 1.0);
        let pairing = alpha.ext_d().scale(i).inner(&beta.codiff().scale(i));
        assert!(pairing.norm() <= 1e-9, "cross pairing {:.3e}", pairing.norm());
    }

    #[test]
    fn conj_field_matches_grid_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = sample::complex_mode_field(3, 2, 0.7, &mut rng);
        let slow = f.map_modes(|freq, _| {
            let neg: Vec<i64> = freq.iter().map(|k| -k).collect();
            f.get(&neg).conj()
        });
        let fast = f.conj_field();
        assert_eq!(fast.data, slow.data, "index-reversal conjugation mismatch");
        // And it really is the conjugate on the grid.
        let g = f.to_grid(7);
        let gc = fast.to_grid(7);
        for (a, b) in g.data.iter().zip(gc.data.iter()) {
            assert!((a.conj() - b).norm() <= 1e-12);
        }
    }
}
