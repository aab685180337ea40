//! Exact coherent-state algebra.
//!
//! States are finite sums `Σ c_k |α⃗_k⟩` of multimode coherent products, and
//! mixed states are finite sums of dyads `c |α⃗⟩⟨β⃗|`. Overlaps, normal-ordered
//! moments and partial traces are closed-form; spectra come from the Gram
//! matrix of the distinct coherent points.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{LabError, LabResult};
use crate::fock::{self, coherent_amplitudes, CutoffProfile, DensityOperator, FockState};
use crate::ops::ModeOp;
use crate::C64;

/// Coherent label vectors closer than this (Euclidean) are the same point.
pub const MERGE_TOLERANCE: f64 = 1e-12;
/// Gram eigenvalues below this fraction of the largest are projected out.
pub const GRAM_REGULARIZATION: f64 = 1e-12;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn log_kernel(a: &[C64], b: &[C64]) -> C64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| -0.5 * x.norm_sqr() - 0.5 * y.norm_sqr() + x.conj() * y)
        .sum()
}

fn kernel(a: &[C64], b: &[C64]) -> C64 {
    log_kernel(a, b).exp()
}

/// `⟨α⃗|β⃗⟩ = Π_j exp(−|α_j|²/2 − |β_j|²/2 + ᾱ_j β_j)`
pub fn overlap_kernel(alphas: &[C64], betas: &[C64]) -> LabResult<C64> {
    if alphas.len() != betas.len() {
        return Err(LabError::DimensionMismatch(format!(
            "{} vs {} coherent labels",
            alphas.len(),
            betas.len()
        )));
    }
    Ok(kernel(alphas, betas))
}

fn same_point(a: &[C64], b: &[C64]) -> bool {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt() < MERGE_TOLERANCE
}

fn check_finite(v: &[C64]) -> LabResult<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LabError::Config("non-finite coherent label".into()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherentTerm {
    pub coeff: C64,
    pub alphas: Vec<C64>,
}

impl CoherentTerm {
    pub fn new(coeff: C64, alphas: Vec<C64>) -> Self {
        Self { coeff, alphas }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherentSuperposition {
    num_modes: usize,
    terms: Vec<CoherentTerm>,
}

impl CoherentSuperposition {
    pub fn new(num_modes: usize, terms: Vec<CoherentTerm>) -> LabResult<Self> {
        if num_modes == 0 {
            return Err(LabError::Config("zero modes".into()));
        }
        for t in &terms {
            if t.alphas.len() != num_modes {
                return Err(LabError::DimensionMismatch(format!(
                    "term with {} labels in a {num_modes}-mode state",
                    t.alphas.len()
                )));
            }
            check_finite(&t.alphas)?;
            check_finite(&[t.coeff])?;
        }
        Ok(Self { num_modes, terms }.merged())
    }

    /// A single product `|α_0⟩ ⊗ … ⊗ |α_{N-1}⟩`.
    pub fn coherent(alphas: Vec<C64>) -> LabResult<Self> {
        Self::new(alphas.len(), vec![CoherentTerm::new(C64::new(1.0, 0.0), alphas)])
    }

    pub fn vacuum(num_modes: usize) -> LabResult<Self> {
        Self::coherent(vec![zero(); num_modes])
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn terms(&self) -> &[CoherentTerm] {
        &self.terms
    }

    fn merged(mut self) -> Self {
        let mut out: Vec<CoherentTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.iter_mut().find(|o| same_point(&o.alphas, &t.alphas)) {
                Some(o) => o.coeff += t.coeff,
                None => out.push(t),
            }
        }
        out.retain(|t| t.coeff.norm() > 0.0);
        Self { num_modes: self.num_modes, terms: out }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner_unchecked(self).re
    }

    pub fn normalize(&self) -> LabResult<Self> {
        let n2 = self.norm_sqr();
        if !(n2 > 1e-24) {
            return Err(LabError::DegenerateNormalization(format!("norm² = {n2:.3e}")));
        }
        Ok(self.scale(C64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            num_modes: self.num_modes,
            terms: self.terms.iter().map(|t| CoherentTerm::new(t.coeff * c, t.alphas.clone())).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> LabResult<Self> {
        if self.num_modes != other.num_modes {
            return Err(LabError::DimensionMismatch("superpositions on different mode counts".into()));
        }
        let terms = self.terms.iter().chain(&other.terms).cloned().collect();
        Ok(Self { num_modes: self.num_modes, terms }.merged())
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut labels = a.alphas.clone();
                labels.extend_from_slice(&b.alphas);
                terms.push(CoherentTerm::new(a.coeff * b.coeff, labels));
            }
        }
        Self { num_modes: self.num_modes + other.num_modes, terms }.merged()
    }

    /// `ψ^{⊗n}`
    pub fn power(&self, n: usize) -> Self {
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self);
        }
        out
    }

    fn inner_unchecked(&self, other: &Self) -> C64 {
        let mut s = zero();
        for a in &self.terms {
            for b in &other.terms {
                s += a.coeff.conj() * b.coeff * kernel(&a.alphas, &b.alphas);
            }
        }
        s
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> LabResult<C64> {
        inner_product(self, other)
    }

    pub fn fidelity(&self, other: &Self) -> LabResult<f64> {
        let ip = self.inner(other)?;
        Ok(ip.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    fn check_mode(&self, mode: usize) -> LabResult<()> {
        if mode >= self.num_modes {
            Err(LabError::ModeOutOfRange { mode, num_modes: self.num_modes })
        } else {
            Ok(())
        }
    }

    /// Same labels, each term's coefficient and labels rewritten by `f`.
    pub fn map_terms<F: Fn(&CoherentTerm) -> CoherentTerm>(&self, f: F) -> Self {
        Self { num_modes: self.num_modes, terms: self.terms.iter().map(f).collect() }.merged()
    }

    /// `a_mode ψ` (unnormalized): each term picks up its label on that mode.
    pub fn apply_annihilation(&self, mode: usize) -> LabResult<Self> {
        self.check_mode(mode)?;
        Ok(self.map_terms(|t| CoherentTerm::new(t.coeff * t.alphas[mode], t.alphas.clone())))
    }

    /// `e^{iθ a†a}` on one mode.
    pub fn apply_phase_shift(&self, mode: usize, theta: f64) -> LabResult<Self> {
        self.check_mode(mode)?;
        let ph = C64::from_polar(1.0, theta);
        Ok(self.map_terms(|t| {
            let mut a = t.alphas.clone();
            a[mode] *= ph;
            CoherentTerm::new(t.coeff, a)
        }))
    }

    /// `e^{iπ a†a}` on one mode.
    pub fn apply_parity(&self, mode: usize) -> LabResult<Self> {
        self.check_mode(mode)?;
        Ok(self.map_terms(|t| {
            let mut a = t.alphas.clone();
            a[mode] = -a[mode];
            CoherentTerm::new(t.coeff, a)
        }))
    }

    /// `D(β)` on one mode: `D(β)|α⟩ = e^{(βᾱ − β̄α)/2} |α + β⟩`.
    pub fn apply_displacement(&self, mode: usize, beta: C64) -> LabResult<Self> {
        self.check_mode(mode)?;
        Ok(self.map_terms(|t| {
            let a = t.alphas[mode];
            let phase = ((beta * a.conj() - beta.conj() * a) * 0.5).exp();
            let mut labels = t.alphas.clone();
            labels[mode] = a + beta;
            CoherentTerm::new(t.coeff * phase, labels)
        }))
    }

    /// Passive two-mode transformation acting linearly on the labels:
    /// `(α_i, α_j) ← m · (α_i, α_j)`.
    pub fn apply_label_map(&self, i: usize, j: usize, m: [[C64; 2]; 2]) -> LabResult<Self> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(LabError::InvalidPartition("two-mode map needs distinct modes".into()));
        }
        Ok(self.map_terms(|t| {
            let (x, y) = (t.alphas[i], t.alphas[j]);
            let mut a = t.alphas.clone();
            a[i] = m[0][0] * x + m[0][1] * y;
            a[j] = m[1][0] * x + m[1][1] * y;
            CoherentTerm::new(t.coeff, a)
        }))
    }

    /// `⟨self| Π_k op_k |ket⟩` for single-mode normal-ordered operators on distinct modes.
    pub fn matrix_element(&self, ops: &[(usize, &ModeOp)], ket: &Self) -> LabResult<C64> {
        if self.num_modes != ket.num_modes {
            return Err(LabError::DimensionMismatch("superpositions on different mode counts".into()));
        }
        for (k, &(m, _)) in ops.iter().enumerate() {
            self.check_mode(m)?;
            if ops[..k].iter().any(|&(o, _)| o == m) {
                return Err(LabError::InvalidPartition(format!("mode {m} repeated; multiply the operators first")));
            }
        }
        let mut s = zero();
        for a in &self.terms {
            for b in &ket.terms {
                let mut v = a.coeff.conj() * b.coeff * kernel(&a.alphas, &b.alphas);
                for &(m, op) in ops {
                    v *= op.eval(a.alphas[m], b.alphas[m]);
                }
                s += v;
            }
        }
        Ok(s)
    }

    pub fn expect(&self, ops: &[(usize, &ModeOp)]) -> LabResult<C64> {
        self.matrix_element(ops, self)
    }

    pub fn mean_photon(&self, mode: usize) -> LabResult<f64> {
        Ok(self.expect(&[(mode, &ModeOp::number())])?.re / self.norm_sqr())
    }

    /// Largest `|α|` appearing on each mode.
    pub fn max_amplitudes(&self) -> Vec<f64> {
        (0..self.num_modes)
            .map(|m| self.terms.iter().map(|t| t.alphas[m].norm()).fold(0.0, f64::max))
            .collect()
    }

    /// Heuristic truncation wide enough for every term.
    pub fn default_cutoffs(&self) -> LabResult<CutoffProfile> {
        CutoffProfile::for_amplitudes(&self.max_amplitudes())
    }

    /// Fock amplitudes by coherent expansion. Fails if the normalized result puts
    /// more than the profile's tail tolerance in any top level.
    pub fn to_fock(&self, cutoffs: &CutoffProfile) -> LabResult<FockState> {
        if cutoffs.num_modes() != self.num_modes {
            return Err(LabError::DimensionMismatch("cutoff profile mode count".into()));
        }
        let mut acc = DVector::<C64>::zeros(cutoffs.dim());
        for t in &self.terms {
            let mut v = DVector::from_element(1, t.coeff);
            for (m, &a) in t.alphas.iter().enumerate() {
                v = v.kronecker(&coherent_amplitudes(a, cutoffs.cutoff(m)));
            }
            acc += v;
        }
        let psi = FockState::new(cutoffs.clone(), acc)?;
        if psi.norm() > 0.0 {
            psi.check_tail()?;
        }
        Ok(psi)
    }

    pub fn to_density(&self) -> CoherentDensity {
        let mut dyads = Vec::with_capacity(self.terms.len() * self.terms.len());
        for a in &self.terms {
            for b in &self.terms {
                dyads.push(Dyad { coeff: a.coeff * b.coeff.conj(), ket: a.alphas.clone(), bra: b.alphas.clone() });
            }
        }
        CoherentDensity { num_modes: self.num_modes, dyads }
    }

    /// Spectrum of the reduced state on `keep`.
    pub fn reduced_spectrum(&self, keep: &[usize]) -> LabResult<Vec<f64>> {
        let rho = self.to_density().scale(C64::new(1.0 / self.norm_sqr(), 0.0));
        rho.reduce(keep)?.spectrum()
    }
}

/// Conjugate-linear in `psi`, linear in `phi`.
pub fn inner_product(psi: &CoherentSuperposition, phi: &CoherentSuperposition) -> LabResult<C64> {
    if psi.num_modes != phi.num_modes {
        return Err(LabError::DimensionMismatch(format!(
            "{} vs {} modes",
            psi.num_modes, phi.num_modes
        )));
    }
    // Evaluating in a canonical argument order makes ⟨ψ|φ⟩ = conj⟨φ|ψ⟩ hold bit for bit.
    if canonical_order(psi, phi) == std::cmp::Ordering::Greater {
        Ok(phi.inner_unchecked(psi).conj())
    } else {
        Ok(psi.inner_unchecked(phi))
    }
}

fn canonical_order(a: &CoherentSuperposition, b: &CoherentSuperposition) -> std::cmp::Ordering {
    let key = |s: &CoherentSuperposition| -> Vec<f64> {
        s.terms
            .iter()
            .flat_map(|t| std::iter::once(t.coeff).chain(t.alphas.iter().copied()))
            .flat_map(|z| [z.re, z.im])
            .collect()
    };
    let (ka, kb) = (key(a), key(b));
    ka.len().cmp(&kb.len()).then_with(|| {
        ka.iter()
            .zip(&kb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// `⟨ψ| Π_j a_j†^{p_j} a_j^{q_j} |ψ⟩` with one `(p_j, q_j)` per mode.
pub fn moment(psi: &CoherentSuperposition, powers: &[(u32, u32)]) -> LabResult<C64> {
    if powers.len() != psi.num_modes {
        return Err(LabError::DimensionMismatch(format!(
            "{} monomials for {} modes",
            powers.len(),
            psi.num_modes
        )));
    }
    let ops: Vec<(usize, ModeOp)> = powers
        .iter()
        .enumerate()
        .filter(|(_, &(p, q))| p + q > 0)
        .map(|(m, &(p, q))| (m, ModeOp::monomial(p, q, C64::new(1.0, 0.0))))
        .collect();
    let refs: Vec<(usize, &ModeOp)> = ops.iter().map(|(m, o)| (*m, o)).collect();
    psi.expect(&refs)
}

/// `coeff · |ket⟩⟨bra|`
#[derive(Clone, Debug, PartialEq)]
pub struct Dyad {
    pub coeff: C64,
    pub ket: Vec<C64>,
    pub bra: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherentDensity {
    num_modes: usize,
    dyads: Vec<Dyad>,
}

impl CoherentDensity {
    pub fn new(num_modes: usize, dyads: Vec<Dyad>) -> LabResult<Self> {
        for d in &dyads {
            if d.ket.len() != num_modes || d.bra.len() != num_modes {
                return Err(LabError::DimensionMismatch("dyad label length".into()));
            }
            check_finite(&d.ket)?;
            check_finite(&d.bra)?;
        }
        Ok(Self { num_modes, dyads }.merged())
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn dyads(&self) -> &[Dyad] {
        &self.dyads
    }

    fn merged(mut self) -> Self {
        let mut out: Vec<Dyad> = Vec::with_capacity(self.dyads.len());
        for d in self.dyads.drain(..) {
            match out.iter_mut().find(|o| same_point(&o.ket, &d.ket) && same_point(&o.bra, &d.bra)) {
                Some(o) => o.coeff += d.coeff,
                None => out.push(d),
            }
        }
        out.retain(|d| d.coeff.norm() > 0.0);
        Self { num_modes: self.num_modes, dyads: out }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            num_modes: self.num_modes,
            dyads: self
                .dyads
                .iter()
                .map(|d| Dyad { coeff: d.coeff * c, ket: d.ket.clone(), bra: d.bra.clone() })
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> LabResult<Self> {
        if self.num_modes != other.num_modes {
            return Err(LabError::DimensionMismatch("densities on different mode counts".into()));
        }
        let dyads = self.dyads.iter().chain(&other.dyads).cloned().collect();
        Ok(Self { num_modes: self.num_modes, dyads }.merged())
    }

    pub fn map_dyads<F: Fn(&Dyad) -> Dyad>(&self, f: F) -> Self {
        Self { num_modes: self.num_modes, dyads: self.dyads.iter().map(f).collect() }.merged()
    }

    /// `tr ρ = Σ c ⟨bra|ket⟩`
    pub fn trace(&self) -> C64 {
        self.dyads.iter().map(|d| d.coeff * kernel(&d.bra, &d.ket)).sum()
    }

    /// Largest mismatch between a dyad and the adjoint of its partner.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for d in &self.dyads {
            let partner = self
                .dyads
                .iter()
                .find(|o| same_point(&o.ket, &d.bra) && same_point(&o.bra, &d.ket))
                .map(|o| o.coeff)
                .unwrap_or(zero());
            worst = worst.max((partner - d.coeff.conj()).norm());
        }
        worst
    }

    /// `tr ρ²`
    pub fn purity(&self) -> f64 {
        let mut s = zero();
        for a in &self.dyads {
            for b in &self.dyads {
                s += a.coeff * b.coeff * kernel(&a.bra, &b.ket) * kernel(&b.bra, &a.ket);
            }
        }
        s.re
    }

    /// `⟨ψ|ρ|ψ⟩ / ⟨ψ|ψ⟩`
    pub fn fidelity_pure(&self, psi: &CoherentSuperposition) -> LabResult<f64> {
        if psi.num_modes() != self.num_modes {
            return Err(LabError::DimensionMismatch("state and density mode counts".into()));
        }
        let mut s = zero();
        for d in &self.dyads {
            let left: C64 = psi.terms().iter().map(|t| t.coeff.conj() * kernel(&t.alphas, &d.ket)).sum();
            let right: C64 = psi.terms().iter().map(|t| t.coeff * kernel(&d.bra, &t.alphas)).sum();
            s += d.coeff * left * right;
        }
        Ok(s.re / psi.norm_sqr())
    }

    /// `tr(ρ Π_k op_k)`
    pub fn expect(&self, ops: &[(usize, &ModeOp)]) -> LabResult<C64> {
        for &(m, _) in ops {
            if m >= self.num_modes {
                return Err(LabError::ModeOutOfRange { mode: m, num_modes: self.num_modes });
            }
        }
        Ok(self
            .dyads
            .iter()
            .map(|d| {
                let mut v = d.coeff * kernel(&d.bra, &d.ket);
                for &(m, op) in ops {
                    v *= op.eval(d.bra[m], d.ket[m]);
                }
                v
            })
            .sum())
    }

    /// Trace out every mode not in `keep`; traced modes fold `⟨bra|ket⟩` into the coefficient.
    pub fn reduce(&self, keep: &[usize]) -> LabResult<CoherentDensity> {
        fock::validate_keep_set(keep, self.num_modes)?;
        let traced: Vec<usize> = (0..self.num_modes).filter(|m| !keep.contains(m)).collect();
        let dyads = self
            .dyads
            .iter()
            .map(|d| {
                let tb: Vec<C64> = traced.iter().map(|&m| d.bra[m]).collect();
                let tk: Vec<C64> = traced.iter().map(|&m| d.ket[m]).collect();
                Dyad {
                    coeff: d.coeff * kernel(&tb, &tk),
                    ket: keep.iter().map(|&m| d.ket[m]).collect(),
                    bra: keep.iter().map(|&m| d.bra[m]).collect(),
                }
            })
            .collect();
        Ok(CoherentDensity { num_modes: keep.len(), dyads }.merged())
    }

    pub fn to_fock(&self, cutoffs: &CutoffProfile) -> LabResult<DensityOperator> {
        if cutoffs.num_modes() != self.num_modes {
            return Err(LabError::DimensionMismatch("cutoff profile mode count".into()));
        }
        let d = cutoffs.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        let vec_of = |labels: &[C64]| {
            let mut v = DVector::from_element(1, C64::new(1.0, 0.0));
            for (k, &a) in labels.iter().enumerate() {
                v = v.kronecker(&coherent_amplitudes(a, cutoffs.cutoff(k)));
            }
            v
        };
        for dy in &self.dyads {
            let k = vec_of(&dy.ket) * dy.coeff;
            let b = vec_of(&dy.bra);
            m += k * b.adjoint();
        }
        DensityOperator::from_matrix_unchecked(cutoffs.clone(), m)
    }

    /// Eigenvalues (descending) via the Gram-orthogonalized coefficient matrix.
    pub fn spectrum(&self) -> LabResult<Vec<f64>> {
        let mut points: Vec<Vec<C64>> = Vec::new();
        let find = |v: &[C64], pts: &mut Vec<Vec<C64>>| -> usize {
            match pts.iter().position(|p| same_point(p, v)) {
                Some(i) => i,
                None => {
                    pts.push(v.to_vec());
                    pts.len() - 1
                }
            }
        };
        let mut entries = Vec::with_capacity(self.dyads.len());
        for d in &self.dyads {
            let i = find(&d.ket, &mut points);
            let j = find(&d.bra, &mut points);
            entries.push((i, j, d.coeff));
        }
        let n = points.len();
        if n == 0 {
            return Ok(vec![]);
        }
        let mut c = DMatrix::<C64>::zeros(n, n);
        for (i, j, v) in entries {
            c[(i, j)] += v;
        }
        let g = DMatrix::from_fn(n, n, |i, j| kernel(&points[i], &points[j]));
        let eig = SymmetricEigen::new(g);
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let kept: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > GRAM_REGULARIZATION * lmax).collect();
        let v = &eig.eigenvectors;
        let vk = DMatrix::from_fn(n, kept.len(), |i, k| v[(i, kept[k])]);
        let sq = DVector::from_fn(kept.len(), |k, _| C64::new(eig.eigenvalues[kept[k]].sqrt(), 0.0));
        let inner = vk.adjoint() * &c * &vk;
        let mut m = DMatrix::from_fn(kept.len(), kept.len(), |a, b| sq[a] * inner[(a, b)] * sq[b]);
        m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let tr_kernel = self.trace().re;
        if (m.trace().re - tr_kernel).abs() > 1e-8 * tr_kernel.abs().max(1.0) {
            return Err(LabError::IllConditionedGram(lmax / lmin.max(f64::MIN_POSITIVE)));
        }
        Ok(fock::hermitian_eigenvalues(&m))
    }
}

/// Von Neumann entropy (bits) of a dyad density from its Gram spectrum.
pub fn entropy_from_gram(rho: &CoherentDensity) -> LabResult<f64> {
    let ev = rho.spectrum()?;
    fock::check_spectrum(&ev)?;
    Ok(fock::entropy_of_spectrum(&ev))
}

pub fn reduce(rho: &CoherentDensity, keep: &[usize]) -> LabResult<CoherentDensity> {
    rho.reduce(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn cat(alpha: f64, sign: f64) -> CoherentSuperposition {
        CoherentSuperposition::new(
            1,
            vec![CoherentTerm::new(r(1.0), vec![r(alpha)]), CoherentTerm::new(r(sign), vec![r(-alpha)])],
        )
        .unwrap()
        .normalize()
        .unwrap()
    }

    #[test]
    fn kernel_values() {
        assert!((overlap_kernel(&[r(0.3)], &[r(0.3)]).unwrap() - r(1.0)).norm() < 1e-15);
        assert!((overlap_kernel(&[r(1.0)], &[r(-1.0)]).unwrap().re - (-2.0f64).exp()).abs() < 1e-15);
        let k = overlap_kernel(&[r(1.0), r(1.0)], &[r(-1.0), r(-1.0)]).unwrap();
        assert!((k.re - (-4.0f64).exp()).abs() < 1e-15);
        assert!(overlap_kernel(&[r(1.0)], &[r(1.0), r(0.0)]).is_err());
    }

    #[test]
    fn kernel_matches_fock_inner_product() {
        let a = [C64::new(0.7, 0.2), C64::new(-0.4, 0.5)];
        let b = [C64::new(-0.3, 0.1), C64::new(0.6, -0.2)];
        let cut = CutoffProfile::uniform(2, 25).unwrap();
        let fa = CoherentSuperposition::coherent(a.to_vec()).unwrap().to_fock(&cut).unwrap();
        let fb = CoherentSuperposition::coherent(b.to_vec()).unwrap().to_fock(&cut).unwrap();
        assert!((fa.inner(&fb).unwrap() - overlap_kernel(&a, &b).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn merging_sums_duplicates() {
        let s = CoherentSuperposition::new(
            1,
            vec![CoherentTerm::new(r(1.0), vec![r(0.5)]), CoherentTerm::new(r(2.0), vec![r(0.5 + 1e-14)])],
        )
        .unwrap();
        assert_eq!(s.terms().len(), 1);
        assert!((s.terms()[0].coeff - r(3.0)).norm() < 1e-15);
    }

    #[test]
    fn moments_of_coherent_and_cat() {
        let c = CoherentSuperposition::coherent(vec![r(2.0)]).unwrap();
        assert!((moment(&c, &[(1, 1)]).unwrap() - r(4.0)).norm() < 1e-12);
        let p = cat(1.3, 1.0);
        assert!((moment(&p, &[(0, 2)]).unwrap() - r(1.69)).norm() < 1e-12);
        assert!(moment(&p, &[(0, 2), (0, 0)]).is_err());
    }

    #[test]
    fn even_cat_has_no_odd_amplitudes() {
        let p = cat(1.0, 1.0);
        let f = p.to_fock(&CutoffProfile::uniform(1, 19).unwrap()).unwrap();
        for n in (1..19).step_by(2) {
            assert!(f.amplitude(&[n]).unwrap().norm() < 1e-16);
        }
        let vac = CoherentSuperposition::vacuum(1).unwrap().to_fock(&CutoffProfile::uniform(1, 4).unwrap()).unwrap();
        assert!((vac.amplitude(&[0]).unwrap() - r(1.0)).norm() < 1e-15);
    }

    #[test]
    fn reduce_product_and_trace() {
        let s = CoherentSuperposition::coherent(vec![r(0.4), C64::new(0.1, 0.3)]).unwrap();
        let red = s.to_density().reduce(&[1]).unwrap();
        assert_eq!(red.dyads().len(), 1);
        assert!((red.dyads()[0].coeff - r(1.0)).norm() < 1e-15);
        assert!(s.to_density().reduce(&[0, 1]).is_err());
    }

    #[test]
    fn gram_entropy_pure_and_effective_qubit() {
        let p = cat(1.0, 1.0).to_density();
        assert!(entropy_from_gram(&p).unwrap().abs() < 1e-10);
        // ½|α⟩⟨α| + ½|−α⟩⟨−α| at large α is a qubit with flat spectrum.
        let mix = CoherentDensity::new(
            1,
            vec![
                Dyad { coeff: r(0.5), ket: vec![r(6.0)], bra: vec![r(6.0)] },
                Dyad { coeff: r(0.5), ket: vec![r(-6.0)], bra: vec![r(-6.0)] },
            ],
        )
        .unwrap();
        assert!((entropy_from_gram(&mix).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_spectrum_matches_fock() {
        let s = CoherentSuperposition::new(
            2,
            vec![
                CoherentTerm::new(r(1.0), vec![r(0.8), C64::new(0.0, 0.5)]),
                CoherentTerm::new(C64::new(0.3, 0.4), vec![r(-0.6), r(0.2)]),
                CoherentTerm::new(r(-0.7), vec![C64::new(0.1, -0.9), r(-0.4)]),
            ],
        )
        .unwrap()
        .normalize()
        .unwrap();
        let g = s.reduced_spectrum(&[0]).unwrap();
        let cut = CutoffProfile::uniform(2, 22).unwrap();
        let f = s.to_fock(&cut).unwrap().reduced_density(&[0]).unwrap();
        let fe = f.eigenvalues();
        for k in 0..g.len() {
            assert!((g[k] - fe[k]).abs() < 1e-10, "{} vs {}", g[k], fe[k]);
        }
    }

    #[test]
    fn displacement_composes() {
        let s = CoherentSuperposition::coherent(vec![C64::new(0.2, 0.1)]).unwrap();
        let beta = C64::new(0.5, -0.3);
        let d = s.apply_displacement(0, beta).unwrap().apply_displacement(0, -beta).unwrap();
        assert!((d.inner(&s).unwrap() - r(1.0)).norm() < 1e-14);
    }

    #[test]
    fn hermitian_inner_product() {
        let a = cat(0.9, 1.0).tensor(&cat(0.4, -1.0));
        let b = cat(0.7, -1.0).tensor(&CoherentSuperposition::coherent(vec![C64::new(0.3, 0.2)]).unwrap());
        assert_eq!(inner_product(&a, &b).unwrap(), inner_product(&b, &a).unwrap().conj());
    }
}

impl crate::ops::Moments for CoherentSuperposition {
    fn mode_count(&self) -> usize {
        self.num_modes
    }

    fn moment_of(&self, ops: &[(usize, &ModeOp)]) -> LabResult<C64> {
        Ok(self.expect(ops)? / self.norm_sqr())
    }
}
