//! Beam splitters, entanglement entropy and amplitude damping.
//!
//! Damping runs on three engines: a closed map on coherent dyads, Kraus
//! operators in the number basis, and an adaptive RK4 integration of the
//! master equation. The first two are exact; the third is the independent
//! check on both.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{hcs, Backend, State};
use crate::coherent::{CoherentDensity, Dyad};
use crate::fock::{self, tail_cutoff, CutoffProfile, DensityOperator, FockOperator, FockState, DEFAULT_TAIL_TOLERANCE};
use crate::io::Table;
use crate::ops::ModeOp;
use crate::stats::{evaluate_grid, GridAxis, PhaseSpaceGrid};
use crate::{LabError, LabResult, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

// ---------------------------------------------------------------- beam splitter

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamSplitterConvention {
    /// `B(θ) = exp(iθ/2 (a_i†a_j + a_j†a_i))`
    #[default]
    Symmetric,
    /// `U_ij(θ) = exp(θ/2 (a_i†a_j − a_j†a_i))`
    Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterSpec {
    pub modes: (usize, usize),
    pub theta: f64,
    #[serde(default)]
    pub convention: BeamSplitterConvention,
}

impl BeamSplitterSpec {
    pub fn symmetric(i: usize, j: usize, theta: f64) -> Self {
        Self { modes: (i, j), theta, convention: BeamSplitterConvention::Symmetric }
    }

    pub fn rotation(i: usize, j: usize, theta: f64) -> Self {
        Self { modes: (i, j), theta, convention: BeamSplitterConvention::Rotation }
    }

    pub fn inverse(&self) -> Self {
        Self { theta: -self.theta, ..*self }
    }

    fn validate(&self, num_modes: usize) -> LabResult<()> {
        let (i, j) = self.modes;
        for m in [i, j] {
            if m >= num_modes {
                return Err(LabError::ModeOutOfRange { mode: m, num_modes });
            }
        }
        if i == j {
            return Err(LabError::InvalidPartition("beam splitter needs two distinct modes".into()));
        }
        if !self.theta.is_finite() {
            return Err(LabError::Config("beam splitter angle must be finite".into()));
        }
        Ok(())
    }

    /// `(α_i, α_j) ↦ M (α_i, α_j)` on coherent labels.
    pub fn label_matrix(&self) -> [[C64; 2]; 2] {
        let (s, co) = (self.theta / 2.0).sin_cos();
        match self.convention {
            BeamSplitterConvention::Symmetric => [[c(co), C64::new(0.0, s)], [C64::new(0.0, s), c(co)]],
            BeamSplitterConvention::Rotation => [[c(co), c(s)], [c(-s), c(co)]],
        }
    }

    /// Exponentiated generator on each fixed-total-photon block of the truncated pair.
    fn blocks(&self, ci: usize, cj: usize) -> Vec<(Vec<(usize, usize)>, DMatrix<C64>)> {
        let phi = self.theta / 2.0;
        (0..ci + cj - 1)
            .map(|total| {
                let lo = total.saturating_sub(cj - 1);
                let hi = total.min(ci - 1);
                let basis: Vec<(usize, usize)> = (lo..=hi).map(|n| (n, total - n)).collect();
                let k = basis.len();
                let mut g = DMatrix::<C64>::zeros(k, k);
                for (col, &(n, m)) in basis.iter().enumerate() {
                    // a_i† a_j |n, m⟩ = √((n+1) m) |n+1, m−1⟩
                    if n + 1 <= hi && m > 0 {
                        let v = (((n + 1) * m) as f64).sqrt();
                        let (up, down) = match self.convention {
                            BeamSplitterConvention::Symmetric => (C64::new(0.0, phi * v), C64::new(0.0, phi * v)),
                            BeamSplitterConvention::Rotation => (c(phi * v), c(-phi * v)),
                        };
                        g[(col + 1, col)] += up;
                        g[(col, col + 1)] += down;
                    }
                }
                (basis, g.exp())
            })
            .collect()
    }

    /// Dense two-mode block on `(i, j)`, mode `i` most significant.
    pub fn local_matrix(&self, ci: usize, cj: usize) -> DMatrix<C64> {
        let mut u = DMatrix::<C64>::zeros(ci * cj, ci * cj);
        for (basis, b) in self.blocks(ci, cj) {
            for (r, &(nr, mr)) in basis.iter().enumerate() {
                for (col, &(nc, mc)) in basis.iter().enumerate() {
                    u[(nr * cj + mr, nc * cj + mc)] = b[(r, col)];
                }
            }
        }
        u
    }

    pub fn fock_operator(&self, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
        self.validate(cutoffs.num_modes())?;
        let (i, j) = self.modes;
        FockOperator::local(cutoffs, vec![i, j], self.local_matrix(cutoffs.cutoff(i), cutoffs.cutoff(j)), false)
    }

    /// Block-by-block action on a number-basis vector.
    pub fn apply_fock(&self, psi: &FockState) -> LabResult<FockState> {
        let prof = psi.cutoffs();
        self.validate(prof.num_modes())?;
        let (i, j) = self.modes;
        let (ci, cj) = (prof.cutoff(i), prof.cutoff(j));
        let strides = prof.strides();
        let (si, sj) = (strides[i], strides[j]);
        let blocks = self.blocks(ci, cj);
        let amps = psi.amplitudes();
        let mut out = amps.clone();
        for base in 0..prof.dim() {
            let lv = prof.levels(base);
            if lv[i] != 0 || lv[j] != 0 {
                continue;
            }
            for (basis, u) in &blocks {
                let idx: Vec<usize> = basis.iter().map(|&(n, m)| base + n * si + m * sj).collect();
                for (r, &target) in idx.iter().enumerate() {
                    out[target] = idx.iter().enumerate().map(|(col, &src)| u[(r, col)] * amps[src]).sum();
                }
            }
        }
        FockState::new(prof.clone(), out)
    }
}

/// Coherent states map label-wise; number-basis states block-wise.
pub fn apply_beam_splitter(state: &State, spec: &BeamSplitterSpec) -> LabResult<State> {
    spec.validate(state.num_modes())?;
    match state {
        State::Coherent(s) => Ok(State::Coherent(s.apply_label_map(spec.modes.0, spec.modes.1, spec.label_matrix())?)),
        State::Fock(s) => Ok(State::Fock(spec.apply_fock(s)?)),
    }
}

// ---------------------------------------------------------------- entropy

/// Spectrum of a reduced density operator, normalized to unit trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedSpectrum {
    pub eigenvalues: Vec<f64>,
}

impl ReducedSpectrum {
    fn from_raw(mut ev: Vec<f64>) -> LabResult<Self> {
        fock::check_spectrum(&ev)?;
        let tr: f64 = ev.iter().sum();
        if !(tr > 0.0) {
            return Err(LabError::ZeroProbability);
        }
        ev.iter_mut().for_each(|l| *l /= tr);
        Ok(Self { eigenvalues: ev })
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> f64 {
        fock::entropy_of_spectrum(&self.eigenvalues)
    }

    /// Root variance of `H_E = −log₂ ρ_A` on the clipped support.
    pub fn fluctuation(&self) -> LabResult<f64> {
        fock::fluctuation_of_spectrum(&self.eigenvalues)
    }
}

pub fn reduced_spectrum(state: &State, keep: &[usize]) -> LabResult<ReducedSpectrum> {
    match state {
        State::Coherent(s) => ReducedSpectrum::from_raw(s.reduced_spectrum(keep)?),
        State::Fock(s) => ReducedSpectrum::from_raw(s.reduced_density(keep)?.eigenvalues()),
    }
}

pub fn entanglement_entropy(state: &State, keep: &[usize]) -> LabResult<f64> {
    Ok(reduced_spectrum(state, keep)?.entropy())
}

pub fn entanglement_fluctuation(state: &State, keep: &[usize]) -> LabResult<f64> {
    reduced_spectrum(state, keep)?.fluctuation()
}

/// `(S_E, ΔS_E)` of `B(θ)|HCS₂⁺(α)⟩` across the two modes.
pub fn beam_splitter_entropy(alpha: f64, theta: f64, backend: Backend) -> LabResult<(f64, f64)> {
    let psi = State::Coherent(hcs(2, c(alpha), 0.0)?).on_backend(backend, None)?;
    let out = apply_beam_splitter(&psi, &BeamSplitterSpec::symmetric(0, 1, theta))?;
    let spec = reduced_spectrum(&out, &[0])?;
    Ok((spec.entropy(), spec.fluctuation()?))
}

/// Grid over `(α, θ)` with components `S_E, dS_E`.
pub fn beam_splitter_surface(alphas: GridAxis, thetas: GridAxis, backend: Backend) -> LabResult<PhaseSpaceGrid> {
    let grid = evaluate_grid(vec!["alpha".into(), "theta".into()], vec![alphas, thetas], 2, |p| {
        let (s, ds) = beam_splitter_entropy(p[0], p[1], backend)?;
        Ok(vec![s, ds])
    })?;
    Ok(grid.with_value_names(&["S_E", "dS_E"]))
}

// ---------------------------------------------------------------- damping

/// How the rate `Γ` enters the master equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingConvention {
    /// `ρ' = Γ Σ_j ([a_j, ρ a_j†] + [a_j ρ, a_j†])`: jump rate `2Γ`, populations `∝ e^{−2Γt}`.
    #[default]
    PaperDisplay,
    /// `ρ' = Γ Σ_j (a_j ρ a_j† − ½{a_j†a_j, ρ})`: jump rate `Γ`.
    UnitRate,
}

impl DampingConvention {
    pub fn jump_rate(self, gamma: f64) -> f64 {
        match self {
            DampingConvention::PaperDisplay => 2.0 * gamma,
            DampingConvention::UnitRate => gamma,
        }
    }

    /// Single-photon survival probability `η(t)`.
    pub fn transmissivity(self, gamma: f64, t: f64) -> f64 {
        (-self.jump_rate(gamma) * t).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DampingBackend {
    /// Coherent dyad map, or Kraus operators for number-basis inputs.
    #[default]
    Analytic,
    /// Adaptive RK4 on the number-basis master equation.
    Numeric,
}

/// A density operator from either engine.
#[derive(Clone, Debug)]
pub enum Damped {
    Coherent(CoherentDensity),
    Fock(DensityOperator),
}

impl Damped {
    pub fn from_state(state: &State) -> Self {
        match state {
            State::Coherent(s) => {
                let n = s.norm_sqr();
                Damped::Coherent(s.to_density().scale(c(1.0 / n)))
            }
            State::Fock(s) => {
                let n = s.norm().powi(2);
                let rho = s.to_density();
                Damped::Fock(DensityOperator::from_matrix_unchecked(rho.cutoffs().clone(), rho.matrix().unscale(n)).expect("same shape"))
            }
        }
    }

    pub fn num_modes(&self) -> usize {
        match self {
            Damped::Coherent(r) => r.num_modes(),
            Damped::Fock(r) => r.num_modes(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Damped::Coherent(r) => r.trace().re,
            Damped::Fock(r) => r.trace(),
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            Damped::Coherent(r) => r.purity(),
            Damped::Fock(r) => r.purity(),
        }
    }

    pub fn eigenvalues(&self) -> LabResult<Vec<f64>> {
        match self {
            Damped::Coherent(r) => r.spectrum(),
            Damped::Fock(r) => Ok(r.eigenvalues()),
        }
    }

    pub fn reduced_spectrum(&self, keep: &[usize]) -> LabResult<ReducedSpectrum> {
        match self {
            Damped::Coherent(r) => ReducedSpectrum::from_raw(r.reduce(keep)?.spectrum()?),
            Damped::Fock(r) => ReducedSpectrum::from_raw(r.partial_trace(keep)?.eigenvalues()),
        }
    }

    pub fn to_fock(&self, cutoffs: &CutoffProfile) -> LabResult<DensityOperator> {
        match self {
            Damped::Coherent(r) => r.to_fock(cutoffs),
            Damped::Fock(r) if r.cutoffs().cutoffs() == cutoffs.cutoffs() => Ok(r.clone()),
            Damped::Fock(_) => Err(LabError::DimensionMismatch("density already truncated differently".into())),
        }
    }
}

/// `|α⃗⟩⟨β⃗| ↦ ⟨β⃗|α⃗⟩^{1−η} |√η α⃗⟩⟨√η β⃗|`
pub fn damp_coherent(rho: &CoherentDensity, eta: f64) -> CoherentDensity {
    let s = eta.sqrt();
    rho.map_dyads(|d| {
        let log_kernel: C64 = d
            .ket
            .iter()
            .zip(&d.bra)
            .map(|(&a, &b)| -0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + b.conj() * a)
            .sum();
        Dyad {
            coeff: d.coeff * (log_kernel * (1.0 - eta)).exp(),
            ket: d.ket.iter().map(|&a| a * s).collect(),
            bra: d.bra.iter().map(|&b| b * s).collect(),
        }
    })
}

fn ln_binomial_table(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    lf
}

/// Loss channel with survival `η` on every mode, via its Kraus sum.
pub fn damp_fock(rho: &DensityOperator, eta: f64) -> LabResult<DensityOperator> {
    let prof = rho.cutoffs().clone();
    let d = prof.dim();
    let strides = prof.strides();
    let levels: Vec<Vec<usize>> = (0..d).map(|i| prof.levels(i)).collect();
    let lf = ln_binomial_table(prof.cutoffs().iter().copied().max().unwrap_or(1));
    let mut m = rho.matrix().clone();
    for mode in 0..prof.num_modes() {
        let cut = prof.cutoff(mode);
        let st = strides[mode];
        // weight(p, q, k) = √(C(p+k,k) C(q+k,k)) η^{(p+q)/2} (1−η)^k
        let weight = |p: usize, q: usize, k: usize| -> f64 {
            let lb = |n: usize| lf[n + k] - lf[n] - lf[k];
            let lnw = 0.5 * (lb(p) + lb(q));
            lnw.exp() * eta.powf((p + q) as f64 / 2.0) * (1.0 - eta).powi(k as i32)
        };
        let src = m.clone();
        m.as_mut_slice().par_chunks_mut(d).enumerate().for_each(|(j, col)| {
            let q = levels[j][mode];
            for (i, out) in col.iter_mut().enumerate() {
                let p = levels[i][mode];
                let kmax = (cut - 1 - p).min(cut - 1 - q);
                *out = (0..=kmax).map(|k| src[(i + k * st, j + k * st)] * weight(p, q, k)).sum();
            }
        });
    }
    DensityOperator::from_matrix_unchecked(prof, m)
}

/// Per-step controls for the numeric integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegratorSettings {
    /// Largest entrywise step-doubling error accepted per step.
    pub local_tolerance: f64,
    /// Largest relative trace change accepted per step.
    pub step_trace_tolerance: f64,
    /// Largest accumulated relative trace drift before the run fails.
    pub drift_tolerance: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { local_tolerance: 1e-10, step_trace_tolerance: 1e-9, drift_tolerance: 1e-7 }
    }
}

/// `L(ρ) = κ Σ_m (a_m ρ a_m† − ½{n_m, ρ})` on the packed upper triangle.
///
/// The jump term maps `(i, j)` to `(i + s_m, j + s_m)`, which stays in the upper
/// triangle, so the triangle evolves on its own and the lower half is never stored.
struct Lindbladian {
    dim: usize,
    /// `−½κ(N_i + N_j)` per packed entry.
    decay: Vec<f64>,
    /// Per mode: packed source index and `κ√((n_i+1)(n_j+1))`, weight 0 when outside the truncation.
    source: Vec<Vec<u32>>,
    weight: Vec<Vec<f64>>,
}

/// Packed column-major index of `(i, j)` with `i ≤ j`.
fn packed(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

impl Lindbladian {
    fn new(prof: &CutoffProfile, kappa: f64) -> Self {
        let d = prof.dim();
        let strides = prof.strides();
        let lv: Vec<Vec<usize>> = (0..d).map(|i| prof.levels(i)).collect();
        let total: Vec<f64> = lv.iter().map(|l| l.iter().sum::<usize>() as f64).collect();
        let len = d * (d + 1) / 2;
        let mut decay = Vec::with_capacity(len);
        let modes = prof.num_modes();
        let mut source = vec![Vec::with_capacity(len); modes];
        let mut weight = vec![Vec::with_capacity(len); modes];
        for j in 0..d {
            for i in 0..=j {
                decay.push(-0.5 * kappa * (total[i] + total[j]));
                for m in 0..modes {
                    let (ni, nj) = (lv[i][m], lv[j][m]);
                    if ni + 1 < prof.cutoff(m) && nj + 1 < prof.cutoff(m) {
                        source[m].push(packed(i + strides[m], j + strides[m]) as u32);
                        weight[m].push(kappa * (((ni + 1) * (nj + 1)) as f64).sqrt());
                    } else {
                        source[m].push(0);
                        weight[m].push(0.0);
                    }
                }
            }
        }
        Self { dim: d, decay, source, weight }
    }

    fn apply(&self, r: &[C64], out: &mut [C64]) {
        for (p, o) in out.iter_mut().enumerate() {
            *o = r[p] * self.decay[p];
        }
        for (src, w) in self.source.iter().zip(&self.weight) {
            for (p, o) in out.iter_mut().enumerate() {
                *o += r[src[p] as usize] * w[p];
            }
        }
    }

    fn pack(&self, m: &DMatrix<C64>) -> Vec<C64> {
        (0..self.dim).flat_map(|j| (0..=j).map(move |i| m[(i, j)])).collect()
    }

    fn unpack(&self, v: &[C64]) -> DMatrix<C64> {
        let d = self.dim;
        let mut m = DMatrix::<C64>::zeros(d, d);
        for j in 0..d {
            for i in 0..=j {
                let z = v[packed(i, j)];
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
            m[(j, j)].im = 0.0;
        }
        m
    }

    fn trace(&self, v: &[C64]) -> f64 {
        (0..self.dim).map(|i| v[packed(i, i)].re).sum()
    }
}

/// Work buffers for one RK4 step.
struct Rk4 {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z }
    }

    /// `out = y + h·Φ(y)` for the classical RK4 increment `Φ`.
    fn step(&mut self, l: &Lindbladian, y: &[C64], h: f64, out: &mut [C64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        l.apply(y, k1);
        axpy(tmp, y, k1, 0.5 * h);
        l.apply(tmp, k2);
        axpy(tmp, y, k2, 0.5 * h);
        l.apply(tmp, k3);
        axpy(tmp, y, k3, h);
        l.apply(tmp, k4);
        let h6 = h / 6.0;
        for p in 0..out.len() {
            out[p] = y[p] + (k1[p] + (k2[p] + k3[p]) * 2.0 + k4[p]) * h6;
        }
    }
}

/// `out = y + a·x`
fn axpy(out: &mut [C64], y: &[C64], x: &[C64], a: f64) {
    for ((o, y), x) in out.iter_mut().zip(y).zip(x) {
        *o = y + x * a;
    }
}

/// Integrate the packed state `y` over `duration`, starting from step `h` (updated in place).
fn integrate(
    l: &Lindbladian,
    y: &mut Vec<C64>,
    duration: f64,
    h: &mut f64,
    settings: &IntegratorSettings,
) -> LabResult<()> {
    let len = y.len();
    let mut rk = Rk4::new(len);
    let (mut full, mut mid, mut half) = (vec![C64::new(0.0, 0.0); len], vec![C64::new(0.0, 0.0); len], vec![C64::new(0.0, 0.0); len]);
    let mut t = 0.0;
    while t < duration {
        let step = h.min(duration - t);
        rk.step(l, y, step, &mut full);
        rk.step(l, y, step / 2.0, &mut mid);
        rk.step(l, &mid, step / 2.0, &mut half);
        let err = half.iter().zip(&full).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / 15.0;
        let tr0 = l.trace(y);
        let trace_jump = ((l.trace(&half) - tr0) / tr0).abs();
        if trace_jump > settings.step_trace_tolerance {
            *h = step / 2.0;
        } else if err > settings.local_tolerance {
            *h = step * (0.9 * (settings.local_tolerance / err).powf(0.2)).max(0.2);
        } else {
            // local extrapolation keeps the fifth-order combination
            for ((yp, a), b) in y.iter_mut().zip(&half).zip(&full) {
                *yp = a + (a - b) / 15.0;
            }
            t += step;
            if step == *h {
                let grow = if err > 0.0 { 0.9 * (settings.local_tolerance / err).powf(0.2) } else { 4.0 };
                *h = step * grow.clamp(1.0, 4.0);
            }
            continue;
        }
        if *h < 1e-12 {
            return Err(LabError::Tolerance("integrator step underflow".into()));
        }
    }
    Ok(())
}

/// Master-equation integration to each time in `times` (nondecreasing).
///
/// Hermiticity is structural: only the upper triangle is integrated.
pub fn damp_numeric(
    rho0: &DensityOperator,
    kappa: f64,
    times: &[f64],
    settings: &IntegratorSettings,
) -> LabResult<Vec<DensityOperator>> {
    let prof = rho0.cutoffs().clone();
    if prof.dim() * (prof.dim() + 1) / 2 > u32::MAX as usize {
        return Err(LabError::InvalidCutoff("truncation too large for the numeric integrator".into()));
    }
    let l = Lindbladian::new(&prof, kappa);
    let max_level = prof.cutoffs().iter().map(|&c| c - 1).sum::<usize>().max(1) as f64;
    let mut h = 0.5 / (kappa * max_level);
    let tr0 = rho0.trace();
    let mut y = l.pack(rho0.matrix());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(LabError::Config("time grid must be nondecreasing".into()));
        }
        integrate(&l, &mut y, target - t, &mut h, settings)?;
        t = target;
        let drift = ((l.trace(&y) - tr0) / tr0).abs();
        if drift > settings.drift_tolerance {
            return Err(LabError::TraceDrift(drift));
        }
        out.push(DensityOperator::from_matrix_unchecked(prof.clone(), l.unpack(&y))?);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DampingRun {
    pub gamma: f64,
    pub times: Vec<f64>,
    pub backend: DampingBackend,
    pub convention: DampingConvention,
    /// Truncation for the numeric backend; `None` uses the state's default.
    pub cutoffs: Option<CutoffProfile>,
    pub settings: IntegratorSettings,
    pub trajectory: Vec<Damped>,
}

impl DampingRun {
    pub fn new(gamma: f64, times: Vec<f64>, backend: DampingBackend) -> LabResult<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(LabError::Config(format!("damping rate must be positive, got {gamma}")));
        }
        if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(LabError::Config("times must be finite and nonnegative".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(LabError::Config("time grid must be nondecreasing".into()));
        }
        Ok(Self {
            gamma,
            times,
            backend,
            convention: DampingConvention::default(),
            cutoffs: None,
            settings: IntegratorSettings::default(),
            trajectory: Vec::new(),
        })
    }

    pub fn with_convention(mut self, convention: DampingConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_cutoffs(mut self, cutoffs: CutoffProfile) -> Self {
        self.cutoffs = Some(cutoffs);
        self
    }
}

pub fn amplitude_damping_evolve(initial: &State, run: DampingRun) -> LabResult<DampingRun> {
    evolve_density(&Damped::from_state(initial), run)
}

pub fn evolve_density(initial: &Damped, mut run: DampingRun) -> LabResult<DampingRun> {
    let kappa = run.convention.jump_rate(run.gamma);
    run.trajectory = match (run.backend, initial) {
        (DampingBackend::Analytic, Damped::Coherent(r)) => run
            .times
            .par_iter()
            .map(|&t| Damped::Coherent(damp_coherent(r, (-kappa * t).exp())))
            .collect(),
        (DampingBackend::Analytic, Damped::Fock(r)) => run
            .times
            .par_iter()
            .map(|&t| Ok(Damped::Fock(damp_fock(r, (-kappa * t).exp())?)))
            .collect::<LabResult<_>>()?,
        (DampingBackend::Numeric, init) => {
            let prof = match (&run.cutoffs, init) {
                (Some(p), _) => p.clone(),
                (None, Damped::Fock(r)) => r.cutoffs().clone(),
                (None, Damped::Coherent(r)) => default_cutoffs_for(r)?,
            };
            let rho0 = init.to_fock(&prof)?;
            damp_numeric(&rho0, kappa, &run.times, &run.settings)?.into_iter().map(Damped::Fock).collect()
        }
    };
    Ok(run)
}

/// Mass a numeric-backend truncation may leave above its top level.
pub const NUMERIC_TAIL_MASS: f64 = 1e-12;

/// Per-mode cutoff from the largest label magnitude in any dyad, sized so that
/// at most [`NUMERIC_TAIL_MASS`] of that coherent state lies at or above the top level.
pub fn default_cutoffs_for(rho: &CoherentDensity) -> LabResult<CutoffProfile> {
    let n = rho.num_modes();
    let amps: Vec<f64> = (0..n)
        .map(|m| rho.dyads().iter().flat_map(|d| [d.ket[m].norm(), d.bra[m].norm()]).fold(0.0, f64::max))
        .collect();
    CutoffProfile::new(amps.iter().map(|&a| tail_cutoff(a, NUMERIC_TAIL_MASS)).collect(), DEFAULT_TAIL_TOLERANCE)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub entropy: f64,
    pub fluctuation: f64,
    pub trace: f64,
    pub purity: f64,
}

/// Reduced-state entropy along a damping run.
pub fn damping_entropy_trajectory(initial: &State, run: DampingRun, keep: &[usize]) -> LabResult<Vec<TrajectoryPoint>> {
    let run = amplitude_damping_evolve(initial, run)?;
    trajectory_points(&run, keep)
}

pub fn trajectory_points(run: &DampingRun, keep: &[usize]) -> LabResult<Vec<TrajectoryPoint>> {
    run.times
        .par_iter()
        .zip(&run.trajectory)
        .map(|(&t, rho)| {
            let spec = rho.reduced_spectrum(keep)?;
            Ok(TrajectoryPoint {
                t,
                entropy: spec.entropy(),
                fluctuation: spec.fluctuation()?,
                trace: rho.trace(),
                purity: rho.purity(),
            })
        })
        .collect()
}

pub fn trajectory_table(points: &[TrajectoryPoint]) -> Table {
    let mut t = Table::new(&["t", "S_E", "dS_E", "trace", "purity"]);
    for p in points {
        t.push(vec![p.t, p.entropy, p.fluctuation, p.trace, p.purity]);
    }
    t
}

/// Reduced entropy of mode 0 after damping `family(α)` on an `(α, t)` grid.
pub fn damping_entropy_surface<F>(
    family: F,
    alphas: GridAxis,
    times: GridAxis,
    gamma: f64,
    backend: DampingBackend,
    convention: DampingConvention,
) -> LabResult<PhaseSpaceGrid>
where
    F: Fn(f64) -> LabResult<State> + Sync,
{
    let ts = times.values();
    let rows = alphas
        .values()
        .par_iter()
        .map(|&a| {
            let run = DampingRun::new(gamma, ts.clone(), backend)?.with_convention(convention);
            let pts = damping_entropy_trajectory(&family(a)?, run, &[0])?;
            Ok(pts.iter().map(|p| p.entropy).collect::<Vec<f64>>())
        })
        .collect::<LabResult<Vec<Vec<f64>>>>()?;
    let grid = PhaseSpaceGrid {
        labels: vec!["alpha".into(), "t".into()],
        axes: vec![alphas, times],
        components: 1,
        values: rows.concat(),
        value_names: Vec::new(),
    };
    crate::io::ensure_finite(&grid.values)?;
    Ok(grid.with_value_names(&["S_E"]))
}

/// The evolved two-qubit density of `(|00⟩ + |11⟩)/√2` as displayed for survival `η`:
/// `½(|00⟩⟨00| + η(|00⟩⟨11| + h.c.) + (η|1⟩⟨1| + (1−η)|0⟩⟨0|)^{⊗2})`.
pub fn fock_bell_display(eta: f64) -> DMatrix<C64> {
    let single = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0 - eta), c(eta)]));
    let mut m = fock::kron(&single, &single);
    m[(0, 0)] += c(1.0);
    m[(0, 3)] += c(eta);
    m[(3, 0)] += c(eta);
    m * c(0.5)
}

/// Reduced entropy of one mode of the damped Fock Bell pair: binary entropy of `η/2`.
pub fn fock_bell_reduced_entropy(eta: f64) -> f64 {
    fock::entropy_of_spectrum(&[1.0 - eta / 2.0, eta / 2.0])
}

/// Entrywise gap between two densities, after truncating both to `cutoffs`.
pub fn max_entry_gap(a: &Damped, b: &Damped, cutoffs: &CutoffProfile) -> LabResult<f64> {
    let fa = a.to_fock(cutoffs)?;
    let fb = b.to_fock(cutoffs)?;
    Ok((fa.matrix() - fb.matrix()).map(|z| z.norm()).max())
}

/// Mean photon number of mode `mode` in a damped state.
pub fn mean_photon(rho: &Damped, mode: usize) -> LabResult<f64> {
    let n = ModeOp::number();
    match rho {
        Damped::Coherent(r) => Ok(r.expect(&[(mode, &n)])?.re / r.trace().re),
        Damped::Fock(r) => {
            let op = fock::number(mode, r.cutoffs())?;
            Ok((op.dense() * r.matrix()).trace().re / r.trace())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ecs, even_cat, fock_bell, odd_cat, Sign};
    use crate::coherent::{CoherentSuperposition, CoherentTerm};

    fn near(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn beam_splitter_identity_and_inverse() {
        let prof = CutoffProfile::uniform(2, 8).unwrap();
        let spec = BeamSplitterSpec::symmetric(0, 1, 0.0);
        let u = spec.fock_operator(&prof).unwrap();
        assert!((u.local_matrix() - DMatrix::<C64>::identity(64, 64)).map(|z| z.norm()).max() < 1e-14);
        for conv in [BeamSplitterSpec::symmetric(0, 1, 1.1), BeamSplitterSpec::rotation(1, 0, -0.7)] {
            let u = conv.fock_operator(&prof).unwrap();
            assert!(u.unitarity_defect() < 1e-12);
            let psi = FockState::basis(prof.clone(), &[2, 1]).unwrap();
            let back = conv.inverse().apply_fock(&conv.apply_fock(&psi).unwrap()).unwrap();
            assert!(near(back.fidelity(&psi).unwrap(), 1.0, 1e-12));
        }
        assert!(BeamSplitterSpec::symmetric(1, 1, 0.3).fock_operator(&prof).is_err());
    }

    #[test]
    fn blockwise_matches_dense_exponential() {
        let prof = CutoffProfile::uniform(3, 5).unwrap();
        let spec = BeamSplitterSpec::symmetric(2, 0, 0.9);
        let ad = ModeOp::creation().matrix(5);
        let a = ModeOp::annihilation().matrix(5);
        let g = fock::kron(&ad, &a) + fock::kron(&a, &ad);
        let dense = FockOperator::local(&prof, vec![2, 0], g, true).unwrap().exp_scaled(C64::new(0.0, 0.45));
        let mut v = nalgebra::DVector::<C64>::zeros(125);
        for (k, z) in v.iter_mut().enumerate() {
            *z = C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos());
        }
        let psi = FockState::new(prof, v).unwrap();
        let a1 = spec.apply_fock(&psi).unwrap();
        let a2 = psi.apply(&dense).unwrap();
        assert!((a1.amplitudes() - a2.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn backends_agree_under_beam_splitter() {
        let psi = hcs(2, c(1.2), 0.4).unwrap();
        let spec = BeamSplitterSpec::symmetric(0, 1, 0.8);
        let prof = CutoffProfile::uniform(2, 30).unwrap();
        let a = apply_beam_splitter(&State::Coherent(psi.clone()), &spec).unwrap();
        let f = apply_beam_splitter(&State::Fock(psi.to_fock(&prof).unwrap()), &spec).unwrap();
        let af = a.to_fock(Some(&prof)).unwrap();
        assert!(near(af.fidelity(f.to_fock(None).as_ref().unwrap()).unwrap(), 1.0, 1e-10));
    }

    #[test]
    fn rotation_splits_an_odd_cat() {
        let a = 1.0;
        let s2 = 2f64.sqrt();
        let input = odd_cat(c(s2 * a)).unwrap().tensor(&CoherentSuperposition::vacuum(1).unwrap());
        let out = apply_beam_splitter(&State::Coherent(input), &BeamSplitterSpec::rotation(0, 1, std::f64::consts::FRAC_PI_2)).unwrap();
        let target = CoherentSuperposition::new(
            2,
            vec![CoherentTerm::new(c(1.0), vec![c(a), c(-a)]), CoherentTerm::new(c(-1.0), vec![c(-a), c(a)])],
        )
        .unwrap()
        .normalize()
        .unwrap();
        assert!(near(out.as_coherent().unwrap().fidelity(&target).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn hcs_under_symmetric_splitter_matches_display() {
        let (a, th) = (2.0f64, 0.9f64);
        let out = apply_beam_splitter(&State::Fock(hcs(2, c(a), 0.0).unwrap().to_fock(&CutoffProfile::uniform(2, 32).unwrap()).unwrap()), &BeamSplitterSpec::symmetric(0, 1, th)).unwrap();
        let p = C64::from_polar(a, th / 2.0);
        let m = C64::from_polar(a, -th / 2.0);
        let w1 = 1.0 / (1.0 - (-4.0 * a * a).exp());
        let w2 = -1.0 / (2.0 * (2.0 * a * a).sinh());
        let display = CoherentSuperposition::new(
            2,
            vec![
                CoherentTerm::new(c(w1), vec![p, p]),
                CoherentTerm::new(c(w1), vec![-p, -p]),
                CoherentTerm::new(c(w2), vec![m, -m]),
                CoherentTerm::new(c(w2), vec![-m, m]),
            ],
        )
        .unwrap();
        let f = display.to_fock(&CutoffProfile::uniform(2, 32).unwrap()).unwrap();
        assert!(near(out.to_fock(None).unwrap().fidelity(&f).unwrap(), 1.0, 1e-10));
    }

    #[test]
    fn entropies_of_simple_states() {
        let prod = State::Coherent(even_cat(c(1.0)).unwrap().tensor(&odd_cat(c(0.5)).unwrap()));
        assert!(entanglement_entropy(&prod, &[0]).unwrap().abs() < 1e-10);
        assert!(entanglement_fluctuation(&prod, &[0]).unwrap().abs() < 1e-5);
        let h = State::Coherent(hcs(2, c(2.0), 0.0).unwrap());
        assert!(near(entanglement_entropy(&h, &[0]).unwrap(), 1.0, 1e-6));
        assert!(entanglement_fluctuation(&h, &[1]).unwrap() < 1e-6);
        let (sa, dsa) = beam_splitter_entropy(1.0, 0.7, Backend::Analytic).unwrap();
        let (sf, dsf) = beam_splitter_entropy(1.0, 0.7, Backend::Fock).unwrap();
        assert!(near(sa, sf, 1e-8) && near(dsa, dsf, 1e-6));
    }

    #[test]
    fn entropy_surface_symmetric_in_theta() {
        use std::f64::consts::PI;
        for th in [0.3, 1.0] {
            let (a, _) = beam_splitter_entropy(1.3, th, Backend::Analytic).unwrap();
            let (b, _) = beam_splitter_entropy(1.3, PI - th, Backend::Analytic).unwrap();
            assert!(near(a, b, 1e-8));
        }
    }

    #[test]
    fn coherent_state_stays_coherent() {
        let alpha = C64::new(1.2, -0.4);
        let psi = State::Coherent(CoherentSuperposition::coherent(vec![alpha]).unwrap());
        let run = DampingRun::new(0.1, vec![0.0, 2.0, 7.0], DampingBackend::Analytic).unwrap();
        let run = amplitude_damping_evolve(&psi, run).unwrap();
        for (t, rho) in run.times.iter().zip(&run.trajectory) {
            assert!(near(rho.purity(), 1.0, 1e-8));
            let Damped::Coherent(r) = rho else { panic!() };
            assert_eq!(r.dyads().len(), 1);
            assert!((r.dyads()[0].ket[0] - alpha * (-0.1 * t).exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn three_engines_agree() {
        let psi = State::Coherent(hcs(2, c(1.0), 0.0).unwrap());
        let prof = CutoffProfile::uniform(2, 16).unwrap();
        let times = vec![0.0, 1.5, 6.0];
        let a = amplitude_damping_evolve(&psi, DampingRun::new(0.1, times.clone(), DampingBackend::Analytic).unwrap()).unwrap();
        let n = amplitude_damping_evolve(&psi, DampingRun::new(0.1, times.clone(), DampingBackend::Numeric).unwrap().with_cutoffs(prof.clone())).unwrap();
        let k = amplitude_damping_evolve(&State::Fock(psi.to_fock(Some(&prof)).unwrap()), DampingRun::new(0.1, times, DampingBackend::Analytic).unwrap()).unwrap();
        for i in 0..3 {
            assert!(max_entry_gap(&a.trajectory[i], &n.trajectory[i], &prof).unwrap() < 1e-8);
            assert!(max_entry_gap(&k.trajectory[i], &n.trajectory[i], &prof).unwrap() < 1e-8);
            assert!(near(n.trajectory[i].trace(), 1.0, 1e-7));
        }
    }

    #[test]
    fn fock_bell_reproduces_display() {
        let psi = State::Fock(fock_bell());
        let gamma = 0.1;
        let times: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|gt| gt / gamma).collect();
        for backend in [DampingBackend::Analytic, DampingBackend::Numeric] {
            let run = amplitude_damping_evolve(&psi, DampingRun::new(gamma, times.clone(), backend).unwrap()).unwrap();
            for (t, rho) in times.iter().zip(&run.trajectory) {
                let Damped::Fock(r) = rho else { panic!() };
                let want = fock_bell_display((-2.0 * gamma * t).exp());
                assert!((r.matrix() - want).map(|z| z.norm()).max() < 1e-8);
            }
        }
        // the unit-rate reading does not reproduce the display
        let run = amplitude_damping_evolve(
            &psi,
            DampingRun::new(gamma, vec![10.0], DampingBackend::Analytic).unwrap().with_convention(DampingConvention::UnitRate),
        )
        .unwrap();
        let Damped::Fock(r) = &run.trajectory[0] else { panic!() };
        assert!((r.matrix() - fock_bell_display((-2.0f64).exp())).map(|z| z.norm()).max() > 1e-2);
        assert!(fock_bell_reduced_entropy(0.0).abs() < 1e-15);
        assert!(near(fock_bell_reduced_entropy(1.0), 1.0, 1e-15));
    }

    #[test]
    fn ecs_loses_entanglement_and_hcs_keeps_it() {
        let run = || DampingRun::new(0.1, vec![0.0, 10.0, 50.0, 90.0], DampingBackend::Analytic).unwrap();
        let e = damping_entropy_trajectory(&State::Coherent(ecs(2, c(1.0), Sign::Minus).unwrap()), run(), &[0]).unwrap();
        assert!(e[0].entropy > 0.9 && e[2].entropy < 0.05);
        assert!(e.windows(2).all(|w| w[1].entropy < w[0].entropy));
        let small = damping_entropy_trajectory(&State::Coherent(hcs(2, c(0.5), 0.0).unwrap()), run(), &[0]).unwrap();
        assert!(small[1].entropy > 0.2 && small[1].entropy < 0.9);
        let h = damping_entropy_trajectory(&State::Coherent(hcs(2, c(2.0), 0.0).unwrap()), run(), &[0]).unwrap();
        assert!(near(h[0].entropy, 1.0, 1e-6));
        assert!(h.iter().all(|p| p.entropy <= 1.0 + 1e-9 && near(p.trace, 1.0, 1e-12)));
    }

    #[test]
    fn mean_photon_decays_exponentially() {
        let psi = State::Coherent(hcs(2, c(1.5), 0.0).unwrap());
        let run = amplitude_damping_evolve(&psi, DampingRun::new(0.2, vec![0.0, 3.0], DampingBackend::Analytic).unwrap()).unwrap();
        let n0 = mean_photon(&run.trajectory[0], 0).unwrap();
        let n1 = mean_photon(&run.trajectory[1], 0).unwrap();
        assert!(near(n1 / n0, (-0.4f64 * 3.0).exp(), 1e-12));
    }

    #[test]
    fn bad_runs_rejected() {
        assert!(DampingRun::new(0.0, vec![1.0], DampingBackend::Analytic).is_err());
        assert!(DampingRun::new(0.1, vec![2.0, 1.0], DampingBackend::Analytic).is_err());
        assert!(DampingRun::new(0.1, vec![-1.0], DampingBackend::Numeric).is_err());
    }
}
