//! Named states: cats, ECS, HCS and their relatives.
//!
//! Everything that has a finite coherent expansion is built on the coherent
//! backend. Families that only exist in the number basis (Fock Bell pairs,
//! squeezed HCS, states built from explicit operators) come back as
//! [`FockState`]s. [`StateSpec`] is the JSON handle the CLI uses.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coherent::{CoherentSuperposition, CoherentTerm};
use crate::fock::{self, coherent_amplitudes, heuristic_cutoff, squeezed_cutoff, CutoffProfile, FockState};
use crate::{LabError, LabResult, C64};

/// Smallest usable squared normalization before a construction is called degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;
/// Allowed deviation of `‖U|φ⟩‖` from one.
pub const ISOMETRY_TOLERANCE: f64 = 1e-10;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Which representation an analysis runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Closed forms over coherent labels.
    #[default]
    Analytic,
    /// Truncated number basis.
    Fock,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Analytic => "analytic",
            Backend::Fock => "fock",
        }
    }
}

/// A state from either backend.
#[derive(Clone, Debug)]
pub enum State {
    Coherent(CoherentSuperposition),
    Fock(FockState),
}

impl State {
    pub fn num_modes(&self) -> usize {
        match self {
            State::Coherent(s) => s.num_modes(),
            State::Fock(s) => s.num_modes(),
        }
    }

    pub fn as_coherent(&self) -> Option<&CoherentSuperposition> {
        match self {
            State::Coherent(s) => Some(s),
            State::Fock(_) => None,
        }
    }

    pub fn default_cutoffs(&self) -> LabResult<CutoffProfile> {
        match self {
            State::Coherent(s) => s.default_cutoffs(),
            State::Fock(s) => Ok(s.cutoffs().clone()),
        }
    }

    /// Number-basis form. `None` picks the state's own default profile.
    pub fn to_fock(&self, cutoffs: Option<&CutoffProfile>) -> LabResult<FockState> {
        match (self, cutoffs) {
            (State::Coherent(s), Some(p)) => s.to_fock(p),
            (State::Coherent(s), None) => s.to_fock(&s.default_cutoffs()?),
            (State::Fock(s), Some(p)) => {
                if p.cutoffs() == s.cutoffs().cutoffs() {
                    Ok(s.clone())
                } else {
                    s.embed(p)
                }
            }
            (State::Fock(s), None) => Ok(s.clone()),
        }
    }

    /// The same state on `backend`. Number-basis states have no coherent form.
    pub fn on_backend(&self, backend: Backend, cutoffs: Option<&CutoffProfile>) -> LabResult<State> {
        match (backend, self) {
            (Backend::Fock, _) => Ok(State::Fock(self.to_fock(cutoffs)?)),
            (Backend::Analytic, State::Coherent(_)) => Ok(self.clone()),
            (Backend::Analytic, State::Fock(_)) => {
                Err(LabError::Config("state has no coherent-label form; use the fock backend".into()))
            }
        }
    }
}

impl crate::ops::Moments for State {
    fn mode_count(&self) -> usize {
        self.num_modes()
    }

    fn moment_of(&self, ops: &[(usize, &crate::ops::ModeOp)]) -> LabResult<C64> {
        match self {
            State::Coherent(s) => s.moment_of(ops),
            State::Fock(s) => s.moment_of(ops),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+", alias = "plus")]
    Plus,
    #[serde(rename = "-", alias = "minus", alias = "−")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// θ = 0 for "+", θ = π for "−".
    pub fn theta(self) -> f64 {
        match self {
            Sign::Plus => 0.0,
            Sign::Minus => PI,
        }
    }
}

/// Complex number in JSON: a bare number, `[re, im]`, or `{"re": .., "im": ..}`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Cplx(pub C64);

impl From<C64> for Cplx {
    fn from(z: C64) -> Self {
        Cplx(z)
    }
}

impl From<f64> for Cplx {
    fn from(x: f64) -> Self {
        Cplx(c(x))
    }
}

impl Serialize for Cplx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            s.serialize_f64(self.0.re)
        } else {
            [self.0.re, self.0.im].serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Cplx {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Real(f64),
            Pair([f64; 2]),
            Named { re: f64, #[serde(default)] im: f64 },
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Real(x) => Cplx(c(x)),
            Raw::Pair([re, im]) => Cplx(C64::new(re, im)),
            Raw::Named { re, im } => Cplx(C64::new(re, im)),
        })
    }
}

/// Single-mode seed `|φ⟩` for the general two-branch constructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seed {
    Coherent(Cplx),
    Fock(usize),
}

/// Operator `U` (or `V`) acting on one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Isometry {
    /// `e^{iπ a†a}`
    Parity,
    /// `e^{iθ a†a}`
    PhaseShift { theta: f64 },
    /// `e^{iθ a†a} D(β)`
    DisplacedPhase { theta: f64, beta: Cplx },
    /// `|m⟩⟨n| + |n⟩⟨m|`
    FockSwap { n: usize, m: usize },
    /// Explicit truncated matrix on a single mode.
    #[serde(skip)]
    Explicit(DMatrix<C64>),
}

/// Seed and operator together, with the overlap `⟨φ|U|φ⟩` cached.
#[derive(Clone, Debug)]
pub struct PartialIsometrySpec {
    seed: Seed,
    op: Isometry,
    overlap: C64,
    image: SingleMode,
    seed_state: SingleMode,
}

/// A fully resolved one-mode vector in the cheapest backend available.
#[derive(Clone, Debug)]
enum SingleMode {
    Coherent(CoherentSuperposition),
    Fock(FockState),
}

impl PartialIsometrySpec {
    pub fn new(seed: Seed, op: Isometry) -> LabResult<Self> {
        let (seed_state, image) = resolve(&seed, &op)?;
        let n = image_norm(&image)?;
        if (n - 1.0).abs() > ISOMETRY_TOLERANCE {
            return Err(LabError::Tolerance(format!(
                "operator is not isometric on the seed: ‖U|φ⟩‖ = {n}"
            )));
        }
        let overlap = seed_state.inner(&image)?;
        Ok(Self { seed, op, overlap, image, seed_state })
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }

    pub fn op(&self) -> &Isometry {
        &self.op
    }

    /// `z = ⟨φ|U|φ⟩` (or `w` for the HCS construction)
    pub fn overlap(&self) -> C64 {
        self.overlap
    }

    pub fn is_coherent(&self) -> bool {
        matches!(self.image, SingleMode::Coherent(_))
    }
}

impl SingleMode {
    fn inner(&self, other: &SingleMode) -> LabResult<C64> {
        match (self, other) {
            (SingleMode::Coherent(a), SingleMode::Coherent(b)) => a.inner(b),
            (SingleMode::Fock(a), SingleMode::Fock(b)) => a.inner(b),
            _ => Err(LabError::DimensionMismatch("mixed backends".into())),
        }
    }
}

fn image_norm(s: &SingleMode) -> LabResult<f64> {
    Ok(match s {
        SingleMode::Coherent(v) => v.norm_sqr().sqrt(),
        SingleMode::Fock(v) => v.norm(),
    })
}

fn resolve(seed: &Seed, op: &Isometry) -> LabResult<(SingleMode, SingleMode)> {
    if let Seed::Coherent(Cplx(alpha)) = seed {
        let phi = CoherentSuperposition::coherent(vec![*alpha])?;
        let image = match op {
            Isometry::Parity => Some(phi.apply_parity(0)?),
            Isometry::PhaseShift { theta } => Some(phi.apply_phase_shift(0, *theta)?),
            Isometry::DisplacedPhase { theta, beta } => {
                Some(phi.apply_displacement(0, beta.0)?.apply_phase_shift(0, *theta)?)
            }
            _ => None,
        };
        if let Some(image) = image {
            return Ok((SingleMode::Coherent(phi), SingleMode::Coherent(image)));
        }
    }
    let cutoff = match (seed, op) {
        (_, Isometry::Explicit(m)) => {
            if m.nrows() != m.ncols() || m.nrows() < 2 {
                return Err(LabError::DimensionMismatch("explicit operator must be square".into()));
            }
            m.nrows()
        }
        (Seed::Coherent(a), Isometry::DisplacedPhase { beta, .. }) => {
            heuristic_cutoff(a.0.norm() + beta.0.norm()) + 10
        }
        (Seed::Coherent(a), Isometry::FockSwap { n, m }) => heuristic_cutoff(a.0.norm()).max(n.max(m) + 1),
        (Seed::Coherent(a), _) => heuristic_cutoff(a.0.norm()),
        (Seed::Fock(k), Isometry::FockSwap { n, m }) => *k.max(n).max(m) + 1,
        (Seed::Fock(k), Isometry::DisplacedPhase { beta, .. }) => heuristic_cutoff(beta.0.norm()) + k + 10,
        (Seed::Fock(k), _) => k + 1,
    }
    .max(2);
    let profile = CutoffProfile::uniform(1, cutoff)?;
    let phi = match seed {
        Seed::Fock(k) => {
            if *k >= cutoff {
                return Err(LabError::InvalidCutoff(format!("seed |{k}⟩ beyond operator dimension {cutoff}")));
            }
            FockState::basis(profile.clone(), &[*k])?
        }
        Seed::Coherent(a) => FockState::new(profile.clone(), coherent_amplitudes(a.0, cutoff))?.normalize()?,
    };
    let m = match op {
        Isometry::Parity => fock::parity(0, &profile)?.local_matrix().clone(),
        Isometry::PhaseShift { theta } => fock::phase_shift(0, *theta, &profile)?.local_matrix().clone(),
        Isometry::DisplacedPhase { theta, beta } => {
            let d = fock::displacement(0, beta.0, &profile)?;
            fock::phase_shift(0, *theta, &profile)?.compose(&d)?.local_matrix().clone()
        }
        Isometry::FockSwap { n, m } => {
            if n == m {
                return Err(LabError::Config("FockSwap needs n ≠ m".into()));
            }
            let mut u = DMatrix::zeros(cutoff, cutoff);
            u[(*m, *n)] = c(1.0);
            u[(*n, *m)] = c(1.0);
            u
        }
        Isometry::Explicit(m) => m.clone(),
    };
    let image = phi.apply_local(&[0], &m);
    Ok((SingleMode::Fock(phi), SingleMode::Fock(image)))
}

/// Vector-space operations shared by the two backends.
trait Ket: Clone + Sized {
    fn plus(&self, other: &Self) -> LabResult<Self>;
    fn times(&self, c: C64) -> Self;
    fn tensor_power(&self, n: usize) -> Self;
}

impl Ket for CoherentSuperposition {
    fn plus(&self, other: &Self) -> LabResult<Self> {
        self.add(other)
    }
    fn times(&self, c: C64) -> Self {
        self.scale(c)
    }
    fn tensor_power(&self, n: usize) -> Self {
        self.power(n)
    }
}

impl Ket for FockState {
    fn plus(&self, other: &Self) -> LabResult<Self> {
        self.add(other)
    }
    fn times(&self, c: C64) -> Self {
        self.scale(c)
    }
    fn tensor_power(&self, n: usize) -> Self {
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self);
        }
        out
    }
}

fn check_modes(n: usize) -> LabResult<()> {
    if n == 0 {
        return Err(LabError::Config("need at least one mode".into()));
    }
    Ok(())
}

fn two_branch<K: Ket>(phi: &K, uphi: &K, z: C64, n: usize) -> LabResult<K> {
    let norm2 = 2.0 + 2.0 * z.powu(n as u32).re;
    if norm2 < DEGENERACY_TOLERANCE {
        return Err(LabError::DegenerateNormalization(format!("2 + 2Re(z^N) = {norm2:.3e}")));
    }
    let s = phi.tensor_power(n).plus(&uphi.tensor_power(n))?;
    Ok(s.times(c(1.0 / norm2.sqrt())))
}

fn hcs_from<K: Ket>(phi: &K, vphi: &K, w: C64, theta: f64, n: usize) -> LabResult<K> {
    if w.im.abs() > ISOMETRY_TOLERANCE {
        return Err(LabError::Tolerance(format!("⟨φ'|V|φ'⟩ must be real, got {w}")));
    }
    let w = w.re;
    if 2.0 + 2.0 * w < DEGENERACY_TOLERANCE || 2.0 - 2.0 * w < DEGENERACY_TOLERANCE {
        return Err(LabError::DegenerateNormalization(format!("w = {w} leaves a null branch")));
    }
    let e1 = phi.plus(vphi)?.times(c(1.0 / (2.0 + 2.0 * w).sqrt()));
    let e2 = phi.plus(&vphi.times(c(-1.0)))?.times(c(1.0 / (2.0 - 2.0 * w).sqrt()));
    let s = e1.tensor_power(n).plus(&e2.tensor_power(n).times(C64::from_polar(1.0, theta)))?;
    Ok(s.times(c(std::f64::consts::FRAC_1_SQRT_2)))
}

/// `(I + U^{⊗N})|φ⟩^{⊗N} / √(2 + 2Re z^N)`
pub fn build_general_two_branch(u: &PartialIsometrySpec, n: usize) -> LabResult<State> {
    check_modes(n)?;
    match (&u.seed_state, &u.image) {
        (SingleMode::Coherent(p), SingleMode::Coherent(q)) => {
            two_branch(p, q, u.overlap, n).map(State::Coherent)
        }
        (SingleMode::Fock(p), SingleMode::Fock(q)) => two_branch(p, q, u.overlap, n).map(State::Fock),
        _ => unreachable!("resolve keeps both vectors in one backend"),
    }
}

/// `(e₁^{⊗N} + e^{iθ} e₂^{⊗N})/√2` with `e_{1,2} ∝ (I ± V)|φ'⟩`
pub fn build_general_hcs(v: &PartialIsometrySpec, theta: f64, n: usize) -> LabResult<State> {
    check_modes(n)?;
    match (&v.seed_state, &v.image) {
        (SingleMode::Coherent(p), SingleMode::Coherent(q)) => {
            hcs_from(p, q, v.overlap, theta, n).map(State::Coherent)
        }
        (SingleMode::Fock(p), SingleMode::Fock(q)) => hcs_from(p, q, v.overlap, theta, n).map(State::Fock),
        _ => unreachable!("resolve keeps both vectors in one backend"),
    }
}

/// `1 - e^{-x}` without cancellation for small `x`.
fn one_minus_exp(x: f64) -> f64 {
    -(-x).exp_m1()
}

pub fn coherent_product(alphas: &[C64]) -> LabResult<CoherentSuperposition> {
    CoherentSuperposition::coherent(alphas.to_vec())
}

/// `ψ± = (|α⟩ ± |−α⟩) / √(2(1 ± e^{−2|α|²}))`
pub fn cat(alpha: C64, sign: Sign) -> LabResult<CoherentSuperposition> {
    ecs(1, alpha, sign)
}

pub fn even_cat(alpha: C64) -> LabResult<CoherentSuperposition> {
    cat(alpha, Sign::Plus)
}

pub fn odd_cat(alpha: C64) -> LabResult<CoherentSuperposition> {
    cat(alpha, Sign::Minus)
}

/// `(|α⟩^{⊗N} ± |−α⟩^{⊗N}) / √(2 ± 2e^{−2N|α|²})`
pub fn ecs(n: usize, alpha: C64, sign: Sign) -> LabResult<CoherentSuperposition> {
    check_modes(n)?;
    let x = 2.0 * n as f64 * alpha.norm_sqr();
    let norm2 = match sign {
        Sign::Plus => 2.0 + 2.0 * (-x).exp(),
        Sign::Minus => 2.0 * one_minus_exp(x),
    };
    if norm2 < DEGENERACY_TOLERANCE {
        return Err(LabError::DegenerateNormalization(format!(
            "ECS⁻ with α = {alpha} has vanishing norm"
        )));
    }
    let k = 1.0 / norm2.sqrt();
    CoherentSuperposition::new(
        n,
        vec![
            CoherentTerm::new(c(k), vec![alpha; n]),
            CoherentTerm::new(c(k * sign.value()), vec![-alpha; n]),
        ],
    )
}

/// `(ψ₊^{⊗N} + e^{iθ} ψ₋^{⊗N}) / √2`
pub fn hcs(n: usize, alpha: C64, theta: f64) -> LabResult<CoherentSuperposition> {
    check_modes(n)?;
    let even = even_cat(alpha)?.power(n);
    let odd = odd_cat(alpha)?.power(n);
    Ok(even
        .add(&odd.scale(C64::from_polar(1.0, theta)))?
        .scale(c(std::f64::consts::FRAC_1_SQRT_2)))
}

pub fn hcs_signed(n: usize, alpha: C64, sign: Sign) -> LabResult<CoherentSuperposition> {
    hcs(n, alpha, sign.theta())
}

/// The two HCS branches `ψ₊^{⊗N}` and `ψ₋^{⊗N}`.
pub fn hcs_branches(n: usize, alpha: C64) -> LabResult<[CoherentSuperposition; 2]> {
    check_modes(n)?;
    Ok([even_cat(alpha)?.power(n), odd_cat(alpha)?.power(n)])
}

/// The two branches of Ω(α): `ψ₊(α)^{⊗N}` and `(e^{iπa†a/2}ψ₋(α))^{⊗N} = ψ₋(iα)^{⊗N}`.
pub fn omega_branches(n: usize, alpha: C64) -> LabResult<[CoherentSuperposition; 2]> {
    check_modes(n)?;
    let i = C64::new(0.0, 1.0);
    Ok([even_cat(alpha)?.power(n), odd_cat(alpha * i)?.power(n)])
}

/// `Ω(α) = (ψ₊(α)^{⊗N} + ψ₋(iα)^{⊗N}) / √2`
pub fn omega(n: usize, alpha: C64) -> LabResult<CoherentSuperposition> {
    let [a, b] = omega_branches(n, alpha)?;
    Ok(a.add(&b)?.scale(c(std::f64::consts::FRAC_1_SQRT_2)))
}

/// `∝ Σ_k i^{−jk} |i^k α⟩`, the ℤ/4ℤ analogue of the even and odd cats.
pub fn z4_basis(alpha: C64, j: u32) -> LabResult<CoherentSuperposition> {
    if j > 3 {
        return Err(LabError::Config(format!("Z4 index must be 0..=3, got {j}")));
    }
    let i = C64::new(0.0, 1.0);
    let terms = (0..4)
        .map(|k| CoherentTerm::new(i.powi(-((j * k) as i32)), vec![alpha * i.powu(k)]))
        .collect();
    let s = CoherentSuperposition::new(1, terms)?;
    if s.norm_sqr() < DEGENERACY_TOLERANCE {
        return Err(LabError::DegenerateNormalization(format!("Z4 state j={j} at α = {alpha}")));
    }
    s.normalize()
}

/// Parity-group expansion of `HCS_N^±(α)` for real α: a sum over the `2^N`
/// sign patterns `k`, each weighted by `cosh^{−N/2}α² ± (−1)^{|k|} sinh^{−N/2}α²`.
pub fn build_group_expansion(n: usize, alpha: f64, sign: Sign) -> LabResult<CoherentSuperposition> {
    check_modes(n)?;
    if alpha == 0.0 {
        return Err(LabError::DegenerateNormalization("group expansion needs α ≠ 0".into()));
    }
    let a2 = alpha * alpha;
    let nf = n as f64;
    let pre = (nf * a2 / 2.0).exp() / 2f64.powf(nf + 0.5);
    let ch = a2.cosh().powf(-nf / 2.0);
    let sh = a2.sinh().powf(-nf / 2.0);
    let terms = (0..1u64 << n)
        .map(|mask| {
            let weight = mask.count_ones();
            let parity = if weight % 2 == 0 { 1.0 } else { -1.0 };
            let alphas = (0..n)
                .map(|j| if mask >> (n - 1 - j) & 1 == 1 { c(-alpha) } else { c(alpha) })
                .collect();
            CoherentTerm::new(c(pre * (ch + sign.value() * parity * sh)), alphas)
        })
        .collect();
    CoherentSuperposition::new(n, terms)
}

/// `(X⁺^{⊗M} ± X⁻^{⊗M})/√2`, renormalized numerically because the ECS blocks overlap.
fn concatenate(
    blocks: [CoherentSuperposition; 2],
    m: usize,
    sign: Sign,
) -> LabResult<CoherentSuperposition> {
    check_modes(m)?;
    let [p, q] = blocks;
    let s = p.power(m).add(&q.power(m).scale(c(sign.value())))?;
    if s.norm_sqr() < DEGENERACY_TOLERANCE {
        return Err(LabError::DegenerateNormalization("concatenated blocks cancel".into()));
    }
    s.normalize()
}

pub fn chcs(m: usize, n: usize, alpha: C64, sign: Sign) -> LabResult<CoherentSuperposition> {
    concatenate([hcs_signed(n, alpha, Sign::Plus)?, hcs_signed(n, alpha, Sign::Minus)?], m, sign)
}

pub fn cecs(m: usize, n: usize, alpha: C64, sign: Sign) -> LabResult<CoherentSuperposition> {
    concatenate([ecs(n, alpha, Sign::Plus)?, ecs(n, alpha, Sign::Minus)?], m, sign)
}

/// `(|00⟩ + |11⟩)/√2` on two modes with cutoff 2.
pub fn fock_bell() -> FockState {
    let profile = CutoffProfile::uniform(2, 2).expect("valid profile");
    let k = std::f64::consts::FRAC_1_SQRT_2;
    FockState::new(profile, DVector::from_vec(vec![c(k), c(0.0), c(0.0), c(k)])).expect("dimension matches")
}

/// Cutoff used for `S(w)^{⊗N}|Ω(αe^w)⟩`.
pub fn squeezed_hcs_cutoff(alpha: f64, w: f64) -> usize {
    squeezed_cutoff(alpha.abs() * w.abs().exp(), w)
}

/// `S(w)^{⊗N} |Ω(αe^w)⟩`: a superposition of squeezed cats centred on `±α`, `±iα`.
pub fn squeezed_hcs(n: usize, alpha: f64, w: f64) -> LabResult<FockState> {
    squeezed_hcs_with_cutoff(n, alpha, w, squeezed_hcs_cutoff(alpha, w))
}

pub fn squeezed_hcs_with_cutoff(n: usize, alpha: f64, w: f64, cutoff: usize) -> LabResult<FockState> {
    let base = omega(n, c(alpha * w.exp()))?;
    let profile = CutoffProfile::uniform(n, cutoff)?;
    let mut psi = base.to_fock(&profile)?;
    if w != 0.0 {
        let s = fock::squeeze(0, c(w), &CutoffProfile::uniform(1, cutoff)?)?;
        for mode in 0..n {
            psi = psi.apply_local(&[mode], s.local_matrix());
        }
    }
    psi.check_tail()?;
    Ok(psi)
}

/// `⟨ECS_N^e(α)|HCS_N^h(α)⟩` for real α, from `|±α⟩ = c₊ψ₊ ± c₋ψ₋`
/// with `c± = √(½ ± ½e^{−2α²})`.
pub fn ecs_hcs_overlap(n: usize, alpha: f64, ecs_sign: Sign, hcs_sign: Sign) -> f64 {
    let e = (-2.0 * alpha * alpha).exp();
    let nf = n as f64;
    let cp = (0.5 + 0.5 * e).powf(nf / 2.0);
    let cm = (0.5 - 0.5 * e).powf(nf / 2.0);
    let even = n % 2 == 0;
    let h = hcs_sign.value();
    match ecs_sign {
        Sign::Plus => (cp + if even { h * cm } else { 0.0 }) / (1.0 + (-2.0 * nf * alpha * alpha).exp()).sqrt(),
        Sign::Minus => {
            if even {
                0.0
            } else {
                h * cm / one_minus_exp(2.0 * nf * alpha * alpha).sqrt()
            }
        }
    }
}

/// The `⟨ECS_N⁺|HCS_N⁻⟩` expression with its even and odd cases in the
/// opposite order (kept to document the discrepancy).
pub fn ecs_plus_hcs_minus_swapped(n: usize, alpha: f64) -> f64 {
    let e = (-2.0 * alpha * alpha).exp();
    let nf = n as f64;
    let cp = (0.5 + 0.5 * e).powf(nf / 2.0);
    let cm = (0.5 - 0.5 * e).powf(nf / 2.0);
    let v = if n % 2 == 0 { cp } else { cp - cm };
    v / (1.0 + (-2.0 * nf * alpha * alpha).exp()).sqrt()
}

/// JSON description of a catalog state, tagged by `family`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum StateSpec {
    Coherent { alphas: Vec<Cplx> },
    EvenCat { alpha: Cplx },
    OddCat { alpha: Cplx },
    #[serde(rename = "ECS")]
    Ecs { n: usize, alpha: Cplx, sign: Sign },
    /// `theta` wins over `sign`; with neither the `+` state is built.
    #[serde(rename = "HCS")]
    Hcs {
        n: usize,
        alpha: Cplx,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sign: Option<Sign>,
    },
    Omega { n: usize, alpha: Cplx },
    Z4Basis { alpha: Cplx, j: u32 },
    #[serde(rename = "SqueezedHCS")]
    SqueezedHcs {
        n: usize,
        alpha: f64,
        w: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<usize>,
    },
    GeneralTwoBranch { n: usize, seed: Seed, op: Isometry },
    #[serde(rename = "GeneralHCS")]
    GeneralHcs {
        n: usize,
        seed: Seed,
        op: Isometry,
        #[serde(default)]
        theta: f64,
    },
    #[serde(rename = "CHCS")]
    Chcs { m: usize, n: usize, alpha: Cplx, sign: Sign },
    #[serde(rename = "CECS")]
    Cecs { m: usize, n: usize, alpha: Cplx, sign: Sign },
    FockBell,
}

impl StateSpec {
    pub fn from_json(s: &str) -> LabResult<Self> {
        serde_json::from_str(s).map_err(|e| LabError::Config(format!("bad state spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state specs always serialize")
    }
}

fn hcs_theta(theta: Option<f64>, sign: Option<Sign>) -> f64 {
    theta.unwrap_or_else(|| sign.unwrap_or(Sign::Plus).theta())
}

pub fn build(spec: &StateSpec) -> LabResult<State> {
    use StateSpec::*;
    Ok(match spec {
        Coherent { alphas } => {
            if alphas.is_empty() {
                return Err(LabError::Config("need at least one mode".into()));
            }
            State::Coherent(coherent_product(&alphas.iter().map(|a| a.0).collect::<Vec<_>>())?)
        }
        EvenCat { alpha } => State::Coherent(even_cat(alpha.0)?),
        OddCat { alpha } => State::Coherent(odd_cat(alpha.0)?),
        Ecs { n, alpha, sign } => State::Coherent(ecs(*n, alpha.0, *sign)?),
        Hcs { n, alpha, theta, sign } => State::Coherent(hcs(*n, alpha.0, hcs_theta(*theta, *sign))?),
        Omega { n, alpha } => State::Coherent(omega(*n, alpha.0)?),
        Z4Basis { alpha, j } => State::Coherent(z4_basis(alpha.0, *j)?),
        SqueezedHcs { n, alpha, w, cutoff } => State::Fock(match cutoff {
            Some(k) => squeezed_hcs_with_cutoff(*n, *alpha, *w, *k)?,
            None => squeezed_hcs(*n, *alpha, *w)?,
        }),
        GeneralTwoBranch { n, seed, op } => {
            build_general_two_branch(&PartialIsometrySpec::new(seed.clone(), op.clone())?, *n)?
        }
        GeneralHcs { n, seed, op, theta } => {
            build_general_hcs(&PartialIsometrySpec::new(seed.clone(), op.clone())?, *theta, *n)?
        }
        Chcs { m, n, alpha, sign } => State::Coherent(chcs(*m, *n, alpha.0, *sign)?),
        Cecs { m, n, alpha, sign } => State::Coherent(cecs(*m, *n, alpha.0, *sign)?),
        FockBell => State::Fock(fock_bell()),
    })
}

/// The two branches whose mean variance normalizes the usefulness ratio.
/// `None` for families without a product-branch decomposition.
pub fn branches(spec: &StateSpec) -> LabResult<Option<[CoherentSuperposition; 2]>> {
    use StateSpec::*;
    Ok(match spec {
        Ecs { n, alpha, .. } => Some([
            coherent_product(&vec![alpha.0; *n])?,
            coherent_product(&vec![-alpha.0; *n])?,
        ]),
        Hcs { n, alpha, .. } => Some(hcs_branches(*n, alpha.0)?),
        Omega { n, alpha } => Some(omega_branches(*n, alpha.0)?),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> C64 {
        c(x)
    }

    #[test]
    fn small_alpha_hcs_approaches_fock_bell() {
        let psi = hcs(2, r(1e-3), 0.0).unwrap();
        let profile = psi.default_cutoffs().unwrap();
        let bell = fock_bell().embed(&profile).unwrap();
        let f = psi.to_fock(&profile).unwrap().fidelity(&bell).unwrap();
        assert!(f > 1.0 - 1e-5, "{f}");
    }

    #[test]
    fn single_mode_ecs_is_even_cat() {
        let a = C64::new(0.8, 0.3);
        assert!((ecs(1, a, Sign::Plus).unwrap().fidelity(&even_cat(a).unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z4_support_is_one_residue_class() {
        for j in 0..4 {
            let s = z4_basis(r(1.2), j).unwrap();
            let f = s.to_fock(&s.default_cutoffs().unwrap()).unwrap();
            for (n, a) in f.amplitudes().iter().enumerate() {
                if n % 4 != j as usize {
                    assert!(a.norm() < 1e-12, "j={j} n={n} {a}");
                }
            }
            assert!((f.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_normalizations_rejected() {
        assert!(matches!(odd_cat(r(0.0)), Err(LabError::DegenerateNormalization(_))));
        assert!(matches!(ecs(3, r(0.0), Sign::Minus), Err(LabError::DegenerateNormalization(_))));
        assert!(matches!(cecs(2, 1, r(0.0), Sign::Plus), Err(LabError::DegenerateNormalization(_))));
        let v = PartialIsometrySpec::new(Seed::Fock(0), Isometry::Parity).unwrap();
        assert!(matches!(build_general_hcs(&v, 0.0, 2), Err(LabError::DegenerateNormalization(_))));
    }

    #[test]
    fn hcs_branches_orthogonal() {
        for a in [0.1, 0.5, 1.0, 2.0] {
            let [p, q] = hcs_branches(3, r(a)).unwrap();
            assert!(p.inner(&q).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn group_expansion_matches_direct() {
        for sign in [Sign::Plus, Sign::Minus] {
            for n in 1..=3 {
                let g = build_group_expansion(n, 1.0, sign).unwrap();
                let h = hcs_signed(n, r(1.0), sign).unwrap();
                assert!((g.norm_sqr() - 1.0).abs() < 1e-10);
                assert!((g.fidelity(&h).unwrap() - 1.0).abs() < 1e-10, "n={n} {sign:?}");
            }
        }
        assert_eq!(build_group_expansion(3, 0.7, Sign::Plus).unwrap().terms().len(), 8);
    }

    #[test]
    fn general_two_branch_reproduces_ecs_and_fock_pairs() {
        let a = r(0.9);
        let u = PartialIsometrySpec::new(Seed::Coherent(a.into()), Isometry::Parity).unwrap();
        assert!((u.overlap().re - (-2.0 * 0.81f64).exp()).abs() < 1e-14);
        let s = build_general_two_branch(&u, 3).unwrap();
        let f = s.as_coherent().unwrap().fidelity(&ecs(3, a, Sign::Plus).unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);

        let u = PartialIsometrySpec::new(Seed::Fock(1), Isometry::FockSwap { n: 1, m: 3 }).unwrap();
        assert_eq!(u.overlap(), r(0.0));
        let State::Fock(s) = build_general_two_branch(&u, 2).unwrap() else { panic!() };
        let k = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitude(&[1, 1]).unwrap() - r(k)).norm() < 1e-15);
        assert!((s.amplitude(&[3, 3]).unwrap() - r(k)).norm() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn general_hcs_with_parity_is_hcs() {
        let a = C64::new(0.6, 0.4);
        let v = PartialIsometrySpec::new(Seed::Coherent(a.into()), Isometry::Parity).unwrap();
        let s = build_general_hcs(&v, 0.7, 2).unwrap();
        let f = s.as_coherent().unwrap().fidelity(&hcs(2, a, 0.7).unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fock_route_agrees_with_coherent_route() {
        // D(β)|0⟩ is coherent, so a vacuum seed can be run through either backend
        let op = Isometry::DisplacedPhase { theta: 0.4, beta: C64::new(0.7, -0.3).into() };
        let coh = PartialIsometrySpec::new(Seed::Coherent(r(0.0).into()), op.clone()).unwrap();
        let num = PartialIsometrySpec::new(Seed::Fock(0), op).unwrap();
        assert!(coh.is_coherent() && !num.is_coherent());
        assert!((coh.overlap() - num.overlap()).norm() < 1e-10);
        let State::Fock(f) = build_general_two_branch(&num, 2).unwrap() else { panic!() };
        let g = build_general_two_branch(&coh, 2).unwrap().to_fock(Some(f.cutoffs())).unwrap();
        assert!((f.fidelity(&g).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ecs_hcs_overlaps_match_kernel_sums() {
        for n in 1..=4 {
            for a in [0.5, 1.0, 2.0] {
                for es in [Sign::Plus, Sign::Minus] {
                    for hs in [Sign::Plus, Sign::Minus] {
                        let direct = ecs(n, r(a), es).unwrap().inner(&hcs_signed(n, r(a), hs).unwrap()).unwrap();
                        let closed = ecs_hcs_overlap(n, a, es, hs);
                        assert!((direct.re - closed).abs() < 1e-12 && direct.im.abs() < 1e-14, "{n} {a} {es:?} {hs:?}");
                    }
                }
            }
        }
        let e2 = (-2.0f64).exp();
        let expect = (0.5 + e2 / 2.0).powf(1.5) / (1.0 + (-6.0f64).exp()).sqrt();
        assert!((ecs_hcs_overlap(3, 1.0, Sign::Plus, Sign::Plus) - expect).abs() < 1e-15);
        // N = 1: ⟨ψ₊|(ψ₊ − ψ₋)/√2⟩ = 1/√2, which the swapped form misses
        assert!((ecs_hcs_overlap(1, 2.0, Sign::Plus, Sign::Minus) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(ecs_plus_hcs_minus_swapped(1, 2.0).abs() < 1e-3);
    }

    #[test]
    fn concatenated_states() {
        let a = r(1.0);
        let one = chcs(1, 2, a, Sign::Plus).unwrap();
        let direct = hcs_signed(2, a, Sign::Plus)
            .unwrap()
            .add(&hcs_signed(2, a, Sign::Minus).unwrap())
            .unwrap()
            .scale(r(std::f64::consts::FRAC_1_SQRT_2));
        assert!((one.fidelity(&direct).unwrap() - 1.0).abs() < 1e-12);

        // analytic norm of X⁺⊗X⁺ + X⁻⊗X⁻ with orthogonal ECS blocks is 2
        let s = cecs(2, 1, a, Sign::Minus).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spec_json_roundtrip() {
        let text = r#"{"family":"HCS","n":2,"alpha":[1.0,0.5],"sign":"-"}"#;
        let spec = StateSpec::from_json(text).unwrap();
        assert_eq!(
            spec,
            StateSpec::Hcs { n: 2, alpha: Cplx(C64::new(1.0, 0.5)), theta: None, sign: Some(Sign::Minus) }
        );
        assert_eq!(StateSpec::from_json(&spec.to_json()).unwrap(), spec);
        let s = StateSpec::from_json(r#"{"family":"GeneralTwoBranch","n":2,"seed":{"fock":0},"op":{"kind":"fock_swap","n":0,"m":2}}"#)
            .unwrap();
        assert!(matches!(build(&s).unwrap(), State::Fock(_)));
        assert!(StateSpec::from_json(r#"{"family":"Nope"}"#).is_err());
        assert!(matches!(build(&StateSpec::FockBell).unwrap(), State::Fock(_)));
    }

    #[test]
    fn squeezed_hcs_is_normalized_and_reduces_to_omega() {
        let s = squeezed_hcs(1, 0.8, 0.2).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-9);
        let z = squeezed_hcs(2, 0.8, 0.0).unwrap();
        let o = omega(2, r(0.8)).unwrap().to_fock(z.cutoffs()).unwrap();
        assert!((z.fidelity(&o).unwrap() - 1.0).abs() < 1e-12);
    }
}
