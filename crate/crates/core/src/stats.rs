//! Photon statistics, quadrature variances and phase-space functions.
//!
//! Every quantity is available on both backends. Closed forms for the
//! two-mode HCS sit next to the brute-force evaluators so tests can compare.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::{even_cat, odd_cat, State};
use crate::coherent::{CoherentDensity, CoherentSuperposition};
use crate::fock::{coherent_amplitudes, displacement, heuristic_cutoff, CutoffProfile, FockState};
use crate::io::{ensure_finite, fmt_num};
use crate::ops::{ModeOp, Moments};
use crate::{LabError, LabResult, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `P(n⃗)` over the box `0 ≤ n_j ≤ max_n[j]`, row-major with mode 0 slowest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhotonDistribution {
    pub max_n: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl PhotonDistribution {
    fn profile(&self) -> CutoffProfile {
        CutoffProfile::new(self.max_n.iter().map(|m| m + 1).collect(), 0.0).expect("nonzero box")
    }

    pub fn get(&self, levels: &[usize]) -> LabResult<f64> {
        Ok(self.probabilities[self.profile().index(levels)?])
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let p = self.profile();
        self.probabilities.iter().enumerate().map(move |(i, &v)| (p.levels(i), v))
    }
}

fn check_box(max_n: &[usize], modes: usize) -> LabResult<()> {
    if max_n.len() != modes {
        return Err(LabError::DimensionMismatch(format!("{} bounds for {modes} modes", max_n.len())));
    }
    Ok(())
}

/// Amplitudes of a coherent superposition on an arbitrary box, with no tail requirement.
pub fn coherent_box_amplitudes(psi: &CoherentSuperposition, dims: &[usize]) -> DVector<C64> {
    let size: usize = dims.iter().product();
    let mut acc = DVector::<C64>::zeros(size);
    for t in psi.terms() {
        let mut v = DVector::from_element(1, t.coeff);
        for (m, &a) in t.alphas.iter().enumerate() {
            v = v.kronecker(&coherent_amplitudes(a, dims[m]));
        }
        acc += v;
    }
    acc.unscale(psi.norm_sqr().sqrt())
}

pub fn photon_number_distribution(state: &State, max_n: &[usize]) -> LabResult<PhotonDistribution> {
    check_box(max_n, state.num_modes())?;
    let dims: Vec<usize> = max_n.iter().map(|m| m + 1).collect();
    let probabilities = match state {
        State::Coherent(psi) => coherent_box_amplitudes(psi, &dims).iter().map(|a| a.norm_sqr()).collect(),
        State::Fock(psi) => {
            let prof = psi.cutoffs();
            for (mode, (&d, &cut)) in dims.iter().zip(prof.cutoffs()).enumerate() {
                if d > cut {
                    return Err(LabError::InvalidCutoff(format!(
                        "max_n {} on mode {mode} exceeds cutoff {cut}",
                        d - 1
                    )));
                }
            }
            let n2 = psi.norm().powi(2);
            let target = CutoffProfile::new(dims.clone(), 0.0)?;
            (0..target.dim())
                .map(|i| Ok(psi.amplitude(&target.levels(i))?.norm_sqr() / n2))
                .collect::<LabResult<Vec<f64>>>()?
        }
    };
    Ok(PhotonDistribution { max_n: max_n.to_vec(), probabilities })
}

/// `(‖P_e ψ‖², ‖P_o ψ‖²)` for the total photon-number parity.
pub fn parity_weights(state: &State) -> LabResult<(f64, f64)> {
    match state {
        State::Coherent(psi) => {
            let mut flipped = psi.clone();
            for m in 0..psi.num_modes() {
                flipped = flipped.apply_parity(m)?;
            }
            let n2 = psi.norm_sqr();
            let p = psi.inner(&flipped)?.re / n2;
            Ok(((1.0 + p) / 2.0, (1.0 - p) / 2.0))
        }
        State::Fock(psi) => {
            let prof = psi.cutoffs();
            let n2 = psi.norm().powi(2);
            let mut even = 0.0;
            for (i, a) in psi.amplitudes().iter().enumerate() {
                if prof.levels(i).iter().sum::<usize>() % 2 == 0 {
                    even += a.norm_sqr();
                }
            }
            Ok((even / n2, 1.0 - even / n2))
        }
    }
}

/// `Var(x^(θ))` on one mode.
pub fn quadrature_variance<M: Moments + ?Sized>(psi: &M, mode: usize, theta: f64) -> LabResult<f64> {
    let x = ModeOp::quadrature(theta);
    let x2 = x.mul(&x);
    let m1 = psi.mean_of(mode, &x)?.re;
    Ok(psi.mean_of(mode, &x2)?.re - m1 * m1)
}

/// `1/2 + |α|²(coth 2|α|² + cos(2 Arg α − 2θ))`, valid for `HCS_N^±` with `N ≥ 2`.
pub fn hcs_quadrature_variance(alpha: C64, theta: f64) -> f64 {
    let a2 = alpha.norm_sqr();
    0.5 + a2 * (1.0 / (2.0 * a2).tanh() + (2.0 * alpha.arg() - 2.0 * theta).cos())
}

/// Smallest variance over `count` equally spaced angles in `[0, π)`.
pub fn min_quadrature_variance<M: Moments + ?Sized>(psi: &M, mode: usize, count: usize) -> LabResult<(f64, f64)> {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..count {
        let th = PI * k as f64 / count as f64;
        let v = quadrature_variance(psi, mode, th)?;
        if v < best.0 {
            best = (v, th);
        }
    }
    Ok(best)
}

const MEAN_PHOTON_FLOOR: f64 = 1e-14;

/// `Q_M = (⟨n²⟩ − ⟨n⟩² − ⟨n⟩)/⟨n⟩`.
///
/// On the coherent backend the numerator `⟨a†²a²⟩ − ⟨a†a⟩²` is evaluated as
/// `½ Σ W_x W_y (x − y)²` over dyad weights grouped by `x = ᾱβ`, which keeps
/// the sign of the tiny sub-Poissonian deficit for large α.
pub fn mandel_q(state: &State, mode: usize) -> LabResult<f64> {
    match state {
        State::Coherent(psi) => mandel_q_coherent(psi, mode),
        State::Fock(psi) => mandel_q_moments(psi, mode),
    }
}

pub fn mandel_q_moments<M: Moments + ?Sized>(psi: &M, mode: usize) -> LabResult<f64> {
    let n = psi.mean_of(mode, &ModeOp::number())?.re;
    if n.abs() < MEAN_PHOTON_FLOOR {
        return Err(LabError::Undefined("Mandel Q at zero mean photon number".into()));
    }
    let f2 = psi.mean_of(mode, &ModeOp::monomial(2, 2, c(1.0)))?.re;
    Ok((f2 - n * n) / n)
}

fn mandel_q_coherent(psi: &CoherentSuperposition, mode: usize) -> LabResult<f64> {
    if mode >= psi.num_modes() {
        return Err(LabError::ModeOutOfRange { mode, num_modes: psi.num_modes() });
    }
    let n2 = psi.norm_sqr();
    let mut groups: Vec<(C64, C64)> = Vec::new();
    for a in psi.terms() {
        for b in psi.terms() {
            let w = a.coeff.conj() * b.coeff * crate::coherent::overlap_kernel(&a.alphas, &b.alphas)? / n2;
            let x = a.alphas[mode].conj() * b.alphas[mode];
            match groups.iter_mut().find(|(g, _)| (*g - x).norm() <= 1e-12 * (1.0 + x.norm())) {
                Some(g) => g.1 += w,
                None => groups.push((x, w)),
            }
        }
    }
    let mean: C64 = groups.iter().map(|(x, w)| x * w).sum();
    if mean.re.abs() < MEAN_PHOTON_FLOOR {
        return Err(LabError::Undefined("Mandel Q at zero mean photon number".into()));
    }
    let mut spread = C64::new(0.0, 0.0);
    for (i, (x, w)) in groups.iter().enumerate() {
        for (y, v) in &groups[i + 1..] {
            spread += w * v * (x - y) * (x - y);
        }
    }
    Ok(spread.re / mean.re)
}

/// `Q_M(HCS_N^±(α)) = −2|α|²/sinh(4|α|²)` for `N ≥ 2`.
pub fn hcs_mandel_q(alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    if a2 == 0.0 {
        -0.5
    } else {
        -2.0 * a2 / (4.0 * a2).sinh()
    }
}

/// `(1/π^N)|⟨β⃗|ψ⟩|²`
pub fn husimi_q(state: &State, beta: &[C64]) -> LabResult<f64> {
    if beta.len() != state.num_modes() {
        return Err(LabError::DimensionMismatch("one β per mode".into()));
    }
    let amp = match state {
        State::Coherent(psi) => {
            let probe = CoherentSuperposition::coherent(beta.to_vec())?;
            probe.inner(psi)? / psi.norm_sqr().sqrt()
        }
        State::Fock(psi) => {
            let probe = FockState::product(
                &beta
                    .iter()
                    .enumerate()
                    .map(|(m, &b)| coherent_amplitudes(b, psi.cutoffs().cutoff(m)))
                    .collect::<Vec<_>>(),
            )?;
            probe.inner(psi)? / psi.norm()
        }
    };
    Ok(amp.norm_sqr() / PI.powi(beta.len() as i32))
}

/// Single-mode Q-functions of the even and odd cats.
pub fn cat_q(alpha: C64, beta: C64) -> (f64, f64) {
    let u = beta.conj() * alpha;
    let a2 = alpha.norm_sqr();
    let g = (-beta.norm_sqr()).exp() / PI;
    (g * u.cosh().norm_sqr() / a2.cosh(), g * u.sinh().norm_sqr() / a2.sinh())
}

/// Closed form of the `HCS_2^+(α)` Q-function (normalized to unit integral),
/// with `u_j = β̄_j α`.
pub fn hcs2_plus_q(alpha: C64, b1: C64, b2: C64) -> f64 {
    let (p1, m1) = cat_q(alpha, b1);
    let (p2, m2) = cat_q(alpha, b2);
    let u1 = b1.conj() * alpha;
    let u2 = b2.conj() * alpha;
    let a2 = alpha.norm_sqr();
    let cross = (-(b1.norm_sqr() + b2.norm_sqr())).exp() / (2.0 * PI * PI * (2.0 * a2).sinh())
        * ((2.0 * u1.re).sinh() * (2.0 * u2.re).sinh() - (2.0 * u1.im).sin() * (2.0 * u2.im).sin());
    0.5 * (p1 * p2 + m1 * m2) + cross
}

/// `(2/π)^k ⟨D(γ⃗) Π D(−γ⃗)⟩` over the modes in `modes`, i.e. the Wigner
/// function of the reduced state there, normalized to unit integral.
pub fn wigner(state: &State, modes: &[usize], gamma: &[C64]) -> LabResult<f64> {
    check_wigner_args(state.num_modes(), modes, gamma)?;
    let pre = (2.0 / PI).powi(modes.len() as i32);
    match state {
        State::Coherent(psi) => {
            let mut phi = psi.clone();
            for (&m, &g) in modes.iter().zip(gamma) {
                phi = phi.apply_displacement(m, -g)?;
            }
            let mut flipped = phi.clone();
            for &m in modes {
                flipped = flipped.apply_parity(m)?;
            }
            Ok(pre * phi.inner(&flipped)?.re / psi.norm_sqr())
        }
        State::Fock(psi) => {
            let wide: Vec<usize> = (0..psi.num_modes())
                .map(|m| match modes.iter().position(|&k| k == m) {
                    Some(i) => psi.cutoffs().cutoff(m) + heuristic_cutoff(gamma[i].norm()),
                    None => psi.cutoffs().cutoff(m),
                })
                .collect();
            let prof = CutoffProfile::new(wide, psi.cutoffs().tail_tolerance())?;
            let mut phi = psi.embed(&prof)?;
            for (&m, &g) in modes.iter().zip(gamma) {
                phi = phi.apply(&displacement(m, -g, &prof)?)?;
            }
            let mut s = 0.0;
            for (i, a) in phi.amplitudes().iter().enumerate() {
                let lv = prof.levels(i);
                let n: usize = modes.iter().map(|&m| lv[m]).sum();
                s += if n % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() };
            }
            Ok(pre * s / psi.norm().powi(2))
        }
    }
}

/// Wigner function of a dyad-set density on `modes`.
pub fn wigner_density(rho: &CoherentDensity, modes: &[usize], gamma: &[C64]) -> LabResult<f64> {
    check_wigner_args(rho.num_modes(), modes, gamma)?;
    let pre = (2.0 / PI).powi(modes.len() as i32);
    let mut s = C64::new(0.0, 0.0);
    for d in rho.dyads() {
        let mut ket = CoherentSuperposition::coherent(d.ket.clone())?;
        let mut bra = CoherentSuperposition::coherent(d.bra.clone())?;
        for (&m, &g) in modes.iter().zip(gamma) {
            ket = ket.apply_displacement(m, -g)?.apply_parity(m)?;
            bra = bra.apply_displacement(m, -g)?;
        }
        s += d.coeff * bra.inner(&ket)?;
    }
    Ok(pre * s.re / rho.trace().re)
}

fn check_wigner_args(num_modes: usize, modes: &[usize], gamma: &[C64]) -> LabResult<()> {
    if modes.is_empty() || modes.len() != gamma.len() {
        return Err(LabError::DimensionMismatch("one γ per selected mode".into()));
    }
    for (i, &m) in modes.iter().enumerate() {
        if m >= num_modes {
            return Err(LabError::ModeOutOfRange { mode: m, num_modes });
        }
        if modes[..i].contains(&m) {
            return Err(LabError::InvalidPartition(format!("mode {m} listed twice")));
        }
    }
    Ok(())
}

/// Bargmann function `f(z⃗) = Σ c_n⃗ Π z_j^{n_j}/√(n_j!)`, normalized state.
///
/// For coherent superpositions the series is summed exactly,
/// `Σ c Π exp(−|α_j|²/2 + α_j z_j)`. For number-basis states the finite series
/// is summed and rejected if the outermost shell contributes more than `tolerance`.
pub fn bargmann(state: &State, z: &[C64], tolerance: f64) -> LabResult<C64> {
    if z.len() != state.num_modes() {
        return Err(LabError::DimensionMismatch("one z per mode".into()));
    }
    match state {
        State::Coherent(psi) => {
            let mut s = C64::new(0.0, 0.0);
            for t in psi.terms() {
                let e: C64 = t.alphas.iter().zip(z).map(|(a, zz)| -0.5 * a.norm_sqr() + a * zz).sum();
                s += t.coeff * e.exp();
            }
            Ok(s / psi.norm_sqr().sqrt())
        }
        State::Fock(psi) => bargmann_series(psi, z, tolerance),
    }
}

pub fn bargmann_series(psi: &FockState, z: &[C64], tolerance: f64) -> LabResult<C64> {
    let prof = psi.cutoffs();
    let monomials: Vec<Vec<C64>> = z
        .iter()
        .enumerate()
        .map(|(m, &zz)| {
            let mut v = Vec::with_capacity(prof.cutoff(m));
            let mut cur = c(1.0);
            for n in 0..prof.cutoff(m) {
                if n > 0 {
                    cur *= zz / (n as f64).sqrt();
                }
                v.push(cur);
            }
            v
        })
        .collect();
    let mut s = C64::new(0.0, 0.0);
    let mut edge = vec![0.0; z.len()];
    for (i, a) in psi.amplitudes().iter().enumerate() {
        let lv = prof.levels(i);
        let term = lv.iter().enumerate().fold(*a, |acc, (m, &n)| acc * monomials[m][n]);
        for (m, &n) in lv.iter().enumerate() {
            if n + 1 == prof.cutoff(m) {
                edge[m] += term.norm();
            }
        }
        s += term;
    }
    if let Some((mode, &tail)) = edge.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        if tail > tolerance {
            return Err(LabError::TailViolation { mode, tail, tolerance });
        }
    }
    Ok(s / psi.norm())
}

/// Closed-form Bargmann function of `HCS_2^±(α)`.
/// `+`: `√2 e^{−|α|²}(cosh α(z+w) − e^{−2|α|²} cosh α(z−w))/(1 − e^{−4|α|²})`,
/// `−`: the same with `z+w` and `z−w` exchanged.
pub fn hcs2_bargmann(alpha: C64, plus: bool, z: C64, w: C64) -> C64 {
    let a2 = alpha.norm_sqr();
    let (lead, sub) = if plus { (z + w, z - w) } else { (z - w, z + w) };
    let num = (alpha * lead).cosh() - (-2.0 * a2).exp() * (alpha * sub).cosh();
    num * (2f64.sqrt() * (-a2).exp() / -(-4.0 * a2).exp_m1())
}

/// The same closed form with a literal `∓` on the second term and no exchange.
pub fn hcs2_bargmann_printed(alpha: C64, plus: bool, z: C64, w: C64) -> C64 {
    let a2 = alpha.norm_sqr();
    let s = if plus { -1.0 } else { 1.0 };
    let num = (alpha * (z + w)).cosh() + s * (-2.0 * a2).exp() * (alpha * (z - w)).cosh();
    num * (2f64.sqrt() * (-a2).exp() / -(-4.0 * a2).exp_m1())
}

/// The two-dimensional subspace `K` spanned by a pair of orthogonal cats,
/// truncated to `cutoff` levels and renormalized.
#[derive(Clone, Debug)]
pub struct CatSubspace {
    basis: DMatrix<C64>,
}

impl CatSubspace {
    /// `span{ψ₊(α), ψ₋(α)}`
    pub fn standard(alpha: C64, cutoff: usize) -> LabResult<Self> {
        Self::from_pair(&even_cat(alpha)?, &odd_cat(alpha)?, cutoff)
    }

    /// `span{ψ₊(α), e^{iπa†a/2}ψ₋(α)}`
    pub fn omega(alpha: C64, cutoff: usize) -> LabResult<Self> {
        Self::from_pair(&even_cat(alpha)?, &odd_cat(alpha * C64::new(0.0, 1.0))?, cutoff)
    }

    fn from_pair(p: &CoherentSuperposition, q: &CoherentSuperposition, cutoff: usize) -> LabResult<Self> {
        if cutoff < 2 {
            return Err(LabError::InvalidCutoff("cat subspace needs at least two levels".into()));
        }
        let mut basis = DMatrix::zeros(cutoff, 2);
        for (k, s) in [p, q].into_iter().enumerate() {
            let v = coherent_box_amplitudes(s, &[cutoff]);
            let n = v.norm();
            if n < 1e-12 {
                return Err(LabError::DegenerateNormalization("cat truncated to nothing".into()));
            }
            basis.set_column(k, &(v / c(n)));
        }
        Ok(Self { basis })
    }

    pub fn cutoff(&self) -> usize {
        self.basis.nrows()
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.basis.column(k).into_owned()
    }

    pub fn projector(&self) -> DMatrix<C64> {
        &self.basis * self.basis.adjoint()
    }

    /// `⟨e_i| op |e_j⟩`
    pub fn compress(&self, op: &DMatrix<C64>) -> Matrix2<C64> {
        let m = self.basis.adjoint() * op * &self.basis;
        Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
    }

    /// `Σ m_ij |e_i⟩⟨e_j|`
    pub fn lift(&self, m: &Matrix2<C64>) -> DMatrix<C64> {
        let mm = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
        &self.basis * mm * self.basis.adjoint()
    }

    /// `P_K U P_K + (I − P_K)`: unitary whenever `u` is.
    pub fn gate(&self, u: &Matrix2<C64>) -> DMatrix<C64> {
        let n = self.cutoff();
        self.lift(u) + DMatrix::identity(n, n) - self.projector()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PauliFit {
    /// `c` minimizing `‖c M − σ‖`.
    pub measured: f64,
    /// The constant from the closed-form expression, where one exists.
    pub predicted: f64,
    /// `‖c M − σ‖_F` at the measured constant.
    pub residual: f64,
}

/// Compressions of `x^(Arg α)`, `x^(π/2 + Arg α)` and `Π a² + a†² Π` to
/// `span{ψ₊, ψ₋}`, computed exactly on the coherent backend.
#[derive(Clone, Debug, Serialize)]
pub struct PauliCompressions {
    #[serde(skip)]
    pub x: Matrix2<C64>,
    #[serde(skip)]
    pub y: Matrix2<C64>,
    #[serde(skip)]
    pub z: Matrix2<C64>,
    #[serde(skip)]
    pub parity: Matrix2<C64>,
    pub fits: [PauliFit; 3],
}

pub fn sigma_x() -> Matrix2<C64> {
    Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

pub fn sigma_y() -> Matrix2<C64> {
    let i = C64::new(0.0, 1.0);
    Matrix2::new(c(0.0), -i, i, c(0.0))
}

pub fn sigma_z() -> Matrix2<C64> {
    Matrix2::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

fn fit(m: &Matrix2<C64>, target: &Matrix2<C64>, predicted: f64) -> PauliFit {
    let num: C64 = m.iter().zip(target.iter()).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = m.iter().map(|a| a.norm_sqr()).sum();
    let measured = num.re / den;
    let residual = (m * c(measured) - target).iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    PauliFit { measured, predicted, residual }
}

fn compress_coherent<F>(basis: &[CoherentSuperposition; 2], f: F) -> LabResult<Matrix2<C64>>
where
    F: Fn(&CoherentSuperposition, &CoherentSuperposition) -> LabResult<C64>,
{
    Ok(Matrix2::new(
        f(&basis[0], &basis[0])?,
        f(&basis[0], &basis[1])?,
        f(&basis[1], &basis[0])?,
        f(&basis[1], &basis[1])?,
    ))
}

pub fn pauli_compressions(alpha: C64) -> LabResult<PauliCompressions> {
    if alpha.norm() == 0.0 {
        return Err(LabError::DegenerateNormalization("Pauli compressions need α ≠ 0".into()));
    }
    let basis = [even_cat(alpha)?, odd_cat(alpha)?];
    let phi = alpha.arg();
    let qx = ModeOp::quadrature(phi);
    let qy = ModeOp::quadrature(PI / 2.0 + phi);
    let a2 = ModeOp::monomial(0, 2, c(1.0));
    let ad2 = ModeOp::monomial(2, 0, c(1.0));
    let x = compress_coherent(&basis, |b, k| b.matrix_element(&[(0, &qx)], k))?;
    let y = compress_coherent(&basis, |b, k| b.matrix_element(&[(0, &qy)], k))?;
    // ⟨b|Π a² + a†² Π|k⟩ = ⟨Πb|a²|k⟩ + ⟨b|a†²|Πk⟩
    let z = compress_coherent(&basis, |b, k| {
        Ok(b.apply_parity(0)?.matrix_element(&[(0, &a2)], k)? + b.matrix_element(&[(0, &ad2)], &k.apply_parity(0)?)?)
    })?;
    let parity = compress_coherent(&basis, |b, k| b.inner(&k.apply_parity(0)?))?;
    let m2 = alpha.norm_sqr();
    let root = (2.0 * m2).sinh().sqrt();
    let fits = [
        fit(&x, &sigma_x(), (-m2).exp() * root / alpha.norm()),
        fit(&y, &sigma_y(), m2.exp() * root / alpha.norm()),
        fit(&z, &sigma_z(), 1.0 / (2.0 * (alpha * alpha).re)),
    ];
    Ok(PauliCompressions { x, y, z, parity, fits })
}

/// `(a² + a†²)/α²` compressed to `span{ψ₊(α), ψ₋(iα)}` for real α, and its
/// fitted multiple of `σ_z`.
pub fn omega_two_photon_duality(alpha: f64) -> LabResult<(Matrix2<C64>, PauliFit)> {
    if alpha == 0.0 {
        return Err(LabError::DegenerateNormalization("duality needs α ≠ 0".into()));
    }
    let basis = [even_cat(c(alpha))?, odd_cat(C64::new(0.0, alpha))?];
    let op = ModeOp::monomial(0, 2, c(1.0 / (alpha * alpha))).add(&ModeOp::monomial(2, 0, c(1.0 / (alpha * alpha))));
    let m = compress_coherent(&basis, |b, k| b.matrix_element(&[(0, &op)], k))?;
    // σ_z = c·M, so M = (1/c)σ_z
    let f = fit(&m, &sigma_z(), 0.5);
    Ok((m, f))
}

/// One axis of a grid: `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(start: f64, stop: f64, count: usize) -> LabResult<Self> {
        let a = Self { start, stop, count };
        a.validate()?;
        Ok(a)
    }

    fn validate(&self) -> LabResult<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) || self.count == 0 {
            return Err(LabError::Config(format!("invalid axis {self:?}")));
        }
        if self.count > 1 && !(self.stop > self.start) {
            return Err(LabError::Config(format!("axis needs stop > start: {self:?}")));
        }
        Ok(())
    }

    /// `start:stop:count`
    pub fn parse(s: &str) -> LabResult<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || LabError::Config(format!("axis {s:?} is not start:stop:count"));
        match parts.as_slice() {
            [a, b, n] => Self::new(
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
                n.trim().parse().map_err(|_| bad())?,
            ),
            [a] => {
                let v: f64 = a.trim().parse().map_err(|_| bad())?;
                Self::new(v, v, 1)
            }
            _ => Err(bad()),
        }
    }

    /// Comma-separated list of axes.
    pub fn parse_list(s: &str) -> LabResult<Vec<Self>> {
        s.split(',').map(Self::parse).collect()
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.stop - self.start) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.count && self.count > 1 {
            self.stop
        } else {
            self.start + self.step() * k as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }
}

/// Dense row-major grid of real (`components = 1`) or interleaved complex
/// (`components = 2`) values; the last axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSpaceGrid {
    pub labels: Vec<String>,
    pub axes: Vec<GridAxis>,
    pub components: usize,
    pub values: Vec<f64>,
    /// Column names for the value components; empty means `value` or `re, im`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub value_names: Vec<String>,
}

impl PhaseSpaceGrid {
    pub fn with_value_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        assert_eq!(names.len(), self.components, "one name per component");
        self.value_names = names.iter().map(|n| n.as_ref().to_string()).collect();
        self
    }

    pub fn num_points(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            out[k] = a.value(index % a.count);
            index /= a.count;
        }
        out
    }

    pub fn value(&self, index: usize) -> &[f64] {
        &self.values[index * self.components..(index + 1) * self.components]
    }

    /// Riemann sum of the first component over the axes with more than one point.
    pub fn integrate(&self) -> f64 {
        let cell: f64 = self.axes.iter().filter(|a| a.count > 1).map(|a| a.step()).product();
        (0..self.num_points()).map(|i| self.value(i)[0]).sum::<f64>() * cell
    }

    pub fn min_value(&self) -> f64 {
        (0..self.num_points()).map(|i| self.value(i)[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn value_labels(&self) -> Vec<String> {
        if !self.value_names.is_empty() {
            self.value_names.clone()
        } else if self.components == 2 {
            vec!["re".into(), "im".into()]
        } else {
            vec!["value".into()]
        }
    }

    pub fn to_table(&self) -> crate::io::Table {
        let mut cols = self.labels.clone();
        cols.extend(self.value_labels());
        let mut t = crate::io::Table::new(&cols);
        for i in 0..self.num_points() {
            let mut row = self.point(i);
            row.extend_from_slice(self.value(i));
            t.push(row);
        }
        t
    }

    pub fn to_value(&self) -> Value {
        json!({
            "labels": self.labels,
            "axes": self.axes,
            "components": self.components,
            "value_names": self.value_labels(),
            "values": self.values,
        })
    }

    /// CSV without manifest, for quick inspection.
    pub fn csv_body(&self) -> String {
        let mut s = self.to_table().columns.join(",");
        s.push('\n');
        for r in self.to_table().rows {
            s.push_str(&r.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

/// Evaluate `f` at every grid point in parallel.
pub fn evaluate_grid<F>(labels: Vec<String>, axes: Vec<GridAxis>, components: usize, f: F) -> LabResult<PhaseSpaceGrid>
where
    F: Fn(&[f64]) -> LabResult<Vec<f64>> + Sync,
{
    if labels.len() != axes.len() || axes.is_empty() {
        return Err(LabError::Config("one label per axis".into()));
    }
    for a in &axes {
        a.validate()?;
    }
    let mut grid = PhaseSpaceGrid { labels, axes, components, values: Vec::new(), value_names: Vec::new() };
    let chunks: Vec<Vec<f64>> = (0..grid.num_points())
        .into_par_iter()
        .map(|i| {
            let v = f(&grid.point(i))?;
            if v.len() != components {
                return Err(LabError::DimensionMismatch("grid value width".into()));
            }
            Ok(v)
        })
        .collect::<LabResult<_>>()?;
    grid.values = chunks.concat();
    ensure_finite(&grid.values)?;
    Ok(grid)
}

/// Pairs of real coordinates `(Re, Im)` back into complex numbers.
pub fn complex_coordinates(point: &[f64]) -> Vec<C64> {
    point.chunks(2).map(|p| C64::new(p[0], *p.get(1).unwrap_or(&0.0))).collect()
}

/// Axis labels `re_<name>1, im_<name>1, …`.
pub fn complex_labels(name: &str, count: usize) -> Vec<String> {
    (1..=count).flat_map(|k| [format!("re_{name}{k}"), format!("im_{name}{k}")]).collect()
}

/// Axes for `k` complex coordinates from either `2k` explicit axes or a single
/// axis reused for every real coordinate.
pub fn expand_complex_axes(axes: &[GridAxis], k: usize) -> LabResult<Vec<GridAxis>> {
    match axes.len() {
        1 => Ok(vec![axes[0].clone(); 2 * k]),
        n if n == 2 * k => Ok(axes.to_vec()),
        n => Err(LabError::Config(format!("{n} axes given for {k} complex coordinates"))),
    }
}

pub fn q_grid(state: &State, axes: &[GridAxis]) -> LabResult<PhaseSpaceGrid> {
    let k = state.num_modes();
    let axes = expand_complex_axes(axes, k)?;
    evaluate_grid(complex_labels("beta", k), axes, 1, |p| Ok(vec![husimi_q(state, &complex_coordinates(p))?]))
}

pub fn wigner_grid(state: &State, modes: &[usize], axes: &[GridAxis]) -> LabResult<PhaseSpaceGrid> {
    let axes = expand_complex_axes(axes, modes.len())?;
    evaluate_grid(complex_labels("gamma", modes.len()), axes, 1, |p| {
        Ok(vec![wigner(state, modes, &complex_coordinates(p))?])
    })
}

pub fn bargmann_grid(state: &State, axes: &[GridAxis], tolerance: f64) -> LabResult<PhaseSpaceGrid> {
    let k = state.num_modes();
    let axes = expand_complex_axes(axes, k)?;
    evaluate_grid(complex_labels("z", k), axes, 2, |p| {
        let f = bargmann(state, &complex_coordinates(p), tolerance)?;
        Ok(vec![f.re, f.im])
    })
}

/// Summary statistics for one state.
#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub mean_n: Vec<f64>,
    pub mandel_q: Vec<Option<f64>>,
    pub parity_weights: (f64, f64),
    /// `(θ, Var x^(θ))` on mode 0
    pub quadrature_variance: Vec<(f64, f64)>,
    pub photon_distribution: PhotonDistribution,
}

pub fn stats_report(state: &State, max_n: &[usize], angles: usize) -> LabResult<StatsReport> {
    let modes = state.num_modes();
    let mean_n = (0..modes)
        .map(|m| Ok(state.mean_of(m, &ModeOp::number())?.re))
        .collect::<LabResult<Vec<f64>>>()?;
    let mandel_q = (0..modes)
        .map(|m| match mandel_q(state, m) {
            Ok(q) => Ok(Some(q)),
            Err(LabError::Undefined(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<LabResult<Vec<_>>>()?;
    let quadrature_variance = (0..angles)
        .map(|k| {
            let th = PI * k as f64 / angles as f64;
            Ok((th, quadrature_variance(state, 0, th)?))
        })
        .collect::<LabResult<Vec<_>>>()?;
    Ok(StatsReport {
        mean_n,
        mandel_q,
        parity_weights: parity_weights(state)?,
        quadrature_variance,
        photon_distribution: photon_number_distribution(state, max_n)?,
    })
}
