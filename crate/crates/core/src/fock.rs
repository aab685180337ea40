//! Truncated multimode Fock space.
//!
//! Basis vectors `|n_0, …, n_{N-1}⟩` are stored row-major with mode 0 the most
//! significant digit. Operators are kept as a dense matrix over the modes they
//! act on ("targets") and applied by stride contraction, so a one-mode
//! displacement on a four-mode register never builds the full Kronecker product.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{LabError, LabResult};
use crate::ops::ModeOp;
use crate::C64;

/// Eigenvalues at or below this are dropped from entropy sums.
pub const EIGEN_CLIP: f64 = 1e-12;
/// Default bound on the probability mass allowed in the top level of a mode.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;
/// Most negative eigenvalue accepted as round-off in a density operator.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// `⌈|α|² + 8|α| + 10⌉`
pub fn heuristic_cutoff(amplitude: f64) -> usize {
    let a = amplitude.abs();
    (a * a + 8.0 * a + 10.0).ceil() as usize
}

/// Heuristic cutoff widened by `e^{2|w|}` for squeezed states.
pub fn squeezed_cutoff(amplitude: f64, w: f64) -> usize {
    let a = amplitude.abs();
    ((2.0 * w.abs()).exp() * (a * a + 8.0 * a + 10.0)).ceil() as usize + 10
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffProfile {
    per_mode_cutoff: Vec<usize>,
    tail_tolerance: f64,
}

impl CutoffProfile {
    pub fn new(per_mode_cutoff: Vec<usize>, tail_tolerance: f64) -> LabResult<Self> {
        if per_mode_cutoff.is_empty() {
            return Err(LabError::InvalidCutoff("no modes".into()));
        }
        if let Some(c) = per_mode_cutoff.iter().find(|&&c| c < 2) {
            return Err(LabError::InvalidCutoff(format!("cutoff {c} < 2")));
        }
        if !(tail_tolerance >= 0.0) {
            return Err(LabError::InvalidCutoff("negative tail tolerance".into()));
        }
        Ok(Self { per_mode_cutoff, tail_tolerance })
    }

    pub fn uniform(num_modes: usize, cutoff: usize) -> LabResult<Self> {
        Self::new(vec![cutoff; num_modes], DEFAULT_TAIL_TOLERANCE)
    }

    /// One heuristic cutoff per mode from the largest amplitude that mode carries.
    pub fn for_amplitudes(amplitudes: &[f64]) -> LabResult<Self> {
        Self::new(amplitudes.iter().map(|&a| heuristic_cutoff(a)).collect(), DEFAULT_TAIL_TOLERANCE)
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    pub fn num_modes(&self) -> usize {
        self.per_mode_cutoff.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.per_mode_cutoff
    }

    pub fn cutoff(&self, mode: usize) -> usize {
        self.per_mode_cutoff[mode]
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    pub fn dim(&self) -> usize {
        self.per_mode_cutoff.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.per_mode_cutoff)
    }

    pub fn index(&self, levels: &[usize]) -> LabResult<usize> {
        if levels.len() != self.num_modes() {
            return Err(LabError::DimensionMismatch(format!(
                "{} levels for {} modes",
                levels.len(),
                self.num_modes()
            )));
        }
        let mut idx = 0;
        for (&n, &c) in levels.iter().zip(&self.per_mode_cutoff) {
            if n >= c {
                return Err(LabError::InvalidCutoff(format!("level {n} beyond cutoff {c}")));
            }
            idx = idx * c + n;
        }
        Ok(idx)
    }

    pub fn levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.num_modes()];
        for (slot, &c) in out.iter_mut().zip(&self.per_mode_cutoff).rev() {
            *slot = index % c;
            index /= c;
        }
        out
    }

    pub fn concat(&self, other: &CutoffProfile) -> CutoffProfile {
        let mut c = self.per_mode_cutoff.clone();
        c.extend_from_slice(&other.per_mode_cutoff);
        CutoffProfile { per_mode_cutoff: c, tail_tolerance: self.tail_tolerance.max(other.tail_tolerance) }
    }

    pub fn select(&self, modes: &[usize]) -> CutoffProfile {
        CutoffProfile {
            per_mode_cutoff: modes.iter().map(|&m| self.per_mode_cutoff[m]).collect(),
            tail_tolerance: self.tail_tolerance,
        }
    }

    fn check_mode(&self, mode: usize) -> LabResult<()> {
        if mode >= self.num_modes() {
            Err(LabError::ModeOutOfRange { mode, num_modes: self.num_modes() })
        } else {
            Ok(())
        }
    }
}

fn strides(cut: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cut.len()];
    for k in (0..cut.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * cut[k + 1];
    }
    s
}

/// Offsets of every multi-index whose digits on `modes` are zero, plus the offsets
/// of the local sub-block spanned by `modes` (first listed mode most significant).
fn split_offsets(cut: &[usize], modes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let st = strides(cut);
    let mut local = vec![0usize];
    for &m in modes {
        let mut next = Vec::with_capacity(local.len() * cut[m]);
        for &o in &local {
            for d in 0..cut[m] {
                next.push(o + d * st[m]);
            }
        }
        local = next;
    }
    let rest: Vec<usize> = (0..cut.len()).filter(|k| !modes.contains(k)).collect();
    let mut bases = vec![0usize];
    for &m in &rest {
        let mut next = Vec::with_capacity(bases.len() * cut[m]);
        for &o in &bases {
            for d in 0..cut[m] {
                next.push(o + d * st[m]);
            }
        }
        bases = next;
    }
    (bases, local)
}

/// Apply a local matrix on `targets` to a full-space vector.
fn apply_local(cut: &[usize], targets: &[usize], m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let (bases, local) = split_offsets(cut, targets);
    let ld = local.len();
    let mut gathered = DMatrix::<C64>::zeros(ld, bases.len());
    for (col, &b) in bases.iter().enumerate() {
        for (row, &o) in local.iter().enumerate() {
            gathered[(row, col)] = v[b + o];
        }
    }
    let prod = m * gathered;
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (col, &b) in bases.iter().enumerate() {
        for (row, &o) in local.iter().enumerate() {
            out[b + o] = prod[(row, col)];
        }
    }
    out
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Truncated coherent-state amplitudes `e^{-|α|²/2} αⁿ/√n!`.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> DVector<C64> {
    let mut v = DVector::zeros(cutoff);
    let mut amp = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..cutoff {
        v[n] = amp;
        amp = amp * alpha / ((n + 1) as f64).sqrt();
    }
    v
}

/// Probability mass of `|α⟩` in level `cutoff - 1`.
pub fn coherent_top_mass(alpha: f64, cutoff: usize) -> f64 {
    let n = (cutoff - 1) as f64;
    let a2 = alpha * alpha;
    if a2 == 0.0 {
        return if cutoff == 1 { 1.0 } else { 0.0 };
    }
    let ln = -a2 + n * a2.ln() - ln_factorial(cutoff - 1);
    ln.exp()
}

/// Smallest cutoff whose top level and everything above it hold at most `mass`
/// of `|α⟩`, capped at [`heuristic_cutoff`].
pub fn tail_cutoff(alpha: f64, mass: f64) -> usize {
    let cap = heuristic_cutoff(alpha);
    let a2 = alpha * alpha;
    // P(N ≥ k) for k = 0, 1, … by subtracting Poisson terms
    let mut above = 1.0;
    let mut term = (-a2).exp();
    for k in 1..cap {
        above -= term;
        if above <= mass {
            return k + 1;
        }
        term *= a2 / k as f64;
    }
    cap
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

#[derive(Clone, Debug)]
pub struct FockState {
    cutoffs: CutoffProfile,
    amplitudes: DVector<C64>,
}

impl FockState {
    pub fn new(cutoffs: CutoffProfile, amplitudes: DVector<C64>) -> LabResult<Self> {
        if amplitudes.len() != cutoffs.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                cutoffs.dim()
            )));
        }
        Ok(Self { cutoffs, amplitudes })
    }

    pub fn vacuum(cutoffs: CutoffProfile) -> Self {
        let mut v = DVector::zeros(cutoffs.dim());
        v[0] = C64::new(1.0, 0.0);
        Self { cutoffs, amplitudes: v }
    }

    pub fn basis(cutoffs: CutoffProfile, levels: &[usize]) -> LabResult<Self> {
        let idx = cutoffs.index(levels)?;
        let mut v = DVector::zeros(cutoffs.dim());
        v[idx] = C64::new(1.0, 0.0);
        Ok(Self { cutoffs, amplitudes: v })
    }

    /// Tensor product of single-mode vectors; cutoffs taken from the vector lengths.
    pub fn product(factors: &[DVector<C64>]) -> LabResult<Self> {
        let cut = CutoffProfile::new(factors.iter().map(|f| f.len()).collect(), DEFAULT_TAIL_TOLERANCE)?;
        let mut v = DVector::from_element(1, C64::new(1.0, 0.0));
        for f in factors {
            v = v.kronecker(f);
        }
        Ok(Self { cutoffs: cut, amplitudes: v })
    }

    pub fn cutoffs(&self) -> &CutoffProfile {
        &self.cutoffs
    }

    pub fn num_modes(&self) -> usize {
        self.cutoffs.num_modes()
    }

    /// Zero-pad into a profile whose cutoffs are at least as large on every mode.
    pub fn embed(&self, cutoffs: &CutoffProfile) -> LabResult<FockState> {
        if cutoffs.num_modes() != self.num_modes()
            || cutoffs.cutoffs().iter().zip(self.cutoffs.cutoffs()).any(|(a, b)| a < b)
        {
            return Err(LabError::DimensionMismatch("embedding needs a wider profile".into()));
        }
        let mut v = DVector::zeros(cutoffs.dim());
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.norm() > 0.0 {
                v[cutoffs.index(&self.cutoffs.levels(i))?] = *a;
            }
        }
        FockState::new(cutoffs.clone(), v)
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, levels: &[usize]) -> LabResult<C64> {
        Ok(self.amplitudes[self.cutoffs.index(levels)?])
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&self) -> LabResult<Self> {
        let n = self.norm();
        if n < 1e-300 || !n.is_finite() {
            return Err(LabError::DegenerateNormalization("zero Fock vector".into()));
        }
        Ok(Self { cutoffs: self.cutoffs.clone(), amplitudes: &self.amplitudes / C64::new(n, 0.0) })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { cutoffs: self.cutoffs.clone(), amplitudes: &self.amplitudes * c }
    }

    pub fn add(&self, other: &FockState) -> LabResult<Self> {
        self.same_space(other)?;
        Ok(Self { cutoffs: self.cutoffs.clone(), amplitudes: &self.amplitudes + &other.amplitudes })
    }

    fn same_space(&self, other: &FockState) -> LabResult<()> {
        if self.cutoffs.cutoffs() != other.cutoffs.cutoffs() {
            return Err(LabError::DimensionMismatch("states on different truncations".into()));
        }
        Ok(())
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &FockState) -> LabResult<C64> {
        self.same_space(other)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`
    pub fn fidelity(&self, other: &FockState) -> LabResult<f64> {
        let ip = self.inner(other)?;
        Ok(ip.norm_sqr() / (self.amplitudes.norm_squared() * other.amplitudes.norm_squared()))
    }

    pub fn tensor(&self, other: &FockState) -> FockState {
        FockState {
            cutoffs: self.cutoffs.concat(&other.cutoffs),
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    /// Photon-number marginal of one mode (unnormalized if the state is).
    pub fn mode_marginal(&self, mode: usize) -> LabResult<Vec<f64>> {
        self.cutoffs.check_mode(mode)?;
        let st = self.cutoffs.strides();
        let c = self.cutoffs.cutoff(mode);
        let mut out = vec![0.0; c];
        for (i, a) in self.amplitudes.iter().enumerate() {
            out[(i / st[mode]) % c] += a.norm_sqr();
        }
        Ok(out)
    }

    /// Fails when any mode carries more than the tolerated mass in its top level.
    pub fn check_tail(&self) -> LabResult<()> {
        let total = self.amplitudes.norm_squared();
        for m in 0..self.num_modes() {
            let marg = self.mode_marginal(m)?;
            let tail = marg[marg.len() - 1] / total;
            if tail >= self.cutoffs.tail_tolerance() && tail > 0.0 {
                return Err(LabError::TailViolation { mode: m, tail, tolerance: self.cutoffs.tail_tolerance() });
            }
        }
        Ok(())
    }

    pub fn apply(&self, op: &FockOperator) -> LabResult<FockState> {
        if op.cutoffs.cutoffs() != self.cutoffs.cutoffs() {
            return Err(LabError::DimensionMismatch("operator and state truncations differ".into()));
        }
        Ok(self.apply_local(&op.targets, &op.matrix))
    }

    pub(crate) fn apply_local(&self, targets: &[usize], m: &DMatrix<C64>) -> FockState {
        let out = apply_local(self.cutoffs.cutoffs(), targets, m, self.amplitudes.as_slice());
        FockState { cutoffs: self.cutoffs.clone(), amplitudes: DVector::from_vec(out) }
    }

    /// Expectation of a product of single-mode normal-ordered operators on distinct modes.
    pub fn expect_modes(&self, ops: &[(usize, &ModeOp)]) -> LabResult<C64> {
        let mut phi = self.clone();
        for &(mode, op) in ops {
            self.cutoffs.check_mode(mode)?;
            phi = phi.apply_local(&[mode], &op.matrix(self.cutoffs.cutoff(mode)));
        }
        Ok(self.amplitudes.dotc(&phi.amplitudes))
    }

    pub fn expectation(&self, op: &FockOperator) -> LabResult<C64> {
        let phi = self.apply(op)?;
        Ok(self.amplitudes.dotc(&phi.amplitudes))
    }

    pub fn to_density(&self) -> DensityOperator {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator { cutoffs: self.cutoffs.clone(), matrix: m }
    }

    /// Reduced density operator on `keep`, computed as `Ψ Ψ†` of the reshaped amplitudes.
    pub fn reduced_density(&self, keep: &[usize]) -> LabResult<DensityOperator> {
        validate_keep(keep, self.num_modes())?;
        let cut = self.cutoffs.cutoffs();
        let (bases, local) = split_offsets(cut, keep);
        let mut psi = DMatrix::<C64>::zeros(local.len(), bases.len());
        for (col, &b) in bases.iter().enumerate() {
            for (row, &o) in local.iter().enumerate() {
                psi[(row, col)] = self.amplitudes[b + o];
            }
        }
        let rho = &psi * psi.adjoint();
        Ok(DensityOperator { cutoffs: self.cutoffs.select(keep), matrix: rho })
    }
}

fn validate_keep(keep: &[usize], num_modes: usize) -> LabResult<()> {
    if keep.is_empty() || keep.len() >= num_modes {
        return Err(LabError::InvalidPartition(format!(
            "keep set of size {} for {num_modes} modes must be a proper nonempty subset",
            keep.len()
        )));
    }
    for (i, &k) in keep.iter().enumerate() {
        if k >= num_modes {
            return Err(LabError::ModeOutOfRange { mode: k, num_modes });
        }
        if keep[..i].contains(&k) {
            return Err(LabError::InvalidPartition(format!("mode {k} listed twice")));
        }
    }
    Ok(())
}

pub(crate) fn validate_keep_set(keep: &[usize], num_modes: usize) -> LabResult<()> {
    validate_keep(keep, num_modes)
}

#[derive(Clone, Debug)]
pub struct FockOperator {
    cutoffs: CutoffProfile,
    targets: Vec<usize>,
    matrix: DMatrix<C64>,
    hermitian_flag: bool,
}

impl FockOperator {
    /// Operator given by `matrix` on the modes `targets` (first target most significant),
    /// identity elsewhere.
    pub fn local(
        cutoffs: &CutoffProfile,
        targets: Vec<usize>,
        matrix: DMatrix<C64>,
        hermitian_flag: bool,
    ) -> LabResult<Self> {
        for (i, &t) in targets.iter().enumerate() {
            cutoffs.check_mode(t)?;
            if targets[..i].contains(&t) {
                return Err(LabError::InvalidPartition(format!("target {t} repeated")));
            }
        }
        let ld: usize = targets.iter().map(|&t| cutoffs.cutoff(t)).product();
        if matrix.nrows() != ld || matrix.ncols() != ld {
            return Err(LabError::DimensionMismatch(format!(
                "{}x{} matrix for local dimension {ld}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if hermitian_flag {
            let dev = (&matrix - matrix.adjoint()).map(|z| z.norm()).max();
            if dev >= 1e-12 {
                return Err(LabError::NotHermitian(dev));
            }
        }
        Ok(Self { cutoffs: cutoffs.clone(), targets, matrix, hermitian_flag })
    }

    pub fn identity(cutoffs: &CutoffProfile) -> Self {
        Self {
            cutoffs: cutoffs.clone(),
            targets: vec![],
            matrix: DMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
            hermitian_flag: true,
        }
    }

    /// Single-mode normal-ordered polynomial as a truncated operator.
    pub fn from_mode_op(mode: usize, op: &ModeOp, cutoffs: &CutoffProfile) -> LabResult<Self> {
        cutoffs.check_mode(mode)?;
        let m = op.matrix(cutoffs.cutoff(mode));
        let herm = op.is_hermitian(1e-14);
        Self::local(cutoffs, vec![mode], m, herm)
    }

    pub fn cutoffs(&self) -> &CutoffProfile {
        &self.cutoffs
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn local_matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn hermitian_flag(&self) -> bool {
        self.hermitian_flag
    }

    /// The local matrix expanded to act on `union` (a superset of the targets).
    pub fn expand_to(&self, union: &[usize]) -> LabResult<DMatrix<C64>> {
        let pos: Vec<usize> = self
            .targets
            .iter()
            .map(|t| {
                union
                    .iter()
                    .position(|u| u == t)
                    .ok_or_else(|| LabError::InvalidPartition(format!("target {t} not in union")))
            })
            .collect::<LabResult<_>>()?;
        let sub: Vec<usize> = union.iter().map(|&u| self.cutoffs.cutoff(u)).collect();
        let d: usize = sub.iter().product();
        let mut out = DMatrix::zeros(d, d);
        let mut e = vec![C64::new(0.0, 0.0); d];
        for j in 0..d {
            e[j] = C64::new(1.0, 0.0);
            let col = apply_local(&sub, &pos, &self.matrix, &e);
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
            e[j] = C64::new(0.0, 0.0);
        }
        Ok(out)
    }

    /// Full matrix over every mode. Only sensible for small registers.
    pub fn dense(&self) -> DMatrix<C64> {
        let all: Vec<usize> = (0..self.cutoffs.num_modes()).collect();
        self.expand_to(&all).expect("all modes contain every target")
    }

    fn union_targets(&self, other: &FockOperator) -> LabResult<Vec<usize>> {
        if self.cutoffs.cutoffs() != other.cutoffs.cutoffs() {
            return Err(LabError::DimensionMismatch("operators on different truncations".into()));
        }
        let mut u: Vec<usize> = self.targets.iter().chain(&other.targets).copied().collect();
        u.sort_unstable();
        u.dedup();
        Ok(u)
    }

    /// `self · other`
    pub fn compose(&self, other: &FockOperator) -> LabResult<FockOperator> {
        let u = self.union_targets(other)?;
        let m = self.expand_to(&u)? * other.expand_to(&u)?;
        Ok(FockOperator { cutoffs: self.cutoffs.clone(), targets: u, matrix: m, hermitian_flag: false })
    }

    pub fn add(&self, other: &FockOperator) -> LabResult<FockOperator> {
        let u = self.union_targets(other)?;
        let m = self.expand_to(&u)? + other.expand_to(&u)?;
        let herm = self.hermitian_flag && other.hermitian_flag;
        Ok(FockOperator { cutoffs: self.cutoffs.clone(), targets: u, matrix: m, hermitian_flag: herm })
    }

    pub fn scale(&self, c: C64) -> FockOperator {
        FockOperator {
            cutoffs: self.cutoffs.clone(),
            targets: self.targets.clone(),
            matrix: &self.matrix * c,
            hermitian_flag: self.hermitian_flag && c.im == 0.0,
        }
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator {
            cutoffs: self.cutoffs.clone(),
            targets: self.targets.clone(),
            matrix: self.matrix.adjoint(),
            hermitian_flag: self.hermitian_flag,
        }
    }

    /// `exp(c · self)` by dense matrix exponential of the local block.
    pub fn exp_scaled(&self, c: C64) -> FockOperator {
        FockOperator {
            cutoffs: self.cutoffs.clone(),
            targets: self.targets.clone(),
            matrix: (&self.matrix * c).exp(),
            hermitian_flag: false,
        }
    }

    /// `max |U†U − I|` over the local block.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        (self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n)).map(|z| z.norm()).max()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).map(|z| z.norm()).max()
    }
}

pub fn annihilation(mode: usize, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
    FockOperator::from_mode_op(mode, &ModeOp::annihilation(), cutoffs)
}

pub fn creation(mode: usize, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
    FockOperator::from_mode_op(mode, &ModeOp::creation(), cutoffs)
}

pub fn number(mode: usize, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
    FockOperator::from_mode_op(mode, &ModeOp::number(), cutoffs)
}

pub fn quadrature(mode: usize, theta: f64, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
    FockOperator::from_mode_op(mode, &ModeOp::quadrature(theta), cutoffs)
}

/// `e^{iθ a†a}` on one mode.
pub fn phase_shift(mode: usize, theta: f64, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
    cutoffs.check_mode(mode)?;
    let c = cutoffs.cutoff(mode);
    let m = DMatrix::from_diagonal(&DVector::from_fn(c, |n, _| C64::from_polar(1.0, theta * n as f64)));
    FockOperator::local(cutoffs, vec![mode], m, false)
}

/// `e^{iπ a†a}`: diagonal `(−1)ⁿ`.
pub fn parity(mode: usize, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
    cutoffs.check_mode(mode)?;
    let c = cutoffs.cutoff(mode);
    let m = DMatrix::from_diagonal(&DVector::from_fn(c, |n, _| {
        C64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    }));
    FockOperator::local(cutoffs, vec![mode], m, true)
}

/// `D(β) = exp(β a† − β̄ a)`, exponentiated from the truncated generator.
pub fn displacement(mode: usize, beta: C64, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
    cutoffs.check_mode(mode)?;
    let c = cutoffs.cutoff(mode);
    let tail = coherent_top_mass(beta.norm(), c);
    if beta.norm() > 0.0 && tail >= cutoffs.tail_tolerance() {
        return Err(LabError::TailViolation { mode, tail, tolerance: cutoffs.tail_tolerance() });
    }
    let gen = ModeOp::monomial(1, 0, beta).sub(&ModeOp::monomial(0, 1, beta.conj())).matrix(c);
    FockOperator::local(cutoffs, vec![mode], gen.exp(), false)
}

/// `S(w) = exp(½(w̄ a² − w a†²))`, exponentiated from the truncated generator.
pub fn squeeze(mode: usize, w: C64, cutoffs: &CutoffProfile) -> LabResult<FockOperator> {
    cutoffs.check_mode(mode)?;
    let c = cutoffs.cutoff(mode);
    let tail = squeezed_vacuum_top_mass(w.norm(), c);
    if tail >= cutoffs.tail_tolerance() {
        return Err(LabError::TailViolation { mode, tail, tolerance: cutoffs.tail_tolerance() });
    }
    let gen = ModeOp::monomial(0, 2, w.conj() * 0.5)
        .sub(&ModeOp::monomial(2, 0, w * 0.5))
        .matrix(c);
    FockOperator::local(cutoffs, vec![mode], gen.exp(), false)
}

/// Mass of `S(r)|0⟩` in the highest even level below `cutoff`.
fn squeezed_vacuum_top_mass(r: f64, cutoff: usize) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let top = if (cutoff - 1) % 2 == 0 { cutoff - 1 } else { cutoff - 2 };
    let k = top / 2;
    let t = r.tanh();
    let ln = 2.0 * k as f64 * t.ln() + ln_factorial(2 * k) - 2.0 * ln_factorial(k) - (k as f64) * 4f64.ln()
        - r.cosh().ln();
    ln.exp()
}

#[derive(Clone, Debug)]
pub struct DensityOperator {
    cutoffs: CutoffProfile,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validated constructor: trace `1 ± 1e-8`, Hermitian, no eigenvalue below `−PSD_TOLERANCE`.
    pub fn new(cutoffs: CutoffProfile, matrix: DMatrix<C64>) -> LabResult<Self> {
        let rho = Self::from_matrix_unchecked(cutoffs, matrix)?;
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(LabError::Tolerance(format!("density trace {tr}")));
        }
        let herm = (&rho.matrix - rho.matrix.adjoint()).map(|z| z.norm()).max();
        if herm > 1e-10 {
            return Err(LabError::NotHermitian(herm));
        }
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE {
            return Err(LabError::NotPositive(min));
        }
        Ok(rho)
    }

    pub fn from_matrix_unchecked(cutoffs: CutoffProfile, matrix: DMatrix<C64>) -> LabResult<Self> {
        let d = cutoffs.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(LabError::DimensionMismatch(format!("{}x{} density for dimension {d}", matrix.nrows(), matrix.ncols())));
        }
        Ok(Self { cutoffs, matrix })
    }

    pub fn from_pure(psi: &FockState) -> Self {
        psi.to_density()
    }

    pub fn cutoffs(&self) -> &CutoffProfile {
        &self.cutoffs
    }

    pub fn num_modes(&self) -> usize {
        self.cutoffs.num_modes()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `tr ρ²`
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn fidelity_pure(&self, psi: &FockState) -> LabResult<f64> {
        if psi.cutoffs().cutoffs() != self.cutoffs.cutoffs() {
            return Err(LabError::DimensionMismatch("state and density truncations differ".into()));
        }
        let v = psi.amplitudes();
        Ok((v.adjoint() * &self.matrix * v)[(0, 0)].re / v.norm_squared())
    }

    /// `U ρ U†`
    pub fn conjugate(&self, u: &FockOperator) -> LabResult<DensityOperator> {
        if u.cutoffs().cutoffs() != self.cutoffs.cutoffs() {
            return Err(LabError::DimensionMismatch("operator and density truncations differ".into()));
        }
        let cut = self.cutoffs.cutoffs();
        let d = self.cutoffs.dim();
        let mut left = DMatrix::zeros(d, d);
        for j in 0..d {
            let col: Vec<C64> = self.matrix.column(j).iter().copied().collect();
            let out = apply_local(cut, u.targets(), u.local_matrix(), &col);
            for (i, v) in out.into_iter().enumerate() {
                left[(i, j)] = v;
            }
        }
        let left_adj = left.adjoint();
        let mut both = DMatrix::zeros(d, d);
        for j in 0..d {
            let col: Vec<C64> = left_adj.column(j).iter().copied().collect();
            let out = apply_local(cut, u.targets(), u.local_matrix(), &col);
            for (i, v) in out.into_iter().enumerate() {
                both[(i, j)] = v;
            }
        }
        Ok(DensityOperator { cutoffs: self.cutoffs.clone(), matrix: both.adjoint() })
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        DensityOperator {
            cutoffs: self.cutoffs.concat(&other.cutoffs),
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn partial_trace(&self, keep: &[usize]) -> LabResult<DensityOperator> {
        partial_trace(self, keep)
    }
}

pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Reduced density operator on the modes in `keep`, in the order given.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> LabResult<DensityOperator> {
    validate_keep(keep, rho.num_modes())?;
    let cut = rho.cutoffs.cutoffs();
    let (bases, local) = split_offsets(cut, keep);
    let dk = local.len();
    let mut out = DMatrix::<C64>::zeros(dk, dk);
    for &b in &bases {
        for (i, &oi) in local.iter().enumerate() {
            for (j, &oj) in local.iter().enumerate() {
                out[(i, j)] += rho.matrix[(b + oi, b + oj)];
            }
        }
    }
    Ok(DensityOperator { cutoffs: rho.cutoffs.select(keep), matrix: out })
}

/// `−Σ λ log₂ λ` over eigenvalues above [`EIGEN_CLIP`].
pub fn entropy_of_spectrum(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&l| l > EIGEN_CLIP)
        .map(|&l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Root variance of `H_E = −log₂ ρ` on the clipped support.
pub fn fluctuation_of_spectrum(spectrum: &[f64]) -> LabResult<f64> {
    let kept: Vec<f64> = spectrum.iter().copied().filter(|&l| l > EIGEN_CLIP).collect();
    if kept.is_empty() {
        return Err(LabError::Undefined("entanglement Hamiltonian has empty support".into()));
    }
    let m1: f64 = kept.iter().map(|&l| -l * l.log2()).sum();
    let m2: f64 = kept.iter().map(|&l| l * l.log2() * l.log2()).sum();
    Ok((m2 - m1 * m1).max(0.0).sqrt())
}

pub(crate) fn check_spectrum(spectrum: &[f64]) -> LabResult<()> {
    let min = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE {
        return Err(LabError::NotPositive(min));
    }
    Ok(())
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> LabResult<f64> {
    let ev = rho.eigenvalues();
    check_spectrum(&ev)?;
    Ok(entropy_of_spectrum(&ev))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c1(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn annihilation_on_basis() {
        let cut = CutoffProfile::uniform(1, 5).unwrap();
        let a = annihilation(0, &cut).unwrap();
        let one = FockState::basis(cut.clone(), &[1]).unwrap();
        let out = one.apply(&a).unwrap();
        assert!((out.amplitude(&[0]).unwrap() - c1(1.0)).norm() < 1e-15);
        let vac = FockState::vacuum(cut.clone());
        assert!(vac.apply(&a).unwrap().norm() < 1e-15);
        assert!(annihilation(1, &cut).is_err());
    }

    #[test]
    fn commutator_identity_below_top() {
        let cut = CutoffProfile::uniform(1, 9).unwrap();
        let a = annihilation(0, &cut).unwrap().dense();
        let ad = creation(0, &cut).unwrap().dense();
        let comm = &a * &ad - &ad * &a;
        for i in 0..8 {
            for j in 0..8 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((comm[(i, j)] - c1(e)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn displacement_vacuum_and_inverse() {
        let cut = CutoffProfile::uniform(1, 30).unwrap();
        let d0 = displacement(0, c1(0.0), &cut).unwrap();
        assert!((d0.local_matrix() - DMatrix::<C64>::identity(30, 30)).map(|z| z.norm()).max() < 1e-14);
        let d1 = displacement(0, c1(1.0), &cut).unwrap();
        let v = FockState::vacuum(cut.clone()).apply(&d1).unwrap();
        assert!((v.amplitude(&[0]).unwrap().re - (-0.5f64).exp()).abs() < 1e-10);
        let beta = C64::new(0.7, 0.3);
        let dp = displacement(0, beta, &cut).unwrap();
        let dm = displacement(0, -beta, &cut).unwrap();
        let prod = dp.compose(&dm).unwrap();
        assert!((prod.local_matrix() - DMatrix::<C64>::identity(30, 30)).map(|z| z.norm()).max() < 1e-8);
        assert!(dp.unitarity_defect() < 1e-8);
    }

    #[test]
    fn displacement_tail_violation() {
        let cut = CutoffProfile::uniform(1, 6).unwrap();
        assert!(matches!(displacement(0, c1(3.0), &cut), Err(LabError::TailViolation { .. })));
    }

    #[test]
    fn squeezed_vacuum_variance() {
        let cut = CutoffProfile::uniform(1, 60).unwrap();
        let s = squeeze(0, c1(0.5), &cut).unwrap();
        let psi = FockState::vacuum(cut.clone()).apply(&s).unwrap();
        let x = ModeOp::quadrature(0.0);
        let m1 = psi.expect_modes(&[(0, &x)]).unwrap().re;
        let m2 = psi.expect_modes(&[(0, &x.mul(&x))]).unwrap().re;
        assert!((m2 - m1 * m1 - (-1.0f64).exp() / 2.0).abs() < 1e-6);
        let s0 = squeeze(0, c1(0.0), &cut).unwrap();
        assert!(s0.unitarity_defect() < 1e-14);
    }

    #[test]
    fn parity_on_two() {
        let cut = CutoffProfile::uniform(1, 4).unwrap();
        let p = parity(0, &cut).unwrap();
        let two = FockState::basis(cut.clone(), &[2]).unwrap();
        assert!((two.apply(&p).unwrap().amplitude(&[2]).unwrap() - c1(1.0)).norm() < 1e-15);
    }

    #[test]
    fn local_apply_matches_dense_kron() {
        let cut = CutoffProfile::new(vec![3, 2, 4], 1e-10).unwrap();
        let a1 = annihilation(2, &cut).unwrap();
        let dense = a1.dense();
        let reference = kron(
            &DMatrix::identity(6, 6),
            &ModeOp::annihilation().matrix(4),
        );
        assert!((dense - reference).map(|z| z.norm()).max() < 1e-15);
        let v = DVector::from_fn(24, |i, _| C64::new(i as f64, 0.5 * i as f64));
        let psi = FockState::new(cut.clone(), v.clone()).unwrap();
        let op = FockOperator::local(&cut, vec![2, 0], DMatrix::from_fn(12, 12, |i, j| C64::new((i * 12 + j) as f64, 1.0)), false).unwrap();
        let direct = op.dense() * v;
        let fast = psi.apply(&op).unwrap();
        assert!((direct - fast.amplitudes()).map(|z| z.norm()).max() < 1e-9);
    }

    #[test]
    fn partial_trace_bell_and_product() {
        let cut = CutoffProfile::uniform(2, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = FockState::basis(cut.clone(), &[0, 0]).unwrap().scale(c1(s))
            .add(&FockState::basis(cut.clone(), &[1, 1]).unwrap().scale(c1(s))).unwrap();
        let rho = bell.to_density();
        let r = partial_trace(&rho, &[1]).unwrap();
        assert!((r.matrix() - DMatrix::from_diagonal(&DVector::from_element(2, c1(0.5)))).map(|z| z.norm()).max() < 1e-15);
        assert!((von_neumann_entropy(&r).unwrap() - 1.0).abs() < 1e-12);
        let fast = bell.reduced_density(&[1]).unwrap();
        assert!((fast.matrix() - r.matrix()).map(|z| z.norm()).max() < 1e-15);

        let a = DMatrix::from_row_slice(2, 2, &[c1(0.7), C64::new(0.1, 0.2), C64::new(0.1, -0.2), c1(0.3)]);
        let b = DMatrix::from_row_slice(2, 2, &[c1(0.4), c1(0.0), c1(0.0), c1(0.6)]);
        let ra = DensityOperator::new(CutoffProfile::uniform(1, 2).unwrap(), a.clone()).unwrap();
        let rb = DensityOperator::new(CutoffProfile::uniform(1, 2).unwrap(), b.clone()).unwrap();
        let ab = ra.tensor(&rb);
        assert!((partial_trace(&ab, &[0]).unwrap().matrix() - a).map(|z| z.norm()).max() < 1e-15);
        assert!((partial_trace(&ab, &[1]).unwrap().matrix() - b).map(|z| z.norm()).max() < 1e-15);
        assert!(partial_trace(&ab, &[]).is_err());
        assert!(partial_trace(&ab, &[0, 1]).is_err());
    }

    #[test]
    fn entropy_pure_is_zero() {
        let cut = CutoffProfile::uniform(1, 3).unwrap();
        let v = DVector::from_vec(vec![c1(0.6), C64::new(0.0, 0.8), c1(0.0)]);
        let rho = FockState::new(cut, v).unwrap().to_density();
        assert!(von_neumann_entropy(&rho).unwrap().abs() < 1e-10);
    }

    #[test]
    fn fluctuation_flat_and_pure() {
        assert!(fluctuation_of_spectrum(&[0.5, 0.5]).unwrap().abs() < 1e-15);
        assert!(fluctuation_of_spectrum(&[1.0, 0.0]).unwrap().abs() < 1e-15);
        assert!(fluctuation_of_spectrum(&[0.0]).is_err());
    }

    #[test]
    fn profile_indexing_roundtrip() {
        let cut = CutoffProfile::new(vec![3, 5, 2], 1e-10).unwrap();
        for i in 0..cut.dim() {
            assert_eq!(cut.index(&cut.levels(i)).unwrap(), i);
        }
        assert!(CutoffProfile::new(vec![1], 1e-10).is_err());
    }
}

impl crate::ops::Moments for FockState {
    fn mode_count(&self) -> usize {
        self.num_modes()
    }

    fn moment_of(&self, ops: &[(usize, &ModeOp)]) -> LabResult<C64> {
        Ok(self.expect_modes(ops)? / self.amplitudes.norm_squared())
    }
}
