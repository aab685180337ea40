//! HCS generation circuits.
//!
//! Qubits are cutoff-2 modes of the same register (`|g⟩ = 0`, `|e⟩ = 1`), so
//! a hybrid field/qubit state is just a [`FockState`]. Linear optics on
//! coherent inputs stays on the coherent backend until an op needs the
//! number basis.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::catalog::{even_cat, hcs, odd_cat, Cplx, State};
use crate::coherent::{CoherentDensity, CoherentSuperposition, CoherentTerm};
use crate::dynamics::{apply_beam_splitter, BeamSplitterSpec, Damped};
use crate::fock::{self, heuristic_cutoff, CutoffProfile, DensityOperator, FockState};
use crate::stats::{sigma_x, sigma_z, CatSubspace};
use crate::{LabError, LabResult, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Accepted deviation from unitarity for user-supplied gates.
pub const UNITARITY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CircuitOp {
    BeamSplitter(BeamSplitterSpec),
    /// `exp(iφ a†a)`
    PhaseShift { mode: usize, phi: f64 },
    /// Apply `a` and renormalize; the squared norm is the click weight.
    Photodetect { mode: usize },
    TraceOut { modes: Vec<usize> },
    /// Dense unitary on cutoff-2 modes, rows of `[re, im]` entries.
    QubitGate { targets: Vec<usize>, matrix: Vec<Vec<Cplx>> },
    /// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ σ_x` on two qubits.
    QubitCnot { control: usize, target: usize },
    /// `P_even ⊗ I + P_odd ⊗ σ_x`: flips the qubit on odd field parity.
    ConditionalParityFlip { field: usize, qubit: usize },
    /// `|g⟩⟨g| ⊗ I + |e⟩⟨e| ⊗ e^{iπa†a}` on the field.
    ConditionalFieldPi { field: usize, qubit: usize },
    /// `(σ_x + σ_z)/√2` on `span{ψ₊(α), ψ₋(α)}`, identity elsewhere.
    SubspaceHadamard { field: usize, alpha: f64 },
    /// `σ_x` on `span{ψ₊(α), ψ₋(α)}`, identity elsewhere.
    SubspaceSigmaX { field: usize, alpha: f64 },
}

impl CircuitOp {
    pub fn is_unitary(&self) -> bool {
        !matches!(self, CircuitOp::Photodetect { .. } | CircuitOp::TraceOut { .. })
    }

    /// Acts on coherent labels without leaving the coherent backend.
    fn is_label_op(&self) -> bool {
        matches!(self, CircuitOp::BeamSplitter(_) | CircuitOp::PhaseShift { .. } | CircuitOp::Photodetect { .. } | CircuitOp::TraceOut { .. })
    }
}

pub fn parse_circuit(json: &str) -> LabResult<Vec<CircuitOp>> {
    Ok(serde_json::from_str(json)?)
}

#[derive(Clone, Debug)]
pub enum CircuitState {
    Pure(State),
    Mixed(Damped),
}

impl CircuitState {
    pub fn num_modes(&self) -> usize {
        match self {
            CircuitState::Pure(s) => s.num_modes(),
            CircuitState::Mixed(r) => r.num_modes(),
        }
    }

    /// `|⟨t|ψ⟩|²` or `⟨t|ρ|t⟩`, both states normalized. Fock targets are compared
    /// in the output's truncation.
    pub fn fidelity(&self, target: &State) -> LabResult<f64> {
        match (self, target) {
            (CircuitState::Pure(State::Coherent(a)), State::Coherent(b)) => a.fidelity(b),
            (CircuitState::Pure(s), t) => {
                let f = s.to_fock(None)?;
                f.fidelity(&t.to_fock(Some(f.cutoffs()))?)
            }
            (CircuitState::Mixed(Damped::Coherent(r)), State::Coherent(b)) => {
                Ok(r.fidelity_pure(b)? / r.trace().re)
            }
            (CircuitState::Mixed(Damped::Coherent(r)), t) => {
                let f = t.to_fock(None)?;
                Ok(r.to_fock(f.cutoffs())?.fidelity_pure(&f)? / r.trace().re)
            }
            (CircuitState::Mixed(Damped::Fock(r)), t) => Ok(r.fidelity_pure(&t.to_fock(Some(r.cutoffs()))?)? / r.trace()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CircuitOutcome {
    pub state: CircuitState,
    /// Product of the click weights of every photodetection.
    pub success_weight: f64,
}

fn check_mode(mode: usize, n: usize) -> LabResult<()> {
    if mode >= n {
        Err(LabError::ModeOutOfRange { mode, num_modes: n })
    } else {
        Ok(())
    }
}

fn check_qubit(psi: &FockState, q: usize) -> LabResult<()> {
    check_mode(q, psi.num_modes())?;
    if psi.cutoffs().cutoff(q) != 2 {
        return Err(LabError::InvalidCutoff(format!("mode {q} is used as a qubit but has cutoff {}", psi.cutoffs().cutoff(q))));
    }
    Ok(())
}

fn distinct(a: usize, b: usize) -> LabResult<()> {
    if a == b {
        Err(LabError::InvalidPartition(format!("mode {a} used twice in one gate")))
    } else {
        Ok(())
    }
}

fn projectors(cutoff: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let even = DMatrix::from_fn(cutoff, cutoff, |i, j| if i == j && i % 2 == 0 { c(1.0) } else { c(0.0) });
    let odd = DMatrix::<C64>::identity(cutoff, cutoff) - &even;
    (even, odd)
}

fn hadamard() -> Matrix2<C64> {
    (sigma_x() + sigma_z()) * c(std::f64::consts::FRAC_1_SQRT_2)
}

fn subspace(alpha: f64, cutoff: usize) -> LabResult<CatSubspace> {
    if !(alpha > 0.0) {
        return Err(LabError::DegenerateNormalization("subspace gates need α > 0".into()));
    }
    CatSubspace::standard(c(alpha), cutoff)
}

fn subspace_gate(psi: &FockState, field: usize, alpha: f64, u: &Matrix2<C64>) -> LabResult<FockState> {
    check_mode(field, psi.num_modes())?;
    let k = subspace(alpha, psi.cutoffs().cutoff(field))?;
    Ok(psi.apply_local(&[field], &k.gate(u)))
}

fn renormalize(psi: FockState, reference: f64) -> LabResult<(FockState, f64)> {
    let w = psi.norm().powi(2) / reference;
    if !(w > 1e-300) {
        return Err(LabError::ZeroProbability);
    }
    let n = psi.normalize()?;
    Ok((n, w))
}

fn apply_fock_op(psi: &FockState, op: &CircuitOp) -> LabResult<(FockState, f64)> {
    let n = psi.num_modes();
    let prof = psi.cutoffs();
    match op {
        CircuitOp::BeamSplitter(spec) => Ok((spec.apply_fock(psi)?, 1.0)),
        CircuitOp::PhaseShift { mode, phi } => {
            check_mode(*mode, n)?;
            Ok((psi.apply(&fock::phase_shift(*mode, *phi, prof)?)?, 1.0))
        }
        CircuitOp::Photodetect { mode } => {
            check_mode(*mode, n)?;
            let before = psi.norm().powi(2);
            renormalize(psi.apply(&fock::annihilation(*mode, prof)?)?, before)
        }
        CircuitOp::QubitGate { targets, matrix } => {
            for (i, &t) in targets.iter().enumerate() {
                check_qubit(psi, t)?;
                if targets[..i].contains(&t) {
                    return Err(LabError::InvalidPartition(format!("target {t} repeated")));
                }
            }
            let d = 1usize << targets.len();
            if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                return Err(LabError::DimensionMismatch(format!("qubit gate on {} qubits needs a {d}x{d} matrix", targets.len())));
            }
            let m = DMatrix::from_fn(d, d, |i, j| matrix[i][j].0);
            let defect = (m.adjoint() * &m - DMatrix::<C64>::identity(d, d)).map(|z| z.norm()).max();
            if defect > UNITARITY_TOLERANCE {
                return Err(LabError::Tolerance(format!("qubit gate is not unitary (defect {defect:.2e})")));
            }
            Ok((psi.apply_local(targets, &m), 1.0))
        }
        CircuitOp::QubitCnot { control, target } => {
            check_qubit(psi, *control)?;
            check_qubit(psi, *target)?;
            distinct(*control, *target)?;
            let mut m = DMatrix::<C64>::zeros(4, 4);
            for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
                m[(r, col)] = c(1.0);
            }
            Ok((psi.apply_local(&[*control, *target], &m), 1.0))
        }
        CircuitOp::ConditionalParityFlip { field, qubit } => {
            check_mode(*field, n)?;
            check_qubit(psi, *qubit)?;
            distinct(*field, *qubit)?;
            let (even, odd) = projectors(prof.cutoff(*field));
            let sx = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
            let m = fock::kron(&even, &DMatrix::identity(2, 2)) + fock::kron(&odd, &sx);
            Ok((psi.apply_local(&[*field, *qubit], &m), 1.0))
        }
        CircuitOp::ConditionalFieldPi { field, qubit } => {
            check_mode(*field, n)?;
            check_qubit(psi, *qubit)?;
            distinct(*field, *qubit)?;
            let cut = prof.cutoff(*field);
            let parity = DMatrix::from_fn(cut, cut, |i, j| if i == j { c(if i % 2 == 0 { 1.0 } else { -1.0 }) } else { c(0.0) });
            let g = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
            let e = DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
            let m = fock::kron(&g, &DMatrix::identity(cut, cut)) + fock::kron(&e, &parity);
            Ok((psi.apply_local(&[*qubit, *field], &m), 1.0))
        }
        CircuitOp::SubspaceHadamard { field, alpha } => Ok((subspace_gate(psi, *field, *alpha, &hadamard())?, 1.0)),
        CircuitOp::SubspaceSigmaX { field, alpha } => Ok((subspace_gate(psi, *field, *alpha, &sigma_x())?, 1.0)),
        CircuitOp::TraceOut { .. } => unreachable!("handled by run_circuit"),
    }
}

fn apply_coherent_op(psi: &CoherentSuperposition, op: &CircuitOp) -> LabResult<(CoherentSuperposition, f64)> {
    match op {
        CircuitOp::BeamSplitter(spec) => match apply_beam_splitter(&State::Coherent(psi.clone()), spec)? {
            State::Coherent(s) => Ok((s, 1.0)),
            State::Fock(_) => unreachable!("coherent input stays coherent"),
        },
        CircuitOp::PhaseShift { mode, phi } => Ok((psi.apply_phase_shift(*mode, *phi)?, 1.0)),
        CircuitOp::Photodetect { mode } => {
            let before = psi.norm_sqr();
            let after = psi.apply_annihilation(*mode)?;
            let w = after.norm_sqr() / before;
            if !(w > 1e-300) {
                return Err(LabError::ZeroProbability);
            }
            Ok((after.normalize()?, w))
        }
        _ => unreachable!("only label ops reach the coherent path"),
    }
}

fn trace_out(state: &State, modes: &[usize]) -> LabResult<Damped> {
    let n = state.num_modes();
    for &m in modes {
        check_mode(m, n)?;
    }
    let keep: Vec<usize> = (0..n).filter(|m| !modes.contains(m)).collect();
    match Damped::from_state(state) {
        Damped::Coherent(r) => Ok(Damped::Coherent(r.reduce(&keep)?)),
        Damped::Fock(r) => Ok(Damped::Fock(r.partial_trace(&keep)?)),
    }
}

/// Apply `ops` in order. Coherent inputs move to the number basis (default
/// cutoffs) at the first op that is not a label map.
pub fn run_circuit(initial: &State, ops: &[CircuitOp]) -> LabResult<CircuitOutcome> {
    let mut state = initial.clone();
    let mut weight = 1.0;
    for (k, op) in ops.iter().enumerate() {
        if let CircuitOp::TraceOut { modes } = op {
            if k + 1 != ops.len() {
                return Err(LabError::Config("trace_out must be the last op".into()));
            }
            return Ok(CircuitOutcome { state: CircuitState::Mixed(trace_out(&state, modes)?), success_weight: weight });
        }
        state = match state {
            State::Coherent(s) if op.is_label_op() => {
                let (s, w) = apply_coherent_op(&s, op)?;
                weight *= w;
                State::Coherent(s)
            }
            other => {
                let f = other.to_fock(None)?;
                let (f, w) = apply_fock_op(&f, op)?;
                weight *= w;
                State::Fock(f)
            }
        };
    }
    Ok(CircuitOutcome { state: CircuitState::Pure(state), success_weight: weight })
}

// ---------------------------------------------------------------- photon loss

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    /// Click on mode 2: the `+` family.
    Mode2,
    /// Click on mode 4: the `−` family.
    Mode4,
}

impl Detector {
    pub fn mode_index(self) -> usize {
        match self {
            Detector::Mode2 => 1,
            Detector::Mode4 => 3,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Detector::Mode2 => 1.0,
            Detector::Mode4 => -1.0,
        }
    }
}

/// `U₂₄(π/2) e^{iφ a₂†a₂} U₁₂(ε) U₃₄(ε)` on modes `0..4`.
pub fn photon_loss_unitaries(eps: f64, phi: f64) -> Vec<CircuitOp> {
    vec![
        CircuitOp::BeamSplitter(BeamSplitterSpec::rotation(2, 3, eps)),
        CircuitOp::BeamSplitter(BeamSplitterSpec::rotation(0, 1, eps)),
        CircuitOp::PhaseShift { mode: 1, phi },
        CircuitOp::BeamSplitter(BeamSplitterSpec::rotation(1, 3, std::f64::consts::FRAC_PI_2)),
    ]
}

pub fn photon_loss_circuit(eps: f64, phi: f64, detector: Detector) -> Vec<CircuitOp> {
    let mut ops = photon_loss_unitaries(eps, phi);
    ops.push(CircuitOp::Photodetect { mode: detector.mode_index() });
    ops.push(CircuitOp::TraceOut { modes: vec![1, 3] });
    ops
}

/// `ψ₋ ⊗ |0⟩ ⊗ ψ₊ ⊗ |0⟩`
pub fn photon_loss_input(alpha: f64) -> LabResult<CoherentSuperposition> {
    let vac = CoherentSuperposition::vacuum(1)?;
    Ok(odd_cat(c(alpha))?.tensor(&vac).tensor(&even_cat(c(alpha))?).tensor(&vac))
}

/// `(ψ₊ ⊗ ψ₊ + s e^{−iθ} ψ₋ ⊗ ψ₋)/√2`
pub fn phased_hcs(alpha: f64, theta: f64, sign: f64) -> LabResult<CoherentSuperposition> {
    let p = even_cat(c(alpha))?;
    let m = odd_cat(c(alpha))?;
    p.power(2).add(&m.power(2).scale(C64::from_polar(sign, -theta)))?.normalize()
}

/// `(a₁ + s e^{−iθ} a₃)(ψ₋ ⊗ ψ₊)`, normalized: the coherent photon loss in closed form.
pub fn loss_operator_oracle(alpha: f64, theta: f64, sign: f64) -> LabResult<CoherentSuperposition> {
    let base = odd_cat(c(alpha))?.tensor(&even_cat(c(alpha))?);
    base.apply_annihilation(0)?
        .add(&base.apply_annihilation(1)?.scale(C64::from_polar(sign, -theta)))?
        .normalize()
}

/// The four-term pre-detection display, with mixing angle `γ` standing where cos ε and sin ε appear.
pub fn photon_loss_display(alpha: f64, gamma: f64, phi: f64) -> LabResult<CoherentSuperposition> {
    let a = c(alpha);
    let e = C64::from_polar(1.0, phi);
    let r2 = std::f64::consts::SQRT_2;
    let (s, co) = gamma.sin_cos();
    let plus = a * (e + 1.0) / r2 * s;
    let minus = a * (e - 1.0) / r2 * s;
    let k = a * co;
    // label order: modes 1, 2, 3, 4
    CoherentSuperposition::new(
        4,
        vec![
            CoherentTerm::new(c(1.0), vec![k, -plus, k, minus]),
            CoherentTerm::new(c(1.0), vec![k, -minus, -k, plus]),
            CoherentTerm::new(c(-1.0), vec![-k, minus, k, -plus]),
            CoherentTerm::new(c(-1.0), vec![-k, plus, -k, -minus]),
        ],
    )?
    .normalize()
}

#[derive(Clone, Debug, Serialize)]
pub struct PhotonLossResult {
    pub alpha: f64,
    pub eps: f64,
    pub phi: f64,
    pub detector: Detector,
    /// Output phase of the produced family; equals `φ`.
    pub theta: f64,
    /// Against `(ψ₊ψ₊ ± e^{−iθ}ψ₋ψ₋)/√2`.
    pub fidelity: f64,
    /// Against the loss-operator state.
    pub oracle_fidelity: f64,
    pub success_weight: f64,
    /// Pre-detection state against the display read with angle `ε/2`.
    pub display_fidelity: f64,
    /// Same, read literally with angle `ε`.
    pub display_fidelity_literal: f64,
    #[serde(skip)]
    pub output: Option<CoherentDensity>,
}

pub fn coherent_photon_loss_protocol(alpha: f64, eps: f64, phi: f64, detector: Detector) -> LabResult<PhotonLossResult> {
    if !(eps > 0.0 && eps < std::f64::consts::FRAC_PI_4) {
        return Err(LabError::Config(format!("ε must lie in (0, π/4), got {eps}")));
    }
    if !(alpha > 0.0) {
        return Err(LabError::DegenerateNormalization("α must be positive".into()));
    }
    let input = State::Coherent(photon_loss_input(alpha)?);
    let pre = run_circuit(&input, &photon_loss_unitaries(eps, phi))?;
    let CircuitState::Pure(State::Coherent(pre)) = pre.state else { unreachable!("label ops only") };
    let display_fidelity = pre.fidelity(&photon_loss_display(alpha, eps / 2.0, phi)?)?;
    let display_fidelity_literal = pre.fidelity(&photon_loss_display(alpha, eps, phi)?)?;
    let out = run_circuit(&input, &photon_loss_circuit(eps, phi, detector))?;
    let theta = phi;
    let s = detector.sign();
    let fidelity = out.state.fidelity(&State::Coherent(phased_hcs(alpha, theta, s)?))?;
    let oracle_fidelity = out.state.fidelity(&State::Coherent(loss_operator_oracle(alpha, theta, s)?))?;
    let output = match out.state {
        CircuitState::Mixed(Damped::Coherent(r)) => Some(r),
        _ => None,
    };
    Ok(PhotonLossResult {
        alpha,
        eps,
        phi,
        detector,
        theta,
        fidelity,
        oracle_fidelity,
        success_weight: out.success_weight,
        display_fidelity,
        display_fidelity_literal,
        output,
    })
}

// ---------------------------------------------------------------- qubit mediated

/// Field cutoff used for the hybrid register.
pub fn field_cutoff(alpha: f64) -> usize {
    heuristic_cutoff(alpha)
}

/// Modes: field 1, field 2, qubit a₁, qubit a₂. Steps after the two initial Hadamards.
pub fn qubit_mediated_circuit(alpha: f64, skip_second_cnot: bool) -> Vec<CircuitOp> {
    let mut ops = vec![
        CircuitOp::SubspaceHadamard { field: 0, alpha },
        CircuitOp::SubspaceHadamard { field: 1, alpha },
        CircuitOp::ConditionalParityFlip { field: 0, qubit: 2 },
        CircuitOp::QubitCnot { control: 2, target: 3 },
        CircuitOp::ConditionalFieldPi { field: 1, qubit: 3 },
    ];
    if !skip_second_cnot {
        ops.push(CircuitOp::QubitCnot { control: 2, target: 3 });
    }
    ops.push(CircuitOp::ConditionalParityFlip { field: 0, qubit: 2 });
    ops.push(CircuitOp::SubspaceHadamard { field: 1, alpha });
    ops
}

/// Steps before the field-π gate: where the four-term display applies.
const DISPLAY_STEP: usize = 4;

/// `f₁ ⊗ f₂ ⊗ |q₁⟩ ⊗ |q₂⟩`
fn hybrid(fields: [&nalgebra::DVector<C64>; 2], qubits: [usize; 2]) -> LabResult<FockState> {
    let q = |k: usize| {
        let mut v = nalgebra::DVector::<C64>::zeros(2);
        v[k] = c(1.0);
        v
    };
    FockState::product(&[fields[0].clone(), fields[1].clone(), q(qubits[0]), q(qubits[1])])
}

#[derive(Clone, Debug, Serialize)]
pub struct QubitMediatedResult {
    pub alpha: f64,
    pub cutoff: usize,
    pub skipped_second_cnot: bool,
    /// Against `HCS₂⁺ ⊗ |g, g⟩`.
    pub fidelity: f64,
    /// After the first qubit CNOT, against the four-term display.
    pub intermediate_fidelity: f64,
    /// `tr ρ²` of the two qubits at the end.
    pub qubit_purity: f64,
    pub norm_defect: f64,
    #[serde(skip)]
    pub final_state: Option<FockState>,
}

pub fn qubit_mediated_generation(alpha: f64) -> LabResult<QubitMediatedResult> {
    qubit_mediated_generation_with(alpha, field_cutoff(alpha), false)
}

pub fn qubit_mediated_generation_with(alpha: f64, cutoff: usize, skip_second_cnot: bool) -> LabResult<QubitMediatedResult> {
    let k = subspace(alpha, cutoff)?;
    let (p, m) = (k.vector(0), k.vector(1));
    let start = hybrid([&p, &p], [0, 0])?;
    let ops = qubit_mediated_circuit(alpha, skip_second_cnot);
    let mid = run_circuit(&State::Fock(start), &ops[..DISPLAY_STEP])?;
    let CircuitState::Pure(State::Fock(mid)) = mid.state else { unreachable!("unitary circuit") };
    let display = hybrid([&p, &p], [0, 0])?
        .add(&hybrid([&p, &m], [0, 0])?)?
        .add(&hybrid([&m, &p], [1, 1])?)?
        .add(&hybrid([&m, &m], [1, 1])?)?
        .scale(c(0.5));
    let intermediate_fidelity = mid.fidelity(&display)?;
    let end = run_circuit(&State::Fock(mid), &ops[DISPLAY_STEP..])?;
    let CircuitState::Pure(State::Fock(end)) = end.state else { unreachable!("unitary circuit") };
    let prof = CutoffProfile::uniform(2, cutoff)?;
    let target = hcs(2, c(alpha), 0.0)?.to_fock(&prof)?.normalize()?;
    let gg = FockState::basis(CutoffProfile::uniform(2, 2)?, &[0, 0])?;
    let fidelity = end.fidelity(&target.tensor(&gg))?;
    let qubit_purity = end.reduced_density(&[2, 3])?.purity();
    Ok(QubitMediatedResult {
        alpha,
        cutoff,
        skipped_second_cnot: skip_second_cnot,
        fidelity,
        intermediate_fidelity,
        qubit_purity,
        norm_defect: (end.norm() - 1.0).abs(),
        final_state: Some(end),
    })
}

// ---------------------------------------------------------------- direct route

#[derive(Clone, Debug, Serialize)]
pub struct DirectRouteResult {
    pub alpha: f64,
    pub cutoff: usize,
    /// After `U₁₂(π/2)` and `e^{iπa₂†a₂}`, against `(ψ₊ψ₋ + ψ₋ψ₊)/√2`.
    pub bell_fidelity: f64,
    /// After the subspace σ_x on mode 2, against `HCS₂⁺`.
    pub hcs_plus_fidelity: f64,
    /// `(I ⊗ a₂)` on the Bell state against `HCS₂⁻`.
    pub annihilation_vs_hcs_minus: f64,
    /// Same against `HCS₂⁺`.
    pub annihilation_vs_hcs_plus: f64,
    /// Same against `√coth α² ψ₊ψ₊ + √tanh α² ψ₋ψ₋`.
    pub annihilation_vs_derived: f64,
}

pub fn direct_preparation_route(alpha: f64) -> LabResult<DirectRouteResult> {
    if !(alpha > 0.0) {
        return Err(LabError::DegenerateNormalization("α must be positive".into()));
    }
    let cutoff = heuristic_cutoff(std::f64::consts::SQRT_2 * alpha);
    let prof = CutoffProfile::uniform(2, cutoff)?;
    let input = odd_cat(c(std::f64::consts::SQRT_2 * alpha))?.tensor(&CoherentSuperposition::vacuum(1)?);
    let to_bell = [
        CircuitOp::BeamSplitter(BeamSplitterSpec::rotation(0, 1, std::f64::consts::FRAC_PI_2)),
        CircuitOp::PhaseShift { mode: 1, phi: std::f64::consts::PI },
    ];
    let bell = run_circuit(&State::Coherent(input), &to_bell)?;
    let CircuitState::Pure(bell) = bell.state else { unreachable!("unitary") };
    let bell = State::Fock(bell.to_fock(Some(&prof))?);
    let fock_of = |s: CoherentSuperposition| -> LabResult<State> { Ok(State::Fock(s.to_fock(&prof)?.normalize()?)) };
    let (p, m) = (even_cat(c(alpha))?, odd_cat(c(alpha))?);
    let bell_target = fock_of(p.tensor(&m).add(&m.tensor(&p))?)?;
    let bell_fidelity = CircuitState::Pure(bell.clone()).fidelity(&bell_target)?;
    let plus = run_circuit(&bell, &[CircuitOp::SubspaceSigmaX { field: 1, alpha }])?;
    let hcs_plus_fidelity = plus.state.fidelity(&fock_of(hcs(2, c(alpha), 0.0)?)?)?;
    let ann = run_circuit(&bell, &[CircuitOp::Photodetect { mode: 1 }])?;
    let a2 = alpha * alpha;
    let derived = p.power(2).scale(c((1.0 / a2.tanh()).sqrt())).add(&m.power(2).scale(c(a2.tanh().sqrt())))?;
    Ok(DirectRouteResult {
        alpha,
        cutoff,
        bell_fidelity,
        hcs_plus_fidelity,
        annihilation_vs_hcs_minus: ann.state.fidelity(&fock_of(hcs(2, c(alpha), std::f64::consts::PI)?)?)?,
        annihilation_vs_hcs_plus: ann.state.fidelity(&fock_of(hcs(2, c(alpha), 0.0)?)?)?,
        annihilation_vs_derived: ann.state.fidelity(&fock_of(derived)?)?,
    })
}

/// Subspace Hadamard acting on `ψ₊` with all the objects a check needs.
#[derive(Clone, Debug, Serialize)]
pub struct HadamardCheck {
    /// Coefficients of `|α⟩` and `|−α⟩` in `Hψ₊`.
    pub coefficients: [f64; 2],
    /// The displayed pair; its second entry has the opposite sign of the true one.
    pub displayed: [f64; 2],
    /// `‖(H² − I) P_K‖`
    pub involution_defect: f64,
    /// `‖(I − P_K) H P_K‖`
    pub leakage: f64,
    /// Residual of `Hψ₊` as an eigenvector of `|α⟩⟨α| − |−α⟩⟨−α|`.
    pub eigen_residual: f64,
}

pub fn subspace_hadamard_check(alpha: f64, cutoff: usize) -> LabResult<HadamardCheck> {
    let k = subspace(alpha, cutoff)?;
    let h = k.gate(&hadamard());
    let pk = k.projector();
    let id = DMatrix::<C64>::identity(cutoff, cutoff);
    let involution_defect = ((&h * &h - &id) * &pk).map(|z| z.norm()).max();
    let leakage = ((&id - &pk) * &h * &pk).map(|z| z.norm()).max();
    let hp = &h * k.vector(0);
    let plus = fock::coherent_amplitudes(c(alpha), cutoff);
    let minus = fock::coherent_amplitudes(c(-alpha), cutoff);
    // Hψ₊ = x|α⟩ + y|−α⟩: solve the 2×2 Gram system
    let g = Matrix2::new(plus.dotc(&plus), plus.dotc(&minus), minus.dotc(&plus), minus.dotc(&minus));
    let rhs = nalgebra::Vector2::new(plus.dotc(&hp), minus.dotc(&hp));
    let xy = g.lu().solve(&rhs).ok_or_else(|| LabError::IllConditionedGram(f64::INFINITY))?;
    let e = (-2.0 * alpha * alpha).exp();
    let den = 2.0 * (1.0 - e * e).sqrt();
    let displayed = [((1.0 + e).sqrt() + (1.0 - e).sqrt()) / den, ((1.0 + e).sqrt() - (1.0 - e).sqrt()) / den];
    let obs = &plus * plus.adjoint() - &minus * minus.adjoint();
    let v = &obs * &hp;
    let lambda = hp.dotc(&v) / hp.dotc(&hp);
    let eigen_residual = (&v - &hp * lambda).norm();
    Ok(HadamardCheck {
        coefficients: [xy[0].re, xy[1].re],
        displayed,
        involution_defect,
        leakage,
        eigen_residual,
    })
}

/// Reduced density of the two field modes at the end of a run, for inspection.
pub fn field_density(psi: &FockState) -> LabResult<DensityOperator> {
    psi.reduced_density(&[0, 1])
}
