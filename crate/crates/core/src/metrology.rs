//! Variance of 1-local observables, QFI and the usefulness ratio `N^rF`.
//!
//! `H = Σ_j Σ_k c_jk G_k^(j)` ranges over real coefficient vectors of unit
//! Euclidean norm, so the maximal variance is the top eigenvalue of the
//! symmetrized covariance matrix of the generators.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{even_cat, odd_cat, omega, squeezed_hcs_cutoff, squeezed_hcs_with_cutoff};
use crate::coherent::CoherentSuperposition;
use crate::fock::{self, CutoffProfile, FockOperator, FockState};
use crate::ops::{ModeOp, Moments};
use crate::{LabError, LabResult, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Negative covariance eigenvalues beyond this (relative to the top one) are a numerical failure.
pub const PSD_SLACK: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraSpec {
    pub name: String,
    pub generators: Vec<ModeOp>,
}

impl AlgebraSpec {
    pub fn new(name: &str, generators: Vec<ModeOp>) -> LabResult<Self> {
        if generators.is_empty() {
            return Err(LabError::Config("algebra needs at least one generator".into()));
        }
        for (k, g) in generators.iter().enumerate() {
            let defect = g.sub(&g.adjoint()).terms().map(|(_, _, c)| c.norm()).fold(0.0, f64::max);
            if defect > 1e-12 {
                return Err(LabError::NotHermitian(defect)).map_err(|e| {
                    LabError::Config(format!("generator {k} of {name} is not Hermitian: {e}"))
                });
            }
        }
        Ok(Self { name: name.to_string(), generators })
    }

    /// `{x^(0), x^(π/2)}`
    pub fn h3() -> Self {
        Self::new("h3", vec![ModeOp::quadrature(0.0), ModeOp::quadrature(std::f64::consts::FRAC_PI_2)])
            .expect("hermitian")
    }

    /// `h3 ∪ {a†a}`
    pub fn h4() -> Self {
        let mut g = Self::h3().generators;
        g.push(ModeOp::number());
        Self::new("h4", g).expect("hermitian")
    }

    /// `{a†a/2 + 1/4, (a² + a†²)/2, i(a² − a†²)/2}`
    pub fn sl2() -> Self {
        let k0 = ModeOp::monomial(1, 1, c(0.5)).add(&ModeOp::monomial(0, 0, c(0.25)));
        let k1 = ModeOp::monomial(0, 2, c(0.5)).add(&ModeOp::monomial(2, 0, c(0.5)));
        let k2 = ModeOp::monomial(0, 2, C64::new(0.0, 0.5)).add(&ModeOp::monomial(2, 0, C64::new(0.0, -0.5)));
        Self::new("sl2", vec![k0, k1, k2]).expect("hermitian")
    }

    pub fn by_name(name: &str) -> LabResult<Self> {
        match name.to_ascii_lowercase().as_str() {
            "h3" => Ok(Self::h3()),
            "h4" => Ok(Self::h4()),
            "sl2" => Ok(Self::sl2()),
            other => Err(LabError::Config(format!("unknown algebra {other:?} (h3, h4, sl2)"))),
        }
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn with_identity(&self) -> Self {
        let mut g = self.generators.clone();
        g.push(ModeOp::identity());
        Self { name: format!("{}+I", self.name), generators: g }
    }

    /// Each generator replaced by `S(r) G S(r)†` for real squeezing `r`,
    /// i.e. `a → a cosh r + a† sinh r`.
    pub fn conjugated_by_squeeze(&self, r: f64) -> Self {
        let a = ModeOp::monomial(0, 1, c(r.cosh())).add(&ModeOp::monomial(1, 0, c(r.sinh())));
        let ad = a.adjoint();
        let generators = self
            .generators
            .iter()
            .map(|g| {
                g.terms().fold(ModeOp::zero(), |acc, (p, q, coeff)| {
                    let mut t = ModeOp::identity();
                    for _ in 0..p {
                        t = t.mul(&ad);
                    }
                    for _ in 0..q {
                        t = t.mul(&a);
                    }
                    acc.add(&t.scale(coeff))
                })
            })
            .collect();
        Self { name: format!("S({r}){}S†", self.name), generators }
    }
}

/// `Cov[(j,k),(j',k')] = Re⟨G_k^(j) G_k'^(j')⟩ − ⟨G_k^(j)⟩⟨G_k'^(j')⟩`, indexed `j·|gen| + k`.
pub fn covariance_matrix<M: Moments + Sync + ?Sized>(psi: &M, alg: &AlgebraSpec) -> LabResult<DMatrix<f64>> {
    let n = psi.mode_count();
    let g = alg.len();
    let dim = n * g;
    let means = (0..dim)
        .map(|p| Ok(psi.mean_of(p / g, &alg.generators[p % g])?.re))
        .collect::<LabResult<Vec<f64>>>()?;
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|p| (p..dim).map(move |q| (p, q))).collect();
    let entries = pairs
        .par_iter()
        .map(|&(p, q)| {
            let (j, k) = (p / g, p % g);
            let (jj, kk) = (q / g, q % g);
            let second = if j == jj {
                psi.mean_of(j, &alg.generators[k].mul(&alg.generators[kk]))?
            } else {
                psi.moment_of(&[(j, &alg.generators[k]), (jj, &alg.generators[kk])])?
            };
            Ok(second.re - means[p] * means[q])
        })
        .collect::<LabResult<Vec<f64>>>()?;
    let mut cov = DMatrix::zeros(dim, dim);
    for (&(p, q), v) in pairs.iter().zip(entries) {
        cov[(p, q)] = v;
        cov[(q, p)] = v;
    }
    Ok(cov)
}

/// `Var_ψ(Σ c_jk G_k^(j)) = cᵀ Cov c`
pub fn one_local_variance<M: Moments + Sync + ?Sized>(psi: &M, alg: &AlgebraSpec, coeffs: &[f64]) -> LabResult<f64> {
    let cov = covariance_matrix(psi, alg)?;
    quadratic_form(&cov, coeffs)
}

pub fn quadratic_form(cov: &DMatrix<f64>, coeffs: &[f64]) -> LabResult<f64> {
    if coeffs.len() != cov.nrows() {
        return Err(LabError::DimensionMismatch(format!(
            "{} coefficients for {} mode-generator pairs",
            coeffs.len(),
            cov.nrows()
        )));
    }
    let v = nalgebra::DVector::from_column_slice(coeffs);
    Ok((v.transpose() * cov * &v)[(0, 0)])
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxVariance {
    pub value: f64,
    /// Unit-norm maximizer, sign fixed so the largest entry is positive.
    pub coefficients: Vec<f64>,
}

pub fn top_eigenpair(cov: &DMatrix<f64>) -> LabResult<MaxVariance> {
    let eig = SymmetricEigen::new(cov.clone());
    let (imax, &top) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| LabError::Config("empty covariance".into()))?;
    let low = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if low < -PSD_SLACK * top.abs().max(1.0) {
        return Err(LabError::NotPositive(low));
    }
    let mut v: Vec<f64> = eig.eigenvectors.column(imax).iter().cloned().collect();
    let lead = v.iter().cloned().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(MaxVariance { value: top, coefficients: v })
}

pub fn max_one_local_variance<M: Moments + Sync + ?Sized>(psi: &M, alg: &AlgebraSpec) -> LabResult<MaxVariance> {
    top_eigenpair(&covariance_matrix(psi, alg)?)
}

/// Usefulness ratio: max variance of `psi` over the mean of the branches' max variances.
pub fn nrf<M: Moments + Sync + ?Sized, B: Moments + Sync>(psi: &M, branches: &[B], alg: &AlgebraSpec) -> LabResult<f64> {
    let top = max_one_local_variance(psi, alg)?.value;
    let denom = branch_mean(branches, alg)?.0;
    Ok(top / denom)
}

fn branch_mean<B: Moments + Sync>(branches: &[B], alg: &AlgebraSpec) -> LabResult<(f64, Vec<f64>)> {
    if branches.is_empty() {
        return Err(LabError::Config("need at least one branch".into()));
    }
    let each = branches
        .iter()
        .map(|b| Ok(max_one_local_variance(b, alg)?.value))
        .collect::<LabResult<Vec<f64>>>()?;
    let mean = each.iter().sum::<f64>() / each.len() as f64;
    if mean < 1e-12 {
        return Err(LabError::Undefined("branches have no variance in this algebra".into()));
    }
    Ok((mean, each))
}

#[derive(Clone, Debug, Serialize)]
pub struct MetrologyReport {
    pub algebra: String,
    /// How the maximization over 1-local observables is normalized.
    pub normalization: String,
    pub max_variance: f64,
    pub optimal_coefficients: Vec<f64>,
    pub qfi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nrf: Option<f64>,
    pub branch_max_variances: Vec<f64>,
    pub total_photon_number: f64,
}

pub fn metrology_report<M: Moments + Sync + ?Sized, B: Moments + Sync>(
    psi: &M,
    branches: &[B],
    alg: &AlgebraSpec,
) -> LabResult<MetrologyReport> {
    let top = max_one_local_variance(psi, alg)?;
    let (nrf, branch_max_variances) = if branches.is_empty() {
        (None, Vec::new())
    } else {
        let (mean, each) = branch_mean(branches, alg)?;
        (Some(top.value / mean), each)
    };
    let total_photon_number = (0..psi.mode_count())
        .map(|m| Ok(psi.mean_of(m, &ModeOp::number())?.re))
        .sum::<LabResult<f64>>()?;
    Ok(MetrologyReport {
        algebra: alg.name.clone(),
        normalization: "unit-euclidean".into(),
        max_variance: top.value,
        optimal_coefficients: top.coefficients,
        qfi: 4.0 * top.value,
        nrf,
        branch_max_variances,
        total_photon_number,
    })
}

/// `4 Var_ψ(H)` for a pure state.
pub fn qfi_pure(psi: &FockState, h: &FockOperator) -> LabResult<f64> {
    let defect = h.hermiticity_defect();
    if defect > 1e-12 {
        return Err(LabError::NotHermitian(defect));
    }
    let n2 = psi.norm().powi(2);
    let phi = psi.apply(h)?;
    let h2 = phi.norm().powi(2) / n2;
    let h1 = psi.inner(&phi)?.re / n2;
    Ok(4.0 * (h2 - h1 * h1))
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `n` cutoff-2 modes and `Σ_j σ_z^(j)`.
pub fn ghz_with_sigma_z(n: usize) -> LabResult<(FockState, FockOperator)> {
    let prof = CutoffProfile::uniform(n, 2)?;
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let psi = FockState::basis(prof.clone(), &vec![0; n])?
        .scale(c(k))
        .add(&FockState::basis(prof.clone(), &vec![1; n])?.scale(c(k)))?;
    let sz = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-1.0)]));
    let mut h = FockOperator::local(&prof, vec![0], sz.clone(), true)?;
    for j in 1..n {
        h = h.add(&FockOperator::local(&prof, vec![j], sz.clone(), true)?)?;
    }
    Ok((psi, h))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_exponent(xs: &[f64], ys: &[f64]) -> LabResult<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(LabError::DimensionMismatch("need at least two paired samples".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(LabError::Undefined("log-log fit needs positive samples".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::Undefined("degenerate abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Coefficients on the sl2 basis that realize `z̄a² + za†²` on every mode.
pub fn two_photon_coefficients(n: usize, z: C64) -> Vec<f64> {
    (0..n).flat_map(|_| [0.0, 2.0 * z.re, -2.0 * z.im]).collect()
}

/// `Var_Ω(α)(Σ_j z̄a_j² + za_j†²)` by direct expansion. With `R = Re(z̄α²)`,
/// `4N²R² + (N/2)(4Re(z̄²α⁴) − 8R² + 4|z|²|α|⁴ + 4|z|²|α|²(tanh|α|² + coth|α|²) + 4|z|²)`.
pub fn omega_two_photon_variance(n: usize, alpha: C64, z: C64) -> f64 {
    let nf = n as f64;
    let a2 = alpha.norm_sqr();
    let r = (z.conj() * alpha * alpha).re;
    let z2 = z.norm_sqr();
    4.0 * nf * nf * r * r
        + nf / 2.0
            * (4.0 * (z.conj() * z.conj() * alpha.powu(4)).re - 8.0 * r * r
                + 4.0 * z2 * a2 * a2
                + 4.0 * z2 * a2 * (a2.tanh() + 1.0 / a2.tanh())
                + 4.0 * z2)
}

/// The shorter expression without the `4|z|²|α|⁴` term and with `2|z|²` for `4|z|²`.
pub fn omega_two_photon_variance_printed(n: usize, alpha: C64, z: C64) -> f64 {
    let nf = n as f64;
    let a2 = alpha.norm_sqr();
    let r = (z.conj() * alpha * alpha).re;
    let z2 = z.norm_sqr();
    4.0 * nf * nf * r * r
        + nf / 2.0
            * (4.0 * (z.conj() * z.conj() * alpha.powu(4)).re - 8.0 * r * r
                + 4.0 * z2 * a2 * (a2.tanh() + 1.0 / a2.tanh())
                + 2.0 * z2)
}

/// Branches of `Ω(α)` as coherent superpositions.
pub fn omega_branch_states(n: usize, alpha: f64) -> LabResult<[CoherentSuperposition; 2]> {
    crate::catalog::omega_branches(n, c(alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Frame {
    /// Generators conjugated along with the state, `S G S†`.
    Conjugated,
    /// The fixed sl2 basis.
    Fixed,
}

#[derive(Clone, Debug, Serialize)]
pub struct SqueezedNrf {
    pub alpha: f64,
    pub w: f64,
    pub n: usize,
    pub cutoff: usize,
    /// `N^rF` of `Ω(αe^w)` itself.
    pub reference: f64,
    pub conjugated: f64,
    pub fixed: f64,
}

fn squeeze_every_mode(psi: FockState, w: f64) -> LabResult<FockState> {
    let cutoff = psi.cutoffs().cutoff(0);
    let s = fock::squeeze(0, c(w), &CutoffProfile::uniform(1, cutoff)?)?;
    let mut out = psi;
    for m in 0..out.num_modes() {
        out = out.apply_local(&[m], s.local_matrix());
    }
    Ok(out)
}

/// `N^rF` of `S(w)^{⊗N}Ω(αe^w)` under sl2 in both frames, next to that of `Ω(αe^w)`.
pub fn squeezed_hcs_nrf(alpha: f64, w: f64, n: usize) -> LabResult<SqueezedNrf> {
    squeezed_hcs_nrf_with_cutoff(alpha, w, n, squeezed_hcs_cutoff(alpha, w))
}

pub fn squeezed_hcs_nrf_with_cutoff(alpha: f64, w: f64, n: usize, cutoff: usize) -> LabResult<SqueezedNrf> {
    let inner = alpha * w.exp();
    let alg = AlgebraSpec::sl2();
    let reference = nrf(&omega(n, c(inner))?, &omega_branch_states(n, inner)?, &alg)?;
    let psi = squeezed_hcs_with_cutoff(n, alpha, w, cutoff)?;
    let prof = CutoffProfile::uniform(n, cutoff)?;
    let branches = [even_cat(c(inner))?.power(n), odd_cat(C64::new(0.0, inner))?.power(n)]
        .iter()
        .map(|b| squeeze_every_mode(b.to_fock(&prof)?, w))
        .collect::<LabResult<Vec<FockState>>>()?;
    let conj = alg.conjugated_by_squeeze(w);
    Ok(SqueezedNrf {
        alpha,
        w,
        n,
        cutoff,
        reference,
        conjugated: nrf(&psi, &branches, &conj)?,
        fixed: nrf(&psi, &branches, &alg)?,
    })
}
