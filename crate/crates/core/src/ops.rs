//! Normal-ordered polynomials in a single bosonic mode.
//!
//! A [`ModeOp`] is a finite sum of monomials `c · a†^p a^q`. Products are
//! reduced back to normal order with
//! `a^q a†^r = Σ_k C(q,k) C(r,k) k! a†^(r-k) a^(q-k)`, so every operator the
//! metrology and statistics code needs can be evaluated exactly on coherent
//! dyads (`conj(α)^p β^q`) or turned into a truncated Fock matrix without
//! products-of-truncations error.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::C64;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModeOp {
    terms: BTreeMap<(u32, u32), C64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

impl ModeOp {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::monomial(0, 0, C64::new(1.0, 0.0))
    }

    /// `c · a†^p a^q`
    pub fn monomial(p: u32, q: u32, c: C64) -> Self {
        let mut op = Self::zero();
        op.push(p, q, c);
        op
    }

    pub fn annihilation() -> Self {
        Self::monomial(0, 1, C64::new(1.0, 0.0))
    }

    pub fn creation() -> Self {
        Self::monomial(1, 0, C64::new(1.0, 0.0))
    }

    pub fn number() -> Self {
        Self::monomial(1, 1, C64::new(1.0, 0.0))
    }

    /// `x^(θ) = (a e^{-iθ} + a† e^{iθ}) / √2`
    pub fn quadrature(theta: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut op = Self::monomial(0, 1, C64::from_polar(s, -theta));
        op.push(1, 0, C64::from_polar(s, theta));
        op
    }

    fn push(&mut self, p: u32, q: u32, c: C64) {
        let e = self.terms.entry((p, q)).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if e.norm() == 0.0 {
            self.terms.remove(&(p, q));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, C64)> + '_ {
        self.terms.iter().map(|(&(p, q), &c)| (p, q, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &ModeOp) -> ModeOp {
        let mut out = self.clone();
        for (p, q, c) in other.terms() {
            out.push(p, q, c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> ModeOp {
        let mut out = ModeOp::zero();
        for (p, q, c) in self.terms() {
            out.push(p, q, c * s);
        }
        out
    }

    pub fn sub(&self, other: &ModeOp) -> ModeOp {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Operator product `self · other`, returned in normal order.
    pub fn mul(&self, other: &ModeOp) -> ModeOp {
        let mut out = ModeOp::zero();
        for (p1, q1, c1) in self.terms() {
            for (p2, q2, c2) in other.terms() {
                // a†^p1 a^q1 a†^p2 a^q2
                for k in 0..=q1.min(p2) {
                    let w = binomial(q1, k) * binomial(p2, k) * factorial(k);
                    out.push(p1 + p2 - k, q1 + q2 - k, c1 * c2 * w);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> ModeOp {
        let mut out = ModeOp::zero();
        for (p, q, c) in self.terms() {
            out.push(q, p, c.conj());
        }
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.sub(&self.adjoint());
        let ok = d.terms().all(|(_, _, c)| c.norm() <= tol);
        ok
    }

    /// Dyad evaluation `⟨bra| op |ket⟩ / ⟨bra|ket⟩` for coherent labels.
    pub fn eval(&self, bra: C64, ket: C64) -> C64 {
        let cb = bra.conj();
        self.terms()
            .map(|(p, q, c)| c * cb.powu(p) * ket.powu(q))
            .sum()
    }

    /// Truncated matrix in the number basis `0..cutoff`. Normal-ordered entries
    /// are exact: `⟨m| a†^p a^q |n⟩ = sqrt(n!/(n-q)!) sqrt(m!/(m-p)!)` for `m - p = n - q`.
    pub fn matrix(&self, cutoff: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(cutoff, cutoff);
        for (p, q, c) in self.terms() {
            let (p, q) = (p as usize, q as usize);
            for n in q..cutoff {
                let k = n - q;
                let row = k + p;
                if row >= cutoff {
                    break;
                }
                let down: f64 = ((k + 1)..=n).map(|j| j as f64).product::<f64>().sqrt();
                let up: f64 = ((k + 1)..=row).map(|j| j as f64).product::<f64>().sqrt();
                m[(row, n)] += c * (down * up);
            }
        }
        m
    }
}

/// Normalized expectation values of products of single-mode operators,
/// shared by the coherent and number-basis backends.
pub trait Moments {
    fn mode_count(&self) -> usize;

    /// `⟨ψ| Π_k op_k |ψ⟩ / ⟨ψ|ψ⟩` for operators on distinct modes.
    fn moment_of(&self, ops: &[(usize, &ModeOp)]) -> crate::LabResult<C64>;

    fn mean_of(&self, mode: usize, op: &ModeOp) -> crate::LabResult<C64> {
        self.moment_of(&[(mode, op)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn commutator_is_identity() {
        let a = ModeOp::annihilation();
        let ad = ModeOp::creation();
        let comm = a.mul(&ad).sub(&ad.mul(&a));
        assert_eq!(comm, ModeOp::identity());
    }

    #[test]
    fn a_squared_adag_squared() {
        // a² a†² = a†² a² + 4 a† a + 2
        let a2 = ModeOp::monomial(0, 2, c(1.0));
        let ad2 = ModeOp::monomial(2, 0, c(1.0));
        let prod = a2.mul(&ad2);
        let expect = ModeOp::monomial(2, 2, c(1.0))
            .add(&ModeOp::monomial(1, 1, c(4.0)))
            .add(&ModeOp::monomial(0, 0, c(2.0)));
        assert_eq!(prod, expect);
    }

    #[test]
    fn matrix_matches_product_of_ladders_below_top() {
        let cutoff = 12;
        let a = ModeOp::annihilation().matrix(cutoff);
        let ad = ModeOp::creation().matrix(cutoff);
        let n2 = ModeOp::number().mul(&ModeOp::number()).matrix(cutoff);
        let direct = &ad * &a * &ad * &a;
        for i in 0..cutoff {
            for j in 0..cutoff {
                assert!((n2[(i, j)] - direct[(i, j)]).norm() < 1e-10);
            }
        }
        let sq = ModeOp::monomial(0, 2, c(1.0)).matrix(cutoff);
        let direct = &a * &a;
        assert!((sq - direct).map(|z| z.norm()).max() < 1e-12);
    }

    #[test]
    fn quadrature_hermitian_and_coherent_mean() {
        let x = ModeOp::quadrature(0.3);
        assert!(x.is_hermitian(1e-15));
        let alpha = C64::new(0.7, -0.2);
        let mean = x.eval(alpha, alpha);
        let expect = 2f64.sqrt() * (alpha * C64::from_polar(1.0, -0.3)).re;
        assert!((mean.re - expect).abs() < 1e-14 && mean.im.abs() < 1e-14);
    }
}
