//! Husimi Q, Wigner and Bargmann functions of cat and HCS states.

use std::f64::consts::PI;

use hcslab::catalog::{hcs_signed, odd_cat, Sign, State};
use hcslab::stats;
use hcslab::C64;

fn main() -> hcslab::LabResult<()> {
    let a = C64::new(1.5, 0.0);
    let cat = State::Coherent(odd_cat(a)?);
    println!("odd cat W(0) = {:.6} (-2/pi = {:.6})", stats::wigner(&cat, &[0], &[C64::new(0.0, 0.0)])?, -2.0 / PI);

    // at α = 1, Q of HCS₂⁺ vanishes at β₁ = i(2k+1)π/2, β₂ = imπ
    let h1 = State::Coherent(hcs_signed(2, C64::new(1.0, 0.0), Sign::Plus)?);
    for (k, m) in [(0, 0), (0, 1), (1, 1)] {
        let b = [C64::new(0.0, (2 * k + 1) as f64 * PI / 2.0), C64::new(0.0, m as f64 * PI)];
        println!("Q({:.3}i, {:.3}i) = {:.2e}", b[0].im, b[1].im, stats::husimi_q(&h1, &b)?);
    }
    let h = State::Coherent(hcs_signed(2, a, Sign::Plus)?);

    let z = C64::new(0.4, -0.3);
    let w = C64::new(-0.2, 0.5);
    let series = stats::bargmann(&h, &[z, w], 1e-12)?;
    let closed = stats::hcs2_bargmann(a, true, z, w);
    println!("Bargmann series {series:.8}, closed form {closed:.8}");
    Ok(())
}
