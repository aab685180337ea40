//! Reduced entropy of HCS₂⁺ losing photons, exact and integrated.

use hcslab::catalog::{hcs_signed, Sign, State};
use hcslab::dynamics::{self, DampingBackend, DampingRun};
use hcslab::C64;

fn main() -> hcslab::LabResult<()> {
    let psi = State::Coherent(hcs_signed(2, C64::new(1.5, 0.0), Sign::Plus)?);
    let times: Vec<f64> = (0..=8).map(|k| k as f64).collect();
    let exact = dynamics::damping_entropy_trajectory(&psi, DampingRun::new(0.1, times.clone(), DampingBackend::Analytic)?, &[0])?;
    let numeric = dynamics::damping_entropy_trajectory(&psi, DampingRun::new(0.1, times, DampingBackend::Numeric)?, &[0])?;
    println!("{:>4} {:>10} {:>10} {:>10}", "t", "S_E", "numeric", "purity");
    for (e, n) in exact.iter().zip(&numeric) {
        println!("{:>4} {:>10.6} {:>10.6} {:>10.6}", e.t, e.entropy, n.entropy, e.purity);
    }
    Ok(())
}
