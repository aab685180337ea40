//! The two-qubit Bell state (|00⟩ + |11⟩)/√2 under local amplitude damping.

use hcslab::catalog::{self, State};
use hcslab::dynamics::{self, DampingBackend, DampingConvention, DampingRun};

fn main() -> hcslab::LabResult<()> {
    let psi = State::Fock(catalog::fock_bell());
    let times = vec![0.0, 0.25, 0.5, 1.0, 2.0, 5.0];
    let run = dynamics::amplitude_damping_evolve(&psi, DampingRun::new(1.0, times.clone(), DampingBackend::Analytic)?)?;
    for (t, rho) in times.iter().zip(&run.trajectory) {
        let eta = DampingConvention::PaperDisplay.transmissivity(1.0, *t);
        let s = rho.reduced_spectrum(&[0])?.entropy();
        println!("t = {t:<5} eta = {eta:.4}  S_E = {s:.6}  closed = {:.6}", dynamics::fock_bell_reduced_entropy(eta));
    }
    Ok(())
}
