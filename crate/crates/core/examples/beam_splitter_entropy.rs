//! Entanglement generated by a beam splitter acting on HCS₂⁺(α).

use std::f64::consts::PI;

use hcslab::catalog::Backend;
use hcslab::dynamics;

fn main() -> hcslab::LabResult<()> {
    println!("{:>6} {:>8} {:>10} {:>10}", "alpha", "theta", "S_E", "dS_E");
    for a in [0.5, 1.0, 1.5, 2.0] {
        for th in [PI / 6.0, PI / 3.0, PI / 2.0] {
            let (s, ds) = dynamics::beam_splitter_entropy(a, th, Backend::Analytic)?;
            println!("{a:>6.2} {th:>8.4} {s:>10.6} {ds:>10.6}");
        }
    }
    let (sa, _) = dynamics::beam_splitter_entropy(1.0, PI / 2.0, Backend::Analytic)?;
    let (sf, _) = dynamics::beam_splitter_entropy(1.0, PI / 2.0, Backend::Fock)?;
    println!("analytic vs fock at (1, pi/2): {:.2e}", (sa - sf).abs());
    Ok(())
}
