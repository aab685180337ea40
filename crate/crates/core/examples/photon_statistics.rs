//! Photon-number distribution and parity weights of a two-mode HCS.

use hcslab::catalog::{hcs_signed, Sign, State};
use hcslab::stats;
use hcslab::C64;

fn main() -> hcslab::LabResult<()> {
    let psi = State::Coherent(hcs_signed(2, C64::new(3.0, 0.0), Sign::Plus)?);
    let d = stats::photon_number_distribution(&psi, &[30, 30])?;
    println!("mass on [0,30]^2: {:.9}", d.total());
    println!("P(n1, n2) for n1, n2 < 6:");
    for n1 in 0..6 {
        let row: Vec<String> = (0..6).map(|n2| format!("{:.2e}", d.get(&[n1, n2]).unwrap())).collect();
        println!("  {}", row.join("  "));
    }
    let (even, odd) = stats::parity_weights(&psi)?;
    println!("total parity weights: even {even:.6}, odd {odd:.6}");
    Ok(())
}
