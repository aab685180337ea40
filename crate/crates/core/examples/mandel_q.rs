//! Sub-Poissonian statistics of one mode of HCS₂⁺ across α.

use hcslab::catalog::{hcs_signed, Sign, State};
use hcslab::stats;
use hcslab::C64;

fn main() -> hcslab::LabResult<()> {
    println!("{:>6} {:>10} {:>10} {:>10}", "alpha", "Q", "closed", "min var");
    for k in 1..=15 {
        let a = 0.2 * k as f64;
        let cs = hcs_signed(2, C64::new(a, 0.0), Sign::Plus)?;
        let (v, _) = stats::min_quadrature_variance(&cs, 0, 64)?;
        let q = stats::mandel_q(&State::Coherent(cs), 0)?;
        println!("{a:>6.2} {q:>10.5} {:>10.5} {v:>10.5}", stats::hcs_mandel_q(a));
    }
    Ok(())
}
