//! Maximal 1-local variance and NRF of ECS⁺ against the mean photon number.

use hcslab::catalog::{ecs, Sign};
use hcslab::coherent::CoherentSuperposition;
use hcslab::metrology::{self, AlgebraSpec};
use hcslab::C64;

fn main() -> hcslab::LabResult<()> {
    let alg = AlgebraSpec::h3();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    println!("{:>6} {:>10} {:>10} {:>8}", "a^2", "max var", "QFI", "NRF");
    for k in 2..=12 {
        let a = (0.5 * k as f64).sqrt();
        let z = C64::new(a, 0.0);
        let branches = [CoherentSuperposition::coherent(vec![z; 2])?, CoherentSuperposition::coherent(vec![-z; 2])?];
        let r = metrology::metrology_report(&ecs(2, z, Sign::Plus)?, &branches, &alg)?;
        let nrf = r.nrf.unwrap();
        println!("{:>6.2} {:>10.4} {:>10.4} {:>8.4}", a * a, r.max_variance, r.qfi, nrf);
        xs.push(a * a);
        ys.push(nrf);
    }
    println!("log-log exponent of NRF vs a^2: {:.3}", metrology::fit_loglog_exponent(&xs, &ys)?);
    let (ghz, h) = metrology::ghz_with_sigma_z(3)?;
    println!("GHZ_3 QFI: {:.6}", metrology::qfi_pure(&ghz, &h)?);
    Ok(())
}
