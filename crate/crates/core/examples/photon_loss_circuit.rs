//! Beam-splitter photon-subtraction circuit heralded by a detector click.

use hcslab::circuits::{self, Detector};

fn main() -> hcslab::LabResult<()> {
    for det in [Detector::Mode2, Detector::Mode4] {
        for eps in [0.1, 0.05, 0.01] {
            let r = circuits::coherent_photon_loss_protocol(1.0, eps, 0.0, det)?;
            println!("{det:?} eps={eps:<5} fidelity {:.5}  oracle {:.5}", r.fidelity, r.oracle_fidelity);
        }
    }
    Ok(())
}
