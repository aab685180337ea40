//! Deterministic HCS₂⁺ preparation through two ancilla qubits, and the
//! direct beam-splitter route.

use hcslab::circuits;

fn main() -> hcslab::LabResult<()> {
    for a in [0.8, 1.5, 2.5] {
        let r = circuits::qubit_mediated_generation(a)?;
        println!(
            "alpha={a}: cutoff {} fidelity {:.10} intermediate {:.10} qubit purity {:.6}",
            r.cutoff, r.fidelity, r.intermediate_fidelity, r.qubit_purity
        );
    }
    let skipped = circuits::qubit_mediated_generation_with(1.5, circuits::field_cutoff(1.5), true)?;
    println!("without the second CNOT: fidelity {:.6}", skipped.fidelity);
    let d = circuits::direct_preparation_route(1.5)?;
    println!("direct route: Bell {:.8}, HCS+ {:.8}", d.bell_fidelity, d.hcs_plus_fidelity);
    Ok(())
}
