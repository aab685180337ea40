//! Building states from JSON specs and moving them between backends.

use hcslab::catalog::{self, Backend, StateSpec};
use hcslab::stats;

fn main() -> hcslab::LabResult<()> {
    let specs = [
        r#"{"family":"EvenCat","alpha":1.2}"#,
        r#"{"family":"ECS","n":3,"alpha":0.9,"sign":"-"}"#,
        r#"{"family":"HCS","n":2,"alpha":1.1,"theta":0.7}"#,
        r#"{"family":"Omega","n":2,"alpha":[0.7,0.4]}"#,
        r#"{"family":"Z4Basis","alpha":1.3,"j":3}"#,
        r#"{"family":"CHCS","m":2,"n":1,"alpha":0.9,"sign":"+"}"#,
    ];
    for s in specs {
        let state = catalog::build(&StateSpec::from_json(s)?)?;
        let fock = state.on_backend(Backend::Fock, None)?;
        let (even, _) = stats::parity_weights(&state)?;
        println!(
            "{s}\n  modes {}  even weight {even:.6}  Mandel Q(0): {:.6} coherent / {:.6} fock",
            state.num_modes(),
            stats::mandel_q(&state, 0)?,
            stats::mandel_q(&fock, 0)?
        );
    }
    Ok(())
}
