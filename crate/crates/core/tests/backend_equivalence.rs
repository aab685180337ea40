//! Every analysis evaluated on coherent labels and on the truncated number
//! basis must agree.

use hcslab::catalog::{self, State, StateSpec};
use hcslab::dynamics;
use hcslab::metrology::{self, AlgebraSpec};
use hcslab::stats;
use hcslab::C64;

const FAMILIES: &[&str] = &[
    r#"{"family":"EvenCat","alpha":1.2}"#,
    r#"{"family":"ECS","n":2,"alpha":0.9,"sign":"-"}"#,
    r#"{"family":"HCS","n":2,"alpha":1.1,"theta":0.7}"#,
    r#"{"family":"HCS","n":3,"alpha":0.8,"sign":"+"}"#,
    r#"{"family":"Omega","n":2,"alpha":[0.7,0.4]}"#,
    r#"{"family":"Z4Basis","alpha":1.3,"j":3}"#,
    r#"{"family":"CHCS","m":2,"n":1,"alpha":0.9,"sign":"+"}"#,
];

fn both(spec: &str) -> (State, State) {
    let s = catalog::build(&StateSpec::from_json(spec).unwrap()).unwrap();
    let f = s.on_backend(catalog::Backend::Fock, None).unwrap();
    (s, f)
}

#[test]
fn moments_and_statistics_agree() {
    for spec in FAMILIES {
        let (a, f) = both(spec);
        for m in 0..a.num_modes() {
            for th in [0.0, 0.9, 2.2] {
                let va = stats::quadrature_variance(&a, m, th).unwrap();
                let vf = stats::quadrature_variance(&f, m, th).unwrap();
                assert!((va - vf).abs() < 1e-8, "{spec} mode {m}: {va} vs {vf}");
            }
            let qa = stats::mandel_q(&a, m).unwrap();
            let qf = stats::mandel_q(&f, m).unwrap();
            assert!((qa - qf).abs() < 1e-8, "{spec}: Q {qa} vs {qf}");
        }
        let (ea, oa) = stats::parity_weights(&a).unwrap();
        let (ef, of) = stats::parity_weights(&f).unwrap();
        assert!((ea - ef).abs() < 1e-9 && (oa - of).abs() < 1e-9, "{spec}");
    }
}

#[test]
fn phase_space_functions_agree() {
    for spec in FAMILIES {
        let (a, f) = both(spec);
        let n = a.num_modes();
        for k in 0..5 {
            let z: Vec<C64> = (0..n).map(|m| C64::from_polar(0.3 * k as f64, 1.1 * (k + m) as f64)).collect();
            let qa = stats::husimi_q(&a, &z).unwrap();
            let qf = stats::husimi_q(&f, &z).unwrap();
            assert!((qa - qf).abs() < 1e-10, "{spec}: Q");
            let modes: Vec<usize> = (0..n).collect();
            let wa = stats::wigner(&a, &modes, &z).unwrap();
            let wf = stats::wigner(&f, &modes, &z).unwrap();
            assert!((wa - wf).abs() < 1e-8, "{spec}: W {wa} vs {wf}");
            let ba = stats::bargmann(&a, &z, 1e-10).unwrap();
            let bf = stats::bargmann(&f, &z, 1e-10).unwrap();
            assert!((ba - bf).norm() < 1e-8, "{spec}: Bargmann");
        }
    }
}

#[test]
fn photon_distributions_agree() {
    for spec in FAMILIES {
        let (a, f) = both(spec);
        let bounds = vec![6; a.num_modes()];
        let pa = stats::photon_number_distribution(&a, &bounds).unwrap();
        let pf = stats::photon_number_distribution(&f, &bounds).unwrap();
        let gap = pa.probabilities.iter().zip(&pf.probabilities).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "{spec}: {gap}");
    }
}

#[test]
fn entanglement_agrees() {
    for spec in FAMILIES.iter().filter(|s| !s.contains("EvenCat") && !s.contains("Z4")) {
        let (a, f) = both(spec);
        let sa = dynamics::reduced_spectrum(&a, &[0]).unwrap();
        let sf = dynamics::reduced_spectrum(&f, &[0]).unwrap();
        assert!((sa.entropy() - sf.entropy()).abs() < 1e-8, "{spec}");
        assert!((sa.fluctuation().unwrap() - sf.fluctuation().unwrap()).abs() < 1e-6, "{spec}");
    }
}

#[test]
fn covariance_matrices_agree() {
    for spec in FAMILIES {
        let (a, f) = both(spec);
        for alg in [AlgebraSpec::h3(), AlgebraSpec::h4(), AlgebraSpec::sl2()] {
            let ca = metrology::covariance_matrix(&a, &alg).unwrap();
            let cf = metrology::covariance_matrix(&f, &alg).unwrap();
            assert!((ca - cf).amax() < 1e-8, "{spec} {}", alg.name);
        }
    }
}

#[test]
fn damping_backends_agree_on_a_small_state() {
    use dynamics::{DampingBackend, DampingRun};
    let (a, _) = both(r#"{"family":"HCS","n":2,"alpha":0.8,"sign":"-"}"#);
    let times = vec![0.0, 0.7, 2.0];
    let an = dynamics::amplitude_damping_evolve(&a, DampingRun::new(0.5, times.clone(), DampingBackend::Analytic).unwrap()).unwrap();
    let nu = dynamics::amplitude_damping_evolve(&a, DampingRun::new(0.5, times, DampingBackend::Numeric).unwrap()).unwrap();
    for (x, y) in an.trajectory.iter().zip(&nu.trajectory) {
        let dynamics::Damped::Fock(r) = y else { panic!("numeric is number-basis") };
        assert!(dynamics::max_entry_gap(x, y, r.cutoffs()).unwrap() < 1e-8);
    }
}
