//! Acceptance criteria, one test each. Every test writes a single
//! `PASS`/`FAIL` line straight to stderr (visible without `--nocapture`) and
//! then asserts the criterion.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use hcslab::catalog::{self, ecs, ecs_hcs_overlap, ecs_plus_hcs_minus_swapped, hcs, hcs_signed, omega, State, Sign};
use hcslab::circuits::{self, Detector};
use hcslab::coherent::CoherentSuperposition;
use hcslab::dynamics::{self, DampingBackend, DampingConvention, DampingRun, Damped};
use hcslab::fock::CutoffProfile;
use hcslab::metrology::{self, AlgebraSpec};
use hcslab::stats::{self, GridAxis};
use hcslab::C64;
use rand::SeedableRng;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("{} [{id:>2}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e <= limit, format!("{:.2}s/{}s", e.as_secs_f64(), limit.as_secs()))
}

#[test]
fn c01_inner_product_closed_forms() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut zeros_ok = true;
    let mut printed_gap: f64 = 0.0;
    for n in 1..=4 {
        for a in [0.5, 1.0, 2.0] {
            let h = [Sign::Plus, Sign::Minus].map(|s| hcs_signed(n, c(a), s).unwrap());
            let e = [Sign::Plus, Sign::Minus].map(|s| ecs(n, c(a), s).unwrap());
            let prof = h[0].default_cutoffs().unwrap();
            let hf = h.each_ref().map(|x| x.to_fock(&prof).unwrap());
            let ef = e.each_ref().map(|x| x.to_fock(&prof).unwrap());
            for (ei, es) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
                for (hi, hs) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
                    let brute = ef[ei].inner(&hf[hi]).unwrap();
                    let closed = ecs_hcs_overlap(n, a, es, hs);
                    worst = worst.max((brute - c(closed)).norm());
                    if es == Sign::Minus && n % 2 == 0 {
                        zeros_ok &= brute.norm() < 1e-8 && closed == 0.0;
                    }
                    if es == Sign::Plus && hs == Sign::Minus {
                        printed_gap = printed_gap.max((brute.re - ecs_plus_hcs_minus_swapped(n, a)).abs());
                    }
                }
            }
        }
    }
    let (fast, time) = within(t0, Duration::from_secs(10));
    let pass = worst < 1e-8 && zeros_ok && fast;
    report(
        1,
        "ECS/HCS inner products",
        pass,
        &format!("max |closed − brute| = {worst:.1e}, even-N zeros {zeros_ok}, printed ⟨ECS⁺|HCS⁻⟩ off by up to {printed_gap:.2}, {time}"),
    );
    assert!(pass);
}

#[test]
fn c02_photon_number_checkerboard() {
    let t0 = Instant::now();
    let psi = State::Coherent(hcs_signed(2, c(3.0), Sign::Plus).unwrap());
    let d = stats::photon_number_distribution(&psi, &[20, 20]).unwrap();
    let mut mixed_max: f64 = 0.0;
    let mut bulk_min = f64::INFINITY;
    for (l, p) in d.rows() {
        if (l[0] + l[1]) % 2 == 1 {
            mixed_max = mixed_max.max(p.abs());
        } else if l[0] <= 14 && l[1] <= 14 {
            bulk_min = bulk_min.min(p);
        }
    }
    let total = d.total();
    let (fast, time) = within(t0, Duration::from_secs(5));
    let pass = mixed_max < 1e-14 && bulk_min > 1e-14 && (total - 1.0).abs() < 1e-6 && fast;
    report(
        2,
        "photon-number distribution",
        pass,
        &format!("mixed-parity max {mixed_max:.1e}, bulk min {bulk_min:.2e}, mass on [0,20]² = {total:.6} (need 1 ± 1e-6), {time}"),
    );
    assert!(pass);
}

#[test]
fn c03_mandel_q_dip() {
    let t0 = Instant::now();
    let alphas: Vec<f64> = (0..=56).map(|k| 0.2 + 0.05 * k as f64).collect();
    let q: Vec<f64> = alphas
        .iter()
        .map(|&a| stats::mandel_q(&State::Coherent(hcs(2, c(a), 0.0).unwrap()), 0).unwrap())
        .collect();
    let negative = q.iter().all(|&v| v < 0.0);
    let k = (0..q.len()).min_by(|&i, &j| q[i].total_cmp(&q[j])).unwrap();
    let argmin = alphas[k];
    let (fast, time) = within(t0, Duration::from_secs(30));
    let pass = negative && (1.2..=1.8).contains(&argmin) && fast;
    report(
        3,
        "Mandel Q",
        pass,
        &format!("all negative {negative}, argmin α = {argmin:.2} (Q = {:.4}, need α ∈ [1.2, 1.8]), {time}", q[k]),
    );
    assert!(pass);
}

#[test]
fn c04_no_quadrature_squeezing() {
    let mut pass = true;
    let mut detail = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        let psi = hcs(2, c(a), 0.0).unwrap();
        let (min, th) = stats::min_quadrature_variance(&psi, 0, 64).unwrap();
        let closed = stats::hcs_quadrature_variance(c(a), th);
        let gap = (min - closed).abs();
        pass &= min > 0.5 && gap < 1e-8;
        detail.push(format!("α={a}: min {min:.6} (gap {gap:.1e})"));
    }
    report(4, "no quadrature squeezing", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn c05_q_function_zero_locus() {
    let psi = State::Coherent(hcs_signed(2, c(1.0), Sign::Plus).unwrap());
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        for m in 0..2 {
            // Re(β̄α) = 0 with Im parts (2k+1)π/2 and mπ
            let b1 = C64::new(0.0, (2 * k + 1) as f64 * PI / 2.0);
            let b2 = C64::new(0.0, m as f64 * PI);
            let q = stats::husimi_q(&psi, &[b1, b2]).unwrap();
            worst = worst.max(q.abs());
            worst = worst.max(stats::hcs2_plus_q(c(1.0), b1, b2).abs());
        }
    }
    let pass = worst < 1e-12;
    report(5, "Q-function zeros", pass, &format!("max |Q| = {worst:.1e} over k, m ∈ {{0,1}}"));
    assert!(pass);
}

#[test]
fn c06_bargmann_closed_form() {
    let mut worst = [0.0f64; 2];
    let mut printed_minus: f64 = 0.0;
    let grid: Vec<C64> = (0..20)
        .map(|k| C64::from_polar(2.0 * (k + 1) as f64 / 20.0, 2.0 * PI * 0.618_034 * k as f64))
        .collect();
    for a in [1.0, 2.0] {
        for (s, plus) in [(Sign::Plus, true), (Sign::Minus, false)] {
            let h = hcs_signed(2, c(a), s).unwrap();
            let f = State::Fock(h.to_fock(&h.default_cutoffs().unwrap()).unwrap());
            for &z in &grid {
                for &w in &grid {
                    let w = w * C64::from_polar(1.0, 0.3);
                    let series = stats::bargmann(&f, &[z, w], 1e-8).unwrap();
                    let closed = if plus {
                        stats::hcs2_bargmann_printed(c(a), true, z, w)
                    } else {
                        stats::hcs2_bargmann(c(a), false, z, w)
                    };
                    let k = usize::from(!plus);
                    worst[k] = worst[k].max((series - closed).norm());
                    if !plus {
                        printed_minus = printed_minus.max((series - stats::hcs2_bargmann_printed(c(a), false, z, w)).norm());
                    }
                }
            }
        }
    }
    let pass = worst[0] < 1e-8 && worst[1] < 1e-8;
    report(
        6,
        "Bargmann closed form",
        pass,
        &format!(
            "HCS⁺ vs printed {:.1e}, HCS⁻ vs corrected {:.1e} (printed HCS⁻ off by {printed_minus:.2})",
            worst[0], worst[1]
        ),
    );
    assert!(pass);
}

#[test]
fn c07_metrology_scaling() {
    let t0 = Instant::now();
    let a2: Vec<f64> = (0..=10).map(|k| 1.0 + 0.5 * k as f64).collect();
    let exponent = |f: &dyn Fn(f64) -> f64| {
        let ys: Vec<f64> = a2.iter().map(|&x| f(x.sqrt())).collect();
        metrology::fit_loglog_exponent(&a2, &ys).unwrap()
    };
    let ecs_nrf = |alg: AlgebraSpec| {
        move |a: f64| {
            let psi = ecs(2, c(a), Sign::Plus).unwrap();
            let br = [
                CoherentSuperposition::coherent(vec![c(a); 2]).unwrap(),
                CoherentSuperposition::coherent(vec![c(-a); 2]).unwrap(),
            ];
            metrology::nrf(&psi, &br, &alg).unwrap()
        }
    };
    let e_h3 = exponent(&ecs_nrf(AlgebraSpec::h3()));
    let e_h4 = exponent(&ecs_nrf(AlgebraSpec::h4()));
    let e_sl2 = exponent(&|a: f64| {
        let psi = omega(2, c(a)).unwrap();
        metrology::nrf(&psi, &metrology::omega_branch_states(2, a).unwrap(), &AlgebraSpec::sl2()).unwrap()
    });
    let mut var_gap: f64 = 0.0;
    for a in [0.7, 1.3] {
        let psi = omega(2, c(a)).unwrap();
        let f = psi.to_fock(&psi.default_cutoffs().unwrap()).unwrap();
        for z in [c(1.0), C64::new(0.3, -0.8)] {
            let brute = metrology::one_local_variance(&f, &AlgebraSpec::sl2(), &metrology::two_photon_coefficients(2, z)).unwrap();
            var_gap = var_gap.max((brute - metrology::omega_two_photon_variance(2, c(a), z)).abs());
        }
    }
    let (fast, time) = within(t0, Duration::from_secs(60));
    let pass = (0.8..=1.2).contains(&e_h3) && (0.8..=1.2).contains(&e_sl2) && (-0.2..=0.3).contains(&e_h4) && var_gap < 1e-6 && fast;
    report(
        7,
        "metrology scaling",
        pass,
        &format!("ECS/h3 {e_h3:.3}, Ω/sl2 {e_sl2:.3}, ECS/h4 {e_h4:.3}, Ω variance gap {var_gap:.1e}, {time}"),
    );
    assert!(pass);
}

#[test]
fn c08_ghz_qfi() {
    let (psi, h) = metrology::ghz_with_sigma_z(3).unwrap();
    let q = metrology::qfi_pure(&psi, &h).unwrap();
    let pass = (q - 36.0).abs() < 1e-12;
    report(8, "GHZ₃ QFI", pass, &format!("QFI = {q} (4N² = 36)"));
    assert!(pass);
}

#[test]
fn c09_beam_splitter_surface() {
    let t0 = Instant::now();
    let alphas = GridAxis::new(0.2, 3.0, 29).unwrap();
    let thetas = GridAxis::new(0.1, PI - 0.1, 30).unwrap();
    let grid = dynamics::beam_splitter_surface(alphas, thetas, catalog::Backend::Analytic).unwrap();
    let mut min_high = f64::INFINITY;
    let mut gap2: f64 = 0.0;
    for i in 0..grid.num_points() {
        let p = grid.point(i);
        let s = grid.value(i)[0];
        if p[0] >= 1.5 - 1e-9 {
            min_high = min_high.min(s);
        }
        if (p[0] - 2.0).abs() < 1e-9 {
            gap2 = gap2.max((s - 1.0).abs());
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let cells = rand::seq::index::sample(&mut rng, grid.num_points(), 10).into_vec();
    let mut dual: f64 = 0.0;
    for &i in &cells {
        let p = grid.point(i);
        let (s, ds) = dynamics::beam_splitter_entropy(p[0], p[1], catalog::Backend::Fock).unwrap();
        dual = dual.max((s - grid.value(i)[0]).abs()).max((ds - grid.value(i)[1]).abs());
    }
    let (fast, time) = within(t0, Duration::from_secs(120));
    let pass = min_high > 0.98 && gap2 < 1e-4 && dual < 1e-5 && fast;
    report(
        9,
        "beam-splitter entropy",
        pass,
        &format!("min S_E(α ≥ 1.5) = {min_high:.5}, |S_E(2,·) − 1| ≤ {gap2:.1e}, dual-backend gap {dual:.1e} on 10 cells, {time}"),
    );
    assert!(pass);
}

#[test]
fn c10_damping_surface() {
    let t0 = Instant::now();
    let gamma = 0.1;
    let alphas = GridAxis::new(1.0, 2.5, 16).unwrap();
    let times = GridAxis::new(0.0, 9.0, 19).unwrap();
    let family = |a: f64| Ok(State::Coherent(hcs(2, c(a), 0.0)?));
    let grid = dynamics::damping_entropy_surface(
        family,
        alphas.clone(),
        times.clone(),
        gamma,
        DampingBackend::Analytic,
        DampingConvention::PaperDisplay,
    )
    .unwrap();
    let mut s_2_9 = f64::NAN;
    let mut t0_gap: f64 = 0.0;
    for i in 0..grid.num_points() {
        let p = grid.point(i);
        if (p[0] - 2.0).abs() < 1e-9 && (p[1] - 9.0).abs() < 1e-9 {
            s_2_9 = grid.value(i)[0];
        }
        if p[1] == 0.0 {
            t0_gap = t0_gap.max((grid.value(i)[0] - 1.0).abs());
        }
    }
    let control = State::Coherent(ecs(2, c(1.0), Sign::Minus).unwrap());
    let run = DampingRun::new(gamma, vec![5.0 / gamma], DampingBackend::Analytic).unwrap();
    let s_ecs = dynamics::damping_entropy_trajectory(&control, run, &[0]).unwrap()[0].entropy;

    // six seeded (α, t) cells, one numeric run per distinct α
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
    let mut cells = rand::seq::index::sample(&mut rng, grid.num_points(), 6).into_vec();
    cells.sort_unstable();
    let mut entry_gap: f64 = 0.0;
    let mut k = 0;
    while k < cells.len() {
        let a = grid.point(cells[k])[0];
        let mut ts = Vec::new();
        while k < cells.len() && grid.point(cells[k])[0] == a {
            ts.push(grid.point(cells[k])[1]);
            k += 1;
        }
        let psi = State::Coherent(hcs(2, c(a), 0.0).unwrap());
        let num = dynamics::amplitude_damping_evolve(&psi, DampingRun::new(gamma, ts.clone(), DampingBackend::Numeric).unwrap()).unwrap();
        let ana = dynamics::amplitude_damping_evolve(&psi, DampingRun::new(gamma, ts, DampingBackend::Analytic).unwrap()).unwrap();
        for (n, a) in num.trajectory.iter().zip(&ana.trajectory) {
            let Damped::Fock(r) = n else { panic!("numeric runs are number-basis") };
            entry_gap = entry_gap.max(dynamics::max_entry_gap(n, a, r.cutoffs()).unwrap());
        }
    }
    let (fast, time) = within(t0, Duration::from_secs(180));
    let pass = s_2_9 > 0.9 && t0_gap < 1e-6 && s_ecs < 0.05 && entry_gap < 1e-6 && fast;
    report(
        10,
        "damping surface",
        pass,
        &format!(
            "S_E(2, 9) = {s_2_9:.4}, |S_E(t=0) − 1| ≤ {t0_gap:.1e}, ECS₂⁻(1) at Γt=5: {s_ecs:.5}, analytic/numeric entry gap {entry_gap:.1e} at 6 cells, {time}"
        ),
    );
    assert!(pass);
}

#[test]
fn c11_fock_bell_damping() {
    let gamma = 1.0;
    let psi = State::Fock(catalog::fock_bell());
    let times = vec![0.5, 1.0, 2.0, 20.0];
    let ana = dynamics::amplitude_damping_evolve(&psi, DampingRun::new(gamma, times.clone(), DampingBackend::Analytic).unwrap()).unwrap();
    let num = dynamics::amplitude_damping_evolve(&psi, DampingRun::new(gamma, times.clone(), DampingBackend::Numeric).unwrap()).unwrap();
    let prof = CutoffProfile::uniform(2, 2).unwrap();
    let mut display_gap: f64 = 0.0;
    let mut backend_gap: f64 = 0.0;
    for (k, &t) in times.iter().enumerate().take(3) {
        let eta = DampingConvention::PaperDisplay.transmissivity(gamma, t);
        let shown = dynamics::fock_bell_display(eta);
        for r in [&ana.trajectory[k], &num.trajectory[k]] {
            let m = r.to_fock(&prof).unwrap();
            display_gap = display_gap.max((m.matrix() - &shown).map(|z| z.norm()).max());
        }
        backend_gap = backend_gap.max(dynamics::max_entry_gap(&ana.trajectory[k], &num.trajectory[k], &prof).unwrap());
    }
    let s_ana = ana.trajectory[3].reduced_spectrum(&[0]).unwrap().entropy();
    let s_num = num.trajectory[3].reduced_spectrum(&[0]).unwrap().entropy();
    let limit = dynamics::fock_bell_reduced_entropy(0.0);
    let consistent = (s_ana - s_num).abs() < 1e-8 && (s_ana - dynamics::fock_bell_reduced_entropy((-40.0f64).exp())).abs() < 1e-8;
    let pass = display_gap < 1e-8 && backend_gap < 1e-8 && consistent;
    report(
        11,
        "Fock-Bell damping",
        pass,
        &format!(
            "display gap {display_gap:.1e}, backend gap {backend_gap:.1e} at Γt ∈ {{0.5,1,2}}; t→∞ reduced entropy computed {limit:.3} (Γt=20: {s_ana:.1e}) vs claimed 1"
        ),
    );
    assert!(pass);
}

#[test]
fn c12_circuit_exactness() {
    let t0 = Instant::now();
    let mut mediated: f64 = 0.0;
    for a in [0.8, 1.5, 2.5] {
        mediated = mediated.max((circuits::qubit_mediated_generation(a).unwrap().fidelity - 1.0).abs());
    }
    let f: Vec<f64> = [0.1, 0.05, 0.01]
        .iter()
        .map(|&e| circuits::coherent_photon_loss_protocol(1.0, e, 0.0, Detector::Mode2).unwrap().fidelity)
        .collect();
    let monotone = f[0] < f[1] && f[1] < f[2];
    let (fast, time) = within(t0, Duration::from_secs(60));
    let pass = mediated < 1e-8 && f[2] > 0.999 && monotone && fast;
    report(
        12,
        "circuit exactness",
        pass,
        &format!(
            "qubit-mediated max |F − 1| = {mediated:.1e}; photon-loss F(ε=0.01) = {:.5} (need > 0.999), monotone {monotone} ({:.5}, {:.5}, {:.5}), {time}",
            f[2], f[0], f[1], f[2]
        ),
    );
    assert!(pass);
}

#[test]
fn c13_property_invariants() {
    use rand::Rng;
    let t0 = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
    let mut gaps = [0.0f64; 5];
    for _ in 0..12 {
        let a = rng.random_range(0.3..1.6);
        let n = rng.random_range(1..=3usize);
        let sign = if rng.random::<bool>() { Sign::Plus } else { Sign::Minus };
        let psi = hcs_signed(n, c(a), sign).unwrap();
        let prof = psi.default_cutoffs().unwrap();
        let f = psi.to_fock(&prof).unwrap();
        // backend equivalence on a quadrature variance
        let th = rng.random_range(0.0..PI);
        let va = stats::quadrature_variance(&psi, 0, th).unwrap();
        let vf = stats::quadrature_variance(&f, 0, th).unwrap();
        gaps[0] = gaps[0].max((va - vf).abs());
        // unitarity: a random beam splitter and its inverse
        if n >= 2 {
            let bs = dynamics::BeamSplitterSpec::symmetric(0, 1, rng.random_range(0.0..PI));
            let out = bs.apply_fock(&f).unwrap();
            let back = bs.inverse().apply_fock(&out).unwrap();
            gaps[1] = gaps[1].max((out.norm() - 1.0).abs()).max((back.fidelity(&f).unwrap() - 1.0).abs());
        }
        // trace and positivity after damping, on two modes to keep ρ small
        let eta = rng.random_range(0.05..1.0);
        let two = hcs_signed(2, c(a), sign).unwrap();
        let rho = dynamics::damp_fock(&two.to_fock(&two.default_cutoffs().unwrap()).unwrap().to_density(), eta).unwrap();
        let min_eig = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        gaps[2] = gaps[2].max((rho.trace() - 1.0).abs()).max((-min_eig).max(0.0));
        // parity: both branches of HCS_N^± are even for even N, opposite for odd N
        let (even, odd) = stats::parity_weights(&State::Coherent(psi.clone())).unwrap();
        let (we, wo) = if n % 2 == 0 { (1.0, 0.0) } else { (0.5, 0.5) };
        gaps[3] = gaps[3].max((even - we).abs()).max((odd - wo).abs());
        // parity-group expansion against the direct constructor
        let g = catalog::build_group_expansion(n, a, sign).unwrap();
        gaps[4] = gaps[4].max((g.fidelity(&psi).unwrap() - 1.0).abs());
    }
    let limits = [1e-8, 1e-10, 1e-9, 1e-10, 1e-10];
    let pass = gaps.iter().zip(limits).all(|(g, l)| *g < l) && t0.elapsed() < Duration::from_secs(600);
    report(
        13,
        "property invariants",
        pass,
        &format!(
            "backend {:.1e}, unitarity {:.1e}, trace/positivity {:.1e}, parity {:.1e}, group expansion {:.1e}",
            gaps[0], gaps[1], gaps[2], gaps[3], gaps[4]
        ),
    );
    assert!(pass);
}
