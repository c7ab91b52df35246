use std::f64::consts::PI;

use kapitza_core::floquet::{monodromy, HillParams, DEFAULT_STEPS_PER_PERIOD};
use kapitza_core::twa::*;
use kapitza_core::Reduced;

#[test]
fn free_field_energy_is_conserved() {
    let spec = LatticeSpec::new(50.0, 100).unwrap();
    let params = spec.params(0.4 * PI, Reduced { kg0: 0.0, kg1: 0.0, lambda: 0.1 }).unwrap();
    let mut field = sample_initial(&spec, params.k, InitialEnsemble::Gapless, 5);
    let e0 = field.energy(&spec, params.k, 0.0);
    let dt = spec.default_dt(&params);
    let steps = (100.0 * params.period() / dt).round() as usize;
    let mut worst = 0.0f64;
    evolve_leapfrog(&mut field, &params, &spec, dt, steps, |s, f| {
        if s % 64 == 0 {
            worst = worst.max((f.energy(&spec, params.k, 0.0) / e0 - 1.0).abs());
        }
        Step::Continue
    })
    .unwrap();
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn linear_modes_follow_monodromy_verdicts() {
    let spec = LatticeSpec::new(40.0, 80).unwrap();
    let params = spec.params(0.4 * PI, Reduced { kg0: 0.0, kg1: 0.02, lambda: 0.6 }).unwrap();
    let periods = 150.0;
    let dt = spec.default_dt(&params);
    let steps = (periods * params.period() / dt).round() as usize;
    let (mut grew, mut bounded) = (0, 0);
    for m in 1..=spec.n / 2 {
        let q = spec.wavenumber(m);
        let w = spec.dispersion(q);
        let hill = HillParams::new(w * w + params.k * params.g0, params.k * params.g1, params.gamma).unwrap();
        let mu = monodromy(&hill, DEFAULT_STEPS_PER_PERIOD).unwrap().growth_exponent;
        let amp = 1e-7;
        let mut field = kapitza_core::twa::LatticeField::zeros(spec.n);
        for (i, phi) in field.phi.iter_mut().enumerate() {
            *phi = amp * (q * i as f64 * spec.dx()).cos();
        }
        let mut peak = 0.0f64;
        evolve_leapfrog(&mut field, &params, &spec, dt, steps, |_, f| {
            peak = peak.max(f.phi.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            Step::Continue
        })
        .unwrap();
        let growth = peak / amp;
        if mu * periods > 6.0 {
            assert!(growth > 20.0, "mode {m}: mu={mu}, growth {growth}");
            grew += 1;
        } else if mu == 0.0 {
            assert!(growth < 20.0, "mode {m}: stable but grew {growth}");
            bounded += 1;
        }
    }
    assert!(grew > 0 && bounded > 0, "{grew} {bounded}");
}

#[test]
fn doubling_the_ensemble_is_statistically_consistent() {
    let spec = LatticeSpec::new(50.0, 100).unwrap();
    let params = spec.params(0.4 * PI, Reduced { kg0: 0.0, kg1: 0.1, lambda: 0.1 }).unwrap();
    let cfg = ObservableConfig::default();
    let a = run_ensemble(&spec, &params, InitialEnsemble::Gapless, 50, 20.0, &cfg, 100).unwrap();
    let b = run_ensemble(&spec, &params, InitialEnsemble::Gapless, 100, 20.0, &cfg, 100).unwrap();
    let se = a.d_sigma.hypot(b.d_sigma);
    assert!((a.sigma_final - b.sigma_final).abs() < 2.0 * se, "{} {} {se}", a.sigma_final, b.sigma_final);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = LatticeSpec::new(20.0, 40).unwrap();
    let params = spec.params(0.4 * PI, Reduced { kg0: 0.0, kg1: 0.3, lambda: 0.1 }).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            run_ensemble(&spec, &params, InitialEnsemble::Gapless, 8, 5.0, &ObservableConfig::default(), 42).unwrap()
        })
    };
    let (a, b) = (run(1), run(3));
    let bits = |s: &EnsembleStats| s.sigma_kin.iter().chain(&s.cos2phi).map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}
