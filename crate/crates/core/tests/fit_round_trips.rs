use membrane_cavity::fit::synth::{synthesize_decay, synthesize_doublet, DecaySynth, DoubletSynth};
use membrane_cavity::fit::{
    fit_cubic_temperature, fit_decay_emg, fit_decay_kohlrausch, fit_decay_mono,
    fit_double_lorentzian_equal_width, fit_lorentzian, lifetime_with_conservative_bounds,
    CurveModel, DecayTrace, Kohlrausch, Lorentzian, SpectrumTrace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lorentzian_recovers_generating_parameters(
        c in 735.5..738.5f64, w in 0.1..1.0f64, a in 10.0..1e3f64, o in 0.5..10.0f64
    ) {
        let x = grid(734.0, 740.0, 600);
        let p = [c, w, a, o];
        let y = x.iter().map(|&x| Lorentzian.value(x, &p)).collect();
        let r = fit_lorentzian(&SpectrumTrace::new(x, y).unwrap()).unwrap();
        prop_assert!(r.converged);
        for (got, want) in r.values().iter().zip(p) {
            prop_assert!(rel(*got, want) < 1e-6, "{:?} vs {:?}", r.values(), p);
        }
    }

    #[test]
    fn doublet_recovers_and_orders_centers(
        c1 in 736.2..736.8f64, sep in 0.5..1.2f64, w in 0.1..0.35f64,
        a1 in 0.3..1.5f64, a2 in 0.3..1.5f64, swap in any::<bool>()
    ) {
        let (lo, hi) = if swap { (c1 + sep, c1) } else { (c1, c1 + sep) };
        let cfg = DoubletSynth { center1_nm: lo, center2_nm: hi, fwhm_nm: w, amplitude1: a1, amplitude2: a2, noise: 0.0, ..Default::default() };
        let r = fit_double_lorentzian_equal_width(&synthesize_doublet(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()).unwrap();
        prop_assert!(r.value("center1") < r.value("center2"));
        prop_assert!((r.value("center1") - c1).abs() < 1e-6 && (r.value("center2") - (c1 + sep)).abs() < 1e-6);
        prop_assert!(rel(r.value("fwhm"), w) < 1e-6);
    }

    #[test]
    fn mono_and_emg_recover_tau(tau in 0.8..3.0f64, sigma in 0.03..0.2f64, bg in 0.0..20.0f64) {
        let ideal = DecaySynth { tau_ns: tau, background: bg, ..Default::default() };
        let t = synthesize_decay::<ChaCha8Rng>(&ideal, None).unwrap();
        let m = fit_decay_mono(&t).unwrap();
        prop_assert!(rel(m.value("tau"), tau) < 1e-6, "{} vs {}", m.value("tau"), tau);
        let broad = DecaySynth { sigma_irf_ns: sigma, ..ideal };
        let e = fit_decay_emg(&synthesize_decay::<ChaCha8Rng>(&broad, None).unwrap()).unwrap();
        prop_assert!(rel(e.value("tau"), tau) < 1e-6, "{} vs {}", e.value("tau"), tau);
        prop_assert!(rel(e.value("sigma_irf"), sigma) < 1e-6);
    }

    #[test]
    fn kohlrausch_recovers_stretch(tau in 0.8..3.0f64, beta in 0.5..1.2f64) {
        let t: Vec<f64> = (0..1000).map(|i| i as f64 * 0.02).collect();
        let model = Kohlrausch { t0: t[100] };
        let p = [tau, beta, 1e4, 0.0];
        let counts = t.iter().map(|&x| if x < t[100] { 0.0 } else { model.value(x, &p) }).collect();
        let r = fit_decay_kohlrausch(&DecayTrace::new(t, counts).unwrap()).unwrap();
        prop_assert!(rel(r.value("tau"), tau) < 1e-6 && rel(r.value("beta"), beta) < 1e-6, "{:?}", r.values());
    }

    #[test]
    fn spectral_shift_moves_centers_only(shift in -5.0..5.0f64) {
        let base = synthesize_doublet(&DoubletSynth::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let moved = SpectrumTrace::new(base.x.iter().map(|x| x + shift).collect(), base.y.clone()).unwrap();
        let a = fit_double_lorentzian_equal_width(&base).unwrap();
        let b = fit_double_lorentzian_equal_width(&moved).unwrap();
        prop_assert!((b.value("center1") - a.value("center1") - shift).abs() < 1e-6);
        prop_assert!((b.value("center2") - a.value("center2") - shift).abs() < 1e-6);
        prop_assert!((b.value("fwhm") - a.value("fwhm")).abs() < 1e-6);
    }
}

#[test]
fn cubic_law_exact_data() {
    let s: Vec<(f64, f64)> = (0..15)
        .map(|i| 10.0 + 20.0 * i as f64)
        .map(|t| (t, 736.86 + 2e-8 * t.powi(3)))
        .collect();
    let r = fit_cubic_temperature(&s, None).unwrap();
    assert!(rel(r.value("value_at_0"), 736.86) < 1e-9);
    assert!(rel(r.value("cubic_coeff"), 2e-8) < 1e-6);
}

#[test]
fn irf_broadened_decay_spread_and_emg_accuracy() {
    let cfg = DecaySynth {
        tau_ns: 1.36,
        sigma_irf_ns: 0.15,
        amplitude: 2e4,
        background: 2.0,
        ..Default::default()
    };
    let t = synthesize_decay(&cfg, Some(&mut ChaCha8Rng::seed_from_u64(8))).unwrap();
    let c = lifetime_with_conservative_bounds(&t);
    assert!(c.all_converged(), "{:?}", c.failures());
    let (lo, hi) = (c.tau_min.unwrap(), c.tau_max.unwrap());
    let spread = hi / lo - 1.0;
    assert!(spread > 0.005 && spread < 0.10, "spread {spread}");
    // Only the EMG models the instrument response, so it lands closest.
    let err = |r: &Result<membrane_cavity::fit::FitResult, String>| {
        (r.as_ref().unwrap().value("tau") - 1.36).abs()
    };
    assert!(err(&c.emg) < err(&c.mono) && err(&c.emg) < err(&c.kohlrausch));
    assert!(err(&c.emg) < 0.01);
}

#[test]
fn flat_trace_fails_every_model() {
    let t = DecayTrace::new((0..500).map(|i| i as f64 * 0.02).collect(), vec![40.0; 500]).unwrap();
    let c = lifetime_with_conservative_bounds(&t);
    assert_eq!(c.failures().len(), 3);
    assert!(c.tau_min.is_none() && c.tau_best.is_none());
}
