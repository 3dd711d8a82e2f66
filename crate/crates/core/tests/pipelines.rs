use std::path::PathBuf;

use membrane_cavity::io::{read_lock, read_scan, write_csv};
use membrane_cavity::metrics::LossBudget;
use membrane_cavity::optics::CavityAssembly;
use membrane_cavity::purcell::{predict_lifetime_curve, purcell_factor, EmitterParams};
use membrane_cavity::scan::{
    detect_scan_resonances, finesse_from_scan, fundamental_peaks, length_deviation, noise_spectrum,
    suppression_band_edge, synthesize_lock_traces, synthesize_scan, LockState, LockSynth,
    ScanSynth,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scratch_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("mcav-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

proptest! {
    #[test]
    fn purcell_factor_is_unit_free(xi in 0.0..1.0f64, lam in 0.3..2.0f64, n in 1.0..3.0f64, q in 10.0..1e5f64, v in 1.0..1e3f64) {
        let um = purcell_factor(xi, lam, n, q, v).unwrap();
        let nm = purcell_factor(xi, lam * 1e3, n, q, v * 1e9).unwrap();
        prop_assert!((um - nm).abs() <= 1e-12 * um.abs().max(1e-300));
    }
}

#[test]
fn predicted_lifetime_grows_toward_tau0_with_length() {
    // Below r_c/2 the waist grows with length; past it the Gaussian mode
    // narrows again and F_p levels off.
    let template = CavityAssembly::reference(10_000.0).unwrap();
    let gaps: Vec<f64> = (0..12).map(|i| 8_000.0 + 1_200.0 * i as f64).collect();
    let curve = predict_lifetime_curve(
        &template,
        &gaps,
        &EmitterParams::cd_line(),
        &LossBudget::with_membrane(),
        1.36,
        0.51,
    )
    .unwrap();
    let mut pts: Vec<(f64, f64)> = curve
        .iter()
        .filter_map(|p| Some((p.point.as_ref()?.l_eff_um, p.result.as_ref()?.tau_c_ns)))
        .collect();
    assert!(pts.len() >= 10, "{curve:?}");
    assert!(pts.iter().all(|p| p.0 < 0.5 * template.r_c_um()));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in pts.windows(2) {
        assert!(w[1].1 >= w[0].1, "{pts:?}");
    }
    assert!(pts.iter().all(|p| p.1 < 1.36));
}

#[test]
fn scan_file_round_trip() {
    let dir = scratch_dir("scan");
    let trace = synthesize_scan(&ScanSynth::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let f = dir.join("scan.csv");
    write_csv(
        &f,
        &["x", "transmission"],
        trace
            .x
            .iter()
            .zip(&trace.transmission)
            .map(|(x, t)| vec![*x, *t]),
    )
    .unwrap();
    let back = read_scan(&f).unwrap();
    assert_eq!(back.transmission, trace.transmission);
    let peaks = fundamental_peaks(&detect_scan_resonances(&back, 0.05).unwrap(), 0.6);
    let fin = finesse_from_scan(&peaks).unwrap();
    assert!((fin / 2200.0 - 1.0).abs() < 0.05, "F = {fin}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn lock_files_give_band_edge_near_the_loop_corner() {
    let dir = scratch_dir("lock");
    let cfg = LockSynth::default();
    let pair = synthesize_lock_traces(&cfg, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let mut spectra = Vec::new();
    for (name, tr, state) in [
        ("locked", &pair.locked, LockState::Locked),
        ("unlocked", &pair.unlocked, LockState::Unlocked),
    ] {
        let f = dir.join(format!("{name}.csv"));
        write_csv(
            &f,
            &["t_s", "transmission"],
            tr.t_s
                .iter()
                .zip(&tr.transmission)
                .map(|(t, v)| vec![*t, *v]),
        )
        .unwrap();
        let back = read_lock(&f, state, tr.meta).unwrap();
        let d = length_deviation(&back).unwrap();
        spectra.push(noise_spectrum(&d.filled(), back.sample_rate_hz()).unwrap());
    }
    let edge = suppression_band_edge(&spectra[0], &spectra[1]).unwrap();
    assert!((edge / 800.0 - 1.0).abs() < 0.15, "edge {edge} Hz");
    let line = spectra[1].line_near(10.0, 30.0).unwrap();
    assert!((line.freq_hz - 20.0).abs() <= spectra[1].resolution_hz);
    std::fs::remove_dir_all(&dir).unwrap();
}
