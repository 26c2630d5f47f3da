//! Cross-module checks: circuit → coupling → gate, chain → optics, traces
//! through CSV and back into the fitters.

mod common;

use std::f64::consts::TAU;

use common::{paper_drive, paper_system, F_MECH};
use qmem_core::analysis::{fit_ringdown, q_tau_consistency};
use qmem_core::duffing::{backbone, fit_backbone, sweep, DuffingParams, SweepDirection};
use qmem_core::electromech::{admittance_trace, fit_bvd, reference, BvdParams};
use qmem_core::io::{self, TraceKind};
use qmem_core::phonon_chain::{calibrated, find_defect_mode, mode_profile};
use qmem_core::photoelastic::{
    detected_power, instantaneous_power, mode_profile_scan, phase_modulation, OpticalConfig, PhotoelasticTensor,
    StandingWaveMode,
};
use qmem_core::qdyn::{
    effective_coupling_chain, hybridized_decay, iswap, nominal_iswap_time, transfer_time, DensityMatrix, IswapOptions,
};
use qmem_core::TimeTrace;
use rustfft::FftPlanner;

#[test]
fn circuit_parameters_feed_the_gate() {
    let sys = paper_system(0.0, 1e7, 0.0);
    let chain = effective_coupling_chain(&sys, &paper_drive(&sys, 10.0)).unwrap();
    let g = chain.hamiltonian.g_eff;
    assert!((18e3..=24e3).contains(&g), "g_eff = {g}");
    let t = nominal_iswap_time(g);
    assert!((20e-6..=28e-6).contains(&t), "T = {t}");

    let opts = IswapOptions::default();
    let rho0 = DensityMatrix::basis(opts.dims, 1, 0, 0).unwrap();
    let out = iswap(&sys, &paper_drive(&sys, 10.0), &rho0, opts).unwrap();
    assert!(out.populations[1] > 0.999);
    assert!((out.duration - transfer_time(g)).abs() < 1e-15);
}

#[test]
fn dissipative_write_matches_loss_estimate() {
    let gamma_q = 5e3;
    let sys = paper_system(gamma_q, 1e7, 0.0);
    let opts = IswapOptions {
        dissipation: true,
        ..IswapOptions::default()
    };
    let rho0 = DensityMatrix::basis(opts.dims, 1, 0, 0).unwrap();
    let out = iswap(&sys, &paper_drive(&sys, 10.0), &rho0, opts).unwrap();
    // the excitation spends half the transfer in each mode
    let gamma_m = hybridized_decay(0.0, sys.lambda_sm(), 1e7);
    let expected_drop = 1.0 - (-(gamma_q + gamma_m) * out.duration / 2.0).exp();
    let drop = 1.0 - out.fidelity;
    assert!((drop / expected_drop - 1.0).abs() < 0.05, "{drop} vs {expected_drop}");
    out.final_state.check().unwrap();
}

#[test]
fn zero_duration_gate_is_identity() {
    let sys = paper_system(5e3, 1e7, 0.0);
    let opts = IswapOptions {
        duration: Some(0.0),
        dissipation: true,
        ..IswapOptions::default()
    };
    let rho0 = DensityMatrix::basis(opts.dims, 1, 0, 0).unwrap();
    let out = iswap(&sys, &paper_drive(&sys, 10.0), &rho0, opts).unwrap();
    assert_eq!(out.final_state, rho0);
}

/// sin(ω_m t) and DC coefficients of I(t) from an FFT over one period.
fn fft_harmonics(cfg: &OpticalConfig, delta0: f64, m: f64) -> (f64, f64) {
    let n = 1024;
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = (0..n)
        .map(|k| {
            let phase = TAU * k as f64 / n as f64;
            rustfft::num_complex::Complex::new(instantaneous_power(cfg, delta0, m, phase), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (buf[0].re / n as f64, -2.0 * buf[1].im / n as f64)
}

#[test]
fn bessel_readout_matches_fft() {
    let p = PhotoelasticTensor::quartz_default();
    let cfg = OpticalConfig::quartz(3.5e-6).unwrap();
    let unit = StandingWaveMode::new(20e-6, 1e-12, F_MECH).unwrap();
    let (_, m_unit) = phase_modulation(&p, &cfg, &unit, 0.0).unwrap();
    for target in [0.1, 0.5] {
        let mode = StandingWaveMode::new(20e-6, 1e-12 * target / m_unit, F_MECH).unwrap();
        let r = detected_power(&p, &cfg, &mode, 0.0).unwrap();
        assert!((r.m - target).abs() < 1e-12);
        let (dc, b1) = fft_harmonics(&cfg, r.delta0, r.modulation_sign * r.m);
        assert!((b1 / r.signed_single_sided() - 1.0).abs() < 1e-4, "M = {target}");
        assert!((dc / r.dc_power - 1.0).abs() < 1e-4);
    }
}

#[test]
fn strain_sign_flips_beat_phase() {
    let cfg = OpticalConfig::quartz(3.5e-6).unwrap();
    // a negative p_eff flips the sign of M
    let q = PhotoelasticTensor::quartz_default();
    let neg = PhotoelasticTensor::trigonal(-0.16, -0.27, 0.27, -0.03, 0.29, -0.047, 0.10, -0.079);
    let mode = StandingWaveMode::new(20e-6, 2e-12, F_MECH).unwrap();
    let (a, b) = (
        detected_power(&q, &cfg, &mode, 0.0).unwrap(),
        detected_power(&neg, &cfg, &mode, 0.0).unwrap(),
    );
    assert_eq!(a.m, b.m);
    assert_eq!(a.single_sided(), b.single_sided());
    assert_eq!(a.signed_single_sided(), -b.signed_single_sided());
    let (_, b1) = fft_harmonics(&cfg, b.delta0, b.modulation_sign * b.m);
    assert!((b1 / b.signed_single_sided() - 1.0).abs() < 1e-4);
}

#[test]
fn chain_envelope_drives_optical_scan() {
    let chain = calibrated::chain(4);
    let mode = find_defect_mode(&chain, &calibrated::gap()).unwrap();
    let profile = mode_profile(&chain, &mode);
    let cell = calibrated::mirror_cell().length();
    let envelope: Vec<(f64, f64)> = profile.iter().map(|&(i, a)| (i as f64 * cell, a)).collect();
    let p = PhotoelasticTensor::quartz_default();
    let cfg = OpticalConfig::quartz(3.5e-6).unwrap();
    let template = StandingWaveMode::new(20e-6, 1e-12, mode.frequency).unwrap();
    let scan = mode_profile_scan(&envelope, &p, &cfg, &template).unwrap();
    let center = scan.iter().find(|(y, _)| *y == 0.0).unwrap();
    assert_eq!(center.1, 1.0);
    // small M: the readout is linear in the envelope
    for ((_, s), (_, a)) in scan.iter().zip(&envelope) {
        assert!((s - a.abs()).abs() < 1e-3, "{s} vs {a}");
    }
    let mut buf = Vec::new();
    io::write_scan(&mut buf, &scan).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), scan.len() + 1);
}

#[test]
fn ringdown_csv_to_quality_factor() {
    let tau = 1.023e-3;
    let t: Vec<f64> = (0..400).map(|i| i as f64 * 1.25e-5).collect();
    let y = t.iter().map(|&ti| 0.02 + (-ti / tau).exp()).collect();
    let trace = TimeTrace::new(t, y).unwrap();
    let mut buf = Vec::new();
    io::write_time_trace(&mut buf, &trace).unwrap();
    let back = io::read_time_trace(buf.as_slice()).unwrap();
    let fit = fit_ringdown(&back).unwrap();
    assert!((fit.tau / tau - 1.0).abs() < 1e-6);
    let q = TAU * F_MECH * fit.tau;
    assert!((6.2e5..=6.3e5).contains(&q));
    assert!(q_tau_consistency(q, F_MECH, fit.tau).unwrap() < 1e-12);
}

#[test]
fn admittance_csv_round_trip_fit() {
    let p = BvdParams::with_resistance(reference::C0, reference::CM, reference::LM, 2e4).unwrap();
    let fs = p.series_resonance().hz();
    let trace = admittance_trace(&p, fs - 5e3, fs + 5e3, 300);
    let mut buf = Vec::new();
    io::write_frequency_trace(&mut buf, &trace, TraceKind::Admittance).unwrap();
    let (back, kind) = io::read_frequency_trace(buf.as_slice()).unwrap();
    assert_eq!(kind, TraceKind::Admittance);
    let fit = fit_bvd(&back, true).unwrap();
    assert!((fit.params.rm() / 2e4 - 1.0).abs() < 1e-3);
    assert!((fit.params.series_resonance().hz() / fs - 1.0).abs() < 1e-9);
}

#[test]
fn simulated_backbone_round_trip() {
    let base = DuffingParams::new(F_MECH, 2e4, 1e30, 1.0).unwrap();
    let p = DuffingParams { drive: base.critical_drive(), ..base };
    let levels: Vec<f64> = (1..=6).map(|k| p.drive * 0.5 * k as f64).collect();
    let pts = backbone(&p, &levels).unwrap();
    let mut buf = Vec::new();
    io::write_backbone(&mut buf, &pts).unwrap();
    let fit = fit_backbone(&io::read_backbone(buf.as_slice()).unwrap()).unwrap();
    assert!((1.9..=2.1).contains(&fit.n), "n = {}", fit.n);

    let s = sweep(&p, F_MECH - 2e4, F_MECH + 6e4, 801, SweepDirection::Forward).unwrap();
    let mut buf = Vec::new();
    io::write_sweep(&mut buf, &s).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("f_Hz,amp,branch\n"));
    assert_eq!(text.lines().count(), 802);
}
