#![allow(dead_code)]

use qmem_core::electromech::{coupling_rate_gsm, reference};
use qmem_core::loss::{
    ConstantChannel, LossStack, PowerLawChannel, QvsTDataset, QvsTPoint, ZenerChannel,
};
use qmem_core::qdyn::{dress, DriveAmplitude, DriveSpec, ModeParams, TriModeSystem};
use qmem_core::{Frequency, Temperature};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn hz(v: f64) -> Frequency {
    Frequency::new(v).unwrap()
}

pub fn kelvin(v: f64) -> Temperature {
    Temperature::new(v).unwrap()
}

pub const F_MECH: f64 = 97.2e6;

/// Three-channel stack shaped like the measured Q(T): a ~7.4e5 ceiling, a
/// T⁴ phonon-phonon term and a relaxation peak near 40 K.
pub fn fig5_truth() -> LossStack {
    LossStack::new(vec![
        ConstantChannel::new(7.4e5).unwrap().into(),
        PowerLawChannel::new(3e-11, 4.0).unwrap().into(),
        ZenerChannel::peaked_at(1e-4, hz(F_MECH), 40.0, 250.0).unwrap().into(),
    ])
    .unwrap()
}

/// Seeds deliberately off the truth by tens of percent.
pub fn fig5_template() -> LossStack {
    LossStack::new(vec![
        ConstantChannel::new(5e5).unwrap().into(),
        PowerLawChannel::new(1e-11, 3.5).unwrap().into(),
        ZenerChannel::peaked_at(5e-5, hz(F_MECH), 35.0, 200.0).unwrap().into(),
    ])
    .unwrap()
}

/// 1 K steps over 8–60 K with 1% Gaussian noise on Q.
pub fn fig5_dataset(seed: u64) -> QvsTDataset {
    let truth = fig5_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let points = (8..=60)
        .map(|t| {
            let q = 1.0 / truth.q_inverse(hz(F_MECH), kelvin(t as f64));
            QvsTPoint {
                t_k: t as f64,
                q: q * (1.0 + noise.sample(&mut rng)),
                sigma_q: 0.01 * q,
            }
        })
        .collect();
    QvsTDataset::new(points).unwrap()
}

pub const F_QUBIT: f64 = 5e9;

/// Qubit–SNAIL–mechanics system at the reference operating point:
/// (g/Δ)_qs = 0.1, g_sm from the BVD + SNAIL shunt, g₃ = 100 MHz.
pub fn paper_system(gamma_q: f64, gamma_s: f64, gamma_m: f64) -> TriModeSystem {
    let bvd = reference::bvd();
    let snail = reference::snail();
    let f_s = snail.resonance().hz();
    let g_sm = coupling_rate_gsm(&bvd, &snail, hz(F_MECH)).hz();
    TriModeSystem::new(
        ModeParams::new(F_QUBIT, gamma_q, 200e6).unwrap(),
        ModeParams::linear(f_s, gamma_s).unwrap(),
        ModeParams::linear(F_MECH, gamma_m).unwrap(),
        0.1 * (F_QUBIT - f_s),
        g_sm,
        100e6,
    )
    .unwrap()
}

/// Pump on the dressed q–m difference frequency with n_s SNAIL photons.
pub fn paper_drive(sys: &TriModeSystem, n_s: f64) -> DriveSpec {
    let d = dress(sys).unwrap();
    DriveSpec::new(d.f_q - d.f_m, DriveAmplitude::Photons(n_s), 0.0, 0.0).unwrap()
}
