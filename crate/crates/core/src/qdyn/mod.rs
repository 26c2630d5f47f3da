//! Qubit–SNAIL–mechanics circuit model.
//!
//! The three linear modes couple by beam-splitter terms g_qs and g_sm. With
//! the SNAIL far detuned from both neighbours the linear part is
//! diagonalized perturbatively in λᵢⱼ = gᵢⱼ/(fᵢ − fⱼ); a pump on the SNAIL
//! at the qubit–mechanics difference frequency then turns its third-order
//! nonlinearity g₃ into an effective qubit–mechanics exchange
//! g_eff = |6·g₃·λ_qs·λ_sm·η|, with the SNAIL itself left unpopulated.
//!
//! All rates and frequencies are ordinary frequencies (Hz) or 1/s; Hamiltonians
//! are H/h in Hz and evolve as dρ/dt = −i2π[H, ρ] + dissipators.

mod density;
mod gate;
mod lindblad;

use std::f64::consts::TAU;

use nalgebra::Matrix3;
use num_complex::Complex64;
use thiserror::Error;

pub use density::{annihilation, embed, number, CMatrix, DensityMatrix, Dims, Mode};
pub use gate::{
    iswap, snail_leakage, GateKind, GateResult, GateSample, IswapOptions, LeakageReport,
};
pub use lindblad::{evolve, evolve_converged, Dissipator, Lindblad};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QdynError {
    #[error("{field} out of range: {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("|{name}| = {value:.3} exceeds the perturbative limit 0.5")]
    CouplingTooStrong { name: &'static str, value: f64 },
    #[error("modes {pair} are too close: |Δf| = {detuning} Hz < 10·g = {limit} Hz")]
    DegenerateModes {
        pair: &'static str,
        detuning: f64,
        limit: f64,
    },
    #[error("drive at {f_d} Hz is on the SNAIL resonance {f_s} Hz")]
    DriveOnResonance { f_d: f64, f_s: f64 },
    #[error("drive at {f_d} Hz misses the qubit–mechanics difference frequency {target} Hz by more than {tolerance} Hz")]
    DriveOffDifferenceFrequency { f_d: f64, target: f64, tolerance: f64 },
    #[error("time step {dt} s exceeds the stability bound {max} s")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step halving did not converge below {tol} after {halvings} halvings")]
    NotConverged { tol: f64, halvings: usize },
}

fn non_negative(field: &'static str, value: f64) -> Result<f64, QdynError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(QdynError::InvalidParameter { field, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub frequency: f64,
    /// Energy decay rate Γ in 1/s.
    pub decay_rate: f64,
    /// E_C/h for the qubit, 0 for linear modes.
    pub anharmonicity: f64,
    /// Pure dephasing rate in 1/s.
    pub dephasing_rate: f64,
}

impl ModeParams {
    pub fn new(frequency: f64, decay_rate: f64, anharmonicity: f64) -> Result<Self, QdynError> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(QdynError::InvalidParameter {
                field: "frequency",
                value: frequency,
            });
        }
        Ok(Self {
            frequency,
            decay_rate: non_negative("decay_rate", decay_rate)?,
            anharmonicity: non_negative("anharmonicity", anharmonicity)?,
            dephasing_rate: 0.0,
        })
    }

    pub fn linear(frequency: f64, decay_rate: f64) -> Result<Self, QdynError> {
        Self::new(frequency, decay_rate, 0.0)
    }

    pub fn with_dephasing(mut self, rate: f64) -> Result<Self, QdynError> {
        self.dephasing_rate = non_negative("dephasing_rate", rate)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriModeSystem {
    pub qubit: ModeParams,
    pub snail: ModeParams,
    pub mech: ModeParams,
    pub g_qs: f64,
    pub g_sm: f64,
    pub g3: f64,
}

const LAMBDA_WARN: f64 = 0.1;
const LAMBDA_MAX: f64 = 0.5;

impl TriModeSystem {
    pub fn new(
        qubit: ModeParams,
        snail: ModeParams,
        mech: ModeParams,
        g_qs: f64,
        g_sm: f64,
        g3: f64,
    ) -> Result<Self, QdynError> {
        let sys = Self {
            qubit,
            snail,
            mech,
            g_qs: non_negative("g_qs", g_qs)?,
            g_sm: non_negative("g_sm", g_sm)?,
            g3: non_negative("g3", g3)?,
        };
        for (name, value) in [("lambda_qs", sys.lambda_qs()), ("lambda_sm", sys.lambda_sm())] {
            if !(value.abs() <= LAMBDA_MAX) {
                return Err(QdynError::CouplingTooStrong { name, value });
            }
            if value.abs() > LAMBDA_WARN {
                log::warn!("{name} = {value:.3} is above 0.1; dressed-state expansion is marginal");
            }
        }
        if qubit.anharmonicity > 0.0 && qubit.anharmonicity <= mech.frequency {
            log::warn!(
                "qubit anharmonicity {} Hz does not exceed the mechanical frequency {} Hz",
                qubit.anharmonicity,
                mech.frequency
            );
        }
        Ok(sys)
    }

    /// λ_qs = g_qs/(f_q − f_s).
    pub fn lambda_qs(&self) -> f64 {
        self.g_qs / (self.qubit.frequency - self.snail.frequency)
    }

    /// λ_sm = g_sm/(f_s − f_m).
    pub fn lambda_sm(&self) -> f64 {
        self.g_sm / (self.snail.frequency - self.mech.frequency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedSystem {
    pub lambda_qs: f64,
    pub lambda_sm: f64,
    pub f_q: f64,
    pub f_s: f64,
    pub f_m: f64,
}

impl DressedSystem {
    /// Dressed frequencies sorted descending, for comparison with the exact modes.
    pub fn sorted_frequencies(&self) -> [f64; 3] {
        let mut f = [self.f_q, self.f_s, self.f_m];
        f.sort_by(|a, b| b.total_cmp(a));
        f
    }
}

/// Second-order dressing of the linear three-mode chain.
///
/// Each frequency shifts by Σⱼ gᵢⱼ²/(fᵢ − fⱼ): the qubit by +λ_qs·g_qs, the
/// SNAIL by −λ_qs·g_qs + λ_sm·g_sm and the mechanics by −λ_sm·g_sm, so
/// levels repel.
pub fn dress(sys: &TriModeSystem) -> Result<DressedSystem, QdynError> {
    for (pair, a, b, g) in [
        ("qubit/snail", sys.qubit.frequency, sys.snail.frequency, sys.g_qs),
        ("snail/mech", sys.snail.frequency, sys.mech.frequency, sys.g_sm),
    ] {
        let detuning = (a - b).abs();
        // relative slack so λ = 0.1 exactly is accepted
        if g > 0.0 && detuning < 10.0 * g * (1.0 - 1e-9) {
            return Err(QdynError::DegenerateModes {
                pair,
                detuning,
                limit: 10.0 * g,
            });
        }
    }
    let lqs = sys.lambda_qs();
    let lsm = sys.lambda_sm();
    Ok(DressedSystem {
        lambda_qs: lqs,
        lambda_sm: lsm,
        f_q: sys.qubit.frequency + lqs * sys.g_qs,
        f_s: sys.snail.frequency - lqs * sys.g_qs + lsm * sys.g_sm,
        f_m: sys.mech.frequency - lsm * sys.g_sm,
    })
}

/// Eigenvalues of the single-excitation frequency matrix, sorted descending.
pub fn exact_normal_modes(sys: &TriModeSystem) -> [f64; 3] {
    let m = Matrix3::new(
        sys.qubit.frequency,
        sys.g_qs,
        0.0,
        sys.g_qs,
        sys.snail.frequency,
        sys.g_sm,
        0.0,
        sys.g_sm,
        sys.mech.frequency,
    );
    let ev = m.symmetric_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Γ'_m = Γ_m + λ_sm²·Γ_s.
pub fn hybridized_decay(gamma_m: f64, lambda_sm: f64, gamma_s: f64) -> f64 {
    gamma_m + lambda_sm * lambda_sm * gamma_s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveAmplitude {
    /// Pump amplitude ε in Hz.
    Epsilon(f64),
    /// Target SNAIL photon number n_s = |η|².
    Photons(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub frequency: f64,
    pub amplitude: DriveAmplitude,
    pub phase: f64,
    pub duration: f64,
}

impl DriveSpec {
    pub fn new(frequency: f64, amplitude: DriveAmplitude, phase: f64, duration: f64) -> Result<Self, QdynError> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(QdynError::InvalidParameter {
                field: "drive_frequency",
                value: frequency,
            });
        }
        match amplitude {
            DriveAmplitude::Epsilon(e) if !e.is_finite() => {
                return Err(QdynError::InvalidParameter { field: "epsilon", value: e })
            }
            DriveAmplitude::Photons(n) => {
                non_negative("n_s", n)?;
            }
            _ => {}
        }
        if !phase.is_finite() {
            return Err(QdynError::InvalidParameter { field: "phase", value: phase });
        }
        Ok(Self {
            frequency,
            amplitude,
            phase,
            duration: non_negative("duration", duration)?,
        })
    }
}

/// Pump displacement η of the SNAIL.
///
/// From ε: η = 2f_d·ε/(f_s² − f_d²)·e^{iΦ_p}; from n_s: η = √n_s·e^{iΦ_p}.
pub fn effective_eta(drive: &DriveSpec, f_s: f64) -> Result<Complex64, QdynError> {
    if (drive.frequency - f_s).abs() < 1e-6 * f_s {
        return Err(QdynError::DriveOnResonance {
            f_d: drive.frequency,
            f_s,
        });
    }
    let magnitude = match drive.amplitude {
        DriveAmplitude::Photons(n) => n.sqrt(),
        DriveAmplitude::Epsilon(eps) => 2.0 * drive.frequency * eps / (f_s * f_s - drive.frequency * drive.frequency),
    };
    Ok(Complex64::from_polar(magnitude, drive.phase))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveHamiltonian {
    /// Exchange rate in Hz, non-negative.
    pub g_eff: f64,
    pub drive_phase: f64,
    pub cross_kerr: f64,
    /// K in K·q†q†qq; −E_C/2 so that |2⟩ shifts by −E_C.
    pub qubit_self_kerr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingChain {
    pub dressed: DressedSystem,
    pub eta: Complex64,
    pub hamiltonian: EffectiveHamiltonian,
    /// Dressed difference frequency f'_q − f'_m the pump must sit on.
    pub target_drive_frequency: f64,
}

/// Full chain from circuit parameters to the effective beam-splitter Hamiltonian.
///
/// The complex rate is G = −6·g₃·λ_qs·λ_ms·η with λ_ms = −λ_sm; g_eff = |G|
/// and φ_d = arg G.
pub fn effective_coupling_chain(sys: &TriModeSystem, drive: &DriveSpec) -> Result<CouplingChain, QdynError> {
    let dressed = dress(sys)?;
    let eta = effective_eta(drive, dressed.f_s)?;
    let lambda_ms = -dressed.lambda_sm;
    let big_g = -6.0 * sys.g3 * dressed.lambda_qs * lambda_ms * eta;
    let g_eff = big_g.norm();
    let drive_phase = if g_eff > 0.0 { big_g.arg() } else { drive.phase };

    let target = (dressed.f_q - dressed.f_m).abs();
    let tolerance = (10.0 * g_eff).max(1e-9 * drive.frequency);
    if (drive.frequency - target).abs() > tolerance {
        return Err(QdynError::DriveOffDifferenceFrequency {
            f_d: drive.frequency,
            target,
            tolerance,
        });
    }

    let e_c = sys.qubit.anharmonicity;
    Ok(CouplingChain {
        dressed,
        eta,
        hamiltonian: EffectiveHamiltonian {
            g_eff,
            drive_phase,
            cross_kerr: -2.0 * e_c * dressed.lambda_qs * dressed.lambda_qs,
            qubit_self_kerr: -0.5 * e_c,
        },
        target_drive_frequency: target,
    })
}

pub fn effective_coupling(sys: &TriModeSystem, drive: &DriveSpec) -> Result<EffectiveHamiltonian, QdynError> {
    effective_coupling_chain(sys, drive).map(|c| c.hamiltonian)
}

/// H/h in the rotating frame, Hz.
///
/// K·q†q†qq + χ_qs·q†q·s†s (SNAIL present only) + g_eff(q m† e^{−iφ_d} + q† m e^{iφ_d}).
pub fn build_rwa_hamiltonian(eff: &EffectiveHamiltonian, dims: Dims) -> CMatrix {
    let q = embed(&annihilation(dims.qubit), Mode::Qubit, dims);
    let m = embed(&annihilation(dims.mech), Mode::Mech, dims);
    let qd = q.adjoint();
    let md = m.adjoint();

    let phase = Complex64::from_polar(1.0, eff.drive_phase);
    let mut h = (&q * &md) * (phase.conj() * eff.g_eff) + (&qd * &m) * (phase * eff.g_eff);
    if eff.qubit_self_kerr != 0.0 && dims.qubit > 2 {
        h += (&qd * &qd * &q * &q) * Complex64::new(eff.qubit_self_kerr, 0.0);
    }
    if let Some(ds) = dims.snail {
        if eff.cross_kerr != 0.0 {
            let nq = embed(&number(dims.qubit), Mode::Qubit, dims);
            let ns = embed(&number(ds), Mode::Snail, dims);
            h += (nq * ns) * Complex64::new(eff.cross_kerr, 0.0);
        }
    }
    // exact Hermitian symmetrization guards against rounding in the products
    (&h + h.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Closed-form first full-transfer time 1/(4·g_eff) of the exchange Hamiltonian.
pub fn transfer_time(g_eff: f64) -> f64 {
    1.0 / (4.0 * g_eff)
}

/// Swap time quoted as ½·(1/g_eff), twice [`transfer_time`].
pub fn nominal_iswap_time(g_eff: f64) -> f64 {
    0.5 / g_eff
}

/// Angular-frequency helper for callers mixing conventions.
pub fn angular(hz: f64) -> f64 {
    TAU * hz
}
