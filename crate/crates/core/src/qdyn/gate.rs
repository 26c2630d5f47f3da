use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use super::density::{annihilation, embed, number, CMatrix, DensityMatrix, Dims, Mode};
use super::lindblad::{evolve_converged, Dissipator, Lindblad};
use super::{
    build_rwa_hamiltonian, effective_coupling_chain, hybridized_decay, transfer_time, DriveSpec, QdynError,
    TriModeSystem,
};

/// Write moves a qubit excitation into the mechanics; read moves it back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Write,
    Read,
}

#[derive(Debug, Clone, Copy)]
pub struct IswapOptions {
    pub dims: Dims,
    pub kind: GateKind,
    pub dissipation: bool,
    /// Gate time; defaults to the first full-transfer time 1/(4·g_eff).
    pub duration: Option<f64>,
    /// Number of recorded intervals in the time series.
    pub samples: usize,
    /// Step-halving convergence threshold on the final state.
    pub tol: f64,
    pub include_cross_kerr: bool,
}

impl Default for IswapOptions {
    fn default() -> Self {
        Self {
            dims: Dims {
                qubit: 2,
                mech: 5,
                snail: None,
            },
            kind: GateKind::Write,
            dissipation: false,
            duration: None,
            samples: 200,
            tol: 1e-8,
            include_cross_kerr: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSample {
    pub t: f64,
    pub pop_e0: f64,
    pub pop_g1: f64,
    /// Fidelity with the dissipation-free evolution at the same time.
    pub fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct GateResult {
    pub final_state: DensityMatrix,
    pub duration: f64,
    pub dt: f64,
    pub g_eff: f64,
    pub drive_phase: f64,
    /// Populations of |g,0⟩, |g,1⟩, |e,0⟩, |e,1⟩ (SNAIL traced out).
    pub populations: [f64; 4],
    /// Fidelity of the final state with the ideal swap of ρ₀.
    pub fidelity: f64,
    pub samples: Vec<GateSample>,
}

fn unitary(h: &CMatrix, t: f64) -> CMatrix {
    let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let phases = eig
        .eigenvalues
        .map(|e| Complex64::from_polar(1.0, -std::f64::consts::TAU * e * t));
    &eig.eigenvectors * CMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint()
}

fn ideal(h: &CMatrix, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix, QdynError> {
    let u = unitary(h, t);
    DensityMatrix::new(rho0.dims(), &u * rho0.matrix() * u.adjoint())
}

fn reduced_population(rho: &DensityMatrix, q: usize, m: usize) -> f64 {
    let ds = rho.dims().snail.unwrap_or(1);
    (0..ds).map(|s| rho.population(q, m, s)).sum()
}

fn dissipators(sys: &TriModeSystem, lambda_sm: f64, dims: Dims) -> Result<Vec<Dissipator>, QdynError> {
    let q = embed(&annihilation(dims.qubit), Mode::Qubit, dims);
    let m = embed(&annihilation(dims.mech), Mode::Mech, dims);
    let nq = embed(&number(dims.qubit), Mode::Qubit, dims);
    let nm = embed(&number(dims.mech), Mode::Mech, dims);
    let gamma_m = hybridized_decay(sys.mech.decay_rate, lambda_sm, sys.snail.decay_rate);
    let mut out = vec![
        Dissipator::new(q, sys.qubit.decay_rate)?,
        Dissipator::new(m, gamma_m)?,
        // L = √(2γ_φ)·n gives coherences decaying at γ_φ
        Dissipator::new(nq, 2.0 * sys.qubit.dephasing_rate)?,
        Dissipator::new(nm, 2.0 * sys.mech.dephasing_rate)?,
    ];
    if let Some(ds) = dims.snail {
        out.push(Dissipator::new(embed(&annihilation(ds), Mode::Snail, dims), sys.snail.decay_rate)?);
    }
    Ok(out)
}

/// Pumped exchange gate between the qubit and the mechanics.
///
/// The drive phase is set so φ_d = π. Without an explicit duration the gate
/// runs to the first full transfer, 1/(4·g_eff).
pub fn iswap(
    sys: &TriModeSystem,
    drive: &DriveSpec,
    rho0: &DensityMatrix,
    opts: IswapOptions,
) -> Result<GateResult, QdynError> {
    let dims = opts.dims;
    if rho0.dims() != dims {
        return Err(QdynError::DimensionMismatch {
            expected: dims.total(),
            got: rho0.dims().total(),
        });
    }
    rho0.check()?;
    match opts.kind {
        GateKind::Write if rho0.mode_population(Mode::Mech, 0) < 1.0 - 1e-9 => {
            return Err(QdynError::InvalidState("write requires the mechanics in |0⟩".into()))
        }
        GateKind::Read if rho0.mode_population(Mode::Qubit, 0) < 1.0 - 1e-9 => {
            return Err(QdynError::InvalidState("read requires the qubit in |g⟩".into()))
        }
        _ => {}
    }

    let chain = effective_coupling_chain(sys, drive)?;
    let mut eff = chain.hamiltonian;
    eff.drive_phase = PI;
    if !opts.include_cross_kerr {
        eff.cross_kerr = 0.0;
    }
    let duration = match opts.duration {
        Some(t) if t.is_finite() && t >= 0.0 => t,
        Some(t) => return Err(QdynError::InvalidParameter { field: "duration", value: t }),
        None if eff.g_eff > 0.0 => transfer_time(eff.g_eff),
        None => {
            log::warn!("effective coupling is zero; gate has zero duration");
            0.0
        }
    };

    let h = build_rwa_hamiltonian(&eff, dims);
    let diss = if opts.dissipation {
        dissipators(sys, chain.dressed.lambda_sm, dims)?
    } else {
        Vec::new()
    };
    let lind = Lindblad::new(h.clone(), &diss)?;

    let (final_state, dt) = if duration == 0.0 {
        (rho0.clone(), 0.0)
    } else {
        let (rho, dt) = evolve_converged(&lind, rho0, duration, lind.max_step(), opts.tol)?;
        log::info!("gate converged with dt = {dt:.3e} s over {duration:.3e} s");
        (rho, dt)
    };

    let samples = if duration == 0.0 {
        vec![(0.0, rho0.clone())]
    } else {
        lind.trajectory(rho0, duration, dt, opts.samples)?
    };
    let series = samples
        .iter()
        .map(|(t, rho)| {
            Ok(GateSample {
                t: *t,
                pop_e0: reduced_population(rho, 1, 0),
                pop_g1: reduced_population(rho, 0, 1),
                fidelity: rho.fidelity(&ideal(&h, rho0, *t)?)?,
            })
        })
        .collect::<Result<Vec<_>, QdynError>>()?;

    let fidelity = final_state.fidelity(&ideal(&h, rho0, duration)?)?;
    let populations = [
        reduced_population(&final_state, 0, 0),
        reduced_population(&final_state, 0, 1),
        reduced_population(&final_state, 1, 0),
        reduced_population(&final_state, 1, 1),
    ];
    Ok(GateResult {
        final_state,
        duration,
        dt,
        g_eff: eff.g_eff,
        drive_phase: eff.drive_phase,
        populations,
        fidelity,
        samples: series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageReport {
    pub max_snail_population: f64,
    /// 10·λ_sm².
    pub bound: f64,
}

/// Largest SNAIL population reached when one phonon evolves under the
/// static linear couplings, sampled at `samples + 1` times up to `t_max`.
///
/// Uses the bare lab-frame Hamiltonian f_q n_q + f_s n_s + f_m n_m plus the
/// g_qs and g_sm exchange terms, propagated exactly by diagonalization.
pub fn snail_leakage(sys: &TriModeSystem, mech_levels: usize, t_max: f64, samples: usize) -> Result<LeakageReport, QdynError> {
    let dims = Dims::new(2, mech_levels, Some(2))?;
    let q = embed(&annihilation(2), Mode::Qubit, dims);
    let m = embed(&annihilation(mech_levels), Mode::Mech, dims);
    let s = embed(&annihilation(2), Mode::Snail, dims);
    let c = |v: f64| Complex64::new(v, 0.0);
    let h = q.adjoint() * &q * c(sys.qubit.frequency)
        + s.adjoint() * &s * c(sys.snail.frequency)
        + m.adjoint() * &m * c(sys.mech.frequency)
        + (&q * s.adjoint() + q.adjoint() * &s) * c(sys.g_qs)
        + (&s * m.adjoint() + s.adjoint() * &m) * c(sys.g_sm);

    let mut psi = DVector::zeros(dims.total());
    psi[dims.index(0, 1, 0)] = c(1.0);
    let rho0 = DensityMatrix::pure(dims, &psi)?;
    let mut worst: f64 = 0.0;
    for k in 0..=samples {
        let t = t_max * k as f64 / samples.max(1) as f64;
        let rho = ideal(&h, &rho0, t)?;
        worst = worst.max(rho.mode_population(Mode::Snail, 1));
    }
    Ok(LeakageReport {
        max_snail_population: worst,
        bound: 10.0 * sys.lambda_sm().powi(2),
    })
}
