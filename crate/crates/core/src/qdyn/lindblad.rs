use num_complex::Complex64;

use super::density::{CMatrix, DensityMatrix};
use super::QdynError;

/// Collapse channel rate·D[L] with D[L]ρ = LρL† − ½{L†L, ρ}.
#[derive(Debug, Clone)]
pub struct Dissipator {
    pub operator: CMatrix,
    pub rate: f64,
}

impl Dissipator {
    pub fn new(operator: CMatrix, rate: f64) -> Result<Self, QdynError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(QdynError::InvalidParameter { field: "rate", value: rate });
        }
        Ok(Self { operator, rate })
    }
}

struct Prepared {
    l: CMatrix,
    l_dag: CMatrix,
    rate: f64,
}

/// Master equation dρ/dt = −i2π[H, ρ] + Σ rate·D[L]ρ, H in Hz.
pub struct Lindblad {
    h: CMatrix,
    /// −i2πH − ½Σ rate·L†L, so the no-jump part is Kρ + ρK†.
    k: CMatrix,
    channels: Vec<Prepared>,
    h_norm: f64,
    max_rate: f64,
}

/// The stability bound is dt ≤ STEP_FACTOR / max(‖H‖, Γ).
const STEP_FACTOR: f64 = 0.01;

impl Lindblad {
    pub fn new(h: CMatrix, dissipators: &[Dissipator]) -> Result<Self, QdynError> {
        let d = h.nrows();
        if h.ncols() != d {
            return Err(QdynError::DimensionMismatch { expected: d, got: h.ncols() });
        }
        let mut channels = Vec::new();
        let mut k = &h * Complex64::new(0.0, -std::f64::consts::TAU);
        let mut max_rate: f64 = 0.0;
        for diss in dissipators {
            if diss.operator.nrows() != d || diss.operator.ncols() != d {
                return Err(QdynError::DimensionMismatch {
                    expected: d,
                    got: diss.operator.nrows(),
                });
            }
            if diss.rate == 0.0 {
                continue;
            }
            let l_dag = diss.operator.adjoint();
            k -= &l_dag * &diss.operator * Complex64::new(0.5 * diss.rate, 0.0);
            // effective rate includes the operator scale, e.g. n for dephasing
            let op_scale = diss.operator.iter().map(|z| z.norm()).fold(0.0, f64::max);
            max_rate = max_rate.max(diss.rate * op_scale * op_scale);
            channels.push(Prepared {
                l: diss.operator.clone(),
                l_dag,
                rate: diss.rate,
            });
        }
        // induced ∞-norm: largest absolute row sum
        let h_norm = (0..d)
            .map(|i| h.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self {
            h,
            k,
            channels,
            h_norm,
            max_rate,
        })
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    /// Largest admissible fixed step; infinite for a trivial generator.
    pub fn max_step(&self) -> f64 {
        let scale = self.h_norm.max(self.max_rate);
        if scale == 0.0 {
            f64::INFINITY
        } else {
            STEP_FACTOR / scale
        }
    }

    fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let k_rho = &self.k * rho;
        let mut out = &k_rho + k_rho.adjoint();
        for c in &self.channels {
            out += &c.l * rho * &c.l_dag * Complex64::new(c.rate, 0.0);
        }
        out
    }

    fn rk4_step(&self, rho: &CMatrix, dt: f64) -> CMatrix {
        let h = Complex64::new(dt, 0.0);
        let half = Complex64::new(0.5 * dt, 0.0);
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + &k1 * half));
        let k3 = self.rhs(&(rho + &k2 * half));
        let k4 = self.rhs(&(rho + &k3 * h));
        let next = rho + (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
        (&next + next.adjoint()) * Complex64::new(0.5, 0.0)
    }

    fn check_step(&self, dt: f64) -> Result<(), QdynError> {
        let max = self.max_step();
        if !(dt > 0.0) || dt > max * (1.0 + 1e-12) {
            return Err(QdynError::StepTooLarge { dt, max });
        }
        Ok(())
    }

    fn advance(&self, rho: &CMatrix, t: f64, dt: f64) -> CMatrix {
        if t == 0.0 {
            return rho.clone();
        }
        let steps = (t / dt - 1e-9).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut cur = rho.clone();
        for _ in 0..steps {
            cur = self.rk4_step(&cur, h);
        }
        cur
    }

    /// Fixed-step RK4 from ρ₀ over `t`; the step is shrunk so it divides `t`.
    pub fn evolve(&self, rho0: &DensityMatrix, t: f64, dt: f64) -> Result<DensityMatrix, QdynError> {
        self.check_dims(rho0)?;
        self.check_step(dt)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(QdynError::InvalidParameter { field: "t", value: t });
        }
        let out = self.advance(rho0.matrix(), t, dt);
        DensityMatrix::new(rho0.dims(), out)
    }

    /// States at `samples + 1` evenly spaced times in [0, t].
    pub fn trajectory(
        &self,
        rho0: &DensityMatrix,
        t: f64,
        dt: f64,
        samples: usize,
    ) -> Result<Vec<(f64, DensityMatrix)>, QdynError> {
        self.check_dims(rho0)?;
        self.check_step(dt)?;
        let samples = samples.max(1);
        let seg = t / samples as f64;
        let mut out = Vec::with_capacity(samples + 1);
        out.push((0.0, rho0.clone()));
        let mut cur = rho0.matrix().clone();
        for k in 1..=samples {
            cur = self.advance(&cur, seg, dt);
            out.push((k as f64 * seg, DensityMatrix::new(rho0.dims(), cur.clone())?));
        }
        Ok(out)
    }

    fn check_dims(&self, rho: &DensityMatrix) -> Result<(), QdynError> {
        if rho.matrix().nrows() != self.h.nrows() {
            return Err(QdynError::DimensionMismatch {
                expected: self.h.nrows(),
                got: rho.matrix().nrows(),
            });
        }
        Ok(())
    }
}

/// One-shot evolution with the given Hamiltonian (Hz) and dissipators.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &CMatrix,
    dissipators: &[Dissipator],
    t: f64,
    dt: f64,
) -> Result<DensityMatrix, QdynError> {
    Lindblad::new(h.clone(), dissipators)?.evolve(rho0, t, dt)
}

const MAX_HALVINGS: usize = 16;

/// Evolve with step halving until successive results differ by less than
/// `tol` in every matrix element. Returns the finer result and its step.
pub fn evolve_converged(
    lindblad: &Lindblad,
    rho0: &DensityMatrix,
    t: f64,
    dt0: f64,
    tol: f64,
) -> Result<(DensityMatrix, f64), QdynError> {
    let mut dt = dt0.min(lindblad.max_step()).min(if t > 0.0 { t } else { f64::INFINITY });
    if !dt.is_finite() {
        // trivial generator: nothing to integrate
        return Ok((rho0.clone(), dt0));
    }
    let mut coarse = lindblad.evolve(rho0, t, dt)?;
    for _ in 0..MAX_HALVINGS {
        dt *= 0.5;
        let fine = lindblad.evolve(rho0, t, dt)?;
        let diff = (fine.matrix() - coarse.matrix()).camax();
        if diff < tol {
            return Ok((fine, dt));
        }
        coarse = fine;
    }
    Err(QdynError::NotConverged {
        tol,
        halvings: MAX_HALVINGS,
    })
}
