//! Butterworth–Van-Dyke model of the piezoelectric mode and the linear
//! circuit couplings built on it.
//!
//! The mechanical mode appears electrically as a motional series branch
//! L_m–C_m(–R_m) in parallel with the electrode capacitance C₀.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::fit::{least_squares, linear_least_squares, FitError, FitOptions};
use crate::quantities::{Frequency, FrequencyTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElectromechError {
    #[error("{field} out of range: {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("shunt inductance gives f_r = {derived} Hz but {supplied} Hz was supplied")]
    InconsistentShunt { derived: f64, supplied: f64 },
    #[error("Im Y never changes sign in the window; the series resonance is not covered")]
    ResonanceNotInWindow,
    #[error(transparent)]
    Fit(#[from] FitError),
}

fn positive(field: &'static str, value: f64) -> Result<f64, ElectromechError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ElectromechError::InvalidParameter { field, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvdParams {
    c0: f64,
    cm: f64,
    lm: f64,
    rm: f64,
}

impl BvdParams {
    /// Lossless circuit.
    pub fn new(c0: f64, cm: f64, lm: f64) -> Result<Self, ElectromechError> {
        Self::with_resistance(c0, cm, lm, 0.0)
    }

    pub fn with_resistance(c0: f64, cm: f64, lm: f64, rm: f64) -> Result<Self, ElectromechError> {
        if !(rm.is_finite() && rm >= 0.0) {
            return Err(ElectromechError::InvalidParameter { field: "Rm", value: rm });
        }
        Ok(Self {
            c0: positive("C0", c0)?,
            cm: positive("Cm", cm)?,
            lm: positive("Lm", lm)?,
            rm,
        })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn cm(&self) -> f64 {
        self.cm
    }

    pub fn lm(&self) -> f64 {
        self.lm
    }

    pub fn rm(&self) -> f64 {
        self.rm
    }

    /// f_s = 1/(2π√(L_m C_m)).
    pub fn series_resonance(&self) -> Frequency {
        Frequency::new(1.0 / (TAU * (self.lm * self.cm).sqrt())).expect("positive circuit values")
    }

    /// f_p = f_s·√(1 + C_m/C₀).
    pub fn antiresonance(&self) -> Frequency {
        Frequency::new(self.series_resonance().hz() * (1.0 + self.cm / self.c0).sqrt()).expect("positive circuit values")
    }

    /// Mechanical quality factor ω_s L_m / R_m; infinite when lossless.
    pub fn quality_factor(&self) -> f64 {
        self.series_resonance().angular() * self.lm / self.rm
    }
}

/// Reference device values used in examples and fixtures.
pub mod reference {
    use super::*;

    pub const C0: f64 = 8.96e-16;
    pub const CM: f64 = 1.38e-19;
    pub const LM: f64 = 18.9;

    pub fn bvd() -> BvdParams {
        BvdParams::new(C0, CM, LM).unwrap()
    }

    /// Fluxonium-like shunt: 30 fF at 100 MHz.
    pub fn fluxonium() -> ShuntCircuit {
        ShuntCircuit::with_frequency(30e-15, 100e6).unwrap()
    }

    /// SNAIL shunt: 0.26 pF with 75 nH.
    pub fn snail() -> ShuntCircuit {
        ShuntCircuit::from_lc(0.26e-12, 75e-9).unwrap()
    }
}

/// Resonant circuit (qubit or SNAIL) the mechanical mode couples to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuntCircuit {
    cr: f64,
    lr: Option<f64>,
    f_r: f64,
}

impl ShuntCircuit {
    pub fn from_lc(cr: f64, lr: f64) -> Result<Self, ElectromechError> {
        let cr = positive("Cr", cr)?;
        let lr = positive("Lr", lr)?;
        Ok(Self {
            cr,
            lr: Some(lr),
            f_r: 1.0 / (TAU * (lr * cr).sqrt()),
        })
    }

    pub fn with_frequency(cr: f64, f_r: f64) -> Result<Self, ElectromechError> {
        Ok(Self {
            cr: positive("Cr", cr)?,
            lr: None,
            f_r: positive("f_r", f_r)?,
        })
    }

    /// Both L_r and f_r given: they must agree to 1e-9 relative.
    pub fn new(cr: f64, lr: Option<f64>, f_r: Option<f64>) -> Result<Self, ElectromechError> {
        match (lr, f_r) {
            (Some(l), None) => Self::from_lc(cr, l),
            (None, Some(f)) => Self::with_frequency(cr, f),
            (Some(l), Some(f)) => {
                let s = Self::from_lc(cr, l)?;
                if (s.f_r - f).abs() > 1e-9 * f.abs() {
                    return Err(ElectromechError::InconsistentShunt {
                        derived: s.f_r,
                        supplied: f,
                    });
                }
                Ok(s)
            }
            (None, None) => Err(ElectromechError::InvalidParameter {
                field: "f_r",
                value: f64::NAN,
            }),
        }
    }

    pub fn cr(&self) -> f64 {
        self.cr
    }

    pub fn lr(&self) -> Option<f64> {
        self.lr
    }

    pub fn resonance(&self) -> Frequency {
        Frequency::new(self.f_r).expect("validated")
    }
}

/// Coupling rate g/2π in Hz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CouplingRate(f64);

impl CouplingRate {
    pub fn hz(self) -> f64 {
        self.0
    }

    pub fn angular(self) -> f64 {
        TAU * self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DefectArraySpec {
    n: u32,
}

impl DefectArraySpec {
    pub fn new(n: u32) -> Result<Self, ElectromechError> {
        if n >= 1 {
            Ok(Self { n })
        } else {
            Err(ElectromechError::InvalidParameter {
                field: "N",
                value: n as f64,
            })
        }
    }

    pub fn count(&self) -> u32 {
        self.n
    }
}

/// Y = iωC₀ + 1/(R_m + iωL_m + 1/(iωC_m)).
///
/// At the exact series resonance of a lossless circuit the motional branch
/// shorts; the real part is then reported as +∞.
pub fn bvd_admittance(p: &BvdParams, f: Frequency) -> Complex64 {
    let w = f.angular();
    let static_branch = Complex64::new(0.0, w * p.c0);
    let z = Complex64::new(p.rm, w * p.lm - 1.0 / (w * p.cm));
    if z.re == 0.0 && z.im == 0.0 {
        return Complex64::new(f64::INFINITY, static_branch.im);
    }
    static_branch + z.inv()
}

/// g/2π = ½√(f_r f_m)·√(C_m/(C_r + C_m + C₀)).
///
/// The expression assumes C_r ≫ C₀ + C_m; a warning is logged otherwise.
pub fn coupling_rate_gsm(p: &BvdParams, shunt: &ShuntCircuit, f_m: Frequency) -> CouplingRate {
    if !gsm_is_valid(p, shunt) {
        log::warn!(
            "shunt capacitance {:.3e} F is not much larger than C0 + Cm = {:.3e} F; coupling estimate is unreliable",
            shunt.cr,
            p.c0 + p.cm
        );
    }
    let total = shunt.cr + p.cm + p.c0;
    CouplingRate(0.5 * (shunt.f_r * f_m.hz()).sqrt() * (p.cm / total).sqrt())
}

/// [`coupling_rate_gsm`] with the mechanical frequency taken from the BVD series resonance.
pub fn coupling_rate_gsm_at_series_resonance(p: &BvdParams, shunt: &ShuntCircuit) -> CouplingRate {
    coupling_rate_gsm(p, shunt, p.series_resonance())
}

/// Whether C_r > 10·(C₀ + C_m).
pub fn gsm_is_valid(p: &BvdParams, shunt: &ShuntCircuit) -> bool {
    shunt.cr > 10.0 * (p.c0 + p.cm)
}

/// g_ij/2π = ½√(f_i f_j)·C_ij/√((C_i + C_ij)(C_j + C_ij)).
pub fn coupling_rate_gij(
    ci: f64,
    cj: f64,
    cij: f64,
    fi: Frequency,
    fj: Frequency,
) -> Result<CouplingRate, ElectromechError> {
    positive("Ci", ci)?;
    positive("Cj", cj)?;
    if !(cij.is_finite() && cij >= 0.0) {
        return Err(ElectromechError::InvalidParameter { field: "Cij", value: cij });
    }
    Ok(CouplingRate(
        0.5 * (fi.hz() * fj.hz()).sqrt() * cij / ((ci + cij) * (cj + cij)).sqrt(),
    ))
}

/// N identical defects driven in parallel: C_m and C₀ scale by N, L_m by 1/N.
pub fn scale_defects(p: &BvdParams, spec: DefectArraySpec) -> BvdParams {
    let n = spec.n as f64;
    BvdParams {
        c0: p.c0 * n,
        cm: p.cm * n,
        lm: p.lm / n,
        rm: p.rm / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvdFit {
    pub params: BvdParams,
    /// Norm of the relative admittance residuals.
    pub residual_norm: f64,
}

const MIN_BVD_POINTS: usize = 50;
/// Quality factor assumed when seeding or scaling the motional resistance.
const RM_SCALE_Q: f64 = 1e4;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Closed-form seed from Im Y of a lossless circuit.
///
/// With y = Im Y/ω and x = f², the lossless model y = C₀ + C_m/(1 − x/f_s²)
/// rearranges to x·y = f_s²·y − f_s²(C₀ + C_m) + C₀·x, linear in
/// (f_s², f_s²(C₀ + C_m), C₀). Writing x = x₀(1 + u) keeps the constant
/// and x columns from being nearly collinear over a narrow window.
fn linear_seed(freqs: &[f64], im: &[f64]) -> Option<(f64, f64, f64)> {
    let y: Vec<f64> = freqs.iter().zip(im).map(|(f, b)| b / (TAU * f)).collect();
    let x0 = freqs[freqs.len() / 2].powi(2);
    let y0 = median(y.iter().map(|v| v.abs()).collect());
    let u: Vec<f64> = freqs.iter().map(|f| f * f / x0 - 1.0).collect();
    let u0 = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let n = freqs.len();
    let mut a = DMatrix::zeros(n, 3);
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let yn = y[i] / y0;
        a[(i, 0)] = yn;
        a[(i, 1)] = 1.0;
        a[(i, 2)] = u[i] / u0;
        rhs[i] = yn * (1.0 + u[i]);
    }
    // yn(1 + u) = (f_s²/x₀)·yn + (C₀ − f_s²(C₀ + C_m)/x₀)/y₀ + (C₀ u₀/y₀)·(u/u₀)
    let sol = linear_least_squares(&a, &rhs)?;
    let fs2 = sol[0] * x0;
    let c0 = sol[2] * y0 / u0;
    let cm = (c0 - sol[1] * y0) * x0 / fs2 - c0;
    (fs2 > 0.0 && c0 > 0.0 && cm > 0.0).then(|| (fs2.sqrt(), c0, cm))
}

/// Fit a one-mode BVD circuit to a measured admittance trace.
///
/// Without `fit_rm` only Im Y is fitted and the circuit is lossless;
/// with it Re Y is fitted too and R_m is returned. Parameters are
/// (ln C₀, ln C_m, series resonance offset in ppm, √(R_m/R_scale)),
/// which keeps the pole position well conditioned.
pub fn fit_bvd(trace: &FrequencyTrace, fit_rm: bool) -> Result<BvdFit, ElectromechError> {
    let points: Vec<(f64, Complex64)> = trace
        .frequencies()
        .iter()
        .zip(trace.response())
        .filter(|(_, y)| y.re.is_finite() && y.im.is_finite())
        .map(|(&f, &y)| (f, y))
        .collect();
    if points.len() < MIN_BVD_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_BVD_POINTS,
            got: points.len(),
        }
        .into());
    }
    let freqs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let im: Vec<f64> = points.iter().map(|p| p.1.im).collect();

    let crossing = im.windows(2).position(|w| w[0] > 0.0 && w[1] <= 0.0);
    let any_crossing = im.windows(2).position(|w| w[0].signum() != w[1].signum());
    let Some(idx) = crossing.or(any_crossing) else {
        return Err(ElectromechError::ResonanceNotInWindow);
    };

    let (fs0, c0_0, cm_0) = linear_seed(&freqs, &im).unwrap_or_else(|| {
        // fall back to the sign change and the off-resonance capacitance
        let fs = 0.5 * (freqs[idx] + freqs[idx + 1]);
        let c0 = median(freqs.iter().zip(&im).map(|(f, b)| b / (TAU * f)).collect());
        (fs, c0.abs(), 1e-3 * c0.abs())
    });
    let lm0 = 1.0 / ((TAU * fs0).powi(2) * cm_0);
    let r_scale = TAU * fs0 * lm0 / RM_SCALE_Q;
    let rm_seed = points
        .iter()
        .map(|p| p.1.re)
        .fold(0.0, f64::max);
    let r0 = if fit_rm && rm_seed > 0.0 {
        (1.0 / rm_seed / r_scale).min(1.0).sqrt()
    } else {
        // no conductance peak: start near the lossless limit
        1e-3
    };

    let scale: Vec<f64> = {
        let mags: Vec<f64> = points.iter().map(|p| p.1.norm()).collect();
        let floor = 1e-3 * median(mags.clone());
        mags.iter().map(|m| m.max(floor)).collect()
    };

    let params_of = |p: &[f64]| -> Option<BvdParams> {
        let c0 = p[0].exp();
        let cm = p[1].exp();
        let fs = fs0 * (1.0 + 1e-6 * p[2]);
        if !(fs > 0.0) {
            return None;
        }
        let lm = 1.0 / ((TAU * fs).powi(2) * cm);
        let rm = if fit_rm { p[3] * p[3] * r_scale } else { 0.0 };
        BvdParams::with_resistance(c0, cm, lm, rm).ok()
    };

    let residual = |p: &[f64]| -> Option<Vec<f64>> {
        let bvd = params_of(p)?;
        let mut out = Vec::with_capacity(points.len() * if fit_rm { 2 } else { 1 });
        for ((f, y), s) in points.iter().zip(&scale) {
            let model = bvd_admittance(&bvd, Frequency::new(*f).ok()?);
            out.push((model.im - y.im) / s);
            if fit_rm {
                out.push((model.re - y.re) / s);
            }
        }
        Some(out)
    };

    let mut initial = vec![c0_0.ln(), cm_0.ln(), 0.0];
    if fit_rm {
        initial.push(r0);
    }
    let out = least_squares(residual, &initial, FitOptions::default())?;
    let params = params_of(&out.params).ok_or_else(|| FitError::DidNotConverge("invalid circuit at optimum".into()))?;
    Ok(BvdFit {
        params,
        residual_norm: out.residual_norm,
    })
}

/// Sample the admittance on a uniform grid.
pub fn admittance_trace(p: &BvdParams, f_start: f64, f_stop: f64, points: usize) -> FrequencyTrace {
    let step = (f_stop - f_start) / (points.max(2) - 1) as f64;
    let freqs: Vec<f64> = (0..points).map(|i| f_start + i as f64 * step).collect();
    let ys = freqs
        .iter()
        .map(|&f| bvd_admittance(p, Frequency::new(f).expect("positive grid")))
        .collect();
    FrequencyTrace::new(freqs, ys).expect("uniform grid")
}
