//! Optical readout of the mechanical mode through the photoelastic effect.
//!
//! Strain perturbs the index ellipsoid, Δ(1/n²) = p·S. The laser reflects off
//! the front and back faces of the quartz plate; the strain-modulated round
//! trip phase δ = δ₀ − M·sin(ω_m t) turns into intensity modulation
//!
//! ```text
//! I = ½[c₁² + c₂² + 2c₁c₂ cos δ]
//!   = ½[c₁² + c₂² + 2c₁c₂ cos δ₀ J₀(M) + 4c₁c₂ sin δ₀ J₁(M) sin(ω_m t) + …]
//! ```
//!
//! Positions along the beam width are measured from the defect center, so
//! the displacement is u₀·sin(πy/L) and the strain S₀·cos(πy/L).

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix6, Vector6};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhotoelasticError {
    #[error("{field} out of range: {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("strain component {index} = {value:e} exceeds the small-strain bound 1e-2")]
    StrainTooLarge { index: usize, value: f64 },
    #[error("position y = {y} m is outside the defect (|y| ≤ {half_width} m)")]
    OutOfDefect { y: f64, half_width: f64 },
    #[error("modulation depth M = {0} ≥ 1; Bessel truncation invalid")]
    ModulationTooLarge(f64),
}

fn check(field: &'static str, value: f64, ok: bool) -> Result<f64, PhotoelasticError> {
    if value.is_finite() && ok {
        Ok(value)
    } else {
        Err(PhotoelasticError::InvalidParameter { field, value })
    }
}

/// Photoelastic tensor in Voigt notation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotoelasticTensor {
    p: Matrix6<f64>,
}

impl PhotoelasticTensor {
    /// Trigonal (class 32) pattern from the eight independent coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn trigonal(p11: f64, p12: f64, p13: f64, p14: f64, p31: f64, p33: f64, p41: f64, p44: f64) -> Self {
        let p66 = 0.5 * (p11 - p12);
        #[rustfmt::skip]
        let p = Matrix6::new(
            p11,  p12, p13,  p14, 0.0, 0.0,
            p12,  p11, p13, -p14, 0.0, 0.0,
            p31,  p31, p33,  0.0, 0.0, 0.0,
            p41, -p41, 0.0,  p44, 0.0, 0.0,
            0.0,  0.0, 0.0,  0.0, p44, p41,
            0.0,  0.0, 0.0,  0.0, p14, p66,
        );
        Self { p }
    }

    /// α-quartz coefficients.
    pub fn quartz_default() -> Self {
        Self::trigonal(0.16, 0.27, 0.27, -0.03, 0.29, -0.047, 0.10, -0.079)
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.p
    }

    pub fn p11(&self) -> f64 {
        self.p[(0, 0)]
    }

    pub fn p12(&self) -> f64 {
        self.p[(0, 1)]
    }

    pub fn p31(&self) -> f64 {
        self.p[(2, 0)]
    }

    pub fn p41(&self) -> f64 {
        self.p[(3, 0)]
    }

    /// Coefficient seen by light polarized at `angle` from the crystal X axis
    /// for a pure S_yy strain: p12 along X, p11 along Y.
    pub fn effective_coefficient(&self, angle: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        self.p12() * c * c + self.p11() * s * s
    }
}

/// Voigt strain (S₁ … S₆).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainState {
    s: Vector6<f64>,
}

pub const SMALL_STRAIN_BOUND: f64 = 1e-2;

impl StrainState {
    pub fn new(s: [f64; 6]) -> Result<Self, PhotoelasticError> {
        for (index, &value) in s.iter().enumerate() {
            if !(value.is_finite() && value.abs() < SMALL_STRAIN_BOUND) {
                return Err(PhotoelasticError::StrainTooLarge { index, value });
            }
        }
        Ok(Self { s: Vector6::from(s) })
    }

    pub fn uniaxial_yy(s_yy: f64) -> Result<Self, PhotoelasticError> {
        Self::new([0.0, s_yy, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn components(&self) -> [f64; 6] {
        self.s.into()
    }
}

/// Δ(1/n²) = p·S.
pub fn index_perturbation(p: &PhotoelasticTensor, s: &StrainState) -> [f64; 6] {
    (p.p * s.s).into()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalConfig {
    pub wavelength: f64,
    pub n_o: f64,
    pub n_e: f64,
    pub plate_thickness: f64,
    /// Linear polarization angle from the crystal X axis, in the X–Y plane.
    pub polarization_angle: f64,
    pub c1: f64,
    pub c2: f64,
}

impl OpticalConfig {
    pub fn new(
        wavelength: f64,
        n_o: f64,
        n_e: f64,
        plate_thickness: f64,
        polarization_angle: f64,
        c1: f64,
        c2: f64,
    ) -> Result<Self, PhotoelasticError> {
        Ok(Self {
            wavelength: check("wavelength", wavelength, wavelength > 0.0)?,
            n_o: check("n_o", n_o, n_o > 1.0)?,
            n_e: check("n_e", n_e, n_e > 1.0)?,
            plate_thickness: check("plate_thickness", plate_thickness, plate_thickness > 0.0)?,
            polarization_angle: check("polarization_angle", polarization_angle, true)?,
            c1: check("c1", c1, c1 >= 0.0)?,
            c2: check("c2", c2, c2 >= 0.0)?,
        })
    }

    /// Quartz at 1064 nm with normal-incidence Fresnel amplitudes:
    /// c₁ = (n_o − 1)/(n_o + 1) off the front face, c₂ = (1 − c₁²)·c₁ for the
    /// back-face reflection transmitted twice through the front face.
    pub fn quartz(plate_thickness: f64) -> Result<Self, PhotoelasticError> {
        let n_o = 1.528;
        let (c1, c2) = fresnel_amplitudes(n_o);
        Self::new(1064e-9, n_o, 1.536, plate_thickness, 0.0, c1, c2)
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }
}

/// Default (c₁, c₂) for a plate of index `n` in air.
pub fn fresnel_amplitudes(n: f64) -> (f64, f64) {
    let r = (n - 1.0) / (n + 1.0);
    (r, (1.0 - r * r) * r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandingWaveMode {
    pub defect_width: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

impl StandingWaveMode {
    pub fn new(defect_width: f64, amplitude: f64, frequency: f64) -> Result<Self, PhotoelasticError> {
        Ok(Self {
            defect_width: check("defect_width", defect_width, defect_width > 0.0)?,
            amplitude: check("u0", amplitude, amplitude >= 0.0)?,
            frequency: check("f_m", frequency, frequency > 0.0)?,
        })
    }

    /// S₀ = u₀·π/L.
    pub fn peak_strain(&self) -> f64 {
        self.amplitude * PI / self.defect_width
    }

    fn check_inside(&self, y: f64) -> Result<(), PhotoelasticError> {
        let half_width = 0.5 * self.defect_width;
        if y.is_finite() && y.abs() <= half_width * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(PhotoelasticError::OutOfDefect { y, half_width })
        }
    }

    /// u(y, t) = u₀·sin(πy/L)·sin(ω_m t).
    pub fn displacement(&self, y: f64, t: f64) -> Result<f64, PhotoelasticError> {
        self.check_inside(y)?;
        Ok(self.amplitude * (PI * y / self.defect_width).sin() * (TAU * self.frequency * t).sin())
    }
}

/// S_yy(y, t) = S₀·cos(πy/L)·sin(ω_m t).
pub fn strain_field(mode: &StandingWaveMode, y: f64, t: f64) -> Result<f64, PhotoelasticError> {
    mode.check_inside(y)?;
    Ok(mode.peak_strain() * (PI * y / mode.defect_width).cos() * (TAU * mode.frequency * t).sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalIndices {
    pub n_x: f64,
    pub n_y: f64,
    pub n_z: f64,
    /// Rotation of the principal axes in the Y–Z plane.
    pub theta: f64,
}

/// First-order principal indices under a pure S_yy strain.
pub fn principal_indices(
    p: &PhotoelasticTensor,
    config: &OpticalConfig,
    s_yy: f64,
) -> Result<PrincipalIndices, PhotoelasticError> {
    if !(s_yy.is_finite() && s_yy.abs() < SMALL_STRAIN_BOUND) {
        return Err(PhotoelasticError::StrainTooLarge { index: 1, value: s_yy });
    }
    let (no, ne) = (config.n_o, config.n_e);
    let byy = 1.0 / (no * no) + p.p11() * s_yy;
    let bzz = 1.0 / (ne * ne) + p.p31() * s_yy;
    let theta = 0.5 * (-2.0 * p.p41() * s_yy).atan2(byy - bzz);
    Ok(PrincipalIndices {
        n_x: no - 0.5 * no.powi(3) * p.p12() * s_yy,
        n_y: no - 0.5 * no.powi(3) * p.p11() * s_yy,
        n_z: ne - 0.5 * ne.powi(3) * p.p31() * s_yy,
        theta,
    })
}

/// Exact principal indices from the eigenvalues of the strained
/// impermeability tensor, ordered to match (n_x, n_y, n_z).
pub fn exact_principal_indices(p: &PhotoelasticTensor, config: &OpticalConfig, s_yy: f64) -> [f64; 3] {
    let (no, ne) = (config.n_o, config.n_e);
    let d = p.p * Vector6::new(0.0, s_yy, 0.0, 0.0, 0.0, 0.0);
    #[rustfmt::skip]
    let b = Matrix3::new(
        1.0 / (no * no) + d[0], d[5],                   d[4],
        d[5],                   1.0 / (no * no) + d[1], d[3],
        d[4],                   d[3],                   1.0 / (ne * ne) + d[2],
    );
    let eig = b.symmetric_eigen();
    // match each eigenvector to the crystal axis it is closest to
    let mut out = [0.0; 3];
    for k in 0..3 {
        let v = eig.eigenvectors.column(k);
        let axis = (0..3).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).expect("3 components");
        out[axis] = 1.0 / eig.eigenvalues[k].sqrt();
    }
    out
}

/// Round-trip phase δ₀ = n_o·k·2T_p and modulation depth
/// M = k·T_p·n_o³·p_eff·S₀·cos(πy/L), signed.
pub fn phase_modulation(
    p: &PhotoelasticTensor,
    config: &OpticalConfig,
    mode: &StandingWaveMode,
    y: f64,
) -> Result<(f64, f64), PhotoelasticError> {
    mode.check_inside(y)?;
    let k = config.wavenumber();
    let delta0 = config.n_o * k * 2.0 * config.plate_thickness;
    let p_eff = p.effective_coefficient(config.polarization_angle);
    let m = k
        * config.plate_thickness
        * config.n_o.powi(3)
        * p_eff
        * mode.peak_strain()
        * (PI * y / mode.defect_width).cos();
    Ok((delta0, m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationResult {
    pub delta0: f64,
    /// |M|; the sign of the strain is carried by `modulation_sign`.
    pub m: f64,
    pub modulation_sign: f64,
    pub dc_power: f64,
    /// Bracketed coefficient 4c₁c₂·sin δ₀·J₁(M).
    pub beat_amplitude: f64,
}

impl ModulationResult {
    /// Actual coefficient of sin(ω_m t) in I, half the bracketed form.
    pub fn single_sided(&self) -> f64 {
        0.5 * self.beat_amplitude
    }

    /// [`Self::single_sided`] including the strain sign.
    pub fn signed_single_sided(&self) -> f64 {
        self.modulation_sign * self.single_sided()
    }
}

const MODULATION_WARN: f64 = 0.5;

/// Bessel-expanded detected power at position `y`.
pub fn detected_power(
    p: &PhotoelasticTensor,
    config: &OpticalConfig,
    mode: &StandingWaveMode,
    y: f64,
) -> Result<ModulationResult, PhotoelasticError> {
    let (delta0, m_signed) = phase_modulation(p, config, mode, y)?;
    let m = m_signed.abs();
    if m >= 1.0 {
        return Err(PhotoelasticError::ModulationTooLarge(m));
    }
    if m > MODULATION_WARN {
        log::warn!("modulation depth M = {m:.3} is above 0.5; higher harmonics are significant");
    }
    let (c1, c2) = (config.c1, config.c2);
    Ok(ModulationResult {
        delta0,
        m,
        modulation_sign: if m_signed < 0.0 { -1.0 } else { 1.0 },
        dc_power: 0.5 * (c1 * c1 + c2 * c2 + 2.0 * c1 * c2 * delta0.cos() * libm::j0(m)),
        beat_amplitude: 4.0 * c1 * c2 * delta0.sin() * libm::j1(m),
    })
}

/// Exact interference signal I(t) without the Bessel expansion.
pub fn instantaneous_power(config: &OpticalConfig, delta0: f64, m_signed: f64, phase: f64) -> f64 {
    let (c1, c2) = (config.c1, config.c2);
    0.5 * (c1 * c1 + c2 * c2 + 2.0 * c1 * c2 * (delta0 - m_signed * phase.sin()).cos())
}

/// 10·log10((p12/p11)²), the X- versus Y-polarized signal power ratio.
pub fn polarization_contrast(p: &PhotoelasticTensor) -> f64 {
    10.0 * (p.p12() / p.p11()).powi(2).log10()
}

/// Normalized beat amplitude across a scanned envelope.
///
/// Each entry of `envelope` is (position, relative mode amplitude); the
/// template mode is rescaled by that amplitude and read out at its antinode.
/// The output is normalized to the entry whose envelope is largest (the
/// defect); an all-zero envelope gives all zeros.
pub fn mode_profile_scan(
    envelope: &[(f64, f64)],
    p: &PhotoelasticTensor,
    config: &OpticalConfig,
    template: &StandingWaveMode,
) -> Result<Vec<(f64, f64)>, PhotoelasticError> {
    let signals = envelope
        .iter()
        .map(|&(pos, amp)| {
            let mode = StandingWaveMode::new(template.defect_width, template.amplitude * amp.abs(), template.frequency)?;
            Ok((pos, detected_power(p, config, &mode, 0.0)?.single_sided().abs()))
        })
        .collect::<Result<Vec<_>, PhotoelasticError>>()?;
    let reference = envelope
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.abs().total_cmp(&b.1 .1.abs()))
        .map(|(i, _)| signals[i].1)
        .unwrap_or(0.0);
    Ok(signals
        .into_iter()
        .map(|(pos, s)| (pos, if reference > 0.0 { s / reference } else { 0.0 }))
        .collect())
}
