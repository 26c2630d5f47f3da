//! Shared physical quantities, constants and thermal formulas.
//!
//! Every public interface in this crate takes ordinary frequency in Hz.
//! Angular frequency only appears internally, through [`Frequency::angular`].

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// CODATA 2018 exact / recommended values in SI units.
pub mod constants {
    /// Reduced Planck constant, J·s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Planck constant, J·s.
    pub const H: f64 = 6.626_070_15e-34;
    /// Boltzmann constant, J/K.
    pub const K_B: f64 = 1.380_649e-23;
    /// Speed of light in vacuum, m/s.
    pub const C: f64 = 299_792_458.0;
    /// Elementary charge, C.
    pub const E: f64 = 1.602_176_634e-19;
}

/// Read-only bundle of the constants above, for callers that want to pass
/// them around as a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_b: f64,
    pub c: f64,
    pub e: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: constants::HBAR,
        k_b: constants::K_B,
        c: constants::C,
        e: constants::E,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantityError {
    #[error("frequency must be finite and > 0, got {0} Hz")]
    InvalidFrequency(f64),
    #[error("temperature must be finite and >= 0, got {0} K")]
    InvalidTemperature(f64),
    #[error("trace lengths differ: {axis} axis has {axis_len} samples, values have {values_len}")]
    LengthMismatch {
        axis: &'static str,
        axis_len: usize,
        values_len: usize,
    },
    #[error("{axis} axis must be strictly increasing (violated at index {index})")]
    NotIncreasing { axis: &'static str, index: usize },
}

/// Ordinary frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Frequency(f64);

impl Frequency {
    pub fn new(hz: f64) -> Result<Self, QuantityError> {
        if hz.is_finite() && hz > 0.0 {
            Ok(Self(hz))
        } else {
            Err(QuantityError::InvalidFrequency(hz))
        }
    }

    pub fn from_angular(omega: f64) -> Result<Self, QuantityError> {
        Self::new(omega / TAU)
    }

    #[inline]
    pub fn hz(self) -> f64 {
        self.0
    }

    /// ω = 2πf in rad/s.
    #[inline]
    pub fn angular(self) -> f64 {
        TAU * self.0
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Hz", self.0)
    }
}

/// Absolute temperature in kelvin. Zero is allowed everywhere.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Temperature(f64);

impl Temperature {
    pub const ZERO: Temperature = Temperature(0.0);

    pub fn new(kelvin: f64) -> Result<Self, QuantityError> {
        if kelvin.is_finite() && kelvin >= 0.0 {
            Ok(Self(kelvin))
        } else {
            Err(QuantityError::InvalidTemperature(kelvin))
        }
    }

    #[inline]
    pub fn kelvin(self) -> f64 {
        self.0
    }
}

fn check_increasing(axis: &'static str, xs: &[f64]) -> Result<(), QuantityError> {
    for (i, w) in xs.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(QuantityError::NotIncreasing { axis, index: i + 1 });
        }
    }
    Ok(())
}

/// Complex response sampled on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrace {
    frequencies: Vec<f64>,
    response: Vec<Complex64>,
}

impl FrequencyTrace {
    pub fn new(frequencies: Vec<f64>, response: Vec<Complex64>) -> Result<Self, QuantityError> {
        if frequencies.len() != response.len() {
            return Err(QuantityError::LengthMismatch {
                axis: "frequency",
                axis_len: frequencies.len(),
                values_len: response.len(),
            });
        }
        check_increasing("frequency", &frequencies)?;
        Ok(Self {
            frequencies,
            response,
        })
    }

    /// Magnitude-only trace (zero phase).
    pub fn from_magnitude(frequencies: Vec<f64>, magnitude: Vec<f64>) -> Result<Self, QuantityError> {
        let response = magnitude.into_iter().map(|m| Complex64::new(m, 0.0)).collect();
        Self::new(frequencies, response)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn response(&self) -> &[Complex64] {
        &self.response
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.response.iter().map(|z| z.norm()).collect()
    }
}

/// Real amplitude sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    times: Vec<f64>,
    amplitude: Vec<f64>,
}

impl TimeTrace {
    pub fn new(times: Vec<f64>, amplitude: Vec<f64>) -> Result<Self, QuantityError> {
        if times.len() != amplitude.len() {
            return Err(QuantityError::LengthMismatch {
                axis: "time",
                axis_len: times.len(),
                values_len: amplitude.len(),
            });
        }
        check_increasing("time", &times)?;
        Ok(Self { times, amplitude })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// Bose–Einstein occupation n̄ = 1/(exp(ħω/k_BT) − 1); zero at T = 0.
pub fn thermal_occupation(f: Frequency, t: Temperature) -> f64 {
    if t.kelvin() == 0.0 {
        return 0.0;
    }
    let x = constants::HBAR * f.angular() / (constants::K_B * t.kelvin());
    1.0 / x.exp_m1()
}

/// Thermal decoherence time τ = 1/((n̄ + 1)·Γ) with Γ = ω/Q.
///
/// Tends to Q/ω when ħω ≫ k_BT and to ħQ/(k_BT) when ħω ≪ k_BT.
pub fn thermal_decoherence_time(q: f64, f: Frequency, t: Temperature) -> f64 {
    let gamma = f.angular() / q;
    1.0 / ((thermal_occupation(f, t) + 1.0) * gamma)
}

/// Energy lifetime τ = Q/ω.
pub fn lifetime_from_q(q: f64, f: Frequency) -> f64 {
    q / f.angular()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hz(v: f64) -> Frequency {
        Frequency::new(v).unwrap()
    }

    fn k(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    #[test]
    fn occupation_is_zero_at_zero_temperature() {
        assert_eq!(thermal_occupation(hz(100e6), Temperature::ZERO), 0.0);
    }

    #[test]
    fn occupation_at_unit_ratio() {
        let f = hz(100e6);
        let t = k(constants::HBAR * f.angular() / constants::K_B);
        let n = thermal_occupation(f, t);
        assert!((n - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-12);
        assert!((n - 0.58198).abs() < 1e-5);
    }

    #[test]
    fn occupation_at_dilution_fridge_point() {
        // x = ħω/kT evaluated separately; the series 1/x − 1/2 + x/12 − x³/720 + x^5/30240
        // converges quickly at x ≈ 0.467 and is independent of exp_m1.
        let f = hz(97.2e6);
        let t = k(10e-3);
        let x = constants::HBAR * TAU * 97.2e6 / (constants::K_B * 10e-3);
        let series = 1.0 / x - 0.5 + x / 12.0 - x.powi(3) / 720.0 + x.powi(5) / 30240.0
            - x.powi(7) / 1_209_600.0;
        let n = thermal_occupation(f, t);
        assert!((n - series).abs() / n < 1e-8, "{n} vs {series}");
        assert!((n - 1.6823).abs() < 1e-3);
    }

    #[test]
    fn decoherence_time_high_frequency_limit() {
        let f = hz(1e9);
        let tau = thermal_decoherence_time(1e6, f, Temperature::ZERO);
        assert!((tau - 1e6 / f.angular()).abs() / tau < 1e-15);
        assert!((tau - 1.59e-4).abs() < 0.01e-4);
    }

    #[test]
    fn decoherence_time_sits_below_both_asymptotes() {
        let (q, f, t) = (6.8e5, hz(97.2e6), k(10e-3));
        let tau = thermal_decoherence_time(q, f, t);
        let high_f = q / f.angular();
        let low_f = constants::HBAR * q / (constants::K_B * t.kelvin());
        // with n̄+1, τ ≤ min of the asymptotes and ≥ 1/(Γ(1 + k_BT/ħω))
        let gamma = f.angular() / q;
        let x = constants::HBAR * f.angular() / (constants::K_B * t.kelvin());
        let lower = 1.0 / (gamma * (1.0 + 1.0 / x));
        assert!(tau <= high_f.min(low_f));
        assert!(tau >= lower);
        assert!(tau > 3e-4 && tau < 5e-4, "tau = {tau}");
    }

    #[test]
    fn decoherence_time_is_continuous_at_zero_temperature() {
        let (q, f) = (1e6, hz(100e6));
        let t0 = thermal_decoherence_time(q, f, Temperature::ZERO);
        let t_small = thermal_decoherence_time(q, f, k(1e-6));
        assert!((t0 - t_small).abs() / t0 < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Frequency::new(0.0).is_err());
        assert!(Frequency::new(f64::NAN).is_err());
        assert!(Temperature::new(-1.0).is_err());
        assert!(FrequencyTrace::new(vec![1.0, 1.0], vec![Complex64::new(0.0, 0.0); 2]).is_err());
        assert!(TimeTrace::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn angular_round_trip(f in 1.0e3f64..1.0e12) {
            let freq = hz(f);
            prop_assert!((Frequency::from_angular(freq.angular()).unwrap().hz() / f - 1.0).abs() < 4.0 * f64::EPSILON);
        }

        #[test]
        fn occupation_monotone(f in 1.0e6f64..1.0e10, t in 1.0e-3f64..300.0, s in 1.01f64..3.0) {
            let n = thermal_occupation(hz(f), k(t));
            prop_assert!(thermal_occupation(hz(f), k(t * s)) >= n);
            prop_assert!(thermal_occupation(hz(f * s), k(t)) <= n);
        }

        #[test]
        fn decoherence_time_non_increasing_in_t(q in 1.0e3f64..1.0e8, f in 1.0e6f64..1.0e10,
                                                t in 0.0f64..300.0, dt in 0.0f64..10.0) {
            let a = thermal_decoherence_time(q, hz(f), k(t));
            let b = thermal_decoherence_time(q, hz(f), k(t + dt));
            prop_assert!(b <= a * (1.0 + 1e-14));
        }
    }
}
