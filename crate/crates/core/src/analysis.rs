//! Resonance and ringdown extraction.
//!
//! Lifetimes follow the energy-decay convention τ = Q/ω: a ringdown trace is
//! taken to be proportional to stored energy, so its exponential time
//! constant is compared to Q/ω directly.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::fit::{least_squares, FitError, FitOptions};
use crate::quantities::{FrequencyTrace, TimeTrace};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("no resonance found: {0}")]
    NoPeakFound(String),
    #[error("trace does not decay (τ = {tau:e} s over a {span:e} s span)")]
    NonDecayingTrace { tau: f64, span: f64 },
    #[error("{field} must be positive and finite, got {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Complex Lorentzian B + A/(1 + 2i(f − f0)/κ), κ = f0/Q.
pub fn lorentzian(f: f64, f0: f64, q: f64, amplitude: Complex64, background: Complex64) -> Complex64 {
    let kappa = f0 / q;
    background + amplitude / Complex64::new(1.0, 2.0 * (f - f0) / kappa)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceFit {
    pub f0: f64,
    pub q: f64,
    /// Real and positive for a magnitude fit.
    pub amplitude: Complex64,
    pub background: Complex64,
    pub sigma_f0: f64,
    pub sigma_q: f64,
    pub sigma_amplitude: f64,
    pub sigma_background: f64,
    pub residual_norm: f64,
}

impl ResonanceFit {
    /// Full width at half power, f0/Q.
    pub fn linewidth(&self) -> f64 {
        self.f0 / self.q
    }
}

const MIN_TRACE_POINTS: usize = 20;
/// Fitted peak must stand this far above the residual rms.
const PEAK_TO_NOISE: f64 = 5.0;

struct Seed {
    f0: f64,
    kappa: f64,
    amplitude: Complex64,
    background: Complex64,
    scale: f64,
}

/// Peak location and half-power width of |z − b| with b from the trace edges.
fn seed(f: &[f64], z: &[Complex64]) -> Result<Seed, AnalysisError> {
    let n = f.len();
    let edge = (n / 20).max(1);
    let background = (z[..edge].iter().chain(&z[n - edge..]).sum::<Complex64>()) / (2 * edge) as f64;
    let h: Vec<f64> = z.iter().map(|v| (v - background).norm()).collect();
    let scale = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (ip, &hp) = h
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty trace");
    if !(hp > 1e-12 * scale) {
        return Err(AnalysisError::NoPeakFound("trace is flat".into()));
    }
    let half = hp / 2f64.sqrt();
    let dist = |i: usize| (f[i] - f[ip]).abs();
    let right = (ip..n).find(|&i| h[i] < half).map(dist);
    let left = (0..=ip).rev().find(|&i| h[i] < half).map(dist);
    let width = match (left, right) {
        (Some(l), Some(r)) => l + r,
        (Some(d), None) | (None, Some(d)) => 2.0 * d,
        (None, None) => return Err(AnalysisError::NoPeakFound("no half-power crossing in window".into())),
    };
    Ok(Seed {
        f0: f[ip],
        kappa: width.max(f[1] - f[0]),
        amplitude: z[ip] - background,
        background,
        scale: if scale > 0.0 { scale } else { 1.0 },
    })
}

fn check_trace(trace: &FrequencyTrace) -> Result<(), AnalysisError> {
    if trace.len() < MIN_TRACE_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_TRACE_POINTS,
            got: trace.len(),
        });
    }
    Ok(())
}

fn finish(trace: &FrequencyTrace, fit: ResonanceFit) -> Result<ResonanceFit, AnalysisError> {
    let f = trace.frequencies();
    let (lo, hi) = (f[0], f[f.len() - 1]);
    if !(fit.f0 >= lo && fit.f0 <= hi) {
        return Err(AnalysisError::NoPeakFound(format!("fitted f0 = {} outside the window", fit.f0)));
    }
    if !(fit.q > 0.0 && fit.q.is_finite()) {
        return Err(AnalysisError::NoPeakFound(format!("fitted Q = {}", fit.q)));
    }
    let rms = fit.residual_norm / (trace.len() as f64).sqrt();
    if fit.amplitude.norm() < PEAK_TO_NOISE * rms {
        return Err(AnalysisError::NoPeakFound(format!(
            "peak amplitude {:e} below {PEAK_TO_NOISE}× residual rms {rms:e}",
            fit.amplitude.norm()
        )));
    }
    Ok(fit)
}

/// Fit |B + A/(1 + 2i(f − f0)/κ)| to the trace magnitude.
///
/// Initialization: f0 at the maximum of |z − b̄| (b̄ = mean of the outer 5%
/// on each side), κ from the half-power crossings, A from the peak height.
/// The model depends on f − f0 and κ only, so the fit is exactly covariant
/// under frequency offsets; Q is reported as f0/κ.
pub fn fit_lorentzian(trace: &FrequencyTrace) -> Result<ResonanceFit, AnalysisError> {
    check_trace(trace)?;
    let f = trace.frequencies();
    let mag = trace.magnitudes();
    let zmag: Vec<Complex64> = mag.iter().map(|&m| Complex64::new(m, 0.0)).collect();
    let s = seed(f, &zmag)?;
    let model = |x: &[f64], fi: f64| {
        let f0 = s.f0 + x[0] * s.kappa;
        let kappa = s.kappa * x[1].exp();
        let a = Complex64::new(x[2] * s.scale, 0.0);
        let b = Complex64::new(x[3], x[4]) * s.scale;
        (b + a / Complex64::new(1.0, 2.0 * (fi - f0) / kappa)).norm()
    };
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let r: Vec<f64> = f.iter().zip(&mag).map(|(&fi, &m)| (model(x, fi) - m) / s.scale).collect();
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let init = [0.0, 0.0, s.amplitude.re / s.scale, s.background.re / s.scale, 0.0];
    let out = least_squares(residual, &init, FitOptions::default())?;
    let x = &out.params;
    // |·| is invariant under (A, B) → (−A, −B)
    let sign = if x[2] < 0.0 { -1.0 } else { 1.0 };
    let f0 = s.f0 + x[0] * s.kappa;
    let kappa = s.kappa * x[1].exp();
    let q = f0 / kappa;
    let sig_f0 = out.sigma[0] * s.kappa;
    let fit = ResonanceFit {
        f0,
        q,
        amplitude: Complex64::new(sign * x[2] * s.scale, 0.0),
        background: Complex64::new(sign * x[3], sign * x[4]) * s.scale,
        sigma_f0: sig_f0,
        sigma_q: q * (out.sigma[1].powi(2) + (sig_f0 / f0).powi(2)).sqrt(),
        sigma_amplitude: out.sigma[2] * s.scale,
        sigma_background: out.sigma[3].hypot(out.sigma[4]) * s.scale,
        residual_norm: out.residual_norm * s.scale,
    };
    finish(trace, fit)
}

/// Fit the complex response B + A/(1 + 2i(f − f0)/κ) with complex A and B.
pub fn fit_lorentzian_complex(trace: &FrequencyTrace) -> Result<ResonanceFit, AnalysisError> {
    check_trace(trace)?;
    let f = trace.frequencies();
    let z = trace.response();
    let s = seed(f, z)?;
    let model = |x: &[f64], fi: f64| {
        let f0 = s.f0 + x[0] * s.kappa;
        let kappa = s.kappa * x[1].exp();
        let a = Complex64::new(x[2], x[3]) * s.scale;
        let b = Complex64::new(x[4], x[5]) * s.scale;
        b + a / Complex64::new(1.0, 2.0 * (fi - f0) / kappa)
    };
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let mut r = Vec::with_capacity(2 * f.len());
        for (&fi, zi) in f.iter().zip(z) {
            let d = (model(x, fi) - zi) / s.scale;
            r.push(d.re);
            r.push(d.im);
        }
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let init = [
        0.0,
        0.0,
        s.amplitude.re / s.scale,
        s.amplitude.im / s.scale,
        s.background.re / s.scale,
        s.background.im / s.scale,
    ];
    let out = least_squares(residual, &init, FitOptions::default())?;
    let x = &out.params;
    let f0 = s.f0 + x[0] * s.kappa;
    let q = f0 / (s.kappa * x[1].exp());
    let sig_f0 = out.sigma[0] * s.kappa;
    let fit = ResonanceFit {
        f0,
        q,
        amplitude: Complex64::new(x[2], x[3]) * s.scale,
        background: Complex64::new(x[4], x[5]) * s.scale,
        sigma_f0: sig_f0,
        sigma_q: q * (out.sigma[1].powi(2) + (sig_f0 / f0).powi(2)).sqrt(),
        sigma_amplitude: out.sigma[2].hypot(out.sigma[3]) * s.scale,
        sigma_background: out.sigma[4].hypot(out.sigma[5]) * s.scale,
        residual_norm: out.residual_norm * s.scale,
    };
    finish(trace, fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingdownFit {
    pub tau: f64,
    pub initial_amplitude: f64,
    pub offset: f64,
    /// 1σ for (τ, A, offset); zero for the two-point closed form.
    pub sigma: [f64; 3],
    pub residual_norm: f64,
}

impl RingdownFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.offset + self.initial_amplitude * (-t / self.tau).exp()
    }
}

/// τ above this multiple of the span counts as non-decaying.
const MAX_TAU_OVER_SPAN: f64 = 100.0;

/// Fit offset + A·exp(−t/τ).
///
/// Two points are solved in closed form without an offset. Otherwise at
/// least 20 points are needed; the seed comes from three window averages at
/// the start, middle and end of the trace.
pub fn fit_ringdown(trace: &TimeTrace) -> Result<RingdownFit, AnalysisError> {
    let t = trace.times();
    let y = trace.amplitude();
    let span = trace.span();
    if trace.len() == 2 {
        let (y1, y2) = (y[0], y[1]);
        if !(y1 > y2 && y2 > 0.0) {
            return Err(AnalysisError::NonDecayingTrace {
                tau: f64::INFINITY,
                span,
            });
        }
        let tau = span / (y1 / y2).ln();
        return Ok(RingdownFit {
            tau,
            initial_amplitude: y1 * (t[0] / tau).exp(),
            offset: 0.0,
            sigma: [0.0; 3],
            residual_norm: 0.0,
        });
    }
    if trace.len() < MIN_TRACE_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_TRACE_POINTS,
            got: trace.len(),
        });
    }
    let n = y.len();
    let w = (n / 20).max(1);
    let avg = |c: usize| {
        let lo = c.saturating_sub(w / 2).min(n - w);
        let ts = t[lo..lo + w].iter().sum::<f64>() / w as f64;
        (ts, y[lo..lo + w].iter().sum::<f64>() / w as f64)
    };
    let ((t1, y1), (tm, ym), (t2, y2)) = (avg(0), avg(n / 2), avg(n - 1));
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let not_decaying = || AnalysisError::NonDecayingTrace {
        tau: f64::INFINITY,
        span,
    };
    if !(scale > 0.0) || !(y1 - ym > 0.0 && ym - y2 > 0.0) {
        return Err(not_decaying());
    }
    // equal half-intervals: (y1 − ym)/(ym − y2) = exp(Δ/τ)
    let dt = 0.5 * ((tm - t1) + (t2 - tm));
    let ratio = (y1 - ym) / (ym - y2);
    let (tau0, c0) = if ratio > 1.0 {
        (dt / ratio.ln(), (y1 * y2 - ym * ym) / (y1 + y2 - 2.0 * ym))
    } else {
        (span / 2.0, y2)
    };
    let a0 = (y1 - c0) * (t1 / tau0).exp();
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let tau = tau0 * x[0].exp();
        let r: Vec<f64> = t
            .iter()
            .zip(y)
            .map(|(&ti, &yi)| (x[2] * scale + x[1] * scale * (-(ti - t[0]) / tau).exp() - yi) / scale)
            .collect();
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let a0_shifted = a0 * (-t[0] / tau0).exp();
    let out = least_squares(residual, &[0.0, a0_shifted / scale, c0 / scale], FitOptions::default())?;
    let x = &out.params;
    let tau = tau0 * x[0].exp();
    let amp_at_start = x[1] * scale;
    if tau > MAX_TAU_OVER_SPAN * span || amp_at_start <= 0.0 {
        return Err(AnalysisError::NonDecayingTrace { tau, span });
    }
    if span < 2.0 * tau {
        log::warn!("ringdown spans {:.2} τ; fewer than 2 time constants", span / tau);
    }
    Ok(RingdownFit {
        tau,
        initial_amplitude: amp_at_start * (t[0] / tau).exp(),
        offset: x[2] * scale,
        sigma: [
            tau * out.sigma[0],
            out.sigma[1] * scale * (t[0] / tau).exp(),
            out.sigma[2] * scale,
        ],
        residual_norm: out.residual_norm * scale,
    })
}

/// |Q − ωτ|/Q under the energy-decay convention τ = Q/ω.
pub fn q_tau_consistency(q: f64, f: f64, tau: f64) -> Result<f64, AnalysisError> {
    for (field, value) in [("Q", q), ("f", f), ("tau", tau)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(AnalysisError::InvalidParameter { field, value });
        }
    }
    Ok((q - TAU * f * tau).abs() / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synth(f0: f64, q: f64, a: Complex64, b: Complex64, points: usize, half_widths: f64) -> FrequencyTrace {
        let k = f0 / q;
        let f: Vec<f64> = (0..points)
            .map(|i| f0 - half_widths * k + 2.0 * half_widths * k * i as f64 / (points - 1) as f64)
            .collect();
        let z = f.iter().map(|&fi| lorentzian(fi, f0, q, a, b)).collect();
        FrequencyTrace::new(f, z).unwrap()
    }

    fn noisy_magnitude(trace: &FrequencyTrace, rel: f64, seed: u64) -> FrequencyTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mag = trace.magnitudes();
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        let noise = Normal::new(0.0, rel * peak).unwrap();
        let m = mag.iter().map(|&v| v + noise.sample(&mut rng)).collect();
        FrequencyTrace::from_magnitude(trace.frequencies().to_vec(), m).unwrap()
    }

    #[test]
    fn noiseless_round_trip() {
        let tr = synth(97.2e6, 6.8e5, Complex64::new(1.0, 0.0), Complex64::new(0.05, 0.02), 401, 8.0);
        let fit = fit_lorentzian(&tr).unwrap();
        assert!(fit.residual_norm < 1e-10, "{}", fit.residual_norm);
        assert!((fit.q / 6.8e5 - 1.0).abs() < 1e-8);
        assert!((fit.f0 - 97.2e6).abs() < 1e-6);
        let cfit = fit_lorentzian_complex(&tr).unwrap();
        assert!(cfit.residual_norm < 1e-10);
        assert!((cfit.background - Complex64::new(0.05, 0.02)).norm() < 1e-9);
    }

    #[test]
    fn noisy_q_within_two_percent() {
        let clean = synth(97.2e6, 6.8e5, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 401, 10.0);
        for seed in 0..5 {
            let fit = fit_lorentzian(&noisy_magnitude(&clean, 0.01, seed)).unwrap();
            assert!((fit.q / 6.8e5 - 1.0).abs() < 0.02, "seed {seed}: Q = {}", fit.q);
            assert!(fit.sigma_q > 0.0);
        }
    }

    #[test]
    fn flat_trace_has_no_peak() {
        let f: Vec<f64> = (0..100).map(|i| 97e6 + i as f64).collect();
        let flat = FrequencyTrace::from_magnitude(f.clone(), vec![0.3; 100]).unwrap();
        assert!(matches!(fit_lorentzian(&flat), Err(AnalysisError::NoPeakFound(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let m = (0..100).map(|_| 0.3 + noise.sample(&mut rng)).collect();
        let noisy = FrequencyTrace::from_magnitude(f, m).unwrap();
        assert!(fit_lorentzian(&noisy).is_err());
        let short = synth(97.2e6, 1e4, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 10, 5.0);
        assert!(matches!(fit_lorentzian(&short), Err(AnalysisError::TooFewPoints { .. })));
    }

    #[test]
    fn amplitude_scaling_invariance() {
        let clean = synth(97.2e6, 6.8e5, Complex64::new(1.0, 0.0), Complex64::new(0.02, 0.0), 301, 8.0);
        let tr = noisy_magnitude(&clean, 0.01, 3);
        let scaled = FrequencyTrace::from_magnitude(
            tr.frequencies().to_vec(),
            tr.magnitudes().iter().map(|m| 37.5 * m).collect(),
        )
        .unwrap();
        let (a, b) = (fit_lorentzian(&tr).unwrap(), fit_lorentzian(&scaled).unwrap());
        assert!((a.q / b.q - 1.0).abs() < 1e-9);
        assert!((a.f0 - b.f0).abs() < 1e-9 * a.f0);
    }

    #[test]
    fn frequency_offset_covariance() {
        let clean = synth(97.2e6, 6.8e5, Complex64::new(1.0, 0.0), Complex64::new(0.02, 0.0), 301, 8.0);
        let tr = noisy_magnitude(&clean, 0.01, 4);
        let shift = 1.5e3;
        let moved = FrequencyTrace::from_magnitude(
            tr.frequencies().iter().map(|f| f + shift).collect(),
            tr.magnitudes(),
        )
        .unwrap();
        let (a, b) = (fit_lorentzian(&tr).unwrap(), fit_lorentzian(&moved).unwrap());
        assert!((b.f0 - a.f0 - shift).abs() < 1e-6);
        assert!((b.linewidth() / a.linewidth() - 1.0).abs() < 1e-7);
    }

    fn ringdown_trace(tau: f64, a: f64, c: f64, n: usize, span: f64) -> TimeTrace {
        let t: Vec<f64> = (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect();
        let y = t.iter().map(|&ti| c + a * (-ti / tau).exp()).collect();
        TimeTrace::new(t, y).unwrap()
    }

    #[test]
    fn ringdown_noisy_within_one_percent() {
        let clean = ringdown_trace(1.023e-3, 1.0, 0.0, 1000, 5e-3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = clean.amplitude().iter().map(|v| v + noise.sample(&mut rng)).collect();
            let tr = TimeTrace::new(clean.times().to_vec(), y).unwrap();
            let fit = fit_ringdown(&tr).unwrap();
            assert!((fit.tau / 1.023e-3 - 1.0).abs() < 0.01, "seed {seed}: {}", fit.tau);
        }
    }

    #[test]
    fn ringdown_with_offset_noiseless() {
        let tr = ringdown_trace(1.023e-3, 2.0, 0.3, 100, 4e-3);
        let fit = fit_ringdown(&tr).unwrap();
        assert!((fit.tau / 1.023e-3 - 1.0).abs() < 1e-9);
        assert!((fit.offset - 0.3).abs() < 1e-9);
        assert!(fit.residual_norm < 1e-10);
        let scaled = TimeTrace::new(tr.times().to_vec(), tr.amplitude().iter().map(|v| 1e-3 * v).collect()).unwrap();
        assert!((fit_ringdown(&scaled).unwrap().tau / fit.tau - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ringdown_degenerate_cases() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 1e-4).collect();
        let flat = TimeTrace::new(t, vec![1.0; 50]).unwrap();
        assert!(matches!(fit_ringdown(&flat), Err(AnalysisError::NonDecayingTrace { .. })));

        let two = TimeTrace::new(vec![1e-4, 3e-4], vec![(-1e-4f64 / 1.023e-3).exp(), (-3e-4f64 / 1.023e-3).exp()])
            .unwrap();
        let fit = fit_ringdown(&two).unwrap();
        assert!((fit.tau / 1.023e-3 - 1.0).abs() < 1e-12);
        assert!((fit.initial_amplitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn consistency_values() {
        let d = q_tau_consistency(6.25e5, 97.2e6, 1.023e-3).unwrap();
        assert!(d < 1e-3, "{d}");
        let tau = 6.25e5 / (TAU * 97.2e6);
        assert!(q_tau_consistency(6.25e5, 97.2e6, tau).unwrap() < 1e-15);
        assert!((q_tau_consistency(6.25e5, 97.2e6, 2.0 * tau).unwrap() - 1.0).abs() < 1e-12);
        assert!(q_tau_consistency(0.0, 97.2e6, tau).is_err());
    }
}
