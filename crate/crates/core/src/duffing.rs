//! Driven Duffing resonator in the single-harmonic (harmonic balance)
//! approximation.
//!
//! The steady-state amplitude a at drive frequency ω satisfies
//!
//! ```text
//! a²[(ω₀² − ω² + ¾βa²)² + (ω₀ω/Q)²] = F²
//! ```
//!
//! with ω, ω₀ angular, β in s⁻²·m⁻² (β > 0 stiffening) and F in m·s⁻².
//! Internally the cubic is written in v = ¾|β|a²/(ω₀²g), g = ω/(ω₀Q):
//!
//! ```text
//! v³ + 2δv² + (δ² + 1)v − κ = 0,   δ = ±(ω₀² − ω²)/(ω₀²g),   κ = ¾|β|F²/(ω₀⁶g³)
//! ```
//!
//! whose real roots are all positive.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::fit::{least_squares, FitError, FitOptions};

#[derive(Debug, Error)]
pub enum DuffingError {
    #[error("{field} out of range: {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("backbone point {index} invalid: {reason}")]
    InvalidPoint { index: usize, reason: &'static str },
    #[error(transparent)]
    Fit(#[from] FitError),
}

fn check(field: &'static str, value: f64, ok: bool) -> Result<f64, DuffingError> {
    if value.is_finite() && ok {
        Ok(value)
    } else {
        Err(DuffingError::InvalidParameter { field, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuffingParams {
    pub f0: f64,
    pub q: f64,
    pub beta: f64,
    pub drive: f64,
}

impl DuffingParams {
    pub fn new(f0: f64, q: f64, beta: f64, drive: f64) -> Result<Self, DuffingError> {
        Ok(Self {
            f0: check("f0", f0, f0 > 0.0)?,
            q: check("Q", q, q > 0.0)?,
            beta: check("beta", beta, true)?,
            drive: check("drive", drive, drive >= 0.0)?,
        })
    }

    pub fn omega0(&self) -> f64 {
        TAU * self.f0
    }

    /// Linear peak amplitude F·Q/ω₀².
    pub fn linear_peak_amplitude(&self) -> f64 {
        self.drive * self.q / self.omega0().powi(2)
    }

    /// Drive at which bistability first appears, evaluated with ω ≈ ω₀.
    /// Infinite for a linear resonator.
    pub fn critical_drive(&self) -> f64 {
        if self.beta == 0.0 {
            return f64::INFINITY;
        }
        let kappa_c = 8.0 / (3.0 * 3f64.sqrt());
        (kappa_c * self.omega0().powi(6) / (0.75 * self.beta.abs() * self.q.powi(3))).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyRoot {
    pub amplitude: f64,
    pub stable: bool,
}

struct Normalized {
    delta: f64,
    kappa: f64,
    /// a² = v·scale
    scale: f64,
}

fn normalize(p: &DuffingParams, f: f64) -> Normalized {
    let w0 = p.omega0();
    let w = TAU * f;
    let g = w / (w0 * p.q);
    let c = 0.75 * p.beta.abs();
    let sign = if p.beta < 0.0 { -1.0 } else { 1.0 };
    let delta = sign * (w0 * w0 - w * w) / (w0 * w0 * g);
    let kappa = c * p.drive * p.drive / (w0.powi(6) * g.powi(3));
    Normalized {
        delta,
        kappa,
        scale: w0 * w0 * g / c,
    }
}

fn poly(v: f64, d: f64, k: f64) -> f64 {
    v * ((v + d) * (v + d) + 1.0) - k
}

fn dpoly(v: f64, d: f64) -> f64 {
    3.0 * v * v + 4.0 * d * v + d * d + 1.0
}

/// Root of the normalized cubic inside [lo, hi] where it changes sign.
fn bracketed_root(mut lo: f64, mut hi: f64, d: f64, k: f64) -> f64 {
    let mut flo = poly(lo, d, k);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = poly(mid, d, k);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Real roots (ascending) and their derivative sign, for κ > 0.
fn cubic_roots(d: f64, k: f64) -> Vec<(f64, bool)> {
    // Cauchy bound on the root magnitude
    let bound = 1.0 + (2.0 * d).abs().max(d * d + 1.0).max(k.abs());
    let disc = 4.0 * d * d - 12.0;
    let mut roots = Vec::with_capacity(3);
    if disc <= 0.0 {
        roots.push(bracketed_root(0.0, bound, d, k));
    } else {
        let sq = disc.sqrt();
        let (v1, v2) = ((-4.0 * d - sq) / 6.0, (-4.0 * d + sq) / 6.0);
        let (p1, p2) = (poly(v1, d, k), poly(v2, d, k));
        if p1 > 0.0 {
            roots.push(bracketed_root(0.0f64.min(v1), v1, d, k));
        }
        if p1 > 0.0 && p2 < 0.0 {
            roots.push(bracketed_root(v1, v2, d, k));
        }
        if p2 < 0.0 {
            roots.push(bracketed_root(v2, bound, d, k));
        }
        if roots.is_empty() {
            // tangency on the discriminant boundary
            roots.push(if p1.abs() < p2.abs() { v1 } else { v2 });
        }
    }
    roots.into_iter().map(|v| (v, dpoly(v, d) > 0.0)).collect()
}

/// Steady-state amplitudes at `f_drive`, ascending; one or three roots.
/// The middle root of three is the unstable saddle.
pub fn steady_state_amplitudes(p: &DuffingParams, f_drive: f64) -> Vec<SteadyRoot> {
    if p.drive == 0.0 {
        return vec![SteadyRoot { amplitude: 0.0, stable: true }];
    }
    if p.beta == 0.0 {
        let w0 = p.omega0();
        let w = TAU * f_drive;
        let den = (w0 * w0 - w * w).powi(2) + (w0 * w / p.q).powi(2);
        return vec![SteadyRoot {
            amplitude: p.drive / den.sqrt(),
            stable: true,
        }];
    }
    let n = normalize(p, f_drive);
    let mut roots: Vec<SteadyRoot> = cubic_roots(n.delta, n.kappa)
        .into_iter()
        .map(|(v, stable)| SteadyRoot {
            amplitude: (v * n.scale).max(0.0).sqrt(),
            stable,
        })
        .collect();
    if roots.len() == 3 {
        roots[0].stable = true;
        roots[1].stable = false;
        roots[2].stable = true;
    } else {
        roots.iter_mut().for_each(|r| r.stable = true);
    }
    roots
}

/// Discriminant of the normalized cubic at `f`: positive where three real
/// roots exist.
pub fn discriminant(p: &DuffingParams, f: f64) -> f64 {
    let n = normalize(p, f);
    let (a, b, c, d) = (1.0, 2.0 * n.delta, n.delta * n.delta + 1.0, -n.kappa);
    18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c - 4.0 * a * c.powi(3) - 27.0 * a * a * d * d
}

fn root_count(p: &DuffingParams, f: f64) -> usize {
    steady_state_amplitudes(p, f).len()
}

/// Frequency at which the normalized detuning equals `delta`, using g at ω₀.
fn frequency_for_delta(p: &DuffingParams, delta: f64) -> f64 {
    let w0 = p.omega0();
    let sign = if p.beta < 0.0 { -1.0 } else { 1.0 };
    // ω² + (sδω₀/Q)ω − ω₀² = 0
    let b = sign * delta * w0 / p.q;
    let w = 0.5 * (-b + (b * b + 4.0 * w0 * w0).sqrt());
    w / TAU
}

/// Frequency interval with three steady states, edges bisected to 1e-12
/// relative. `None` below the critical drive.
pub fn bistable_range(p: &DuffingParams) -> Option<(f64, f64)> {
    if p.beta == 0.0 || p.drive == 0.0 {
        return None;
    }
    let kappa = normalize(p, p.f0).kappa;
    // three roots need δ < −√3; the fold reaches at most δ ≈ −κ
    let d_far = -(2.0 * kappa + 4.0);
    let d_near = -(3f64.sqrt()) * 0.999;
    let n = 4000;
    let freqs: Vec<f64> = (0..=n)
        .map(|i| frequency_for_delta(p, d_near + (d_far - d_near) * i as f64 / n as f64))
        .collect();
    let inside: Vec<usize> = (0..=n).filter(|&i| root_count(p, freqs[i]) == 3).collect();
    let (&first, &last) = (inside.first()?, inside.last()?);
    let refine = |mut yes: f64, mut no: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (yes + no);
            if (yes - no).abs() <= 1e-12 * yes.abs() {
                break;
            }
            if root_count(p, mid) == 3 {
                yes = mid;
            } else {
                no = mid;
            }
        }
        yes
    };
    let edge_a = refine(freqs[first], freqs[first.saturating_sub(1)]);
    let edge_b = refine(freqs[last], freqs[(last + 1).min(n)]);
    Some((edge_a.min(edge_b), edge_a.max(edge_b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Lower,
    Upper,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Lower => "lower",
            Branch::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// In sweep order.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub branch_labels: Vec<Branch>,
    pub bistable_range: Option<(f64, f64)>,
}

/// Branch label from the response phase: points on the resonant side of the
/// backbone ω² = ω₀² + ¾βa² connect continuously to the upper branch.
fn label(p: &DuffingParams, f: f64, a: f64) -> Branch {
    let w = TAU * f;
    let bb = p.omega0().powi(2) + 0.75 * p.beta * a * a;
    let resonant_side = if p.beta >= 0.0 { w * w < bb } else { w * w > bb };
    if resonant_side {
        Branch::Upper
    } else {
        Branch::Lower
    }
}

/// Quasi-static sweep with branch following: the response stays on the
/// stable root nearest the previous amplitude and jumps only when that
/// branch ceases to exist. Forward sweeps ascend in frequency.
pub fn sweep(
    p: &DuffingParams,
    f_start: f64,
    f_end: f64,
    points: usize,
    direction: SweepDirection,
) -> Result<SweepResult, DuffingError> {
    check("f_start", f_start, f_start > 0.0)?;
    check("f_end", f_end, f_end > 0.0 && f_end != f_start)?;
    if points < 2 {
        return Err(DuffingError::TooFewPoints { needed: 2, got: points });
    }
    let (lo, hi) = (f_start.min(f_end), f_start.max(f_end));
    let mut frequencies: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    if direction == SweepDirection::Backward {
        frequencies.reverse();
    }
    let mut amplitudes = Vec::with_capacity(points);
    let mut prev: Option<f64> = None;
    for &f in &frequencies {
        let stable = steady_state_amplitudes(p, f).into_iter().filter(|r| r.stable);
        let a = match prev {
            // starting from rest: smallest stable amplitude
            None => stable.map(|r| r.amplitude).fold(f64::INFINITY, f64::min),
            Some(a0) => stable
                .map(|r| r.amplitude)
                .min_by(|x, y| (x - a0).abs().total_cmp(&(y - a0).abs()))
                .expect("at least one stable root"),
        };
        amplitudes.push(a);
        prev = Some(a);
    }
    let branch_labels = frequencies.iter().zip(&amplitudes).map(|(&f, &a)| label(p, f, a)).collect();
    let bistable_range = bistable_range(p).and_then(|(a, b)| {
        let (a, b) = (a.max(lo), b.min(hi));
        (a < b).then_some((a, b))
    });
    Ok(SweepResult {
        frequencies,
        amplitudes,
        branch_labels,
        bistable_range,
    })
}

/// ∫(a_forward − a_backward) df over the common grid (trapezoid rule).
pub fn hysteresis_area(p: &DuffingParams, f_start: f64, f_end: f64, points: usize) -> Result<f64, DuffingError> {
    let fwd = sweep(p, f_start, f_end, points, SweepDirection::Forward)?;
    let mut bwd = sweep(p, f_start, f_end, points, SweepDirection::Backward)?;
    bwd.amplitudes.reverse();
    let diff: Vec<f64> = fwd.amplitudes.iter().zip(&bwd.amplitudes).map(|(a, b)| a - b).collect();
    let df = (f_end - f_start).abs() / (points - 1) as f64;
    Ok(diff.windows(2).map(|w| 0.5 * (w[0] + w[1]) * df).sum())
}

/// Response maximum (a_peak, f_peak) at one drive level.
///
/// The maximum satisfies ∂a/∂ω = 0, i.e. ω² = ω₀²(1 − 1/(2Q²)) + ¾βa² and
/// a²[ω₀⁴/(4Q⁴) + ω₀²ω²/Q²] = F², solved by fixed-point iteration. For β ≥ 0
/// this is the forward-sweep maximum; for β < 0 the backward one.
pub fn response_peak(p: &DuffingParams) -> (f64, f64) {
    let w0 = p.omega0();
    let q2 = p.q * p.q;
    let base = w0 * w0 * (1.0 - 0.5 / q2);
    let mut w2 = base;
    let mut a2 = 0.0;
    for _ in 0..200 {
        a2 = p.drive * p.drive / (w0.powi(4) / (4.0 * q2 * q2) + w0 * w0 * w2 / q2);
        let next = base + 0.75 * p.beta * a2;
        let done = (next - w2).abs() <= 1e-16 * next;
        w2 = next;
        if done {
            break;
        }
    }
    (a2.sqrt(), w2.max(0.0).sqrt() / TAU)
}

/// (a_peak, f_peak) for each drive level, in input order.
pub fn backbone(p: &DuffingParams, drive_levels: &[f64]) -> Result<Vec<(f64, f64)>, DuffingError> {
    if drive_levels.len() < 3 {
        return Err(DuffingError::TooFewPoints {
            needed: 3,
            got: drive_levels.len(),
        });
    }
    drive_levels
        .iter()
        .map(|&drive| Ok(response_peak(&DuffingParams::new(p.f0, p.q, p.beta, drive)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackboneFit {
    pub f0: f64,
    pub a_coef: f64,
    pub n: f64,
    /// 1σ for (f0, A, n).
    pub sigma: [f64; 3],
    pub residual_norm: f64,
}

impl BackboneFit {
    pub fn frequency_at(&self, amplitude: f64) -> f64 {
        self.f0 + self.a_coef * amplitude.powf(self.n)
    }
}

/// Fit f = f0 + A·aⁿ to (amplitude, frequency) points.
///
/// Initial guess: f0 = min f, n = 2, A from the slope between the smallest-
/// and largest-amplitude points at n = 2. A is fitted as sign·exp(·) and f0
/// as an offset in units of the frequency span.
pub fn fit_backbone(points: &[(f64, f64)]) -> Result<BackboneFit, DuffingError> {
    if points.len() < 4 {
        return Err(DuffingError::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    for (index, &(a, f)) in points.iter().enumerate() {
        if !(a.is_finite() && a > 0.0) {
            return Err(DuffingError::InvalidPoint {
                index,
                reason: "amplitude must be positive",
            });
        }
        if !f.is_finite() {
            return Err(DuffingError::InvalidPoint {
                index,
                reason: "frequency must be finite",
            });
        }
        if points[..index].iter().any(|&(b, _)| b == a) {
            return Err(DuffingError::InvalidPoint {
                index,
                reason: "amplitudes must be distinct",
            });
        }
    }
    let by_amp = |i: &usize, j: &usize| points[*i].0.total_cmp(&points[*j].0);
    let lo = (0..points.len()).min_by(by_amp).expect("nonempty");
    let hi = (0..points.len()).max_by(by_amp).expect("nonempty");
    let f_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let f_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let span = if f_max > f_min { f_max - f_min } else { f_min.abs().max(1.0) };
    let slope = (points[hi].1 - points[lo].1) / (points[hi].0.powi(2) - points[lo].0.powi(2));
    let sign = if slope < 0.0 { -1.0 } else { 1.0 };
    // with f0 = min f the lowest point sits at zero shift; keep A from it
    let a_init = if slope != 0.0 { slope.abs() } else { span / points[hi].0.powi(2) };

    let model = |x: &[f64], a: f64| f_min + x[0] * span + sign * (x[1] + a.ln() * x[2]).exp();
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let r: Vec<f64> = points.iter().map(|&(a, f)| (model(x, a) - f) / span).collect();
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let out = least_squares(residual, &[0.0, a_init.ln(), 2.0], FitOptions::default())?;
    let x = &out.params;
    let a_coef = sign * x[1].exp();
    Ok(BackboneFit {
        f0: f_min + x[0] * span,
        a_coef,
        n: x[2],
        sigma: [out.sigma[0] * span, out.sigma[1] * a_coef.abs(), out.sigma[2]],
        residual_norm: out.residual_norm * span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stiff(drive_over_critical: f64) -> DuffingParams {
        let base = DuffingParams::new(97.2e6, 1e4, 1e30, 1.0).unwrap();
        DuffingParams::new(97.2e6, 1e4, 1e30, drive_over_critical * base.critical_drive()).unwrap()
    }

    #[test]
    fn linear_limit_is_lorentzian() {
        let p = DuffingParams::new(97.2e6, 1e4, 0.0, 1e8).unwrap();
        for f in [96e6, 97.19e6, 97.2e6, 98e6] {
            let r = steady_state_amplitudes(&p, f);
            assert_eq!(r.len(), 1);
            let (w0, w) = (p.omega0(), TAU * f);
            let lor = p.drive / ((w0 * w0 - w * w).powi(2) + (w0 * w / p.q).powi(2)).sqrt();
            assert!((r[0].amplitude - lor).abs() < 1e-12 * lor);
        }
        assert!(bistable_range(&p).is_none());
    }

    #[test]
    fn small_drive_peak_matches_linear() {
        let p = stiff(0.05);
        let peak = (0..2001)
            .map(|i| 97.19e6 + 20e3 * i as f64 / 2000.0)
            .map(|f| steady_state_amplitudes(&p, f)[0].amplitude)
            .fold(0.0, f64::max);
        assert!((peak / p.linear_peak_amplitude() - 1.0).abs() < 0.01);
    }

    #[test]
    fn roots_satisfy_amplitude_equation() {
        let p = stiff(4.0);
        let (lo, hi) = bistable_range(&p).unwrap();
        let f = 0.5 * (lo + hi);
        let roots = steady_state_amplitudes(&p, f);
        assert_eq!(roots.len(), 3);
        assert_eq!(roots.iter().map(|r| r.stable).collect::<Vec<_>>(), [true, false, true]);
        let (w0, w) = (p.omega0(), TAU * f);
        for r in roots {
            let a2 = r.amplitude.powi(2);
            let lhs = a2 * ((w0 * w0 - w * w + 0.75 * p.beta * a2).powi(2) + (w0 * w / p.q).powi(2));
            assert!((lhs / p.drive.powi(2) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bistable_edges_match_discriminant_sign_change() {
        let p = stiff(3.0);
        let (lo, hi) = bistable_range(&p).unwrap();
        let eps = 1e-6 * (hi - lo);
        assert!(discriminant(&p, lo + eps) > 0.0 && discriminant(&p, hi - eps) > 0.0);
        assert!(discriminant(&p, lo - eps) < 0.0 && discriminant(&p, hi + eps) < 0.0);
        assert!(lo > p.f0);
        assert!(bistable_range(&stiff(0.9)).is_none());
    }

    #[test]
    fn stiffening_hysteresis() {
        let p = stiff(4.0);
        let (lo, hi) = bistable_range(&p).unwrap();
        let (a, b) = (p.f0 - 3.0 * (hi - p.f0), hi + (hi - lo));
        let fwd = sweep(&p, a, b, 3001, SweepDirection::Forward).unwrap();
        let bwd = sweep(&p, a, b, 3001, SweepDirection::Backward).unwrap();
        let jump = |s: &SweepResult| {
            let i = s
                .amplitudes
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap()
                .0;
            s.frequencies[i]
        };
        let (down, up) = (jump(&fwd), jump(&bwd));
        assert!(down > up, "{down} vs {up}");
        assert!((down - hi).abs() < 2.0 * (b - a) / 3000.0);
        assert!((up - lo).abs() < 2.0 * (b - a) / 3000.0);
        // differences only inside the bistable window
        for (i, &f) in fwd.frequencies.iter().enumerate() {
            let j = fwd.frequencies.len() - 1 - i;
            if f < lo || f > hi {
                assert_eq!(fwd.amplitudes[i], bwd.amplitudes[j]);
            }
            let roots = steady_state_amplitudes(&p, f);
            assert!(roots.iter().any(|r| r.stable && r.amplitude == fwd.amplitudes[i]));
        }
        assert!(hysteresis_area(&p, a, b, 3001).unwrap() > 0.0);
    }

    #[test]
    fn linear_sweeps_coincide() {
        let p = DuffingParams::new(97.2e6, 1e4, 0.0, 1e10).unwrap();
        let fwd = sweep(&p, 97.1e6, 97.3e6, 501, SweepDirection::Forward).unwrap();
        let mut bwd = sweep(&p, 97.1e6, 97.3e6, 501, SweepDirection::Backward).unwrap();
        bwd.amplitudes.reverse();
        assert_eq!(fwd.amplitudes, bwd.amplitudes);
        assert_eq!(hysteresis_area(&p, 97.1e6, 97.3e6, 501).unwrap(), 0.0);
        assert!(fwd.bistable_range.is_none());
    }

    #[test]
    fn peak_oracles() {
        let lin = DuffingParams::new(97.2e6, 50.0, 0.0, 1e12).unwrap();
        let (_, f) = response_peak(&lin);
        assert!((f / (97.2e6 * (1.0f64 - 1.0 / (2.0 * 2500.0)).sqrt()) - 1.0).abs() < 1e-14);

        let p = stiff(4.0);
        let (a, f) = response_peak(&p);
        // ω ≈ ω₀ + 3βa²/(8ω₀), i.e. Δf = 3βa²/(32π²f₀)
        let analytic = 3.0 * p.beta / (32.0 *std::f64::consts::PI.powi(2) * p.f0) * a * a;
        assert!(((f - p.f0) / analytic - 1.0).abs() < 1e-3);
        let p2 = DuffingParams { beta: 2.0 * p.beta, ..p };
        // β enters linearly in ω²
        let shift2 = |pp: &DuffingParams, a: f64| {
            let w2 = pp.omega0().powi(2) * (1.0 - 0.5 / pp.q.powi(2)) + 0.75 * pp.beta * a * a;
            w2 - pp.omega0().powi(2) * (1.0 - 0.5 / pp.q.powi(2))
        };
        assert!((shift2(&p2, a) / shift2(&p, a) - 2.0).abs() < 1e-9);

        // forward sweep maximum agrees with the analytic peak
        let fwd = sweep(&p, p.f0 - 5e4, p.f0 + 2e5, 20001, SweepDirection::Forward).unwrap();
        let max = fwd.amplitudes.iter().cloned().fold(0.0, f64::max);
        assert!((max / a - 1.0).abs() < 1e-4);
    }

    #[test]
    fn self_backbone_gives_quadratic() {
        let p = stiff(1.0);
        let levels: Vec<f64> = (1..=8).map(|k| p.drive * k as f64).collect();
        let pts = backbone(&p, &levels).unwrap();
        let fit = fit_backbone(&pts).unwrap();
        assert!((fit.n - 2.0).abs() < 0.05, "n = {}", fit.n);
        assert!(backbone(&p, &levels[..2]).is_err());
    }

    #[test]
    fn recovers_reported_backbone() {
        let truth = BackboneFit {
            f0: 97.2e6,
            a_coef: 5.12e8,
            n: 2.17,
            sigma: [0.0; 3],
            residual_norm: 0.0,
        };
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| 0.005 + 0.005 * i as f64)
            .map(|a| (a, truth.frequency_at(a)))
            .collect();
        let fit = fit_backbone(&pts).unwrap();
        assert!((fit.f0 / truth.f0 - 1.0).abs() < 0.01);
        assert!((fit.a_coef / truth.a_coef - 1.0).abs() < 0.01);
        assert!((fit.n / truth.n - 1.0).abs() < 0.01);
    }

    #[test]
    fn backbone_fit_is_scale_covariant() {
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| 0.01 + 0.006 * i as f64)
            .map(|a| (a, 97.2e6 + 5.12e8 * a.powf(2.17)))
            .collect();
        let s = 3.0;
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(a, f)| (s * a, f)).collect();
        let (f1, f2) = (fit_backbone(&pts).unwrap(), fit_backbone(&scaled).unwrap());
        assert!((f1.n - f2.n).abs() < 1e-6);
        assert!((f2.a_coef / (f1.a_coef / s.powf(f1.n)) - 1.0).abs() < 1e-5);
        assert!((f1.f0 - f2.f0).abs() < 1e-3);
    }

    #[test]
    fn backbone_preconditions() {
        assert!(matches!(
            fit_backbone(&[(0.1, 1.0), (0.2, 2.0)]),
            Err(DuffingError::TooFewPoints { .. })
        ));
        assert!(matches!(
            fit_backbone(&[(0.1, 1.0), (0.1, 2.0), (0.3, 3.0), (0.4, 4.0)]),
            Err(DuffingError::InvalidPoint { .. })
        ));
    }

    proptest! {
        #[test]
        fn root_count_is_one_or_three(ratio in 0.1f64..10.0, x in -3.0f64..8.0) {
            let p = stiff(ratio);
            let (a, _) = response_peak(&p);
            let shift = 0.75 * p.beta * a * a / (2.0 * p.omega0()) / TAU;
            let f = p.f0 + x * shift.max(p.f0 / p.q);
            let n = steady_state_amplitudes(&p, f).len();
            prop_assert!(n == 1 || n == 3);
        }

        #[test]
        fn backbone_shift_monotone(k in 1.0f64..5.0) {
            let p = stiff(1.0);
            let (a1, f1) = response_peak(&p);
            let (a2, f2) = response_peak(&DuffingParams { drive: k * p.drive, ..p });
            prop_assert!(a2 > a1 && f2 > f1);
        }
    }
}
