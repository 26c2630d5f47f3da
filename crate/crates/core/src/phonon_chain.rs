//! One-dimensional transfer-matrix model of the phononic-crystal Bragg mirror.
//!
//! Each segment is a uniform waveguide section carrying longitudinal waves,
//! described by its length, sound speed and area-normalized acoustic
//! impedance. The state vector is (particle velocity, force); a segment of
//! phase θ = kl maps it through
//!
//! ```text
//! [ cos θ      i sin θ / Z ]
//! [ i Z sin θ  cos θ       ]
//! ```
//!
//! Impedance contrast between the narrow and wide sections stands in for the
//! width modulation of the real suspended beam.
//!
//! A chain is laid out symmetrically around the defect:
//! `[narrow wide] × N, defect.narrow, defect.wide, defect.narrow, [wide narrow] × N`,
//! between two semi-infinite terminations of equal impedance.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;
use thiserror::Error;

type Transfer = Matrix2<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("segment {field} must be finite and > 0, got {value}")]
    InvalidSegment { field: &'static str, value: f64 },
    #[error("termination impedance must be > 0, got {0}")]
    InvalidTermination(f64),
    #[error("invalid frequency window: f_min = {f_min}, f_max = {f_max}, resolution = {resolution}")]
    InvalidWindow { f_min: f64, f_max: f64, resolution: f64 },
    #[error("band gap must satisfy 0 < f_low < f_high, got [{0}, {1}]")]
    InvalidGap(f64, f64),
    #[error("no defect mode in gap: peak transmission {peak:.3e} vs midgap floor {floor:.3e}")]
    NoDefectModeInGap { peak: f64, floor: f64 },
    #[error("transmission peak at {0} Hz is wider than its band gap; linewidth unresolved")]
    UnresolvedLinewidth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    length: f64,
    sound_speed: f64,
    impedance: f64,
}

impl Segment {
    pub fn new(length: f64, sound_speed: f64, impedance: f64) -> Result<Self, ChainError> {
        for (field, value) in [
            ("length", length),
            ("sound_speed", sound_speed),
            ("impedance", impedance),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ChainError::InvalidSegment { field, value });
            }
        }
        Ok(Self {
            length,
            sound_speed,
            impedance,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    pub fn impedance(&self) -> f64 {
        self.impedance
    }

    fn phase(&self, f: f64) -> f64 {
        TAU * f * self.length / self.sound_speed
    }

    pub fn transfer_matrix(&self, f: f64) -> Transfer {
        let (s, c) = self.phase(f).sin_cos();
        let z = self.impedance;
        let i = Complex64::i();
        Matrix2::new(
            Complex64::new(c, 0.0),
            i * (s / z),
            i * (s * z),
            Complex64::new(c, 0.0),
        )
    }
}

/// Two-segment unit cell: the narrow tether followed by the wide block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCell {
    pub narrow: Segment,
    pub wide: Segment,
}

impl UnitCell {
    pub fn new(narrow: Segment, wide: Segment) -> Self {
        Self { narrow, wide }
    }

    /// Lattice constant a.
    pub fn length(&self) -> f64 {
        self.narrow.length + self.wide.length
    }

    pub fn transfer_matrix(&self, f: f64) -> Transfer {
        self.wide.transfer_matrix(f) * self.narrow.transfer_matrix(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub mirror_cells_per_side: usize,
    pub mirror_cell: UnitCell,
    pub defect_cell: UnitCell,
    termination_impedance: f64,
}

impl ChainSpec {
    pub fn new(
        mirror_cells_per_side: usize,
        mirror_cell: UnitCell,
        defect_cell: UnitCell,
        termination_impedance: f64,
    ) -> Result<Self, ChainError> {
        if !(termination_impedance.is_finite() && termination_impedance > 0.0) {
            return Err(ChainError::InvalidTermination(termination_impedance));
        }
        Ok(Self {
            mirror_cells_per_side,
            mirror_cell,
            defect_cell,
            termination_impedance,
        })
    }

    pub fn termination_impedance(&self) -> f64 {
        self.termination_impedance
    }

    pub fn with_mirror_cells(mut self, n: usize) -> Self {
        self.mirror_cells_per_side = n;
        self
    }

    /// Same chain with the defect replaced by an ordinary mirror cell.
    pub fn without_defect(mut self) -> Self {
        self.defect_cell = self.mirror_cell;
        self
    }

    /// Segments from left to right. The list is a palindrome.
    pub fn segments(&self) -> Vec<Segment> {
        let n = self.mirror_cells_per_side;
        let mut segs = Vec::with_capacity(4 * n + 3);
        for _ in 0..n {
            segs.push(self.mirror_cell.narrow);
            segs.push(self.mirror_cell.wide);
        }
        segs.push(self.defect_cell.narrow);
        segs.push(self.defect_cell.wide);
        segs.push(self.defect_cell.narrow);
        for _ in 0..n {
            segs.push(self.mirror_cell.wide);
            segs.push(self.mirror_cell.narrow);
        }
        segs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandGap {
    pub f_low: f64,
    pub f_high: f64,
}

impl BandGap {
    pub fn new(f_low: f64, f_high: f64) -> Result<Self, ChainError> {
        if f_low > 0.0 && f_low < f_high {
            Ok(Self { f_low, f_high })
        } else {
            Err(ChainError::InvalidGap(f_low, f_high))
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_low + self.f_high)
    }

    pub fn width(&self) -> f64 {
        self.f_high - self.f_low
    }

    pub fn fractional_width(&self) -> f64 {
        self.width() / self.center()
    }

    pub fn contains(&self, f: f64) -> bool {
        f > self.f_low && f < self.f_high
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectMode {
    pub frequency: f64,
    pub localization_length: f64,
    pub radiative_q: f64,
    /// Peak power transmission at `frequency`.
    pub peak_transmission: f64,
}

/// Complex amplitude transmission and reflection through a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scattering {
    pub t: Complex64,
    pub r: Complex64,
}

/// Gap edges come from |cos qa| crossing 1; this slack keeps rounding in
/// cos·cos − sin·sin from opening spurious gaps in a uniform chain.
const GAP_SLACK: f64 = 1e-12;

/// cos(qa) of the Bloch wave through an infinite repetition of `cell`.
pub fn dispersion(cell: &UnitCell, f: f64) -> f64 {
    let t = cell.transfer_matrix(f);
    0.5 * (t[(0, 0)] + t[(1, 1)]).re
}

/// Bloch attenuation per cell, κa = acosh|cos qa|, zero in a pass band.
pub fn bloch_decay(cell: &UnitCell, f: f64) -> f64 {
    let c = dispersion(cell, f).abs();
    if c > 1.0 {
        c.acosh()
    } else {
        0.0
    }
}

fn in_gap(cell: &UnitCell, f: f64) -> bool {
    dispersion(cell, f).abs() > 1.0 + GAP_SLACK
}

/// Maximal frequency intervals where |cos qa| > 1.
///
/// The window is sampled every `resolution` Hz; a gap narrower than the
/// resolution is found only if some sample lands inside it. Edges are then
/// bisected to 1e-6 relative tolerance. Gaps that run into the window
/// boundary are clipped at it.
pub fn find_band_gaps(
    cell: &UnitCell,
    f_min: f64,
    f_max: f64,
    resolution: f64,
) -> Result<Vec<BandGap>, ChainError> {
    if !(f_min > 0.0 && f_min < f_max && resolution > 0.0 && f_max.is_finite()) {
        return Err(ChainError::InvalidWindow {
            f_min,
            f_max,
            resolution,
        });
    }
    let steps = ((f_max - f_min) / resolution).ceil() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| (f_min + i as f64 * resolution).min(f_max))
        .collect();
    let flags: Vec<bool> = grid.iter().map(|&f| in_gap(cell, f)).collect();

    let refine = |mut pass: f64, mut stop: f64| {
        while (stop - pass).abs() > 1e-6 * stop.abs().max(pass.abs()) * 1e-1 {
            let mid = 0.5 * (pass + stop);
            if in_gap(cell, mid) {
                stop = mid;
            } else {
                pass = mid;
            }
        }
        0.5 * (pass + stop)
    };

    let mut gaps = Vec::new();
    let mut i = 0;
    while i < grid.len() {
        if !flags[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < grid.len() && flags[i + 1] {
            i += 1;
        }
        let end = i;
        let lo = if start == 0 {
            grid[0]
        } else {
            refine(grid[start - 1], grid[start])
        };
        let hi = if end == grid.len() - 1 {
            grid[end]
        } else {
            refine(grid[end + 1], grid[end])
        };
        if hi > lo {
            gaps.push(BandGap { f_low: lo, f_high: hi });
        }
        i += 1;
    }
    Ok(gaps)
}

/// Ordered product of segment matrices, leftmost segment applied first.
pub fn chain_transfer_matrix(segments: &[Segment], f: f64) -> Transfer {
    segments
        .iter()
        .fold(Transfer::identity(), |acc, s| s.transfer_matrix(f) * acc)
}

fn scattering_through(segments: &[Segment], z_t: f64, f: f64) -> Scattering {
    let m = chain_transfer_matrix(segments, f);
    let z = Complex64::new(z_t, 0.0);
    let a = m[(1, 0)] - z * m[(0, 0)];
    let b = z * (m[(1, 1)] - z * m[(0, 1)]);
    let r = -(a + b) / (a - b);
    let t = m[(0, 0)] * (1.0 + r) + m[(0, 1)] * z * (1.0 - r);
    Scattering { t, r }
}

/// Amplitude scattering coefficients for a wave incident from the left.
pub fn scattering(chain: &ChainSpec, f: f64) -> Scattering {
    scattering_through(&chain.segments(), chain.termination_impedance, f)
}

/// Power transmission |t|² between matched terminations.
pub fn transmission(chain: &ChainSpec, f: f64) -> f64 {
    scattering(chain, f).t.norm_sqr()
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while (b - a).abs() > tol {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    0.5 * (a + b)
}

/// Bisect for the frequency where `g` crosses `level`, with g(inside) ≥ level > g(outside).
fn bisect_level(g: impl Fn(f64) -> f64, mut inside: f64, mut outside: f64, level: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if g(mid) >= level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

const DEFECT_SCAN_POINTS: usize = 4001;

/// Locate the defect resonance inside `gap` from the transmission spectrum.
///
/// The frequency is the transmission maximum (golden-section to 1 Hz), the
/// radiative Q is frequency/FWHM of that peak, and the localization length
/// is a/κa from the mirror-cell Bloch attenuation at the mode frequency.
pub fn find_defect_mode(chain: &ChainSpec, gap: &BandGap) -> Result<DefectMode, ChainError> {
    let segs = chain.segments();
    let z_t = chain.termination_impedance;
    let t_of = |f: f64| scattering_through(&segs, z_t, f).t.norm_sqr();

    let floor = transmission(&chain.without_defect(), gap.center());

    let df = gap.width() / (DEFECT_SCAN_POINTS + 1) as f64;
    let grid: Vec<f64> = (1..=DEFECT_SCAN_POINTS).map(|i| gap.f_low + i as f64 * df).collect();
    let values: Vec<f64> = grid.iter().map(|&f| t_of(f)).collect();

    // interior local maxima only: a defect-free chain rises monotonically
    // towards both gap edges and has none
    let best = (1..grid.len() - 1)
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .max_by(|&i, &j| values[i].total_cmp(&values[j]));
    let Some(i) = best else {
        let peak = values.iter().copied().fold(0.0, f64::max);
        return Err(ChainError::NoDefectModeInGap { peak: peak.min(floor), floor });
    };
    if values[i] < 10.0 * floor {
        return Err(ChainError::NoDefectModeInGap {
            peak: values[i],
            floor,
        });
    }

    let f_peak = golden_max(t_of, grid[i - 1], grid[i + 1], 1.0);
    let t_peak = t_of(f_peak).max(values[i]);
    let half = 0.5 * t_peak;

    let mut edges = [0.0; 2];
    for (k, dir) in [-1.0f64, 1.0].into_iter().enumerate() {
        let mut step = 1.0;
        let limit = if dir < 0.0 { gap.f_low } else { gap.f_high };
        let outside = loop {
            let f = f_peak + dir * step;
            if (dir < 0.0 && f <= limit) || (dir > 0.0 && f >= limit) {
                return Err(ChainError::UnresolvedLinewidth(f_peak));
            }
            if t_of(f) < half {
                break f;
            }
            step *= 2.0;
        };
        edges[k] = bisect_level(t_of, f_peak, outside, half);
    }
    let fwhm = edges[1] - edges[0];

    let kappa_a = bloch_decay(&chain.mirror_cell, f_peak);
    let localization_length = if kappa_a > 0.0 {
        chain.mirror_cell.length() / kappa_a
    } else {
        f64::INFINITY
    };

    Ok(DefectMode {
        frequency: f_peak,
        localization_length,
        radiative_q: f_peak / fwhm,
        peak_transmission: t_peak,
    })
}

/// Per-segment wave amplitude √(|A|² + |B|²) for a unit wave incident from the left.
///
/// Within a uniform segment |v|² + |F/Z|² = 2(|A|² + |B|²), so this is a
/// position-independent local energy amplitude.
fn segment_amplitudes(segments: &[Segment], z_t: f64, f: f64) -> Vec<f64> {
    let sc = scattering_through(segments, z_t, f);
    let z = Complex64::new(z_t, 0.0);
    let mut v = 1.0 + sc.r;
    let mut force = z * (1.0 - sc.r);
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        let zs = seg.impedance;
        let fwd = 0.5 * (v + force / zs);
        let bwd = 0.5 * (v - force / zs);
        out.push((fwd.norm_sqr() + bwd.norm_sqr()).sqrt());
        let m = seg.transfer_matrix(f);
        let (nv, nf) = (m[(0, 0)] * v + m[(0, 1)] * force, m[(1, 0)] * v + m[(1, 1)] * force);
        v = nv;
        force = nf;
    }
    out
}

/// Field amplitude in each cell's wide block, normalized to 1 at the defect.
///
/// Cell indices run from −N (leftmost mirror cell) through 0 (defect) to +N.
/// The profile is the incoherent sum of left- and right-incident driving,
/// so a symmetric chain gives an exactly symmetric profile.
pub fn mode_profile(chain: &ChainSpec, mode: &DefectMode) -> Vec<(i32, f64)> {
    let segs = chain.segments();
    let z_t = chain.termination_impedance;
    let left = segment_amplitudes(&segs, z_t, mode.frequency);
    let reversed: Vec<Segment> = segs.iter().rev().copied().collect();
    let mut right = segment_amplitudes(&reversed, z_t, mode.frequency);
    right.reverse();
    let energy: Vec<f64> = left
        .iter()
        .zip(&right)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();

    let n = chain.mirror_cells_per_side;
    let mut cells = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        cells.push((-((n - i) as i32), energy[2 * i + 1]));
    }
    cells.push((0, energy[2 * n + 1]));
    for j in 0..n {
        cells.push(((j + 1) as i32, energy[2 * n + 3 + 2 * j]));
    }
    let norm = energy[2 * n + 1];
    cells.iter().map(|&(i, a)| (i, a / norm)).collect()
}

/// Reference design used throughout the tests and CLI fixtures.
///
/// Quartz-like sound speed; the narrow tether is a quarter wave and the wide
/// block three quarter waves at 100 MHz, with an impedance ratio of 1.85. The
/// second-order Bragg gap then sits at 100 MHz with ≈19% fractional width.
pub mod calibrated {
    use super::*;

    pub const SOUND_SPEED: f64 = 5700.0;
    pub const DESIGN_FREQUENCY: f64 = 100e6;
    pub const NARROW_IMPEDANCE: f64 = 1.5e7;
    pub const IMPEDANCE_RATIO: f64 = 1.85;

    pub fn wavelength() -> f64 {
        SOUND_SPEED / DESIGN_FREQUENCY
    }

    pub fn mirror_cell() -> UnitCell {
        let lam = wavelength();
        UnitCell::new(
            Segment::new(lam / 4.0, SOUND_SPEED, NARROW_IMPEDANCE).unwrap(),
            Segment::new(3.0 * lam / 4.0, SOUND_SPEED, NARROW_IMPEDANCE * IMPEDANCE_RATIO).unwrap(),
        )
    }

    /// Defect whose wide block is `block_length` long; one wavelength puts
    /// the mode at midgap.
    pub fn defect_cell(block_length: f64) -> UnitCell {
        let lam = wavelength();
        UnitCell::new(
            Segment::new(lam / 4.0, SOUND_SPEED, NARROW_IMPEDANCE).unwrap(),
            Segment::new(block_length, SOUND_SPEED, NARROW_IMPEDANCE * IMPEDANCE_RATIO).unwrap(),
        )
    }

    pub fn chain(mirror_cells_per_side: usize) -> ChainSpec {
        ChainSpec::new(
            mirror_cells_per_side,
            mirror_cell(),
            defect_cell(wavelength()),
            NARROW_IMPEDANCE,
        )
        .unwrap()
    }

    pub fn gap() -> BandGap {
        find_band_gaps(&mirror_cell(), 70e6, 130e6, 0.1e6).unwrap()[0]
    }
}

/// Phase per cell at which the n-th Bragg gap opens in a uniform-speed cell.
pub fn bragg_frequency(cell: &UnitCell, order: u32) -> f64 {
    let travel: f64 = cell.narrow.length / cell.narrow.sound_speed + cell.wide.length / cell.wide.sound_speed;
    order as f64 * PI / (TAU * travel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_cell() -> UnitCell {
        let s = Segment::new(10e-6, 5700.0, 1.5e7).unwrap();
        UnitCell::new(s, Segment::new(30e-6, 5700.0, 1.5e7).unwrap())
    }

    #[test]
    fn uniform_chain_has_no_gap() {
        let cell = uniform_cell();
        for i in 1..2000 {
            let f = i as f64 * 0.1e6;
            let d = dispersion(&cell, f);
            let expect = (TAU * f * 40e-6 / 5700.0).cos();
            assert!((d - expect).abs() < 1e-12);
        }
        assert!(find_band_gaps(&cell, 1e6, 300e6, 0.05e6).unwrap().is_empty());
    }

    #[test]
    fn long_wavelength_limit() {
        assert!((dispersion(&calibrated::mirror_cell(), 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibrated_gap_near_100_mhz() {
        let cell = calibrated::mirror_cell();
        assert!(dispersion(&cell, 100e6).abs() > 1.0);
        let gaps = find_band_gaps(&cell, 60e6, 140e6, 0.1e6).unwrap();
        assert_eq!(gaps.len(), 1, "{gaps:?}");
        let g = gaps[0];
        assert!((g.f_low - 90e6).abs() < 1.5e6, "{g:?}");
        assert!((g.f_high - 110e6).abs() < 1.5e6, "{g:?}");
        assert!((g.fractional_width() - 0.2).abs() < 0.02);
        assert!((bragg_frequency(&cell, 2) - 100e6).abs() < 1.0);
    }

    #[test]
    fn gap_edges_sit_on_unit_dispersion() {
        let cell = calibrated::mirror_cell();
        for g in find_band_gaps(&cell, 30e6, 170e6, 0.2e6).unwrap() {
            for edge in [g.f_low, g.f_high] {
                if edge == 30e6 || edge == 170e6 {
                    continue;
                }
                assert!((dispersion(&cell, edge).abs() - 1.0).abs() < 1e-6, "edge {edge}");
            }
        }
    }

    #[test]
    fn coarse_resolution_still_finds_gap_when_sampled() {
        let cell = calibrated::mirror_cell();
        // one sample at 100 MHz lands inside the gap
        let gaps = find_band_gaps(&cell, 70e6, 130e6, 30e6).unwrap();
        assert_eq!(gaps.len(), 1);
        assert!((gaps[0].f_low - 90.5e6).abs() < 0.5e6);
    }

    #[test]
    fn bare_defect_transmits_fully_at_resonance() {
        let chain = calibrated::chain(0);
        // the defect block is a full wave at 100 MHz and the tethers quarter waves
        // in a matched medium; lossless symmetric resonator
        let t = transmission(&chain, 100e6);
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midgap_transmission_follows_bloch_decay() {
        let cell = calibrated::mirror_cell();
        let f = 95e6;
        let kappa_a = bloch_decay(&cell, f);
        let chain = calibrated::chain(0).without_defect();
        let t3 = transmission(&chain.with_mirror_cells(3), f).ln();
        let t5 = transmission(&chain.with_mirror_cells(5), f).ln();
        let t7 = transmission(&chain.with_mirror_cells(7), f).ln();
        // log|t|² falls by 4κa per added cell per side
        let slope = (t7 - t5) / 2.0;
        assert!((slope + 4.0 * kappa_a).abs() / (4.0 * kappa_a) < 0.01, "{slope} vs {}", -4.0 * kappa_a);
        assert!(((t5 - t3) - (t7 - t5)).abs() < 0.05 * (t7 - t5).abs());
    }

    #[test]
    fn passband_transmission_does_not_decay() {
        let f = 80e6;
        assert!(bloch_decay(&calibrated::mirror_cell(), f) == 0.0);
        let chain = calibrated::chain(0).without_defect();
        let mins: Vec<f64> = [10, 20, 40]
            .iter()
            .map(|&n| {
                (0..200)
                    .map(|k| transmission(&chain.with_mirror_cells(n), f + k as f64 * 5e4))
                    .fold(1.0, f64::min)
            })
            .collect();
        // bounded below independently of length; a gap would give e^{-4κaN}
        assert!(mins.iter().all(|&m| m > 0.05), "{mins:?}");
    }

    #[test]
    fn wider_defect_lowers_mode_frequency() {
        let lam = calibrated::wavelength();
        let gap = calibrated::gap();
        let mut last = f64::INFINITY;
        for scale in [0.97, 0.99, 1.0, 1.01, 1.03] {
            let chain = ChainSpec::new(
                4,
                calibrated::mirror_cell(),
                calibrated::defect_cell(lam * scale),
                calibrated::NARROW_IMPEDANCE,
            )
            .unwrap();
            let mode = find_defect_mode(&chain, &gap).unwrap();
            assert!(mode.frequency < last);
            last = mode.frequency;
        }
    }

    #[test]
    fn radiative_q_grows_with_mirror_count() {
        let gap = calibrated::gap();
        let q3 = find_defect_mode(&calibrated::chain(3), &gap).unwrap().radiative_q;
        let q5 = find_defect_mode(&calibrated::chain(5), &gap).unwrap().radiative_q;
        assert!(q5 / q3 > 10.0, "q3 = {q3}, q5 = {q5}");
    }

    #[test]
    fn mirror_cell_as_defect_has_no_mode() {
        let chain = calibrated::chain(4).without_defect();
        let err = find_defect_mode(&chain, &calibrated::gap()).unwrap_err();
        assert!(matches!(err, ChainError::NoDefectModeInGap { .. }), "{err:?}");
    }

    #[test]
    fn mode_profile_is_normalized_symmetric_and_decays() {
        let chain = calibrated::chain(5);
        let mode = find_defect_mode(&chain, &calibrated::gap()).unwrap();
        let profile = mode_profile(&chain, &mode);
        assert_eq!(profile.len(), 11);
        assert_eq!(profile[5], (0, 1.0));
        for k in 1..=5 {
            let l = profile[5 - k].1;
            let r = profile[5 + k].1;
            assert!((l - r).abs() <= 1e-9 * l.max(r));
        }
        let expected = (-bloch_decay(&chain.mirror_cell, mode.frequency)).exp();
        for k in 5..10 {
            let ratio = profile[k + 1].1 / profile[k].1;
            assert!((ratio / expected - 1.0).abs() < 0.2, "cell {k}: {ratio} vs {expected}");
        }
    }

    proptest! {
        #[test]
        fn transfer_matrices_are_unimodular(len in 1e-6f64..1e-4, speed in 1e3f64..1e4,
                                            z in 1e6f64..1e8, f in 1e6f64..1e9) {
            let seg = Segment::new(len, speed, z).unwrap();
            let det = seg.transfer_matrix(f).determinant();
            prop_assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }

        #[test]
        fn lossless_chain_conserves_energy(n in 0usize..7, f in 60e6f64..140e6, scale in 0.9f64..1.1) {
            let chain = ChainSpec::new(
                n,
                calibrated::mirror_cell(),
                calibrated::defect_cell(calibrated::wavelength() * scale),
                calibrated::NARROW_IMPEDANCE * scale,
            ).unwrap();
            let s = scattering(&chain, f);
            prop_assert!((s.t.norm_sqr() + s.r.norm_sqr() - 1.0).abs() < 1e-9);
            let t = s.t.norm_sqr();
            prop_assert!(t > 0.0 && t <= 1.0 + 1e-12);
        }
    }
}
