//! Design and simulation toolkit for phononic-crystal acoustic quantum memories
//! coupled to superconducting circuits.
//!
//! Modules map onto the physics chain:
//!
//! * [`quantities`]: frequency/temperature types, constants, thermal occupation.
//! * [`phonon_chain`]: 1-D transfer-matrix Bragg mirror, band gaps, defect modes.
//! * [`loss`]: composed dissipation channels Q⁻¹(ω, T) and fitting to Q-vs-T data.
//! * [`electromech`]: Butterworth–Van-Dyke circuit, admittance fits, coupling rates.
//! * [`qdyn`]: qubit–SNAIL–mechanics dressing, effective beam-splitter coupling,
//!   Lindblad evolution and the iSWAP write/read gate.
//! * [`photoelastic`]: strain → index ellipsoid → reflected optical power.
//! * [`duffing`]: harmonic-balance Duffing response, hysteresis, backbone fits.
//! * [`analysis`]: Lorentzian and ringdown fits, Q ↔ τ consistency.
//! * [`io`]: CSV readers/writers for the trace and dataset formats.
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod duffing;
pub mod electromech;
pub mod fit;
pub mod io;
pub mod loss;
pub mod photoelastic;
pub mod phonon_chain;
pub mod qdyn;
pub mod quantities;

pub use quantities::{constants, Frequency, FrequencyTrace, Temperature, TimeTrace};
