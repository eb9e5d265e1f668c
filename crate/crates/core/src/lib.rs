// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation of microwave/optical phase transfer through a single
//! NV-center electron spin.
//!
//! The NV center is modelled as a five-level system (the three ground spin
//! sublevels, the `A2` excited state used for optical Λ transitions and the
//! `E_y` state used as an `m_s = 0` population probe). Drives are
//! piecewise-constant, the state is a density matrix, and dissipation follows
//! the Lindblad master equation integrated by fixed-step RK4.
//!
//! Module map:
//!
//! * [`state`]: level scheme, pure and mixed states, dark/bright algebra.
//! * [`drive`]: rotating-frame Hamiltonians for microwave and optical fields.
//! * [`dissipation`]: collapse operators and rate calibration.
//! * [`propagator`]: master-equation integration; [`superop`] holds the
//!   matrix-exponential reference solution used to verify it.
//! * [`sequence`]: pulse sequences and their JSON file format.
//! * [`detector`] and [`fit`]: fluorescence signals and curve fits.
//! * [`experiments`]: the full phase-sweep, CPT, pumping and delay studies.
//! * [`checks`] and [`cli`]: invariant suite and command-line front end.

pub mod checks;
pub mod cli;
pub mod detector;
pub mod dissipation;
pub mod drive;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod par;
pub mod propagator;
pub mod seed;
pub mod sequence;
pub mod state;
pub mod superop;

pub use error::{Error, Result};
pub use state::{DensityMatrix, Level, LevelScheme, PureState};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Operator on the five-level Hilbert space.
pub type Operator = nalgebra::Matrix5<C64>;

/// State vector on the five-level Hilbert space.
pub type Ket = nalgebra::Vector5<C64>;

/// Converts a cyclic frequency in MHz to an angular frequency in rad/ns.
#[inline]
pub fn mhz_to_rad_per_ns(f_mhz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_mhz * 1e-3
}

/// Largest modulus among complex entries.
pub fn max_abs<'a>(entries: impl IntoIterator<Item = &'a C64>) -> f64 {
    entries.into_iter().map(|c| c.norm()).fold(0.0, f64::max)
}
