// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Collapse operators for spontaneous emission, strain-induced pumping into
//! `m_s = 0`, and ground-state dephasing.

pub mod calibrate;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::state::{Level, LevelScheme};
use crate::{Error, Operator, Result, C64};

/// Default A2 radiative rate (1/ns), from the committed calibration run
/// against the 31 ns resonant pumping decay.
pub const DEFAULT_GAMMA_SP: f64 = 0.08290471226086563;
/// Default A2 → G0 strain-mixing rate (1/ns), calibrated against the 450 ns
/// off-resonant decay.
pub const DEFAULT_GAMMA_MIX: f64 = 0.008892777153072047;
/// `E_y` radiative rate (1/ns), ~12 ns lifetime.
pub const DEFAULT_GAMMA_EY: f64 = 1.0 / 12.0;
/// Ground-state inhomogeneous dephasing time (μs).
pub const DEFAULT_T2STAR_US: f64 = 0.6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DephasingModel {
    /// Markovian pure dephasing of the `m_s = ±1` levels: exponential
    /// coherence envelope.
    #[default]
    Lindblad,
    /// Quasi-static Gaussian distribution of the `GM/GP` splitting averaged
    /// over seeded samples: Gaussian coherence envelope.
    StaticGaussian,
    /// No ground-state dephasing.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceParams {
    /// A2 radiative decay rate (1/ns), split equally to GM and GP.
    pub gamma_sp: f64,
    /// A2 → G0 strain-mixing decay rate (1/ns).
    pub gamma_mix: f64,
    /// EY → G0 radiative rate (1/ns).
    pub gamma_ey: f64,
    pub t2star_us: f64,
    pub dephasing_model: DephasingModel,
    pub static_samples: usize,
    pub seed: u64,
}

impl Default for DecoherenceParams {
    fn default() -> Self {
        DecoherenceParams {
            gamma_sp: DEFAULT_GAMMA_SP,
            gamma_mix: DEFAULT_GAMMA_MIX,
            gamma_ey: DEFAULT_GAMMA_EY,
            t2star_us: DEFAULT_T2STAR_US,
            dephasing_model: DephasingModel::Lindblad,
            static_samples: 64,
            seed: 0,
        }
    }
}

impl DecoherenceParams {
    /// Only the radiative channels remain: no strain mixing, no dephasing.
    /// Optical pumping into the dark state still works.
    pub fn radiative_only(&self) -> Self {
        DecoherenceParams {
            gamma_mix: 0.0,
            dephasing_model: DephasingModel::Off,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_sp", self.gamma_sp),
            ("gamma_mix", self.gamma_mix),
            ("gamma_ey", self.gamma_ey),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("rate must be finite and >= 0, got {v}")));
            }
        }
        if !(self.t2star_us > 0.0) {
            return Err(Error::param("t2star_us", format!("must be > 0, got {}", self.t2star_us)));
        }
        if self.static_samples == 0 {
            return Err(Error::param("static_samples", "must be >= 1"));
        }
        Ok(())
    }

    /// Pure-dephasing rate (1/ns) that gives a `GM–GP` coherence 1/e time of
    /// `t2star_us`.
    pub fn dephasing_rate(&self) -> f64 {
        1.0 / (self.t2star_us * 1e3)
    }

    /// Standard deviation (MHz) of the quasi-static splitting whose Gaussian
    /// envelope `exp(−(2πσt)²/2)` reaches 1/e at `t2star_us`.
    pub fn static_sigma_mhz(&self) -> f64 {
        std::f64::consts::SQRT_2 / (2.0 * std::f64::consts::PI * self.t2star_us)
    }
}

fn transition_op(to: Level, from: Level, rate: f64) -> Operator {
    let mut m = Operator::zeros();
    m[(to.index(), from.index())] = C64::new(rate.sqrt(), 0.0);
    m
}

/// Collapse operators; channels with zero rate are omitted, so all-zero
/// rates give an empty list.
pub fn collapse_operators(params: &DecoherenceParams, _scheme: &LevelScheme) -> Vec<Operator> {
    let mut ops = Vec::new();
    if params.gamma_sp > 0.0 {
        ops.push(transition_op(Level::GM, Level::A2, params.gamma_sp / 2.0));
        ops.push(transition_op(Level::GP, Level::A2, params.gamma_sp / 2.0));
    }
    if params.gamma_mix > 0.0 {
        ops.push(transition_op(Level::G0, Level::A2, params.gamma_mix));
    }
    if params.gamma_ey > 0.0 {
        ops.push(transition_op(Level::G0, Level::EY, params.gamma_ey));
    }
    if params.dephasing_model == DephasingModel::Lindblad {
        let g = params.dephasing_rate();
        ops.push(transition_op(Level::GM, Level::GM, g));
        ops.push(transition_op(Level::GP, Level::GP, g));
    }
    ops
}

/// Seeded quasi-static `GM/GP` differential detunings (MHz).
pub fn static_detuning_samples(params: &DecoherenceParams) -> Result<Vec<f64>> {
    if params.dephasing_model != DephasingModel::StaticGaussian {
        return Err(Error::param(
            "dephasing_model",
            "static detuning samples require STATIC_GAUSSIAN",
        ));
    }
    params.validate()?;
    Ok(gaussian_samples(params.static_sigma_mhz(), params.static_samples, params.seed))
}

/// `n` draws from N(0, σ²) from a ChaCha8 stream seeded with `seed`.
pub fn gaussian_samples(sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}
