// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Time-binned fluorescence from recorded trajectories.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::propagator::Trajectory;
use crate::state::Level;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    pub bin_ns: f64,
    pub efficiency: f64,
    pub poisson: bool,
    pub seed: u64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            bin_ns: 2.8,
            efficiency: 1.0,
            poisson: false,
            seed: 0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_ns > 0.0 && self.bin_ns.is_finite()) {
            return Err(Error::param("bin_ns", format!("must be > 0, got {}", self.bin_ns)));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::param("efficiency", format!("must be in (0, 1], got {}", self.efficiency)));
        }
        Ok(())
    }
}

/// Contiguous bins of (expected or sampled) counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub bin_starts_ns: Vec<f64>,
    pub bin_ns: f64,
    pub counts: Vec<f64>,
}

impl TimeTrace {
    pub fn new(t0_ns: f64, bin_ns: f64, counts: Vec<f64>) -> Self {
        let bin_starts_ns = (0..counts.len()).map(|i| t0_ns + i as f64 * bin_ns).collect();
        TimeTrace {
            bin_starts_ns,
            bin_ns,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn start_ns(&self) -> f64 {
        self.bin_starts_ns.first().copied().unwrap_or(0.0)
    }

    pub fn end_ns(&self) -> f64 {
        self.start_ns() + self.len() as f64 * self.bin_ns
    }

    pub fn bin_centers_ns(&self) -> Vec<f64> {
        self.bin_starts_ns.iter().map(|t| t + 0.5 * self.bin_ns).collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Replaces expected counts by Poisson draws.
    pub fn sample_poisson(&self, seed: u64) -> TimeTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = self
            .counts
            .iter()
            .map(|&lambda| {
                if lambda > 0.0 {
                    Poisson::new(lambda).map(|p| p.sample(&mut rng)).unwrap_or(lambda)
                } else {
                    0.0
                }
            })
            .collect();
        TimeTrace {
            counts,
            ..self.clone()
        }
    }

    /// CSV: `t_ns` (bin start), `counts`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_ns", "counts"])?;
        for (t, c) in self.bin_starts_ns.iter().zip(&self.counts) {
            out.write_record([t.to_string(), c.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Integral of the piecewise-linear interpolant of `(t, y)` over `[a, b]`.
fn integrate_linear(t: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    let start = t.partition_point(|&x| x <= a).saturating_sub(1);
    for k in start..t.len() - 1 {
        let (t0, t1) = (t[k], t[k + 1]);
        if t0 >= b {
            break;
        }
        let lo = t0.max(a);
        let hi = t1.min(b);
        if hi <= lo {
            continue;
        }
        let slope = (y[k + 1] - y[k]) / (t1 - t0);
        let ylo = y[k] + slope * (lo - t0);
        let yhi = y[k] + slope * (hi - t0);
        total += 0.5 * (ylo + yhi) * (hi - lo);
    }
    total
}

/// Counts per bin `= efficiency · γ_rad · ∫_bin ρ_ee dt`.
pub fn fluorescence_trace(
    traj: &Trajectory,
    emitting_level: Level,
    gamma_rad: f64,
    det: &DetectorModel,
) -> Result<TimeTrace> {
    det.validate()?;
    if traj.len() < 2 {
        return Err(Error::param("trajectory", "needs at least two samples"));
    }
    let max_spacing = traj.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if max_spacing > det.bin_ns / 2.0 + 1e-12 {
        return Err(Error::param(
            "trajectory",
            format!(
                "sample spacing {max_spacing} ns is too coarse for {} ns bins (need >= 2 samples per bin)",
                det.bin_ns
            ),
        ));
    }
    let pops = traj.populations(emitting_level);
    let t0 = traj.times[0];
    let span = traj.times[traj.len() - 1] - t0;
    let n_bins = (span / det.bin_ns + 1e-9).floor() as usize;
    let scale = det.efficiency * gamma_rad;
    let counts = (0..n_bins)
        .map(|i| {
            let a = t0 + i as f64 * det.bin_ns;
            scale * integrate_linear(&traj.times, &pops, a, a + det.bin_ns)
        })
        .collect();
    let trace = TimeTrace::new(t0, det.bin_ns, counts);
    Ok(if det.poisson {
        trace.sample_poisson(det.seed)
    } else {
        trace
    })
}

/// Sum of bins over `[t0, t0 + window)`, partial bins weighted by overlap.
pub fn windowed_counts(trace: &TimeTrace, t0_ns: f64, window_ns: f64) -> Result<f64> {
    let eps = 1e-9;
    if !(window_ns >= 0.0) || t0_ns < trace.start_ns() - eps || t0_ns + window_ns > trace.end_ns() + eps {
        return Err(Error::param(
            "window",
            format!(
                "[{t0_ns}, {}] ns outside trace [{}, {}] ns",
                t0_ns + window_ns,
                trace.start_ns(),
                trace.end_ns()
            ),
        ));
    }
    let (a, b) = (t0_ns, t0_ns + window_ns);
    Ok(trace
        .bin_starts_ns
        .iter()
        .zip(&trace.counts)
        .map(|(&s, &c)| {
            let overlap = (s + trace.bin_ns).min(b) - s.max(a);
            if overlap > 0.0 {
                c * overlap / trace.bin_ns
            } else {
                0.0
            }
        })
        .sum())
}
