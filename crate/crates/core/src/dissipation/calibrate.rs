// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Fixes `gamma_sp` and `gamma_mix` from fitted optical-pumping decay times.
//!
//! Both rates are found by root finding on `ln τ_fit(ln γ) = ln τ_target`
//! (Illinois false position, which keeps the bracket). The fitted times
//! are the ones reported by the pumping experiment:
//!
//! * on Raman resonance, the fast component of a double-exponential fit;
//! * off Raman resonance, a single-exponential fit.
//!
//! Both fits skip the first [`FIT_START_NS`] and end at five times the slow
//! target.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::detector::{fluorescence_trace, DetectorModel, TimeTrace};
use crate::dissipation::DecoherenceParams;
use crate::fit::{fit_exponential_xy, ExpFitOptions, ExponentialFit};
use crate::propagator::{propagate_segment, Environment, IntegratorConfig};
use crate::sequence::{optical_pair, ProtocolParams};
use crate::state::{DensityMatrix, Level};
use crate::{mhz_to_rad_per_ns, Error, Result};

/// Start of every pumping-decay fit, past the turn-on transient.
pub const FIT_START_NS: f64 = 5.0;
/// Fit windows end at this multiple of the slow target time.
pub const FIT_SPAN_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpingConfig {
    pub rabi_opt_mhz: f64,
    /// Raman detuning of the off-resonant trace.
    pub off_raman_mhz: f64,
    pub fast_target_ns: f64,
    pub slow_target_ns: f64,
}

impl Default for PumpingConfig {
    fn default() -> Self {
        PumpingConfig {
            rabi_opt_mhz: 27.0,
            off_raman_mhz: 20.0,
            fast_target_ns: 31.0,
            slow_target_ns: 450.0,
        }
    }
}

impl PumpingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fast_target_ns", self.fast_target_ns),
            ("slow_target_ns", self.slow_target_ns),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("target must be finite and > 0, got {v}")));
            }
        }
        if !(self.rabi_opt_mhz > 0.0) {
            return Err(Error::param("rabi_opt_mhz", "must be > 0"));
        }
        Ok(())
    }

    pub fn fit_end_ns(&self) -> f64 {
        FIT_SPAN_FACTOR * self.slow_target_ns
    }

    /// Simulated length: the fit window plus one bin of margin.
    pub fn record_ns(&self, det: &DetectorModel) -> f64 {
        self.fit_end_ns() + det.bin_ns
    }
}

/// A2 fluorescence from GM under the optical pair at the given Raman
/// detuning. Expected counts (no shot noise).
pub fn pumping_trace(
    params: &DecoherenceParams,
    cfg: &PumpingConfig,
    raman_detuning_mhz: f64,
    integrator: &IntegratorConfig,
    det: &DetectorModel,
) -> Result<TimeTrace> {
    params.validate()?;
    let env = Environment::from_params(params);
    let protocol = ProtocolParams {
        rabi_opt_mhz: cfg.rabi_opt_mhz,
        raman_detuning_mhz,
        ..Default::default()
    };
    let h = env.hamiltonian(&optical_pair(&protocol, 0.0, 0.0)?)?;
    let traj = propagate_segment(
        &DensityMatrix::projector(Level::GM),
        &h,
        &env.collapses,
        cfg.record_ns(det),
        integrator,
    )?;
    let expected = DetectorModel {
        poisson: false,
        ..det.clone()
    };
    fluorescence_trace(&traj, Level::A2, params.gamma_sp, &expected)
}

/// Double-exponential fit of the on-resonance trace.
pub fn fit_on_raman(trace: &TimeTrace, cfg: &PumpingConfig) -> Result<ExponentialFit> {
    fit_window(trace, 2, cfg)
}

/// Single-exponential fit of the off-resonance trace.
pub fn fit_off_raman(trace: &TimeTrace, cfg: &PumpingConfig) -> Result<ExponentialFit> {
    fit_window(trace, 1, cfg)
}

fn fit_window(trace: &TimeTrace, n: usize, cfg: &PumpingConfig) -> Result<ExponentialFit> {
    let opts = ExpFitOptions {
        t_end_ns: Some(cfg.fit_end_ns()),
        ..Default::default()
    };
    fit_exponential_xy(&trace.bin_centers_ns(), &trace.counts, n, FIT_START_NS, opts)
}

/// Fast on-resonance pumping time for the given rates.
pub fn on_raman_time(
    params: &DecoherenceParams,
    cfg: &PumpingConfig,
    integrator: &IntegratorConfig,
    det: &DetectorModel,
) -> Result<f64> {
    let tr = pumping_trace(params, cfg, 0.0, integrator, det)?;
    Ok(fit_on_raman(&tr, cfg)?.fastest_tau())
}

/// Off-resonance decay time for the given rates.
pub fn off_raman_time(
    params: &DecoherenceParams,
    cfg: &PumpingConfig,
    integrator: &IntegratorConfig,
    det: &DetectorModel,
) -> Result<f64> {
    let tr = pumping_trace(params, cfg, cfg.off_raman_mhz, integrator, det)?;
    Ok(fit_off_raman(&tr, cfg)?.fastest_tau())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rate: f64,
    pub fitted_ns: f64,
    pub target_ns: f64,
    pub evaluations: usize,
}

/// Relative accuracy the root finder aims for; the contract is 2%.
const ROOT_TOL: f64 = 1e-4;

/// Solves `τ(γ) = target` for a decay time that decreases with the rate.
fn solve_rate<F>(name: &str, target_ns: f64, lo: f64, hi: f64, tau: F) -> Result<Calibration>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(target_ns > 0.0 && target_ns.is_finite()) {
        return Err(Error::param(
            "target_ns",
            format!("{name}: target must be finite and > 0, got {target_ns}"),
        ));
    }
    let g = |x: f64| -> Result<f64> { Ok((tau(x.exp())? / target_ns).ln()) };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (mut fa, mut fb) = (g(a)?, g(b)?);
    let mut evaluations = 2;
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::Calibration(format!(
            "{name}: target {target_ns} ns not bracketed: rate {lo:.4e} gives {:.2} ns, rate {hi:.4e} gives {:.2} ns",
            target_ns * fa.exp(),
            target_ns * fb.exp()
        )));
    }
    let mut side = 0i8;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(c)?;
        evaluations += 1;
        if fc.abs() < ROOT_TOL {
            return Ok(Calibration {
                rate: c.exp(),
                fitted_ns: target_ns * fc.exp(),
                target_ns,
                evaluations,
            });
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        }
    }
    Err(Error::Calibration(format!(
        "{name}: no convergence within 100 evaluations (bracket {:.4e}..{:.4e})",
        a.exp(),
        b.exp()
    )))
}

/// `gamma_sp` reproducing the fast on-resonance pumping time. The search
/// spans 0.01/ns up to the optical Rabi frequency in rad/ns, the range over
/// which stronger decay speeds up pumping.
pub fn calibrate_gamma_sp(
    target_ns: f64,
    params: &DecoherenceParams,
    cfg: &PumpingConfig,
    integrator: &IntegratorConfig,
    det: &DetectorModel,
) -> Result<Calibration> {
    cfg.validate()?;
    let hi = mhz_to_rad_per_ns(cfg.rabi_opt_mhz);
    solve_rate("gamma_sp", target_ns, 0.01, hi, |g| {
        let p = DecoherenceParams {
            gamma_sp: g,
            ..params.clone()
        };
        on_raman_time(&p, cfg, integrator, det)
    })
}

/// `gamma_mix` reproducing the off-resonance decay time.
pub fn calibrate_gamma_mix(
    target_ns: f64,
    params: &DecoherenceParams,
    cfg: &PumpingConfig,
    integrator: &IntegratorConfig,
    det: &DetectorModel,
) -> Result<Calibration> {
    cfg.validate()?;
    solve_rate("gamma_mix", target_ns, 1e-4, 0.1, |g| {
        let p = DecoherenceParams {
            gamma_mix: g,
            ..params.clone()
        };
        off_raman_time(&p, cfg, integrator, det)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCalibration {
    pub gamma_sp: Calibration,
    pub gamma_mix: Calibration,
    /// `(gamma_sp, gamma_mix)` after each pass.
    pub passes: Vec<(f64, f64)>,
    /// Relative change of `gamma_sp` in the last pass.
    pub gamma_sp_change: f64,
}

impl JointCalibration {
    pub fn apply(&self, params: &DecoherenceParams) -> DecoherenceParams {
        DecoherenceParams {
            gamma_sp: self.gamma_sp.rate,
            gamma_mix: self.gamma_mix.rate,
            ..params.clone()
        }
    }

    /// Config fragment to merge into an experiment config.
    pub fn to_json_fragment(&self) -> serde_json::Value {
        json!({
            "schema": 1,
            "physics": {
                "decoherence": {
                    "gamma_sp": self.gamma_sp.rate,
                    "gamma_mix": self.gamma_mix.rate,
                }
            }
        })
    }
}

/// Alternates the two calibrations (each uses the other's latest value)
/// until `gamma_sp` moves by less than `rel_tol` in a pass.
pub fn calibrate_joint(
    params: &DecoherenceParams,
    cfg: &PumpingConfig,
    integrator: &IntegratorConfig,
    det: &DetectorModel,
    rel_tol: f64,
    max_passes: usize,
) -> Result<JointCalibration> {
    let mut p = params.clone();
    let mut passes = Vec::new();
    let mut last_sp = f64::NAN;
    for _ in 0..max_passes.max(1) {
        let sp = calibrate_gamma_sp(cfg.fast_target_ns, &p, cfg, integrator, det)?;
        p.gamma_sp = sp.rate;
        let mix = calibrate_gamma_mix(cfg.slow_target_ns, &p, cfg, integrator, det)?;
        p.gamma_mix = mix.rate;
        passes.push((p.gamma_sp, p.gamma_mix));
        let change = ((sp.rate - last_sp) / sp.rate).abs();
        last_sp = sp.rate;
        if change < rel_tol {
            return Ok(JointCalibration {
                gamma_sp: sp,
                gamma_mix: mix,
                passes,
                gamma_sp_change: change,
            });
        }
    }
    Err(Error::Calibration(format!(
        "joint calibration did not settle within {max_passes} passes: {passes:?}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_validation() {
        let p = DecoherenceParams::default();
        let cfg = PumpingConfig::default();
        let ic = IntegratorConfig::default();
        let det = DetectorModel::default();
        for bad in [f64::INFINITY, 0.0, -3.0, f64::NAN] {
            assert!(calibrate_gamma_sp(bad, &p, &cfg, &ic, &det).is_err());
        }
        // far below the fastest reachable pumping time
        let err = calibrate_gamma_sp(1.0, &p, &cfg, &ic, &det).unwrap_err();
        assert!(matches!(err, Error::Calibration(ref m) if m.contains("not bracketed")), "{err}");
    }

    #[test]
    fn solver_on_power_law() {
        // τ = 4/γ has the root γ = 4/31
        let c = solve_rate("x", 31.0, 0.01, 1.0, |g| Ok(4.0 / g)).unwrap();
        assert!((c.rate - 4.0 / 31.0).abs() / c.rate < 2e-4);
        assert!(c.evaluations < 20);
    }
}
