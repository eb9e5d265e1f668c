// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration (JSON, `"schema": 1`).
//!
//! Every field has a default, so `{}` is a complete config. Overrides use
//! dotted paths, e.g. `physics.decoherence.t2star_us=0.8`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::detector::DetectorModel;
use crate::dissipation::calibrate::PumpingConfig;
use crate::dissipation::{DecoherenceParams, DephasingModel};
use crate::drive::{HyperfineModel, NuclearLabel, HYPERFINE_MHZ};
use crate::par::Execution;
use crate::propagator::{Environment, IntegratorConfig};
use crate::sequence::ProtocolParams;
use crate::{seed, Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub rabi_mw_mhz: f64,
    pub rabi_opt_mhz: f64,
    pub hyperfine_mhz: f64,
    pub hyperfine_model: HyperfineModel,
    pub decoherence: DecoherenceParams,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            rabi_mw_mhz: 0.91,
            rabi_opt_mhz: 27.0,
            hyperfine_mhz: HYPERFINE_MHZ,
            hyperfine_model: HyperfineModel::Detuned,
            decoherence: DecoherenceParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mw2OptSweep {
    /// Optical relative phases, uniform over `[0, 2π)`.
    pub phases: usize,
    pub mw_phase_plus_rad: f64,
    pub mw_phase_minus_rad: f64,
    pub optical_readout_ns: f64,
    pub window_t0_ns: f64,
    pub window_ns: f64,
    /// Spacing of window starts in the visibility-vs-time scan.
    pub t0_step_ns: f64,
}

impl Default for Mw2OptSweep {
    fn default() -> Self {
        Mw2OptSweep {
            phases: 24,
            mw_phase_plus_rad: 0.0,
            mw_phase_minus_rad: 0.0,
            optical_readout_ns: 150.0,
            window_t0_ns: 0.0,
            window_ns: 28.0,
            t0_step_ns: 2.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CptSweep {
    pub detuning_min_mhz: f64,
    pub detuning_max_mhz: f64,
    pub points: usize,
    /// Optical pulse length; long enough for full shelving into G0.
    pub duration_ns: f64,
    /// Extra spectra at these optical Rabi frequencies for the
    /// width-vs-power scan. May be empty.
    pub rabi_scan_mhz: Vec<f64>,
}

impl Default for CptSweep {
    fn default() -> Self {
        CptSweep {
            detuning_min_mhz: -15.0,
            detuning_max_mhz: 15.0,
            points: 61,
            duration_ns: 3000.0,
            rabi_scan_mhz: vec![10.0, 20.0, 27.0, 40.0],
        }
    }
}

impl CptSweep {
    pub fn detunings(&self) -> Vec<f64> {
        linspace(self.detuning_min_mhz, self.detuning_max_mhz, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSweep {
    pub off_raman_mhz: f64,
    pub fast_target_ns: f64,
    pub slow_target_ns: f64,
}

impl Default for PumpSweep {
    fn default() -> Self {
        let p = PumpingConfig::default();
        PumpSweep {
            off_raman_mhz: p.off_raman_mhz,
            fast_target_ns: p.fast_target_ns,
            slow_target_ns: p.slow_target_ns,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EyReadoutMode {
    /// G0 population at the end of the microwave pair, times efficiency.
    #[default]
    Population,
    /// An extra segment drives G0↔EY; the signal is the EY fluorescence.
    Driven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EyReadout {
    pub mode: EyReadoutMode,
    pub rabi_mhz: f64,
    pub duration_ns: f64,
}

impl Default for EyReadout {
    fn default() -> Self {
        EyReadout {
            mode: EyReadoutMode::Population,
            rabi_mhz: 5.0,
            duration_ns: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Opt2MwSweep {
    /// Microwave relative phases for the fringe, uniform over `[0, 2π)`.
    pub phases: usize,
    pub opt_phase_rad: f64,
    pub pump_ns: f64,
    /// Delay used for the fringe.
    pub fringe_delay_ns: f64,
    pub delay_start_ns: f64,
    pub delay_stop_ns: f64,
    pub delay_points: usize,
    /// Microwave phases per delay in the visibility-vs-delay scan.
    pub delay_phases: usize,
    pub readout: EyReadout,
}

impl Default for Opt2MwSweep {
    fn default() -> Self {
        Opt2MwSweep {
            phases: 24,
            opt_phase_rad: 0.0,
            pump_ns: 500.0,
            fringe_delay_ns: 0.0,
            delay_start_ns: 0.0,
            delay_stop_ns: 1500.0,
            delay_points: 13,
            delay_phases: 8,
            readout: EyReadout::default(),
        }
    }
}

impl Opt2MwSweep {
    pub fn delays(&self) -> Vec<f64> {
        linspace(self.delay_start_ns, self.delay_stop_ns, self.delay_points)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub mw2opt: Mw2OptSweep,
    pub cpt: CptSweep,
    pub pump: PumpSweep,
    pub opt2mw: Opt2MwSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u64,
    /// Root of all randomness; see [`crate::seed`].
    pub seed: u64,
    pub physics: PhysicsConfig,
    pub detector: DetectorModel,
    pub integrator: IntegratorConfig,
    pub sweep: SweepConfig,
    /// Average microwave-driven experiments over the three nitrogen
    /// nuclear-spin manifolds.
    pub hyperfine_average: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            seed: 0,
            physics: PhysicsConfig::default(),
            detector: DetectorModel::default(),
            integrator: IntegratorConfig::default(),
            sweep: SweepConfig::default(),
            hyperfine_average: false,
            execution: Execution::default(),
        }
    }
}

fn named(prefix: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::InvalidParameter {
            name: format!("{prefix}.{name}"),
            reason,
        },
        other => other,
    })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be >= {min}, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::param(
                "schema",
                format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema),
            ));
        }
        let p = &self.physics;
        positive("physics.rabi_mw_mhz", p.rabi_mw_mhz)?;
        positive("physics.rabi_opt_mhz", p.rabi_opt_mhz)?;
        non_negative("physics.hyperfine_mhz", p.hyperfine_mhz)?;
        named("physics.decoherence", p.decoherence.validate())?;
        named("detector", self.detector.validate())?;
        named("integrator", self.integrator.validate())?;

        let m = &self.sweep.mw2opt;
        at_least("sweep.mw2opt.phases", m.phases, 8)?;
        positive("sweep.mw2opt.optical_readout_ns", m.optical_readout_ns)?;
        non_negative("sweep.mw2opt.window_t0_ns", m.window_t0_ns)?;
        positive("sweep.mw2opt.window_ns", m.window_ns)?;
        positive("sweep.mw2opt.t0_step_ns", m.t0_step_ns)?;
        if m.window_t0_ns + m.window_ns > m.optical_readout_ns {
            return Err(Error::param(
                "sweep.mw2opt.window_ns",
                "readout window extends past the optical readout pulse",
            ));
        }

        let c = &self.sweep.cpt;
        at_least("sweep.cpt.points", c.points, 9)?;
        positive("sweep.cpt.duration_ns", c.duration_ns)?;
        if !(c.detuning_max_mhz > c.detuning_min_mhz) {
            return Err(Error::param("sweep.cpt.detuning_max_mhz", "must exceed detuning_min_mhz"));
        }
        for r in &c.rabi_scan_mhz {
            positive("sweep.cpt.rabi_scan_mhz", *r)?;
        }

        let u = &self.sweep.pump;
        positive("sweep.pump.fast_target_ns", u.fast_target_ns)?;
        positive("sweep.pump.slow_target_ns", u.slow_target_ns)?;

        let o = &self.sweep.opt2mw;
        at_least("sweep.opt2mw.phases", o.phases, 8)?;
        at_least("sweep.opt2mw.delay_phases", o.delay_phases, 8)?;
        at_least("sweep.opt2mw.delay_points", o.delay_points, 2)?;
        non_negative("sweep.opt2mw.pump_ns", o.pump_ns)?;
        non_negative("sweep.opt2mw.fringe_delay_ns", o.fringe_delay_ns)?;
        non_negative("sweep.opt2mw.delay_start_ns", o.delay_start_ns)?;
        if !(o.delay_stop_ns > o.delay_start_ns) {
            return Err(Error::param("sweep.opt2mw.delay_stop_ns", "must exceed delay_start_ns"));
        }
        if o.readout.mode == EyReadoutMode::Driven {
            positive("sweep.opt2mw.readout.rabi_mhz", o.readout.rabi_mhz)?;
            positive("sweep.opt2mw.readout.duration_ns", o.readout.duration_ns)?;
        }
        Ok(())
    }

    pub fn protocol(&self) -> ProtocolParams {
        let m = &self.sweep.mw2opt;
        ProtocolParams {
            rabi_mw_mhz: self.physics.rabi_mw_mhz,
            rabi_opt_mhz: self.physics.rabi_opt_mhz,
            raman_detuning_mhz: 0.0,
            optical_readout_ns: m.optical_readout_ns,
            window_t0_ns: m.window_t0_ns,
            window_ns: m.window_ns,
            pump_ns: self.sweep.opt2mw.pump_ns,
        }
    }

    pub fn pumping(&self) -> PumpingConfig {
        let u = &self.sweep.pump;
        PumpingConfig {
            rabi_opt_mhz: self.physics.rabi_opt_mhz,
            off_raman_mhz: u.off_raman_mhz,
            fast_target_ns: u.fast_target_ns,
            slow_target_ns: u.slow_target_ns,
        }
    }

    /// Decoherence parameters with the seed derived from the root seed.
    pub fn decoherence(&self) -> DecoherenceParams {
        DecoherenceParams {
            seed: seed::derive(self.seed, seed::stream::STATIC_DETUNING, 0),
            ..self.physics.decoherence.clone()
        }
    }

    /// Seed for the shot noise of trace `index`.
    pub fn detector_seed(&self, index: usize) -> u64 {
        seed::derive(self.seed, seed::stream::DETECTOR, index as u64)
    }

    pub fn environment(&self, nuclear: NuclearLabel, spin_detuning_mhz: f64) -> Environment {
        Environment {
            hyperfine_mhz: self.physics.hyperfine_mhz,
            hyperfine_model: self.physics.hyperfine_model,
            nuclear,
            spin_detuning_mhz,
            ..Environment::from_params(&self.physics.decoherence)
        }
    }

    /// Quasi-static spin detunings to average over; a single zero when the
    /// dephasing model is not static.
    pub fn spin_detuning_samples(&self) -> Result<Vec<f64>> {
        let d = self.decoherence();
        if d.dephasing_model == DephasingModel::StaticGaussian {
            crate::dissipation::static_detuning_samples(&d)
        } else {
            Ok(vec![0.0])
        }
    }

    /// Nuclear manifolds simulated for microwave-driven experiments.
    pub fn manifolds(&self) -> Vec<NuclearLabel> {
        if self.hyperfine_average {
            NuclearLabel::manifolds().to_vec()
        } else {
            vec![NuclearLabel::default()]
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// `n` points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Sets `path` (dotted) in a JSON object tree, creating objects on the way.
/// `raw` is parsed as JSON when possible, otherwise taken as a string.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{path}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override `{path}`: `{}` is not an object", keys[..i].join("."))))?;
        if i == keys.len() - 1 {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("keys is nonempty")
}

/// Parses config JSON text, applies `key=value` overrides, fills defaults
/// and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut root: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
    if !root.is_object() {
        return Err(Error::Config("config: top level must be a JSON object".into()));
    }
    for ov in overrides {
        let (k, v) = ov
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
        apply_override(&mut root, k.trim(), v.trim())?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(root).map_err(|e| Error::Config(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a config file. The file is only read.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = parse_config("{}", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.physics.rabi_mw_mhz, 0.91);
        assert_eq!(cfg.physics.rabi_opt_mhz, 27.0);
        assert_eq!(cfg.physics.hyperfine_mhz, 2.2);
        assert_eq!(cfg.detector.bin_ns, 2.8);
        assert_eq!(cfg.sweep.mw2opt.window_ns, 28.0);
    }

    #[test]
    fn overrides() {
        let cfg = parse_config("{}", &["physics.rabi_opt_mhz=40".into()]).unwrap();
        assert_eq!(cfg.physics.rabi_opt_mhz, 40.0);
        let cfg = parse_config(
            r#"{"physics": {"rabi_mw_mhz": 1.0}}"#,
            &["physics.decoherence.dephasing_model=OFF".into(), "hyperfine_average=true".into()],
        )
        .unwrap();
        assert_eq!(cfg.physics.rabi_mw_mhz, 1.0);
        assert_eq!(cfg.physics.decoherence.dephasing_model, DephasingModel::Off);
        assert!(cfg.hyperfine_average);
        assert!(parse_config("{}", &["physics".into()]).is_err());
        assert!(parse_config("{}", &["physics..x=1".into()]).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let err = parse_config(r#"{"physics": {"decoherence": {"gamma_mix": -1}}}"#, &[]).unwrap_err();
        assert!(err.to_string().contains("physics.decoherence.gamma_mix"), "{err}");
        let err = parse_config(r#"{"physics": {"rabi_typo": 1}}"#, &[]).unwrap_err();
        assert!(err.to_string().contains("rabi_typo"), "{err}");
        let err = parse_config("{\n  \"seed\": \n}", &[]).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        assert!(parse_config(r#"{"schema": 2}"#, &[]).is_err());
        assert!(parse_config(r#"{"sweep": {"cpt": {"points": 3}}}"#, &[]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config("{}", &["seed=17".into(), "sweep.cpt.rabi_scan_mhz=[5, 9]".into()]).unwrap();
        let again = parse_config(&cfg.to_json(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn linspace_endpoints() {
        let x = linspace(-15.0, 15.0, 61);
        assert_eq!(x.len(), 61);
        assert_eq!(x[0], -15.0);
        assert_eq!(x[30], 0.0);
        assert_eq!(x[60], 15.0);
    }
}
