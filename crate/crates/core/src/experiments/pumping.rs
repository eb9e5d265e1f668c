// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Time-resolved optical pumping from GM, on and off Raman resonance.

use super::config::ExperimentConfig;
use super::{apply_shot_noise, simulate, ExperimentResult, FitResult, Table};
use crate::detector::{fluorescence_trace, DetectorModel, TimeTrace};
use crate::dissipation::calibrate::{fit_off_raman, fit_on_raman};
use crate::drive::NuclearLabel;
use crate::propagator::run_sequence;
use crate::sequence::{optical_pair, ProtocolParams, PulseSegment, Sequence};
use crate::state::Level;
use crate::{Error, Result};

pub(super) const NAME: &str = "pump";

/// The on-resonance and off-resonance pulses from GM.
pub fn planned_pumping(cfg: &ExperimentConfig) -> Result<Vec<Sequence>> {
    let pump = cfg.pumping();
    [0.0, pump.off_raman_mhz]
        .into_iter()
        .map(|delta| {
            let protocol = ProtocolParams {
                rabi_opt_mhz: pump.rabi_opt_mhz,
                raman_detuning_mhz: delta,
                ..Default::default()
            };
            let pulse = PulseSegment::new(pump.record_ns(&cfg.detector), optical_pair(&protocol, 0.0, 0.0)?)?;
            Sequence::new("pump", Level::GM, vec![pulse.labelled("optical")])
        })
        .collect()
}

pub fn exp_pumping(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let det = DetectorModel {
        poisson: false,
        ..cfg.detector.clone()
    };
    let gamma = cfg.physics.decoherence.gamma_sp;
    let seqs = planned_pumping(cfg)?;
    let runs = simulate(cfg, &[NuclearLabel::default()], &seqs, |seq, env| {
        let traj = run_sequence(seq, &seq.initial_state(), env, &cfg.integrator)?;
        Ok(vec![fluorescence_trace(&traj, Level::A2, gamma, &det)?.counts])
    })?;
    let on = runs[0][0][0].clone();
    let off = runs[0][1][0].clone();
    let t: Vec<f64> = (0..on.len()).map(|i| i as f64 * det.bin_ns).collect();
    let mut raw = vec![Table::new(
        "traces",
        vec!["t_ns".into(), "on_raman".into(), "off_raman".into()],
        vec![t, on, off],
    )];
    apply_shot_noise(cfg, &mut raw);
    analyze(ExperimentResult::new(NAME, raw, cfg))
}

pub(super) fn analyze(mut res: ExperimentResult) -> Result<ExperimentResult> {
    let cfg = res.config.clone();
    let pump = cfg.pumping();
    let raw = res
        .raw_table("traces")
        .ok_or_else(|| Error::Config("pump result has no `traces` table".into()))?
        .clone();
    let trace = |name: &str| -> Result<TimeTrace> {
        let c = raw
            .column(name)
            .ok_or_else(|| Error::GridMismatch(format!("traces has no column `{name}`")))?;
        Ok(TimeTrace::new(raw.grid()[0], cfg.detector.bin_ns, c.to_vec()))
    };
    let on = trace("on_raman")?;
    let off = trace("off_raman")?;
    let on_fit = fit_on_raman(&on, &pump)?;
    let off_fit = fit_off_raman(&off, &pump)?;
    res.set("tau_fast_ns", on_fit.fastest_tau());
    res.set("tau_slow_ns", on_fit.slowest_tau());
    res.set("tau_off_ns", off_fit.fastest_tau());
    res.set("fast_target_ns", pump.fast_target_ns);
    res.set("slow_target_ns", pump.slow_target_ns);
    let centers = on.bin_centers_ns();
    res.tables.push(Table::new(
        "fits",
        vec!["t_ns".into(), "on_raman_fit".into(), "off_raman_fit".into()],
        vec![
            centers.clone(),
            centers.iter().map(|&t| on_fit.eval(t)).collect(),
            centers.iter().map(|&t| off_fit.eval(t)).collect(),
        ],
    ));
    res.fit("on_raman", FitResult::Exponential(on_fit));
    res.fit("off_raman", FitResult::Exponential(off_fit));
    Ok(res)
}
