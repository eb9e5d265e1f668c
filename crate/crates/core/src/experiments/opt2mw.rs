// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Optical → microwave phase transfer: optical pumping writes a dark
//! state, a microwave pair reads it out as G0 population.

use super::config::{ExperimentConfig, EyReadoutMode};
use super::{apply_shot_noise, combine, phase_columns, simulate, ExperimentResult, FitResult, Table};
use crate::detector::{fluorescence_trace, DetectorModel};
use crate::drive::{DriveField, Transition};
use crate::fit::{fit_exponential_xy, fit_sinusoid, wrap_phase, ExpFitOptions, FringeData};
use crate::propagator::run_sequence;
use crate::sequence::{seq_opt_to_mw, PulseSegment, Sequence};
use crate::state::Level;
use crate::{Error, Result};

pub(super) const NAME: &str = "opt2mw";

/// Fringe sequences (one per microwave phase) followed by the delay scan
/// (delay-major, then phase).
pub fn planned_opt_to_mw(cfg: &ExperimentConfig) -> Result<Vec<Sequence>> {
    let s = &cfg.sweep.opt2mw;
    let protocol = cfg.protocol();
    let mut points: Vec<(f64, f64)> = FringeData::uniform_phases(s.phases)
        .into_iter()
        .map(|p| (s.fringe_delay_ns, p))
        .collect();
    for d in s.delays() {
        points.extend(FringeData::uniform_phases(s.delay_phases).into_iter().map(|p| (d, p)));
    }
    points
        .into_iter()
        .map(|(delay, phi)| {
            let mut seq = seq_opt_to_mw((s.opt_phase_rad, 0.0), (phi, 0.0), delay, &protocol)?;
            if s.readout.mode == EyReadoutMode::Driven {
                let probe = DriveField::resonant(Transition::G0Ey, s.readout.rabi_mhz, 0.0)?;
                seq.segments
                    .push(PulseSegment::new(s.readout.duration_ns, vec![probe])?.labelled("ey_readout"));
            }
            Ok(seq)
        })
        .collect()
}

pub fn exp_opt_to_mw(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let s = &cfg.sweep.opt2mw;
    let seqs = planned_opt_to_mw(cfg)?;
    let det = DetectorModel {
        poisson: false,
        ..cfg.detector.clone()
    };
    let driven = s.readout.mode == EyReadoutMode::Driven;
    let gamma_ey = cfg.physics.decoherence.gamma_ey;
    let runs = simulate(cfg, &cfg.manifolds(), &seqs, |seq, env| {
        let traj = run_sequence(seq, &seq.initial_state(), env, &cfg.integrator)?;
        let signal = if driven {
            let probe = traj.segment(seq.segments.len() - 1).expect("readout segment");
            fluorescence_trace(&probe, Level::EY, gamma_ey, &det)?.total()
        } else {
            det.efficiency * traj.final_state().population(Level::G0)
        };
        Ok(vec![vec![signal]])
    })?;

    let phases = FringeData::uniform_phases(s.phases);
    let delays = s.delays();
    let per_manifold = runs
        .into_iter()
        .map(|m| {
            let v: Vec<f64> = m.iter().map(|p| p[0][0]).collect();
            let (fringe, scan) = v.split_at(s.phases);
            let mut cols = vec![delays.clone()];
            for k in 0..s.delay_phases {
                cols.push((0..delays.len()).map(|d| scan[d * s.delay_phases + k]).collect());
            }
            let mut names = vec!["delay_ns".to_string()];
            names.extend(phase_columns("phase_", s.delay_phases));
            vec![
                Table::new(
                    "fringe_raw",
                    vec!["phi_mw_rad".into(), "signal".into()],
                    vec![phases.clone(), fringe.to_vec()],
                ),
                Table::new("delay_scan", names, cols),
            ]
        })
        .collect();
    let mut raw = combine(cfg, per_manifold)?;
    let mut res_notes = Vec::new();
    if driven {
        apply_shot_noise(cfg, &mut raw);
    } else if cfg.detector.poisson {
        res_notes.push("shot noise not applied: population readout is not a count signal".to_string());
    }
    let mut res = analyze(ExperimentResult::new(NAME, raw, cfg))?;
    res.notes.extend(res_notes);
    Ok(res)
}

pub(super) fn analyze(mut res: ExperimentResult) -> Result<ExperimentResult> {
    let cfg = res.config.clone();
    let s = &cfg.sweep.opt2mw;
    let table = |name: &str| {
        res.raw_table(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("opt2mw result has no `{name}` table")))
    };
    let fringe_raw = table("fringe_raw")?;
    let scan = table("delay_scan")?;

    let phases = fringe_raw.grid().to_vec();
    let signal = fringe_raw.data[1].clone();
    let fringe = fit_sinusoid(&FringeData::new(phases.clone(), signal.clone())?)?;
    res.set("visibility", fringe.visibility);
    res.set("phase0_rad", fringe.phase0);
    res.set("min_phase_rad", wrap_phase(fringe.phase0 + std::f64::consts::PI));
    res.set("r_squared", fringe.r_squared);
    res.fit("fringe", FitResult::Sinusoid(fringe));
    res.tables.push(Table::new(
        "fringe",
        vec!["phi_mw_rad".into(), "signal".into(), "fit".into()],
        vec![phases.clone(), signal, phases.iter().map(|&p| fringe.eval(p)).collect()],
    ));

    let scan_phases = FringeData::uniform_phases(s.delay_phases);
    let mut kept = Vec::new();
    let mut vis = Vec::new();
    for (d, &delay) in scan.grid().iter().enumerate() {
        let y: Vec<f64> = scan.data[1..].iter().map(|c| c[d]).collect();
        match fit_sinusoid(&FringeData::new(scan_phases.clone(), y)?) {
            Ok(f) => {
                kept.push(delay);
                vis.push(f.visibility);
            }
            Err(e) => res.notes.push(format!("delay {delay} ns skipped: {e}")),
        }
    }
    let delays = kept;
    let mut names = vec!["delay_ns".to_string(), "visibility".to_string()];
    let mut cols = vec![delays.clone(), vis.clone()];
    let start = delays.first().copied().unwrap_or(0.0);
    match fit_exponential_xy(&delays, &vis, 1, start, ExpFitOptions::default()) {
        Ok(f) => {
            res.set("tau_delay_ns", f.fastest_tau());
            names.push("fit".into());
            cols.push(delays.iter().map(|&t| f.eval(t)).collect());
            res.fit("visibility_vs_delay", FitResult::Exponential(f));
        }
        Err(e) => res.notes.push(format!("visibility-vs-delay fit not made: {e}")),
    }
    res.tables.push(Table::new("visibility_vs_delay", names, cols));
    Ok(res)
}
