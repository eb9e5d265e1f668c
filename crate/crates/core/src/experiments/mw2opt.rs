// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Microwave → optical phase transfer: fringes in the A2 fluorescence as
//! the optical relative phase is swept.

use super::config::ExperimentConfig;
use super::{apply_shot_noise, combine, decreasing, phase_columns, simulate, ExperimentResult, FitResult, Table};
use crate::detector::{fluorescence_trace, windowed_counts, DetectorModel, TimeTrace};
use crate::fit::{fit_contrast_decay, fit_exponential_xy, fit_sinusoid, ExpFitOptions, FringeData};
use crate::propagator::run_sequence;
use crate::sequence::{seq_mw_to_opt, Sequence};
use crate::state::Level;
use crate::{Error, Result};

pub(super) const NAME: &str = "mw2opt";
const READOUT_SEGMENT: usize = 3;

/// The sequences run for each optical phase, in grid order.
pub fn planned_mw_to_opt(cfg: &ExperimentConfig) -> Result<Vec<Sequence>> {
    let s = &cfg.sweep.mw2opt;
    FringeData::uniform_phases(s.phases)
        .into_iter()
        .map(|phi| seq_mw_to_opt(s.mw_phase_plus_rad, s.mw_phase_minus_rad, phi, 0.0, &cfg.protocol()))
        .collect()
}

pub fn exp_mw_to_opt(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let seqs = planned_mw_to_opt(cfg)?;
    let det = DetectorModel {
        poisson: false,
        ..cfg.detector.clone()
    };
    let gamma = cfg.physics.decoherence.gamma_sp;
    let runs = simulate(cfg, &cfg.manifolds(), &seqs, |seq, env| {
        let traj = run_sequence(seq, &seq.initial_state(), env, &cfg.integrator)?;
        let readout = traj.segment(READOUT_SEGMENT).expect("readout segment");
        Ok(vec![fluorescence_trace(&readout, Level::A2, gamma, &det)?.counts])
    })?;
    let n_bins = runs[0][0][0].len();
    let t: Vec<f64> = (0..n_bins).map(|i| i as f64 * det.bin_ns).collect();
    let per_manifold = runs
        .into_iter()
        .map(|m| {
            let mut cols = vec![t.clone()];
            cols.extend(m.into_iter().map(|mut p| p.swap_remove(0)));
            let mut names = vec!["t_ns".to_string()];
            names.extend(phase_columns("phase_", seqs.len()));
            vec![Table::new("traces", names, cols)]
        })
        .collect();
    let mut raw = combine(cfg, per_manifold)?;
    apply_shot_noise(cfg, &mut raw);
    analyze(ExperimentResult::new(NAME, raw, cfg))
}

fn fringe_at(traces: &[TimeTrace], phases: &[f64], t0: f64, window: f64) -> Result<(Vec<f64>, FringeData)> {
    let signal = traces
        .iter()
        .map(|tr| windowed_counts(tr, t0, window))
        .collect::<Result<Vec<_>>>()?;
    let data = FringeData::new(phases.to_vec(), signal.clone())?;
    Ok((signal, data))
}

pub(super) fn analyze(mut res: ExperimentResult) -> Result<ExperimentResult> {
    let cfg = res.config.clone();
    let s = &cfg.sweep.mw2opt;
    let raw = res
        .raw_table("traces")
        .ok_or_else(|| Error::Config("mw2opt result has no `traces` table".into()))?
        .clone();
    let phases = FringeData::uniform_phases(s.phases);
    if raw.data.len() != phases.len() + 1 {
        return Err(Error::GridMismatch(format!(
            "{} traces for {} phases",
            raw.data.len() - 1,
            phases.len()
        )));
    }
    let traces: Vec<TimeTrace> = raw.data[1..]
        .iter()
        .map(|c| TimeTrace::new(raw.grid()[0], cfg.detector.bin_ns, c.clone()))
        .collect();

    let (signal, data) = fringe_at(&traces, &phases, s.window_t0_ns, s.window_ns)?;
    let fringe = fit_sinusoid(&data)?;
    res.set("visibility", fringe.visibility);
    res.set("phase0_rad", fringe.phase0);
    res.set("r_squared", fringe.r_squared);
    res.fit("fringe", FitResult::Sinusoid(fringe));
    res.tables.push(Table::new(
        "fringe",
        vec!["phi_opt_rad".into(), "counts".into(), "fit".into()],
        vec![phases.clone(), signal.clone(), phases.iter().map(|&p| fringe.eval(p)).collect()],
    ));

    let argmax = (0..signal.len()).fold(0, |b, i| if signal[i] > signal[b] { i } else { b });
    let argmin = (0..signal.len()).fold(0, |b, i| if signal[i] < signal[b] { i } else { b });
    res.set("max_trace_phase_rad", phases[argmax]);
    res.set("min_trace_phase_rad", phases[argmin]);
    res.tables.push(Table::new(
        "extreme_traces",
        vec!["t_ns".into(), "max".into(), "min".into()],
        vec![raw.grid().to_vec(), traces[argmax].counts.clone(), traces[argmin].counts.clone()],
    ));

    let end = traces[0].end_ns();
    let mut t0s = Vec::new();
    let mut vis = Vec::new();
    for k in 0.. {
        let t0 = k as f64 * s.t0_step_ns;
        if t0 + s.window_ns > end + 1e-9 {
            break;
        }
        let (_, d) = fringe_at(&traces, &phases, t0, s.window_ns)?;
        match fit_sinusoid(&d) {
            Ok(f) => {
                t0s.push(t0);
                vis.push(f.visibility);
            }
            Err(e) => res.notes.push(format!("window at t0 = {t0} ns skipped: {e}")),
        }
    }
    res.set("visibility_monotone", f64::from(u8::from(decreasing(&vis))));
    let mut cols = vec![t0s.clone(), vis.clone()];
    let mut names = vec!["t0_ns".to_string(), "visibility".to_string()];
    match fit_contrast_decay(&t0s, &vis) {
        Ok(f) => {
            res.set("tau_visibility_ns", f.tau_ns);
            names.push("contrast_fit".into());
            cols.push(t0s.iter().map(|&t| f.eval(t)).collect());
            res.fit("visibility_contrast", FitResult::ContrastDecay(f));
        }
        Err(e) => res.notes.push(format!("visibility contrast-decay fit not made: {e}")),
    }
    match fit_exponential_xy(&t0s, &vis, 1, 0.0, ExpFitOptions::default()) {
        Ok(f) => {
            res.set("tau_visibility_single_exp_ns", f.fastest_tau());
            names.push("single_exp_fit".into());
            cols.push(t0s.iter().map(|&t| f.eval(t)).collect());
            res.fit("visibility_single_exp", FitResult::Exponential(f));
        }
        Err(e) => res.notes.push(format!("visibility single-exponential fit not made: {e}")),
    }
    res.tables.push(Table::new("visibility_vs_t0", names, cols));
    Ok(res)
}
