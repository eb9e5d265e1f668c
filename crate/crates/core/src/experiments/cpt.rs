// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Coherent population trapping: total A2 fluorescence against the Raman
//! detuning of the optical pair, starting from GM.

use super::config::ExperimentConfig;
use super::{apply_shot_noise, simulate, ExperimentResult, FitResult, Table};
use crate::detector::{fluorescence_trace, DetectorModel};
use crate::drive::NuclearLabel;
use crate::fit::fit_lorentzian_dip;
use crate::propagator::run_sequence;
use crate::sequence::{optical_pair, ProtocolParams, PulseSegment, Sequence};
use crate::state::Level;
use crate::{Error, Result};

pub(super) const NAME: &str = "cpt";

/// The configured optical Rabi frequency first, then the scan values not
/// already listed.
fn rabis(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut out = vec![cfg.physics.rabi_opt_mhz];
    for &r in &cfg.sweep.cpt.rabi_scan_mhz {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

fn column(rabi: f64) -> String {
    format!("rabi_{rabi}mhz")
}

/// One optical pulse from GM per (Rabi frequency, detuning), Rabi-major.
pub fn planned_cpt(cfg: &ExperimentConfig) -> Result<Vec<Sequence>> {
    let detunings = cfg.sweep.cpt.detunings();
    let mut out = Vec::new();
    for r in rabis(cfg) {
        for &delta in &detunings {
            let protocol = ProtocolParams {
                rabi_opt_mhz: r,
                raman_detuning_mhz: delta,
                ..Default::default()
            };
            let pulse = PulseSegment::new(cfg.sweep.cpt.duration_ns, optical_pair(&protocol, 0.0, 0.0)?)?;
            out.push(Sequence::new("cpt", Level::GM, vec![pulse.labelled("optical")])?);
        }
    }
    Ok(out)
}

pub fn exp_cpt(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let detunings = cfg.sweep.cpt.detunings();
    let rabis = rabis(cfg);
    let seqs = planned_cpt(cfg)?;
    let det = DetectorModel {
        poisson: false,
        ..cfg.detector.clone()
    };
    let gamma = cfg.physics.decoherence.gamma_sp;
    // optical only: manifold independent
    let runs = simulate(cfg, &[NuclearLabel::default()], &seqs, |seq, env| {
        let traj = run_sequence(seq, &seq.initial_state(), env, &cfg.integrator)?;
        Ok(vec![vec![fluorescence_trace(&traj, Level::A2, gamma, &det)?.total()]])
    })?;
    let totals: Vec<f64> = runs[0].iter().map(|p| p[0][0]).collect();
    let mut names = vec!["detuning_mhz".to_string()];
    let mut cols = vec![detunings.clone()];
    for (k, &r) in rabis.iter().enumerate() {
        names.push(column(r));
        cols.push(totals[k * detunings.len()..(k + 1) * detunings.len()].to_vec());
    }
    let mut raw = vec![Table::new("spectrum", names, cols)];
    apply_shot_noise(cfg, &mut raw);
    analyze(ExperimentResult::new(NAME, raw, cfg))
}

pub(super) fn analyze(mut res: ExperimentResult) -> Result<ExperimentResult> {
    let cfg = res.config.clone();
    let spectrum = res
        .raw_table("spectrum")
        .ok_or_else(|| Error::Config("cpt result has no `spectrum` table".into()))?
        .clone();
    let x = spectrum.grid().to_vec();
    let mut norm_cols = vec![x.clone()];
    let mut norm_names = vec!["detuning_mhz".to_string()];
    for (k, r) in rabis(&cfg).into_iter().enumerate() {
        let name = column(r);
        let y = spectrum
            .column(&name)
            .ok_or_else(|| Error::GridMismatch(format!("spectrum has no column `{name}`")))?;
        let fit = fit_lorentzian_dip(&x, y)?;
        if k == 0 {
            res.set("center_mhz", fit.center_mhz);
            res.set("fwhm_mhz", fit.fwhm_mhz);
            res.set("depth", fit.depth);
            res.set("baseline", fit.baseline);
        }
        res.set(&format!("fwhm_{name}"), fit.fwhm_mhz);
        res.fit(&format!("dip_{name}"), FitResult::Lorentzian(fit));
        norm_names.push(name);
        norm_cols.push(y.iter().map(|v| v / fit.baseline).collect());
    }
    if x.len() > 1 {
        res.set("grid_step_mhz", x[1] - x[0]);
    }

    let mut scan = cfg.sweep.cpt.rabi_scan_mhz.clone();
    scan.sort_by(f64::total_cmp);
    scan.dedup();
    if scan.len() > 1 {
        let widths: Vec<f64> = scan.iter().map(|&r| res.derived[&format!("fwhm_{}", column(r))]).collect();
        let increasing = widths.windows(2).all(|w| w[1] > w[0]);
        res.set("fwhm_monotone", f64::from(u8::from(increasing)));
    }
    res.tables.push(Table::new("spectrum_normalized", norm_names, norm_cols));
    Ok(res)
}
