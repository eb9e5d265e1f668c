// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use nvphase::experiments::{
    exp_mw_to_opt, exp_opt_to_mw, hyperfine_average, parse_config, reanalyze, run_experiment, ExperimentConfig,
    EXPERIMENTS,
};
use nvphase::fit::wrap_phase;
use nvphase::par::Execution;

fn cfg(sets: &[&str]) -> ExperimentConfig {
    let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
    parse_config("{}", &sets).unwrap()
}

fn small() -> ExperimentConfig {
    cfg(&[
        "seed=5",
        "detector.poisson=true",
        "physics.decoherence.dephasing_model=STATIC_GAUSSIAN",
        "physics.decoherence.static_samples=3",
        "sweep.mw2opt.phases=8",
        "sweep.cpt.points=15",
        "sweep.cpt.duration_ns=1000",
        "sweep.cpt.rabi_scan_mhz=[27]",
        "sweep.opt2mw.phases=8",
        "sweep.opt2mw.delay_points=4",
        "sweep.opt2mw.readout.mode=driven",
    ])
}

fn phase_gap(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

#[test]
fn reanalysis_reproduces_every_experiment() {
    let mut c = small();
    c.detector.poisson = false;
    c.physics.decoherence.dephasing_model = nvphase::dissipation::DephasingModel::Lindblad;
    for name in EXPERIMENTS {
        let r = run_experiment(name, &c).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = reanalyze(&r).unwrap();
        assert_eq!(r.derived, again.derived, "{name}");
        assert_eq!(r.tables, again.tables, "{name}");
    }
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    for name in ["mw2opt", "opt2mw"] {
        let mut c = small();
        c.execution = Execution::Sequential;
        let seq = run_experiment(name, &c).unwrap();
        c.execution = Execution::Parallel;
        let par = run_experiment(name, &c).unwrap();
        assert_eq!(seq.raw, par.raw, "{name}");
        assert_eq!(seq.derived, par.derived, "{name}");
    }
}

#[test]
fn seed_changes_only_noisy_output() {
    let mut c = small();
    let a = exp_mw_to_opt(&c).unwrap();
    c.seed += 1;
    assert_ne!(a.raw, exp_mw_to_opt(&c).unwrap().raw);

    let mut quiet = cfg(&["sweep.mw2opt.phases=8"]);
    let a = exp_mw_to_opt(&quiet).unwrap();
    quiet.seed += 1;
    assert_eq!(a.raw, exp_mw_to_opt(&quiet).unwrap().raw);
}

#[test]
fn fringe_follows_microwave_phase() {
    let base = cfg(&["physics.decoherence.gamma_mix=0", "physics.decoherence.dephasing_model=OFF"]);
    for theta in [0.0, 0.7, -2.0] {
        let mut c = base.clone();
        c.sweep.mw2opt.mw_phase_plus_rad = theta;
        let r = exp_mw_to_opt(&c).unwrap();
        assert!(phase_gap(r.derived("phase0_rad").unwrap(), theta) < 1e-3, "theta {theta}");
    }
}

#[test]
fn readout_minimum_follows_optical_phase() {
    let base = cfg(&[
        "physics.decoherence.gamma_mix=0",
        "physics.decoherence.dephasing_model=OFF",
        "sweep.opt2mw.delay_points=2",
    ]);
    for phi in [0.0, PI / 3.0, 2.5] {
        let mut c = base.clone();
        c.sweep.opt2mw.opt_phase_rad = phi;
        let r = exp_opt_to_mw(&c).unwrap();
        assert!(phase_gap(r.derived("min_phase_rad").unwrap(), phi) < 1e-2, "phi {phi}");
        assert!(r.derived("visibility").unwrap() > 0.99);
    }
}

#[test]
fn hyperfine_average_identity_and_passthrough() {
    let mut c = small();
    c.detector.poisson = false;
    let r = exp_mw_to_opt(&c).unwrap();
    let same = hyperfine_average(&[r.clone(), r.clone(), r.clone()], &[1.0 / 3.0; 3]).unwrap();
    assert_eq!(same.raw, r.raw);
    assert_eq!(same.derived, r.derived);

    c.physics.rabi_opt_mhz = 20.0;
    let other = exp_mw_to_opt(&c).unwrap();
    let pick = hyperfine_average(&[other.clone(), r.clone()], &[0.0, 1.0]).unwrap();
    assert_eq!(pick.raw, r.raw);
    assert!(hyperfine_average(&[other, r], &[0.5, 0.6]).is_err());
}

#[test]
fn hyperfine_average_caps_readout_visibility() {
    let mut c = cfg(&[
        "physics.decoherence.gamma_mix=0",
        "physics.decoherence.dephasing_model=OFF",
        "physics.hyperfine_model=selective",
        "sweep.opt2mw.delay_points=2",
    ]);
    let single = exp_opt_to_mw(&c).unwrap().derived("visibility").unwrap();
    c.hyperfine_average = true;
    let averaged = exp_opt_to_mw(&c).unwrap().derived("visibility").unwrap();
    // Microwaves miss two manifolds, which stay in G0 throughout; the
    // third swings G0 over [0, 1]. Signal spans [2/3, 1].
    let (hi, lo) = (1.0, 2.0 / 3.0);
    let oracle = (hi - lo) / (hi + lo);
    assert!(single > 0.99);
    assert!((averaged - oracle).abs() < 5e-3, "{averaged} vs {oracle}");
}
