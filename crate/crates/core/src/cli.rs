// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
//! 3 invariant-suite failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checks::{run_invariant_suite, SuiteOptions};
use crate::detector::{fluorescence_trace, windowed_counts, DetectorModel};
use crate::dissipation::calibrate::calibrate_joint;
use crate::drive::NuclearLabel;
use crate::experiments::{load_config, parse_config, run_experiment, ExperimentConfig, ExperimentResult};
use crate::par::Execution;
use crate::propagator::run_sequence;
use crate::sequence::parse_sequence_file;
use crate::state::Level;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nvphase", version, about = "NV-center microwave/optical phase-transfer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config JSON; defaults are used when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dotted override, e.g. `physics.rabi_opt_mhz=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Root seed for all random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Run sweeps on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Microwave to optical phase sweep.
    Mw2opt(Common),
    /// Coherent population trapping spectrum.
    Cpt(Common),
    /// Optical pumping traces on and off Raman resonance.
    Pump(Common),
    /// Optical to microwave phase sweep and delay scan.
    Opt2mw(Common),
    /// Fit gamma_sp and gamma_mix to the pumping targets.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Relative change of gamma_sp that ends the iteration.
        #[arg(long, default_value_t = 1e-3)]
        rel_tol: f64,
        #[arg(long, default_value_t = 8)]
        max_passes: usize,
    },
    /// Run the invariant suite.
    Check(Common),
    /// Integrate a sequence file and write its trajectory.
    SequenceRun {
        /// Sequence JSON.
        sequence: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p, &c.overrides)?,
        None => parse_config("{}", &c.overrides)?,
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.sequential {
        cfg.execution = Execution::Sequential;
    }
    Ok(cfg)
}

fn out_dir(c: &Common, default: &str) -> PathBuf {
    c.out.clone().unwrap_or_else(|| Path::new("results").join(default))
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Mw2opt(c) => experiment("mw2opt", &c),
        Command::Cpt(c) => experiment("cpt", &c),
        Command::Pump(c) => experiment("pump", &c),
        Command::Opt2mw(c) => experiment("opt2mw", &c),
        Command::Calibrate {
            common,
            rel_tol,
            max_passes,
        } => calibrate(&common, rel_tol, max_passes),
        Command::Check(c) => check(&c),
        Command::SequenceRun { sequence, common } => sequence_run(&sequence, &common),
    }
}

fn experiment(name: &str, c: &Common) -> Result<i32> {
    let cfg = config(c)?;
    let res = run_experiment(name, &cfg)?;
    let dir = out_dir(c, name);
    res.write_dir(&dir)?;
    println!("{} [{}]", summary(&res), dir.display());
    Ok(EXIT_OK)
}

/// One-line summary of the headline numbers of a result.
pub fn summary(res: &ExperimentResult) -> String {
    let d = |k: &str| res.derived(k).unwrap_or(f64::NAN);
    match res.experiment.as_str() {
        "pump" => format!(
            "pump: tau_fast_ns={:.0}±{:.0} tau_slow_ns={:.0} tau_off_ns={:.0}",
            d("tau_fast_ns"),
            0.1 * d("fast_target_ns"),
            d("tau_slow_ns"),
            d("tau_off_ns"),
        ),
        "cpt" => format!(
            "cpt: center_mhz={:.3} fwhm_mhz={:.3} depth={:.3}",
            d("center_mhz"),
            d("fwhm_mhz"),
            d("depth")
        ),
        "opt2mw" => format!(
            "opt2mw: visibility={:.4} min_phase_rad={:.4} tau_delay_ns={:.1}",
            d("visibility"),
            d("min_phase_rad"),
            d("tau_delay_ns")
        ),
        _ => format!(
            "{}: visibility={:.4} phase0_rad={:.4} tau_visibility_ns={:.1}",
            res.experiment,
            d("visibility"),
            d("phase0_rad"),
            d("tau_visibility_ns")
        ),
    }
}

fn calibrate(c: &Common, rel_tol: f64, max_passes: usize) -> Result<i32> {
    let cfg = config(c)?;
    let joint = calibrate_joint(
        &cfg.decoherence(),
        &cfg.pumping(),
        &cfg.integrator,
        &DetectorModel {
            poisson: false,
            ..cfg.detector.clone()
        },
        rel_tol,
        max_passes,
    )?;
    let dir = out_dir(c, "calibrate");
    std::fs::create_dir_all(&dir)?;
    let mut frag = serde_json::to_string_pretty(&joint.to_json_fragment())?;
    frag.push('\n');
    std::fs::write(dir.join("calibration.json"), frag)?;
    let mut detail = serde_json::to_string_pretty(&joint)?;
    detail.push('\n');
    std::fs::write(dir.join("calibration_detail.json"), detail)?;
    println!(
        "calibrate: gamma_sp={:.6e} gamma_mix={:.6e} passes={} [{}]",
        joint.gamma_sp.rate,
        joint.gamma_mix.rate,
        joint.passes.len(),
        dir.display()
    );
    Ok(EXIT_OK)
}

fn check(c: &Common) -> Result<i32> {
    let cfg = config(c)?;
    let report = run_invariant_suite(&SuiteOptions {
        integrator: cfg.integrator,
        seed: cfg.seed,
    });
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
        report.write_csv(BufWriter::new(File::create(dir.join("check_report.csv"))?))?;
    }
    for f in report.failures() {
        eprintln!("FAIL {}: {}", f.name, f.detail);
    }
    println!("check: {}/{} passed", report.passed(), report.entries.len());
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_CHECK })
}

fn sequence_run(path: &Path, c: &Common) -> Result<i32> {
    let cfg = config(c)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::SequenceFormat(format!("cannot read {}: {e}", path.display())))?;
    let seq = parse_sequence_file(&text)?;
    let env = cfg.environment(NuclearLabel::default(), 0.0);
    let traj = run_sequence(&seq, &seq.initial_state(), &env, &cfg.integrator)?;
    let dir = out_dir(c, "sequence");
    std::fs::create_dir_all(&dir)?;
    let mut w = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    traj.write_csv(&mut w)?;
    w.flush()?;

    let pops = Level::ALL
        .iter()
        .map(|&l| format!("{l}={:.6}", traj.final_state().population(l)))
        .collect::<Vec<_>>()
        .join(" ");
    let mut line = format!("{}: duration_ns={} final {pops}", seq.name, seq.total_duration_ns());
    if let Some((i, r)) = seq.readout_segment() {
        let seg = traj.segment(i).expect("readout segment");
        let det = DetectorModel {
            seed: cfg.detector_seed(0),
            ..cfg.detector.clone()
        };
        let gamma = match r.level {
            Level::EY => cfg.physics.decoherence.gamma_ey,
            _ => cfg.physics.decoherence.gamma_sp,
        };
        let trace = fluorescence_trace(&seg, r.level, gamma, &det)?;
        let counts = windowed_counts(&trace, trace.start_ns() + r.t0_offset_ns, r.window_ns)?;
        line.push_str(&format!(" readout_counts={counts:.6}"));
    }
    println!("{line} [{}]", dir.display());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["nvphase", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run(["nvphase"]), EXIT_CONFIG);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run(["nvphase", "--help"]), EXIT_OK);
    }

    #[test]
    fn bad_override_is_config_error() {
        assert_eq!(run(["nvphase", "pump", "--set", "physics.rabi_opt_mhz=-1"]), EXIT_CONFIG);
        assert_eq!(run(["nvphase", "pump", "--set", "nonsense"]), EXIT_CONFIG);
    }

    #[test]
    fn numerical_errors_map_to_two() {
        assert_eq!(exit_code(&Error::Fit("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
    }
}
