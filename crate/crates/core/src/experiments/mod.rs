// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end studies: phase sweeps, CPT spectra, pumping decays and
//! delay scans.
//!
//! Each experiment has two halves. Simulation produces raw tables of
//! expected signals, one set per nuclear manifold; these are averaged,
//! optionally shot-noise sampled, and handed to a pure analysis function
//! that fills the fits and derived numbers. [`reanalyze`] reruns only the
//! analysis, so derived values can always be reproduced from `raw`.

pub mod config;
mod cpt;
mod mw2opt;
mod opt2mw;
mod pumping;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::TimeTrace;
use crate::drive::NuclearLabel;
use crate::fit::{ContrastDecayFit, ExponentialFit, LorentzianFit, SinusoidFit};
use crate::par::{pairwise_sum, try_map};
use crate::propagator::Environment;
use crate::sequence::Sequence;
use crate::{Error, Result};

pub use config::{load_config, parse_config, ExperimentConfig, EyReadoutMode};
pub use cpt::{exp_cpt, planned_cpt};
pub use mw2opt::{exp_mw_to_opt, planned_mw_to_opt};
pub use opt2mw::{exp_opt_to_mw, planned_opt_to_mw};
pub use pumping::{exp_pumping, planned_pumping};

/// Experiment names, as used by the command line and in results.
pub const EXPERIMENTS: [&str; 4] = [mw2opt::NAME, cpt::NAME, pumping::NAME, opt2mw::NAME];

/// Runs the experiment called `name`.
pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match name {
        mw2opt::NAME => exp_mw_to_opt(cfg),
        cpt::NAME => exp_cpt(cfg),
        pumping::NAME => exp_pumping(cfg),
        opt2mw::NAME => exp_opt_to_mw(cfg),
        other => Err(Error::Config(format!("unknown experiment `{other}`"))),
    }
}

/// Every (sequence, environment) pair the experiment `name` propagates.
pub fn planned_runs(name: &str, cfg: &ExperimentConfig) -> Result<Vec<(Sequence, Environment)>> {
    let (seqs, manifolds) = match name {
        mw2opt::NAME => (planned_mw_to_opt(cfg)?, cfg.manifolds()),
        cpt::NAME => (planned_cpt(cfg)?, vec![NuclearLabel::default()]),
        pumping::NAME => (planned_pumping(cfg)?, vec![NuclearLabel::default()]),
        opt2mw::NAME => (planned_opt_to_mw(cfg)?, cfg.manifolds()),
        other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
    };
    let samples = cfg.spin_detuning_samples()?;
    let mut out = Vec::new();
    for m in manifolds {
        for &d in &samples {
            out.extend(seqs.iter().map(|s| (s.clone(), cfg.environment(m, d))));
        }
    }
    Ok(out)
}

pub const RESULT_SCHEMA: u64 = 1;

/// Named columns of equal length. The first column is the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<String>, data: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(columns.len(), data.len());
        debug_assert!(data.iter().all(|c| c.len() == data[0].len()));
        Table {
            name: name.to_string(),
            columns,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|i| self.data[i].as_slice())
    }

    pub fn grid(&self) -> &[f64] {
        &self.data[0]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in 0..self.rows() {
            out.write_record(self.data.iter().map(|c| c[r].to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitResult {
    Sinusoid(SinusoidFit),
    Lorentzian(LorentzianFit),
    Exponential(ExponentialFit),
    ContrastDecay(ContrastDecayFit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema: u64,
    pub experiment: String,
    /// Simulated signals after manifold averaging and shot noise.
    pub raw: Vec<Table>,
    /// Tables computed from `raw` by the analysis.
    pub tables: Vec<Table>,
    pub fits: BTreeMap<String, FitResult>,
    pub derived: BTreeMap<String, f64>,
    /// Analysis remarks, e.g. optional fits that could not be made.
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
}

impl ExperimentResult {
    fn new(experiment: &str, raw: Vec<Table>, config: &ExperimentConfig) -> Self {
        ExperimentResult {
            schema: RESULT_SCHEMA,
            experiment: experiment.to_string(),
            raw,
            tables: Vec::new(),
            fits: BTreeMap::new(),
            derived: BTreeMap::new(),
            notes: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn raw_table(&self, name: &str) -> Option<&Table> {
        self.raw.iter().find(|t| t.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().chain(&self.raw).find(|t| t.name == name)
    }

    pub fn derived(&self, key: &str) -> Option<f64> {
        self.derived.get(key).copied()
    }

    fn set(&mut self, key: &str, value: f64) {
        self.derived.insert(key.to_string(), value);
    }

    fn fit(&mut self, key: &str, fit: FitResult) {
        self.fits.insert(key.to_string(), fit);
    }

    /// Writes `result.json` and one CSV per table into `dir`, creating it.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        #[derive(Serialize)]
        struct Meta<'a> {
            schema: u64,
            experiment: &'a str,
            raw_files: Vec<String>,
            table_files: Vec<String>,
            fits: &'a BTreeMap<String, FitResult>,
            derived: &'a BTreeMap<String, f64>,
            notes: &'a [String],
            config: &'a ExperimentConfig,
        }
        let file = |t: &Table| format!("{}.csv", t.name);
        for t in self.raw.iter().chain(&self.tables) {
            t.write_csv(std::fs::File::create(dir.join(file(t)))?)?;
        }
        let meta = Meta {
            schema: self.schema,
            experiment: &self.experiment,
            raw_files: self.raw.iter().map(file).collect(),
            table_files: self.tables.iter().map(file).collect(),
            fits: &self.fits,
            derived: &self.derived,
            notes: &self.notes,
            config: &self.config,
        };
        std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }
}

/// Reruns the analysis of `result` on its raw tables.
pub fn reanalyze(result: &ExperimentResult) -> Result<ExperimentResult> {
    let fresh = ExperimentResult::new(&result.experiment, result.raw.clone(), &result.config);
    match result.experiment.as_str() {
        mw2opt::NAME => mw2opt::analyze(fresh),
        cpt::NAME => cpt::analyze(fresh),
        pumping::NAME => pumping::analyze(fresh),
        opt2mw::NAME => opt2mw::analyze(fresh),
        other => Err(Error::Config(format!("unknown experiment `{other}`"))),
    }
}

fn same_grid(a: &[Table], b: &[Table]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} tables", a.len(), b.len())));
    }
    for (x, y) in a.iter().zip(b) {
        if x.name != y.name || x.columns != y.columns || x.rows() != y.rows() {
            return Err(Error::GridMismatch(format!("table `{}` differs in shape from `{}`", x.name, y.name)));
        }
        if x.grid() != y.grid() {
            return Err(Error::GridMismatch(format!("table `{}`: grid values differ", x.name)));
        }
    }
    Ok(())
}

/// Pointwise weighted mean of raw tables on identical grids.
///
/// Computed as `x₀ + Σ wᵢ (xᵢ − x₀)` with a pairwise sum, so identical
/// inputs and one-hot weights reproduce their input exactly.
pub fn average_tables(sets: &[Vec<Table>], weights: &[f64]) -> Result<Vec<Table>> {
    if sets.is_empty() || sets.len() != weights.len() {
        return Err(Error::GridMismatch(format!(
            "{} table sets for {} weights",
            sets.len(),
            weights.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::param("weights", "must be >= 0 and sum to 1"));
    }
    for s in &sets[1..] {
        same_grid(&sets[0], s)?;
    }
    let mut out = sets[0].clone();
    for (ti, table) in out.iter_mut().enumerate() {
        for (ci, col) in table.data.iter_mut().enumerate().skip(1) {
            for (r, x0) in col.iter_mut().enumerate() {
                let terms: Vec<f64> = sets
                    .iter()
                    .zip(weights)
                    .map(|(s, w)| w * (s[ti].data[ci][r] - *x0))
                    .collect();
                *x0 += pairwise_sum(&terms);
            }
        }
    }
    Ok(out)
}

/// Averages per-manifold results of one experiment and recomputes the
/// analysis on the average.
pub fn hyperfine_average(per_manifold: &[ExperimentResult], weights: &[f64]) -> Result<ExperimentResult> {
    let first = per_manifold
        .first()
        .ok_or_else(|| Error::GridMismatch("no results to average".into()))?;
    if per_manifold.iter().any(|r| r.experiment != first.experiment) {
        return Err(Error::GridMismatch("results come from different experiments".into()));
    }
    let sets: Vec<Vec<Table>> = per_manifold.iter().map(|r| r.raw.clone()).collect();
    let raw = average_tables(&sets, weights)?;
    reanalyze(&ExperimentResult::new(&first.experiment, raw, &first.config))
}

/// Simulates `points` on every manifold of `cfg` and every quasi-static
/// detuning sample. `point` returns one or more signal vectors per sweep
/// point; samples are averaged with a pairwise sum in sample order.
/// Returns `[manifold][point][vector]`.
fn simulate<P, F>(cfg: &ExperimentConfig, manifolds: &[NuclearLabel], points: &[P], point: F) -> Result<Vec<Vec<Vec<Vec<f64>>>>>
where
    P: Sync,
    F: Fn(&P, &Environment) -> Result<Vec<Vec<f64>>> + Sync + Send,
{
    let samples = cfg.spin_detuning_samples()?;
    let work: Vec<(usize, usize)> = (0..manifolds.len())
        .flat_map(|m| (0..points.len()).map(move |p| (m, p)))
        .collect();
    let flat = try_map(cfg.execution, &work, |&(m, p)| {
        let runs = samples
            .iter()
            .map(|&d| point(&points[p], &cfg.environment(manifolds[m], d)))
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, Error>(average_runs(runs))
    })?;
    let mut it = flat.into_iter();
    Ok(manifolds
        .iter()
        .map(|_| it.by_ref().take(points.len()).collect())
        .collect())
}

fn average_runs(runs: Vec<Vec<Vec<f64>>>) -> Vec<Vec<f64>> {
    if runs.len() == 1 {
        return runs.into_iter().next().unwrap_or_default();
    }
    let n = runs.len() as f64;
    let shape: Vec<usize> = runs[0].iter().map(Vec::len).collect();
    shape
        .iter()
        .enumerate()
        .map(|(v, &len)| {
            (0..len)
                .map(|i| {
                    let terms: Vec<f64> = runs.iter().map(|r| r[v][i]).collect();
                    pairwise_sum(&terms) / n
                })
                .collect()
        })
        .collect()
}

/// Manifold-averaged raw tables from per-manifold tables.
fn combine(cfg: &ExperimentConfig, per_manifold: Vec<Vec<Table>>) -> Result<Vec<Table>> {
    let weights: Vec<f64> = cfg.manifolds().iter().map(|m| m.weight).collect();
    if per_manifold.len() == 1 {
        return Ok(per_manifold.into_iter().next().unwrap_or_default());
    }
    average_tables(&per_manifold, &weights)
}

/// Replaces the signal columns of `tables` by Poisson draws when the
/// detector asks for shot noise. Every column gets its own derived seed.
fn apply_shot_noise(cfg: &ExperimentConfig, tables: &mut [Table]) {
    if !cfg.detector.poisson {
        return;
    }
    let mut index = 0;
    for t in tables.iter_mut() {
        for col in t.data.iter_mut().skip(1) {
            let scaled = TimeTrace::new(0.0, 1.0, std::mem::take(col));
            *col = scaled.sample_poisson(cfg.detector_seed(index)).counts;
            index += 1;
        }
    }
}

fn phase_columns(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

/// Strictly decreasing.
fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(vals: &[f64]) -> Vec<Table> {
        vec![Table::new(
            "t",
            vec!["x".into(), "y".into()],
            vec![(0..vals.len()).map(|i| i as f64).collect(), vals.to_vec()],
        )]
    }

    #[test]
    fn averaging_identity_and_passthrough() {
        let a = table(&[0.1, 0.7, 1.0 / 3.0]);
        let b = table(&[0.5, 0.2, 0.9]);
        let c = table(&[0.3, 0.3, 0.3]);
        let w = [1.0 / 3.0; 3];
        assert_eq!(average_tables(&[a.clone(), a.clone(), a.clone()], &w).unwrap(), a);
        assert_eq!(average_tables(&[a.clone(), b.clone(), c.clone()], &[1.0, 0.0, 0.0]).unwrap(), a);
        let m = average_tables(&[a, b, c], &w).unwrap();
        assert!((m[0].data[1][0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn averaging_rejects_mismatch() {
        let a = table(&[0.1, 0.2]);
        let b = table(&[0.1, 0.2, 0.3]);
        assert!(matches!(
            average_tables(&[a.clone(), b], &[0.5, 0.5]),
            Err(Error::GridMismatch(_))
        ));
        let mut c = a.clone();
        c[0].data[0][1] = 7.0;
        assert!(matches!(average_tables(&[a.clone(), c], &[0.5, 0.5]), Err(Error::GridMismatch(_))));
        assert!(average_tables(&[a.clone(), a], &[0.7, 0.7]).is_err());
    }

    #[test]
    fn csv_layout() {
        let t = &table(&[0.25, 1.5])[0];
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y\n0,0.25\n1,1.5\n");
    }
}
