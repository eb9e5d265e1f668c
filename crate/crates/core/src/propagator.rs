// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-step RK4 integration of the Lindblad master equation over
//! piecewise-constant segments.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dissipation::{collapse_operators, DecoherenceParams};
use crate::drive::{build_hamiltonian, DriveField, HamiltonianSpec, HyperfineModel, NuclearLabel, HYPERFINE_MHZ};
use crate::sequence::Sequence;
use crate::state::{DensityMatrix, Level, LevelScheme, DIM};
use crate::{Error, Operator, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt_ns: f64,
    pub trace_tol: f64,
    /// Steps between recorded samples; 4 steps of 0.25 ns record once per ns.
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt_ns: 0.25,
            trace_tol: 1e-8,
            record_stride: 4,
        }
    }
}

impl IntegratorConfig {
    /// Largest allowed `dt · ‖H‖`.
    pub const MAX_PHASE_PER_STEP: f64 = 0.1;

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ns > 0.0 && self.dt_ns.is_finite()) {
            return Err(Error::param("dt_ns", format!("must be > 0, got {}", self.dt_ns)));
        }
        if !(self.trace_tol > 0.0) {
            return Err(Error::param("trace_tol", "must be > 0"));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be >= 1"));
        }
        Ok(())
    }

    /// Same sampling times with half the step.
    pub fn halved(&self) -> Self {
        IntegratorConfig {
            dt_ns: self.dt_ns / 2.0,
            record_stride: self.record_stride * 2,
            ..*self
        }
    }

    fn check_step(&self, h: &Operator) -> Result<()> {
        let norm = (0..DIM)
            .map(|i| (0..DIM).map(|j| h[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        if self.dt_ns * norm > Self::MAX_PHASE_PER_STEP {
            return Err(Error::param(
                "dt_ns",
                format!(
                    "dt·‖H‖ = {:.3} rad exceeds {}; reduce dt_ns below {:.4}",
                    self.dt_ns * norm,
                    Self::MAX_PHASE_PER_STEP,
                    Self::MAX_PHASE_PER_STEP / norm
                ),
            ));
        }
        Ok(())
    }
}

/// Everything about the system other than the drive fields of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub collapses: Vec<Operator>,
    pub hyperfine_mhz: f64,
    pub hyperfine_model: HyperfineModel,
    pub nuclear: NuclearLabel,
    pub spin_detuning_mhz: f64,
}

impl Environment {
    pub fn new(collapses: Vec<Operator>) -> Self {
        Environment {
            collapses,
            hyperfine_mhz: HYPERFINE_MHZ,
            hyperfine_model: HyperfineModel::Detuned,
            nuclear: NuclearLabel::default(),
            spin_detuning_mhz: 0.0,
        }
    }

    pub fn from_params(params: &DecoherenceParams) -> Self {
        Self::new(collapse_operators(params, &LevelScheme::nv()))
    }

    /// Closed system.
    pub fn unitary() -> Self {
        Self::new(Vec::new())
    }

    pub fn hamiltonian(&self, fields: &[DriveField]) -> Result<Operator> {
        let spec = HamiltonianSpec {
            fields: fields.to_vec(),
            hyperfine_mhz: self.hyperfine_mhz,
            hyperfine_model: self.hyperfine_model,
            nuclear: self.nuclear,
            spin_detuning_mhz: self.spin_detuning_mhz,
        };
        build_hamiltonian(&spec, &LevelScheme::nv())
    }
}

/// Recorded states of a propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Index into `states` of the first sample of each segment.
    pub segment_marks: Vec<usize>,
}

impl Trajectory {
    fn start(t0: f64, rho: DensityMatrix) -> Self {
        Trajectory {
            times: vec![t0],
            states: vec![rho],
            segment_marks: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn populations(&self, level: Level) -> Vec<f64> {
        self.states.iter().map(|r| r.population(level)).collect()
    }

    pub fn spin_coherence(&self) -> Vec<f64> {
        self.states.iter().map(|r| r.element(Level::GM, Level::GP).norm()).collect()
    }

    /// Samples of segment `i`, with times measured from the segment start.
    pub fn segment(&self, i: usize) -> Option<Trajectory> {
        let start = *self.segment_marks.get(i)?;
        let end = self.segment_marks.get(i + 1).map_or(self.len(), |&e| e + 1);
        let t0 = self.times[start];
        Some(Trajectory {
            times: self.times[start..end].iter().map(|t| t - t0).collect(),
            states: self.states[start..end].to_vec(),
            segment_marks: vec![0],
        })
    }

    fn append(&mut self, other: Trajectory) {
        let offset = *self.times.last().unwrap();
        self.segment_marks.push(self.len() - 1);
        self.times.extend(other.times.iter().skip(1).map(|t| t + offset));
        self.states.extend(other.states.into_iter().skip(1));
    }

    /// CSV: `t_ns`, the five populations, `abs_rho_gm_gp`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_ns", "G0", "GM", "GP", "A2", "EY", "abs_rho_gm_gp"])?;
        for (t, r) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(r.populations().iter().map(f64::to_string));
            row.push(r.element(Level::GM, Level::GP).norm().to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `dρ/dt = −i[H,ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub fn lindblad_rhs(rho: &Operator, h: &Operator, collapses: &[Operator]) -> Operator {
    let i = C64::new(0.0, 1.0);
    let mut d = -(h * rho - rho * h) * i;
    for l in collapses {
        let ld = l.adjoint();
        let ldl = ld * l;
        d += l * rho * ld - (ldl * rho + rho * ldl).unscale(2.0);
    }
    d
}

/// Precomputed generator: effective non-Hermitian Hamiltonian plus sparse
/// jump terms.
struct Generator {
    h_eff: Operator,
    jumps: Vec<Vec<(usize, usize, C64)>>,
}

impl Generator {
    fn new(h: &Operator, collapses: &[Operator]) -> Self {
        let mut h_eff = *h;
        let half_i = C64::new(0.0, 0.5);
        for l in collapses {
            h_eff -= (l.adjoint() * l) * half_i;
        }
        let jumps = collapses
            .iter()
            .map(|l| {
                let mut nz = Vec::new();
                for r in 0..DIM {
                    for c in 0..DIM {
                        if l[(r, c)] != C64::new(0.0, 0.0) {
                            nz.push((r, c, l[(r, c)]));
                        }
                    }
                }
                nz
            })
            .collect();
        Generator { h_eff, jumps }
    }

    /// Valid for Hermitian `rho`.
    fn apply(&self, rho: &Operator) -> Operator {
        let a = self.h_eff * rho;
        let mut d = (a - a.adjoint()) * C64::new(0.0, -1.0);
        for nz in &self.jumps {
            for &(i, j, x) in nz {
                for &(k, l, y) in nz {
                    d[(i, k)] += x * rho[(j, l)] * y.conj();
                }
            }
        }
        d
    }
}

/// Propagates one constant segment. The final step is shortened so the
/// trajectory ends exactly at `duration_ns`.
pub fn propagate_segment(
    rho: &DensityMatrix,
    h: &Operator,
    collapses: &[Operator],
    duration_ns: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    propagate_indexed(rho, h, collapses, duration_ns, cfg, 0)
}

fn propagate_indexed(
    rho: &DensityMatrix,
    h: &Operator,
    collapses: &[Operator],
    duration_ns: f64,
    cfg: &IntegratorConfig,
    segment: usize,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(duration_ns >= 0.0 && duration_ns.is_finite()) {
        return Err(Error::param("duration_ns", format!("must be >= 0, got {duration_ns}")));
    }
    let mut traj = Trajectory::start(0.0, rho.clone());
    if duration_ns == 0.0 {
        return Ok(traj);
    }
    cfg.check_step(h)?;

    let gen = Generator::new(h, collapses);
    let dt = cfg.dt_ns;
    let full_steps = (duration_ns / dt + 1e-9).floor() as usize;
    let remainder = duration_ns - full_steps as f64 * dt;
    let mut state = *rho.matrix();

    let step = |s: &Operator, h_step: f64| -> Operator {
        let k1 = gen.apply(s);
        let k2 = gen.apply(&(s + k1 * C64::from(h_step / 2.0)));
        let k3 = gen.apply(&(s + k2 * C64::from(h_step / 2.0)));
        let k4 = gen.apply(&(s + k3 * C64::from(h_step)));
        let next = s + (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h_step / 6.0);
        (next + next.adjoint()) * C64::from(0.5)
    };

    let check_trace = |s: &Operator| -> Result<()> {
        let drift = (s.trace() - C64::new(1.0, 0.0)).norm();
        if !(drift <= cfg.trace_tol) {
            return Err(Error::TraceDrift {
                segment,
                drift,
                tol: cfg.trace_tol,
            });
        }
        Ok(())
    };

    for n in 1..=full_steps {
        state = step(&state, dt);
        check_trace(&state)?;
        if n % cfg.record_stride == 0 || (n == full_steps && remainder <= 1e-9) {
            traj.times.push(if n == full_steps && remainder <= 1e-9 {
                duration_ns
            } else {
                n as f64 * dt
            });
            traj.states.push(DensityMatrix::from_matrix_unchecked(state));
        }
    }
    if remainder > 1e-9 {
        state = step(&state, remainder);
        check_trace(&state)?;
        traj.times.push(duration_ns);
        traj.states.push(DensityMatrix::from_matrix_unchecked(state));
    }
    Ok(traj)
}

/// Runs all segments of a sequence from `initial`.
pub fn run_sequence(
    seq: &Sequence,
    initial: &DensityMatrix,
    env: &Environment,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory::start(0.0, initial.clone());
    traj.segment_marks.clear();
    for (i, seg) in seq.segments.iter().enumerate() {
        let h = env.hamiltonian(&seg.fields)?;
        let part = propagate_indexed(traj.final_state(), &h, &env.collapses, seg.duration_ns, cfg, i)?;
        traj.append(part);
    }
    if traj.segment_marks.is_empty() {
        traj.segment_marks.push(0);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::Transition;
    use crate::state::{dark_state, Level};
    use crate::superop;

    fn mw(t: Transition, phase: f64) -> Operator {
        Environment::unitary()
            .hamiltonian(&[DriveField::resonant(t, 0.91, phase).unwrap()])
            .unwrap()
    }

    #[test]
    fn rhs_trivial_cases() {
        let rho = *DensityMatrix::projector(Level::G0).matrix();
        assert_eq!(lindblad_rhs(&rho, &Operator::zeros(), &[]), Operator::zeros());

        let h = mw(Transition::G0Gm, 0.4) + Environment::unitary()
            .hamiltonian(&[DriveField::new(Transition::GpA2, 27.0, 3.0, 1.0).unwrap()])
            .unwrap();
        let mixed = *DensityMatrix::maximally_mixed().matrix();
        assert!(crate::max_abs(&lindblad_rhs(&mixed, &h, &[])) < 1e-15);
    }

    #[test]
    fn rhs_single_decay() {
        let g: f64 = 0.2;
        let l = {
            let mut m = Operator::zeros();
            m[(Level::GM.index(), Level::A2.index())] = C64::new(g.sqrt(), 0.0);
            m
        };
        let rho = *DensityMatrix::projector(Level::A2).matrix();
        let d = lindblad_rhs(&rho, &Operator::zeros(), &[l]);
        assert!((d[(3, 3)].re + g).abs() < 1e-15);
        assert!((d[(1, 1)].re - g).abs() < 1e-15);
        assert!(d.trace().norm() < 1e-15);

        // the sparse generator agrees with the textbook form
        let params = DecoherenceParams::default();
        let env = Environment::from_params(&params);
        let h = env
            .hamiltonian(&[
                DriveField::new(Transition::GpA2, 27.0, 4.0, 0.3).unwrap(),
                DriveField::new(Transition::GmA2, 27.0, 1.0, -0.2).unwrap(),
            ])
            .unwrap();
        let psi = crate::state::spin_superposition(0.4, C64::new(0.6, 0.0), C64::new(0.8, 0.0)).unwrap();
        let rho = psi.to_density().matrix() * C64::from(0.7) + DensityMatrix::maximally_mixed().matrix() * C64::from(0.3);
        let gen = Generator::new(&h, &env.collapses);
        assert!(crate::max_abs(&(gen.apply(&rho) - lindblad_rhs(&rho, &h, &env.collapses))) < 1e-15);
    }

    #[test]
    fn zero_duration() {
        let rho = DensityMatrix::projector(Level::G0);
        let t = propagate_segment(&rho, &mw(Transition::G0Gm, 0.0), &[], 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.final_state(), &rho);
    }

    #[test]
    fn rabi_pi_and_half_pi() {
        let rho = DensityMatrix::projector(Level::G0);
        let cfg = IntegratorConfig::default();
        let h = mw(Transition::G0Gm, 0.0);
        let pi = propagate_segment(&rho, &h, &[], 549.5, &cfg).unwrap();
        assert!(pi.final_state().population(Level::GM) >= 0.9999);
        assert_eq!(*pi.times.last().unwrap(), 549.5);
        let half = propagate_segment(&rho, &h, &[], 274.7, &cfg).unwrap();
        let p = half.final_state().population(Level::GM);
        // sin²(Ωt/2) oracle
        let oracle = (crate::mhz_to_rad_per_ns(0.91) * 274.7 / 2.0).sin().powi(2);
        assert!((p - oracle).abs() < 1e-9);
        assert!((p - 0.5).abs() < 1e-4);
    }

    #[test]
    fn times_strictly_increasing_with_partial_step() {
        let rho = DensityMatrix::projector(Level::G0);
        let t = propagate_segment(&rho, &mw(Transition::G0Gm, 0.0), &[], 10.1, &IntegratorConfig::default()).unwrap();
        assert!(t.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t.times, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 10.1]);
    }

    #[test]
    fn step_guard() {
        let rho = DensityMatrix::projector(Level::GM);
        let h = Environment::unitary()
            .hamiltonian(&[DriveField::resonant(Transition::GmA2, 27.0, 0.0).unwrap()])
            .unwrap();
        let cfg = IntegratorConfig {
            dt_ns: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            propagate_segment(&rho, &h, &[], 50.0, &cfg),
            Err(Error::InvalidParameter { name, .. }) if name == "dt_ns"
        ));
        assert!(propagate_segment(&rho, &h, &[], -1.0, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn trace_drift_is_reported() {
        // a non-trace-preserving "collapse" set: a bare non-Hermitian H
        let mut h = Operator::zeros();
        h[(0, 0)] = C64::new(0.0, -0.1);
        let rho = DensityMatrix::projector(Level::G0);
        let err = propagate_segment(&rho, &h, &[], 5.0, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TraceDrift { segment: 0, .. }));
    }

    #[test]
    fn matches_superoperator_oracle() {
        let params = DecoherenceParams::default();
        let env = Environment::from_params(&params);
        let h = env
            .hamiltonian(&[
                DriveField::new(Transition::GpA2, 27.0, 6.0, 0.3).unwrap(),
                DriveField::new(Transition::GmA2, 27.0, -2.0, -0.2).unwrap(),
                DriveField::resonant(Transition::G0Ey, 5.0, 0.0).unwrap(),
            ])
            .unwrap();
        let rho0 = crate::state::spin_superposition(0.4, C64::new(0.6, 0.0), C64::new(0.8, 0.0))
            .unwrap()
            .to_density();
        let traj = propagate_segment(&rho0, &h, &env.collapses, 200.0, &IntegratorConfig::default()).unwrap();
        let exact = superop::evolve(&rho0, &h, &env.collapses, 200.0);
        assert!(crate::max_abs(&(traj.final_state().matrix() - exact.matrix())) < 1e-7);
    }

    #[test]
    fn dark_state_is_stationary() {
        let params = DecoherenceParams::default().radiative_only();
        let env = Environment::from_params(&params);
        let h = env
            .hamiltonian(&[
                DriveField::resonant(Transition::GpA2, 27.0, 0.5).unwrap(),
                DriveField::resonant(Transition::GmA2, 27.0, 0.0).unwrap(),
            ])
            .unwrap();
        let d = dark_state(0.5).to_density();
        let t = propagate_segment(&d, &h, &env.collapses, 100.0, &IntegratorConfig::default()).unwrap();
        assert!(crate::max_abs(&(t.final_state().matrix() - d.matrix())) < 1e-12);
    }
}
