// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Rotating-frame Hamiltonians for sets of classical drive fields.
//!
//! Every field addresses only its own transition (the ~200 MHz Zeeman
//! splitting separates the two `m_s = ±1` transitions by far more than any
//! Rabi frequency used), so each field contributes a time-independent
//! coupling in a multi-rotating frame and no counter-rotating terms appear.
//!
//! The field phase is always attached to the `m_s = ±1` ket: a microwave
//! field on `G0 ↔ GP` contributes `(Ω/2)e^{iφ}|GP⟩⟨G0|`, an optical field on
//! `GP ↔ A2` contributes `(Ω/2)e^{iφ}|GP⟩⟨A2|`. With this convention a
//! microwave pair with relative phase `φ` prepares spin phase `θ = φ`, and
//! both the optical and the microwave dark states take the form
//! `(e^{iφ}|+1⟩ − |−1⟩)/√2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::state::{Level, LevelScheme, PureState, DIM};
use crate::{mhz_to_rad_per_ns, Error, Ket, Operator, Result, C64};

/// Default nitrogen hyperfine constant (MHz).
pub const HYPERFINE_MHZ: f64 = 2.2;

/// Allowed drive transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    G0Gm,
    G0Gp,
    GmA2,
    GpA2,
    G0Ey,
}

impl Transition {
    pub const ALL: [Transition; 5] = [
        Transition::G0Gm,
        Transition::G0Gp,
        Transition::GmA2,
        Transition::GpA2,
        Transition::G0Ey,
    ];

    pub fn from_levels(lower: Level, upper: Level) -> Result<Self> {
        Transition::ALL
            .iter()
            .copied()
            .find(|t| t.levels() == (lower, upper))
            .ok_or_else(|| Error::DisallowedTransition {
                lower: lower.to_string(),
                upper: upper.to_string(),
            })
    }

    /// `(lower, upper)`.
    pub fn levels(self) -> (Level, Level) {
        match self {
            Transition::G0Gm => (Level::G0, Level::GM),
            Transition::G0Gp => (Level::G0, Level::GP),
            Transition::GmA2 => (Level::GM, Level::A2),
            Transition::GpA2 => (Level::GP, Level::A2),
            Transition::G0Ey => (Level::G0, Level::EY),
        }
    }

    pub fn lower(self) -> Level {
        self.levels().0
    }

    pub fn upper(self) -> Level {
        self.levels().1
    }

    pub fn name(self) -> &'static str {
        match self {
            Transition::G0Gm => "G0-GM",
            Transition::G0Gp => "G0-GP",
            Transition::GmA2 => "GM-A2",
            Transition::GpA2 => "GP-A2",
            Transition::G0Ey => "G0-EY",
        }
    }

    pub fn is_microwave(self) -> bool {
        matches!(self, Transition::G0Gm | Transition::G0Gp)
    }

    pub fn is_optical(self) -> bool {
        !self.is_microwave()
    }

    /// Level shift `m_s · m_I · A` of the upper level in a given nuclear
    /// manifold, for the microwave lines only.
    fn hyperfine_shift_mhz(self, m_i: i8, hyperfine_mhz: f64) -> f64 {
        let m_s = match self {
            Transition::G0Gp => 1.0,
            Transition::G0Gm => -1.0,
            _ => return 0.0,
        };
        m_s * f64::from(m_i) * hyperfine_mhz
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transition::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownTransition(s.to_string()))
    }
}

impl Serialize for Transition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Transition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One classical drive field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveField {
    pub transition: Transition,
    /// Cyclic Rabi frequency Ω/2π in MHz.
    pub rabi_mhz: f64,
    /// Field frequency minus transition frequency, MHz.
    #[serde(default)]
    pub detuning_mhz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl DriveField {
    pub fn new(transition: Transition, rabi_mhz: f64, detuning_mhz: f64, phase_rad: f64) -> Result<Self> {
        let f = DriveField {
            transition,
            rabi_mhz,
            detuning_mhz,
            phase_rad,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn resonant(transition: Transition, rabi_mhz: f64, phase_rad: f64) -> Result<Self> {
        Self::new(transition, rabi_mhz, 0.0, phase_rad)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_mhz >= 0.0 && self.rabi_mhz.is_finite()) {
            return Err(Error::param("rabi_mhz", format!("must be finite and >= 0, got {}", self.rabi_mhz)));
        }
        if !self.detuning_mhz.is_finite() {
            return Err(Error::param("detuning_mhz", "must be finite"));
        }
        if !self.phase_rad.is_finite() {
            return Err(Error::param("phase_rad", "must be finite"));
        }
        Ok(())
    }

    /// Angular Rabi frequency in rad/ns.
    pub fn omega(&self) -> f64 {
        mhz_to_rad_per_ns(self.rabi_mhz)
    }
}

/// Classical label of the nitrogen nuclear spin projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuclearLabel {
    pub m_i: i8,
    pub weight: f64,
}

impl Default for NuclearLabel {
    fn default() -> Self {
        NuclearLabel { m_i: 0, weight: 1.0 }
    }
}

impl NuclearLabel {
    /// The three manifolds `m_I = −1, 0, +1` with equal weights.
    pub fn manifolds() -> [NuclearLabel; 3] {
        [-1i8, 0, 1].map(|m_i| NuclearLabel {
            m_i,
            weight: 1.0 / 3.0,
        })
    }

    pub fn validate_set(labels: &[NuclearLabel]) -> Result<()> {
        let sum: f64 = labels.iter().map(|l| l.weight).sum();
        if labels.iter().any(|l| !(-1..=1).contains(&l.m_i) || l.weight < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param("nuclear", "weights must be >= 0 and sum to 1 over m_I in {-1,0,1}"));
        }
        Ok(())
    }
}

/// How microwave fields act on nuclear manifolds other than the addressed
/// `m_I = 0` line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperfineModel {
    /// Off-resonant manifolds see the fields detuned by the hyperfine shift.
    #[default]
    Detuned,
    /// Off-resonant manifolds do not couple to microwaves at all.
    Selective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub fields: Vec<DriveField>,
    pub hyperfine_mhz: f64,
    pub hyperfine_model: HyperfineModel,
    pub nuclear: NuclearLabel,
    /// Static differential shift of `GP` relative to `GM` (MHz), used for
    /// quasi-static dephasing samples.
    pub spin_detuning_mhz: f64,
}

impl HamiltonianSpec {
    pub fn new(fields: Vec<DriveField>) -> Self {
        HamiltonianSpec {
            fields,
            hyperfine_mhz: HYPERFINE_MHZ,
            hyperfine_model: HyperfineModel::default(),
            nuclear: NuclearLabel::default(),
            spin_detuning_mhz: 0.0,
        }
    }
}

/// Rejects a field list that drives any transition twice.
pub fn check_unique_transitions(fields: &[DriveField]) -> Result<()> {
    for (i, a) in fields.iter().enumerate() {
        if fields[..i].iter().any(|b| b.transition == a.transition) {
            return Err(Error::DuplicateTransition(a.transition.to_string()));
        }
    }
    Ok(())
}

/// Rotating-frame Hamiltonian in rad/ns.
pub fn build_hamiltonian(spec: &HamiltonianSpec, _scheme: &LevelScheme) -> Result<Operator> {
    check_unique_transitions(&spec.fields)?;
    for f in &spec.fields {
        f.validate()?;
    }

    let active: Vec<(DriveField, f64)> = spec
        .fields
        .iter()
        .filter(|f| {
            !(f.transition.is_microwave()
                && spec.hyperfine_model == HyperfineModel::Selective
                && spec.nuclear.m_i != 0)
        })
        .map(|f| {
            let shift = f.transition.hyperfine_shift_mhz(spec.nuclear.m_i, spec.hyperfine_mhz);
            (*f, f.detuning_mhz - shift)
        })
        .collect();

    let energies = frame_energies(&active)?;
    let mut h = Operator::zeros();
    for (i, e) in energies.iter().enumerate() {
        h[(i, i)] = C64::new(mhz_to_rad_per_ns(*e), 0.0);
    }
    let half_split = 0.5 * mhz_to_rad_per_ns(spec.spin_detuning_mhz);
    h[(Level::GP.index(), Level::GP.index())] += half_split;
    h[(Level::GM.index(), Level::GM.index())] -= half_split;

    for (f, _) in &active {
        let (lo, up) = f.transition.levels();
        let sign = if f.transition.is_microwave() { 1.0 } else { -1.0 };
        let c = C64::from_polar(0.5 * f.omega(), sign * f.phase_rad);
        h[(up.index(), lo.index())] += c;
        h[(lo.index(), up.index())] += c.conj();
    }
    Ok(h)
}

/// Diagonal frame energies (MHz) with `e_upper − e_lower = −Δ` for every
/// field. Undriven levels sit at zero; each connected group of driven levels
/// is shifted so its ground levels average to zero.
fn frame_energies(fields: &[(DriveField, f64)]) -> Result<[f64; DIM]> {
    let mut energy = [0.0f64; DIM];
    let mut assigned = [false; DIM];
    for root in Level::ALL {
        let r = root.index();
        if assigned[r] || !fields.iter().any(|(f, _)| touches(f, root)) {
            continue;
        }
        let mut component = vec![r];
        assigned[r] = true;
        energy[r] = 0.0;
        let mut cursor = 0;
        while cursor < component.len() {
            let cur = component[cursor];
            cursor += 1;
            for (f, det) in fields {
                let (lo, up) = f.transition.levels();
                let (lo, up) = (lo.index(), up.index());
                let (next, value) = if lo == cur {
                    (up, energy[cur] - det)
                } else if up == cur {
                    (lo, energy[cur] + det)
                } else {
                    continue;
                };
                if assigned[next] {
                    let mismatch = energy[next] - value;
                    if mismatch.abs() > 1e-9 {
                        return Err(Error::InconsistentFrame(mismatch));
                    }
                } else {
                    assigned[next] = true;
                    energy[next] = value;
                    component.push(next);
                }
            }
        }
        let grounds: Vec<usize> = component.iter().copied().filter(|&i| i <= Level::GP.index()).collect();
        let mean = grounds.iter().map(|&i| energy[i]).sum::<f64>() / grounds.len().max(1) as f64;
        for &i in &component {
            energy[i] -= mean;
        }
    }
    Ok(energy)
}

fn touches(f: &DriveField, l: Level) -> bool {
    let (lo, up) = f.transition.levels();
    lo == l || up == l
}

/// Two-photon detuning of a Λ pair sharing the `A2` upper level.
pub fn raman_detuning(a: &DriveField, b: &DriveField) -> Result<f64> {
    let is_lambda_leg = |t: Transition| matches!(t, Transition::GmA2 | Transition::GpA2);
    if !is_lambda_leg(a.transition) || !is_lambda_leg(b.transition) || a.transition == b.transition {
        return Err(Error::param(
            "fields",
            format!("{} and {} do not form a Λ pair on A2", a.transition, b.transition),
        ));
    }
    Ok(a.detuning_mhz - b.detuning_mhz)
}

fn mw_pair_state(phi_mw: f64, sign: f64) -> PureState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = Ket::zeros();
    v[Level::GP.index()] = C64::from_polar(s, phi_mw);
    v[Level::GM.index()] = C64::new(sign * s, 0.0);
    PureState::from_vector(v).expect("nonzero")
}

/// Superposition decoupled from a resonant equal-Rabi microwave pair with
/// relative phase `φ_mw = φ₊ − φ₋`.
pub fn mw_dark_state(phi_mw: f64) -> PureState {
    mw_pair_state(phi_mw, -1.0)
}

/// Superposition coupled to `G0` with Rabi frequency `√2·Ω̄` by the pair.
pub fn mw_bright_state(phi_mw: f64) -> PureState {
    mw_pair_state(phi_mw, 1.0)
}
