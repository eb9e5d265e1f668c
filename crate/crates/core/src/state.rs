// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Level scheme, pure and mixed states, and the optical dark/bright basis.
//!
//! Phase convention: the spin phase `θ` of a state supported on the
//! `m_s = ±1` pair is `arg(c_GP) − arg(c_GM)`. The optical dark state for a
//! field pair with relative phase `φ` is `(e^{iφ}|+1⟩ − |−1⟩)/√2` and the
//! bright state is the orthogonal `(e^{iφ}|+1⟩ + |−1⟩)/√2`.

use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::{Error, Ket, Operator, Result, C64};

/// Number of levels in the scheme.
pub const DIM: usize = 5;

const AMPLITUDE_EPS: f64 = 1e-12;

/// One level of the NV scheme. Discriminants are the matrix indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    /// Ground `m_s = 0`.
    G0 = 0,
    /// Ground `m_s = −1`.
    GM = 1,
    /// Ground `m_s = +1`.
    GP = 2,
    /// Excited state coupled to both `m_s = ±1` by circularly polarized light.
    A2 = 3,
    /// Excited state used as the `m_s = 0` readout transition.
    EY = 4,
}

impl Level {
    pub const ALL: [Level; DIM] = [Level::G0, Level::GM, Level::GP, Level::A2, Level::EY];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::G0 => "G0",
            Level::GM => "GM",
            Level::GP => "GP",
            Level::A2 => "A2",
            Level::EY => "EY",
        }
    }

    pub fn is_ground(self) -> bool {
        matches!(self, Level::G0 | Level::GM | Level::GP)
    }

    pub fn is_excited(self) -> bool {
        !self.is_ground()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Level::ALL
            .iter()
            .copied()
            .find(|l| l.label() == s)
            .ok_or_else(|| Error::UnknownLevel(s.to_string()))
    }
}

/// The fixed five-level NV scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelScheme;

impl LevelScheme {
    pub fn nv() -> Self {
        LevelScheme
    }

    pub fn dimension(&self) -> usize {
        DIM
    }

    pub fn levels(&self) -> &'static [Level; DIM] {
        &Level::ALL
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        label.parse::<Level>().map(Level::index)
    }

    /// Rank-one projector onto the named level.
    pub fn pure_state(&self, label: &str) -> Result<DensityMatrix> {
        Ok(DensityMatrix::projector(label.parse()?))
    }
}

/// Normalized state vector with canonical global phase (first amplitude of
/// non-negligible magnitude is real and positive).
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Ket,
}

impl PureState {
    /// Normalizes and canonicalizes an arbitrary nonzero vector.
    pub fn from_vector(v: Ket) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm < AMPLITUDE_EPS {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        Ok(Self::canonical(v.unscale(norm)))
    }

    /// Accepts an already-normalized vector; rejects it otherwise.
    pub fn new(v: Ket) -> Result<Self> {
        let n2 = v.norm_squared();
        if (n2 - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(n2));
        }
        Ok(Self::canonical(v.unscale(n2.sqrt())))
    }

    pub fn basis(level: Level) -> Self {
        let mut v = Ket::zeros();
        v[level.index()] = C64::new(1.0, 0.0);
        PureState { amplitudes: v }
    }

    fn canonical(mut v: Ket) -> Self {
        if let Some(first) = v.iter().find(|c| c.norm() > AMPLITUDE_EPS).copied() {
            let phase = C64::from_polar(1.0, -first.arg());
            v *= phase;
        }
        PureState { amplitudes: v }
    }

    pub fn amplitudes(&self) -> &Ket {
        &self.amplitudes
    }

    pub fn amplitude(&self, level: Level) -> C64 {
        self.amplitudes[level.index()]
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Spin phase `arg(c_GP) − arg(c_GM)`, wrapped to `(−π, π]`.
    pub fn spin_phase(&self) -> f64 {
        let r = self.amplitude(Level::GP) * self.amplitude(Level::GM).conj();
        r.arg()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(self.amplitudes * self.amplitudes.adjoint())
    }

    /// Equality up to the (already canonical) global phase.
    pub fn approx_eq(&self, other: &PureState, tol: f64) -> bool {
        crate::max_abs(&(self.amplitudes - other.amplitudes)) <= tol
    }
}

/// Mixed state on the five-level space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub(crate) Operator);

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-8;
    pub const POSITIVITY_TOL: f64 = 1e-9;

    /// Validating constructor.
    pub fn new(m: Operator) -> Result<Self> {
        let rho = DensityMatrix(m);
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Operator) -> Self {
        DensityMatrix(m)
    }

    pub fn projector(level: Level) -> Self {
        let mut m = Operator::zeros();
        m[(level.index(), level.index())] = C64::new(1.0, 0.0);
        DensityMatrix(m)
    }

    /// Equal mixture over all five levels.
    pub fn maximally_mixed() -> Self {
        DensityMatrix(Operator::identity().unscale(DIM as f64))
    }

    pub fn matrix(&self) -> &Operator {
        &self.0
    }

    pub fn population(&self, level: Level) -> f64 {
        self.0[(level.index(), level.index())].re
    }

    pub fn populations(&self) -> [f64; DIM] {
        std::array::from_fn(|i| self.0[(i, i)].re)
    }

    /// Matrix element `ρ_{a,b}`.
    pub fn element(&self, a: Level, b: Level) -> C64 {
        self.0[(a.index(), b.index())]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        crate::max_abs(&(self.0 - self.0.adjoint()))
    }

    pub fn eigenvalues(&self) -> [f64; DIM] {
        let h = (self.0 + self.0.adjoint()).unscale(2.0);
        let eig = SymmetricEigen::new(h).eigenvalues;
        let mut out: [f64; DIM] = std::array::from_fn(|i| eig[i]);
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &PureState) -> f64 {
        let v = psi.amplitudes();
        (v.adjoint() * self.0 * v)[(0, 0)].re
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if !(herm <= Self::HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian (max |ρ−ρ†| = {herm:.3e})")));
        }
        let tr = self.trace();
        if !((tr.re - 1.0).abs() <= Self::TRACE_TOL && tr.im.abs() <= Self::TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -Self::POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

impl From<&PureState> for DensityMatrix {
    fn from(psi: &PureState) -> Self {
        psi.to_density()
    }
}

/// Spin superposition `e^{iθ}·c₊|+1⟩ + c₋|−1⟩`.
pub fn spin_superposition(theta: f64, c_plus: C64, c_minus: C64) -> Result<PureState> {
    let n2 = c_plus.norm_sqr() + c_minus.norm_sqr();
    if !((n2 - 1.0).abs() <= 1e-9) {
        return Err(Error::NotNormalized(n2));
    }
    let mut v = Ket::zeros();
    v[Level::GP.index()] = C64::from_polar(1.0, theta) * c_plus;
    v[Level::GM.index()] = c_minus;
    PureState::new(v)
}

fn pair_state(phi: f64, sign: f64) -> PureState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = Ket::zeros();
    v[Level::GP.index()] = C64::from_polar(s, phi);
    v[Level::GM.index()] = C64::new(sign * s, 0.0);
    PureState::canonical(v)
}

/// Optical dark state `(e^{iφ}|+1⟩ − |−1⟩)/√2`.
pub fn dark_state(phi_opt: f64) -> PureState {
    pair_state(phi_opt, -1.0)
}

/// Optical bright state `(e^{iφ}|+1⟩ + |−1⟩)/√2`.
pub fn bright_state(phi_opt: f64) -> PureState {
    pair_state(phi_opt, 1.0)
}

/// Populations of a state in the optical bright/dark basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkBright {
    pub bright: f64,
    pub dark: f64,
    /// Population outside the `m_s = ±1` pair.
    pub rest: f64,
}

pub fn dark_bright_decompose(rho: &DensityMatrix, phi_opt: f64) -> Result<DarkBright> {
    rho.validate()?;
    let bright = rho.expectation(&bright_state(phi_opt));
    let dark = rho.expectation(&dark_state(phi_opt));
    Ok(DarkBright {
        bright,
        dark,
        rest: 1.0 - bright - dark,
    })
}

pub fn dark_bright_decompose_pure(psi: &PureState, phi_opt: f64) -> DarkBright {
    let bright = psi.inner(&bright_state(phi_opt)).norm_sqr();
    let dark = psi.inner(&dark_state(phi_opt)).norm_sqr();
    DarkBright {
        bright,
        dark,
        rest: 1.0 - bright - dark,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn half() -> C64 {
        C64::new(FRAC_1_SQRT_2, 0.0)
    }

    #[test]
    fn pure_state_projectors() {
        let s = LevelScheme::nv();
        let rho = s.pure_state("G0").unwrap();
        assert_eq!(rho.population(Level::G0), 1.0);
        assert_eq!(rho.matrix().iter().filter(|c| c.norm() > 0.0).count(), 1);

        let gm = s.pure_state("GM").unwrap();
        assert_eq!(gm.trace().re, 1.0);
        assert!((gm.purity() - 1.0).abs() < 1e-15);

        assert!(matches!(s.pure_state("X"), Err(Error::UnknownLevel(_))));
    }

    #[test]
    fn level_scheme_indices() {
        let s = LevelScheme::nv();
        assert_eq!(s.dimension(), 5);
        for (i, l) in s.levels().iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(s.index_of(l.label()).unwrap(), i);
        }
        assert!(Level::G0.is_ground() && Level::GM.is_ground() && Level::GP.is_ground());
        assert!(Level::A2.is_excited() && Level::EY.is_excited());
    }

    #[test]
    fn superposition_cases() {
        let s0 = spin_superposition(0.0, half(), half()).unwrap();
        assert!(s0.approx_eq(&bright_state(0.0), 1e-15));

        let spi = spin_superposition(PI, half(), half()).unwrap();
        assert!((spi.amplitude(Level::GP) - C64::new(-FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!(spi.inner(&s0).norm() < 1e-15);

        let s90 = spin_superposition(PI / 2.0, half(), half()).unwrap();
        assert!((s90.inner(&s0).norm() - FRAC_1_SQRT_2).abs() < 1e-15);

        assert!(matches!(
            spin_superposition(0.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0)),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn dark_bright_cases() {
        let d0 = dark_state(0.0);
        assert!((d0.amplitude(Level::GP) + d0.amplitude(Level::GM)).norm() < 1e-15);
        assert!(dark_state(PI).approx_eq(&bright_state(0.0), 1e-15));

        let b = bright_state(PI / 2.0);
        // canonical phase keeps GM real-positive here
        assert!((b.amplitude(Level::GP) - C64::new(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((b.amplitude(Level::GM) - half()).norm() < 1e-15);
    }

    #[test]
    fn decomposition_examples() {
        let phi = 0.7;
        let cases = [(0.0, 1.0, 0.0), (PI, 0.0, 1.0), (PI / 2.0, 0.5, 0.5)];
        for (shift, pb, pd) in cases {
            let psi = spin_superposition(phi + shift, half(), half()).unwrap();
            let db = dark_bright_decompose(&psi.to_density(), phi).unwrap();
            assert!((db.bright - pb).abs() < 1e-12, "{shift}: {db:?}");
            assert!((db.dark - pd).abs() < 1e-12);
            assert!(db.rest.abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_density_rejected() {
        let mut m = Operator::zeros();
        m[(0, 0)] = C64::new(2.0, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let mut m = Operator::zeros();
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(dark_bright_decompose(&DensityMatrix(m), 0.0).is_err());
        assert!(DensityMatrix::maximally_mixed().validate().is_ok());
    }

    proptest! {
        #[test]
        fn dark_bright_orthonormal(phi in -10.0f64..10.0) {
            let d = dark_state(phi);
            let b = bright_state(phi);
            prop_assert!(d.inner(&b).norm() < 1e-12);
            prop_assert!((d.amplitudes().norm() - 1.0).abs() < 1e-12);
            prop_assert!((b.amplitudes().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fringe_law(theta in -7.0f64..7.0, phi in -7.0f64..7.0, delta in -3.0f64..3.0) {
            let psi = spin_superposition(theta, half(), half()).unwrap();
            let db = dark_bright_decompose_pure(&psi, phi);
            let expected = ((theta - phi) / 2.0).cos().powi(2);
            prop_assert!((db.bright - expected).abs() < 1e-12);
            prop_assert!((db.bright + db.dark - 1.0).abs() < 1e-12);

            let shifted = spin_superposition(theta + delta, half(), half()).unwrap();
            let db2 = dark_bright_decompose_pure(&shifted, phi + delta);
            prop_assert!((db2.bright - db.bright).abs() < 1e-12);
            prop_assert!((db2.dark - db.dark).abs() < 1e-12);
        }

        #[test]
        fn constructed_states_are_valid(theta in -7.0f64..7.0, a in 0.0f64..1.0) {
            let cp = C64::new(a.sqrt(), 0.0);
            let cm = C64::from_polar((1.0 - a).sqrt(), 0.3);
            let rho = spin_superposition(theta, cp, cm).unwrap().to_density();
            prop_assert!(rho.validate().is_ok());
        }
    }
}
