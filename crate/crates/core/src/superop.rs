// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Reference solution for time-independent Lindblad evolution: the 25×25
//! Liouvillian built from Kronecker products and exponentiated by scaling
//! and squaring. Shares no code with the RK4 path in [`crate::propagator`].

use nalgebra::DMatrix;

use crate::state::{DensityMatrix, DIM};
use crate::{Operator, C64};

type Super = DMatrix<C64>;

fn dyn_op(m: &Operator) -> Super {
    DMatrix::from_fn(DIM, DIM, |i, j| m[(i, j)])
}

/// Liouvillian acting on column-stacked `vec(ρ)`, using
/// `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.
pub fn liouvillian(h: &Operator, collapses: &[Operator]) -> Super {
    let id = Super::identity(DIM, DIM);
    let h = dyn_op(h);
    let minus_i = C64::new(0.0, -1.0);
    let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * minus_i;
    for c in collapses {
        let c = dyn_op(c);
        let cdc = c.adjoint() * &c;
        l += c.conjugate().kronecker(&c);
        l -= (id.kronecker(&cdc) + cdc.transpose().kronecker(&id)) * C64::from(0.5);
    }
    l
}

fn one_norm(m: &Super) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring with a degree-24 Taylor kernel on
/// `A / 2^s`, `‖A / 2^s‖₁ ≤ 1/2`.
pub fn expm(a: &Super) -> Super {
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a * C64::from(0.5f64.powi(s));
    let mut result = Super::identity(n, n);
    let mut term = Super::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled * C64::from(1.0 / k as f64);
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// `ρ(t) = unvec(exp(L t) vec(ρ₀))`.
pub fn evolve(rho: &DensityMatrix, h: &Operator, collapses: &[Operator], t_ns: f64) -> DensityMatrix {
    let prop = expm(&(liouvillian(h, collapses) * C64::from(t_ns)));
    let v = DMatrix::from_column_slice(DIM * DIM, 1, rho.matrix().as_slice());
    let out = prop * v;
    DensityMatrix::from_matrix_unchecked(Operator::from_column_slice(out.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipation::{collapse_operators, DecoherenceParams};
    use crate::state::{LevelScheme, Level};

    #[test]
    fn expm_matches_nalgebra_exp() {
        let a = Super::from_fn(6, 6, |i, j| C64::new((i as f64 - j as f64) * 0.3, ((i * j) as f64).sin()));
        let ours = expm(&a);
        let reference = a.exp();
        assert!(crate::max_abs(&(ours - reference)) < 1e-10);
    }

    #[test]
    fn vec_convention() {
        // L acting on vec(ρ) equals vec of the matrix-form right-hand side
        let params = DecoherenceParams::default();
        let cs = collapse_operators(&params, &LevelScheme::nv());
        let mut h = Operator::zeros();
        h[(1, 3)] = C64::new(0.1, 0.2);
        h[(3, 1)] = C64::new(0.1, -0.2);
        h[(2, 2)] = C64::new(0.05, 0.0);
        let rho = DensityMatrix::projector(Level::A2).matrix() * C64::from(0.5)
            + DensityMatrix::projector(Level::GM).matrix() * C64::from(0.5);
        let l = liouvillian(&h, &cs);
        let v = DMatrix::from_column_slice(25, 1, rho.as_slice());
        let lv = l * v;
        let direct = crate::propagator::lindblad_rhs(&rho, &h, &cs);
        for (a, b) in lv.iter().zip(direct.as_slice()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn decay_matches_closed_form() {
        let g: f64 = 0.1;
        let mut l = Operator::zeros();
        l[(Level::GM.index(), Level::A2.index())] = C64::new(g.sqrt(), 0.0);
        let rho = evolve(&DensityMatrix::projector(Level::A2), &Operator::zeros(), &[l], 7.0);
        assert!((rho.population(Level::A2) - (-0.7f64).exp()).abs() < 1e-13);
    }
}
