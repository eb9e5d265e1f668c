// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Least-squares fits for fringes, dips and decays.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::detector::TimeTrace;
use crate::{Error, Result};

/// Signal sampled against a phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeData {
    pub phases_rad: Vec<f64>,
    pub signals: Vec<f64>,
}

impl FringeData {
    /// At least 8 points covering a full period. A uniform grid that omits
    /// the endpoint `2π` counts as covering it.
    pub fn new(phases_rad: Vec<f64>, signals: Vec<f64>) -> Result<Self> {
        if phases_rad.len() != signals.len() {
            return Err(Error::Fit(format!(
                "{} phases but {} signals",
                phases_rad.len(),
                signals.len()
            )));
        }
        let n = phases_rad.len();
        if n < 8 {
            return Err(Error::Fit(format!("fringe needs >= 8 points, got {n}")));
        }
        let lo = phases_rad.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = phases_rad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo) * n as f64 / (n - 1) as f64;
        if span < TAU - 1e-9 {
            return Err(Error::Fit(format!("fringe spans {span:.3} rad, need 2π")));
        }
        Ok(FringeData { phases_rad, signals })
    }

    /// `n` equally spaced phases in `[0, 2π)`.
    pub fn uniform_phases(n: usize) -> Vec<f64> {
        (0..n).map(|k| TAU * k as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    /// Phase of the maximum.
    pub phase0: f64,
    pub visibility: f64,
    pub r_squared: f64,
}

impl SinusoidFit {
    pub fn eval(&self, phi: f64) -> f64 {
        self.offset + self.amplitude * (phi - self.phase0).cos()
    }
}

/// Exact linear least squares on `a + b cos φ + c sin φ`.
pub fn fit_sinusoid(data: &FringeData) -> Result<SinusoidFit> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&phi, &y) in data.phases_rad.iter().zip(&data.signals) {
        let row = Vector3::new(1.0, phi.cos(), phi.sin());
        ata += row * row.transpose();
        aty += row * y;
    }
    let coef = ata
        .cholesky()
        .ok_or_else(|| Error::Fit("singular fringe design matrix".into()))?
        .solve(&aty);
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    if !(a > 0.0) {
        return Err(Error::Fit(format!("non-positive fringe offset {a}")));
    }
    let amplitude = b.hypot(c);
    let phase0 = if amplitude > 0.0 { c.atan2(b).rem_euclid(TAU) } else { 0.0 };
    let fit = SinusoidFit {
        offset: a,
        amplitude,
        phase0,
        visibility: (amplitude / a).clamp(0.0, 1.0),
        r_squared: 1.0,
    };
    Ok(SinusoidFit {
        r_squared: r_squared(&data.signals, data.phases_rad.iter().map(|&p| fit.eval(p))),
        ..fit
    })
}

/// Coefficient of determination; 1 for a constant signal fitted exactly.
pub fn r_squared(y: &[f64], model: impl Iterator<Item = f64>) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(model).map(|(v, m)| (v - m).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// `(I_max − I_min)/(I_max + I_min)`.
pub fn visibility(i_max: f64, i_min: f64) -> Result<f64> {
    if !(i_min >= 0.0 && i_max >= i_min && i_max > 0.0) {
        return Err(Error::param(
            "visibility",
            format!("need i_max >= i_min >= 0 and i_max > 0, got ({i_max}, {i_min})"),
        ));
    }
    Ok((i_max - i_min) / (i_max + i_min))
}

/// Gauss-Newton with step halving. `residuals(p)` returns the residual
/// vector and its Jacobian.
fn gauss_newton<F>(mut p: Vec<f64>, residuals: F, max_iter: usize, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
{
    let cost = |p: &[f64]| residuals(p).0.norm_squared();
    for _ in 0..max_iter {
        let (r, j) = residuals(&p);
        let c0 = r.norm_squared();
        let svd = j.clone().svd(true, true);
        let step = svd
            .solve(&(-&r), 1e-14 * svd.singular_values.max())
            .map_err(|e| Error::Fit(e.to_string()))?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
            let c = cost(&trial);
            if c.is_finite() && c <= c0 {
                accepted = Some(trial);
                break;
            }
            scale *= 0.5;
        }
        let Some(next) = accepted else {
            // no descent possible: already at the minimum to rounding
            return Ok(p);
        };
        let converged = p
            .iter()
            .zip(&next)
            .all(|(a, b)| (a - b).abs() <= tol * (a.abs() + tol));
        p = next;
        if converged {
            return Ok(p);
        }
    }
    Err(Error::Fit(format!("Gauss-Newton did not converge in {max_iter} iterations")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub center_mhz: f64,
    pub fwhm_mhz: f64,
    pub depth: f64,
    pub baseline: f64,
}

impl LorentzianFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.baseline * (1.0 - self.depth * lorentz(x, self.center_mhz, self.fwhm_mhz))
    }
}

fn lorentz(x: f64, c: f64, w: f64) -> f64 {
    let u = (x - c) / (w / 2.0);
    1.0 / (1.0 + u * u)
}

/// Linear least squares for `y ≈ Σ_k coef_k · col_k`. Returns the
/// coefficients and the residual sum of squares.
fn linear_lsq(cols: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let a = DMatrix::from_fn(y.len(), cols.len(), |i, k| cols[k][i]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-13 * svd.singular_values.max()).ok()?;
    let rss = (a * &coef - b).norm_squared();
    Some((coef.iter().copied().collect(), rss))
}

/// Inverted Lorentzian `baseline·(1 − depth/(1 + ((x − center)/(fwhm/2))²))`.
pub fn fit_lorentzian_dip(x: &[f64], y: &[f64]) -> Result<LorentzianFit> {
    if x.len() != y.len() || x.len() < 9 {
        return Err(Error::Fit(format!("dip fit needs >= 9 (x, y) pairs, got {}", x.len().min(y.len()))));
    }
    let (imin, &ymin) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if ymax - ymin <= 1e-12 * ymax.abs().max(1e-300) {
        return Err(Error::Fit("flat spectrum: no dip".into()));
    }
    if imin == 0 || imin == y.len() - 1 {
        return Err(Error::Fit("minimum at the edge of the sweep: no interior dip".into()));
    }

    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let min_step = x
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);

    // coarse grid over (center, fwhm); baseline and baseline·depth are linear
    let ones = vec![1.0; x.len()];
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0, 0.0);
    let nc = 81;
    let nw = 60;
    let (wlo, whi) = ((min_step / 2.0).ln(), (4.0 * range).ln());
    for ic in 0..nc {
        let c = x[imin] + (ic as f64 / (nc - 1) as f64 - 0.5) * 4.0 * min_step;
        for iw in 0..nw {
            let w = (wlo + (whi - wlo) * iw as f64 / (nw - 1) as f64).exp();
            let l: Vec<f64> = x.iter().map(|&xi| -lorentz(xi, c, w)).collect();
            if let Some((coef, rss)) = linear_lsq(&[ones.clone(), l], y) {
                if rss < best.0 && coef[0] > 0.0 {
                    best = (rss, c, w, coef[1] / coef[0], coef[0]);
                }
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Fit("no dip found on the initial grid".into()));
    }

    let resid = |p: &[f64]| {
        let (c, w, d, b) = (p[0], p[1], p[2], p[3]);
        let mut r = DVector::zeros(x.len());
        let mut j = DMatrix::zeros(x.len(), 4);
        for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
            let u = (xi - c) / (w / 2.0);
            let l = 1.0 / (1.0 + u * u);
            let dl_du = -2.0 * u * l * l;
            r[i] = b * (1.0 - d * l) - yi;
            j[(i, 0)] = -b * d * dl_du * (-2.0 / w);
            j[(i, 1)] = -b * d * dl_du * (-u / w);
            j[(i, 2)] = -b * l;
            j[(i, 3)] = 1.0 - d * l;
        }
        (r, j)
    };
    let p = gauss_newton(vec![best.1, best.2, best.3, best.4], resid, 200, 1e-6)?;
    let fit = LorentzianFit {
        center_mhz: p[0],
        fwhm_mhz: p[1].abs(),
        depth: p[2],
        baseline: p[3],
    };
    if !(fit.fwhm_mhz > 0.0 && fit.baseline > 0.0) {
        return Err(Error::Fit(format!("degenerate dip fit {fit:?}")));
    }
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// `(amplitude, tau_ns)` sorted by ascending tau. Amplitudes are the
    /// values at `t_start_ns`.
    pub components: Vec<(f64, f64)>,
    pub offset: f64,
    pub t_start_ns: f64,
}

impl ExponentialFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset
            + self
                .components
                .iter()
                .map(|(a, tau)| a * (-(t - self.t_start_ns) / tau).exp())
                .sum::<f64>()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.1).collect()
    }

    pub fn fastest_tau(&self) -> f64 {
        self.components[0].1
    }

    pub fn slowest_tau(&self) -> f64 {
        self.components[self.components.len() - 1].1
    }
}

/// How the constant term of an exponential fit is treated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Offset {
    /// Decays to zero.
    #[default]
    Zero,
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpFitOptions {
    pub offset: Offset,
    /// Last sample time included; `None` uses the whole trace.
    pub t_end_ns: Option<f64>,
}

/// Fit to a trace, sampled at bin centers from `t_start_ns` on.
pub fn fit_exponential(trace: &TimeTrace, n_components: usize, t_start_ns: f64) -> Result<ExponentialFit> {
    let t = trace.bin_centers_ns();
    fit_exponential_xy(&t, &trace.counts, n_components, t_start_ns, ExpFitOptions::default())
}

/// Same fit on arbitrary `(t, y)` samples.
pub fn fit_exponential_xy(
    t: &[f64],
    y: &[f64],
    n_components: usize,
    t_start_ns: f64,
    opts: ExpFitOptions,
) -> Result<ExponentialFit> {
    if !(n_components == 1 || n_components == 2) {
        return Err(Error::Fit(format!("n_components must be 1 or 2, got {n_components}")));
    }
    let t_end = opts.t_end_ns.unwrap_or(f64::INFINITY);
    let (ts, ys): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= t_start_ns && ti <= t_end)
        .map(|(&ti, &yi)| (ti - t_start_ns, yi))
        .unzip();
    if ts.len() < 10 {
        return Err(Error::Fit(format!("need >= 10 samples after t_start, got {}", ts.len())));
    }
    let free_offset = opts.offset == Offset::Free;
    let fixed = match opts.offset {
        Offset::Zero | Offset::Free => 0.0,
        Offset::Fixed(c) => c,
    };
    let yshift: Vec<f64> = ys.iter().map(|v| v - fixed).collect();

    let first = yshift[0];
    if yshift.iter().all(|v| (v - first).abs() <= 1e-12 * first.abs().max(1e-300)) {
        return Err(Error::Fit("constant trace: no decay to fit".into()));
    }

    let init: Vec<f64> = if n_components == 1 {
        if free_offset {
            vpro_grid(&ts, &yshift, 1, true)?
        } else {
            log_linear(&ts, &yshift)?
        }
    } else {
        vpro_grid(&ts, &yshift, 2, free_offset)?
    };

    // parameters: [a_1, ln tau_1, (a_2, ln tau_2), (offset)]
    let n = n_components;
    let resid = |p: &[f64]| {
        let m = ts.len();
        let np = 2 * n + usize::from(free_offset);
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, np);
        for (i, (&ti, &yi)) in ts.iter().zip(&yshift).enumerate() {
            let mut v = if free_offset { p[2 * n] } else { 0.0 };
            for k in 0..n {
                let (a, tau) = (p[2 * k], p[2 * k + 1].exp());
                let e = (-ti / tau).exp();
                v += a * e;
                j[(i, 2 * k)] = e;
                j[(i, 2 * k + 1)] = a * e * ti / tau;
            }
            if free_offset {
                j[(i, 2 * n)] = 1.0;
            }
            r[i] = v - yi;
        }
        (r, j)
    };
    let p = gauss_newton(init, resid, 200, 1e-9)?;
    let mut components: Vec<(f64, f64)> = (0..n).map(|k| (p[2 * k], p[2 * k + 1].exp())).collect();
    components.sort_by(|a, b| a.1.total_cmp(&b.1));
    if components.iter().any(|c| !(c.1 > 0.0 && c.1.is_finite())) {
        return Err(Error::Fit(format!("invalid decay times {components:?}")));
    }
    Ok(ExponentialFit {
        components,
        offset: if free_offset { p[2 * n] } else { fixed },
        t_start_ns,
    })
}

/// Single exponential from a straight-line fit to `ln y`.
fn log_linear(t: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if y.iter().any(|&v| v <= 0.0) {
        return Err(Error::Fit("non-positive data after offset subtraction".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (coef, _) = linear_lsq(&[vec![1.0; t.len()], t.to_vec()], &ly)
        .ok_or_else(|| Error::Fit("log-linear initialization failed".into()))?;
    let slope = coef[1];
    // rising or flat data: start from a long decay and let refinement decide
    let tau = if slope < 0.0 { -1.0 / slope } else { 1e6 };
    Ok(vec![coef[0].exp(), tau.ln()])
}

/// Variable projection over log-spaced decay times in `[1, 1e4]` ns
/// (60 per axis) with linear amplitudes.
fn vpro_grid(t: &[f64], y: &[f64], n: usize, free_offset: bool) -> Result<Vec<f64>> {
    let grid: Vec<f64> = (0..60).map(|k| 10f64.powf(4.0 * k as f64 / 59.0)).collect();
    let col = |tau: f64| t.iter().map(|ti| (-ti / tau).exp()).collect::<Vec<f64>>();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |taus: &[f64]| {
        let mut cols: Vec<Vec<f64>> = taus.iter().map(|&tau| col(tau)).collect();
        if free_offset {
            cols.push(vec![1.0; t.len()]);
        }
        if let Some((coef, rss)) = linear_lsq(&cols, y) {
            if best.as_ref().is_none_or(|b| rss < b.0) {
                let mut p = Vec::new();
                for (k, tau) in taus.iter().enumerate() {
                    p.push(coef[k]);
                    p.push(tau.ln());
                }
                if free_offset {
                    p.push(coef[taus.len()]);
                }
                best = Some((rss, p));
            }
        }
    };
    if n == 1 {
        for &a in &grid {
            consider(&[a]);
        }
    } else {
        for (i, &a) in grid.iter().enumerate() {
            for &b in &grid[i + 1..] {
                consider(&[a, b]);
            }
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| Error::Fit("variable-projection grid found no solution".into()))
}

/// Decay of fringe contrast when a phase-dependent signal decaying with
/// `tau_ns` sits on a slowly varying phase-independent background:
/// `V(t) = v0 / (1 + ratio · e^{t/τ})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastDecayFit {
    pub v0: f64,
    pub ratio: f64,
    pub tau_ns: f64,
}

impl ContrastDecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.v0 / (1.0 + self.ratio * (t / self.tau_ns).exp())
    }
}

/// Grid over `(ln ratio, ln τ)` with `v0` projected out, then Gauss-Newton.
pub fn fit_contrast_decay(t: &[f64], v: &[f64]) -> Result<ContrastDecayFit> {
    if t.len() != v.len() || t.len() < 5 {
        return Err(Error::Fit(format!("contrast fit needs >= 5 points, got {}", t.len().min(v.len()))));
    }
    if v.iter().all(|&x| (x - v[0]).abs() <= 1e-12) {
        return Err(Error::Fit("constant contrast: no decay to fit".into()));
    }
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for i in 0..60 {
        let tau = 10f64.powf(4.0 * i as f64 / 59.0);
        for j in 0..60 {
            let ln_r = -14.0 + 20.0 * j as f64 / 59.0;
            let g: Vec<f64> = t.iter().map(|ti| 1.0 / (1.0 + (ln_r + ti / tau).exp())).collect();
            let gg: f64 = g.iter().map(|x| x * x).sum();
            let v0 = g.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / gg;
            let rss: f64 = g.iter().zip(v).map(|(a, b)| (v0 * a - b).powi(2)).sum();
            if rss < best.0 {
                best = (rss, v0, ln_r, tau.ln());
            }
        }
    }
    let resid = |p: &[f64]| {
        let (v0, ln_r, ln_tau) = (p[0], p[1], p[2]);
        let tau = ln_tau.exp();
        let mut r = DVector::zeros(t.len());
        let mut j = DMatrix::zeros(t.len(), 3);
        for (i, (&ti, &vi)) in t.iter().zip(v).enumerate() {
            let e = (ln_r + ti / tau).exp();
            let d = 1.0 + e;
            r[i] = v0 / d - vi;
            j[(i, 0)] = 1.0 / d;
            j[(i, 1)] = -v0 * e / (d * d);
            j[(i, 2)] = v0 * e * ti / tau / (d * d);
        }
        (r, j)
    };
    let p = gauss_newton(vec![best.1, best.2, best.3], resid, 200, 1e-9)?;
    let fit = ContrastDecayFit {
        v0: p[0],
        ratio: p[1].exp(),
        tau_ns: p[2].exp(),
    };
    if !(fit.tau_ns > 0.0 && fit.tau_ns.is_finite()) {
        return Err(Error::Fit(format!("invalid contrast decay time {}", fit.tau_ns)));
    }
    Ok(fit)
}

/// Phase difference wrapped to `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}
