//! Displaced-parity Bell tests.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mixture::{GaussianMixture, WignerFunction};
use super::{BellResult, BellTest};
use crate::error::{Error, Result};
use crate::states::{apply_symplectic, build, phase_rotation_matrix, GaussianState, StateFamilySpec};
use crate::symplectic::Vector;

/// E(α) = ⟨⊗ D(α_k)(−1)^{n_k} D†(α_k)⟩ = π^n W(X) with X = √2(Re α, Im α) per mode.
pub fn dp_correlation<S: WignerFunction + ?Sized>(state: &S, alphas: &[Complex64]) -> Result<f64> {
    if alphas.len() != state.n_modes() {
        return Err(Error::Dimension(format!("{} displacements for {} modes", alphas.len(), state.n_modes())));
    }
    let x = Vector::from_iterator(2 * alphas.len(), alphas.iter().flat_map(|a| [SQRT_2 * a.re, SQRT_2 * a.im]));
    Ok(PI.powi(alphas.len() as i32) * state.wigner(&x)?)
}

/// Two displacement choices per party: unprimed and primed.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSetting {
    pub alpha: Vec<Complex64>,
    pub alpha_p: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DpParameterization {
    /// α = (0, 0), α' = (√J, −√J)
    Bw,
    /// α = i√J(1, 1), α' = −3i√J(1, 1)
    Optimized,
    /// α = (i√J, −2i√J), α' = (3i√J, 0)
    Twba,
    /// α = i√J(1, 1, 1), α' = −2i√J(1, 1, 1)
    ThreeMode,
    /// α = √(J/2)(1, 1, 1), α' = −2√(J/2)(1, 1, 1)
    ThreeModeT,
    /// α = (⅔ i√J, 0, 0), α' = (0, −i√J, i√J)
    ThreeModeTOptimized,
}

impl DpParameterization {
    pub fn n_modes(self) -> usize {
        match self {
            Self::Bw | Self::Optimized | Self::Twba => 2,
            _ => 3,
        }
    }

    pub fn setting(self, j: f64) -> Result<DpSetting> {
        if !(j >= 0.0 && j.is_finite()) {
            return Err(Error::InvalidParameter(format!("J must be non-negative, got {j}")));
        }
        let s = j.sqrt();
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let (alpha, alpha_p) = match self {
            Self::Bw => (vec![c(0.0, 0.0); 2], vec![c(s, 0.0), c(-s, 0.0)]),
            Self::Optimized => (vec![c(0.0, s); 2], vec![c(0.0, -3.0 * s); 2]),
            Self::Twba => (vec![c(0.0, s), c(0.0, -2.0 * s)], vec![c(0.0, 3.0 * s), c(0.0, 0.0)]),
            Self::ThreeMode => (vec![c(0.0, s); 3], vec![c(0.0, -2.0 * s); 3]),
            Self::ThreeModeT => {
                let h = (0.5 * j).sqrt();
                (vec![c(h, 0.0); 3], vec![c(-2.0 * h, 0.0); 3])
            }
            Self::ThreeModeTOptimized => {
                (vec![c(0.0, 2.0 * s / 3.0), c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, -s), c(0.0, s)])
            }
        };
        Ok(DpSetting { alpha, alpha_p })
    }
}

/// B₂ = E(α₁,α₂) + E(α₁,α₂') + E(α₁',α₂) − E(α₁',α₂').
pub fn bell2_dp<S: WignerFunction + ?Sized>(state: &S, s: &DpSetting) -> Result<f64> {
    if state.n_modes() != 2 || s.alpha.len() != 2 || s.alpha_p.len() != 2 {
        return Err(Error::Dimension("two-mode Bell combination".into()));
    }
    let (a, b) = (&s.alpha, &s.alpha_p);
    let e = |x: Complex64, y: Complex64| dp_correlation(state, &[x, y]);
    Ok(e(a[0], a[1])? + e(a[0], b[1])? + e(b[0], a[1])? - e(b[0], b[1])?)
}

/// B₃ = E(α₁,α₂,α₃') + E(α₁,α₂',α₃) + E(α₁',α₂,α₃) − E(α₁',α₂',α₃').
pub fn bell3_dp<S: WignerFunction + ?Sized>(state: &S, s: &DpSetting) -> Result<f64> {
    if state.n_modes() != 3 || s.alpha.len() != 3 || s.alpha_p.len() != 3 {
        return Err(Error::Dimension("three-mode Bell combination".into()));
    }
    let (a, b) = (&s.alpha, &s.alpha_p);
    let e = |x: Complex64, y: Complex64, z: Complex64| dp_correlation(state, &[x, y, z]);
    Ok(e(a[0], a[1], b[2])? + e(a[0], b[1], a[2])? + e(b[0], a[1], a[2])? - e(b[0], b[1], b[2])?)
}

fn twb(r: f64) -> Result<GaussianMixture> {
    GaussianMixture::try_from(&build(&StateFamilySpec::Twb { r })?)
}

/// TWB Bell combination assembled from four Wigner evaluations.
pub fn bell2_dp_twb(r: f64, j: f64, param: DpParameterization) -> Result<f64> {
    if param.n_modes() != 2 {
        return Err(Error::InvalidParameter(format!("{param:?} is a three-mode parameterization")));
    }
    bell2_dp(&twb(r)?, &param.setting(j)?)
}

/// B = 1 + 2exp(−2J cosh 2r) − exp(−4J e^{2r}).
pub fn bell2_dp_twb_closed(r: f64, j: f64) -> f64 {
    1.0 + 2.0 * (-2.0 * j * (2.0 * r).cosh()).exp() - (-4.0 * j * (2.0 * r).exp()).exp()
}

/// V₃ with every mode rotated by a quarter turn (equivalently r → −r), the orientation in which
/// imaginary displacements probe the squeezed quadratures.
pub fn v3_quarter_turn(r: f64) -> Result<GaussianState> {
    let v3 = build(&StateFamilySpec::TriV3 { r })?;
    let rot = phase_rotation_matrix(PI / 2.0);
    let all = rot.direct_sum(&rot).direct_sum(&rot);
    apply_symplectic(&v3, &all, None)
}

/// B₃ = 3exp(−12e^{−2r}J) − exp(−24e^{2r}J) for the quarter-turned V₃ and `ThreeMode` displacements.
pub fn bell3_dp_v3_closed(r: f64, j: f64) -> f64 {
    3.0 * (-12.0 * (-2.0 * r).exp() * j).exp() - (-24.0 * (2.0 * r).exp() * j).exp()
}

/// |T⟩ with N₂ = N₃ = N/4, φ₂ = φ₃ = π and `ThreeModeT` displacements.
pub fn bell3_dp_t_closed(n: f64, j: f64) -> f64 {
    let q = SQRT_2 * (n * (2.0 + n)).sqrt();
    let num = -1.0 + (6.0 * j * (1.0 + n + 2.0 * q)).exp() + 2.0 * (1.5 * j * (4.0 + 7.0 * n + 6.0 * q)).exp();
    num / (4.0 * j * (3.0 + 3.0 * n + 2.0 * q)).exp()
}

pub fn t_state_for_dp(n: f64, phi2: f64, phi3: f64) -> Result<GaussianState> {
    build(&StateFamilySpec::TriT { n2: 0.25 * n, n3: 0.25 * n, phi2, phi3, n_thermal: 0.0 })
}

/// Logarithmic grid of `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(Error::InvalidParameter(format!("log grid [{lo}, {hi}] with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(hi >= lo && n >= 1 && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid [{lo}, {hi}] with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

/// Largest |B| over a J grid for one state; every point is also returned for CSV output.
pub fn bell_dp_sweep<S: WignerFunction + ?Sized>(
    state: &S,
    tag: &str,
    param: DpParameterization,
    js: &[f64],
) -> Result<(BellResult, Vec<BellResult>)> {
    let test = if param.n_modes() == 2 { BellTest::Dp2 } else { BellTest::Dp3 };
    let rows = js
        .par_iter()
        .map(|&j| {
            let s = param.setting(j)?;
            let b = if param.n_modes() == 2 { bell2_dp(state, &s)? } else { bell3_dp(state, &s)? };
            Ok(BellResult::new(test, tag, vec![("j".into(), j)], b))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = BellResult::best(&rows).ok_or_else(|| Error::InvalidParameter("empty J grid".into()))?;
    Ok((best, rows))
}

/// Sweep over a family parameter x (squeezing, photon number) and J; states are built per x.
pub fn bell_dp_family_sweep<F, S>(
    family: F,
    tag: &str,
    param: DpParameterization,
    xs: &[f64],
    js: &[f64],
) -> Result<(BellResult, Vec<BellResult>)>
where
    F: Fn(f64) -> Result<S> + Sync,
    S: WignerFunction,
{
    let rows: Vec<BellResult> = xs
        .par_iter()
        .map(|&x| {
            let st = family(x)?;
            let (_, rows) = bell_dp_sweep(&st, tag, param, js)?;
            Ok(rows
                .into_iter()
                .map(|mut row| {
                    row.params.insert(0, ("x".into(), x));
                    row
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let best = BellResult::best(&rows).ok_or_else(|| Error::InvalidParameter("empty grid".into()))?;
    Ok((best, rows))
}
