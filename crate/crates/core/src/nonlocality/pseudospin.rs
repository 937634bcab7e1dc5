//! Pseudospin Bell tests for two and three modes.

use std::f64::consts::PI;

use libm::lgamma;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mixture::{ips_coefficients, twba_wigner, GaussianMixture};
use super::parity::dp_correlation;
use crate::error::{Error, Result};
use crate::states::GaussianState;
use crate::symplectic::Mat;

/// Relative size of the last summed block at which the series are cut.
pub const SERIES_TOL: f64 = 1e-13;
const SERIES_MAX_BLOCKS: usize = 200_000;
/// Block m of the three-mode series costs O(m), so its budget is smaller.
const T_SERIES_MAX_BLOCKS: usize = 20_000;

/// E(θ₁, θ₂) = parity·cos θ₁ cos θ₂ + transverse·sin θ₁ sin θ₂ (azimuths zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsCorrelation {
    pub parity: f64,
    pub transverse: f64,
}

impl PsCorrelation {
    pub fn correlation(&self, t1: f64, t2: f64) -> f64 {
        self.parity * t1.cos() * t2.cos() + self.transverse * t1.sin() * t2.sin()
    }

    /// θ₁ = 0, θ₁' = π/2, θ₂' = −θ₂: B = 2(parity·cos θ₂ + transverse·sin θ₂).
    pub fn combination(&self, theta2: f64) -> f64 {
        let e = |a: f64, b: f64| self.correlation(a, b);
        e(0.0, theta2) + e(0.0, -theta2) + e(PI / 2.0, theta2) - e(PI / 2.0, -theta2)
    }

    /// max over θ₂ of |combination|.
    pub fn bell(&self) -> f64 {
        2.0 * self.parity.hypot(self.transverse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsState {
    /// Parity-block spin operators on the twin beam.
    Twb {
        r: f64,
    },
    /// Sign-of-quadrature spin operators on the twin beam.
    TwbPrime {
        r: f64,
    },
    Ips {
        lambda: f64,
        tau_eff: f64,
    },
    Twba {
        n2: f64,
        n3: f64,
        eta: f64,
    },
    Ecs {
        gamma: f64,
    },
}

impl PsState {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Twb { .. } => "twb",
            Self::TwbPrime { .. } => "twb_prime",
            Self::Ips { .. } => "ips",
            Self::Twba { .. } => "twba",
            Self::Ecs { .. } => "ecs",
        }
    }
}

/// f in E = cos θ₁ cos θ₂ + f sin θ₁ sin θ₂.
pub fn ps_correlation_factor(state: &PsState) -> Result<f64> {
    match *state {
        PsState::Twb { r } => Ok((2.0 * r).tanh()),
        PsState::TwbPrime { r } => Ok(2.0 / PI * (2.0 * r).sinh().atan()),
        PsState::Ips { lambda, tau_eff } => Ok(ips_ps_closed(lambda, tau_eff)?.transverse),
        PsState::Twba { n2, n3, eta } => f_twba(n2, n3, eta),
        PsState::Ecs { gamma } => f_ecs(gamma),
    }
}

/// Both coefficients of the correlation; parity is not always one (IPS, TWBA, ECS).
pub fn ps_correlation(state: &PsState) -> Result<PsCorrelation> {
    match *state {
        PsState::Twb { .. } | PsState::TwbPrime { .. } => {
            Ok(PsCorrelation { parity: 1.0, transverse: ps_correlation_factor(state)? })
        }
        PsState::Ips { lambda, tau_eff } => ips_ps_closed(lambda, tau_eff),
        PsState::Twba { n2, n3, eta } => {
            let w = twba_wigner(n2 + n3, n2, n3, eta)?;
            Ok(PsCorrelation { parity: origin_parity(&w)?, transverse: f_twba(n2, n3, eta)? })
        }
        PsState::Ecs { gamma } => Ok(PsCorrelation { parity: -1.0, transverse: -f_ecs(gamma)? }),
    }
}

/// 2√(1 + f²), the maximum over θ₂ of 2(cos θ₂ + f sin θ₂).
pub fn bell2_ps(f: f64) -> Result<f64> {
    if !f.is_finite() || f.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("correlation factor must lie in [-1, 1], got {f}")));
    }
    Ok(2.0 * (1.0 + f * f).sqrt())
}

fn origin_parity(w: &GaussianMixture) -> Result<f64> {
    dp_correlation(w, &vec![Complex64::new(0.0, 0.0); w.n_modes])
}

/// Sign-of-quadrature spin operators evaluated on any centered two-mode mixture:
/// parity from the Wigner function at the origin, transverse from the orthant law on (q₁, q₂).
pub fn gkm_correlation(w: &GaussianMixture) -> Result<PsCorrelation> {
    if w.n_modes != 2 || !w.is_centered() {
        return Err(Error::InvalidParameter("needs a centered two-mode mixture".into()));
    }
    let transverse = w.components.iter().map(|c| c.weight * 2.0 / PI * orthant_rho(&c.cov, 0, 2).asin()).sum();
    Ok(PsCorrelation { parity: origin_parity(w)?, transverse })
}

fn orthant_rho(cov: &Mat, i: usize, j: usize) -> f64 {
    (cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()).clamp(-1.0, 1.0)
}

/// IPS correlation from the four table entries: parity Σ𝒞_k/p₁₁ and
/// transverse Σ 8𝒞_k/(π𝒜_k p₁₁) arctan(R_k/√𝒜_k).
pub fn ips_ps_closed(lambda: f64, tau_eff: f64) -> Result<PsCorrelation> {
    let k = ips_coefficients(lambda, tau_eff)?;
    let p11: f64 = k.iter().map(|c| 4.0 * c.cc / c.a).sum();
    if !(p11 > 0.0) {
        return Err(Error::InvalidParameter(format!("p11 = {p11:e}: no conditional state")));
    }
    let parity = k.iter().map(|c| c.cc).sum::<f64>() / p11;
    let transverse = k.iter().map(|c| 8.0 * c.cc / (PI * c.a) * (c.r / c.a.sqrt()).atan()).sum::<f64>() / p11;
    Ok(PsCorrelation { parity, transverse })
}

/// k·ln x with the convention 0·ln 0 = 0.
fn klog(k: f64, lnx: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * lnx
    }
}

/// Sums blocks n = first, first + step, ... until a block falls below SERIES_TOL of the total
/// while decreasing.
fn sum_blocks<F: FnMut(usize) -> f64>(first: usize, step: usize, mut block: F) -> Result<f64> {
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    let mut n = first;
    for _ in 0..SERIES_MAX_BLOCKS {
        let b = block(n);
        total += b;
        if b.abs() <= SERIES_TOL * total.abs() && b.abs() <= prev {
            return Ok(total);
        }
        prev = b.abs();
        n += step;
    }
    Err(Error::NoConvergence(format!("series not converged after {SERIES_MAX_BLOCKS} blocks")))
}

/// Transverse correlation of the TWBA. Only even p contribute.
pub fn f_twba(n2: f64, n3: f64, eta: f64) -> Result<f64> {
    if !(n2 >= 0.0 && n3 > 0.0 && eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "TWBA needs N2 >= 0, N3 > 0, eta in (0, 1]; got ({n2}, {n3}, {eta})"
        )));
    }
    let n1 = n2 + n3;
    let (la, lb) = ((n2 / (1.0 + n1)).ln(), (n3 / (1.0 + n1)).ln());
    let loss = (1.0 - eta).ln();
    // n = 2k + p with p even and at least 2
    let s = sum_blocks(2, 2, |n| {
        let mut b = 0.0;
        for k in 0..n / 2 {
            let (k2, p) = ((2 * k) as f64, (n - 2 * k) as f64);
            let lt = lgamma(k2 + p + 1.0) - lgamma(k2 + 1.0) - lgamma(p + 1.0) + klog(p, lb) + klog(k2, la);
            let keep = if eta == 1.0 { 1.0 } else { 1.0 - (p * loss).exp() };
            b += lt.exp() * ((k2 + p + 1.0) / (k2 + 1.0)).sqrt() * keep;
        }
        b
    })?;
    Ok(2.0 * (n2 / (1.0 + n1)).sqrt() * (1.0 + n3 * eta) / (n3 * (1.0 + n1) * eta) * s)
}

/// Transverse correlation of the entangled coherent state, S²/(cosh γ² sinh γ²) with
/// S = Σ γ^{4n+1}/√((2n)!(2n+1)!).
pub fn f_ecs(gamma: f64) -> Result<f64> {
    if !(gamma != 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("ECS amplitude must be nonzero, got {gamma}")));
    }
    let g = gamma.abs();
    let lg = g.ln();
    let s = sum_blocks(0, 1, |n| {
        let n = n as f64;
        ((4.0 * n + 1.0) * lg - 0.5 * (lgamma(2.0 * n + 1.0) + lgamma(2.0 * n + 2.0))).exp()
    })?;
    let g2 = g * g;
    // cosh x sinh x = sinh 2x / 2, evaluated in logs for large γ
    let log_den = if g2 < 20.0 { ((2.0 * g2).sinh() / 2.0).ln() } else { 2.0 * g2 - 2f64.ln() * 2.0 };
    Ok((2.0 * s.ln() - log_den).exp())
}

/// Three-mode correlation coefficients with azimuths (φ₁, φ₂, φ₃).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeModePs {
    pub c: [f64; 3],
    pub phi: [f64; 3],
}

impl ThreeModePs {
    pub fn correlation(&self, t: [f64; 3]) -> f64 {
        let (c, s) = (t.map(f64::cos), t.map(f64::sin));
        let p = self.phi;
        c[0] * c[1] * c[2]
            + self.c[0] * c[0] * s[1] * s[2] * (p[1] - p[2]).cos()
            + self.c[1] * c[1] * s[0] * s[2] * (p[0] + p[2]).cos()
            + self.c[2] * c[2] * s[0] * s[1] * (p[0] - p[1]).cos()
    }

    /// x = (θ₁, θ₂, θ₃, θ₁', θ₂', θ₃').
    pub fn combination(&self, x: &[f64; 6]) -> f64 {
        let e = |a, b, c| self.correlation([a, b, c]);
        e(x[0], x[1], x[5]) + e(x[0], x[4], x[2]) + e(x[3], x[1], x[2]) - e(x[3], x[4], x[5])
    }

    /// max |B₃| over the six polar angles: grid seeds then exact coordinate ascent
    /// (B₃ is of the form P cos θ + Q sin θ + K in each angle).
    pub fn maximize(&self) -> (f64, [f64; 6]) {
        const GRID: usize = 6;
        let vals: Vec<f64> = (0..GRID).map(|i| -PI + 2.0 * PI * i as f64 / GRID as f64).collect();
        let mut seeds: Vec<(f64, [f64; 6])> = Vec::with_capacity(GRID.pow(6));
        for idx in 0..GRID.pow(6) {
            let mut x = [0.0; 6];
            let mut m = idx;
            for xi in x.iter_mut() {
                *xi = vals[m % GRID];
                m /= GRID;
            }
            seeds.push((self.combination(&x), x));
        }
        let mut best = (f64::NEG_INFINITY, [0.0; 6]);
        for sign in [1.0, -1.0] {
            seeds.sort_by(|a, b| (sign * b.0).total_cmp(&(sign * a.0)));
            for &(_, x0) in seeds.iter().take(12) {
                let (v, x) = self.ascend(x0, sign);
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
        best
    }

    fn ascend(&self, mut x: [f64; 6], sign: f64) -> (f64, [f64; 6]) {
        let f = |x: &[f64; 6]| sign * self.combination(x);
        let mut cur = f(&x);
        for _ in 0..10_000 {
            for i in 0..6 {
                let mut y = x;
                y[i] = 0.0;
                let b0 = f(&y);
                y[i] = PI;
                let bpi = f(&y);
                y[i] = PI / 2.0;
                let bh = f(&y);
                let k = 0.5 * (b0 + bpi);
                x[i] = (bh - k).atan2(0.5 * (b0 - bpi));
            }
            let next = f(&x);
            if next - cur <= 1e-15 * next.abs().max(1.0) {
                cur = next.max(cur);
                break;
            }
            cur = next;
        }
        (cur, x)
    }
}

/// Parity-block spin correlations of |T⟩ (φ₂ = φ₃ = 0) by diagonal summation of the Fock series.
pub fn t_state_ps_coefficients(n2: f64, n3: f64) -> Result<[f64; 3]> {
    if !(n2 > 0.0 && n3 > 0.0) {
        return Err(Error::InvalidParameter(format!("need N2, N3 > 0, got ({n2}, {n3})")));
    }
    let n1 = n2 + n3;
    let (a, b) = (n2 / (1.0 + n1), n3 / (1.0 + n1));
    let (la, lb) = (a.ln(), b.ln());
    // blocks shrink roughly like (a + b)^{2m}; refuse early rather than grind through the budget
    let needed = SERIES_TOL.ln() / (2.0 * (a + b).ln());
    if needed > T_SERIES_MAX_BLOCKS as f64 {
        return Err(Error::NoConvergence(format!(
            "three-mode pseudospin series needs about {needed:.0} blocks at N1 = {n1}"
        )));
    }
    let mut sums = [0.0f64; 3];
    let mut prev = f64::INFINITY;
    for m in 0..T_SERIES_MAX_BLOCKS {
        let mut blk = [0.0f64; 3];
        for s in 0..=m {
            let t = m - s;
            let (s2, t2) = (2.0 * s as f64, 2.0 * t as f64);
            let base = s2 * la + t2 * lb - lgamma(s2 + 1.0) - lgamma(t2 + 1.0);
            let g1 = lgamma(s2 + t2 + 1.0);
            let q = s2 + t2 + 1.0;
            blk[0] += (base + lgamma(s2 + t2 + 2.0)).exp() / ((s2 + 1.0) * (t2 + 1.0)).sqrt();
            blk[1] += (base + g1).exp() * (q / (t2 + 1.0)).sqrt();
            blk[2] += (base + g1).exp() * (q / (s2 + 1.0)).sqrt();
        }
        for i in 0..3 {
            sums[i] += blk[i];
        }
        let big = blk.iter().cloned().fold(0.0, f64::max);
        let tot = sums.iter().cloned().fold(0.0, f64::max);
        if big <= SERIES_TOL * tot && big <= prev {
            let pre = 2.0 / (1.0 + n1);
            return Ok([-(a * b).sqrt() * pre * sums[0], b.sqrt() * pre * sums[1], a.sqrt() * pre * sums[2]]);
        }
        prev = big;
    }
    Err(Error::NoConvergence("three-mode pseudospin series".into()))
}

/// Sign-of-quadrature coefficients for V₃ (all equal), in the quarter-turned orientation.
pub fn v3_gkm_closed(r: f64) -> f64 {
    let arg = 4.0 * r.cosh() * r.sinh() / (3.0 * (2.0 + (4.0 * r).exp())).sqrt();
    -6.0 * arg.atan() / (PI * (5.0 + 4.0 * (4.0 * r).cosh()).sqrt())
}

/// Sign-of-quadrature coefficients of |T⟩ with N₂ = N₃ = N/4 and φ₂ = φ₃ = π.
pub fn t_gkm_closed(n: f64) -> [f64; 3] {
    let c1 = 2.0 * (n / (2.0 * (1.0 + n).sqrt())).atan() / (PI * (1.0 + n));
    let c2 = 2.0 * n.sqrt().atan() / (PI * (1.0 + 0.5 * n));
    [c1, c2, c2]
}

/// c_k = ⟨Π_z^k ⊗ Π_x ⊗ Π_x⟩ for a centered three-mode Gaussian: −π W_k(0) times the orthant
/// correlation of the two remaining q quadratures conditioned on mode k at the origin.
pub fn gkm_three_mode(state: &GaussianState) -> Result<[f64; 3]> {
    if state.n_modes != 3 || state.mean.iter().any(|&m| m != 0.0) {
        return Err(Error::InvalidParameter("needs a centered three-mode Gaussian state".into()));
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let idx = [2 * k, 2 * k + 1];
        let rest: Vec<usize> = (0..6).filter(|i| !idx.contains(i)).collect();
        let a = state.cov.select_rows(&idx).select_columns(&idx);
        let c = state.cov.select_rows(&rest).select_columns(&idx);
        let b = state.cov.select_rows(&rest).select_columns(&rest);
        let ainv = a.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
        let cond = &b - &c * ainv * c.transpose();
        let w0 = 1.0 / (2.0 * PI * a.determinant().sqrt());
        *o = -PI * w0 * 2.0 / PI * orthant_rho(&cond, 0, 2).asin();
    }
    Ok(out)
}
