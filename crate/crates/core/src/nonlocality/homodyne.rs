//! Binned homodyne Bell test: sign of one rotated quadrature per mode.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::mixture::GaussianMixture;
use crate::error::{Error, Result};
use crate::symplectic::{Mat, Vector};

/// Measurement directions (cos θ, sin θ) on mode 1 and (cos φ, sin φ) on mode 2.
fn directions(theta: f64, phi: f64) -> (Vector, Vector) {
    let u = Vector::from_vec(vec![theta.cos(), theta.sin(), 0.0, 0.0]);
    let v = Vector::from_vec(vec![0.0, 0.0, phi.cos(), phi.sin()]);
    (u, v)
}

/// Detector inefficiency adds (1 − η)/(2η) of vacuum-like noise to each rescaled quadrature.
fn smear(cov: &Mat, eta_h: f64) -> Mat {
    cov + Mat::identity(cov.nrows(), cov.ncols()) * ((1.0 - eta_h) / (2.0 * eta_h))
}

fn check(state: &GaussianMixture, eta_h: f64) -> Result<()> {
    if state.n_modes != 2 {
        return Err(Error::Dimension("homodyne test needs two modes".into()));
    }
    if !(eta_h > 0.0 && eta_h <= 1.0) {
        return Err(Error::InvalidParameter(format!("homodyne efficiency must lie in (0, 1], got {eta_h}")));
    }
    Ok(())
}

/// E(θ, φ) = Σ_k w_k (2/π) arcsin ρ_k, ρ_k the correlation of the two measured quadratures
/// in component k (orthant law for centered Gaussians).
pub fn homodyne_correlation(state: &GaussianMixture, theta: f64, phi: f64, eta_h: f64) -> Result<f64> {
    check(state, eta_h)?;
    if !state.is_centered() {
        return Err(Error::InvalidParameter("orthant law needs centered components".into()));
    }
    let (u, v) = directions(theta, phi);
    let mut e = 0.0;
    for c in &state.components {
        let s = smear(&c.cov, eta_h);
        let (su, sv) = (&s * &u, &s * &v);
        let (uu, vv, uv) = (u.dot(&su), v.dot(&sv), u.dot(&sv));
        if !(uu > 0.0 && vv > 0.0) {
            return Err(Error::InvalidParameter("singular marginal covariance".into()));
        }
        e += c.weight * 2.0 / PI * (uv / (uu * vv).sqrt()).clamp(-1.0, 1.0).asin();
    }
    Ok(e)
}

/// B₂ = E(θ₁,φ₁) + E(θ₁,φ₂) + E(θ₂,φ₁) − E(θ₂,φ₂) with angles (θ₁, θ₂, φ₁, φ₂).
pub fn homodyne_bell2(state: &GaussianMixture, angles: [f64; 4], eta_h: f64) -> Result<f64> {
    let [t1, t2, p1, p2] = angles;
    let e = |t, p| homodyne_correlation(state, t, p, eta_h);
    Ok(e(t1, p1)? + e(t1, p2)? + e(t2, p1)? - e(t2, p2)?)
}

/// Monte Carlo estimate of E(θ, φ) and its standard error. Every draw z ~ N(0, I) is pushed
/// through all components (common random numbers), X_k = X̄_k + L_k z with L_k L_kᵀ = σ_k, and
/// contributes Σ_k w_k sgn(x_θ x_φ); detector noise is sampled on the measured values.
pub fn homodyne_correlation_mc(
    state: &GaussianMixture,
    theta: f64,
    phi: f64,
    eta_h: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check(state, eta_h)?;
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let (u, v) = directions(theta, phi);
    let chols = state
        .components
        .iter()
        .map(|c| c.cov.clone().cholesky().map(|ch| ch.l()).ok_or(Error::NotPositiveDefinite))
        .collect::<Result<Vec<_>>>()?;
    let noise = ((1.0 - eta_h) / (2.0 * eta_h)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let z = Vector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (n1, n2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let mut val = 0.0;
        for (c, l) in state.components.iter().zip(&chols) {
            let x = &c.mean + l * &z;
            let xt = u.dot(&x) + noise * n1;
            let xp = v.dot(&x) + noise * n2;
            val += c.weight * (xt * xp).signum();
        }
        sum += val;
        sum2 += val * val;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    Ok((mean, (var / (n - 1.0)).sqrt()))
}
