//! Teleportation, telecloning and conditional state engineering on twin beams.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channels::{twb_noisy_sigmas, BathPhysicalParams};
use crate::error::{Error, Result};
use crate::symplectic::Mat;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("twin-beam parameter must lie in [0, 1), got {lambda}")));
    }
    Ok(())
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// λ = tanh r.
pub fn lambda_from_r(r: f64) -> f64 {
    r.tanh()
}

pub fn r_from_lambda(lambda: f64) -> f64 {
    lambda.atanh()
}

/// Average photon number of the twin beam, N_λ = 2λ²/(1 − λ²).
pub fn twb_photons(lambda: f64) -> f64 {
    2.0 * lambda * lambda / (1.0 - lambda * lambda)
}

/// Coherent-state teleportation through an ideal twin beam: (1 + λ)/2.
pub fn teleport_fidelity_ideal(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok((1.0 + lambda) / 2.0)
}

/// Best classical measure-and-prepare fidelity for coherent inputs drawn from
/// p(β) = (Ω/π)e^{−Ω|β|²}; Ω → 0 is the flat prior.
pub fn classical_fidelity_limit(omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::InvalidParameter(format!("prior concentration must be non-negative, got {omega}")));
    }
    if omega.is_infinite() {
        return Ok(1.0);
    }
    Ok((1.0 + omega) / (2.0 + omega))
}

/// Bath acting on both halves of the twin beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedBath {
    pub gamma: f64,
    pub params: BathPhysicalParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TeleportInput {
    Coherent,
    Squeezed { xi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleportationSetup {
    pub twb_r: f64,
    pub bath: Option<SharedBath>,
    /// Efficiency of the joint measurement.
    pub eta: f64,
    pub input: TeleportInput,
}

impl TeleportationSetup {
    pub fn ideal(r: f64) -> Self {
        Self { twb_r: r, bath: None, eta: 1.0, input: TeleportInput::Coherent }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.twb_r >= 0.0 && self.twb_r.is_finite()) {
            return Err(Error::InvalidParameter("twin-beam squeezing must be non-negative".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("efficiency must lie in (0, 1], got {}", self.eta)));
        }
        if let Some(b) = self.bath {
            if !(b.gamma >= 0.0 && b.params.n_th >= 0.0 && b.params.n_s >= 0.0) {
                return Err(Error::InvalidParameter("bath parameters must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Σ₂², Σ₃² of the shared state at time t (vacuum variance ¼).
    fn sigma23(&self, t: f64) -> (f64, f64) {
        let (gt, n, m) = match self.bath {
            Some(b) => {
                let (n, m) = b.params.to_nm();
                (b.gamma * t, n, m)
            }
            None => (0.0, 0.0, 0.0),
        };
        let s = twb_noisy_sigmas(self.twb_r, gt, n, m);
        (s[1], s[2])
    }

    fn d_eta(&self) -> f64 {
        (1.0 - self.eta) / self.eta
    }
}

/// Diagonal added-noise matrix of the teleportation channel, Diag(4Σ₃² + D², 4Σ₂² + D²).
pub fn teleportation_cp_map_sigma(setup: &TeleportationSetup, t: f64) -> Result<Mat> {
    setup.validate()?;
    let (s2, s3) = setup.sigma23(t);
    let d = setup.d_eta();
    Ok(Mat::from_diagonal(&crate::symplectic::Vector::from_vec(vec![4.0 * s3 + d, 4.0 * s2 + d])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyFidelity {
    /// Fidelity for the input named in the setup.
    pub fidelity: f64,
    /// Fidelity of the best squeezed input.
    pub optimal: f64,
    pub xi_max: f64,
}

pub fn teleport_fidelity_noisy(setup: &TeleportationSetup, t: f64) -> Result<NoisyFidelity> {
    let sig = teleportation_cp_map_sigma(setup, t)?;
    let (a3, a2) = (sig[(0, 0)], sig[(1, 1)]);
    let xi = match setup.input {
        TeleportInput::Coherent => 0.0,
        TeleportInput::Squeezed { xi } => xi,
    };
    let f = |xi: f64| 1.0 / (((2.0 * xi).exp() + a2) * ((-2.0 * xi).exp() + a3)).sqrt();
    Ok(NoisyFidelity { fidelity: f(xi), optimal: 1.0 / (1.0 + (a2 * a3).sqrt()), xi_max: 0.25 * (a2 / a3).ln() })
}

/// τ_eff = 1 − η(1 − τ).
pub fn ips_effective_transmissivity(tau: f64, eta_onoff: f64) -> Result<f64> {
    check_unit("tau", tau)?;
    check_unit("eta", eta_onoff)?;
    Ok(1.0 - eta_onoff * (1.0 - tau))
}

/// Coherent-state fidelity with the photon-subtracted twin beam as resource.
pub fn ips_teleport_fidelity(lambda: f64, tau_eff: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_unit("tau_eff", tau_eff)?;
    let (l, t) = (lambda, tau_eff);
    let num = (1.0 + l) * (1.0 + l * t) * (1.0 - l * l * t) * (2.0 - 2.0 * l * t + l * l * t);
    let den = (1.0 + l * l * t) * (1.0 + (1.0 - t) * l) * (2.0 - (2.0 + (1.0 - t) * l) * l * t);
    Ok(0.5 * num / den)
}

/// Symmetric 1→2 telecloning through the T state with N₂ = N₃ = N.
pub fn teleclone_symmetric_fidelity(n: f64) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(Error::InvalidParameter("photon number must be non-negative".into()));
    }
    Ok(1.0 / (2.0 + 3.0 * n - 2.0 * (n * (2.0 * n + 1.0)).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneReport {
    pub fidelities: [f64; 2],
    pub symmetric: bool,
    pub n2: f64,
    pub n3: f64,
}

/// F_h = [2 + 2N_h + N_k − 2√(N_h(N₁ + 1))]⁻¹ for the two clones, from unit-gain
/// teleportation through the TWB of N₁ photons followed by a split with transmissivity N_h/N₁.
pub fn teleclone_asymmetric_fidelities(n2: f64, n3: f64) -> Result<CloneReport> {
    if !(n2 >= 0.0 && n3 >= 0.0) {
        return Err(Error::InvalidParameter("photon numbers must be non-negative".into()));
    }
    let n1 = n2 + n3;
    let f = |nh: f64, nk: f64| 1.0 / (2.0 + 2.0 * nh + nk - 2.0 * (nh * (n1 + 1.0)).sqrt());
    Ok(CloneReport { fidelities: [f(n2, n3), f(n3, n2)], symmetric: n2 == n3, n2, n3 })
}

/// Photon numbers maximizing F₂ at fixed F₃: N₂ = 1/F₃ − 1, N₃ = (4/F₃ − 4)⁻¹.
pub fn optimal_asymmetric_family(f3: f64) -> Result<(f64, f64)> {
    if !(f3 > 0.0 && f3 < 1.0) {
        return Err(Error::InvalidParameter(format!("target fidelity must lie in (0, 1), got {f3}")));
    }
    Ok((1.0 / f3 - 1.0, 1.0 / (4.0 / f3 - 4.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnOffConditional {
    pub p_click: f64,
    /// W(0) normalized over real quadratures (vacuum gives 1/π).
    pub wigner_origin: f64,
    pub fano: f64,
}

/// Conditional state of one beam after a click of an on/off detector on the other.
pub fn onoff_conditional(lambda: f64, eta: f64) -> Result<OnOffConditional> {
    check_lambda(lambda)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    let n = twb_photons(lambda);
    let en = eta * n;
    let p_click = en / (2.0 + en);
    let w0 = -(1.0 / PI) / (1.0 + n) * (2.0 + en) / (2.0 * (1.0 + n) - en);
    let fano = (2.0 + n) / 2.0 * (1.0 + 2.0 / (2.0 + en) - 4.0 * (2.0 + n) / (4.0 + n * (4.0 + en)));
    Ok(OnOffConditional { p_click, wigner_origin: w0, fano })
}

/// s-ordered quasiprobability of the clicked state at the origin, same normalization as above.
pub fn onoff_conditional_ws_origin(lambda: f64, eta: f64, s: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(s > -1.0 && s <= 0.0) {
        return Err(Error::InvalidParameter(format!("ordering parameter must lie in (-1, 0], got {s}")));
    }
    let n = twb_photons(lambda);
    let en = eta * n;
    let d = 1.0 + n - s;
    Ok(-(1.0 + s) * (2.0 + en) / (PI * d * (2.0 * d - en * (1.0 + s))))
}

/// Homodyne-conditioned beam. Quadratures follow x = (a + a†)/2, so the vacuum variance is ¼.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneConditional {
    pub var_x: f64,
    pub var_y: f64,
    pub n_th: f64,
    pub alpha: f64,
    pub xi: f64,
    /// Probability density of the (binned) outcome.
    pub p_density: f64,
    /// Outcomes with |x| below this value keep sub-vacuum variance. At second order in the
    /// bin width the variance does not depend on x, so this is either infinite or zero.
    pub x_delta: f64,
}

pub fn homodyne_conditional(lambda: f64, eta: f64, x: f64, bin_width: f64) -> Result<HomodyneConditional> {
    check_lambda(lambda)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    if !(bin_width >= 0.0) {
        return Err(Error::InvalidParameter("bin width must be non-negative".into()));
    }
    let n = twb_photons(lambda);
    let en = eta * n;
    let var_x0 = 0.25 * (1.0 + n * (1.0 - eta)) / (1.0 + en);
    let var_y = 0.25 * (1.0 + n);
    let d = bin_width;
    // mixing the conditional states over the bin spreads their means α_t = c·t; to second
    // order in δ this adds c²δ²/12 whatever the outcome x
    let var_x = var_x0 + d * d / 12.0 * eta * eta * n * (2.0 + n) / (1.0 + en).powi(2);
    let n_th = 0.5 * (((1.0 + n) * (1.0 + n * (1.0 - eta)) / (1.0 + en)).sqrt() - 1.0);
    let alpha = eta * (n * (n + 2.0)).sqrt() / (1.0 + en) * x;
    let xi = 0.25 * ((1.0 + n) * (1.0 + en) / (1.0 + n * (1.0 - eta))).ln();
    let var_tot = 0.25 * (1.0 + n) + (1.0 - eta) / (4.0 * eta);
    let p_density = if d == 0.0 {
        (-x * x / (2.0 * var_tot)).exp() / (2.0 * PI * var_tot).sqrt()
    } else {
        let s = (2.0 * var_tot).sqrt();
        (libm::erf((x + 0.5 * d) / s) - libm::erf((x - 0.5 * d) / s)) / (2.0 * d)
    };
    let x_delta = if var_x < 0.25 { f64::INFINITY } else { 0.0 };
    Ok(HomodyneConditional { var_x, var_y, n_th, alpha, xi, p_density, x_delta })
}

/// Mean photon number of the conditional state for ideal detection.
pub fn homodyne_conditional_photons(lambda: f64, x: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let n = twb_photons(lambda);
    Ok(x * x * n * (2.0 + n) / (1.0 + n).powi(2) + 0.25 * n * n / (1.0 + n))
}
