//! Signed Gaussian mixtures: Wigner functions of de-Gaussified twin beams.

use std::f64::consts::PI;

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::states::{build, GaussianState, StateFamilySpec};
use crate::symplectic::{Mat, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub cov: Mat,
    pub mean: Vector,
    precision: Mat,
    /// (2π)^n √det σ
    norm: f64,
}

impl MixtureComponent {
    pub fn precision(&self) -> &Mat {
        &self.precision
    }

    fn density(&self, x: &Vector) -> f64 {
        let d = x - &self.mean;
        (-0.5 * d.dot(&(&self.precision * &d))).exp() / self.norm
    }
}

/// W(X) = Σ_k w_k G(X; X̄_k, σ_k) with signed weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub n_modes: usize,
    pub components: Vec<MixtureComponent>,
    /// Sum of the raw weights before rescaling (a conditioning probability for IPS and TWBA).
    pub normalization: f64,
}

impl GaussianMixture {
    /// Takes raw (weight, cov, mean) triples and rescales the weights to unit sum.
    pub fn new(raw: Vec<(f64, Mat, Vector)>) -> Result<Self> {
        let dim = raw.first().map(|c| c.1.nrows()).ok_or_else(|| Error::Dimension("empty mixture".into()))?;
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Dimension(format!("phase-space dimension {dim}")));
        }
        let total: f64 = raw.iter().map(|c| c.0).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}")));
        }
        let n = dim / 2;
        let mut components = Vec::with_capacity(raw.len());
        for (w, cov, mean) in raw {
            if cov.nrows() != dim || cov.ncols() != dim || mean.len() != dim {
                return Err(Error::Dimension("mixture components differ in size".into()));
            }
            crate::symplectic::check_symmetric(&cov)?;
            let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
            let precision = chol.inverse();
            let precision = (&precision + precision.transpose()) * 0.5;
            let norm = (2.0 * PI).powi(n as i32) * chol.determinant().sqrt();
            components.push(MixtureComponent { weight: w / total, cov, mean, precision, norm });
        }
        Ok(Self { n_modes: n, components, normalization: total })
    }

    pub fn wigner(&self, x: &Vector) -> Result<f64> {
        if x.len() != 2 * self.n_modes {
            return Err(Error::Dimension(format!("point of length {} for {} modes", x.len(), self.n_modes)));
        }
        Ok(self.components.iter().map(|c| c.weight * c.density(x)).sum())
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn is_centered(&self) -> bool {
        self.components.iter().all(|c| c.mean.iter().all(|&m| m == 0.0))
    }
}

/// Anything with a Wigner function in real coordinates.
pub trait WignerFunction: Sync {
    fn n_modes(&self) -> usize;
    fn wigner(&self, x: &Vector) -> Result<f64>;
}

impl WignerFunction for GaussianMixture {
    fn n_modes(&self) -> usize {
        self.n_modes
    }
    fn wigner(&self, x: &Vector) -> Result<f64> {
        GaussianMixture::wigner(self, x)
    }
}

impl TryFrom<&GaussianState> for GaussianMixture {
    type Error = Error;
    fn try_from(s: &GaussianState) -> Result<Self> {
        GaussianMixture::new(vec![(1.0, s.cov.clone(), s.mean.clone())])
    }
}

/// Closed-form coefficients of one IPS component, in the paper's variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpsCoefficients {
    pub x: f64,
    pub y: f64,
    pub c: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub n: f64,
    /// 𝒞_k = 4C_k/(x_k y_k − 4B²(1 − τ)²)
    pub cc: f64,
    /// P = b − f, Q = b − g, R = 2Bτ + h
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// 𝒜_k = PQ − R²
    pub a: f64,
}

/// The four table entries for a twin beam with λ = tanh r after inconclusive subtraction at τ.
pub fn ips_coefficients(lambda: f64, tau: f64) -> Result<[IpsCoefficients; 4]> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("twin-beam parameter must lie in [0, 1), got {lambda}")));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau_eff must lie in [0, 1], got {tau}")));
    }
    let r = lambda.atanh();
    let (ca, cb) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let a = 2.0 * (ca * (1.0 - tau) + tau);
    let b = 2.0 * (ca * tau + 1.0 - tau);
    let table = [(a, a, 1.0), (a + 2.0, a, -2.0), (a, a + 2.0, -2.0), (a + 2.0, a + 2.0, 4.0)];
    let u = 1.0 - tau;
    let one_m = 1.0 - ca;
    Ok(table.map(|(x, y, c)| {
        let den = x * y - 4.0 * cb * cb * u * u;
        let n = 4.0 * tau * u / den;
        let f = n * (x * cb * cb + 4.0 * cb * cb * one_m * u + y * one_m * one_m);
        let g = n * (x * one_m * one_m + 4.0 * cb * cb * one_m * u + y * cb * cb);
        let h = n * ((x + y) * cb * one_m + 2.0 * cb * (cb * cb + one_m * one_m) * u);
        let (p, q, rr) = (b - f, b - g, 2.0 * cb * tau + h);
        IpsCoefficients { x, y, c, f, g, h, n, cc: 4.0 * c / den, p, q, r: rr, a: p * q - rr * rr }
    }))
}

/// Precision matrix of one IPS component, interleaved ordering (q_a, p_a, q_b, p_b).
fn ips_precision(k: &IpsCoefficients) -> Mat {
    let (p, q, r) = (k.p, k.q, k.r);
    Mat::from_row_slice(4, 4, &[p, 0.0, -r, 0.0, 0.0, p, 0.0, r, -r, 0.0, q, 0.0, 0.0, r, 0.0, q])
}

/// Wigner function of the photon-subtracted twin beam; `normalization` is the double-click probability p₁₁.
pub fn ips_wigner(lambda: f64, tau_eff: f64) -> Result<GaussianMixture> {
    let coeffs = ips_coefficients(lambda, tau_eff)?;
    let raw: Vec<f64> = coeffs.iter().map(|k| 4.0 * k.cc / k.a).collect();
    let p11: f64 = raw.iter().sum();
    let scale: f64 = raw.iter().map(|w| w.abs()).sum();
    if !(p11 > 1e-14 * scale) {
        return Err(Error::InvalidParameter(format!(
            "no photon can be subtracted at lambda = {lambda}, tau_eff = {tau_eff} (p11 = {p11:e})"
        )));
    }
    let comps = coeffs
        .iter()
        .zip(&raw)
        .map(|(k, &w)| {
            let cov = ips_precision(k).try_inverse().ok_or(Error::NotPositiveDefinite)?;
            Ok((w, (&cov + cov.transpose()) * 0.5, Vector::zeros(4)))
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianMixture::new(comps)
}

/// Click probability on the third mode of |T⟩ with an on/off detector of efficiency η.
pub fn twba_click_probability(n3: f64, eta: f64) -> f64 {
    eta * n3 / (1.0 + eta * n3)
}

/// Twin beam with added photons: |T⟩ conditioned on a click at its third mode.
/// `normalization` is the click probability P₁.
pub fn twba_wigner(n1: f64, n2: f64, n3: f64, eta: f64) -> Result<GaussianMixture> {
    if !(n2 >= 0.0 && n3 >= 0.0) || (n1 - n2 - n3).abs() > 1e-12 * (1.0 + n1.abs()) {
        return Err(Error::InvalidParameter(format!("need N1 = N2 + N3 >= 0, got ({n1}, {n2}, {n3})")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("detector efficiency must lie in (0, 1], got {eta}")));
    }
    if !(eta * n3 > 0.0) {
        return Err(Error::InvalidParameter("the third mode is empty: a click never happens".into()));
    }
    let t = build(&StateFamilySpec::TriT { n2, n3, phi2: 0.0, phi3: 0.0, n_thermal: 0.0 })?;
    let v = &t.cov;
    let keep = v.view((0, 0), (4, 4)).into_owned();
    let cross = v.view((0, 4), (4, 2)).into_owned();
    let no_click = v.view((4, 4), (2, 2)).into_owned() + Mat::identity(2, 2) * ((2.0 - eta) / (2.0 * eta));
    let p0 = 1.0 / (eta * no_click.determinant().sqrt());
    let inv = no_click.try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let cond = &keep - &cross * inv * cross.transpose();
    let cond = (&cond + cond.transpose()) * 0.5;
    GaussianMixture::new(vec![(1.0, keep, Vector::zeros(4)), (-p0, cond, Vector::zeros(4))])
}

/// a/b in double-double; the `Div` impl of `TwoFloat` is only good to f64 precision.
fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    TwoFloat::new_add(q1, q2) + r.hi() / b.hi()
}

/// exp in double-double; `TwoFloat::exp` is only good to ~1e-14 relative.
fn dd_exp(x: TwoFloat) -> TwoFloat {
    const LN2: (f64, f64) = (std::f64::consts::LN_2, 2.319_046_813_846_299_6e-17);
    let xh = f64::from(x);
    if xh < -745.0 {
        return TwoFloat::from(0.0);
    }
    let k = (xh / LN2.0).round();
    let ln2 = TwoFloat::new_add(LN2.0, LN2.1);
    // |r| ≤ ln2/2, scaled down by 2^-10 so twelve Taylor terms suffice
    let r = (x - ln2 * k) / 1024.0;
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for n in 1..=12 {
        term = term * r / n as f64;
        sum += term;
    }
    for _ in 0..10 {
        sum = sum * sum;
    }
    sum * 2f64.powi(k as i32)
}

/// IPS Wigner function evaluated in double-double arithmetic.
///
/// Close to τ_eff = 1 the four components are nearly equal and their signed sum loses about
/// log₁₀(Σ|w_k|/p₁₁) digits; the f64 mixture becomes useless there while this stays accurate.
/// Uses π²W = Σ 𝒞_k exp(−½ X·M_k X)/p₁₁, with det M_k = 𝒜_k².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpsPrecise {
    pub lambda: f64,
    pub tau_eff: f64,
    coeffs: [[TwoFloat; 4]; 4],
    p11: TwoFloat,
}

impl IpsPrecise {
    pub fn new(lambda: f64, tau_eff: f64) -> Result<Self> {
        ips_coefficients(lambda, tau_eff)?;
        let one = TwoFloat::from(1.0);
        let l = TwoFloat::from(lambda);
        let l2 = l * l;
        let ca = dd_div(one + l2, one - l2);
        let cb = dd_div(l * 2.0, one - l2);
        let tau = TwoFloat::from(tau_eff);
        let u = one - tau;
        let a = (ca * u + tau) * 2.0;
        let b = (ca * tau + u) * 2.0;
        let one_m = one - ca;
        let two = TwoFloat::from(2.0);
        let table = [(a, a, 1.0), (a + two, a, -2.0), (a, a + two, -2.0), (a + two, a + two, 4.0)];
        let mut coeffs = [[TwoFloat::from(0.0); 4]; 4];
        let mut p11 = TwoFloat::from(0.0);
        let mut scale = 0.0;
        for (row, (x, y, c)) in coeffs.iter_mut().zip(table) {
            let den = x * y - cb * cb * u * u * 4.0;
            let n = dd_div(tau * u * 4.0, den);
            let f = n * (x * cb * cb + cb * cb * one_m * u * 4.0 + y * one_m * one_m);
            let g = n * (x * one_m * one_m + cb * cb * one_m * u * 4.0 + y * cb * cb);
            let h = n * ((x + y) * cb * one_m + cb * (cb * cb + one_m * one_m) * u * 2.0);
            let (p, q, r) = (b - f, b - g, cb * tau * 2.0 + h);
            let cc = dd_div(TwoFloat::from(4.0 * c), den);
            let w = dd_div(cc * 4.0, p * q - r * r);
            p11 += w;
            scale += f64::from(w).abs();
            *row = [cc, p, q, r];
        }
        // double-double keeps roughly 32 digits
        if !(f64::from(p11) > 1e-26 * scale) {
            return Err(Error::InvalidParameter(format!(
                "no photon can be subtracted at lambda = {lambda}, tau_eff = {tau_eff}"
            )));
        }
        Ok(Self { lambda, tau_eff, coeffs, p11 })
    }

    pub fn p11(&self) -> f64 {
        self.p11.into()
    }

    /// π²W(X), the displaced-parity correlation at X.
    pub fn parity_at(&self, x: &[f64; 4]) -> f64 {
        let [qa, pa, qb, pb] = x.map(TwoFloat::from);
        let na = qa * qa + pa * pa;
        let nb = qb * qb + pb * pb;
        let cross = qa * qb - pa * pb;
        let mut s = TwoFloat::from(0.0);
        for [cc, p, q, r] in self.coeffs {
            let quad = p * na + q * nb - r * cross * 2.0;
            s += cc * dd_exp(quad * -0.5);
        }
        dd_div(s, self.p11).into()
    }
}

impl WignerFunction for IpsPrecise {
    fn n_modes(&self) -> usize {
        2
    }
    fn wigner(&self, x: &Vector) -> Result<f64> {
        if x.len() != 4 {
            return Err(Error::Dimension(format!("point of length {} for 2 modes", x.len())));
        }
        Ok(self.parity_at(&[x[0], x[1], x[2], x[3]]) / (PI * PI))
    }
}
