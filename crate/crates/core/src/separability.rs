//! Separability criteria for Gaussian states: phase-space partial transposition,
//! Simon's invariant inequality, Duan's normal form, Giedke's nonlinear map,
//! logarithmic negativity and the three-mode classification.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{physical_tol, GaussianState};
use crate::symplectic::{
    check_mode_set, omega, operator_norm, pseudo_inverse_complex, sqrtm_spd, symplectic_eigenvalues,
    uncertainty_min_eigenvalue, CMat, Mat, Vector,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalInvariants {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
}

impl LocalInvariants {
    pub fn of(state: &GaussianState) -> Result<Self> {
        require_modes(state, 2)?;
        Ok(Self {
            i1: state.block(0, 0).determinant(),
            i2: state.block(1, 1).determinant(),
            i3: state.block(0, 1).determinant(),
            i4: state.cov.determinant(),
        })
    }
}

fn require_modes(state: &GaussianState, n: usize) -> Result<()> {
    if state.n_modes != n {
        return Err(Error::Dimension(format!("expected {n} modes, got {}", state.n_modes)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "PPT")]
    Ppt,
    Simon,
    Duan,
    Giedke,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityVerdict {
    pub criterion: Criterion,
    /// `None` when the criterion could not decide.
    pub separable: Option<bool>,
    pub min_pt_symplectic_eig: f64,
    pub negativity: f64,
    pub iterations: Option<usize>,
    /// Whether the verdict is conclusive in both directions for this partition.
    #[serde(skip)]
    pub necessary_and_sufficient: bool,
    /// Set when Duan's construction degenerated and the PPT verdict was reported instead.
    #[serde(skip)]
    pub fallback: bool,
}

/// Two groups of modes; party `b` is the one that gets transposed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Bipartition {
    /// First mode against the remaining ones.
    pub fn first_vs_rest(n: usize) -> Self {
        Self { a: vec![0], b: (1..n).collect() }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let all: Vec<usize> = self.a.iter().chain(&self.b).copied().collect();
        check_mode_set(&self.a, n)?;
        check_mode_set(&self.b, n)?;
        check_mode_set(&all, n)?;
        if all.len() != n {
            return Err(Error::InvalidParameter("partition must cover every mode".into()));
        }
        Ok(())
    }
}

/// Mirror reflection p → −p on the listed modes.
pub fn partial_transpose(state: &GaussianState, modes: &[usize]) -> Result<GaussianState> {
    check_mode_set(modes, state.n_modes)?;
    let mut delta = Vector::repeat(2 * state.n_modes, 1.0);
    for &m in modes {
        delta[2 * m + 1] = -1.0;
    }
    let d = Mat::from_diagonal(&delta);
    let cov = &d * &state.cov * &d;
    let mean = state.mean.component_mul(&delta);
    GaussianState::from_parts(mean, cov)
}

pub fn min_pt_symplectic_eig(state: &GaussianState, modes: &[usize]) -> Result<f64> {
    Ok(symplectic_eigenvalues(&partial_transpose(state, modes)?.cov)?[0])
}

/// E_N = max(0, −ln 2d̃) with d̃ the smallest symplectic eigenvalue after transposing `modes`.
pub fn log_negativity_of(state: &GaussianState, modes: &[usize]) -> Result<f64> {
    let d = min_pt_symplectic_eig(state, modes)?;
    Ok(negativity_from_eig(d))
}

fn negativity_from_eig(d: f64) -> f64 {
    (-(2.0 * d).ln()).max(0.0)
}

/// Two-mode logarithmic negativity.
pub fn log_negativity(state: &GaussianState) -> Result<f64> {
    require_modes(state, 2)?;
    log_negativity_of(state, &[1])
}

pub fn ppt_check(state: &GaussianState, partition: &Bipartition) -> Result<SeparabilityVerdict> {
    partition.validate(state.n_modes)?;
    let d = min_pt_symplectic_eig(state, &partition.b)?;
    Ok(SeparabilityVerdict {
        criterion: Criterion::Ppt,
        separable: Some(d >= 0.5 - physical_tol(&state.cov)),
        min_pt_symplectic_eig: d,
        negativity: negativity_from_eig(d),
        iterations: None,
        necessary_and_sufficient: partition.a.len() == 1 || partition.b.len() == 1,
        fallback: false,
    })
}

/// I1 + I2 + 2|I3| ≤ 4·I4 + ¼.
pub fn simon_invariant_check(state: &GaussianState) -> Result<bool> {
    let inv = LocalInvariants::of(state)?;
    let lhs = inv.i1 + inv.i2 + 2.0 * inv.i3.abs();
    let rhs = 4.0 * inv.i4 + 0.25;
    Ok(lhs <= rhs + 1e-12 * rhs.abs().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuanOutcome {
    pub separable: bool,
    /// True when the normal form could not be built and the PPT verdict was used.
    pub fallback: bool,
    /// ⟨Δu²⟩ + ⟨Δv²⟩ for the optimal EPR-like pair.
    pub lhs: f64,
    /// a0² + a0⁻².
    pub rhs: f64,
    pub a0: f64,
}

/// 2×2 rotation with the same column space as `u` and determinant +1, plus the sign absorbed.
fn proper_rotation(mut u: Mat) -> (Mat, f64) {
    if u.determinant() < 0.0 {
        for i in 0..2 {
            u[(i, 1)] = -u[(i, 1)];
        }
        (u, -1.0)
    } else {
        (u, 1.0)
    }
}

/// Standard form (a, b, c1, c2) reached with local symplectic operations.
pub fn standard_form(state: &GaussianState) -> Result<(f64, f64, f64, f64)> {
    require_modes(state, 2)?;
    let a_blk = state.block(0, 0);
    let b_blk = state.block(1, 1);
    let c_blk = state.block(0, 1);
    let a = a_blk.determinant().sqrt();
    let b = b_blk.determinant().sqrt();
    let sa = sqrtm_spd(&a_blk)?.try_inverse().ok_or(Error::NotPositiveDefinite)? * a.sqrt();
    let sb = sqrtm_spd(&b_blk)?.try_inverse().ok_or(Error::NotPositiveDefinite)? * b.sqrt();
    let cp = &sa * c_blk * sb.transpose();
    let svd = cp.svd(true, true);
    let (_, su) = proper_rotation(svd.u.expect("u"));
    let (_, sv) = proper_rotation(svd.v_t.expect("v_t").transpose());
    let c1 = svd.singular_values[0];
    let c2 = svd.singular_values[1] * su * sv;
    Ok((a, b, c1, c2))
}

/// Duan's sufficient-and-necessary test for two-mode Gaussian states via the normal form.
pub fn duan_check(state: &GaussianState) -> Result<DuanOutcome> {
    let (a, b, c1, c2) = standard_form(state)?;
    let fallback = || -> Result<DuanOutcome> {
        let v = ppt_check(state, &Bipartition { a: vec![0], b: vec![1] })?;
        Ok(DuanOutcome {
            separable: v.separable == Some(true),
            fallback: true,
            lhs: f64::NAN,
            rhs: f64::NAN,
            a0: f64::NAN,
        })
    };
    let eps = 1e-9;
    if a - 0.5 < eps || b - 0.5 < eps || (c1 * c2).abs() < 1e-12 * (a * b) {
        return fallback();
    }
    // second local squeeze chosen so that (a1 − ½)/(b1 − ½) = (a2 − ½)/(b2 − ½)
    let r2_of = |r1: f64| {
        let x = a * r1 - 0.5;
        let y = a / r1 - 0.5;
        let h = (x - y) / 2.0;
        (-h + (h * h + 4.0 * x * y * b * b).sqrt()) / (2.0 * y * b)
    };
    let params = |r1: f64| {
        let r2 = r2_of(r1);
        let (a1, a2, b1, b2) = (a * r1, a / r1, b * r2, b / r2);
        let s = (r1 * r2).sqrt();
        (a1, a2, b1, b2, c1 * s, c2 / s)
    };
    let g = |r1: f64| {
        let (a1, a2, b1, b2, d1, d2) = params(r1);
        d1.abs() - d2.abs() - (((a1 - 0.5) * (b1 - 0.5)).sqrt() - ((a2 - 0.5) * (b2 - 0.5)).sqrt())
    };
    let lo = (1.0 / (2.0 * a)).ln();
    let hi = (2.0 * a).ln();
    let steps = 400;
    let grid: Vec<f64> = (1..steps).map(|k| (lo + (hi - lo) * k as f64 / steps as f64).exp()).collect();
    let mut bracket = None;
    let mut prev = (grid[0], g(grid[0]));
    if prev.1 == 0.0 {
        bracket = Some((prev.0, prev.0));
    }
    for &x in &grid[1..] {
        if bracket.is_some() {
            break;
        }
        let gx = g(x);
        if gx.is_finite() && prev.1.is_finite() && (gx == 0.0 || gx.signum() != prev.1.signum()) {
            bracket = Some((prev.0, x));
        }
        prev = (x, gx);
    }
    let Some((mut l, mut h)) = bracket else {
        return fallback();
    };
    let mut gl = g(l);
    for _ in 0..200 {
        if (h - l) <= 1e-15 * h {
            break;
        }
        let m = 0.5 * (l + h);
        let gm = g(m);
        if gm == 0.0 {
            l = m;
            h = m;
            break;
        }
        if gm.signum() == gl.signum() {
            l = m;
            gl = gm;
        } else {
            h = m;
        }
    }
    let (a1, a2, b1, b2, d1, d2) = params(0.5 * (l + h));
    let a0sq = ((b1 - 0.5) / (a1 - 0.5)).sqrt();
    let du = a0sq * a1 + b1 / a0sq - 2.0 * d1.abs();
    let dv = a0sq * a2 + b2 / a0sq - 2.0 * d2.abs();
    let lhs = du + dv;
    let rhs = a0sq + 1.0 / a0sq;
    Ok(DuanOutcome { separable: lhs >= rhs * (1.0 - 1e-10), fallback: false, lhs, rhs, a0: a0sq.sqrt() })
}

pub fn duan_verdict(state: &GaussianState) -> Result<SeparabilityVerdict> {
    let out = duan_check(state)?;
    let d = min_pt_symplectic_eig(state, &[1])?;
    Ok(SeparabilityVerdict {
        criterion: Criterion::Duan,
        separable: Some(out.separable),
        min_pt_symplectic_eig: d,
        negativity: negativity_from_eig(d),
        iterations: None,
        necessary_and_sufficient: true,
        fallback: out.fallback,
    })
}

pub fn simon_verdict(state: &GaussianState) -> Result<SeparabilityVerdict> {
    let sep = simon_invariant_check(state)?;
    let d = min_pt_symplectic_eig(state, &[1])?;
    Ok(SeparabilityVerdict {
        criterion: Criterion::Simon,
        separable: Some(sep),
        min_pt_symplectic_eig: d,
        negativity: negativity_from_eig(d),
        iterations: None,
        necessary_and_sufficient: true,
        fallback: false,
    })
}

pub const GIEDKE_MAX_ITER: usize = 200;

fn is_cm(a: &Mat, tol: f64) -> bool {
    matches!(uncertainty_min_eigenvalue(a), Ok(l) if l >= -tol)
}

/// Iterate the nonlinear map until one of the two termination rules fires.
pub fn giedke_iterate(state: &GaussianState, partition: &Bipartition, max_iter: usize) -> Result<SeparabilityVerdict> {
    partition.validate(state.n_modes)?;
    let ia: Vec<usize> = partition.a.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let ib: Vec<usize> = partition.b.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let pick = |r: &[usize], c: &[usize]| Mat::from_fn(r.len(), c.len(), |i, j| state.cov[(r[i], c[j])]);
    let mut a = pick(&ia, &ia);
    let mut b = pick(&ib, &ib);
    let mut c = pick(&ia, &ib);
    let scale = state.cov.amax().max(1.0);
    let tol = 1e-11 * scale;
    let d_pt = min_pt_symplectic_eig(state, &partition.b)?;
    let verdict = |sep: Option<bool>, k: usize| SeparabilityVerdict {
        criterion: Criterion::Giedke,
        separable: sep,
        min_pt_symplectic_eig: d_pt,
        negativity: negativity_from_eig(d_pt),
        iterations: Some(k),
        necessary_and_sufficient: true,
        fallback: false,
    };
    for k in 1..=max_iter {
        let wb = omega(b.nrows() / 2);
        let hb = CMat::from_fn(b.nrows(), b.ncols(), |i, j| Complex64::new(b[(i, j)], 0.5 * wb[(i, j)]));
        let inv = pseudo_inverse_complex(&hb, 1e-13);
        let cc = c.map(|x| Complex64::new(x, 0.0));
        let d = &cc * inv * cc.transpose();
        let next_a = &a - d.map(|z| z.re);
        let next_a = (&next_a + next_a.transpose()) * 0.5;
        let next_c = -d.map(|z| z.im);
        a = next_a;
        b = a.clone();
        c = next_c;
        if !a.iter().chain(c.iter()).all(|x| x.is_finite()) {
            return Ok(verdict(None, k));
        }
        if !is_cm(&a, tol) {
            return Ok(verdict(Some(false), k));
        }
        let shifted = &a - Mat::identity(a.nrows(), a.ncols()) * operator_norm(&c);
        if is_cm(&shifted, tol) {
            return Ok(verdict(Some(true), k));
        }
    }
    Ok(verdict(None, max_iter))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
    C,
}

impl Mode {
    fn from_index(i: usize) -> Self {
        [Mode::A, Mode::B, Mode::C][i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripartiteLabel {
    /// Every single-mode transposition is unphysical.
    FullyInseparable,
    /// The named mode factorizes from the other two.
    OneModeBiseparable(Mode),
    /// Only the cut separating the named mode from the rest is entangled.
    TwoModeBiseparable(Mode),
    Class4or5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripartiteClass {
    pub label: TripartiteLabel,
    /// Smallest symplectic eigenvalue after transposing mode A, B, C.
    pub pt_eigs: [f64; 3],
}

pub fn tripartite_classify(state: &GaussianState) -> Result<TripartiteClass> {
    require_modes(state, 3)?;
    let tol = physical_tol(&state.cov);
    let mut eigs = [0.0; 3];
    for (k, e) in eigs.iter_mut().enumerate() {
        *e = min_pt_symplectic_eig(state, &[k])?;
    }
    let bad: Vec<usize> = (0..3).filter(|&k| eigs[k] < 0.5 - tol).collect();
    let label = match bad.len() {
        3 => TripartiteLabel::FullyInseparable,
        2 => {
            let ok = (0..3).find(|k| !bad.contains(k)).expect("one physical");
            TripartiteLabel::OneModeBiseparable(Mode::from_index(ok))
        }
        1 => TripartiteLabel::TwoModeBiseparable(Mode::from_index(bad[0])),
        _ => TripartiteLabel::Class4or5,
    };
    Ok(TripartiteClass { label, pt_eigs: eigs })
}

/// Smallest eigenvalue of σ̃ + (i/2)Ω where σ̃ is σ transposed on `modes`.
pub fn pt_uncertainty_min_eigenvalue(state: &GaussianState, modes: &[usize]) -> Result<f64> {
    uncertainty_min_eigenvalue(&partial_transpose(state, modes)?.cov)
}

/// Closed form of the tritter state's transposed spectrum, on the scale where vacuum has unit variance.
pub fn v3_min_pt_eigenvalue(r: f64) -> f64 {
    let c = (2.0 * r).cosh();
    let arg = (3.0 + 3.0 * (4.0 * r).cosh() + 8.0 * 2f64.sqrt() * (2.0 * r).sinh()) / 6.0;
    c - arg.sqrt()
}

/// Whether mode k of the thermal-seeded T state separates from the others.
pub fn t_state_mode_threshold(n_k: f64, n_thermal: f64) -> bool {
    n_thermal > n_k + (n_k * (n_k + 1.0)).sqrt()
}
