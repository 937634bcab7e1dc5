//! Gaussian states: data model, families, transformations and scalar functionals.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{
    check_mode_set, check_symmetric, symplectic_eigenvalues, Mat, OrderingPermutation, SymplecticMatrix, Vector,
    PHYSICAL_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub n_modes: usize,
    /// Interleaved (q1, p1, ...) first moments.
    pub mean: Vector,
    pub cov: Mat,
}

impl GaussianState {
    /// Validated constructor: symmetric CM obeying the uncertainty relation.
    pub fn new(mean: Vector, cov: Mat) -> Result<Self> {
        let s = Self::from_parts(mean, cov)?;
        let d = s.min_symplectic_eigenvalue()?;
        if d < 0.5 - physical_tol(&s.cov) {
            return Err(Error::Unphysical(d));
        }
        Ok(s)
    }

    /// Shape checks only; used for partially transposed or otherwise non-physical matrices.
    pub fn from_parts(mean: Vector, cov: Mat) -> Result<Self> {
        let dim = cov.nrows();
        if cov.ncols() != dim || dim == 0 || dim % 2 != 0 || mean.len() != dim {
            return Err(Error::Dimension(format!(
                "mean of length {} with a {}x{} covariance matrix",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        check_symmetric(&cov)?;
        Ok(Self { n_modes: dim / 2, mean, cov })
    }

    pub fn centered(cov: Mat) -> Result<Self> {
        let n = cov.nrows();
        Self::new(Vector::zeros(n), cov)
    }

    pub fn vacuum(n: usize) -> Self {
        Self { n_modes: n, mean: Vector::zeros(2 * n), cov: Mat::identity(2 * n, 2 * n) * 0.5 }
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&self.cov)
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        Ok(self.symplectic_eigenvalues()?[0])
    }

    pub fn is_physical(&self) -> bool {
        matches!(self.min_symplectic_eigenvalue(), Ok(d) if d >= 0.5 - physical_tol(&self.cov))
    }

    /// 2×2 block (i, j) of the covariance matrix.
    pub fn block(&self, i: usize, j: usize) -> Mat {
        self.cov.view((2 * i, 2 * j), (2, 2)).into_owned()
    }

    pub fn to_json(&self) -> StateJson {
        StateJson {
            n_modes: self.n_modes,
            ordering: ORDERING_TAG.to_string(),
            convention: Convention::default(),
            mean: self.mean.iter().copied().collect(),
            cov: (0..self.cov.nrows()).map(|i| self.cov.row(i).iter().copied().collect()).collect(),
        }
    }

    pub fn from_json(j: &StateJson) -> Result<Self> {
        if j.ordering != ORDERING_TAG {
            return Err(Error::InvalidParameter(format!("unsupported ordering '{}'", j.ordering)));
        }
        if j.convention != Convention::default() {
            return Err(Error::InvalidParameter("only hbar = 1, vacuum variance 0.5 is supported".into()));
        }
        let dim = 2 * j.n_modes;
        if j.cov.len() != dim || j.cov.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("cov does not match n_modes".into()));
        }
        let cov = Mat::from_fn(dim, dim, |r, c| j.cov[r][c]);
        Self::new(Vector::from_vec(j.mean.clone()), cov)
    }
}

/// Physicality slack: absolute at unit scale, relative for large matrices.
pub(crate) fn physical_tol(cov: &Mat) -> f64 {
    PHYSICAL_TOL * cov.amax().max(1.0)
}

const ORDERING_TAG: &str = "qp-interleaved";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convention {
    pub hbar: f64,
    pub vacuum_variance: f64,
}

impl Default for Convention {
    fn default() -> Self {
        Self { hbar: 1.0, vacuum_variance: 0.5 }
    }
}

/// On-disk representation of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub n_modes: usize,
    pub ordering: String,
    pub convention: Convention,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// State families. Complex amplitudes are (re, im) pairs with α = (q + ip)/√2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFamilySpec {
    Vacuum {
        n: usize,
    },
    Thermal {
        n: Vec<f64>,
    },
    Coherent {
        alpha: Vec<(f64, f64)>,
    },
    SqueezedVacuum {
        r: f64,
        phi: f64,
    },
    DisplacedSqueezedThermal {
        alpha: (f64, f64),
        r: f64,
        phi: f64,
        n: f64,
    },
    Twb {
        r: f64,
    },
    TwoModeSqueezedThermal {
        r: f64,
        n1: f64,
        n2: f64,
    },
    TriV3 {
        r: f64,
    },
    TriT {
        n2: f64,
        n3: f64,
        phi2: f64,
        phi3: f64,
        n_thermal: f64,
    },
    /// Entangled coherent state; carries no covariance matrix.
    Ecs {
        gamma: f64,
    },
}

fn nonneg(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::InvalidParameter(format!("{name} must be finite and non-negative, got {x}")));
    }
    Ok(())
}

fn finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {x}")));
    }
    Ok(())
}

fn amplitude_to_mean(a: (f64, f64)) -> [f64; 2] {
    [a.0 * std::f64::consts::SQRT_2, a.1 * std::f64::consts::SQRT_2]
}

pub fn build(spec: &StateFamilySpec) -> Result<GaussianState> {
    use StateFamilySpec::*;
    match spec {
        Vacuum { n } => {
            if *n == 0 {
                return Err(Error::InvalidParameter("mode count must be positive".into()));
            }
            Ok(GaussianState::vacuum(*n))
        }
        Thermal { n } => {
            if n.is_empty() {
                return Err(Error::InvalidParameter("need at least one mode".into()));
            }
            let mut diag = Vec::with_capacity(2 * n.len());
            for &nk in n {
                nonneg("thermal photon number", nk)?;
                diag.extend([nk + 0.5, nk + 0.5]);
            }
            GaussianState::centered(Mat::from_diagonal(&Vector::from_vec(diag)))
        }
        Coherent { alpha } => {
            if alpha.is_empty() {
                return Err(Error::InvalidParameter("need at least one amplitude".into()));
            }
            let mut s = GaussianState::vacuum(alpha.len());
            for (k, &a) in alpha.iter().enumerate() {
                finite("amplitude", a.0)?;
                finite("amplitude", a.1)?;
                let m = amplitude_to_mean(a);
                s.mean[2 * k] = m[0];
                s.mean[2 * k + 1] = m[1];
            }
            Ok(s)
        }
        SqueezedVacuum { r, phi } => build(&DisplacedSqueezedThermal { alpha: (0.0, 0.0), r: *r, phi: *phi, n: 0.0 }),
        DisplacedSqueezedThermal { alpha, r, phi, n } => {
            finite("r", *r)?;
            finite("phi", *phi)?;
            nonneg("n", *n)?;
            let s = squeezer_matrix(*r, *phi);
            let cov = (&s.matrix * s.matrix.transpose()) * (n + 0.5);
            let m = amplitude_to_mean(*alpha);
            GaussianState::new(Vector::from_vec(m.to_vec()), cov)
        }
        Twb { r } => build(&TwoModeSqueezedThermal { r: *r, n1: 0.0, n2: 0.0 }),
        TwoModeSqueezedThermal { r, n1, n2 } => {
            finite("r", *r)?;
            nonneg("n1", *n1)?;
            nonneg("n2", *n2)?;
            let th = build(&Thermal { n: vec![*n1, *n2] })?;
            apply_symplectic(&th, &two_mode_squeezer_matrix(*r, 0.0), None)
        }
        TriV3 { r } => {
            finite("r", *r)?;
            GaussianState::centered(v3_block(*r))
        }
        TriT { n2, n3, phi2, phi3, n_thermal } => {
            nonneg("n2", *n2)?;
            nonneg("n3", *n3)?;
            nonneg("n_thermal", *n_thermal)?;
            finite("phi2", *phi2)?;
            finite("phi3", *phi3)?;
            GaussianState::centered(t_block(*n2, *n3, *phi2, *phi3) * (2.0 * n_thermal + 1.0))
        }
        Ecs { .. } => Err(Error::NonGaussian),
    }
}

/// Tritter state written in block ordering (q1 q2 q3 p1 p2 p3), returned interleaved.
fn v3_block(r: f64) -> Mat {
    let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let rp = c + s / 3.0;
    let rm = c - s / 3.0;
    let sv = -2.0 / 3.0 * s;
    let mut v = Mat::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            v[(i, j)] = if i == j { rp } else { sv };
            v[(3 + i, 3 + j)] = if i == j { rm } else { -sv };
        }
    }
    OrderingPermutation::new(3).to_interleaved(&(v * 0.5))
}

/// Pure state of the two interlinked parametric processes, block ordering in the source.
fn t_block(n2: f64, n3: f64, phi2: f64, phi3: f64) -> Mat {
    let n1 = n2 + n3;
    let f = [n1 + 0.5, n2 + 0.5, n3 + 0.5];
    let g2 = (n2 * (1.0 + n1)).sqrt();
    let g3 = (n3 * (1.0 + n1)).sqrt();
    let (a2, b2) = (g2 * phi2.cos(), g2 * phi2.sin());
    let (a3, b3) = (g3 * phi3.cos(), g3 * phi3.sin());
    let g23 = (n2 * n3).sqrt();
    let (c, d) = (g23 * (phi2 - phi3).cos(), g23 * (phi2 - phi3).sin());
    #[rustfmt::skip]
    let v = Mat::from_row_slice(6, 6, &[
        f[0], a2,   a3,   0.0, -b2,  -b3,
        a2,   f[1], c,   -b2,   0.0,  d,
        a3,   c,    f[2], -b3, -d,    0.0,
        0.0, -b2,  -b3,   f[0], -a2, -a3,
        -b2,  0.0, -d,   -a2,   f[1], c,
        -b3,  d,    0.0, -a3,   c,    f[2],
    ]);
    OrderingPermutation::new(3).to_interleaved(&v)
}

/// Mixing of two modes: B = [[cos φ, e^{iθ} sin φ], [−e^{−iθ} sin φ, cos φ]] in real form.
pub fn beam_splitter_matrix(phi: f64, theta: f64) -> SymplecticMatrix {
    let b = [
        [Complex64::new(phi.cos(), 0.0), Complex64::from_polar(phi.sin(), theta)],
        [-Complex64::from_polar(phi.sin(), -theta), Complex64::new(phi.cos(), 0.0)],
    ];
    let mut nb = Mat::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            nb[(i, j)] = b[i][j].re;
            nb[(i, j + 2)] = -b[i][j].im;
            nb[(i + 2, j)] = b[i][j].im;
            nb[(i + 2, j + 2)] = b[i][j].re;
        }
    }
    let m = OrderingPermutation::new(2).to_interleaved(&nb);
    SymplecticMatrix { n_modes: 2, matrix: m }
}

fn reflection(psi: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[psi.cos(), psi.sin(), psi.sin(), -psi.cos()])
}

/// Single-mode squeezer cosh r·I + sinh r·R(ψ). At ψ = 0 the vacuum goes to ½·diag(e^{2r}, e^{−2r}).
pub fn squeezer_matrix(r: f64, psi: f64) -> SymplecticMatrix {
    let m = Mat::identity(2, 2) * r.cosh() + reflection(psi) * r.sinh();
    SymplecticMatrix { n_modes: 1, matrix: m }
}

pub fn two_mode_squeezer_matrix(r: f64, psi: f64) -> SymplecticMatrix {
    let mut m = Mat::identity(4, 4) * r.cosh();
    let rr = reflection(psi) * r.sinh();
    m.view_mut((0, 2), (2, 2)).copy_from(&rr);
    m.view_mut((2, 0), (2, 2)).copy_from(&rr);
    SymplecticMatrix { n_modes: 2, matrix: m }
}

/// Phase-space rotation by θ (free evolution a → a e^{−iθ}).
pub fn phase_rotation_matrix(theta: f64) -> SymplecticMatrix {
    let (c, s) = (theta.cos(), theta.sin());
    SymplecticMatrix { n_modes: 1, matrix: Mat::from_row_slice(2, 2, &[c, s, -s, c]) }
}

/// mean → F·mean + d, cov → F·cov·Fᵀ.
pub fn apply_symplectic(state: &GaussianState, f: &SymplecticMatrix, d: Option<&Vector>) -> Result<GaussianState> {
    if f.n_modes != state.n_modes {
        return Err(Error::Dimension(format!(
            "{}-mode transformation applied to a {}-mode state",
            f.n_modes, state.n_modes
        )));
    }
    SymplecticMatrix::new(f.matrix.clone())?;
    let mut mean = &f.matrix * &state.mean;
    if let Some(d) = d {
        if d.len() != mean.len() {
            return Err(Error::Dimension("displacement length".into()));
        }
        mean += d;
    }
    let cov = &f.matrix * &state.cov * f.matrix.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState { n_modes: state.n_modes, mean, cov })
}

/// Apply a k-mode transformation on the listed modes.
pub fn apply_on_modes(state: &GaussianState, f: &SymplecticMatrix, modes: &[usize]) -> Result<GaussianState> {
    let full = f.embed(modes, state.n_modes)?;
    apply_symplectic(state, &full, None)
}

/// Marginal on the listed modes (0-based, in the given order).
pub fn partial_trace(state: &GaussianState, keep: &[usize]) -> Result<GaussianState> {
    check_mode_set(keep, state.n_modes)?;
    let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let k = idx.len();
    let cov = Mat::from_fn(k, k, |i, j| state.cov[(idx[i], idx[j])]);
    let mean = Vector::from_fn(k, |i, _| state.mean[idx[i]]);
    Ok(GaussianState { n_modes: keep.len(), mean, cov })
}

/// μ = 1 / (2ⁿ √det σ).
pub fn purity(state: &GaussianState) -> f64 {
    let det = state.cov.determinant();
    1.0 / (2f64.powi(state.n_modes as i32) * det.sqrt())
}

fn entropy_term(d: f64) -> f64 {
    let lo = d - 0.5;
    let hi = d + 0.5;
    let a = hi * hi.ln();
    if lo <= 1e-14 {
        a
    } else {
        a - lo * lo.ln()
    }
}

pub fn von_neumann_entropy(state: &GaussianState) -> Result<f64> {
    Ok(state.symplectic_eigenvalues()?.into_iter().map(entropy_term).sum::<f64>().max(0.0))
}

pub fn mean_photon_number(state: &GaussianState) -> f64 {
    let tr = state.cov.trace() + state.mean.norm_squared();
    0.5 * tr - 0.5 * state.n_modes as f64
}

/// τ = max((1 − 2u)/2, 0) with u the smallest eigenvalue of σ.
pub fn nonclassical_depth(state: &GaussianState) -> f64 {
    let u = state.cov.clone().symmetric_eigen().eigenvalues.min();
    ((1.0 - 2.0 * u) / 2.0).max(0.0)
}

/// Wigner function in real coordinates, normalized to one over ℝ^{2n}.
pub fn wigner_at(state: &GaussianState, x: &Vector) -> Result<f64> {
    gaussian_density(&state.cov, &state.mean, x)
}

pub(crate) fn gaussian_density(cov: &Mat, mean: &Vector, x: &Vector) -> Result<f64> {
    if x.len() != mean.len() {
        return Err(Error::Dimension("point length".into()));
    }
    let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let d = x - mean;
    let q = d.dot(&chol.solve(&d));
    let det = chol.determinant();
    let n = mean.len() / 2;
    Ok((-0.5 * q).exp() / ((2.0 * PI).powi(n as i32) * det.sqrt()))
}

/// χ(ξ) = ∫ W(X) e^{iξ·X} dX = exp(−½ ξᵀσξ + i ξ·X̄).
pub fn characteristic_at(state: &GaussianState, xi: &Vector) -> Result<Complex64> {
    if xi.len() != state.mean.len() {
        return Err(Error::Dimension("point length".into()));
    }
    let q = xi.dot(&(&state.cov * xi));
    Ok(Complex64::from_polar((-0.5 * q).exp(), xi.dot(&state.mean)))
}
