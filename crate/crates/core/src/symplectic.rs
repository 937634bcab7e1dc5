//! Symplectic forms, orderings and the small dense linear algebra the rest of
//! the crate leans on.
//!
//! Storage convention: quadratures are interleaved (q1, p1, q2, p2, ...), the
//! vacuum covariance matrix is ½·I and [q, p] = i.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex64>;

/// Absolute max-norm tolerance for F Ω Fᵀ = Ω.
pub const SYMPLECTIC_TOL: f64 = 1e-10;
/// Relative tolerance used when pairing the ±d spectrum.
pub const PAIR_TOL: f64 = 1e-9;
/// States whose smallest symplectic eigenvalue sits below ½ − PHYSICAL_TOL are unphysical.
pub const PHYSICAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// Block diagonal, blocks [[0, 1], [-1, 0]], interleaved ordering.
    Omega,
    /// [[0, -I], [I, 0]], ordering (q1..qn, p1..pn).
    J,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    pub n_modes: usize,
    pub kind: FormKind,
    pub matrix: Mat,
}

pub fn omega_form(n: usize) -> SymplecticForm {
    let mut m = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    SymplecticForm { n_modes: n, kind: FormKind::Omega, matrix: m }
}

pub fn j_form(n: usize) -> SymplecticForm {
    let mut m = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        m[(k, n + k)] = -1.0;
        m[(n + k, k)] = 1.0;
    }
    SymplecticForm { n_modes: n, kind: FormKind::J, matrix: m }
}

/// Shorthand for the interleaved form matrix.
pub fn omega(n: usize) -> Mat {
    omega_form(n).matrix
}

/// Permutation taking interleaved ordering to block ordering: V = P σ Pᵀ and J = −P Ω Pᵀ.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingPermutation {
    pub n_modes: usize,
    pub matrix: Mat,
}

impl OrderingPermutation {
    pub fn new(n: usize) -> Self {
        let mut m = Mat::zeros(2 * n, 2 * n);
        for k in 0..n {
            m[(k, 2 * k)] = 1.0;
            m[(n + k, 2 * k + 1)] = 1.0;
        }
        Self { n_modes: n, matrix: m }
    }

    /// Interleaved covariance matrix to block ordering.
    pub fn to_block(&self, sigma: &Mat) -> Mat {
        &self.matrix * sigma * self.matrix.transpose()
    }

    /// Block ordering back to interleaved.
    pub fn to_interleaved(&self, v: &Mat) -> Mat {
        self.matrix.transpose() * v * &self.matrix
    }

    pub fn vec_to_interleaved(&self, v: &Vector) -> Vector {
        self.matrix.transpose() * v
    }
}

fn check_square_even(m: &Mat) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 || m.nrows() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "expected a square matrix of even size, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows() / 2)
}

pub fn is_symplectic(f: &Mat, tol: f64) -> Result<bool> {
    let n = check_square_even(f)?;
    Ok(symplectic_deviation(f, n) <= tol)
}

fn symplectic_deviation(f: &Mat, n: usize) -> f64 {
    let w = omega(n);
    (f * &w * f.transpose() - w).amax()
}

/// A real matrix verified to preserve Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    pub n_modes: usize,
    pub matrix: Mat,
}

impl SymplecticMatrix {
    pub fn new(matrix: Mat) -> Result<Self> {
        let n = check_square_even(&matrix)?;
        let dev = symplectic_deviation(&matrix, n);
        if dev > SYMPLECTIC_TOL {
            return Err(Error::NotSymplectic(dev));
        }
        // F Ω Fᵀ = Ω already forces det F = ±1; the sign is what we check
        let det = matrix.determinant();
        if (det - 1.0).abs() > 1e-8 * det.abs().max(1.0) {
            return Err(Error::NotSymplectic((det - 1.0).abs()));
        }
        Ok(Self { n_modes: n, matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { n_modes: n, matrix: Mat::identity(2 * n, 2 * n) }
    }

    /// F⁻¹ = Ω Fᵀ Ωᵀ.
    pub fn inverse(&self) -> Self {
        let w = omega(self.n_modes);
        Self { n_modes: self.n_modes, matrix: &w * self.matrix.transpose() * w.transpose() }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.n_modes != other.n_modes {
            return Err(Error::Dimension("mode counts differ".into()));
        }
        Ok(Self { n_modes: self.n_modes, matrix: &self.matrix * &other.matrix })
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        let n = self.n_modes + other.n_modes;
        let mut m = Mat::zeros(2 * n, 2 * n);
        let a = 2 * self.n_modes;
        m.view_mut((0, 0), (a, a)).copy_from(&self.matrix);
        m.view_mut((a, a), (2 * other.n_modes, 2 * other.n_modes)).copy_from(&other.matrix);
        Self { n_modes: n, matrix: m }
    }

    /// Lift an operation on `modes.len()` modes into an `n_total`-mode system, identity elsewhere.
    pub fn embed(&self, modes: &[usize], n_total: usize) -> Result<Self> {
        if modes.len() != self.n_modes {
            return Err(Error::Dimension(format!(
                "operation acts on {} modes but {} indices were given",
                self.n_modes,
                modes.len()
            )));
        }
        check_mode_set(modes, n_total)?;
        let mut m = Mat::identity(2 * n_total, 2 * n_total);
        for (i, &mi) in modes.iter().enumerate() {
            for (j, &mj) in modes.iter().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        m[(2 * mi + a, 2 * mj + b)] = self.matrix[(2 * i + a, 2 * j + b)];
                    }
                }
            }
        }
        Ok(Self { n_modes: n_total, matrix: m })
    }
}

pub(crate) fn check_mode_set(modes: &[usize], n: usize) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::InvalidParameter("empty mode set".into()));
    }
    for (i, &m) in modes.iter().enumerate() {
        if m >= n {
            return Err(Error::InvalidParameter(format!("mode index {m} out of range for {n} modes")));
        }
        if modes[..i].contains(&m) {
            return Err(Error::InvalidParameter(format!("mode index {m} repeated")));
        }
    }
    Ok(())
}

pub(crate) fn check_symmetric(sigma: &Mat) -> Result<()> {
    let scale = sigma.amax().max(1.0);
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Principal square root of a symmetric positive-definite matrix.
pub fn sqrtm_spd(sigma: &Mat) -> Result<Mat> {
    let eig = sigma.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| l <= 1e-14 * scale) {
        return Err(Error::NotPositiveDefinite);
    }
    let d = Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Symplectic eigenvalues with respect to the interleaved form, ascending.
pub fn symplectic_eigenvalues(sigma: &Mat) -> Result<Vec<f64>> {
    let n = check_square_even(sigma)?;
    symplectic_eigenvalues_in(sigma, &omega_form(n))
}

/// Symplectic eigenvalues with respect to an explicit form (Ω or J).
///
/// The moduli of the ±i·d spectrum of Ωσ are read off the Hermitian matrix
/// i·σ^½ Ω σ^½, which is similar to iΩσ and can be diagonalized stably.
pub fn symplectic_eigenvalues_in(sigma: &Mat, form: &SymplecticForm) -> Result<Vec<f64>> {
    let n = check_square_even(sigma)?;
    if form.n_modes != n {
        return Err(Error::Dimension("form and matrix sizes differ".into()));
    }
    check_symmetric(sigma)?;
    let sym = (sigma + sigma.transpose()) * 0.5;
    if sym.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let root = sqrtm_spd(&sym)?;
    let k = &root * &form.matrix * &root;
    let h: CMat = k.map(|x| Complex64::new(0.0, x));
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut out = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for i in 0..n {
        let lo = ev[i];
        let hi = ev[2 * n - 1 - i];
        worst = worst.max((lo + hi).abs());
        out.push(0.5 * (hi - lo));
    }
    if worst > PAIR_TOL * scale.max(1.0) {
        return Err(Error::UnpairedSpectrum(worst));
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// d∓ of a two-mode CM from its local invariants.
pub fn two_mode_symplectic_eigs_from_invariants(i1: f64, i2: f64, i3: f64, i4: f64) -> Result<(f64, f64)> {
    let delta = i1 + i2 + 2.0 * i3;
    let disc = delta * delta - 4.0 * i4;
    let tol = 1e-12 * (delta * delta).max(1.0);
    if disc < -tol {
        return Err(Error::InvalidParameter(format!("negative discriminant {disc:e}")));
    }
    let s = disc.max(0.0).sqrt();
    let minus = ((delta - s) / 2.0).max(0.0).sqrt();
    let plus = ((delta + s) / 2.0).sqrt();
    Ok((minus, plus))
}

/// Moore–Penrose pseudo-inverse; singular values below `tol` times the largest are dropped.
pub fn pseudo_inverse(m: &Mat, tol: f64) -> Mat {
    pinv_generic(m, tol)
}

pub fn pseudo_inverse_complex(m: &CMat, tol: f64) -> CMat {
    pinv_generic(m, tol)
}

fn pinv_generic<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: f64) -> DMatrix<T> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let cut = tol * smax;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut out = DMatrix::<T>::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            let col = vt.row(k).adjoint() * u.column(k).adjoint();
            out += col.map(|x| x.unscale(s));
        }
    }
    out
}

/// Smallest eigenvalue of σ + (i/2)Ω, non-negative exactly for bona fide CMs.
pub fn uncertainty_min_eigenvalue(sigma: &Mat) -> Result<f64> {
    let n = check_square_even(sigma)?;
    let w = omega(n);
    let h = CMat::from_fn(2 * n, 2 * n, |i, j| Complex64::new(sigma[(i, j)], 0.5 * w[(i, j)]));
    Ok(h.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |m, &x| m.min(x)))
}

/// Largest singular value.
pub fn operator_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |a, &b| a.max(b))
}
