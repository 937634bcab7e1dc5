//! Seeded generators of random symplectic maps and physical states, shared by
//! the property and acceptance suites.

use rand::Rng;

use crate::states::{beam_splitter_matrix, phase_rotation_matrix, squeezer_matrix, GaussianState};
use crate::symplectic::{Mat, SymplecticMatrix, Vector};

/// Product of local rotations/squeezers and beam splitters on every pair of modes.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, n: usize, max_r: f64) -> SymplecticMatrix {
    let mut f = Mat::identity(2 * n, 2 * n);
    let local = |rng: &mut R, f: &mut Mat| {
        for k in 0..n {
            let rot = phase_rotation_matrix(rng.random_range(0.0..std::f64::consts::TAU));
            let sq = squeezer_matrix(rng.random_range(-max_r..=max_r), rng.random_range(0.0..std::f64::consts::TAU));
            let m = &sq.matrix * &rot.matrix;
            let op = SymplecticMatrix { n_modes: 1, matrix: m }.embed(&[k], n).expect("valid mode");
            *f = &op.matrix * &*f;
        }
    };
    local(rng, &mut f);
    for i in 0..n {
        for j in (i + 1)..n {
            let bs = beam_splitter_matrix(
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            let op = bs.embed(&[i, j], n).expect("valid modes");
            f = &op.matrix * &f;
        }
    }
    local(rng, &mut f);
    SymplecticMatrix { n_modes: n, matrix: f }
}

/// Symplectic image of a product thermal state, optionally displaced.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, n: usize, max_n: f64, max_r: f64, max_disp: f64) -> GaussianState {
    let diag: Vec<f64> = (0..n)
        .flat_map(|_| {
            let nu = 0.5 + rng.random_range(0.0..=max_n);
            [nu, nu]
        })
        .collect();
    let th = Mat::from_diagonal(&Vector::from_vec(diag));
    let s = random_symplectic(rng, n, max_r);
    let cov = &s.matrix * th * s.matrix.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let mean = if max_disp > 0.0 {
        Vector::from_fn(2 * n, |_, _| rng.random_range(-max_disp..=max_disp))
    } else {
        Vector::zeros(2 * n)
    };
    GaussianState { n_modes: n, mean, cov }
}
