use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_qubits, Matrix, PureState};
use crate::error::Result;

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex64> {
    (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect()
}

/// Haar-distributed pure state on `n_qubits`: a normalized vector of i.i.d.
/// standard complex Gaussians.
pub fn haar_sample<R: Rng + ?Sized>(n_qubits: u32, rng: &mut R) -> Result<PureState> {
    check_qubits(n_qubits)?;
    PureState::normalized(n_qubits, gaussian_vector(1 << n_qubits, rng))
}

/// `count` orthonormal vectors spanning a Haar-random subspace (modified
/// Gram–Schmidt on Gaussian vectors; redraws the rare dependent vector).
pub(crate) fn orthonormal_frame<R: Rng + ?Sized>(
    dim: usize,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<Complex64>> {
    let mut frame: Vec<Vec<Complex64>> = Vec::with_capacity(count);
    while frame.len() < count {
        let mut v = gaussian_vector(dim, rng);
        for _pass in 0..2 {
            for u in &frame {
                let overlap: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= overlap * ui;
                }
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        frame.push(v.into_iter().map(|z| z / norm).collect());
    }
    frame
}

/// Haar-random unitary on `n_qubits`; its columns are an orthonormal frame.
pub fn haar_unitary<R: Rng + ?Sized>(n_qubits: u32, rng: &mut R) -> Result<Matrix> {
    check_qubits(n_qubits)?;
    let dim = 1usize << n_qubits;
    let cols = orthonormal_frame(dim, dim, rng);
    Ok(Matrix::from_fn(dim, |i, j| cols[j][i]))
}
