//! Hermitian eigensolver (cyclic complex Jacobi).
//!
//! Each rotation zeroes one off-diagonal pair `(p, q)` with a unitary
//! `J = diag-phase · Givens`, accumulated into the eigenvector matrix.
//! Jacobi converges quadratically once the off-diagonal mass is small and
//! delivers eigenvalues with absolute error on the order of `ε·‖A‖_F`.

use num_complex::Complex64;

use super::matrix::Matrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order and the matching unit eigenvectors.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
}

impl Eigen {
    pub fn max(&self) -> (f64, &[Complex64]) {
        let last = self.values.len() - 1;
        (self.values[last], &self.vectors[last])
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }
}

/// Full eigendecomposition of a Hermitian matrix. Only the Hermitian part of
/// `a` is used; callers validate hermiticity.
pub fn eigh(a: &Matrix) -> Eigen {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);

    if !m.is_diagonal() {
        let scale: f64 = m.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let target = (f64::EPSILON * scale).powi(2);
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_sq(&m) <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = m.diag_real();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]).then(i.cmp(&j)));
    Eigen {
        values: order.iter().map(|&i| diag[i]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|r| v.get(r, k)).collect())
            .collect(),
    }
}

fn off_diagonal_sq(m: &Matrix) -> f64 {
    let n = m.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m.get(i, j).norm_sqr();
            }
        }
    }
    s
}

fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = m.get(p, q);
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = m.get(p, p).re;
    let aqq = m.get(q, q).re;
    // Phase that makes the (p, q) entry real and positive, then a real Givens
    // rotation with tan θ = t.
    let phase = apq / mag;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // J restricted to (p, q): [[c, s], [-s·conj(phase), c·conj(phase)]]
    let jpp = Complex64::new(c, 0.0);
    let jpq = Complex64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    let n = m.dim();
    // A ← A·J (columns p, q)
    for r in 0..n {
        let ap = m.get(r, p);
        let aq = m.get(r, q);
        m.set(r, p, ap * jpp + aq * jqp);
        m.set(r, q, ap * jpq + aq * jqq);
    }
    // A ← J†·A (rows p, q)
    for col in 0..n {
        let ap = m.get(p, col);
        let aq = m.get(q, col);
        m.set(p, col, jpp.conj() * ap + jqp.conj() * aq);
        m.set(q, col, jpq.conj() * ap + jqq.conj() * aq);
    }
    m.set(p, q, Complex64::new(0.0, 0.0));
    m.set(q, p, Complex64::new(0.0, 0.0));
    let dp = m.get(p, p).re;
    let dq = m.get(q, q).re;
    m.set(p, p, Complex64::new(dp, 0.0));
    m.set(q, q, Complex64::new(dq, 0.0));

    for r in 0..n {
        let vp = v.get(r, p);
        let vq = v.get(r, q);
        v.set(r, p, vp * jpp + vq * jqp);
        v.set(r, q, vp * jpq + vq * jqq);
    }
}
