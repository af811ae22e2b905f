//! Dense linear algebra over n-qubit spaces.
//!
//! [`PureState`], [`HermitianOp`], [`DensityMatrix`] and [`Projector`] are
//! validated at construction and immutable afterwards. Exactness is replaced
//! by fixed tolerances: [`EPS_NORM`], [`EPS_HERM`] and [`EPS_IDEM`].

pub mod codec;
mod haar;
mod matrix;
mod rng;
mod spectral;

pub use haar::{haar_sample, haar_unitary};
pub use matrix::Matrix;
pub use rng::SeedStream;
pub use spectral::{eigh, Eigen};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub const EPS_NORM: f64 = 1e-9;
pub const EPS_HERM: f64 = 1e-9;
pub const EPS_IDEM: f64 = 1e-8;
pub const EPS_PSD: f64 = 1e-9;
pub const EPS_TRACE: f64 = 1e-9;
pub const EPS_RANK: f64 = 1e-6;
pub const MAX_QUBITS: u32 = 12;

pub(crate) fn check_qubits(n_qubits: u32) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "qubit count {n_qubits} outside [1, {MAX_QUBITS}]"
        )))
    }
}

pub(crate) fn check_same_qubits(a: u32, b: u32) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "dimension mismatch: {a} vs {b} qubits"
        )))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_qubits: u32,
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn new(n_qubits: u32, amps: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return Err(Error::Dimension(format!(
                "{} amplitudes for {n_qubits} qubits",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > EPS_NORM {
            return Err(Error::contract(format!("state norm² {norm} is not 1")));
        }
        Ok(PureState { n_qubits, amps })
    }

    /// Normalizes `v`; fails on a (numerically) zero vector.
    pub fn normalized(n_qubits: u32, v: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 1e-300 {
            return Err(Error::contract("cannot normalize a zero vector"));
        }
        PureState::new(n_qubits, v.into_iter().map(|a| a / norm).collect())
    }

    pub fn basis(n_qubits: u32, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Dimension(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(PureState { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `scale · |ψ⟩⟨ψ|`.
    pub fn outer(&self, scale: f64) -> Matrix {
        Matrix::outer(&self.amps, scale)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            op: HermitianOp {
                n_qubits: self.n_qubits,
                m: self.outer(1.0),
            },
        }
    }
}

/// Anything with an expectation value `Tr(ρ A)`.
pub trait QuantumState {
    fn n_qubits(&self) -> u32;
    fn expect(&self, op: &Matrix) -> f64;
}

impl QuantumState for PureState {
    fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    fn expect(&self, op: &Matrix) -> f64 {
        op.quad_form(&self.amps).re
    }
}

impl QuantumState for DensityMatrix {
    fn n_qubits(&self) -> u32 {
        self.op.n_qubits
    }

    fn expect(&self, op: &Matrix) -> f64 {
        self.op.m.trace_product(op).re
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOp {
    n_qubits: u32,
    m: Matrix,
}

impl HermitianOp {
    pub fn new(n_qubits: u32, m: Matrix) -> Result<Self> {
        check_qubits(n_qubits)?;
        if m.dim() != 1 << n_qubits {
            return Err(Error::Dimension(format!(
                "{0}x{0} matrix for {n_qubits} qubits",
                m.dim()
            )));
        }
        let defect = m.hermitian_defect();
        if defect > EPS_HERM {
            return Err(Error::contract(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(HermitianOp { n_qubits, m })
    }

    pub(crate) fn new_unchecked(n_qubits: u32, m: Matrix) -> Self {
        HermitianOp { n_qubits, m }
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn eigh(&self) -> Eigen {
        eigh(&self.m)
    }

    pub fn max_norm(&self) -> f64 {
        self.m.max_norm()
    }
}

/// Largest eigenvalue of a PSD operator and a unit eigenvector for it.
pub fn lambda_max_psd(h: &HermitianOp) -> Result<(f64, PureState)> {
    let e = h.eigh();
    let scale = h.max_norm().max(1.0);
    if e.min() < -1e-8 * scale {
        return Err(Error::contract(format!(
            "operator is not positive semidefinite (λ_min = {:e})",
            e.min()
        )));
    }
    let (value, vec) = e.max();
    Ok((value, PureState::normalized(h.n_qubits, vec.to_vec())?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOp,
}

impl DensityMatrix {
    pub fn new(op: HermitianOp) -> Result<Self> {
        let tr = op.m.trace();
        if (tr.re - 1.0).abs() > EPS_TRACE || tr.im.abs() > EPS_TRACE {
            return Err(Error::contract(format!("density trace {tr} is not 1")));
        }
        let min = if op.m.is_diagonal() {
            op.m.diag_real().into_iter().fold(f64::INFINITY, f64::min)
        } else {
            op.eigh().min()
        };
        if min < -EPS_PSD {
            return Err(Error::contract(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(DensityMatrix { op })
    }

    pub fn from_matrix(n_qubits: u32, m: Matrix) -> Result<Self> {
        DensityMatrix::new(HermitianOp::new(n_qubits, m)?)
    }

    pub fn maximally_mixed(n_qubits: u32) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        DensityMatrix::diagonal(n_qubits, &vec![1.0 / dim as f64; dim])
    }

    pub fn diagonal(n_qubits: u32, probs: &[f64]) -> Result<Self> {
        DensityMatrix::from_matrix(n_qubits, Matrix::from_diag(probs))
    }

    pub fn op(&self) -> &HermitianOp {
        &self.op
    }

    pub fn matrix(&self) -> &Matrix {
        &self.op.m
    }

    pub fn n_qubits(&self) -> u32 {
        self.op.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> Vec<f64> {
        if self.op.m.is_diagonal() {
            let mut d = self.op.m.diag_real();
            d.sort_by(f64::total_cmp);
            d
        } else {
            self.op.eigh().values
        }
    }
}

/// k-fold tensor power `σ^{⊗k}`.
pub fn tensor_power(sigma: &DensityMatrix, k: u32) -> Result<DensityMatrix> {
    if k == 0 {
        return Err(Error::domain("tensor power needs k >= 1"));
    }
    let n_total = sigma.n_qubits() as u64 * k as u64;
    if n_total > MAX_QUBITS as u64 {
        return Err(Error::Resource(format!(
            "σ^⊗{k} needs {n_total} qubits (cap {MAX_QUBITS})"
        )));
    }
    let mut acc = sigma.matrix().clone();
    for _ in 1..k {
        acc = acc.kron(sigma.matrix());
    }
    // Tensor products of PSD trace-one operators stay PSD trace-one.
    Ok(DensityMatrix {
        op: HermitianOp::new_unchecked(n_total as u32, acc),
    })
}

/// Hermitian idempotent of known rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    op: HermitianOp,
    rank: usize,
}

impl Projector {
    pub fn new(op: HermitianOp) -> Result<Self> {
        let idem = if op.m.is_diagonal() {
            op.m.diag_real()
                .into_iter()
                .map(|x| (x * x - x).abs())
                .fold(0.0, f64::max)
        } else {
            op.m.matmul(&op.m).sub(&op.m).max_norm()
        };
        if idem > EPS_IDEM {
            return Err(Error::contract(format!(
                "operator is not idempotent (defect {idem:e})"
            )));
        }
        let tr = op.m.trace().re;
        let rank = tr.round().max(0.0) as usize;
        if (tr - rank as f64).abs() > EPS_RANK {
            return Err(Error::contract(format!(
                "projector trace {tr} is not an integer"
            )));
        }
        Ok(Projector { op, rank })
    }

    pub fn from_matrix(n_qubits: u32, m: Matrix) -> Result<Self> {
        Projector::new(HermitianOp::new(n_qubits, m)?)
    }

    /// Diagonal projector onto the listed computational basis states.
    pub fn from_basis_indices(n_qubits: u32, indices: &[usize]) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut diag = vec![0.0; dim];
        for &i in indices {
            if i >= dim {
                return Err(Error::Dimension(format!("basis index {i} >= {dim}")));
            }
            diag[i] = 1.0;
        }
        Projector::from_matrix(n_qubits, Matrix::from_diag(&diag))
    }

    /// `I_m`: identity on the first `2^m` basis states.
    pub fn prefix(n_qubits: u32, m: u32) -> Result<Self> {
        if m > n_qubits {
            return Err(Error::domain(format!("m = {m} exceeds n = {n_qubits}")));
        }
        let idx: Vec<usize> = (0..1usize << m).collect();
        Projector::from_basis_indices(n_qubits, &idx)
    }

    /// `I − P`.
    pub fn complement(&self) -> Projector {
        let dim = self.dim();
        Projector {
            op: HermitianOp::new_unchecked(self.op.n_qubits, Matrix::identity(dim).sub(&self.op.m)),
            rank: dim - self.rank,
        }
    }

    /// Projector onto the span of orthonormal `vectors`.
    pub fn from_orthonormal(n_qubits: u32, vectors: &[Vec<Complex64>]) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut m = Matrix::zeros(dim);
        for v in vectors {
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "vector of length {} in dim {dim}",
                    v.len()
                )));
            }
            m = m.add(&Matrix::outer(v, 1.0));
        }
        Projector::from_matrix(n_qubits, m)
    }

    /// Haar-random rank-`rank` projector: Gram–Schmidt on complex Gaussian vectors.
    pub fn random<R: Rng + ?Sized>(n_qubits: u32, rank: usize, rng: &mut R) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if rank == 0 || rank > dim {
            return Err(Error::domain(format!("rank {rank} not in [1, {dim}]")));
        }
        let basis = haar::orthonormal_frame(dim, rank, rng);
        Projector::from_orthonormal(n_qubits, &basis)
    }

    pub fn op(&self) -> &HermitianOp {
        &self.op
    }

    pub fn matrix(&self) -> &Matrix {
        &self.op.m
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_qubits(&self) -> u32 {
        self.op.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `P|ψ⟩`, unnormalized.
    pub fn apply(&self, psi: &PureState) -> Vec<Complex64> {
        self.op.m.apply(psi.amplitudes())
    }

    /// `P·A·P` as a Hermitian operator.
    pub fn sandwich(&self, a: &HermitianOp) -> HermitianOp {
        let pap = self.op.m.matmul(&a.m).matmul(&self.op.m);
        // Symmetrize away rounding so downstream checks see an exact Hermitian.
        let herm = pap.add(&pap.adjoint()).scale(0.5);
        HermitianOp::new_unchecked(self.op.n_qubits, herm)
    }
}
