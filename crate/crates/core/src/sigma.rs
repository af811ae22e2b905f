//! σ-tests: PSD operators `T` with `Tr Tσ ≤ 1`.
//!
//! A test carries a code length in bits standing in for the description
//! complexity of `T` given `σ`. Finite families of tests combine into
//! [`FamilyUniversalTest`], the Kraft-weighted sum `t_F = Σ 2^{−ℓ_i} T_i`,
//! which dominates each member up to its weight and is itself a σ-test.
//! Deficiencies computed against `t_F` are family-relative.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::measures::{
    ceil_log2_int, deficiency_classical, kraft_sum, CodeLengthTable, ElementaryMeasure,
};
use crate::qmat::codec::{self, field, parse_u64, Canonical};
use crate::qmat::{
    check_same_qubits, eigh, DensityMatrix, HermitianOp, Matrix, Projector, PureState,
    QuantumState, EPS_PSD,
};

/// Slack on `Tr Tσ ≤ 1`.
pub const EPS_TEST: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    /// `2^{m−2}|ψ⟩⟨ψ|`.
    Point {
        state: PureState,
        m: u32,
    },
    Ensemble,
    Family,
    External,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::Point { .. } => "point",
            Provenance::Ensemble => "ensemble",
            Provenance::Family => "family",
            Provenance::External => "external",
        }
    }
}

/// A validated σ-test.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaTest {
    op: HermitianOp,
    code_length: u64,
    provenance: Provenance,
    sigma_hash: String,
    trace_sigma: f64,
}

/// Outcome of [`point_test`]. Rejection is not an error: the cover loop resamples.
#[derive(Clone, Debug)]
pub enum PointTest {
    Accepted(SigmaTest),
    Rejected { trace_sigma: f64 },
}

impl PointTest {
    pub fn accepted(self) -> Option<SigmaTest> {
        match self {
            PointTest::Accepted(t) => Some(t),
            PointTest::Rejected { .. } => None,
        }
    }
}

fn psd_floor(op: &HermitianOp) -> f64 {
    if op.matrix().is_diagonal() {
        op.matrix()
            .diag_real()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    } else {
        eigh(op.matrix()).min()
    }
}

impl SigmaTest {
    /// Validates `op` against `sigma`: PSD within 1e−9 and `Tr(op·σ) ≤ 1 + 1e−9`.
    pub fn validated(
        op: HermitianOp,
        code_length: u64,
        provenance: Provenance,
        sigma: &DensityMatrix,
    ) -> Result<Self> {
        check_same_qubits(op.n_qubits(), sigma.n_qubits())?;
        let floor = psd_floor(&op);
        if floor < -EPS_PSD {
            return Err(Error::contract(format!(
                "test is not PSD (λ_min = {floor:e})"
            )));
        }
        Self::with_trace_check(op, code_length, provenance, sigma, &sigma.content_hash())
    }

    fn with_trace_check(
        op: HermitianOp,
        code_length: u64,
        provenance: Provenance,
        sigma: &DensityMatrix,
        sigma_hash: &str,
    ) -> Result<Self> {
        let trace_sigma = sigma.expect(op.matrix());
        if trace_sigma > 1.0 + EPS_TEST {
            return Err(Error::contract(format!("Tr Tσ = {trace_sigma} exceeds 1")));
        }
        Ok(SigmaTest {
            op,
            code_length,
            provenance,
            sigma_hash: sigma_hash.to_string(),
            trace_sigma,
        })
    }

    pub fn op(&self) -> &HermitianOp {
        &self.op
    }

    pub fn code_length(&self) -> u64 {
        self.code_length
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn sigma_hash(&self) -> &str {
        &self.sigma_hash
    }

    /// `Tr Tσ` against the σ it was validated for.
    pub fn trace_sigma(&self) -> f64 {
        self.trace_sigma
    }

    pub fn n_qubits(&self) -> u32 {
        self.op.n_qubits()
    }

    /// Generating state and `m` for point tests.
    pub fn point(&self) -> Option<(&PureState, u32)> {
        match &self.provenance {
            Provenance::Point { state, m } => Some((state, *m)),
            _ => None,
        }
    }

    /// `Tr(T·B)`; point tests use `2^{m−2}⟨ψ|B|ψ⟩`.
    pub fn trace_with(&self, b: &Projector) -> f64 {
        match self.point() {
            Some((psi, m)) => point_scale(m) * b.matrix().quad_form(psi.amplitudes()).re,
            None => self.op.matrix().trace_product(b.matrix()).re,
        }
    }

    /// Re-checks the test against `sigma`: same source hash and `Tr Tσ ≤ 1`.
    pub fn check_against(&self, sigma: &DensityMatrix, sigma_hash: &str) -> Result<()> {
        if self.sigma_hash != sigma_hash {
            return Err(Error::contract("test was validated against a different σ"));
        }
        let tr = sigma.expect(self.op.matrix());
        if tr > 1.0 + EPS_TEST {
            return Err(Error::contract(format!("Tr Tσ = {tr} exceeds 1")));
        }
        Ok(())
    }

    /// Test file JSON: the operator plus `code_length`, `provenance`,
    /// `sigma_hash`, and for point tests `m` and `state`.
    pub fn to_value(&self) -> Value {
        let Value::Object(mut map) = self.op.to_value() else {
            unreachable!("operators serialize to objects")
        };
        map.insert("code_length".into(), Value::from(self.code_length));
        map.insert(
            "provenance".into(),
            Value::String(self.provenance.tag().into()),
        );
        map.insert("sigma_hash".into(), Value::String(self.sigma_hash.clone()));
        if let Provenance::Point { state, m } = &self.provenance {
            map.insert("m".into(), Value::from(*m));
            map.insert("state".into(), state.to_value());
        }
        Value::Object(map)
    }

    pub fn content_hash(&self) -> String {
        codec::hash_of(&self.to_value())
    }

    /// Parses a test file and re-validates it against `sigma`.
    pub fn from_value(v: &Value, sigma: &DensityMatrix) -> Result<Self> {
        let mut op_fields = Map::new();
        for key in ["entries", "kind", "n_qubits"] {
            op_fields.insert(key.into(), field(v, key)?.clone());
        }
        let op = codec::decode_value(&Value::Object(op_fields))?.into_hermitian()?;
        let code_length = parse_u64(field(v, "code_length")?, "code_length")?;
        let tag = field(v, "provenance")?
            .as_str()
            .ok_or_else(|| Error::format("\"provenance\" must be a string"))?;
        let provenance = match tag {
            "point" => {
                let state = codec::decode_value(field(v, "state")?)?.into_state()?;
                let m = parse_u64(field(v, "m")?, "m")? as u32;
                let expected = state.outer(point_scale(m));
                if expected.sub(op.matrix()).max_norm() > 1e-9 {
                    return Err(Error::contract(
                        "point test operator does not match its state",
                    ));
                }
                Provenance::Point { state, m }
            }
            "ensemble" => Provenance::Ensemble,
            "family" => Provenance::Family,
            "external" => Provenance::External,
            other => return Err(Error::format(format!("unknown provenance \"{other}\""))),
        };
        let hash = field(v, "sigma_hash")?
            .as_str()
            .ok_or_else(|| Error::format("\"sigma_hash\" must be a string"))?;
        let sigma_hash = sigma.content_hash();
        if hash != sigma_hash {
            return Err(Error::contract("test file refers to a different σ"));
        }
        SigmaTest::validated(op, code_length, provenance, sigma)
    }
}

/// `2^{m−2}`.
pub fn point_scale(m: u32) -> f64 {
    2f64.powi(m as i32 - 2)
}

/// Bits for the decimal rendering of `m`.
fn m_code_length(m: u32) -> u64 {
    8 * m.to_string().len() as u64
}

/// `T = 2^{m−2}|ψ⟩⟨ψ|`, accepted iff `⟨ψ|σ|ψ⟩ ≤ 2^{2−m}`.
pub fn point_test(psi: &PureState, m: u32, sigma: &DensityMatrix) -> Result<PointTest> {
    point_test_hashed(psi, m, sigma, &sigma.content_hash())
}

pub(crate) fn point_test_hashed(
    psi: &PureState,
    m: u32,
    sigma: &DensityMatrix,
    sigma_hash: &str,
) -> Result<PointTest> {
    check_same_qubits(psi.n_qubits(), sigma.n_qubits())?;
    if m < 1 || m > psi.n_qubits() {
        return Err(Error::contract(format!(
            "m = {m} outside [1, {}]",
            psi.n_qubits()
        )));
    }
    let scale = point_scale(m);
    // Power-of-two scaling is exact, so this matches Tr Tσ ≤ 1 bit for bit.
    let trace_sigma = scale * sigma.expect_state(psi);
    if trace_sigma > 1.0 {
        return Ok(PointTest::Rejected { trace_sigma });
    }
    Ok(PointTest::Accepted(SigmaTest {
        op: HermitianOp::new_unchecked(psi.n_qubits(), psi.outer(scale)),
        code_length: psi.code_length() + m_code_length(m),
        provenance: Provenance::Point {
            state: psi.clone(),
            m,
        },
        sigma_hash: sigma_hash.to_string(),
        trace_sigma,
    }))
}

impl DensityMatrix {
    /// `⟨ψ|σ|ψ⟩`.
    pub fn expect_state(&self, psi: &PureState) -> f64 {
        self.matrix().quad_form(psi.amplitudes()).re
    }
}

/// `T = Σ 2^{d_i}|ψ_i⟩⟨ψ_i|` for an orthogonal ensemble with
/// `σ = Σ P_i |ψ_i⟩⟨ψ_i|` and `d_i = ⌊−log₂ P_i⌋ − L(ψ_i)`.
pub fn ensemble_test(
    ensemble: &ElementaryMeasure<PureState>,
    l: &CodeLengthTable,
    sigma: &DensityMatrix,
) -> Result<SigmaTest> {
    let atoms = ensemble.atoms();
    for a in atoms {
        check_same_qubits(a.item.n_qubits(), sigma.n_qubits())?;
    }
    for (i, a) in atoms.iter().enumerate() {
        for b in &atoms[i + 1..] {
            let overlap = a.item.inner(&b.item).norm();
            if overlap > 1e-8 {
                return Err(Error::contract(format!(
                    "ensemble states \"{}\" and \"{}\" are not orthogonal ({overlap:e})",
                    a.id, b.id
                )));
            }
        }
    }
    let dim = sigma.dim();
    let mut mix = Matrix::zeros(dim);
    let mut op = Matrix::zeros(dim);
    for a in atoms {
        let p = num_traits::ToPrimitive::to_f64(&a.prob).unwrap_or(0.0);
        mix = mix.add(&a.item.outer(p));
        let d = deficiency_classical(&a.id, ensemble, l)?;
        op = op.add(&a.item.outer(2f64.powi(d.clamp(-1074, 1023) as i32)));
    }
    let mismatch = mix.sub(sigma.matrix()).max_norm();
    if mismatch > 1e-8 {
        return Err(Error::contract(format!(
            "σ differs from the ensemble mixture by {mismatch:e}"
        )));
    }
    let op = HermitianOp::new_unchecked(sigma.n_qubits(), op);
    let code_length = op.code_length();
    SigmaTest::with_trace_check(
        op,
        code_length,
        Provenance::Ensemble,
        sigma,
        &sigma.content_hash(),
    )
}

/// Finite surrogate of the universal σ-test.
#[derive(Clone, Debug)]
pub struct FamilyUniversalTest {
    members: Vec<SigmaTest>,
    lengths: Vec<u64>,
    rescaled_by: u64,
    sigma_hash: String,
    trace_sigma: f64,
}

/// Combines validated members into `t_F = Σ 2^{−ℓ_i} T_i`.
///
/// If the member code lengths violate Kraft, every length is extended by
/// `⌈log₂ count⌉` bits.
pub fn family_universal_test(
    members: Vec<SigmaTest>,
    sigma: &DensityMatrix,
) -> Result<FamilyUniversalTest> {
    if members.is_empty() {
        return Err(Error::domain("family needs at least one member"));
    }
    let sigma_hash = sigma.content_hash();
    for t in &members {
        check_same_qubits(t.n_qubits(), sigma.n_qubits())?;
        t.check_against(sigma, &sigma_hash)?;
    }
    let mut lengths: Vec<u64> = members.iter().map(SigmaTest::code_length).collect();
    let mut rescaled_by = 0;
    if kraft_sum(lengths.iter().copied()) > BigRational::one() {
        rescaled_by = ceil_log2_int(&BigUint::from(members.len()));
        for l in &mut lengths {
            *l += rescaled_by;
        }
    }
    debug_assert!(kraft_sum(lengths.iter().copied()) <= BigRational::one());
    let trace_sigma = members
        .iter()
        .zip(&lengths)
        .map(|(t, &l)| weight(l) * t.trace_sigma())
        .sum::<f64>();
    if trace_sigma > 1.0 + EPS_TEST {
        return Err(Error::contract(format!(
            "Tr t_F σ = {trace_sigma} exceeds 1"
        )));
    }
    Ok(FamilyUniversalTest {
        members,
        lengths,
        rescaled_by,
        sigma_hash,
        trace_sigma,
    })
}

/// `2^{−ℓ}` (underflows to zero past 1074 bits).
pub fn weight(len: u64) -> f64 {
    if len > 1074 {
        0.0
    } else {
        2f64.powi(-(len as i32))
    }
}

impl FamilyUniversalTest {
    pub fn members(&self) -> &[SigmaTest] {
        &self.members
    }

    /// Effective code lengths, after any Kraft rescaling.
    pub fn lengths(&self) -> &[u64] {
        &self.lengths
    }

    pub fn rescaled_by(&self) -> u64 {
        self.rescaled_by
    }

    pub fn sigma_hash(&self) -> &str {
        &self.sigma_hash
    }

    pub fn kraft_sum(&self) -> BigRational {
        kraft_sum(self.lengths.iter().copied())
    }

    pub fn trace_sigma(&self) -> f64 {
        self.trace_sigma
    }

    /// Dense `t_F`. Members with code lengths beyond f64 range contribute zero.
    pub fn combined_operator(&self) -> Matrix {
        let dim = self.members[0].op().dim();
        self.members
            .iter()
            .zip(&self.lengths)
            .fold(Matrix::zeros(dim), |acc, (t, &l)| {
                acc.add(&t.op().matrix().scale(weight(l)))
            })
    }

    /// `λ_min(t_F − 2^{−ℓ_i} T_i)`; non-negative up to rounding.
    pub fn domination_margin(&self, i: usize) -> f64 {
        let diff = self
            .combined_operator()
            .sub(&self.members[i].op().matrix().scale(weight(self.lengths[i])));
        let herm = diff.add(&diff.adjoint()).scale(0.5);
        eigh(&herm).min()
    }

    /// `log₂ Tr(ρ t_F)` evaluated in log space, so arbitrarily long code
    /// lengths do not underflow.
    pub fn log2_expectation<S: QuantumState>(&self, rho: &S) -> f64 {
        let logs: Vec<f64> = self
            .members
            .iter()
            .zip(&self.lengths)
            .filter_map(|(t, &l)| {
                let v = rho.expect(t.op().matrix());
                (v > 0.0).then(|| v.log2() - l as f64)
            })
            .collect();
        let Some(top) = logs.iter().copied().reduce(f64::max) else {
            return f64::NEG_INFINITY;
        };
        top + logs.iter().map(|x| (x - top).exp2()).sum::<f64>().log2()
    }

    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert(
            "members".into(),
            Value::Array(self.members.iter().map(SigmaTest::to_value).collect()),
        );
        map.insert(
            "lengths".into(),
            Value::Array(self.lengths.iter().map(|&l| Value::from(l)).collect()),
        );
        map.insert("rescaled_by".into(), Value::from(self.rescaled_by));
        map.insert("sigma_hash".into(), Value::String(self.sigma_hash.clone()));
        Value::Object(map)
    }
}

/// Family-relative quantum deficiency `log₂ Tr(ρ t_F)`.
pub fn deficiency_q<S: QuantumState>(
    rho: &S,
    sigma: &DensityMatrix,
    tf: &FamilyUniversalTest,
) -> Result<f64> {
    check_same_qubits(rho.n_qubits(), sigma.n_qubits())?;
    check_same_qubits(tf.members[0].n_qubits(), sigma.n_qubits())?;
    Ok(tf.log2_expectation(rho))
}
