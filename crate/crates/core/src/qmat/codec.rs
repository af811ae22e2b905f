//! Canonical JSON serialization.
//!
//! Matrices and states are written as
//! `{"entries":[[re,im],...],"kind":...,"n_qubits":n}` with sorted keys, no
//! whitespace, and every real printed with 17 significant digits, which
//! round-trips `f64` bit-exactly. The code length `ℓ(X)` of an object is eight
//! times the byte length of that canonical string.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Signed;
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use super::{DensityMatrix, HermitianOp, Matrix, Projector, PureState};
use crate::error::{Error, Result};

/// 17-significant-digit JSON number.
pub fn real(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(
        format!("{x:.16e}")
            .parse::<Number>()
            .expect("formatted float is a JSON number"),
    )
}

pub fn parse_real(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .to_string()
            .parse::<f64>()
            .map_err(|e| Error::format(format!("bad real {n}: {e}"))),
        other => Err(Error::format(format!("expected a number, got {other}"))),
    }
}

pub fn integer(x: &BigInt) -> Value {
    Value::Number(x.to_string().parse::<Number>().expect("decimal integer"))
}

pub fn parse_integer(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) => n
            .to_string()
            .parse::<BigInt>()
            .map_err(|e| Error::format(format!("bad integer {n}: {e}"))),
        other => Err(Error::format(format!("expected an integer, got {other}"))),
    }
}

pub fn parse_u64(v: &Value, what: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::format(format!("{what}: expected a non-negative integer")))
}

/// `{"den":..,"num":..}`
pub fn rational(q: &BigRational) -> Value {
    let mut map = Map::new();
    map.insert("den".into(), integer(q.denom()));
    map.insert("num".into(), integer(q.numer()));
    Value::Object(map)
}

pub fn parse_rational(v: &Value) -> Result<BigRational> {
    let num = parse_integer(field(v, "num")?)?;
    let den = parse_integer(field(v, "den")?)?;
    if !den.is_positive() {
        return Err(Error::format("rational with non-positive denominator"));
    }
    Ok(BigRational::new(num, den))
}

pub fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::format(format!("missing field \"{key}\"")))
}

/// Compact, key-sorted rendering.
pub fn canonical_string(v: &Value) -> String {
    serde_json::to_string(v).expect("JSON values always serialize")
}

pub fn code_length_of(v: &Value) -> u64 {
    8 * canonical_string(v).len() as u64
}

pub fn hash_of(v: &Value) -> String {
    hex::encode(Sha256::digest(canonical_string(v).as_bytes()))
}

/// Objects with a canonical serialization.
pub trait Canonical {
    fn to_value(&self) -> Value;

    fn canonical(&self) -> String {
        canonical_string(&self.to_value())
    }

    /// `ℓ(X)` in bits.
    fn code_length(&self) -> u64 {
        code_length_of(&self.to_value())
    }

    fn content_hash(&self) -> String {
        hash_of(&self.to_value())
    }
}

fn entries(values: &[Complex64]) -> Value {
    Value::Array(
        values
            .iter()
            .map(|z| Value::Array(vec![real(z.re), real(z.im)]))
            .collect(),
    )
}

fn matrix_value(kind: &str, n_qubits: u32, m: &Matrix) -> Value {
    let mut map = Map::new();
    map.insert("entries".into(), entries(m.data()));
    map.insert("kind".into(), Value::String(kind.into()));
    map.insert("n_qubits".into(), Value::from(n_qubits));
    Value::Object(map)
}

impl Canonical for PureState {
    fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("entries".into(), entries(self.amplitudes()));
        map.insert("kind".into(), Value::String("state".into()));
        map.insert("n_qubits".into(), Value::from(self.n_qubits()));
        Value::Object(map)
    }
}

impl Canonical for HermitianOp {
    fn to_value(&self) -> Value {
        matrix_value("hermitian", self.n_qubits(), self.matrix())
    }
}

impl Canonical for DensityMatrix {
    fn to_value(&self) -> Value {
        matrix_value("density", self.n_qubits(), self.matrix())
    }
}

impl Canonical for Projector {
    fn to_value(&self) -> Value {
        matrix_value("projector", self.n_qubits(), self.matrix())
    }
}

/// Any of the four matrix-file kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixFile {
    State(PureState),
    Hermitian(HermitianOp),
    Density(DensityMatrix),
    Projector(Projector),
}

fn parse_entries(v: &Value) -> Result<Vec<Complex64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::format("\"entries\" must be an array"))?;
    arr.iter()
        .map(|pair| match pair.as_array().map(Vec::as_slice) {
            Some([re, im]) => Ok(Complex64::new(parse_real(re)?, parse_real(im)?)),
            _ => Err(Error::format("each entry must be [re, im]")),
        })
        .collect()
}

pub fn decode_value(v: &Value) -> Result<MatrixFile> {
    let kind = field(v, "kind")?
        .as_str()
        .ok_or_else(|| Error::format("\"kind\" must be a string"))?;
    let n = parse_u64(field(v, "n_qubits")?, "n_qubits")?;
    let n = u32::try_from(n).map_err(|_| Error::format("n_qubits too large"))?;
    super::check_qubits(n)?;
    let data = parse_entries(field(v, "entries")?)?;
    let dim = 1usize << n;
    if kind == "state" {
        return Ok(MatrixFile::State(PureState::new(n, data)?));
    }
    if data.len() != dim * dim {
        return Err(Error::Dimension(format!(
            "{} entries for a {dim}x{dim} matrix",
            data.len()
        )));
    }
    let op = HermitianOp::new(n, Matrix::from_row_major(dim, data))?;
    match kind {
        "hermitian" => Ok(MatrixFile::Hermitian(op)),
        "density" => Ok(MatrixFile::Density(DensityMatrix::new(op)?)),
        "projector" => Ok(MatrixFile::Projector(Projector::new(op)?)),
        other => Err(Error::format(format!("unknown kind \"{other}\""))),
    }
}

pub fn decode(text: &str) -> Result<MatrixFile> {
    decode_value(&serde_json::from_str(text)?)
}

impl MatrixFile {
    pub fn kind(&self) -> &'static str {
        match self {
            MatrixFile::State(_) => "state",
            MatrixFile::Hermitian(_) => "hermitian",
            MatrixFile::Density(_) => "density",
            MatrixFile::Projector(_) => "projector",
        }
    }

    pub fn into_state(self) -> Result<PureState> {
        match self {
            MatrixFile::State(s) => Ok(s),
            other => Err(Error::format(format!(
                "expected a state, got {}",
                other.kind()
            ))),
        }
    }

    pub fn into_density(self) -> Result<DensityMatrix> {
        match self {
            MatrixFile::Density(d) => Ok(d),
            other => Err(Error::format(format!(
                "expected a density matrix, got {}",
                other.kind()
            ))),
        }
    }

    pub fn into_projector(self) -> Result<Projector> {
        match self {
            MatrixFile::Projector(p) => Ok(p),
            other => Err(Error::format(format!(
                "expected a projector, got {}",
                other.kind()
            ))),
        }
    }

    pub fn into_hermitian(self) -> Result<HermitianOp> {
        match self {
            MatrixFile::Hermitian(h) => Ok(h),
            MatrixFile::Density(d) => Ok(d.op().clone()),
            MatrixFile::Projector(p) => Ok(p.op().clone()),
            MatrixFile::State(_) => Err(Error::format("expected an operator, got a state")),
        }
    }
}
