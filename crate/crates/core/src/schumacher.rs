//! Typical-subspace projectors for i.i.d. qubit sources, and an end-to-end
//! demo that covers such a projector and extracts a witness from its image.
//!
//! The single-qubit source is `σ = diag(p0, 1 − p0)`, so `σ^{⊗k}` is diagonal
//! in the computational basis and a basis state with `j` ones has eigenvalue
//! `p0^{k−j}(1 − p0)^j`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{Map, Value};

use crate::cover::{run_cover, CoverParams, CoverResult};
use crate::error::{Error, Result};
use crate::measures::ElementaryMeasure;
use crate::qmat::codec::{self, Canonical};
use crate::qmat::{tensor_power, DensityMatrix, Projector, MAX_QUBITS};
use crate::witness::{certify_outlier, Certification};

/// `S(σ) = −Σ λ log₂ λ`, with `0·log 0 = 0`.
pub fn von_neumann_entropy(sigma: &DensityMatrix) -> f64 {
    sigma
        .spectrum()
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum()
}

fn binary_entropy(p: f64) -> f64 {
    [p, 1.0 - p]
        .into_iter()
        .filter(|&x| x > 0.0)
        .map(|x| -x * x.log2())
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypicalSpec {
    pub p0: BigRational,
    pub k: u32,
    pub delta: f64,
    pub m_target: u32,
    /// Binary entropy of `p0`, in bits.
    pub entropy: f64,
}

impl TypicalSpec {
    pub fn new(p0: BigRational, k: u32, delta: f64, m_target: u32) -> Result<Self> {
        if p0 <= BigRational::zero() || p0 >= BigRational::one() {
            return Err(Error::domain(format!("p0 = {p0} outside (0, 1)")));
        }
        if k == 0 || k > MAX_QUBITS {
            return Err(Error::domain(format!("k = {k} outside [1, {MAX_QUBITS}]")));
        }
        if delta.is_nan() || delta <= 0.0 {
            return Err(Error::domain("delta must be positive"));
        }
        if m_target > k {
            return Err(Error::domain(format!(
                "m_target = {m_target} exceeds k = {k}"
            )));
        }
        let entropy = binary_entropy(p0.to_f64().expect("p0 in (0,1)"));
        Ok(TypicalSpec {
            p0,
            k,
            delta,
            m_target,
            entropy,
        })
    }

    pub fn source(&self) -> Result<DensityMatrix> {
        let p = self.p0.to_f64().expect("p0 in (0,1)");
        DensityMatrix::diagonal(1, &[p, 1.0 - p])
    }

    /// Whether a basis state with `ones` ones is δ-typical.
    pub fn is_typical(&self, ones: u32) -> bool {
        let p = self.p0.to_f64().expect("p0 in (0,1)");
        let k = self.k as f64;
        let j = ones as f64;
        let rate = -((k - j) * p.log2() + j * (1.0 - p).log2()) / k;
        (rate - self.entropy).abs() <= self.delta
    }

    /// Exact eigenvalue `p0^{k−j}(1−p0)^j`.
    pub fn eigenvalue(&self, ones: u32) -> BigRational {
        let q = BigRational::one() - &self.p0;
        num_traits::pow::pow(self.p0.clone(), (self.k - ones) as usize)
            * num_traits::pow::pow(q, ones as usize)
    }

    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("delta".into(), codec::real(self.delta));
        map.insert("entropy".into(), codec::real(self.entropy));
        map.insert("k".into(), Value::from(self.k));
        map.insert("m_target".into(), Value::from(self.m_target));
        map.insert("p0".into(), codec::rational(&self.p0));
        Value::Object(map)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypicalDiagnostics {
    pub raw_rank: usize,
    /// `Tr(Π_typ σ^{⊗k})` before padding, exact.
    pub raw_mass: BigRational,
    /// `Tr(P σ^{⊗k})` of the padded projector, exact.
    pub captured_mass: BigRational,
    pub m_target: u32,
    /// Basis indices spanning the padded projector, ascending.
    pub basis: Vec<usize>,
}

impl TypicalDiagnostics {
    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("captured_mass".into(), codec::rational(&self.captured_mass));
        map.insert(
            "captured_mass_f64".into(),
            codec::real(self.captured_mass.to_f64().unwrap_or(f64::NAN)),
        );
        map.insert("m_target".into(), Value::from(self.m_target));
        map.insert("padded_rank".into(), Value::from(self.basis.len()));
        map.insert("raw_mass".into(), codec::rational(&self.raw_mass));
        map.insert(
            "raw_mass_f64".into(),
            codec::real(self.raw_mass.to_f64().unwrap_or(f64::NAN)),
        );
        map.insert("raw_rank".into(), Value::from(self.raw_rank));
        Value::Object(map)
    }
}

/// δ-typical projector of `σ^{⊗k}`, padded or truncated to rank `2^{m_target}`.
///
/// Padding adds the highest-eigenvalue non-typical basis states; truncation
/// drops the lowest-eigenvalue typical ones. Ties break by basis index.
pub fn typical_projector(spec: &TypicalSpec) -> Result<(Projector, TypicalDiagnostics)> {
    if spec.m_target > spec.k {
        return Err(Error::domain(format!(
            "m_target = {} exceeds k = {}",
            spec.m_target, spec.k
        )));
    }
    let dim = 1usize << spec.k;
    let target = 1usize << spec.m_target;
    let eig: Vec<BigRational> = (0..=spec.k).map(|j| spec.eigenvalue(j)).collect();
    let ones = |i: usize| i.count_ones();

    let (mut typical, mut atypical): (Vec<usize>, Vec<usize>) =
        (0..dim).partition(|&i| spec.is_typical(ones(i)));
    let raw_rank = typical.len();
    let raw_mass = typical
        .iter()
        .fold(BigRational::zero(), |acc, &i| acc + &eig[ones(i) as usize]);

    // Descending eigenvalue, ascending index.
    let by_weight = |a: &usize, b: &usize| {
        eig[ones(*b) as usize]
            .cmp(&eig[ones(*a) as usize])
            .then(a.cmp(b))
    };
    if typical.len() < target {
        atypical.sort_by(by_weight);
        typical.extend(atypical.iter().take(target - typical.len()));
    } else {
        typical.sort_by(by_weight);
        typical.truncate(target);
    }
    typical.sort_unstable();
    let captured_mass = typical
        .iter()
        .fold(BigRational::zero(), |acc, &i| acc + &eig[ones(i) as usize]);
    let projector = Projector::from_basis_indices(spec.k, &typical)?;
    Ok((
        projector,
        TypicalDiagnostics {
            raw_rank,
            raw_mass,
            captured_mass,
            m_target: spec.m_target,
            basis: typical,
        },
    ))
}

#[derive(Clone, Debug)]
pub struct DemoReport {
    pub spec: TypicalSpec,
    pub diagnostics: TypicalDiagnostics,
    pub params: CoverParams,
    pub seed: u64,
    pub cover: CoverResult,
    pub certification: Certification,
    pub three_m_minus_two_n: i64,
    pub projector_hash: String,
    /// Set when `3m − 2k ≤ 0` and the outlier bound says nothing.
    pub vacuous: bool,
}

impl DemoReport {
    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("certification".into(), self.certification.to_value());
        map.insert("cover".into(), self.cover.to_value());
        map.insert("diagnostics".into(), self.diagnostics.to_value());
        map.insert("params".into(), self.params.to_value());
        map.insert(
            "projector_hash".into(),
            Value::String(self.projector_hash.clone()),
        );
        map.insert("seed".into(), Value::from(self.seed));
        map.insert("spec".into(), self.spec.to_value());
        map.insert(
            "three_m_minus_two_n".into(),
            Value::from(self.three_m_minus_two_n),
        );
        map.insert("vacuous".into(), Value::Bool(self.vacuous));
        Value::Object(map)
    }
}

/// Builds `σ^{⊗k}` and its padded typical projector `P`, covers the singleton
/// measure `{P}`, and certifies a witness in `Image(P)`.
pub fn schumacher_demo(
    spec: &TypicalSpec,
    d: u64,
    theta: BigRational,
    round_budget: u64,
    seed: u64,
) -> Result<DemoReport> {
    if spec.m_target == 0 {
        return Err(Error::domain(
            "m_target must be at least 1 to run the cover",
        ));
    }
    let sigma_k = tensor_power(&spec.source()?, spec.k)?;
    let (projector, diagnostics) = typical_projector(spec)?;
    let params = CoverParams::new(spec.k, spec.m_target, d)?
        .with_theta(theta)?
        .with_budget(round_budget)?;
    let projector_hash = projector.content_hash();
    let q = ElementaryMeasure::new(vec![crate::measures::Atom {
        id: projector_hash.clone(),
        prob: BigRational::from_integer(BigInt::one()),
        item: projector.clone(),
    }])?;
    let cover = run_cover(&sigma_k, &q, &params, seed)?;
    let certification = certify_outlier(&projector, &cover, &sigma_k, &params)?;
    let three_m_minus_two_n = 3 * spec.m_target as i64 - 2 * spec.k as i64;
    Ok(DemoReport {
        spec: spec.clone(),
        diagnostics,
        params,
        seed,
        cover,
        certification,
        three_m_minus_two_n,
        projector_hash,
        vacuous: three_m_minus_two_n <= 0,
    })
}
