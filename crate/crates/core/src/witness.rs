//! Outlier witnesses in projector images.
//!
//! A covering test `T = 2^{m−2}|ψ⟩⟨ψ|` with `Tr(T·P) ≥ 2^{2m−n−3}` yields the
//! witness `φ = Pψ / ‖Pψ‖ ∈ Image(P)` with `⟨φ|T|φ⟩ = 2^{m−2}⟨ψ|P|ψ⟩`.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::{Map, Value};

use crate::cover::{coverage_indicator, CoverParams, CoverResult};
use crate::error::{Error, Result};
use crate::qmat::codec::{self, Canonical};
use crate::qmat::{check_same_qubits, lambda_max_psd, DensityMatrix, Projector, PureState};
use crate::sigma::{point_scale, SigmaTest};

/// Each step of the bound `2m − n − 3 ≤ log₂⟨φ|T|φ⟩`, with the code-length
/// surrogate standing in for the test's complexity.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityTrace {
    /// `2m − n`.
    pub two_m_minus_n: i64,
    /// Additive constant in `log₂ threshold = 2m − n − 3`.
    pub constant: i64,
    pub log2_threshold: i64,
    pub log2_test_value: f64,
    /// `log₂ test_value ≥ 2m − n − 3`.
    pub holds: bool,
    /// `n − m`: bits to name one of the covering rounds' tests.
    pub n_minus_m: i64,
    pub test_code_length: u64,
    pub deficiency_lb: f64,
    /// `3m − 2n`.
    pub three_m_minus_two_n: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessReport {
    pub phi: PureState,
    pub test_hash: String,
    pub test_index: Option<usize>,
    /// `⟨φ|T|φ⟩`.
    pub test_value: f64,
    /// `2^{2m−n−3}`.
    pub threshold: f64,
    /// `log₂ test_value − ℓ(T)`.
    pub deficiency_lb: f64,
    pub three_m_minus_two_n: i64,
    /// `‖Pφ − φ‖`.
    pub membership_error: f64,
    pub trace: InequalityTrace,
}

impl WitnessReport {
    pub fn to_value(&self) -> Value {
        let t = &self.trace;
        let mut trace = Map::new();
        trace.insert("constant".into(), Value::from(t.constant));
        trace.insert("deficiency_lb".into(), codec::real(t.deficiency_lb));
        trace.insert("holds".into(), Value::Bool(t.holds));
        trace.insert("log2_test_value".into(), codec::real(t.log2_test_value));
        trace.insert("log2_threshold".into(), Value::from(t.log2_threshold));
        trace.insert("n_minus_m".into(), Value::from(t.n_minus_m));
        trace.insert("test_code_length".into(), Value::from(t.test_code_length));
        trace.insert(
            "three_m_minus_two_n".into(),
            Value::from(t.three_m_minus_two_n),
        );
        trace.insert("two_m_minus_n".into(), Value::from(t.two_m_minus_n));

        let mut map = Map::new();
        map.insert("deficiency_lb".into(), codec::real(self.deficiency_lb));
        map.insert("inequality_trace".into(), Value::Object(trace));
        map.insert("kind".into(), Value::String("witness".into()));
        map.insert(
            "membership_error".into(),
            codec::real(self.membership_error),
        );
        map.insert("phi".into(), self.phi.to_value());
        map.insert("test_hash".into(), Value::String(self.test_hash.clone()));
        map.insert(
            "test_index".into(),
            self.test_index.map_or(Value::Null, Value::from),
        );
        map.insert("test_value".into(), codec::real(self.test_value));
        map.insert(
            "three_m_minus_two_n".into(),
            Value::from(self.three_m_minus_two_n),
        );
        map.insert("threshold".into(), codec::real(self.threshold));
        Value::Object(map)
    }
}

fn point_parts<'a>(t: &'a SigmaTest, params: &CoverParams) -> Result<&'a PureState> {
    let (psi, m) = t
        .point()
        .ok_or_else(|| Error::contract("witness extraction needs a point test"))?;
    if m != params.m {
        return Err(Error::contract(format!(
            "point test built for m = {m}, params say {}",
            params.m
        )));
    }
    Ok(psi)
}

/// `φ = Pψ / √⟨ψ|P|ψ⟩` for a covering point test.
pub fn extract_witness(
    p: &Projector,
    t: &SigmaTest,
    params: &CoverParams,
) -> Result<WitnessReport> {
    let psi = point_parts(t, params)?;
    if !coverage_indicator(t, p, params)? {
        return Err(Error::contract("test does not cover the projector"));
    }
    let overlap = p.matrix().quad_form(psi.amplitudes()).re;
    let projected = p.apply(psi);
    let norm = projected.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 1e-9 {
        return Err(Error::domain("degenerate witness: ‖Pψ‖ ≈ 0"));
    }
    let phi = PureState::normalized(p.n_qubits(), projected)?;
    let back = p.apply(&phi);
    let membership_error = back
        .iter()
        .zip(phi.amplitudes())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();

    let (n, m) = (params.n as i64, params.m as i64);
    let test_value = point_scale(params.m) * overlap;
    let log2_test_value = test_value.log2();
    let deficiency_lb = log2_test_value - t.code_length() as f64;
    let log2_threshold = 2 * m - n - 3;
    Ok(WitnessReport {
        phi,
        test_hash: t.content_hash(),
        test_index: None,
        test_value,
        threshold: params.threshold(),
        deficiency_lb,
        three_m_minus_two_n: 3 * m - 2 * n,
        membership_error,
        trace: InequalityTrace {
            two_m_minus_n: 2 * m - n,
            constant: 3,
            log2_threshold,
            log2_test_value,
            holds: log2_test_value >= log2_threshold as f64,
            n_minus_m: n - m,
            test_code_length: t.code_length(),
            deficiency_lb,
            three_m_minus_two_n: 3 * m - 2 * n,
        },
    })
}

/// `max_{φ ∈ Image(P)} ⟨φ|T|φ⟩ = λ_max(P·T·P)` and a maximizing unit vector
/// inside `Image(P)`.
pub fn max_image_value(p: &Projector, t: &SigmaTest) -> Result<(f64, PureState)> {
    check_same_qubits(p.n_qubits(), t.n_qubits())?;
    if p.rank() == 0 {
        return Err(Error::domain("zero-rank projector has an empty image"));
    }
    let (value, vec) = lambda_max_psd(&p.sandwich(t.op()))?;
    let in_image = p.apply(&vec);
    let norm = in_image.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let phi = if norm > 0.5 {
        PureState::normalized(p.n_qubits(), in_image)?
    } else {
        // PTP vanishes on Image(P); any unit vector there attains 0.
        lambda_max_psd(p.op())?.1
    };
    Ok((value.max(0.0), phi))
}

/// No covering test reached `P`: its mass sits in the certified residual.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualNotice {
    pub residual_mass: BigRational,
    pub final_bound: BigRational,
    pub e_minus_d: f64,
    pub tests_scanned: usize,
}

impl ResidualNotice {
    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("e_minus_d".into(), codec::real(self.e_minus_d));
        map.insert("final_bound".into(), codec::rational(&self.final_bound));
        map.insert("kind".into(), Value::String("residual".into()));
        map.insert("residual_mass".into(), codec::rational(&self.residual_mass));
        map.insert(
            "residual_mass_f64".into(),
            codec::real(self.residual_mass.to_f64().unwrap_or(f64::NAN)),
        );
        map.insert("tests_scanned".into(), Value::from(self.tests_scanned));
        Value::Object(map)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certification {
    Witness(WitnessReport),
    Residual(ResidualNotice),
}

impl Certification {
    pub fn witness(&self) -> Option<&WitnessReport> {
        match self {
            Certification::Witness(w) => Some(w),
            Certification::Residual(_) => None,
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Certification::Witness(w) => w.to_value(),
            Certification::Residual(r) => r.to_value(),
        }
    }
}

/// Scans `cover.tests` in order for the first test covering `P`.
pub fn certify_outlier(
    p: &Projector,
    cover: &CoverResult,
    sigma: &DensityMatrix,
    params: &CoverParams,
) -> Result<Certification> {
    if p.n_qubits() != params.n || p.rank() != params.rank() {
        return Err(Error::contract(format!(
            "projector has rank {} on {} qubits; expected rank {} on {}",
            p.rank(),
            p.n_qubits(),
            params.rank(),
            params.n
        )));
    }
    let sigma_hash = sigma.content_hash();
    if cover.sigma_hash != sigma_hash {
        return Err(Error::contract("cover was computed for a different σ"));
    }
    for (i, t) in cover.tests.iter().enumerate() {
        if coverage_indicator(t, p, params)? {
            let mut report = extract_witness(p, t, params)?;
            report.test_index = Some(i);
            return Ok(Certification::Witness(report));
        }
    }
    Ok(Certification::Residual(ResidualNotice {
        residual_mass: cover.residual_mass.clone(),
        final_bound: cover.final_bound(),
        e_minus_d: (-(cover.params.d as f64)).exp(),
        tests_scanned: cover.tests.len(),
    }))
}

/// Result of [`stabilize_projector`].
#[derive(Clone, Debug)]
pub struct Stabilized {
    pub index: usize,
    pub projector: Projector,
    pub lambda: f64,
    /// `2·dim·2^{−i}·‖T‖_max·dim`.
    pub perturbation_bound: f64,
}

/// First index `i` of a projector sequence with `‖P − P_i‖_max ≤ 2^{−i}` at
/// which `λ_max(P_i T P_i)` is certified stable to within `tol`.
///
/// Stability needs both `|λ_i − λ_{i+1}| ≤ tol` and the perturbation bound
/// `2·dim²·2^{−i}·‖T‖_max ≤ tol`, where `dim` converts the max norm to an
/// operator-norm bound.
pub fn stabilize_projector(
    seq: impl IntoIterator<Item = Projector>,
    t: &SigmaTest,
    tol: f64,
) -> Result<Stabilized> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::domain("tolerance must be positive"));
    }
    let mut iter = seq.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::domain("empty projector sequence"))?;
    check_same_qubits(first.n_qubits(), t.n_qubits())?;
    let dim = first.dim() as f64;
    let t_norm = t.op().max_norm();
    let lambda_of = |p: &Projector| -> Result<f64> { Ok(lambda_max_psd(&p.sandwich(t.op()))?.0) };

    let mut cur = first;
    let mut cur_lambda = lambda_of(&cur)?;
    for (i, next) in iter.enumerate() {
        if next.rank() != cur.rank() || next.n_qubits() != cur.n_qubits() {
            return Err(Error::contract(format!(
                "sequence changed rank at index {}: {} → {}",
                i + 1,
                cur.rank(),
                next.rank()
            )));
        }
        let step = next.matrix().sub(cur.matrix()).max_norm();
        let allowed = 2f64.powi(-(i as i32)) + 2f64.powi(-(i as i32) - 1);
        if step > allowed + 1e-12 {
            return Err(Error::contract(format!(
                "‖P_{i} − P_{}‖ = {step:e} exceeds 2^-{i} + 2^-{}",
                i + 1,
                i + 1
            )));
        }
        let next_lambda = lambda_of(&next)?;
        let bound = 2.0 * dim * 2f64.powi(-(i as i32)) * t_norm * dim;
        if (cur_lambda - next_lambda).abs() <= tol && bound <= tol {
            return Ok(Stabilized {
                index: i,
                projector: cur,
                lambda: cur_lambda,
                perturbation_bound: bound,
            });
        }
        cur = next;
        cur_lambda = next_lambda;
    }
    Err(Error::domain("projector sequence ended before stabilizing"))
}
