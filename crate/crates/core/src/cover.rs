//! Randomized covering of a projector ensemble by rank-one σ-tests.
//!
//! Each round draws Haar states `ψ`, forms `T = 2^{m−2}|ψ⟩⟨ψ|`, and accepts
//! the first candidate that is a σ-test and covers at least `θ·p` of the
//! normalized residual measure, where `B` is covered iff
//! `Tr(T·B) ≥ 2^{2m−n−3}`. The residual is then conditioned on the uncovered
//! projectors. After `R = ⌈d/(θp)⌉` rounds the residual mass is at most
//! `(1 − θp)^R ≤ e^{−d}`, and that bound is checked exactly in rational
//! arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::error::{BudgetExhausted, Error, Result};
use crate::measures::ElementaryMeasure;
use crate::qmat::codec::{self, Canonical};
use crate::qmat::{check_qubits, haar_sample, DensityMatrix, Projector, SeedStream};
use crate::sigma::{point_scale, point_test_hashed, PointTest, SigmaTest};
use crate::stats::{coverage_tail, MeanEstimate};

pub const DEFAULT_ROUND_BUDGET: u64 = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct CoverParams {
    pub n: u32,
    pub m: u32,
    pub d: u64,
    pub theta: BigRational,
    pub round_budget: u64,
}

impl CoverParams {
    /// Defaults: `θ = 1/4`, budget 10^4 attempts per round.
    pub fn new(n: u32, m: u32, d: u64) -> Result<Self> {
        CoverParams {
            n,
            m,
            d,
            theta: BigRational::new(BigInt::one(), BigInt::from(4)),
            round_budget: DEFAULT_ROUND_BUDGET,
        }
        .validated()
    }

    pub fn with_theta(mut self, theta: BigRational) -> Result<Self> {
        self.theta = theta;
        self.validated()
    }

    pub fn with_budget(mut self, budget: u64) -> Result<Self> {
        self.round_budget = budget;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        check_qubits(self.n)?;
        if self.m < 1 || self.m > self.n {
            return Err(Error::contract(format!(
                "m = {} outside [1, {}]",
                self.m, self.n
            )));
        }
        if self.d == 0 {
            return Err(Error::contract("d must be positive"));
        }
        let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
        if self.theta <= BigRational::zero() || self.theta > quarter {
            return Err(Error::contract(format!(
                "θ = {} outside (0, 1/4]",
                self.theta
            )));
        }
        if self.round_budget == 0 {
            return Err(Error::contract("round budget must be positive"));
        }
        Ok(self)
    }

    /// `p = 2^{m−n}`.
    pub fn p(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << (self.n - self.m) as usize)
    }

    /// Per-round coverage target `θ·p`.
    pub fn target(&self) -> BigRational {
        &self.theta * self.p()
    }

    /// `R = ⌈d / (θp)⌉`.
    pub fn rounds(&self) -> u64 {
        let r = (BigRational::from_integer(BigInt::from(self.d)) / self.target()).ceil();
        r.to_integer().to_u64().expect("round count fits in u64")
    }

    /// `2^{2m−n−3}`.
    pub fn threshold(&self) -> f64 {
        2f64.powi(2 * self.m as i32 - self.n as i32 - 3)
    }

    pub fn rank(&self) -> usize {
        1 << self.m
    }

    /// `(1 − θp)^r`, exact.
    pub fn residual_bound(&self, rounds: u64) -> BigRational {
        num_traits::pow::pow(BigRational::one() - self.target(), rounds as usize)
    }

    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("d".into(), Value::from(self.d));
        map.insert("m".into(), Value::from(self.m));
        map.insert("n".into(), Value::from(self.n));
        map.insert("round_budget".into(), Value::from(self.round_budget));
        map.insert("theta".into(), codec::rational(&self.theta));
        Value::Object(map)
    }
}

/// `[T, B] = 1` iff `Tr(T·B) ≥ 2^{2m−n−3}`.
pub fn coverage_indicator(t: &SigmaTest, b: &Projector, params: &CoverParams) -> Result<bool> {
    if t.n_qubits() != b.n_qubits() || b.n_qubits() != params.n {
        return Err(Error::contract(
            "test, projector and parameters disagree on n",
        ));
    }
    if b.rank() != params.rank() {
        return Err(Error::contract(format!(
            "projector rank {} is not 2^{} = {}",
            b.rank(),
            params.m,
            params.rank()
        )));
    }
    Ok(t.trace_with(b) >= params.threshold())
}

/// The test accepted for one round.
#[derive(Clone, Debug)]
pub struct RoundPick {
    pub test: SigmaTest,
    /// Mass of the normalized residual covered by `test`.
    pub covered: BigRational,
    /// Attempts used, including the accepted one.
    pub attempts: u64,
}

/// Draws candidates from `stream.child(attempt)` until one is a σ-test that
/// covers at least `θ·p` of `residual`.
pub fn find_round_test(
    sigma: &DensityMatrix,
    residual: &ElementaryMeasure<Projector>,
    params: &CoverParams,
    stream: &SeedStream,
) -> Result<RoundPick> {
    find_round_test_hashed(sigma, &sigma.content_hash(), residual, params, stream)
}

fn find_round_test_hashed(
    sigma: &DensityMatrix,
    sigma_hash: &str,
    residual: &ElementaryMeasure<Projector>,
    params: &CoverParams,
    stream: &SeedStream,
) -> Result<RoundPick> {
    if sigma.n_qubits() != params.n {
        return Err(Error::contract("σ dimension does not match n"));
    }
    let target = params.target();
    let mut best: Option<(SigmaTest, BigRational)> = None;
    for attempt in 0..params.round_budget {
        let psi = haar_sample(params.n, &mut stream.child(attempt).rng())?;
        let PointTest::Accepted(test) = point_test_hashed(&psi, params.m, sigma, sigma_hash)?
        else {
            continue;
        };
        let mut covered = BigRational::zero();
        for atom in residual.atoms() {
            if coverage_indicator(&test, &atom.item, params)? {
                covered += &atom.prob;
            }
        }
        if covered >= target {
            return Ok(RoundPick {
                test,
                covered,
                attempts: attempt + 1,
            });
        }
        if best.as_ref().is_none_or(|(_, c)| covered > *c) {
            best = Some((test, covered));
        }
    }
    Err(Error::Budget(Box::new(BudgetExhausted {
        round: 0,
        attempts: params.round_budget,
        best,
        partial: None,
    })))
}

#[derive(Clone, Debug)]
pub struct CoverResult {
    pub params: CoverParams,
    pub seed: u64,
    pub sigma_hash: String,
    pub tests: Vec<SigmaTest>,
    /// Covered fraction of the normalized residual, per round.
    pub per_round_covered: Vec<BigRational>,
    /// `1 − covered`, per round.
    pub per_round_retained: Vec<BigRational>,
    pub per_round_attempts: Vec<u64>,
    /// `None` once every projector is covered.
    pub residual: Option<ElementaryMeasure<Projector>>,
    pub residual_mass: BigRational,
}

impl CoverResult {
    pub fn rounds_completed(&self) -> u64 {
        self.tests.len() as u64
    }

    /// `residual_mass = Π retained ≤ (1 − θp)^{rounds}`, exactly.
    pub fn certificate_holds(&self) -> bool {
        let product = self
            .per_round_retained
            .iter()
            .fold(BigRational::one(), |acc, r| acc * r);
        product == self.residual_mass
            && self.residual_mass <= self.params.residual_bound(self.rounds_completed())
            && self
                .per_round_covered
                .iter()
                .all(|c| *c >= self.params.target())
    }

    /// `(1 − θp)^R` for the full round count `R`.
    pub fn final_bound(&self) -> BigRational {
        self.params.residual_bound(self.params.rounds())
    }

    pub fn residual_mass_f64(&self) -> f64 {
        self.residual_mass.to_f64().unwrap_or(f64::NAN)
    }

    /// Whether `B` (by id) is still uncovered.
    pub fn in_residual(&self, id: &str) -> bool {
        self.residual.as_ref().is_some_and(|r| r.get(id).is_some())
    }

    /// Summary JSON; tests are referenced by content hash and listed in
    /// `test_files` as `tests/<hash>.json`.
    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        let rationals = |xs: &[BigRational]| Value::Array(xs.iter().map(codec::rational).collect());
        map.insert(
            "certificate_holds".into(),
            Value::Bool(self.certificate_holds()),
        );
        map.insert("final_bound".into(), codec::rational(&self.final_bound()));
        map.insert(
            "final_bound_f64".into(),
            codec::real(self.final_bound().to_f64().unwrap_or(f64::NAN)),
        );
        map.insert(
            "e_minus_d".into(),
            codec::real((-(self.params.d as f64)).exp()),
        );
        map.insert("params".into(), self.params.to_value());
        map.insert(
            "per_round_attempts".into(),
            Value::from(self.per_round_attempts.clone()),
        );
        map.insert(
            "per_round_covered".into(),
            rationals(&self.per_round_covered),
        );
        map.insert(
            "per_round_retained".into(),
            rationals(&self.per_round_retained),
        );
        map.insert(
            "residual_ids".into(),
            Value::Array(
                self.residual
                    .iter()
                    .flat_map(|r| r.atoms().iter().map(|a| Value::String(a.id.clone())))
                    .collect(),
            ),
        );
        map.insert("residual_mass".into(), codec::rational(&self.residual_mass));
        map.insert(
            "rounds_completed".into(),
            Value::from(self.rounds_completed()),
        );
        map.insert("rounds_planned".into(), Value::from(self.params.rounds()));
        map.insert("seed".into(), Value::from(self.seed));
        map.insert("sigma_hash".into(), Value::String(self.sigma_hash.clone()));
        map.insert(
            "test_files".into(),
            Value::Array(
                self.tests
                    .iter()
                    .map(|t| Value::String(format!("tests/{}.json", t.content_hash())))
                    .collect(),
            ),
        );
        Value::Object(map)
    }
}

/// Runs up to `⌈d/(θp)⌉` covering rounds over `q`, stopping early when the
/// residual empties. All randomness derives from `seed`.
pub fn run_cover(
    sigma: &DensityMatrix,
    q: &ElementaryMeasure<Projector>,
    params: &CoverParams,
    seed: u64,
) -> Result<CoverResult> {
    if sigma.n_qubits() != params.n {
        return Err(Error::contract("σ dimension does not match n"));
    }
    for atom in q.atoms() {
        if atom.item.n_qubits() != params.n || atom.item.rank() != params.rank() {
            return Err(Error::contract(format!(
                "support element \"{}\" is not a rank-{} projector on {} qubits",
                atom.id,
                params.rank(),
                params.n
            )));
        }
    }
    let sigma_hash = sigma.content_hash();
    let root = SeedStream::new(seed);
    let mut result = CoverResult {
        params: params.clone(),
        seed,
        sigma_hash: sigma_hash.clone(),
        tests: Vec::new(),
        per_round_covered: Vec::new(),
        per_round_retained: Vec::new(),
        per_round_attempts: Vec::new(),
        residual: Some(q.clone()),
        residual_mass: BigRational::one(),
    };

    for round in 0..params.rounds() {
        let residual = result
            .residual
            .as_ref()
            .expect("loop exits once residual is empty");
        let pick = match find_round_test_hashed(
            sigma,
            &sigma_hash,
            residual,
            params,
            &root.child(round),
        ) {
            Ok(pick) => pick,
            Err(Error::Budget(mut b)) => {
                b.round = round;
                b.partial = Some(result);
                return Err(Error::Budget(b));
            }
            Err(e) => return Err(e),
        };
        let mut uncovered = Vec::new();
        for atom in residual.atoms() {
            if !coverage_indicator(&pick.test, &atom.item, params)? {
                uncovered.push(atom.id.clone());
            }
        }
        let retained = BigRational::one() - &pick.covered;
        let next = match residual.condition(|a| uncovered.contains(&a.id)) {
            Ok(c) => {
                debug_assert_eq!(c.retained, retained);
                Some(c.measure)
            }
            Err(Error::EmptyConditioning) => None,
            Err(e) => return Err(e),
        };
        result.residual_mass *= &retained;
        result.per_round_retained.push(retained);
        result.per_round_covered.push(pick.covered);
        result.per_round_attempts.push(pick.attempts);
        result.tests.push(pick.test);
        result.residual = next;
        if result.residual.is_none() {
            break;
        }
    }
    Ok(result)
}

/// Monte Carlo checks of the probability facts used by the covering argument.
#[derive(Clone, Debug)]
pub struct MomentReport {
    pub n: u32,
    pub m: u32,
    pub samples: usize,
    pub seed: u64,
    /// `Tr Tσ` for `T = 2^{m−2}|ψ⟩⟨ψ|`; exact mean `2^{m−n−2}`.
    pub tr_t_sigma: MeanEstimate,
    pub tr_t_sigma_exact: f64,
    /// Fraction of candidates with `Tr Tσ ≤ 1`; lower bound `1 − 2^{m−n−2}`.
    pub sigma_test_rate: MeanEstimate,
    pub sigma_test_bound: f64,
    /// Fraction with `Tr(B·T) ≥ 2^{2m−n−3}`, against the Beta tail and `p/2`.
    pub coverage_rate: MeanEstimate,
    pub coverage_oracle: f64,
    pub coverage_bound: f64,
    /// `Tr(K_m |ψ⟩⟨ψ|)` with `K_m = I − I_m`; exact mean `1 − p`.
    pub km_overlap: MeanEstimate,
    pub km_exact: f64,
}

impl MomentReport {
    pub fn to_value(&self) -> Value {
        let est = |e: &MeanEstimate| {
            let mut m = Map::new();
            m.insert("mean".into(), codec::real(e.mean));
            m.insert("stderr".into(), codec::real(e.stderr));
            Value::Object(m)
        };
        let mut map = Map::new();
        map.insert("coverage".into(), est(&self.coverage_rate));
        map.insert(
            "coverage_beta_oracle".into(),
            codec::real(self.coverage_oracle),
        );
        map.insert(
            "coverage_half_p_bound".into(),
            codec::real(self.coverage_bound),
        );
        map.insert("km_overlap".into(), est(&self.km_overlap));
        map.insert("km_overlap_exact".into(), codec::real(self.km_exact));
        map.insert("m".into(), Value::from(self.m));
        map.insert("mean_tr_T_sigma".into(), codec::real(self.tr_t_sigma.mean));
        map.insert(
            "mean_tr_T_sigma_exact".into(),
            codec::real(self.tr_t_sigma_exact),
        );
        map.insert(
            "mean_tr_T_sigma_stderr".into(),
            codec::real(self.tr_t_sigma.stderr),
        );
        map.insert("n".into(), Value::from(self.n));
        map.insert("samples".into(), Value::from(self.samples));
        map.insert("seed".into(), Value::from(self.seed));
        map.insert(
            "sigma_test_bound".into(),
            codec::real(self.sigma_test_bound),
        );
        map.insert("sigma_test_rate".into(), est(&self.sigma_test_rate));
        Value::Object(map)
    }

    /// Rows of `metric,mean,stderr,reference`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,stderr,reference\n");
        for (name, e, reference) in [
            ("tr_T_sigma", &self.tr_t_sigma, self.tr_t_sigma_exact),
            (
                "sigma_test_rate",
                &self.sigma_test_rate,
                self.sigma_test_bound,
            ),
            ("coverage", &self.coverage_rate, self.coverage_oracle),
            ("km_overlap", &self.km_overlap, self.km_exact),
        ] {
            out.push_str(&format!(
                "{name},{:.16e},{:.16e},{:.16e}\n",
                e.mean, e.stderr, reference
            ));
        }
        out
    }
}

/// Samples `samples` Haar states (sample `i` from `stream.child(i)`) and
/// estimates the moments in [`MomentReport`]. `projector` defaults to `I_m`.
/// Runs on the current rayon pool; results do not depend on its size.
pub fn verify_moments(
    sigma: &DensityMatrix,
    params: &CoverParams,
    samples: usize,
    seed: u64,
    projector: Option<&Projector>,
) -> Result<MomentReport> {
    if samples < 1000 {
        return Err(Error::contract(format!(
            "{samples} samples; need at least 1000"
        )));
    }
    if sigma.n_qubits() != params.n {
        return Err(Error::contract("σ dimension does not match n"));
    }
    let default_b;
    let b = match projector {
        Some(b) => {
            if b.n_qubits() != params.n || b.rank() != params.rank() {
                return Err(Error::contract(
                    "coverage projector must have rank 2^m on n qubits",
                ));
            }
            b
        }
        None => {
            default_b = Projector::prefix(params.n, params.m)?;
            &default_b
        }
    };
    let (n, m) = (params.n, params.m);
    let scale = point_scale(m);
    let threshold = params.threshold();
    let head = 1usize << m;
    let root = SeedStream::new(seed);

    let rows: Vec<[f64; 4]> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let psi = haar_sample(n, &mut root.child(i as u64).rng())?;
            let tr = scale * sigma.expect_state(&psi);
            let cov = scale * b.matrix().quad_form(psi.amplitudes()).re;
            let km: f64 = psi.amplitudes()[head..].iter().map(|a| a.norm_sqr()).sum();
            Ok([
                tr,
                f64::from(u8::from(tr <= 1.0)),
                f64::from(u8::from(cov >= threshold)),
                km,
            ])
        })
        .collect::<Result<_>>()?;

    let column =
        |k: usize| MeanEstimate::from_samples(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    let p = 2f64.powi(m as i32 - n as i32);
    Ok(MomentReport {
        n,
        m,
        samples,
        seed,
        tr_t_sigma: column(0),
        tr_t_sigma_exact: p / 4.0,
        sigma_test_rate: column(1),
        sigma_test_bound: 1.0 - p / 4.0,
        coverage_rate: column(2),
        coverage_oracle: coverage_tail(n, m),
        coverage_bound: p / 2.0,
        km_overlap: column(3),
        km_exact: 1.0 - p,
    })
}

/// Projectors in a cover's residual, keyed for JSON output.
pub fn residual_to_value(residual: &ElementaryMeasure<Projector>) -> Value {
    Value::Array(
        residual
            .atoms()
            .iter()
            .map(|a| {
                let mut m = Map::new();
                m.insert("id".into(), Value::String(a.id.clone()));
                m.insert("prob".into(), codec::rational(&a.prob));
                m.insert(
                    "projector_hash".into(),
                    Value::String(a.item.content_hash()),
                );
                Value::Object(m)
            })
            .collect(),
    )
}
