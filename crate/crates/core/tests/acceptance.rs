//! Acceptance suite: ten numbered criteria, one PASS/FAIL line each.
//! Runs as a plain binary (`harness = false`) so the lines always print.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{pow, One, ToPrimitive, Zero};

use qoutlier::bundle;
use qoutlier::cover::{
    coverage_indicator, run_cover, verify_moments, CoverParams, CoverResult, MomentReport,
};
use qoutlier::measures::{deficiency_classical, Atom, CodeLengthTable};
use qoutlier::qmat::{
    haar_sample, haar_unitary, DensityMatrix, HermitianOp, Matrix, Projector, PureState, SeedStream,
};
use qoutlier::schumacher::{schumacher_demo, typical_projector, DemoReport, TypicalSpec};
use qoutlier::sigma::{
    deficiency_q, ensemble_test, family_universal_test, point_test, FamilyUniversalTest,
    Provenance, SigmaTest,
};
use qoutlier::witness::{certify_outlier, extract_witness, max_image_value, Certification};
use qoutlier::ElementaryMeasure;

type Outcome = Result<String, String>;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Fixed non-diagonal σ on two qubits: spectrum (0.4, 0.3, 0.2, 0.1) in a
/// seeded Haar basis.
fn fixed_sigma() -> DensityMatrix {
    let u = haar_unitary(2, &mut SeedStream::new(20).rng()).unwrap();
    let d = Matrix::from_diag(&[0.4, 0.3, 0.2, 0.1]);
    let m = u.matmul(&d).matmul(&u.adjoint());
    let m = m.add(&m.adjoint()).scale(0.5);
    DensityMatrix::from_matrix(2, m).unwrap()
}

fn moments() -> MomentReport {
    let params = CoverParams::new(2, 1, 1).unwrap();
    verify_moments(&fixed_sigma(), &params, 100_000, 1, None).unwrap()
}

fn c1() -> Outcome {
    let r = moments();
    let dev = (r.tr_t_sigma.mean - 0.125).abs();
    check(
        r.tr_t_sigma.stderr > 0.0 && dev <= 5.0 * r.tr_t_sigma.stderr,
        format!(
            "mean Tr Tσ = {:.6} vs 0.125, |Δ| = {dev:.2e} ≤ 5·se = {:.2e}",
            r.tr_t_sigma.mean,
            5.0 * r.tr_t_sigma.stderr
        ),
    )
}

fn c2() -> Outcome {
    let r = moments();
    let bound = 0.875 - 5.0 * r.sigma_test_rate.stderr;
    check(
        r.sigma_test_rate.mean >= bound,
        format!("σ-test rate = {:.6} ≥ {bound:.6}", r.sigma_test_rate.mean),
    )
}

fn c3() -> Outcome {
    let r = moments();
    let e = r.coverage_rate;
    let dev = (e.mean - 0.84375).abs();
    check(
        dev <= 5.0 * e.stderr && e.mean >= 0.25 && (r.coverage_oracle - 0.84375).abs() < 1e-12,
        format!(
            "Pr(Tr B T̂ ≥ 0.25) = {:.6} vs 0.84375, |Δ| = {dev:.2e} ≤ {:.2e}; ≥ 0.25",
            e.mean,
            5.0 * e.stderr
        ),
    )
}

struct CoverRun {
    sigma: DensityMatrix,
    q: ElementaryMeasure<Projector>,
    params: CoverParams,
    cover: CoverResult,
}

const COVER_SEED: u64 = 4;

fn cover_run() -> CoverRun {
    let (n, m, d) = (4, 3, 3);
    let sigma = DensityMatrix::maximally_mixed(n).unwrap();
    let mut rng = SeedStream::new(16).rng();
    let q = ElementaryMeasure::uniform(
        (0..16)
            .map(|i| {
                (
                    format!("B{i:02}"),
                    Projector::random(n, 8, &mut rng).unwrap(),
                )
            })
            .collect(),
    )
    .unwrap();
    let params = CoverParams::new(n, m, d).unwrap();
    let cover = run_cover(&sigma, &q, &params, COVER_SEED).unwrap();
    CoverRun {
        sigma,
        q,
        params,
        cover,
    }
}

fn c4(run: &CoverRun) -> Outcome {
    let bound = pow(rat(7, 8), 24);
    let c = &run.cover;
    let ok = c.certificate_holds()
        && run.params.rounds() == 24
        && c.residual_mass <= bound
        && c.residual_mass.to_f64().unwrap() <= (-3f64).exp()
        && bound.to_f64().unwrap() <= (-3f64).exp();
    check(
        ok,
        format!(
            "{} rounds run (of 24), residual_mass = {} ≤ (7/8)^24 ≈ {:.4} ≤ e^-3 ≈ {:.4}, max attempts/round {}",
            c.rounds_completed(),
            c.residual_mass,
            bound.to_f64().unwrap(),
            (-3f64).exp(),
            c.per_round_attempts.iter().max().copied().unwrap_or(0)
        ),
    )
}

fn c5(run: &CoverRun) -> Outcome {
    let mut worst_member = 0.0f64;
    let mut min_value = f64::INFINITY;
    let mut witnesses = 0;
    for atom in run.q.atoms() {
        if run.cover.in_residual(&atom.id) {
            continue;
        }
        match certify_outlier(&atom.item, &run.cover, &run.sigma, &run.params).unwrap() {
            Certification::Witness(w) => {
                witnesses += 1;
                let back = atom.item.apply(&w.phi);
                let err = back
                    .iter()
                    .zip(w.phi.amplitudes())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                worst_member = worst_member.max(err);
                min_value = min_value.min(w.test_value);
            }
            Certification::Residual(_) => {
                return Err(format!("{} covered but no witness", atom.id))
            }
        }
    }
    check(
        witnesses > 0 && worst_member <= 1e-8 && min_value >= 0.5,
        format!("{witnesses} witnesses, max ‖Pφ−φ‖ = {worst_member:.1e} ≤ 1e-8, min ⟨φ|T|φ⟩ = {min_value:.4} ≥ 0.5"),
    )
}

fn dense_lambda_max(m: &Matrix) -> f64 {
    let a = DMatrix::<Complex64>::from_row_slice(m.dim(), m.dim(), m.data());
    a.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn c6() -> Outcome {
    let root = SeedStream::new(6);
    let mut worst = 0.0f64;
    let mut dominance_checked = 0;
    for i in 0..100u64 {
        let stream = root.child(i);
        let n = 1 + (i % 4) as u32;
        let m = 1 + (i / 4) as u32 % n;
        let sigma = DensityMatrix::maximally_mixed(n).unwrap();
        let p = Projector::random(n, 1 << m, &mut stream.child(0).rng()).unwrap();
        let psi = haar_sample(n, &mut stream.child(1).rng()).unwrap();
        let t = point_test(&psi, m, &sigma).unwrap().accepted().unwrap();
        let (lam, _) = max_image_value(&p, &t).unwrap();
        let pm = p.matrix();
        let ptp = pm.matmul(t.op().matrix()).matmul(pm);
        let ptp = ptp.add(&ptp.adjoint()).scale(0.5);
        worst = worst.max((lam - dense_lambda_max(&ptp)).abs());
        let params = CoverParams::new(n, m, 1).unwrap();
        if coverage_indicator(&t, &p, &params).unwrap() {
            let w = extract_witness(&p, &t, &params).unwrap();
            if lam < w.test_value - 1e-9 {
                return Err(format!(
                    "pair {i}: λ_max {lam} below witness value {}",
                    w.test_value
                ));
            }
            dominance_checked += 1;
        }
    }
    check(
        worst <= 1e-8,
        format!("max |λ_max − dense| = {worst:.1e} ≤ 1e-8 over 100 pairs; dominance held on {dominance_checked} covering pairs"),
    )
}

fn c7() -> Outcome {
    let sigma = DensityMatrix::diagonal(2, &[0.5, 0.25, 0.25, 0.0]).unwrap();
    let q = ElementaryMeasure::new(
        [(0usize, rat(1, 2)), (1, rat(1, 4)), (2, rat(1, 4))]
            .into_iter()
            .map(|(i, p)| Atom {
                id: format!("e{i}"),
                prob: p,
                item: PureState::basis(2, i).unwrap(),
            })
            .collect(),
    )
    .unwrap();
    let l = CodeLengthTable::shannon_safe(&q);
    let t = ensemble_test(&q, &l, &sigma).unwrap();
    let family = family_universal_test(vec![t.clone()], &sigma).unwrap();
    let mut lines = Vec::new();
    for a in q.atoms() {
        let d = deficiency_classical(&a.id, &q, &l).unwrap();
        let dq = deficiency_q(&a.item, &sigma, &family).unwrap();
        let rhs = d as f64 - t.code_length() as f64;
        if dq < rhs {
            return Err(format!("{}: deficiency {dq} < d − ℓ(T) = {rhs}", a.id));
        }
        lines.push(format!("{}: {dq} ≥ {rhs}", a.id));
    }
    check(
        t.trace_sigma() == 0.5,
        format!(
            "Tr Tσ = {} (exactly 0.5); {}",
            t.trace_sigma(),
            lines.join(", ")
        ),
    )
}

fn random_density(n: u32, seed: u64) -> DensityMatrix {
    let root = SeedStream::new(seed);
    let dim = 1usize << n;
    let mut m = Matrix::zeros(dim);
    for i in 0..dim {
        let psi = haar_sample(n, &mut root.child(i as u64).rng()).unwrap();
        m = m.add(&psi.outer((i + 1) as f64 / (dim * (dim + 1) / 2) as f64));
    }
    DensityMatrix::from_matrix(n, m).unwrap()
}

/// Families built from point, ensemble and external tests, including one
/// that needs Kraft rescaling and ones whose weights underflow.
fn family_corpus() -> Vec<FamilyUniversalTest> {
    let mut corpus = Vec::new();
    for n in 1..=4u32 {
        for seed in 0..6u64 {
            let sigma = random_density(n, 100 * n as u64 + seed);
            let root = SeedStream::new(seed);
            let members: Vec<SigmaTest> = (0..(1 + seed as usize))
                .filter_map(|i| {
                    let psi = haar_sample(n, &mut root.child(i as u64).rng()).unwrap();
                    point_test(&psi, 1 + (i as u32 % n), &sigma)
                        .unwrap()
                        .accepted()
                })
                .collect();
            if !members.is_empty() {
                corpus.push(family_universal_test(members, &sigma).unwrap());
            }
        }
    }

    let sigma = DensityMatrix::maximally_mixed(2).unwrap();
    let short: Vec<SigmaTest> = (0..4)
        .map(|i| {
            let op = HermitianOp::new(2, PureState::basis(2, i).unwrap().outer(1.0)).unwrap();
            SigmaTest::validated(op, 0, Provenance::External, &sigma).unwrap()
        })
        .collect();
    corpus.push(family_universal_test(short.clone(), &sigma).unwrap());

    let q = ElementaryMeasure::uniform(
        (0..4)
            .map(|i| (format!("e{i}"), PureState::basis(2, i).unwrap()))
            .collect(),
    )
    .unwrap();
    let ens = ensemble_test(&q, &CodeLengthTable::shannon_safe(&q), &sigma).unwrap();
    let psi = haar_sample(2, &mut SeedStream::new(77).rng()).unwrap();
    let pt = point_test(&psi, 2, &sigma).unwrap().accepted().unwrap();
    corpus.push(family_universal_test(vec![ens, pt, short[0].clone()], &sigma).unwrap());

    // Non-commuting members with short codes, so the weights stay visible.
    for seed in 0..8u64 {
        let sigma = random_density(3, 900 + seed);
        let root = SeedStream::new(seed);
        let members: Vec<SigmaTest> = (1..=5u64)
            .map(|len| {
                let psi = haar_sample(3, &mut root.child(len).rng()).unwrap();
                let scale = 0.9 / sigma.expect_state(&psi);
                let op = HermitianOp::new(3, psi.outer(scale)).unwrap();
                SigmaTest::validated(op, len, Provenance::External, &sigma).unwrap()
            })
            .collect();
        corpus.push(family_universal_test(members, &sigma).unwrap());
    }
    corpus
}

fn c8() -> Outcome {
    let corpus = family_corpus();
    let mut worst = f64::INFINITY;
    let mut members = 0;
    let mut rescaled = 0;
    for f in &corpus {
        if f.kraft_sum() > BigRational::one() {
            return Err(format!("Kraft sum {} > 1", f.kraft_sum()));
        }
        rescaled += usize::from(f.rescaled_by() > 0);
        for i in 0..f.members().len() {
            worst = worst.min(f.domination_margin(i));
            members += 1;
        }
    }
    check(
        worst >= -1e-8 && rescaled > 0,
        format!(
            "{} families ({rescaled} rescaled), {members} members: Σ2^-ℓ ≤ 1 exactly, min λ_min = {worst:.1e} ≥ -1e-8",
            corpus.len()
        ),
    )
}

const DEMO_SEED: u64 = 9;

fn demo_spec() -> TypicalSpec {
    TypicalSpec::new(rat(3, 4), 8, 0.15, 7).unwrap()
}

fn demo_run() -> DemoReport {
    schumacher_demo(&demo_spec(), 3, rat(1, 4), 10_000, DEMO_SEED).unwrap()
}

fn c9() -> Outcome {
    let report = demo_run();
    let Some(w) = report.certification.witness() else {
        return Err("no witness for the typical projector".into());
    };
    // Enumeration oracle over all 256 basis states.
    let s = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
    let (mut rank, mut mass) = (0usize, BigRational::zero());
    for x in 0..256usize {
        let j = x.count_ones() as usize;
        let rate = ((8 - j) as f64 * (4.0f64 / 3.0).log2() + 2.0 * j as f64) / 8.0;
        if (rate - s).abs() <= 0.15 {
            rank += 1;
            mass += BigRational::new(pow(BigInt::from(3), 8 - j), pow(BigInt::from(4), 8));
        }
    }
    let d = &report.diagnostics;
    let (p, _) = typical_projector(&demo_spec()).unwrap();
    check(
        w.test_value >= 8.0 && d.raw_rank == rank && d.raw_mass == mass && p.rank() == 128,
        format!(
            "test_value = {:.4} ≥ 8, raw typical rank {} = {rank}, raw mass {} = {mass}, padded rank {}",
            w.test_value,
            d.raw_rank,
            d.raw_mass,
            p.rank()
        ),
    )
}

fn write_cover_bundle(dir: &Path, run: &CoverRun) {
    bundle::write_cover(dir, &run.cover).unwrap();
    for atom in run.q.atoms() {
        let c = certify_outlier(&atom.item, &run.cover, &run.sigma, &run.params).unwrap();
        bundle::write_canonical(
            &dir.join("witness").join(format!("{}.json", atom.id)),
            &c.to_value(),
        )
        .unwrap();
    }
}

fn write_demo_bundle(dir: &Path, report: &DemoReport) {
    bundle::write_cover(dir, &report.cover).unwrap();
    bundle::write_canonical(&dir.join("demo.json"), &report.to_value()).unwrap();
    bundle::write_canonical(&dir.join("witness.json"), &report.certification.to_value()).unwrap();
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn c10() -> Outcome {
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        write_cover_bundle(&dir.path().join("cover"), &cover_run());
        write_demo_bundle(&dir.path().join("demo"), &demo_run());
        trees.push(files(dir.path()));
    }
    let bytes: usize = trees[0].iter().map(|(_, b)| b.len()).sum();
    check(
        trees[0] == trees[1] && !trees[0].is_empty(),
        format!(
            "{} files, {bytes} bytes, identical across two seeded runs",
            trees[0].len()
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed < limit => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {limit:?}")),
            Err(d) => (false, d),
        };
        failures += usize::from(!ok);
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.2}s < {:.0}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        );
    };
    let secs = Duration::from_secs;

    report(1, "Haar moment identity", secs(10), &mut c1);
    report(2, "σ-test probability", secs(10), &mut c2);
    report(3, "coverage tail", secs(10), &mut c3);
    let mut run = None;
    report(4, "residual certificate", secs(60), &mut || {
        let r = cover_run();
        let out = c4(&r);
        run = Some(r);
        out
    });
    report(5, "witness soundness", secs(5), &mut || match &run {
        Some(r) => c5(r),
        None => Err("criterion 4 produced no cover".into()),
    });
    report(6, "λ_max oracle equivalence", secs(30), &mut c6);
    report(7, "ensemble test and mixture bound", secs(1), &mut c7);
    report(8, "Kraft and domination", secs(10), &mut c8);
    report(9, "Schumacher demo", secs(120), &mut c9);
    report(10, "determinism", secs(180), &mut c10);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
