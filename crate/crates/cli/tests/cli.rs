use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qoutlier::bundle;
use qoutlier::measures::CodeLengthTable;
use qoutlier::qmat::codec::Canonical;
use qoutlier::qmat::{haar_sample, DensityMatrix, Projector, PureState, SeedStream};
use qoutlier::sigma::point_test;
use qoutlier::ElementaryMeasure;
use serde_json::Value;

fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qoutlier"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_sigma(dir: &Path, n: u32) -> PathBuf {
    let path = dir.join("sigma.json");
    bundle::write_canonical(
        &path,
        &DensityMatrix::maximally_mixed(n).unwrap().to_value(),
    )
    .unwrap();
    path
}

fn write_random_measure(dir: &Path, n: u32, rank: usize, count: usize, seed: u64) -> PathBuf {
    let mut rng = SeedStream::new(seed).rng();
    let q = ElementaryMeasure::uniform(
        (0..count)
            .map(|i| {
                (
                    format!("p{i}"),
                    Projector::random(n, rank, &mut rng).unwrap(),
                )
            })
            .collect(),
    )
    .unwrap();
    let l = CodeLengthTable::shannon_safe(&q);
    bundle::write_projector_measure(&dir.join("q"), &q, &l).unwrap()
}

fn listing(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
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

#[test]
fn verify_moments_reports_the_haar_mean() {
    let dir = tempfile::tempdir().unwrap();
    write_sigma(dir.path(), 2);
    let o = run(
        dir.path(),
        &[
            "verify-moments",
            "--sigma",
            "sigma.json",
            "--m",
            "1",
            "--samples",
            "20000",
            "--seed",
            "3",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(dir.path().join("out/moments.json"));
    let mean = qoutlier::qmat::codec::parse_real(&v["mean_tr_T_sigma"]).unwrap();
    assert!((mean - 0.125).abs() < 1e-12);
    assert_eq!(
        o.stdout,
        fs::read(dir.path().join("out/moments.json")).unwrap()
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = dir.path().join("sigma.json");
    let s = DensityMatrix::diagonal(2, &[0.4, 0.3, 0.2, 0.1]).unwrap();
    bundle::write_canonical(&sigma, &s.to_value()).unwrap();
    let args = |out: &'static str, w: &'static str| {
        [
            "verify-moments",
            "--sigma",
            "sigma.json",
            "--m",
            "1",
            "--samples",
            "5000",
            "--seed",
            "11",
            "--workers",
            w,
            "--output-dir",
            out,
        ]
    };
    assert_eq!(code(&run(dir.path(), &args("w1", "1"))), 0);
    assert_eq!(code(&run(dir.path(), &args("w4", "4"))), 0);
    assert_eq!(
        listing(&dir.path().join("w1")),
        listing(&dir.path().join("w4"))
    );
}

#[test]
fn cover_on_singleton_empties_the_residual() {
    let dir = tempfile::tempdir().unwrap();
    let n = 3;
    write_sigma(dir.path(), n);
    let q = ElementaryMeasure::uniform(vec![("only".into(), Projector::prefix(n, 2).unwrap())])
        .unwrap();
    let l = CodeLengthTable::shannon_safe(&q);
    bundle::write_projector_measure(&dir.path().join("q"), &q, &l).unwrap();
    let o = run(
        dir.path(),
        &[
            "cover",
            "--sigma",
            "sigma.json",
            "--measure",
            "q/measure.json",
            "--m",
            "2",
            "--d",
            "2",
            "--seed",
            "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(dir.path().join("out/cover.json"));
    assert_eq!(v["residual_mass"]["num"].to_string(), "0");
    assert_eq!(v["residual_mass"]["den"].to_string(), "1");
    assert_eq!(v["rounds_completed"].to_string(), "1");
}

#[test]
fn cover_and_witness_replay_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    write_sigma(dir.path(), 3);
    write_random_measure(dir.path(), 3, 4, 6, 21);
    for out in ["a", "b"] {
        let o = run(
            dir.path(),
            &[
                "cover",
                "--sigma",
                "sigma.json",
                "--measure",
                "q/measure.json",
                "--m",
                "2",
                "--d",
                "1",
                "--theta",
                "1/4",
                "--seed",
                "99",
                "--output-dir",
                out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let w = run(
            dir.path(),
            &[
                "witness",
                "--projector",
                "q/p0.json",
                "--cover",
                &format!("{out}/cover.json"),
                "--sigma",
                "sigma.json",
                "--output-dir",
                out,
            ],
        );
        assert_eq!(code(&w), 0, "{}", String::from_utf8_lossy(&w.stderr));
    }
    let a = listing(&dir.path().join("a"));
    assert!(a.iter().any(|(p, _)| p == Path::new("witness.json")));
    assert!(a.iter().any(|(p, _)| p.starts_with("tests")));
    assert_eq!(a, listing(&dir.path().join("b")));
}

#[test]
fn haar_sample_is_seeded_and_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "haar-sample",
        "--qubits",
        "3",
        "--count",
        "4",
        "--seed",
        "5",
    ];
    let first = run(dir.path(), &args);
    let second = run(dir.path(), &args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    let v = json(dir.path().join("out/haar_samples.json"));
    for (i, s) in v["states"].as_array().unwrap().iter().enumerate() {
        let state = qoutlier::qmat::codec::decode_value(s)
            .unwrap()
            .into_state()
            .unwrap();
        let direct = haar_sample(3, &mut SeedStream::new(5).child(i as u64).rng()).unwrap();
        assert_eq!(state, direct);
    }
    let csv = run(
        dir.path(),
        &[
            "--format",
            "csv",
            "haar-sample",
            "--qubits",
            "1",
            "--count",
            "2",
            "--seed",
            "5",
        ],
    );
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("sample,index,re,im\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"command":"haar-sample","qubits":2,"count":3,"seed":8,"output_dir":"cfg"}"#,
    )
    .unwrap();
    assert_eq!(code(&run(dir.path(), &["--config", "run.json"])), 0);
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "haar-sample",
                "--qubits",
                "2",
                "--count",
                "3",
                "--seed",
                "8",
                "--output-dir",
                "flags"
            ]
        )),
        0
    );
    assert_eq!(
        listing(&dir.path().join("cfg")),
        listing(&dir.path().join("flags"))
    );

    // Command-line flags override the file.
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "--config",
                "run.json",
                "--seed",
                "9",
                "--output-dir",
                "over"
            ]
        )),
        0
    );
    let v = json(dir.path().join("over/haar_samples.json"));
    assert_eq!(v["seed"].to_string(), "9");
}

#[test]
fn outputs_stay_inside_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    write_sigma(dir.path(), 2);
    let before: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    let o = run(
        dir.path(),
        &[
            "schumacher-demo",
            "--p0",
            "1/2",
            "--copies",
            "3",
            "--delta",
            "0.1",
            "--m-target",
            "3",
            "--d",
            "1",
            "--seed",
            "2",
            "--output-dir",
            "demo",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut after: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    after.retain(|f| !before.contains(f));
    assert_eq!(after, vec![std::ffi::OsString::from("demo")]);
    let demo = json(dir.path().join("demo/demo.json"));
    assert_eq!(demo["certification"]["kind"], "witness");
}

#[test]
fn vacuous_demo_warns_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "schumacher-demo",
            "--p0",
            "1/2",
            "--copies",
            "3",
            "--m-target",
            "2",
            "--d",
            "1",
            "--seed",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vacuous"));
}

#[test]
fn deficiency_of_a_state_against_a_family() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = DensityMatrix::maximally_mixed(2).unwrap();
    write_sigma(dir.path(), 2);
    let members: Vec<_> = (0..4)
        .map(|i| {
            point_test(&PureState::basis(2, i).unwrap(), 2, &sigma)
                .unwrap()
                .accepted()
                .unwrap()
        })
        .collect();
    bundle::write_canonical(
        &dir.path().join("family.json"),
        &bundle::family_file_value(&members),
    )
    .unwrap();
    let psi = PureState::basis(2, 1).unwrap();
    bundle::write_canonical(&dir.path().join("psi.json"), &psi.to_value()).unwrap();
    let o = run(
        dir.path(),
        &[
            "deficiency",
            "--state",
            "psi.json",
            "--sigma",
            "sigma.json",
            "--family",
            "family.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(dir.path().join("out/deficiency.json"));
    assert_eq!(v["members"].to_string(), "4");
    let d = qoutlier::qmat::codec::parse_real(&v["deficiency"]).unwrap();
    assert!(d.is_finite());

    // A projector is not a state.
    bundle::write_canonical(
        &dir.path().join("p.json"),
        &Projector::prefix(2, 1).unwrap().to_value(),
    )
    .unwrap();
    let bad = run(
        dir.path(),
        &[
            "deficiency",
            "--state",
            "p.json",
            "--sigma",
            "sigma.json",
            "--family",
            "family.json",
        ],
    );
    assert_eq!(code(&bad), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_sigma(dir.path(), 4);

    let io = run(
        dir.path(),
        &[
            "verify-moments",
            "--sigma",
            "nope.json",
            "--m",
            "1",
            "--seed",
            "1",
        ],
    );
    assert_eq!(code(&io), 4);
    assert!(io.stdout.is_empty());
    assert!(!io.stderr.is_empty());

    let contract = run(
        dir.path(),
        &[
            "verify-moments",
            "--sigma",
            "sigma.json",
            "--m",
            "5",
            "--seed",
            "1",
        ],
    );
    assert_eq!(code(&contract), 2);

    let usage = run(dir.path(), &["cover", "--sigma", "sigma.json"]);
    assert_eq!(code(&usage), 2);

    // One attempt per round: some seeds must miss the singleton's coverage
    // target and exit with the budget code, leaving a partial cover behind.
    let q =
        ElementaryMeasure::uniform(vec![("b".into(), Projector::prefix(4, 1).unwrap())]).unwrap();
    bundle::write_projector_measure(
        &dir.path().join("q"),
        &q,
        &CodeLengthTable::shannon_safe(&q),
    )
    .unwrap();
    let mut saw_budget = false;
    for seed in 0..40 {
        let seed = seed.to_string();
        let out = format!("b{seed}");
        let o = run(
            dir.path(),
            &[
                "cover",
                "--sigma",
                "sigma.json",
                "--measure",
                "q/measure.json",
                "--m",
                "1",
                "--d",
                "1",
                "--budget",
                "1",
                "--seed",
                &seed,
                "--output-dir",
                &out,
            ],
        );
        match code(&o) {
            0 => {}
            3 => {
                saw_budget = true;
                assert!(dir.path().join(&out).join("partial/cover.json").exists());
            }
            c => panic!(
                "unexpected exit {c}: {}",
                String::from_utf8_lossy(&o.stderr)
            ),
        }
    }
    assert!(saw_budget);
}
