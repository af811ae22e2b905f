use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{Map, Value};

use qoutlier::bundle;
use qoutlier::cover::{run_cover, verify_moments, CoverParams, DEFAULT_ROUND_BUDGET};
use qoutlier::qmat::codec::{self, Canonical, MatrixFile};
use qoutlier::qmat::{haar_sample, SeedStream};
use qoutlier::schumacher::{schumacher_demo, TypicalSpec};
use qoutlier::sigma::deficiency_q;
use qoutlier::witness::certify_outlier;
use qoutlier::Error;

mod config;
mod csv;

#[derive(Parser, Debug)]
#[command(
    name = "qoutlier",
    version,
    about = "Seeded runner for the σ-test covering pipeline"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Worker threads for Monte Carlo loops; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// JSON file whose keys mirror the flags, plus "command".
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw Haar-random pure states.
    HaarSample(HaarArgs),
    /// Monte Carlo check of the point-test moment identities.
    VerifyMoments(MomentArgs),
    /// Run the covering rounds over a projector measure.
    Cover(CoverArgs),
    /// Certify a projector against a saved cover.
    Witness(WitnessArgs),
    /// Typical-subspace projector, cover and witness in one run.
    SchumacherDemo(DemoArgs),
    /// Quantum deficiency of a state against a test family.
    Deficiency(DeficiencyArgs),
}

#[derive(Args, Debug)]
struct HaarArgs {
    #[arg(long)]
    qubits: u32,
    #[arg(long)]
    count: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Debug)]
struct MomentArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    /// Rank-2^m projector for the coverage estimate; defaults to I_m.
    #[arg(long)]
    projector: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoverArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    m: u32,
    #[arg(long)]
    d: u64,
    #[arg(long, default_value = "1/4", value_parser = parse_ratio)]
    theta: BigRational,
    #[arg(long, default_value_t = DEFAULT_ROUND_BUDGET)]
    budget: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Debug)]
struct WitnessArgs {
    #[arg(long)]
    projector: PathBuf,
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    sigma: PathBuf,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, default_value = "3/4", value_parser = parse_ratio)]
    p0: BigRational,
    #[arg(long, default_value_t = 8)]
    copies: u32,
    #[arg(long, default_value_t = 0.15)]
    delta: f64,
    #[arg(long, default_value_t = 7)]
    m_target: u32,
    #[arg(long, default_value_t = 3)]
    d: u64,
    #[arg(long, default_value = "1/4", value_parser = parse_ratio)]
    theta: BigRational,
    #[arg(long, default_value_t = DEFAULT_ROUND_BUDGET)]
    budget: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DeficiencyArgs {
    /// State or density matrix file.
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    family: PathBuf,
}

fn parse_ratio(s: &str) -> Result<BigRational, String> {
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let num = num
        .trim()
        .parse()
        .map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
    let den: BigInt = den
        .trim()
        .parse()
        .map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
    if den == BigInt::from(0) {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(BigRational::new(num, den))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Budget(_) => 3,
        Error::Io(_) | Error::Format(_) => 4,
        Error::Dimension(_)
        | Error::Contract(_)
        | Error::Domain(_)
        | Error::EmptyConditioning
        | Error::Resource(_) => 2,
    }
}

/// A closed pipe on stdout is not an error; the files are already written.
fn stdout(text: &str) -> qoutlier::Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

struct Ctx {
    out: PathBuf,
    format: Format,
}

impl Ctx {
    /// Writes `<stem>.json` or `<stem>.csv` and echoes it on stdout.
    fn emit(&self, stem: &str, v: &Value, csv_text: Option<String>) -> qoutlier::Result<()> {
        match self.format {
            Format::Json => {
                bundle::write_canonical(&self.out.join(format!("{stem}.json")), v)?;
                stdout(&format!("{}\n", codec::canonical_string(v)))?;
            }
            Format::Csv => {
                let text = csv_text.unwrap_or_else(|| csv::flatten(v));
                let path = self.out.join(format!("{stem}.csv"));
                std::fs::create_dir_all(&self.out)?;
                std::fs::write(&path, &text)?;
                stdout(&text)?;
            }
        }
        Ok(())
    }
}

fn haar(ctx: &Ctx, a: &HaarArgs) -> qoutlier::Result<()> {
    let root = SeedStream::new(a.seed);
    let states = (0..a.count)
        .map(|i| haar_sample(a.qubits, &mut root.child(i).rng()))
        .collect::<qoutlier::Result<Vec<_>>>()?;
    let mut map = Map::new();
    map.insert("count".into(), Value::from(a.count));
    map.insert("n_qubits".into(), Value::from(a.qubits));
    map.insert("seed".into(), Value::from(a.seed));
    map.insert(
        "states".into(),
        Value::Array(states.iter().map(|s| s.to_value()).collect()),
    );
    let mut rows = String::from("sample,index,re,im\n");
    for (i, s) in states.iter().enumerate() {
        for (j, z) in s.amplitudes().iter().enumerate() {
            rows.push_str(&format!("{i},{j},{:.16e},{:.16e}\n", z.re, z.im));
        }
    }
    ctx.emit("haar_samples", &Value::Object(map), Some(rows))
}

fn moments(ctx: &Ctx, a: &MomentArgs) -> qoutlier::Result<()> {
    let sigma = bundle::read_density(&a.sigma)?;
    let params = CoverParams::new(sigma.n_qubits(), a.m, 1)?;
    let b = a
        .projector
        .as_deref()
        .map(bundle::read_projector)
        .transpose()?;
    let report = verify_moments(&sigma, &params, a.samples, a.seed, b.as_ref())?;
    ctx.emit("moments", &report.to_value(), Some(report.to_csv()))
}

fn cover(ctx: &Ctx, a: &CoverArgs) -> qoutlier::Result<()> {
    let sigma = bundle::read_density(&a.sigma)?;
    let (q, _) = bundle::read_projector_measure(&a.measure)?;
    let params = CoverParams::new(sigma.n_qubits(), a.m, a.d)?
        .with_theta(a.theta.clone())?
        .with_budget(a.budget)?;
    let result = match run_cover(&sigma, &q, &params, a.seed) {
        Ok(r) => r,
        Err(Error::Budget(b)) => {
            if let Some(partial) = &b.partial {
                let dir = ctx.out.join("partial");
                bundle::write_cover(&dir, partial)?;
                eprintln!("partial cover written to {}", dir.display());
            }
            return Err(Error::Budget(b));
        }
        Err(e) => return Err(e),
    };
    bundle::write_cover(&ctx.out, &result)?;
    let v = result.to_value();
    match ctx.format {
        Format::Json => stdout(&format!("{}\n", codec::canonical_string(&v)))?,
        Format::Csv => {
            let mut rows = String::from("round,covered,retained,attempts,test\n");
            for (i, t) in result.tests.iter().enumerate() {
                rows.push_str(&format!(
                    "{i},{},{},{},{}\n",
                    result.per_round_covered[i],
                    result.per_round_retained[i],
                    result.per_round_attempts[i],
                    t.content_hash()
                ));
            }
            std::fs::write(ctx.out.join("cover.csv"), &rows)?;
            stdout(&rows)?;
        }
    }
    Ok(())
}

fn witness(ctx: &Ctx, a: &WitnessArgs) -> qoutlier::Result<()> {
    let sigma = bundle::read_density(&a.sigma)?;
    let p = bundle::read_projector(&a.projector)?;
    let cover = bundle::read_cover(&a.cover, &sigma)?;
    let cert = certify_outlier(&p, &cover, &sigma, &cover.params)?;
    if cert.witness().is_none() {
        eprintln!("no test in the cover reaches this projector; residual notice written");
    }
    ctx.emit("witness", &cert.to_value(), None)
}

fn demo(ctx: &Ctx, a: &DemoArgs) -> qoutlier::Result<()> {
    let spec = TypicalSpec::new(a.p0.clone(), a.copies, a.delta, a.m_target)?;
    let lhs = 3 * i64::from(a.m_target) - 2 * i64::from(a.copies);
    if lhs <= 0 {
        eprintln!("warning: 3m − 2k = {lhs} ≤ 0, the outlier bound is vacuous here");
    }
    let report = schumacher_demo(&spec, a.d, a.theta.clone(), a.budget, a.seed)?;
    bundle::write_cover(&ctx.out, &report.cover)?;
    let (p, _) = qoutlier::schumacher::typical_projector(&spec)?;
    bundle::write_canonical(&ctx.out.join("typical_projector.json"), &p.to_value())?;
    bundle::write_canonical(
        &ctx.out.join("witness.json"),
        &report.certification.to_value(),
    )?;
    ctx.emit("demo", &report.to_value(), None)
}

fn deficiency(ctx: &Ctx, a: &DeficiencyArgs) -> qoutlier::Result<()> {
    let sigma = bundle::read_density(&a.sigma)?;
    let family = bundle::read_family(&a.family, &sigma)?;
    let (value, state_hash) = match bundle::read_matrix(&a.state)? {
        MatrixFile::State(s) => (deficiency_q(&s, &sigma, &family)?, s.content_hash()),
        MatrixFile::Density(r) => (deficiency_q(&r, &sigma, &family)?, r.content_hash()),
        other => {
            return Err(Error::Format(format!(
                "--state expects a state or density file, got \"{}\"",
                other.kind()
            )))
        }
    };
    let mut map = Map::new();
    map.insert("deficiency".into(), codec::real(value));
    map.insert("kraft_sum".into(), codec::rational(&family.kraft_sum()));
    map.insert("members".into(), Value::from(family.members().len()));
    map.insert("rescaled_by".into(), Value::from(family.rescaled_by()));
    map.insert(
        "sigma_hash".into(),
        Value::String(family.sigma_hash().to_string()),
    );
    map.insert("state_hash".into(), Value::String(state_hash));
    ctx.emit("deficiency", &Value::Object(map), None)
}

fn run(cli: Cli) -> qoutlier::Result<()> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    }
    let ctx = Ctx {
        out: cli.output_dir,
        format: cli.format,
    };
    match &cli.command {
        Command::HaarSample(a) => haar(&ctx, a),
        Command::VerifyMoments(a) => moments(&ctx, a),
        Command::Cover(a) => cover(&ctx, a),
        Command::Witness(a) => witness(&ctx, a),
        Command::SchumacherDemo(a) => demo(&ctx, a),
        Command::Deficiency(a) => deficiency(&ctx, a),
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
