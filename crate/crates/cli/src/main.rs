use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use l1fd::ann_index::{build_index, AnnIndex, IndexConfig};
use l1fd::embedding::{PlanConstants, Variant};
use l1fd::harness::checks::{run_verify, Profile, VerifyConfig, REFERENCE_AMPLIFICATION, REFERENCE_PLAN};
use l1fd::harness::dataset::{gen_dataset, DatasetSpec, Geometry};
use l1fd::harness::experiment::{run_experiment, ExperimentConfig};
use l1fd::harness::report::{append_jsonl, parse_jsonl, pretty, to_jsonl, ReportRecord};
use l1fd::io::{read_points, write_points};
use l1fd::{l1_distance, RandomSeed};

const SEED_VAR: &str = "L1FD_SEED";

#[derive(Parser)]
#[command(
    name = "l1fd",
    version,
    about = "Near-neighbor embeddings for doubling subsets of l1"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a low-doubling dataset with planted queries.
    GenData(GenData),
    /// Build an amplified index over a point file.
    BuildIndex(BuildIndex),
    /// Answer queries against a saved index, one JSON line per query.
    Query(Query),
    /// Run registered bound checks and emit JSONL records.
    VerifyBounds(VerifyBounds),
    /// Run an index experiment and emit JSONL records.
    Experiment(Experiment),
    /// Pretty-print a JSONL report.
    Report(Report),
}

#[derive(clap::Args)]
struct GenData {
    /// JSON dataset spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for points.txt, queries.txt, planted.json and spec.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    intrinsic_dim: Option<usize>,
    #[arg(long)]
    geometry: Option<Geometry>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    near: Option<f64>,
    #[arg(long)]
    far: Option<f64>,
    /// Write points in the binary block format.
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct BuildIndex {
    #[arg(long)]
    points: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value = "grid")]
    variant: Variant,
    #[arg(long, default_value_t = 0.1)]
    fail_prob: f64,
    #[arg(long, default_value_t = REFERENCE_AMPLIFICATION)]
    amplification: f64,
    /// Fixed target dimension instead of the planned one.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = REFERENCE_PLAN.zeta_cal)]
    zeta_cal: f64,
    #[arg(long, default_value_t = REFERENCE_PLAN.exponent_cal)]
    exponent_cal: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct Query {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Include the repetition and candidate counts.
    #[arg(long)]
    trace: bool,
}

#[derive(clap::Args)]
struct VerifyBounds {
    /// JSON verify config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated check names, or `all`.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    timing: bool,
    /// Append records to this file instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct Experiment {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct Report {
    file: PathBuf,
}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(s) => Ok(Some(
            s.trim()
                .parse()
                .with_context(|| format!("{SEED_VAR}={s} is not an integer"))?,
        )),
        Err(_) => Ok(None),
    }
}

/// `--seed`, then the config's own seed, then the environment.
fn resolve_seed(flag: Option<u64>, config_has_seed: bool) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    if config_has_seed {
        return Ok(None);
    }
    env_seed()
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(records: &[ReportRecord], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => append_jsonl(path, records)?,
        None => print!("{}", to_jsonl(records)?),
    }
    Ok(())
}

fn gen_data(args: GenData) -> Result<Outcome> {
    let raw = match &args.config {
        Some(p) => read_json(p)?,
        None => json!({}),
    };
    let mut spec: DatasetSpec = serde_json::from_value(raw.clone()).context("invalid dataset spec")?;
    if let Some(seed) = resolve_seed(args.seed, raw.get("seed").is_some())? {
        spec.seed = RandomSeed::with_stream(seed, "dataset");
    }
    macro_rules! set {
        ($($field:ident = $flag:expr),*) => { $(if let Some(v) = $flag { spec.$field = v; })* };
    }
    set!(
        n = args.n,
        d = args.d,
        intrinsic_dim = args.intrinsic_dim,
        geometry = args.geometry,
        noise = args.noise,
        extent = args.extent,
        planted_queries = args.queries,
        near_distance = args.near,
        far_distance = args.far
    );
    let data = gen_dataset(&spec)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let ext = if args.binary { "bin" } else { "txt" };
    write_points(&args.out.join(format!("points.{ext}")), &data.points)?;
    write_points(&args.out.join(format!("queries.{ext}")), &data.queries)?;
    fs::write(
        args.out.join("planted.json"),
        serde_json::to_string(&data.planted)? + "\n",
    )?;
    fs::write(args.out.join("spec.json"), serde_json::to_string_pretty(&spec)? + "\n")?;
    eprintln!(
        "wrote {} points and {} planted queries to {}",
        data.points.len(),
        data.queries.len(),
        args.out.display()
    );
    Ok(Outcome::Ok)
}

fn build(args: BuildIndex) -> Result<Outcome> {
    let points = read_points(&args.points)?;
    let config = IndexConfig {
        amplification: args.amplification,
        plan_constants: PlanConstants {
            zeta_cal: args.zeta_cal,
            exponent_cal: args.exponent_cal,
        },
        k: args.k,
        ..IndexConfig::new(args.epsilon, args.c, args.variant, args.fail_prob)
    };
    let seed = resolve_seed(args.seed, false)?.unwrap_or(1);
    let index = build_index(&points, &config, &RandomSeed::with_stream(seed, "index"))?;
    index.save(&args.out)?;
    eprintln!(
        "built {} index over {} points: k = {}, m = {}",
        args.variant,
        points.len(),
        index.k(),
        index.m()
    );
    Ok(Outcome::Ok)
}

fn query(args: Query) -> Result<Outcome> {
    let index = AnnIndex::load(&args.index)?;
    let queries = read_points(&args.queries)?;
    for (j, q) in queries.iter().enumerate() {
        let trace = index.query_traced(q)?;
        let distance = trace.answer.map(|p| l1_distance(index.points().point(p), q));
        let mut line = json!({ "query": j, "answer": trace.answer, "distance": distance });
        if args.trace {
            line["repetition"] = json!(trace.repetition);
            line["candidates"] = json!(trace.candidates);
            line["linear_scans"] = json!(trace.linear_scans);
        }
        println!("{line}");
    }
    Ok(Outcome::Ok)
}

fn verify(args: VerifyBounds) -> Result<Outcome> {
    let raw = match &args.config {
        Some(p) => read_json(p)?,
        None => json!({}),
    };
    let mut config: VerifyConfig = serde_json::from_value(raw.clone()).context("invalid verify config")?;
    if let Some(seed) = resolve_seed(args.seed, raw.get("seed").is_some())? {
        config.seed = seed;
    }
    if let Some(checks) = args.checks {
        config.checks = checks;
    }
    if let Some(profile) = args.profile {
        config.profile = profile;
    }
    config.timing |= args.timing;
    let outcome = run_verify(&config)?;
    emit(&outcome.records, args.out.as_deref())?;
    Ok(if outcome.pass {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed
    })
}

fn experiment(args: Experiment) -> Result<Outcome> {
    let raw = read_json(&args.config)?;
    let mut config: ExperimentConfig = serde_json::from_value(raw.clone()).context("invalid experiment config")?;
    if let Some(seed) = resolve_seed(args.seed, raw.get("seed").is_some())? {
        config.override_seed(seed);
    }
    config.timing |= args.timing;
    let records = run_experiment(&config)?;
    emit(&records, args.out.as_deref())?;
    Ok(if records.iter().all(|r| r.pass) {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed
    })
}

fn report(args: Report) -> Result<Outcome> {
    let text = fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let records = parse_jsonl(&text)?;
    if records.is_empty() {
        bail!("{} holds no records", args.file.display());
    }
    print!("{}", pretty(&records));
    let failed = records.iter().filter(|r| !r.pass).count();
    println!("{} records, {} failed", records.len(), failed);
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::BuildIndex(a) => build(a),
        Command::Query(a) => query(a),
        Command::VerifyBounds(a) => verify(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
