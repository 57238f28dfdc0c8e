mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ten_core::bench::{ingest_dataset, run_bench, BenchOptions, DatasetFormat};
use ten_core::checker::SanityChecker;
use ten_core::llm::{BackendConfig, ChatBackend, HttpBackend, PromptKind, RecordingBackend, ReplayBackend, TranscriptStore};
use ten_core::metrics::{evaluate, MetricReport};
use ten_core::pipeline::{run_ten, FinalSelection, PipelineConfig};
use ten_core::table::{
    concat_partial_tables, flatten_table, parse_csv_table, parse_extraction_json, parse_html_table, serialize_csv,
    serialize_html, FlattenStyle, SourceText, Table,
};

use config::{FileConfig, LIVE_TASK_TIMEOUT_SECS};

#[derive(Parser)]
#[command(name = "ten", version, about = "Recover explicit tables from flattened text")]
struct Cli {
    /// TOML file with pipeline, threshold and backend settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on one text file.
    Extract(ExtractArgs),
    /// Run the sanity checker on a table.
    Check(CheckArgs),
    /// Compare a predicted table with a gold table.
    Eval(EvalArgs),
    /// Run the pipeline over a dataset directory.
    Bench(BenchArgs),
}

#[derive(Args)]
struct BackendArgs {
    /// Answer only from the transcript store.
    #[arg(long, conflicts_with = "record")]
    replay: bool,
    /// Call the live backend, caching every exchange in the transcript store.
    #[arg(long)]
    record: bool,
    /// Transcript store directory (overrides TEN_CACHE_DIR).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Return the last parsed candidate instead of the best one.
    #[arg(long)]
    last_iteration: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_iterations: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenPrompt {
    Sd,
    Base,
    Cot,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Html,
    Csv,
    Json,
}

#[derive(Args)]
struct ExtractArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    prompt: Option<GenPrompt>,
    #[arg(long, value_enum, default_value = "html")]
    out: OutFormat,
    /// Also write the iteration trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct CheckArgs {
    /// Table as .html, .csv or extraction .json.
    table: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    pred: PathBuf,
    gold: PathBuf,
    /// Source text for coverage and hallucination; defaults to the gold table flattened.
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Html,
    Csv,
    PairedText,
}

#[derive(Args)]
struct BenchArgs {
    dir: PathBuf,
    #[arg(long, value_enum)]
    format: FormatArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    parallel: u64,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-task traces and predicted tables go here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    backend: BackendArgs,
}

enum Failure {
    Usage(String),
    Task(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Task(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_table(path: &Path) -> Result<Table, Failure> {
    let text = read_text(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let parsed = match ext.as_str() {
        "csv" => parse_csv_table(&text),
        "json" => parse_extraction_json(&text).and_then(|r| concat_partial_tables(&r)),
        _ => parse_html_table(&text),
    };
    parsed.map_err(|e| Failure::Usage(format!("cannot parse table {}: {e}", path.display())))
}

struct Backends {
    generator: Box<dyn ChatBackend>,
    critic: Box<dyn ChatBackend>,
}

fn build_backends(file: &FileConfig, args: &BackendArgs, cfg: &mut PipelineConfig) -> Result<Backends, Failure> {
    if args.last_iteration {
        cfg.selection = FinalSelection::LastIteration;
    }
    if let Some(n) = args.max_iterations {
        cfg.max_iterations = n as usize;
    }
    if !args.replay && cfg.task_timeout_secs.is_none() {
        cfg.task_timeout_secs = Some(LIVE_TASK_TIMEOUT_SECS);
    }
    let store = if args.replay || args.record {
        let dir = file.resolve_cache_dir(args.cache_dir.as_deref()).ok_or_else(|| {
            Failure::Usage("--replay and --record need --cache-dir or TEN_CACHE_DIR".into())
        })?;
        let store = if args.replay { TranscriptStore::open_existing(&dir) } else { TranscriptStore::open(&dir) };
        Some(Arc::new(store.map_err(|e| Failure::Usage(e.to_string()))?))
    } else {
        None
    };
    let make = |bc: &BackendConfig| -> Result<Box<dyn ChatBackend>, Failure> {
        if args.replay {
            let store = store.clone().expect("replay has a store");
            return Ok(Box::new(ReplayBackend::new(store, bc.model_id.clone(), bc.params())));
        }
        let http = HttpBackend::new(bc.clone()).map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(match &store {
            Some(store) => Box::new(RecordingBackend::new(http, store.clone())),
            None => Box::new(http),
        })
    };
    Ok(Backends { generator: make(&cfg.generator)?, critic: make(cfg.critic_config())? })
}

fn extract(file: &FileConfig, args: &ExtractArgs) -> CmdResult {
    let source = SourceText::new(read_text(&args.input)?);
    let mut cfg = file.pipeline.clone();
    if let Some(p) = args.prompt {
        cfg.generation_prompt = match p {
            GenPrompt::Sd => PromptKind::StructuralDecomposition,
            GenPrompt::Base => PromptKind::Baseline,
            GenPrompt::Cot => PromptKind::ChainOfThought,
        };
    }
    let b = build_backends(file, &args.backend, &mut cfg)?;
    let result = run_ten(&source, &cfg, b.generator.as_ref(), b.critic.as_ref())
        .map_err(|e| Failure::Task(e.to_string()))?;
    let id = args.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let trace = serde_json::to_string_pretty(&result.trace_json(&id)).expect("trace serializes");
    if let Some(path) = &args.trace {
        fs::write(path, &trace).map_err(|e| Failure::Task(format!("cannot write {}: {e}", path.display())))?;
    }
    match args.out {
        OutFormat::Html => println!("{}", serialize_html(&result.final_table)),
        OutFormat::Csv => print!("{}", serialize_csv(&result.final_table)),
        OutFormat::Json => println!("{trace}"),
    }
    if !result.converged {
        eprintln!(
            "not converged after {} iterations; returning iteration {}",
            result.iterations_used, result.final_iteration
        );
    }
    Ok(())
}

fn check(args: &CheckArgs) -> CmdResult {
    let table = load_table(&args.table)?;
    let source = SourceText::new(read_text(&args.source)?);
    let report = SanityChecker::default().run(&source, &table);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(());
    }
    if report.violations.is_empty() {
        println!("no violations");
    }
    for v in &report.violations {
        println!("{v}");
    }
    println!(
        "coverage={:.4} hallucination={:.4} goodness={:.4} badness={:.4}",
        report.coverage, report.hallucination_rate, report.goodness_score, report.badness_score
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> CmdResult {
    let pred = load_table(&args.pred)?;
    let gold = load_table(&args.gold)?;
    let source = match &args.source {
        Some(p) => SourceText::new(read_text(p)?),
        None => flatten_table(&gold, FlattenStyle::Ocr),
    };
    let m: MetricReport = evaluate(&pred, &gold, &source);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&m).expect("report serializes"));
    } else {
        println!(
            "em={} ted={:.6} cvm={:.4} colvm={:.4} coverage={:.4} hallucination={:.4}",
            m.em, m.ted, m.cvm, m.colvm, m.coverage, m.hallucination
        );
    }
    Ok(())
}

fn bench(file: &FileConfig, args: &BenchArgs) -> CmdResult {
    let format = match args.format {
        FormatArg::Html => DatasetFormat::Html,
        FormatArg::Csv => DatasetFormat::Csv,
        FormatArg::PairedText => DatasetFormat::PairedText,
    };
    let tasks = ingest_dataset(&args.dir, format).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut cfg = file.pipeline.clone();
    let b = build_backends(file, &args.backend, &mut cfg)?;
    let opts = BenchOptions { parallelism: args.parallel as usize, timings: args.timings, out_dir: args.out_dir.clone() };
    let report = run_bench(&tasks, &cfg, b.generator.as_ref(), b.critic.as_ref(), &opts);
    let json = report.to_json();
    match &args.report {
        Some(path) => fs::write(path, &json).map_err(|e| Failure::Task(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{json}"),
    }
    let a = &report.aggregates;
    eprintln!(
        "{} tasks, {} errored: EM {:.2} TED {:.4} C.V.M. {:.2} Col.V.M. {:.2}",
        a.tasks, a.errored, a.em, a.ted, a.cvm, a.colvm
    );
    if a.errored > 0 {
        return Err(Failure::Task(format!("{} of {} tasks failed", a.errored, a.tasks)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = FileConfig::load(cli.config.as_deref()).map_err(Failure::Usage).and_then(|file| match &cli.command {
        Command::Extract(a) => extract(&file, a),
        Command::Check(a) => check(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(&file, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Task(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
