//! Dataset ingestion and the batch harness.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::ChatBackend;
use crate::metrics::{evaluate, MetricReport};
use crate::pipeline::{run_ten, PipelineConfig, PipelineResult};
use crate::table::{
    flatten_table, normalize_rectangular, parse_csv_table, parse_html_table, serialize_html, FlattenStyle, SourceText,
    Table,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Html,
    Csv,
    PairedText,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "html" => Ok(DatasetFormat::Html),
            "csv" => Ok(DatasetFormat::Csv),
            "paired-text" => Ok(DatasetFormat::PairedText),
            other => Err(format!("unknown dataset format {other:?} (expected html, csv or paired-text)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub source: SourceText,
    pub gold: Table,
    pub provenance: PathBuf,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("no tasks found in {0}")]
    NoTasksFound(PathBuf),
}

fn unreadable(path: &Path, reason: impl ToString) -> BenchError {
    BenchError::UnreadableFile { path: path.to_path_buf(), reason: reason.to_string() }
}

fn read(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|e| unreadable(path, e))
}

fn gold_from(path: &Path, text: &str, csv: bool) -> Result<Table, BenchError> {
    let t = if csv { parse_csv_table(text) } else { parse_html_table(text) };
    t.map(|t| normalize_rectangular(&t)).map_err(|e| unreadable(path, e))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| unreadable(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| unreadable(dir, e)))
        .collect::<Result<_, _>>()?;
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Loads tasks from `dir`, sorted by id.
///
/// `html` and `csv` read every `*.html` / `*.csv` file as a gold table and
/// flatten it into the source. `paired-text` reads either subdirectories
/// holding `input.txt` and `gold.html`, or sibling `<id>.txt` and `<id>.html`.
pub fn ingest_dataset(dir: &Path, format: DatasetFormat) -> Result<Vec<Task>, BenchError> {
    if !dir.is_dir() {
        return Err(unreadable(dir, "not a directory"));
    }
    let mut tasks = Vec::new();
    match format {
        DatasetFormat::Html | DatasetFormat::Csv => {
            let csv = format == DatasetFormat::Csv;
            for path in sorted_entries(dir)? {
                if !has_ext(&path, if csv { "csv" } else { "html" }) {
                    continue;
                }
                let gold = gold_from(&path, &read(&path)?, csv)?;
                let source = flatten_table(&gold, FlattenStyle::Ocr);
                tasks.push(Task { id: stem(&path), source, gold, provenance: path });
            }
        }
        DatasetFormat::PairedText => {
            for path in sorted_entries(dir)? {
                let (input, gold_path, id) = if path.is_dir() {
                    let (i, g) = (path.join("input.txt"), path.join("gold.html"));
                    if !i.is_file() && !g.is_file() {
                        continue;
                    }
                    let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    (i, g, id)
                } else if has_ext(&path, "txt") {
                    (path.clone(), path.with_extension("html"), stem(&path))
                } else {
                    continue;
                };
                let source = SourceText::new(read(&input)?);
                let gold = gold_from(&gold_path, &read(&gold_path)?, false)?;
                tasks.push(Task { id, source, gold, provenance: input });
            }
        }
    }
    if tasks.is_empty() {
        return Err(BenchError::NoTasksFound(dir.to_path_buf()));
    }
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(tasks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub metrics: MetricReport,
    pub iterations_used: usize,
    pub converged: bool,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub tasks: usize,
    pub errored: usize,
    pub converged: usize,
    /// Percentage of tasks with em = 1.
    pub em: f64,
    pub ted: f64,
    pub cvm: f64,
    pub colvm: f64,
    pub coverage: f64,
    pub hallucination: f64,
    pub mean_iterations: f64,
}

impl Aggregates {
    pub fn of(outcomes: &[TaskOutcome]) -> Self {
        let n = outcomes.len();
        let mean = |f: &dyn Fn(&TaskOutcome) -> f64| {
            if n == 0 {
                0.0
            } else {
                outcomes.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Aggregates {
            tasks: n,
            errored: outcomes.iter().filter(|o| o.error.is_some()).count(),
            converged: outcomes.iter().filter(|o| o.converged).count(),
            em: mean(&|o| f64::from(o.metrics.em) * 100.0),
            ted: mean(&|o| o.metrics.ted),
            cvm: mean(&|o| o.metrics.cvm),
            colvm: mean(&|o| o.metrics.colvm),
            coverage: mean(&|o| o.metrics.coverage),
            hallucination: mean(&|o| o.metrics.hallucination),
            mean_iterations: mean(&|o| o.iterations_used as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub wall_ms: u64,
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub per_task: Vec<TaskOutcome>,
    pub aggregates: Aggregates,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime: Option<RuntimeStats>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(MetricReport::TSV_HEADER);
        s.push('\n');
        for o in &self.per_task {
            s.push_str(&o.metrics.tsv_row(&o.task_id));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub parallelism: usize,
    /// Record wall-clock timings in the report.
    pub timings: bool,
    /// Per-task trace JSON and predicted HTML go here when set.
    pub out_dir: Option<PathBuf>,
}

fn run_task(
    task: &Task,
    cfg: &PipelineConfig,
    generator: &dyn ChatBackend,
    critic: &dyn ChatBackend,
    opts: &BenchOptions,
) -> TaskOutcome {
    let start = Instant::now();
    let result = run_ten(&task.source, cfg, generator, critic);
    let mut outcome = match &result {
        Ok(r) => TaskOutcome {
            task_id: task.id.clone(),
            metrics: evaluate(&r.final_table, &task.gold, &task.source),
            iterations_used: r.iterations_used,
            converged: r.converged,
            error: None,
            elapsed_ms: None,
        },
        Err(e) => TaskOutcome {
            task_id: task.id.clone(),
            metrics: MetricReport::worst(),
            iterations_used: 0,
            converged: false,
            error: Some(e.to_string()),
            elapsed_ms: None,
        },
    };
    if let (Some(dir), Ok(r)) = (&opts.out_dir, &result) {
        if let Err(e) = write_task_outputs(dir, &task.id, r) {
            outcome.error = Some(format!("writing outputs: {e}"));
        }
    }
    if opts.timings {
        outcome.elapsed_ms = Some(start.elapsed().as_millis() as u64);
    }
    outcome
}

fn write_task_outputs(dir: &Path, id: &str, r: &PipelineResult) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let trace = serde_json::to_string_pretty(&r.trace_json(id)).expect("trace serializes");
    fs::write(dir.join(format!("{id}.trace.json")), trace)?;
    fs::write(dir.join(format!("{id}.pred.html")), serialize_html(&r.final_table))
}

/// Runs every task on a pool of `opts.parallelism` workers. Task failures are
/// recorded in the report and never stop the batch.
pub fn run_bench(
    tasks: &[Task],
    cfg: &PipelineConfig,
    generator: &dyn ChatBackend,
    critic: &dyn ChatBackend,
    opts: &BenchOptions,
) -> BenchReport {
    let start = Instant::now();
    let workers = opts.parallelism.max(1).min(tasks.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<TaskOutcome>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let outcome = run_task(task, cfg, generator, critic, opts);
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(outcome);
            });
        }
    });
    let mut per_task: Vec<TaskOutcome> = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every task ran"))
        .collect();
    per_task.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    BenchReport {
        schema_version: SCHEMA_VERSION,
        aggregates: Aggregates::of(&per_task),
        per_task,
        runtime: opts
            .timings
            .then(|| RuntimeStats { wall_ms: start.elapsed().as_millis() as u64, parallelism: workers }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{LlmError, ScriptedBackend};
    use crate::table::serialize_csv;

    fn response(t: &Table) -> String {
        serde_json::json!({"tables": [{"$starting_token$": null, "$html_output$": serialize_html(t)}]}).to_string()
    }

    fn gold(n: usize) -> Table {
        let body: Vec<Vec<String>> = (0..3).map(|r| vec![format!("item{n}x{r}"), format!("{}", 100 + r)]).collect();
        Table::from_text(&[vec!["Name".to_string(), "Value".to_string()]], &body)
    }

    fn task(n: usize) -> Task {
        let g = gold(n);
        Task { id: format!("t{n}"), source: flatten_table(&g, FlattenStyle::Ocr), gold: g, provenance: PathBuf::new() }
    }

    /// Answers with the gold table whose source is embedded in the prompt.
    fn echo(tasks: Vec<Task>, broken: Vec<usize>) -> ScriptedBackend {
        ScriptedBackend::from_fn(move |prompt, _| {
            for (i, t) in tasks.iter().enumerate() {
                if prompt.contains(t.source.raw()) {
                    if broken.contains(&i) {
                        let mut g = t.gold.clone().into_parts();
                        g.1[0][0].text = "wrong".into();
                        return Ok(response(&Table::new(g.0, g.1)));
                    }
                    return Ok(response(&t.gold));
                }
            }
            Err(LlmError::ReplayMiss("none".into()))
        })
    }

    #[test]
    fn ingest_csv_and_html() {
        let dir = tempfile::tempdir().unwrap();
        for n in [2, 0, 1] {
            fs::write(dir.path().join(format!("t{n}.csv")), serialize_csv(&gold(n))).unwrap();
        }
        fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let tasks = ingest_dataset(dir.path(), DatasetFormat::Csv).unwrap();
        assert_eq!(tasks.iter().map(|t| t.id.as_str()).collect::<Vec<_>>(), ["t0", "t1", "t2"]);
        for t in &tasks {
            assert_eq!(t.source, flatten_table(&t.gold, FlattenStyle::Ocr));
        }
        assert!(matches!(ingest_dataset(dir.path(), DatasetFormat::Html), Err(BenchError::NoTasksFound(_))));
    }

    #[test]
    fn ingest_paired_text() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("bs");
        fs::create_dir(&sub).unwrap();
        fs::write(sub.join("input.txt"), "Particulars Note\r\nCash 1").unwrap();
        fs::write(sub.join("gold.html"), serialize_html(&gold(0))).unwrap();
        fs::write(dir.path().join("flat.txt"), "abc").unwrap();
        fs::write(dir.path().join("flat.html"), serialize_html(&gold(1))).unwrap();
        let tasks = ingest_dataset(dir.path(), DatasetFormat::PairedText).unwrap();
        assert_eq!(tasks.len(), 2);
        assert_eq!(tasks[0].id, "bs");
        assert!(tasks[0].source.raw().starts_with("Particulars Note"));
        assert_eq!(tasks[1].gold, gold(1));

        fs::remove_file(sub.join("gold.html")).unwrap();
        let err = ingest_dataset(dir.path(), DatasetFormat::PairedText).unwrap_err();
        assert!(matches!(&err, BenchError::UnreadableFile { path, .. } if path.ends_with("gold.html")), "{err}");
    }

    #[test]
    fn empty_and_missing_dirs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest_dataset(dir.path(), DatasetFormat::Csv), Err(BenchError::NoTasksFound(_))));
        let missing = dir.path().join("nope");
        assert!(matches!(ingest_dataset(&missing, DatasetFormat::Csv), Err(BenchError::UnreadableFile { .. })));
    }

    #[test]
    fn perfect_single_task() {
        let tasks = vec![task(0)];
        let b = echo(tasks.clone(), vec![]);
        let r = run_bench(&tasks, &PipelineConfig::default(), &b, &b, &BenchOptions::default());
        assert_eq!(r.aggregates.em, 100.0);
        assert_eq!(r.aggregates.ted, 0.0);
        assert_eq!(r.per_task[0].iterations_used, 1);
    }

    #[test]
    fn half_broken_batch() {
        let tasks: Vec<Task> = (0..4).map(task).collect();
        let b = echo(tasks.clone(), vec![1, 3]);
        let cfg = PipelineConfig { max_iterations: 1, ..Default::default() };
        let r = run_bench(&tasks, &cfg, &b, &b, &BenchOptions { parallelism: 3, ..Default::default() });
        assert_eq!(r.aggregates.em, 50.0);
        // Gold is 4×2 with a header row: one wrong cell out of 8.
        let expected = (100.0 + 700.0 / 8.0) / 2.0;
        assert!((r.aggregates.cvm - expected).abs() < 1e-9, "{}", r.aggregates.cvm);
    }

    #[test]
    fn missing_transcript_is_isolated() {
        let tasks: Vec<Task> = (0..3).map(task).collect();
        let b = echo(tasks[..2].to_vec(), vec![]);
        let r = run_bench(&tasks, &PipelineConfig::default(), &b, &b, &BenchOptions { parallelism: 2, ..Default::default() });
        assert_eq!(r.aggregates.errored, 1);
        assert!(r.per_task[2].error.as_deref().unwrap().contains("no recorded response"));
        assert_eq!(r.per_task[2].metrics, MetricReport::worst());
        assert_eq!(r.per_task[0].metrics.em, 1);
    }

    #[test]
    fn report_is_independent_of_parallelism() {
        let tasks: Vec<Task> = (0..6).map(task).collect();
        let b = echo(tasks.clone(), vec![2]);
        let cfg = PipelineConfig::default();
        let one = run_bench(&tasks, &cfg, &b, &b, &BenchOptions { parallelism: 1, ..Default::default() }).to_json();
        let four = run_bench(&tasks, &cfg, &b, &b, &BenchOptions { parallelism: 4, ..Default::default() }).to_json();
        assert_eq!(one, four);
        assert!(!one.contains("runtime"));
        let v: serde_json::Value = serde_json::from_str(&one).unwrap();
        assert_eq!(v["schema_version"], 1);
    }

    #[test]
    fn outputs_and_timings() {
        let dir = tempfile::tempdir().unwrap();
        let tasks = vec![task(0)];
        let b = echo(tasks.clone(), vec![]);
        let opts = BenchOptions { parallelism: 1, timings: true, out_dir: Some(dir.path().join("out")) };
        let r = run_bench(&tasks, &PipelineConfig::default(), &b, &b, &opts);
        assert!(r.runtime.is_some());
        assert!(r.per_task[0].elapsed_ms.is_some());
        let trace: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("out/t0.trace.json")).unwrap()).unwrap();
        assert_eq!(trace["task_id"], "t0");
        let pred = parse_html_table(&fs::read_to_string(dir.path().join("out/t0.pred.html")).unwrap()).unwrap();
        assert_eq!(pred, tasks[0].gold);
        assert_eq!(r.to_tsv().lines().count(), 2);
    }
}
