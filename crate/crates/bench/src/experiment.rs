//! Batched experiment runs: episodes per task with derived seeds, episode
//! transcripts, per-task result files, and a summary table in text and CSV.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use retrocollab_core::dialogue::{run_episode, Backends, EpisodeConfig, EpisodeResult};
use retrocollab_core::llm::{BackendConfig, LlmChannel};
use retrocollab_core::memory::TemplateStore;
use retrocollab_core::metrics::{compute_metrics, MetricsError, TaskMetrics};
use retrocollab_core::world::TaskId;

fn default_episodes_per_task() -> usize {
    15
}
fn default_parallelism() -> usize {
    1
}
fn default_memory_capacity() -> usize {
    2
}

/// One experiment: a set of tasks, episode counts and seeds, budget
/// overrides, the two backend configurations, and the output directory.
/// Mirrored one-to-one by the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub tasks: Vec<TaskId>,
    #[serde(default = "default_episodes_per_task")]
    pub episodes_per_task: usize,
    #[serde(default)]
    pub base_seed: i64,
    #[serde(default = "default_memory_capacity")]
    pub memory_capacity: usize,
    #[serde(default)]
    pub max_discussion_turns: Option<u32>,
    #[serde(default)]
    pub max_replans_per_step: Option<u32>,
    #[serde(default)]
    pub max_steps: Option<u32>,
    pub llm1: BackendConfig,
    pub llm2: BackendConfig,
    pub out_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("io error at `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Outcome of one episode inside a batch: a completed result or the engine
/// error that stopped it. A single failure never aborts the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum EpisodeRecord {
    Completed { result: EpisodeResult },
    EngineError { task_id: TaskId, seed: i64, error: String },
}

/// Per-task artifact written to `results/<task>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: TaskId,
    pub episodes: Vec<EpisodeRecord>,
    pub metrics: Option<TaskMetrics>,
}

/// Expand the `{task}` and `{seed}` placeholders a scripted backend's
/// `script_path` may carry, so one config can point every episode at its own
/// script file.
fn specialize_backend(config: &BackendConfig, task: TaskId, seed: i64) -> BackendConfig {
    let mut specialized = config.clone();
    if let Some(path) = &config.script_path {
        let expanded = path
            .to_string_lossy()
            .replace("{task}", task.as_str())
            .replace("{seed}", &seed.to_string());
        specialized.script_path = Some(PathBuf::from(expanded));
    }
    specialized
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Run every episode of the experiment, write artifacts under
/// `config.out_dir`, and return the per-task metrics in task order.
///
/// Artifacts: `transcripts/<task>_seed<seed>.jsonl` per episode,
/// `results/<task>.json` per task, and `summary.txt` / `summary.csv`.
pub fn run_experiment(
    config: &ExperimentConfig,
    templates: &TemplateStore,
) -> Result<Vec<TaskReport>, ExperimentError> {
    if config.tasks.is_empty() {
        return Err(ExperimentError::InvalidConfig("no tasks selected".into()));
    }
    if config.episodes_per_task == 0 {
        return Err(ExperimentError::InvalidConfig(
            "episodes_per_task must be >= 1".into(),
        ));
    }
    let transcripts_dir = config.out_dir.join("transcripts");
    let results_dir = config.out_dir.join("results");
    fs::create_dir_all(&transcripts_dir).map_err(io_err(&transcripts_dir))?;
    fs::create_dir_all(&results_dir).map_err(io_err(&results_dir))?;

    let jobs: Vec<(TaskId, i64)> = config
        .tasks
        .iter()
        .flat_map(|&task| {
            (0..config.episodes_per_task).map(move |ix| (task, config.base_seed + ix as i64))
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism.max(1))
        .build()
        .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let mut records: Vec<((TaskId, i64), EpisodeRecord)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(task, seed)| {
                let record = run_one(config, templates, &transcripts_dir, task, seed);
                ((task, seed), record)
            })
            .collect()
    });
    // Aggregation is ordered by (task order, seed) regardless of the
    // parallel completion order.
    records.sort_by_key(|((task, seed), _)| {
        (
            config.tasks.iter().position(|t| t == task).unwrap_or(usize::MAX),
            *seed,
        )
    });

    let mut reports = Vec::new();
    for &task in &config.tasks {
        let episodes: Vec<EpisodeRecord> = records
            .iter()
            .filter(|((t, _), _)| *t == task)
            .map(|(_, r)| r.clone())
            .collect();
        let completed: Vec<EpisodeResult> = episodes
            .iter()
            .filter_map(|r| match r {
                EpisodeRecord::Completed { result } => Some(result.clone()),
                EpisodeRecord::EngineError { .. } => None,
            })
            .collect();
        let metrics = if completed.is_empty() {
            None
        } else {
            Some(compute_metrics(&completed)?)
        };
        let report = TaskReport {
            task_id: task,
            episodes,
            metrics,
        };
        let path = results_dir.join(format!("{task}.json"));
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(&path, json).map_err(io_err(&path))?;
        reports.push(report);
    }

    let summary_txt = render_summary_text(&reports);
    let txt_path = config.out_dir.join("summary.txt");
    fs::write(&txt_path, summary_txt).map_err(io_err(&txt_path))?;
    let summary_csv = render_summary_csv(&reports);
    let csv_path = config.out_dir.join("summary.csv");
    fs::write(&csv_path, summary_csv).map_err(io_err(&csv_path))?;

    Ok(reports)
}

fn run_one(
    config: &ExperimentConfig,
    templates: &TemplateStore,
    transcripts_dir: &Path,
    task: TaskId,
    seed: i64,
) -> EpisodeRecord {
    let llm1_config = specialize_backend(&config.llm1, task, seed);
    let llm2_config = specialize_backend(&config.llm2, task, seed);
    let mut episode = EpisodeConfig::new(task, seed);
    episode.memory_capacity = config.memory_capacity;
    if let Some(turns) = config.max_discussion_turns {
        episode.max_discussion_turns = turns;
    }
    if let Some(replans) = config.max_replans_per_step {
        episode.max_replans_per_step = replans;
    }
    episode.max_steps = config.max_steps;
    episode.llm1_label = llm1_config.label();
    episode.llm2_label = llm2_config.label();

    let build = |cfg: &BackendConfig, channel| -> Result<_, String> {
        cfg.build(channel).map_err(|e| e.to_string())
    };
    let backends = build(&llm1_config, LlmChannel::Llm1).and_then(|llm1| {
        build(&llm2_config, LlmChannel::Llm2).map(|llm2| Backends { llm1, llm2 })
    });
    let mut backends = match backends {
        Ok(b) => b,
        Err(error) => {
            return EpisodeRecord::EngineError {
                task_id: task,
                seed,
                error,
            }
        }
    };
    let transcript_path = transcripts_dir.join(format!("{task}_seed{seed}.jsonl"));
    match run_episode(&episode, &mut backends, templates, &transcript_path) {
        Ok(result) => EpisodeRecord::Completed { result },
        Err(e) => EpisodeRecord::EngineError {
            task_id: task,
            seed,
            error: e.to_string(),
        },
    }
}

/// Text summary, one row per task in the benchmark's schema:
/// `success±se, steps, replans`.
pub fn render_summary_text(reports: &[TaskReport]) -> String {
    let mut out = String::from("Task, Success (frac), Steps, Replan, N\n");
    for report in reports {
        match &report.metrics {
            Some(m) => out.push_str(&format!(
                "{}: {}, n={}\n",
                report.task_id,
                m.table_row(),
                m.n
            )),
            None => out.push_str(&format!("{}: no completed episodes\n", report.task_id)),
        }
    }
    out
}

pub fn render_summary_csv(reports: &[TaskReport]) -> String {
    let mut out = String::from("task,success_rate,success_se,avg_steps,avg_replans,n\n");
    for report in reports {
        match &report.metrics {
            Some(m) => {
                let steps = m
                    .avg_steps
                    .map(|s| format!("{s:.1}"))
                    .unwrap_or_else(|| "n/a".into());
                out.push_str(&format!(
                    "{},{:.2},{:.2},{},{:.1},{}\n",
                    report.task_id, m.success_rate, m.success_se, steps, m.avg_replans, m.n
                ));
            }
            None => out.push_str(&format!("{},,,,,0\n", report.task_id)),
        }
    }
    out
}

/// Re-read the per-task result files under `out_dir/results` and recompute
/// their metrics from the persisted episodes, proving the aggregates are a
/// pure function of the stored results.
pub fn recompute_reports(out_dir: &Path) -> Result<Vec<TaskReport>, ExperimentError> {
    let results_dir = out_dir.join("results");
    let mut entries: Vec<PathBuf> = fs::read_dir(&results_dir)
        .map_err(io_err(&results_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    let mut reports = Vec::new();
    for path in entries {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let stored: TaskReport = serde_json::from_str(&text).map_err(|e| {
            ExperimentError::InvalidConfig(format!("bad report {}: {e}", path.display()))
        })?;
        let completed: Vec<EpisodeResult> = stored
            .episodes
            .iter()
            .filter_map(|r| match r {
                EpisodeRecord::Completed { result } => Some(result.clone()),
                EpisodeRecord::EngineError { .. } => None,
            })
            .collect();
        let metrics = if completed.is_empty() {
            None
        } else {
            Some(compute_metrics(&completed)?)
        };
        reports.push(TaskReport {
            task_id: stored.task_id,
            episodes: stored.episodes,
            metrics,
        });
    }
    Ok(reports)
}
