//! Harness-level behavior: batched runs with per-episode script files,
//! deterministic artifacts, recomputable aggregates, and seed isolation.

use std::fs;
use std::path::Path;

use retrocollab_bench::experiment::{recompute_reports, render_summary_text};
use retrocollab_bench::oracle::oracle_scripts;
use retrocollab_bench::{run_experiment, EpisodeRecord, ExperimentConfig};
use retrocollab_core::llm::BackendConfig;
use retrocollab_core::memory::TemplateStore;
use retrocollab_core::world::TaskId;

/// Write per-(task, seed) oracle scripts in the layout the `{task}`/`{seed}`
/// path template expects.
fn write_scripts(dir: &Path, tasks: &[TaskId], seeds: std::ops::Range<i64>) {
    for &task in tasks {
        for seed in seeds.clone() {
            let scripts = oracle_scripts(task, seed);
            for (suffix, entries) in [("llm1", &scripts.llm1), ("llm2", &scripts.llm2)] {
                let path = dir.join(format!("{task}_seed{seed}_{suffix}.json"));
                fs::write(&path, serde_json::to_string(entries).unwrap()).unwrap();
            }
        }
    }
}

fn scripted_config(scripts_dir: &Path, out_dir: &Path, tasks: Vec<TaskId>) -> ExperimentConfig {
    let template = |suffix: &str| {
        scripts_dir
            .join(format!("{{task}}_seed{{seed}}_{suffix}.json"))
            .to_string_lossy()
            .to_string()
    };
    ExperimentConfig {
        tasks,
        episodes_per_task: 5,
        base_seed: 0,
        memory_capacity: 2,
        max_discussion_turns: None,
        max_replans_per_step: None,
        max_steps: None,
        llm1: BackendConfig::scripted(template("llm1")),
        llm2: BackendConfig::scripted(template("llm2")),
        out_dir: out_dir.to_path_buf(),
        parallelism: 2,
    }
}

#[test]
fn scripted_batch_yields_perfect_metrics_and_recomputable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let scripts_dir = dir.path().join("scripts");
    fs::create_dir_all(&scripts_dir).unwrap();
    let tasks = vec![TaskId::SortCubes, TaskId::MoveRope];
    write_scripts(&scripts_dir, &tasks, 0..15);

    let out = dir.path().join("out");
    let mut config = scripted_config(&scripts_dir, &out, tasks.clone());
    config.episodes_per_task = 15;
    let templates = TemplateStore::embedded();
    let reports = run_experiment(&config, &templates).unwrap();

    assert_eq!(reports.len(), 2);
    for report in &reports {
        let metrics = report.metrics.as_ref().unwrap();
        assert_eq!(metrics.n, 15);
        assert_eq!(metrics.success_rate, 1.0);
        assert_eq!(metrics.avg_replans, 0.0);
        assert_eq!(metrics.success_cell(), "1.00±0.00");
        assert_eq!(report.episodes.len(), 15);
        for episode in &report.episodes {
            match episode {
                EpisodeRecord::Completed { result } => {
                    assert!(result.transcript_path.exists())
                }
                EpisodeRecord::EngineError { error, .. } => panic!("engine error: {error}"),
            }
        }
    }

    // Aggregates recompute from the persisted files to the same values.
    let recomputed = recompute_reports(&out).unwrap();
    let stored_rows: Vec<String> = reports
        .iter()
        .map(|r| r.metrics.as_ref().unwrap().table_row())
        .collect();
    let mut recomputed_rows: Vec<(TaskId, String)> = recomputed
        .iter()
        .map(|r| (r.task_id, r.metrics.as_ref().unwrap().table_row()))
        .collect();
    recomputed_rows.sort_by_key(|(t, _)| tasks.iter().position(|x| x == t).unwrap());
    assert_eq!(
        stored_rows,
        recomputed_rows.into_iter().map(|(_, row)| row).collect::<Vec<_>>()
    );
    assert!(out.join("summary.txt").exists());
    assert!(out.join("summary.csv").exists());
}

#[test]
fn identical_configs_produce_identical_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let scripts_dir = dir.path().join("scripts");
    fs::create_dir_all(&scripts_dir).unwrap();
    write_scripts(&scripts_dir, &[TaskId::MakeSandwich], 0..5);

    let run = |out: &Path| {
        let config = scripted_config(&scripts_dir, out, vec![TaskId::MakeSandwich]);
        run_experiment(&config, &TemplateStore::embedded()).unwrap();
        (
            fs::read(out.join("summary.txt")).unwrap(),
            fs::read(out.join("summary.csv")).unwrap(),
            fs::read(out.join("results/make_sandwich.json")).unwrap(),
        )
    };
    let first = run(&dir.path().join("a"));
    let second = run(&dir.path().join("b"));
    // Transcript paths differ between output dirs; everything else is
    // byte-identical, and the transcripts themselves match too.
    assert_eq!(first.0, second.0);
    assert_eq!(first.1, second.1);
    let t1 = fs::read(dir.path().join("a/transcripts/make_sandwich_seed2.jsonl")).unwrap();
    let t2 = fs::read(dir.path().join("b/transcripts/make_sandwich_seed2.jsonl")).unwrap();
    assert_eq!(t1, t2);
}

#[test]
fn episode_outcome_is_independent_of_the_batch_around_it() {
    let dir = tempfile::tempdir().unwrap();
    let scripts_dir = dir.path().join("scripts");
    fs::create_dir_all(&scripts_dir).unwrap();
    write_scripts(&scripts_dir, &[TaskId::SweepFloor], 0..3);

    let batch_out = dir.path().join("batch");
    let mut batch = scripted_config(&scripts_dir, &batch_out, vec![TaskId::SweepFloor]);
    batch.episodes_per_task = 3;
    let batch_reports = run_experiment(&batch, &TemplateStore::embedded()).unwrap();

    let solo_out = dir.path().join("solo");
    let mut solo = scripted_config(&scripts_dir, &solo_out, vec![TaskId::SweepFloor]);
    solo.episodes_per_task = 1;
    solo.base_seed = 1;
    let solo_reports = run_experiment(&solo, &TemplateStore::embedded()).unwrap();

    let from_batch = match &batch_reports[0].episodes[1] {
        EpisodeRecord::Completed { result } => result.clone(),
        other => panic!("unexpected {other:?}"),
    };
    let solo_result = match &solo_reports[0].episodes[0] {
        EpisodeRecord::Completed { result } => result.clone(),
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(from_batch.seed, 1);
    assert!(from_batch.same_outcome(&solo_result));
}

#[test]
fn failed_episodes_replay_faithfully_too() {
    use retrocollab_bench::replay_episode;
    use retrocollab_core::dialogue::{run_episode, Backends, EpisodeConfig, FailureReason};
    use retrocollab_core::llm::{ScriptEntry, ScriptedBackend};

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("failed.jsonl");
    let mut config = EpisodeConfig::new(TaskId::MoveRope, 3);
    config.max_discussion_turns = 1;
    let chatter = |i: usize| ScriptEntry::new(format!("musing {i}, no plan"));
    let mut backends = Backends {
        llm1: Box::new(ScriptedBackend::from_entries((0..6).map(chatter).collect())),
        llm2: Box::new(ScriptedBackend::from_entries(
            (0..6).map(|i| ScriptEntry::new(format!("retro {i}"))).collect(),
        )),
    };
    let templates = TemplateStore::embedded();
    let recorded = run_episode(&config, &mut backends, &templates, &path).unwrap();
    assert_eq!(recorded.failure_reason, Some(FailureReason::ReplanBudget));

    let replayed = replay_episode(&path, &templates, None).unwrap();
    assert!(recorded.same_outcome(&replayed));
}

#[test]
fn example_config_file_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/experiment.example.json");
    let text = fs::read_to_string(path).unwrap();
    let config: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(config.tasks.len(), 5);
    assert_eq!(config.episodes_per_task, 15);
    assert_eq!(config.memory_capacity, 2);
}

#[test]
fn missing_script_is_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = ExperimentConfig {
        tasks: vec![TaskId::SortCubes],
        episodes_per_task: 2,
        base_seed: 0,
        memory_capacity: 2,
        max_discussion_turns: None,
        max_replans_per_step: None,
        max_steps: None,
        llm1: BackendConfig::scripted("/nonexistent/{task}_{seed}.json"),
        llm2: BackendConfig::scripted("/nonexistent/{task}_{seed}.json"),
        out_dir: out.clone(),
        parallelism: 1,
    };
    let reports = run_experiment(&config, &TemplateStore::embedded()).unwrap();
    assert_eq!(reports[0].episodes.len(), 2);
    assert!(reports[0]
        .episodes
        .iter()
        .all(|e| matches!(e, EpisodeRecord::EngineError { .. })));
    assert!(reports[0].metrics.is_none());
    assert!(render_summary_text(&reports).contains("no completed episodes"));
}
