//! Command-line harness: run experiment batches, re-render reports from
//! persisted results, replay recorded transcripts, and regenerate the
//! scripted optimal policies.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use retrocollab_bench::experiment::{render_summary_text, recompute_reports};
use retrocollab_bench::oracle::{oracle_scripts, retrospect_demo_scripts};
use retrocollab_bench::{replay_episode, run_experiment, ExperimentConfig};
use retrocollab_core::llm::BackendConfig;
use retrocollab_core::memory::TemplateStore;
use retrocollab_core::world::{TaskId, ALL_TASKS};

#[derive(Parser)]
#[command(
    name = "retrocollab",
    about = "Multi-robot collaboration benchmark with retrospective replanning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of episodes and write transcripts, results, and summaries.
    Run(Box<RunArgs>),
    /// Recompute and print the summary table from a results directory.
    Report {
        /// Experiment output directory (the `run --out` value).
        #[arg(long = "in", value_name = "DIR")]
        in_dir: PathBuf,
    },
    /// Re-execute a recorded transcript offline and verify it reproduces.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        /// Where to write the regenerated transcript (temp file if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Load prompt templates from a directory instead of the built-ins.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Regenerate the scripted optimal-policy files.
    GenScripts {
        /// Tasks to generate (default: all five).
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<TaskId>,
        #[arg(long, default_value_t = 0)]
        seed: i64,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Also write the retrospection demo scripts (move_rope).
        #[arg(long)]
        demo: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file mirroring the experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated task list.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<TaskId>,
    /// Episodes per task.
    #[arg(long)]
    episodes: Option<usize>,
    /// Base seed; episode i uses seed base+i.
    #[arg(long)]
    seed: Option<i64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Long-term memory capacity in rounds.
    #[arg(long)]
    memory_capacity: Option<usize>,
    #[arg(long)]
    max_discussion_turns: Option<u32>,
    #[arg(long)]
    max_replans_per_step: Option<u32>,
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Scripted backend for the discussion model; `{task}`/`{seed}` expand
    /// per episode.
    #[arg(long, value_name = "PATH")]
    llm1_script: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    llm2_script: Option<PathBuf>,
    /// OpenAI-compatible endpoint base URL for the discussion model.
    #[arg(long, value_name = "URL")]
    llm1_url: Option<String>,
    #[arg(long, value_name = "NAME")]
    llm1_model: Option<String>,
    /// Environment variable holding the bearer token for llm1.
    #[arg(long, value_name = "ENV")]
    llm1_key_env: Option<String>,
    #[arg(long, value_name = "URL")]
    llm2_url: Option<String>,
    #[arg(long, value_name = "NAME")]
    llm2_model: Option<String>,
    #[arg(long, value_name = "ENV")]
    llm2_key_env: Option<String>,
    /// Load prompt templates from a directory instead of the built-ins.
    #[arg(long)]
    templates: Option<PathBuf>,
}

fn backend_from_flags(
    script: Option<PathBuf>,
    url: Option<String>,
    model: Option<String>,
    key_env: Option<String>,
) -> Result<Option<BackendConfig>> {
    match (script, url, model) {
        (Some(path), None, None) => Ok(Some(BackendConfig::scripted(path))),
        (None, Some(url), Some(model)) => {
            let mut config = BackendConfig::http(url, model);
            config.api_key_env = key_env;
            Ok(Some(config))
        }
        (None, None, None) => Ok(None),
        (None, Some(_), None) | (None, None, Some(_)) => {
            bail!("an http backend needs both --llmN-url and --llmN-model")
        }
        (Some(_), _, _) => bail!("give either a script path or an http endpoint, not both"),
    }
}

fn load_templates(dir: &Option<PathBuf>) -> Result<TemplateStore> {
    match dir {
        None => Ok(TemplateStore::embedded()),
        Some(path) => TemplateStore::load(path)
            .with_context(|| format!("loading templates from {}", path.display())),
    }
}

fn run_command(args: RunArgs) -> Result<()> {
    let mut config: Option<ExperimentConfig> = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            Some(serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?)
        }
        None => None,
    };

    let llm1_flags = backend_from_flags(
        args.llm1_script.clone(),
        args.llm1_url.clone(),
        args.llm1_model.clone(),
        args.llm1_key_env.clone(),
    )?;
    let llm2_flags = backend_from_flags(
        args.llm2_script.clone(),
        args.llm2_url.clone(),
        args.llm2_model.clone(),
        args.llm2_key_env.clone(),
    )?;

    if config.is_none() {
        let (Some(llm1), Some(llm2)) = (llm1_flags.clone(), llm2_flags.clone()) else {
            bail!("without --config, both backends must be given via flags");
        };
        let tasks = if args.tasks.is_empty() {
            ALL_TASKS.to_vec()
        } else {
            args.tasks.clone()
        };
        let Some(out) = args.out.clone() else {
            bail!("--out is required without --config");
        };
        config = Some(ExperimentConfig {
            tasks,
            episodes_per_task: 15,
            base_seed: 0,
            memory_capacity: 2,
            max_discussion_turns: None,
            max_replans_per_step: None,
            max_steps: None,
            llm1,
            llm2,
            out_dir: out,
            parallelism: 1,
        });
    }
    let mut config = config.unwrap();

    if !args.tasks.is_empty() {
        config.tasks = args.tasks.clone();
    }
    if let Some(v) = args.episodes {
        config.episodes_per_task = v;
    }
    if let Some(v) = args.seed {
        config.base_seed = v;
    }
    if let Some(v) = args.out.clone() {
        config.out_dir = v;
    }
    if let Some(v) = args.memory_capacity {
        config.memory_capacity = v;
    }
    if let Some(v) = args.max_discussion_turns {
        config.max_discussion_turns = Some(v);
    }
    if let Some(v) = args.max_replans_per_step {
        config.max_replans_per_step = Some(v);
    }
    if let Some(v) = args.max_steps {
        config.max_steps = Some(v);
    }
    if let Some(v) = args.parallelism {
        config.parallelism = v;
    }
    if let Some(b) = llm1_flags {
        config.llm1 = b;
    }
    if let Some(b) = llm2_flags {
        config.llm2 = b;
    }

    let templates = load_templates(&args.templates)?;
    let reports = run_experiment(&config, &templates)?;
    print!("{}", render_summary_text(&reports));
    println!("artifacts written to {}", config.out_dir.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run_command(*args),
        Command::Report { in_dir } => {
            let reports = recompute_reports(&in_dir)?;
            print!("{}", render_summary_text(&reports));
            Ok(())
        }
        Command::Replay {
            transcript,
            out,
            templates,
        } => {
            let templates = load_templates(&templates)?;
            let result = replay_episode(&transcript, &templates, out.as_deref())?;
            println!(
                "replay ok: task={} seed={} success={} steps={} replans={}",
                result.task_id, result.seed, result.success, result.steps, result.replans
            );
            Ok(())
        }
        Command::GenScripts {
            tasks,
            seed,
            out,
            demo,
        } => {
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let tasks = if tasks.is_empty() {
                ALL_TASKS.to_vec()
            } else {
                tasks
            };
            for task in tasks {
                let scripts = oracle_scripts(task, seed);
                for (suffix, entries) in [("llm1", &scripts.llm1), ("llm2", &scripts.llm2)] {
                    let path = out.join(format!("{task}_seed{seed}_{suffix}.json"));
                    std::fs::write(&path, serde_json::to_string_pretty(entries)?)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {}", path.display());
                }
            }
            if demo {
                let scripts = retrospect_demo_scripts(seed);
                for (suffix, entries) in [("llm1", &scripts.llm1), ("llm2", &scripts.llm2)] {
                    let path = out.join(format!("demo_retrospect_seed{seed}_{suffix}.json"));
                    std::fs::write(&path, serde_json::to_string_pretty(entries)?)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {}", path.display());
                }
            }
            Ok(())
        }
    }
}
