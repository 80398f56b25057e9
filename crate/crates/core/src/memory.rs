//! Short-term round records, the bounded long-term memory, and the prompt
//! constructor that assembles them into backend requests.
//!
//! A round record is the complete short-term memory of one planning round:
//! the dialogue transcript, the validation outcome, the critique/proposal
//! pair from retrospection, and any environment feedback. Long-term memory
//! keeps only the most recent `capacity` records (default 2) and is the only
//! history future prompts see.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::validation::ValidationReport;
use crate::world::{Observation, TaskId, TaskSpec};

/// One round's complete short-term memory (`S_t`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u32,
    /// Ordered (agent, message) pairs of the discussion.
    pub transcript: Vec<(String, String)>,
    pub validation: ValidationReport,
    pub critique: Option<String>,
    pub proposal: Option<String>,
    pub env_feedback: Option<String>,
}

impl RoundRecord {
    pub fn new(
        round_index: u32,
        transcript: Vec<(String, String)>,
        validation: ValidationReport,
    ) -> Self {
        RoundRecord {
            round_index,
            transcript,
            validation,
            critique: None,
            proposal: None,
            env_feedback: None,
        }
    }

    /// Stable text rendering used in round-history sections and in the
    /// retrospection prompts.
    pub fn rendered(&self) -> String {
        let mut out = format!("[Round {}]\nDiscussion:\n", self.round_index);
        for (agent, message) in &self.transcript {
            out.push_str(&format!("{agent}: {message}\n"));
        }
        if self.validation.ok {
            out.push_str("Validation: the plan passed all checks.\n");
        } else {
            out.push_str(&format!(
                "Validation feedback:\n{}\n",
                self.validation.feedback_text
            ));
        }
        if let Some(critique) = &self.critique {
            out.push_str(&format!("Critique:\n{critique}\n"));
        }
        if let Some(proposal) = &self.proposal {
            out.push_str(&format!("Proposal:\n{proposal}\n"));
        }
        if let Some(env) = &self.env_feedback {
            out.push_str(&format!("Environment feedback:\n{env}\n"));
        }
        out
    }
}

/// Bounded store of the most recent round records (`M`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongTermMemory {
    capacity: usize,
    records: Vec<RoundRecord>,
}

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("round index {attempted} is not greater than the last committed index {last}")]
    NonMonotoneRound { last: u32, attempted: u32 },
    #[error("missing prompt template `{0}`")]
    MissingTemplate(String),
    #[error("failed to read template `{key}`: {source}")]
    TemplateIo {
        key: String,
        #[source]
        source: std::io::Error,
    },
}

impl LongTermMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "memory capacity must be at least 1");
        LongTermMemory {
            capacity,
            records: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&RoundRecord> {
        self.records.last()
    }

    /// Append a record and evict the oldest entries beyond capacity.
    pub fn commit_round(&mut self, record: RoundRecord) -> Result<(), MemoryError> {
        if let Some(last) = self.records.last() {
            if record.round_index <= last.round_index {
                return Err(MemoryError::NonMonotoneRound {
                    last: last.round_index,
                    attempted: record.round_index,
                });
            }
        }
        self.records.push(record);
        while self.records.len() > self.capacity {
            self.records.remove(0);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptRole {
    AgentDiscussion,
    Critic,
    Proposer,
}

/// A fully assembled prompt: named sections in a fixed order plus their
/// rendered concatenation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub role: PromptRole,
    pub sections: Vec<(String, String)>,
    pub rendered: String,
}

fn render_sections(role: PromptRole, sections: Vec<(String, String)>) -> PromptText {
    let mut rendered = String::new();
    for (name, body) in &sections {
        rendered.push_str(&format!(
            "== {} ==\n{}\n\n",
            name.to_uppercase(),
            body.trim_end()
        ));
    }
    PromptText {
        role,
        sections,
        rendered,
    }
}

/// Fixed per-task section templates, checked into the repo as plain text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateStore {
    by_key: BTreeMap<String, String>,
}

const TASK_TEMPLATE_KINDS: [&str; 2] = ["agent_capability", "communication_guidelines"];

impl TemplateStore {
    /// The templates compiled into the binary (the checked-in defaults).
    pub fn embedded() -> Self {
        macro_rules! task_templates {
            ($map:expr, $task:literal) => {
                $map.insert(
                    concat!($task, "/agent_capability").to_string(),
                    include_str!(concat!("../templates/", $task, "/agent_capability.txt"))
                        .to_string(),
                );
                $map.insert(
                    concat!($task, "/communication_guidelines").to_string(),
                    include_str!(concat!(
                        "../templates/",
                        $task,
                        "/communication_guidelines.txt"
                    ))
                    .to_string(),
                );
            };
        }
        let mut by_key = BTreeMap::new();
        by_key.insert(
            "critic_instruction".to_string(),
            include_str!("../templates/critic_instruction.txt").to_string(),
        );
        by_key.insert(
            "proposer_instruction".to_string(),
            include_str!("../templates/proposer_instruction.txt").to_string(),
        );
        task_templates!(by_key, "arrange_cabinet");
        task_templates!(by_key, "sweep_floor");
        task_templates!(by_key, "make_sandwich");
        task_templates!(by_key, "sort_cubes");
        task_templates!(by_key, "move_rope");
        TemplateStore { by_key }
    }

    /// Load templates from a directory laid out like `crates/core/templates`.
    pub fn load(dir: &Path) -> Result<Self, MemoryError> {
        let mut by_key = BTreeMap::new();
        for key in ["critic_instruction", "proposer_instruction"] {
            let path = dir.join(format!("{key}.txt"));
            let text =
                std::fs::read_to_string(&path).map_err(|source| MemoryError::TemplateIo {
                    key: key.to_string(),
                    source,
                })?;
            by_key.insert(key.to_string(), text);
        }
        for task in crate::world::ALL_TASKS {
            for kind in TASK_TEMPLATE_KINDS {
                let key = format!("{task}/{kind}");
                let path = dir.join(task.as_str()).join(format!("{kind}.txt"));
                let text =
                    std::fs::read_to_string(&path).map_err(|source| MemoryError::TemplateIo {
                        key: key.clone(),
                        source,
                    })?;
                by_key.insert(key, text);
            }
        }
        Ok(TemplateStore { by_key })
    }

    fn get(&self, key: &str) -> Result<&str, MemoryError> {
        self.by_key
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| MemoryError::MissingTemplate(key.to_string()))
    }

    fn task_template(&self, task: TaskId, kind: &str) -> Result<&str, MemoryError> {
        self.get(&format!("{task}/{kind}"))
    }
}

/// Role-specific ingredients for [`construct_prompt`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptInputs<'a> {
    /// The requesting agent's observation (agent discussion only).
    pub observation: Option<&'a Observation>,
    /// The agent receiving the prompt (agent discussion only).
    pub agent_name: Option<&'a str>,
    /// The in-progress round record (critic and proposer).
    pub short_term: Option<&'a RoundRecord>,
    /// The critic's output (proposer only).
    pub critique: Option<&'a str>,
}

fn round_history_body(memory: &LongTermMemory) -> String {
    if memory.records().is_empty() {
        "none".to_string()
    } else {
        memory
            .records()
            .iter()
            .map(|r| r.rendered())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn feedback_body(memory: &LongTermMemory) -> String {
    match memory.last() {
        None => "none".to_string(),
        Some(record) => {
            let mut body = if record.validation.ok {
                "The last plan passed validation.".to_string()
            } else {
                record.validation.feedback_text.clone()
            };
            if let Some(env) = &record.env_feedback {
                body.push('\n');
                body.push_str(env);
            }
            body
        }
    }
}

/// Assemble the prompt for one backend request.
///
/// Agent-discussion prompts contain exactly these sections, in order: task
/// context, round history, agent capability, communication guidelines,
/// observation, feedback. The critic sees the task context and the current
/// round; the proposer additionally sees the critique it must turn into
/// concrete plan changes.
pub fn construct_prompt(
    role: PromptRole,
    task_description: &str,
    memory: &LongTermMemory,
    spec: &TaskSpec,
    templates: &TemplateStore,
    inputs: PromptInputs<'_>,
) -> Result<PromptText, MemoryError> {
    let sections = match role {
        PromptRole::AgentDiscussion => {
            let observation = inputs
                .observation
                .expect("agent discussion prompts require an observation");
            let agent = inputs
                .agent_name
                .expect("agent discussion prompts require an agent name");
            let mut capability = format!("You are Agent {agent}.\n");
            capability.push_str(templates.task_template(spec.task_id, "agent_capability")?);
            vec![
                ("task context".to_string(), task_description.to_string()),
                ("round history".to_string(), round_history_body(memory)),
                ("agent capability".to_string(), capability),
                (
                    "communication guidelines".to_string(),
                    templates
                        .task_template(spec.task_id, "communication_guidelines")?
                        .to_string(),
                ),
                ("observation".to_string(), observation.rendered()),
                ("feedback".to_string(), feedback_body(memory)),
            ]
        }
        PromptRole::Critic => {
            let record = inputs
                .short_term
                .expect("critic prompts require the current round record");
            vec![
                ("task context".to_string(), task_description.to_string()),
                ("current round".to_string(), record.rendered()),
                (
                    "instruction".to_string(),
                    templates.get("critic_instruction")?.to_string(),
                ),
            ]
        }
        PromptRole::Proposer => {
            let record = inputs
                .short_term
                .expect("proposer prompts require the current round record");
            let critique = inputs
                .critique
                .expect("proposer prompts require the critique");
            vec![
                ("task context".to_string(), task_description.to_string()),
                ("current round".to_string(), record.rendered()),
                ("critique".to_string(), critique.to_string()),
                (
                    "instruction".to_string(),
                    templates.get("proposer_instruction")?.to_string(),
                ),
            ]
        }
    };
    Ok(render_sections(role, sections))
}
