//! The orchestration loop: discussion → parse → validate → retrospect →
//! replan → execute.
//!
//! Each environment step runs one or more planning rounds. A round is a
//! round-robin discussion driven by the first model until some agent emits
//! an EXECUTE block. The block is parsed and validated; a failure of any
//! kind (unparseable plan, exhausted discussion, validation findings) is
//! retrospected by the second model, committed to memory, counted as a
//! replan, and retried. A validated plan is executed, retrospected with its
//! environment feedback, and committed, and the loop moves to the next step.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::actions::{extract_execute_block, parse_plan};
use crate::llm::{fingerprint_messages, BackendError, ChatBackend, ChatMessage, LlmChannel};
use crate::memory::{
    construct_prompt, LongTermMemory, MemoryError, PromptInputs, PromptRole, RoundRecord,
    TemplateStore,
};
use crate::transcript::{Recorder, TranscriptError, TranscriptEvent};
use crate::validation::{validate, ValidationReport};
use crate::world::{
    apply_plan, is_success, load_task, observe, TaskId, TaskSpec, WorldError, WorldState,
};

fn default_memory_capacity() -> usize {
    2
}
fn default_max_discussion_turns() -> u32 {
    6
}
fn default_max_replans_per_step() -> u32 {
    3
}

/// Everything that determines an episode besides the backends themselves.
/// The backend labels identify the models in transcripts and fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub task_id: TaskId,
    pub seed: i64,
    #[serde(default = "default_memory_capacity")]
    pub memory_capacity: usize,
    /// Discussion turn budget per planning round, per agent.
    #[serde(default = "default_max_discussion_turns")]
    pub max_discussion_turns: u32,
    #[serde(default = "default_max_replans_per_step")]
    pub max_replans_per_step: u32,
    /// Overrides the task's step budget when set.
    #[serde(default)]
    pub max_steps: Option<u32>,
    #[serde(default)]
    pub llm1_label: String,
    #[serde(default)]
    pub llm2_label: String,
}

impl EpisodeConfig {
    pub fn new(task_id: TaskId, seed: i64) -> Self {
        EpisodeConfig {
            task_id,
            seed,
            memory_capacity: default_memory_capacity(),
            max_discussion_turns: default_max_discussion_turns(),
            max_replans_per_step: default_max_replans_per_step(),
            max_steps: None,
            llm1_label: String::new(),
            llm2_label: String::new(),
        }
    }

    /// Stable identity of (task, seed, budgets, backends, engine version).
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(self).expect("config serializes"));
        hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn episode_id(&self) -> String {
        self.fingerprint()[..12].to_string()
    }

    fn assert_limits(&self) {
        assert!(self.memory_capacity >= 1, "memory_capacity must be >= 1");
        assert!(
            self.max_discussion_turns >= 1,
            "max_discussion_turns must be >= 1"
        );
        assert!(
            self.max_replans_per_step >= 1,
            "max_replans_per_step must be >= 1"
        );
        if let Some(steps) = self.max_steps {
            assert!(steps >= 1, "max_steps must be >= 1");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    StepBudget,
    ReplanBudget,
    BackendError,
}

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: TaskId,
    pub seed: i64,
    pub success: bool,
    /// Executed environment steps.
    pub steps: u32,
    /// Retry cycles across the whole episode.
    pub replans: u32,
    pub failure_reason: Option<FailureReason>,
    pub transcript_path: PathBuf,
    pub config_fingerprint: String,
}

impl EpisodeResult {
    /// Equality that ignores where the transcript happens to live.
    pub fn same_outcome(&self, other: &EpisodeResult) -> bool {
        self.task_id == other.task_id
            && self.seed == other.seed
            && self.success == other.success
            && self.steps == other.steps
            && self.replans == other.replans
            && self.failure_reason == other.failure_reason
            && self.config_fingerprint == other.config_fingerprint
    }
}

/// The two model slots of the pipeline: `llm1` drives agent discussion,
/// `llm2` the critic/proposer retrospection.
pub struct Backends {
    pub llm1: Box<dyn ChatBackend>,
    pub llm2: Box<dyn ChatBackend>,
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

/// A planning-loop failure: either the backend misbehaved (which ends the
/// episode with `failure_reason: backend_error`) or the engine itself hit a
/// hard error.
#[derive(Debug)]
pub enum StepError {
    Backend { turn: u32, err: BackendError },
    Fatal(EpisodeError),
}

impl From<EpisodeError> for StepError {
    fn from(e: EpisodeError) -> Self {
        StepError::Fatal(e)
    }
}

/// How a planning round ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscussionOutcome {
    /// Text of the EXECUTE block some agent emitted.
    PlanText(String),
    /// No EXECUTE block within the turn budget.
    TurnBudgetExhausted,
}

/// Run one round-robin discussion until a message carries an EXECUTE block
/// or the turn budget (`max_discussion_turns × roster size`) runs out.
/// `on_exchange` sees every (turn, agent, request, completion) in order.
pub fn run_discussion(
    state: &WorldState,
    spec: &TaskSpec,
    memory: &LongTermMemory,
    backend: &mut dyn ChatBackend,
    config: &EpisodeConfig,
    templates: &TemplateStore,
    mut on_exchange: impl FnMut(u32, &str, &[ChatMessage], &str) -> Result<(), EpisodeError>,
) -> Result<(Vec<(String, String)>, DiscussionOutcome), StepError> {
    let roster = spec.roster();
    let budget = config.max_discussion_turns * roster.len() as u32;
    let mut transcript: Vec<(String, String)> = Vec::new();
    for turn in 0..budget {
        let agent = &roster[(turn as usize) % roster.len()];
        let observation = observe(state, spec, agent).map_err(EpisodeError::from)?;
        let prompt = construct_prompt(
            PromptRole::AgentDiscussion,
            &spec.goal_text,
            memory,
            spec,
            templates,
            PromptInputs {
                observation: Some(&observation),
                agent_name: Some(agent),
                ..Default::default()
            },
        )
        .map_err(EpisodeError::from)?;
        let mut dialogue_so_far = String::new();
        if transcript.is_empty() {
            dialogue_so_far.push_str("none\n");
        } else {
            for (speaker, message) in &transcript {
                dialogue_so_far.push_str(&format!("{speaker}: {message}\n"));
            }
        }
        let user = format!(
            "Discussion so far this round:\n{dialogue_so_far}\nYou are Agent {agent}. It is \
             your turn to speak."
        );
        let messages = vec![ChatMessage::system(prompt.rendered), ChatMessage::user(user)];
        let completion = match backend.complete(&messages) {
            Ok(text) => text,
            Err(err) => return Err(StepError::Backend { turn, err }),
        };
        on_exchange(turn, agent, &messages, &completion)?;
        transcript.push((agent.clone(), completion.clone()));
        if let Some(block) = extract_execute_block(&completion) {
            return Ok((transcript, DiscussionOutcome::PlanText(block)));
        }
    }
    Ok((transcript, DiscussionOutcome::TurnBudgetExhausted))
}

/// Two sequential retrospection completions: the critic's critique, then the
/// proposal from the proposer prompt that embeds the critique verbatim.
pub fn retrospect(
    short_term: &RoundRecord,
    backend: &mut dyn ChatBackend,
    spec: &TaskSpec,
    templates: &TemplateStore,
    mut on_exchange: impl FnMut(u32, PromptRole, &[ChatMessage], &str) -> Result<(), EpisodeError>,
) -> Result<(String, String), StepError> {
    let placeholder_memory = LongTermMemory::new(1);
    let critic_prompt = construct_prompt(
        PromptRole::Critic,
        &spec.goal_text,
        &placeholder_memory,
        spec,
        templates,
        PromptInputs {
            short_term: Some(short_term),
            ..Default::default()
        },
    )
    .map_err(EpisodeError::from)?;
    let critic_messages = vec![ChatMessage::user(critic_prompt.rendered)];
    let critique = backend
        .complete(&critic_messages)
        .map_err(|err| StepError::Backend { turn: 0, err })?;
    on_exchange(0, PromptRole::Critic, &critic_messages, &critique)?;

    let proposer_prompt = construct_prompt(
        PromptRole::Proposer,
        &spec.goal_text,
        &placeholder_memory,
        spec,
        templates,
        PromptInputs {
            short_term: Some(short_term),
            critique: Some(&critique),
            ..Default::default()
        },
    )
    .map_err(EpisodeError::from)?;
    let proposer_messages = vec![ChatMessage::user(proposer_prompt.rendered)];
    let proposal = backend
        .complete(&proposer_messages)
        .map_err(|err| StepError::Backend { turn: 1, err })?;
    on_exchange(1, PromptRole::Proposer, &proposer_messages, &proposal)?;
    Ok((critique, proposal))
}

/// Run retrospection for a finished round, fill in its critique/proposal,
/// log it, and commit it to long-term memory. A backend failure is returned
/// in the inner result so the caller can end the episode gracefully.
#[allow(clippy::too_many_arguments)]
fn retrospect_and_commit(
    recorder: &mut Recorder,
    memory: &mut LongTermMemory,
    mut record: RoundRecord,
    backends: &mut Backends,
    spec: &TaskSpec,
    templates: &TemplateStore,
    step: u32,
    attempt: u32,
) -> Result<Result<(), BackendError>, EpisodeError> {
    let outcome = retrospect(
        &record,
        backends.llm2.as_mut(),
        spec,
        templates,
        |turn, role, messages, completion| {
            let fingerprint = fingerprint_messages(messages);
            recorder.record(&TranscriptEvent::Prompt {
                step,
                attempt,
                turn,
                channel: LlmChannel::Llm2,
                role,
                agent: None,
                fingerprint: fingerprint.clone(),
                messages: messages.to_vec(),
            })?;
            recorder.record(&TranscriptEvent::Completion {
                step,
                attempt,
                turn,
                channel: LlmChannel::Llm2,
                fingerprint,
                text: completion.to_string(),
            })?;
            Ok(())
        },
    );
    match outcome {
        Ok((critique, proposal)) => {
            recorder.record(&TranscriptEvent::Retrospection {
                step,
                attempt,
                critique: critique.clone(),
                proposal: proposal.clone(),
            })?;
            record.critique = Some(critique);
            record.proposal = Some(proposal);
            recorder.record(&TranscriptEvent::Round {
                step,
                attempt,
                record: record.clone(),
            })?;
            memory.commit_round(record)?;
            Ok(Ok(()))
        }
        Err(StepError::Backend { err, .. }) => Ok(Err(err)),
        Err(StepError::Fatal(e)) => Err(e),
    }
}

/// Run one full episode against the given backends, writing the transcript
/// to `transcript_path`.
pub fn run_episode(
    config: &EpisodeConfig,
    backends: &mut Backends,
    templates: &TemplateStore,
    transcript_path: &Path,
) -> Result<EpisodeResult, EpisodeError> {
    config.assert_limits();
    let (spec, mut state) = load_task(config.task_id, config.seed)?;
    let max_steps = config.max_steps.unwrap_or(spec.max_steps);
    let mut memory = LongTermMemory::new(config.memory_capacity);
    let mut recorder = Recorder::create(transcript_path)?;
    let fingerprint = config.fingerprint();
    recorder.record(&TranscriptEvent::Header {
        episode_id: config.episode_id(),
        config_fingerprint: fingerprint.clone(),
        config: config.clone(),
    })?;

    let mut steps: u32 = 0;
    let mut replans: u32 = 0;
    let mut round_index: u32 = 0;
    let mut success = false;
    let mut failure_reason: Option<FailureReason> = None;

    'episode: while steps < max_steps {
        let mut attempt: u32 = 0;
        loop {
            let discussion = {
                let recorder = &mut recorder;
                run_discussion(
                    &state,
                    &spec,
                    &memory,
                    backends.llm1.as_mut(),
                    config,
                    templates,
                    |turn, agent, messages, completion| {
                        let fingerprint = fingerprint_messages(messages);
                        recorder.record(&TranscriptEvent::Prompt {
                            step: steps,
                            attempt,
                            turn,
                            channel: LlmChannel::Llm1,
                            role: PromptRole::AgentDiscussion,
                            agent: Some(agent.to_string()),
                            fingerprint: fingerprint.clone(),
                            messages: messages.to_vec(),
                        })?;
                        recorder.record(&TranscriptEvent::Completion {
                            step: steps,
                            attempt,
                            turn,
                            channel: LlmChannel::Llm1,
                            fingerprint,
                            text: completion.to_string(),
                        })?;
                        Ok(())
                    },
                )
            };
            let (turns, outcome) = match discussion {
                Ok(pair) => pair,
                Err(StepError::Backend { .. }) => {
                    failure_reason = Some(FailureReason::BackendError);
                    break 'episode;
                }
                Err(StepError::Fatal(e)) => return Err(e),
            };

            // A round fails by exhausting the discussion, by an unparseable
            // block, or by validation findings; all three feed retrospection
            // and count as one replan.
            let failure_report: ValidationReport = match outcome {
                DiscussionOutcome::TurnBudgetExhausted => ValidationReport::failure_text(
                    "The discussion ended without an agreed plan; end a message with an \
                     EXECUTE block next time.",
                ),
                DiscussionOutcome::PlanText(block) => {
                    match parse_plan(&block, &spec.roster(), &spec.dims) {
                        Err(parse_err) => {
                            let feedback = format!(
                                "The proposed plan could not be parsed: {parse_err}. Re-emit \
                                 the EXECUTE block with one well-formed line per agent."
                            );
                            recorder.record(&TranscriptEvent::Validation {
                                step: steps,
                                attempt,
                                ok: false,
                                feedback: feedback.clone(),
                            })?;
                            ValidationReport::failure_text(feedback)
                        }
                        Ok(plan) => {
                            let report = validate(&plan, &state, &spec);
                            recorder.record(&TranscriptEvent::Validation {
                                step: steps,
                                attempt,
                                ok: report.ok,
                                feedback: report.feedback_text.clone(),
                            })?;
                            if report.ok {
                                let (next, env_feedback) = apply_plan(&state, &spec, &plan)?;
                                state = next;
                                steps += 1;
                                recorder.record(&TranscriptEvent::EnvStep {
                                    step: steps,
                                    feedback: env_feedback.clone(),
                                    state: state.clone(),
                                })?;
                                let mut record = RoundRecord::new(round_index, turns, report);
                                record.env_feedback = Some(env_feedback);
                                let committed = retrospect_and_commit(
                                    &mut recorder,
                                    &mut memory,
                                    record,
                                    backends,
                                    &spec,
                                    templates,
                                    steps,
                                    attempt,
                                )?;
                                if committed.is_err() {
                                    failure_reason = Some(FailureReason::BackendError);
                                    break 'episode;
                                }
                                round_index += 1;
                                if is_success(&state, &spec) {
                                    success = true;
                                    break 'episode;
                                }
                                continue 'episode;
                            }
                            report
                        }
                    }
                }
            };

            let record = RoundRecord::new(round_index, turns, failure_report);
            let committed = retrospect_and_commit(
                &mut recorder,
                &mut memory,
                record,
                backends,
                &spec,
                templates,
                steps,
                attempt,
            )?;
            if committed.is_err() {
                failure_reason = Some(FailureReason::BackendError);
                break 'episode;
            }
            round_index += 1;
            replans += 1;
            attempt += 1;
            if attempt >= config.max_replans_per_step {
                failure_reason = Some(FailureReason::ReplanBudget);
                break 'episode;
            }
        }
    }

    if !success && failure_reason.is_none() {
        failure_reason = Some(FailureReason::StepBudget);
    }
    recorder.record(&TranscriptEvent::Result {
        success,
        steps,
        replans,
        failure_reason,
    })?;
    recorder.finish()?;
    Ok(EpisodeResult {
        task_id: config.task_id,
        seed: config.seed,
        success,
        steps,
        replans,
        failure_reason,
        transcript_path: transcript_path.to_path_buf(),
        config_fingerprint: fingerprint,
    })
}
