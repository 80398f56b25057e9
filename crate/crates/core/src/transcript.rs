//! Episode transcripts: JSON Lines, one object per event, deterministic
//! bytes for a given episode.
//!
//! A transcript carries everything needed to re-run the episode bit-exactly
//! with the replay backend: every prompt (with its request fingerprint),
//! every completion, validation outcomes, retrospection outputs, environment
//! steps with state snapshots, and the final result. Transcripts contain no
//! wall-clock timestamps by design.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{EpisodeConfig, FailureReason};
use crate::llm::{ChatMessage, LlmChannel};
use crate::memory::{PromptRole, RoundRecord};
use crate::world::WorldState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Header {
        episode_id: String,
        config_fingerprint: String,
        config: EpisodeConfig,
    },
    Prompt {
        step: u32,
        attempt: u32,
        turn: u32,
        channel: LlmChannel,
        role: PromptRole,
        agent: Option<String>,
        fingerprint: String,
        messages: Vec<ChatMessage>,
    },
    Completion {
        step: u32,
        attempt: u32,
        turn: u32,
        channel: LlmChannel,
        fingerprint: String,
        text: String,
    },
    Validation {
        step: u32,
        attempt: u32,
        ok: bool,
        feedback: String,
    },
    Retrospection {
        step: u32,
        attempt: u32,
        critique: String,
        proposal: String,
    },
    /// The short-term record committed to long-term memory this round.
    Round {
        step: u32,
        attempt: u32,
        record: RoundRecord,
    },
    EnvStep {
        step: u32,
        feedback: String,
        state: WorldState,
    },
    Result {
        success: bool,
        steps: u32,
        replans: u32,
        failure_reason: Option<FailureReason>,
    },
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript io error at `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("transcript `{path}` line {line} is not a valid event: {message}")]
    BadLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("transcript `{path}` has no header event")]
    MissingHeader { path: String },
}

/// Append-only JSON Lines writer for one episode.
pub struct Recorder {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl Recorder {
    pub fn create(path: &Path) -> Result<Self, TranscriptError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|source| TranscriptError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        let file = File::create(path).map_err(|source| TranscriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Recorder {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record(&mut self, event: &TranscriptEvent) -> Result<(), TranscriptError> {
        let line = serde_json::to_string(event).expect("transcript events serialize");
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .map_err(|source| TranscriptError::Io {
                path: self.path.display().to_string(),
                source,
            })
    }

    pub fn finish(mut self) -> Result<(), TranscriptError> {
        self.writer.flush().map_err(|source| TranscriptError::Io {
            path: self.path.display().to_string(),
            source,
        })
    }
}

/// Parse a transcript file into its event sequence.
pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEvent>, TranscriptError> {
    let file = File::open(path).map_err(|source| TranscriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut events = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TranscriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event =
            serde_json::from_str(&line).map_err(|e| TranscriptError::BadLine {
                path: path.display().to_string(),
                line: ix + 1,
                message: e.to_string(),
            })?;
        events.push(event);
    }
    Ok(events)
}

/// The header of a recorded transcript.
pub fn header_of(
    events: &[TranscriptEvent],
    path: &Path,
) -> Result<(String, String, EpisodeConfig), TranscriptError> {
    events
        .iter()
        .find_map(|event| match event {
            TranscriptEvent::Header {
                episode_id,
                config_fingerprint,
                config,
            } => Some((episode_id.clone(), config_fingerprint.clone(), config.clone())),
            _ => None,
        })
        .ok_or_else(|| TranscriptError::MissingHeader {
            path: path.display().to_string(),
        })
}

/// The (request fingerprint, completion) pairs of one channel, in call
/// order — exactly what a [`crate::llm::ReplayBackend`] needs.
pub fn recorded_completions(
    path: &Path,
    channel: LlmChannel,
) -> Result<Vec<(String, String)>, TranscriptError> {
    let events = read_transcript(path)?;
    Ok(events
        .into_iter()
        .filter_map(|event| match event {
            TranscriptEvent::Completion {
                channel: c,
                fingerprint,
                text,
                ..
            } if c == channel => Some((fingerprint, text)),
            _ => None,
        })
        .collect())
}

/// The recorded final result, if the episode completed.
pub fn recorded_result(
    events: &[TranscriptEvent],
) -> Option<(bool, u32, u32, Option<FailureReason>)> {
    events.iter().rev().find_map(|event| match event {
        TranscriptEvent::Result {
            success,
            steps,
            replans,
            failure_reason,
        } => Some((*success, *steps, *replans, *failure_reason)),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_round_trip_through_json_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episode.jsonl");
        let events = vec![
            TranscriptEvent::Validation {
                step: 0,
                attempt: 1,
                ok: false,
                feedback: "collision".into(),
            },
            TranscriptEvent::Result {
                success: true,
                steps: 2,
                replans: 1,
                failure_reason: None,
            },
        ];
        let mut recorder = Recorder::create(&path).unwrap();
        for event in &events {
            recorder.record(event).unwrap();
        }
        recorder.finish().unwrap();
        let read = read_transcript(&path).unwrap();
        assert_eq!(read, events);
        assert_eq!(recorded_result(&read), Some((true, 2, 1, None)));
    }

    #[test]
    fn bad_lines_are_reported_with_their_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"type\":\"unknown_event\"}\n").unwrap();
        match read_transcript(&path) {
            Err(TranscriptError::BadLine { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
