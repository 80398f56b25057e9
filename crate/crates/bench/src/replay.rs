//! Deterministic replay of recorded episodes.
//!
//! Replay reconstructs the episode config from the transcript header, drives
//! `run_episode` with replay backends fed by the recorded completions, and
//! then requires the regenerated transcript to be byte-identical to the
//! recording. Any drift — an edited completion, a changed engine, a different
//! seed — surfaces as an error instead of a silently different episode.

use std::path::{Path, PathBuf};

use thiserror::Error;

use retrocollab_core::dialogue::{run_episode, Backends, EpisodeResult, FailureReason};
use retrocollab_core::llm::{LlmChannel, ReplayBackend};
use retrocollab_core::memory::TemplateStore;
use retrocollab_core::transcript::{
    header_of, read_transcript, recorded_completions, recorded_result, TranscriptError,
};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("episode error during replay: {0}")]
    Episode(String),
    #[error(
        "config fingerprint mismatch: transcript was recorded with {recorded} but this engine \
         derives {derived} (transcript or code drift)"
    )]
    ConfigFingerprint { recorded: String, derived: String },
    #[error("replay diverged: a request no longer matches the recorded completion stream")]
    FingerprintMismatch,
    #[error("replayed transcript differs from the recording at byte offset {offset}")]
    TranscriptBytes { offset: usize },
    #[error("replayed result {got} differs from the recorded result {recorded}")]
    ResultMismatch { recorded: String, got: String },
}

/// Re-execute a recorded episode offline. Writes the regenerated transcript
/// to `replay_out` (a temp file when `None`) and verifies byte identity and
/// result equality against the recording.
pub fn replay_episode(
    transcript_path: &Path,
    templates: &TemplateStore,
    replay_out: Option<&Path>,
) -> Result<EpisodeResult, ReplayError> {
    let events = read_transcript(transcript_path)?;
    let (_, recorded_fp, config) = header_of(&events, transcript_path)?;
    let derived = config.fingerprint();
    if derived != recorded_fp {
        return Err(ReplayError::ConfigFingerprint {
            recorded: recorded_fp,
            derived,
        });
    }

    let llm1 = ReplayBackend::new(recorded_completions(transcript_path, LlmChannel::Llm1)?);
    let llm2 = ReplayBackend::new(recorded_completions(transcript_path, LlmChannel::Llm2)?);
    let mut backends = Backends {
        llm1: Box::new(llm1),
        llm2: Box::new(llm2),
    };

    let tmp_holder;
    let out_path: PathBuf = match replay_out {
        Some(p) => p.to_path_buf(),
        None => {
            tmp_holder = tempdir_path(transcript_path)?;
            tmp_holder.clone()
        }
    };
    let result = run_episode(&config, &mut backends, templates, &out_path)
        .map_err(|e| ReplayError::Episode(e.to_string()))?;

    let recorded = recorded_result(&events);
    let got = (result.success, result.steps, result.replans, result.failure_reason);
    if recorded != Some(got) {
        // A replay backend only fails when a request fingerprint stops
        // matching the recorded stream, so a fresh backend_error that the
        // recording does not show means the transcript was tampered with or
        // the engine drifted.
        if result.failure_reason == Some(FailureReason::BackendError) {
            return Err(ReplayError::FingerprintMismatch);
        }
        return Err(ReplayError::ResultMismatch {
            recorded: format!("{recorded:?}"),
            got: format!("{got:?}"),
        });
    }

    let original = std::fs::read(transcript_path).map_err(|source| TranscriptError::Io {
        path: transcript_path.display().to_string(),
        source,
    })?;
    let regenerated = std::fs::read(&out_path).map_err(|source| TranscriptError::Io {
        path: out_path.display().to_string(),
        source,
    })?;
    if original != regenerated {
        let offset = original
            .iter()
            .zip(regenerated.iter())
            .position(|(a, b)| a != b)
            .unwrap_or(original.len().min(regenerated.len()));
        return Err(ReplayError::TranscriptBytes { offset });
    }
    if replay_out.is_none() {
        let _ = std::fs::remove_file(&out_path);
    }
    Ok(result)
}

fn tempdir_path(original: &Path) -> Result<PathBuf, ReplayError> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let stem = original
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "episode".into());
    Ok(std::env::temp_dir().join(format!(
        "{stem}.{}.{}.replay.jsonl",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    )))
}
