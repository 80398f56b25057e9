//! Per-task aggregation of episode results into the benchmark's metric
//! schema: success rate with binomial standard error, average steps over
//! successful runs, and average replans over all runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::EpisodeResult;
use crate::world::TaskId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task_id: TaskId,
    /// Fraction of successful episodes in [0, 1].
    pub success_rate: f64,
    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub success_se: f64,
    /// Mean executed steps over successful episodes; absent without one.
    pub avg_steps: Option<f64>,
    /// Mean replan count over all episodes.
    pub avg_replans: f64,
    pub n: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot aggregate an empty result list")]
    EmptyResults,
    #[error("result list mixes tasks {0} and {1}")]
    MixedTasks(TaskId, TaskId),
}

/// Aggregate one task's episode results.
pub fn compute_metrics(results: &[EpisodeResult]) -> Result<TaskMetrics, MetricsError> {
    let first = results.first().ok_or(MetricsError::EmptyResults)?;
    if let Some(other) = results.iter().find(|r| r.task_id != first.task_id) {
        return Err(MetricsError::MixedTasks(first.task_id, other.task_id));
    }
    let n = results.len();
    let successes: Vec<&EpisodeResult> = results.iter().filter(|r| r.success).collect();
    let p = successes.len() as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let avg_steps = if successes.is_empty() {
        None
    } else {
        Some(successes.iter().map(|r| r.steps as f64).sum::<f64>() / successes.len() as f64)
    };
    let avg_replans = results.iter().map(|r| r.replans as f64).sum::<f64>() / n as f64;
    Ok(TaskMetrics {
        task_id: first.task_id,
        success_rate: p,
        success_se: se,
        avg_steps,
        avg_replans,
        n,
    })
}

impl TaskMetrics {
    /// `0.40±0.13` — rate and standard error at two decimals.
    pub fn success_cell(&self) -> String {
        format!("{:.2}±{:.2}", self.success_rate, self.success_se)
    }

    /// One summary row: `0.40±0.13, 8.1, 3.1` (steps `n/a` without any
    /// success).
    pub fn table_row(&self) -> String {
        let steps = match self.avg_steps {
            Some(s) => format!("{s:.1}"),
            None => "n/a".to_string(),
        };
        format!("{}, {}, {:.1}", self.success_cell(), steps, self.avg_replans)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(task_id: TaskId, success: bool, steps: u32, replans: u32) -> EpisodeResult {
        EpisodeResult {
            task_id,
            seed: 0,
            success,
            steps,
            replans,
            failure_reason: None,
            transcript_path: std::path::PathBuf::new(),
            config_fingerprint: String::new(),
        }
    }

    fn batch(successes: usize, n: usize) -> Vec<EpisodeResult> {
        (0..n)
            .map(|i| result(TaskId::SortCubes, i < successes, 8, 3))
            .collect()
    }

    #[test]
    fn table_one_error_column_reproduces() {
        assert_eq!(compute_metrics(&batch(6, 15)).unwrap().success_cell(), "0.40±0.13");
        assert_eq!(compute_metrics(&batch(3, 15)).unwrap().success_cell(), "0.20±0.10");
        assert_eq!(compute_metrics(&batch(5, 15)).unwrap().success_cell(), "0.33±0.12");
    }

    #[test]
    fn zero_successes_degenerate() {
        let metrics = compute_metrics(&batch(0, 10)).unwrap();
        assert_eq!(metrics.success_cell(), "0.00±0.00");
        assert!(metrics.avg_steps.is_none());
        assert_eq!(metrics.table_row(), "0.00±0.00, n/a, 3.0");
    }

    #[test]
    fn avg_steps_only_counts_successes() {
        let mut results = vec![
            result(TaskId::MoveRope, true, 4, 0),
            result(TaskId::MoveRope, true, 6, 2),
            result(TaskId::MoveRope, false, 15, 9),
        ];
        let metrics = compute_metrics(&results).unwrap();
        assert_eq!(metrics.avg_steps, Some(5.0));
        assert!((metrics.avg_replans - 11.0 / 3.0).abs() < 1e-12);
        results[0].task_id = TaskId::SweepFloor;
        assert!(matches!(
            compute_metrics(&results),
            Err(MetricsError::MixedTasks(_, _))
        ));
    }

    #[test]
    fn empty_list_errors() {
        assert_eq!(compute_metrics(&[]), Err(MetricsError::EmptyResults));
    }
}
