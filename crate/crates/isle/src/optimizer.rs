//! The stream optimizer: choose the smallest decomposition that can be
//! streamed without a statistically significant drop in scorer
//! performance, subject to the model-architecture floor.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::codestream::{self, Codestream, CodestreamError, DecompositionPlan};
use crate::image_io::LabelTable;
use crate::scorer::{ScorerError, ScorerSpec};
use crate::stats::{self, AurocResult, StatsError, TTestResult};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("significance must be in [0, 1], got {0}")]
    BadSignificance(f64),
    #[error("model input {input_size} exceeds the full-resolution min dimension {min_dim}")]
    InputTooLarge { input_size: u32, min_dim: u32 },
    #[error("stream `{asset_id}` does not match the evaluation plan")]
    PlanMismatch { asset_id: String },
    #[error("stream `{asset_id}` is truncated; the reference decode needs full streams")]
    StreamTruncated { asset_id: String },
    #[error("no label row for asset `{asset_id}`")]
    MissingLabelRow { asset_id: String },
    #[error("scorer emits {scorer} labels but the table has {table}")]
    LabelCountMismatch { scorer: usize, table: usize },
    #[error("need at least 2 labels with both classes present, got {0}")]
    TooFewUsableLabels(usize),
    #[error(transparent)]
    Codestream(#[from] CodestreamError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Outcome of the statistical gate at one decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateTest {
    /// Paired one-tailed t-test on per-label AUROC differences.
    TTest {
        #[serde(flatten)]
        result: TTestResult,
    },
    /// Zero-variance differences: the t statistic is undefined. The gate
    /// passes when no label degraded.
    Degenerate { all_nonnegative: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionEval {
    pub auroc: AurocResult,
    pub test: GateTest,
    /// Shapiro-Wilk p for the paired differences; absent when the test is
    /// undefined (fewer than 3 labels, or zero range).
    pub shapiro_p: Option<f64>,
    pub passed: bool,
}

/// Full evaluation record driving (and explaining) the chosen
/// decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub chosen_d: u8,
    pub d_min_architecture: u8,
    pub significance: f64,
    pub n_assets: usize,
    /// Labels that entered the pairing. Single-class columns are dropped
    /// with a warning.
    pub labels_used: Vec<String>,
    pub dropped_labels: Vec<String>,
    pub reference: AurocResult,
    pub per_decomposition: BTreeMap<u8, DecompositionEval>,
}

/// Smallest decomposition whose min dimension reaches the model input.
pub fn architecture_floor(
    plan: &DecompositionPlan,
    input_size: u32,
) -> Result<u8, OptimizerError> {
    let full_min = plan.min_dim(plan.n_levels);
    if input_size > full_min {
        return Err(OptimizerError::InputTooLarge { input_size, min_dim: full_min });
    }
    for d in 0..=plan.n_levels {
        if plan.min_dim(d) >= input_size {
            return Ok(d);
        }
    }
    Ok(plan.n_levels)
}

/// Evaluate every decomposition from the architecture floor upward and
/// pick the smallest one whose per-label AUROCs show no statistically
/// significant drop against the full-resolution reference.
///
/// Search is bottom-up first-pass; if nothing below N qualifies, the full
/// stream (d = N) is chosen: zero savings, never a regression.
pub fn select_optimal(
    streams: &[(String, Codestream)],
    labels: &LabelTable,
    spec: &ScorerSpec,
    plan: &DecompositionPlan,
    significance: f64,
) -> Result<EvalReport, OptimizerError> {
    if streams.is_empty() {
        return Err(OptimizerError::EmptyValidation);
    }
    if !(0.0..=1.0).contains(&significance) {
        return Err(OptimizerError::BadSignificance(significance));
    }
    let n = plan.n_levels;
    let (full_w, full_h) = plan.full_resolution();
    for (asset_id, cs) in streams {
        let h = cs.header();
        if h.width != full_w || h.height != full_h || h.alpha != plan.alpha || h.n_levels != n {
            return Err(OptimizerError::PlanMismatch { asset_id: asset_id.clone() });
        }
        if cs.present_segments() != n + 1 {
            return Err(OptimizerError::StreamTruncated { asset_id: asset_id.clone() });
        }
        if labels.get(asset_id).is_none() {
            return Err(OptimizerError::MissingLabelRow { asset_id: asset_id.clone() });
        }
    }
    if spec.n_labels() != labels.n_labels() {
        return Err(OptimizerError::LabelCountMismatch {
            scorer: spec.n_labels(),
            table: labels.n_labels(),
        });
    }

    let floor = architecture_floor(plan, spec.input_size)?;

    // Reference scores: full decode of every stream.
    let reference_scores = score_all(streams, spec, n)?;

    // Keep only labels with both classes present in the validation set.
    let truth: Vec<&[bool]> = streams
        .iter()
        .map(|(asset_id, _)| labels.get(asset_id).expect("checked above"))
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (l, name) in labels.label_names().iter().enumerate() {
        let positives = truth.iter().filter(|row| row[l]).count();
        if positives == 0 || positives == truth.len() {
            dropped.push(name.clone());
        } else {
            kept.push((l, name.clone()));
        }
    }
    if kept.len() < 2 {
        return Err(OptimizerError::TooFewUsableLabels(kept.len()));
    }

    let auroc_over = |scores: &[Vec<f64>]| -> Result<AurocResult, StatsError> {
        let mut per_label = Vec::with_capacity(kept.len());
        for &(l, _) in &kept {
            let col: Vec<f64> = scores.iter().map(|row| row[l]).collect();
            let truth_col: Vec<bool> = truth.iter().map(|row| row[l]).collect();
            per_label.push(stats::auroc(&col, &truth_col)?);
        }
        Ok(AurocResult::from_per_label(per_label))
    };

    let reference = auroc_over(&reference_scores)?;

    let mut per_decomposition = BTreeMap::new();
    for d in floor..=n {
        let candidate = if d == n {
            // decode_partial at N reproduces the source exactly, so the
            // reference scores are the candidate scores.
            auroc_over(&reference_scores)?
        } else {
            let scores = score_all(streams, spec, d)?;
            auroc_over(&scores)?
        };
        let diffs: Vec<f64> = candidate
            .per_label
            .iter()
            .zip(&reference.per_label)
            .map(|(c, r)| c - r)
            .collect();

        let shapiro_p = stats::shapiro_wilk(&diffs).ok().map(|(_, p)| p);
        let (test, passed) = if diffs.windows(2).all(|w| w[0] == w[1]) {
            let all_nonnegative = diffs[0] >= 0.0;
            (GateTest::Degenerate { all_nonnegative }, all_nonnegative)
        } else {
            let result = stats::paired_t_test_one_tailed(&candidate.per_label, &reference.per_label)?;
            let passed = result.p_value >= significance;
            (GateTest::TTest { result }, passed)
        };
        per_decomposition.insert(d, DecompositionEval { auroc: candidate, test, shapiro_p, passed });
    }

    let chosen_d = per_decomposition
        .iter()
        .find(|(_, eval)| eval.passed)
        .map(|(&d, _)| d)
        .unwrap_or(n);

    Ok(EvalReport {
        chosen_d,
        d_min_architecture: floor,
        significance,
        n_assets: streams.len(),
        labels_used: kept.into_iter().map(|(_, name)| name).collect(),
        dropped_labels: dropped,
        reference,
        per_decomposition,
    })
}

fn score_all(
    streams: &[(String, Codestream)],
    spec: &ScorerSpec,
    d: u8,
) -> Result<Vec<Vec<f64>>, OptimizerError> {
    let mut rows = Vec::with_capacity(streams.len());
    for (asset_id, cs) in streams {
        let img = codestream::decode_partial(cs, d)?;
        rows.push(spec.score(&img, asset_id, d)?);
    }
    Ok(rows)
}
