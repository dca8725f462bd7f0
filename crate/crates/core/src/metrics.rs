//! Instance-level evaluation: mask and boundary IoU, greedy score-ranked
//! matching, average precision, mAP presets, and field-size statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::{Mask, PixelMask};
use crate::morph;

/// |P ∩ G| / |P ∪ G| over two grids of identical dimensions. Returns 0 when
/// both masks are empty.
pub fn mask_iou(p: &Mask, g: &Mask) -> Result<f64> {
    if p.w != g.w || p.h != g.h {
        return Err(Error::data(format!(
            "mask dimensions differ: {}x{} vs {}x{}",
            p.w, p.h, g.w, g.h
        )));
    }
    let mut inter = 0u64;
    let mut union = 0u64;
    for (a, b) in p.data.iter().zip(g.data.iter()) {
        inter += (*a && *b) as u64;
        union += (*a || *b) as u64;
    }
    if union == 0 {
        Ok(0.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// IoU of the (optionally thickened) boundary-pixel sets of two masks.
///
/// The boundary of a mask is the set of its pixels with at least one
/// 4-neighbor outside the mask (the grid edge counts as outside), dilated by
/// a square element of half-width `thickness`.
pub fn boundary_iou(p: &Mask, g: &Mask, thickness: usize) -> Result<f64> {
    if p.w != g.w || p.h != g.h {
        return Err(Error::data(format!(
            "mask dimensions differ: {}x{} vs {}x{}",
            p.w, p.h, g.w, g.h
        )));
    }
    let bp = morph::dilate(&morph::boundary(p), thickness);
    let bg = morph::dilate(&morph::boundary(g), thickness);
    mask_iou(&bp, &bg)
}

/// A prediction entering evaluation: a global mask plus its confidence.
#[derive(Debug, Clone)]
pub struct ScoredMask {
    pub mask: PixelMask,
    pub score: f64,
}

/// Outcome for one prediction, in rank order.
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    /// Index into the original prediction list.
    pub pred_index: usize,
    pub score: f64,
    pub is_tp: bool,
    /// Ground truth this prediction matched (true positives only).
    pub gt_index: Option<usize>,
    /// IoU against the ground truth considered at decision time.
    pub iou: f64,
}

/// Result of matching one prediction set against one ground-truth set at a
/// single IoU threshold.
#[derive(Debug, Clone)]
pub struct MatchResult {
    /// Per-prediction outcomes sorted by descending score (ties by input
    /// index).
    pub outcomes: Vec<MatchOutcome>,
    pub n_gt: usize,
    pub tau: f64,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_tp).count()
    }

    pub fn fp(&self) -> usize {
        self.outcomes.len() - self.tp()
    }

    pub fn fn_(&self) -> usize {
        self.n_gt - self.tp()
    }
}

/// Pairwise IoU table and score ranking, shared across thresholds.
pub struct EvalInstances {
    /// ious[p][g]
    ious: Vec<Vec<f64>>,
    scores: Vec<f64>,
    /// prediction indices in rank order
    ranked: Vec<usize>,
    n_gt: usize,
}

impl EvalInstances {
    pub fn prepare(preds: &[ScoredMask], gts: &[PixelMask]) -> Self {
        let ious = crate::exec::map_indexed(preds, |_, p| {
            gts.iter().map(|g| p.mask.iou(g)).collect::<Vec<f64>>()
        });
        let mut ranked: Vec<usize> = (0..preds.len()).collect();
        // descending score, ties by input index; sort_by is stable
        ranked.sort_by(|&a, &b| {
            preds[b].score.partial_cmp(&preds[a].score).expect("finite scores")
        });
        EvalInstances {
            ious,
            scores: preds.iter().map(|p| p.score).collect(),
            ranked,
            n_gt: gts.len(),
        }
    }

    /// Greedy matching at one threshold: each prediction, in rank order,
    /// takes the unmatched ground truth with the highest IoU (ties to the
    /// lowest index) and is a true positive iff that IoU reaches `tau`.
    /// A rejected match does not consume the ground truth.
    pub fn match_at(&self, tau: f64) -> MatchResult {
        let mut gt_taken = vec![false; self.n_gt];
        let mut outcomes = Vec::with_capacity(self.ranked.len());
        for &pi in &self.ranked {
            let mut best: Option<(usize, f64)> = None;
            for (gi, &iou) in self.ious[pi].iter().enumerate() {
                if gt_taken[gi] {
                    continue;
                }
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((gi, iou));
                }
            }
            let (is_tp, gt_index, iou) = match best {
                Some((gi, iou)) if iou >= tau => {
                    gt_taken[gi] = true;
                    (true, Some(gi), iou)
                }
                Some((_, iou)) => (false, None, iou),
                None => (false, None, 0.0),
            };
            outcomes.push(MatchOutcome {
                pred_index: pi,
                score: self.scores[pi],
                is_tp,
                gt_index,
                iou,
            });
        }
        MatchResult { outcomes, n_gt: self.n_gt, tau }
    }
}

/// Convenience wrapper for a single matching pass.
pub fn match_predictions(preds: &[ScoredMask], gts: &[PixelMask], tau: f64) -> MatchResult {
    EvalInstances::prepare(preds, gts).match_at(tau)
}

/// One precision/recall point of the ranked curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall at every rank k = 1..n. The implicit starting point
/// (recall 0, precision 1) is applied by the AP formulas.
pub fn pr_curve(matched: &MatchResult) -> Vec<PrPoint> {
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(matched.outcomes.len());
    for (k, outcome) in matched.outcomes.iter().enumerate() {
        tp += outcome.is_tp as usize;
        points.push(PrPoint {
            recall: tp as f64 / matched.n_gt as f64,
            precision: tp as f64 / (k + 1) as f64,
        });
    }
    points
}

/// How the area under the precision/recall curve is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApMode {
    /// Step-wise sum over every rank: sum of (r(k) - r(k-1)) * max(p(k),
    /// p(k-1)) with r(0) = 0, p(0) = 1.
    #[default]
    AllPoint,
    /// 101-point interpolation: mean over recall thresholds 0.00..=1.00 of
    /// the precision envelope.
    Coco101,
}

/// Average precision of a match result. Zero ground truths leave AP
/// undefined and error out so the caller decides how to pool.
pub fn average_precision(matched: &MatchResult, mode: ApMode) -> Result<f64> {
    if matched.n_gt == 0 {
        return Err(Error::data(
            "average precision is undefined for zero ground truths".to_string(),
        ));
    }
    let points = pr_curve(matched);
    match mode {
        ApMode::AllPoint => {
            let mut ap = 0.0;
            let mut prev = PrPoint { recall: 0.0, precision: 1.0 };
            for point in points {
                ap += (point.recall - prev.recall) * point.precision.max(prev.precision);
                prev = point;
            }
            Ok(ap)
        }
        ApMode::Coco101 => {
            // Precision envelope from the right, then sample 101 recalls.
            let mut env: Vec<PrPoint> = points;
            let mut running = 0.0f64;
            for p in env.iter_mut().rev() {
                running = running.max(p.precision);
                p.precision = running;
            }
            let mut ap = 0.0;
            for i in 0..=100u32 {
                let r = i as f64 / 100.0;
                let p = env
                    .iter()
                    .find(|pt| pt.recall >= r)
                    .map_or(0.0, |pt| pt.precision);
                ap += p;
            }
            Ok(ap / 101.0)
        }
    }
}

/// The ten thresholds 0.5, 0.55, ..., 0.95.
pub fn thresholds_5095() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

/// Mean AP over the given IoU thresholds.
pub fn map_at(
    preds: &[ScoredMask],
    gts: &[PixelMask],
    thresholds: &[f64],
    mode: ApMode,
) -> Result<f64> {
    if thresholds.is_empty() {
        return Err(Error::data("map_at requires at least one threshold".to_string()));
    }
    let instances = EvalInstances::prepare(preds, gts);
    let mut sum = 0.0;
    for &tau in thresholds {
        sum += average_precision(&instances.match_at(tau), mode)?;
    }
    Ok(sum / thresholds.len() as f64)
}

/// Per-threshold numbers of the evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdStats {
    pub tau: f64,
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// The `eval` output document.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub map50: f64,
    pub map5095: f64,
    pub per_threshold: Vec<ThresholdStats>,
    pub n_gt: usize,
    pub n_pred: usize,
}

/// Full evaluation at the standard presets.
pub fn evaluate(preds: &[ScoredMask], gts: &[PixelMask], mode: ApMode) -> Result<EvalReport> {
    let instances = EvalInstances::prepare(preds, gts);
    let mut per_threshold = Vec::new();
    let mut sum = 0.0;
    for tau in thresholds_5095() {
        let matched = instances.match_at(tau);
        let ap = average_precision(&matched, mode)?;
        sum += ap;
        per_threshold.push(ThresholdStats {
            tau,
            ap,
            tp: matched.tp(),
            fp: matched.fp(),
            fn_: matched.fn_(),
        });
    }
    Ok(EvalReport {
        map50: per_threshold[0].ap,
        map5095: sum / per_threshold.len() as f64,
        per_threshold,
        n_gt: gts.len(),
        n_pred: preds.len(),
    })
}

/// Default histogram edges: decades from 0.01 ha to 10 000 ha.
pub fn default_size_edges() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 100.0, 1_000.0, 10_000.0]
}

/// Comparison floor used in the size statistics: the practical lower limit
/// of reliable delineation at 10 m resolution (0.25 ha, about 25 pixels).
pub const SIZE_FLOOR_HA: f64 = 0.25;

/// Counts areas into half-open bins `[e_i, e_{i+1})`. A value exactly on an
/// edge lands in the upper bin; values outside the edge span are not
/// counted.
pub fn size_histogram(areas_ha: &[f64], edges_ha: &[f64]) -> Result<Vec<u64>> {
    if edges_ha.len() < 2 || edges_ha.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::data("histogram edges must be strictly increasing".to_string()));
    }
    let mut counts = vec![0u64; edges_ha.len() - 1];
    for &a in areas_ha {
        if a < edges_ha[0] || a >= edges_ha[edges_ha.len() - 1] {
            continue;
        }
        // partition_point: first bin whose lower edge exceeds a, minus one
        let bin = edges_ha.partition_point(|&e| e <= a) - 1;
        counts[bin] += 1;
    }
    Ok(counts)
}

/// The `stats` output document.
#[derive(Debug, Clone, Serialize)]
pub struct SizeStats {
    pub edges_ha: Vec<f64>,
    pub counts: Vec<u64>,
    pub total_fields: usize,
    pub total_area_ha: f64,
    pub floor_ha: f64,
    pub fields_above_floor: usize,
}

pub fn size_stats(areas_ha: &[f64], edges_ha: &[f64], floor_ha: f64) -> Result<SizeStats> {
    Ok(SizeStats {
        edges_ha: edges_ha.to_vec(),
        counts: size_histogram(areas_ha, edges_ha)?,
        total_fields: areas_ha.len(),
        total_area_ha: areas_ha.iter().sum(),
        floor_ha,
        fields_above_floor: areas_ha.iter().filter(|&&a| a >= floor_ha).count(),
    })
}
