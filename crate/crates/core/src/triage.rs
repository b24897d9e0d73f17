//! Ranking, tiering, and triage evaluation metrics.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::Mask;
use crate::scoring::ScoredProperty;

/// Properties in dispatch order: severity descending, then confidence
/// descending, then claim id ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList(Vec<ScoredProperty>);

impl RankedList {
    pub fn items(&self) -> &[ScoredProperty] {
        &self.0
    }

    pub fn into_items(self) -> Vec<ScoredProperty> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Per-position membership in `truth` (claim ids). Fails if `truth`
    /// names a claim that is not in the list.
    pub fn hits(&self, truth: &BTreeSet<String>) -> Result<Vec<bool>> {
        let hits: Vec<bool> = self.0.iter().map(|p| truth.contains(&p.property.claim_id)).collect();
        let found = hits.iter().filter(|&&h| h).count();
        if found != truth.len() {
            return Err(Error::Config(format!(
                "{} ground-truth claims are not in the portfolio",
                truth.len() - found
            )));
        }
        Ok(hits)
    }

    /// `k(tau)`: number of properties with severity at least `tau`.
    pub fn cutoff_at(&self, tau: f64) -> usize {
        self.0.iter().filter(|p| p.severity >= tau).count()
    }
}

fn rank_order(a: &ScoredProperty, b: &ScoredProperty) -> Ordering {
    b.severity
        .total_cmp(&a.severity)
        .then(b.confidence.total_cmp(&a.confidence))
        .then_with(|| a.property.claim_id.cmp(&b.property.claim_id))
}

pub fn rank(mut scored: Vec<ScoredProperty>) -> RankedList {
    scored.sort_by(rank_order);
    RankedList(scored)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierBoundaries {
    /// Immediate dispatch at severity >= t1.
    pub t1: f64,
    /// Remote settlement below t2 ...
    pub t2: f64,
    /// ... when confidence >= c3_min.
    pub c3_min: f64,
}

impl Default for TierBoundaries {
    fn default() -> Self {
        Self {
            t1: 0.40,
            t2: 0.15,
            c3_min: 0.70,
        }
    }
}

impl TierBoundaries {
    pub fn validate(&self) -> Result<()> {
        if 0.0 < self.t2 && self.t2 < self.t1 && self.t1 < 1.0 && (0.0..=1.0).contains(&self.c3_min) {
            Ok(())
        } else {
            Err(Error::BadBoundaries)
        }
    }

    /// Tier 1, 2, or 3. Low-severity, low-confidence cases fall to tier 2.
    pub fn tier_of(&self, severity: f64, confidence: f64) -> u8 {
        if severity >= self.t1 {
            1
        } else if severity < self.t2 && confidence >= self.c3_min {
            3
        } else {
            2
        }
    }
}

/// Tier per ranked position.
pub fn assign_tiers(ranked: &RankedList, boundaries: &TierBoundaries) -> Result<Vec<u8>> {
    boundaries.validate()?;
    Ok(ranked
        .items()
        .iter()
        .map(|p| boundaries.tier_of(p.severity, p.confidence))
        .collect())
}

/// Inspection reduction rate `1 - k/n`.
pub fn irr(k: usize, n_fnol: usize) -> Result<f64> {
    if n_fnol == 0 || k > n_fnol {
        return Err(Error::BadCutoff { k, n: n_fnol });
    }
    Ok(1.0 - k as f64 / n_fnol as f64)
}

fn check_hits(hits: &[bool], k: usize) -> Result<usize> {
    if k > hits.len() || hits.is_empty() {
        return Err(Error::BadCutoff { k, n: hits.len() });
    }
    let n_truth = hits.iter().filter(|&&h| h).count();
    if n_truth == 0 {
        return Err(Error::EmptyTruth);
    }
    Ok(n_truth)
}

/// Recall and dispatch false-discovery proportion of the top `k`, from
/// per-position truth flags. dFDR is 0 at `k = 0`.
pub fn recall_dfdr_hits(hits: &[bool], k: usize) -> Result<(f64, f64)> {
    let n_truth = check_hits(hits, k)?;
    let tp = hits[..k].iter().filter(|&&h| h).count();
    let recall = tp as f64 / n_truth as f64;
    let dfdr = if k == 0 { 0.0 } else { (k - tp) as f64 / k as f64 };
    Ok((recall, dfdr))
}

pub fn recall_dfdr(ranked: &RankedList, truth: &BTreeSet<String>, k: usize) -> Result<(f64, f64)> {
    recall_dfdr_hits(&ranked.hits(truth)?, k)
}

/// `IRR(k) * Recall(k) * (1 - dFDR(k))`.
pub fn tes_hits(hits: &[bool], k: usize) -> Result<f64> {
    let (recall, dfdr) = recall_dfdr_hits(hits, k)?;
    Ok(irr(k, hits.len())? * recall * (1.0 - dfdr))
}

pub fn tes(ranked: &RankedList, truth: &BTreeSet<String>, k: usize) -> Result<f64> {
    tes_hits(&ranked.hits(truth)?, k)
}

/// Smallest `k` whose recall reaches `rho`, or `n` if none does.
pub fn cutoff_for_recall(hits: &[bool], rho: f64) -> Result<usize> {
    let n_truth = check_hits(hits, 0)?;
    let target = rho * n_truth as f64;
    // integer hit count needed, robust to rho * n landing just above an integer
    let needed = {
        let r = target.round();
        if (target - r).abs() < 1e-9 {
            r as usize
        } else {
            target.ceil() as usize
        }
    };
    if needed == 0 {
        return Ok(0);
    }
    let mut tp = 0;
    for (i, &h) in hits.iter().enumerate() {
        if h {
            tp += 1;
            if tp >= needed {
                return Ok(i + 1);
            }
        }
    }
    Ok(hits.len())
}

/// IRR at the minimum dispatch count reaching recall `rho`.
pub fn irr_at_recall(hits: &[bool], rho: f64) -> Result<f64> {
    irr(cutoff_for_recall(hits, rho)?, hits.len())
}

/// Recall levels over which AUIRC is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecallGrid {
    /// Exact area under the step curve: IRR is constant on each interval
    /// `((j-1)/T, j/T]` of the `T` truth claims.
    #[default]
    Exact,
    /// Trapezoid over this many uniform levels on [0, 1], including the
    /// jump at `rho = 0` where `IRR = 1`.
    Uniform(usize),
}

/// Area under IRR(k(rho)) for rho in [0, 1].
pub fn auirc_hits(hits: &[bool], grid: RecallGrid) -> Result<f64> {
    let n_truth = check_hits(hits, 0)?;
    match grid {
        RecallGrid::Exact => {
            let n = hits.len() as f64;
            let sum: f64 = hits
                .iter()
                .enumerate()
                .filter(|(_, &h)| h)
                .map(|(i, _)| 1.0 - (i + 1) as f64 / n)
                .sum();
            Ok(sum / n_truth as f64)
        }
        RecallGrid::Uniform(levels) => {
            if levels < 2 {
                return Err(Error::BadConfig("AUIRC needs at least 2 recall levels".into()));
            }
            let ys = (0..levels)
                .map(|j| irr_at_recall(hits, j as f64 / (levels - 1) as f64))
                .collect::<Result<Vec<f64>>>()?;
            let h = 1.0 / (levels - 1) as f64;
            Ok(ys.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum())
        }
    }
}

pub fn auirc(ranked: &RankedList, truth: &BTreeSet<String>, grid: RecallGrid) -> Result<f64> {
    auirc_hits(&ranked.hits(truth)?, grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtentMetrics {
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Confusion-count extent scores. Ratios with an empty denominator are 1
/// when nothing is missed in either direction and 0 otherwise.
pub fn extent_metrics(pred: &Mask, truth: &Mask) -> Result<ExtentMetrics> {
    pred.ensure_same_grid(truth)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.cells().iter().zip(truth.cells()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let ratio = |num: usize, den: usize, other_err: usize| {
        if den == 0 {
            if other_err == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp, fn_);
    let recall = ratio(tp, tp + fn_, fp);
    let iou = ratio(tp, tp + fp + fn_, 0);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ExtentMetrics {
        precision,
        recall,
        iou,
        f1,
        tp,
        fp,
        fn_,
    })
}

/// Headline triage scores for one ranked list against one truth set.
#[derive(Debug, Clone, PartialEq)]
pub struct TriageMetrics {
    pub n: usize,
    pub n_truth: usize,
    /// Dispatch count at the severity cutoff.
    pub k: usize,
    pub irr: f64,
    pub recall: f64,
    pub dfdr: f64,
    pub tes: f64,
    pub auirc: f64,
    /// `(rho, IRR(k(rho)))` at the requested recall levels.
    pub irr_at_recall: Vec<(f64, f64)>,
    /// `(k, Recall(k))` and `(k, dFDR(k))` at `CURVE_POINTS` evenly spaced
    /// cutoffs from 0 to n.
    pub recall_curve: Vec<(usize, f64)>,
    pub dfdr_curve: Vec<(usize, f64)>,
}

impl TriageMetrics {
    pub fn irr_at(&self, rho: f64) -> Option<f64> {
        self.irr_at_recall
            .iter()
            .find(|(r, _)| (r - rho).abs() < 1e-12)
            .map(|&(_, v)| v)
    }
}

pub const REPORT_RECALL_LEVELS: [f64; 3] = [0.8, 0.9, 0.95];
pub const CURVE_POINTS: usize = 21;

/// Metrics with the dispatch cutoff `k = |{s >= tau}|`.
pub fn evaluate(ranked: &RankedList, truth: &BTreeSet<String>, tau: f64) -> Result<TriageMetrics> {
    let hits = ranked.hits(truth)?;
    let k = ranked.cutoff_at(tau);
    let (recall, dfdr) = recall_dfdr_hits(&hits, k)?;
    let n = hits.len();
    let mut recall_curve = Vec::with_capacity(CURVE_POINTS);
    let mut dfdr_curve = Vec::with_capacity(CURVE_POINTS);
    for j in 0..CURVE_POINTS {
        let kj = (j * n + (CURVE_POINTS - 1) / 2) / (CURVE_POINTS - 1);
        let (r, d) = recall_dfdr_hits(&hits, kj)?;
        recall_curve.push((kj, r));
        dfdr_curve.push((kj, d));
    }
    Ok(TriageMetrics {
        n: hits.len(),
        n_truth: truth.len(),
        k,
        irr: irr(k, hits.len())?,
        recall,
        dfdr,
        tes: tes_hits(&hits, k)?,
        auirc: auirc_hits(&hits, RecallGrid::Exact)?,
        irr_at_recall: REPORT_RECALL_LEVELS
            .iter()
            .map(|&rho| irr_at_recall(&hits, rho).map(|v| (rho, v)))
            .collect::<Result<_>>()?,
        recall_curve,
        dfdr_curve,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepMetrics {
    pub irr_at_90: f64,
    pub tes: f64,
    pub auirc: f64,
    /// TES change when the tier-1 boundary moves down / up by the delta.
    pub tes_delta_t1_minus: f64,
    pub tes_delta_t1_plus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub n_truth: usize,
    /// `None` when the truth set is empty at this threshold.
    pub metrics: Option<SweepMetrics>,
}

/// Triage metrics across damage thresholds. `truth_for(theta)` returns the
/// ground-truth high-severity claims at that threshold; TES uses the
/// tier-1 cutoff, and its sensitivity to moving `t1` by `+-delta` is
/// reported alongside.
pub fn sensitivity_sweep<F>(
    ranked: &RankedList,
    thetas: &[f64],
    truth_for: F,
    boundaries: &TierBoundaries,
    delta: f64,
) -> Result<Vec<SweepRow>>
where
    F: Fn(f64) -> BTreeSet<String> + Sync,
{
    if thetas.is_empty() {
        return Err(Error::BadConfig("sensitivity sweep needs at least one theta".into()));
    }
    boundaries.validate()?;
    thetas
        .par_iter()
        .map(|&theta| {
            let truth = truth_for(theta);
            if truth.is_empty() {
                return Ok(SweepRow {
                    theta,
                    n_truth: 0,
                    metrics: None,
                });
            }
            let hits = ranked.hits(&truth)?;
            let tes_at = |t1: f64| tes_hits(&hits, ranked.cutoff_at(t1));
            let base = tes_at(boundaries.t1)?;
            Ok(SweepRow {
                theta,
                n_truth: truth.len(),
                metrics: Some(SweepMetrics {
                    irr_at_90: irr_at_recall(&hits, 0.9)?,
                    tes: base,
                    auirc: auirc_hits(&hits, RecallGrid::Exact)?,
                    tes_delta_t1_minus: tes_at(boundaries.t1 - delta)? - base,
                    tes_delta_t1_plus: tes_at(boundaries.t1 + delta)? - base,
                }),
            })
        })
        .collect()
}
