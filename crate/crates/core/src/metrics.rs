//! DICE and Jaccard overlap scores between hard label masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LabelMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub phase: usize,
    pub dice: f64,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub regions: Vec<RegionScore>,
    pub mean_dice: f64,
    pub mean_jaccard: f64,
    /// Whether phase 0 entered the averages.
    pub include_background: bool,
}

struct Counts {
    pred: usize,
    truth: usize,
    both: usize,
}

fn counts(pred: &LabelMask, truth: &LabelMask, phase: usize) -> Result<Counts> {
    if pred.shape() != truth.shape() {
        return Err(Error::ShapeMismatch {
            expected: truth.shape(),
            found: pred.shape(),
        });
    }
    let mut c = Counts {
        pred: 0,
        truth: 0,
        both: 0,
    };
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        let (a, b) = (p == phase, t == phase);
        c.pred += usize::from(a);
        c.truth += usize::from(b);
        c.both += usize::from(a && b);
    }
    Ok(c)
}

/// `2 |A & B| / (|A| + |B|)`; 1 when both sets are empty.
pub fn dice(pred: &LabelMask, truth: &LabelMask, phase: usize) -> Result<f64> {
    let c = counts(pred, truth, phase)?;
    let total = c.pred + c.truth;
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * c.both as f64 / total as f64
    })
}

/// `|A & B| / |A | B|`; 1 when both sets are empty.
pub fn jaccard(pred: &LabelMask, truth: &LabelMask, phase: usize) -> Result<f64> {
    let c = counts(pred, truth, phase)?;
    let union = c.pred + c.truth - c.both;
    Ok(if union == 0 {
        1.0
    } else {
        c.both as f64 / union as f64
    })
}

/// Scores every phase in `0..phases` and averages either all of them or
/// only the foreground phases `1..phases`.
pub fn score_all(
    pred: &LabelMask,
    truth: &LabelMask,
    phases: usize,
    include_background: bool,
) -> Result<ScoreSummary> {
    let regions = (0..phases)
        .map(|phase| {
            Ok(RegionScore {
                phase,
                dice: dice(pred, truth, phase)?,
                jaccard: jaccard(pred, truth, phase)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let skip = usize::from(!include_background && phases > 1);
    let (mean_dice, mean_jaccard) = mean_scores(&regions[skip..]);
    Ok(ScoreSummary {
        regions,
        mean_dice,
        mean_jaccard,
        include_background,
    })
}

/// Arithmetic means of the DICE and Jaccard values.
pub fn mean_scores(regions: &[RegionScore]) -> (f64, f64) {
    if regions.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = regions.len() as f64;
    (
        regions.iter().map(|r| r.dice).sum::<f64>() / n,
        regions.iter().map(|r| r.jaccard).sum::<f64>() / n,
    )
}
