//! Overlap and severity metrics, correlation, and the weighted segmentation loss.

mod report;
mod shape;
mod stats;

pub use report::{cohort_summary, write_cases_csv, CaseRow, CohortSummary, Correlation, SeriesStats};
pub use shape::{sphericity, surface_area};
pub use stats::{ln_gamma, pearson, regularized_beta, student_t_two_sided};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::{Grid, HuVolume, Mask3, NormVolume};

/// Default high-opacity threshold (HU); voxels at or above it count.
pub const HIGH_OPACITY_HU: i16 = -200;

/// Probability clamp of [`weighted_bce`].
pub const BCE_EPS: f64 = 1e-7;

/// Per-case quantification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseMetrics {
    pub dsc: f64,
    /// Percent of the lung.
    pub po: f64,
    /// Percent of the lung.
    pub pho: f64,
    /// Absent when the lesion is empty.
    pub lir: Option<f64>,
}

fn count_both(a: &Mask3, b: &Mask3) -> usize {
    a.data().iter().zip(b.data()).filter(|(&x, &y)| x != 0 && y != 0).count()
}

/// `2|a ∩ b| / (|a| + |b|)`, 1 for two empty masks.
pub fn dice(a: &Mask3, b: &Mask3) -> Result<f64> {
    a.geometry().ensure_matches(b.geometry(), "dice")?;
    let total = a.count() + b.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * count_both(a, b) as f64 / total as f64)
}

/// Lesion inclusion rate `|lesion ∩ lung| / |lesion|`.
pub fn lir(lesion: &Mask3, lung: &Mask3) -> Result<f64> {
    lesion.geometry().ensure_matches(lung.geometry(), "lir")?;
    let n = lesion.count();
    if n == 0 {
        return Err(Error::UndefinedMetric("lesion inclusion rate of an empty lesion".into()));
    }
    Ok(count_both(lesion, lung) as f64 / n as f64)
}

fn lung_count(lung: &Mask3, what: &str) -> Result<usize> {
    match lung.count() {
        0 => Err(Error::Precondition(format!("{what}: empty lung mask"))),
        n => Ok(n),
    }
}

/// Percentage of opacity: `100 |lesion ∩ lung| / |lung|`.
pub fn po(lesion: &Mask3, lung: &Mask3) -> Result<f64> {
    lesion.geometry().ensure_matches(lung.geometry(), "po")?;
    let n = lung_count(lung, "po")?;
    Ok(100.0 * count_both(lesion, lung) as f64 / n as f64)
}

/// Percentage of high opacity: lesion voxels inside the lung at or above
/// `threshold` HU, as a percent of the lung.
pub fn pho(lesion: &Mask3, volume: &HuVolume, lung: &Mask3, threshold: i16) -> Result<f64> {
    lesion.geometry().ensure_matches(lung.geometry(), "pho")?;
    lesion.geometry().ensure_matches(volume.geometry(), "pho")?;
    let n = lung_count(lung, "pho")?;
    let high = lesion
        .data()
        .iter()
        .zip(lung.data())
        .zip(volume.data())
        .filter(|((&m, &l), &hu)| m != 0 && l != 0 && hu >= threshold)
        .count();
    Ok(100.0 * high as f64 / n as f64)
}

/// All per-case metrics of a prediction against ground truth; PO and PHO
/// are those of the prediction, LIR that of the ground-truth lesion.
pub fn case_metrics(pred: &Mask3, gt: &Mask3, lung: &Mask3, volume: &HuVolume, threshold: i16) -> Result<CaseMetrics> {
    Ok(CaseMetrics {
        dsc: dice(pred, gt)?,
        po: po(pred, lung)?,
        pho: pho(pred, volume, lung, threshold)?,
        lir: match lir(gt, lung) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        },
    })
}

/// Per-voxel loss weight `1 + gamma1 * y / (1 + exp(-gamma2 * x))`.
#[inline]
pub fn bce_weight(y: f64, x: f64, gamma1: f64, gamma2: f64) -> f64 {
    1.0 + gamma1 * y / (1.0 + (-gamma2 * x).exp())
}

/// Mean of `-w [y ln p + (1 - y) ln(1 - p)]` with `p` clamped to
/// `[1e-7, 1 - 1e-7]` and `w` from [`bce_weight`] on the normalized intensity `x`.
pub fn weighted_bce(p: &Grid<f64>, y: &Mask3, x: &NormVolume, gamma1: f64, gamma2: f64) -> Result<f64> {
    p.geometry().ensure_matches(y.geometry(), "weighted_bce")?;
    p.geometry().ensure_matches(x.geometry(), "weighted_bce")?;
    if p.data().iter().any(|v| v.is_nan()) {
        return Err(Error::Parameter("NaN probability".into()));
    }
    let n = p.data().len();
    let total: f64 = p
        .data()
        .iter()
        .zip(y.data())
        .zip(x.data())
        .map(|((&p, &y), &x)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            let y = if y != 0 { 1.0 } else { 0.0 };
            let w = bce_weight(y, x as f64, gamma1, gamma2);
            -w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / n as f64)
}
