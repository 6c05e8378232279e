//! Cohort report: per-case CSV rows and a JSON summary.

use std::io::Write;

use serde::Serialize;

use super::stats::pearson;
use crate::error::{Error, Result};

/// One CSV row. `lir` is an empty cell when undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRow {
    pub id: String,
    pub dsc: f64,
    pub po_pred: f64,
    pub po_gt: f64,
    pub pho_pred: f64,
    pub pho_gt: f64,
    pub lir: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesStats {
    pub mean: f64,
    /// Sample standard deviation; absent for fewer than two values.
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub n_cases: usize,
    pub dsc: Option<SeriesStats>,
    pub po_pred: Option<SeriesStats>,
    pub po_gt: Option<SeriesStats>,
    pub pho_pred: Option<SeriesStats>,
    pub pho_gt: Option<SeriesStats>,
    /// Over cases with a defined LIR.
    pub lir: Option<SeriesStats>,
    /// Predicted vs ground-truth PO; absent when undefined.
    pub pearson_po: Option<Correlation>,
    pub pearson_pho: Option<Correlation>,
}

fn series_stats(values: &[f64]) -> Option<SeriesStats> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    Some(SeriesStats { mean, sd })
}

fn correlation(x: &[f64], y: &[f64]) -> Option<Correlation> {
    pearson(x, y).ok().map(|(r, p)| Correlation { r, p })
}

pub fn cohort_summary(rows: &[CaseRow]) -> CohortSummary {
    let col = |f: fn(&CaseRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let (po_pred, po_gt) = (col(|r| r.po_pred), col(|r| r.po_gt));
    let (pho_pred, pho_gt) = (col(|r| r.pho_pred), col(|r| r.pho_gt));
    let lir: Vec<f64> = rows.iter().filter_map(|r| r.lir).collect();
    CohortSummary {
        n_cases: rows.len(),
        dsc: series_stats(&col(|r| r.dsc)),
        po_pred: series_stats(&po_pred),
        po_gt: series_stats(&po_gt),
        pho_pred: series_stats(&pho_pred),
        pho_gt: series_stats(&pho_gt),
        lir: series_stats(&lir),
        pearson_po: correlation(&po_pred, &po_gt),
        pearson_pho: correlation(&pho_pred, &pho_gt),
    }
}

/// Writes the header `id,dsc,po_pred,po_gt,pho_pred,pho_gt,lir` and one row per case.
pub fn write_cases_csv(rows: &[CaseRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "dsc", "po_pred", "po_gt", "pho_pred", "pho_gt", "lir"])
        .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.dsc.to_string(),
            r.po_pred.to_string(),
            r.po_gt.to_string(),
            r.pho_pred.to_string(),
            r.pho_gt.to_string(),
            r.lir.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::Unsupported(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, po: f64, lir: Option<f64>) -> CaseRow {
        CaseRow {
            id: id.into(),
            dsc: 1.0,
            po_pred: po,
            po_gt: po,
            pho_pred: po / 2.0,
            pho_gt: po / 2.0,
            lir,
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_cases_csv(&[row("a", 1.5, Some(0.5)), row("b", 2.0, None)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "id,dsc,po_pred,po_gt,pho_pred,pho_gt,lir\na,1,1.5,1.5,0.75,0.75,0.5\nb,1,2,2,1,1,\n"
        );
    }

    #[test]
    fn identical_predictions_correlate_perfectly() {
        let rows: Vec<CaseRow> = (0..5).map(|i| row(&i.to_string(), i as f64 * 3.0 + 1.0, None)).collect();
        let s = cohort_summary(&rows);
        assert_eq!(s.n_cases, 5);
        assert_eq!(s.pearson_po.unwrap().r, 1.0);
        assert_eq!(s.dsc.unwrap().mean, 1.0);
        assert!(s.lir.is_none());
        assert!((s.po_pred.unwrap().mean - 7.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_cases_leave_correlation_absent() {
        let s = cohort_summary(&[row("a", 1.0, Some(1.0)), row("b", 2.0, Some(1.0))]);
        assert!(s.pearson_po.is_none());
        assert_eq!(s.lir.unwrap().sd, Some(0.0));
    }
}
