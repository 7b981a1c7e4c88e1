//! Strict and loose span-level precision, recall and F1.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::corpus::{Bucket, FrequencyBuckets, Span, SpanFrequencyIndex, SpanSet, TaggedCorpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Boundaries must be identical.
    Strict,
    /// Any token overlap counts.
    Loose,
}

impl MatchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchMode::Strict => "strict",
            MatchMode::Loose => "loose",
        }
    }

    fn matches(self, gold: &Span, pred: &Span) -> bool {
        match self {
            MatchMode::Strict => gold == pred,
            MatchMode::Loose => gold.overlaps(pred),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: MatchMode,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True if any ratio had a zero denominator and was reported as 0.
    #[serde(skip)]
    pub zero_denominator: bool,
}

impl EvalReport {
    pub fn from_counts(mode: MatchMode, tp: usize, fp: usize, fn_: usize) -> Self {
        let mut zero_denominator = false;
        let mut ratio = |num: f64, den: f64| {
            if den == 0.0 {
                zero_denominator = true;
                0.0
            } else {
                num / den
            }
        };
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        EvalReport {
            mode,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            zero_denominator,
        }
    }

    pub fn gold_spans(&self) -> usize {
        self.tp + self.fn_
    }
}

/// Greedy left-to-right one-to-one pairing. Entry `i` is the gold index
/// matched by prediction `i`.
pub fn match_spans(gold: &[Span], pred: &[Span], mode: MatchMode) -> Vec<Option<usize>> {
    let mut used = vec![false; gold.len()];
    pred.iter()
        .map(|p| {
            let hit = (0..gold.len()).find(|&g| !used[g] && mode.matches(&gold[g], p));
            if let Some(g) = hit {
                used[g] = true;
            }
            hit
        })
        .collect()
}

pub fn evaluate(gold: &[SpanSet], pred: &[SpanSet], mode: MatchMode) -> Result<EvalReport> {
    check_sentences(gold.len(), pred.len())?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let pairs = match_spans(g, p, mode);
        let hits = pairs.iter().flatten().count();
        tp += hits;
        fp += p.len() - hits;
        fn_ += g.len() - hits;
    }
    Ok(EvalReport::from_counts(mode, tp, fp, fn_))
}

/// Span-F1 split by how often each span's surface text occurs in training.
///
/// Gold spans go to the bucket of their training count. A matched prediction
/// is a true positive in its gold span's bucket; an unmatched one is a false
/// positive in the bucket of its own surface count.
pub fn bucketed_f1(
    gold: &TaggedCorpus,
    pred: &[SpanSet],
    index: &SpanFrequencyIndex,
    buckets: &FrequencyBuckets,
    mode: MatchMode,
) -> Result<Vec<(Bucket, EvalReport)>> {
    check_sentences(gold.sentences.len(), pred.len())?;
    let mut counts = [[0usize; 3]; 4];
    for (sentence, p) in gold.sentences.iter().zip(pred) {
        let g = sentence.spans();
        let pairs = match_spans(&g, p, mode);
        let mut gold_hit = vec![false; g.len()];
        for (pi, pair) in pairs.iter().enumerate() {
            match pair {
                Some(gi) => {
                    gold_hit[*gi] = true;
                    let b = buckets.bucket_of(index.count(&sentence.surface(g[*gi])));
                    counts[b.index()][0] += 1;
                }
                None => {
                    let b = buckets.bucket_of(index.count(&sentence.surface(p[pi])));
                    counts[b.index()][1] += 1;
                }
            }
        }
        for (gi, hit) in gold_hit.iter().enumerate() {
            if !hit {
                let b = buckets.bucket_of(index.count(&sentence.surface(g[gi])));
                counts[b.index()][2] += 1;
            }
        }
    }
    Ok(Bucket::ALL
        .iter()
        .map(|&b| {
            let [tp, fp, fn_] = counts[b.index()];
            (b, EvalReport::from_counts(mode, tp, fp, fn_))
        })
        .collect())
}

fn check_sentences(gold: usize, pred: usize) -> Result<()> {
    if gold != pred {
        return Err(Error::Alignment {
            what: "predicted sentences",
            expected: gold,
            found: pred,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

/// One row of a hyperparameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub k: usize,
    pub lambda: f64,
    pub temperature: f64,
    pub report: EvalReport,
}

fn report_fields(r: &EvalReport) -> String {
    format!(
        "\"mode\":\"{}\",\"tp\":{},\"fp\":{},\"fn\":{},\"precision\":{:.4},\"recall\":{:.4},\"f1\":{:.4}",
        r.mode.as_str(),
        r.tp,
        r.fp,
        r.fn_,
        r.precision,
        r.recall,
        r.f1
    )
}

const REPORT_HEADER: &str = "mode,tp,fp,fn,precision,recall,f1";

fn report_csv_fields(r: &EvalReport) -> String {
    format!(
        "{},{},{},{},{:.4},{:.4},{:.4}",
        r.mode.as_str(),
        r.tp,
        r.fp,
        r.fn_,
        r.precision,
        r.recall,
        r.f1
    )
}

/// Fixed field order; floats with four decimals.
pub fn render_reports(reports: &[EvalReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let items: Vec<String> = reports
                .iter()
                .map(|r| format!("{{{}}}", report_fields(r)))
                .collect();
            format!("[{}]\n", items.join(","))
        }
        ReportFormat::Csv => {
            let mut out = format!("{REPORT_HEADER}\n");
            for r in reports {
                let _ = writeln!(out, "{}", report_csv_fields(r));
            }
            out
        }
    }
}

pub fn render_bucket_reports(reports: &[(Bucket, EvalReport)], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let items: Vec<String> = reports
                .iter()
                .map(|(b, r)| format!("{{\"bucket\":\"{}\",{}}}", b.label(), report_fields(r)))
                .collect();
            format!("[{}]\n", items.join(","))
        }
        ReportFormat::Csv => {
            let mut out = format!("bucket,{REPORT_HEADER}\n");
            for (b, r) in reports {
                let _ = writeln!(out, "{},{}", b.label(), report_csv_fields(r));
            }
            out
        }
    }
}

pub fn render_grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::from("k,lambda,T,precision,recall,f1\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4}",
            row.k, row.lambda, row.temperature, row.report.precision, row.report.recall, row.report.f1
        );
    }
    out
}

pub fn emit_report(reports: &[EvalReport], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_reports(reports, format))?;
    Ok(())
}

pub fn emit_grid_csv(rows: &[GridRow], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_grid_csv(rows))?;
    Ok(())
}
