//! All-pairs evaluation: HD distributions, ROC, EER, AUC, d-prime and F1.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{io_err, IrisError, Result};
use crate::id::TemplateId;
use crate::matching::{match_with_shifts, MatchPolicy, MatchResult};
use crate::template::IrisTemplate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    Genuine,
    Impostor,
}

impl PairKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::Genuine => "genuine",
            PairKind::Impostor => "impostor",
        }
    }

    /// Same subject and eye is genuine, different subjects impostor; the
    /// other eye of the same subject is not compared.
    pub fn classify(a: &TemplateId, b: &TemplateId) -> Option<Self> {
        if a.same_class(b) {
            Some(PairKind::Genuine)
        } else if a.subject != b.subject {
            Some(PairKind::Impostor)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct PairScore {
    pub a: TemplateId,
    pub b: TemplateId,
    pub kind: PairKind,
    pub result: MatchResult,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub genuine_hd_mean: f64,
    pub genuine_hd_std: f64,
    pub impostor_hd_mean: f64,
    pub impostor_hd_std: f64,
    pub eer: f64,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub d_prime: f64,
    pub f1: f64,
    pub threshold: f64,
    pub genuine_count: usize,
    pub impostor_count: usize,
    /// Pairs dropped for insufficient overlap at every shift.
    pub skipped_count: usize,
}

impl MetricsReport {
    pub fn comparison_count(&self) -> usize {
        self.genuine_count + self.impostor_count
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// ROC over thresholds 0, every distinct score, and just above 1; a score
/// is accepted when strictly below the threshold.
pub fn roc_curve(genuine: &[f64], impostor: &[f64]) -> Vec<RocPoint> {
    let mut thresholds: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    thresholds.push(0.0);
    thresholds.push(1.0 + 1e-9);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut g = genuine.to_vec();
    let mut i = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    thresholds
        .into_iter()
        .map(|t| {
            let below = |v: &[f64]| v.partition_point(|&x| x < t);
            RocPoint {
                threshold: t,
                far: below(&i) as f64 / i.len() as f64,
                frr: (g.len() - below(&g)) as f64 / g.len() as f64,
            }
        })
        .collect()
}

/// Equal error rate by linear interpolation at the first sweep point where
/// FAR reaches FRR.
pub fn equal_error_rate(roc: &[RocPoint]) -> f64 {
    let Some(i) = roc.iter().position(|p| p.far >= p.frr) else {
        return 1.0;
    };
    if i == 0 {
        return roc[0].far;
    }
    let (a, b) = (roc[i - 1], roc[i]);
    let da = a.far - a.frr;
    let db = b.far - b.frr;
    let s = da / (da - db);
    a.far + s * (b.far - a.far)
}

/// Area under (FAR, 1 - FRR) by the trapezoid rule.
pub fn area_under_curve(roc: &[RocPoint]) -> f64 {
    roc.windows(2)
        .map(|w| (w[1].far - w[0].far) * ((1.0 - w[0].frr) + (1.0 - w[1].frr)) / 2.0)
        .sum()
}

pub fn d_prime(genuine: &[f64], impostor: &[f64]) -> f64 {
    let (mg, sg) = mean_std(genuine);
    let (mi, si) = mean_std(impostor);
    let pooled = ((sg * sg + si * si) / 2.0).sqrt();
    if pooled == 0.0 {
        return if mg == mi { 0.0 } else { f64::INFINITY };
    }
    (mi - mg).abs() / pooled
}

/// F1 of genuine-pair detection when accepting `hd < threshold`.
pub fn f1_score(genuine: &[f64], impostor: &[f64], threshold: f64) -> f64 {
    let tp = genuine.iter().filter(|&&h| h < threshold).count() as f64;
    let fn_ = genuine.len() as f64 - tp;
    let fp = impostor.iter().filter(|&&h| h < threshold).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    2.0 * precision * recall / (precision + recall)
}

pub fn report_from_scores(genuine: &[f64], impostor: &[f64], threshold: f64) -> Result<MetricsReport> {
    if genuine.is_empty() {
        return Err(IrisError::Evaluation("no genuine pairs to compare".into()));
    }
    if impostor.is_empty() {
        return Err(IrisError::Evaluation("no impostor pairs to compare".into()));
    }
    let (gm, gs) = mean_std(genuine);
    let (im, is) = mean_std(impostor);
    let roc = roc_curve(genuine, impostor);
    Ok(MetricsReport {
        genuine_hd_mean: gm,
        genuine_hd_std: gs,
        impostor_hd_mean: im,
        impostor_hd_std: is,
        eer: equal_error_rate(&roc),
        auc: area_under_curve(&roc),
        roc,
        d_prime: d_prime(genuine, impostor),
        f1: f1_score(genuine, impostor, threshold),
        threshold,
        genuine_count: genuine.len(),
        impostor_count: impostor.len(),
        skipped_count: 0,
    })
}

/// Matches every unordered pair (in parallel) and summarises the genuine
/// and impostor distributions.
pub fn evaluate_database(
    templates: &[(TemplateId, IrisTemplate)],
    policy: &MatchPolicy,
) -> Result<(MetricsReport, Vec<PairScore>)> {
    policy.validate()?;
    let mut pairs = Vec::new();
    for i in 0..templates.len() {
        for j in i + 1..templates.len() {
            if let Some(kind) = PairKind::classify(&templates[i].0, &templates[j].0) {
                pairs.push((i, j, kind));
            }
        }
    }
    let results: Vec<Result<Option<PairScore>>> = pairs
        .par_iter()
        .map(|&(i, j, kind)| {
            match match_with_shifts(&templates[i].1, &templates[j].1, policy) {
                Ok(result) => Ok(Some(PairScore {
                    a: templates[i].0.clone(),
                    b: templates[j].0.clone(),
                    kind,
                    result,
                })),
                Err(IrisError::InsufficientOverlap { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut scores = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(s) => scores.push(s),
            None => skipped += 1,
        }
    }
    let pick = |k: PairKind| -> Vec<f64> {
        scores.iter().filter(|s| s.kind == k).map(|s| s.result.hd).collect()
    };
    let mut report = report_from_scores(&pick(PairKind::Genuine), &pick(PairKind::Impostor), policy.threshold)?;
    report.skipped_count = skipped;
    Ok((report, scores))
}

pub fn write_pairs_csv(path: &Path, scores: &[PairScore]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label_a", "label_b", "kind", "hd", "numerator", "denominator", "best_shift"])?;
    for s in scores {
        w.write_record([
            s.a.to_string(),
            s.b.to_string(),
            s.kind.as_str().to_string(),
            format!("{:.6}", s.result.hd),
            s.result.numerator.to_string(),
            s.result.denominator.to_string(),
            s.result.best_shift.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn summary_rows(r: &MetricsReport) -> Vec<(&'static str, String)> {
    vec![
        ("comparisons", r.comparison_count().to_string()),
        ("genuine_comparisons", r.genuine_count.to_string()),
        ("impostor_comparisons", r.impostor_count.to_string()),
        ("skipped_comparisons", r.skipped_count.to_string()),
        ("genuine_hd_mean", format!("{:.6}", r.genuine_hd_mean)),
        ("genuine_hd_std", format!("{:.6}", r.genuine_hd_std)),
        ("impostor_hd_mean", format!("{:.6}", r.impostor_hd_mean)),
        ("impostor_hd_std", format!("{:.6}", r.impostor_hd_std)),
        ("eer", format!("{:.6}", r.eer)),
        ("auc", format!("{:.6}", r.auc)),
        ("d_prime", format!("{:.4}", r.d_prime)),
        ("f1", format!("{:.6}", r.f1)),
        ("threshold", format!("{}", r.threshold)),
    ]
}

pub fn write_summary_csv(path: &Path, r: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "value"])?;
    for (k, v) in summary_rows(r) {
        w.write_record([k, v.as_str()])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_roc_csv(path: &Path, r: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "far", "frr"])?;
    for p in &r.roc {
        w.write_record([
            format!("{:.9}", p.threshold),
            format!("{:.9}", p.far),
            format!("{:.9}", p.frr),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

/// Human-readable summary table.
pub fn print_summary(out: &mut impl Write, r: &MetricsReport) -> std::io::Result<()> {
    for (k, v) in summary_rows(r) {
        writeln!(out, "{k:<22} {v}")?;
    }
    Ok(())
}
