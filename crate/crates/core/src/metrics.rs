//! Classification metrics and the clean / adversarial / fusion evaluation
//! protocols. The positive class is the synthetic one (label 1); the
//! decision threshold on the positive-class probability is 0.5.

use crate::error::{Error, Result};
use crate::profiler::CostReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Spatial,
    Spectral,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Spatial => "spatial",
            Domain::Spectral => "spectral",
        }
    }
}

/// Per-sample outcome: both domain scores, the derived label decisions, and
/// the ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub score_p: f64,
    pub score_f: f64,
    pub y_p: u8,
    pub y_f: u8,
    pub g: u8,
}

impl PredictionRecord {
    pub fn new(score_p: f64, score_f: f64, g: u8) -> Self {
        PredictionRecord {
            score_p,
            score_f,
            y_p: u8::from(score_p >= 0.5),
            y_f: u8::from(score_f >= 0.5),
            g,
        }
    }

    fn score(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Spatial => self.score_p,
            Domain::Spectral => self.score_f,
        }
    }

    fn label(&self, domain: Domain) -> u8 {
        match domain {
            Domain::Spatial => self.y_p,
            Domain::Spectral => self.y_f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSetting {
    Clean(Domain),
    AdvSpatial,
    AdvSpectral,
    AdvFusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// F1 and AUC exist only for single-domain settings.
    pub f1: Option<f64>,
    pub auc_roc: Option<f64>,
    pub n: usize,
}

pub fn accuracy(records: &[PredictionRecord], domain: Domain) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Parameter("accuracy over empty records".into()));
    }
    let correct = records.iter().filter(|r| r.label(domain) == r.g).count();
    Ok(correct as f64 / records.len() as f64 * 100.0)
}

/// Harmonic mean of precision and recall on the positive class; 0 when both
/// precision and recall vanish.
pub fn f1_score(records: &[PredictionRecord], domain: Domain) -> f64 {
    let (mut tp, mut fp, mut fe) = (0usize, 0usize, 0usize);
    for r in records {
        match (r.label(domain), r.g) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fe += 1,
            _ => {}
        }
    }
    if 2 * tp + fp + fe == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fe) as f64
}

/// Area under the ROC curve via the Mann-Whitney rank statistic: average
/// over all (positive, negative) pairs of 1 if the positive scores higher,
/// 1/2 on ties. Computed by average ranks, O(n log n).
pub fn auc_roc(records: &[PredictionRecord], domain: Domain) -> Result<f64> {
    let n_pos = records.iter().filter(|r| r.g == 1).count();
    let n_neg = records.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UnsupportedMetric(
            "AUC-ROC needs at least one positive and one negative sample".into(),
        ));
    }
    let mut indexed: Vec<(f64, u8)> =
        records.iter().map(|r| (r.score(domain), r.g)).collect();
    indexed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Average ranks over tie groups, 1-based.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < indexed.len() {
        let mut j = i;
        while j < indexed.len() && indexed[j].0 == indexed[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &indexed[i..j] {
            if item.1 == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Accuracy normalized by model cost: percent per million parameters and
/// percent per million FLOPs.
pub fn efficiency_ratios(accuracy_pct: f64, cost: &CostReport) -> Result<(f64, f64)> {
    if cost.params == 0 || cost.flops == 0 {
        return Err(Error::Parameter("cost report with zero params or flops".into()));
    }
    Ok((
        accuracy_pct / (cost.params as f64 / 1e6),
        accuracy_pct / (cost.flops as f64 / 1e6),
    ))
}

/// Decision-level fusion: correct when either domain's label matches the
/// ground truth.
pub fn fusion_success(record: &PredictionRecord) -> bool {
    record.y_p == record.g || record.y_f == record.g
}

pub fn evaluate_protocol(records: &[PredictionRecord], setting: EvalSetting) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Parameter("evaluation over empty records".into()));
    }
    match setting {
        EvalSetting::Clean(domain) => single_domain_report(records, domain),
        EvalSetting::AdvSpatial => single_domain_report(records, Domain::Spatial),
        EvalSetting::AdvSpectral => single_domain_report(records, Domain::Spectral),
        EvalSetting::AdvFusion => {
            let correct = records.iter().filter(|r| fusion_success(r)).count();
            Ok(EvalReport {
                accuracy: correct as f64 / records.len() as f64 * 100.0,
                f1: None,
                auc_roc: None,
                n: records.len(),
            })
        }
    }
}

/// Fusion is decision-level; there is no single score to threshold, so F1
/// and AUC are undefined for it.
pub fn fusion_f1(_records: &[PredictionRecord]) -> Result<f64> {
    Err(Error::UnsupportedMetric("F1 is undefined for decision-level fusion".into()))
}

pub fn fusion_auc(_records: &[PredictionRecord]) -> Result<f64> {
    Err(Error::UnsupportedMetric("AUC-ROC is undefined for decision-level fusion".into()))
}

fn single_domain_report(records: &[PredictionRecord], domain: Domain) -> Result<EvalReport> {
    let auc = match auc_roc(records, domain) {
        Ok(v) => Some(v),
        Err(Error::UnsupportedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        accuracy: accuracy(records, domain)?,
        f1: Some(f1_score(records, domain)),
        auc_roc: auc,
        n: records.len(),
    })
}
