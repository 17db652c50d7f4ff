//! The JSON certification report and its CSV accuracy curve.
//!
//! Labels are 1-based. Exact probabilities are `"numerator/denominator"`
//! strings; only the raw bounds are floats. Everything except `metadata` is a
//! deterministic function of the inputs.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::beta_bounds::SampleCounts;
use crate::certify::{certify_counts, AccuracyCurve, CertificationParams, CertificationRecord, TargetMode};
use crate::cli::config::{ClassifierSpec, RunConfig};
use crate::cli::dataset::DatasetHeader;
use crate::error::{Error, Result};
use crate::exact_prob::{BinomialTable, ExactProb};
use crate::radius::CertifiedRadius;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub params: ReportParams,
    pub records: Vec<ReportRecord>,
    pub curve: Vec<ReportCurvePoint>,
    pub metadata: Metadata,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub d: usize,
    pub c: usize,
    pub domain: u32,
    pub e: usize,
    pub k: usize,
    pub n: u64,
    pub alpha: f64,
    pub seed: u64,
    pub mode: TargetMode,
    pub classifier: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub id: String,
    pub true_label: usize,
    pub certified_label: usize,
    pub counts: Vec<u64>,
    pub empirical_top_k: Vec<usize>,
    pub p_lower_raw: f64,
    /// `null` at the certified label.
    pub p_upper_raw: Vec<Option<f64>>,
    pub p_lower: ExactProb,
    pub p_upper: Vec<Option<ExactProb>>,
    pub radius: CertifiedRadius,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCurvePoint {
    pub r: u64,
    pub certified_topk_accuracy: f64,
}

/// Run-specific details kept apart from the reproducible content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Seconds since the Unix epoch.
    pub generated_at: u64,
    pub tool_version: String,
}

impl Metadata {
    pub fn now() -> Self {
        let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Metadata { generated_at, tool_version: env!("CARGO_PKG_VERSION").to_owned() }
    }
}

fn classifier_name(spec: &ClassifierSpec) -> &'static str {
    match spec {
        ClassifierSpec::Constant { .. } => "constant",
        ClassifierSpec::Prototype { .. } => "prototype",
        ClassifierSpec::Table { .. } => "table",
    }
}

impl ReportRecord {
    fn from_record(rec: &CertificationRecord) -> Self {
        ReportRecord {
            id: rec.id.clone(),
            true_label: rec.true_label + 1,
            certified_label: rec.certified_label + 1,
            counts: rec.counts.clone(),
            empirical_top_k: rec.empirical_top_k.iter().map(|j| j + 1).collect(),
            p_lower_raw: rec.raw.lower,
            p_upper_raw: rec.raw.upper.clone(),
            p_lower: rec.quantized.lower.clone(),
            p_upper: rec.quantized.upper.clone(),
            radius: rec.radius,
        }
    }

    /// Radius recomputed from the stored counts.
    pub fn resolve(&self, params: &ReportParams, table: &BinomialTable) -> Result<CertifiedRadius> {
        let label = self
            .certified_label
            .checked_sub(1)
            .ok_or_else(|| Error::invalid(format!("record {}: labels are 1-based", self.id)))?;
        let counts = SampleCounts::new(self.counts.clone(), label)?;
        Ok(certify_counts(&counts, params.k, params.alpha, table)?.2)
    }

    fn certified_at(&self, r: u64) -> bool {
        self.certified_label == self.true_label && self.radius.covers(r)
    }
}

impl Report {
    /// Records are sorted by id.
    pub fn build(header: &DatasetHeader, config: &RunConfig, records: &[CertificationRecord]) -> Result<Self> {
        let curve = AccuracyCurve::from_records(records)?;
        let mut entries: Vec<ReportRecord> = records.iter().map(ReportRecord::from_record).collect();
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        let CertificationParams { e, k, n, alpha, seed } = config.params;
        Ok(Report {
            schema_version: SCHEMA_VERSION,
            params: ReportParams {
                d: header.d,
                c: header.c,
                domain: header.domain,
                e,
                k,
                n,
                alpha,
                seed,
                mode: config.mode,
                classifier: classifier_name(&config.classifier).to_owned(),
            },
            records: entries,
            curve: curve
                .points
                .iter()
                .map(|p| ReportCurvePoint { r: p.r, certified_topk_accuracy: p.accuracy })
                .collect(),
            metadata: Metadata::now(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Report =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("malformed report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!("unsupported report schema {}", report.schema_version)));
        }
        Ok(report)
    }

    /// `r,certified_topk_accuracy` rows.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("r,certified_topk_accuracy\n");
        for p in &self.curve {
            writeln!(out, "{},{}", p.r, p.certified_topk_accuracy).unwrap();
        }
        out
    }

    /// Re-solves every record from its counts and recomputes the curve.
    pub fn verify(&self) -> Result<()> {
        let p = &self.params;
        let table = BinomialTable::new(p.d as u64, p.e as u64)?;
        for rec in &self.records {
            let radius = rec.resolve(p, &table)?;
            if radius != rec.radius {
                return Err(Error::Invariant(format!(
                    "record {}: stored radius {} but counts give {radius}",
                    rec.id, rec.radius
                )));
            }
        }
        if self.records.is_empty() {
            return Err(Error::invalid("report has no records"));
        }
        for point in &self.curve {
            let hits = self.records.iter().filter(|rec| rec.certified_at(point.r)).count();
            let accuracy = hits as f64 / self.records.len() as f64;
            if accuracy != point.certified_topk_accuracy {
                return Err(Error::Invariant(format!("curve point r={} disagrees with the records", point.r)));
            }
        }
        Ok(())
    }
}
