//! Monte Carlo certification of individual examples and whole datasets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ablation::{sample_ablation, BaseClassifier, InputVector, SampleStreams};
use crate::beta_bounds::{simuem_bounds, RawBounds, SampleCounts};
use crate::error::{Error, Result};
use crate::exact_prob::BinomialTable;
use crate::radius::{CertifiedRadius, ProblemSpec, QuantizedBounds, RadiusSolver};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_ALPHA: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationParams {
    pub e: usize,
    pub k: usize,
    pub n: u64,
    pub alpha: f64,
    pub seed: u64,
}

impl CertificationParams {
    pub fn new(e: usize, k: usize, n: u64, alpha: f64, seed: u64) -> Result<Self> {
        let params = CertificationParams { e, k, n, alpha, seed };
        params.validate()?;
        Ok(params)
    }

    /// `k = 3`, `n = 100000`, `α = 0.001`.
    pub fn with_defaults(e: usize, seed: u64) -> Self {
        CertificationParams { e, k: DEFAULT_K, n: DEFAULT_SAMPLES, alpha: DEFAULT_ALPHA, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.e == 0 {
            return Err(Error::invalid("e must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Which label an example's certificate is issued for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// The dataset's ground-truth label.
    #[default]
    TrueLabel,
    /// Whatever label the Monte Carlo samples predicted most often.
    EmpiricalTop1,
}

/// Everything derived while certifying one example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationRecord {
    pub id: String,
    pub true_label: usize,
    pub certified_label: usize,
    pub counts: Vec<u64>,
    pub raw: RawBounds,
    pub quantized: QuantizedBounds,
    pub radius: CertifiedRadius,
    /// Labels ordered by sample count, ties by index, truncated to `k`.
    pub empirical_top_k: Vec<usize>,
}

impl CertificationRecord {
    /// Whether this record counts toward certified accuracy at budget `r`.
    pub fn certified_at(&self, r: u64) -> bool {
        self.certified_label == self.true_label && self.radius.covers(r)
    }
}

/// Tally `n` base-classifier predictions on independent ablations of `x`.
pub fn monte_carlo_counts<F: BaseClassifier + ?Sized>(
    f: &F,
    x: &InputVector,
    e: usize,
    n: u64,
    streams: &SampleStreams,
) -> Result<Vec<u64>> {
    if e > x.d() {
        return Err(Error::invalid(format!("cannot retain {e} of {} features", x.d())));
    }
    let c = f.num_labels();
    (0..n)
        .into_par_iter()
        .try_fold(
            || vec![0u64; c],
            |mut counts, i| {
                let ablated = sample_ablation(x, e, &mut streams.rng(i))?;
                let label = f.classify(&ablated);
                let slot = counts
                    .get_mut(label)
                    .ok_or_else(|| Error::Invariant(format!("classifier returned label {} of {c}", label + 1)))?;
                *slot += 1;
                Ok(counts)
            },
        )
        .try_reduce(
            || vec![0u64; c],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// Bounds, quantized bounds, and radius from already-tallied counts.
pub fn certify_counts(
    counts: &SampleCounts,
    k: usize,
    alpha: f64,
    table: &BinomialTable,
) -> Result<(RawBounds, QuantizedBounds, CertifiedRadius)> {
    let spec = ProblemSpec::new(table.d(), table.e(), counts.num_labels(), k, counts.label())?;
    let raw = simuem_bounds(counts, alpha)?;
    let quantized = QuantizedBounds::from_raw(&raw, table)?;
    let radius = RadiusSolver::new(&spec, table, &quantized)?.certified_radius();
    Ok((raw, quantized, radius))
}

fn empirical_top_k(counts: &[u64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// One example, identified by its position in the dataset for stream derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub label: usize,
    pub input: InputVector,
}

/// Sample, bound, quantize, and solve for one example.
pub fn certify_example<F: BaseClassifier + ?Sized>(
    f: &F,
    example: &Example,
    ordinal: u64,
    params: &CertificationParams,
    mode: TargetMode,
    table: &BinomialTable,
) -> Result<CertificationRecord> {
    params.validate()?;
    if table.d() != example.input.d() as u64 || table.e() != params.e as u64 {
        return Err(Error::invalid(format!(
            "example {} has d={} but the binomial table is for d={}, e={}",
            example.id,
            example.input.d(),
            table.d(),
            table.e()
        )));
    }
    if example.label >= f.num_labels() {
        return Err(Error::invalid(format!(
            "example {} has label {} of {}",
            example.id,
            example.label + 1,
            f.num_labels()
        )));
    }
    let streams = SampleStreams::new(params.seed, ordinal);
    let counts = monte_carlo_counts(f, &example.input, params.e, params.n, &streams)?;
    let target = match mode {
        TargetMode::TrueLabel => example.label,
        TargetMode::EmpiricalTop1 => SampleCounts::new(counts.clone(), 0)?.argmax(),
    };
    let tally = SampleCounts::new(counts, target)?;
    let (raw, quantized, radius) = certify_counts(&tally, params.k, params.alpha, table)?;
    Ok(CertificationRecord {
        id: example.id.clone(),
        true_label: example.label,
        certified_label: target,
        empirical_top_k: empirical_top_k(tally.counts(), params.k),
        counts: tally.counts().to_vec(),
        raw,
        quantized,
        radius,
    })
}

/// Certify every example; records come back in input order.
pub fn certify_dataset<F: BaseClassifier + ?Sized>(
    f: &F,
    examples: &[Example],
    params: &CertificationParams,
    mode: TargetMode,
    on_done: impl Fn(&CertificationRecord) + Sync,
) -> Result<Vec<CertificationRecord>> {
    let d = examples.first().map(|x| x.input.d()).ok_or_else(|| Error::invalid("dataset has no examples"))?;
    let table = BinomialTable::new(d as u64, params.e as u64)?;
    examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let record = certify_example(f, ex, i as u64, params, mode, &table)?;
            on_done(&record);
            Ok(record)
        })
        .collect()
}

/// Re-derive the radius from a record's stored counts.
pub fn resolve_record(
    record: &CertificationRecord,
    params: &CertificationParams,
    table: &BinomialTable,
) -> Result<CertifiedRadius> {
    let counts = SampleCounts::new(record.counts.clone(), record.certified_label)?;
    Ok(certify_counts(&counts, params.k, params.alpha, table)?.2)
}

/// Fraction of records whose true label is certified at budget `r`.
pub fn certified_accuracy(records: &[CertificationRecord], r: u64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("no records to aggregate"));
    }
    let hits = records.iter().filter(|rec| rec.certified_at(r)).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Certified accuracy at each budget `r = 0..=max radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub r: u64,
    pub accuracy: f64,
}

impl AccuracyCurve {
    pub fn from_records(records: &[CertificationRecord]) -> Result<Self> {
        let max_r = records.iter().filter_map(|rec| rec.radius.value()).max().unwrap_or(0);
        let points = (0..=max_r)
            .map(|r| Ok(CurvePoint { r, accuracy: certified_accuracy(records, r)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(AccuracyCurve { points })
    }

    pub fn at(&self, r: u64) -> f64 {
        self.points.iter().find(|p| p.r == r).map_or(0.0, |p| p.accuracy)
    }
}
