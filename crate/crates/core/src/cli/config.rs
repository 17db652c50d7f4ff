//! Run configuration: a flat `key = value` text file.
//!
//! ```text
//! # certify with the prototype classifier
//! e = 2
//! k = 3
//! n = 100000
//! alpha = 0.001
//! seed = 7
//! mode = true-label
//! classifier = prototype
//! prototypes = prototypes.csv
//! ```
//!
//! `classifier` is one of `constant` (with `label`), `prototype` (with
//! `prototypes`, one comma-separated prototype per line) or `table` (with
//! `table` and `fallback`). Relative paths resolve against the config file's
//! directory. Only `e` and `classifier` are required.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ablation::{AblatedInput, BaseClassifier, ConstantClassifier, PrototypeClassifier, TableClassifier};
use crate::certify::{CertificationParams, TargetMode, DEFAULT_ALPHA, DEFAULT_K, DEFAULT_SAMPLES};
use crate::cli::dataset::DatasetHeader;
use crate::error::{Error, Result};

/// A built-in base classifier and where its parameters live.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    /// Label is 0-based.
    Constant {
        label: usize,
    },
    Prototype {
        prototypes: PathBuf,
    },
    /// Fallback label is 0-based.
    Table {
        table: PathBuf,
        fallback: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: CertificationParams,
    pub classifier: ClassifierSpec,
    pub mode: TargetMode,
}

const KEYS: [&str; 11] =
    ["e", "k", "n", "alpha", "seed", "mode", "classifier", "label", "prototypes", "table", "fallback"];

fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut pairs = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {line_no}: expected key = value")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::invalid(format!("config line {line_no}: unknown key {key:?}")));
        }
        if pairs.insert(key.to_owned(), (line_no, value.trim().to_owned())).is_some() {
            return Err(Error::invalid(format!("config line {line_no}: key {key:?} given twice")));
        }
    }
    Ok(pairs)
}

fn field<T: std::str::FromStr>(pairs: &BTreeMap<String, (usize, String)>, key: &str) -> Result<Option<T>> {
    pairs
        .get(key)
        .map(|(line, value)| {
            value.parse().map_err(|_| Error::invalid(format!("config line {line}: {key} = {value:?} is not valid")))
        })
        .transpose()
}

fn one_based(pairs: &BTreeMap<String, (usize, String)>, key: &str) -> Result<usize> {
    let label: usize = field(pairs, key)?.ok_or_else(|| Error::invalid(format!("config needs {key} =")))?;
    label.checked_sub(1).ok_or_else(|| Error::invalid(format!("config: {key} is 1-based, got 0")))
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let pairs = parse_pairs(text)?;
    let e = field(&pairs, "e")?.ok_or_else(|| Error::invalid("config needs e ="))?;
    let params = CertificationParams::new(
        e,
        field(&pairs, "k")?.unwrap_or(DEFAULT_K),
        field(&pairs, "n")?.unwrap_or(DEFAULT_SAMPLES),
        field(&pairs, "alpha")?.unwrap_or(DEFAULT_ALPHA),
        field(&pairs, "seed")?.unwrap_or(0),
    )?;
    let mode = match pairs.get("mode").map(|(_, v)| v.as_str()) {
        None | Some("true-label") => TargetMode::TrueLabel,
        Some("empirical-top1") => TargetMode::EmpiricalTop1,
        Some(other) => return Err(Error::invalid(format!("config: unknown mode {other:?}"))),
    };
    let path = |key: &str| -> Result<PathBuf> {
        let (_, value) = pairs.get(key).ok_or_else(|| Error::invalid(format!("config needs {key} =")))?;
        Ok(base_dir.join(value))
    };
    let classifier = match pairs.get("classifier").map(|(_, v)| v.as_str()) {
        Some("constant") => ClassifierSpec::Constant { label: one_based(&pairs, "label")? },
        Some("prototype") => ClassifierSpec::Prototype { prototypes: path("prototypes")? },
        Some("table") => ClassifierSpec::Table { table: path("table")?, fallback: one_based(&pairs, "fallback")? },
        Some(other) => return Err(Error::invalid(format!("config: unknown classifier {other:?}"))),
        None => return Err(Error::invalid("config needs classifier =")),
    };
    Ok(RunConfig { params, classifier, mode })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

/// One prototype per non-comment line, features comma-separated.
pub fn parse_prototypes(text: &str, header: &DatasetHeader) -> Result<PrototypeClassifier> {
    let mut prototypes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<u32>()
                    .ok()
                    .filter(|&v| v < header.domain)
                    .ok_or_else(|| Error::invalid(format!("prototype line {}: bad feature value {v:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != header.d {
            return Err(Error::invalid(format!(
                "prototype line {}: {} features, dataset has d={}",
                i + 1,
                values.len(),
                header.d
            )));
        }
        prototypes.push(values);
    }
    if prototypes.len() != header.c {
        return Err(Error::invalid(format!("{} prototypes for c={} labels", prototypes.len(), header.c)));
    }
    PrototypeClassifier::new(prototypes)
}

/// CSV with columns `label,indices,values`; the last two are space-separated lists.
pub fn parse_table(text: &str, header: &DatasetHeader, fallback: usize) -> Result<TableClassifier> {
    let mut table = TableClassifier::new(header.c, fallback)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::invalid(format!("table row {row}: {e}")))?;
        let bad = |what: &str| Error::invalid(format!("table row {row}: bad {what}"));
        if record.len() != 3 {
            return Err(bad("field count"));
        }
        let label: usize = record[0].parse().map_err(|_| bad("label"))?;
        if label == 0 {
            return Err(bad("label"));
        }
        let list = |s: &str, what: &str| -> Result<Vec<u32>> {
            s.split_whitespace().map(|v| v.parse().map_err(|_| bad(what))).collect()
        };
        let indices = list(&record[1], "indices")?;
        let values = list(&record[2], "values")?;
        if values.iter().any(|&v| v >= header.domain) {
            return Err(bad("values"));
        }
        let key = AblatedInput::new(indices, values, header.d as u32)
            .map_err(|e| Error::invalid(format!("table row {row}: {e}")))?;
        table.insert(key, label - 1)?;
    }
    Ok(table)
}

impl ClassifierSpec {
    pub fn load(&self, header: &DatasetHeader) -> Result<Box<dyn BaseClassifier + Send>> {
        Ok(match self {
            ClassifierSpec::Constant { label } => {
                if *label >= header.c {
                    return Err(Error::invalid(format!("constant label {} outside 1..={}", label + 1, header.c)));
                }
                Box::new(ConstantClassifier { label: *label, num_labels: header.c })
            }
            ClassifierSpec::Prototype { prototypes } => Box::new(parse_prototypes(&read(prototypes)?, header)?),
            ClassifierSpec::Table { table, fallback } => Box::new(parse_table(&read(table)?, header, *fallback)?),
        })
    }
}
