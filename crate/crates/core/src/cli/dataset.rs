//! Dataset files: a typed header line followed by CSV rows.
//!
//! ```text
//! #ablation-dataset v1 d=4 c=3 domain=2
//! id,label,x0,x1,x2,x3
//! a,1,0,1,1,0
//! b,3,1,1,0,0
//! ```
//!
//! Labels are 1-based in the file. Rows are numbered from 1 starting at the
//! first data row; diagnostics also give the line number.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::ablation::InputVector;
use crate::certify::Example;
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &str = "#ablation-dataset";
pub const DATASET_VERSION: &str = "v1";

/// Sizes declared by the header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub d: usize,
    pub c: usize,
    pub domain: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub header: DatasetHeader,
    /// Labels are 0-based here.
    pub examples: Vec<Example>,
}

fn parse_header(line: &str) -> Result<DatasetHeader> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(DATASET_MAGIC) {
        return Err(Error::invalid(format!("line 1: expected a header starting with {DATASET_MAGIC}")));
    }
    match parts.next() {
        Some(DATASET_VERSION) => {}
        other => {
            return Err(Error::invalid(format!(
                "line 1: unsupported dataset version {:?}, expected {DATASET_VERSION}",
                other.unwrap_or("")
            )))
        }
    }
    let (mut d, mut c, mut domain) = (None, None, None);
    for part in parts {
        let (key, value) =
            part.split_once('=').ok_or_else(|| Error::invalid(format!("line 1: expected key=value, got {part:?}")))?;
        let number = |what: &str| -> Result<u64> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("line 1: header field {what}={value:?} is not an integer")))
        };
        match key {
            "d" => d = Some(number("d")? as usize),
            "c" => c = Some(number("c")? as usize),
            "domain" => domain = Some(number("domain")?),
            _ => return Err(Error::invalid(format!("line 1: unknown header field {key:?}"))),
        }
    }
    let missing = |what| Error::invalid(format!("line 1: header is missing {what}="));
    let d = d.ok_or_else(|| missing("d"))?;
    let c = c.ok_or_else(|| missing("c"))?;
    let domain = domain.ok_or_else(|| missing("domain"))?;
    if d == 0 {
        return Err(Error::invalid("line 1: header field d must be positive"));
    }
    if c < 2 {
        return Err(Error::invalid("line 1: header field c must be at least 2"));
    }
    if domain == 0 || domain >= u32::MAX as u64 {
        return Err(Error::invalid("line 1: header field domain out of range"));
    }
    Ok(DatasetHeader { d, c, domain: domain as u32 })
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let header = parse_header(first.trim_end_matches('\r'))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(body.as_bytes());
    let columns =
        reader.headers().map_err(|e| Error::invalid(format!("line 2: unreadable column header: {e}")))?.clone();
    let expected: Vec<String> =
        ["id".to_owned(), "label".to_owned()].into_iter().chain((0..header.d).map(|i| format!("x{i}"))).collect();
    if columns.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::invalid(format!(
            "line 2: columns must be id,label,x0..x{} for d={}",
            header.d - 1,
            header.d
        )));
    }
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::invalid(format!("row {row}: {e}")))?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line() + 1);
        let at = |field: &str, msg: String| Error::invalid(format!("row {row} (line {line}), field {field}: {msg}"));
        if record.len() != header.d + 2 {
            return Err(at("*", format!("expected {} fields, found {}", header.d + 2, record.len())));
        }
        let id = record[0].to_owned();
        if id.is_empty() {
            return Err(at("id", "empty id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(at("id", format!("duplicate id {id:?}")));
        }
        let label: usize = record[1].parse().map_err(|_| at("label", format!("{:?} is not an integer", &record[1])))?;
        if label == 0 || label > header.c {
            return Err(at("label", format!("label {label} outside 1..={}", header.c)));
        }
        let mut features = Vec::with_capacity(header.d);
        for j in 0..header.d {
            let raw = &record[j + 2];
            let v: u32 =
                raw.parse().map_err(|_| at(&format!("x{j}"), format!("{raw:?} is not a non-negative integer")))?;
            if v >= header.domain {
                return Err(at(&format!("x{j}"), format!("value {v} outside 0..{}", header.domain)));
            }
            features.push(v);
        }
        examples.push(Example { id, label: label - 1, input: InputVector::new(features, header.domain)? });
    }
    if examples.is_empty() {
        return Err(Error::invalid("dataset has no rows"));
    }
    Ok(Dataset { header, examples })
}

/// Renders a dataset in the format [`parse_dataset`] reads.
pub fn write_dataset(dataset: &Dataset) -> String {
    let h = dataset.header;
    let mut out = format!("{DATASET_MAGIC} {DATASET_VERSION} d={} c={} domain={}\nid,label", h.d, h.c, h.domain);
    for i in 0..h.d {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for ex in &dataset.examples {
        write!(out, "{},{}", ex.id, ex.label + 1).unwrap();
        for v in ex.input.features() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}
