//! CSV datasets, model files and report tables.
//!
//! Every writer goes through [`write_atomic`]: output is written to a
//! temporary sibling file and renamed into place, so a failed command never
//! leaves a partial file behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::LpdModel;
use crate::error::Result;
use crate::linalg::Matrix;
use crate::model_selection::CvResult;
use crate::simulation::{EvalReport, Summary};
use crate::stats::LabeledDataset;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("empty data file")]
    Empty,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path)(e)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataFileSchema {
    pub delimiter: u8,
    /// Zero-based position of the label column.
    pub label_column: usize,
    pub has_header: bool,
}

impl Default for DataFileSchema {
    fn default() -> Self {
        DataFileSchema {
            delimiter: b',',
            label_column: 0,
            has_header: true,
        }
    }
}

/// Reads a labelled CSV. Labels are mapped to `1, 2, ...` in order of first
/// appearance; the original strings are kept in `label_names`.
pub fn load_dataset(path: &Path, schema: &DataFileSchema) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_dataset(&text, schema)
}

pub fn parse_dataset(text: &str, schema: &DataFileSchema) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| IoError::Parse {
            row: idx + 1,
            col: 0,
            msg: e.to_string(),
        })?;
        let row = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        match width {
            None => {
                if rec.len() < 2 {
                    return Err(IoError::Parse {
                        row,
                        col: 1,
                        msg: "need a label column and at least one feature".into(),
                    }
                    .into());
                }
                if schema.label_column >= rec.len() {
                    return Err(IoError::Parse {
                        row,
                        col: schema.label_column + 1,
                        msg: "label column beyond the last field".into(),
                    }
                    .into());
                }
                width = Some(rec.len());
            }
            Some(w) if w != rec.len() => {
                return Err(IoError::RaggedRows {
                    row,
                    expected: w,
                    got: rec.len(),
                }
                .into())
            }
            Some(_) => {}
        }
        if schema.has_header && header.is_none() {
            header = Some(
                rec.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != schema.label_column)
                    .map(|(_, f)| f.to_string())
                    .collect(),
            );
            continue;
        }
        for (c, field) in rec.iter().enumerate() {
            if c == schema.label_column {
                let id = match label_names.iter().position(|l| l == field) {
                    Some(k) => k + 1,
                    None => {
                        label_names.push(field.to_string());
                        label_names.len()
                    }
                };
                labels.push(id);
                continue;
            }
            let v: f64 = field.parse().map_err(|e: std::num::ParseFloatError| IoError::Parse {
                row,
                col: c + 1,
                msg: format!("`{field}`: {e}"),
            })?;
            if !v.is_finite() {
                return Err(IoError::NonFiniteValue { row, col: c + 1 }.into());
            }
            values.push(v);
        }
    }
    let Some(w) = width else {
        return Err(IoError::Empty.into());
    };
    if labels.is_empty() {
        return Err(IoError::Empty.into());
    }
    let features = Matrix::from_row_major(labels.len(), w - 1, values)?;
    let mut data = LabeledDataset::new(features, labels)?;
    data.label_names = label_names;
    data.feature_names = header;
    Ok(data)
}

/// Reads a CSV whose columns are all features.
pub fn load_features(path: &Path, delimiter: u8, has_header: bool) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_features(&text, delimiter, has_header)
}

pub fn parse_features(text: &str, delimiter: u8, has_header: bool) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut width = None;
    let mut values = Vec::new();
    let mut skip_header = has_header;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| IoError::Parse {
            row: idx + 1,
            col: 0,
            msg: e.to_string(),
        })?;
        let row = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(IoError::RaggedRows {
                    row,
                    expected: w,
                    got: rec.len(),
                }
                .into())
            }
            Some(_) => {}
        }
        if skip_header {
            skip_header = false;
            continue;
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|e: std::num::ParseFloatError| IoError::Parse {
                row,
                col: c + 1,
                msg: format!("`{field}`: {e}"),
            })?;
            if !v.is_finite() {
                return Err(IoError::NonFiniteValue { row, col: c + 1 }.into());
            }
            values.push(v);
        }
    }
    let w = width.ok_or(IoError::Empty)?;
    if values.is_empty() {
        return Err(IoError::Empty.into());
    }
    Ok(Matrix::from_row_major(values.len() / w, w, values)?)
}

/// Single-column `index` CSV, as written by [`format_indices`].
pub fn load_indices(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|e: std::num::ParseIntError| IoError::Parse {
            row: idx + 1,
            col: 1,
            msg: format!("`{line}`: {e}"),
        })?);
    }
    Ok(out)
}

pub fn format_indices(indices: &[usize]) -> String {
    let mut s = String::from("index\n");
    for i in indices {
        s.push_str(&i.to_string());
        s.push('\n');
    }
    s
}

/// Feature names, falling back to `x<j>` with zero-based `j`.
pub fn feature_names(data: &LabeledDataset) -> Vec<String> {
    data.feature_names
        .clone()
        .unwrap_or_else(|| (0..data.p()).map(|j| format!("x{j}")).collect())
}

fn label_name(data: &LabeledDataset, label: usize) -> String {
    data.label_names
        .get(label - 1)
        .cloned()
        .unwrap_or_else(|| label.to_string())
}

pub fn format_dataset(data: &LabeledDataset, schema: &DataFileSchema) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(schema.delimiter)
        .from_writer(Vec::new());
    let p = data.p();
    let assemble = |label: String, feats: Vec<String>| -> Vec<String> {
        let mut row = feats;
        row.insert(schema.label_column.min(p), label);
        row
    };
    if schema.has_header {
        w.write_record(assemble("label".into(), feature_names(data)))
            .map_err(csv_err)?;
    }
    for i in 0..data.n() {
        let feats = data.sample(i).iter().map(|v| v.to_string()).collect();
        w.write_record(assemble(label_name(data, data.labels()[i]), feats))
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn save_dataset(path: &Path, data: &LabeledDataset, schema: &DataFileSchema) -> Result<()> {
    Ok(write_atomic(path, format_dataset(data, schema)?.as_bytes())?)
}

fn csv_err(e: csv::Error) -> IoError {
    IoError::Parse {
        row: e.position().map_or(0, |p| p.line() as usize),
        col: 0,
        msg: e.to_string(),
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| IoError::Parse {
        row: 0,
        col: 0,
        msg: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// On-disk form of a fitted binary rule. Floats are written in their
/// shortest round-trip decimal form, so save → load → save is byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub p: usize,
    pub beta: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub threshold: f64,
    pub lambda: f64,
    pub ridge_rho: f64,
    pub kept_indices: Option<Vec<usize>>,
    pub provenance: BTreeMap<String, String>,
}

impl ModelFile {
    pub fn from_model(model: &LpdModel) -> Self {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            p: model.dim(),
            beta: model.beta.clone(),
            mu_hat: model.mu_hat.clone(),
            threshold: model.threshold,
            lambda: model.lambda,
            ridge_rho: model.ridge_rho,
            kept_indices: model.kept_indices.clone(),
            provenance: model.metadata.clone(),
        }
    }

    pub fn into_model(self) -> Result<LpdModel, IoError> {
        if self.beta.len() != self.p || self.mu_hat.len() != self.p {
            return Err(IoError::InvalidModel(format!(
                "p = {} but beta has {} and mu_hat has {} entries",
                self.p,
                self.beta.len(),
                self.mu_hat.len()
            )));
        }
        if let Some(k) = &self.kept_indices {
            if k.len() != self.p {
                return Err(IoError::InvalidModel(format!(
                    "kept_indices has {} entries, expected {}",
                    k.len(),
                    self.p
                )));
            }
        }
        Ok(LpdModel {
            beta: self.beta,
            mu_hat: self.mu_hat,
            threshold: self.threshold,
            lambda: self.lambda,
            ridge_rho: self.ridge_rho,
            kept_indices: self.kept_indices,
            metadata: self.provenance,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model fields are finite");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let parse = |e: serde_json::Error| IoError::Parse {
            row: e.line(),
            col: e.column(),
            msg: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(IoError::SchemaVersionMismatch {
                    found: v,
                    expected: MODEL_SCHEMA_VERSION,
                })
            }
            None => return Err(IoError::InvalidModel("missing schema_version".into())),
        }
        serde_json::from_str(text).map_err(parse)
    }
}

pub fn save_model(path: &Path, model: &LpdModel) -> Result<()> {
    let model_file = ModelFile::from_model(model);
    if !(model.beta.iter().chain(&model.mu_hat).all(|v| v.is_finite())
        && model.threshold.is_finite()
        && model.lambda.is_finite()
        && model.ridge_rho.is_finite())
    {
        return Err(IoError::InvalidModel("model has non-finite values".into()).into());
    }
    Ok(write_atomic(path, model_file.to_json().as_bytes())?)
}

pub fn load_model(path: &Path) -> Result<LpdModel> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(ModelFile::from_json(&text)?.into_model()?)
}

/// `sample,class,score` with zero-based sample index.
pub fn format_predictions(rows: &[(usize, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample", "class", "score"]).map_err(csv_err)?;
    for (i, (class, score)) in rows.iter().enumerate() {
        w.write_record([i.to_string(), class.to_string(), score.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// `lambda,cv_correct,total,eligible,chosen`, one row per grid point.
pub fn format_cv(cv: &CvResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "cv_correct", "total", "eligible", "chosen"])
        .map_err(csv_err)?;
    for (i, &lambda) in cv.grid.iter().enumerate() {
        w.write_record([
            lambda.to_string(),
            cv.per_lambda_correct[i].to_string(),
            cv.total.to_string(),
            cv.ineligible[i].is_none().to_string(),
            (lambda == cv.chosen_lambda).to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub const REPORT_COLUMNS: [&str; 15] = [
    "model_id",
    "p",
    "n1",
    "n2",
    "s0",
    "rho",
    "distribution",
    "reps",
    "seed",
    "method",
    "metric",
    "mean",
    "sd",
    "count",
    "failures",
];

/// Long-format summary table with columns [`REPORT_COLUMNS`]. Error metrics
/// are in percent.
pub fn format_report(report: &EvalReport) -> Result<String> {
    let s = &report.spec;
    let prefix = [
        s.model.id().to_string(),
        s.p.to_string(),
        s.n1.to_string(),
        s.n2.to_string(),
        s.s0.to_string(),
        s.rho.to_string(),
        s.distribution.name().to_string(),
        s.reps.to_string(),
        s.seed.to_string(),
    ];
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    let mut row = |method: &str, metric: &str, sum: &Summary, failures: usize| -> Result<()> {
        let mut r: Vec<String> = prefix.to_vec();
        r.extend([
            method.to_string(),
            metric.to_string(),
            sum.mean.to_string(),
            sum.sd.to_string(),
            sum.count.to_string(),
            failures.to_string(),
        ]);
        w.write_record(&r).map_err(csv_err)?;
        Ok(())
    };
    row("oracle_rate", "error_pct", &report.oracle_rate_pct, 0)?;
    for m in &report.methods {
        row(&m.method, "error_pct", &m.error_pct, m.failures)?;
    }
    if let Some(l) = &report.lpd {
        for (metric, sum) in [
            ("pos", &l.pos),
            ("tpos", &l.tpos),
            ("tpr", &l.tpr),
            ("fpr", &l.fpr),
            ("lambda_hat", &l.lambda_hat),
            ("lambda_opt", &l.lambda_opt),
            ("conditional_rate_pct", &l.conditional_rate_pct),
        ] {
            row("lpd", metric, sum, 0)?;
        }
    }
    drop(row);
    finish(w)
}

/// One row per (replication, method) with the LPD diagnostics on the `lpd` rows.
pub fn format_records(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "rep",
        "method",
        "error_pct",
        "oracle_rate_pct",
        "lambda_hat",
        "lambda_opt",
        "pos",
        "tpos",
        "tpr",
        "fpr",
        "conditional_rate_pct",
        "failure",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for rec in &report.records {
        for o in &rec.outcomes {
            let d = if o.method == "lpd" { rec.lpd.as_ref() } else { None };
            w.write_record([
                rec.rep.to_string(),
                o.method.clone(),
                opt(o.error.map(|e| 100.0 * e)),
                opt(rec.oracle_rate.map(|e| 100.0 * e)),
                opt(d.map(|d| d.lambda_hat)),
                opt(d.map(|d| d.lambda_opt)),
                d.map(|d| d.support.pos.to_string()).unwrap_or_default(),
                d.map(|d| d.support.tpos.to_string()).unwrap_or_default(),
                opt(d.map(|d| d.support.tpr)),
                opt(d.map(|d| d.support.fpr)),
                opt(d.and_then(|d| d.conditional_rate).map(|r| 100.0 * r)),
                o.failure.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn parse(text: &str) -> Result<LabeledDataset> {
        parse_dataset(text, &DataFileSchema::default())
    }

    #[test]
    fn labels_in_first_seen_order() {
        let d = parse("y,a,b\nB,1,2\nA,3,4\nB,5,6\nA,7,8\n").unwrap();
        assert_eq!(d.labels(), &[1, 2, 1, 2]);
        assert_eq!(d.label_names, vec!["B", "A"]);
        assert_eq!(d.feature_names, Some(vec!["a".into(), "b".into()]));
        assert_eq!(d.sample(1), &[3.0, 4.0]);
    }

    #[test]
    fn ragged_row_reported() {
        match parse("y,a,b\nA,1,2\nB,3\n") {
            Err(Error::Io(IoError::RaggedRows { row: 3, expected: 3, got: 2 })) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_reported() {
        assert!(matches!(
            parse("y,a\nA,1\nB,zz\n"),
            Err(Error::Io(IoError::Parse { row: 3, col: 2, .. }))
        ));
        assert!(matches!(
            parse("y,a\nA,1\nB,NaN\n"),
            Err(Error::Io(IoError::NonFiniteValue { row: 3, col: 2 }))
        ));
        assert!(matches!(parse(""), Err(Error::Io(IoError::Empty))));
    }

    #[test]
    fn label_column_and_delimiter() {
        let schema = DataFileSchema {
            delimiter: b';',
            label_column: 2,
            has_header: false,
        };
        let d = parse_dataset("1;2;x\n3;4;y\n", &schema).unwrap();
        assert_eq!(d.labels(), &[1, 2]);
        assert_eq!(d.sample(0), &[1.0, 2.0]);
        let text = format_dataset(&d, &schema).unwrap();
        assert_eq!(text, "1;2;x\n3;4;y\n");
    }

    #[test]
    fn model_json_round_trip() {
        let mut m = LpdModel::linear(vec![-0.5, 0.1 + 0.2], vec![1.5, 1.0 / 3.0]);
        m.lambda = 0.123456789012345678;
        m.metadata.insert("seed".into(), "7".into());
        let a = ModelFile::from_model(&m).to_json();
        let back = ModelFile::from_json(&a).unwrap().into_model().unwrap();
        assert_eq!(back, m);
        assert_eq!(ModelFile::from_model(&back).to_json(), a);
    }

    #[test]
    fn model_json_errors() {
        let m = LpdModel::linear(vec![1.0], vec![0.0]);
        let good = ModelFile::from_model(&m).to_json();
        let bumped = good.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(
            ModelFile::from_json(&bumped),
            Err(IoError::SchemaVersionMismatch { found: 2, expected: 1 })
        ));
        let corrupt = good.replace("\"beta\": [", "\"beta\": [,");
        assert!(matches!(ModelFile::from_json(&corrupt), Err(IoError::Parse { .. })));
        let short = good.replace("\"p\": 1", "\"p\": 2");
        assert!(ModelFile::from_json(&short).unwrap().into_model().is_err());
    }
}
