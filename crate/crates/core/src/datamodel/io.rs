use super::{EmbeddingRecord, ModelMeta, PredictionRecord, Split};
use crate::error::{Error, Result};
use crate::report::fmt_f64;
use serde_json::{Map, Value};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const PREDICTION_COLUMNS: [&str; 6] = ["sample_id", "model_id", "dataset_id", "split", "score", "label"];
const ATTR_PREFIX: &str = "attr_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Jsonl,
}

impl FileFormat {
    /// Guess from the file extension; anything that is not `.jsonl`/`.ndjson` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => FileFormat::Jsonl,
            _ => FileFormat::Csv,
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path, format: FileFormat) -> Result<Vec<PredictionRecord>> {
    read_predictions(open(path)?, format)
}

/// Reader-based variant of [`load_predictions`]. Rows are numbered from 1,
/// excluding the CSV header.
pub fn read_predictions<R: Read>(reader: R, format: FileFormat) -> Result<Vec<PredictionRecord>> {
    let records = match format {
        FileFormat::Csv => read_predictions_csv(reader)?,
        FileFormat::Jsonl => read_predictions_jsonl(reader)?,
    };
    let mut seen = HashSet::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if !seen.insert((&r.sample_id, &r.model_id, &r.dataset_id)) {
            return Err(Error::DuplicateKey {
                row: i + 1,
                key: format!("({}, {}, {})", r.sample_id, r.model_id, r.dataset_id),
            });
        }
    }
    Ok(records)
}

fn parse_score(row: usize, raw: &str) -> Result<f64> {
    let value: f64 = raw.trim().parse().map_err(|_| Error::BadField {
        row,
        field: "score".into(),
        value: raw.into(),
    })?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRangeScore {
            row,
            value: raw.into(),
        });
    }
    Ok(value)
}

fn parse_label(row: usize, raw: &str) -> Result<u8> {
    match raw.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::NonBinaryLabel {
            row,
            value: other.into(),
        }),
    }
}

fn parse_split(row: usize, raw: &str) -> Result<Split> {
    raw.trim().parse().map_err(|_| Error::InvalidSplit {
        row,
        value: raw.into(),
    })
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn {
            row: 0,
            column: name.into(),
        })
}

fn read_predictions_csv<R: Read>(reader: R) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(PREDICTION_COLUMNS) {
        *slot = column_index(&headers, name)?;
    }
    let attr_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(ATTR_PREFIX).map(|n| (i, n.to_string())))
        .collect();

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |k: usize| -> Result<&str> {
            rec.get(idx[k]).ok_or_else(|| Error::MissingColumn {
                row,
                column: PREDICTION_COLUMNS[k].into(),
            })
        };
        let mut attributes = BTreeMap::new();
        for (col, name) in &attr_cols {
            attributes.insert(name.clone(), rec.get(*col).unwrap_or("").to_string());
        }
        out.push(PredictionRecord {
            sample_id: field(0)?.to_string(),
            model_id: field(1)?.to_string(),
            dataset_id: field(2)?.to_string(),
            split: parse_split(row, field(3)?)?,
            score: parse_score(row, field(4)?)?,
            label: parse_label(row, field(5)?)?,
            attributes,
        });
    }
    Ok(out)
}

fn json_lines<R: Read>(reader: R) -> impl Iterator<Item = Result<(usize, Map<String, Value>)>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let row = i + 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io("<jsonl>", e))),
            };
            if line.trim().is_empty() {
                return None;
            }
            Some(match serde_json::from_str::<Value>(&line) {
                Ok(Value::Object(map)) => Ok((row, map)),
                Ok(_) => Err(Error::Json {
                    line: row,
                    message: "expected a JSON object".into(),
                }),
                Err(e) => Err(Error::Json {
                    line: row,
                    message: e.to_string(),
                }),
            })
        })
}

fn json_text(row: usize, map: &Map<String, Value>, key: &str) -> Result<String> {
    match map.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(Value::Bool(b)) => Ok(b.to_string()),
        _ => Err(Error::MissingColumn {
            row,
            column: key.into(),
        }),
    }
}

fn read_predictions_jsonl<R: Read>(reader: R) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for item in json_lines(reader) {
        let (row, map) = item?;
        let mut attributes = BTreeMap::new();
        if let Some(Value::Object(attrs)) = map.get("attributes") {
            for (k, v) in attrs {
                let text = match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                };
                attributes.insert(k.clone(), text);
            }
        }
        out.push(PredictionRecord {
            sample_id: json_text(row, &map, "sample_id")?,
            model_id: json_text(row, &map, "model_id")?,
            dataset_id: json_text(row, &map, "dataset_id")?,
            split: parse_split(row, &json_text(row, &map, "split")?)?,
            score: parse_score(row, &json_text(row, &map, "score")?)?,
            label: parse_label(row, &json_text(row, &map, "label")?)?,
            attributes,
        });
    }
    Ok(out)
}

fn attribute_names(records: &[PredictionRecord]) -> Vec<String> {
    let names: BTreeSet<&String> = records.iter().flat_map(|r| r.attributes.keys()).collect();
    names.into_iter().cloned().collect()
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord], format: FileFormat) -> Result<()> {
    let mut w = create(path)?;
    write_predictions_to(&mut w, records, format)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Scores are written with six decimals; attribute columns are the sorted
/// union of attribute names across `records`.
pub fn write_predictions_to<W: Write>(
    writer: W,
    records: &[PredictionRecord],
    format: FileFormat,
) -> Result<()> {
    let names = attribute_names(records);
    match format {
        FileFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            let mut header: Vec<String> = PREDICTION_COLUMNS.iter().map(|s| s.to_string()).collect();
            header.extend(names.iter().map(|n| format!("{ATTR_PREFIX}{n}")));
            w.write_record(&header)?;
            for r in records {
                let mut row = vec![
                    r.sample_id.clone(),
                    r.model_id.clone(),
                    r.dataset_id.clone(),
                    r.split.to_string(),
                    fmt_f64(r.score),
                    r.label.to_string(),
                ];
                row.extend(
                    names
                        .iter()
                        .map(|n| r.attributes.get(n).cloned().unwrap_or_default()),
                );
                w.write_record(&row)?;
            }
            w.flush().map_err(|e| Error::io("<predictions>", e))
        }
        FileFormat::Jsonl => {
            let mut w = writer;
            for r in records {
                let attrs: Map<String, Value> = r
                    .attributes
                    .iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect();
                let mut obj = Map::new();
                obj.insert("sample_id".into(), r.sample_id.clone().into());
                obj.insert("model_id".into(), r.model_id.clone().into());
                obj.insert("dataset_id".into(), r.dataset_id.clone().into());
                obj.insert("split".into(), r.split.as_str().into());
                obj.insert("score".into(), r.score.into());
                obj.insert("label".into(), u64::from(r.label).into());
                obj.insert("attributes".into(), Value::Object(attrs));
                let line = crate::report::to_compact_json(&Value::Object(obj));
                writeln!(w, "{line}").map_err(|e| Error::io("<predictions>", e))?;
            }
            Ok(())
        }
    }
}

pub fn load_embeddings(path: &Path, format: FileFormat) -> Result<Vec<EmbeddingRecord>> {
    read_embeddings(open(path)?, format)
}

fn parse_entry(row: usize, column: String, raw: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::BadField {
        row,
        field: column.clone(),
        value: raw.into(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteEntry { row, column });
    }
    Ok(v)
}

/// CSV rows may leave trailing `dim_*` cells empty when one file mixes models
/// of different widths; the row's dimension is its count of leading filled cells.
pub fn read_embeddings<R: Read>(reader: R, format: FileFormat) -> Result<Vec<EmbeddingRecord>> {
    let mut out = Vec::new();
    match format {
        FileFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_reader(reader);
            let headers = rdr.headers()?.clone();
            let sid = column_index(&headers, "sample_id")?;
            let mid = column_index(&headers, "model_id")?;
            let dim_cols: Vec<usize> = (0..)
                .map_while(|k| headers.iter().position(|h| h == format!("dim_{k}")))
                .collect();
            if dim_cols.is_empty() {
                return Err(Error::MissingColumn {
                    row: 0,
                    column: "dim_0".into(),
                });
            }
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let row = i + 1;
                let get = |c: usize, name: &str| {
                    rec.get(c).map(str::to_string).ok_or_else(|| Error::MissingColumn {
                        row,
                        column: name.into(),
                    })
                };
                let mut vector = Vec::with_capacity(dim_cols.len());
                for (k, &c) in dim_cols.iter().enumerate() {
                    match rec.get(c) {
                        Some(raw) if !raw.trim().is_empty() => {
                            vector.push(parse_entry(row, format!("dim_{k}"), raw)?)
                        }
                        _ => break,
                    }
                }
                out.push(EmbeddingRecord {
                    sample_id: get(sid, "sample_id")?,
                    model_id: get(mid, "model_id")?,
                    vector,
                });
            }
        }
        FileFormat::Jsonl => {
            for item in json_lines(reader) {
                let (row, map) = item?;
                let Some(Value::Array(items)) = map.get("vector") else {
                    return Err(Error::MissingColumn {
                        row,
                        column: "vector".into(),
                    });
                };
                let mut vector = Vec::with_capacity(items.len());
                for (k, item) in items.iter().enumerate() {
                    let raw = match item {
                        Value::Number(n) => n.to_string(),
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    vector.push(parse_entry(row, format!("dim_{k}"), &raw)?);
                }
                out.push(EmbeddingRecord {
                    sample_id: json_text(row, &map, "sample_id")?,
                    model_id: json_text(row, &map, "model_id")?,
                    vector,
                });
            }
        }
    }
    validate_embeddings(&out)?;
    Ok(out)
}

fn validate_embeddings(records: &[EmbeddingRecord]) -> Result<()> {
    let mut dims: HashMap<&str, usize> = HashMap::new();
    let mut seen = HashSet::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let row = i + 1;
        if r.vector.is_empty() {
            return Err(Error::MissingColumn {
                row,
                column: "dim_0".into(),
            });
        }
        let expected = *dims.entry(&r.model_id).or_insert(r.vector.len());
        if expected != r.vector.len() {
            return Err(Error::DimensionMismatch {
                model_id: r.model_id.clone(),
                expected,
                found: r.vector.len(),
            });
        }
        if !seen.insert((&r.sample_id, &r.model_id)) {
            return Err(Error::DuplicateKey {
                row,
                key: format!("({}, {})", r.sample_id, r.model_id),
            });
        }
    }
    Ok(())
}

pub fn write_embeddings(path: &Path, records: &[EmbeddingRecord]) -> Result<()> {
    let mut w = create(path)?;
    write_embeddings_to(&mut w, records)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_embeddings_to<W: Write>(writer: W, records: &[EmbeddingRecord]) -> Result<()> {
    let width = records.iter().map(|r| r.vector.len()).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let mut header = vec!["sample_id".to_string(), "model_id".to_string()];
    header.extend((0..width).map(|k| format!("dim_{k}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.sample_id.clone(), r.model_id.clone()];
        row.extend(r.vector.iter().map(|&v| fmt_f64(v)));
        row.resize(width + 2, String::new());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<embeddings>", e))
}

const REGISTRY_COLUMNS: [&str; 7] = [
    "model_id",
    "algorithm",
    "task",
    "tuned_attribute",
    "seed",
    "hparams_json",
    "val_auroc",
];

pub fn load_registry(path: &Path) -> Result<Vec<ModelMeta>> {
    read_registry(open(path)?)
}

pub fn read_registry<R: Read>(reader: R) -> Result<Vec<ModelMeta>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(REGISTRY_COLUMNS) {
        *slot = column_index(&headers, name)?;
    }
    let mut out: Vec<ModelMeta> = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let bad = |k: usize| Error::BadField {
            row,
            field: REGISTRY_COLUMNS[k].into(),
            value: field(k).into(),
        };
        let seed: i64 = field(4).trim().parse().map_err(|_| bad(4))?;
        let hparams = match field(5).trim() {
            "" => BTreeMap::new(),
            raw => match serde_json::from_str::<Value>(raw) {
                Ok(Value::Object(map)) => map
                    .into_iter()
                    .map(|(k, v)| {
                        let text = match v {
                            Value::String(s) => s,
                            other => other.to_string(),
                        };
                        (k, text)
                    })
                    .collect(),
                _ => return Err(bad(5)),
            },
        };
        let val_auroc = match field(6).trim() {
            "" => None,
            raw => {
                let v: f64 = raw.parse().map_err(|_| bad(6))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad(6));
                }
                Some(v)
            }
        };
        let model_id = field(0).to_string();
        if !seen.insert(model_id.clone()) {
            return Err(Error::DuplicateKey { row, key: model_id });
        }
        out.push(ModelMeta {
            model_id,
            algorithm: field(1).to_string(),
            task: field(2).to_string(),
            tuned_attribute: field(3).to_string(),
            seed,
            hparams,
            val_auroc,
        });
    }
    Ok(out)
}

pub fn write_registry(path: &Path, models: &[ModelMeta]) -> Result<()> {
    let mut w = create(path)?;
    write_registry_to(&mut w, models)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_registry_to<W: Write>(writer: W, models: &[ModelMeta]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REGISTRY_COLUMNS)?;
    for m in models {
        let hparams: Map<String, Value> = m
            .hparams
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        w.write_record([
            m.model_id.clone(),
            m.algorithm.clone(),
            m.task.clone(),
            m.tuned_attribute.clone(),
            m.seed.to_string(),
            crate::report::to_compact_json(&Value::Object(hparams)),
            m.val_auroc.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<registry>", e))
}
