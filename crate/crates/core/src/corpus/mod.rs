//! Labeled text corpora: loading, preprocessing and stratified splitting.

mod preprocess;
mod split;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use preprocess::{preprocess, stem, PreprocessConfig, Redactions, TokenizedDoc, DEFAULT_STOPWORDS};
pub use split::{stratified_split, stratified_subset};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: unknown label `{label}`")]
    UnknownLabel { row: usize, label: String },
    #[error("row {row}: malformed ({reason})")]
    MalformedRow { row: usize, reason: String },
    #[error("class `{0}` has fewer than 2 documents")]
    StratumTooSmall(String),
    #[error("invalid taxonomy: {0}")]
    BadTaxonomy(String),
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Index of a class within a [`ClassTaxonomy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub usize);

impl ClassId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered, unique class names. The order fixes every per-class layout
/// downstream (booster stacking, probability columns, report rows).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ClassTaxonomy {
    names: Vec<String>,
}

impl TryFrom<Vec<String>> for ClassTaxonomy {
    type Error = CorpusError;

    fn try_from(names: Vec<String>) -> Result<Self, Self::Error> {
        ClassTaxonomy::new(names)
    }
}

impl From<ClassTaxonomy> for Vec<String> {
    fn from(t: ClassTaxonomy) -> Self {
        t.names
    }
}

impl Default for ClassTaxonomy {
    fn default() -> Self {
        Self {
            names: ["Anxiety", "BPD", "bipolar", "others"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl ClassTaxonomy {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, CorpusError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(CorpusError::BadTaxonomy("no classes".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if a.trim().is_empty() {
                return Err(CorpusError::BadTaxonomy("empty class name".into()));
            }
            if names[..i].iter().any(|b| b.eq_ignore_ascii_case(a)) {
                return Err(CorpusError::BadTaxonomy(format!("duplicate class `{a}`")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> {
        (0..self.names.len()).map(ClassId)
    }

    /// Resolves a label, ignoring ASCII case and surrounding whitespace.
    pub fn resolve(&self, label: &str) -> Option<ClassId> {
        let label = label.trim();
        if label.is_empty() {
            return None;
        }
        self.names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(label))
            .map(ClassId)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: ClassId,
}

/// Immutable labeled corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSet {
    documents: Vec<Document>,
    taxonomy: ClassTaxonomy,
    counts: Vec<usize>,
}

impl DocumentSet {
    pub fn new(documents: Vec<Document>, taxonomy: ClassTaxonomy) -> Result<Self, CorpusError> {
        let mut counts = vec![0; taxonomy.len()];
        for (row, d) in documents.iter().enumerate() {
            match counts.get_mut(d.label.0) {
                Some(c) => *c += 1,
                None => {
                    return Err(CorpusError::UnknownLabel {
                        row,
                        label: d.label.to_string(),
                    })
                }
            }
        }
        Ok(Self {
            documents,
            taxonomy,
            counts,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn taxonomy(&self) -> &ClassTaxonomy {
        &self.taxonomy
    }

    /// Per-class document counts in taxonomy order.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<ClassId> {
        self.documents.iter().map(|d| d.label).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Csv,
    Jsonl,
}

/// Which columns (CSV) or keys (JSONL) hold the fields of a [`Document`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub text_column: String,
    pub label_column: String,
    /// When absent, the zero-based data row index is used as the id.
    pub id_column: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            text_column: "text".into(),
            label_column: "label".into(),
            id_column: None,
        }
    }
}

/// Loads a labeled dataset. Row numbers in errors are zero-based data rows
/// (the CSV header is not counted).
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    schema: &Schema,
    taxonomy: &ClassTaxonomy,
) -> Result<DocumentSet, CorpusError> {
    let documents = match format {
        DatasetFormat::Csv => load_csv(File::open(path)?, schema, taxonomy)?,
        DatasetFormat::Jsonl => load_jsonl(File::open(path)?, schema, taxonomy)?,
    };
    DocumentSet::new(documents, taxonomy.clone())
}

/// Writes `id,text,label` rows with a header; labels are class names.
pub fn write_csv<W: std::io::Write>(ds: &DocumentSet, out: W) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CorpusError::Io(e.into());
    w.write_record(["id", "text", "label"]).map_err(io)?;
    for d in ds.documents() {
        w.write_record([d.id.as_str(), d.text.as_str(), ds.taxonomy().name(d.label)])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn make_document(
    row: usize,
    id: Option<&str>,
    text: &str,
    label: &str,
    taxonomy: &ClassTaxonomy,
) -> Result<Document, CorpusError> {
    let label_id = taxonomy.resolve(label).ok_or_else(|| CorpusError::UnknownLabel {
        row,
        label: label.to_string(),
    })?;
    Ok(Document {
        id: id.map(str::to_string).unwrap_or_else(|| row.to_string()),
        text: text.to_string(),
        label: label_id,
    })
}

pub(crate) fn load_csv<R: std::io::Read>(
    reader: R,
    schema: &Schema,
    taxonomy: &ClassTaxonomy,
) -> Result<Vec<Document>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::MalformedRow {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    let find = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let text_col = find(&schema.text_column)?;
    let label_col = find(&schema.label_column)?;
    let id_col = schema.id_column.as_deref().map(find).transpose()?;

    let mut docs = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CorpusError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        let field = |col: usize| {
            record.get(col).ok_or_else(|| CorpusError::MalformedRow {
                row,
                reason: format!("missing field {col}"),
            })
        };
        let id = id_col.map(field).transpose()?;
        docs.push(make_document(row, id, field(text_col)?, field(label_col)?, taxonomy)?);
    }
    Ok(docs)
}

pub(crate) fn load_jsonl<R: std::io::Read>(
    reader: R,
    schema: &Schema,
    taxonomy: &ClassTaxonomy,
) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut row = 0;
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| CorpusError::MalformedRow { row, reason };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("not a JSON object".into()))?;
        let get_str = |key: &str| -> Result<String, CorpusError> {
            match obj.get(key) {
                None => Err(CorpusError::MissingColumn(key.to_string())),
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                Some(serde_json::Value::Null) => Ok(String::new()),
                Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
                Some(other) => Err(malformed(format!("`{key}` is not a string: {other}"))),
            }
        };
        let text = get_str(&schema.text_column)?;
        let label = get_str(&schema.label_column)?;
        let id = schema.id_column.as_deref().map(get_str).transpose()?;
        docs.push(make_document(row, id.as_deref(), &text, &label, taxonomy)?);
        row += 1;
    }
    Ok(docs)
}
