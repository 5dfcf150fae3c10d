//! Delimited-text ingestion, column type inference and dictionary encoding.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attrs::MAX_ATTRIBUTES;
use crate::error::{Error, Result};

/// Dictionary code reserved for the null marker in every column.
pub const NULL_ID: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeType {
    String,
    Integer,
    Float,
}

impl AttributeType {
    pub fn is_numeric(self) -> bool {
        matches!(self, AttributeType::Integer | AttributeType::Float)
    }
}

impl fmt::Display for AttributeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeType::String => "string",
            AttributeType::Integer => "integer",
            AttributeType::Float => "float",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub index: usize,
    pub name: String,
    pub inferred_type: AttributeType,
}

/// A decoded cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Integer(i64),
    Float(f64),
    String(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Integer(i) => Some(i as f64),
            Value::Float(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::String(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvConfig {
    pub separator: char,
    pub has_header: bool,
    pub null_token: String,
    /// Treat nulls as pairwise distinct when partitioning.
    pub nulls_distinct: bool,
}

impl Default for CsvConfig {
    fn default() -> Self {
        CsvConfig {
            separator: ',',
            has_header: true,
            null_token: String::new(),
            nulls_distinct: false,
        }
    }
}

impl CsvConfig {
    fn separator_byte(&self) -> Result<u8> {
        u8::try_from(self.separator)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::invalid("separator", "must be a single ASCII character"))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dictionary {
    tokens: Vec<String>,
    values: Vec<Value>,
}

/// Immutable, dictionary-encoded table.
///
/// Codes are assigned in first-occurrence order per column, with [`NULL_ID`]
/// reserved for nulls. Every row also carries a stable origin id which
/// survives row removal (see the deduplication scenario).
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    name: String,
    attributes: Vec<Attribute>,
    columns: Vec<Vec<u32>>,
    dictionaries: Vec<Dictionary>,
    origin: Vec<u32>,
    nulls_distinct: bool,
}

fn infer_type<'a>(tokens: impl Iterator<Item = &'a str> + Clone) -> AttributeType {
    let mut any = false;
    let mut all_int = true;
    let mut all_num = true;
    for t in tokens {
        any = true;
        if all_int && t.parse::<i64>().is_err() {
            all_int = false;
        }
        if t.parse::<f64>().map_or(true, |x| !x.is_finite()) {
            all_num = false;
            break;
        }
    }
    match (any, all_int, all_num) {
        (false, _, _) => AttributeType::String,
        (true, true, _) => AttributeType::Integer,
        (true, false, true) => AttributeType::Float,
        _ => AttributeType::String,
    }
}

fn typed(token: &str, ty: AttributeType) -> Value {
    match ty {
        AttributeType::Integer => Value::Integer(token.parse().expect("inferred integer")),
        AttributeType::Float => Value::Float(token.parse().expect("inferred float")),
        AttributeType::String => Value::String(token.to_owned()),
    }
}

impl Relation {
    /// Builds a relation from raw cells, `None` being null.
    pub fn from_cells(
        names: Vec<String>,
        rows: Vec<Vec<Option<String>>>,
        nulls_distinct: bool,
    ) -> Result<Self> {
        let m = names.len();
        if m == 0 {
            return Err(Error::NoAttributes);
        }
        if m > MAX_ATTRIBUTES {
            return Err(Error::TooManyAttributes(m));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::RaggedRow {
                    line: i as u64 + 1,
                    expected: m,
                    found: row.len(),
                });
            }
        }
        let n = rows.len();
        let mut attributes = Vec::with_capacity(m);
        let mut columns = Vec::with_capacity(m);
        let mut dictionaries = Vec::with_capacity(m);
        for (index, name) in names.into_iter().enumerate() {
            let ty = infer_type(rows.iter().filter_map(|r| r[index].as_deref()));
            let mut lookup: HashMap<&str, u32> = HashMap::new();
            let mut dict = Dictionary {
                tokens: vec![String::new()],
                values: vec![Value::Null],
            };
            let mut column = Vec::with_capacity(n);
            for row in &rows {
                let code = match row[index].as_deref() {
                    None => NULL_ID,
                    Some(tok) => *lookup.entry(tok).or_insert_with(|| {
                        dict.tokens.push(tok.to_owned());
                        dict.values.push(typed(tok, ty));
                        (dict.values.len() - 1) as u32
                    }),
                };
                column.push(code);
            }
            attributes.push(Attribute {
                index,
                name,
                inferred_type: ty,
            });
            columns.push(column);
            dictionaries.push(dict);
        }
        Ok(Relation {
            name: String::new(),
            attributes,
            columns,
            dictionaries,
            origin: (0..n as u32).collect(),
            nulls_distinct,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, index: usize) -> &Attribute {
        &self.attributes[index]
    }

    pub fn attribute_names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn row_count(&self) -> usize {
        self.origin.len()
    }

    pub fn nulls_distinct(&self) -> bool {
        self.nulls_distinct
    }

    pub fn column(&self, attr: usize) -> &[u32] {
        &self.columns[attr]
    }

    pub fn code(&self, row: usize, attr: usize) -> u32 {
        self.columns[attr][row]
    }

    /// Number of codes in the column's dictionary, null included.
    pub fn dictionary_len(&self, attr: usize) -> usize {
        self.dictionaries[attr].values.len()
    }

    pub fn decode(&self, attr: usize, code: u32) -> &Value {
        &self.dictionaries[attr].values[code as usize]
    }

    pub fn value(&self, row: usize, attr: usize) -> &Value {
        self.decode(attr, self.columns[attr][row])
    }

    /// Original text of a cell, `None` for null.
    pub fn token(&self, row: usize, attr: usize) -> Option<&str> {
        match self.columns[attr][row] {
            NULL_ID => None,
            code => Some(&self.dictionaries[attr].tokens[code as usize]),
        }
    }

    pub fn is_null(&self, row: usize, attr: usize) -> bool {
        self.columns[attr][row] == NULL_ID
    }

    /// Stable row identifiers; ascending, `0..n` for a freshly loaded relation.
    pub fn origin(&self) -> &[u32] {
        &self.origin
    }

    pub fn position_of(&self, origin_id: u32) -> Option<usize> {
        self.origin.binary_search(&origin_id).ok()
    }

    pub fn check_attribute(&self, attr: usize) -> Result<usize> {
        if attr < self.attribute_count() {
            Ok(attr)
        } else {
            Err(Error::AttributeOutOfRange(attr))
        }
    }

    /// Resolves an attribute by exact name, falling back to a 0-based index.
    pub fn resolve_attribute(&self, key: &str) -> Result<usize> {
        if let Some(a) = self.attributes.iter().find(|a| a.name == key) {
            return Ok(a.index);
        }
        match key.trim().parse::<usize>() {
            Ok(i) if i < self.attribute_count() => Ok(i),
            _ => Err(Error::UnknownAttribute(key.to_owned())),
        }
    }

    /// Owned raw cells of every row.
    pub fn to_cells(&self) -> Vec<Vec<Option<String>>> {
        (0..self.row_count())
            .map(|r| {
                (0..self.attribute_count())
                    .map(|a| self.token(r, a).map(str::to_owned))
                    .collect()
            })
            .collect()
    }

    /// Derives a relation keeping `rows` (positions, in order) and applying
    /// per-cell code overrides `(position, attr, code)`.
    pub(crate) fn derive(&self, rows: &[usize], overrides: &[(usize, usize, u32)]) -> Relation {
        let mut columns: Vec<Vec<u32>> = self.columns.clone();
        for &(pos, attr, code) in overrides {
            columns[attr][pos] = code;
        }
        let columns = columns
            .into_iter()
            .map(|col| rows.iter().map(|&r| col[r]).collect())
            .collect();
        Relation {
            name: self.name.clone(),
            attributes: self.attributes.clone(),
            columns,
            dictionaries: self.dictionaries.clone(),
            origin: rows.iter().map(|&r| self.origin[r]).collect(),
            nulls_distinct: self.nulls_distinct,
        }
    }

    /// Row-wise union of relations sharing attribute names. Types are
    /// re-inferred over the combined data.
    pub fn concat(parts: &[Relation]) -> Result<Relation> {
        let first = parts.first().ok_or(Error::EmptyInput)?;
        let names = first.attribute_names();
        let mut rows = Vec::new();
        for p in parts {
            if p.attribute_names() != names {
                return Err(Error::SchemaMismatch);
            }
            rows.extend(p.to_cells());
        }
        Ok(Relation::from_cells(names, rows, first.nulls_distinct)?.with_name(first.name.clone()))
    }

    /// Serializes back to delimited text with a header row; nulls are
    /// written as `null_token`.
    pub fn to_csv(&self, separator: char, null_token: &str) -> Result<Vec<u8>> {
        let sep = CsvConfig {
            separator,
            ..CsvConfig::default()
        }
        .separator_byte()?;
        let mut w = csv::WriterBuilder::new()
            .delimiter(sep)
            .from_writer(Vec::new());
        w.write_record(self.attributes.iter().map(|a| a.name.as_str()))?;
        for r in 0..self.row_count() {
            w.write_record((0..self.attribute_count()).map(|a| self.token(r, a).unwrap_or(null_token)))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Parses delimited text into a [`Relation`].
///
/// A column is `integer` if every non-null cell parses as an integer,
/// `float` if every non-null cell parses as a finite number, and `string`
/// otherwise. Empty fields and `null_token` become null.
pub fn load_csv<R: Read>(source: R, config: &CsvConfig) -> Result<Relation> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(config.separator_byte()?)
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();
    let first = match records.next() {
        None => return Err(Error::EmptyInput),
        Some(rec) => rec?,
    };
    let width = first.len();
    let mut rows: Vec<Vec<Option<String>>> = Vec::new();
    let to_cell = |field: &str| -> Option<String> {
        (!field.is_empty() && field != config.null_token).then(|| field.to_owned())
    };
    let names = if config.has_header {
        first.iter().map(str::to_owned).collect()
    } else {
        rows.push(first.iter().map(to_cell).collect());
        (0..width).map(|i| format!("col{i}")).collect()
    };
    for rec in records {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::RaggedRow {
                line: rec.position().map_or(0, |p| p.line()),
                expected: width,
                found: rec.len(),
            });
        }
        rows.push(rec.iter().map(to_cell).collect());
    }
    Relation::from_cells(names, rows, config.nulls_distinct)
}

pub fn load_csv_path(path: impl AsRef<Path>, config: &CsvConfig) -> Result<Relation> {
    let path = path.as_ref();
    let file = File::open(path)?;
    Ok(load_csv(std::io::BufReader::new(file), config)?.with_name(path.display().to_string()))
}
