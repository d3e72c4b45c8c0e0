//! File formats.
//!
//! * Distributions: JSON `{"dim": n, "arity": k, "labels": [...],
//!   "entries": [[i_1, ..., i_k, weight], ...]}`; `labels` is optional and
//!   omitted for single variables.
//! * Dense weight vectors: CSV, all numeric fields read in order.
//! * Sets: a `dim=n` header, then one element per line in binary (`0b`),
//!   hex (`0x`) or decimal; `#` starts a comment.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::dist::Dist;
use crate::error::{PfrError, Result};
use crate::group::{check_dim, check_elem, format_elem, parse_elem, GroupElem};
use crate::joint::JointDist;

#[derive(Serialize, Deserialize)]
struct TableRepr {
    dim: u32,
    arity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    entries: Vec<Vec<Value>>,
}

fn entry(values: &[GroupElem], w: f64) -> Vec<Value> {
    let mut row: Vec<Value> = values.iter().map(|&v| Value::from(v)).collect();
    row.push(Value::from(w));
    row
}

fn parse_entry(row: &[Value], arity: usize) -> Result<(Vec<GroupElem>, f64)> {
    if row.len() != arity + 1 {
        return Err(PfrError::Parse(format!(
            "entry has {} fields, expected {}",
            row.len(),
            arity + 1
        )));
    }
    let values = row[..arity]
        .iter()
        .map(|v| {
            v.as_u64()
                .and_then(|x| GroupElem::try_from(x).ok())
                .ok_or_else(|| PfrError::Parse(format!("index {v} is not a group element")))
        })
        .collect::<Result<Vec<_>>>()?;
    let w = row[arity]
        .as_f64()
        .ok_or_else(|| PfrError::Parse(format!("weight {} is not a number", row[arity])))?;
    Ok((values, w))
}

impl Serialize for Dist {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            dim: self.dim(),
            arity: 1,
            labels: None,
            entries: self.iter().map(|(x, p)| entry(&[x], p)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = TableRepr::deserialize(deserializer)?;
        dist_from_repr(repr).map_err(serde::de::Error::custom)
    }
}

fn dist_from_repr(repr: TableRepr) -> Result<Dist> {
    if repr.arity != 1 {
        return Err(PfrError::Parse(format!(
            "expected a single variable, found arity {}",
            repr.arity
        )));
    }
    check_dim(repr.dim)?;
    let entries = repr
        .entries
        .iter()
        .map(|row| parse_entry(row, 1).map(|(v, w)| (v[0], w)))
        .collect::<Result<Vec<_>>>()?;
    Dist::from_entries(repr.dim, entries)
}

impl Serialize for JointDist {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            dim: self.dim(),
            arity: self.arity(),
            labels: Some(self.labels().to_vec()),
            entries: self.iter().map(|(v, p)| entry(&v, p)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JointDist {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = TableRepr::deserialize(deserializer)?;
        joint_from_repr(repr).map_err(serde::de::Error::custom)
    }
}

fn joint_from_repr(repr: TableRepr) -> Result<JointDist> {
    let labels = match repr.labels {
        Some(l) if l.len() == repr.arity => l,
        Some(l) => {
            return Err(PfrError::Parse(format!(
                "{} labels for arity {}",
                l.len(),
                repr.arity
            )))
        }
        None => (0..repr.arity).map(|i| format!("X{}", i + 1)).collect(),
    };
    let entries = repr
        .entries
        .iter()
        .map(|row| parse_entry(row, repr.arity))
        .collect::<Result<Vec<_>>>()?;
    JointDist::from_entries(repr.dim, &labels, entries)
}

pub fn read_dist_json(path: impl AsRef<Path>) -> Result<Dist> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_joint_json(path: impl AsRef<Path>) -> Result<JointDist> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Dense weight vector from CSV text; the length must be a power of two.
pub fn parse_dense_csv(text: &str) -> Result<Dist> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut weights = Vec::new();
    for record in reader.records() {
        for field in record?.iter() {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            weights.push(
                field
                    .parse::<f64>()
                    .map_err(|e| PfrError::Parse(format!("`{field}`: {e}")))?,
            );
        }
    }
    if weights.is_empty() || !weights.len().is_power_of_two() {
        return Err(PfrError::Parse(format!(
            "{} weights is not a power of two",
            weights.len()
        )));
    }
    Dist::from_weights(weights.len().trailing_zeros(), weights)
}

pub fn read_dist_csv(path: impl AsRef<Path>) -> Result<Dist> {
    parse_dense_csv(&fs::read_to_string(path)?)
}

/// A finite subset of F_2^n, sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetInput {
    pub ambient_dim: u32,
    pub elements: Vec<GroupElem>,
}

impl SetInput {
    pub fn new(ambient_dim: u32, mut elements: Vec<GroupElem>) -> Result<Self> {
        check_dim(ambient_dim)?;
        for &x in &elements {
            check_elem(x, ambient_dim)?;
        }
        elements.sort_unstable();
        elements.dedup();
        if elements.is_empty() {
            return Err(PfrError::Empty);
        }
        Ok(Self {
            ambient_dim,
            elements,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn uniform(&self) -> Result<Dist> {
        Dist::uniform_on(&self.elements, self.ambient_dim)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dim={}\n", self.ambient_dim);
        for &x in &self.elements {
            out.push_str(&format_elem(x, self.ambient_dim));
            out.push('\n');
        }
        out
    }
}

pub fn parse_set(text: &str) -> Result<SetInput> {
    let mut dim = None;
    let mut elements = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line
            .strip_prefix("dim=")
            .or_else(|| line.strip_prefix("dim ="))
        {
            if dim.is_some() {
                return Err(PfrError::Parse(format!(
                    "line {}: repeated dim header",
                    lineno + 1
                )));
            }
            dim = Some(
                rest.trim()
                    .parse::<u32>()
                    .map_err(|e| PfrError::Parse(format!("line {}: {e}", lineno + 1)))?,
            );
            continue;
        }
        if dim.is_none() {
            return Err(PfrError::Parse(format!(
                "line {}: element before the dim=n header",
                lineno + 1
            )));
        }
        elements.push(
            parse_elem(line).map_err(|e| PfrError::Parse(format!("line {}: {e}", lineno + 1)))?,
        );
    }
    let dim = dim.ok_or_else(|| PfrError::Parse("missing dim=n header".into()))?;
    SetInput::new(dim, elements)
}

pub fn read_set(path: impl AsRef<Path>) -> Result<SetInput> {
    parse_set(&fs::read_to_string(path)?)
}

/// Reads a distribution from a `.json` file, a `.csv` dense vector, or a
/// set file (uniform distribution on the set).
pub fn read_dist_any(path: impl AsRef<Path>) -> Result<Dist> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_dist_json(path),
        Some("csv") => read_dist_csv(path),
        _ => read_set(path)?.uniform(),
    }
}
