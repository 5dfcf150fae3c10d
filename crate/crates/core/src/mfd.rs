//! Metric functional dependency validation.
//!
//! `X -> Y` holds under metric `d` with threshold `p` when every class of
//! π_X has a Y-projection whose diameter (largest pairwise distance) is at
//! most `p`.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::exec::ExecConfig;
use crate::pli::partition_of;
use crate::relation::{Relation, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Unit-cost edit distance over Unicode scalar values; string attributes.
    Levenshtein,
    /// L2 over numeric attributes.
    Euclidean,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Levenshtein => "levenshtein",
            Metric::Euclidean => "euclidean",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "levenshtein" | "edit" => Ok(Metric::Levenshtein),
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            _ => Err(Error::invalid("metric", format!("unknown metric `{s}`"))),
        }
    }
}

impl Metric {
    /// The metric matching an attribute type.
    pub fn for_type(ty: crate::relation::AttributeType) -> Metric {
        if ty.is_numeric() {
            Metric::Euclidean
        } else {
            Metric::Levenshtein
        }
    }
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = (above + 1).min(row[j] + 1).min(diag + usize::from(ca != cb));
            diag = above;
        }
    }
    row[b.len()]
}

/// Distance between two single values.
pub fn distance(a: &Value, b: &Value, metric: Metric) -> Result<f64> {
    tuple_distance(&[a], &[b], metric)
}

/// Distance between two equally long value tuples. Levenshtein tuples are
/// compared by summed per-attribute edit distance.
pub fn tuple_distance(a: &[&Value], b: &[&Value], metric: Metric) -> Result<f64> {
    debug_assert_eq!(a.len(), b.len());
    match metric {
        Metric::Levenshtein => {
            let mut total = 0usize;
            for (x, y) in a.iter().zip(b) {
                total += match (x, y) {
                    (Value::Null, _) | (_, Value::Null) => return Err(Error::NullOperand),
                    (Value::String(x), Value::String(y)) => levenshtein(x, y),
                    _ => return Err(type_error(metric, x, y)),
                };
            }
            Ok(total as f64)
        }
        Metric::Euclidean => {
            if a.len() == 1 {
                return Ok(numeric_pair(a[0], b[0], metric)?.abs());
            }
            let mut sum = 0.0;
            for (x, y) in a.iter().zip(b) {
                let d = numeric_pair(x, y, metric)?;
                sum += d * d;
            }
            Ok(sum.sqrt())
        }
    }
}

fn numeric_pair(x: &Value, y: &Value, metric: Metric) -> Result<f64> {
    match (x, y) {
        (Value::Null, _) | (_, Value::Null) => Err(Error::NullOperand),
        (Value::Integer(p), Value::Integer(q)) => Ok((*p as i128 - *q as i128) as f64),
        _ => match (x.as_f64(), y.as_f64()) {
            (Some(p), Some(q)) => Ok(p - q),
            _ => Err(type_error(metric, x, y)),
        },
    }
}

fn type_error(metric: Metric, x: &Value, y: &Value) -> Error {
    Error::MetricMismatch {
        metric: metric.to_string(),
        attribute: format!("{x} / {y}"),
        found: "incompatible value".into(),
    }
}

/// Largest pairwise distance in `tuples`; zero for a single tuple.
pub fn cluster_diameter(tuples: &[Vec<Value>], metric: Metric) -> Result<f64> {
    let mut best = 0.0f64;
    for (i, a) in tuples.iter().enumerate() {
        let a: Vec<&Value> = a.iter().collect();
        for b in &tuples[i + 1..] {
            let b: Vec<&Value> = b.iter().collect();
            best = best.max(tuple_distance(&a, &b, metric)?);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdStatement {
    pub lhs: AttrSet,
    pub rhs: Vec<usize>,
    pub metric: Metric,
    pub p: f64,
}

impl MfdStatement {
    /// Checks indexes, the threshold and metric/type compatibility.
    pub fn check(&self, relation: &Relation) -> Result<()> {
        for a in self.lhs.iter() {
            relation.check_attribute(a)?;
        }
        if self.rhs.is_empty() {
            return Err(Error::invalid("rhs", "at least one attribute is required"));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(Error::invalid("p", "must be a finite non-negative number"));
        }
        for &a in &self.rhs {
            relation.check_attribute(a)?;
            let attr = relation.attribute(a);
            let ok = match self.metric {
                Metric::Levenshtein => !attr.inferred_type.is_numeric(),
                Metric::Euclidean => attr.inferred_type.is_numeric(),
            };
            if !ok {
                return Err(Error::MetricMismatch {
                    metric: self.metric.to_string(),
                    attribute: attr.name.clone(),
                    found: attr.inferred_type.to_string(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterViolation {
    pub rows: Vec<u32>,
    /// `None` when a null on the right-hand side makes the class incomparable.
    pub diameter: Option<f64>,
    pub witness: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdVerdict {
    pub holds: bool,
    /// Smallest threshold under which the statement holds; `None` if some
    /// class is incomparable.
    pub global_diameter: Option<f64>,
    pub violating_clusters: Vec<ClusterViolation>,
}

pub(crate) struct ClusterDiameter {
    pub rows: Vec<u32>,
    pub diameter: Option<f64>,
    pub witness: Option<(u32, u32)>,
}

/// Diameter of one π_X class, deduplicating identical rhs code tuples first.
/// The witness is the lexicographically smallest row pair at maximal distance.
fn diameter_of(relation: &Relation, rows: &[u32], rhs: &[usize], metric: Metric) -> ClusterDiameter {
    let has_null = rows
        .iter()
        .any(|&r| rhs.iter().any(|&a| relation.is_null(r as usize, a)));
    if has_null {
        return ClusterDiameter {
            rows: rows.to_vec(),
            diameter: None,
            witness: None,
        };
    }
    // Distinct code tuples with the first row carrying each.
    let mut seen: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut reps: Vec<u32> = Vec::new();
    for &r in rows {
        let key: Vec<u32> = rhs.iter().map(|&a| relation.code(r as usize, a)).collect();
        seen.entry(key).or_insert_with(|| {
            reps.push(r);
            r
        });
    }
    let values: Vec<Vec<&Value>> = reps
        .iter()
        .map(|&r| rhs.iter().map(|&a| relation.value(r as usize, a)).collect())
        .collect();
    let mut best = 0.0f64;
    let mut witness: Option<(u32, u32)> = None;
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            let d = tuple_distance(&values[i], &values[j], metric).expect("checked statement");
            let pair = (reps[i].min(reps[j]), reps[i].max(reps[j]));
            let better = match witness {
                None => true,
                Some(w) => d > best || (d == best && pair < w),
            };
            if better {
                best = d;
                witness = Some(pair);
            }
        }
    }
    ClusterDiameter {
        rows: rows.to_vec(),
        diameter: Some(best),
        witness: witness.or_else(|| (rows.len() >= 2).then(|| (rows[0], rows[1]))),
    }
}

pub(crate) fn cluster_diameters(
    relation: &Relation,
    lhs: AttrSet,
    rhs: &[usize],
    metric: Metric,
    exec: &ExecConfig,
) -> Vec<ClusterDiameter> {
    let pli = partition_of(relation, lhs);
    exec.install(|| {
        pli.clusters()
            .par_iter()
            .map(|c| diameter_of(relation, c, rhs, metric))
            .collect()
    })
}

pub(crate) fn verdict_from(diameters: Vec<ClusterDiameter>, p: f64) -> MfdVerdict {
    let mut global = Some(0.0f64);
    let mut violating = Vec::new();
    for c in diameters {
        match c.diameter {
            Some(d) => {
                global = global.map(|g| g.max(d));
                if d > p {
                    violating.push(ClusterViolation {
                        rows: c.rows,
                        diameter: Some(d),
                        witness: c.witness,
                    });
                }
            }
            None => {
                global = None;
                violating.push(ClusterViolation {
                    rows: c.rows,
                    diameter: None,
                    witness: None,
                });
            }
        }
    }
    MfdVerdict {
        holds: violating.is_empty(),
        global_diameter: global,
        violating_clusters: violating,
    }
}

/// Validates `stmt`, reporting every class of π_lhs whose rhs diameter
/// exceeds `p` (inclusive comparison) or that holds a null on the rhs.
pub fn validate_mfd(relation: &Relation, stmt: &MfdStatement, exec: &ExecConfig) -> Result<MfdVerdict> {
    stmt.check(relation)?;
    let diameters = cluster_diameters(relation, stmt.lhs, &stmt.rhs, stmt.metric, exec);
    Ok(verdict_from(diameters, stmt.p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{load_csv, CsvConfig};

    fn rel(text: &str) -> Relation {
        load_csv(text.as_bytes(), &CsvConfig::default()).unwrap()
    }

    fn s(x: &str) -> Value {
        Value::String(x.into())
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&s("abc"), &s("abc"), Metric::Levenshtein).unwrap(), 0.0);
        assert_eq!(distance(&Value::Integer(4), &Value::Integer(4), Metric::Euclidean).unwrap(), 0.0);
        assert_eq!(distance(&s("abc"), &s(""), Metric::Levenshtein).unwrap(), 3.0);
        assert_eq!(distance(&s("kitten"), &s("sitting"), Metric::Levenshtein).unwrap(), 3.0);
        assert_eq!(distance(&Value::Integer(3), &Value::Float(5.5), Metric::Euclidean).unwrap(), 2.5);
    }

    #[test]
    fn distance_errors() {
        assert!(matches!(
            distance(&Value::Null, &s("a"), Metric::Levenshtein),
            Err(Error::NullOperand)
        ));
        assert!(matches!(
            distance(&Value::Integer(1), &s("a"), Metric::Euclidean),
            Err(Error::MetricMismatch { .. })
        ));
    }

    #[test]
    fn multi_attribute_l2() {
        let a = [Value::Integer(0), Value::Integer(0)];
        let b = [Value::Integer(3), Value::Integer(4)];
        let d = tuple_distance(&[&a[0], &a[1]], &[&b[0], &b[1]], Metric::Euclidean).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(cluster_diameter(&[vec![Value::Integer(7)]], Metric::Euclidean).unwrap(), 0.0);
        let t: Vec<Vec<Value>> = [3, 5, 9].iter().map(|&v| vec![Value::Integer(v)]).collect();
        assert_eq!(cluster_diameter(&t, Metric::Euclidean).unwrap(), 6.0);
        let t = vec![vec![s("x")], vec![s("x")]];
        assert_eq!(cluster_diameter(&t, Metric::Levenshtein).unwrap(), 0.0);
    }

    fn stmt(lhs: &[usize], rhs: &[usize], metric: Metric, p: f64) -> MfdStatement {
        MfdStatement {
            lhs: lhs.iter().copied().collect(),
            rhs: rhs.to_vec(),
            metric,
            p,
        }
    }

    #[test]
    fn key_lhs_holds_vacuously() {
        let r = rel("k,v\n1,10\n2,500");
        let v = validate_mfd(&r, &stmt(&[0], &[1], Metric::Euclidean, 0.0), &ExecConfig::default()).unwrap();
        assert!(v.holds);
        assert_eq!(v.global_diameter, Some(0.0));
    }

    #[test]
    fn violating_cluster_and_boundary() {
        let r = rel("k,v\na,3\na,5\na,9\nb,1");
        let exec = ExecConfig::default();
        let v = validate_mfd(&r, &stmt(&[0], &[1], Metric::Euclidean, 5.0), &exec).unwrap();
        assert!(!v.holds);
        assert_eq!(v.global_diameter, Some(6.0));
        assert_eq!(v.violating_clusters.len(), 1);
        assert_eq!(v.violating_clusters[0].rows, vec![0, 1, 2]);
        assert_eq!(v.violating_clusters[0].witness, Some((0, 2)));
        let v = validate_mfd(&r, &stmt(&[0], &[1], Metric::Euclidean, 6.0), &exec).unwrap();
        assert!(v.holds);
    }

    #[test]
    fn nulls_make_clusters_incomparable() {
        let r = rel("k,v\na,3\na,\nb,1");
        let v = validate_mfd(&r, &stmt(&[0], &[1], Metric::Euclidean, 100.0), &ExecConfig::default()).unwrap();
        assert!(!v.holds);
        assert_eq!(v.global_diameter, None);
        assert_eq!(v.violating_clusters[0].diameter, None);
    }

    #[test]
    fn rejects_incompatible_metric() {
        let r = rel("k,v\na,3\na,4");
        let err = validate_mfd(&r, &stmt(&[0], &[1], Metric::Levenshtein, 1.0), &ExecConfig::default());
        assert!(matches!(err, Err(Error::MetricMismatch { .. })));
        let r = rel("k,v,w\na,3,x\na,4,y");
        let err = validate_mfd(&r, &stmt(&[0], &[1, 2], Metric::Euclidean, 1.0), &ExecConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn tie_break_prefers_smallest_rows() {
        let r = rel("k,v\na,1\na,3\na,5\na,1");
        let v = validate_mfd(&r, &stmt(&[0], &[1], Metric::Euclidean, 1.0), &ExecConfig::default()).unwrap();
        assert_eq!(v.violating_clusters[0].witness, Some((0, 2)));
    }
}
