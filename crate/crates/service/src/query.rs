//! Paging, regex filtering and sorting over report instances.

use std::cmp::Ordering;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

pub const MAX_LIMIT: usize = 1000;
pub const DEFAULT_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortDir {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultsQuery {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
    pub filter: Option<String>,
    pub sort_by: Option<String>,
    pub sort_dir: Option<SortDir>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsPage {
    pub task: String,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<Json>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryError {
    pub field: &'static str,
    pub reason: String,
}

fn as_ratio(v: &Json) -> Option<(u128, u128)> {
    let o = v.as_object()?;
    Some((o.get("numerator")?.as_u64()? as u128, o.get("denominator")?.as_u64()? as u128))
}

fn rank(v: &Json) -> u8 {
    match v {
        Json::Bool(_) => 0,
        Json::Number(_) => 1,
        Json::Object(_) if as_ratio(v).is_some() => 1,
        Json::String(_) => 2,
        Json::Array(_) => 3,
        Json::Object(_) => 4,
        Json::Null => 5,
    }
}

/// Total order on instance field values. Exact rationals compare exactly,
/// nulls sort last.
pub fn compare(a: &Json, b: &Json) -> Ordering {
    match (a, b) {
        (Json::Bool(x), Json::Bool(y)) => x.cmp(y),
        (Json::String(x), Json::String(y)) => x.cmp(y),
        (Json::Array(x), Json::Array(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| compare(p, q))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| x.len().cmp(&y.len())),
        _ if rank(a) == 1 && rank(b) == 1 => match (as_ratio(a), as_ratio(b)) {
            (Some((p, q)), Some((r, s))) => (p * s).cmp(&(r * q)),
            _ => {
                let f = |v: &Json| v.as_f64().or_else(|| as_ratio(v).map(|(p, q)| p as f64 / q as f64));
                f(a).unwrap_or(f64::NAN).total_cmp(&f(b).unwrap_or(f64::NAN))
            }
        },
        _ => rank(a).cmp(&rank(b)).then_with(|| a.to_string().cmp(&b.to_string())),
    }
}

/// Applies `query` to `items`. The filter matches each item's `text`.
pub fn page(task: &str, items: Vec<Json>, query: &ResultsQuery) -> Result<ResultsPage, QueryError> {
    let limit = query.limit.unwrap_or(DEFAULT_LIMIT);
    if limit > MAX_LIMIT {
        return Err(QueryError {
            field: "limit",
            reason: format!("must not exceed {MAX_LIMIT}"),
        });
    }
    let mut items = match query.filter.as_deref().filter(|f| !f.is_empty()) {
        Some(pattern) => {
            let re = Regex::new(pattern).map_err(|e| QueryError {
                field: "filter",
                reason: e.to_string(),
            })?;
            items
                .into_iter()
                .filter(|i| i.get("text").and_then(Json::as_str).is_some_and(|t| re.is_match(t)))
                .collect()
        }
        None => items,
    };
    if let Some(field) = query.sort_by.as_deref().filter(|f| !f.is_empty()) {
        if !items.is_empty() && !items.iter().any(|i| i.get(field).is_some()) {
            return Err(QueryError {
                field: "sort_by",
                reason: format!("unknown field `{field}`"),
            });
        }
        let desc = query.sort_dir.unwrap_or_default() == SortDir::Desc;
        items.sort_by(|a, b| {
            let (x, y) = (a.get(field).unwrap_or(&Json::Null), b.get(field).unwrap_or(&Json::Null));
            let o = compare(x, y);
            if desc {
                o.reverse()
            } else {
                o
            }
        });
    }
    let total = items.len();
    let offset = query.offset.unwrap_or(0);
    let items = items.into_iter().skip(offset).take(limit).collect();
    Ok(ResultsPage {
        task: task.to_owned(),
        total,
        offset,
        limit,
        items,
    })
}
