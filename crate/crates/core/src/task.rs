//! Task kinds, their parameter documents and the single entry point that
//! turns a task into a [`Report`].

use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::afd::discover_afds;
use crate::attrs::AttrSet;
use crate::error::{Error, FieldError, Result};
use crate::exec::ExecConfig;
use crate::fd::discover_fds;
use crate::mfd::{validate_mfd, Metric, MfdStatement};
use crate::ratio::Ratio;
use crate::relation::Relation;
use crate::report::{
    AfdReport, AfdView, AnomalyReport, DatasetInfo, DedupReport, FdReport, KeyView, MfdReport, PairView,
    PartitionView, Report, TypoClusterView, TypoReport,
};
use crate::scenario::anomaly::{advance_canonical, analyze_partition, record_rejection, AnomalyConfig, AnomalyState};
use crate::scenario::dedup::{choose_key, find_duplicates, rank_dedup_keys, sort_for_neighborhood, DedupConfig};
use crate::scenario::typo::{inside_share, is_displayed, mine_almost_fds, propose_fixes, violation_clusters, TypoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FdDiscovery,
    AfdDiscovery,
    MfdValidation,
    ScenarioTypo,
    ScenarioDedup,
    ScenarioAnomaly,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::FdDiscovery,
        TaskKind::AfdDiscovery,
        TaskKind::MfdValidation,
        TaskKind::ScenarioTypo,
        TaskKind::ScenarioDedup,
        TaskKind::ScenarioAnomaly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::FdDiscovery => "fd_discovery",
            TaskKind::AfdDiscovery => "afd_discovery",
            TaskKind::MfdValidation => "mfd_validation",
            TaskKind::ScenarioTypo => "scenario_typo",
            TaskKind::ScenarioDedup => "scenario_dedup",
            TaskKind::ScenarioAnomaly => "scenario_anomaly",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("kind", format!("unknown task kind `{s}`")))
    }
}

/// An attribute given by position or by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrRef {
    Index(usize),
    Name(String),
}

impl AttrRef {
    pub fn resolve(&self, relation: &Relation) -> Result<usize> {
        match self {
            AttrRef::Index(i) => relation.check_attribute(*i),
            AttrRef::Name(n) => relation.resolve_attribute(n),
        }
    }
}

impl From<&str> for AttrRef {
    fn from(s: &str) -> Self {
        AttrRef::Name(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdParams {
    pub max_lhs: usize,
}

impl Default for FdParams {
    fn default() -> Self {
        FdParams { max_lhs: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfdParams {
    pub threshold: Ratio,
    pub max_lhs: usize,
}

impl Default for AfdParams {
    fn default() -> Self {
        AfdParams {
            threshold: Ratio::new(1, 100),
            max_lhs: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfdParams {
    pub lhs: Vec<AttrRef>,
    pub rhs: Vec<AttrRef>,
    /// Chosen from the rhs types when absent.
    pub metric: Option<Metric>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupParams {
    pub threshold: Ratio,
    pub window: usize,
    /// Defaults to two less than the attribute count.
    pub k: Option<usize>,
    pub excluded_keys: Vec<AttrRef>,
    /// Also drop key candidates whose column has no repeated value.
    pub exclude_unique: bool,
}

impl Default for DedupParams {
    fn default() -> Self {
        DedupParams {
            threshold: Ratio::new(1, 100),
            window: 5,
            k: None,
            excluded_keys: Vec::new(),
            exclude_unique: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyParams {
    pub max_lhs: usize,
    pub thresholds: Vec<Ratio>,
    pub d: Option<f64>,
    pub step: f64,
    pub metric: Option<Metric>,
    /// Accept every analysed partition into the canonical set, in order.
    pub accept: bool,
    /// Analyse the union of all partitions seen so far instead of each alone.
    pub cumulative: bool,
}

impl Default for AnomalyParams {
    fn default() -> Self {
        AnomalyParams {
            max_lhs: 3,
            thresholds: vec![Ratio::new(1, 100), Ratio::new(1, 20), Ratio::new(1, 10)],
            d: None,
            step: 1.0,
            metric: None,
            accept: false,
            cumulative: false,
        }
    }
}

impl AnomalyParams {
    pub fn config(&self) -> AnomalyConfig {
        AnomalyConfig {
            max_lhs: self.max_lhs,
            thresholds: self.thresholds.clone(),
            d: self.d,
            step: self.step,
            metric: self.metric,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskParams {
    Fd(FdParams),
    Afd(AfdParams),
    Mfd(MfdParams),
    Typo(TypoConfig),
    Dedup(DedupParams),
    Anomaly(AnomalyParams),
}

fn field(field: &str, reason: impl Into<String>) -> FieldError {
    FieldError {
        field: field.to_owned(),
        reason: reason.into(),
    }
}

/// Merges `raw` over the defaults of `T`, blaming each bad key separately.
fn parse_fields<T: Default + Serialize + DeserializeOwned>(raw: &Json) -> Result<T, Vec<FieldError>> {
    let given = match raw {
        Json::Null => return Ok(T::default()),
        Json::Object(o) => o,
        _ => return Err(vec![field("params", "must be a JSON object")]),
    };
    let base = match serde_json::to_value(T::default()) {
        Ok(Json::Object(o)) => o,
        _ => unreachable!("parameter structs serialize to objects"),
    };
    let mut errors = Vec::new();
    for (key, value) in given {
        if !base.contains_key(key) {
            errors.push(field(key, "unknown field"));
            continue;
        }
        let mut probe = base.clone();
        probe.insert(key.clone(), value.clone());
        if let Err(e) = serde_json::from_value::<T>(Json::Object(probe)) {
            errors.push(field(key, e.to_string()));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut merged: Map<String, Json> = base;
    merged.extend(given.clone());
    serde_json::from_value(Json::Object(merged)).map_err(|e| vec![field("params", e.to_string())])
}

fn check_max_lhs(max_lhs: usize, errors: &mut Vec<FieldError>) {
    if max_lhs == 0 {
        errors.push(field("max_lhs", "must be at least 1"));
    }
}

fn check_threshold(name: &str, t: Ratio, errors: &mut Vec<FieldError>) {
    if t > Ratio::ONE {
        errors.push(field(name, "must lie in [0, 1]"));
    }
}

fn resolve_all(refs: &[AttrRef], relation: &Relation, name: &str, errors: &mut Vec<FieldError>) -> Vec<usize> {
    refs.iter()
        .filter_map(|r| match r.resolve(relation) {
            Ok(i) => Some(i),
            Err(e) => {
                errors.push(field(name, e.to_string()));
                None
            }
        })
        .collect()
}

/// Parses and checks `raw` for `kind`. Checks that need the data run against
/// `datasets` when given; pass an empty slice to validate the document alone.
pub fn validate(kind: TaskKind, raw: &Json, datasets: &[&Relation]) -> Result<TaskParams, Vec<FieldError>> {
    let mut errors = Vec::new();
    let params = match kind {
        TaskKind::FdDiscovery => {
            let p: FdParams = parse_fields(raw)?;
            check_max_lhs(p.max_lhs, &mut errors);
            TaskParams::Fd(p)
        }
        TaskKind::AfdDiscovery => {
            let p: AfdParams = parse_fields(raw)?;
            check_max_lhs(p.max_lhs, &mut errors);
            check_threshold("threshold", p.threshold, &mut errors);
            TaskParams::Afd(p)
        }
        TaskKind::MfdValidation => {
            let p: MfdParams = parse_fields(raw)?;
            if p.rhs.is_empty() {
                errors.push(field("rhs", "at least one attribute is required"));
            }
            if !(p.p.is_finite() && p.p >= 0.0) {
                errors.push(field("p", "must be a finite non-negative number"));
            }
            if let (Some(r), true) = (datasets.first(), errors.is_empty()) {
                if let Err(e) = mfd_statement(&p, r) {
                    match e {
                        Error::MetricMismatch { .. } => errors.push(field("metric", e.to_string())),
                        Error::InvalidParameters(fs) => errors.extend(fs),
                        other => errors.push(field("rhs", other.to_string())),
                    }
                }
            }
            TaskParams::Mfd(p)
        }
        TaskKind::ScenarioTypo => {
            let p: TypoConfig = parse_fields(raw)?;
            check_threshold("threshold", p.threshold, &mut errors);
            if let Err(e) = p.check() {
                errors.extend(e.field_errors().unwrap_or_default());
            }
            TaskParams::Typo(p)
        }
        TaskKind::ScenarioDedup => {
            let p: DedupParams = parse_fields(raw)?;
            check_threshold("threshold", p.threshold, &mut errors);
            if p.window < 2 {
                errors.push(field("window", "must be at least 2"));
            }
            if p.k == Some(0) {
                errors.push(field("k", "must be at least 1"));
            }
            if let Some(r) = datasets.first() {
                if errors.is_empty() {
                    if let Err(e) = dedup_config(&p, r) {
                        errors.extend(e.field_errors().unwrap_or_default());
                    }
                }
            }
            TaskParams::Dedup(p)
        }
        TaskKind::ScenarioAnomaly => {
            let p: AnomalyParams = parse_fields(raw)?;
            check_max_lhs(p.max_lhs, &mut errors);
            for t in &p.thresholds {
                check_threshold("thresholds", *t, &mut errors);
            }
            if p.thresholds.windows(2).any(|w| w[0] > w[1]) {
                errors.push(field("thresholds", "must be ascending"));
            }
            if !(p.step.is_finite() && p.step > 0.0) {
                errors.push(field("step", "must be positive"));
            }
            if let Some(d) = p.d {
                if !(d.is_finite() && d >= p.step) {
                    errors.push(field("d", "must be at least step"));
                }
            }
            if let Some(first) = datasets.first() {
                let names = first.attribute_names();
                if datasets.iter().any(|r| r.attribute_names() != names) {
                    errors.push(field("datasets", "partitions must share one schema"));
                }
            }
            TaskParams::Anomaly(p)
        }
    };
    let expected = if kind == TaskKind::ScenarioAnomaly { "at least one" } else { "exactly one" };
    let count_ok = match kind {
        TaskKind::ScenarioAnomaly => true,
        _ => datasets.len() <= 1,
    };
    if !count_ok {
        errors.push(field("datasets", format!("{expected} dataset is required")));
    }
    if errors.is_empty() {
        Ok(params)
    } else {
        Err(errors)
    }
}

pub fn mfd_statement(p: &MfdParams, relation: &Relation) -> Result<MfdStatement> {
    let mut errors = Vec::new();
    let lhs: AttrSet = resolve_all(&p.lhs, relation, "lhs", &mut errors).into_iter().collect();
    let rhs = resolve_all(&p.rhs, relation, "rhs", &mut errors);
    if !errors.is_empty() {
        return Err(Error::InvalidParameters(errors));
    }
    let metric = match p.metric {
        Some(m) => m,
        None => {
            let first = rhs.first().ok_or_else(|| Error::invalid("rhs", "at least one attribute is required"))?;
            Metric::for_type(relation.attribute(*first).inferred_type)
        }
    };
    let stmt = MfdStatement { lhs, rhs, metric, p: p.p };
    stmt.check(relation)?;
    Ok(stmt)
}

pub fn dedup_config(p: &DedupParams, relation: &Relation) -> Result<DedupConfig> {
    let m = relation.attribute_count();
    let mut errors = Vec::new();
    let excluded: AttrSet = resolve_all(&p.excluded_keys, relation, "excluded_keys", &mut errors)
        .into_iter()
        .collect();
    if !errors.is_empty() {
        return Err(Error::InvalidParameters(errors));
    }
    let cfg = DedupConfig {
        threshold: p.threshold,
        window: p.window,
        k: p.k.unwrap_or(m.saturating_sub(2).max(1)),
        excluded_keys: excluded,
    };
    cfg.check(m)?;
    Ok(cfg)
}

/// Candidate pairs of the sorted-neighbourhood scan; nothing is resolved.
pub fn dedup_scan(relation: &Relation, p: &DedupParams, exec: &ExecConfig) -> Result<DedupReport> {
    let mut cfg = dedup_config(p, relation)?;
    let names = relation.attribute_names();
    let mut candidates = rank_dedup_keys(relation, &cfg, exec);
    if p.exclude_unique {
        for c in candidates.iter().filter(|c| c.is_unique) {
            cfg.excluded_keys = cfg.excluded_keys.with(c.lhs);
        }
        candidates.retain(|c| !c.is_unique);
    }
    let key = choose_key(&candidates).cloned();
    let permutation = match &key {
        Some(k) => sort_for_neighborhood(relation, k),
        None => (0..relation.row_count() as u32).collect(),
    };
    let pairs = find_duplicates(relation, &permutation, cfg.window, cfg.k);
    Ok(DedupReport {
        dataset: DatasetInfo::of(relation),
        candidates: candidates.iter().map(|c| KeyView::new(c, &names)).collect(),
        key: key.as_ref().map(|k| KeyView::new(k, &names)),
        pairs: pairs.iter().map(|p| PairView::new(p, &names)).collect(),
        config: cfg,
        outcome: None,
    })
}

pub fn typo_scan(relation: &Relation, cfg: &TypoConfig, exec: &ExecConfig) -> Result<TypoReport> {
    let names = relation.attribute_names();
    let afds = mine_almost_fds(relation, cfg, exec)?;
    let mut clusters = Vec::new();
    for afd in &afds {
        exec.checkpoint()?;
        for c in violation_clusters(relation, &afd.fd)? {
            let share = inside_share(&c, cfg.radius);
            let shown = is_displayed(&c, cfg);
            let fixes = propose_fixes(&c, cfg.radius);
            clusters.push(TypoClusterView::new(&c, afd.error, share, shown, fixes, &names));
        }
    }
    Ok(TypoReport {
        dataset: DatasetInfo::of(relation),
        config: cfg.clone(),
        afds: afds.iter().map(|a| AfdView::new(a, &names)).collect(),
        clusters,
    })
}

fn partition_name(relation: &Relation, index: usize) -> String {
    if relation.name().is_empty() {
        format!("partition-{}", index + 1)
    } else {
        relation.name().to_owned()
    }
}

/// Runs the anomaly workflow over `partitions`. Without a prior `state`
/// the first partition becomes the baseline.
pub fn run_anomaly(
    state: Option<AnomalyState>,
    partitions: &[Relation],
    p: &AnomalyParams,
    exec: &ExecConfig,
) -> Result<(AnomalyState, AnomalyReport)> {
    let cfg = p.config();
    let mut rest = partitions;
    let mut seen: Vec<Relation> = Vec::new();
    let mut state = match state {
        Some(s) => s,
        None => {
            let (first, tail) = partitions.split_first().ok_or(Error::EmptyInput)?;
            rest = tail;
            seen.push(first.clone());
            AnomalyState::new(partition_name(first, 0), discover_fds(first, p.max_lhs, exec)?)
        }
    };
    let offset = partitions.len() - rest.len();
    let mut views = Vec::with_capacity(rest.len());
    for (i, relation) in rest.iter().enumerate() {
        let name = partition_name(relation, offset + i);
        seen.push(relation.clone());
        let target = if p.cumulative {
            Relation::concat(&seen)?
        } else {
            relation.clone()
        };
        let analysis = analyze_partition(&state.canonical_fds, name.clone(), &target, &cfg, exec)?;
        views.push(PartitionView::new(&analysis, target.row_count(), p.accept));
        state = if p.accept {
            let mfds = analysis.lost.iter().filter_map(|l| l.mfd.clone()).collect();
            advance_canonical(&state, name, analysis.fds, mfds)?
        } else {
            record_rejection(&state, name, analysis.fds)?
        };
    }
    let report = AnomalyReport::new(&state, views);
    Ok((state, report))
}

/// Runs a task to completion. `datasets` holds the input relation, or the
/// ordered partitions for the anomaly scenario.
pub fn execute(kind: TaskKind, raw: &Json, datasets: &[Relation], exec: &ExecConfig) -> Result<Report> {
    let refs: Vec<&Relation> = datasets.iter().collect();
    let params = validate(kind, raw, &refs).map_err(Error::InvalidParameters)?;
    if let TaskParams::Anomaly(p) = &params {
        return Ok(Report::ScenarioAnomaly(run_anomaly(None, datasets, p, exec)?.1));
    }
    let relation = datasets.first().ok_or(Error::EmptyInput)?;
    Ok(match params {
        TaskParams::Fd(p) => {
            let set = discover_fds(relation, p.max_lhs, exec)?;
            Report::FdDiscovery(FdReport::new(relation, p.max_lhs, &set))
        }
        TaskParams::Afd(p) => {
            let afds = discover_afds(relation, p.threshold, p.max_lhs, exec)?;
            Report::AfdDiscovery(AfdReport::new(relation, p.threshold, p.max_lhs, &afds))
        }
        TaskParams::Mfd(p) => {
            let stmt = mfd_statement(&p, relation)?;
            let verdict = validate_mfd(relation, &stmt, exec)?;
            Report::MfdValidation(MfdReport::new(relation, &stmt, &verdict))
        }
        TaskParams::Typo(cfg) => Report::ScenarioTypo(typo_scan(relation, &cfg, exec)?),
        TaskParams::Dedup(p) => Report::ScenarioDedup(dedup_scan(relation, &p, exec)?),
        TaskParams::Anomaly(_) => unreachable!("handled above"),
    })
}
