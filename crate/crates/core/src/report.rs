//! JSON result documents shared by the command line and the task service,
//! plus their plain-text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::afd::Afd;
use crate::fd::{Fd, FdSet};
use crate::mfd::{Metric, MfdStatement, MfdVerdict};
use crate::ratio::Ratio;
use crate::relation::{Relation, Value};
use crate::scenario::anomaly::{AnomalyState, PartitionAnalysis};
use crate::scenario::dedup::{DedupConfig, DuplicatePair, KeyCandidate, Resolution};
use crate::scenario::typo::{FixSuggestion, TypoConfig, ViolationCluster};
use crate::task::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub rows: usize,
    pub attributes: Vec<String>,
}

impl DatasetInfo {
    pub fn of(relation: &Relation) -> Self {
        DatasetInfo {
            name: relation.name().to_owned(),
            rows: relation.row_count(),
            attributes: relation.attribute_names(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FdView {
    pub lhs: Vec<usize>,
    pub lhs_names: Vec<String>,
    pub rhs: usize,
    pub rhs_name: String,
    pub lhs_size: usize,
    pub text: String,
}

impl FdView {
    pub fn new(fd: &Fd, names: &[String]) -> Self {
        FdView {
            lhs: fd.lhs.to_vec(),
            lhs_names: fd.lhs.iter().map(|a| names[a].clone()).collect(),
            rhs: fd.rhs,
            rhs_name: names[fd.rhs].clone(),
            lhs_size: fd.lhs.len(),
            text: fd.render(names),
        }
    }

    pub fn fd(&self) -> Fd {
        Fd::new(self.lhs.iter().copied().collect(), self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AfdView {
    #[serde(flatten)]
    pub fd: FdView,
    pub error: Ratio,
}

impl AfdView {
    pub fn new(afd: &Afd, names: &[String]) -> Self {
        AfdView {
            fd: FdView::new(&afd.fd, names),
            error: afd.error,
        }
    }
}

fn fd_views(set: &FdSet) -> Vec<FdView> {
    set.fds().iter().map(|f| FdView::new(f, &set.schema)).collect()
}

fn list(names: &[String], attrs: impl IntoIterator<Item = usize>) -> String {
    let parts: Vec<&str> = attrs.into_iter().map(|a| names[a].as_str()).collect();
    format!("[{}]", parts.join(", "))
}

fn tuple(values: &[Value]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(", "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub dataset: DatasetInfo,
    pub max_lhs: usize,
    pub fds: Vec<FdView>,
}

impl FdReport {
    pub fn new(relation: &Relation, max_lhs: usize, set: &FdSet) -> Self {
        FdReport {
            dataset: DatasetInfo::of(relation),
            max_lhs,
            fds: fd_views(set),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfdReport {
    pub dataset: DatasetInfo,
    pub threshold: Ratio,
    pub max_lhs: usize,
    pub afds: Vec<AfdView>,
}

impl AfdReport {
    pub fn new(relation: &Relation, threshold: Ratio, max_lhs: usize, afds: &[Afd]) -> Self {
        let names = relation.attribute_names();
        AfdReport {
            dataset: DatasetInfo::of(relation),
            threshold,
            max_lhs,
            afds: afds.iter().map(|a| AfdView::new(a, &names)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdView {
    pub lhs: Vec<usize>,
    pub lhs_names: Vec<String>,
    pub rhs: Vec<usize>,
    pub rhs_names: Vec<String>,
    pub metric: Metric,
    pub p: f64,
    pub text: String,
}

impl MfdView {
    pub fn new(stmt: &MfdStatement, names: &[String]) -> Self {
        MfdView {
            lhs: stmt.lhs.to_vec(),
            lhs_names: stmt.lhs.iter().map(|a| names[a].clone()).collect(),
            rhs: stmt.rhs.clone(),
            rhs_names: stmt.rhs.iter().map(|&a| names[a].clone()).collect(),
            metric: stmt.metric,
            p: stmt.p,
            text: format!(
                "{} -> {} ({}, p = {})",
                list(names, stmt.lhs.iter()),
                list(names, stmt.rhs.iter().copied()),
                stmt.metric,
                stmt.p
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdClusterView {
    pub lhs_value: Vec<Value>,
    pub rows: Vec<u32>,
    pub size: usize,
    pub diameter: Option<f64>,
    pub witness: Option<(u32, u32)>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdReport {
    pub dataset: DatasetInfo,
    pub statement: MfdView,
    pub holds: bool,
    pub global_diameter: Option<f64>,
    pub clusters: Vec<MfdClusterView>,
}

impl MfdReport {
    pub fn new(relation: &Relation, stmt: &MfdStatement, verdict: &MfdVerdict) -> Self {
        let names = relation.attribute_names();
        let clusters = verdict
            .violating_clusters
            .iter()
            .map(|c| {
                let first = relation.position_of(c.rows[0]).unwrap_or(c.rows[0] as usize);
                let lhs_value: Vec<Value> = stmt.lhs.iter().map(|a| relation.value(first, a).clone()).collect();
                let diameter = c.diameter.map_or_else(|| "undefined".to_owned(), |d| d.to_string());
                MfdClusterView {
                    text: format!("{} diameter {}", tuple(&lhs_value), diameter),
                    lhs_value,
                    rows: c.rows.clone(),
                    size: c.rows.len(),
                    diameter: c.diameter,
                    witness: c.witness,
                }
            })
            .collect();
        MfdReport {
            dataset: DatasetInfo::of(relation),
            statement: MfdView::new(stmt, &names),
            holds: verdict.holds,
            global_diameter: verdict.global_diameter,
            clusters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberView {
    pub row: u32,
    pub value: Value,
    pub distance: Option<f64>,
    pub is_central: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypoClusterView {
    pub fd: FdView,
    pub error: Ratio,
    pub lhs_value: Vec<Value>,
    pub rows: Vec<u32>,
    pub size: usize,
    pub central: Value,
    pub central_frequency: usize,
    pub inside_share: f64,
    pub displayed: bool,
    pub members: Vec<MemberView>,
    pub fixes: Vec<FixSuggestion>,
    pub text: String,
}

impl TypoClusterView {
    pub fn new(
        cluster: &ViolationCluster,
        error: Ratio,
        inside_share: f64,
        displayed: bool,
        fixes: Vec<FixSuggestion>,
        names: &[String],
    ) -> Self {
        let fd = FdView::new(&cluster.fd, names);
        TypoClusterView {
            text: format!("{} @ {}", fd.text, tuple(&cluster.lhs_value)),
            fd,
            error,
            lhs_value: cluster.lhs_value.clone(),
            rows: cluster.rows.clone(),
            size: cluster.rows.len(),
            central: cluster.central.value.clone(),
            central_frequency: cluster.central.frequency,
            inside_share,
            displayed,
            members: cluster
                .members
                .iter()
                .map(|m| MemberView {
                    row: m.row,
                    value: m.value.clone(),
                    distance: m.distance,
                    is_central: m.value == cluster.central.value,
                })
                .collect(),
            fixes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypoReport {
    pub dataset: DatasetInfo,
    pub config: TypoConfig,
    pub afds: Vec<AfdView>,
    pub clusters: Vec<TypoClusterView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyView {
    pub lhs: usize,
    pub lhs_name: String,
    pub rhs_list: Vec<usize>,
    pub rhs_names: Vec<String>,
    pub rhs_count: usize,
    pub is_unique: bool,
}

impl KeyView {
    pub fn new(c: &KeyCandidate, names: &[String]) -> Self {
        KeyView {
            lhs: c.lhs,
            lhs_name: names[c.lhs].clone(),
            rhs_list: c.rhs_list.clone(),
            rhs_names: c.rhs_list.iter().map(|&a| names[a].clone()).collect(),
            rhs_count: c.rhs_count,
            is_unique: c.is_unique,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairView {
    pub row_a: u32,
    pub row_b: u32,
    pub matched_attrs: Vec<usize>,
    pub matched_names: Vec<String>,
    pub match_count: usize,
    pub text: String,
}

impl PairView {
    pub fn new(p: &DuplicatePair, names: &[String]) -> Self {
        PairView {
            row_a: p.row_a,
            row_b: p.row_b,
            matched_attrs: p.matched_attrs.clone(),
            matched_names: p.matched_attrs.iter().map(|&a| names[a].clone()).collect(),
            match_count: p.match_count,
            text: format!(
                "{} ~ {} on {}",
                p.row_a,
                p.row_b,
                list(names, p.matched_attrs.iter().copied())
            ),
        }
    }

    pub fn pair(&self) -> DuplicatePair {
        DuplicatePair {
            row_a: self.row_a,
            row_b: self.row_b,
            matched_attrs: self.matched_attrs.clone(),
            match_count: self.match_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupOutcome {
    pub journal: Vec<Resolution>,
    pub skipped: Vec<(u32, u32)>,
    pub remaining_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub dataset: DatasetInfo,
    pub config: DedupConfig,
    pub candidates: Vec<KeyView>,
    pub key: Option<KeyView>,
    pub pairs: Vec<PairView>,
    /// Present once the pairs have been resolved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<DedupOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LostView {
    pub partition: String,
    pub fd: FdView,
    pub g1: Ratio,
    pub first_holding: Option<Ratio>,
    pub sweep_p: Option<f64>,
    pub diagnostic: Option<String>,
    pub mfd: Option<MfdView>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionView {
    pub partition: String,
    pub rows: usize,
    pub fd_count: usize,
    pub gained: Vec<FdView>,
    pub lost: Vec<LostView>,
    pub accepted: bool,
}

impl PartitionView {
    pub fn new(analysis: &PartitionAnalysis, rows: usize, accepted: bool) -> Self {
        let names = &analysis.fds.schema;
        let lost = analysis
            .lost
            .iter()
            .map(|l| {
                let fd = FdView::new(&l.fd, names);
                LostView {
                    partition: analysis.partition.clone(),
                    text: format!("{}: {}", analysis.partition, fd.text),
                    fd,
                    g1: l.probe.g1,
                    first_holding: l.probe.first_holding,
                    sweep_p: l.sweep.found.as_ref().map(|h| h.p),
                    diagnostic: l.sweep.diagnostic.clone(),
                    mfd: l.mfd.as_ref().map(|m| MfdView::new(m, names)),
                }
            })
            .collect();
        PartitionView {
            partition: analysis.partition.clone(),
            rows,
            fd_count: analysis.fds.len(),
            gained: analysis.diff.gained.iter().map(|f| FdView::new(f, names)).collect(),
            lost,
            accepted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub attributes: Vec<String>,
    pub baseline: String,
    pub partitions: Vec<PartitionView>,
    pub canonical: Vec<FdView>,
    pub canonical_mfds: Vec<MfdView>,
}

impl AnomalyReport {
    pub fn new(state: &AnomalyState, partitions: Vec<PartitionView>) -> Self {
        let names = &state.canonical_fds.schema;
        AnomalyReport {
            attributes: names.clone(),
            baseline: state.history.first().map(|h| h.partition.clone()).unwrap_or_default(),
            partitions,
            canonical: fd_views(&state.canonical_fds),
            canonical_mfds: state.canonical_mfds.iter().map(|m| MfdView::new(m, names)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    FdDiscovery(FdReport),
    AfdDiscovery(AfdReport),
    MfdValidation(MfdReport),
    ScenarioTypo(TypoReport),
    ScenarioDedup(DedupReport),
    ScenarioAnomaly(AnomalyReport),
}

fn values<T: Serialize>(items: &[T]) -> Vec<serde_json::Value> {
    items
        .iter()
        .map(|i| serde_json::to_value(i).expect("report items serialize"))
        .collect()
}

impl Report {
    pub fn kind(&self) -> TaskKind {
        match self {
            Report::FdDiscovery(_) => TaskKind::FdDiscovery,
            Report::AfdDiscovery(_) => TaskKind::AfdDiscovery,
            Report::MfdValidation(_) => TaskKind::MfdValidation,
            Report::ScenarioTypo(_) => TaskKind::ScenarioTypo,
            Report::ScenarioDedup(_) => TaskKind::ScenarioDedup,
            Report::ScenarioAnomaly(_) => TaskKind::ScenarioAnomaly,
        }
    }

    /// The browsable instances of the report. Every element carries a `text`
    /// field, the target of regex filtering.
    pub fn instances(&self) -> Vec<serde_json::Value> {
        match self {
            Report::FdDiscovery(r) => values(&r.fds),
            Report::AfdDiscovery(r) => values(&r.afds),
            Report::MfdValidation(r) => values(&r.clusters),
            Report::ScenarioTypo(r) => values(&r.clusters),
            Report::ScenarioDedup(r) => values(&r.pairs),
            Report::ScenarioAnomaly(r) => {
                let lost: Vec<&LostView> = r.partitions.iter().flat_map(|p| &p.lost).collect();
                values(&lost)
            }
        }
    }

    /// False only for a metric dependency that does not hold.
    pub fn passed(&self) -> bool {
        !matches!(self, Report::MfdValidation(r) if !r.holds)
    }

    /// Pretty-printed JSON with a trailing newline. Identical reports give
    /// identical bytes.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("reports serialize");
        out.push(b'\n');
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        match self {
            Report::FdDiscovery(r) => render_fds(&mut s, r),
            Report::AfdDiscovery(r) => render_afds(&mut s, r),
            Report::MfdValidation(r) => render_mfd(&mut s, r),
            Report::ScenarioTypo(r) => render_typo(&mut s, r),
            Report::ScenarioDedup(r) => render_dedup(&mut s, r),
            Report::ScenarioAnomaly(r) => render_anomaly(&mut s, r),
        }
        s
    }
}

const NOTHING: &str = "no dependencies found";

fn header(s: &mut String, d: &DatasetInfo) {
    let name = if d.name.is_empty() { "<input>" } else { &d.name };
    let _ = writeln!(s, "dataset {name}: {} rows, {} attributes", d.rows, d.attributes.len());
}

fn render_fds(s: &mut String, r: &FdReport) {
    header(s, &r.dataset);
    if r.fds.is_empty() {
        let _ = writeln!(s, "{NOTHING}");
        return;
    }
    let _ = writeln!(s, "{} functional dependencies (max lhs {}):", r.fds.len(), r.max_lhs);
    for f in &r.fds {
        let _ = writeln!(s, "  {}", f.text);
    }
}

fn render_afds(s: &mut String, r: &AfdReport) {
    header(s, &r.dataset);
    if r.afds.is_empty() {
        let _ = writeln!(s, "{NOTHING}");
        return;
    }
    let _ = writeln!(
        s,
        "{} approximate dependencies (g1 <= {}, max lhs {}):",
        r.afds.len(),
        r.threshold,
        r.max_lhs
    );
    let width = r.afds.iter().map(|a| a.fd.text.len()).max().unwrap_or(0);
    for a in &r.afds {
        let _ = writeln!(s, "  {:width$}  g1 = {} ({:.6})", a.fd.text, a.error, a.error.to_f64());
    }
}

fn render_mfd(s: &mut String, r: &MfdReport) {
    header(s, &r.dataset);
    let verdict = if r.holds { "HOLDS" } else { "VIOLATED" };
    let _ = writeln!(s, "{}: {verdict}", r.statement.text);
    match r.global_diameter {
        Some(d) => {
            let _ = writeln!(s, "largest class diameter: {d}");
        }
        None => {
            let _ = writeln!(s, "largest class diameter: undefined (nulls on the right-hand side)");
        }
    }
    for c in &r.clusters {
        let witness = c.witness.map(|(a, b)| format!(", witness rows {a} and {b}")).unwrap_or_default();
        let _ = writeln!(s, "  class {} of {} rows{witness}", c.text, c.size);
    }
}

fn render_typo(s: &mut String, r: &TypoReport) {
    header(s, &r.dataset);
    if r.afds.is_empty() {
        let _ = writeln!(s, "{NOTHING}");
        return;
    }
    let _ = writeln!(s, "{} almost-holding dependencies (g1 <= {}):", r.afds.len(), r.config.threshold);
    for a in &r.afds {
        let _ = writeln!(s, "  {}  g1 = {}", a.fd.text, a.error);
    }
    let shown: Vec<&TypoClusterView> = r.clusters.iter().filter(|c| c.displayed).collect();
    let _ = writeln!(
        s,
        "{} of {} violation clusters shown (radius {}, ratio {}):",
        shown.len(),
        r.clusters.len(),
        r.config.radius,
        r.config.ratio
    );
    for c in shown {
        let _ = writeln!(s, "  {}  inside share {:.3}", c.text, c.inside_share);
        let mut seen: Vec<&Value> = Vec::new();
        for m in &c.members {
            if seen.contains(&&m.value) {
                continue;
            }
            seen.push(&m.value);
            let count = c.members.iter().filter(|o| o.value == m.value).count();
            let mark = if m.is_central { "*" } else { " " };
            let dist = m.distance.map_or_else(|| "-".to_owned(), |d| d.to_string());
            let _ = writeln!(s, "   {mark} {:<24} x{count:<4} distance {dist}", m.value.to_string());
        }
        for f in &c.fixes {
            let _ = writeln!(s, "     fix row {}: {} -> {}", f.row, f.current, f.suggested);
        }
    }
}

fn render_dedup(s: &mut String, r: &DedupReport) {
    header(s, &r.dataset);
    match &r.key {
        Some(k) => {
            let _ = writeln!(
                s,
                "sort key: {} then [{}]{}",
                k.lhs_name,
                k.rhs_names.join(", "),
                if k.is_unique { " (unique)" } else { "" }
            );
        }
        None => {
            let _ = writeln!(s, "no key candidate; rows kept in input order");
        }
    }
    let _ = writeln!(s, "{} candidate pairs (window {}, k {}):", r.pairs.len(), r.config.window, r.config.k);
    for p in &r.pairs {
        let _ = writeln!(s, "  {}", p.text);
    }
    if let Some(o) = &r.outcome {
        let _ = writeln!(
            s,
            "{} merged, {} skipped, {} rows remain",
            o.journal.len(),
            o.skipped.len(),
            o.remaining_rows
        );
        for res in &o.journal {
            let _ = writeln!(s, "  keep {} drop {}", res.keep, res.discard());
        }
    }
}

fn render_anomaly(s: &mut String, r: &AnomalyReport) {
    let _ = writeln!(s, "baseline {}", r.baseline);
    for p in &r.partitions {
        let status = if p.accepted { "accepted" } else { "not accepted" };
        let _ = writeln!(
            s,
            "partition {}: {} rows, {} dependencies, {} lost, {} gained ({status})",
            p.partition,
            p.rows,
            p.fd_count,
            p.lost.len(),
            p.gained.len()
        );
        for l in &p.lost {
            let _ = writeln!(s, "  lost {}  g1 = {}", l.fd.text, l.g1);
            if let Some(t) = l.first_holding {
                let _ = writeln!(s, "    holds approximately at threshold {t}");
            }
            match (&l.mfd, &l.diagnostic) {
                (Some(m), _) => {
                    let _ = writeln!(s, "    metric dependency: {}", m.text);
                }
                (None, Some(d)) => {
                    let _ = writeln!(s, "    no metric dependency: {d}");
                }
                (None, None) => {}
            }
        }
        for g in &p.gained {
            let _ = writeln!(s, "  gained {}", g.text);
        }
    }
    if r.canonical.is_empty() {
        let _ = writeln!(s, "canonical set: {NOTHING}");
    } else {
        let _ = writeln!(s, "canonical set ({}):", r.canonical.len());
        for f in &r.canonical {
            let _ = writeln!(s, "  {}", f.text);
        }
    }
    for m in &r.canonical_mfds {
        let _ = writeln!(s, "  {}", m.text);
    }
}
