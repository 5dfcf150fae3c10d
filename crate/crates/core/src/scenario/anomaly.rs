//! Mine-explore-validate over arriving data partitions.
//!
//! Each partition is mined for exact dependencies and diffed against the
//! canonical set. Every lost dependency is probed as an AFD over a list of
//! thresholds and then relaxed into a metric dependency by sweeping the
//! distance threshold over a grid. Accepting a partition replaces the
//! canonical set; that step is always requested explicitly by the caller.

use serde::{Deserialize, Serialize};

use crate::afd::g1_error;
use crate::error::{Error, Result};
use crate::exec::ExecConfig;
use crate::fd::{discover_fds, Fd, FdSet};
use crate::mfd::{cluster_diameters, verdict_from, Metric, MfdStatement, MfdVerdict};
use crate::ratio::Ratio;
use crate::relation::Relation;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FdDiff {
    pub lost: Vec<Fd>,
    pub gained: Vec<Fd>,
}

/// `lost = old \ new`, `gained = new \ old`, both in canonical order.
pub fn fd_diff(old: &FdSet, new: &FdSet) -> Result<FdDiff> {
    if old.schema != new.schema {
        return Err(Error::SchemaMismatch);
    }
    Ok(FdDiff {
        lost: old.fds().iter().filter(|f| !new.contains(f)).copied().collect(),
        gained: new.fds().iter().filter(|f| !old.contains(f)).copied().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AfdProbe {
    pub g1: Ratio,
    /// Smallest listed threshold the dependency stays within, if any.
    pub first_holding: Option<Ratio>,
}

pub fn afd_probe(relation: &Relation, fd: &Fd, thresholds: &[Ratio]) -> Result<AfdProbe> {
    fd.check(relation)?;
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("thresholds", "must be ascending"));
    }
    let g1 = g1_error(relation, fd);
    Ok(AfdProbe {
        g1,
        first_holding: thresholds.iter().copied().find(|&t| t >= g1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Largest threshold tried.
    pub d: f64,
    pub step: f64,
    pub metric: Metric,
}

impl SweepConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("step", "must be positive"));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::invalid("d", "must be positive"));
        }
        if self.step > self.d {
            return Err(Error::invalid("step", "must not exceed d"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepHit {
    pub p: f64,
    pub verdict: MfdVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub found: Option<SweepHit>,
    pub diagnostic: Option<String>,
}

/// Smallest grid point `p ∈ {step, 2·step, …} ∩ (0, d]` at which
/// `lhs -> rhs` holds as a metric dependency.
///
/// Every class diameter is computed once; since the verdict is monotone in
/// `p`, the first holding grid point is `step · max(1, ⌈diameter / step⌉)`.
pub fn mfd_sweep(relation: &Relation, fd: &Fd, cfg: &SweepConfig, exec: &ExecConfig) -> Result<SweepOutcome> {
    cfg.check()?;
    let stmt = MfdStatement {
        lhs: fd.lhs,
        rhs: vec![fd.rhs],
        metric: cfg.metric,
        p: 0.0,
    };
    stmt.check(relation)?;
    let diameters = cluster_diameters(relation, fd.lhs, &stmt.rhs, cfg.metric, exec);
    let probe = verdict_from(diameters, f64::INFINITY);
    let Some(diameter) = probe.global_diameter else {
        let nulls = probe.violating_clusters.len();
        return Ok(SweepOutcome {
            found: None,
            diagnostic: Some(format!(
                "{nulls} cluster(s) hold nulls on the right-hand side; distances are undefined"
            )),
        });
    };
    let mut k = ((diameter / cfg.step).ceil() as u64).max(1);
    while k > 1 && (k - 1) as f64 * cfg.step >= diameter {
        k -= 1;
    }
    while (k as f64) * cfg.step < diameter {
        k += 1;
    }
    let p = k as f64 * cfg.step;
    if p > cfg.d * (1.0 + 1e-12) {
        return Ok(SweepOutcome {
            found: None,
            diagnostic: Some(format!(
                "largest class diameter {diameter} exceeds the sweep bound {}",
                cfg.d
            )),
        });
    }
    let diameters = cluster_diameters(relation, fd.lhs, &stmt.rhs, cfg.metric, exec);
    Ok(SweepOutcome {
        found: Some(SweepHit {
            p,
            verdict: verdict_from(diameters, p),
        }),
        diagnostic: None,
    })
}

/// Population standard deviation of the non-null values of a numeric column.
pub fn suggest_sweep_bound(relation: &Relation, rhs: usize) -> Result<f64> {
    relation.check_attribute(rhs)?;
    let attr = relation.attribute(rhs);
    if !attr.inferred_type.is_numeric() {
        return Err(Error::MetricMismatch {
            metric: Metric::Euclidean.to_string(),
            attribute: attr.name.clone(),
            found: attr.inferred_type.to_string(),
        });
    }
    let values: Vec<f64> = (0..relation.row_count())
        .filter_map(|r| relation.value(r, rhs).as_f64())
        .collect();
    if values.is_empty() {
        return Ok(0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub partition: String,
    pub fds: FdSet,
    /// Difference against the canonical set in force when the partition arrived.
    pub diff: FdDiff,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyState {
    pub canonical_fds: FdSet,
    pub canonical_mfds: Vec<MfdStatement>,
    pub history: Vec<HistoryEntry>,
}

impl AnomalyState {
    /// The first partition's dependencies become the canonical set.
    pub fn new(partition: impl Into<String>, fds: FdSet) -> Self {
        let diff = FdDiff {
            lost: Vec::new(),
            gained: fds.fds().to_vec(),
        };
        AnomalyState {
            canonical_fds: fds.clone(),
            canonical_mfds: Vec::new(),
            history: vec![HistoryEntry {
                partition: partition.into(),
                fds,
                diff,
                accepted: true,
            }],
        }
    }

    /// Canonical dependencies rebuilt from the accepted diffs alone.
    pub fn replay_canonical(&self) -> Vec<Fd> {
        let mut current: Vec<Fd> = Vec::new();
        for entry in self.history.iter().filter(|e| e.accepted) {
            current.retain(|f| !entry.diff.lost.contains(f));
            current.extend(entry.diff.gained.iter().copied());
            current.sort();
        }
        current
    }
}

/// Accepts a partition: its dependencies become canonical and any confirmed
/// metric dependencies are appended.
pub fn advance_canonical(
    state: &AnomalyState,
    partition: impl Into<String>,
    fds: FdSet,
    accepted_mfds: Vec<MfdStatement>,
) -> Result<AnomalyState> {
    let diff = fd_diff(&state.canonical_fds, &fds)?;
    let mut next = state.clone();
    next.history.push(HistoryEntry {
        partition: partition.into(),
        fds: fds.clone(),
        diff,
        accepted: true,
    });
    next.canonical_fds = fds;
    next.canonical_mfds.extend(accepted_mfds);
    Ok(next)
}

/// Logs a partition the user chose not to accept; the canonical set is kept.
pub fn record_rejection(state: &AnomalyState, partition: impl Into<String>, fds: FdSet) -> Result<AnomalyState> {
    let diff = fd_diff(&state.canonical_fds, &fds)?;
    let mut next = state.clone();
    next.history.push(HistoryEntry {
        partition: partition.into(),
        fds,
        diff,
        accepted: false,
    });
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyConfig {
    pub max_lhs: usize,
    pub thresholds: Vec<Ratio>,
    /// Sweep bound; defaults per dependency to the rhs standard deviation.
    pub d: Option<f64>,
    pub step: f64,
    /// Forces a metric; otherwise chosen from the rhs type.
    pub metric: Option<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LostFdAnalysis {
    pub fd: Fd,
    pub probe: AfdProbe,
    pub sweep: SweepOutcome,
    /// The metric dependency found by the sweep, ready to be accepted.
    pub mfd: Option<MfdStatement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAnalysis {
    pub partition: String,
    pub fds: FdSet,
    pub diff: FdDiff,
    pub lost: Vec<LostFdAnalysis>,
}

/// Mines `relation`, diffs it against `canonical` and explains each loss.
pub fn analyze_partition(
    canonical: &FdSet,
    partition: impl Into<String>,
    relation: &Relation,
    cfg: &AnomalyConfig,
    exec: &ExecConfig,
) -> Result<PartitionAnalysis> {
    let fds = discover_fds(relation, cfg.max_lhs, exec)?;
    let diff = fd_diff(canonical, &fds)?;
    let mut lost = Vec::with_capacity(diff.lost.len());
    for fd in &diff.lost {
        let probe = afd_probe(relation, fd, &cfg.thresholds)?;
        let ty = relation.attribute(fd.rhs).inferred_type;
        let metric = cfg.metric.unwrap_or_else(|| Metric::for_type(ty));
        let bound = match cfg.d {
            Some(d) => Ok(d),
            None if ty.is_numeric() => suggest_sweep_bound(relation, fd.rhs),
            None => Err(Error::invalid("d", "required for string right-hand sides")),
        };
        let sweep = bound
            .and_then(|d| mfd_sweep(relation, fd, &SweepConfig { d, step: cfg.step, metric }, exec))
            .unwrap_or_else(|e| SweepOutcome {
                found: None,
                diagnostic: Some(e.to_string()),
            });
        let mfd = sweep.found.as_ref().map(|hit| MfdStatement {
            lhs: fd.lhs,
            rhs: vec![fd.rhs],
            metric,
            p: hit.p,
        });
        lost.push(LostFdAnalysis {
            fd: *fd,
            probe,
            sweep,
            mfd,
        });
    }
    Ok(PartitionAnalysis {
        partition: partition.into(),
        fds,
        diff,
        lost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs::AttrSet;
    use crate::relation::{load_csv, CsvConfig};

    fn rel(text: &str) -> Relation {
        load_csv(text.as_bytes(), &CsvConfig::default()).unwrap()
    }

    fn fd(lhs: &[usize], rhs: usize) -> Fd {
        Fd::new(lhs.iter().copied().collect(), rhs)
    }

    fn set(fds: Vec<Fd>) -> FdSet {
        FdSet::new("t", vec!["a".into(), "b".into(), "c".into()], fds)
    }

    #[test]
    fn diff_examples() {
        let a = set(vec![fd(&[0], 1)]);
        assert_eq!(fd_diff(&a, &a).unwrap(), FdDiff::default());
        let d = fd_diff(&a, &set(vec![])).unwrap();
        assert_eq!(d.lost, vec![fd(&[0], 1)]);
        let bigger = set(vec![fd(&[0], 1), fd(&[1], 2)]);
        let d = fd_diff(&a, &bigger).unwrap();
        assert!(d.lost.is_empty());
        assert_eq!(d.gained, vec![fd(&[1], 2)]);
        let other = FdSet::new("t", vec!["x".into()], vec![]);
        assert!(matches!(fd_diff(&a, &other), Err(Error::SchemaMismatch)));
    }

    #[test]
    fn probe_examples() {
        let r = rel("a,b\n1,a\n1,b\n2,c");
        let f = fd(&[0], 1);
        let t = |s: &str| s.parse::<Ratio>().unwrap();
        let p = afd_probe(&r, &f, &[t("0.1"), t("0.2")]).unwrap();
        assert_eq!(p.g1, Ratio::new(1, 3));
        assert_eq!(p.first_holding, None);
        let p = afd_probe(&r, &f, &[t("0.1"), t("0.5")]).unwrap();
        assert_eq!(p.first_holding, Some(t("0.5")));
        let exact = rel("a,b\n1,a\n1,a\n2,c");
        let p = afd_probe(&exact, &f, &[t("0.1"), t("0.5")]).unwrap();
        assert_eq!((p.g1, p.first_holding), (Ratio::ZERO, Some(t("0.1"))));
        assert!(afd_probe(&r, &f, &[t("0.5"), t("0.1")]).is_err());
    }

    fn sweep(r: &Relation, d: f64, step: f64) -> SweepOutcome {
        let cfg = SweepConfig {
            d,
            step,
            metric: Metric::Euclidean,
        };
        mfd_sweep(r, &fd(&[0], 1), &cfg, &ExecConfig::default()).unwrap()
    }

    #[test]
    fn sweep_examples() {
        let r = rel("k,v\na,3\na,5\na,9\nb,1");
        let hit = sweep(&r, 10.0, 1.0).found.unwrap();
        assert_eq!(hit.p, 6.0);
        assert!(hit.verdict.holds);
        assert!(sweep(&r, 5.0, 1.0).found.is_none());
        let exact = rel("k,v\na,3\na,3\nb,1");
        assert_eq!(sweep(&exact, 10.0, 2.5).found.unwrap().p, 2.5);
        assert_eq!(sweep(&r, 10.0, 4.0).found.unwrap().p, 8.0);
    }

    #[test]
    fn sweep_reports_nulls() {
        let r = rel("k,v\na,3\na,\nb,1");
        let out = sweep(&r, 10.0, 1.0);
        assert!(out.found.is_none());
        assert!(out.diagnostic.unwrap().contains("null"));
    }

    #[test]
    fn bound_examples() {
        assert_eq!(suggest_sweep_bound(&rel("v\n4\n4\n4"), 0).unwrap(), 0.0);
        assert_eq!(suggest_sweep_bound(&rel("v\n2\n4"), 0).unwrap(), 1.0);
        let s = suggest_sweep_bound(&rel("v\n1\n2\n3\n4\n5"), 0).unwrap();
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
        assert!(suggest_sweep_bound(&rel("v\nx"), 0).is_err());
    }

    #[test]
    fn canonical_revision() {
        let s0 = AnomalyState::new("p1", set(vec![fd(&[0], 1)]));
        let mfd = MfdStatement {
            lhs: AttrSet::single(0),
            rhs: vec![1],
            metric: Metric::Euclidean,
            p: 5.0,
        };
        let s1 = advance_canonical(&s0, "p2", set(vec![fd(&[2], 1)]), vec![]).unwrap();
        assert!(s1.canonical_mfds.is_empty());
        assert_eq!(s1.history.len(), 2);
        let s2 = advance_canonical(&s1, "p3", set(vec![]), vec![mfd.clone()]).unwrap();
        assert_eq!(s2.canonical_mfds.last(), Some(&mfd));
        assert_eq!(s2.history.len(), 3);
        let s3 = record_rejection(&s2, "p4", set(vec![fd(&[0], 2)])).unwrap();
        assert_eq!(s3.canonical_fds, s2.canonical_fds);
        assert_eq!(s3.replay_canonical(), s3.canonical_fds.fds());
        assert_eq!(s1.replay_canonical(), s1.canonical_fds.fds());
    }
}
