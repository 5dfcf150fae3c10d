//! Typo detection: mine almost-holding dependencies, explain their violations
//! cluster by cluster and suggest repairs toward each cluster's modal value.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::afd::{discover_afds, Afd};
use crate::error::{Error, FieldError, Result};
use crate::exec::ExecConfig;
use crate::fd::Fd;
use crate::mfd::{distance, Metric};
use crate::pli::partition_of;
use crate::ratio::Ratio;
use crate::relation::{Relation, Value, NULL_ID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypoConfig {
    pub threshold: Ratio,
    pub radius: f64,
    pub ratio: f64,
    pub max_lhs: usize,
    /// Show clusters whose inside-radius share is *at least* `ratio`.
    pub invert_display: bool,
}

impl Default for TypoConfig {
    fn default() -> Self {
        TypoConfig {
            threshold: Ratio::new(1, 20),
            radius: 2.0,
            ratio: 0.5,
            max_lhs: 2,
            invert_display: false,
        }
    }
}

impl TypoConfig {
    pub fn check(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.radius.is_nan() || self.radius < 0.0 {
            errors.push(("radius", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            errors.push(("ratio", "must lie in [0, 1]"));
        }
        if self.max_lhs == 0 {
            errors.push(("max_lhs", "must be at least 1"));
        }
        match errors.as_slice() {
            [] => Ok(()),
            [(field, reason)] => Err(Error::invalid(*field, *reason)),
            _ => Err(Error::InvalidParameters(
                errors
                    .into_iter()
                    .map(|(field, reason)| FieldError {
                        field: field.into(),
                        reason: reason.into(),
                    })
                    .collect(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Central {
    pub value: Value,
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub row: u32,
    pub value: Value,
    /// Distance to the central value; `None` when either side is null.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationCluster {
    pub fd: Fd,
    pub lhs_value: Vec<Value>,
    pub rows: Vec<u32>,
    pub central: Central,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixSuggestion {
    pub row: u32,
    pub current: Value,
    pub suggested: Value,
}

/// Almost-holding dependencies: minimal AFDs with `0 < g1 ≤ threshold`.
pub fn mine_almost_fds(relation: &Relation, cfg: &TypoConfig, exec: &ExecConfig) -> Result<Vec<Afd>> {
    cfg.check()?;
    let afds = discover_afds(relation, cfg.threshold, cfg.max_lhs, exec)?;
    Ok(afds.into_iter().filter(|a| !a.error.is_zero()).collect())
}

/// One cluster per class of π_lhs holding at least two distinct rhs values.
/// The central value is the most frequent one, ties going to the value that
/// occurs first.
pub fn violation_clusters(relation: &Relation, fd: &Fd) -> Result<Vec<ViolationCluster>> {
    fd.check(relation)?;
    let metric = Metric::for_type(relation.attribute(fd.rhs).inferred_type);
    let pli = partition_of(relation, fd.lhs);
    let mut out = Vec::new();
    for rows in pli.clusters() {
        // (code -> (count, first position))
        let mut freq: HashMap<u32, (usize, usize)> = HashMap::new();
        let mut nulls = 0;
        for (pos, &r) in rows.iter().enumerate() {
            let code = relation.code(r as usize, fd.rhs);
            nulls += usize::from(code == NULL_ID);
            freq.entry(code).or_insert((0, pos)).0 += 1;
        }
        let violates = freq.len() >= 2 || (relation.nulls_distinct() && nulls >= 2);
        if !violates {
            continue;
        }
        let (&central_code, &(frequency, _)) = freq
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .expect("non-empty cluster");
        let central_value = relation.decode(fd.rhs, central_code).clone();
        let members = rows
            .iter()
            .map(|&r| {
                let value = relation.value(r as usize, fd.rhs).clone();
                let distance = distance(&central_value, &value, metric).ok();
                Member {
                    row: r,
                    value,
                    distance,
                }
            })
            .collect();
        let first = rows[0] as usize;
        out.push(ViolationCluster {
            fd: *fd,
            lhs_value: fd.lhs.iter().map(|a| relation.value(first, a).clone()).collect(),
            rows: rows.clone(),
            central: Central {
                value: central_value,
                frequency,
            },
            members,
        });
    }
    Ok(out)
}

/// Share of members within `radius` of the central value.
pub fn inside_share(cluster: &ViolationCluster, radius: f64) -> f64 {
    let inside = cluster
        .members
        .iter()
        .filter(|m| m.distance.is_some_and(|d| d <= radius))
        .count();
    inside as f64 / cluster.members.len() as f64
}

/// A cluster is shown when its inside-radius share is below `ratio`, or not
/// below it when `invert_display` is set.
pub fn is_displayed(cluster: &ViolationCluster, cfg: &TypoConfig) -> bool {
    let below = inside_share(cluster, cfg.radius) < cfg.ratio;
    below != cfg.invert_display
}

pub fn filter_clusters<'a>(clusters: &'a [ViolationCluster], cfg: &TypoConfig) -> Vec<&'a ViolationCluster> {
    clusters.iter().filter(|c| is_displayed(c, cfg)).collect()
}

/// Replace every non-central member within `radius` by the central value.
pub fn propose_fixes(cluster: &ViolationCluster, radius: f64) -> Vec<FixSuggestion> {
    cluster
        .members
        .iter()
        .filter(|m| m.value != cluster.central.value)
        .filter(|m| m.distance.is_some_and(|d| d > 0.0 && d <= radius))
        .map(|m| FixSuggestion {
            row: m.row,
            current: m.value.clone(),
            suggested: cluster.central.value.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs::AttrSet;
    use crate::relation::{load_csv, CsvConfig};

    fn rel(text: &str) -> Relation {
        load_csv(text.as_bytes(), &CsvConfig::default()).unwrap()
    }

    fn blue() -> Relation {
        rel("k,color\n1,blue\n1,blue\n1,bluee\n2,red")
    }

    fn cluster_with(distances: &[f64]) -> ViolationCluster {
        ViolationCluster {
            fd: Fd::new(AttrSet::single(0), 1),
            lhs_value: vec![Value::Integer(1)],
            rows: (0..distances.len() as u32).collect(),
            central: Central {
                value: Value::String("c".into()),
                frequency: 1,
            },
            members: distances
                .iter()
                .enumerate()
                .map(|(i, &d)| Member {
                    row: i as u32,
                    value: Value::String(if d == 0.0 { "c".into() } else { format!("v{i}") }),
                    distance: Some(d),
                })
                .collect(),
        }
    }

    fn cfg(radius: f64, ratio: f64) -> TypoConfig {
        TypoConfig {
            radius,
            ratio,
            ..TypoConfig::default()
        }
    }

    #[test]
    fn clusters_find_the_modal_value() {
        let fd = Fd::new(AttrSet::single(0), 1);
        let clusters = violation_clusters(&blue(), &fd).unwrap();
        assert_eq!(clusters.len(), 1);
        let c = &clusters[0];
        assert_eq!(c.central, Central { value: Value::String("blue".into()), frequency: 2 });
        let d: Vec<Option<f64>> = c.members.iter().map(|m| m.distance).collect();
        assert_eq!(d, vec![Some(0.0), Some(0.0), Some(1.0)]);
        assert_eq!(c.lhs_value, vec![Value::Integer(1)]);
    }

    #[test]
    fn holding_or_unique_lhs_gives_no_clusters() {
        let r = rel("k,v\n1,a\n1,a\n2,b");
        assert!(violation_clusters(&r, &Fd::new(AttrSet::single(0), 1)).unwrap().is_empty());
        let r = rel("k,v\n1,a\n2,a\n3,b");
        assert!(violation_clusters(&r, &Fd::new(AttrSet::single(0), 1)).unwrap().is_empty());
    }

    #[test]
    fn central_tie_goes_to_first_occurrence() {
        let r = rel("k,v\n1,b\n1,a\n1,a\n1,b");
        let c = &violation_clusters(&r, &Fd::new(AttrSet::single(0), 1)).unwrap()[0];
        assert_eq!(c.central.value, Value::String("b".into()));
    }

    #[test]
    fn display_predicate() {
        assert!(is_displayed(&cluster_with(&[0.0, 0.0, 1.0, 7.0]), &cfg(2.0, 0.8)));
        assert!(!is_displayed(&cluster_with(&[0.0, 0.0, 0.0]), &cfg(5.0, 0.5)));
        let c = cluster_with(&[0.0, 9.0]);
        assert!(is_displayed(&c, &cfg(2.0, 1.0)));
        assert!(!is_displayed(&cluster_with(&[0.0, 1.0]), &cfg(2.0, 1.0)));
        let inverted = TypoConfig {
            invert_display: true,
            ..cfg(2.0, 0.8)
        };
        assert!(!is_displayed(&cluster_with(&[0.0, 0.0, 1.0, 7.0]), &inverted));
    }

    #[test]
    fn zero_ratio_or_infinite_radius_hides_everything() {
        let clusters = vec![cluster_with(&[0.0, 3.0]), cluster_with(&[0.0, 1.0, 50.0])];
        assert!(filter_clusters(&clusters, &cfg(2.0, 0.0)).is_empty());
        assert!(filter_clusters(&clusters, &cfg(f64::INFINITY, 1.0)).is_empty());
    }

    #[test]
    fn fixes_stay_within_radius() {
        let r = rel("k,color\n1,blue\n1,blue\n1,bluee\n1,red\n2,x");
        let c = &violation_clusters(&r, &Fd::new(AttrSet::single(0), 1)).unwrap()[0];
        let fixes = propose_fixes(c, 2.0);
        assert_eq!(
            fixes,
            vec![FixSuggestion {
                row: 2,
                current: Value::String("bluee".into()),
                suggested: Value::String("blue".into()),
            }]
        );
    }

    #[test]
    fn mining_excludes_exact_dependencies() {
        let r = rel("k,v\n1,a\n1,a\n1,b\n2,c\n2,c\n3,d");
        let none = TypoConfig {
            threshold: Ratio::ZERO,
            ..TypoConfig::default()
        };
        assert!(mine_almost_fds(&r, &none, &ExecConfig::default()).unwrap().is_empty());
        let some = TypoConfig {
            threshold: Ratio::new(1, 2),
            ..TypoConfig::default()
        };
        let afds = mine_almost_fds(&r, &some, &ExecConfig::default()).unwrap();
        assert!(afds.iter().any(|a| a.fd == Fd::new(AttrSet::single(0), 1)));
        assert!(afds.iter().all(|a| !a.error.is_zero()));
    }
}
