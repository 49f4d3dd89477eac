//! Domain types for studies, arms and treatment networks, plus the pooled-SD
//! machinery used to standardize mean differences.
//!
//! All types are immutable after construction and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};

use crate::{Error, Result};

/// One treatment arm of a randomized study: sample size, observed mean
/// (change score or endpoint) and observed standard deviation, all on the
/// study's outcome scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    treatment: String,
    n: u32,
    mean: f64,
    sd: f64,
}

impl Arm {
    /// Requires `n >= 2` and `sd > 0`.
    pub fn new(treatment: impl Into<String>, n: u32, mean: f64, sd: f64) -> Result<Self> {
        let treatment = treatment.into();
        if treatment.is_empty() {
            return Err(Error::InvalidArm {
                treatment,
                reason: "empty treatment identifier".into(),
            });
        }
        if n < 2 {
            return Err(Error::InvalidArm {
                treatment,
                reason: format!("participant count {n} < 2"),
            });
        }
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::InvalidArm {
                treatment,
                reason: format!("standard deviation {sd} must be positive"),
            });
        }
        if !mean.is_finite() {
            return Err(Error::InvalidArm {
                treatment,
                reason: "non-finite mean".into(),
            });
        }
        Ok(Arm {
            treatment,
            n,
            mean,
            sd,
        })
    }

    pub fn treatment(&self) -> &str {
        &self.treatment
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    /// Squared standard error of the arm mean, `sd^2 / n`.
    pub fn se2(&self) -> f64 {
        self.sd * self.sd / self.n as f64
    }
}

/// A randomized study: two or more arms with distinct treatments. The first
/// arm in input order is the study-specific baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    id: String,
    subgroup: String,
    arms: Vec<Arm>,
    high_rob: Option<bool>,
}

impl Study {
    /// Requires at least two arms with pairwise-distinct treatments.
    /// `high_rob` is `None` when the risk-of-bias rating is not recorded.
    pub fn new(
        id: impl Into<String>,
        subgroup: impl Into<String>,
        arms: Vec<Arm>,
        high_rob: Option<bool>,
    ) -> Result<Self> {
        let id = id.into();
        let subgroup = subgroup.into();
        if arms.len() < 2 {
            return Err(Error::InvalidStudy {
                id,
                reason: format!("{} arm(s); at least 2 required", arms.len()),
            });
        }
        let mut seen = BTreeSet::new();
        for arm in &arms {
            if !seen.insert(arm.treatment.as_str()) {
                return Err(Error::InvalidStudy {
                    id,
                    reason: format!("duplicate treatment '{}'", arm.treatment),
                });
            }
        }
        Ok(Study {
            id,
            subgroup,
            arms,
            high_rob,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn subgroup(&self) -> &str {
        &self.subgroup
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    /// Number of arms `K_i`.
    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    /// Baseline arm (first in input order).
    pub fn baseline(&self) -> &Arm {
        &self.arms[0]
    }

    pub fn high_rob(&self) -> Option<bool> {
        self.high_rob
    }

    /// True when the study includes the given treatment.
    pub fn contains(&self, treatment: &str) -> bool {
        self.arms.iter().any(|a| a.treatment == treatment)
    }

    /// All unordered treatment pairs compared within this study,
    /// each pair sorted lexicographically.
    pub fn comparisons(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, a) in self.arms.iter().enumerate() {
            for b in &self.arms[i + 1..] {
                let (x, y) = if a.treatment <= b.treatment {
                    (a.treatment.clone(), b.treatment.clone())
                } else {
                    (b.treatment.clone(), a.treatment.clone())
                };
                out.push((x, y));
            }
        }
        out
    }

    /// Returns a copy of the study with arm order rotated so that `treatment`
    /// is the baseline arm. The set of arms is unchanged.
    pub fn rebased(&self, treatment: &str) -> Result<Study> {
        let pos = self
            .arms
            .iter()
            .position(|a| a.treatment == treatment)
            .ok_or_else(|| Error::UnknownTreatment(treatment.to_string()))?;
        let mut arms = self.arms.clone();
        let base = arms.remove(pos);
        arms.insert(0, base);
        Ok(Study {
            id: self.id.clone(),
            subgroup: self.subgroup.clone(),
            arms,
            high_rob: self.high_rob,
        })
    }
}

/// Pooled standard deviation over all arms of a study:
/// `sqrt( sum_k (n_k - 1) sd_k^2 / (sum_k n_k - K) )`.
///
/// Studies whose arms all report the same sd pool to that sd exactly.
pub fn pooled_sd(study: &Study) -> Result<f64> {
    let first = study.arms[0].sd;
    if study.arms.iter().all(|a| a.sd == first) {
        return Ok(first);
    }
    let total_n: u64 = study.arms.iter().map(|a| a.n as u64).sum();
    let k = study.arm_count() as u64;
    if total_n <= k {
        return Err(Error::InsufficientSample(study.id.clone()));
    }
    let ss: f64 = study
        .arms
        .iter()
        .map(|a| (a.n as f64 - 1.0) * a.sd * a.sd)
        .sum();
    Ok((ss / (total_n - k) as f64).sqrt())
}

/// A labeled treatment network for one population subgroup.
///
/// `treatments` is always the union of arm treatments over the included
/// studies. Connectivity of the comparison graph is *checked*, not assumed:
/// callers that need a single component use [`connectivity`].
#[derive(Debug, Clone)]
pub struct Network {
    subgroup: String,
    studies: Vec<Study>,
    treatments: BTreeSet<String>,
    reference: String,
}

impl Network {
    /// Builds a network from studies. The reference treatment must appear in
    /// the network unless the study list is empty.
    pub fn new(
        subgroup: impl Into<String>,
        studies: Vec<Study>,
        reference: impl Into<String>,
    ) -> Result<Self> {
        let subgroup = subgroup.into();
        let reference = reference.into();
        let mut treatments = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for study in &studies {
            if !ids.insert(study.id.clone()) {
                return Err(Error::InvalidNetwork {
                    subgroup,
                    reason: format!("duplicate study id '{}'", study.id),
                });
            }
            for arm in &study.arms {
                treatments.insert(arm.treatment.clone());
            }
        }
        if !studies.is_empty() && !treatments.contains(&reference) {
            return Err(Error::InvalidNetwork {
                subgroup,
                reason: format!("reference treatment '{reference}' not present in any study"),
            });
        }
        Ok(Network {
            subgroup,
            studies,
            treatments,
            reference,
        })
    }

    pub fn subgroup(&self) -> &str {
        &self.subgroup
    }

    pub fn studies(&self) -> &[Study] {
        &self.studies
    }

    pub fn treatments(&self) -> &BTreeSet<String> {
        &self.treatments
    }

    pub fn reference(&self) -> &str {
        &self.reference
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    /// Non-reference treatments in lexicographic order; these index the basic
    /// parameters `mu_{1j}`.
    pub fn basic_treatments(&self) -> Vec<&str> {
        self.treatments
            .iter()
            .filter(|t| *t != &self.reference)
            .map(|t| t.as_str())
            .collect()
    }

    /// A copy containing only studies satisfying `keep`, with the treatment
    /// set recomputed from the survivors.
    pub fn restricted(&self, keep: impl Fn(&Study) -> bool) -> Result<Network> {
        let studies: Vec<Study> = self.studies.iter().filter(|s| keep(s)).cloned().collect();
        Network::new(self.subgroup.clone(), studies, self.reference.clone())
    }

    /// Concatenates two networks (self first) under a merged subgroup label.
    /// Both must share the same reference treatment.
    pub fn merged(&self, other: &Network) -> Result<Network> {
        if !other.is_empty() && !self.is_empty() && self.reference != other.reference {
            return Err(Error::InvalidNetwork {
                subgroup: format!("{}+{}", self.subgroup, other.subgroup),
                reason: format!(
                    "reference mismatch: '{}' vs '{}'",
                    self.reference, other.reference
                ),
            });
        }
        let mut studies = self.studies.clone();
        studies.extend(other.studies.iter().cloned());
        let reference = if self.is_empty() && !other.is_empty() {
            other.reference.clone()
        } else {
            self.reference.clone()
        };
        Network::new(
            format!("{}+{}", self.subgroup, other.subgroup),
            studies,
            reference,
        )
    }
}

/// Union and intersection of the treatment sets of two networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreatmentSets {
    /// All treatments evaluated in either network (`T_a`).
    pub t_a: BTreeSet<String>,
    /// Treatments evaluated in both networks (`T_c`); only these can carry
    /// information between subgroups.
    pub t_c: BTreeSet<String>,
}

impl TreatmentSets {
    /// Common treatments other than the reference.
    pub fn common_non_reference<'a>(&'a self, reference: &str) -> Vec<&'a str> {
        self.t_c
            .iter()
            .filter(|t| t.as_str() != reference)
            .map(|t| t.as_str())
            .collect()
    }
}

/// Computes `T_a = T1 ∪ T2` and `T_c = T1 ∩ T2` for a dense/sparse network
/// pair sharing a common reference.
///
/// Errors when the references differ, when either network is empty, or when
/// the intersection contains nothing beyond the reference (nothing to borrow).
pub fn treatment_sets(dense: &Network, sparse: &Network) -> Result<TreatmentSets> {
    if dense.is_empty() || sparse.is_empty() {
        return Err(Error::InvalidNetwork {
            subgroup: if dense.is_empty() {
                dense.subgroup.clone()
            } else {
                sparse.subgroup.clone()
            },
            reason: "empty network".into(),
        });
    }
    if dense.reference != sparse.reference {
        return Err(Error::InvalidNetwork {
            subgroup: sparse.subgroup.clone(),
            reason: format!(
                "reference mismatch: '{}' vs '{}'",
                dense.reference, sparse.reference
            ),
        });
    }
    let t_a: BTreeSet<String> = dense.treatments.union(&sparse.treatments).cloned().collect();
    let t_c: BTreeSet<String> = dense
        .treatments
        .intersection(&sparse.treatments)
        .cloned()
        .collect();
    if t_c.iter().all(|t| *t == dense.reference) {
        return Err(Error::NoBorrowableComparisons);
    }
    Ok(TreatmentSets { t_a, t_c })
}

/// Study count per unordered treatment pair with direct evidence.
/// Multi-arm studies contribute one count to each of their pairs.
pub fn direct_comparisons(network: &Network) -> BTreeMap<(String, String), usize> {
    let mut counts = BTreeMap::new();
    for study in &network.studies {
        for pair in study.comparisons() {
            *counts.entry(pair).or_insert(0) += 1;
        }
    }
    counts
}

/// Connected components of the comparison graph, each sorted lexicographically;
/// the component list is ordered by its smallest treatment. An empty network
/// has zero components.
pub fn connectivity(network: &Network) -> Vec<Vec<String>> {
    let nodes: Vec<&String> = network.treatments.iter().collect();
    let index: BTreeMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for study in &network.studies {
        for (a, b) in study.comparisons() {
            let (i, j) = (index[a.as_str()], index[b.as_str()]);
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    let mut component = vec![usize::MAX; nodes.len()];
    let mut n_components = 0;
    for start in 0..nodes.len() {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = n_components;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if component[w] == usize::MAX {
                    component[w] = n_components;
                    stack.push(w);
                }
            }
        }
        n_components += 1;
    }
    let mut out = vec![Vec::new(); n_components];
    for (i, t) in nodes.iter().enumerate() {
        out[component[i]].push((*t).clone());
    }
    out
}

/// Checks that the network is non-empty and forms a single connected
/// component, returning the component list otherwise.
pub fn require_connected(network: &Network) -> Result<()> {
    if network.is_empty() {
        return Err(Error::InvalidNetwork {
            subgroup: network.subgroup.clone(),
            reason: "no studies".into(),
        });
    }
    let components = connectivity(network);
    if components.len() != 1 {
        return Err(Error::Disconnected {
            subgroup: network.subgroup.clone(),
            components,
        });
    }
    Ok(())
}
