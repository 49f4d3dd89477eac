//! Consistency assessment (node splitting), treatment ranking (SUCRA) and
//! league-table assembly.

use std::collections::{BTreeMap, BTreeSet};

use crate::mcmc::{summarize_draws, PosteriorSamples, PosteriorSummary, SamplerConfig};
use crate::model::Network;
use crate::nma::{relative_effect, ModelSpec, MuPrior, SplitSpec, TauPrior};
use crate::{Error, Result};

/// Bayesian two-sided p-value `2 min(P, 1 - P)` for a posterior probability
/// `P` that a difference is positive.
pub fn bayes_p(p_gt0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_gt0) || p_gt0.is_nan() {
        return Err(Error::InvalidPrior(format!(
            "probability {p_gt0} outside [0, 1]"
        )));
    }
    Ok(2.0 * p_gt0.min(1.0 - p_gt0))
}

/// Direct vs indirect evidence for one comparison.
#[derive(Debug, Clone)]
pub struct NodeSplitResult {
    /// `head vs base`, matching report row labels.
    pub comparison: String,
    pub direct: PosteriorSummary,
    pub indirect: PosteriorSummary,
    pub difference: PosteriorSummary,
    /// Posterior probability that direct - indirect > 0.
    pub p_gt0: f64,
    pub p_value: f64,
    /// Paired (direct, indirect) draws for density plots.
    pub draws: Vec<(f64, f64)>,
}

/// Priors of the model being split (informative models keep their stage-2
/// location priors on the network parameters; the direct effect always gets
/// the non-informative default).
#[derive(Debug, Clone, Default)]
pub struct NodeSplitModel {
    pub mu_prior: MuPrior,
    pub tau_prior: TauPrior,
}

/// Splits `head vs base`: direct studies inform a separate direct-effect
/// parameter while everything else informs the network parameter, then the
/// two are compared draw by draw.
pub fn node_split(
    network: &Network,
    base: &str,
    head: &str,
    model: &NodeSplitModel,
    config: &SamplerConfig,
) -> Result<NodeSplitResult> {
    let comparison = format!("{head} vs {base}");
    for t in [base, head] {
        if !network.treatments().contains(t) {
            return Err(Error::UnknownTreatment(t.to_string()));
        }
    }
    let direct_ids: BTreeSet<String> = network
        .studies()
        .iter()
        .filter(|s| s.contains(base) && s.contains(head))
        .map(|s| s.id().to_string())
        .collect();
    if direct_ids.is_empty() {
        return Err(Error::NoDirectEvidence(comparison));
    }
    if !indirectly_connected(network, base, head) {
        return Err(Error::NotSplittable(comparison));
    }

    // Rebase direct studies so the split edge is baseline -> head; their other
    // arms keep informing the network parameters.
    let mut studies = Vec::with_capacity(network.studies().len());
    for study in network.studies() {
        if direct_ids.contains(study.id()) {
            studies.push(study.rebased(base)?);
        } else {
            studies.push(study.clone());
        }
    }
    let rebased = Network::new(
        network.subgroup().to_string(),
        studies,
        network.reference().to_string(),
    )?;

    let spec = ModelSpec {
        network: &rebased,
        mu_prior: &model.mu_prior,
        tau_prior: &model.tau_prior,
        betas: None,
        weights: None,
        split: Some(SplitSpec {
            base: base.to_string(),
            head: head.to_string(),
        }),
    };
    let built = crate::nma::build_model(&spec)?;
    let samples = crate::mcmc::run_sampler(&built.model, built.blocks, built.moves, config)?;

    let direct_draws = samples.pooled(&format!("direct[{head} vs {base}]"))?;
    let indirect_draws = relative_effect(&samples, rebased.reference(), base, head)?;
    let diff: Vec<f64> = direct_draws
        .iter()
        .zip(&indirect_draws)
        .map(|(d, i)| d - i)
        .collect();
    let p_gt0 = diff.iter().filter(|v| **v > 0.0).count() as f64 / diff.len() as f64;
    Ok(NodeSplitResult {
        comparison,
        direct: summarize_draws(&direct_draws),
        indirect: summarize_draws(&indirect_draws),
        difference: summarize_draws(&diff),
        p_gt0,
        p_value: bayes_p(p_gt0)?,
        draws: direct_draws.into_iter().zip(indirect_draws).collect(),
    })
}

/// True when `base` and `head` stay connected after removing every direct
/// `base-head` edge (other edges of multi-arm direct studies still count).
fn indirectly_connected(network: &Network, base: &str, head: &str) -> bool {
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for study in network.studies() {
        for (a, b) in study.comparisons() {
            let is_split = (a == base && b == head) || (a == head && b == base);
            if is_split {
                continue;
            }
            // keys borrow from the network, not the temporary pair
            let (a, b) = (
                network.treatments().get(&a).map(|s| s.as_str()),
                network.treatments().get(&b).map(|s| s.as_str()),
            );
            if let (Some(a), Some(b)) = (a, b) {
                adjacency.entry(a).or_default().push(b);
                adjacency.entry(b).or_default().push(a);
            }
        }
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![base];
    seen.insert(base);
    while let Some(v) = stack.pop() {
        if v == head {
            return true;
        }
        if let Some(next) = adjacency.get(v) {
            for w in next {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
    }
    false
}

/// All comparisons with direct evidence that stay indirectly connected after
/// splitting. Pairs involving the reference are oriented `drug vs reference`;
/// other pairs lexicographically.
pub fn splittable_comparisons(network: &Network) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let direct = crate::model::direct_comparisons(network);
    for (a, b) in direct.keys() {
        let (base, head) = if b == network.reference() {
            (b.clone(), a.clone())
        } else {
            (a.clone(), b.clone())
        };
        if indirectly_connected(network, &base, &head) {
            out.push((base, head));
        }
    }
    out
}

/// Ranking direction; lower standardized mean differences mean larger symptom
/// reduction, so lower-is-better is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankDirection {
    #[default]
    LowerBetter,
    HigherBetter,
}

impl std::fmt::Display for RankDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RankDirection::LowerBetter => "lower-better",
            RankDirection::HigherBetter => "higher-better",
        })
    }
}

/// `probability(treatment j occupies rank r)` for all j, r. Doubly stochastic
/// by construction.
#[derive(Debug, Clone)]
pub struct RankMatrix {
    treatments: Vec<String>,
    /// probabilities[treatment][rank]
    probabilities: Vec<Vec<f64>>,
    pub direction: RankDirection,
    /// Number of draws in which at least one tie was broken by input order.
    pub tie_count: usize,
}

impl RankMatrix {
    pub fn treatments(&self) -> &[String] {
        &self.treatments
    }

    pub fn n_treatments(&self) -> usize {
        self.treatments.len()
    }

    pub fn probability(&self, treatment: &str, rank: usize) -> Result<f64> {
        let i = self.index_of(treatment)?;
        self.probabilities[i]
            .get(rank - 1)
            .copied()
            .ok_or_else(|| Error::Analysis(format!("rank {rank} out of range")))
    }

    pub fn row(&self, treatment: &str) -> Result<&[f64]> {
        Ok(&self.probabilities[self.index_of(treatment)?])
    }

    fn index_of(&self, treatment: &str) -> Result<usize> {
        self.treatments
            .iter()
            .position(|t| t == treatment)
            .ok_or_else(|| Error::UnknownTreatment(treatment.to_string()))
    }
}

/// Rank occupancy probabilities from posterior draws of the basic parameters.
/// The reference treatment has effect zero in every draw.
pub fn rank_probabilities(
    samples: &PosteriorSamples,
    reference: &str,
    treatments: &[String],
    direction: RankDirection,
) -> Result<RankMatrix> {
    let t = treatments.len();
    if t == 0 {
        return Err(Error::Analysis("no treatments to rank".into()));
    }
    let columns: Vec<Option<Vec<f64>>> = treatments
        .iter()
        .map(|name| -> Result<Option<Vec<f64>>> {
            if name == reference {
                Ok(None)
            } else {
                Ok(Some(samples.pooled(&crate::nma::mu_name(name))?))
            }
        })
        .collect::<Result<_>>()?;
    let n_draws = samples.n_chains() * samples.n_draws();
    if n_draws == 0 {
        return Err(Error::EmptySample("rank_probabilities".into()));
    }

    let mut counts = vec![vec![0u64; t]; t];
    let mut tie_count = 0usize;
    let mut order: Vec<usize> = Vec::with_capacity(t);
    let mut values = vec![0.0; t];
    for d in 0..n_draws {
        for (i, col) in columns.iter().enumerate() {
            values[i] = col.as_ref().map_or(0.0, |c| c[d]);
        }
        order.clear();
        order.extend(0..t);
        // stable sort: ties keep input order
        match direction {
            RankDirection::LowerBetter => {
                order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite draw"));
            }
            RankDirection::HigherBetter => {
                order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite draw"));
            }
        }
        let mut tied = false;
        for w in order.windows(2) {
            if values[w[0]] == values[w[1]] {
                tied = true;
            }
        }
        if tied {
            tie_count += 1;
        }
        for (rank, &i) in order.iter().enumerate() {
            counts[i][rank] += 1;
        }
    }

    let probabilities = counts
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|c| c as f64 / n_draws as f64)
                .collect()
        })
        .collect();
    Ok(RankMatrix {
        treatments: treatments.to_vec(),
        probabilities,
        direction,
        tie_count,
    })
}

/// Surface under the cumulative ranking curve:
/// `sum_{r=1}^{T-1} cum_prob(r) / (T-1)`. 1 = certainly best, 0 = certainly
/// worst. Undefined for a single treatment.
pub fn sucra(ranks: &RankMatrix, treatment: &str) -> Result<f64> {
    let t = ranks.n_treatments();
    if t < 2 {
        return Err(Error::Analysis(
            "SUCRA undefined for a single treatment".into(),
        ));
    }
    let row = ranks.row(treatment)?;
    let mut cumulative = 0.0;
    let mut total = 0.0;
    for p in &row[..t - 1] {
        cumulative += p;
        total += cumulative;
    }
    Ok(total / (t - 1) as f64)
}

/// Mean and equal-tailed 95% interval of one relative effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeagueEntry {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

/// All ordered-pair relative effects `mu_jl` (effect of `l` relative to `j`).
/// The `(l, j)` entry is constructed as the exact mirror of `(j, l)`, so
/// antisymmetry holds bit for bit.
#[derive(Debug, Clone)]
pub struct LeagueTable {
    treatments: Vec<String>,
    /// row-major `j * T + l`; diagonal entries are `None`.
    entries: Vec<Option<LeagueEntry>>,
}

impl LeagueTable {
    pub fn treatments(&self) -> &[String] {
        &self.treatments
    }

    /// Entry for `mu_jl`, the effect of `l` relative to `j`.
    pub fn get(&self, j: &str, l: &str) -> Result<Option<LeagueEntry>> {
        let t = self.treatments.len();
        let ji = self
            .treatments
            .iter()
            .position(|x| x == j)
            .ok_or_else(|| Error::UnknownTreatment(j.to_string()))?;
        let li = self
            .treatments
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::UnknownTreatment(l.to_string()))?;
        Ok(self.entries[ji * t + li])
    }
}

/// Builds the league table from fitted samples over the given treatments.
pub fn league_table(
    samples: &PosteriorSamples,
    reference: &str,
    treatments: &[String],
) -> Result<LeagueTable> {
    let t = treatments.len();
    let mut entries: Vec<Option<LeagueEntry>> = vec![None; t * t];
    for j in 0..t {
        for l in (j + 1)..t {
            let draws = relative_effect(samples, reference, &treatments[j], &treatments[l])?;
            let s = summarize_draws(&draws);
            entries[j * t + l] = Some(LeagueEntry {
                mean: s.mean,
                low: s.q025,
                high: s.q975,
            });
            // exact mirror: same draws, sign flipped, interval swapped
            entries[l * t + j] = Some(LeagueEntry {
                mean: -s.mean,
                low: -s.q975,
                high: -s.q025,
            });
        }
    }
    Ok(LeagueTable {
        treatments: treatments.to_vec(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arm, Study};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bayes_p_anchors() {
        assert_eq!(bayes_p(0.5).unwrap(), 1.0);
        assert_eq!(bayes_p(1.0).unwrap(), 0.0);
        assert_eq!(bayes_p(0.0).unwrap(), 0.0);
        // the 2-decimal reported value matches the table anchor exactly
        assert_eq!(format!("{:.2}", bayes_p(0.94).unwrap()), "0.12");
        assert_abs_diff_eq!(bayes_p(0.94).unwrap(), 0.12, epsilon = 1e-12);
        assert!(bayes_p(-0.1).is_err());
        assert!(bayes_p(1.1).is_err());
        assert!(bayes_p(f64::NAN).is_err());
    }

    #[test]
    fn bayes_p_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p: f64 = rng.random();
            let a = bayes_p(p).unwrap();
            let b = bayes_p(1.0 - p).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    fn samples_from(columns: &[(&str, Vec<f64>)]) -> PosteriorSamples {
        let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
        let chain: Vec<Vec<f64>> = columns.iter().map(|(_, c)| c.clone()).collect();
        PosteriorSamples::from_draws(&names, vec![chain]).unwrap()
    }

    #[test]
    fn rank_matrix_certain_order() {
        let samples = samples_from(&[("mu[B]", vec![0.5; 100])]);
        let treatments = vec!["A".to_string(), "B".to_string()];
        let ranks =
            rank_probabilities(&samples, "A", &treatments, RankDirection::LowerBetter).unwrap();
        // A (effect 0) always better than B (0.5) under lower-better
        assert_eq!(ranks.probability("A", 1).unwrap(), 1.0);
        assert_eq!(ranks.probability("B", 2).unwrap(), 1.0);
        // direction flip reverses it
        let ranks =
            rank_probabilities(&samples, "A", &treatments, RankDirection::HigherBetter).unwrap();
        assert_eq!(ranks.probability("B", 1).unwrap(), 1.0);
    }

    #[test]
    fn rank_matrix_symmetric_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws: Vec<f64> = (0..40_000)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.3)
            .collect();
        let samples = samples_from(&[("mu[B]", draws)]);
        let treatments = vec!["A".to_string(), "B".to_string()];
        let ranks =
            rank_probabilities(&samples, "A", &treatments, RankDirection::LowerBetter).unwrap();
        let p = ranks.probability("B", 1).unwrap();
        assert!((p - 0.5).abs() < 0.02, "p {p}");
    }

    #[test]
    fn rank_matrix_identity_for_separated_effects() {
        // -0.6 < -0.3 < 0 with negligible noise: rank matrix is the identity
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut col = |center: f64| -> Vec<f64> {
            (0..2000)
                .map(|_| center + 1e-6 * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        };
        let samples = samples_from(&[("mu[X]", col(-0.6)), ("mu[Y]", col(-0.3))]);
        let treatments = vec!["Pbo".to_string(), "X".to_string(), "Y".to_string()];
        let ranks =
            rank_probabilities(&samples, "Pbo", &treatments, RankDirection::LowerBetter).unwrap();
        assert_eq!(ranks.probability("X", 1).unwrap(), 1.0);
        assert_eq!(ranks.probability("Y", 2).unwrap(), 1.0);
        assert_eq!(ranks.probability("Pbo", 3).unwrap(), 1.0);
    }

    #[test]
    fn rank_matrix_is_doubly_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let col: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() - 0.5).collect();
        let col2: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() - 0.5).collect();
        let samples = samples_from(&[("mu[B]", col), ("mu[C]", col2)]);
        let treatments = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let ranks =
            rank_probabilities(&samples, "A", &treatments, RankDirection::LowerBetter).unwrap();
        for t in &treatments {
            let row_sum: f64 = ranks.row(t).unwrap().iter().sum();
            assert_abs_diff_eq!(row_sum, 1.0, epsilon = 1e-9);
        }
        for r in 1..=3 {
            let col_sum: f64 = treatments
                .iter()
                .map(|t| ranks.probability(t, r).unwrap())
                .sum();
            assert_abs_diff_eq!(col_sum, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sucra_extremes_and_uniform() {
        let samples = samples_from(&[("mu[B]", vec![0.5; 50]), ("mu[C]", vec![1.0; 50])]);
        let treatments = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let ranks =
            rank_probabilities(&samples, "A", &treatments, RankDirection::LowerBetter).unwrap();
        assert_eq!(sucra(&ranks, "A").unwrap(), 1.0);
        assert_eq!(sucra(&ranks, "C").unwrap(), 0.0);
        // sum over treatments = T/2
        let total: f64 = treatments.iter().map(|t| sucra(&ranks, t).unwrap()).sum();
        assert_abs_diff_eq!(total, 1.5, epsilon = 1e-9);

        // hand-built uniform matrix: every treatment 0.5
        let uniform = RankMatrix {
            treatments: treatments.clone(),
            probabilities: vec![vec![1.0 / 3.0; 3]; 3],
            direction: RankDirection::LowerBetter,
            tie_count: 0,
        };
        for t in &treatments {
            assert_abs_diff_eq!(sucra(&uniform, t).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn sucra_single_treatment_errors() {
        let ranks = RankMatrix {
            treatments: vec!["A".to_string()],
            probabilities: vec![vec![1.0]],
            direction: RankDirection::LowerBetter,
            tie_count: 0,
        };
        assert!(sucra(&ranks, "A").is_err());
    }

    #[test]
    fn league_table_mirrors_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mk = |c: f64| -> Vec<f64> {
            (0..999)
                .map(|_| c + 0.2 * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        };
        let samples = samples_from(&[("mu[B]", mk(-0.4)), ("mu[C]", mk(-0.1))]);
        let treatments = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let table = league_table(&samples, "A", &treatments).unwrap();
        for j in &treatments {
            assert!(table.get(j, j).unwrap().is_none());
            for l in &treatments {
                if j == l {
                    continue;
                }
                let e = table.get(j, l).unwrap().unwrap();
                let m = table.get(l, j).unwrap().unwrap();
                assert_eq!(e.mean.to_bits(), (-m.mean).to_bits());
                assert_eq!(e.low.to_bits(), (-m.high).to_bits());
                assert_eq!(e.high.to_bits(), (-m.low).to_bits());
            }
        }
    }

    #[test]
    fn league_table_two_treatments() {
        let samples = samples_from(&[("mu[B]", vec![-0.4, -0.5, -0.3])]);
        let treatments = vec!["A".to_string(), "B".to_string()];
        let table = league_table(&samples, "A", &treatments).unwrap();
        let ab = table.get("A", "B").unwrap().unwrap();
        let ba = table.get("B", "A").unwrap().unwrap();
        assert_eq!(ab.mean, -ba.mean);
        assert_abs_diff_eq!(ab.mean, -0.4, epsilon = 1e-12);
    }

    fn arm(t: &str, n: u32, mean: f64, sd: f64) -> Arm {
        Arm::new(t, n, mean, sd).unwrap()
    }

    fn triangle_network(direct_shift: f64) -> Network {
        // A-B, A-C, B-C edges, two studies each; generated consistent unless
        // direct_shift moves the B-C direct evidence.
        let sd = 8.0;
        let mut studies = Vec::new();
        // truths: mu_AB = -0.4, mu_AC = -0.8 => BC = -0.4
        for (i, off) in [(0, 0.03), (1, -0.02)] {
            studies.push(
                Study::new(
                    format!("ab{i}"),
                    "P1",
                    vec![
                        arm("A", 80, 0.0, sd),
                        arm("B", 80, (-0.4 + off) * sd, sd),
                    ],
                    Some(false),
                )
                .unwrap(),
            );
            studies.push(
                Study::new(
                    format!("ac{i}"),
                    "P1",
                    vec![
                        arm("A", 80, 0.0, sd),
                        arm("C", 80, (-0.8 - off) * sd, sd),
                    ],
                    Some(false),
                )
                .unwrap(),
            );
            studies.push(
                Study::new(
                    format!("bc{i}"),
                    "P1",
                    vec![
                        arm("B", 80, 0.0, sd),
                        arm("C", 80, (-0.4 + direct_shift + off) * sd, sd),
                    ],
                    Some(false),
                )
                .unwrap(),
            );
        }
        Network::new("P1", studies, "A").unwrap()
    }

    fn quick(seed: u64) -> SamplerConfig {
        SamplerConfig::new(seed).with_run_length(12_000, 3_000)
    }

    #[test]
    fn node_split_consistent_data_large_p() {
        let net = triangle_network(0.0);
        let result = node_split(&net, "B", "C", &NodeSplitModel::default(), &quick(8)).unwrap();
        assert!(
            result.p_value > 0.2,
            "p {} (direct {:?} indirect {:?})",
            result.p_value,
            result.direct,
            result.indirect
        );
        assert_abs_diff_eq!(
            result.p_value,
            bayes_p(result.p_gt0).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn node_split_inconsistent_data_small_p() {
        let net = triangle_network(2.0);
        let result = node_split(&net, "B", "C", &NodeSplitModel::default(), &quick(9)).unwrap();
        assert!(result.p_value < 0.05, "p {}", result.p_value);
        // direct sits ~2 SMD away from indirect
        assert!((result.difference.mean).abs() > 1.0);
    }

    #[test]
    fn node_split_requires_direct_evidence() {
        // no direct B-C studies
        let studies = vec![
            Study::new(
                "ab",
                "P1",
                vec![arm("A", 50, 0.0, 8.0), arm("B", 50, -3.0, 8.0)],
                Some(false),
            )
            .unwrap(),
            Study::new(
                "ac",
                "P1",
                vec![arm("A", 50, 0.0, 8.0), arm("C", 50, -5.0, 8.0)],
                Some(false),
            )
            .unwrap(),
        ];
        let net = Network::new("P1", studies, "A").unwrap();
        assert!(matches!(
            node_split(&net, "B", "C", &NodeSplitModel::default(), &quick(1)),
            Err(Error::NoDirectEvidence(_))
        ));
    }

    #[test]
    fn node_split_requires_indirect_path() {
        // only direct A-B evidence: removing it disconnects
        let studies = vec![Study::new(
            "ab",
            "P1",
            vec![arm("A", 50, 0.0, 8.0), arm("B", 50, -3.0, 8.0)],
            Some(false),
        )
        .unwrap()];
        let net = Network::new("P1", studies, "A").unwrap();
        assert!(matches!(
            node_split(&net, "A", "B", &NodeSplitModel::default(), &quick(1)),
            Err(Error::NotSplittable(_))
        ));
    }

    #[test]
    fn multi_arm_split_keeps_other_edges_in_network() {
        // three-arm A-B-C study provides direct B-C evidence after rebasing
        let studies = vec![
            Study::new(
                "abc",
                "P1",
                vec![
                    arm("A", 60, 0.0, 8.0),
                    arm("B", 60, -2.0, 8.0),
                    arm("C", 60, -4.0, 8.0),
                ],
                Some(false),
            )
            .unwrap(),
            Study::new(
                "ab",
                "P1",
                vec![arm("A", 60, 0.0, 8.0), arm("B", 60, -2.5, 8.0)],
                Some(false),
            )
            .unwrap(),
            Study::new(
                "ac",
                "P1",
                vec![arm("A", 60, 0.0, 8.0), arm("C", 60, -4.5, 8.0)],
                Some(false),
            )
            .unwrap(),
        ];
        let net = Network::new("P1", studies, "A").unwrap();
        let result = node_split(&net, "B", "C", &NodeSplitModel::default(), &quick(4)).unwrap();
        assert!(result.p_value > 0.05, "p {}", result.p_value);
    }

    #[test]
    fn splittable_comparisons_orient_and_filter() {
        let net = triangle_network(0.0);
        let pairs = splittable_comparisons(&net);
        assert_eq!(pairs.len(), 3);
        // reference A is always the base where involved
        assert!(pairs.contains(&("A".to_string(), "B".to_string())));
        assert!(pairs.contains(&("A".to_string(), "C".to_string())));
        assert!(pairs.contains(&("B".to_string(), "C".to_string())));
    }
}
