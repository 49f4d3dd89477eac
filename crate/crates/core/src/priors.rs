//! Location-shift prior construction.
//!
//! The shift `beta_{1j}` between the two subgroups is informed either by the
//! data (paired pairwise meta-analyses of each comparison with a heterogeneity
//! SD shared across subgroups, so the sparse side can borrow its scale) or by
//! expert opinion (confidence-weighted pooling of elicited change scores,
//! standardized by the median pooled SD of the data). Either way the result is
//! a normal prior `N(d_1j, var(d_1j))` per common comparison, with the
//! non-informative `N(0, 10000)` fallback where evidence is one-sided.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::borrowing::{BetaPrior, BetaPriorSet, PriorSource};
use crate::mcmc::{
    derive_seed, run_sampler, summarize, CustomMove, ParameterBlock, PosteriorSamples,
    SamplerConfig, Support, Target,
};
use crate::model::{pooled_sd, Network, Study, TreatmentSets};
use crate::nma::{normal_lpdf, NormalPrior, TauPrior};
use crate::{Error, Result};

/// Paired pairwise meta-analysis of one comparison (reference vs `treatment`)
/// with a common heterogeneity SD across the two subgroups.
#[derive(Debug, Clone)]
pub struct PairwiseResult {
    pub treatment: String,
    /// Pooled SMD in the sparse subgroup (posterior mean, variance).
    pub u_sparse: (f64, f64),
    /// Pooled SMD in the dense subgroup (posterior mean, variance).
    pub u_dense: (f64, f64),
    /// Posterior mean of the shared heterogeneity SD.
    pub sigma_mean: f64,
    /// Joint posterior of `u_dense - u_sparse` (mean, variance).
    pub difference: (f64, f64),
}

/// One elicited questionnaire row: expected change score, its SD and the
/// expert's overall confidence on a 1-10 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertResponse {
    pub expert_id: String,
    pub treatment: String,
    pub expected_change: f64,
    pub sd: f64,
    pub confidence: u8,
}

impl ExpertResponse {
    pub fn new(
        expert_id: impl Into<String>,
        treatment: impl Into<String>,
        expected_change: f64,
        sd: f64,
        confidence: u8,
    ) -> Result<Self> {
        let expert_id = expert_id.into();
        let treatment = treatment.into();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::ExpertPool(format!(
                "expert '{expert_id}', treatment '{treatment}': sd must be positive, got {sd}"
            )));
        }
        if !expected_change.is_finite() {
            return Err(Error::ExpertPool(format!(
                "expert '{expert_id}', treatment '{treatment}': non-finite change score"
            )));
        }
        if !(1..=10).contains(&confidence) {
            return Err(Error::ExpertPool(format!(
                "expert '{expert_id}', treatment '{treatment}': confidence {confidence} outside 1-10"
            )));
        }
        Ok(ExpertResponse {
            expert_id,
            treatment,
            expected_change,
            sd,
            confidence,
        })
    }

    /// Confidence mapped to the precision weight `gamma = confidence / 10`,
    /// so elicited variances are only ever inflated.
    pub fn gamma(&self) -> f64 {
        self.confidence as f64 / 10.0
    }
}

/// Pooled expert opinion: posteriors of the standardized per-treatment means
/// `xi_j` and of the contrasts `u_{1j} = xi_j - xi_1`.
#[derive(Debug, Clone)]
pub struct ExpertPoolResult {
    pub reference: String,
    pub med_pooled_sd: f64,
    pub treatments: Vec<String>,
    pub samples: PosteriorSamples,
    pub warnings: Vec<String>,
}

impl ExpertPoolResult {
    /// Column name of the pooled standardized mean for `treatment`.
    pub fn xi_name(treatment: &str) -> String {
        format!("xi[{treatment}]")
    }

    /// Column name of the contrast vs the reference.
    pub fn u_name(treatment: &str) -> String {
        format!("u[{treatment}]")
    }

    pub fn covers(&self, treatment: &str) -> bool {
        self.treatments.iter().any(|t| t == treatment)
    }

    /// Posterior (mean, variance) of `u_{1j}` for a covered treatment.
    pub fn u_posterior(&self, treatment: &str) -> Result<(f64, f64)> {
        let s = summarize(&self.samples, &Self::u_name(treatment))?;
        Ok((s.mean, s.sd * s.sd))
    }
}

/// Study-level SMD of `head` vs `base` with its large-sample variance
/// `(n_b + n_h)/(n_b n_h) + smd^2 / (2 (n_b + n_h))`.
pub fn study_smd(study: &Study, base: &str, head: &str) -> Result<(f64, f64)> {
    let find = |t: &str| {
        study
            .arms()
            .iter()
            .find(|a| a.treatment() == t)
            .ok_or_else(|| Error::UnknownTreatment(t.to_string()))
    };
    let b = find(base)?;
    let h = find(head)?;
    let s = pooled_sd(study)?;
    let smd = (h.mean() - b.mean()) / s;
    let (nb, nh) = (b.n() as f64, h.n() as f64);
    let var = (nb + nh) / (nb * nh) + smd * smd / (2.0 * (nb + nh));
    Ok((smd, var))
}

/// Median of the per-study pooled SDs of a network (used to standardize
/// elicited change scores).
pub fn median_pooled_sd(network: &Network) -> Result<f64> {
    if network.is_empty() {
        return Err(Error::InvalidNetwork {
            subgroup: network.subgroup().to_string(),
            reason: "no studies to take a median pooled sd over".into(),
        });
    }
    let mut sds: Vec<f64> = network
        .studies()
        .iter()
        .map(pooled_sd)
        .collect::<Result<_>>()?;
    sds.sort_by(|a, b| a.partial_cmp(b).expect("finite pooled sd"));
    let n = sds.len();
    Ok(if n % 2 == 1 {
        sds[n / 2]
    } else {
        0.5 * (sds[n / 2 - 1] + sds[n / 2])
    })
}

// ---------------------------------------------------------------------------
// Shared two-level normal hierarchy:
//   obs_r ~ N(latent_r, var_r)
//   latent_r ~ N(k * xi_{g(r)}, k^2 sigma^2)
//   xi_g ~ N(0, 10000), sigma ~ HN(scale)
// Pairwise meta-analyses use k = 1 (latents are study effects); expert pooling
// uses k = med(pooled sd) (latents are unstandardized opinions).
// ---------------------------------------------------------------------------

pub(crate) struct HierObs {
    pub value: f64,
    pub var: f64,
    pub group: usize,
}

pub(crate) struct HierNormalModel {
    obs: Vec<HierObs>,
    scale_factor: f64,
    sigma_prior: TauPrior,
    xi_prior: NormalPrior,
}

impl HierNormalModel {
    fn latent_block(&self, r: usize) -> usize {
        r
    }
    fn xi_block(&self) -> usize {
        self.obs.len()
    }
    fn sigma_block(&self) -> usize {
        self.obs.len() + 1
    }

    fn obs_term(&self, state: &[Vec<f64>], r: usize) -> f64 {
        let o = &self.obs[r];
        normal_lpdf(o.value, state[self.latent_block(r)][0], o.var)
    }

    fn hier_term(&self, state: &[Vec<f64>], r: usize) -> f64 {
        let o = &self.obs[r];
        let xi = state[self.xi_block()][o.group];
        let sigma = state[self.sigma_block()][0];
        let k = self.scale_factor;
        normal_lpdf(state[self.latent_block(r)][0], k * xi, k * k * sigma * sigma)
    }

    fn xi_prior_term(&self, state: &[Vec<f64>]) -> f64 {
        state[self.xi_block()]
            .iter()
            .map(|&x| normal_lpdf(x, self.xi_prior.mean, self.xi_prior.variance))
            .sum()
    }

    fn sigma_prior_term(&self, state: &[Vec<f64>]) -> f64 {
        let sigma = state[self.sigma_block()][0];
        std::f64::consts::LN_2 - 0.5 * crate::nma::LN_2PI - self.sigma_prior.scale.ln()
            - 0.5 * (sigma / self.sigma_prior.scale).powi(2)
    }
}

impl Target for HierNormalModel {
    fn log_density(&self, state: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for r in 0..self.obs.len() {
            total += self.obs_term(state, r) + self.hier_term(state, r);
        }
        total + self.xi_prior_term(state) + self.sigma_prior_term(state)
    }

    fn delta(&self, state: &[Vec<f64>], updates: &[(usize, Vec<f64>)]) -> f64 {
        let mut view: Vec<Vec<f64>> = state.to_vec();
        let mut latents: Vec<usize> = Vec::new();
        let mut hier_all = false;
        let mut xi_p = false;
        let mut sigma_p = false;
        for (b, values) in updates {
            view[*b] = values.clone();
            if *b < self.obs.len() {
                latents.push(*b);
            } else if *b == self.xi_block() {
                hier_all = true;
                xi_p = true;
            } else {
                hier_all = true;
                sigma_p = true;
            }
        }
        let mut delta = 0.0;
        latents.sort_unstable();
        latents.dedup();
        for &r in &latents {
            delta += self.obs_term(&view, r) - self.obs_term(state, r);
        }
        if hier_all {
            for r in 0..self.obs.len() {
                delta += self.hier_term(&view, r) - self.hier_term(state, r);
            }
        } else {
            for &r in &latents {
                delta += self.hier_term(&view, r) - self.hier_term(state, r);
            }
        }
        if xi_p {
            delta += self.xi_prior_term(&view) - self.xi_prior_term(state);
        }
        if sigma_p {
            delta += self.sigma_prior_term(&view) - self.sigma_prior_term(state);
        }
        delta
    }

    fn attribute_non_finite(&self, state: &[Vec<f64>]) -> Option<String> {
        for r in 0..self.obs.len() {
            if !(self.obs_term(state, r) + self.hier_term(state, r)).is_finite() {
                return Some(format!("latent[{r}]"));
            }
        }
        if !self.xi_prior_term(state).is_finite() {
            return Some("xi".into());
        }
        if !self.sigma_prior_term(state).is_finite() {
            return Some("sigma".into());
        }
        None
    }
}

/// Fits the shared hierarchy. `xi_labels` name the group-mean coordinates.
pub(crate) fn fit_hier_normal(
    obs: Vec<HierObs>,
    n_groups: usize,
    scale_factor: f64,
    sigma_prior: TauPrior,
    xi_labels: Vec<String>,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    if obs.is_empty() {
        return Err(Error::Sampler("no observations".into()));
    }
    let model = HierNormalModel {
        obs,
        scale_factor,
        sigma_prior,
        xi_prior: NormalPrior::vague(),
    };

    let mut blocks = Vec::with_capacity(model.obs.len() + 2);
    for (r, o) in model.obs.iter().enumerate() {
        blocks.push(
            ParameterBlock::new(format!("latent[{r}]"), Support::Unbounded, vec![o.value])
                .with_prescale(vec![o.var.sqrt()])
                .latent(),
        );
    }
    // group means start at the crude per-group average of standardized obs
    let mut init = vec![0.0; n_groups];
    let mut counts = vec![0usize; n_groups];
    for o in &model.obs {
        init[o.group] += o.value / model.scale_factor;
        counts[o.group] += 1;
    }
    for g in 0..n_groups {
        if counts[g] > 0 {
            init[g] /= counts[g] as f64;
        }
    }
    blocks.push(ParameterBlock::new("xi", Support::Unbounded, init).with_labels(xi_labels));
    blocks.push(ParameterBlock::new("sigma", Support::Positive, vec![0.1]));

    // xi shear: xi_g += eps_g with that group's latents following (times k).
    let groups: Vec<usize> = model.obs.iter().map(|o| o.group).collect();
    let k = model.scale_factor;
    let xi_block = model.xi_block();
    let sigma_block = model.sigma_block();
    let n_obs = model.obs.len();
    let groups_shift = groups.clone();
    let shift = CustomMove {
        name: "xi_shift".into(),
        dimension: n_groups,
        initial_scale: 0.4 / (n_groups as f64).sqrt(),
        propose: Box::new(move |state, scale, rng| {
            let eps: Vec<f64> = (0..state[xi_block].len())
                .map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let mut updates = Vec::with_capacity(n_obs + 1);
            let xi_new: Vec<f64> = state[xi_block]
                .iter()
                .zip(&eps)
                .map(|(x, d)| x + d)
                .collect();
            updates.push((xi_block, xi_new));
            for (r, &g) in groups_shift.iter().enumerate() {
                updates.push((r, vec![state[r][0] + k * eps[g]]));
            }
            (updates, 0.0)
        }),
    };
    // sigma rescale: latents contract toward their group centers.
    let groups_rescale = groups;
    let rescale = CustomMove {
        name: "sigma_rescale".into(),
        dimension: 1,
        initial_scale: 0.5,
        propose: Box::new(move |state, scale, rng| {
            let eps: f64 = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
            let factor = eps.exp();
            let mut updates = Vec::with_capacity(n_obs + 1);
            updates.push((sigma_block, vec![state[sigma_block][0] * factor]));
            for (r, &g) in groups_rescale.iter().enumerate() {
                let center = k * state[xi_block][g];
                updates.push((r, vec![center + factor * (state[r][0] - center)]));
            }
            (updates, eps * (1.0 + n_obs as f64))
        }),
    };

    run_sampler(&model, blocks, vec![shift, rescale], config)
}

/// Direct studies of `head vs base` in a network, as (smd, var).
fn comparison_observations(network: &Network, base: &str, head: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for study in network.studies() {
        if study.contains(base) && study.contains(head) {
            out.push(study_smd(study, base, head)?);
        }
    }
    Ok(out)
}

/// Joint pairwise meta-analysis of `reference vs treatment` in both subgroups
/// with one shared comparison-specific heterogeneity SD (HN(1) prior).
///
/// Errors with [`Error::PairwiseUnavailable`] when either subgroup lacks
/// direct evidence; callers fall back to the non-informative prior.
pub fn pairwise_ma_shared_het(
    sparse: &Network,
    dense: &Network,
    treatment: &str,
    config: &SamplerConfig,
) -> Result<PairwiseResult> {
    let comparison = format!("{} vs {}", treatment, sparse.reference());
    let sparse_obs = comparison_observations(sparse, sparse.reference(), treatment)?;
    let dense_obs = comparison_observations(dense, dense.reference(), treatment)?;
    if sparse_obs.is_empty() || dense_obs.is_empty() {
        let side = if sparse_obs.is_empty() {
            sparse.subgroup()
        } else {
            dense.subgroup()
        };
        return Err(Error::PairwiseUnavailable {
            comparison,
            reason: format!("no direct evidence in subgroup '{side}'"),
        });
    }

    let mut obs = Vec::new();
    for (v, var) in &sparse_obs {
        obs.push(HierObs {
            value: *v,
            var: *var,
            group: 0,
        });
    }
    for (v, var) in &dense_obs {
        obs.push(HierObs {
            value: *v,
            var: *var,
            group: 1,
        });
    }
    let labels = vec![
        format!("u[{}:{}]", sparse.subgroup(), treatment),
        format!("u[{}:{}]", dense.subgroup(), treatment),
    ];
    let mut samples = fit_hier_normal(obs, 2, 1.0, TauPrior::unit(), labels.clone(), config)?;
    samples.derive(
        format!("d[{treatment}]"),
        &[&labels[0], &labels[1]],
        |v| v[1] - v[0],
    )?;

    let u1 = summarize(&samples, &labels[0])?;
    let u2 = summarize(&samples, &labels[1])?;
    let sigma = summarize(&samples, "sigma")?;
    let d = summarize(&samples, &format!("d[{treatment}]"))?;
    Ok(PairwiseResult {
        treatment: treatment.to_string(),
        u_sparse: (u1.mean, u1.sd * u1.sd),
        u_dense: (u2.mean, u2.sd * u2.sd),
        sigma_mean: sigma.mean,
        difference: (d.mean, d.sd * d.sd),
    })
}

/// Single-subgroup pairwise meta-analysis of an arbitrary comparison
/// `head vs base` (HN(1) heterogeneity prior).
pub fn pairwise_ma_pair(
    network: &Network,
    base: &str,
    head: &str,
    config: &SamplerConfig,
) -> Result<crate::mcmc::PosteriorSummary> {
    let comparison = format!("{head} vs {base}");
    let observations = comparison_observations(network, base, head)?;
    if observations.is_empty() {
        return Err(Error::PairwiseUnavailable {
            comparison,
            reason: format!("no direct evidence in subgroup '{}'", network.subgroup()),
        });
    }
    let obs: Vec<HierObs> = observations
        .iter()
        .map(|(v, var)| HierObs {
            value: *v,
            var: *var,
            group: 0,
        })
        .collect();
    let label = format!("u[{}:{comparison}]", network.subgroup());
    let samples = fit_hier_normal(obs, 1, 1.0, TauPrior::unit(), vec![label.clone()], config)?;
    summarize(&samples, &label)
}

/// Pooled (mean, variance) of `reference vs treatment` in one subgroup.
pub fn pairwise_ma_single(
    network: &Network,
    treatment: &str,
    config: &SamplerConfig,
) -> Result<(f64, f64)> {
    let reference = network.reference().to_string();
    let u = pairwise_ma_pair(network, &reference, treatment, config)?;
    Ok((u.mean, u.sd * u.sd))
}

/// Data-based shift priors: `beta_{1j} ~ N(d_1j, var(d_1j))` with
/// `d_1j = u^dense - u^sparse` from the joint shared-heterogeneity model,
/// falling back to `N(0, 10000)` for one-sided comparisons. Total over
/// `T_c \ {reference}`.
pub fn data_based_beta_priors(
    sparse: &Network,
    dense: &Network,
    sets: &TreatmentSets,
    config: &SamplerConfig,
) -> Result<BetaPriorSet> {
    let mut set = BetaPriorSet::new(sparse.reference());
    for treatment in sets.common_non_reference(sparse.reference()) {
        let mut sub = config.clone();
        sub.seed = derive_seed(config.seed, &format!("pairwise:{treatment}"));
        match pairwise_ma_shared_het(sparse, dense, treatment, &sub) {
            Ok(result) => {
                let (mean, var) = result.difference;
                set.insert(
                    treatment,
                    BetaPrior::Informative(NormalPrior::new(mean, var.max(1e-12))?),
                    PriorSource::Data,
                );
            }
            Err(Error::PairwiseUnavailable { .. }) => {
                set.insert(
                    treatment,
                    BetaPrior::Informative(NormalPrior::vague()),
                    PriorSource::Fallback,
                );
            }
            Err(e) => return Err(e),
        }
    }
    Ok(set)
}

/// Pools expert responses per treatment with the confidence-weighted
/// meta-analysis model. Responses are grouped by treatment; the reference
/// must be covered, otherwise the contrasts are undefined.
pub fn pool_experts(
    responses: &[ExpertResponse],
    reference: &str,
    med_pooled_sd: f64,
    config: &SamplerConfig,
) -> Result<ExpertPoolResult> {
    if !(med_pooled_sd > 0.0) || !med_pooled_sd.is_finite() {
        return Err(Error::ExpertPool(format!(
            "median pooled sd must be positive, got {med_pooled_sd}"
        )));
    }
    if responses.is_empty() {
        return Err(Error::ExpertPool("no responses".into()));
    }
    let treatments: Vec<String> = responses
        .iter()
        .map(|r| r.treatment.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !treatments.iter().any(|t| t == reference) {
        return Err(Error::ExpertPool(format!(
            "reference treatment '{reference}' has no responses; contrasts undefined"
        )));
    }
    let index: BTreeMap<&str, usize> = treatments
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let obs: Vec<HierObs> = responses
        .iter()
        .map(|r| HierObs {
            value: r.expected_change,
            var: r.sd * r.sd / r.gamma(),
            group: index[r.treatment.as_str()],
        })
        .collect();
    let labels: Vec<String> = treatments
        .iter()
        .map(|t| ExpertPoolResult::xi_name(t))
        .collect();
    let mut samples = fit_hier_normal(
        obs,
        treatments.len(),
        med_pooled_sd,
        TauPrior::unit(),
        labels,
        config,
    )?;

    let xi_ref = ExpertPoolResult::xi_name(reference);
    for t in &treatments {
        if t == reference {
            continue;
        }
        let xi_t = ExpertPoolResult::xi_name(t);
        samples.derive(ExpertPoolResult::u_name(t), &[&xi_ref, &xi_t], |v| {
            v[1] - v[0]
        })?;
    }

    Ok(ExpertPoolResult {
        reference: reference.to_string(),
        med_pooled_sd,
        treatments,
        samples,
        warnings: Vec::new(),
    })
}

/// Expert-based shift priors: `d_1j = u^dense_1j - u^expert_1j` with the two
/// posteriors independent (separate models), so the variances add. Falls back
/// to `N(0, 10000)` where either side is missing.
pub fn expert_beta_priors(
    pool: &ExpertPoolResult,
    dense: &Network,
    sets: &TreatmentSets,
    config: &SamplerConfig,
) -> Result<BetaPriorSet> {
    let mut set = BetaPriorSet::new(&pool.reference);
    for treatment in sets.common_non_reference(&pool.reference) {
        if !pool.covers(treatment) {
            set.insert(
                treatment,
                BetaPrior::Informative(NormalPrior::vague()),
                PriorSource::Fallback,
            );
            continue;
        }
        let mut sub = config.clone();
        sub.seed = derive_seed(config.seed, &format!("dense-pairwise:{treatment}"));
        match pairwise_ma_single(dense, treatment, &sub) {
            Ok((dense_mean, dense_var)) => {
                let (expert_mean, expert_var) = pool.u_posterior(treatment)?;
                set.insert(
                    treatment,
                    BetaPrior::Informative(NormalPrior::new(
                        dense_mean - expert_mean,
                        (dense_var + expert_var).max(1e-12),
                    )?),
                    PriorSource::Expert,
                );
            }
            Err(Error::PairwiseUnavailable { .. }) => {
                set.insert(
                    treatment,
                    BetaPrior::Informative(NormalPrior::vague()),
                    PriorSource::Fallback,
                );
            }
            Err(e) => return Err(e),
        }
    }
    Ok(set)
}
