//! Arm-level random-effects network meta-analysis.
//!
//! Observed arm means follow `y_ik ~ N(theta_ik, (sd_ik^2/n_ik)/w_i)` with the
//! study latents tied together on the standardized scale,
//! `theta_ik = theta_i1 + delta_ik * sd_i_pooled`. The study contrast vectors
//! `delta_i` are exchangeable around the basic parameters through the
//! consistency relation `mu_jl = mu_1l - mu_1j`, with a compound-symmetric
//! between-study covariance (`tau^2` diagonal, `tau^2/2` off-diagonal) whose
//! determinant and inverse are closed-form.
//!
//! The same factor functions power the public log-density operations and the
//! sampler target, so fits and the operations they are tested against cannot
//! drift apart. A location shift `beta` per basic parameter (extrapolation),
//! per-study variance-inflation weights and a node-split direct-effect
//! parameter all plug into this one model.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::mcmc::{
    run_sampler, CustomMove, ParameterBlock, PosteriorSamples, SamplerConfig, Support, Target,
};
use crate::model::{pooled_sd, require_connected, Network};
use crate::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Non-informative location prior variance.
pub const VAGUE_VARIANCE: f64 = 10_000.0;

/// Vague prior variance for study baselines (outcome units).
const BASELINE_PRIOR_VARIANCE: f64 = 10_000.0;

/// Normal prior with positive variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPrior {
    pub mean: f64,
    pub variance: f64,
}

impl NormalPrior {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidPrior(format!(
                "normal prior needs finite mean and positive variance, got N({mean}, {variance})"
            )));
        }
        Ok(NormalPrior { mean, variance })
    }

    /// The non-informative default `N(0, 10000)`.
    pub fn vague() -> Self {
        NormalPrior {
            mean: 0.0,
            variance: VAGUE_VARIANCE,
        }
    }

    pub fn is_vague(&self) -> bool {
        self.mean == 0.0 && self.variance == VAGUE_VARIANCE
    }

    fn log_density(&self, x: f64) -> f64 {
        normal_lpdf(x, self.mean, self.variance)
    }
}

/// Location priors for the basic parameters `mu_{1j}`; treatments without an
/// explicit entry get the non-informative default.
#[derive(Debug, Clone, Default)]
pub struct MuPrior {
    entries: BTreeMap<String, NormalPrior>,
}

impl MuPrior {
    /// All-vague prior set.
    pub fn vague() -> Self {
        MuPrior::default()
    }

    pub fn insert(&mut self, treatment: impl Into<String>, prior: NormalPrior) {
        self.entries.insert(treatment.into(), prior);
    }

    pub fn with_entry(mut self, treatment: impl Into<String>, prior: NormalPrior) -> Self {
        self.insert(treatment, prior);
        self
    }

    pub fn for_treatment(&self, treatment: &str) -> NormalPrior {
        self.entries
            .get(treatment)
            .copied()
            .unwrap_or_else(NormalPrior::vague)
    }

    pub fn entries(&self) -> &BTreeMap<String, NormalPrior> {
        &self.entries
    }
}

/// Half-normal prior for the heterogeneity standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauPrior {
    pub scale: f64,
}

impl Default for TauPrior {
    fn default() -> Self {
        TauPrior::unit()
    }
}

impl TauPrior {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidPrior(format!(
                "half-normal scale must be positive, got {scale}"
            )));
        }
        Ok(TauPrior { scale })
    }

    /// The usual weakly-informative HN(1).
    pub fn unit() -> Self {
        TauPrior { scale: 1.0 }
    }

    fn log_density(&self, tau: f64) -> f64 {
        // 2 phi(tau/s)/s on tau >= 0
        std::f64::consts::LN_2 - 0.5 * LN_2PI - self.scale.ln() - 0.5 * (tau / self.scale).powi(2)
    }
}

/// Full parameter state of the model in the centered parameterization:
/// `mu` holds the basic parameters in [`Network::basic_treatments`] order,
/// `theta_baseline` the per-study baseline means (outcome units) and `delta`
/// the per-study contrast vectors (standardized units).
#[derive(Debug, Clone, PartialEq)]
pub struct NmaState {
    pub mu: Vec<f64>,
    pub tau: f64,
    pub theta_baseline: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
}

impl NmaState {
    /// A state with zero effects, `tau` at 0.1 and latents at the observed
    /// data (the sampler's initialization point).
    pub fn initial(network: &Network) -> Result<Self> {
        let n_basic = network.basic_treatments().len();
        let mut theta_baseline = Vec::with_capacity(network.studies().len());
        let mut delta = Vec::with_capacity(network.studies().len());
        for study in network.studies() {
            let s = pooled_sd(study)?;
            let y1 = study.arms()[0].mean();
            theta_baseline.push(y1);
            delta.push(
                study.arms()[1..]
                    .iter()
                    .map(|a| (a.mean() - y1) / s)
                    .collect(),
            );
        }
        Ok(NmaState {
            mu: vec![0.0; n_basic],
            tau: 0.1,
            theta_baseline,
            delta,
        })
    }

    fn check_dimensions(&self, network: &Network) -> Result<()> {
        let n_basic = network.basic_treatments().len();
        if self.mu.len() != n_basic {
            return Err(Error::Sampler(format!(
                "state has {} basic parameters, network needs {}",
                self.mu.len(),
                n_basic
            )));
        }
        let n_studies = network.studies().len();
        if self.theta_baseline.len() != n_studies || self.delta.len() != n_studies {
            return Err(Error::Sampler("state/study dimension mismatch".into()));
        }
        for (study, d) in network.studies().iter().zip(&self.delta) {
            if d.len() != study.arm_count() - 1 {
                return Err(Error::Sampler(format!(
                    "study '{}' needs {} contrasts, state has {}",
                    study.id(),
                    study.arm_count() - 1,
                    d.len()
                )));
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn normal_lpdf(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + variance.ln() + r * r / variance)
}

/// Weighted arm log-likelihood with precomputed `ln(se^2)`; the `w = 1` path
/// is bit-identical to the unweighted density.
#[inline]
fn arm_loglik(y: f64, theta: f64, se2: f64, ln_se2: f64, w: f64, ln_w: f64) -> f64 {
    let r = y - theta;
    -0.5 * (LN_2PI + (ln_se2 - ln_w) + w * r * r / se2)
}

/// Log density of a compound-symmetric multivariate normal
/// (`tau^2` diagonal, `tau^2/2` off-diagonal) evaluated on residuals.
#[inline]
pub(crate) fn cs_mvn_lpdf(residuals: &[f64], tau: f64) -> f64 {
    let m = residuals.len() as f64;
    let sum: f64 = residuals.iter().sum();
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    let quad = (2.0 / (tau * tau)) * (ss - sum * sum / (m + 1.0));
    let logdet = 2.0 * m * tau.ln() + (m + 1.0).ln() - m * std::f64::consts::LN_2;
    -0.5 * (m * LN_2PI + logdet + quad)
}

/// Arm-level log-likelihood (Gaussian with squared standard error `sd^2/n`,
/// inflated by `1/w_i`). Weights default to 1 and must lie in (0, 1].
pub fn log_likelihood(
    network: &Network,
    state: &NmaState,
    weights: Option<&BTreeMap<String, f64>>,
) -> Result<f64> {
    state.check_dimensions(network)?;
    let mut total = 0.0;
    for (i, study) in network.studies().iter().enumerate() {
        let w = weights
            .and_then(|m| m.get(study.id()))
            .copied()
            .unwrap_or(1.0);
        if !(w > 0.0) || w > 1.0 {
            return Err(Error::InvalidPrior(format!(
                "study '{}': weight {w} outside (0, 1] gives a non-positive or deflated variance",
                study.id()
            )));
        }
        let ln_w = w.ln();
        let s = pooled_sd(study)?;
        let theta0 = state.theta_baseline[i];
        for (k, arm) in study.arms().iter().enumerate() {
            let theta = if k == 0 {
                theta0
            } else {
                theta0 + state.delta[i][k - 1] * s
            };
            let se2 = arm.se2();
            total += arm_loglik(arm.mean(), theta, se2, se2.ln(), w, ln_w);
        }
    }
    Ok(total)
}

/// Random-effects log density: each study's contrast vector around the basic
/// parameters mapped through its treatments, compound-symmetric covariance.
pub fn log_random_effects(network: &Network, state: &NmaState) -> Result<f64> {
    state.check_dimensions(network)?;
    if !(state.tau > 0.0) {
        return Err(Error::InvalidPrior(format!(
            "heterogeneity sd must be positive, got {}",
            state.tau
        )));
    }
    let basic: BTreeMap<&str, usize> = network
        .basic_treatments()
        .iter()
        .enumerate()
        .map(|(j, t)| (*t, j))
        .collect();
    let effect = |treatment: &str| -> f64 { basic.get(treatment).map_or(0.0, |&j| state.mu[j]) };
    let mut total = 0.0;
    let mut residuals = Vec::new();
    for (i, study) in network.studies().iter().enumerate() {
        let base = effect(study.arms()[0].treatment());
        residuals.clear();
        for (k, arm) in study.arms()[1..].iter().enumerate() {
            residuals.push(state.delta[i][k] - (effect(arm.treatment()) - base));
        }
        total += cs_mvn_lpdf(&residuals, state.tau);
    }
    Ok(total)
}

/// Column name of the basic parameter for `treatment` in fitted samples.
pub fn mu_name(treatment: &str) -> String {
    format!("mu[{treatment}]")
}

/// Per-draw relative effect `mu_jl = mu_1l - mu_1j` (pooled over chains).
/// `j = l` gives zeros; the reference has effect zero.
pub fn relative_effect(
    samples: &PosteriorSamples,
    reference: &str,
    j: &str,
    l: &str,
) -> Result<Vec<f64>> {
    let column = |t: &str| -> Result<Option<Vec<f64>>> {
        if t == reference {
            return Ok(None);
        }
        let name = mu_name(t);
        if !samples.contains(&name) {
            return Err(Error::UnknownTreatment(t.to_string()));
        }
        samples.pooled(&name).map(Some)
    };
    let lc = column(l)?;
    if j == l {
        let n = samples.n_chains() * samples.n_draws();
        return Ok(vec![0.0; n]);
    }
    let jc = column(j)?;
    Ok(match (jc, lc) {
        (None, Some(lv)) => lv,
        (Some(jv), None) => jv.into_iter().map(|v| -v).collect(),
        (Some(jv), Some(lv)) => lv.iter().zip(&jv).map(|(a, b)| a - b).collect(),
        (None, None) => unreachable!("j == l handled above"),
    })
}

/// Standard random-effects NMA with non-informative or supplied priors.
pub fn fit_standard_nma(
    network: &Network,
    mu_prior: &MuPrior,
    tau_prior: &TauPrior,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    require_connected(network)?;
    let spec = ModelSpec {
        network,
        mu_prior,
        tau_prior,
        betas: None,
        weights: None,
        split: None,
    };
    let built = build_model(&spec)?;
    run_sampler(&built.model, built.blocks, built.moves, config)
}

/// Naive synthesis: both subgroups concatenated (sparse first) and analysed
/// as one population over the union treatment set.
pub fn fit_naive_synthesis(
    dense: &Network,
    sparse: &Network,
    mu_prior: &MuPrior,
    tau_prior: &TauPrior,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    let merged = sparse.merged(dense)?;
    fit_standard_nma(&merged, mu_prior, tau_prior, config)
}

// ---------------------------------------------------------------------------
// Model construction shared by standard NMA, the stage-1 extrapolation model
// and node splitting.
// ---------------------------------------------------------------------------

/// Location-shift treatment for one basic parameter.
#[derive(Debug, Clone, Copy)]
pub(crate) enum BetaSpec {
    Fixed(f64),
    Sampled(NormalPrior),
}

/// Prior for a sampled variance-inflation weight.
#[derive(Debug, Clone, Copy)]
pub(crate) enum WeightPrior {
    Beta { a: f64, b: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl WeightPrior {
    pub(crate) fn mean(&self) -> f64 {
        match self {
            WeightPrior::Beta { a, b } => a / (a + b),
            WeightPrior::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    fn log_density(&self, w: f64) -> f64 {
        match self {
            WeightPrior::Beta { a, b } => {
                (a - 1.0) * w.ln() + (b - 1.0) * (1.0 - w).ln()
                    - statrs::function::beta::ln_beta(*a, *b)
            }
            WeightPrior::Uniform { lo, hi } => {
                if w >= *lo && w <= *hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Per-study likelihood weight.
#[derive(Debug, Clone, Copy)]
pub(crate) enum WeightSpec {
    Fixed(f64),
    Sampled(WeightPrior),
}

/// Node-split marker: the comparison `head vs base`. Studies with direct
/// evidence must already be rebased so `base` is their baseline arm.
#[derive(Debug, Clone)]
pub(crate) struct SplitSpec {
    pub base: String,
    pub head: String,
}

pub(crate) struct ModelSpec<'a> {
    pub network: &'a Network,
    pub mu_prior: &'a MuPrior,
    pub tau_prior: &'a TauPrior,
    /// Per basic treatment (in `basic_treatments` order); `None` fits the
    /// plain model without shift parameters.
    pub betas: Option<Vec<BetaSpec>>,
    /// Per study; `None` means all weights fixed at 1.
    pub weights: Option<Vec<WeightSpec>>,
    pub split: Option<SplitSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Theta0(usize),
    Delta(usize),
    Mu,
    Tau,
    Beta,
    Weight(usize),
    DirectSplit,
}

struct StudyTerms {
    id: String,
    y: Vec<f64>,
    se2: Vec<f64>,
    ln_se2: Vec<f64>,
    pooled_sd: f64,
    /// Basic-parameter index per arm; `None` for the reference treatment.
    arm_basic: Vec<Option<usize>>,
    /// Per contrast (arm k >= 1): whether this edge is the split comparison.
    split_edge: Vec<bool>,
    weight: WeightSpec,
    /// Block index of the sampled weight, if any.
    weight_block: Option<usize>,
    theta0_block: usize,
    delta_block: usize,
}

pub(crate) struct NmaModel {
    studies: Vec<StudyTerms>,
    n_basic: usize,
    mu_priors: Vec<NormalPrior>,
    tau_prior: TauPrior,
    betas: Option<Vec<BetaSpec>>,
    /// Per basic parameter: coordinate within the beta block when sampled.
    beta_coord: Vec<Option<usize>>,
    mu_block: usize,
    tau_block: usize,
    beta_block: Option<usize>,
    dsplit_block: Option<usize>,
    kinds: Vec<BlockKind>,
    split_prior: NormalPrior,
}

pub(crate) struct BuiltModel {
    pub model: NmaModel,
    pub blocks: Vec<ParameterBlock>,
    pub moves: Vec<CustomMove>,
}

impl NmaModel {
    #[inline]
    fn beta_value(&self, state: &[Vec<f64>], j: usize) -> f64 {
        match &self.betas {
            None => 0.0,
            Some(betas) => match betas[j] {
                BetaSpec::Fixed(v) => v,
                BetaSpec::Sampled(_) => {
                    state[self.beta_block.expect("beta block exists")]
                        [self.beta_coord[j].expect("sampled coord")]
                }
            },
        }
    }

    /// Basic-parameter effect (`None` = reference, effect 0). The shift
    /// parameters never enter the consistency means: the dense data identify
    /// `mu` itself and the extrapolation `mu* = mu - beta` is a derived
    /// quantity whose beta component is driven by its informative prior.
    #[inline]
    fn effect(&self, state: &[Vec<f64>], basic: Option<usize>) -> f64 {
        match basic {
            None => 0.0,
            Some(j) => state[self.mu_block][j],
        }
    }

    fn study_loglik(&self, state: &[Vec<f64>], i: usize) -> f64 {
        let st = &self.studies[i];
        let (w, ln_w) = match st.weight {
            WeightSpec::Fixed(v) => (v, v.ln()),
            WeightSpec::Sampled(_) => {
                let w = state[st.weight_block.expect("weight block")][0];
                (w, w.ln())
            }
        };
        let theta0 = state[st.theta0_block][0];
        let delta = &state[st.delta_block];
        let mut total = arm_loglik(st.y[0], theta0, st.se2[0], st.ln_se2[0], w, ln_w);
        for k in 1..st.y.len() {
            let theta = theta0 + delta[k - 1] * st.pooled_sd;
            total += arm_loglik(st.y[k], theta, st.se2[k], st.ln_se2[k], w, ln_w);
        }
        total
    }

    fn study_random_effects(&self, state: &[Vec<f64>], i: usize) -> f64 {
        let st = &self.studies[i];
        let tau = state[self.tau_block][0];
        let base = self.effect(state, st.arm_basic[0]);
        let delta = &state[st.delta_block];
        let m = delta.len();
        let mut stack = [0.0_f64; 8];
        let mut heap;
        let res: &mut [f64] = if m <= 8 {
            &mut stack[..m]
        } else {
            heap = vec![0.0; m];
            &mut heap
        };
        for k in 0..m {
            let mean = if st.split_edge[k] {
                state[self.dsplit_block.expect("split block")][0]
            } else {
                self.effect(state, st.arm_basic[k + 1]) - base
            };
            res[k] = delta[k] - mean;
        }
        cs_mvn_lpdf(res, tau)
    }

    fn study_theta0_prior(&self, state: &[Vec<f64>], i: usize) -> f64 {
        normal_lpdf(
            state[self.studies[i].theta0_block][0],
            0.0,
            BASELINE_PRIOR_VARIANCE,
        )
    }

    fn study_weight_prior(&self, state: &[Vec<f64>], i: usize) -> f64 {
        let st = &self.studies[i];
        match st.weight {
            WeightSpec::Fixed(_) => 0.0,
            WeightSpec::Sampled(prior) => {
                prior.log_density(state[st.weight_block.expect("weight block")][0])
            }
        }
    }

    fn mu_prior_term(&self, state: &[Vec<f64>]) -> f64 {
        let mu = &state[self.mu_block];
        self.mu_priors
            .iter()
            .zip(mu)
            .map(|(p, &v)| p.log_density(v))
            .sum()
    }

    fn tau_prior_term(&self, state: &[Vec<f64>]) -> f64 {
        self.tau_prior.log_density(state[self.tau_block][0])
    }

    fn beta_prior_term(&self, state: &[Vec<f64>]) -> f64 {
        match &self.betas {
            None => 0.0,
            Some(betas) => betas
                .iter()
                .enumerate()
                .map(|(j, b)| match b {
                    BetaSpec::Fixed(_) => 0.0,
                    BetaSpec::Sampled(prior) => prior.log_density(self.beta_value(state, j)),
                })
                .sum(),
        }
    }

    fn dsplit_prior_term(&self, state: &[Vec<f64>]) -> f64 {
        match self.dsplit_block {
            None => 0.0,
            Some(b) => self.split_prior.log_density(state[b][0]),
        }
    }
}

impl Target for NmaModel {
    fn log_density(&self, state: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.studies.len() {
            total += self.study_loglik(state, i);
            total += self.study_random_effects(state, i);
            total += self.study_theta0_prior(state, i);
            total += self.study_weight_prior(state, i);
        }
        total += self.mu_prior_term(state);
        total += self.tau_prior_term(state);
        total += self.beta_prior_term(state);
        total += self.dsplit_prior_term(state);
        total
    }

    fn delta(&self, state: &[Vec<f64>], updates: &[(usize, Vec<f64>)]) -> f64 {
        let mut lik_studies: Vec<usize> = Vec::new();
        let mut re_studies: Vec<usize> = Vec::new();
        let mut re_all = false;
        let mut theta0_prior: Vec<usize> = Vec::new();
        let mut weight_prior: Vec<usize> = Vec::new();
        let mut mu_p = false;
        let mut tau_p = false;
        let mut beta_p = false;
        let mut dsplit_p = false;
        let mut view: Vec<Vec<f64>> = state.to_vec();
        for (b, values) in updates {
            view[*b] = values.clone();
            match self.kinds[*b] {
                BlockKind::Theta0(i) => {
                    lik_studies.push(i);
                    theta0_prior.push(i);
                }
                BlockKind::Delta(i) => {
                    lik_studies.push(i);
                    re_studies.push(i);
                }
                BlockKind::Mu => {
                    re_all = true;
                    mu_p = true;
                }
                BlockKind::Tau => {
                    re_all = true;
                    tau_p = true;
                }
                BlockKind::Beta => {
                    beta_p = true;
                }
                BlockKind::Weight(i) => {
                    lik_studies.push(i);
                    weight_prior.push(i);
                }
                BlockKind::DirectSplit => {
                    re_all = true;
                    dsplit_p = true;
                }
            }
        }

        let mut delta = 0.0;
        lik_studies.sort_unstable();
        lik_studies.dedup();
        for &i in &lik_studies {
            delta += self.study_loglik(&view, i) - self.study_loglik(state, i);
        }
        if re_all {
            for i in 0..self.studies.len() {
                delta += self.study_random_effects(&view, i) - self.study_random_effects(state, i);
            }
        } else {
            re_studies.sort_unstable();
            re_studies.dedup();
            for &i in &re_studies {
                delta += self.study_random_effects(&view, i) - self.study_random_effects(state, i);
            }
        }
        for &i in &theta0_prior {
            delta += self.study_theta0_prior(&view, i) - self.study_theta0_prior(state, i);
        }
        for &i in &weight_prior {
            delta += self.study_weight_prior(&view, i) - self.study_weight_prior(state, i);
        }
        if mu_p {
            delta += self.mu_prior_term(&view) - self.mu_prior_term(state);
        }
        if tau_p {
            delta += self.tau_prior_term(&view) - self.tau_prior_term(state);
        }
        if beta_p {
            delta += self.beta_prior_term(&view) - self.beta_prior_term(state);
        }
        if dsplit_p {
            delta += self.dsplit_prior_term(&view) - self.dsplit_prior_term(state);
        }
        delta
    }

    fn attribute_non_finite(&self, state: &[Vec<f64>]) -> Option<String> {
        for (i, st) in self.studies.iter().enumerate() {
            if !self.study_loglik(state, i).is_finite() {
                return Some(format!("theta[{}]", st.id));
            }
            if !self.study_random_effects(state, i).is_finite() {
                return Some(format!("delta[{}]", st.id));
            }
            if !self.study_weight_prior(state, i).is_finite() {
                return Some(format!("w[{}]", st.id));
            }
        }
        if !self.mu_prior_term(state).is_finite() {
            return Some("mu".into());
        }
        if !self.tau_prior_term(state).is_finite() {
            return Some("tau".into());
        }
        if !self.beta_prior_term(state).is_finite() {
            return Some("beta".into());
        }
        if !self.dsplit_prior_term(state).is_finite() {
            return Some("d_direct".into());
        }
        None
    }
}

pub(crate) fn build_model(spec: &ModelSpec) -> Result<BuiltModel> {
    let network = spec.network;
    let basic: Vec<String> = network
        .basic_treatments()
        .iter()
        .map(|t| t.to_string())
        .collect();
    let basic_index: BTreeMap<&str, usize> = basic
        .iter()
        .enumerate()
        .map(|(j, t)| (t.as_str(), j))
        .collect();
    let n_basic = basic.len();
    if n_basic == 0 {
        return Err(Error::InvalidNetwork {
            subgroup: network.subgroup().to_string(),
            reason: "only the reference treatment present".into(),
        });
    }
    if let Some(betas) = &spec.betas {
        if betas.len() != n_basic {
            return Err(Error::InvalidPrior(format!(
                "{} shift priors for {} basic parameters",
                betas.len(),
                n_basic
            )));
        }
    }
    if let Some(weights) = &spec.weights {
        if weights.len() != network.studies().len() {
            return Err(Error::InvalidPrior(format!(
                "{} weights for {} studies",
                weights.len(),
                network.studies().len()
            )));
        }
    }
    if let Some(split) = &spec.split {
        for t in [&split.base, &split.head] {
            if !network.treatments().contains(t) {
                return Err(Error::UnknownTreatment(t.clone()));
            }
        }
    }

    let mut blocks: Vec<ParameterBlock> = Vec::new();
    let mut kinds: Vec<BlockKind> = Vec::new();
    let mut studies: Vec<StudyTerms> = Vec::new();

    // Per-study latent blocks in study order.
    for (i, study) in network.studies().iter().enumerate() {
        let s = pooled_sd(study)?;
        let y: Vec<f64> = study.arms().iter().map(|a| a.mean()).collect();
        let se2: Vec<f64> = study.arms().iter().map(|a| a.se2()).collect();
        let ln_se2: Vec<f64> = se2.iter().map(|v| v.ln()).collect();
        let arm_basic: Vec<Option<usize>> = study
            .arms()
            .iter()
            .map(|a| basic_index.get(a.treatment()).copied())
            .collect();
        let split_edge: Vec<bool> = match &spec.split {
            None => vec![false; study.arm_count() - 1],
            Some(split) => study.arms()[1..]
                .iter()
                .map(|a| study.arms()[0].treatment() == split.base && a.treatment() == split.head)
                .collect(),
        };

        let theta0_block = blocks.len();
        blocks.push(
            ParameterBlock::new(
                format!("theta[{}]", study.id()),
                Support::Unbounded,
                vec![y[0]],
            )
            .with_prescale(vec![se2[0].sqrt()])
            .latent(),
        );
        kinds.push(BlockKind::Theta0(i));

        let delta_block = blocks.len();
        let delta_init: Vec<f64> = study.arms()[1..]
            .iter()
            .map(|a| (a.mean() - y[0]) / s)
            .collect();
        let delta_prescale: Vec<f64> = study.arms()[1..]
            .iter()
            .map(|a| ((a.se2() + se2[0]).sqrt() / s).max(1e-3))
            .collect();
        blocks.push(
            ParameterBlock::new(
                format!("delta[{}]", study.id()),
                Support::Unbounded,
                delta_init,
            )
            .with_prescale(delta_prescale)
            .latent(),
        );
        kinds.push(BlockKind::Delta(i));

        studies.push(StudyTerms {
            id: study.id().to_string(),
            y,
            se2,
            ln_se2,
            pooled_sd: s,
            arm_basic,
            split_edge,
            weight: WeightSpec::Fixed(1.0),
            weight_block: None,
            theta0_block,
            delta_block,
        });
    }

    let mu_block = blocks.len();
    blocks.push(
        ParameterBlock::new("mu", Support::Unbounded, vec![0.0; n_basic])
            .with_labels(basic.iter().map(|t| mu_name(t)).collect()),
    );
    kinds.push(BlockKind::Mu);

    let tau_block = blocks.len();
    blocks.push(ParameterBlock::new("tau", Support::Positive, vec![0.1]));
    kinds.push(BlockKind::Tau);

    // Sampled shift parameters share one block.
    let mut beta_coord: Vec<Option<usize>> = vec![None; n_basic];
    let mut beta_block = None;
    if let Some(betas) = &spec.betas {
        let mut init = Vec::new();
        let mut labels = Vec::new();
        let mut prescale = Vec::new();
        for (j, b) in betas.iter().enumerate() {
            if let BetaSpec::Sampled(prior) = b {
                beta_coord[j] = Some(init.len());
                init.push(prior.mean);
                labels.push(format!("beta[{}]", basic[j]));
                prescale.push(prior.variance.sqrt().clamp(1e-4, 10.0));
            }
        }
        if !init.is_empty() {
            beta_block = Some(blocks.len());
            blocks.push(
                ParameterBlock::new("beta", Support::Unbounded, init)
                    .with_labels(labels)
                    .with_prescale(prescale),
            );
            kinds.push(BlockKind::Beta);
        }
    }

    let mut dsplit_block = None;
    if let Some(split) = &spec.split {
        dsplit_block = Some(blocks.len());
        blocks.push(
            ParameterBlock::new("d_direct", Support::Unbounded, vec![0.0]).with_labels(vec![
                format!("direct[{} vs {}]", split.head, split.base),
            ]),
        );
        kinds.push(BlockKind::DirectSplit);
    }

    // Sampled weights, one scalar block per downweighted study, in study order.
    if let Some(weights) = &spec.weights {
        for (i, w) in weights.iter().enumerate() {
            match w {
                WeightSpec::Fixed(v) => {
                    if !(*v > 0.0) || *v > 1.0 {
                        return Err(Error::InvalidPrior(format!(
                            "fixed weight {v} outside (0, 1]"
                        )));
                    }
                    studies[i].weight = WeightSpec::Fixed(*v);
                }
                WeightSpec::Sampled(prior) => {
                    let block = blocks.len();
                    blocks.push(
                        ParameterBlock::new(
                            format!("w[{}]", studies[i].id),
                            Support::UnitInterval,
                            vec![prior.mean()],
                        )
                        .with_jitter(0.25),
                    );
                    kinds.push(BlockKind::Weight(i));
                    studies[i].weight = WeightSpec::Sampled(*prior);
                    studies[i].weight_block = Some(block);
                }
            }
        }
    }

    let mu_priors: Vec<NormalPrior> = basic
        .iter()
        .map(|t| spec.mu_prior.for_treatment(t))
        .collect();

    let model = NmaModel {
        studies,
        n_basic,
        mu_priors,
        tau_prior: *spec.tau_prior,
        betas: spec.betas.clone(),
        beta_coord,
        mu_block,
        tau_block,
        beta_block,
        dsplit_block,
        kinds,
        split_prior: NormalPrior::vague(),
    };

    let moves = build_moves(&model);
    Ok(BuiltModel {
        model,
        blocks,
        moves,
    })
}

/// Edge bookkeeping shared by the structured moves.
struct Edges {
    /// Per study: (delta block, baseline basic index, per-edge arm basic
    /// index, per-edge split flag).
    studies: Vec<(usize, Option<usize>, Vec<Option<usize>>, Vec<bool>)>,
    mu_block: usize,
    tau_block: usize,
    dsplit_block: Option<usize>,
    n_basic: usize,
}

impl Edges {
    fn effect(&self, state: &[Vec<f64>], basic: &Option<usize>) -> f64 {
        match basic {
            None => 0.0,
            Some(j) => state[self.mu_block][*j],
        }
    }
}

/// Structured moves that decouple the centered parameterization: a shear
/// shifting `mu` together with all linked contrasts, a heterogeneity rescale
/// moving contrasts with `tau`, and the analogous shear for the node-split
/// direct effect.
fn build_moves(model: &NmaModel) -> Vec<CustomMove> {
    let mut moves = Vec::new();

    let edges = Arc::new(Edges {
        studies: model
            .studies
            .iter()
            .map(|st| {
                (
                    st.delta_block,
                    st.arm_basic[0],
                    st.arm_basic[1..].to_vec(),
                    st.split_edge.clone(),
                )
            })
            .collect(),
        mu_block: model.mu_block,
        tau_block: model.tau_block,
        dsplit_block: model.dsplit_block,
        n_basic: model.n_basic,
    });

    // mu shear: mu_j += eps_j, contrasts follow their consistency means.
    let e = Arc::clone(&edges);
    moves.push(CustomMove {
        name: "mu_shift".into(),
        dimension: e.n_basic,
        initial_scale: 0.4 / (e.n_basic as f64).sqrt(),
        propose: Box::new(move |state, scale, rng| {
            let eps: Vec<f64> = (0..e.n_basic)
                .map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let mut updates = Vec::with_capacity(e.studies.len() + 1);
            let mu_new: Vec<f64> = state[e.mu_block]
                .iter()
                .zip(&eps)
                .map(|(m, d)| m + d)
                .collect();
            updates.push((e.mu_block, mu_new));
            let shift = |basic: &Option<usize>| basic.map_or(0.0, |j| eps[j]);
            for (delta_block, base, arms, split) in &e.studies {
                let delta = &state[*delta_block];
                let new: Vec<f64> = delta
                    .iter()
                    .enumerate()
                    .map(|(k, d)| {
                        if split[k] {
                            *d
                        } else {
                            d + shift(&arms[k]) - shift(base)
                        }
                    })
                    .collect();
                updates.push((*delta_block, new));
            }
            (updates, 0.0)
        }),
    });

    // tau rescale: tau' = tau e^eps, contrasts contract toward their means.
    let e = Arc::clone(&edges);
    let total_contrasts: usize = model.studies.iter().map(|s| s.y.len() - 1).sum();
    moves.push(CustomMove {
        name: "tau_rescale".into(),
        dimension: 1,
        initial_scale: 0.5,
        propose: Box::new(move |state, scale, rng| {
            let eps: f64 = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
            let factor = eps.exp();
            let tau = state[e.tau_block][0];
            let mut updates = Vec::with_capacity(e.studies.len() + 1);
            updates.push((e.tau_block, vec![tau * factor]));
            for (delta_block, base, arms, split) in &e.studies {
                let base_effect = e.effect(state, base);
                let delta = &state[*delta_block];
                let new: Vec<f64> = delta
                    .iter()
                    .enumerate()
                    .map(|(k, d)| {
                        let mean = if split[k] {
                            state[e.dsplit_block.expect("split block")][0]
                        } else {
                            e.effect(state, &arms[k]) - base_effect
                        };
                        mean + factor * (d - mean)
                    })
                    .collect();
                updates.push((*delta_block, new));
            }
            // |det| of (tau, contrasts) -> (tau e^eps, rescaled contrasts)
            let correction = eps * (1.0 + total_contrasts as f64);
            (updates, correction)
        }),
    });

    // direct-effect shear for node splitting.
    if let Some(dsplit_block) = model.dsplit_block {
        let e = Arc::clone(&edges);
        moves.push(CustomMove {
            name: "direct_shift".into(),
            dimension: 1,
            initial_scale: 0.4,
            propose: Box::new(move |state, scale, rng| {
                let eps: f64 = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let mut updates = vec![(dsplit_block, vec![state[dsplit_block][0] + eps])];
                for (delta_block, _, _, split) in &e.studies {
                    if split.iter().any(|s| *s) {
                        let new: Vec<f64> = state[*delta_block]
                            .iter()
                            .enumerate()
                            .map(|(k, d)| if split[k] { d + eps } else { *d })
                            .collect();
                        updates.push((*delta_block, new));
                    }
                }
                (updates, 0.0)
            }),
        });
    }

    moves
}
