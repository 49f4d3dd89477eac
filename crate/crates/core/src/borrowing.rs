//! Two-stage information borrowing.
//!
//! Stage 1 refits the dense network with a location shift `beta_{1j}` per
//! basic parameter (its prior built by the [`crate::priors`] module) and
//! optional per-study variance-inflation weights `w_i` in (0,1], then exposes
//! the extrapolated effects `mu*_{1j} = mu_{1j} - beta_{1j}` per draw. The
//! predictive distribution `N(mu*, tau^2)` is moment-matched into a normal
//! prior per comparison, and stage 2 fits the sparse network with those
//! priors in place of the non-informative defaults.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mcmc::{derive_seed, run_sampler, PosteriorSamples, SamplerConfig};
use crate::model::{require_connected, Network, TreatmentSets};
use crate::nma::{
    fit_standard_nma, mu_name, BetaSpec, ModelSpec, MuPrior, NormalPrior, TauPrior, WeightPrior,
    WeightSpec,
};
use crate::{Error, Result};

/// Prior for a per-study scale weight. Mass above 1 is disallowed: weights
/// can only downweight external evidence, never amplify it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalePrior {
    Fixed(f64),
    Beta { a: f64, b: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ScalePrior {
    pub fn fixed(v: f64) -> Result<Self> {
        if !(v > 0.0) || v > 1.0 {
            return Err(Error::InvalidPrior(format!(
                "fixed scale weight must lie in (0, 1], got {v}"
            )));
        }
        Ok(ScalePrior::Fixed(v))
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::InvalidPrior(format!(
                "beta scale prior needs positive shapes, got Beta({a}, {b})"
            )));
        }
        Ok(ScalePrior::Beta { a, b })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0) || !(hi > lo) || hi > 1.0 {
            return Err(Error::InvalidPrior(format!(
                "uniform scale prior needs 0 < lo < hi <= 1, got Unif({lo}, {hi})"
            )));
        }
        Ok(ScalePrior::Uniform { lo, hi })
    }

    /// The moderate-downweight default Beta(3, 3).
    pub fn moderate() -> Self {
        ScalePrior::Beta { a: 3.0, b: 3.0 }
    }

    pub fn prior_mean(&self) -> f64 {
        match self {
            ScalePrior::Fixed(v) => *v,
            ScalePrior::Beta { a, b } => a / (a + b),
            ScalePrior::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn is_fixed_one(&self) -> bool {
        matches!(self, ScalePrior::Fixed(v) if *v == 1.0)
    }

    pub(crate) fn to_weight_spec(self) -> WeightSpec {
        match self {
            ScalePrior::Fixed(v) => WeightSpec::Fixed(v),
            ScalePrior::Beta { a, b } => WeightSpec::Sampled(WeightPrior::Beta { a, b }),
            ScalePrior::Uniform { lo, hi } => {
                WeightSpec::Sampled(WeightPrior::Uniform { lo, hi })
            }
        }
    }
}

impl std::fmt::Display for ScalePrior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalePrior::Fixed(v) => write!(f, "fixed({v})"),
            ScalePrior::Beta { a, b } => write!(f, "beta({a},{b})"),
            ScalePrior::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
        }
    }
}

/// How stage-1 weights are assigned to dense-network studies.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    /// No downweighting; the dense network is restricted to studies whose
    /// treatments all lie in `T_c`.
    None,
    /// Restrict to `T_c` and downweight studies flagged high risk-of-bias.
    Rob(ScalePrior),
    /// Keep the full dense network; downweight studies containing any
    /// treatment outside `T_c`.
    NonCommonTreatment(ScalePrior),
}

/// The dense network after scheme-dependent restriction, plus one scale prior
/// per retained study.
#[derive(Debug, Clone)]
pub struct WeightedNetwork {
    pub network: Network,
    pub weights: BTreeMap<String, ScalePrior>,
}

/// Applies a weighting scheme to the dense network.
pub fn assign_weights(
    dense: &Network,
    sets: &TreatmentSets,
    scheme: &WeightScheme,
) -> Result<WeightedNetwork> {
    let in_common =
        |s: &crate::model::Study| s.arms().iter().all(|a| sets.t_c.contains(a.treatment()));
    match scheme {
        WeightScheme::None => {
            let network = dense.restricted(in_common)?;
            let weights = network
                .studies()
                .iter()
                .map(|s| (s.id().to_string(), ScalePrior::Fixed(1.0)))
                .collect();
            Ok(WeightedNetwork { network, weights })
        }
        WeightScheme::Rob(prior) => {
            let network = dense.restricted(in_common)?;
            let mut weights = BTreeMap::new();
            for study in network.studies() {
                let high_rob = study.high_rob().ok_or_else(|| Error::InvalidStudy {
                    id: study.id().to_string(),
                    reason: "risk-of-bias flag required by the RoB downweight scheme".into(),
                })?;
                let w = if high_rob {
                    *prior
                } else {
                    ScalePrior::Fixed(1.0)
                };
                weights.insert(study.id().to_string(), w);
            }
            Ok(WeightedNetwork {
                network,
                weights,
            })
        }
        WeightScheme::NonCommonTreatment(prior) => {
            let weights = dense
                .studies()
                .iter()
                .map(|s| {
                    let w = if in_common(s) {
                        ScalePrior::Fixed(1.0)
                    } else {
                        *prior
                    };
                    (s.id().to_string(), w)
                })
                .collect();
            Ok(WeightedNetwork {
                network: dense.clone(),
                weights,
            })
        }
    }
}

/// Where a shift prior came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorSource {
    Data,
    Expert,
    Fallback,
    Fixed,
}

impl std::fmt::Display for PriorSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PriorSource::Data => "data",
            PriorSource::Expert => "expert",
            PriorSource::Fallback => "fallback",
            PriorSource::Fixed => "fixed",
        };
        f.write_str(s)
    }
}

/// Shift prior for one basic comparison: a proper normal or a point mass
/// (point masses are not sampled; they are constants in the model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPrior {
    Informative(NormalPrior),
    Degenerate(f64),
}

/// One shift prior per basic comparison `{reference, j}`. Comparisons absent
/// from the set fall back to `N(0, 10000)` when the stage-1 model is built,
/// which keeps the prior assignment total.
#[derive(Debug, Clone)]
pub struct BetaPriorSet {
    reference: String,
    entries: BTreeMap<String, (BetaPrior, PriorSource)>,
    /// When set, absent comparisons default to a point mass at zero instead
    /// of the vague fallback.
    default_degenerate: bool,
}

impl BetaPriorSet {
    pub fn new(reference: impl Into<String>) -> Self {
        BetaPriorSet {
            reference: reference.into(),
            entries: BTreeMap::new(),
            default_degenerate: false,
        }
    }

    /// All shifts fixed at zero (collapses stage 1 to a standard NMA).
    pub fn degenerate_at_zero(reference: impl Into<String>) -> Self {
        let mut set = BetaPriorSet::new(reference);
        set.default_degenerate = true;
        set
    }

    pub fn reference(&self) -> &str {
        &self.reference
    }

    pub fn insert(&mut self, treatment: impl Into<String>, prior: BetaPrior, source: PriorSource) {
        self.entries.insert(treatment.into(), (prior, source));
    }

    pub fn get(&self, treatment: &str) -> Option<(BetaPrior, PriorSource)> {
        self.entries.get(treatment).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &(BetaPrior, PriorSource))> {
        self.entries.iter()
    }

    /// Prior for a basic treatment when building the stage-1 model.
    fn spec_for(&self, treatment: &str) -> BetaSpec {
        match self.entries.get(treatment) {
            Some((BetaPrior::Informative(p), _)) => BetaSpec::Sampled(*p),
            Some((BetaPrior::Degenerate(v), _)) => BetaSpec::Fixed(*v),
            None => {
                if self.default_degenerate {
                    BetaSpec::Fixed(0.0)
                } else {
                    BetaSpec::Sampled(NormalPrior::vague())
                }
            }
        }
    }
}

/// Normal moment-match of the stage-1 predictive distribution
/// `N(mu*_{1l}, (tau^{P2})^2)` for one comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictivePrior {
    pub mean: f64,
    pub variance: f64,
}

impl PredictivePrior {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidPrior(format!(
                "predictive prior needs positive variance, got N({mean}, {variance})"
            )));
        }
        Ok(PredictivePrior { mean, variance })
    }
}

/// Column name of the extrapolated effect for `treatment` in stage-1 samples.
pub fn mu_star_name(treatment: &str) -> String {
    format!("mu_star[{treatment}]")
}

/// Stage 1: fits the (restricted, weighted) dense network with shift
/// parameters and derives `mu* = mu - beta` per draw for every basic
/// treatment.
pub fn fit_stage1(
    dense: &Network,
    beta_priors: &BetaPriorSet,
    weights: &BTreeMap<String, ScalePrior>,
    tau_prior: &TauPrior,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    require_connected(dense)?;
    let basic: Vec<String> = dense
        .basic_treatments()
        .iter()
        .map(|t| t.to_string())
        .collect();
    let betas: Vec<BetaSpec> = basic.iter().map(|t| beta_priors.spec_for(t)).collect();
    let weight_specs: Vec<WeightSpec> = dense
        .studies()
        .iter()
        .map(|s| {
            weights
                .get(s.id())
                .copied()
                .unwrap_or(ScalePrior::Fixed(1.0))
                .to_weight_spec()
        })
        .collect();

    let mu_prior = MuPrior::vague();
    let spec = ModelSpec {
        network: dense,
        mu_prior: &mu_prior,
        tau_prior,
        betas: Some(betas.clone()),
        weights: Some(weight_specs),
        split: None,
    };
    let built = crate::nma::build_model(&spec)?;
    let mut samples = run_sampler(&built.model, built.blocks, built.moves, config)?;

    // mu* = mu - beta per draw; fixed shifts are constants.
    for (t, spec) in basic.iter().zip(&betas) {
        let mu_col = mu_name(t);
        match spec {
            BetaSpec::Fixed(v) => {
                let v = *v;
                samples.derive(mu_star_name(t), &[&mu_col], move |x| x[0] - v)?;
            }
            BetaSpec::Sampled(_) => {
                let beta_col = format!("beta[{t}]");
                samples.derive(mu_star_name(t), &[&mu_col, &beta_col], |x| x[0] - x[1])?;
            }
        }
    }
    Ok(samples)
}

/// Predictive prior for one comparison from stage-1 samples: per retained
/// draw `mu_new = mu* + tau * eps` with a seeded standard-normal stream, then
/// moment-matched to a normal.
pub fn predictive_prior(stage1: &PosteriorSamples, treatment: &str) -> Result<PredictivePrior> {
    let mu_star = stage1
        .pooled(&mu_star_name(treatment))
        .map_err(|_| Error::UnknownTreatment(treatment.to_string()))?;
    let tau = stage1.pooled("tau")?;
    if mu_star.is_empty() {
        return Err(Error::EmptySample(mu_star_name(treatment)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        stage1.config.seed,
        &format!("predictive:{treatment}"),
    ));
    let draws: Vec<f64> = mu_star
        .iter()
        .zip(&tau)
        .map(|(m, t)| m + t * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let variance = if draws.len() > 1 {
        draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    PredictivePrior::new(mean, variance)
}

/// Predictive priors for every listed treatment present in the stage-1 fit.
pub fn predictive_priors_for(
    stage1: &PosteriorSamples,
    treatments: &[&str],
) -> Result<BTreeMap<String, PredictivePrior>> {
    let mut out = BTreeMap::new();
    for t in treatments {
        out.insert(t.to_string(), predictive_prior(stage1, t)?);
    }
    Ok(out)
}

/// Stage 2: standard NMA of the sparse network with the informative priors
/// substituted where available (non-informative elsewhere).
pub fn fit_stage2(
    sparse: &Network,
    priors: &BTreeMap<String, PredictivePrior>,
    tau_prior: &TauPrior,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    let mut mu_prior = MuPrior::vague();
    for t in sparse.basic_treatments() {
        if let Some(p) = priors.get(t) {
            mu_prior.insert(t, NormalPrior::new(p.mean, p.variance)?);
        }
    }
    fit_standard_nma(sparse, &mu_prior, tau_prior, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{mcse, summarize};
    use crate::model::{treatment_sets, Arm, Study};
    use approx::assert_abs_diff_eq;

    fn arm(t: &str, n: u32, mean: f64, sd: f64) -> Arm {
        Arm::new(t, n, mean, sd).unwrap()
    }

    fn study(id: &str, subgroup: &str, rob: bool, arms: Vec<Arm>) -> Study {
        Study::new(id, subgroup, arms, Some(rob)).unwrap()
    }

    fn dense_network() -> Network {
        Network::new(
            "P2",
            vec![
                study(
                    "d1",
                    "P2",
                    false,
                    vec![arm("Pbo", 60, -10.0, 9.0), arm("A", 60, -14.0, 9.0)],
                ),
                study(
                    "d2",
                    "P2",
                    true,
                    vec![arm("Pbo", 50, -9.0, 8.0), arm("B", 50, -15.0, 8.5)],
                ),
                study(
                    "d3",
                    "P2",
                    false,
                    vec![arm("A", 55, -13.0, 9.0), arm("B", 55, -14.5, 9.0)],
                ),
                study(
                    "d4",
                    "P2",
                    true,
                    vec![arm("Pbo", 40, -8.0, 10.0), arm("X", 40, -16.0, 10.0)],
                ),
            ],
            "Pbo",
        )
        .unwrap()
    }

    fn sparse_network() -> Network {
        Network::new(
            "P1",
            vec![
                study(
                    "s1",
                    "P1",
                    false,
                    vec![arm("Pbo", 30, -8.0, 9.0), arm("A", 30, -11.0, 9.0)],
                ),
                study(
                    "s2",
                    "P1",
                    false,
                    vec![arm("Pbo", 25, -9.0, 9.0), arm("B", 25, -13.0, 9.0)],
                ),
            ],
            "Pbo",
        )
        .unwrap()
    }

    fn quick(seed: u64) -> SamplerConfig {
        SamplerConfig::new(seed).with_run_length(8_000, 2_000)
    }

    #[test]
    fn scale_prior_validation() {
        assert!(ScalePrior::fixed(0.0).is_err());
        assert!(ScalePrior::fixed(1.5).is_err());
        assert!(ScalePrior::fixed(1.0).is_ok());
        assert!(ScalePrior::beta(0.0, 3.0).is_err());
        assert!(ScalePrior::beta(3.0, 3.0).is_ok());
        assert!(ScalePrior::uniform(0.0, 0.5).is_err());
        assert!(ScalePrior::uniform(0.6, 0.4).is_err());
        assert!(ScalePrior::uniform(0.8, 1.2).is_err());
        assert!(ScalePrior::uniform(0.8, 1.0).is_ok());
        assert_abs_diff_eq!(ScalePrior::moderate().prior_mean(), 0.5);
        assert_abs_diff_eq!(
            ScalePrior::uniform(0.4, 0.6).unwrap().prior_mean(),
            0.5
        );
    }

    #[test]
    fn scheme_none_restricts_to_common_treatments() {
        let dense = dense_network();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        let wn = assign_weights(&dense, &sets, &WeightScheme::None).unwrap();
        // d4 contains X which is not common -> excluded
        assert_eq!(wn.network.studies().len(), 3);
        assert!(wn.network.studies().iter().all(|s| s.id() != "d4"));
        assert!(wn.weights.values().all(|w| w.is_fixed_one()));
    }

    #[test]
    fn scheme_rob_downweights_flagged_studies() {
        let dense = dense_network();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        let wn =
            assign_weights(&dense, &sets, &WeightScheme::Rob(ScalePrior::moderate())).unwrap();
        assert_eq!(wn.network.studies().len(), 3);
        assert_eq!(wn.weights["d1"], ScalePrior::Fixed(1.0));
        assert_eq!(wn.weights["d2"], ScalePrior::moderate());
        assert_eq!(wn.weights["d3"], ScalePrior::Fixed(1.0));
    }

    #[test]
    fn scheme_rob_requires_flags() {
        let dense = Network::new(
            "P2",
            vec![Study::new(
                "d1",
                "P2",
                vec![arm("Pbo", 60, -10.0, 9.0), arm("A", 60, -14.0, 9.0)],
                None,
            )
            .unwrap()],
            "Pbo",
        )
        .unwrap();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        assert!(assign_weights(&dense, &sets, &WeightScheme::Rob(ScalePrior::moderate())).is_err());
    }

    #[test]
    fn scheme_nct_keeps_full_network_and_weights_outsiders() {
        let dense = dense_network();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        let wn = assign_weights(
            &dense,
            &sets,
            &WeightScheme::NonCommonTreatment(ScalePrior::moderate()),
        )
        .unwrap();
        assert_eq!(wn.network.studies().len(), 4);
        assert_eq!(wn.weights["d1"], ScalePrior::Fixed(1.0));
        assert_eq!(wn.weights["d4"], ScalePrior::moderate());
        let weighted = wn
            .weights
            .values()
            .filter(|w| !w.is_fixed_one())
            .count();
        assert_eq!(weighted, 1);
    }

    #[test]
    fn degenerate_stage1_is_bit_identical_to_standard_nma() {
        let dense = dense_network();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        let wn = assign_weights(&dense, &sets, &WeightScheme::None).unwrap();
        let config = quick(99);
        let betas = BetaPriorSet::degenerate_at_zero("Pbo");
        let stage1 = fit_stage1(&wn.network, &betas, &wn.weights, &TauPrior::unit(), &config)
            .unwrap();
        let standard =
            fit_standard_nma(&wn.network, &MuPrior::vague(), &TauPrior::unit(), &config).unwrap();
        for chain in 0..config.n_chains {
            for t in ["A", "B"] {
                let a = stage1.chain_draws(chain, &mu_name(t)).unwrap();
                let b = standard.chain_draws(chain, &mu_name(t)).unwrap();
                assert_eq!(a, b, "mu[{t}] chain {chain} diverged");
                // derived mu* equals mu bitwise when beta is fixed at zero
                let star = stage1.chain_draws(chain, &mu_star_name(t)).unwrap();
                assert_eq!(a, star);
            }
            assert_eq!(
                stage1.chain_draws(chain, "tau").unwrap(),
                standard.chain_draws(chain, "tau").unwrap()
            );
        }
    }

    #[test]
    fn fixed_shift_subtracts_per_draw() {
        let dense = dense_network();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        let wn = assign_weights(&dense, &sets, &WeightScheme::None).unwrap();
        let mut betas = BetaPriorSet::degenerate_at_zero("Pbo");
        betas.insert("A", BetaPrior::Degenerate(0.3), PriorSource::Fixed);
        let config = quick(7);
        let stage1 =
            fit_stage1(&wn.network, &betas, &wn.weights, &TauPrior::unit(), &config).unwrap();
        let mu = stage1.pooled(&mu_name("A")).unwrap();
        let star = stage1.pooled(&mu_star_name("A")).unwrap();
        for (m, s) in mu.iter().zip(&star) {
            assert_eq!(*s, m - 0.3);
        }
    }

    #[test]
    fn predictive_prior_zero_tau_matches_mu_star_variance_exactly() {
        let mu_star: Vec<f64> = (0..500).map(|i| -0.4 + 0.001 * i as f64).collect();
        let tau = vec![0.0; 500];
        let mut samples = PosteriorSamples::from_draws(
            &["mu_star[A]", "tau"],
            vec![vec![mu_star.clone(), tau]],
        )
        .unwrap();
        samples.config.seed = 5;
        let prior = predictive_prior(&samples, "A").unwrap();
        let n = mu_star.len() as f64;
        let mean = mu_star.iter().sum::<f64>() / n;
        let var = mu_star.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert_eq!(prior.variance, var);
        assert_eq!(prior.mean, mean);
    }

    #[test]
    fn predictive_prior_constant_inputs_recover_tau_squared() {
        let n = 80_000;
        let t = 0.25;
        let mut samples = PosteriorSamples::from_draws(
            &["mu_star[A]", "tau"],
            vec![vec![vec![-0.5; n], vec![t; n]]],
        )
        .unwrap();
        samples.config.seed = 12;
        let prior = predictive_prior(&samples, "A").unwrap();
        // sampling distribution of the variance estimate: se ~ t^2 sqrt(2/(n-1))
        let se = t * t * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!(
            (prior.variance - t * t).abs() <= 3.0 * se,
            "variance {} vs {}",
            prior.variance,
            t * t
        );
        assert!((prior.mean - (-0.5)).abs() <= 3.0 * t / (n as f64).sqrt());
    }

    #[test]
    fn predictive_prior_never_below_mu_star_variance() {
        let dense = dense_network();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        let wn = assign_weights(&dense, &sets, &WeightScheme::None).unwrap();
        let betas = BetaPriorSet::degenerate_at_zero("Pbo");
        let config = quick(3);
        let stage1 =
            fit_stage1(&wn.network, &betas, &wn.weights, &TauPrior::unit(), &config).unwrap();
        for t in ["A", "B"] {
            let prior = predictive_prior(&stage1, t).unwrap();
            let s = summarize(&stage1, &mu_star_name(t)).unwrap();
            let mc = mcse(&stage1, &mu_star_name(t)).unwrap();
            assert!(
                prior.variance >= s.sd * s.sd - 3.0 * mc,
                "{t}: {} < {}",
                prior.variance,
                s.sd * s.sd
            );
        }
    }

    #[test]
    fn predictive_prior_unknown_comparison_errors() {
        let samples =
            PosteriorSamples::from_draws(&["mu_star[A]", "tau"], vec![vec![vec![0.0], vec![0.1]]])
                .unwrap();
        assert!(predictive_prior(&samples, "Zed").is_err());
    }

    #[test]
    fn stage2_with_vague_priors_is_bit_identical_to_standard_nma() {
        let sparse = sparse_network();
        let config = quick(41);
        let priors = BTreeMap::new();
        let stage2 = fit_stage2(&sparse, &priors, &TauPrior::unit(), &config).unwrap();
        let standard =
            fit_standard_nma(&sparse, &MuPrior::vague(), &TauPrior::unit(), &config).unwrap();
        for chain in 0..config.n_chains {
            for t in ["A", "B"] {
                assert_eq!(
                    stage2.chain_draws(chain, &mu_name(t)).unwrap(),
                    standard.chain_draws(chain, &mu_name(t)).unwrap()
                );
            }
        }
    }

    #[test]
    fn informative_stage2_prior_dominates_without_direct_data() {
        // sparse network has no studies on treatment B vs Pbo beyond s2;
        // give B a tight prior and check the posterior tracks it.
        let sparse = Network::new(
            "P1",
            vec![study(
                "s1",
                "P1",
                false,
                vec![arm("Pbo", 30, -8.0, 9.0), arm("A", 30, -11.0, 9.0)],
            )],
            "Pbo",
        )
        .unwrap();
        // A connected but no data on it beyond one study; prior for A tight at -0.8
        let mut priors = BTreeMap::new();
        priors.insert("A".to_string(), PredictivePrior::new(-0.8, 1e-4).unwrap());
        let config = quick(13);
        let fit = fit_stage2(&sparse, &priors, &TauPrior::unit(), &config).unwrap();
        let s = summarize(&fit, "mu[A]").unwrap();
        // prior precision 1e4 dwarfs the single study's information (~25)
        assert!((s.mean - (-0.8)).abs() < 0.05, "mean {}", s.mean);
    }

    #[test]
    fn weight_near_zero_matches_study_deletion() {
        let dense = dense_network();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        let wn = assign_weights(&dense, &sets, &WeightScheme::None).unwrap();
        let betas = BetaPriorSet::degenerate_at_zero("Pbo");
        let config = SamplerConfig::new(77).with_run_length(20_000, 4_000);

        // d3 downweighted to 1e-6
        let mut weights = wn.weights.clone();
        weights.insert("d3".to_string(), ScalePrior::fixed(1e-6).unwrap());
        let with_ghost =
            fit_stage1(&wn.network, &betas, &weights, &TauPrior::unit(), &config).unwrap();

        // d3 deleted
        let reduced = wn.network.restricted(|s| s.id() != "d3").unwrap();
        let deleted_weights: BTreeMap<String, ScalePrior> = wn
            .weights
            .iter()
            .filter(|(id, _)| id.as_str() != "d3")
            .map(|(id, w)| (id.clone(), *w))
            .collect();
        let without =
            fit_stage1(&reduced, &betas, &deleted_weights, &TauPrior::unit(), &config).unwrap();

        for t in ["A", "B"] {
            let a = summarize(&with_ghost, &mu_name(t)).unwrap().mean;
            let b = summarize(&without, &mu_name(t)).unwrap().mean;
            let se = (mcse(&with_ghost, &mu_name(t)).unwrap().powi(2)
                + mcse(&without, &mu_name(t)).unwrap().powi(2))
            .sqrt();
            assert!(
                (a - b).abs() <= 3.0 * se + 1e-3,
                "mu[{t}]: {a} vs {b} (3se {})",
                3.0 * se
            );
        }
    }

    #[test]
    fn shift_equivariance_in_the_prior_mean() {
        let dense = dense_network();
        let sparse = sparse_network();
        let sets = treatment_sets(&dense, &sparse).unwrap();
        let wn = assign_weights(&dense, &sets, &WeightScheme::None).unwrap();
        let config = SamplerConfig::new(55).with_run_length(20_000, 4_000);
        let c = 0.4;

        let mut base = BetaPriorSet::new("Pbo");
        let mut shifted = BetaPriorSet::new("Pbo");
        for t in ["A", "B"] {
            base.insert(
                t,
                BetaPrior::Informative(NormalPrior::new(0.1, 0.01).unwrap()),
                PriorSource::Data,
            );
            shifted.insert(
                t,
                BetaPrior::Informative(NormalPrior::new(0.1 + c, 0.01).unwrap()),
                PriorSource::Data,
            );
        }
        let fit_base =
            fit_stage1(&wn.network, &base, &wn.weights, &TauPrior::unit(), &config).unwrap();
        let fit_shift =
            fit_stage1(&wn.network, &shifted, &wn.weights, &TauPrior::unit(), &config).unwrap();
        for t in ["A", "B"] {
            let a = summarize(&fit_base, &mu_star_name(t)).unwrap().mean;
            let b = summarize(&fit_shift, &mu_star_name(t)).unwrap().mean;
            let se = (mcse(&fit_base, &mu_star_name(t)).unwrap().powi(2)
                + mcse(&fit_shift, &mu_star_name(t)).unwrap().powi(2))
            .sqrt();
            assert!(
                ((b - a) - (-c)).abs() <= 3.0 * se + 5e-3,
                "mu*[{t}] shift {} vs {}",
                b - a,
                -c
            );
        }
    }
}
