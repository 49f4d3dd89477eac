//! Run configuration for the nine analysis variants, pipeline orchestration
//! and report emission.
//!
//! One naive synthesis, six borrowing variants (data- or expert-based shift
//! priors crossed with three weighting schemes), one standard NMA and one
//! pairwise meta-analysis: every variant is reachable from a flat key-value
//! configuration file plus command-line overrides, and every run is
//! reproducible bit for bit from its emitted manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::borrowing::{
    assign_weights, fit_stage1, fit_stage2, predictive_priors_for, BetaPriorSet, PredictivePrior,
    ScalePrior, WeightScheme,
};
use crate::evaluation::{
    league_table, node_split, rank_probabilities, splittable_comparisons, sucra, LeagueTable,
    NodeSplitModel, NodeSplitResult, RankDirection, RankMatrix,
};
use crate::io::{self, ConvergenceEntry, ReportPaths, RoundingProfile};
use crate::mcmc::{
    derive_seed, export_traces, gelman_rubin, summarize, PosteriorSamples, PosteriorSummary,
    SamplerConfig,
};
use crate::model::{direct_comparisons, treatment_sets, Network};
use crate::nma::{fit_naive_synthesis, fit_standard_nma, MuPrior, NormalPrior, TauPrior};
use crate::priors::{
    data_based_beta_priors, expert_beta_priors, median_pooled_sd, pairwise_ma_pair, pool_experts,
};
use crate::{Error, Result};

/// Source of the location-shift priors in the borrowing models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaSource {
    Data,
    Expert,
}

impl std::fmt::Display for BetaSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BetaSource::Data => "data",
            BetaSource::Expert => "expert",
        })
    }
}

/// Scale-weight scheme of the borrowing models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    NoDw,
    RobDw,
    NctDw,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::NoDw => "no_dw",
            Scheme::RobDw => "rob_dw",
            Scheme::NctDw => "nct_dw",
        })
    }
}

/// The analysis variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Naive,
    Standard,
    Pairwise,
    Borrow {
        beta_source: BetaSource,
        scheme: Scheme,
    },
}

impl Model {
    /// Every reachable variant: 1 naive + 2x3 borrow + 1 standard +
    /// 1 pairwise = 9.
    pub fn all_variants() -> Vec<Model> {
        let mut out = vec![Model::Naive];
        for beta_source in [BetaSource::Data, BetaSource::Expert] {
            for scheme in [Scheme::NoDw, Scheme::RobDw, Scheme::NctDw] {
                out.push(Model::Borrow {
                    beta_source,
                    scheme,
                });
            }
        }
        out.push(Model::Standard);
        out.push(Model::Pairwise);
        out
    }

    pub fn requires_dense(&self) -> bool {
        matches!(self, Model::Naive | Model::Borrow { .. })
    }

    pub fn requires_experts(&self) -> bool {
        matches!(
            self,
            Model::Borrow {
                beta_source: BetaSource::Expert,
                ..
            }
        )
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::Naive => f.write_str("naive"),
            Model::Standard => f.write_str("standard"),
            Model::Pairwise => f.write_str("pairwise"),
            Model::Borrow {
                beta_source,
                scheme,
            } => write!(f, "borrow({beta_source},{scheme})"),
        }
    }
}

/// Full description of one run.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub model: Model,
    pub sampler: SamplerConfig,
    pub reference: String,
    /// Prior handed to the downweighting schemes (Beta(3,3) by default).
    pub scale_prior: ScalePrior,
    pub direction: RankDirection,
    pub sparse_path: PathBuf,
    pub dense_path: Option<PathBuf>,
    pub expert_path: Option<PathBuf>,
    /// Pre-computed predictive priors; skips stage 1 when set.
    pub predictive_priors_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub allow_unconverged: bool,
    pub export_traces: bool,
    pub skip_consistency: bool,
    pub rounding: RoundingProfile,
}

/// Parses a flat `key = value` configuration file. `#` starts a comment;
/// blank lines are skipped; duplicate keys are an error.
pub fn parse_config_text(path: &str, text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::parse(path, line, format!("expected 'key = value', got '{content}'")));
        };
        let key = key.trim().to_lowercase();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::parse(path, line, "empty key"));
        }
        if pairs.insert(key.clone(), value).is_some() {
            return Err(Error::parse(path, line, format!("duplicate key '{key}'")));
        }
    }
    Ok(pairs)
}

fn parse_scale_prior(text: &str) -> Result<ScalePrior> {
    let text = text.trim().to_lowercase();
    let inner = |prefix: &str| -> Option<Vec<f64>> {
        let rest = text.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
        rest.split(',')
            .map(|p| p.trim().parse::<f64>().ok())
            .collect()
    };
    if let Some(args) = inner("fixed") {
        if args.len() == 1 {
            return ScalePrior::fixed(args[0]);
        }
    }
    if let Some(args) = inner("beta") {
        if args.len() == 2 {
            return ScalePrior::beta(args[0], args[1]);
        }
    }
    if let Some(args) = inner("uniform") {
        if args.len() == 2 {
            return ScalePrior::uniform(args[0], args[1]);
        }
    }
    Err(Error::Analysis(format!(
        "invalid scale_prior '{text}' (use fixed(v), beta(a,b) or uniform(lo,hi))"
    )))
}

impl AnalysisConfig {
    /// Builds a configuration from resolved key-value pairs (config file plus
    /// command-line overrides already merged).
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let known = [
            "model",
            "beta_source",
            "scheme",
            "reference",
            "seed",
            "chains",
            "iterations",
            "burn_in",
            "thin",
            "adapt_window",
            "scale_prior",
            "direction",
            "sparse",
            "dense",
            "experts",
            "predictive_priors",
            "out",
            "allow_unconverged",
            "traces",
            "skip_consistency",
            "round_league",
            "round_consistency",
            "round_summaries",
            "round_sucra",
        ];
        for key in pairs.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::Analysis(format!("unknown configuration key '{key}'")));
            }
        }
        let get = |key: &str| pairs.get(key).map(|s| s.as_str());
        let required = |key: &str| -> Result<&str> {
            get(key).ok_or_else(|| Error::Analysis(format!("missing configuration key '{key}'")))
        };

        let model = match required("model")? {
            "naive" => Model::Naive,
            "standard" => Model::Standard,
            "pairwise" => Model::Pairwise,
            "borrow" => {
                let beta_source = match required("beta_source")? {
                    "data" => BetaSource::Data,
                    "expert" => BetaSource::Expert,
                    other => {
                        return Err(Error::Analysis(format!(
                            "invalid beta_source '{other}' (data|expert)"
                        )))
                    }
                };
                let scheme = match required("scheme")? {
                    "no_dw" => Scheme::NoDw,
                    "rob_dw" => Scheme::RobDw,
                    "nct_dw" => Scheme::NctDw,
                    other => {
                        return Err(Error::Analysis(format!(
                            "invalid scheme '{other}' (no_dw|rob_dw|nct_dw)"
                        )))
                    }
                };
                Model::Borrow {
                    beta_source,
                    scheme,
                }
            }
            other => {
                return Err(Error::Analysis(format!(
                    "invalid model '{other}' (naive|standard|pairwise|borrow)"
                )))
            }
        };

        let parse_num = |key: &str, default: usize| -> Result<usize> {
            match get(key) {
                None => Ok(default),
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::Analysis(format!("invalid {key} '{v}'"))),
            }
        };
        let seed: u64 = match get("seed") {
            None => 20240811,
            Some(v) => v
                .parse()
                .map_err(|_| Error::Analysis(format!("invalid seed '{v}'")))?,
        };
        let mut sampler = SamplerConfig::new(seed);
        sampler.n_chains = parse_num("chains", sampler.n_chains)?;
        sampler.iterations = parse_num("iterations", sampler.iterations)?;
        sampler.burn_in = parse_num("burn_in", sampler.burn_in)?;
        sampler.thin = parse_num("thin", sampler.thin)?;
        sampler.adapt_window = parse_num("adapt_window", sampler.burn_in)?;
        sampler.validate()?;

        let scale_prior = match get("scale_prior") {
            None => ScalePrior::moderate(),
            Some(v) => parse_scale_prior(v)?,
        };
        let direction = match get("direction") {
            None | Some("lower-better") => RankDirection::LowerBetter,
            Some("higher-better") => RankDirection::HigherBetter,
            Some(other) => {
                return Err(Error::Analysis(format!(
                    "invalid direction '{other}' (lower-better|higher-better)"
                )))
            }
        };
        let parse_flag = |key: &str| -> Result<bool> {
            match get(key) {
                None => Ok(false),
                Some("true") | Some("1") => Ok(true),
                Some("false") | Some("0") => Ok(false),
                Some(other) => Err(Error::Analysis(format!("invalid {key} '{other}'"))),
            }
        };

        let mut rounding = RoundingProfile::default();
        rounding.league = parse_num("round_league", rounding.league)?;
        rounding.consistency = parse_num("round_consistency", rounding.consistency)?;
        rounding.summaries = parse_num("round_summaries", rounding.summaries)?;
        rounding.sucra = parse_num("round_sucra", rounding.sucra)?;

        let config = AnalysisConfig {
            model,
            sampler,
            reference: required("reference")?.to_string(),
            scale_prior,
            direction,
            sparse_path: PathBuf::from(required("sparse")?),
            dense_path: get("dense").map(PathBuf::from),
            expert_path: get("experts").map(PathBuf::from),
            predictive_priors_path: get("predictive_priors").map(PathBuf::from),
            out_dir: PathBuf::from(get("out").unwrap_or("netborrow-out")),
            allow_unconverged: parse_flag("allow_unconverged")?,
            export_traces: parse_flag("traces")?,
            skip_consistency: parse_flag("skip_consistency")?,
            rounding,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference.is_empty() {
            return Err(Error::Analysis("empty reference treatment".into()));
        }
        if self.model.requires_dense() && self.dense_path.is_none() {
            return Err(Error::Analysis(format!(
                "model {} requires a dense-network file (key 'dense')",
                self.model
            )));
        }
        if self.model.requires_experts()
            && self.expert_path.is_none()
            && self.predictive_priors_path.is_none()
        {
            return Err(Error::Analysis(
                "expert-based shift priors require an expert-response file (key 'experts')".into(),
            ));
        }
        Ok(())
    }

    /// The resolved configuration as reloadable `key = value` text.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut pairs = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            pairs.insert(k.to_string(), v);
        };
        match self.model {
            Model::Naive => put("model", "naive".into()),
            Model::Standard => put("model", "standard".into()),
            Model::Pairwise => put("model", "pairwise".into()),
            Model::Borrow {
                beta_source,
                scheme,
            } => {
                put("model", "borrow".into());
                put("beta_source", beta_source.to_string());
                put("scheme", scheme.to_string());
            }
        }
        put("reference", self.reference.clone());
        put("seed", self.sampler.seed.to_string());
        put("chains", self.sampler.n_chains.to_string());
        put("iterations", self.sampler.iterations.to_string());
        put("burn_in", self.sampler.burn_in.to_string());
        put("thin", self.sampler.thin.to_string());
        put("adapt_window", self.sampler.adapt_window.to_string());
        put("scale_prior", self.scale_prior.to_string());
        put("direction", self.direction.to_string());
        put("sparse", self.sparse_path.display().to_string());
        if let Some(p) = &self.dense_path {
            put("dense", p.display().to_string());
        }
        if let Some(p) = &self.expert_path {
            put("experts", p.display().to_string());
        }
        if let Some(p) = &self.predictive_priors_path {
            put("predictive_priors", p.display().to_string());
        }
        put("out", self.out_dir.display().to_string());
        put("allow_unconverged", self.allow_unconverged.to_string());
        put("traces", self.export_traces.to_string());
        put("skip_consistency", self.skip_consistency.to_string());
        put("round_league", self.rounding.league.to_string());
        put("round_consistency", self.rounding.consistency.to_string());
        put("round_summaries", self.rounding.summaries.to_string());
        put("round_sucra", self.rounding.sucra.to_string());
        pairs
    }
}

/// Everything one run produces, ready for emission.
pub struct ReportBundle {
    pub config: AnalysisConfig,
    /// Posterior summaries of the reported (non-latent) parameters.
    pub summaries: Vec<(String, PosteriorSummary)>,
    pub league: Option<LeagueTable>,
    pub ranks: Option<RankMatrix>,
    pub sucra: Vec<(String, f64)>,
    pub consistency: Vec<NodeSplitResult>,
    pub convergence: Vec<ConvergenceEntry>,
    pub beta_priors: Option<BetaPriorSet>,
    pub predictive: Option<BTreeMap<String, PredictivePrior>>,
    /// Main fit, when the model produces one (for trace export).
    pub samples: Option<PosteriorSamples>,
    pub stage1: Option<PosteriorSamples>,
    pub manifest: String,
}

struct LoadedInputs {
    sparse: Network,
    dense: Option<Network>,
    hashes: Vec<(String, String)>,
}

fn load_inputs(config: &AnalysisConfig) -> Result<LoadedInputs> {
    let sparse = io::load_network(&config.sparse_path, &config.reference)?;
    let mut hashes = vec![(
        "sparse".to_string(),
        io::file_sha256(&config.sparse_path)?,
    )];
    let dense = match (&config.dense_path, config.model.requires_dense()) {
        (Some(path), _) => {
            hashes.push(("dense".to_string(), io::file_sha256(path)?));
            Some(io::load_network(path, &config.reference)?)
        }
        (None, true) => unreachable!("validated"),
        (None, false) => None,
    };
    if let Some(path) = &config.expert_path {
        hashes.push(("experts".to_string(), io::file_sha256(path)?));
    }
    if let Some(path) = &config.predictive_priors_path {
        hashes.push(("predictive_priors".to_string(), io::file_sha256(path)?));
    }
    Ok(LoadedInputs {
        sparse,
        dense,
        hashes,
    })
}

/// Builds the manifest text: the reloadable configuration plus provenance
/// comments (input hashes and timings are comments so replays parse cleanly).
fn manifest_text(
    config: &AnalysisConfig,
    hashes: &[(String, String)],
    elapsed_seconds: f64,
) -> String {
    let mut text = String::new();
    text.push_str("# netborrow run manifest (reloadable as a configuration file)\n");
    text.push_str(&format!("# version = {}\n", env!("CARGO_PKG_VERSION")));
    for (name, hash) in hashes {
        text.push_str(&format!("# input-sha256 {name} = {hash}\n"));
    }
    text.push_str(&format!("# timing seconds = {elapsed_seconds:.3}\n"));
    for (key, value) in config.to_pairs() {
        text.push_str(&format!("{key} = {value}\n"));
    }
    text
}

/// Shift priors for the borrowing models (data- or expert-based).
pub fn build_beta_priors(
    config: &AnalysisConfig,
    sparse: &Network,
    dense: &Network,
) -> Result<BetaPriorSet> {
    let Model::Borrow { beta_source, .. } = config.model else {
        return Err(Error::Analysis(format!(
            "model {} has no shift priors",
            config.model
        )));
    };
    let sets = treatment_sets(dense, sparse)?;
    let mut sub = config.sampler.clone();
    sub.seed = derive_seed(config.sampler.seed, "beta");
    match beta_source {
        BetaSource::Data => data_based_beta_priors(sparse, dense, &sets, &sub),
        BetaSource::Expert => {
            let path = config
                .expert_path
                .as_ref()
                .ok_or_else(|| Error::Analysis("expert file required".into()))?;
            let responses = io::load_experts(path)?;
            let med = median_pooled_sd(sparse)?;
            let mut pool_cfg = config.sampler.clone();
            pool_cfg.seed = derive_seed(config.sampler.seed, "expert-pool");
            let pool = pool_experts(&responses, &config.reference, med, &pool_cfg)?;
            expert_beta_priors(&pool, dense, &sets, &sub)
        }
    }
}

fn scheme_of(config: &AnalysisConfig) -> Result<WeightScheme> {
    let Model::Borrow { scheme, .. } = config.model else {
        return Err(Error::Analysis(format!(
            "model {} has no weighting scheme",
            config.model
        )));
    };
    Ok(match scheme {
        Scheme::NoDw => WeightScheme::None,
        Scheme::RobDw => WeightScheme::Rob(config.scale_prior),
        Scheme::NctDw => WeightScheme::NonCommonTreatment(config.scale_prior),
    })
}

/// Outputs of the standalone prior-construction pipeline.
pub struct PriorArtifacts {
    pub beta_priors: BetaPriorSet,
    pub predictive: BTreeMap<String, PredictivePrior>,
    pub stage1: PosteriorSamples,
}

/// Runs shift-prior construction and stage 1 only (the `priors` subcommand).
pub fn run_priors(config: &AnalysisConfig) -> Result<PriorArtifacts> {
    if !matches!(config.model, Model::Borrow { .. }) {
        return Err(Error::Analysis(
            "prior construction requires a borrow model configuration".into(),
        ));
    }
    let inputs = load_inputs(config)?;
    let dense = inputs.dense.as_ref().expect("validated dense input");
    let beta_priors = build_beta_priors(config, &inputs.sparse, dense)?;
    let (stage1, predictive) = run_stage1(config, &inputs.sparse, dense, &beta_priors)?;
    Ok(PriorArtifacts {
        beta_priors,
        predictive,
        stage1,
    })
}

fn run_stage1(
    config: &AnalysisConfig,
    sparse: &Network,
    dense: &Network,
    beta_priors: &BetaPriorSet,
) -> Result<(PosteriorSamples, BTreeMap<String, PredictivePrior>)> {
    let sets = treatment_sets(dense, sparse)?;
    let weighted = assign_weights(dense, &sets, &scheme_of(config)?)?;
    let mut stage1_cfg = config.sampler.clone();
    stage1_cfg.seed = derive_seed(config.sampler.seed, "stage1");
    let stage1 = fit_stage1(
        &weighted.network,
        beta_priors,
        &weighted.weights,
        &TauPrior::unit(),
        &stage1_cfg,
    )?;
    let available: Vec<&str> = sets
        .common_non_reference(&config.reference)
        .into_iter()
        .filter(|t| weighted.network.treatments().contains(*t))
        .collect();
    let predictive = predictive_priors_for(&stage1, &available)?;
    Ok((stage1, predictive))
}

/// Convergence entries for one fit; `prefix` distinguishes stage-1 runs.
fn convergence_entries(
    samples: &PosteriorSamples,
    prefix: &str,
) -> Result<(Vec<ConvergenceEntry>, Vec<(String, f64)>)> {
    let mut entries = Vec::new();
    let mut gated = Vec::new();
    for meta in samples.params() {
        if !meta.gated {
            continue;
        }
        let rhat = gelman_rubin(samples, &meta.name)?;
        let name = format!("{prefix}{}", meta.name);
        entries.push(ConvergenceEntry::Rhat {
            parameter: name.clone(),
            value: rhat,
        });
        gated.push((name, rhat));
    }
    for stats in &samples.acceptance {
        entries.push(ConvergenceEntry::Acceptance(crate::mcmc::MoveStats {
            name: format!("{prefix}{}", stats.name),
            ..stats.clone()
        }));
    }
    for warning in &samples.warnings {
        entries.push(ConvergenceEntry::Warning(format!("{prefix}{warning}")));
    }
    Ok((entries, gated))
}

/// Runs the configured analysis end to end.
///
/// When any monitored split R-hat reaches 1.1 the run refuses to produce
/// results: it writes a convergence-failure report (convergence table and
/// manifest) into the output directory and returns
/// [`Error::ConvergenceFailure`], unless `allow_unconverged` is set.
pub fn run_analysis(config: &AnalysisConfig) -> Result<ReportBundle> {
    config.validate()?;
    let started = Instant::now();
    let inputs = load_inputs(config)?;
    let sparse = &inputs.sparse;

    let mut beta_priors = None;
    let mut predictive = None;
    let mut stage1_samples = None;

    // The network the reported estimates describe, and the main fit.
    let (analysis_net, samples): (Network, Option<PosteriorSamples>) = match config.model {
        Model::Standard => {
            let fit = fit_standard_nma(
                sparse,
                &MuPrior::vague(),
                &TauPrior::unit(),
                &config.sampler,
            )?;
            (sparse.clone(), Some(fit))
        }
        Model::Naive => {
            let dense = inputs.dense.as_ref().expect("validated dense input");
            let fit = fit_naive_synthesis(
                dense,
                sparse,
                &MuPrior::vague(),
                &TauPrior::unit(),
                &config.sampler,
            )?;
            (sparse.merged(dense)?, Some(fit))
        }
        Model::Borrow { .. } => {
            let dense = inputs.dense.as_ref().expect("validated dense input");
            let priors = match &config.predictive_priors_path {
                Some(path) => io::load_predictive_priors(path, &config.reference)?,
                None => {
                    let betas = build_beta_priors(config, sparse, dense)?;
                    let (stage1, priors) = run_stage1(config, sparse, dense, &betas)?;
                    beta_priors = Some(betas);
                    stage1_samples = Some(stage1);
                    priors
                }
            };
            let fit = fit_stage2(sparse, &priors, &TauPrior::unit(), &config.sampler)?;
            predictive = Some(priors);
            (sparse.clone(), Some(fit))
        }
        Model::Pairwise => (sparse.clone(), None),
    };

    // Convergence gate over the main fit and stage 1.
    let mut convergence = Vec::new();
    let mut gated = Vec::new();
    if let Some(fit) = &samples {
        let (entries, g) = convergence_entries(fit, "")?;
        convergence.extend(entries);
        gated.extend(g);
    }
    if let Some(stage1) = &stage1_samples {
        let (entries, g) = convergence_entries(stage1, "stage1:")?;
        convergence.extend(entries);
        gated.extend(g);
    }
    let failures: Vec<String> = gated
        .iter()
        .filter(|(_, rhat)| *rhat >= 1.1)
        .map(|(name, rhat)| format!("{name} (rhat {rhat:.3})"))
        .collect();
    if !failures.is_empty() && !config.allow_unconverged {
        let manifest = manifest_text(config, &inputs.hashes, started.elapsed().as_secs_f64());
        std::fs::create_dir_all(&config.out_dir)
            .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
        let paths = ReportPaths::in_dir(&config.out_dir);
        io::write_convergence_csv(&paths.convergence, &convergence)?;
        io::write_text(&paths.manifest, &manifest)?;
        return Err(Error::ConvergenceFailure(format!(
            "{} parameter(s) failed the split R-hat gate: {}",
            failures.len(),
            failures.join(", ")
        )));
    }

    // Summaries, ranking, league table.
    let mut summaries = Vec::new();
    let mut league = None;
    let mut ranks = None;
    let mut sucras = Vec::new();
    if let Some(fit) = &samples {
        for meta in fit.params() {
            if meta.gated {
                summaries.push((meta.name.clone(), summarize(fit, &meta.name)?));
            }
        }
        let treatments: Vec<String> = analysis_net.treatments().iter().cloned().collect();
        league = Some(league_table(fit, &config.reference, &treatments)?);
        let matrix = rank_probabilities(fit, &config.reference, &treatments, config.direction)?;
        for t in &treatments {
            sucras.push((t.clone(), sucra(&matrix, t)?));
        }
        ranks = Some(matrix);
    } else {
        // pairwise model: one pooled summary per direct comparison
        for (a, b) in direct_comparisons(sparse).keys() {
            let (base, head) = if b == &config.reference {
                (b.clone(), a.clone())
            } else {
                (a.clone(), b.clone())
            };
            let mut sub = config.sampler.clone();
            sub.seed = derive_seed(config.sampler.seed, &format!("pairwise:{head} vs {base}"));
            let summary = pairwise_ma_pair(sparse, &base, &head, &sub)?;
            summaries.push((format!("u[{head} vs {base}]"), summary));
        }
    }

    // Node splitting on the analysis network.
    let mut consistency = Vec::new();
    if samples.is_some() && !config.skip_consistency {
        let split_prior = match (&config.model, &predictive) {
            (Model::Borrow { .. }, Some(priors)) => {
                let mut mu_prior = MuPrior::vague();
                for t in analysis_net.basic_treatments() {
                    if let Some(p) = priors.get(t) {
                        mu_prior.insert(t, NormalPrior::new(p.mean, p.variance)?);
                    }
                }
                mu_prior
            }
            _ => MuPrior::vague(),
        };
        let model = NodeSplitModel {
            mu_prior: split_prior,
            tau_prior: TauPrior::unit(),
        };
        for (base, head) in splittable_comparisons(&analysis_net) {
            let mut sub = config.sampler.clone();
            sub.seed = derive_seed(config.sampler.seed, &format!("split:{head} vs {base}"));
            consistency.push(node_split(&analysis_net, &base, &head, &model, &sub)?);
        }
    }

    let manifest = manifest_text(config, &inputs.hashes, started.elapsed().as_secs_f64());
    Ok(ReportBundle {
        config: config.clone(),
        summaries,
        league,
        ranks,
        sucra: sucras,
        consistency,
        convergence,
        beta_priors,
        predictive,
        samples,
        stage1: stage1_samples,
        manifest,
    })
}

/// Writes every table of the bundle into `dir` and returns the written paths.
pub fn emit_report(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let paths = ReportPaths::in_dir(dir);
    let profile = &bundle.config.rounding;
    let mut written = Vec::new();

    io::write_summaries_csv(&paths.summaries, &bundle.summaries, profile)?;
    written.push(paths.summaries.clone());

    if let Some(league) = &bundle.league {
        io::write_league_csv(&paths.league, league, profile)?;
    } else {
        io::write_text(
            &paths.league,
            "treatment\n",
        )?;
    }
    written.push(paths.league.clone());

    io::write_sucra_csv(&paths.sucra, &bundle.sucra, profile)?;
    written.push(paths.sucra.clone());

    if let Some(ranks) = &bundle.ranks {
        io::write_rank_matrix_csv(&paths.rank_matrix, ranks, profile)?;
        written.push(paths.rank_matrix.clone());
    }

    io::write_consistency_csv(&paths.consistency, &bundle.consistency, profile)?;
    written.push(paths.consistency.clone());

    io::write_convergence_csv(&paths.convergence, &bundle.convergence)?;
    written.push(paths.convergence.clone());

    if let Some(betas) = &bundle.beta_priors {
        let path = dir.join("beta_priors.csv");
        io::write_beta_priors(betas, &path)?;
        written.push(path);
    }
    if let Some(predictive) = &bundle.predictive {
        let path = dir.join("predictive_priors.csv");
        io::write_predictive_priors(predictive, &bundle.config.reference, &path)?;
        written.push(path);
    }

    if bundle.config.export_traces {
        if let Some(samples) = &bundle.samples {
            let trace_dir = dir.join("traces");
            export_traces(samples, &trace_dir)?;
            written.push(trace_dir);
        }
        for result in &bundle.consistency {
            let path = dir.join(format!(
                "density_{}.csv",
                io::sanitize_name(&result.comparison)
            ));
            io::write_density_csv(&path, result)?;
            written.push(path);
        }
    }

    io::write_text(&paths.manifest, &bundle.manifest)?;
    written.push(paths.manifest.clone());
    Ok(written)
}

/// Node-splits under the configured model without fitting the main model.
/// `comparison` restricts the run to one `(base, head)` pair; `None` splits
/// every splittable comparison. Borrow configurations need either a
/// predictive-prior file or the full prior pipeline (run here).
pub fn run_node_splits(
    config: &AnalysisConfig,
    comparison: Option<(String, String)>,
) -> Result<Vec<NodeSplitResult>> {
    config.validate()?;
    let inputs = load_inputs(config)?;
    let sparse = &inputs.sparse;
    let (analysis_net, mu_prior) = match config.model {
        Model::Standard | Model::Pairwise => (sparse.clone(), MuPrior::vague()),
        Model::Naive => {
            let dense = inputs.dense.as_ref().expect("validated dense input");
            (sparse.merged(dense)?, MuPrior::vague())
        }
        Model::Borrow { .. } => {
            let dense = inputs.dense.as_ref().expect("validated dense input");
            let priors = match &config.predictive_priors_path {
                Some(path) => io::load_predictive_priors(path, &config.reference)?,
                None => {
                    let betas = build_beta_priors(config, sparse, dense)?;
                    let (_, priors) = run_stage1(config, sparse, dense, &betas)?;
                    priors
                }
            };
            let mut mu_prior = MuPrior::vague();
            for t in sparse.basic_treatments() {
                if let Some(p) = priors.get(t) {
                    mu_prior.insert(t, NormalPrior::new(p.mean, p.variance)?);
                }
            }
            (sparse.clone(), mu_prior)
        }
    };
    let model = NodeSplitModel {
        mu_prior,
        tau_prior: TauPrior::unit(),
    };
    let pairs = match comparison {
        Some(pair) => vec![pair],
        None => splittable_comparisons(&analysis_net),
    };
    let mut out = Vec::new();
    for (base, head) in pairs {
        let mut sub = config.sampler.clone();
        sub.seed = derive_seed(config.sampler.seed, &format!("split:{head} vs {base}"));
        out.push(node_split(&analysis_net, &base, &head, &model, &sub)?);
    }
    Ok(out)
}

/// Human-readable input diagnostics for the `validate` subcommand.
pub struct ValidationReport {
    pub lines: Vec<String>,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Loads and validates all configured inputs, reporting network shape and
/// connectivity.
pub fn validate_inputs(config: &AnalysisConfig) -> Result<ValidationReport> {
    let mut lines = Vec::new();
    let mut describe = |label: &str, network: &Network| {
        let comparisons = direct_comparisons(network);
        let components = crate::model::connectivity(network);
        lines.push(format!(
            "{label}: {} studies, {} treatments, {} direct comparisons, {} component(s)",
            network.studies().len(),
            network.treatments().len(),
            comparisons.len(),
            components.len(),
        ));
        if components.len() > 1 {
            lines.push(format!("{label}: WARNING disconnected: {components:?}"));
        }
    };
    let sparse = io::load_network(&config.sparse_path, &config.reference)?;
    describe("sparse", &sparse);
    if let Some(path) = &config.dense_path {
        let dense = io::load_network(path, &config.reference)?;
        describe("dense", &dense);
        let sets = treatment_sets(&dense, &sparse)?;
        lines.push(format!(
            "treatment sets: |T_a| = {}, |T_c| = {}",
            sets.t_a.len(),
            sets.t_c.len()
        ));
    }
    if let Some(path) = &config.expert_path {
        let responses = io::load_experts(path)?;
        let experts: std::collections::BTreeSet<&str> =
            responses.iter().map(|r| r.expert_id.as_str()).collect();
        lines.push(format!(
            "experts: {} responses from {} experts",
            responses.len(),
            experts.len()
        ));
    }
    Ok(ValidationReport { lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_nine_variants() {
        let variants = Model::all_variants();
        assert_eq!(variants.len(), 9);
        let borrow = variants
            .iter()
            .filter(|m| matches!(m, Model::Borrow { .. }))
            .count();
        assert_eq!(borrow, 6);
        // display strings are unique
        let mut names: Vec<String> = variants.iter().map(|m| m.to_string()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 9);
    }

    #[test]
    fn config_text_parsing() {
        let text = "\
# a comment
model = standard
reference = Placebo   # trailing comment
sparse = data/ca.csv
seed = 42
";
        let pairs = parse_config_text("run.cfg", text).unwrap();
        assert_eq!(pairs["model"], "standard");
        assert_eq!(pairs["reference"], "Placebo");
        assert_eq!(pairs["seed"], "42");

        let bad = "model standard\n";
        assert!(parse_config_text("run.cfg", bad).is_err());
        let dup = "model = a\nmodel = b\n";
        assert!(parse_config_text("run.cfg", dup).is_err());
    }

    #[test]
    fn config_from_pairs_and_round_trip() {
        let text = "\
model = borrow
beta_source = data
scheme = rob_dw
reference = Placebo
sparse = ca.csv
dense = gp.csv
seed = 7
iterations = 2000
burn_in = 500
scale_prior = uniform(0.4,0.6)
out = results
";
        let pairs = parse_config_text("run.cfg", text).unwrap();
        let config = AnalysisConfig::from_pairs(&pairs).unwrap();
        assert_eq!(
            config.model,
            Model::Borrow {
                beta_source: BetaSource::Data,
                scheme: Scheme::RobDw
            }
        );
        assert_eq!(config.scale_prior, ScalePrior::uniform(0.4, 0.6).unwrap());
        // round trip through to_pairs
        let regenerated = AnalysisConfig::from_pairs(&config.to_pairs()).unwrap();
        assert_eq!(regenerated.model, config.model);
        assert_eq!(regenerated.sampler, config.sampler);
        assert_eq!(regenerated.scale_prior, config.scale_prior);
    }

    #[test]
    fn config_validation_rules() {
        let mut pairs = parse_config_text(
            "c",
            "model = borrow\nbeta_source = expert\nscheme = no_dw\nreference = P\nsparse = s.csv\ndense = d.csv\n",
        )
        .unwrap();
        // expert source without expert file
        assert!(AnalysisConfig::from_pairs(&pairs).is_err());
        pairs.insert("experts".into(), "e.csv".into());
        assert!(AnalysisConfig::from_pairs(&pairs).is_ok());

        // borrow without dense
        let pairs = parse_config_text(
            "c",
            "model = borrow\nbeta_source = data\nscheme = no_dw\nreference = P\nsparse = s.csv\n",
        )
        .unwrap();
        assert!(AnalysisConfig::from_pairs(&pairs).is_err());

        // unknown key
        let pairs = parse_config_text("c", "model = standard\nreference = P\nsparse = s.csv\nbogus = 1\n").unwrap();
        assert!(AnalysisConfig::from_pairs(&pairs).is_err());
    }

    #[test]
    fn manifest_reloads_as_config() {
        let pairs = parse_config_text(
            "c",
            "model = standard\nreference = Placebo\nsparse = s.csv\nseed = 3\niterations = 1500\nburn_in = 300\n",
        )
        .unwrap();
        let config = AnalysisConfig::from_pairs(&pairs).unwrap();
        let manifest = manifest_text(&config, &[("sparse".into(), "abc123".into())], 1.5);
        let reloaded_pairs = parse_config_text("manifest.txt", &manifest).unwrap();
        let reloaded = AnalysisConfig::from_pairs(&reloaded_pairs).unwrap();
        assert_eq!(reloaded.sampler, config.sampler);
        assert_eq!(reloaded.model, config.model);
        assert_eq!(reloaded.reference, config.reference);
    }
}
