//! Command-line driver: nine NMA variants, standalone prior construction,
//! node splitting, ranking and input validation over CSV inputs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use netborrow::io::{self, ReportPaths};
use netborrow::run::{
    emit_report, parse_config_text, run_analysis, run_node_splits, run_priors, validate_inputs,
    AnalysisConfig,
};

#[derive(Parser)]
#[command(
    name = "netborrow",
    version,
    about = "Bayesian network meta-analysis for sparse networks with cross-subgroup borrowing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the configured model and write the full report bundle
    Fit(ModelArgs),
    /// Split comparisons into direct and indirect evidence
    NodeSplit(NodeSplitArgs),
    /// Construct shift priors and stage-1 predictive priors, then stop
    Priors(ModelArgs),
    /// Fit the configured model and write ranking outputs only
    Rank(ModelArgs),
    /// Load and validate the configured input files
    Validate(ModelArgs),
}

#[derive(Args)]
struct NodeSplitArgs {
    /// Comparison to split, formatted '<treatment> vs <comparator>';
    /// all splittable comparisons when omitted
    #[arg(long)]
    comparison: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
}

/// Configuration file plus per-key overrides; flags win over file entries.
#[derive(Args)]
struct ModelArgs {
    /// Flat key-value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// naive | standard | pairwise | borrow
    #[arg(long)]
    model: Option<String>,
    /// data | expert (borrow models)
    #[arg(long)]
    beta_source: Option<String>,
    /// no_dw | rob_dw | nct_dw (borrow models)
    #[arg(long)]
    scheme: Option<String>,
    /// Network reference treatment
    #[arg(long)]
    reference: Option<String>,
    /// Sparse (target) network CSV
    #[arg(long)]
    sparse: Option<PathBuf>,
    /// Dense (external) network CSV
    #[arg(long)]
    dense: Option<PathBuf>,
    /// Expert-response CSV
    #[arg(long)]
    experts: Option<PathBuf>,
    /// Predictive-prior CSV (skips stage 1)
    #[arg(long)]
    predictive_priors: Option<PathBuf>,
    /// fixed(v) | beta(a,b) | uniform(lo,hi)
    #[arg(long)]
    scale_prior: Option<String>,
    /// lower-better | higher-better
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long = "iters")]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit results even when the split R-hat gate fails
    #[arg(long)]
    allow_unconverged: bool,
    /// Export per-parameter trace CSVs and node-split density draws
    #[arg(long)]
    traces: bool,
    /// Skip node-splitting during `fit`
    #[arg(long)]
    skip_consistency: bool,
}

impl ModelArgs {
    fn resolve(&self) -> anyhow::Result<AnalysisConfig> {
        let mut pairs: BTreeMap<String, String> = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config '{}'", path.display()))?;
                parse_config_text(&path.display().to_string(), &text)?
            }
            None => BTreeMap::new(),
        };
        let mut set = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                pairs.insert(key.to_string(), v);
            }
        };
        set("model", self.model.clone());
        set("beta_source", self.beta_source.clone());
        set("scheme", self.scheme.clone());
        set("reference", self.reference.clone());
        set("sparse", self.sparse.as_ref().map(|p| p.display().to_string()));
        set("dense", self.dense.as_ref().map(|p| p.display().to_string()));
        set(
            "experts",
            self.experts.as_ref().map(|p| p.display().to_string()),
        );
        set(
            "predictive_priors",
            self.predictive_priors
                .as_ref()
                .map(|p| p.display().to_string()),
        );
        set("scale_prior", self.scale_prior.clone());
        set("direction", self.direction.clone());
        set("seed", self.seed.map(|v| v.to_string()));
        set("chains", self.chains.map(|v| v.to_string()));
        set("iterations", self.iterations.map(|v| v.to_string()));
        set("burn_in", self.burn_in.map(|v| v.to_string()));
        set("thin", self.thin.map(|v| v.to_string()));
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        if self.allow_unconverged {
            pairs.insert("allow_unconverged".into(), "true".into());
        }
        if self.traces {
            pairs.insert("traces".into(), "true".into());
        }
        if self.skip_consistency {
            pairs.insert("skip_consistency".into(), "true".into());
        }
        Ok(AnalysisConfig::from_pairs(&pairs)?)
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Fit(args) => {
            let config = args.resolve()?;
            let bundle = run_analysis(&config)?;
            let written = emit_report(&bundle, &config.out_dir)?;
            println!("model: {}", config.model);
            println!("seed: {}", config.sampler.seed);
            for path in &written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::NodeSplit(args) => {
            let config = args.model.resolve()?;
            let comparison = match &args.comparison {
                None => None,
                Some(label) => {
                    let Some((head, base)) = label.rsplit_once(" vs ") else {
                        bail!("comparison '{label}' must be '<treatment> vs <comparator>'");
                    };
                    Some((base.trim().to_string(), head.trim().to_string()))
                }
            };
            let results = run_node_splits(&config, comparison)?;
            std::fs::create_dir_all(&config.out_dir)?;
            let paths = ReportPaths::in_dir(&config.out_dir);
            io::write_consistency_csv(&paths.consistency, &results, &config.rounding)?;
            println!("wrote {}", paths.consistency.display());
            for result in &results {
                let density = config.out_dir.join(format!(
                    "density_{}.csv",
                    io::sanitize_name(&result.comparison)
                ));
                io::write_density_csv(&density, result)?;
                println!(
                    "{}: direct {:.3} [{:.3}, {:.3}], indirect {:.3} [{:.3}, {:.3}], p = {:.2}",
                    result.comparison,
                    result.direct.mean,
                    result.direct.q025,
                    result.direct.q975,
                    result.indirect.mean,
                    result.indirect.q025,
                    result.indirect.q975,
                    result.p_value,
                );
            }
            Ok(())
        }
        Command::Priors(args) => {
            let config = args.resolve()?;
            let artifacts = run_priors(&config)?;
            // stage-1 convergence gate before anything is written
            let mut failures = Vec::new();
            for meta in artifacts.stage1.params() {
                if meta.gated {
                    let rhat = netborrow::mcmc::gelman_rubin(&artifacts.stage1, &meta.name)?;
                    if rhat >= 1.1 {
                        failures.push(format!("{} (rhat {rhat:.3})", meta.name));
                    }
                }
            }
            if !failures.is_empty() && !config.allow_unconverged {
                bail!(
                    "stage-1 convergence failure: {} (rerun with --allow-unconverged to emit anyway)",
                    failures.join(", ")
                );
            }
            std::fs::create_dir_all(&config.out_dir)?;
            let beta_path = config.out_dir.join("beta_priors.csv");
            io::write_beta_priors(&artifacts.beta_priors, &beta_path)?;
            println!("wrote {}", beta_path.display());
            let predictive_path = config.out_dir.join("predictive_priors.csv");
            io::write_predictive_priors(
                &artifacts.predictive,
                &config.reference,
                &predictive_path,
            )?;
            println!("wrote {}", predictive_path.display());
            Ok(())
        }
        Command::Rank(args) => {
            let mut config = args.resolve()?;
            config.skip_consistency = true;
            let bundle = run_analysis(&config)?;
            std::fs::create_dir_all(&config.out_dir)?;
            let paths = ReportPaths::in_dir(&config.out_dir);
            io::write_sucra_csv(&paths.sucra, &bundle.sucra, &config.rounding)?;
            println!("wrote {}", paths.sucra.display());
            if let Some(ranks) = &bundle.ranks {
                io::write_rank_matrix_csv(&paths.rank_matrix, ranks, &config.rounding)?;
                println!("wrote {}", paths.rank_matrix.display());
            }
            let mut sorted = bundle.sucra.clone();
            sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite sucra"));
            for (treatment, value) in sorted {
                println!("{treatment}: SUCRA {value:.3}");
            }
            Ok(())
        }
        Command::Validate(args) => {
            let config = args.resolve()?;
            let report = validate_inputs(&config)?;
            print!("{report}");
            Ok(())
        }
    }
}
