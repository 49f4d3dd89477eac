//! Posterior sample storage, summaries and trace export.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::SamplerConfig;
use crate::{Error, Result};

/// Identity of one retained scalar parameter.
#[derive(Debug, Clone)]
pub struct ParamMeta {
    pub name: String,
    /// Name of the block the parameter belongs to.
    pub block: String,
    /// Participates in convergence gating.
    pub gated: bool,
}

/// Post-burn-in acceptance bookkeeping for one proposal kind.
#[derive(Debug, Clone)]
pub struct MoveStats {
    pub name: String,
    pub dimension: usize,
    pub adapted_scale: f64,
    pub acceptance_rate: f64,
}

/// Retained draws for all monitored parameters across chains, post burn-in
/// and thinned, on the natural scale.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    params: Vec<ParamMeta>,
    index: BTreeMap<String, usize>,
    /// chains[chain][param][draw]
    chains: Vec<Vec<Vec<f64>>>,
    pub config: SamplerConfig,
    pub acceptance: Vec<MoveStats>,
    pub warnings: Vec<String>,
}

impl PosteriorSamples {
    pub(crate) fn new(
        params: Vec<ParamMeta>,
        chains: Vec<Vec<Vec<f64>>>,
        config: SamplerConfig,
        acceptance: Vec<MoveStats>,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, p) in params.iter().enumerate() {
            if index.insert(p.name.clone(), i).is_some() {
                return Err(Error::Sampler(format!("duplicate parameter '{}'", p.name)));
            }
        }
        let n = chains.first().map_or(0, |c| c.first().map_or(0, Vec::len));
        for chain in &chains {
            if chain.len() != params.len() || chain.iter().any(|d| d.len() != n) {
                return Err(Error::Sampler("ragged draw storage".into()));
            }
        }
        Ok(PosteriorSamples {
            params,
            index,
            chains,
            config,
            acceptance,
            warnings,
        })
    }

    /// Builds sample storage directly from raw per-chain draw vectors; used by
    /// tests and by post-processing steps that need synthetic inputs.
    pub fn from_draws(names: &[&str], chains: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let params = names
            .iter()
            .map(|n| ParamMeta {
                name: n.to_string(),
                block: n.to_string(),
                gated: true,
            })
            .collect();
        let n_draws = chains.first().map_or(0, |c| c.first().map_or(0, Vec::len));
        let mut config = SamplerConfig::new(0);
        config.n_chains = chains.len();
        config.burn_in = 0;
        config.iterations = n_draws.max(1);
        PosteriorSamples::new(params, chains, config, Vec::new(), Vec::new())
    }

    pub fn params(&self) -> &[ParamMeta] {
        &self.params
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    /// Retained draws per chain.
    pub fn n_draws(&self) -> usize {
        self.chains
            .first()
            .map_or(0, |c| c.first().map_or(0, Vec::len))
    }

    fn param_index(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// Draws of one parameter within one chain.
    pub fn chain_draws(&self, chain: usize, name: &str) -> Result<&[f64]> {
        let p = self.param_index(name)?;
        self.chains
            .get(chain)
            .map(|c| c[p].as_slice())
            .ok_or_else(|| Error::Sampler(format!("chain {chain} out of range")))
    }

    /// Draws pooled over chains (chain-major order).
    pub fn pooled(&self, name: &str) -> Result<Vec<f64>> {
        let p = self.param_index(name)?;
        let mut out = Vec::with_capacity(self.n_chains() * self.n_draws());
        for chain in &self.chains {
            out.extend_from_slice(&chain[p]);
        }
        Ok(out)
    }

    /// Appends a parameter computed per draw from existing parameters.
    pub fn derive(
        &mut self,
        name: impl Into<String>,
        inputs: &[&str],
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Sampler(format!("parameter '{name}' already exists")));
        }
        let idx: Vec<usize> = inputs
            .iter()
            .map(|n| self.param_index(n))
            .collect::<Result<_>>()?;
        let n = self.n_draws();
        for chain in &mut self.chains {
            let mut column = Vec::with_capacity(n);
            let mut args = vec![0.0; idx.len()];
            #[allow(clippy::needless_range_loop)] // d indexes several columns
            for d in 0..n {
                for (arg, &p) in args.iter_mut().zip(&idx) {
                    *arg = chain[p][d];
                }
                column.push(f(&args));
            }
            chain.push(column);
        }
        self.index.insert(name.clone(), self.params.len());
        self.params.push(ParamMeta {
            name,
            block: "derived".into(),
            gated: true,
        });
        Ok(())
    }

    /// Absolute iteration numbers of the retained draws.
    pub fn retained_iterations(&self) -> Vec<usize> {
        (0..self.n_draws())
            .map(|d| self.config.burn_in + d * self.config.thin)
            .collect()
    }
}

/// Equal-tailed posterior summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

/// Mean, sd and interpolated quantiles of the pooled post-burn-in draws of
/// one parameter.
pub fn summarize(samples: &PosteriorSamples, name: &str) -> Result<PosteriorSummary> {
    let pooled = samples.pooled(name)?;
    if pooled.is_empty() {
        return Err(Error::EmptySample(name.to_string()));
    }
    Ok(summarize_draws(&pooled))
}

/// Summary of a raw draw vector (must be non-empty).
pub fn summarize_draws(draws: &[f64]) -> PosteriorSummary {
    assert!(!draws.is_empty(), "summarize_draws: empty input");
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = if draws.len() > 1 {
        (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite draw"));
    PosteriorSummary {
        mean,
        sd,
        q025: quantile_sorted(&sorted, 0.025),
        median: quantile_sorted(&sorted, 0.5),
        q975: quantile_sorted(&sorted, 0.975),
    }
}

/// Linear interpolation of order statistics (the common "type 7" rule).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Writes one CSV per parameter (columns `chain,iteration,value`) into `dir`.
/// Returns the written file names. Parameter names are sanitized for use as
/// file names.
pub fn export_traces(samples: &PosteriorSamples, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let iterations = samples.retained_iterations();
    let mut written = Vec::new();
    for meta in samples.params() {
        let file_name = format!("trace_{}.csv", sanitize(&meta.name));
        let path = dir.join(&file_name);
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?,
        );
        let write = |out: &mut dyn Write| -> std::io::Result<()> {
            writeln!(out, "chain,iteration,value")?;
            for chain in 0..samples.n_chains() {
                let draws = samples
                    .chain_draws(chain, &meta.name)
                    .expect("parameter exists");
                for (d, value) in draws.iter().enumerate() {
                    writeln!(out, "{},{},{}", chain, iterations[d], value)?;
                }
            }
            Ok(())
        };
        write(&mut out).map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(file_name);
    }
    Ok(written)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}
