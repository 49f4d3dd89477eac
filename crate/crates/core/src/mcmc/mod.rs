//! Adaptive random-walk Metropolis-within-Gibbs over a user-supplied
//! log-posterior.
//!
//! The sampler updates parameter blocks one at a time with Gaussian
//! random-walk proposals on an internal unconstrained scale (log for positive
//! parameters, logit for unit-interval ones) and adds the matching Jacobian
//! terms itself; the target density is always written on the natural scale.
//! Proposal scales follow Robbins-Monro adaptation on the log scale during
//! burn-in only and stay frozen afterwards, so the post-burn-in chain is a
//! plain Markov chain.
//!
//! Models can register [`CustomMove`]s: deterministic maps driven by a
//! symmetric Gaussian innovation (shear and rescale moves). These fix the
//! slow mixing of centered hierarchical parameterizations when the
//! heterogeneity is near zero.
//!
//! Chains are independent given the configuration: chain `c` derives its RNG
//! stream as `seed ^ c`, so single-chain and parallel execution produce the
//! same draws.

mod diagnostics;
mod samples;

pub use diagnostics::{gelman_rubin, mcse, split_rhat_from_chains};
pub use samples::{
    export_traces, summarize, summarize_draws, MoveStats, ParamMeta, PosteriorSamples,
    PosteriorSummary,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

/// Support of a parameter block; bounded supports are sampled on a
/// transformed unbounded scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Unbounded,
    Positive,
    UnitInterval,
}

impl Support {
    pub fn contains(self, x: f64) -> bool {
        match self {
            Support::Unbounded => x.is_finite(),
            Support::Positive => x.is_finite() && x > 0.0,
            Support::UnitInterval => x.is_finite() && x > 0.0 && x < 1.0,
        }
    }

    /// Natural -> internal (unconstrained) scale.
    fn to_internal(self, x: f64) -> f64 {
        match self {
            Support::Unbounded => x,
            Support::Positive => x.ln(),
            Support::UnitInterval => (x / (1.0 - x)).ln(),
        }
    }

    /// Internal -> natural scale.
    fn to_natural(self, z: f64) -> f64 {
        match self {
            Support::Unbounded => z,
            Support::Positive => z.exp(),
            Support::UnitInterval => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// log |dx/dz| at internal value z.
    fn log_jacobian(self, z: f64) -> f64 {
        match self {
            Support::Unbounded => 0.0,
            Support::Positive => z,
            // log sigmoid(z) + log sigmoid(-z)
            Support::UnitInterval => -softplus(-z) - softplus(z),
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// One block of parameters updated jointly by a random-walk proposal.
#[derive(Debug, Clone)]
pub struct ParameterBlock {
    pub name: String,
    pub support: Support,
    pub initial: Vec<f64>,
    /// Per-coordinate display names; defaults to `name[i]` (or `name` for
    /// one-dimensional blocks).
    pub labels: Option<Vec<String>>,
    /// Per-coordinate proposal preconditioner on the internal scale.
    pub prescale: Option<Vec<f64>>,
    /// Half-width of the uniform per-chain initialization jitter applied on
    /// the internal scale.
    pub jitter: f64,
    /// Whether draws of this block are retained in the output.
    pub monitored: bool,
    /// Whether this block participates in convergence gating (non-latent
    /// model parameters).
    pub gated: bool,
}

impl ParameterBlock {
    pub fn new(name: impl Into<String>, support: Support, initial: Vec<f64>) -> Self {
        ParameterBlock {
            name: name.into(),
            support,
            initial,
            labels: None,
            prescale: None,
            jitter: 0.5,
            monitored: true,
            gated: true,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_prescale(mut self, prescale: Vec<f64>) -> Self {
        self.prescale = Some(prescale);
        self
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn latent(mut self) -> Self {
        self.gated = false;
        self
    }

    pub fn dimension(&self) -> usize {
        self.initial.len()
    }

    pub fn coord_name(&self, i: usize) -> String {
        if let Some(labels) = &self.labels {
            return labels[i].clone();
        }
        if self.dimension() == 1 {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, i)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.initial.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "block '{}' has dimension 0",
                self.name
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.dimension() {
                return Err(Error::InvalidConfig(format!(
                    "block '{}': {} labels for {} coordinates",
                    self.name,
                    labels.len(),
                    self.dimension()
                )));
            }
        }
        if let Some(pre) = &self.prescale {
            if pre.len() != self.dimension() || pre.iter().any(|p| !(*p > 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "block '{}': invalid prescale",
                    self.name
                )));
            }
        }
        for (i, &x) in self.initial.iter().enumerate() {
            if !self.support.contains(x) {
                return Err(Error::InvalidConfig(format!(
                    "block '{}': initial value {} of coordinate {} outside support",
                    self.name, x, i
                )));
            }
        }
        Ok(())
    }
}

/// Sampler settings. Defaults follow the usual two-chain 50k/10k setup.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Iterations over which proposal scales adapt; at most `burn_in`.
    pub adapt_window: usize,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        SamplerConfig {
            n_chains: 2,
            iterations: 50_000,
            burn_in: 10_000,
            thin: 1,
            seed,
            adapt_window: 10_000,
        }
    }

    /// Shorter runs for tests and exploration.
    pub fn with_run_length(mut self, iterations: usize, burn_in: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self.adapt_window = burn_in;
        self
    }

    pub fn with_chains(mut self, n_chains: usize) -> Self {
        self.n_chains = n_chains;
        self
    }

    pub fn with_thin(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig("n_chains must be >= 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn_in {} must be < iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be >= 1".into()));
        }
        if self.adapt_window > self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "adapt_window {} must be <= burn_in {}",
                self.adapt_window, self.burn_in
            )));
        }
        Ok(())
    }

    /// Number of retained draws per chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// A log-posterior the sampler can evaluate either in full or as a local
/// difference for a proposed block change. `delta` must agree with
/// `log_density` up to floating-point round-off; the default recomputes in
/// full.
pub trait Target: Sync {
    /// Log density at the natural-scale state, one `Vec` per block.
    fn log_density(&self, state: &[Vec<f64>]) -> f64;

    /// `log_density(state with updates) - log_density(state)`.
    fn delta(&self, state: &[Vec<f64>], updates: &[(usize, Vec<f64>)]) -> f64 {
        let mut proposed: Vec<Vec<f64>> = state.to_vec();
        for (block, values) in updates {
            proposed[*block] = values.clone();
        }
        self.log_density(&proposed) - self.log_density(state)
    }

    /// Names the block responsible for a non-finite density at `state`, when
    /// the target can tell (factored targets can).
    fn attribute_non_finite(&self, _state: &[Vec<f64>]) -> Option<String> {
        None
    }
}

/// Adapter for plain closures.
pub struct FnTarget<F>(pub F);

impl<F> Target for FnTarget<F>
where
    F: Fn(&[Vec<f64>]) -> f64 + Sync,
{
    fn log_density(&self, state: &[Vec<f64>]) -> f64 {
        (self.0)(state)
    }
}

/// Proposed natural-scale updates plus the log determinant of the proposal
/// map (0 for volume-preserving shears).
pub type Proposal = (Vec<(usize, Vec<f64>)>, f64);

/// A deterministic proposal map driven by a symmetric Gaussian innovation of
/// the given adapted scale. The map with innovation `-eps` must invert the map
/// with `+eps`.
pub struct CustomMove {
    pub name: String,
    pub dimension: usize,
    pub initial_scale: f64,
    #[allow(clippy::type_complexity)]
    pub propose: Box<dyn Fn(&[Vec<f64>], f64, &mut ChaCha8Rng) -> Proposal + Sync + Send>,
}

struct MoveState {
    name: String,
    dimension: usize,
    log_scale: f64,
    target_rate: f64,
    accepted_post: u64,
    proposed_post: u64,
    acc_sum: f64,
    acc_count: u64,
}

impl MoveState {
    fn new(name: String, dimension: usize, initial_scale: f64) -> Self {
        let target_rate = match dimension {
            1 => 0.44,
            2..=4 => 0.35,
            _ => 0.25,
        };
        MoveState {
            name,
            dimension,
            log_scale: initial_scale.ln(),
            target_rate,
            accepted_post: 0,
            proposed_post: 0,
            acc_sum: 0.0,
            acc_count: 0,
        }
    }

    fn adapt(&mut self, iteration: usize, alpha: f64) {
        let eta = 2.0 * (iteration as f64 + 20.0).powf(-0.6);
        self.log_scale += eta * (alpha - self.target_rate);
        self.log_scale = self.log_scale.clamp(-20.0, 10.0);
    }
}

/// Runs `n_chains` independent chains of adaptive random-walk
/// Metropolis-within-Gibbs against a black-box log-posterior.
///
/// Deterministic given the configuration: chain `c` uses the derived seed
/// `config.seed ^ c`.
pub fn run_chains<F>(
    log_posterior: F,
    blocks: Vec<ParameterBlock>,
    config: &SamplerConfig,
) -> Result<PosteriorSamples>
where
    F: Fn(&[Vec<f64>]) -> f64 + Sync,
{
    run_sampler(&FnTarget(log_posterior), blocks, Vec::new(), config)
}

/// Like [`run_chains`] but with a factored target and extra structured moves.
pub fn run_sampler<T: Target>(
    target: &T,
    blocks: Vec<ParameterBlock>,
    moves: Vec<CustomMove>,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    if blocks.is_empty() {
        return Err(Error::InvalidConfig("no parameter blocks".into()));
    }
    for block in &blocks {
        block.validate()?;
    }

    let chain_results: Vec<Result<ChainRun>> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_one_chain(target, &blocks, &moves, config, c as u64))
        .collect();

    let mut chains = Vec::with_capacity(config.n_chains);
    let mut acceptance: Vec<MoveStats> = Vec::new();
    let mut warnings = Vec::new();
    for (c, result) in chain_results.into_iter().enumerate() {
        let run = result?;
        chains.push(run.draws);
        warnings.extend(run.warnings);
        if c == 0 {
            acceptance = run.stats;
        } else {
            for (agg, stat) in acceptance.iter_mut().zip(run.stats) {
                agg.acceptance_rate =
                    (agg.acceptance_rate * c as f64 + stat.acceptance_rate) / (c as f64 + 1.0);
            }
        }
    }

    let mut params = Vec::new();
    for block in &blocks {
        if !block.monitored {
            continue;
        }
        for i in 0..block.dimension() {
            params.push(ParamMeta {
                name: block.coord_name(i),
                block: block.name.clone(),
                gated: block.gated,
            });
        }
    }

    PosteriorSamples::new(params, chains, config.clone(), acceptance, warnings)
}

struct ChainRun {
    /// draws[param][iteration]
    draws: Vec<Vec<f64>>,
    stats: Vec<MoveStats>,
    warnings: Vec<String>,
}

fn run_one_chain<T: Target>(
    target: &T,
    blocks: &[ParameterBlock],
    moves: &[CustomMove],
    config: &SamplerConfig,
    chain: u64,
) -> Result<ChainRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ chain);

    // Initialize on the internal scale with per-chain jitter so chains start
    // overdispersed relative to each other.
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(blocks.len());
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(blocks.len());
    for block in blocks {
        let mut zb = Vec::with_capacity(block.dimension());
        let mut xb = Vec::with_capacity(block.dimension());
        for &init in &block.initial {
            let base = block.support.to_internal(init);
            let u: f64 = rng.random();
            let zi = base + block.jitter * (2.0 * u - 1.0);
            zb.push(zi);
            xb.push(block.support.to_natural(zi));
        }
        z.push(zb);
        x.push(xb);
    }

    if !target.log_density(&x).is_finite() {
        return Err(init_failure(target, blocks, &x));
    }

    let mut move_states: Vec<MoveState> = blocks
        .iter()
        .map(|b| {
            MoveState::new(
                format!("block:{}", b.name),
                b.dimension(),
                2.38 / (b.dimension() as f64).sqrt(),
            )
        })
        .chain(moves.iter().map(|m| {
            MoveState::new(format!("move:{}", m.name), m.dimension, m.initial_scale)
        }))
        .collect();

    let monitored: Vec<usize> = blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.monitored)
        .map(|(i, _)| i)
        .collect();
    let n_coords: usize = monitored.iter().map(|&b| blocks[b].dimension()).sum();
    let mut draws: Vec<Vec<f64>> = vec![Vec::with_capacity(config.retained()); n_coords];

    let mut z_prop: Vec<f64> = Vec::new();
    let mut x_prop: Vec<f64> = Vec::new();

    for iteration in 0..config.iterations {
        let adapting = iteration < config.adapt_window;
        let post_burn = iteration >= config.burn_in;

        for (b, block) in blocks.iter().enumerate() {
            let state = &mut move_states[b];
            let scale = state.log_scale.exp();
            z_prop.clear();
            x_prop.clear();
            let mut jac_delta = 0.0;
            for i in 0..block.dimension() {
                let pre = block.prescale.as_ref().map_or(1.0, |p| p[i]);
                let step: f64 = scale * pre * standard_normal(&mut rng);
                let zi = z[b][i] + step;
                jac_delta += block.support.log_jacobian(zi) - block.support.log_jacobian(z[b][i]);
                z_prop.push(zi);
                x_prop.push(block.support.to_natural(zi));
            }
            let u: f64 = rng.random();
            let delta = target.delta(&x, &[(b, x_prop.clone())]) + jac_delta;
            let alpha = acceptance_probability(delta);
            if u < alpha {
                z[b].copy_from_slice(&z_prop);
                x[b].copy_from_slice(&x_prop);
                if post_burn {
                    state.accepted_post += 1;
                }
            }
            if post_burn {
                state.proposed_post += 1;
            }
            state.acc_sum += alpha;
            state.acc_count += 1;
            if adapting {
                state.adapt(iteration, alpha);
            }
        }

        for (m, mv) in moves.iter().enumerate() {
            let state = &mut move_states[blocks.len() + m];
            let scale = state.log_scale.exp();
            let (updates, correction) = (mv.propose)(&x, scale, &mut rng);
            let u: f64 = rng.random();
            let mut valid = true;
            for (b, values) in &updates {
                if values.iter().any(|v| !blocks[*b].support.contains(*v)) {
                    valid = false;
                    break;
                }
            }
            let alpha = if valid {
                acceptance_probability(target.delta(&x, &updates) + correction)
            } else {
                0.0
            };
            if u < alpha {
                for (b, values) in updates {
                    for (i, v) in values.iter().enumerate() {
                        z[b][i] = blocks[b].support.to_internal(*v);
                    }
                    x[b] = values;
                }
                if post_burn {
                    state.accepted_post += 1;
                }
            }
            if post_burn {
                state.proposed_post += 1;
            }
            state.acc_sum += alpha;
            state.acc_count += 1;
            if adapting {
                state.adapt(iteration, alpha);
            }
        }

        if post_burn && (iteration - config.burn_in).is_multiple_of(config.thin) {
            let mut k = 0;
            for &b in &monitored {
                for &v in &x[b] {
                    draws[k].push(v);
                    k += 1;
                }
            }
        }
    }

    let mut warnings = Vec::new();
    let stats: Vec<MoveStats> = move_states
        .iter()
        .map(|s| {
            if s.proposed_post > 0 && s.accepted_post == 0 {
                warnings.push(format!(
                    "chain {chain}: no post-burn-in acceptances for {}",
                    s.name
                ));
            }
            MoveStats {
                name: s.name.clone(),
                dimension: s.dimension,
                adapted_scale: s.log_scale.exp(),
                acceptance_rate: if s.proposed_post > 0 {
                    s.accepted_post as f64 / s.proposed_post as f64
                } else {
                    s.acc_sum / s.acc_count.max(1) as f64
                },
            }
        })
        .collect();

    Ok(ChainRun {
        draws,
        stats,
        warnings,
    })
}

/// Derives an independent seed for a named sub-task (per-comparison fits,
/// predictive draws) from a base seed via FNV-1a over the label.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in label.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    base ^ hash
}

fn acceptance_probability(delta: f64) -> f64 {
    if delta.is_nan() {
        return 0.0;
    }
    delta.min(0.0).exp()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Attributes a non-finite initial log-posterior to a block, first by asking
/// the target, then by restoring each block to its unjittered initial values
/// in turn.
fn init_failure<T: Target>(target: &T, blocks: &[ParameterBlock], x: &[Vec<f64>]) -> Error {
    if let Some(block) = target.attribute_non_finite(x) {
        return Error::Sampler(format!(
            "non-finite log-posterior at initialization (block '{block}')"
        ));
    }
    for (b, block) in blocks.iter().enumerate() {
        let mut restored = x.to_vec();
        restored[b] = block.initial.clone();
        if target.log_density(&restored).is_finite() {
            return Error::Sampler(format!(
                "non-finite log-posterior at initialization (block '{}')",
                block.name
            ));
        }
    }
    Error::Sampler("non-finite log-posterior at initialization".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn standard_normal_target() -> impl Fn(&[Vec<f64>]) -> f64 {
        |state: &[Vec<f64>]| {
            let x = state[0][0];
            -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln()
        }
    }

    #[test]
    fn samples_standard_normal() {
        let config = SamplerConfig::new(7);
        let blocks = vec![ParameterBlock::new("x", Support::Unbounded, vec![0.0])];
        let samples = run_chains(standard_normal_target(), blocks, &config).unwrap();
        let summary = summarize(&samples, "x").unwrap();
        let se = mcse(&samples, "x").unwrap();
        assert!(
            summary.mean.abs() <= 3.0 * se,
            "mean {} outside 3 mcse {}",
            summary.mean,
            se
        );
        assert_relative_eq!(summary.sd, 1.0, max_relative = 0.05);
    }

    #[test]
    fn peaked_target_stays_at_mode() {
        let config = SamplerConfig::new(11).with_run_length(4_000, 1_000);
        let target = |state: &[Vec<f64>]| {
            let x = state[0][0];
            -0.5 * ((x - 3.0) / 1e-4).powi(2)
        };
        let blocks = vec![
            ParameterBlock::new("x", Support::Unbounded, vec![3.0]).with_jitter(1e-5)
        ];
        let samples = run_chains(target, blocks, &config).unwrap();
        let summary = summarize(&samples, "x").unwrap();
        assert!((summary.mean - 3.0).abs() < 1e-3);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let config = SamplerConfig::new(99).with_run_length(2_000, 500);
        let blocks = || vec![ParameterBlock::new("x", Support::Unbounded, vec![0.0])];
        let a = run_chains(standard_normal_target(), blocks(), &config).unwrap();
        let b = run_chains(standard_normal_target(), blocks(), &config).unwrap();
        for chain in 0..2 {
            assert_eq!(
                a.chain_draws(chain, "x").unwrap(),
                b.chain_draws(chain, "x").unwrap()
            );
        }
    }

    #[test]
    fn support_is_preserved() {
        let config = SamplerConfig::new(3).with_run_length(3_000, 500);
        // Gamma(2,1)-ish positive target and a Beta(2,2) unit target.
        let target = |state: &[Vec<f64>]| {
            let t = state[0][0];
            let w = state[1][0];
            t.ln() - t + w.ln() + (1.0 - w).ln()
        };
        let blocks = vec![
            ParameterBlock::new("t", Support::Positive, vec![1.0]),
            ParameterBlock::new("w", Support::UnitInterval, vec![0.5]),
        ];
        let samples = run_sampler(&FnTarget(target), blocks, Vec::new(), &config).unwrap();
        for chain in 0..2 {
            assert!(samples
                .chain_draws(chain, "t")
                .unwrap()
                .iter()
                .all(|&v| v > 0.0));
            assert!(samples
                .chain_draws(chain, "w")
                .unwrap()
                .iter()
                .all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn conjugate_normal_normal_matches_closed_form() {
        // Prior N(0, 4), one observation y = 1.5 with variance 1.
        // Posterior: N(1.5 * 4/5, 4/5).
        let config = SamplerConfig::new(21);
        let target = |state: &[Vec<f64>]| {
            let x = state[0][0];
            -0.5 * x * x / 4.0 - 0.5 * (1.5 - x).powi(2)
        };
        let blocks = vec![ParameterBlock::new("x", Support::Unbounded, vec![0.0])];
        let samples = run_chains(target, blocks, &config).unwrap();
        let summary = summarize(&samples, "x").unwrap();
        let se = mcse(&samples, "x").unwrap();
        assert!((summary.mean - 1.2).abs() <= 3.0 * se);
        assert_relative_eq!(summary.sd * summary.sd, 0.8, max_relative = 0.05);
    }

    #[test]
    fn non_finite_initial_state_names_block() {
        let config = SamplerConfig::new(5).with_run_length(100, 10);
        // Admits only the exact initial value of the second block, so the
        // initialization jitter is what breaks it.
        let target = |state: &[Vec<f64>]| {
            let x = state[0][0];
            let t = state[1][0];
            if (t - 5.0).abs() > 1e-9 {
                f64::NEG_INFINITY
            } else {
                -0.5 * x * x
            }
        };
        let blocks = vec![
            ParameterBlock::new("x", Support::Unbounded, vec![0.0]),
            ParameterBlock::new("bad", Support::Unbounded, vec![5.0]),
        ];
        let err = run_chains(target, blocks, &config).unwrap_err();
        assert!(err.to_string().contains("bad"), "got: {err}");
    }

    #[test]
    fn custom_shear_move_keeps_target_invariant() {
        // Bivariate: x ~ N(0,1), y ~ N(x, 0.01): strong coupling; the shear
        // move (shift x and y together) is what makes this mix.
        let config = SamplerConfig::new(13);
        let target = |state: &[Vec<f64>]| {
            let x = state[0][0];
            let y = state[1][0];
            -0.5 * x * x - 0.5 * (y - x).powi(2) / 0.01
        };
        let shear = CustomMove {
            name: "shift_xy".into(),
            dimension: 1,
            initial_scale: 1.0,
            propose: Box::new(|state, scale, rng| {
                let eps = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
                (
                    vec![
                        (0, vec![state[0][0] + eps]),
                        (1, vec![state[1][0] + eps]),
                    ],
                    0.0,
                )
            }),
        };
        let blocks = vec![
            ParameterBlock::new("x", Support::Unbounded, vec![0.0]),
            ParameterBlock::new("y", Support::Unbounded, vec![0.0]),
        ];
        let samples = run_sampler(&FnTarget(target), blocks, vec![shear], &config).unwrap();
        let sx = summarize(&samples, "x").unwrap();
        let se = mcse(&samples, "x").unwrap();
        assert!(sx.mean.abs() <= 3.0 * se, "mean {} se {}", sx.mean, se);
        assert_relative_eq!(sx.sd, 1.0, max_relative = 0.06);
        let rhat = gelman_rubin(&samples, "x").unwrap();
        assert!(rhat < 1.05, "rhat {rhat}");
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(1).validate().is_ok());
        let mut bad = SamplerConfig::new(1);
        bad.burn_in = bad.iterations;
        assert!(bad.validate().is_err());
        let mut bad = SamplerConfig::new(1);
        bad.thin = 0;
        assert!(bad.validate().is_err());
        let mut bad = SamplerConfig::new(1);
        bad.adapt_window = bad.burn_in + 1;
        assert!(bad.validate().is_err());
    }
}
