//! Convergence diagnostics: split potential scale reduction and Monte-Carlo
//! standard errors.

use super::PosteriorSamples;
use crate::{Error, Result};

/// Split potential scale reduction factor for one parameter.
///
/// Each chain is halved (dropping the middle draw when the length is odd) and
/// the classic between/within variance ratio is computed over the half-chains.
/// Identical chains give a value of `sqrt((n-1)/n) <= 1`; values of 1.1 or
/// above flag non-convergence.
pub fn gelman_rubin(samples: &PosteriorSamples, parameter: &str) -> Result<f64> {
    if samples.n_chains() < 2 {
        return Err(Error::SingleChain);
    }
    if samples.n_draws() < 10 {
        return Err(Error::Sampler(format!(
            "gelman_rubin needs >= 10 draws per chain, got {}",
            samples.n_draws()
        )));
    }
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * samples.n_chains());
    let mut owned: Vec<Vec<f64>> = Vec::new();
    for chain in 0..samples.n_chains() {
        let draws = samples.chain_draws(chain, parameter)?;
        let half = draws.len() / 2;
        owned.push(draws[..half].to_vec());
        owned.push(draws[draws.len() - half..].to_vec());
    }
    for h in &owned {
        halves.push(h.as_slice());
    }
    Ok(split_rhat_from_chains(&halves))
}

/// Potential scale reduction over pre-split chains of equal length.
pub fn split_rhat_from_chains(chains: &[&[f64]]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0) as f64;
    let means: Vec<f64> = chains
        .iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let vars: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (c.len() as f64 - 1.0))
        .collect();
    let w = vars.iter().sum::<f64>() / vars.len() as f64;
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let b_over_n =
        means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0);
    if w == 0.0 {
        if b_over_n == 0.0 {
            // all chains constant and equal
            return ((n - 1.0) / n).sqrt();
        }
        return f64::INFINITY;
    }
    (((n - 1.0) / n) + b_over_n / w).sqrt()
}

/// Monte-Carlo standard error of the posterior mean via batch means pooled
/// over chains.
pub fn mcse(samples: &PosteriorSamples, parameter: &str) -> Result<f64> {
    let n = samples.n_draws();
    if n == 0 {
        return Err(Error::EmptySample(parameter.to_string()));
    }
    let batches_per_chain = 20.min(n);
    let batch_len = (n / batches_per_chain).max(1);
    let mut batch_means = Vec::new();
    for chain in 0..samples.n_chains() {
        let draws = samples.chain_draws(chain, parameter)?;
        for b in 0..batches_per_chain {
            let start = b * batch_len;
            let end = ((b + 1) * batch_len).min(n);
            if start >= end {
                break;
            }
            let m = draws[start..end].iter().sum::<f64>() / (end - start) as f64;
            batch_means.push(m);
        }
    }
    let k = batch_means.len() as f64;
    if batch_means.len() < 2 {
        return Ok(f64::INFINITY);
    }
    let grand = batch_means.iter().sum::<f64>() / k;
    let var = batch_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1.0);
    Ok((var / k).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_chains_give_rhat_at_most_one() {
        let draws: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let samples =
            PosteriorSamples::from_draws(&["x"], vec![vec![draws.clone()], vec![draws]]).unwrap();
        let rhat = gelman_rubin(&samples, "x").unwrap();
        assert!(rhat <= 1.0, "rhat {rhat}");
    }

    #[test]
    fn independent_same_distribution_chains_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut chain = || -> Vec<f64> {
            (0..20_000)
                .map(|_| rng.sample(rand_distr::StandardNormal))
                .collect()
        };
        let samples =
            PosteriorSamples::from_draws(&["x"], vec![vec![chain()], vec![chain()]]).unwrap();
        let rhat = gelman_rubin(&samples, "x").unwrap();
        assert!(rhat < 1.1, "rhat {rhat}");
    }

    #[test]
    fn disjoint_chains_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let chain_at = |rng: &mut ChaCha8Rng, center: f64| -> Vec<f64> {
            (0..5_000)
                .map(|_| center + rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        };
        let a = chain_at(&mut rng, 0.0);
        let b = chain_at(&mut rng, 10.0);
        let samples = PosteriorSamples::from_draws(&["x"], vec![vec![a], vec![b]]).unwrap();
        let rhat = gelman_rubin(&samples, "x").unwrap();
        assert!(rhat > 1.5, "rhat {rhat}");
    }

    #[test]
    fn single_chain_errors() {
        let samples = PosteriorSamples::from_draws(&["x"], vec![vec![vec![0.0; 100]]]).unwrap();
        assert!(matches!(
            gelman_rubin(&samples, "x"),
            Err(crate::Error::SingleChain)
        ));
    }

    #[test]
    fn trending_chains_are_caught_by_splitting() {
        // Both chains drift identically from -1 to 1; unsplit R-hat would look
        // fine, the split variant must not.
        let drift: Vec<f64> = (0..2000).map(|i| -1.0 + 2.0 * i as f64 / 2000.0).collect();
        let samples =
            PosteriorSamples::from_draws(&["x"], vec![vec![drift.clone()], vec![drift]]).unwrap();
        let rhat = gelman_rubin(&samples, "x").unwrap();
        assert!(rhat > 1.5, "rhat {rhat}");
    }

    #[test]
    fn mcse_scales_with_sample_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<f64> = (0..40_000)
            .map(|_| rng.sample(rand_distr::StandardNormal))
            .collect();
        let samples = PosteriorSamples::from_draws(&["x"], vec![vec![draws]]).unwrap();
        let se = mcse(&samples, "x").unwrap();
        // Independent draws: mcse ~ 1/sqrt(40000) = 0.005
        assert!(se > 0.002 && se < 0.01, "mcse {se}");
    }
}
