//! Shared synthetic-data generators for the integration and acceptance
//! suites. Everything is seeded; observed arm SDs equal the generating SD so
//! the standardized scale of the generated effects is exact.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netborrow::model::{Arm, Network, Study};

pub fn ca_network() -> Network {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/ca_shaped.csv");
    netborrow::io::load_network(&path, "Placebo").expect("fixture loads")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Ground truth of the two-subgroup benchmark.
pub struct BenchmarkTruth {
    /// True sparse-subgroup effect vs T01 per treatment.
    pub sparse_effects: BTreeMap<String, f64>,
    pub shift: f64,
    pub tau: f64,
}

pub const BENCH_REFERENCE: &str = "T01";

fn treatment(i: usize) -> String {
    format!("T{i:02}")
}

/// Benchmark generator: a 10-study 8-treatment sparse network (one study per
/// comparison) and a 120-study 12-treatment dense network whose effects sit a
/// constant `shift = 0.2` away from the sparse truth, both with `tau = 0.1`.
pub fn gen_benchmark(seed: u64) -> (Network, Network, BenchmarkTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = 0.2;
    let tau = 0.1;
    let sd = 10.0;

    let sparse_effect: Vec<f64> = vec![0.0, -0.6, -0.5, -0.4, -0.3, -0.2, -0.1, 0.1];
    let dense_only: Vec<f64> = vec![-0.55, -0.35, -0.15, 0.25];
    let effect_sparse = |i: usize| sparse_effect[i - 1];
    let effect_dense = |i: usize| {
        if i <= 8 {
            sparse_effect[i - 1] + shift
        } else {
            dense_only[i - 9] + shift
        }
    };

    let make_study = |id: String,
                          subgroup: &str,
                          arms_idx: &[usize],
                          n: u32,
                          effect: &dyn Fn(usize) -> f64,
                          rng: &mut ChaCha8Rng,
                          high_rob: bool| {
        let base = arms_idx[0];
        let theta_base = -10.0 + 2.0 * normal(rng);
        let se = sd / (n as f64).sqrt();
        let mut arms = Vec::with_capacity(arms_idx.len());
        arms.push(
            Arm::new(treatment(base), n, theta_base + se * normal(rng), sd).unwrap(),
        );
        // compound-symmetric contrasts: delta_k = m_k + tau (u + z_k)/sqrt(2)
        let u = normal(rng);
        for &idx in &arms_idx[1..] {
            let m = effect(idx) - effect(base);
            let delta = m + tau * (u + normal(rng)) / std::f64::consts::SQRT_2;
            arms.push(
                Arm::new(
                    treatment(idx),
                    n,
                    theta_base + delta * sd + se * normal(rng),
                    sd,
                )
                .unwrap(),
            );
        }
        Study::new(id, subgroup, arms, Some(high_rob)).unwrap()
    };

    // sparse: 7 vs-reference studies + 3 head-to-head, one study/comparison
    let mut sparse_studies = Vec::new();
    for j in 2..=8 {
        sparse_studies.push(make_study(
            format!("sp{j:02}"),
            "P1",
            &[1, j],
            50,
            &effect_sparse,
            &mut rng,
            false,
        ));
    }
    for (k, pair) in [[2, 3], [4, 5], [6, 7]].iter().enumerate() {
        sparse_studies.push(make_study(
            format!("sph{k}"),
            "P1",
            pair,
            50,
            &effect_sparse,
            &mut rng,
            false,
        ));
    }
    let sparse = Network::new("P1", sparse_studies, BENCH_REFERENCE).unwrap();

    // dense: 21 edges, 114 two-arm studies round-robin + 6 three-arm
    let mut edges: Vec<Vec<usize>> = Vec::new();
    for j in 2..=12 {
        edges.push(vec![1, j]);
    }
    for j in 2..=11 {
        edges.push(vec![j, j + 1]);
    }
    let mut dense_studies = Vec::new();
    for s in 0..114 {
        let edge = &edges[s % edges.len()];
        dense_studies.push(make_study(
            format!("dn{s:03}"),
            "P2",
            edge,
            100,
            &effect_dense,
            &mut rng,
            s % 8 == 0,
        ));
    }
    for (k, arms) in [[1, 2, 3], [1, 4, 5], [1, 6, 7], [1, 8, 9], [1, 10, 11], [1, 11, 12]]
        .iter()
        .enumerate()
    {
        dense_studies.push(make_study(
            format!("dn3a{k}"),
            "P2",
            arms,
            100,
            &effect_dense,
            &mut rng,
            false,
        ));
    }
    let dense = Network::new("P2", dense_studies, BENCH_REFERENCE).unwrap();

    let mut sparse_effects = BTreeMap::new();
    for j in 2..=8 {
        sparse_effects.insert(treatment(j), effect_sparse(j));
    }
    (
        sparse,
        dense,
        BenchmarkTruth {
            sparse_effects,
            shift,
            tau,
        },
    )
}

/// Triangle network (A, B, C) with two studies per edge. The B-C direct
/// evidence is displaced by `direct_shift` standardized units; zero gives a
/// consistency-true replicate.
pub fn gen_triangle(seed: u64, direct_shift: f64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = 8.0;
    let tau = 0.05;
    let n = 80;
    let (mu_ab, mu_ac) = (-0.4, -0.8);
    let mu_bc = mu_ac - mu_ab;
    let mut studies = Vec::new();
    let mut push = |id: String, base: &str, head: &str, truth: f64, rng: &mut ChaCha8Rng| {
        let theta = -5.0 + 2.0 * normal(rng);
        let se = sd / (n as f64).sqrt();
        let delta = truth + tau * normal(rng);
        let arms = vec![
            Arm::new(base, n, theta + se * normal(rng), sd).unwrap(),
            Arm::new(head, n, theta + delta * sd + se * normal(rng), sd).unwrap(),
        ];
        studies.push(Study::new(id, "P1", arms, Some(false)).unwrap());
    };
    for r in 0..2 {
        push(format!("ab{r}"), "A", "B", mu_ab, &mut rng);
        push(format!("ac{r}"), "A", "C", mu_ac, &mut rng);
        push(format!("bc{r}"), "B", "C", mu_bc + direct_shift, &mut rng);
    }
    Network::new("P1", studies, "A").unwrap()
}
