//! Seeded synthetic multi-label data with correlated labels.
//!
//! Features are standard normal. Each label thresholds a noisy linear score
//! whose weight vector mixes a few shared latent directions, so labels that
//! share directions are correlated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub q: usize,
    /// Number of shared latent directions behind the labels.
    pub latent: usize,
    /// Standard deviation of the score noise; 0 gives labels that are a
    /// deterministic function of the features.
    pub noise: f64,
    /// Label threshold in units of score standard deviation; larger values
    /// give sparser labels.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 10,
            q: 8,
            latent: 3,
            noise: 0.1,
            threshold: 0.4,
            seed: 0,
        }
    }
}

pub fn make_multilabel<T: Scalar>(config: &SyntheticConfig) -> Result<Dataset<T>> {
    let SyntheticConfig {
        n,
        d,
        q,
        latent,
        noise,
        threshold,
        seed,
    } = *config;
    if n == 0 || d == 0 || q < 2 || latent == 0 {
        return Err(Error::InvalidInput(format!(
            "synthetic data needs n >= 1, d >= 1, q >= 2, latent >= 1 (got {n}, {d}, {q}, {latent})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };

    let bases: Vec<Vec<f64>> = (0..latent)
        .map(|_| (0..d).map(|_| normal()).collect())
        .collect();
    let mixes: Vec<Vec<f64>> = (0..q)
        .map(|_| (0..latent).map(|_| normal()).collect())
        .collect();
    let weights: Vec<Vec<f64>> = mixes
        .iter()
        .map(|mix| {
            (0..d)
                .map(|k| mix.iter().zip(&bases).map(|(m, b)| m * b[k]).sum())
                .collect()
        })
        .collect();

    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| normal()).collect())
        .collect();
    let mut labels = Vec::with_capacity(n);
    for x in &features {
        let row: Vec<f64> = weights
            .iter()
            .map(|w| {
                let scale = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                let score: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / scale.max(1e-12);
                if score + noise * normal() > threshold {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        labels.push(row);
    }
    let features = Matrix::<f64>::from_rows(&features)?.cast::<T>();
    let labels = Matrix::<f64>::from_rows(&labels)?.cast::<T>();
    Dataset::new(features, labels, None)
}
