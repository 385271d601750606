//! Synthetic dataset generators for tests and benchmarks.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Family of generated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Each series is a sum of three sinusoids with random amplitude,
    /// frequency, and phase.
    SinusoidMix,
    /// An exactly rank-min(3, m) matrix: Gaussian loadings times a sinusoid
    /// basis with distinct frequencies.
    CorrelatedLowrank,
    /// AR(1) series with coefficient 0.8 and stationary start.
    Ar1,
}

/// AR coefficient used by [`SyntheticKind::Ar1`].
pub const AR1_COEFFICIENT: f64 = 0.8;

/// Generates a fully observed dataset, a pure function of its arguments.
///
/// Gaussian noise with standard deviation `noise_std` is added cell-wise
/// (for `ar1` it is the innovation std instead).
pub fn generate_synthetic(
    kind: SyntheticKind,
    m: usize,
    n: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if m < 1 || n < 8 {
        return Err(Error::Shape(format!(
            "synthetic data needs m >= 1 and n >= 8, got m={m}, n={n}"
        )));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::Param(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let mut rng = rng_from_seed(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let values = match kind {
        SyntheticKind::SinusoidMix => {
            let mut rows = Vec::with_capacity(m);
            for _ in 0..m {
                let mut amps = [0.0; 3];
                let mut freqs = [0.0; 3];
                let mut phases = [0.0; 3];
                for k in 0..3 {
                    amps[k] = rng.random_range(0.5..2.0);
                    freqs[k] = rng.random_range(1..=8) as f64;
                    phases[k] = rng.random_range(0.0..std::f64::consts::TAU);
                }
                let mut row = Vec::with_capacity(n);
                for t in 0..n {
                    let x = t as f64 / n as f64;
                    let mut v = 0.0;
                    for k in 0..3 {
                        v += amps[k] * (std::f64::consts::TAU * freqs[k] * x + phases[k]).sin();
                    }
                    if noise_std > 0.0 {
                        v += noise_std * gauss.sample(&mut rng);
                    }
                    row.push(v);
                }
                rows.push(row);
            }
            rows
        }
        SyntheticKind::CorrelatedLowrank => {
            let r = m.min(3);
            // distinct integer frequencies keep the basis exactly rank r
            let mut freq_pool: Vec<usize> = (1..=6).collect();
            let mut basis = Vec::with_capacity(r);
            for _ in 0..r {
                let pick = rng.random_range(0..freq_pool.len());
                let f = freq_pool.remove(pick) as f64;
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let row: Vec<f64> = (0..n)
                    .map(|t| (std::f64::consts::TAU * f * t as f64 / n as f64 + phase).sin())
                    .collect();
                basis.push(row);
            }
            let mut rows = Vec::with_capacity(m);
            for _ in 0..m {
                let loadings: Vec<f64> = (0..r).map(|_| gauss.sample(&mut rng)).collect();
                let mut row = vec![0.0; n];
                for (k, b) in basis.iter().enumerate() {
                    for t in 0..n {
                        row[t] += loadings[k] * b[t];
                    }
                }
                if noise_std > 0.0 {
                    for v in &mut row {
                        *v += noise_std * gauss.sample(&mut rng);
                    }
                }
                rows.push(row);
            }
            rows
        }
        SyntheticKind::Ar1 => {
            let phi = AR1_COEFFICIENT;
            let stationary_std = noise_std / (1.0 - phi * phi).sqrt();
            let mut rows = Vec::with_capacity(m);
            for _ in 0..m {
                let mut row = Vec::with_capacity(n);
                let mut x = stationary_std * gauss.sample(&mut rng);
                row.push(x);
                for _ in 1..n {
                    x = phi * x + noise_std * gauss.sample(&mut rng);
                    row.push(x);
                }
                rows.push(row);
            }
            rows
        }
    };
    Dataset::new(values)
}
