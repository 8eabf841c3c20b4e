use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::problem::RandomSource;

/// Synthetic data generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Gaussian rows, `y = aᵀx* + noise·ε`.
    GaussianLs,
    /// Gaussian rows, `y = sign(aᵀx*)` flipped with probability `noise`.
    SeparableLogistic,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_ls" => Ok(SynthKind::GaussianLs),
            "separable_logistic" => Ok(SynthKind::SeparableLogistic),
            other => Err(Error::Input(format!(
                "unknown synthetic data kind `{other}`"
            ))),
        }
    }
}

impl SynthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::GaussianLs => "gaussian_ls",
            SynthKind::SeparableLogistic => "separable_logistic",
        }
    }
}

/// Generates a dataset; deterministic in `seed`.
pub fn synth_data(seed: u64, n: usize, d: usize, kind: SynthKind, noise: f64) -> Result<Dataset> {
    synth_data_with_truth(seed, n, d, kind, noise).map(|(ds, _)| ds)
}

/// Like [`synth_data`] but also returns the hidden parameter `x*`.
pub fn synth_data_with_truth(
    seed: u64,
    n: usize,
    d: usize,
    kind: SynthKind,
    noise: f64,
) -> Result<(Dataset, Vec<f64>)> {
    if n < 1 || d < 1 {
        return Err(Error::Input(format!(
            "need N, d >= 1 (got N = {n}, d = {d})"
        )));
    }
    if !(noise >= 0.0) || (kind == SynthKind::SeparableLogistic && noise > 1.0) {
        return Err(Error::Input(format!("invalid noise level {noise}")));
    }
    let src = RandomSource::new(seed);
    let mut truth_rng = src.stream(0, 0);
    let truth: Vec<f64> = (0..d).map(|_| truth_rng.sample(StandardNormal)).collect();

    let mut rng = src.stream(1, 0);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let margin = crate::linalg::dot(&a, &truth);
        let label = match kind {
            SynthKind::GaussianLs => {
                let eps: f64 = rng.sample(StandardNormal);
                margin + noise * eps
            }
            SynthKind::SeparableLogistic => {
                let clean = if margin >= 0.0 { 1.0 } else { -1.0 };
                let u: f64 = rng.gen();
                if u < noise {
                    -clean
                } else {
                    clean
                }
            }
        };
        rows.push(a);
        labels.push(label);
    }
    Ok((Dataset::from_dense(rows, labels)?, truth))
}
