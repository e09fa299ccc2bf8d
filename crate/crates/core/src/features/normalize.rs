use crate::error::{Error, Result};

use super::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizerMode {
    /// `(x - mu) / sigma`
    ZScore,
    /// `((x - mu) / (3 sigma) + 1) / 2`, which puts about 99% of values in [0, 1].
    Unit,
}

impl NormalizerMode {
    pub fn name(self) -> &'static str {
        match self {
            NormalizerMode::ZScore => "zscore",
            NormalizerMode::Unit => "unit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zscore" => Some(NormalizerMode::ZScore),
            "unit" => Some(NormalizerMode::Unit),
            _ => None,
        }
    }
}

/// Per-dimension training statistics. Dimensions with zero spread map to
/// 0 (z-score) or 0.5 (unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mode: NormalizerMode,
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        apply_normalizer(self, v)
    }
}

/// Population mean and standard deviation per dimension (Welford updates).
pub fn fit_normalizer(training: &[FeatureVector], mode: NormalizerMode) -> Result<Normalizer> {
    let first = training.first().ok_or(Error::EmptyTrainingSet)?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    for (i, v) in training.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        let n = (i + 1) as f64;
        for ((m, s), &x) in mean.iter_mut().zip(&mut m2).zip(v.values()) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }
    let n = training.len() as f64;
    let std_dev = m2.into_iter().map(|s| (s / n).max(0.0).sqrt()).collect();
    Ok(Normalizer { mode, mean, std_dev })
}

pub fn apply_normalizer(nz: &Normalizer, v: &FeatureVector) -> Result<FeatureVector> {
    if v.len() != nz.dim() {
        return Err(Error::DimensionMismatch {
            expected: nz.dim(),
            actual: v.len(),
        });
    }
    let out = v
        .values()
        .iter()
        .zip(nz.mean.iter().zip(&nz.std_dev))
        .map(|(&x, (&mu, &sigma))| match (nz.mode, sigma > 0.0) {
            (NormalizerMode::ZScore, true) => (x - mu) / sigma,
            (NormalizerMode::ZScore, false) => 0.0,
            (NormalizerMode::Unit, true) => ((x - mu) / (3.0 * sigma) + 1.0) / 2.0,
            (NormalizerMode::Unit, false) => 0.5,
        })
        .collect();
    Ok(FeatureVector::new(out))
}
