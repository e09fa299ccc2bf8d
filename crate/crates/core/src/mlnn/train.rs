use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{fit_normalizer, FeatureVector, NormalizerMode};

use super::network::{scale, Gradients, MlnnModel};
use super::MlafParams;

/// Samples per gradient chunk. Chunks are summed in index order, so results
/// do not depend on the thread count.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 8000,
            hidden: 32,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden", "must be at least 1"));
        }
        Ok(())
    }
}

/// Raw (unnormalized) region features with a category in `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRegion {
    pub features: FeatureVector,
    pub category: usize,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: MlnnModel,
    /// Loss before each epoch's update.
    pub loss_trace: Vec<f64>,
    /// Loss after the last update.
    pub final_loss: f64,
}

/// Fits the unit-mode normalizer on the training features, then runs
/// full-batch gradient descent on the squared distance between the network
/// output and each sample's level center.
pub fn train(data: &[LabeledRegion], cfg: &TrainConfig, p: &MlafParams, categories: &[String]) -> Result<Trained> {
    cfg.validate()?;
    p.validate()?;
    if categories.len() != p.n {
        return Err(Error::invalid(
            "categories",
            format!("{} names for {} levels", categories.len(), p.n),
        ));
    }
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for s in data {
        if !(1..=p.n).contains(&s.category) {
            return Err(Error::invalid(
                "category",
                format!("{} outside 1..={}", s.category, p.n),
            ));
        }
        if s.features.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features", "non-finite value"));
        }
    }
    for (level, name) in categories.iter().enumerate() {
        if !data.iter().any(|s| s.category == level + 1) {
            return Err(Error::EmptyCategory(name.clone()));
        }
    }

    let raw: Vec<FeatureVector> = data.iter().map(|s| s.features.clone()).collect();
    let normalizer = fit_normalizer(&raw, NormalizerMode::Unit)?;
    let batch: Vec<(FeatureVector, f64)> = data
        .iter()
        .map(|s| Ok((normalizer.apply(&s.features)?, p.level_center(s.category))))
        .collect::<Result<_>>()?;

    let input_dim = normalizer.dim();
    let mut model = init_model(input_dim, cfg, p, categories, normalizer);
    let (loss_trace, final_loss) = descend(&mut model, &batch, cfg)?;
    Ok(Trained {
        model,
        loss_trace,
        final_loss,
    })
}

pub(crate) fn descend(
    model: &mut MlnnModel,
    batch: &[(FeatureVector, f64)],
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, f64)> {
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = batch_gradient(model, batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        loss_trace.push(loss);
        model.step(&grad, cfg.learning_rate);
    }
    let final_loss = model.loss(batch)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    Ok((loss_trace, final_loss))
}

fn init_model(
    input_dim: usize,
    cfg: &TrainConfig,
    p: &MlafParams,
    categories: &[String],
    normalizer: crate::features::Normalizer,
) -> MlnnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let bound_in = 1.0 / (input_dim as f64).sqrt();
    let bound_hidden = 1.0 / (cfg.hidden as f64).sqrt();
    let w_hidden = (0..input_dim * cfg.hidden)
        .map(|_| rng.gen_range(-bound_in..=bound_in))
        .collect();
    let b_hidden = (0..cfg.hidden).map(|_| rng.gen_range(-bound_in..=bound_in)).collect();
    let w_out = (0..cfg.hidden)
        .map(|_| rng.gen_range(-bound_hidden..=bound_hidden))
        .collect();
    MlnnModel {
        input_dim,
        hidden_dim: cfg.hidden,
        w_hidden,
        b_hidden,
        w_out,
        // middle level's window center, away from the jumps
        b_out: p.c * ((p.n as f64 / 2.0).ceil() - 0.5),
        mlaf: *p,
        normalizer,
        categories: categories.to_vec(),
    }
}

fn batch_gradient(model: &MlnnModel, batch: &[(FeatureVector, f64)]) -> Result<(f64, Gradients)> {
    let partials: Vec<(f64, Gradients)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Gradients::zeros(model);
            let mut loss = 0.0;
            for (v, t) in chunk {
                loss += model.accumulate(v, *t, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut total = Gradients::zeros(model);
    let mut loss = 0.0;
    for (l, g) in &partials {
        loss += l;
        total.add(g);
    }
    let n = batch.len() as f64;
    scale(&mut total, 1.0 / n);
    Ok((loss / n, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlnn::DEFAULT_CATEGORIES;

    fn names(n: usize) -> Vec<String> {
        DEFAULT_CATEGORIES.iter().take(n).map(|s| s.to_string()).collect()
    }

    fn corners(n_per: usize, seed: u64) -> Vec<LabeledRegion> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in 0..2 * n_per {
            let category = 1 + i % 2;
            let base = if category == 1 { 0.1 } else { 0.9 };
            let features = FeatureVector::new((0..6).map(|_| base + rng.gen_range(-0.05..0.05)).collect());
            out.push(LabeledRegion { features, category });
        }
        out
    }

    #[test]
    fn small_step_loss_is_monotone() {
        let p = MlafParams {
            n: 2,
            ..Default::default()
        };
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            epochs: 200,
            hidden: 4,
            rng_seed: 1,
        };
        let t = train(&corners(5, 2), &cfg, &p, &names(2)).unwrap();
        assert_eq!(t.loss_trace.len(), 200);
        for w in t.loss_trace.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
        assert!(t.final_loss <= *t.loss_trace.last().unwrap());
    }

    #[test]
    fn separable_corners_fit_perfectly() {
        let p = MlafParams {
            n: 2,
            ..Default::default()
        };
        let cfg = TrainConfig {
            epochs: 500,
            hidden: 8,
            ..Default::default()
        };
        let data = corners(20, 3);
        let t = train(&data, &cfg, &p, &names(2)).unwrap();
        for s in &data {
            assert_eq!(t.model.classify(&s.features).unwrap().0, s.category);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let p = MlafParams {
            n: 2,
            ..Default::default()
        };
        let cfg = TrainConfig {
            epochs: 50,
            hidden: 4,
            ..Default::default()
        };
        let data = corners(10, 4);
        let a = train(&data, &cfg, &p, &names(2)).unwrap();
        let b = train(&data, &cfg, &p, &names(2)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn missing_category_is_an_error() {
        let p = MlafParams {
            n: 3,
            ..Default::default()
        };
        let err = train(&corners(3, 5), &TrainConfig::default(), &p, &names(3)).unwrap_err();
        assert!(matches!(err, Error::EmptyCategory(ref n) if n == "Sand/Rock"));
    }

    #[test]
    fn divergence_is_reported() {
        let p = MlafParams {
            n: 2,
            ..Default::default()
        };
        let data = corners(3, 6);
        let mut t = train(
            &data,
            &TrainConfig {
                epochs: 1,
                ..Default::default()
            },
            &p,
            &names(2),
        )
        .unwrap();
        t.model.w_out[0] = f64::INFINITY;
        t.model.w_out[1] = f64::NEG_INFINITY;
        let batch: Vec<_> = data
            .iter()
            .map(|s| {
                (
                    t.model.normalizer.apply(&s.features).unwrap(),
                    p.level_center(s.category),
                )
            })
            .collect();
        let err = descend(&mut t.model, &batch, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, .. }), "{err:?}");
    }

    #[test]
    fn non_finite_features_rejected() {
        let p = MlafParams {
            n: 2,
            ..Default::default()
        };
        let mut data = corners(3, 6);
        data[1].features = FeatureVector::new(vec![f64::NAN; 6]);
        let err = train(&data, &TrainConfig::default(), &p, &names(2)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "features", .. }));
    }
}
