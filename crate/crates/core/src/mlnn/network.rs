use crate::error::{Error, Result};
use crate::features::{FeatureVector, Normalizer};

use super::{decode_level, mlaf, mlaf_grad, sigmoid, MlafParams};

/// Input -> sigmoid hidden layer -> one multi-level output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct MlnnModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `hidden_dim x input_dim`, row-major.
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub mlaf: MlafParams,
    pub normalizer: Normalizer,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub output: f64,
    pub hidden: Vec<f64>,
    /// Output pre-activation before clamping to `[0, n c]`.
    pub pre_activation: f64,
}

/// Loss gradient with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl Gradients {
    pub(crate) fn zeros(m: &MlnnModel) -> Self {
        Self {
            w_hidden: vec![0.0; m.w_hidden.len()],
            b_hidden: vec![0.0; m.hidden_dim],
            w_out: vec![0.0; m.hidden_dim],
            b_out: 0.0,
        }
    }

    pub(crate) fn add(&mut self, other: &Gradients) {
        for (a, b) in self.w_hidden.iter_mut().zip(&other.w_hidden) {
            *a += b;
        }
        for (a, b) in self.b_hidden.iter_mut().zip(&other.b_hidden) {
            *a += b;
        }
        for (a, b) in self.w_out.iter_mut().zip(&other.w_out) {
            *a += b;
        }
        self.b_out += other.b_out;
    }
}

impl MlnnModel {
    /// Evaluates an already-normalized feature vector.
    pub fn forward(&self, v: &FeatureVector) -> Result<Forward> {
        let x = v.values();
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let hidden: Vec<f64> = self
            .w_hidden
            .chunks_exact(self.input_dim)
            .zip(&self.b_hidden)
            .map(|(row, b)| sigmoid(dot(row, x) + b, 1.0))
            .collect();
        let pre_activation = dot(&self.w_out, &hidden) + self.b_out;
        let u = pre_activation.clamp(0.0, self.mlaf.upper());
        Ok(Forward {
            output: mlaf(u, &self.mlaf),
            hidden,
            pre_activation,
        })
    }

    /// Category index in `1..=n` for a normalized feature vector.
    pub fn predict_category(&self, v: &FeatureVector) -> Result<usize> {
        let out = self.forward(v)?.output;
        Ok(decode_level(out, &self.mlaf.level_centers()))
    }

    /// Normalizes a raw feature vector with the stored statistics, then predicts.
    pub fn classify(&self, raw: &FeatureVector) -> Result<(usize, f64)> {
        let v = self.normalizer.apply(raw)?;
        let out = self.forward(&v)?.output;
        Ok((decode_level(out, &self.mlaf.level_centers()), out))
    }

    pub fn category_name(&self, level: usize) -> &str {
        &self.categories[level - 1]
    }

    /// Mean squared error over `(normalized input, target output)` pairs and
    /// its gradient with respect to every weight and bias.
    pub fn loss_and_gradient(&self, batch: &[(FeatureVector, f64)]) -> Result<(f64, Gradients)> {
        let mut grad = Gradients::zeros(self);
        let mut loss = 0.0;
        for (v, target) in batch {
            loss += self.accumulate(v, *target, &mut grad)?;
        }
        let n = batch.len().max(1) as f64;
        scale(&mut grad, 1.0 / n);
        Ok((loss / n, grad))
    }

    pub fn loss(&self, batch: &[(FeatureVector, f64)]) -> Result<f64> {
        let mut total = 0.0;
        for (v, t) in batch {
            let e = self.forward(v)?.output - t;
            total += e * e;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Adds the unscaled per-sample gradient of `(phi - target)^2` into
    /// `grad` and returns the squared error.
    pub(crate) fn accumulate(&self, v: &FeatureVector, target: f64, grad: &mut Gradients) -> Result<f64> {
        let fwd = self.forward(v)?;
        let err = fwd.output - target;
        // Straight-through at the clamp: a clamped sample still gets the slope
        // at the nearest limit, otherwise it could never re-enter the range.
        let u = fwd.pre_activation.clamp(0.0, self.mlaf.upper());
        let d_u = 2.0 * err * mlaf_grad(u, &self.mlaf);
        if d_u != 0.0 {
            grad.b_out += d_u;
            let x = v.values();
            for j in 0..self.hidden_dim {
                let h = fwd.hidden[j];
                grad.w_out[j] += d_u * h;
                let d_z = d_u * self.w_out[j] * h * (1.0 - h);
                grad.b_hidden[j] += d_z;
                let row = &mut grad.w_hidden[j * self.input_dim..(j + 1) * self.input_dim];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d_z * xi;
                }
            }
        }
        Ok(err * err)
    }

    pub(crate) fn step(&mut self, grad: &Gradients, lr: f64) {
        for (w, g) in self.w_hidden.iter_mut().zip(&grad.w_hidden) {
            *w -= lr * g;
        }
        for (w, g) in self.b_hidden.iter_mut().zip(&grad.b_hidden) {
            *w -= lr * g;
        }
        for (w, g) in self.w_out.iter_mut().zip(&grad.w_out) {
            *w -= lr * g;
        }
        self.b_out -= lr * grad.b_out;
    }
}

pub(crate) fn scale(g: &mut Gradients, s: f64) {
    g.w_hidden.iter_mut().for_each(|v| *v *= s);
    g.b_hidden.iter_mut().for_each(|v| *v *= s);
    g.w_out.iter_mut().for_each(|v| *v *= s);
    g.b_out *= s;
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::features::NormalizerMode;
    use crate::mlnn::DEFAULT_CATEGORIES;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn blank(input_dim: usize, hidden_dim: usize, mlaf: MlafParams) -> MlnnModel {
        MlnnModel {
            input_dim,
            hidden_dim,
            w_hidden: vec![0.0; input_dim * hidden_dim],
            b_hidden: vec![0.0; hidden_dim],
            w_out: vec![0.0; hidden_dim],
            b_out: 0.0,
            mlaf,
            normalizer: Normalizer {
                mode: NormalizerMode::Unit,
                mean: vec![0.0; input_dim],
                std_dev: vec![1.0; input_dim],
            },
            categories: DEFAULT_CATEGORIES.iter().take(mlaf.n).map(|s| s.to_string()).collect(),
        }
    }

    pub(crate) fn random_model(rng: &mut impl Rng, input_dim: usize, hidden_dim: usize, mlaf: MlafParams) -> MlnnModel {
        let mut m = blank(input_dim, hidden_dim, mlaf);
        m.w_hidden.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        m.b_hidden.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        m.w_out.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        m.b_out = rng.gen_range(0.0..mlaf.upper());
        m
    }

    #[test]
    fn zero_model_outputs_half() {
        let m = blank(4, 3, MlafParams::default());
        let f = m.forward(&FeatureVector::new(vec![0.3; 4])).unwrap();
        assert_eq!(f.output, 0.5);
        assert!(f.hidden.iter().all(|&h| h == 0.5));
    }

    #[test]
    fn bias_passthrough_hits_level_centers() {
        let p = MlafParams::default();
        let mut m = blank(4, 3, p);
        for level in 1..=p.n {
            m.b_out = p.c * (level as f64 - 0.5);
            let v = FeatureVector::new(vec![0.7; 4]);
            assert_eq!(m.forward(&v).unwrap().output, p.level_center(level));
            assert_eq!(m.predict_category(&v).unwrap(), level);
        }
    }

    #[test]
    fn dimension_checked() {
        let m = blank(4, 3, MlafParams::default());
        assert!(matches!(
            m.forward(&FeatureVector::new(vec![0.0; 5])),
            Err(Error::DimensionMismatch { expected: 4, actual: 5 })
        ));
    }

    #[test]
    fn output_range_is_bounded_by_clamp() {
        let p = MlafParams::default();
        let lo = mlaf(0.0, &p);
        let hi = mlaf(p.upper(), &p);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let mut m = random_model(&mut rng, 6, 5, p);
            m.w_out.iter_mut().for_each(|w| *w *= 10.0);
            let v = FeatureVector::new((0..6).map(|_| rng.gen_range(-3.0..3.0)).collect());
            let out = m.forward(&v).unwrap().output;
            assert!(out >= lo && out <= hi);
        }
    }

    #[test]
    fn decode_monotone_in_output_bias() {
        let p = MlafParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = random_model(&mut rng, 6, 5, p);
        let v = FeatureVector::new(vec![0.4; 6]);
        let base = m.forward(&v).unwrap().pre_activation - m.b_out;
        let mut last = 0;
        for i in 0..=1000 {
            m.b_out = p.upper() * i as f64 / 1000.0 - base;
            let level = m.predict_category(&v).unwrap();
            assert!(level >= last);
            last = level;
        }
        assert_eq!(last, p.n);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = MlafParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut checked = 0;
        while checked < 20 {
            let m = random_model(&mut rng, 5, 4, p);
            let v = FeatureVector::new((0..5).map(|_| rng.gen_range(0.0..1.0)).collect());
            let u = m.forward(&v).unwrap().pre_activation;
            let off = (u / p.c - (u / p.c).round()).abs() * p.c;
            if off < 1e-3 || u < 1e-3 || u > p.upper() - 1e-3 {
                continue;
            }
            checked += 1;
            let batch = vec![(v, p.level_center(rng.gen_range(1..=p.n)))];
            let (_, g) = m.loss_and_gradient(&batch).unwrap();
            let h = 1e-5;
            let fd = |f: &dyn Fn(&mut MlnnModel, f64)| {
                let mut a = m.clone();
                f(&mut a, h);
                let mut b = m.clone();
                f(&mut b, -h);
                (a.loss(&batch).unwrap() - b.loss(&batch).unwrap()) / (2.0 * h)
            };
            let close = |an: f64, num: f64| (an - num).abs() <= 1e-4 * an.abs().max(num.abs()).max(1e-8);
            for i in 0..m.w_hidden.len() {
                assert!(close(g.w_hidden[i], fd(&|m, d| m.w_hidden[i] += d)));
            }
            for j in 0..m.hidden_dim {
                assert!(close(g.b_hidden[j], fd(&|m, d| m.b_hidden[j] += d)));
                assert!(close(g.w_out[j], fd(&|m, d| m.w_out[j] += d)));
            }
            assert!(close(g.b_out, fd(&|m, d| m.b_out += d)));
        }
    }
}
