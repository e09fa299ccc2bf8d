//! Multi-level neural classifier: a standard sigmoid hidden layer feeding a
//! single output neuron whose staircase activation emits one response level
//! per category.

mod eval;
mod io;
mod network;
mod train;

pub use eval::{evaluate, EvalReport};
pub use io::{model_to_string, parse_model, read_model, write_model, MODEL_MAGIC};
pub use network::{Forward, Gradients, MlnnModel};
pub use train::{train, LabeledRegion, TrainConfig, Trained};

use crate::error::{Error, Result};

pub const DEFAULT_CATEGORIES: [&str; 5] = ["Sky", "Building", "Sand/Rock", "Grass", "Water"];

/// Parameters of the multi-level activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlafParams {
    /// Steepness of the underlying sigmoid.
    pub beta: f64,
    /// Width of each level window on the pre-activation axis.
    pub c: f64,
    /// Number of levels, one per category.
    pub n: usize,
}

impl Default for MlafParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            c: 0.25,
            n: 5,
        }
    }
}

impl MlafParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", "must be positive"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("c", "must be positive"));
        }
        if self.n < 2 {
            return Err(Error::invalid("n", "must be at least 2"));
        }
        Ok(())
    }

    /// Upper end of the pre-activation range, `n * c`.
    pub fn upper(&self) -> f64 {
        self.n as f64 * self.c
    }

    /// Window index in `1..=n`; the boundary `x = k c` belongs to window `k`.
    pub fn window(&self, x: f64) -> usize {
        if x <= 0.0 {
            return 1;
        }
        let k = (x / self.c).ceil();
        if k >= self.n as f64 {
            self.n
        } else {
            (k as usize).max(1)
        }
    }

    /// Output targeted for category `level`: the activation at the center of
    /// that level's window.
    pub fn level_center(&self, level: usize) -> f64 {
        let x = self.c * (level as f64 - 0.5);
        sigmoid(x, self.beta) + (level as f64 - 1.0) * sigmoid(self.c, self.beta)
    }

    pub fn level_centers(&self) -> Vec<f64> {
        (1..=self.n).map(|l| self.level_center(l)).collect()
    }
}

pub fn sigmoid(x: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (-beta * x).exp())
}

/// `f(x) + (lambda - 1) f(c)` with `lambda` the window containing `x`,
/// clamped to `1..=n`.
pub fn mlaf(x: f64, p: &MlafParams) -> f64 {
    let level = p.window(x);
    sigmoid(x, p.beta) + (level as f64 - 1.0) * sigmoid(p.c, p.beta)
}

/// Derivative of [`mlaf`] away from window boundaries; the level offset is
/// piecewise constant and contributes nothing.
pub fn mlaf_grad(x: f64, p: &MlafParams) -> f64 {
    let f = sigmoid(x, p.beta);
    p.beta * f * (1.0 - f)
}

/// Nearest level center, ties to the lower level. Returns `1..=n`.
pub fn decode_level(output: f64, centers: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = (output - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best + 1
}
