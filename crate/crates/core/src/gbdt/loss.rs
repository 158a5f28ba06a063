use serde::{Deserialize, Serialize};

/// Pointwise loss of a real-valued model output `f` against target `y`.
pub trait Loss {
    fn loss(&self, y: f64, f: f64) -> f64;

    /// `-dL/df`, the pseudo-residual each boosting stage regresses on.
    fn negative_gradient(&self, y: f64, f: f64) -> f64;

    fn total(&self, y: &[f64], f: &[f64]) -> f64 {
        y.iter().zip(f).map(|(&y, &f)| self.loss(y, f)).sum()
    }
}

/// Binomial log-loss on the log-odds scale, `y` in {0, 1}:
/// `L = ln(1 + e^f) - y f`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogLoss;

/// `L = (y - f)^2 / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquaredLoss;

pub fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

fn softplus(f: f64) -> f64 {
    if f > 0.0 {
        f + (-f).exp().ln_1p()
    } else {
        f.exp().ln_1p()
    }
}

impl Loss for LogLoss {
    fn loss(&self, y: f64, f: f64) -> f64 {
        softplus(f) - y * f
    }

    fn negative_gradient(&self, y: f64, f: f64) -> f64 {
        y - sigmoid(f)
    }
}

impl Loss for SquaredLoss {
    fn loss(&self, y: f64, f: f64) -> f64 {
        0.5 * (y - f) * (y - f)
    }

    fn negative_gradient(&self, y: f64, f: f64) -> f64 {
        y - f
    }
}
