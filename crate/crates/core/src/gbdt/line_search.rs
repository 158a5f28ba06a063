use serde::{Deserialize, Serialize};

use super::loss::Loss;

/// Golden-section search bracket and tolerance for the stage step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearchConfig {
    pub lower: f64,
    pub upper: f64,
    /// Search stops once the bracket is narrower than this.
    pub tolerance: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: 10.0,
            tolerance: 1e-6,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Step `g` minimizing `sum_i L(y_i, margins_i + g * direction_i)` over the
/// configured bracket. The result never increases the loss relative to
/// `g = 0`, which is returned whenever the search cannot improve on it.
pub fn line_search(
    loss: &dyn Loss,
    targets: &[f64],
    margins: &[f64],
    direction: &[f64],
    cfg: &LineSearchConfig,
) -> f64 {
    debug_assert_eq!(targets.len(), margins.len());
    debug_assert_eq!(margins.len(), direction.len());
    if direction.iter().all(|h| *h == 0.0) {
        return 0.0;
    }
    let objective = |g: f64| -> f64 {
        targets
            .iter()
            .zip(margins)
            .zip(direction)
            .map(|((&y, &f), &h)| loss.loss(y, f + g * h))
            .sum()
    };

    let (mut a, mut b) = (cfg.lower, cfg.upper);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    while (b - a).abs() > cfg.tolerance {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective(d);
        }
    }
    let best = 0.5 * (a + b);
    if cfg.lower <= 0.0 && 0.0 <= cfg.upper && objective(best) > objective(0.0) {
        0.0
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::super::loss::{LogLoss, SquaredLoss};
    use super::*;

    #[test]
    fn squared_loss_matches_closed_form() {
        let y = [1.0, -2.0, 0.5, 3.0, 0.0];
        let f = [0.2, 0.1, -0.3, 1.0, 0.4];
        let r: Vec<f64> = y.iter().zip(&f).map(|(y, f)| y - f).collect();
        // direction correlated with but not equal to the residual
        let h = [0.5, -1.0, 0.5, 1.0, -0.2];
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let exact = dot(&r, &h) / dot(&h, &h);
        assert!(exact > 0.0 && exact < 10.0);
        let g = line_search(&SquaredLoss, &y, &f, &h, &LineSearchConfig::default());
        assert!((g - exact).abs() < 1e-6, "{g} vs {exact}");
    }

    #[test]
    fn zero_direction_gives_zero_step() {
        let g = line_search(&LogLoss, &[1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], &LineSearchConfig::default());
        assert_eq!(g, 0.0);
    }

    #[test]
    fn ascent_direction_gives_zero_step() {
        // moving along h only increases the loss for every positive step
        let y = [1.0, 1.0];
        let f = [0.0, 0.0];
        let h = [-1.0, -1.0];
        let g = line_search(&LogLoss, &y, &f, &h, &LineSearchConfig::default());
        assert!(LogLoss.total(&y, &[-g, -g]) <= LogLoss.total(&y, &f));
        assert!(g < 1e-6);
    }

    #[test]
    fn log_loss_step_never_increases_loss() {
        let y = [1.0, 0.0, 1.0, 1.0, 0.0];
        let f = [0.3, -0.2, 0.0, 1.5, 0.7];
        let h = [0.4, -0.5, 0.4, 0.1, -0.5];
        let g = line_search(&LogLoss, &y, &f, &h, &LineSearchConfig::default());
        let after: Vec<f64> = f.iter().zip(&h).map(|(f, h)| f + g * h).collect();
        assert!(LogLoss.total(&y, &after) <= LogLoss.total(&y, &f));
        assert!(g > 0.0);
    }
}
