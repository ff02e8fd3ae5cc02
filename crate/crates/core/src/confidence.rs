//! Confidence intervals and the gap quantities that drive Contextual-Gap.
//!
//! Arm indices are zero-based throughout the library.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::{ArmState, Posterior};

/// Exploration scale `α` and the regression regularizer `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub alpha: f64,
    pub lambda: f64,
}

impl ConfidenceParams {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        let p = Self { alpha, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// `s = 2 α σ / √λ`.
    pub fn width(&self, sigma: f64) -> f64 {
        2.0 * self.alpha * sigma / self.lambda.sqrt()
    }
}

/// Estimate and confidence interval of one arm at one context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceBundle {
    pub mean: f64,
    pub sigma: f64,
    pub width: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceBundle {
    pub fn from_posterior(post: Posterior, params: &ConfidenceParams) -> Self {
        let sigma = post.sigma();
        let width = params.width(sigma);
        Self {
            mean: post.mean,
            sigma,
            width,
            lower: post.mean - width / 2.0,
            upper: post.mean + width / 2.0,
        }
    }

    /// Builds a bundle directly from an interval; `sigma` is backed out of
    /// the width with `params`.
    pub fn from_bounds(lower: f64, upper: f64, params: &ConfidenceParams) -> Self {
        let width = upper - lower;
        Self {
            mean: (upper + lower) / 2.0,
            sigma: width * params.lambda.sqrt() / (2.0 * params.alpha),
            width,
            lower,
            upper,
        }
    }
}

/// Interval `[f̂ − s/2, f̂ + s/2]` for one arm at `x`.
pub fn confidence_interval(
    state: &ArmState,
    x: &[f64],
    params: &ConfidenceParams,
) -> Result<ConfidenceBundle> {
    if state.lambda() != params.lambda {
        return Err(invalid(format!(
            "confidence lambda {} differs from regression lambda {}",
            params.lambda,
            state.lambda()
        )));
    }
    Ok(ConfidenceBundle::from_posterior(state.posterior(x)?, params))
}

/// Per-step gap bookkeeping of Contextual-Gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GapDecision {
    /// `B_a = max_{i≠a} U_i − L_a`.
    pub gaps: Vec<f64>,
    /// `J = argmin_a B_a`.
    pub best: usize,
    /// `j = argmax_{a≠J} U_a`.
    pub rival: usize,
    /// Whichever of `J`, `j` has the wider interval, once a policy decides.
    pub chosen: Option<usize>,
    pub widths: Vec<f64>,
}

impl GapDecision {
    pub fn best_gap(&self) -> f64 {
        self.gaps[self.best]
    }

    /// Picks the wider of the two candidates; a tie goes to the lower index.
    pub fn choose_widest(&mut self) -> usize {
        let (lo, hi) = if self.best < self.rival {
            (self.best, self.rival)
        } else {
            (self.rival, self.best)
        };
        let pick = if self.widths[hi] > self.widths[lo] { hi } else { lo };
        self.chosen = Some(pick);
        pick
    }
}

/// Lowest index among maximal entries.
pub(crate) fn argmax_by<F: Fn(usize) -> f64>(n: usize, f: F) -> usize {
    let mut best = 0;
    let mut best_val = f(0);
    for i in 1..n {
        let v = f(i);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Computes `B`, `J` and `j` over all arms. Ties resolve to the lowest index.
pub fn gap_indices(bundles: &[ConfidenceBundle]) -> Result<GapDecision> {
    let n = bundles.len();
    if n < 2 {
        return Err(invalid(format!("gap indices need at least 2 arms, got {n}")));
    }
    // max_{i≠a} U_i only ever needs the two largest uppers.
    let top = argmax_by(n, |i| bundles[i].upper);
    let second = argmax_by(n - 1, |i| {
        let i = if i >= top { i + 1 } else { i };
        bundles[i].upper
    });
    let second = if second >= top { second + 1 } else { second };

    let gaps: Vec<f64> = bundles
        .iter()
        .enumerate()
        .map(|(a, b)| {
            let other = if a == top { second } else { top };
            bundles[other].upper - b.lower
        })
        .collect();
    let best = argmax_by(n, |a| -gaps[a]);
    let rival = {
        let r = argmax_by(n - 1, |i| {
            let i = if i >= best { i + 1 } else { i };
            bundles[i].upper
        });
        if r >= best {
            r + 1
        } else {
            r
        }
    };
    Ok(GapDecision {
        gaps,
        best,
        rival,
        chosen: None,
        widths: bundles.iter().map(|b| b.width).collect(),
    })
}

/// Per-arm hardness `max(½(Δ + ε), ε)`.
pub fn hardness(delta_gap: f64, epsilon: f64) -> f64 {
    (0.5 * (delta_gap + epsilon)).max(epsilon)
}

/// Total hardness `Σ_a H_a⁻²`.
pub fn total_hardness<I: IntoIterator<Item = f64>>(per_arm: I) -> f64 {
    per_arm.into_iter().map(|h| h.powi(-2)).sum()
}
