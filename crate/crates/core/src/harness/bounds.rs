//! Closed-form quantities from the simple-regret analysis: the `β` schedule,
//! the monotone width bound `g` and its inverse.

use serde::Serialize;

/// Inputs of the `β` schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaInputs {
    /// Exploration budget `T`.
    pub budget: f64,
    /// Eigenvalue floor `λ_x` of the context second moment.
    pub lambda_x: f64,
    pub lambda: f64,
    pub arms: f64,
    pub burn_in: f64,
    /// Total hardness `H_ε`.
    pub hardness: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Beta {
    pub value: f64,
    /// Smallest budget for which `β > 0`.
    pub threshold_budget: f64,
    /// `value <= 0`: the bound is vacuous at this budget.
    pub non_positive: bool,
}

/// `β = √((λ_x (T − N_λ(A−1)) + 2Aλ) / (16 C1² H_ε)) − C2/C1`.
///
/// A negative radicand is clamped to 0, which makes `β = −C2/C1` and flags it.
pub fn compute_beta(p: &BetaInputs) -> Beta {
    let radicand = (p.lambda_x * (p.budget - p.burn_in * (p.arms - 1.0)) + 2.0 * p.arms * p.lambda)
        / (16.0 * p.c1 * p.c1 * p.hardness);
    let value = radicand.max(0.0).sqrt() - p.c2 / p.c1;
    let threshold_budget =
        (16.0 * p.hardness * p.c2 * p.c2 - 2.0 * p.arms * p.lambda) / p.lambda_x + p.burn_in * (p.arms - 1.0);
    Beta {
        value,
        threshold_budget,
        non_positive: value <= 0.0,
    }
}

/// `g(N) = 8 α² / (λ + N λ_x / 2)`, an upper bound on the squared width after
/// `N` pulls; `α` is the theoretical `C1 β + C2`.
pub fn g_bound(pulls: f64, alpha: f64, lambda: f64, lambda_x: f64) -> f64 {
    8.0 * alpha * alpha / (lambda + pulls * lambda_x / 2.0)
}

/// Pulls needed for the width bound to reach `s`:
/// `16 α² / (s² λ_x) − 2λ / λ_x`. Note `g` bounds `s²` while this takes `s`.
pub fn g_inverse(width: f64, alpha: f64, lambda: f64, lambda_x: f64) -> f64 {
    16.0 * alpha * alpha / (width * width * lambda_x) - 2.0 * lambda / lambda_x
}
