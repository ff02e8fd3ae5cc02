//! Kernels and per-arm kernel ridge regression state.
//!
//! Each arm keeps its own history `(x_j, r_j)` together with the regularized
//! Gram inverse `(K + λI)⁻¹`, the dual weights `(K + λI)⁻¹ Y` and
//! `log det(K + λI)`. A new observation extends all three in `O(n²)` through
//! the block (Schur complement) form of the inverse, so the posterior at any
//! query point costs `O(n²)` without ever refactoring the Gram matrix.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Schur complements at or below this value are treated as singular.
pub const SCHUR_FLOOR: f64 = 1e-12;

/// A context vector `x ∈ R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(Vec<f64>);

impl Context {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("context must have at least one coordinate"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("context entry {v} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Self::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl AsRef<[f64]> for Context {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-‖x - y‖² / (2 bw²))`
    Gaussian,
    /// `⟨x, y⟩`
    Linear,
}

/// Kernel family plus its parameters.
///
/// `bound` is `sup_x √k(x, x)`. It is exactly 1 for the Gaussian kernel; for
/// the linear kernel it must dominate the norms of the contexts fed in, which
/// [`KernelSpec::check_bound`] verifies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default = "default_bound")]
    pub bound: f64,
}

fn default_bandwidth() -> f64 {
    1.0
}

fn default_bound() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Gaussian,
            bandwidth,
            bound: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(bound: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Linear,
            bandwidth: 1.0,
            bound,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(invalid(format!(
                "kernel bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(invalid(format!(
                "kernel bound must be positive, got {}",
                self.bound
            )));
        }
        if self.family == KernelFamily::Gaussian && self.bound != 1.0 {
            return Err(invalid("gaussian kernel bound is 1"));
        }
        Ok(())
    }

    /// Checks that `√k(x, x) ≤ bound` for the given context.
    pub fn check_bound(&self, x: &[f64]) -> Result<()> {
        let diag = self.eval_raw(x, x).sqrt();
        if diag > self.bound * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "√k(x,x) = {diag} exceeds kernel bound {}",
                self.bound
            )));
        }
        Ok(())
    }

    /// Evaluates `k(x, y)`; both slices must have the same length.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(invalid(format!(
                "kernel arguments have dimensions {} and {}",
                x.len(),
                y.len()
            )));
        }
        Ok(self.eval_raw(x, y))
    }

    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * self.bandwidth * self.bandwidth)).exp()
            }
            KernelFamily::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Evaluates the kernel on two contexts.
pub fn eval_kernel(spec: &KernelSpec, x: &Context, y: &Context) -> Result<f64> {
    spec.eval(x.as_slice(), y.as_slice())
}

/// Posterior mean `f̂(x)` and variance `σ̂²(x)` of one arm at one context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Incremental kernel ridge regression state for a single arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    kernel: KernelSpec,
    lambda: f64,
    dim: Option<usize>,
    // Row-major, count × dim.
    contexts: Vec<f64>,
    rewards: Vec<f64>,
    // Row-major, count × count.
    inv: Vec<f64>,
    weights: Vec<f64>,
    logdet: f64,
}

impl ArmState {
    pub fn new(kernel: KernelSpec, lambda: f64) -> Result<Self> {
        kernel.validate()?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            kernel,
            lambda,
            dim: None,
            contexts: Vec::new(),
            rewards: Vec::new(),
            inv: Vec::new(),
            weights: Vec::new(),
            logdet: 0.0,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of observations `N_a`.
    pub fn count(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Context dimension, fixed by the first observation.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn context(&self, i: usize) -> &[f64] {
        let d = self.dim.unwrap_or(0);
        &self.contexts[i * d..(i + 1) * d]
    }

    pub fn contexts(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.count()).map(move |i| self.context(i))
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// `(K + λI)⁻¹`, row-major, `count × count`. Empty when no data.
    pub fn inverse(&self) -> &[f64] {
        &self.inv
    }

    /// `(K + λI)⁻¹ Y`.
    pub fn dual_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `log det(K + λI)`; 0 for the empty state.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// `ln det(I + K/λ) = logdet − n ln λ`.
    pub fn log_det_capacity(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.logdet - self.count() as f64 * self.lambda.ln()
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim {
            Some(d) if d != x.len() => Err(invalid(format!(
                "context has dimension {}, arm state holds dimension {d}",
                x.len()
            ))),
            _ => Ok(()),
        }
    }

    /// `k_a(x)`: kernel between `x` and every stored context.
    pub fn kernel_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.contexts().map(|c| self.kernel.eval_raw(c, x)).collect())
    }

    /// `(K + λI)⁻¹ v`.
    fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        let n = self.count();
        self.inv
            .chunks_exact(n.max(1))
            .take(n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.count();
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.inv[i * n..(i + 1) * n];
            let dot: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            acc += v[i] * dot;
        }
        acc
    }

    /// Posterior mean `k(x)ᵀ(K+λI)⁻¹Y` and variance
    /// `k(x,x) − k(x)ᵀ(K+λI)⁻¹k(x)`, the latter clamped to `[0, k(x,x)]`.
    pub fn posterior(&self, x: &[f64]) -> Result<Posterior> {
        let kv = self.kernel_vector(x)?;
        let kxx = self.kernel.eval_raw(x, x);
        if kv.is_empty() {
            return Ok(Posterior {
                mean: 0.0,
                variance: kxx,
            });
        }
        let mean = kv.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        let variance = (kxx - self.quad_form(&kv)).clamp(0.0, kxx);
        Ok(Posterior { mean, variance })
    }

    /// Appends `(x, r)` and extends the inverse, dual weights and log-determinant.
    ///
    /// With `b = (K+λI)⁻¹k(x)` and Schur complement `s = k(x,x) + λ − k(x)ᵀb`,
    /// the extended inverse is `[[inv + bbᵀ/s, −b/s], [−bᵀ/s, 1/s]]` and the
    /// log-determinant grows by `ln s`.
    pub fn update(&mut self, x: &[f64], r: f64) -> Result<()> {
        if !r.is_finite() {
            return Err(invalid(format!("reward {r} is not finite")));
        }
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("context must be non-empty and finite"));
        }
        let kv = self.kernel_vector(x)?;
        let kxx = self.kernel.eval_raw(x, x);
        let n = self.count();
        let b = self.apply_inverse(&kv);
        let kb: f64 = kv.iter().zip(&b).map(|(a, c)| a * c).sum();
        let schur = kxx + self.lambda - kb;
        if schur.is_nan() || schur <= SCHUR_FLOOR {
            return Err(Error::NumericalDegeneracy(format!(
                "schur complement {schur:e} at observation {}",
                n + 1
            )));
        }

        let m = n + 1;
        let mut inv = vec![0.0; m * m];
        for i in 0..n {
            let bi_s = b[i] / schur;
            let old = &self.inv[i * n..(i + 1) * n];
            let new = &mut inv[i * m..i * m + n];
            for ((dst, &o), &bj) in new.iter_mut().zip(old).zip(&b) {
                *dst = o + bi_s * bj;
            }
            inv[i * m + n] = -bi_s;
            inv[n * m + i] = -bi_s;
        }
        inv[n * m + n] = 1.0 / schur;

        let kw: f64 = kv.iter().zip(&self.weights).map(|(a, w)| a * w).sum();
        let c = (kw - r) / schur;
        for (w, bi) in self.weights.iter_mut().zip(&b) {
            *w += bi * c;
        }
        self.weights.push(-c);

        self.inv = inv;
        self.logdet += schur.ln();
        self.contexts.extend_from_slice(x);
        self.rewards.push(r);
        self.dim = Some(x.len());
        Ok(())
    }
}
