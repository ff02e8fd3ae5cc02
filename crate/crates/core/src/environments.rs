//! Context and reward generators.
//!
//! An environment reveals every arm's realized reward for each step; the
//! harness passes only the chosen arm's reward to a policy and keeps the
//! rest (and the true means) for scoring.
//!
//! Structural randomness (the reward functions of `ar1_sensor` and
//! `unit_circle`) comes from [`EnvSpec::seed`]. The context/noise stream comes
//! from a separate stream seed, so exploration and evaluation streams share
//! the same reward functions.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{Context, KernelSpec};

/// One time step: the context, every arm's realized reward and, when known,
/// every arm's expected reward.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub context: Context,
    pub true_means: Option<Vec<f64>>,
    pub realized_rewards: Vec<f64>,
}

impl EnvStep {
    pub fn arms(&self) -> usize {
        self.realized_rewards.len()
    }

    /// Arm with the highest expected reward (lowest index on ties).
    pub fn best_arm(&self) -> Result<usize> {
        let means = self.means()?;
        Ok(crate::confidence::argmax_by(means.len(), |a| means[a]))
    }

    fn means(&self) -> Result<&[f64]> {
        self.true_means
            .as_deref()
            .ok_or_else(|| Error::Unsupported("true means are not available for this step".into()))
    }
}

/// `f*(x) − f_arm(x)`.
pub fn simple_regret(step: &EnvStep, arm: usize) -> Result<f64> {
    let means = step.means()?;
    let chosen = *means
        .get(arm)
        .ok_or_else(|| invalid(format!("arm {arm} out of range")))?;
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(best - chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    /// `x ~ U[0, 2π]`, `f_a(x) = offset_a + amplitude · sin(a x)`.
    SyntheticSine,
    /// Stationary AR(1) contexts with fixed random kernel-expansion means.
    Ar1Sensor,
    /// Contexts uniform on the unit circle, means linear in the context.
    UnitCircle,
    /// Replay of a stored dataset.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    #[serde(default = "default_arms")]
    pub arms: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_ar")]
    pub ar_coefficient: f64,
    #[serde(default = "default_dims")]
    pub dims: usize,
    /// Seed of the structural randomness (reward functions).
    #[serde(default)]
    pub seed: u64,
    /// Dataset path (`csv` only).
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Shuffle dataset rows with the stream seed (`csv` only, i.i.d. data).
    #[serde(default)]
    pub shuffle: bool,
    /// Row window `[skip, skip + take)` of a dataset (`csv` only).
    #[serde(default)]
    pub skip: usize,
    #[serde(default)]
    pub take: Option<usize>,
    /// Per-arm constant offsets (`synthetic_sine` only).
    #[serde(default)]
    pub offsets: Option<Vec<f64>>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_arms() -> usize {
    20
}
fn default_ar() -> f64 {
    0.9
}
fn default_dims() -> usize {
    1
}
fn default_amplitude() -> f64 {
    1.0
}

/// Kernel-expansion terms per arm in `ar1_sensor`.
pub const AR1_CENTERS: usize = 20;
/// Bandwidth of the Gaussian kernel used by the `ar1_sensor` means.
pub const AR1_BANDWIDTH: f64 = 1.0;

impl EnvSpec {
    pub fn new(kind: EnvKind, arms: usize) -> Self {
        Self {
            kind,
            arms,
            noise_sigma: 0.0,
            ar_coefficient: default_ar(),
            dims: if kind == EnvKind::UnitCircle { 2 } else { 1 },
            seed: 0,
            path: None,
            shuffle: false,
            skip: 0,
            take: None,
            offsets: None,
            amplitude: 1.0,
        }
    }

    /// The 20-arm `sin(a x)` environment.
    pub fn synthetic_sine() -> Self {
        Self::new(EnvKind::SyntheticSine, 20)
    }

    pub fn csv(path: impl Into<PathBuf>) -> Self {
        let mut s = Self::new(EnvKind::Csv, 0);
        s.path = Some(path.into());
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != EnvKind::Csv && self.arms < 2 {
            return Err(invalid(format!("need at least 2 arms, got {}", self.arms)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid("noise_sigma must be non-negative"));
        }
        match self.kind {
            EnvKind::SyntheticSine => {
                if self.dims != 1 {
                    return Err(invalid("synthetic_sine contexts are scalar (dims = 1)"));
                }
                if let Some(o) = &self.offsets {
                    if o.len() != self.arms || o.iter().any(|v| !v.is_finite()) {
                        return Err(invalid("offsets must hold one finite value per arm"));
                    }
                }
                if !self.amplitude.is_finite() {
                    return Err(invalid("amplitude must be finite"));
                }
            }
            EnvKind::Ar1Sensor => {
                if !(self.ar_coefficient > -1.0 && self.ar_coefficient < 1.0) {
                    return Err(invalid("ar_coefficient must lie in (-1, 1)"));
                }
                if self.dims < 1 {
                    return Err(invalid("dims must be at least 1"));
                }
            }
            EnvKind::UnitCircle => {
                if self.dims != 2 {
                    return Err(invalid("unit_circle contexts are 2-dimensional"));
                }
            }
            EnvKind::Csv => {
                if self.path.is_none() {
                    return Err(invalid("csv environment needs a path"));
                }
            }
        }
        Ok(())
    }

    /// Whether successive contexts are independent (shuffling is valid).
    pub fn is_iid(&self) -> bool {
        self.kind != EnvKind::Ar1Sensor
    }
}

#[derive(Debug, Clone)]
enum Source {
    Sine {
        offsets: Vec<f64>,
        amplitude: f64,
    },
    Ar1 {
        phi: f64,
        state: Vec<f64>,
        centers: Vec<Vec<f64>>,
        weights: Vec<Vec<f64>>,
        kernel: KernelSpec,
    },
    Circle {
        thetas: Vec<[f64; 2]>,
    },
    Replay {
        rows: Vec<EnvStep>,
    },
}

/// A seeded, replayable context/reward stream.
#[derive(Debug, Clone)]
pub struct Environment {
    arms: usize,
    dims: usize,
    noise_sigma: f64,
    rng: ChaCha8Rng,
    source: Source,
    t: usize,
}

fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

impl Environment {
    pub fn new(spec: &EnvSpec, stream_seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
        let mut structure = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x005e_ed0f_f00d);
        let (arms, dims, source) = match spec.kind {
            EnvKind::SyntheticSine => (
                spec.arms,
                1,
                Source::Sine {
                    offsets: spec.offsets.clone().unwrap_or_else(|| vec![0.0; spec.arms]),
                    amplitude: spec.amplitude,
                },
            ),
            EnvKind::Ar1Sensor => {
                let d = spec.dims;
                let m = AR1_CENTERS * spec.arms;
                let centers: Vec<Vec<f64>> = (0..m).map(|_| normal_vec(&mut structure, d)).collect();
                let scale = 1.0 / (AR1_CENTERS as f64).sqrt();
                let weights = (0..spec.arms)
                    .map(|_| normal_vec(&mut structure, AR1_CENTERS).into_iter().map(|w| w * scale).collect())
                    .collect();
                let state = normal_vec(&mut rng, d);
                (
                    spec.arms,
                    d,
                    Source::Ar1 {
                        phi: spec.ar_coefficient,
                        state,
                        centers,
                        weights,
                        kernel: KernelSpec::gaussian(AR1_BANDWIDTH)?,
                    },
                )
            }
            EnvKind::UnitCircle => {
                let thetas = (0..spec.arms)
                    .map(|_| {
                        let a = structure.random::<f64>() * TAU;
                        [a.cos(), a.sin()]
                    })
                    .collect();
                (spec.arms, 2, Source::Circle { thetas })
            }
            EnvKind::Csv => {
                let path = spec.path.as_ref().expect("validated");
                let mut data = load_csv(path)?;
                let end = spec.take.map_or(data.rows.len(), |n| (spec.skip + n).min(data.rows.len()));
                data.rows = data.rows.drain(spec.skip.min(end)..end).collect();
                if spec.shuffle {
                    data.shuffle(stream_seed);
                }
                (data.arms, data.dims, Source::Replay { rows: data.rows })
            }
        };
        Ok(Self {
            arms,
            dims,
            noise_sigma: spec.noise_sigma,
            rng,
            source,
            t: 0,
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Steps produced so far.
    pub fn steps_taken(&self) -> usize {
        self.t
    }

    /// Rows left for a replayed dataset; `None` for unbounded generators.
    pub fn remaining(&self) -> Option<usize> {
        match &self.source {
            Source::Replay { rows } => Some(rows.len().saturating_sub(self.t)),
            _ => None,
        }
    }

    fn with_noise(&mut self, means: Vec<f64>, context: Vec<f64>) -> Result<EnvStep> {
        let realized = if self.noise_sigma > 0.0 {
            means
                .iter()
                .map(|m| m + self.noise_sigma * self.rng.sample::<f64, _>(StandardNormal))
                .collect()
        } else {
            means.clone()
        };
        Ok(EnvStep {
            context: Context::new(context)?,
            true_means: Some(means),
            realized_rewards: realized,
        })
    }

    /// Produces the next step of the stream.
    pub fn next_step(&mut self) -> Result<EnvStep> {
        let step = match &mut self.source {
            Source::Sine { offsets, amplitude } => {
                let x = self.rng.random::<f64>() * TAU;
                let means = offsets
                    .iter()
                    .enumerate()
                    .map(|(a, o)| o + *amplitude * ((a + 1) as f64 * x).sin())
                    .collect();
                self.with_noise(means, vec![x])?
            }
            Source::Ar1 {
                phi,
                state,
                centers,
                weights,
                kernel,
            } => {
                let innov = (1.0 - *phi * *phi).sqrt();
                for s in state.iter_mut() {
                    *s = *phi * *s + innov * self.rng.sample::<f64, _>(StandardNormal);
                }
                let x = state.clone();
                let means = weights
                    .iter()
                    .enumerate()
                    .map(|(a, w)| {
                        w.iter()
                            .zip(&centers[a * AR1_CENTERS..(a + 1) * AR1_CENTERS])
                            .map(|(wm, z)| wm * kernel.eval_raw(&x, z))
                            .sum()
                    })
                    .collect();
                self.with_noise(means, x)?
            }
            Source::Circle { thetas } => {
                let a = self.rng.random::<f64>() * TAU;
                let x = [a.cos(), a.sin()];
                let means = thetas.iter().map(|th| th[0] * x[0] + th[1] * x[1]).collect();
                self.with_noise(means, x.to_vec())?
            }
            Source::Replay { rows } => rows.get(self.t).cloned().ok_or(Error::EndOfData(self.t))?,
        };
        self.t += 1;
        Ok(step)
    }

    /// Draws `n` consecutive steps.
    pub fn take_steps(&mut self, n: usize) -> Result<Vec<EnvStep>> {
        (0..n).map(|_| self.next_step()).collect()
    }
}

/// An in-memory dataset in the CSV exchange format.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dims: usize,
    pub arms: usize,
    pub rows: Vec<EnvStep>,
}

impl Dataset {
    pub fn has_means(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.true_means.is_some())
    }

    /// Seeded in-place shuffle of the row order.
    pub fn shuffle(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.rows.shuffle(&mut rng);
    }

    pub fn to_csv_string(&self) -> String {
        let means = self.has_means();
        let mut out = format!("d={},A={},means={}\n", self.dims, self.arms, u8::from(means));
        for row in &self.rows {
            let mut fields: Vec<f64> = row.context.as_slice().to_vec();
            fields.extend(&row.realized_rewards);
            if means {
                fields.extend(row.true_means.as_ref().expect("checked"));
            }
            let mut line = String::new();
            for (i, v) in fields.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                write!(line, "{v}").expect("string write");
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize, bool)> {
    let perr = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg,
    };
    let (mut d, mut a, mut means) = (None, None, false);
    for part in line.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| perr(format!("expected key=value, got `{part}`")))?;
        let v = v.trim();
        match k.trim() {
            "d" => d = Some(v.parse::<usize>().map_err(|e| perr(format!("d: {e}")))?),
            "A" => a = Some(v.parse::<usize>().map_err(|e| perr(format!("A: {e}")))?),
            "means" => {
                means = match v {
                    "0" => false,
                    "1" => true,
                    _ => return Err(perr(format!("means must be 0 or 1, got `{v}`"))),
                }
            }
            other => return Err(perr(format!("unknown header key `{other}`"))),
        }
    }
    let d = d.ok_or_else(|| perr("header is missing d".into()))?;
    let a = a.ok_or_else(|| perr("header is missing A".into()))?;
    if d == 0 || a < 2 {
        return Err(Error::Schema(format!("need d >= 1 and A >= 2, got d={d}, A={a}")));
    }
    Ok((d, a, means))
}

/// Parses a dataset from CSV text; `path` is only used in error messages.
pub fn parse_csv(path: &Path, text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty dataset", path.display())))?;
    let (d, a, means) = parse_header(path, header)?;
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let full = d + 2 * a;
        let ok_len = fields.len() == full || (!means && fields.len() == d + a);
        if !ok_len {
            return Err(Error::Schema(format!(
                "{}:{lineno}: expected {} fields, found {}",
                path.display(),
                if means { full } else { d + a },
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("`{s}`: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg: format!("non-finite value `{s}`"),
                });
            }
            Ok(v)
        };
        let context = fields[..d].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        let realized = fields[d..d + a].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        let tail = &fields[(d + a).min(fields.len())..];
        let true_means = if tail.iter().all(|s| s.is_empty()) {
            None
        } else if means {
            Some(tail.iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?)
        } else {
            return Err(Error::Schema(format!(
                "{}:{lineno}: mean columns present but header declares means=0",
                path.display()
            )));
        };
        rows.push(EnvStep {
            context: Context::new(context)?,
            true_means,
            realized_rewards: realized,
        });
    }
    Ok(Dataset { dims: d, arms: a, rows })
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_csv(path, &text)
}
