//! Ground-truth models, seeded sampling and Monte Carlo studies.
//!
//! Observations are generated as `X_j = B_j V_j + sigma Z_j` with
//! `P(B_j = 0) = p`. Every observation owns its own random stream: a
//! ChaCha8 generator keyed by the sample seed with stream id `j`, so a
//! sample is a pure function of `(seed, j)` and Monte Carlo replications
//! can run in any order or in parallel.
//!
//! Sampling methods: `B` from one uniform, normal variates from the
//! ziggurat method, gamma variates by Marsaglia-Tsang squeeze rejection
//! (via `rand_distr`), mixture components by inverse-CDF on the weights.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{asymptotic_sd_p, corrected_sd_p};
use crate::error::{Error, Result};
use crate::estimators::p_raw;
use crate::kernels::Kernel;
use crate::numerics::{gamma, Sample};

/// One component of a normal mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Distribution family of the continuous part `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal { mean: f64, variance: f64 },
    /// Density `rate^shape v^(shape-1) exp(-rate v) / Gamma(shape)` on `v > 0`.
    Gamma { shape: f64, rate: f64 },
    NormalMixture { components: Vec<MixtureComponent> },
}

impl Family {
    fn validate(&self) -> Result<()> {
        match self {
            Family::Normal { mean, variance } => {
                if !mean.is_finite() || !(*variance > 0.0) {
                    return Err(Error::invalid("family", "normal needs a finite mean and positive variance"));
                }
            }
            Family::Gamma { shape, rate } => {
                if !(*shape > 1.0) || !(*rate > 0.0) {
                    return Err(Error::invalid("family", "gamma needs shape > 1 and rate > 0"));
                }
            }
            Family::NormalMixture { components } => {
                if components.is_empty() {
                    return Err(Error::invalid("family", "mixture needs at least one component"));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.iter().any(|c| !(c.weight > 0.0) || !(c.variance > 0.0) || !c.mean.is_finite())
                    || (total - 1.0).abs() > 1e-9
                {
                    return Err(Error::invalid("family", "mixture weights must be positive and sum to 1"));
                }
            }
        }
        Ok(())
    }

    pub fn density(&self, v: f64) -> f64 {
        match self {
            Family::Normal { mean, variance } => normal_pdf(v, *mean, *variance),
            Family::Gamma { shape, rate } => {
                if v <= 0.0 {
                    0.0
                } else {
                    ((shape - 1.0) * v.ln() + shape * rate.ln() - rate * v).exp() / gamma(*shape)
                }
            }
            Family::NormalMixture { components } => {
                components.iter().map(|c| c.weight * normal_pdf(v, c.mean, c.variance)).sum()
            }
        }
    }

    /// Characteristic function `E[exp(i t V)]`.
    pub fn cf(&self, t: f64) -> Complex64 {
        match self {
            Family::Normal { mean, variance } => normal_cf(t, *mean, *variance),
            Family::Gamma { shape, rate } => Complex64::new(1.0, -t / rate).powf(-shape),
            Family::NormalMixture { components } => {
                components.iter().map(|c| normal_cf(t, c.mean, c.variance) * c.weight).sum()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Family::Normal { mean, .. } => *mean,
            Family::Gamma { shape, rate } => shape / rate,
            Family::NormalMixture { components } => components.iter().map(|c| c.weight * c.mean).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Family::Normal { variance, .. } => *variance,
            Family::Gamma { shape, rate } => shape / (rate * rate),
            Family::NormalMixture { components } => {
                let m = self.mean();
                components.iter().map(|c| c.weight * (c.variance + (c.mean - m).powi(2))).sum()
            }
        }
    }

    /// Interval outside which the density is below double precision relevance.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Family::Normal { mean, variance } => {
                let sd = variance.sqrt();
                (mean - 12.0 * sd, mean + 12.0 * sd)
            }
            Family::Gamma { shape, rate } => (0.0, (shape + 40.0 * shape.sqrt() + 40.0) / rate),
            Family::NormalMixture { components } => components.iter().fold((f64::MAX, f64::MIN), |(lo, hi), c| {
                let sd = c.variance.sqrt();
                (lo.min(c.mean - 12.0 * sd), hi.max(c.mean + 12.0 * sd))
            }),
        }
    }

    /// Frequency beyond which `int_T^inf |cf(t)| dt < tol`.
    pub fn cf_cutoff(&self, tol: f64) -> f64 {
        let gaussian = |var: f64| (2.0 * (1.0 / tol).ln().max(1.0) / var).sqrt() + 1.0;
        match self {
            Family::Normal { variance, .. } => gaussian(*variance),
            Family::NormalMixture { components } => {
                components.iter().map(|c| gaussian(c.variance)).fold(0.0, f64::max)
            }
            // |cf(t)| <= (t / rate)^-shape, so the tail is below
            // rate^shape T^(1-shape) / (shape - 1).
            Family::Gamma { shape, rate } => {
                let k = shape - 1.0;
                ((rate.powf(*shape) / (k * tol)).ln() / k).exp().max(10.0 * rate)
            }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Family::Normal { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            Family::Gamma { shape, rate } => {
                Gamma::new(*shape, 1.0 / rate).expect("validated gamma parameters").sample(rng)
            }
            Family::NormalMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = components[components.len() - 1];
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = *c;
                        break;
                    }
                }
                let z: f64 = StandardNormal.sample(rng);
                chosen.mean + chosen.variance.sqrt() * z
            }
        }
    }
}

fn normal_pdf(v: f64, mean: f64, variance: f64) -> f64 {
    (-(v - mean).powi(2) / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

fn normal_cf(t: f64, mean: f64, variance: f64) -> Complex64 {
    Complex64::from_polar((-0.5 * variance * t * t).exp(), mean * t)
}

fn parse_numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect()
}

impl FromStr for Family {
    type Err = Error;

    /// Parses `normal:MEAN,VAR`, `gamma:SHAPE[,RATE]` or
    /// `mixture:W,MEAN,VAR;W,MEAN,VAR;...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::invalid("model", reason);
        let (kind, args) = s.split_once(':').ok_or_else(|| bad(format!("expected KIND:PARAMS, got `{s}`")))?;
        let family = match kind.trim() {
            "normal" => match parse_numbers(args).map_err(bad)?.as_slice() {
                [mean, variance] => Family::Normal { mean: *mean, variance: *variance },
                _ => return Err(bad("normal takes MEAN,VARIANCE".into())),
            },
            "gamma" => match parse_numbers(args).map_err(bad)?.as_slice() {
                [shape] => Family::Gamma { shape: *shape, rate: 1.0 },
                [shape, rate] => Family::Gamma { shape: *shape, rate: *rate },
                _ => return Err(bad("gamma takes SHAPE[,RATE]".into())),
            },
            "mixture" => {
                let mut components = Vec::new();
                for part in args.split(';') {
                    match parse_numbers(part).map_err(bad)?.as_slice() {
                        [weight, mean, variance] => {
                            components.push(MixtureComponent { weight: *weight, mean: *mean, variance: *variance })
                        }
                        _ => return Err(bad("mixture components are WEIGHT,MEAN,VARIANCE".into())),
                    }
                }
                Family::NormalMixture { components }
            }
            other => return Err(bad(format!("unknown family `{other}`"))),
        };
        family.validate()?;
        Ok(family)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Normal { mean, variance } => write!(f, "normal:{mean},{variance}"),
            Family::Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
            Family::NormalMixture { components } => {
                write!(f, "mixture:")?;
                for (i, c) in components.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{},{},{}", c.weight, c.mean, c.variance)?;
                }
                Ok(())
            }
        }
    }
}

/// Generative model `X = B V + sigma Z` with `P(B = 0) = p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p: f64,
    pub family: Family,
    pub sigma: f64,
}

impl ModelSpec {
    pub fn new(p: f64, family: Family, sigma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid("p", format!("atom mass must lie in [0, 1), got {p}")));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("must be finite and non-negative, got {sigma}")));
        }
        family.validate()?;
        Ok(ModelSpec { p, family, sigma })
    }

    /// `p = 0.1`, `V ~ N(3, 9)`, `sigma = 1`.
    pub fn normal_example() -> Self {
        ModelSpec { p: 0.1, family: Family::Normal { mean: 3.0, variance: 9.0 }, sigma: 1.0 }
    }

    /// `p = 0.25`, `V ~ Gamma(8, 1)`, `sigma = 1`.
    pub fn gamma_example() -> Self {
        ModelSpec { p: 0.25, family: Family::Gamma { shape: 8.0, rate: 1.0 }, sigma: 1.0 }
    }

    /// `p = 0.1`, `V ~ 0.5 N(-2, 1) + 0.5 N(2, 1)`, `sigma = 1`.
    pub fn mixture_example() -> Self {
        let components = vec![
            MixtureComponent { weight: 0.5, mean: -2.0, variance: 1.0 },
            MixtureComponent { weight: 0.5, mean: 2.0, variance: 1.0 },
        ];
        ModelSpec { p: 0.1, family: Family::NormalMixture { components }, sigma: 1.0 }
    }

    /// Characteristic function of `Y = B V`: `p + (1 - p) cf_V(t)`.
    pub fn cf_y(&self, t: f64) -> Complex64 {
        self.family.cf(t) * (1.0 - self.p) + self.p
    }

    /// `Var[Y] = (1 - p)(Var[V] + p E[V]^2)`.
    pub fn variance_y(&self) -> f64 {
        let m = self.family.mean();
        (1.0 - self.p) * (self.family.variance() + self.p * m * m)
    }
}

fn observation_rng(seed: u64, j: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j);
    rng
}

/// Draws `n` observations of `X = B V + sigma Z`; observation `j` depends
/// only on `(seed, j)`.
pub fn draw_sample(model: &ModelSpec, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    let values = (0..n as u64)
        .map(|j| {
            let mut rng = observation_rng(seed, j);
            let atom = rng.random::<f64>() < model.p;
            let y = if atom { 0.0 } else { model.family.draw(&mut rng) };
            let z: f64 = StandardNormal.sample(&mut rng);
            y + model.sigma * z
        })
        .collect();
    Sample::new(values, model.sigma)
}

/// Draws `n` values of `V` alone, with the same per-index seeding.
pub fn draw_family(family: &Family, n: usize, seed: u64) -> Vec<f64> {
    (0..n as u64).map(|j| family.draw(&mut observation_rng(seed, j))).collect()
}

/// Noise-to-signal ratio `100 sigma^2 / Var[Y]`, in percent.
pub fn nsr(model: &ModelSpec) -> Result<f64> {
    let var_y = model.variance_y();
    if !(var_y > 0.0) {
        return Err(Error::DegenerateModel);
    }
    Ok(100.0 * model.sigma * model.sigma / var_y)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` for bandwidth index `g_index` in a study.
pub fn replication_seed(study_seed: u64, g_index: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(study_seed) ^ g_index) ^ rep.rotate_left(32))
}

/// Monte Carlo summary of the atom estimator at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCSummary {
    pub g: f64,
    #[serde(rename = "R")]
    pub replications: usize,
    pub n: usize,
    #[serde(rename = "mean")]
    pub sample_mean: f64,
    #[serde(rename = "sd")]
    pub sample_sd: f64,
    pub asymptotic_sd: f64,
    pub corrected_sd: f64,
    pub seed: u64,
    pub estimates: Vec<f64>,
}

impl MCSummary {
    pub const CSV_HEADER: &'static str = "g,R,n,mean,sd,asymptotic_sd,corrected_sd,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.g,
            self.replications,
            self.n,
            self.sample_mean,
            self.sample_sd,
            self.asymptotic_sd,
            self.corrected_sd,
            self.seed
        )
    }
}

pub fn write_summaries_csv<W: Write>(summaries: &[MCSummary], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", MCSummary::CSV_HEADER)?;
    for s in summaries {
        writeln!(out, "{}", s.csv_row())?;
    }
    Ok(())
}

/// Sample mean and standard deviation (denominator `n - 1`).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Sample skewness `m3 / m2^(3/2)` with population moments.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Repeats the atom estimator over `reps` independent samples for each
/// bandwidth in `bandwidths`.
pub fn mc_study(
    model: &ModelSpec,
    n: usize,
    bandwidths: &[f64],
    reps: usize,
    seed: u64,
    kernel_k: &Kernel,
) -> Result<Vec<MCSummary>> {
    if reps < 2 {
        return Err(Error::invalid("reps", format!("need at least 2 replications, got {reps}")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    bandwidths
        .iter()
        .enumerate()
        .map(|(gi, &g)| {
            let estimates = (0..reps as u64)
                .into_par_iter()
                .map(|r| {
                    let sample = draw_sample(model, n, replication_seed(seed, gi as u64, r))?;
                    p_raw(&sample, g, kernel_k)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (sample_mean, sample_sd) = mean_sd(&estimates);
            Ok(MCSummary {
                g,
                replications: reps,
                n,
                sample_mean,
                sample_sd,
                asymptotic_sd: asymptotic_sd_p(g, n, model.sigma, kernel_k)?,
                corrected_sd: corrected_sd_p(g, n, model.sigma, kernel_k)?,
                seed,
                estimates,
            })
        })
        .collect()
}

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bin_count + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 20;

/// Bins `values` into `bin_count` equal-width bins spanning `[min, max]`.
/// Bins are left-closed except the last, which is closed on both sides.
pub fn histogram(values: &[f64], bin_count: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bin_count == 0 {
        return Err(Error::invalid("bin_count", "need at least one bin"));
    }
    let (mut lo, mut hi) = values.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bin_count as f64;
    let edges: Vec<f64> = (0..=bin_count).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bin_count];
    for &v in values {
        let idx = (((v - lo) / width).floor() as usize).min(bin_count - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}
