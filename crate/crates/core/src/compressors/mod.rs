//! Compression operators and their algebra.
//!
//! Unbiased operators (`Identity`, `RandK`, `NaturalDithering`) satisfy
//! `E Q(x) = x` and `E|Q(x) - x|^2 <= omega |x|^2`. Contractive operators
//! (`TopK`, `Bernoulli`, `Identity`) satisfy `E|C(x) - x|^2 <= (1 - delta) |x|^2`.
//! `Zero` is the zero map and is only meaningful as an inner shift compressor.

mod composite;
mod message;
mod stats;

pub use composite::{
    iterate_compressor, iterate_compressor_with_bits, negation_scaled, InducedCompressor,
    ShiftedCompressor,
};
pub use message::{index_bits, CompressedMessage, Payload, FLOAT_BITS};
pub use stats::{
    estimate_moments, variance_check, Moments, VarianceReport, MEAN_SE_SLACK, VARIANCE_SLACK,
};

use message::dither_level;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::rng::{seed_stream, Purpose};
use crate::{Error, Result, Vector};

/// Number of random unit vectors used to calibrate natural dithering.
pub const DITHER_CALIBRATION_SAMPLES: usize = 10_000;
/// Safety factor applied to the calibrated dithering variance.
pub const DITHER_CALIBRATION_FACTOR: f64 = 1.1;

/// Compressor family with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompressorKind {
    Identity,
    Zero,
    RandK { k: usize },
    TopK { k: usize },
    NaturalDithering { s: u32 },
    Bernoulli { p: f64 },
}

/// A validated compressor for vectors of a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressorSpec {
    kind: CompressorKind,
    dim: usize,
    // Natural dithering only: omega measured at construction.
    calibrated_omega: Option<f64>,
}

impl CompressorSpec {
    pub fn new(kind: CompressorKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCompressor(
                "dimension must be positive".into(),
            ));
        }
        let mut calibrated_omega = None;
        match kind {
            CompressorKind::RandK { k } | CompressorKind::TopK { k } => {
                if k == 0 || k > dim {
                    return Err(Error::InvalidCompressor(format!(
                        "K = {k} outside 1..={dim}"
                    )));
                }
            }
            CompressorKind::NaturalDithering { s } => {
                if s == 0 || s > 64 {
                    return Err(Error::InvalidCompressor(format!(
                        "natural dithering needs 1 <= s <= 64, got {s}"
                    )));
                }
                calibrated_omega = Some(calibrate_dithering(dim, s));
            }
            CompressorKind::Bernoulli { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::InvalidCompressor(format!(
                        "Bernoulli probability {p} outside (0, 1]"
                    )));
                }
            }
            CompressorKind::Identity | CompressorKind::Zero => {}
        }
        Ok(Self {
            kind,
            dim,
            calibrated_omega,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CompressorKind::Identity, dim)
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(CompressorKind::Zero, dim)
    }

    pub fn rand_k(dim: usize, k: usize) -> Result<Self> {
        Self::new(CompressorKind::RandK { k }, dim)
    }

    pub fn top_k(dim: usize, k: usize) -> Result<Self> {
        Self::new(CompressorKind::TopK { k }, dim)
    }

    pub fn natural_dithering(dim: usize, s: u32) -> Result<Self> {
        Self::new(CompressorKind::NaturalDithering { s }, dim)
    }

    pub fn bernoulli(dim: usize, p: f64) -> Result<Self> {
        Self::new(CompressorKind::Bernoulli { p }, dim)
    }

    pub fn kind(&self) -> CompressorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, CompressorKind::Zero)
    }

    /// Declared variance constant `omega`, for unbiased kinds only.
    pub fn omega(&self) -> Option<f64> {
        match self.kind {
            CompressorKind::Identity => Some(0.0),
            CompressorKind::RandK { k } => Some(self.dim as f64 / k as f64 - 1.0),
            CompressorKind::NaturalDithering { .. } => self.calibrated_omega,
            _ => None,
        }
    }

    /// Declared contraction constant `delta`, for contractive kinds only.
    /// The zero map has none; callers treat it as `delta = 0`.
    pub fn delta(&self) -> Option<f64> {
        match self.kind {
            CompressorKind::Identity => Some(1.0),
            CompressorKind::TopK { k } => Some(k as f64 / self.dim as f64),
            CompressorKind::Bernoulli { p } => Some(p),
            _ => None,
        }
    }

    /// `delta` with the zero map read as `0`.
    pub fn delta_or_zero(&self) -> f64 {
        self.delta().unwrap_or(0.0)
    }

    pub fn is_unbiased(&self) -> bool {
        self.omega().is_some()
    }

    /// Communication cost of `payload` under the bit-cost model:
    /// 64 bits per float, `ceil(log2 d)` bits per sparse index, one sign bit
    /// plus `ceil(log2(s + 1))` level bits per dithered coordinate plus the
    /// norm, and a single flag bit for a Bernoulli coin that did not fire.
    pub fn bit_cost(&self, payload: &Payload) -> u64 {
        let d = self.dim as u64;
        match (self.kind, payload) {
            (CompressorKind::Zero, _) => 0,
            (CompressorKind::Identity, _) => FLOAT_BITS * d,
            (CompressorKind::RandK { k }, _) | (CompressorKind::TopK { k }, _) => {
                k as u64 * (FLOAT_BITS + index_bits(self.dim))
            }
            (CompressorKind::NaturalDithering { s }, _) => {
                d * (1 + index_bits(s as usize + 1)) + FLOAT_BITS
            }
            (CompressorKind::Bernoulli { .. }, Payload::Skipped) => 1,
            (CompressorKind::Bernoulli { .. }, _) => FLOAT_BITS * d,
        }
    }

    /// Apply the operator to `x`.
    pub fn compress<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<CompressedMessage> {
        check_dim(self.dim, x.len())?;
        let payload = match self.kind {
            CompressorKind::Identity => Payload::Dense(x.as_slice().to_vec()),
            CompressorKind::Zero => Payload::Zero,
            CompressorKind::RandK { k } => rand_k(x, k, rng),
            CompressorKind::TopK { k } => top_k(x, k),
            CompressorKind::NaturalDithering { s } => natural_dithering(x, s, rng),
            CompressorKind::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    Payload::Dense(x.as_slice().to_vec())
                } else {
                    Payload::Skipped
                }
            }
        };
        let bits = self.bit_cost(&payload);
        Ok(CompressedMessage::new(payload, bits, self.dim))
    }
}

fn rand_k<R: Rng + ?Sized>(x: &Vector, k: usize, rng: &mut R) -> Payload {
    let d = x.len();
    let scale = d as f64 / k as f64;
    // Partial Fisher-Yates: the first k slots are a uniform k-subset.
    let mut order: Vec<u32> = (0..d as u32).collect();
    for j in 0..k {
        let pick = rng.random_range(j..d);
        order.swap(j, pick);
    }
    order.truncate(k);
    let values = order.iter().map(|&i| scale * x[i as usize]).collect();
    Payload::Sparse {
        indices: order,
        values,
    }
}

fn top_k(x: &Vector, k: usize) -> Payload {
    let mut order: Vec<u32> = (0..x.len() as u32).collect();
    // Larger magnitude first; equal magnitudes keep the lower index.
    order.sort_by(|&a, &b| {
        x[b as usize]
            .abs()
            .total_cmp(&x[a as usize].abs())
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order.sort_unstable();
    let values = order.iter().map(|&i| x[i as usize]).collect();
    Payload::Sparse {
        indices: order,
        values,
    }
}

/// Bracketing levels `(code_lo, code_hi)` for a normalized magnitude `t` in [0, 1].
fn dither_bracket(t: f64, s: u32) -> (u8, u8) {
    let smallest = dither_level(1, s);
    if t <= smallest {
        return (0, 1);
    }
    // Smallest code whose level is >= t.
    let mut hi = 1u8;
    while (hi as u32) < s && dither_level(hi, s) < t {
        hi += 1;
    }
    (hi - 1, hi)
}

fn natural_dithering<R: Rng + ?Sized>(x: &Vector, s: u32, rng: &mut R) -> Payload {
    let norm = x.norm();
    if norm == 0.0 {
        return Payload::Zero;
    }
    let mut negative = Vec::with_capacity(x.len());
    let mut codes = Vec::with_capacity(x.len());
    for &v in x.iter() {
        let t = (v.abs() / norm).min(1.0);
        let (lo, hi) = dither_bracket(t, s);
        let (a, b) = (dither_level(lo, s), dither_level(hi, s));
        let up = (t - a) / (b - a);
        let code = if rng.random::<f64>() < up { hi } else { lo };
        negative.push(v < 0.0);
        codes.push(code);
    }
    Payload::Dithered {
        norm,
        levels: s,
        negative,
        codes,
    }
}

/// Exact `E|Q(v) - v|^2` of natural dithering for a unit vector `v`.
pub(crate) fn dithering_variance_unit(v: &Vector, s: u32) -> f64 {
    v.iter()
        .map(|&c| {
            let t = c.abs().min(1.0);
            let (lo, hi) = dither_bracket(t, s);
            (dither_level(hi, s) - t) * (t - dither_level(lo, s))
        })
        .sum()
}

fn calibrate_dithering(dim: usize, s: u32) -> f64 {
    let mut rng = seed_stream(dim as u64, s as u64, 0, Purpose::Calibration);
    // The equal-magnitude direction is included because random directions
    // rarely approach it and it maximizes the variance when all coordinates
    // fall below the first nonzero level.
    let flat = Vector::from_element(dim, 1.0 / (dim as f64).sqrt());
    let mut worst = dithering_variance_unit(&flat, s);
    for _ in 0..DITHER_CALIBRATION_SAMPLES {
        let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm == 0.0 {
            continue;
        }
        worst = worst.max(dithering_variance_unit(&(g / norm), s));
    }
    worst * DITHER_CALIBRATION_FACTOR
}

/// Compressor description as written in experiment configs.
///
/// `RandK`/`TopK` accept either an absolute `k` or a share `q = k / d`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompressorConfig {
    #[default]
    Identity,
    Zero,
    RandK {
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        q: Option<f64>,
    },
    TopK {
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        q: Option<f64>,
    },
    NaturalDithering {
        s: u32,
    },
    Bernoulli {
        p: f64,
    },
}

fn resolve_count(k: Option<usize>, q: Option<f64>, dim: usize) -> Result<usize> {
    match (k, q) {
        (Some(k), None) => Ok(k),
        (None, Some(q)) => {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidCompressor(format!(
                    "share q = {q} outside (0, 1]"
                )));
            }
            Ok(((q * dim as f64).round() as usize).clamp(1, dim))
        }
        (Some(_), Some(_)) => Err(Error::InvalidCompressor(
            "give either k or q, not both".into(),
        )),
        (None, None) => Err(Error::InvalidCompressor("missing k or q".into())),
    }
}

impl CompressorConfig {
    pub fn build(&self, dim: usize) -> Result<CompressorSpec> {
        let kind = match *self {
            CompressorConfig::Identity => CompressorKind::Identity,
            CompressorConfig::Zero => CompressorKind::Zero,
            CompressorConfig::RandK { k, q } => CompressorKind::RandK {
                k: resolve_count(k, q, dim)?,
            },
            CompressorConfig::TopK { k, q } => CompressorKind::TopK {
                k: resolve_count(k, q, dim)?,
            },
            CompressorConfig::NaturalDithering { s } => CompressorKind::NaturalDithering { s },
            CompressorConfig::Bernoulli { p } => CompressorKind::Bernoulli { p },
        };
        CompressorSpec::new(kind, dim)
    }
}
