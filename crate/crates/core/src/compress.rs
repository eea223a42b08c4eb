//! Randomized unbiased compressors.
//!
//! The main operator is the element-wise stochastic quantizer: a coordinate
//! `x` with `lθ <= x < (l+1)θ` is sent as `lθ` with probability `1 + l - x/θ`
//! and as `(l+1)θ` otherwise. It is unbiased with error variance
//! `δ(1-δ)θ² <= θ²/4`, where `δ = x/θ - l`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits charged per scalar for an uncompressed float.
pub const FLOAT_BITS: u32 = 32;

/// Bits charged for the norm sent alongside a relative-compressor message.
const NORM_BITS: u64 = 32;

/// `ceil(log2(ymax / theta))`, at least 1.
pub fn bits_for(theta: f64, ymax: f64) -> u32 {
    let raw = (ymax / theta).log2().ceil();
    if raw.is_finite() && raw >= 1.0 {
        raw as u32
    } else {
        1
    }
}

/// Grid spacing, bit budget and asserted input magnitude bound of the quantizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerParams {
    theta: f64,
    bits: u32,
    ymax: f64,
}

impl QuantizerParams {
    /// Quantizer whose bit budget is derived from `theta` and `ymax`.
    pub fn new(theta: f64, ymax: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::config("compressor.theta", "must be positive and finite"));
        }
        if !(ymax > 0.0) || !ymax.is_finite() {
            return Err(Error::config("compressor.ymax", "must be positive and finite"));
        }
        Self::with_bits(theta, bits_for(theta, ymax), ymax)
    }

    /// Quantizer with an explicit bit budget; requires `2^bits * theta >= ymax`.
    pub fn with_bits(theta: f64, bits: u32, ymax: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::config("compressor.theta", "must be positive and finite"));
        }
        if bits == 0 || bits > 52 {
            return Err(Error::config("compressor.bits", "must be between 1 and 52"));
        }
        let params = Self { theta, bits, ymax };
        if !(params.limit() >= ymax) {
            return Err(Error::config(
                "compressor.ymax",
                format!("2^{bits} * {theta} is below the magnitude bound {ymax}"),
            ));
        }
        Ok(params)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    /// Inputs must satisfy `|x| < 2^bits * theta`.
    pub fn limit(&self) -> f64 {
        (1u64 << self.bits) as f64 * self.theta
    }

    pub fn stats(&self) -> CompressionStats {
        CompressionStats {
            sigma_sq_bound: self.theta * self.theta / 4.0,
            bits_per_scalar: self.bits,
        }
    }
}

/// Per-scalar error variance bound and bit cost of a compressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionStats {
    pub sigma_sq_bound: f64,
    pub bits_per_scalar: u32,
}

/// Randomized rounding of one scalar given a uniform draw `u ∈ [0, 1)`.
#[inline]
pub fn round_stochastic(x: f64, theta: f64, u: f64) -> f64 {
    let scaled = x / theta;
    let l = scaled.floor();
    if u < scaled - l {
        (l + 1.0) * theta
    } else {
        l * theta
    }
}

/// Quantizes `x` into `out`, one uniform draw per coordinate.
pub fn quantize_into<R: Rng + ?Sized>(
    x: &[f64],
    params: &QuantizerParams,
    rng: &mut R,
    out: &mut [f64],
) -> Result<u64> {
    let limit = params.limit();
    for (index, (&v, o)) in x.iter().zip(out.iter_mut()).enumerate() {
        if !(v.abs() < limit) {
            return Err(Error::Range { index, value: v, limit });
        }
        *o = round_stochastic(v, params.theta, rng.random());
    }
    Ok(x.len() as u64 * params.bits as u64)
}

/// Stochastic quantization of `x`; returns the message and its bit cost `n * b`.
pub fn quantize<R: Rng + ?Sized>(x: &[f64], params: &QuantizerParams, rng: &mut R) -> Result<(Vec<f64>, u64)> {
    let mut out = vec![0.0; x.len()];
    let bits = quantize_into(x, params, rng, &mut out)?;
    Ok((out, bits))
}

/// No compression: the float is sent as is, at 32 bits per scalar.
pub fn identity_compress(x: &[f64]) -> (Vec<f64>, u64) {
    (x.to_vec(), x.len() as u64 * FLOAT_BITS as u64)
}

/// Grid spacing of the relative compressor for dimension `n`, as a fraction of `‖x‖`.
fn relative_step(phi: f64, n: usize) -> f64 {
    2.0 * (phi / n as f64).sqrt()
}

fn relative_bits_per_scalar(phi: f64, n: usize) -> u64 {
    // Coordinates lie in [-‖x‖, ‖x‖], which spans at most 2 ceil(1/s) + 1 grid points.
    let levels = 2.0 * (1.0 / relative_step(phi, n)).ceil() + 1.0;
    levels.log2().ceil().max(1.0) as u64
}

fn relative_bits(phi: f64, n: usize) -> u64 {
    NORM_BITS + n as u64 * relative_bits_per_scalar(phi, n)
}

/// Unbiased compressor with error second moment at most `phi ‖x‖²`.
///
/// Each coordinate is randomly rounded to a grid of spacing `2 sqrt(phi/n) ‖x‖`;
/// the per-coordinate error variance is at most a quarter of the squared spacing.
pub fn relative_compress_into<R: Rng + ?Sized>(x: &[f64], phi: f64, rng: &mut R, out: &mut [f64]) -> u64 {
    let n = x.len();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        out.fill(0.0);
    } else {
        let step = relative_step(phi, n) * norm;
        for (o, &v) in out.iter_mut().zip(x) {
            *o = round_stochastic(v, step, rng.random());
        }
    }
    relative_bits(phi, n)
}

pub fn relative_compress<R: Rng + ?Sized>(x: &[f64], phi: f64, rng: &mut R) -> Result<(Vec<f64>, u64)> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::config("compressor.phi", "must be positive and finite"));
    }
    let mut out = vec![0.0; x.len()];
    let bits = relative_compress_into(x, phi, rng, &mut out);
    Ok((out, bits))
}

/// A compression operator applied to every transmitted estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compressor {
    Identity,
    Quantizer(QuantizerParams),
    Relative { phi: f64 },
}

impl Compressor {
    /// Compresses `x` into `out` and returns the bits charged.
    pub fn compress_into<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) -> Result<u64> {
        match self {
            Compressor::Identity => {
                out.copy_from_slice(x);
                Ok(x.len() as u64 * FLOAT_BITS as u64)
            }
            Compressor::Quantizer(params) => quantize_into(x, params, rng, out),
            Compressor::Relative { phi } => Ok(relative_compress_into(x, *phi, rng, out)),
        }
    }

    /// Bits charged for one message of dimension `dim`.
    pub fn message_bits(&self, dim: usize) -> u64 {
        match self {
            Compressor::Identity => dim as u64 * FLOAT_BITS as u64,
            Compressor::Quantizer(p) => dim as u64 * p.bits() as u64,
            Compressor::Relative { phi } => relative_bits(*phi, dim),
        }
    }

    /// Whether the operator draws random numbers.
    pub fn is_random(&self) -> bool {
        !matches!(self, Compressor::Identity)
    }
}

/// Config form of a compressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CompressorSpec {
    Identity,
    StochasticQuantizer {
        theta: f64,
        #[serde(default = "default_ymax")]
        ymax: f64,
        /// Overrides the derived `ceil(log2(ymax/theta))`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<u32>,
    },
    Relative {
        phi: f64,
    },
}

/// Magnitude bound on transmitted estimates in the energy-game experiments.
pub const DEFAULT_YMAX: f64 = 90.0;

fn default_ymax() -> f64 {
    DEFAULT_YMAX
}

impl CompressorSpec {
    pub fn build(&self) -> Result<Compressor> {
        match self {
            CompressorSpec::Identity => Ok(Compressor::Identity),
            CompressorSpec::StochasticQuantizer { theta, ymax, bits } => {
                let params = match bits {
                    Some(b) => QuantizerParams::with_bits(*theta, *b, *ymax)?,
                    None => QuantizerParams::new(*theta, *ymax)?,
                };
                Ok(Compressor::Quantizer(params))
            }
            CompressorSpec::Relative { phi } => {
                if !(*phi > 0.0) || !phi.is_finite() {
                    return Err(Error::config("compressor.phi", "must be positive and finite"));
                }
                Ok(Compressor::Relative { phi: *phi })
            }
        }
    }
}
