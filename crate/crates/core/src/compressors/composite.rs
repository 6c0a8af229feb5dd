use rand::Rng;

use super::{CompressedMessage, CompressorSpec, Payload};
use crate::error::check_dim;
use crate::{Error, Result, Vector};

/// Unbiased operator `x -> h + Q(x - h)`, a member of `U(omega; h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedCompressor {
    base: CompressorSpec,
    shift: Vector,
}

impl ShiftedCompressor {
    pub fn new(base: CompressorSpec, shift: Vector) -> Result<Self> {
        if !base.is_unbiased() {
            return Err(Error::InvalidCompressor(format!(
                "{:?} is not unbiased and cannot be shifted",
                base.kind()
            )));
        }
        check_dim(base.dim(), shift.len())?;
        Ok(Self { base, shift })
    }

    /// Unshifted operator, i.e. `U(omega; 0)`.
    pub fn unshifted(base: CompressorSpec) -> Result<Self> {
        let d = base.dim();
        Self::new(base, Vector::zeros(d))
    }

    pub fn base(&self) -> &CompressorSpec {
        &self.base
    }

    pub fn shift_vector(&self) -> &Vector {
        &self.shift
    }

    pub fn omega(&self) -> f64 {
        self.base.omega().unwrap_or(0.0)
    }

    /// Shift the operator by `v`: `x -> v + self(x - v)`, which lies in
    /// `U(omega; h + v)`.
    pub fn shift(&self, v: &Vector) -> Result<Self> {
        check_dim(self.shift.len(), v.len())?;
        Ok(Self {
            base: self.base.clone(),
            shift: &self.shift + v,
        })
    }

    /// Evaluate at `x`. Returns the value and the bits of the compressed part.
    pub fn apply<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<(Vector, u64)> {
        check_dim(self.shift.len(), x.len())?;
        let m = self.base.compress(&(x - &self.shift), rng)?;
        Ok((&self.shift + &m.dense, m.bits))
    }
}

/// Induced compressor `C(x) + Q(x - C(x))` built from a contractive `C` and
/// an unbiased `Q`. It is unbiased with `omega (1 - delta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedCompressor {
    biased: CompressorSpec,
    unbiased: CompressorSpec,
}

impl InducedCompressor {
    pub fn new(biased: CompressorSpec, unbiased: CompressorSpec) -> Result<Self> {
        check_dim(biased.dim(), unbiased.dim())?;
        if !unbiased.is_unbiased() {
            return Err(Error::InvalidCompressor(format!(
                "{:?} is not unbiased",
                unbiased.kind()
            )));
        }
        if biased.delta().is_none() && !biased.is_zero() {
            return Err(Error::InvalidCompressor(format!(
                "{:?} has no contraction constant",
                biased.kind()
            )));
        }
        Ok(Self { biased, unbiased })
    }

    pub fn biased(&self) -> &CompressorSpec {
        &self.biased
    }

    pub fn unbiased(&self) -> &CompressorSpec {
        &self.unbiased
    }

    /// Composite variance constant `omega (1 - delta)`.
    pub fn omega(&self) -> f64 {
        self.unbiased.omega().unwrap_or(0.0) * (1.0 - self.biased.delta_or_zero())
    }

    pub fn compress<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<CompressedMessage> {
        let (c, q) = self.compress_parts(x, rng)?;
        let bits = c.bits + q.bits;
        Ok(CompressedMessage::new(
            Payload::Composite(Box::new(c.payload), Box::new(q.payload)),
            bits,
            self.biased.dim(),
        ))
    }

    /// The two messages `C(x)` and `Q(x - C(x))` separately.
    pub fn compress_parts<R: Rng + ?Sized>(
        &self,
        x: &Vector,
        rng: &mut R,
    ) -> Result<(CompressedMessage, CompressedMessage)> {
        let c = self.biased.compress(x, rng)?;
        let q = self.unbiased.compress(&(x - &c.dense), rng)?;
        Ok((c, q))
    }
}

/// Compressed-iterate operator `(1/gamma) [x - Q(x - gamma z)]`.
///
/// Unbiased in `z` and a member of `U(omega; x / gamma)`.
pub fn iterate_compressor<R: Rng + ?Sized>(
    spec: &CompressorSpec,
    anchor: &Vector,
    gamma: f64,
    z: &Vector,
    rng: &mut R,
) -> Result<Vector> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step gamma = {gamma} must be nonzero"
        )));
    }
    check_dim(spec.dim(), anchor.len())?;
    check_dim(spec.dim(), z.len())?;
    iterate_compressor_with_bits(spec, anchor, gamma, z, rng).map(|(v, _)| v)
}

/// [`iterate_compressor`] that also reports the bits of the underlying message.
pub fn iterate_compressor_with_bits<R: Rng + ?Sized>(
    spec: &CompressorSpec,
    anchor: &Vector,
    gamma: f64,
    z: &Vector,
    rng: &mut R,
) -> Result<(Vector, u64)> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step gamma = {gamma} must be nonzero"
        )));
    }
    check_dim(spec.dim(), anchor.len())?;
    check_dim(spec.dim(), z.len())?;
    let inner = anchor - z * gamma;
    let q = spec.compress(&inner, rng)?;
    Ok(((anchor - &q.dense) / gamma, q.bits))
}

/// Negation-scaled operator `-t Q(-z / t)`; unbiased with the same omega.
pub fn negation_scaled<R: Rng + ?Sized>(
    spec: &CompressorSpec,
    t: f64,
    z: &Vector,
    rng: &mut R,
) -> Result<Vector> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale t = {t} must be nonzero"
        )));
    }
    let q = spec.compress(&(-z / t), rng)?;
    Ok(q.dense * (-t))
}
