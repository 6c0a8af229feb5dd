use crate::Vector;

/// Bits used to transmit one floating-point value.
pub const FLOAT_BITS: u64 = 64;

/// Wire-level content of a compressed message.
///
/// Layouts:
/// - `Zero`: nothing is sent.
/// - `Dense`: `d` floats.
/// - `Sparse`: `(index, value)` pairs; values are already scaled.
/// - `Dithered`: one norm, then per coordinate a sign bit and a level code.
///   Code `0` is the zero level, code `j >= 1` is `2^(j - s)`.
/// - `Skipped`: a single flag bit saying the Bernoulli coin did not fire.
/// - `Composite`: two payloads whose decoded values add up.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Zero,
    Dense(Vec<f64>),
    Sparse {
        indices: Vec<u32>,
        values: Vec<f64>,
    },
    Dithered {
        norm: f64,
        levels: u32,
        negative: Vec<bool>,
        codes: Vec<u8>,
    },
    Skipped,
    Composite(Box<Payload>, Box<Payload>),
}

/// Magnitude of dithering level `code` out of `levels`.
pub(crate) fn dither_level(code: u8, levels: u32) -> f64 {
    if code == 0 {
        0.0
    } else {
        (2.0f64).powi(code as i32 - levels as i32)
    }
}

impl Payload {
    /// Reconstruct the dense vector of dimension `dim`.
    pub fn decode(&self, dim: usize) -> Vector {
        let mut out = Vector::zeros(dim);
        self.accumulate(&mut out);
        out
    }

    fn accumulate(&self, out: &mut Vector) {
        match self {
            Payload::Zero | Payload::Skipped => {}
            Payload::Dense(values) => {
                for (o, v) in out.iter_mut().zip(values) {
                    *o += *v;
                }
            }
            Payload::Sparse { indices, values } => {
                for (&i, &v) in indices.iter().zip(values) {
                    out[i as usize] += v;
                }
            }
            Payload::Dithered {
                norm,
                levels,
                negative,
                codes,
            } => {
                for (j, (&neg, &code)) in negative.iter().zip(codes).enumerate() {
                    let magnitude = norm * dither_level(code, *levels);
                    out[j] += if neg { -magnitude } else { magnitude };
                }
            }
            Payload::Composite(a, b) => {
                // Decoding order matters for bit-exactness: first part, then
                // second part added on top.
                let first = a.decode(out.len());
                let second = b.decode(out.len());
                for ((o, x), y) in out.iter_mut().zip(first.iter()).zip(second.iter()) {
                    *o += x + y;
                }
            }
        }
    }
}

/// A compressed message: payload, its communication cost, and its value.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedMessage {
    pub payload: Payload,
    pub bits: u64,
    pub dense: Vector,
}

impl CompressedMessage {
    pub(crate) fn new(payload: Payload, bits: u64, dim: usize) -> Self {
        let dense = payload.decode(dim);
        Self {
            payload,
            bits,
            dense,
        }
    }

    /// The all-zero message that costs nothing.
    pub fn zero(dim: usize) -> Self {
        Self {
            payload: Payload::Zero,
            bits: 0,
            dense: Vector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dense.len()
    }
}

/// Bits needed to address one of `dim` coordinates.
pub fn index_bits(dim: usize) -> u64 {
    if dim <= 1 {
        0
    } else {
        (usize::BITS - (dim - 1).leading_zeros()) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_bits_is_ceil_log2() {
        assert_eq!(index_bits(1), 0);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(3), 2);
        assert_eq!(index_bits(4), 2);
        assert_eq!(index_bits(80), 7);
        assert_eq!(index_bits(128), 7);
        assert_eq!(index_bits(129), 8);
    }

    #[test]
    fn sparse_decode() {
        let p = Payload::Sparse {
            indices: vec![2, 0],
            values: vec![1.5, -2.0],
        };
        assert_eq!(p.decode(4).as_slice(), &[-2.0, 0.0, 1.5, 0.0]);
    }

    #[test]
    fn dither_levels() {
        assert_eq!(dither_level(0, 3), 0.0);
        assert_eq!(dither_level(1, 3), 0.25);
        assert_eq!(dither_level(3, 3), 1.0);
    }
}
