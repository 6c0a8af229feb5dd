use rand::Rng;

use super::CompressorSpec;
use crate::error::check_dim;
use crate::{Error, Result, Vector};

/// Allowed deviation of a Monte-Carlo mean, in standard errors.
pub const MEAN_SE_SLACK: f64 = 4.0;
/// Multiplicative slack on Monte-Carlo variance ratios.
pub const VARIANCE_SLACK: f64 = 0.05;

const MIN_SAMPLES: usize = 1_000;

/// Empirical moments of a random vector around a reference point.
#[derive(Clone, Debug)]
pub struct Moments {
    pub samples: usize,
    pub mean: Vector,
    /// Per-coordinate standard error of `mean`.
    pub std_err: Vector,
    /// Empirical `E|X - reference|^2`.
    pub mean_sq_dev: f64,
}

impl Moments {
    /// True when every coordinate of the mean lies within `MEAN_SE_SLACK`
    /// standard errors of `target`. Zero-variance coordinates must match to
    /// rounding.
    pub fn mean_within(&self, target: &Vector) -> bool {
        self.worst_z(target) <= MEAN_SE_SLACK
    }

    /// Largest `|mean - target| / std_err` over coordinates.
    pub fn worst_z(&self, target: &Vector) -> f64 {
        self.mean
            .iter()
            .zip(target.iter())
            .zip(self.std_err.iter())
            .map(|((m, t), se)| {
                let gap = (m - t).abs();
                let rounding = 1e-12 * (1.0 + t.abs());
                if gap <= rounding {
                    0.0
                } else if *se == 0.0 {
                    f64::INFINITY
                } else {
                    (gap - rounding).max(0.0) / se
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Draw `n` samples from `sampler` and collect moments around `reference`.
pub fn estimate_moments<F>(reference: &Vector, n: usize, mut sampler: F) -> Result<Moments>
where
    F: FnMut(usize) -> Result<Vector>,
{
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let d = reference.len();
    let mut mean = Vector::zeros(d);
    let mut m2 = Vector::zeros(d);
    let mut sq_dev = 0.0;
    for i in 0..n {
        let s = sampler(i)?;
        check_dim(d, s.len())?;
        sq_dev += (&s - reference).norm_squared();
        // Welford update per coordinate.
        let count = (i + 1) as f64;
        for j in 0..d {
            let delta = s[j] - mean[j];
            mean[j] += delta / count;
            m2[j] += delta * (s[j] - mean[j]);
        }
    }
    let nf = n as f64;
    let std_err = m2.map(|v| (v / (nf - 1.0) / nf).max(0.0).sqrt());
    Ok(Moments {
        samples: n,
        mean,
        std_err,
        mean_sq_dev: sq_dev / nf,
    })
}

/// Outcome of [`variance_check`].
#[derive(Clone, Debug)]
pub struct VarianceReport {
    pub moments: Moments,
    /// Empirical `E|C(x) - x|^2 / |x|^2`.
    pub variance_ratio: f64,
    /// `omega` for unbiased kinds, `1 - delta` for contractive ones.
    pub declared_bound: f64,
    /// Mean check; only performed for unbiased kinds.
    pub unbiased_ok: Option<bool>,
    pub variance_ok: bool,
}

impl VarianceReport {
    pub fn passed(&self) -> bool {
        self.variance_ok && self.unbiased_ok.unwrap_or(true)
    }
}

/// Monte-Carlo check of a compressor's declared constants at `x`.
pub fn variance_check<R: Rng + ?Sized>(
    spec: &CompressorSpec,
    x: &Vector,
    n_samples: usize,
    rng: &mut R,
) -> Result<VarianceReport> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "variance check needs at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    check_dim(spec.dim(), x.len())?;
    let moments = estimate_moments(x, n_samples, |_| Ok(spec.compress(x, rng)?.dense))?;
    let norm_sq = x.norm_squared();
    let variance_ratio = if norm_sq > 0.0 {
        moments.mean_sq_dev / norm_sq
    } else if moments.mean_sq_dev == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let (declared_bound, unbiased_ok) = match spec.omega() {
        Some(omega) => (omega, Some(moments.mean_within(x))),
        None => (1.0 - spec.delta_or_zero(), None),
    };
    let variance_ok = variance_ratio <= declared_bound * (1.0 + VARIANCE_SLACK) + 1e-12;
    Ok(VarianceReport {
        moments,
        variance_ratio,
        declared_bound,
        unbiased_ok,
        variance_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seed_stream, Purpose};

    #[test]
    fn too_few_samples() {
        let c = CompressorSpec::identity(2).unwrap();
        let mut rng = seed_stream(0, 0, 0, Purpose::Sampling);
        assert!(variance_check(&c, &Vector::zeros(2), 10, &mut rng).is_err());
    }

    #[test]
    fn identity_has_zero_variance() {
        let c = CompressorSpec::identity(3).unwrap();
        let mut rng = seed_stream(0, 0, 0, Purpose::Sampling);
        let x = Vector::from_row_slice(&[1.0, -2.0, 0.3]);
        let r = variance_check(&c, &x, 1000, &mut rng).unwrap();
        assert_eq!(r.variance_ratio, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn rand_k_ratio_matches_enumeration() {
        // K = 1, d = 4, x = 1: each outcome puts 4 on one coordinate, so
        // |Q(x) - x|^2 = 9 + 3 = 12 and the ratio is 12 / 4 = 3 exactly.
        let c = CompressorSpec::rand_k(4, 1).unwrap();
        let x = Vector::from_element(4, 1.0);
        let mut rng = seed_stream(1, 0, 0, Purpose::Sampling);
        let r = variance_check(&c, &x, 100_000, &mut rng).unwrap();
        assert!(
            (r.variance_ratio - 3.0).abs() < 1e-12,
            "{}",
            r.variance_ratio
        );
        assert!(r.passed());
    }

    #[test]
    fn bernoulli_ratio_is_one_minus_p() {
        // Two outcomes: x (prob p, error 0) or 0 (prob 1 - p, error |x|^2).
        let c = CompressorSpec::bernoulli(3, 0.25).unwrap();
        let x = Vector::from_row_slice(&[1.0, 2.0, -1.0]);
        let mut rng = seed_stream(2, 0, 0, Purpose::Sampling);
        let r = variance_check(&c, &x, 100_000, &mut rng).unwrap();
        // Binomial standard error of the fraction is sqrt(p(1-p)/N) ~ 1.4e-3.
        assert!(
            (r.variance_ratio - 0.75).abs() < 4.0 * 1.4e-3,
            "{}",
            r.variance_ratio
        );
        assert!(r.unbiased_ok.is_none());
        assert!(r.passed());
    }

    #[test]
    fn worst_z_flags_deterministic_offsets() {
        let m = Moments {
            samples: 10,
            mean: Vector::from_row_slice(&[1.0, 2.0]),
            std_err: Vector::zeros(2),
            mean_sq_dev: 0.0,
        };
        assert!(m.mean_within(&Vector::from_row_slice(&[1.0, 2.0])));
        assert!(!m.mean_within(&Vector::from_row_slice(&[1.0, 2.1])));
    }
}
