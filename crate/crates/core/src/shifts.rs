//! Shift strategies for compressed gradient descent with shifts.
//!
//! In every round worker `i` holds a base shift `s_i` and optionally a biased
//! inner compressor `C_i`. It forms `c_i = C_i(grad f_i(x) - s_i)`, so that its
//! effective shift is `h_i = s_i + c_i`, and then compresses the rest with its
//! unbiased compressor. The strategies differ in how `s_i` evolves:
//!
//! | kind        | base shift `s_i`          | update after the round                    |
//! |-------------|---------------------------|-------------------------------------------|
//! | `Fixed`     | constant `h_i`            | none                                      |
//! | `Star`      | `grad f_i(x*)`            | none (the record holds `s_i + c_i`)       |
//! | `Diana`     | learned `h_i`             | `h_i += alpha (c_i + m_i)`                |
//! | `RandDiana` | `grad f_i(w_i)`           | `w_i = x`, `h_i = grad f_i(x)` w.p. `p_i` |

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compressors::{CompressedMessage, CompressorSpec, FLOAT_BITS};
use crate::error::check_dim;
use crate::problems::{Problem, ReferenceSolution};
use crate::rng::{Purpose, RoundKey};
use crate::{Error, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Fixed,
    Star,
    Diana,
    RandDiana,
}

/// A shift strategy with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftStrategy {
    kind: ShiftKind,
    /// Inner compressors `C_i`; the zero map when unused.
    inner: Vec<CompressorSpec>,
    alpha: f64,
    probs: Vec<f64>,
    /// `grad f_i(x*)`, for `Star`.
    optimal: Vec<Vector>,
}

/// Per-worker shifts and the master's aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftState {
    /// `h_i`.
    pub local: Vec<Vector>,
    /// `h`, kept equal to the mean of `local`.
    pub master: Vector,
    /// Reference points `w_i` (randomized shifts only; empty otherwise).
    pub anchors: Vec<Vector>,
}

impl ShiftState {
    pub fn workers(&self) -> usize {
        self.local.len()
    }

    /// `|h - mean_i h_i|`.
    pub fn consistency_gap(&self) -> f64 {
        (&self.master - mean(&self.local)).norm()
    }
}

/// Shift used by one worker in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundShift {
    /// Base shift `s_i`.
    pub base: Vector,
    /// Inner message `c_i = C_i(grad f_i(x) - s_i)`.
    pub inner: CompressedMessage,
}

impl RoundShift {
    /// Effective shift `s_i + c_i`.
    pub fn effective(&self) -> Vector {
        &self.base + &self.inner.dense
    }
}

fn zero_inner(n: usize, d: usize) -> Result<Vec<CompressorSpec>> {
    (0..n).map(|_| CompressorSpec::zero(d)).collect()
}

impl ShiftStrategy {
    /// Shifts that never change; their values come from the initial state.
    pub fn fixed(workers: usize, dim: usize) -> Result<Self> {
        Ok(Self {
            kind: ShiftKind::Fixed,
            inner: zero_inner(workers, dim)?,
            alpha: 0.0,
            probs: Vec::new(),
            optimal: Vec::new(),
        })
    }

    /// Shifts anchored at the optimal local gradients, corrected by `C_i`.
    pub fn star(inner: Vec<CompressorSpec>, reference: &ReferenceSolution) -> Result<Self> {
        check_contractive(&inner)?;
        check_dim(inner.len(), reference.local_grads.len())?;
        for (c, g) in inner.iter().zip(&reference.local_grads) {
            check_dim(c.dim(), g.len())?;
        }
        Ok(Self {
            kind: ShiftKind::Star,
            inner,
            alpha: 0.0,
            probs: Vec::new(),
            optimal: reference.local_grads.clone(),
        })
    }

    /// Learned shifts `h_i += alpha (c_i + m_i)`.
    pub fn diana(inner: Vec<CompressorSpec>, alpha: f64) -> Result<Self> {
        check_contractive(&inner)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            kind: ShiftKind::Diana,
            inner,
            alpha,
            probs: Vec::new(),
            optimal: Vec::new(),
        })
    }

    /// Largest `alpha` allowed with these compressors:
    /// `min_i 1 / (1 + omega_i (1 - delta_i))`.
    pub fn max_alpha(main: &[CompressorSpec], inner: &[CompressorSpec]) -> Result<f64> {
        check_dim(main.len(), inner.len())?;
        let mut alpha = 1.0f64;
        for (q, c) in main.iter().zip(inner) {
            let omega = unbiased_omega(q)?;
            alpha = alpha.min(1.0 / (1.0 + omega * (1.0 - c.delta_or_zero())));
        }
        Ok(alpha)
    }

    /// Shifts `grad f_i(w_i)` whose anchors refresh with probability `p_i`.
    pub fn rand_diana(probs: Vec<f64>, dim: usize) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "probability {p} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            kind: ShiftKind::RandDiana,
            inner: zero_inner(probs.len(), dim)?,
            alpha: 0.0,
            probs,
            optimal: Vec::new(),
        })
    }

    /// Default refresh probabilities `p_i = 1 / (omega_i + 1)`.
    pub fn default_probs(main: &[CompressorSpec]) -> Result<Vec<f64>> {
        main.iter()
            .map(|q| Ok(1.0 / (unbiased_omega(q)? + 1.0)))
            .collect()
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn workers(&self) -> usize {
        self.inner.len()
    }

    pub fn inner(&self) -> &[CompressorSpec] {
        &self.inner
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Check that the strategy fits the main compressors.
    pub fn validate(&self, main: &[CompressorSpec]) -> Result<()> {
        check_dim(self.workers(), main.len())?;
        for (q, c) in main.iter().zip(&self.inner) {
            unbiased_omega(q)?;
            check_dim(q.dim(), c.dim())?;
        }
        if self.kind == ShiftKind::Diana {
            let bound = Self::max_alpha(main, &self.inner)?;
            if self.alpha > bound * (1.0 + 1e-12) {
                return Err(Error::TheoremPrecondition {
                    theorem: 3,
                    reason: format!("alpha = {} exceeds {bound}", self.alpha),
                });
            }
        }
        Ok(())
    }

    /// Starting state and the bits it costs to set it up.
    ///
    /// `initial` overrides the default shifts (zero, or the optimal shifts for
    /// `Star`). Randomized shifts anchor at `x0`, and every worker sends its
    /// dense gradient there once.
    pub fn initial_state(
        &self,
        problem: &Problem,
        x0: &Vector,
        initial: Option<Vec<Vector>>,
    ) -> Result<(ShiftState, u64)> {
        let n = self.workers();
        check_dim(n, problem.workers())?;
        let d = problem.dim();
        check_dim(d, x0.len())?;
        let (local, anchors, bits) = match self.kind {
            ShiftKind::RandDiana => {
                if initial.is_some() {
                    return Err(Error::InvalidArgument(
                        "randomized shifts are defined by their anchors; set the start point instead"
                            .into(),
                    ));
                }
                let grads = problem.local_gradients(x0)?;
                (grads, vec![x0.clone(); n], n as u64 * FLOAT_BITS * d as u64)
            }
            ShiftKind::Star => (
                initial.unwrap_or_else(|| self.optimal.clone()),
                Vec::new(),
                0,
            ),
            ShiftKind::Fixed | ShiftKind::Diana => (
                initial.unwrap_or_else(|| vec![Vector::zeros(d); n]),
                Vec::new(),
                0,
            ),
        };
        check_dim(n, local.len())?;
        for h in &local {
            check_dim(d, h.len())?;
        }
        let master = mean(&local);
        Ok((
            ShiftState {
                local,
                master,
                anchors,
            },
            bits,
        ))
    }

    /// Base shifts and inner messages for a round at gradients `grads`.
    pub fn round_shifts(
        &self,
        state: &ShiftState,
        grads: &[Vector],
        key: RoundKey,
    ) -> Result<Vec<RoundShift>> {
        check_dim(self.workers(), grads.len())?;
        check_dim(self.workers(), state.workers())?;
        grads
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let base = match self.kind {
                    ShiftKind::Star => self.optimal[i].clone(),
                    _ => state.local[i].clone(),
                };
                let c = &self.inner[i];
                let inner = if c.is_zero() {
                    CompressedMessage::zero(c.dim())
                } else {
                    c.compress(&(g - &base), &mut key.stream(i, Purpose::Inner))?
                };
                Ok(RoundShift { base, inner })
            })
            .collect()
    }

    /// Master-side aggregate shift used in a round: `h + mean_i c_i`.
    pub fn round_master(&self, state: &ShiftState, shifts: &[RoundShift]) -> Vector {
        let base = match self.kind {
            ShiftKind::Star => mean(&self.optimal),
            _ => state.master.clone(),
        };
        let mut c = Vector::zeros(base.len());
        for s in shifts {
            c += &s.inner.dense;
        }
        base + c / shifts.len() as f64
    }

    /// Advance the shifts after a round at iterate `x`. Returns the extra
    /// bits that had to be communicated.
    pub fn update(
        &self,
        state: &mut ShiftState,
        x: &Vector,
        grads: &[Vector],
        shifts: &[RoundShift],
        main: &[CompressedMessage],
        key: RoundKey,
    ) -> Result<u64> {
        let n = self.workers();
        check_dim(n, state.workers())?;
        check_dim(n, grads.len())?;
        check_dim(n, shifts.len())?;
        check_dim(n, main.len())?;
        match self.kind {
            ShiftKind::Fixed => Ok(0),
            ShiftKind::Star => {
                // The master replays each worker's inner draw, so the new
                // shifts cost nothing to share.
                for (h, s) in state.local.iter_mut().zip(shifts) {
                    *h = s.effective();
                }
                state.master = self.round_master(state, shifts);
                Ok(0)
            }
            ShiftKind::Diana => {
                let mut step = Vector::zeros(x.len());
                let mut bits = 0;
                for ((h, s), m) in state.local.iter_mut().zip(shifts).zip(main) {
                    let delta = &s.inner.dense + &m.dense;
                    h.axpy(self.alpha, &delta, 1.0);
                    step += delta;
                    bits += s.inner.bits;
                }
                state.master.axpy(self.alpha / n as f64, &step, 1.0);
                Ok(bits)
            }
            ShiftKind::RandDiana => {
                let mut bits = 0;
                let mut refreshed = false;
                for i in 0..n {
                    let coin: f64 = key.stream(i, Purpose::Refresh).random();
                    if coin < self.probs[i] {
                        state.anchors[i] = x.clone();
                        state.local[i] = grads[i].clone();
                        bits += FLOAT_BITS * x.len() as u64;
                        refreshed = true;
                    }
                }
                if refreshed {
                    state.master = mean(&state.local);
                }
                Ok(bits)
            }
        }
    }
}

fn check_contractive(inner: &[CompressorSpec]) -> Result<()> {
    match inner.iter().find(|c| c.delta().is_none() && !c.is_zero()) {
        Some(c) => Err(Error::InvalidCompressor(format!(
            "{:?} cannot serve as an inner shift compressor",
            c.kind()
        ))),
        None => Ok(()),
    }
}

pub(crate) fn unbiased_omega(q: &CompressorSpec) -> Result<f64> {
    q.omega()
        .ok_or_else(|| Error::InvalidCompressor(format!("{:?} is not unbiased", q.kind())))
}

/// Mean of equally sized vectors, summed in index order.
pub fn mean(vs: &[Vector]) -> Vector {
    let mut acc = Vector::zeros(vs.first().map_or(0, |v| v.len()));
    for v in vs {
        acc += v;
    }
    acc / vs.len().max(1) as f64
}

/// `(1/n) sum_i w_i |h_i - grad f_i(x*)|^2`, with `w_i = 1` when `weights` is
/// `None`.
pub fn shift_residual(
    state: &ShiftState,
    reference: &ReferenceSolution,
    weights: Option<&[f64]>,
) -> Result<f64> {
    let n = state.workers();
    check_dim(n, reference.local_grads.len())?;
    if let Some(w) = weights {
        check_dim(n, w.len())?;
    }
    let mut total = 0.0;
    for (i, (h, g)) in state.local.iter().zip(&reference.local_grads).enumerate() {
        check_dim(g.len(), h.len())?;
        let w = weights.map_or(1.0, |w| w[i]);
        total += w * (h - g).norm_squared();
    }
    Ok(total / n as f64)
}
