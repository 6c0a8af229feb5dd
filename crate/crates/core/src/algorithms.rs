//! Optimization loops, theoretical step sizes and Lyapunov functions.
//!
//! Three methods are provided:
//!
//! - compressed gradient descent with shifts ([`dcgd_shift_step`]), driven by a
//!   [`ShiftStrategy`];
//! - gradient descent with compressed iterates ([`gdci_step`]), which mixes
//!   `x` with the average of `Q_i(x - gamma grad f_i(x))`;
//! - its variance-reduced variant ([`vr_gdci_step`]), which learns shifts in
//!   iterate space.

use serde::{Deserialize, Serialize};

use crate::compressors::{iterate_compressor_with_bits, CompressedMessage, CompressorSpec};
use crate::error::check_dim;
use crate::problems::{Problem, ReferenceSolution, SmoothnessInfo};
use crate::rng::{Purpose, RoundKey};
use crate::shifts::{mean, shift_residual, unbiased_omega, RoundShift, ShiftState, ShiftStrategy};
use crate::{Error, Result, Vector};

/// The convergence results that prescribe step sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Theorem {
    /// Fixed shifts: linear rate to a neighborhood.
    FixedShift = 1,
    /// Optimal shifts: exact linear rate `1 - gamma mu`.
    Star = 2,
    /// Learned shifts with step `alpha`.
    Diana = 3,
    /// Randomly refreshed shifts.
    RandDiana = 4,
    /// Compressed iterates: linear rate to a neighborhood.
    Gdci = 5,
    /// Compressed iterates with learned shifts.
    VrGdci = 6,
}

impl Theorem {
    pub fn id(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Theorem {
    type Error = String;

    fn try_from(id: u8) -> std::result::Result<Self, String> {
        Ok(match id {
            1 => Theorem::FixedShift,
            2 => Theorem::Star,
            3 => Theorem::Diana,
            4 => Theorem::RandDiana,
            5 => Theorem::Gdci,
            6 => Theorem::VrGdci,
            _ => return Err(format!("unknown theorem id {id}; expected 1 to 6")),
        })
    }
}

impl From<Theorem> for u8 {
    fn from(t: Theorem) -> u8 {
        t.id()
    }
}

/// Step sizes of a method. Unused entries are `eta = 1`, `alpha = 0`, `m = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSizes {
    /// Gradient step.
    pub gamma: f64,
    /// Model mixing step of the compressed-iterate methods.
    pub eta: f64,
    /// Shift learning step.
    pub alpha: f64,
    /// Weight of the shift term in the Lyapunov function.
    pub m: f64,
}

impl StepSizes {
    pub fn gradient_only(gamma: f64) -> Self {
        Self {
            gamma,
            eta: 1.0,
            alpha: 0.0,
            m: 0.0,
        }
    }
}

/// Compressor constants and optional overrides fed to [`auto_stepsizes`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TheoremInputs {
    /// `omega_i` of the main compressors.
    pub omegas: Vec<f64>,
    /// `delta_i` of the inner compressors (`0` for the zero map).
    pub deltas: Vec<f64>,
    /// Refresh probabilities `p_i` (randomized shifts).
    pub probs: Vec<f64>,
    /// Explicit shift step; defaults to the largest admissible one.
    pub alpha: Option<f64>,
    /// Explicit Lyapunov weight; defaults to twice the admissible minimum.
    pub m: Option<f64>,
}

impl TheoremInputs {
    /// Constants read off the main compressors and, if given, the strategy.
    pub fn from_parts(main: &[CompressorSpec], strategy: Option<&ShiftStrategy>) -> Result<Self> {
        let omegas = main
            .iter()
            .map(unbiased_omega)
            .collect::<Result<Vec<_>>>()?;
        let (deltas, probs, alpha) = match strategy {
            Some(s) => {
                check_dim(main.len(), s.workers())?;
                let alpha = (s.alpha() > 0.0).then_some(s.alpha());
                (
                    s.inner().iter().map(|c| c.delta_or_zero()).collect(),
                    s.probs().to_vec(),
                    alpha,
                )
            }
            None => (vec![0.0; main.len()], Vec::new(), None),
        };
        Ok(Self {
            omegas,
            deltas,
            probs,
            alpha,
            m: None,
        })
    }

    fn n(&self) -> f64 {
        self.omegas.len() as f64
    }

    fn omega_max(&self) -> f64 {
        self.omegas.iter().copied().fold(0.0, f64::max)
    }
}

fn precondition(theorem: Theorem, reason: impl Into<String>) -> Error {
    Error::TheoremPrecondition {
        theorem: theorem.id(),
        reason: reason.into(),
    }
}

/// Largest step sizes allowed by `theorem`.
///
/// Explicit `alpha` above its bound is an error. An explicit `m` below the
/// theorem's minimum is accepted with a warning, because stability studies
/// deliberately go there.
pub fn auto_stepsizes(
    theorem: Theorem,
    smooth: &SmoothnessInfo,
    inputs: &TheoremInputs,
) -> Result<StepSizes> {
    let n = inputs.n();
    if inputs.omegas.is_empty() {
        return Err(precondition(theorem, "no compressors given"));
    }
    check_dim(inputs.omegas.len(), smooth.l_i.len())?;
    if !(smooth.l > 0.0) || !(smooth.l_max > 0.0) {
        return Err(precondition(
            theorem,
            "smoothness constants must be positive",
        ));
    }
    let l_omega_max = smooth
        .l_i
        .iter()
        .zip(&inputs.omegas)
        .map(|(l, w)| l * w)
        .fold(0.0, f64::max);
    let need_mu = || {
        if smooth.mu > 0.0 {
            Ok(smooth.mu)
        } else {
            Err(precondition(theorem, "strong convexity constant is zero"))
        }
    };
    match theorem {
        Theorem::FixedShift => Ok(StepSizes::gradient_only(
            1.0 / (smooth.l + 2.0 * l_omega_max / n),
        )),
        Theorem::Star => {
            check_dim(inputs.omegas.len(), inputs.deltas.len())?;
            let worst = smooth
                .l_i
                .iter()
                .zip(&inputs.omegas)
                .zip(&inputs.deltas)
                .map(|((l, w), d)| l * w * (1.0 - d))
                .fold(0.0, f64::max);
            Ok(StepSizes::gradient_only(1.0 / (smooth.l + worst / n)))
        }
        Theorem::Diana => {
            check_dim(inputs.omegas.len(), inputs.deltas.len())?;
            let bound = inputs
                .omegas
                .iter()
                .zip(&inputs.deltas)
                .map(|(w, d)| 1.0 / (1.0 + w * (1.0 - d)))
                .fold(1.0, f64::min);
            let alpha = inputs.alpha.unwrap_or(bound);
            if !(alpha > 0.0) || alpha > bound * (1.0 + 1e-12) {
                return Err(precondition(
                    theorem,
                    format!("alpha = {alpha} outside (0, {bound}]"),
                ));
            }
            let floor = 2.0 / (n * alpha);
            let m = inputs.m.unwrap_or(2.0 * floor);
            if m <= floor {
                log::warn!("M = {m} does not exceed 2/(n alpha) = {floor}; no rate is guaranteed");
            }
            let gamma = 1.0 / (2.0 / n * l_omega_max + (1.0 + alpha * m) * smooth.l_max);
            Ok(StepSizes {
                gamma,
                eta: 1.0,
                alpha,
                m,
            })
        }
        Theorem::RandDiana => {
            check_dim(inputs.omegas.len(), inputs.probs.len())?;
            let p_min = inputs.probs.iter().copied().fold(1.0, f64::min);
            if !(p_min > 0.0) {
                return Err(precondition(
                    theorem,
                    "refresh probabilities must be positive",
                ));
            }
            let omega = inputs.omega_max();
            let floor = 2.0 * omega / (n * p_min);
            let m = inputs.m.unwrap_or(2.0 * floor);
            if m <= floor && omega > 0.0 {
                log::warn!(
                    "M = {m} does not exceed 2 omega/(n p) = {floor}; no rate is guaranteed"
                );
            }
            let pl_max = smooth
                .l_i
                .iter()
                .zip(&inputs.probs)
                .map(|(l, p)| l * p)
                .fold(0.0, f64::max);
            let gamma = 1.0 / ((1.0 + 2.0 * omega / n) * smooth.l_max + m * pl_max);
            Ok(StepSizes {
                gamma,
                eta: 1.0,
                alpha: 0.0,
                m,
            })
        }
        Theorem::Gdci => {
            let mu = need_mu()?;
            let omega = inputs.omega_max();
            let c = 2.0 * omega / n;
            let eta = 1.0 / (smooth.l / mu + c * (smooth.l_max / mu - 1.0));
            let gamma = (1.0 + c * eta) / (eta * (smooth.l + c * smooth.l_max));
            Ok(StepSizes {
                gamma,
                eta,
                alpha: 0.0,
                m: 0.0,
            })
        }
        Theorem::VrGdci => {
            let mu = need_mu()?;
            let omega = inputs.omega_max();
            let bound = 1.0 / (omega + 1.0);
            let alpha = inputs.alpha.unwrap_or(bound);
            if !(alpha > 0.0) || alpha > bound * (1.0 + 1e-12) {
                return Err(precondition(
                    theorem,
                    format!("alpha = {alpha} outside (0, {bound}]"),
                ));
            }
            let c = 6.0 * omega / n;
            let eta = 1.0 / (smooth.l / mu + c * (smooth.l_max / mu - 1.0));
            let gamma = (1.0 + c * eta) / (eta * (smooth.l + c * smooth.l_max));
            Ok(StepSizes {
                gamma,
                eta,
                alpha,
                m: 0.0,
            })
        }
    }
}

/// Per-iteration contraction factor of the Lyapunov function of `theorem`
/// (3, 4 or 6). Heterogeneous compressors enter through `max_i omega_i`.
pub fn contraction_rate(
    theorem: Theorem,
    smooth: &SmoothnessInfo,
    steps: &StepSizes,
    inputs: &TheoremInputs,
) -> Result<f64> {
    let n = inputs.n();
    let omega = inputs.omega_max();
    let linear = 1.0 - steps.gamma * smooth.mu;
    match theorem {
        Theorem::Diana => Ok(linear.max(1.0 - steps.alpha + 2.0 * omega / (n * steps.m))),
        Theorem::RandDiana => {
            let p_min = inputs.probs.iter().copied().fold(1.0, f64::min);
            Ok(linear.max(1.0 - p_min + 2.0 * omega / (n * steps.m)))
        }
        Theorem::VrGdci => Ok(1.0 - (steps.alpha / 2.0).min(steps.eta)),
        other => Err(Error::Mismatch(format!(
            "theorem {} has no Lyapunov function",
            other.id()
        ))),
    }
}

/// Displayed iteration complexity of `theorem` without the `ln(1/eps)`
/// factor, with `kappa = L_max / mu` and `omega = max_i omega_i`.
pub fn iteration_bound(theorem: Theorem, smooth: &SmoothnessInfo, omega: f64, n: usize) -> f64 {
    let kappa = smooth.kappa_max();
    let n = n as f64;
    match theorem {
        Theorem::Diana | Theorem::RandDiana => (kappa * (1.0 + omega / n)).max(omega + 1.0),
        Theorem::VrGdci => (2.0 * (omega + 1.0)).max((1.0 + 6.0 * omega / n) * kappa),
        Theorem::FixedShift | Theorem::Star | Theorem::Gdci => kappa * (1.0 + omega / n),
    }
}

/// Radius of the residual neighborhood for the non-exact methods:
///
/// - 1: `(2 gamma / mu) (1/n) sum (omega_i / n) |grad f_i(x*) - h_i|^2`
///   with the fixed shifts `h_i` taken from `shifts`
/// - 5: `eta (2 omega / n) (1/n) sum |x* - gamma grad f_i(x*)|^2`
pub fn neighborhood_floor(
    theorem: Theorem,
    smooth: &SmoothnessInfo,
    steps: &StepSizes,
    omegas: &[f64],
    reference: &ReferenceSolution,
    shifts: Option<&[Vector]>,
) -> Result<f64> {
    let n = reference.local_grads.len();
    check_dim(n, omegas.len())?;
    let nf = n as f64;
    match theorem {
        Theorem::FixedShift => {
            let mut acc = 0.0;
            for (i, g) in reference.local_grads.iter().enumerate() {
                let gap = match shifts {
                    Some(h) => {
                        check_dim(n, h.len())?;
                        (g - &h[i]).norm_squared()
                    }
                    None => g.norm_squared(),
                };
                acc += omegas[i] / nf * gap;
            }
            Ok(2.0 * steps.gamma / smooth.mu * acc / nf)
        }
        Theorem::Gdci => {
            let omega = omegas.iter().copied().fold(0.0, f64::max);
            let spread: f64 = reference
                .local_grads
                .iter()
                .map(|g| (&reference.x_star - g * steps.gamma).norm_squared())
                .sum();
            Ok(steps.eta * 2.0 * omega / nf * spread / nf)
        }
        other => Err(Error::Mismatch(format!(
            "theorem {} converges exactly and has no neighborhood",
            other.id()
        ))),
    }
}

/// Lyapunov function of `theorem` (3, 4 or 6) at iterate `x` with shifts
/// `shifts`:
///
/// - 3: `|x - x*|^2 + M gamma^2 (1/n) sum omega_i |h_i - grad f_i(x*)|^2`
/// - 4: the same without the `omega_i` weights
/// - 6: `|x - x*|^2 + (4 eta^2 omega / (alpha n)) (1/n) sum |h_i - T_i(x*)|^2`
///   with `T_i(x) = x - gamma grad f_i(x)`.
pub fn lyapunov(
    theorem: Theorem,
    x: &Vector,
    shifts: &ShiftState,
    reference: &ReferenceSolution,
    steps: &StepSizes,
    omegas: &[f64],
) -> Result<f64> {
    check_dim(reference.x_star.len(), x.len())?;
    let dist = (x - &reference.x_star).norm_squared();
    let n = shifts.workers();
    match theorem {
        Theorem::Diana => {
            check_dim(n, omegas.len())?;
            let sigma = shift_residual(shifts, reference, Some(omegas))?;
            Ok(dist + steps.m * steps.gamma * steps.gamma * sigma)
        }
        Theorem::RandDiana => {
            let sigma = shift_residual(shifts, reference, None)?;
            Ok(dist + steps.m * steps.gamma * steps.gamma * sigma)
        }
        Theorem::VrGdci => {
            check_dim(n, omegas.len())?;
            check_dim(n, reference.local_grads.len())?;
            let omega = omegas.iter().copied().fold(0.0, f64::max);
            let mut sigma = 0.0;
            for (h, g) in shifts.local.iter().zip(&reference.local_grads) {
                let target = &reference.x_star - g * steps.gamma;
                sigma += (h - target).norm_squared();
            }
            sigma /= n as f64;
            if omega == 0.0 {
                return Ok(dist);
            }
            Ok(dist + 4.0 * steps.eta * steps.eta * omega / (steps.alpha * n as f64) * sigma)
        }
        other => Err(Error::Mismatch(format!(
            "theorem {} has no Lyapunov function",
            other.id()
        ))),
    }
}

/// State of a run between rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateState {
    pub x: Vector,
    pub k: u64,
    /// Bits communicated so far.
    pub bits: u64,
    /// Gradient-space shifts, or iterate-space shifts for the variance-reduced
    /// compressed-iterate method. Empty for plain compressed iterates.
    pub shifts: ShiftState,
}

impl IterateState {
    pub fn new(x: Vector, shifts: ShiftState, bits: u64) -> Self {
        Self {
            x,
            k: 0,
            bits,
            shifts,
        }
    }

    /// State without shifts.
    pub fn plain(x: Vector) -> Self {
        let d = x.len();
        Self::new(
            x,
            ShiftState {
                local: Vec::new(),
                master: Vector::zeros(d),
                anchors: Vec::new(),
            },
            0,
        )
    }

    /// Iterate-space shifts `h_i` for the variance-reduced method, with the
    /// master aggregate set to their mean.
    pub fn with_iterate_shifts(x: Vector, local: Vec<Vector>) -> Result<Self> {
        for h in &local {
            check_dim(x.len(), h.len())?;
        }
        let master = mean(&local);
        Ok(Self::new(
            x,
            ShiftState {
                local,
                master,
                anchors: Vec::new(),
            },
            0,
        ))
    }
}

/// Everything produced in one round of compressed gradient descent with
/// shifts, before the iterate moves.
#[derive(Clone, Debug, PartialEq)]
pub struct DcgdRound {
    pub grads: Vec<Vector>,
    pub shifts: Vec<RoundShift>,
    /// Main messages `m_i = Q_i(grad f_i(x) - s_i - c_i)`.
    pub messages: Vec<CompressedMessage>,
    /// Master's estimate `g = h + mean c_i + mean m_i` of `grad f(x)`.
    pub estimator: Vector,
}

fn check_workers(problem: &Problem, main: &[CompressorSpec]) -> Result<()> {
    check_dim(problem.workers(), main.len())?;
    for q in main {
        check_dim(problem.dim(), q.dim())?;
    }
    Ok(())
}

/// Compute the messages and the gradient estimator at `state.x`.
pub fn dcgd_round(
    state: &IterateState,
    problem: &Problem,
    main: &[CompressorSpec],
    strategy: &ShiftStrategy,
    key: RoundKey,
) -> Result<DcgdRound> {
    check_workers(problem, main)?;
    let grads = problem.local_gradients(&state.x)?;
    let shifts = strategy.round_shifts(&state.shifts, &grads, key)?;
    let messages = main
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let residual = &grads[i] - shifts[i].effective();
            q.compress(&residual, &mut key.stream(i, Purpose::Compress))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = Vector::zeros(problem.dim());
    for msg in &messages {
        m += &msg.dense;
    }
    let estimator = strategy.round_master(&state.shifts, &shifts) + m / main.len() as f64;
    Ok(DcgdRound {
        grads,
        shifts,
        messages,
        estimator,
    })
}

/// One round of compressed gradient descent with shifts:
/// `x <- x - gamma g`, then the shifts advance.
pub fn dcgd_shift_step(
    state: &mut IterateState,
    problem: &Problem,
    main: &[CompressorSpec],
    strategy: &ShiftStrategy,
    gamma: f64,
    key: RoundKey,
) -> Result<()> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    let round = dcgd_round(state, problem, main, strategy, key)?;
    let x_old = state.x.clone();
    state.x.axpy(-gamma, &round.estimator, 1.0);
    let extra = strategy.update(
        &mut state.shifts,
        &x_old,
        &round.grads,
        &round.shifts,
        &round.messages,
        key,
    )?;
    state.bits += round.messages.iter().map(|m| m.bits).sum::<u64>() + extra;
    state.k += 1;
    Ok(())
}

fn check_mixing(eta: f64, gamma: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eta = {eta} must lie in (0, 1]"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    Ok(())
}

/// Compressed local models `Q_i(x - gamma grad f_i(x) - h_i)`, with `h_i = 0`
/// when `shifts` is empty.
fn iterate_messages(
    x: &Vector,
    problem: &Problem,
    main: &[CompressorSpec],
    shifts: &[Vector],
    gamma: f64,
    key: RoundKey,
) -> Result<Vec<CompressedMessage>> {
    let grads = problem.local_gradients(x)?;
    main.iter()
        .enumerate()
        .map(|(i, q)| {
            let mut target = x - &grads[i] * gamma;
            if let Some(h) = shifts.get(i) {
                target -= h;
            }
            q.compress(&target, &mut key.stream(i, Purpose::Compress))
        })
        .collect()
}

/// One round of gradient descent with compressed iterates:
/// `x <- (1 - eta) x + eta mean_i Q_i(x - gamma grad f_i(x))`.
pub fn gdci_step(
    state: &mut IterateState,
    problem: &Problem,
    main: &[CompressorSpec],
    eta: f64,
    gamma: f64,
    key: RoundKey,
) -> Result<()> {
    check_mixing(eta, gamma)?;
    check_workers(problem, main)?;
    let messages = iterate_messages(&state.x, problem, main, &[], gamma, key)?;
    let mut avg = Vector::zeros(problem.dim());
    for m in &messages {
        avg += &m.dense;
    }
    avg /= main.len() as f64;
    state.x = &state.x * (1.0 - eta) + avg * eta;
    state.bits += messages.iter().map(|m| m.bits).sum::<u64>();
    state.k += 1;
    Ok(())
}

/// The same method written as a gradient step with a shifted compressor:
/// `x <- x - (eta gamma) mean_i (1/gamma)[x - Q_i(x - gamma grad f_i(x))]`.
///
/// Consumes exactly the same random streams as [`gdci_step`].
pub fn gdci_step_shifted_form(
    state: &mut IterateState,
    problem: &Problem,
    main: &[CompressorSpec],
    eta: f64,
    gamma: f64,
    key: RoundKey,
) -> Result<()> {
    check_mixing(eta, gamma)?;
    check_workers(problem, main)?;
    let grads = problem.local_gradients(&state.x)?;
    let mut estimate = Vector::zeros(problem.dim());
    let mut bits = 0;
    for (i, q) in main.iter().enumerate() {
        let mut rng = key.stream(i, Purpose::Compress);
        let (g, b) = iterate_compressor_with_bits(q, &state.x, gamma, &grads[i], &mut rng)?;
        estimate += g;
        bits += b;
    }
    estimate /= main.len() as f64;
    state.x.axpy(-(eta * gamma), &estimate, 1.0);
    state.bits += bits;
    state.k += 1;
    Ok(())
}

/// One round of the variance-reduced compressed-iterate method:
///
/// ```text
/// delta_i = Q_i(x - gamma grad f_i(x) - h_i);   h_i += alpha delta_i
/// delta = mean_i delta_i;   Delta = delta + h;   h += alpha delta
/// x <- (1 - eta) x + eta Delta
/// ```
pub fn vr_gdci_step(
    state: &mut IterateState,
    problem: &Problem,
    main: &[CompressorSpec],
    steps: &StepSizes,
    key: RoundKey,
) -> Result<()> {
    check_mixing(steps.eta, steps.gamma)?;
    check_workers(problem, main)?;
    check_dim(main.len(), state.shifts.workers())?;
    let alpha = steps.alpha;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} must lie in (0, 1]"
        )));
    }
    let mut omega: f64 = 0.0;
    for q in main {
        omega = omega.max(unbiased_omega(q)?);
    }
    if alpha > (1.0 + 1e-12) / (omega + 1.0) {
        return Err(precondition(
            Theorem::VrGdci,
            format!(
                "alpha = {alpha} exceeds 1/(omega + 1) = {}",
                1.0 / (omega + 1.0)
            ),
        ));
    }
    let messages = iterate_messages(
        &state.x,
        problem,
        main,
        &state.shifts.local,
        steps.gamma,
        key,
    )?;
    let mut delta = Vector::zeros(problem.dim());
    for (h, m) in state.shifts.local.iter_mut().zip(&messages) {
        h.axpy(alpha, &m.dense, 1.0);
        delta += &m.dense;
    }
    delta /= main.len() as f64;
    let big_delta = &delta + &state.shifts.master;
    state.shifts.master.axpy(alpha, &delta, 1.0);
    state.x = &state.x * (1.0 - steps.eta) + big_delta * steps.eta;
    state.bits += messages.iter().map(|m| m.bits).sum::<u64>();
    state.k += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressors::estimate_moments;
    use crate::datagen::{make_regression, shard};
    use crate::problems::LossKind;
    use crate::rng::seed_stream;
    use crate::shifts::ShiftKind;
    use crate::Matrix;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ridge(m: usize, d: usize, n: usize, lambda: f64, seed: u64) -> (Problem, ReferenceSolution) {
        let (data, _) = make_regression(m, d, d / 2, 5.0, seed).unwrap();
        let p = Problem::new(LossKind::Ridge, &data, &shard(m, n, seed).unwrap(), lambda).unwrap();
        let r = p.solve_reference(1e-20).unwrap();
        (p, r)
    }

    fn random_vec(rng: &mut impl Rng, d: usize, scale: f64) -> Vector {
        Vector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
    }

    fn identities(n: usize, d: usize) -> Vec<CompressorSpec> {
        vec![CompressorSpec::identity(d).unwrap(); n]
    }

    fn rand_ks(n: usize, d: usize, k: usize) -> Vec<CompressorSpec> {
        vec![CompressorSpec::rand_k(d, k).unwrap(); n]
    }

    fn smooth(l: f64, l_i: Vec<f64>, mu: f64) -> SmoothnessInfo {
        let l_max = l_i.iter().copied().fold(0.0, f64::max);
        SmoothnessInfo { l, l_i, l_max, mu }
    }

    fn close(a: &Vector, b: &Vector, tol: f64) -> bool {
        (a - b).amax() <= tol * (1.0 + b.amax())
    }

    #[test]
    fn theorem_ids_round_trip() {
        for id in 1..=6u8 {
            assert_eq!(Theorem::try_from(id).unwrap().id(), id);
        }
        assert!(Theorem::try_from(7).is_err());
    }

    #[test]
    fn identity_fixed_zero_is_gradient_descent() {
        let (p, _) = ridge(30, 6, 3, 0.1, 4);
        let main = identities(3, 6);
        let strategy = ShiftStrategy::fixed(3, 6).unwrap();
        let x0 = random_vec(&mut seed_stream(1, 0, 0, Purpose::Start), 6, 1.0);
        let (shifts, _) = strategy.initial_state(&p, &x0, None).unwrap();
        let mut state = IterateState::new(x0.clone(), shifts, 0);
        let gamma = 0.01;
        let mut gd = x0;
        for k in 0..20 {
            dcgd_shift_step(&mut state, &p, &main, &strategy, gamma, RoundKey::new(9, k)).unwrap();
            gd -= p.gradient(&gd).unwrap() * gamma;
            assert!(close(&state.x, &gd, 1e-12));
        }
        assert_eq!(state.k, 20);
        assert_eq!(state.bits, 20 * 3 * 6 * 64);
    }

    #[test]
    fn single_worker_half_square() {
        // f(x) = |x|^2 / 2 as a ridge with A = I, y = 0.
        let p = Problem::from_parts(
            LossKind::Ridge,
            vec![(Matrix::identity(4, 4), Vector::zeros(4))],
            0.0,
        )
        .unwrap();
        let strategy = ShiftStrategy::fixed(1, 4).unwrap();
        let x0 = Vector::from_row_slice(&[1.0, -2.0, 3.0, 0.5]);
        let (shifts, _) = strategy.initial_state(&p, &x0, None).unwrap();
        let mut state = IterateState::new(x0.clone(), shifts, 0);
        dcgd_shift_step(
            &mut state,
            &p,
            &identities(1, 4),
            &strategy,
            0.3,
            RoundKey::new(0, 0),
        )
        .unwrap();
        assert!(close(&state.x, &(x0 * 0.7), 1e-15));
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        let (p, _) = ridge(12, 3, 2, 0.1, 1);
        let strategy = ShiftStrategy::fixed(2, 3).unwrap();
        let mut state = IterateState::plain(Vector::zeros(3));
        state.shifts = strategy.initial_state(&p, &state.x, None).unwrap().0;
        let err = dcgd_shift_step(
            &mut state,
            &p,
            &identities(2, 3),
            &strategy,
            0.0,
            RoundKey::new(0, 0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn estimator_is_unbiased_for_every_strategy() {
        let (n, d) = (3, 6);
        let (p, r) = ridge(30, d, n, 0.1, 2);
        let main = rand_ks(n, d, 2);
        let mut rng = seed_stream(3, 0, 0, Purpose::Sampling);
        let x = random_vec(&mut rng, d, 1.0);
        let shifted: Vec<Vector> = (0..n).map(|_| random_vec(&mut rng, d, 1.0)).collect();
        let strategies = [
            ShiftStrategy::fixed(n, d).unwrap(),
            ShiftStrategy::star(vec![CompressorSpec::top_k(d, 2).unwrap(); n], &r).unwrap(),
            ShiftStrategy::diana(vec![CompressorSpec::top_k(d, 1).unwrap(); n], 0.1).unwrap(),
            ShiftStrategy::rand_diana(vec![0.5; n], d).unwrap(),
        ];
        let truth = p.gradient(&x).unwrap();
        for strategy in &strategies {
            let anchor = random_vec(&mut rng, d, 1.0);
            let (mut shifts, _) = strategy.initial_state(&p, &anchor, None).unwrap();
            if strategy.kind() != ShiftKind::RandDiana {
                shifts.local = shifted.clone();
                shifts.master = mean(&shifted);
            }
            let state = IterateState::new(x.clone(), shifts, 0);
            let moments = estimate_moments(&truth, 20_000, |s| {
                Ok(dcgd_round(&state, &p, &main, strategy, RoundKey::new(77, s as u64))?.estimator)
            })
            .unwrap();
            assert!(
                moments.mean_within(&truth),
                "{:?}: z = {}",
                strategy.kind(),
                moments.worst_z(&truth)
            );
        }
    }

    #[test]
    fn theorem_one_reduces_to_gradient_descent() {
        let s = smooth(2.0, vec![3.0, 5.0], 0.5);
        let inputs = TheoremInputs {
            omegas: vec![0.0; 2],
            ..Default::default()
        };
        let steps = auto_stepsizes(Theorem::FixedShift, &s, &inputs).unwrap();
        assert_eq!(steps.gamma, 0.5);
    }

    #[test]
    fn theorem_one_arithmetic() {
        let s = smooth(1.0, vec![1.0; 10], 0.1);
        let inputs = TheoremInputs {
            omegas: vec![3.0; 10],
            ..Default::default()
        };
        let steps = auto_stepsizes(Theorem::FixedShift, &s, &inputs).unwrap();
        assert!((steps.gamma - 0.625).abs() < 1e-15);
    }

    #[test]
    fn theorem_two_with_identity_inner_is_gradient_descent() {
        let s = smooth(1.0, vec![4.0; 10], 0.1);
        let inputs = TheoremInputs {
            omegas: vec![3.0; 10],
            deltas: vec![1.0; 10],
            ..Default::default()
        };
        assert_eq!(
            auto_stepsizes(Theorem::Star, &s, &inputs).unwrap().gamma,
            1.0
        );
        let inputs = TheoremInputs {
            deltas: vec![0.5; 10],
            ..inputs
        };
        // 1 / (1 + 4 * 3 * 0.5 / 10)
        let gamma = auto_stepsizes(Theorem::Star, &s, &inputs).unwrap().gamma;
        assert!((gamma - 1.0 / 1.6).abs() < 1e-15);
    }

    #[test]
    fn theorem_three_defaults_and_alpha_bound() {
        let s = smooth(1.0, vec![2.0; 4], 0.1);
        let inputs = TheoremInputs {
            omegas: vec![3.0; 4],
            deltas: vec![0.0; 4],
            ..Default::default()
        };
        let steps = auto_stepsizes(Theorem::Diana, &s, &inputs).unwrap();
        assert_eq!(steps.alpha, 0.25);
        assert!((steps.m - 4.0).abs() < 1e-15);
        // 1 / ((2/4) * 6 + (1 + 1) * 2)
        assert!((steps.gamma - 1.0 / 7.0).abs() < 1e-15);
        let bad = TheoremInputs {
            alpha: Some(0.3),
            ..inputs.clone()
        };
        assert!(matches!(
            auto_stepsizes(Theorem::Diana, &s, &bad),
            Err(Error::TheoremPrecondition { theorem: 3, .. })
        ));
        // A Lyapunov weight below the minimum is allowed.
        let low = TheoremInputs {
            m: Some(0.5),
            ..inputs
        };
        assert_eq!(auto_stepsizes(Theorem::Diana, &s, &low).unwrap().m, 0.5);
    }

    #[test]
    fn theorem_four_rate_matches_displayed_complexity() {
        let (n, omega) = (10usize, 3.0);
        let s = smooth(1.3, (0..n).map(|i| 2.0 + i as f64 * 0.3).collect(), 0.01);
        let p = 1.0 / (omega + 1.0);
        let inputs = TheoremInputs {
            omegas: vec![omega; n],
            probs: vec![p; n],
            ..Default::default()
        };
        let steps = auto_stepsizes(Theorem::RandDiana, &s, &inputs).unwrap();
        assert!((steps.m - 4.0 * omega / (n as f64 * p)).abs() < 1e-12);
        let rate = contraction_rate(Theorem::RandDiana, &s, &steps, &inputs).unwrap();
        // gamma = 1/(L_max (1 + 6 omega/n)); the shift term contracts at 1 - p/2.
        let kappa = s.l_max / s.mu;
        let oracle = (1.0 - 1.0 / (kappa * (1.0 + 6.0 * omega / n as f64))).max(1.0 - p / 2.0);
        assert!((rate - oracle).abs() < 1e-14);
        let displayed = (kappa * (1.0 + omega / n as f64)).max(omega + 1.0);
        assert_eq!(iteration_bound(Theorem::RandDiana, &s, omega, n), displayed);
        let iters = 1.0 / (1.0 - rate);
        assert!(
            iters >= displayed && iters <= 6.0 * displayed,
            "{iters} vs {displayed}"
        );
    }

    #[test]
    fn compressed_iterate_theorems_need_strong_convexity() {
        let s = smooth(1.0, vec![1.0; 2], 0.0);
        let inputs = TheoremInputs {
            omegas: vec![1.0; 2],
            ..Default::default()
        };
        for t in [Theorem::Gdci, Theorem::VrGdci] {
            assert!(matches!(
                auto_stepsizes(t, &s, &inputs),
                Err(Error::TheoremPrecondition { .. })
            ));
        }
    }

    #[test]
    fn compressed_iterate_steps_meet_their_bounds() {
        let (n, omega) = (5usize, 2.0);
        let s = smooth(3.0, vec![4.0, 5.0, 6.0, 7.0, 8.0], 0.2);
        let inputs = TheoremInputs {
            omegas: vec![omega; n],
            ..Default::default()
        };
        for (t, c) in [(Theorem::Gdci, 2.0), (Theorem::VrGdci, 6.0)] {
            let st = auto_stepsizes(t, &s, &inputs).unwrap();
            let c = c * omega / n as f64;
            let eta = 1.0 / (s.l / s.mu + c * (s.l_max / s.mu - 1.0));
            assert!((st.eta - eta).abs() < 1e-15);
            let gamma = (1.0 + c * eta) / (eta * (s.l + c * s.l_max));
            assert!((st.gamma - gamma).abs() <= 1e-12 * gamma);
        }
        let vr = auto_stepsizes(Theorem::VrGdci, &s, &inputs).unwrap();
        assert!((vr.alpha - 1.0 / 3.0).abs() < 1e-15);
        let rate = contraction_rate(Theorem::VrGdci, &s, &vr, &inputs).unwrap();
        assert_eq!(rate, 1.0 - (vr.alpha / 2.0).min(vr.eta));
    }

    #[test]
    fn lyapunov_vanishes_at_the_optimum() {
        let (_, r) = ridge(20, 4, 2, 0.1, 5);
        let shifts = ShiftState {
            local: r.local_grads.clone(),
            master: mean(&r.local_grads),
            anchors: Vec::new(),
        };
        let steps = StepSizes {
            gamma: 0.1,
            eta: 0.5,
            alpha: 0.25,
            m: 3.0,
        };
        let omegas = [1.0, 2.0];
        for t in [Theorem::Diana, Theorem::RandDiana] {
            assert_eq!(
                lyapunov(t, &r.x_star, &shifts, &r, &steps, &omegas).unwrap(),
                0.0
            );
        }
        let iterate: Vec<Vector> = r
            .local_grads
            .iter()
            .map(|g| &r.x_star - g * steps.gamma)
            .collect();
        let iterate_shifts = IterateState::with_iterate_shifts(r.x_star.clone(), iterate)
            .unwrap()
            .shifts;
        let v = lyapunov(
            Theorem::VrGdci,
            &r.x_star,
            &iterate_shifts,
            &r,
            &steps,
            &omegas,
        );
        assert_eq!(v.unwrap(), 0.0);
        assert!(lyapunov(Theorem::Gdci, &r.x_star, &shifts, &r, &steps, &omegas).is_err());
    }

    #[test]
    fn lyapunov_with_zero_weight_is_distance() {
        let (_, r) = ridge(20, 4, 2, 0.1, 6);
        let mut rng = seed_stream(6, 0, 0, Purpose::Sampling);
        let local: Vec<Vector> = (0..2).map(|_| random_vec(&mut rng, 4, 1.0)).collect();
        let shifts = ShiftState {
            master: mean(&local),
            local,
            anchors: Vec::new(),
        };
        let x = random_vec(&mut rng, 4, 1.0);
        let steps = StepSizes {
            gamma: 0.1,
            eta: 1.0,
            alpha: 0.5,
            m: 0.0,
        };
        let dist = (&x - &r.x_star).norm_squared();
        for t in [Theorem::Diana, Theorem::RandDiana] {
            assert_eq!(
                lyapunov(t, &x, &shifts, &r, &steps, &[1.0, 1.0]).unwrap(),
                dist
            );
        }
    }

    #[test]
    fn lyapunov_matches_naive_loops() {
        let (_, r) = ridge(30, 5, 3, 0.1, 7);
        let mut rng = seed_stream(7, 0, 0, Purpose::Sampling);
        let local: Vec<Vector> = (0..3).map(|_| random_vec(&mut rng, 5, 1.0)).collect();
        let shifts = ShiftState {
            master: mean(&local),
            local: local.clone(),
            anchors: Vec::new(),
        };
        let x = random_vec(&mut rng, 5, 1.0);
        let steps = StepSizes {
            gamma: 0.07,
            eta: 0.3,
            alpha: 0.2,
            m: 2.5,
        };
        let omegas = [1.0, 4.0, 2.0];
        let mut dist = 0.0;
        for j in 0..5 {
            dist += (x[j] - r.x_star[j]).powi(2);
        }
        let (mut weighted, mut plain, mut iter) = (0.0, 0.0, 0.0);
        for i in 0..3 {
            for j in 0..5 {
                let e = local[i][j] - r.local_grads[i][j];
                weighted += omegas[i] * e * e / 3.0;
                plain += e * e / 3.0;
                let t = r.x_star[j] - steps.gamma * r.local_grads[i][j];
                iter += (local[i][j] - t).powi(2) / 3.0;
            }
        }
        let g2 = steps.gamma * steps.gamma;
        let cases = [
            (Theorem::Diana, dist + steps.m * g2 * weighted),
            (Theorem::RandDiana, dist + steps.m * g2 * plain),
            (
                Theorem::VrGdci,
                dist + 4.0 * steps.eta * steps.eta * 4.0 / (steps.alpha * 3.0) * iter,
            ),
        ];
        for (t, want) in cases {
            let got = lyapunov(t, &x, &shifts, &r, &steps, &omegas).unwrap();
            assert!((got - want).abs() <= 1e-12 * want, "{t:?}: {got} vs {want}");
        }
    }

    #[test]
    fn neighborhood_floors_match_hand_sums() {
        let r = ReferenceSolution {
            x_star: Vector::from_vec(vec![1.0, -1.0]),
            local_grads: vec![
                Vector::from_vec(vec![2.0, 0.0]),
                Vector::from_vec(vec![-2.0, 0.0]),
            ],
            f_star: 0.0,
            grad_norm_sq: 0.0,
        };
        let s = smooth(4.0, vec![5.0, 5.0], 0.5);
        let steps = StepSizes {
            gamma: 0.1,
            eta: 0.25,
            alpha: 0.0,
            m: 0.0,
        };
        let omegas = [3.0, 1.0];
        // zero shifts: (2*0.1/0.5) * (1/2) * (3/2*4 + 1/2*4) = 0.4 * 4
        let f1 = neighborhood_floor(Theorem::FixedShift, &s, &steps, &omegas, &r, None).unwrap();
        assert!((f1 - 1.6).abs() < 1e-14, "{f1}");
        let h = vec![r.local_grads[0].clone(), Vector::zeros(2)];
        let f1h =
            neighborhood_floor(Theorem::FixedShift, &s, &steps, &omegas, &r, Some(&h)).unwrap();
        assert!((f1h - 0.4).abs() < 1e-14, "{f1h}");
        // |(0.8,-1)|^2 = 1.64, |(1.2,-1)|^2 = 2.44; 0.25 * 3 * 2.04
        let f5 = neighborhood_floor(Theorem::Gdci, &s, &steps, &omegas, &r, None).unwrap();
        assert!((f5 - 1.53).abs() < 1e-14, "{f5}");
        assert!(neighborhood_floor(Theorem::Diana, &s, &steps, &omegas, &r, None).is_err());
    }

    #[test]
    fn gdci_with_identity_is_damped_gradient_descent() {
        let (p, _) = ridge(30, 6, 3, 0.1, 8);
        let x0 = random_vec(&mut seed_stream(8, 0, 0, Purpose::Start), 6, 1.0);
        let (eta, gamma) = (0.4, 0.02);
        let mut state = IterateState::plain(x0.clone());
        let mut gd = x0;
        for k in 0..15 {
            gdci_step(
                &mut state,
                &p,
                &identities(3, 6),
                eta,
                gamma,
                RoundKey::new(1, k),
            )
            .unwrap();
            gd -= p.gradient(&gd).unwrap() * (eta * gamma);
            assert!(close(&state.x, &gd, 1e-12));
        }
    }

    #[test]
    fn gdci_full_mixing_single_worker_is_gradient_descent() {
        let (p, _) = ridge(15, 4, 1, 0.1, 9);
        let x0 = random_vec(&mut seed_stream(9, 0, 0, Purpose::Start), 4, 1.0);
        let mut state = IterateState::plain(x0.clone());
        gdci_step(
            &mut state,
            &p,
            &identities(1, 4),
            1.0,
            0.01,
            RoundKey::new(0, 0),
        )
        .unwrap();
        let gd = &x0 - p.local_gradient(0, &x0).unwrap() * 0.01;
        assert!(close(&state.x, &gd, 1e-15));
        let bad = gdci_step(
            &mut state,
            &p,
            &identities(1, 4),
            1.5,
            0.01,
            RoundKey::new(0, 1),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn gdci_forms_agree_under_shared_streams() {
        let (n, d) = (4, 8);
        let (p, _) = ridge(40, d, n, 0.1, 10);
        let main = rand_ks(n, d, 2);
        let x0 = random_vec(&mut seed_stream(10, 0, 0, Purpose::Start), d, 1.0);
        let mut a = IterateState::plain(x0.clone());
        let mut b = IterateState::plain(x0);
        for k in 0..50 {
            let key = RoundKey::new(10, k);
            gdci_step(&mut a, &p, &main, 0.3, 0.05, key).unwrap();
            gdci_step_shifted_form(&mut b, &p, &main, 0.3, 0.05, key).unwrap();
            assert!(close(&a.x, &b.x, 1e-12), "step {k}");
        }
        assert_eq!(a.bits, b.bits);
    }

    #[test]
    fn vr_gdci_identity_full_step() {
        let (n, d) = (3, 5);
        let (p, _) = ridge(30, d, n, 0.1, 11);
        let mut rng = seed_stream(11, 0, 0, Purpose::Start);
        let x0 = random_vec(&mut rng, d, 1.0);
        let h0: Vec<Vector> = (0..n).map(|_| random_vec(&mut rng, d, 1.0)).collect();
        let mut state = IterateState::with_iterate_shifts(x0.clone(), h0).unwrap();
        let steps = StepSizes {
            gamma: 0.03,
            eta: 0.6,
            alpha: 1.0,
            m: 0.0,
        };
        vr_gdci_step(
            &mut state,
            &p,
            &identities(n, d),
            &steps,
            RoundKey::new(0, 0),
        )
        .unwrap();
        let grads = p.local_gradients(&x0).unwrap();
        for i in 0..n {
            let want = &x0 - &grads[i] * steps.gamma;
            assert!(close(&state.shifts.local[i], &want, 1e-13));
        }
        let gd = &x0 - p.gradient(&x0).unwrap() * (steps.eta * steps.gamma);
        assert!(close(&state.x, &gd, 1e-12));
    }

    #[test]
    fn vr_gdci_at_fixed_point_sends_nothing_new() {
        let (n, d) = (3, 5);
        let (p, _) = ridge(30, d, n, 0.1, 12);
        let x0 = random_vec(&mut seed_stream(12, 0, 0, Purpose::Start), d, 1.0);
        let gamma = 0.04;
        let h: Vec<Vector> = p
            .local_gradients(&x0)
            .unwrap()
            .iter()
            .map(|g| &x0 - g * gamma)
            .collect();
        let mut state = IterateState::with_iterate_shifts(x0.clone(), h.clone()).unwrap();
        let steps = StepSizes {
            gamma,
            eta: 0.3,
            alpha: 0.2,
            m: 0.0,
        };
        vr_gdci_step(
            &mut state,
            &p,
            &rand_ks(n, d, 2),
            &steps,
            RoundKey::new(3, 0),
        )
        .unwrap();
        assert_eq!(state.shifts.local, h);
        let want = &x0 * 0.7 + mean(&h) * 0.3;
        assert!(close(&state.x, &want, 1e-15));
    }

    #[test]
    fn vr_gdci_master_tracks_mean_of_shifts() {
        let (n, d) = (4, 6);
        let (p, _) = ridge(40, d, n, 0.1, 13);
        let mut rng = seed_stream(13, 0, 0, Purpose::Start);
        let x0 = random_vec(&mut rng, d, 1.0);
        let h0: Vec<Vector> = (0..n).map(|_| random_vec(&mut rng, d, 1.0)).collect();
        let mut state = IterateState::with_iterate_shifts(x0, h0).unwrap();
        let main = rand_ks(n, d, 3);
        let steps = StepSizes {
            gamma: 0.02,
            eta: 0.2,
            alpha: 0.5,
            m: 0.0,
        };
        for k in 0..100 {
            vr_gdci_step(&mut state, &p, &main, &steps, RoundKey::new(13, k)).unwrap();
        }
        assert!(close(
            &state.shifts.master,
            &mean(&state.shifts.local),
            1e-12
        ));
        let too_big = StepSizes {
            alpha: 0.6,
            ..steps
        };
        assert!(matches!(
            vr_gdci_step(&mut state, &p, &main, &too_big, RoundKey::new(13, 100)),
            Err(Error::TheoremPrecondition { theorem: 6, .. })
        ));
    }

    #[test]
    fn full_refresh_and_full_learning_coincide_with_exact_compression() {
        let (n, d) = (3, 5);
        let (p, _) = ridge(30, d, n, 0.1, 14);
        let main = identities(n, d);
        let x0 = random_vec(&mut seed_stream(14, 0, 0, Purpose::Start), d, 3.0);
        let diana = ShiftStrategy::diana(vec![CompressorSpec::zero(d).unwrap(); n], 1.0).unwrap();
        let rand = ShiftStrategy::rand_diana(vec![1.0; n], d).unwrap();
        let sa = diana.initial_state(&p, &x0, None).unwrap().0;
        let sb = rand.initial_state(&p, &x0, None).unwrap().0;
        let mut a = IterateState::new(x0.clone(), sa, 0);
        let mut b = IterateState::new(x0.clone(), sb, 0);
        for k in 0..30 {
            dcgd_shift_step(&mut a, &p, &main, &diana, 0.01, RoundKey::new(2, k)).unwrap();
            dcgd_shift_step(&mut b, &p, &main, &rand, 0.01, RoundKey::new(2, k)).unwrap();
            assert!(close(&a.x, &b.x, 1e-12), "step {k}");
        }
    }

    #[test]
    fn star_contracts_at_the_linear_rate_on_average() {
        let (n, d) = (4, 6);
        let (p, r) = ridge(40, d, n, 0.1, 15);
        let main = rand_ks(n, d, 2);
        let s = p.smoothness();
        let strategy = ShiftStrategy::star(vec![CompressorSpec::zero(d).unwrap(); n], &r).unwrap();
        let inputs = TheoremInputs::from_parts(&main, Some(&strategy)).unwrap();
        let gamma = auto_stepsizes(Theorem::Star, &s, &inputs).unwrap().gamma;
        let x0 = random_vec(&mut seed_stream(15, 0, 0, Purpose::Start), d, 10.0);
        let e0 = (&x0 - &r.x_star).norm_squared();
        let (seeds, k_end) = (200u64, 30u64);
        let mut total = 0.0;
        for seed in 0..seeds {
            let shifts = strategy.initial_state(&p, &x0, None).unwrap().0;
            let mut st = IterateState::new(x0.clone(), shifts, 0);
            for k in 0..k_end {
                dcgd_shift_step(&mut st, &p, &main, &strategy, gamma, RoundKey::new(seed, k))
                    .unwrap();
            }
            total += (&st.x - &r.x_star).norm_squared();
        }
        let bound = (1.0 - gamma * s.mu).powi(k_end as i32) * e0;
        assert!(total / seeds as f64 <= 1.1 * bound);
    }
}
