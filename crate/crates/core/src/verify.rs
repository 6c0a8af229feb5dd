//! Statistical check suites, runnable from tests and from the command line.
//!
//! Every check is seeded and reports a pass flag with a one-line detail. The
//! default problem is the desk-scale ridge instance from [`ridge_instance`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::algorithms::{
    auto_stepsizes, contraction_rate, dcgd_round, dcgd_shift_step, gdci_step,
    gdci_step_shifted_form, lyapunov, vr_gdci_step, IterateState, StepSizes, Theorem,
    TheoremInputs,
};
use crate::compressors::{
    estimate_moments, iterate_compressor, CompressorKind, CompressorSpec, InducedCompressor,
    VARIANCE_SLACK,
};
use crate::datagen::{make_regression, shard};
use crate::problems::{LossKind, Problem, ReferenceSolution};
use crate::rng::{child_seed, seed_stream, Purpose, RoundKey, Stream};
use crate::shifts::{mean, ShiftState, ShiftStrategy};
use crate::{Error, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Compressors,
    Estimators,
    Lyapunov,
    Reductions,
    All,
}

impl Suite {
    const PARTS: [Suite; 4] = [
        Suite::Compressors,
        Suite::Estimators,
        Suite::Lyapunov,
        Suite::Reductions,
    ];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "compressors" => Suite::Compressors,
            "estimators" => Suite::Estimators,
            "lyapunov" => Suite::Lyapunov,
            "reductions" => Suite::Reductions,
            "all" => Suite::All,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown suite {s:?}; expected compressors, estimators, lyapunov, reductions or all"
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Compressors => "compressors",
            Suite::Estimators => "estimators",
            Suite::Lyapunov => "lyapunov",
            Suite::Reductions => "reductions",
            Suite::All => "all",
        };
        f.write_str(name)
    }
}

/// Deliberate bugs used to confirm that the checks can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Rand-K scales kept coordinates by `d/(K+1)` instead of `d/K`.
    RandKScale,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Monte-Carlo samples for mean and variance checks.
    pub samples: usize,
    /// Draws per state in one-step contraction checks.
    pub contraction_draws: usize,
    /// Random states per theorem in contraction checks.
    pub states: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100_000,
            contraction_draws: 10_000,
            states: 5,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, suite: Suite, name: impl Into<String>, passed: bool, detail: String) {
        self.checks.push(Check {
            suite,
            name: name.into(),
            passed,
            detail,
        });
    }
}

/// Ridge regression with 100 Gaussian rows, 80 features (10 informative, no
/// label noise), split over 10 workers, with `lambda = 1/100`.
pub fn ridge_instance() -> Result<(Problem, ReferenceSolution)> {
    let (data, _) = make_regression(100, 80, 10, 0.0, 0)?;
    let problem = Problem::new(LossKind::Ridge, &data, &shard(100, 10, 0)?, 0.01)?;
    let reference = problem.solve_reference(1e-30)?;
    Ok((problem, reference))
}

/// Run `suite` on [`ridge_instance`].
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    let needs_problem = !matches!(suite, Suite::Compressors);
    if needs_problem {
        let (p, r) = ridge_instance()?;
        run_suite_on(suite, &p, &r, opts)
    } else {
        let mut report = VerifyReport::default();
        compressor_checks(&mut report, opts)?;
        Ok(report)
    }
}

pub fn run_suite_on(
    suite: Suite,
    problem: &Problem,
    reference: &ReferenceSolution,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let parts: Vec<Suite> = match suite {
        Suite::All => Suite::PARTS.to_vec(),
        s => vec![s],
    };
    for part in parts {
        match part {
            Suite::Compressors => compressor_checks(&mut report, opts)?,
            Suite::Estimators => estimator_checks(&mut report, problem, reference, opts)?,
            Suite::Lyapunov => lyapunov_checks(&mut report, problem, reference, opts)?,
            Suite::Reductions => reduction_checks(&mut report, problem, reference, opts)?,
            Suite::All => unreachable!(),
        }
    }
    Ok(report)
}

fn gaussian(rng: &mut Stream, d: usize, scale: f64) -> Vector {
    Vector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Compress `x`, applying the injected fault if any.
fn compress_with_fault(
    spec: &CompressorSpec,
    x: &Vector,
    rng: &mut Stream,
    fault: Option<Fault>,
) -> Result<Vector> {
    let out = spec.compress(x, rng)?.dense;
    Ok(match (fault, spec.kind()) {
        (Some(Fault::RandKScale), CompressorKind::RandK { k }) => out * (k as f64 / (k + 1) as f64),
        _ => out,
    })
}

fn compressor_checks(report: &mut VerifyReport, opts: &VerifyOptions) -> Result<()> {
    let suite = Suite::Compressors;
    let d = 80;
    let n = opts.samples;
    let mut rng = seed_stream(opts.seed, 0, 0, Purpose::Sampling);
    let x = gaussian(&mut rng, d, 1.0);

    for (idx, k) in [8usize, 24, 40].into_iter().enumerate() {
        let spec = CompressorSpec::rand_k(d, k)?;
        let omega = spec.omega().unwrap();
        let mut s = seed_stream(opts.seed, idx as u64, 1, Purpose::Sampling);
        let m = estimate_moments(&x, n, |_| {
            compress_with_fault(&spec, &x, &mut s, opts.fault)
        })?;
        let z = m.worst_z(&x);
        report.push(
            suite,
            format!("rand_k(K={k}) unbiased"),
            m.mean_within(&x),
            format!("worst |mean - x| = {z:.2} standard errors over {n} draws"),
        );
        let ratio = m.mean_sq_dev / x.norm_squared();
        let rel = (ratio - omega).abs() / omega;
        report.push(
            suite,
            format!("rand_k(K={k}) variance"),
            rel <= VARIANCE_SLACK,
            format!(
                "ratio {ratio:.4} vs omega {omega:.4} ({:.2}% off)",
                100.0 * rel
            ),
        );
    }

    let (k, trials) = (8usize, 10_000);
    let top = CompressorSpec::top_k(d, k)?;
    let delta = top.delta().unwrap();
    let mut violations = 0;
    let mut s = seed_stream(opts.seed, 0, 2, Purpose::Sampling);
    for _ in 0..trials {
        let v = gaussian(&mut s, d, 1.0);
        let c = top.compress(&v, &mut s)?.dense;
        let norm = v.norm_squared();
        if (&c - &v).norm_squared() > (1.0 - delta) * norm * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    report.push(
        suite,
        "top_k(K=8) contraction",
        violations == 0,
        format!("{violations} violations in {trials} random vectors"),
    );

    let induced = InducedCompressor::new(top.clone(), CompressorSpec::rand_k(d, 24)?)?;
    let bound = induced.omega();
    let mut s = seed_stream(opts.seed, 0, 3, Purpose::Sampling);
    let m = estimate_moments(&x, n, |_| Ok(induced.compress(&x, &mut s)?.dense))?;
    let ratio = m.mean_sq_dev / x.norm_squared();
    report.push(
        suite,
        "induced top_k(8) + rand_k(24) variance",
        ratio <= bound * (1.0 + VARIANCE_SLACK),
        format!("ratio {ratio:.4} vs omega (1 - delta) = {bound:.4}"),
    );
    report.push(
        suite,
        "induced top_k(8) + rand_k(24) unbiased",
        m.mean_within(&x),
        format!("worst z = {:.2}", m.worst_z(&x)),
    );

    for (idx, spec) in [
        CompressorSpec::natural_dithering(d, 2)?,
        CompressorSpec::natural_dithering(d, 8)?,
        CompressorSpec::bernoulli(d, 0.3)?,
        CompressorSpec::identity(d)?,
    ]
    .into_iter()
    .enumerate()
    {
        let mut s = seed_stream(opts.seed, idx as u64, 4, Purpose::Sampling);
        let m = estimate_moments(&x, n, |_| Ok(spec.compress(&x, &mut s)?.dense))?;
        let ratio = m.mean_sq_dev / x.norm_squared();
        let (bound, label) = match spec.omega() {
            Some(w) => (w, "omega"),
            None => (1.0 - spec.delta_or_zero(), "1 - delta"),
        };
        report.push(
            suite,
            format!("{:?} variance", spec.kind()),
            ratio <= bound * (1.0 + VARIANCE_SLACK) + 1e-12,
            format!("ratio {ratio:.4} vs {label} = {bound:.4}"),
        );
        if spec.is_unbiased() {
            report.push(
                suite,
                format!("{:?} unbiased", spec.kind()),
                m.mean_within(&x),
                format!("worst z = {:.2}", m.worst_z(&x)),
            );
        }
    }
    Ok(())
}

/// The four shift strategies with Rand-K(q = 1/4) main compressors.
fn strategies(
    problem: &Problem,
    reference: &ReferenceSolution,
) -> Result<(Vec<CompressorSpec>, Vec<ShiftStrategy>)> {
    let (n, d) = (problem.workers(), problem.dim());
    let main = vec![CompressorSpec::rand_k(d, (d / 4).max(1))?; n];
    let zero = vec![CompressorSpec::zero(d)?; n];
    let top = vec![CompressorSpec::top_k(d, (d / 10).max(1))?; n];
    let list = vec![
        ShiftStrategy::fixed(n, d)?,
        ShiftStrategy::star(top.clone(), reference)?,
        ShiftStrategy::diana(zero, ShiftStrategy::max_alpha(&main, &top)?)?,
        ShiftStrategy::rand_diana(ShiftStrategy::default_probs(&main)?, d)?,
    ];
    Ok((main, list))
}

fn estimator_checks(
    report: &mut VerifyReport,
    problem: &Problem,
    reference: &ReferenceSolution,
    opts: &VerifyOptions,
) -> Result<()> {
    let suite = Suite::Estimators;
    let (n, d) = (problem.workers(), problem.dim());
    let (main, list) = strategies(problem, reference)?;
    let mut rng = seed_stream(opts.seed, 0, 0, Purpose::Sampling);
    for (idx, strategy) in list.iter().enumerate() {
        let x = &reference.x_star + gaussian(&mut rng, d, 1.0);
        let anchor = &reference.x_star + gaussian(&mut rng, d, 1.0);
        let (mut shifts, _) = strategy.initial_state(problem, &anchor, None)?;
        if !matches!(strategy.kind(), crate::shifts::ShiftKind::RandDiana) {
            shifts.local = reference
                .local_grads
                .iter()
                .map(|g| g + gaussian(&mut rng, d, 1.0))
                .collect();
            shifts.master = mean(&shifts.local);
        }
        let state = IterateState::new(x.clone(), shifts, 0);
        let truth = problem.gradient(&x)?;
        let seed = child_seed(opts.seed, idx as u64 + 1);
        let m = estimate_moments(&truth, opts.samples, |s| {
            Ok(dcgd_round(
                &state,
                problem,
                &main,
                strategy,
                RoundKey::new(seed, s as u64),
            )?
            .estimator)
        })?;
        report.push(
            suite,
            format!("{:?} shifts: E g = grad f", strategy.kind()),
            m.mean_within(&truth),
            format!(
                "worst z = {:.2} over {} draws",
                m.worst_z(&truth),
                opts.samples
            ),
        );
    }

    let x = &reference.x_star + gaussian(&mut rng, d, 1.0);
    let gamma = 0.5 / problem.smoothness().l_max;
    let grads = problem.local_gradients(&x)?;
    let truth = problem.gradient(&x)?;
    let seed = child_seed(opts.seed, 99);
    let m = estimate_moments(&truth, opts.samples, |s| {
        let mut acc = Vector::zeros(d);
        for (i, q) in main.iter().enumerate() {
            let mut r = RoundKey::new(seed, s as u64).stream(i, Purpose::Compress);
            acc += iterate_compressor(q, &x, gamma, &grads[i], &mut r)?;
        }
        Ok(acc / n as f64)
    })?;
    report.push(
        suite,
        "compressed iterates: E Q~(grad) = grad f",
        m.mean_within(&truth),
        format!("worst z = {:.2}", m.worst_z(&truth)),
    );
    Ok(())
}

/// Empirical `E[V after one step] / V` from a frozen state.
fn one_step_ratio<F, G>(draws: usize, seed: u64, v0: f64, step: F, value: G) -> Result<f64>
where
    F: Fn(RoundKey) -> Result<IterateState> + Sync,
    G: Fn(&IterateState) -> Result<f64> + Sync,
{
    let values = (0..draws as u64)
        .into_par_iter()
        .map(|s| value(&step(RoundKey::new(child_seed(seed, s + 1), 0))?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / draws as f64 / v0)
}

fn lyapunov_checks(
    report: &mut VerifyReport,
    problem: &Problem,
    reference: &ReferenceSolution,
    opts: &VerifyOptions,
) -> Result<()> {
    let suite = Suite::Lyapunov;
    let (n, d) = (problem.workers(), problem.dim());
    let smooth = problem.smoothness();
    let main = vec![CompressorSpec::rand_k(d, (d / 4).max(1))?; n];
    let zero = vec![CompressorSpec::zero(d)?; n];
    let omegas: Vec<f64> = main.iter().map(|q| q.omega().unwrap()).collect();
    let slack = 1.0 + VARIANCE_SLACK;
    let mut rng = seed_stream(opts.seed, 0, 1, Purpose::Sampling);

    // Random frozen state whose distance and shift terms have comparable,
    // randomly weighted sizes.
    let mut random_shifts = |target: &[Vector], scale: f64| -> Vec<Vector> {
        target
            .iter()
            .map(|t| t + gaussian(&mut rng, d, scale))
            .collect()
    };

    for (theorem, strategy) in [
        (
            Theorem::Diana,
            ShiftStrategy::diana(zero.clone(), ShiftStrategy::max_alpha(&main, &zero)?)?,
        ),
        (
            Theorem::RandDiana,
            ShiftStrategy::rand_diana(ShiftStrategy::default_probs(&main)?, d)?,
        ),
    ] {
        let inputs = TheoremInputs::from_parts(&main, Some(&strategy))?;
        let steps = auto_stepsizes(theorem, &smooth, &inputs)?;
        let rate = contraction_rate(theorem, &smooth, &steps, &inputs)?;
        let tight =
            (1.0 - steps.gamma * smooth.mu).max(1.0 - steps.alpha + 2.0 / (n as f64 * steps.m));
        for s in 0..opts.states {
            let x = &reference.x_star
                + gaussian(
                    &mut seed_stream(opts.seed, s as u64, 5, Purpose::Sampling),
                    d,
                    1.0,
                );
            let dist = (&x - &reference.x_star).norm_squared();
            let weight = 10f64.powf(2.0 * (s as f64 / (opts.states.max(2) - 1) as f64) - 1.0);
            // Pick the shift noise so that M gamma^2 sigma = weight * dist.
            let omega = omegas[0];
            let per = (weight * dist
                / (steps.m * steps.gamma * steps.gamma * omega.max(1.0) * d as f64))
                .sqrt();
            let local = random_shifts(&reference.local_grads, per);
            let (mut shifts, _) = strategy.initial_state(problem, &x, None)?;
            if theorem == Theorem::Diana {
                shifts = ShiftState {
                    master: mean(&local),
                    local,
                    anchors: Vec::new(),
                };
            } else {
                // Anchors drawn around x* give shifts grad f_i(w_i).
                shifts.anchors = (0..n)
                    .map(|_| {
                        &reference.x_star
                            + gaussian(
                                &mut seed_stream(opts.seed, s as u64, 6, Purpose::Sampling),
                                d,
                                per / smooth.l_max.sqrt(),
                            )
                    })
                    .collect();
                shifts.local = shifts
                    .anchors
                    .iter()
                    .enumerate()
                    .map(|(i, w)| problem.local_gradient(i, w))
                    .collect::<Result<_>>()?;
                shifts.master = mean(&shifts.local);
            }
            let state = IterateState::new(x, shifts, 0);
            let v0 = lyapunov(theorem, &state.x, &state.shifts, reference, &steps, &omegas)?;
            let ratio = one_step_ratio(
                opts.contraction_draws,
                child_seed(opts.seed, 1000 + s as u64),
                v0,
                |key| {
                    let mut st = state.clone();
                    dcgd_shift_step(&mut st, problem, &main, &strategy, steps.gamma, key)?;
                    Ok(st)
                },
                |st| lyapunov(theorem, &st.x, &st.shifts, reference, &steps, &omegas),
            )?;
            report.push(
                suite,
                format!("theorem {} state {s}", theorem.id()),
                ratio <= rate * slack,
                format!("E V+/V = {ratio:.6} vs rate {rate:.6}"),
            );
            if theorem == Theorem::Diana {
                report.push(
                    suite,
                    format!("theorem 3 state {s} (unweighted-shift rate)"),
                    ratio <= tight * slack,
                    format!("E V+/V = {ratio:.6} vs 1 - alpha + 2/(nM) bound {tight:.6}"),
                );
            }
        }
    }

    let inputs = TheoremInputs::from_parts(&main, None)?;
    let steps = auto_stepsizes(Theorem::VrGdci, &smooth, &inputs)?;
    let rate = contraction_rate(Theorem::VrGdci, &smooth, &steps, &inputs)?;
    let targets: Vec<Vector> = reference
        .local_grads
        .iter()
        .map(|g| &reference.x_star - g * steps.gamma)
        .collect();
    for s in 0..opts.states {
        let x = &reference.x_star
            + gaussian(
                &mut seed_stream(opts.seed, s as u64, 7, Purpose::Sampling),
                d,
                1.0,
            );
        let dist = (&x - &reference.x_star).norm_squared();
        let weight = 10f64.powf(2.0 * (s as f64 / (opts.states.max(2) - 1) as f64) - 1.0);
        let omega = omegas[0];
        let coef = 4.0 * steps.eta * steps.eta * omega / (steps.alpha * n as f64);
        let per = (weight * dist / (coef * d as f64)).sqrt();
        let local = random_shifts(&targets, per);
        let state = IterateState::with_iterate_shifts(x, local)?;
        let v0 = lyapunov(
            Theorem::VrGdci,
            &state.x,
            &state.shifts,
            reference,
            &steps,
            &omegas,
        )?;
        let ratio = one_step_ratio(
            opts.contraction_draws,
            child_seed(opts.seed, 2000 + s as u64),
            v0,
            |key| {
                let mut st = state.clone();
                vr_gdci_step(&mut st, problem, &main, &steps, key)?;
                Ok(st)
            },
            |st| {
                lyapunov(
                    Theorem::VrGdci,
                    &st.x,
                    &st.shifts,
                    reference,
                    &steps,
                    &omegas,
                )
            },
        )?;
        report.push(
            suite,
            format!("theorem 6 state {s}"),
            ratio <= rate * slack,
            format!("E Psi+/Psi = {ratio:.6} vs rate {rate:.6}"),
        );
    }
    Ok(())
}

fn reduction_checks(
    report: &mut VerifyReport,
    problem: &Problem,
    reference: &ReferenceSolution,
    opts: &VerifyOptions,
) -> Result<()> {
    let suite = Suite::Reductions;
    let (n, d) = (problem.workers(), problem.dim());
    let steps_count = 200;
    let ident = vec![CompressorSpec::identity(d)?; n];
    let zero = vec![CompressorSpec::zero(d)?; n];
    let smooth = problem.smoothness();
    let gamma = 1.0 / smooth.l_max;
    let x0 = gaussian(&mut seed_stream(opts.seed, 0, 0, Purpose::Start), d, 10.0);
    let gd = |eta_gamma: f64| -> Result<Vec<Vector>> {
        let mut x = x0.clone();
        let mut out = Vec::with_capacity(steps_count);
        for _ in 0..steps_count {
            x -= problem.gradient(&x)? * eta_gamma;
            out.push(x.clone());
        }
        Ok(out)
    };
    let compare = |name: String, traj: &[Vector], exact: &[Vector], report: &mut VerifyReport| {
        let worst = traj
            .iter()
            .zip(exact)
            .map(|(a, b)| (a - b).amax() / (1.0 + b.amax()))
            .fold(0.0, f64::max);
        report.push(
            suite,
            name,
            worst <= 1e-12,
            format!("max relative deviation from exact GD {worst:.2e} over {steps_count} steps"),
        );
    };

    let exact = gd(gamma)?;
    for strategy in [
        ShiftStrategy::fixed(n, d)?,
        ShiftStrategy::star(zero.clone(), reference)?,
        ShiftStrategy::diana(zero.clone(), 1.0)?,
        ShiftStrategy::rand_diana(vec![0.5; n], d)?,
    ] {
        let (shifts, _) = strategy.initial_state(problem, &x0, None)?;
        let mut st = IterateState::new(x0.clone(), shifts, 0);
        let mut traj = Vec::with_capacity(steps_count);
        for k in 0..steps_count as u64 {
            dcgd_shift_step(
                &mut st,
                problem,
                &ident,
                &strategy,
                gamma,
                RoundKey::new(opts.seed, k),
            )?;
            traj.push(st.x.clone());
        }
        compare(
            format!("identity dcgd with {:?} shifts", strategy.kind()),
            &traj,
            &exact,
            report,
        );
    }

    let mut st = IterateState::plain(x0.clone());
    let mut traj = Vec::new();
    for k in 0..steps_count as u64 {
        gdci_step(
            &mut st,
            problem,
            &ident,
            1.0,
            gamma,
            RoundKey::new(opts.seed, k),
        )?;
        traj.push(st.x.clone());
    }
    compare("identity gdci (eta = 1)".into(), &traj, &exact, report);

    let vr_steps = StepSizes {
        gamma,
        eta: 1.0,
        alpha: 1.0,
        m: 0.0,
    };
    let mut st = IterateState::with_iterate_shifts(x0.clone(), vec![x0.clone(); n])?;
    let mut traj = Vec::new();
    for k in 0..steps_count as u64 {
        vr_gdci_step(
            &mut st,
            problem,
            &ident,
            &vr_steps,
            RoundKey::new(opts.seed, k),
        )?;
        traj.push(st.x.clone());
    }
    compare("identity vr_gdci (alpha = 1)".into(), &traj, &exact, report);

    // Both forms of compressed iterates under shared streams.
    let main = vec![CompressorSpec::rand_k(d, (d / 4).max(1))?; n];
    let inputs = TheoremInputs::from_parts(&main, None)?;
    let steps = auto_stepsizes(Theorem::Gdci, &smooth, &inputs)?;
    let (mut a, mut b) = (IterateState::plain(x0.clone()), IterateState::plain(x0));
    let (mut identical, mut worst) = (true, 0.0f64);
    for k in 0..50 {
        let key = RoundKey::new(opts.seed, k);
        gdci_step(&mut a, problem, &main, steps.eta, steps.gamma, key)?;
        gdci_step_shifted_form(&mut b, problem, &main, steps.eta, steps.gamma, key)?;
        identical &= a.x == b.x;
        worst = worst.max((&a.x - &b.x).amax() / (1.0 + a.x.amax()));
    }
    report.push(
        suite,
        "compressed iterates: mixing and shifted-compressor forms agree",
        worst <= 1e-12 && a.bits == b.bits,
        format!(
            "50 steps, max relative gap {worst:.2e}, bitwise identical: {identical}, bits {} vs {}",
            a.bits, b.bits
        ),
    );
    Ok(())
}
