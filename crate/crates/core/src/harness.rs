//! Experiment orchestration: building a problem from a config, running a
//! method on it, and recording the error/bits trajectory.
//!
//! Runs are deterministic functions of `(config, seed)`. Every random draw of
//! round `k` comes from the streams of `RoundKey::new(seed, k)`, and the start
//! point from the `Start` stream of the seed.

use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    auto_stepsizes, dcgd_shift_step, gdci_step, lyapunov, vr_gdci_step, IterateState, StepSizes,
    Theorem, TheoremInputs,
};
use crate::compressors::{CompressorConfig, CompressorSpec};
use crate::datagen::{
    make_interpolation_regression, make_regression, parse_libsvm, shard, Dataset, LibsvmOptions,
};
use crate::problems::{
    tune_regularizer_for_condition, LossKind, Problem, ReferenceSolution, SmoothnessInfo,
};
use crate::rng::{child_seed, seed_stream, Purpose, RoundKey};
use crate::shifts::{unbiased_omega, ShiftKind, ShiftStrategy};
use crate::{Error, Result, Vector};

/// Relative error above which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Where the rows of a problem come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Gaussian regression data; by default 10 informative features and no
    /// label noise.
    Synthetic {
        rows: usize,
        dim: usize,
        #[serde(default)]
        informative: Option<usize>,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Noise-free data generated by one dense weight vector.
    Interpolation {
        rows: usize,
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    /// LibSVM text file.
    Libsvm {
        path: PathBuf,
        #[serde(default)]
        dim: Option<usize>,
        #[serde(default = "default_true")]
        binary: bool,
        #[serde(default)]
        normalize: bool,
    },
}

fn default_true() -> bool {
    true
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Synthetic {
                rows,
                dim,
                informative,
                noise,
                seed,
            } => {
                let informative = informative.unwrap_or(10).min(*dim);
                Ok(make_regression(*rows, *dim, informative, *noise, *seed)?.0)
            }
            DataSource::Interpolation { rows, dim, seed } => {
                Ok(make_interpolation_regression(*rows, *dim, 1, *seed)?.0)
            }
            DataSource::Libsvm {
                path,
                dim,
                binary,
                normalize,
            } => parse_libsvm(
                path,
                &LibsvmOptions {
                    dim: *dim,
                    binary: *binary,
                    normalize: *normalize,
                },
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub loss: LossKind,
    pub data: DataSource,
    pub workers: usize,
    /// Regularizer; defaults to `1 / rows`.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Pick the regularizer that gives `L / mu` this value instead.
    #[serde(default)]
    pub condition_number: Option<f64>,
    #[serde(default)]
    pub shard_seed: u64,
    /// Target squared gradient norm of the reference solution.
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
}

fn default_reference_tol() -> f64 {
    1e-30
}

impl ProblemConfig {
    /// Build the problem and solve it to reference accuracy.
    pub fn build(&self) -> Result<(Problem, ReferenceSolution)> {
        if self.lambda.is_some() && self.condition_number.is_some() {
            return Err(Error::InvalidArgument(
                "give either lambda or condition_number, not both".into(),
            ));
        }
        let data = self.data.load()?;
        let shards = shard(data.rows(), self.workers, self.shard_seed)?;
        let lambda = self.lambda.unwrap_or(1.0 / data.rows() as f64);
        let mut problem = Problem::new(self.loss, &data, &shards, lambda)?;
        if let Some(kappa) = self.condition_number {
            let tuned = tune_regularizer_for_condition(&problem, kappa)?;
            problem = problem.with_lambda(tuned)?;
        }
        let reference = problem.solve_reference(self.reference_tol)?;
        Ok((problem, reference))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DcgdShift,
    Gdci,
    VrGdci,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub kind: ShiftKind,
    /// Inner (contractive) compressor of optimal and learned shifts.
    #[serde(default = "zero_compressor")]
    pub inner: CompressorConfig,
    /// Shift step of learned shifts; defaults to the largest admissible one.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Refresh probability of randomized shifts; defaults to `1/(omega_i + 1)`.
    #[serde(default)]
    pub p: Option<f64>,
}

fn zero_compressor() -> CompressorConfig {
    CompressorConfig::Zero
}

/// Step-size source. Without an explicit `gamma` the theorem maxima are used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    /// Theorem whose step sizes to use; inferred from the method by default.
    #[serde(default)]
    pub theorem: Option<u8>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Shift step of the variance-reduced compressed-iterate method.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Lyapunov weight `M`.
    #[serde(default)]
    pub m: Option<f64>,
    /// `M` as a multiple of the theorem's lower limit on it.
    #[serde(default)]
    pub m_factor: Option<f64>,
    /// Factor applied to `gamma` after it is computed.
    #[serde(default)]
    pub multiplier: Option<f64>,
    /// Cap `gamma` of compressed iterates at `2 / (L + mu)`.
    #[serde(default)]
    pub cap_gdci: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    #[serde(default)]
    pub bits: Option<u64>,
}

fn default_iterations() -> u64 {
    100_000
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            bits: None,
        }
    }
}

/// Start point `x0 ~ N(0, scale)` per coordinate, with `scale` read as a
/// standard deviation unless `variance` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartConfig {
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub variance: bool,
}

fn default_scale() -> f64 {
    10.0
}

impl Default for StartConfig {
    fn default() -> Self {
        Self {
            scale: default_scale(),
            variance: false,
        }
    }
}

impl StartConfig {
    pub fn std_dev(&self) -> f64 {
        if self.variance {
            self.scale.sqrt()
        } else {
            self.scale
        }
    }
}

/// Everything that defines a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub algorithm: Algorithm,
    /// Main compressor of every worker.
    #[serde(default)]
    pub compressor: CompressorConfig,
    /// Per-worker main compressors, overriding `compressor`.
    #[serde(default)]
    pub worker_compressors: Option<Vec<CompressorConfig>>,
    /// Required for `dcgd_shift`.
    #[serde(default)]
    pub shift: Option<ShiftConfig>,
    #[serde(default)]
    pub steps: StepConfig,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub start: StartConfig,
    /// Keep every `record_every`-th row of the trajectory (the last row is
    /// always kept).
    #[serde(default = "default_record_every")]
    pub record_every: u64,
}

fn default_eps() -> f64 {
    1e-10
}

fn default_seeds() -> usize {
    1
}

fn default_record_every() -> u64 {
    1
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.eps > 0.0) {
            return bad(format!("eps = {} must be positive", self.eps));
        }
        if self.budget.iterations == 0 || self.budget.bits == Some(0) {
            return bad("budgets must be positive".into());
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.start.scale >= 0.0) {
            return bad(format!("start scale {} must be >= 0", self.start.scale));
        }
        if self.problem.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        match (self.algorithm, &self.shift) {
            (Algorithm::DcgdShift, None) => bad("dcgd_shift needs a shift block".into()),
            (Algorithm::Gdci | Algorithm::VrGdci, Some(_)) => {
                bad("shift blocks apply to dcgd_shift only".into())
            }
            _ => Ok(()),
        }
    }

    fn main_compressors(&self, dim: usize) -> Result<Vec<CompressorSpec>> {
        let n = self.problem.workers;
        match &self.worker_compressors {
            Some(list) => {
                if list.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "{} worker compressors for {n} workers",
                        list.len()
                    )));
                }
                list.iter().map(|c| c.build(dim)).collect()
            }
            None => {
                let c = self.compressor.build(dim)?;
                Ok(vec![c; n])
            }
        }
    }

    /// Theorem implied by the method.
    pub fn default_theorem(&self) -> Theorem {
        match (self.algorithm, self.shift.as_ref().map(|s| s.kind)) {
            (Algorithm::Gdci, _) => Theorem::Gdci,
            (Algorithm::VrGdci, _) => Theorem::VrGdci,
            (_, Some(ShiftKind::Star)) => Theorem::Star,
            (_, Some(ShiftKind::Diana)) => Theorem::Diana,
            (_, Some(ShiftKind::RandDiana)) => Theorem::RandDiana,
            _ => Theorem::FixedShift,
        }
    }
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub k: u64,
    /// `|x^k - x*|^2 / |x^0 - x*|^2`.
    pub rel_error: f64,
    pub cum_bits: u64,
    pub lyapunov: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub rows: Vec<RunRow>,
    pub status: RunStatus,
    /// Bits communicated when the error first dropped to `eps`.
    pub bits_to_eps: Option<u64>,
    pub iters_to_eps: Option<u64>,
    /// `|x^0 - x*|^2`.
    pub initial_dist_sq: f64,
    pub steps: StepSizes,
}

impl RunRecord {
    pub fn last(&self) -> &RunRow {
        self.rows
            .last()
            .expect("a record has at least the starting row")
    }

    /// Bits at the first recorded row with error at most `eps`.
    pub fn bits_to(&self, eps: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.rel_error <= eps)
            .map(|r| r.cum_bits)
    }

    /// Iteration of the first recorded row with error at most `eps`.
    pub fn iters_to(&self, eps: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.rel_error <= eps).map(|r| r.k)
    }

    /// Row recorded at iteration `k`.
    pub fn at(&self, k: u64) -> Option<&RunRow> {
        self.rows
            .binary_search_by_key(&k, |r| r.k)
            .ok()
            .map(|i| &self.rows[i])
    }
}

/// Averaged trajectory over seeds. Runs that stopped early contribute their
/// last row to later iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRow {
    pub k: u64,
    pub mean_rel_error: f64,
    pub min_rel_error: f64,
    pub max_rel_error: f64,
    pub mean_bits: f64,
    pub mean_lyapunov: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRecord {
    pub rows: Vec<MonteCarloRow>,
    pub runs: Vec<RunRecord>,
}

impl MonteCarloRecord {
    fn from_runs(runs: Vec<RunRecord>) -> Self {
        let len = runs.iter().map(|r| r.rows.len()).max().unwrap_or(0);
        let mut rows = Vec::with_capacity(len);
        for idx in 0..len {
            let picked: Vec<&RunRow> = runs
                .iter()
                .map(|r| &r.rows[idx.min(r.rows.len() - 1)])
                .collect();
            let longest = runs.iter().find(|r| r.rows.len() > idx).unwrap();
            let count = picked.len() as f64;
            let errs = picked.iter().map(|r| r.rel_error);
            let lyap: Option<Vec<f64>> = picked.iter().map(|r| r.lyapunov).collect();
            rows.push(MonteCarloRow {
                k: longest.rows[idx].k,
                mean_rel_error: errs.clone().sum::<f64>() / count,
                min_rel_error: errs.clone().fold(f64::INFINITY, f64::min),
                max_rel_error: errs.fold(f64::NEG_INFINITY, f64::max),
                mean_bits: picked.iter().map(|r| r.cum_bits as f64).sum::<f64>() / count,
                mean_lyapunov: lyap.map(|v| v.iter().sum::<f64>() / count),
            });
        }
        Self { rows, runs }
    }
}

/// A configured run: problem, reference solution, compressors and steps.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: RunConfig,
    pub problem: Problem,
    pub reference: ReferenceSolution,
    pub smoothness: SmoothnessInfo,
    pub main: Vec<CompressorSpec>,
    pub strategy: Option<ShiftStrategy>,
    pub steps: StepSizes,
    /// Theorem the steps came from, if any.
    pub theorem: Option<Theorem>,
    pub omegas: Vec<f64>,
}

impl Experiment {
    pub fn prepare(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let (problem, reference) = config.problem.build()?;
        Self::with_problem(config, problem, reference)
    }

    /// Prepare on an already built problem (the `problem` block of `config`
    /// is then only used for its worker count).
    pub fn with_problem(
        config: RunConfig,
        problem: Problem,
        reference: ReferenceSolution,
    ) -> Result<Self> {
        config.validate()?;
        if problem.workers() != config.problem.workers {
            return Err(Error::Mismatch(format!(
                "problem has {} workers, config asks for {}",
                problem.workers(),
                config.problem.workers
            )));
        }
        let d = problem.dim();
        let n = problem.workers();
        let main = config.main_compressors(d)?;
        let omegas = main
            .iter()
            .map(unbiased_omega)
            .collect::<Result<Vec<_>>>()?;
        let strategy = match &config.shift {
            None => None,
            Some(s) => Some(build_strategy(s, &main, &reference, n, d)?),
        };
        if let Some(s) = &strategy {
            s.validate(&main)?;
        }
        let smoothness = problem.smoothness();
        let (steps, theorem) = resolve_steps(&config, &smoothness, &main, strategy.as_ref())?;
        Ok(Self {
            config,
            problem,
            reference,
            smoothness,
            main,
            strategy,
            steps,
            theorem,
            omegas,
        })
    }

    pub fn start_point(&self, seed: u64) -> Vector {
        let std = self.config.start.std_dev();
        let mut rng = seed_stream(seed, 0, 0, Purpose::Start);
        Vector::from_fn(self.problem.dim(), |_, _| {
            std * rng.sample::<f64, _>(StandardNormal)
        })
    }

    /// State at `k = 0`, including any setup bits.
    pub fn initial_state(&self, seed: u64) -> Result<IterateState> {
        let x0 = self.start_point(seed);
        match (&self.strategy, self.config.algorithm) {
            (Some(s), _) => {
                let (shifts, bits) = s.initial_state(&self.problem, &x0, None)?;
                Ok(IterateState::new(x0, shifts, bits))
            }
            (None, Algorithm::VrGdci) => {
                let local = vec![x0.clone(); self.problem.workers()];
                IterateState::with_iterate_shifts(x0, local)
            }
            (None, _) => Ok(IterateState::plain(x0)),
        }
    }

    /// Advance `state` by one round using the streams of `seed`.
    pub fn step(&self, state: &mut IterateState, seed: u64) -> Result<()> {
        let key = RoundKey::new(seed, state.k);
        let s = &self.steps;
        match self.config.algorithm {
            Algorithm::DcgdShift => {
                let strategy = self.strategy.as_ref().expect("validated");
                dcgd_shift_step(state, &self.problem, &self.main, strategy, s.gamma, key)
            }
            Algorithm::Gdci => gdci_step(state, &self.problem, &self.main, s.eta, s.gamma, key),
            Algorithm::VrGdci => vr_gdci_step(state, &self.problem, &self.main, s, key),
        }
    }

    /// Theorem whose Lyapunov function is tracked for this method.
    pub fn lyapunov_theorem(&self) -> Option<Theorem> {
        match (
            self.config.algorithm,
            self.strategy.as_ref().map(|s| s.kind()),
        ) {
            (Algorithm::VrGdci, _) => Some(Theorem::VrGdci),
            (Algorithm::DcgdShift, Some(ShiftKind::Diana)) => Some(Theorem::Diana),
            (Algorithm::DcgdShift, Some(ShiftKind::RandDiana)) => Some(Theorem::RandDiana),
            _ => None,
        }
    }

    pub fn lyapunov(&self, state: &IterateState) -> Result<Option<f64>> {
        match self.lyapunov_theorem() {
            None => Ok(None),
            Some(t) => lyapunov(
                t,
                &state.x,
                &state.shifts,
                &self.reference,
                &self.steps,
                &self.omegas,
            )
            .map(Some),
        }
    }

    /// Run with the configured master seed.
    pub fn run(&self) -> Result<RunRecord> {
        self.run_seed(self.config.seed)
    }

    pub fn run_seed(&self, seed: u64) -> Result<RunRecord> {
        let cfg = &self.config;
        let mut state = self.initial_state(seed)?;
        let x_star = &self.reference.x_star;
        let initial_dist_sq = (&state.x - x_star).norm_squared();
        let denom = if initial_dist_sq > 0.0 {
            initial_dist_sq
        } else {
            1.0
        };
        let row = |state: &IterateState| -> Result<RunRow> {
            Ok(RunRow {
                k: state.k,
                rel_error: (&state.x - x_star).norm_squared() / denom,
                cum_bits: state.bits,
                lyapunov: self.lyapunov(state)?,
            })
        };
        let mut current = row(&state)?;
        let mut rows = vec![current];
        let mut hit = (current.rel_error <= cfg.eps).then_some(current);
        let status = loop {
            if hit.is_some() {
                break RunStatus::Converged;
            }
            if !current.rel_error.is_finite() || current.rel_error > DIVERGENCE_THRESHOLD {
                log::warn!(
                    "seed {seed}: relative error {:e} at k = {} exceeds {DIVERGENCE_THRESHOLD:e}",
                    current.rel_error,
                    current.k
                );
                break RunStatus::Diverged;
            }
            if state.k >= cfg.budget.iterations || cfg.budget.bits.is_some_and(|b| state.bits >= b)
            {
                break RunStatus::BudgetExhausted;
            }
            self.step(&mut state, seed)?;
            current = row(&state)?;
            if current.rel_error <= cfg.eps {
                hit = Some(current);
            }
            if state.k % cfg.record_every == 0 {
                rows.push(current);
            }
        };
        if rows.last().map(|r| r.k) != Some(current.k) {
            rows.push(current);
        }
        Ok(RunRecord {
            seed,
            rows,
            status,
            bits_to_eps: hit.map(|r| r.cum_bits),
            iters_to_eps: hit.map(|r| r.k),
            initial_dist_sq,
            steps: self.steps,
        })
    }

    /// Run `config.seeds` seeds in parallel. Seed `s` uses
    /// `child_seed(config.seed, s)`, so a single seed reproduces [`run`].
    ///
    /// [`run`]: Experiment::run
    pub fn run_monte_carlo(&self) -> Result<MonteCarloRecord> {
        self.run_monte_carlo_n(self.config.seeds)
    }

    pub fn run_monte_carlo_n(&self, n_seeds: usize) -> Result<MonteCarloRecord> {
        if n_seeds == 0 {
            return Err(Error::InvalidArgument("need at least one seed".into()));
        }
        let runs = (0..n_seeds as u64)
            .into_par_iter()
            .map(|s| self.run_seed(child_seed(self.config.seed, s)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MonteCarloRecord::from_runs(runs))
    }
}

fn build_strategy(
    cfg: &ShiftConfig,
    main: &[CompressorSpec],
    reference: &ReferenceSolution,
    n: usize,
    d: usize,
) -> Result<ShiftStrategy> {
    let inner = || -> Result<Vec<CompressorSpec>> { Ok(vec![cfg.inner.build(d)?; n]) };
    let unused = |what: &str| {
        Err(Error::InvalidArgument(format!(
            "{what} does not apply to {:?} shifts",
            cfg.kind
        )))
    };
    match cfg.kind {
        ShiftKind::Fixed => {
            if cfg.alpha.is_some() {
                return unused("alpha");
            }
            if cfg.p.is_some() {
                return unused("p");
            }
            ShiftStrategy::fixed(n, d)
        }
        ShiftKind::Star => {
            if cfg.p.is_some() {
                return unused("p");
            }
            ShiftStrategy::star(inner()?, reference)
        }
        ShiftKind::Diana => {
            if cfg.p.is_some() {
                return unused("p");
            }
            let inner = inner()?;
            let alpha = match cfg.alpha {
                Some(a) => a,
                None => ShiftStrategy::max_alpha(main, &inner)?,
            };
            ShiftStrategy::diana(inner, alpha)
        }
        ShiftKind::RandDiana => {
            if cfg.alpha.is_some() {
                return unused("alpha");
            }
            let probs = match cfg.p {
                Some(p) => vec![p; n],
                None => ShiftStrategy::default_probs(main)?,
            };
            ShiftStrategy::rand_diana(probs, d)
        }
    }
}

fn resolve_steps(
    cfg: &RunConfig,
    smooth: &SmoothnessInfo,
    main: &[CompressorSpec],
    strategy: Option<&ShiftStrategy>,
) -> Result<(StepSizes, Option<Theorem>)> {
    let sc = &cfg.steps;
    let multiplier = sc.multiplier.unwrap_or(1.0);
    if !(multiplier > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step multiplier {multiplier} must be positive"
        )));
    }
    if sc.m.is_some() && sc.m_factor.is_some() {
        return Err(Error::InvalidArgument(
            "give either m or m_factor, not both".into(),
        ));
    }
    let strategy_alpha = strategy.map_or(0.0, |s| s.alpha());
    let (mut steps, theorem) = if let Some(gamma) = sc.gamma {
        if sc.theorem.is_some() {
            return Err(Error::InvalidArgument(
                "give either an explicit gamma or a theorem".into(),
            ));
        }
        let alpha = match cfg.algorithm {
            Algorithm::VrGdci => sc.alpha.ok_or_else(|| {
                Error::InvalidArgument("vr_gdci with explicit steps needs alpha".into())
            })?,
            _ => strategy_alpha,
        };
        let steps = StepSizes {
            gamma,
            eta: sc.eta.unwrap_or(1.0),
            alpha,
            m: sc.m.unwrap_or(0.0),
        };
        (steps, None)
    } else {
        let theorem = match sc.theorem {
            Some(id) => Theorem::try_from(id).map_err(Error::InvalidArgument)?,
            None => cfg.default_theorem(),
        };
        if theorem != cfg.default_theorem() {
            return Err(Error::Mismatch(format!(
                "theorem {} does not describe this method (expected {})",
                theorem.id(),
                cfg.default_theorem().id()
            )));
        }
        if sc.eta.is_some() {
            return Err(Error::InvalidArgument(
                "eta is set by the theorem; give an explicit gamma to override it".into(),
            ));
        }
        let mut inputs = TheoremInputs::from_parts(main, strategy)?;
        if theorem == Theorem::VrGdci {
            inputs.alpha = sc.alpha;
        } else if sc.alpha.is_some() {
            return Err(Error::InvalidArgument(
                "steps.alpha applies to vr_gdci; set shift.alpha instead".into(),
            ));
        }
        inputs.m = match (sc.m, sc.m_factor) {
            (Some(m), _) => Some(m),
            (None, Some(b)) => Some(b * m_floor(theorem, &inputs)?),
            (None, None) => None,
        };
        (auto_stepsizes(theorem, smooth, &inputs)?, Some(theorem))
    };
    steps.gamma *= multiplier;
    if sc.cap_gdci && cfg.algorithm == Algorithm::Gdci {
        steps.gamma = steps.gamma.min(2.0 / (smooth.l + smooth.mu));
    }
    Ok((steps, theorem))
}

/// Lower limit on the Lyapunov weight `M` in the theorems that use one.
pub fn m_floor(theorem: Theorem, inputs: &TheoremInputs) -> Result<f64> {
    let n = inputs.omegas.len() as f64;
    match theorem {
        Theorem::Diana => {
            let alpha = inputs.alpha.ok_or_else(|| {
                Error::InvalidArgument("the M floor of learned shifts needs alpha".into())
            })?;
            Ok(2.0 / (n * alpha))
        }
        Theorem::RandDiana => {
            let omega = inputs.omegas.iter().copied().fold(0.0, f64::max);
            let p = inputs.probs.iter().copied().fold(1.0, f64::min);
            Ok(2.0 * omega / (n * p))
        }
        other => Err(Error::Mismatch(format!(
            "theorem {} has no Lyapunov weight",
            other.id()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(
        algorithm: Algorithm,
        shift: Option<ShiftKind>,
        compressor: CompressorConfig,
    ) -> RunConfig {
        RunConfig {
            problem: ProblemConfig {
                loss: LossKind::Ridge,
                data: DataSource::Synthetic {
                    rows: 40,
                    dim: 8,
                    informative: Some(4),
                    noise: 1.0,
                    seed: 3,
                },
                workers: 4,
                lambda: Some(0.5),
                condition_number: None,
                shard_seed: 1,
                reference_tol: 1e-30,
            },
            algorithm,
            compressor,
            worker_compressors: None,
            shift: shift.map(|kind| ShiftConfig {
                kind,
                inner: CompressorConfig::Zero,
                alpha: None,
                p: None,
            }),
            steps: StepConfig::default(),
            budget: Budget {
                iterations: 50_000,
                bits: None,
            },
            eps: 1e-10,
            seed: 5,
            seeds: 1,
            start: StartConfig::default(),
            record_every: 1,
        }
    }

    fn rand_k() -> CompressorConfig {
        CompressorConfig::RandK {
            k: Some(2),
            q: None,
        }
    }

    #[test]
    fn gradient_descent_reduction_meets_classical_bound() {
        let cfg = small(
            Algorithm::DcgdShift,
            Some(ShiftKind::Fixed),
            CompressorConfig::Identity,
        );
        let e = Experiment::prepare(cfg).unwrap();
        assert_eq!(e.steps.gamma, 1.0 / e.smoothness.l);
        let rec = e.run().unwrap();
        assert_eq!(rec.status, RunStatus::Converged);
        let bound = e.smoothness.kappa() * (1e10f64).ln() * 2.0;
        assert!((rec.iters_to_eps.unwrap() as f64) <= bound);
        assert_eq!(rec.rows[0].rel_error, 1.0);
        assert!(rec.last().rel_error <= 1e-10);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = small(Algorithm::DcgdShift, Some(ShiftKind::Diana), rand_k());
        let e = Experiment::prepare(cfg.clone()).unwrap();
        let a = e.run().unwrap();
        let b = Experiment::prepare(cfg).unwrap().run().unwrap();
        assert_eq!(a, b);
        assert!(a.rows.windows(2).all(|w| w[0].cum_bits <= w[1].cum_bits));
    }

    #[test]
    fn fixed_shifts_plateau_while_learned_shifts_converge() {
        let mut fixed = small(Algorithm::DcgdShift, Some(ShiftKind::Fixed), rand_k());
        fixed.budget.iterations = 20_000;
        let rec = Experiment::prepare(fixed).unwrap().run().unwrap();
        assert_eq!(rec.status, RunStatus::BudgetExhausted);
        assert!(rec.last().rel_error > 1e-8);
        let diana = small(Algorithm::DcgdShift, Some(ShiftKind::Diana), rand_k());
        let rec = Experiment::prepare(diana).unwrap().run().unwrap();
        assert_eq!(rec.status, RunStatus::Converged);
    }

    #[test]
    fn single_seed_monte_carlo_is_the_run() {
        let cfg = small(Algorithm::DcgdShift, Some(ShiftKind::RandDiana), rand_k());
        let e = Experiment::prepare(cfg).unwrap();
        let run = e.run().unwrap();
        let mc = e.run_monte_carlo_n(1).unwrap();
        assert_eq!(mc.runs, vec![run.clone()]);
        for (r, m) in run.rows.iter().zip(&mc.rows) {
            assert_eq!(m.mean_rel_error, r.rel_error);
            assert_eq!(m.min_rel_error, m.max_rel_error);
            assert_eq!(m.mean_lyapunov, r.lyapunov);
        }
        assert!(e.run_monte_carlo_n(0).is_err());
    }

    #[test]
    fn averaged_star_curve_respects_the_linear_rate() {
        let mut cfg = small(Algorithm::DcgdShift, Some(ShiftKind::Star), rand_k());
        cfg.budget.iterations = 60;
        cfg.eps = 1e-300;
        let e = Experiment::prepare(cfg).unwrap();
        let mc = e.run_monte_carlo_n(200).unwrap();
        let rate = 1.0 - e.steps.gamma * e.smoothness.mu;
        for row in &mc.rows {
            assert!(
                row.mean_rel_error <= 1.1 * rate.powi(row.k as i32),
                "k = {}",
                row.k
            );
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = small(
            Algorithm::DcgdShift,
            Some(ShiftKind::Fixed),
            CompressorConfig::Identity,
        );
        cfg.steps.gamma = Some(1.0);
        let rec = Experiment::prepare(cfg).unwrap().run().unwrap();
        assert_eq!(rec.status, RunStatus::Diverged);
        assert!(rec.last().rel_error > DIVERGENCE_THRESHOLD);
    }

    #[test]
    fn budgets_stop_runs() {
        let mut cfg = small(Algorithm::Gdci, None, rand_k());
        cfg.budget = Budget {
            iterations: 1000,
            bits: Some(10_000),
        };
        let rec = Experiment::prepare(cfg).unwrap().run().unwrap();
        assert_eq!(rec.status, RunStatus::BudgetExhausted);
        let last = rec.last();
        assert!(last.cum_bits >= 10_000 && last.k < 1000);
    }

    #[test]
    fn sparse_recording_keeps_the_last_row() {
        let mut cfg = small(Algorithm::VrGdci, None, rand_k());
        cfg.record_every = 1000;
        let rec = Experiment::prepare(cfg).unwrap().run().unwrap();
        assert!(rec
            .rows
            .iter()
            .skip(1)
            .rev()
            .skip(1)
            .all(|r| r.k % 1000 == 0));
        assert_eq!(Some(rec.last().k), rec.iters_to_eps);
        assert!(rec.rows.iter().all(|r| r.lyapunov.is_some()));
    }

    #[test]
    fn start_scale_reads_as_deviation_or_variance() {
        let mut cfg = small(Algorithm::Gdci, None, rand_k());
        let sd = Experiment::prepare(cfg.clone()).unwrap().start_point(9);
        cfg.start.variance = true;
        let var = Experiment::prepare(cfg).unwrap().start_point(9);
        assert!(((&sd / 10.0) - (&var / 10f64.sqrt())).amax() < 1e-12);
    }

    #[test]
    fn config_errors() {
        let mut cfg = small(Algorithm::DcgdShift, None, rand_k());
        assert!(Experiment::prepare(cfg.clone()).is_err());
        cfg.shift = Some(ShiftConfig {
            kind: ShiftKind::Diana,
            inner: CompressorConfig::Zero,
            alpha: None,
            p: Some(0.5),
        });
        assert!(Experiment::prepare(cfg.clone()).is_err());
        let mut cfg = small(Algorithm::Gdci, None, rand_k());
        cfg.eps = 0.0;
        assert!(Experiment::prepare(cfg.clone()).is_err());
        cfg.eps = 1e-6;
        cfg.steps.theorem = Some(3);
        assert!(matches!(
            Experiment::prepare(cfg.clone()),
            Err(Error::Mismatch(_))
        ));
        cfg.steps.theorem = None;
        cfg.worker_compressors = Some(vec![rand_k(); 3]);
        assert!(Experiment::prepare(cfg).is_err());
    }

    #[test]
    fn m_factor_scales_the_floor() {
        let mut cfg = small(Algorithm::DcgdShift, Some(ShiftKind::RandDiana), rand_k());
        cfg.steps.m_factor = Some(0.1);
        let e = Experiment::prepare(cfg).unwrap();
        // Rand-2 of 8 coordinates: omega = 3, p = 1/4, n = 4.
        assert!((e.steps.m - 0.1 * 2.0 * 3.0 / (4.0 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn gdci_cap_limits_gamma() {
        let mut cfg = small(Algorithm::Gdci, None, rand_k());
        let free = Experiment::prepare(cfg.clone()).unwrap();
        cfg.steps.cap_gdci = true;
        let capped = Experiment::prepare(cfg).unwrap();
        let cap = 2.0 / (free.smoothness.l + free.smoothness.mu);
        assert_eq!(capped.steps.gamma, free.steps.gamma.min(cap));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bits_to_eps_is_monotone(errors in prop::collection::vec(0.0f64..2.0, 1..40), a in 1e-3f64..1.0, b in 1e-3f64..1.0) {
            let rows = errors
                .iter()
                .enumerate()
                .map(|(k, &e)| RunRow { k: k as u64, rel_error: e, cum_bits: 10 * k as u64, lyapunov: None })
                .collect();
            let rec = RunRecord {
                seed: 0,
                rows,
                status: RunStatus::BudgetExhausted,
                bits_to_eps: None,
                iters_to_eps: None,
                initial_dist_sq: 1.0,
                steps: StepSizes::gradient_only(1.0),
            };
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            match (rec.bits_to(lo), rec.bits_to(hi)) {
                (Some(x), Some(y)) => prop_assert!(y <= x),
                (Some(_), None) => prop_assert!(false),
                _ => {}
            }
        }
    }
}
