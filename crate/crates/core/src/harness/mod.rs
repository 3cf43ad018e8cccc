//! Randomized positivity stress, CSV / SVG output and the command-line
//! front end.

mod cli;
mod output;

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector4;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{hamiltonian_full, Integrator};
use crate::error::{Error, Result};
use crate::linalg::{hermitize, Op4, C64};
use crate::metrics::{self, MetricsRecord};
use crate::protocol::{ProtocolConfig, SweepRecord};
use crate::state::{DensityMatrix, POSITIVITY_FLOOR};

pub use cli::{cli_main, thread_pool, RunConfig, THREADS_ENV};
pub use output::{emit_csv, emit_plot, trajectory_records, write_csv, CsvSource, Plot, CSV_HEADER};

/// Name of the random generator, recorded in seeded outputs.
pub const GENERATOR: &str = "ChaCha20";
pub const STRESS_HORIZON: f64 = 1500.0;
pub const STRESS_SAMPLE_INTERVAL: f64 = 2.0;

/// How random initial states are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    /// GG†/Tr(GG†) with G a 4×4 complex Ginibre matrix.
    #[default]
    GinibreMixed,
    /// Haar-random pure state.
    PureHaar,
    /// k ∈ {1..4} Haar pure states with flat Dirichlet weights.
    RankedMixture,
}

impl SamplingMethod {
    pub fn label(self) -> &'static str {
        match self {
            SamplingMethod::GinibreMixed => "ginibre-mixed",
            SamplingMethod::PureHaar => "pure-haar",
            SamplingMethod::RankedMixture => "ranked-mixture",
        }
    }
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_lowercase();
        match key.as_str() {
            "ginibremixed" | "ginibre" => Ok(SamplingMethod::GinibreMixed),
            "purehaar" | "pure" => Ok(SamplingMethod::PureHaar),
            "rankedmixture" | "ranked" => Ok(SamplingMethod::RankedMixture),
            _ => Err(Error::invalid(format!("unknown sampling method '{s}'"))),
        }
    }
}

/// Independent stream `case` of the generator seeded with `seed`. Streams do
/// not depend on how cases are scheduled across threads.
pub fn case_rng(seed: u64, case: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(case);
    rng
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn haar_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector4<C64> {
    loop {
        let v = Vector4::from_fn(|_, _| complex_normal(rng));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / C64::new(norm, 0.0);
        }
    }
}

pub fn random_density_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    method: SamplingMethod,
) -> DensityMatrix {
    let m = match method {
        SamplingMethod::GinibreMixed => {
            let g = Op4::from_fn(|_, _| complex_normal(rng));
            g * g.adjoint()
        }
        SamplingMethod::PureHaar => {
            let v = haar_vector(rng);
            v * v.adjoint()
        }
        SamplingMethod::RankedMixture => {
            let k = rng.random_range(1..=4usize);
            let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random::<f64>()).collect();
            cuts.push(0.0);
            cuts.push(1.0);
            cuts.sort_by(f64::total_cmp);
            cuts.windows(2).fold(Op4::zeros(), |acc, w| {
                let v = haar_vector(rng);
                acc + v * v.adjoint() * C64::new(w[1] - w[0], 0.0)
            })
        }
    };
    let m = hermitize(&m);
    let tr = m.trace().re;
    DensityMatrix::from_raw(m / C64::new(tr, 0.0))
}

/// Parameters of a positivity stress run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StressOptions {
    pub n: usize,
    pub seed: u64,
    pub method: SamplingMethod,
    /// Integration horizon (ns).
    pub t_end: f64,
    /// Spacing of stored samples (ns).
    pub sample_interval: f64,
}

impl StressOptions {
    pub fn new(n: usize, seed: u64) -> Self {
        StressOptions {
            n,
            seed,
            method: SamplingMethod::default(),
            t_end: STRESS_HORIZON,
            sample_interval: STRESS_SAMPLE_INTERVAL,
        }
    }

    /// The seeded initial states, in case order.
    pub fn draw(&self) -> Vec<DensityMatrix> {
        (0..self.n as u64)
            .map(|k| random_density_matrix(&mut case_rng(self.seed, k), self.method))
            .collect()
    }
}

/// One integrated random case.
#[derive(Clone, Debug)]
pub struct StressCase {
    pub initial: DensityMatrix,
    pub purity0: f64,
    pub times: Vec<f64>,
    /// Ascending spectrum at each sample.
    pub eigenvalues: Vec<[f64; 4]>,
    pub metrics: Vec<MetricsRecord>,
    /// Smallest eigenvalue seen at any integration step.
    pub min_eigenvalue: f64,
}

impl StressCase {
    pub fn concurrence_series(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.concurrence).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StressFailure {
    pub case: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct StressReport {
    pub n_cases: usize,
    /// Seed and method when the initial states were drawn at random.
    pub origin: Option<(u64, SamplingMethod)>,
    pub d_eps: f64,
    pub cases: Vec<StressCase>,
    /// Minimum over all cases, steps and eigenvalues. A case whose
    /// integration failed without reporting a spectrum counts as −∞.
    pub global_min_eigenvalue: f64,
    pub failures: Vec<StressFailure>,
}

impl StressReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Per-sample rows of every case, in case order.
    pub fn records(&self) -> Vec<SweepRecord> {
        self.cases
            .iter()
            .flat_map(|c| {
                c.times.iter().zip(&c.metrics).map(|(&tau, m)| SweepRecord {
                    tau,
                    d_eps: self.d_eps,
                    metrics: *m,
                })
            })
            .collect()
    }

    /// Header comment identifying the random stream.
    pub fn provenance(&self) -> Option<String> {
        self.origin.map(|(seed, method)| {
            format!(
                "generator={GENERATOR} seed={seed} method={method} cases={}",
                self.n_cases
            )
        })
    }
}

/// Draws `opts.n` seeded initial states and integrates each under the full
/// CPHASE Hamiltonian with the dynamics and parameters of `cfg`.
pub fn positivity_stress(opts: &StressOptions, cfg: &ProtocolConfig) -> Result<StressReport> {
    if opts.n == 0 {
        return Err(Error::invalid("stress run needs at least one case"));
    }
    let mut report = stress_from_states(&opts.draw(), cfg, opts.t_end, opts.sample_interval)?;
    report.origin = Some((opts.seed, opts.method));
    Ok(report)
}

/// Stress run over explicit initial states.
pub fn stress_from_states(
    states: &[DensityMatrix],
    cfg: &ProtocolConfig,
    t_end: f64,
    sample_interval: f64,
) -> Result<StressReport> {
    if states.is_empty() {
        return Err(Error::invalid("stress run needs at least one case"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) || !(sample_interval > 0.0) {
        return Err(Error::invalid(
            "stress horizon and sampling interval must be positive",
        ));
    }
    cfg.validate()?;
    cfg.params.validate(cfg.dynamics)?;
    let h = hamiltonian_full(&cfg.params);
    let integrator = Integrator::new(cfg.dynamics, cfg.dt_max).sample_every(sample_interval);

    let outcomes: Vec<(StressCase, Option<String>)> = states
        .par_iter()
        .map(|rho0| {
            let mut case = StressCase {
                initial: *rho0,
                purity0: metrics::purity(rho0),
                times: Vec::new(),
                eigenvalues: Vec::new(),
                metrics: Vec::new(),
                min_eigenvalue: f64::NEG_INFINITY,
            };
            let traj = match integrator.run(rho0, &h, &cfg.params, (0.0, t_end)) {
                Ok(t) => t,
                Err(Error::PositivityViolation { time, eigenvalues }) => {
                    case.min_eigenvalue = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                    return (
                        case,
                        Some(format!(
                            "positivity lost at t = {time:?} ns: {eigenvalues:?}"
                        )),
                    );
                }
                Err(e) => return (case, Some(e.to_string())),
            };
            case.min_eigenvalue = traj.min_eigenvalue();
            for (t, rho) in traj.samples() {
                let m = match MetricsRecord::evaluate(rho, cfg.dynamics, &h, &cfg.params) {
                    Ok(m) => m,
                    Err(e) => return (case, Some(format!("at t = {t} ns: {e}"))),
                };
                case.times.push(t);
                case.eigenvalues.push(rho.spectrum());
                case.metrics.push(m);
            }
            if case.min_eigenvalue < POSITIVITY_FLOOR {
                let msg = format!("minimum eigenvalue {:e}", case.min_eigenvalue);
                return (case, Some(msg));
            }
            (case, None)
        })
        .collect();

    let mut cases = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (k, (case, failure)) in outcomes.into_iter().enumerate() {
        if let Some(message) = failure {
            failures.push(StressFailure { case: k, message });
        }
        cases.push(case);
    }
    let global_min_eigenvalue = cases
        .iter()
        .map(|c| c.min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    Ok(StressReport {
        n_cases: states.len(),
        origin: None,
        d_eps: cfg.params.d_eps,
        cases,
        global_min_eigenvalue,
        failures,
    })
}
