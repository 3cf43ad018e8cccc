use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::output::{emit_csv, emit_plot, trajectory_records, CsvSource, Plot};
use super::{positivity_stress, SamplingMethod, StressOptions, STRESS_HORIZON};
use crate::dynamics::{mhz_to_rad_per_ns, RhsKind};
use crate::error::{Error, Result};
use crate::protocol::{
    calibrate, default_tau_d, fermi_transition_time, refined_fidelity_maxima, run_cphase,
    sweep_deps, tau_grid, CalibrationTable, ProtocolConfig, SweepRecord, DEFAULT_DT_MAX,
};

/// Caps the width of the parallel map; 0 or unset uses every core.
pub const THREADS_ENV: &str = "SEAQT_SIM_THREADS";

const DEFAULT_TAU_MAX: f64 = 1400.0;
const DEFAULT_TAU_STEPS: usize = 140;
const DEFAULT_DEPS: f64 = 80.0;
const DEFAULT_DEPS_SWEEP: [f64; 3] = [-20.0, 80.0, 100.0];
const DEFAULT_STRESS_CASES: usize = 1000;

#[derive(Parser, Debug)]
#[command(
    name = "seaqt-sim",
    version,
    about = "Two-qubit CPHASE gate under steepest-entropy-ascent, Lindblad and von Neumann dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One gate execution; dumps the full trajectory.
    SingleRun,
    /// Sweep of the gate duration at each detuning.
    SweepTau,
    /// Sweep of the gate duration over several detunings.
    SweepEps,
    /// Random initial states integrated to check positivity.
    StressPositivity,
    /// Golden-rule transition time and default dissipative time.
    Fermi {
        #[arg(long)]
        j12_mhz: Option<f64>,
    },
}

#[derive(clap::Args, Debug)]
struct Flags {
    /// JSON object whose keys are flag names with '-' replaced by '_'.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// seaqt, lindblad or vonneumann.
    #[arg(long, global = true)]
    dynamics: Option<RhsKind>,
    #[arg(long, global = true)]
    tau_max: Option<f64>,
    #[arg(long, global = true)]
    tau_steps: Option<usize>,
    /// Gate duration of single-run (ns); defaults to π/J12.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Detuning in μV; repeatable.
    #[arg(long, global = true, action = ArgAction::Append, allow_negative_numbers = true)]
    deps: Vec<f64>,
    /// JSON list of {d_eps, j12, tau_d?, gamma_lambda?} nodes.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    /// ginibre-mixed, pure-haar or ranked-mixture.
    #[arg(long, global = true)]
    method: Option<SamplingMethod>,
    /// Stress horizon (ns).
    #[arg(long, global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    dt_max: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
}

/// Run settings from the config file and the command line; unset fields take
/// per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dynamics: Option<RhsKind>,
    pub tau_max: Option<f64>,
    pub tau_steps: Option<usize>,
    pub tau: Option<f64>,
    pub deps: Option<Vec<f64>>,
    pub calibration: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub method: Option<SamplingMethod>,
    pub t_end: Option<f64>,
    pub dt_max: Option<f64>,
    pub out: Option<PathBuf>,
    pub plot: Option<bool>,
    pub j12_mhz: Option<f64>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("config file: {e}")))
    }

    /// Fields set in `over` replace those of `self`.
    pub fn overridden_by(self, over: RunConfig) -> RunConfig {
        RunConfig {
            dynamics: over.dynamics.or(self.dynamics),
            tau_max: over.tau_max.or(self.tau_max),
            tau_steps: over.tau_steps.or(self.tau_steps),
            tau: over.tau.or(self.tau),
            deps: over.deps.or(self.deps),
            calibration: over.calibration.or(self.calibration),
            seed: over.seed.or(self.seed),
            n: over.n.or(self.n),
            method: over.method.or(self.method),
            t_end: over.t_end.or(self.t_end),
            dt_max: over.dt_max.or(self.dt_max),
            out: over.out.or(self.out),
            plot: over.plot.or(self.plot),
            j12_mhz: over.j12_mhz.or(self.j12_mhz),
        }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn table(&self) -> Result<CalibrationTable> {
        match &self.calibration {
            Some(path) => CalibrationTable::from_json_file(path),
            None => Ok(CalibrationTable::shulman_default()),
        }
    }

    fn protocol(&self, d_eps: f64, table: &CalibrationTable) -> Result<ProtocolConfig> {
        let mut cfg = ProtocolConfig::new(
            self.dynamics.unwrap_or(RhsKind::Seaqt),
            calibrate(d_eps, table)?,
        );
        cfg.dt_max = self.dt_max.unwrap_or(DEFAULT_DT_MAX);
        cfg.validate()?;
        Ok(cfg)
    }

    fn taus(&self) -> Result<Vec<f64>> {
        let tau_max = self.tau_max.unwrap_or(DEFAULT_TAU_MAX);
        let steps = self.tau_steps.unwrap_or(DEFAULT_TAU_STEPS);
        if !(tau_max > 0.0 && tau_max.is_finite()) || steps == 0 {
            return Err(Error::invalid(
                "--tau-max must be positive and --tau-steps at least 1",
            ));
        }
        Ok(tau_grid(tau_max, steps))
    }
}

impl Flags {
    fn into_config(self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::from_json_str(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            dynamics: self.dynamics,
            tau_max: self.tau_max,
            tau_steps: self.tau_steps,
            tau: self.tau,
            deps: (!self.deps.is_empty()).then_some(self.deps),
            calibration: self.calibration,
            seed: self.seed,
            n: self.n,
            method: self.method,
            t_end: self.t_end,
            dt_max: self.dt_max,
            out: self.out,
            plot: self.plot.then_some(true),
            j12_mhz: None,
        };
        Ok(file.overridden_by(flags))
    }
}

/// Rayon pool sized by `SEAQT_SIM_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("{THREADS_ENV} must be a count, got '{v}'")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 success, 1 usage, 2 numerical failure, 3 I/O.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = thread_pool().and_then(|pool| pool.install(|| run(cli)));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                3
            } else if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = cli.flags.into_config()?;
    match cli.command {
        Command::Fermi { j12_mhz } => {
            cfg.j12_mhz = j12_mhz.or(cfg.j12_mhz);
            fermi(&cfg)
        }
        Command::SingleRun => single_run(&cfg),
        Command::SweepTau => sweep(&cfg, &[DEFAULT_DEPS], "sweep_tau"),
        Command::SweepEps => sweep(&cfg, &DEFAULT_DEPS_SWEEP, "sweep_eps"),
        Command::StressPositivity => stress(&cfg),
    }
}

fn fermi(cfg: &RunConfig) -> Result<i32> {
    let mhz = cfg
        .j12_mhz
        .ok_or_else(|| Error::invalid("fermi needs --j12-mhz"))?;
    let j12 = mhz_to_rad_per_ns(mhz);
    println!("t_ij = {:.4} ns", fermi_transition_time(j12)?);
    println!("tau_D = {:.4} ns", default_tau_d(j12)?);
    Ok(0)
}

fn first_deps(cfg: &RunConfig) -> f64 {
    cfg.deps
        .as_ref()
        .and_then(|d| d.first().copied())
        .unwrap_or(DEFAULT_DEPS)
}

fn plots(records: &[SweepRecord], dir: &Path, stem: &str) -> Result<()> {
    emit_plot(
        &Plot::Fidelity(records),
        &dir.join(format!("{stem}_fidelity.svg")),
    )?;
    emit_plot(
        &Plot::Entropy(records),
        &dir.join(format!("{stem}_entropy.svg")),
    )
}

fn single_run(cfg: &RunConfig) -> Result<i32> {
    let table = cfg.table()?;
    let pc = cfg.protocol(first_deps(cfg), &table)?;
    let tau = cfg.tau.unwrap_or(std::f64::consts::PI / pc.params.j12);
    let run = run_cphase(tau, &pc)?;
    let trajectory = run.stitched();
    let records = trajectory_records(&trajectory, &pc)?;
    let dir = cfg.out_dir()?;
    let path = dir.join("single_run.csv");
    emit_csv(CsvSource::Records(&records), &path)?;
    if cfg.plot.unwrap_or(false) {
        plots(&records, &dir, "single_run")?;
    }
    let last = records.last().expect("trajectory holds its initial state");
    println!(
        "tau = {tau:.4} ns: concurrence {:.6}, fidelity {:.6}, entropy {:.6} kB ({} samples in {})",
        last.metrics.concurrence,
        last.metrics.fidelity,
        last.metrics.entropy,
        records.len(),
        path.display()
    );
    Ok(0)
}

fn sweep(cfg: &RunConfig, default_deps: &[f64], stem: &str) -> Result<i32> {
    let table = cfg.table()?;
    let deps = cfg.deps.clone().unwrap_or_else(|| default_deps.to_vec());
    let taus = cfg.taus()?;
    let pc = cfg.protocol(deps[0], &table)?;
    let result = sweep_deps(&pc, &table, &deps, &taus)?;
    let records: Vec<SweepRecord> = result.records().copied().collect();
    let dir = cfg.out_dir()?;
    let path = dir.join(format!("{stem}.csv"));
    emit_csv(CsvSource::Records(&records), &path)?;
    if cfg.plot.unwrap_or(false) {
        plots(&records, &dir, stem)?;
    }
    println!("{} rows in {}", records.len(), path.display());
    for (d, row) in result.d_eps.iter().zip(&result.rows) {
        let row_cfg = ProtocolConfig {
            params: calibrate(*d, &table)?,
            ..pc
        };
        let maxima = refined_fidelity_maxima(&row_cfg, row)?;
        let listed: Vec<String> = maxima
            .iter()
            .map(|(t, f)| format!("{f:.6} @ {t:.2} ns"))
            .collect();
        println!("{d} uV fidelity maxima: {}", listed.join(", "));
    }
    Ok(0)
}

fn stress(cfg: &RunConfig) -> Result<i32> {
    let table = cfg.table()?;
    let pc = cfg.protocol(first_deps(cfg), &table)?;
    let mut opts = StressOptions::new(cfg.n.unwrap_or(DEFAULT_STRESS_CASES), cfg.seed.unwrap_or(0));
    opts.method = cfg.method.unwrap_or_default();
    opts.t_end = cfg.t_end.unwrap_or(STRESS_HORIZON);
    let report = positivity_stress(&opts, &pc)?;
    let dir = cfg.out_dir()?;
    let path = dir.join("stress.csv");
    let written = emit_csv(CsvSource::Stress(&report), &path);
    if cfg.plot.unwrap_or(false) {
        emit_plot(
            &Plot::EigenvalueFan(&report),
            &dir.join("stress_eigenvalues.svg"),
        )?;
    }
    println!(
        "{} cases, {} failures, global minimum eigenvalue {:e}",
        report.n_cases,
        report.failures.len(),
        report.global_min_eigenvalue
    );
    for f in &report.failures {
        eprintln!("case {}: {}", f.case, f.message);
    }
    written?;
    Ok(if report.passed() { 0 } else { 2 })
}
