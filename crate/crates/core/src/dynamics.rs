//! Hamiltonians, equation-of-motion right-hand sides and time integration.
//!
//! Units: ħ = 1, time in ns, angular frequencies in rad/ns.
//!
//! The steepest-entropy-ascent equation for the two-qubit composite is
//!
//! ```text
//! dρ/dt = −i[H, ρ] − (1/τ_D1) D_1 ⊗ ρ_2 − (1/τ_D2) ρ_1 ⊗ D_2
//! ```
//!
//! where each local dissipator `D_J = ½(√ρ_J D̃_J + h.c.)` and `D̃_J` is the
//! ratio of the 3×3 Gram determinant built from `(B ln ρ)^J`, `(I)^J`, `(H)^J`
//! (first row carrying the operators premultiplied by √ρ_J) to the 2×2 Gram
//! determinant of the constraint pair `{I, H}`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, commutator_flow, herm_eig, hs_inner, identity2, kron, local_observable, log_on_range,
    mat_sqrt_psd, partial_trace, sigma_x, sigma_z, Op2, Op4, Qubit, SpectralDecomposition, C64,
    RANGE_CUTOFF,
};
use crate::state::DensityMatrix;

/// Gram determinants of the constraint pair below this magnitude are degenerate.
pub const GRAM_DEGENERACY_THRESHOLD: f64 = 1e-24;
/// Integration aborts once a state eigenvalue drops below this.
pub const POSITIVITY_ABORT: f64 = -1e-8;
/// Fixed steps per period of the fastest frequency scale.
pub const STEPS_PER_FAST_PERIOD: f64 = 50.0;

pub const SHULMAN_J1_MHZ: f64 = 280.0;
pub const SHULMAN_J2_MHZ: f64 = 320.0;
pub const SHULMAN_DBZ_MHZ: f64 = 30.0;

/// Converts a frequency quoted as f/2π in MHz to rad/ns.
pub fn mhz_to_rad_per_ns(f_mhz: f64) -> f64 {
    TAU * f_mhz * 1e-3
}

/// Physical configuration of the gate.
///
/// Frequencies are angular (rad/ns), times in ns. An infinite dissipative time
/// switches the corresponding SEAQT relaxation term off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub j1: f64,
    pub j2: f64,
    pub j12: f64,
    pub dbz1: f64,
    pub dbz2: f64,
    pub tau_d1: f64,
    pub tau_d2: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Detuning label in μV; carried through records only.
    pub d_eps: f64,
}

impl Default for GateParams {
    /// Exchange splittings and field gradients of the singlet-triplet device,
    /// no coupling and no dissipation.
    fn default() -> Self {
        GateParams {
            j1: mhz_to_rad_per_ns(SHULMAN_J1_MHZ),
            j2: mhz_to_rad_per_ns(SHULMAN_J2_MHZ),
            j12: 0.0,
            dbz1: mhz_to_rad_per_ns(SHULMAN_DBZ_MHZ),
            dbz2: mhz_to_rad_per_ns(SHULMAN_DBZ_MHZ),
            tau_d1: f64::INFINITY,
            tau_d2: f64::INFINITY,
            gamma: 0.0,
            lambda: 1.0,
            d_eps: 0.0,
        }
    }
}

impl GateParams {
    /// All couplings zero, dissipation off.
    pub fn zero() -> Self {
        GateParams {
            j1: 0.0,
            j2: 0.0,
            dbz1: 0.0,
            dbz2: 0.0,
            ..Default::default()
        }
    }

    pub fn with_tau_d(mut self, tau_d: f64) -> Self {
        self.tau_d1 = tau_d;
        self.tau_d2 = tau_d;
        self
    }

    /// Same parameters with the SEAQT relaxation terms switched off.
    pub fn without_dissipation(self) -> Self {
        self.with_tau_d(f64::INFINITY)
    }

    /// 1/τ_D per qubit; zero for an infinite dissipative time.
    pub fn dissipation_rates(&self) -> [f64; 2] {
        [self.tau_d1.recip(), self.tau_d2.recip()]
    }

    /// Effective Lindblad dephasing strength γλ.
    pub fn gamma_lambda(&self) -> f64 {
        self.gamma * self.lambda
    }

    pub fn validate(&self, kind: RhsKind) -> Result<()> {
        let finite = [
            self.j1,
            self.j2,
            self.j12,
            self.dbz1,
            self.dbz2,
            self.gamma,
            self.lambda,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("gate parameters must be finite"));
        }
        if kind == RhsKind::Seaqt && !(self.tau_d1 > 0.0 && self.tau_d2 > 0.0) {
            return Err(Error::invalid("dissipative times must be positive"));
        }
        if self.gamma < 0.0 || self.lambda < 0.0 {
            return Err(Error::invalid("gamma and lambda must be nonnegative"));
        }
        Ok(())
    }
}

/// Which equation of motion drives an integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsKind {
    Seaqt,
    Lindblad,
    VonNeumann,
}

impl FromStr for RhsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "seaqt" => Ok(RhsKind::Seaqt),
            "lindblad" => Ok(RhsKind::Lindblad),
            "vonneumann" => Ok(RhsKind::VonNeumann),
            _ => Err(Error::invalid(format!("unknown dynamics '{s}'"))),
        }
    }
}

impl fmt::Display for RhsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RhsKind::Seaqt => "seaqt",
            RhsKind::Lindblad => "lindblad",
            RhsKind::VonNeumann => "vonneumann",
        })
    }
}

/// Full CPHASE Hamiltonian including Zeeman and field-gradient terms.
pub fn hamiltonian_full(p: &GateParams) -> Op4 {
    let i = identity2();
    let zm = sigma_z() - i;
    (kron(&sigma_z(), &i) * c(p.j1)
        + kron(&i, &sigma_z()) * c(p.j2)
        + kron(&zm, &zm) * c(p.j12 / 2.0)
        + kron(&sigma_x(), &i) * c(p.dbz1)
        + kron(&i, &sigma_x()) * c(p.dbz2))
        * c(0.5)
}

/// Rotating-frame coupling term, diag(0, 0, 0, J12).
pub fn hamiltonian_rot(p: &GateParams) -> Op4 {
    let zm = sigma_z() - identity2();
    kron(&zm, &zm) * c(p.j12 / 4.0)
}

/// Constraint columns used in the Gram determinants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintSet {
    /// Trace and energy.
    Full,
    /// Trace only; used when the {I, H} Gram determinant is degenerate.
    TraceOnly,
}

/// Local dissipator of one qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct Dissipation {
    /// Hermitian D_J.
    pub d: Op2,
    /// D̃_J.
    pub d_tilde: Op2,
    /// Ratio of the Gram determinant including B ln ρ to the constraint Gram
    /// determinant; the local entropy-generation rate for τ_D = 1.
    pub gram_ratio: f64,
    pub constraints: ConstraintSet,
}

/// Per-qubit ingredients of the dissipator.
struct LocalFrame {
    rho_j: Op2,
    sqrt_rho_j: Op2,
    b_log: Op2,
    energy: Op2,
}

impl LocalFrame {
    fn new(blog: &Op4, h: &Op4, reduced: &[Op2; 2], which: Qubit) -> Result<Self> {
        let (rho_j, rho_other) = match which {
            Qubit::First => (reduced[0], reduced[1]),
            Qubit::Second => (reduced[1], reduced[0]),
        };
        Ok(LocalFrame {
            rho_j,
            sqrt_rho_j: mat_sqrt_psd(&rho_j)?,
            b_log: local_observable(blog, &rho_other, which),
            energy: local_observable(h, &rho_other, which),
        })
    }
}

type InnerProduct = dyn Fn(&Op2, &Op2, &Op2) -> f64;

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn dissipation_in_frame(
    frame: &LocalFrame,
    constraints: ConstraintSet,
    which: Qubit,
    inner: &InnerProduct,
) -> Result<Dissipation> {
    let id = identity2();
    let rho = &frame.rho_j;
    let (b, e) = (&frame.b_log, &frame.energy);
    let ii = inner(&id, &id, rho);
    let ib = inner(&id, b, rho);
    let bb = inner(b, b, rho);

    // Cofactor expansion along the operator row of the numerator determinant.
    let (combination, gram_ratio) = match constraints {
        ConstraintSet::Full => {
            let ie = inner(&id, e, rho);
            let ee = inner(e, e, rho);
            let eb = inner(e, b, rho);
            let gram = ii * ee - ie * ie;
            if gram.abs() < GRAM_DEGENERACY_THRESHOLD {
                return Err(Error::DegenerateConstraints {
                    qubit: which.label(),
                    determinant: gram,
                });
            }
            let cof_id = ib * ee - ie * eb;
            let cof_e = ib * ie - ii * eb;
            let combination = (b * c(gram) - id * c(cof_id) + e * c(cof_e)) / c(gram);
            let numerator = det3([[bb, ib, eb], [ib, ii, ie], [eb, ie, ee]]);
            (combination, numerator / gram)
        }
        ConstraintSet::TraceOnly => {
            let combination = (b * c(ii) - id * c(ib)) / c(ii);
            (combination, (bb * ii - ib * ib) / ii)
        }
    };
    let d_tilde = frame.sqrt_rho_j * combination;
    let weighted = frame.sqrt_rho_j * d_tilde;
    let d = (weighted + weighted.adjoint()) * c(0.5);
    Ok(Dissipation {
        d,
        d_tilde,
        gram_ratio,
        constraints,
    })
}

fn reduced_pair(rho: &Op4) -> [Op2; 2] {
    [
        partial_trace(rho, Qubit::First),
        partial_trace(rho, Qubit::Second),
    ]
}

fn b_log_from(spec: &SpectralDecomposition<4>) -> Op4 {
    spec.map(log_on_range)
}

/// (D_J, D̃_J) with the full {I, H} constraint set.
///
/// Fails with [`Error::DegenerateConstraints`] when the constraint Gram
/// determinant vanishes; [`dissipation_operator_or_reduced`] falls back to the
/// trace constraint alone in that case.
pub fn dissipation_operator(rho: &Op4, h: &Op4, which: Qubit) -> Result<Dissipation> {
    let blog = b_log_from(&herm_eig(rho)?);
    let frame = LocalFrame::new(&blog, h, &reduced_pair(rho), which)?;
    dissipation_in_frame(&frame, ConstraintSet::Full, which, &hs_inner)
}

pub fn dissipation_operator_or_reduced(rho: &Op4, h: &Op4, which: Qubit) -> Result<Dissipation> {
    let blog = b_log_from(&herm_eig(rho)?);
    let frame = LocalFrame::new(&blog, h, &reduced_pair(rho), which)?;
    with_fallback(&frame, which, &hs_inner)
}

fn with_fallback(frame: &LocalFrame, which: Qubit, inner: &InnerProduct) -> Result<Dissipation> {
    match dissipation_in_frame(frame, ConstraintSet::Full, which, inner) {
        Err(Error::DegenerateConstraints { .. }) => {
            dissipation_in_frame(frame, ConstraintSet::TraceOnly, which, inner)
        }
        other => other,
    }
}

/// The two terms of the SEAQT right-hand side evaluated separately.
#[derive(Clone, Debug)]
pub struct SeaqtTerms {
    /// −i[H, ρ].
    pub symplectic: Op4,
    /// −(1/τ_D1) D_1 ⊗ ρ_2 − (1/τ_D2) ρ_1 ⊗ D_2.
    pub dissipative: Op4,
    /// Local dissipators; `None` where the relaxation rate is zero.
    pub local: [Option<Dissipation>; 2],
}

impl SeaqtTerms {
    pub fn total(&self) -> Op4 {
        self.symplectic + self.dissipative
    }

    /// Σ_J (1/τ_DJ)·gram_ratio_J.
    pub fn entropy_rate_gram(&self, p: &GateParams) -> f64 {
        let rates = p.dissipation_rates();
        self.local
            .iter()
            .zip(rates)
            .filter_map(|(d, rate)| d.as_ref().map(|d| rate * d.gram_ratio))
            .sum()
    }
}

fn seaqt_terms_inner(
    rho: &Op4,
    spec: Option<&SpectralDecomposition<4>>,
    h: &Op4,
    p: &GateParams,
    inner: &InnerProduct,
) -> Result<SeaqtTerms> {
    let symplectic = commutator_flow(h, rho);
    let rates = p.dissipation_rates();
    if rates.iter().all(|&r| r == 0.0) {
        return Ok(SeaqtTerms {
            symplectic,
            dissipative: Op4::zeros(),
            local: [None, None],
        });
    }
    let blog = match spec {
        Some(s) => b_log_from(s),
        None => b_log_from(&herm_eig(rho)?),
    };
    let reduced = reduced_pair(rho);
    let mut dissipative = Op4::zeros();
    let mut local = [None, None];
    for (slot, which) in Qubit::BOTH.into_iter().enumerate() {
        let rate = rates[slot];
        if rate == 0.0 {
            continue;
        }
        let frame = LocalFrame::new(&blog, h, &reduced, which)?;
        let diss = with_fallback(&frame, which, inner)?;
        dissipative -= match which {
            Qubit::First => kron(&diss.d, &reduced[1]),
            Qubit::Second => kron(&reduced[0], &diss.d),
        } * c(rate);
        local[slot] = Some(diss);
    }
    Ok(SeaqtTerms {
        symplectic,
        dissipative,
        local,
    })
}

pub fn seaqt_terms(rho: &Op4, h: &Op4, p: &GateParams) -> Result<SeaqtTerms> {
    seaqt_terms_inner(rho, None, h, p, &hs_inner)
}

/// SEAQT terms under an arbitrary state-weighted inner product on the local
/// spaces. Used to compare normalization conventions of the anticommutator.
pub fn seaqt_terms_with_inner(
    rho: &Op4,
    h: &Op4,
    p: &GateParams,
    inner: &InnerProduct,
) -> Result<SeaqtTerms> {
    seaqt_terms_inner(rho, None, h, p, inner)
}

/// dρ/dt of the steepest-entropy-ascent equation of motion.
pub fn seaqt_rhs(rho: &Op4, h: &Op4, p: &GateParams) -> Result<Op4> {
    Ok(seaqt_terms(rho, h, p)?.total())
}

/// Lindblad pure-dephasing right-hand side with L_1 = I ⊗ √λσz, L_2 = √λσz ⊗ I.
pub fn lindblad_rhs(rho: &Op4, h: &Op4, p: &GateParams) -> Op4 {
    let mut out = commutator_flow(h, rho);
    if p.gamma == 0.0 {
        return out;
    }
    let l_phase = sigma_z() * c(p.lambda.sqrt());
    let ops = [kron(&identity2(), &l_phase), kron(&l_phase, &identity2())];
    for l in &ops {
        let ld = l.adjoint();
        let ldl = ld * l;
        out += (l * rho * ld * c(2.0) - ldl * rho - rho * ldl) * c(p.gamma / 2.0);
    }
    out
}

/// −i[H, ρ].
pub fn von_neumann_rhs(rho: &Op4, h: &Op4) -> Op4 {
    commutator_flow(h, rho)
}

/// Right-hand side of the selected equation of motion.
pub fn rhs(kind: RhsKind, rho: &Op4, h: &Op4, p: &GateParams) -> Result<Op4> {
    match kind {
        RhsKind::Seaqt => seaqt_rhs(rho, h, p),
        RhsKind::Lindblad => Ok(lindblad_rhs(rho, h, p)),
        RhsKind::VonNeumann => Ok(von_neumann_rhs(rho, h)),
    }
}

/// The right-hand side without the −i[H, ρ] term.
pub fn dissipative_rhs(kind: RhsKind, rho: &Op4, h: &Op4, p: &GateParams) -> Result<Op4> {
    match kind {
        RhsKind::Seaqt => Ok(seaqt_terms(rho, h, p)?.dissipative),
        RhsKind::Lindblad => Ok(lindblad_rhs(rho, &Op4::zeros(), p)),
        RhsKind::VonNeumann => Ok(Op4::zeros()),
    }
}

fn dissipative_with_spectrum(
    kind: RhsKind,
    rho: &Op4,
    spec: &SpectralDecomposition<4>,
    h: &Op4,
    p: &GateParams,
) -> Result<Op4> {
    match kind {
        RhsKind::Seaqt => Ok(seaqt_terms_inner(rho, Some(spec), h, p, &hs_inner)?.dissipative),
        _ => dissipative_rhs(kind, rho, h, p),
    }
}

/// exp(−iHt).
pub fn propagator(h: &Op4, t: f64) -> Result<Op4> {
    let spec = herm_eig(h)?;
    let phases = Op4::from_diagonal(
        &spec
            .eigenvalues
            .map(|e| C64::from_polar(1.0, -e * t))
            .into(),
    );
    Ok(spec.eigenvectors * phases * spec.eigenvectors.adjoint())
}

/// Fastest rate (rad/ns or 1/ns) in an integration: the spectral spread of H
/// plus the relaxation rates active for the chosen equation.
pub fn frequency_scale(kind: RhsKind, h: &Op4, p: &GateParams) -> f64 {
    let spread = herm_eig(h).map(|s| s.max() - s.min()).unwrap_or(0.0);
    let relax = match kind {
        RhsKind::Seaqt => p.dissipation_rates().into_iter().fold(0.0, f64::max),
        RhsKind::Lindblad => 4.0 * p.gamma_lambda(),
        RhsKind::VonNeumann => 0.0,
    };
    spread.max(relax)
}

/// Step bound min(dt_max, T_fast/50) with T_fast = 2π / frequency scale.
pub fn step_bound(kind: RhsKind, h: &Op4, p: &GateParams, dt_max: f64) -> f64 {
    let scale = frequency_scale(kind, h, p);
    if scale > 0.0 {
        dt_max.min(TAU / scale / STEPS_PER_FAST_PERIOD)
    } else {
        dt_max
    }
}

/// Health of the state over the steps since the previous sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    /// Smallest eigenvalue seen at any step.
    pub min_eigenvalue: f64,
    /// |Tr ρ − 1| of the stored state.
    pub trace_error: f64,
    /// Largest per-step trace drift before renormalization.
    pub trace_drift: f64,
    /// Largest ‖ρ − ρ†‖_F before re-Hermitization.
    pub hermiticity_error: f64,
}

/// Sampled solution of one integration.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Fixed step used (ns); zero for an empty time span.
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory holds at least the initial state")
    }

    /// Smallest eigenvalue over every integration step.
    pub fn min_eigenvalue(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &DensityMatrix)> {
        self.times.iter().copied().zip(self.states.iter())
    }
}

/// Fixed-step classical RK4 in the interaction picture of H (the integrating
/// factor form): the −i[H, ρ] flow is applied exactly through exp(−iHh/2)
/// and exp(−iHh), and RK4 acts on the remaining terms. Each step ends with
/// re-Hermitization and trace renormalization.
///
/// Integrating the commutator exactly keeps rank-deficient states from
/// picking up O(h⁵) negative eigenvalues from truncation error.
#[derive(Clone, Copy, Debug)]
pub struct Integrator {
    pub kind: RhsKind,
    pub dt_max: f64,
    /// Store a sample roughly every this many ns; every step when `None`.
    pub sample_interval: Option<f64>,
}

impl Integrator {
    pub fn new(kind: RhsKind, dt_max: f64) -> Self {
        Integrator {
            kind,
            dt_max,
            sample_interval: None,
        }
    }

    pub fn sample_every(mut self, interval: f64) -> Self {
        self.sample_interval = Some(interval);
        self
    }

    pub fn run(
        &self,
        rho0: &DensityMatrix,
        h: &Op4,
        p: &GateParams,
        t_span: (f64, f64),
    ) -> Result<Trajectory> {
        let (t0, t1) = t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
            return Err(Error::invalid(format!("invalid time span ({t0}, {t1})")));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::invalid("dt_max must be positive"));
        }
        p.validate(self.kind)?;

        let span = t1 - t0;
        let bound = step_bound(self.kind, h, p, self.dt_max);
        let n_steps = if span > 0.0 {
            (span / bound).ceil().max(1.0) as usize
        } else {
            0
        };
        let dt = if n_steps > 0 {
            span / n_steps as f64
        } else {
            0.0
        };
        let stride = match self.sample_interval {
            Some(s) if dt > 0.0 => ((s / dt).round() as usize).max(1),
            _ => 1,
        };

        let mut y = *rho0.matrix();
        let mut spec = herm_eig(&y)?;
        let mut traj = Trajectory {
            step: dt,
            ..Default::default()
        };
        traj.times.push(t0);
        traj.states.push(*rho0);
        traj.diagnostics.push(StepDiagnostics {
            min_eigenvalue: spec.min(),
            trace_error: (y.trace().re - 1.0).abs(),
            trace_drift: 0.0,
            hermiticity_error: linalg::hermitian_defect(&y),
        });

        let mut window = StepDiagnostics {
            min_eigenvalue: f64::INFINITY,
            trace_error: 0.0,
            trace_drift: 0.0,
            hermiticity_error: 0.0,
        };
        let half = c(dt / 2.0);
        let full = c(dt);
        let sixth = c(dt / 6.0);
        let (u_half, u_full) = (propagator(h, dt / 2.0)?, propagator(h, dt)?);
        let kind = self.kind;
        // Dissipative rate at interaction-picture state x, seen at the time
        // where the propagator is u.
        let stage = |u: &Op4, x: &Op4| -> Result<Op4> {
            let lab = u * x * u.adjoint();
            Ok(u.adjoint() * dissipative_rhs(kind, &lab, h, p)? * u)
        };
        for k in 1..=n_steps {
            let raw = if kind == RhsKind::VonNeumann {
                u_full * y * u_full.adjoint()
            } else {
                let k1 = dissipative_with_spectrum(kind, &y, &spec, h, p)?;
                let k2 = stage(&u_half, &(y + k1 * half))?;
                let k3 = stage(&u_half, &(y + k2 * half))?;
                let k4 = stage(&u_full, &(y + k3 * full))?;
                u_full * (y + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * sixth) * u_full.adjoint()
            };

            let drift = (raw.trace().re - y.trace().re).abs();
            let defect = linalg::hermitian_defect(&raw);
            let herm = linalg::hermitize(&raw);
            y = herm / c(herm.trace().re);
            spec = herm_eig(&y)?;
            // Eigenvalues within ±RANGE_CUTOFF lie outside the range of ρ;
            // pinning them to zero stops rounding noise from drifting
            // across the cutoff.
            if spec
                .eigenvalues
                .iter()
                .any(|&l| l != 0.0 && l.abs() <= RANGE_CUTOFF)
            {
                spec.eigenvalues
                    .iter_mut()
                    .filter(|l| l.abs() <= RANGE_CUTOFF)
                    .for_each(|l| *l = 0.0);
                let norm: f64 = spec.eigenvalues.iter().sum();
                spec.eigenvalues.iter_mut().for_each(|l| *l /= norm);
                y = linalg::hermitize(&spec.reconstruct());
            }
            let t = if k == n_steps { t1 } else { t0 + k as f64 * dt };
            if spec.min() < POSITIVITY_ABORT {
                return Err(Error::PositivityViolation {
                    time: Some(t),
                    eigenvalues: spec.eigenvalues.to_vec(),
                });
            }
            window.min_eigenvalue = window.min_eigenvalue.min(spec.min());
            window.trace_drift = window.trace_drift.max(drift);
            window.hermiticity_error = window.hermiticity_error.max(defect);

            if k % stride == 0 || k == n_steps {
                window.trace_error = (y.trace().re - 1.0).abs();
                traj.times.push(t);
                traj.states.push(DensityMatrix::from_raw(y));
                traj.diagnostics.push(window);
                window.min_eigenvalue = f64::INFINITY;
                window.trace_drift = 0.0;
                window.hermiticity_error = 0.0;
            }
        }
        Ok(traj)
    }
}

/// Integrates `kind` from `rho0` over `t_span`, storing every step.
pub fn integrate(
    kind: RhsKind,
    rho0: &DensityMatrix,
    h: &Op4,
    p: &GateParams,
    t_span: (f64, f64),
    dt_max: f64,
) -> Result<Trajectory> {
    Integrator::new(kind, dt_max).run(rho0, h, p, t_span)
}
