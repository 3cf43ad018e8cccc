//! State functionals. Entropies are reported as S/k_B with natural logarithms.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, GateParams, RhsKind};
use crate::error::{Error, Result};
use crate::linalg::{
    b_log, c, herm_eig, identity2, kron, sigma_y, sqrt_clamped, Op4, C64, RANGE_CUTOFF,
};

/// Slack allowed when re-validating metric ranges.
pub const RANGE_SLACK: f64 = 1e-9;

/// −Σ λ ln λ over eigenvalues above the range cutoff.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    -eigenvalues
        .iter()
        .filter(|&&l| l > RANGE_CUTOFF)
        .map(|&l| l * l.ln())
        .sum::<f64>()
}

/// von Neumann entropy S/k_B.
pub fn entropy(rho: &Op4) -> f64 {
    match herm_eig(rho) {
        Ok(spec) => entropy_of_spectrum(&spec.eigenvalues),
        Err(_) => f64::NAN,
    }
}

/// (dS/dt)/k_B = −Tr[ρ̇ · B ln ρ] for a traceless rate ρ̇.
pub fn entropy_rate_trace(rho: &Op4, rate: &Op4) -> f64 {
    match b_log(rho) {
        Ok(blog) => -(rate * blog).trace().re,
        Err(_) => f64::NAN,
    }
}

/// Entropy-generation rate of the SEAQT equation from the Gram determinants:
/// Σ_J (1/τ_DJ) |G(B ln ρ, I, H)|^J / |G(I, H)|^J.
pub fn entropy_rate_gram(rho: &Op4, h: &Op4, p: &GateParams) -> Result<f64> {
    Ok(dynamics::seaqt_terms(rho, h, p)?.entropy_rate_gram(p))
}

/// Tr ρ².
pub fn purity(rho: &Op4) -> f64 {
    (rho * rho).trace().re
}

/// Spin-flipped state (σy⊗σy) ρ* (σy⊗σy), conjugation in the computational basis.
pub fn spin_flip(rho: &Op4) -> Op4 {
    let yy = kron(&sigma_y(), &sigma_y());
    yy * rho.map(|z| z.conj()) * yy
}

/// Ascending eigenvalues of R = √(√ρ ρ̃ √ρ).
pub fn concurrence_spectrum(rho: &Op4) -> [f64; 4] {
    let spectrum = || -> Result<[f64; 4]> {
        let s = sqrt_clamped(rho)?;
        let inner = crate::linalg::hermitize(&(s * spin_flip(rho) * s));
        // Rounding noise on a zero eigenvalue would otherwise surface as its
        // square root, ~1e-8 for a pure state.
        let mut l = herm_eig(&inner)?.eigenvalues;
        l.iter_mut()
            .for_each(|x| *x = if *x > RANGE_CUTOFF { x.sqrt() } else { 0.0 });
        Ok(l)
    };
    spectrum().unwrap_or([f64::NAN; 4])
}

/// λ4 − λ3 − λ2 − λ1 before clamping; negative for separable-looking states.
pub fn concurrence_expression(rho: &Op4) -> f64 {
    let l = concurrence_spectrum(rho);
    l[3] - l[2] - l[1] - l[0]
}

/// Wootters concurrence, max{0, λ4 − λ3 − λ2 − λ1}.
pub fn concurrence(rho: &Op4) -> f64 {
    concurrence_expression(rho).max(0.0)
}

/// (|SS⟩ − |T0T0⟩)/√2 with |S⟩ the first basis vector of each qubit.
pub fn psi_minus() -> Vector4<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Vector4::new(c(s), c(0.0), c(0.0), c(-s))
}

/// exp[iπ(I⊗σy + σy⊗I)/8] |Ψ−⟩.
pub fn bell_target() -> Vector4<C64> {
    // The two generators commute, so the exponential factorizes into
    // exp(iπσy/8) ⊗ exp(iπσy/8), and exp(iθσy) = cos θ I + i sin θ σy.
    let theta = std::f64::consts::PI / 8.0;
    let local = identity2() * c(theta.cos()) + sigma_y() * C64::new(0.0, theta.sin());
    kron(&local, &local) * psi_minus()
}

/// ⟨Φ_ent|ρ|Φ_ent⟩.
pub fn fidelity_bell(rho: &Op4) -> f64 {
    let phi = bell_target();
    (phi.adjoint() * rho * phi)[(0, 0)].re
}

/// Metrics of one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub entropy: f64,
    /// Entropy-generation rate of the active equation of motion (1/ns).
    pub entropy_rate: f64,
    pub concurrence: f64,
    /// Unclamped λ4 − λ3 − λ2 − λ1.
    pub concurrence_expression: f64,
    pub fidelity: f64,
    pub purity: f64,
    pub min_eigenvalue: f64,
}

impl MetricsRecord {
    /// Metrics of `rho`, with the entropy rate taken along `kind` under `h`.
    pub fn evaluate(rho: &Op4, kind: RhsKind, h: &Op4, p: &GateParams) -> Result<Self> {
        let spec = herm_eig(rho)?;
        let rate = dynamics::rhs(kind, rho, h, p)?;
        let expression = concurrence_expression(rho);
        Ok(MetricsRecord {
            entropy: entropy_of_spectrum(&spec.eigenvalues),
            entropy_rate: entropy_rate_trace(rho, &rate),
            concurrence: expression.max(0.0),
            concurrence_expression: expression,
            fidelity: fidelity_bell(rho),
            purity: purity(rho),
            min_eigenvalue: spec.min(),
        })
    }

    /// Re-checks the documented value ranges.
    pub fn check_invariants(&self) -> Result<()> {
        let within = |x: f64, lo: f64, hi: f64| x >= lo - RANGE_SLACK && x <= hi + RANGE_SLACK;
        let checks = [
            ("entropy", self.entropy, 0.0, 4f64.ln()),
            ("concurrence", self.concurrence, 0.0, 1.0),
            ("fidelity", self.fidelity, 0.0, 1.0),
            ("purity", self.purity, 0.25, 1.0),
        ];
        for (name, value, lo, hi) in checks {
            if !within(value, lo, hi) {
                return Err(Error::InvariantViolation(format!(
                    "{name} = {value} outside [{lo}, {hi}]"
                )));
            }
        }
        if !self.entropy_rate.is_finite() || !self.min_eigenvalue.is_finite() {
            return Err(Error::InvariantViolation("non-finite metric".into()));
        }
        Ok(())
    }
}
