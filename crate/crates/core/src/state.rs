use std::ops::Deref;

use nalgebra::Vector4;

use crate::error::{Error, Result};
use crate::linalg::{self, c, herm_eig, kron, partial_trace, Op2, Op4, Qubit, C64};

/// Tolerances a stored state must meet.
pub const TRACE_TOLERANCE: f64 = 1e-9;
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const POSITIVITY_FLOOR: f64 = -1e-9;

/// A 4×4 Hermitian, unit-trace, positive-semidefinite two-qubit state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Op4);

impl DensityMatrix {
    /// Validates the state invariants within the stored-state tolerances.
    pub fn new(m: Op4) -> Result<Self> {
        if linalg::hermitian_defect(&m) > HERMITICITY_TOLERANCE {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::invalid(format!(
                "density matrix trace {tr} is not 1"
            )));
        }
        let spec = herm_eig(&m)?;
        if spec.min() < POSITIVITY_FLOOR {
            return Err(Error::PositivityViolation {
                time: None,
                eigenvalues: spec.eigenvalues.to_vec(),
            });
        }
        Ok(DensityMatrix(m))
    }

    pub(crate) fn from_raw(m: Op4) -> Self {
        DensityMatrix(m)
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Op4::identity() * c(0.25))
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &Vector4<C64>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid(
                "pure state vector must be nonzero and finite",
            ));
        }
        let v = psi / c(norm);
        Ok(DensityMatrix(v * v.adjoint()))
    }

    /// ρ1 ⊗ ρ2 for two valid single-qubit states.
    pub fn product(rho1: &Op2, rho2: &Op2) -> Result<Self> {
        DensityMatrix::new(kron(rho1, rho2))
    }

    pub fn matrix(&self) -> &Op4 {
        &self.0
    }

    pub fn into_inner(self) -> Op4 {
        self.0
    }

    pub fn reduced(&self, keep: Qubit) -> Op2 {
        partial_trace(&self.0, keep)
    }

    /// Ascending eigenvalues.
    pub fn spectrum(&self) -> [f64; 4] {
        herm_eig(&self.0)
            .map(|s| s.eigenvalues)
            .unwrap_or([f64::NAN; 4])
    }
}

impl Deref for DensityMatrix {
    type Target = Op4;

    fn deref(&self) -> &Op4 {
        &self.0
    }
}

impl From<DensityMatrix> for Op4 {
    fn from(rho: DensityMatrix) -> Op4 {
        rho.0
    }
}

/// ½(I + r·σ) for a Bloch vector r.
pub fn qubit_state(bloch: [f64; 3]) -> Op2 {
    let [x, y, z] = bloch;
    (linalg::identity2()
        + linalg::sigma_x() * c(x)
        + linalg::sigma_y() * c(y)
        + linalg::sigma_z() * c(z))
        * c(0.5)
}
