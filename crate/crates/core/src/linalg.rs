//! Dense kernels for 2×2 and 4×4 Hermitian operators.
//!
//! Qubit 1 is always the left Kronecker factor, so the computational basis of
//! the composite is ordered |00⟩, |01⟩, |10⟩, |11⟩ with the first digit
//! belonging to qubit 1.

use nalgebra::{Matrix2, Matrix4, SMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Single-qubit operator.
pub type Op2 = Matrix2<C64>;
/// Two-qubit operator.
pub type Op4 = Matrix4<C64>;

/// Eigenvalues at or below this value are outside the range of a state.
pub const RANGE_CUTOFF: f64 = 1e-14;
/// Negative eigenvalues down to minus this value are clamped to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 64;

#[inline]
pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Selects one of the two qubits of the composite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Qubit {
    First,
    Second,
}

impl Qubit {
    pub const BOTH: [Qubit; 2] = [Qubit::First, Qubit::Second];

    /// One-based label (1 or 2).
    pub fn label(self) -> usize {
        match self {
            Qubit::First => 1,
            Qubit::Second => 2,
        }
    }

    pub fn other(self) -> Qubit {
        match self {
            Qubit::First => Qubit::Second,
            Qubit::Second => Qubit::First,
        }
    }
}

impl TryFrom<usize> for Qubit {
    type Error = Error;

    fn try_from(label: usize) -> Result<Self> {
        match label {
            1 => Ok(Qubit::First),
            2 => Ok(Qubit::Second),
            other => Err(Error::invalid(format!(
                "qubit index must be 1 or 2, got {other}"
            ))),
        }
    }
}

pub fn identity2() -> Op2 {
    Op2::identity()
}

pub fn sigma_x() -> Op2 {
    Op2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

pub fn sigma_y() -> Op2 {
    Op2::new(c(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(0.0))
}

pub fn sigma_z() -> Op2 {
    Op2::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

/// σ_μ for μ ∈ {0, 1, 2, 3} = {I, σx, σy, σz}.
pub fn pauli(mu: usize) -> Op2 {
    match mu {
        0 => identity2(),
        1 => sigma_x(),
        2 => sigma_y(),
        3 => sigma_z(),
        _ => panic!("Pauli index out of range: {mu}"),
    }
}

/// Frobenius norm of A − A†.
pub fn hermitian_defect<const N: usize>(a: &SMatrix<C64, N, N>) -> f64 {
    (a - a.adjoint()).norm()
}

/// (A + A†)/2.
pub fn hermitize<const N: usize>(a: &SMatrix<C64, N, N>) -> SMatrix<C64, N, N> {
    (a + a.adjoint()) * c(0.5)
}

pub fn is_hermitian<const N: usize>(a: &SMatrix<C64, N, N>, tol: f64) -> bool {
    (0..N).all(|i| (0..N).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= tol))
}

pub fn trace_re<const N: usize>(a: &SMatrix<C64, N, N>) -> f64 {
    a.trace().re
}

/// Kronecker product A ⊗ B with A acting on qubit 1.
pub fn kron(a: &Op2, b: &Op2) -> Op4 {
    let mut out = Op4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Reduced state of the kept qubit.
pub fn partial_trace(rho: &Op4, keep: Qubit) -> Op2 {
    let mut out = Op2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            out[(a, b)] = match keep {
                Qubit::First => rho[(2 * a, 2 * b)] + rho[(2 * a + 1, 2 * b + 1)],
                Qubit::Second => rho[(a, b)] + rho[(2 + a, 2 + b)],
            };
        }
    }
    out
}

/// Local observable (F)^J of a composite operator: the partial trace over the
/// other qubit of F weighted by that qubit's reduced state,
/// `(F)^1 = Tr_2[(I ⊗ ρ_2) F]` and `(F)^2 = Tr_1[(ρ_1 ⊗ I) F]`.
pub fn local_observable(f: &Op4, rho_other: &Op2, which: Qubit) -> Op2 {
    let mut out = Op2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..2 {
                for e in 0..2 {
                    acc += match which {
                        Qubit::First => rho_other[(k, e)] * f[(2 * a + e, 2 * b + k)],
                        Qubit::Second => rho_other[(k, e)] * f[(2 * e + a, 2 * k + b)],
                    };
                }
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// State-weighted inner product `Tr[ρ_J (F G + G F)/2]` on one qubit.
pub fn hs_inner(f: &Op2, g: &Op2, rho_j: &Op2) -> f64 {
    (rho_j * (f * g + g * f)).trace().re * 0.5
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition<const N: usize> {
    pub eigenvalues: [f64; N],
    pub eigenvectors: SMatrix<C64, N, N>,
}

impl<const N: usize> SpectralDecomposition<N> {
    /// V f(Λ) V†.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SMatrix<C64, N, N> {
        let v = &self.eigenvectors;
        let mut scaled = *v;
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fl = f(lambda);
            for i in 0..N {
                scaled[(i, j)] *= fl;
            }
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> SMatrix<C64, N, N> {
        self.map(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[N - 1]
    }
}

/// Cyclic complex Jacobi diagonalization of a Hermitian matrix.
///
/// The input is symmetrized first. Rotations are skipped once an off-diagonal
/// entry is negligible relative to the geometric mean of its diagonal pair,
/// which keeps small eigenvalues of positive matrices relatively accurate.
pub fn herm_eig<const N: usize>(a: &SMatrix<C64, N, N>) -> Result<SpectralDecomposition<N>> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut m = hermitize(a);
    for i in 0..N {
        m[(i, i)].im = 0.0;
    }
    let mut v = SMatrix::<C64, N, N>::identity();
    let scale = m.norm();
    if scale == 0.0 {
        return Ok(SpectralDecomposition {
            eigenvalues: [0.0; N],
            eigenvectors: v,
        });
    }
    let floor = scale * f64::EPSILON * 1e-3;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = m[(p, q)];
                let mag = apq.norm();
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                if mag <= floor || mag <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                let gpp = c(cs);
                let gpq = c(sn);
                let gqp = -phase.conj() * sn;
                let gqq = phase.conj() * cs;

                for k in 0..N {
                    let xkp = m[(k, p)];
                    let xkq = m[(k, q)];
                    m[(k, p)] = xkp * gpp + xkq * gqp;
                    m[(k, q)] = xkp * gpq + xkq * gqq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * gpp + vkq * gqp;
                    v[(k, q)] = vkp * gpq + vkq * gqq;
                }
                for k in 0..N {
                    let xpk = m[(p, k)];
                    let xqk = m[(q, k)];
                    m[(p, k)] = gpp.conj() * xpk + gqp.conj() * xqk;
                    m[(q, k)] = gpq.conj() * xpk + gqq.conj() * xqk;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)].im = 0.0;
                m[(q, q)].im = 0.0;
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let eigenvalues = std::array::from_fn(|k| m[(order[k], order[k])].re);
    let eigenvectors = SMatrix::<C64, N, N>::from_fn(|i, k| v[(i, order[k])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn clamp_spectrum<const N: usize>(
    mut spec: SpectralDecomposition<N>,
) -> Result<SpectralDecomposition<N>> {
    if spec.min() < -CLAMP_TOLERANCE {
        return Err(Error::PositivityViolation {
            time: None,
            eigenvalues: spec.eigenvalues.to_vec(),
        });
    }
    for lambda in spec.eigenvalues.iter_mut() {
        *lambda = lambda.max(0.0);
    }
    Ok(spec)
}

/// Principal square root of a positive-semidefinite matrix.
pub fn mat_sqrt_psd<const N: usize>(a: &SMatrix<C64, N, N>) -> Result<SMatrix<C64, N, N>> {
    let spec = clamp_spectrum(herm_eig(a)?)?;
    Ok(spec.map(f64::sqrt))
}

/// Square root with every negative eigenvalue clamped to zero.
pub(crate) fn sqrt_clamped<const N: usize>(a: &SMatrix<C64, N, N>) -> Result<SMatrix<C64, N, N>> {
    Ok(herm_eig(a)?.map(|x| x.max(0.0).sqrt()))
}

/// ln λ on eigenvalues above [`RANGE_CUTOFF`], zero elsewhere.
pub fn log_on_range(lambda: f64) -> f64 {
    if lambda > RANGE_CUTOFF {
        lambda.ln()
    } else {
        0.0
    }
}

/// B ln ρ: the logarithm of ρ restricted to its range.
pub fn b_log<const N: usize>(rho: &SMatrix<C64, N, N>) -> Result<SMatrix<C64, N, N>> {
    Ok(herm_eig(rho)?.map(log_on_range))
}

/// Real coefficients a_{μν} = Tr[ρ (σ_μ ⊗ σ_ν)].
#[derive(Clone, Debug, PartialEq)]
pub struct PauliDecomposition {
    pub a: [[f64; 4]; 4],
}

impl PauliDecomposition {
    /// ¼ Σ a_{μν} σ_μ ⊗ σ_ν.
    pub fn reconstruct(&self) -> Op4 {
        let mut out = Op4::zeros();
        for mu in 0..4 {
            for nu in 0..4 {
                out += kron(&pauli(mu), &pauli(nu)) * c(self.a[mu][nu]);
            }
        }
        out * c(0.25)
    }

    /// Bloch vector of qubit 1, (a_{10}, a_{20}, a_{30}).
    pub fn bloch_first(&self) -> [f64; 3] {
        [self.a[1][0], self.a[2][0], self.a[3][0]]
    }

    /// Bloch vector of qubit 2, (a_{01}, a_{02}, a_{03}).
    pub fn bloch_second(&self) -> [f64; 3] {
        [self.a[0][1], self.a[0][2], self.a[0][3]]
    }
}

pub fn pauli_decompose(rho: &Op4) -> PauliDecomposition {
    let mut a = [[0.0; 4]; 4];
    for (mu, row) in a.iter_mut().enumerate() {
        for (nu, entry) in row.iter_mut().enumerate() {
            *entry = (rho * kron(&pauli(mu), &pauli(nu))).trace().re;
        }
    }
    PauliDecomposition { a }
}

/// −i[H, ρ] in units with ħ = 1.
pub fn commutator_flow(h: &Op4, rho: &Op4) -> Op4 {
    (h * rho - rho * h) * C64::new(0.0, -1.0)
}
