use nalgebra::DMatrix;
use num_complex::Complex64;

use super::QdynError;

pub type CMatrix = DMatrix<Complex64>;

/// Hilbert-space truncation, tensor order qubit ⊗ mechanics ⊗ SNAIL.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub qubit: usize,
    pub mech: usize,
    pub snail: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Qubit,
    Mech,
    Snail,
}

impl Dims {
    pub fn new(qubit: usize, mech: usize, snail: Option<usize>) -> Result<Self, QdynError> {
        if !(qubit == 2 || qubit == 3) {
            return Err(QdynError::InvalidParameter {
                field: "qubit levels",
                value: qubit as f64,
            });
        }
        if mech < 2 {
            return Err(QdynError::InvalidParameter {
                field: "mechanical cutoff",
                value: mech as f64,
            });
        }
        if let Some(s) = snail {
            if s < 2 {
                return Err(QdynError::InvalidParameter {
                    field: "SNAIL cutoff",
                    value: s as f64,
                });
            }
        }
        Ok(Self { qubit, mech, snail })
    }

    pub fn total(&self) -> usize {
        self.qubit * self.mech * self.snail.unwrap_or(1)
    }

    /// Flat index of |q, m, s⟩; `s` is ignored without a SNAIL.
    pub fn index(&self, q: usize, m: usize, s: usize) -> usize {
        let ds = self.snail.unwrap_or(1);
        let s = if self.snail.is_some() { s } else { 0 };
        (q * self.mech + m) * ds + s
    }
}

/// Truncated lowering operator a|n⟩ = √n|n−1⟩.
pub fn annihilation(d: usize) -> CMatrix {
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn number(d: usize) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |n, _| Complex64::new(n as f64, 0.0)))
}

/// Lift a single-mode operator into the full space.
pub fn embed(op: &CMatrix, mode: Mode, dims: Dims) -> CMatrix {
    let eye = |d: usize| CMatrix::identity(d, d);
    let (q, m) = match mode {
        Mode::Qubit => (op.clone(), eye(dims.mech)),
        Mode::Mech => (eye(dims.qubit), op.clone()),
        Mode::Snail => (eye(dims.qubit), eye(dims.mech)),
    };
    let qm = q.kronecker(&m);
    match (mode, dims.snail) {
        (Mode::Snail, Some(_)) => qm.kronecker(op),
        (Mode::Snail, None) => panic!("SNAIL operator requested without a SNAIL dimension"),
        (_, Some(ds)) => qm.kronecker(&eye(ds)),
        (_, None) => qm,
    }
}

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;
const POSITIVITY_FLOOR: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Dims,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(dims: Dims, matrix: CMatrix) -> Result<Self, QdynError> {
        let rho = Self::unchecked(dims, matrix)?;
        rho.check()?;
        Ok(rho)
    }

    pub(crate) fn unchecked(dims: Dims, matrix: CMatrix) -> Result<Self, QdynError> {
        let d = dims.total();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(QdynError::DimensionMismatch {
                expected: d,
                got: matrix.nrows(),
            });
        }
        Ok(Self { dims, matrix })
    }

    /// |q, m, s⟩⟨q, m, s|.
    pub fn basis(dims: Dims, q: usize, m: usize, s: usize) -> Result<Self, QdynError> {
        let snail_out = dims.snail.is_some_and(|ds| s >= ds);
        if q >= dims.qubit || m >= dims.mech || snail_out {
            return Err(QdynError::InvalidState(format!("basis state |{q},{m},{s}⟩ outside truncation")));
        }
        let i = dims.index(q, m, s);
        let mut mat = CMatrix::zeros(dims.total(), dims.total());
        mat[(i, i)] = Complex64::new(1.0, 0.0);
        Ok(Self { dims, matrix: mat })
    }

    /// |ψ⟩⟨ψ| for a normalized state vector.
    pub fn pure(dims: Dims, psi: &nalgebra::DVector<Complex64>) -> Result<Self, QdynError> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(QdynError::InvalidState(format!("state vector norm {norm}")));
        }
        Self::new(dims, psi * psi.adjoint())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn population(&self, q: usize, m: usize, s: usize) -> f64 {
        let i = self.dims.index(q, m, s);
        self.matrix[(i, i)].re
    }

    /// Total population with the given mode in level `n`.
    pub fn mode_population(&self, mode: Mode, n: usize) -> f64 {
        let ds = self.dims.snail.unwrap_or(1);
        let mut total = 0.0;
        for q in 0..self.dims.qubit {
            for m in 0..self.dims.mech {
                for s in 0..ds {
                    let level = match mode {
                        Mode::Qubit => q,
                        Mode::Mech => m,
                        Mode::Snail => s,
                    };
                    if level == n {
                        total += self.population(q, m, s);
                    }
                }
            }
        }
        total
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().collect()
    }

    /// Hermiticity, unit trace and positivity within the documented tolerances.
    pub fn check(&self) -> Result<(), QdynError> {
        let anti = (&self.matrix - self.matrix.adjoint()).camax();
        if anti > HERMITIAN_TOL {
            return Err(QdynError::InvalidState(format!("not Hermitian: max |ρ − ρ†| = {anti:e}")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QdynError::InvalidState(format!("trace = {tr}")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < POSITIVITY_FLOOR {
            return Err(QdynError::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Uhlmann fidelity (tr√(√ρ σ √ρ))².
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64, QdynError> {
        if self.dims != other.dims {
            return Err(QdynError::DimensionMismatch {
                expected: self.dims.total(),
                got: other.dims.total(),
            });
        }
        let sqrt_rho = hermitian_sqrt(&self.matrix);
        let inner = &sqrt_rho * &other.matrix * &sqrt_rho;
        let eig = ((&inner + inner.adjoint()) * Complex64::new(0.5, 0.0)).symmetric_eigenvalues();
        let s: f64 = eig.iter().map(|&v| v.max(0.0).sqrt()).sum();
        Ok((s * s).min(1.0))
    }
}

/// Principal square root of a positive semidefinite Hermitian matrix.
fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let d = eig
        .eigenvalues
        .map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn basis_and_indexing() {
        let dims = Dims::new(2, 3, Some(2)).unwrap();
        assert_eq!(dims.total(), 12);
        let rho = DensityMatrix::basis(dims, 1, 2, 1).unwrap();
        assert_eq!(rho.population(1, 2, 1), 1.0);
        assert_eq!(rho.mode_population(Mode::Mech, 2), 1.0);
        assert!(DensityMatrix::basis(dims, 2, 0, 0).is_err());
        assert!(Dims::new(4, 3, None).is_err());
        assert!(Dims::new(2, 1, None).is_err());
    }

    #[test]
    fn ladder_operators() {
        let a = annihilation(4);
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        // [a, a†] = 1 except in the truncated top level
        for n in 0..3 {
            assert!((comm[(n, n)].re - 1.0).abs() < 1e-12);
        }
        assert!((number(4) - a.adjoint() * &a).camax() < 1e-12);
    }

    #[test]
    fn embedding_commutes_across_modes() {
        let dims = Dims::new(3, 4, Some(2)).unwrap();
        let q = embed(&annihilation(3), Mode::Qubit, dims);
        let m = embed(&annihilation(4), Mode::Mech, dims);
        let s = embed(&annihilation(2), Mode::Snail, dims);
        assert!((&q * &m - &m * &q).norm() < 1e-12);
        assert!((&q * &s - &s * &q).norm() < 1e-12);
        // q† acting on |0,1,1⟩ gives |1,1,1⟩
        let mut v = DVector::zeros(dims.total());
        v[dims.index(0, 1, 1)] = Complex64::new(1.0, 0.0);
        let w = q.adjoint() * v;
        assert!((w[dims.index(1, 1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invariants_and_fidelity() {
        let dims = Dims::new(2, 2, None).unwrap();
        let mut psi = DVector::zeros(4);
        psi[dims.index(1, 0, 0)] = Complex64::new(0.6, 0.0);
        psi[dims.index(0, 1, 0)] = Complex64::new(0.0, 0.8);
        let rho = DensityMatrix::pure(dims, &psi).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!((rho.fidelity(&rho).unwrap() - 1.0).abs() < 1e-9);
        let e0 = DensityMatrix::basis(dims, 1, 0, 0).unwrap();
        assert!((rho.fidelity(&e0).unwrap() - 0.36).abs() < 1e-9);

        let mut bad = rho.matrix().clone();
        bad[(0, 0)] += Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::new(dims, bad).is_err());
        let neg = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.1, 0.0),
            Complex64::new(-0.1, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]));
        assert!(DensityMatrix::new(dims, neg).is_err());
    }
}
