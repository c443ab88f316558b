use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Axis, SpinSystem, DEFAULT_DIMENSION_CAP};
use crate::error::{Error, Result};

/// Dense complex operator in the product basis of a [`SpinSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(DenseOperator { matrix })
    }

    pub fn zeros(dim: usize) -> Self {
        DenseOperator {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Largest entry of `|A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Largest entry of `|U†U - 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                worst = worst.max((prod[(r, c)] - target).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `exp(-i H t)` for a Hermitian operator, through its eigendecomposition.
    pub fn evolution(&self, t: f64) -> Result<DenseOperator> {
        let eig = super::diagonalize(self)?;
        let n = self.dim();
        let v = eig.vectors();
        let mut scaled = v.clone();
        for (p, &e) in eig.raw_energies().iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -e * t);
            for r in 0..n {
                scaled[(r, p)] *= phase;
            }
        }
        Ok(DenseOperator {
            matrix: scaled * v.adjoint(),
        })
    }
}

/// Single-spin operator `s^α` for magnitude `s`, basis `m = s, s-1, ..., -s`.
pub fn spin_matrix(s: f64, axis: Axis) -> DMatrix<Complex64> {
    let dim = (2.0 * s).round() as usize + 1;
    let m = |k: usize| s - k as f64;
    let mut out = DMatrix::zeros(dim, dim);
    match axis {
        Axis::Z => {
            for k in 0..dim {
                out[(k, k)] = Complex64::new(m(k), 0.0);
            }
        }
        Axis::X | Axis::Y => {
            // <m+1| s^+ |m> sits at (k-1, k) since index k has m = s - k.
            for k in 1..dim {
                let mk = m(k);
                let amp = (s * (s + 1.0) - mk * (mk + 1.0)).sqrt();
                let (upper, lower) = match axis {
                    Axis::X => (Complex64::new(amp / 2.0, 0.0), Complex64::new(amp / 2.0, 0.0)),
                    _ => (Complex64::new(0.0, -amp / 2.0), Complex64::new(0.0, amp / 2.0)),
                };
                out[(k - 1, k)] = upper;
                out[(k, k - 1)] = lower;
            }
        }
    }
    out
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// `s_i^α` embedded in the full product space of `system`.
pub fn site_operator(system: &SpinSystem, site: usize, axis: Axis) -> Result<DenseOperator> {
    let n = system.n_spins();
    if site >= n {
        return Err(Error::IndexOutOfRange { index: site, limit: n });
    }
    let left: usize = (0..site).map(|k| system.multiplicity(k)).product();
    let right: usize = (site + 1..n).map(|k| system.multiplicity(k)).product();
    let op = spin_matrix(system.spins[site], axis);
    let m = kron(&kron(&DMatrix::identity(left, left), &op), &DMatrix::identity(right, right));
    Ok(DenseOperator { matrix: m })
}

pub(crate) fn check_cap(system: &SpinSystem, cap: usize) -> Result<()> {
    let dimension = system.dimension();
    if dimension > cap {
        return Err(Error::DimensionCap { dimension, cap });
    }
    Ok(())
}

/// Dense Hamiltonian `Σ_bonds [J_p (s^x s^x + s^y s^y) + J_z s^z s^z] + B Σ_i g_i s_i^z`.
pub fn build_hamiltonian(system: &SpinSystem) -> Result<DenseOperator> {
    build_hamiltonian_with_cap(system, DEFAULT_DIMENSION_CAP)
}

pub fn build_hamiltonian_with_cap(system: &SpinSystem, cap: usize) -> Result<DenseOperator> {
    system.validate()?;
    check_cap(system, cap)?;
    let dim = system.dimension();
    let n = system.n_spins();
    let ops: Vec<[DMatrix<Complex64>; 3]> = (0..n)
        .map(|i| {
            let op = |a| site_operator(system, i, a).map(DenseOperator::into_matrix);
            Ok([op(Axis::X)?, op(Axis::Y)?, op(Axis::Z)?])
        })
        .collect::<Result<_>>()?;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for b in &system.bonds {
        let (si, sj) = (&ops[b.i], &ops[b.j]);
        if b.jp != 0.0 {
            h += (&si[0] * &sj[0] + &si[1] * &sj[1]) * Complex64::new(b.jp, 0.0);
        }
        if b.jz != 0.0 {
            h += &si[2] * &sj[2] * Complex64::new(b.jz, 0.0);
        }
    }
    for (i, op) in ops.iter().enumerate() {
        let z = system.zeeman(i);
        if z != 0.0 {
            h += &op[2] * Complex64::new(z, 0.0);
        }
    }
    Ok(DenseOperator { matrix: h })
}
