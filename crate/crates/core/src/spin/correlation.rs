use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{build_hamiltonian, diagonalize, site_operator, Axis, DenseOperator, EigenDecomposition, SpinSystem};
use crate::error::{Error, Result};

/// One entry `⟨0|s_i^α|p⟩` of the ground-to-level matrix-element table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixElement {
    pub site: usize,
    pub axis: Axis,
    pub level: usize,
    pub energy: f64,
    pub value: Complex64,
}

/// Exact-diagonalization oracle for one spin system.
#[derive(Debug, Clone)]
pub struct ExactSolver {
    system: SpinSystem,
    hamiltonian: DenseOperator,
    eigen: EigenDecomposition,
    /// `elements[i][α][p] = ⟨0|s_i^α|p⟩`
    elements: Vec<[Vec<Complex64>; 3]>,
}

impl ExactSolver {
    pub fn new(system: &SpinSystem) -> Result<Self> {
        let hamiltonian = build_hamiltonian(system)?;
        let eigen = diagonalize(&hamiltonian)?;
        let v0: DVector<Complex64> = eigen.vector(0);
        let adjoint = eigen.vectors().adjoint();
        let elements = (0..system.n_spins())
            .map(|i| {
                let row = |axis| -> Result<Vec<Complex64>> {
                    let s = site_operator(system, i, axis)?;
                    let w = s.matrix() * &v0;
                    // (V† S v0)_p = ⟨p|S|0⟩; conjugate for ⟨0|S|p⟩.
                    Ok((&adjoint * w).iter().map(|z| z.conj()).collect())
                };
                Ok([row(Axis::X)?, row(Axis::Y)?, row(Axis::Z)?])
            })
            .collect::<Result<_>>()?;
        Ok(ExactSolver {
            system: system.clone(),
            hamiltonian,
            eigen,
            elements,
        })
    }

    pub fn system(&self) -> &SpinSystem {
        &self.system
    }

    pub fn hamiltonian(&self) -> &DenseOperator {
        &self.hamiltonian
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eigen
    }

    pub fn energies(&self) -> &[f64] {
        self.eigen.energies()
    }

    fn check_site(&self, i: usize) -> Result<()> {
        let n = self.system.n_spins();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, limit: n });
        }
        Ok(())
    }

    /// `⟨0|s_i^α|p⟩`.
    pub fn element(&self, i: usize, axis: Axis, p: usize) -> Result<Complex64> {
        self.check_site(i)?;
        self.elements[i][axis.index()]
            .get(p)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: p, limit: self.eigen.dim() })
    }

    /// Products `⟨0|s_i^α|p⟩⟨p|s_j^β|0⟩` for every level `p` (including `p = 0`).
    pub fn products(&self, i: usize, j: usize, alpha: Axis, beta: Axis) -> Result<Vec<Complex64>> {
        self.check_site(i)?;
        self.check_site(j)?;
        self.eigen.require_unique_ground()?;
        let a = &self.elements[i][alpha.index()];
        let b = &self.elements[j][beta.index()];
        Ok(a.iter().zip(b).map(|(x, y)| x * y.conj()).collect())
    }

    /// Products summed over degenerate levels, as `(E_p, weight)` pairs with
    /// ascending energy. Levels whose summed weight is below `threshold`
    /// are dropped.
    pub fn grouped_products(
        &self,
        i: usize,
        j: usize,
        alpha: Axis,
        beta: Axis,
        threshold: f64,
    ) -> Result<Vec<(f64, Complex64)>> {
        let products = self.products(i, j, alpha, beta)?;
        let tol = self.eigen.degeneracy_tol().max(1e-9);
        let mut groups: Vec<(f64, Complex64)> = Vec::new();
        for (p, w) in products.into_iter().enumerate() {
            let e = self.eigen.energies()[p];
            match groups.last_mut() {
                Some((e0, acc)) if (e - *e0).abs() <= tol => *acc += w,
                _ => groups.push((e, w)),
            }
        }
        groups.retain(|(_, w)| w.norm() > threshold);
        Ok(groups)
    }

    /// `C_ij^{αβ}(t) = Σ_p ⟨0|s_i^α|p⟩⟨p|s_j^β|0⟩ e^{−i E_p t}`.
    pub fn correlation(&self, i: usize, j: usize, alpha: Axis, beta: Axis, t: f64) -> Result<Complex64> {
        let products = self.products(i, j, alpha, beta)?;
        Ok(products
            .iter()
            .zip(self.eigen.energies())
            .map(|(w, &e)| w * Complex64::from_polar(1.0, -e * t))
            .sum())
    }

    pub fn matrix_elements(&self) -> Result<Vec<MatrixElement>> {
        self.eigen.require_unique_ground()?;
        let mut out = Vec::new();
        for site in 0..self.system.n_spins() {
            for axis in Axis::ALL {
                for (level, &value) in self.elements[site][axis.index()].iter().enumerate() {
                    out.push(MatrixElement {
                        site,
                        axis,
                        level,
                        energy: self.eigen.energies()[level],
                        value,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// `C_ij^{αβ}(t)` from a fresh diagonalization of `system`.
pub fn exact_correlation(system: &SpinSystem, i: usize, j: usize, alpha: Axis, beta: Axis, t: f64) -> Result<Complex64> {
    ExactSolver::new(system)?.correlation(i, j, alpha, beta, t)
}

/// All single-spin matrix elements between the ground state and every level.
pub fn exact_matrix_elements(system: &SpinSystem) -> Result<Vec<MatrixElement>> {
    ExactSolver::new(system)?.matrix_elements()
}
