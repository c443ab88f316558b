use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::DenseOperator;
use crate::error::{Error, Result};

/// Eigenpairs of a Hermitian operator, energies ascending and measured from
/// the ground state.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    energies: Vec<f64>,
    ground_energy: f64,
    vectors: DMatrix<Complex64>,
    degeneracy_tol: f64,
}

/// Diagonalizes a Hermitian operator.
///
/// Each eigenvector is rotated so that its largest-magnitude component (the
/// first one, on ties) is real and positive.
pub fn diagonalize(h: &DenseOperator) -> Result<EigenDecomposition> {
    let scale = h.frobenius_norm().max(1.0);
    let deviation = h.hermiticity_defect();
    if deviation > 1e-12 * scale {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.dim();
    // Symmetrize exactly before handing to the Hermitian solver.
    let sym = (h.matrix() + h.matrix().adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    let mut raw = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        raw.push(eig.eigenvalues[k]);
        let mut v: DVector<Complex64> = eig.eigenvectors.column(k).into_owned();
        fix_phase(&mut v);
        vectors.set_column(col, &v);
    }
    let ground_energy = raw.first().copied().unwrap_or(0.0);
    Ok(EigenDecomposition {
        energies: raw.iter().map(|e| e - ground_energy).collect(),
        ground_energy,
        vectors,
        degeneracy_tol: 1e-9 * scale,
    })
}

fn fix_phase(v: &mut DVector<Complex64>) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max - 1e-12).unwrap_or(0);
    let phase = v[pivot] / v[pivot].norm();
    let rot = phase.conj();
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

impl EigenDecomposition {
    /// Energies relative to the ground state (`E_0 = 0`).
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Absolute energies as returned by the solver.
    pub fn raw_energies(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e + self.ground_energy).collect()
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Eigenvectors as columns, in the order of [`energies`](Self::energies).
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn vector(&self, p: usize) -> DVector<Complex64> {
        self.vectors.column(p).into_owned()
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    pub fn ground_gap(&self) -> f64 {
        self.energies.get(1).copied().unwrap_or(f64::INFINITY)
    }

    pub fn ground_is_degenerate(&self) -> bool {
        self.ground_gap() <= self.degeneracy_tol
    }

    pub fn require_unique_ground(&self) -> Result<()> {
        if self.ground_is_degenerate() {
            return Err(Error::DegenerateGroundState { gap: self.ground_gap() });
        }
        Ok(())
    }

    /// True when level `p` shares its energy with another level.
    pub fn is_degenerate(&self, p: usize) -> bool {
        let e = self.energies[p];
        self.energies
            .iter()
            .enumerate()
            .any(|(q, &f)| q != p && (f - e).abs() <= self.degeneracy_tol)
    }

    /// Largest `‖H v_p − E_p v_p‖` over all eigenpairs.
    pub fn max_residual(&self, h: &DenseOperator) -> f64 {
        let raw = self.raw_energies();
        (0..self.dim())
            .map(|p| {
                let v = self.vectors.column(p);
                (h.matrix() * v - v * Complex64::new(raw[p], 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|V†V − 1|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.vectors.adjoint() * &self.vectors;
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let t = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((g[(r, c)] - Complex64::new(t, 0.0)).norm());
            }
        }
        worst
    }
}
