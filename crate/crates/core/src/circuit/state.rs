use num_complex::Complex64;

use super::gate::{Gate, Matrix2};
use super::Circuit;
use crate::error::{Error, Result};
use crate::spin::Axis;

/// Pure state of `n` qubits. Qubit 0 is the most significant bit of the
/// amplitude index, matching the tensor ordering of [`crate::spin`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn new(n_qubits: usize) -> Self {
        StateVector::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n_qubits {
            return Err(Error::InvalidCircuit(format!("{} amplitudes is not a power of two", amps.len())));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::IndexOutOfRange { index: qubit, limit: self.n_qubits });
        }
        Ok(())
    }

    fn apply_1q(&mut self, qubit: usize, m: &Matrix2) {
        let mask = self.mask(qubit);
        for i0 in 0..self.amps.len() {
            if i0 & mask != 0 {
                continue;
            }
            let i1 = i0 | mask;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn apply_controlled(&mut self, control: usize, target: usize, m: &Matrix2) {
        let (cm, tm) = (self.mask(control), self.mask(target));
        for i0 in 0..self.amps.len() {
            if i0 & cm == 0 || i0 & tm != 0 {
                continue;
            }
            let i1 = i0 | tm;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        for q in gate.qubits() {
            self.check(q)?;
        }
        match *gate {
            Gate::Cnot { control, target } | Gate::ControlledPauli { control, target, .. } => {
                if control == target {
                    return Err(Error::InvalidCircuit("two-qubit gate with identical operands".into()));
                }
                self.apply_controlled(control, target, &gate.matrix());
            }
            _ => {
                let q = gate.qubits()[0];
                self.apply_1q(q, &gate.matrix());
            }
        }
        Ok(())
    }

    /// `⟨s^α⟩ = ⟨σ^α⟩ / 2` on one qubit; `|0⟩` has `⟨s^z⟩ = +1/2`.
    pub fn expectation(&self, qubit: usize, axis: Axis) -> Result<f64> {
        self.check(qubit)?;
        let mask = self.mask(qubit);
        let mut acc = 0.0;
        for i0 in 0..self.amps.len() {
            if i0 & mask != 0 {
                continue;
            }
            let (a0, a1) = (self.amps[i0], self.amps[i0 | mask]);
            acc += match axis {
                Axis::X => 2.0 * (a0.conj() * a1).re,
                Axis::Y => 2.0 * (a0.conj() * a1).im,
                Axis::Z => a0.norm_sqr() - a1.norm_sqr(),
            };
        }
        Ok(acc / 2.0)
    }

    /// Probability of reading `1` on `qubit`.
    pub fn probability_one(&self, qubit: usize) -> Result<f64> {
        self.check(qubit)?;
        let mask = self.mask(qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, z)| z.norm_sqr())
            .sum())
    }

    /// Joint outcome distribution of `qubits`; bit `k` of the outcome index is `qubits[k]`.
    pub fn marginal_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        for &q in qubits {
            self.check(q)?;
        }
        let masks: Vec<usize> = qubits.iter().map(|&q| self.mask(q)).collect();
        let mut out = vec![0.0; 1 << qubits.len()];
        for (i, z) in self.amps.iter().enumerate() {
            let key = masks
                .iter()
                .enumerate()
                .fold(0usize, |k, (b, &m)| if i & m != 0 { k | (1 << b) } else { k });
            out[key] += z.norm_sqr();
        }
        Ok(out)
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Noiseless unitary action of `circuit` on `state`.
pub fn apply_circuit(state: &StateVector, circuit: &Circuit) -> Result<StateVector> {
    if circuit.n_qubits() != state.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits(),
            found: circuit.n_qubits(),
        });
    }
    let mut out = state.clone();
    for g in circuit.gates() {
        out.apply_gate(g)?;
    }
    Ok(out)
}
