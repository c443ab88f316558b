use super::{Bond, SpinSystem};
use crate::error::Result;

/// A spin cluster re-expressed on spin-1/2 qubits, each spin `s` carried by
/// `2s` qubits with `s^α = Σ_k q_k^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSystem {
    pub qubit_system: SpinSystem,
    /// `registers[i]` lists the qubits that make up spin `i`.
    pub registers: Vec<Vec<usize>>,
}

impl EncodedSystem {
    pub fn is_identity(&self) -> bool {
        self.registers.iter().enumerate().all(|(i, r)| r.as_slice() == [i])
    }

    pub fn n_qubits(&self) -> usize {
        self.qubit_system.n_spins()
    }

    /// Qubit pairs `(a, b)` whose correlations sum to the spin-pair correlation of `(i, j)`.
    pub fn qubit_pairs(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &a in &self.registers[i] {
            for &b in &self.registers[j] {
                out.push((a, b));
            }
        }
        out
    }
}

/// Replaces every spin `s > 1/2` by `2s` qubits.
///
/// Qubits are assigned round-robin: the first qubit of every spin, then the
/// second qubit of every spin with `2s ≥ 2`, and so on. Two spin-1 sites thus
/// become `s_1 = q_0 + q_2`, `s_2 = q_1 + q_3`. Each spin bond turns into the
/// same coupling on every qubit pair across the two registers, and every
/// qubit inherits its site's g-factor and position. The register states stay
/// in the fully symmetric (maximal-spin) subspace when evolved from
/// `|↓…↓⟩`, so the encoded dynamics reproduce the original cluster.
pub fn encode_higher_spin(system: &SpinSystem) -> Result<EncodedSystem> {
    system.validate()?;
    let n = system.n_spins();
    let mut registers = vec![Vec::new(); n];
    let mut owner = Vec::new();
    let rounds = (0..n).map(|i| system.twice_spin(i)).max().unwrap_or(0);
    for round in 0..rounds {
        for (i, reg) in registers.iter_mut().enumerate() {
            if system.twice_spin(i) > round {
                reg.push(owner.len());
                owner.push(i);
            }
        }
    }
    let mut bonds = Vec::new();
    for b in &system.bonds {
        for &qa in &registers[b.i] {
            for &qb in &registers[b.j] {
                bonds.push(Bond::new(qa, qb, b.jp, b.jz));
            }
        }
    }
    let g_factors = owner.iter().map(|&i| system.g_factors[i]).collect();
    let positions = if system.positions.is_empty() {
        Vec::new()
    } else {
        owner.iter().map(|&i| system.positions[i]).collect()
    };
    let qubit_system = SpinSystem::new(vec![0.5; owner.len()], bonds, system.field, g_factors, positions)?;
    Ok(EncodedSystem { qubit_system, registers })
}
