//! Gate-level state-vector engine, device coupling maps, shot sampling with
//! simple noise channels, and a transpiler onto `{single-qubit, CNOT}`.

mod gate;
mod noise;
mod state;
mod topology;
mod transpile;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin::Axis;

pub use gate::{pauli_matrix, Gate, Matrix2, Pauli};
pub use noise::{execute, run_noisy_trajectory, sample_probabilities, sample_shots, Counts, NoiseSpec};
pub use state::{apply_circuit, StateVector};
pub use topology::DeviceTopology;
pub use transpile::{choose_layout, transpile, Layout};

/// Ordered gate list over `n_qubits` qubits, optionally designating an ancilla.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    ancilla: Option<usize>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            ancilla: None,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn ancilla(&self) -> Option<usize> {
        self.ancilla
    }

    pub fn set_ancilla(&mut self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::IndexOutOfRange { index: qubit, limit: self.n_qubits });
        }
        self.ancilla = Some(qubit);
        Ok(())
    }

    fn validate_gate(&self, gate: &Gate) -> Result<()> {
        let qs = gate.qubits();
        for &q in &qs {
            if q >= self.n_qubits {
                return Err(Error::IndexOutOfRange { index: q, limit: self.n_qubits });
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidCircuit(format!("{} on identical qubits {}", gate.kind_name(), qs[0])));
        }
        if let Some(theta) = gate.angle() {
            if !theta.is_finite() {
                return Err(Error::InvalidCircuit("non-finite rotation angle".into()));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        self.validate_gate(&gate)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends all gates of `other`, which must act on no more qubits.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    /// Number of layers when every gate is scheduled as early as its operands allow.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        for g in &self.gates {
            let qs = g.qubits();
            let d = qs.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for q in qs {
                level[q] = d;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    /// Circuit over `n_qubits` with every operand relabeled through `map`.
    pub fn remapped(&self, n_qubits: usize, map: &[usize]) -> Result<Circuit> {
        let mut out = Circuit::new(n_qubits);
        for g in &self.gates {
            out.push(g.remap(|q| map[q]))?;
        }
        if let Some(a) = self.ancilla {
            out.set_ancilla(map[a])?;
        }
        Ok(out)
    }

    /// Drops qubits that no gate touches (the ancilla is always kept).
    /// Returns the compacted circuit and, for each new qubit, its old index.
    pub fn compact(&self) -> (Circuit, Vec<usize>) {
        let mut used = vec![false; self.n_qubits];
        for g in &self.gates {
            for q in g.qubits() {
                used[q] = true;
            }
        }
        if let Some(a) = self.ancilla {
            used[a] = true;
        }
        let old: Vec<usize> = (0..self.n_qubits).filter(|&q| used[q]).collect();
        let mut new_of = vec![usize::MAX; self.n_qubits];
        for (k, &q) in old.iter().enumerate() {
            new_of[q] = k;
        }
        let out = self.remapped(old.len(), &new_of).expect("compaction keeps operands in range");
        (out, old)
    }

    /// Dense unitary, column `k` being the image of basis state `k`.
    pub fn unitary(&self) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > 12 {
            return Err(Error::InvalidArgument(format!(
                "dense unitary of {} qubits is too large",
                self.n_qubits
            )));
        }
        let dim = 1 << self.n_qubits;
        let mut u = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let out = apply_circuit(&StateVector::basis(self.n_qubits, k), self)?;
            for (r, a) in out.amplitudes().iter().enumerate() {
                u[(r, k)] = *a;
            }
        }
        Ok(u)
    }

    /// Line-oriented text: `qubits N`, optional `ancilla K`, then one gate
    /// per line as `kind qubit... [angle]`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "qubits {}", self.n_qubits);
        if let Some(a) = self.ancilla {
            let _ = writeln!(s, "ancilla {a}");
        }
        for g in &self.gates {
            let _ = write!(s, "{}", g.kind_name());
            for q in g.qubits() {
                let _ = write!(s, " {q}");
            }
            if let Some(theta) = g.angle() {
                let _ = write!(s, " {theta:?}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut circuit: Option<Circuit> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| Error::parse(format!("circuit line {}", lineno + 1), m.to_string());
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<usize> {
                tok.get(k)
                    .ok_or_else(|| err("missing qubit index"))?
                    .parse::<usize>()
                    .map_err(|e| err(&e.to_string()))
            };
            let angle = |k: usize| -> Result<f64> {
                tok.get(k)
                    .ok_or_else(|| err("missing angle"))?
                    .parse::<f64>()
                    .map_err(|e| err(&e.to_string()))
            };
            let kind = tok[0].to_ascii_lowercase();
            if kind == "qubits" {
                circuit = Some(Circuit::new(num(1)?));
                continue;
            }
            let c = circuit.as_mut().ok_or_else(|| err("gate before 'qubits' header"))?;
            let expect_len = |n: usize| -> Result<()> {
                if tok.len() != n {
                    return Err(err(&format!("expected {} fields, found {}", n, tok.len())));
                }
                Ok(())
            };
            let gate = match kind.as_str() {
                "ancilla" => {
                    expect_len(2)?;
                    c.set_ancilla(num(1)?).map_err(|e| err(&e.to_string()))?;
                    continue;
                }
                "rx" | "ry" | "rz" => {
                    expect_len(3)?;
                    let axis = Axis::from_char(kind.chars().nth(1).unwrap()).unwrap();
                    Gate::rotation(axis, num(1)?, angle(2)?)
                }
                "x" | "y" | "z" | "h" | "s" | "sdg" => {
                    expect_len(2)?;
                    let q = num(1)?;
                    match kind.as_str() {
                        "x" => Gate::X(q),
                        "y" => Gate::Y(q),
                        "z" => Gate::Z(q),
                        "h" => Gate::H(q),
                        "s" => Gate::S(q),
                        _ => Gate::Sdg(q),
                    }
                }
                "cnot" => {
                    expect_len(3)?;
                    Gate::Cnot { control: num(1)?, target: num(2)? }
                }
                "cx" | "cy" | "cz" => {
                    expect_len(3)?;
                    Gate::ControlledPauli {
                        pauli: Axis::from_char(kind.chars().nth(1).unwrap()).unwrap(),
                        control: num(1)?,
                        target: num(2)?,
                    }
                }
                other => return Err(err(&format!("unknown gate '{other}'"))),
            };
            c.push(gate).map_err(|e| err(&e.to_string()))?;
        }
        circuit.ok_or_else(|| Error::parse("circuit", "missing 'qubits' header"))
    }
}

/// Distance between two unitaries after removing the best global phase
/// (Frobenius norm of `U − e^{iφ} V`).
pub fn phase_insensitive_distance(u: &DMatrix<Complex64>, v: &DMatrix<Complex64>) -> f64 {
    let overlap: Complex64 = v.iter().zip(u.iter()).map(|(a, b)| a.conj() * b).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    (u - v * phase).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_out_of_range_and_repeated_operands() {
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::H(2)).is_err());
        assert!(c.push(Gate::Cnot { control: 1, target: 1 }).is_err());
        assert!(c.push(Gate::Cnot { control: 1, target: 0 }).is_ok());
    }

    #[test]
    fn depth_and_counts() {
        let mut c = Circuit::new(3);
        for g in [Gate::H(0), Gate::H(1), Gate::Cnot { control: 0, target: 1 }, Gate::X(2), Gate::ControlledPauli { pauli: Axis::Z, control: 2, target: 1 }] {
            c.push(g).unwrap();
        }
        assert_eq!(c.depth(), 3);
        assert_eq!(c.cnot_count(), 1);
        assert_eq!(c.two_qubit_count(), 2);
    }

    #[test]
    fn compact_drops_idle_qubits() {
        let mut c = Circuit::new(5);
        c.push(Gate::Cnot { control: 4, target: 1 }).unwrap();
        c.set_ancilla(3).unwrap();
        let (k, old) = c.compact();
        assert_eq!(old, vec![1, 3, 4]);
        assert_eq!(k.gates(), &[Gate::Cnot { control: 2, target: 0 }]);
        assert_eq!(k.ancilla(), Some(1));
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let err = Circuit::from_text("qubits 2\nh 0\nfoo 1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(Circuit::from_text("h 0").is_err());
        assert!(Circuit::from_text("qubits 1\nrx 0\n").is_err());
    }

    fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
        let q = 0..n;
        prop_oneof![
            (q.clone(), -6.0f64..6.0, 0..3usize).prop_map(|(q, t, a)| Gate::rotation(Axis::ALL[a], q, t)),
            (q.clone(), 0..6usize).prop_map(|(q, k)| [Gate::X(q), Gate::Y(q), Gate::Z(q), Gate::H(q), Gate::S(q), Gate::Sdg(q)][k]),
            (q.clone(), 1..n, 0..4usize).prop_map(move |(c, d, k)| {
                let t = (c + d) % n;
                if k == 3 { Gate::Cnot { control: c, target: t } } else { Gate::ControlledPauli { pauli: Axis::ALL[k], control: c, target: t } }
            }),
        ]
    }

    proptest! {
        #[test]
        fn text_round_trip(gates in prop::collection::vec(gate_strategy(4), 0..30), anc in prop::option::of(0..4usize)) {
            let mut c = Circuit::new(4);
            for g in gates { c.push(g).unwrap(); }
            if let Some(a) = anc { c.set_ancilla(a).unwrap(); }
            let back = Circuit::from_text(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
