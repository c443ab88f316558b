use num_complex::Complex64;

use crate::spin::Axis;

/// Pauli label of a controlled-Pauli gate; shares the spin-axis enum.
pub type Pauli = Axis;

/// 2×2 complex matrix, row-major.
pub type Matrix2 = [[Complex64; 2]; 2];

/// Elementary and composite gates. Rotations follow `R_α(θ) = e^{−iθ s^α}`
/// with `s^α = σ^α / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx { qubit: usize, theta: f64 },
    Ry { qubit: usize, theta: f64 },
    Rz { qubit: usize, theta: f64 },
    X(usize),
    Y(usize),
    Z(usize),
    H(usize),
    S(usize),
    Sdg(usize),
    Cnot { control: usize, target: usize },
    ControlledPauli { pauli: Pauli, control: usize, target: usize },
}

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Gate {
    pub fn rotation(axis: Axis, qubit: usize, theta: f64) -> Gate {
        match axis {
            Axis::X => Gate::Rx { qubit, theta },
            Axis::Y => Gate::Ry { qubit, theta },
            Axis::Z => Gate::Rz { qubit, theta },
        }
    }

    pub fn pauli(pauli: Pauli, qubit: usize) -> Gate {
        match pauli {
            Axis::X => Gate::X(qubit),
            Axis::Y => Gate::Y(qubit),
            Axis::Z => Gate::Z(qubit),
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rx { qubit, .. } | Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } => vec![qubit],
            Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::H(q) | Gate::S(q) | Gate::Sdg(q) => vec![q],
            Gate::Cnot { control, target } | Gate::ControlledPauli { control, target, .. } => vec![control, target],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. } | Gate::ControlledPauli { .. })
    }

    /// Member of the device gate set: any single-qubit gate, or a CNOT.
    pub fn is_elementary(&self) -> bool {
        !matches!(self, Gate::ControlledPauli { .. })
    }

    /// Relabels qubit operands.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::Rx { qubit, theta } => Gate::Rx { qubit: f(qubit), theta },
            Gate::Ry { qubit, theta } => Gate::Ry { qubit: f(qubit), theta },
            Gate::Rz { qubit, theta } => Gate::Rz { qubit: f(qubit), theta },
            Gate::X(q) => Gate::X(f(q)),
            Gate::Y(q) => Gate::Y(f(q)),
            Gate::Z(q) => Gate::Z(f(q)),
            Gate::H(q) => Gate::H(f(q)),
            Gate::S(q) => Gate::S(f(q)),
            Gate::Sdg(q) => Gate::Sdg(f(q)),
            Gate::Cnot { control, target } => Gate::Cnot { control: f(control), target: f(target) },
            Gate::ControlledPauli { pauli, control, target } => Gate::ControlledPauli {
                pauli,
                control: f(control),
                target: f(target),
            },
        }
    }

    /// Matrix of a single-qubit gate, or of the target action of a controlled gate.
    pub fn matrix(&self) -> Matrix2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match *self {
            Gate::Rx { theta, .. } => {
                let (s, co) = (theta / 2.0).sin_cos();
                [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
            }
            Gate::Ry { theta, .. } => {
                let (s, co) = (theta / 2.0).sin_cos();
                [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
            }
            Gate::Rz { theta, .. } => [
                [Complex64::from_polar(1.0, -theta / 2.0), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex64::from_polar(1.0, theta / 2.0)],
            ],
            Gate::X(_) | Gate::Cnot { .. } => pauli_matrix(Axis::X),
            Gate::Y(_) => pauli_matrix(Axis::Y),
            Gate::Z(_) => pauli_matrix(Axis::Z),
            Gate::ControlledPauli { pauli, .. } => pauli_matrix(pauli),
            Gate::H(_) => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
            Gate::S(_) => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]],
            Gate::Sdg(_) => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -1.0)]],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Gate::Rx { .. } => "rx",
            Gate::Ry { .. } => "ry",
            Gate::Rz { .. } => "rz",
            Gate::X(_) => "x",
            Gate::Y(_) => "y",
            Gate::Z(_) => "z",
            Gate::H(_) => "h",
            Gate::S(_) => "s",
            Gate::Sdg(_) => "sdg",
            Gate::Cnot { .. } => "cnot",
            Gate::ControlledPauli { pauli: Axis::X, .. } => "cx",
            Gate::ControlledPauli { pauli: Axis::Y, .. } => "cy",
            Gate::ControlledPauli { pauli: Axis::Z, .. } => "cz",
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { theta, .. } | Gate::Ry { theta, .. } | Gate::Rz { theta, .. } => Some(theta),
            _ => None,
        }
    }
}

pub fn pauli_matrix(p: Pauli) -> Matrix2 {
    match p {
        Axis::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        Axis::Y => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        Axis::Z => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
    }
}
