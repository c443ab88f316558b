//! Second-order product-formula compilation of `U(t) = e^{−iHt}` for
//! spin-1/2 XXZ clusters.
//!
//! One step of length τ is `Z(τ/2) · B(τ) · Z(τ/2)` where `Z` is the Zeeman
//! part (one `Rz` per qubit) and `B` is the exchange part. Bonds are greedily
//! edge-coloured into layers of disjoint (hence commuting) two-body blocks;
//! with several layers `B(τ)` is itself split symmetrically as
//! `L1(τ/2) … L(k−1)(τ/2) Lk(τ) L(k−1)(τ/2) … L1(τ/2)`.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::spin::{build_hamiltonian, site_operator, Axis, Bond, DenseOperator, SpinSystem};

use std::f64::consts::FRAC_PI_2;

/// Piecewise-constant step count: `(Jt_max, n)` buckets with strictly
/// increasing bounds. A time belongs to the first bucket whose bound it
/// does not exceed, so a time exactly on a bound uses the lower bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, usize)>", into = "Vec<(f64, usize)>")]
pub struct TrotterSchedule {
    buckets: Vec<(f64, usize)>,
}

impl TrotterSchedule {
    pub const DEFAULT_STEPS: usize = 4;

    pub fn new(buckets: Vec<(f64, usize)>) -> Result<Self> {
        if buckets.is_empty() {
            return Err(Error::InvalidSchedule("no buckets".into()));
        }
        for (k, &(bound, n)) in buckets.iter().enumerate() {
            if n == 0 {
                return Err(Error::InvalidSchedule(format!("bucket {k} has zero steps")));
            }
            if bound.is_nan() || bound < 0.0 {
                return Err(Error::InvalidSchedule(format!("bucket {k} has bound {bound}")));
            }
            if k > 0 && bound <= buckets[k - 1].0 {
                return Err(Error::InvalidSchedule("bounds must be strictly increasing".into()));
            }
        }
        Ok(TrotterSchedule { buckets })
    }

    /// `n` steps for every time.
    pub fn uniform(n: usize) -> Result<Self> {
        TrotterSchedule::new(vec![(f64::INFINITY, n)])
    }

    pub fn buckets(&self) -> &[(f64, usize)] {
        &self.buckets
    }

    pub fn max_time(&self) -> f64 {
        self.buckets.last().map_or(0.0, |b| b.0)
    }

    pub fn steps_for(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.buckets
            .iter()
            .find(|(bound, _)| t <= bound + tol)
            .map(|&(_, n)| n)
            .ok_or(Error::BeyondSchedule {
                time: t,
                limit: self.max_time(),
            })
    }
}

impl Default for TrotterSchedule {
    fn default() -> Self {
        TrotterSchedule {
            buckets: vec![(f64::INFINITY, Self::DEFAULT_STEPS)],
        }
    }
}

impl TryFrom<Vec<(f64, usize)>> for TrotterSchedule {
    type Error = Error;
    fn try_from(buckets: Vec<(f64, usize)>) -> Result<Self> {
        TrotterSchedule::new(buckets)
    }
}

impl From<TrotterSchedule> for Vec<(f64, usize)> {
    fn from(s: TrotterSchedule) -> Self {
        s.buckets
    }
}

/// Zeeman / exchange decomposition of a spin-1/2 Hamiltonian, with the
/// exchange bonds grouped into layers of qubit-disjoint bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSplit {
    n_qubits: usize,
    zeeman: Vec<f64>,
    layers: Vec<Vec<Bond>>,
    system: SpinSystem,
}

impl HamiltonianSplit {
    pub fn new(system: &SpinSystem) -> Result<Self> {
        system.validate()?;
        if !system.is_spin_half() {
            return Err(Error::InvalidSystem(
                "product-formula compilation needs spin-1/2 sites; encode higher spins first".into(),
            ));
        }
        let n = system.n_spins();
        let mut layers: Vec<Vec<Bond>> = Vec::new();
        for bond in system.bonds.iter().filter(|b| b.jp != 0.0 || b.jz != 0.0) {
            let free = |layer: &Vec<Bond>| layer.iter().all(|b| ![b.i, b.j].contains(&bond.i) && ![b.i, b.j].contains(&bond.j));
            match layers.iter_mut().find(|l| free(l)) {
                Some(layer) => layer.push(*bond),
                None => layers.push(vec![*bond]),
            }
        }
        Ok(HamiltonianSplit {
            n_qubits: n,
            zeeman: (0..n).map(|i| system.zeeman(i)).collect(),
            layers,
            system: system.clone(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Per-qubit Zeeman coefficients `h_i` with `H1 = Σ h_i s^z_i`.
    pub fn zeeman(&self) -> &[f64] {
        &self.zeeman
    }

    pub fn layers(&self) -> &[Vec<Bond>] {
        &self.layers
    }

    /// True when the Zeeman part commutes with every bond: each bond is
    /// either Ising-like or joins equal Zeeman splittings.
    pub fn zeeman_commutes(&self) -> bool {
        self.layers.iter().flatten().all(|b| {
            let (hi, hj) = (self.zeeman[b.i], self.zeeman[b.j]);
            b.jp == 0.0 || (hi - hj).abs() <= 1e-12 * hi.abs().max(hj.abs()).max(1.0)
        })
    }

    pub fn zeeman_operator(&self) -> Result<DenseOperator> {
        let dim = 1usize << self.n_qubits;
        let mut h = nalgebra::DMatrix::zeros(dim, dim);
        for (i, &z) in self.zeeman.iter().enumerate() {
            h += site_operator(&self.system, i, Axis::Z)?.into_matrix() * num_complex::Complex64::new(z, 0.0);
        }
        DenseOperator::new(h)
    }

    pub fn exchange_operator(&self) -> Result<DenseOperator> {
        let mut bare = self.system.clone();
        bare.field = 0.0;
        build_hamiltonian(&bare)
    }

    pub fn hamiltonian(&self) -> Result<DenseOperator> {
        build_hamiltonian(&self.system)
    }
}

/// `e^{−iτ[J_p(s^x s^x + s^y s^y) + J_z s^z s^z]}` on qubits `(q0, q1)`
/// with three CNOTs, or two for a pure Ising coupling.
pub fn two_body_block(n_qubits: usize, q0: usize, q1: usize, jp: f64, jz: f64, tau: f64) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    if jp == 0.0 {
        if jz != 0.0 && tau != 0.0 {
            c.push(Gate::Cnot { control: q0, target: q1 })?;
            c.push(Gate::Rz { qubit: q1, theta: tau * jz / 2.0 })?;
            c.push(Gate::Cnot { control: q0, target: q1 })?;
        }
        return Ok(c);
    }
    // e^{i(a XX + b YY + c ZZ)}
    let a = -tau * jp / 4.0;
    let b = a;
    let cz = -tau * jz / 4.0;
    for g in [
        Gate::Rz { qubit: q1, theta: FRAC_PI_2 },
        Gate::Cnot { control: q1, target: q0 },
        Gate::Rz { qubit: q0, theta: FRAC_PI_2 - 2.0 * cz },
        Gate::Ry { qubit: q1, theta: FRAC_PI_2 - 2.0 * a },
        Gate::Cnot { control: q0, target: q1 },
        Gate::Ry { qubit: q1, theta: 2.0 * b - FRAC_PI_2 },
        Gate::Cnot { control: q1, target: q0 },
        Gate::Rz { qubit: q0, theta: -FRAC_PI_2 },
    ] {
        c.push(g)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    Zeeman(f64),
    Layer(usize, f64),
}

impl Factor {
    fn merge(self, other: Factor) -> Option<Factor> {
        match (self, other) {
            (Factor::Zeeman(a), Factor::Zeeman(b)) => Some(Factor::Zeeman(a + b)),
            (Factor::Layer(k, a), Factor::Layer(l, b)) if k == l => Some(Factor::Layer(k, a + b)),
            _ => None,
        }
    }
}

fn step_factors(n_layers: usize, tau: f64, out: &mut Vec<Factor>) {
    out.push(Factor::Zeeman(tau / 2.0));
    if n_layers > 0 {
        let last = n_layers - 1;
        for k in 0..last {
            out.push(Factor::Layer(k, tau / 2.0));
        }
        out.push(Factor::Layer(last, tau));
        for k in (0..last).rev() {
            out.push(Factor::Layer(k, tau / 2.0));
        }
    }
    out.push(Factor::Zeeman(tau / 2.0));
}

fn merged(factors: impl IntoIterator<Item = Factor>) -> Vec<Factor> {
    let mut out: Vec<Factor> = Vec::new();
    for f in factors {
        match out.last().and_then(|last| last.merge(f)) {
            Some(m) => *out.last_mut().expect("non-empty") = m,
            None => out.push(f),
        }
    }
    out
}

fn emit(split: &HamiltonianSplit, factors: &[Factor]) -> Result<Circuit> {
    let mut c = Circuit::new(split.n_qubits);
    for &f in factors {
        match f {
            Factor::Zeeman(dt) => {
                for (q, &h) in split.zeeman.iter().enumerate() {
                    if h != 0.0 && dt != 0.0 {
                        c.push(Gate::Rz { qubit: q, theta: dt * h })?;
                    }
                }
            }
            Factor::Layer(k, dt) => {
                for b in &split.layers[k] {
                    c.append(&two_body_block(split.n_qubits, b.i, b.j, b.jp, b.jz, dt)?)?;
                }
            }
        }
    }
    Ok(c)
}

/// One symmetric product-formula step of length `tau`.
pub fn trotter_step(split: &HamiltonianSplit, tau: f64) -> Result<Circuit> {
    let mut factors = Vec::new();
    step_factors(split.layers.len(), tau, &mut factors);
    emit(split, &merged(factors))
}

/// `n(t)` steps of length `t / n(t)` with `n(t)` taken from `schedule`.
///
/// Adjacent factors of consecutive steps are fused. When the Zeeman part
/// commutes with the exchange part it is applied once for the whole time.
pub fn evolve_circuit(split: &HamiltonianSplit, t: f64, schedule: &TrotterSchedule) -> Result<Circuit> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("evolution time must be finite and non-negative, got {t}")));
    }
    let n = schedule.steps_for(t)?;
    if t == 0.0 {
        return Ok(Circuit::new(split.n_qubits));
    }
    let tau = t / n as f64;
    let mut factors = Vec::new();
    for _ in 0..n {
        step_factors(split.layers.len(), tau, &mut factors);
    }
    if split.zeeman_commutes() {
        let (zeeman, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| matches!(f, Factor::Zeeman(_)));
        let total = zeeman.iter().map(|f| if let Factor::Zeeman(dt) = f { *dt } else { 0.0 }).sum();
        factors = std::iter::once(Factor::Zeeman(total)).chain(rest).collect();
    }
    emit(split, &merged(factors))
}
