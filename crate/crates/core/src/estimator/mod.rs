//! Ancilla-interferometry estimation of `C_ij^{αβ}(t) = ⟨s_i^α(t) s_j^β(0)⟩`
//! in the field-polarized ground state `|↓…↓⟩`.
//!
//! Circuit (logical wires `0..n` are the spins, wire `n` the ancilla):
//! prepare `|1…1⟩ ⊗ |+⟩`, controlled-`σ^β` onto `j`, `U(t)`, controlled-`σ^α`
//! onto `i`, then an ancilla pre-rotation (`R_y(−π/2)` for the x quadrature,
//! `R_x(π/2)` for y) and a z readout of the ancilla.

mod series;

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{self, choose_layout, transpile, Circuit, DeviceTopology, Gate, Layout, NoiseSpec, StateVector};
use crate::error::{Error, Result};
use crate::spin::{build_hamiltonian, diagonalize, encode_higher_spin, Axis, SpinSystem};
use crate::trotter::{evolve_circuit, HamiltonianSplit, TrotterSchedule};

pub use series::{composite_correlation_for_higher_spin, correct_series, CorrelationSeries, SeriesMetadata};

/// Normalization: `C = KAPPA · (⟨s_a^x⟩ + i·SIGMA_SIGN·⟨s_a^y⟩)`.
pub const KAPPA: f64 = 0.5;
pub const SIGMA_SIGN: f64 = 1.0;

/// A correlation channel `(i, j, α, β)`. Text form: `i,j,αβ`, e.g. `0,1,xx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Channel {
    pub i: usize,
    pub j: usize,
    pub alpha: Axis,
    pub beta: Axis,
}

impl Channel {
    pub fn new(i: usize, j: usize, alpha: Axis, beta: Axis) -> Self {
        Channel { i, j, alpha, beta }
    }

    pub fn auto(i: usize, axis: Axis) -> Self {
        Channel::new(i, i, axis, axis)
    }

    pub fn is_autocorrelation(&self) -> bool {
        self.i == self.j && self.alpha == self.beta
    }

    /// File-name friendly label, e.g. `c_0_1_xx`.
    pub fn file_stem(&self) -> String {
        format!("c_{}_{}_{}{}", self.i, self.j, self.alpha.label(), self.beta.label())
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}{}", self.i, self.j, self.alpha.label(), self.beta.label())
    }
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("channel", format!("expected 'i,j,ab', got '{s}'"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [i, j, axes] = parts.as_slice() else { return Err(bad()) };
        let mut chars = axes.chars();
        let (Some(a), Some(b), None) = (chars.next(), chars.next(), chars.next()) else { return Err(bad()) };
        Ok(Channel {
            i: i.parse().map_err(|_| bad())?,
            j: j.parse().map_err(|_| bad())?,
            alpha: Axis::from_char(a).ok_or_else(bad)?,
            beta: Axis::from_char(b).ok_or_else(bad)?,
        })
    }
}

impl TryFrom<String> for Channel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Channel> for String {
    fn from(c: Channel) -> String {
        c.to_string()
    }
}

/// Transpiled x- and y-quadrature circuits over the topology's qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationCircuits {
    pub circuit_x: Circuit,
    pub circuit_y: Circuit,
    /// Physical qubit carrying the ancilla.
    pub ancilla: usize,
    pub layout: Layout,
}

/// One raw estimate with per-quadrature standard errors (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub value: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// Errors unless the ground state is the unique polarized state `|↓…↓⟩`.
pub fn require_polarized_ground(system: &SpinSystem) -> Result<()> {
    let eig = diagonalize(&build_hamiltonian(system)?)?;
    eig.require_unique_ground()?;
    let all_down = eig.dim() - 1;
    let weight = eig.vector(0)[all_down].norm_sqr();
    if (weight - 1.0).abs() > 1e-9 {
        return Err(Error::NonProductGroundState(format!("ground-state weight on |↓…↓⟩ is {weight:.6}")));
    }
    Ok(())
}

fn spin_half_split(system: &SpinSystem) -> Result<HamiltonianSplit> {
    if !system.is_spin_half() {
        return Err(Error::InvalidSystem("estimator circuits act on spin-1/2 sites; encode higher spins first".into()));
    }
    HamiltonianSplit::new(system)
}

/// Logical-wire interactions an estimator for `(i, j)` needs.
fn interactions(system: &SpinSystem, i: usize, j: usize) -> Vec<(usize, usize)> {
    let anc = system.n_spins();
    let mut out: Vec<(usize, usize)> = system.bonds.iter().map(|b| (b.i, b.j)).collect();
    out.push((anc, i));
    out.push((anc, j));
    out
}

/// Layout for the estimator of spins `(i, j)` on `topology`.
pub fn estimator_layout(system: &SpinSystem, i: usize, j: usize, topology: &DeviceTopology) -> Result<Layout> {
    let n = system.n_spins();
    for k in [i, j] {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, limit: n });
        }
    }
    choose_layout(n + 1, &interactions(system, i, j), topology)
}

fn logical_circuits(split: &HamiltonianSplit, channel: Channel, t: f64, schedule: &TrotterSchedule) -> Result<(Circuit, Circuit)> {
    let n = split.n_qubits();
    let anc = n;
    let mut body = Circuit::new(n + 1);
    body.set_ancilla(anc)?;
    for q in 0..n {
        body.push(Gate::X(q))?;
    }
    body.push(Gate::H(anc))?;
    body.push(Gate::ControlledPauli { pauli: channel.beta, control: anc, target: channel.j })?;
    let evolution = evolve_circuit(split, t, schedule)?;
    let wires: Vec<usize> = (0..n).collect();
    body.append(&evolution.remapped(n + 1, &wires)?)?;
    body.push(Gate::ControlledPauli { pauli: channel.alpha, control: anc, target: channel.i })?;
    let mut cx = body.clone();
    cx.push(Gate::Ry { qubit: anc, theta: -FRAC_PI_2 })?;
    let mut cy = body;
    cy.push(Gate::Rx { qubit: anc, theta: FRAC_PI_2 })?;
    Ok((cx, cy))
}

fn circuits_with_layout(
    split: &HamiltonianSplit,
    channel: Channel,
    t: f64,
    schedule: &TrotterSchedule,
    topology: &DeviceTopology,
    layout: &Layout,
) -> Result<EstimationCircuits> {
    let (cx, cy) = logical_circuits(split, channel, t, schedule)?;
    let place = |c: &Circuit| -> Result<Circuit> { transpile(&c.remapped(topology.n_qubits(), &layout.physical)?, topology) };
    Ok(EstimationCircuits {
        circuit_x: place(&cx)?,
        circuit_y: place(&cy)?,
        ancilla: layout.physical[split.n_qubits()],
        layout: layout.clone(),
    })
}

/// Builds the transpiled estimator circuits of `C_ij^{αβ}(t)`.
#[allow(clippy::too_many_arguments)]
pub fn build_estimation_circuits(
    system: &SpinSystem,
    i: usize,
    j: usize,
    alpha: Axis,
    beta: Axis,
    t: f64,
    schedule: &TrotterSchedule,
    topology: &DeviceTopology,
) -> Result<EstimationCircuits> {
    let split = spin_half_split(system)?;
    require_polarized_ground(system)?;
    let layout = estimator_layout(system, i, j, topology)?;
    circuits_with_layout(&split, Channel::new(i, j, alpha, beta), t, schedule, topology, &layout)
}

/// `⟨s_a^z⟩` after `circuit` and its standard error (zero when exact).
fn measure_ancilla(circuit: &Circuit, noise: Option<&NoiseSpec>, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let (compact, _) = circuit.compact();
    let anc = compact.ancilla().ok_or_else(|| Error::InvalidCircuit("estimator circuit lost its ancilla".into()))?;
    let initial = StateVector::new(compact.n_qubits());
    match noise {
        None => {
            let state = circuit::apply_circuit(&initial, &compact)?;
            Ok((state.expectation(anc, Axis::Z)?, 0.0))
        }
        Some(noise) => {
            let counts = circuit::execute(&compact, &initial, &[anc], noise, rng)?;
            let z = counts.z_expectation(0);
            let shots = counts.shots() as f64;
            Ok((z / 2.0, 0.5 * ((1.0 - z * z).max(0.0) / shots).sqrt()))
        }
    }
}

fn estimate_with(circuits: &EstimationCircuits, noise: Option<&NoiseSpec>, rng: &mut ChaCha8Rng) -> Result<PointEstimate> {
    let (sx, ex) = measure_ancilla(&circuits.circuit_x, noise, rng)?;
    let (sy, ey) = measure_ancilla(&circuits.circuit_y, noise, rng)?;
    Ok(PointEstimate {
        value: Complex64::new(KAPPA * sx, KAPPA * SIGMA_SIGN * sy),
        stderr_re: KAPPA * ex,
        stderr_im: KAPPA * ey,
    })
}

/// Estimates `C_ij^{αβ}(t)`: exactly when `noise` is `None`, otherwise from
/// sampled shots drawn from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_point(
    system: &SpinSystem,
    channel: Channel,
    t: f64,
    schedule: &TrotterSchedule,
    topology: &DeviceTopology,
    noise: Option<&NoiseSpec>,
    seed: u64,
) -> Result<PointEstimate> {
    let circuits = build_estimation_circuits(system, channel.i, channel.j, channel.alpha, channel.beta, t, schedule, topology)?;
    estimate_with(&circuits, noise, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Mixes `words` into a 64-bit seed (splitmix64 finalizer).
pub fn derive_seed(global: u64, words: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    words.iter().fold(mix(global), |acc, &w| mix(acc ^ mix(w)))
}

/// Settings shared by every point of a batch run.
#[derive(Debug, Clone)]
pub struct SeriesRequest<'a> {
    pub system: &'a SpinSystem,
    pub channels: &'a [Channel],
    pub times: &'a [f64],
    pub schedule: &'a TrotterSchedule,
    pub topology: &'a DeviceTopology,
    /// `None` for exact expectations.
    pub noise: Option<&'a NoiseSpec>,
    pub seed: u64,
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidGrid("times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Raw series for every requested channel. Spins above 1/2 are encoded
/// on qubits and their series assembled from qubit-pair series. Points run
/// in parallel; each draws from its own seed derived from `seed`, the
/// channel and the time index, so results do not depend on scheduling.
pub fn run_series(req: &SeriesRequest<'_>) -> Result<Vec<CorrelationSeries>> {
    check_grid(req.times)?;
    let system = req.system;
    let n = system.n_spins();
    for c in req.channels {
        for k in [c.i, c.j] {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, limit: n });
            }
        }
    }
    require_polarized_ground(system)?;
    if system.is_spin_half() {
        return run_qubit_series(system, req.channels, req);
    }
    let encoded = encode_higher_spin(system)?;
    let mut qubit_channels: Vec<Channel> = req
        .channels
        .iter()
        .flat_map(|c| encoded.qubit_pairs(c.i, c.j).into_iter().map(move |(a, b)| Channel::new(a, b, c.alpha, c.beta)))
        .collect();
    qubit_channels.sort();
    qubit_channels.dedup();
    let qubit_series = run_qubit_series(&encoded.qubit_system, &qubit_channels, req)?;
    req.channels
        .iter()
        .map(|c| composite_correlation_for_higher_spin(&encoded, *c, &qubit_series))
        .collect()
}

fn run_qubit_series(system: &SpinSystem, channels: &[Channel], req: &SeriesRequest<'_>) -> Result<Vec<CorrelationSeries>> {
    let split = spin_half_split(system)?;
    let layouts: Vec<Layout> = channels
        .iter()
        .map(|c| estimator_layout(system, c.i, c.j, req.topology))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..channels.len()).flat_map(|c| (0..req.times.len()).map(move |k| (c, k))).collect();
    let points: Vec<PointEstimate> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let ch = channels[c];
            let circuits = circuits_with_layout(&split, ch, req.times[k], req.schedule, req.topology, &layouts[c])?;
            let words = [ch.i as u64, ch.j as u64, ch.alpha.index() as u64, ch.beta.index() as u64, k as u64];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(req.seed, &words));
            estimate_with(&circuits, req.noise, &mut rng)
        })
        .collect::<Result<_>>()?;
    let nt = req.times.len();
    Ok(channels
        .iter()
        .enumerate()
        .map(|(c, &ch)| {
            let pts = &points[c * nt..(c + 1) * nt];
            let metadata = SeriesMetadata {
                channel: ch,
                phase: 0.0,
                scale: 1.0,
                seed: req.noise.map(|_| req.seed),
                shots: req.noise.map(|n| n.shots),
                schedule: req.schedule.buckets().to_vec(),
            };
            CorrelationSeries::from_raw(
                metadata,
                req.times.to_vec(),
                pts.iter().map(|p| p.value).collect(),
                pts.iter().map(|p| [p.stderr_re, p.stderr_im]).collect(),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{exact_correlation, presets, Bond};
    use std::f64::consts::PI;

    fn full(n: usize) -> DeviceTopology {
        DeviceTopology::fully_connected(n)
    }

    #[test]
    fn channel_text_round_trip() {
        let c: Channel = "0, 2,xy".parse().unwrap();
        assert_eq!(c, Channel::new(0, 2, Axis::X, Axis::Y));
        assert_eq!(c.to_string().parse::<Channel>().unwrap(), c);
        assert!("0,1,x".parse::<Channel>().is_err());
        assert!("0,1,xq".parse::<Channel>().is_err());
    }

    #[test]
    fn calibration_against_exact_correlation() {
        // Fixes KAPPA and SIGMA_SIGN: every channel of molecule 1 at every time.
        let s = presets::molecule_1();
        let sched = TrotterSchedule::uniform(1).unwrap();
        for k in 0..=8 {
            let t = k as f64 * PI / 4.0;
            for i in 0..2 {
                for j in 0..2 {
                    for a in Axis::ALL {
                        for b in Axis::ALL {
                            let est = estimate_point(&s, Channel::new(i, j, a, b), t, &sched, &full(3), None, 0).unwrap();
                            let exact = exact_correlation(&s, i, j, a, b, t).unwrap();
                            assert!((est.value - exact).norm() < 1e-10, "{i}{j}{a}{b} t={t}: {} vs {}", est.value, exact);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn autocorrelation_at_zero_is_a_quarter() {
        let s = presets::molecule_1();
        let est = estimate_point(&s, Channel::auto(0, Axis::X), 0.0, &TrotterSchedule::default(), &full(3), None, 0).unwrap();
        assert!((est.value - Complex64::new(0.25, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_time_circuit_has_no_evolution() {
        let s = presets::molecule_1();
        let c = build_estimation_circuits(&s, 0, 1, Axis::X, Axis::X, 0.0, &TrotterSchedule::default(), &full(3)).unwrap();
        // Only the two controlled gates need CNOTs.
        assert_eq!(c.circuit_x.cnot_count(), 2);
    }

    #[test]
    fn depth_grows_linearly_with_steps() {
        let s = presets::molecule_2();
        let topo = DeviceTopology::ibmqx4_like();
        let counts: Vec<usize> = (1..=4)
            .map(|n| {
                let c = build_estimation_circuits(&s, 0, 1, Axis::X, Axis::X, 1.0, &TrotterSchedule::uniform(n).unwrap(), &topo).unwrap();
                c.circuit_x.cnot_count()
            })
            .collect();
        let d: Vec<usize> = counts.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(d.iter().all(|&x| x == d[0] && x > 0), "{counts:?}");
    }

    #[test]
    fn routed_trimer_matches_unrouted() {
        let s = presets::trimer();
        let sched = TrotterSchedule::uniform(2).unwrap();
        for topo in [DeviceTopology::ibmqx4_like(), DeviceTopology::ibmqx5_like()] {
            let a = estimate_point(&s, Channel::new(2, 0, Axis::X, Axis::X), 0.7, &sched, &topo, None, 0).unwrap();
            let b = estimate_point(&s, Channel::new(2, 0, Axis::X, Axis::X), 0.7, &sched, &full(4), None, 0).unwrap();
            assert!((a.value - b.value).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_unpolarized_ground_state() {
        let s = SpinSystem::spin_half(2, vec![Bond::heisenberg(0, 1, 1.0)], 0.3).unwrap();
        let r = estimate_point(&s, Channel::auto(0, Axis::X), 0.0, &TrotterSchedule::default(), &full(3), None, 0);
        assert!(matches!(r, Err(Error::NonProductGroundState(_))));
    }

    #[test]
    fn shot_estimates_are_within_binomial_bound() {
        let s = presets::molecule_1();
        let sched = TrotterSchedule::uniform(1).unwrap();
        let noise = NoiseSpec::noiseless(8192);
        for (k, t) in [0.0, 0.9, 2.3].into_iter().enumerate() {
            let ch = Channel::new(0, 1, Axis::X, Axis::X);
            let est = estimate_point(&s, ch, t, &sched, &full(3), Some(&noise), k as u64).unwrap();
            let exact = exact_correlation(&s, 0, 1, Axis::X, Axis::X, t).unwrap();
            let bound = 5.0 / 8192f64.sqrt();
            assert!((est.value.re - exact.re).abs() < bound && (est.value.im - exact.im).abs() < bound);
            assert!(est.stderr_re <= 0.25 / 8192f64.sqrt() + 1e-15);
        }
    }

    #[test]
    fn run_series_is_deterministic_and_seed_sensitive() {
        let s = presets::molecule_2();
        let sched = TrotterSchedule::uniform(2).unwrap();
        let topo = full(3);
        let noise = NoiseSpec::noiseless(256);
        let channels = [Channel::auto(0, Axis::X), Channel::new(0, 1, Axis::X, Axis::X)];
        let times = [0.0, 0.5, 1.0];
        let mk = |seed| SeriesRequest { system: &s, channels: &channels, times: &times, schedule: &sched, topology: &topo, noise: Some(&noise), seed };
        let a = run_series(&mk(7)).unwrap();
        let b = run_series(&mk(7)).unwrap();
        let c = run_series(&mk(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zz_series_is_constant() {
        let s = presets::molecule_2();
        let sched = TrotterSchedule::uniform(2).unwrap();
        let topo = full(3);
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 0.3).collect();
        let channels = [Channel::new(0, 1, Axis::Z, Axis::Z), Channel::auto(1, Axis::Z)];
        let req = SeriesRequest { system: &s, channels: &channels, times: &times, schedule: &sched, topology: &topo, noise: None, seed: 0 };
        for series in run_series(&req).unwrap() {
            let first = series.raw()[0];
            assert!(series.raw().iter().all(|z| (z - first).norm() < 1e-10));
        }
    }

    #[test]
    fn bad_grids_are_rejected() {
        let s = presets::molecule_1();
        let sched = TrotterSchedule::default();
        let topo = full(3);
        let channels = [Channel::auto(0, Axis::X)];
        for times in [vec![], vec![0.0, 0.0], vec![1.0, 0.5], vec![-1.0]] {
            let req = SeriesRequest { system: &s, channels: &channels, times: &times, schedule: &sched, topology: &topo, noise: None, seed: 0 };
            assert!(matches!(run_series(&req), Err(Error::InvalidGrid(_))));
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
        assert_eq!(derive_seed(5, &[3, 4]), derive_seed(5, &[3, 4]));
    }
}
