use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Circuit, Gate, StateVector};
use crate::error::{Error, Result};
use crate::spin::Axis;

/// Shot count, readout and gate error model.
///
/// `depolarizing_1q` / `depolarizing_2q` are the probabilities that a gate
/// is followed by a uniformly random non-identity Pauli on its qubits.
/// Depolarizing noise is simulated by pure-state trajectories; the shots are
/// split evenly across `trajectories`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub shots: usize,
    /// Probability of reporting the wrong bit, per qubit and shot.
    pub readout_flip: f64,
    /// Per-qubit readout flip overrides, keyed by physical qubit.
    pub readout_overrides: BTreeMap<usize, f64>,
    pub depolarizing_1q: f64,
    pub depolarizing_2q: f64,
    pub trajectories: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            shots: 8192,
            readout_flip: 0.0,
            readout_overrides: BTreeMap::new(),
            depolarizing_1q: 0.0,
            depolarizing_2q: 0.0,
            trajectories: 32,
        }
    }
}

impl NoiseSpec {
    pub fn noiseless(shots: usize) -> Self {
        NoiseSpec {
            shots,
            ..NoiseSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidNoise("shots must be positive".into()));
        }
        if self.trajectories == 0 {
            return Err(Error::InvalidNoise("trajectories must be positive".into()));
        }
        let probs = [
            ("readout_flip", self.readout_flip),
            ("depolarizing_1q", self.depolarizing_1q),
            ("depolarizing_2q", self.depolarizing_2q),
        ];
        for (name, p) in probs.into_iter().chain(self.readout_overrides.values().map(|&p| ("readout_overrides", p))) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn readout_flip_for(&self, qubit: usize) -> f64 {
        self.readout_overrides.get(&qubit).copied().unwrap_or(self.readout_flip)
    }

    pub fn has_gate_noise(&self) -> bool {
        self.depolarizing_1q > 0.0 || self.depolarizing_2q > 0.0
    }
}

/// Outcome histogram over a list of measured qubits. Bit `k` of an outcome
/// index is the reading of `qubits[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub qubits: Vec<usize>,
    pub counts: Vec<u64>,
}

impl Counts {
    pub fn empty(qubits: Vec<usize>) -> Self {
        let counts = vec![0; 1 << qubits.len()];
        Counts { qubits, counts }
    }

    pub fn shots(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &Counts) -> Result<()> {
        if other.qubits != self.qubits {
            return Err(Error::InvalidArgument("cannot merge counts over different qubits".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Estimated ⟨σ^z⟩ of the `k`-th measured qubit.
    pub fn z_expectation(&self, k: usize) -> f64 {
        let shots = self.shots();
        if shots == 0 {
            return 0.0;
        }
        let mut signed = 0i64;
        for (outcome, &n) in self.counts.iter().enumerate() {
            let n = n as i64;
            signed += if outcome >> k & 1 == 0 { n } else { -n };
        }
        signed as f64 / shots as f64
    }
}

/// Draws `shots` outcomes from `probs` and returns per-outcome tallies.
pub fn sample_probabilities<R: Rng + ?Sized>(probs: &[f64], shots: usize, rng: &mut R) -> Result<Vec<u64>> {
    let dist = WeightedIndex::new(probs.iter().map(|p| p.max(0.0)))
        .map_err(|e| Error::InvalidArgument(format!("bad outcome distribution: {e}")))?;
    let mut out = vec![0u64; probs.len()];
    for _ in 0..shots {
        out[dist.sample(rng)] += 1;
    }
    Ok(out)
}

/// Measures `qubits` of `state` in the computational basis `shots` times,
/// applying readout bit flips per shot.
pub fn sample_shots<R: Rng + ?Sized>(
    state: &StateVector,
    qubits: &[usize],
    shots: usize,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Counts> {
    let probs = state.marginal_probabilities(qubits)?;
    let flips: Vec<f64> = qubits.iter().map(|&q| noise.readout_flip_for(q)).collect();
    let dist = WeightedIndex::new(probs.iter().map(|p| p.max(0.0)))
        .map_err(|e| Error::InvalidArgument(format!("bad outcome distribution: {e}")))?;
    let mut counts = Counts::empty(qubits.to_vec());
    for _ in 0..shots {
        let mut outcome = dist.sample(rng);
        for (k, &p) in flips.iter().enumerate() {
            if p > 0.0 && rng.random::<f64>() < p {
                outcome ^= 1 << k;
            }
        }
        counts.counts[outcome] += 1;
    }
    Ok(counts)
}

fn random_pauli<R: Rng + ?Sized>(rng: &mut R) -> Option<Axis> {
    match rng.random_range(0..4) {
        0 => None,
        k => Some(Axis::ALL[k - 1]),
    }
}

/// Runs one stochastic trajectory of `circuit` from `initial` with Pauli
/// errors inserted after gates.
pub fn run_noisy_trajectory<R: Rng + ?Sized>(
    circuit: &Circuit,
    initial: &StateVector,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<StateVector> {
    let mut state = initial.clone();
    for gate in circuit.gates() {
        state.apply_gate(gate)?;
        let qubits = gate.qubits();
        let p = if gate.is_two_qubit() { noise.depolarizing_2q } else { noise.depolarizing_1q };
        if p > 0.0 && rng.random::<f64>() < p {
            // Uniform over the non-identity Paulis on the gate's support.
            loop {
                let draws: Vec<Option<Axis>> = qubits.iter().map(|_| random_pauli(rng)).collect();
                if draws.iter().any(Option::is_some) {
                    for (&q, d) in qubits.iter().zip(draws) {
                        if let Some(a) = d {
                            state.apply_gate(&Gate::pauli(a, q))?;
                        }
                    }
                    break;
                }
            }
        }
    }
    Ok(state)
}

/// Executes `circuit` on `initial` and measures `qubits` under `noise`.
pub fn execute<R: Rng + ?Sized>(
    circuit: &Circuit,
    initial: &StateVector,
    qubits: &[usize],
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Counts> {
    noise.validate()?;
    if !noise.has_gate_noise() {
        let state = super::apply_circuit(initial, circuit)?;
        return sample_shots(&state, qubits, noise.shots, noise, rng);
    }
    let trajectories = noise.trajectories.min(noise.shots);
    let mut counts = Counts::empty(qubits.to_vec());
    for k in 0..trajectories {
        let shots = noise.shots / trajectories + usize::from(k < noise.shots % trajectories);
        let state = run_noisy_trajectory(circuit, initial, noise, rng)?;
        counts.merge(&sample_shots(&state, qubits, shots, noise, rng)?)?;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn readout_flip_of_one_inverts() {
        let s = StateVector::new(1);
        let mut noise = NoiseSpec::noiseless(100);
        noise.readout_overrides.insert(0, 1.0);
        let c = sample_shots(&s, &[0], 100, &noise, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(c.counts, vec![0, 100]);
        assert_eq!(c.z_expectation(0), -1.0);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut s = StateVector::new(2);
        s.apply_gate(&Gate::H(0)).unwrap();
        s.apply_gate(&Gate::Rx { qubit: 1, theta: 1.1 }).unwrap();
        let noise = NoiseSpec::noiseless(500);
        let a = sample_shots(&s, &[0, 1], 500, &noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_shots(&s, &[0, 1], 500, &noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shots(), 500);
    }

    #[test]
    fn binomial_spread_matches_shot_noise() {
        // p = 0.5: stderr of <z> is 1/sqrt(N).
        let mut s = StateVector::new(1);
        s.apply_gate(&Gate::H(0)).unwrap();
        let noise = NoiseSpec::noiseless(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..400)
            .map(|_| sample_shots(&s, &[0], 1000, &noise, &mut rng).unwrap().z_expectation(0))
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 0.01);
        assert!((sd - 1.0 / 1000f64.sqrt()).abs() < 0.005, "sd = {sd}");
    }

    #[test]
    fn full_depolarizing_randomizes() {
        let mut c = Circuit::new(1);
        for _ in 0..20 {
            c.push(Gate::Rz { qubit: 0, theta: 0.0 }).unwrap();
        }
        let noise = NoiseSpec {
            depolarizing_1q: 0.75,
            trajectories: 2000,
            shots: 20000,
            ..NoiseSpec::default()
        };
        let counts = execute(&c, &StateVector::new(1), &[0], &noise, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(counts.z_expectation(0).abs() < 0.06);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let bad = NoiseSpec {
            readout_flip: 1.5,
            ..NoiseSpec::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidNoise(_))));
        assert!(NoiseSpec::noiseless(0).validate().is_err());
    }
}
