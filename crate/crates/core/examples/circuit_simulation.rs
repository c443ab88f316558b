//! State-vector simulation, shot sampling with readout errors, and routing
//! onto a device coupling map.
//!
//! ```text
//! cargo run --example circuit_simulation
//! ```

use qsim_ins::circuit::{apply_circuit, execute, phase_insensitive_distance, transpile, Circuit, DeviceTopology, Gate, NoiseSpec, StateVector};
use qsim_ins::spin::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qsim_ins::Result<()> {
    // Bell pair between qubits 0 and 4, which are not coupled on the device.
    let mut bell = Circuit::new(5);
    bell.push(Gate::H(0))?;
    bell.push(Gate::Cnot { control: 0, target: 4 })?;
    bell.push(Gate::ControlledPauli { pauli: Axis::Y, control: 4, target: 2 })?;

    let state = apply_circuit(&StateVector::new(5), &bell)?;
    println!("<Z_0> = {:.3}, P(q4 = 1) = {:.3}", state.expectation(0, Axis::Z)?, state.probability_one(4)?);

    let device = DeviceTopology::ibmqx4_like();
    let routed = transpile(&bell, &device)?;
    println!(
        "routed onto {}: {} gates, {} CNOTs (logical {}), depth {}",
        device.name(),
        routed.len(),
        routed.cnot_count(),
        bell.two_qubit_count(),
        routed.depth()
    );
    let d = phase_insensitive_distance(&routed.unitary()?, &bell.unitary()?);
    println!("unitary distance to the logical circuit: {d:.1e}");

    let mut noise = NoiseSpec::noiseless(4096);
    noise.readout_flip = 0.03;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let counts = execute(&routed, &StateVector::new(5), &[0, 4], &noise, &mut rng)?;
    println!("outcome counts over (q0, q4): {:?}", counts.counts);
    println!("<Z_0> with 3% readout flips: {:.3}", counts.z_expectation(0));
    Ok(())
}
