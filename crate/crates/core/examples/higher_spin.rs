//! Spin-1 dimer simulated on qubits: each spin-1 is carried by two
//! spin-1/2 qubits and its correlations are assembled from qubit pairs.
//!
//! ```text
//! cargo run --example higher_spin
//! ```

use qsim_ins::circuit::DeviceTopology;
use qsim_ins::estimator::{run_series, Channel, SeriesRequest};
use qsim_ins::spin::{encode_higher_spin, exact_correlation, Axis, Bond, SpinSystem};
use qsim_ins::trotter::TrotterSchedule;

fn main() -> qsim_ins::Result<()> {
    // Intra-register permutation symmetry keeps the state in the spin-1 sector;
    // the only error left is Trotter error.
    let system = SpinSystem::new(vec![1.0, 1.0], vec![Bond::new(0, 1, 0.5, 1.0)], 4.0, vec![1.0, 1.3], Vec::new())?;
    let encoded = encode_higher_spin(&system)?;
    println!("{} spins on {} qubits: registers {:?}", system.n_spins(), encoded.n_qubits(), encoded.registers);

    let channels = [Channel::auto(0, Axis::X), Channel::new(0, 1, Axis::X, Axis::X)];
    let times: Vec<f64> = (0..=5).map(|k| 0.4 * k as f64).collect();
    let schedule = TrotterSchedule::uniform(20)?;
    let device = DeviceTopology::fully_connected(5);
    let set = run_series(&SeriesRequest {
        system: &system,
        channels: &channels,
        times: &times,
        schedule: &schedule,
        topology: &device,
        noise: None,
        seed: 0,
    })?;
    for s in &set {
        let c = s.channel();
        println!("{c}:");
        for (t, v) in s.times().iter().zip(s.raw()) {
            let e = exact_correlation(&system, c.i, c.j, c.alpha, c.beta, *t)?;
            println!("  Jt = {t:.1}: simulated {:+.5}{:+.5}i  exact {:+.5}{:+.5}i", v.re, v.im, e.re, e.im);
        }
    }
    Ok(())
}
