//! Ancilla-interferometry estimates of `C_ij^{αβ}(t)` against the exact
//! value, noiseless and with shot noise.
//!
//! ```text
//! cargo run --example correlation_estimator
//! ```

use qsim_ins::circuit::{DeviceTopology, NoiseSpec};
use qsim_ins::estimator::{build_estimation_circuits, estimate_point, Channel};
use qsim_ins::spin::{exact_correlation, presets, Axis};
use qsim_ins::trotter::TrotterSchedule;

fn main() -> qsim_ins::Result<()> {
    let system = presets::molecule_2();
    let device = DeviceTopology::ibmqx4_like();
    let schedule = TrotterSchedule::new(vec![(2.0, 2), (f64::INFINITY, 4)])?;
    let channel = Channel::new(0, 1, Axis::X, Axis::X);
    let shots = NoiseSpec::noiseless(8192);

    let c = build_estimation_circuits(&system, 0, 1, Axis::X, Axis::X, 1.0, &schedule, &device)?;
    println!(
        "C_01^xx(1.0) circuit: {} CNOTs, ancilla on physical qubit {}",
        c.circuit_x.cnot_count(),
        c.ancilla
    );
    println!("{:>5} {:>22} {:>22} {:>30}", "Jt", "exact", "noiseless", "8192 shots");
    for k in 0..=6 {
        let t = 0.5 * k as f64;
        let exact = exact_correlation(&system, 0, 1, Axis::X, Axis::X, t)?;
        let ideal = estimate_point(&system, channel, t, &schedule, &device, None, 0)?;
        let noisy = estimate_point(&system, channel, t, &schedule, &device, Some(&shots), k)?;
        println!(
            "{t:5.1} {:>10.5} {:>+10.5}i {:>10.5} {:>+10.5}i {:>10.5} {:>+10.5}i ±{:.4}",
            exact.re, exact.im, ideal.value.re, ideal.value.im, noisy.value.re, noisy.value.im, noisy.stderr_re
        );
    }
    Ok(())
}
