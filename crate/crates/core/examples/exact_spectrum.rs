//! Exact diagonalization of the four benchmark clusters: excitation
//! energies and the ground-to-level matrix elements that set the neutron
//! intensities.
//!
//! ```text
//! cargo run --example exact_spectrum
//! ```

use qsim_ins::spin::{presets, Axis, ExactSolver};

fn main() -> qsim_ins::Result<()> {
    for name in ["molecule-1", "molecule-2", "molecule-3", "trimer"] {
        let system = presets::by_name(name).expect("known preset");
        let solver = ExactSolver::new(&system)?;
        println!("{name}: dimension {}", system.dimension());
        for (p, e) in solver.energies().iter().enumerate().skip(1) {
            let weights: Vec<String> = (0..system.n_spins())
                .map(|i| format!("{:.4}", solver.element(i, Axis::X, p).map(|v| v.norm_sqr()).unwrap_or(0.0)))
                .collect();
            if weights.iter().any(|w| w != "0.0000") {
                println!("  E_{p} = {e:7.4} J   |<0|s_i^x|p>|^2 = [{}]", weights.join(", "));
            }
        }
    }
    Ok(())
}
