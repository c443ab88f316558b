//! Second-order Trotter circuits: gate counts and the cubic per-step error.
//!
//! ```text
//! cargo run --example trotter_compilation
//! ```

use qsim_ins::circuit::phase_insensitive_distance;
use qsim_ins::spin::{build_hamiltonian, presets};
use qsim_ins::trotter::{evolve_circuit, trotter_step, HamiltonianSplit, TrotterSchedule};

fn main() -> qsim_ins::Result<()> {
    let trimer = HamiltonianSplit::new(&presets::trimer())?;
    println!("trimer: {} bond layers", trimer.layers().len());
    for n in 1..=4 {
        let c = evolve_circuit(&trimer, 2.0, &TrotterSchedule::uniform(n)?)?;
        println!("  n = {n}: {} CNOTs, depth {}", c.cnot_count(), c.depth());
    }

    let system = presets::molecule_2();
    let split = HamiltonianSplit::new(&system)?;
    let h = build_hamiltonian(&system)?;
    println!("molecule-2 single-step error:");
    let mut previous: Option<f64> = None;
    for tau in [0.4, 0.2, 0.1, 0.05] {
        let u = trotter_step(&split, tau)?.unitary()?;
        let err = phase_insensitive_distance(&u, h.evolution(tau)?.matrix());
        match previous {
            Some(p) => println!("  tau = {tau:<5} error {err:.3e}  ratio {:.2}", p / err),
            None => println!("  tau = {tau:<5} error {err:.3e}"),
        }
        previous = Some(err);
    }

    let schedule = TrotterSchedule::new(vec![(2.0, 2), (6.0, 4)])?;
    for t in [1.0, 2.0, 4.0] {
        let c = evolve_circuit(&split, t, &schedule)?;
        let err = phase_insensitive_distance(&c.unitary()?, h.evolution(t)?.matrix());
        println!("  Jt = {t}: {} steps, error {err:.3e}", schedule.steps_for(t)?);
    }
    Ok(())
}
