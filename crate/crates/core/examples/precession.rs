//! Spin precession patterns of weakly excited eigenstates of molecule 1.
//!
//! ```text
//! cargo run --example precession
//! ```

use qsim_ins::ins::precession_pattern;
use qsim_ins::spin::{presets, ExactSolver};

fn main() -> qsim_ins::Result<()> {
    let solver = ExactSolver::new(&presets::molecule_1())?;
    for p in 1..solver.energies().len() {
        let e = solver.energies()[p];
        let period = 2.0 * std::f64::consts::PI / e;
        let times: Vec<f64> = (0..4).map(|k| k as f64 * period / 4.0).collect();
        let Ok(frames) = precession_pattern(&solver, p, 0.3, &times) else { continue };
        println!("level {p} (E = {e:.2} J)");
        for f in frames {
            let s: Vec<String> = f.spins.iter().map(|v| format!("({:+.3}, {:+.3}, {:+.3})", v[0], v[1], v[2])).collect();
            println!("  t = {:.3}: {}", f.t, s.join("  "));
        }
    }
    Ok(())
}
