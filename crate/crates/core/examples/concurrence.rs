//! Concurrence of dimer excitations from the Q modulation of a cut,
//! compared with the eigenstate value.
//!
//! ```text
//! cargo run --example concurrence
//! ```

use qsim_ins::entanglement::{concurrence_exact, concurrence_from_qcut, CutSample, DimerExcitedState};
use qsim_ins::estimator::Channel;
use qsim_ins::ins::{q_cut, FormFactorTable, ScatteringSetup, Span, DEFAULT_WIDTH};
use qsim_ins::spectral::reference_model;
use qsim_ins::spin::{presets, Axis, ExactSolver};

fn main() -> qsim_ins::Result<()> {
    let table = FormFactorTable::builtin();
    let cu = table.get("Cu2+")?;
    for name in ["molecule-1", "molecule-2", "molecule-3"] {
        let system = presets::by_name(name).expect("known preset");
        let solver = ExactSolver::new(&system)?;
        let channels = [Channel::auto(0, Axis::X), Channel::auto(1, Axis::X), Channel::new(0, 1, Axis::X, Axis::X)];
        let model = reference_model(&solver, &channels, 1e-12)?;
        let setup = ScatteringSetup::uniform(&system, &table, "Cu2+")?;
        let e = model.frequencies[0];
        let cut = q_cut(&model, &setup, e, Span::range(0.05, 3.0, 0.05), DEFAULT_WIDTH)?;
        let samples: Vec<CutSample> = cut.points.iter().zip(&cut.intensity).map(|(p, i)| [p[0], p[1], p[2], p[3], *i]).collect();
        let fit = concurrence_from_qcut(&samples, presets::DIMER_SEPARATION, &cu, &cu)?;
        let level = solver.energies().iter().position(|&x| (x - e).abs() < 1e-9).expect("peak is a level");
        let exact = concurrence_exact(&DimerExcitedState::from_level(&solver, level)?);
        match fit.upper_bound {
            Some(ub) => println!("{name}: E = {e:.3} J, C = 0 (< {ub:.1e}), exact {exact:.3}"),
            None => println!("{name}: E = {e:.3} J, C = {:.3}, exact {exact:.3}", fit.concurrence),
        }
    }
    Ok(())
}
