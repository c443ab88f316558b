//! Neutron cross-section of the trimer: Q-integrated spectrum and a
//! constant-energy map written as CSV and gnuplot matrix.
//!
//! ```text
//! cargo run --example neutron_cross_section -- [output-dir]
//! ```

use qsim_ins::estimator::Channel;
use qsim_ins::ins::{energy_spectrum, q_map, FormFactorTable, QBox, ScatteringSetup, Span, DEFAULT_WIDTH};
use qsim_ins::spectral::reference_model;
use qsim_ins::spin::{presets, Axis, ExactSolver};

fn main() -> qsim_ins::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/neutron_cross_section".into());
    let system = presets::trimer();
    let channels: Vec<Channel> = (0..3).flat_map(|i| (0..3).map(move |j| Channel::new(i, j, Axis::X, Axis::X))).collect();
    let model = reference_model(&ExactSolver::new(&system)?, &channels, 1e-12)?;
    let setup = ScatteringSetup::uniform(&system, &FormFactorTable::builtin(), "Cu2+")?;

    let spectrum = energy_spectrum(&model, &setup, &QBox::default(), &Span::range(8.0, 10.5, 0.01), DEFAULT_WIDTH)?;
    for (e, w) in &spectrum.peaks {
        println!("peak at {e:.2} J, Q-box weight {w:.4}");
    }
    for &e in &model.frequencies {
        let map = q_map(&model, &setup, e, Span::range(-2.0, 2.0, 0.05), Span::range(-2.0, 2.0, 0.05), 0.0, DEFAULT_WIDTH)?;
        let stem = format!("map_{e:.1}");
        map.write(std::path::Path::new(&out), &stem)?;
        let max = map.intensity.iter().cloned().fold(0.0, f64::max);
        println!("wrote {out}/{stem}.{{csv,json,dat}} (max intensity {max:.3})");
    }
    Ok(())
}
