//! Shared-frequency fit of simulated correlation series for the trimer,
//! whose three lines are closer than the Fourier resolution of the window.
//!
//! ```text
//! cargo run --example spectral_fit
//! ```

use qsim_ins::circuit::DeviceTopology;
use qsim_ins::estimator::{correct_series, run_series, Channel, SeriesRequest};
use qsim_ins::spectral::{estimate_frequencies, fit_model, seed_frequencies, FitOptions};
use qsim_ins::spin::{presets, Axis};
use qsim_ins::trotter::TrotterSchedule;

fn main() -> qsim_ins::Result<()> {
    let system = presets::trimer();
    let channels: Vec<Channel> = (0..3).flat_map(|i| (0..3).map(move |j| Channel::new(i, j, Axis::X, Axis::X))).collect();
    let times: Vec<f64> = (0..=40).map(|k| 0.05 * k as f64).collect();
    let schedule = TrotterSchedule::uniform(2)?;
    let device = DeviceTopology::ibmqx5_like();
    let req = SeriesRequest {
        system: &system,
        channels: &channels,
        times: &times,
        schedule: &schedule,
        topology: &device,
        noise: None,
        seed: 1,
    };
    let mut set = run_series(&req)?;
    let refs: Vec<Channel> = (0..3).flat_map(|i| [Channel::auto(i, Axis::Y), Channel::auto(i, Axis::Z)]).collect();
    set.extend(run_series(&SeriesRequest { channels: &refs, times: &[0.0], ..req })?);
    let series: Vec<_> = correct_series(&set, &system)?.into_iter().filter(|s| s.len() > 1).collect();

    println!("periodogram peaks: {:?}", estimate_frequencies(&series, 3)?);
    let options = FitOptions::default();
    let seeds = seed_frequencies(&series, 3, &options)?;
    let model = fit_model(&series, &seeds, &options)?;
    for (w, e) in model.frequencies.iter().zip(&model.frequency_stderr) {
        println!("omega = {w:.4} ± {e:.1e} J");
    }
    for ch in &model.channels {
        let a: Vec<String> = ch.coefficients.iter().map(|c| format!("{:+.4}", c.a)).collect();
        println!("  {}: {}", ch.channel, a.join("  "));
    }
    if let Some(d) = &model.diagnostics {
        println!("rms residual {:.2e}, converged {}", d.residual_rms, d.converged);
    }
    Ok(())
}
