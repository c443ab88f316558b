//! Full pipeline on a shipped benchmark: exact tables, emulated circuits,
//! spectral fit, cross-section files and concurrence, with a run manifest.
//!
//! ```text
//! cargo run --example pipeline -- [molecule-1|molecule-2|molecule-3|trimer] [shots]
//! ```

use qsim_ins::pipeline::{load_model, ExperimentConfig, Overrides, Pipeline};

fn main() -> qsim_ins::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "molecule-2".into());
    let shots: Option<usize> = args.next().and_then(|s| s.parse().ok());
    let mut config = ExperimentConfig::preset(&preset)?;
    config.apply(&Overrides {
        shots,
        output_dir: Some(format!("target/pipeline/{preset}").into()),
        ..Overrides::default()
    })?;
    let pipeline = Pipeline::new(config)?;
    let manifest = pipeline.run_all()?;
    for stage in &manifest.stages {
        println!("{:<14} {} files", stage.name, stage.outputs.len());
    }
    let model = load_model(&pipeline.model_path())?;
    println!("fitted frequencies: {:?}", model.frequencies);
    if manifest.stage("concurrence").is_some() {
        let r = pipeline.read_report()?;
        println!("concurrence at E = {:.3} J: {:.3} (exact {:.3})", r.energy, r.fit.concurrence, r.exact.unwrap_or(f64::NAN));
    }
    println!("outputs in {}", pipeline.output_dir().display());
    Ok(())
}
