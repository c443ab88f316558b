//! Configuration-driven stages: `exact`, `simulate`, `fit`,
//! `cross-section` and `concurrence`, each writing CSV/JSON files into the
//! output directory and recording them in `manifest.json`.
//!
//! Output layout:
//!
//! ```text
//! <out>/manifest.json
//! <out>/exact/{eigenvalues,matrix_elements,spectrum}.csv, model.json, series/
//! <out>/series/c_<i>_<j>_<ab>.{csv,json}
//! <out>/fit/model.json, matrix_elements.csv
//! <out>/cross_section/spectrum.csv, map_peak<k>.*, cut_peak<k>.*, grid.*
//! <out>/concurrence/report.json
//! ```

mod config;
mod manifest;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    ConcurrenceSettings, CrossSectionSettings, ExperimentConfig, FitSettings, Overrides, SystemSpec, TimeGrid, TopologySpec,
};
pub use manifest::{RunManifest, StageRecord, MANIFEST_FILE};

use crate::entanglement::{concurrence_exact, concurrence_from_coefficients, concurrence_from_qcut, read_cut_csv, ConcurrenceFit, DimerExcitedState};
use crate::error::{Error, Result};
use crate::estimator::{correct_series, run_series, Channel, CorrelationSeries, SeriesMetadata, SeriesRequest};
use crate::ins::{energy_spectrum, evaluate_grid, q_cut, q_map, ScatteringSetup, Span};
use crate::spectral::{estimate_frequencies, fit_model, model_to_matrix_elements, reference_model, seed_frequencies, SpectralModel};
use crate::spin::{Axis, ExactSolver, SpinSystem};
use crate::util::{read_to_string, write_atomic};
use manifest::unix_now;

/// Upper bound on automatically estimated frequency counts.
const MAX_AUTO_FREQUENCIES: usize = 8;

/// Concurrence extracted from one constant-energy cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceReport {
    pub cut: PathBuf,
    pub energy: f64,
    pub separation: f64,
    pub fit: ConcurrenceFit,
    /// Cross-check from the fitted coefficients of the same peak, carrying
    /// the statistical uncertainty of the fit.
    pub from_coefficients: Option<CoefficientEstimate>,
    /// Concurrence of the exact eigenstate closest to `energy`.
    pub exact: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub omega: f64,
    pub concurrence: f64,
    pub stderr: f64,
}

fn coefficient_estimate(model: &SpectralModel, energy: f64) -> Option<CoefficientEstimate> {
    let p = (0..model.frequencies.len()).min_by(|&a, &b| (model.frequencies[a] - energy).abs().total_cmp(&(model.frequencies[b] - energy).abs()))?;
    let k = |i, j| model.coefficient(Channel::new(i, j, Axis::X, Axis::X), p);
    let (c, stderr) = concurrence_from_coefficients(&k(0, 0)?, &k(1, 1)?, &k(0, 1)?, k(1, 0).as_ref()).ok()?;
    Some(CoefficientEstimate { omega: model.frequencies[p], concurrence: c, stderr })
}

struct StageWriter<'a> {
    root: &'a Path,
    name: &'static str,
    started: u64,
    outputs: Vec<PathBuf>,
}

impl<'a> StageWriter<'a> {
    fn new(root: &'a Path, name: &'static str) -> Self {
        log::info!("stage {name}: writing into {}", root.display());
        StageWriter { root, name, started: unix_now(), outputs: Vec::new() }
    }

    fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
        let rel = rel.as_ref();
        write_atomic(&self.root.join(rel), bytes)?;
        self.outputs.push(rel.to_path_buf());
        Ok(())
    }

    fn series(&mut self, dir: &str, s: &CorrelationSeries) -> Result<()> {
        let stem = s.channel().file_stem();
        s.write(&self.root.join(dir), &stem)?;
        self.outputs.push(Path::new(dir).join(format!("{stem}.csv")));
        self.outputs.push(Path::new(dir).join(format!("{stem}.json")));
        Ok(())
    }

    fn map(&mut self, dir: &str, stem: &str, map: &crate::ins::CrossSectionMap) -> Result<()> {
        map.write(&self.root.join(dir), stem)?;
        for ext in ["csv", "json", "dat"] {
            self.outputs.push(Path::new(dir).join(format!("{stem}.{ext}")));
        }
        Ok(())
    }

    fn finish(self, config_hash: &str, seed: u64) -> Result<StageRecord> {
        let record = StageRecord {
            name: self.name.to_string(),
            started: self.started,
            finished: unix_now(),
            outputs: self.outputs,
        };
        let mut manifest = RunManifest::open(self.root, config_hash, seed);
        manifest.record(record.clone());
        manifest.write(self.root)?;
        Ok(record)
    }
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Error::parse("csv output", e.to_string()))
}

pub fn load_model(path: &Path) -> Result<SpectralModel> {
    SpectralModel::from_json(&read_to_string(path)?)
}

/// Every `*.csv` series in `dir`, by file name.
pub fn load_series_dir(dir: &Path) -> Result<Vec<CorrelationSeries>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no series files in {}", dir.display())));
    }
    paths.iter().map(|p| CorrelationSeries::read(p)).collect()
}

/// A validated configuration bound to its output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: ExperimentConfig,
    system: SpinSystem,
    hash: String,
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let system = config.spin_system()?;
        let hash = config.hash();
        Ok(Pipeline { config, system, hash })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn system(&self) -> &SpinSystem {
        &self.system
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn series_dir(&self) -> PathBuf {
        self.output_dir().join("series")
    }

    pub fn model_path(&self) -> PathBuf {
        self.output_dir().join("fit").join("model.json")
    }

    pub fn cut_path(&self, peak: usize) -> PathBuf {
        self.output_dir().join("cross_section").join(format!("cut_peak{peak}.csv"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.output_dir().join("concurrence").join("report.json")
    }

    pub fn manifest(&self) -> Result<RunManifest> {
        RunManifest::read(&self.output_dir().join(MANIFEST_FILE))
    }

    fn setup(&self) -> Result<ScatteringSetup> {
        self.config
            .scattering_setup(&self.system)?
            .ok_or_else(|| Error::Config("cross-section needs ion positions (system.positions or cross_section.positions)".into()))
    }

    fn finish(&self, stage: StageWriter<'_>) -> Result<StageRecord> {
        stage.finish(&self.hash, self.config.seed)
    }

    /// Oracle tables: spectrum, matrix elements, exact correlation series,
    /// the exact spectral model and its energy spectrum.
    pub fn exact(&self) -> Result<StageRecord> {
        let mut stage = StageWriter::new(self.output_dir(), "exact");
        let solver = ExactSolver::new(&self.system)?;
        let e0 = solver.eigen().ground_energy();
        stage.write(
            "exact/eigenvalues.csv",
            &csv_bytes(
                &["level", "energy", "excitation"],
                solver.energies().iter().enumerate().map(|(p, &w)| [p.to_string(), (w + e0).to_string(), w.to_string()]),
            )?,
        )?;
        let channels = self.config.channel_list(&self.system);
        if channels.is_empty() {
            return self.finish(stage);
        }
        stage.write(
            "exact/matrix_elements.csv",
            &csv_bytes(
                &["site", "axis", "level", "excitation", "re", "im"],
                solver.matrix_elements()?.into_iter().map(|m| {
                    [m.site.to_string(), m.axis.label().to_string(), m.level.to_string(), m.energy.to_string(), m.value.re.to_string(), m.value.im.to_string()]
                }),
            )?,
        )?;
        let times = self.config.time_values();
        for &c in &channels {
            let values = times.iter().map(|&t| solver.correlation(c.i, c.j, c.alpha, c.beta, t)).collect::<Result<Vec<_>>>()?;
            let meta = SeriesMetadata { channel: c, phase: 0.0, scale: 1.0, seed: None, shots: None, schedule: Vec::new() };
            let series = CorrelationSeries::from_raw(meta, times.clone(), values, vec![[0.0; 2]; times.len()]);
            stage.series("exact/series", &series)?;
        }
        let model = reference_model(&solver, &channels, 1e-12)?;
        stage.write("exact/model.json", model.to_json()?.as_bytes())?;
        if self.config.scattering_setup(&self.system)?.is_some() {
            let spectrum = self.spectrum(&model)?;
            stage.write("exact/spectrum.csv", &spectrum.to_csv()?)?;
        }
        self.finish(stage)
    }

    /// `t = 0` autocorrelations needed by the correction and not already on the grid.
    fn reference_channels(&self, channels: &[Channel], times: &[f64]) -> Vec<Channel> {
        let starts_at_zero = times.first() == Some(&0.0);
        let mut sites: Vec<usize> = channels.iter().map(|c| c.i).collect();
        sites.sort_unstable();
        sites.dedup();
        sites
            .into_iter()
            .flat_map(|i| Axis::ALL.map(|a| Channel::auto(i, a)))
            .filter(|r| !(starts_at_zero && channels.contains(r)))
            .collect()
    }

    /// Estimator circuits on the emulated device; writes corrected series.
    pub fn simulate(&self) -> Result<StageRecord> {
        let mut stage = StageWriter::new(self.output_dir(), "simulate");
        let channels = self.config.channel_list(&self.system);
        if channels.is_empty() {
            return Err(Error::Config("simulate needs at least one channel".into()));
        }
        let times = self.config.time_values();
        let topology = self.config.device()?;
        let req = SeriesRequest {
            system: &self.system,
            channels: &channels,
            times: &times,
            schedule: &self.config.schedule,
            topology: &topology,
            noise: self.config.noise.as_ref(),
            seed: self.config.seed,
        };
        let mut set = run_series(&req)?;
        let refs = self.reference_channels(&channels, &times);
        if !refs.is_empty() {
            let req0 = SeriesRequest {
                channels: &refs,
                times: &[0.0],
                seed: crate::estimator::derive_seed(self.config.seed, &[u64::MAX]),
                ..req
            };
            set.extend(run_series(&req0)?);
        }
        for s in correct_series(&set, &self.system)? {
            stage.series("series", &s)?;
        }
        self.finish(stage)
    }

    /// Shared-frequency fit of every multi-point series in `series_dir`
    /// (default `<out>/series`).
    pub fn fit(&self, series_dir: Option<&Path>) -> Result<StageRecord> {
        let mut stage = StageWriter::new(self.output_dir(), "fit");
        let dir = series_dir.map_or_else(|| self.series_dir(), Path::to_path_buf);
        let set: Vec<CorrelationSeries> = load_series_dir(&dir)?.into_iter().filter(|s| s.len() > 1).collect();
        if set.is_empty() {
            return Err(Error::Config(format!("no time series with more than one point in {}", dir.display())));
        }
        let settings = &self.config.fit;
        let options = settings.options();
        let initial = match (&settings.initial, settings.frequencies) {
            (Some(init), _) => init.clone(),
            (None, Some(count)) => seed_frequencies(&set, count, &options)?,
            (None, None) => {
                let count = estimate_frequencies(&set, MAX_AUTO_FREQUENCIES)?.len();
                if count == 0 {
                    return Err(Error::InvalidArgument("series carry no oscillating component".into()));
                }
                seed_frequencies(&set, count, &options)?
            }
        };
        let model = fit_model(&set, &initial, &options)?;
        if let Some(d) = &model.diagnostics {
            if !d.converged {
                log::warn!("fit did not converge in {} iterations", d.iterations);
            }
        }
        log::info!("fitted frequencies {:?}", model.frequencies);
        stage.write("fit/model.json", model.to_json()?.as_bytes())?;
        stage.write(
            "fit/matrix_elements.csv",
            &csv_bytes(
                &["channel", "omega", "re", "im", "stderr_re", "stderr_im"],
                model_to_matrix_elements(&model).into_iter().map(|m| {
                    [m.channel.to_string(), m.omega.to_string(), m.value.re.to_string(), m.value.im.to_string(), m.stderr[0].to_string(), m.stderr[1].to_string()]
                }),
            )?,
        )?;
        self.finish(stage)
    }

    fn spectrum(&self, model: &SpectralModel) -> Result<crate::ins::EnergySpectrum> {
        let cs = &self.config.cross_section;
        let energies = cs.energies.unwrap_or_else(|| {
            let top = model.frequencies.iter().cloned().fold(0.0, f64::max);
            Span::range(0.0, top + 2.0, 0.01)
        });
        energy_spectrum(model, &self.setup()?, &cs.qbox, &energies, cs.width)
    }

    /// `I(E)`, `(Q_x, Q_y)` maps and `Q_x` cuts at every positive peak of
    /// the model at `model_path` (default `<out>/fit/model.json`).
    pub fn cross_section(&self, model_path: Option<&Path>) -> Result<StageRecord> {
        let mut stage = StageWriter::new(self.output_dir(), "cross-section");
        let path = model_path.map_or_else(|| self.model_path(), Path::to_path_buf);
        let model = load_model(&path)?;
        let setup = self.setup()?;
        let cs = &self.config.cross_section;
        stage.write("cross_section/spectrum.csv", &self.spectrum(&model)?.to_csv()?)?;
        let peaks: Vec<f64> = model.frequencies.iter().copied().filter(|&w| w > 0.0).collect();
        for (k, &w) in peaks.iter().enumerate() {
            let map = q_map(&model, &setup, w, cs.map_q, cs.map_q, 0.0, cs.width)?;
            stage.map("cross_section", &format!("map_peak{k}"), &map)?;
            let cut = q_cut(&model, &setup, w, cs.cut_qx, cs.width)?;
            stage.map("cross_section", &format!("cut_peak{k}"), &cut)?;
        }
        if let Some(grid) = &cs.grid {
            stage.map("cross_section", "grid", &evaluate_grid(&model, &setup, grid, cs.width)?)?;
        }
        self.finish(stage)
    }

    /// Concurrence of a dimer excitation from a constant-energy cut
    /// (default `<out>/cross_section/cut_peak<k>.csv`).
    pub fn concurrence(&self, cut_path: Option<&Path>) -> Result<StageRecord> {
        let mut stage = StageWriter::new(self.output_dir(), "concurrence");
        if self.system.n_spins() != 2 || !self.system.is_spin_half() {
            return Err(Error::Config("concurrence needs a spin-1/2 dimer".into()));
        }
        let path = cut_path.map_or_else(|| self.cut_path(self.config.concurrence.peak), Path::to_path_buf);
        let samples = read_cut_csv(&path)?;
        let energy = samples.first().map(|s| s[3]).ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?;
        let setup = self.setup()?;
        let separation = match self.config.concurrence.separation {
            Some(r) => r,
            None => {
                let d = self.system.relative_position(1, 0);
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            }
        };
        let fit = concurrence_from_qcut(&samples, separation, &setup.form_factors[0], &setup.form_factors[1])?;
        let solver = ExactSolver::new(&self.system)?;
        let level = (1..solver.energies().len()).min_by(|&a, &b| {
            (solver.energies()[a] - energy).abs().total_cmp(&(solver.energies()[b] - energy).abs())
        });
        let exact = level.and_then(|p| DimerExcitedState::from_level(&solver, p).ok()).map(|s| concurrence_exact(&s));
        let from_coefficients = load_model(&self.model_path()).ok().and_then(|m| coefficient_estimate(&m, energy));
        let report = ConcurrenceReport { cut: path, energy, separation, fit, from_coefficients, exact };
        log::info!("concurrence {:.4} ± {:.4} at E = {energy:.4}", report.fit.concurrence, report.fit.stderr);
        stage.write("concurrence/report.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
        self.finish(stage)
    }

    pub fn read_report(&self) -> Result<ConcurrenceReport> {
        let path = self.report_path();
        serde_json::from_str(&read_to_string(&path)?).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }

    /// All stages in order; the concurrence stage only for dimers.
    pub fn run_all(&self) -> Result<RunManifest> {
        self.exact()?;
        self.simulate()?;
        self.fit(None)?;
        if self.config.scattering_setup(&self.system)?.is_some() {
            self.cross_section(None)?;
            if self.system.n_spins() == 2 && self.system.is_spin_half() {
                self.concurrence(None)?;
            }
        }
        self.manifest()
    }
}
