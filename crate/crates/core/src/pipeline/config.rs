use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{DeviceTopology, NoiseSpec};
use crate::error::{Error, Result};
use crate::estimator::Channel;
use crate::ins::{FormFactorTable, QBox, QEGrid, ScatteringSetup, Span, DEFAULT_WIDTH};
use crate::spectral::FitOptions;
use crate::spin::{presets, Axis, SpinSystem};
use crate::trotter::TrotterSchedule;
use crate::util::read_to_string;

const PRESETS: [(&str, &str); 4] = [
    ("molecule-1", include_str!("../../presets/molecule-1.toml")),
    ("molecule-2", include_str!("../../presets/molecule-2.toml")),
    ("molecule-3", include_str!("../../presets/molecule-3.toml")),
    ("trimer", include_str!("../../presets/trimer.toml")),
];

/// A built-in cluster by name or an inline definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Preset(String),
    Inline(SpinSystem),
}

/// A named device or an edge-list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySpec {
    Preset(String),
    File { file: PathBuf },
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec::Preset("ibmqx5-like".into())
    }
}

/// `points` equally spaced times from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let dt = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + k as f64 * dt).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::Config("times.points must be positive".into()));
        }
        if !self.start.is_finite() || !self.stop.is_finite() || self.start < 0.0 {
            return Err(Error::Config("times must be finite and non-negative".into()));
        }
        if self.points > 1 && self.stop <= self.start {
            return Err(Error::Config("times.stop must exceed times.start".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    /// Number of frequencies; estimated from the periodogram when absent.
    pub frequencies: Option<usize>,
    /// Starting frequencies; overrides the automatic seeding.
    pub initial: Option<Vec<f64>>,
    pub constant: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        let o = FitOptions::default();
        FitSettings {
            frequencies: None,
            initial: None,
            constant: o.constant,
            max_iterations: o.max_iterations,
            tolerance: o.tolerance,
        }
    }
}

impl FitSettings {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            constant: self.constant,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossSectionSettings {
    /// Form-factor label shared by all ions.
    pub ion: String,
    /// Extra form-factor table merged over the built-in one.
    pub form_factor_file: Option<PathBuf>,
    /// Ion positions in Å; taken from the system when absent.
    pub positions: Option<Vec<[f64; 3]>>,
    pub width: f64,
    /// Energy axis of `I(E)`; defaults to `0 ..= max ω + 2` in steps of 0.01.
    pub energies: Option<Span>,
    pub qbox: QBox,
    /// `Q_x` and `Q_y` axes of the constant-energy maps.
    pub map_q: Span,
    /// `Q_x` axis of the constant-energy cuts.
    pub cut_qx: Span,
    /// Optional full four-dimensional grid.
    pub grid: Option<QEGrid>,
}

impl Default for CrossSectionSettings {
    fn default() -> Self {
        CrossSectionSettings {
            ion: "Cu2+".into(),
            form_factor_file: None,
            positions: None,
            width: DEFAULT_WIDTH,
            energies: None,
            qbox: QBox::default(),
            map_q: Span::range(-3.0, 3.0, 0.05),
            cut_qx: Span::range(0.05, 3.0, 0.05),
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConcurrenceSettings {
    /// Index of the analysed peak among the positive model frequencies.
    pub peak: usize,
    /// Ion separation in Å; taken from the positions when absent.
    pub separation: Option<f64>,
}

fn default_seed() -> u64 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_schedule() -> TrotterSchedule {
    TrotterSchedule::default()
}

/// One experiment: the cluster, the emulated device, the measurement plan
/// and the analysis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Relative paths are taken from the working directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub system: SystemSpec,
    #[serde(default)]
    pub topology: TopologySpec,
    /// `(Jt_max, n)` buckets.
    #[serde(default = "default_schedule")]
    pub schedule: TrotterSchedule,
    pub times: TimeGrid,
    /// Measured channels; all `xx` pairs when absent.
    #[serde(default)]
    pub channels: Option<Vec<Channel>>,
    /// Shot sampling and errors; exact expectations when absent.
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub cross_section: CrossSectionSettings,
    #[serde(default)]
    pub concurrence: ConcurrenceSettings,
    /// Directory against which referenced input files are resolved.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<usize>,
    pub noiseless: bool,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses TOML text. Syntax and schema errors carry line and column.
    /// Referenced files are resolved against the working directory.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        Self::parse(text, origin, PathBuf::from("."))
    }

    /// Referenced files are resolved against the directory of `path`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Self::parse(&text, &path.display().to_string(), base)
    }

    fn parse(text: &str, origin: &str, base_dir: PathBuf) -> Result<Self> {
        let mut config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        config.base_dir = base_dir;
        config.validate()?;
        Ok(config)
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|p| p.0)
    }

    /// One of the shipped benchmark configurations.
    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|p| p.0 == name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
        Self::from_toml(text, name)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(shots) = o.shots {
            self.noise.get_or_insert_with(NoiseSpec::default).shots = shots;
        }
        if o.noiseless {
            self.noise = None;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        self.validate()
    }

    /// Hex SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn spin_system(&self) -> Result<SpinSystem> {
        match &self.system {
            SystemSpec::Preset(name) => presets::by_name(name).ok_or_else(|| Error::Config(format!("unknown system preset '{name}'"))),
            SystemSpec::Inline(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }

    pub fn device(&self) -> Result<DeviceTopology> {
        match &self.topology {
            TopologySpec::Preset(name) => DeviceTopology::preset(name).ok_or_else(|| Error::Config(format!("unknown topology preset '{name}'"))),
            TopologySpec::File { file } => DeviceTopology::from_edge_list(&read_to_string(&self.resolve(file))?),
        }
    }

    pub fn time_values(&self) -> Vec<f64> {
        self.times.values()
    }

    /// Configured channels, or every `xx` pair of `system`.
    pub fn channel_list(&self, system: &SpinSystem) -> Vec<Channel> {
        match &self.channels {
            Some(c) => c.clone(),
            None => {
                let n = system.n_spins();
                (0..n).flat_map(|i| (0..n).map(move |j| Channel::new(i, j, Axis::X, Axis::X))).collect()
            }
        }
    }

    pub fn form_factor_table(&self) -> Result<FormFactorTable> {
        let mut table = FormFactorTable::builtin();
        if let Some(file) = &self.cross_section.form_factor_file {
            table.extend(FormFactorTable::load(&self.resolve(file))?);
        }
        Ok(table)
    }

    /// Scattering geometry, or `None` when no ion positions are known.
    pub fn scattering_setup(&self, system: &SpinSystem) -> Result<Option<ScatteringSetup>> {
        let positions = match &self.cross_section.positions {
            Some(p) => p.clone(),
            None if system.positions.len() == system.n_spins() => system.positions.clone(),
            None => return Ok(None),
        };
        if positions.len() != system.n_spins() {
            return Err(Error::Config(format!(
                "cross_section.positions lists {} ions for {} spins",
                positions.len(),
                system.n_spins()
            )));
        }
        let ff = self.form_factor_table()?.get(&self.cross_section.ion)?;
        ScatteringSetup::new(positions, vec![ff; system.n_spins()]).map(Some)
    }

    /// Checks everything that can be checked without running a stage.
    pub fn validate(&self) -> Result<()> {
        let system = self.spin_system()?;
        self.device()?;
        if system.dimension() > 1 << 16 {
            return Err(Error::Config(format!("system dimension {} is too large to emulate", system.dimension())));
        }
        self.times.validate()?;
        let last = self.times.values().last().copied().unwrap_or(0.0);
        if last > self.schedule.max_time() + 1e-12 {
            return Err(Error::Config(format!("times extend to {last} beyond the schedule bound {}", self.schedule.max_time())));
        }
        for c in self.channel_list(&system) {
            if c.i >= system.n_spins() || c.j >= system.n_spins() {
                return Err(Error::Config(format!("channel {c} refers to a missing spin")));
            }
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if self.fit.frequencies == Some(0) {
            return Err(Error::Config("fit.frequencies must be positive".into()));
        }
        if let Some(init) = &self.fit.initial {
            if init.is_empty() || init.iter().any(|w| !w.is_finite()) {
                return Err(Error::Config("fit.initial must list finite frequencies".into()));
            }
        }
        if !(self.fit.tolerance > 0.0) || self.fit.max_iterations == 0 {
            return Err(Error::Config("fit.tolerance and fit.max_iterations must be positive".into()));
        }
        let cs = &self.cross_section;
        if !(cs.width > 0.0) || !cs.width.is_finite() {
            return Err(Error::Config("cross_section.width must be positive".into()));
        }
        if let Some(e) = &cs.energies {
            e.validate("cross_section.energies")?;
        }
        cs.qbox.validate()?;
        cs.map_q.validate("cross_section.map_q")?;
        cs.cut_qx.validate("cross_section.cut_qx")?;
        if let Some(g) = &cs.grid {
            g.validate()?;
        }
        self.form_factor_table()?.get(&cs.ion)?;
        self.scattering_setup(&system)?;
        if let Some(r) = self.concurrence.separation {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Config("concurrence.separation must be positive".into()));
            }
        }
        Ok(())
    }
}
