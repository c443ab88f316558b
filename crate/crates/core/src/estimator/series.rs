use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Channel;
use crate::error::{Error, Result};
use crate::spin::{Axis, EncodedSystem, SpinSystem};
use crate::util::{read_to_string, write_atomic};

/// Provenance and correction parameters of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub channel: Channel,
    /// Phase `φ` applied as `e^{iφ}` during correction, radians.
    pub phase: f64,
    /// Amplitude scale applied during correction.
    pub scale: f64,
    pub seed: Option<u64>,
    pub shots: Option<usize>,
    /// Trotter schedule buckets `(Jt_max, n)`; an unbounded last bucket is `null`.
    #[serde(with = "open_bounds")]
    pub schedule: Vec<(f64, usize)>,
}

mod open_bounds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[(f64, usize)], s: S) -> Result<S::Ok, S::Error> {
        let out: Vec<(Option<f64>, usize)> = v.iter().map(|&(b, n)| (b.is_finite().then_some(b), n)).collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, usize)>, D::Error> {
        let raw: Vec<(Option<f64>, usize)> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|(b, n)| (b.unwrap_or(f64::INFINITY), n)).collect())
    }
}

/// A sampled correlation function `C_ij^{αβ}(t)` with raw and corrected values.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub metadata: SeriesMetadata,
    times: Vec<f64>,
    raw: Vec<Complex64>,
    corrected: Vec<Complex64>,
    /// Standard errors of the raw quadratures.
    raw_stderr: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    t: f64,
    #[serde(rename = "Re_raw")]
    re_raw: f64,
    #[serde(rename = "Im_raw")]
    im_raw: f64,
    #[serde(rename = "Re_corr")]
    re_corr: f64,
    #[serde(rename = "Im_corr")]
    im_corr: f64,
    #[serde(rename = "stderr_Re")]
    stderr_re: f64,
    #[serde(rename = "stderr_Im")]
    stderr_im: f64,
}

impl CorrelationSeries {
    /// Uncorrected series: corrected values equal the raw ones.
    pub fn from_raw(metadata: SeriesMetadata, times: Vec<f64>, raw: Vec<Complex64>, raw_stderr: Vec<[f64; 2]>) -> Self {
        CorrelationSeries {
            metadata: SeriesMetadata { phase: 0.0, scale: 1.0, ..metadata },
            times,
            corrected: raw.clone(),
            raw,
            raw_stderr,
        }
    }

    pub fn channel(&self) -> Channel {
        self.metadata.channel
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.raw
    }

    pub fn corrected(&self) -> &[Complex64] {
        &self.corrected
    }

    pub fn raw_stderr(&self) -> &[[f64; 2]] {
        &self.raw_stderr
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Standard errors of the corrected quadratures.
    pub fn corrected_stderr(&self) -> Vec<[f64; 2]> {
        let (s, c) = self.metadata.phase.sin_cos();
        let k = self.metadata.scale;
        self.raw_stderr
            .iter()
            .map(|&[er, ei]| [k * (c * er).hypot(s * ei), k * (s * er).hypot(c * ei)])
            .collect()
    }

    /// Sets phase and scale and recomputes the corrected values.
    pub fn apply_correction(&mut self, phase: f64, scale: f64) {
        self.metadata.phase = phase;
        self.metadata.scale = scale;
        let f = Complex64::from_polar(scale, phase);
        self.corrected = self.raw.iter().map(|z| z * f).collect();
    }

    fn starts_at_zero(&self) -> bool {
        self.times.first().is_some_and(|t| t.abs() < 1e-12)
    }

    /// Writes `<stem>.csv` (columns `t, Re_raw, Im_raw, Re_corr, Im_corr,
    /// stderr_Re, stderr_Im`; the errors refer to the raw quadratures) and the
    /// metadata sidecar `<stem>.json` into `dir`. Returns the CSV path.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for k in 0..self.len() {
            w.serialize(Row {
                t: self.times[k],
                re_raw: self.raw[k].re,
                im_raw: self.raw[k].im,
                re_corr: self.corrected[k].re,
                im_corr: self.corrected[k].im,
                stderr_re: self.raw_stderr[k][0],
                stderr_im: self.raw_stderr[k][1],
            })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::parse("series csv", e.to_string()))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        write_atomic(&csv_path, &bytes)?;
        write_atomic(&dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.metadata)?.as_bytes())?;
        Ok(csv_path)
    }

    /// Reads a series written by [`CorrelationSeries::write`]; `csv_path`
    /// must have its `.json` sidecar next to it.
    pub fn read(csv_path: &Path) -> Result<Self> {
        let sidecar = csv_path.with_extension("json");
        let metadata: SeriesMetadata = serde_json::from_str(&read_to_string(&sidecar)?)
            .map_err(|e| Error::parse(sidecar.display().to_string(), e.to_string()))?;
        let text = read_to_string(csv_path)?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<Row> = r.deserialize().collect::<std::result::Result<_, _>>()?;
        let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!("{}: times not strictly increasing", csv_path.display())));
        }
        Ok(CorrelationSeries {
            metadata,
            times,
            raw: rows.iter().map(|r| Complex64::new(r.re_raw, r.im_raw)).collect(),
            corrected: rows.iter().map(|r| Complex64::new(r.re_corr, r.im_corr)).collect(),
            raw_stderr: rows.iter().map(|r| [r.stderr_re, r.stderr_im]).collect(),
        })
    }
}

fn find_reference(set: &[CorrelationSeries], i: usize, axis: Axis) -> Result<Complex64> {
    set.iter()
        .find(|s| s.channel() == Channel::auto(i, axis) && s.starts_at_zero())
        .map(|s| s.raw[0])
        .ok_or_else(|| Error::MissingReference(format!("C_{i}{i}^{a}{a}(t=0)", a = axis.label())))
}

/// Phase and sum-rule correction.
///
/// Every series whose first index is `(i, α)` is multiplied by `e^{iφ_i^α}`
/// with `φ_i^α = −arg C̃_ii^{αα}(0)`; then all series share one amplitude
/// factor restoring `Σ_i Σ_α C_ii^{αα}(0) = Σ_i s_i(s_i+1)` over the sites
/// that appear as first index. Autocorrelations at `t = 0` for all three
/// axes of those sites must be present.
pub fn correct_series(set: &[CorrelationSeries], system: &SpinSystem) -> Result<Vec<CorrelationSeries>> {
    let mut phases: BTreeMap<(usize, Axis), f64> = BTreeMap::new();
    let mut sites: Vec<usize> = set.iter().map(|s| s.channel().i).collect();
    sites.sort_unstable();
    sites.dedup();
    let mut measured = 0.0;
    let mut target = 0.0;
    for &i in &sites {
        if i >= system.n_spins() {
            return Err(Error::IndexOutOfRange { index: i, limit: system.n_spins() });
        }
        let s = system.spins[i];
        target += s * (s + 1.0);
        for axis in Axis::ALL {
            let r = find_reference(set, i, axis)?;
            phases.insert((i, axis), -r.arg());
            measured += r.norm();
        }
    }
    if !(measured > 0.0) {
        return Err(Error::MissingReference("autocorrelation references vanish".into()));
    }
    let scale = target / measured;
    Ok(set
        .iter()
        .map(|s| {
            let mut out = s.clone();
            let c = s.channel();
            out.apply_correction(phases[&(c.i, c.alpha)], scale);
            out
        })
        .collect())
}

/// Assembles the spin-pair series of `channel` from qubit-pair series of an
/// encoded system. Qubit series are in spin units (`s = σ/2`), so the spin
/// correlation is their plain sum; errors add in quadrature. A spin-1/2
/// identity encoding passes the single constituent through.
pub fn composite_correlation_for_higher_spin(
    encoded: &EncodedSystem,
    channel: Channel,
    qubit_series: &[CorrelationSeries],
) -> Result<CorrelationSeries> {
    let n = encoded.registers.len();
    for k in [channel.i, channel.j] {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, limit: n });
        }
    }
    let parts: Vec<&CorrelationSeries> = encoded
        .qubit_pairs(channel.i, channel.j)
        .into_iter()
        .map(|(a, b)| {
            let want = Channel::new(a, b, channel.alpha, channel.beta);
            qubit_series
                .iter()
                .find(|s| s.channel() == want)
                .ok_or_else(|| Error::MissingReference(format!("qubit series {want}")))
        })
        .collect::<Result<_>>()?;
    let first = parts[0];
    if parts.iter().any(|p| p.times != first.times) {
        return Err(Error::InvalidGrid("constituent series use different time grids".into()));
    }
    let nt = first.len();
    let mut raw = vec![Complex64::new(0.0, 0.0); nt];
    let mut var = vec![[0.0f64; 2]; nt];
    for p in &parts {
        for k in 0..nt {
            raw[k] += p.raw[k];
            var[k][0] += p.raw_stderr[k][0].powi(2);
            var[k][1] += p.raw_stderr[k][1].powi(2);
        }
    }
    let metadata = SeriesMetadata {
        channel,
        ..first.metadata.clone()
    };
    Ok(CorrelationSeries::from_raw(
        metadata,
        first.times.clone(),
        raw,
        var.into_iter().map(|[a, b]| [a.sqrt(), b.sqrt()]).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::DeviceTopology;
    use crate::estimator::{run_series, SeriesRequest};
    use crate::spin::{encode_higher_spin, exact_correlation, presets, Bond};
    use crate::trotter::TrotterSchedule;

    fn noiseless_set(system: &SpinSystem, channels: &[Channel], times: &[f64]) -> Vec<CorrelationSeries> {
        let sched = TrotterSchedule::uniform(1).unwrap();
        let topo = DeviceTopology::fully_connected(system.n_spins() * 2 + 1);
        run_series(&SeriesRequest { system, channels, times, schedule: &sched, topology: &topo, noise: None, seed: 0 }).unwrap()
    }

    fn molecule_1_set() -> Vec<CorrelationSeries> {
        let mut ch: Vec<Channel> = Axis::ALL.iter().flat_map(|&a| [Channel::auto(0, a), Channel::auto(1, a)]).collect();
        ch.push(Channel::new(0, 1, Axis::X, Axis::X));
        let times: Vec<f64> = (0..12).map(|k| k as f64 * 0.25).collect();
        noiseless_set(&presets::molecule_1(), &ch, &times)
    }

    #[test]
    fn noiseless_correction_is_identity() {
        let set = molecule_1_set();
        let corrected = correct_series(&set, &presets::molecule_1()).unwrap();
        for s in &corrected {
            assert!(s.metadata.phase.abs() < 1e-12);
            assert!((s.metadata.scale - 1.0).abs() < 1e-12);
            for (a, b) in s.corrected().iter().zip(s.raw()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn injected_phase_and_attenuation_are_removed() {
        let system = presets::molecule_1();
        let clean = molecule_1_set();
        let damaged: Vec<CorrelationSeries> = clean
            .iter()
            .map(|s| {
                let f = Complex64::from_polar(0.8, 0.3 + 0.1 * s.channel().i as f64);
                CorrelationSeries::from_raw(s.metadata.clone(), s.times().to_vec(), s.raw().iter().map(|z| z * f).collect(), s.raw_stderr().to_vec())
            })
            .collect();
        let fixed = correct_series(&damaged, &system).unwrap();
        for (f, c) in fixed.iter().zip(&clean) {
            assert!((f.metadata.scale - 1.25).abs() < 1e-9);
            for (k, z) in f.corrected().iter().enumerate() {
                let ch = c.channel();
                let exact = exact_correlation(&system, ch.i, ch.j, ch.alpha, ch.beta, c.times()[k]).unwrap();
                assert!((z - exact).norm() < 1e-9);
            }
        }
        let sum: f64 = fixed
            .iter()
            .filter(|s| s.channel().is_autocorrelation() && s.channel().i == 0)
            .map(|s| s.corrected()[0].re)
            .sum();
        assert!((sum - 0.75).abs() < 1e-9);
        for s in fixed.iter().filter(|s| s.channel().is_autocorrelation()) {
            assert!(s.corrected()[0].im.abs() < 1e-12 && s.corrected()[0].re > 0.0);
        }
    }

    #[test]
    fn missing_reference_is_reported() {
        let set: Vec<CorrelationSeries> = molecule_1_set().into_iter().filter(|s| s.channel() != Channel::auto(1, Axis::Y)).collect();
        assert!(matches!(correct_series(&set, &presets::molecule_1()), Err(Error::MissingReference(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = molecule_1_set().pop().unwrap();
        s.apply_correction(0.2, 1.1);
        let path = s.write(dir.path(), &s.channel().file_stem()).unwrap();
        let back = CorrelationSeries::read(&path).unwrap();
        assert_eq!(back.metadata, s.metadata);
        assert_eq!(back.times(), s.times());
        for (a, b) in back.corrected().iter().zip(s.corrected()) {
            assert!((a - b).norm() < 1e-12);
        }
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("t,Re_raw,Im_raw,Re_corr,Im_corr,stderr_Re,stderr_Im"));
    }

    #[test]
    fn spin_one_composite_matches_dense_oracle() {
        let system = SpinSystem::new(vec![1.0, 1.0], vec![Bond::new(0, 1, 0.0, 1.0)], 3.0, vec![1.0, 1.2], Vec::new()).unwrap();
        let channels = [Channel::new(1, 0, Axis::X, Axis::X), Channel::auto(0, Axis::Y), Channel::new(0, 1, Axis::X, Axis::Y)];
        let times: Vec<f64> = (0..8).map(|k| k as f64 * 0.37).collect();
        let series = noiseless_set(&system, &channels, &times);
        for s in &series {
            let c = s.channel();
            for (k, &t) in times.iter().enumerate() {
                let exact = exact_correlation(&system, c.i, c.j, c.alpha, c.beta, t).unwrap();
                assert!((s.raw()[k] - exact).norm() < 1e-8, "{c} t={t}");
            }
        }
    }

    #[test]
    fn identity_encoding_passes_through() {
        let system = presets::molecule_2();
        let enc = encode_higher_spin(&system).unwrap();
        let set = noiseless_set(&system, &[Channel::new(0, 1, Axis::X, Axis::X)], &[0.0, 0.5]);
        let out = composite_correlation_for_higher_spin(&enc, Channel::new(0, 1, Axis::X, Axis::X), &set).unwrap();
        assert_eq!(out.raw(), set[0].raw());
        assert!(matches!(
            composite_correlation_for_higher_spin(&enc, Channel::auto(0, Axis::X), &set),
            Err(Error::MissingReference(_))
        ));
    }
}
