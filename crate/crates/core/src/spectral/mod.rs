//! Fourier content of correlation series: `C(t) = c + Σ_p (A_p + iB_p) e^{−iω_p t}`
//! with frequencies shared by all channels.

mod fit;
mod periodogram;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{Channel, CorrelationSeries, SeriesMetadata};
use crate::spin::ExactSolver;

pub use fit::{fit_model, FitOptions};
pub use periodogram::{estimate_frequencies, periodogram, seed_frequencies};

/// `A + iB` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coefficient {
    pub a: f64,
    pub b: f64,
    pub a_stderr: f64,
    pub b_stderr: f64,
}

impl Coefficient {
    pub fn exact(value: Complex64) -> Self {
        Coefficient {
            a: value.re,
            b: value.im,
            ..Coefficient::default()
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.a, self.b)
    }
}

/// Coefficients of one channel; `coefficients[p]` belongs to `frequencies[p]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub channel: Channel,
    pub coefficients: Vec<Coefficient>,
    /// Constant (zero-frequency) term, if modelled.
    pub constant: Option<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub residual_sum_of_squares: f64,
    pub residual_rms: f64,
    pub degrees_of_freedom: usize,
    /// Residual sum of squares over the mean reported variance per degree of
    /// freedom; absent when the input carries no error estimates.
    pub reduced_chi_square: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    /// Excitation frequencies `ω_p` in units of J, ascending.
    pub frequencies: Vec<f64>,
    pub frequency_stderr: Vec<f64>,
    pub channels: Vec<ChannelFit>,
    /// `None` for models not obtained by fitting.
    pub diagnostics: Option<FitDiagnostics>,
}

/// One entry of the matrix-element table `⟨0|s_i^α|p⟩⟨p|s_j^β|0⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixElementProduct {
    pub channel: Channel,
    pub omega: f64,
    pub value: Complex64,
    pub stderr: [f64; 2],
}

impl SpectralModel {
    pub fn channel(&self, channel: Channel) -> Option<&ChannelFit> {
        self.channels.iter().find(|c| c.channel == channel)
    }

    pub fn coefficient(&self, channel: Channel, p: usize) -> Option<Coefficient> {
        self.channel(channel).and_then(|c| c.coefficients.get(p).copied())
    }

    /// Coefficient at the fitted frequency closest to `omega`.
    pub fn coefficient_near(&self, channel: Channel, omega: f64) -> Option<Coefficient> {
        let p = self
            .frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - omega).abs().total_cmp(&(b.1 - omega).abs()))?
            .0;
        self.coefficient(channel, p)
    }

    pub fn evaluate(&self, channel: Channel, t: f64) -> Result<Complex64> {
        let fit = self
            .channel(channel)
            .ok_or_else(|| Error::InvalidArgument(format!("model has no channel {channel}")))?;
        let mut z = fit.constant.map_or(Complex64::new(0.0, 0.0), |c| c.value());
        for (c, &w) in fit.coefficients.iter().zip(&self.frequencies) {
            z += c.value() * Complex64::from_polar(1.0, -w * t);
        }
        Ok(z)
    }

    /// Noise-free series of every channel on `times`.
    pub fn synthesize(&self, times: &[f64]) -> Result<Vec<CorrelationSeries>> {
        self.channels
            .iter()
            .map(|c| {
                let values = times.iter().map(|&t| self.evaluate(c.channel, t)).collect::<Result<Vec<_>>>()?;
                let meta = SeriesMetadata {
                    channel: c.channel,
                    phase: 0.0,
                    scale: 1.0,
                    seed: None,
                    shots: None,
                    schedule: Vec::new(),
                };
                Ok(CorrelationSeries::from_raw(meta, times.to_vec(), values, vec![[0.0, 0.0]; times.len()]))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SpectralModel = serde_json::from_str(text).map_err(|e| Error::parse("spectral model", e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.frequencies.len();
        if self.frequency_stderr.len() != p {
            return Err(Error::parse("spectral model", "frequency_stderr length differs from frequencies"));
        }
        if let Some(c) = self.channels.iter().find(|c| c.coefficients.len() != p) {
            return Err(Error::parse("spectral model", format!("channel {} has {} coefficients for {p} frequencies", c.channel, c.coefficients.len())));
        }
        Ok(())
    }

    /// Hex SHA-256 of the JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Complex products `A + iB` per channel and frequency.
pub fn model_to_matrix_elements(model: &SpectralModel) -> Vec<MatrixElementProduct> {
    model
        .channels
        .iter()
        .flat_map(|c| {
            c.coefficients.iter().zip(&model.frequencies).map(move |(k, &omega)| MatrixElementProduct {
                channel: c.channel,
                omega,
                value: k.value(),
                stderr: [k.a_stderr, k.b_stderr],
            })
        })
        .collect()
}

/// Exact model of `channels` from diagonalization: one frequency per
/// distinct excitation energy carrying weight above `threshold` in some
/// channel; the ground-level product becomes the constant term.
pub fn reference_model(solver: &ExactSolver, channels: &[Channel], threshold: f64) -> Result<SpectralModel> {
    let tol = solver.eigen().degeneracy_tol().max(1e-9);
    let grouped: Vec<Vec<(f64, Complex64)>> = channels
        .iter()
        .map(|c| solver.grouped_products(c.i, c.j, c.alpha, c.beta, threshold))
        .collect::<Result<_>>()?;
    let mut freqs: Vec<f64> = grouped.iter().flatten().map(|g| g.0).filter(|&e| e > tol).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let channels = channels
        .iter()
        .zip(&grouped)
        .map(|(&channel, groups)| {
            let at = |e: f64| groups.iter().find(|g| (g.0 - e).abs() <= tol).map(|g| g.1);
            ChannelFit {
                channel,
                coefficients: freqs.iter().map(|&w| Coefficient::exact(at(w).unwrap_or_default())).collect(),
                constant: Some(Coefficient::exact(at(0.0).unwrap_or_default())),
            }
        })
        .collect();
    Ok(SpectralModel {
        frequency_stderr: vec![0.0; freqs.len()],
        frequencies: freqs,
        channels,
        diagnostics: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{presets, Axis};

    #[test]
    fn reference_model_of_molecule_1() {
        let solver = ExactSolver::new(&presets::molecule_1()).unwrap();
        let ch = [Channel::new(1, 0, Axis::X, Axis::X), Channel::auto(0, Axis::X)];
        let m = reference_model(&solver, &ch, 1e-10).unwrap();
        assert_eq!(m.frequencies.len(), 2);
        assert!((m.frequencies[0] - 2.0).abs() < 1e-10 && (m.frequencies[1] - 3.0).abs() < 1e-10);
        let cross: Vec<f64> = m.channel(ch[0]).unwrap().coefficients.iter().map(|c| c.a).collect();
        assert!((cross[0] + 0.125).abs() < 1e-10 && (cross[1] - 0.125).abs() < 1e-10);
        // The reference reproduces the exact correlation.
        for t in [0.0, 0.4, 1.9] {
            let z = m.evaluate(ch[0], t).unwrap();
            assert!((z - solver.correlation(1, 0, Axis::X, Axis::X, t).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn matrix_element_table_and_json() {
        let solver = ExactSolver::new(&presets::molecule_2()).unwrap();
        let ch = [Channel::auto(0, Axis::X), Channel::new(0, 1, Axis::X, Axis::X)];
        let m = reference_model(&solver, &ch, 1e-10).unwrap();
        let table = model_to_matrix_elements(&m);
        assert_eq!(table.len(), 4);
        assert!(table.iter().filter(|e| e.channel.is_autocorrelation()).all(|e| e.value.im.abs() < 1e-12 && e.value.re >= 0.0));
        let back = SpectralModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash(), m.hash());
        assert_eq!(m.hash().len(), 64);
    }

    #[test]
    fn malformed_json_is_rejected() {
        let solver = ExactSolver::new(&presets::molecule_1()).unwrap();
        let mut m = reference_model(&solver, &[Channel::auto(0, Axis::X)], 1e-10).unwrap();
        m.channels[0].coefficients.pop();
        assert!(SpectralModel::from_json(&m.to_json().unwrap()).is_err());
    }
}
