//! Zero-temperature magnetic neutron cross-section
//! `I(Q,E) ∝ Σ_ij F_i F_j Σ_αβ (δ_αβ − Q̂_α Q̂_β) Σ_p ⟨0|s_i^α|p⟩⟨p|s_j^β|0⟩ e^{−iQ·R_ij} δ(E − E_p)`
//! evaluated from a [`SpectralModel`].
//!
//! Only the `xx` coefficients enter; `yy` equals `xx` by axial symmetry and
//! the remaining terms vanish or cancel for a polarized ground state, so the
//! polarization weight is `(1 − Q̂_x²) + (1 − Q̂_y²)`, taken as its isotropic
//! average `4/3` at `Q = 0`. `δ` becomes a unit-area Gaussian. Intensities
//! are in arbitrary units.

mod form_factor;
mod grid;
mod precession;

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralModel;
use crate::spin::{Axis, SpinSystem};
use crate::util::write_atomic;

pub use form_factor::{FormFactor, FormFactorTable};
pub use grid::{QBox, QEGrid, Span};
pub use precession::{precession_pattern, PrecessionFrame};

pub const DEFAULT_WIDTH: f64 = 0.05;

/// Ion positions (Å) and form factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSetup {
    pub positions: Vec<[f64; 3]>,
    pub form_factors: Vec<FormFactor>,
}

impl ScatteringSetup {
    pub fn new(positions: Vec<[f64; 3]>, form_factors: Vec<FormFactor>) -> Result<Self> {
        if positions.len() != form_factors.len() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                found: form_factors.len(),
            });
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("ion positions must be finite".into()));
        }
        Ok(ScatteringSetup { positions, form_factors })
    }

    /// All ions of `system` share the form factor `ion` from `table`.
    pub fn uniform(system: &SpinSystem, table: &FormFactorTable, ion: &str) -> Result<Self> {
        if system.positions.len() != system.n_spins() {
            return Err(Error::InvalidSystem("scattering needs a position for every spin".into()));
        }
        let ff = table.get(ion)?;
        ScatteringSetup::new(system.positions.clone(), vec![ff; system.n_spins()])
    }

    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }
}

fn gaussian(x: f64, width: f64) -> f64 {
    (-0.5 * (x / width).powi(2)).exp() / (width * (2.0 * std::f64::consts::PI).sqrt())
}

fn check_width(width: f64) -> Result<()> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidArgument(format!("broadening width must be positive, got {width}")));
    }
    Ok(())
}

/// `Σ_αβ (δ_αβ − Q̂_α Q̂_β)` restricted to the transverse diagonal.
pub fn polarization_factor(q: [f64; 3]) -> f64 {
    let q2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
    if q2 < 1e-24 {
        4.0 / 3.0
    } else {
        2.0 - (q[0] * q[0] + q[1] * q[1]) / q2
    }
}

#[derive(Debug, Clone)]
struct Peak {
    omega: f64,
    terms: Vec<(usize, usize, Complex64)>,
}

/// A model prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CrossSection<'a> {
    setup: &'a ScatteringSetup,
    peaks: Vec<Peak>,
}

impl<'a> CrossSection<'a> {
    pub fn new(model: &SpectralModel, setup: &'a ScatteringSetup) -> Result<Self> {
        let n = setup.n_ions();
        let xx: Vec<_> = model
            .channels
            .iter()
            .filter(|c| c.channel.alpha == Axis::X && c.channel.beta == Axis::X)
            .collect();
        for c in &xx {
            for k in [c.channel.i, c.channel.j] {
                if k >= n {
                    return Err(Error::IndexOutOfRange { index: k, limit: n });
                }
            }
        }
        let peaks = model
            .frequencies
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(p, &omega)| {
                let mut terms: Vec<(usize, usize, Complex64)> = Vec::new();
                for c in &xx {
                    let v = c.coefficients[p].value();
                    terms.push((c.channel.i, c.channel.j, v));
                    let mirrored = xx.iter().any(|d| d.channel.i == c.channel.j && d.channel.j == c.channel.i);
                    if !mirrored {
                        terms.push((c.channel.j, c.channel.i, v.conj()));
                    }
                }
                Peak { omega, terms }
            })
            .collect();
        Ok(CrossSection { setup, peaks })
    }

    pub fn peak_energies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.omega).collect()
    }

    /// Complex Q-dependent weight of peak `p` (its imaginary part vanishes
    /// up to rounding).
    pub fn peak_amplitude(&self, p: usize, q: [f64; 3]) -> Complex64 {
        let s = self.setup;
        let qn = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        let f: Vec<f64> = s.form_factors.iter().map(|ff| ff.eval(qn)).collect();
        let mut sum = Complex64::new(0.0, 0.0);
        for &(i, j, v) in &self.peaks[p].terms {
            let r = [0, 1, 2].map(|k| s.positions[i][k] - s.positions[j][k]);
            let phase = -(q[0] * r[0] + q[1] * r[1] + q[2] * r[2]);
            sum += v * f[i] * f[j] * Complex64::from_polar(1.0, phase);
        }
        sum * polarization_factor(q)
    }

    pub fn intensity(&self, q: [f64; 3], e: f64, width: f64) -> Result<f64> {
        check_width(width)?;
        Ok((0..self.peaks.len())
            .map(|p| self.peak_amplitude(p, q).re * gaussian(e - self.peaks[p].omega, width))
            .sum())
    }

    /// Peak weights averaged over the Q box.
    pub fn box_weights(&self, qbox: &QBox) -> Result<Vec<f64>> {
        qbox.validate()?;
        let samples = qbox.samples();
        Ok((0..self.peaks.len())
            .map(|p| samples.par_iter().map(|&q| self.peak_amplitude(p, q).re).sum::<f64>() / samples.len() as f64)
            .collect())
    }
}

/// `I(Q, E)` of `model` at one point.
pub fn intensity(model: &SpectralModel, setup: &ScatteringSetup, q: [f64; 3], e: f64, width: f64) -> Result<f64> {
    CrossSection::new(model, setup)?.intensity(q, e, width)
}

/// Q-integrated spectrum `I(E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub energies: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Peak energies and their Q-box weights.
    pub peaks: Vec<(f64, f64)>,
}

impl EnergySpectrum {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["E", "I"])?;
        for (e, i) in self.energies.iter().zip(&self.intensity) {
            w.write_record([e.to_string(), i.to_string()])?;
        }
        w.into_inner().map_err(|e| Error::parse("spectrum csv", e.to_string()))
    }
}

/// `I(E)` integrated over `qbox` on the `energies` grid.
pub fn energy_spectrum(model: &SpectralModel, setup: &ScatteringSetup, qbox: &QBox, energies: &Span, width: f64) -> Result<EnergySpectrum> {
    check_width(width)?;
    energies.validate("energy")?;
    let xs = CrossSection::new(model, setup)?;
    let weights = xs.box_weights(qbox)?;
    let omegas = xs.peak_energies();
    let e = energies.values();
    let intensity = e
        .iter()
        .map(|&e| omegas.iter().zip(&weights).map(|(&w, &a)| a * gaussian(e - w, width)).sum())
        .collect();
    Ok(EnergySpectrum {
        energies: e,
        intensity,
        peaks: omegas.into_iter().zip(weights).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapProvenance {
    pub model_hash: String,
    pub width: f64,
    pub positions: Vec<[f64; 3]>,
    pub ions: Vec<String>,
    pub grid: QEGrid,
    pub units: String,
}

/// Intensities on a [`QEGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionMap {
    pub points: Vec<[f64; 4]>,
    pub intensity: Vec<f64>,
    pub shape: [usize; 4],
    pub provenance: MapProvenance,
}

impl CrossSectionMap {
    /// Long-format CSV with columns `Qx,Qy,Qz,E,I`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["Qx", "Qy", "Qz", "E", "I"])?;
        for (p, i) in self.points.iter().zip(&self.intensity) {
            w.write_record([p[0], p[1], p[2], p[3], *i].map(|v| v.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::parse("map csv", e.to_string()))
    }

    /// gnuplot-style `x y I` blocks over the first two varying axes
    /// (a blank line after each value of the slower one), or `x I` for cuts.
    pub fn to_gnuplot(&self) -> String {
        let varying: Vec<usize> = (0..4).filter(|&k| self.shape[k] > 1).collect();
        let mut out = String::new();
        match varying.as_slice() {
            [] => out.push_str(&format!("{}\n", self.intensity.first().copied().unwrap_or(0.0))),
            [a] => {
                for (p, i) in self.points.iter().zip(&self.intensity) {
                    out.push_str(&format!("{} {}\n", p[*a], i));
                }
            }
            [a, b, ..] => {
                let inner: usize = self.shape[a + 1..].iter().product();
                let stride_b: usize = self.shape[b + 1..].iter().product();
                for ia in 0..self.shape[*a] {
                    for ib in 0..self.shape[*b] {
                        let k = ia * inner + ib * stride_b;
                        let p = self.points[k];
                        out.push_str(&format!("{} {} {}\n", p[*a], p[*b], self.intensity[k]));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Writes `<stem>.csv`, `<stem>.json` (provenance) and `<stem>.dat` (gnuplot).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_atomic(&dir.join(format!("{stem}.csv")), &self.to_csv()?)?;
        write_atomic(&dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.provenance)?.as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.dat")), self.to_gnuplot().as_bytes())
    }
}

/// Intensity on every point of `grid`.
pub fn evaluate_grid(model: &SpectralModel, setup: &ScatteringSetup, grid: &QEGrid, width: f64) -> Result<CrossSectionMap> {
    check_width(width)?;
    grid.validate()?;
    let xs = CrossSection::new(model, setup)?;
    let points = grid.points();
    let intensity = points
        .par_iter()
        .map(|p| xs.intensity([p[0], p[1], p[2]], p[3], width))
        .collect::<Result<Vec<f64>>>()?;
    Ok(CrossSectionMap {
        points,
        intensity,
        shape: grid.shape(),
        provenance: MapProvenance {
            model_hash: model.hash(),
            width,
            positions: setup.positions.clone(),
            ions: setup.form_factors.iter().map(|f| f.ion.clone()).collect(),
            grid: *grid,
            units: "arbitrary".into(),
        },
    })
}

/// Fixed-energy map over `(Q_x, Q_y)` at `Q_z = qz`. A cut energy far from
/// every peak yields an all-zero map and a warning.
pub fn q_map(model: &SpectralModel, setup: &ScatteringSetup, e_cut: f64, qx: Span, qy: Span, qz: f64, width: f64) -> Result<CrossSectionMap> {
    check_width(width)?;
    if model.frequencies.iter().all(|w| (w - e_cut).abs() > 8.0 * width) {
        log::warn!("energy cut {e_cut} lies outside every peak of the model; the map is zero");
    }
    let grid = QEGrid { qx, qy, qz: Span::Fixed(qz), energy: Span::Fixed(e_cut) };
    evaluate_grid(model, setup, &grid, width)
}

/// `I(Q_x, 0, 0, E = e_cut)`.
pub fn q_cut(model: &SpectralModel, setup: &ScatteringSetup, e_cut: f64, qx: Span, width: f64) -> Result<CrossSectionMap> {
    q_map(model, setup, e_cut, qx, Span::Fixed(0.0), 0.0, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Channel;
    use crate::spectral::reference_model;
    use crate::spin::{presets, ExactSolver};
    use proptest::prelude::*;

    fn xx(n: usize) -> Vec<Channel> {
        (0..n).flat_map(|i| (0..n).map(move |j| Channel::new(i, j, Axis::X, Axis::X))).collect()
    }

    fn exact_model(system: &SpinSystem) -> SpectralModel {
        reference_model(&ExactSolver::new(system).unwrap(), &xx(system.n_spins()), 1e-12).unwrap()
    }

    fn copper(system: &SpinSystem) -> ScatteringSetup {
        ScatteringSetup::uniform(system, &FormFactorTable::builtin(), "Cu2+").unwrap()
    }

    /// Sum over all nine αβ pairs straight from the eigenstates.
    fn brute_force(system: &SpinSystem, setup: &ScatteringSetup, q: [f64; 3], e: f64, width: f64) -> Complex64 {
        let solver = ExactSolver::new(system).unwrap();
        let qn = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        let n = system.n_spins();
        let mut sum = Complex64::new(0.0, 0.0);
        for p in 1..solver.energies().len() {
            let g = gaussian(e - solver.energies()[p], width);
            for i in 0..n {
                for j in 0..n {
                    let r = [0, 1, 2].map(|k| setup.positions[i][k] - setup.positions[j][k]);
                    let phase = Complex64::from_polar(1.0, -(q[0] * r[0] + q[1] * r[1] + q[2] * r[2]));
                    let ff = setup.form_factors[i].eval(qn) * setup.form_factors[j].eval(qn);
                    for a in Axis::ALL {
                        for b in Axis::ALL {
                            let delta = if a == b { 1.0 } else { 0.0 };
                            let pol = if qn < 1e-12 { 2.0 / 3.0 * delta } else { delta - q[a.index()] * q[b.index()] / (qn * qn) };
                            let prod = solver.element(i, a, p).unwrap() * solver.element(j, b, p).unwrap().conj();
                            sum += prod * pol * ff * phase * g;
                        }
                    }
                }
            }
        }
        sum
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matches_brute_force_sum(qx in -3.0f64..3.0, qy in -3.0f64..3.0, qz in -3.0f64..3.0, which in 0usize..4, de in -0.1f64..0.1) {
            let system = [presets::molecule_1(), presets::molecule_2(), presets::molecule_3(), presets::trimer()][which].clone();
            let setup = copper(&system);
            let model = exact_model(&system);
            let xs = CrossSection::new(&model, &setup).unwrap();
            let e = xs.peak_energies()[0] + de;
            let got = xs.intensity([qx, qy, qz], e, 0.05).unwrap();
            let want = brute_force(&system, &setup, [qx, qy, qz], e, 0.05);
            prop_assert!(want.im.abs() <= 1e-12 * want.norm().max(1e-300) + 1e-15);
            prop_assert!((got - want.re).abs() <= 1e-6 * want.re.abs().max(1e-12));
            for p in 0..xs.peak_energies().len() {
                let a = xs.peak_amplitude(p, [qx, qy, qz]);
                prop_assert!(a.im.abs() <= 1e-12 * a.norm().max(1e-15));
            }
        }
    }

    #[test]
    fn zero_q_uses_isotropic_average() {
        let system = presets::molecule_2();
        let setup = copper(&system);
        let e = exact_model(&system).frequencies[1];
        let got = intensity(&exact_model(&system), &setup, [0.0; 3], e, 0.05).unwrap();
        let want = brute_force(&system, &setup, [0.0; 3], e, 0.05).re;
        assert!((got - want).abs() < 1e-9 * want.abs());
    }

    #[test]
    fn molecule_1_fringes() {
        let system = presets::molecule_1();
        let setup = ScatteringSetup::new(system.positions.clone(), vec![FormFactor::unit(); 2]).unwrap();
        let model = exact_model(&system);
        let xs = CrossSection::new(&model, &setup).unwrap();
        let r = presets::DIMER_SEPARATION;
        for k in 1..40 {
            let qx = k as f64 * 0.1;
            let peak_i = xs.peak_amplitude(0, [qx, 0.0, 0.0]).re;
            let peak_ii = xs.peak_amplitude(1, [qx, 0.0, 0.0]).re;
            // Along x the polarization weight is 1.
            assert!((peak_i - 0.25 * (1.0 - (qx * r).cos())).abs() < 1e-12);
            assert!((peak_ii - 0.25 * (1.0 + (qx * r).cos())).abs() < 1e-12);
        }
        // Inter-multiplet transition vanishes at small Q.
        assert!(xs.peak_amplitude(0, [1e-4, 0.0, 0.0]).re.abs() < 1e-7);
    }

    #[test]
    fn single_ion_model_depends_only_on_modulus() {
        let system = presets::molecule_2();
        let setup = ScatteringSetup::new(system.positions.clone(), vec![FormFactor::unit(); 2]).unwrap();
        let mut model = exact_model(&system);
        model.channels.retain(|c| c.channel.i == c.channel.j);
        let xs = CrossSection::new(&model, &setup).unwrap();
        let base = xs.peak_amplitude(0, [0.0, 0.0, 1.0]).re / polarization_factor([0.0, 0.0, 1.0]);
        for q in [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.0, 0.6, 0.8]] {
            let a = xs.peak_amplitude(0, q).re / polarization_factor(q);
            assert!((a - base).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_channel_labels_with_conjugation_is_invariant() {
        let system = presets::trimer();
        let setup = copper(&system);
        let model = exact_model(&system);
        let mut swapped = model.clone();
        for c in &mut swapped.channels {
            std::mem::swap(&mut c.channel.i, &mut c.channel.j);
            for k in &mut c.coefficients {
                k.b = -k.b;
            }
        }
        let (a, b) = (CrossSection::new(&model, &setup).unwrap(), CrossSection::new(&swapped, &setup).unwrap());
        for q in [[0.3, -1.1, 0.4], [2.0, 0.5, -0.7]] {
            for e in [8.5, 9.5, 10.0] {
                assert!((a.intensity(q, e, 0.05).unwrap() - b.intensity(q, e, 0.05).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn broadening_conserves_area() {
        let system = presets::molecule_1();
        let setup = copper(&system);
        let model = exact_model(&system);
        let xs = CrossSection::new(&model, &setup).unwrap();
        let q = [0.7, 0.2, -0.3];
        let area = |w: f64| {
            let h = 0.001;
            (0..10000).map(|k| xs.intensity(q, -2.0 + k as f64 * h, w).unwrap() * h).sum::<f64>()
        };
        let (a, b) = (area(0.05), area(0.12));
        assert!((a - b).abs() < 1e-6 * a.abs());
    }

    #[test]
    fn spectra_peaks() {
        let qbox = QBox { q_max: 2.0, points: 12 };
        let sys1 = presets::molecule_1();
        let s1 = energy_spectrum(&exact_model(&sys1), &copper(&sys1), &qbox, &Span::range(0.0, 12.0, 0.01), 0.05).unwrap();
        assert_eq!(s1.peaks.len(), 2);
        assert!((s1.peaks[0].0 - 2.0).abs() < 1e-9 && (s1.peaks[1].0 - 3.0).abs() < 1e-9);
        let ratio = s1.peaks[0].1 / s1.peaks[1].1;
        assert!(ratio > 0.5 && ratio < 2.0, "ratio {ratio}");

        let tri = presets::trimer();
        let s3 = energy_spectrum(&exact_model(&tri), &copper(&tri), &qbox, &Span::range(7.0, 11.0, 0.01), 0.05).unwrap();
        let e: Vec<f64> = s3.peaks.iter().map(|p| p.0).collect();
        assert_eq!(e.len(), 3);
        for (a, b) in e.iter().zip([8.5, 9.5, 10.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        // Local maxima of the curve sit on the peaks.
        let maxima: Vec<f64> = (1..s3.intensity.len() - 1)
            .filter(|&k| s3.intensity[k] > s3.intensity[k - 1] && s3.intensity[k] > s3.intensity[k + 1])
            .map(|k| s3.energies[k])
            .collect();
        assert_eq!(maxima.len(), 3);

        let empty = SpectralModel { frequencies: vec![], frequency_stderr: vec![], channels: vec![], diagnostics: None };
        let s0 = energy_spectrum(&empty, &copper(&sys1), &qbox, &Span::range(0.0, 5.0, 0.5), 0.05).unwrap();
        assert!(s0.intensity.iter().all(|&i| i == 0.0));
    }

    #[test]
    fn maps_and_files() {
        let system = presets::molecule_1();
        let setup = copper(&system);
        let model = exact_model(&system);
        let map = q_map(&model, &setup, 2.0, Span::range(-1.0, 1.0, 0.5), Span::range(-1.0, 1.0, 0.25), 0.0, 0.05).unwrap();
        assert_eq!(map.shape, [5, 9, 1, 1]);
        assert!(map.intensity.iter().all(|&i| i >= -1e-12));
        let dir = tempfile::tempdir().unwrap();
        map.write(dir.path(), "map").unwrap();
        let csv = std::fs::read_to_string(dir.path().join("map.csv")).unwrap();
        assert!(csv.starts_with("Qx,Qy,Qz,E,I\n"));
        assert_eq!(csv.lines().count(), 46);
        let dat = std::fs::read_to_string(dir.path().join("map.dat")).unwrap();
        assert_eq!(dat.split("\n\n").filter(|b| !b.trim().is_empty()).count(), 5);
        let off = q_map(&model, &setup, 40.0, Span::Fixed(0.3), Span::Fixed(0.1), 0.0, 0.05).unwrap();
        assert!(off.intensity.iter().all(|&i| i.abs() < 1e-300));
        assert!(intensity(&model, &setup, [0.1; 3], 2.0, -1.0).is_err());
    }

    #[test]
    fn fringe_contrast_orders_the_dimers() {
        let contrast = |system: SpinSystem| {
            let setup = ScatteringSetup::new(system.positions.clone(), vec![FormFactor::unit(); 2]).unwrap();
            let model = exact_model(&system);
            let xs = CrossSection::new(&model, &setup).unwrap();
            let v: Vec<f64> = (0..200).map(|k| xs.peak_amplitude(0, [0.05 + k as f64 * 0.02, 0.0, 0.0]).re).collect();
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            (hi - lo) / (hi + lo)
        };
        let (c1, c2, c3) = (contrast(presets::molecule_1()), contrast(presets::molecule_2()), contrast(presets::molecule_3()));
        assert!(c1 > c2 && c2 > c3, "{c1} {c2} {c3}");
        assert!(c3 < 1e-9);
    }
}
