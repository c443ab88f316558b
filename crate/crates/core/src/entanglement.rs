//! Concurrence of dimer eigenstates, directly and from the Q modulation of
//! a neutron-scattering cut.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ins::{polarization_factor, FormFactor};
use crate::spectral::Coefficient;
use crate::spin::ExactSolver;
use crate::util::read_to_string;

/// `a|00⟩ + b|01⟩ + c|10⟩ + d|11⟩` with `|0⟩ = |↑⟩`, first digit = spin 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerExcitedState {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl DimerExcitedState {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("state norm² is {norm}, expected 1")));
        }
        Ok(DimerExcitedState { a, b, c, d })
    }

    /// Eigenstate `p` of a spin-1/2 dimer.
    pub fn from_level(solver: &ExactSolver, p: usize) -> Result<Self> {
        if solver.system().n_spins() != 2 || !solver.system().is_spin_half() {
            return Err(Error::InvalidSystem("concurrence needs a spin-1/2 dimer".into()));
        }
        if p >= solver.eigen().dim() {
            return Err(Error::IndexOutOfRange { index: p, limit: solver.eigen().dim() });
        }
        let v = solver.eigen().vector(p);
        DimerExcitedState::new(v[0], v[1], v[2], v[3])
    }
}

/// `C = 2|ad − bc|`.
pub fn concurrence_exact(state: &DimerExcitedState) -> f64 {
    2.0 * (state.a * state.d - state.b * state.c).norm()
}

/// Result of fitting `I/(F_1 F_2 P) = u + v cos(Q_x R) + w sin(Q_x R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceFit {
    /// `√(v² + w²)/u`, clipped to `[0, 1]`.
    pub concurrence: f64,
    pub stderr: f64,
    /// Set when the modulation is indistinguishable from noise; the
    /// concurrence is then reported as 0 with this upper bound.
    pub upper_bound: Option<f64>,
    /// Set when the unconstrained value exceeded 1.
    pub clipped: bool,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub residual_rms: f64,
    pub points: usize,
}

/// One sample of a cut: `(Q_x, Q_y, Q_z, E, I)`.
pub type CutSample = [f64; 5];

/// Concurrence of the excited state behind a single-peak cut `I(Q_x)` of a
/// dimer whose ions sit `r` Å apart along x.
///
/// Assumes `a = d = 0` (no `|↑↑⟩`/`|↓↓⟩` weight), so `|b|² + |c|² = 1`.
pub fn concurrence_from_qcut(samples: &[CutSample], r: f64, f1: &FormFactor, f2: &FormFactor) -> Result<ConcurrenceFit> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("ion separation must be positive, got {r}")));
    }
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for s in samples {
        let q = [s[0], s[1], s[2]];
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let envelope = f1.eval(qn) * f2.eval(qn) * polarization_factor(q);
        if envelope.abs() > 1e-6 && s.iter().all(|x| x.is_finite()) {
            rows.push((s[0] * r, s[4] / envelope));
        }
    }
    if rows.len() < 4 {
        return Err(Error::TooFewPoints { required: 4, available: rows.len() });
    }
    let x = DMatrix::from_fn(rows.len(), 3, |k, c| match c {
        0 => 1.0,
        1 => rows[k].0.cos(),
        _ => rows[k].0.sin(),
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-10 * smax) {
        return Err(Error::RankDeficient);
    }
    let beta = svd.solve(&y, 0.0).map_err(|_| Error::RankDeficient)?;
    let resid = &y - &x * &beta;
    let dof = rows.len() - 3;
    let sigma2 = if dof > 0 { resid.norm_squared() / dof as f64 } else { 0.0 };
    let v_t = svd.v_t.expect("v_t was requested");
    let cov = DMatrix::from_fn(3, 3, |i, j| (0..3).map(|s| v_t[(s, i)] * v_t[(s, j)] / svd.singular_values[s].powi(2)).sum::<f64>() * sigma2);
    let (u, v, w) = (beta[0], beta[1], beta[2]);
    if !(u > 0.0) {
        return Err(Error::InvalidArgument("cut carries no positive inelastic weight".into()));
    }
    let m = v.hypot(w);
    let residual_rms = (resid.norm_squared() / rows.len() as f64).sqrt();
    // σ of the modulus along its own direction.
    let sigma_m = if m > 0.0 {
        let g = [v / m, w / m];
        (g[0] * g[0] * cov[(1, 1)] + 2.0 * g[0] * g[1] * cov[(1, 2)] + g[1] * g[1] * cov[(2, 2)]).max(0.0).sqrt()
    } else {
        (cov[(1, 1)] + cov[(2, 2)]).max(0.0).sqrt()
    };
    let raw = m / u;
    let grad = if m > 0.0 { [-raw / u, v / (u * m), w / (u * m)] } else { [0.0; 3] };
    let stderr = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| grad[i] * grad[j] * cov[(i, j)])
        .sum::<f64>()
        .max(0.0)
        .sqrt();
    let mut fit = ConcurrenceFit {
        concurrence: raw,
        stderr,
        upper_bound: None,
        clipped: false,
        u,
        v,
        w,
        residual_rms,
        points: rows.len(),
    };
    if raw < 1e-9 || m < 2.0 * sigma_m {
        fit.upper_bound = Some(((m + 2.0 * sigma_m) / u).min(1.0));
        fit.concurrence = 0.0;
    } else if raw > 1.0 {
        if raw - 1.0 > stderr {
            log::warn!("fitted concurrence {raw:.4} exceeds 1 by more than its uncertainty {stderr:.4}; clipping");
        }
        fit.concurrence = 1.0;
        fit.clipped = true;
    }
    Ok(fit)
}

/// Concurrence of one dimer peak straight from its fitted `xx` coefficients,
/// `C = 2|A_01| / (A_00 + A_11)`, with a first-order standard error. When
/// `a10` is given, `A_01` is averaged with `conj(A_10)`.
pub fn concurrence_from_coefficients(a00: &Coefficient, a11: &Coefficient, a01: &Coefficient, a10: Option<&Coefficient>) -> Result<(f64, f64)> {
    let (x, y, sx, sy) = match a10 {
        Some(r) => (
            0.5 * (a01.a + r.a),
            0.5 * (a01.b - r.b),
            0.5 * a01.a_stderr.hypot(r.a_stderr),
            0.5 * a01.b_stderr.hypot(r.b_stderr),
        ),
        None => (a01.a, a01.b, a01.a_stderr, a01.b_stderr),
    };
    let s = a00.a + a11.a;
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("peak carries no positive autocorrelation weight".into()));
    }
    let m = x.hypot(y);
    let c = 2.0 * m / s;
    let var_m = if m > 0.0 { ((x * sx).powi(2) + (y * sy).powi(2)) / (m * m) } else { sx * sx + sy * sy };
    let var_s = a00.a_stderr.powi(2) + a11.a_stderr.powi(2);
    let stderr = (4.0 * var_m / (s * s) + c * c * var_s / (s * s)).sqrt();
    Ok((c, stderr))
}

/// Reads a cut CSV with columns `Qx,Qy,Qz,E,I`.
pub fn read_cut_csv(path: &Path) -> Result<Vec<CutSample>> {
    let text = read_to_string(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let expected = ["Qx", "Qy", "Qz", "E", "I"];
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::parse(path.display().to_string(), format!("expected header {}", expected.join(","))));
    }
    reader
        .deserialize::<CutSample>()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Channel;
    use crate::ins::{q_cut, FormFactorTable, ScatteringSetup, Span};
    use crate::spectral::reference_model;
    use crate::spin::{presets, Axis, SpinSystem};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn bell_and_product_states() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DimerExcitedState::new(c(0.0), c(h), c(-h), c(0.0)).unwrap();
        assert!((concurrence_exact(&bell) - 1.0).abs() < 1e-12);
        let product = DimerExcitedState::new(c(0.0), c(1.0), c(0.0), c(0.0)).unwrap();
        assert_eq!(concurrence_exact(&product), 0.0);
        assert!(DimerExcitedState::new(c(1.0), c(1.0), c(0.0), c(0.0)).is_err());
    }

    #[test]
    fn molecule_2_first_excited_state() {
        let solver = ExactSolver::new(&presets::molecule_2()).unwrap();
        let state = DimerExcitedState::from_level(&solver, 1).unwrap();
        let conc = concurrence_exact(&state);
        assert!((conc - 0.371).abs() < 2e-3, "{conc}");
    }

    #[test]
    fn inelastic_levels_have_no_parallel_components() {
        for system in [presets::molecule_1(), presets::molecule_2(), presets::molecule_3()] {
            let solver = ExactSolver::new(&system).unwrap();
            let model = reference_model(&solver, &[Channel::auto(0, Axis::X), Channel::auto(1, Axis::X)], 1e-12).unwrap();
            assert_eq!(model.frequencies.len(), 2);
            for &w in &model.frequencies {
                let p = solver.energies().iter().position(|&e| (e - w).abs() < 1e-9).unwrap();
                let s = DimerExcitedState::from_level(&solver, p).unwrap();
                assert!(s.a.norm() < 1e-12 && s.d.norm() < 1e-12);
            }
        }
    }

    fn cut_concurrence(system: &SpinSystem) -> (f64, f64, ConcurrenceFit) {
        let solver = ExactSolver::new(system).unwrap();
        let model = reference_model(&solver, &[Channel::auto(0, Axis::X), Channel::auto(1, Axis::X), Channel::new(0, 1, Axis::X, Axis::X)], 1e-12).unwrap();
        let table = FormFactorTable::builtin();
        let setup = ScatteringSetup::uniform(system, &table, "Cu2+").unwrap();
        let e = model.frequencies[0];
        let cut = q_cut(&model, &setup, e, Span::range(0.05, 3.0, 0.05), 0.05).unwrap();
        let samples: Vec<CutSample> = cut.points.iter().zip(&cut.intensity).map(|(p, i)| [p[0], p[1], p[2], p[3], *i]).collect();
        let cu = table.get("Cu2+").unwrap();
        let fit = concurrence_from_qcut(&samples, presets::DIMER_SEPARATION, &cu, &cu).unwrap();
        let p = solver.energies().iter().position(|&x| (x - e).abs() < 1e-9).unwrap();
        let exact = concurrence_exact(&DimerExcitedState::from_level(&solver, p).unwrap());
        (fit.concurrence, exact, fit)
    }

    #[test]
    fn oracle_cuts_reproduce_exact_concurrence() {
        let (c1, e1, _) = cut_concurrence(&presets::molecule_1());
        assert!((c1 - e1).abs() < 1e-6 && (c1 - 1.0).abs() < 1e-6);
        let (c2, e2, _) = cut_concurrence(&presets::molecule_2());
        assert!((c2 - e2).abs() < 1e-6 && (c2 - 0.4).abs() < 0.1);
        let (c3, _, fit3) = cut_concurrence(&presets::molecule_3());
        assert_eq!(c3, 0.0);
        assert!(fit3.upper_bound.is_some());
    }

    #[test]
    fn coefficients_route_matches_exact() {
        for system in [presets::molecule_1(), presets::molecule_2(), presets::molecule_3()] {
            let solver = ExactSolver::new(&system).unwrap();
            let ch = [Channel::auto(0, Axis::X), Channel::auto(1, Axis::X), Channel::new(0, 1, Axis::X, Axis::X), Channel::new(1, 0, Axis::X, Axis::X)];
            let model = reference_model(&solver, &ch, 1e-12).unwrap();
            for (p, &w) in model.frequencies.iter().enumerate() {
                let k = |c: Channel| model.coefficient(c, p).unwrap();
                let (conc, err) = concurrence_from_coefficients(&k(ch[0]), &k(ch[1]), &k(ch[2]), Some(&k(ch[3]))).unwrap();
                let level = solver.energies().iter().position(|&e| (e - w).abs() < 1e-9).unwrap();
                let exact = concurrence_exact(&DimerExcitedState::from_level(&solver, level).unwrap());
                assert!((conc - exact).abs() < 1e-9 && err == 0.0);
            }
        }
        let z = Coefficient::default();
        assert!(concurrence_from_coefficients(&z, &z, &z, None).is_err());
        let half = Coefficient { a: 0.125, a_stderr: 0.01, ..z };
        let cross = Coefficient { a: -0.125, a_stderr: 0.01, ..z };
        let (c, e) = concurrence_from_coefficients(&half, &half, &cross, None).unwrap();
        assert!((c - 1.0).abs() < 1e-12 && (e - (4.0f64 * 0.0001 / 0.0625 + 2.0 * 0.0001 / 0.0625).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn clipping_and_bad_inputs() {
        let ff = FormFactor::unit();
        let r = 5.0;
        // Modulation stronger than the mean: unphysical, clipped.
        let samples: Vec<CutSample> = (1..60).map(|k| {
            let q = k as f64 * 0.05;
            [q, 0.0, 0.0, 2.0, 1.0 - 1.2 * (q * r).cos()]
        }).collect();
        let fit = concurrence_from_qcut(&samples, r, &ff, &ff).unwrap();
        assert!(fit.clipped && fit.concurrence == 1.0);
        assert!(concurrence_from_qcut(&samples, 0.0, &ff, &ff).is_err());
        assert!(matches!(concurrence_from_qcut(&samples[..3], r, &ff, &ff), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn cut_csv_round_trip() {
        let system = presets::molecule_1();
        let solver = ExactSolver::new(&system).unwrap();
        let model = reference_model(&solver, &[Channel::auto(0, Axis::X), Channel::new(0, 1, Axis::X, Axis::X), Channel::auto(1, Axis::X)], 1e-12).unwrap();
        let setup = ScatteringSetup::uniform(&system, &FormFactorTable::builtin(), "Cu2+").unwrap();
        let cut = q_cut(&model, &setup, 2.0, Span::range(0.1, 2.0, 0.1), 0.05).unwrap();
        let dir = tempfile::tempdir().unwrap();
        cut.write(dir.path(), "cut").unwrap();
        let back = read_cut_csv(&dir.path().join("cut.csv")).unwrap();
        assert_eq!(back.len(), cut.points.len());
        assert!((back[3][4] - cut.intensity[3]).abs() < 1e-12 * cut.intensity[3].abs().max(1.0));
        std::fs::write(dir.path().join("bad.csv"), "a,b\n1,2\n").unwrap();
        assert!(read_cut_csv(&dir.path().join("bad.csv")).is_err());
    }
}
