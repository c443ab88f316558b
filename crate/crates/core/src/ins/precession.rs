use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{site_operator, Axis, ExactSolver};

/// Spin expectation vectors `⟨s_i⟩` of every ion at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecessionFrame {
    pub t: f64,
    pub spins: Vec<[f64; 3]>,
}

/// Motion of the spins in `√(1−ε²)|0⟩ + ε|p⟩`, which precess at `E_p`.
pub fn precession_pattern(solver: &ExactSolver, p: usize, epsilon: f64, times: &[f64]) -> Result<Vec<PrecessionFrame>> {
    let eig = solver.eigen();
    if p == 0 || p >= eig.dim() {
        return Err(Error::IndexOutOfRange { index: p, limit: eig.dim() });
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("amplitude {epsilon} outside [0, 1]")));
    }
    eig.require_unique_ground()?;
    if eig.is_degenerate(p) {
        return Err(Error::DegenerateLevel { level: p });
    }
    let system = solver.system();
    let v0: DVector<Complex64> = eig.vector(0);
    let vp: DVector<Complex64> = eig.vector(p);
    // For each site and axis: (⟨0|s|0⟩, ⟨p|s|p⟩, ⟨0|s|p⟩).
    let mut elems = Vec::with_capacity(system.n_spins());
    for i in 0..system.n_spins() {
        let mut per_axis = [(0.0, 0.0, Complex64::new(0.0, 0.0)); 3];
        for a in Axis::ALL {
            let s = site_operator(system, i, a)?;
            let sv0 = s.matrix() * &v0;
            let svp = s.matrix() * &vp;
            per_axis[a.index()] = (v0.dotc(&sv0).re, vp.dotc(&svp).re, v0.dotc(&svp));
        }
        elems.push(per_axis);
    }
    let e_p = eig.energies()[p];
    let (c0, cp) = ((1.0 - epsilon * epsilon).sqrt(), epsilon);
    Ok(times
        .iter()
        .map(|&t| {
            let phase = Complex64::from_polar(1.0, -e_p * t);
            let spins = elems
                .iter()
                .map(|per_axis| per_axis.map(|(d0, dp, x)| c0 * c0 * d0 + cp * cp * dp + 2.0 * c0 * cp * (phase * x).re))
                .collect();
            PrecessionFrame { t, spins }
        })
        .collect())
}
