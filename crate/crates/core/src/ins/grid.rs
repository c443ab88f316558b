use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid axis: a fixed value or an inclusive range `min..=max` in steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Span {
    Fixed(f64),
    Range { min: f64, max: f64, step: f64 },
}

impl Span {
    pub fn range(min: f64, max: f64, step: f64) -> Self {
        Span::Range { min, max, step }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        match *self {
            Span::Fixed(v) if v.is_finite() => Ok(()),
            Span::Fixed(_) => Err(Error::InvalidGrid(format!("{name}: value is not finite"))),
            Span::Range { min, max, step } => {
                if !(step > 0.0) || !step.is_finite() {
                    Err(Error::InvalidGrid(format!("{name}: step must be positive")))
                } else if !(max >= min) || !min.is_finite() || !max.is_finite() {
                    Err(Error::InvalidGrid(format!("{name}: empty range")))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            Span::Fixed(v) => vec![v],
            Span::Range { min, max, step } => {
                let n = ((max - min) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|k| min + k as f64 * step).collect()
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Cartesian `(Q_x, Q_y, Q_z, E)` grid; Q in Å⁻¹, E in units of J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QEGrid {
    pub qx: Span,
    pub qy: Span,
    pub qz: Span,
    pub energy: Span,
}

impl QEGrid {
    pub fn validate(&self) -> Result<()> {
        self.qx.validate("qx")?;
        self.qy.validate("qy")?;
        self.qz.validate("qz")?;
        self.energy.validate("energy")
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.qx.len(), self.qy.len(), self.qz.len(), self.energy.len()]
    }

    /// Points in row-major order (`Q_x` slowest, `E` fastest).
    pub fn points(&self) -> Vec<[f64; 4]> {
        let (qx, qy, qz, e) = (self.qx.values(), self.qy.values(), self.qz.values(), self.energy.values());
        let mut out = Vec::with_capacity(qx.len() * qy.len() * qz.len() * e.len());
        for &a in &qx {
            for &b in &qy {
                for &c in &qz {
                    for &d in &e {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
        out
    }
}

/// Box `[−q_max, q_max]³` sampled with `points` midpoints per axis, used to
/// integrate intensities over momentum transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QBox {
    pub q_max: f64,
    pub points: usize,
}

impl Default for QBox {
    fn default() -> Self {
        QBox { q_max: 2.5, points: 24 }
    }
}

impl QBox {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_max > 0.0) || self.points == 0 {
            return Err(Error::InvalidGrid("Q box needs q_max > 0 and at least one point".into()));
        }
        Ok(())
    }

    pub fn samples(&self) -> Vec<[f64; 3]> {
        let h = 2.0 * self.q_max / self.points as f64;
        let axis: Vec<f64> = (0..self.points).map(|k| -self.q_max + (k as f64 + 0.5) * h).collect();
        let mut out = Vec::with_capacity(self.points.pow(3));
        for &x in &axis {
            for &y in &axis {
                for &z in &axis {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }
}
