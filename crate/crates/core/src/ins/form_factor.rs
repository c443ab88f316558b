use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::read_to_string;

const BUILTIN: &str = include_str!("../../data/j0_form_factors.dat");

/// Dipole-approximation `⟨j0⟩` form factor
/// `A e^{−a s²} + B e^{−b s²} + C e^{−c s²} + D` with `s = Q / 4π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormFactor {
    pub ion: String,
    /// `[A, a, B, b, C, c, D]`.
    pub coefficients: [f64; 7],
}

impl FormFactor {
    /// `F(Q)`, `Q` in Å⁻¹.
    pub fn eval(&self, q: f64) -> f64 {
        let s2 = (q / (4.0 * std::f64::consts::PI)).powi(2);
        let k = &self.coefficients;
        k[0] * (-k[1] * s2).exp() + k[2] * (-k[3] * s2).exp() + k[4] * (-k[5] * s2).exp() + k[6]
    }

    /// Constant `F = 1` (point-like moment).
    pub fn unit() -> Self {
        FormFactor {
            ion: "unit".into(),
            coefficients: [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        }
    }
}

/// Named form factors. Text format: one ion per line, `label A a B b C c D`,
/// whitespace separated; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FormFactorTable {
    ions: BTreeMap<String, FormFactor>,
}

impl FormFactorTable {
    /// The shipped table (`data/j0_form_factors.dat`).
    pub fn builtin() -> Self {
        FormFactorTable::parse(BUILTIN).expect("shipped form-factor table parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut ions = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 8 {
                return Err(Error::parse("form factor table", format!("line {}: expected label and 7 coefficients", n + 1)));
            }
            let mut k = [0.0; 7];
            for (slot, f) in k.iter_mut().zip(&fields[1..]) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::parse("form factor table", format!("line {}: bad number '{f}'", n + 1)))?;
            }
            ions.insert(fields[0].to_string(), FormFactor { ion: fields[0].to_string(), coefficients: k });
        }
        Ok(FormFactorTable { ions })
    }

    pub fn load(path: &Path) -> Result<Self> {
        FormFactorTable::parse(&read_to_string(path)?)
    }

    /// Adds or replaces entries from `other`.
    pub fn extend(&mut self, other: FormFactorTable) {
        self.ions.extend(other.ions);
    }

    pub fn get(&self, ion: &str) -> Result<FormFactor> {
        if ion == "unit" {
            return Ok(FormFactor::unit());
        }
        self.ions.get(ion).cloned().ok_or_else(|| Error::UnknownIon(ion.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.ions.keys().map(String::as_str)
    }
}
