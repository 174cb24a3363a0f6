use serde::{Deserialize, Serialize};

use super::{domain, ModelError, PEP_FORBIDDEN_EV};
use crate::Real;

/// A fluorescence line with a relative intensity inside its own K series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionLine<T> {
    pub label: String,
    pub energy_ev: T,
    pub relative_intensity: T,
}

impl<T: Real> EmissionLine<T> {
    pub fn new(label: impl Into<String>, energy_ev: T, relative_intensity: T) -> Result<Self, ModelError> {
        let line = Self {
            label: label.into(),
            energy_ev,
            relative_intensity,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.energy_ev > T::zero()) || !self.energy_ev.is_finite() {
            return Err(domain(format!("line `{}`: energy must be positive", self.label)));
        }
        if !(self.relative_intensity > T::zero() && self.relative_intensity <= T::one()) {
            return Err(domain(format!(
                "line `{}`: relative intensity {} outside (0, 1]",
                self.label, self.relative_intensity
            )));
        }
        Ok(())
    }
}

/// Emission lines kept sorted by energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EmissionLine<T>>", into = "Vec<EmissionLine<T>>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct LineTable<T> {
    lines: Vec<EmissionLine<T>>,
}

impl<T: Real> LineTable<T> {
    pub fn new(mut lines: Vec<EmissionLine<T>>) -> Result<Self, ModelError> {
        for line in &lines {
            line.validate()?;
        }
        lines.sort_by(|a, b| a.energy_ev.partial_cmp(&b.energy_ev).expect("finite energies"));
        let mut labels: Vec<&str> = lines.iter().map(|l| l.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(dup) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::Config(format!("duplicate line `{}`", dup[0])));
        }
        Ok(Self { lines })
    }

    pub fn lookup(&self, label: &str) -> Result<&EmissionLine<T>, ModelError> {
        self.lines
            .iter()
            .find(|l| l.label == label)
            .ok_or_else(|| ModelError::UnknownLine(label.to_owned()))
    }

    /// Overrides the relative intensity of an existing line.
    pub fn set_intensity(&mut self, label: &str, relative_intensity: T) -> Result<(), ModelError> {
        let line = self
            .lines
            .iter_mut()
            .find(|l| l.label == label)
            .ok_or_else(|| ModelError::UnknownLine(label.to_owned()))?;
        let mut updated = line.clone();
        updated.relative_intensity = relative_intensity;
        updated.validate()?;
        *line = updated;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &EmissionLine<T>> {
        self.lines.iter()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

impl<T: Real> TryFrom<Vec<EmissionLine<T>>> for LineTable<T> {
    type Error = ModelError;

    fn try_from(lines: Vec<EmissionLine<T>>) -> Result<Self, Self::Error> {
        Self::new(lines)
    }
}

impl<T> From<LineTable<T>> for Vec<EmissionLine<T>> {
    fn from(table: LineTable<T>) -> Self {
        table.lines
    }
}

// Kα1/Kα2 are merged into one intensity-weighted line per element. Kβ
// intensities are Kβ/Kα ratios; they can be overridden from the config file.
const DEFAULT_LINES: &[(&str, f64, f64)] = &[
    ("ti_ka", 4511.0, 1.0),
    ("ti_kb", 4932.0, 0.13),
    ("mn_ka", 5899.0, 1.0),
    ("mn_kb", 6490.0, 0.135),
    ("pep_forbidden", PEP_FORBIDDEN_EV, 1.0),
    ("cu_ka", 8040.0, 1.0),
    ("cu_kb", 8905.0, 0.136),
];

pub fn default_line_table<T: Real>() -> LineTable<T> {
    let lines = DEFAULT_LINES
        .iter()
        .map(|&(label, energy, intensity)| EmissionLine {
            label: label.to_owned(),
            energy_ev: T::lit(energy),
            relative_intensity: T::lit(intensity),
        })
        .collect();
    LineTable::new(lines).expect("built-in line table is valid")
}
